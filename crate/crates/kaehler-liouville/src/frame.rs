//! Pointwise coefficient algebra on the open stratum: the functions
//! `a_i`, `u_α`, `v_i`, the matrices `b` and `f`, and the weights of the
//! generating polynomials `F_α(λ)`.
//!
//! Indices `i, j` are global coordinate indices `0..n`; block `α` owns the
//! contiguous range `offset(α)..offset(α)+|α|`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::constants::ConstantBundle;
use crate::exact::to_f64;
use crate::poset::Poset;

/// Relative gap below which two values of one block count as equal.
pub const COLLISION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
pub enum FrameError {
    #[error("block {block}: row has {got} values, expected {expected}")]
    RowLength { block: String, expected: usize, got: usize },
    #[error("block {block}: h values {i} and {j} collide")]
    StratumCollision { block: String, i: usize, j: usize },
    #[error("block {block}: h row is not strictly decreasing at position {i}")]
    NotOrdered { block: String, i: usize },
    #[error("block {block}: u vanishes (h + e = 0 below it)")]
    VanishingU { block: String },
    #[error("block {block} has no conjunction constant to its parent")]
    MissingConjunction { block: String },
    #[error("λ = {lambda} is the removable pole −e of block {block}")]
    PoleAtLambda { block: String, lambda: f64 },
}

/// Values of the fundamental functions at one point, with the constants `e`.
#[derive(Clone, Debug)]
pub struct HPoint<'p> {
    poset: &'p Poset,
    h: Vec<f64>,
    /// `e[α] = e_{𝔭α,α}`.
    e: Vec<Option<f64>>,
}

impl<'p> HPoint<'p> {
    pub fn new(poset: &'p Poset, rows: &[Vec<f64>], e: &[Option<f64>]) -> Result<HPoint<'p>, FrameError> {
        let mut h = Vec::with_capacity(poset.dim());
        for a in 0..poset.len() {
            let k = poset.size(a);
            let row = &rows[a];
            if row.len() != k {
                return Err(FrameError::RowLength { block: poset.name(a).into(), expected: k, got: row.len() });
            }
            for i in 0..k {
                for j in i + 1..k {
                    let scale = row[i].abs().max(row[j].abs()).max(1.0);
                    if (row[i] - row[j]).abs() < COLLISION_TOL * scale {
                        return Err(FrameError::StratumCollision { block: poset.name(a).into(), i, j });
                    }
                }
                if i + 1 < k && row[i] < row[i + 1] {
                    return Err(FrameError::NotOrdered { block: poset.name(a).into(), i });
                }
            }
            h.extend_from_slice(row);
            if poset.parent(a).is_some() && e[a].is_none() {
                return Err(FrameError::MissingConjunction { block: poset.name(a).into() });
            }
        }
        let pt = HPoint { poset, h, e: e.to_vec() };
        for a in 0..poset.len() {
            if pt.u(a) == 0.0 {
                return Err(FrameError::VanishingU { block: poset.name(a).into() });
            }
        }
        Ok(pt)
    }

    /// Conjunction constants taken from a bundle.
    pub fn from_bundle(poset: &'p Poset, bundle: &ConstantBundle, rows: &[Vec<f64>]) -> Result<HPoint<'p>, FrameError> {
        let e: Vec<Option<f64>> = bundle.e.iter().map(|x| x.as_ref().map(to_f64)).collect();
        HPoint::new(poset, rows, &e)
    }

    /// A random point: each row sorted uniform in `(0,1)`, each `e` drawn
    /// from `(0.05, 3)` or `(−4, −1.05)`.
    pub fn random<R: Rng>(poset: &'p Poset, rng: &mut R) -> HPoint<'p> {
        loop {
            let rows: Vec<Vec<f64>> = (0..poset.len())
                .map(|a| {
                    let mut r: Vec<f64> = (0..poset.size(a)).map(|_| rng.gen_range(0.001..0.999)).collect();
                    r.sort_by(|x, y| y.partial_cmp(x).unwrap());
                    r
                })
                .collect();
            let e: Vec<Option<f64>> = (0..poset.len())
                .map(|a| {
                    poset.parent(a).map(|_| {
                        if rng.gen_bool(0.5) {
                            rng.gen_range(0.05..3.0)
                        } else {
                            rng.gen_range(-4.0..-1.05)
                        }
                    })
                })
                .collect();
            if let Ok(p) = HPoint::new(poset, &rows, &e) {
                if p.min_gap() > 1e-3 {
                    return p;
                }
            }
        }
    }

    pub fn poset(&self) -> &'p Poset {
        self.poset
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let o = self.poset.offset(a);
        &self.h[o..o + self.poset.size(a)]
    }

    /// `e_{γα}` for `γ ≺ α`.
    pub fn e_between(&self, g: usize, a: usize) -> f64 {
        self.e[self.poset.child_towards(g, a)].expect("checked at construction")
    }

    /// Smallest gap between two values of one block.
    pub fn min_gap(&self) -> f64 {
        (0..self.poset.len())
            .flat_map(|a| self.row(a).windows(2).map(|w| w[0] - w[1]).collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    }

    /// `u_α = Π_{γ≺α} Π_{k∈γ} (h_k + e_{γα})`.
    pub fn u(&self, a: usize) -> f64 {
        self.poset
            .strict_downset(a)
            .into_iter()
            .map(|g| {
                let e = self.e_between(g, a);
                self.row(g).iter().map(|h| h + e).product::<f64>()
            })
            .product()
    }

    /// `v_α(λ) = u_α Π_ν (h_{α,ν} − λ)`.
    pub fn v_poly(&self, a: usize, lambda: f64) -> f64 {
        self.u(a) * self.row(a).iter().map(|h| h - lambda).product::<f64>()
    }

    fn block_of(&self, i: usize) -> usize {
        (0..self.poset.len())
            .find(|&a| i >= self.poset.offset(a) && i < self.poset.offset(a) + self.poset.size(a))
            .expect("index in range")
    }

    /// `m(i) = #{j ∈ α : h_i > h_j}`.
    pub fn m_count(&self, i: usize) -> usize {
        let a = self.block_of(i);
        self.row(a).iter().filter(|&&x| self.h[i] > x).count()
    }

    /// `m(α,β) = #{i ∈ α : h_i + e_{αβ} < 0}` for a cover `α ⋖ β`.
    pub fn m_pair(&self, a: usize, b: usize) -> usize {
        let e = self.e_between(a, b);
        self.row(a).iter().filter(|&&x| x + e < 0.0).count()
    }
}

/// Elementary symmetric functions `S_0..S_k` of `xs`.
pub fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; xs.len() + 1];
    s[0] = 1.0;
    for (k, &x) in xs.iter().enumerate() {
        for m in (1..=k + 1).rev() {
            s[m] += s[m - 1] * x;
        }
    }
    s
}

/// The diagonal data `a_i`, `u_α` and `v_i`.
#[derive(Clone, Debug, Serialize)]
pub struct PointCoefficients {
    pub a: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn point_coefficients(pt: &HPoint) -> PointCoefficients {
    let p = pt.poset;
    let u: Vec<f64> = (0..p.len()).map(|a| pt.u(a)).collect();
    let mut a_out = Vec::with_capacity(p.dim());
    let mut v = Vec::with_capacity(p.dim());
    for a in 0..p.len() {
        let row = pt.row(a);
        for (r, &hi) in row.iter().enumerate() {
            let vd: f64 = row.iter().enumerate().filter(|&(s, _)| s != r).map(|(_, &hj)| hj - hi).product();
            a_out.push(1.0 / (vd.abs() * u[a].abs()));
        }
        let s = elementary_symmetric(row);
        let k = row.len();
        for r in 0..k {
            v.push(u[a] * s[k - r]);
        }
    }
    PointCoefficients { a: a_out, u, v }
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn b_matrix(pt: &HPoint) -> DMatrix<f64> {
    let p = pt.poset;
    let n = p.dim();
    let mut b = DMatrix::zeros(n, n);
    for a in 0..p.len() {
        let o = p.offset(a);
        let k = p.size(a);
        for i in o..o + k {
            let mi = pt.m_count(i);
            let hi = pt.h[i];
            for c in 0..k {
                b[(i, o + c)] = sign(mi) * (-hi).powi(c as i32);
            }
            for &child in p.children(a) {
                let t = p.offset(child) + p.size(child) - 1;
                let e = pt.e_between(a, child);
                // (−1)^{m(i)−1+m(α,β)}
                b[(i, t)] = sign(mi + 1 + pt.m_pair(a, child)) / (hi + e);
            }
        }
    }
    b
}

/// The matrix `(a_i b_{ij})`.
pub fn ab_matrix(pt: &HPoint) -> DMatrix<f64> {
    let a = point_coefficients(pt).a;
    let mut m = b_matrix(pt);
    for (i, ai) in a.iter().enumerate() {
        m.row_mut(i).scale_mut(*ai);
    }
    m
}

pub fn f_matrix(pt: &HPoint) -> DMatrix<f64> {
    let p = pt.poset;
    let n = p.dim();
    let mut f = DMatrix::zeros(n, n);
    for a in 0..p.len() {
        let o = p.offset(a);
        let k = p.size(a);
        let row = pt.row(a);
        let ua = pt.u(a).abs();
        let s_all = elementary_symmetric(row);
        for r in 0..k {
            let deg = k - 1 - r;
            for c in 0..k {
                let rest: Vec<f64> = row.iter().enumerate().filter(|&(s, _)| s != c).map(|(_, &x)| x).collect();
                f[(o + r, o + c)] = ua * elementary_symmetric(&rest)[deg];
            }
            for &child in p.children(a) {
                let e = pt.e_between(a, child);
                let val = ua * (0..=deg).map(|m| e.powi(m as i32) * s_all[deg - m]).sum::<f64>();
                for g in (0..p.len()).filter(|&g| p.le(child, g)) {
                    for j in p.offset(g)..p.offset(g) + p.size(g) {
                        f[(o + r, j)] = val;
                    }
                }
            }
        }
    }
    f
}

/// Residuals of the two matrix identities at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    /// `max |f·(ab) − I|`.
    pub inverse: f64,
    /// `max |Σ_{β⪰α} Σ_{j∈β} a_j b_{jk} − |u_α|⁻¹ δ_{k,t(α)}|`.
    pub column_sums: f64,
}

pub fn identity_residuals(pt: &HPoint) -> IdentityResiduals {
    let p = pt.poset;
    let n = p.dim();
    let ab = ab_matrix(pt);
    let f = f_matrix(pt);
    let inverse = (&f * &ab - DMatrix::<f64>::identity(n, n)).amax();
    let mut column_sums: f64 = 0.0;
    for a in 0..p.len() {
        let t = p.offset(a) + p.size(a) - 1;
        let target = 1.0 / pt.u(a).abs();
        for k in 0..n {
            let mut s = 0.0;
            for g in (0..p.len()).filter(|&g| p.le(a, g)) {
                for j in p.offset(g)..p.offset(g) + p.size(g) {
                    s += ab[(j, k)];
                }
            }
            let want = if k == t { target } else { 0.0 };
            column_sums = column_sums.max((s - want).abs());
        }
    }
    IdentityResiduals { inverse, column_sums }
}

/// Weights `w_j` with `F_α(λ) = Σ_j w_j a_j (P_j² + Q_j²)`.
///
/// At the removable pole `λ = −e_{αβ}` the quotient is replaced by its
/// limit `Σ_l Π_{l′≠l} (h_{l′} + e_{αβ})`.
pub fn generating_weights(pt: &HPoint, a: usize, lambda: f64) -> Vec<f64> {
    let p = pt.poset;
    let mut w = vec![0.0; p.dim()];
    let o = p.offset(a);
    let row = pt.row(a);
    let ua = pt.u(a).abs();
    for c in 0..row.len() {
        w[o + c] = ua * row.iter().enumerate().filter(|&(s, _)| s != c).map(|(_, &x)| x - lambda).product::<f64>();
    }
    for &child in p.children(a) {
        let e = pt.e_between(a, child);
        let val = if (lambda + e).abs() <= 1e-9 * (1.0 + e.abs()) {
            ua * (0..row.len())
                .map(|l| row.iter().enumerate().filter(|&(s, _)| s != l).map(|(_, &x)| x + e).product::<f64>())
                .sum::<f64>()
        } else {
            let num = row.iter().map(|x| x + e).product::<f64>() - row.iter().map(|x| x - lambda).product::<f64>();
            ua * num / (e + lambda)
        };
        for g in (0..p.len()).filter(|&g| p.le(child, g)) {
            for j in p.offset(g)..p.offset(g) + p.size(g) {
                w[j] = val;
            }
        }
    }
    w
}

/// Quotient form of the off-block weight; fails exactly at the pole.
pub fn quotient_weight(pt: &HPoint, a: usize, child: usize, lambda: f64) -> Result<f64, FrameError> {
    let e = pt.e_between(a, child);
    if lambda + e == 0.0 {
        return Err(FrameError::PoleAtLambda { block: pt.poset.name(child).into(), lambda });
    }
    let row = pt.row(a);
    let num = row.iter().map(|x| x + e).product::<f64>() - row.iter().map(|x| x - lambda).product::<f64>();
    Ok(pt.u(a).abs() * num / (e + lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::Kind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn poset(spec: &[(&str, usize)], covers: &[(&str, &str)]) -> Poset {
        let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
        let sizes: BTreeMap<String, usize> = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        let covers: Vec<(String, String)> = covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Poset::new(&elements, &sizes, &covers, Kind::B).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-13
    }

    #[test]
    fn two_by_two() {
        let p = poset(&[("a", 2)], &[]);
        let pt = HPoint::new(&p, &[vec![0.8, 0.3]], &[None]).unwrap();
        let c = point_coefficients(&pt);
        assert!(close(c.a[0], 2.0) && close(c.a[1], 2.0));
        let b = b_matrix(&pt);
        let want = [[-1.0, 0.8], [1.0, -0.3]];
        let f = f_matrix(&pt);
        let fw = [[0.3, 0.8], [1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(b[(i, j)], want[i][j]));
                assert!(close(f[(i, j)], fw[i][j]));
            }
        }
        let r = identity_residuals(&pt);
        assert!(r.inverse < 1e-14 && r.column_sums < 1e-14);
    }

    #[test]
    fn three_block_and_chain_scaling() {
        let p = poset(&[("a", 3)], &[]);
        let pt = HPoint::new(&p, &[vec![0.9, 0.5, 0.2]], &[None]).unwrap();
        assert!(close(point_coefficients(&pt).a[0], 1.0 / (0.4 * 0.7)));

        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        let pt = HPoint::new(&p, &[vec![0.5], vec![0.8, 0.3]], &[None, Some(1.0)]).unwrap();
        let c = point_coefficients(&pt);
        assert!(close(c.u[1], 1.5));
        assert!(close(c.a[1], 2.0 / 1.5));
        let b = b_matrix(&pt);
        // The (h_β + e)⁻¹ entry sits at t(α), the last index of α.
        assert!(close(b[(0, 2)], -1.0 / 1.5));
        assert_eq!(b[(0, 1)], 0.0);
        let r = identity_residuals(&pt);
        assert!(r.inverse < 1e-13, "{r:?}");
        assert!(r.column_sums < 1e-13, "{r:?}");
    }

    #[test]
    fn random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shapes = [
            poset(&[("a", 4)], &[]),
            poset(&[("b", 2), ("a", 3)], &[("b", "a")]),
            poset(&[("r", 1), ("x", 2), ("y", 2)], &[("r", "x"), ("r", "y")]),
            poset(&[("r", 2), ("x", 1), ("y", 3)], &[("r", "x"), ("x", "y")]),
        ];
        for p in &shapes {
            for _ in 0..50 {
                let pt = HPoint::random(p, &mut rng);
                let r = identity_residuals(&pt);
                assert!(r.inverse < 1e-10 && r.column_sums < 1e-10, "{:?} {r:?}", p.names());
            }
        }
    }

    #[test]
    fn weights() {
        let p = poset(&[("b", 2), ("a", 2)], &[("b", "a")]);
        let pt = HPoint::new(&p, &[vec![0.7, 0.2], vec![0.6, 0.4]], &[None, Some(0.5)]).unwrap();
        // At λ = h_{α,1} every in-block weight but the first carries the
        // vanishing factor.
        let w = generating_weights(&pt, 0, 0.7);
        assert_eq!(w[1], 0.0);
        assert!(w[0] != 0.0);
        // Polynomial identity with the rows of f.
        let f = f_matrix(&pt);
        let lam = 0.37;
        let w = generating_weights(&pt, 0, lam);
        for j in 0..4 {
            let s = f[(0, j)] + (-lam) * f[(1, j)];
            assert!((s - w[j]).abs() < 1e-13);
        }
        // Removable pole against a two-sided limit.
        let pole = generating_weights(&pt, 0, -0.5)[2];
        let eps = 1e-6;
        let lim = 0.5 * (quotient_weight(&pt, 0, 1, -0.5 + eps).unwrap() + quotient_weight(&pt, 0, 1, -0.5 - eps).unwrap());
        assert!((pole - lim).abs() < 1e-8);
        assert!(quotient_weight(&pt, 0, 1, -0.5).is_err());
    }
}
