//! The Fubini-Study metric on CP^n as a reference model.
//!
//! Points are unit vectors `z ∈ ℂ^{n+1}` modulo phase and covectors are
//! horizontal `ξ ∈ ℂ^{n+1}` (`Σ ξ_j z_j = 0`), acting on holomorphic
//! vectors by `λ(v) = Σ ξ_j v_j`.  With `Λ_{ij} = z̄_i ξ_j − z̄_j ξ_i`, the
//! quadratic integrals are
//!
//! ```text
//! G_i = Σ_{j≠i} |Λ_{ij}|² / (c_j − c_i)    (i = 1..n−1)
//! C   = Σ_{i,j} |Λ_{ij}|²
//! ```
//!
//! and the linear ones are the rotation momenta `J_i = −Im(z_i ξ_i)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{bracket_of_gradients, gradient};

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
pub enum FsError {
    #[error("the c-row must run 1 = c_0 > ... > c_n = 0")]
    BadRow,
    #[error("expected vectors of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("geodesic direction is parallel to the base point")]
    DegenerateDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FsIntegrals {
    pub g: Vec<f64>,
    pub casimir: f64,
    pub j: Vec<f64>,
}

impl FsIntegrals {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.g.clone();
        v.push(self.casimir);
        v.extend(&self.j);
        v
    }
}

#[derive(Clone, Debug)]
pub struct FsModel {
    c: Vec<f64>,
}

impl FsModel {
    pub fn new(c: Vec<f64>) -> Result<FsModel, FsError> {
        let ok = c.len() >= 2
            && c[0] == 1.0
            && *c.last().unwrap() == 0.0
            && c.windows(2).all(|w| w[0] > w[1]);
        if ok {
            Ok(FsModel { c })
        } else {
            Err(FsError::BadRow)
        }
    }

    /// Equally spaced row `c_i = 1 − i/n`.
    pub fn uniform(n: usize) -> FsModel {
        FsModel { c: (0..=n).map(|i| 1.0 - i as f64 / n as f64).collect() }
    }

    pub fn n(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    fn check(&self, v: &[C64]) -> Result<(), FsError> {
        if v.len() != self.n() + 1 {
            return Err(FsError::Dimension { expected: self.n() + 1, got: v.len() });
        }
        Ok(())
    }

    pub fn integrals(&self, z: &[C64], xi: &[C64]) -> Result<FsIntegrals, FsError> {
        self.check(z)?;
        self.check(xi)?;
        Ok(self.integrals_with_scale(z, xi).0)
    }

    /// The integrals and, for each, the same sum in absolute values (the
    /// scale relative drift is measured against).
    fn integrals_with_scale(&self, z: &[C64], xi: &[C64]) -> (FsIntegrals, Vec<f64>) {
        let n = self.n();
        let lam = |i: usize, j: usize| (z[i].conj() * xi[j] - z[j].conj() * xi[i]).norm_sqr();
        let mut g = Vec::with_capacity(n.saturating_sub(1));
        let mut scale = Vec::with_capacity(2 * n);
        for i in 1..n {
            let (mut v, mut s) = (0.0, 0.0);
            for j in (0..=n).filter(|&j| j != i) {
                let t = lam(i, j) / (self.c[j] - self.c[i]);
                v += t;
                s += t.abs();
            }
            g.push(v);
            scale.push(s);
        }
        let mut casimir = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                casimir += lam(i, j);
            }
        }
        scale.push(casimir);
        let zn = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let xn = xi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let j = (1..=n).map(|i| -(z[i] * xi[i]).im).collect();
        scale.extend(std::iter::repeat(zn * xn).take(n));
        (FsIntegrals { g, casimir, j }, scale)
    }

    /// Lifts a chart point `u` (`z_0 = 1`) with holomorphic momenta
    /// `π_k = λ(∂/∂u_k)` to a unit `z` and a horizontal covector.
    pub fn chart_lift(u: &[C64], pi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let nn = (1.0 + u.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        let mut z = vec![C64::new(1.0 / nn, 0.0)];
        z.extend(u.iter().map(|v| v / nn));
        let s: C64 = u.iter().zip(pi).map(|(a, b)| a * b).sum();
        let mut xi = vec![-s * nn];
        xi.extend(pi.iter().map(|v| v * nn));
        (z, xi)
    }

    /// All `2n` integrals as functions of real canonical chart
    /// coordinates `q = (Re u, Im u)`, `p = (p_Re, p_Im)`.
    pub fn chart_integrals(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let n = self.n();
        let u: Vec<C64> = (0..n).map(|k| C64::new(q[k], q[n + k])).collect();
        let pi: Vec<C64> = (0..n).map(|k| C64::new(0.5 * p[k], -0.5 * p[n + k])).collect();
        let (z, xi) = Self::chart_lift(&u, &pi);
        self.integrals_with_scale(&z, &xi).0.flatten()
    }
}

/// A unit-speed horizontal great circle `z(t) = z₀ cos t + w sin t`.
#[derive(Clone, Debug)]
pub struct Geodesic {
    z0: Vec<C64>,
    w: Vec<C64>,
}

fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
    n
}

impl Geodesic {
    /// Normalizes `z0` and makes `dir` a unit vector orthogonal to it.
    pub fn new(z0: &[C64], dir: &[C64]) -> Result<Geodesic, FsError> {
        if z0.len() != dir.len() {
            return Err(FsError::Dimension { expected: z0.len(), got: dir.len() });
        }
        let mut z0 = z0.to_vec();
        normalize(&mut z0);
        let len = dir.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let proj = hdot(&z0, dir);
        let mut w: Vec<C64> = dir.iter().zip(&z0).map(|(d, z)| d - z * proj).collect();
        let rest = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !(rest > 1e-10 * len) {
            return Err(FsError::DegenerateDirection);
        }
        normalize(&mut w);
        Ok(Geodesic { z0, w })
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Geodesic {
        loop {
            let z0 = random_vector(n + 1, rng);
            let d = random_vector(n + 1, rng);
            if let Ok(g) = Geodesic::new(&z0, &d) {
                return g;
            }
        }
    }

    /// The point and its covector `ξ = conj(ż)` at time `t`.
    pub fn at(&self, t: f64) -> (Vec<C64>, Vec<C64>) {
        let (s, c) = t.sin_cos();
        let z = self.z0.iter().zip(&self.w).map(|(a, b)| a * c + b * s).collect();
        let xi = self.z0.iter().zip(&self.w).map(|(a, b)| (b * c - a * s).conj()).collect();
        (z, xi)
    }
}

fn random_vector<R: Rng>(len: usize, rng: &mut R) -> Vec<C64> {
    (0..len).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Largest relative drift of all integrals over `samples` times in
/// `[0, 2π]` along the geodesic.
pub fn geodesic_drift(model: &FsModel, geo: &Geodesic, samples: usize) -> f64 {
    let (z, xi) = geo.at(0.0);
    let (i0, scale) = model.integrals_with_scale(&z, &xi);
    let v0 = i0.flatten();
    let mut worst: f64 = 0.0;
    for k in 1..=samples {
        let t = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let (z, xi) = geo.at(t);
        let v = model.integrals_with_scale(&z, &xi).0.flatten();
        for i in 0..v.len() {
            worst = worst.max((v[i] - v0[i]).abs() / scale[i]);
        }
    }
    worst
}

/// Largest normalized pairwise bracket of the `2n` integrals at random
/// chart points.
pub fn bracket_check<R: Rng>(model: &FsModel, samples: usize, step: f64, rng: &mut R) -> f64 {
    let n = model.n();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads: Vec<Vec<f64>> = (0..2 * n)
            .map(|i| gradient(&|q: &[f64], p: &[f64]| model.chart_integrals(q, p)[i], &q, &p, step))
            .collect();
        for a in 0..grads.len() {
            for b in a + 1..grads.len() {
                worst = worst.max(bracket_of_gradients(&grads[a], &grads[b]).1);
            }
        }
    }
    worst
}

/// A random unitary matrix (the Q factor of a random complex matrix).
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.qr().q()
}

/// Largest relative change of the Casimir sum under `z ↦ Uz`,
/// `ξ ↦ Ū ξ` over random points and unitaries.
pub fn unitary_check<R: Rng>(model: &FsModel, samples: usize, rng: &mut R) -> f64 {
    let n = model.n();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let geo = Geodesic::random(n, rng);
        let (z, xi) = geo.at(rng.gen_range(0.0..std::f64::consts::TAU));
        let u = random_unitary(n + 1, rng);
        let uz: Vec<C64> = (0..=n).map(|i| (0..=n).map(|k| u[(i, k)] * z[k]).sum()).collect();
        let uxi: Vec<C64> = (0..=n).map(|i| (0..=n).map(|k| u[(i, k)].conj() * xi[k]).sum()).collect();
        let before = model.integrals_with_scale(&z, &xi).0.casimir;
        let after = model.integrals_with_scale(&uz, &uxi).0.casimir;
        worst = worst.max((after - before).abs() / before);
    }
    worst
}
