//! Divisor classes: the Picard basis `ζ_α`, curve classes of the walls
//! `τ(β)`, the Kähler class, and cell counts.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::constants::ConstantBundle;
use crate::exact::{self, fmt_q, Q};
use crate::fan::{Fan, LatticeModel};
use crate::poset::Poset;

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize)]
pub enum InvariantsError {
    #[error("the cone τ({0}) lies in {1} maximal cones instead of 2")]
    ConeNotWall(String, usize),
    #[error("the lattice carries no scaling constants")]
    MissingScaling,
}

/// `ρ*(η)`: the covector on Γ̃ given by `(α,ν) ↦ ⟨η, Y_{α,ν}⟩`.
pub fn rho_star(lat: &LatticeModel, eta: &[BigInt]) -> Vec<BigInt> {
    lat.rays()
        .iter()
        .map(|y| y.iter().zip(eta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Coordinates of the class of `ξ ∈ Γ̃*` in the basis `ζ_α = [Ỹ*_{α,0}]`.
pub fn picard_reduce(lat: &LatticeModel, xi: &[BigInt]) -> Vec<BigInt> {
    let p = lat.poset();
    // η agrees with ξ on the basis Y_{α,ν}, ν ≥ 1; subtract ρ*(η).
    let mut eta = Vec::with_capacity(lat.dim());
    for a in 0..p.len() {
        for nu in 1..=p.size(a) {
            eta.push(xi[p.j_position(a, nu)].clone());
        }
    }
    (0..p.len())
        .map(|a| {
            let y0 = lat.ray(a, 0);
            let pair: BigInt = y0.iter().zip(&eta).map(|(x, y)| x * y).sum();
            &xi[p.j_position(a, 0)] - pair
        })
        .collect()
}

/// Intersection numbers `D_ρ · C` of every torus-invariant divisor with
/// the curve `V(τ)`, for the wall `τ` = all `(γ,ν≥1)` except `(β,1)`.
pub fn wall_intersections(lat: &LatticeModel, fan: &Fan, b: usize) -> Result<Vec<Q>, InvariantsError> {
    let p = lat.poset();
    let n = lat.dim();
    let skip = p.j_position(b, 1);
    let tau: Vec<usize> = (0..lat.rays().len())
        .filter(|&i| lat.index_j()[i].1 >= 1 && i != skip)
        .collect();
    let walls: Vec<&Vec<usize>> = fan
        .cones
        .iter()
        .filter(|c| tau.iter().all(|i| c.contains(i)))
        .collect();
    if walls.len() != 2 {
        return Err(InvariantsError::ConeNotWall(p.name(b).into(), walls.len()));
    }
    let extra: Vec<usize> = walls
        .iter()
        .map(|c| *c.iter().find(|i| !tau.contains(i)).unwrap())
        .collect();
    let (u, u2) = (extra[0], extra[1]);
    // Solve u + u′ = Σ b_w w over the basis τ ∪ {u}.
    let mut basis: Vec<usize> = tau.clone();
    basis.push(u);
    let mat: Vec<Vec<Q>> = (0..n)
        .map(|i| basis.iter().map(|&k| Q::from_integer(lat.rays()[k][i].clone())).collect())
        .collect();
    let rhs: Vec<Q> = (0..n)
        .map(|i| Q::from_integer(&lat.rays()[u][i] + &lat.rays()[u2][i]))
        .collect();
    let coef = exact::solve(&mat, &rhs).expect("maximal cone is a basis");
    debug_assert!(coef[n - 1].is_zero());
    let mut out = vec![Q::zero(); lat.rays().len()];
    out[u] = Q::one();
    out[u2] = Q::one();
    for (k, &w) in tau.iter().enumerate() {
        out[w] = -coef[k].clone();
    }
    Ok(out)
}

/// The matrix `⟨ζ_α, [V(τ(β))]⟩`, rows α, columns β.
pub fn chern_pairing(lat: &LatticeModel, fan: &Fan) -> Result<Vec<Vec<Q>>, InvariantsError> {
    let p = lat.poset();
    let mut cols = Vec::with_capacity(p.len());
    for b in 0..p.len() {
        let dc = wall_intersections(lat, fan, b)?;
        cols.push((0..p.len()).map(|a| dc[p.j_position(a, 0)].clone()).collect::<Vec<Q>>());
    }
    Ok((0..p.len()).map(|a| (0..p.len()).map(|b| cols[b][a].clone()).collect()).collect())
}

/// Pairing of an arbitrary divisor `ξ ∈ Γ̃*` with `V(τ(β))`.
pub fn divisor_degree(lat: &LatticeModel, fan: &Fan, xi: &[BigInt], b: usize) -> Result<Q, InvariantsError> {
    let dc = wall_intersections(lat, fan, b)?;
    Ok(xi.iter().zip(&dc).map(|(x, d)| Q::from_integer(x.clone()) * d).sum())
}

/// `[ω]/2π` in the basis `ζ_α` and the periods `∫_{V(τ(α))} ω / 2π`.
#[derive(Clone, Debug)]
pub struct KahlerClass {
    pub coefficients: Vec<Q>,
    pub periods: Vec<Q>,
}

pub fn kahler_class(poset: &Poset, bundle: &ConstantBundle) -> KahlerClass {
    let k = poset.len();
    let m = bundle.m_rows(poset);
    let mut coefficients = vec![Q::zero(); k];
    for a in 0..k {
        let root = poset.root(a);
        let mut prod = Q::one() / &bundle.d[root];
        let mut cur = a;
        while cur != root {
            prod *= &m[cur].as_ref().unwrap()[0];
            cur = poset.parent(cur).unwrap();
        }
        coefficients[a] = prod;
    }
    let periods = (0..k)
        .map(|a| {
            let mut v = Q::one() / &bundle.d[a];
            for b in poset.strict_downset(a) {
                let e = bundle.e_between(poset, b, a);
                for c in &bundle.c[b][1..] {
                    v *= c + e;
                }
            }
            v
        })
        .collect();
    KahlerClass { coefficients, periods }
}

impl KahlerClass {
    /// Pairs the class against the curve classes through `pairing`.
    pub fn paired(&self, pairing: &[Vec<Q>]) -> Vec<Q> {
        let k = self.coefficients.len();
        (0..k)
            .map(|b| (0..k).map(|a| &self.coefficients[a] * &pairing[a][b]).sum())
            .collect()
    }
}

/// Euler characteristic and the number of cells in each even dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub euler: usize,
    /// `counts[k]` = number of 2k-cells.
    pub counts: Vec<usize>,
}

pub fn cell_counts(poset: &Poset) -> CellCounts {
    let mut counts = vec![0; poset.dim() + 1];
    for s in poset.sections() {
        counts[s.degree()] += 1;
    }
    CellCounts { euler: poset.section_count(), counts }
}

/// The JSON invariants report.
pub fn invariants_report(
    lat: &LatticeModel,
    pairing: &[Vec<Q>],
    kahler: Option<&KahlerClass>,
    cells: &CellCounts,
) -> Value {
    let p = lat.poset();
    let names: Vec<&str> = (0..p.len()).map(|a| p.name(a)).collect();
    let mat: Vec<Vec<String>> = pairing.iter().map(|r| r.iter().map(fmt_q).collect()).collect();
    let identity = pairing
        .iter()
        .enumerate()
        .all(|(i, r)| r.iter().enumerate().all(|(j, x)| *x == if i == j { Q::one() } else { Q::zero() }));
    let kahler_json = kahler.map(|kc| {
        let paired = kc.paired(pairing);
        json!({
            "class_over_2pi": kc.coefficients.iter().map(fmt_q).collect::<Vec<_>>(),
            "periods_over_2pi": kc.periods.iter().map(fmt_q).collect::<Vec<_>>(),
            "pairing_matches_periods": paired == kc.periods,
        })
    });
    json!({
        "picard_basis": names,
        "picard_rank": p.len(),
        "chern_pairing": mat,
        "chern_pairing_identity": identity,
        "kahler": kahler_json,
        "cells": cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{even_row, int_row};
    use crate::exact::{q, qi, to_bigint_vec};
    use crate::fan::{build_fan, build_lattice};
    use crate::poset::Kind;
    use std::collections::BTreeMap;

    fn poset(spec: &[(&str, usize)], covers: &[(&str, &str)]) -> Poset {
        let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
        let sizes: BTreeMap<String, usize> = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        let covers: Vec<(String, String)> = covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Poset::new(&elements, &sizes, &covers, Kind::B).unwrap()
    }

    #[test]
    fn projective_plane_picard() {
        let p = poset(&[("a", 2)], &[]);
        let lat = LatticeModel::from_m(&p, &vec![None]).unwrap();
        let fan = build_fan(&lat);
        for nu in 0..3 {
            let mut xi = vec![BigInt::zero(); 3];
            xi[nu] = BigInt::one();
            assert_eq!(picard_reduce(&lat, &xi), vec![BigInt::one()]);
        }
        assert_eq!(chern_pairing(&lat, &fan).unwrap(), vec![vec![qi(1)]]);
        let eta = to_bigint_vec(&[3, -7]);
        assert_eq!(picard_reduce(&lat, &rho_star(&lat, &eta)), vec![BigInt::zero()]);
    }

    #[test]
    fn chain_kahler() {
        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        let bundle = ConstantBundle::from_named(
            &p,
            &BTreeMap::from([("b".to_string(), even_row(1))]),
            &[("b".into(), "a".into(), qi(1))],
            &BTreeMap::from([("b".to_string(), qi(1)), ("a".to_string(), q(1, 2))]),
        )
        .unwrap();
        assert_eq!(bundle.m_rows(&p)[1], Some(int_row(&[2, 4])));
        let lat = build_lattice(&p, &bundle).unwrap();
        let fan = build_fan(&lat);
        let pairing = chern_pairing(&lat, &fan).unwrap();
        assert_eq!(pairing, vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]]);
        let kc = kahler_class(&p, &bundle);
        assert_eq!(kc.periods, vec![qi(1), qi(2)]);
        assert_eq!(kc.coefficients, vec![qi(1), qi(2)]);
        assert_eq!(kc.paired(&pairing), kc.periods);
    }

    #[test]
    fn cells() {
        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        assert_eq!(cell_counts(&p), CellCounts { euler: 6, counts: vec![1, 2, 2, 1] });
        let p = poset(&[("x", 1), ("y", 1)], &[]);
        assert_eq!(cell_counts(&p).counts, vec![1, 2, 1]);
        let p = poset(&[("a", 3)], &[]);
        assert_eq!(cell_counts(&p).counts, vec![1, 1, 1, 1]);
    }
}
