#![allow(dead_code)]

use std::collections::BTreeMap;

use kaehler_liouville::constants::{constants_from_m, dual_involution, ConstantBundle, FreeChoices, MRows};
use kaehler_liouville::exact::{q, qi, Q};
use kaehler_liouville::poset::{Kind, Poset};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn poset(spec: &[(&str, usize)], covers: &[(&str, &str)], kind: Kind) -> Result<Poset, Vec<kaehler_liouville::poset::PosetError>> {
    let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
    let sizes: BTreeMap<String, usize> = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
    let covers: Vec<(String, String)> = covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    Poset::new(&elements, &sizes, &covers, kind)
}

/// A forest poset from a parent array (`parent[i] < i`) and sizes.
pub fn forest(parent: &[Option<usize>], sizes: &[usize]) -> Poset {
    let names: Vec<String> = (0..sizes.len()).map(|i| format!("b{i}")).collect();
    let size_map: BTreeMap<String, usize> = names.iter().cloned().zip(sizes.iter().copied()).collect();
    let covers: Vec<(String, String)> = parent
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (names[p].clone(), names[i].clone())))
        .collect();
    Poset::new(&names, &size_map, &covers, Kind::B).expect("forests are valid posets")
}

/// Every parent array on `k` nodes with `parent[i] ∈ {none} ∪ {0..i}`.
pub fn parent_arrays(k: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![]];
    for i in 0..k {
        let mut next = Vec::new();
        for p in &out {
            for choice in std::iter::once(None).chain((0..i).map(Some)) {
                let mut q = p.clone();
                q.push(choice);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Compositions of at most `max` into `k` positive parts.
pub fn size_vectors(k: usize, max: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=max.saturating_sub(k - 1) {
        for mut rest in size_vectors(k - 1, max - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All forest posets with at most `max_blocks` blocks and dimension at most `max_dim`.
pub fn all_forests(max_blocks: usize, max_dim: usize) -> Vec<Poset> {
    let mut out = Vec::new();
    for k in 1..=max_blocks {
        for parents in parent_arrays(k) {
            for sizes in size_vectors(k, max_dim) {
                out.push(forest(&parents, &sizes));
            }
        }
    }
    out
}

pub fn random_forest<R: Rng>(rng: &mut R, max_blocks: usize, max_dim: usize) -> Poset {
    let k = rng.gen_range(1..=max_blocks.min(max_dim));
    let parents: Vec<Option<usize>> =
        (0..k).map(|i| if i == 0 || rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..i)) }).collect();
    let mut sizes = vec![1; k];
    let extra = rng.gen_range(0..=max_dim - k);
    for _ in 0..extra {
        let i = rng.gen_range(0..k);
        sizes[i] += 1;
    }
    forest(&parents, &sizes)
}

/// Integral m-rows: siblings share a primitive strictly increasing row up
/// to positive integer multiples.
pub fn random_m<R: Rng>(poset: &Poset, rng: &mut R) -> MRows {
    let mut m: MRows = vec![None; poset.len()];
    for b in 0..poset.len() {
        let kids = poset.children(b);
        if kids.is_empty() {
            continue;
        }
        let mut vals: Vec<i64> = (1..=12).collect();
        vals.shuffle(rng);
        let mut row: Vec<i64> = vals[..=poset.size(b)].to_vec();
        row.sort_unstable();
        for &a in kids {
            let k = rng.gen_range(1..=3);
            m[a] = Some(row.iter().map(|&x| qi(k * x)).collect());
        }
    }
    m
}

/// A compatible bundle: integral m-rows, random free data, random
/// orientation flips.  Returns the bundle and the m-rows it was built from.
pub fn random_bundle<R: Rng>(poset: &Poset, rng: &mut R) -> (ConstantBundle, MRows) {
    let m = random_m(poset, rng);
    let mut free = FreeChoices::default();
    for a in 0..poset.len() {
        if poset.is_minimal(a) {
            free.d_minimal.insert(poset.name(a).to_string(), q(rng.gen_range(1..20), rng.gen_range(1..7)));
        }
        if poset.is_maximal(a) {
            free.c_maximal.insert(poset.name(a).to_string(), random_row(poset.size(a), rng));
        }
    }
    let mut bundle = constants_from_m(poset, &m, &free, false).expect("integral increasing rows invert");
    for b in 0..poset.len() {
        if !poset.children(b).is_empty() && rng.gen_bool(0.3) {
            bundle = dual_involution(poset, &bundle, b);
        }
    }
    let m = bundle.m_rows(poset);
    (bundle, m)
}

/// Strictly decreasing rational row from 1 to 0.
pub fn random_row<R: Rng>(size: usize, rng: &mut R) -> Vec<Q> {
    let den = 97;
    let mut inner: Vec<i64> = (1..den).collect();
    inner.shuffle(rng);
    let mut mid: Vec<i64> = inner[..size - 1].to_vec();
    mid.sort_unstable_by(|a, b| b.cmp(a));
    let mut row = vec![qi(1)];
    row.extend(mid.into_iter().map(|x| q(x, den)));
    row.push(qi(0));
    row
}

/// Strictly decreasing float row from 1 to 0 with gaps at least `gap`.
pub fn random_f64_row<R: Rng>(size: usize, gap: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut mid: Vec<f64> = (0..size - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
        mid.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut row = vec![1.0];
        row.extend(mid);
        row.push(0.0);
        if row.windows(2).all(|w| w[0] - w[1] >= gap) {
            return row;
        }
    }
}
