//! Fundamental, conjunction and scaling constants, and the rational
//! transition numbers `m_{α,ν}` derived from them.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exact::{fmt_q, is_int, qi, Q};
use crate::fan;
use crate::poset::Poset;

/// Per-block rows `m_{α,0..|𝔭(α)|}`; `None` for minimal blocks.
pub type MRows = Vec<Option<Vec<Q>>>;

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize)]
#[serde(tag = "error")]
pub enum ConstantsError {
    #[error("block `{block}`: c-row has length {got}, expected {expected}")]
    RowLength { block: String, got: usize, expected: usize },
    #[error("block `{block}`: c-row must start at 1 and end at 0")]
    RowEndpoints { block: String },
    #[error("block `{block}`: c-row not strictly decreasing at index {nu}")]
    RowNotDecreasing { block: String, nu: usize },
    #[error("no c-row given for non-maximal block `{0}`")]
    MissingRow(String),
    #[error("no scaling constant given for non-minimal block `{0}`")]
    MissingScaling(String),
    #[error("scaling constant of `{0}` is zero")]
    ZeroScaling(String),
    #[error("no conjunction constant from `{below}` to `{above}`")]
    MissingConjunction { below: String, above: String },
    #[error("conjunction constant from `{below}` to `{above}` lies in [-1, 0]")]
    ConjunctionRange { below: String, above: String },
    #[error("conjunction constants from `{below}` disagree along the chain through `{above}`")]
    ConjunctionInconsistent { below: String, above: String },
    #[error("`{below}` is not below `{above}`")]
    NotBelow { below: String, above: String },
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("block `{block}`: m-row has length {got}, expected {expected}")]
    MRowLength { block: String, got: usize, expected: usize },
    #[error("block `{block}`: m-row is not strictly increasing and positive")]
    NotMonotone { block: String },
    #[error("children of `{parent}` induce different c-rows (`{a}` vs `{b}` at index {nu})")]
    InconsistentSiblings { parent: String, a: String, b: String, nu: usize },
}

/// The constants `c`, `e`, `d` of a poset.
///
/// `e[α]` holds `e_{𝔭(α),α}` for non-minimal α.  For any `β ≺ α` the
/// constant `e_{βα}` equals `e[γ]` where γ is the child of β on the chain
/// down from α.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantBundle {
    pub c: Vec<Vec<Q>>,
    pub e: Vec<Option<Q>>,
    pub d: Vec<Q>,
}

/// Free data not determined by the m-numbers.
#[derive(Clone, Debug, Default)]
pub struct FreeChoices {
    /// `d_α` for minimal α (default 1).
    pub d_minimal: BTreeMap<String, Q>,
    /// c-rows for maximal α (default evenly spaced).
    pub c_maximal: BTreeMap<String, Vec<Q>>,
}

/// Evenly spaced row `1, 1-1/k, …, 0`.
pub fn even_row(k: usize) -> Vec<Q> {
    (0..=k).map(|nu| Q::one() - Q::new((nu as i64).into(), (k as i64).into())).collect()
}

fn check_row(block: &str, row: &[Q], size: usize, errs: &mut Vec<ConstantsError>) {
    if row.len() != size + 1 {
        errs.push(ConstantsError::RowLength { block: block.into(), got: row.len(), expected: size + 1 });
        return;
    }
    if !row[0].is_one() || !row[size].is_zero() {
        errs.push(ConstantsError::RowEndpoints { block: block.into() });
    }
    for nu in 1..=size {
        if row[nu] >= row[nu - 1] {
            errs.push(ConstantsError::RowNotDecreasing { block: block.into(), nu });
        }
    }
}

impl ConstantBundle {
    /// Assembles a bundle from named inputs, filling free choices with
    /// defaults and checking the row, conjunction and scaling conditions.
    pub fn from_named(
        poset: &Poset,
        c: &BTreeMap<String, Vec<Q>>,
        e: &[(String, String, Q)],
        d: &BTreeMap<String, Q>,
    ) -> Result<ConstantBundle, Vec<ConstantsError>> {
        let k = poset.len();
        let mut errs = Vec::new();
        for name in c.keys().chain(d.keys()) {
            if poset.index_of(name).is_none() {
                errs.push(ConstantsError::UnknownBlock(name.clone()));
            }
        }
        let mut rows = Vec::with_capacity(k);
        for a in 0..k {
            let name = poset.name(a);
            match c.get(name) {
                Some(r) => rows.push(r.clone()),
                None if poset.is_maximal(a) => rows.push(even_row(poset.size(a))),
                None => {
                    errs.push(ConstantsError::MissingRow(name.into()));
                    rows.push(even_row(poset.size(a)));
                }
            }
        }
        let mut ev: Vec<Option<Q>> = vec![None; k];
        for (below, above, val) in e {
            let (Some(b), Some(a)) = (poset.index_of(below), poset.index_of(above)) else {
                for x in [below, above] {
                    if poset.index_of(x).is_none() {
                        errs.push(ConstantsError::UnknownBlock(x.clone()));
                    }
                }
                continue;
            };
            if !poset.lt(b, a) {
                errs.push(ConstantsError::NotBelow { below: below.clone(), above: above.clone() });
                continue;
            }
            let child = poset.child_towards(b, a);
            match &ev[child] {
                Some(prev) if prev != val => errs.push(ConstantsError::ConjunctionInconsistent {
                    below: below.clone(),
                    above: above.clone(),
                }),
                _ => ev[child] = Some(val.clone()),
            }
        }
        let mut dv = Vec::with_capacity(k);
        for a in 0..k {
            let name = poset.name(a);
            if poset.parent(a).is_some() && ev[a].is_none() {
                errs.push(ConstantsError::MissingConjunction {
                    below: poset.name(poset.parent(a).unwrap()).into(),
                    above: name.into(),
                });
            }
            match d.get(name) {
                Some(x) => dv.push(x.clone()),
                None if poset.is_minimal(a) => dv.push(Q::one()),
                None => {
                    errs.push(ConstantsError::MissingScaling(name.into()));
                    dv.push(Q::one());
                }
            }
        }
        let bundle = ConstantBundle { c: rows, e: ev, d: dv };
        errs.extend(bundle.basic_errors(poset));
        if errs.is_empty() {
            Ok(bundle)
        } else {
            errs.dedup();
            Err(errs)
        }
    }

    /// Conditions on individual constants: row shape, conjunction range,
    /// nonzero scaling.
    pub fn basic_errors(&self, poset: &Poset) -> Vec<ConstantsError> {
        let mut errs = Vec::new();
        for a in 0..poset.len() {
            check_row(poset.name(a), &self.c[a], poset.size(a), &mut errs);
            if self.d[a].is_zero() {
                errs.push(ConstantsError::ZeroScaling(poset.name(a).into()));
            }
            if let (Some(p), Some(e)) = (poset.parent(a), &self.e[a]) {
                if !conjunction_ok(e) {
                    errs.push(ConstantsError::ConjunctionRange {
                        below: poset.name(p).into(),
                        above: poset.name(a).into(),
                    });
                }
            }
        }
        errs
    }

    /// `e_{βα}` for `β ≺ α`.
    pub fn e_between(&self, poset: &Poset, b: usize, a: usize) -> &Q {
        self.e[poset.child_towards(b, a)].as_ref().expect("conjunction constant present")
    }

    /// The m-numbers `m_{α,ν} = (d_𝔭(α) / d_α) Π_{μ≠ν} (c_{𝔭(α),μ} + e_{𝔭(α)α})`.
    pub fn m_rows(&self, poset: &Poset) -> MRows {
        (0..poset.len())
            .map(|a| {
                let b = poset.parent(a)?;
                let e = self.e[a].as_ref()?;
                let r = &self.d[b] / &self.d[a];
                let row = &self.c[b];
                Some(
                    (0..row.len())
                        .map(|nu| {
                            let mut p = r.clone();
                            for (mu, c) in row.iter().enumerate() {
                                if mu != nu {
                                    p *= c + e;
                                }
                            }
                            p
                        })
                        .collect(),
                )
            })
            .collect()
    }

    /// Sign of `u_α` on the open stratum: Π over `γ ≺ α` of sign(e_{γα})^{|γ|}.
    pub fn u_sign(&self, poset: &Poset, a: usize) -> i32 {
        let mut s = 1;
        for g in poset.strict_downset(a) {
            if self.e_between(poset, g, a).is_negative() && poset.size(g) % 2 == 1 {
                s = -s;
            }
        }
        s
    }
}

fn conjunction_ok(e: &Q) -> bool {
    e.is_positive() || *e < -Q::one()
}

/// The m-numbers of a bundle, after checking the individual constants.
pub fn m_from_constants(poset: &Poset, bundle: &ConstantBundle) -> Result<MRows, Vec<ConstantsError>> {
    let errs = bundle.basic_errors(poset);
    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(bundle.m_rows(poset))
}

fn strictly_increasing_positive(row: &[Q]) -> bool {
    row[0].is_positive() && row.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing_positive(row: &[Q]) -> bool {
    row.last().map_or(false, |x| x.is_positive()) && row.windows(2).all(|w| w[0] > w[1])
}

/// Inverts the m-number map: recovers `c`, `e` and the ratios `d_𝔭(α)/d_α` from
/// the m-rows, fixing the undetermined data from `free`.
///
/// Rows must be strictly increasing; with `allow_dual` a block whose
/// children all carry decreasing rows is solved in reversed form and then
/// flipped back with [`dual_involution`].
pub fn constants_from_m(
    poset: &Poset,
    m: &MRows,
    free: &FreeChoices,
    allow_dual: bool,
) -> Result<ConstantBundle, Vec<ConstantsError>> {
    let k = poset.len();
    let mut errs = Vec::new();
    let mut rows: Vec<Option<Vec<Q>>> = vec![None; k];
    let mut ev: Vec<Option<Q>> = vec![None; k];
    let mut ratio: Vec<Option<Q>> = vec![None; k];
    let mut flip = vec![false; k];
    for b in 0..k {
        let kids = poset.children(b);
        if kids.is_empty() {
            continue;
        }
        let mut dual = false;
        for (i, &a) in kids.iter().enumerate() {
            let Some(row) = m[a].as_ref() else {
                errs.push(ConstantsError::MRowLength { block: poset.name(a).into(), got: 0, expected: poset.size(b) + 1 });
                continue;
            };
            if row.len() != poset.size(b) + 1 {
                errs.push(ConstantsError::MRowLength {
                    block: poset.name(a).into(),
                    got: row.len(),
                    expected: poset.size(b) + 1,
                });
                continue;
            }
            let inc = strictly_increasing_positive(row);
            let dec = allow_dual && strictly_decreasing_positive(row);
            if i == 0 {
                dual = !inc && dec;
            }
            if !(if dual { dec } else { inc }) {
                errs.push(ConstantsError::NotMonotone { block: poset.name(a).into() });
            }
        }
        if !errs.is_empty() {
            continue;
        }
        flip[b] = dual;
        for &a in kids {
            let mut row = m[a].clone().unwrap();
            if dual {
                row.reverse();
            }
            let last = row.len() - 1;
            let (m0, ml) = (&row[0], &row[last]);
            let e = m0 / (ml - m0);
            let c: Vec<Q> = row.iter().map(|mn| (m0 / mn) * (ml - mn) / (ml - m0)).collect();
            let mut prod = Q::one();
            for cm in &c[1..] {
                prod *= cm + &e;
            }
            ratio[a] = Some(m0 / prod);
            ev[a] = Some(e);
            match &rows[b] {
                None => rows[b] = Some(c),
                Some(prev) => {
                    if let Some(nu) = (0..c.len()).find(|&nu| prev[nu] != c[nu]) {
                        errs.push(ConstantsError::InconsistentSiblings {
                            parent: poset.name(b).into(),
                            a: poset.name(kids[0]).into(),
                            b: poset.name(a).into(),
                            nu,
                        });
                    }
                }
            }
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let mut c = Vec::with_capacity(k);
    for a in 0..k {
        c.push(match rows[a].take() {
            Some(r) => r,
            None => free
                .c_maximal
                .get(poset.name(a))
                .cloned()
                .unwrap_or_else(|| even_row(poset.size(a))),
        });
    }
    let mut d = vec![Q::one(); k];
    for a in 0..k {
        match poset.parent(a) {
            None => {
                if let Some(x) = free.d_minimal.get(poset.name(a)) {
                    d[a] = x.clone();
                }
            }
            Some(b) => d[a] = &d[b] / ratio[a].as_ref().unwrap(),
        }
    }
    let mut bundle = ConstantBundle { c, e: ev, d };
    for b in 0..k {
        if flip[b] {
            bundle = dual_involution(poset, &bundle, b);
        }
    }
    let errs = bundle.basic_errors(poset);
    if errs.is_empty() {
        Ok(bundle)
    } else {
        Err(errs)
    }
}

/// The orientation flip of block `b`: `c′_ν = 1 − c_{|b|−ν}`,
/// `e′ = −1 − e` towards every successor, and `d_γ ↦ (−1)^{|b|} d_γ` for
/// `γ ≻ b`.  Successor m-rows come out reversed.
pub fn dual_involution(poset: &Poset, bundle: &ConstantBundle, b: usize) -> ConstantBundle {
    let mut out = bundle.clone();
    let row = &bundle.c[b];
    let k = row.len() - 1;
    out.c[b] = (0..=k).map(|nu| Q::one() - &row[k - nu]).collect();
    for &a in poset.children(b) {
        if let Some(e) = &bundle.e[a] {
            out.e[a] = Some(-Q::one() - e);
        }
    }
    if poset.size(b) % 2 == 1 {
        for g in poset.strict_upset(b) {
            out.d[g] = -&out.d[g];
        }
    }
    out
}

/// Flips every block whose children all have negative conjunction
/// constants, so that their m-rows increase.  Returns notices for each flip.
pub fn canonical_orientation(poset: &Poset, bundle: &ConstantBundle) -> (ConstantBundle, Vec<String>) {
    let mut out = bundle.clone();
    let mut notes = Vec::new();
    for b in 0..poset.len() {
        let kids = poset.children(b);
        if !kids.is_empty()
            && kids.iter().all(|&a| bundle.e[a].as_ref().map_or(false, |e| e.is_negative()))
        {
            out = dual_involution(poset, &out, b);
            notes.push(format!("block `{}` flipped to make successor m-rows increasing", poset.name(b)));
        }
    }
    (out, notes)
}

/// One line of a compatibility report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub rule: &'static str,
    pub location: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatReport {
    pub checks: Vec<Check>,
    /// m-rows as `"p/q"` strings keyed by block.
    pub m: BTreeMap<String, Vec<String>>,
    /// Divisibility index of `Z_α` for non-minimal α.
    pub l: BTreeMap<String, String>,
}

impl CompatReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

/// Checks every compatibility condition on a complete bundle.
pub fn validate_compatibility(poset: &Poset, bundle: &ConstantBundle) -> CompatReport {
    let mut checks = Vec::new();
    let mut push = |rule, location: String, ok: bool, detail: String| {
        checks.push(Check { rule, location, ok, detail })
    };
    for err in bundle.basic_errors(poset) {
        push("constants", String::new(), false, err.to_string());
    }
    for a in 0..poset.len() {
        let sign_ok = if bundle.d[a].is_zero() {
            false
        } else {
            (bundle.d[a].is_positive()) == (bundle.u_sign(poset, a) > 0)
        };
        push(
            "scaling-sign",
            poset.name(a).into(),
            sign_ok,
            if sign_ok { String::new() } else { format!("d = {}", fmt_q(&bundle.d[a])) },
        );
    }
    let m = bundle.m_rows(poset);
    for a in 0..poset.len() {
        let Some(row) = &m[a] else { continue };
        for nu in 1..row.len() {
            let diff = &row[nu] - &row[0];
            push(
                "integral-difference",
                format!("{},{}", poset.name(a), nu),
                is_int(&diff),
                if is_int(&diff) { String::new() } else { format!("m_ν − m_0 = {}", fmt_q(&diff)) },
            );
        }
        let mono = strictly_increasing_positive(row) || strictly_decreasing_positive(row);
        push("monotone", poset.name(a).into(), mono, String::new());
    }
    for b in 0..poset.len() {
        if poset.is_minimal(b) {
            continue;
        }
        let rb = m[b].as_ref().unwrap();
        for a in poset.strict_upset(b) {
            let mut prod = Q::one();
            let mut cur = a;
            while cur != b {
                prod *= &m[cur].as_ref().unwrap()[0];
                cur = poset.parent(cur).unwrap();
            }
            for nu in 1..rb.len() {
                let v = &prod * (&rb[nu] - &rb[0]);
                push(
                    "chain-product",
                    format!("{}<{},{}", poset.name(b), poset.name(a), nu),
                    is_int(&v),
                    if is_int(&v) { String::new() } else { fmt_q(&v) },
                );
            }
        }
    }
    for b in 0..poset.len() {
        let kids = poset.children(b);
        let induced: Vec<Vec<Q>> = kids
            .iter()
            .filter_map(|&a| m[a].as_ref())
            .map(|row| {
                let last = row.len() - 1;
                row.iter()
                    .map(|mn| (&row[0] / mn) * (&row[last] - mn) / (&row[last] - &row[0]))
                    .collect()
            })
            .collect();
        if induced.len() > 1 {
            let ok = induced.windows(2).all(|w| w[0] == w[1]);
            push("siblings", poset.name(b).into(), ok, String::new());
        }
    }
    let mut l_out = BTreeMap::new();
    if let Ok(z) = fan::z_vectors(poset, &m) {
        let l: Vec<Option<num_bigint::BigInt>> = z
            .iter()
            .enumerate()
            .map(|(a, v)| (!poset.is_minimal(a)).then(|| crate::exact::content(v)))
            .collect();
        for g in 0..poset.len() {
            let Some(lg) = &l[g] else { continue };
            l_out.insert(poset.name(g).to_string(), lg.to_string());
            for a in poset.strict_upset(g) {
                let mut prod = Q::from_integer(lg.clone());
                let mut cur = a;
                while cur != g {
                    prod *= &m[cur].as_ref().unwrap()[0];
                    cur = poset.parent(cur).unwrap();
                }
                push(
                    "divisibility",
                    format!("{}<{}", poset.name(g), poset.name(a)),
                    is_int(&prod),
                    if is_int(&prod) { String::new() } else { fmt_q(&prod) },
                );
            }
        }
    }
    let m_out = (0..poset.len())
        .filter_map(|a| m[a].as_ref().map(|r| (poset.name(a).to_string(), r.iter().map(fmt_q).collect())))
        .collect();
    CompatReport { checks, m: m_out, l: l_out }
}

/// Integer rows as rationals.
pub fn int_row(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| qi(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;
    use crate::poset::Kind;

    fn chain(sb: usize, sa: usize) -> Poset {
        let elements = vec!["b".to_string(), "a".to_string()];
        let sizes = [("b".to_string(), sb), ("a".to_string(), sa)].into_iter().collect();
        Poset::new(&elements, &sizes, &[("b".into(), "a".into())], Kind::B).unwrap()
    }

    fn bundle(p: &Poset, e: Q, ratio: Q) -> ConstantBundle {
        let mut c = BTreeMap::new();
        c.insert("b".to_string(), even_row(p.size(0)));
        let mut d = BTreeMap::new();
        d.insert("b".to_string(), ratio.clone());
        d.insert("a".to_string(), Q::one());
        ConstantBundle::from_named(p, &c, &[("b".into(), "a".into(), e)], &d).unwrap()
    }

    #[test]
    fn m_examples() {
        let p = chain(1, 2);
        let m = bundle(&p, qi(1), qi(2)).m_rows(&p);
        assert_eq!(m[1], Some(int_row(&[2, 4])));
        let m = bundle(&p, qi(2), qi(1)).m_rows(&p);
        assert_eq!(m[1], Some(int_row(&[2, 3])));
    }

    #[test]
    fn inverse_examples() {
        let p = chain(1, 2);
        let mut m: MRows = vec![None, Some(int_row(&[2, 4]))];
        let b = constants_from_m(&p, &m, &FreeChoices::default(), false).unwrap();
        assert_eq!(b.e[1], Some(qi(1)));
        assert_eq!(b.c[0], int_row(&[1, 0]));
        assert_eq!(&b.d[0] / &b.d[1], qi(2));
        m[1] = Some(int_row(&[2, 3]));
        let b = constants_from_m(&p, &m, &FreeChoices::default(), false).unwrap();
        assert_eq!(b.e[1], Some(qi(2)));
        m[1] = Some(int_row(&[4, 2]));
        assert!(constants_from_m(&p, &m, &FreeChoices::default(), false).is_err());
        let b = constants_from_m(&p, &m, &FreeChoices::default(), true).unwrap();
        assert_eq!(b.m_rows(&p)[1], Some(int_row(&[4, 2])));
    }

    #[test]
    fn dual_reverses_rows() {
        let p = chain(2, 2);
        let mut c = BTreeMap::new();
        c.insert("b".to_string(), vec![qi(1), q(1, 3), qi(0)]);
        let mut d = BTreeMap::new();
        d.insert("a".to_string(), q(1, 5));
        let b = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), qi(1))], &d).unwrap();
        let f = dual_involution(&p, &b, 0);
        assert_eq!(f.e[1], Some(qi(-2)));
        let mut r = b.m_rows(&p)[1].clone().unwrap();
        r.reverse();
        assert_eq!(f.m_rows(&p)[1], Some(r));
        assert_eq!(dual_involution(&p, &f, 0), b);
        let (canon, notes) = canonical_orientation(&p, &f);
        assert_eq!(canon, b);
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn symmetric_row_fixed() {
        let p = chain(2, 2);
        let mut c = BTreeMap::new();
        c.insert("b".to_string(), vec![qi(1), q(1, 2), qi(0)]);
        let b = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), qi(1))], &BTreeMap::from([("a".to_string(), qi(1))])).unwrap();
        assert_eq!(dual_involution(&p, &b, 0).c[0], b.c[0]);
    }

    #[test]
    fn compatibility() {
        let p = chain(1, 2);
        let r = validate_compatibility(&p, &bundle(&p, qi(1), qi(2)));
        assert!(r.ok(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.l["a"], "2");
        let r = validate_compatibility(&p, &bundle(&p, qi(1), q(1, 3)));
        assert!(!r.ok());
        assert!(r.failures().any(|c| c.rule == "integral-difference"));
    }

    #[test]
    fn input_errors() {
        let p = chain(1, 2);
        let c = BTreeMap::from([("b".to_string(), int_row(&[1, 1]))]);
        let d = BTreeMap::from([("a".to_string(), qi(1))]);
        let e = ConstantBundle::from_named(&p, &c, &[("b".into(), "a".into(), -q(1, 2))], &d)
            .unwrap_err();
        assert!(e.iter().any(|x| matches!(x, ConstantsError::RowEndpoints { .. })));
        assert!(e.iter().any(|x| matches!(x, ConstantsError::ConjunctionRange { .. })));
        let e = ConstantBundle::from_named(&p, &BTreeMap::new(), &[], &BTreeMap::new()).unwrap_err();
        assert!(e.contains(&ConstantsError::MissingRow("b".into())));
        assert!(e.contains(&ConstantsError::MissingScaling("a".into())));
    }
}
