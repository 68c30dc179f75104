//! The lattice Γ, its distinguished vectors `Y_{α,ν}` and `Z_α`, the fan
//! with one maximal cone per section, and the sub-fan fibration attached
//! to an open subset of blocks.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::constants::{ConstantBundle, MRows};
use crate::exact::{self, fmt_q, Q};
use crate::poset::{Poset, PosetError, Section, Split};

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize)]
#[serde(tag = "error")]
pub enum FanError {
    #[error("non-minimal block `{0}` has no m-row")]
    MissingRow(String),
    #[error("coefficient {value} of Y_({below},{nu}) in Z_{block} is not an integer")]
    NonIntegralCoefficient { block: String, below: String, nu: usize, value: String },
    #[error("section {section:?} gives determinant {det}")]
    BasisDeterminantNotUnit { section: Vec<usize>, det: String },
    #[error(transparent)]
    Poset(#[from] PosetError),
}

/// Γ presented in the basis `Y_{α,ν}`, `ν ≥ 1`.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    poset: Poset,
    m: MRows,
    d: Option<Vec<Q>>,
    j: Vec<(usize, usize)>,
    rays: Vec<Vec<BigInt>>,
    z: Vec<Vec<BigInt>>,
}

/// Expanded form of the `Z_α`, with every term checked for integrality.
pub fn z_vectors(poset: &Poset, m: &MRows) -> Result<Vec<Vec<BigInt>>, FanError> {
    let n = poset.dim();
    let mut out = Vec::with_capacity(poset.len());
    for a in 0..poset.len() {
        let mut z = vec![BigInt::zero(); n];
        let mut chain = poset.strict_downset(a);
        chain.push(a);
        for &b in chain.iter().skip(1) {
            let p = poset.parent(b).unwrap();
            let row = m[b].as_ref().ok_or_else(|| FanError::MissingRow(poset.name(b).into()))?;
            let mut prod = Q::one();
            for &g in chain.iter().filter(|&&g| poset.lt(b, g)) {
                prod *= &m[g].as_ref().ok_or_else(|| FanError::MissingRow(poset.name(g).into()))?[0];
            }
            for nu in 1..=poset.size(p) {
                let v = &prod * (&row[nu] - &row[0]);
                if !v.is_integer() {
                    return Err(FanError::NonIntegralCoefficient {
                        block: poset.name(a).into(),
                        below: poset.name(p).into(),
                        nu,
                        value: fmt_q(&v),
                    });
                }
                z[poset.offset(p) + nu - 1] += v.to_integer();
            }
        }
        out.push(z);
    }
    Ok(out)
}

/// Recursive form `Z_α = m_{α,0} Z_{𝔭α} + Σ (m_{α,ν} − m_{α,0}) Y_{𝔭α,ν}`.
pub fn z_vectors_recursive(poset: &Poset, m: &MRows) -> Result<Vec<Vec<Q>>, FanError> {
    let n = poset.dim();
    let mut z: Vec<Vec<Q>> = vec![vec![Q::zero(); n]; poset.len()];
    // canonical order is topological, so parents come first
    for a in 0..poset.len() {
        let Some(p) = poset.parent(a) else { continue };
        let row = m[a].as_ref().ok_or_else(|| FanError::MissingRow(poset.name(a).into()))?;
        let mut v: Vec<Q> = z[p].iter().map(|x| x * &row[0]).collect();
        for nu in 1..=poset.size(p) {
            v[poset.offset(p) + nu - 1] += &row[nu] - &row[0];
        }
        z[a] = v;
    }
    Ok(z)
}

impl LatticeModel {
    /// Builds Γ from m-rows alone.  No monotonicity is required here; only
    /// the integrality needed for `Z_α ∈ Γ`.
    pub fn from_m(poset: &Poset, m: &MRows) -> Result<LatticeModel, FanError> {
        let z = z_vectors(poset, m)?;
        let n = poset.dim();
        let j = poset.index_j();
        let rays = j
            .iter()
            .map(|&(a, nu)| {
                let o = poset.offset(a);
                if nu > 0 {
                    let mut v = vec![BigInt::zero(); n];
                    v[o + nu - 1] = BigInt::one();
                    v
                } else {
                    let mut v = z[a].clone();
                    for k in 0..poset.size(a) {
                        v[o + k] -= 1;
                    }
                    v
                }
            })
            .collect();
        Ok(LatticeModel { poset: poset.clone(), m: m.clone(), d: None, j, rays, z })
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn m_rows(&self) -> &MRows {
        &self.m
    }

    pub fn scaling(&self) -> Option<&[Q]> {
        self.d.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.poset.dim()
    }

    /// Labels of 𝒥 in ray order.
    pub fn index_j(&self) -> &[(usize, usize)] {
        &self.j
    }

    pub fn rays(&self) -> &[Vec<BigInt>] {
        &self.rays
    }

    pub fn ray(&self, a: usize, nu: usize) -> &Vec<BigInt> {
        &self.rays[self.poset.j_position(a, nu)]
    }

    pub fn z(&self, a: usize) -> &Vec<BigInt> {
        &self.z[a]
    }

    /// Largest `l` with `Z_α / l ∈ Γ`; `None` for minimal α.
    pub fn l(&self, a: usize) -> Option<BigInt> {
        (!self.poset.is_minimal(a)).then(|| exact::content(&self.z[a]))
    }

    /// Human-readable labels `name,ν` of the Γ basis.
    pub fn coord_labels(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.dim());
        for a in 0..self.poset.len() {
            for nu in 1..=self.poset.size(a) {
                v.push(format!("{},{}", self.poset.name(a), nu));
            }
        }
        v
    }

    pub fn j_label(&self, i: usize) -> String {
        let (a, nu) = self.j[i];
        format!("{},{}", self.poset.name(a), nu)
    }

    /// Determinant of the generators of σ_ι for every section.
    pub fn section_determinants(&self) -> Vec<(Section, BigInt)> {
        self.poset
            .sections()
            .into_iter()
            .map(|s| {
                let cols: Vec<&Vec<BigInt>> = s.cone(&self.poset).iter().map(|&i| &self.rays[i]).collect();
                let det = exact::det(&exact::from_columns(&cols));
                (s, det)
            })
            .collect()
    }

    /// Every `Σ_ν Y_{α,ν} − Z_α` vanishes.
    pub fn relations_hold(&self) -> bool {
        (0..self.poset.len()).all(|a| {
            let mut s = vec![BigInt::zero(); self.dim()];
            for nu in 0..=self.poset.size(a) {
                for (x, y) in s.iter_mut().zip(self.ray(a, nu)) {
                    *x += y;
                }
            }
            s == self.z[a]
        })
    }
}

/// Builds Γ from the m-numbers of a constant bundle, checking the basis
/// property for every section.
pub fn build_lattice(poset: &Poset, bundle: &ConstantBundle) -> Result<LatticeModel, FanError> {
    let m = bundle.m_rows(poset);
    let mut lat = LatticeModel::from_m(poset, &m)?;
    lat.d = Some(bundle.d.clone());
    for (s, det) in lat.section_determinants() {
        if det.abs() != BigInt::one() {
            return Err(FanError::BasisDeterminantNotUnit { section: s.0, det: det.to_string() });
        }
    }
    Ok(lat)
}

/// Maximal cones, one per section, as positions into the ray list.
#[derive(Clone, Debug)]
pub struct Fan {
    pub sections: Vec<Section>,
    pub cones: Vec<Vec<usize>>,
}

pub fn build_fan(lat: &LatticeModel) -> Fan {
    let sections = lat.poset.sections();
    let cones = sections.iter().map(|s| s.cone(&lat.poset)).collect();
    Fan { sections, cones }
}

impl Fan {
    /// Whether a set of ray positions spans a cone of the fan.
    pub fn is_cone(&self, set: &[usize]) -> bool {
        self.cones.iter().any(|c| set.iter().all(|i| c.contains(i)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FanCheck {
    pub cones: usize,
    pub smooth: bool,
    pub complete: bool,
    pub facets_paired: bool,
    pub samples: usize,
    pub uncovered: usize,
    /// No cone contains all of `{(α,0), …, (α,|α|)}` for any α.
    pub blocks_excluded: bool,
}

impl FanCheck {
    pub fn ok(&self) -> bool {
        self.smooth && self.complete && self.facets_paired && self.blocks_excluded
    }
}

enum ConeInverse {
    Small(Vec<Vec<i64>>),
    Exact(Vec<Vec<Q>>),
    Singular,
}

fn cone_inverse(lat: &LatticeModel, cone: &[usize]) -> ConeInverse {
    let cols: Vec<&Vec<BigInt>> = cone.iter().map(|&i| &lat.rays[i]).collect();
    let Some(inv) = exact::inverse(&exact::from_columns(&cols)) else {
        return ConeInverse::Singular;
    };
    let small: Option<Vec<Vec<i64>>> = inv
        .iter()
        .map(|r| r.iter().map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None }).collect())
        .collect();
    match small {
        Some(s) => ConeInverse::Small(s),
        None => ConeInverse::Exact(inv),
    }
}

fn in_cone(inv: &ConeInverse, v: &[i64]) -> bool {
    match inv {
        ConeInverse::Small(m) => m
            .iter()
            .all(|row| row.iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum::<i128>() >= 0),
        ConeInverse::Exact(m) => m.iter().all(|row| {
            let s: Q = row.iter().zip(v).map(|(a, &b)| a * Q::from_integer(b.into())).sum();
            !s.is_negative()
        }),
        ConeInverse::Singular => false,
    }
}

/// Smoothness, sampled completeness and facet pairing.
///
/// The sample set is every nonzero vector with entries in {−1, 0, 1}
/// (for n ≤ 8) followed by 1000 vectors drawn uniformly from [−50, 50]ⁿ by
/// a ChaCha8 generator seeded with `seed`.
pub fn verify_fan(lat: &LatticeModel, fan: &Fan, seed: u64) -> FanCheck {
    let n = lat.dim();
    let smooth = fan.cones.iter().all(|c| {
        let cols: Vec<&Vec<BigInt>> = c.iter().map(|&i| &lat.rays[i]).collect();
        exact::det(&exact::from_columns(&cols)).abs().is_one()
    });
    let invs: Vec<ConeInverse> = fan.cones.iter().map(|c| cone_inverse(lat, c)).collect();
    let mut samples: Vec<Vec<i64>> = Vec::new();
    if n <= 8 {
        let total = 3usize.pow(n as u32);
        for code in 1..total {
            let mut c = code;
            let v: Vec<i64> = (0..n)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect();
            samples.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        samples.push((0..n).map(|_| rng.gen_range(-50..=50)).collect());
    }
    let uncovered = if n == 0 {
        0
    } else {
        samples.iter().filter(|v| !invs.iter().any(|inv| in_cone(inv, v))).count()
    };
    let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
    for c in &fan.cones {
        for skip in 0..c.len() {
            let mut f: Vec<usize> = c.clone();
            f.remove(skip);
            *facet_count.entry(f).or_default() += 1;
        }
    }
    let facets_paired = facet_count.values().all(|&k| k == 2);
    let blocks_excluded = (0..lat.poset.len()).all(|a| {
        let full: Vec<usize> = (0..=lat.poset.size(a)).map(|nu| lat.poset.j_position(a, nu)).collect();
        !fan.is_cone(&full)
    });
    FanCheck {
        cones: fan.cones.len(),
        smooth,
        complete: uncovered == 0 && facets_paired,
        facets_paired,
        samples: samples.len(),
        uncovered,
        blocks_excluded,
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn mat_vec(m: &[Vec<BigInt>], v: &[BigInt]) -> Vec<BigInt> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Searches for `U ∈ GL_n(ℤ)` carrying fan A onto fan B, rays to rays and
/// maximal cones to maximal cones.
pub fn fan_isomorphism(
    rays_a: &[Vec<BigInt>],
    cones_a: &[Vec<usize>],
    rays_b: &[Vec<BigInt>],
    cones_b: &[Vec<usize>],
) -> Option<Vec<Vec<BigInt>>> {
    if rays_a.len() != rays_b.len() || cones_a.len() != cones_b.len() || cones_a.is_empty() {
        return None;
    }
    let n = cones_a[0].len();
    let a_cols: Vec<&Vec<BigInt>> = cones_a[0].iter().map(|&i| &rays_a[i]).collect();
    let a_inv = exact::inverse(&exact::from_columns(&a_cols))?;
    let index_b: HashMap<&Vec<BigInt>, usize> = rays_b.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let target: HashSet<BTreeSet<usize>> = cones_b.iter().map(|c| c.iter().copied().collect()).collect();
    for cb in cones_b {
        for perm in permutations(cb) {
            // U = B · A⁻¹
            let mut u = vec![vec![BigInt::zero(); n]; n];
            let mut integral = true;
            'build: for (i, row) in u.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    let s: Q = (0..n).map(|k| Q::from_integer(rays_b[perm[k]][i].clone()) * &a_inv[k][j]).sum();
                    if !s.is_integer() {
                        integral = false;
                        break 'build;
                    }
                    *cell = s.to_integer();
                }
            }
            if !integral || !exact::det(&u).abs().is_one() {
                continue;
            }
            let image: Option<Vec<usize>> =
                rays_a.iter().map(|r| index_b.get(&mat_vec(&u, r)).copied()).collect();
            let Some(image) = image else { continue };
            if image.iter().collect::<HashSet<_>>().len() != image.len() {
                continue;
            }
            let ok = cones_a
                .iter()
                .all(|c| target.contains(&c.iter().map(|&i| image[i]).collect::<BTreeSet<usize>>()));
            if ok {
                return Some(u);
            }
        }
    }
    None
}

/// A curvature coefficient `(s, d″_{α_s}, Z_{α_s})` of the fibration.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub component: usize,
    pub minimal: String,
    /// `|d_{α_s}|`, when scaling constants are known.
    pub d: Option<Q>,
    /// `Z_{α_s}` in the Γ′ basis.
    pub z: Vec<BigInt>,
    pub l: BigInt,
}

/// Data of the fibration `M → M″` with fibre `M′` for an open subset 𝒜′.
#[derive(Clone, Debug)]
pub struct FibrationData {
    pub split: Split,
    pub fibre: LatticeModel,
    pub base: LatticeModel,
    /// Positions in Γ of the Γ′ basis, in fibre order.
    pub fibre_coords: Vec<usize>,
    /// Positions in Γ of the Γ″ basis, in base order.
    pub base_coords: Vec<usize>,
    /// `ψ(π̃(R_α))` for each α ∈ 𝒜″, in the Γ′ basis.
    pub psi: Vec<(String, Vec<BigInt>)>,
    /// `(Π_{α₀≺β⪯α} m_{β,0}) Z_{α₀}` for the same α.
    pub psi_expected: Vec<(String, Vec<Q>)>,
    pub curvature: Vec<Curvature>,
    /// `(Π_{α_s≺β⪯α} m_{β,0}) l_{α_s} ∈ ℤ` for every α in every component.
    pub divisibility_ok: bool,
    /// Rays of Δ′ agree with the lattice built directly on 𝒜′.
    pub fibre_matches: bool,
    /// Projected rays of Δ agree with the lattice built directly on 𝒜″.
    pub base_matches: bool,
}

impl FibrationData {
    pub fn psi_ok(&self) -> bool {
        self.psi.iter().zip(&self.psi_expected).all(|((_, a), (_, b))| {
            a.iter().zip(b).all(|(x, y)| Q::from_integer(x.clone()) == *y)
        })
    }
}

fn restrict_rows(from: &Poset, m: &MRows, to: &Poset) -> MRows {
    (0..to.len())
        .map(|a| {
            let orig = from.index_of(to.name(a)).unwrap();
            to.parent(a).and(m[orig].clone())
        })
        .collect()
}

fn coord_positions(from: &Poset, to: &Poset) -> Vec<usize> {
    let mut v = Vec::with_capacity(to.dim());
    for a in 0..to.len() {
        let orig = from.index_of(to.name(a)).unwrap();
        for nu in 0..to.size(a) {
            v.push(from.offset(orig) + nu);
        }
    }
    v
}

/// Splits the lattice along an open subset 𝒜′ of blocks.
pub fn split_fibration(lat: &LatticeModel, subset: &[String]) -> Result<FibrationData, FanError> {
    let p = &lat.poset;
    let split = p.split(subset)?;
    let fibre_rows = restrict_rows(p, &lat.m, &split.open);
    let base_rows = restrict_rows(p, &lat.m, &split.rest);
    let mut fibre = LatticeModel::from_m(&split.open, &fibre_rows)?;
    let mut base = LatticeModel::from_m(&split.rest, &base_rows)?;
    if let Some(d) = &lat.d {
        let pick = |q: &Poset| -> Vec<Q> { (0..q.len()).map(|a| d[p.index_of(q.name(a)).unwrap()].clone()).collect() };
        fibre.d = Some(pick(&split.open));
        base.d = Some(pick(&split.rest));
    }
    let fibre_coords = coord_positions(p, &split.open);
    let base_coords = coord_positions(p, &split.rest);
    let project = |v: &Vec<BigInt>, coords: &[usize]| -> Vec<BigInt> { coords.iter().map(|&i| v[i].clone()).collect() };

    let mut fibre_matches = true;
    for a in 0..split.open.len() {
        let orig = p.index_of(split.open.name(a)).unwrap();
        for nu in 0..=split.open.size(a) {
            let y = lat.ray(orig, nu);
            let outside = base_coords.iter().any(|&i| !y[i].is_zero());
            if outside || project(y, &fibre_coords) != *fibre.ray(a, nu) {
                fibre_matches = false;
            }
        }
    }
    let mut base_matches = true;
    for a in 0..split.rest.len() {
        let orig = p.index_of(split.rest.name(a)).unwrap();
        for nu in 0..=split.rest.size(a) {
            if project(lat.ray(orig, nu), &base_coords) != *base.ray(a, nu) {
                base_matches = false;
            }
        }
    }

    let mut psi = Vec::new();
    let mut psi_expected = Vec::new();
    for a in 0..split.rest.len() {
        let orig = p.index_of(split.rest.name(a)).unwrap();
        psi.push((split.rest.name(a).to_string(), project(&lat.z[orig], &fibre_coords)));
        let a0 = p.index_of(split.rest.name(split.rest.root(a))).unwrap();
        let mut prod = Q::one();
        let mut cur = orig;
        while cur != a0 {
            prod *= &lat.m[cur].as_ref().unwrap()[0];
            cur = p.parent(cur).unwrap();
        }
        let z0 = project(&lat.z[a0], &fibre_coords);
        psi_expected.push((
            split.rest.name(a).to_string(),
            z0.into_iter().map(|x| Q::from_integer(x) * &prod).collect(),
        ));
    }

    let mut curvature = Vec::new();
    let mut divisibility_ok = true;
    for (s, comp) in split.rest_components.iter().enumerate() {
        let a0 = p.index_of(&comp.minimal).unwrap();
        let z = project(&lat.z[a0], &fibre_coords);
        let l = exact::content(&z);
        for name in &comp.members {
            let mut cur = p.index_of(name).unwrap();
            let mut prod = Q::from_integer(l.clone());
            while cur != a0 {
                prod *= &lat.m[cur].as_ref().unwrap()[0];
                cur = p.parent(cur).unwrap();
            }
            divisibility_ok &= prod.is_integer();
        }
        curvature.push(Curvature {
            component: s + 1,
            minimal: comp.minimal.clone(),
            d: lat.d.as_ref().map(|d| d[a0].abs()),
            z,
            l,
        });
    }
    Ok(FibrationData {
        split,
        fibre,
        base,
        fibre_coords,
        base_coords,
        psi,
        psi_expected,
        curvature,
        divisibility_ok,
        fibre_matches,
        base_matches,
    })
}

/// Integers as JSON numbers when they fit, strings otherwise.
pub fn int_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

pub fn vec_json(v: &[BigInt]) -> Value {
    Value::Array(v.iter().map(int_json).collect())
}

/// The JSON fan report.
pub fn fan_report(lat: &LatticeModel, fan: &Fan, check: &FanCheck) -> Value {
    let p = &lat.poset;
    let rays: Vec<Value> = (0..lat.j.len())
        .map(|i| json!({ "label": lat.j_label(i), "vector": vec_json(&lat.rays[i]) }))
        .collect();
    let cones: Vec<Value> = fan
        .cones
        .iter()
        .map(|c| Value::Array(c.iter().map(|&i| json!(lat.j_label(i))).collect()))
        .collect();
    let z: serde_json::Map<String, Value> =
        (0..p.len()).map(|a| (p.name(a).to_string(), vec_json(&lat.z[a]))).collect();
    let l: serde_json::Map<String, Value> = (0..p.len())
        .filter_map(|a| lat.l(a).map(|l| (p.name(a).to_string(), int_json(&l))))
        .collect();
    json!({
        "dimension": lat.dim(),
        "basis": lat.coord_labels(),
        "rays": rays,
        "cones": cones,
        "smooth": check.smooth,
        "complete": check.complete,
        "check": check,
        "Z": z,
        "l": l,
    })
}

pub fn fibration_report(f: &FibrationData) -> Value {
    let psi: Vec<Value> = f
        .psi
        .iter()
        .map(|(name, v)| json!({ "block": name, "image": vec_json(v) }))
        .collect();
    let curv: Vec<Value> = f
        .curvature
        .iter()
        .map(|c| {
            json!({
                "component": c.component,
                "minimal": c.minimal,
                "d": c.d.as_ref().map(fmt_q),
                "Z": vec_json(&c.z),
                "l": int_json(&c.l),
            })
        })
        .collect();
    json!({
        "fibre_basis": f.fibre.coord_labels(),
        "base_basis": f.base.coord_labels(),
        "psi": psi,
        "psi_ok": f.psi_ok(),
        "curvature": curv,
        "divisibility_ok": f.divisibility_ok,
        "fibre_matches": f.fibre_matches,
        "base_matches": f.base_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::int_row;
    use crate::exact::to_bigint_vec;
    use crate::poset::Kind;
    use std::collections::BTreeMap;

    fn poset(spec: &[(&str, usize)], covers: &[(&str, &str)]) -> Poset {
        let elements: Vec<String> = spec.iter().map(|(n, _)| n.to_string()).collect();
        let sizes: BTreeMap<String, usize> = spec.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        let covers: Vec<(String, String)> = covers.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Poset::new(&elements, &sizes, &covers, Kind::B).unwrap()
    }

    #[test]
    fn projective_plane() {
        let p = poset(&[("a", 2)], &[]);
        let lat = LatticeModel::from_m(&p, &vec![None]).unwrap();
        assert_eq!(lat.ray(0, 0), &to_bigint_vec(&[-1, -1]));
        assert_eq!(lat.ray(0, 2), &to_bigint_vec(&[0, 1]));
        let fan = build_fan(&lat);
        let chk = verify_fan(&lat, &fan, 7);
        assert!(chk.ok());
        assert_eq!(chk.cones, 3);
    }

    #[test]
    fn chain_one_two() {
        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        let m = vec![None, Some(int_row(&[2, 4]))];
        let lat = LatticeModel::from_m(&p, &m).unwrap();
        assert_eq!(lat.z(1), &to_bigint_vec(&[2, 0, 0]));
        assert_eq!(lat.ray(0, 0), &to_bigint_vec(&[-1, 0, 0]));
        assert_eq!(lat.ray(1, 0), &to_bigint_vec(&[2, -1, -1]));
        assert_eq!(lat.l(1), Some(BigInt::from(2)));
        assert!(lat.relations_hold());
        assert!(verify_fan(&lat, &build_fan(&lat), 1).ok());
    }

    #[test]
    fn recursive_matches_expanded() {
        let p = poset(&[("a", 1), ("b", 2), ("c", 2)], &[("a", "b"), ("b", "c")]);
        let m = vec![None, Some(int_row(&[2, 3])), Some(int_row(&[2, 3, 5]))];
        let ex = z_vectors(&p, &m).unwrap();
        let rec = z_vectors_recursive(&p, &m).unwrap();
        for a in 0..3 {
            let r: Vec<Q> = ex[a].iter().map(|x| Q::from_integer(x.clone())).collect();
            assert_eq!(r, rec[a]);
        }
    }

    #[test]
    fn non_integral_rejected() {
        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        let m = vec![None, Some(vec![crate::exact::q(1, 3), crate::exact::q(2, 3)])];
        assert!(matches!(LatticeModel::from_m(&p, &m), Err(FanError::NonIntegralCoefficient { .. })));
    }

    #[test]
    fn hirzebruch_isomorphism() {
        let p = poset(&[("b", 1), ("a", 1)], &[("b", "a")]);
        for k in 1..4i64 {
            let m = vec![None, Some(int_row(&[k, 2 * k]))];
            let lat = LatticeModel::from_m(&p, &m).unwrap();
            let fan = build_fan(&lat);
            let rays_b = vec![
                to_bigint_vec(&[1, 0]),
                to_bigint_vec(&[0, 1]),
                to_bigint_vec(&[-1, 0]),
                to_bigint_vec(&[k, -1]),
            ];
            let cones_b = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]];
            assert!(fan_isomorphism(lat.rays(), &fan.cones, &rays_b, &cones_b).is_some(), "k={k}");
        }
        let m = vec![None, Some(int_row(&[1, 2]))];
        let f1 = LatticeModel::from_m(&p, &m).unwrap();
        let m = vec![None, Some(int_row(&[2, 4]))];
        let f2 = LatticeModel::from_m(&p, &m).unwrap();
        assert!(fan_isomorphism(f1.rays(), &build_fan(&f1).cones, f2.rays(), &build_fan(&f2).cones).is_none());
    }

    #[test]
    fn fibration_chain() {
        let p = poset(&[("b", 1), ("a", 2)], &[("b", "a")]);
        let m = vec![None, Some(int_row(&[2, 4]))];
        let lat = LatticeModel::from_m(&p, &m).unwrap();
        let f = split_fibration(&lat, &["b".into()]).unwrap();
        assert!(f.psi_ok() && f.fibre_matches && f.base_matches && f.divisibility_ok);
        assert_eq!(f.curvature[0].z, to_bigint_vec(&[2]));
        let all = split_fibration(&lat, &["b".into(), "a".into()]).unwrap();
        assert_eq!(all.base.dim(), 0);
        assert!(matches!(split_fibration(&lat, &["a".into()]), Err(FanError::Poset(_))));
    }
}
