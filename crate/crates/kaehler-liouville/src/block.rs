//! One-block Liouville data: seed validation, branch times, periods, the
//! profiles `h̃_ν`, the torus metric `g′`, the integrals `F′_ν`, and the
//! fold group `H` acting on the torus `R = Π ℝ/P_νℤ`.
//!
//! On `[0, P_ν/4]` the reparametrization `t_ν(x)` runs from `T_ν` down to
//! `T_{ν−1}`.  Every `h̃_ν` is even and has period `P_ν/2`, so this quarter
//! determines it.

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::numeric::{integrate, root, Chebyshev};

/// Adjacent `h̃` gap below which the metric is treated as singular.
pub const COLLISION_GAP: f64 = 1e-10;

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
pub enum BlockError {
    #[error("c-row must run 1 = c_0 > … > c_n = 0, got {0:?}")]
    BadRow(Vec<f64>),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("profile table needs at least 3 finite samples")]
    BadTable,
    #[error("no sign change of h − c_{nu} on [0, l/2]")]
    RootNotBracketed { nu: usize },
    #[error("radicand of ν = {nu} is negative at t = {t}")]
    NegativeRadicand { nu: usize, t: f64 },
    #[error("x_{nu}(t) could not be inverted at x = {x}")]
    InversionFailure { nu: usize, x: f64 },
    #[error("h̃_{nu} and h̃_{next} collide (gap {gap:e})", next = nu + 1)]
    CollisionSingularity { nu: usize, gap: f64 },
}

/// The profile `h : ℝ/lℤ → [0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `h(t) = cos²(πt/l)`.
    Cos2,
    /// Samples on a uniform grid of `[0, l/2]`, extended to an even
    /// `l`-periodic function by its cosine series.
    Table { samples: Vec<f64>, coef: Vec<f64> },
}

impl Profile {
    pub fn table(samples: Vec<f64>) -> Result<Profile, BlockError> {
        let m = samples.len();
        if m < 3 || samples.iter().any(|x| !x.is_finite()) {
            return Err(BlockError::BadTable);
        }
        let nn = (m - 1) as f64;
        let coef = (0..m)
            .map(|k| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                        w * v * (PI * (j * k) as f64 / nn).cos()
                    })
                    .sum();
                let w = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
                w * 2.0 * s / nn
            })
            .collect();
        Ok(Profile::Table { samples, coef })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Profile::Cos2 => "cos2",
            Profile::Table { .. } => "table",
        }
    }
}

/// Seed data `(c-row, d_*, l, h)` for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSeed {
    c: Vec<f64>,
    d_star: f64,
    l: f64,
    profile: Profile,
}

impl BlockSeed {
    pub fn new(c: Vec<f64>, d_star: f64, l: f64, profile: Profile) -> Result<BlockSeed, BlockError> {
        let ok_row = c.len() >= 2 && c[0] == 1.0 && *c.last().unwrap() == 0.0 && c.windows(2).all(|w| w[0] > w[1]);
        if !ok_row {
            return Err(BlockError::BadRow(c));
        }
        if !(l > 0.0) {
            return Err(BlockError::NonPositive("l"));
        }
        if !(d_star > 0.0) {
            return Err(BlockError::NonPositive("d_star"));
        }
        Ok(BlockSeed { c, d_star, l, profile })
    }

    /// The `cos²` seed with its natural `d_* = 2π²/l²`.
    pub fn cos2(c: Vec<f64>, l: f64) -> Result<BlockSeed, BlockError> {
        BlockSeed::new(c, 2.0 * PI * PI / (l * l), l, Profile::Cos2)
    }

    pub fn with_d_star(mut self, d_star: f64) -> Result<BlockSeed, BlockError> {
        if !(d_star > 0.0) {
            return Err(BlockError::NonPositive("d_star"));
        }
        self.d_star = d_star;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d_star(&self) -> f64 {
        self.d_star
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn h(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cos2 => (PI * t / self.l).cos().powi(2),
            Profile::Table { coef, .. } => {
                let w = 2.0 * PI / self.l;
                coef.iter().enumerate().map(|(k, a)| a * (w * k as f64 * t).cos()).sum()
            }
        }
    }

    pub fn dh(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cos2 => -(PI / self.l) * (2.0 * PI * t / self.l).sin(),
            Profile::Table { coef, .. } => {
                let w = 2.0 * PI / self.l;
                coef.iter().enumerate().map(|(k, a)| -a * w * k as f64 * (w * k as f64 * t).sin()).sum()
            }
        }
    }

    pub fn d2h(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cos2 => -(2.0 * PI * PI / (self.l * self.l)) * (2.0 * PI * t / self.l).cos(),
            Profile::Table { coef, .. } => {
                let w = 2.0 * PI / self.l;
                coef.iter()
                    .enumerate()
                    .map(|(k, a)| -a * (w * k as f64).powi(2) * (w * k as f64 * t).cos())
                    .sum()
            }
        }
    }

    /// `h(s + u) − h(s)` in product form, accurate for small `u`.
    pub fn h_shift(&self, s: f64, u: f64) -> f64 {
        let w = PI / self.l;
        match &self.profile {
            Profile::Cos2 => -(w * (2.0 * s + u)).sin() * (w * u).sin(),
            Profile::Table { coef, .. } => coef
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let kw = w * k as f64;
                    -2.0 * a * (kw * (2.0 * s + u)).sin() * (kw * u).sin()
                })
                .sum(),
        }
    }

    /// `R_ν(t) = (−1)^{ν−1} Π_{μ=1}^{n−1} (h(t) − c_μ)`.
    pub fn radicand(&self, nu: usize, t: f64) -> f64 {
        let h = self.h(t);
        let p: f64 = self.c[1..self.n()].iter().map(|c| h - c).product();
        if (nu - 1) % 2 == 0 {
            p
        } else {
            -p
        }
    }

    /// `R_ν(T_k + u)` for `k ∈ {ν−1, ν}`, with the factors vanishing at
    /// `T_{ν−1}` and `T_ν` written as differences of `h`.
    pub fn radicand_near(&self, nu: usize, times: &[f64], k: usize, u: f64) -> f64 {
        let t = times[k] + u;
        let h = self.h(t);
        let p: f64 = (1..self.n())
            .map(|m| {
                if m == k {
                    self.h_shift(times[k], u)
                } else if m == nu || m + 1 == nu {
                    self.h_shift(times[m], t - times[m])
                } else {
                    h - self.c[m]
                }
            })
            .product();
        if (nu - 1) % 2 == 0 {
            p
        } else {
            -p
        }
    }

    /// `dR_ν/dt`.
    pub fn radicand_dt(&self, nu: usize, t: f64) -> f64 {
        let h = self.h(t);
        let inner = &self.c[1..self.n()];
        let s: f64 = (0..inner.len())
            .map(|m| inner.iter().enumerate().filter(|&(k, _)| k != m).map(|(_, c)| h - c).product::<f64>())
            .sum();
        let v = self.dh(t) * s;
        if (nu - 1) % 2 == 0 {
            v
        } else {
            -v
        }
    }

    /// The dual seed: `h(t) ↦ 1 − h(l/2 − t)`, `c_ν ↦ 1 − c_{n−ν}`.
    pub fn dual(&self) -> BlockSeed {
        let n = self.n();
        let c = (0..=n).map(|nu| 1.0 - self.c[n - nu]).collect();
        let profile = match &self.profile {
            Profile::Cos2 => Profile::Cos2,
            Profile::Table { samples, .. } => {
                Profile::table(samples.iter().rev().map(|v| 1.0 - v).collect()).expect("same length")
            }
        };
        BlockSeed { c, d_star: self.d_star, l: self.l, profile }
    }
}

/// One residual of the seed conditions.
#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub condition: &'static str,
    pub at: String,
    pub value: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedReport {
    pub tolerance: f64,
    pub residuals: Vec<Residual>,
}

impl SeedReport {
    pub fn ok(&self) -> bool {
        self.residuals.iter().all(|r| r.ok)
    }

    pub fn worst(&self, condition: &str) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.condition == condition)
            .fold(0.0, |m, r| m.max(r.value))
    }
}

/// Default tolerance: tight for the analytic profile, loose for tables.
pub fn default_tolerance(seed: &BlockSeed) -> f64 {
    match seed.profile {
        Profile::Cos2 => 1e-9,
        Profile::Table { .. } => 1e-6,
    }
}

/// Checks membership in the seed class.  Conditions:
/// `even`, `period`, `top`, `bottom`, `monotone`, `end-curvature`
/// (`−h″(0) = h″(l/2) = d_*`) and `branch-slope`
/// (`h′(T_ν) = −√(2 d_* c_ν(1−c_ν))`).
pub fn validate_seed(seed: &BlockSeed, tol: f64) -> SeedReport {
    let l = seed.l;
    let mut res = Vec::new();
    let mut push = |condition, at: String, value: f64, ok: bool| res.push(Residual { condition, at, value, ok });
    let grid = 400;
    let mut even: f64 = 0.0;
    let mut period: f64 = 0.0;
    let mut max_slope = f64::NEG_INFINITY;
    for k in 0..=grid {
        let t = l * k as f64 / grid as f64;
        even = even.max((seed.h(-t) - seed.h(t)).abs());
        period = period.max((seed.h(t + l) - seed.h(t)).abs());
        if k > 0 && k < grid / 2 {
            max_slope = max_slope.max(seed.dh(t));
        }
    }
    push("even", "grid".into(), even, even <= tol);
    push("period", "grid".into(), period, period <= tol);
    let top = (seed.h(0.0) - 1.0).abs();
    push("top", "t=0".into(), top, top <= tol);
    let bottom = seed.h(l / 2.0).abs();
    push("bottom", "t=l/2".into(), bottom, bottom <= tol);
    push("monotone", "(0,l/2)".into(), max_slope.max(0.0), max_slope < 0.0);
    let r0 = (-seed.d2h(0.0) - seed.d_star).abs();
    push("end-curvature", "t=0".into(), r0, r0 <= tol);
    let r1 = (seed.d2h(l / 2.0) - seed.d_star).abs();
    push("end-curvature", "t=l/2".into(), r1, r1 <= tol);
    if let Ok(t) = branch_times(seed) {
        for nu in 1..seed.n() {
            let c = seed.c[nu];
            let want = -(2.0 * seed.d_star * c * (1.0 - c)).sqrt();
            let r = (seed.dh(t[nu]) - want).abs();
            push("branch-slope", format!("nu={nu}"), r, r <= tol);
        }
    } else {
        push("branch-slope", "branch times".into(), f64::INFINITY, false);
    }
    SeedReport { tolerance: tol, residuals: res }
}

/// `T_0 = 0 < T_1 < … < T_n = l/2` with `h(T_ν) = c_ν`.
pub fn branch_times(seed: &BlockSeed) -> Result<Vec<f64>, BlockError> {
    let n = seed.n();
    let half = seed.l / 2.0;
    let mut t = vec![0.0; n + 1];
    t[n] = half;
    for nu in 1..n {
        let c = seed.c[nu];
        let f = |s: f64| seed.h(s) - c;
        if f(0.0) * f(half) >= 0.0 {
            return Err(BlockError::RootNotBracketed { nu });
        }
        t[nu] = root(f, 0.0, half, 1e-15).ok_or(BlockError::RootNotBracketed { nu })?;
        if t[nu] <= t[nu - 1] {
            return Err(BlockError::RootNotBracketed { nu });
        }
    }
    Ok(t)
}

const QUAD_TOL: f64 = 1e-13;

/// `∫_0^s 2σ/√R(T_ν − σ²) dσ`, the time from `T_ν − s²` up to `T_ν`.
fn upper_piece(seed: &BlockSeed, nu: usize, t: &[f64], s: f64) -> f64 {
    integrate(|x| 2.0 * x / seed.radicand_near(nu, t, nu, -x * x).sqrt(), 0.0, s, QUAD_TOL).value
}

/// `∫_0^s 2σ/√R(T_{ν−1} + σ²) dσ`.
fn lower_piece(seed: &BlockSeed, nu: usize, t: &[f64], s: f64) -> f64 {
    integrate(|x| 2.0 * x / seed.radicand_near(nu, t, nu - 1, x * x).sqrt(), 0.0, s, QUAD_TOL).value
}

/// `P_ν = 4 ∫_{T_{ν−1}}^{T_ν} dt/√R_ν`, split at the midpoint with the
/// substitution `t = T ∓ σ²` on each half.
pub fn periods(seed: &BlockSeed, t: &[f64]) -> Result<Vec<f64>, BlockError> {
    let n = seed.n();
    (1..=n)
        .map(|nu| {
            let (lo, hi) = (t[nu - 1], t[nu]);
            for k in 1..16 {
                let s = lo + (hi - lo) * k as f64 / 16.0;
                if seed.radicand(nu, s) <= 0.0 {
                    return Err(BlockError::NegativeRadicand { nu, t: s });
                }
            }
            let m = 0.5 * (lo + hi);
            Ok(4.0 * (upper_piece(seed, nu, t, (hi - m).sqrt()) + lower_piece(seed, nu, t, (m - lo).sqrt())))
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Quarter {
    period: f64,
    /// `x` at the midpoint time; the upper half lies below it.
    split: f64,
    upper: Half,
    lower: Half,
}

/// One half of the quarter, parametrized from its endpoint `T_k`:
/// `t = T_k + dir·s²` where `s` is interpolated if the end is a turning
/// point, and `t = T_k + dir·v` with `v` interpolated otherwise.
#[derive(Clone, Debug)]
struct Half {
    k: usize,
    dir: f64,
    squared: bool,
    cheb: Chebyshev,
}

impl Half {
    fn offset(&self, y: f64) -> f64 {
        let v = self.cheb.eval(y);
        if self.squared {
            self.dir * v * v
        } else {
            self.dir * v
        }
    }
}

/// Branch times, periods and interpolated profiles of one block.
#[derive(Clone, Debug)]
pub struct BlockGeometry {
    seed: BlockSeed,
    t: Vec<f64>,
    p: Vec<f64>,
    quarters: Vec<Quarter>,
}

/// `h̃_ν(x)` with its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileValue {
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

impl BlockGeometry {
    pub fn build(seed: &BlockSeed) -> Result<BlockGeometry, BlockError> {
        let t = branch_times(seed)?;
        let p = periods(seed, &t)?;
        let n = seed.n();
        let mut quarters = Vec::with_capacity(n);
        for nu in 1..=n {
            let (lo, hi) = (t[nu - 1], t[nu]);
            let m = 0.5 * (lo + hi);
            let su = (hi - m).sqrt();
            let sl = (m - lo).sqrt();
            let split = upper_piece(seed, nu, &t, su);
            let quarter = p[nu - 1] / 4.0;
            let mut failed = None;
            let mut half = |k: usize, dir: f64, squared: bool, len: f64, smax: f64| {
                let cheb = Chebyshev::fit_adaptive(
                    |y| {
                        let piece = |s| {
                            if dir < 0.0 {
                                upper_piece(seed, nu, &t, s)
                            } else {
                                lower_piece(seed, nu, &t, s)
                            }
                        };
                        match root(|s| piece(s) - y, 0.0, smax, 1e-15) {
                            Some(s) if squared => s,
                            Some(s) => s * s,
                            None => {
                                failed.get_or_insert(y);
                                f64::NAN
                            }
                        }
                    },
                    0.0,
                    len,
                    1e-14,
                );
                Half { k, dir, squared, cheb }
            };
            let upper = half(nu, -1.0, nu < n, split, su);
            let lower = half(nu - 1, 1.0, nu > 1, quarter - split, sl);
            if let Some(x) = failed {
                return Err(BlockError::InversionFailure { nu, x });
            }
            quarters.push(Quarter { period: p[nu - 1], split, upper, lower });
        }
        Ok(BlockGeometry { seed: seed.clone(), t, p, quarters })
    }

    pub fn seed(&self) -> &BlockSeed {
        &self.seed
    }

    pub fn n(&self) -> usize {
        self.seed.n()
    }

    pub fn branch_times(&self) -> &[f64] {
        &self.t
    }

    pub fn periods(&self) -> &[f64] {
        &self.p
    }

    /// Node counts of the two interpolants of `t_ν`.
    pub fn interpolant_degree(&self, nu: usize) -> (usize, usize) {
        let q = &self.quarters[nu - 1];
        (q.upper.cheb.degree(), q.lower.cheb.degree())
    }

    /// `(k, u)` with `t_ν(x) = T_k + u` after folding `x` into the
    /// quarter, and the sign picked up by `d/dx` in the fold.
    fn locate(&self, nu: usize, x: f64) -> (usize, f64, f64) {
        let q = &self.quarters[nu - 1];
        let half = q.period / 2.0;
        let mut y = x.rem_euclid(half);
        let mut s = 1.0;
        if y > half / 2.0 {
            y = half - y;
            s = -1.0;
        }
        let y = y.clamp(0.0, half / 2.0);
        if y <= q.split {
            (q.upper.k, q.upper.offset(y), s)
        } else {
            (q.lower.k, q.lower.offset(half / 2.0 - y), s)
        }
    }

    /// `t_ν(x)`.
    pub fn time(&self, nu: usize, x: f64) -> f64 {
        let (k, u, _) = self.locate(nu, x);
        self.t[k] + u
    }

    /// `h̃_ν(x)`, `h̃′_ν(x)`, `h̃″_ν(x)` for `ν = 1..n`; `t″ = R′/2` and
    /// `t′ = −√R` on the quarter.
    pub fn profile(&self, nu: usize, x: f64) -> ProfileValue {
        let (k, u, s) = self.locate(nu, x);
        let seed = &self.seed;
        let base = self.t[k];
        let t = base + u;
        let r = seed.radicand_near(nu, &self.t, k, u).max(0.0);
        let dh = seed.dh(t);
        ProfileValue {
            h: seed.h(base) + seed.h_shift(base, u),
            dh: -s * dh * r.sqrt(),
            d2h: seed.d2h(t) * r + 0.5 * dh * seed.radicand_dt(nu, t),
        }
    }

    pub fn h_values(&self, x: &[f64]) -> Vec<f64> {
        (1..=self.n()).map(|nu| self.profile(nu, x[nu - 1]).h).collect()
    }

    /// `(−1)^{n−ν} d_* Π_{μ≠ν} (c_μ − c_ν)`, the expected `h̃″_ν(0)`.
    pub fn expected_curvature(&self, nu: usize) -> f64 {
        let c = &self.seed.c;
        let n = self.n();
        let p: f64 = (0..=n).filter(|&m| m != nu).map(|m| c[m] - c[nu]).product();
        let s = if (n - nu) % 2 == 0 { 1.0 } else { -1.0 };
        s * self.seed.d_star * p
    }

    /// The fold group of this geometry.
    pub fn fold_group(&self) -> FoldGroup {
        FoldGroup::new(self.p.clone())
    }
}

/// Diagonal `g′` and the rows of `F′_ν` (`ν = 1..n−1`) at a torus point.
#[derive(Clone, Debug, Serialize)]
pub struct MetricData {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub f_rows: Vec<Vec<f64>>,
}

/// `g′_νν = (−1)^{n−ν} Π_{μ≠ν} (h_μ − h_ν)` from block values `h`.
pub fn metric_diagonal(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|nu| {
            let p: f64 = (0..n).filter(|&m| m != nu).map(|m| h[m] - h[nu]).product();
            if (n - 1 - nu) % 2 == 0 {
                p
            } else {
                -p
            }
        })
        .collect()
}

pub fn metric_and_integrals(geom: &BlockGeometry, x: &[f64]) -> Result<MetricData, BlockError> {
    let h = geom.h_values(x);
    let n = h.len();
    for nu in 0..n.saturating_sub(1) {
        let gap = h[nu] - h[nu + 1];
        if gap < COLLISION_GAP {
            return Err(BlockError::CollisionSingularity { nu: nu + 1, gap });
        }
    }
    let g = metric_diagonal(&h);
    let c = geom.seed.c();
    let f_rows = (1..n)
        .map(|nu| {
            (0..n)
                .map(|m| {
                    let num: f64 = (0..n).filter(|&k| k != m).map(|k| h[k] - c[nu]).product();
                    num / g[m]
                })
                .collect()
        })
        .collect();
    Ok(MetricData { h, g, f_rows })
}

/// An element `x_ν ↦ ±x_ν + k_ν P_ν/2` of the fold group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FoldElement {
    pub flip: Vec<bool>,
    pub half: Vec<bool>,
}

impl FoldElement {
    pub fn identity(n: usize) -> FoldElement {
        FoldElement { flip: vec![false; n], half: vec![false; n] }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FoldElement) -> FoldElement {
        // self(other(x)) = s1(s2 x + k2) + k1; the half shift is its own negative.
        FoldElement {
            flip: self.flip.iter().zip(&other.flip).map(|(a, b)| a ^ b).collect(),
            half: self.half.iter().zip(&other.half).map(|(a, b)| a ^ b).collect(),
        }
    }
}

/// The group `H ≅ (ℤ/2)ⁿ` acting on `R`.
#[derive(Clone, Debug)]
pub struct FoldGroup {
    periods: Vec<f64>,
    elements: Vec<FoldElement>,
}

impl FoldGroup {
    pub fn new(periods: Vec<f64>) -> FoldGroup {
        let gens = FoldGroup::generators(periods.len());
        let mut elements = vec![FoldElement::identity(periods.len())];
        let mut k = 0;
        while k < elements.len() {
            for g in &gens {
                let e = g.compose(&elements[k]);
                if !elements.contains(&e) {
                    elements.push(e);
                }
            }
            k += 1;
        }
        FoldGroup { periods, elements }
    }

    /// `x_ν ↦ −x_ν, x_{ν+1} ↦ P_{ν+1}/2 − x_{ν+1}` for `ν = 1..n−1`, and
    /// `x_1 ↦ P_1/2 + x_1` with every other coordinate negated.
    pub fn generators(n: usize) -> Vec<FoldElement> {
        let mut gens = Vec::with_capacity(n);
        for nu in 0..n.saturating_sub(1) {
            let mut g = FoldElement::identity(n);
            g.flip[nu] = true;
            g.flip[nu + 1] = true;
            g.half[nu + 1] = true;
            gens.push(g);
        }
        let mut g = FoldElement { flip: vec![true; n], half: vec![false; n] };
        g.flip[0] = false;
        g.half[0] = true;
        gens.push(g);
        gens
    }

    pub fn elements(&self) -> &[FoldElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Applies `g` and reduces into `[0, P_ν)`.
    pub fn apply(&self, g: &FoldElement, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let p = self.periods[i];
                let mut y = if g.flip[i] { -xi } else { xi };
                if g.half[i] {
                    y += p / 2.0;
                }
                y.rem_euclid(p)
            })
            .collect()
    }

    /// Multiplication table: `table[i][j]` is the index of `e_i ∘ e_j`.
    pub fn table(&self) -> Vec<Vec<usize>> {
        self.elements
            .iter()
            .map(|a| {
                self.elements
                    .iter()
                    .map(|b| {
                        let c = a.compose(b);
                        self.elements.iter().position(|e| *e == c).expect("closed")
                    })
                    .collect()
            })
            .collect()
    }

    fn same(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        x.iter().zip(y).zip(&self.periods).all(|((a, b), p)| {
            let d = (a - b).rem_euclid(*p);
            d.min(p - d) <= tol
        })
    }

    /// Distinct orbit points of `x`, reduced into the fundamental box.
    pub fn orbit(&self, x: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for g in &self.elements {
            let y = self.apply(g, x);
            if !out.iter().any(|z| self.same(z, &y, tol)) {
                out.push(y);
            }
        }
        out
    }

    /// The lexicographically least orbit point.
    pub fn canonical_representative(&self, x: &[f64]) -> Vec<f64> {
        self.elements
            .iter()
            .map(|g| self.apply(g, x))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap()
    }

    /// Walls `L_ν` (`ν = 0..n`) containing the image of `x`: `L_0` is
    /// `x_1 = ±P_1/4`, `L_n` is `x_n ∈ {0, P_n/2}`, and the interior `L_ν`
    /// is `x_ν ∈ {0, P_ν/2}` or `x_{ν+1} = ±P_{ν+1}/4`.
    pub fn branch_class(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let n = self.periods.len();
        let at = |i: usize, targets: &[f64]| {
            let p = self.periods[i];
            targets.iter().any(|t| {
                let d = (x[i] - t * p).rem_euclid(p);
                d.min(p - d) <= tol
            })
        };
        let edge = |i: usize| at(i, &[0.0, 0.5]);
        let quarter = |i: usize| at(i, &[0.25, -0.25]);
        (0..=n)
            .filter(|&nu| match nu {
                0 => quarter(0),
                _ if nu == n => edge(n - 1),
                _ => edge(nu - 1) || quarter(nu),
            })
            .collect()
    }
}

/// The JSON report of the `block` command.
pub fn block_report(seed: &BlockSeed, report: &SeedReport, geom: Option<&BlockGeometry>) -> serde_json::Value {
    serde_json::json!({
        "n": seed.n(),
        "l": seed.l(),
        "d_star": seed.d_star(),
        "c": seed.c(),
        "profile": seed.profile().tag(),
        "seed_ok": report.ok(),
        "residuals": report,
        "branch_times": geom.map(|g| g.branch_times().to_vec()),
        "periods": geom.map(|g| g.periods().to_vec()),
        "fold_group_order": geom.map(|g| g.fold_group().order()),
        "curvature_at_zero": geom.map(|g| (1..=g.n()).map(|nu| {
            let d = 1e-3;
            let num = (g.profile(nu, d).h - 2.0 * g.profile(nu, 0.0).h + g.profile(nu, -d).h) / (d * d);
            serde_json::json!({"nu": nu, "numeric": num, "expected": g.expected_curvature(nu)})
        }).collect::<Vec<_>>()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos2_seed_and_branch_times() {
        let seed = BlockSeed::cos2(vec![1.0, 0.5, 0.0], PI).unwrap();
        assert!(validate_seed(&seed, 1e-12).ok());
        let t = branch_times(&seed).unwrap();
        assert!((t[1] - PI / 4.0).abs() < 1e-14);
        let bad = seed.clone().with_d_star(2.02).unwrap();
        let r = validate_seed(&bad, 1e-9);
        assert!(!r.ok());
        assert!((r.worst("end-curvature") - 0.02).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_block() {
        let seed = BlockSeed::cos2(vec![1.0, 0.0], 3.0).unwrap();
        let g = BlockGeometry::build(&seed).unwrap();
        assert!((g.periods()[0] - 6.0).abs() < 1e-12);
        for k in 0..30 {
            let x = 0.37 * k as f64 - 2.0;
            let v = g.profile(1, x);
            let want = (PI * x / 3.0).sin().powi(2);
            assert!((v.h - want).abs() < 1e-13, "{x} {} {want}", v.h);
            assert!((v.dh - (PI / 3.0) * (2.0 * PI * x / 3.0).sin()).abs() < 1e-12);
        }
        assert_eq!(g.fold_group().order(), 2);
    }

    #[test]
    fn profile_endpoints_and_curvature() {
        let seed = BlockSeed::cos2(vec![1.0, 0.7, 0.25, 0.0], 2.0).unwrap();
        let g = BlockGeometry::build(&seed).unwrap();
        for nu in 1..=3 {
            let p = g.periods()[nu - 1];
            assert!((g.profile(nu, 0.0).h - seed.c()[nu]).abs() < 1e-12);
            assert!((g.profile(nu, p / 4.0).h - seed.c()[nu - 1]).abs() < 1e-12);
            assert!((g.profile(nu, p / 2.0).h - seed.c()[nu]).abs() < 1e-12);
            let d = 1e-3;
            let num = (g.profile(nu, d).h - 2.0 * g.profile(nu, 0.0).h + g.profile(nu, -d).h) / (d * d);
            assert!((num - g.expected_curvature(nu)).abs() < 1e-6, "{nu} {num} {}", g.expected_curvature(nu));
            assert!((g.profile(nu, 0.0).d2h - g.expected_curvature(nu)).abs() < 1e-10);
            // Derivatives against differences of the interpolated profile.
            let x = 0.3 * p;
            let fd = (g.profile(nu, x + d).h - g.profile(nu, x - d).h) / (2.0 * d);
            assert!((fd - g.profile(nu, x).dh).abs() < 1e-5);
        }
    }

    #[test]
    fn dual_seed_reverses_periods() {
        let seed = BlockSeed::cos2(vec![1.0, 0.8, 0.3, 0.0], 2.5).unwrap();
        let p = periods(&seed, &branch_times(&seed).unwrap()).unwrap();
        let dual = seed.dual();
        let q = periods(&dual, &branch_times(&dual).unwrap()).unwrap();
        for nu in 0..3 {
            assert!((p[nu] - q[2 - nu]).abs() < 1e-10);
        }
    }

    #[test]
    fn table_profile_matches_cos2() {
        let l = 2.0;
        let samples: Vec<f64> = (0..9).map(|j| (PI * (j as f64 * 0.125) / 2.0).cos().powi(2)).collect();
        let seed = BlockSeed::new(vec![1.0, 0.4, 0.0], 2.0 * PI * PI / (l * l), l, Profile::table(samples).unwrap()).unwrap();
        let cos = BlockSeed::cos2(vec![1.0, 0.4, 0.0], l).unwrap();
        for k in 0..20 {
            let t = 0.1 * k as f64;
            assert!((seed.h(t) - cos.h(t)).abs() < 1e-14);
            assert!((seed.d2h(t) - cos.d2h(t)).abs() < 1e-12);
        }
        assert!(validate_seed(&seed, 1e-6).ok());
    }

    #[test]
    fn metric_and_fold_group() {
        let seed = BlockSeed::cos2(vec![1.0, 0.5, 0.0], PI).unwrap();
        let g = BlockGeometry::build(&seed).unwrap();
        let fg = g.fold_group();
        assert_eq!(fg.order(), 4);
        let table = fg.table();
        assert!(table.iter().all(|r| r.iter().filter(|&&k| k == 0).count() == 1));
        let x = [0.31 * g.periods()[0], 0.13 * g.periods()[1]];
        let m = metric_and_integrals(&g, &x).unwrap();
        for e in fg.elements() {
            let y = fg.apply(e, &x);
            let my = metric_and_integrals(&g, &y).unwrap();
            for k in 0..2 {
                assert!((m.g[k] - my.g[k]).abs() < 1e-12);
                assert!((m.f_rows[0][k] - my.f_rows[0][k]).abs() < 1e-10);
            }
        }
        assert_eq!(fg.orbit(&x, 1e-12).len(), 4);
        assert!(fg.branch_class(&x, 1e-12).is_empty());
        let y = [0.0, g.periods()[1] / 4.0];
        assert!(fg.orbit(&y, 1e-12).len() < 4);
        let z = [0.0, 0.13 * g.periods()[1]];
        assert_eq!(fg.orbit(&z, 1e-12).len(), 4);
        assert_eq!(fg.branch_class(&z, 1e-12), vec![1]);
        let diag = metric_diagonal(&[0.8, 0.3]);
        assert!((diag[0] - 0.5).abs() < 1e-15 && (diag[1] - 0.5).abs() < 1e-15);
    }
}
