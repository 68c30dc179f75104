//! Geodesic flow of a one-block manifold on its open dense stratum, in the
//! reduced phase space `(x, p)` at fixed torus momenta `J`.
//!
//! With `w_ν = p_ν² + Q_ν²` the energy is `E = ½ Σ a_ν w_ν` and the first
//! integrals are `F_i = Σ_ν f_{iν} a_ν w_ν`; in particular `F_n = 2E`.
//! `Q_ν = Σ_i b_{νi} J_i / h̃′_ν` depends on `x_ν` alone, which is what
//! makes the system separable.

use nalgebra::DMatrix;
use ode_solvers::dop_shared::OutputType;
use ode_solvers::{DVector, Dop853, System};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::block::{metric_diagonal, BlockGeometry};
use crate::frame::elementary_symmetric;

/// Smallest admissible adjacent `h̃` gap along a trajectory.
pub const GAP_GUARD: f64 = 1e-8;
/// Largest admissible condition number of `B`.
pub const CONDITION_CAP: f64 = 1e10;

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
pub enum FlowError {
    #[error("state has {got} entries per vector, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("real mode requires J = 0")]
    RealModeMomenta,
    #[error("complex mode requires x in the open chamber (h̃′_{nu} = {value:e})")]
    NotInChamber { nu: usize, value: f64 },
    #[error("B is near singular (condition {0:e})")]
    NearSingularB(f64),
    #[error("singularity approached at t = {t}: {reason}")]
    SingularityApproach { t: f64, reason: String },
    #[error("the flow is only available for a single block, the poset has {0}")]
    MultiBlock(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub j: Vec<f64>,
}

/// Pointwise data at `x` for fixed `J`.
#[derive(Clone, Debug)]
pub struct Point {
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
    pub d2h: Vec<f64>,
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
}

impl Point {
    /// Smallest gap `h̃_ν − h̃_{ν+1}`.
    pub fn min_gap(&self) -> f64 {
        self.h.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
    }
}

/// The flow of one block.
#[derive(Clone, Debug)]
pub struct FlowModel {
    geom: BlockGeometry,
}

fn parity(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl FlowModel {
    pub fn new(geom: BlockGeometry) -> FlowModel {
        FlowModel { geom }
    }

    pub fn geometry(&self) -> &BlockGeometry {
        &self.geom
    }

    pub fn n(&self) -> usize {
        self.geom.n()
    }

    pub fn check_state(&self, s: &PhaseState, mode: Mode) -> Result<(), FlowError> {
        let n = self.n();
        for v in [&s.x, &s.p, &s.j] {
            if v.len() != n {
                return Err(FlowError::Dimension { expected: n, got: v.len() });
            }
        }
        match mode {
            Mode::Real if s.j.iter().any(|&v| v != 0.0) => Err(FlowError::RealModeMomenta),
            Mode::Complex => {
                let pt = self.point(&s.x, &s.j);
                for (k, d) in pt.dh.iter().enumerate() {
                    if d.abs() < 1e-6 {
                        return Err(FlowError::NotInChamber { nu: k + 1, value: *d });
                    }
                }
                let c = self.condition(&pt);
                if c > CONDITION_CAP {
                    return Err(FlowError::NearSingularB(c));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn point(&self, x: &[f64], j: &[f64]) -> Point {
        let n = self.n();
        let (mut h, mut dh, mut d2h) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let v = self.geom.profile(k + 1, x[k]);
            h[k] = v.h;
            dh[k] = v.dh;
            d2h[k] = v.d2h;
        }
        let a: Vec<f64> = metric_diagonal(&h).iter().map(|g| 1.0 / g).collect();
        let (mut q, mut dq) = (vec![0.0; n], vec![0.0; n]);
        if j.iter().any(|&v| v != 0.0) {
            for k in 0..n {
                // P(h) = Σ_i (−h)^i J_i and its h-derivative.
                let (mut poly, mut dpoly, mut pw) = (0.0, 0.0, 1.0);
                for (i, ji) in j.iter().enumerate() {
                    poly += pw * ji;
                    if i + 1 < n {
                        dpoly -= (i + 1) as f64 * pw * j[i + 1];
                    }
                    pw *= -h[k];
                }
                let sg = parity(n - 1 - k);
                q[k] = sg * poly / dh[k];
                dq[k] = sg * dpoly - q[k] * d2h[k] / dh[k];
            }
        }
        Point { h, dh, d2h, a, q, dq }
    }

    /// `E` from the profile values, momenta and `Q`.
    pub fn energy_from(h: &[f64], p: &[f64], q: &[f64]) -> f64 {
        let g = metric_diagonal(h);
        0.5 * (0..h.len()).map(|k| (p[k] * p[k] + q[k] * q[k]) / g[k]).sum::<f64>()
    }

    /// `F_1..F_n` from the profile values, momenta and `Q`.
    pub fn integrals_from(h: &[f64], p: &[f64], q: &[f64]) -> Vec<f64> {
        let n = h.len();
        let g = metric_diagonal(h);
        let f = Self::f_matrix(h);
        (0..n).map(|i| (0..n).map(|k| f[(i, k)] * (p[k] * p[k] + q[k] * q[k]) / g[k]).sum()).collect()
    }

    fn weights(pt: &Point, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&pt.q).map(|(p, q)| p * p + q * q).collect()
    }

    pub fn hamiltonian(&self, s: &PhaseState) -> f64 {
        let pt = self.point(&s.x, &s.j);
        0.5 * Self::weights(&pt, &s.p).iter().zip(&pt.a).map(|(w, a)| a * w).sum::<f64>()
    }

    /// `f_{iν} = S_{n−1−i}(h_ξ; ξ ≠ ν)` (0-based `i`).
    pub fn f_matrix(h: &[f64]) -> DMatrix<f64> {
        let n = h.len();
        let mut f = DMatrix::zeros(n, n);
        for k in 0..n {
            let rest: Vec<f64> = h.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, v)| *v).collect();
            let s = elementary_symmetric(&rest);
            for i in 0..n {
                f[(i, k)] = s[n - 1 - i];
            }
        }
        f
    }

    /// `F_1..F_n`.
    pub fn first_integrals(&self, s: &PhaseState) -> Vec<f64> {
        let pt = self.point(&s.x, &s.j);
        let aw: Vec<f64> = Self::weights(&pt, &s.p).iter().zip(&pt.a).map(|(w, a)| a * w).collect();
        let f = Self::f_matrix(&pt.h);
        (0..self.n()).map(|i| (0..self.n()).map(|k| f[(i, k)] * aw[k]).sum()).collect()
    }

    /// `F_i` from the inverse of `(a_ν b_{νi})` instead of the closed form.
    pub fn first_integrals_by_inverse(&self, s: &PhaseState) -> Vec<f64> {
        let pt = self.point(&s.x, &s.j);
        let n = self.n();
        let ab = DMatrix::from_fn(n, n, |k, i| pt.a[k] * parity(n - 1 - k) * (-pt.h[k]).powi(i as i32));
        let rhs = nalgebra::DVector::from_iterator(
            n,
            Self::weights(&pt, &s.p).iter().zip(&pt.a).map(|(w, a)| a * w),
        );
        ab.lu().solve(&rhs).expect("invertible off the collision set").iter().copied().collect()
    }

    /// `F′_ν = Σ_μ Π_{ξ≠μ}(h̃_ξ − c_ν) a_μ w_μ` for `ν = 1..n−1`, with the
    /// same sum taken in absolute values (the normalization for drift).
    pub fn prime_integrals(&self, s: &PhaseState) -> (Vec<f64>, Vec<f64>) {
        let pt = self.point(&s.x, &s.j);
        let c = self.geom.seed().c();
        let n = self.n();
        let aw: Vec<f64> = Self::weights(&pt, &s.p).iter().zip(&pt.a).map(|(w, a)| a * w).collect();
        let mut vals = Vec::with_capacity(n.saturating_sub(1));
        let mut abs = Vec::with_capacity(n.saturating_sub(1));
        for nu in 1..n {
            let (mut v, mut m) = (0.0, 0.0);
            for k in 0..n {
                let coef: f64 = (0..n).filter(|&x| x != k).map(|x| pt.h[x] - c[nu]).product();
                v += coef * aw[k];
                m += coef.abs() * aw[k];
            }
            vals.push(v);
            abs.push(m);
        }
        (vals, abs)
    }

    /// Residual of `Σ_j a_ν b_{νj} F_j = a_ν (p_ν² + Q_ν²)`.
    pub fn identity_residual(&self, s: &PhaseState) -> f64 {
        let pt = self.point(&s.x, &s.j);
        let f = self.first_integrals(s);
        let w = Self::weights(&pt, &s.p);
        let n = self.n();
        (0..n)
            .map(|k| {
                let lhs: f64 = (0..n).map(|i| pt.a[k] * parity(n - 1 - k) * (-pt.h[k]).powi(i as i32) * f[i]).sum();
                let rhs = pt.a[k] * w[k];
                (lhs - rhs).abs() / rhs.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Condition number of `B_{iν} = a_ν f_{iν} h̃′_ν`.
    pub fn condition(&self, pt: &Point) -> f64 {
        let n = self.n();
        let f = Self::f_matrix(&pt.h);
        let b = DMatrix::from_fn(n, n, |i, k| pt.a[k] * f[(i, k)] * pt.dh[k]);
        let sv = b.singular_values();
        let max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
        let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// `∂H/∂x`, analytic in `h̃′`, `h̃″`.
    pub fn grad_x(&self, pt: &Point, p: &[f64]) -> Vec<f64> {
        let n = self.n();
        let w = Self::weights(pt, p);
        (0..n)
            .map(|m| {
                let mut s = 0.0;
                for k in 0..n {
                    let da = if k == m {
                        pt.a[k] * (0..n).filter(|&x| x != k).map(|x| 1.0 / (pt.h[x] - pt.h[k])).sum::<f64>()
                    } else {
                        -pt.a[k] / (pt.h[m] - pt.h[k])
                    };
                    s += 0.5 * da * w[k];
                }
                s * pt.dh[m] + pt.a[m] * pt.q[m] * pt.dq[m]
            })
            .collect()
    }

    /// Hamilton's equations on `y = (x, p)`.
    pub fn rhs(&self, y: &[f64], j: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (x, p) = y.split_at(n);
        let pt = self.point(x, j);
        let g = self.grad_x(&pt, p);
        let mut out = Vec::with_capacity(2 * n);
        out.extend(pt.a.iter().zip(p).map(|(a, p)| a * p));
        out.extend(g.iter().map(|v| -v));
        out
    }

    /// A random state: `x` in the interior of the quarter box, `p` and `J`
    /// uniform in `[−1, 1]` (`J = 0` in real mode).
    pub fn random_state<R: Rng>(&self, mode: Mode, rng: &mut R) -> PhaseState {
        let n = self.n();
        loop {
            let x: Vec<f64> = self.geom.periods().iter().map(|p| rng.gen_range(0.1..0.9) * p / 4.0).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let j: Vec<f64> = match mode {
                Mode::Real => vec![0.0; n],
                Mode::Complex => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let s = PhaseState { x, p, j };
            if self.check_state(&s, mode).is_ok() {
                return s;
            }
        }
    }
}

/// Step control of the integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Stepper {
    /// Dormand-Prince 8(5,3) with proportional-integral step control.
    Adaptive { rtol: f64, atol: f64 },
    /// Dormand-Prince 5th-order solution at a fixed step.
    Fixed { step: f64 },
    /// Implicit midpoint rule at a fixed step.
    Midpoint { step: f64 },
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// One Dormand-Prince step; returns the new state and its derivative
/// (the last stage, evaluated at the new state).
fn dopri_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, y: &[f64], k1: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let d = y.len();
    let mut k: Vec<Vec<f64>> = vec![k1.to_vec()];
    for s in 1..6 {
        let ys: Vec<f64> = (0..d)
            .map(|i| y[i] + h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>())
            .collect();
        k.push(f(&ys));
    }
    let ynew: Vec<f64> = (0..d).map(|i| y[i] + h * (0..6).map(|r| A[6][r] * k[r][i]).sum::<f64>()).collect();
    let knew = f(&ynew);
    (ynew, knew)
}

fn midpoint_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, y: &[f64], h: f64) -> Vec<f64> {
    let mut k = f(y);
    for _ in 0..100 {
        let mid: Vec<f64> = y.iter().zip(&k).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = f(&mid);
        let diff = k.iter().zip(&k2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        k = k2;
        if diff <= 1e-15 * (1.0 + k.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    y.iter().zip(&k).map(|(a, b)| a + h * b).collect()
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub e: f64,
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantDrift {
    pub name: String,
    pub initial: f64,
    pub max_abs_deviation: f64,
    pub max_rel_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub invariants: Vec<InvariantDrift>,
    pub steps: usize,
    pub rejections: usize,
    pub min_gap: f64,
    pub max_condition: f64,
    pub max_identity_residual: f64,
    pub final_time: f64,
    pub truncated: Option<FlowError>,
}

impl DriftReport {
    pub fn drift(&self, name: &str) -> Option<f64> {
        self.invariants.iter().find(|d| d.name == name).map(|d| d.max_rel_drift)
    }

    /// Largest relative drift over `E` and the `F′_ν`.
    pub fn max_energy_family_drift(&self) -> f64 {
        self.invariants
            .iter()
            .filter(|d| d.name == "E" || d.name.starts_with("F'"))
            .fold(0.0, |m, d| m.max(d.max_rel_drift))
    }

    pub fn max_drift(&self) -> f64 {
        self.invariants.iter().fold(0.0, |m, d| m.max(d.max_rel_drift))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// CSV with header `t,x1..xn,p1..pn,E,F1..Fn`, 17 significant digits.
    pub fn to_csv(&self, n: usize) -> String {
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x{i}")));
        head.extend((1..=n).map(|i| format!("p{i}")));
        head.push("E".into());
        head.extend((1..=n).map(|i| format!("F{i}")));
        let mut out = head.join(",");
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![fmt17(s.t)];
            row.extend(s.x.iter().map(|v| fmt17(*v)));
            row.extend(s.p.iter().map(|v| fmt17(*v)));
            row.push(fmt17(s.e));
            row.extend(s.f.iter().map(|v| fmt17(*v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// A number with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Options of [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub t_final: f64,
    pub stepper: Stepper,
    /// Record every k-th accepted step (the last one always).
    pub record_every: usize,
    /// Spot-check the `b`/`f` identity every k-th accepted step.
    pub check_every: usize,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn new(t_final: f64, stepper: Stepper) -> IntegrateOptions {
        IntegrateOptions { t_final, stepper, record_every: 1, check_every: 50, max_steps: 10_000_000 }
    }
}

/// Per-step bookkeeping shared by all steppers.
struct Recorder<'a> {
    model: &'a FlowModel,
    mode: Mode,
    j: Vec<f64>,
    record_every: usize,
    check_every: usize,
    names: Vec<String>,
    initial: Vec<f64>,
    scale: Vec<f64>,
    dev: Vec<f64>,
    samples: Vec<Sample>,
    steps: usize,
    min_gap: f64,
    max_condition: f64,
    max_identity: f64,
    last_t: f64,
    last_y: Vec<f64>,
    truncated: Option<FlowError>,
}

impl<'a> Recorder<'a> {
    fn new(model: &'a FlowModel, s0: &PhaseState, mode: Mode, opts: &IntegrateOptions) -> Recorder<'a> {
        let n = model.n();
        let mut names = vec!["E".to_string()];
        names.extend((1..=n).map(|i| format!("F{i}")));
        names.extend((1..n).map(|i| format!("F'{i}")));
        names.extend((1..=n).map(|i| format!("J{i}")));
        let mut r = Recorder {
            model,
            mode,
            j: s0.j.clone(),
            record_every: opts.record_every.max(1),
            check_every: opts.check_every.max(1),
            names,
            initial: vec![],
            scale: vec![],
            dev: vec![],
            samples: vec![],
            steps: 0,
            min_gap: f64::INFINITY,
            max_condition: 0.0,
            max_identity: 0.0,
            last_t: 0.0,
            last_y: vec![],
            truncated: None,
        };
        let y: Vec<f64> = s0.x.iter().chain(&s0.p).copied().collect();
        let (v, scale, sample) = r.evaluate(0.0, &y);
        r.dev = vec![0.0; v.len()];
        r.initial = v;
        r.scale = scale;
        r.samples.push(sample);
        r.max_identity = model.identity_residual(s0);
        let pt = model.point(&s0.x, &s0.j);
        r.min_gap = pt.min_gap();
        if mode == Mode::Complex {
            r.max_condition = model.condition(&pt);
        }
        r
    }

    fn evaluate(&self, t: f64, y: &[f64]) -> (Vec<f64>, Vec<f64>, Sample) {
        let s = self.state(y);
        let e = self.model.hamiltonian(&s);
        let f = self.model.first_integrals(&s);
        let (fp, fabs) = self.model.prime_integrals(&s);
        let mut v = vec![e];
        v.extend(f.iter().copied());
        v.extend(fp);
        v.extend(s.j.iter().copied());
        let mut scale = vec![e.abs()];
        scale.extend(f.iter().map(|x| x.abs()));
        scale.extend(fabs);
        scale.extend(s.j.iter().map(|x| x.abs()));
        let sample = Sample { t, x: s.x, p: s.p, e, f };
        (v, scale, sample)
    }

    fn state(&self, y: &[f64]) -> PhaseState {
        let n = self.j.len();
        PhaseState { x: y[..n].to_vec(), p: y[n..].to_vec(), j: self.j.clone() }
    }

    /// Bookkeeping after an accepted step; `true` stops the integration.
    fn accept(&mut self, t: f64, y: &[f64], last: bool) -> bool {
        if y.iter().any(|v| !v.is_finite()) {
            self.truncated = Some(FlowError::SingularityApproach { t, reason: "non-finite state".into() });
            return true;
        }
        self.steps += 1;
        self.last_t = t;
        self.last_y = y.to_vec();
        let (v, _, sample) = self.evaluate(t, y);
        for (k, x) in v.iter().enumerate() {
            self.dev[k] = self.dev[k].max((x - self.initial[k]).abs());
        }
        if self.steps % self.record_every == 0 || last {
            self.samples.push(sample);
        }
        if self.steps % self.check_every == 0 {
            self.max_identity = self.max_identity.max(self.model.identity_residual(&self.state(y)));
        }
        let n = self.j.len();
        let pt = self.model.point(&y[..n], &self.j);
        let gap = pt.min_gap();
        self.min_gap = self.min_gap.min(gap);
        if gap < GAP_GUARD {
            self.truncated = Some(FlowError::SingularityApproach { t, reason: format!("h̃ gap {gap:e}") });
            return true;
        }
        if self.mode == Mode::Complex {
            let c = self.model.condition(&pt);
            self.max_condition = self.max_condition.max(c);
            if c > CONDITION_CAP {
                self.truncated = Some(FlowError::SingularityApproach { t, reason: format!("B condition {c:e}") });
                return true;
            }
        }
        false
    }

    fn finish(mut self, rejections: usize) -> (Trajectory, DriftReport) {
        if self.samples.last().map(|s| s.t) != Some(self.last_t) {
            let (_, _, sample) = self.evaluate(self.last_t, &self.last_y);
            self.samples.push(sample);
        }
        let invariants = (0..self.names.len())
            .map(|k| InvariantDrift {
                name: self.names[k].clone(),
                initial: self.initial[k],
                max_abs_deviation: self.dev[k],
                max_rel_drift: if self.scale[k] > 0.0 { self.dev[k] / self.scale[k] } else { self.dev[k] },
            })
            .collect();
        let report = DriftReport {
            invariants,
            steps: self.steps,
            rejections,
            min_gap: self.min_gap,
            max_condition: self.max_condition,
            max_identity_residual: self.max_identity,
            final_time: self.last_t,
            truncated: self.truncated,
        };
        (Trajectory { samples: self.samples }, report)
    }
}

struct Adapter<'r, 'a> {
    rec: &'r mut Recorder<'a>,
    t_final: f64,
}

impl System<f64, DVector<f64>> for Adapter<'_, '_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        dy.copy_from_slice(&self.rec.model.rhs(y.as_slice(), &self.rec.j));
    }

    fn solout(&mut self, t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        // The solver reports the initial point too.
        if t == 0.0 && self.rec.steps == 0 {
            return false;
        }
        self.rec.accept(t, y.as_slice(), t >= self.t_final)
    }
}

pub fn integrate(model: &FlowModel, s0: &PhaseState, mode: Mode, opts: &IntegrateOptions) -> Result<(Trajectory, DriftReport), FlowError> {
    model.check_state(s0, mode)?;
    let j = s0.j.clone();
    let f = |y: &[f64]| model.rhs(y, &j);
    let mut rec = Recorder::new(model, s0, mode, opts);
    let mut y: Vec<f64> = s0.x.iter().chain(&s0.p).copied().collect();
    let mut rejections = 0;
    rec.last_y = y.clone();
    match opts.stepper {
        Stepper::Adaptive { rtol, atol } => {
            let y0 = DVector::from_column_slice(&y);
            let t_final = opts.t_final;
            let adapter = Adapter { rec: &mut rec, t_final };
            let mut solver = Dop853::from_param(
                adapter,
                0.0,
                t_final,
                t_final,
                y0,
                rtol,
                atol,
                0.9,
                0.04,
                0.333,
                6.0,
                f64::MAX,
                0.0,
                opts.max_steps as u32,
                1000,
                OutputType::Sparse,
            );
            let outcome = solver.integrate();
            drop(solver);
            match outcome {
                Ok(stats) => rejections = stats.rejected_steps as usize,
                Err(e) => {
                    let t = rec.last_t;
                    rec.truncated.get_or_insert(FlowError::SingularityApproach { t, reason: e.to_string() });
                }
            }
        }
        Stepper::Fixed { step } | Stepper::Midpoint { step } => {
            let mut k1 = f(&y);
            let mut t = 0.0;
            while t < opts.t_final && rec.steps < opts.max_steps {
                let h = step.min(opts.t_final - t);
                if let Stepper::Fixed { .. } = opts.stepper {
                    let (ynew, knew) = dopri_step(&f, &y, &k1, h);
                    y = ynew;
                    k1 = knew;
                } else {
                    y = midpoint_step(&f, &y, h);
                }
                t = if opts.t_final - t <= step { opts.t_final } else { t + h };
                if rec.accept(t, &y, t >= opts.t_final) {
                    break;
                }
            }
        }
    }
    Ok(rec.finish(rejections))
}

/// Canonical bracket `{F, G} = Σ (∂_q F ∂_p G − ∂_p F ∂_q G)` with
/// Richardson-extrapolated central differences; returns the bracket and
/// its value normalized by `|∇F| |∇G|`.
pub fn bracket<F, G>(f: F, g: G, q: &[f64], p: &[f64], step: f64) -> (f64, f64)
where
    F: Fn(&[f64], &[f64]) -> f64,
    G: Fn(&[f64], &[f64]) -> f64,
{
    bracket_of_gradients(&gradient(&f, q, p, step), &gradient(&g, q, p, step))
}

/// The bracket of two functions given their `(q, p)` gradients.
pub fn bracket_of_gradients(gf: &[f64], gg: &[f64]) -> (f64, f64) {
    let n = gf.len() / 2;
    let b: f64 = (0..n).map(|i| gf[i] * gg[n + i] - gf[n + i] * gg[i]).sum();
    let nf = gf.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ng = gg.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm = if nf > 0.0 && ng > 0.0 { b.abs() / (nf * ng) } else { 0.0 };
    (b, norm)
}

/// Gradient in `(q, p)` by central differences with one Richardson step.
pub fn gradient<F: Fn(&[f64], &[f64]) -> f64>(f: &F, q: &[f64], p: &[f64], step: f64) -> Vec<f64> {
    let n = q.len();
    let mut out = Vec::with_capacity(2 * n);
    let mut z: Vec<f64> = q.iter().chain(p).copied().collect();
    for i in 0..2 * n {
        let mut cd = |h: f64| {
            let orig = z[i];
            z[i] = orig + h;
            let fp = f(&z[..n], &z[n..]);
            z[i] = orig - h;
            let fm = f(&z[..n], &z[n..]);
            z[i] = orig;
            (fp - fm) / (2.0 * h)
        };
        let d1 = cd(step);
        let d2 = cd(step / 2.0);
        out.push((4.0 * d2 - d1) / 3.0);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketReport {
    pub samples: usize,
    /// Largest normalized `|{F_i, F_j}|`.
    pub max_ff: f64,
    /// Largest normalized `|{E, F_i}|`.
    pub max_ef: f64,
    /// Largest `|{E, E}|` as computed (zero by antisymmetry).
    pub ee: f64,
}

impl BracketReport {
    pub fn max(&self) -> f64 {
        self.max_ff.max(self.max_ef)
    }
}

/// Brackets of `E, F_1..F_n` at random states.
pub fn poisson_check<R: Rng>(model: &FlowModel, mode: Mode, samples: usize, step: f64, rng: &mut R) -> BracketReport {
    let n = model.n();
    let mut rep = BracketReport { samples, max_ff: 0.0, max_ef: 0.0, ee: 0.0 };
    for _ in 0..samples {
        let s = model.random_state(mode, rng);
        let state = |x: &[f64], p: &[f64]| PhaseState { x: x.to_vec(), p: p.to_vec(), j: s.j.clone() };
        let ge = gradient(&|x: &[f64], p: &[f64]| model.hamiltonian(&state(x, p)), &s.x, &s.p, step);
        let gf: Vec<Vec<f64>> = (0..n)
            .map(|i| gradient(&|x: &[f64], p: &[f64]| model.first_integrals(&state(x, p))[i], &s.x, &s.p, step))
            .collect();
        rep.ee = rep.ee.max(bracket_of_gradients(&ge, &ge).0.abs());
        for i in 0..n {
            rep.max_ef = rep.max_ef.max(bracket_of_gradients(&ge, &gf[i]).1);
            for k in i + 1..n {
                rep.max_ff = rep.max_ff.max(bracket_of_gradients(&gf[i], &gf[k]).1);
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockSeed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(c: Vec<f64>) -> FlowModel {
        FlowModel::new(BlockGeometry::build(&BlockSeed::cos2(c, std::f64::consts::PI).unwrap()).unwrap())
    }

    #[test]
    fn zero_covector_is_fixed() {
        let m = model(vec![1.0, 0.5, 0.0]);
        let s = PhaseState { x: vec![0.3, 0.4], p: vec![0.0, 0.0], j: vec![0.0, 0.0] };
        assert_eq!(m.hamiltonian(&s), 0.0);
        assert!(m.first_integrals(&s).iter().all(|v| *v == 0.0));
        let (traj, rep) = integrate(&m, &s, Mode::Real, &IntegrateOptions::new(1.0, Stepper::Fixed { step: 0.1 })).unwrap();
        assert_eq!(traj.samples.last().unwrap().x, s.x);
        assert_eq!(rep.max_drift(), 0.0);
    }

    #[test]
    fn one_dimensional_uniform_motion() {
        let m = model(vec![1.0, 0.0]);
        let s = PhaseState { x: vec![0.2], p: vec![0.7], j: vec![0.0] };
        let (traj, rep) = integrate(&m, &s, Mode::Real, &IntegrateOptions::new(10.0, Stepper::Adaptive { rtol: 1e-10, atol: 1e-12 })).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.x[0] - (0.2 + 7.0)).abs() < 1e-12);
        assert!(rep.max_drift() < 1e-15);
    }

    #[test]
    fn integrals_two_ways_and_identity() {
        let m = model(vec![1.0, 0.6, 0.2, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [Mode::Real, Mode::Complex] {
            for _ in 0..20 {
                let s = m.random_state(mode, &mut rng);
                let a = m.first_integrals(&s);
                let b = m.first_integrals_by_inverse(&s);
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
                }
                assert!((a[2] - 2.0 * m.hamiltonian(&s)).abs() < 1e-12);
                assert!(m.identity_residual(&s) < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let m = model(vec![1.0, 0.6, 0.2, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [Mode::Real, Mode::Complex] {
            let s = m.random_state(mode, &mut rng);
            let pt = m.point(&s.x, &s.j);
            let g = m.grad_x(&pt, &s.p);
            let j = s.j.clone();
            let fd = gradient(
                &|x: &[f64], p: &[f64]| m.hamiltonian(&PhaseState { x: x.to_vec(), p: p.to_vec(), j: j.clone() }),
                &s.x,
                &s.p,
                1e-4,
            );
            for k in 0..3 {
                assert!((g[k] - fd[k]).abs() < 1e-7 * (1.0 + g[k].abs()), "{mode:?} {k} {} {}", g[k], fd[k]);
            }
        }
    }

    #[test]
    fn fixed_step_order() {
        let m = model(vec![1.0, 0.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = m.random_state(Mode::Real, &mut rng);
        let drift = |step: f64| {
            let (_, r) = integrate(&m, &s, Mode::Real, &IntegrateOptions::new(5.0, Stepper::Fixed { step })).unwrap();
            r.max_energy_family_drift()
        };
        let (d1, d2) = (drift(0.02), drift(0.01));
        assert!(d1 / d2 > 16.0, "{d1:e} {d2:e}");
        let (_, r) = integrate(&m, &s, Mode::Real, &IntegrateOptions::new(5.0, Stepper::Midpoint { step: 0.01 })).unwrap();
        assert!(r.drift("E").unwrap() < 1e-3);
    }

    #[test]
    fn energy_at_given_profile_values() {
        let (h, p, q) = ([0.8, 0.3], [1.0, 0.0], [0.0, 0.0]);
        assert!((FlowModel::energy_from(&h, &p, &q) - 1.0).abs() < 1e-15);
        let f = FlowModel::integrals_from(&h, &p, &q);
        // Column 1 of f is (S_1(h_2), S_0) = (0.3, 1), weighted by a_1 = 2.
        assert!((f[0] - 0.6).abs() < 1e-15 && (f[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn brackets_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for c in [vec![1.0, 0.5, 0.0], vec![1.0, 0.6, 0.2, 0.0]] {
            let m = model(c);
            for mode in [Mode::Real, Mode::Complex] {
                let r = poisson_check(&m, mode, 20, 1e-4, &mut rng);
                assert_eq!(r.ee, 0.0);
                assert!(r.max() < 1e-6, "{r:?}");
            }
            // A function outside the family does not commute with E.
            let st = m.random_state(Mode::Real, &mut rng);
            let (_, v) = bracket(
                |x: &[f64], p: &[f64]| m.hamiltonian(&PhaseState { x: x.to_vec(), p: p.to_vec(), j: st.j.clone() }),
                |_: &[f64], p: &[f64]| p[0],
                &st.x,
                &st.p,
                1e-3,
            );
            assert!(v > 1e-3);
        }
    }
}
