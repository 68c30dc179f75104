//! Small numerical kernels: adaptive Gauss-Kronrod quadrature and
//! Chebyshev interpolation on an interval.

use roots::{find_root_brent, SimpleConvergency};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel: (integral, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive G7-K15 on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0, panels: 0 };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut count = 1;
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol || count >= 2000 || !total_err.is_finite() {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            break;
        }
        let (v1, e1) = gk15(&mut f, pa, m);
        let (v2, e2) = gk15(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
        count += 1;
    }
    Quad {
        value: panels.iter().map(|p| p.2).sum(),
        error: panels.iter().map(|p| p.3).sum(),
        panels: count,
    }
}

/// Brent root of `f` on a bracketing interval.
pub fn root<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> Option<f64> {
    let mut conv = SimpleConvergency { eps, max_iter: 400 };
    find_root_brent(a, b, f, &mut conv).ok()
}

/// A Chebyshev expansion on `[a, b]`.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coef: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates at `n` Chebyshev points of the first kind.
    pub fn fit<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> Chebyshev {
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let y = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
                f(0.5 * (a + b) + 0.5 * (b - a) * y)
            })
            .collect();
        let coef = (0..n)
            .map(|j| {
                let s: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                s * 2.0 / n as f64
            })
            .collect();
        Chebyshev { a, b, coef }
    }

    /// Doubles the node count until the trailing coefficients fall below
    /// `tol` relative to the leading one.
    pub fn fit_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Chebyshev {
        let mut n = 16;
        loop {
            let c = Chebyshev::fit(&mut f, a, b, n);
            let scale = c.coef.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            let tail = c.coef[n - 4..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if tail <= tol * scale || n >= 1024 || !tail.is_finite() {
                return c;
            }
            n *= 2;
        }
    }

    pub fn degree(&self) -> usize {
        self.coef.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coef.iter().skip(1).rev() {
            let t = 2.0 * y * b1 - b2 + c;
            b2 = b1;
            b1 = t;
        }
        y * b1 - b2 + 0.5 * self.coef[0]
    }
}
