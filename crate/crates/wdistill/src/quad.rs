//! Adaptive Gauss-Kronrod quadrature and supporting numerics.
//!
//! All physical integrals in this crate go through these routines: the
//! window Fourier transforms, the spectral k-integrals, and the
//! time-domain oracles. The 7-15 Gauss-Kronrod pair gives a cheap
//! embedded error estimate; intervals are split on a worst-first heap.

use num_complex::Complex64;

use crate::error::{Result, WdError};

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Value types that can be accumulated by the quadrature driver.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        num_complex::Complex::norm(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate<V> {
    pub value: V,
    pub error: f64,
}

fn kronrod_panel<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> QuadEstimate<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = V::zero();
    let mut gauss = V::zero();
    for (idx, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let contribution = if x == 0.0 {
            f(center)
        } else {
            f(center - half * x).add(f(center + half * x))
        };
        kronrod = kronrod.add(contribution.scale(wk));
        // Odd Kronrod nodes coincide with the embedded Gauss rule.
        if idx % 2 == 1 {
            gauss = gauss.add(contribution.scale(WG[idx / 2]));
        }
    }
    let value = kronrod.scale(half);
    let diff = value.add(gauss.scale(-half)).norm();
    // GSL-style sharpening of the raw |K - G| estimate.
    let error = if diff > 0.0 {
        (200.0 * diff).powf(1.5).min(diff).max(diff * 1e-6)
    } else {
        0.0
    };
    QuadEstimate { value, error }
}

/// Adaptive quadrature of `f` over `[a, b]`.
///
/// Splits the worst interval until `sum(err) <= max(abs_tol, rel_tol*|I|)`
/// or the subdivision budget is exhausted, in which case the achieved
/// estimate is reported through the error.
pub fn adaptive<V: QuadValue, F: FnMut(f64) -> V>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<QuadEstimate<V>> {
    adaptive_seeded(f, a, b, 1, abs_tol, rel_tol, max_subdiv)
}

/// Adaptive quadrature starting from `seeds` equal panels instead of one.
/// A single Kronrod panel across many oscillation periods can report a
/// deceptively small error and stall the greedy refinement; seeding at
/// the oscillation scale keeps the estimates honest.
pub fn adaptive_seeded<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    seeds: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<QuadEstimate<V>> {
    if a == b {
        return Ok(QuadEstimate {
            value: V::zero(),
            error: 0.0,
        });
    }
    let seeds = seeds.max(1);
    let width = (b - a) / seeds as f64;
    let mut intervals: Vec<(f64, f64, QuadEstimate<V>)> = (0..seeds)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == seeds { b } else { lo + width };
            (lo, hi, kronrod_panel(&mut f, lo, hi))
        })
        .collect();
    for _ in 0..max_subdiv {
        let total: f64 = intervals.iter().map(|(_, _, e)| e.error).sum();
        let mut value = V::zero();
        for (_, _, e) in &intervals {
            value = value.add(e.value);
        }
        let tol = abs_tol.max(rel_tol * value.norm());
        if total <= tol {
            return Ok(QuadEstimate {
                value,
                error: total,
            });
        }
        // Split the interval with the largest error.
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.2.error.total_cmp(&y.2.error))
            .expect("nonempty");
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, kronrod_panel(&mut f, lo, mid)));
        intervals.push((mid, hi, kronrod_panel(&mut f, mid, hi)));
    }
    let total: f64 = intervals.iter().map(|(_, _, e)| e.error).sum();
    let mut value = V::zero();
    for (_, _, e) in &intervals {
        value = value.add(e.value);
    }
    let tol = abs_tol.max(rel_tol * value.norm());
    if total <= tol {
        Ok(QuadEstimate {
            value,
            error: total,
        })
    } else {
        Err(WdError::numerical("adaptive quadrature", total, tol))
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based starting guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                nodes[i] = -x;
                nodes[n - 1 - i] = x;
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                weights[i] = w;
                weights[n - 1 - i] = w;
                break;
            }
        }
    }
    (nodes, weights)
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
pub fn gauss_legendre_integrate<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    nodes: &[f64],
    weights: &[f64],
) -> V {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = V::zero();
    for (&x, &w) in nodes.iter().zip(weights) {
        acc = acc.add(f(center + half * x).scale(w));
    }
    acc.scale(half)
}

/// Neville extrapolation of samples `(h_i, y_i)` to `h = 0`.
///
/// Returns the extrapolated value and a convergence estimate taken from
/// the change introduced by the last sample.
pub fn richardson_zero(samples: &[(f64, f64)]) -> (f64, f64) {
    assert!(samples.len() >= 2);
    let n = samples.len();
    let hs: Vec<f64> = samples.iter().map(|&(h, _)| h).collect();
    let mut tableau: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    // tableau[i] holds the degree-`level` extrapolation through samples
    // i-level..=i after each sweep; tableau[n-2] at the end is the
    // extrapolation that ignores the finest sample.
    let mut without_last = tableau[n - 2];
    for level in 1..n {
        for i in (level..n).rev() {
            let num = hs[i - level] * tableau[i] - hs[i] * tableau[i - 1];
            tableau[i] = num / (hs[i - level] - hs[i]);
        }
        if level == n - 2 {
            without_last = tableau[n - 2];
        }
    }
    let extrapolated = tableau[n - 1];
    let err = (extrapolated - without_last)
        .abs()
        .max(f64::EPSILON * extrapolated.abs());
    (extrapolated, err)
}

/// Complex-valued Neville extrapolation to `h = 0`.
pub fn richardson_zero_complex(samples: &[(f64, Complex64)]) -> (Complex64, f64) {
    let re: Vec<(f64, f64)> = samples.iter().map(|&(h, y)| (h, y.re)).collect();
    let im: Vec<(f64, f64)> = samples.iter().map(|&(h, y)| (h, y.im)).collect();
    let (vr, er) = richardson_zero(&re);
    let (vi, ei) = richardson_zero(&im);
    (Complex64::new(vr, vi), er.hypot(ei))
}

/// Zeroth spherical Bessel function, sin(x)/x with a series near zero.
pub fn spherical_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}
