//! Coupling window functions and their Fourier transforms.
//!
//! A window is a real, even, compactly supported profile on
//! `[-T/2, T/2]` that switches a detector on and off. Three families are
//! provided: a hard-truncated Gaussian, a raised-cosine bump, and a
//! superoscillatory family whose local oscillation rate near t = 0
//! exceeds its nominal band.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WdError};
use crate::quad;

/// Window family plus family-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WindowFamily {
    Gaussian { sigma: f64 },
    CosineBump,
    Superoscillatory { omega0: f64, stretch: f64, order: u32 },
}

/// A compactly supported, temporally symmetric coupling window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(flatten)]
    pub family: WindowFamily,
    /// Coupling scale epsilon_0, natural units.
    pub amplitude: f64,
    /// Total support length T; the window vanishes for |t| > T/2.
    pub duration: f64,
}

impl WindowSpec {
    pub fn gaussian(amplitude: f64, duration: f64, sigma: f64) -> Self {
        WindowSpec {
            family: WindowFamily::Gaussian { sigma },
            amplitude,
            duration,
        }
    }

    /// Gaussian with the default width T/6.
    pub fn gaussian_default(amplitude: f64, duration: f64) -> Self {
        Self::gaussian(amplitude, duration, duration / 6.0)
    }

    pub fn cosine_bump(amplitude: f64, duration: f64) -> Self {
        WindowSpec {
            family: WindowFamily::CosineBump,
            amplitude,
            duration,
        }
    }

    pub fn superoscillatory(
        amplitude: f64,
        duration: f64,
        omega0: f64,
        stretch: f64,
        order: u32,
    ) -> Self {
        WindowSpec {
            family: WindowFamily::Superoscillatory {
                omega0,
                stretch,
                order,
            },
            amplitude,
            duration,
        }
    }

    pub fn half_support(&self) -> f64 {
        0.5 * self.duration
    }
}

/// Collects every violated constraint instead of stopping at the first.
pub fn validate_window(w: &WindowSpec) -> Result<()> {
    let mut violations = Vec::new();
    if !(w.duration > 0.0) || !w.duration.is_finite() {
        violations.push(format!("duration must be positive and finite, got {}", w.duration));
    }
    if !w.amplitude.is_finite() {
        violations.push(format!("amplitude must be finite, got {}", w.amplitude));
    }
    match w.family {
        WindowFamily::Gaussian { sigma } => {
            if !(sigma > 0.0) || !sigma.is_finite() {
                violations.push(format!("gaussian sigma must be positive, got {sigma}"));
            }
        }
        WindowFamily::CosineBump => {}
        WindowFamily::Superoscillatory {
            omega0,
            stretch,
            order,
        } => {
            if !(omega0 > 0.0) || !omega0.is_finite() {
                violations.push(format!("base frequency omega0 must be positive, got {omega0}"));
            }
            if !(stretch >= 1.0) || !stretch.is_finite() {
                violations.push(format!("stretch must be >= 1, got {stretch}"));
            }
            if order < 1 {
                violations.push("order must be >= 1".to_string());
            }
        }
    }
    if violations.is_empty() {
        // Spot-check symmetry and support on a coarse grid; these hold by
        // construction but guard against future family additions.
        let half = w.half_support();
        for i in 0..16 {
            let t = half * (i as f64 + 0.5) / 16.0;
            let diff = (evaluate_window(w, t) - evaluate_window(w, -t)).abs();
            if diff > 0.0 {
                violations.push(format!("window is not even at t = {t}"));
                break;
            }
        }
        if evaluate_window(w, half * 1.001) != 0.0 {
            violations.push("window does not vanish outside its support".to_string());
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(WdError::validation(violations))
    }
}

/// Unit-peak raised cosine on the support, used both as the cosine_bump
/// family and as the envelope of the superoscillatory family.
fn bump(t: f64, duration: f64) -> f64 {
    let c = (std::f64::consts::PI * t / duration).cos();
    c * c
}

/// Evaluates the window at time `t`; exactly zero outside the support.
pub fn evaluate_window(w: &WindowSpec, t: f64) -> f64 {
    let t = if t == 0.0 { 0.0 } else { t };
    if t.abs() > w.half_support() {
        return 0.0;
    }
    // Evaluate on |t| so evenness holds bit-for-bit.
    let ta = t.abs();
    match w.family {
        WindowFamily::Gaussian { sigma } => {
            w.amplitude * (-ta * ta / (2.0 * sigma * sigma)).exp()
        }
        WindowFamily::CosineBump => w.amplitude * bump(ta, w.duration),
        WindowFamily::Superoscillatory {
            omega0,
            stretch,
            order,
        } => {
            let n = order as f64;
            let theta = omega0 * ta / n;
            let (s, c) = theta.sin_cos();
            // Re[(cos θ + i a sin θ)^n] in polar form.
            let r2 = c * c + stretch * stretch * s * s;
            let magnitude = r2.powf(0.5 * n);
            let phase = n * (stretch * s).atan2(c);
            w.amplitude * magnitude * phase.cos() * bump(ta, w.duration)
        }
    }
}

/// Controls for the window transform quadrature.
#[derive(Debug, Clone, Copy)]
pub struct TransformTol {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdiv: usize,
}

impl TransformTol {
    /// Spec default: absolute tolerance 1e-10 * eps0 * T.
    pub fn default_for(w: &WindowSpec) -> Self {
        TransformTol {
            abs_tol: 1e-10 * w.amplitude.abs().max(1e-30) * w.duration,
            rel_tol: 1e-12,
            max_subdiv: 4000,
        }
    }
}

/// Fourier transform of the window at angular frequency `nu`.
///
/// Computed as the full complex integral over the support; the imaginary
/// residual is asserted below tolerance and the real part returned. Even
/// in `nu` by the evenness of the window.
pub fn window_fourier_transform(w: &WindowSpec, nu: f64) -> Result<f64> {
    window_fourier_transform_with(w, nu, TransformTol::default_for(w))
}

pub fn window_fourier_transform_with(w: &WindowSpec, nu: f64, tol: TransformTol) -> Result<f64> {
    let half = w.half_support();
    let est = quad::adaptive(
        |t| {
            let phase = Complex64::new(0.0, nu * t).exp();
            phase * evaluate_window(w, t)
        },
        -half,
        half,
        tol.abs_tol,
        tol.rel_tol,
        tol.max_subdiv,
    )?;
    let imag_bound = tol.abs_tol.max(10.0 * est.error).max(1e-12 * est.value.norm());
    if est.value.im.abs() > imag_bound {
        return Err(WdError::numerical(
            format!("window transform imaginary residual at nu = {nu}"),
            est.value.im.abs(),
            imag_bound,
        ));
    }
    Ok(est.value.re)
}

/// Outcome of probing a window for superoscillatory behavior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperoscillationReport {
    /// Fastest local oscillation rate found, from adjacent zero crossings.
    pub max_local_rate: f64,
    /// Reference band the rate is compared against.
    pub band: f64,
    /// max_local_rate / band; > 1 certifies superoscillation w.r.t. band.
    pub ratio: f64,
    pub certified: bool,
    /// Number of sign changes seen on the scan grid.
    pub zero_crossings: usize,
}

/// Measures the fastest local oscillation of a superoscillatory window
/// against `band`, via zero-crossing spacings on a dense grid.
pub fn superoscillation_report(w: &WindowSpec, band: f64) -> Result<SuperoscillationReport> {
    let (omega0, stretch) = match w.family {
        WindowFamily::Superoscillatory {
            omega0, stretch, ..
        } => (omega0, stretch),
        _ => {
            return Err(WdError::Domain(
                "superoscillation_report requires the superoscillatory family".into(),
            ))
        }
    };
    if !(band > 0.0) {
        return Err(WdError::Domain(format!("band must be positive, got {band}")));
    }
    let half = w.half_support();
    // Resolve well below the expected fastest rate a*omega0.
    let step = std::f64::consts::PI / (stretch * omega0) / 64.0;
    let count = ((2.0 * half) / step).ceil() as usize + 1;
    let mut zeros = Vec::new();
    let mut prev_t = -half + 1e-12 * half;
    let mut prev_v = evaluate_window(w, prev_t);
    for i in 1..count {
        let t = -half + 2.0 * half * (i as f64) / ((count - 1) as f64);
        let v = evaluate_window(w, t.min(half));
        if prev_v == 0.0 {
            prev_v = v;
            prev_t = t;
            continue;
        }
        if v != 0.0 && (v > 0.0) != (prev_v > 0.0) {
            // Linear interpolation of the crossing position.
            let frac = prev_v / (prev_v - v);
            zeros.push(prev_t + frac * (t - prev_t));
        }
        prev_v = v;
        prev_t = t;
    }
    let mut max_rate = 0.0f64;
    for pair in zeros.windows(2) {
        let spacing = pair[1] - pair[0];
        if spacing > step {
            max_rate = max_rate.max(std::f64::consts::PI / spacing);
        }
    }
    let ratio = max_rate / band;
    Ok(SuperoscillationReport {
        max_local_rate: max_rate,
        band,
        ratio,
        certified: ratio > 1.0,
        zero_crossings: zeros.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample_windows() -> Vec<WindowSpec> {
        vec![
            WindowSpec::gaussian_default(1.0, 1.0),
            WindowSpec::gaussian(0.3, 2.0, 0.25),
            WindowSpec::cosine_bump(0.7, 1.5),
            WindowSpec::superoscillatory(1.0, 1.0, 10.0, 4.0, 10),
            WindowSpec::superoscillatory(0.2, 2.0, 6.0, 2.0, 12),
        ]
    }

    #[test]
    fn gaussian_peak_is_amplitude() {
        let w = WindowSpec::gaussian_default(1.0, 1.0);
        assert_relative_eq!(evaluate_window(&w, 0.0), 1.0);
    }

    #[test]
    fn vanishes_outside_support() {
        for w in sample_windows() {
            assert_eq!(evaluate_window(&w, 0.6 * w.duration), 0.0);
            assert_eq!(evaluate_window(&w, -0.6 * w.duration), 0.0);
        }
    }

    #[test]
    fn superoscillatory_is_even() {
        let w = WindowSpec::superoscillatory(1.0, 1.0, 8.0, 4.0, 10);
        for i in 1..50 {
            let t = 0.01 * i as f64;
            assert_eq!(evaluate_window(&w, t), evaluate_window(&w, -t));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(validate_window(&WindowSpec::gaussian(1.0, 1.0, -1.0)).is_err());
        assert!(validate_window(&WindowSpec::superoscillatory(1.0, 1.0, 5.0, 0.5, 4)).is_err());
        assert!(validate_window(&WindowSpec::gaussian(1.0, -2.0, 0.1)).is_err());
        assert!(validate_window(&WindowSpec::gaussian(0.01, 1.0, 1.0 / 6.0)).is_ok());
    }

    #[test]
    fn transform_is_even_and_bounded() {
        for w in sample_windows() {
            let a = window_fourier_transform(&w, 3.7).unwrap();
            let b = window_fourier_transform(&w, -3.7).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-9);
            let l1 = quad::adaptive(
                |t| evaluate_window(&w, t).abs(),
                -w.half_support(),
                w.half_support(),
                1e-12,
                1e-10,
                2000,
            )
            .unwrap()
            .value;
            assert!(a.abs() <= l1 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn zero_amplitude_transform_is_zero() {
        let w = WindowSpec::gaussian(0.0, 1.0, 1.0 / 6.0);
        assert_eq!(window_fourier_transform(&w, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn transform_at_zero_matches_direct_time_integral() {
        let w = WindowSpec::gaussian_default(1.0, 1.0);
        let ft = window_fourier_transform(&w, 0.0).unwrap();
        // Independent oracle: fixed-order Gauss-Legendre on the half support.
        let (nodes, weights) = quad::gauss_legendre(80);
        let direct =
            2.0 * quad::gauss_legendre_integrate(
                |t| evaluate_window(&w, t),
                0.0,
                w.half_support(),
                &nodes,
                &weights,
            );
        assert_relative_eq!(ft, direct, max_relative = 1e-10);
    }

    #[test]
    fn transform_scaling_is_linear() {
        let base = WindowSpec::cosine_bump(1.0, 1.3);
        let scaled = WindowSpec::cosine_bump(3.5, 1.3);
        let a = window_fourier_transform(&base, 4.0).unwrap();
        let b = window_fourier_transform(&scaled, 4.0).unwrap();
        assert_relative_eq!(b, 3.5 * a, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_superoscillation_ratio_near_one() {
        let w = WindowSpec::superoscillatory(1.0, 1.0, 10.0, 1.0, 10);
        let report = superoscillation_report(&w, 10.0).unwrap();
        assert!((report.ratio - 1.0).abs() < 0.05, "ratio = {}", report.ratio);
    }

    #[test]
    fn stretched_superoscillation_exceeds_band() {
        let w = WindowSpec::superoscillatory(1.0, 1.0, 10.0, 4.0, 20);
        let report = superoscillation_report(&w, 10.0).unwrap();
        assert!(report.ratio > 1.0, "ratio = {}", report.ratio);
        assert!(report.certified);
        // Aharonov-Berry local frequency near t = 0 is a * omega0.
        assert!((report.max_local_rate - 40.0).abs() / 40.0 < 0.1);
    }

    #[test]
    fn huge_band_dominates() {
        let w = WindowSpec::superoscillatory(1.0, 1.0, 10.0, 2.0, 10);
        let report = superoscillation_report(&w, 10.0 * 2.0 * 10.0).unwrap();
        assert!(report.ratio < 1.0);
    }

    #[test]
    fn report_rejects_other_families() {
        let w = WindowSpec::gaussian_default(1.0, 1.0);
        assert!(matches!(
            superoscillation_report(&w, 1.0),
            Err(WdError::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn window_evenness_and_support(idx in 0usize..5, t in -3.0f64..3.0) {
            let w = &sample_windows()[idx];
            prop_assert_eq!(evaluate_window(w, t), evaluate_window(w, -t));
            if t.abs() > w.half_support() {
                prop_assert_eq!(evaluate_window(w, t), 0.0);
            }
        }
    }
}
