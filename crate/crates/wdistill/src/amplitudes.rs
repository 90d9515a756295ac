//! Two-point vacuum amplitudes d_{ij}^{ab} = <0| Phi_i^a Phi_j^b |0> and
//! the per-detector self-energy correction.
//!
//! The production path works in the frequency domain: the distributional
//! double time integral becomes a single k-integral damped by the window
//! transforms. The time-domain double integrals against the closed-form
//! kernel survive only as independent oracles.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WdError};
use crate::field::{self, FieldParams, QuadControls, SpacetimeInterval};
use crate::quad::{self, spherical_j0};
use crate::windows::{self, TransformTol, WindowSpec};

/// Raising/lowering label on a smeared detector operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            '-' => Ok(Sign::Minus),
            '+' => Ok(Sign::Plus),
            other => Err(WdError::Config(format!("unknown sign symbol '{other}'"))),
        }
    }
}

/// One point-like two-level detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub label: String,
    pub position: [f64; 3],
    /// Energy gap Omega, natural units.
    pub gap: f64,
    pub window: WindowSpec,
}

impl DetectorSpec {
    pub fn separation(&self, other: &DetectorSpec) -> f64 {
        let d = [
            self.position[0] - other.position[0],
            self.position[1] - other.position[1],
            self.position[2] - other.position[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.label.is_empty() {
            violations.push("detector label must be nonempty".to_string());
        }
        if !(self.gap > 0.0) || !self.gap.is_finite() {
            violations.push(format!("gap must be positive, got {}", self.gap));
        }
        if let Err(WdError::Validation { violations: mut w }) = windows::validate_window(&self.window)
        {
            violations.append(&mut w);
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(WdError::validation(violations))
        }
    }
}

/// Ordered index of a two-point amplitude: (i, alpha) then (j, beta).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AmplitudeIndex {
    pub first_label: String,
    pub first_sign: Sign,
    pub second_label: String,
    pub second_sign: Sign,
}

impl AmplitudeIndex {
    pub fn new(i: &str, alpha: Sign, j: &str, beta: Sign) -> Self {
        AmplitudeIndex {
            first_label: i.to_string(),
            first_sign: alpha,
            second_label: j.to_string(),
            second_sign: beta,
        }
    }

    pub fn swapped(&self) -> Self {
        AmplitudeIndex {
            first_label: self.second_label.clone(),
            first_sign: self.second_sign,
            second_label: self.first_label.clone(),
            second_sign: self.first_sign,
        }
    }
}

impl std::fmt::Display for AmplitudeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "d[{}{},{}{}]",
            self.first_label,
            self.first_sign.symbol(),
            self.second_label,
            self.second_sign.symbol()
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AmplitudeEntry {
    pub value: f64,
    pub error: f64,
}

/// Regime bookkeeping attached to a built table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// min L_ij exceeds c * max(T_i, T_j) for every pair.
    pub causally_disconnected: bool,
    /// max |d_{i != j}^{-+}| is small against the smallest emission.
    pub overlap_negligible: bool,
    /// max cross overlap over min emission, recorded alongside the flag.
    pub overlap_ratio: f64,
}

/// All two-point amplitudes needed by Wick assembly, plus self-energies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "AmplitudeTableFile", try_from = "AmplitudeTableFile")]
pub struct AmplitudeTable {
    pub labels: Vec<String>,
    pub entries: BTreeMap<AmplitudeIndex, AmplitudeEntry>,
    /// 2 Re <Theta_i> per detector, equal to d_ii^{-+} by unitarity.
    pub self_energy: BTreeMap<String, f64>,
    pub flags: RegimeFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AmplitudeTableFile {
    labels: Vec<String>,
    entries: Vec<(AmplitudeIndex, AmplitudeEntry)>,
    self_energy: Vec<(String, f64)>,
    flags: RegimeFlags,
}

impl From<AmplitudeTable> for AmplitudeTableFile {
    fn from(t: AmplitudeTable) -> Self {
        AmplitudeTableFile {
            labels: t.labels,
            entries: t.entries.into_iter().collect(),
            self_energy: t.self_energy.into_iter().collect(),
            flags: t.flags,
        }
    }
}

impl TryFrom<AmplitudeTableFile> for AmplitudeTable {
    type Error = WdError;
    fn try_from(f: AmplitudeTableFile) -> Result<Self> {
        Ok(AmplitudeTable {
            labels: f.labels,
            entries: f.entries.into_iter().collect(),
            self_energy: f.self_energy.into_iter().collect(),
            flags: f.flags,
        })
    }
}

impl AmplitudeTable {
    pub fn get(&self, index: &AmplitudeIndex) -> Result<f64> {
        self.entries
            .get(index)
            .map(|e| e.value)
            .ok_or_else(|| WdError::MissingAmplitude {
                index: index.to_string(),
            })
    }

    /// Hub exchange values d_{i,hub}^{++} for every non-hub detector.
    pub fn hub_exchange_values(&self, hub: &str) -> Result<Vec<(String, f64)>> {
        let mut out = Vec::new();
        for label in &self.labels {
            if label == hub {
                continue;
            }
            let v = self.get(&AmplitudeIndex::new(label, Sign::Plus, hub, Sign::Plus))?;
            out.push((label.clone(), v));
        }
        Ok(out)
    }

    /// Largest |amplitude| outside the hub-exchange class (same-sign pairs
    /// joining a non-hub detector to the hub).
    ///
    /// Same-label same-sign entries are skipped: each detector operator
    /// appears at most once per side of a density-matrix entry, so those
    /// families can never be contracted and do not compete with the hub
    /// exchange. They stay in the table for audit completeness only.
    pub fn max_non_hub_amplitude(&self, hub: &str) -> f64 {
        let mut max = 0.0f64;
        for (idx, entry) in &self.entries {
            let is_hub_exchange = idx.first_sign == idx.second_sign
                && idx.first_label != idx.second_label
                && (idx.first_label == hub || idx.second_label == hub);
            let is_uncontractable =
                idx.first_label == idx.second_label && idx.first_sign == idx.second_sign;
            if !is_hub_exchange && !is_uncontractable {
                max = max.max(entry.value.abs());
            }
        }
        max
    }

    /// min |hub exchange| / max |everything else|.
    pub fn dominance_ratio(&self, hub: &str) -> Result<f64> {
        let hub_vals = self.hub_exchange_values(hub)?;
        let min_hub = hub_vals
            .iter()
            .map(|(_, v)| v.abs())
            .fold(f64::INFINITY, f64::min);
        let max_other = self.max_non_hub_amplitude(hub);
        if max_other == 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(min_hub / max_other)
        }
    }

    /// Flat audit format: one line per entry,
    /// `i alpha j beta value error`.
    pub fn to_flat_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# i alpha j beta value error\n");
        for (idx, entry) in &self.entries {
            out.push_str(&format!(
                "{} {} {} {} {:.17e} {:.3e}\n",
                idx.first_label,
                idx.first_sign.symbol(),
                idx.second_label,
                idx.second_sign.symbol(),
                entry.value,
                entry.error
            ));
        }
        out
    }

    pub fn from_flat_text(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut labels = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 {
                return Err(WdError::Config(format!(
                    "amplitude table line has {} fields, expected 6: {line}",
                    parts.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| WdError::Config(format!("bad float '{s}': {e}")))
            };
            let alpha = Sign::from_symbol(parts[1].chars().next().unwrap())?;
            let beta = Sign::from_symbol(parts[3].chars().next().unwrap())?;
            let idx = AmplitudeIndex::new(parts[0], alpha, parts[2], beta);
            for label in [parts[0], parts[2]] {
                if !labels.iter().any(|l: &String| l == label) {
                    labels.push(label.to_string());
                }
            }
            entries.insert(
                idx,
                AmplitudeEntry {
                    value: parse(parts[4])?,
                    error: parse(parts[5])?,
                },
            );
        }
        let mut self_energy = BTreeMap::new();
        for label in &labels {
            if let Some(e) = entries.get(&AmplitudeIndex::new(label, Sign::Minus, label, Sign::Plus))
            {
                self_energy.insert(label.clone(), e.value);
            }
        }
        Ok(AmplitudeTable {
            labels,
            entries,
            self_energy,
            flags: RegimeFlags {
                causally_disconnected: true,
                overlap_negligible: true,
                overlap_ratio: 0.0,
            },
        })
    }

    /// Synthetic table: hub exchange amplitudes (same-sign, hub-involving
    /// pairs) set to `hub_value`, everything else to `hub_value / kappa`.
    /// `kappa = inf` leaves only the hub exchange class nonzero.
    pub fn synthetic_hub_dominant(
        labels: &[&str],
        hub: &str,
        hub_value: f64,
        kappa: f64,
    ) -> Self {
        let background = if kappa.is_finite() {
            hub_value / kappa
        } else {
            0.0
        };
        let mut entries = BTreeMap::new();
        for i in labels {
            for j in labels {
                for (alpha, beta) in [
                    (Sign::Minus, Sign::Minus),
                    (Sign::Minus, Sign::Plus),
                    (Sign::Plus, Sign::Plus),
                ] {
                    let hub_exchange = alpha == beta && i != j && (*i == hub || *j == hub);
                    let value = if hub_exchange { hub_value } else { background };
                    entries.insert(
                        AmplitudeIndex::new(i, alpha, j, beta),
                        AmplitudeEntry { value, error: 0.0 },
                    );
                }
            }
        }
        let self_energy = labels
            .iter()
            .map(|l| (l.to_string(), background))
            .collect();
        AmplitudeTable {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            entries,
            self_energy,
            flags: RegimeFlags {
                causally_disconnected: true,
                overlap_negligible: true,
                overlap_ratio: 0.0,
            },
        }
    }
}

/// Cubic-interpolated cache of a window Fourier transform on a uniform
/// frequency grid. Evenness in nu is used to fold negative arguments.
pub struct WindowTransform {
    step: f64,
    values: Vec<f64>,
    pub nu_max: f64,
    pub peak: f64,
    /// Largest frequency with |transform| above the tail threshold.
    pub cutoff: f64,
    pub tail_bound: f64,
}

const TAIL_THRESHOLD: f64 = 3e-13;

impl WindowTransform {
    /// Samples the transform on [0, nu_max] densely enough for uniform
    /// 1e-12-of-peak interpolation accuracy.
    pub fn build(w: &WindowSpec, nu_max: f64) -> Result<Self> {
        windows::validate_window(w)?;
        // Grid step: interpolation error ~ (step * T/2)^4 / 77 of peak.
        let step = 0.018 / w.duration;
        let count = (nu_max / step).ceil() as usize + 4;
        let tol = TransformTol {
            abs_tol: 1e-13 * w.amplitude.abs().max(1e-30) * w.duration,
            rel_tol: 1e-11,
            max_subdiv: 6000,
        };
        let mut values = Vec::with_capacity(count);
        for i in 0..count {
            values.push(windows::window_fourier_transform_with(
                w,
                i as f64 * step,
                tol,
            )?);
        }
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = TAIL_THRESHOLD * peak;
        let mut cutoff_idx = count - 1;
        while cutoff_idx > 0 && values[cutoff_idx].abs() < threshold {
            cutoff_idx -= 1;
        }
        Ok(WindowTransform {
            step,
            nu_max: (count - 1) as f64 * step,
            values,
            peak,
            cutoff: cutoff_idx as f64 * step,
            tail_bound: threshold,
        })
    }

    /// Interpolated transform value; zero beyond the sampled range.
    pub fn eval(&self, nu: f64) -> f64 {
        let x = nu.abs() / self.step;
        let n = self.values.len();
        if x >= (n - 1) as f64 {
            return 0.0;
        }
        // 4-point Lagrange cubic on the uniform grid.
        let i = (x.floor() as usize).clamp(1, n - 3);
        let t = x - i as f64; // in [-?, 2); local coordinate about node i
        let (ym, y0, y1, y2) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        ym * c0 + y0 * c1 + y1 * c2 + y2 * c3
    }
}

fn pair_k_max(
    i: &DetectorSpec,
    alpha: Sign,
    ti: &WindowTransform,
    j: &DetectorSpec,
    beta: Sign,
    tj: &WindowTransform,
) -> f64 {
    // Each transform factor dies once its argument passes the cutoff;
    // the integrand dies with the first factor.
    let death_i = alpha.factor() * i.gap + ti.cutoff;
    let death_j = -beta.factor() * j.gap + tj.cutoff;
    death_i.min(death_j)
}

fn spectral_amplitude(
    i: &DetectorSpec,
    alpha: Sign,
    ti: &WindowTransform,
    j: &DetectorSpec,
    beta: Sign,
    tj: &WindowTransform,
    separation: f64,
    p: &FieldParams,
    quad: &QuadControls,
) -> Result<AmplitudeEntry> {
    let k_max = pair_k_max(i, alpha, ti, j, beta, tj);
    let tail = ti.tail_bound * tj.peak.max(tj.tail_bound) * k_max.max(1.0).powi(2)
        / (2.0 * field::FOUR_PI_SQ);
    if k_max <= 0.0 {
        // Both factors never overlap above threshold; the amplitude is
        // bounded by the tail estimate.
        return Ok(AmplitudeEntry {
            value: 0.0,
            error: tail,
        });
    }
    // Roundoff floor: heavy cancellation under j0 can push the result far
    // below the integrand scale; accept absolute errors at that floor.
    let l1_bound = ti.peak * tj.peak * k_max * k_max / (2.0 * field::FOUR_PI_SQ);
    let abs_floor = 5e-16 * l1_bound;
    // Seed at the fastest oscillation scale of the integrand: the j0
    // factor (period 2pi/L) or the window transform side lobes
    // (period ~4pi/T), a couple of periods per panel.
    let osc = separation
        .max(0.5 * i.window.duration)
        .max(0.5 * j.window.duration);
    let seeds = ((k_max * osc / 12.0).ceil() as usize).clamp(1, 4000);
    let est = quad::adaptive_seeded(
        |k: f64| {
            let omega = (k * k + p.mass * p.mass).sqrt();
            field::spectral_weight(k, p)
                * spherical_j0(k * separation)
                * ti.eval(alpha.factor() * i.gap - omega)
                * tj.eval(beta.factor() * j.gap + omega)
        },
        0.0,
        k_max,
        seeds,
        abs_floor,
        quad.rel_tol,
        quad.max_subdiv,
    )?;
    Ok(AmplitudeEntry {
        value: est.value,
        error: est.error + tail,
    })
}

/// Dimensionless sampling reach of the window transforms: every
/// transform is tabulated out to gap + 2*max_gap + K_REACH/min_duration.
/// C^1 windows decay like nu^-3, so the truncated spectral remainder
/// scales like (K_REACH/duration)^-4; 160 keeps it below 1e-6 relative
/// even for the smallest retained amplitude families.
const K_REACH: f64 = 160.0;

/// Frequency-domain two-point amplitude
/// `int_0^inf dk w(k) j0(k L_ij) eps_i(alpha Omega_i - omega) eps_j(beta Omega_j + omega)`.
pub fn exchange_amplitude(
    i: &DetectorSpec,
    alpha: Sign,
    j: &DetectorSpec,
    beta: Sign,
    p: &FieldParams,
    quad: &QuadControls,
) -> Result<f64> {
    i.validate()?;
    j.validate()?;
    quad.validate()?;
    let k_reach = i.gap.max(j.gap) * 2.0 + K_REACH / i.window.duration.min(j.window.duration);
    let ti = WindowTransform::build(&i.window, i.gap + k_reach)?;
    let tj = WindowTransform::build(&j.window, j.gap + k_reach)?;
    let entry = spectral_amplitude(i, alpha, &ti, j, beta, &tj, i.separation(j), p, quad)?;
    Ok(entry.value)
}

/// Independent time-domain oracle: double time integral of the windows
/// against the closed-form massless kernel, Richardson-extrapolated in
/// the i-epsilon regulator. Requires spatially separated detectors.
pub fn amplitude_time_domain_oracle(
    i: &DetectorSpec,
    alpha: Sign,
    j: &DetectorSpec,
    beta: Sign,
    regulator_scales: &[f64],
) -> Result<f64> {
    i.validate()?;
    j.validate()?;
    let separation = i.separation(j);
    if separation <= 0.0 {
        return Err(WdError::Domain(
            "time-domain oracle needs spatially separated detectors; use the \
             self-energy oracle for coincident points"
                .into(),
        ));
    }
    if regulator_scales.len() < 2 {
        return Err(WdError::Domain(
            "need at least two regulator scales for extrapolation".into(),
        ));
    }
    let half_i = i.window.half_support();
    let half_j = j.window.half_support();
    let n_i = 48 + (0.8 * i.gap * i.window.duration).ceil() as usize;
    let n_j = 48 + (0.8 * j.gap * j.window.duration).ceil() as usize;
    let (xi, wi) = quad::gauss_legendre(n_i);
    let (xj, wj) = quad::gauss_legendre(n_j);
    let mut samples = Vec::with_capacity(regulator_scales.len());
    for &eps in regulator_scales {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x1, &w1) in xi.iter().zip(&wi) {
            let t = half_i * x1;
            let ei = windows::evaluate_window(&i.window, t)
                * Complex64::new(0.0, alpha.factor() * i.gap * t).exp();
            let mut inner = Complex64::new(0.0, 0.0);
            for (&x2, &w2) in xj.iter().zip(&wj) {
                let tp = half_j * x2;
                let ej = windows::evaluate_window(&j.window, tp)
                    * Complex64::new(0.0, beta.factor() * j.gap * tp).exp();
                let kernel = field::wightman_massless_closed(
                    SpacetimeInterval::new(t - tp, separation),
                    eps,
                );
                inner += ej * kernel * w2;
            }
            acc += ei * inner * (w1 * half_i * half_j);
        }
        samples.push((eps, acc));
    }
    let (value, err) = quad::richardson_zero_complex(&samples);
    let scale = value.norm().max(1e-300);
    if value.im.abs() > 1e-5 * scale + 10.0 * err {
        return Err(WdError::numerical(
            "time-domain oracle imaginary residual",
            value.im.abs(),
            1e-5 * scale,
        ));
    }
    Ok(value.re)
}

/// 2 Re <Theta_i> via the unitarity identity: equals d_ii^{-+}.
pub fn self_energy_real(i: &DetectorSpec, p: &FieldParams, quad: &QuadControls) -> Result<f64> {
    exchange_amplitude(i, Sign::Minus, i, Sign::Plus, p, quad)
}

/// Independent oracle for 2 Re <Theta_i>: the time-ordered double
/// integral reduced to a single integral over the time difference,
/// evaluated against the regulated closed-form kernel and extrapolated
/// to zero regulator.
pub fn self_energy_time_ordered_oracle(
    i: &DetectorSpec,
    regulator_scales: &[f64],
) -> Result<f64> {
    i.validate()?;
    if regulator_scales.len() < 2 {
        return Err(WdError::Domain(
            "need at least two regulator scales for extrapolation".into(),
        ));
    }
    let duration = i.window.duration;
    let half = i.window.half_support();
    let (nodes, weights) = quad::gauss_legendre(64 + (0.8 * i.gap * duration).ceil() as usize);
    // Window autocorrelation over the overlap interval.
    let autocorr = |delta: f64| -> f64 {
        let lo = -half + delta;
        if lo >= half {
            return 0.0;
        }
        quad::gauss_legendre_integrate(
            |t| {
                windows::evaluate_window(&i.window, t) * windows::evaluate_window(&i.window, t - delta)
            },
            lo,
            half,
            &nodes,
            &weights,
        )
    };
    let gap = i.gap;
    let mut samples = Vec::with_capacity(regulator_scales.len());
    for &eps in regulator_scales {
        let integrand = |delta: f64| -> Complex64 {
            let kernel =
                field::wightman_massless_closed(SpacetimeInterval::new(delta, 0.0), eps);
            autocorr(delta) * Complex64::new(0.0, -gap * delta).exp() * kernel
        };
        // The kernel has a width-eps spike at delta = 0; integrate it on
        // its own subinterval.
        let split = (8.0 * eps).min(0.5 * duration);
        let head = quad::adaptive(integrand, 0.0, split, 1e-14, 1e-10, 20_000)?;
        let tail = quad::adaptive(integrand, split, duration, 1e-14, 1e-10, 20_000)?;
        samples.push((eps, 2.0 * (head.value + tail.value).re));
    }
    let (value, _err) = quad::richardson_zero(&samples);
    Ok(value)
}

/// Builds the complete amplitude table for a detector set.
///
/// Computes every ordered index with sign pattern in {--, -+, ++} (the
/// patterns Wick assembly can request), the self-energies, and the
/// regime flags. Rejects causally connected pairs unless waived.
pub fn build_amplitude_table(
    detectors: &[DetectorSpec],
    p: &FieldParams,
    quad: &QuadControls,
    waive_causality: bool,
) -> Result<AmplitudeTable> {
    if detectors.is_empty() {
        return Err(WdError::validation(vec!["no detectors given".into()]));
    }
    let mut seen = std::collections::BTreeSet::new();
    for d in detectors {
        d.validate()?;
        if !seen.insert(d.label.clone()) {
            return Err(WdError::validation(vec![format!(
                "duplicate detector label '{}'",
                d.label
            )]));
        }
    }
    quad.validate()?;
    p.validate()?;
    let mut min_separation = f64::INFINITY;
    let max_duration = detectors
        .iter()
        .map(|d| d.window.duration)
        .fold(0.0f64, f64::max);
    for (a, da) in detectors.iter().enumerate() {
        for db in detectors.iter().skip(a + 1) {
            let sep = da.separation(db);
            min_separation = min_separation.min(sep);
            let pair_duration = da.window.duration.max(db.window.duration);
            if sep <= pair_duration && !waive_causality {
                return Err(WdError::Causality {
                    a: da.label.clone(),
                    b: db.label.clone(),
                    separation: sep,
                    duration: pair_duration,
                });
            }
        }
    }

    let k_reach = detectors.iter().map(|d| d.gap).fold(0.0f64, f64::max) * 2.0
        + K_REACH
            / detectors
                .iter()
                .map(|d| d.window.duration)
                .fold(f64::INFINITY, f64::min);
    let transforms: Vec<WindowTransform> = detectors
        .iter()
        .map(|d| WindowTransform::build(&d.window, d.gap + k_reach))
        .collect::<Result<_>>()?;

    let mut entries = BTreeMap::new();
    for (a, da) in detectors.iter().enumerate() {
        for (b, db) in detectors.iter().enumerate() {
            let separation = da.separation(db);
            for (alpha, beta) in [
                (Sign::Minus, Sign::Minus),
                (Sign::Minus, Sign::Plus),
                (Sign::Plus, Sign::Plus),
            ] {
                let entry = spectral_amplitude(
                    da,
                    alpha,
                    &transforms[a],
                    db,
                    beta,
                    &transforms[b],
                    separation,
                    p,
                    quad,
                )?;
                entries.insert(
                    AmplitudeIndex::new(&da.label, alpha, &db.label, beta),
                    entry,
                );
            }
        }
    }

    let mut self_energy = BTreeMap::new();
    let mut min_emission = f64::INFINITY;
    for d in detectors {
        let idx = AmplitudeIndex::new(&d.label, Sign::Minus, &d.label, Sign::Plus);
        let emission = entries[&idx].value;
        min_emission = min_emission.min(emission.abs());
        self_energy.insert(d.label.clone(), emission);
    }
    let mut max_overlap = 0.0f64;
    for (idx, entry) in &entries {
        if idx.first_sign == Sign::Minus
            && idx.second_sign == Sign::Plus
            && idx.first_label != idx.second_label
        {
            max_overlap = max_overlap.max(entry.value.abs());
        }
    }
    let overlap_ratio = if min_emission > 0.0 {
        max_overlap / min_emission
    } else {
        f64::INFINITY
    };
    let flags = RegimeFlags {
        causally_disconnected: detectors.len() < 2 || min_separation > max_duration,
        overlap_negligible: overlap_ratio < 1e-2,
        overlap_ratio,
    };

    Ok(AmplitudeTable {
        labels: detectors.iter().map(|d| d.label.clone()).collect(),
        entries,
        self_energy,
        flags,
    })
}
