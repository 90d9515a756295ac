//! Run configuration: a single TOML file describing the field, the
//! detectors, the protocol, the analyses, and optional sweeps.
//!
//! All physical quantities are in natural units (hbar = c = 1).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplitudes::DetectorSpec;
use crate::error::{Result, WdError};
use crate::field::{FieldParams, QuadControls};

/// Filter selection: automatic tuning from the hub exchange amplitudes,
/// or explicit per-detector attenuations.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FilterConfig {
    #[default]
    Auto,
    Explicit {
        eta: Vec<f64>,
    },
}

/// Synthetic amplitude injection: hub-exchange entries get `hub_value`,
/// everything else `hub_value / kappa` (kappa = inf for exact zeros).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub hub_value: f64,
    pub kappa: f64,
    /// Detector labels; defaults to the labels of the `detectors` list.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

/// Svetlichny optimizer controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvetlichnyConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_seed() -> u64 {
    7
}
fn default_restarts() -> usize {
    64
}
fn default_iterations() -> usize {
    200
}

impl Default for SvetlichnyConfig {
    fn default() -> Self {
        SvetlichnyConfig {
            seed: default_seed(),
            restarts: default_restarts(),
            iterations: default_iterations(),
        }
    }
}

fn default_true() -> bool {
    true
}

/// Which analyses the `analyze` stage runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default = "default_true")]
    pub fidelity: bool,
    #[serde(default = "default_true")]
    pub negativity: bool,
    /// Genuine-multipartite certification (pure-state pathway).
    #[serde(default)]
    pub gme: bool,
    /// Present iff the Svetlichny optimization should run.
    #[serde(default)]
    pub svetlichny: Option<SvetlichnyConfig>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fidelity: true,
            negativity: true,
            gme: false,
            svetlichny: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Synthetic dominance kappa.
    Kappa,
    /// Multiplies every detector position (scales all separations L).
    SeparationScale,
    /// Sets the hub window's superoscillation stretch.
    HubStretch,
    /// Multiplies every detector gap.
    GapScale,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeometricRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Sweep grid: explicit values or a geometric range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub geometric: Option<GeometricRange>,
}

impl SweepGrid {
    /// Expands the grid to the ordered point list.
    pub fn points(&self) -> Result<Vec<f64>> {
        let values = match (&self.values, &self.geometric) {
            (Some(v), None) => v.clone(),
            (None, Some(g)) => {
                if g.points < 2 || !(g.start > 0.0) || !(g.stop > 0.0) || g.start == g.stop {
                    return Err(WdError::Config(format!(
                        "geometric range needs positive distinct endpoints and >= 2 points, \
                         got start={}, stop={}, points={}",
                        g.start, g.stop, g.points
                    )));
                }
                let ratio = (g.stop / g.start).powf(1.0 / (g.points as f64 - 1.0));
                (0..g.points)
                    .map(|i| g.start * ratio.powi(i as i32))
                    .collect()
            }
            (Some(_), Some(_)) => {
                return Err(WdError::Config(
                    "sweep gives both `values` and `geometric`; choose one".into(),
                ))
            }
            (None, None) => {
                return Err(WdError::Config(
                    "sweep needs `values` or `geometric`".into(),
                ))
            }
        };
        if values.is_empty() {
            return Err(WdError::Config("sweep grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WdError::Config("sweep grid contains non-finite values".into()));
        }
        Ok(values)
    }
}

/// Full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub quad: QuadControls,
    #[serde(default)]
    pub detectors: Vec<DetectorSpec>,
    /// Label of the exchange hub (the detector whose pairwise
    /// amplitudes the filter is tuned to).
    pub hub: String,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    /// Permits causally connected detector pairs (labels the run
    /// non-physical).
    #[serde(default)]
    pub waive_causality: bool,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| WdError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WdError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// Detector labels in party order (synthetic label override wins).
    pub fn labels(&self) -> Vec<String> {
        if let Some(synthetic) = &self.synthetic {
            if let Some(labels) = &synthetic.labels {
                return labels.clone();
            }
        }
        self.detectors.iter().map(|d| d.label.clone()).collect()
    }

    /// Collects every violated constraint; no computation happens past a
    /// failed validation.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        self.field.validate().or_collect(&mut violations);
        self.quad.validate().or_collect(&mut violations);
        for d in &self.detectors {
            d.validate().or_collect(&mut violations);
        }
        let labels = self.labels();
        if labels.is_empty() {
            violations.push("no detectors configured (give `detectors` or synthetic `labels`)".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                violations.push(format!("duplicate detector label '{l}'"));
            }
        }
        if !labels.iter().any(|l| l == &self.hub) {
            violations.push(format!("hub '{}' is not among the detector labels", self.hub));
        }
        if let FilterConfig::Explicit { eta } = &self.filter {
            if eta.len() != labels.len() {
                violations.push(format!(
                    "explicit filter lists {} etas for {} detectors",
                    eta.len(),
                    labels.len()
                ));
            }
            crate::wick::FilterSpec { eta: eta.clone() }
                .validate()
                .or_collect(&mut violations);
        }
        if let Some(s) = &self.synthetic {
            if !(s.hub_value > 0.0) || !s.hub_value.is_finite() {
                violations.push(format!("synthetic hub_value must be positive, got {}", s.hub_value));
            }
            if !(s.kappa > 0.0) {
                violations.push(format!("synthetic kappa must be positive, got {}", s.kappa));
            }
        } else {
            // Physical runs need full detector records and the causality
            // condition c*T < min L_ij unless waived.
            if self.detectors.is_empty() {
                violations.push("physical run needs a `detectors` list".into());
            }
            for (a, da) in self.detectors.iter().enumerate() {
                for db in self.detectors.iter().skip(a + 1) {
                    let sep = da.separation(db);
                    let duration = da.window.duration.max(db.window.duration);
                    if sep <= duration && !self.waive_causality {
                        violations.push(format!(
                            "detectors {} and {} are causally connected \
                             (separation {sep} <= duration {duration}); \
                             set waive_causality for a non-physical run",
                            da.label, db.label
                        ));
                    }
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            sweep.points().map(|_| ()).or_collect(&mut violations);
            match sweep.parameter {
                SweepParameter::Kappa if self.synthetic.is_none() => {
                    violations.push("kappa sweep requires a [synthetic] section".into());
                }
                SweepParameter::SeparationScale | SweepParameter::GapScale
                    if self.detectors.is_empty() =>
                {
                    violations.push("geometry sweep requires a `detectors` list".into());
                }
                SweepParameter::HubStretch => {
                    let hub_ok = self.detectors.iter().any(|d| {
                        d.label == self.hub
                            && matches!(
                                d.window.family,
                                crate::windows::WindowFamily::Superoscillatory { .. }
                            )
                    });
                    if !hub_ok {
                        violations.push(
                            "hub_stretch sweep requires a superoscillatory hub window".into(),
                        );
                    }
                }
                _ => {}
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(WdError::validation(violations))
        }
    }

    /// Hash of the canonical serialized form; embedded in every output
    /// file name so reruns with the same configuration collide.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..12].to_string()
    }
}

trait OrCollect {
    fn or_collect(self, violations: &mut Vec<String>);
}

impl<T> OrCollect for Result<T> {
    fn or_collect(self, violations: &mut Vec<String>) {
        match self {
            Ok(_) => {}
            Err(WdError::Validation { violations: mut v }) => violations.append(&mut v),
            Err(e) => violations.push(e.to_string()),
        }
    }
}
