//! End-to-end orchestration: amplitude computation, assembly,
//! distillation, analysis, sweeps, and deterministic file emission.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amplitudes::{build_amplitude_table, AmplitudeTable};
use crate::config::{FilterConfig, RunConfig, SweepGrid, SweepParameter};
use crate::error::{Result, WdError};
use crate::qinfo;
use crate::wick::{
    apply_filter, assemble_rho, distillation_protocol, normalize, DistillationDiagnostics,
    FilterSpec, ReducedDensityMatrix,
};
use crate::windows::WindowFamily;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn stage(name: &str, e: WdError) -> WdError {
    match e {
        WdError::Validation { .. } | WdError::Config(_) | WdError::Causality { .. } => e,
        other => WdError::Domain(format!("stage {name}: {other}")),
    }
}

/// Negativity of one bipartition of the distilled matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NegativityRecord {
    pub subset: Vec<usize>,
    pub value: f64,
}

/// Structured analysis outcome; failed analyses land in `errors` without
/// discarding the rest of the record.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AnalysisRecord {
    pub fidelity_to_target: Option<f64>,
    /// Fidelity of the locally rotated state to the N-partite W state.
    pub fidelity_to_w: Option<f64>,
    pub negativities: Option<Vec<NegativityRecord>>,
    pub gme: Option<qinfo::GenuineMultipartiteReport>,
    pub svetlichny: Option<qinfo::SvetlichnyOptimum>,
    pub errors: Vec<String>,
}

/// Everything a single pipeline run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactBundle {
    pub config_hash: String,
    pub tool_version: String,
    pub labels: Vec<String>,
    pub hub: String,
    pub table: AmplitudeTable,
    pub assembled: ReducedDensityMatrix,
    pub distilled: ReducedDensityMatrix,
    pub diagnostics: DistillationDiagnostics,
    pub analysis: AnalysisRecord,
}

/// Builds the amplitude table for a configuration (synthetic injection
/// or physical quadrature).
pub fn build_table(c: &RunConfig) -> Result<AmplitudeTable> {
    if let Some(s) = &c.synthetic {
        let labels = c.labels();
        let refs: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
        Ok(AmplitudeTable::synthetic_hub_dominant(
            &refs,
            &c.hub,
            s.hub_value,
            s.kappa,
        ))
    } else {
        build_amplitude_table(&c.detectors, &c.field, &c.quad, c.waive_causality)
            .map_err(|e| stage("amplitudes", e))
    }
}

/// Distills per the configured filter mode, returning the normalized
/// matrix and diagnostics.
pub fn distill(c: &RunConfig, table: &AmplitudeTable) -> Result<(ReducedDensityMatrix, DistillationDiagnostics)> {
    match &c.filter {
        FilterConfig::Auto => {
            distillation_protocol(table, &c.hub).map_err(|e| stage("distill", e))
        }
        FilterConfig::Explicit { eta } => {
            let rho = assemble_rho(table).map_err(|e| stage("assemble", e))?;
            let filtered = apply_filter(&rho, &FilterSpec { eta: eta.clone() })
                .map_err(|e| stage("filter", e))?;
            let normalized = normalize(&filtered).map_err(|e| stage("normalize", e))?;
            let hub_index = table
                .labels
                .iter()
                .position(|l| l == &c.hub)
                .ok_or_else(|| WdError::Domain(format!("hub '{}' missing", c.hub)))?;
            let hub_values = table.hub_exchange_values(&c.hub)?;
            let magnitudes: Vec<f64> = hub_values.iter().map(|(_, v)| v.abs()).collect();
            let spread = magnitudes.iter().fold(0.0f64, |m, &v| m.max(v))
                / magnitudes.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            let dominance_ratio = table.dominance_ratio(&c.hub)?;
            let target = qinfo::target_distilled_state(table.labels.len(), hub_index)?;
            let fidelity = qinfo::fidelity(&normalized.matrix, &target)?;
            let purity = (&normalized.matrix * &normalized.matrix).trace().re;
            let log_mean =
                eta.iter().map(|e| e.ln()).sum::<f64>() / eta.len() as f64;
            let diagnostics = DistillationDiagnostics {
                hub: c.hub.clone(),
                eta: log_mean.exp(),
                hub_amplitude_spread: spread,
                dominance_ratio,
                outside_asymptotic_regime: dominance_ratio <= 1.0,
                fidelity_to_target: fidelity,
                purity,
            };
            Ok((normalized, diagnostics))
        }
    }
}

/// Runs the configured analyses on the distilled matrix.
pub fn analyze(
    c: &RunConfig,
    distilled: &ReducedDensityMatrix,
    diagnostics: &DistillationDiagnostics,
    seed_override: Option<u64>,
) -> AnalysisRecord {
    let mut record = AnalysisRecord::default();
    let n = distilled.n_parties;
    let hub_index = distilled
        .labels
        .iter()
        .position(|l| l == &c.hub)
        .unwrap_or(n - 1);

    if c.analysis.fidelity {
        record.fidelity_to_target = Some(diagnostics.fidelity_to_target);
        match qinfo::pure_state_from_matrix(&distilled.matrix, n)
            .and_then(|s| qinfo::local_rotation_to_w(&s, hub_index))
            .and_then(|rotated| {
                let w = qinfo::w_state(n)?;
                qinfo::fidelity(&rotated.density_matrix(), &w)
            }) {
            Ok(f) => record.fidelity_to_w = Some(f),
            Err(e) => record.errors.push(format!("fidelity_to_w: {e}")),
        }
    }

    if c.analysis.negativity {
        let mut rows = Vec::new();
        for b in qinfo::all_bipartitions(n) {
            match qinfo::negativity(&distilled.matrix, &b) {
                Ok(v) => rows.push(NegativityRecord {
                    subset: b.subset.clone(),
                    value: v,
                }),
                Err(e) => record
                    .errors
                    .push(format!("negativity {:?}: {e}", b.subset)),
            }
        }
        record.negativities = Some(rows);
    }

    if c.analysis.gme {
        match qinfo::pure_state_from_matrix(&distilled.matrix, n)
            .and_then(|s| qinfo::genuine_multipartite_check(&s))
        {
            Ok(report) => record.gme = Some(report),
            Err(e) => record.errors.push(format!("gme: {e}")),
        }
    }

    if let Some(sv) = &c.analysis.svetlichny {
        let seed = seed_override.unwrap_or(sv.seed);
        match qinfo::optimize_svetlichny(&distilled.matrix, n, seed, sv.restarts, sv.iterations) {
            Ok(opt) => record.svetlichny = Some(opt),
            Err(e) => record.errors.push(format!("svetlichny: {e}")),
        }
    }

    record
}

/// Full pipeline: validate, build amplitudes, assemble, distill,
/// analyze. Validation failures abort before any computation.
pub fn run_pipeline(c: &RunConfig, seed_override: Option<u64>) -> Result<ArtifactBundle> {
    c.validate()?;
    let table = build_table(c)?;
    let assembled = assemble_rho(&table).map_err(|e| stage("assemble", e))?;
    let (distilled, diagnostics) = distill(c, &table)?;
    let analysis = analyze(c, &distilled, &diagnostics, seed_override);
    Ok(ArtifactBundle {
        config_hash: c.hash(),
        tool_version: TOOL_VERSION.to_string(),
        labels: table.labels.clone(),
        hub: c.hub.clone(),
        table,
        assembled,
        distilled,
        diagnostics,
        analysis,
    })
}

/// One sweep row. Failures stay in-row; other rows are unaffected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub parameter_value: f64,
    pub seed: u64,
    pub min_separation: Option<f64>,
    pub dominance_ratio: Option<f64>,
    pub eta: Option<f64>,
    pub fidelity_to_target: Option<f64>,
    pub min_negativity: Option<f64>,
    pub svetlichny_value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub config_hash: String,
    pub tool_version: String,
    pub rows: Vec<SweepRow>,
}

/// Applies one grid point to a copy of the configuration.
fn apply_point(c: &RunConfig, parameter: SweepParameter, value: f64) -> Result<RunConfig> {
    let mut point = c.clone();
    point.sweep = None;
    match parameter {
        SweepParameter::Kappa => {
            let s = point
                .synthetic
                .as_mut()
                .ok_or_else(|| WdError::Config("kappa sweep without [synthetic]".into()))?;
            s.kappa = value;
        }
        SweepParameter::SeparationScale => {
            for d in &mut point.detectors {
                for x in &mut d.position {
                    *x *= value;
                }
            }
        }
        SweepParameter::GapScale => {
            for d in &mut point.detectors {
                d.gap *= value;
            }
        }
        SweepParameter::HubStretch => {
            let hub = point.hub.clone();
            let d = point
                .detectors
                .iter_mut()
                .find(|d| d.label == hub)
                .ok_or_else(|| WdError::Config("hub detector missing".into()))?;
            match &mut d.window.family {
                WindowFamily::Superoscillatory { stretch, .. } => *stretch = value,
                _ => {
                    return Err(WdError::Config(
                        "hub_stretch sweep needs a superoscillatory hub window".into(),
                    ))
                }
            }
        }
    }
    Ok(point)
}

/// Per-point seed derived from (master seed, point index); reproducible
/// independent of evaluation order.
pub fn point_seed(master: u64, index: usize) -> u64 {
    master ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)
}

fn min_separation(c: &RunConfig) -> Option<f64> {
    let mut min = f64::INFINITY;
    for (a, da) in c.detectors.iter().enumerate() {
        for db in c.detectors.iter().skip(a + 1) {
            min = min.min(da.separation(db));
        }
    }
    min.is_finite().then_some(min)
}

/// Runs every grid point; per-point failures are recorded in-row.
pub fn run_sweep(c: &RunConfig, grid: &SweepGrid) -> Result<SweepTable> {
    c.validate()?;
    let points = grid.points()?;
    let master = c
        .analysis
        .svetlichny
        .as_ref()
        .map(|s| s.seed)
        .unwrap_or(0);
    let mut rows = Vec::with_capacity(points.len());
    for (index, &value) in points.iter().enumerate() {
        let seed = point_seed(master, index);
        let row = match apply_point(c, grid.parameter, value)
            .and_then(|point| run_pipeline(&point, Some(seed)).map(|b| (point, b)))
        {
            Ok((point, bundle)) => SweepRow {
                index,
                parameter_value: value,
                seed,
                min_separation: min_separation(&point),
                dominance_ratio: Some(bundle.diagnostics.dominance_ratio),
                eta: Some(bundle.diagnostics.eta),
                fidelity_to_target: Some(bundle.diagnostics.fidelity_to_target),
                min_negativity: bundle.analysis.negativities.as_ref().map(|rows| {
                    rows.iter()
                        .map(|r| r.value)
                        .fold(f64::INFINITY, f64::min)
                }),
                svetlichny_value: bundle.analysis.svetlichny.as_ref().map(|s| s.value),
                error: None,
            },
            Err(e) => SweepRow {
                index,
                parameter_value: value,
                seed,
                min_separation: None,
                dominance_ratio: None,
                eta: None,
                fidelity_to_target: None,
                min_negativity: None,
                svetlichny_value: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(SweepTable {
        parameter: grid.parameter,
        config_hash: c.hash(),
        tool_version: TOOL_VERSION.to_string(),
        rows,
    })
}

/// Least-squares fit of ln(negativity) = log_amplitude - rate * x^3
/// with x = L / (c T); the comparison curve for the decay study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub log_amplitude: f64,
    pub cubic_rate: f64,
    pub points_used: usize,
    /// (L/cT, negativity, fitted curve value) triples.
    pub curve: Vec<(f64, f64, f64)>,
}

pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    if usable.len() < 2 {
        return Err(WdError::Domain(
            "decay fit needs at least two points with positive negativity".into(),
        ));
    }
    // Linear least squares on (x^3, ln y).
    let n = usable.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &usable {
        let u = x * x * x;
        let v = y.ln();
        sx += u;
        sy += v;
        sxx += u * u;
        sxy += u * v;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(WdError::Domain("decay fit is degenerate".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let curve = usable
        .iter()
        .map(|&(x, y)| (x, y, (intercept + slope * x * x * x).exp()))
        .collect();
    Ok(DecayFit {
        log_amplitude: intercept,
        cubic_rate: -slope,
        points_used: usable.len(),
        curve,
    })
}

/// Wraps a payload with provenance so every emitted file carries the
/// config hash and tool version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Emitted<T> {
    pub config_hash: String,
    pub tool_version: String,
    pub payload: T,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| WdError::Io {
            path: parent.display().to_string(),
            source: e,
        })?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| WdError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| WdError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn emit_json<T: Serialize>(dir: &Path, name: &str, hash: &str, payload: &T) -> Result<PathBuf> {
    let wrapped = Emitted {
        config_hash: hash.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        payload,
    };
    let text = serde_json::to_string_pretty(&wrapped)
        .map_err(|e| WdError::Domain(format!("serialization of {name}: {e}")))?;
    let path = dir.join(format!("{name}-{hash}.json"));
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

/// Timestamp sidecar: the only file whose content varies between
/// identical reruns.
fn emit_meta(dir: &Path, hash: &str) -> Result<PathBuf> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "config_hash": hash,
        "tool_version": TOOL_VERSION,
        "unix_timestamp": timestamp,
    });
    let path = dir.join(format!("meta-{hash}.json"));
    write_file(&path, meta.to_string().as_bytes())?;
    Ok(path)
}

fn fmt_opt(v: Option<f64>) -> String {
    // 17 significant digits: round-trips f64 exactly.
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub const SWEEP_CSV_COLUMNS: [&str; 10] = [
    "index",
    "parameter_value",
    "seed",
    "min_separation",
    "dominance_ratio",
    "eta",
    "fidelity_to_target",
    "min_negativity",
    "svetlichny_value",
    "error",
];

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!(
        "# wdistill {} config {}\n{}\n",
        table.tool_version,
        table.config_hash,
        SWEEP_CSV_COLUMNS.join(",")
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            fmt_opt(Some(r.parameter_value)),
            r.seed,
            fmt_opt(r.min_separation),
            fmt_opt(r.dominance_ratio),
            fmt_opt(r.eta),
            fmt_opt(r.fidelity_to_target),
            fmt_opt(r.min_negativity),
            fmt_opt(r.svetlichny_value),
            r.error
                .as_deref()
                .map(|e| e.replace([',', '\n'], ";"))
                .unwrap_or_default(),
        ));
    }
    out
}

/// Which stages of the bundle to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitStage {
    Amplitudes,
    Assemble,
    Distill,
    Analyze,
}

/// Writes the bundle's artifacts up to `stage`; returns the paths.
pub fn emit_outputs(bundle: &ArtifactBundle, dir: &Path, stage: EmitStage) -> Result<Vec<PathBuf>> {
    let hash = &bundle.config_hash;
    let mut paths = Vec::new();
    paths.push(emit_json(dir, "amplitudes", hash, &bundle.table)?);
    let flat = format!(
        "# wdistill {} config {}\n{}",
        TOOL_VERSION,
        hash,
        bundle.table.to_flat_text()
    );
    let flat_path = dir.join(format!("amplitudes-{hash}.txt"));
    write_file(&flat_path, flat.as_bytes())?;
    paths.push(flat_path);
    if stage != EmitStage::Amplitudes {
        paths.push(emit_json(dir, "assembled", hash, &bundle.assembled)?);
    }
    if stage == EmitStage::Distill || stage == EmitStage::Analyze {
        paths.push(emit_json(dir, "distilled", hash, &bundle.distilled)?);
        paths.push(emit_json(dir, "diagnostics", hash, &bundle.diagnostics)?);
    }
    if stage == EmitStage::Analyze {
        paths.push(emit_json(dir, "analysis", hash, &bundle.analysis)?);
    }
    paths.push(emit_meta(dir, hash)?);
    Ok(paths)
}

/// Writes the sweep table (CSV + JSON) and, for separation sweeps with
/// negativity data, the decay fit.
pub fn emit_sweep(table: &SweepTable, dir: &Path, duration: Option<f64>) -> Result<Vec<PathBuf>> {
    let hash = &table.config_hash;
    let mut paths = Vec::new();
    let csv_path = dir.join(format!("sweep-{hash}.csv"));
    write_file(&csv_path, sweep_csv(table).as_bytes())?;
    paths.push(csv_path);
    paths.push(emit_json(dir, "sweep", hash, table)?);
    if table.parameter == SweepParameter::SeparationScale {
        if let Some(t) = duration {
            let points: Vec<(f64, f64)> = table
                .rows
                .iter()
                .filter_map(|r| {
                    Some((r.min_separation? / t, r.min_negativity?))
                })
                .collect();
            if let Ok(fit) = fit_decay(&points) {
                paths.push(emit_json(dir, "decay-fit", hash, &fit)?);
            }
        }
    }
    paths.push(emit_meta(dir, hash)?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GeometricRange;

    fn synthetic_config(kappa: f64) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
            hub = "C"
            [synthetic]
            hub_value = 1e-9
            kappa = {kappa}
            labels = ["A", "B", "C"]
            "#
        ))
        .unwrap()
    }

    #[test]
    fn pipeline_runs_synthetic_end_to_end() {
        // kappa = inf: the exact algebraic limit, so the distilled state
        // is pure and the pure-state analyses all apply.
        let mut c = synthetic_config(f64::INFINITY);
        c.analysis.gme = true;
        let bundle = run_pipeline(&c, None).unwrap();
        assert!(bundle.diagnostics.fidelity_to_target > 0.999);
        assert!(bundle.analysis.fidelity_to_w.unwrap() > 0.999);
        let gme = bundle.analysis.gme.unwrap();
        assert!(gme.genuine);
        assert!(bundle.analysis.errors.is_empty(), "{:?}", bundle.analysis.errors);
        let negs = bundle.analysis.negativities.unwrap();
        assert_eq!(negs.len(), 3);
        for n in negs {
            assert!(n.value > 0.4, "subset {:?}: {}", n.subset, n.value);
        }
    }

    #[test]
    fn kappa_sweep_reproduces_limit_law() {
        let mut c = synthetic_config(10.0);
        c.sweep = Some(SweepGrid {
            parameter: SweepParameter::Kappa,
            values: None,
            geometric: Some(GeometricRange {
                start: 10.0,
                stop: 1e4,
                points: 4,
            }),
        });
        let grid = c.sweep.clone().unwrap();
        let table = run_sweep(&c, &grid).unwrap();
        assert_eq!(table.rows.len(), 4);
        let infidelities: Vec<(f64, f64)> = table
            .rows
            .iter()
            .map(|r| {
                (
                    r.parameter_value.ln(),
                    (1.0 - r.fidelity_to_target.unwrap()).ln(),
                )
            })
            .collect();
        let slope = (infidelities[3].1 - infidelities[0].1)
            / (infidelities[3].0 - infidelities[0].0);
        assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn sweep_rows_survive_point_failures() {
        let mut c = synthetic_config(10.0);
        c.sweep = Some(SweepGrid {
            parameter: SweepParameter::Kappa,
            values: Some(vec![1e4, -1.0, 1e3]),
            geometric: None,
        });
        let grid = c.sweep.clone().unwrap();
        let table = run_sweep(&c, &grid).unwrap();
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[1].error.is_some());
        assert!(table.rows[2].error.is_none());
    }

    #[test]
    fn point_seeds_are_order_independent() {
        assert_eq!(point_seed(7, 3), point_seed(7, 3));
        assert_ne!(point_seed(7, 3), point_seed(7, 4));
        assert_ne!(point_seed(7, 3), point_seed(8, 3));
    }

    #[test]
    fn decay_fit_recovers_cubic_exponential() {
        let points: Vec<(f64, f64)> = (1..8)
            .map(|i| {
                let x = i as f64 * 0.3;
                (x, 2.0 * (-0.5 * x * x * x).exp())
            })
            .collect();
        let fit = fit_decay(&points).unwrap();
        assert!((fit.cubic_rate - 0.5).abs() < 1e-10);
        assert!((fit.log_amplitude - 2.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn emitted_files_are_rerun_identical_except_meta() {
        let dir = tempfile::tempdir().unwrap();
        let c = synthetic_config(100.0);
        let bundle_a = run_pipeline(&c, None).unwrap();
        let bundle_b = run_pipeline(&c, None).unwrap();
        let a_dir = dir.path().join("a");
        let b_dir = dir.path().join("b");
        let paths_a = emit_outputs(&bundle_a, &a_dir, EmitStage::Analyze).unwrap();
        let paths_b = emit_outputs(&bundle_b, &b_dir, EmitStage::Analyze).unwrap();
        assert_eq!(paths_a.len(), paths_b.len());
        for (pa, pb) in paths_a.iter().zip(&paths_b) {
            assert_eq!(pa.file_name(), pb.file_name());
            let name = pa.file_name().unwrap().to_string_lossy();
            if name.starts_with("meta-") {
                continue;
            }
            let ba = std::fs::read(pa).unwrap();
            let bb = std::fs::read(pb).unwrap();
            assert_eq!(ba, bb, "file {name} differs between identical reruns");
        }
    }

    #[test]
    fn distilled_artifact_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = synthetic_config(1e4);
        let bundle = run_pipeline(&c, None).unwrap();
        let paths = emit_outputs(&bundle, dir.path(), EmitStage::Distill).unwrap();
        let distilled_path = paths
            .iter()
            .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("distilled-"))
            .unwrap();
        let text = std::fs::read_to_string(distilled_path).unwrap();
        let back: Emitted<ReducedDensityMatrix> = serde_json::from_str(&text).unwrap();
        assert_eq!((back.payload.matrix - &bundle.distilled.matrix).norm(), 0.0);
    }

    #[test]
    fn sweep_csv_schema_matches() {
        let c = synthetic_config(10.0);
        let grid = SweepGrid {
            parameter: SweepParameter::Kappa,
            values: Some(vec![10.0, 100.0]),
            geometric: None,
        };
        let table = run_sweep(&c, &grid).unwrap();
        let csv = sweep_csv(&table);
        let mut lines = csv.lines();
        let provenance = lines.next().unwrap();
        assert!(provenance.contains(&c.hash()));
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), SWEEP_CSV_COLUMNS.len());
        for line in lines {
            assert_eq!(line.split(',').count(), SWEEP_CSV_COLUMNS.len());
        }
    }
}
