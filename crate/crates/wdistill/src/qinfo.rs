//! Certification layer: fidelities, Schmidt spectra, negativity, genuine
//! multipartite entanglement, and Svetlichny-type nonlocality.
//!
//! Basis convention: computational basis of N qubits, party 0 is the most
//! significant bit, spin-up is bit 1. Index(s) = sum_i s_i 2^(N-1-i).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WdError};

/// Unit-norm state vector on N qubits.
#[derive(Debug, Clone)]
pub struct PureState {
    pub amplitudes: DVector<Complex64>,
    pub n_parties: usize,
}

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>, n_parties: usize) -> Result<Self> {
        if amplitudes.len() != 1 << n_parties {
            return Err(WdError::validation(vec![format!(
                "amplitude vector length {} does not match 2^{}",
                amplitudes.len(),
                n_parties
            )]));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(WdError::validation(vec![format!(
                "state norm {norm} deviates from 1 by more than 1e-12"
            )]));
        }
        Ok(PureState {
            amplitudes,
            n_parties,
        })
    }

    pub fn from_real(amplitudes: &[f64], n_parties: usize) -> Result<Self> {
        let v = DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        PureState::new(v, n_parties)
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let dim = self.amplitudes.len();
        DMatrix::from_fn(dim, dim, |r, c| {
            self.amplitudes[r] * self.amplitudes[c].conj()
        })
    }
}

/// Split of the parties into a nonempty proper subset and its complement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bipartition {
    pub subset: Vec<usize>,
    pub n_parties: usize,
}

impl Bipartition {
    pub fn new(subset: Vec<usize>, n_parties: usize) -> Result<Self> {
        if subset.is_empty() || subset.len() >= n_parties {
            return Err(WdError::validation(vec![
                "bipartition subset must be nonempty and proper".into(),
            ]));
        }
        let mut sorted = subset.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != subset.len() || *sorted.last().unwrap() >= n_parties {
            return Err(WdError::validation(vec![format!(
                "bipartition subset {subset:?} invalid for {n_parties} parties"
            )]));
        }
        Ok(Bipartition {
            subset: sorted,
            n_parties,
        })
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n_parties)
            .filter(|p| !self.subset.contains(p))
            .collect()
    }
}

/// All bipartitions up to complement exchange (subset contains party 0).
pub fn all_bipartitions(n_parties: usize) -> Vec<Bipartition> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n_parties - 1)) {
        // Party 0 always in the subset: prepend it to the mask over 1..N.
        let mut subset = vec![0usize];
        for p in 1..n_parties {
            if mask & (1 << (p - 1)) != 0 {
                subset.push(p);
            }
        }
        if subset.len() < n_parties {
            out.push(Bipartition::new(subset, n_parties).expect("constructed valid"));
        }
    }
    out
}

/// Two candidate unit measurement directions per party.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSettings {
    /// vectors[p][c] is party p's direction for setting choice c in {0,1}.
    pub vectors: Vec<[[f64; 3]; 2]>,
}

impl MeasurementSettings {
    pub fn validate(&self) -> Result<()> {
        for (p, pair) in self.vectors.iter().enumerate() {
            for v in pair {
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(WdError::validation(vec![format!(
                        "party {p} setting vector has norm {norm}"
                    )]));
                }
            }
        }
        Ok(())
    }
}

fn bit(index: usize, party: usize, n: usize) -> usize {
    (index >> (n - 1 - party)) & 1
}

/// The distilled target (|all down> - sum over i != hub of the (i, hub)
/// pair flip) / sqrt(N).
pub fn target_distilled_state(n_parties: usize, hub: usize) -> Result<PureState> {
    if n_parties < 2 {
        return Err(WdError::Domain(format!(
            "target state needs N >= 2, got {n_parties}"
        )));
    }
    if hub >= n_parties {
        return Err(WdError::Domain(format!(
            "hub index {hub} out of range for N = {n_parties}"
        )));
    }
    let dim = 1usize << n_parties;
    let norm = 1.0 / (n_parties as f64).sqrt();
    let mut amps = vec![0.0; dim];
    amps[0] = norm;
    for i in 0..n_parties {
        if i == hub {
            continue;
        }
        let idx = (1 << (n_parties - 1 - i)) | (1 << (n_parties - 1 - hub));
        amps[idx] = -norm;
    }
    PureState::from_real(&amps, n_parties)
}

/// Uniform single-excitation superposition.
pub fn w_state(n_parties: usize) -> Result<PureState> {
    if n_parties < 2 {
        return Err(WdError::Domain(format!(
            "W state needs N >= 2, got {n_parties}"
        )));
    }
    let dim = 1usize << n_parties;
    let norm = 1.0 / (n_parties as f64).sqrt();
    let mut amps = vec![0.0; dim];
    for i in 0..n_parties {
        amps[1 << (n_parties - 1 - i)] = norm;
    }
    PureState::from_real(&amps, n_parties)
}

pub fn ghz_state(n_parties: usize) -> Result<PureState> {
    if n_parties < 2 {
        return Err(WdError::Domain(format!(
            "GHZ state needs N >= 2, got {n_parties}"
        )));
    }
    let dim = 1usize << n_parties;
    let mut amps = vec![0.0; dim];
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = norm;
    amps[dim - 1] = norm;
    PureState::from_real(&amps, n_parties)
}

/// Applies the hub-local unitary X.Z (phase flip then bit flip) that maps
/// the distilled target onto the W state.
pub fn local_rotation_to_w(s: &PureState, hub: usize) -> Result<PureState> {
    if hub >= s.n_parties {
        return Err(WdError::Domain(format!(
            "hub index {hub} out of range for N = {}",
            s.n_parties
        )));
    }
    let n = s.n_parties;
    let dim = s.amplitudes.len();
    let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let hub_mask = 1usize << (n - 1 - hub);
    for idx in 0..dim {
        // (X Z psi)[idx] = (-1)^{bit(idx ^ mask)} psi[idx ^ mask].
        let src = idx ^ hub_mask;
        let sign = if src & hub_mask != 0 { -1.0 } else { 1.0 };
        out[idx] = s.amplitudes[src] * sign;
    }
    PureState::new(out, n)
}

/// Inverse of `local_rotation_to_w` (Z then X in reverse: Z.X).
pub fn local_rotation_from_w(s: &PureState, hub: usize) -> Result<PureState> {
    let n = s.n_parties;
    let hub_mask = 1usize << (n - 1 - hub);
    let dim = s.amplitudes.len();
    let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for idx in 0..dim {
        let sign = if idx & hub_mask != 0 { -1.0 } else { 1.0 };
        out[idx] = s.amplitudes[idx ^ hub_mask] * sign;
    }
    PureState::new(out, n)
}

fn check_normalized(rho: &DMatrix<Complex64>) -> Result<()> {
    let trace: Complex64 = rho.diagonal().iter().sum();
    if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
        return Err(WdError::validation(vec![format!(
            "density matrix trace {trace} is not 1; normalize first"
        )]));
    }
    Ok(())
}

/// <s| rho |s> for a normalized density matrix.
pub fn fidelity(rho: &DMatrix<Complex64>, s: &PureState) -> Result<f64> {
    check_normalized(rho)?;
    if rho.nrows() != s.amplitudes.len() {
        return Err(WdError::validation(vec![format!(
            "dimension mismatch: rho is {}x{}, state has {}",
            rho.nrows(),
            rho.ncols(),
            s.amplitudes.len()
        )]));
    }
    let v = rho * &s.amplitudes;
    let f = s.amplitudes.dotc(&v);
    Ok(f.re.clamp(0.0, 1.0 + 1e-12).min(1.0))
}

/// Squared Schmidt coefficients across a bipartition, descending.
pub fn schmidt_spectrum(s: &PureState, b: &Bipartition) -> Result<Vec<f64>> {
    if b.n_parties != s.n_parties {
        return Err(WdError::validation(vec![
            "bipartition party count does not match state".into(),
        ]));
    }
    let n = s.n_parties;
    let complement = b.complement();
    let rows = 1usize << b.subset.len();
    let cols = 1usize << complement.len();
    let mut m = DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0));
    for idx in 0..s.amplitudes.len() {
        let mut r = 0usize;
        for (pos, &p) in b.subset.iter().enumerate() {
            r |= bit(idx, p, n) << (b.subset.len() - 1 - pos);
        }
        let mut c = 0usize;
        for (pos, &p) in complement.iter().enumerate() {
            c |= bit(idx, p, n) << (complement.len() - 1 - pos);
        }
        m[(r, c)] = s.amplitudes[idx];
    }
    let svd = m.svd(false, false);
    let mut weights: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(WdError::numerical(
            "Schmidt weights do not sum to 1",
            (total - 1.0).abs(),
            1e-10,
        ));
    }
    Ok(weights)
}

/// Partial transpose of `rho` over the parties in `b.subset`.
pub fn partial_transpose(rho: &DMatrix<Complex64>, b: &Bipartition) -> DMatrix<Complex64> {
    let n = b.n_parties;
    let dim = rho.nrows();
    let mut mask = 0usize;
    for &p in &b.subset {
        mask |= 1 << (n - 1 - p);
    }
    let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for r in 0..dim {
        for c in 0..dim {
            // Swap the subset bits of (row, column).
            let rt = (r & !mask) | (c & mask);
            let ct = (c & !mask) | (r & mask);
            out[(rt, ct)] = rho[(r, c)];
        }
    }
    out
}

/// (||rho^{T_S}||_1 - 1) / 2, i.e. the magnitude of the negative part of
/// the partially transposed spectrum.
pub fn negativity(rho: &DMatrix<Complex64>, b: &Bipartition) -> Result<f64> {
    check_normalized(rho)?;
    let pt = partial_transpose(rho, b);
    let herm_defect = (&pt - pt.adjoint()).norm();
    if herm_defect > 1e-9 {
        return Err(WdError::validation(vec![format!(
            "partial transpose not Hermitian (defect {herm_defect}); input rho not Hermitian"
        )]));
    }
    let sym = (&pt + pt.adjoint()).scale(0.5);
    let eigen = sym.symmetric_eigen();
    Ok(eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum())
}

/// Per-bipartition evidence for the genuine-entanglement verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BipartitionEvidence {
    pub subset: Vec<usize>,
    pub second_schmidt_weight: f64,
    pub entangled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenuineMultipartiteReport {
    pub genuine: bool,
    pub evidence: Vec<BipartitionEvidence>,
}

const SCHMIDT_RANK_TOL: f64 = 1e-8;

/// True iff every bipartition has Schmidt rank >= 2 (second weight above
/// 1e-8). Pure-state criterion for genuine multipartite entanglement.
pub fn genuine_multipartite_check(s: &PureState) -> Result<GenuineMultipartiteReport> {
    if s.n_parties < 2 {
        return Err(WdError::Domain(
            "genuine multipartite check needs N >= 2".into(),
        ));
    }
    let mut evidence = Vec::new();
    let mut genuine = true;
    for b in all_bipartitions(s.n_parties) {
        let weights = schmidt_spectrum(s, &b)?;
        let second = weights.get(1).copied().unwrap_or(0.0);
        let entangled = second >= SCHMIDT_RANK_TOL;
        genuine &= entangled;
        evidence.push(BipartitionEvidence {
            subset: b.subset.clone(),
            second_schmidt_weight: second,
            entangled,
        });
    }
    Ok(GenuineMultipartiteReport { genuine, evidence })
}

/// Mixed-state guard for the pure-state pathway: purity must be ~1.
pub fn pure_state_from_matrix(rho: &DMatrix<Complex64>, n_parties: usize) -> Result<PureState> {
    check_normalized(rho)?;
    let purity = (rho * rho).trace().re;
    if purity < 1.0 - 1e-6 {
        return Err(WdError::Domain(format!(
            "matrix purity {purity} < 1 - 1e-6; genuine-entanglement certification \
             is pure-state only (distill first)"
        )));
    }
    let sym = (rho + rho.adjoint()).scale(0.5);
    let eigen = sym.symmetric_eigen();
    let (mut best, mut best_val) = (0, f64::NEG_INFINITY);
    for (i, &l) in eigen.eigenvalues.iter().enumerate() {
        if l > best_val {
            best_val = l;
            best = i;
        }
    }
    let column = eigen.eigenvectors.column(best).into_owned();
    let normed = column.scale(1.0 / column.norm());
    PureState::new(normed, n_parties)
}

/// Pauli matrices in the computational basis (z eigenbasis, up = bit 1 =
/// index ordering with up listed second in each qubit factor).
fn pauli(axis: usize) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match axis {
        0 => [[z, one], [one, z]],
        1 => [
            [z, Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), z],
        ],
        // Basis index 0 is all-down; sigma_z |down> = -|down>.
        2 => [[-one, z], [z, one]],
        _ => unreachable!(),
    }
}

/// Full Pauli correlation tensor T[k_0..k_{N-1}] = Tr(rho sigma_{k_0} x ...),
/// flattened base-3 with party 0 as the most significant digit.
pub fn pauli_correlation_tensor(rho: &DMatrix<Complex64>, n_parties: usize) -> Vec<f64> {
    let dim = 1usize << n_parties;
    let count = 3usize.pow(n_parties as u32);
    let paulis: [[[Complex64; 2]; 2]; 3] = [pauli(0), pauli(1), pauli(2)];
    let mut tensor = vec![0.0; count];
    for (flat, value) in tensor.iter_mut().enumerate() {
        let mut digits = vec![0usize; n_parties];
        let mut rest = flat;
        for p in (0..n_parties).rev() {
            digits[p] = rest % 3;
            rest /= 3;
        }
        // Tr(rho O) with O = tensor product of the chosen Paulis.
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                let mut o = Complex64::new(1.0, 0.0);
                for (p, &d) in digits.iter().enumerate() {
                    let rb = bit(c, p, n_parties);
                    let cb = bit(r, p, n_parties);
                    o *= paulis[d][rb][cb];
                    if o == Complex64::new(0.0, 0.0) {
                        break;
                    }
                }
                if o != Complex64::new(0.0, 0.0) {
                    acc += rho[(r, c)] * o;
                }
            }
        }
        *value = acc.re;
    }
    tensor
}

/// Expectation of the product of n.sigma observables, via the tensor.
fn correlation_from_tensor(tensor: &[f64], directions: &[[f64; 3]]) -> f64 {
    let n = directions.len();
    let count = tensor.len();
    let mut total = 0.0;
    for flat in 0..count {
        let t = tensor[flat];
        if t == 0.0 {
            continue;
        }
        let mut weight = 1.0;
        let mut rest = flat;
        for p in (0..n).rev() {
            weight *= directions[p][rest % 3];
            rest /= 3;
            if weight == 0.0 {
                break;
            }
        }
        total += t * weight;
    }
    total
}

/// Expectation of the tensor product of spin observables n.sigma.
pub fn correlation_value(rho: &DMatrix<Complex64>, directions: &[[f64; 3]]) -> Result<f64> {
    check_normalized(rho)?;
    let n = directions.len();
    if rho.nrows() != 1 << n {
        return Err(WdError::validation(vec![format!(
            "rho dimension {} does not match {} parties",
            rho.nrows(),
            n
        )]));
    }
    let tensor = pauli_correlation_tensor(rho, n);
    Ok(correlation_from_tensor(&tensor, directions))
}

/// Svetlichny coefficient for a setting combination: (-1)^(floor(k/2))
/// with k the number of primed settings. Reproduces the eight-term
/// three-partite polynomial.
fn svetlichny_sign(combo: usize) -> f64 {
    let primed = (combo as u32).count_ones() as usize;
    if (primed / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn svetlichny_from_tensor(tensor: &[f64], settings: &MeasurementSettings, n: usize) -> f64 {
    let mut total = 0.0;
    let mut directions = vec![[0.0; 3]; n];
    for combo in 0..(1usize << n) {
        for (p, d) in directions.iter_mut().enumerate() {
            *d = settings.vectors[p][bit(combo, p, n)];
        }
        total += svetlichny_sign(combo) * correlation_from_tensor(tensor, &directions);
    }
    total
}

/// Svetlichny polynomial value (hybrid bound 2^(N-1) in this
/// normalization: 4 at N=3, 8 at N=4).
pub fn svetlichny_value(
    rho: &DMatrix<Complex64>,
    settings: &MeasurementSettings,
    n_parties: usize,
) -> Result<f64> {
    if n_parties < 3 {
        return Err(WdError::Domain(format!(
            "Svetlichny polynomial needs N >= 3, got {n_parties}"
        )));
    }
    if settings.vectors.len() != n_parties {
        return Err(WdError::validation(vec![format!(
            "settings cover {} parties, expected {n_parties}",
            settings.vectors.len()
        )]));
    }
    settings.validate()?;
    check_normalized(rho)?;
    let tensor = pauli_correlation_tensor(rho, n_parties);
    Ok(svetlichny_from_tensor(&tensor, settings, n_parties))
}

fn angles_to_settings(angles: &[f64], n: usize) -> MeasurementSettings {
    let mut vectors = Vec::with_capacity(n);
    for p in 0..n {
        let mut pair = [[0.0; 3]; 2];
        for c in 0..2 {
            let theta = angles[4 * p + 2 * c];
            let phi = angles[4 * p + 2 * c + 1];
            pair[c] = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
        }
        vectors.push(pair);
    }
    MeasurementSettings { vectors }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvetlichnyOptimum {
    pub value: f64,
    pub angles: Vec<f64>,
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl SvetlichnyOptimum {
    pub fn settings(&self, n_parties: usize) -> MeasurementSettings {
        angles_to_settings(&self.angles, n_parties)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_ascent_1d<F: FnMut(f64) -> f64>(mut f: F, center: f64, width: f64) -> (f64, f64) {
    let (mut a, mut b) = (center - width, center + width);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..40 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

/// Deterministic multi-start maximization of the Svetlichny value over
/// measurement angles. Coordinate-wise golden-section ascent with a
/// shrinking search width; restart r uses seed (seed, r) so the result
/// depends only on (seed, restarts, iterations).
pub fn optimize_svetlichny(
    rho: &DMatrix<Complex64>,
    n_parties: usize,
    seed: u64,
    restarts: usize,
    iterations: usize,
) -> Result<SvetlichnyOptimum> {
    if n_parties < 3 {
        return Err(WdError::Domain(format!(
            "Svetlichny optimization needs N >= 3, got {n_parties}"
        )));
    }
    check_normalized(rho)?;
    let tensor = pauli_correlation_tensor(rho, n_parties);
    let dims = 4 * n_parties;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_angles = vec![0.0; dims];
    let mut converged = false;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(
            0x9e37_79b9_7f4a_7c15u64.wrapping_mul(restart as u64 + 1),
        ));
        let mut angles: Vec<f64> = (0..dims)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let mut value = svetlichny_from_tensor(&tensor, &angles_to_settings(&angles, n_parties), n_parties);
        let mut width = std::f64::consts::FRAC_PI_2;
        let mut local_converged = false;
        for _pass in 0..iterations {
            let before = value;
            for d in 0..dims {
                let (x, fx) = golden_ascent_1d(
                    |a| {
                        let mut trial = angles.clone();
                        trial[d] = a;
                        svetlichny_from_tensor(
                            &tensor,
                            &angles_to_settings(&trial, n_parties),
                            n_parties,
                        )
                    },
                    angles[d],
                    width,
                );
                if fx > value {
                    angles[d] = x;
                    value = fx;
                }
            }
            width = (width * 0.7).max(1e-7);
            if value - before < 1e-12 && width <= 1e-6 {
                local_converged = true;
                break;
            }
        }
        if value > best_value {
            best_value = value;
            best_angles = angles;
            converged = local_converged;
        }
    }
    Ok(SvetlichnyOptimum {
        value: best_value,
        angles: best_angles,
        seed,
        restarts,
        iterations,
        converged,
    })
}

/// Maximum of the Svetlichny polynomial over deterministic hybrid
/// strategies: parties split into two groups, each group answering with
/// an arbitrary deterministic joint strategy.
pub fn hybrid_bound_oracle(n_parties: usize) -> Result<f64> {
    if !(3..=4).contains(&n_parties) {
        return Err(WdError::Domain(format!(
            "hybrid bound enumeration supports N in 3..=4, got {n_parties}"
        )));
    }
    let n = n_parties;
    let mut best = 0.0f64;
    // Enumerate unordered bipartitions via subsets containing party 0.
    for mask in 1usize..(1 << (n - 1)) {
        let group1: Vec<usize> = std::iter::once(0)
            .chain((1..n).filter(|p| mask & (1 << (p - 1)) != 0))
            .collect();
        let group2: Vec<usize> = (1..n).filter(|p| mask & (1 << (p - 1)) == 0).collect();
        if group2.is_empty() {
            continue;
        }
        let (small, large) = if group1.len() <= group2.len() {
            (&group1, &group2)
        } else {
            (&group2, &group1)
        };
        let s_combos = 1usize << small.len();
        let l_combos = 1usize << large.len();
        // Enumerate the smaller group's strategy; the larger group's
        // optimal response is the absolute sum per setting combo.
        for strategy in 0..(1usize << s_combos) {
            let mut total = 0.0;
            for yl in 0..l_combos {
                let mut inner = 0.0;
                for ys in 0..s_combos {
                    // Reassemble the global setting combo.
                    let mut combo = 0usize;
                    for (pos, &p) in small.iter().enumerate() {
                        if ys & (1 << pos) != 0 {
                            combo |= 1 << p;
                        }
                    }
                    for (pos, &p) in large.iter().enumerate() {
                        if yl & (1 << pos) != 0 {
                            combo |= 1 << p;
                        }
                    }
                    let f = if strategy & (1 << ys) != 0 { 1.0 } else { -1.0 };
                    inner += svetlichny_sign_by_parties(combo, n) * f;
                }
                total += inner.abs();
            }
            best = best.max(total);
        }
    }
    Ok(best)
}

/// Maximum over fully local deterministic strategies (every party its own
/// group). Recorded alongside the hybrid bound for documentation.
pub fn local_bound_oracle(n_parties: usize) -> Result<f64> {
    if !(3..=4).contains(&n_parties) {
        return Err(WdError::Domain(format!(
            "local bound enumeration supports N in 3..=4, got {n_parties}"
        )));
    }
    let n = n_parties;
    // Enumerate strategies for parties 0..n-1 except the last; optimal
    // last-party response is the absolute sum over its settings.
    let strategies_per_party = 4usize; // two settings, +-1 each
    let total_strats = strategies_per_party.pow((n - 1) as u32);
    let mut best = 0.0f64;
    for enc in 0..total_strats {
        let mut codes = vec![0usize; n - 1];
        let mut rest = enc;
        for c in codes.iter_mut() {
            *c = rest % 4;
            rest /= 4;
        }
        let mut total = 0.0;
        for last_setting in 0..2usize {
            let mut inner = 0.0;
            for combo_front in 0..(1usize << (n - 1)) {
                let mut combo = combo_front;
                if last_setting == 1 {
                    combo |= 1 << (n - 1);
                }
                let mut product = 1.0;
                for (p, &code) in codes.iter().enumerate() {
                    let s = (combo_front >> p) & 1;
                    let out = (code >> s) & 1;
                    product *= if out == 1 { 1.0 } else { -1.0 };
                }
                inner += svetlichny_sign_by_parties(combo, n) * product;
            }
            total += inner.abs();
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Sign helper taking a combo encoded with party p at plain bit p (used
/// by the enumeration oracles, which do not need the MSB convention).
fn svetlichny_sign_by_parties(combo: usize, _n: usize) -> f64 {
    svetlichny_sign(combo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn maximally_mixed(n: usize) -> DMatrix<Complex64> {
        let dim = 1usize << n;
        DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                Complex64::new(1.0 / dim as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn target_state_examples() {
        let t3 = target_distilled_state(3, 2).unwrap();
        let inv = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(t3.amplitudes[0b000].re, inv);
        assert_relative_eq!(t3.amplitudes[0b011].re, -inv);
        assert_relative_eq!(t3.amplitudes[0b101].re, -inv);
        assert_relative_eq!(t3.amplitudes.norm(), 1.0, epsilon = 1e-14);

        let t2 = target_distilled_state(2, 1).unwrap();
        assert_relative_eq!(t2.amplitudes[0b00].re, std::f64::consts::FRAC_1_SQRT_2);
        assert_relative_eq!(t2.amplitudes[0b11].re, -std::f64::consts::FRAC_1_SQRT_2);

        let t4 = target_distilled_state(4, 3).unwrap();
        for idx in [0b0000, 0b0011, 0b0101, 0b1001] {
            assert_relative_eq!(t4.amplitudes[idx].re.abs(), 0.5);
        }
        assert!(target_distilled_state(1, 0).is_err());
    }

    #[test]
    fn rotation_maps_target_to_w() {
        for (n, hub) in [(2, 1), (3, 2), (4, 3), (5, 0), (5, 4)] {
            let target = target_distilled_state(n, hub).unwrap();
            let rotated = local_rotation_to_w(&target, hub).unwrap();
            let w = w_state(n).unwrap();
            let overlap = w.amplitudes.dotc(&rotated.amplitudes).norm();
            assert!(
                (overlap - 1.0).abs() < 1e-12,
                "N={n} hub={hub}: overlap {overlap}"
            );
            let back = local_rotation_from_w(&rotated, hub).unwrap();
            assert!((back.amplitudes - target.amplitudes).norm() < 1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        let w = w_state(3).unwrap();
        let rho = w.density_matrix();
        assert_relative_eq!(fidelity(&rho, &w).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            fidelity(&maximally_mixed(3), &w).unwrap(),
            1.0 / 8.0,
            epsilon = 1e-12
        );
        // Unnormalized input rejected.
        assert!(fidelity(&rho.scale(2.0), &w).is_err());
    }

    #[test]
    fn schmidt_examples() {
        let w = w_state(3).unwrap();
        let b = Bipartition::new(vec![0], 3).unwrap();
        let weights = schmidt_spectrum(&w, &b).unwrap();
        assert_relative_eq!(weights[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(weights[1], 1.0 / 3.0, epsilon = 1e-12);

        let bell = ghz_state(2).unwrap();
        let wb = schmidt_spectrum(&bell, &Bipartition::new(vec![0], 2).unwrap()).unwrap();
        assert_relative_eq!(wb[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(wb[1], 0.5, epsilon = 1e-12);

        // Product state: rank one.
        let product = PureState::from_real(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        let wp = schmidt_spectrum(&product, &Bipartition::new(vec![0], 2).unwrap()).unwrap();
        assert_relative_eq!(wp[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negativity_examples() {
        let bell = ghz_state(2).unwrap();
        let b = Bipartition::new(vec![0], 2).unwrap();
        assert_relative_eq!(
            negativity(&bell.density_matrix(), &b).unwrap(),
            0.5,
            epsilon = 1e-10
        );
        let w = w_state(3).unwrap();
        for p in 0..3 {
            let b = Bipartition::new(vec![p], 3).unwrap();
            assert_relative_eq!(
                negativity(&w.density_matrix(), &b).unwrap(),
                2.0f64.sqrt() / 3.0,
                epsilon = 1e-9
            );
        }
        let product = PureState::from_real(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_relative_eq!(
            negativity(&product.density_matrix(), &Bipartition::new(vec![0], 2).unwrap())
                .unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn genuine_multipartite_examples() {
        assert!(genuine_multipartite_check(&w_state(3).unwrap()).unwrap().genuine);
        for n in 2..=8 {
            assert!(
                genuine_multipartite_check(&ghz_state(n).unwrap()).unwrap().genuine,
                "GHZ_{n}"
            );
        }
        // |up> x Bell fails the {A}|{B,C} cut.
        let mut amps = vec![0.0; 8];
        amps[0b100] = std::f64::consts::FRAC_1_SQRT_2;
        amps[0b111] = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::from_real(&amps, 3).unwrap();
        let report = genuine_multipartite_check(&s).unwrap();
        assert!(!report.genuine);
        let failing = report
            .evidence
            .iter()
            .find(|e| e.subset == vec![0])
            .unwrap();
        assert!(!failing.entangled);
    }

    #[test]
    fn correlation_examples() {
        let z = [0.0, 0.0, 1.0];
        assert_relative_eq!(
            correlation_value(&maximally_mixed(2), &[z, z]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // (|du> + |ud>)/sqrt2: perfect zz anticorrelation.
        let mut amps = vec![0.0; 4];
        amps[0b01] = std::f64::consts::FRAC_1_SQRT_2;
        amps[0b10] = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::from_real(&amps, 2).unwrap();
        assert_relative_eq!(
            correlation_value(&s.density_matrix(), &[z, z]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        // W_3: every single-excitation branch gives (+1)(-1)(-1) = +1 for
        // the triple product; the -1/3 value belongs to the pair and
        // single-party z correlations.
        let w = w_state(3).unwrap();
        assert_relative_eq!(
            correlation_value(&w.density_matrix(), &[z, z, z]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let tensor = pauli_correlation_tensor(&w.density_matrix(), 3);
        // <z z 1> = -1/3: digits (2,2) on parties 0,1 with identity on 2
        // is not in the traceless tensor, so check via a two-party trace.
        let reduced = {
            let full = w.density_matrix();
            let mut rho2 = DMatrix::from_element(4, 4, Complex64::new(0.0, 0.0));
            for r in 0..4 {
                for c in 0..4 {
                    for k in 0..2 {
                        rho2[(r, c)] += full[(2 * r + k, 2 * c + k)];
                    }
                }
            }
            rho2
        };
        assert_relative_eq!(
            correlation_value(&reduced, &[z, z]).unwrap(),
            -1.0 / 3.0,
            epsilon = 1e-12
        );
        // zzz entry of the tensor matches the direct evaluation.
        assert_relative_eq!(tensor[3 * 3 * 2 + 3 * 2 + 2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svetlichny_known_ghz_settings() {
        // Analytic optimum for GHZ_3: equatorial settings with phases
        // phi_p and phi_p' = phi_p - pi/2, sum of phases = -pi/4 gives
        // E = cos(phi_a + phi_b + phi_c) and S = 4 sqrt 2.
        let ghz = ghz_state(3).unwrap();
        let rho = ghz.density_matrix();
        let phases = [std::f64::consts::FRAC_PI_4, 0.0, 0.0];
        let vectors: Vec<[[f64; 3]; 2]> = phases
            .iter()
            .map(|&phi| {
                let primed = phi - std::f64::consts::FRAC_PI_2;
                [
                    [phi.cos(), phi.sin(), 0.0],
                    [primed.cos(), primed.sin(), 0.0],
                ]
            })
            .collect();
        let settings = MeasurementSettings { vectors };
        let s = svetlichny_value(&rho, &settings, 3).unwrap();
        assert_relative_eq!(s.abs(), 4.0 * 2.0f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn optimizer_reaches_ghz_optimum_and_is_deterministic() {
        let rho = ghz_state(3).unwrap().density_matrix();
        let a = optimize_svetlichny(&rho, 3, 7, 8, 60).unwrap();
        assert!(
            (a.value - 4.0 * 2.0f64.sqrt()).abs() < 1e-4,
            "optimum {} vs {}",
            a.value,
            4.0 * 2.0f64.sqrt()
        );
        let b = optimize_svetlichny(&rho, 3, 7, 8, 60).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn hybrid_and_local_bounds() {
        assert_relative_eq!(hybrid_bound_oracle(3).unwrap(), 4.0);
        assert_relative_eq!(hybrid_bound_oracle(4).unwrap(), 8.0);
        assert_relative_eq!(local_bound_oracle(3).unwrap(), 4.0);
        assert!(hybrid_bound_oracle(5).is_err());
    }

    #[test]
    fn svetlichny_linearity_and_covariance() {
        let w = w_state(3).unwrap().density_matrix();
        let g = ghz_state(3).unwrap().density_matrix();
        let settings = MeasurementSettings {
            vectors: vec![
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
                [
                    [std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2],
                    [0.0, 1.0, 0.0],
                ],
            ],
        };
        let sw = svetlichny_value(&w, &settings, 3).unwrap();
        let sg = svetlichny_value(&g, &settings, 3).unwrap();
        let mix = w.scale(0.3) + g.scale(0.7);
        let sm = svetlichny_value(&mix, &settings, 3).unwrap();
        assert_relative_eq!(sm, 0.3 * sw + 0.7 * sg, epsilon = 1e-10);
    }

    #[test]
    fn bipartition_enumeration_counts() {
        assert_eq!(all_bipartitions(3).len(), 3);
        assert_eq!(all_bipartitions(4).len(), 7);
        assert!(Bipartition::new(vec![], 3).is_err());
        assert!(Bipartition::new(vec![0, 1, 2], 3).is_err());
    }

    #[test]
    fn pure_state_guard_rejects_mixed() {
        let mixed = maximally_mixed(2);
        match pure_state_from_matrix(&mixed, 2) {
            Err(WdError::Domain(msg)) => assert!(msg.contains("pure-state")),
            other => panic!("expected domain error, got {other:?}"),
        }
        let bell = ghz_state(2).unwrap();
        let recovered = pure_state_from_matrix(&bell.density_matrix(), 2).unwrap();
        let overlap = bell.amplitudes.dotc(&recovered.amplitudes).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }
}
