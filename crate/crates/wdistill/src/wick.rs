//! Vacuum moments by Wick's theorem, assembly of the nonnormalized
//! reduced density matrix at leading order, local filtering, and the
//! distillation protocol.
//!
//! Basis convention matches `qinfo`: party 0 is the most significant
//! bit, spin-up is bit 1; index 0 is the all-down state.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplitudes::{AmplitudeIndex, AmplitudeTable, Sign};
use crate::error::{Result, WdError};
use crate::qinfo;

pub const MAX_PARTIES: usize = 8;

/// Basis label: N spins, up = true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinPattern {
    pub bits: Vec<bool>,
}

impl SpinPattern {
    pub fn from_index(index: usize, n: usize) -> Self {
        SpinPattern {
            bits: (0..n).map(|p| (index >> (n - 1 - p)) & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
    }

    pub fn flip_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Labels of the flipped detectors, in party order.
    pub fn flipped<'a>(&self, labels: &'a [String]) -> Vec<&'a str> {
        self.bits
            .iter()
            .zip(labels)
            .filter_map(|(&b, l)| b.then_some(l.as_str()))
            .collect()
    }
}

/// Ordered product of detector field factors whose vacuum moment is
/// requested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSpec {
    pub factors: Vec<(String, Sign)>,
}

impl MomentSpec {
    pub fn new(factors: Vec<(String, Sign)>) -> Self {
        MomentSpec { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// All perfect matchings of 0..len as index pairs (p, q) with p < q.
/// Empty for odd lengths (odd moments vanish).
pub fn enumerate_pairings(len: usize) -> Vec<Vec<(usize, usize)>> {
    if len % 2 != 0 {
        return Vec::new();
    }
    fn recurse(remaining: &mut Vec<usize>, current: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if remaining.is_empty() {
            out.push(current.clone());
            return;
        }
        let first = remaining[0];
        for pos in 1..remaining.len() {
            let partner = remaining[pos];
            let mut rest: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&x| x != first && x != partner)
                .collect();
            current.push((first, partner));
            recurse(&mut rest, current, out);
            current.pop();
        }
    }
    let mut remaining: Vec<usize> = (0..len).collect();
    let mut out = Vec::new();
    recurse(&mut remaining, &mut Vec::new(), &mut out);
    out
}

/// Vacuum moment of the factor product by Wick's theorem: sum over
/// perfect matchings of products of two-point amplitudes, factor order
/// preserved within each pair.
pub fn wick_moment(m: &MomentSpec, table: &AmplitudeTable) -> Result<f64> {
    let len = m.len();
    if len % 2 != 0 {
        return Ok(0.0);
    }
    if len == 0 {
        return Ok(1.0);
    }
    // Recursive contraction of the first factor against each partner;
    // equivalent to summing over enumerate_pairings but without
    // materializing the (2k-1)!! matchings.
    fn contract(factors: &[(String, Sign)], active: &mut Vec<usize>, table: &AmplitudeTable) -> Result<f64> {
        if active.is_empty() {
            return Ok(1.0);
        }
        let first = active[0];
        let mut total = 0.0;
        for pos in 1..active.len() {
            let partner = active[pos];
            let idx = AmplitudeIndex::new(
                &factors[first].0,
                factors[first].1,
                &factors[partner].0,
                factors[partner].1,
            );
            let pair_value = table.get(&idx)?;
            if pair_value == 0.0 {
                continue;
            }
            let mut rest: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&x| x != first && x != partner)
                .collect();
            total += pair_value * contract(factors, &mut rest, table)?;
        }
        Ok(total)
    }
    let mut active: Vec<usize> = (0..len).collect();
    contract(&m.factors, &mut active, table)
}

/// Marker for entries that vanish identically (odd parity).
pub const ORDER_FORBIDDEN: i32 = i32::MAX;

/// Leading perturbative order (power of the coupling) of an entry:
/// flip_count(s) + flip_count(s') when even, the forbidden marker for
/// odd parity. The vacuum diagonal is order 0 with an order-2
/// correction.
pub fn leading_order_of_entry(s: &SpinPattern, s_prime: &SpinPattern) -> i32 {
    let total = s.flip_count() + s_prime.flip_count();
    if total % 2 != 0 {
        ORDER_FORBIDDEN
    } else {
        total as i32
    }
}

/// 2^N x 2^N reduced density matrix with leading-order bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedDensityMatrix {
    pub n_parties: usize,
    pub labels: Vec<String>,
    #[serde(with = "dense_matrix_serde")]
    pub matrix: DMatrix<Complex64>,
    /// leading_order[row][col]: power of the coupling, forbidden marker
    /// for parity zeros.
    pub leading_order: Vec<Vec<i32>>,
    pub normalized: bool,
}

mod dense_matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        /// Row-major (re, im) pairs.
        data: Vec<(f64, f64)>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push((m[(r, c)].re, m[(r, c)].im));
            }
        }
        serde::Serialize::serialize(
            &Dense {
                rows: m.nrows(),
                cols: m.ncols(),
                data,
            },
            s,
        )
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<Complex64>, D::Error> {
        let dense: Dense = serde::Deserialize::deserialize(d)?;
        if dense.data.len() != dense.rows * dense.cols {
            return Err(serde::de::Error::custom("dense matrix size mismatch"));
        }
        Ok(DMatrix::from_fn(dense.rows, dense.cols, |r, c| {
            let (re, im) = dense.data[r * dense.cols + c];
            Complex64::new(re, im)
        }))
    }
}

impl ReducedDensityMatrix {
    pub fn dimension(&self) -> usize {
        1 << self.n_parties
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().iter().sum()
    }

    /// Checks Hermiticity and the odd-parity zero pattern.
    pub fn check_structure(&self) -> Result<()> {
        let dim = self.dimension();
        let mut violations = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                let entry = self.matrix[(r, c)];
                if (entry - self.matrix[(c, r)].conj()).norm() > 0.0 {
                    violations.push(format!("Hermiticity broken at ({r},{c})"));
                }
                let parity = (r.count_ones() + c.count_ones()) % 2;
                if parity == 1 && entry.norm() != 0.0 {
                    violations.push(format!("parity zero broken at ({r},{c})"));
                }
            }
        }
        violations.truncate(8);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(WdError::validation(violations))
        }
    }
}

fn check_party_count(n: usize) -> Result<()> {
    if !(2..=MAX_PARTIES).contains(&n) {
        return Err(WdError::Domain(format!(
            "party count {n} outside supported range 2..={MAX_PARTIES}"
        )));
    }
    Ok(())
}

/// Moment for entry (s, s'): bra-side (column) lowering factors in
/// descending label order, then ket-side (row) raising factors in
/// ascending order. With this ordering only the sign families
/// {--, -+, ++} are ever requested from the table.
fn entry_moment(s: &SpinPattern, s_prime: &SpinPattern, labels: &[String]) -> MomentSpec {
    let mut factors = Vec::new();
    for label in s_prime.flipped(labels).into_iter().rev() {
        factors.push((label.to_string(), Sign::Minus));
    }
    for label in s.flipped(labels) {
        factors.push((label.to_string(), Sign::Plus));
    }
    MomentSpec::new(factors)
}

/// Phase (-i)^flips(row) (+i)^flips(col); real for even-parity entries.
fn entry_phase(row_flips: usize, col_flips: usize) -> Complex64 {
    let minus_i = Complex64::new(0.0, -1.0);
    let plus_i = Complex64::new(0.0, 1.0);
    minus_i.powu(row_flips as u32) * plus_i.powu(col_flips as u32)
}

/// Assembles the nonnormalized reduced density matrix at leading order
/// from a complete amplitude table.
pub fn assemble_rho(table: &AmplitudeTable) -> Result<ReducedDensityMatrix> {
    let n = table.labels.len();
    check_party_count(n)?;
    let labels = table.labels.clone();
    let dim = 1usize << n;
    let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut leading_order = vec![vec![ORDER_FORBIDDEN; dim]; dim];

    for r in 0..dim {
        let s = SpinPattern::from_index(r, n);
        for c in r..dim {
            let s_prime = SpinPattern::from_index(c, n);
            let order = leading_order_of_entry(&s, &s_prime);
            if order == ORDER_FORBIDDEN {
                continue;
            }
            let value = if r == 0 && c == 0 {
                // Unit vacuum term with its order-2 self-energy
                // correction 1 - sum_i d_ii^{-+}.
                let correction: f64 = table.self_energy.values().sum();
                Complex64::new(1.0 - correction, 0.0)
            } else {
                let moment = wick_moment(&entry_moment(&s, &s_prime, &labels), table)?;
                entry_phase(s.flip_count(), s_prime.flip_count()) * moment
            };
            matrix[(r, c)] = value;
            matrix[(c, r)] = value.conj();
            leading_order[r][c] = order;
            leading_order[c][r] = order;
        }
    }

    let rho = ReducedDensityMatrix {
        n_parties: n,
        labels,
        matrix,
        leading_order,
        normalized: false,
    };
    rho.check_structure()?;
    Ok(rho)
}

/// Per-detector spin-down attenuation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSpec {
    pub eta: Vec<f64>,
}

impl FilterSpec {
    pub fn uniform(eta: f64, n: usize) -> Self {
        FilterSpec {
            eta: vec![eta; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (i, &eta) in self.eta.iter().enumerate() {
            if !(eta > 0.0 && eta <= 1.0) {
                violations.push(format!("eta[{i}] = {eta} outside (0, 1]"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(WdError::validation(violations))
        }
    }
}

/// Attenuates the spin-down components: entry(s, s') is multiplied by
/// prod_i eta_i^(down_i(s) + down_i(s')).
pub fn apply_filter(rho: &ReducedDensityMatrix, filter: &FilterSpec) -> Result<ReducedDensityMatrix> {
    filter.validate()?;
    let n = rho.n_parties;
    if filter.eta.len() != n {
        return Err(WdError::validation(vec![format!(
            "filter covers {} detectors, state has {n}",
            filter.eta.len()
        )]));
    }
    let dim = rho.dimension();
    // Per-basis-state attenuation prod_i eta_i^{down_i}.
    let weights: Vec<f64> = (0..dim)
        .map(|idx| {
            (0..n)
                .map(|p| {
                    if (idx >> (n - 1 - p)) & 1 == 0 {
                        filter.eta[p]
                    } else {
                        1.0
                    }
                })
                .product()
        })
        .collect();
    let mut out = rho.clone();
    for r in 0..dim {
        for c in 0..dim {
            out.matrix[(r, c)] *= weights[r] * weights[c];
        }
    }
    Ok(out)
}

const POSITIVITY_TOL: f64 = 1e-8;

/// Divides by the trace and enforces the positivity tolerance:
/// eigenvalues below -1e-8 x (largest eigenvalue) are a hard error.
pub fn normalize(rho: &ReducedDensityMatrix) -> Result<ReducedDensityMatrix> {
    let trace = rho.trace();
    if trace.re <= 0.0 || trace.im.abs() > 1e-14 * trace.re.abs().max(1.0) {
        return Err(WdError::Domain(format!(
            "cannot normalize: trace = {trace}"
        )));
    }
    let mut out = rho.clone();
    out.matrix.scale_mut(1.0 / trace.re);
    out.normalized = true;
    let sym = (&out.matrix + out.matrix.adjoint()).scale(0.5);
    let eigen = sym.symmetric_eigen();
    let largest = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
    let most_negative = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.min(l));
    if most_negative < -POSITIVITY_TOL * largest {
        return Err(WdError::numerical(
            "normalized matrix violates positivity tolerance",
            -most_negative,
            POSITIVITY_TOL * largest,
        ));
    }
    Ok(out)
}

/// Diagnostics attached to a distillation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistillationDiagnostics {
    pub hub: String,
    pub eta: f64,
    /// max/min of |d_{i,hub}^{++}| across the non-hub detectors.
    pub hub_amplitude_spread: f64,
    pub dominance_ratio: f64,
    /// Exchange does not dominate: the asymptotic analysis of the
    /// protocol does not apply.
    pub outside_asymptotic_regime: bool,
    pub fidelity_to_target: f64,
    pub purity: f64,
}

/// Full protocol: auto filter from the hub exchange amplitudes, filter,
/// normalize, diagnose.
pub fn distillation_protocol(
    table: &AmplitudeTable,
    hub: &str,
) -> Result<(ReducedDensityMatrix, DistillationDiagnostics)> {
    let n = table.labels.len();
    check_party_count(n)?;
    let hub_index = table
        .labels
        .iter()
        .position(|l| l == hub)
        .ok_or_else(|| WdError::Domain(format!("hub '{hub}' is not a detector label")))?;

    let hub_values = table.hub_exchange_values(hub)?;
    let magnitudes: Vec<f64> = hub_values.iter().map(|(_, v)| v.abs()).collect();
    let min_mag = magnitudes.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let max_mag = magnitudes.iter().fold(0.0f64, |m, &v| m.max(v));
    if min_mag <= 0.0 {
        return Err(WdError::Domain(format!(
            "hub exchange amplitude vanishes; cannot set the filter (hub '{hub}')"
        )));
    }
    // eta^2 = geometric mean of the hub exchange amplitudes; the spread
    // records how far the equal-amplitude tuning is violated.
    let log_mean: f64 =
        magnitudes.iter().map(|v| v.ln()).sum::<f64>() / magnitudes.len() as f64;
    let eta_sq = log_mean.exp();
    let eta = eta_sq.sqrt();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(WdError::Domain(format!(
            "auto filter eta = {eta} outside (0, 1]; hub exchange amplitudes too large"
        )));
    }

    let rho = assemble_rho(table)?;
    let filtered = apply_filter(&rho, &FilterSpec::uniform(eta, n))?;
    let normalized = normalize(&filtered)?;

    let dominance_ratio = table.dominance_ratio(hub)?;
    let target = qinfo::target_distilled_state(n, hub_index)?;
    let fidelity = qinfo::fidelity(&normalized.matrix, &target)?;
    let purity = (&normalized.matrix * &normalized.matrix).trace().re;
    let diagnostics = DistillationDiagnostics {
        hub: hub.to_string(),
        eta,
        hub_amplitude_spread: max_mag / min_mag,
        dominance_ratio,
        outside_asymptotic_regime: dominance_ratio <= 1.0,
        fidelity_to_target: fidelity,
        purity,
    };
    Ok((normalized, diagnostics))
}

/// Truncated two-mode Fock-space oracle for Wick moments: each detector
/// factor is an explicit linear combination of two mode operators, and
/// moments are computed by direct operator algebra.
///
/// Phi^+ = sum_m c_m a_m + conj(c_m) a_m^dagger restricted to the truncated
/// space; Phi^- is its adjoint. The coefficient table fixes a Gaussian
/// state's two-point data; Wick's theorem must reproduce every moment.
pub mod fock_oracle {
    use super::*;

    /// Detector coupling coefficients to the two oscillator modes.
    #[derive(Debug, Clone)]
    pub struct FockDetector {
        pub label: String,
        /// (annihilation coefficient, creation coefficient) per mode:
        /// Phi^+ = sum_m ann_m a_m + cre_m a_m^dagger.
        pub ann: [Complex64; 2],
        pub cre: [Complex64; 2],
    }

    /// Dense operator on the truncated two-mode space (n_max+1)^2.
    fn dim(n_max: usize) -> usize {
        (n_max + 1) * (n_max + 1)
    }

    fn index(n0: usize, n1: usize, n_max: usize) -> usize {
        n0 * (n_max + 1) + n1
    }

    /// Matrix of a_mode on the truncated space.
    fn annihilation(mode: usize, n_max: usize) -> DMatrix<Complex64> {
        let d = dim(n_max);
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for n0 in 0..=n_max {
            for n1 in 0..=n_max {
                let occ = if mode == 0 { n0 } else { n1 };
                if occ == 0 {
                    continue;
                }
                let (t0, t1) = if mode == 0 { (n0 - 1, n1) } else { (n0, n1 - 1) };
                m[(index(t0, t1, n_max), index(n0, n1, n_max))] =
                    Complex64::new((occ as f64).sqrt(), 0.0);
            }
        }
        m
    }

    /// Phi^{sign} as a dense operator.
    pub fn field_operator(d: &FockDetector, sign: Sign, n_max: usize) -> DMatrix<Complex64> {
        let mut plus = DMatrix::from_element(dim(n_max), dim(n_max), Complex64::new(0.0, 0.0));
        for mode in 0..2 {
            let a = annihilation(mode, n_max);
            plus += a.scale(1.0) * d.ann[mode] + a.adjoint() * d.cre[mode];
        }
        match sign {
            Sign::Plus => plus,
            Sign::Minus => plus.adjoint(),
        }
    }

    /// Direct vacuum moment <0| Phi_1 ... Phi_k |0> on the truncated space.
    pub fn direct_moment(factors: &[(&FockDetector, Sign)], n_max: usize) -> Complex64 {
        let d = dim(n_max);
        let mut vec = DMatrix::from_element(d, 1, Complex64::new(0.0, 0.0));
        vec[(0, 0)] = Complex64::new(1.0, 0.0);
        // Apply right-to-left.
        for (det, sign) in factors.iter().rev() {
            vec = field_operator(det, *sign, n_max) * vec;
        }
        vec[(0, 0)]
    }

    /// Two-point amplitude table implied by the mode coefficients:
    /// <0| Phi_i^a Phi_j^b |0> in closed form (only the a a^dagger
    /// contraction survives on the vacuum).
    pub fn implied_table(detectors: &[FockDetector]) -> AmplitudeTable {
        let mut entries = BTreeMap::new();
        let mut labels = Vec::new();
        for di in detectors {
            labels.push(di.label.clone());
            for dj in detectors {
                for (alpha, beta) in [
                    (Sign::Minus, Sign::Minus),
                    (Sign::Minus, Sign::Plus),
                    (Sign::Plus, Sign::Plus),
                ] {
                    // left factor's annihilation-part coefficient times
                    // right factor's creation-part coefficient, summed
                    // over modes.
                    let left = |m: usize| match alpha {
                        Sign::Plus => di.ann[m],
                        Sign::Minus => di.cre[m].conj(),
                    };
                    let right = |m: usize| match beta {
                        Sign::Plus => dj.cre[m],
                        Sign::Minus => dj.ann[m].conj(),
                    };
                    let value: Complex64 = (0..2).map(|m| left(m) * right(m)).sum();
                    debug_assert!(value.im.abs() < 1e-12 * value.re.abs().max(1.0));
                    entries.insert(
                        AmplitudeIndex::new(&di.label, alpha, &dj.label, beta),
                        crate::amplitudes::AmplitudeEntry {
                            value: value.re,
                            error: 0.0,
                        },
                    );
                }
            }
        }
        let self_energy = detectors
            .iter()
            .map(|d| {
                let idx = AmplitudeIndex::new(&d.label, Sign::Minus, &d.label, Sign::Plus);
                (d.label.clone(), entries[&idx].value)
            })
            .collect();
        AmplitudeTable {
            labels,
            entries,
            self_energy,
            flags: crate::amplitudes::RegimeFlags {
                causally_disconnected: true,
                overlap_negligible: false,
                overlap_ratio: f64::INFINITY,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(n: usize, hub_value: f64, kappa: f64) -> AmplitudeTable {
        let labels: Vec<String> = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let hub = refs[n - 1];
        AmplitudeTable::synthetic_hub_dominant(&refs, hub, hub_value, kappa)
    }

    #[test]
    fn pairing_counts() {
        assert_eq!(enumerate_pairings(2).len(), 1);
        assert_eq!(enumerate_pairings(4).len(), 3);
        assert_eq!(enumerate_pairings(6).len(), 15);
        assert!(enumerate_pairings(3).is_empty());
        for matching in enumerate_pairings(6) {
            for &(p, q) in &matching {
                assert!(p < q);
            }
        }
    }

    #[test]
    fn wick_moment_hand_expansion() {
        // <Phi_A^- Phi_B^- Phi_C^- Phi_C^+> =
        //   d_AB^-- d_CC^-+ + d_AC^-- d_BC^-+ + d_AC^-+ d_BC^--
        // (pair order preserved). Build an arbitrary table to check.
        let mut table = synthetic(3, 0.01, 10.0);
        let set = |t: &mut AmplitudeTable, i: &str, a, j: &str, b, v: f64| {
            t.entries.insert(
                AmplitudeIndex::new(i, a, j, b),
                crate::amplitudes::AmplitudeEntry { value: v, error: 0.0 },
            );
        };
        set(&mut table, "A", Sign::Minus, "B", Sign::Minus, 2.0);
        set(&mut table, "C", Sign::Minus, "C", Sign::Plus, 3.0);
        set(&mut table, "A", Sign::Minus, "C", Sign::Minus, 5.0);
        set(&mut table, "B", Sign::Minus, "C", Sign::Plus, 7.0);
        set(&mut table, "A", Sign::Minus, "C", Sign::Plus, 11.0);
        set(&mut table, "B", Sign::Minus, "C", Sign::Minus, 13.0);
        let m = MomentSpec::new(vec![
            ("A".into(), Sign::Minus),
            ("B".into(), Sign::Minus),
            ("C".into(), Sign::Minus),
            ("C".into(), Sign::Plus),
        ]);
        let value = wick_moment(&m, &table).unwrap();
        assert_relative_eq!(value, 2.0 * 3.0 + 5.0 * 7.0 + 11.0 * 13.0);
        // Single pair.
        let single = MomentSpec::new(vec![("A".into(), Sign::Minus), ("A".into(), Sign::Plus)]);
        assert_relative_eq!(
            wick_moment(&single, &table).unwrap(),
            table.get(&AmplitudeIndex::new("A", Sign::Minus, "A", Sign::Plus)).unwrap()
        );
        // Odd length vanishes.
        let odd = MomentSpec::new(vec![("A".into(), Sign::Plus)]);
        assert_eq!(wick_moment(&odd, &table).unwrap(), 0.0);
    }

    #[test]
    fn wick_matches_fock_oracle_up_to_length_six() {
        use fock_oracle::*;
        let detectors = vec![
            FockDetector {
                label: "A".into(),
                ann: [Complex64::new(0.31, 0.0), Complex64::new(-0.11, 0.0)],
                cre: [Complex64::new(0.31, 0.0), Complex64::new(-0.11, 0.0)],
            },
            FockDetector {
                label: "B".into(),
                ann: [Complex64::new(0.17, 0.0), Complex64::new(0.23, 0.0)],
                cre: [Complex64::new(0.17, 0.0), Complex64::new(0.23, 0.0)],
            },
        ];
        let table = implied_table(&detectors);
        let n_max = 4;
        // All sign/detector sequences up to length 6 (step 2: odd vanish
        // trivially in both computations).
        let options: Vec<(usize, Sign)> = vec![
            (0, Sign::Minus),
            (0, Sign::Plus),
            (1, Sign::Minus),
            (1, Sign::Plus),
        ];
        for len in [2usize, 4, 6] {
            let combos = options.len().pow(len as u32);
            for code in 0..combos {
                let mut rest = code;
                let mut factors = Vec::new();
                for _ in 0..len {
                    factors.push(options[rest % options.len()]);
                    rest /= options.len();
                }
                let direct = direct_moment(
                    &factors
                        .iter()
                        .map(|&(d, s)| (&detectors[d], s))
                        .collect::<Vec<_>>(),
                    n_max,
                );
                let spec = MomentSpec::new(
                    factors
                        .iter()
                        .map(|&(d, s)| (detectors[d].label.clone(), s))
                        .collect(),
                );
                // The Wick path only stores {--, -+, ++}; reorder each
                // pair is not needed because the oracle table stores all
                // ordered families it can be asked for. Moments whose
                // pairings would need +- are reordered by symmetry of
                // the oracle coefficients, so add the +- family too.
                let value = wick_moment_with_pm(&spec, &table);
                assert!(
                    (direct.re - value).abs() < 1e-10 && direct.im.abs() < 1e-10,
                    "len {len} code {code}: direct {direct} vs wick {value}"
                );
            }
        }
    }

    // The physical assembler only ever requests {--, -+, ++}; generic
    // moments (as in the oracle sweep above) can also pair (+,-). Extend
    // lookups by the oracle's closed form for that family.
    fn wick_moment_with_pm(m: &MomentSpec, table: &AmplitudeTable) -> f64 {
        fn contract(factors: &[(String, Sign)], active: &[usize], table: &AmplitudeTable) -> f64 {
            if active.is_empty() {
                return 1.0;
            }
            let first = active[0];
            let mut total = 0.0;
            for pos in 1..active.len() {
                let partner = active[pos];
                let (fl, fs) = (&factors[first].0, factors[first].1);
                let (pl, ps) = (&factors[partner].0, factors[partner].1);
                let value = table
                    .get(&AmplitudeIndex::new(fl, fs, pl, ps))
                    .unwrap_or_else(|_| {
                        // +- family via the oracle's mode symmetry:
                        // real coefficients make it equal to -+ with the
                        // labels swapped.
                        table
                            .get(&AmplitudeIndex::new(pl, Sign::Minus, fl, Sign::Plus))
                            .unwrap()
                    });
                let rest: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&x| x != first && x != partner)
                    .collect();
                total += value * contract(factors, &rest, table);
            }
            total
        }
        let active: Vec<usize> = (0..m.len()).collect();
        if m.len() % 2 != 0 {
            return 0.0;
        }
        contract(&m.factors, &active, table)
    }

    #[test]
    fn leading_order_examples() {
        let vac = SpinPattern::from_index(0, 3);
        let du = SpinPattern::from_index(0b011, 3);
        let all = SpinPattern::from_index(0b111, 3);
        let single = SpinPattern::from_index(0b010, 3);
        let double = SpinPattern::from_index(0b110, 3);
        assert_eq!(leading_order_of_entry(&vac, &vac), 0);
        assert_eq!(leading_order_of_entry(&du, &vac), 2);
        assert_eq!(leading_order_of_entry(&all, &single), 4);
        assert_eq!(leading_order_of_entry(&double, &single), ORDER_FORBIDDEN);
        assert_eq!(leading_order_of_entry(&all, &vac), ORDER_FORBIDDEN);
    }

    #[test]
    fn assemble_zero_table_gives_vacuum() {
        let table = synthetic(3, 0.0, f64::INFINITY);
        let rho = assemble_rho(&table).unwrap();
        assert_relative_eq!(rho.matrix[(0, 0)].re, 1.0);
        for r in 0..8 {
            for c in 0..8 {
                if (r, c) != (0, 0) {
                    assert_eq!(rho.matrix[(r, c)].norm(), 0.0, "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn assemble_matches_hand_synthetic_pattern() {
        // Only hub exchange nonzero: nonzero entries are the vacuum
        // diagonal, vacuum <-> pair flips (-v), and the pair-flip block
        // (v^2).
        let v = 0.01;
        let table = synthetic(3, v, f64::INFINITY);
        let rho = assemble_rho(&table).unwrap();
        let pair_flips = [0b011usize, 0b101];
        assert_relative_eq!(rho.matrix[(0, 0)].re, 1.0);
        for &pf in &pair_flips {
            assert_relative_eq!(rho.matrix[(0, pf)].re, -v, epsilon = 1e-15);
            assert_relative_eq!(rho.matrix[(pf, 0)].re, -v, epsilon = 1e-15);
            for &pf2 in &pair_flips {
                assert_relative_eq!(rho.matrix[(pf, pf2)].re, v * v, epsilon = 1e-15);
            }
        }
        // Everything else zero.
        let mut nonzero = 0;
        for r in 0..8 {
            for c in 0..8 {
                if rho.matrix[(r, c)].norm() != 0.0 {
                    nonzero += 1;
                }
            }
        }
        assert_eq!(nonzero, 1 + 4 + 4);
        rho.check_structure().unwrap();
    }

    #[test]
    fn filter_exponent_and_composition_laws() {
        let table = synthetic(3, 0.01, 50.0);
        let rho = assemble_rho(&table).unwrap();
        let f1 = FilterSpec {
            eta: vec![0.9, 0.8, 0.7],
        };
        let filtered = apply_filter(&rho, &f1).unwrap();
        let n = 3;
        for r in 0..8usize {
            for c in 0..8usize {
                if rho.matrix[(r, c)].norm() == 0.0 {
                    assert_eq!(filtered.matrix[(r, c)].norm(), 0.0);
                    continue;
                }
                let mut expected = 1.0;
                for p in 0..n {
                    let downs = (1 - ((r >> (n - 1 - p)) & 1)) + (1 - ((c >> (n - 1 - p)) & 1));
                    expected *= f1.eta[p].powi(downs as i32);
                }
                let ratio = (filtered.matrix[(r, c)] / rho.matrix[(r, c)]).re;
                assert_relative_eq!(ratio, expected, epsilon = 1e-14);
            }
        }
        // Composition is exact; dyadic attenuations keep the float
        // products rounding-free so the comparison is bitwise.
        let d1 = FilterSpec {
            eta: vec![0.5, 0.25, 1.0],
        };
        let d2 = FilterSpec {
            eta: vec![0.5, 1.0, 0.25],
        };
        let sequential = apply_filter(&apply_filter(&rho, &d1).unwrap(), &d2).unwrap();
        let combined = apply_filter(
            &rho,
            &FilterSpec {
                eta: (0..3).map(|i| d1.eta[i] * d2.eta[i]).collect(),
            },
        )
        .unwrap();
        assert_eq!(
            (sequential.matrix - combined.matrix).norm(),
            0.0,
            "filter composition must be exact"
        );
        // Generic attenuations compose to rounding error.
        let f2 = FilterSpec {
            eta: vec![0.5, 0.6, 0.95],
        };
        let seq = apply_filter(&filtered, &f2).unwrap();
        let comb = apply_filter(
            &rho,
            &FilterSpec {
                eta: (0..3).map(|i| f1.eta[i] * f2.eta[i]).collect(),
            },
        )
        .unwrap();
        assert!((seq.matrix - &comb.matrix).norm() <= 1e-15 * comb.matrix.norm());
        // Identity filter.
        let id = apply_filter(&rho, &FilterSpec::uniform(1.0, 3)).unwrap();
        assert_eq!((id.matrix - &rho.matrix).norm(), 0.0);
        // Uniform eta exponents on N=3: vacuum diagonal eta^6, top
        // diagonal untouched.
        let uniform = apply_filter(&rho, &FilterSpec::uniform(0.5, 3)).unwrap();
        assert_relative_eq!(
            (uniform.matrix[(0, 0)] / rho.matrix[(0, 0)]).re,
            0.5f64.powi(6)
        );
        assert_relative_eq!((uniform.matrix[(7, 7)] / rho.matrix[(7, 7)]).re, 1.0);
        assert!(apply_filter(&rho, &FilterSpec::uniform(1.5, 3)).is_err());
    }

    #[test]
    fn pure_synthetic_limit_reproduces_exact_matrix() {
        let (rho, diag) = distillation_protocol(&synthetic(3, 0.01, f64::INFINITY), "C").unwrap();
        let third = 1.0 / 3.0;
        let support = [0b000usize, 0b011, 0b101];
        for &r in &support {
            for &c in &support {
                let expected = if r == 0 && c == 0 {
                    third
                } else if r == 0 || c == 0 {
                    -third
                } else {
                    third
                };
                assert!(
                    (rho.matrix[(r, c)].re - expected).abs() < 1e-12,
                    "({r},{c}): {} vs {expected}",
                    rho.matrix[(r, c)].re
                );
                assert!(rho.matrix[(r, c)].im.abs() < 1e-15);
            }
        }
        for r in 0..8 {
            for c in 0..8 {
                if !support.contains(&r) || !support.contains(&c) {
                    assert!(rho.matrix[(r, c)].norm() < 1e-15, "({r},{c})");
                }
            }
        }
        assert!((diag.fidelity_to_target - 1.0).abs() < 1e-12);
        assert!((diag.purity - 1.0).abs() < 1e-12);
        assert!(!diag.outside_asymptotic_regime);
    }

    #[test]
    fn distillation_limit_law_slope_minus_one() {
        let kappas = [1e1, 1e2, 1e3, 1e4];
        let mut infidelities = Vec::new();
        for &kappa in &kappas {
            let (_, diag) = distillation_protocol(&synthetic(3, 1e-9, kappa), "C").unwrap();
            infidelities.push(1.0 - diag.fidelity_to_target);
        }
        for w in infidelities.windows(2) {
            assert!(w[1] < w[0], "infidelity must decrease: {infidelities:?}");
        }
        let slope = (infidelities[3].ln() - infidelities[0].ln())
            / (kappas[3].ln() - kappas[0].ln());
        assert!(
            (slope + 1.0).abs() < 0.2,
            "log-log slope {slope} not within -1 +- 0.2 ({infidelities:?})"
        );
        // kappa = 1e3 fidelity threshold.
        assert!(1.0 - infidelities[2] >= 0.99);
    }

    #[test]
    fn distilled_purity_at_large_kappa() {
        let (rho, _) = distillation_protocol(&synthetic(3, 1e-9, 1e4), "C").unwrap();
        let sym = (&rho.matrix + rho.matrix.adjoint()).scale(0.5);
        let eigen = sym.symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        assert!(eigenvalues[0] >= 0.999, "largest {}", eigenvalues[0]);
        for &l in &eigenvalues[1..] {
            assert!(l.abs() <= 1e-3, "subleading eigenvalue {l}");
        }
    }

    #[test]
    fn n4_distillation_matches_target_state() {
        let (rho, diag) = distillation_protocol(&synthetic(4, 0.02, f64::INFINITY), "D").unwrap();
        let target = qinfo::target_distilled_state(4, 3).unwrap();
        let f = qinfo::fidelity(&rho.matrix, &target).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "fidelity {f}");
        assert!((diag.purity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermiticity_and_parity_for_random_tables() {
        // Generic synthetic tables at several N.
        for n in 2..=5 {
            let table = synthetic(n, 0.01, 7.0);
            let rho = assemble_rho(&table).unwrap();
            rho.check_structure().unwrap();
            // Parity structure also recorded in leading orders.
            for r in 0..rho.dimension() {
                for c in 0..rho.dimension() {
                    let parity = (r.count_ones() + c.count_ones()) % 2;
                    assert_eq!(
                        rho.leading_order[r][c] == ORDER_FORBIDDEN,
                        parity == 1,
                        "N={n} ({r},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn outside_asymptotic_regime_is_flagged() {
        let (_, diag) = distillation_protocol(&synthetic(3, 1e-9, 0.5), "C").unwrap();
        assert!(diag.outside_asymptotic_regime);
    }

    #[test]
    fn party_count_cap() {
        assert!(matches!(
            distillation_protocol(&synthetic(1, 0.01, 10.0), "A"),
            Err(WdError::Domain(_))
        ));
        let labels: Vec<String> = (0..9).map(|i| format!("D{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let table = AmplitudeTable::synthetic_hub_dominant(&refs, "D8", 0.01, 10.0);
        assert!(matches!(assemble_rho(&table), Err(WdError::Domain(_))));
    }

    #[test]
    fn serialization_round_trip() {
        let (rho, _) = distillation_protocol(&synthetic(3, 1e-9, 100.0), "C").unwrap();
        let json = serde_json::to_string(&rho).unwrap();
        let back: ReducedDensityMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!((back.matrix - &rho.matrix).norm(), 0.0);
        assert_eq!(back.leading_order, rho.leading_order);
        assert_eq!(back.normalized, rho.normalized);
    }
}
