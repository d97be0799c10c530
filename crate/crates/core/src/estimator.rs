//! Hamiltonian averaging from projective measurements in a few
//! qubitwise-commuting bases, with projection-noise propagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::measurement_prefix;
use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString, PauliSum};
use crate::simulator::{evolve, sample, Counts, QuantumState};

const HERMITIAN_TOL: f64 = 1e-10;

/// One measurement basis together with the terms it serves.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSetting {
    basis: Vec<Axis>,
    terms: Vec<(PauliString, f64)>,
}

impl MeasurementSetting {
    /// Per-qubit axes, indexed by qubit.
    pub fn basis(&self) -> &[Axis] {
        &self.basis
    }

    pub fn terms(&self) -> &[(PauliString, f64)] {
        &self.terms
    }

    /// Basis written like a bitstring, highest qubit leftmost.
    pub fn label(&self) -> String {
        self.basis.iter().rev().map(|a| a.symbol()).collect()
    }

    /// Sum of the served terms as an operator.
    pub fn observable(&self) -> PauliSum {
        PauliSum::from_real_terms(self.terms.iter().cloned())
    }

    fn weight(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).sum()
    }
}

fn compatible(partial: &[Option<Axis>], p: &PauliString) -> bool {
    p.ops().all(|(q, a)| partial[q].is_none_or(|b| b == a))
}

/// Greedy first-fit grouping of the non-identity terms of `h`, taken in
/// order of decreasing coefficient magnitude.
pub fn plan_measurements(h: &PauliSum, n_qubits: usize) -> Result<Vec<MeasurementSetting>> {
    if h.min_qubits() > n_qubits {
        return Err(Error::Dimension(format!(
            "Hamiltonian acts on {} qubits, register has {n_qubits}",
            h.min_qubits()
        )));
    }
    let mut terms: Vec<(PauliString, f64)> = h
        .real_terms(HERMITIAN_TOL)?
        .into_iter()
        .filter(|(p, _)| !p.is_identity())
        .collect();
    terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));

    let mut groups: Vec<(Vec<Option<Axis>>, Vec<(PauliString, f64)>)> = Vec::new();
    for (p, c) in terms {
        let slot = groups.iter().position(|(partial, _)| compatible(partial, &p));
        let idx = slot.unwrap_or_else(|| {
            groups.push((vec![None; n_qubits], Vec::new()));
            groups.len() - 1
        });
        let (partial, served) = &mut groups[idx];
        for (q, a) in p.ops() {
            partial[q] = Some(a);
        }
        served.push((p, c));
    }
    Ok(groups
        .into_iter()
        .map(|(partial, terms)| MeasurementSetting {
            basis: partial.into_iter().map(|a| a.unwrap_or(Axis::Z)).collect(),
            terms,
        })
        .collect())
}

/// How shots are divided between settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotAllocation {
    /// The same number of shots for every setting.
    #[default]
    Equal,
    /// The same total, split in proportion to each setting's summed |coefficient|.
    Weighted,
}

impl ShotAllocation {
    pub fn allocate(self, settings: &[MeasurementSetting], shots_per_setting: u64) -> Vec<u64> {
        match self {
            ShotAllocation::Equal => vec![shots_per_setting; settings.len()],
            ShotAllocation::Weighted => {
                let total = shots_per_setting as f64 * settings.len() as f64;
                let norm: f64 = settings.iter().map(MeasurementSetting::weight).sum();
                settings
                    .iter()
                    .map(|s| {
                        if norm > 0.0 {
                            ((total * s.weight() / norm).round() as u64).max(1)
                        } else {
                            shots_per_setting.max(1)
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub pauli: PauliString,
    pub coeff: f64,
    pub expectation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// One-sigma projection noise; zero for exact evaluation.
    pub std: f64,
    pub terms: Vec<TermValue>,
    /// Shots taken in each setting; empty for exact evaluation.
    pub shots: Vec<u64>,
}

/// Rotate `state` into each setting's basis and sample it.
pub fn measure<R: Rng + ?Sized>(
    state: &QuantumState,
    settings: &[MeasurementSetting],
    shots: &[u64],
    rng: &mut R,
) -> Result<Vec<Counts>> {
    if shots.len() != settings.len() {
        return Err(Error::Dimension(format!(
            "{} shot counts for {} settings",
            shots.len(),
            settings.len()
        )));
    }
    settings
        .iter()
        .zip(shots)
        .map(|(s, &r)| {
            let mut rotated = state.clone();
            evolve(&mut rotated, &measurement_prefix(&s.basis), None)?;
            sample(&rotated, r, rng)
        })
        .collect()
}

fn parity(index: usize, mask: usize) -> f64 {
    if (index & mask).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn support_mask(p: &PauliString) -> usize {
    p.support().iter().map(|&q| 1usize << q).sum()
}

/// Energy from counts, one table per setting in plan order.
pub fn estimate(h: &PauliSum, settings: &[MeasurementSetting], counts: &[Counts]) -> Result<EnergyEstimate> {
    if counts.len() < settings.len() {
        let missing = &settings[counts.len()];
        return Err(Error::MissingSetting(missing.label()));
    }
    let mut value = h.constant_term();
    let mut variance = 0.0;
    let mut terms = Vec::new();
    let mut shots = Vec::with_capacity(settings.len());
    for (s, table) in settings.iter().zip(counts) {
        let r = table.total();
        if r == 0 {
            return Err(Error::MissingSetting(s.label()));
        }
        let masks: Vec<usize> = s.terms.iter().map(|(p, _)| support_mask(p)).collect();
        let mut sums = vec![0.0; s.terms.len()];
        let (mut y_sum, mut y_sq) = (0.0, 0.0);
        for (index, n) in table.iter() {
            let n = n as f64;
            let mut y = 0.0;
            for (k, (&m, (_, c))) in masks.iter().zip(&s.terms).enumerate() {
                let v = parity(index, m);
                sums[k] += n * v;
                y += c * v;
            }
            y_sum += n * y;
            y_sq += n * y * y;
        }
        let rf = r as f64;
        let mean = y_sum / rf;
        // Population variance of the per-shot energy: includes the
        // covariances of terms read from the same shots.
        variance += (y_sq / rf - mean * mean).max(0.0) / rf;
        value += mean;
        for ((p, c), total) in s.terms.iter().zip(sums) {
            terms.push(TermValue {
                pauli: p.clone(),
                coeff: *c,
                expectation: total / rf,
            });
        }
        shots.push(r);
    }
    Ok(EnergyEstimate {
        value,
        std: variance.sqrt(),
        terms,
        shots,
    })
}

/// Infinite-shot estimate straight from the state.
pub fn estimate_exact(state: &QuantumState, h: &PauliSum, settings: &[MeasurementSetting]) -> EnergyEstimate {
    let mut value = h.constant_term();
    let mut terms = Vec::new();
    for s in settings {
        for (p, c) in &s.terms {
            let e = state.expectation(&PauliSum::from(p.clone()));
            value += c * e;
            terms.push(TermValue {
                pauli: p.clone(),
                coeff: *c,
                expectation: e,
            });
        }
    }
    EnergyEstimate {
        value,
        std: 0.0,
        terms,
        shots: Vec::new(),
    }
}

/// Projection-noise standard deviation the estimator would report on
/// average for `state` with the given shots per setting.
pub fn predicted_std(state: &QuantumState, settings: &[MeasurementSetting], shots: &[u64]) -> f64 {
    settings
        .iter()
        .zip(shots)
        .map(|(s, &r)| {
            let o = s.observable();
            let mean = state.expectation(&o);
            let sq = state.expectation(&(&o * &o));
            (sq - mean * mean).max(0.0) / r as f64
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest repetition count whose propagated one-sigma error is at most
/// `target`, treating terms as independent with variance `1 - e^2`.
pub fn shots_for_accuracy(terms: &[(f64, f64)], target: f64) -> Result<u64> {
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!("target accuracy must be positive, got {target}")));
    }
    let var: f64 = terms.iter().map(|(c, e)| c * c * (1.0 - e * e).max(0.0)).sum();
    Ok(((var / (target * target)).ceil() as u64).max(1))
}
