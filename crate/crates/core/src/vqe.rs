//! The variational loop: prepare, simulate, measure, estimate, optimize.

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzEntry, AnsatzSpec};
use crate::circuit::ansatz_circuit;
use crate::error::{Error, Result};
use crate::estimator::{estimate, estimate_exact, measure, plan_measurements, EnergyEstimate, MeasurementSetting, ShotAllocation};
use crate::optimizer::{annealed_nelder_mead, nelder_mead, AnnealSchedule, Evaluation, NelderMeadOptions, OptimizerTrace};
use crate::pauli::{multiply, Axis, PauliString, PauliSum};
use crate::simulator::{run_density, run_statevector, seeded_rng, NoiseModel, QuantumState};
use crate::surface::{Sample, ScanGrid};

/// Energy of an ansatz state under a Hamiltonian, as an experiment would
/// report it.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    hamiltonian: PauliSum,
    ansatz: AnsatzSpec,
    settings: Vec<MeasurementSetting>,
    noise: NoiseModel,
    /// Shots per setting; `None` evaluates expectations exactly.
    shots: Option<u64>,
    allocation: ShotAllocation,
    seed: u64,
}

impl EnergyModel {
    pub fn new(hamiltonian: PauliSum, ansatz: AnsatzSpec, noise: NoiseModel, shots: Option<u64>, seed: u64) -> Result<Self> {
        ansatz.validate()?;
        noise.validate()?;
        if hamiltonian.min_qubits() > ansatz.n_qubits {
            return Err(Error::Dimension(format!(
                "Hamiltonian acts on {} qubits, ansatz on {}",
                hamiltonian.min_qubits(),
                ansatz.n_qubits
            )));
        }
        if shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        let settings = plan_measurements(&hamiltonian, ansatz.n_qubits)?;
        Ok(Self {
            hamiltonian,
            ansatz,
            settings,
            noise,
            shots,
            allocation: ShotAllocation::Equal,
            seed,
        })
    }

    pub fn with_allocation(mut self, allocation: ShotAllocation) -> Self {
        self.allocation = allocation;
        self
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.hamiltonian
    }

    pub fn ansatz(&self) -> &AnsatzSpec {
        &self.ansatz
    }

    pub fn settings(&self) -> &[MeasurementSetting] {
        &self.settings
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// State produced by the compiled circuit at `params`.
    pub fn prepare(&self, params: &[f64]) -> Result<QuantumState> {
        let c = ansatz_circuit(&self.ansatz, params)?;
        if self.noise.is_ideal() {
            run_statevector(&c, self.ansatz.reference)
        } else {
            run_density(&c, self.ansatz.reference, &self.noise)
        }
    }

    /// Estimate at `params`; `stream` selects the shot randomness so that
    /// every evaluation is reproducible from the seed and its index.
    pub fn evaluate(&self, params: &[f64], stream: u64) -> Result<EnergyEstimate> {
        let state = self.prepare(params)?;
        match self.shots {
            None => Ok(estimate_exact(&state, &self.hamiltonian, &self.settings)),
            Some(r) => {
                let shots = self.allocation.allocate(&self.settings, r);
                let counts = measure(&state, &self.settings, &shots, &mut seeded_rng(self.seed, stream))?;
                estimate(&self.hamiltonian, &self.settings, &counts)
            }
        }
    }

    pub fn evaluation(&self, params: &[f64], stream: u64) -> Result<Evaluation> {
        let e = self.evaluate(params, stream)?;
        Ok(Evaluation { value: e.value, std: e.std })
    }
}

/// Energies over a one- or two-dimensional grid of parameters. Point `k`
/// in storage order uses shot stream `k`.
pub fn scan(model: &EnergyModel, r_angstrom: f64, axes: Vec<Vec<f64>>) -> Result<(ScanGrid, Vec<EnergyEstimate>)> {
    if axes.len() != model.ansatz.n_params() {
        return Err(Error::Dimension(format!(
            "{}-dimensional grid for {} ansatz parameters",
            axes.len(),
            model.ansatz.n_params()
        )));
    }
    let mut grid = ScanGrid {
        r_angstrom,
        axes,
        energies: Vec::new(),
        stds: Vec::new(),
    };
    let coords = grid.coordinates();
    if coords.is_empty() || grid.axes.len() > 2 {
        grid.validate()?;
    }
    let mut estimates = Vec::with_capacity(coords.len());
    for (k, x) in coords.iter().enumerate() {
        let e = model.evaluate(x, k as u64)?;
        grid.energies.push(e.value);
        grid.stds.push(e.std);
        estimates.push(e);
    }
    grid.validate()?;
    Ok((grid, estimates))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerChoice {
    NelderMead { options: NelderMeadOptions },
    Annealed { options: NelderMeadOptions, schedule: AnnealSchedule },
}

impl Default for OptimizerChoice {
    fn default() -> Self {
        OptimizerChoice::NelderMead {
            options: NelderMeadOptions::default(),
        }
    }
}

/// Run the variational loop from `theta0`. Evaluation `i` uses shot stream `i`.
pub fn vqe_run(model: &EnergyModel, theta0: &[f64], choice: &OptimizerChoice) -> Result<OptimizerTrace> {
    if theta0.len() != model.ansatz.n_params() {
        return Err(Error::Dimension(format!(
            "{} starting values for {} parameters",
            theta0.len(),
            model.ansatz.n_params()
        )));
    }
    let cost = |x: &[f64], i: usize| model.evaluation(x, i as u64);
    match choice {
        OptimizerChoice::NelderMead { options } => nelder_mead(cost, theta0, options),
        OptimizerChoice::Annealed { options, schedule } => annealed_nelder_mead(cost, theta0, options, schedule, model.seed),
    }
}

/// Every evaluation of a run as a fit sample, without the annealing offset.
pub fn trace_samples(trace: &OptimizerTrace) -> Vec<Sample> {
    trace
        .entries
        .iter()
        .map(|e| Sample::new(e.params.clone(), e.value, e.std))
        .collect()
}

/// Conjugate the Hamiltonian and ansatz by `X` on every qubit that is `0` in
/// the reference, so the reference becomes all ones. Energies are unchanged
/// but the prepared states leave the subspace of fixed excitation number.
pub fn flipped_frame(hamiltonian: &PauliSum, ansatz: &AnsatzSpec) -> Result<(PauliSum, AnsatzSpec)> {
    let zeros: Vec<usize> = (0..ansatz.n_qubits).filter(|&q| !ansatz.reference.bit(q)).collect();
    let frame = PauliString::uniform(Axis::X, zeros.iter().copied());
    let h = hamiltonian.conjugate_frame(&frame);
    let mut reference = ansatz.reference;
    for &q in &zeros {
        reference = reference.flip(q);
    }
    let entries = ansatz
        .entries
        .iter()
        .map(|e| {
            // F G F with F Hermitian: a real sign times G.
            let (p1, fg) = multiply(&frame, &e.generator);
            let (p2, fgf) = multiply(&fg, &frame);
            let sign = (p1 * p2).to_complex().re;
            AnsatzEntry {
                generator: fgf,
                scale: e.scale * sign,
                ..e.clone()
            }
        })
        .collect();
    Ok((h, AnsatzSpec::new(reference, entries)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::DephasingMode;
    use crate::surface::{exact_ground_energy, sinusoid_fit};

    fn h2_like() -> PauliSum {
        PauliSum::from_real_terms(
            [("", -0.33), ("Z0", 0.39), ("Z1", -0.01), ("Z0 Z1", 0.01), ("X0 X1", 0.18), ("Y0 Y1", 0.18)]
                .iter()
                .map(|(s, c)| (s.parse().unwrap(), *c)),
        )
    }

    fn h2_ansatz() -> AnsatzSpec {
        AnsatzSpec::new(
            "01".parse().unwrap(),
            vec![AnsatzEntry {
                parameter: "t".into(),
                generator: "Y0 X1".parse().unwrap(),
                scale: -1.0,
                approximated: false,
            }],
        )
        .unwrap()
    }

    #[test]
    fn exact_model_matches_direct_state() {
        let m = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        let psi = h2_ansatz().state(&[0.4]).unwrap();
        let direct = h2_like().expectation(&psi).re;
        assert!((m.evaluate(&[0.4], 0).unwrap().value - direct).abs() < 1e-12);
    }

    #[test]
    fn noiseless_vqe_reaches_ground_energy() {
        let m = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        let t = vqe_run(&m, &[0.0], &OptimizerChoice::default()).unwrap();
        let exact = exact_ground_energy(&h2_like(), 2).unwrap();
        assert!((t.best_value - exact).abs() < 1e-6, "{} vs {exact}", t.best_value);
    }

    #[test]
    fn noiseless_scan_fit_reaches_ground_energy() {
        let m = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        let axis: Vec<f64> = (0..16).map(|k| -1.5 + 0.2 * k as f64).collect();
        let (grid, _) = scan(&m, 0.75, vec![axis]).unwrap();
        let f = sinusoid_fit(&grid.samples(), 2.0).unwrap();
        assert!((f.e_min - exact_ground_energy(&h2_like(), 2).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn shot_noise_runs_are_reproducible() {
        let m = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), Some(200), 42).unwrap();
        let a = vqe_run(&m, &[0.1], &OptimizerChoice::default()).unwrap();
        let b = vqe_run(&m, &[0.1], &OptimizerChoice::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.entries.iter().all(|e| e.std > 0.0));
        let direct = m.evaluate(&a.entries[3].params, 3).unwrap();
        assert_eq!(direct.value, a.entries[3].value);
    }

    #[test]
    fn scan_rejects_mismatched_grids() {
        let m = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        assert!(scan(&m, 0.7, vec![vec![0.0], vec![1.0]]).is_err());
        assert!(scan(&m, 0.7, vec![vec![]]).is_err());
        assert!(EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), Some(0), 0).is_err());
    }

    #[test]
    fn flipped_frame_keeps_noiseless_energies() {
        let (h, a) = flipped_frame(&h2_like(), &h2_ansatz()).unwrap();
        assert_eq!(a.reference.to_string(), "11");
        assert_eq!(a.entries[0].generator, h2_ansatz().entries[0].generator);
        let base = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        let flip = EnergyModel::new(h, a, NoiseModel::ideal(), None, 0).unwrap();
        for theta in [-1.0, 0.0, 0.3, 2.2] {
            let (x, y) = (base.evaluate(&[theta], 0).unwrap().value, flip.evaluate(&[theta], 0).unwrap().value);
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn flipped_frame_absorbs_generator_signs() {
        let spec = AnsatzSpec::new(
            "001".parse().unwrap(),
            vec![AnsatzEntry { parameter: "t".into(), generator: "Y1 X0".parse().unwrap(), scale: 1.0, approximated: false }],
        )
        .unwrap();
        let h = PauliSum::from_real_terms([("Z1".parse().unwrap(), 0.5), ("X0 X1".parse().unwrap(), 0.2)]);
        let (h2, s2) = flipped_frame(&h, &spec).unwrap();
        assert_eq!(s2.entries[0].scale, -1.0);
        for theta in [0.2, 1.1] {
            let a = h.expectation(&spec.state(&[theta]).unwrap()).re;
            let b = h2.expectation(&s2.state(&[theta]).unwrap()).re;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn collective_dephasing_only_hurts_the_flipped_frame() {
        let noise = NoiseModel::new(DephasingMode::Collective, 1e-3, 1.0).unwrap();
        let base = EnergyModel::new(h2_like(), h2_ansatz(), noise, None, 0).unwrap();
        let (h, a) = flipped_frame(&h2_like(), &h2_ansatz()).unwrap();
        let flip = EnergyModel::new(h.clone(), a.clone(), noise, None, 0).unwrap();
        let ideal = EnergyModel::new(h2_like(), h2_ansatz(), NoiseModel::ideal(), None, 0).unwrap();
        let theta = [0.1];
        let e0 = ideal.evaluate(&theta, 0).unwrap().value;
        let eb = base.evaluate(&theta, 0).unwrap().value;
        let ef = flip.evaluate(&theta, 0).unwrap().value;
        assert!((eb - e0).abs() < (ef - e0).abs());
    }
}
