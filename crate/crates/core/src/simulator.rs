//! Statevector and density-matrix execution with dephasing and
//! depolarizing noise, plus projective sampling.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::basis::BasisState;
use crate::circuit::{Circuit, Gate, GateClass};
use crate::error::{Error, Result};
use crate::pauli::{PauliSum, DENSE_LIMIT};

/// Largest register the density-matrix backend accepts.
pub const DENSITY_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure { n_qubits: usize, amplitudes: Vec<Complex64> },
    Mixed { n_qubits: usize, rho: DMatrix<Complex64> },
}

impl QuantumState {
    pub fn basis(state: BasisState) -> Result<Self> {
        let n = state.n_qubits();
        check_limit(n, DENSE_LIMIT)?;
        let mut amplitudes = vec![Complex64::default(); 1 << n];
        amplitudes[state.index()] = Complex64::new(1.0, 0.0);
        Ok(QuantumState::Pure { n_qubits: n, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = amplitudes.len().trailing_zeros() as usize;
        if amplitudes.len() != 1 << n {
            return Err(Error::Dimension(format!("{} amplitudes is not a power of two", amplitudes.len())));
        }
        check_limit(n, DENSE_LIMIT)?;
        Ok(QuantumState::Pure { n_qubits: n, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure { n_qubits, .. } | QuantumState::Mixed { n_qubits, .. } => *n_qubits,
        }
    }

    /// Density matrix form; fails beyond the density limit.
    pub fn to_density(&self) -> Result<Self> {
        match self {
            QuantumState::Mixed { .. } => Ok(self.clone()),
            QuantumState::Pure { n_qubits, amplitudes } => {
                check_limit(*n_qubits, DENSITY_LIMIT)?;
                let v = nalgebra::DVector::from_column_slice(amplitudes);
                Ok(QuantumState::Mixed {
                    n_qubits: *n_qubits,
                    rho: &v * v.adjoint(),
                })
            }
        }
    }

    pub fn density_matrix(&self) -> Result<DMatrix<Complex64>> {
        match self.to_density()? {
            QuantumState::Mixed { rho, .. } => Ok(rho),
            QuantumState::Pure { .. } => unreachable!(),
        }
    }

    /// Computational-basis probabilities, clipped at zero and renormalized.
    pub fn probabilities(&self) -> Vec<f64> {
        let raw: Vec<f64> = match self {
            QuantumState::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            QuantumState::Mixed { rho, .. } => (0..rho.nrows()).map(|i| rho[(i, i)].re.max(0.0)).collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).sum(),
            QuantumState::Mixed { rho, .. } => rho.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            QuantumState::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().powi(2),
            QuantumState::Mixed { rho, .. } => rho.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// `<psi|rho|psi>` for a pure target.
    pub fn fidelity_with(&self, target: &[Complex64]) -> f64 {
        match self {
            QuantumState::Pure { amplitudes, .. } => {
                let o: Complex64 = target.iter().zip(amplitudes).map(|(t, a)| t.conj() * a).sum();
                o.norm_sqr()
            }
            QuantumState::Mixed { rho, .. } => {
                let t = nalgebra::DVector::from_column_slice(target);
                (t.adjoint() * rho * &t)[(0, 0)].re
            }
        }
    }

    /// `Tr(rho h)`.
    pub fn expectation(&self, h: &PauliSum) -> f64 {
        match self {
            QuantumState::Pure { amplitudes, .. } => h.expectation(amplitudes).re,
            QuantumState::Mixed { rho, .. } => {
                let mut total = Complex64::default();
                for (p, &c) in h.iter() {
                    let mut tr = Complex64::default();
                    for i in 0..rho.nrows() {
                        let (ph, j) = p.apply_index(i);
                        tr += ph * rho[(i, j)];
                    }
                    total += c * tr;
                }
                total.re
            }
        }
    }

    fn apply_gate(&mut self, gate: &Gate) {
        match self {
            QuantumState::Pure { n_qubits, amplitudes } => apply_gate_vec(gate, amplitudes, *n_qubits),
            QuantumState::Mixed { n_qubits, rho } => {
                let n = *n_qubits;
                for mut col in rho.column_iter_mut() {
                    apply_gate_vec(gate, col.as_mut_slice(), n);
                }
                rho.adjoint_mut();
                for mut col in rho.column_iter_mut() {
                    apply_gate_vec(gate, col.as_mut_slice(), n);
                }
                rho.adjoint_mut();
            }
        }
    }

    fn apply_global_phase(&mut self, phase: f64) {
        if let QuantumState::Pure { amplitudes, .. } = self {
            let f = Complex64::from_polar(1.0, phase);
            amplitudes.iter_mut().for_each(|a| *a *= f);
        }
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::DenseLimit { n_qubits: n, limit })
    } else {
        Ok(())
    }
}

fn apply_single(m: [[Complex64; 2]; 2], qubit: usize, v: &mut [Complex64]) {
    let bit = 1usize << qubit;
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn hadamard(qubit: usize, v: &mut [Complex64]) {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    apply_single([[h, h], [h, -h]], qubit, v);
}

/// `exp(-i phi/2 sum_{i<j in S} X_i X_j)`: in the Hadamard frame the
/// coupling is `((sum Z)^2 - k) / 2` with `sum Z = k - 2w`.
fn apply_ms(qubits: &[usize], angle: f64, v: &mut [Complex64]) {
    let k = qubits.len() as i64;
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    let phases: Vec<Complex64> = (0..=k)
        .map(|w| {
            let m = (k - 2 * w) as f64;
            Complex64::from_polar(1.0, -angle / 2.0 * (m * m - k as f64) / 2.0)
        })
        .collect();
    for &q in qubits {
        hadamard(q, v);
    }
    for (i, a) in v.iter_mut().enumerate() {
        *a *= phases[(i & mask).count_ones() as usize];
    }
    for &q in qubits {
        hadamard(q, v);
    }
}

fn apply_gate_vec(gate: &Gate, v: &mut [Complex64], n_qubits: usize) {
    match gate {
        Gate::GlobalMs { angle } | Gate::SubsetMs { angle, .. } => apply_ms(&gate.qubits(n_qubits), *angle, v),
        _ => {
            let m = gate.single_qubit_matrix().expect("single-qubit gate");
            for q in gate.qubits(n_qubits) {
                apply_single(m, q, v);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DephasingMode {
    #[default]
    Off,
    /// Independent dephasing of every qubit.
    Iid,
    /// One random `Z` rotation shared by all qubits.
    Collective,
}

/// Gate durations in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDurations {
    pub entangling: f64,
    pub global_rotation: f64,
    pub addressed_rotation: f64,
}

impl Default for GateDurations {
    fn default() -> Self {
        Self {
            entangling: 100e-6,
            global_rotation: 10e-6,
            addressed_rotation: 20e-6,
        }
    }
}

impl GateDurations {
    pub fn of(&self, class: GateClass) -> f64 {
        match class {
            GateClass::Entangling => self.entangling,
            GateClass::GlobalRotation => self.global_rotation,
            GateClass::AddressedRotation => self.addressed_rotation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: DephasingMode,
    /// Coherence time in seconds.
    pub t2: f64,
    /// Fidelity of an entangling gate; 1 disables depolarizing noise.
    pub ms_fidelity: f64,
    pub durations: GateDurations,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            mode: DephasingMode::Off,
            t2: f64::INFINITY,
            ms_fidelity: 1.0,
            durations: GateDurations::default(),
        }
    }

    pub fn new(mode: DephasingMode, t2: f64, ms_fidelity: f64) -> Result<Self> {
        let m = Self {
            mode,
            t2,
            ms_fidelity,
            durations: GateDurations::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_ideal(&self) -> bool {
        (self.mode == DephasingMode::Off || self.t2.is_infinite()) && self.ms_fidelity == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.t2.is_nan() || self.t2 <= 0.0 {
            return Err(Error::InvalidNoise(format!("T2 must be positive, got {}", self.t2)));
        }
        if !(self.ms_fidelity > 0.0 && self.ms_fidelity <= 1.0) {
            return Err(Error::InvalidNoise(format!(
                "MS fidelity must lie in (0, 1], got {}",
                self.ms_fidelity
            )));
        }
        let d = self.durations;
        if [d.entangling, d.global_rotation, d.addressed_rotation].iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidNoise("gate durations must be finite and non-negative".into()));
        }
        if self.depolarizing_probability(2) >= 1.0 {
            return Err(Error::InvalidNoise(format!(
                "MS fidelity {} gives an error probability of at least 1",
                self.ms_fidelity
            )));
        }
        if self.mode == DephasingMode::Collective {
            for class in [GateClass::Entangling, GateClass::GlobalRotation, GateClass::AddressedRotation] {
                if self.dephasing_probability(self.durations.of(class)) >= 0.5 {
                    return Err(Error::InvalidNoise(
                        "collective dephasing needs gate durations well below T2".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `p_d = 1 - exp(-T_g / T2)`.
    pub fn dephasing_probability(&self, duration: f64) -> f64 {
        1.0 - (-duration / self.t2).exp()
    }

    /// Total Pauli-error probability of a `k`-qubit entangling gate:
    /// `F = 1 - p (4^k - 2) / (4^k - 1)`.
    pub fn depolarizing_probability(&self, k: usize) -> f64 {
        let d2 = 4f64.powi(k as i32);
        (1.0 - self.ms_fidelity) * (d2 - 1.0) / (d2 - 2.0)
    }
}

/// Kraus operators of the single-qubit dephasing channel.
pub fn dephasing_kraus(p: f64) -> Vec<DMatrix<Complex64>> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let a = (1.0 - p).sqrt();
    let b = p.sqrt();
    vec![
        DMatrix::from_row_slice(2, 2, &[c(a), c(0.0), c(0.0), c(a)]),
        DMatrix::from_row_slice(2, 2, &[c(b), c(0.0), c(0.0), c(-b)]),
    ]
}

/// Kraus operators of the `k`-qubit depolarizing channel with every
/// non-identity Pauli at weight `p / (4^k - 1)`.
pub fn depolarizing_kraus(p: f64, k: usize) -> Result<Vec<DMatrix<Complex64>>> {
    use crate::pauli::{Axis, PauliString};
    let n_err = 4usize.pow(k as u32) - 1;
    let mut out = Vec::with_capacity(n_err + 1);
    for code in 0..=n_err {
        let p_string = PauliString::from_ops((0..k).filter_map(|q| match (code >> (2 * q)) & 3 {
            1 => Some((q, Axis::X)),
            2 => Some((q, Axis::Y)),
            3 => Some((q, Axis::Z)),
            _ => None,
        }));
        let w = if code == 0 { 1.0 - p } else { p / n_err as f64 };
        out.push(p_string.to_matrix(k)? * Complex64::new(w.sqrt(), 0.0));
    }
    Ok(out)
}

fn dephase_iid(rho: &mut DMatrix<Complex64>, p: f64) {
    let f = 1.0 - 2.0 * p;
    let powers: Vec<f64> = (0..=64).map(|k| f.powi(k)).collect();
    let dim = rho.nrows();
    for j in 0..dim {
        for i in 0..dim {
            rho[(i, j)] *= powers[(i ^ j).count_ones() as usize];
        }
    }
}

/// Random global rotation `exp(-i phi sum Z / 2)` averaged over Gaussian
/// `phi` with variance `s2`: coherences decay as `exp(-s2 (w_i - w_j)^2 / 2)`.
/// The variance is matched so a single qubit loses the same coherence as
/// under the independent channel, `exp(-s2/2) = 1 - 2 p_d`.
fn dephase_collective(rho: &mut DMatrix<Complex64>, p: f64) {
    let f = 1.0 - 2.0 * p;
    let dim = rho.nrows();
    for j in 0..dim {
        let wj = j.count_ones() as i32;
        for i in 0..dim {
            let d = i.count_ones() as i32 - wj;
            rho[(i, j)] *= f.powi(d * d);
        }
    }
}

fn depolarize(rho: &mut DMatrix<Complex64>, qubits: &[usize], p: f64) {
    let k = qubits.len();
    let d2 = 4f64.powi(k as i32);
    let mix = p * d2 / (d2 - 1.0);
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    let dim = rho.nrows();
    let sub: Vec<usize> = (0..1usize << k)
        .map(|s| qubits.iter().enumerate().filter(|(b, _)| s >> b & 1 == 1).map(|(_, &q)| 1 << q).sum())
        .collect();
    // Tr_S(rho) on the complement, indexed by full indices with S bits cleared.
    let mut reduced = DMatrix::<Complex64>::zeros(dim, dim);
    for j in (0..dim).filter(|j| j & mask == 0) {
        for i in (0..dim).filter(|i| i & mask == 0) {
            reduced[(i, j)] = sub.iter().map(|&s| rho[(i | s, j | s)]).sum::<Complex64>() / (1usize << k) as f64;
        }
    }
    for j in 0..dim {
        for i in 0..dim {
            let mixed = if i & mask == j & mask {
                reduced[(i & !mask, j & !mask)]
            } else {
                Complex64::default()
            };
            rho[(i, j)] = rho[(i, j)] * (1.0 - mix) + mixed * mix;
        }
    }
}

fn apply_noise_after(rho: &mut DMatrix<Complex64>, gate: &Gate, n_qubits: usize, noise: &NoiseModel) {
    if noise.mode != DephasingMode::Off {
        let p = noise.dephasing_probability(noise.durations.of(gate.class()));
        if p > 0.0 {
            match noise.mode {
                DephasingMode::Iid => dephase_iid(rho, p),
                DephasingMode::Collective => dephase_collective(rho, p),
                DephasingMode::Off => {}
            }
        }
    }
    if gate.is_entangling() && noise.ms_fidelity < 1.0 {
        let qubits = gate.qubits(n_qubits);
        depolarize(rho, &qubits, noise.depolarizing_probability(qubits.len()));
    }
}

/// Noiseless evolution of a basis state.
pub fn run_statevector(c: &Circuit, input: BasisState) -> Result<QuantumState> {
    check_register(c, input)?;
    let mut state = QuantumState::basis(input)?;
    evolve(&mut state, c, None)?;
    if let QuantumState::Pure { amplitudes, .. } = &mut state {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            amplitudes.iter_mut().for_each(|a| *a /= norm);
        }
    }
    Ok(state)
}

/// Density-matrix evolution with noise applied after every gate.
pub fn run_density(c: &Circuit, input: BasisState, noise: &NoiseModel) -> Result<QuantumState> {
    check_register(c, input)?;
    noise.validate()?;
    check_limit(input.n_qubits(), DENSITY_LIMIT)?;
    let mut state = QuantumState::basis(input)?.to_density()?;
    evolve(&mut state, c, Some(noise))?;
    Ok(state)
}

fn check_register(c: &Circuit, input: BasisState) -> Result<()> {
    if c.n_qubits() != input.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit circuit on a {}-qubit input",
            c.n_qubits(),
            input.n_qubits()
        )));
    }
    Ok(())
}

/// Apply `c` to `state`; noise is only applied to density matrices.
pub fn evolve(state: &mut QuantumState, c: &Circuit, noise: Option<&NoiseModel>) -> Result<()> {
    if c.n_qubits() != state.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit circuit on a {}-qubit state",
            c.n_qubits(),
            state.n_qubits()
        )));
    }
    let noise = noise.filter(|m| !m.is_ideal());
    if noise.is_some() && matches!(state, QuantumState::Pure { .. }) {
        *state = state.to_density()?;
    }
    for g in c.gates() {
        state.apply_gate(g);
        if let (Some(model), QuantumState::Mixed { n_qubits, rho }) = (noise, &mut *state) {
            apply_noise_after(rho, g, *n_qubits, model);
        }
    }
    state.apply_global_phase(c.global_phase());
    Ok(())
}

/// Measurement outcomes keyed by basis index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    n_qubits: usize,
    counts: BTreeMap<usize, u64>,
}

impl Counts {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            counts: BTreeMap::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add(&mut self, index: usize, count: u64) {
        if count > 0 {
            *self.counts.entry(index).or_default() += count;
        }
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    /// Keyed by bitstring, highest qubit leftmost.
    pub fn to_bitstrings(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&i, &c)| {
                let b = BasisState::new(i as u64, self.n_qubits).expect("index fits register");
                (b.to_string(), c)
            })
            .collect()
    }

    pub fn from_bitstrings(n_qubits: usize, map: &BTreeMap<String, u64>) -> Result<Self> {
        let mut out = Counts::new(n_qubits);
        for (k, &v) in map {
            let b: BasisState = k.parse()?;
            if b.n_qubits() != n_qubits {
                return Err(Error::ParseBasisState(k.clone()));
            }
            out.add(b.index(), v);
        }
        Ok(out)
    }
}

/// Seeded generator for one evaluation; `stream` separates independent uses
/// of the same seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial sample of `shots` projective measurements in the `Z` basis.
pub fn sample<R: Rng + ?Sized>(state: &QuantumState, shots: u64, rng: &mut R) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    Ok(sample_probabilities(&state.probabilities(), state.n_qubits(), shots, rng))
}

/// Multinomial draw by successive conditional binomials.
pub fn sample_probabilities<R: Rng + ?Sized>(probs: &[f64], n_qubits: usize, shots: u64, rng: &mut R) -> Counts {
    let mut counts = Counts::new(n_qubits);
    let mut remaining = shots;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts.add(i, k);
        remaining -= k;
        mass -= p;
    }
    if remaining > 0 {
        // Rounding left some mass unassigned; give it to the likeliest outcome.
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        counts.add(best, remaining);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{compile_pauli_exponential, unitary_of, RotTarget};
    use crate::pauli::PauliString;
    use proptest::prelude::*;
    use rand::Rng;

    fn basis(s: &str) -> BasisState {
        s.parse().unwrap()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn bell_circuit() -> Circuit {
        let mut c = Circuit::new(2);
        c.push(Gate::GlobalMs { angle: std::f64::consts::FRAC_PI_2 }).unwrap();
        c
    }

    fn apply_kraus(rho: &DMatrix<Complex64>, ks: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
        ks.iter().map(|k| k * rho * k.adjoint()).fold(DMatrix::zeros(rho.nrows(), rho.ncols()), |a, b| a + b)
    }

    fn embed(k: &DMatrix<Complex64>, qubit: usize, n: usize) -> DMatrix<Complex64> {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for q in (0..n).rev() {
            out = out.kronecker(if q == qubit { k } else { &id });
        }
        out
    }

    fn random_density(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = seeded_rng(seed, 0);
        let dim = 1 << n;
        let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn empty_circuit_keeps_basis_state() {
        let s = run_statevector(&Circuit::new(2), basis("01")).unwrap();
        assert_eq!(s.probabilities(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn ms_on_11_gives_full_parity_contrast() {
        let s = run_statevector(&bell_circuit(), basis("11")).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[3] - 0.5).abs() < 1e-12);
        let parity = |phi: f64| {
            let mut c = bell_circuit();
            c.push(Gate::RotXy { target: RotTarget::All, angle: std::f64::consts::FRAC_PI_2, phase: phi }).unwrap();
            let p = run_statevector(&c, basis("11")).unwrap().probabilities();
            p[0] + p[3] - p[1] - p[2]
        };
        let samples: Vec<f64> = (0..16).map(|k| parity(k as f64 * std::f64::consts::TAU / 16.0)).collect();
        let contrast = (samples.iter().cloned().fold(f64::MIN, f64::max) - samples.iter().cloned().fold(f64::MAX, f64::min)) / 2.0;
        assert!((contrast - 1.0).abs() < 1e-10);
    }

    #[test]
    fn statevector_matches_dense_unitary() {
        let mut c = compile_pauli_exponential(0.7, &"X0 Y1 Z2".parse().unwrap(), 3).unwrap();
        c.append(&compile_pauli_exponential(-0.3, &"Y0 Y2".parse().unwrap(), 3).unwrap()).unwrap();
        c.push(Gate::RotXy { target: RotTarget::All, angle: 0.4, phase: 0.9 }).unwrap();
        c.push(Gate::AddressedPi { qubit: 1 }).unwrap();
        let u = unitary_of(&c).unwrap();
        let s = run_statevector(&c, basis("101")).unwrap();
        let QuantumState::Pure { amplitudes, .. } = s else { panic!() };
        for (i, a) in amplitudes.iter().enumerate() {
            assert!((a - u[(i, 0b101)]).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_off_density_equals_projector() {
        let c = compile_pauli_exponential(0.7, &"X0 Y1 Z2".parse().unwrap(), 3).unwrap();
        let psi = run_statevector(&c, basis("011")).unwrap();
        let rho = run_density(&c, basis("011"), &NoiseModel::ideal()).unwrap();
        assert!(max_diff(&rho.density_matrix().unwrap(), &psi.density_matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn dephasing_probability_examples() {
        let m = NoiseModel::new(DephasingMode::Iid, 40e-3, 1.0).unwrap();
        assert!((m.dephasing_probability(20e-3) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((m.dephasing_probability(20e-3) - 0.3935).abs() < 1e-4);
        let f = NoiseModel::new(DephasingMode::Off, 1.0, 0.99).unwrap();
        assert!((f.depolarizing_probability(2) - 0.01 * 15.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_noise_models_are_rejected() {
        assert!(NoiseModel::new(DephasingMode::Iid, 0.0, 1.0).is_err());
        assert!(NoiseModel::new(DephasingMode::Iid, 1.0, 1.2).is_err());
        assert!(NoiseModel::new(DephasingMode::Iid, 1.0, 0.0).is_err());
        assert!(NoiseModel::new(DephasingMode::Iid, 1.0, 0.05).is_err());
        assert!(NoiseModel::new(DephasingMode::Collective, 1e-5, 1.0).is_err());
    }

    #[test]
    fn kraus_sets_are_complete() {
        for p in [0.0, 0.1, 0.45] {
            let ks = dephasing_kraus(p);
            let s = ks.iter().map(|k| k.adjoint() * k).fold(DMatrix::zeros(2, 2), |a, b| a + b);
            assert!(max_diff(&s, &DMatrix::identity(2, 2)) < 1e-12);
        }
        for k in [1, 2, 3] {
            let ks = depolarizing_kraus(0.2, k).unwrap();
            assert_eq!(ks.len(), 4usize.pow(k as u32));
            let dim = 1 << k;
            let s = ks.iter().map(|m| m.adjoint() * m).fold(DMatrix::zeros(dim, dim), |a, b| a + b);
            assert!(max_diff(&s, &DMatrix::identity(dim, dim)) < 1e-12);
        }
    }

    #[test]
    fn fast_dephasing_matches_kraus_form() {
        let n = 3;
        let p = 0.13;
        let rho = random_density(n, 1);
        let mut fast = rho.clone();
        dephase_iid(&mut fast, p);
        let mut slow = rho.clone();
        for q in 0..n {
            let ks: Vec<_> = dephasing_kraus(p).iter().map(|k| embed(k, q, n)).collect();
            slow = apply_kraus(&slow, &ks);
        }
        assert!(max_diff(&fast, &slow) < 1e-12);
        assert!((fast.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_depolarizing_matches_kraus_form() {
        let n = 3;
        let rho = random_density(n, 2);
        for qubits in [vec![0, 2], vec![1, 2], vec![0, 1, 2], vec![1]] {
            let k = qubits.len();
            let p = 0.2;
            let mut fast = rho.clone();
            depolarize(&mut fast, &qubits, p);
            // Embed each k-qubit Kraus operator by relabelling Pauli strings.
            let mut slow = DMatrix::zeros(8, 8);
            let n_err = 4usize.pow(k as u32) - 1;
            for code in 0..=n_err {
                let s = PauliString::from_ops(qubits.iter().enumerate().filter_map(|(b, &q)| match (code >> (2 * b)) & 3 {
                    1 => Some((q, crate::pauli::Axis::X)),
                    2 => Some((q, crate::pauli::Axis::Y)),
                    3 => Some((q, crate::pauli::Axis::Z)),
                    _ => None,
                }));
                let w = if code == 0 { 1.0 - p } else { p / n_err as f64 };
                let m = s.to_matrix(n).unwrap();
                slow += (&m * &rho * m.adjoint()) * Complex64::new(w, 0.0);
            }
            assert!(max_diff(&fast, &slow) < 1e-12, "{qubits:?}");
        }
    }

    #[test]
    fn bell_fidelity_under_depolarizing_noise() {
        let noise = NoiseModel::new(DephasingMode::Off, 1.0, 0.99).unwrap();
        let ideal = run_statevector(&bell_circuit(), basis("00")).unwrap();
        let QuantumState::Pure { amplitudes, .. } = &ideal else { panic!() };
        let noisy = run_density(&bell_circuit(), basis("00"), &noise).unwrap();
        let p = noise.depolarizing_probability(2);
        let f = noisy.fidelity_with(amplitudes);
        assert!(f >= 1.0 - p * 14.0 / 15.0 - 1e-12, "{f}");
        assert!((f - (1.0 - p * 12.0 / 15.0)).abs() < 1e-12);
    }

    #[test]
    fn collective_dephasing_spares_the_dfs() {
        let prep = |theta: f64, reference: &str| {
            // exp(-iθ Y0 X1) keeps |01>, |10> inside the weight-one sector.
            compile_pauli_exponential(theta, &"Y0 X1".parse().unwrap(), 2).map(|c| (c, basis(reference)))
        };
        let (c, r) = prep(std::f64::consts::FRAC_PI_4, "01").unwrap();
        let ideal = run_statevector(&c, r).unwrap();
        let QuantumState::Pure { amplitudes, .. } = &ideal else { panic!() };
        let mut noisy = QuantumState::Pure { n_qubits: 2, amplitudes: amplitudes.clone() }.to_density().unwrap();
        let QuantumState::Mixed { rho, .. } = &mut noisy else { panic!() };
        dephase_collective(rho, 0.2);
        assert!((noisy.fidelity_with(amplitudes) - 1.0).abs() < 1e-12);

        let ghz = [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::default(), Complex64::default(), Complex64::new(FRAC_1_SQRT_2, 0.0)];
        let mut s = QuantumState::Pure { n_qubits: 2, amplitudes: ghz.to_vec() }.to_density().unwrap();
        let QuantumState::Mixed { rho, .. } = &mut s else { panic!() };
        dephase_collective(rho, 0.2);
        assert!(s.fidelity_with(&ghz) < 0.99);
    }

    #[test]
    fn density_limit_is_enforced() {
        let c = Circuit::new(9);
        assert!(matches!(
            run_density(&c, BasisState::zeros(9), &NoiseModel::ideal()),
            Err(Error::DenseLimit { .. })
        ));
        assert!(run_statevector(&Circuit::new(12), BasisState::zeros(12)).is_ok());
    }

    #[test]
    fn sampling_basis_state_and_bell_statistics() {
        let s = QuantumState::basis(basis("01")).unwrap();
        let c = sample(&s, 100, &mut seeded_rng(3, 0)).unwrap();
        assert_eq!(c.to_bitstrings().into_iter().collect::<Vec<_>>(), vec![("01".to_string(), 100)]);
        let bell = run_statevector(&bell_circuit(), basis("00")).unwrap();
        let shots = 1_000_000;
        let c = sample(&bell, shots, &mut seeded_rng(4, 0)).unwrap();
        assert_eq!(c.total(), shots);
        let sigma = (shots as f64 * 0.25).sqrt();
        assert!((c.get(0) as f64 - shots as f64 / 2.0).abs() < 5.0 * sigma);
        assert!(sample(&bell, 0, &mut seeded_rng(4, 0)).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed_and_stream() {
        let bell = run_statevector(&bell_circuit(), basis("00")).unwrap();
        let a = sample(&bell, 1000, &mut seeded_rng(9, 1)).unwrap();
        let b = sample(&bell, 1000, &mut seeded_rng(9, 1)).unwrap();
        let c = sample(&bell, 1000, &mut seeded_rng(9, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let back = Counts::from_bitstrings(2, &a.to_bitstrings()).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn noisy_evolution_stays_a_density_matrix(
            theta in -3.0f64..3.0,
            fidelity in 0.8f64..1.0,
            collective in any::<bool>(),
        ) {
            let mode = if collective { DephasingMode::Collective } else { DephasingMode::Iid };
            let noise = NoiseModel::new(mode, 5e-3, fidelity).unwrap();
            let mut c = compile_pauli_exponential(theta, &"X0 Y1 X2".parse().unwrap(), 3).unwrap();
            c.append(&compile_pauli_exponential(theta / 2.0, &"Z0 Y2".parse().unwrap(), 3).unwrap()).unwrap();
            let s = run_density(&c, basis("001"), &noise).unwrap();
            let rho = s.density_matrix().unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(max_diff(&rho, &rho.adjoint()) < 1e-12);
            let min_eig = rho.symmetric_eigenvalues().iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!(min_eig > -1e-10);
        }
    }
}
