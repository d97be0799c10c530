//! Circuits over the trapped-ion gate set.
//!
//! Gate conventions, with `theta` and `phi` in radians:
//!
//! * `GlobalMs(phi)` and `SubsetMs(S, phi)`: `exp(-i phi/2 sum_{i<j in S} X_i X_j)`;
//! * `RotZ(q, theta)`: `exp(-i theta/2 Z_q)`;
//! * `RotXy(target, theta, phase)`: `exp(-i theta/2 (cos(phase) X + sin(phase) Y))`
//!   on one qubit or on every qubit;
//! * `AddressedPi(q)`: `RotZ(q, pi) = -i Z_q`.
//!
//! A circuit also carries a global phase `gamma`, so its unitary is
//! `exp(i gamma)` times the ordered product of its gates.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::pauli::{multiply, Axis, PauliString, PauliSum, DENSE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotTarget {
    Qubit(usize),
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    GlobalMs { angle: f64 },
    SubsetMs { qubits: Vec<usize>, angle: f64 },
    RotZ { qubit: usize, angle: f64 },
    RotXy { target: RotTarget, angle: f64, phase: f64 },
    AddressedPi { qubit: usize },
}

/// Duration class used for noise scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateClass {
    Entangling,
    GlobalRotation,
    AddressedRotation,
}

impl Gate {
    pub fn rot_x(qubit: usize, angle: f64) -> Self {
        Gate::RotXy {
            target: RotTarget::Qubit(qubit),
            angle,
            phase: 0.0,
        }
    }

    pub fn rot_y(qubit: usize, angle: f64) -> Self {
        Gate::RotXy {
            target: RotTarget::Qubit(qubit),
            angle,
            phase: FRAC_PI_2,
        }
    }

    /// Qubits the gate acts on in an `n_qubits` register.
    pub fn qubits(&self, n_qubits: usize) -> Vec<usize> {
        match self {
            Gate::GlobalMs { .. } | Gate::RotXy { target: RotTarget::All, .. } => (0..n_qubits).collect(),
            Gate::SubsetMs { qubits, .. } => qubits.clone(),
            Gate::RotZ { qubit, .. }
            | Gate::AddressedPi { qubit }
            | Gate::RotXy {
                target: RotTarget::Qubit(qubit),
                ..
            } => vec![*qubit],
        }
    }

    pub fn class(&self) -> GateClass {
        match self {
            Gate::GlobalMs { .. } | Gate::SubsetMs { .. } => GateClass::Entangling,
            Gate::RotXy { target: RotTarget::All, .. } => GateClass::GlobalRotation,
            _ => GateClass::AddressedRotation,
        }
    }

    pub fn is_entangling(&self) -> bool {
        self.class() == GateClass::Entangling
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits(n_qubits);
        if let Some(&q) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if let Gate::SubsetMs { qubits, .. } = self {
            let mut sorted = qubits.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() < 2 || sorted.len() != qubits.len() {
                return Err(Error::InvalidSubset(format!(
                    "MS subset {qubits:?} needs at least two distinct qubits"
                )));
            }
        }
        if matches!(self, Gate::GlobalMs { .. }) && n_qubits < 2 {
            return Err(Error::InvalidSubset("a global MS gate needs two qubits".into()));
        }
        Ok(())
    }

    /// Dense 2x2 matrix of a single-qubit gate.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let (angle, axis) = match *self {
            Gate::RotZ { angle, .. } => (angle, None),
            Gate::AddressedPi { .. } => (PI, None),
            Gate::RotXy { angle, phase, .. } => (angle, Some(phase)),
            _ => return None,
        };
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let s = (angle / 2.0).sin();
        Some(match axis {
            None => [
                [Complex64::from_polar(1.0, -angle / 2.0), Complex64::default()],
                [Complex64::default(), Complex64::from_polar(1.0, angle / 2.0)],
            ],
            Some(phase) => {
                // -i sin(a/2) (cos p X + sin p Y) has off-diagonals -i s e^{-ip}, -i s e^{ip}.
                let off = |p: f64| Complex64::new(0.0, -s) * Complex64::from_polar(1.0, p);
                [[c, off(-phase)], [off(phase), c]]
            }
        })
    }
}

/// Serialized form of a gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub variant: String,
    #[serde(default)]
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

impl From<&Gate> for GateRecord {
    fn from(g: &Gate) -> Self {
        let rec = |variant: &str, qubits: Vec<usize>, angle: f64, phase: Option<f64>| GateRecord {
            variant: variant.to_string(),
            qubits,
            angle,
            phase,
        };
        match g {
            Gate::GlobalMs { angle } => rec("global_ms", vec![], *angle, None),
            Gate::SubsetMs { qubits, angle } => rec("subset_ms", qubits.clone(), *angle, None),
            Gate::RotZ { qubit, angle } => rec("rot_z", vec![*qubit], *angle, None),
            Gate::RotXy { target, angle, phase } => {
                let qubits = match target {
                    RotTarget::Qubit(q) => vec![*q],
                    RotTarget::All => vec![],
                };
                rec("rot_xy", qubits, *angle, Some(*phase))
            }
            Gate::AddressedPi { qubit } => rec("addressed_pi", vec![*qubit], PI, None),
        }
    }
}

impl TryFrom<GateRecord> for Gate {
    type Error = Error;

    fn try_from(r: GateRecord) -> Result<Self> {
        let one = |r: &GateRecord| match r.qubits.as_slice() {
            [q] => Ok(*q),
            _ => Err(Error::InvalidArgument(format!("{} needs exactly one qubit", r.variant))),
        };
        Ok(match r.variant.as_str() {
            "global_ms" => Gate::GlobalMs { angle: r.angle },
            "subset_ms" => Gate::SubsetMs {
                qubits: r.qubits.clone(),
                angle: r.angle,
            },
            "rot_z" => Gate::RotZ {
                qubit: one(&r)?,
                angle: r.angle,
            },
            "rot_xy" => Gate::RotXy {
                target: if r.qubits.is_empty() {
                    RotTarget::All
                } else {
                    RotTarget::Qubit(one(&r)?)
                },
                angle: r.angle,
                phase: r.phase.unwrap_or(0.0),
            },
            "addressed_pi" => Gate::AddressedPi { qubit: one(&r)? },
            other => return Err(Error::InvalidArgument(format!("unknown gate variant `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    global_phase: f64,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            global_phase: 0.0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn add_global_phase(&mut self, phase: f64) {
        self.global_phase = (self.global_phase + phase).rem_euclid(2.0 * PI);
    }

    /// Run `other` after `self`.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.n_qubits, self.n_qubits
            )));
        }
        self.gates.extend(other.gates.iter().cloned());
        self.add_global_phase(other.global_phase);
        Ok(())
    }

    pub fn entangling_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_entangling()).count()
    }

    /// Replace every subset MS gate that leaves out exactly one qubit by its
    /// refocused global-MS form.
    pub fn lower_subset_ms(&self) -> Result<Circuit> {
        let mut out = Circuit::new(self.n_qubits);
        out.global_phase = self.global_phase;
        for g in &self.gates {
            match g {
                Gate::SubsetMs { qubits, angle } => out.append(&refocus_ms(qubits, *angle, self.n_qubits)?)?,
                other => out.push(other.clone())?,
            }
        }
        Ok(out)
    }

    pub fn records(&self) -> Vec<GateRecord> {
        self.gates.iter().map(GateRecord::from).collect()
    }

    pub fn from_records(n_qubits: usize, global_phase: f64, records: Vec<GateRecord>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits);
        c.add_global_phase(global_phase);
        for r in records {
            c.push(Gate::try_from(r)?)?;
        }
        Ok(c)
    }
}

/// Serialized circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub n_qubits: usize,
    pub global_phase: f64,
    pub gates: Vec<GateRecord>,
}

impl From<&Circuit> for CircuitRecord {
    fn from(c: &Circuit) -> Self {
        Self {
            n_qubits: c.n_qubits,
            global_phase: c.global_phase,
            gates: c.records(),
        }
    }
}

impl TryFrom<CircuitRecord> for Circuit {
    type Error = Error;

    fn try_from(r: CircuitRecord) -> Result<Self> {
        Circuit::from_records(r.n_qubits, r.global_phase, r.gates)
    }
}

fn ms_gate(support: &[usize], angle: f64, n_qubits: usize) -> Gate {
    if support.len() == n_qubits {
        Gate::GlobalMs { angle }
    } else {
        Gate::SubsetMs {
            qubits: support.to_vec(),
            angle,
        }
    }
}

/// Quarter-turn rotation `exp(-i pi/4 axis)` on one qubit.
fn quarter_turn(qubit: usize, axis: Axis, sign: f64) -> Gate {
    let angle = sign * FRAC_PI_2;
    match axis {
        Axis::Z => Gate::RotZ { qubit, angle },
        Axis::X => Gate::rot_x(qubit, angle),
        Axis::Y => Gate::rot_y(qubit, angle),
    }
}

/// `V Z_p V†` for `V = exp(-i pi/4 sum_{i<j in S} X_i X_j)`, as `(sign, string)`.
fn ms_conjugated_z(support: &[usize], pivot: usize) -> (f64, PauliString) {
    // Z_p anticommutes with the k-1 couplings X_p X_j, so
    // V Z_p V† = Z_p prod_j (i X_p X_j).
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = PauliString::single(pivot, Axis::Z);
    for &j in support.iter().filter(|&&j| j != pivot) {
        let coupling = PauliString::from_ops([(pivot, Axis::X), (j, Axis::X)]);
        let (ph, next) = multiply(&acc, &coupling);
        phase *= ph.to_complex() * Complex64::new(0.0, 1.0);
        acc = next;
    }
    debug_assert!(phase.im.abs() < 1e-12);
    (phase.re, acc)
}

/// Circuit implementing `exp(-i theta G)` exactly, including global phase.
///
/// Weight-one generators become a single rotation. Otherwise, with `S` the
/// support of `G` and `V = MS_S(pi/2)`, a pivot `p` is chosen so that
/// `Q = V Z_p V†` needs the fewest local basis changes `W` with
/// `W G W† = t Q`; then `exp(-i theta G) = W† V RotZ_p(2 t theta) V† W`.
pub fn compile_pauli_exponential(theta: f64, generator: &PauliString, n_qubits: usize) -> Result<Circuit> {
    if generator.is_identity() {
        return Err(Error::IdentityGenerator);
    }
    if generator.min_qubits() > n_qubits {
        return Err(Error::QubitOutOfRange {
            index: generator.min_qubits() - 1,
            n_qubits,
        });
    }
    let mut c = Circuit::new(n_qubits);
    let support = generator.support();
    if support.len() == 1 {
        let (q, a) = generator.ops().next().expect("weight one");
        c.push(match a {
            Axis::Z => Gate::RotZ { qubit: q, angle: 2.0 * theta },
            Axis::X => Gate::rot_x(q, 2.0 * theta),
            Axis::Y => Gate::rot_y(q, 2.0 * theta),
        })?;
        return Ok(c);
    }

    let mismatches = |target: &PauliString| {
        support
            .iter()
            .filter(|&&q| target.axis(q) != generator.axis(q))
            .count()
    };
    let (pivot, (q_sign, q_string)) = support
        .iter()
        .map(|&p| (p, ms_conjugated_z(&support, p)))
        .min_by_key(|(p, (_, s))| (mismatches(s), *p))
        .expect("support is not empty");

    let mut basis_change = Vec::new();
    let mut t = q_sign;
    for &q in &support {
        let from = generator.axis(q).expect("in support");
        let to = q_string.axis(q).expect("same support");
        if from == to {
            continue;
        }
        let about = from.third(to).expect("distinct axes");
        // exp(-i pi/4 c) a exp(i pi/4 c) = i a c = ±to.
        let (ph, r) = multiply(&PauliString::single(q, from), &PauliString::single(q, about));
        debug_assert_eq!(r.axis(q), Some(to));
        let sign = (ph.to_complex() * Complex64::new(0.0, 1.0)).re;
        t *= sign;
        basis_change.push((q, about));
    }

    for &(q, about) in &basis_change {
        c.push(quarter_turn(q, about, 1.0))?;
    }
    c.push(ms_gate(&support, -FRAC_PI_2, n_qubits))?;
    c.push(Gate::RotZ {
        qubit: pivot,
        angle: 2.0 * t * theta,
    })?;
    c.push(ms_gate(&support, FRAC_PI_2, n_qubits))?;
    for &(q, about) in basis_change.iter().rev() {
        c.push(quarter_turn(q, about, -1.0))?;
    }
    Ok(c)
}

/// Entangle only `subset` using global MS gates and an addressed phase flip
/// on the one excluded qubit. The result equals `SubsetMs(subset, phi)`
/// exactly once the recorded global phase is included.
pub fn refocus_ms(subset: &[usize], phi: f64, n_qubits: usize) -> Result<Circuit> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 || sorted.len() != subset.len() {
        return Err(Error::InvalidSubset(format!(
            "subset {subset:?} needs at least two distinct qubits"
        )));
    }
    if let Some(&q) = sorted.iter().find(|&&q| q >= n_qubits) {
        return Err(Error::QubitOutOfRange { index: q, n_qubits });
    }
    let mut c = Circuit::new(n_qubits);
    if sorted.len() == n_qubits {
        c.push(Gate::GlobalMs { angle: phi })?;
        return Ok(c);
    }
    if sorted.len() + 1 != n_qubits {
        return Err(Error::InvalidSubset(format!(
            "refocusing decouples exactly one qubit; subset {subset:?} leaves out {}",
            n_qubits - sorted.len()
        )));
    }
    let excluded = (0..n_qubits).find(|q| !sorted.contains(q)).expect("one qubit excluded");
    c.push(Gate::GlobalMs { angle: phi / 2.0 })?;
    c.push(Gate::AddressedPi { qubit: excluded })?;
    c.push(Gate::GlobalMs { angle: phi / 2.0 })?;
    c.push(Gate::AddressedPi { qubit: excluded })?;
    // (-iZ) M (-iZ) M = -MS_subset(phi).
    c.add_global_phase(PI);
    Ok(c)
}

/// Rotations mapping each qubit's measurement axis onto `Z`.
pub fn measurement_prefix(basis: &[Axis]) -> Circuit {
    let mut c = Circuit::new(basis.len());
    for (q, &a) in basis.iter().enumerate() {
        let gate = match a {
            Axis::Z => continue,
            Axis::X => Gate::rot_y(q, -FRAC_PI_2),
            Axis::Y => Gate::rot_x(q, FRAC_PI_2),
        };
        c.push(gate).expect("qubit in range");
    }
    c
}

/// State-preparation circuit of an ansatz at `params`.
pub fn ansatz_circuit(spec: &AnsatzSpec, params: &[f64]) -> Result<Circuit> {
    if params.len() != spec.n_params() {
        return Err(Error::Dimension(format!(
            "{} parameters for {} ansatz entries",
            params.len(),
            spec.n_params()
        )));
    }
    let mut c = Circuit::new(spec.n_qubits);
    for (e, &theta) in spec.entries.iter().zip(params) {
        c.append(&compile_pauli_exponential(e.scale * theta, &e.generator, spec.n_qubits)?)?;
    }
    Ok(c)
}

fn embed_single(m: [[Complex64; 2]; 2], qubit: usize, n_qubits: usize) -> DMatrix<Complex64> {
    let one = DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
    let id = DMatrix::<Complex64>::identity(2, 2);
    let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for q in (0..n_qubits).rev() {
        out = out.kronecker(if q == qubit { &one } else { &id });
    }
    out
}

/// Dense unitary of a gate on `n_qubits` qubits.
pub fn gate_matrix(g: &Gate, n_qubits: usize) -> Result<DMatrix<Complex64>> {
    g.validate(n_qubits)?;
    match g {
        Gate::GlobalMs { angle } | Gate::SubsetMs { angle, .. } => {
            let qs = g.qubits(n_qubits);
            let mut u = DMatrix::<Complex64>::identity(1 << n_qubits, 1 << n_qubits);
            let c = Complex64::new((angle / 2.0).cos(), 0.0);
            let s = Complex64::new(0.0, -(angle / 2.0).sin());
            for (i, &a) in qs.iter().enumerate() {
                for &b in &qs[i + 1..] {
                    let xx = PauliString::uniform(Axis::X, [a, b]);
                    let factor = PauliSum::from_terms([(PauliString::identity(), c), (xx, s)]);
                    u = factor.to_matrix(n_qubits)? * u;
                }
            }
            Ok(u)
        }
        Gate::RotXy {
            target: RotTarget::All, ..
        } => {
            let m = g.single_qubit_matrix().expect("rotation");
            let mut u = DMatrix::<Complex64>::identity(1 << n_qubits, 1 << n_qubits);
            for q in 0..n_qubits {
                u = embed_single(m, q, n_qubits) * u;
            }
            Ok(u)
        }
        _ => {
            let q = g.qubits(n_qubits)[0];
            Ok(embed_single(g.single_qubit_matrix().expect("single-qubit gate"), q, n_qubits))
        }
    }
}

/// Dense unitary of a circuit: the ordered product of its gates, last gate
/// leftmost, times the global phase.
pub fn unitary_of(c: &Circuit) -> Result<DMatrix<Complex64>> {
    if c.n_qubits > DENSE_LIMIT {
        return Err(Error::DenseLimit {
            n_qubits: c.n_qubits,
            limit: DENSE_LIMIT,
        });
    }
    let dim = 1usize << c.n_qubits;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for g in &c.gates {
        u = gate_matrix(g, c.n_qubits)? * u;
    }
    Ok(u * Complex64::from_polar(1.0, c.global_phase))
}

/// Smallest `||a - e^{i g} b||` over the phase `g`, with the optimal `g`.
pub fn phase_aligned_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> (f64, f64) {
    let overlap: Complex64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let gamma = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
    let rotated = b * Complex64::from_polar(1.0, gamma);
    let d = (a - rotated).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (d, gamma)
}
