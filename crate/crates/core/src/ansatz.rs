//! Unitary coupled-cluster excitation operators and the single-string
//! exponentials that implement them on hardware.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::fermion::{FermionSum, Ladder, LadderProduct, Mapping, TaperingMap};
use crate::pauli::{commutes, Axis, PauliString, PauliSum, DENSE_LIMIT};
use crate::table::AmplitudeFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    Single,
    Double,
}

/// Which excitations `uccsd_generators` enumerates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpinPolicy {
    /// Every occupied-to-virtual combination.
    #[default]
    Unrestricted,
    /// Only excitations that conserve the spin projection.
    Conserving,
}

/// An excitation `T` from occupied to virtual spin orbitals; the ansatz uses
/// the anti-Hermitian combination `T - T†`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExcitationOperator {
    pub kind: ExcitationKind,
    pub occupied: Vec<usize>,
    pub virtuals: Vec<usize>,
    pub parameter: String,
}

impl ExcitationOperator {
    pub fn single(occupied: usize, virtual_mode: usize) -> Self {
        Self {
            kind: ExcitationKind::Single,
            occupied: vec![occupied],
            virtuals: vec![virtual_mode],
            parameter: format!("t_{occupied}_{virtual_mode}"),
        }
    }

    /// `a†_{v2} a†_{v1} a_{o1} a_{o2}` with `o1 < o2` and `v1 < v2`.
    pub fn double(o1: usize, o2: usize, v1: usize, v2: usize) -> Self {
        let (o1, o2) = (o1.min(o2), o1.max(o2));
        let (v1, v2) = (v1.min(v2), v1.max(v2));
        Self {
            kind: ExcitationKind::Double,
            occupied: vec![o1, o2],
            virtuals: vec![v1, v2],
            parameter: format!("t_{o1}_{o2}_{v1}_{v2}"),
        }
    }

    /// Ladder product of `T`.
    pub fn ladder(&self) -> LadderProduct {
        let mut ops: Vec<Ladder> = self.virtuals.iter().rev().map(|&v| Ladder::create(v)).collect();
        ops.extend(self.occupied.iter().map(|&o| Ladder::annihilate(o)));
        LadderProduct(ops)
    }

    /// `T - T†`.
    pub fn anti_hermitian(&self) -> FermionSum {
        let t = FermionSum::from_terms([(self.ladder(), Complex64::new(1.0, 0.0))]);
        &t - &t.dagger()
    }

    /// Qubit form of `T - T†` under `mapping`.
    pub fn exponent(&self, mapping: Mapping, n_modes: usize) -> Result<PauliSum> {
        mapping.transform(&self.anti_hermitian(), n_modes)
    }

    pub fn modes(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied.iter().chain(&self.virtuals).copied()
    }
}

impl fmt::Display for ExcitationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ladder())
    }
}

fn spin(mode: usize) -> usize {
    mode % 2
}

/// Singles then doubles from modes `0..n_occupied` into the next `n_virtual`.
pub fn uccsd_generators(n_occupied: usize, n_virtual: usize, policy: SpinPolicy) -> Vec<ExcitationOperator> {
    let occ: Vec<usize> = (0..n_occupied).collect();
    let virt: Vec<usize> = (n_occupied..n_occupied + n_virtual).collect();
    let allowed_single = |o: usize, v: usize| policy == SpinPolicy::Unrestricted || spin(o) == spin(v);
    let allowed_double = |o: [usize; 2], v: [usize; 2]| {
        policy == SpinPolicy::Unrestricted || spin(o[0]) + spin(o[1]) == spin(v[0]) + spin(v[1])
    };
    let mut out = Vec::new();
    for &o in &occ {
        for &v in &virt {
            if allowed_single(o, v) {
                out.push(ExcitationOperator::single(o, v));
            }
        }
    }
    for (i, &o1) in occ.iter().enumerate() {
        for &o2 in &occ[i + 1..] {
            for (j, &v1) in virt.iter().enumerate() {
                for &v2 in &virt[j + 1..] {
                    if allowed_double([o1, o2], [v1, v2]) {
                        out.push(ExcitationOperator::double(o1, o2, v1, v2));
                    }
                }
            }
        }
    }
    out
}

/// Keep operators whose amplitude magnitude reaches `threshold`.
pub fn screen(ops: &[ExcitationOperator], amplitudes: &[f64], threshold: f64) -> Result<Vec<ExcitationOperator>> {
    if ops.len() != amplitudes.len() {
        return Err(Error::Dimension(format!(
            "{} operators but {} amplitudes",
            ops.len(),
            amplitudes.len()
        )));
    }
    Ok(ops
        .iter()
        .zip(amplitudes)
        .filter(|(_, a)| a.abs() >= threshold)
        .map(|(op, _)| op.clone())
        .collect())
}

/// Amplitudes for `ops` looked up in a file; operators absent from the file get 0.
pub fn amplitudes_for(ops: &[ExcitationOperator], file: &AmplitudeFile) -> Vec<f64> {
    ops.iter().map(|op| file.amplitude_of(&op.ladder()).unwrap_or(0.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzEntry {
    pub parameter: String,
    pub generator: PauliString,
    /// Factor multiplying the parameter: the entry applies `exp(-i scale θ G)`.
    pub scale: f64,
    /// Whether the generator replaces a multi-term exponent by one of its terms.
    #[serde(default)]
    pub approximated: bool,
}

/// Ordered product of single-string exponentials applied to a reference state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub reference: BasisState,
    pub entries: Vec<AnsatzEntry>,
}

impl AnsatzSpec {
    pub fn new(reference: BasisState, entries: Vec<AnsatzEntry>) -> Result<Self> {
        let spec = Self {
            n_qubits: reference.n_qubits(),
            reference,
            entries,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference.n_qubits() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "reference {} does not have {} qubits",
                self.reference, self.n_qubits
            )));
        }
        for e in &self.entries {
            if e.generator.min_qubits() > self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: e.generator.min_qubits() - 1,
                    n_qubits: self.n_qubits,
                });
            }
            if e.generator.is_diagonal() {
                return Err(Error::InvalidArgument(format!(
                    "generator `{}` of {} does not change populations",
                    e.generator, e.parameter
                )));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.entries.len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Same ansatz expressed on the qubits retained by `map`.
    pub fn tapered(&self, map: &TaperingMap) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(AnsatzEntry {
                    generator: map.map_string(&e.generator)?,
                    ..e.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(map.reduce_state(self.reference)?, entries)
    }

    /// Prepared statevector, computed directly from the exponentials.
    pub fn state(&self, params: &[f64]) -> Result<Vec<Complex64>> {
        if params.len() != self.entries.len() {
            return Err(Error::Dimension(format!(
                "{} parameters for {} ansatz entries",
                params.len(),
                self.entries.len()
            )));
        }
        if self.n_qubits > DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_qubits: self.n_qubits,
                limit: DENSE_LIMIT,
            });
        }
        let mut psi = vec![Complex64::default(); 1 << self.n_qubits];
        psi[self.reference.index()] = Complex64::new(1.0, 0.0);
        for (e, &theta) in self.entries.iter().zip(params) {
            psi = apply_pauli_rotation(&psi, &e.generator, e.scale * theta);
        }
        Ok(psi)
    }
}

/// `exp(-i angle P) psi` on a dense statevector.
pub fn apply_pauli_rotation(psi: &[Complex64], p: &PauliString, angle: f64) -> Vec<Complex64> {
    let (c, s) = (angle.cos(), angle.sin());
    let mut out: Vec<Complex64> = psi.iter().map(|a| a * c).collect();
    let minus_i_sin = Complex64::new(0.0, -s);
    for (idx, &amp) in psi.iter().enumerate() {
        let (ph, target) = p.apply_index(idx);
        out[target] += minus_i_sin * ph * amp;
    }
    out
}

type SparseState = BTreeMap<usize, Complex64>;

fn sparse_rotation(psi: &SparseState, p: &PauliString, angle: f64) -> SparseState {
    let (c, s) = (angle.cos(), angle.sin());
    let mut out = SparseState::new();
    for (&idx, &amp) in psi {
        *out.entry(idx).or_default() += amp * c;
        let (ph, target) = p.apply_index(idx);
        *out.entry(target).or_default() += Complex64::new(0.0, -s) * ph * amp;
    }
    out.retain(|_, a| a.norm() > 1e-15);
    out
}

fn sparse_distance(a: &SparseState, b: &SparseState) -> f64 {
    let keys: std::collections::BTreeSet<&usize> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).copied().unwrap_or_default() - b.get(k).copied().unwrap_or_default()).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Hermitian `K` with `exponent = -i K`, checked to have real coefficients.
fn hermitian_part(exponent: &PauliSum) -> Result<Vec<(PauliString, f64)>> {
    let k = exponent.scale(Complex64::new(0.0, 1.0));
    k.real_terms(1e-12)
        .map_err(|_| Error::InvalidArgument("exponent is not anti-Hermitian".into()))
}

/// The preferred representative: `Y` on the lowest support qubit, `X` elsewhere.
fn preferred_form(p: &PauliString) -> bool {
    p.ops()
        .enumerate()
        .all(|(k, (_, a))| if k == 0 { a == Axis::Y } else { a == Axis::X })
}

/// Replace the anti-Hermitian `exponent` (applied as `exp(θ exponent)`) by a
/// single string with the same action on `reference` for every `θ`.
///
/// Requires pairwise commuting terms that all send `reference` to the same
/// basis state with phases differing only by a sign. The equality is then
/// exact; it is also checked numerically.
pub fn reduce_on_reference(parameter: &str, exponent: &PauliSum, reference: BasisState) -> Result<AnsatzEntry> {
    let terms = hermitian_part(exponent)?;
    if terms.is_empty() {
        return Err(Error::UnequalAction("exponent is zero".into()));
    }
    if terms.iter().any(|(p, _)| p.is_identity()) {
        return Err(Error::UnequalAction("exponent has an identity component".into()));
    }
    for (i, (p, _)) in terms.iter().enumerate() {
        for (q, _) in &terms[i + 1..] {
            if !commutes(p, q) {
                return Err(Error::UnequalAction(format!("{p} and {q} do not commute")));
            }
        }
    }
    let rep_idx = terms.iter().position(|(p, _)| preferred_form(p)).unwrap_or(0);
    let (rep, _) = &terms[rep_idx];
    let (rep_amp, rep_target) = rep.apply_to_basis(reference)?;
    if rep_target == reference {
        return Err(Error::UnequalAction(format!("{rep} leaves the reference unchanged")));
    }
    let mut scale = 0.0;
    for (p, k) in &terms {
        let (amp, target) = p.apply_to_basis(reference)?;
        if target != rep_target {
            return Err(Error::UnequalAction(format!(
                "{p} sends the reference to {target}, {rep} to {rep_target}"
            )));
        }
        let ratio = amp / rep_amp;
        if ratio.im.abs() > 1e-12 {
            return Err(Error::UnequalAction(format!("{p} and {rep} differ by phase {ratio}")));
        }
        scale += k * ratio.re.signum();
    }
    let entry = AnsatzEntry {
        parameter: parameter.to_string(),
        generator: rep.clone(),
        scale,
        approximated: false,
    };
    verify_reduction(&terms, &entry, reference)?;
    Ok(entry)
}

fn verify_reduction(terms: &[(PauliString, f64)], entry: &AnsatzEntry, reference: BasisState) -> Result<()> {
    let mut start = SparseState::new();
    start.insert(reference.index(), Complex64::new(1.0, 0.0));
    for theta in [0.37, 1.21, 2.9, -0.8] {
        let mut full = start.clone();
        for (p, k) in terms {
            full = sparse_rotation(&full, p, k * theta);
        }
        let reduced = sparse_rotation(&start, &entry.generator, entry.scale * theta);
        let d = sparse_distance(&full, &reduced);
        if d > 1e-10 {
            return Err(Error::UnequalAction(format!(
                "reduced exponential differs by {d:.3e} at θ = {theta}"
            )));
        }
    }
    Ok(())
}

/// How `subterm_approximation` picks its term.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum TermSelector {
    /// Lowest weight, ties broken by canonical order.
    #[default]
    LowestWeight,
    Pauli(PauliString),
    Index(usize),
}

/// Keep one term of `exponent` as the generator, with unit scale.
pub fn subterm_approximation(parameter: &str, exponent: &PauliSum, keep: &TermSelector) -> Result<AnsatzEntry> {
    let terms = hermitian_part(exponent)?;
    let chosen = match keep {
        TermSelector::LowestWeight => terms
            .iter()
            .filter(|(p, _)| !p.is_identity())
            .min_by_key(|(p, _)| p.weight())
            .map(|(p, _)| p.clone()),
        TermSelector::Pauli(p) => terms.iter().find(|(q, _)| q == p).map(|(q, _)| q.clone()),
        TermSelector::Index(i) => terms.get(*i).map(|(p, _)| p.clone()),
    }
    .ok_or_else(|| Error::InvalidArgument(format!("selector {keep:?} matches no term")))?;
    Ok(AnsatzEntry {
        parameter: parameter.to_string(),
        generator: chosen,
        scale: 1.0,
        approximated: terms.len() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{bravyi_kitaev, jordan_wigner};
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn basis(s: &str) -> BasisState {
        s.parse().unwrap()
    }

    #[test]
    fn generator_counts() {
        let all = uccsd_generators(4, 8, SpinPolicy::Unrestricted);
        let singles = all.iter().filter(|o| o.kind == ExcitationKind::Single).count();
        assert_eq!((singles, all.len() - singles), (32, 168));
        let h2 = uccsd_generators(2, 2, SpinPolicy::Conserving);
        let doubles: Vec<_> = h2.iter().filter(|o| o.kind == ExcitationKind::Double).collect();
        assert_eq!(h2.len(), 3);
        assert_eq!(doubles.len(), 1);
        assert_eq!(doubles[0].ladder().to_string(), "3^ 2^ 0 1");
        assert!(uccsd_generators(2, 0, SpinPolicy::Unrestricted).is_empty());
    }

    #[test]
    fn h2_double_matches_textbook_operator() {
        let op = &uccsd_generators(2, 2, SpinPolicy::Conserving)[2];
        let textbook = &FermionSum::term("2^ 3^ 1 0", 1.0).unwrap() - &FermionSum::term("0^ 1^ 3 2", 1.0).unwrap();
        assert_eq!(op.anti_hermitian(), textbook);
    }

    #[test]
    fn screening() {
        let ops = uccsd_generators(2, 2, SpinPolicy::Unrestricted);
        let amps: Vec<f64> = (0..ops.len()).map(|k| k as f64 * 0.1).collect();
        assert_eq!(screen(&ops, &amps, 0.0).unwrap(), ops);
        let kept = screen(&ops, &amps, 0.35).unwrap();
        assert_eq!(kept.len(), ops.len() - 4);
        assert_eq!(screen(&kept, &amps[4..], 0.35).unwrap(), kept);
        assert!(screen(&ops, &amps, 10.0).unwrap().is_empty());
        assert!(screen(&ops, &amps[1..], 0.0).is_err());
    }

    fn h2_double() -> ExcitationOperator {
        ExcitationOperator::double(0, 1, 2, 3)
    }

    /// The eight-term exponent as printed in the literature for this
    /// molecule, `i/8 [-X2Y0 + Y2X0 - X2Z1Y0 + ...]`.
    fn printed_bk_exponent() -> PauliSum {
        let plus = ["Y2 X0", "Y2 Z1 X0", "Z3 Y2 X0", "Z3 Y2 Z1 X0"];
        let minus = ["X2 Y0", "X2 Z1 Y0", "Z3 X2 Y0", "Z3 X2 Z1 Y0"];
        PauliSum::from_terms(
            plus.iter()
                .map(|s| (ps(s), Complex64::new(0.0, 0.125)))
                .chain(minus.iter().map(|s| (ps(s), Complex64::new(0.0, -0.125)))),
        )
    }

    #[test]
    fn bk_double_is_printed_form_up_to_parameter_sign() {
        let exponent = h2_double().exponent(Mapping::BravyiKitaev, 4).unwrap();
        assert_eq!(exponent.len(), 8);
        for (p, _) in exponent.iter() {
            assert!(matches!(p.axis(1), None | Some(Axis::Z)));
            assert!(matches!(p.axis(3), None | Some(Axis::Z)));
        }
        assert_eq!(exponent, -&printed_bk_exponent());
    }

    #[test]
    fn tapered_bk_double_reduces_to_two_qubit_string() {
        let reference = basis("0001");
        let map = TaperingMap::new(4, [(1, 1), (3, 1)].into_iter().collect()).unwrap();
        let reduced_ref = map.reduce_state(reference).unwrap();
        assert_eq!(reduced_ref.to_string(), "01");

        let printed = map.apply(&printed_bk_exponent());
        assert_eq!(printed.len(), 2);
        let entry = reduce_on_reference("theta", &printed, reduced_ref).unwrap();
        assert_eq!(entry.generator, ps("Y0 X1"));
        assert!((entry.scale - 1.0).abs() < 1e-14);

        let mapped = map.apply(&h2_double().exponent(Mapping::BravyiKitaev, 4).unwrap());
        let entry = reduce_on_reference("theta", &mapped, reduced_ref).unwrap();
        assert_eq!(entry.generator, ps("Y0 X1"));
        assert!((entry.scale + 1.0).abs() < 1e-14);
    }

    #[test]
    fn jw_double_reduces_to_single_string() {
        let exponent = jordan_wigner(&h2_double().anti_hermitian(), 4).unwrap();
        assert_eq!(exponent.len(), 8);
        let entry = reduce_on_reference("theta", &exponent, basis("0011")).unwrap();
        assert_eq!(entry.generator, ps("Y0 X1 X2 X3"));
        // exp(θ(T - T†))|0011> = cos θ |0011> + sin θ |1100>, which is
        // exp(+iθ X3X2X1Y0)|0011>.
        assert!((entry.scale + 1.0).abs() < 1e-14);
        let spec = AnsatzSpec::new(basis("0011"), vec![entry]).unwrap();
        let psi = spec.state(&[0.3]).unwrap();
        assert!((psi[0b0011] - Complex64::new(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((psi[0b1100] - Complex64::new(0.3f64.sin(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn single_term_reduction_is_identity() {
        let exponent = PauliSum::from(ps("Y0 X1")).scale(Complex64::new(0.0, -0.7));
        let entry = reduce_on_reference("a", &exponent, basis("01")).unwrap();
        assert_eq!(entry.generator, ps("Y0 X1"));
        assert!((entry.scale - 0.7).abs() < 1e-15);
    }

    #[test]
    fn reduction_rejects_unequal_actions() {
        let exponent = PauliSum::from_terms([
            (ps("Y0"), Complex64::new(0.0, -1.0)),
            (ps("Y1"), Complex64::new(0.0, -1.0)),
        ]);
        assert!(matches!(
            reduce_on_reference("a", &exponent, basis("00")),
            Err(Error::UnequalAction(_))
        ));
        let noncommuting = PauliSum::from_terms([
            (ps("Y0"), Complex64::new(0.0, -1.0)),
            (ps("X0"), Complex64::new(0.0, -1.0)),
        ]);
        assert!(reduce_on_reference("a", &noncommuting, basis("00")).is_err());
    }

    #[test]
    fn subterm_selection() {
        let exponent = PauliSum::from_terms([
            (ps("X2 Y4"), Complex64::new(0.0, 0.125)),
            (ps("X2 Z3 Y4"), Complex64::new(0.0, -0.125)),
            (ps("Y2 X4"), Complex64::new(0.0, 0.125)),
        ]);
        let e = subterm_approximation("a", &exponent, &TermSelector::LowestWeight).unwrap();
        assert_eq!(e.generator, ps("X2 Y4"));
        assert!(e.approximated);
        assert_eq!(e.scale, 1.0);
        let e = subterm_approximation("a", &exponent, &TermSelector::Pauli(ps("Y2 X4"))).unwrap();
        assert_eq!(e.generator, ps("Y2 X4"));
        assert!(subterm_approximation("a", &exponent, &TermSelector::Index(7)).is_err());
        let single = PauliSum::from(ps("Y0 X1")).scale(Complex64::new(0.0, -1.0));
        let e = subterm_approximation("a", &single, &TermSelector::LowestWeight).unwrap();
        assert_eq!(e.generator, ps("Y0 X1"));
        assert!(!e.approximated);
    }

    #[test]
    fn spec_rejects_diagonal_generators() {
        let bad = AnsatzEntry {
            parameter: "a".into(),
            generator: ps("Z0"),
            scale: 1.0,
            approximated: false,
        };
        assert!(AnsatzSpec::new(basis("01"), vec![bad]).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = AnsatzSpec::new(
            basis("01"),
            vec![AnsatzEntry {
                parameter: "theta".into(),
                generator: ps("Y0 X1"),
                scale: 1.0,
                approximated: false,
            }],
        )
        .unwrap();
        let back: AnsatzSpec = serde_json::from_str(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    fn dense_full_exponential(exponent: &PauliSum, n: usize, theta: f64, reference: BasisState) -> Vec<Complex64> {
        // exp(θ A) via the eigen-decomposition of the Hermitian K = iA.
        let k = exponent.scale(Complex64::new(0.0, 1.0)).to_matrix(n).unwrap();
        let eig = k.symmetric_eigen();
        let phases = nalgebra::DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -theta * l)),
        );
        let u = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
        u.column(reference.index()).iter().copied().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn bk_reduction_matches_dense_exponential(theta in 0.0f64..std::f64::consts::TAU) {
            let exponent = bravyi_kitaev(&h2_double().anti_hermitian(), 4).unwrap();
            let reference = basis("0001");
            let entry = reduce_on_reference("theta", &exponent, reference).unwrap();
            let spec = AnsatzSpec::new(reference, vec![entry]).unwrap();
            let full = dense_full_exponential(&exponent, 4, theta, reference);
            let reduced = spec.state(&[theta]).unwrap();
            let d: f64 = full.iter().zip(&reduced).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(d < 1e-10);
            let overlap = reduced[reference.index()];
            prop_assert!(theta.cos().abs() > 0.999 || (overlap - Complex64::new(1.0, 0.0)).norm() > 1e-3);
        }
    }

    #[test]
    fn generators_change_reference_populations() {
        let spec = AnsatzSpec::new(
            basis("01"),
            vec![AnsatzEntry {
                parameter: "theta".into(),
                generator: ps("Y0 X1"),
                scale: 1.0,
                approximated: false,
            }],
        )
        .unwrap();
        let psi = spec.state(&[std::f64::consts::FRAC_PI_4]).unwrap();
        assert!((psi[1].norm_sqr() - 0.5).abs() < 1e-12);
    }
}
