//! Pauli strings and weighted sums of Pauli strings.
//!
//! A [`PauliString`] is sparse: only qubits carrying `X`, `Y` or `Z` are
//! stored and every other qubit is implicitly the identity. Strings order
//! lexicographically by their `(qubit, axis)` sequence, so the identity
//! comes first and sums serialize deterministically.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisState;
use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after every operation.
pub const PRUNE_TOL: f64 = 1e-10;

/// Largest register accepted by dense-matrix routines.
pub const DENSE_LIMIT: usize = 12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    /// Single-qubit product `self * other` as `(i^k, axis)`; `None` is identity.
    fn product(self, other: Axis) -> (u8, Option<Axis>) {
        use Axis::*;
        match (self, other) {
            (a, b) if a == b => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, X) => (1, Some(Y)),
            (Y, X) => (3, Some(Z)),
            (Z, Y) => (3, Some(X)),
            (X, Z) => (3, Some(Y)),
            _ => unreachable!(),
        }
    }

    /// The axis that completes `{self, other}` to `{X, Y, Z}`.
    pub fn third(self, other: Axis) -> Option<Axis> {
        self.product(other).1
    }
}

impl TryFrom<char> for Axis {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            _ => Err(Error::ParsePauli(c.to_string())),
        }
    }
}

/// A power of `i`, the only phases Pauli products produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => I,
            2 => Complex64::new(-1.0, 0.0),
            _ => -I,
        }
    }
}

impl Mul for Phase {
    type Output = Phase;

    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    ops: BTreeMap<usize, Axis>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(qubit: usize, axis: Axis) -> Self {
        let mut ops = BTreeMap::new();
        ops.insert(qubit, axis);
        Self { ops }
    }

    pub fn from_ops<It: IntoIterator<Item = (usize, Axis)>>(ops: It) -> Self {
        let mut s = Self::identity();
        for (q, a) in ops {
            s.ops.insert(q, a);
        }
        s
    }

    /// Same axis on every listed qubit.
    pub fn uniform<It: IntoIterator<Item = usize>>(axis: Axis, qubits: It) -> Self {
        Self::from_ops(qubits.into_iter().map(|q| (q, axis)))
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn axis(&self, qubit: usize) -> Option<Axis> {
        self.ops.get(&qubit).copied()
    }

    pub fn ops(&self) -> impl Iterator<Item = (usize, Axis)> + '_ {
        self.ops.iter().map(|(&q, &a)| (q, a))
    }

    pub fn support(&self) -> Vec<usize> {
        self.ops.keys().copied().collect()
    }

    /// One past the highest qubit index, or 0 for the identity.
    pub fn min_qubits(&self) -> usize {
        self.ops.keys().next_back().map_or(0, |&q| q + 1)
    }

    pub fn set(&mut self, qubit: usize, axis: Option<Axis>) {
        match axis {
            Some(a) => {
                self.ops.insert(qubit, a);
            }
            None => {
                self.ops.remove(&qubit);
            }
        }
    }

    /// Only `Z` factors.
    pub fn is_diagonal(&self) -> bool {
        self.ops.values().all(|&a| a == Axis::Z)
    }

    /// Bit masks of qubits that flip (`X`/`Y`) and that pick up a sign (`Y`/`Z`).
    pub fn masks(&self) -> (u64, u64) {
        let mut x = 0u64;
        let mut z = 0u64;
        for (&q, &a) in &self.ops {
            assert!(q < 64, "qubit {q} exceeds the 64-bit mask range");
            match a {
                Axis::X => x |= 1 << q,
                Axis::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                Axis::Z => z |= 1 << q,
            }
        }
        (x, z)
    }

    fn y_count(&self) -> u32 {
        self.ops.values().filter(|&&a| a == Axis::Y).count() as u32
    }

    /// Action on a basis index: `P|b> = amp |b'>`.
    pub fn apply_index(&self, index: usize) -> (Complex64, usize) {
        let (x, z) = self.masks();
        apply_masks(x, z, self.y_count(), index)
    }

    /// Action on a basis state: `P|b> = amp |b'>`.
    pub fn apply_to_basis(&self, state: BasisState) -> Result<(Complex64, BasisState)> {
        let n = state.n_qubits();
        if self.min_qubits() > n {
            return Err(Error::QubitOutOfRange {
                index: self.min_qubits() - 1,
                n_qubits: n,
            });
        }
        let (amp, out) = self.apply_index(state.index());
        Ok((amp, BasisState::new(out as u64, n)?))
    }

    /// Expectation value in a computational basis state.
    pub fn basis_expectation(&self, state: BasisState) -> f64 {
        if !self.is_diagonal() {
            return 0.0;
        }
        self.ops
            .keys()
            .map(|&q| state.z_eigenvalue(q))
            .product()
    }

    /// Dense matrix on `n_qubits` qubits.
    pub fn to_matrix(&self, n_qubits: usize) -> Result<DMatrix<Complex64>> {
        PauliSum::from(self.clone()).to_matrix(n_qubits)
    }
}

/// `Z`-mask signs and `Y` phases applied to a basis index.
pub(crate) fn apply_masks(x: u64, z: u64, y_count: u32, index: usize) -> (Complex64, usize) {
    let b = index as u64;
    let sign_flips = (b & z).count_ones();
    // Y = i X Z, so each Y contributes a factor i on top of the Z sign.
    let phase = Phase::from_power(y_count + 2 * sign_flips);
    (phase.to_complex(), (b ^ x) as usize)
}

/// Product `p * q` as a phase and a string.
pub fn multiply(p: &PauliString, q: &PauliString) -> (Phase, PauliString) {
    let mut power = 0u32;
    let mut out = p.ops.clone();
    for (&qubit, &b) in &q.ops {
        match out.get(&qubit).copied() {
            None => {
                out.insert(qubit, b);
            }
            Some(a) => {
                let (k, r) = a.product(b);
                power += k as u32;
                match r {
                    Some(r) => {
                        out.insert(qubit, r);
                    }
                    None => {
                        out.remove(&qubit);
                    }
                }
            }
        }
    }
    (Phase::from_power(power), PauliString { ops: out })
}

/// Whether `pq = qp`.
pub fn commutes(p: &PauliString, q: &PauliString) -> bool {
    let clashes = p
        .ops
        .iter()
        .filter(|(qubit, a)| q.ops.get(qubit).is_some_and(|b| b != *a))
        .count();
    clashes % 2 == 0
}

/// Whether the two strings agree on every qubit where both act.
pub fn qubitwise_commutes(p: &PauliString, q: &PauliString) -> bool {
    p.ops
        .iter()
        .all(|(qubit, a)| q.ops.get(qubit).is_none_or(|b| b == a))
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (q, a) in &self.ops {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", a.symbol(), q)?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = PauliString::identity();
        for token in s.split_whitespace() {
            if token == "I" {
                continue;
            }
            let mut chars = token.chars();
            let axis = chars
                .next()
                .ok_or_else(|| Error::ParsePauli(s.to_string()))
                .and_then(Axis::try_from)
                .map_err(|_| Error::ParsePauli(s.to_string()))?;
            let qubit: usize = chars
                .as_str()
                .parse()
                .map_err(|_| Error::ParsePauli(s.to_string()))?;
            if out.ops.insert(qubit, axis).is_some() {
                return Err(Error::ParsePauli(format!("{s}: qubit {qubit} repeated")));
            }
        }
        Ok(out)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A complex-weighted sum of Pauli strings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliSum {
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(PauliString::identity(), Complex64::new(c, 0.0))])
    }

    pub fn from_terms<It: IntoIterator<Item = (PauliString, Complex64)>>(terms: It) -> Self {
        let mut s = Self::zero();
        for (p, c) in terms {
            *s.terms.entry(p).or_default() += c;
        }
        s.prune();
        s
    }

    pub fn from_real_terms<It: IntoIterator<Item = (PauliString, f64)>>(terms: It) -> Self {
        Self::from_terms(terms.into_iter().map(|(p, c)| (p, Complex64::new(c, 0.0))))
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_TOL);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.keys()
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    /// Coefficient of the identity term.
    pub fn constant_term(&self) -> f64 {
        self.coeff(&PauliString::identity()).re
    }

    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        let entry = self.terms.entry(p.clone()).or_default();
        *entry += c;
        if entry.norm() < PRUNE_TOL {
            self.terms.remove(&p);
        }
    }

    /// One past the highest qubit index touched by any term.
    pub fn min_qubits(&self) -> usize {
        self.terms.keys().map(PauliString::min_qubits).max().unwrap_or(0)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(p, c)| (p.clone(), c * factor)))
    }

    pub fn dagger(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(p, c)| (p.clone(), c.conj())))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Real parts of every coefficient, or an error if any is complex beyond `tol`.
    pub fn real_terms(&self, tol: f64) -> Result<Vec<(PauliString, f64)>> {
        self.terms
            .iter()
            .map(|(p, c)| {
                if c.im.abs() > tol {
                    Err(Error::InvalidArgument(format!(
                        "term {p} has complex coefficient {c}"
                    )))
                } else {
                    Ok((p.clone(), c.re))
                }
            })
            .collect()
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &PauliSum) -> PauliSum {
        self * other - other * self
    }

    /// `frame * self * frame`: terms anticommuting with `frame` change sign.
    pub fn conjugate_frame(&self, frame: &PauliString) -> PauliSum {
        Self::from_terms(self.terms.iter().map(|(p, &c)| {
            let c = if commutes(p, frame) { c } else { -c };
            (p.clone(), c)
        }))
    }

    /// Drop qubits from the sum by fixing each to a `Z` eigenvalue, then
    /// relabel. Terms with `X`/`Y` on a fixed qubit are discarded.
    pub fn project_qubits(
        &self,
        fixed: &BTreeMap<usize, f64>,
        relabel: &BTreeMap<usize, usize>,
    ) -> PauliSum {
        let mut out = PauliSum::zero();
        'terms: for (p, &c) in &self.terms {
            let mut coeff = c;
            let mut reduced = PauliString::identity();
            for (q, a) in p.ops() {
                if let Some(&eig) = fixed.get(&q) {
                    if a != Axis::Z {
                        continue 'terms;
                    }
                    coeff *= eig;
                } else {
                    let target = relabel.get(&q).copied().unwrap_or(q);
                    reduced.ops.insert(target, a);
                }
            }
            *out.terms.entry(reduced).or_default() += coeff;
        }
        out.prune();
        out
    }

    /// Apply to a dense statevector.
    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); state.len()];
        for (p, &c) in &self.terms {
            let (x, z) = p.masks();
            let y = p.y_count();
            for (idx, &amp) in state.iter().enumerate() {
                if amp == Complex64::default() {
                    continue;
                }
                let (ph, target) = apply_masks(x, z, y, idx);
                out[target] += c * ph * amp;
            }
        }
        out
    }

    /// `<psi|self|psi>` on a dense statevector.
    pub fn expectation(&self, state: &[Complex64]) -> Complex64 {
        let applied = self.apply(state);
        state
            .iter()
            .zip(&applied)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Dense matrix on `n_qubits` qubits.
    pub fn to_matrix(&self, n_qubits: usize) -> Result<DMatrix<Complex64>> {
        if n_qubits > DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_qubits,
                limit: DENSE_LIMIT,
            });
        }
        let needed = self.min_qubits();
        if needed > n_qubits {
            return Err(Error::QubitOutOfRange {
                index: needed - 1,
                n_qubits,
            });
        }
        let dim = 1usize << n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, &c) in &self.terms {
            let (x, z) = p.masks();
            let y = p.y_count();
            for col in 0..dim {
                let (ph, row) = apply_masks(x, z, y, col);
                m[(row, col)] += c * ph;
            }
        }
        Ok(m)
    }
}

impl From<PauliString> for PauliSum {
    fn from(p: PauliString) -> Self {
        Self::from_terms([(p, Complex64::new(1.0, 0.0))])
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;

    fn add(self, rhs: &PauliSum) -> PauliSum {
        PauliSum::from_terms(self.terms.iter().chain(&rhs.terms).map(|(p, &c)| (p.clone(), c)))
    }
}

impl Add for PauliSum {
    type Output = PauliSum;

    fn add(self, rhs: PauliSum) -> PauliSum {
        &self + &rhs
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;

    fn neg(self) -> PauliSum {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;

    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self + &(-rhs)
    }
}

impl Sub for PauliSum {
    type Output = PauliSum;

    fn sub(self, rhs: PauliSum) -> PauliSum {
        &self - &rhs
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;

    fn mul(self, rhs: &PauliSum) -> PauliSum {
        let mut out = BTreeMap::<PauliString, Complex64>::new();
        for (p, &a) in &self.terms {
            for (q, &b) in &rhs.terms {
                let (ph, r) = multiply(p, q);
                *out.entry(r).or_default() += a * b * ph.to_complex();
            }
        }
        let mut s = PauliSum { terms: out };
        s.prune();
        s
    }
}

impl Mul for PauliSum {
    type Output = PauliSum;

    fn mul(self, rhs: PauliSum) -> PauliSum {
        &self * &rhs
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (p, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            let label = if p.is_identity() { "I".to_string() } else { p.to_string() };
            if c.im == 0.0 {
                write!(f, "{} [{}]", c.re, label)?;
            } else {
                write!(f, "({}) [{}]", c, label)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn pauli_1q(a: Option<Axis>) -> DMatrix<Complex64> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let z = c(0.0, 0.0);
        match a {
            None => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(1.0, 0.0)]),
            Some(Axis::X) => DMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
            Some(Axis::Y) => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
            Some(Axis::Z) => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
        }
    }

    /// Independent Kronecker-product construction, highest qubit leftmost.
    fn kron_matrix(p: &PauliString, n: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for q in (0..n).rev() {
            m = m.kronecker(&pauli_1q(p.axis(q)));
        }
        m
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(multiply(&ps("X0"), &ps("Y0")), (Phase::I, ps("Z0")));
        assert_eq!(multiply(&ps("X0"), &ps("X0")), (Phase::ONE, PauliString::identity()));
        assert_eq!(multiply(&ps("X0 Z1"), &ps("Y0 Z1")), (Phase::I, ps("Z0")));
    }

    #[test]
    fn multiply_two_qubit_case_matches_matrices() {
        let (ph, r) = multiply(&ps("X0 Z1"), &ps("Y0 Z1"));
        let lhs = kron_matrix(&ps("X0 Z1"), 2) * kron_matrix(&ps("Y0 Z1"), 2);
        let rhs = kron_matrix(&r, 2) * ph.to_complex();
        assert!(max_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn commutation_examples() {
        assert!(!commutes(&ps("X0"), &ps("Z0")));
        assert!(commutes(&ps("X1 Y0"), &ps("Y1 X0")));
        assert!(qubitwise_commutes(&ps("Z0"), &ps("Z0 Z1")));
        assert!(!qubitwise_commutes(&ps("X0 X1"), &ps("Y0 Y1")));
        assert!(qubitwise_commutes(&ps("X1 X0"), &ps("X2 X1")));
    }

    #[test]
    fn text_round_trip() {
        let p = ps("Z2 X0 Y1");
        assert_eq!(p.to_string(), "X0 Y1 Z2");
        assert_eq!(ps(""), PauliString::identity());
        assert!("X0 X0".parse::<PauliString>().is_err());
        assert!("Q3".parse::<PauliString>().is_err());
        assert!("X".parse::<PauliString>().is_err());
    }

    #[test]
    fn canonical_order_puts_identity_first() {
        let mut v = [ps("Z1"), ps(""), ps("X0 Z1"), ps("Z0"), ps("X0")];
        v.sort();
        let names: Vec<String> = v.iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["", "X0", "X0 Z1", "Z0", "Z1"]);
    }

    #[test]
    fn to_matrix_examples() {
        let z = ps("Z0").to_matrix(1).unwrap();
        assert_eq!(z[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(z[(1, 1)], Complex64::new(-1.0, 0.0));
        let c = PauliSum::constant(0.7).to_matrix(2).unwrap();
        assert!(max_diff(&c, &(DMatrix::identity(4, 4) * Complex64::new(0.7, 0.0))) < 1e-15);
    }

    #[test]
    fn to_matrix_rejects_large_and_out_of_range() {
        assert!(matches!(
            PauliSum::constant(1.0).to_matrix(13),
            Err(Error::DenseLimit { .. })
        ));
        assert!(matches!(
            PauliSum::from(ps("Z3")).to_matrix(2),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    fn reduced_h2(c: [f64; 6]) -> PauliSum {
        PauliSum::from_real_terms([
            (ps(""), c[0]),
            (ps("Z0"), c[1]),
            (ps("Z1"), c[2]),
            (ps("Z0 Z1"), c[3]),
            (ps("X0 X1"), c[4]),
            (ps("Y0 Y1"), c[5]),
        ])
    }

    #[test]
    fn two_qubit_hamiltonian_matrix_matches_kronecker_build() {
        let c = [-0.32, 0.39, -0.01, 0.011, 0.18, 0.18];
        let h = reduced_h2(c);
        let m = h.to_matrix(2).unwrap();
        let mut oracle = DMatrix::<Complex64>::zeros(4, 4);
        for (p, coeff) in h.iter() {
            oracle += kron_matrix(p, 2) * *coeff;
        }
        assert!(max_diff(&m, &oracle) < 1e-15);
        assert!(max_diff(&m, &m.adjoint()) < 1e-15);
    }

    #[test]
    fn conjugate_frame_examples() {
        let h = reduced_h2([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let frame = ps("X0 X1");
        let g = h.conjugate_frame(&frame);
        for (p, c) in g.iter() {
            let flipped = matches!(p.to_string().as_str(), "Z0" | "Z1");
            let expected = if flipped { -h.coeff(p) } else { h.coeff(p) };
            assert_eq!(*c, expected, "{p}");
        }
        let f = kron_matrix(&frame, 2);
        let oracle = &f * h.to_matrix(2).unwrap() * &f;
        assert!(max_diff(&g.to_matrix(2).unwrap(), &oracle) < 1e-14);
        assert_eq!(h.conjugate_frame(&PauliString::identity()), h);
        let z = PauliSum::from(ps("Z0")).conjugate_frame(&ps("X0"));
        assert_eq!(z.coeff(&ps("Z0")), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn arithmetic_prunes_cancellations() {
        let a = PauliSum::from(ps("X0"));
        let d = &a - &a;
        assert!(d.is_empty());
        let tiny = PauliSum::from_real_terms([(ps("Z0"), 1e-12)]);
        assert!(tiny.is_empty());
        let sq = &a * &a;
        assert_eq!(sq, PauliSum::constant(1.0));
    }

    #[test]
    fn apply_matches_matrix() {
        let h = reduced_h2([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]) + PauliSum::from(ps("Y0 X1"));
        let psi: Vec<Complex64> = (0..4).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let out = h.apply(&psi);
        let m = h.to_matrix(2).unwrap();
        let v = nalgebra::DVector::from_vec(psi.clone());
        let expected = m * v;
        for k in 0..4 {
            assert!((out[k] - expected[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn basis_action() {
        let b: BasisState = "01".parse().unwrap();
        let (amp, out) = ps("X1 Y0").apply_to_basis(b).unwrap();
        assert_eq!(out.to_string(), "10");
        assert_eq!(amp, Complex64::new(0.0, -1.0));
        assert_eq!(ps("Z0 Z1").basis_expectation(b), -1.0);
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0u8..4, n).prop_map(|codes| {
            PauliString::from_ops(codes.into_iter().enumerate().filter_map(|(q, c)| match c {
                1 => Some((q, Axis::X)),
                2 => Some((q, Axis::Y)),
                3 => Some((q, Axis::Z)),
                _ => None,
            }))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn multiply_respects_matrices(p in arb_string(4), q in arb_string(4)) {
            let (ph, r) = multiply(&p, &q);
            let lhs = kron_matrix(&p, 4) * kron_matrix(&q, 4);
            let rhs = kron_matrix(&r, 4) * ph.to_complex();
            prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
            prop_assert!(max_diff(&p.to_matrix(4).unwrap(), &kron_matrix(&p, 4)) < 1e-15);
        }

        #[test]
        fn commutes_matches_matrix_commutator(p in arb_string(4), q in arb_string(4)) {
            let a = kron_matrix(&p, 4);
            let b = kron_matrix(&q, 4);
            let comm = &a * &b - &b * &a;
            let zero = comm.iter().all(|z| z.norm() < 1e-12);
            prop_assert_eq!(commutes(&p, &q), zero);
            if qubitwise_commutes(&p, &q) {
                prop_assert!(commutes(&p, &q));
            }
        }

        #[test]
        fn multiply_is_associative(p in arb_string(4), q in arb_string(4), r in arb_string(4)) {
            let (a1, pq) = multiply(&p, &q);
            let (a2, left) = multiply(&pq, &r);
            let (b1, qr) = multiply(&q, &r);
            let (b2, right) = multiply(&p, &qr);
            prop_assert_eq!(left, right);
            prop_assert_eq!(a1 * a2, b1 * b2);
        }

        #[test]
        fn conjugate_frame_is_involution(
            strings in proptest::collection::vec(arb_string(3), 1..6),
            coeffs in proptest::collection::vec(-1.0f64..1.0, 6),
            frame in arb_string(3),
        ) {
            let h = PauliSum::from_real_terms(strings.into_iter().zip(coeffs));
            prop_assert_eq!(h.conjugate_frame(&frame).conjugate_frame(&frame), h);
        }
    }
}
