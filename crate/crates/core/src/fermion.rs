//! Fermionic ladder-operator algebra and fermion-to-qubit mappings.
//!
//! Spin orbitals are indexed from 0 with even indices spin-down and odd
//! indices spin-up. A qubit in `|1>` means the mode is occupied.
//!
//! The Bravyi-Kitaev mapping uses the Fenwick-tree layout, which works for
//! any number of modes and reduces to the usual binary-tree layout (even
//! qubits hold occupations, odd qubits partial parities) when the mode count
//! is a power of two. Qubit `j` stores the parity of modes
//! `[j & (j + 1), j]`. For mode `j` three qubit sets appear:
//!
//! * update set `U(j)`: qubits whose stored parity includes mode `j`,
//!   found by iterating `k -> k | (k + 1)` from `j` while `k < n`;
//! * parity set `P(j)`: qubits whose combined parity equals the parity of
//!   modes `0..j`, found by iterating `i -> (i & (i + 1)) - 1` from `j - 1`;
//! * flip set `F(j)`: the part of `P(j)` covering modes `[j & (j + 1), j)`,
//!   so that qubit `j` XOR `F(j)` is the occupation of mode `j`.
//!
//! With `R(j) = P(j) \ F(j)`:
//!
//! ```text
//! a†_j = (X_U X_j Z_P - i X_U Y_j Z_R) / 2
//! a_j  = (X_U X_j Z_P + i X_U Y_j Z_R) / 2
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString, PauliSum, DENSE_LIMIT, PRUNE_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }

    pub fn adjoint(self) -> Self {
        Self {
            mode: self.mode,
            dagger: !self.dagger,
        }
    }

    // Creation operators first, then modes descending.
    fn rank(self) -> (u8, std::cmp::Reverse<usize>) {
        (u8::from(!self.dagger), std::cmp::Reverse(self.mode))
    }
}

impl fmt::Display for Ladder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dagger {
            write!(f, "{}^", self.mode)
        } else {
            write!(f, "{}", self.mode)
        }
    }
}

/// A product of ladder operators such as `"3^ 2^ 0 1"`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LadderProduct(pub Vec<Ladder>);

impl LadderProduct {
    pub fn ops(&self) -> &[Ladder] {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().rev().map(|l| l.adjoint()).collect())
    }

    pub fn min_modes(&self) -> usize {
        self.0.iter().map(|l| l.mode + 1).max().unwrap_or(0)
    }
}

impl fmt::Display for LadderProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for LadderProduct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace()
            .map(|tok| {
                let (digits, dagger) = match tok.strip_suffix('^') {
                    Some(d) => (d, true),
                    None => (tok, false),
                };
                digits
                    .parse()
                    .map(|mode| Ladder { mode, dagger })
                    .map_err(|_| Error::ParseLadder(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(LadderProduct)
    }
}

impl Serialize for LadderProduct {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LadderProduct {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A sum of ladder products kept in normal-ordered canonical form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FermionSum {
    terms: BTreeMap<LadderProduct, Complex64>,
}

impl FermionSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(LadderProduct::default(), Complex64::new(c, 0.0))])
    }

    /// Build from arbitrary products; the result is normal ordered.
    pub fn from_terms<It: IntoIterator<Item = (LadderProduct, Complex64)>>(terms: It) -> Self {
        let mut out = BTreeMap::new();
        for (p, c) in terms {
            accumulate_normal_ordered(p.0, c, &mut out);
        }
        out.retain(|_, c: &mut Complex64| c.norm() >= PRUNE_TOL);
        Self { terms: out }
    }

    pub fn term(descriptor: &str, coeff: f64) -> Result<Self> {
        Ok(Self::from_terms([(descriptor.parse()?, Complex64::new(coeff, 0.0))]))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LadderProduct, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &LadderProduct) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn min_modes(&self) -> usize {
        self.terms.keys().map(LadderProduct::min_modes).max().unwrap_or(0)
    }

    pub fn dagger(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(p, c)| (p.adjoint(), c.conj())))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(p, c)| (p.clone(), c * factor)))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self - &self.dagger();
        d.terms.values().all(|c| c.norm() <= tol)
    }

    /// `sum_p a†_p a_p` over `n_modes` modes.
    pub fn number_operator(n_modes: usize) -> Self {
        Self::from_terms((0..n_modes).map(|p| {
            (
                LadderProduct(vec![Ladder::create(p), Ladder::annihilate(p)]),
                Complex64::new(1.0, 0.0),
            )
        }))
    }

    /// Dense matrix in the occupation-number basis; bit `p` of the basis
    /// index is the occupation of mode `p`.
    pub fn to_matrix(&self, n_modes: usize) -> Result<DMatrix<Complex64>> {
        if n_modes > DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_qubits: n_modes,
                limit: DENSE_LIMIT,
            });
        }
        if self.min_modes() > n_modes {
            return Err(Error::QubitOutOfRange {
                index: self.min_modes() - 1,
                n_qubits: n_modes,
            });
        }
        let dim = 1usize << n_modes;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, &c) in &self.terms {
            for col in 0..dim {
                if let Some((sign, row)) = apply_ladder_product(p, col) {
                    m[(row, col)] += c * sign;
                }
            }
        }
        Ok(m)
    }
}

/// Apply a ladder product (rightmost first) to an occupation index.
fn apply_ladder_product(p: &LadderProduct, mut occ: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    for l in p.0.iter().rev() {
        let bit = 1usize << l.mode;
        let occupied = occ & bit != 0;
        if occupied == l.dagger {
            return None;
        }
        if (occ & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        occ ^= bit;
    }
    Some((sign, occ))
}

fn accumulate_normal_ordered(
    ops: Vec<Ladder>,
    coeff: Complex64,
    out: &mut BTreeMap<LadderProduct, Complex64>,
) {
    let mut stack = vec![(ops, coeff)];
    while let Some((mut ops, c)) = stack.pop() {
        let mut sign = 1.0;
        let mut vanished = false;
        // Insertion sort with anticommutation; contractions spawn new terms.
        let mut i = 1;
        'sort: while i < ops.len() {
            let mut j = i;
            while j > 0 {
                let (a, b) = (ops[j - 1], ops[j]);
                if a.rank() < b.rank() {
                    break;
                }
                if a == b {
                    vanished = true;
                    break 'sort;
                }
                if a.mode == b.mode && !a.dagger && b.dagger {
                    let mut contracted = ops.clone();
                    contracted.drain(j - 1..=j);
                    stack.push((contracted, c * sign));
                }
                ops.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
            i += 1;
        }
        if !vanished {
            *out.entry(LadderProduct(ops)).or_default() += c * sign;
        }
    }
}

impl Add for &FermionSum {
    type Output = FermionSum;

    fn add(self, rhs: &FermionSum) -> FermionSum {
        FermionSum::from_terms(self.terms.iter().chain(&rhs.terms).map(|(p, &c)| (p.clone(), c)))
    }
}

impl Sub for &FermionSum {
    type Output = FermionSum;

    fn sub(self, rhs: &FermionSum) -> FermionSum {
        self + &rhs.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &FermionSum {
    type Output = FermionSum;

    fn mul(self, rhs: &FermionSum) -> FermionSum {
        FermionSum::from_terms(self.terms.iter().flat_map(|(p, &a)| {
            rhs.terms.iter().map(move |(q, &b)| {
                let mut ops = p.0.clone();
                ops.extend_from_slice(&q.0);
                (LadderProduct(ops), a * b)
            })
        }))
    }
}

impl fmt::Display for FermionSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (p, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c}) [{p}]")?;
        }
        Ok(())
    }
}

/// Fermion-to-qubit encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    JordanWigner,
    BravyiKitaev,
}

impl Mapping {
    pub fn transform(self, s: &FermionSum, n_modes: usize) -> Result<PauliSum> {
        match self {
            Mapping::JordanWigner => jordan_wigner(s, n_modes),
            Mapping::BravyiKitaev => bravyi_kitaev(s, n_modes),
        }
    }

    /// Qubit basis state encoding an occupation-number state.
    pub fn encode(self, occupation: BasisState) -> BasisState {
        match self {
            Mapping::JordanWigner => occupation,
            Mapping::BravyiKitaev => bk_encode(occupation),
        }
    }
}

fn check_modes(s: &FermionSum, n_modes: usize) -> Result<()> {
    if s.min_modes() > n_modes {
        return Err(Error::QubitOutOfRange {
            index: s.min_modes() - 1,
            n_qubits: n_modes,
        });
    }
    Ok(())
}

fn map_with<F: Fn(Ladder) -> PauliSum>(s: &FermionSum, ladder: F) -> PauliSum {
    let mut out = PauliSum::zero();
    for (p, &c) in s.iter() {
        let mut prod = PauliSum::constant(1.0);
        for &l in p.ops() {
            prod = &prod * &ladder(l);
        }
        for (q, &d) in prod.iter() {
            out.add_term(q.clone(), d * c);
        }
    }
    out
}

fn ladder_sum(real: PauliString, imag: PauliString, dagger: bool) -> PauliSum {
    let im = if dagger { -0.5 } else { 0.5 };
    PauliSum::from_terms([
        (real, Complex64::new(0.5, 0.0)),
        (imag, Complex64::new(0.0, im)),
    ])
}

/// Jordan-Wigner transform on `n_modes` qubits.
pub fn jordan_wigner(s: &FermionSum, n_modes: usize) -> Result<PauliSum> {
    check_modes(s, n_modes)?;
    Ok(map_with(s, |l| {
        let parity = (0..l.mode).map(|q| (q, Axis::Z));
        let x = PauliString::from_ops(parity.clone().chain([(l.mode, Axis::X)]));
        let y = PauliString::from_ops(parity.chain([(l.mode, Axis::Y)]));
        ladder_sum(x, y, l.dagger)
    }))
}

/// Qubits whose stored parity includes mode `j`, excluding `j` itself.
pub fn bk_update_set(j: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = j | (j + 1);
    while k < n {
        out.push(k);
        k |= k + 1;
    }
    out
}

/// Qubits whose combined parity is that of modes `0..j`.
pub fn bk_parity_set(j: usize) -> Vec<usize> {
    children_from(j, 0)
}

/// Qubits which, with qubit `j`, give the occupation of mode `j`.
pub fn bk_flip_set(j: usize) -> Vec<usize> {
    children_from(j, j & (j + 1))
}

fn children_from(j: usize, floor: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = j as isize - 1;
    while i >= floor as isize {
        out.push(i as usize);
        i = (i & (i + 1)) - 1;
    }
    out
}

/// Bravyi-Kitaev transform on `n_modes` qubits.
pub fn bravyi_kitaev(s: &FermionSum, n_modes: usize) -> Result<PauliSum> {
    check_modes(s, n_modes)?;
    let cache: Vec<(PauliString, PauliString)> = (0..n_modes)
        .map(|j| {
            let update = bk_update_set(j, n_modes);
            let parity = bk_parity_set(j);
            let flip: BTreeSet<usize> = bk_flip_set(j).into_iter().collect();
            let xu = update.iter().map(|&q| (q, Axis::X));
            let real = PauliString::from_ops(
                xu.clone()
                    .chain(parity.iter().map(|&q| (q, Axis::Z)))
                    .chain([(j, Axis::X)]),
            );
            let imag = PauliString::from_ops(
                xu.chain(
                    parity
                        .iter()
                        .filter(|q| !flip.contains(q))
                        .map(|&q| (q, Axis::Z)),
                )
                .chain([(j, Axis::Y)]),
            );
            (real, imag)
        })
        .collect();
    Ok(map_with(s, |l| {
        let (real, imag) = &cache[l.mode];
        ladder_sum(real.clone(), imag.clone(), l.dagger)
    }))
}

/// Occupation state to Bravyi-Kitaev qubit state.
pub fn bk_encode(occupation: BasisState) -> BasisState {
    let n = occupation.n_qubits();
    let mut out = BasisState::zeros(n);
    for j in 0..n {
        let lo = j & (j + 1);
        let parity = (lo..=j).filter(|&m| occupation.bit(m)).count() % 2 == 1;
        out = out.with_bit(j, parity);
    }
    out
}

/// Result of removing `Z`-symmetric qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaperingMap {
    n_original: usize,
    removed: BTreeMap<usize, i8>,
    relabel: BTreeMap<usize, usize>,
}

impl TaperingMap {
    pub fn new(n_original: usize, removed: BTreeMap<usize, i8>) -> Result<Self> {
        for (&q, &e) in &removed {
            if q >= n_original {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: n_original,
                });
            }
            if e != 1 && e != -1 {
                return Err(Error::InvalidArgument(format!(
                    "eigenvalue for qubit {q} must be +1 or -1, got {e}"
                )));
            }
        }
        let relabel = (0..n_original)
            .filter(|q| !removed.contains_key(q))
            .enumerate()
            .map(|(new, old)| (old, new))
            .collect();
        Ok(Self {
            n_original,
            removed,
            relabel,
        })
    }

    pub fn identity(n_original: usize) -> Self {
        Self::new(n_original, BTreeMap::new()).expect("empty map is valid")
    }

    pub fn n_original(&self) -> usize {
        self.n_original
    }

    pub fn n_retained(&self) -> usize {
        self.relabel.len()
    }

    pub fn removed(&self) -> &BTreeMap<usize, i8> {
        &self.removed
    }

    pub fn relabel(&self) -> &BTreeMap<usize, usize> {
        &self.relabel
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    /// Project a sum onto the removed qubits' eigenvalues and relabel.
    pub fn apply(&self, h: &PauliSum) -> PauliSum {
        let fixed = self.removed.iter().map(|(&q, &e)| (q, f64::from(e))).collect();
        h.project_qubits(&fixed, &self.relabel)
    }

    /// Relabel a string supported only on retained qubits.
    pub fn map_string(&self, p: &PauliString) -> Result<PauliString> {
        p.ops()
            .map(|(q, a)| {
                self.relabel
                    .get(&q)
                    .map(|&n| (n, a))
                    .ok_or_else(|| Error::InvalidArgument(format!("{p} acts on removed qubit {q}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::from_ops)
    }

    /// Restrict a basis state to the retained qubits.
    pub fn reduce_state(&self, state: BasisState) -> Result<BasisState> {
        let mut out = BasisState::zeros(self.n_retained());
        for (&old, &new) in &self.relabel {
            out = out.with_bit(new, state.bit(old));
        }
        Ok(out)
    }
}

/// A Hamiltonian with some qubits removed.
#[derive(Clone, Debug, PartialEq)]
pub struct Tapered {
    pub hamiltonian: PauliSum,
    pub map: TaperingMap,
    pub reference: BasisState,
}

/// Remove every qubit on which all terms act with `I` or `Z`, substituting
/// the reference state's `Z` eigenvalue. When no qubit qualifies the input is
/// returned unchanged with an empty map.
pub fn taper_qubits(h: &PauliSum, reference: BasisState) -> Result<Tapered> {
    let n = reference.n_qubits();
    if h.min_qubits() > n {
        return Err(Error::QubitOutOfRange {
            index: h.min_qubits() - 1,
            n_qubits: n,
        });
    }
    let removed = (0..n)
        .filter(|&q| h.strings().all(|p| matches!(p.axis(q), None | Some(Axis::Z))))
        .map(|q| (q, reference.z_eigenvalue(q) as i8))
        .collect();
    finish_taper(h, reference, TaperingMap::new(n, removed)?)
}

/// Keep only the `support` qubits, fixing every other qubit to its
/// reference value. Terms with `X` or `Y` outside the support are dropped,
/// which is the projection onto the reference configuration there.
pub fn taper_to_support(h: &PauliSum, reference: BasisState, support: &[usize]) -> Result<Tapered> {
    let n = reference.n_qubits();
    if let Some(&q) = support.iter().find(|&&q| q >= n) {
        return Err(Error::QubitOutOfRange { index: q, n_qubits: n });
    }
    let keep: BTreeSet<usize> = support.iter().copied().collect();
    if keep.is_empty() {
        return Err(Error::InvalidSubset("support is empty".into()));
    }
    let removed = (0..n)
        .filter(|q| !keep.contains(q))
        .map(|q| (q, reference.z_eigenvalue(q) as i8))
        .collect();
    finish_taper(h, reference, TaperingMap::new(n, removed)?)
}

fn finish_taper(h: &PauliSum, reference: BasisState, map: TaperingMap) -> Result<Tapered> {
    Ok(Tapered {
        hamiltonian: map.apply(h),
        reference: map.reduce_state(reference)?,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(s: &str) -> LadderProduct {
        s.parse().unwrap()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn spectrum(m: &DMatrix<Complex64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Annihilator of mode `p` on `n` modes built from the occupation-basis
    /// definition, independent of the ladder-product code path.
    fn annihilator_matrix(p: usize, n: usize) -> DMatrix<Complex64> {
        let dim = 1 << n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            if col >> p & 1 == 1 {
                let sign = if (0..p).filter(|q| col >> q & 1 == 1).count() % 2 == 0 { 1.0 } else { -1.0 };
                m[(col ^ (1 << p), col)] = Complex64::new(sign, 0.0);
            }
        }
        m
    }

    /// Permutation taking occupation basis vectors to BK basis vectors.
    fn bk_permutation(n: usize) -> DMatrix<Complex64> {
        let dim = 1 << n;
        let mut w = DMatrix::zeros(dim, dim);
        for occ in 0..dim {
            let b = bk_encode(BasisState::new(occ as u64, n).unwrap());
            w[(b.index(), occ)] = Complex64::new(1.0, 0.0);
        }
        w
    }

    #[test]
    fn normal_order_examples() {
        let s = FermionSum::term("0 0^", 1.0).unwrap();
        let expected = &FermionSum::constant(1.0) - &FermionSum::term("0^ 0", 1.0).unwrap();
        assert_eq!(s, expected);
        assert!(FermionSum::term("0^ 0^", 1.0).unwrap().is_empty());

        let s = FermionSum::term("1 0^ 1^", 1.0).unwrap();
        assert_eq!(s.len(), 2);
        let m = s.to_matrix(2).unwrap();
        let a0 = annihilator_matrix(0, 2);
        let a1 = annihilator_matrix(1, 2);
        let oracle = &a1 * a0.adjoint() * a1.adjoint();
        assert!(max_diff(&m, &oracle) < 1e-14);
        assert_eq!(s.coeff(&lp("0^")), Complex64::new(-1.0, 0.0));
        assert_eq!(s.coeff(&lp("1^ 0^ 1")), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn canonical_form_orders_blocks_descending() {
        let s = FermionSum::term("3^ 2^ 0 1", 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&lp("3^ 2^ 1 0")), Complex64::new(-1.0, 0.0));
        let t = FermionSum::term("2^ 3^ 1 0", 1.0).unwrap();
        assert_eq!(t.coeff(&lp("3^ 2^ 1 0")), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn ladder_parse_round_trip() {
        assert_eq!(lp("3^ 2^ 0 1").to_string(), "3^ 2^ 0 1");
        assert!("3^^".parse::<LadderProduct>().is_err());
        assert!("a".parse::<LadderProduct>().is_err());
    }

    #[test]
    fn jordan_wigner_examples() {
        let a0 = jordan_wigner(&FermionSum::term("0^", 1.0).unwrap(), 1).unwrap();
        assert_eq!(a0.coeff(&"X0".parse().unwrap()), Complex64::new(0.5, 0.0));
        assert_eq!(a0.coeff(&"Y0".parse().unwrap()), Complex64::new(0.0, -0.5));
        let n1 = jordan_wigner(&FermionSum::term("1^ 1", 1.0).unwrap(), 2).unwrap();
        assert_eq!(n1, PauliSum::from_real_terms([("".parse().unwrap(), 0.5), ("Z1".parse().unwrap(), -0.5)]));
    }

    #[test]
    fn bravyi_kitaev_mode_zero_is_occupation() {
        let n0 = bravyi_kitaev(&FermionSum::term("0^ 0", 1.0).unwrap(), 4).unwrap();
        assert_eq!(n0, PauliSum::from_real_terms([("".parse().unwrap(), 0.5), ("Z0".parse().unwrap(), -0.5)]));
    }

    #[test]
    fn bk_sets_for_eight_modes() {
        assert_eq!(bk_update_set(0, 8), [1, 3, 7]);
        assert_eq!(bk_update_set(5, 8), [7]);
        assert_eq!(bk_parity_set(7), [6, 5, 3]);
        assert_eq!(bk_flip_set(7), [6, 5, 3]);
        assert_eq!(bk_parity_set(6), [5, 3]);
        assert!(bk_flip_set(6).is_empty());
        assert_eq!(bk_flip_set(5), [4]);
    }

    #[test]
    fn bk_encode_reference() {
        let occ: BasisState = "0011".parse().unwrap();
        assert_eq!(bk_encode(occ).to_string(), "0001");
    }

    #[test]
    fn ladder_matrices_match_oracles() {
        for n in 1..=6 {
            let w = bk_permutation(n);
            for p in 0..n {
                let a = FermionSum::term(&p.to_string(), 1.0).unwrap();
                let oracle = annihilator_matrix(p, n);
                assert!(max_diff(&a.to_matrix(n).unwrap(), &oracle) < 1e-14);
                let jw = jordan_wigner(&a, n).unwrap().to_matrix(n).unwrap();
                assert!(max_diff(&jw, &oracle) < 1e-14, "jw n={n} p={p}");
                let bk = bravyi_kitaev(&a, n).unwrap().to_matrix(n).unwrap();
                let rotated = &w * &oracle * w.transpose();
                assert!(max_diff(&bk, &rotated) < 1e-14, "bk n={n} p={p}");
            }
        }
    }

    #[test]
    fn number_operator_counts_electrons() {
        for mapping in [Mapping::JordanWigner, Mapping::BravyiKitaev] {
            let n = mapping.transform(&FermionSum::number_operator(6), 6).unwrap();
            let occ: BasisState = "000111".parse().unwrap();
            let state = mapping.encode(occ);
            let e: f64 = n.iter().map(|(p, c)| c.re * p.basis_expectation(state)).sum();
            assert_eq!(e, 3.0);
        }
    }

    #[test]
    fn taper_without_candidates_is_identity() {
        let h = PauliSum::from(PauliString::uniform(Axis::X, 0..3));
        let t = taper_qubits(&h, BasisState::zeros(3)).unwrap();
        assert!(t.map.is_empty());
        assert_eq!(t.hamiltonian, h);
    }

    #[test]
    fn tapering_map_relabels_compactly() {
        let m = TaperingMap::new(4, [(1, 1), (3, -1)].into_iter().collect()).unwrap();
        assert_eq!(m.relabel().iter().map(|(&a, &b)| (a, b)).collect::<Vec<_>>(), [(0, 0), (2, 1)]);
        assert!(TaperingMap::new(4, [(1, 2)].into_iter().collect()).is_err());
        let s: PauliString = "X0 Y2".parse().unwrap();
        assert_eq!(m.map_string(&s).unwrap().to_string(), "X0 Y1");
        assert!(m.map_string(&"Z1".parse().unwrap()).is_err());
    }

    fn arb_hermitian(n_modes: usize) -> impl Strategy<Value = FermionSum> {
        let one = proptest::collection::vec((0..n_modes, 0..n_modes, -1.0f64..1.0, -1.0f64..1.0), 1..5);
        let two = proptest::collection::vec(
            (0..n_modes, 0..n_modes, 0..n_modes, 0..n_modes, -1.0f64..1.0, -1.0f64..1.0),
            0..4,
        );
        (one, two).prop_map(|(one, two)| {
            let mut terms = Vec::new();
            for (p, q, re, im) in one {
                terms.push((LadderProduct(vec![Ladder::create(p), Ladder::annihilate(q)]), Complex64::new(re, im)));
            }
            for (p, q, r, s, re, im) in two {
                terms.push((
                    LadderProduct(vec![Ladder::create(p), Ladder::create(q), Ladder::annihilate(r), Ladder::annihilate(s)]),
                    Complex64::new(re, im),
                ));
            }
            let t = FermionSum::from_terms(terms);
            &t + &t.dagger()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jw_and_bk_are_isospectral(h in arb_hermitian(4)) {
            let jw = jordan_wigner(&h, 4).unwrap();
            let bk = bravyi_kitaev(&h, 4).unwrap();
            prop_assert!(jw.is_hermitian(1e-12));
            prop_assert!(bk.is_hermitian(1e-12));
            let a = spectrum(&jw.to_matrix(4).unwrap());
            let b = spectrum(&bk.to_matrix(4).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            let direct = h.to_matrix(4).unwrap();
            prop_assert!(max_diff(&jw.to_matrix(4).unwrap(), &direct) < 1e-12);
        }

        #[test]
        fn normal_order_preserves_matrix(
            ops in proptest::collection::vec((0usize..3, any::<bool>()), 0..6),
            re in -1.0f64..1.0,
        ) {
            let ladder: Vec<Ladder> = ops.iter().map(|&(mode, dagger)| Ladder { mode, dagger }).collect();
            let mut oracle = DMatrix::<Complex64>::identity(8, 8) * Complex64::new(re, 0.0);
            for l in &ladder {
                let a = annihilator_matrix(l.mode, 3);
                oracle *= if l.dagger { a.adjoint() } else { a };
            }
            let s = FermionSum::from_terms([(LadderProduct(ladder), Complex64::new(re, 0.0))]);
            prop_assert!(max_diff(&s.to_matrix(3).unwrap(), &oracle) < 1e-12);
            for (p, _) in s.iter() {
                for w in p.ops().windows(2) {
                    prop_assert!(w[0].rank() < w[1].rank());
                }
            }
        }
    }
}
