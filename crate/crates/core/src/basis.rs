//! Computational basis states.
//!
//! Bitstrings are written with the highest qubit on the left, so `"0011"`
//! has qubits 0 and 1 in `|1>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BasisState {
    bits: u64,
    n_qubits: usize,
}

impl BasisState {
    pub fn new(bits: u64, n_qubits: usize) -> Result<Self> {
        if n_qubits > 63 {
            return Err(Error::InvalidArgument(format!(
                "basis states are limited to 63 qubits, got {n_qubits}"
            )));
        }
        if bits >> n_qubits != 0 {
            return Err(Error::ParseBasisState(format!(
                "bits {bits:#b} do not fit in {n_qubits} qubits"
            )));
        }
        Ok(Self { bits, n_qubits })
    }

    /// All-zero state on `n_qubits` qubits.
    pub fn zeros(n_qubits: usize) -> Self {
        Self { bits: 0, n_qubits }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Basis index into a statevector.
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn bit(&self, qubit: usize) -> bool {
        (self.bits >> qubit) & 1 == 1
    }

    /// Eigenvalue of `Z` on `qubit`: `|0>` maps to +1, `|1>` to -1.
    pub fn z_eigenvalue(&self, qubit: usize) -> f64 {
        if self.bit(qubit) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn with_bit(mut self, qubit: usize, value: bool) -> Self {
        if value {
            self.bits |= 1 << qubit;
        } else {
            self.bits &= !(1 << qubit);
        }
        self
    }

    pub fn flip(self, qubit: usize) -> Self {
        let v = !self.bit(qubit);
        self.with_bit(qubit, v)
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            f.write_str(if self.bit(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BasisState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('|').trim_end_matches('>');
        if s.is_empty() || s.len() > 63 {
            return Err(Error::ParseBasisState(s.to_string()));
        }
        let mut bits = 0u64;
        for (pos, ch) in s.chars().rev().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << pos,
                _ => return Err(Error::ParseBasisState(s.to_string())),
            }
        }
        Ok(Self {
            bits,
            n_qubits: s.len(),
        })
    }
}

impl TryFrom<String> for BasisState {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BasisState> for String {
    fn from(b: BasisState) -> String {
        b.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let b: BasisState = "0011".parse().unwrap();
        assert_eq!(b.n_qubits(), 4);
        assert!(b.bit(0) && b.bit(1) && !b.bit(2));
        assert_eq!(b.to_string(), "0011");
        assert_eq!("|01>".parse::<BasisState>().unwrap().bits(), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!("01a".parse::<BasisState>().is_err());
        assert!("".parse::<BasisState>().is_err());
    }

    #[test]
    fn z_eigenvalues() {
        let b: BasisState = "01".parse().unwrap();
        assert_eq!(b.z_eigenvalue(0), -1.0);
        assert_eq!(b.z_eigenvalue(1), 1.0);
        assert_eq!(b.flip(1).to_string(), "11");
    }
}
