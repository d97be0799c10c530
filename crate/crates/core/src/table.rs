//! Per-geometry Hamiltonian coefficient tables and amplitude files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::fermion::{FermionSum, LadderProduct, Mapping, TaperingMap};
use crate::pauli::{PauliString, PauliSum};

/// What kind of operator a table's terms describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Fermionic,
    Jw,
    Bk,
    JwTapered,
    BkTapered,
}

impl TableKind {
    pub fn is_fermionic(self) -> bool {
        self == TableKind::Fermionic
    }

    pub fn for_mapping(mapping: Mapping, tapered: bool) -> Self {
        match (mapping, tapered) {
            (Mapping::JordanWigner, false) => TableKind::Jw,
            (Mapping::JordanWigner, true) => TableKind::JwTapered,
            (Mapping::BravyiKitaev, false) => TableKind::Bk,
            (Mapping::BravyiKitaev, true) => TableKind::BkTapered,
        }
    }
}

/// One term: a ladder descriptor for fermionic tables, a Pauli string otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<LadderProduct>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<PauliString>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r_angstrom: f64,
    pub nuclear_repulsion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fci_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natural_occupations: Option<Vec<f64>>,
    pub terms: Vec<TermRecord>,
}

impl Geometry {
    /// Electronic operator of a fermionic geometry, without nuclear repulsion.
    pub fn fermion_sum(&self) -> Result<FermionSum> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                t.op.clone()
                    .map(|op| (op, Complex64::new(t.coeff, 0.0)))
                    .ok_or_else(|| Error::Table(format!("R = {}: term without `op`", self.r_angstrom)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FermionSum::from_terms(terms))
    }

    /// Electronic qubit operator, without nuclear repulsion.
    pub fn electronic(&self) -> Result<PauliSum> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                t.pauli
                    .clone()
                    .map(|p| (p, t.coeff))
                    .ok_or_else(|| Error::Table(format!("R = {}: term without `pauli`", self.r_angstrom)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliSum::from_real_terms(terms))
    }

    /// Full qubit Hamiltonian including nuclear repulsion on the identity.
    pub fn hamiltonian(&self) -> Result<PauliSum> {
        Ok(&self.electronic()? + &PauliSum::constant(self.nuclear_repulsion))
    }

    fn labels(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| match (&t.op, &t.pauli) {
                (Some(op), None) => format!("op:{op}"),
                (None, Some(p)) => format!("pauli:{p}"),
                _ => "invalid".to_string(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub molecule: String,
    pub basis: String,
    pub mapping: TableKind,
    /// Fermionic modes or qubits, depending on `mapping`.
    #[serde(alias = "n_modes")]
    pub n_qubits: usize,
    pub reference: BasisState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tapering: Option<TaperingMap>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub provenance: serde_json::Value,
    pub geometries: Vec<Geometry>,
}

impl CoefficientTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometries.is_empty() {
            return Err(Error::Table("table has no geometries".into()));
        }
        if self.reference.n_qubits() != self.n_qubits {
            return Err(Error::Table(format!(
                "reference {} does not have {} qubits",
                self.reference, self.n_qubits
            )));
        }
        for w in self.geometries.windows(2) {
            if w[1].r_angstrom <= w[0].r_angstrom {
                return Err(Error::Table(format!(
                    "R values must be strictly increasing ({} then {})",
                    w[0].r_angstrom, w[1].r_angstrom
                )));
            }
        }
        let first = self.geometries[0].labels();
        for g in &self.geometries {
            let labels = g.labels();
            if labels.iter().any(|l| l == "invalid") {
                return Err(Error::Table(format!(
                    "R = {}: each term needs exactly one of `op` or `pauli`",
                    g.r_angstrom
                )));
            }
            let fermionic = labels.iter().all(|l| l.starts_with("op:"));
            if fermionic != self.mapping.is_fermionic() {
                return Err(Error::Table(format!(
                    "R = {}: term kinds do not match mapping {:?}",
                    g.r_angstrom, self.mapping
                )));
            }
            if labels != first {
                return Err(Error::Table(format!(
                    "R = {}: term structure differs from the first geometry",
                    g.r_angstrom
                )));
            }
            let max = if fermionic {
                g.fermion_sum()?.min_modes()
            } else {
                g.electronic()?.min_qubits()
            };
            if max > self.n_qubits {
                return Err(Error::Table(format!(
                    "R = {}: term acts beyond {} qubits",
                    g.r_angstrom, self.n_qubits
                )));
            }
        }
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.geometries.iter().map(|g| g.r_angstrom).collect()
    }

    /// Geometry whose R matches within `1e-9` Å.
    pub fn geometry(&self, r: f64) -> Result<&Geometry> {
        self.geometries
            .iter()
            .find(|g| (g.r_angstrom - r).abs() < 1e-9)
            .ok_or_else(|| Error::Table(format!("no geometry at R = {r}")))
    }

    /// Build a qubit table from per-geometry operators, padding every
    /// geometry to the union of term strings so the structure is shared.
    pub fn from_qubit_operators(
        template: &CoefficientTable,
        mapping: TableKind,
        reference: BasisState,
        tapering: Option<TaperingMap>,
        operators: &[PauliSum],
    ) -> Result<Self> {
        if operators.len() != template.geometries.len() {
            return Err(Error::Dimension(format!(
                "{} operators for {} geometries",
                operators.len(),
                template.geometries.len()
            )));
        }
        let union: BTreeSet<PauliString> = operators.iter().flat_map(|h| h.strings().cloned()).collect();
        let geometries = template
            .geometries
            .iter()
            .zip(operators)
            .map(|(g, h)| {
                let terms = union
                    .iter()
                    .map(|p| {
                        let c = h.coeff(p);
                        if c.im.abs() > 1e-9 {
                            return Err(Error::Table(format!("term {p} has complex coefficient {c}")));
                        }
                        Ok(TermRecord {
                            op: None,
                            pauli: Some(p.clone()),
                            coeff: c.re,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Geometry {
                    terms,
                    ..g.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let table = CoefficientTable {
            molecule: template.molecule.clone(),
            basis: template.basis.clone(),
            mapping,
            n_qubits: reference.n_qubits(),
            reference,
            tapering,
            provenance: template.provenance.clone(),
            geometries,
        };
        table.validate()?;
        Ok(table)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub operator: LadderProduct,
    pub amplitude: f64,
}

/// Classical amplitude guesses for excitation operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFile {
    #[serde(default)]
    pub source: String,
    pub amplitudes: Vec<AmplitudeRecord>,
}

impl AmplitudeFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn amplitude_of(&self, op: &LadderProduct) -> Option<f64> {
        let target = FermionSum::from_terms([(op.clone(), Complex64::new(1.0, 0.0))]);
        self.amplitudes.iter().find_map(|a| {
            let candidate = FermionSum::from_terms([(a.operator.clone(), Complex64::new(1.0, 0.0))]);
            if candidate == target {
                Some(a.amplitude)
            } else if candidate == target.scale(Complex64::new(-1.0, 0.0)) {
                Some(-a.amplitude)
            } else {
                None
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "molecule": "toy", "basis": "none", "mapping": "bk_tapered", "n_qubits": 2,
        "reference": "01",
        "geometries": [
            {"r_angstrom": 0.5, "nuclear_repulsion": 1.0,
             "terms": [{"pauli": "", "coeff": -0.5}, {"pauli": "Z0", "coeff": 0.25}]},
            {"r_angstrom": 0.7, "nuclear_repulsion": 0.75,
             "terms": [{"pauli": "", "coeff": -0.4}, {"pauli": "Z0", "coeff": 0.2}]}
        ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let t = CoefficientTable::from_json(SMALL).unwrap();
        let again = CoefficientTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, again);
        let h = t.geometry(0.5).unwrap().hamiltonian().unwrap();
        assert_eq!(h.constant_term(), 0.5);
    }

    #[test]
    fn rejects_malformed_tables() {
        let empty = SMALL.replace(
            &SMALL[SMALL.find("[\n            {").unwrap()..SMALL.rfind(']').unwrap() + 1],
            "[]",
        );
        assert!(matches!(CoefficientTable::from_json(&empty), Err(Error::Table(_))));
        let unordered = SMALL.replace("0.7", "0.4");
        assert!(CoefficientTable::from_json(&unordered).is_err());
        let mixed = SMALL.replace(r#"{"pauli": "Z0", "coeff": 0.2}"#, r#"{"pauli": "Z1", "coeff": 0.2}"#);
        assert!(CoefficientTable::from_json(&mixed).is_err());
        let err = CoefficientTable::from_json("{\n \"molecule\": 3 }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn amplitude_lookup_respects_anticommutation() {
        let f = AmplitudeFile {
            source: String::new(),
            amplitudes: vec![AmplitudeRecord {
                operator: "3^ 2^ 0 1".parse().unwrap(),
                amplitude: -0.1,
            }],
        };
        assert_eq!(f.amplitude_of(&"3^ 2^ 0 1".parse().unwrap()), Some(-0.1));
        assert_eq!(f.amplitude_of(&"3^ 2^ 1 0".parse().unwrap()), Some(0.1));
        assert_eq!(f.amplitude_of(&"2^ 0".parse().unwrap()), None);
    }
}
