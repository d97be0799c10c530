//! Turning fermionic coefficient tables into qubit tables and ansatz specs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ansatz::{amplitudes_for, reduce_on_reference, screen, subterm_approximation, uccsd_generators, AnsatzEntry, AnsatzSpec, SpinPolicy, TermSelector};
use crate::basis::BasisState;
use crate::error::{Error, Result};
use crate::fermion::{taper_qubits, Mapping, TaperingMap};
use crate::pauli::{Axis, PauliString, PauliSum};
use crate::table::{AmplitudeFile, CoefficientTable, TableKind};

/// Which qubits to remove after mapping.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tapering {
    #[default]
    None,
    /// Every qubit acted on only by `I` and `Z` in all geometries.
    Auto,
    /// Keep only these qubits, fixing the rest to the reference.
    Support(Vec<usize>),
}

fn fermionic_check(table: &CoefficientTable) -> Result<()> {
    if !table.mapping.is_fermionic() {
        return Err(Error::Table(format!("expected a fermionic table, got {:?}", table.mapping)));
    }
    Ok(())
}

fn mapped_geometries(table: &CoefficientTable, mapping: Mapping) -> Result<Vec<PauliSum>> {
    table
        .geometries
        .iter()
        .map(|g| mapping.transform(&g.fermion_sum()?, table.n_qubits))
        .collect()
}

fn tapering_map(operators: &[PauliSum], reference: BasisState, tapering: &Tapering) -> Result<Option<TaperingMap>> {
    let n = reference.n_qubits();
    match tapering {
        Tapering::None => Ok(None),
        Tapering::Auto => {
            let union = PauliSum::from_real_terms(operators.iter().flat_map(|h| h.strings().map(|p| (p.clone(), 1.0))));
            let t = taper_qubits(&union, reference)?;
            Ok((!t.map.is_empty()).then_some(t.map))
        }
        Tapering::Support(keep) => {
            if let Some(&q) = keep.iter().find(|&&q| q >= n) {
                return Err(Error::QubitOutOfRange { index: q, n_qubits: n });
            }
            if keep.is_empty() {
                return Err(Error::InvalidSubset("support is empty".into()));
            }
            let removed: BTreeMap<usize, i8> = (0..n)
                .filter(|q| !keep.contains(q))
                .map(|q| (q, reference.z_eigenvalue(q) as i8))
                .collect();
            Ok(Some(TaperingMap::new(n, removed)?))
        }
    }
}

/// Qubit-form table of a fermionic table, optionally tapered. The
/// reference occupation is encoded with the mapping.
pub fn transform_table(table: &CoefficientTable, mapping: Mapping, tapering: &Tapering) -> Result<CoefficientTable> {
    fermionic_check(table)?;
    let operators = mapped_geometries(table, mapping)?;
    let reference = mapping.encode(table.reference);
    let map = tapering_map(&operators, reference, tapering)?;
    let (operators, reference) = match &map {
        Some(m) => (operators.iter().map(|h| m.apply(h)).collect(), m.reduce_state(reference)?),
        None => (operators, reference),
    };
    let kind = TableKind::for_mapping(mapping, map.is_some());
    CoefficientTable::from_qubit_operators(table, kind, reference, map, &operators)
}

/// How each excitation's mapped exponent becomes a single generator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Exact reduction on the reference, falling back to the lowest-weight
    /// term when the exponent does not reduce.
    #[default]
    Auto,
    Exact,
    Subterm(TermSelector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzOptions {
    pub mapping: Mapping,
    pub tapering: Tapering,
    pub threshold: f64,
    pub policy: SpinPolicy,
    pub reduction: Reduction,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            mapping: Mapping::BravyiKitaev,
            tapering: Tapering::None,
            threshold: 1e-3,
            policy: SpinPolicy::Unrestricted,
            reduction: Reduction::Auto,
        }
    }
}

/// An ansatz with a record of how each entry was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzBuild {
    pub spec: AnsatzSpec,
    /// Mapped exponent of each entry on the final register, for error checks.
    pub exponents: Vec<PauliSum>,
    pub notes: Vec<String>,
}

/// Screened UCCSD excitations mapped to qubits, tapered like the
/// Hamiltonian, and reduced to one generator each.
pub fn build_ansatz(table: &CoefficientTable, amplitudes: &AmplitudeFile, opts: &AnsatzOptions) -> Result<AnsatzBuild> {
    fermionic_check(table)?;
    let n = table.n_qubits;
    let n_occ = table.reference.count_ones() as usize;
    if table.reference.bits() != (1u64 << n_occ) - 1 {
        return Err(Error::InvalidArgument(format!(
            "reference {} must occupy the lowest modes",
            table.reference
        )));
    }
    let ops = uccsd_generators(n_occ, n - n_occ, opts.policy);
    let kept = screen(&ops, &amplitudes_for(&ops, amplitudes), opts.threshold)?;
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no excitation has an amplitude of at least {}",
            opts.threshold
        )));
    }
    let operators = mapped_geometries(table, opts.mapping)?;
    let full_reference = opts.mapping.encode(table.reference);
    let map = tapering_map(&operators, full_reference, &opts.tapering)?;
    let reference = match &map {
        Some(m) => m.reduce_state(full_reference)?,
        None => full_reference,
    };

    let mut entries = Vec::new();
    let mut exponents = Vec::new();
    let mut notes = Vec::new();
    for op in &kept {
        let full = op.exponent(opts.mapping, n)?;
        let (exponent, dropped) = match &map {
            Some(m) => {
                let off_support = full
                    .strings()
                    .filter(|p| p.ops().any(|(q, a)| m.removed().contains_key(&q) && a != Axis::Z))
                    .count();
                if off_support > 0 {
                    notes.push(format!(
                        "{}: {off_support} of {} terms flip removed qubits and are dropped",
                        op.parameter,
                        full.len()
                    ));
                }
                (m.apply(&full), off_support > 0)
            }
            None => (full, false),
        };
        if exponent.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} vanishes on the retained qubits",
                op.parameter
            )));
        }
        let entry = match &opts.reduction {
            Reduction::Exact => reduce_on_reference(&op.parameter, &exponent, reference)?,
            Reduction::Subterm(sel) => subterm_approximation(&op.parameter, &exponent, sel)?,
            Reduction::Auto => match reduce_on_reference(&op.parameter, &exponent, reference) {
                Ok(e) => e,
                Err(err) => {
                    notes.push(format!("{}: {err}; keeping the lowest-weight term", op.parameter));
                    subterm_approximation(&op.parameter, &exponent, &TermSelector::LowestWeight)?
                }
            },
        };
        entries.push(AnsatzEntry {
            approximated: entry.approximated || dropped,
            ..entry
        });
        exponents.push(exponent);
    }
    Ok(AnsatzBuild {
        spec: AnsatzSpec::new(reference, entries)?,
        exponents,
        notes,
    })
}

/// Human-readable listing of one geometry's terms.
pub fn term_report(table: &CoefficientTable) -> Result<String> {
    let mut out = format!(
        "{} {} {:?}: {} qubits, reference {}\n",
        table.molecule, table.basis, table.mapping, table.n_qubits, table.reference
    );
    if let Some(g) = table.geometries.first() {
        out.push_str(&format!("R = {} angstrom, {} terms\n", g.r_angstrom, g.terms.len()));
        for t in &g.terms {
            let label = t
                .pauli
                .as_ref()
                .map(|p: &PauliString| if p.is_identity() { "I".to_string() } else { p.to_string() })
                .or_else(|| t.op.as_ref().map(ToString::to_string))
                .unwrap_or_default();
            out.push_str(&format!("  {label:<24} {:+.12}\n", t.coeff));
        }
    }
    Ok(out)
}
