use anyhow::{bail, Result};
use ionvqe::surface::{assemble_pes, Normalization, PesMethod, PesPoint, PES_CSV_HEADER};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub method: PesMethod,
    pub n_points: usize,
    pub well_depth: Option<f64>,
    pub r_at_minimum: Option<f64>,
    pub non_parallel_error: Option<f64>,
}

/// One CSV holding a curve per method, in order of first appearance.
/// Curves are compared against `reference` when it covers their R values.
pub fn curves_csv(
    points: &[PesPoint],
    normalization: Normalization,
    reference: Option<&[PesPoint]>,
    preamble: &[String],
) -> Result<(String, Vec<CurveSummary>)> {
    let mut methods: Vec<PesMethod> = Vec::new();
    for p in points {
        if !methods.contains(&p.method) {
            methods.push(p.method);
        }
    }
    let mut csv: String = preamble.iter().map(|l| format!("# {l}\n")).collect();
    csv.push_str(PES_CSV_HEADER);
    csv.push('\n');
    let mut summaries = Vec::new();
    for m in methods {
        let curve: Vec<PesPoint> = points.iter().filter(|p| p.method == m).cloned().collect();
        if curve.len() < 2 {
            if normalization != Normalization::Absolute {
                bail!("{m} has a single R value, which cannot be offset-normalized");
            }
            for p in &curve {
                csv.push_str(&format!("{:?},{:?},{:?},{},{}\n", p.r_angstrom, p.e_min, p.e_err, p.method, normalization));
            }
            summaries.push(CurveSummary {
                method: m,
                n_points: curve.len(),
                well_depth: None,
                r_at_minimum: None,
                non_parallel_error: None,
            });
            continue;
        }
        let covered = reference.filter(|r| {
            curve
                .iter()
                .all(|p| r.iter().any(|q| (q.r_angstrom - p.r_angstrom).abs() < 1e-9))
        });
        let table = assemble_pes(&curve, normalization, covered.filter(|_| m != PesMethod::Exact))?;
        csv.extend(table.to_csv(&[]).lines().skip(1).map(|l| format!("{l}\n")));
        summaries.push(CurveSummary {
            method: m,
            n_points: curve.len(),
            well_depth: Some(table.well_depth),
            r_at_minimum: Some(table.r_at_minimum),
            non_parallel_error: table.non_parallel_error,
        });
    }
    Ok((csv, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(r: f64, e: f64, method: PesMethod) -> PesPoint {
        PesPoint {
            r_angstrom: r,
            e_min: e,
            e_err: 0.0,
            method,
        }
    }

    #[test]
    fn groups_by_method_and_compares_to_reference() {
        let exact = vec![pt(0.5, -1.0, PesMethod::Exact), pt(1.0, -1.2, PesMethod::Exact), pt(2.0, -1.1, PesMethod::Exact)];
        let mut points = vec![pt(1.0, -1.15, PesMethod::Vqe), pt(0.5, -0.9, PesMethod::Vqe), pt(2.0, -1.05, PesMethod::Vqe)];
        points.extend(exact.clone());
        let (csv, s) = curves_csv(&points, Normalization::Absolute, Some(&exact), &["x".into()]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# x");
        assert_eq!(lines[1], PES_CSV_HEADER);
        assert_eq!(lines.len(), 8);
        assert!(lines[2].starts_with("0.5,-0.9,0.0,vqe"));
        assert_eq!(s[0].method, PesMethod::Vqe);
        assert!((s[0].non_parallel_error.unwrap() - 0.05).abs() < 1e-12);
        assert!((s[0].well_depth.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(s[1].non_parallel_error, None);
    }

    #[test]
    fn single_point_curves_need_absolute_energies() {
        let points = [pt(1.0, -1.0, PesMethod::Vqe)];
        assert!(curves_csv(&points, Normalization::Absolute, None, &[]).is_ok());
        assert!(curves_csv(&points, Normalization::LargeROffset, None, &[]).is_err());
    }
}
