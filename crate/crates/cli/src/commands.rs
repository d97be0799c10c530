use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::ValueEnum;
use ionvqe::ansatz::{AnsatzSpec, SpinPolicy, TermSelector};
use ionvqe::fermion::Mapping;
use ionvqe::optimizer::{AnnealSchedule, NelderMeadOptions, TraceEntry};
use ionvqe::pipeline::{build_ansatz, term_report, transform_table, AnsatzOptions, Reduction, Tapering};
use ionvqe::simulator::{DephasingMode, NoiseModel};
use ionvqe::surface::{
    exact_ground_energy, gpr_fit, quad2d_fit, sinusoid_fit, GprConfig, Normalization, PesMethod, PesPoint, QuadFilter,
    Sample, ScanGrid,
};
use ionvqe::table::{AmplitudeFile, CoefficientTable, Geometry};
use ionvqe::vqe::{flipped_frame, scan as scan_grid, trace_samples, vqe_run, EnergyModel, OptimizerChoice};
use ionvqe::{PauliString, PauliSum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::pes::curves_csv;
use crate::run::{r_tag, write_json, write_text, Run};
use crate::{
    AnsatzArgs, DfsArg, ExactArgs, FitArgs, MappingArg, MethodArg, NoiseArg, NoiseArgs, NoiseSimArgs, NormalizationArg,
    OptimizerArg, PolicyArg, ProblemArgs, ReductionArg, ScanArgs, TransformArgs, VqeArgs,
};

fn name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn mapping(m: MappingArg) -> Mapping {
    match m {
        MappingArg::Jw => Mapping::JordanWigner,
        MappingArg::Bk => Mapping::BravyiKitaev,
    }
}

fn normalization(n: NormalizationArg) -> Normalization {
    match n {
        NormalizationArg::Absolute => Normalization::Absolute,
        NormalizationArg::LargeROffset => Normalization::LargeROffset,
    }
}

fn parse_taper(s: &str) -> Result<Tapering> {
    match s {
        "none" => Ok(Tapering::None),
        "auto" => Ok(Tapering::Auto),
        list => list
            .split(',')
            .map(|q| q.trim().parse::<usize>().map_err(|_| anyhow!("bad qubit `{q}` in --taper")))
            .collect::<Result<Vec<_>>>()
            .map(Tapering::Support),
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| anyhow!("bad number `{s}` in {what}"))
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
fn parse_axis(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 3, "axis `{s}` is not start:stop:step");
    let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|p| parse_f64(p, "--axis"));
    let (start, stop, step) = (start?, stop?, step?);
    ensure!(step > 0.0 && stop >= start, "axis `{s}` is empty");
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Rounded so that `0.1 * 3` prints as 0.3.
    Ok((0..n).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect())
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| anyhow!("{what} `{s}` is not lo:hi"))?;
    Ok((parse_f64(lo, what)?, parse_f64(hi, what)?))
}

fn noise_model(mode: NoiseArg, t2_ms: Option<f64>, ms_fidelity: f64) -> Result<NoiseModel> {
    let (mode, t2) = match mode {
        NoiseArg::Off => (DephasingMode::Off, f64::INFINITY),
        NoiseArg::Iid | NoiseArg::Collective => {
            let t2 = t2_ms.ok_or_else(|| anyhow!("--t2-ms is required with dephasing noise"))?;
            let m = if matches!(mode, NoiseArg::Iid) { DephasingMode::Iid } else { DephasingMode::Collective };
            (m, t2 * 1e-3)
        }
    };
    Ok(NoiseModel::new(mode, t2, ms_fidelity)?)
}

fn noise_config(n: &NoiseArgs) -> Value {
    json!({ "mode": name(n.noise), "t2_ms": n.t2_ms, "ms_fidelity": n.ms_fidelity })
}

fn label(p: &PauliString) -> String {
    if p.is_identity() {
        "I".into()
    } else {
        p.to_string()
    }
}

fn load_table(path: &Path) -> Result<CoefficientTable> {
    CoefficientTable::load(path).with_context(|| format!("loading table {}", path.display()))
}

fn load_problem(p: &ProblemArgs) -> Result<(CoefficientTable, AnsatzSpec)> {
    let table = load_table(&p.table)?;
    ensure!(
        !table.mapping.is_fermionic(),
        "{} is fermionic; map it with `ionvqe transform` first",
        p.table.display()
    );
    let ansatz = AnsatzSpec::load(&p.ansatz).with_context(|| format!("loading ansatz {}", p.ansatz.display()))?;
    ensure!(
        ansatz.n_qubits == table.n_qubits && ansatz.reference == table.reference,
        "ansatz on {} qubits with reference {} does not match the table ({} qubits, reference {})",
        ansatz.n_qubits,
        ansatz.reference,
        table.n_qubits,
        table.reference
    );
    Ok((table, ansatz))
}

fn problem_config(p: &ProblemArgs) -> Value {
    json!({ "r": p.r, "dfs": name(p.dfs) })
}

/// Geometries to run with their index in the table.
fn select<'a>(table: &'a CoefficientTable, rs: &[f64]) -> Result<Vec<(usize, &'a Geometry)>> {
    if rs.is_empty() {
        return Ok(table.geometries.iter().enumerate().collect());
    }
    rs.iter()
        .map(|&r| {
            table
                .geometries
                .iter()
                .position(|g| (g.r_angstrom - r).abs() < 1e-9)
                .map(|i| (i, &table.geometries[i]))
                .ok_or_else(|| anyhow!("no geometry at R = {r} in the table"))
        })
        .collect()
}

fn framed(h: PauliSum, ansatz: &AnsatzSpec, dfs: DfsArg) -> Result<(PauliSum, AnsatzSpec)> {
    match dfs {
        DfsArg::Protected => Ok((h, ansatz.clone())),
        DfsArg::Unprotected => Ok(flipped_frame(&h, ansatz)?),
    }
}

/// Runs `f` on every geometry in parallel, keeping input order.
fn per_geometry<T, F>(selected: &[(usize, &Geometry)], f: F) -> Vec<(f64, Result<T>)>
where
    T: Send,
    F: Fn(usize, &Geometry) -> Result<T> + Sync,
{
    selected
        .par_iter()
        .map(|&(i, g)| (g.r_angstrom, f(i, g).with_context(|| format!("R = {}", g.r_angstrom))))
        .collect()
}

/// Splits results, reporting failures on stderr.
fn successes<T>(results: Vec<(f64, Result<T>)>) -> (Vec<T>, usize) {
    let mut ok = Vec::new();
    let mut failed = 0;
    for (_, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("error: {e:#}");
                failed += 1;
            }
        }
    }
    (ok, failed)
}

fn check_failures(failed: usize, total: usize, what: &str) -> Result<()> {
    if failed > 0 {
        bail!("{failed} of {total} {what} failed");
    }
    Ok(())
}

pub fn transform(a: TransformArgs) -> Result<()> {
    let input = load_table(&a.input)?;
    let tapering = parse_taper(&a.taper)?;
    let config = json!({ "mapping": name(a.mapping), "taper": tapering });
    let run = Run::new("transform", config, &[&a.input], a.seed)?;
    let mut out = transform_table(&input, mapping(a.mapping), &tapering)?;
    out.provenance = json!({ "source": input.provenance, "run": run.header() });
    println!(
        "{}: {} qubits before tapering, {} after; {} terms per geometry",
        out.molecule,
        input.n_qubits,
        out.n_qubits,
        out.geometries[0].terms.len()
    );
    write_text(&a.out, &out.to_json()?)?;
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("txt"));
    let mut report: String = run.preamble().iter().map(|l| format!("# {l}\n")).collect();
    report.push_str(&term_report(&out)?);
    write_text(&report_path, &report)
}

pub fn ansatz(a: AnsatzArgs) -> Result<()> {
    let input = load_table(&a.input)?;
    let amplitudes = AmplitudeFile::load(&a.amplitudes).with_context(|| format!("loading {}", a.amplitudes.display()))?;
    let opts = AnsatzOptions {
        mapping: mapping(a.mapping),
        tapering: parse_taper(&a.taper)?,
        threshold: a.threshold,
        policy: match a.policy {
            PolicyArg::Unrestricted => SpinPolicy::Unrestricted,
            PolicyArg::Conserving => SpinPolicy::Conserving,
        },
        reduction: match a.reduction {
            ReductionArg::Auto => Reduction::Auto,
            ReductionArg::Exact => Reduction::Exact,
            ReductionArg::LowestWeight => Reduction::Subterm(TermSelector::LowestWeight),
        },
    };
    let config = json!({
        "mapping": name(a.mapping),
        "taper": opts.tapering,
        "policy": name(a.policy),
        "threshold": a.threshold,
        "reduction": name(a.reduction),
    });
    let run = Run::new("ansatz", config, &[&a.input, &a.amplitudes], a.seed)?;
    let build = build_ansatz(&input, &amplitudes, &opts)?;
    for e in &build.spec.entries {
        let note = if e.approximated { " (single-term approximation)" } else { "" };
        println!("{}: generator {} with scale {}{note}", e.parameter, e.generator, e.scale);
    }
    for n in &build.notes {
        eprintln!("note: {n}");
    }
    let mut value = run.stamp(&build.spec)?;
    value["notes"] = json!(build.notes);
    write_json(&a.out, &value)
}

#[derive(Serialize, Deserialize)]
struct TermSeries {
    pauli: String,
    coeff: f64,
    expectations: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScanFile {
    r_angstrom: f64,
    settings: Vec<String>,
    grid: ScanGrid,
    terms: Vec<TermSeries>,
}

pub fn scan(a: ScanArgs) -> Result<()> {
    let (table, ansatz) = load_problem(&a.problem)?;
    let axes = a.axes.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>>>()?;
    ensure!(
        axes.len() == ansatz.n_params(),
        "{} axes given for {} ansatz parameters",
        axes.len(),
        ansatz.n_params()
    );
    let noise = noise_model(a.noise.noise, a.noise.t2_ms, a.noise.ms_fidelity)?;
    let config = json!({
        "problem": problem_config(&a.problem),
        "noise": noise_config(&a.noise),
        "axes": a.axes,
        "shots": a.shots,
    });
    let run = Run::new("scan", config, &[&a.problem.table, &a.problem.ansatz], a.seed)?;
    let selected = select(&table, &a.problem.r)?;
    let results = per_geometry(&selected, |i, g| {
        let (h, spec) = framed(g.hamiltonian()?, &ansatz, a.problem.dfs)?;
        let model = EnergyModel::new(h, spec, noise, a.shots, run.geometry_seed(i))?;
        let (grid, estimates) = scan_grid(&model, g.r_angstrom, axes.clone())?;
        let mut terms: BTreeMap<String, TermSeries> = BTreeMap::new();
        for est in &estimates {
            for t in &est.terms {
                let key = label(&t.pauli);
                terms
                    .entry(key.clone())
                    .or_insert_with(|| TermSeries {
                        pauli: key,
                        coeff: t.coeff,
                        expectations: Vec::new(),
                    })
                    .expectations
                    .push(t.expectation);
            }
        }
        let lowest = grid.energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let file = ScanFile {
            r_angstrom: g.r_angstrom,
            settings: model.settings().iter().map(|s| s.label()).collect(),
            grid,
            terms: terms.into_values().collect(),
        };
        let path = a.out_dir.join(format!("scan_{}.json", r_tag(g.r_angstrom)));
        write_json(&path, &run.stamp(&file)?)?;
        println!("R = {}: {} points, lowest energy {lowest:.6}", g.r_angstrom, file.grid.energies.len());
        Ok(())
    });
    let (_, failed) = successes(results);
    check_failures(failed, selected.len(), "geometries")
}

fn exact_point(g: &Geometry, n_qubits: usize) -> Result<PesPoint> {
    Ok(PesPoint {
        r_angstrom: g.r_angstrom,
        e_min: exact_ground_energy(&g.hamiltonian()?, n_qubits)?,
        e_err: 0.0,
        method: PesMethod::Exact,
    })
}

pub fn vqe(a: VqeArgs) -> Result<()> {
    let (table, ansatz) = load_problem(&a.problem)?;
    let n = ansatz.n_params();
    let theta0 = if a.init.is_empty() { vec![0.0; n] } else { a.init.clone() };
    ensure!(theta0.len() == n, "--init has {} values for {n} parameters", theta0.len());
    // Energy is periodic in each angle with frequency twice the generator scale.
    let frequency = a.frequency.unwrap_or_else(|| ansatz.entries.first().map_or(2.0, |e| 2.0 * e.scale.abs()));
    // A single angle starts with a simplex spanning half a period, so the
    // trace alone supports a sinusoid fit.
    let initial_step = a.initial_step.unwrap_or(if n == 1 { std::f64::consts::PI / frequency } else { 0.5 });
    let options = NelderMeadOptions {
        initial_step,
        max_iterations: a.max_iterations,
        ..Default::default()
    };
    let choice = match a.optimizer {
        OptimizerArg::Nm => OptimizerChoice::NelderMead { options },
        OptimizerArg::Anneal => {
            let (lo, hi) = parse_range(&a.anneal, "--anneal")?;
            OptimizerChoice::Annealed {
                options,
                schedule: AnnealSchedule::new(lo, hi)?,
            }
        }
    };
    let noise = noise_model(a.noise.noise, a.noise.t2_ms, a.noise.ms_fidelity)?;
    let norm = normalization(a.normalization);
    let config = json!({
        "problem": problem_config(&a.problem),
        "noise": noise_config(&a.noise),
        "shots": a.shots,
        "optimizer": choice,
        "init": theta0,
        "frequency": frequency,
        "normalization": norm,
    });
    let run = Run::new("vqe", config, &[&a.problem.table, &a.problem.ansatz], a.seed)?;
    let selected = select(&table, &a.problem.r)?;
    let results = per_geometry(&selected, |i, g| {
        let exact = exact_point(g, table.n_qubits)?;
        let (h, spec) = framed(g.hamiltonian()?, &ansatz, a.problem.dfs)?;
        let model = EnergyModel::new(h, spec, noise, a.shots, run.geometry_seed(i))?;
        let trace = vqe_run(&model, &theta0, &choice)?;
        let r = g.r_angstrom;
        let mut points = vec![PesPoint {
            r_angstrom: r,
            e_min: trace.best_value,
            e_err: trace.best_std,
            method: PesMethod::Vqe,
        }];
        let samples = trace_samples(&trace);
        let mut fits = serde_json::Map::new();
        let mut fit_line = String::new();
        if n == 1 {
            match sinusoid_fit(&samples, frequency) {
                Ok(f) => {
                    points.push(PesPoint {
                        r_angstrom: r,
                        e_min: f.e_min,
                        e_err: f.e_err,
                        method: PesMethod::VqeSinusoid,
                    });
                    fit_line = format!(", sinusoid {:.6}", f.e_min);
                    fits.insert("sinusoid".into(), serde_json::to_value(&f)?);
                }
                Err(e) => {
                    eprintln!("R = {r}: sinusoid fit failed: {e}");
                    fits.insert("sinusoid_error".into(), json!(e.to_string()));
                }
            }
        } else if n == 2 {
            match quad2d_fit(&samples, &[QuadFilter::default()]) {
                Ok(f) => {
                    points.push(PesPoint {
                        r_angstrom: r,
                        e_min: f.e_min,
                        e_err: f.e_err,
                        method: PesMethod::VqeQuad2d,
                    });
                    fit_line = format!(", quad2d {:.6}", f.e_min);
                    fits.insert("quad2d".into(), serde_json::to_value(&f)?);
                }
                Err(e) => {
                    eprintln!("R = {r}: quadratic fit failed: {e}");
                    fits.insert("quad2d_error".into(), json!(e.to_string()));
                }
            }
        }
        let header = json!({
            "r_angstrom": r,
            "terminal": trace.terminal,
            "iterations": trace.iterations,
            "evaluations": trace.entries.len(),
            "best_params": trace.best_params,
            "best_value": trace.best_value,
            "best_std": trace.best_std,
            "exact_energy": exact.e_min,
            "fits": fits,
        });
        let mut text = serde_json::to_string(&run.stamp(&header)?)?;
        text.push('\n');
        for e in &trace.entries {
            text.push_str(&serde_json::to_string(e)?);
            text.push('\n');
        }
        write_text(&a.out_dir.join(format!("trace_{}.jsonl", r_tag(r))), &text)?;
        println!(
            "R = {r}: vqe {:.6} after {} iterations{fit_line}, exact {:.6}",
            trace.best_value, trace.iterations, exact.e_min
        );
        Ok((points, exact))
    });
    let (outcomes, failed) = successes(results);
    let mut points: Vec<PesPoint> = outcomes.iter().flat_map(|(p, _)| p.clone()).collect();
    let exact: Vec<PesPoint> = outcomes.iter().map(|(_, e)| e.clone()).collect();
    points.extend(exact.iter().cloned());
    if !points.is_empty() {
        write_curves(&a.out_dir.join("pes.csv"), &a.out_dir.join("pes_summary.json"), &points, norm, Some(&exact), &run)?;
    }
    check_failures(failed, selected.len(), "geometries")
}

fn write_curves(
    csv_path: &Path,
    summary_path: &Path,
    points: &[PesPoint],
    norm: Normalization,
    reference: Option<&[PesPoint]>,
    run: &Run,
) -> Result<()> {
    let (csv, summary) = curves_csv(points, norm, reference, &run.preamble())?;
    write_text(csv_path, &csv)?;
    write_json(summary_path, &run.stamp(&json!({ "curves": summary }))?)
}

/// Samples loaded from a scan file or an optimizer trace.
struct FitInput {
    file: String,
    r_angstrom: f64,
    samples: Vec<Sample>,
    from_trace: bool,
}

fn load_fit_input(path: &Path) -> Result<FitInput> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Value = serde_json::from_str(lines.next().ok_or_else(|| anyhow!("{file} is empty"))?)
            .with_context(|| format!("{file} line 1"))?;
        let r_angstrom = header["r_angstrom"]
            .as_f64()
            .ok_or_else(|| anyhow!("{file} header has no r_angstrom"))?;
        let samples = lines
            .enumerate()
            .map(|(k, l)| {
                let e: TraceEntry = serde_json::from_str(l).with_context(|| format!("{file} line {}", k + 2))?;
                Ok(Sample::new(e.params, e.value, e.std))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FitInput {
            file,
            r_angstrom,
            samples,
            from_trace: true,
        })
    } else {
        let scan: ScanFile = serde_json::from_str(&text).with_context(|| format!("parsing {file}"))?;
        scan.grid.validate()?;
        Ok(FitInput {
            file,
            r_angstrom: scan.r_angstrom,
            samples: scan.grid.samples(),
            from_trace: false,
        })
    }
}

fn fit_one(input: &FitInput, method: MethodArg, a: &FitArgs, filters: &[QuadFilter]) -> Result<(PesPoint, Value)> {
    let (e_min, e_err, diag, tag) = match method {
        MethodArg::Sinusoid => {
            let f = sinusoid_fit(&input.samples, a.frequency)?;
            (f.e_min, f.e_err, serde_json::to_value(&f)?, [PesMethod::Sinusoid, PesMethod::VqeSinusoid])
        }
        MethodArg::Quad2d => {
            let f = quad2d_fit(&input.samples, filters)?;
            (f.e_min, f.e_err, serde_json::to_value(&f)?, [PesMethod::Quad2d, PesMethod::VqeQuad2d])
        }
        MethodArg::Gpr => {
            let f = gpr_fit(&input.samples, &GprConfig::default())?;
            let diag = json!({
                "x_min": f.x_min,
                "e_min": f.e_min,
                "e_err": f.e_err,
                "log_marginal_likelihood": f.log_marginal_likelihood,
                "length_scales": f.process.length_scales(),
                "signal_variance": f.process.signal_variance(),
            });
            (f.e_min, f.e_err, diag, [PesMethod::Gpr, PesMethod::VqeGpr])
        }
    };
    let point = PesPoint {
        r_angstrom: input.r_angstrom,
        e_min,
        e_err,
        method: tag[input.from_trace as usize],
    };
    Ok((point, diag))
}

pub fn fit(a: FitArgs) -> Result<()> {
    let mut filters = Vec::new();
    if let Some(w) = &a.window {
        let (ra, rb) = w.split_once(',').ok_or_else(|| anyhow!("--window `{w}` is not a0:a1,b0:b1"))?;
        let (a0, a1) = parse_range(ra, "--window")?;
        let (b0, b1) = parse_range(rb, "--window")?;
        filters.push(QuadFilter::Window { lo: [a0, b0], hi: [a1, b1] });
    }
    if !a.around.is_empty() {
        ensure!(a.around.len() == 2, "--around takes two half-widths");
        filters.push(QuadFilter::AroundMinimum {
            half_width: [a.around[0], a.around[1]],
        });
    }
    filters.push(QuadFilter::MedianSigma { k: a.median_sigma });
    let norm = normalization(a.normalization);
    let config = json!({
        "methods": a.methods.iter().map(|&m| name(m)).collect::<Vec<_>>(),
        "frequency": a.frequency,
        "filters": filters,
        "reference": a.table.is_some(),
        "normalization": norm,
    });
    let mut input_paths: Vec<&Path> = a.inputs.iter().map(PathBuf::as_path).collect();
    if let Some(t) = &a.table {
        input_paths.push(t);
    }
    let run = Run::new("fit", config, &input_paths, a.seed)?;
    let inputs = a.inputs.iter().map(|p| load_fit_input(p)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(&FitInput, MethodArg)> = inputs.iter().flat_map(|i| a.methods.iter().map(move |&m| (i, m))).collect();
    let results: Vec<Result<(PesPoint, Value)>> = jobs.par_iter().map(|&(i, m)| fit_one(i, m, &a, &filters)).collect();
    let mut points = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failed = 0;
    for ((input, m), res) in jobs.iter().zip(results) {
        let mut d = json!({ "file": input.file, "r_angstrom": input.r_angstrom, "method": name(*m) });
        match res {
            Ok((p, diag)) => {
                println!("{} R = {}: {} {:.6} +- {:.6}", input.file, p.r_angstrom, p.method, p.e_min, p.e_err);
                d["fit"] = diag;
                points.push(p);
            }
            Err(e) => {
                eprintln!("error: {} R = {} {}: {e}", input.file, input.r_angstrom, name(*m));
                d["error"] = json!(e.to_string());
                failed += 1;
            }
        }
        diagnostics.push(d);
    }
    let reference = match &a.table {
        Some(t) => {
            let table = load_table(t)?;
            let mut rs: Vec<f64> = inputs.iter().map(|i| i.r_angstrom).collect();
            rs.sort_by(f64::total_cmp);
            rs.dedup();
            let selected = select(&table, &rs)?;
            let exact = selected
                .par_iter()
                .map(|(_, g)| exact_point(g, table.n_qubits))
                .collect::<Result<Vec<_>>>()?;
            Some(exact)
        }
        None => None,
    };
    if let Some(exact) = &reference {
        points.extend(exact.iter().cloned());
    }
    let (csv, summary) = curves_csv(&points, norm, reference.as_deref(), &run.preamble())?;
    write_text(&a.out, &csv)?;
    let diag_path = a.diagnostics.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_json(&diag_path, &run.stamp(&json!({ "fits": diagnostics, "curves": summary }))?)?;
    check_failures(failed, jobs.len(), "fits")
}

pub fn noise_sim(a: NoiseSimArgs) -> Result<()> {
    let (table, ansatz) = load_problem(&a.problem)?;
    let n = ansatz.n_params();
    let theta0 = if a.init.is_empty() { vec![0.0; n] } else { a.init.clone() };
    ensure!(theta0.len() == n, "--init has {} values for {n} parameters", theta0.len());
    ensure!(!a.fidelities.is_empty(), "no fidelities given");
    let models = a
        .fidelities
        .iter()
        .map(|&f| noise_model(a.noise, Some(a.t2_ms), f))
        .collect::<Result<Vec<_>>>()?;
    let config = json!({
        "problem": problem_config(&a.problem),
        "noise": name(a.noise),
        "t2_ms": a.t2_ms,
        "fidelities": a.fidelities,
        "init": theta0,
    });
    let run = Run::new("noise-sim", config, &[&a.problem.table, &a.problem.ansatz], a.seed)?;
    let selected = select(&table, &a.problem.r)?;
    let exact = selected
        .par_iter()
        .map(|(_, g)| exact_point(g, table.n_qubits))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..models.len()).flat_map(|f| (0..selected.len()).map(move |k| (f, k))).collect();
    let choice = OptimizerChoice::default();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(f, k)| {
            let (i, g) = selected[k];
            let (h, spec) = framed(g.hamiltonian()?, &ansatz, a.problem.dfs)?;
            let model = EnergyModel::new(h, spec, models[f], None, run.geometry_seed(i))?;
            Ok(vqe_run(&model, &theta0, &choice)?.best_value)
        })
        .collect();
    let mut csv: String = run.preamble().iter().map(|l| format!("# {l}\n")).collect();
    csv.push_str("R_angstrom,ms_fidelity,E_min_hartree,E_exact_hartree,error_hartree\n");
    let mut energies = vec![vec![f64::NAN; selected.len()]; models.len()];
    for (&(f, k), res) in jobs.iter().zip(results) {
        let e = res.with_context(|| format!("F = {}, R = {}", a.fidelities[f], selected[k].1.r_angstrom))?;
        energies[f][k] = e;
    }
    let well_depth = |curve: &[f64]| -> Option<f64> {
        let last = selected.iter().enumerate().max_by(|x, y| x.1 .1.r_angstrom.total_cmp(&y.1 .1.r_angstrom))?.0;
        Some(curve[last] - curve.iter().cloned().fold(f64::INFINITY, f64::min))
    };
    let mut summary = Vec::new();
    for (f, fid) in a.fidelities.iter().enumerate() {
        let errors: Vec<f64> = (0..selected.len()).map(|k| energies[f][k] - exact[k].e_min).collect();
        for k in 0..selected.len() {
            csv.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?}\n",
                exact[k].r_angstrom, fid, energies[f][k], exact[k].e_min, errors[k]
            ));
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let max = errors.iter().cloned().fold(f64::MIN, f64::max);
        println!("F = {fid}: mean error {mean:.6}, max error {max:.6}");
        summary.push(json!({
            "ms_fidelity": fid,
            "well_depth": well_depth(&energies[f]),
            "mean_error": mean,
            "max_error": max,
            "min_error": errors.iter().cloned().fold(f64::MAX, f64::min),
        }));
    }
    let exact_energies: Vec<f64> = exact.iter().map(|p| p.e_min).collect();
    write_text(&a.out, &csv)?;
    let summary_path = a.summary.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_json(
        &summary_path,
        &run.stamp(&json!({ "exact_well_depth": well_depth(&exact_energies), "curves": summary }))?,
    )
}

pub fn exact(a: ExactArgs) -> Result<()> {
    let table = load_table(&a.table)?;
    ensure!(!table.mapping.is_fermionic(), "{} is fermionic; map it first", a.table.display());
    let norm = normalization(a.normalization);
    let config = json!({ "r": a.r, "normalization": norm });
    let run = Run::new("exact", config, &[&a.table], a.seed)?;
    let selected = select(&table, &a.r)?;
    let (points, failed) = successes(per_geometry(&selected, |_, g| exact_point(g, table.n_qubits)));
    for p in &points {
        println!("R = {}: {:.10}", p.r_angstrom, p.e_min);
    }
    if !points.is_empty() {
        write_curves(&a.out, &a.out.with_extension("json"), &points, norm, None, &run)?;
    }
    check_failures(failed, selected.len(), "geometries")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_includes_stop() {
        let a = parse_axis("1.5:6:0.1").unwrap();
        assert_eq!(a.len(), 46);
        assert!((a[45] - 6.0).abs() < 1e-12);
        assert_eq!(parse_axis("2:5:0.15").unwrap().len(), 21);
        assert_eq!(parse_axis("0:0:1").unwrap(), vec![0.0]);
        assert!(parse_axis("1:0:0.1").is_err());
        assert!(parse_axis("0:1").is_err());
    }

    #[test]
    fn taper_forms() {
        assert_eq!(parse_taper("none").unwrap(), Tapering::None);
        assert_eq!(parse_taper("auto").unwrap(), Tapering::Auto);
        assert_eq!(parse_taper("2,4,6").unwrap(), Tapering::Support(vec![2, 4, 6]));
        assert!(parse_taper("2,x").is_err());
    }

    #[test]
    fn dephasing_needs_t2() {
        assert!(noise_model(NoiseArg::Iid, None, 1.0).is_err());
        assert!(noise_model(NoiseArg::Off, None, 0.99).is_ok());
        let m = noise_model(NoiseArg::Collective, Some(40.0), 1.0).unwrap();
        assert_eq!(m.t2, 0.04);
    }
}
