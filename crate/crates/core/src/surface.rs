//! Energy minima from scans and traces, and potential energy curves.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{nelder_mead, Evaluation, NelderMeadOptions};
use crate::pauli::PauliSum;

/// Energies on a one- or two-dimensional parameter grid.
///
/// Values are stored row-major: for two axes the second index runs fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub r_angstrom: f64,
    pub axes: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Dimension(format!("scan grids have 1 or 2 axes, got {}", self.axes.len())));
        }
        let size: usize = self.axes.iter().map(Vec::len).product();
        if size == 0 {
            return Err(Error::Dimension("scan grid is empty".into()));
        }
        if self.energies.len() != size || self.stds.len() != size {
            return Err(Error::Dimension(format!(
                "{} energies and {} stds for a grid of {size} points",
                self.energies.len(),
                self.stds.len()
            )));
        }
        if self.stds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    /// Parameter vector of every grid point, in storage order.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [a] => a.iter().map(|&x| vec![x]).collect(),
            [a, b] => a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect(),
            _ => Vec::new(),
        }
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.coordinates()
            .into_iter()
            .zip(self.energies.iter().zip(&self.stds))
            .map(|(x, (&e, &s))| Sample { x, energy: e, std: s })
            .collect()
    }
}

/// One measured energy at a parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub energy: f64,
    pub std: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, energy: f64, std: f64) -> Self {
        Self { x, energy, std }
    }
}

/// Weighted linear least squares; `None` weights mean unit weights and a
/// covariance rescaled by the residual variance.
struct LinearFit {
    coef: DVector<f64>,
    cov: DMatrix<f64>,
    chi2: f64,
    dof: usize,
}

fn weights(samples: &[Sample]) -> Option<Vec<f64>> {
    samples
        .iter()
        .all(|s| s.std > 0.0)
        .then(|| samples.iter().map(|s| 1.0 / (s.std * s.std)).collect())
}

fn linear_lsq(design: DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> Result<LinearFit> {
    let (n, k) = design.shape();
    let sw: Vec<f64> = match w {
        Some(w) => w.iter().map(|x| x.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let a = DMatrix::from_fn(n, k, |i, j| design[(i, j)] * sw[i]);
    let b = DVector::from_fn(n, |i, _| y[i] * sw[i]);
    let normal = a.transpose() * &a;
    let inv = normal
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Fit("singular design matrix".into()))?;
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let chi2 = (&a * &coef - &b).norm_squared();
    let dof = n.saturating_sub(k);
    let cov = if w.is_some() {
        inv
    } else if dof > 0 {
        inv * (chi2 / dof as f64)
    } else {
        inv * 0.0
    };
    Ok(LinearFit { coef, cov, chi2, dof })
}

fn delta_std(grad: &[f64], cov: &DMatrix<f64>) -> f64 {
    let g = DVector::from_column_slice(grad);
    (g.transpose() * cov * &g)[(0, 0)].max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    /// Non-negative amplitude.
    pub amplitude: f64,
    /// Phase in `[0, period)`.
    pub phase: f64,
    pub frequency: f64,
    pub theta_min: f64,
    pub e_min: f64,
    pub e_err: f64,
    pub chi2_dof: f64,
    pub converged: bool,
}

impl SinusoidFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.offset + self.amplitude * (self.frequency * (theta - self.phase)).sin()
    }
}

/// Reduced chi-square above which a weighted fit is flagged.
pub const MAX_CHI2_DOF: f64 = 4.0;

/// Fit `E = C + A sin(w (theta - theta0))` with `A >= 0`.
pub fn sinusoid_fit(samples: &[Sample], frequency: f64) -> Result<SinusoidFit> {
    if samples.iter().any(|s| s.x.len() != 1) {
        return Err(Error::Dimension("sinusoid fits take one parameter".into()));
    }
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", samples.len())));
    }
    if !(frequency > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {frequency}")));
    }
    let thetas: Vec<f64> = samples.iter().map(|s| s.x[0]).collect();
    let span = thetas.iter().cloned().fold(f64::MIN, f64::max) - thetas.iter().cloned().fold(f64::MAX, f64::min);
    if span < PI / frequency - 1e-12 {
        return Err(Error::Fit("points must span at least half a period".into()));
    }
    let design = DMatrix::from_fn(samples.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (frequency * thetas[i]).sin(),
        _ => (frequency * thetas[i]).cos(),
    });
    let y: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let w = weights(samples);
    let fit = linear_lsq(design, &y, w.as_deref())?;
    let (c, a, b) = (fit.coef[0], fit.coef[1], fit.coef[2]);
    let amplitude = a.hypot(b);
    let period = TAU / frequency;
    // a sin + b cos = A sin(w theta - w theta0) with a = A cos, b = -A sin.
    let phase = ((-b).atan2(a) / frequency).rem_euclid(period);
    let theta_min = (phase + 1.5 * PI / frequency).rem_euclid(period);
    let grad = if amplitude > 0.0 {
        [1.0, -a / amplitude, -b / amplitude]
    } else {
        [1.0, 0.0, 0.0]
    };
    let chi2_dof = if fit.dof > 0 { fit.chi2 / fit.dof as f64 } else { 0.0 };
    Ok(SinusoidFit {
        offset: c,
        amplitude,
        phase,
        frequency,
        theta_min,
        e_min: c - amplitude,
        e_err: delta_std(&grad, &fit.cov),
        chi2_dof,
        converged: w.is_none() || chi2_dof <= MAX_CHI2_DOF,
    })
}

/// Which points enter a quadratic fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadFilter {
    All,
    /// Keep energies within `k` sample standard deviations of the median.
    MedianSigma { k: f64 },
    /// Keep points inside a parameter box.
    Window { lo: [f64; 2], hi: [f64; 2] },
    /// Keep points within a box centred on the lowest-energy sample.
    AroundMinimum { half_width: [f64; 2] },
}

impl Default for QuadFilter {
    fn default() -> Self {
        QuadFilter::MedianSigma { k: 4.0 }
    }
}

impl QuadFilter {
    pub fn apply<'a>(&self, samples: &'a [Sample]) -> Vec<&'a Sample> {
        match *self {
            QuadFilter::All => samples.iter().collect(),
            QuadFilter::MedianSigma { k } => {
                let mut e: Vec<f64> = samples.iter().map(|s| s.energy).collect();
                if e.len() < 2 {
                    return samples.iter().collect();
                }
                e.sort_by(f64::total_cmp);
                let m = e.len();
                let median = if m % 2 == 1 { e[m / 2] } else { (e[m / 2 - 1] + e[m / 2]) / 2.0 };
                let sigma = std_dev(&e);
                samples.iter().filter(|s| (s.energy - median).abs() <= k * sigma).collect()
            }
            QuadFilter::Window { lo, hi } => samples
                .iter()
                .filter(|s| (0..2).all(|d| s.x[d] >= lo[d] && s.x[d] <= hi[d]))
                .collect(),
            QuadFilter::AroundMinimum { half_width } => {
                let Some(best) = samples.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) else {
                    return Vec::new();
                };
                samples
                    .iter()
                    .filter(|s| (0..2).all(|d| (s.x[d] - best.x[d]).abs() <= half_width[d] + 1e-12))
                    .collect()
            }
        }
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad2dFit {
    pub alpha: f64,
    pub beta: f64,
    pub e_min: f64,
    pub e_err: f64,
    pub alpha_err: f64,
    pub beta_err: f64,
    /// `k0 + k1 a + k2 a^2 + k3 b + k4 b^2`.
    pub coefficients: [f64; 5],
    pub n_used: usize,
}

impl Quad2dFit {
    pub fn eval(&self, alpha: f64, beta: f64) -> f64 {
        let k = &self.coefficients;
        k[0] + k[1] * alpha + k[2] * alpha * alpha + k[3] * beta + k[4] * beta * beta
    }
}

/// Separable quadratic `m + (c a - p)^2 + (d b - q)^2` through the points
/// left after applying `filters` in order.
pub fn quad2d_fit(samples: &[Sample], filters: &[QuadFilter]) -> Result<Quad2dFit> {
    if samples.iter().any(|s| s.x.len() != 2) {
        return Err(Error::Dimension("quadratic surface fits take two parameters".into()));
    }
    let mut kept: Vec<Sample> = samples.to_vec();
    for f in filters {
        kept = f.apply(&kept).into_iter().cloned().collect();
    }
    if kept.len() < 6 {
        return Err(Error::Fit(format!("need at least 6 points after filtering, got {}", kept.len())));
    }
    let design = DMatrix::from_fn(kept.len(), 5, |i, j| {
        let (a, b) = (kept[i].x[0], kept[i].x[1]);
        [1.0, a, a * a, b, b * b][j]
    });
    let y: Vec<f64> = kept.iter().map(|s| s.energy).collect();
    let fit = linear_lsq(design, &y, weights(&kept).as_deref())?;
    let k: [f64; 5] = std::array::from_fn(|i| fit.coef[i]);
    let scale = y.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    if k[2] <= 1e-12 * scale || k[4] <= 1e-12 * scale {
        return Err(Error::Fit(format!("degenerate curvature ({:.3e}, {:.3e})", k[2], k[4])));
    }
    let alpha = -k[1] / (2.0 * k[2]);
    let beta = -k[3] / (2.0 * k[4]);
    let e_min = k[0] - k[1] * k[1] / (4.0 * k[2]) - k[3] * k[3] / (4.0 * k[4]);
    let g_m = [
        1.0,
        -k[1] / (2.0 * k[2]),
        k[1] * k[1] / (4.0 * k[2] * k[2]),
        -k[3] / (2.0 * k[4]),
        k[3] * k[3] / (4.0 * k[4] * k[4]),
    ];
    let g_a = [0.0, -1.0 / (2.0 * k[2]), k[1] / (2.0 * k[2] * k[2]), 0.0, 0.0];
    let g_b = [0.0, 0.0, 0.0, -1.0 / (2.0 * k[4]), k[3] / (2.0 * k[4] * k[4])];
    Ok(Quad2dFit {
        alpha,
        beta,
        e_min,
        e_err: delta_std(&g_m, &fit.cov),
        alpha_err: delta_std(&g_a, &fit.cov),
        beta_err: delta_std(&g_b, &fit.cov),
        coefficients: k,
        n_used: kept.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GprConfig {
    /// Evaluation points per axis when searching for the minimum.
    pub resolution: usize,
    /// Largest number of points used to fit hyperparameters.
    pub max_fit_points: usize,
    /// Starting length scales as fractions of each axis range.
    pub length_starts: Vec<f64>,
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            resolution: 121,
            max_fit_points: 250,
            length_starts: vec![0.2, 0.5, 1.0],
        }
    }
}

/// Posterior of a zero-mean process with squared-exponential kernel on
/// centred energies.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    xs: Vec<Vec<f64>>,
    mean: f64,
    signal_var: f64,
    lengths: Vec<f64>,
    alpha: DVector<f64>,
    chol_l: DMatrix<f64>,
}

fn se_kernel(a: &[f64], b: &[f64], signal_var: f64, lengths: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(lengths).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    signal_var * (-0.5 * r2).exp()
}

fn cholesky_with_jitter(k: DMatrix<f64>, scale: f64) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let mut jitter = 0.0;
    let n = k.nrows();
    for step in 0..8 {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c, jitter));
        }
        jitter = scale * 1e-10 * 10f64.powi(step);
    }
    Err(Error::Fit("kernel matrix is not positive definite even with jitter".into()))
}

impl GaussianProcess {
    fn build(samples: &[&Sample], signal_var: f64, lengths: &[f64]) -> Result<(Self, f64)> {
        let n = samples.len();
        let mean = samples.iter().map(|s| s.energy).sum::<f64>() / n as f64;
        let k = DMatrix::from_fn(n, n, |i, j| {
            let v = se_kernel(&samples[i].x, &samples[j].x, signal_var, lengths);
            if i == j {
                v + samples[i].std * samples[i].std
            } else {
                v
            }
        });
        let (chol, _) = cholesky_with_jitter(k, signal_var.max(1e-300))?;
        let y = DVector::from_fn(n, |i, _| samples[i].energy - mean);
        let alpha = chol.solve(&y);
        let l = chol.l();
        let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * TAU.ln();
        Ok((
            Self {
                xs: samples.iter().map(|s| s.x.clone()).collect(),
                mean,
                signal_var,
                lengths: lengths.to_vec(),
                alpha,
                chol_l: l,
            },
            lml,
        ))
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| se_kernel(xi, x, self.signal_var, &self.lengths)),
        );
        let mean = self.mean + ks.dot(&self.alpha);
        let v = self.chol_l.solve_lower_triangular(&ks).expect("triangular factor is invertible");
        let var = (self.signal_var - v.norm_squared()).max(0.0);
        (mean, var.sqrt())
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.lengths
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_var
    }
}

#[derive(Clone, Debug)]
pub struct GprFit {
    pub process: GaussianProcess,
    pub x_min: Vec<f64>,
    pub e_min: f64,
    pub e_err: f64,
    pub log_marginal_likelihood: f64,
}

fn bounds(samples: &[Sample]) -> (Vec<f64>, Vec<f64>) {
    let d = samples[0].x.len();
    let lo = (0..d).map(|j| samples.iter().map(|s| s.x[j]).fold(f64::MAX, f64::min)).collect();
    let hi = (0..d).map(|j| samples.iter().map(|s| s.x[j]).fold(f64::MIN, f64::max)).collect();
    (lo, hi)
}

/// Gaussian process regression with hyperparameters chosen by maximizing
/// the marginal likelihood from several starts; the minimum is located on
/// a dense grid over the sampled box.
pub fn gpr_fit(samples: &[Sample], config: &GprConfig) -> Result<GprFit> {
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", samples.len())));
    }
    let d = samples[0].x.len();
    if d == 0 || d > 2 || samples.iter().any(|s| s.x.len() != d) {
        return Err(Error::Dimension("GPR fits take one or two parameters".into()));
    }
    let (lo, hi) = bounds(samples);
    let ranges: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| if b > a { b - a } else { 1.0 }).collect();
    let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let y_var = if samples.len() > 1 { std_dev(&energies).powi(2) } else { 0.0 };
    let y_var = if y_var > 0.0 { y_var } else { 1e-6 };

    let stride = samples.len().div_ceil(config.max_fit_points.max(4));
    let subset: Vec<&Sample> = samples.iter().step_by(stride).collect();
    let decode = |p: &[f64]| -> (f64, Vec<f64>) {
        let sv = p[0].exp();
        let ls = p[1..].iter().zip(&ranges).map(|(v, r)| v.exp() * r).collect();
        (sv, ls)
    };
    let in_bounds = |p: &[f64]| {
        (p[0] - y_var.ln()).abs() <= 12.0 && p[1..].iter().all(|v| (-6.0..=3.0).contains(v))
    };
    let neg_lml = |p: &[f64], _: usize| -> Result<Evaluation> {
        if !in_bounds(p) {
            return Ok(Evaluation::exact(f64::INFINITY));
        }
        let (sv, ls) = decode(p);
        Ok(Evaluation::exact(match GaussianProcess::build(&subset, sv, &ls) {
            Ok((_, lml)) if lml.is_finite() => -lml,
            _ => f64::INFINITY,
        }))
    };
    let opts = NelderMeadOptions {
        initial_step: 0.7,
        xtol: 1e-4,
        max_iterations: 300,
        ..Default::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for &l0 in &config.length_starts {
        let mut start = vec![y_var.ln()];
        start.extend(std::iter::repeat_n(l0.ln(), d));
        let trace = nelder_mead(neg_lml, &start, &opts)?;
        if trace.best_value.is_finite() && best.as_ref().is_none_or(|(v, _)| trace.best_value < *v) {
            best = Some((trace.best_value, trace.best_params));
        }
    }
    let (_, params) = best.ok_or_else(|| Error::Fit("marginal likelihood could not be evaluated".into()))?;
    let (sv, ls) = decode(&params);
    let all: Vec<&Sample> = samples.iter().collect();
    let (process, lml) = GaussianProcess::build(&all, sv, &ls)?;

    let res = config.resolution.max(2);
    let axis = |j: usize| -> Vec<f64> { (0..res).map(|i| lo[j] + (hi[j] - lo[j]) * i as f64 / (res - 1) as f64).collect() };
    let points: Vec<Vec<f64>> = match d {
        1 => axis(0).into_iter().map(|a| vec![a]).collect(),
        _ => {
            let (a0, a1) = (axis(0), axis(1));
            a0.iter().flat_map(|&a| a1.iter().map(move |&b| vec![a, b])).collect()
        }
    };
    let (x_min, (e_min, e_err)) = points
        .into_iter()
        .map(|x| {
            let p = process.predict(&x);
            (x, p)
        })
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("grid is non-empty");
    Ok(GprFit {
        process,
        x_min,
        e_min,
        e_err,
        log_marginal_likelihood: lml,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PesMethod {
    #[serde(rename = "sinusoid")]
    Sinusoid,
    #[serde(rename = "quad2d")]
    Quad2d,
    #[serde(rename = "gpr")]
    Gpr,
    #[serde(rename = "vqe+sinusoid")]
    VqeSinusoid,
    #[serde(rename = "vqe+quad2d")]
    VqeQuad2d,
    #[serde(rename = "vqe+gpr")]
    VqeGpr,
    #[serde(rename = "vqe")]
    Vqe,
    #[serde(rename = "exact")]
    Exact,
}

impl PesMethod {
    pub fn tag(self) -> &'static str {
        match self {
            PesMethod::Sinusoid => "sinusoid",
            PesMethod::Quad2d => "quad2d",
            PesMethod::Gpr => "gpr",
            PesMethod::VqeSinusoid => "vqe+sinusoid",
            PesMethod::VqeQuad2d => "vqe+quad2d",
            PesMethod::VqeGpr => "vqe+gpr",
            PesMethod::Vqe => "vqe",
            PesMethod::Exact => "exact",
        }
    }
}

impl fmt::Display for PesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PesMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Absolute,
    /// Energies relative to the largest-R entry.
    LargeROffset,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Absolute => "absolute",
            Normalization::LargeROffset => "large_r_offset",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesPoint {
    pub r_angstrom: f64,
    pub e_min: f64,
    pub e_err: f64,
    pub method: PesMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesTable {
    pub points: Vec<PesPoint>,
    pub normalization: Normalization,
    /// Energy at the largest R minus the lowest energy.
    pub well_depth: f64,
    pub r_at_minimum: f64,
    /// Spread of the difference to the reference curve, when one is given.
    pub non_parallel_error: Option<f64>,
}

pub const PES_CSV_HEADER: &str = "R_angstrom,E_min_hartree,E_err_hartree,method,normalization";

impl PesTable {
    /// CSV body with header; `preamble` lines are written first as comments.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(PES_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{:?},{:?},{:?},{},{}\n",
                p.r_angstrom, p.e_min, p.e_err, p.method, self.normalization
            ));
        }
        out
    }
}

/// Sort, normalize and summarize a curve.
pub fn assemble_pes(points: &[PesPoint], normalization: Normalization, reference: Option<&[PesPoint]>) -> Result<PesTable> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.r_angstrom.total_cmp(&b.r_angstrom));
    if pts.windows(2).any(|w| w[0].r_angstrom == w[1].r_angstrom) {
        return Err(Error::InvalidArgument("duplicate R values in curve".into()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("a curve needs at least two R values".into()));
    }
    if pts.iter().any(|p| !(p.e_err >= 0.0)) {
        return Err(Error::InvalidArgument("energy errors must be non-negative".into()));
    }
    let tail = pts.last().expect("non-empty").e_min;
    if normalization == Normalization::LargeROffset {
        pts.iter_mut().for_each(|p| p.e_min -= tail);
    }
    let lowest = pts.iter().min_by(|a, b| a.e_min.total_cmp(&b.e_min)).expect("non-empty");
    let well_depth = pts.last().expect("non-empty").e_min - lowest.e_min;
    let r_at_minimum = lowest.r_angstrom;
    let non_parallel_error = reference.map(|refc| non_parallel_error(&pts, refc)).transpose()?;
    Ok(PesTable {
        points: pts,
        normalization,
        well_depth,
        r_at_minimum,
        non_parallel_error,
    })
}

/// `max - min` over R of the difference between two curves on the same R grid.
pub fn non_parallel_error(curve: &[PesPoint], reference: &[PesPoint]) -> Result<f64> {
    let mut diffs = Vec::with_capacity(curve.len());
    for p in curve {
        let q = reference
            .iter()
            .find(|q| (q.r_angstrom - p.r_angstrom).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidArgument(format!("reference has no point at R = {}", p.r_angstrom)))?;
        diffs.push(p.e_min - q.e_min);
    }
    let max = diffs.iter().cloned().fold(f64::MIN, f64::max);
    let min = diffs.iter().cloned().fold(f64::MAX, f64::min);
    Ok(max - min)
}

/// Lowest eigenvalue of `h` on `n_qubits` qubits.
pub fn exact_ground_energy(h: &PauliSum, n_qubits: usize) -> Result<f64> {
    Ok(ground_state(h, n_qubits)?.0)
}

/// Lowest eigenpair of `h`.
pub fn ground_state(h: &PauliSum, n_qubits: usize) -> Result<(f64, Vec<Complex64>)> {
    if !h.is_hermitian(1e-10) {
        return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
    }
    let m = h.to_matrix(n_qubits)?;
    let eig = m.symmetric_eigen();
    let (k, &e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("matrix is non-empty");
    Ok((e, eig.eigenvectors.column(k).iter().cloned().collect()))
}
