//! Derivative-free minimization: Nelder-Mead and a variant that adds a
//! random positive offset to every cost evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::seeded_rng;

/// Outcome of one cost evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub std: f64,
}

impl Evaluation {
    pub fn exact(value: f64) -> Self {
        Self { value, std: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Edge length of the initial simplex, in parameter units.
    pub initial_step: f64,
    /// Largest vertex distance from the best vertex at convergence.
    pub xtol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.5,
            xtol: 1e-7,
            max_iterations: 1000,
        }
    }
}

/// Uniform offsets on `[lo, hi]` and the stopping rule built around them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub lo: f64,
    pub hi: f64,
    /// Number of recent accepted costs whose spread is tested.
    pub window: usize,
    /// Iterations run once the spread has dropped to the offset mean.
    pub extra_iterations: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 0.08,
            window: 5,
            extra_iterations: 15,
        }
    }
}

impl AnnealSchedule {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let s = Self { lo, hi, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.hi >= self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "offset range [{}, {}] must satisfy 0 <= lo <= hi",
                self.lo, self.hi
            )));
        }
        if self.window < 2 {
            return Err(Error::InvalidArgument("fluctuation window needs at least 2 entries".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    /// Offset for evaluation `index` of a run seeded with `seed`.
    pub fn draw(&self, seed: u64, index: usize) -> f64 {
        if self.hi == self.lo {
            return self.lo;
        }
        let mut rng = seeded_rng(seed ^ OFFSET_DOMAIN, index as u64);
        rng.random_range(self.lo..=self.hi)
    }
}

/// Keeps offset draws independent of any shot sampling sharing the seed.
const OFFSET_DOMAIN: u64 = 0x6f66_6673_6574_7321;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Converged,
    MaxIterations,
    SamplingComplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluation: usize,
    pub iteration: usize,
    pub params: Vec<f64>,
    pub value: f64,
    pub std: f64,
    pub perturbation: f64,
    pub sampling_phase: bool,
}

impl TraceEntry {
    /// What the simplex saw: the value plus the offset.
    pub fn cost(&self) -> f64 {
        self.value + self.perturbation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub entries: Vec<TraceEntry>,
    pub iterations: usize,
    pub terminal: TerminalReason,
    /// Best vertex of the final simplex.
    pub best_params: Vec<f64>,
    /// Unperturbed value recorded at the best vertex.
    pub best_value: f64,
    pub best_std: f64,
}

impl OptimizerTrace {
    pub fn sampling_entries(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.sampling_phase)
    }

    /// Best parameters reduced to `[0, 2pi)`.
    pub fn wrapped_best(&self) -> Vec<f64> {
        self.best_params.iter().map(|&t| wrap_angle(t)).collect()
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(std::f64::consts::TAU)
}

struct Vertex {
    x: Vec<f64>,
    cost: f64,
    entry: usize,
}

struct Runner<'a, F> {
    cost: F,
    entries: Vec<TraceEntry>,
    iteration: usize,
    sampling: bool,
    schedule: Option<(&'a AnnealSchedule, u64)>,
}

impl<F: FnMut(&[f64], usize) -> Result<Evaluation>> Runner<'_, F> {
    fn eval(&mut self, x: Vec<f64>) -> Result<Vertex> {
        let index = self.entries.len();
        let e = (self.cost)(&x, index).map_err(|source| Error::Evaluation {
            index,
            source: Box::new(source),
        })?;
        let perturbation = self.schedule.map_or(0.0, |(s, seed)| s.draw(seed, index));
        let entry = TraceEntry {
            evaluation: index,
            iteration: self.iteration,
            params: x.clone(),
            value: e.value,
            std: e.std,
            perturbation,
            sampling_phase: self.sampling,
        };
        let cost = entry.cost();
        self.entries.push(entry);
        Ok(Vertex { x, cost, entry: index })
    }
}

fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn run<F>(
    cost: F,
    theta0: &[f64],
    opts: &NelderMeadOptions,
    schedule: Option<(&AnnealSchedule, u64)>,
) -> Result<OptimizerTrace>
where
    F: FnMut(&[f64], usize) -> Result<Evaluation>,
{
    if theta0.is_empty() {
        return Err(Error::InvalidArgument("at least one parameter is required".into()));
    }
    let n = theta0.len();
    let mut r = Runner {
        cost,
        entries: Vec::new(),
        iteration: 0,
        sampling: false,
        schedule,
    };
    let mut simplex = vec![r.eval(theta0.to_vec())?];
    for i in 0..n {
        let mut x = theta0.to_vec();
        x[i] += opts.initial_step;
        simplex.push(r.eval(x)?);
    }

    let mut accepted: Vec<f64> = Vec::new();
    let mut tail_left: Option<usize> = None;
    let terminal = loop {
        simplex.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);

        match (&schedule, tail_left) {
            (None, _) if size <= opts.xtol => break TerminalReason::Converged,
            (Some(_), Some(0)) => break TerminalReason::SamplingComplete,
            (Some((s, _)), None) => {
                let settled = accepted.len() >= s.window && std_dev(&accepted[accepted.len() - s.window..]) <= s.mean();
                if settled || size <= opts.xtol {
                    tail_left = Some(s.extra_iterations);
                    r.sampling = true;
                    if s.extra_iterations == 0 {
                        break TerminalReason::SamplingComplete;
                    }
                }
            }
            _ => {}
        }
        if r.iteration >= opts.max_iterations {
            break TerminalReason::MaxIterations;
        }
        r.iteration += 1;
        if let Some(k) = tail_left.as_mut() {
            *k -= 1;
        }

        let worst = simplex[n].cost;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v.x[j]).sum::<f64>() / n as f64)
            .collect();
        let xr = axpy(&centroid, -opts.reflection, &simplex[n].x);
        let vr = r.eval(xr)?;

        let replacement = if vr.cost < simplex[0].cost {
            let xe = axpy(&centroid, opts.expansion, &vr.x);
            let ve = r.eval(xe)?;
            Some(if ve.cost < vr.cost { ve } else { vr })
        } else if vr.cost < simplex[n - 1].cost {
            Some(vr)
        } else if vr.cost < worst {
            let xc = axpy(&centroid, opts.contraction, &vr.x);
            let vc = r.eval(xc)?;
            (vc.cost <= vr.cost).then_some(vc)
        } else {
            let xc = axpy(&centroid, opts.contraction, &simplex[n].x);
            let vc = r.eval(xc)?;
            (vc.cost < worst).then_some(vc)
        };

        match replacement {
            Some(v) => {
                accepted.push(v.cost);
                simplex[n] = v;
            }
            None => {
                let best = simplex[0].x.clone();
                let mut lowest = f64::INFINITY;
                for v in simplex.iter_mut().skip(1) {
                    *v = r.eval(axpy(&best, opts.shrink, &v.x))?;
                    lowest = lowest.min(v.cost);
                }
                accepted.push(lowest);
            }
        }
    };

    simplex.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    let best = &r.entries[simplex[0].entry];
    Ok(OptimizerTrace {
        best_params: simplex[0].x.clone(),
        best_value: best.value,
        best_std: best.std,
        iterations: r.iteration,
        terminal,
        entries: r.entries,
    })
}

/// Nelder-Mead over `cost(params, evaluation_index)`.
pub fn nelder_mead<F>(cost: F, theta0: &[f64], opts: &NelderMeadOptions) -> Result<OptimizerTrace>
where
    F: FnMut(&[f64], usize) -> Result<Evaluation>,
{
    run(cost, theta0, opts, None)
}

/// Nelder-Mead on `cost + u` with `u` drawn afresh from the schedule for
/// every evaluation. Once the spread of recent accepted costs falls to the
/// offset mean (or the simplex collapses) a fixed number of further
/// iterations are run and marked as the sampling phase.
pub fn annealed_nelder_mead<F>(
    cost: F,
    theta0: &[f64],
    opts: &NelderMeadOptions,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<OptimizerTrace>
where
    F: FnMut(&[f64], usize) -> Result<Evaluation>,
{
    schedule.validate()?;
    run(cost, theta0, opts, Some((schedule, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bowl(x: &[f64], _: usize) -> Result<Evaluation> {
        Ok(Evaluation::exact((x[0] - 1.0).powi(2)))
    }

    fn rosenbrock(x: &[f64], _: usize) -> Result<Evaluation> {
        Ok(Evaluation::exact((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)))
    }

    #[test]
    fn one_dimensional_bowl() {
        let t = nelder_mead(bowl, &[0.0], &NelderMeadOptions::default()).unwrap();
        assert_eq!(t.terminal, TerminalReason::Converged);
        assert!((t.best_params[0] - 1.0).abs() < 1e-4);
        assert!(t.iterations < 100);
        assert_eq!(t.entries.len(), t.entries.last().unwrap().evaluation + 1);
    }

    #[test]
    fn rosenbrock_valley() {
        let opts = NelderMeadOptions { xtol: 1e-9, max_iterations: 5000, ..Default::default() };
        let t = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!((t.best_params[0] - 1.0).abs() < 1e-5 && (t.best_params[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let opts = NelderMeadOptions { max_iterations: 3, ..Default::default() };
        let t = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(t.terminal, TerminalReason::MaxIterations);
        assert_eq!(t.iterations, 3);
    }

    #[test]
    fn errors_carry_the_evaluation_index() {
        let failing = |_: &[f64], i: usize| if i == 2 { Err(Error::Fit("boom".into())) } else { Ok(Evaluation::exact(0.0)) };
        let err = nelder_mead(failing, &[0.0, 0.0], &NelderMeadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Evaluation { index: 2, .. }));
        assert!(nelder_mead(bowl, &[], &NelderMeadOptions::default()).is_err());
    }

    #[test]
    fn zero_width_schedule_is_plain_search_with_a_tail() {
        let opts = NelderMeadOptions::default();
        let plain = nelder_mead(bowl, &[0.0], &opts).unwrap();
        let s = AnnealSchedule::new(0.0, 0.0).unwrap();
        let t = annealed_nelder_mead(bowl, &[0.0], &opts, &s, 1).unwrap();
        assert_eq!(t.terminal, TerminalReason::SamplingComplete);
        assert!(t.entries.iter().all(|e| e.perturbation == 0.0));
        let first_tail = t.entries.iter().find(|e| e.sampling_phase).unwrap().iteration;
        assert_eq!(t.iterations - first_tail + 1, s.extra_iterations);
        assert!(t.best_value <= plain.best_value + 1e-15);
        assert!((t.best_params[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn offsets_are_seeded_and_in_range() {
        let s = AnnealSchedule::default();
        assert!((s.mean() - 0.045).abs() < 1e-15);
        let opts = NelderMeadOptions::default();
        let a = annealed_nelder_mead(bowl, &[0.0, 0.0], &opts, &s, 7).unwrap();
        let b = annealed_nelder_mead(bowl, &[0.0, 0.0], &opts, &s, 7).unwrap();
        let c = annealed_nelder_mead(bowl, &[0.0, 0.0], &opts, &s, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.entries.iter().all(|e| (s.lo..=s.hi).contains(&e.perturbation)));
        for e in &a.entries {
            assert_eq!(e.perturbation, s.draw(7, e.evaluation));
        }
        assert_eq!(a.sampling_entries().map(|e| e.iteration).max(), Some(a.iterations));
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        assert!(AnnealSchedule::new(0.05, 0.01).is_err());
        assert!(AnnealSchedule::new(-0.1, 0.01).is_err());
    }

    #[test]
    fn angles_wrap_for_reporting() {
        assert!((wrap_angle(-0.5) - (std::f64::consts::TAU - 0.5)).abs() < 1e-15);
        assert_eq!(wrap_angle(1.0), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn best_vertex_never_worsens_on_convex_costs(
            cx in -2.0f64..2.0, cy in -2.0f64..2.0, a in 0.2f64..5.0, b in 0.2f64..5.0,
        ) {
            let f = |x: &[f64], _: usize| Ok(Evaluation::exact(a * (x[0] - cx).powi(2) + b * (x[1] - cy).powi(2)));
            let t = nelder_mead(f, &[0.0, 0.0], &NelderMeadOptions::default()).unwrap();
            let mut best = f64::INFINITY;
            let mut per_iteration = Vec::new();
            for e in &t.entries {
                best = best.min(e.value);
                per_iteration.push((e.iteration, best));
            }
            prop_assert!(per_iteration.windows(2).all(|w| w[1].1 <= w[0].1));
            prop_assert!((t.best_params[0] - cx).abs() < 1e-5 && (t.best_params[1] - cy).abs() < 1e-5);
        }
    }
}
