//! Performance metrics and the batch experiment protocol.
//!
//! The quadratic cost `J = integral of ||x||^2 + ||u||^2` uses the
//! trapezoidal rule on the densely recorded state and the exact rectangle
//! rule on the piecewise-constant held input. Batch experiments sweep
//! policies and parameter realizations over a deterministic set of initial
//! conditions on a sphere and aggregate cost and interval statistics.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{lookup_model, DisturbanceProfile};
use crate::error::{Error, Result};
use crate::samplers::TriggerPolicy;
use crate::sim::{simulate, EtaSchedule, Scenario, SimOptions, Trace};

/// Quadratic running cost accumulated along a trace. The state integrand is
/// trapezoidal; the input is constant on each recorded segment (`inputs[i]`
/// holds from `times[i]` to `times[i+1]`), so its contribution is exact.
pub fn quadratic_cost(trace: &Trace) -> f64 {
    let mut j = 0.0;
    for i in 0..trace.times.len() - 1 {
        let dt = trace.times[i + 1] - trace.times[i];
        let x2 = 0.5 * (trace.states[i].norm_squared() + trace.states[i + 1].norm_squared());
        let u2 = trace.inputs[i].norm_squared();
        j += dt * (x2 + u2);
    }
    j
}

/// Summary of the realized sampling intervals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct IntervalStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn interval_stats(intervals: &[f64]) -> Result<IntervalStats> {
    if intervals.is_empty() {
        return Err(Error::UndefinedStats("no sampling intervals recorded"));
    }
    let min = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
    Ok(IntervalStats {
        count: intervals.len(),
        min,
        max,
        mean,
    })
}

/// Interval statistics from the sampling instants themselves (consecutive
/// differences). Needs at least two instants.
pub fn interval_stats_from_instants(instants: &[f64]) -> Result<IntervalStats> {
    if instants.len() < 2 {
        return Err(Error::UndefinedStats(
            "interval statistics need at least two sampling instants",
        ));
    }
    let diffs: Vec<f64> = instants.windows(2).map(|w| w[1] - w[0]).collect();
    interval_stats(&diffs)
}

/// Largest state norm over the tail `t >= cutoff`; an empirical stand-in
/// for the ultimate bound. Defaults to the second half of the horizon.
pub fn ultimate_bound_estimate(trace: &Trace, cutoff: Option<f64>) -> f64 {
    let cutoff = cutoff.unwrap_or_else(|| 0.5 * trace.times.last().unwrap());
    trace.max_norm_after(cutoff)
}

/// Deterministic, roughly equidistributed points on the radius-`r` sphere.
/// Dimension 3 uses the Fibonacci lattice; other dimensions draw seeded
/// Gaussian directions.
pub fn sphere_initial_conditions(dim: usize, n: usize, r: f64, seed: u64) -> Vec<DVector<f64>> {
    assert!(dim >= 1 && n >= 1 && r > 0.0);
    if dim == 3 {
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
                DVector::from_vec(vec![r * rho * phi.cos(), r * rho * phi.sin(), r * z])
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                loop {
                    // Box-Muller-free: sample a cube, accept directions with
                    // usable norm, then normalize.
                    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let x = DVector::from_vec(v);
                    let norm = x.norm();
                    if norm > 1e-3 && norm <= 1.0 {
                        return (r / norm) * x;
                    }
                }
            })
            .collect()
    }
}

/// Metrics of a single closed-loop run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cost: f64,
    pub samples: usize,
    pub intervals: IntervalStats,
    pub max_norm: f64,
    pub max_sample_norm: f64,
    pub final_norm: f64,
    pub ultimate_bound: f64,
    pub diverged: bool,
    pub predictions_capped: usize,
}

pub fn metrics_of(trace: &Trace) -> Result<MetricsReport> {
    Ok(MetricsReport {
        cost: quadratic_cost(trace),
        samples: trace.sample_instants.len(),
        intervals: interval_stats(&trace.sample_intervals)?,
        max_norm: trace.max_norm(),
        max_sample_norm: trace.max_sample_norm(),
        final_norm: trace.final_state().norm(),
        ultimate_bound: ultimate_bound_estimate(trace, None),
        diverged: trace.diverged,
        predictions_capped: trace.predictions_capped,
    })
}

/// A policy under a display name, for experiment tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedPolicy {
    pub name: String,
    pub policy: TriggerPolicy,
}

/// Batch experiment description: every policy is run from every initial
/// condition under every parameter realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: String,
    pub policies: Vec<NamedPolicy>,
    /// Parameter realizations, each a full `eta` vector.
    pub etas: Vec<Vec<f64>>,
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_ic")]
    pub n_initial_conditions: usize,
    #[serde(default = "default_ic_radius")]
    pub ic_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub disturbance: Option<DisturbanceProfile>,
}

fn default_dt() -> f64 {
    crate::sim::DEFAULT_DT
}
fn default_n_ic() -> usize {
    25
}
fn default_ic_radius() -> f64 {
    1.0
}

/// One run of the batch: a (policy, eta, initial condition) triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: String,
    pub eta: Vec<f64>,
    pub ic_index: usize,
    pub x0: Vec<f64>,
    pub metrics: MetricsReport,
}

/// Aggregate over the initial conditions of one (policy, eta) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: String,
    pub eta: Vec<f64>,
    pub runs: usize,
    pub diverged: usize,
    pub mean_cost: f64,
    pub max_cost: f64,
    pub mean_samples: f64,
    pub min_interval: f64,
    pub max_interval: f64,
    pub mean_interval: f64,
    pub max_sample_norm: f64,
}

/// Full batch result: the summary table plus the per-run records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl BatchReport {
    pub fn cell(&self, policy: &str, eta: &[f64]) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.eta == eta)
    }
}

/// Runs the full batch. Runs are independent and execute in parallel; the
/// output ordering and every trajectory are deterministic regardless of the
/// thread count.
pub fn run_table_experiment(cfg: &ExperimentConfig) -> Result<BatchReport> {
    let (model, _) = lookup_model(&cfg.model)?;
    if cfg.policies.is_empty() || cfg.etas.is_empty() {
        return Err(Error::Config("experiment needs at least one policy and one eta".into()));
    }
    let ics = sphere_initial_conditions(
        model.dim_state,
        cfg.n_initial_conditions,
        cfg.ic_radius,
        cfg.seed,
    );

    let mut jobs = Vec::new();
    for named in &cfg.policies {
        for eta in &cfg.etas {
            for (ic_index, x0) in ics.iter().enumerate() {
                jobs.push((named, eta, ic_index, x0));
            }
        }
    }

    // STC_THREADS caps parallelism; unset or invalid means the default pool.
    let pool = match std::env::var("STC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(n) if n > 0 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?,
        ),
        _ => None,
    };

    let compute = || -> Result<Vec<RunRecord>> {
        jobs.par_iter()
            .map(|(named, eta, ic_index, x0)| {
            let (model, law) = lookup_model(&cfg.model)?;
            let disturbance = cfg
                .disturbance
                .clone()
                .unwrap_or_else(|| DisturbanceProfile::zero(model.dim_disturbance));
            let sc = Scenario {
                model,
                law,
                policy: named.policy.clone(),
                eta: EtaSchedule::constant((*eta).clone()),
                x0: (*x0).clone(),
                disturbance,
                opts: SimOptions {
                    dt: cfg.dt,
                    ..SimOptions::new(cfg.t_final)
                },
            };
                let trace = simulate(&sc)?;
                Ok(RunRecord {
                    policy: named.name.clone(),
                    eta: (*eta).clone(),
                    ic_index: *ic_index,
                    x0: x0.iter().copied().collect(),
                    metrics: metrics_of(&trace)?,
                })
            })
            .collect()
    };
    let runs = match &pool {
        Some(p) => p.install(compute)?,
        None => compute()?,
    };

    let mut cells = Vec::new();
    for named in &cfg.policies {
        for eta in &cfg.etas {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.policy == named.name && &r.eta == eta)
                .collect();
            let n = group.len();
            let diverged = group.iter().filter(|r| r.metrics.diverged).count();
            let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                group.iter().map(|r| f(r)).sum::<f64>() / n as f64
            };
            cells.push(CellSummary {
                policy: named.name.clone(),
                eta: eta.clone(),
                runs: n,
                diverged,
                mean_cost: mean(&|r| r.metrics.cost),
                max_cost: group.iter().map(|r| r.metrics.cost).fold(f64::NEG_INFINITY, f64::max),
                mean_samples: mean(&|r| r.metrics.samples as f64),
                min_interval: group
                    .iter()
                    .map(|r| r.metrics.intervals.min)
                    .fold(f64::INFINITY, f64::min),
                max_interval: group
                    .iter()
                    .map(|r| r.metrics.intervals.max)
                    .fold(f64::NEG_INFINITY, f64::max),
                mean_interval: mean(&|r| r.metrics.intervals.mean),
                max_sample_norm: group
                    .iter()
                    .map(|r| r.metrics.max_sample_norm)
                    .fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    Ok(BatchReport {
        config: cfg.clone(),
        cells,
        runs,
    })
}
