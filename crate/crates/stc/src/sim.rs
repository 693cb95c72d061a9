//! Closed-loop sampled-data simulation.
//!
//! The integrator is fixed-step classic Runge-Kutta with the held input
//! refreshed at sampling instants. Sampling instants, disturbance-window
//! edges, and parameter switches are all integration breakpoints, so no
//! step straddles a discontinuity. Event rules are monitored along the
//! trajectory and localized by bisection; self-triggered laws produce the
//! next instant in closed form before the interval is integrated.

use std::io::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    lookup_model, rk4_step_held, ControlLaw, DisturbanceProfile, Input, PlantModel, State,
};
use crate::error::{Error, Result};
use crate::samplers::{next_interval_nominal_prediction, TriggerPolicy};
use crate::tuning::{verify_policy, TuningReport};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_BLOW_UP_RADIUS: f64 = 1e6;
pub const DEFAULT_MAX_SAMPLES: usize = 5_000_000;

/// One switch of the uncertain parameter vector at time `t`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EtaSwitch {
    pub t: f64,
    pub eta: Vec<f64>,
}

/// Piecewise-constant realization of the uncertain parameter.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EtaSchedule {
    pub initial: Vec<f64>,
    #[serde(default)]
    pub switches: Vec<EtaSwitch>,
}

impl EtaSchedule {
    pub fn constant(eta: Vec<f64>) -> Self {
        Self {
            initial: eta,
            switches: Vec::new(),
        }
    }

    pub fn validate(&self, model: &PlantModel) -> Result<()> {
        if !model.eta_in_range(&self.initial) {
            return Err(Error::EtaOutOfRange);
        }
        let mut prev = f64::NEG_INFINITY;
        for sw in &self.switches {
            if sw.t <= prev {
                return Err(Error::Config("eta switches must be strictly increasing in time".into()));
            }
            if !model.eta_in_range(&sw.eta) {
                return Err(Error::EtaOutOfRange);
            }
            prev = sw.t;
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        let mut current = &self.initial;
        for sw in &self.switches {
            if sw.t <= t {
                current = &sw.eta;
            } else {
                break;
            }
        }
        current
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.switches.iter().map(|s| s.t)
    }
}

/// Integration and termination settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_blow_up")]
    pub blow_up_radius: f64,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_blow_up() -> f64 {
    DEFAULT_BLOW_UP_RADIUS
}
fn default_max_samples() -> usize {
    DEFAULT_MAX_SAMPLES
}

impl SimOptions {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            dt: DEFAULT_DT,
            blow_up_radius: DEFAULT_BLOW_UP_RADIUS,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !(self.dt > 0.0) || !(self.blow_up_radius > 0.0) {
            return Err(Error::Config("t_final, dt, and blow-up radius must be positive".into()));
        }
        Ok(())
    }
}

/// A fully resolved simulation setup.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: PlantModel,
    pub law: ControlLaw,
    pub policy: TriggerPolicy,
    pub eta: EtaSchedule,
    pub x0: State,
    pub disturbance: DisturbanceProfile,
    pub opts: SimOptions,
}

/// Serializable scenario description; `model` names a registry entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: String,
    pub policy: TriggerPolicy,
    pub eta: EtaSchedule,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub disturbance: Option<DisturbanceProfile>,
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_blow_up")]
    pub blow_up_radius: f64,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        let (model, law) = lookup_model(&self.model)?;
        let disturbance = self
            .disturbance
            .clone()
            .unwrap_or_else(|| DisturbanceProfile::zero(model.dim_disturbance));
        Ok(Scenario {
            model,
            law,
            policy: self.policy.clone(),
            eta: self.eta.clone(),
            x0: DVector::from_vec(self.x0.clone()),
            disturbance,
            opts: SimOptions {
                t_final: self.t_final,
                dt: self.dt,
                blow_up_radius: self.blow_up_radius,
                max_samples: self.max_samples,
            },
        })
    }
}

/// Recorded closed-loop trajectory.
///
/// `sample_intervals[k]` is the interval *as computed by the policy* at the
/// k-th sampling instant: the closed-form value for self-triggered laws,
/// the period for periodic sampling, the localized event time for event
/// rules. Recomputing a self-triggered formula from `states` reproduces the
/// stored value bit for bit, whereas differencing `sample_instants`
/// accumulates float roundoff.
#[derive(Debug, Clone)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub inputs: Vec<Input>,
    pub disturbances: Vec<State>,
    pub is_sample: Vec<bool>,
    pub sample_instants: Vec<f64>,
    pub sample_intervals: Vec<f64>,
    /// Number of nominal predictions that hit the horizon cap.
    pub predictions_capped: usize,
    /// True when the trajectory left the blow-up ball and was truncated.
    pub diverged: bool,
    /// Tuning report of the policy, when one applies.
    pub tuning: Option<TuningReport>,
}

impl Trace {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trace is never empty")
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest state norm at the sampling instants only.
    pub fn max_sample_norm(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.is_sample)
            .filter(|(_, s)| **s)
            .map(|(x, _)| x.norm())
            .fold(0.0, f64::max)
    }

    /// Largest state norm over `t >= cutoff`.
    pub fn max_norm_after(&self, cutoff: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= cutoff)
            .map(|(_, x)| x.norm())
            .fold(0.0, f64::max)
    }
}

enum SpanOutcome {
    Reached,
    Event(f64),
    Diverged,
}

/// Runs the closed loop to `t_final` (or divergence).
pub fn simulate(sc: &Scenario) -> Result<Trace> {
    sc.opts.validate()?;
    sc.policy.validate_params()?;
    sc.eta.validate(&sc.model)?;
    sc.disturbance.validate()?;
    if sc.disturbance.dim != sc.model.dim_disturbance {
        return Err(Error::DimensionMismatch {
            what: "disturbance profile",
            expected: sc.model.dim_disturbance,
            got: sc.disturbance.dim,
        });
    }
    if sc.x0.len() != sc.model.dim_state {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: sc.model.dim_state,
            got: sc.x0.len(),
        });
    }
    let tuning = verify_policy(&sc.policy)?;

    let t_final = sc.opts.t_final;
    let mut trace = Trace {
        times: vec![0.0],
        states: vec![sc.x0.clone()],
        inputs: vec![sc.law.eval(&sc.x0)],
        disturbances: vec![sc.disturbance.value_at(0.0)],
        is_sample: vec![false],
        sample_instants: Vec::new(),
        sample_intervals: Vec::new(),
        predictions_capped: 0,
        diverged: false,
        tuning,
    };

    let mut t = 0.0;
    let mut x = sc.x0.clone();
    // Leftover integration shorter than this is treated as arrival.
    let eps = 1e-12 * t_final.max(1.0);

    while t < t_final - eps {
        if trace.sample_instants.len() >= sc.opts.max_samples {
            return Err(Error::Config(format!(
                "sample budget of {} exceeded at t = {t}",
                sc.opts.max_samples
            )));
        }
        let x_k = x.clone();
        let u = sc.law.eval(&x_k);
        trace.sample_instants.push(t);
        *trace.is_sample.last_mut().unwrap() = true;
        *trace.inputs.last_mut().unwrap() = u.clone();

        // Horizon of this holding period.
        let (t_target, monitored) = match &sc.policy {
            TriggerPolicy::Periodic { h } => {
                trace.sample_intervals.push(*h);
                (t + h, false)
            }
            TriggerPolicy::NominalPrediction {
                eta_nominal,
                inner,
                prediction_dt,
                horizon_cap,
            } => {
                let p = next_interval_nominal_prediction(
                    &sc.model,
                    &sc.law,
                    inner,
                    eta_nominal,
                    &x_k,
                    *prediction_dt,
                    *horizon_cap,
                )?;
                if p.capped {
                    trace.predictions_capped += 1;
                }
                trace.sample_intervals.push(p.interval);
                (t + p.interval, false)
            }
            _ => match sc.policy.next_interval(x_k.norm()) {
                Some(h) => {
                    trace.sample_intervals.push(h);
                    (t + h, false)
                }
                // Event rule: run to the final time unless the rule fires.
                None => (t_final, true),
            },
        };
        let t_end = t_target.min(t_final);

        let outcome = integrate_period(sc, &mut trace, &mut t, &mut x, &x_k, &u, t_end, monitored)?;
        match outcome {
            SpanOutcome::Diverged => {
                trace.diverged = true;
                break;
            }
            SpanOutcome::Event(t_ev) => {
                // The localized event time defines the realized interval.
                let k = trace.sample_instants.len() - 1;
                trace.sample_intervals.push(t_ev - trace.sample_instants[k]);
                t = t_ev;
            }
            SpanOutcome::Reached => {
                t = t_end;
            }
        }
        if monitored && matches!(outcome, SpanOutcome::Reached) {
            // No event fired before the final time; the last holding period
            // has no recorded interval beyond the horizon truncation.
            if trace.sample_intervals.len() < trace.sample_instants.len() {
                trace.sample_intervals.push(t_final - trace.sample_instants.last().unwrap());
            }
            break;
        }
    }
    Ok(trace)
}

/// Integrates one holding period `[t, t_end]` with the held input `u`,
/// splitting at disturbance and parameter breakpoints and recording every
/// grid point. With `monitored` set, the policy's event value is checked at
/// each step and localized by bisection on a crossing.
#[allow(clippy::too_many_arguments)]
fn integrate_period(
    sc: &Scenario,
    trace: &mut Trace,
    t: &mut f64,
    x: &mut State,
    x_k: &State,
    u: &Input,
    t_end: f64,
    monitored: bool,
) -> Result<SpanOutcome> {
    let eps = 1e-12 * sc.opts.t_final.max(1.0);
    let mut cuts: Vec<f64> = sc
        .disturbance
        .breakpoints()
        .chain(sc.eta.breakpoints())
        .filter(|b| *b > *t + eps && *b < t_end - eps)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.push(t_end);

    for cut in cuts {
        let span = cut - *t;
        if span <= eps {
            continue;
        }
        let n = (span / sc.opts.dt).ceil().max(1.0) as usize;
        let sub = span / n as f64;
        // Constant within the span: it contains no breakpoint.
        let eta = sc.eta.value_at(*t + 0.5 * sub).to_vec();
        let w = sc.disturbance.value_at(*t + 0.5 * sub);
        for _ in 0..n {
            let x_next = match rk4_step_held(&sc.model, u, &eta, &w, x, *t, sub) {
                Ok(v) => v,
                Err(Error::Divergence { .. }) => return Ok(SpanOutcome::Diverged),
                Err(e) => return Err(e),
            };
            if monitored {
                let gamma = |y: &State| sc.policy.event_value(y, x_k).unwrap();
                if gamma(&x_next) >= 0.0 {
                    let base = x.clone();
                    let t0 = *t;
                    let step = |s: f64| -> Result<State> {
                        if s == 0.0 {
                            Ok(base.clone())
                        } else {
                            rk4_step_held(&sc.model, u, &eta, &w, &base, t0, s)
                        }
                    };
                    let s = crate::samplers::bisect_crossing(step, gamma, sub)?;
                    let x_ev = step(s)?;
                    let t_ev = *t + s;
                    record(trace, sc, t_ev, &x_ev, u);
                    *x = x_ev;
                    return Ok(SpanOutcome::Event(t_ev));
                }
            }
            *t += sub;
            record(trace, sc, *t, &x_next, u);
            *x = x_next;
            if x.norm() > sc.opts.blow_up_radius {
                return Ok(SpanOutcome::Diverged);
            }
        }
        // Land exactly on the cut to keep later spans aligned.
        *t = cut;
        *trace.times.last_mut().unwrap() = cut;
    }
    Ok(SpanOutcome::Reached)
}

fn record(trace: &mut Trace, sc: &Scenario, t: f64, x: &State, u: &Input) {
    trace.times.push(t);
    trace.states.push(x.clone());
    trace.inputs.push(u.clone());
    trace.disturbances.push(sc.disturbance.value_at(t));
    trace.is_sample.push(false);
}

/// Largest event value attained strictly between sampling instants; for an
/// event policy this should stay at or below zero up to the localization
/// resolution.
pub fn max_intersample_event_value(trace: &Trace, policy: &TriggerPolicy) -> Option<f64> {
    if !policy.is_event_policy() {
        return None;
    }
    let mut x_k: Option<&State> = None;
    let mut worst = f64::NEG_INFINITY;
    for (i, x) in trace.states.iter().enumerate() {
        if trace.is_sample[i] {
            x_k = Some(x);
            continue;
        }
        if let Some(xk) = x_k {
            worst = worst.max(policy.event_value(x, xk).unwrap());
        }
    }
    Some(worst)
}

/// Writes the trace as CSV: `t, x1..xn, u1..um, w1..wp, is_sample`.
pub fn write_csv(trace: &Trace, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = trace.states[0].len();
    let m = trace.inputs[0].len();
    let p = trace.disturbances[0].len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=p).map(|i| format!("w{i}")));
    header.push("is_sample".into());
    writeln!(f, "{}", header.join(","))?;
    for i in 0..trace.times.len() {
        let mut row = vec![format!("{:.9}", trace.times[i])];
        row.extend(trace.states[i].iter().map(|v| format!("{v:.12e}")));
        row.extend(trace.inputs[i].iter().map(|v| format!("{v:.12e}")));
        row.extend(trace.disturbances[i].iter().map(|v| format!("{v:.12e}")));
        row.push(if trace.is_sample[i] { "1" } else { "0" }.into());
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a minimal SVG: state components over time plus tick marks at the
/// sampling instants.
pub fn write_svg(trace: &Trace, path: &Path) -> Result<()> {
    const W: f64 = 900.0;
    const H: f64 = 420.0;
    const PAD: f64 = 40.0;
    let t0 = *trace.times.first().unwrap();
    let t1 = *trace.times.last().unwrap();
    let t_span = (t1 - t0).max(1e-12);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in &trace.states {
        for v in x.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let sx = |t: f64| PAD + (t - t0) / t_span * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    writeln!(f, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    // axes
    writeln!(
        f,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )?;
    writeln!(
        f,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="black"/>"#,
        H - PAD
    )?;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let dim = trace.states[0].len();
    // Thin long traces for file size; the shape is what matters.
    let stride = (trace.times.len() / 4000).max(1);
    for j in 0..dim {
        let mut d = String::new();
        for (i, (t, x)) in trace.times.iter().zip(&trace.states).enumerate() {
            if i % stride != 0 && i + 1 != trace.times.len() {
                continue;
            }
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            d.push_str(&format!("{cmd}{:.2} {:.2} ", sx(*t), sy(x[j])));
        }
        writeln!(
            f,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
            colors[j % colors.len()]
        )?;
    }
    let tick_stride = (trace.sample_instants.len() / 400).max(1);
    for (i, s) in trace.sample_instants.iter().enumerate() {
        if i % tick_stride != 0 {
            continue;
        }
        writeln!(
            f,
            r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#888" stroke-width="0.5"/>"##,
            sx(*s),
            H - PAD,
            H - PAD + 8.0
        )?;
    }
    writeln!(f, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::ExpCertificate;
    use crate::dynamics::DisturbanceSegment;
    use crate::samplers::next_interval_lebesgue;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    /// Scalar integrator dx/dt = u + w with law u = -x.
    fn scalar_plant() -> (PlantModel, ControlLaw) {
        let m = PlantModel::new(
            1,
            1,
            1,
            vec![],
            1e9,
            Arc::new(|_: &[f64], _x: &State, u: &Input, w: &State| {
                DVector::from_vec(vec![u[0] + w[0]])
            }),
        );
        let law = ControlLaw::new(1.0, Arc::new(|x: &State| -x.clone()));
        (m, law)
    }

    fn scenario(policy: TriggerPolicy, x0: f64, t_final: f64) -> Scenario {
        let (model, law) = scalar_plant();
        Scenario {
            model,
            law,
            policy,
            eta: EtaSchedule::constant(vec![]),
            x0: DVector::from_vec(vec![x0]),
            disturbance: DisturbanceProfile::zero(1),
            opts: SimOptions::new(t_final),
        }
    }

    #[test]
    fn periodic_held_input_closed_form() {
        // Held input: x_{k+1} = (1 - h) x_k exactly (constant derivative).
        let sc = scenario(TriggerPolicy::Periodic { h: 0.1 }, 1.0, 1.0);
        let tr = simulate(&sc).unwrap();
        assert!(!tr.diverged);
        let sample_states: Vec<f64> = tr
            .states
            .iter()
            .zip(&tr.is_sample)
            .filter(|(_, s)| **s)
            .map(|(x, _)| x[0])
            .collect();
        assert_eq!(sample_states.len(), 10);
        for (k, v) in sample_states.iter().enumerate() {
            assert_relative_eq!(*v, 0.9f64.powi(k as i32), max_relative = 1e-12);
        }
        assert!(tr.sample_intervals.iter().all(|h| *h == 0.1));
    }

    #[test]
    fn self_triggered_intervals_match_formula_bitwise() {
        let cert = ExpCertificate::new(1.0, 0.0, 1.0, 0.0, 0.2).unwrap();
        let sc = scenario(
            TriggerPolicy::SelfTrigLebesgue {
                cert: cert.clone(),
                max_interval: 1.0,
                waive_tuning_check: false,
            },
            1.0,
            3.0,
        );
        let tr = simulate(&sc).unwrap();
        assert!(tr.sample_instants.len() > 3);
        let sample_states: Vec<f64> = tr
            .states
            .iter()
            .zip(&tr.is_sample)
            .filter(|(_, s)| **s)
            .map(|(x, _)| x[0])
            .collect();
        for (h, xk) in tr.sample_intervals.iter().zip(&sample_states) {
            let expected = next_interval_lebesgue(&cert, xk.abs(), 1.0);
            assert_eq!(*h, expected, "stored interval must equal the formula bitwise");
        }
    }

    #[test]
    fn event_lebesgue_localization() {
        // Held input from x_k: x(t) = x_k (1 - tau), so ||x_k - x|| = x_k tau
        // and the event at delta fires at tau = delta / x_k.
        let delta = 0.1;
        let sc = scenario(TriggerPolicy::EventLebesgue { delta }, 1.0, 0.5);
        let tr = simulate(&sc).unwrap();
        let sample_states: Vec<f64> = tr
            .states
            .iter()
            .zip(&tr.is_sample)
            .filter(|(_, s)| **s)
            .map(|(x, _)| x[0])
            .collect();
        assert!(tr.sample_intervals.len() >= 3);
        for (h, xk) in tr.sample_intervals.iter().take(3).zip(&sample_states) {
            assert_relative_eq!(*h, delta / xk, epsilon = 1e-6);
        }
        let worst = max_intersample_event_value(&tr, &sc.policy).unwrap();
        assert!(worst <= 1e-6, "event rule violated between samples: {worst}");
    }

    #[test]
    fn blow_up_truncates_without_error() {
        let m = PlantModel::new(
            1,
            1,
            1,
            vec![],
            1e9,
            Arc::new(|_: &[f64], x: &State, _: &Input, _: &State| {
                DVector::from_vec(vec![x[0] * x[0]])
            }),
        );
        let law = ControlLaw::new(0.0, Arc::new(|_: &State| DVector::zeros(1)));
        let sc = Scenario {
            model: m,
            law,
            policy: TriggerPolicy::Periodic { h: 0.05 },
            eta: EtaSchedule::constant(vec![]),
            x0: DVector::from_vec(vec![2.0]),
            disturbance: DisturbanceProfile::zero(1),
            opts: SimOptions {
                dt: 1e-3,
                ..SimOptions::new(5.0)
            },
        };
        let tr = simulate(&sc).unwrap();
        assert!(tr.diverged);
        assert!(*tr.times.last().unwrap() < 5.0);
    }

    #[test]
    fn disturbance_window_integrates_exactly() {
        // dx/dt = w with zero law: x(T) = 0.6 * window length.
        let (model, _) = scalar_plant();
        let law = ControlLaw::new(0.0, Arc::new(|_: &State| DVector::zeros(1)));
        let sc = Scenario {
            model,
            law,
            policy: TriggerPolicy::Periodic { h: 0.5 },
            eta: EtaSchedule::constant(vec![]),
            x0: DVector::zeros(1),
            disturbance: DisturbanceProfile {
                dim: 1,
                segments: vec![DisturbanceSegment {
                    t_start: 0.73,
                    t_end: 2.25,
                    value: vec![0.6],
                }],
                bound: 0.6,
            },
            opts: SimOptions::new(3.0),
        };
        let tr = simulate(&sc).unwrap();
        assert_relative_eq!(tr.final_state()[0], 0.6 * (2.25 - 0.73), max_relative = 1e-10);
    }

    #[test]
    fn eta_switch_integrates_exactly() {
        // dx/dt = eta with zero law.
        let m = PlantModel::new(
            1,
            1,
            1,
            vec![(0.0, 10.0)],
            1e9,
            Arc::new(|eta: &[f64], _: &State, _: &Input, _: &State| {
                DVector::from_vec(vec![eta[0]])
            }),
        );
        let law = ControlLaw::new(0.0, Arc::new(|_: &State| DVector::zeros(1)));
        let sc = Scenario {
            model: m,
            law,
            policy: TriggerPolicy::Periodic { h: 0.7 },
            eta: EtaSchedule {
                initial: vec![1.0],
                switches: vec![EtaSwitch { t: 1.0, eta: vec![2.0] }],
            },
            x0: DVector::zeros(1),
            disturbance: DisturbanceProfile::zero(1),
            opts: SimOptions::new(2.0),
        };
        let tr = simulate(&sc).unwrap();
        assert_relative_eq!(tr.final_state()[0], 1.0 + 2.0, max_relative = 1e-10);
    }

    #[test]
    fn nominal_prediction_matches_event_rule_when_model_exact() {
        let delta = 0.1;
        let inner = TriggerPolicy::EventLebesgue { delta };
        let sc_pred = scenario(
            TriggerPolicy::NominalPrediction {
                eta_nominal: vec![],
                inner: Box::new(inner.clone()),
                prediction_dt: 1e-4,
                horizon_cap: 10.0,
            },
            1.0,
            0.5,
        );
        let sc_event = scenario(inner, 1.0, 0.5);
        let tr_pred = simulate(&sc_pred).unwrap();
        let tr_event = simulate(&sc_event).unwrap();
        for (a, b) in tr_pred.sample_intervals.iter().zip(&tr_event.sample_intervals).take(3) {
            assert_relative_eq!(a, b, epsilon = 5e-4);
        }
        assert_eq!(tr_pred.predictions_capped, 0);
    }

    #[test]
    fn determinism_bitwise() {
        let cert = ExpCertificate::new(1.0, 0.0, 1.0, 0.0, 0.2).unwrap();
        let sc = scenario(
            TriggerPolicy::SelfTrigLebesgue {
                cert,
                max_interval: 1.0,
                waive_tuning_check: false,
            },
            0.8,
            2.0,
        );
        let a = simulate(&sc).unwrap();
        let b = simulate(&sc).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
        assert_eq!(a.sample_intervals, b.sample_intervals);
    }

    #[test]
    fn csv_and_svg_writers() {
        let sc = scenario(TriggerPolicy::Periodic { h: 0.1 }, 1.0, 1.0);
        let tr = simulate(&sc).unwrap();
        let dir = std::env::temp_dir();
        let csv = dir.join("stc_sim_test.csv");
        let svg = dir.join("stc_sim_test.svg");
        write_csv(&tr, &csv).unwrap();
        write_svg(&tr, &svg).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,u1,w1,is_sample");
        assert_eq!(text.lines().count(), tr.times.len() + 1);
        let svg_text = std::fs::read_to_string(&svg).unwrap();
        assert!(svg_text.starts_with("<svg"));
        assert!(svg_text.trim_end().ends_with("</svg>"));
        std::fs::remove_file(csv).ok();
        std::fs::remove_file(svg).ok();
    }

    #[test]
    fn scenario_config_round_trip() {
        let json = r#"{
            "model": "rigid-body",
            "policy": {"kind": "periodic", "h": 0.01},
            "eta": {"initial": [1.0]},
            "x0": [1.0, 0.0, 0.0],
            "t_final": 0.5
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.dt, DEFAULT_DT);
        let sc = cfg.build().unwrap();
        let tr = simulate(&sc).unwrap();
        assert!(!tr.diverged);
        assert!(tr.final_state().norm() < 1.0);
    }
}
