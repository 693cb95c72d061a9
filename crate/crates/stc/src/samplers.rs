//! Trigger policies: event-triggered rules evaluated along trajectories and
//! the closed-form self-triggered laws that compute the next sampling
//! instant from the current state alone.

use serde::{Deserialize, Serialize};

use crate::bounds::{gronwall_bound, ExpCertificate, KLCertificate, LipschitzEnvelope};
use crate::dynamics::{rk4_step, ControlLaw, DisturbanceProfile, PlantModel, State};
use crate::error::{Error, Result};
use crate::scalar_fn::ScalarFn;

/// Coefficient of the relative event rule from the rigid-body benchmark:
/// `Gamma(x, x_k) = ||x_k - x||^2 - 0.79^2 sigma^2 ||x||^2`.
pub const RELATIVE_RULE_COEFF: f64 = 0.79;

/// Interval returned by the Lebesgue self-triggered law when the formula
/// denominator is exactly zero (state at the origin with no disturbance).
pub const DEFAULT_INTERVAL_CAP: f64 = 1.0;

/// Horizon cap for nominal-model event prediction.
pub const DEFAULT_PREDICTION_HORIZON: f64 = 10.0;

/// Resolution of event-time bisection, in seconds.
pub const EVENT_TIME_RESOLUTION: f64 = 1e-9;

/// The four sampler coefficients, each a (possibly constant) function of
/// the state-norm radius. `nu2` holds the full radius-dependent term, so
/// the exponential-case coefficient `c` enters as the linear function
/// `c * r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuCoefficients {
    pub nu0: ScalarFn,
    pub nu1: ScalarFn,
    pub nu2: ScalarFn,
    pub nu3: ScalarFn,
}

impl NuCoefficients {
    /// Coefficients of the exponential-case sampler: constants with
    /// `nu2_slope` multiplying the radius.
    pub fn from_constants(nu0: f64, nu1: f64, nu2_slope: f64, nu3: f64) -> Self {
        Self {
            nu0: ScalarFn::Const(nu0),
            nu1: ScalarFn::Const(nu1),
            nu2: ScalarFn::Linear(nu2_slope),
            nu3: ScalarFn::Const(nu3),
        }
    }

    const CHECK_RADIUS: f64 = 1e6;

    pub fn validate(&self) -> Result<()> {
        let grid = 200;
        if !self.nu0.is_positive_on_grid(Self::CHECK_RADIUS, grid) || self.nu0.eval(0.0) <= 0.0 {
            return Err(Error::Certificate("nu0 must be positive".into()));
        }
        if !self.nu1.is_positive_on_grid(Self::CHECK_RADIUS, grid) || self.nu1.eval(0.0) <= 0.0 {
            return Err(Error::Certificate("nu1 must be positive everywhere".into()));
        }
        let denom_ok = (0..=grid).all(|i| {
            let r = Self::CHECK_RADIUS * i as f64 / grid as f64;
            self.nu2.eval(r) + self.nu3.eval(r) > 0.0
        });
        if !denom_ok {
            return Err(Error::Certificate("nu2(r) + nu3(r) must be positive".into()));
        }
        Ok(())
    }

    /// The sampling interval `(1/nu1(r)) ln(1 + nu0(r) / (nu2(r) + nu3(r)))`.
    pub fn interval(&self, r: f64) -> f64 {
        (self.nu0.eval(r) / (self.nu2.eval(r) + self.nu3.eval(r))).ln_1p() / self.nu1.eval(r)
    }
}

/// Self-triggered Lebesgue sampling:
/// `h = (1/L) ln(1 + delta / (M1 ||x_k|| + M2 w_bar))`,
/// the exact inversion of the Gronwall envelope at level `delta`.
///
/// A zero denominator means the state sits at the origin with no
/// disturbance; the formula's limit is infinite, so the configured cap is
/// returned to keep the scheduler live.
pub fn next_interval_lebesgue(cert: &ExpCertificate, x_k_norm: f64, max_interval: f64) -> f64 {
    let denom = cert.envelope_prefactor(x_k_norm);
    if denom <= 0.0 {
        return max_interval;
    }
    (cert.delta / denom).ln_1p() / cert.l
}

/// Universal exponential-case sampler:
/// `h = (1/nu1) ln(1 + nu0 / (nu2 ||x_k|| + nu3))`.
pub fn next_interval_universal(nu0: f64, nu1: f64, nu2: f64, nu3: f64, x_k_norm: f64) -> f64 {
    (nu0 / (nu2 * x_k_norm + nu3)).ln_1p() / nu1
}

/// Asymptotic-case sampler with a radius-dependent `nu2` term.
pub fn next_interval_nonlinear(nu: &NuCoefficients, x_k_norm: f64) -> f64 {
    nu.interval(x_k_norm)
}

/// Global sampler with all four coefficients radius-dependent.
pub fn next_interval_global(nu: &NuCoefficients, x_k_norm: f64) -> f64 {
    nu.interval(x_k_norm)
}

/// Lebesgue trigger value `||x_k - x|| - delta`; an event is the first
/// zero-upcrossing.
pub fn event_value_lebesgue(x: &State, x_k: &State, delta: f64) -> f64 {
    (x_k - x).norm() - delta
}

/// Relative trigger value `||x_k - x||^2 - 0.79^2 sigma^2 ||x||^2`.
pub fn event_value_relative(x: &State, x_k: &State, sigma: f64) -> f64 {
    let c = RELATIVE_RULE_COEFF * sigma;
    (x_k - x).norm_squared() - c * c * x.norm_squared()
}

/// The closed-form interval bracket of the universal sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBounds {
    pub h_min: f64,
    pub h_mid: f64,
    pub h_max: f64,
}

/// Evaluates the interval formula at the initial-condition envelope
/// (`h_min`), at the ultimate bound (`h_mid`), and at the origin (`h_max`).
/// `h_min <= h_mid <= h_max` whenever `x0_envelope >= b`.
pub fn interval_bounds(nu: &NuCoefficients, x0_envelope: f64, b: f64) -> IntervalBounds {
    IntervalBounds {
        h_min: nu.interval(x0_envelope),
        h_mid: nu.interval(b),
        h_max: nu.interval(0.0),
    }
}

/// Trigger policy selecting how sampling instants are generated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerPolicy {
    /// Fixed-period sampling.
    Periodic { h: f64 },
    /// Event rule `||x_k - x|| >= delta`, monitored along the trajectory.
    EventLebesgue { delta: f64 },
    /// Relative event rule from the benchmark, `0 < sigma < 1`.
    EventRelative { sigma: f64 },
    SelfTrigLebesgue {
        cert: ExpCertificate,
        #[serde(default = "default_cap")]
        max_interval: f64,
        #[serde(default)]
        waive_tuning_check: bool,
    },
    SelfTrigUniversal {
        cert: ExpCertificate,
        nu0: f64,
        nu1: f64,
        nu2: f64,
        nu3: f64,
        #[serde(default)]
        waive_tuning_check: bool,
    },
    SelfTrigNonlinear {
        cert: KLCertificate,
        nu0: f64,
        nu1: f64,
        nu2: ScalarFn,
        nu3: f64,
        delta: f64,
        #[serde(default)]
        waive_tuning_check: bool,
    },
    SelfTrigGlobal {
        cert: KLCertificate,
        envelope: LipschitzEnvelope,
        nu0: ScalarFn,
        nu1: ScalarFn,
        nu2: ScalarFn,
        nu3: ScalarFn,
        delta: f64,
        #[serde(default)]
        waive_tuning_check: bool,
    },
    /// Self-triggered stand-in that forward-integrates a nominal model from
    /// `x_k` until the inner event rule fires and applies the predicted
    /// interval open-loop to the true plant.
    NominalPrediction {
        eta_nominal: Vec<f64>,
        inner: Box<TriggerPolicy>,
        prediction_dt: f64,
        #[serde(default = "default_horizon")]
        horizon_cap: f64,
    },
}

fn default_cap() -> f64 {
    DEFAULT_INTERVAL_CAP
}

fn default_horizon() -> f64 {
    DEFAULT_PREDICTION_HORIZON
}

impl TriggerPolicy {
    /// Parameter-level validation (certificate invariants, ranges). The
    /// tuning-constraint verification lives in the `tuning` module and is
    /// run at scenario construction unless explicitly waived.
    pub fn validate_params(&self) -> Result<()> {
        match self {
            TriggerPolicy::Periodic { h } => {
                if *h > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("periodic policy needs h > 0".into()))
                }
            }
            TriggerPolicy::EventLebesgue { delta } => {
                if *delta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("event rule needs delta > 0".into()))
                }
            }
            TriggerPolicy::EventRelative { sigma } => {
                if *sigma > 0.0 && *sigma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config("relative rule needs 0 < sigma < 1".into()))
                }
            }
            TriggerPolicy::SelfTrigLebesgue { cert, max_interval, .. } => {
                cert.validate()?;
                if *max_interval > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("interval cap must be > 0".into()))
                }
            }
            TriggerPolicy::SelfTrigUniversal { cert, .. } => {
                cert.validate()?;
                self.nu_coefficients().unwrap().validate()
            }
            TriggerPolicy::SelfTrigNonlinear { cert, delta, .. } => {
                cert.validate()?;
                if *delta <= 0.0 {
                    return Err(Error::Config("delta must be > 0".into()));
                }
                self.nu_coefficients().unwrap().validate()
            }
            TriggerPolicy::SelfTrigGlobal { cert, envelope, delta, .. } => {
                cert.validate()?;
                envelope.validate()?;
                if *delta <= 0.0 {
                    return Err(Error::Config("delta must be > 0".into()));
                }
                self.nu_coefficients().unwrap().validate()
            }
            TriggerPolicy::NominalPrediction { inner, prediction_dt, horizon_cap, .. } => {
                if *prediction_dt <= 0.0 {
                    return Err(Error::Config("prediction dt must be > 0".into()));
                }
                if *horizon_cap <= 0.0 {
                    return Err(Error::Config("prediction horizon cap must be > 0".into()));
                }
                match inner.as_ref() {
                    TriggerPolicy::EventLebesgue { .. } | TriggerPolicy::EventRelative { .. } => {
                        inner.validate_params()
                    }
                    _ => Err(Error::Config(
                        "nominal prediction needs an event rule as its inner policy".into(),
                    )),
                }
            }
        }
    }

    /// The nu coefficients of the self-triggered variants, in the common
    /// radius-function representation.
    pub fn nu_coefficients(&self) -> Option<NuCoefficients> {
        match self {
            TriggerPolicy::SelfTrigUniversal { nu0, nu1, nu2, nu3, .. } => {
                Some(NuCoefficients::from_constants(*nu0, *nu1, *nu2, *nu3))
            }
            TriggerPolicy::SelfTrigNonlinear { nu0, nu1, nu2, nu3, .. } => Some(NuCoefficients {
                nu0: ScalarFn::Const(*nu0),
                nu1: ScalarFn::Const(*nu1),
                nu2: nu2.clone(),
                nu3: ScalarFn::Const(*nu3),
            }),
            TriggerPolicy::SelfTrigGlobal { nu0, nu1, nu2, nu3, .. } => Some(NuCoefficients {
                nu0: nu0.clone(),
                nu1: nu1.clone(),
                nu2: nu2.clone(),
                nu3: nu3.clone(),
            }),
            _ => None,
        }
    }

    /// Closed-form next interval for the self-triggered variants; `None`
    /// for policies that need trajectory monitoring or prediction.
    pub fn next_interval(&self, x_k_norm: f64) -> Option<f64> {
        match self {
            TriggerPolicy::SelfTrigLebesgue { cert, max_interval, .. } => {
                Some(next_interval_lebesgue(cert, x_k_norm, *max_interval))
            }
            TriggerPolicy::SelfTrigUniversal { nu0, nu1, nu2, nu3, .. } => {
                Some(next_interval_universal(*nu0, *nu1, *nu2, *nu3, x_k_norm))
            }
            TriggerPolicy::SelfTrigNonlinear { .. } | TriggerPolicy::SelfTrigGlobal { .. } => {
                Some(self.nu_coefficients().unwrap().interval(x_k_norm))
            }
            _ => None,
        }
    }

    /// Event value for the monitored rules.
    pub fn event_value(&self, x: &State, x_k: &State) -> Option<f64> {
        match self {
            TriggerPolicy::EventLebesgue { delta } => Some(event_value_lebesgue(x, x_k, *delta)),
            TriggerPolicy::EventRelative { sigma } => Some(event_value_relative(x, x_k, *sigma)),
            _ => None,
        }
    }

    pub fn is_event_policy(&self) -> bool {
        matches!(
            self,
            TriggerPolicy::EventLebesgue { .. } | TriggerPolicy::EventRelative { .. }
        )
    }

    /// Declared minimum spacing between sampling instants.
    pub fn min_dwell(&self) -> f64 {
        match self {
            TriggerPolicy::Periodic { h } => *h,
            TriggerPolicy::EventLebesgue { .. }
            | TriggerPolicy::EventRelative { .. }
            | TriggerPolicy::NominalPrediction { .. } => EVENT_TIME_RESOLUTION,
            // Positive by the formula: the denominator is finite on bounded
            // trajectories.
            _ => 0.0,
        }
    }
}

/// Outcome of a nominal-model event prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedInterval {
    pub interval: f64,
    /// True when the horizon cap was reached without an event.
    pub capped: bool,
}

/// Forward-integrates the nominal held-input model from `x_k` until the
/// inner event rule fires, and returns the predicted interval. The crossing
/// is refined by bisection to [`EVENT_TIME_RESOLUTION`].
pub fn next_interval_nominal_prediction(
    model: &PlantModel,
    law: &ControlLaw,
    inner: &TriggerPolicy,
    eta_nominal: &[f64],
    x_k: &State,
    prediction_dt: f64,
    horizon_cap: f64,
) -> Result<PredictedInterval> {
    debug_assert!(prediction_dt > 0.0 && horizon_cap > 0.0);
    let u_k = law.eval(x_k);
    let profile = DisturbanceProfile::zero(model.dim_disturbance);
    let gamma = |x: &State| {
        inner
            .event_value(x, x_k)
            .expect("inner policy must be an event rule")
    };
    let mut x = x_k.clone();
    let mut tau = 0.0;
    while tau < horizon_cap {
        let dt = prediction_dt.min(horizon_cap - tau);
        let x_next = rk4_step(model, &u_k, eta_nominal, &profile, &x, tau, dt)?;
        if gamma(&x_next) >= 0.0 {
            let step = |s: f64| -> Result<State> {
                if s == 0.0 {
                    Ok(x.clone())
                } else {
                    rk4_step(model, &u_k, eta_nominal, &profile, &x, tau, s)
                }
            };
            let crossing = bisect_crossing(step, gamma, dt)?;
            return Ok(PredictedInterval {
                interval: tau + crossing,
                capped: false,
            });
        }
        x = x_next;
        tau += dt;
    }
    Ok(PredictedInterval {
        interval: horizon_cap,
        capped: true,
    })
}

/// Bisects the first zero-upcrossing of `gamma(step(s))` for `s` in
/// `(0, dt]`, assuming `gamma(step(dt)) >= 0`. Resolution is
/// [`EVENT_TIME_RESOLUTION`].
pub(crate) fn bisect_crossing<S, G>(step: S, gamma: G, dt: f64) -> Result<f64>
where
    S: Fn(f64) -> Result<State>,
    G: Fn(&State) -> f64,
{
    let mut lo = 0.0;
    let mut hi = dt;
    if gamma(&step(lo)?) >= 0.0 {
        // Already at/past the trigger surface at the segment start; the
        // event time is the start itself, clamped to the resolution.
        return Ok(EVENT_TIME_RESOLUTION.min(dt));
    }
    while hi - lo > EVENT_TIME_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if gamma(&step(mid)?) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Exact inversion check helper used by tests: the Gronwall envelope
/// evaluated at the Lebesgue interval recovers `delta`.
pub fn lebesgue_round_trip(cert: &ExpCertificate, x_k_norm: f64) -> f64 {
    let h = next_interval_lebesgue(cert, x_k_norm, DEFAULT_INTERVAL_CAP);
    gronwall_bound(cert, x_k_norm, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn bench_cert() -> ExpCertificate {
        ExpCertificate::new(1.0715, 1.0, 61.1945, 0.0, 2.8).unwrap()
    }

    fn bench_nu() -> NuCoefficients {
        NuCoefficients::from_constants(0.42, 61.1945, 10.0, 1e-6)
    }

    #[test]
    fn lebesgue_benchmark_value() {
        // denominator pinned to the benchmark trajectory envelope
        let cert = ExpCertificate::new(1.0, 1.0, 61.1945, 4.7982, 2.8).unwrap();
        let h = next_interval_lebesgue(&cert, 0.0, 1.0);
        assert_relative_eq!(h, 7.512e-3, max_relative = 1e-3);
    }

    #[test]
    fn lebesgue_delta_to_zero_limit() {
        for delta in [1e-3, 1e-6, 1e-9] {
            let cert = ExpCertificate::new(1.5, 0.0, 2.0, 0.0, delta).unwrap();
            let h = next_interval_lebesgue(&cert, 1.0, 1.0);
            assert!(h > 0.0 && h < delta);
        }
    }

    #[test]
    fn lebesgue_round_trip_is_delta() {
        let cert = bench_cert();
        for r in [1e-6, 0.1, 1.0, 4.8] {
            assert_relative_eq!(lebesgue_round_trip(&cert, r), cert.delta, max_relative = 1e-12);
        }
    }

    #[test]
    fn lebesgue_degenerate_denominator_returns_cap() {
        let cert = ExpCertificate::new(1.0, 0.0, 2.0, 0.0, 0.5).unwrap();
        assert_eq!(next_interval_lebesgue(&cert, 0.0, 3.5), 3.5);
    }

    #[test]
    fn universal_benchmark_bracket() {
        let h_max = next_interval_universal(0.42, 61.1945, 10.0, 1e-6, 0.0);
        assert_relative_eq!(h_max, 211.6e-3, max_relative = 5e-3);
        let h_min = next_interval_universal(0.42, 61.1945, 10.0, 1e-6, 4.7982);
        assert_relative_eq!(h_min, 0.142e-3, max_relative = 1e-2);
        // The paper reports 0.180 ms here; direct evaluation of the h_mid
        // formula with b = 3.9633 gives 0.1723 ms.
        let h_mid = next_interval_universal(0.42, 61.1945, 10.0, 1e-6, 3.9633);
        assert_relative_eq!(h_mid, 0.1723e-3, max_relative = 1e-2);
    }

    #[test]
    fn universal_monotone_and_bracketed() {
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let r = i as f64 * 0.1;
            let h = next_interval_universal(0.42, 61.1945, 10.0, 1e-6, r);
            assert!(h < prev);
            assert!(h > 0.0);
            prev = h;
        }
        let cap = next_interval_universal(0.42, 61.1945, 10.0, 1e-6, 0.0);
        assert!(prev <= cap);
    }

    #[test]
    fn nonlinear_reduces_to_universal_with_linear_nu2() {
        let nu = NuCoefficients::from_constants(0.42, 61.1945, 10.0, 1e-6);
        for i in 0..50 {
            let r = i as f64 * 0.2;
            assert_relative_eq!(
                next_interval_nonlinear(&nu, r),
                next_interval_universal(0.42, 61.1945, 10.0, 1e-6, r),
                max_relative = 1e-15
            );
        }
        assert_relative_eq!(
            next_interval_nonlinear(&nu, 0.0),
            next_interval_universal(0.42, 61.1945, 10.0, 1e-6, 0.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn nonlinear_quadratic_nu2_value() {
        let nu = NuCoefficients {
            nu0: ScalarFn::Const(1.0),
            nu1: ScalarFn::Const(1.0),
            nu2: ScalarFn::Poly { coeff: 1.0, power: 2.0 },
            nu3: ScalarFn::Const(1.0),
        };
        assert_relative_eq!(next_interval_nonlinear(&nu, 2.0), (1.2f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn nonlinear_monotone_decrease_with_unbounded_nu2() {
        let nu = NuCoefficients {
            nu0: ScalarFn::Const(1.0),
            nu1: ScalarFn::Const(1.0),
            nu2: ScalarFn::Poly { coeff: 1.0, power: 3.0 },
            nu3: ScalarFn::Const(0.5),
        };
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let h = next_interval_nonlinear(&nu, i as f64);
            assert!(h <= prev && h > 0.0);
            prev = h;
        }
    }

    #[test]
    fn global_constant_nu_matches_universal() {
        let nu_fn = NuCoefficients {
            nu0: ScalarFn::Const(0.3),
            nu1: ScalarFn::Const(2.0),
            nu2: ScalarFn::Linear(5.0),
            nu3: ScalarFn::Const(0.1),
        };
        for i in 0..100 {
            let r = i as f64 * 0.07;
            assert_relative_eq!(
                next_interval_global(&nu_fn, r),
                next_interval_universal(0.3, 2.0, 5.0, 0.1, r),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn global_direct_values() {
        let nu = NuCoefficients {
            nu0: ScalarFn::Const(1.0),
            nu1: ScalarFn::Affine { offset: 1.0, slope: 1.0 },
            nu2: ScalarFn::Linear(1.0),
            nu3: ScalarFn::Const(1.0),
        };
        assert_relative_eq!(next_interval_global(&nu, 1.0), 0.5 * (1.5f64).ln(), epsilon = 1e-14);
        assert_relative_eq!(next_interval_global(&nu, 0.0), (2.0f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn event_values() {
        let x_k = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_relative_eq!(event_value_lebesgue(&x_k, &x_k, 0.5), -0.5);
        let sigma: f64 = 0.3;
        let expected = -(RELATIVE_RULE_COEFF * sigma).powi(2) * x_k.norm_squared();
        assert_relative_eq!(event_value_relative(&x_k, &x_k, sigma), expected);

        // boundary
        let x = DVector::from_vec(vec![0.5, 0.0, 0.0]);
        assert_relative_eq!(event_value_lebesgue(&x, &x_k, 0.5), 0.0, epsilon = 1e-15);

        // hand evaluation, sigma = 0.5
        let x = DVector::from_vec(vec![0.8, 0.0, 0.0]);
        assert_relative_eq!(event_value_relative(&x, &x_k, 0.5), -0.059856, epsilon = 1e-12);
    }

    #[test]
    fn interval_bounds_benchmark_tunings() {
        let b = interval_bounds(&bench_nu(), 4.7982, 3.9633);
        assert_relative_eq!(b.h_min, 0.142e-3, max_relative = 1e-2);
        assert_relative_eq!(b.h_mid, 0.1723e-3, max_relative = 1e-2);
        assert_relative_eq!(b.h_max, 211.6e-3, max_relative = 1e-2);
        assert!(b.h_min <= b.h_mid && b.h_mid <= b.h_max);

        let nu2 = NuCoefficients::from_constants(0.14, 61.1945, 3.3, 7.86);
        let b2 = interval_bounds(&nu2, 4.7982, 3.9633);
        assert_relative_eq!(b2.h_max, 0.288e-3, max_relative = 1e-2);
    }

    #[test]
    fn interval_bounds_envelope_equals_b() {
        let b = interval_bounds(&bench_nu(), 2.5, 2.5);
        assert_eq!(b.h_min, b.h_mid);
    }

    #[test]
    fn nu_validation() {
        assert!(bench_nu().validate().is_ok());
        let bad = NuCoefficients {
            nu0: ScalarFn::Const(0.0),
            ..bench_nu()
        };
        assert!(bad.validate().is_err());
        let bad = NuCoefficients {
            nu2: ScalarFn::Linear(1.0),
            nu3: ScalarFn::Zero,
            ..bench_nu()
        };
        // denominator vanishes at r = 0
        assert!(bad.validate().is_err());
    }

    #[test]
    fn policy_param_validation() {
        assert!(TriggerPolicy::Periodic { h: 0.0 }.validate_params().is_err());
        assert!(TriggerPolicy::EventRelative { sigma: 1.0 }.validate_params().is_err());
        assert!(TriggerPolicy::EventRelative { sigma: 0.1 }.validate_params().is_ok());
        let nested = TriggerPolicy::NominalPrediction {
            eta_nominal: vec![1.0],
            inner: Box::new(TriggerPolicy::Periodic { h: 0.1 }),
            prediction_dt: 1e-3,
            horizon_cap: 5.0,
        };
        assert!(nested.validate_params().is_err());
    }

    #[test]
    fn policy_serde_round_trip() {
        let policy = TriggerPolicy::SelfTrigUniversal {
            cert: bench_cert(),
            nu0: 0.42,
            nu1: 61.1945,
            nu2: 10.0,
            nu3: 1e-6,
            waive_tuning_check: false,
        };
        let json = serde_json::to_string(&policy).unwrap();
        let back: TriggerPolicy = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(
            back.next_interval(1.23).unwrap(),
            policy.next_interval(1.23).unwrap()
        );
    }

    proptest::proptest! {
        #[test]
        fn universal_interval_positive_and_decreasing(
            nu0 in 0.01f64..10.0,
            nu1 in 0.01f64..100.0,
            nu2 in 0.01f64..10.0,
            nu3 in 1e-9f64..10.0,
            r in 0.0f64..100.0,
            dr in 0.0f64..10.0,
        ) {
            let h = next_interval_universal(nu0, nu1, nu2, nu3, r);
            let h2 = next_interval_universal(nu0, nu1, nu2, nu3, r + dr);
            proptest::prop_assert!(h > 0.0);
            proptest::prop_assert!(h2 <= h);
        }

        #[test]
        fn lebesgue_inversion_property(
            m1 in 1.0f64..10.0,
            m2 in 0.0f64..5.0,
            w_bar in 0.0f64..2.0,
            l in 0.01f64..100.0,
            delta in 1e-6f64..10.0,
            r in 1e-3f64..10.0,
        ) {
            let cert = ExpCertificate::new(m1, m2, l, w_bar, delta).unwrap();
            let back = lebesgue_round_trip(&cert, r);
            proptest::prop_assert!((back - delta).abs() <= 1e-9 * delta);
        }
    }

    #[test]
    fn prediction_linear_scalar_closed_form() {
        use crate::dynamics::{Input, PlantModel};
        use std::sync::Arc;
        // Nominal model dx/dt = -x (input ignored): the Lebesgue event time
        // from x_k is ln(x_k / (x_k - delta)).
        let model = PlantModel::new(
            1,
            1,
            1,
            vec![],
            100.0,
            Arc::new(|_: &[f64], x: &State, _: &Input, _: &State| -x),
        );
        let law = ControlLaw::new(1.0, Arc::new(|_: &State| DVector::zeros(1)));
        let delta = 0.3;
        let inner = TriggerPolicy::EventLebesgue { delta };
        let dt = 1e-3;
        for xk in [1.0, 0.7, 0.5] {
            let x_k = DVector::from_vec(vec![xk]);
            let p = next_interval_nominal_prediction(&model, &law, &inner, &[], &x_k, dt, 10.0)
                .unwrap();
            assert!(!p.capped);
            let exact = (xk / (xk - delta)).ln();
            assert!(
                (p.interval - exact).abs() <= 2.0 * dt,
                "xk={xk}: predicted {} vs exact {exact}",
                p.interval
            );
        }
    }

    #[test]
    fn prediction_horizon_cap_flag() {
        use crate::dynamics::{Input, PlantModel};
        use std::sync::Arc;
        // Frozen dynamics never trigger the rule.
        let model = PlantModel::new(
            1,
            1,
            1,
            vec![],
            100.0,
            Arc::new(|_: &[f64], _: &State, _: &Input, _: &State| DVector::zeros(1)),
        );
        let law = ControlLaw::new(0.0, Arc::new(|_: &State| DVector::zeros(1)));
        let inner = TriggerPolicy::EventLebesgue { delta: 0.5 };
        let x_k = DVector::from_vec(vec![1.0]);
        let p =
            next_interval_nominal_prediction(&model, &law, &inner, &[], &x_k, 1e-2, 2.0).unwrap();
        assert!(p.capped);
        assert_eq!(p.interval, 2.0);
    }
}
