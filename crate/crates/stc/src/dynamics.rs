//! Plants, controllers, disturbances, and fixed-step integration.
//!
//! A plant is an uncertain vector field `f(eta, x, u, w)` with a compact
//! parameter box for `eta` and a state ball on which its Lipschitz data is
//! valid. The sampled-data right-hand side holds the input constant between
//! sampling instants.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type State = DVector<f64>;
pub type Input = DVector<f64>;

type DynamicsFn = Arc<dyn Fn(&[f64], &State, &Input, &State) -> State + Send + Sync>;
type LawFn = Arc<dyn Fn(&State) -> Input + Send + Sync>;

/// Uncertain plant `dx/dt = f(eta, x, u, w)`.
#[derive(Clone)]
pub struct PlantModel {
    pub dim_state: usize,
    pub dim_input: usize,
    pub dim_disturbance: usize,
    /// Axis-aligned box for the uncertain parameter vector.
    pub eta_range: Vec<(f64, f64)>,
    /// Radius of the state ball on which the plant's Lipschitz data holds.
    pub state_domain_radius: f64,
    dynamics: DynamicsFn,
}

impl PlantModel {
    pub fn new(
        dim_state: usize,
        dim_input: usize,
        dim_disturbance: usize,
        eta_range: Vec<(f64, f64)>,
        state_domain_radius: f64,
        dynamics: DynamicsFn,
    ) -> Self {
        assert!(dim_state > 0 && dim_input > 0);
        assert!(state_domain_radius > 0.0);
        Self {
            dim_state,
            dim_input,
            dim_disturbance,
            eta_range,
            state_domain_radius,
            dynamics,
        }
    }

    pub fn eta_in_range(&self, eta: &[f64]) -> bool {
        eta.len() == self.eta_range.len()
            && eta
                .iter()
                .zip(&self.eta_range)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Raw vector-field evaluation without the domain checks.
    pub fn eval(&self, eta: &[f64], x: &State, u: &Input, w: &State) -> State {
        (self.dynamics)(eta, x, u, w)
    }

    pub fn zero_disturbance(&self) -> State {
        DVector::zeros(self.dim_disturbance)
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("dim_state", &self.dim_state)
            .field("dim_input", &self.dim_input)
            .field("dim_disturbance", &self.dim_disturbance)
            .field("eta_range", &self.eta_range)
            .field("state_domain_radius", &self.state_domain_radius)
            .finish()
    }
}

/// Static state-feedback law `u = kappa(x)` with its Lipschitz constant.
#[derive(Clone)]
pub struct ControlLaw {
    law: LawFn,
    /// Lipschitz constant of the law with respect to the state.
    pub lipschitz_x: f64,
}

impl ControlLaw {
    pub fn new(lipschitz_x: f64, law: LawFn) -> Self {
        assert!(lipschitz_x >= 0.0);
        Self { law, lipschitz_x }
    }

    pub fn eval(&self, x: &State) -> Input {
        (self.law)(x)
    }
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlLaw")
            .field("lipschitz_x", &self.lipschitz_x)
            .finish()
    }
}

/// One constant-valued disturbance window.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisturbanceSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub value: Vec<f64>,
}

/// Piecewise-constant disturbance, zero outside all segments.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisturbanceProfile {
    pub dim: usize,
    #[serde(default)]
    pub segments: Vec<DisturbanceSegment>,
    /// Norm bound on the disturbance (the w-bar of the certificates).
    pub bound: f64,
}

impl DisturbanceProfile {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            segments: Vec::new(),
            bound: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bound < 0.0 {
            return Err(Error::Config("disturbance bound must be >= 0".into()));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for seg in &self.segments {
            if seg.value.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    what: "disturbance segment",
                    expected: self.dim,
                    got: seg.value.len(),
                });
            }
            if seg.t_start >= seg.t_end {
                return Err(Error::Config("disturbance segment must have t_start < t_end".into()));
            }
            if seg.t_start < prev_end {
                return Err(Error::Config("disturbance segments overlap or are out of order".into()));
            }
            let norm = seg.value.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > self.bound + 1e-12 {
                return Err(Error::Config(format!(
                    "disturbance segment norm {norm} exceeds bound {}",
                    self.bound
                )));
            }
            prev_end = seg.t_end;
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> State {
        for seg in &self.segments {
            if t >= seg.t_start && t < seg.t_end {
                return DVector::from_vec(seg.value.clone());
            }
        }
        DVector::zeros(self.dim)
    }

    /// Segment boundary times, used as integration breakpoints.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments
            .iter()
            .flat_map(|s| [s.t_start, s.t_end].into_iter())
    }
}

/// Sampled-data right-hand side `f(eta, x, u_held, w)` with the domain checks
/// from the plant declaration.
pub fn eval_closed_loop(
    model: &PlantModel,
    eta: &[f64],
    x: &State,
    u_held: &Input,
    w: &State,
) -> Result<State> {
    if x.len() != model.dim_state {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: model.dim_state,
            got: x.len(),
        });
    }
    if u_held.len() != model.dim_input {
        return Err(Error::DimensionMismatch {
            what: "input",
            expected: model.dim_input,
            got: u_held.len(),
        });
    }
    if w.len() != model.dim_disturbance {
        return Err(Error::DimensionMismatch {
            what: "disturbance",
            expected: model.dim_disturbance,
            got: w.len(),
        });
    }
    if !model.eta_in_range(eta) {
        return Err(Error::EtaOutOfRange);
    }
    Ok(model.eval(eta, x, u_held, w))
}

/// One classic fourth-order Runge-Kutta update of the held-input dynamics.
/// The disturbance is sampled from the profile at the stage times.
pub fn rk4_step(
    model: &PlantModel,
    u_held: &Input,
    eta: &[f64],
    profile: &DisturbanceProfile,
    x: &State,
    t: f64,
    dt: f64,
) -> Result<State> {
    debug_assert!(dt > 0.0);
    let f = |x: &State, t: f64| model.eval(eta, x, u_held, &profile.value_at(t));
    let half = dt / 2.0;
    let k1 = f(x, t);
    let k2 = f(&(x + half * &k1), t + half);
    let k3 = f(&(x + half * &k2), t + half);
    let k4 = f(&(x + dt * &k3), t + dt);
    let next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence { t: t + dt })
    }
}

/// One RK4 update with the disturbance held constant over the step. The
/// simulator splits integration spans at disturbance-window edges, so within
/// a span the profile is constant and this variant integrates it exactly
/// (stage-time sampling of the profile is ambiguous at a closed window
/// boundary).
pub fn rk4_step_held(
    model: &PlantModel,
    u_held: &Input,
    eta: &[f64],
    w: &State,
    x: &State,
    t: f64,
    dt: f64,
) -> Result<State> {
    debug_assert!(dt > 0.0);
    let f = |x: &State| model.eval(eta, x, u_held, w);
    let half = dt / 2.0;
    let k1 = f(x);
    let k2 = f(&(x + half * &k1));
    let k3 = f(&(x + half * &k2));
    let k4 = f(&(x + dt * &k3));
    let next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence { t: t + dt })
    }
}

/// Three-state rigid-body benchmark:
/// `dx1 = u1`, `dx2 = u2 + w`, `dx3 = eta * x1 * x2`.
///
/// The single disturbance channel enters additively on the second state; a
/// zero profile recovers the undisturbed plant.
pub fn rigid_body_model(eta_range: (f64, f64)) -> PlantModel {
    PlantModel::new(
        3,
        2,
        1,
        vec![eta_range],
        5.0,
        Arc::new(|eta: &[f64], x: &State, u: &Input, w: &State| {
            DVector::from_vec(vec![u[0], u[1] + w[0], eta[0] * x[0] * x[1]])
        }),
    )
}

/// Globally stabilizing state feedback for the rigid-body benchmark:
/// `u1 = -x1 x2 - 2 x2 x3 - x1 - x3`, `u2 = 2 x1 x2 x3 + 3 x3^2 - x2`.
pub fn rigid_body_law() -> ControlLaw {
    ControlLaw::new(
        61.1945,
        Arc::new(|x: &State| {
            let (x1, x2, x3) = (x[0], x[1], x[2]);
            DVector::from_vec(vec![
                -x1 * x2 - 2.0 * x2 * x3 - x1 - x3,
                2.0 * x1 * x2 * x3 + 3.0 * x3 * x3 - x2,
            ])
        }),
    )
}

/// Plant registry used by the scenario configs. Custom plants are code-level
/// extensions: add them here.
pub fn lookup_model(name: &str) -> Result<(PlantModel, ControlLaw)> {
    match name {
        "rigid-body" => Ok((rigid_body_model((1.0, 8.2)), rigid_body_law())),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
