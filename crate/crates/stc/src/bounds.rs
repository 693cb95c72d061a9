//! Analytic machinery behind the self-triggered laws: stability
//! certificates, the Gronwall deviation envelope, and a grid-sampled local
//! Lipschitz estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlLaw, PlantModel, State};
use crate::error::{Error, Result};
use crate::scalar_fn::ScalarFn;

/// Exponential-stability certificate: `||xi(t)|| <= M1 ||xi_k|| + M2 w_bar`
/// together with the combined Lipschitz rate `L` and the triggering
/// threshold `delta`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExpCertificate {
    pub m1: f64,
    pub m2: f64,
    pub l: f64,
    #[serde(default)]
    pub w_bar: f64,
    pub delta: f64,
}

impl ExpCertificate {
    pub fn new(m1: f64, m2: f64, l: f64, w_bar: f64, delta: f64) -> Result<Self> {
        let cert = Self { m1, m2, l, w_bar, delta };
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.m1, self.m2, self.l, self.w_bar, self.delta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Certificate("certificate fields must be finite".into()));
        }
        if self.m1 < 1.0 {
            return Err(Error::Certificate("m1 must be >= 1".into()));
        }
        if self.m2 < 0.0 || self.w_bar < 0.0 {
            return Err(Error::Certificate("m2 and w_bar must be >= 0".into()));
        }
        if self.l <= 0.0 {
            return Err(Error::Certificate("l must be > 0".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::Certificate("delta must be > 0".into()));
        }
        Ok(())
    }

    /// `M1 ||x_k|| + M2 w_bar`, the prefactor of the deviation envelope.
    pub fn envelope_prefactor(&self, x_k_norm: f64) -> f64 {
        self.m1 * x_k_norm + self.m2 * self.w_bar
    }
}

/// ISS-style certificate for asymptotically (not exponentially)
/// stabilizable systems: a class-KL bound section `beta0(r) = beta(r, 0)`
/// and class-K gains for the disturbance and the sampling perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KLCertificate {
    pub beta0: ScalarFn,
    pub gamma1: ScalarFn,
    pub gamma2: ScalarFn,
    pub l: f64,
}

impl KLCertificate {
    /// Grid radius used for the monotonicity checks.
    const CHECK_RADIUS: f64 = 1e6;

    pub fn new(beta0: ScalarFn, gamma1: ScalarFn, gamma2: ScalarFn, l: f64) -> Result<Self> {
        let cert = Self { beta0, gamma1, gamma2, l };
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::Certificate("l must be > 0".into()));
        }
        for (name, f) in [
            ("beta0", &self.beta0),
            ("gamma1", &self.gamma1),
            ("gamma2", &self.gamma2),
        ] {
            if !f.vanishes_at_zero() {
                return Err(Error::Certificate(format!("{name} must vanish at 0")));
            }
            if !f.is_nondecreasing_on_grid(Self::CHECK_RADIUS, 200) {
                return Err(Error::Certificate(format!("{name} must be nondecreasing")));
            }
        }
        Ok(())
    }

    /// `beta(||x_k||, 0) + gamma1(w_bar)`, the KL deviation prefactor.
    pub fn envelope_prefactor(&self, x_k_norm: f64, w_bar: f64) -> f64 {
        self.beta0.eval(x_k_norm) + self.gamma1.eval(w_bar)
    }
}

/// Radius-indexed local Lipschitz bound `L_hat(r)`, nondecreasing in `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzEnvelope {
    pub l_hat: ScalarFn,
    pub r_max: f64,
}

impl LipschitzEnvelope {
    pub fn new(l_hat: ScalarFn, r_max: f64) -> Result<Self> {
        let env = Self { l_hat, r_max };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) {
            return Err(Error::Certificate("envelope radius range must be > 0".into()));
        }
        if !self.l_hat.is_nondecreasing_on_grid(self.r_max, 200) {
            return Err(Error::Certificate("l_hat must be nondecreasing".into()));
        }
        if !self.l_hat.is_positive_on_grid(self.r_max, 200) {
            return Err(Error::Certificate("l_hat must be positive on the radius range".into()));
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.l_hat.eval(r)
    }
}

/// Gronwall deviation envelope
/// `(M1 ||x_k|| + M2 w_bar) (exp(L tau) - 1)`.
///
/// Zero at `tau = 0`, strictly increasing and convex in `tau`.
pub fn gronwall_bound(cert: &ExpCertificate, x_k_norm: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0 && x_k_norm >= 0.0);
    cert.envelope_prefactor(x_k_norm) * ((cert.l * tau).exp_m1())
}

/// Comparison-function variant of the envelope:
/// `(beta(||x_k||, 0) + gamma1(w_bar)) (exp(L tau) - 1)`.
pub fn gronwall_bound_kl(cert: &KLCertificate, x_k_norm: f64, w_bar: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0 && x_k_norm >= 0.0);
    cert.envelope_prefactor(x_k_norm, w_bar) * ((cert.l * tau).exp_m1())
}

/// Options for [`estimate_local_lipschitz`].
#[derive(Debug, Clone)]
pub struct LipschitzEstimateOpts {
    /// Lattice points per state axis.
    pub state_points_per_axis: usize,
    /// Lattice points per parameter axis.
    pub eta_points_per_axis: usize,
    /// Multiplier applied to the grid maximum to offset sampling optimism.
    pub safety_factor: f64,
    /// Minimum number of state samples inside the ball (ignored at r = 0).
    pub min_points: usize,
    /// Central-difference step scale.
    pub fd_step: f64,
}

impl Default for LipschitzEstimateOpts {
    fn default() -> Self {
        Self {
            state_points_per_axis: 9,
            eta_points_per_axis: 5,
            safety_factor: 1.1,
            min_points: 27,
            fd_step: 1e-6,
        }
    }
}

/// Grid-sampled estimate of the local Lipschitz constant of the continuous
/// closed loop `x -> f(eta, x, kappa(x), 0)` over the ball of radius `r`
/// crossed with the plant's parameter box.
///
/// Takes the maximum finite-difference Jacobian operator norm over a
/// deterministic lattice (a running max, so the result is independent of
/// evaluation order and nondecreasing in `r`), inflated by the safety
/// factor.
pub fn estimate_local_lipschitz(
    model: &PlantModel,
    law: &ControlLaw,
    r: f64,
    opts: &LipschitzEstimateOpts,
) -> Result<f64> {
    if r < 0.0 || r > model.state_domain_radius {
        return Err(Error::Config(format!(
            "radius {r} outside the model's valid domain radius {}",
            model.state_domain_radius
        )));
    }
    let n = model.dim_state;
    let mut points: Vec<State> = Vec::new();
    if r == 0.0 {
        points.push(State::zeros(n));
    } else {
        let k = opts.state_points_per_axis.max(2);
        let mut idx = vec![0usize; n];
        loop {
            let p = State::from_iterator(
                n,
                idx.iter().map(|&i| -r + 2.0 * r * i as f64 / (k - 1) as f64),
            );
            if p.norm() <= r * (1.0 + 1e-12) {
                points.push(p);
            }
            // odometer increment over the lattice
            let mut axis = 0;
            loop {
                if axis == n {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] < k {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis == n {
                break;
            }
        }
        if points.len() < opts.min_points {
            return Err(Error::Config(format!(
                "grid resolution too coarse: {} state samples < required {}",
                points.len(),
                opts.min_points
            )));
        }
    }

    let eta_grid = eta_lattice(&model.eta_range, opts.eta_points_per_axis);
    let w = model.zero_disturbance();
    let closed_loop = |eta: &[f64], x: &State| -> State {
        let u = law.eval(x);
        model.eval(eta, x, &u, &w)
    };

    let mut max_norm: f64 = 0.0;
    for eta in &eta_grid {
        for p in &points {
            let jac = fd_jacobian(|x| closed_loop(eta, x), p, opts.fd_step);
            let op_norm = jac
                .svd(false, false)
                .singular_values
                .iter()
                .fold(0.0f64, |a, &b| a.max(b));
            max_norm = max_norm.max(op_norm);
        }
    }
    Ok(max_norm * opts.safety_factor)
}

/// Builds a nondecreasing Lipschitz envelope by estimating over each radius
/// in `radii` (sorted ascending) and keeping a running max.
pub fn build_lipschitz_envelope(
    model: &PlantModel,
    law: &ControlLaw,
    radii: &[f64],
    opts: &LipschitzEstimateOpts,
) -> Result<LipschitzEnvelope> {
    if radii.is_empty() {
        return Err(Error::Config("envelope needs at least one radius".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    let mut running = 0.0f64;
    for &r in radii {
        running = running.max(estimate_local_lipschitz(model, law, r, opts)?);
        rows.push((r, running));
    }
    let r_max = *radii.last().unwrap();
    LipschitzEnvelope::new(ScalarFn::Table(rows.into()), r_max)
}

fn eta_lattice(range: &[(f64, f64)], k: usize) -> Vec<Vec<f64>> {
    if range.is_empty() {
        return vec![Vec::new()];
    }
    let k = k.max(2);
    let mut out = vec![Vec::new()];
    for (lo, hi) in range {
        let mut next = Vec::with_capacity(out.len() * k);
        for prefix in &out {
            for i in 0..k {
                let v = lo + (hi - lo) * i as f64 / (k - 1) as f64;
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn fd_jacobian<F: Fn(&State) -> State>(f: F, x: &State, step: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{lookup_model, Input, PlantModel};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::sync::Arc;

    fn cert(m1: f64, m2: f64, l: f64, w_bar: f64, delta: f64) -> ExpCertificate {
        ExpCertificate::new(m1, m2, l, w_bar, delta).unwrap()
    }

    #[test]
    fn gronwall_zero_at_zero_tau() {
        let c = cert(1.5, 0.3, 2.0, 1.0, 0.5);
        assert_eq!(gronwall_bound(&c, 3.0, 0.0), 0.0);
    }

    #[test]
    fn gronwall_closed_forms() {
        let c = cert(1.0, 0.0, 1.0, 0.0, 0.5);
        assert_relative_eq!(gronwall_bound(&c, 1.0, 2.0f64.ln()), 1.0, epsilon = 1e-14);

        let c = cert(1.0, 0.5, 0.5, 2.0, 0.5);
        let expected = 4.0 * (std::f64::consts::E - 1.0);
        assert_relative_eq!(gronwall_bound(&c, 3.0, 2.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn gronwall_kl_reduces_to_exponential() {
        let kl = KLCertificate::new(ScalarFn::Linear(1.0), ScalarFn::Zero, ScalarFn::Linear(1.0), 0.7)
            .unwrap();
        let ex = cert(1.0, 0.0, 0.7, 0.0, 0.5);
        for r in [0.0, 0.3, 2.0, 10.0] {
            for tau in [0.0, 0.1, 1.5] {
                assert_relative_eq!(
                    gronwall_bound_kl(&kl, r, 0.0, tau),
                    gronwall_bound(&ex, r, tau),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn gronwall_kl_direct_evaluation() {
        let kl = KLCertificate::new(
            ScalarFn::Sqrt(2.0),
            ScalarFn::custom(|w| if w > 0.0 { 1.0 } else { 0.0 }),
            ScalarFn::Linear(1.0),
            1.0,
        )
        .unwrap();
        // beta(4,0)=4, gamma1=1, tau=1 -> 5(e-1)
        let expected = 5.0 * (std::f64::consts::E - 1.0);
        assert_relative_eq!(gronwall_bound_kl(&kl, 4.0, 0.5, 1.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn gronwall_increasing_and_convex_in_tau() {
        let c = cert(1.2, 0.4, 3.0, 0.7, 0.5);
        let taus: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let vals: Vec<f64> = taus.iter().map(|&t| gronwall_bound(&c, 2.0, t)).collect();
        for w in vals.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in vals.windows(3) {
            assert!(w[2] - w[1] >= w[1] - w[0]);
        }
    }

    #[test]
    fn certificate_validation() {
        assert!(ExpCertificate::new(0.5, 0.0, 1.0, 0.0, 0.5).is_err());
        assert!(ExpCertificate::new(1.0, 0.0, 0.0, 0.0, 0.5).is_err());
        assert!(ExpCertificate::new(1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(KLCertificate::new(ScalarFn::Const(1.0), ScalarFn::Zero, ScalarFn::Zero, 1.0).is_err());
        assert!(KLCertificate::new(
            ScalarFn::custom(|r| -r),
            ScalarFn::Zero,
            ScalarFn::Zero,
            1.0
        )
        .is_err());
    }

    fn scalar_linear_plant() -> (PlantModel, ControlLaw) {
        // dx/dt = -x with kappa = 0: constant Jacobian -1.
        let m = PlantModel::new(
            1,
            1,
            1,
            vec![],
            10.0,
            Arc::new(|_: &[f64], x: &State, _: &Input, _: &State| -x),
        );
        let law = ControlLaw::new(0.0, Arc::new(|_: &State| DVector::zeros(1)));
        (m, law)
    }

    #[test]
    fn lipschitz_linear_system_is_one() {
        let (m, law) = scalar_linear_plant();
        let opts = LipschitzEstimateOpts {
            min_points: 3,
            ..Default::default()
        };
        for r in [0.5, 2.0] {
            let l = estimate_local_lipschitz(&m, &law, r, &opts).unwrap();
            assert_relative_eq!(l, opts.safety_factor, epsilon = 1e-6);
        }
    }

    #[test]
    fn lipschitz_zero_radius_is_origin_jacobian() {
        let (m, law) = scalar_linear_plant();
        let opts = LipschitzEstimateOpts::default();
        let l = estimate_local_lipschitz(&m, &law, 0.0, &opts).unwrap();
        assert_relative_eq!(l, opts.safety_factor, epsilon = 1e-6);
    }

    #[test]
    fn lipschitz_too_coarse_is_config_error() {
        let (m, law) = scalar_linear_plant();
        let opts = LipschitzEstimateOpts {
            state_points_per_axis: 2,
            min_points: 100,
            ..Default::default()
        };
        assert!(matches!(
            estimate_local_lipschitz(&m, &law, 1.0, &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lipschitz_monotone_in_radius_and_converges_with_resolution() {
        let (m, law) = lookup_model("rigid-body").unwrap();
        let coarse = LipschitzEstimateOpts {
            state_points_per_axis: 7,
            eta_points_per_axis: 3,
            safety_factor: 1.0,
            min_points: 10,
            ..Default::default()
        };
        // 13 points nest the 7-point lattice, so the fine grid is a superset.
        let fine = LipschitzEstimateOpts {
            state_points_per_axis: 13,
            ..coarse.clone()
        };
        let mut prev = 0.0;
        for r in [1.0, 2.0, 3.0] {
            let v = estimate_local_lipschitz(&m, &law, r, &coarse).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        // Doubling the resolution never decreases the estimate by more than
        // the finite-difference error budget.
        let c = estimate_local_lipschitz(&m, &law, 3.0, &coarse).unwrap();
        let f = estimate_local_lipschitz(&m, &law, 3.0, &fine).unwrap();
        assert!(f >= c * (1.0 - 1e-6), "fine {f} < coarse {c}");
    }

    #[test]
    fn envelope_from_estimator_is_nondecreasing() {
        let (m, law) = lookup_model("rigid-body").unwrap();
        let opts = LipschitzEstimateOpts {
            state_points_per_axis: 5,
            eta_points_per_axis: 2,
            min_points: 5,
            ..Default::default()
        };
        let env = build_lipschitz_envelope(&m, &law, &[0.5, 1.0, 2.0, 4.0], &opts).unwrap();
        assert!(env.eval(0.1) <= env.eval(3.9));
        assert!(env.eval(4.0) > 0.0);
    }
}
