//! Generalized-alpha time integration with Newton-Raphson corrections.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_nonlinear, residual, SystemOperators};
use crate::error::{Error, Result};
use crate::sparse::{norm2, solve};

/// Generalized-alpha parameters derived from the high-frequency spectral
/// radius `rho_inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaParams {
    pub rho_inf: f64,
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub gamma: f64,
}

impl AlphaParams {
    pub fn new(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::Config(format!("rho_inf = {rho_inf} lies outside [0, 1]")));
        }
        let alpha_m = (3.0 - rho_inf) / (2.0 * (1.0 + rho_inf));
        let alpha_f = 1.0 / (1.0 + rho_inf);
        Ok(Self {
            rho_inf,
            alpha_m,
            alpha_f,
            // 1/2 + alpha_m - alpha_f simplifies to alpha_f; this form avoids rounding
            gamma: alpha_f,
        })
    }
}

pub fn alpha_params(rho_inf: f64) -> Result<AlphaParams> {
    AlphaParams::new(rho_inf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    /// Relative to the residual norm at the prediction.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 20,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!("invalid Newton settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Newton corrections performed.
    pub iterations: usize,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub converged: bool,
    /// Residual norm at the prediction.
    pub prediction_residual: f64,
    pub linear_solves: usize,
}

/// Control variables and their time derivatives at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Structure(format!(
                "field and velocity lengths differ ({} vs {})",
                u.len(),
                v.len()
            )));
        }
        Ok(Self { u, v })
    }

    /// State at rest.
    pub fn at_rest(u: Vec<f64>) -> Self {
        let v = vec![0.0; u.len()];
        Self { u, v }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Initial guesses `u_{n+1} = u_n`, `v_{n+1} = (gamma - 1) / gamma v_n`.
pub fn predict(u: &[f64], v: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let c = (gamma - 1.0) / gamma;
    (u.to_vec(), v.iter().map(|x| c * x).collect())
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Advance one step of size `dt`.
///
/// Non-convergence returns [`Error::NotConverged`] carrying the report.
pub fn step(
    state: &State,
    dt: f64,
    alpha: &AlphaParams,
    newton: &NewtonSettings,
    ops: &SystemOperators,
) -> Result<(State, StepReport)> {
    let n = ops.dim();
    if state.u.len() != n || state.v.len() != n {
        return Err(Error::Structure(format!(
            "state of length {} does not match {} operators",
            state.u.len(),
            n
        )));
    }
    let AlphaParams { alpha_m, alpha_f, gamma, .. } = *alpha;
    let (mut u1, mut v1) = predict(&state.u, &state.v, gamma);
    let mut report = StepReport::default();
    let mut pred_norm = 0.0;
    loop {
        let uf = lerp(&state.u, &u1, alpha_f);
        let vm = lerp(&state.v, &v1, alpha_m);
        let r = residual(ops, &uf, &vm);
        let norm = norm2(&r);
        if report.iterations == 0 {
            pred_norm = norm;
            report.prediction_residual = norm;
        }
        report.abs_residual = norm;
        report.rel_residual = if pred_norm > 0.0 { norm / pred_norm } else { 0.0 };
        if norm <= newton.abs_tol || report.rel_residual <= newton.rel_tol {
            report.converged = true;
            break;
        }
        if !norm.is_finite() || report.iterations >= newton.max_iter {
            return Err(Error::NotConverged(Box::new(report)));
        }
        let (_, kf) = assemble_nonlinear(&ops.cache, &ops.params, &uf);
        let mut a = ops.linear.clone();
        a.axpy(1.0, &kf);
        a.scale(alpha_f * gamma * dt);
        a.axpy(alpha_m, &ops.mass);
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let b = solve(&a, &rhs)?;
        report.linear_solves += 1;
        for i in 0..n {
            v1[i] += b[i];
            u1[i] += gamma * dt * b[i];
        }
        report.iterations += 1;
    }
    Ok((State { u: u1, v: v1 }, report))
}

/// Velocity solving the semi-discrete equation at rest time: `M v = -(Fbar + L u)`.
pub fn consistent_velocity(ops: &SystemOperators, u: &[f64]) -> Result<Vec<f64>> {
    let zero = vec![0.0; u.len()];
    let r = residual(ops, u, &zero);
    let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
    solve(&ops.mass, &rhs)
}
