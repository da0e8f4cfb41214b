//! Levenberg-Marquardt over SE(3) with right-multiplicative rotation updates.

use nalgebra::{Matrix6, Vector6};
use serde::Serialize;

use super::residual::{retract6, ResidualTerm};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub initial_damping: f64,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    /// Weight of the squared rotation residual relative to the translation one.
    pub w_rot: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_damping: 1e-4,
            max_iterations: 50,
            step_tolerance: 1e-8,
            w_rot: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub transform: RigidTransform,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub status: RefineStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    Converged,
    /// Iteration limit reached; the best iterate is returned.
    NonConverged,
}

/// `Σ w_rot‖e_R‖² + ‖e_t‖²`.
pub fn total_cost(terms: &[ResidualTerm], t: &RigidTransform, w_rot: f64) -> f64 {
    terms
        .iter()
        .map(|term| {
            let e = term.evaluate(t);
            w_rot * e.e_r.norm_squared() + e.e_t.norm_squared()
        })
        .sum()
}

fn normal_equations(terms: &[ResidualTerm], t: &RigidTransform, w_rot: f64) -> (Matrix6<f64>, Vector6<f64>, f64) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    let mut cost = 0.0;
    let sw = w_rot.sqrt();
    for term in terms {
        let mut e = term.evaluate(t);
        e.e_r *= sw;
        e.jacobian.fixed_rows_mut::<9>(0).scale_mut(sw);
        let r = e.stacked();
        h += e.jacobian.transpose() * e.jacobian;
        g += e.jacobian.transpose() * r;
        cost += r.norm_squared();
    }
    (h, g, cost)
}

/// Whether the Gauss-Newton matrix of `terms` at `t` has full rank, i.e.
/// the terms constrain all six degrees of freedom.
pub fn is_well_constrained(terms: &[ResidualTerm], t: &RigidTransform, w_rot: f64) -> bool {
    let (h, _, _) = normal_equations(terms, t, w_rot);
    let ev = h.symmetric_eigenvalues();
    let max = ev.max();
    max > 0.0 && ev.min() > 1e-9 * max
}

/// Minimizes the total squared residual of `terms` from `initial`. The cost
/// never increases: only steps that reduce it are accepted.
pub fn levenberg_marquardt(terms: &[ResidualTerm], initial: &RigidTransform, settings: &LmSettings) -> RefineOutcome {
    let mut t = *initial;
    let (mut h, mut g, mut cost) = normal_equations(terms, &t, settings.w_rot);
    let initial_cost = cost;
    let mut lambda = settings.initial_damping;
    let mut status = RefineStatus::NonConverged;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            status = RefineStatus::Converged;
            break;
        }
        let damped = h + Matrix6::identity() * lambda;
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = -chol.solve(&g);
        if step.norm() < settings.step_tolerance {
            status = RefineStatus::Converged;
            break;
        }
        let candidate = retract6(&t, &step);
        let new_cost = total_cost(terms, &candidate, settings.w_rot);
        if new_cost < cost {
            t = candidate;
            (h, g, cost) = normal_equations(terms, &t, settings.w_rot);
            lambda = (lambda / 10.0).max(1e-12);
        } else {
            lambda *= 10.0;
        }
    }
    RefineOutcome {
        transform: t,
        initial_cost,
        final_cost: cost,
        iterations,
        status,
    }
}
