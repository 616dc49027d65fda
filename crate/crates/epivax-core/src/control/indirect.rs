//! Forward–backward sweep: alternate forward state integration under the
//! current control, backward costate integration from λ(tf) = 0, and a
//! relaxed control update through the pointwise Hamiltonian minimizer, until
//! neither the control nor the states move.

use crate::error::{Error, Result};
use crate::ode::{TimeGrid, Trajectory};

use super::{
    backward_adjoint, evaluate_cost, forward_controlled, project_control, ControlGrid,
    ControlProblem, Method, SolveReport,
};

/// Sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Relaxation weight on the freshly projected control (1 = replace
    /// outright). Smaller values trade speed for stability: stiff problems
    /// can cycle indefinitely at large omega and still converge at small.
    pub omega: f64,
    /// Convergence threshold on the relative sup-norm change of the control
    /// and the states between consecutive iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Grid spacing in days, shared by the state and costate integrations.
    pub step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { omega: 0.5, tol: 1e-6, max_iter: 2000, step: 0.05 }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::validation("omega", format!("must lie in (0, 1], got {}", self.omega)));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::validation("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter", "need at least one iteration"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::validation("step", format!("must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

// max |new - old| / (1 + max |new|), the sweep's relative sup-norm change.
fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in new.iter().zip(old) {
        diff = diff.max((a - b).abs());
        scale = scale.max(a.abs());
    }
    diff / (1.0 + scale)
}

fn relative_change_states(new: &Trajectory, old: &Trajectory) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..new.n_points() {
        for (a, b) in new.state(i).iter().zip(old.state(i)) {
            diff = diff.max((a - b).abs());
            scale = scale.max(a.abs());
        }
    }
    diff / (1.0 + scale)
}

/// Solve the control problem by forward–backward sweeping. Non-convergence
/// within `max_iter` is reported through the `converged` flag, not an error;
/// only integration failures abort.
pub fn solve_indirect(problem: &ControlProblem, config: &SweepConfig) -> Result<SolveReport> {
    problem.validate()?;
    config.validate()?;
    let grid = TimeGrid::from_step(0.0, problem.scenario.horizon, config.step)?;
    let n = grid.n_points();
    let spec = problem.normalization();
    let x0 = spec.normalize_state(&problem.scenario.initial)?;
    let params = problem.scenario.params;

    let mut u = vec![problem.u_min; n];
    let mut states = forward_controlled(&x0, &grid, &u, problem.theta, &params)?;
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=config.max_iter {
        let costates = backward_adjoint(&states, &grid, &u, problem)?;
        let mut u_new = Vec::with_capacity(n);
        for (j, &u_j) in u.iter().enumerate() {
            let x: &[f64; 6] = states.state(j).try_into().expect("six states");
            let lam: &[f64; 6] = costates.state(j).try_into().expect("six costates");
            let projected = project_control(x, lam, problem);
            let relaxed = (1.0 - config.omega) * u_j + config.omega * projected;
            // The convex combination of admissible values can stray one
            // rounding error outside the box; snap it back.
            u_new.push(relaxed.clamp(problem.u_min, problem.u_max));
        }
        let states_new = forward_controlled(&x0, &grid, &u_new, problem.theta, &params)?;
        let du = relative_change(&u_new, &u);
        let dx = relative_change_states(&states_new, &states);
        u = u_new;
        states = states_new;
        iterations = it;
        if du.max(dx) < config.tol {
            converged = true;
            break;
        }
    }

    // One extra backward pass so the reported costates are consistent with
    // the final (control, states) pair instead of the previous iterate.
    let adjoints = backward_adjoint(&states, &grid, &u, problem)?;
    let infected = states.column(super::I);
    let control = ControlGrid::new(grid, u, problem.u_min, problem.u_max)?;
    let cost = evaluate_cost(&control, &infected, problem.gamma_d, problem.gamma_v)?;
    Ok(SolveReport {
        method: Method::Indirect,
        control,
        states: spec.denormalize_trajectory(&states)?,
        adjoints: Some(adjoints),
        cost,
        iterations,
        converged,
    })
}
