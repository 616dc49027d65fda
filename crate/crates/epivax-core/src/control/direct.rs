//! Direct transcription: the control is a piecewise-constant function with a
//! handful of equal intervals, optimized by projected-gradient descent with
//! central finite-difference gradients and an Armijo backtracking line
//! search, from several deterministic multi-starts in parallel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::TimeGrid;

use super::{
    cost_on_grid, forward_controlled, interval_index, ControlGrid, ControlProblem, Method,
    SolveReport, I,
};

/// Direct-method configuration.
#[derive(Debug, Clone)]
pub struct DirectConfig {
    /// Number of equal piecewise-constant control intervals.
    pub n_intervals: usize,
    /// Grid spacing in days (state integration and cost quadrature).
    pub step: f64,
    /// Central finite-difference half-width; probe points are clamped into
    /// the admissible box before evaluating.
    pub fd_step: f64,
    /// Constant-control starting points; each is clamped into the box. The
    /// starts are fixed data, so the solver is deterministic.
    pub starts: Vec<f64>,
    /// Maximum gradient iterations per start.
    pub max_iter: usize,
    /// Armijo sufficient-decrease coefficient.
    pub armijo: f64,
    /// Initial line-search step; doubled after each accepted step, halved on
    /// rejection.
    pub init_step: f64,
    /// A line search that shrinks below this step has no admissible descent
    /// direction left; the start is declared stationary.
    pub min_step: f64,
    /// Accepted updates that move no coefficient by more than this terminate
    /// the start.
    pub move_tol: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            n_intervals: 10,
            step: 0.05,
            fd_step: 1e-6,
            starts: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            max_iter: 500,
            armijo: 1e-4,
            init_step: 0.1,
            min_step: 1e-14,
            move_tol: 1e-10,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals == 0 {
            return Err(Error::validation("n_intervals", "need at least one control interval"));
        }
        if self.starts.is_empty() {
            return Err(Error::validation("starts", "need at least one starting point"));
        }
        for (name, v) in [
            ("step", self.step),
            ("fd_step", self.fd_step),
            ("init_step", self.init_step),
            ("min_step", self.min_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter", "need at least one iteration"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::validation("armijo", format!("must lie in (0, 1), got {}", self.armijo)));
        }
        if !(self.move_tol >= 0.0) {
            return Err(Error::validation("move_tol", format!("must be >= 0, got {}", self.move_tol)));
        }
        Ok(())
    }
}

// The simulation-backed objective J(coeffs).
struct Objective<'a> {
    problem: &'a ControlProblem,
    grid: &'a TimeGrid,
    x0: [f64; 6],
    n_intervals: usize,
}

impl Objective<'_> {
    fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.grid.n_points();
        (0..n).map(|j| coeffs[interval_index(j, n, self.n_intervals)]).collect()
    }

    fn eval(&self, coeffs: &[f64]) -> Result<f64> {
        let u = self.expand(coeffs);
        let states = forward_controlled(
            &self.x0,
            self.grid,
            &u,
            self.problem.theta,
            &self.problem.scenario.params,
        )?;
        Ok(cost_on_grid(
            &u,
            &states.column(I),
            self.grid.step(),
            self.problem.gamma_d,
            self.problem.gamma_v,
        ))
    }
}

struct StartRun {
    coeffs: Vec<f64>,
    cost: f64,
    /// Objective after the initial evaluation and each accepted step.
    accepted: Vec<f64>,
    converged: bool,
}

fn descend(start: f64, objective: &Objective<'_>, config: &DirectConfig) -> Result<StartRun> {
    let (lo, hi) = (objective.problem.u_min, objective.problem.u_max);
    let mut coeffs = vec![start.clamp(lo, hi); config.n_intervals];
    let mut cost = objective.eval(&coeffs)?;
    let mut accepted = vec![cost];
    let mut step = config.init_step;
    let mut converged = false;

    'outer: for _ in 0..config.max_iter {
        let mut grad = vec![0.0; config.n_intervals];
        for q in 0..config.n_intervals {
            let up = (coeffs[q] + config.fd_step).min(hi);
            let down = (coeffs[q] - config.fd_step).max(lo);
            if up <= down {
                continue; // degenerate box: u_min == u_max
            }
            let mut probe = coeffs.clone();
            probe[q] = up;
            let above = objective.eval(&probe)?;
            probe[q] = down;
            let below = objective.eval(&probe)?;
            grad[q] = (above - below) / (up - down);
        }

        loop {
            if step < config.min_step {
                // No admissible decrease at any resolvable step length:
                // stationary up to the line search's resolution.
                converged = true;
                break 'outer;
            }
            let candidate: Vec<f64> = coeffs
                .iter()
                .zip(&grad)
                .map(|(&c, &g)| (c - step * g).clamp(lo, hi))
                .collect();
            let candidate_cost = objective.eval(&candidate)?;
            let decrease: f64 = grad
                .iter()
                .zip(coeffs.iter().zip(&candidate))
                .map(|(&g, (&c, &n))| g * (c - n))
                .sum();
            if candidate_cost < cost - config.armijo * decrease {
                let moved = coeffs
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                coeffs = candidate;
                cost = candidate_cost;
                accepted.push(cost);
                if moved < config.move_tol {
                    converged = true;
                    break 'outer;
                }
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }

    Ok(StartRun { coeffs, cost, accepted, converged })
}

/// `solve_direct` plus the winning start's accepted-objective history (the
/// initial value followed by the objective after every accepted step).
pub fn solve_direct_traced(
    problem: &ControlProblem,
    config: &DirectConfig,
) -> Result<(SolveReport, Vec<f64>)> {
    problem.validate()?;
    config.validate()?;
    let grid = TimeGrid::from_step(0.0, problem.scenario.horizon, config.step)?;
    let spec = problem.normalization();
    let x0 = spec.normalize_state(&problem.scenario.initial)?;
    let objective = Objective { problem, grid: &grid, x0, n_intervals: config.n_intervals };

    let runs: Vec<StartRun> = config
        .starts
        .par_iter()
        .map(|&start| descend(start, &objective, config))
        .collect::<Result<Vec<_>>>()?;

    // Lowest cost wins; min_by keeps the first of equal minima, so ties
    // resolve by start order and the outcome is deterministic.
    let best = runs
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("starts validated non-empty");

    let u = objective.expand(&best.coeffs);
    let states = forward_controlled(&x0, &grid, &u, problem.theta, &problem.scenario.params)?;
    let control = ControlGrid::new(grid.clone(), u, problem.u_min, problem.u_max)?;
    let report = SolveReport {
        method: Method::Direct,
        control,
        states: spec.denormalize_trajectory(&states)?,
        adjoints: None,
        cost: best.cost,
        iterations: best.accepted.len() - 1,
        converged: best.converged,
    };
    Ok((report, best.accepted.clone()))
}

/// Optimize a piecewise-constant control by multi-start projected-gradient
/// descent and return the best start's report.
pub fn solve_direct(problem: &ControlProblem, config: &DirectConfig) -> Result<SolveReport> {
    solve_direct_traced(problem, config).map(|(report, _)| report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::preset_scenario;

    fn epidemic_problem() -> ControlProblem {
        ControlProblem::new(preset_scenario("epidemic").unwrap(), 0.5, 0.5, 0.05).unwrap()
    }

    #[test]
    fn nothing_to_optimize_collapses_to_zero() {
        let mut problem = epidemic_problem();
        problem.scenario.params.beta_mh = 0.0;
        problem.scenario.params.beta_hm = 0.0;
        problem.scenario.initial.s_h = 480_000.0;
        problem.scenario.initial.i_h = 0.0;
        let config = DirectConfig { n_intervals: 1, ..DirectConfig::default() };
        let report = solve_direct(&problem, &config).unwrap();
        assert_eq!(report.cost, 0.0);
        assert!(report.converged);
        assert!(report.control.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn epidemic_descent_is_monotone_and_deterministic() {
        let problem = epidemic_problem();
        let config = DirectConfig::default();
        let (report, history) = solve_direct_traced(&problem, &config).unwrap();

        assert!(history.len() >= 2, "no step was ever accepted");
        assert!(
            history.windows(2).all(|w| w[1] <= w[0]),
            "accepted objectives must never increase: {history:?}"
        );
        assert_eq!(report.cost, *history.last().unwrap());
        assert!(
            (0.016..=0.020).contains(&report.cost),
            "cost {} far from the frozen optimum neighborhood",
            report.cost
        );
        assert!(report.control.values().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let (again, _) = solve_direct_traced(&problem, &config).unwrap();
        assert_eq!(report.cost.to_bits(), again.cost.to_bits());
        assert_eq!(report.control.values(), again.control.values());
    }

    #[test]
    fn config_validation_names_the_offending_field() {
        let bad = DirectConfig { n_intervals: 0, ..DirectConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("n_intervals"));
        let bad = DirectConfig { starts: vec![], ..DirectConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("starts"));
    }
}
