//! Optimal vaccination control: the normalized six-state controlled model,
//! the costate system, the quadratic cost functional, and the two solvers
//! built on them — a forward–backward sweep (indirect) and a projected
//! gradient over piecewise-constant controls (direct).
//!
//! All control computations run on the normalized state `[s, i, r, a, sm, im]`
//! (human compartments as fractions of N_h, aquatic as a fraction of the
//! carrying capacity k·N_h, adults as fractions of m·N_h, time in days).
//! Reports are denormalized back to absolute counts on the way out.

pub mod direct;
pub mod indirect;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{EpiParams, Scenario, SysState, VaccineStrategy};
use crate::ode::{integrate_backward, TimeGrid, Trajectory};

pub use direct::{solve_direct, solve_direct_traced, DirectConfig};
pub use indirect::{solve_indirect, SweepConfig};

// Normalized state layout.
const S: usize = 0;
const I: usize = 1;
const R: usize = 2;
const A: usize = 3;
const SM: usize = 4;
const IM: usize = 5;

/// Scales mapping absolute compartment counts onto the normalized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationSpec {
    /// Human compartments: N_h.
    pub human_scale: f64,
    /// Aquatic phase: k·N_h.
    pub aquatic_scale: f64,
    /// Adult mosquitoes: m·N_h.
    pub adult_mosquito_scale: f64,
}

impl NormalizationSpec {
    pub fn for_params(params: &EpiParams) -> Self {
        NormalizationSpec {
            human_scale: params.n_h,
            aquatic_scale: params.k * params.n_h,
            adult_mosquito_scale: params.m * params.n_h,
        }
    }

    /// Absolute state -> normalized six-vector. The vaccinated compartment
    /// must be identically zero (the controlled model has none).
    pub fn normalize_state(&self, state: &SysState) -> Result<[f64; 6]> {
        if state.v_h != 0.0 {
            return Err(Error::validation(
                "V_h",
                format!("controlled model has no vaccinated compartment; got V_h = {}", state.v_h),
            ));
        }
        Ok([
            state.s_h / self.human_scale,
            state.i_h / self.human_scale,
            state.r_h / self.human_scale,
            state.a_m / self.aquatic_scale,
            state.s_m / self.adult_mosquito_scale,
            state.i_m / self.adult_mosquito_scale,
        ])
    }

    /// Normalized six-vector -> absolute state (vaccinated set to zero).
    pub fn denormalize_state(&self, x: &[f64; 6]) -> SysState {
        SysState {
            s_h: x[S] * self.human_scale,
            v_h: 0.0,
            i_h: x[I] * self.human_scale,
            r_h: x[R] * self.human_scale,
            a_m: x[A] * self.aquatic_scale,
            s_m: x[SM] * self.adult_mosquito_scale,
            i_m: x[IM] * self.adult_mosquito_scale,
        }
    }

    /// Six-column normalized trajectory -> seven-column absolute trajectory.
    pub fn denormalize_trajectory(&self, traj: &Trajectory) -> Result<Trajectory> {
        if traj.dim() != 6 {
            return Err(Error::validation(
                "trajectory",
                format!("expected 6 normalized columns, got {}", traj.dim()),
            ));
        }
        let mut out = Trajectory::with_capacity(7, traj.n_points());
        for j in 0..traj.n_points() {
            let x: &[f64; 6] = traj.state(j).try_into().expect("dimension checked above");
            out.push(traj.times()[j], &self.denormalize_state(x).as_array());
        }
        Ok(out)
    }
}

/// The vaccination optimal-control problem: minimize
/// `∫ gamma_d·i(t)² + gamma_v·u(t)² dt` over controls u(t) ∈ [u_min, u_max],
/// subject to the six-state controlled dynamics with waning fraction `theta`.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    /// Baseline setup. Its strategy must be `none` (the control replaces any
    /// static vaccination scheme) and its initial state carries no vaccinated
    /// individuals; its horizon is the control horizon.
    pub scenario: Scenario,
    /// Weight on squared infectious prevalence.
    pub gamma_d: f64,
    /// Weight on squared vaccination effort.
    pub gamma_v: f64,
    /// Fraction of freshly conferred protection that wanes back to
    /// susceptibility (per unit control effort).
    pub theta: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl ControlProblem {
    /// Problem with the full admissible range [0, 1].
    pub fn new(scenario: Scenario, gamma_d: f64, gamma_v: f64, theta: f64) -> Result<Self> {
        let problem = ControlProblem { scenario, gamma_d, gamma_v, theta, u_min: 0.0, u_max: 1.0 };
        problem.validate()?;
        Ok(problem)
    }

    /// First violated invariant, by field name.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !matches!(self.scenario.strategy, VaccineStrategy::NoVaccine) {
            return Err(Error::validation(
                "strategy",
                "a control problem replaces the static vaccination strategy; set it to \"no_vaccine\"",
            ));
        }
        if self.scenario.initial.v_h != 0.0 {
            return Err(Error::validation(
                "V_h",
                "the controlled model has no vaccinated compartment; initial V_h must be 0",
            ));
        }
        for (name, v) in [("gamma_d", self.gamma_d), ("gamma_v", self.gamma_v)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::validation("theta", format!("must lie in [0, 1], got {}", self.theta)));
        }
        if !(0.0 <= self.u_min && self.u_min <= self.u_max && self.u_max <= 1.0) {
            return Err(Error::validation(
                "u_min",
                format!(
                    "control bounds need 0 <= u_min <= u_max <= 1, got [{}, {}]",
                    self.u_min, self.u_max
                ),
            ));
        }
        Ok(())
    }

    pub fn normalization(&self) -> NormalizationSpec {
        NormalizationSpec::for_params(&self.scenario.params)
    }
}

/// A control signal sampled on a uniform grid, already projected into the
/// admissible range.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    grid: TimeGrid,
    u: Vec<f64>,
}

impl ControlGrid {
    /// Admissibility is checked exactly: every sample must already lie in
    /// [u_min, u_max] (projection happens before storage, never here).
    pub fn new(grid: TimeGrid, u: Vec<f64>, u_min: f64, u_max: f64) -> Result<Self> {
        if u.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "control has {} samples, grid has {} points",
                u.len(),
                grid.n_points()
            )));
        }
        for (j, &v) in u.iter().enumerate() {
            if !(u_min..=u_max).contains(&v) {
                return Err(Error::validation(
                    "u",
                    format!("sample {j} = {v} falls outside the admissible range [{u_min}, {u_max}]"),
                ));
            }
        }
        Ok(ControlGrid { grid, u })
    }

    /// Constant control u(t) = value.
    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        let n = grid.n_points();
        ControlGrid { grid, u: vec![value; n] }
    }

    /// Piecewise-constant control: coefficient q applies on the q-th of
    /// `coeffs.len()` equal subintervals of the horizon.
    pub fn piecewise(grid: TimeGrid, coeffs: &[f64], u_min: f64, u_max: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::validation("coeffs", "need at least one control interval"));
        }
        let n = grid.n_points();
        let u = (0..n).map(|j| coeffs[interval_index(j, n, coeffs.len())]).collect();
        ControlGrid::new(grid, u, u_min, u_max)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Linear interpolation between samples; exact on the grid points.
    pub fn value_at(&self, t: f64) -> f64 {
        interp_on_grid(&self.grid, &self.u, t)
    }

    /// Mean of the samples assigned to each of `n_intervals` equal
    /// subintervals — the natural projection of a gridded control onto a
    /// piecewise-constant one.
    pub fn interval_means(&self, n_intervals: usize) -> Vec<f64> {
        let n = self.u.len();
        let mut sums = vec![0.0; n_intervals];
        let mut counts = vec![0usize; n_intervals];
        for (j, &v) in self.u.iter().enumerate() {
            let q = interval_index(j, n, n_intervals);
            sums[q] += v;
            counts[q] += 1;
        }
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }
}

/// Which of `n_intervals` equal subintervals grid point `j` of an
/// `n_points`-point grid belongs to (the right endpoint joins the last one).
pub(crate) fn interval_index(j: usize, n_points: usize, n_intervals: usize) -> usize {
    ((j * n_intervals) / (n_points - 1)).min(n_intervals - 1)
}

/// Linear interpolation of gridded samples at time t, clamped to the horizon;
/// exact (no interpolation) when t coincides with a grid point.
pub(crate) fn interp_on_grid(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    let n = values.len();
    debug_assert_eq!(n, grid.n_points());
    let fi = (t - grid.t0()) / (grid.tf() - grid.t0()) * (n - 1) as f64;
    if fi <= 0.0 {
        return values[0];
    }
    if fi >= (n - 1) as f64 {
        return values[n - 1];
    }
    let nearest = fi.round();
    if (fi - nearest).abs() < 1e-9 {
        return values[nearest as usize];
    }
    let i0 = fi.floor() as usize;
    let w = fi - i0 as f64;
    (1.0 - w) * values[i0] + w * values[i0 + 1]
}

/// Which solver produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Forward–backward sweep on the first-order optimality conditions.
    Indirect,
    /// Projected gradient over piecewise-constant control coefficients.
    Direct,
}

/// Everything a solver run produces.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: Method,
    /// Control on the solver grid, admissible by construction.
    pub control: ControlGrid,
    /// States under that control, in absolute counts (seven columns,
    /// vaccinated identically zero).
    pub states: Trajectory,
    /// Costates on the solver grid, in normalized units; indirect method only.
    pub adjoints: Option<Trajectory>,
    /// Objective value, in normalized units.
    pub cost: f64,
    /// Sweep iterations (indirect) or accepted gradient steps (direct).
    pub iterations: usize,
    pub converged: bool,
}

/// Controlled vector field in normalized coordinates.
pub fn rhs_controlled_normalized(x: &[f64; 6], u: f64, theta: f64, params: &EpiParams) -> [f64; 6] {
    let force = params.b * params.beta_mh * params.m * x[IM];
    let bite = params.b * params.beta_hm * x[I];
    [
        params.mu_h - (force + params.mu_h + u) * x[S] + theta * u * x[R],
        force * x[S] - (params.eta_h + params.mu_h) * x[I],
        params.eta_h * x[I] + u * x[S] - (theta * u + params.mu_h) * x[R],
        params.phi * (1.0 - x[A]) * (params.m / params.k) * (x[SM] + x[IM])
            - (params.eta_a + params.mu_a) * x[A],
        params.eta_a * (params.k / params.m) * x[A] - (bite + params.mu_m) * x[SM],
        bite * x[SM] - params.mu_m * x[IM],
    ]
}

/// Costate field paired with [s, i, r, a, sm, im]; equals −∂H/∂x.
pub fn adjoint_rhs(x: &[f64; 6], lam: &[f64; 6], u: f64, problem: &ControlProblem) -> [f64; 6] {
    let p = &problem.scenario.params;
    let theta = problem.theta;
    let force = p.b * p.beta_mh * p.m * x[IM];
    let recruit = p.phi * (1.0 - x[A]) * (p.m / p.k);
    [
        (lam[S] - lam[I]) * force + lam[S] * p.mu_h + (lam[S] - lam[R]) * u,
        -2.0 * problem.gamma_d * x[I] + lam[I] * (p.eta_h + p.mu_h) - lam[R] * p.eta_h
            + (lam[SM] - lam[IM]) * (p.b * p.beta_hm * x[SM]),
        -lam[S] * theta * u + lam[R] * (theta * u + p.mu_h),
        lam[A] * (p.phi * (p.m / p.k) * (x[SM] + x[IM]) + p.eta_a + p.mu_a)
            - lam[SM] * p.eta_a * (p.k / p.m),
        -lam[A] * recruit + (lam[SM] - lam[IM]) * (p.b * p.beta_hm * x[I]) + lam[SM] * p.mu_m,
        (lam[S] - lam[I]) * (p.b * p.beta_mh * p.m * x[S]) - lam[A] * recruit + lam[IM] * p.mu_m,
    ]
}

/// Pointwise Hamiltonian: running cost plus costate–velocity pairing.
pub fn hamiltonian(x: &[f64; 6], lam: &[f64; 6], u: f64, problem: &ControlProblem) -> f64 {
    let f = rhs_controlled_normalized(x, u, problem.theta, &problem.scenario.params);
    let mut h = problem.gamma_d * x[I] * x[I] + problem.gamma_v * u * u;
    for c in 0..6 {
        h += lam[c] * f[c];
    }
    h
}

/// ∂H/∂u at a point.
pub fn hamiltonian_control_gradient(x: &[f64; 6], lam: &[f64; 6], u: f64, problem: &ControlProblem) -> f64 {
    2.0 * problem.gamma_v * u - (lam[S] - lam[R]) * (x[S] - problem.theta * x[R])
}

/// Unconstrained stationary control at a point (the root of ∂H/∂u).
pub fn control_candidate(x: &[f64; 6], lam: &[f64; 6], problem: &ControlProblem) -> f64 {
    (lam[S] - lam[R]) * (x[S] - problem.theta * x[R]) / (2.0 * problem.gamma_v)
}

/// Pointwise minimizer of the Hamiltonian over the admissible range: the
/// stationary candidate clamped to [u_min, u_max].
pub fn project_control(x: &[f64; 6], lam: &[f64; 6], problem: &ControlProblem) -> f64 {
    control_candidate(x, lam, problem).clamp(problem.u_min, problem.u_max)
}

// Composite Simpson over an even interval count (g.len() odd).
fn simpson_even(g: &[f64], h: f64) -> f64 {
    let last = g.len() - 1;
    let mut acc = g[0] + g[last];
    for (j, &v) in g.iter().enumerate().take(last).skip(1) {
        acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Composite Simpson when the interval count is even; for odd counts, Simpson
/// over the first n−1 intervals plus a trapezoid on the last (a single
/// interval degenerates to a pure trapezoid).
fn integral_on_grid(g: &[f64], h: f64) -> f64 {
    let n = g.len() - 1;
    if n == 0 {
        0.0
    } else if n.is_multiple_of(2) {
        simpson_even(g, h)
    } else if n == 1 {
        0.5 * h * (g[0] + g[1])
    } else {
        simpson_even(&g[..n], h) + 0.5 * h * (g[n - 1] + g[n])
    }
}

// Shared by evaluate_cost and the direct method's raw objective loop.
pub(crate) fn cost_on_grid(u: &[f64], infected: &[f64], h: f64, gamma_d: f64, gamma_v: f64) -> f64 {
    let g: Vec<f64> = infected
        .iter()
        .zip(u)
        .map(|(&i, &v)| gamma_d * i * i + gamma_v * v * v)
        .collect();
    integral_on_grid(&g, h)
}

/// Objective value `∫ gamma_d·i² + gamma_v·u² dt` of a control against the
/// normalized infected series sampled on the same grid.
pub fn evaluate_cost(control: &ControlGrid, infected: &[f64], gamma_d: f64, gamma_v: f64) -> Result<f64> {
    if infected.len() != control.grid().n_points() {
        return Err(Error::GridMismatch(format!(
            "control has {} samples, infected series has {}",
            control.grid().n_points(),
            infected.len()
        )));
    }
    Ok(cost_on_grid(control.values(), infected, control.grid().step(), gamma_d, gamma_v))
}

/// RK4 forward pass of the normalized controlled dynamics under a gridded
/// control; the two interior stages see the midpoint-averaged control. No
/// positivity clamping — the solvers need the raw smooth field.
pub(crate) fn forward_controlled(
    x0: &[f64; 6],
    grid: &TimeGrid,
    u: &[f64],
    theta: f64,
    params: &EpiParams,
) -> Result<Trajectory> {
    if u.len() != grid.n_points() {
        return Err(Error::GridMismatch(format!(
            "control has {} samples, grid has {} points",
            u.len(),
            grid.n_points()
        )));
    }
    let n = grid.n_points();
    let mut traj = Trajectory::with_capacity(6, n);
    traj.push(grid.t0(), x0);
    let mut x = *x0;
    for j in 0..n - 1 {
        let h = grid.time(j + 1) - grid.time(j);
        let um = 0.5 * (u[j] + u[j + 1]);
        let k1 = rhs_controlled_normalized(&x, u[j], theta, params);
        let k2 = rhs_controlled_normalized(&stage(&x, 0.5 * h, &k1), um, theta, params);
        let k3 = rhs_controlled_normalized(&stage(&x, 0.5 * h, &k2), um, theta, params);
        let k4 = rhs_controlled_normalized(&stage(&x, h, &k3), u[j + 1], theta, params);
        for c in 0..6 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if let Some(component) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Integration { t: grid.time(j + 1), component });
        }
        traj.push(grid.time(j + 1), &x);
    }
    Ok(traj)
}

fn stage(x: &[f64; 6], a: f64, k: &[f64; 6]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for c in 0..6 {
        out[c] = x[c] + a * k[c];
    }
    out
}

/// Backward costate pass consistent with a stored forward trajectory and a
/// gridded control: λ(tf) = 0 exactly, RK4 downwards with the stored states
/// (and the control) interpolated at the half-step stages.
pub(crate) fn backward_adjoint(
    states: &Trajectory,
    grid: &TimeGrid,
    u: &[f64],
    problem: &ControlProblem,
) -> Result<Trajectory> {
    let rhs = |t: f64, lam: &[f64], ctx: &[f64], out: &mut [f64]| {
        let lam: &[f64; 6] = lam.try_into().expect("six costates");
        let x: &[f64; 6] = ctx.try_into().expect("six states");
        let u_t = interp_on_grid(grid, u, t);
        out.copy_from_slice(&adjoint_rhs(x, lam, u_t, problem));
    };
    integrate_backward(&rhs, grid, &[0.0; 6], states)
}

/// One policy's outcome in a side-by-side comparison.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    /// "optimal", "no_control", or "full_control".
    pub policy: &'static str,
    pub cost: f64,
    /// States in absolute counts.
    pub states: Trajectory,
    pub control: ControlGrid,
    /// Whether the solve behind this row converged (constant policies are
    /// exact by construction and always report true).
    pub converged: bool,
}

/// The optimal (indirect) policy next to the two constant extremes u ≡ 0 and
/// u ≡ 1, all integrated on the same grid and costed with the same weights.
pub fn compare_policies(problem: &ControlProblem, config: &SweepConfig) -> Result<Vec<PolicyRun>> {
    let optimal = solve_indirect(problem, config)?;
    let grid = optimal.control.grid().clone();
    let spec = problem.normalization();
    let x0 = spec.normalize_state(&problem.scenario.initial)?;

    let mut runs = vec![PolicyRun {
        policy: "optimal",
        cost: optimal.cost,
        states: optimal.states,
        control: optimal.control,
        converged: optimal.converged,
    }];
    for (policy, level) in [("no_control", 0.0), ("full_control", 1.0)] {
        let control = ControlGrid::constant(grid.clone(), level);
        let states =
            forward_controlled(&x0, &grid, control.values(), problem.theta, &problem.scenario.params)?;
        let cost = evaluate_cost(&control, &states.column(I), problem.gamma_d, problem.gamma_v)?;
        runs.push(PolicyRun {
            policy,
            cost,
            states: spec.denormalize_trajectory(&states)?,
            control,
            converged: true,
        });
    }
    Ok(runs)
}

/// Independent indirect solves across waning fractions, run in parallel;
/// results come back in input order.
pub fn efficacy_sweep(
    problem: &ControlProblem,
    thetas: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SolveReport>> {
    thetas
        .par_iter()
        .map(|&theta| {
            let mut per_theta = problem.clone();
            per_theta.theta = theta;
            solve_indirect(&per_theta, config)
        })
        .collect()
}
