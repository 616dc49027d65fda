//! Fixed-step and adaptive explicit Runge–Kutta integration over caller-supplied
//! vector fields. Fixed-step classical RK4 is the production path; the embedded
//! Dormand–Prince 4(5) pair exists for oracle cross-checks.

use crate::error::{Error, Result};

/// Uniform time grid with exact endpoints; points are generated by index
/// arithmetic, never by repeated addition.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n_points: usize,
}

impl TimeGrid {
    /// Grid with an explicit point count (n_points >= 2).
    pub fn new(t0: f64, tf: f64, n_points: usize) -> Result<Self> {
        if !(tf > t0) {
            return Err(Error::validation("tf", format!("tf = {tf} must exceed t0 = {t0}")));
        }
        if n_points < 2 {
            return Err(Error::validation("n_points", "grid needs at least 2 points"));
        }
        Ok(TimeGrid { t0, tf, n_points })
    }

    /// Grid whose spacing is as close as possible to `step` while keeping the
    /// endpoints exact (the effective step is (tf-t0)/(n-1)).
    pub fn from_step(t0: f64, tf: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::validation("step", format!("step = {step} must be positive")));
        }
        if !(tf > t0) {
            return Err(Error::validation("tf", format!("tf = {tf} must exceed t0 = {t0}")));
        }
        let intervals = ((tf - t0) / step).round().max(1.0) as usize;
        Ok(TimeGrid { t0, tf, n_points: intervals + 1 })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Effective uniform spacing.
    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / (self.n_points - 1) as f64
    }

    /// i-th grid time, exact at both endpoints.
    pub fn time(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        if i == 0 {
            self.t0
        } else if i == self.n_points - 1 {
            self.tf
        } else {
            self.t0 + (self.tf - self.t0) * i as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.time(i)).collect()
    }
}

/// What to do with negative components after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampPolicy {
    /// Leave states untouched (adjoint systems are legitimately signed).
    None,
    /// Snap components in (-tolerance, 0) to 0; error on anything more negative.
    SnapNegative { tolerance: f64 },
}

impl Default for ClampPolicy {
    /// Integration-noise threshold for generic O(1) states.
    fn default() -> Self {
        ClampPolicy::SnapNegative { tolerance: 1e-12 }
    }
}

/// Time series of states on a grid; row-major storage, one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(dim: usize, n_points: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(n_points),
            dim,
            data: Vec::with_capacity(dim * n_points),
        }
    }

    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.times.push(t);
        self.data.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.n_points() - 1)
    }

    pub fn value(&self, i: usize, component: usize) -> f64 {
        self.data[i * self.dim + component]
    }

    pub fn column(&self, component: usize) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.value(i, component)).collect()
    }

    pub(crate) fn same_grid(&self, grid: &TimeGrid) -> bool {
        self.n_points() == grid.n_points()
            && self
                .times
                .iter()
                .enumerate()
                .all(|(i, &t)| (t - grid.time(i)).abs() <= 1e-12 * grid.tf().abs().max(1.0))
    }
}

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    for (component, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Integration { t, component });
        }
    }
    Ok(())
}

fn apply_clamp(y: &mut [f64], t: f64, policy: ClampPolicy) -> Result<()> {
    if let ClampPolicy::SnapNegative { tolerance } = policy {
        for (component, v) in y.iter_mut().enumerate() {
            if *v < 0.0 {
                if -*v < tolerance {
                    *v = 0.0;
                } else {
                    return Err(Error::NegativeState {
                        t,
                        component,
                        value: *v,
                        tolerance,
                    });
                }
            }
        }
    }
    Ok(())
}

/// One classical RK4 step from (t, y) with step h (h may be negative).
pub fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y.len();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    rhs(t, y, &mut k1);
    check_finite(&k1, t)?;
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    check_finite(&k2, t + 0.5 * h)?;
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    check_finite(&k3, t + 0.5 * h)?;
    for i in 0..dim {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    check_finite(&k4, t + h)?;

    let mut out = vec![0.0; dim];
    for i in 0..dim {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_finite(&out, t + h)?;
    Ok(out)
}

/// Fixed-step RK4 over the grid; the trajectory is sampled exactly on the grid
/// points. Deterministic: identical inputs give bit-identical output.
pub fn integrate<F>(rhs: &F, grid: &TimeGrid, y0: &[f64], policy: ClampPolicy) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut traj = Trajectory::with_capacity(dim, grid.n_points());
    let mut y = y0.to_vec();
    apply_clamp(&mut y, grid.t0(), policy)?;
    traj.push(grid.t0(), &y);
    for i in 0..grid.n_points() - 1 {
        let t = grid.time(i);
        let h = grid.time(i + 1) - t;
        let mut next = rk4_step(rhs, t, &y, h)?;
        apply_clamp(&mut next, grid.time(i + 1), policy)?;
        traj.push(grid.time(i + 1), &next);
        y = next;
    }
    Ok(traj)
}

/// RK4 from the terminal condition at tf down to t0, for adjoint systems whose
/// right-hand side also depends on a stored forward trajectory. The forward
/// context is interpolated linearly when the backward stages need midpoints.
/// The returned trajectory is reordered to ascending time. No clamping is
/// applied (costates are legitimately signed).
pub fn integrate_backward<F>(
    rhs: &F,
    grid: &TimeGrid,
    y_tf: &[f64],
    forward_ctx: &Trajectory,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    if !forward_ctx.same_grid(grid) {
        return Err(Error::GridMismatch(format!(
            "forward context has {} points, grid has {}",
            forward_ctx.n_points(),
            grid.n_points()
        )));
    }
    let dim = y_tf.len();
    let cdim = forward_ctx.dim();
    let n = grid.n_points();

    let mut rows = vec![0.0; dim * n];
    rows[(n - 1) * dim..].copy_from_slice(y_tf);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut ctx_mid = vec![0.0; cdim];

    for j in (1..n).rev() {
        let t = grid.time(j);
        let h = grid.time(j - 1) - t; // negative
        let ctx_here = forward_ctx.state(j);
        let ctx_prev = forward_ctx.state(j - 1);
        for c in 0..cdim {
            ctx_mid[c] = 0.5 * (ctx_here[c] + ctx_prev[c]);
        }
        let lam: Vec<f64> = rows[j * dim..(j + 1) * dim].to_vec();

        rhs(t, &lam, ctx_here, &mut k1);
        check_finite(&k1, t)?;
        for i in 0..dim {
            tmp[i] = lam[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &ctx_mid, &mut k2);
        check_finite(&k2, t + 0.5 * h)?;
        for i in 0..dim {
            tmp[i] = lam[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &ctx_mid, &mut k3);
        check_finite(&k3, t + 0.5 * h)?;
        for i in 0..dim {
            tmp[i] = lam[i] + h * k3[i];
        }
        rhs(t + h, &tmp, ctx_prev, &mut k4);
        check_finite(&k4, t + h)?;

        for i in 0..dim {
            let v = lam[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            rows[(j - 1) * dim + i] = v;
        }
        check_finite(&rows[(j - 1) * dim..j * dim], t + h)?;
    }

    let mut traj = Trajectory::with_capacity(dim, n);
    for i in 0..n {
        traj.push(grid.time(i), &rows[i * dim..(i + 1) * dim]);
    }
    Ok(traj)
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Embedded Dormand–Prince 4(5) with dense (cubic Hermite) resampling onto the
/// requested grid. Oracle cross-check path only; RK4 is the production path.
pub fn integrate_adaptive<F>(
    rhs: &F,
    grid: &TimeGrid,
    y0: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let span = grid.tf() - grid.t0();
    let mut traj = Trajectory::with_capacity(dim, grid.n_points());
    traj.push(grid.t0(), y0);
    let mut next_out = 1; // grid.time(0) already emitted

    let mut t = grid.t0();
    let mut y = y0.to_vec();
    let mut h = span / 100.0;
    let mut k = vec![vec![0.0; dim]; 7];
    rhs(t, &y, &mut k[0]);
    check_finite(&k[0], t)?;
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut rejections = 0;

    while next_out < grid.n_points() {
        if t + h > grid.tf() {
            h = grid.tf() - t;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += DP_A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let ts = t + DP_C[s] * h;
            rhs(ts, &tmp, &mut k[s]);
            check_finite(&k[s], ts)?;
        }
        let mut err_norm_sq = 0.0;
        for i in 0..dim {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc5 += DP_B5[j] * kj[i];
                acc4 += DP_B4[j] * kj[i];
            }
            y5[i] = y[i] + h * acc5;
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            let e = h * (acc5 - acc4) / scale;
            err_norm_sq += e * e;
        }
        let err_norm = (err_norm_sq / dim as f64).sqrt();

        if err_norm <= 1.0 {
            // Accept: fill requested grid points inside (t, t+h] by cubic Hermite.
            let t_new = t + h;
            check_finite(&y5, t_new)?;
            let f0 = k[0].clone();
            rhs(t_new, &y5, &mut k[0]); // FSAL slot becomes k1 of the next step
            check_finite(&k[0], t_new)?;
            while next_out < grid.n_points() && grid.time(next_out) <= t_new + 1e-12 * span {
                let tg = grid.time(next_out);
                let th = ((tg - t) / h).clamp(0.0, 1.0);
                let h00 = 2.0 * th * th * th - 3.0 * th * th + 1.0;
                let h10 = th * th * th - 2.0 * th * th + th;
                let h01 = -2.0 * th * th * th + 3.0 * th * th;
                let h11 = th * th * th - th * th;
                for i in 0..dim {
                    tmp[i] = h00 * y[i] + h10 * h * f0[i] + h01 * y5[i] + h11 * h * k[0][i];
                }
                traj.push(tg, &tmp);
                next_out += 1;
            }
            t = t_new;
            y.copy_from_slice(&y5);
            rejections = 0;
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            rejections += 1;
            if rejections > 30 || h.abs() < 1e-14 * span {
                return Err(Error::StepFailure { t });
            }
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(traj)
}
