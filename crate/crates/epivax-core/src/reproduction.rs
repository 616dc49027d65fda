//! Closed-form basic-reproduction-number family, eradication thresholds, and
//! trajectory summary statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{Compartment, EpiParams};
use crate::ode::Trajectory;

/// Basic reproduction number of the no-vaccine model:
/// R0 = sqrt( k*B^2*beta_hm*beta_mh*(phi*eta_A - eta_A*mu_m - mu_A*mu_m)
///            / (phi*(eta_h + mu_h)*mu_m^2) ).
pub fn r0_baseline(params: &EpiParams) -> Result<f64> {
    let recruitment_margin =
        -params.eta_a * params.mu_m - params.mu_a * params.mu_m + params.phi * params.eta_a;
    let radicand = params.k * params.b * params.b * params.beta_hm * params.beta_mh
        * recruitment_margin
        / (params.phi * (params.eta_h + params.mu_h) * params.mu_m * params.mu_m);
    if radicand < 0.0 {
        return Err(Error::Viability);
    }
    Ok(radicand.sqrt())
}

/// Reproduction number under pediatric coverage p: (1-p)*R0.
pub fn r0_pediatric(params: &EpiParams, p: f64) -> Result<f64> {
    Ok((1.0 - p) * r0_baseline(params)?)
}

/// Reproduction number under continuous mass vaccination at rate psi:
/// R0 * mu_h / (mu_h + psi).
pub fn r0_mass(params: &EpiParams, psi: f64) -> Result<f64> {
    Ok(r0_baseline(params)? * params.mu_h / (params.mu_h + psi))
}

/// Reproduction number with an imperfect vaccine: (1 + sigma*psi) * r0_mass.
pub fn r0_imperfect(params: &EpiParams, psi: f64, sigma: f64) -> Result<f64> {
    Ok((1.0 + sigma * psi) * r0_mass(params, psi)?)
}

/// Reproduction number with waning immunity; identical to r0_mass (waning
/// does not change the linearization at the disease-free equilibrium).
pub fn r0_waning(params: &EpiParams, psi: f64) -> Result<f64> {
    r0_mass(params, psi)
}

/// Eradication threshold with a subcritical sentinel: when R0 <= 1 the
/// threshold is 0 and `already_subcritical` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    pub already_subcritical: bool,
}

/// Critical pediatric coverage p_c = 1 - 1/R0 (clamped to [0, 1]).
pub fn critical_pediatric_coverage(params: &EpiParams) -> Result<Threshold> {
    let r0 = r0_baseline(params)?;
    if r0 <= 1.0 {
        return Ok(Threshold { value: 0.0, already_subcritical: true });
    }
    Ok(Threshold {
        value: (1.0 - 1.0 / r0).clamp(0.0, 1.0),
        already_subcritical: false,
    })
}

/// Critical mass-vaccination rate psi_c = (R0 - 1)*mu_h.
pub fn critical_mass_rate(params: &EpiParams) -> Result<Threshold> {
    let r0 = r0_baseline(params)?;
    if r0 <= 1.0 {
        return Ok(Threshold { value: 0.0, already_subcritical: true });
    }
    Ok(Threshold {
        value: (r0 - 1.0) * params.mu_h,
        already_subcritical: false,
    })
}

/// First global maximum of a compartment; ties broken by earliest time.
pub fn peak(trajectory: &Trajectory, compartment: Compartment) -> Result<(f64, f64)> {
    if trajectory.n_points() == 0 {
        return Err(Error::validation("trajectory", "empty trajectory has no peak"));
    }
    let c = compartment.index();
    let mut best_i = 0;
    let mut best_v = trajectory.value(0, c);
    for i in 1..trajectory.n_points() {
        let v = trajectory.value(i, c);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    Ok((trajectory.times()[best_i], best_v))
}

/// Peak of a named compartment (lookup errors on unknown names).
pub fn peak_by_name(trajectory: &Trajectory, name: &str) -> Result<(f64, f64)> {
    peak(trajectory, Compartment::from_name(name)?)
}
