//! Parameter set, 7-compartment state, the five host–vector vector fields,
//! the disease-free equilibrium, and the built-in scenario presets.
//!
//! Humans follow an SVIR structure (susceptible, vaccinated, infected,
//! recovered), mosquitoes an ASI structure (aquatic, susceptible, infected).
//! All simulation state is kept in absolute counts; normalization to [0,1]
//! happens only in the control module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, ClampPolicy, TimeGrid, Trajectory};

/// Biological and entomological rate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpiParams {
    /// Total human population.
    #[serde(rename = "N_h")]
    pub n_h: f64,
    /// Average daily bites per mosquito.
    #[serde(rename = "B")]
    pub b: f64,
    /// Transmission probability mosquito -> human, per bite.
    pub beta_mh: f64,
    /// Transmission probability human -> mosquito, per bite.
    pub beta_hm: f64,
    /// Human mortality rate (1/days).
    pub mu_h: f64,
    /// Human recovery rate (1/days); 1/eta_h is the viremic period.
    pub eta_h: f64,
    /// Adult mosquito mortality rate (1/days).
    pub mu_m: f64,
    /// Oviposition rate (eggs per day per adult).
    pub phi: f64,
    /// Aquatic-phase mortality rate (1/days).
    #[serde(rename = "mu_A")]
    pub mu_a: f64,
    /// Aquatic-to-adult maturation rate (1/days).
    #[serde(rename = "eta_A")]
    pub eta_a: f64,
    /// Adult mosquitoes per human.
    pub m: f64,
    /// Larval capacity per human.
    pub k: f64,
}

impl EpiParams {
    /// First violated invariant, by field name.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("N_h", self.n_h),
            ("B", self.b),
            ("mu_h", self.mu_h),
            ("eta_h", self.eta_h),
            ("mu_m", self.mu_m),
            ("phi", self.phi),
            ("mu_A", self.mu_a),
            ("eta_A", self.eta_a),
            ("m", self.m),
            ("k", self.k),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        // Transmission probabilities may be zero (no-transmission edge cases).
        for (name, v) in [("beta_mh", self.beta_mh), ("beta_hm", self.beta_hm)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::validation(name, format!("probability must lie in [0, 1], got {v}")));
            }
        }
        // Positive aquatic equilibrium requires phi*eta_A > (eta_A + mu_A)*mu_m.
        if self.phi * self.eta_a <= (self.eta_a + self.mu_a) * self.mu_m {
            return Err(Error::Viability);
        }
        Ok(())
    }

    /// Mosquito -> human force of infection per infected mosquito count.
    fn force_mh(&self, i_m: f64) -> f64 {
        self.b * self.beta_mh * i_m / self.n_h
    }

    /// Human -> mosquito force of infection per infected human count.
    fn force_hm(&self, i_h: f64) -> f64 {
        self.b * self.beta_hm * i_h / self.n_h
    }
}

/// The seven compartments, in absolute counts. Also used for derivative
/// vectors, whose components are legitimately signed (validation applies to
/// states, not derivatives).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SysState {
    #[serde(rename = "S_h")]
    pub s_h: f64,
    #[serde(rename = "V_h")]
    pub v_h: f64,
    #[serde(rename = "I_h")]
    pub i_h: f64,
    #[serde(rename = "R_h")]
    pub r_h: f64,
    #[serde(rename = "A_m")]
    pub a_m: f64,
    #[serde(rename = "S_m")]
    pub s_m: f64,
    #[serde(rename = "I_m")]
    pub i_m: f64,
}

impl SysState {
    pub fn as_array(&self) -> [f64; 7] {
        [self.s_h, self.v_h, self.i_h, self.r_h, self.a_m, self.s_m, self.i_m]
    }

    pub fn from_array(y: [f64; 7]) -> Self {
        SysState {
            s_h: y[0],
            v_h: y[1],
            i_h: y[2],
            r_h: y[3],
            a_m: y[4],
            s_m: y[5],
            i_m: y[6],
        }
    }

    /// State invariants against a parameter set: non-negativity, exact human
    /// total, larval capacity.
    pub fn validate(&self, params: &EpiParams) -> Result<()> {
        for (name, v) in self.named() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        let human_total = self.s_h + self.v_h + self.i_h + self.r_h;
        if (human_total - params.n_h).abs() > 1e-9 * params.n_h {
            return Err(Error::validation(
                "S_h+V_h+I_h+R_h",
                format!("human compartments sum to {human_total}, expected N_h = {}", params.n_h),
            ));
        }
        if self.a_m > params.k * params.n_h * (1.0 + 1e-12) {
            return Err(Error::validation(
                "A_m",
                format!("exceeds larval capacity k*N_h = {}", params.k * params.n_h),
            ));
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("S_h", self.s_h),
            ("V_h", self.v_h),
            ("I_h", self.i_h),
            ("R_h", self.r_h),
            ("A_m", self.a_m),
            ("S_m", self.s_m),
            ("I_m", self.i_m),
        ]
    }
}

/// Compartment selector for trajectory columns and summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compartment {
    SH,
    VH,
    IH,
    RH,
    AM,
    SM,
    IM,
}

impl Compartment {
    pub const ALL: [Compartment; 7] = [
        Compartment::SH,
        Compartment::VH,
        Compartment::IH,
        Compartment::RH,
        Compartment::AM,
        Compartment::SM,
        Compartment::IM,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Compartment::SH => "S_h",
            Compartment::VH => "V_h",
            Compartment::IH => "I_h",
            Compartment::RH => "R_h",
            Compartment::AM => "A_m",
            Compartment::SM => "S_m",
            Compartment::IM => "I_m",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Compartment::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCompartment(name.to_string()))
    }

    /// Column index in a 7-compartment trajectory.
    pub fn index(&self) -> usize {
        match self {
            Compartment::SH => 0,
            Compartment::VH => 1,
            Compartment::IH => 2,
            Compartment::RH => 3,
            Compartment::AM => 4,
            Compartment::SM => 5,
            Compartment::IM => 6,
        }
    }
}

/// Vaccination scheme and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VaccineStrategy {
    NoVaccine,
    /// Fraction p of newborns vaccinated.
    Pediatric { p: f64 },
    /// Continuous per-day vaccination rate psi applied to susceptibles,
    /// perfectly effective vaccine.
    MassPerfect { psi: f64 },
    /// Vaccinated individuals retain a fraction sigma of the susceptible
    /// infection risk (sigma = 0 perfect, sigma = 1 useless).
    MassImperfect { psi: f64, sigma: f64 },
    /// Vaccine-conferred immunity wanes back to susceptible at rate theta.
    MassWaning { psi: f64, theta: f64 },
}

impl VaccineStrategy {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::validation(name, format!("must lie in [0, 1], got {v}")));
            }
            Ok(())
        };
        match *self {
            VaccineStrategy::NoVaccine => Ok(()),
            VaccineStrategy::Pediatric { p } => unit("p", p),
            VaccineStrategy::MassPerfect { psi } => unit("psi", psi),
            VaccineStrategy::MassImperfect { psi, sigma } => {
                unit("psi", psi)?;
                unit("sigma", sigma)
            }
            VaccineStrategy::MassWaning { psi, theta } => {
                unit("psi", psi)?;
                if !(theta >= 0.0) || !theta.is_finite() {
                    return Err(Error::validation("theta", format!("must be >= 0, got {theta}")));
                }
                Ok(())
            }
        }
    }
}

/// A complete simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    pub params: EpiParams,
    pub initial: SysState,
    pub strategy: VaccineStrategy,
    /// Simulation horizon in days.
    pub horizon: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.validate(&self.params)?;
        self.strategy.validate()?;
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::validation("horizon", format!("must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

// Shared aquatic/adult mosquito rows (identical across all model variants).
fn mosquito_rows(y: &[f64; 7], params: &EpiParams, dy: &mut [f64; 7]) {
    let (a_m, s_m, i_m) = (y[4], y[5], y[6]);
    dy[4] = params.phi * (1.0 - a_m / (params.k * params.n_h)) * (s_m + i_m)
        - (params.eta_a + params.mu_a) * a_m;
    dy[5] = params.eta_a * a_m - params.force_hm(y[2]) * s_m - params.mu_m * s_m;
    dy[6] = params.force_hm(y[2]) * s_m - params.mu_m * i_m;
}

fn rhs_pediatric_arr(y: &[f64; 7], p: f64, params: &EpiParams) -> [f64; 7] {
    let mut dy = [0.0; 7];
    let force = params.force_mh(y[6]);
    dy[0] = (1.0 - p) * params.mu_h * params.n_h - force * y[0] - params.mu_h * y[0];
    dy[1] = p * params.mu_h * params.n_h - params.mu_h * y[1];
    dy[2] = force * y[0] - (params.eta_h + params.mu_h) * y[2];
    dy[3] = params.eta_h * y[2] - params.mu_h * y[3];
    mosquito_rows(y, params, &mut dy);
    dy
}

fn rhs_mass_perfect_arr(y: &[f64; 7], psi: f64, params: &EpiParams) -> [f64; 7] {
    let mut dy = [0.0; 7];
    let force = params.force_mh(y[6]);
    dy[0] = params.mu_h * params.n_h - force * y[0] - psi * y[0] - params.mu_h * y[0];
    dy[1] = psi * y[0] - params.mu_h * y[1];
    dy[2] = force * y[0] - (params.eta_h + params.mu_h) * y[2];
    dy[3] = params.eta_h * y[2] - params.mu_h * y[3];
    mosquito_rows(y, params, &mut dy);
    dy
}

fn rhs_mass_imperfect_arr(y: &[f64; 7], psi: f64, sigma: f64, params: &EpiParams) -> [f64; 7] {
    let mut dy = [0.0; 7];
    let force = params.force_mh(y[6]);
    dy[0] = params.mu_h * params.n_h - force * y[0] - psi * y[0] - params.mu_h * y[0];
    dy[1] = psi * y[0] - sigma * force * y[1] - params.mu_h * y[1];
    dy[2] = force * (y[0] + sigma * y[1]) - (params.eta_h + params.mu_h) * y[2];
    dy[3] = params.eta_h * y[2] - params.mu_h * y[3];
    mosquito_rows(y, params, &mut dy);
    dy
}

fn rhs_mass_waning_arr(y: &[f64; 7], psi: f64, theta: f64, params: &EpiParams) -> [f64; 7] {
    let mut dy = [0.0; 7];
    let force = params.force_mh(y[6]);
    dy[0] = params.mu_h * params.n_h - force * y[0] - psi * y[0] + theta * y[1] - params.mu_h * y[0];
    dy[1] = psi * y[0] - theta * y[1] - params.mu_h * y[1];
    dy[2] = force * y[0] - (params.eta_h + params.mu_h) * y[2];
    dy[3] = params.eta_h * y[2] - params.mu_h * y[3];
    mosquito_rows(y, params, &mut dy);
    dy
}

pub(crate) fn rhs_controlled_arr(y: &[f64; 7], u: f64, theta: f64, params: &EpiParams) -> [f64; 7] {
    let mut dy = [0.0; 7];
    let force = params.force_mh(y[6]);
    dy[0] = params.mu_h * params.n_h - force * y[0] - u * y[0] + theta * u * y[3] - params.mu_h * y[0];
    dy[1] = 0.0;
    dy[2] = force * y[0] - (params.eta_h + params.mu_h) * y[2];
    dy[3] = params.eta_h * y[2] + u * y[0] - theta * u * y[3] - params.mu_h * y[3];
    mosquito_rows(y, params, &mut dy);
    dy
}

/// Vector field with pediatric vaccination: a fraction p of newborns enters
/// the vaccinated class directly.
pub fn rhs_pediatric(s: &SysState, p: f64, params: &EpiParams) -> SysState {
    SysState::from_array(rhs_pediatric_arr(&s.as_array(), p, params))
}

/// Vector field with continuous mass vaccination at rate psi, perfect vaccine.
pub fn rhs_mass_perfect(s: &SysState, psi: f64, params: &EpiParams) -> SysState {
    SysState::from_array(rhs_mass_perfect_arr(&s.as_array(), psi, params))
}

/// Mass vaccination with an imperfect vaccine: vaccinated individuals are
/// infected at a fraction sigma of the susceptible rate.
pub fn rhs_mass_imperfect(s: &SysState, psi: f64, sigma: f64, params: &EpiParams) -> SysState {
    SysState::from_array(rhs_mass_imperfect_arr(&s.as_array(), psi, sigma, params))
}

/// Mass vaccination with waning immunity: vaccinated return to susceptible at
/// rate theta.
pub fn rhs_mass_waning(s: &SysState, psi: f64, theta: f64, params: &EpiParams) -> SysState {
    SysState::from_array(rhs_mass_waning_arr(&s.as_array(), psi, theta, params))
}

/// Six-state controlled field: vaccination effort u moves susceptibles into
/// the recovered/protected class, which wanes back at rate theta*u. The
/// vaccinated compartment must be identically zero here.
pub fn rhs_controlled(s: &SysState, u: f64, theta: f64, params: &EpiParams) -> Result<SysState> {
    if s.v_h != 0.0 {
        return Err(Error::validation(
            "V_h",
            format!("controlled model has no vaccinated compartment; got V_h = {}", s.v_h),
        ));
    }
    Ok(SysState::from_array(rhs_controlled_arr(&s.as_array(), u, theta, params)))
}

/// Disease-free equilibrium with pediatric coverage p.
pub fn disease_free_equilibrium(params: &EpiParams, p: f64) -> Result<SysState> {
    if params.phi * params.eta_a <= (params.eta_a + params.mu_a) * params.mu_m {
        return Err(Error::Viability);
    }
    let a_m = (1.0 - (params.eta_a + params.mu_a) * params.mu_m / (params.phi * params.eta_a))
        * params.k
        * params.n_h;
    Ok(SysState {
        s_h: (1.0 - p) * params.n_h,
        v_h: p * params.n_h,
        i_h: 0.0,
        r_h: 0.0,
        a_m,
        s_m: (params.eta_a / params.mu_m) * a_m,
        i_m: 0.0,
    })
}

/// Names accepted by [`preset_scenario`].
pub const PRESET_NAMES: [&str; 2] = ["epidemic", "endemic"];

/// Built-in scenario presets (epidemic and endemic transmission settings).
pub fn preset_scenario(name: &str) -> Result<Scenario> {
    let (b, beta) = match name {
        "epidemic" => (0.8, 0.375),
        "endemic" => (0.75, 0.21),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let params = EpiParams {
        n_h: 480_000.0,
        b,
        beta_mh: beta,
        beta_hm: beta,
        mu_h: 1.0 / (71.0 * 365.0),
        eta_h: 1.0 / 3.0,
        mu_m: 1.0 / 10.0,
        phi: 6.0,
        mu_a: 1.0 / 4.0,
        eta_a: 0.08,
        m: 3.0,
        k: 3.0,
    };
    let (s_h, r_h) = match name {
        "epidemic" => (479_990.0, 0.0),
        _ => (379_990.0, 100_000.0),
    };
    let initial = SysState {
        s_h,
        v_h: 0.0,
        i_h: 10.0,
        r_h,
        a_m: 1_440_000.0,
        s_m: 1_440_000.0,
        i_m: 0.0,
    };
    Ok(Scenario {
        label: name.to_string(),
        params,
        initial,
        strategy: VaccineStrategy::NoVaccine,
        horizon: 365.0,
    })
}

/// Integrate a scenario with fixed-step RK4. Negative undershoots below
/// 1e-9*N_h (integrator noise at person-count scale) are snapped to zero.
pub fn simulate(scenario: &Scenario, step: f64) -> Result<Trajectory> {
    scenario.validate()?;
    let grid = TimeGrid::from_step(0.0, scenario.horizon, step)?;
    let params = scenario.params;
    let strategy = scenario.strategy;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let arr: [f64; 7] = y.try_into().expect("7-compartment state");
        let d = match strategy {
            VaccineStrategy::NoVaccine => rhs_pediatric_arr(&arr, 0.0, &params),
            VaccineStrategy::Pediatric { p } => rhs_pediatric_arr(&arr, p, &params),
            VaccineStrategy::MassPerfect { psi } => rhs_mass_perfect_arr(&arr, psi, &params),
            VaccineStrategy::MassImperfect { psi, sigma } => {
                rhs_mass_imperfect_arr(&arr, psi, sigma, &params)
            }
            VaccineStrategy::MassWaning { psi, theta } => {
                rhs_mass_waning_arr(&arr, psi, theta, &params)
            }
        };
        dy.copy_from_slice(&d);
    };
    integrate(
        &rhs,
        &grid,
        &scenario.initial.as_array(),
        ClampPolicy::SnapNegative { tolerance: 1e-9 * scenario.params.n_h },
    )
}
