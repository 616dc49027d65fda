//! Scenario files (strict JSON with a preset shortcut), trajectory CSV
//! emission, and the run-summary document the command line prints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ControlGrid, ControlProblem, DirectConfig, Method, SweepConfig};
use crate::error::{Error, Result};
use crate::models::{preset_scenario, Compartment, Scenario, SysState, VaccineStrategy};
use crate::ode::Trajectory;
use crate::reproduction::{
    critical_mass_rate, critical_pediatric_coverage, peak, r0_baseline, r0_imperfect, r0_mass,
    r0_pediatric, r0_waning, Threshold,
};

fn schema_version_1() -> String {
    "1".to_string()
}

fn half() -> f64 {
    0.5
}

fn baseline_waning() -> f64 {
    0.05
}

fn unit_upper() -> f64 {
    1.0
}

/// A scenario document: either a preset name or an inline scenario, plus
/// optional control weights, solver settings, and output routing. Parsing is
/// strict — unknown keys are rejected everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "schema_version_1")]
    pub schema_version: String,
    /// Name of a built-in scenario; mutually exclusive with `scenario`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSettings>,
}

/// Cost weights and admissible range of the optimal-control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSettings {
    #[serde(default = "half")]
    pub gamma_d: f64,
    #[serde(default = "half")]
    pub gamma_v: f64,
    #[serde(default = "baseline_waning")]
    pub theta: f64,
    #[serde(default)]
    pub u_min: f64,
    #[serde(default = "unit_upper")]
    pub u_max: f64,
}

impl Default for ControlSettings {
    /// The reference configuration: equal unit-half weights, 5% waning,
    /// full admissible range.
    fn default() -> Self {
        ControlSettings { gamma_d: 0.5, gamma_v: 0.5, theta: 0.05, u_min: 0.0, u_max: 1.0 }
    }
}

fn grid_step() -> f64 {
    0.05
}

fn sweep_omega() -> f64 {
    0.5
}

fn sweep_tol() -> f64 {
    1e-6
}

fn sweep_max_iter() -> usize {
    2000
}

fn direct_intervals() -> usize {
    10
}

/// Numerical settings shared by simulation and the two control solvers;
/// omitted fields fall back to the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Integration step in days.
    #[serde(default = "grid_step")]
    pub step: f64,
    /// Forward–backward sweep relaxation weight.
    #[serde(default = "sweep_omega")]
    pub omega: f64,
    #[serde(default = "sweep_tol")]
    pub tol: f64,
    #[serde(default = "sweep_max_iter")]
    pub max_iter: usize,
    /// Piecewise-constant intervals for the direct method.
    #[serde(default = "direct_intervals")]
    pub n_intervals: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { step: 0.05, omega: 0.5, tol: 1e-6, max_iter: 2000, n_intervals: 10 }
    }
}

impl SolverSettings {
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig { omega: self.omega, tol: self.tol, max_iter: self.max_iter, step: self.step }
    }

    pub fn direct_config(&self) -> DirectConfig {
        DirectConfig { n_intervals: self.n_intervals, step: self.step, ..DirectConfig::default() }
    }
}

/// Where artifacts go when the file (rather than the command line) routes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Directory for CSV/JSON artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Basename stem; defaults to the scenario label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

impl ScenarioFile {
    /// A file that simply references a preset.
    pub fn from_preset(name: &str) -> Self {
        ScenarioFile {
            schema_version: schema_version_1(),
            preset: Some(name.to_string()),
            scenario: None,
            control: None,
            solver: None,
            output: None,
        }
    }

    /// First violated invariant. Checks the preset/scenario exclusivity, the
    /// inner scenario, and — when a control section is present — the
    /// assembled control problem.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != "1" {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {:?}; this build reads version \"1\"", self.schema_version),
            ));
        }
        match (&self.preset, &self.scenario) {
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    "preset",
                    "give either a preset name or an inline scenario, not both",
                ))
            }
            (None, None) => {
                return Err(Error::validation(
                    "scenario",
                    "the file must name a preset or spell out a scenario",
                ))
            }
            (Some(name), None) => {
                preset_scenario(name)?;
            }
            (None, Some(scenario)) => scenario.validate()?,
        }
        if let Some(solver) = &self.solver {
            solver.sweep_config().validate()?;
            solver.direct_config().validate()?;
        }
        if self.control.is_some() {
            self.control_problem()?;
        }
        Ok(())
    }

    /// The scenario this file denotes, with presets resolved.
    pub fn resolve_scenario(&self) -> Result<Scenario> {
        match (&self.preset, &self.scenario) {
            (Some(name), None) => preset_scenario(name),
            (None, Some(scenario)) => Ok(scenario.clone()),
            _ => Err(Error::validation(
                "scenario",
                "the file must name a preset or spell out a scenario (not both)",
            )),
        }
    }

    /// Control problem assembled from the resolved scenario and the control
    /// section (reference weights when the section is omitted).
    pub fn control_problem(&self) -> Result<ControlProblem> {
        let scenario = self.resolve_scenario()?;
        let c = self.control.clone().unwrap_or_default();
        let problem = ControlProblem {
            scenario,
            gamma_d: c.gamma_d,
            gamma_v: c.gamma_v,
            theta: c.theta,
            u_min: c.u_min,
            u_max: c.u_max,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        self.solver.clone().unwrap_or_default()
    }
}

/// Parse and fully validate a scenario document. Syntax errors keep serde's
/// line/column; validation errors name the offending field.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.validate()?;
    Ok(file)
}

/// Serialize a scenario document; `parse_scenario` of the output yields the
/// same values back.
pub fn scenario_to_json(file: &ScenarioFile) -> Result<String> {
    serde_json::to_string_pretty(file).map_err(|e| Error::Parse(e.to_string()))
}

/// Write a seven-column absolute-unit trajectory as CSV: header
/// `t,S_h,V_h,I_h,R_h,A_m,S_m,I_m`, one row per grid point, 17 significant
/// digits (lossless for f64), `\n` line endings. When a control signal is
/// supplied it is appended as a `u` column.
pub fn write_trajectory_csv(
    traj: &Trajectory,
    control: Option<&ControlGrid>,
    path: &Path,
) -> Result<()> {
    if traj.dim() != 7 {
        return Err(Error::validation(
            "trajectory",
            format!("CSV export expects 7 absolute-unit columns, got {}", traj.dim()),
        ));
    }
    if let Some(c) = control {
        if c.values().len() != traj.n_points() {
            return Err(Error::GridMismatch(format!(
                "control has {} samples, trajectory has {} points",
                c.values().len(),
                traj.n_points()
            )));
        }
    }
    let mut out = String::with_capacity(traj.n_points() * 200);
    out.push_str("t,S_h,V_h,I_h,R_h,A_m,S_m,I_m");
    if control.is_some() {
        out.push_str(",u");
    }
    out.push('\n');
    for i in 0..traj.n_points() {
        out.push_str(&format!("{:.16e}", traj.times()[i]));
        for v in traj.state(i) {
            out.push_str(&format!(",{v:.16e}"));
        }
        if let Some(c) = control {
            out.push_str(&format!(",{:.16e}", c.values()[i]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Highest point of a trajectory column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSummary {
    pub compartment: String,
    pub time: f64,
    pub value: f64,
}

/// One row of a policy/method cost table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEntry {
    pub policy: String,
    pub cost: f64,
}

/// Solver telemetry attached to control runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
}

/// The machine-readable result document: reproduction numbers and eradication
/// thresholds for the scenario, the infected-humans peak, the final state,
/// and — for control runs — the cost table and solver telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub r0: f64,
    /// Reproduction number under the scenario's static vaccination strategy;
    /// absent when no strategy is active.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0_effective: Option<f64>,
    pub critical_pediatric_coverage: Threshold,
    pub critical_mass_rate: Threshold,
    pub peak: PeakSummary,
    pub final_state: SysState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<CostEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
}

impl RunSummary {
    /// Summary of a plain simulation: reproduction numbers from the scenario,
    /// peak and final state from the trajectory.
    pub fn for_simulation(scenario: &Scenario, traj: &Trajectory) -> Result<RunSummary> {
        let params = &scenario.params;
        let r0 = r0_baseline(params)?;
        let r0_effective = match scenario.strategy {
            VaccineStrategy::NoVaccine => None,
            VaccineStrategy::Pediatric { p } => Some(r0_pediatric(params, p)?),
            VaccineStrategy::MassPerfect { psi } => Some(r0_mass(params, psi)?),
            VaccineStrategy::MassImperfect { psi, sigma } => Some(r0_imperfect(params, psi, sigma)?),
            VaccineStrategy::MassWaning { psi, .. } => Some(r0_waning(params, psi)?),
        };
        let (time, value) = peak(traj, Compartment::IH)?;
        let final_row: [f64; 7] = traj
            .final_state()
            .try_into()
            .map_err(|_| Error::validation("trajectory", "expected 7 absolute-unit columns"))?;
        let summary = RunSummary {
            label: scenario.label.clone(),
            r0,
            r0_effective,
            critical_pediatric_coverage: critical_pediatric_coverage(params)?,
            critical_mass_rate: critical_mass_rate(params)?,
            peak: PeakSummary {
                compartment: Compartment::IH.name().to_string(),
                time,
                value,
            },
            final_state: SysState::from_array(final_row),
            costs: None,
            solver: None,
        };
        summary.validate()?;
        Ok(summary)
    }

    /// Every numeric field must be finite.
    pub fn validate(&self) -> Result<()> {
        let mut numbers = vec![
            ("r0", self.r0),
            ("critical_pediatric_coverage", self.critical_pediatric_coverage.value),
            ("critical_mass_rate", self.critical_mass_rate.value),
            ("peak.time", self.peak.time),
            ("peak.value", self.peak.value),
        ];
        if let Some(r) = self.r0_effective {
            numbers.push(("r0_effective", r));
        }
        for (name, v) in numbers {
            if !v.is_finite() {
                return Err(Error::validation(name, format!("must be finite, got {v}")));
            }
        }
        for (name, v) in [
            ("final_state.S_h", self.final_state.s_h),
            ("final_state.V_h", self.final_state.v_h),
            ("final_state.I_h", self.final_state.i_h),
            ("final_state.R_h", self.final_state.r_h),
            ("final_state.A_m", self.final_state.a_m),
            ("final_state.S_m", self.final_state.s_m),
            ("final_state.I_m", self.final_state.i_m),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(name, format!("must be finite, got {v}")));
            }
        }
        if let Some(costs) = &self.costs {
            for entry in costs {
                if !entry.cost.is_finite() {
                    return Err(Error::validation(
                        "costs",
                        format!("cost for {:?} must be finite, got {}", entry.policy, entry.cost),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}
