//! Command-line surface for the host–vector epidemic toolkit: simulate
//! scenarios, report reproduction numbers and eradication thresholds, sweep
//! vaccination parameters, solve the vaccination optimal-control problem, and
//! compare control policies.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use epivax_core::control::{
    compare_policies, efficacy_sweep, solve_direct, solve_indirect, SolveReport,
};
use epivax_core::io::{parse_scenario, write_trajectory_csv, RunSummary, ScenarioFile};
use epivax_core::models::{preset_scenario, simulate, Compartment, Scenario, VaccineStrategy, PRESET_NAMES};
use epivax_core::reproduction::{
    critical_mass_rate, critical_pediatric_coverage, peak, r0_baseline, r0_imperfect, r0_mass,
    r0_pediatric, r0_waning, Threshold,
};

#[derive(Parser)]
#[command(
    name = "epivax",
    about = "Host–vector epidemic simulation, reproduction-number analysis, and vaccination optimal control",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and print a run summary (optionally writing the trajectory as CSV)
    Simulate(SimulateArgs),
    /// Print the basic reproduction number, vaccination-adjusted variants, and eradication thresholds
    R0(R0Args),
    /// Simulate a scenario across a list of vaccination-parameter values and tabulate infected-humans peaks
    Sweep(SweepArgs),
    /// Solve the vaccination optimal-control problem (indirect sweep, direct transcription, or both)
    Optimize(OptimizeArgs),
    /// Cost table for the optimal policy next to the constant extremes u=0 and u=1
    Compare(CompareArgs),
    /// List the built-in scenario presets with their full parameter and initial-condition values
    Presets,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario: a JSON file path or a built-in preset name
    #[arg(long)]
    scenario: String,
    /// Write the trajectory CSV here (defaults to the file's output section, if any)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step in days (overrides the file's solver section)
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct R0Args {
    /// Scenario: a JSON file path or a built-in preset name
    #[arg(long)]
    scenario: String,
    /// Pediatric vaccination coverage in [0, 1]
    #[arg(long, conflicts_with_all = ["psi", "sigma", "theta"])]
    p: Option<f64>,
    /// Mass vaccination rate (per day)
    #[arg(long)]
    psi: Option<f64>,
    /// Infection factor of vaccinated individuals in [0, 1] (imperfect vaccine; requires --psi)
    #[arg(long, requires = "psi", conflicts_with = "theta")]
    sigma: Option<f64>,
    /// Waning rate (per day) of vaccine protection (requires --psi)
    #[arg(long, requires = "psi")]
    theta: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario: a JSON file path or a built-in preset name
    #[arg(long)]
    scenario: String,
    /// Which vaccination parameter to vary
    #[arg(long, value_enum)]
    vary: VaryParam,
    /// Comma-separated parameter values, e.g. 0,0.25,0.5
    #[arg(long)]
    values: String,
    /// Mass vaccination rate held fixed while sigma or theta varies
    #[arg(long, default_value_t = 0.85)]
    base_psi: f64,
    /// Residual infection risk held fixed while psi varies (switches the
    /// sweep from the perfect-vaccine model to the imperfect one)
    #[arg(long)]
    base_sigma: Option<f64>,
    /// Integration step in days (overrides the file's solver section)
    #[arg(long)]
    step: Option<f64>,
    /// Write the peak table here as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Scenario: a JSON file path or a built-in preset name
    #[arg(long)]
    scenario: String,
    /// Solution method
    #[arg(long, value_enum, required_unless_present = "thetas", conflicts_with = "thetas")]
    method: Option<MethodArg>,
    /// Comma-separated waning rates: solve the indirect problem once per value
    #[arg(long)]
    thetas: Option<String>,
    /// Directory for the CSV/JSON artifacts (defaults to the file's output section, then ".")
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Artifact basename (defaults to the file's output section, then the scenario label)
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario: a JSON file path or a built-in preset name
    #[arg(long)]
    scenario: String,
    /// Write the policy cost table here as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VaryParam {
    /// Pediatric coverage
    P,
    /// Mass vaccination rate
    Psi,
    /// Infection factor of vaccinated individuals (at the base mass rate)
    Sigma,
    /// Waning rate of vaccine protection (at the base mass rate)
    Theta,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Indirect,
    Direct,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("EPIVAX_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("EPIVAX_THREADS must be a positive integer, got {raw:?}"))?;
        if n == 0 {
            bail!("EPIVAX_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool from EPIVAX_THREADS")?;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::R0(args) => cmd_r0(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Presets => cmd_presets(),
    }
}

/// Read `source` as a scenario JSON file, or fall back to a preset name.
fn load_scenario_file(source: &str) -> anyhow::Result<ScenarioFile> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file `{source}`"))?;
        return parse_scenario(&text).with_context(|| format!("in scenario file `{source}`"));
    }
    if source.contains('/') || source.ends_with(".json") {
        bail!("scenario file `{source}` not found");
    }
    let file = ScenarioFile::from_preset(source);
    file.validate()
        .with_context(|| format!("`{source}` is neither a scenario file nor a built-in preset"))?;
    Ok(file)
}

fn parse_value_list(raw: &str, flag: &str) -> anyhow::Result<Vec<f64>> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{flag} entry {:?} is not a number", s.trim()))
        })
        .collect::<anyhow::Result<_>>()?;
    if values.is_empty() {
        bail!("{flag} needs at least one value");
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        bail!("{flag} entry {bad} is not finite");
    }
    Ok(values)
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let file = load_scenario_file(&args.scenario)?;
    let scenario = file.resolve_scenario()?;
    let step = args.step.unwrap_or_else(|| file.solver_settings().step);
    let traj = simulate(&scenario, step)?;
    let out = args.out.or_else(|| {
        file.output.as_ref().map(|o| {
            let dir = o.out_dir.clone().unwrap_or_else(|| ".".into());
            let stem = o.stem.clone().unwrap_or_else(|| scenario.label.clone());
            Path::new(&dir).join(format!("{stem}.csv"))
        })
    });
    if let Some(path) = out {
        ensure_parent_dir(&path)?;
        write_trajectory_csv(&traj, None, &path)?;
    }
    let summary = RunSummary::for_simulation(&scenario, &traj)?;
    println!("{}", summary.to_json()?);
    Ok(())
}

#[derive(Serialize)]
struct R0Report {
    label: String,
    r0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r0_effective: Option<f64>,
    critical_pediatric_coverage: Threshold,
    critical_mass_rate: Threshold,
}

fn cmd_r0(args: R0Args) -> anyhow::Result<()> {
    let file = load_scenario_file(&args.scenario)?;
    let scenario = file.resolve_scenario()?;
    let params = &scenario.params;
    let r0_effective = match (args.p, args.psi, args.sigma, args.theta) {
        (Some(p), None, ..) => Some(r0_pediatric(params, p)?),
        (None, Some(psi), None, None) => Some(r0_mass(params, psi)?),
        (None, Some(psi), Some(sigma), None) => Some(r0_imperfect(params, psi, sigma)?),
        (None, Some(psi), None, Some(_)) => Some(r0_waning(params, psi)?),
        _ => match scenario.strategy {
            VaccineStrategy::NoVaccine => None,
            VaccineStrategy::Pediatric { p } => Some(r0_pediatric(params, p)?),
            VaccineStrategy::MassPerfect { psi } => Some(r0_mass(params, psi)?),
            VaccineStrategy::MassImperfect { psi, sigma } => Some(r0_imperfect(params, psi, sigma)?),
            VaccineStrategy::MassWaning { psi, .. } => Some(r0_waning(params, psi)?),
        },
    };
    print_json(&R0Report {
        label: scenario.label.clone(),
        r0: r0_baseline(params)?,
        r0_effective,
        critical_pediatric_coverage: critical_pediatric_coverage(params)?,
        critical_mass_rate: critical_mass_rate(params)?,
    })
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    peak_time: f64,
    peak_value: f64,
}

#[derive(Serialize)]
struct SweepTable {
    label: String,
    vary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_sigma: Option<f64>,
    compartment: String,
    rows: Vec<SweepRow>,
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    use rayon::prelude::*;

    let file = load_scenario_file(&args.scenario)?;
    let scenario = file.resolve_scenario()?;
    let step = args.step.unwrap_or_else(|| file.solver_settings().step);
    let values = parse_value_list(&args.values, "--values")?;

    let (vary_name, uses_base) = match args.vary {
        VaryParam::P => ("p", false),
        VaryParam::Psi => ("psi", false),
        VaryParam::Sigma => ("sigma", true),
        VaryParam::Theta => ("theta", true),
    };
    if args.base_sigma.is_some() && !matches!(args.vary, VaryParam::Psi) {
        anyhow::bail!("--base-sigma only applies when varying psi");
    }
    let strategy_for = |v: f64| match (args.vary, args.base_sigma) {
        (VaryParam::P, _) => VaccineStrategy::Pediatric { p: v },
        (VaryParam::Psi, None) => VaccineStrategy::MassPerfect { psi: v },
        (VaryParam::Psi, Some(sigma)) => VaccineStrategy::MassImperfect { psi: v, sigma },
        (VaryParam::Sigma, _) => VaccineStrategy::MassImperfect { psi: args.base_psi, sigma: v },
        (VaryParam::Theta, _) => VaccineStrategy::MassWaning { psi: args.base_psi, theta: v },
    };

    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&v| -> epivax_core::Result<SweepRow> {
            let mut member = scenario.clone();
            member.strategy = strategy_for(v);
            let traj = simulate(&member, step)?;
            let (peak_time, peak_value) = peak(&traj, Compartment::IH)?;
            Ok(SweepRow { value: v, peak_time, peak_value })
        })
        .collect::<epivax_core::Result<_>>()?;

    if let Some(path) = &args.out {
        ensure_parent_dir(path)?;
        let mut csv = String::from("value,peak_time,peak_I_h\n");
        for row in &rows {
            csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", row.value, row.peak_time, row.peak_value));
        }
        fs::write(path, csv).with_context(|| format!("writing `{}`", path.display()))?;
    }

    print_json(&SweepTable {
        label: scenario.label.clone(),
        vary: vary_name.to_string(),
        base_psi: uses_base.then_some(args.base_psi),
        base_sigma: args.base_sigma,
        compartment: Compartment::IH.name().to_string(),
        rows,
    })
}

#[derive(Serialize)]
struct MethodSummary {
    method: String,
    cost: f64,
    iterations: usize,
    converged: bool,
    peak_value: f64,
    peak_time: f64,
    csv: String,
}

fn method_summary(report: &SolveReport, method: &str, csv: &Path) -> anyhow::Result<MethodSummary> {
    let (peak_time, peak_value) = peak(&report.states, Compartment::IH)?;
    Ok(MethodSummary {
        method: method.to_string(),
        cost: report.cost,
        iterations: report.iterations,
        converged: report.converged,
        peak_value,
        peak_time,
        csv: csv.display().to_string(),
    })
}

fn ensure_converged(report: &SolveReport, what: &str) -> anyhow::Result<()> {
    if !report.converged {
        bail!(
            "the {what} solver stopped after {} iterations without converging; \
             adjust the solver section (a smaller relaxation `omega` usually helps)",
            report.iterations
        );
    }
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs) -> anyhow::Result<()> {
    let file = load_scenario_file(&args.scenario)?;
    let problem = file.control_problem()?;
    let settings = file.solver_settings();
    let out_dir = args
        .out_dir
        .or_else(|| file.output.as_ref().and_then(|o| o.out_dir.clone().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = args
        .stem
        .or_else(|| file.output.as_ref().and_then(|o| o.stem.clone()))
        .unwrap_or_else(|| problem.scenario.label.clone());
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory `{}`", out_dir.display()))?;

    if let Some(raw) = &args.thetas {
        let thetas = parse_value_list(raw, "--thetas")?;
        let reports = efficacy_sweep(&problem, &thetas, &settings.sweep_config())?;
        for report in &reports {
            ensure_converged(report, "forward-backward sweep")?;
        }
        #[derive(Serialize)]
        struct EfficacyRow {
            theta: f64,
            cost: f64,
            iterations: usize,
            converged: bool,
            peak_value: f64,
            peak_time: f64,
            csv: String,
        }
        let mut table = Vec::new();
        for (theta, report) in thetas.iter().zip(&reports) {
            let csv = out_dir.join(format!("{stem}_theta_{theta}.csv"));
            write_trajectory_csv(&report.states, Some(&report.control), &csv)?;
            let (peak_time, peak_value) = peak(&report.states, Compartment::IH)?;
            table.push(EfficacyRow {
                theta: *theta,
                cost: report.cost,
                iterations: report.iterations,
                converged: report.converged,
                peak_value,
                peak_time,
                csv: csv.display().to_string(),
            });
        }
        let json_path = out_dir.join(format!("{stem}_efficacy.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&table)?)
            .with_context(|| format!("writing `{}`", json_path.display()))?;
        return print_json(&table);
    }

    let method = args.method.expect("clap enforces --method unless --thetas is present");
    let mut summaries = Vec::new();
    if matches!(method, MethodArg::Indirect | MethodArg::Both) {
        let report = solve_indirect(&problem, &settings.sweep_config())?;
        ensure_converged(&report, "forward-backward sweep")?;
        let csv = out_dir.join(format!("{stem}_indirect.csv"));
        write_trajectory_csv(&report.states, Some(&report.control), &csv)?;
        summaries.push(method_summary(&report, "indirect", &csv)?);
    }
    if matches!(method, MethodArg::Direct | MethodArg::Both) {
        let report = solve_direct(&problem, &settings.direct_config())?;
        ensure_converged(&report, "direct")?;
        let csv = out_dir.join(format!("{stem}_direct.csv"));
        write_trajectory_csv(&report.states, Some(&report.control), &csv)?;
        summaries.push(method_summary(&report, "direct", &csv)?);
    }
    let json_path = out_dir.join(format!("{stem}_optimize.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&summaries)?)
        .with_context(|| format!("writing `{}`", json_path.display()))?;
    print_json(&summaries)
}

#[derive(Serialize)]
struct PolicyRow {
    policy: String,
    cost: f64,
    peak_value: f64,
    peak_time: f64,
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<()> {
    let file = load_scenario_file(&args.scenario)?;
    let problem = file.control_problem()?;
    let runs = compare_policies(&problem, &file.solver_settings().sweep_config())?;
    if let Some(optimal) = runs.iter().find(|r| r.policy == "optimal") {
        if !optimal.converged {
            bail!(
                "the forward-backward sweep behind the optimal policy did not converge; \
                 adjust the solver section (a smaller relaxation `omega` usually helps)"
            );
        }
    }
    let mut rows = Vec::new();
    for run in &runs {
        let (peak_time, peak_value) = peak(&run.states, Compartment::IH)?;
        rows.push(PolicyRow { policy: run.policy.to_string(), cost: run.cost, peak_value, peak_time });
    }
    if let Some(path) = &args.out {
        ensure_parent_dir(path)?;
        let mut csv = String::from("policy,cost,peak_I_h\n");
        for row in &rows {
            csv.push_str(&format!("{},{:.16e},{:.16e}\n", row.policy, row.cost, row.peak_value));
        }
        fs::write(path, csv).with_context(|| format!("writing `{}`", path.display()))?;
    }
    print_json(&rows)
}

fn cmd_presets() -> anyhow::Result<()> {
    let mut map = serde_json::Map::new();
    for name in PRESET_NAMES {
        let scenario: Scenario = preset_scenario(name)?;
        map.insert(name.to_string(), serde_json::to_value(scenario)?);
    }
    print_json(&serde_json::Value::Object(map))
}

fn ensure_parent_dir(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory `{}`", parent.display()))?;
        }
    }
    Ok(())
}
