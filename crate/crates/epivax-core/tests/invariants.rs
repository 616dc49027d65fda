//! Property-based invariants: conservation and positivity of the dynamics,
//! ordering of the reproduction-number family, quadrature exactness, control
//! admissibility, integrator symmetry, and lossless serialization round-trips.

use std::fs;

use proptest::prelude::*;
use tempfile::tempdir;

use epivax_core::control::{evaluate_cost, ControlGrid};
use epivax_core::io::{
    parse_scenario, scenario_to_json, write_trajectory_csv, ControlSettings, OutputSettings,
    ScenarioFile, SolverSettings,
};
use epivax_core::models::{
    preset_scenario, rhs_mass_imperfect, rhs_mass_perfect, rhs_mass_waning, rhs_pediatric,
    simulate, Compartment, EpiParams, Scenario, SysState, VaccineStrategy,
};
use epivax_core::ode::{integrate, integrate_backward, ClampPolicy, TimeGrid, Trajectory};
use epivax_core::reproduction::{
    critical_mass_rate, critical_pediatric_coverage, peak, r0_baseline, r0_imperfect, r0_mass,
    r0_pediatric, r0_waning,
};

/// Relative closeness with an absolute floor of 1, suitable for values whose
/// natural scale is unknown a priori.
fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// One of the two bundled parameter sets, selected by a boolean.
fn preset_params(endemic: bool) -> EpiParams {
    let name = if endemic { "endemic" } else { "epidemic" };
    preset_scenario(name).expect("bundled preset").params
}

/// Any vaccination strategy with parameters inside the validated ranges.
fn strategy_any() -> impl Strategy<Value = VaccineStrategy> {
    prop_oneof![
        Just(VaccineStrategy::NoVaccine),
        (0.0..=1.0f64).prop_map(|p| VaccineStrategy::Pediatric { p }),
        (0.0..=1.0f64).prop_map(|psi| VaccineStrategy::MassPerfect { psi }),
        (0.0..=1.0f64, 0.0..=1.0f64)
            .prop_map(|(psi, sigma)| VaccineStrategy::MassImperfect { psi, sigma }),
        (0.0..=1.0f64, 0.0..=1.0f64)
            .prop_map(|(psi, theta)| VaccineStrategy::MassWaning { psi, theta }),
    ]
}

/// Human compartment weights: each either exactly zero or bounded away from
/// zero, so empty compartments are exercised without degenerate totals.
fn human_weights() -> impl Strategy<Value = [f64; 4]> {
    let w = || prop_oneof![Just(0.0f64), 0.01..=1.0f64];
    [w(), w(), w(), w()].prop_filter("at least one compartment must be populated", |w| {
        w.iter().sum::<f64>() > 1e-6
    })
}

/// A fully valid initial state for the given parameters: humans distributed
/// by weight so they sum to the fixed population, aquatic stock below the
/// larval capacity, adult pools below the per-human density bound.
fn initial_from_fractions(
    params: &EpiParams,
    w: [f64; 4],
    a_frac: f64,
    sm_frac: f64,
    im_frac: f64,
) -> SysState {
    let total: f64 = w.iter().sum();
    SysState {
        s_h: w[0] / total * params.n_h,
        v_h: w[1] / total * params.n_h,
        i_h: w[2] / total * params.n_h,
        r_h: w[3] / total * params.n_h,
        a_m: a_frac * params.k * params.n_h,
        s_m: sm_frac * params.m * params.n_h,
        i_m: im_frac * params.m * params.n_h,
    }
}

/// Epidemiologically plausible random parameters that satisfy the mosquito
/// viability condition phi*eta_A > (eta_A + mu_A)*mu_m.
fn viable_params() -> impl Strategy<Value = EpiParams> {
    (
        (1e3..=1e6f64, 0.1..=1.0f64, 0.01..=1.0f64, 0.01..=1.0f64, 1e-5..=1e-3f64, 0.05..=1.0f64),
        (0.02..=0.5f64, 0.5..=10.0f64, 0.05..=1.0f64, 0.01..=0.5f64, 0.5..=5.0f64, 0.5..=5.0f64),
    )
        .prop_map(
            |(
                (n_h, b, beta_mh, beta_hm, mu_h, eta_h),
                (mu_m, phi, mu_a, eta_a, m, k),
            )| EpiParams {
                n_h,
                b,
                beta_mh,
                beta_hm,
                mu_h,
                eta_h,
                mu_m,
                phi,
                mu_a,
                eta_a,
                m,
                k,
            },
        )
        .prop_filter("mosquito population must be viable", |p| {
            p.phi * p.eta_a > (p.eta_a + p.mu_a) * p.mu_m
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whatever the strategy and the (valid) initial condition, the human
    /// population stays constant, no compartment goes negative, and the
    /// aquatic stock respects the larval capacity up to discretization slack.
    #[test]
    fn simulation_conserves_humans_and_stays_in_bounds(
        endemic in any::<bool>(),
        strategy in strategy_any(),
        w in human_weights(),
        a_frac in 0.0..=0.9f64,
        sm_frac in 0.0..=1.0f64,
        im_frac in 0.0..=1.0f64,
        horizon in 10.0..=120.0f64,
    ) {
        let params = preset_params(endemic);
        let scenario = Scenario {
            label: "prop".to_string(),
            initial: initial_from_fractions(&params, w, a_frac, sm_frac, im_frac),
            params,
            strategy,
            horizon,
        };
        scenario.validate().expect("constructed scenario must be valid");
        let traj = simulate(&scenario, 0.1).expect("simulation must succeed");

        let n_h = scenario.params.n_h;
        let cap = scenario.params.k * n_h;
        for j in 0..traj.n_points() {
            let row = traj.state(j);
            let humans = row[0] + row[1] + row[2] + row[3];
            prop_assert!(
                (humans - n_h).abs() <= 1e-6 * n_h,
                "human drift {} at sample {j}", (humans - n_h).abs()
            );
            for (c, &v) in row.iter().enumerate() {
                prop_assert!(v >= 0.0, "component {c} = {v} negative at sample {j}");
            }
            prop_assert!(
                row[4] <= cap * (1.0 + 1e-4),
                "aquatic stock {} exceeds capacity {cap} at sample {j}", row[4]
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Setting the extra parameter of a richer model to zero collapses its
    /// vector field onto the simpler one, componentwise.
    #[test]
    fn degenerate_strategies_collapse_to_simpler_fields(
        endemic in any::<bool>(),
        state in prop::array::uniform7(0.0..=1e6f64),
        psi in 0.0..=1.0f64,
    ) {
        let params = preset_params(endemic);
        let s = SysState::from_array(state);

        let unvaccinated = rhs_pediatric(&s, 0.0, &params).as_array();
        let mass_off = rhs_mass_perfect(&s, 0.0, &params).as_array();
        let perfect = rhs_mass_perfect(&s, psi, &params).as_array();
        let imperfect_tight = rhs_mass_imperfect(&s, psi, 0.0, &params).as_array();
        let waning_frozen = rhs_mass_waning(&s, psi, 0.0, &params).as_array();

        for c in 0..7 {
            prop_assert!(
                close(unvaccinated[c], mass_off[c], 1e-12),
                "pediatric p=0 vs mass psi=0 differ in component {c}: {} vs {}",
                unvaccinated[c], mass_off[c]
            );
            prop_assert!(
                close(imperfect_tight[c], perfect[c], 1e-12),
                "imperfect sigma=0 vs perfect differ in component {c}: {} vs {}",
                imperfect_tight[c], perfect[c]
            );
            prop_assert!(
                close(waning_frozen[c], perfect[c], 1e-12),
                "waning theta=0 vs perfect differ in component {c}: {} vs {}",
                waning_frozen[c], perfect[c]
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Every vaccination mode can only lower the reproduction number, mass
    /// vaccination lowers it monotonically in the rate, an imperfect vaccine
    /// lies between the perfect one and no vaccine, waning immunity does not
    /// move the threshold, and both critical values are exact roots of R = 1.
    #[test]
    fn reproduction_family_is_ordered_and_thresholds_are_roots(
        params in viable_params(),
        p in 0.0..=1.0f64,
        psi_a in 0.0..=1.0f64,
        psi_b in 0.0..=1.0f64,
        sigma in 0.0..=1.0f64,
    ) {
        let r0 = r0_baseline(&params).unwrap();
        prop_assert!(r0.is_finite() && r0 >= 0.0);

        let slack = 1.0 + 1e-12;
        prop_assert!(r0_pediatric(&params, p).unwrap() <= r0 * slack);
        prop_assert!(r0_pediatric(&params, p).unwrap() >= 0.0);

        let (lo, hi) = if psi_a <= psi_b { (psi_a, psi_b) } else { (psi_b, psi_a) };
        let r_lo = r0_mass(&params, lo).unwrap();
        let r_hi = r0_mass(&params, hi).unwrap();
        prop_assert!(r_lo <= r0 * slack, "mass vaccination must not raise R: {r_lo} vs {r0}");
        prop_assert!(r_hi <= r_lo * slack, "R must fall as the rate grows: {r_hi} vs {r_lo}");

        let r_imp = r0_imperfect(&params, lo, sigma).unwrap();
        prop_assert!(r_imp >= r_lo / slack, "leaky vaccine cannot beat a perfect one");
        prop_assert!(r_imp <= r0 * slack, "leaky vaccine still cannot exceed no vaccine");
        prop_assert_eq!(
            r0_waning(&params, lo).unwrap().to_bits(),
            r_lo.to_bits(),
            "waning immunity must not change the threshold quantity"
        );

        if r0 > 1.0 + 1e-9 {
            let ped = critical_pediatric_coverage(&params).unwrap();
            prop_assert!(!ped.already_subcritical);
            prop_assert!((0.0..=1.0).contains(&ped.value));
            prop_assert!(
                (r0_pediatric(&params, ped.value).unwrap() - 1.0).abs() <= 1e-9,
                "critical coverage must solve R = 1"
            );
            let mass = critical_mass_rate(&params).unwrap();
            prop_assert!(!mass.already_subcritical);
            prop_assert!(mass.value >= 0.0);
            prop_assert!(
                (r0_mass(&params, mass.value).unwrap() - 1.0).abs() <= 1e-9,
                "critical rate must solve R = 1"
            );
        } else if r0 < 1.0 - 1e-9 {
            prop_assert!(critical_pediatric_coverage(&params).unwrap().already_subcritical);
            prop_assert!(critical_mass_rate(&params).unwrap().already_subcritical);
            prop_assert_eq!(critical_pediatric_coverage(&params).unwrap().value, 0.0);
            prop_assert_eq!(critical_mass_rate(&params).unwrap().value, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The cost quadrature is exact (up to rounding) for integrands that are
    /// quadratic in time, which pins the rule's order on an even number of
    /// intervals.
    #[test]
    fn cost_quadrature_is_exact_on_quadratic_integrands(
        half_intervals in 1usize..=200,
        tf in 0.5..=400.0f64,
        a in -3.0..=3.0f64,
        b_scaled in -1.0..=1.0f64,
        c in 0.1..=0.9f64,
        d_scaled in -1.0..=1.0f64,
        gamma_d in 0.01..=5.0f64,
        gamma_v in 0.01..=5.0f64,
    ) {
        let n_points = 2 * half_intervals + 1;
        let grid = TimeGrid::new(0.0, tf, n_points).unwrap();
        let b = b_scaled / tf;
        let d = d_scaled * (c.min(1.0 - c)) / tf;

        let times = grid.times();
        let infected: Vec<f64> = times.iter().map(|&t| a + b * t).collect();
        let u_values: Vec<f64> = times.iter().map(|&t| c + d * t).collect();
        let control = ControlGrid::new(grid, u_values, 0.0, 1.0).unwrap();

        let numeric = evaluate_cost(&control, &infected, gamma_d, gamma_v).unwrap();
        let sq = |p: f64, q: f64| p * p * tf + p * q * tf * tf + q * q * tf * tf * tf / 3.0;
        let exact = gamma_d * sq(a, b) + gamma_v * sq(c, d);
        prop_assert!(
            close(numeric, exact, 1e-10),
            "quadrature {numeric} vs closed form {exact}"
        );
    }

    /// A control sampled on one grid cannot be integrated against a series
    /// of a different length.
    #[test]
    fn cost_rejects_mismatched_series_lengths(
        n_points in 2usize..=50,
        extra in 1usize..=10,
        value in 0.0..=1.0f64,
    ) {
        let grid = TimeGrid::new(0.0, 1.0, n_points).unwrap();
        let control = ControlGrid::constant(grid, value);
        let infected = vec![1.0; n_points + extra];
        prop_assert!(evaluate_cost(&control, &infected, 0.5, 0.5).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// CSV output survives a write/parse cycle bit-for-bit, including times.
    #[test]
    fn trajectory_csv_round_trips_bit_exactly(
        rows in prop::collection::vec(
            prop::array::uniform7(any::<f64>().prop_filter("finite", |v| v.is_finite())),
            1..=40,
        ),
        t0 in -1e3..=1e3f64,
        dt in (1e-6..=10.0f64),
    ) {
        let mut traj = Trajectory::with_capacity(7, rows.len());
        for (j, row) in rows.iter().enumerate() {
            traj.push(t0 + j as f64 * dt, row);
        }

        let dir = tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        write_trajectory_csv(&traj, None, &path).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap(), "t,S_h,V_h,I_h,R_h,A_m,S_m,I_m");
        for (j, line) in lines.enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>().expect("field must parse as f64"))
                .collect();
            prop_assert_eq!(fields.len(), 8);
            prop_assert_eq!(fields[0].to_bits(), traj.times()[j].to_bits(), "time at row {}", j);
            for c in 0..7 {
                prop_assert_eq!(
                    fields[c + 1].to_bits(),
                    traj.value(j, c).to_bits(),
                    "component {} at row {}", c, j
                );
            }
        }
    }
}

/// Optional sections of a scenario file, drawn with every field randomized
/// inside its validated range.
fn control_section() -> impl Strategy<Value = ControlSettings> {
    (0.01..=5.0f64, 0.01..=5.0f64, 0.0..=1.0f64, 0.0..=0.3f64, 0.7..=1.0f64).prop_map(
        |(gamma_d, gamma_v, theta, u_min, u_max)| ControlSettings {
            gamma_d,
            gamma_v,
            theta,
            u_min,
            u_max,
        },
    )
}

fn solver_section() -> impl Strategy<Value = SolverSettings> {
    (0.01..=0.5f64, 0.05..=0.95f64, 1e-10..=1e-2f64, 10usize..=5000, 1usize..=50).prop_map(
        |(step, omega, tol, max_iter, n_intervals)| SolverSettings {
            step,
            omega,
            tol,
            max_iter,
            n_intervals,
        },
    )
}

fn output_section() -> impl Strategy<Value = OutputSettings> {
    (
        prop::option::of("[a-z0-9_]{1,10}"),
        prop::option::of("[a-z0-9_]{1,10}"),
    )
        .prop_map(|(out_dir, stem)| OutputSettings { out_dir, stem })
}

/// A fully inline scenario with random viable parameters, a random valid
/// initial state, and a random strategy.
fn inline_scenario() -> impl Strategy<Value = Scenario> {
    (
        "[a-z][a-z0-9_]{0,11}",
        viable_params(),
        human_weights(),
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        strategy_any(),
        1.0..=5e3f64,
    )
        .prop_map(|(label, params, w, a_frac, sm_frac, im_frac, strategy, horizon)| {
            let initial = initial_from_fractions(&params, w, a_frac, sm_frac, im_frac);
            Scenario { label, params, initial, strategy, horizon }
        })
}

/// A valid scenario file: either a preset reference (which may carry a
/// control section, since presets start unvaccinated) or an inline scenario
/// with optional solver/output sections.
fn scenario_file() -> impl Strategy<Value = ScenarioFile> {
    let preset_branch = (
        any::<bool>(),
        prop::option::of(control_section()),
        prop::option::of(solver_section()),
        prop::option::of(output_section()),
    )
        .prop_map(|(endemic, control, solver, output)| ScenarioFile {
            schema_version: "1".to_string(),
            preset: Some(if endemic { "endemic" } else { "epidemic" }.to_string()),
            scenario: None,
            control,
            solver,
            output,
        });
    let inline_branch = (
        inline_scenario(),
        prop::option::of(solver_section()),
        prop::option::of(output_section()),
    )
        .prop_map(|(scenario, solver, output)| ScenarioFile {
            schema_version: "1".to_string(),
            preset: None,
            scenario: Some(scenario),
            control: None,
            solver,
            output,
        });
    prop_oneof![preset_branch, inline_branch]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Serializing a scenario file and parsing the result reproduces exactly
    /// the same values — no field drifts through the text representation.
    #[test]
    fn scenario_json_round_trips_identically(file in scenario_file()) {
        file.validate().expect("generated file must be valid");
        let text = scenario_to_json(&file).unwrap();
        let reparsed = parse_scenario(&text).unwrap();
        prop_assert_eq!(reparsed, file);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A piecewise-constant control expands so that sample j carries the
    /// coefficient of interval floor(j*k/(n-1)), every expanded sample is
    /// admissible, and per-interval means recover the coefficients.
    #[test]
    fn piecewise_controls_expand_and_compress_consistently(
        (n_coeffs, n_points) in (1usize..=10)
            .prop_flat_map(|k| (Just(k), (k + 1)..=300usize)),
        raw in prop::collection::vec(0.0..=1.0f64, 10),
        lo in 0.0..=0.5f64,
        width in 0.0..=0.5f64,
        tf in 0.5..=500.0f64,
        violation in 1e-3..=1.0f64,
    ) {
        let hi = lo + width;
        let coeffs: Vec<f64> = raw[..n_coeffs].iter().map(|r| lo + r * width).collect();
        let grid = TimeGrid::new(0.0, tf, n_points).unwrap();

        let control = ControlGrid::piecewise(grid.clone(), &coeffs, lo, hi).unwrap();
        for (j, &u) in control.values().iter().enumerate() {
            let interval = ((j * n_coeffs) / (n_points - 1)).min(n_coeffs - 1);
            prop_assert_eq!(u.to_bits(), coeffs[interval].to_bits(), "sample {}", j);
            prop_assert!((lo..=hi).contains(&u));
        }

        let means = control.interval_means(n_coeffs);
        prop_assert_eq!(means.len(), n_coeffs);
        for (i, (&mean, &coeff)) in means.iter().zip(&coeffs).enumerate() {
            prop_assert!(
                close(mean, coeff, 1e-12),
                "interval {i} mean {mean} vs coefficient {coeff}"
            );
        }

        let mut bad = coeffs.clone();
        bad[0] = hi + violation;
        prop_assert!(ControlGrid::piecewise(grid, &bad, lo, hi).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Integrating a linear decay forward and then integrating the same field
    /// backward from the final value retraces the forward trajectory.
    #[test]
    fn backward_integration_retraces_forward_trajectory(
        rate in -2.0..=1.0f64,
        y0 in 0.5..=2.0f64,
        tf in 0.5..=5.0f64,
        n_points in 201usize..=501,
    ) {
        let grid = TimeGrid::new(0.0, tf, n_points).unwrap();
        let forward = integrate(
            &|_t, y: &[f64], dy: &mut [f64]| dy[0] = rate * y[0],
            &grid,
            &[y0],
            ClampPolicy::None,
        )
        .unwrap();

        let retraced = integrate_backward(
            &|_t, y: &[f64], _ctx: &[f64], dy: &mut [f64]| dy[0] = rate * y[0],
            &grid,
            forward.final_state(),
            &forward,
        )
        .unwrap();

        for j in 0..n_points {
            let f = forward.value(j, 0);
            let r = retraced.value(j, 0);
            prop_assert!(
                (f - r).abs() <= 1e-6 * f.abs().max(r.abs()),
                "mismatch at sample {j}: forward {f}, retraced {r}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The peak finder returns the first global maximum, including under ties.
    #[test]
    fn peak_returns_first_global_maximum(
        levels in prop::collection::vec(prop::sample::select(vec![0.0f64, 1.0, 2.0, 3.0]), 1..=60),
        scale in 0.5..=1e4f64,
    ) {
        let mut traj = Trajectory::with_capacity(7, levels.len());
        for (j, &level) in levels.iter().enumerate() {
            traj.push(j as f64, &[0.0, 0.0, level * scale, 0.0, 0.0, 0.0, 0.0]);
        }

        let (t_peak, v_peak) = peak(&traj, Compartment::IH).unwrap();

        let mut best = (0usize, levels[0] * scale);
        for (j, &level) in levels.iter().enumerate() {
            if level * scale > best.1 {
                best = (j, level * scale);
            }
        }
        prop_assert_eq!(t_peak.to_bits(), (best.0 as f64).to_bits());
        prop_assert_eq!(v_peak.to_bits(), best.1.to_bits());
    }

    /// Uniform grids hit both endpoints exactly, increase strictly, and a
    /// step that divides the span produces exactly span/step intervals.
    #[test]
    fn time_grids_pin_endpoints_and_interval_counts(
        t0 in -100.0..=100.0f64,
        span in 0.1..=500.0f64,
        n_points in 2usize..=1000,
        k in 1usize..=1000,
    ) {
        let tf = t0 + span;
        let grid = TimeGrid::new(t0, tf, n_points).unwrap();
        let times = grid.times();
        prop_assert_eq!(times.len(), n_points);
        prop_assert_eq!(times[0].to_bits(), t0.to_bits());
        prop_assert_eq!(times[n_points - 1].to_bits(), tf.to_bits());
        for pair in times.windows(2) {
            prop_assert!(pair[1] > pair[0], "grid must increase strictly");
        }

        let stepped = TimeGrid::from_step(t0, tf, (tf - t0) / k as f64).unwrap();
        prop_assert_eq!(stepped.n_points(), k + 1);
        prop_assert_eq!(stepped.t0().to_bits(), t0.to_bits());
        prop_assert_eq!(stepped.tf().to_bits(), tf.to_bits());
    }
}
