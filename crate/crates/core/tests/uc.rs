mod support;

use elcc_core::fixture::{radial_three_bus, solar_farm, storage_unit, thermal_unit, wind_farm};
use elcc_core::grid::{build_ptdf, Bus, PowerSystem};
use elcc_core::uc::{
    check_solution_feasibility, schedule_cost, solve_with_inputs, HourlyInputs, InitialConditions, UcParams,
};
use elcc_milp::SolverOptions;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn two_bus_commitment_matches_enumeration() {
    let (system, inputs) = support::two_bus_uc();
    let params = UcParams::default();
    let ptdf = build_ptdf(&system).unwrap();
    let sol = solve_with_inputs(&system, &ptdf, &inputs, 0.0, &params, &SolverOptions::default()).unwrap();
    let oracle = support::two_bus_commitment_oracle(&system, &inputs, params.voll);
    assert!(rel_close(sol.objective, oracle, 1e-6), "{} vs {oracle}", sol.objective);
    assert!(sol.shed_system[18] >= 20.0 - 1e-6);
    let initial = InitialConditions::cold_start(&system);
    let v = check_solution_feasibility(&system, &ptdf, &inputs, &initial, 0.0, &sol);
    assert!(v.is_empty(), "{v:?}");
}

#[test]
fn single_bus_dispatch_by_hand() {
    let system = PowerSystem {
        slack_bus: 1,
        buses: vec![Bus { id: 1, load_weight: 1.0 }],
        lines: vec![],
        thermal: vec![thermal_unit("A", 1, 0.0, 60.0, 10.0), thermal_unit("B", 1, 0.0, 60.0, 25.0)],
        solar: vec![],
        wind: vec![],
        storage: vec![],
    };
    let demand = vec![40.0, 80.0, 130.0];
    let inputs = HourlyInputs {
        thermal_avail: vec![vec![60.0; 3]; 2],
        demand,
        pv_max: vec![],
        wind_max: vec![],
        line_rating: vec![],
        hurricane: vec![false; 3],
    };
    let ptdf = build_ptdf(&system).unwrap();
    let params = UcParams::default();
    let sol = solve_with_inputs(&system, &ptdf, &inputs, 0.0, &params, &SolverOptions::default()).unwrap();
    let expected = 40.0 * 10.0 + (60.0 * 10.0 + 20.0 * 25.0) + (60.0 * 10.0 + 60.0 * 25.0 + 10.0 * params.voll);
    assert!(rel_close(sol.objective, expected, 1e-9), "{}", sol.objective);
    assert!((sol.shed_system[2] - 10.0).abs() < 1e-6);
    assert!(sol.shed_flag[2] && !sol.shed_flag[0]);
    // A positive load adjustment adds to every hour.
    let up = solve_with_inputs(&system, &ptdf, &inputs, 5.0, &params, &SolverOptions::default()).unwrap();
    assert!((up.shed_system[2] - 15.0).abs() < 1e-6);
}

/// Three buses with a slow unit, a flexible unit, solar, wind and storage,
/// over three days in 36-hour windows.
fn mixed_case() -> (PowerSystem, HourlyInputs, UcParams) {
    let mut system = radial_three_bus(240.0, 60.0);
    system.thermal[0].g_min = 30.0;
    system.thermal[0].min_up = 4;
    system.thermal[0].min_down = 3;
    system.thermal[0].startup_cost = 900.0;
    system.thermal[1].min_up = 2;
    system.thermal[1].min_down = 2;
    system.thermal[1].startup_cost = 100.0;
    system.solar.push(solar_farm("S1", 2, 80.0));
    system.wind.push(wind_farm("W1", 3, 70.0, 1));
    system.storage.push(storage_unit("B1", 2, 30.0, 3.0));
    let hours = 72;
    let demand: Vec<f64> = (0..hours)
        .map(|k| {
            let h = (k % 24) as f64;
            150.0 + 70.0 * (-(h - 19.0).powi(2) / 8.0).exp() + 20.0 * (-(h - 13.0).powi(2) / 20.0).exp()
        })
        .collect();
    let pv: Vec<f64> = (0..hours)
        .map(|k| {
            let h = (k % 24) as f64;
            (70.0 * (1.0 - ((h - 12.5) / 5.5).powi(2))).max(0.0)
        })
        .collect();
    let wind: Vec<f64> = (0..hours).map(|k| 30.0 + 25.0 * ((k as f64) / 9.0).sin()).collect();
    let mut rating = vec![vec![2400.0; hours], vec![60.0; hours]];
    rating[1][40] = 45.0;
    let inputs = HourlyInputs {
        demand,
        thermal_avail: vec![vec![120.0; hours], vec![120.0; hours]],
        pv_max: vec![pv],
        wind_max: vec![wind],
        line_rating: rating,
        hurricane: vec![false; hours],
    };
    let params = UcParams {
        window_hours: 36,
        overlap_hours: 12,
        ..UcParams::default()
    };
    (system, inputs, params)
}

#[test]
fn rolling_horizon_schedule_passes_checker_and_corruptions_are_caught() {
    let (system, inputs, params) = mixed_case();
    let ptdf = build_ptdf(&system).unwrap();
    let sol = solve_with_inputs(&system, &ptdf, &inputs, 0.0, &params, &SolverOptions::default()).unwrap();
    assert_eq!(sol.hours(), 72);
    let initial = InitialConditions::cold_start(&system);
    let clean = check_solution_feasibility(&system, &ptdf, &inputs, &initial, 0.0, &sol);
    assert!(clean.is_empty(), "{clean:?}");
    assert!((schedule_cost(&system, &params, &sol) - sol.objective).abs() < 1e-9 * sol.objective.abs());

    let mut bad_soc = sol.clone();
    bad_soc.storage[0].soc[30] += 0.01;
    let v = check_solution_feasibility(&system, &ptdf, &inputs, &initial, 0.0, &bad_soc);
    assert!(v.iter().any(|x| x.family == "soc-recursion"), "{v:?}");

    let flows = ptdf_flows(&system, &sol, 50);
    let mut tight = inputs.clone();
    tight.line_rating[1][50] = flows[1].abs() - 0.1;
    let v = check_solution_feasibility(&system, &ptdf, &tight, &initial, 0.0, &sol);
    let hit = v.iter().find(|x| x.family == "line-limit").expect("line violation reported");
    assert!((hit.excess - 0.1).abs() < 1e-6, "{hit:?}");

    let mut short_run = sol.clone();
    if let Some(k) = (1..71).find(|&k| short_run.thermal[0].on[k] && !short_run.thermal[0].on[k - 1]) {
        for h in k + 1..72 {
            short_run.thermal[0].on[h] = false;
        }
        let v = check_solution_feasibility(&system, &ptdf, &inputs, &initial, 0.0, &short_run);
        assert!(!v.is_empty());
    }
}

fn ptdf_flows(system: &PowerSystem, sol: &elcc_core::uc::UcSolution, k: usize) -> Vec<f64> {
    let w = system.weights();
    let mut inj: Vec<f64> = w.iter().map(|x| -x * (sol.demand[k] - sol.shed_system[k])).collect();
    let pos = |bus: u32| system.buses.iter().position(|b| b.id == bus).unwrap();
    for (g, s) in system.thermal.iter().zip(&sol.thermal) {
        inj[pos(g.bus)] += s.output[k];
    }
    for (f, s) in system.solar.iter().zip(&sol.solar) {
        inj[pos(f.bus)] += s.output[k];
    }
    for (f, s) in system.wind.iter().zip(&sol.wind) {
        inj[pos(f.bus)] += s.output[k];
    }
    for (b, s) in system.storage.iter().zip(&sol.storage) {
        inj[pos(b.bus)] += s.discharge[k] - s.charge[k];
    }
    support::dc_power_flow(system, &inj)
}

#[test]
fn shedding_does_not_grow_with_voll() {
    let (system, inputs) = support::two_bus_uc();
    let ptdf = build_ptdf(&system).unwrap();
    let mut last = f64::INFINITY;
    for voll in [30.0, 40.0, 100.0, 1000.0, 10_000.0] {
        let params = UcParams {
            voll,
            ..UcParams::default()
        };
        let sol = solve_with_inputs(&system, &ptdf, &inputs, 0.0, &params, &SolverOptions::default()).unwrap();
        let shed: f64 = sol.shed_system.iter().sum();
        assert!(shed <= last + 1e-6, "voll {voll}: {shed} > {last}");
        last = shed;
    }
}

#[test]
fn repeated_solves_are_identical() {
    let (system, inputs, params) = mixed_case();
    let ptdf = build_ptdf(&system).unwrap();
    let a = solve_with_inputs(&system, &ptdf, &inputs, 3.0, &params, &SolverOptions::default()).unwrap();
    let b = solve_with_inputs(&system, &ptdf, &inputs, 3.0, &params, &SolverOptions::default()).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.shed_system, b.shed_system);
    assert_eq!(a.thermal[0].on, b.thermal[0].on);
}
