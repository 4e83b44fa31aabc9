use elcc_milp::{solve, SolverOptions};

use super::build::{build_uc_model, cost_blocks};
use super::inputs::{prepare_inputs, HourlyInputs, InitialConditions, UcWindow};
use super::{UcError, UcParams, UcSolution};
use crate::climate::ScenarioProfile;
use crate::grid::{PowerSystem, PtdfMatrix};

/// Builds and solves one window.
pub fn solve_window(
    system: &PowerSystem,
    ptdf: &PtdfMatrix,
    window: &UcWindow,
    params: &UcParams,
    options: &SolverOptions,
) -> Result<UcSolution, UcError> {
    let built = build_uc_model(system, ptdf, window, params)?;
    let sol = solve(&built.model, options).map_err(|source| UcError::Solve {
        window: 0,
        first_hour: window.first_hour,
        source,
    })?;
    log::debug!(
        "window at hour {}: {} binaries, {} nodes, gap {:.2e}",
        window.first_hour,
        built.model.num_binaries(),
        sol.nodes,
        sol.gap
    );
    Ok(built.extract(system, ptdf, window, &sol))
}

/// Production, transition, renewable, storage and shedding cost of a
/// schedule, recomputed from its hourly values.
pub fn schedule_cost(system: &PowerSystem, params: &UcParams, sol: &UcSolution) -> f64 {
    let mut cost = 0.0;
    for (g, s) in system.thermal.iter().zip(&sol.thermal) {
        let blocks = cost_blocks(&g.cost_curve, g.g_max);
        for k in 0..sol.hours() {
            let mut left = s.output[k];
            for &(width, slope) in &blocks {
                let take = left.min(width);
                cost += take * slope;
                left -= take;
                if left <= 0.0 {
                    break;
                }
            }
            if s.startup[k] {
                cost += g.startup_cost;
            }
            if s.shutdown[k] {
                cost += g.shutdown_cost;
            }
        }
    }
    let res_costs = system
        .solar
        .iter()
        .map(|f| f.cost)
        .zip(&sol.solar)
        .chain(system.wind.iter().map(|f| f.cost).zip(&sol.wind));
    for (c, s) in res_costs {
        cost += c * s.output.iter().sum::<f64>();
        cost += params.curtailment_multiplier * c * s.curtailment.iter().sum::<f64>();
    }
    for (b, s) in system.storage.iter().zip(&sol.storage) {
        cost += b.charge_cost * s.charge.iter().sum::<f64>();
    }
    cost + params.voll * sol.shed_system.iter().sum::<f64>()
}

/// Solves a month as overlapping windows. Each window commits its first
/// `window − overlap` hours except the last, which commits everything.
pub fn solve_with_inputs(
    system: &PowerSystem,
    ptdf: &PtdfMatrix,
    inputs: &HourlyInputs,
    load_adjustment: f64,
    params: &UcParams,
    options: &SolverOptions,
) -> Result<UcSolution, UcError> {
    if params.window_hours == 0 || params.overlap_hours >= params.window_hours {
        return Err(UcError::BadParams(format!(
            "window {} h with overlap {} h",
            params.window_hours, params.overlap_hours
        )));
    }
    let total = inputs.hours();
    inputs.verify(system, 1)?;
    let mut initial = InitialConditions::cold_start(system);
    let mut month: Option<UcSolution> = None;
    let mut start = 0;
    let mut index = 0;
    loop {
        let end = (start + params.window_hours).min(total);
        let window = UcWindow {
            first_hour: start + 1,
            inputs: inputs.slice(start, end),
            initial: initial.clone(),
            load_adjustment,
        };
        let mut sol = solve_window(system, ptdf, &window, params, options).map_err(|e| match e {
            UcError::Solve { first_hour, source, .. } => UcError::Solve {
                window: index,
                first_hour,
                source,
            },
            other => other,
        })?;
        let last = end == total;
        if !last {
            sol.truncate(params.step_hours());
        }
        for (hist, s) in initial.thermal_history.iter_mut().zip(&sol.thermal) {
            hist.extend(&s.on);
        }
        for (soc, s) in initial.soc.iter_mut().zip(&sol.storage) {
            if let Some(v) = s.soc.last() {
                *soc = *v;
            }
        }
        log::debug!("window {index} committed hours {}..{}", start + 1, start + sol.hours());
        start += sol.hours();
        match &mut month {
            None => month = Some(sol),
            Some(m) => m.extend(sol),
        }
        index += 1;
        if last || start >= total {
            break;
        }
    }
    let mut month = month.expect("at least one window");
    month.objective = schedule_cost(system, params, &month);
    Ok(month)
}

pub fn solve_rolling_horizon(
    system: &PowerSystem,
    ptdf: &PtdfMatrix,
    scenario: &ScenarioProfile,
    load_adjustment: f64,
    params: &UcParams,
    options: &SolverOptions,
) -> Result<UcSolution, UcError> {
    let inputs = prepare_inputs(system, scenario)?;
    solve_with_inputs(system, ptdf, &inputs, load_adjustment, params, options)
}
