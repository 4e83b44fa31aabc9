//! Loss-of-load hours and the load-adjustment search that pins a system to
//! the reliability target.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use elcc_milp::SolverOptions;

use crate::climate::ScenarioSet;
use crate::grid::{build_ptdf, GridError, PowerSystem, PtdfMatrix};
use crate::uc::{prepare_inputs, solve_with_inputs, HourlyInputs, UcError, UcParams, UcSolution};

/// Two LOLH values closer than this count as equal.
const HIT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("LOLH needs at least one scenario")]
    Empty,
    #[error("target LOLH must be positive, got {0}")]
    BadTarget(f64),
    #[error("epsilon_la must be positive, got {0}")]
    BadEpsilon(f64),
    #[error(
        "cannot bracket target {target} h/month: LOLH {low_lolh} at LA {low_la} MW, LOLH {high_lolh} at LA {high_la} MW"
    )]
    NonBracketable {
        target: f64,
        low_la: f64,
        low_lolh: f64,
        high_la: f64,
        high_lolh: f64,
    },
    #[error(transparent)]
    Uc(#[from] UcError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{variant}: {source}")]
    Variant {
        variant: String,
        #[source]
        source: Box<ReliabilityError>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LolhResult {
    /// Shed hours per scenario.
    pub counts: Vec<usize>,
    /// Mean shed hours per month.
    pub mean: f64,
    pub shed_tolerance: f64,
}

pub fn count_shed_hours(shed: &[f64], tolerance: f64) -> usize {
    shed.iter().filter(|s| **s > tolerance).count()
}

/// An hour counts as lost load when system shedding strictly exceeds
/// `shed_tolerance`.
pub fn compute_lolh(solutions: &[UcSolution], shed_tolerance: f64) -> Result<LolhResult, ReliabilityError> {
    let series: Vec<&[f64]> = solutions.iter().map(|s| s.shed_system.as_slice()).collect();
    lolh_from_shed(&series, shed_tolerance)
}

pub fn lolh_from_shed(series: &[&[f64]], shed_tolerance: f64) -> Result<LolhResult, ReliabilityError> {
    if series.is_empty() {
        return Err(ReliabilityError::Empty);
    }
    let counts: Vec<usize> = series.iter().map(|s| count_shed_hours(s, shed_tolerance)).collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Ok(LolhResult {
        counts,
        mean,
        shed_tolerance,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Bisect on the scenario-mean LOLH.
    #[default]
    MeanLolh,
    /// Search every scenario separately and average the resulting LA.
    ScenarioAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// h/month.
    pub target_lolh: f64,
    /// MW.
    pub epsilon_la: f64,
    /// MW.
    pub shed_tolerance: f64,
    /// First expansion step as a fraction of peak demand.
    pub initial_step: f64,
    /// Largest |LA| probed, as a fraction of peak demand.
    pub max_fraction: f64,
    pub mode: SearchMode,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            target_lolh: 0.2,
            epsilon_la: 1.0,
            shed_tolerance: 1e-3,
            initial_step: 0.01,
            max_fraction: 0.5,
            mode: SearchMode::MeanLolh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub la_mw: f64,
    pub mean_lolh: f64,
    /// Bracket after this probe; infinite while a side is open.
    pub la_min: f64,
    pub la_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadAdjustmentResult {
    pub la: f64,
    pub la_min: f64,
    pub la_max: f64,
    pub iterations: usize,
    /// Probes spent before both bracket sides were known.
    pub expansions: usize,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub exact_hit: bool,
}

impl LoadAdjustmentResult {
    pub fn write_trace(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_trace_rows(&mut f, &self.trace)?;
        f.flush()
    }
}

pub fn write_trace_rows<W: Write>(out: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "iteration,la_mw,mean_lolh,la_min,la_max")?;
    for r in rows {
        writeln!(out, "{},{:?},{:?},{:?},{:?}", r.iteration, r.la_mw, r.mean_lolh, r.la_min, r.la_max)?;
    }
    Ok(())
}

/// Bracketing search on a nondecreasing LOLH(LA). Starts at LA = 0, doubles
/// the step from `initial_step · peak` until the target is straddled (never
/// beyond `±max_fraction · peak`), then bisects until the target is hit or
/// the bracket is no wider than `epsilon_la`.
pub fn search_load_adjustment<E, F>(
    peak: f64,
    options: &SearchOptions,
    mut lolh: F,
) -> Result<LoadAdjustmentResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<ReliabilityError>,
{
    let target = options.target_lolh;
    if !(target > 0.0) {
        return Err(ReliabilityError::BadTarget(target).into());
    }
    if !(options.epsilon_la > 0.0) {
        return Err(ReliabilityError::BadEpsilon(options.epsilon_la).into());
    }
    let limit = options.max_fraction * peak;
    let mut lo = f64::NEG_INFINITY;
    let mut lo_val = f64::NAN;
    let mut hi = f64::INFINITY;
    let mut hi_val = f64::NAN;
    let mut trace: Vec<TraceRow> = Vec::new();

    let mut probe = |la: f64, lo: &mut f64, lo_val: &mut f64, hi: &mut f64, hi_val: &mut f64, trace: &mut Vec<TraceRow>| -> Result<bool, E> {
        let v = lolh(la)?;
        let hit = (v - target).abs() <= HIT_TOL;
        if hit {
            *lo = la;
            *hi = la;
            *lo_val = v;
            *hi_val = v;
        } else if v < target {
            *lo = la;
            *lo_val = v;
        } else {
            *hi = la;
            *hi_val = v;
        }
        trace.push(TraceRow {
            iteration: trace.len() + 1,
            la_mw: la,
            mean_lolh: v,
            la_min: *lo,
            la_max: *hi,
        });
        Ok(hit)
    };

    let finish = |lo: f64, hi: f64, trace: Vec<TraceRow>, expansions: usize, exact: bool| LoadAdjustmentResult {
        la: if exact { lo } else { 0.5 * (lo + hi) },
        la_min: lo,
        la_max: hi,
        iterations: trace.len(),
        expansions,
        trace,
        converged: true,
        exact_hit: exact,
    };

    if probe(0.0, &mut lo, &mut lo_val, &mut hi, &mut hi_val, &mut trace)? {
        return Ok(finish(lo, hi, trace, 1, true));
    }
    let mut step = options.initial_step * peak;
    while lo.is_infinite() || hi.is_infinite() {
        let (cand, at_limit) = if hi.is_infinite() {
            let c = lo + step;
            if c >= limit { (limit, true) } else { (c, false) }
        } else {
            let c = hi - step;
            if c <= -limit { (-limit, true) } else { (c, false) }
        };
        if probe(cand, &mut lo, &mut lo_val, &mut hi, &mut hi_val, &mut trace)? {
            let n = trace.len();
            return Ok(finish(lo, hi, trace, n, true));
        }
        if at_limit && (lo.is_infinite() || hi.is_infinite()) {
            let (low_la, low_lolh, high_la, high_lolh) = if hi.is_infinite() {
                (lo, lo_val, f64::INFINITY, f64::NAN)
            } else {
                (f64::NEG_INFINITY, f64::NAN, hi, hi_val)
            };
            return Err(ReliabilityError::NonBracketable {
                target,
                low_la,
                low_lolh,
                high_la,
                high_lolh,
            }
            .into());
        }
        step *= 2.0;
    }
    let expansions = trace.len();
    while hi - lo > options.epsilon_la {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut lo, &mut lo_val, &mut hi, &mut hi_val, &mut trace)? {
            return Ok(finish(lo, hi, trace, expansions, true));
        }
    }
    Ok(finish(lo, hi, trace, expansions, false))
}

/// Rolling-horizon LOLH evaluation of one system over a fixed scenario set.
pub struct UcEvaluator<'a> {
    pub system: &'a PowerSystem,
    pub ptdf: PtdfMatrix,
    pub inputs: Vec<HourlyInputs>,
    pub params: &'a UcParams,
    pub solver: &'a SolverOptions,
    pub shed_tolerance: f64,
}

impl<'a> UcEvaluator<'a> {
    pub fn new(
        system: &'a PowerSystem,
        scenarios: &ScenarioSet,
        params: &'a UcParams,
        solver: &'a SolverOptions,
        shed_tolerance: f64,
    ) -> Result<Self, ReliabilityError> {
        if scenarios.scenarios.is_empty() {
            return Err(ReliabilityError::Empty);
        }
        let ptdf = build_ptdf(system)?;
        let inputs = scenarios
            .scenarios
            .iter()
            .map(|s| prepare_inputs(system, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            system,
            ptdf,
            inputs,
            params,
            solver,
            shed_tolerance,
        })
    }

    pub fn peak_demand(&self) -> f64 {
        self.inputs
            .iter()
            .flat_map(|i| i.demand.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Solves every scenario at `la`; scenarios run on the current rayon pool.
    pub fn solve_all(&self, la: f64) -> Result<Vec<UcSolution>, ReliabilityError> {
        self.inputs
            .par_iter()
            .map(|inp| solve_with_inputs(self.system, &self.ptdf, inp, la, self.params, self.solver))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ReliabilityError::from)
    }

    pub fn lolh(&self, la: f64) -> Result<LolhResult, ReliabilityError> {
        compute_lolh(&self.solve_all(la)?, self.shed_tolerance)
    }

    fn scenario_lolh(&self, index: usize, la: f64) -> Result<f64, ReliabilityError> {
        let sol = solve_with_inputs(self.system, &self.ptdf, &self.inputs[index], la, self.params, self.solver)?;
        Ok(count_shed_hours(&sol.shed_system, self.shed_tolerance) as f64)
    }
}

/// Load adjustment that brings `system` to the target LOLH over `scenarios`.
pub fn find_load_adjustment(
    system: &PowerSystem,
    scenarios: &ScenarioSet,
    options: &SearchOptions,
    params: &UcParams,
    solver: &SolverOptions,
) -> Result<LoadAdjustmentResult, ReliabilityError> {
    let eval = UcEvaluator::new(system, scenarios, params, solver, options.shed_tolerance)?;
    let peak = eval.peak_demand();
    match options.mode {
        SearchMode::MeanLolh => search_load_adjustment(peak, options, |la| eval.lolh(la).map(|r| r.mean)),
        SearchMode::ScenarioAverage => {
            let per: Vec<LoadAdjustmentResult> = (0..eval.inputs.len())
                .into_par_iter()
                .map(|i| search_load_adjustment(peak, options, |la| eval.scenario_lolh(i, la)))
                .collect::<Result<Vec<_>, ReliabilityError>>()?;
            Ok(average_results(&per))
        }
    }
}

/// Combines per-scenario searches: LA and bracket ends are averaged, traces
/// are concatenated in scenario order.
fn average_results(per: &[LoadAdjustmentResult]) -> LoadAdjustmentResult {
    let n = per.len() as f64;
    let mean = |f: fn(&LoadAdjustmentResult) -> f64| per.iter().map(f).sum::<f64>() / n;
    let mut trace = Vec::new();
    for r in per {
        for row in &r.trace {
            trace.push(TraceRow {
                iteration: trace.len() + 1,
                ..row.clone()
            });
        }
    }
    LoadAdjustmentResult {
        la: mean(|r| r.la),
        la_min: mean(|r| r.la_min),
        la_max: mean(|r| r.la_max),
        iterations: trace.len(),
        expansions: per.iter().map(|r| r.expansions).sum(),
        trace,
        converged: per.iter().all(|r| r.converged),
        exact_hit: per.iter().all(|r| r.exact_hit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_counts() {
        let a = [0.0, 0.0];
        let b = [1.0, 0.0];
        let c = [0.0, 0.0];
        let d = [5.0, 2.0];
        let r = lolh_from_shed(&[&a, &b, &c, &d], 1e-3).unwrap();
        assert_eq!(r.counts, vec![0, 1, 0, 2]);
        assert_eq!(r.mean, 0.75);
        assert!(matches!(lolh_from_shed(&[], 1e-3), Err(ReliabilityError::Empty)));
    }

    #[test]
    fn tolerance_is_strict() {
        assert_eq!(count_shed_hours(&[1e-3, 1.0001e-3], 1e-3), 1);
    }

    #[test]
    fn exact_first_probe() {
        let opts = SearchOptions::default();
        let r = search_load_adjustment::<ReliabilityError, _>(100.0, &opts, |_| Ok(0.2)).unwrap();
        assert_eq!((r.iterations, r.la, r.exact_hit), (1, 0.0, true));
    }

    #[test]
    fn flat_curve_is_not_bracketable() {
        let opts = SearchOptions::default();
        let err = search_load_adjustment::<ReliabilityError, _>(100.0, &opts, |_| Ok(0.0)).unwrap_err();
        match err {
            ReliabilityError::NonBracketable { low_la, .. } => assert_eq!(low_la, 50.0),
            e => panic!("{e}"),
        }
    }
}
