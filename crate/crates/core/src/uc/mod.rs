//! Transmission-constrained unit commitment over rolling weekly windows.

mod build;
mod check;
mod horizon;
mod inputs;

pub use build::{build_uc_model, UcModel};
pub use check::{check_solution_feasibility, CheckViolation, FEASIBILITY_TOL};
pub use horizon::{schedule_cost, solve_rolling_horizon, solve_window, solve_with_inputs};
pub use inputs::{prepare_inputs, HourlyInputs, InitialConditions, UcWindow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use elcc_milp::{SolveError, SolveStatus};

use crate::grid::GridError;
use crate::resources::ResourceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcParams {
    /// Value of lost load, $/MWh.
    pub voll: f64,
    /// Curtailment penalty as a multiple of the resource's LCOE.
    pub curtailment_multiplier: f64,
    pub window_hours: usize,
    pub overlap_hours: usize,
}

impl Default for UcParams {
    fn default() -> Self {
        Self {
            voll: 10_000.0,
            curtailment_multiplier: 10.0,
            window_hours: 168,
            overlap_hours: 24,
        }
    }
}

impl UcParams {
    pub fn step_hours(&self) -> usize {
        self.window_hours - self.overlap_hours
    }
}

#[derive(Debug, Error)]
pub enum UcError {
    #[error("series `{series}` has no value for hour {hour}")]
    MissingInput { series: String, hour: usize },
    #[error("series `{series}` is not finite at hour {hour}")]
    NonFinite { series: String, hour: usize },
    #[error("unit `{unit}` needs {needed} hours of commitment history, got {found}")]
    ShortHistory {
        unit: String,
        needed: usize,
        found: usize,
    },
    #[error("initial conditions list {found} entries for {needed} {kind}")]
    InitialMismatch {
        kind: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("wind farm `{farm}` refers to site {site}, scenario has {sites}")]
    MissingSite {
        farm: String,
        site: usize,
        sites: usize,
    },
    #[error("invalid window parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("window {window} (first hour {first_hour}): {source}")]
    Solve {
        window: usize,
        first_hour: usize,
        #[source]
        source: SolveError,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSchedule {
    pub id: String,
    pub output: Vec<f64>,
    pub on: Vec<bool>,
    pub startup: Vec<bool>,
    pub shutdown: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewableSchedule {
    pub id: String,
    pub output: Vec<f64>,
    pub curtailment: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageSchedule {
    pub id: String,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// State of charge at the end of each hour, fraction of energy capacity.
    pub soc: Vec<f64>,
    pub charging: Vec<bool>,
    pub discharging: Vec<bool>,
}

/// Hourly schedule for a contiguous block of hours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcSolution {
    /// 1-based hour of the month of the first entry.
    pub first_hour: usize,
    /// System demand including the load adjustment, MW.
    pub demand: Vec<f64>,
    pub thermal: Vec<ThermalSchedule>,
    pub solar: Vec<RenewableSchedule>,
    pub wind: Vec<RenewableSchedule>,
    pub storage: Vec<StorageSchedule>,
    pub shed_system: Vec<f64>,
    /// `[bus][hour]`.
    pub shed_nodal: Vec<Vec<f64>>,
    pub shed_flag: Vec<bool>,
    /// `[line][hour]`, MW in the from → to direction.
    pub flows: Vec<Vec<f64>>,
    pub objective: f64,
    pub status: SolveStatus,
    pub gap: f64,
}

impl UcSolution {
    pub fn hours(&self) -> usize {
        self.demand.len()
    }

    /// Keeps the first `hours` entries.
    pub fn truncate(&mut self, hours: usize) {
        self.demand.truncate(hours);
        for s in &mut self.thermal {
            s.output.truncate(hours);
            s.on.truncate(hours);
            s.startup.truncate(hours);
            s.shutdown.truncate(hours);
        }
        for s in self.solar.iter_mut().chain(self.wind.iter_mut()) {
            s.output.truncate(hours);
            s.curtailment.truncate(hours);
        }
        for s in &mut self.storage {
            s.charge.truncate(hours);
            s.discharge.truncate(hours);
            s.soc.truncate(hours);
            s.charging.truncate(hours);
            s.discharging.truncate(hours);
        }
        self.shed_system.truncate(hours);
        self.shed_nodal.iter_mut().for_each(|v| v.truncate(hours));
        self.shed_flag.truncate(hours);
        self.flows.iter_mut().for_each(|v| v.truncate(hours));
    }

    /// Appends `other`, which must start right after this block.
    pub fn extend(&mut self, other: UcSolution) {
        debug_assert_eq!(self.first_hour + self.hours(), other.first_hour);
        self.demand.extend(other.demand);
        for (a, b) in self.thermal.iter_mut().zip(other.thermal) {
            a.output.extend(b.output);
            a.on.extend(b.on);
            a.startup.extend(b.startup);
            a.shutdown.extend(b.shutdown);
        }
        for (a, b) in self
            .solar
            .iter_mut()
            .chain(self.wind.iter_mut())
            .zip(other.solar.into_iter().chain(other.wind))
        {
            a.output.extend(b.output);
            a.curtailment.extend(b.curtailment);
        }
        for (a, b) in self.storage.iter_mut().zip(other.storage) {
            a.charge.extend(b.charge);
            a.discharge.extend(b.discharge);
            a.soc.extend(b.soc);
            a.charging.extend(b.charging);
            a.discharging.extend(b.discharging);
        }
        self.shed_system.extend(other.shed_system);
        for (a, b) in self.shed_nodal.iter_mut().zip(other.shed_nodal) {
            a.extend(b);
        }
        self.shed_flag.extend(other.shed_flag);
        for (a, b) in self.flows.iter_mut().zip(other.flows) {
            a.extend(b);
        }
        self.gap += other.gap;
        if other.status != SolveStatus::Optimal {
            self.status = other.status;
        }
    }

    pub fn peak_demand(&self) -> f64 {
        self.demand.iter().copied().fold(0.0, f64::max)
    }
}
