use serde::{Deserialize, Serialize};

use super::UcError;
use crate::climate::ScenarioProfile;
use crate::grid::{line_rating, PowerSystem};
use crate::resources::{pv_max_output, thermal_available_capacity, wind_max_output};

/// Per-hour data the commitment model consumes, ordered like the system's
/// component lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlyInputs {
    /// System demand before the load adjustment, MW.
    pub demand: Vec<f64>,
    /// `[unit][hour]` FOR-derated capacity.
    pub thermal_avail: Vec<Vec<f64>>,
    pub pv_max: Vec<Vec<f64>>,
    /// Already zero for exposed farms during storm hours.
    pub wind_max: Vec<Vec<f64>>,
    pub line_rating: Vec<Vec<f64>>,
    pub hurricane: Vec<bool>,
}

impl HourlyInputs {
    pub fn hours(&self) -> usize {
        self.demand.len()
    }

    /// Hours `start..end` (0-based, end exclusive).
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let cut = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| r[start..end].to_vec()).collect();
        Self {
            demand: self.demand[start..end].to_vec(),
            thermal_avail: cut(&self.thermal_avail),
            pv_max: cut(&self.pv_max),
            wind_max: cut(&self.wind_max),
            line_rating: cut(&self.line_rating),
            hurricane: self.hurricane[start..end].to_vec(),
        }
    }

    /// Checks shape and finiteness; errors name the first offending series
    /// and its 1-based hour counted from `first_hour`.
    pub fn verify(&self, system: &PowerSystem, first_hour: usize) -> Result<(), UcError> {
        let hours = self.hours();
        let check = |series: String, values: &[f64]| -> Result<(), UcError> {
            if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                return Err(UcError::NonFinite {
                    series,
                    hour: first_hour + k,
                });
            }
            if values.len() < hours {
                return Err(UcError::MissingInput {
                    series,
                    hour: first_hour + values.len(),
                });
            }
            Ok(())
        };
        check("demand".into(), &self.demand)?;
        let groups: [(&str, &Vec<Vec<f64>>, Vec<String>); 4] = [
            ("thermal_avail", &self.thermal_avail, system.thermal.iter().map(|g| g.id.clone()).collect()),
            ("pv_max", &self.pv_max, system.solar.iter().map(|s| s.id.clone()).collect()),
            ("wind_max", &self.wind_max, system.wind.iter().map(|w| w.id.clone()).collect()),
            ("line_rating", &self.line_rating, system.lines.iter().map(|l| l.id.to_string()).collect()),
        ];
        for (name, rows, ids) in groups {
            for (k, id) in ids.iter().enumerate() {
                let series = format!("{name}[{id}]");
                match rows.get(k) {
                    Some(r) => check(series, r)?,
                    None => return Err(UcError::MissingInput { series, hour: first_hour }),
                }
            }
        }
        if self.hurricane.len() < hours {
            return Err(UcError::MissingInput {
                series: "hurricane".into(),
                hour: first_hour + self.hurricane.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates resource and rating models over a scenario month.
pub fn prepare_inputs(system: &PowerSystem, scenario: &ScenarioProfile) -> Result<HourlyInputs, UcError> {
    let hours = scenario.hours();
    let temp = &scenario.temp;
    for (series, len) in [
        ("temp", temp.len()),
        ("ghi", scenario.ghi.len()),
        ("hurricane", scenario.hurricane.len()),
    ] {
        if len < hours {
            return Err(UcError::MissingInput {
                series: series.into(),
                hour: len + 1,
            });
        }
    }
    let thermal_avail = system
        .thermal
        .iter()
        .map(|g| temp.iter().map(|t| thermal_available_capacity(g, *t)).collect())
        .collect();
    let pv_max = system
        .solar
        .iter()
        .map(|s| {
            (0..hours)
                .map(|h| pv_max_output(s, temp[h], scenario.ghi[h]))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut wind_max = Vec::with_capacity(system.wind.len());
    for w in &system.wind {
        let speeds = scenario
            .wind
            .get(w.site.wrapping_sub(1))
            .ok_or_else(|| UcError::MissingSite {
                farm: w.id.clone(),
                site: w.site,
                sites: scenario.wind.len(),
            })?;
        if speeds.len() < hours {
            return Err(UcError::MissingInput {
                series: format!("wind site {}", w.site),
                hour: speeds.len() + 1,
            });
        }
        let series = (0..hours)
            .map(|h| wind_max_output(w, speeds[h], scenario.hurricane[h]))
            .collect::<Result<Vec<_>, _>>()?;
        wind_max.push(series);
    }
    let line_rating = system
        .lines
        .iter()
        .map(|l| temp.iter().map(|t| line_rating(l, *t)).collect())
        .collect();
    Ok(HourlyInputs {
        demand: scenario.demand.clone(),
        thermal_avail,
        pv_max,
        wind_max,
        line_rating,
        hurricane: scenario.hurricane.clone(),
    })
}

/// State entering a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    /// Per unit, past commitment states, oldest first; the last entry is the
    /// hour just before the window.
    pub thermal_history: Vec<Vec<bool>>,
    /// Per storage unit, SOC fraction at the end of the previous hour.
    pub soc: Vec<f64>,
}

impl InitialConditions {
    /// All units off for `max(UT, DT)` hours and storage at its configured
    /// initial SOC.
    pub fn cold_start(system: &PowerSystem) -> Self {
        Self {
            thermal_history: system
                .thermal
                .iter()
                .map(|g| vec![false; g.min_up.max(g.min_down).max(1) as usize])
                .collect(),
            soc: system.storage.iter().map(|b| b.initial_soc).collect(),
        }
    }

    pub fn verify(&self, system: &PowerSystem) -> Result<(), UcError> {
        if self.thermal_history.len() != system.thermal.len() {
            return Err(UcError::InitialMismatch {
                kind: "thermal units",
                needed: system.thermal.len(),
                found: self.thermal_history.len(),
            });
        }
        if self.soc.len() != system.storage.len() {
            return Err(UcError::InitialMismatch {
                kind: "storage units",
                needed: system.storage.len(),
                found: self.soc.len(),
            });
        }
        for (g, h) in system.thermal.iter().zip(&self.thermal_history) {
            let needed = g.min_up.max(g.min_down) as usize;
            if h.len() < needed {
                return Err(UcError::ShortHistory {
                    unit: g.id.clone(),
                    needed,
                    found: h.len(),
                });
            }
        }
        Ok(())
    }

    /// Startups (or shutdowns when `up` is false) recorded `back` hours
    /// before the window, `back` ≥ 1. The oldest entry has no predecessor and
    /// never counts as a transition.
    pub(crate) fn history_transition(&self, unit: usize, back: usize, up: bool) -> bool {
        let h = &self.thermal_history[unit];
        if back >= h.len() {
            return false;
        }
        let now = h[h.len() - back];
        let before = h[h.len() - back - 1];
        if up {
            now && !before
        } else {
            !now && before
        }
    }

    pub(crate) fn last_on(&self, unit: usize) -> bool {
        self.thermal_history[unit].last().copied().unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UcWindow {
    /// 1-based hour of the month where the window starts.
    pub first_hour: usize,
    pub inputs: HourlyInputs,
    pub initial: InitialConditions,
    /// MW added to system demand every hour.
    pub load_adjustment: f64,
}

impl UcWindow {
    pub fn hours(&self) -> usize {
        self.inputs.hours()
    }

    /// Effective system demand, never negative.
    pub fn effective_demand(&self) -> Vec<f64> {
        self.inputs
            .demand
            .iter()
            .map(|d| (d + self.load_adjustment).max(0.0))
            .collect()
    }
}
