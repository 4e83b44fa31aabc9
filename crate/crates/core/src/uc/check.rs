use std::fmt;

use super::inputs::{HourlyInputs, InitialConditions};
use super::UcSolution;
use crate::grid::{PowerSystem, PtdfMatrix};

/// Relative tolerance applied to every row, scaled by the row's magnitude.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckViolation {
    pub family: &'static str,
    pub entity: String,
    /// 1-based hour of the month.
    pub hour: usize,
    /// Absolute amount by which the row is violated.
    pub excess: f64,
}

impl fmt::Display for CheckViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated by {} at hour {} ({})",
            self.family, self.excess, self.hour, self.entity
        )
    }
}

struct Collector {
    out: Vec<CheckViolation>,
    first_hour: usize,
}

impl Collector {
    fn check(&mut self, family: &'static str, entity: impl Into<String>, k: usize, excess: f64, scale: f64) {
        if excess > FEASIBILITY_TOL * scale.max(1.0) || excess.is_nan() {
            self.out.push(CheckViolation {
                family,
                entity: entity.into(),
                hour: self.first_hour + k,
                excess,
            });
        }
    }

    fn flag(&mut self, family: &'static str, entity: impl Into<String>, k: usize) {
        self.out.push(CheckViolation {
            family,
            entity: entity.into(),
            hour: self.first_hour + k,
            excess: 1.0,
        });
    }
}

/// Re-evaluates every constraint family of `solution` directly from system
/// data. `inputs` must be aligned with the solution's first hour and
/// `initial` describes the state before it. Returns an empty list when the
/// schedule is feasible.
pub fn check_solution_feasibility(
    system: &PowerSystem,
    ptdf: &PtdfMatrix,
    inputs: &HourlyInputs,
    initial: &InitialConditions,
    load_adjustment: f64,
    solution: &UcSolution,
) -> Vec<CheckViolation> {
    let hours = solution.hours();
    let mut c = Collector {
        out: Vec::new(),
        first_hour: solution.first_hour,
    };
    if inputs.hours() < hours {
        c.flag("input-coverage", "inputs", inputs.hours());
        return c.out;
    }
    let weights = system.weights();
    let bus_of = system.bus_index();
    let peak = solution.peak_demand();

    for k in 0..hours {
        let d = solution.demand[k];
        let expected = (inputs.demand[k] + load_adjustment).max(0.0);
        c.check("demand", "system", k, (d - expected).abs(), expected);

        let mut supply = solution.shed_system[k];
        let mut inj: Vec<f64> = weights.iter().map(|w| -w * d).collect();
        for (g, s) in system.thermal.iter().zip(&solution.thermal) {
            supply += s.output[k];
            inj[bus_of[&g.bus]] += s.output[k];
        }
        for (f, s) in system.solar.iter().zip(&solution.solar) {
            supply += s.output[k];
            inj[bus_of[&f.bus]] += s.output[k];
        }
        for (f, s) in system.wind.iter().zip(&solution.wind) {
            supply += s.output[k];
            inj[bus_of[&f.bus]] += s.output[k];
        }
        for (b, s) in system.storage.iter().zip(&solution.storage) {
            supply += s.discharge[k] - s.charge[k];
            inj[bus_of[&b.bus]] += s.discharge[k] - s.charge[k];
        }
        c.check("balance", "system", k, (supply - d).abs(), peak);

        let shed = solution.shed_system[k];
        c.check("shed-bounds", "system", k, (-shed).max(shed - d), d);
        let gate = if solution.shed_flag[k] { d } else { 0.0 };
        c.check("shed-gate", "system", k, shed - gate, d);
        for (n, w) in weights.iter().enumerate() {
            inj[n] += w * shed;
            let nodal = solution.shed_nodal.get(n).and_then(|s| s.get(k)).copied();
            match nodal {
                Some(v) => c.check("shed-distribution", format!("bus {}", system.buses[n].id), k, (v - w * shed).abs(), shed),
                None => c.flag("shed-distribution", format!("bus {}", system.buses[n].id), k),
            }
        }

        for (l, (line, flow)) in system.lines.iter().zip(ptdf.flows(&inj)).enumerate() {
            let rating = inputs.line_rating[l][k];
            c.check("line-limit", format!("line {}", line.id), k, flow.abs() - rating, rating);
        }
    }

    for (i, (g, s)) in system.thermal.iter().zip(&solution.thermal).enumerate() {
        let entity = format!("thermal {}", g.id);
        let history = &initial.thermal_history[i];
        // Full on-path: history followed by the schedule.
        let path: Vec<bool> = history.iter().chain(&s.on).copied().collect();
        let offset = history.len();
        let startup = |p: usize| p > 0 && path[p] && !path[p - 1];
        let shutdown = |p: usize| p > 0 && !path[p] && path[p - 1];
        for k in 0..hours {
            let on = f64::from(u8::from(s.on[k]));
            let avail = inputs.thermal_avail[i][k];
            c.check("thermal-max", entity.clone(), k, s.output[k] - avail * on, avail);
            c.check("thermal-min", entity.clone(), k, g.g_min * on - s.output[k], g.g_min);
            let p = offset + k;
            if s.startup[k] != startup(p) || s.shutdown[k] != shutdown(p) {
                c.flag("transition", entity.clone(), k);
            }
            let ut = g.min_up as usize;
            let ups = (p + 1).saturating_sub(ut)..=p;
            let n_up = ups.filter(|&q| startup(q)).count();
            if n_up > usize::from(s.on[k]) {
                c.flag("min-up", entity.clone(), k);
            }
            let dt = g.min_down as usize;
            let downs = (p + 1).saturating_sub(dt)..=p;
            let n_down = downs.filter(|&q| shutdown(q)).count();
            if n_down > usize::from(!s.on[k]) {
                c.flag("min-down", entity.clone(), k);
            }
        }
    }

    let renewables = system
        .solar
        .iter()
        .map(|f| (format!("solar {}", f.id), false))
        .zip(solution.solar.iter().zip(&inputs.pv_max))
        .chain(
            system
                .wind
                .iter()
                .map(|f| (format!("wind {}", f.id), f.hurricane_exposed))
                .zip(solution.wind.iter().zip(&inputs.wind_max)),
        );
    for ((entity, exposed), (s, avail)) in renewables {
        for k in 0..hours {
            c.check("res-availability", entity.clone(), k, s.output[k] - avail[k], avail[k]);
            c.check("res-availability", entity.clone(), k, -s.output[k], avail[k]);
            c.check("curtailment", entity.clone(), k, (s.curtailment[k] - (avail[k] - s.output[k])).abs(), avail[k]);
            c.check("curtailment", entity.clone(), k, -s.curtailment[k], avail[k]);
            if exposed && inputs.hurricane[k] {
                c.check("hurricane-outage", entity.clone(), k, s.output[k], 1.0);
            }
        }
    }

    for (j, (b, s)) in system.storage.iter().zip(&solution.storage).enumerate() {
        let entity = format!("storage {}", b.id);
        let mut prev = initial.soc[j];
        for k in 0..hours {
            let ch_cap = if s.charging[k] { b.charge_max } else { 0.0 };
            let dis_cap = if s.discharging[k] { b.discharge_max } else { 0.0 };
            c.check("storage-charge", entity.clone(), k, (s.charge[k] - ch_cap).max(-s.charge[k]), b.charge_max);
            c.check(
                "storage-discharge",
                entity.clone(),
                k,
                (s.discharge[k] - dis_cap).max(-s.discharge[k]),
                b.discharge_max,
            );
            if s.charging[k] && s.discharging[k] {
                c.flag("storage-exclusive", entity.clone(), k);
            }
            let e = b.energy_mwh;
            let rhs = prev * e + s.charge[k] * b.eta_charge - s.discharge[k] / b.eta_discharge;
            c.check("soc-recursion", entity.clone(), k, (s.soc[k] * e - rhs).abs(), e);
            c.check("soc-bounds", entity.clone(), k, (b.soc_min - s.soc[k]).max(s.soc[k] - b.soc_max), 1.0);
            prev = s.soc[k];
        }
    }
    c.out
}
