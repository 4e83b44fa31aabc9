//! Network and fleet description, PTDF construction and ambient-adjusted line
//! ratings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resources::ForPolynomial;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    pub load_weight: f64,
}

fn default_aar() -> Vec<(f64, f64)> {
    vec![(f64::INFINITY, 1.0)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLine {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Per-unit series reactance.
    pub reactance: f64,
    /// Thermal limit in MW before ambient derating.
    pub capacity: f64,
    /// `(upper temperature bound °C, derating coefficient)` bands, ascending.
    #[serde(default = "default_aar")]
    pub aar_table: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalGenerator {
    pub id: String,
    pub bus: u32,
    pub g_min: f64,
    pub g_max: f64,
    pub min_up: u32,
    pub min_down: u32,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    /// `(MW breakpoint, $/MWh slope)` blocks; block k spans from the previous
    /// breakpoint (0 for the first) to its own.
    pub cost_curve: Vec<(f64, f64)>,
    #[serde(default)]
    pub forced_outage: ForPolynomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarFarm {
    pub id: String,
    pub bus: u32,
    pub capacity: f64,
    pub noct: f64,
    pub temp_coeff: f64,
    pub efficiency: f64,
    pub cost: f64,
}

fn default_true() -> bool {
    true
}

fn default_site() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindFarm {
    pub id: String,
    pub bus: u32,
    pub capacity: f64,
    pub efficiency: f64,
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
    /// Partial-load cubic `[c3, c2, c1, c0]` in MW.
    pub cubic: [f64; 4],
    pub cost: f64,
    #[serde(default = "default_true")]
    pub hurricane_exposed: bool,
    /// 1-based wind-speed column of the weather archive.
    #[serde(default = "default_site")]
    pub site: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageUnit {
    pub id: String,
    pub bus: u32,
    pub energy_mwh: f64,
    pub charge_max: f64,
    pub discharge_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub charge_cost: f64,
    pub initial_soc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSystem {
    pub slack_bus: u32,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<TransmissionLine>,
    #[serde(default)]
    pub thermal: Vec<ThermalGenerator>,
    #[serde(default)]
    pub solar: Vec<SolarFarm>,
    #[serde(default)]
    pub wind: Vec<WindFarm>,
    #[serde(default)]
    pub storage: Vec<StorageUnit>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.entity, self.rule, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("network is disconnected; buses {component:?} are not reachable from the slack bus")]
    Disconnected { component: Vec<u32> },
    #[error("line {line} has non-positive reactance {reactance}")]
    BadReactance { line: u32, reactance: f64 },
    #[error("unknown bus {bus} referenced by {entity}")]
    UnknownBus { bus: u32, entity: String },
    #[error("invalid system:\n  {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
    #[error("cannot read system file {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse system file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("susceptance matrix is singular")]
    Singular,
}

impl PowerSystem {
    pub fn bus_index(&self) -> HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.load_weight).collect()
    }

    /// Rescales load weights so they sum to one.
    pub fn normalize_load_weights(&mut self) {
        let total: f64 = self.buses.iter().map(|b| b.load_weight).sum();
        if total > 0.0 {
            for b in &mut self.buses {
                b.load_weight /= total;
            }
        }
    }

    pub fn resource_ids(&self) -> impl Iterator<Item = &str> {
        self.thermal
            .iter()
            .map(|g| g.id.as_str())
            .chain(self.solar.iter().map(|s| s.id.as_str()))
            .chain(self.wind.iter().map(|w| w.id.as_str()))
            .chain(self.storage.iter().map(|b| b.id.as_str()))
    }

    pub fn line_mut(&mut self, id: u32) -> Option<&mut TransmissionLine> {
        self.lines.iter_mut().find(|l| l.id == id)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("power system serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Reads a system file and rejects it unless [`validate_system`] is clean.
pub fn load_system(path: &Path) -> Result<PowerSystem, GridError> {
    let text = std::fs::read_to_string(path).map_err(|e| GridError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let system = PowerSystem::from_toml(&text).map_err(|e| GridError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let violations = validate_system(&system);
    if violations.is_empty() {
        Ok(system)
    } else {
        Err(GridError::Invalid(violations))
    }
}

/// Coefficient of the first AAR band whose upper bound is at or above
/// `air_temp`, times the line capacity.
pub fn line_rating(line: &TransmissionLine, air_temp: f64) -> f64 {
    let coeff = line
        .aar_table
        .iter()
        .find(|(bound, _)| air_temp <= *bound)
        .or(line.aar_table.last())
        .map_or(1.0, |(_, c)| *c);
    line.capacity * coeff
}

fn connected_components(system: &PowerSystem) -> Vec<Vec<u32>> {
    let mut adj: BTreeMap<u32, Vec<u32>> = system.buses.iter().map(|b| (b.id, Vec::new())).collect();
    for l in &system.lines {
        if adj.contains_key(&l.from_bus) && adj.contains_key(&l.to_bus) {
            adj.get_mut(&l.from_bus).unwrap().push(l.to_bus);
            adj.get_mut(&l.to_bus).unwrap().push(l.from_bus);
        }
    }
    let mut seen = BTreeSet::new();
    let mut components = Vec::new();
    let mut order: Vec<u32> = vec![system.slack_bus];
    order.extend(adj.keys().copied());
    for start in order {
        if !adj.contains_key(&start) || !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for &n in &adj[&b] {
                if seen.insert(n) {
                    comp.push(n);
                    queue.push_back(n);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Every broken invariant, each naming the entity and the rule.
pub fn validate_system(system: &PowerSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: &'static str, detail: String| {
        out.push(Violation {
            entity,
            rule,
            detail,
        })
    };

    let mut bus_ids = HashSet::new();
    for b in &system.buses {
        if !bus_ids.insert(b.id) {
            push(format!("bus {}", b.id), "unique-bus-id", "duplicate id".into());
        }
        if !(b.load_weight >= 0.0 && b.load_weight <= 1.0) {
            push(
                format!("bus {}", b.id),
                "load-weight-range",
                format!("weight {} outside [0, 1]", b.load_weight),
            );
        }
    }
    let total: f64 = system.buses.iter().map(|b| b.load_weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        push("buses".into(), "load-weight-sum", format!("weights sum to {total}"));
    }
    if !bus_ids.contains(&system.slack_bus) {
        push(
            "system".into(),
            "slack-bus-exists",
            format!("slack bus {} not declared", system.slack_bus),
        );
    }

    let mut line_ids = HashSet::new();
    for l in &system.lines {
        let e = format!("line {}", l.id);
        if !line_ids.insert(l.id) {
            push(e.clone(), "unique-line-id", "duplicate id".into());
        }
        if l.from_bus == l.to_bus {
            push(e.clone(), "distinct-endpoints", format!("both ends at bus {}", l.from_bus));
        }
        for end in [l.from_bus, l.to_bus] {
            if !bus_ids.contains(&end) {
                push(e.clone(), "bus-exists", format!("bus {end} not declared"));
            }
        }
        if !(l.reactance > 0.0) {
            push(e.clone(), "positive-reactance", format!("reactance {}", l.reactance));
        }
        if !(l.capacity > 0.0) {
            push(e.clone(), "positive-capacity", format!("capacity {}", l.capacity));
        }
        if l.aar_table.is_empty() {
            push(e.clone(), "aar-table-nonempty", "no bands".into());
        }
        for (i, (bound, coeff)) in l.aar_table.iter().enumerate() {
            if !(*coeff > 0.0 && *coeff <= 1.5) {
                push(e.clone(), "aar-coefficient-range", format!("band {i} coefficient {coeff}"));
            }
            if i > 0 && !(*bound > l.aar_table[i - 1].0) {
                push(e.clone(), "aar-bounds-increasing", format!("band {i} bound {bound}"));
            }
        }
        if l.aar_table.last().is_some_and(|(b, _)| *b != f64::INFINITY) {
            push(e.clone(), "aar-covers-infinity", "last band bound must be inf".into());
        }
    }

    let mut ids = HashSet::new();
    for id in system.resource_ids() {
        if !ids.insert(id) {
            push(format!("resource {id}"), "unique-resource-id", "duplicate id".into());
        }
    }
    let check_bus = |entity: &str, bus: u32, out: &mut Vec<Violation>| {
        if !bus_ids.contains(&bus) {
            out.push(Violation {
                entity: entity.to_string(),
                rule: "bus-exists",
                detail: format!("bus {bus} not declared"),
            });
        }
    };

    for g in &system.thermal {
        let e = format!("thermal {}", g.id);
        check_bus(&e, g.bus, &mut out);
        if !(g.g_min >= 0.0 && g.g_min <= g.g_max) {
            out.push(v(&e, "thermal-limits", format!("g_min {} g_max {}", g.g_min, g.g_max)));
        }
        if g.min_up < 1 || g.min_down < 1 {
            out.push(v(&e, "min-times-positive", format!("UT {} DT {}", g.min_up, g.min_down)));
        }
        if g.cost_curve.is_empty() {
            out.push(v(&e, "cost-curve-nonempty", "no blocks".into()));
        }
        let mut prev = (0.0, f64::NEG_INFINITY);
        for (k, &(bp, slope)) in g.cost_curve.iter().enumerate() {
            if !(bp > prev.0) {
                out.push(v(&e, "cost-breakpoints-increasing", format!("block {k} breakpoint {bp}")));
            }
            if slope < prev.1 {
                out.push(v(&e, "cost-convexity", format!("block {k} slope {slope} below previous")));
            }
            prev = (bp, slope);
        }
        if g.cost_curve.last().is_some_and(|(bp, _)| *bp < g.g_max) {
            out.push(v(&e, "cost-curve-covers-gmax", format!("last breakpoint below g_max {}", g.g_max)));
        }
        let (lo, hi) = g.forced_outage.range;
        if !(lo < hi) || g.forced_outage.coeffs.iter().any(|c| !c.is_finite()) {
            out.push(v(&e, "for-polynomial", "invalid range or coefficients".into()));
        }
    }
    for s in &system.solar {
        let e = format!("solar {}", s.id);
        check_bus(&e, s.bus, &mut out);
        if !(s.capacity > 0.0) {
            out.push(v(&e, "positive-nameplate", format!("capacity {}", s.capacity)));
        }
        if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
            out.push(v(&e, "efficiency-range", format!("efficiency {}", s.efficiency)));
        }
        if !(s.temp_coeff >= 0.0) {
            out.push(v(&e, "temp-coeff-nonnegative", format!("alpha {}", s.temp_coeff)));
        }
    }
    for w in &system.wind {
        let e = format!("wind {}", w.id);
        check_bus(&e, w.bus, &mut out);
        if !(w.capacity > 0.0) {
            out.push(v(&e, "positive-nameplate", format!("capacity {}", w.capacity)));
        }
        if !(w.efficiency > 0.0 && w.efficiency <= 1.0) {
            out.push(v(&e, "efficiency-range", format!("efficiency {}", w.efficiency)));
        }
        if !(0.0 < w.cut_in && w.cut_in < w.rated && w.rated < w.cut_out) {
            out.push(v(
                &e,
                "wind-speed-ordering",
                format!("cut-in {} rated {} cut-out {}", w.cut_in, w.rated, w.cut_out),
            ));
        }
        if w.site < 1 {
            out.push(v(&e, "wind-site-index", "site index is 1-based".into()));
        }
    }
    for b in &system.storage {
        let e = format!("storage {}", b.id);
        check_bus(&e, b.bus, &mut out);
        if !(0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0) {
            out.push(v(&e, "soc-limits", format!("soc_min {} soc_max {}", b.soc_min, b.soc_max)));
        }
        if !(b.eta_charge > 0.0 && b.eta_charge <= 1.0 && b.eta_discharge > 0.0 && b.eta_discharge <= 1.0) {
            out.push(v(&e, "efficiency-range", format!("eta {} / {}", b.eta_charge, b.eta_discharge)));
        }
        if !(b.energy_mwh > 0.0 && b.charge_max >= 0.0 && b.discharge_max >= 0.0) {
            out.push(v(&e, "storage-ratings", "energy must be positive, power nonnegative".into()));
        }
        if !(b.initial_soc >= b.soc_min && b.initial_soc <= b.soc_max) {
            out.push(v(&e, "initial-soc-range", format!("initial SOC {}", b.initial_soc)));
        }
    }

    if bus_ids.contains(&system.slack_bus) {
        let comps = connected_components(system);
        for comp in comps.iter().skip(1) {
            out.push(v(
                "network",
                "network-connected",
                format!("buses {comp:?} are isolated from the slack bus"),
            ));
        }
    }
    out
}

fn v(entity: &str, rule: &'static str, detail: String) -> Violation {
    Violation {
        entity: entity.to_string(),
        rule,
        detail,
    }
}

/// Injection-shift factors, `lines × buses`, from→to positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PtdfMatrix {
    pub bus_ids: Vec<u32>,
    pub line_ids: Vec<u32>,
    pub matrix: DMatrix<f64>,
}

impl PtdfMatrix {
    pub fn factor(&self, line: usize, bus: usize) -> f64 {
        self.matrix[(line, bus)]
    }

    /// Line flows for a nodal injection vector ordered like `bus_ids`.
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        (0..self.line_ids.len())
            .map(|l| {
                injections
                    .iter()
                    .enumerate()
                    .map(|(n, p)| self.matrix[(l, n)] * p)
                    .sum()
            })
            .collect()
    }
}

/// PTDF from the slack-reduced DC susceptance matrix.
pub fn build_ptdf(system: &PowerSystem) -> Result<PtdfMatrix, GridError> {
    let index = system.bus_index();
    let slack = *index.get(&system.slack_bus).ok_or(GridError::UnknownBus {
        bus: system.slack_bus,
        entity: "slack".into(),
    })?;
    for l in &system.lines {
        if !(l.reactance > 0.0) {
            return Err(GridError::BadReactance {
                line: l.id,
                reactance: l.reactance,
            });
        }
        for end in [l.from_bus, l.to_bus] {
            if !index.contains_key(&end) {
                return Err(GridError::UnknownBus {
                    bus: end,
                    entity: format!("line {}", l.id),
                });
            }
        }
    }
    let comps = connected_components(system);
    if let Some(isolated) = comps.get(1) {
        return Err(GridError::Disconnected {
            component: isolated.clone(),
        });
    }

    let n = system.buses.len();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for l in &system.lines {
        let (f, t) = (index[&l.from_bus], index[&l.to_bus]);
        let y = 1.0 / l.reactance;
        b[(f, f)] += y;
        b[(t, t)] += y;
        b[(f, t)] -= y;
        b[(t, f)] -= y;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let reduced = b.select_rows(&keep).select_columns(&keep);
    let inv = reduced.lu().try_inverse().ok_or(GridError::Singular)?;
    let mut x = DMatrix::<f64>::zeros(n, n);
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            x[(i, j)] = inv[(ri, rj)];
        }
    }
    let mut matrix = DMatrix::<f64>::zeros(system.lines.len(), n);
    for (li, l) in system.lines.iter().enumerate() {
        let (f, t) = (index[&l.from_bus], index[&l.to_bus]);
        for k in 0..n {
            matrix[(li, k)] = if k == slack {
                0.0
            } else {
                (x[(f, k)] - x[(t, k)]) / l.reactance
            };
        }
    }
    Ok(PtdfMatrix {
        bus_ids: system.buses.iter().map(|b| b.id).collect(),
        line_ids: system.lines.iter().map(|l| l.id).collect(),
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_bus() -> PowerSystem {
        PowerSystem {
            slack_bus: 1,
            buses: vec![
                Bus { id: 1, load_weight: 0.5 },
                Bus { id: 2, load_weight: 0.5 },
            ],
            lines: vec![TransmissionLine {
                id: 1,
                from_bus: 1,
                to_bus: 2,
                reactance: 0.1,
                capacity: 100.0,
                aar_table: vec![(25.0, 1.0), (f64::INFINITY, 0.9)],
            }],
            thermal: vec![],
            solar: vec![],
            wind: vec![],
            storage: vec![],
        }
    }

    #[test]
    fn two_bus_full_transfer() {
        let p = build_ptdf(&two_bus()).unwrap();
        assert_eq!(p.factor(0, 0), 0.0);
        assert!((p.factor(0, 1).abs() - 1.0).abs() < 1e-12);
        // injecting at bus 2 and withdrawing at the slack flows to→from
        assert!(p.factor(0, 1) < 0.0);
    }

    #[test]
    fn ratings_follow_bands() {
        let l = &two_bus().lines[0];
        assert_eq!(line_rating(l, 10.0), 100.0);
        assert_eq!(line_rating(l, 40.0), 90.0);
        assert_eq!(line_rating(l, 25.0), 100.0);
    }

    #[test]
    fn weight_sum_violation_is_reported_once() {
        let mut s = two_bus();
        s.buses[1].load_weight = 0.4;
        let v = validate_system(&s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, "load-weight-sum");
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let mut s = two_bus();
        s.buses.push(Bus { id: 3, load_weight: 0.0 });
        match build_ptdf(&s) {
            Err(GridError::Disconnected { component }) => assert_eq!(component, vec![3]),
            other => panic!("{other:?}"),
        }
        assert!(validate_system(&s).iter().any(|v| v.rule == "network-connected"));
    }

    #[test]
    fn zero_reactance_is_rejected() {
        let mut s = two_bus();
        s.lines[0].reactance = 0.0;
        assert!(matches!(build_ptdf(&s), Err(GridError::BadReactance { .. })));
    }

    #[test]
    fn toml_roundtrip() {
        let s = two_bus();
        let text = s.to_toml();
        assert!(text.contains("inf"));
        assert_eq!(PowerSystem::from_toml(&text).unwrap(), s);
    }
}
