//! Deterministic synthetic systems and weather/load archives sized for the
//! bundled solver.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::climate::{hours_in_month, write_archive, ArchivePaths, HistoricalArchive, HurricaneEvent, YearSeries};
use crate::grid::{
    validate_system, Bus, PowerSystem, SolarFarm, StorageUnit, ThermalGenerator, TransmissionLine, Violation,
    WindFarm,
};
use crate::resources::ForPolynomial;

const MAX_NETWORK_ATTEMPTS: usize = 64;

/// Monthly mean air temperature, °C, January first.
const MONTH_TEMP: [f64; 12] = [0.5, 1.5, 6.0, 11.5, 17.0, 22.0, 25.0, 24.0, 20.0, 13.5, 8.0, 2.5];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("no connected network after {0} attempts; raise line_density")]
    Disconnected(usize),
    #[error("invalid fixture spec: {0}")]
    BadSpec(String),
    #[error("generated system fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("cannot write fixture files: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    pub seed: u64,
    pub buses: usize,
    /// Probability of a line between any pair of buses.
    pub line_density: f64,
    pub thermal_units: usize,
    pub solar_farms: usize,
    pub wind_farms: usize,
    pub storage_units: usize,
    /// Places the cheapest unit behind weak lines so exports bind.
    pub congestion: bool,
    /// Thermal units without minimum output, up/down times or transition
    /// costs.
    pub simple_units: bool,
    pub peak_load: f64,
    pub first_year: i32,
    pub years: usize,
    pub wind_sites: usize,
    /// Injected temperature drift, °C/yr.
    pub beta_tau: f64,
    /// Mean storm count per year.
    pub storm_rate: f64,
    /// Injected trend of annual storm counts, events/yr.
    pub storm_trend: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            buses: 3,
            line_density: 0.7,
            thermal_units: 3,
            solar_farms: 1,
            wind_farms: 1,
            storage_units: 1,
            congestion: false,
            simple_units: false,
            peak_load: 300.0,
            first_year: 1990,
            years: 31,
            wind_sites: 1,
            beta_tau: 0.05,
            storm_rate: 1.5,
            storm_trend: 0.0108,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub system: PowerSystem,
    pub archive: HistoricalArchive,
}

/// Files written by [`write_fixture`].
#[derive(Clone, Debug, PartialEq)]
pub struct FixturePaths {
    pub system: PathBuf,
    pub archive: ArchivePaths,
}

pub fn generate_fixture(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    if spec.buses == 0 || spec.thermal_units == 0 || spec.years == 0 {
        return Err(FixtureError::BadSpec("need at least one bus, thermal unit and year".into()));
    }
    if spec.wind_sites == 0 && spec.wind_farms > 0 {
        return Err(FixtureError::BadSpec("wind farms need at least one wind site".into()));
    }
    if !(spec.peak_load > 0.0) {
        return Err(FixtureError::BadSpec(format!("peak load {}", spec.peak_load)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let system = generate_system(spec, &mut rng)?;
    let archive = generate_archive(spec, &mut rng);
    Ok(Fixture { system, archive })
}

pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<FixturePaths, FixtureError> {
    std::fs::create_dir_all(dir)?;
    let paths = FixturePaths {
        system: dir.join("system.toml"),
        archive: ArchivePaths {
            weather: dir.join("weather.csv"),
            load: dir.join("load.csv"),
            hurricanes: Some(dir.join("hurricanes.csv")),
        },
    };
    std::fs::write(&paths.system, fixture.system.to_toml())?;
    write_archive(&fixture.archive, &paths.archive)?;
    Ok(paths)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let other = if a == v { b } else if b == v { a } else { continue };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn random_edges<R: Rng>(spec: &FixtureSpec, rng: &mut R) -> Result<Vec<(usize, usize)>, FixtureError> {
    let n = spec.buses;
    for _ in 0..MAX_NETWORK_ATTEMPTS {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < spec.line_density {
                    edges.push((a, b));
                }
            }
        }
        if connected(n, &edges) {
            return Ok(edges);
        }
    }
    Err(FixtureError::Disconnected(MAX_NETWORK_ATTEMPTS))
}

pub fn generate_system<R: Rng>(spec: &FixtureSpec, rng: &mut R) -> Result<PowerSystem, FixtureError> {
    let n = spec.buses;
    let edges = random_edges(spec, rng)?;
    let remote = spec.congestion && n > 1;

    let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    if remote {
        raw[n - 1] = 0.05;
    }
    let total: f64 = raw.iter().sum();
    let buses: Vec<Bus> = raw
        .iter()
        .enumerate()
        .map(|(i, w)| Bus {
            id: i as u32 + 1,
            load_weight: w / total,
        })
        .collect();

    let peak = spec.peak_load;
    let remote_edges = edges.iter().filter(|(a, b)| *a == n - 1 || *b == n - 1).count().max(1);
    let lines = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let weak = remote && (a == n - 1 || b == n - 1);
            TransmissionLine {
                id: i as u32 + 1,
                from_bus: a as u32 + 1,
                to_bus: b as u32 + 1,
                reactance: rng.random_range(0.05..0.2),
                capacity: if weak {
                    (0.12 * peak / remote_edges as f64).round()
                } else {
                    (rng.random_range(0.6..0.9) * peak).round()
                },
                aar_table: vec![(30.0, 1.0), (f64::INFINITY, 0.9)],
            }
        })
        .collect();

    let unit_cap = (1.05 * peak / spec.thermal_units as f64).round();
    let mut thermal: Vec<ThermalGenerator> = (0..spec.thermal_units)
        .map(|i| {
            let base = 20.0 + 10.0 * i as f64 + rng.random_range(0.0..5.0);
            let half = (unit_cap / 2.0).round();
            ThermalGenerator {
                id: format!("G{}", i + 1),
                bus: rng.random_range(0..n) as u32 + 1,
                g_min: (0.2 * unit_cap).round(),
                g_max: unit_cap,
                min_up: rng.random_range(2..=4),
                min_down: rng.random_range(2..=4),
                startup_cost: (rng.random_range(2.0..6.0) * unit_cap).round(),
                shutdown_cost: (0.5 * unit_cap).round(),
                cost_curve: vec![(half, base), (unit_cap, base + 8.0)],
                forced_outage: ForPolynomial {
                    coeffs: [0.03, 0.0, 4e-5, 0.0, 0.0],
                    range: (-20.0, 40.0),
                },
            }
        })
        .collect();
    if spec.simple_units {
        for g in &mut thermal {
            g.g_min = 0.0;
            g.min_up = 1;
            g.min_down = 1;
            g.startup_cost = 0.0;
            g.shutdown_cost = 0.0;
        }
    }
    if remote {
        thermal[0].bus = n as u32;
        thermal[0].cost_curve.iter_mut().for_each(|b| b.1 = 5.0);
    }

    let res_cap = (0.2 * peak).round();
    let solar = (0..spec.solar_farms)
        .map(|i| SolarFarm {
            id: format!("S{}", i + 1),
            bus: rng.random_range(0..n) as u32 + 1,
            capacity: res_cap,
            noct: 45.0,
            temp_coeff: 0.004,
            efficiency: 0.95,
            cost: 1.0,
        })
        .collect();
    let wind = (0..spec.wind_farms)
        .map(|i| wind_farm(&format!("W{}", i + 1), rng.random_range(0..n) as u32 + 1, res_cap, i % spec.wind_sites.max(1) + 1))
        .collect();
    let storage = (0..spec.storage_units)
        .map(|i| storage_unit(&format!("B{}", i + 1), rng.random_range(0..n) as u32 + 1, (0.1 * peak).round(), 4.0))
        .collect();

    let system = PowerSystem {
        slack_bus: 1,
        buses,
        lines,
        thermal,
        solar,
        wind,
        storage,
    };
    let violations = validate_system(&system);
    if violations.is_empty() {
        Ok(system)
    } else {
        Err(FixtureError::Invalid(violations))
    }
}

/// Single-block thermal unit with one-hour minimum times and free transitions.
pub fn thermal_unit(id: &str, bus: u32, g_min: f64, g_max: f64, cost: f64) -> ThermalGenerator {
    ThermalGenerator {
        id: id.to_string(),
        bus,
        g_min,
        g_max,
        min_up: 1,
        min_down: 1,
        startup_cost: 0.0,
        shutdown_cost: 0.0,
        cost_curve: vec![(g_max, cost)],
        forced_outage: ForPolynomial::default(),
    }
}

pub fn solar_farm(id: &str, bus: u32, capacity: f64) -> SolarFarm {
    SolarFarm {
        id: id.to_string(),
        bus,
        capacity,
        noct: 45.0,
        temp_coeff: 0.004,
        efficiency: 0.95,
        cost: 1.0,
    }
}

/// Cubic ramp from cut-in 3 m/s to rated 12 m/s, cut-out 25 m/s.
pub fn wind_farm(id: &str, bus: u32, capacity: f64, site: usize) -> WindFarm {
    let (ci, r) = (3.0_f64, 12.0_f64);
    let c3 = capacity / (r.powi(3) - ci.powi(3));
    WindFarm {
        id: id.to_string(),
        bus,
        capacity,
        efficiency: 0.95,
        cut_in: ci,
        rated: r,
        cut_out: 25.0,
        cubic: [c3, 0.0, 0.0, -c3 * ci.powi(3)],
        cost: 1.0,
        hurricane_exposed: true,
        site,
    }
}

pub fn storage_unit(id: &str, bus: u32, power: f64, duration_h: f64) -> StorageUnit {
    StorageUnit {
        id: id.to_string(),
        bus,
        energy_mwh: power * duration_h,
        charge_max: power,
        discharge_max: power,
        soc_min: 0.1,
        soc_max: 1.0,
        eta_charge: 0.95,
        eta_discharge: 0.95,
        charge_cost: 0.5,
        initial_soc: 0.5,
    }
}

/// Three buses on two lines: bus 1 (slack) and bus 2 carry the load, bus 3
/// hangs off bus 1 through a single line of `radial_capacity` MW and has no
/// load. `thermal_capacity` is split over two units at buses 1 and 2.
pub fn radial_three_bus(thermal_capacity: f64, radial_capacity: f64) -> PowerSystem {
    let line = |id, from_bus, to_bus, capacity| TransmissionLine {
        id,
        from_bus,
        to_bus,
        reactance: 0.1,
        capacity,
        aar_table: vec![(f64::INFINITY, 1.0)],
    };
    let half = thermal_capacity / 2.0;
    PowerSystem {
        slack_bus: 1,
        buses: vec![
            Bus { id: 1, load_weight: 0.6 },
            Bus { id: 2, load_weight: 0.4 },
            Bus { id: 3, load_weight: 0.0 },
        ],
        lines: vec![line(1, 1, 2, 10.0 * thermal_capacity), line(2, 1, 3, radial_capacity)],
        thermal: vec![thermal_unit("G1", 1, 0.0, half, 20.0), thermal_unit("G2", 2, 0.0, half, 30.0)],
        solar: vec![],
        wind: vec![],
        storage: vec![],
    }
}

/// Adjusts integer counts so the OLS slope against `0..n` lands within half
/// a unit step of `target`.
fn match_count_slope(counts: &mut [u32], target: f64) {
    let n = counts.len();
    if n < 2 {
        return;
    }
    let mean_x = (n as f64 - 1.0) / 2.0;
    let sxx: f64 = (0..n).map(|x| (x as f64 - mean_x).powi(2)).sum();
    let slope = |c: &[u32]| {
        let mean_y = c.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        (0..n).map(|x| (x as f64 - mean_x) * (c[x] as f64 - mean_y)).sum::<f64>() / sxx
    };
    for _ in 0..10 * n {
        let err = slope(counts) - target;
        let mut best: Option<(f64, usize, bool)> = None;
        for x in 0..n {
            let step = (x as f64 - mean_x) / sxx;
            for add in [true, false] {
                if !add && counts[x] == 0 {
                    continue;
                }
                let e = (err + if add { step } else { -step }).abs();
                if best.is_none_or(|(b, _, _)| e < b - 1e-15) {
                    best = Some((e, x, add));
                }
            }
        }
        match best {
            Some((e, x, add)) if e < err.abs() - 1e-15 => {
                if add {
                    counts[x] += 1;
                } else {
                    counts[x] -= 1;
                }
            }
            _ => break,
        }
    }
}

/// Diurnal activity in [0, 1], high from late morning to evening.
fn activity(hour: usize) -> f64 {
    let h = hour as f64;
    (0.5 - 0.5 * (2.0 * PI * (h - 3.0) / 24.0).cos()).powf(1.5)
}

pub fn generate_archive<R: Rng>(spec: &FixtureSpec, rng: &mut R) -> HistoricalArchive {
    let normal = |sd: f64| Normal::new(0.0, sd).expect("finite sd");
    let day_noise = normal(2.5);
    let hour_noise = normal(0.6);
    let load_noise = normal(0.01);
    let mut years = Vec::with_capacity(spec.years);
    let mut raw_loads = Vec::with_capacity(spec.years);
    for k in 0..spec.years {
        let year = spec.first_year + k as i32;
        let mut temp = Vec::new();
        let mut ghi = Vec::new();
        let mut wind = vec![Vec::new(); spec.wind_sites];
        let mut load = Vec::new();
        let mut anomaly = 0.0;
        for month in 1..=12u32 {
            let hours = hours_in_month(year, month);
            let days = hours / 24;
            let season = (2.0 * PI * (month as f64 - 4.0) / 12.0).sin();
            let mut noise: Vec<f64> = Vec::with_capacity(hours);
            for _ in 0..days {
                anomaly = 0.7 * anomaly + day_noise.sample(rng);
                for _ in 0..24 {
                    noise.push(anomaly + hour_noise.sample(rng));
                }
            }
            let mean_noise = noise.iter().sum::<f64>() / hours as f64;
            let half_day = 6.0 + 1.5 * season;
            let peak_ghi = 650.0 + 300.0 * season;
            let mut site_level: Vec<f64> = (0..spec.wind_sites).map(|_| 7.0 - 1.5 * season).collect();
            for day in 0..days {
                let date = NaiveDate::from_ymd_opt(year, month, day as u32 + 1).expect("valid date");
                let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
                let clearness = rng.random_range(0.35..1.0);
                for level in site_level.iter_mut() {
                    *level = (0.6 * *level + 0.4 * (7.0 - 1.5 * season) + rng.random_range(-2.0..2.0)).max(0.5);
                }
                for hour in 0..24 {
                    let idx = day * 24 + hour;
                    let diurnal = 5.0 * (2.0 * PI * (hour as f64 - 9.0) / 24.0).sin();
                    let t = MONTH_TEMP[month as usize - 1]
                        + spec.beta_tau * k as f64
                        + diurnal
                        + noise[idx]
                        - mean_noise;
                    temp.push(t);
                    let x = (hour as f64 + 0.5 - (12.5 - half_day)) / (2.0 * half_day);
                    let sun = if (0.0..1.0).contains(&x) { (PI * x).sin() } else { 0.0 };
                    ghi.push(peak_ghi * clearness * sun);
                    for (s, level) in site_level.iter().enumerate() {
                        let v = level * (1.0 + 0.15 * (2.0 * PI * (hour as f64 + 3.0 * s as f64) / 24.0).cos())
                            + rng.random_range(-0.8..0.8);
                        wind[s].push(v.max(0.0));
                    }
                    let coupling = 0.035 * (t - 15.5).max(0.0) + 0.012 * (15.5 - t).max(0.0);
                    let week = if weekend { -0.08 } else { 0.0 };
                    load.push(0.55 + coupling + 0.35 * activity(hour) + week + load_noise.sample(rng));
                }
            }
        }
        raw_loads.push(load);
        years.push(YearSeries {
            year,
            temp,
            ghi,
            wind,
            load: Vec::new(),
        });
    }
    let max_raw = raw_loads.iter().flatten().copied().fold(f64::MIN, f64::max);
    for (y, raw) in years.iter_mut().zip(raw_loads) {
        y.load = raw.into_iter().map(|v| (v / max_raw * spec.peak_load).max(0.0)).collect();
    }

    let mid = (spec.years as f64 - 1.0) / 2.0;
    let mut counts: Vec<u32> = (0..spec.years)
        .map(|k| (spec.storm_rate + spec.storm_trend * (k as f64 - mid)).round().max(0.0) as u32)
        .collect();
    match_count_slope(&mut counts, spec.storm_trend);
    let duration = Normal::new(18.0, 6.0).expect("finite");
    let months = [7u32, 8, 8, 9, 9, 9, 10];
    let mut hurricanes = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let month = *months.choose(rng).expect("nonempty");
            let d: f64 = duration.sample(rng);
            hurricanes.push(HurricaneEvent {
                year: spec.first_year + k as i32,
                month,
                duration_hours: (d.max(2.0) * 10.0).round() / 10.0,
            });
        }
    }
    HistoricalArchive::from_years(years, hurricanes)
}

/// Annual storm counts of an archive, in year order.
pub fn annual_storm_counts(archive: &HistoricalArchive) -> Vec<u32> {
    let years: BTreeSet<i32> = archive.year_numbers().into_iter().collect();
    years
        .iter()
        .map(|y| archive.hurricanes.iter().filter(|e| e.year == *y).count() as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::ols_slope;

    #[test]
    fn count_slope_is_matched() {
        let mut counts: Vec<u32> = (0..31).map(|x| (0.1 * x as f64).round() as u32).collect();
        match_count_slope(&mut counts, 0.1);
        let xs: Vec<f64> = (0..31).map(f64::from).collect();
        let ys: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        assert!((ols_slope(&xs, &ys) - 0.1).abs() < 1e-3);
    }

    #[test]
    fn default_spec_validates() {
        let spec = FixtureSpec {
            years: 1,
            ..FixtureSpec::default()
        };
        let f = generate_fixture(&spec).unwrap();
        assert!(validate_system(&f.system).is_empty());
        assert_eq!(f.archive.years[0].temp.len(), 8760);
    }

    #[test]
    fn sparse_network_gives_up() {
        let spec = FixtureSpec {
            buses: 4,
            line_density: 0.0,
            years: 1,
            ..FixtureSpec::default()
        };
        assert!(matches!(generate_fixture(&spec), Err(FixtureError::Disconnected(_))));
    }
}
