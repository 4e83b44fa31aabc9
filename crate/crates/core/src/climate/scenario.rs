use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::archive::{hours_in_month, HistoricalArchive};
use super::trend::{LoadTempRegression, TrendModel};

/// Shifts every hour by the month's warming trend over `y* − y`.
pub fn adjust_temperature(temps: &[f64], beta_month: f64, y: i32, y_star: i32) -> Vec<f64> {
    let delta = beta_month * (y_star - y) as f64;
    temps.iter().map(|t| t + delta).collect()
}

/// Adds the regression-implied load change, clamping at zero.
/// Returns the adjusted series and the number of clamped hours.
pub fn adjust_demand(
    demand: &[f64],
    temp_sampled: &[f64],
    temp_adjusted: &[f64],
    regression: &LoadTempRegression,
) -> Result<(Vec<f64>, usize), String> {
    if demand.len() != temp_sampled.len() || demand.len() != temp_adjusted.len() {
        return Err(format!(
            "length mismatch: demand {}, sampled temps {}, adjusted temps {}",
            demand.len(),
            temp_sampled.len(),
            temp_adjusted.len()
        ));
    }
    let mut clamped = 0;
    let out = demand
        .iter()
        .zip(temp_sampled.iter().zip(temp_adjusted))
        .map(|(d, (ts, ta))| {
            let v = if ts == ta {
                *d
            } else {
                d + (regression.eval(*ta) - regression.eval(*ts))
            };
            if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok((out, clamped))
}

/// Hourly storm-hit probability, clamped at zero.
pub fn hurricane_probability(
    count_month: u32,
    beta_hurr: f64,
    y: i32,
    y_star: i32,
    n_years: usize,
    hours_month: usize,
) -> f64 {
    if n_years == 0 || hours_month == 0 {
        return 0.0;
    }
    let expected = count_month as f64 + (y_star - y) as f64 * beta_hurr;
    (expected / (n_years as f64 * hours_month as f64)).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HurricaneDraw {
    /// Per hour of the month, index 0 is hour 1.
    pub flags: Vec<bool>,
    /// `(t_hit, total duration h)` for each successful trial, 1-based hours.
    pub hits: Vec<(usize, f64)>,
}

/// Marks `[ceil(t − D/2), floor(t + D/2)] ∩ [1, T]` for a hit at 1-based `t`.
pub fn mark_window(flags: &mut [bool], t_hit: usize, duration: f64) {
    let total = flags.len() as f64;
    let lo = (t_hit as f64 - duration / 2.0).ceil().max(1.0);
    let hi = (t_hit as f64 + duration / 2.0).floor().min(total);
    if lo > hi {
        return;
    }
    for h in lo as usize..=hi as usize {
        flags[h - 1] = true;
    }
}

/// One Bernoulli trial per hour; each hit opens a window of
/// `max(0, N(μ, σ)) + Buff` hours centered on the hit.
pub fn sample_hurricane_flags<R: Rng>(
    month: u32,
    y: i32,
    y_star: i32,
    trend: &TrendModel,
    hours: usize,
    rng: &mut R,
) -> HurricaneDraw {
    let m = month as usize - 1;
    let stats = &trend.hurricane;
    let p = hurricane_probability(stats.counts[m], stats.beta_hurr, y, y_star, stats.n_years, hours);
    let (mu, sigma) = (stats.mean_hours[m], stats.std_hours[m]);
    let normal = (sigma > 0.0).then(|| Normal::new(mu, sigma).expect("finite parameters"));
    let mut flags = vec![false; hours];
    let mut hits = Vec::new();
    for t in 1..=hours {
        if rng.random::<f64>() < p {
            let raw = match &normal {
                Some(n) => n.sample(rng),
                None => mu,
            };
            let duration = raw.max(0.0) + trend.buff_hours;
            mark_window(&mut flags, t, duration);
            hits.push((t, duration));
        }
    }
    HurricaneDraw { flags, hits }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProfile {
    pub index: usize,
    pub month: u32,
    pub eval_year: i32,
    pub source_year: i32,
    pub shift_days: u32,
    pub master_seed: u64,
    /// Climate-adjusted air temperature, °C.
    pub temp: Vec<f64>,
    pub ghi: Vec<f64>,
    /// One series per wind site.
    pub wind: Vec<Vec<f64>>,
    /// Climate-adjusted system demand, MW.
    pub demand: Vec<f64>,
    pub hurricane: Vec<bool>,
    pub clamped_hours: usize,
}

impl ScenarioProfile {
    pub fn hours(&self) -> usize {
        self.demand.len()
    }

    pub fn peak_demand(&self) -> f64 {
        self.demand.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub master_seed: u64,
    pub month: u32,
    pub eval_year: i32,
    pub scenarios: Vec<ScenarioProfile>,
}

impl ScenarioSet {
    pub fn peak_demand(&self) -> f64 {
        self.scenarios
            .iter()
            .map(ScenarioProfile::peak_demand)
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let sites = self.scenarios.first().map_or(0, |s| s.wind.len());
        write!(f, "scenario,hour,temp_c,ghi_wm2")?;
        for s in 1..=sites {
            write!(f, ",wind_ms_site{s}")?;
        }
        writeln!(f, ",demand_mw,hurricane")?;
        for s in &self.scenarios {
            for h in 0..s.hours() {
                write!(f, "{},{},{:?},{:?}", s.index, h + 1, s.temp[h], s.ghi[h])?;
                for site in &s.wind {
                    write!(f, ",{:?}", site[h])?;
                }
                writeln!(f, ",{:?},{}", s.demand[h], u8::from(s.hurricane[h]))?;
            }
        }
        f.flush()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplingOptions {
    pub forced_year: Option<i32>,
    pub forced_shift: Option<u32>,
}

/// Counter-based substream for scenario `index` of a set seeded with `master`.
pub fn scenario_rng(master: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng
}

/// Stretches or truncates a month slice to `target` hours, padding with
/// copies of its final day.
fn fit_length(series: &[f64], target: usize) -> Vec<f64> {
    let mut out: Vec<f64> = series.iter().copied().take(target).collect();
    while out.len() < target {
        let day_start = series.len().saturating_sub(24);
        let k = (out.len() - series.len()) % 24;
        out.push(series[(day_start + k).min(series.len() - 1)]);
    }
    out
}

/// Draws `count` climate-adjusted monthly scenarios. Every scenario owns a
/// substream of the master seed so results do not depend on evaluation order.
pub fn sample_scenarios(
    archive: &HistoricalArchive,
    trend: &TrendModel,
    month: u32,
    eval_year: i32,
    count: usize,
    master_seed: u64,
    options: &SamplingOptions,
) -> ScenarioSet {
    assert!(!archive.years.is_empty(), "archive must not be empty");
    let target = hours_in_month(eval_year, month);
    let scenarios = (0..count)
        .map(|index| {
            let mut rng = scenario_rng(master_seed, index);
            let drawn_year = archive.years[rng.random_range(0..archive.years.len())].year;
            let drawn_shift = rng.random_range(0..=12u32);
            let source_year = options.forced_year.unwrap_or(drawn_year);
            let shift_days = options.forced_shift.unwrap_or(drawn_shift);
            let ys = archive.year(source_year).expect("forced year exists in archive");

            let range = HistoricalArchive::month_range(source_year, month);
            let temp_raw = fit_length(&ys.temp[range.clone()], target);
            let ghi = fit_length(&ys.ghi[range.clone()], target);
            let wind = ys.wind.iter().map(|w| fit_length(&w[range.clone()], target)).collect();
            let n = ys.load.len();
            let shifted: Vec<f64> = range
                .clone()
                .map(|h| ys.load[(h + 24 * shift_days as usize) % n])
                .collect();
            let load = fit_length(&shifted, target);

            let beta = trend.beta_tau[month as usize - 1];
            let temp = adjust_temperature(&temp_raw, beta, source_year, eval_year);
            let (demand, clamped_hours) = adjust_demand(&load, &temp_raw, &temp, &trend.load_temp)
                .expect("series share the month length");
            let storms = sample_hurricane_flags(month, source_year, eval_year, trend, target, &mut rng);
            ScenarioProfile {
                index,
                month,
                eval_year,
                source_year,
                shift_days,
                master_seed,
                temp,
                ghi,
                wind,
                demand,
                hurricane: storms.flags,
                clamped_hours,
            }
        })
        .collect();
    ScenarioSet {
        master_seed,
        month,
        eval_year,
        scenarios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_shift_cases() {
        assert_eq!(adjust_temperature(&[1.0, 2.0], 0.05, 2000, 2000), vec![1.0, 2.0]);
        let a = adjust_temperature(&[10.0], 0.05, 2000, 2010);
        assert!((a[0] - 10.5).abs() < 1e-12);
        let b = adjust_temperature(&[10.0], -0.1, 2000, 2007);
        assert!((b[0] - 9.3).abs() < 1e-12);
    }

    #[test]
    fn hurricane_probability_cases() {
        let p = hurricane_probability(2, 0.0108, 2000, 2007, 31, 720);
        assert!((p - 2.0756 / 22320.0).abs() < 1e-15);
        assert!((p - 9.30e-5).abs() < 5e-8);
        assert_eq!(hurricane_probability(0, 0.0, 2000, 2010, 31, 720), 0.0);
        assert_eq!(hurricane_probability(0, -1.0, 2000, 2010, 31, 720), 0.0);
    }

    #[test]
    fn window_truncates_at_month_start() {
        let mut flags = vec![false; 720];
        mark_window(&mut flags, 3, 10.0);
        let on: Vec<usize> = (1..=720).filter(|h| flags[h - 1]).collect();
        assert_eq!(on, (1..=8).collect::<Vec<_>>());
        let mut flags = vec![false; 10];
        mark_window(&mut flags, 10, 4.0);
        assert_eq!(flags.iter().filter(|f| **f).count(), 3);
    }

    #[test]
    fn length_fitting_repeats_last_day() {
        let s: Vec<f64> = (0..48).map(|h| h as f64).collect();
        let out = fit_length(&s, 72);
        assert_eq!(&out[48..], &s[24..48]);
        assert_eq!(fit_length(&s, 24), s[..24].to_vec());
    }

    #[test]
    fn demand_identity_at_zero_delta() {
        let r = LoadTempRegression {
            breakpoint: 15.0,
            left_slope: -10.0,
            right_slope: 50.0,
            level: 100.0,
            sse: 0.0,
        };
        let d = [10.0, 20.0];
        let t = [30.0, 5.0];
        assert_eq!(adjust_demand(&d, &t, &t, &r).unwrap().0, d.to_vec());
        let (up, _) = adjust_demand(&d, &[20.0, 21.0], &[20.5, 21.5], &r).unwrap();
        assert!((up[0] - 35.0).abs() < 1e-9 && (up[1] - 45.0).abs() < 1e-9);
        let (neg, clamped) = adjust_demand(&[1.0], &[20.0], &[10.0], &r).unwrap();
        assert_eq!((neg[0], clamped), (0.0, 1));
        assert!(adjust_demand(&d, &t[..1], &t, &r).is_err());
    }
}
