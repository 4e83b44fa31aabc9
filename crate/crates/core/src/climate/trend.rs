use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::archive::HistoricalArchive;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("trend fit needs at least {needed} years, archive has {found}")]
    TooFewYears { needed: usize, found: usize },
    #[error("load-temperature fit needs at least 1000 hourly pairs, found {0}")]
    TooFewPairs(usize),
    #[error("temperature spread {0:.2} °C is below the 5 °C minimum")]
    DegenerateSpread(f64),
    #[error("no breakpoint candidate produced a solvable fit")]
    NoBreakpoint,
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Per-month OLS slope of monthly mean temperature against year, °C/yr.
pub fn fit_monthly_temp_trend(archive: &HistoricalArchive) -> Result<[f64; 12], FitError> {
    if archive.years.len() < 3 {
        return Err(FitError::TooFewYears {
            needed: 3,
            found: archive.years.len(),
        });
    }
    let xs: Vec<f64> = archive.years.iter().map(|y| y.year as f64).collect();
    let mut out = [0.0; 12];
    for (m, slot) in out.iter_mut().enumerate() {
        let month = m as u32 + 1;
        let means: Vec<f64> = archive
            .years
            .iter()
            .map(|y| {
                let r = HistoricalArchive::month_range(y.year, month);
                let n = r.len() as f64;
                y.temp[r].iter().sum::<f64>() / n
            })
            .collect();
        *slot = ols_slope(&xs, &means);
    }
    Ok(out)
}

/// Continuous two-segment load-temperature curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadTempRegression {
    pub breakpoint: f64,
    /// MW/°C below the breakpoint (heating side).
    pub left_slope: f64,
    /// MW/°C above the breakpoint (cooling side).
    pub right_slope: f64,
    /// Load at the breakpoint, MW.
    pub level: f64,
    #[serde(default)]
    pub sse: f64,
}

impl LoadTempRegression {
    pub fn eval(&self, temp: f64) -> f64 {
        let d = temp - self.breakpoint;
        self.level + self.left_slope * d.min(0.0) + self.right_slope * d.max(0.0)
    }

    pub fn left_intercept(&self) -> f64 {
        self.level - self.left_slope * self.breakpoint
    }

    pub fn right_intercept(&self) -> f64 {
        self.level - self.right_slope * self.breakpoint
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Grid search over breakpoints on multiples of 0.5 °C between the 5th and
/// 95th temperature percentiles; each candidate is a 3-parameter least-squares
/// hinge fit.
pub fn fit_hinge(temps: &[f64], loads: &[f64]) -> Result<LoadTempRegression, FitError> {
    if temps.len() < 1000 {
        return Err(FitError::TooFewPairs(temps.len()));
    }
    let mut sorted = temps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let spread = sorted[sorted.len() - 1] - sorted[0];
    if spread < 5.0 {
        return Err(FitError::DegenerateSpread(spread));
    }
    let (p5, p95) = (percentile(&sorted, 0.05), percentile(&sorted, 0.95));
    let mut best: Option<LoadTempRegression> = None;
    let mut k = (p5 * 2.0).ceil() as i64;
    while k as f64 * 0.5 <= p95 {
        let b = k as f64 * 0.5;
        k += 1;
        let mut ata = Matrix3::<f64>::zeros();
        let mut aty = Vector3::<f64>::zeros();
        for (&t, &y) in temps.iter().zip(loads) {
            let d = t - b;
            let row = Vector3::new(1.0, d.min(0.0), d.max(0.0));
            ata += row * row.transpose();
            aty += row * y;
        }
        let Some(sol) = ata.lu().solve(&aty) else {
            continue;
        };
        if !sol.iter().all(|v| v.is_finite()) {
            continue;
        }
        let cand = LoadTempRegression {
            breakpoint: b,
            left_slope: sol[1],
            right_slope: sol[2],
            level: sol[0],
            sse: 0.0,
        };
        let sse: f64 = temps
            .iter()
            .zip(loads)
            .map(|(&t, &y)| (y - cand.eval(t)).powi(2))
            .sum();
        if best.as_ref().is_none_or(|b| sse < b.sse) {
            best = Some(LoadTempRegression { sse, ..cand });
        }
    }
    best.ok_or(FitError::NoBreakpoint)
}

pub fn fit_load_temp_regression(archive: &HistoricalArchive) -> Result<LoadTempRegression, FitError> {
    let temps: Vec<f64> = archive.years.iter().flat_map(|y| y.temp.iter().copied()).collect();
    let loads: Vec<f64> = archive.years.iter().flat_map(|y| y.load.iter().copied()).collect();
    fit_hinge(&temps, &loads)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurricaneStats {
    /// OLS slope of annual event counts, events/yr.
    pub beta_hurr: f64,
    /// Historical event count per month.
    pub counts: [u32; 12],
    /// Mean and sample standard deviation of event durations per month, h.
    pub mean_hours: [f64; 12],
    pub std_hours: [f64; 12],
    pub n_years: usize,
}

pub fn fit_hurricane_model(archive: &HistoricalArchive) -> HurricaneStats {
    let years = archive.year_numbers();
    let mut counts = [0u32; 12];
    let mut durations: [Vec<f64>; 12] = Default::default();
    for ev in &archive.hurricanes {
        let m = ev.month as usize - 1;
        counts[m] += 1;
        durations[m].push(ev.duration_hours);
    }
    let annual: Vec<f64> = years
        .iter()
        .map(|y| archive.hurricanes.iter().filter(|e| e.year == *y).count() as f64)
        .collect();
    let xs: Vec<f64> = years.iter().map(|y| *y as f64).collect();
    let beta_hurr = if xs.len() >= 2 { ols_slope(&xs, &annual) } else { 0.0 };
    let mut mean_hours = [0.0; 12];
    let mut std_hours = [0.0; 12];
    for m in 0..12 {
        let d = &durations[m];
        if d.is_empty() {
            continue;
        }
        let mu = d.iter().sum::<f64>() / d.len() as f64;
        mean_hours[m] = mu;
        if d.len() >= 2 {
            let var = d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            std_hours[m] = var.sqrt();
        }
    }
    HurricaneStats {
        beta_hurr,
        counts,
        mean_hours,
        std_hours,
        n_years: years.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendModel {
    /// °C/yr per calendar month, January first.
    pub beta_tau: [f64; 12],
    pub buff_hours: f64,
    pub hurricane: HurricaneStats,
    pub load_temp: LoadTempRegression,
}

impl TrendModel {
    pub fn with_beta_tau(mut self, beta: f64) -> Self {
        self.beta_tau = [beta; 12];
        self
    }

    pub fn with_beta_hurr(mut self, beta: f64) -> Self {
        self.hurricane.beta_hurr = beta;
        self
    }

    pub fn with_buff(mut self, hours: f64) -> Self {
        self.buff_hours = hours;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("trend model serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub fn fit_trends(archive: &HistoricalArchive, buff_hours: f64) -> Result<TrendModel, FitError> {
    Ok(TrendModel {
        beta_tau: fit_monthly_temp_trend(archive)?,
        buff_hours,
        hurricane: fit_hurricane_model(archive),
        load_temp: fit_load_temp_regression(archive)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert!((ols_slope(&xs, &ys) - 2.0).abs() < 1e-12);
        assert_eq!(ols_slope(&[1.0, 1.0], &[2.0, 3.0]), 0.0);
    }

    #[test]
    fn regression_is_continuous() {
        let r = LoadTempRegression {
            breakpoint: 18.0,
            left_slope: -30.0,
            right_slope: 50.0,
            level: 1000.0,
            sse: 0.0,
        };
        let eps = 1e-9;
        assert!((r.eval(18.0 - eps) - r.eval(18.0 + eps)).abs() < 1e-6);
        assert!((r.left_intercept() + r.left_slope * 18.0 - 1000.0).abs() < 1e-9);
        assert!((r.right_intercept() + r.right_slope * 18.0 - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn exact_v_shape_is_recovered() {
        let temps: Vec<f64> = (0..2000).map(|i| -5.0 + 40.0 * i as f64 / 1999.0).collect();
        let loads: Vec<f64> = temps
            .iter()
            .map(|t| 1000.0 + if *t < 18.0 { -20.0 * (t - 18.0) } else { 60.0 * (t - 18.0) })
            .collect();
        let r = fit_hinge(&temps, &loads).unwrap();
        assert!((r.breakpoint - 18.0).abs() <= 0.5);
        assert!((r.left_slope + 20.0).abs() < 0.2);
        assert!((r.right_slope - 60.0).abs() < 0.6);
    }

    #[test]
    fn narrow_spread_is_rejected() {
        let temps: Vec<f64> = (0..1500).map(|i| 20.0 + (i % 40) as f64 * 0.1).collect();
        let loads = vec![1.0; 1500];
        assert!(matches!(fit_hinge(&temps, &loads), Err(FitError::DegenerateSpread(_))));
        assert!(matches!(fit_hinge(&temps[..10], &loads[..10]), Err(FitError::TooFewPairs(10))));
    }
}
