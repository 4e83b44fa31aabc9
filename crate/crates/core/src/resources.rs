//! Weather-to-power conversion for PV, wind and thermal units, and the
//! least-squares fits behind the wind power curve and the outage polynomial.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{SolarFarm, ThermalGenerator, WindFarm};

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("insolation must be nonnegative, got {0}")]
    NegativeInsolation(f64),
    #[error("wind speed must be nonnegative, got {0}")]
    NegativeWindSpeed(f64),
    #[error("fit needs at least {needed} distinct abscissae, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("least-squares system is rank deficient")]
    RankDeficient,
    #[error("fitted curve misses rated power by {gap_mw:.3} MW at rated speed (limit {limit_mw:.3} MW)")]
    ContinuityGap { gap_mw: f64, limit_mw: f64 },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// Quartic forced-outage rate in air temperature, `c0 + c1·τ + … + c4·τ⁴`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForPolynomial {
    pub coeffs: [f64; 5],
    /// Temperature hull of the fitting data; evaluation clamps to it.
    pub range: (f64, f64),
}

impl Default for ForPolynomial {
    fn default() -> Self {
        Self {
            coeffs: [0.0; 5],
            range: (-100.0, 100.0),
        }
    }
}

impl ForPolynomial {
    pub fn constant(rate: f64) -> Self {
        Self {
            coeffs: [rate, 0.0, 0.0, 0.0, 0.0],
            ..Self::default()
        }
    }

    pub fn eval(&self, air_temp: f64) -> f64 {
        let t = air_temp.clamp(self.range.0, self.range.1);
        horner(&self.coeffs, t).clamp(0.0, 1.0)
    }
}

/// Ascending-order polynomial evaluation.
fn horner(ascending: &[f64], x: f64) -> f64 {
    ascending.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn pv_cell_temperature(air_temp: f64, insolation: f64, noct: f64) -> Result<f64, ResourceError> {
    if insolation < 0.0 {
        return Err(ResourceError::NegativeInsolation(insolation));
    }
    Ok(air_temp + (noct - 20.0) / 800.0 * insolation)
}

pub fn pv_max_output(farm: &SolarFarm, air_temp: f64, insolation: f64) -> Result<f64, ResourceError> {
    let cell = pv_cell_temperature(air_temp, insolation, farm.noct)?;
    let out = farm.capacity
        * (insolation / 1000.0)
        * (1.0 - farm.temp_coeff * (cell - 25.0))
        * farm.efficiency;
    Ok(out.clamp(0.0, farm.capacity))
}

pub fn wind_max_output(farm: &WindFarm, speed: f64, hurricane_active: bool) -> Result<f64, ResourceError> {
    if speed < 0.0 {
        return Err(ResourceError::NegativeWindSpeed(speed));
    }
    let ceiling = farm.efficiency * farm.capacity;
    if hurricane_active && farm.hurricane_exposed {
        return Ok(0.0);
    }
    let out = if speed < farm.cut_in || speed >= farm.cut_out {
        0.0
    } else if speed < farm.rated {
        let [c3, c2, c1, c0] = farm.cubic;
        farm.efficiency * (((c3 * speed + c2) * speed + c1) * speed + c0)
    } else {
        ceiling
    };
    Ok(out.clamp(0.0, ceiling))
}

pub fn thermal_available_capacity(gen: &ThermalGenerator, air_temp: f64) -> f64 {
    gen.g_max * (1.0 - gen.forced_outage.eval(air_temp))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindPowerCurveFit {
    /// `[c3, c2, c1, c0]`.
    pub cubic: [f64; 4],
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForPolynomialFit {
    pub polynomial: ForPolynomial,
    pub rmse: f64,
}

fn distinct(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least-squares polynomial of `degree`, returned in ascending order.
/// Abscissae are mapped to [-1, 1] before solving and the coefficients are
/// expanded back afterwards.
fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>, ResourceError> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let n = xs.len();
    let a = DMatrix::from_fn(n, degree + 1, |i, j| ((xs[i] - mid) / half).powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(ResourceError::RankDeficient);
    }
    let scaled = svd.solve(&b, 0.0).map_err(|_| ResourceError::RankDeficient)?;
    // p(x) = Σ_j s_j ((x - mid)/half)^j expanded into powers of x.
    let mut out = vec![0.0; degree + 1];
    for j in 0..=degree {
        let coef = scaled[j] / half.powi(j as i32);
        for k in 0..=j {
            out[k] += coef * binomial(j, k) * (-mid).powi((j - k) as i32);
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn rmse(xs: &[f64], ys: &[f64], ascending: &[f64]) -> f64 {
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (horner(ascending, *x) - y).powi(2))
        .sum();
    (sse / xs.len() as f64).sqrt()
}

/// Cubic least-squares fit over the partial-load region `[v_ci, v_r)`.
///
/// `capacity` is the nameplate used for the continuity check at `v_r`.
pub fn fit_wind_power_curve(
    samples: &[(f64, f64)],
    cut_in: f64,
    rated: f64,
    capacity: f64,
) -> Result<WindPowerCurveFit, ResourceError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|(v, _)| *v >= cut_in && *v < rated)
        .copied()
        .unzip();
    let found = distinct(&xs);
    if found < 4 {
        return Err(ResourceError::TooFewSamples { needed: 4, found });
    }
    let asc = polyfit(&xs, &ys, 3)?;
    let gap = (horner(&asc, rated) - capacity).abs();
    let limit = 0.02 * capacity;
    if gap > limit {
        return Err(ResourceError::ContinuityGap {
            gap_mw: gap,
            limit_mw: limit,
        });
    }
    Ok(WindPowerCurveFit {
        cubic: [asc[3], asc[2], asc[1], asc[0]],
        rmse: rmse(&xs, &ys, &asc),
    })
}

pub fn fit_for_polynomial(samples: &[(f64, f64)]) -> Result<ForPolynomialFit, ResourceError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    let found = distinct(&xs);
    if found < 5 {
        return Err(ResourceError::TooFewSamples { needed: 5, found });
    }
    let asc = polyfit(&xs, &ys, 4)?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForPolynomialFit {
        polynomial: ForPolynomial {
            coeffs: [asc[0], asc[1], asc[2], asc[3], asc[4]],
            range: (lo, hi),
        },
        rmse: rmse(&xs, &ys, &asc),
    })
}

/// Reads a two-column sample file whose header must be exactly `expected`.
pub fn read_samples(path: &Path, expected: [&str; 2]) -> Result<Vec<(f64, f64)>, ResourceError> {
    let err = |message: String| ResourceError::File {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.len() != 2 || header[0] != *expected[0] || header[1] != *expected[1] {
        return Err(err(format!(
            "expected header `{},{}`, found `{}`",
            expected[0],
            expected[1],
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(format!("line {line}: {e}")))?;
        let parse = |k: usize| {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("line {line}: bad number in column {}", k + 1)))
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

pub fn read_power_curve(path: &Path) -> Result<Vec<(f64, f64)>, ResourceError> {
    read_samples(path, ["wind_speed_ms", "power_mw"])
}

pub fn read_for_samples(path: &Path) -> Result<Vec<(f64, f64)>, ResourceError> {
    read_samples(path, ["temp_c", "for_fraction"])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solar() -> SolarFarm {
        SolarFarm {
            id: "S1".into(),
            bus: 1,
            capacity: 100.0,
            noct: 45.0,
            temp_coeff: 0.004,
            efficiency: 0.95,
            cost: 0.0,
        }
    }

    pub(crate) fn wind() -> WindFarm {
        WindFarm {
            id: "W1".into(),
            bus: 1,
            capacity: 2000.0,
            efficiency: 0.97,
            cut_in: 3.0,
            rated: 12.0,
            cut_out: 25.0,
            cubic: [2000.0 / 1701.0, 0.0, 0.0, -27.0 * 2000.0 / 1701.0],
            cost: 0.0,
            hurricane_exposed: true,
            site: 1,
        }
    }

    #[test]
    fn cell_temperature_hand_cases() {
        assert_eq!(pv_cell_temperature(25.0, 0.0, 45.0).unwrap(), 25.0);
        assert!((pv_cell_temperature(25.0, 800.0, 45.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((pv_cell_temperature(-5.0, 400.0, 44.0).unwrap() - 7.0).abs() < 1e-12);
        assert!(pv_cell_temperature(0.0, -1.0, 45.0).is_err());
    }

    #[test]
    fn pv_hand_cases() {
        let s = solar();
        assert_eq!(pv_max_output(&s, 25.0, 0.0).unwrap(), 0.0);
        let expected = 100.0 * 0.8 * (1.0 - 0.004 * 25.0) * 0.95;
        assert!((pv_max_output(&s, 25.0, 800.0).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 68.4).abs() < 1e-9);
        let hot = SolarFarm { temp_coeff: 0.05, ..s };
        assert_eq!(pv_max_output(&hot, 60.0, 1000.0).unwrap(), 0.0);
    }

    #[test]
    fn wind_regions() {
        let w = wind();
        assert_eq!(wind_max_output(&w, 0.0, false).unwrap(), 0.0);
        assert!((wind_max_output(&w, 18.5, false).unwrap() - 1940.0).abs() < 1e-9);
        assert_eq!(wind_max_output(&w, 25.0, false).unwrap(), 0.0);
        assert_eq!(wind_max_output(&w, 12.0 - 1e-9, true).unwrap(), 0.0);
        assert!(wind_max_output(&w, -0.1, false).is_err());
    }

    #[test]
    fn for_derating() {
        let mut g = crate::fixture::thermal_unit("G1", 1, 0.0, 300.0, 20.0);
        assert_eq!(thermal_available_capacity(&g, 35.0), 300.0);
        g.forced_outage = ForPolynomial::constant(1.0);
        assert_eq!(thermal_available_capacity(&g, 35.0), 0.0);
    }

    #[test]
    fn for_evaluation_clamps_to_hull() {
        let p = ForPolynomial {
            coeffs: [0.0, 0.0, 0.001, 0.0, 0.0],
            range: (-10.0, 30.0),
        };
        assert_eq!(p.eval(50.0), p.eval(30.0));
        assert_eq!(p.eval(-40.0), p.eval(-10.0));
    }

    #[test]
    fn fit_needs_enough_points() {
        let s = [(4.0, 1.0), (5.0, 2.0), (6.0, 3.0)];
        assert!(matches!(
            fit_wind_power_curve(&s, 3.0, 12.0, 100.0),
            Err(ResourceError::TooFewSamples { .. })
        ));
        let s = [(1.0, 0.1), (1.0, 0.1), (2.0, 0.1), (3.0, 0.1), (3.0, 0.2)];
        assert!(fit_for_polynomial(&s).is_err());
    }
}
