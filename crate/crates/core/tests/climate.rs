use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use elcc_core::climate::{
    adjust_demand, adjust_temperature, fit_trends, hurricane_probability, ingest_archive, sample_hurricane_flags,
    sample_scenarios, write_archive, ArchivePaths, HurricaneStats, LoadTempRegression, SamplingOptions, TrendModel,
};
use elcc_core::fixture::{generate_fixture, FixtureSpec};

fn storm_model(count: u32, beta: f64, n_years: usize) -> TrendModel {
    let mut counts = [0; 12];
    counts[8] = count;
    TrendModel {
        beta_tau: [0.0; 12],
        buff_hours: 12.0,
        hurricane: HurricaneStats {
            beta_hurr: beta,
            counts,
            mean_hours: [30.0; 12],
            std_hours: [10.0; 12],
            n_years,
        },
        load_temp: LoadTempRegression {
            breakpoint: 15.0,
            left_slope: -5.0,
            right_slope: 10.0,
            level: 200.0,
            sse: 0.0,
        },
    }
}

#[test]
fn injected_trends_are_recovered() {
    let spec = FixtureSpec {
        beta_tau: 0.05,
        storm_trend: 0.1,
        storm_rate: 3.0,
        ..FixtureSpec::default()
    };
    let fixture = generate_fixture(&spec).unwrap();
    let model = fit_trends(&fixture.archive, 12.0).unwrap();
    for (m, b) in model.beta_tau.iter().enumerate() {
        assert!((b - 0.05).abs() <= 1e-3, "month {}: {b}", m + 1);
    }
    assert!((model.hurricane.beta_hurr - 0.1).abs() <= 1e-3, "{}", model.hurricane.beta_hurr);
}

#[test]
fn archive_files_roundtrip_through_ingest() {
    let spec = FixtureSpec {
        years: 4,
        ..FixtureSpec::default()
    };
    let fixture = generate_fixture(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = ArchivePaths {
        weather: dir.path().join("weather.csv"),
        load: dir.path().join("load.csv"),
        hurricanes: Some(dir.path().join("hurricanes.csv")),
    };
    write_archive(&fixture.archive, &paths).unwrap();
    let back = ingest_archive(&paths).unwrap();
    assert_eq!(back.year_numbers(), fixture.archive.year_numbers());
    assert_eq!(back.hurricanes.len(), fixture.archive.hurricanes.len());
    for (a, b) in back.years.iter().zip(&fixture.archive.years) {
        let diff = a.temp.iter().zip(&b.temp).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 5e-5 + 1e-9, "temperature differs by {diff}");
    }
}

#[test]
fn temperature_and_demand_hand_cases() {
    let t = adjust_temperature(&[10.0, -3.0], 0.05, 2010, 2020);
    assert!((t[0] - 10.5).abs() < 1e-12 && (t[1] + 2.5).abs() < 1e-12);
    let reg = storm_model(0, 0.0, 30).load_temp;
    let demand = vec![180.0, 240.0, 0.5];
    let temps = vec![11.0, 22.0, 30.0];
    let (same, clamped) = adjust_demand(&demand, &temps, &temps, &reg).unwrap();
    assert_eq!(same, demand);
    assert_eq!(clamped, 0);
    let p = hurricane_probability(2, 0.0108, 2000, 2007, 31, 720);
    assert!((p - 9.30e-5).abs() < 5e-8);
}

#[test]
fn storm_hits_follow_the_hourly_rate() {
    let model = storm_model(20, 0.0, 30);
    let hours = 744;
    let p = hurricane_probability(20, 0.0, 2020, 2020, 30, hours);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let months = 1400;
    let hits: usize = (0..months)
        .map(|_| sample_hurricane_flags(9, 2020, 2020, &model, hours, &mut rng).hits.len())
        .sum();
    let n = (months * hours) as f64;
    let se = (n * p * (1.0 - p)).sqrt();
    assert!(n >= 1e6);
    assert!((hits as f64 - n * p).abs() <= 3.0 * se, "{hits} hits, expected {}", n * p);
}

#[test]
fn scenario_sets_are_reproducible_and_seed_sensitive() {
    let spec = FixtureSpec {
        years: 6,
        ..FixtureSpec::default()
    };
    let fixture = generate_fixture(&spec).unwrap();
    let model = fit_trends(&fixture.archive, 12.0).unwrap();
    let opts = SamplingOptions::default();
    let a = sample_scenarios(&fixture.archive, &model, 9, 2030, 4, 5, &opts);
    let b = sample_scenarios(&fixture.archive, &model, 9, 2030, 4, 5, &opts);
    let c = sample_scenarios(&fixture.archive, &model, 9, 2030, 4, 6, &opts);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.scenarios.iter().all(|s| s.hours() == 720));
    let first_three = sample_scenarios(&fixture.archive, &model, 9, 2030, 3, 5, &opts);
    assert_eq!(first_three.scenarios[..], a.scenarios[..3]);
}
