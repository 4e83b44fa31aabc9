use proptest::prelude::*;

use elcc_core::accreditation::{
    compute_elcc, compute_li_marginal, delta_allocate, PortfolioSpec, StudyInfo, SystemSearch, VariantCache,
};
use elcc_core::fixture::{radial_three_bus, solar_farm, storage_unit, wind_farm};
use elcc_core::grid::PowerSystem;
use elcc_core::reliability::{LoadAdjustmentResult, ReliabilityError};

/// LA as a closed-form function of the resources present.
struct AnalyticSearch;

impl SystemSearch for AnalyticSearch {
    fn load_adjustment(&self, system: &PowerSystem) -> Result<LoadAdjustmentResult, ReliabilityError> {
        let solar: f64 = system.solar.iter().map(|s| s.capacity).sum();
        let wind: f64 = system.wind.iter().map(|w| w.capacity).sum();
        let storage: f64 = system.storage.iter().map(|b| b.discharge_max).sum();
        let alone = 0.6 * storage + 0.3 * wind;
        let synergy = if solar > 0.0 && storage > 0.0 { 0.5 * storage.min(solar) } else { 0.0 };
        let la = 10.0 + alone + synergy;
        Ok(LoadAdjustmentResult {
            la,
            la_min: la,
            la_max: la,
            iterations: 1,
            expansions: 1,
            trace: vec![],
            converged: true,
            exact_hit: true,
        })
    }

    fn fingerprint(&self) -> String {
        "analytic".into()
    }
}

fn info() -> StudyInfo {
    StudyInfo {
        target_lolh: 0.2,
        epsilon_la: 1.0,
        seed: 1,
        month: 7,
        eval_year: 2030,
        scenarios: 1,
    }
}

fn portfolio() -> PowerSystem {
    let mut s = radial_three_bus(300.0, 300.0);
    s.solar.push(solar_farm("S1", 3, 80.0));
    s.wind.push(wind_farm("W1", 2, 50.0, 1));
    s.storage.push(storage_unit("B1", 1, 40.0, 4.0));
    s
}

#[test]
fn variants_are_searched_once_per_subset() {
    let system = portfolio();
    let cache = VariantCache::new();
    let one = PortfolioSpec::from_system(&system, Some(&["W1".to_string()])).unwrap();
    assert_eq!(compute_elcc(&one, &AnalyticSearch, &cache, &info()).unwrap().searches, 2);

    let cache = VariantCache::new();
    let all = PortfolioSpec::from_system(&system, None).unwrap();
    let r = compute_elcc(&all, &AnalyticSearch, &cache, &info()).unwrap();
    assert_eq!(r.searches, 8);
    let again = compute_elcc(&all, &AnalyticSearch, &cache, &info()).unwrap();
    assert_eq!(again.searches, 0);
    assert_eq!(again.resources, r.resources);
    let li = compute_li_marginal(&all, &AnalyticSearch, &cache).unwrap();
    assert_eq!(cache.searches(), 8);
    for (m, row) in li.iter().zip(&r.resources) {
        assert_eq!(m.id, row.id);
        assert_eq!(m.li_mw, row.li_mw);
    }
}

#[test]
fn complementary_pair_double_counts_under_last_in() {
    let mut system = portfolio();
    system.wind.clear();
    let spec = PortfolioSpec::from_system(&system, None).unwrap();
    let r = compute_elcc(&spec, &AnalyticSearch, &VariantCache::new(), &info()).unwrap();
    assert!((r.port_mw - 44.0).abs() < 1e-12);
    assert!(r.sum_li() > r.port_mw + 1.0);
    assert!((r.sum_elcc() - r.port_mw).abs() < 1e-9);
    let solar = r.resources.iter().find(|x| x.id == "S1").unwrap();
    assert_eq!(solar.fi_mw, 0.0);
    assert!((solar.li_mw - 20.0).abs() < 1e-12);
}

#[test]
fn unknown_and_duplicate_ids_are_rejected() {
    let system = portfolio();
    assert!(PortfolioSpec::from_system(&system, Some(&["X9".to_string()])).is_err());
    let dup = ["S1".to_string(), "S1".to_string()];
    assert!(PortfolioSpec::from_system(&system, Some(&dup)).is_err());
    let empty = radial_three_bus(100.0, 100.0);
    assert!(PortfolioSpec::from_system(&empty, None).is_err());
}

fn triple() -> impl Strategy<Value = (f64, Vec<(f64, f64)>)> {
    (
        -500.0f64..2000.0,
        prop::collection::vec((-200.0f64..800.0, -200.0f64..800.0), 1..8),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn allocation_sums_to_portfolio((port, pairs) in triple()) {
        let (fi, li): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = delta_allocate(port, &fi, &li).unwrap();
        let sum: f64 = a.elcc.iter().sum();
        prop_assert!((sum - port).abs() <= 1e-9 * port.abs().max(1.0) * 10.0,
            "sum {sum} port {port} degenerate {}", a.degenerate);
    }

    #[test]
    fn allocation_scales_linearly((port, pairs) in triple(), k in 0.1f64..10.0) {
        let (fi, li): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = delta_allocate(port, &fi, &li).unwrap();
        let fk: Vec<f64> = fi.iter().map(|x| k * x).collect();
        let lk: Vec<f64> = li.iter().map(|x| k * x).collect();
        let b = delta_allocate(k * port, &fk, &lk).unwrap();
        for (x, y) in a.elcc.iter().zip(&b.elcc) {
            prop_assert!((k * x - y).abs() <= 1e-7 * (k * x).abs().max(1.0));
        }
    }

    #[test]
    fn allocation_follows_resource_order((port, pairs) in triple(), rot in 0usize..8) {
        let (fi, li): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = fi.len();
        let r = rot % n;
        let mut fr = fi.clone();
        let mut lr = li.clone();
        fr.rotate_left(r);
        lr.rotate_left(r);
        let a = delta_allocate(port, &fi, &li).unwrap();
        let b = delta_allocate(port, &fr, &lr).unwrap();
        let mut expect = a.elcc.clone();
        expect.rotate_left(r);
        for (x, y) in expect.iter().zip(&b.elcc) {
            prop_assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0));
        }
    }
}
