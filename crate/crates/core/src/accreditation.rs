//! Delta-method capacity accreditation over base, portfolio, first-in and
//! last-in system variants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use elcc_milp::SolverOptions;

use crate::climate::ScenarioSet;
use crate::grid::{PowerSystem, SolarFarm, StorageUnit, WindFarm};
use crate::reliability::{find_load_adjustment, LoadAdjustmentResult, ReliabilityError, SearchOptions};
use crate::uc::UcParams;

#[derive(Debug, Error)]
pub enum AccreditationError {
    #[error("FI and LI lists differ in length ({fi} vs {li})")]
    LengthMismatch { fi: usize, li: usize },
    #[error("no resources to accredit")]
    NoResources,
    #[error("resource `{0}` is not a solar, wind or storage unit of the system")]
    UnknownResource(String),
    #[error("resource `{0}` listed twice")]
    DuplicateResource(String),
    #[error("variant {variant}: {source}")]
    Variant {
        variant: String,
        #[source]
        source: ReliabilityError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Solar,
    Wind,
    Storage,
}

impl ResourceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ResourceClass::Solar => "solar",
            ResourceClass::Wind => "wind",
            ResourceClass::Storage => "storage",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AccreditedResource {
    Solar(SolarFarm),
    Wind(WindFarm),
    Storage(StorageUnit),
}

impl AccreditedResource {
    pub fn id(&self) -> &str {
        match self {
            AccreditedResource::Solar(r) => &r.id,
            AccreditedResource::Wind(r) => &r.id,
            AccreditedResource::Storage(r) => &r.id,
        }
    }

    pub fn bus(&self) -> u32 {
        match self {
            AccreditedResource::Solar(r) => r.bus,
            AccreditedResource::Wind(r) => r.bus,
            AccreditedResource::Storage(r) => r.bus,
        }
    }

    pub fn class(&self) -> ResourceClass {
        match self {
            AccreditedResource::Solar(_) => ResourceClass::Solar,
            AccreditedResource::Wind(_) => ResourceClass::Wind,
            AccreditedResource::Storage(_) => ResourceClass::Storage,
        }
    }

    /// MW; storage uses its discharge rating.
    pub fn nameplate(&self) -> f64 {
        match self {
            AccreditedResource::Solar(r) => r.capacity,
            AccreditedResource::Wind(r) => r.capacity,
            AccreditedResource::Storage(r) => r.discharge_max,
        }
    }

    fn add_to(&self, system: &mut PowerSystem) {
        match self {
            AccreditedResource::Solar(r) => system.solar.push(r.clone()),
            AccreditedResource::Wind(r) => system.wind.push(r.clone()),
            AccreditedResource::Storage(r) => system.storage.push(r.clone()),
        }
    }
}

/// Base system plus the resources under study.
#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioSpec {
    pub base: PowerSystem,
    pub resources: Vec<AccreditedResource>,
}

impl PortfolioSpec {
    /// Splits `system` into a base and accredited resources. With `ids` of
    /// `None` every solar, wind and storage unit is accredited; otherwise the
    /// listed ones are and the rest stay in the base.
    pub fn from_system(system: &PowerSystem, ids: Option<&[String]>) -> Result<Self, AccreditationError> {
        let mut wanted: Option<BTreeSet<&str>> = None;
        if let Some(list) = ids {
            let mut set = BTreeSet::new();
            for id in list {
                if !set.insert(id.as_str()) {
                    return Err(AccreditationError::DuplicateResource(id.clone()));
                }
            }
            wanted = Some(set);
        }
        let pick = |id: &str| wanted.as_ref().is_none_or(|w| w.contains(id));
        let mut base = system.clone();
        base.solar.clear();
        base.wind.clear();
        base.storage.clear();
        let mut resources = Vec::new();
        for r in &system.solar {
            if pick(&r.id) {
                resources.push(AccreditedResource::Solar(r.clone()));
            } else {
                base.solar.push(r.clone());
            }
        }
        for r in &system.wind {
            if pick(&r.id) {
                resources.push(AccreditedResource::Wind(r.clone()));
            } else {
                base.wind.push(r.clone());
            }
        }
        for r in &system.storage {
            if pick(&r.id) {
                resources.push(AccreditedResource::Storage(r.clone()));
            } else {
                base.storage.push(r.clone());
            }
        }
        if let Some(w) = &wanted {
            for id in w {
                if !resources.iter().any(|r| r.id() == *id) {
                    return Err(AccreditationError::UnknownResource(id.to_string()));
                }
            }
        }
        if resources.is_empty() {
            return Err(AccreditationError::NoResources);
        }
        Ok(Self { base, resources })
    }

    /// Base system plus the resources at `members`.
    pub fn system_with(&self, members: &BTreeSet<usize>) -> PowerSystem {
        let mut s = self.base.clone();
        for &j in members {
            self.resources[j].add_to(&mut s);
        }
        s
    }

    fn ids_of(&self, members: &BTreeSet<usize>) -> Vec<String> {
        let mut ids: Vec<String> = members.iter().map(|&j| self.resources[j].id().to_string()).collect();
        ids.sort();
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub pie: f64,
    pub iie: Vec<f64>,
    pub delta: f64,
    pub elcc: Vec<f64>,
    /// Set when the interactive effects sum to zero but PIE does not; PIE is
    /// then split in proportion to LI.
    pub degenerate: bool,
}

/// `PIE = PORT − ΣLI`, `IIE = FI − LI`, `δ = PIE/ΣIIE`, `ELCC = LI + δ·IIE`.
pub fn delta_allocate(port: f64, fi: &[f64], li: &[f64]) -> Result<Allocation, AccreditationError> {
    if fi.len() != li.len() {
        return Err(AccreditationError::LengthMismatch {
            fi: fi.len(),
            li: li.len(),
        });
    }
    if fi.is_empty() {
        return Err(AccreditationError::NoResources);
    }
    let sum_li: f64 = li.iter().sum();
    let pie = port - sum_li;
    let iie: Vec<f64> = fi.iter().zip(li).map(|(f, l)| f - l).collect();
    let sum_iie: f64 = iie.iter().sum();
    if sum_iie != 0.0 {
        let delta = pie / sum_iie;
        let elcc = li.iter().zip(&iie).map(|(l, i)| l + delta * i).collect();
        return Ok(Allocation {
            pie,
            iie,
            delta,
            elcc,
            degenerate: false,
        });
    }
    if pie == 0.0 {
        return Ok(Allocation {
            pie,
            iie,
            delta: 0.0,
            elcc: li.to_vec(),
            degenerate: false,
        });
    }
    let n = li.len() as f64;
    let elcc = li
        .iter()
        .map(|l| if sum_li != 0.0 { l + pie * l / sum_li } else { l + pie / n })
        .collect();
    Ok(Allocation {
        pie,
        iie,
        delta: 0.0,
        elcc,
        degenerate: true,
    })
}

/// Runs one load-adjustment search for a system variant.
pub trait SystemSearch: Sync {
    fn load_adjustment(&self, system: &PowerSystem) -> Result<LoadAdjustmentResult, ReliabilityError>;
    /// Identifies everything besides the system that influences results.
    fn fingerprint(&self) -> String;
}

/// Rolling-horizon UC search over a shared scenario set.
pub struct UcSearch<'a> {
    pub scenarios: &'a ScenarioSet,
    pub options: SearchOptions,
    pub params: UcParams,
    pub solver: SolverOptions,
}

impl SystemSearch for UcSearch<'_> {
    fn load_adjustment(&self, system: &PowerSystem) -> Result<LoadAdjustmentResult, ReliabilityError> {
        find_load_adjustment(system, self.scenarios, &self.options, &self.params, &self.solver)
    }

    fn fingerprint(&self) -> String {
        let ctx = serde_json::json!({
            "seed": self.scenarios.master_seed,
            "month": self.scenarios.month,
            "year": self.scenarios.eval_year,
            "scenarios": self.scenarios,
            "options": self.options,
            "params": self.params,
            "solver": self.solver,
        });
        sha256_hex(ctx.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Variant results keyed by search context, base system and the sorted ids
/// of the resources present.
#[derive(Default)]
pub struct VariantCache {
    entries: Mutex<BTreeMap<String, LoadAdjustmentResult>>,
    searches: AtomicUsize,
}

impl VariantCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Searches actually run (cache misses) so far.
    pub fn searches(&self) -> usize {
        self.searches.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(context: &str, base: &PowerSystem, ids: &[String]) -> String {
        let base_hash = sha256_hex(base.to_toml().as_bytes());
        format!("{context}/{base_hash}/{}", ids.join(","))
    }

    fn get(&self, key: &str) -> Option<LoadAdjustmentResult> {
        self.entries.lock().expect("cache lock").get(key).cloned()
    }

    fn put(&self, key: String, value: LoadAdjustmentResult) {
        self.entries.lock().expect("cache lock").insert(key, value);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum VariantKind {
    Base,
    Portfolio,
    FirstIn(usize),
    LastIn(usize),
}

fn variant_members(kind: &VariantKind, n: usize) -> BTreeSet<usize> {
    match kind {
        VariantKind::Base => BTreeSet::new(),
        VariantKind::Portfolio => (0..n).collect(),
        VariantKind::FirstIn(j) => [*j].into_iter().collect(),
        VariantKind::LastIn(j) => (0..n).filter(|k| k != j).collect(),
    }
}

fn variant_label(spec: &PortfolioSpec, kind: &VariantKind) -> String {
    match kind {
        VariantKind::Base => "base".into(),
        VariantKind::Portfolio => "portfolio".into(),
        VariantKind::FirstIn(j) => format!("first-in {}", spec.resources[*j].id()),
        VariantKind::LastIn(j) => format!("last-in {}", spec.resources[*j].id()),
    }
}

/// Resolves the load adjustment of every requested variant. Variants with the
/// same resource subset share one search; independent searches run in
/// parallel on the current rayon pool.
fn resolve_variants<S: SystemSearch>(
    spec: &PortfolioSpec,
    search: &S,
    cache: &VariantCache,
    kinds: &[VariantKind],
) -> Result<BTreeMap<VariantKind, LoadAdjustmentResult>, AccreditationError> {
    let context = search.fingerprint();
    let n = spec.resources.len();
    let mut unique: BTreeMap<Vec<String>, (BTreeSet<usize>, String)> = BTreeMap::new();
    let mut key_of: Vec<(VariantKind, Vec<String>)> = Vec::new();
    for kind in kinds {
        let members = variant_members(kind, n);
        let ids = spec.ids_of(&members);
        unique
            .entry(ids.clone())
            .or_insert_with(|| (members, variant_label(spec, kind)));
        key_of.push((kind.clone(), ids));
    }
    let jobs: Vec<(Vec<String>, BTreeSet<usize>, String)> = unique
        .into_iter()
        .map(|(ids, (members, label))| (ids, members, label))
        .collect();
    let solved: Vec<(Vec<String>, LoadAdjustmentResult)> = jobs
        .par_iter()
        .map(|(ids, members, label)| {
            let key = VariantCache::key(&context, &spec.base, ids);
            if let Some(hit) = cache.get(&key) {
                return Ok((ids.clone(), hit));
            }
            let system = spec.system_with(members);
            cache.searches.fetch_add(1, Ordering::SeqCst);
            log::info!("searching load adjustment for {label}");
            let result = search
                .load_adjustment(&system)
                .map_err(|source| AccreditationError::Variant {
                    variant: label.clone(),
                    source,
                })?;
            cache.put(key, result.clone());
            Ok((ids.clone(), result))
        })
        .collect::<Result<Vec<_>, AccreditationError>>()?;
    let by_ids: BTreeMap<Vec<String>, LoadAdjustmentResult> = solved.into_iter().collect();
    Ok(key_of
        .into_iter()
        .map(|(kind, ids)| (kind, by_ids[&ids].clone()))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub id: String,
    pub class: ResourceClass,
    pub bus: u32,
    pub nameplate_mw: f64,
    pub fi_mw: f64,
    pub li_mw: f64,
    pub iie_mw: f64,
    pub elcc_mw: f64,
    pub elcc_pct: f64,
    pub la_fi_mw: f64,
    pub la_li_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccreditationResult {
    pub resources: Vec<ResourceRow>,
    pub port_mw: f64,
    pub pie_mw: f64,
    pub delta: f64,
    pub degenerate: bool,
    pub la_base_mw: f64,
    pub la_port_mw: f64,
    pub target_lolh: f64,
    pub epsilon_la: f64,
    pub seed: u64,
    pub month: u32,
    pub eval_year: i32,
    pub scenarios: usize,
    /// Searches run for this result (cache misses).
    pub searches: usize,
}

impl AccreditationResult {
    pub fn sum_elcc(&self) -> f64 {
        self.resources.iter().map(|r| r.elcc_mw).sum()
    }

    pub fn sum_li(&self) -> f64 {
        self.resources.iter().map(|r| r.li_mw).sum()
    }
}

/// Context that is recorded with a result but does not affect the search.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyInfo {
    pub target_lolh: f64,
    pub epsilon_la: f64,
    pub seed: u64,
    pub month: u32,
    pub eval_year: i32,
    pub scenarios: usize,
}

impl StudyInfo {
    pub fn from_search(scenarios: &ScenarioSet, options: &SearchOptions) -> Self {
        Self {
            target_lolh: options.target_lolh,
            epsilon_la: options.epsilon_la,
            seed: scenarios.master_seed,
            month: scenarios.month,
            eval_year: scenarios.eval_year,
            scenarios: scenarios.scenarios.len(),
        }
    }
}

/// Delta-method accreditation: base, portfolio, FI and LI variants, all
/// against the same search context.
pub fn compute_elcc<S: SystemSearch>(
    spec: &PortfolioSpec,
    search: &S,
    cache: &VariantCache,
    info: &StudyInfo,
) -> Result<AccreditationResult, AccreditationError> {
    let n = spec.resources.len();
    if n == 0 {
        return Err(AccreditationError::NoResources);
    }
    let before = cache.searches();
    let mut kinds = vec![VariantKind::Base, VariantKind::Portfolio];
    kinds.extend((0..n).map(VariantKind::FirstIn));
    kinds.extend((0..n).map(VariantKind::LastIn));
    let la = resolve_variants(spec, search, cache, &kinds)?;
    let la_base = la[&VariantKind::Base].la;
    let la_port = la[&VariantKind::Portfolio].la;
    let port = la_port - la_base;
    let fi: Vec<f64> = (0..n).map(|j| la[&VariantKind::FirstIn(j)].la - la_base).collect();
    let li: Vec<f64> = (0..n).map(|j| la_port - la[&VariantKind::LastIn(j)].la).collect();
    let alloc = delta_allocate(port, &fi, &li)?;
    let resources = spec
        .resources
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let nameplate = r.nameplate();
            ResourceRow {
                id: r.id().to_string(),
                class: r.class(),
                bus: r.bus(),
                nameplate_mw: nameplate,
                fi_mw: fi[j],
                li_mw: li[j],
                iie_mw: alloc.iie[j],
                elcc_mw: alloc.elcc[j],
                elcc_pct: if nameplate > 0.0 { 100.0 * alloc.elcc[j] / nameplate } else { 0.0 },
                la_fi_mw: la[&VariantKind::FirstIn(j)].la,
                la_li_mw: la[&VariantKind::LastIn(j)].la,
            }
        })
        .collect();
    Ok(AccreditationResult {
        resources,
        port_mw: port,
        pie_mw: alloc.pie,
        delta: alloc.delta,
        degenerate: alloc.degenerate,
        la_base_mw: la_base,
        la_port_mw: la_port,
        target_lolh: info.target_lolh,
        epsilon_la: info.epsilon_la,
        seed: info.seed,
        month: info.month,
        eval_year: info.eval_year,
        scenarios: info.scenarios,
        searches: cache.searches() - before,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiMarginal {
    pub id: String,
    pub li_mw: f64,
}

/// Last-in marginal ELCC of every resource: `LA_Port − LA_(Port−j)`.
pub fn compute_li_marginal<S: SystemSearch>(
    spec: &PortfolioSpec,
    search: &S,
    cache: &VariantCache,
) -> Result<Vec<LiMarginal>, AccreditationError> {
    let n = spec.resources.len();
    if n == 0 {
        return Err(AccreditationError::NoResources);
    }
    let mut kinds = vec![VariantKind::Portfolio];
    kinds.extend((0..n).map(VariantKind::LastIn));
    let la = resolve_variants(spec, search, cache, &kinds)?;
    let la_port = la[&VariantKind::Portfolio].la;
    Ok(spec
        .resources
        .iter()
        .enumerate()
        .map(|(j, r)| LiMarginal {
            id: r.id().to_string(),
            li_mw: la_port - la[&VariantKind::LastIn(j)].la,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_resource_hand_case() {
        let a = delta_allocate(100.0, &[60.0, 70.0], &[40.0, 50.0]).unwrap();
        assert_eq!(a.pie, 10.0);
        assert_eq!(a.iie, vec![20.0, 20.0]);
        assert_eq!(a.delta, 0.25);
        assert_eq!(a.elcc, vec![45.0, 55.0]);
    }

    #[test]
    fn single_resource_identity() {
        let a = delta_allocate(42.0, &[42.0], &[42.0]).unwrap();
        assert_eq!((a.pie, a.delta, a.elcc[0], a.degenerate), (0.0, 0.0, 42.0, false));
    }

    #[test]
    fn degenerate_split_keeps_portfolio() {
        let a = delta_allocate(100.0, &[30.0, 60.0], &[30.0, 60.0]).unwrap();
        assert!(a.degenerate);
        assert!((a.elcc.iter().sum::<f64>() - 100.0).abs() < 1e-12);
        assert!((a.elcc[1] / a.elcc[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            delta_allocate(1.0, &[1.0], &[]),
            Err(AccreditationError::LengthMismatch { fi: 1, li: 0 })
        ));
    }
}
