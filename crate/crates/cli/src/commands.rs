use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use elcc_core::accreditation::{
    compute_elcc, compute_li_marginal, sha256_hex, AccreditationResult, PortfolioSpec, ResourceRow, StudyInfo,
    UcSearch, VariantCache,
};
use elcc_core::climate::{
    fit_trends, ingest_archive, sample_scenarios, ArchivePaths, HistoricalArchive, SamplingOptions, ScenarioSet,
    TrendModel,
};
use elcc_core::fixture::{generate_fixture, write_fixture};
use elcc_core::grid::{build_ptdf, load_system, validate_system, PowerSystem};
use elcc_core::reliability::{find_load_adjustment, lolh_from_shed, SearchOptions};
use elcc_core::uc::{
    build_uc_model, check_solution_feasibility, prepare_inputs, solve_with_inputs, InitialConditions, UcWindow,
};
use elcc_milp::{export_model, SolverMode};

use crate::config::StudyConfig;
use crate::error::CliError;

pub const VERSION: &str = concat!("elcc ", env!("CARGO_PKG_VERSION"));

/// What a command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Report {
    fn wrote(&mut self, path: PathBuf) {
        self.files.push(path);
    }
}

fn output_dir(cfg: &StudyConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.paths.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| CliError::other("output", format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::other("output", format!("{}: {e}", path.display())))
}

pub fn load_study_system(cfg: &StudyConfig) -> Result<PowerSystem, CliError> {
    let path = cfg.paths.require("system")?;
    let system = load_system(path).map_err(|e| CliError::ingest("system", e))?;
    let violations = validate_system(&system);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::ingest("system", format!("{}: {}", path.display(), list.join("; "))));
    }
    Ok(system)
}

pub fn load_study_archive(cfg: &StudyConfig) -> Result<HistoricalArchive, CliError> {
    let paths = ArchivePaths {
        weather: cfg.paths.require("weather")?.to_path_buf(),
        load: cfg.paths.require("load")?.to_path_buf(),
        hurricanes: cfg.paths.hurricanes.clone(),
    };
    ingest_archive(&paths).map_err(|e| CliError::ingest("archive", e))
}

fn apply_overrides(cfg: &StudyConfig, mut model: TrendModel) -> TrendModel {
    if let Some(b) = cfg.overrides.beta_tau {
        model = model.with_beta_tau(b);
    }
    if let Some(b) = cfg.overrides.beta_hurr {
        model = model.with_beta_hurr(b);
    }
    if let Some(b) = cfg.overrides.buff_hours {
        model = model.with_buff(b);
    }
    model
}

/// Trend model from `paths.trends` if set, else fitted from the archive;
/// overrides are applied either way.
pub fn study_trends(cfg: &StudyConfig, archive: &HistoricalArchive) -> Result<TrendModel, CliError> {
    let model = match &cfg.paths.trends {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::ingest("trends", format!("{}: {e}", p.display())))?;
            TrendModel::from_toml(&text).map_err(|e| CliError::ingest("trends", format!("{}: {e}", p.display())))?
        }
        None => fit_trends(archive, cfg.study.buff_hours).map_err(|e| CliError::ingest("fit-trends", e))?,
    };
    Ok(apply_overrides(cfg, model))
}

pub fn study_scenarios(cfg: &StudyConfig, archive: &HistoricalArchive, trend: &TrendModel) -> ScenarioSet {
    let year = cfg.study.year.unwrap_or_else(|| archive.last_year());
    sample_scenarios(
        archive,
        trend,
        cfg.study.month,
        year,
        cfg.study.samples,
        cfg.study.seed,
        &SamplingOptions::default(),
    )
}

pub fn search_options(cfg: &StudyConfig) -> SearchOptions {
    SearchOptions {
        target_lolh: cfg.study.target_lolh,
        epsilon_la: cfg.study.epsilon_la,
        shed_tolerance: cfg.study.shed_tolerance,
        mode: cfg.study.search_mode,
        ..SearchOptions::default()
    }
}

fn reject_export(cfg: &StudyConfig, command: &str) -> Result<(), CliError> {
    if cfg.solver.mode == SolverMode::Export {
        return Err(CliError::Config(format!(
            "`{command}` needs solved schedules; export mode only writes models (use export-lp)"
        )));
    }
    Ok(())
}

pub fn fit_trends_cmd(cfg: &StudyConfig) -> Result<Report, CliError> {
    let archive = load_study_archive(cfg)?;
    let fitted = fit_trends(&archive, cfg.study.buff_hours).map_err(|e| CliError::ingest("fit-trends", e))?;
    let model = apply_overrides(cfg, fitted);
    let out = output_dir(cfg)?;
    let path = out.join("trends.toml");
    write_file(&path, &model.to_toml())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "years {}..{}", archive.first_year(), archive.last_year());
    let _ = writeln!(summary, "interpolated hours {}", archive.interpolated_hours());
    let _ = writeln!(summary, "beta_tau {:?}", model.beta_tau);
    let lt = &model.load_temp;
    let _ = writeln!(
        summary,
        "load-temperature breakpoint {} C, slopes {} / {} MW/C, sse {}",
        lt.breakpoint, lt.left_slope, lt.right_slope, lt.sse
    );
    let _ = writeln!(summary, "beta_hurr {} events/yr", model.hurricane.beta_hurr);
    Ok(Report {
        files: vec![path],
        summary,
    })
}

pub fn sample_cmd(cfg: &StudyConfig) -> Result<Report, CliError> {
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let set = study_scenarios(cfg, &archive, &trend);
    let path = output_dir(cfg)?.join("scenarios.csv");
    set.write_csv(&path).map_err(|e| CliError::other("output", format!("{}: {e}", path.display())))?;
    let clamped: usize = set.scenarios.iter().map(|s| s.clamped_hours).sum();
    Ok(Report {
        files: vec![path],
        summary: format!(
            "{} scenarios for month {} of {}, {} clamped demand hours\n",
            set.scenarios.len(),
            set.month,
            set.eval_year,
            clamped
        ),
    })
}

pub fn uc_run_cmd(cfg: &StudyConfig, la: f64, only: Option<usize>) -> Result<Report, CliError> {
    if cfg.solver.mode == SolverMode::Export {
        return export_lp_cmd(cfg, la, only.unwrap_or(0), None);
    }
    let system = load_study_system(cfg)?;
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let set = study_scenarios(cfg, &archive, &trend);
    let ptdf = build_ptdf(&system).map_err(|e| CliError::ingest("system", e))?;
    let picked: Vec<usize> = match only {
        Some(i) if i < set.scenarios.len() => vec![i],
        Some(i) => return Err(CliError::Config(format!("scenario {i} out of range"))),
        None => (0..set.scenarios.len()).collect(),
    };
    let mut schedule = String::from(
        "scenario,hour,demand_mw,thermal_mw,solar_mw,wind_mw,storage_charge_mw,storage_discharge_mw,shed_mw,shed_flag\n",
    );
    let mut summary_csv = String::from("scenario,objective,shed_hours,violations\n");
    let mut summary = String::new();
    for i in picked {
        let inputs = prepare_inputs(&system, &set.scenarios[i]).map_err(|e| CliError::from_uc("uc-run", e))?;
        let sol = solve_with_inputs(&system, &ptdf, &inputs, la, &cfg.uc, &cfg.solver)
            .map_err(|e| CliError::from_uc("uc-run", e))?;
        let violations =
            check_solution_feasibility(&system, &ptdf, &inputs, &InitialConditions::cold_start(&system), la, &sol);
        for v in &violations {
            log::warn!("scenario {i}: {v}");
        }
        let shed_hours = sol.shed_system.iter().filter(|s| **s > cfg.study.shed_tolerance).count();
        for k in 0..sol.hours() {
            let sum = |rows: &[f64]| rows.iter().sum::<f64>();
            let thermal = sum(&sol.thermal.iter().map(|s| s.output[k]).collect::<Vec<_>>());
            let solar = sum(&sol.solar.iter().map(|s| s.output[k]).collect::<Vec<_>>());
            let wind = sum(&sol.wind.iter().map(|s| s.output[k]).collect::<Vec<_>>());
            let ch = sum(&sol.storage.iter().map(|s| s.charge[k]).collect::<Vec<_>>());
            let dis = sum(&sol.storage.iter().map(|s| s.discharge[k]).collect::<Vec<_>>());
            let _ = writeln!(
                schedule,
                "{i},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                sol.first_hour + k,
                sol.demand[k],
                thermal,
                solar,
                wind,
                ch,
                dis,
                sol.shed_system[k],
                u8::from(sol.shed_flag[k])
            );
        }
        let _ = writeln!(summary_csv, "{i},{:.6},{shed_hours},{}", sol.objective, violations.len());
        let _ = writeln!(
            summary,
            "scenario {i}: cost {:.2} $, {shed_hours} shed hours, {} violations",
            sol.objective,
            violations.len()
        );
    }
    let out = output_dir(cfg)?;
    let mut report = Report {
        summary,
        ..Report::default()
    };
    for (name, body) in [("uc_schedule.csv", &schedule), ("uc_summary.csv", &summary_csv)] {
        let p = out.join(name);
        write_file(&p, body)?;
        report.wrote(p);
    }
    Ok(report)
}

pub fn lole_cmd(cfg: &StudyConfig, la: f64, search: bool) -> Result<Report, CliError> {
    reject_export(cfg, "lole")?;
    let system = load_study_system(cfg)?;
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let set = study_scenarios(cfg, &archive, &trend);
    let out = output_dir(cfg)?;
    let mut report = Report::default();
    if search {
        let result = find_load_adjustment(&system, &set, &search_options(cfg), &cfg.uc, &cfg.solver)
            .map_err(|e| CliError::from_reliability("lole", e))?;
        let p = out.join("la_trace.csv");
        result.write_trace(&p).map_err(|e| CliError::other("output", e))?;
        report.wrote(p);
        report.summary = format!(
            "LA {:.3} MW, bracket [{:.3}, {:.3}], {} probes\n",
            result.la, result.la_min, result.la_max, result.iterations
        );
        return Ok(report);
    }
    let ptdf = build_ptdf(&system).map_err(|e| CliError::ingest("system", e))?;
    let mut shed = Vec::with_capacity(set.scenarios.len());
    for s in &set.scenarios {
        let inputs = prepare_inputs(&system, s).map_err(|e| CliError::from_uc("lole", e))?;
        let sol = solve_with_inputs(&system, &ptdf, &inputs, la, &cfg.uc, &cfg.solver)
            .map_err(|e| CliError::from_uc("lole", e))?;
        shed.push(sol.shed_system);
    }
    let views: Vec<&[f64]> = shed.iter().map(Vec::as_slice).collect();
    let lolh = lolh_from_shed(&views, cfg.study.shed_tolerance).map_err(|e| CliError::from_reliability("lole", e))?;
    let mut body = String::from("scenario,shed_hours\n");
    for (i, c) in lolh.counts.iter().enumerate() {
        let _ = writeln!(body, "{i},{c}");
    }
    let p = out.join("lolh.csv");
    write_file(&p, &body)?;
    report.wrote(p);
    report.summary = format!("mean LOLH {} h/month at LA {la} MW\n", lolh.mean);
    Ok(report)
}

#[derive(Serialize)]
struct Provenance {
    version: String,
    config_hash: String,
    seed: u64,
}

#[derive(Serialize)]
struct StudyBlock {
    month: u32,
    eval_year: i32,
    scenarios: usize,
    target_lolh: f64,
    epsilon_la: f64,
    port_mw: f64,
    pie_mw: f64,
    delta: f64,
    degenerate: bool,
    la_base_mw: f64,
    la_port_mw: f64,
    searches: usize,
}

#[derive(Serialize)]
struct ResultsFile<'a> {
    provenance: Provenance,
    study: StudyBlock,
    resources: &'a [ResourceRow],
}

fn provenance(cfg: &StudyConfig, system: &PowerSystem) -> Provenance {
    let body = format!("{}\n{}", cfg.hash_body(), system.to_toml());
    Provenance {
        version: VERSION.to_string(),
        config_hash: sha256_hex(body.as_bytes()),
        seed: cfg.study.seed,
    }
}

pub fn results_toml(cfg: &StudyConfig, system: &PowerSystem, r: &AccreditationResult) -> String {
    let file = ResultsFile {
        provenance: provenance(cfg, system),
        study: StudyBlock {
            month: r.month,
            eval_year: r.eval_year,
            scenarios: r.scenarios,
            target_lolh: r.target_lolh,
            epsilon_la: r.epsilon_la,
            port_mw: r.port_mw,
            pie_mw: r.pie_mw,
            delta: r.delta,
            degenerate: r.degenerate,
            la_base_mw: r.la_base_mw,
            la_port_mw: r.la_port_mw,
            searches: r.searches,
        },
        resources: &r.resources,
    };
    let stamp = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ");
    format!("# generated {stamp}\n{}", toml::to_string(&file).expect("results serialize"))
}

pub const ELCC_COLUMNS: &str = "id,class,bus,nameplate_mw,fi_mw,li_mw,iie_mw,elcc_mw,elcc_pct";
pub const COMPARISON_COLUMNS: &str = "id,li_marginal_mw,elcc_mw,difference_mw,difference_pct";
pub const SENSITIVITY_COLUMNS: &str = "parameter,value,resource,elcc_mw,li_mw,port_mw,roc";

pub fn elcc_csv(r: &AccreditationResult) -> String {
    let mut s = format!("{ELCC_COLUMNS}\n");
    for row in &r.resources {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.id,
            row.class.as_str(),
            row.bus,
            row.nameplate_mw,
            row.fi_mw,
            row.li_mw,
            row.iie_mw,
            row.elcc_mw,
            row.elcc_pct
        );
    }
    s
}

fn comparison_csv(r: &AccreditationResult, li: &[(String, f64)]) -> String {
    let mut s = format!("{COMPARISON_COLUMNS}\n");
    for (row, (_, li_mw)) in r.resources.iter().zip(li) {
        let diff = row.elcc_mw - li_mw;
        let pct = if *li_mw != 0.0 { 100.0 * diff / li_mw.abs() } else { 0.0 };
        let _ = writeln!(s, "{},{:.6},{:.6},{:.6},{:.6}", row.id, li_mw, row.elcc_mw, diff, pct);
    }
    s
}

/// Accreditation of `system` against `set`, sharing `cache` across calls.
pub fn accredit_system(
    cfg: &StudyConfig,
    system: &PowerSystem,
    set: &ScenarioSet,
    cache: &VariantCache,
) -> Result<(AccreditationResult, Vec<(String, f64)>), CliError> {
    let spec = PortfolioSpec::from_system(system, cfg.study.resources.as_deref())
        .map_err(|e| CliError::from_accreditation("accredit", e))?;
    let options = search_options(cfg);
    let info = StudyInfo::from_search(set, &options);
    let search = UcSearch {
        scenarios: set,
        options,
        params: cfg.uc.clone(),
        solver: cfg.solver.clone(),
    };
    let result = compute_elcc(&spec, &search, cache, &info).map_err(|e| CliError::from_accreditation("accredit", e))?;
    let li = compute_li_marginal(&spec, &search, cache)
        .map_err(|e| CliError::from_accreditation("accredit", e))?
        .into_iter()
        .map(|m| (m.id, m.li_mw))
        .collect();
    Ok((result, li))
}

pub fn accredit_cmd(cfg: &StudyConfig) -> Result<Report, CliError> {
    reject_export(cfg, "accredit")?;
    let system = load_study_system(cfg)?;
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let set = study_scenarios(cfg, &archive, &trend);
    let cache = VariantCache::new();
    let (result, li) = accredit_system(cfg, &system, &set, &cache)?;
    let out = output_dir(cfg)?;
    let mut report = Report::default();
    for (name, body) in [
        ("results.toml", results_toml(cfg, &system, &result)),
        ("elcc.csv", elcc_csv(&result)),
        ("comparison.csv", comparison_csv(&result, &li)),
    ] {
        let p = out.join(name);
        write_file(&p, &body)?;
        report.wrote(p);
    }
    let mut summary = format!(
        "PORT {:.3} MW, PIE {:.3} MW, delta {:.6}, {} searches\n",
        result.port_mw, result.pie_mw, result.delta, result.searches
    );
    for r in &result.resources {
        let _ = writeln!(summary, "  {} ELCC {:.3} MW ({:.2}%)", r.id, r.elcc_mw, r.elcc_pct);
    }
    report.summary = summary;
    Ok(report)
}

pub fn sensitivity_cmd(cfg: &StudyConfig) -> Result<Report, CliError> {
    reject_export(cfg, "sensitivity")?;
    let sweep = &cfg.sensitivity;
    let parameter = sweep
        .parameter
        .clone()
        .ok_or_else(|| CliError::Config("sensitivity.parameter is not set".into()))?;
    if sweep.values.is_empty() {
        return Err(CliError::Config("sensitivity.values is empty".into()));
    }
    let system = load_study_system(cfg)?;
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let cache = VariantCache::new();
    let mut body = format!("{SENSITIVITY_COLUMNS}\n");
    match parameter.as_str() {
        "beta_tau" | "beta_hurr" => {
            for &v in &sweep.values {
                let t = if parameter == "beta_tau" {
                    trend.clone().with_beta_tau(v)
                } else {
                    trend.clone().with_beta_hurr(v)
                };
                let set = study_scenarios(cfg, &archive, &t);
                let (r, _) = accredit_system(cfg, &system, &set, &cache)?;
                for row in &r.resources {
                    let _ = writeln!(
                        body,
                        "{parameter},{v},{},{:.6},{:.6},{:.6},",
                        row.id, row.elcc_mw, row.li_mw, r.port_mw
                    );
                }
            }
        }
        "line_capacity_scale" => {
            if sweep.lines.is_empty() {
                return Err(CliError::Config("line_capacity_scale needs sensitivity.lines".into()));
            }
            for id in &sweep.lines {
                if !system.lines.iter().any(|l| l.id == *id) {
                    return Err(CliError::Config(format!("line {id} is not in the system")));
                }
            }
            let set = study_scenarios(cfg, &archive, &trend);
            let (base, _) = accredit_system(cfg, &system, &set, &cache)?;
            let listed: BTreeSet<u32> = sweep.lines.iter().copied().collect();
            let original: f64 = system.lines.iter().filter(|l| listed.contains(&l.id)).map(|l| l.capacity).sum();
            for &v in &sweep.values {
                let mut scaled = system.clone();
                for l in scaled.lines.iter_mut().filter(|l| listed.contains(&l.id)) {
                    l.capacity *= v;
                }
                let (r, _) = accredit_system(cfg, &scaled, &set, &cache)?;
                let added = original * (v - 1.0);
                let roc = if added != 0.0 {
                    format!("{:.6}", (r.port_mw - base.port_mw) / added)
                } else {
                    String::new()
                };
                for row in &r.resources {
                    let _ = writeln!(
                        body,
                        "{parameter},{v},{},{:.6},{:.6},{:.6},{roc}",
                        row.id, row.elcc_mw, row.li_mw, r.port_mw
                    );
                }
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep parameter `{other}` (expected beta_tau, beta_hurr or line_capacity_scale)"
            )))
        }
    }
    let p = output_dir(cfg)?.join("sensitivity.csv");
    write_file(&p, &body)?;
    Ok(Report {
        files: vec![p],
        summary: format!("{} sweep over {} values, {} searches\n", parameter, sweep.values.len(), cache.searches()),
    })
}

pub fn make_fixture_cmd(cfg: &StudyConfig) -> Result<Report, CliError> {
    let fixture = generate_fixture(&cfg.fixture).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = output_dir(cfg)?;
    let paths = write_fixture(&fixture, &dir).map_err(|e| CliError::other("make-fixture", e))?;
    let mut study = cfg.clone();
    study.paths.system = Some("system.toml".into());
    study.paths.weather = Some("weather.csv".into());
    study.paths.load = Some("load.csv".into());
    study.paths.hurricanes = Some("hurricanes.csv".into());
    study.paths.trends = None;
    study.paths.output = Some("results".into());
    let config_path = dir.join("elcc.toml");
    write_file(&config_path, &study.to_toml())?;
    let mut files = vec![paths.system, paths.archive.weather, paths.archive.load];
    files.extend(paths.archive.hurricanes);
    files.push(config_path);
    Ok(Report {
        files,
        summary: format!(
            "{} buses, {} lines, {} thermal units, {} archive years, {} storms\n",
            fixture.system.buses.len(),
            fixture.system.lines.len(),
            fixture.system.thermal.len(),
            fixture.archive.years.len(),
            fixture.archive.hurricanes.len()
        ),
    })
}

/// Writes the window model of one scenario; with `import` also reads an
/// external solution for it and reports its objective and worst violation.
pub fn export_lp_cmd(cfg: &StudyConfig, la: f64, scenario: usize, import: Option<&Path>) -> Result<Report, CliError> {
    let system = load_study_system(cfg)?;
    let archive = load_study_archive(cfg)?;
    let trend = study_trends(cfg, &archive)?;
    let set = study_scenarios(cfg, &archive, &trend);
    let profile = set
        .scenarios
        .get(scenario)
        .ok_or_else(|| CliError::Config(format!("scenario {scenario} out of range")))?;
    let ptdf = build_ptdf(&system).map_err(|e| CliError::ingest("system", e))?;
    let inputs = prepare_inputs(&system, profile).map_err(|e| CliError::from_uc("export-lp", e))?;
    let end = cfg.uc.window_hours.min(inputs.hours());
    let window = UcWindow {
        first_hour: 1,
        inputs: inputs.slice(0, end),
        initial: InitialConditions::cold_start(&system),
        load_adjustment: la,
    };
    let built = build_uc_model(&system, &ptdf, &window, &cfg.uc).map_err(|e| CliError::from_uc("export-lp", e))?;
    let path = output_dir(cfg)?.join(format!("uc_scenario{scenario}_window1.lp"));
    let exported = export_model(&built.model, &path).map_err(|e| CliError::other("export-lp", e))?;
    let mut report = Report {
        files: vec![path.clone()],
        summary: format!(
            "{}: {} variables ({} binary), {} rows\n",
            path.display(),
            exported.vars.len(),
            exported.num_binaries(),
            exported.constraints.len()
        ),
    };
    if let Some(sol_path) = import {
        let sol = elcc_milp::import_solution(&exported, sol_path, false)
            .map_err(|e| CliError::ingest("export-lp", e))?;
        let _ = writeln!(
            report.summary,
            "imported objective {:.6}, max scaled violation {:.3e}{}",
            sol.objective,
            sol.max_violation,
            sol.worst.map(|w| format!(" at {w}")).unwrap_or_default()
        );
    }
    Ok(report)
}
