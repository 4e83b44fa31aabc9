use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use elcc_cli::commands;
use elcc_cli::{CliError, Report, StudyConfig};
use elcc_milp::SolverMode;

#[derive(Parser, Debug)]
#[command(name = "elcc", version, about = "Climate-aware capacity accreditation studies")]
struct Cli {
    /// Study configuration (TOML).
    #[arg(long, global = true, env = "ELCC_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    month: Option<u32>,
    #[arg(long, global = true)]
    year: Option<i32>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    target_lolh: Option<f64>,
    #[arg(long, global = true)]
    epsilon_la: Option<f64>,
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,
    /// Worker threads for scenario and variant solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Uniform temperature trend override, °C/yr.
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta_tau: Option<f64>,
    /// Storm-frequency trend override, events/yr.
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta_hurr: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Bundled,
    Export,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit temperature, load and storm trends from the archive.
    FitTrends,
    /// Draw climate scenarios for the study month.
    Sample,
    /// Solve the rolling-horizon commitment for each scenario.
    UcRun {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        la: f64,
        #[arg(long)]
        scenario: Option<usize>,
    },
    /// Loss-of-load hours at a fixed adjustment, or search for the adjustment.
    Lole {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        la: f64,
        #[arg(long)]
        search: bool,
    },
    /// Accredit the configured resources.
    Accredit,
    /// Sweep one parameter and accredit at each value.
    Sensitivity {
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lines: Vec<u32>,
    },
    /// Write a synthetic system, archive and study config.
    MakeFixture {
        #[arg(long)]
        buses: Option<usize>,
        #[arg(long)]
        years: Option<usize>,
        #[arg(long)]
        congestion: bool,
        #[arg(long)]
        simple_units: bool,
        #[arg(long)]
        storage_units: Option<usize>,
        #[arg(long)]
        peak_load: Option<f64>,
    },
    /// Write the first commitment window of a scenario as an LP file.
    ExportLp {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        la: f64,
        #[arg(long, default_value_t = 0)]
        scenario: usize,
        /// Solution file (`name,value`) to check against the exported model.
        #[arg(long)]
        import: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> Result<StudyConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    let s = &mut cfg.study;
    if let Some(v) = cli.month {
        s.month = v;
    }
    if cli.year.is_some() {
        s.year = cli.year;
    }
    if let Some(v) = cli.samples {
        s.samples = v;
    }
    if let Some(v) = cli.seed {
        s.seed = v;
        cfg.fixture.seed = v;
    }
    if let Some(v) = cli.target_lolh {
        cfg.study.target_lolh = v;
    }
    if let Some(v) = cli.epsilon_la {
        cfg.study.epsilon_la = v;
    }
    if let Some(m) = cli.solver {
        cfg.solver.mode = match m {
            SolverArg::Bundled => SolverMode::Bundled,
            SolverArg::Export => SolverMode::Export,
        };
    }
    if cli.out.is_some() {
        cfg.paths.output = cli.out.clone();
    }
    if cli.beta_tau.is_some() {
        cfg.overrides.beta_tau = cli.beta_tau;
    }
    if cli.beta_hurr.is_some() {
        cfg.overrides.beta_hurr = cli.beta_hurr;
    }
    match &cli.command {
        Command::Sensitivity {
            parameter,
            values,
            lines,
        } => {
            if parameter.is_some() {
                cfg.sensitivity.parameter = parameter.clone();
            }
            if !values.is_empty() {
                cfg.sensitivity.values = values.clone();
            }
            if !lines.is_empty() {
                cfg.sensitivity.lines = lines.clone();
            }
        }
        Command::MakeFixture {
            buses,
            years,
            congestion,
            simple_units,
            storage_units,
            peak_load,
        } => {
            if let Some(n) = storage_units {
                cfg.fixture.storage_units = *n;
            }
            cfg.fixture.simple_units |= *simple_units;
            if let Some(b) = buses {
                cfg.fixture.buses = *b;
            }
            if let Some(y) = years {
                cfg.fixture.years = *y;
            }
            if let Some(p) = peak_load {
                cfg.fixture.peak_load = *p;
            }
            cfg.fixture.congestion |= *congestion;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &StudyConfig) -> Result<Report, CliError> {
    match &cli.command {
        Command::FitTrends => commands::fit_trends_cmd(cfg),
        Command::Sample => commands::sample_cmd(cfg),
        Command::UcRun { la, scenario } => commands::uc_run_cmd(cfg, *la, *scenario),
        Command::Lole { la, search } => commands::lole_cmd(cfg, *la, *search),
        Command::Accredit => commands::accredit_cmd(cfg),
        Command::Sensitivity { .. } => commands::sensitivity_cmd(cfg),
        Command::MakeFixture { .. } => commands::make_fixture_cmd(cfg),
        Command::ExportLp { la, scenario, import } => commands::export_lp_cmd(cfg, *la, *scenario, import.as_deref()),
    }
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let cfg = build_config(cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::other("threads", e))?;
            pool.install(|| dispatch(cli, &cfg))
        }
        None => dispatch(cli, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
