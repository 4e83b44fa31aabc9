//! Historical weather/load archives, long-term trend fits and climate-adjusted
//! monthly scenario sampling.

mod archive;
mod scenario;
mod trend;

pub use archive::{
    days_in_month, hours_in_month, ingest_archive, parse_timestamp, write_archive, ArchivePaths,
    HistoricalArchive, HurricaneEvent, IngestError, YearSeries,
};
pub use scenario::{
    adjust_demand, adjust_temperature, hurricane_probability, sample_hurricane_flags,
    sample_scenarios, scenario_rng, HurricaneDraw, SamplingOptions, ScenarioProfile, ScenarioSet,
};
pub use trend::{
    fit_hinge, fit_hurricane_model, fit_load_temp_regression, fit_monthly_temp_trend, fit_trends,
    ols_slope, FitError, HurricaneStats, LoadTempRegression, TrendModel,
};
