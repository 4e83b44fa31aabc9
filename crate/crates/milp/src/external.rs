//! Import of solutions produced by an external solver from a delimited
//! `variable_name,value` file.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::ImportError;
use crate::model::MilpModel;

/// Handle returned when a model is exported instead of solved. It remembers
/// the names as written so a solution file can be mapped back onto the
/// original variable order.
#[derive(Clone, Debug)]
pub struct ExportHandle {
    pub lp_path: PathBuf,
    pub exported: MilpModel,
}

impl ExportHandle {
    pub fn import(&self, path: &Path, missing_as_zero: bool) -> Result<ExternalSolution, ImportError> {
        import_solution(&self.exported, path, missing_as_zero)
    }
}

#[derive(Clone, Debug)]
pub struct ExternalSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    /// Largest scaled row or bound violation of the imported point.
    pub max_violation: f64,
    pub worst: Option<String>,
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    [b',', b';', b'\t']
        .into_iter()
        .find(|d| first.as_bytes().contains(d))
        .unwrap_or(b',')
}

/// Reads `variable_name,value` records (comma, semicolon or tab separated; an
/// optional header row is skipped) and maps them onto `model`.
///
/// Many solvers omit zero-valued variables; `missing_as_zero` accepts that.
pub fn import_solution(
    model: &MilpModel,
    path: &Path,
    missing_as_zero: bool,
) -> Result<ExternalSolution, ImportError> {
    let text = fs::read_to_string(path).map_err(|source| ImportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let index: HashMap<&str, usize> = model
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut values = vec![f64::NAN; model.vars.len()];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(sniff_delimiter(&text))
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let record_err = |record: usize, message: String| ImportError::Record {
        path: path.to_path_buf(),
        record,
        message,
    };
    for (n, rec) in reader.records().enumerate() {
        let record = n + 1;
        let rec = rec.map_err(|e| record_err(record, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(record_err(record, format!("expected 2 fields, found {}", rec.len())));
        }
        let (name, raw) = (&rec[0], &rec[1]);
        let value = match raw.parse::<f64>() {
            Ok(v) => v,
            Err(_) if record == 1 => continue,
            Err(_) => return Err(record_err(record, format!("value `{raw}` is not a number"))),
        };
        if !value.is_finite() {
            return Err(record_err(record, format!("value for `{name}` is not finite")));
        }
        let Some(&i) = index.get(name) else {
            return Err(record_err(record, format!("unknown variable `{name}`")));
        };
        if !values[i].is_nan() {
            return Err(record_err(record, format!("variable `{name}` assigned twice")));
        }
        values[i] = value;
    }
    for (i, v) in values.iter_mut().enumerate() {
        if v.is_nan() {
            if missing_as_zero {
                *v = 0.0;
            } else {
                return Err(ImportError::Missing {
                    path: path.to_path_buf(),
                    name: model.vars[i].name.clone(),
                });
            }
        }
    }
    let (max_violation, worst) = model.max_violation(&values);
    Ok(ExternalSolution {
        objective: model.objective_value(&values),
        values,
        max_violation,
        worst,
    })
}

/// Writes `values` in the same format [`import_solution`] reads.
pub fn write_solution(model: &MilpModel, values: &[f64], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variable_name", "value"])?;
    for (v, x) in model.vars.iter().zip(values) {
        w.write_record([v.name.as_str(), &format!("{x:?}")])?;
    }
    w.flush()
}
