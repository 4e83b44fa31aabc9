use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid bounds on `{0}`")]
    BadBounds(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("row `{row}` references undeclared variable #{index}")]
    UnknownVariable { row: String, index: usize },
    #[error("name `{0}` is not a valid LP-format identifier")]
    InvalidName(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("model is infeasible; implicated constraint families: {}", .families.join(", "))]
    Infeasible { families: Vec<String> },
    #[error("model is unbounded")]
    Unbounded,
    #[error("no feasible solution found before the {0} limit")]
    NoIncumbent(&'static str),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("LP engine failure: {0}")]
    Numerical(String),
    #[error("export-only mode does not solve; write the model with `export_model`")]
    ExportOnly,
}

#[derive(Debug, Error)]
pub enum LpFormatError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("LP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("cannot read solution file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("solution file {path}, record {record}: {message}")]
    Record {
        path: PathBuf,
        record: usize,
        message: String,
    },
    #[error("solution file {path} does not assign variable `{name}`")]
    Missing { path: PathBuf, name: String },
}
