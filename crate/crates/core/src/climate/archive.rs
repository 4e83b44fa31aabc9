use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest run of missing hours that is filled by linear interpolation.
pub const MAX_GAP_HOURS: usize = 6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: {message}")]
    Io { file: String, message: String },
    #[error("{file}, line {line}: {message}")]
    Row {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: expected header `{expected}`, found `{found}`")]
    Header {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file}: gap of {hours} h in `{column}` starting {start} exceeds the {MAX_GAP_HOURS} h limit")]
    Gap {
        file: String,
        column: String,
        start: NaiveDateTime,
        hours: usize,
    },
    #[error("{file}: year {year} is incomplete")]
    IncompleteYear { file: String, year: i32 },
    #[error("weather years {weather:?} and load years {load:?} differ")]
    YearMismatch { weather: Vec<i32>, load: Vec<i32> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct YearSeries {
    pub year: i32,
    pub temp: Vec<f64>,
    pub ghi: Vec<f64>,
    /// One hourly series per wind site.
    pub wind: Vec<Vec<f64>>,
    pub load: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurricaneEvent {
    pub year: i32,
    pub month: u32,
    pub duration_hours: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoricalArchive {
    /// Sorted by year.
    pub years: Vec<YearSeries>,
    pub hurricanes: Vec<HurricaneEvent>,
    /// `(file, timestamp)` of every hour holding an interpolated value.
    pub interpolated: Vec<(String, NaiveDateTime)>,
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days() as u32
}

pub fn hours_in_month(year: i32, month: u32) -> usize {
    days_in_month(year, month) as usize * 24
}

fn hours_in_year(year: i32) -> usize {
    (1..=12).map(|m| hours_in_month(year, m)).sum()
}

impl HistoricalArchive {
    pub fn from_years(mut years: Vec<YearSeries>, hurricanes: Vec<HurricaneEvent>) -> Self {
        years.sort_by_key(|y| y.year);
        Self {
            years,
            hurricanes,
            interpolated: Vec::new(),
        }
    }

    pub fn year_numbers(&self) -> Vec<i32> {
        self.years.iter().map(|y| y.year).collect()
    }

    pub fn first_year(&self) -> i32 {
        self.years.first().map_or(0, |y| y.year)
    }

    pub fn last_year(&self) -> i32 {
        self.years.last().map_or(0, |y| y.year)
    }

    pub fn year(&self, year: i32) -> Option<&YearSeries> {
        self.years.iter().find(|y| y.year == year)
    }

    pub fn sites(&self) -> usize {
        self.years.first().map_or(0, |y| y.wind.len())
    }

    /// Distinct hours carrying at least one interpolated value.
    pub fn interpolated_hours(&self) -> usize {
        self.interpolated
            .iter()
            .map(|(_, t)| *t)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Hour indices of `month` inside a year series.
    pub fn month_range(year: i32, month: u32) -> Range<usize> {
        let start: usize = (1..month).map(|m| hours_in_month(year, m)).sum();
        start..start + hours_in_month(year, month)
    }
}

/// Accepts RFC 3339 or `YYYY-MM-DD[ T]HH:MM[:SS]`; timestamps must fall on
/// the hour.
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let t = DateTime::parse_from_rfc3339(text)
        .map(|d| d.naive_utc())
        .ok()
        .or_else(|| {
            [
                "%Y-%m-%dT%H:%M:%S",
                "%Y-%m-%d %H:%M:%S",
                "%Y-%m-%dT%H:%M",
                "%Y-%m-%d %H:%M",
            ]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        })?;
    (t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0).then_some(t)
}

struct Table {
    file: String,
    columns: Vec<String>,
    start: NaiveDateTime,
    /// `values[column][hour]` after gap filling.
    values: Vec<Vec<f64>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads an hourly table, checks the header, and fills short gaps.
fn read_hourly(
    path: &Path,
    fixed: &[&str],
    prefix_tail: Option<&str>,
    interpolated: &mut Vec<(String, NaiveDateTime)>,
) -> Result<Table, IngestError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let header_ok = header.len() >= fixed.len()
        && header.iter().zip(fixed).all(|(h, f)| h == f)
        && match prefix_tail {
            Some(p) => {
                header.len() > fixed.len()
                    && header[fixed.len()..]
                        .iter()
                        .enumerate()
                        .all(|(i, h)| *h == format!("{p}{}", i + 1))
            }
            None => header.len() == fixed.len(),
        };
    if !header_ok {
        let expected = match prefix_tail {
            Some(p) => format!("{},{p}1[,{p}2,...]", fixed.join(",")),
            None => fixed.join(","),
        };
        return Err(IngestError::Header {
            file,
            expected,
            found: header.join(","),
        });
    }
    let ncols = header.len() - 1;
    let mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let row_err = |message: String| IngestError::Row {
            file: file.clone(),
            line,
            message,
        };
        let rec = rec.map_err(|e| row_err(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(row_err(format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| row_err(format!("bad timestamp `{}`", &rec[0])))?;
        if let Some((prev, _)) = rows.last() {
            if ts <= *prev {
                return Err(row_err(format!("timestamp {ts} not after {prev}")));
            }
        }
        let mut vals = Vec::with_capacity(ncols);
        for (k, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                vals.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| row_err(format!("bad value `{cell}` in `{}`", header[k + 1])))?;
                vals.push(Some(v));
            }
        }
        rows.push((ts, vals));
    }
    let Some(&(start, _)) = rows.first() else {
        return Err(io_err(path, "no data rows"));
    };
    let end = rows.last().unwrap().0;
    let len = (end - start).num_hours() as usize + 1;
    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; len]; ncols];
    for (ts, vals) in rows {
        let h = (ts - start).num_hours() as usize;
        for (k, v) in vals.into_iter().enumerate() {
            grid[k][h] = v;
        }
    }
    let mut touched = BTreeSet::new();
    let mut values = Vec::with_capacity(ncols);
    for (k, col) in grid.into_iter().enumerate() {
        let mut out = vec![0.0; len];
        let mut h = 0;
        while h < len {
            if let Some(v) = col[h] {
                out[h] = v;
                h += 1;
                continue;
            }
            let run_start = h;
            while h < len && col[h].is_none() {
                h += 1;
            }
            let run = h - run_start;
            let gap_start = start + chrono::Duration::hours(run_start as i64);
            if run > MAX_GAP_HOURS || run_start == 0 || h == len {
                return Err(IngestError::Gap {
                    file: file.clone(),
                    column: header[k + 1].clone(),
                    start: gap_start,
                    hours: run,
                });
            }
            let (a, b) = (col[run_start - 1].unwrap(), col[h].unwrap());
            for (j, slot) in out.iter_mut().enumerate().take(h).skip(run_start) {
                let w = (j - run_start + 1) as f64 / (run + 1) as f64;
                *slot = a + w * (b - a);
                touched.insert(j);
            }
        }
        values.push(out);
    }
    interpolated.extend(
        touched
            .into_iter()
            .map(|j| (file.clone(), start + chrono::Duration::hours(j as i64))),
    );
    Ok(Table {
        file,
        columns: header[1..].to_vec(),
        start,
        values,
    })
}

/// Cuts a gap-free table into complete calendar years.
fn split_years(table: &Table) -> Result<BTreeMap<i32, Vec<Vec<f64>>>, IngestError> {
    let len = table.values.first().map_or(0, Vec::len);
    let end = table.start + chrono::Duration::hours(len as i64 - 1);
    let mut out = BTreeMap::new();
    for year in table.start.year()..=end.year() {
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let offset = (jan1 - table.start).num_hours();
        let n = hours_in_year(year);
        if offset < 0 || offset as usize + n > len {
            return Err(IngestError::IncompleteYear {
                file: table.file.clone(),
                year,
            });
        }
        let o = offset as usize;
        out.insert(
            year,
            table.values.iter().map(|c| c[o..o + n].to_vec()).collect(),
        );
    }
    Ok(out)
}

fn read_hurricanes(path: &Path, years: &BTreeSet<i32>) -> Result<Vec<HurricaneEvent>, IngestError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["year", "month", "duration_hours"] {
        return Err(IngestError::Header {
            file,
            expected: "year,month,duration_hours".into(),
            found: header.join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<HurricaneEvent>().enumerate() {
        let line = i + 2;
        let row_err = |message: String| IngestError::Row {
            file: file.clone(),
            line,
            message,
        };
        let ev = rec.map_err(|e| row_err(e.to_string()))?;
        if !(1..=12).contains(&ev.month) {
            return Err(row_err(format!("month {} outside 1..12", ev.month)));
        }
        if !(ev.duration_hours >= 0.0 && ev.duration_hours.is_finite()) {
            return Err(row_err(format!("bad duration {}", ev.duration_hours)));
        }
        if !years.contains(&ev.year) {
            return Err(row_err(format!("year {} outside the archive", ev.year)));
        }
        out.push(ev);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchivePaths {
    pub weather: PathBuf,
    pub load: PathBuf,
    pub hurricanes: Option<PathBuf>,
}

/// Unified hourly archive from weather, load and (optional) hurricane files.
pub fn ingest_archive(paths: &ArchivePaths) -> Result<HistoricalArchive, IngestError> {
    let mut interpolated = Vec::new();
    let weather = read_hourly(
        &paths.weather,
        &["timestamp_utc", "temp_c", "ghi_wm2"],
        Some("wind_ms_site"),
        &mut interpolated,
    )?;
    let load = read_hourly(&paths.load, &["timestamp_utc", "load_mw"], None, &mut interpolated)?;
    debug_assert_eq!(load.columns.len(), 1);
    let w = split_years(&weather)?;
    let l = split_years(&load)?;
    if w.keys().ne(l.keys()) {
        return Err(IngestError::YearMismatch {
            weather: w.keys().copied().collect(),
            load: l.keys().copied().collect(),
        });
    }
    let year_set: BTreeSet<i32> = w.keys().copied().collect();
    let hurricanes = match &paths.hurricanes {
        Some(p) => read_hurricanes(p, &year_set)?,
        None => Vec::new(),
    };
    let years = w
        .into_iter()
        .zip(l)
        .map(|((year, mut wc), (_, mut lc))| {
            let temp = wc.remove(0);
            let ghi = wc.remove(0);
            YearSeries {
                year,
                temp,
                ghi,
                wind: wc,
                load: lc.remove(0),
            }
        })
        .collect();
    Ok(HistoricalArchive {
        years,
        hurricanes,
        interpolated,
    })
}

fn fmt_ts(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Writes the three archive files in the format [`ingest_archive`] reads.
pub fn write_archive(archive: &HistoricalArchive, paths: &ArchivePaths) -> std::io::Result<()> {
    let sites = archive.sites();
    let mut w = BufWriter::new(File::create(&paths.weather)?);
    write!(w, "timestamp_utc,temp_c,ghi_wm2")?;
    for s in 1..=sites {
        write!(w, ",wind_ms_site{s}")?;
    }
    writeln!(w)?;
    let mut l = BufWriter::new(File::create(&paths.load)?);
    writeln!(l, "timestamp_utc,load_mw")?;
    for y in &archive.years {
        let jan1 = NaiveDate::from_ymd_opt(y.year, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        for h in 0..y.temp.len() {
            let ts = fmt_ts(jan1 + chrono::Duration::hours(h as i64));
            write!(w, "{ts},{:.4},{:.3}", y.temp[h], y.ghi[h])?;
            for site in &y.wind {
                write!(w, ",{:.4}", site[h])?;
            }
            writeln!(w)?;
            writeln!(l, "{ts},{:.3}", y.load[h])?;
        }
    }
    w.flush()?;
    l.flush()?;
    if let Some(p) = &paths.hurricanes {
        let mut hw = csv::Writer::from_path(p)?;
        for ev in &archive.hurricanes {
            hw.serialize(ev)?;
        }
        hw.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_lengths() {
        assert_eq!(hours_in_month(2024, 2), 29 * 24);
        assert_eq!(hours_in_month(2023, 2), 28 * 24);
        assert_eq!(hours_in_year(2024), 8784);
        assert_eq!(HistoricalArchive::month_range(2023, 2), 744..744 + 672);
    }

    #[test]
    fn timestamps() {
        assert!(parse_timestamp("2020-01-01T00:00:00Z").is_some());
        assert!(parse_timestamp("2020-01-01 05:00").is_some());
        assert!(parse_timestamp("2020-01-01T05:30:00Z").is_none());
        assert!(parse_timestamp("yesterday").is_none());
    }
}
