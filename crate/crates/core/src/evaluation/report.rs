use std::io::Write;
use std::path::{Path, PathBuf};

use super::{EvalReport, UnitReport};
use crate::error::{Error, Result};
use crate::inference::Unit;
use crate::training::Scheme;

/// Model label used in result tables.
pub fn table_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Baseline => "Baseline",
        Scheme::Scheme1 => "Scheme-1",
        Scheme::Scheme2 => "Scheme-2",
        Scheme::Scheme3 => "Scheme-3",
    }
}

fn fmt1(v: f64) -> String {
    format!("{v:.1}")
}

fn opt1(v: Option<f64>) -> String {
    v.map(fmt1).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// Writes the results table: one row per (scheme, unit), accuracies with one decimal.
pub fn write_table_csv(reports: &[EvalReport], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "model", "unit", "level1", "level2a", "level2b", "level2c", "stop", "proceed", "tau",
    ])?;
    for report in reports {
        for unit in &report.units {
            let h = unit.hier.as_ref();
            w.write_record([
                table_name(report.scheme).to_string(),
                unit.unit.table_label().to_string(),
                opt1(h.map(|h| h.level1_acc)),
                opt1(h.map(|h| h.level2a_acc)),
                fmt1(unit.level2b_acc),
                opt1(h.map(|h| h.level2c_acc)),
                h.map(|h| h.stops.to_string()).unwrap_or_default(),
                h.map(|h| h.proceeds.to_string()).unwrap_or_default(),
                if report.scheme.is_hierarchical() {
                    report.tau.to_string()
                } else {
                    String::new()
                },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-class table with one column per unit; blank where a value is undefined.
fn write_per_class(
    path: &Path,
    names: &[String],
    report: &EvalReport,
    column: impl Fn(&UnitReport) -> Option<Vec<Option<f64>>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let units: Vec<&UnitReport> = Unit::ALL.iter().filter_map(|u| report.unit(*u)).collect();
    let columns: Vec<Option<Vec<Option<f64>>>> = units.iter().map(|u| column(u)).collect();
    let mut header = vec!["class".to_string()];
    header.extend(units.iter().map(|u| u.unit.table_label().to_string()));
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(columns.iter().map(|c| opt1(c.as_ref().and_then(|c| c[i]))));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub table: PathBuf,
    pub per_class: Vec<PathBuf>,
}

/// Writes `report.json`, `table.csv` and the per-class CSVs into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;

    let table = dir.join("table.csv");
    let file = std::fs::File::create(&table).map_err(|e| Error::io(&table, e))?;
    write_table_csv(std::slice::from_ref(report), file).map_err(csv_err(&table))?;

    let mut per_class = Vec::new();
    let mut emit =
        |name: &str, names: &[String], column: &dyn Fn(&UnitReport) -> Option<Vec<Option<f64>>>| -> Result<()> {
            let path = dir.join(name);
            write_per_class(&path, names, report, column)?;
            per_class.push(path);
            Ok(())
        };
    if report.scheme.is_hierarchical() {
        emit("precision_level1.csv", &report.groups, &|u| {
            u.hier.as_ref().map(|h| h.level1_groups.precision())
        })?;
        emit("precision_level2a.csv", &report.species, &|u| {
            u.hier.as_ref().map(|h| h.level2a_species.precision())
        })?;
    }
    emit("precision_level2b.csv", &report.species, &|u| {
        Some(u.level2b_species.precision())
    })?;
    if report.scheme.is_hierarchical() {
        emit("stop_at_level1.csv", &report.species, &|u| {
            u.hier.as_ref().map(|h| h.stop_species.fraction())
        })?;
    }
    Ok(ReportFiles { json, table, per_class })
}

pub fn read_report_json(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedDocument(e.to_string()))
}
