//! Report envelope, JSON and CSV writers.

use std::path::{Path, PathBuf};

use pevo_core::pipeline::ConstantsSelection;
use pevo_core::GevreyConfig;
use serde::Serialize;

use crate::CliError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Column documentation for every CSV the tool writes.
pub const CSV_SCHEMA: &str = include_str!("../schema/csv_schema.json");

/// Constants a report was computed with.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Audit<'a> {
    Selected(&'a ConstantsSelection),
    Pinned(PinnedConstants),
}

#[derive(Debug, Serialize)]
pub struct PinnedConstants {
    pub source: &'static str,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub h: f64,
}

impl PinnedConstants {
    pub fn from_config(cfg: &GevreyConfig) -> Self {
        Self { source: "config", m: cfg.m.clone(), k: cfg.k, h: cfg.h }
    }
}

/// Common envelope of every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub preset: &'a str,
    pub pass: bool,
    pub constants_audit: Audit<'a>,
    pub result: T,
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(pevo_core::PevoError::from)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_csv<R: Serialize>(dir: &Path, name: &str, rows: &[R]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_schema(dir: &Path) -> Result<(), CliError> {
    std::fs::write(dir.join("csv_schema.json"), CSV_SCHEMA)?;
    Ok(())
}
