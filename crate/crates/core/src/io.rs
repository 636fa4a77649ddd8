//! Scenario files and report serialization.
//!
//! Scenario files are JSON:
//! `{"label", "shares", "lambda", "means"?, "caps"?, "focal_index"?}`.
//! Files ending in `.csv` are read as shares only, one `plan_id,share` row per
//! plan with an optional header.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::caps::{effective_caps, CapReport};
use crate::error::{Error, Result};
use crate::model::{RawScenario, Scenario};
use crate::moments::{moment_report, MomentReport};
use crate::sensitivity::{focal_variance_gradient, GradientReport};

pub fn parse_scenario_json(text: &str) -> Result<RawScenario> {
    Ok(serde_json::from_str(text)?)
}

/// Plan ids and shares from `plan_id,share` rows.
pub fn parse_shares_csv(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut ids = Vec::new();
    let mut shares = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected plan_id,share, got {} fields",
                line + 1,
                rec.len()
            )));
        }
        match rec[1].parse::<f64>() {
            Ok(v) => {
                ids.push(rec[0].to_string());
                shares.push(v);
            }
            Err(_) if line == 0 => {}
            Err(_) => {
                return Err(Error::Parse(format!("line {}: bad share '{}'", line + 1, &rec[1])));
            }
        }
    }
    Ok((ids, shares))
}

pub fn read_scenario(path: &Path) -> Result<RawScenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let (_, shares) = parse_shares_csv(&text)?;
        Ok(RawScenario {
            label: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            shares,
            ..Default::default()
        })
    } else {
        parse_scenario_json(&text)
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same value.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub label: String,
    pub focal_index: usize,
    #[serde(flatten)]
    pub moments: MomentReport,
    pub gradient: GradientReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caps: Option<CapReport>,
}

pub fn analyze(scenario: &Scenario) -> Result<AnalyzeReport> {
    Ok(AnalyzeReport {
        label: scenario.label.clone(),
        focal_index: scenario.shares.focal_index(),
        moments: moment_report(scenario)?,
        gradient: focal_variance_gradient(&scenario.shares, &scenario.lambda)?,
        caps: scenario
            .caps
            .as_ref()
            .map(|c| effective_caps(&scenario.shares, c))
            .transpose()?,
    })
}
