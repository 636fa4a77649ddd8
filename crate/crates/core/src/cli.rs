//! Subcommand implementations behind the `zerosum` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::caps::effective_caps;
use crate::error::{Error, Result};
use crate::io::{analyze, read_scenario, to_json};
use crate::model::{validate_scenario, MarketShares, RawScenario, Scenario};
use crate::sensitivity::{find_prop2_examples, parse_grid, share_sweep, Redistribution};
use crate::simulation::{sample_transfers, summarize, write_draws_csv, Distribution};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub focal: Option<usize>,
}

impl GlobalOptions {
    fn raw_scenario(&self) -> Result<RawScenario> {
        let path = self
            .scenario
            .as_ref()
            .ok_or_else(|| Error::Value("--scenario is required".into()))?;
        let mut raw = read_scenario(path)?;
        if self.focal.is_some() {
            raw.focal_index = self.focal;
        }
        Ok(raw)
    }

    fn scenario(&self) -> Result<Scenario> {
        validate_scenario(&self.raw_scenario()?)
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = open_out(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn run_analyze(opts: &GlobalOptions) -> Result<()> {
    let report = analyze(&opts.scenario()?)?;
    emit(opts.out.as_deref(), &to_json(&report)?)
}

/// Returns the one-line summary that the binary prints.
pub fn run_sweep(opts: &GlobalOptions, grid: &str, policy: &str) -> Result<String> {
    let grid = parse_grid(grid)?;
    let policy: Redistribution = policy.parse()?;
    let scenario = opts.scenario()?;
    let result = share_sweep(&scenario, &grid, policy)?;
    let mut w = open_out(opts.out.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let first = &result.path[0];
    let last = &result.path[result.path.len() - 1];
    let shape = if result.path.len() > 1 && result.is_strictly_increasing() {
        "strictly increasing"
    } else if result.is_monotone() {
        "monotone"
    } else {
        "non-monotone"
    };
    Ok(format!(
        "{} rows, sigma_nn {shape} ({} -> {}), prop2 at start: {}, at end: {}",
        result.path.len(),
        first.sigma_nn,
        last.sigma_nn,
        first.prop2_satisfied,
        last.prop2_satisfied
    ))
}

pub fn run_simulate(opts: &GlobalOptions, draws: u64, dist: &str, emit_draws: Option<&Path>) -> Result<()> {
    let dist: Distribution = dist.parse()?;
    let scenario = opts.scenario()?;
    let summary = summarize(&scenario, draws, opts.seed, dist)?;
    if let Some(path) = emit_draws {
        let stream = sample_transfers(&scenario, draws, opts.seed, dist)?;
        write_draws_csv(stream, scenario.plan_count(), open_out(Some(path))?)?;
    }
    emit(opts.out.as_deref(), &to_json(&summary)?)
}

/// `caps` uses the scenario's caps unless `caps_override` is given. Shares-only
/// inputs (CSV) need no lambda.
pub fn run_caps(opts: &GlobalOptions, caps_override: Option<Vec<f64>>) -> Result<()> {
    let raw = opts.raw_scenario()?;
    let (shares, file_caps) = if raw.lambda.is_some() {
        let sc = validate_scenario(&raw)?;
        (sc.shares, sc.caps)
    } else {
        (MarketShares::new(raw.shares.clone(), raw.focal_index)?, raw.caps.clone())
    };
    let caps = caps_override
        .or(file_caps)
        .ok_or_else(|| Error::Dimension("no caps in scenario and none given with --caps".into()))?;
    let report = effective_caps(&shares, &caps)?;
    emit(opts.out.as_deref(), &to_json(&report)?)
}

/// Writes the found scenarios as a JSON array of scenario records.
pub fn run_find_examples(opts: &GlobalOptions, plans: usize, count: usize) -> Result<()> {
    let found = find_prop2_examples(plans, count, opts.seed)?;
    let raws: Vec<RawScenario> = found.iter().map(Scenario::to_raw).collect();
    emit(opts.out.as_deref(), &to_json(&raws)?)
}

/// Parses a comma-separated cap list such as `0.5,0.5`.
pub fn parse_caps(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::Value(format!("bad cap '{c}'")))
        })
        .collect()
}

/// Error object written to standard error by the binary.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.code(), "detail": e.to_string() }).to_string()
}
