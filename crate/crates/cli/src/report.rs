//! Writing a run's artifacts to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wanframe_core::DecayProfile;

use crate::pipeline::{PipelineError, PipelineOutcome};

/// Files written for one run, relative to the output directory.
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const BANDS_FILE: &str = "bands.csv";

fn io_error(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Output(format!("{}: {e}", path.display()))
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, PipelineError> {
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Shell-by-shell norms, one row per shell.
pub fn decay_csv(profile: &DecayProfile) -> String {
    let mut out = String::from("shell,norm\n");
    for (s, v) in profile.shell_norms.iter().enumerate() {
        writeln!(out, "{s},{v:e}").unwrap();
    }
    out
}

pub fn bands_csv(outcome: &PipelineOutcome) -> String {
    let bands = &outcome.bands;
    let grid = bands.grid();
    let mut out = String::from("k");
    for b in 1..=bands.band_count() {
        write!(out, ",lambda_{b}").unwrap();
    }
    out.push('\n');
    for k in 0..grid.len() {
        write!(out, "{k}").unwrap();
        for e in bands.eigenvalues(k).iter() {
            write!(out, ",{e:.15e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn section_csv(outcome: &PipelineOutcome, j: usize) -> String {
    let sections = &outcome.sections;
    let mut out = String::from("k");
    for a in 1..=sections.fiber_dim() {
        write!(out, ",re_{a},im_{a}").unwrap();
    }
    out.push('\n');
    for k in 0..sections.grid().len() {
        write!(out, "{k}").unwrap();
        for z in sections.section(k, j).iter() {
            write!(out, ",{:.15e},{:.15e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes report, timings, band and decay tables, and optionally the
/// sections, returning the paths written.
pub fn write_artifacts(outcome: &PipelineOutcome, dir: &Path, sections: bool) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = vec![
        write(dir.join(REPORT_FILE), &outcome.report.to_json())?,
        write(dir.join(TIMINGS_FILE), &(serde_json::to_string_pretty(&outcome.timings).unwrap() + "\n"))?,
        write(dir.join(BANDS_FILE), &bands_csv(outcome))?,
    ];
    for (j, profile) in outcome.report.frame.decay.iter().enumerate() {
        written.push(write(dir.join(format!("decay_{}.csv", j + 1)), &decay_csv(profile))?);
    }
    if sections {
        for j in 0..outcome.sections.count() {
            written.push(write(dir.join(format!("sections_{}.csv", j + 1)), &section_csv(outcome, j))?);
        }
    }
    Ok(written)
}
