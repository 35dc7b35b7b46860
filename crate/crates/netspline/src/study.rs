//! Parallel simulation studies with a resumable replicate log.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use netspline_core::sim::{
    run_replicate, Replicate, SensitivityTable, StudyConfig, StudyReport, SummaryRow, TargetIntensity,
};
use netspline_core::{FitConfig, IntensitySpec, Network};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::io::{read_text, real, write_text, FORMAT_VERSION};

pub const REPLICATES_HEADER: &str = "n,replicate,seed,ise,rho_hat,converged";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: u32,
    config: StudyConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub version: u32,
    pub report: StudyReport,
}

pub fn report_json(report: &StudyReport) -> String {
    let file = ReportFile {
        version: FORMAT_VERSION,
        report: report.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

fn replicate_line(r: &Replicate) -> String {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), real);
    format!(
        "{},{},{},{},{},{}\n",
        r.n,
        r.replicate,
        r.seed,
        na(r.ise),
        na(r.rho_hat),
        r.converged
    )
}

pub fn replicates_csv(samples: &[Replicate]) -> String {
    let mut out = format!("# netspline-replicates v{FORMAT_VERSION}\n{REPLICATES_HEADER}\n");
    for r in samples {
        out.push_str(&replicate_line(r));
    }
    out
}

fn parse_replicate(line: &str) -> Option<Replicate> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 6 {
        return None;
    }
    let opt = |s: &str| -> Option<Option<f64>> {
        if s == "NA" {
            Some(None)
        } else {
            s.parse::<f64>().ok().map(Some)
        }
    };
    let ise = opt(f[3])?;
    Some(Replicate {
        n: f[0].parse().ok()?,
        replicate: f[1].parse().ok()?,
        seed: f[2].parse().ok()?,
        ise,
        rho_hat: opt(f[4])?,
        converged: f[5].parse().ok()?,
        error: ise.is_none().then(|| "failed in an earlier run".to_string()),
    })
}

/// Reads a replicate log; an unparsable final line (an interrupted write) is
/// dropped, anywhere else it is an error.
pub fn read_replicates(path: &Path) -> Result<Vec<Replicate>> {
    let text = read_text(path)?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect();
    let mut out = Vec::new();
    for (k, &(i, line)) in lines.iter().enumerate() {
        if k == 0 {
            if line.trim() != REPLICATES_HEADER {
                return Err(AppError::format(path, Some(i as u64 + 1), "unexpected replicate log header"));
            }
            continue;
        }
        match parse_replicate(line) {
            Some(r) => out.push(r),
            None if k + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("dropping incomplete final line of {}", path.display());
            }
            None => return Err(AppError::format(path, Some(i as u64 + 1), "malformed replicate row")),
        }
    }
    Ok(out)
}

/// Output locations of a study.
#[derive(Debug, Clone)]
pub struct StudyPaths {
    pub config: PathBuf,
    pub replicates: PathBuf,
    pub report: PathBuf,
}

impl StudyPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            config: dir.join("study_config.json"),
            replicates: dir.join("replicates.csv"),
            report: dir.join("report.json"),
        }
    }
}

fn replicate_key(r: &Replicate) -> (usize, usize) {
    (r.n, r.replicate)
}

/// Runs the replicates of `config` in parallel. With `paths`, completed
/// replicates are appended to the replicate log as they finish and, when
/// `resume` is set, replicates already in the log are not rerun.
pub fn run_study(
    net: &Network,
    config: &StudyConfig,
    paths: Option<&StudyPaths>,
    resume: bool,
) -> Result<StudyReport> {
    config.validate()?;
    let target = TargetIntensity::new(net, &config.spec, config.fit.h)?;

    let mut done: BTreeMap<(usize, usize), Replicate> = BTreeMap::new();
    let log = match paths {
        Some(p) => Some(Mutex::new(open_log(p, config, resume, &mut done)?)),
        None => None,
    };
    if !done.is_empty() {
        log::info!("resuming: {} replicate(s) already complete", done.len());
    }

    let todo: Vec<(usize, usize)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |s| (n, s)))
        .filter(|k| !done.contains_key(k))
        .collect();

    let fresh: Vec<Result<Replicate>> = todo
        .par_iter()
        .map(|&(n, s)| {
            let r = run_replicate(&target, &config.fit, n, s, config.seed);
            if let (Some(log), Some(p)) = (&log, paths) {
                let mut f = log.lock().expect("log lock");
                f.write_all(replicate_line(&r).as_bytes())
                    .and_then(|_| f.flush())
                    .map_err(|e| AppError::io(&p.replicates, e))?;
            }
            Ok(r)
        })
        .collect();
    for r in fresh {
        let r = r?;
        done.insert(replicate_key(&r), r);
    }

    let wanted: Vec<Replicate> = done
        .into_values()
        .filter(|r| config.n_values.contains(&r.n) && r.replicate < config.replicates)
        .collect();
    let report = StudyReport::from_replicates(config.clone(), wanted)?;
    if let Some(p) = paths {
        // Leave the log in canonical (n, replicate) order.
        write_text(&p.replicates, &replicates_csv(&report.samples))?;
        write_text(&p.report, &report_json(&report))?;
    }
    Ok(report)
}

fn open_log(
    paths: &StudyPaths,
    config: &StudyConfig,
    resume: bool,
    done: &mut BTreeMap<(usize, usize), Replicate>,
) -> Result<fs::File> {
    let config_json = {
        let mut s = serde_json::to_string_pretty(&ConfigFile {
            version: FORMAT_VERSION,
            config: config.clone(),
        })
        .expect("config serializes");
        s.push('\n');
        s
    };
    if resume && paths.replicates.exists() {
        let stored = read_text(&paths.config)?;
        let stored: ConfigFile = serde_json::from_str(&stored)
            .map_err(|e| AppError::format(&paths.config, Some(e.line() as u64), e.to_string()))?;
        if stored.config != *config {
            return Err(AppError::Usage(format!(
                "cannot resume: {} was written for a different study configuration",
                paths.config.display()
            )));
        }
        for r in read_replicates(&paths.replicates)? {
            done.insert(replicate_key(&r), r);
        }
        // Start the log afresh from the parsed rows so a torn last line is gone.
        let rows: Vec<Replicate> = done.values().cloned().collect();
        write_text(&paths.replicates, &replicates_csv(&rows))?;
    } else {
        write_text(&paths.config, &config_json)?;
        write_text(&paths.replicates, &replicates_csv(&[]))?;
    }
    OpenOptions::new()
        .append(true)
        .open(&paths.replicates)
        .map_err(|e| AppError::io(&paths.replicates, e))
}

/// One study per valid `(δ, h)` cell, rows indexed by δ and columns by h.
pub fn sensitivity_grid(
    net: &Network,
    spec: &IntensitySpec,
    network_id: &str,
    n: usize,
    deltas: &[f64],
    hs: &[f64],
    replicates: usize,
    seed: u64,
    base: &FitConfig,
) -> Result<SensitivityTable> {
    let mut cells = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut row: Vec<Option<SummaryRow>> = Vec::with_capacity(hs.len());
        for &h in hs {
            if h > delta {
                row.push(None);
                continue;
            }
            let config = StudyConfig {
                network_id: network_id.to_string(),
                spec: spec.clone(),
                fit: FitConfig { delta, h, ..base.clone() },
                n_values: vec![n],
                replicates,
                seed,
            };
            log::info!("sensitivity cell delta = {delta}, h = {h}");
            row.push(Some(run_study(net, &config, None, false)?.summary[0]));
        }
        cells.push(row);
    }
    Ok(SensitivityTable {
        n,
        deltas: deltas.to_vec(),
        hs: hs.to_vec(),
        cells,
    })
}

/// Rows δ, columns h, cells `mean (sd)`, and `—` where `h > δ`.
pub fn sensitivity_csv(table: &SensitivityTable) -> String {
    let mut out = format!("# netspline-sensitivity v{FORMAT_VERSION}\n# n = {}\n", table.n);
    out.push_str("delta");
    for h in &table.hs {
        out.push_str(&format!(",h = {h}"));
    }
    out.push('\n');
    for (delta, row) in table.deltas.iter().zip(&table.cells) {
        out.push_str(&delta.to_string());
        for cell in row {
            match cell {
                Some(c) => out.push_str(&format!(",{:.4e} ({:.4e})", c.mean, c.sd)),
                None => out.push_str(",—"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn sensitivity_json(table: &SensitivityTable) -> String {
    let mut s = serde_json::to_string_pretty(table).expect("table serializes");
    s.push('\n');
    s
}
