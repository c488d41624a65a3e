//! Runs every config file matching a glob and averages the results per
//! instance, model kind and margin set.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bilevel_ptp::report::{ResultsRow, RESULTS_HEADER};

use crate::config::RunOptions;
use crate::run::run;
use crate::CliError;

pub const BATCH_FILE: &str = "batch.csv";

/// One line of the aggregate table.
#[derive(Clone, Debug, PartialEq)]
pub enum BatchRow {
    /// Averages over the runs sharing instance, kind and margin set.
    Aggregate { row: ResultsRow, runs: usize },
    /// A config that produced no results row.
    Failed { config: String, error: String },
}

impl BatchRow {
    fn record(&self) -> Vec<String> {
        match self {
            BatchRow::Aggregate { row, runs } => {
                let mut r = row.record();
                r.push(format!("ok ({runs} runs)"));
                r
            }
            BatchRow::Failed { config, error } => {
                let mut r = vec![config.clone()];
                r.extend(std::iter::repeat_n("-".to_string(), RESULTS_HEADER.len() - 1));
                r.push(format!("error: {error}"));
                r
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
    pub csv: PathBuf,
}

impl BatchSummary {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, BatchRow::Failed { .. })).count()
    }
}

/// Runs the configs matching `pattern`, each into its own subdirectory of
/// `out_dir`, and writes `batch.csv` there. A failing config becomes an
/// error row and the batch continues.
pub fn batch(pattern: &str, out_dir: &Path) -> Result<BatchSummary, CliError> {
    let mut configs: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::Usage(format!("bad glob {pattern:?}: {e}")))?
        .filter_map(|entry| entry.ok())
        .filter(|p| p.is_file())
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(CliError::Usage(format!("no config matches {pattern:?}")));
    }
    fs::create_dir_all(out_dir)?;

    let mut groups: Vec<(String, Vec<ResultsRow>)> = Vec::new();
    let mut failed = Vec::new();
    for path in &configs {
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let outcome = RunOptions::from_file(path).and_then(|opts| {
            let forced = RunOptions {
                out: Some(out_dir.join(&name)),
                ..RunOptions::default()
            };
            run(&opts.overridden_by(forced).resolve(None, true)?)
        });
        match outcome {
            Ok(out) => match out.results {
                Some(row) => {
                    let key = group_key(&row);
                    match groups.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, rows)) => rows.push(row),
                        None => groups.push((key, vec![row])),
                    }
                }
                None => failed.push(BatchRow::Failed {
                    config: name,
                    error: "mode produces no results row".into(),
                }),
            },
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                failed.push(BatchRow::Failed { config: name, error: e.to_string() });
            }
        }
    }

    let mut rows: Vec<BatchRow> = groups
        .into_iter()
        .filter_map(|(_, rows)| {
            ResultsRow::aggregate(&rows).map(|row| BatchRow::Aggregate { row, runs: rows.len() })
        })
        .collect();
    rows.extend(failed);

    let csv_path = out_dir.join(BATCH_FILE);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&csv_path)?));
    let mut header: Vec<&str> = RESULTS_HEADER.to_vec();
    header.push("status");
    w.write_record(&header).map_err(csv_error)?;
    for r in &rows {
        w.write_record(r.record()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(BatchSummary { rows, csv: csv_path })
}

fn group_key(row: &ResultsRow) -> String {
    format!("{}\u{1f}{}\u{1f}{}", row.instance, row.kind, row.margins)
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
