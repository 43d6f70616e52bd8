use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use skgkit::budget::FitMode;
use skgkit::ingest::{self, Split};
use skgkit::prompt::PromptTemplate;
use skgkit::stats::{dataset_stats, render_table, StatsReport};
use skgkit::{Execution, TokenBudget};

use crate::fail::Failure;
use crate::output::write_json;
use crate::setup::{self, Overrides};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Prompt plus completion against the training limit.
    Train,
    /// Prompt alone against the inference limit.
    Inference,
    Both,
}

impl ModeArg {
    /// Train splits are measured as training records, test splits as
    /// inference prompts.
    pub fn default_for(split: Split) -> ModeArg {
        match split {
            Split::Train => ModeArg::Train,
            Split::Test => ModeArg::Inference,
        }
    }

    fn modes(self) -> &'static [FitMode] {
        match self {
            ModeArg::Train => &[FitMode::Train],
            ModeArg::Inference => &[FitMode::Inference],
            ModeArg::Both => &[FitMode::Train, FitMode::Inference],
        }
    }
}

#[derive(Debug, Serialize)]
struct StatsFile {
    split: Split,
    tokenizer: String,
    budget: TokenBudget,
    reports: Vec<StatsReport>,
}

pub fn default_out(manifest: &Path, split: Split) -> PathBuf {
    let stem = manifest.file_stem().unwrap_or_default().to_string_lossy();
    manifest.with_file_name(format!("{stem}.stats.{}.json", split.as_str()))
}

pub fn run(
    manifest_path: &Path,
    split: Split,
    mode: ModeArg,
    out: &Path,
    overrides: &Overrides,
    exec: Execution,
) -> Result<PathBuf, Failure> {
    let m = setup::manifest(manifest_path, overrides, true)?;
    let tokenizer = setup::tokenizer(&m)?;
    let template = PromptTemplate::default();
    let pools = ingest::load_pools(&m)?;
    let loaded = ingest::load_split(&m, split, exec)?;

    let mut reports = Vec::new();
    for &fit_mode in mode.modes() {
        let opts = setup::render_options(&m, fit_mode);
        for (entry, examples) in &loaded {
            let report = dataset_stats(
                &entry.name,
                split.as_str(),
                examples,
                &pools[&entry.name],
                &template,
                tokenizer.as_ref(),
                &opts,
                exec,
            )
            .map_err(|e| Failure::Validation(format!("dataset {:?}: {e}", entry.name)))?;
            check(&report)?;
            reports.push(report);
        }
    }

    let rows: Vec<_> = reports.iter().map(|r| r.row.clone()).collect();
    write_json(
        out,
        &StatsFile {
            split,
            tokenizer: tokenizer.id(),
            budget: m.budget,
            reports,
        },
    )?;
    print!("{}", render_table(&rows));
    println!("tokenizer: {}", tokenizer.id());
    Ok(out.to_path_buf())
}

fn check(r: &StatsReport) -> Result<(), Failure> {
    let row = &r.row;
    let ok = row.truncated_count + row.discarded_count <= row.count
        && row.input_avg <= row.input_max as f64
        && row.output_avg <= row.output_max as f64
        && row.count == r.per_example.len();
    if ok {
        Ok(())
    } else {
        Err(Failure::Internal(format!(
            "inconsistent stats row for {:?}",
            row.dataset
        )))
    }
}
