use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use skgkit::budget::{FitMode, FitOutcome, FitResult};
use skgkit::ingest::{self, Split};
use skgkit::mixture::{self, MixtureSpec, Sampling};
use skgkit::prompt::{render_general, render_with_pools, PromptTemplate};
use skgkit::{exec, Execution, TokenBudget, TrainingRecord};

use crate::fail::Failure;
use crate::output::{sibling, write_atomic, write_json};
use crate::setup::{self, Overrides};

#[derive(Debug, Default, Serialize)]
pub struct OutcomeCounts {
    pub name: String,
    pub examples: usize,
    pub fitted: usize,
    pub truncated: usize,
    pub discarded: usize,
}

impl OutcomeCounts {
    fn tally(name: &str, results: &[FitResult]) -> Self {
        let mut c = OutcomeCounts {
            name: name.to_string(),
            examples: results.len(),
            ..Default::default()
        };
        for r in results {
            match r.outcome {
                FitOutcome::Fitted => c.fitted += 1,
                FitOutcome::Truncated => c.truncated += 1,
                FitOutcome::Discarded => c.discarded += 1,
            }
        }
        c
    }
}

#[derive(Debug, Serialize)]
pub struct BuildReport {
    pub corpus: PathBuf,
    pub seed: u64,
    pub tokenizer: String,
    pub budget: TokenBudget,
    pub general_fraction: f64,
    pub by_tokens: bool,
    pub sampling: Sampling,
    pub records: usize,
    pub skg_records: usize,
    pub general_records: usize,
    /// Share of general records; 0 for an empty corpus.
    pub general_ratio: f64,
    pub general_token_ratio: f64,
    pub datasets: Vec<OutcomeCounts>,
    pub general: Option<OutcomeCounts>,
}

pub fn run(manifest_path: &Path, out: &Path, overrides: &Overrides, exec: Execution) -> Result<PathBuf, Failure> {
    let m = setup::manifest(manifest_path, overrides, false)?;
    let tokenizer = setup::tokenizer(&m)?;
    let template = PromptTemplate::default();
    let opts = setup::render_options(&m, FitMode::Train);
    let pools = ingest::load_pools(&m)?;
    let loaded = ingest::load_split(&m, Split::Train, exec)?;

    let mut datasets = Vec::new();
    let mut skg = Vec::new();
    for (entry, examples) in &loaded {
        let results = render_with_pools(examples, &pools, &template, tokenizer.as_ref(), &opts, exec)
            .map_err(|e| Failure::Validation(format!("dataset {:?}: {e}", entry.name)))?;
        datasets.push(OutcomeCounts::tally(&entry.name, &results));
        skg.extend(results.into_iter().filter_map(|r| r.record));
    }

    let (general_pool, general_counts) = match &m.general {
        Some(g) if m.mixture.general_fraction > 0.0 => {
            let examples = ingest::load_general_jsonl(&g.path, &g.name)?;
            let results = exec::map(&examples, exec, |ex| {
                render_general(ex, &g.name, &template, tokenizer.as_ref(), &m.budget, FitMode::Train)
            });
            let counts = OutcomeCounts::tally(&g.name, &results);
            let pool: Vec<TrainingRecord> = results.into_iter().filter_map(|r| r.record).collect();
            (pool, Some(counts))
        }
        _ => (Vec::new(), None),
    };

    let spec = MixtureSpec {
        general_fraction: m.mixture.general_fraction,
        seed: m.seed,
        sampling: m.mixture.sampling,
        skg_sources: m.datasets.iter().map(|d| d.name.clone()).collect(),
        general_source: m.general.as_ref().map(|g| g.name.clone()),
    };
    let skg_count = skg.len();
    let corpus = if m.mixture.by_tokens {
        mixture::build_mixture_by_tokens(skg, &general_pool, &spec, tokenizer.as_ref())
    } else {
        mixture::build_mixture(skg, &general_pool, &spec)
    }
    .map_err(|e| Failure::Validation(format!("mixture: {e}")))?;

    let general_records = corpus.len() - skg_count;
    let (ratio, token_ratio) = if corpus.is_empty() {
        (0.0, 0.0)
    } else {
        let internal = |e: mixture::MixtureError| Failure::Internal(e.to_string());
        (
            mixture::general_ratio(&corpus).map_err(internal)?,
            mixture::general_token_ratio(&corpus, tokenizer.as_ref()).map_err(internal)?,
        )
    };
    check_ratio(&m.mixture, ratio, corpus.len(), skg_count, general_records)?;

    let mut bytes = Vec::new();
    for r in &corpus {
        serde_json::to_writer(&mut bytes, r).map_err(|e| Failure::Internal(e.to_string()))?;
        bytes.write_all(b"\n").expect("write to vec");
    }
    write_atomic(out, &bytes)?;

    let report = BuildReport {
        corpus: out.to_path_buf(),
        seed: m.seed,
        tokenizer: tokenizer.id(),
        budget: m.budget,
        general_fraction: m.mixture.general_fraction,
        by_tokens: m.mixture.by_tokens,
        sampling: m.mixture.sampling,
        records: corpus.len(),
        skg_records: skg_count,
        general_records,
        general_ratio: ratio,
        general_token_ratio: token_ratio,
        datasets,
        general: general_counts,
    };
    let report_path = sibling(out, "report.json");
    write_json(&report_path, &report)?;
    print_summary(&report);
    Ok(report_path)
}

/// By-record mixtures land within one record of the requested fraction.
fn check_ratio(
    settings: &ingest::MixtureSettings,
    ratio: f64,
    total: usize,
    skg: usize,
    general: usize,
) -> Result<(), Failure> {
    if settings.by_tokens || total == 0 {
        return Ok(());
    }
    let expected = mixture::required_general_count(skg, settings.general_fraction);
    if general != expected {
        return Err(Failure::Internal(format!(
            "mixed {general} general records, expected {expected}"
        )));
    }
    let tolerance = 1.0 / total as f64 + 1e-12;
    if (ratio - settings.general_fraction).abs() > tolerance {
        return Err(Failure::Internal(format!(
            "general ratio {ratio} is more than 1/{total} from {}",
            settings.general_fraction
        )));
    }
    Ok(())
}

fn print_summary(r: &BuildReport) {
    println!(
        "{:<24} {:>8} {:>8} {:>9} {:>9}",
        "dataset", "examples", "fitted", "truncated", "discarded"
    );
    for c in r.datasets.iter().chain(&r.general) {
        println!(
            "{:<24} {:>8} {:>8} {:>9} {:>9}",
            c.name, c.examples, c.fitted, c.truncated, c.discarded
        );
    }
    println!(
        "corpus: {} records ({} skg, {} general), general ratio {:.4} (requested {}), tokenizer {}, seed {}",
        r.records, r.skg_records, r.general_records, r.general_ratio, r.general_fraction, r.tokenizer, r.seed
    );
}
