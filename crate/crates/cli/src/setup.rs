use std::path::Path;
use std::sync::Arc;

use clap::Args;
use skgkit::budget::FitMode;
use skgkit::ingest::{validate_manifest, CorpusManifest};
use skgkit::prompt::RenderOptions;
use skgkit::tokenizer::Tokenizer;
use skgkit::Execution;

use crate::fail::Failure;

/// Flags that override manifest settings.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Seed for instruction picks and mixture sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of general instruction records in the corpus, in [0, 1).
    #[arg(long)]
    pub general_fraction: Option<f64>,
    /// Token limit for prompt plus completion in training records.
    #[arg(long)]
    pub train_max: Option<usize>,
    /// Token limit for the prompt at inference time.
    #[arg(long)]
    pub infer_max: Option<usize>,
    /// Maximum generation length recorded in reports.
    #[arg(long)]
    pub gen_max: Option<usize>,
    /// Measure the general fraction in tokens instead of records.
    #[arg(long)]
    pub by_tokens: bool,
}

impl Overrides {
    pub fn apply(&self, m: &mut CorpusManifest) {
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(r) = self.general_fraction {
            m.mixture.general_fraction = r;
        }
        if let Some(v) = self.train_max {
            m.budget.train_max = v;
        }
        if let Some(v) = self.infer_max {
            m.budget.inference_input_max = v;
        }
        if let Some(v) = self.gen_max {
            m.budget.generation_max = v;
        }
        if self.by_tokens {
            m.mixture.by_tokens = true;
        }
    }
}

/// Loads, overrides and validates a manifest.
pub fn manifest(path: &Path, overrides: &Overrides, missing_is_io: bool) -> Result<CorpusManifest, Failure> {
    let mut m = CorpusManifest::load(path)?;
    overrides.apply(&mut m);
    validate_manifest(&m).map_err(|v| Failure::from_violations(&v, missing_is_io))?;
    Ok(m)
}

pub fn tokenizer(m: &CorpusManifest) -> Result<Arc<dyn Tokenizer>, Failure> {
    Ok(m.tokenizer.load()?)
}

pub fn render_options(m: &CorpusManifest, mode: FitMode) -> RenderOptions {
    RenderOptions {
        linearization: m.linearization.clone(),
        budget: m.budget,
        mode,
        row_granular: m.row_granular,
        seed: m.seed,
    }
}

/// Runs `f` on a pool of `jobs` workers. `--jobs 1` runs sequentially;
/// without the `parallel` feature everything is sequential.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce(Execution) -> T + Send) -> T {
    let exec = jobs.map_or(Execution::Parallel, Execution::from_jobs);
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs.filter(|&n| n > 1) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(|| f(exec));
        }
    }
    f(exec)
}
