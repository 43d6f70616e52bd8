use std::path::{Path, PathBuf};

use skgkit::metrics::{evaluate, MetricKind, MetricSpec, Normalization, Smoothing};
use skgkit::Execution;

use crate::fail::Failure;
use crate::output::{sibling, write_json};

pub fn default_out(pred: &Path, kind: MetricKind) -> PathBuf {
    sibling(pred, &format!("{kind}.json"))
}

pub fn run(
    pred: &Path,
    reference: &Path,
    kind: MetricKind,
    normalization: Normalization,
    smoothing: Smoothing,
    out: &Path,
    exec: Execution,
) -> Result<PathBuf, Failure> {
    let spec = MetricSpec {
        kind,
        normalization,
        smoothing,
    };
    let report = evaluate(pred, reference, &spec, exec)?;
    let max = kind.max_score();
    if !(0.0..=max).contains(&report.score) {
        return Err(Failure::Internal(format!("score {} outside [0, {max}]", report.score)));
    }
    write_json(out, &report)?;
    println!("{kind}: {:.4} ({} examples)", report.score, report.count);
    if let Some(b) = &report.bleu {
        println!("smoothing: {}", b.smoothing);
    }
    Ok(out.to_path_buf())
}
