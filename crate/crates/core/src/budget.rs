//! Token budgets and the truncate-or-discard policy.
//!
//! Only the structured segment is ever shortened: the longest token-boundary
//! prefix of the linearized knowledge is kept such that the assembled record
//! fits. If the record does not fit even with an empty structured segment it
//! is discarded.
//!
//! In train mode the cost is `count(prompt) + count(completion)`, the prompt
//! and label being tokenized separately. In inference mode only the prompt is
//! counted.

use serde::{Deserialize, Serialize};

use crate::prompt::{assemble_prompt, compose_input, PromptTemplate};
use crate::tokenizer::Tokenizer;
use crate::types::{Origin, TrainingRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenBudget {
    pub train_max: usize,
    pub inference_input_max: usize,
    pub generation_max: usize,
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            train_max: 2048,
            inference_input_max: 2048,
            generation_max: 1024,
        }
    }
}

impl TokenBudget {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("train_max", self.train_max),
            ("inference_input_max", self.inference_input_max),
            ("generation_max", self.generation_max),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    pub fn limit(&self, mode: FitMode) -> usize {
        match mode {
            FitMode::Train => self.train_max,
            FitMode::Inference => self.inference_input_max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Prompt plus label must fit `train_max`.
    Train,
    /// Prompt alone must fit `inference_input_max`.
    Inference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted,
    Truncated,
    Discarded,
}

/// Where the structured segment may be cut.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Granularity {
    /// Any token boundary.
    Token,
    /// Only at these byte offsets (plus the empty prefix), e.g. table row
    /// separators.
    Boundaries(Vec<usize>),
}

/// Everything in a record except the structured segment.
#[derive(Clone, Copy, Debug)]
pub struct FixedParts<'a> {
    pub id: &'a str,
    pub dataset: &'a str,
    pub origin: Origin,
    pub instruction: &'a str,
    pub context: &'a str,
    pub gold_output: &'a str,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FitResult {
    pub outcome: FitOutcome,
    /// Absent iff discarded.
    pub record: Option<TrainingRecord>,
    /// The structured segment actually used, a prefix of the input.
    pub kept_knowledge: Option<String>,
    /// Tokens cut from the structured segment; zero unless truncated.
    pub tokens_removed: usize,
}

pub fn fit_example(
    parts: &FixedParts<'_>,
    knowledge: &str,
    template: &PromptTemplate,
    budget: &TokenBudget,
    tokenizer: &dyn Tokenizer,
    mode: FitMode,
    granularity: &Granularity,
) -> FitResult {
    let limit = budget.limit(mode);
    let label_cost = match mode {
        FitMode::Train => tokenizer.count(parts.gold_output),
        FitMode::Inference => 0,
    };
    let assemble = |k: &str| assemble_prompt(parts.instruction, &compose_input(k, parts.context), template);
    let fits = |k: &str| tokenizer.count(&assemble(k)) + label_cost <= limit;
    let finish = |outcome, kept: &str, removed| FitResult {
        outcome,
        record: Some(TrainingRecord {
            id: parts.id.to_string(),
            origin: Some(parts.origin),
            prompt: assemble(kept),
            completion: parts.gold_output.to_string(),
            dataset: parts.dataset.to_string(),
        }),
        kept_knowledge: Some(kept.to_string()),
        tokens_removed: removed,
    };

    if fits(knowledge) {
        return finish(FitOutcome::Fitted, knowledge, 0);
    }
    if !fits("") {
        return FitResult {
            outcome: FitOutcome::Discarded,
            record: None,
            kept_knowledge: None,
            tokens_removed: 0,
        };
    }

    let kept = match granularity {
        Granularity::Token => longest_token_prefix(knowledge, tokenizer, &fits),
        Granularity::Boundaries(cuts) => longest_boundary_prefix(knowledge, cuts, &fits),
    };
    let removed = tokenizer.count(knowledge).saturating_sub(tokenizer.count(kept));
    finish(FitOutcome::Truncated, kept, removed)
}

/// Binary search over token counts. Invariant: `lo` tokens fit, `hi` do not.
fn longest_token_prefix<'a>(knowledge: &'a str, tokenizer: &dyn Tokenizer, fits: &dyn Fn(&str) -> bool) -> &'a str {
    let (mut lo, mut hi) = (0usize, tokenizer.count(knowledge));
    let mut best = "";
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let candidate = tokenizer.prefix_fitting(knowledge, mid);
        if fits(candidate) {
            lo = mid;
            best = candidate;
        } else {
            hi = mid;
        }
    }
    best
}

fn longest_boundary_prefix<'a>(knowledge: &'a str, cuts: &[usize], fits: &dyn Fn(&str) -> bool) -> &'a str {
    let mut cuts: Vec<usize> = cuts
        .iter()
        .copied()
        .filter(|&c| c > 0 && c < knowledge.len() && knowledge.is_char_boundary(c))
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let (mut lo, mut hi) = (0usize, cuts.len());
    let mut best = "";
    // Search the first cut that does not fit; everything before it does.
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let candidate = &knowledge[..cuts[mid]];
        if fits(candidate) {
            best = candidate;
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    best
}
