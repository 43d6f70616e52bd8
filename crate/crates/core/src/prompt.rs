//! Prompt assembly and instruction pools.
//!
//! Every SKG record uses the same Llama-2 style scaffold and the same system
//! prompt. Instructions are drawn per example from a pool of paraphrases, keyed
//! on `(seed, example id)` so a corpus build is order independent.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{fit_example, FitMode, FitResult, FixedParts, Granularity, TokenBudget};
use crate::exec::{self, Execution};
use crate::hash;
use crate::linearize::{linearize, linearize_table_with_rows, LinearizationConfig, LinearizeError};
use crate::tokenizer::Tokenizer;
use crate::types::{Origin, SkgExample, StructuredKnowledge};

// Lines two and three end in a trailing space.
pub const SKG_SYSTEM_PROMPT: &str = concat!(
    "You are an AI assistant that specializes in analyzing and reasoning\n",
    "over structured information. You will be given a task, optionally \n",
    "with some structured knowledge input. Your answer must strictly \n",
    "adhere to the output format, if specified.",
);

pub const SKG_TEMPLATE: &str = "[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{instruction} {input} [/INST]";

/// Separator between the linearized knowledge and the accompanying text.
pub const KNOWLEDGE_CONTEXT_SEPARATOR: &str = "\n\n";

const SYS_OPEN: &str = "<<SYS>>\n";
const SYS_CLOSE: &str = "\n<</SYS>>";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template placeholder {0} must appear exactly once")]
    Placeholder(&'static str),
    #[error("instruction pool for {dataset:?}: {detail}")]
    Pool { dataset: String, detail: String },
    #[error("no instruction pool for dataset {0:?}")]
    MissingPool(String),
    #[error("{path}: {detail}")]
    PoolFile { path: PathBuf, detail: String },
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    System,
    Instruction,
    Input,
}

/// A scaffold with `{system}`, `{instruction}` and `{input}` placeholders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    template: String,
    system: String,
    pieces: Vec<(String, Option<Slot>)>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(SKG_TEMPLATE, SKG_SYSTEM_PROMPT).expect("built-in template is valid")
    }
}

impl PromptTemplate {
    pub fn new(template: &str, system: &str) -> Result<Self, PromptError> {
        let names = [
            ("{system}", Slot::System),
            ("{instruction}", Slot::Instruction),
            ("{input}", Slot::Input),
        ];
        for (name, _) in names {
            if template.matches(name).count() != 1 {
                return Err(PromptError::Placeholder(name));
            }
        }
        let mut pieces = Vec::new();
        let mut rest = template;
        loop {
            let next = names
                .iter()
                .filter_map(|(n, s)| rest.find(n).map(|i| (i, *n, *s)))
                .min_by_key(|(i, _, _)| *i);
            match next {
                Some((i, name, slot)) => {
                    pieces.push((rest[..i].to_string(), Some(slot)));
                    rest = &rest[i + name.len()..];
                }
                None => {
                    pieces.push((rest.to_string(), None));
                    break;
                }
            }
        }
        Ok(PromptTemplate {
            template: template.to_string(),
            system: system.to_string(),
            pieces,
        })
    }

    pub fn system_prompt(&self) -> &str {
        &self.system
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    fn render(&self, instruction: &str, input: &str) -> String {
        let mut out = String::with_capacity(self.template.len() + self.system.len() + instruction.len() + input.len());
        for (literal, slot) in &self.pieces {
            match slot {
                Some(Slot::Input) if input.is_empty() => {
                    // A missing input elides its separating space.
                    out.push_str(literal.strip_suffix(' ').unwrap_or(literal));
                }
                _ => out.push_str(literal),
            }
            match slot {
                Some(Slot::System) => out.push_str(&self.system),
                Some(Slot::Instruction) => out.push_str(instruction),
                Some(Slot::Input) => out.push_str(input),
                None => {}
            }
        }
        out
    }
}

/// Substitutes `instruction` and `input` into `template` byte-exactly.
pub fn assemble_prompt(instruction: &str, input: &str, template: &PromptTemplate) -> String {
    template.render(instruction, input)
}

/// Joins the (possibly truncated) knowledge and the context, eliding the
/// separator when either side is empty.
pub fn compose_input(knowledge: &str, context: &str) -> String {
    match (knowledge.is_empty(), context.is_empty()) {
        (true, _) => context.to_string(),
        (false, true) => knowledge.to_string(),
        (false, false) => format!("{knowledge}{KNOWLEDGE_CONTEXT_SEPARATOR}{context}"),
    }
}

/// Returns the text between `<<SYS>>\n` and `\n<</SYS>>`, if present.
pub fn extract_system_segment(prompt: &str) -> Option<&str> {
    let start = prompt.find(SYS_OPEN)? + SYS_OPEN.len();
    let len = prompt[start..].find(SYS_CLOSE)?;
    Some(&prompt[start..start + len])
}

/// Instruction paraphrases for one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPool {
    pub dataset: String,
    pub variations: Vec<String>,
}

impl InstructionPool {
    pub const MAX_VARIATIONS: usize = 10;

    pub fn new(dataset: impl Into<String>, variations: Vec<String>) -> Result<Self, PromptError> {
        let pool = InstructionPool {
            dataset: dataset.into(),
            variations,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let fail = |detail: String| {
            Err(PromptError::Pool {
                dataset: self.dataset.clone(),
                detail,
            })
        };
        if self.variations.is_empty() {
            return fail("no variations".into());
        }
        if self.variations.len() > Self::MAX_VARIATIONS {
            return fail(format!(
                "{} variations, at most {} allowed",
                self.variations.len(),
                Self::MAX_VARIATIONS
            ));
        }
        if let Some(i) = self.variations.iter().position(|v| v.trim().is_empty()) {
            return fail(format!("variation {i} is empty"));
        }
        Ok(())
    }

    /// Reads a pool file (JSON Lines of `{"dataset", "variations"}`) and
    /// returns the record for `dataset`.
    pub fn load(path: &Path, dataset: &str) -> Result<Self, PromptError> {
        let file_err = |detail: String| PromptError::PoolFile {
            path: path.to_path_buf(),
            detail,
        };
        let file = File::open(path).map_err(|e| file_err(e.to_string()))?;
        let mut found: Option<InstructionPool> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| file_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let pool: InstructionPool =
                serde_json::from_str(&line).map_err(|e| file_err(format!("line {}: {e}", i + 1)))?;
            if pool.dataset == dataset {
                if found.is_some() {
                    return Err(file_err(format!("line {}: second record for {dataset:?}", i + 1)));
                }
                found = Some(pool);
            }
        }
        let pool = found.ok_or_else(|| PromptError::MissingPool(dataset.to_string()))?;
        pool.validate()?;
        Ok(pool)
    }
}

/// Deterministic pick keyed on `(seed, example_id)`; uniform over the
/// variations across many ids.
pub fn pick_instruction<'a>(pool: &'a InstructionPool, seed: u64, example_id: &str) -> &'a str {
    let i = hash::bucket(hash::keyed_hash(seed, example_id), pool.variations.len());
    &pool.variations[i]
}

/// Settings for turning examples into records.
#[derive(Clone, Debug)]
pub struct RenderOptions {
    pub linearization: LinearizationConfig,
    pub budget: TokenBudget,
    pub mode: FitMode,
    /// Truncate tables at row boundaries instead of token boundaries.
    pub row_granular: bool,
    pub seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            linearization: LinearizationConfig::default(),
            budget: TokenBudget::default(),
            mode: FitMode::Train,
            row_granular: false,
            seed: 0,
        }
    }
}

/// linearize -> pick instruction -> assemble -> fit.
pub fn render_training_record(
    example: &SkgExample,
    pool: &InstructionPool,
    template: &PromptTemplate,
    tokenizer: &dyn Tokenizer,
    opts: &RenderOptions,
) -> Result<FitResult, PromptError> {
    let (knowledge, granularity) = match (&example.knowledge, opts.row_granular) {
        (StructuredKnowledge::Table(t), true) => {
            let (text, rows) = linearize_table_with_rows(t, &opts.linearization)?;
            (text, Granularity::Boundaries(rows))
        }
        (k, _) => (linearize(k, &opts.linearization)?, Granularity::Token),
    };
    let parts = FixedParts {
        id: &example.id,
        dataset: &example.dataset,
        origin: Origin::Skg,
        instruction: pick_instruction(pool, opts.seed, &example.id),
        context: &example.context,
        gold_output: &example.gold_output,
    };
    Ok(fit_example(
        &parts,
        &knowledge,
        template,
        &opts.budget,
        tokenizer,
        opts.mode,
        &granularity,
    ))
}

/// Renders a whole dataset. Output order matches input order for either
/// execution mode.
pub fn render_dataset(
    examples: &[SkgExample],
    pool: &InstructionPool,
    template: &PromptTemplate,
    tokenizer: &dyn Tokenizer,
    opts: &RenderOptions,
    exec: Execution,
) -> Result<Vec<FitResult>, PromptError> {
    exec::try_map(examples, exec, |ex| {
        render_training_record(ex, pool, template, tokenizer, opts)
    })
}

/// Renders examples from several datasets, failing on any dataset without a
/// pool.
pub fn render_with_pools(
    examples: &[SkgExample],
    pools: &HashMap<String, InstructionPool>,
    template: &PromptTemplate,
    tokenizer: &dyn Tokenizer,
    opts: &RenderOptions,
    exec: Execution,
) -> Result<Vec<FitResult>, PromptError> {
    if let Some(ex) = examples.iter().find(|e| !pools.contains_key(&e.dataset)) {
        return Err(PromptError::MissingPool(ex.dataset.clone()));
    }
    exec::try_map(examples, exec, |ex| {
        render_training_record(ex, &pools[&ex.dataset], template, tokenizer, opts)
    })
}

/// A general instruction-following example without structured knowledge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralExample {
    pub id: String,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
}

/// General examples share the SKG scaffold; there is no structured segment
/// to shrink, so they either fit or are discarded.
pub fn render_general(
    example: &GeneralExample,
    dataset: &str,
    template: &PromptTemplate,
    tokenizer: &dyn Tokenizer,
    budget: &TokenBudget,
    mode: FitMode,
) -> FitResult {
    let parts = FixedParts {
        id: &example.id,
        dataset,
        origin: Origin::General,
        instruction: &example.instruction,
        context: &example.input,
        gold_output: &example.output,
    };
    fit_example(&parts, "", template, budget, tokenizer, mode, &Granularity::Token)
}
