use std::path::Path;

use skgkit::budget::{FitMode, FitOutcome};
use skgkit::ingest::{self, Split};
use skgkit::prompt::{pick_instruction, render_training_record, PromptTemplate};
use skgkit::{linearize, Execution};

use crate::fail::Failure;
use crate::setup::{self, Overrides};

pub fn run(
    manifest_path: &Path,
    id: &str,
    split: Split,
    mode: FitMode,
    overrides: &Overrides,
    exec: Execution,
) -> Result<(), Failure> {
    let m = setup::manifest(manifest_path, overrides, true)?;
    let tokenizer = setup::tokenizer(&m)?;
    let template = PromptTemplate::default();
    let pools = ingest::load_pools(&m)?;
    let loaded = ingest::load_split(&m, split, exec)?;
    let example = loaded
        .iter()
        .flat_map(|(_, examples)| examples)
        .find(|e| e.id == id)
        .ok_or_else(|| Failure::Validation(format!("no example with id {id:?} in the {} split", split.as_str())))?;

    let pool = &pools[&example.dataset];
    let opts = setup::render_options(&m, mode);
    let fit = render_training_record(example, pool, &template, tokenizer.as_ref(), &opts)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let full = linearize(&example.knowledge, &m.linearization).map_err(|e| Failure::Validation(e.to_string()))?;
    let instruction = pick_instruction(pool, m.seed, &example.id);
    let count = |s: &str| tokenizer.count(s);

    println!("id:        {}", example.id);
    println!("dataset:   {} ({})", example.dataset, example.knowledge.variant());
    println!("tokenizer: {}", tokenizer.id());
    let outcome = match fit.outcome {
        FitOutcome::Fitted => "fitted".to_string(),
        FitOutcome::Truncated => format!("truncated ({} knowledge tokens removed)", fit.tokens_removed),
        FitOutcome::Discarded => "discarded".to_string(),
    };
    println!("outcome:   {outcome}");
    let limit = match mode {
        FitMode::Train => format!("{} (prompt + completion)", m.budget.train_max),
        FitMode::Inference => format!("{} (prompt only)", m.budget.inference_input_max),
    };
    println!("budget:    {limit}");
    println!();
    println!("{:<12} {:>8}", "segment", "tokens");
    println!("{:<12} {:>8}", "system", count(template.system_prompt()));
    println!("{:<12} {:>8}", "instruction", count(instruction));
    match &fit.kept_knowledge {
        Some(k) => println!("{:<12} {:>8}  of {}", "knowledge", count(k), count(&full)),
        None => println!("{:<12} {:>8}", "knowledge", count(&full)),
    }
    println!("{:<12} {:>8}", "context", count(&example.context));
    if let Some(r) = &fit.record {
        println!("{:<12} {:>8}", "prompt", count(&r.prompt));
    }
    println!("{:<12} {:>8}", "completion", count(&example.gold_output));
    if let Some(r) = &fit.record {
        println!();
        println!("--- prompt ---");
        println!("{}", r.prompt);
        println!("--- completion ---");
        println!("{}", r.completion);
    }
    Ok(())
}
