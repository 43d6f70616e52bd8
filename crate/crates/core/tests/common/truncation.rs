use proptest::prelude::*;
use skgkit::prompt::compose_input;
use skgkit::types::Origin;
use skgkit::{
    assemble_prompt, fit_example, FitMode, FitOutcome, FitResult, FixedParts, Granularity, PromptTemplate, SkgExample,
    TokenBudget, Tokenizer,
};

pub const INSTRUCTION: &str = "Answer the question using the structured input.";

pub fn parts(ex: &SkgExample) -> FixedParts<'_> {
    FixedParts {
        id: &ex.id,
        dataset: &ex.dataset,
        origin: Origin::Skg,
        instruction: INSTRUCTION,
        context: &ex.context,
        gold_output: &ex.gold_output,
    }
}

pub fn budget(limit: usize) -> TokenBudget {
    TokenBudget {
        train_max: limit,
        inference_input_max: limit,
        generation_max: 1024,
    }
}

pub fn fit(ex: &SkgExample, knowledge: &str, limit: usize, mode: FitMode, tok: &dyn Tokenizer) -> FitResult {
    fit_example(
        &parts(ex),
        knowledge,
        &PromptTemplate::default(),
        &budget(limit),
        tok,
        mode,
        &Granularity::Token,
    )
}

pub fn cost(prompt: &str, completion: &str, mode: FitMode, tok: &dyn Tokenizer) -> usize {
    tok.count(prompt)
        + match mode {
            FitMode::Train => tok.count(completion),
            FitMode::Inference => 0,
        }
}

pub fn mode() -> impl Strategy<Value = FitMode> {
    prop_oneof![Just(FitMode::Train), Just(FitMode::Inference)]
}

/// Every property of a single fit that holds for any tokenizer.
pub fn check_fit(
    ex: &SkgExample,
    knowledge: &str,
    limit: usize,
    mode: FitMode,
    tok: &dyn Tokenizer,
) -> Result<(), TestCaseError> {
    let template = PromptTemplate::default();
    let r = fit(ex, knowledge, limit, mode, tok);
    let floor = cost(
        &assemble_prompt(INSTRUCTION, &compose_input("", &ex.context), &template),
        &ex.gold_output,
        mode,
        tok,
    );
    if r.outcome == FitOutcome::Discarded {
        prop_assert!(r.record.is_none());
        prop_assert!(
            floor > limit,
            "discarded although the empty-knowledge record costs {floor} <= {limit}"
        );
        return Ok(());
    }
    let rec = r.record.as_ref().unwrap();
    let kept = r.kept_knowledge.as_deref().unwrap();
    // Budget compliance.
    prop_assert!(cost(&rec.prompt, &rec.completion, mode, tok) <= limit);
    // Prefix property.
    prop_assert!(knowledge.starts_with(kept));
    // Everything except the structured segment is byte-identical.
    prop_assert_eq!(
        &rec.prompt,
        &assemble_prompt(INSTRUCTION, &compose_input(kept, &ex.context), &template)
    );
    prop_assert_eq!(&rec.completion, &ex.gold_output);
    prop_assert_eq!(&rec.id, &ex.id);
    match r.outcome {
        FitOutcome::Fitted => {
            prop_assert_eq!(kept, knowledge);
            prop_assert_eq!(r.tokens_removed, 0);
        }
        FitOutcome::Truncated => prop_assert!(kept.len() < knowledge.len()),
        FitOutcome::Discarded => unreachable!(),
    }
    // Idempotence: fitting the fitted knowledge changes nothing.
    let again = fit(ex, kept, limit, mode, tok);
    prop_assert_eq!(again.outcome, FitOutcome::Fitted);
    prop_assert_eq!(again.record.as_ref(), Some(rec));
    Ok(())
}

/// Maximality and monotonicity, which need a tokenizer whose prefixes are
/// whole tokens.
pub fn check_whitespace_extras(
    ex: &SkgExample,
    knowledge: &str,
    limit: usize,
    mode: FitMode,
) -> Result<(), TestCaseError> {
    let tok = skgkit::WhitespaceTokenizer;
    let r = fit(ex, knowledge, limit, mode, &tok);
    if r.outcome == FitOutcome::Truncated {
        // One more token of knowledge would not fit.
        let kept = r.kept_knowledge.as_deref().unwrap();
        let longer = tok.prefix_fitting(knowledge, tok.count(kept) + 1);
        let over = assemble_prompt(
            INSTRUCTION,
            &compose_input(longer, &ex.context),
            &PromptTemplate::default(),
        );
        prop_assert!(cost(&over, &ex.gold_output, mode, &tok) > limit);
    }
    // A larger budget keeps at least as much.
    let bigger = fit(ex, knowledge, limit + 1 + limit / 3, mode, &tok);
    match (r.kept_knowledge.as_deref(), bigger.kept_knowledge.as_deref()) {
        (Some(small), Some(large)) => prop_assert!(large.starts_with(small)),
        (Some(_), None) => prop_assert!(false, "larger budget discarded a fitting example"),
        _ => {}
    }
    Ok(())
}

/// The gold output alone overflows the training budget by `extra` tokens.
pub fn check_oversized_gold(
    ex: SkgExample,
    knowledge: &str,
    extra: usize,
    gold_words: usize,
) -> Result<(), TestCaseError> {
    let tok = skgkit::WhitespaceTokenizer;
    let ex = SkgExample {
        gold_output: vec!["g"; gold_words].join(" "),
        ..ex
    };
    let fixed = tok.count(&assemble_prompt(
        INSTRUCTION,
        &compose_input("", &ex.context),
        &PromptTemplate::default(),
    ));
    let limit = (fixed + gold_words).saturating_sub(extra).max(1);
    let r = fit(&ex, knowledge, limit, FitMode::Train, &tok);
    prop_assert_eq!(r.outcome, FitOutcome::Discarded);
    prop_assert!(r.record.is_none());
    Ok(())
}
