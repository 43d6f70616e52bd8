//! Token-length statistics per dataset split.
//!
//! Lengths are measured after rendering: the input is the assembled prompt
//! the trainer would see (template included, structured segment already
//! shortened), the output is the gold completion. Discarded examples count
//! towards `count` and `discarded_count` but not towards the averages and
//! maxima, since no record exists for them.

use serde::{Deserialize, Serialize};

use crate::budget::{FitMode, FitOutcome};
use crate::exec::{self, Execution};
use crate::prompt::{render_training_record, InstructionPool, PromptError, PromptTemplate, RenderOptions};
use crate::tokenizer::Tokenizer;
use crate::types::SkgExample;

pub const COLUMNS: [&str; 9] = [
    "Dataset",
    "Split",
    "Count",
    "Input (avg)",
    "Input (max)",
    "Output (avg)",
    "Output (max)",
    "# Trunc.",
    "# Discard.",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub dataset: String,
    pub split: String,
    pub mode: Option<FitMode>,
    pub count: usize,
    pub input_avg: f64,
    pub input_max: usize,
    pub output_avg: f64,
    pub output_max: usize,
    pub truncated_count: usize,
    pub discarded_count: usize,
}

/// One line of the per-example dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleLengths {
    pub id: String,
    pub outcome: FitOutcome,
    /// Absent when discarded.
    pub input_tokens: Option<usize>,
    pub output_tokens: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub tokenizer: String,
    pub row: StatsRow,
    pub per_example: Vec<ExampleLengths>,
}

/// Renders every example under `opts` and measures the result.
#[allow(clippy::too_many_arguments)]
pub fn dataset_stats(
    dataset: &str,
    split: &str,
    examples: &[SkgExample],
    pool: &InstructionPool,
    template: &PromptTemplate,
    tokenizer: &dyn Tokenizer,
    opts: &RenderOptions,
    exec: Execution,
) -> Result<StatsReport, PromptError> {
    let per_example = exec::try_map(examples, exec, |ex| {
        let fit = render_training_record(ex, pool, template, tokenizer, opts)?;
        let (input, output) = match &fit.record {
            Some(r) => (Some(tokenizer.count(&r.prompt)), Some(tokenizer.count(&r.completion))),
            None => (None, None),
        };
        Ok::<_, PromptError>(ExampleLengths {
            id: ex.id.clone(),
            outcome: fit.outcome,
            input_tokens: input,
            output_tokens: output,
        })
    })?;
    let mut row = summarize(&per_example);
    row.dataset = dataset.to_string();
    row.split = split.to_string();
    row.mode = Some(opts.mode);
    Ok(StatsReport {
        tokenizer: tokenizer.id(),
        row,
        per_example,
    })
}

/// Aggregates a per-example dump in input order. An empty dump gives the
/// all-zero row.
pub fn summarize(lengths: &[ExampleLengths]) -> StatsRow {
    let mut row = StatsRow {
        count: lengths.len(),
        ..Default::default()
    };
    let (mut in_sum, mut out_sum, mut kept) = (0u64, 0u64, 0u64);
    for l in lengths {
        match l.outcome {
            FitOutcome::Truncated => row.truncated_count += 1,
            FitOutcome::Discarded => row.discarded_count += 1,
            FitOutcome::Fitted => {}
        }
        if let (Some(i), Some(o)) = (l.input_tokens, l.output_tokens) {
            in_sum += i as u64;
            out_sum += o as u64;
            kept += 1;
            row.input_max = row.input_max.max(i);
            row.output_max = row.output_max.max(o);
        }
    }
    if kept > 0 {
        row.input_avg = in_sum as f64 / kept as f64;
        row.output_avg = out_sum as f64 / kept as f64;
    }
    row
}

/// Fixed-width text table, averages to one decimal.
pub fn render_table(rows: &[StatsRow]) -> String {
    let cells: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            let split = match r.mode {
                Some(FitMode::Inference) => format!("{} (input only)", r.split),
                _ => r.split.clone(),
            };
            [
                r.dataset.clone(),
                split,
                r.count.to_string(),
                format!("{:.1}", r.input_avg),
                r.input_max.to_string(),
                format!("{:.1}", r.output_avg),
                r.output_max.to_string(),
                r.truncated_count.to_string(),
                r.discarded_count.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |values: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = values
            .zip(&widths)
            .enumerate()
            .map(|(i, (v, w))| if i < 2 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&mut COLUMNS.iter().copied());
    out.push('\n');
    for row in &cells {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::WhitespaceTokenizer;
    use crate::types::{StructuredKnowledge, TaskGroup};

    fn example(id: &str, words: usize) -> SkgExample {
        SkgExample {
            id: id.into(),
            dataset: "d".into(),
            knowledge: StructuredKnowledge::Text {
                text: vec!["w"; words].join(" "),
            },
            context: String::new(),
            gold_output: "g".into(),
            task_group: TaskGroup::TableQa,
        }
    }

    fn pool() -> InstructionPool {
        InstructionPool::new("d", vec!["go".into()]).unwrap()
    }

    #[test]
    fn empty_dataset_is_all_zero() {
        let r = dataset_stats(
            "d",
            "train",
            &[],
            &pool(),
            &PromptTemplate::default(),
            &WhitespaceTokenizer,
            &RenderOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.row.count, 0);
        assert_eq!(r.row.input_avg, 0.0);
        assert_eq!(r.row.input_max, 0);
        assert_eq!(r.row.truncated_count + r.row.discarded_count, 0);
    }

    #[test]
    fn two_examples_average() {
        let t = PromptTemplate::default();
        let overhead = WhitespaceTokenizer.count(&crate::prompt::assemble_prompt("go", "", &t));
        let exs = [example("a", 10), example("b", 20)];
        let r = dataset_stats(
            "d",
            "train",
            &exs,
            &pool(),
            &t,
            &WhitespaceTokenizer,
            &RenderOptions::default(),
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(r.row.input_avg, 15.0 + overhead as f64);
        assert_eq!(r.row.input_max, 20 + overhead);
        assert_eq!(r.row.output_avg, 1.0);
        assert_eq!(r.row.truncated_count, 0);
        assert_eq!(r.per_example[0].input_tokens, Some(10 + overhead));
    }

    #[test]
    fn table_has_nine_columns() {
        let text = render_table(&[StatsRow {
            dataset: "toy".into(),
            split: "train".into(),
            count: 2,
            input_avg: 15.04,
            ..Default::default()
        }]);
        let header = text.lines().next().unwrap();
        for c in COLUMNS {
            assert!(header.contains(c));
        }
        assert!(text.contains("15.0"));
        assert!(!text.contains("15.04"));
    }
}
