#![allow(dead_code)]

pub mod truncation;

use std::path::PathBuf;

use proptest::prelude::*;
use skgkit::types::{DialogueHistory, SkgExample, StructuredKnowledge, Table, TaskGroup, Triple, TripleSet, Turn};
use skgkit::BpeTokenizer;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn fixture_bpe() -> BpeTokenizer {
    BpeTokenizer::from_files(&fixture("bpe/vocab.json"), &fixture("bpe/merges.txt")).expect("fixture loads")
}

/// Cell text including the characters the grammar treats specially.
pub fn hostile_cell() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z0-9 ]{0,8}",
        2 => "[a-z|:\\\\ ]{0,10}",
        1 => Just(" | ".to_string()),
        1 => Just("row 1 : x".to_string()),
        1 => Just("\\".to_string()),
        1 => Just("col :".to_string()),
        1 => "\\PC{0,6}",
    ]
}

pub fn table(max_cols: usize, max_rows: usize) -> impl Strategy<Value = Table> {
    (0..=max_cols).prop_flat_map(move |cols| {
        let header = prop::collection::vec(hostile_cell(), cols);
        let rows = if cols == 0 {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec(prop::collection::vec(hostile_cell(), cols), 0..=max_rows).boxed()
        };
        (header, rows).prop_map(|(header, rows)| Table {
            header,
            rows,
            caption: None,
        })
    })
}

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

pub fn words(min: usize, max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(word(), min..=max).prop_map(|w| w.join(" "))
}

pub fn knowledge() -> impl Strategy<Value = StructuredKnowledge> {
    prop_oneof![
        (1..6usize, 1..40usize).prop_flat_map(|(cols, rows)| {
            (
                prop::collection::vec(word(), cols),
                prop::collection::vec(prop::collection::vec(words(1, 3), cols), rows),
            )
                .prop_map(|(header, rows)| {
                    StructuredKnowledge::Table(Table {
                        header,
                        rows,
                        caption: None,
                    })
                })
        }),
        prop::collection::vec((word(), word(), words(1, 4)), 1..30).prop_map(|ts| {
            StructuredKnowledge::Triples(TripleSet {
                triples: ts.into_iter().map(|(s, r, o)| Triple::new(s, r, o)).collect(),
            })
        }),
        prop::collection::vec((any::<bool>(), words(1, 12)), 1..12).prop_map(|turns| {
            StructuredKnowledge::Dialogue(DialogueHistory {
                turns: turns
                    .into_iter()
                    .map(|(u, t)| if u { Turn::user(t) } else { Turn::system(t) })
                    .collect(),
            })
        }),
        words(1, 300).prop_map(|text| StructuredKnowledge::Text { text }),
    ]
}

pub fn example() -> impl Strategy<Value = SkgExample> {
    ("[a-z]{1,4}-[0-9]{1,4}", knowledge(), words(0, 30), words(1, 60)).prop_map(|(id, knowledge, context, gold)| {
        SkgExample {
            id,
            dataset: "synthetic".into(),
            knowledge,
            context,
            gold_output: gold,
            task_group: TaskGroup::TableQa,
        }
    })
}

/// A deterministic table-backed example whose knowledge has `rows` rows.
pub fn table_example(i: usize, rows: usize, gold_words: usize) -> SkgExample {
    let table = Table::new(
        ["name", "value"],
        (0..rows).map(|r| vec![format!("item{r}"), format!("{}", r * 7 + i)]),
    );
    SkgExample {
        id: format!("ex-{i:05}"),
        dataset: "synthetic".into(),
        knowledge: StructuredKnowledge::Table(table),
        context: format!("what is the value of item{}", i % 13),
        gold_output: vec!["answer"; gold_words.max(1)].join(" "),
        task_group: TaskGroup::TableQa,
    }
}
