//! Structural validation of examples. Violations are data, never panics.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::types::{DatabaseSchema, DialogueHistory, SkgExample, StructuredKnowledge, Table, TripleSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Returns every invariant violation of `example`, in a fixed order:
/// identity fields first, then the knowledge payload.
pub fn validate_example(example: &SkgExample) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if example.id.trim().is_empty() {
        out.push(Violation("id is empty".into()));
    }
    if example.gold_output.trim().is_empty() {
        out.push(Violation("gold output is empty".into()));
    }
    knowledge_violations(&example.knowledge, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub fn validate_knowledge(knowledge: &StructuredKnowledge) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    knowledge_violations(knowledge, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn knowledge_violations(knowledge: &StructuredKnowledge, out: &mut Vec<Violation>) {
    match knowledge {
        StructuredKnowledge::Table(t) => table_violations(t, out),
        StructuredKnowledge::Triples(t) => triple_violations(t, out),
        StructuredKnowledge::Schema(s) => schema_violations(s, out),
        StructuredKnowledge::Dialogue(d) => dialogue_violations(d, out),
        StructuredKnowledge::Text { .. } => {}
    }
}

fn table_violations(table: &Table, out: &mut Vec<Violation>) {
    let width = table.header.len();
    if width == 0 && !table.rows.is_empty() {
        out.push(Violation("table has rows but no headers".into()));
        return;
    }
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != width {
            out.push(Violation(format!(
                "row {} length {} != {width} headers",
                i + 1,
                row.len()
            )));
        }
    }
}

fn triple_violations(set: &TripleSet, out: &mut Vec<Violation>) {
    if set.triples.is_empty() {
        out.push(Violation("triple set is empty".into()));
    }
    for (i, t) in set.triples.iter().enumerate() {
        for (field, value) in [
            ("subject", &t.subject),
            ("relation", &t.relation),
            ("object", &t.object),
        ] {
            if value.trim().is_empty() {
                out.push(Violation(format!("triple {i} has empty {field}")));
            }
        }
    }
}

fn schema_violations(schema: &DatabaseSchema, out: &mut Vec<Violation>) {
    let mut tables = HashSet::new();
    for table in &schema.tables {
        if !tables.insert(table.name.as_str()) {
            out.push(Violation(format!("duplicate table name {:?}", table.name)));
        }
        let mut cols = HashSet::new();
        for col in &table.columns {
            if !cols.insert(col.name.as_str()) {
                out.push(Violation(format!(
                    "duplicate column {:?} in table {:?}",
                    col.name, table.name
                )));
            }
        }
    }
    let resolves = |table: &str, column: &str| {
        schema
            .tables
            .iter()
            .any(|t| t.name == table && t.columns.iter().any(|c| c.name == column))
    };
    for (i, fk) in schema.foreign_keys.iter().enumerate() {
        for end in [&fk.from, &fk.to] {
            if !resolves(&end.table, &end.column) {
                out.push(Violation(format!(
                    "foreign key {i} endpoint {end} does not resolve to a declared column"
                )));
            }
        }
    }
}

fn dialogue_violations(history: &DialogueHistory, out: &mut Vec<Violation>) {
    if history.turns.is_empty() {
        out.push(Violation("dialogue history is empty".into()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Column, ColumnRef, ForeignKey, SchemaTable, TaskGroup, Triple};

    fn example(knowledge: StructuredKnowledge) -> SkgExample {
        SkgExample {
            id: "ex-1".into(),
            dataset: "toy".into(),
            knowledge,
            context: "q".into(),
            gold_output: "a".into(),
            task_group: TaskGroup::TableQa,
        }
    }

    fn schema_with_fk(to: &str) -> DatabaseSchema {
        DatabaseSchema {
            database: "concert".into(),
            tables: vec![
                SchemaTable {
                    name: "singer".into(),
                    columns: vec![Column {
                        name: "id".into(),
                        type_tag: None,
                    }],
                },
                SchemaTable {
                    name: "show".into(),
                    columns: vec![Column {
                        name: "singer_id".into(),
                        type_tag: None,
                    }],
                },
            ],
            foreign_keys: vec![ForeignKey {
                from: ColumnRef::new("singer", "id"),
                to: to.parse().unwrap(),
            }],
        }
    }

    #[test]
    fn well_formed_table_is_ok() {
        let t = Table::new(["a", "b"], [["1", "2"], ["3", "4"]]);
        assert_eq!(validate_example(&example(StructuredKnowledge::Table(t))), Ok(()));
    }

    #[test]
    fn ragged_row_is_reported() {
        let t = Table::new(["a", "b"], [vec!["1", "2", "3"]]);
        let v = validate_example(&example(StructuredKnowledge::Table(t))).unwrap_err();
        assert_eq!(v, vec![Violation("row 1 length 3 != 2 headers".into())]);
    }

    #[test]
    fn rows_without_headers() {
        let t = Table::new(Vec::<String>::new(), [vec!["x"]]);
        let v = validate_example(&example(StructuredKnowledge::Table(t))).unwrap_err();
        assert_eq!(v[0].0, "table has rows but no headers");
    }

    #[test]
    fn dangling_foreign_key_names_endpoint() {
        let ok = schema_with_fk("show.singer_id");
        assert!(validate_knowledge(&StructuredKnowledge::Schema(ok)).is_ok());
        let bad = schema_with_fk("show.artist_id");
        let v = validate_knowledge(&StructuredKnowledge::Schema(bad)).unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].0.contains("show.artist_id"), "{}", v[0]);
    }

    #[test]
    fn duplicate_schema_names() {
        let mut s = schema_with_fk("show.singer_id");
        s.tables.push(s.tables[0].clone());
        s.tables[1].columns.push(Column {
            name: "singer_id".into(),
            type_tag: Some("int".into()),
        });
        let v = validate_knowledge(&StructuredKnowledge::Schema(s)).unwrap_err();
        let msgs: Vec<_> = v.iter().map(|v| v.0.as_str()).collect();
        assert!(msgs.contains(&"duplicate table name \"singer\""));
        assert!(msgs.contains(&"duplicate column \"singer_id\" in table \"show\""));
    }

    #[test]
    fn empty_gold_and_blank_triple_field() {
        let mut ex = example(StructuredKnowledge::Triples(TripleSet {
            triples: vec![Triple::new("Mars", " ", "3389 km")],
        }));
        ex.gold_output = "  ".into();
        let v = validate_example(&ex).unwrap_err();
        assert_eq!(
            v,
            vec![
                Violation("gold output is empty".into()),
                Violation("triple 0 has empty relation".into())
            ]
        );
    }

    #[test]
    fn empty_dialogue_and_triples() {
        let d = validate_knowledge(&StructuredKnowledge::Dialogue(DialogueHistory::default()));
        assert_eq!(d.unwrap_err()[0].0, "dialogue history is empty");
        let t = validate_knowledge(&StructuredKnowledge::Triples(TripleSet::default()));
        assert_eq!(t.unwrap_err()[0].0, "triple set is empty");
    }
}
