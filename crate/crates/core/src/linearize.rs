//! Flattening of structured knowledge into prompt text.
//!
//! Grammars (with the default configuration):
//!
//! ```text
//! table     col : h1 | h2 row 1 : v1 | v2 row 2 : ...
//! triples   s1 : r1 : o1 | s2 : r2 : o2
//! schema    db | t1 : c1, c2 | t2 : c1 | fk : t1.c1 = t2.c2
//! dialogue  user: hi | system: hello
//! text      verbatim
//! ```
//!
//! Under [`EscapePolicy::Escape`] a backslash is inserted before every
//! backslash, every non-space delimiter character, and every cell-internal
//! occurrence of a row marker (`row 3 :`). That makes [`parse_table`] a left
//! inverse of [`linearize_table`] for every table.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DatabaseSchema, DialogueHistory, StructuredKnowledge, Table, TripleSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapePolicy {
    #[default]
    Escape,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearizationConfig {
    pub cell_delimiter: String,
    pub header_prefix: String,
    /// Must contain `{i}`, which is replaced by the 1-based row number.
    pub row_prefix_template: String,
    pub escape_policy: EscapePolicy,
}

impl Default for LinearizationConfig {
    fn default() -> Self {
        LinearizationConfig {
            cell_delimiter: " | ".to_string(),
            header_prefix: "col :".to_string(),
            row_prefix_template: "row {i} :".to_string(),
            escape_policy: EscapePolicy::Escape,
        }
    }
}

/// Where in a structure an offending field sits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldRef {
    Header { column: usize },
    Cell { row: usize, column: usize },
    Triple { index: usize, field: &'static str },
    Schema { name: String },
    Turn { index: usize },
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldRef::Header { column } => write!(f, "header column {column}"),
            FieldRef::Cell { row, column } => write!(f, "row {row}, column {column}"),
            FieldRef::Triple { index, field } => write!(f, "triple {index} {field}"),
            FieldRef::Schema { name } => write!(f, "schema name {name:?}"),
            FieldRef::Turn { index } => write!(f, "turn {index}"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("invalid linearization config: {0}")]
    Config(String),
    /// Under the reject policy: a field holds a delimiter character or a
    /// row marker, either of which would make the output ambiguous.
    #[error("{at} contains reserved text {reserved:?}")]
    Reserved { at: FieldRef, reserved: String },
    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },
}

struct RowPattern<'a> {
    head: &'a str,
    tail: &'a str,
}

impl LinearizationConfig {
    pub fn validate(&self) -> Result<(), LinearizeError> {
        let err = |m: &str| Err(LinearizeError::Config(m.to_string()));
        if self.cell_delimiter.is_empty() {
            return err("cell delimiter is empty");
        }
        if self.cell_delimiter.chars().all(char::is_whitespace) {
            return err("cell delimiter needs at least one non-whitespace character");
        }
        if self.header_prefix.is_empty() {
            return err("header prefix is empty");
        }
        let Some((head, tail)) = self.row_prefix_template.split_once("{i}") else {
            return err("row prefix template lacks {i}");
        };
        if head.trim().is_empty() || head.starts_with(char::is_whitespace) {
            return err("row prefix template must start with a non-space literal before {i}");
        }
        if tail.contains("{i}") {
            return err("row prefix template has more than one {i}");
        }
        if self.row_prefix_template.contains('\\') || self.row_prefix_template.chars().any(|c| self.is_marker(c)) {
            return err("row prefix template shares characters with the delimiter");
        }
        Ok(())
    }

    fn row_pattern(&self) -> RowPattern<'_> {
        let (head, tail) = self.row_prefix_template.split_once("{i}").expect("validated template");
        RowPattern { head, tail }
    }

    fn row_prefix(&self, i: usize) -> String {
        self.row_prefix_template.replace("{i}", &i.to_string())
    }

    fn is_marker(&self, c: char) -> bool {
        !c.is_whitespace() && self.cell_delimiter.contains(c)
    }

    /// Escapes one field, or rejects it when it holds the delimiter.
    fn field<'a>(
        &self,
        value: &'a str,
        at: impl FnOnce() -> FieldRef,
    ) -> Result<std::borrow::Cow<'a, str>, LinearizeError> {
        match self.escape_policy {
            EscapePolicy::Reject => match self.reserved_in(value) {
                Some(reserved) => Err(LinearizeError::Reserved { at: at(), reserved }),
                None => Ok(value.into()),
            },
            EscapePolicy::Escape => Ok(self.escape(value)),
        }
    }

    fn reserved_in(&self, value: &str) -> Option<String> {
        if let Some(c) = value.chars().find(|&c| self.is_marker(c)) {
            return Some(c.to_string());
        }
        let pat = self.row_pattern();
        row_marker_starts(value, &pat).first().map(|&i| {
            let rest = &value[i + pat.head.len()..];
            let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
            value[i..i + pat.head.len() + digits + pat.tail.len()].to_string()
        })
    }

    fn escape<'a>(&self, value: &'a str) -> std::borrow::Cow<'a, str> {
        let row_marks = row_marker_starts(value, &self.row_pattern());
        let needs = !row_marks.is_empty() || value.chars().any(|c| c == '\\' || self.is_marker(c));
        if !needs {
            return value.into();
        }
        let mut out = String::with_capacity(value.len() + 4);
        for (i, c) in value.char_indices() {
            if c == '\\' || self.is_marker(c) || row_marks.contains(&i) {
                out.push('\\');
            }
            out.push(c);
        }
        out.into()
    }
}

/// Byte offsets where `head` + digits + `tail` occurs in `s`.
fn row_marker_starts(s: &str, pat: &RowPattern<'_>) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, _) in s.match_indices(pat.head) {
        let rest = &s[i + pat.head.len()..];
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 && rest[digits..].starts_with(pat.tail) {
            out.push(i);
        }
    }
    out
}

fn join_fields<'a, I>(cfg: &LinearizationConfig, fields: I, out: &mut String) -> Result<(), LinearizeError>
where
    I: IntoIterator<Item = (&'a str, FieldRef)>,
{
    for (n, (value, at)) in fields.into_iter().enumerate() {
        if n > 0 {
            out.push_str(&cfg.cell_delimiter);
        }
        out.push_str(&cfg.field(value, || at)?);
    }
    Ok(())
}

pub fn linearize_table(table: &Table, cfg: &LinearizationConfig) -> Result<String, LinearizeError> {
    linearize_table_with_rows(table, cfg).map(|(s, _)| s)
}

/// Also returns the byte offset at which each ` row i :` separator starts,
/// used for row-granular truncation.
pub fn linearize_table_with_rows(
    table: &Table,
    cfg: &LinearizationConfig,
) -> Result<(String, Vec<usize>), LinearizeError> {
    cfg.validate()?;
    let mut out = cfg.header_prefix.clone();
    let mut row_starts = Vec::with_capacity(table.rows.len());
    if !table.header.is_empty() {
        out.push(' ');
        join_fields(
            cfg,
            table
                .header
                .iter()
                .enumerate()
                .map(|(c, h)| (h.as_str(), FieldRef::Header { column: c + 1 })),
            &mut out,
        )?;
    }
    for (r, row) in table.rows.iter().enumerate() {
        row_starts.push(out.len());
        out.push(' ');
        out.push_str(&cfg.row_prefix(r + 1));
        out.push(' ');
        join_fields(
            cfg,
            row.iter().enumerate().map(|(c, v)| {
                (
                    v.as_str(),
                    FieldRef::Cell {
                        row: r + 1,
                        column: c + 1,
                    },
                )
            }),
            &mut out,
        )?;
    }
    Ok((out, row_starts))
}

/// Inverse of [`linearize_table`] for the same configuration.
pub fn parse_table(text: &str, cfg: &LinearizationConfig) -> Result<Table, LinearizeError> {
    cfg.validate()?;
    let perr = |offset: usize, detail: String| LinearizeError::Parse { offset, detail };
    let Some(rest) = text.strip_prefix(cfg.header_prefix.as_str()) else {
        return Err(perr(0, format!("expected header prefix {:?}", cfg.header_prefix)));
    };
    let mut pos = cfg.header_prefix.len();
    if rest.is_empty() {
        return Ok(Table::default());
    }
    if !rest.starts_with(' ') {
        return Err(perr(pos, "expected a space after the header prefix".into()));
    }
    pos += 1;

    let escaped = cfg.escape_policy == EscapePolicy::Escape;
    let mut lines: Vec<(usize, Vec<String>)> = Vec::new();
    let mut row = 1;
    loop {
        let line_start = pos;
        let sep = format!(" {} ", cfg.row_prefix(row));
        let (fields, next) = scan_line(text, pos, &cfg.cell_delimiter, &sep, escaped);
        lines.push((line_start, fields));
        match next {
            Some(p) => {
                pos = p;
                row += 1;
            }
            None => break,
        }
    }

    let mut lines = lines.into_iter();
    let (_, header) = lines.next().expect("at least the header line");
    let mut rows = Vec::new();
    for (start, fields) in lines {
        if fields.len() != header.len() {
            return Err(perr(
                start,
                format!(
                    "row {} has {} fields, header has {}",
                    rows.len() + 1,
                    fields.len(),
                    header.len()
                ),
            ));
        }
        rows.push(fields);
    }
    Ok(Table {
        header,
        rows,
        caption: None,
    })
}

/// Splits fields from `pos` until the next unescaped `sep` or the end of
/// input. Returns the fields and the offset just past `sep`, if found.
fn scan_line(text: &str, mut pos: usize, delim: &str, sep: &str, escaped: bool) -> (Vec<String>, Option<usize>) {
    let mut fields = Vec::new();
    let mut cur = String::new();
    while pos < text.len() {
        let rest = &text[pos..];
        if rest.starts_with(sep) {
            fields.push(cur);
            return (fields, Some(pos + sep.len()));
        }
        if rest.starts_with(delim) {
            fields.push(std::mem::take(&mut cur));
            pos += delim.len();
            continue;
        }
        let mut chars = rest.chars();
        let c = chars.next().expect("non-empty");
        if escaped && c == '\\' {
            if let Some(n) = chars.next() {
                cur.push(n);
                pos += 1 + n.len_utf8();
                continue;
            }
        }
        cur.push(c);
        pos += c.len_utf8();
    }
    fields.push(cur);
    (fields, None)
}

pub fn linearize_triples(set: &TripleSet, cfg: &LinearizationConfig) -> Result<String, LinearizeError> {
    cfg.validate()?;
    let mut out = String::new();
    for (i, t) in set.triples.iter().enumerate() {
        if i > 0 {
            out.push_str(&cfg.cell_delimiter);
        }
        let parts = [
            ("subject", &t.subject),
            ("relation", &t.relation),
            ("object", &t.object),
        ];
        for (k, (field, value)) in parts.into_iter().enumerate() {
            if k > 0 {
                out.push_str(" : ");
            }
            out.push_str(&cfg.field(value, || FieldRef::Triple { index: i, field })?);
        }
    }
    Ok(out)
}

pub fn linearize_schema(schema: &DatabaseSchema, cfg: &LinearizationConfig) -> Result<String, LinearizeError> {
    cfg.validate()?;
    let name = |s: &str| {
        cfg.field(s, || FieldRef::Schema { name: s.to_string() })
            .map(|c| c.into_owned())
    };
    let mut out = name(&schema.database)?;
    for table in &schema.tables {
        out.push_str(&cfg.cell_delimiter);
        out.push_str(&name(&table.name)?);
        out.push_str(" : ");
        let cols = table
            .columns
            .iter()
            .map(|c| name(&c.name))
            .collect::<Result<Vec<_>, _>>()?;
        out.push_str(&cols.join(", "));
    }
    for fk in &schema.foreign_keys {
        out.push_str(&cfg.cell_delimiter);
        out.push_str("fk : ");
        out.push_str(&name(&fk.from.to_string())?);
        out.push_str(" = ");
        out.push_str(&name(&fk.to.to_string())?);
    }
    Ok(out)
}

pub fn linearize_dialogue(history: &DialogueHistory, cfg: &LinearizationConfig) -> Result<String, LinearizeError> {
    cfg.validate()?;
    let mut out = String::new();
    for (i, turn) in history.turns.iter().enumerate() {
        if i > 0 {
            out.push_str(&cfg.cell_delimiter);
        }
        out.push_str(turn.speaker.as_str());
        out.push_str(": ");
        out.push_str(&cfg.field(&turn.utterance, || FieldRef::Turn { index: i })?);
    }
    Ok(out)
}

pub fn linearize(knowledge: &StructuredKnowledge, cfg: &LinearizationConfig) -> Result<String, LinearizeError> {
    match knowledge {
        StructuredKnowledge::Table(t) => linearize_table(t, cfg),
        StructuredKnowledge::Triples(t) => linearize_triples(t, cfg),
        StructuredKnowledge::Schema(s) => linearize_schema(s, cfg),
        StructuredKnowledge::Dialogue(d) => linearize_dialogue(d, cfg),
        StructuredKnowledge::Text { text } => Ok(text.clone()),
    }
}
