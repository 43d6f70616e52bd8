//! Domain types shared by every pipeline stage.
//!
//! All of them are plain immutable values; nothing here holds interior
//! mutability, so they can be shared freely across worker threads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A relational table: a header row plus body rows of text cells.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Table {
    #[serde(default)]
    pub header: Vec<String>,
    #[serde(default)]
    pub rows: Vec<Vec<String>>,
    /// Free-form caption or metadata. Not part of the linearized form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

impl Table {
    pub fn new<H, R, C>(header: H, rows: R) -> Self
    where
        H: IntoIterator,
        H::Item: Into<String>,
        R: IntoIterator<Item = C>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(Into::into).collect())
                .collect(),
            caption: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Triple {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

/// Knowledge-graph facts, kept in input order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripleSet {
    pub triples: Vec<Triple>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub type_tag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaTable {
    pub name: String,
    pub columns: Vec<Column>,
}

/// `table.column`, written that way on disk.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() => Ok(ColumnRef::new(t, c)),
            _ => Err(format!("column reference {s:?} is not of the form table.column")),
        }
    }
}

impl TryFrom<String> for ColumnRef {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ColumnRef> for String {
    fn from(value: ColumnRef) -> Self {
        value.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from: ColumnRef,
    pub to: ColumnRef,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub database: String,
    #[serde(default)]
    pub tables: Vec<SchemaTable>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl Speaker {
    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::System => "system",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub utterance: String,
}

impl Turn {
    pub fn user(utterance: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::User,
            utterance: utterance.into(),
        }
    }

    pub fn system(utterance: impl Into<String>) -> Self {
        Turn {
            speaker: Speaker::System,
            utterance: utterance.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueHistory {
    pub turns: Vec<Turn>,
}

/// The structured portion of an example. Exactly one variant is populated by
/// construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StructuredKnowledge {
    Table(Table),
    Triples(TripleSet),
    Schema(DatabaseSchema),
    Dialogue(DialogueHistory),
    Text { text: String },
}

impl StructuredKnowledge {
    pub fn variant(&self) -> StructureVariant {
        match self {
            StructuredKnowledge::Table(_) => StructureVariant::Table,
            StructuredKnowledge::Triples(_) => StructureVariant::Triples,
            StructuredKnowledge::Schema(_) => StructureVariant::Schema,
            StructuredKnowledge::Dialogue(_) => StructureVariant::Dialogue,
            StructuredKnowledge::Text { .. } => StructureVariant::Text,
        }
    }
}

/// Tag for the on-disk payload shape of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureVariant {
    Table,
    Triples,
    Schema,
    Dialogue,
    Text,
}

impl StructureVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureVariant::Table => "table",
            StructureVariant::Triples => "triples",
            StructureVariant::Schema => "schema",
            StructureVariant::Dialogue => "dialogue",
            StructureVariant::Text => "text",
        }
    }
}

impl fmt::Display for StructureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Held-in task groups used to organise SKG datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGroup {
    DataToText,
    TableQa,
    KnowledgeGroundedConversation,
    FactVerification,
    SqlOrDsl,
    MathReasoning,
}

impl TaskGroup {
    pub const ALL: [TaskGroup; 6] = [
        TaskGroup::DataToText,
        TaskGroup::TableQa,
        TaskGroup::KnowledgeGroundedConversation,
        TaskGroup::FactVerification,
        TaskGroup::SqlOrDsl,
        TaskGroup::MathReasoning,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            TaskGroup::DataToText => "Data to Text Generation",
            TaskGroup::TableQa => "Table based Question Answering",
            TaskGroup::KnowledgeGroundedConversation => "Knowledge-grounded Conversations",
            TaskGroup::FactVerification => "Fact verification",
            TaskGroup::SqlOrDsl => "SQL or domain-specific languages",
            TaskGroup::MathReasoning => "Mathematical reasoning",
        }
    }
}

/// One task instance before rendering.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkgExample {
    pub id: String,
    pub dataset: String,
    pub knowledge: StructuredKnowledge,
    /// Question, statement or dialogue tail that accompanies the knowledge.
    #[serde(default)]
    pub context: String,
    pub gold_output: String,
    pub task_group: TaskGroup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Skg,
    General,
}

/// A fully assembled (prompt, completion) pair, one line of a corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    pub prompt: String,
    pub completion: String,
    pub dataset: String,
}
