//! Dataset files and corpus manifests.
//!
//! A dataset file is JSON Lines, one example per line:
//!
//! ```text
//! {"schema_version":1,"id":"t-1","table":{"header":["a"],"rows":[["v"]]},"context":"q?","output":"v"}
//! ```
//!
//! The payload key names the structure variant (`table`, `triples`,
//! `schema`, `dialogue` or `text`) and must match the variant declared for
//! the dataset. `id`, `context` and `schema_version` may be omitted; a
//! missing id becomes `dataset:line`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::TokenBudget;
use crate::exec::{self, Execution};
use crate::linearize::LinearizationConfig;
use crate::metrics::MetricSpec;
use crate::mixture::Sampling;
use crate::prompt::{GeneralExample, InstructionPool};
use crate::tokenizer::TokenizerSpec;
use crate::types::{
    DatabaseSchema, DialogueHistory, SkgExample, StructureVariant, StructuredKnowledge, Table, TaskGroup, Triple,
    TripleSet, Turn,
};
use crate::validate::{validate_example, Violation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{path}: line {line} (id {id:?}): {}", join(violations))]
    Invalid {
        path: PathBuf,
        line: usize,
        id: String,
        violations: Vec<Violation>,
    },
    #[error("{path}: line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
        first_line: usize,
    },
    #[error("{path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.0.as_str()).collect::<Vec<_>>().join("; ")
}

impl IngestError {
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    triples: Option<Vec<Triple>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<DatabaseSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dialogue: Option<Vec<Turn>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default)]
    context: String,
    output: String,
}

impl ExampleLine {
    fn from_example(ex: &SkgExample) -> Self {
        let mut line = ExampleLine {
            schema_version: Some(SCHEMA_VERSION),
            id: Some(ex.id.clone()),
            table: None,
            triples: None,
            schema: None,
            dialogue: None,
            text: None,
            context: ex.context.clone(),
            output: ex.gold_output.clone(),
        };
        match &ex.knowledge {
            StructuredKnowledge::Table(t) => line.table = Some(t.clone()),
            StructuredKnowledge::Triples(t) => line.triples = Some(t.triples.clone()),
            StructuredKnowledge::Schema(s) => line.schema = Some(s.clone()),
            StructuredKnowledge::Dialogue(d) => line.dialogue = Some(d.turns.clone()),
            StructuredKnowledge::Text { text } => line.text = Some(text.clone()),
        }
        line
    }

    /// Takes the payload for `variant`, reporting missing or extra payloads.
    fn take_knowledge(&mut self, variant: StructureVariant) -> Result<StructuredKnowledge, Vec<Violation>> {
        let present: Vec<StructureVariant> = [
            (StructureVariant::Table, self.table.is_some()),
            (StructureVariant::Triples, self.triples.is_some()),
            (StructureVariant::Schema, self.schema.is_some()),
            (StructureVariant::Dialogue, self.dialogue.is_some()),
            (StructureVariant::Text, self.text.is_some()),
        ]
        .into_iter()
        .filter_map(|(v, p)| p.then_some(v))
        .collect();
        let mut violations: Vec<Violation> = present
            .iter()
            .filter(|&&v| v != variant)
            .map(|v| Violation(format!("expected a {variant} payload, found {v}")))
            .collect();
        if !present.contains(&variant) && violations.is_empty() {
            violations.push(Violation(format!("missing {variant} payload")));
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(match variant {
            StructureVariant::Table => StructuredKnowledge::Table(self.table.take().expect("present")),
            StructureVariant::Triples => StructuredKnowledge::Triples(TripleSet {
                triples: self.triples.take().expect("present"),
            }),
            StructureVariant::Schema => StructuredKnowledge::Schema(self.schema.take().expect("present")),
            StructureVariant::Dialogue => StructuredKnowledge::Dialogue(DialogueHistory {
                turns: self.dialogue.take().expect("present"),
            }),
            StructureVariant::Text => StructuredKnowledge::Text {
                text: self.text.take().expect("present"),
            },
        })
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Tracks ids so duplicates (including a synthesized id colliding with an
/// explicit one) are reported with both line numbers.
#[derive(Default)]
struct IdRegistry(HashMap<String, usize>);

impl IdRegistry {
    fn claim(&mut self, path: &Path, id: &str, line: usize) -> Result<(), IngestError> {
        if let Some(&first_line) = self.0.get(id) {
            return Err(IngestError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: id.to_string(),
                first_line,
            });
        }
        self.0.insert(id.to_string(), line);
        Ok(())
    }
}

fn check_version(path: &Path, line: usize, version: Option<u32>) -> Result<(), IngestError> {
    match version {
        None | Some(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(IngestError::Parse {
            path: path.to_path_buf(),
            line,
            detail: format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
        }),
    }
}

/// Parses a dataset file in line order. Blank lines are skipped but still
/// counted for line numbers.
pub fn load_jsonl(
    path: &Path,
    variant: StructureVariant,
    dataset: &str,
    task_group: TaskGroup,
) -> Result<Vec<SkgExample>, IngestError> {
    let content = read(path)?;
    parse_jsonl(path, &content, variant, dataset, task_group)
}

pub fn parse_jsonl(
    path: &Path,
    content: &str,
    variant: StructureVariant,
    dataset: &str,
    task_group: TaskGroup,
) -> Result<Vec<SkgExample>, IngestError> {
    let mut ids = IdRegistry::default();
    let mut out = Vec::new();
    for (i, text) in content.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let mut raw: ExampleLine = serde_json::from_str(text).map_err(|e| IngestError::Parse {
            path: path.to_path_buf(),
            line,
            detail: e.to_string(),
        })?;
        check_version(path, line, raw.schema_version)?;
        let id = raw.id.take().unwrap_or_else(|| format!("{dataset}:{line}"));
        let invalid = |violations| IngestError::Invalid {
            path: path.to_path_buf(),
            line,
            id: id.clone(),
            violations,
        };
        let knowledge = raw.take_knowledge(variant).map_err(invalid)?;
        let example = SkgExample {
            id: id.clone(),
            dataset: dataset.to_string(),
            knowledge,
            context: raw.context,
            gold_output: raw.output,
            task_group,
        };
        validate_example(&example).map_err(invalid)?;
        ids.claim(path, &id, line)?;
        out.push(example);
    }
    Ok(out)
}

/// Writes examples in the on-disk schema, ids included.
pub fn dump_jsonl<W: Write>(examples: &[SkgExample], mut w: W) -> io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, &ExampleLine::from_example(ex))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct GeneralLine {
    #[serde(default)]
    schema_version: Option<u32>,
    #[serde(default)]
    id: Option<String>,
    instruction: String,
    #[serde(default)]
    input: String,
    output: String,
}

/// Loads general instruction data: `{id?, instruction, input?, output}`.
pub fn load_general_jsonl(path: &Path, name: &str) -> Result<Vec<GeneralExample>, IngestError> {
    let content = read(path)?;
    let mut ids = IdRegistry::default();
    let mut out = Vec::new();
    for (i, text) in content.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let raw: GeneralLine = serde_json::from_str(text).map_err(|e| IngestError::Parse {
            path: path.to_path_buf(),
            line,
            detail: e.to_string(),
        })?;
        check_version(path, line, raw.schema_version)?;
        let id = raw.id.unwrap_or_else(|| format!("{name}:{line}"));
        if raw.output.trim().is_empty() {
            return Err(IngestError::Invalid {
                path: path.to_path_buf(),
                line,
                id,
                violations: vec![Violation("gold output is empty".into())],
            });
        }
        ids.claim(path, &id, line)?;
        out.push(GeneralExample {
            id,
            instruction: raw.instruction,
            input: raw.input,
            output: raw.output,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub task_group: TaskGroup,
    pub structure: StructureVariant,
    #[serde(default)]
    pub instruction_pool: Option<PathBuf>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
}

impl DatasetEntry {
    pub fn split_path(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => self.train.as_deref(),
            Split::Test => self.test.as_deref(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSettings {
    pub general_fraction: f64,
    pub sampling: Sampling,
    /// Measure the fraction in tokens instead of records.
    pub by_tokens: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub budget: TokenBudget,
    #[serde(default)]
    pub linearization: LinearizationConfig,
    #[serde(default)]
    pub mixture: MixtureSettings,
    /// Cut tables only between rows when truncating.
    #[serde(default)]
    pub row_granular: bool,
    #[serde(default)]
    pub general: Option<GeneralSource>,
    #[serde(default)]
    pub datasets: Vec<DatasetEntry>,
}

impl CorpusManifest {
    /// Parses TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, String> {
        let mut m: CorpusManifest = toml::from_str(text).map_err(|e| e.to_string())?;
        m.resolve(base);
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        CorpusManifest::from_toml(&text, base).map_err(|detail| IngestError::Manifest {
            path: path.to_path_buf(),
            detail,
        })
    }

    fn resolve(&mut self, base: &Path) {
        self.tokenizer = self.tokenizer.resolved(base);
        if let Some(g) = &mut self.general {
            g.path = base.join(&g.path);
        }
        for d in &mut self.datasets {
            for p in [&mut d.train, &mut d.test, &mut d.instruction_pool]
                .into_iter()
                .flatten()
            {
                *p = base.join(&*p);
            }
        }
    }

    pub fn dataset(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestViolationKind {
    MissingPath,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManifestViolation {
    pub kind: ManifestViolationKind,
    pub message: String,
}

impl std::fmt::Display for ManifestViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks the manifest without loading any dataset file. Instruction pool
/// files are read, since they are configuration.
pub fn validate_manifest(m: &CorpusManifest) -> Result<(), Vec<ManifestViolation>> {
    let mut out = Vec::new();
    let mut other = |message: String| {
        out.push(ManifestViolation {
            kind: ManifestViolationKind::Other,
            message,
        })
    };
    if m.schema_version != SCHEMA_VERSION {
        other(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            m.schema_version
        ));
    }
    if let Err(e) = m.budget.validate() {
        other(format!("budget: {e}"));
    }
    if let Err(e) = m.linearization.validate() {
        other(format!("linearization: {e}"));
    }
    let r = m.mixture.general_fraction;
    if !(0.0..1.0).contains(&r) {
        other(format!("mixture: general fraction {r} is outside [0, 1)"));
    } else if r > 0.0 && m.general.is_none() {
        other(format!("mixture: general fraction {r} requires a [general] source"));
    }
    if m.datasets.is_empty() {
        other("no datasets declared".into());
    }
    let mut seen = HashSet::new();
    for d in &m.datasets {
        if d.name.trim().is_empty() {
            other("dataset with an empty name".into());
        } else if !seen.insert(d.name.as_str()) {
            other(format!("duplicate dataset name {:?}", d.name));
        }
        if d.train.is_none() && d.test.is_none() {
            other(format!("dataset {:?} declares neither a train nor a test file", d.name));
        }
        if d.instruction_pool.is_none() {
            other(format!("dataset {:?} has no instruction pool", d.name));
        }
    }

    let mut missing = |what: String, path: &Path| {
        if !path.exists() {
            out.push(ManifestViolation {
                kind: ManifestViolationKind::MissingPath,
                message: format!("{what}: {} does not exist", path.display()),
            });
            false
        } else {
            true
        }
    };
    let mut pools_to_check = Vec::new();
    for d in &m.datasets {
        if let Some(p) = &d.train {
            missing(format!("dataset {:?} train file", d.name), p);
        }
        if let Some(p) = &d.test {
            missing(format!("dataset {:?} test file", d.name), p);
        }
        if let Some(p) = &d.instruction_pool {
            if missing(format!("dataset {:?} instruction pool", d.name), p) {
                pools_to_check.push((d.name.clone(), p.clone()));
            }
        }
    }
    if let Some(g) = &m.general {
        missing(format!("general source {:?}", g.name), &g.path);
    }
    if let TokenizerSpec::Bpe { vocab, merges } = &m.tokenizer {
        missing("tokenizer vocab".into(), vocab);
        missing("tokenizer merges".into(), merges);
    }
    for (name, path) in pools_to_check {
        if let Err(e) = InstructionPool::load(&path, &name) {
            out.push(ManifestViolation {
                kind: ManifestViolationKind::Other,
                message: format!("dataset {name:?} instruction pool: {e}"),
            });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Loads one split of every dataset that declares it, files in parallel.
/// Datasets without the split are skipped.
pub fn load_split(
    m: &CorpusManifest,
    split: Split,
    exec: Execution,
) -> Result<Vec<(DatasetEntry, Vec<SkgExample>)>, IngestError> {
    let entries: Vec<&DatasetEntry> = m.datasets.iter().filter(|d| d.split_path(split).is_some()).collect();
    exec::try_map(&entries, exec, |d| {
        let path = d.split_path(split).expect("filtered");
        load_jsonl(path, d.structure, &d.name, d.task_group).map(|ex| ((*d).clone(), ex))
    })
}

/// Loads the instruction pool of every dataset.
pub fn load_pools(m: &CorpusManifest) -> Result<HashMap<String, InstructionPool>, IngestError> {
    let mut pools = HashMap::new();
    for d in &m.datasets {
        let path = d.instruction_pool.as_deref().ok_or_else(|| IngestError::Manifest {
            path: PathBuf::new(),
            detail: format!("dataset {:?} has no instruction pool", d.name),
        })?;
        let pool = InstructionPool::load(path, &d.name).map_err(|e| IngestError::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        pools.insert(d.name.clone(), pool);
    }
    Ok(pools)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(content: &str, variant: StructureVariant) -> Result<Vec<SkgExample>, IngestError> {
        parse_jsonl(Path::new("d.jsonl"), content, variant, "d", TaskGroup::TableQa)
    }

    #[test]
    fn three_lines_in_order_with_synthesized_ids() {
        let content = concat!(
            r#"{"id":"a","text":"x","output":"1"}"#,
            "\n",
            r#"{"text":"y","output":"2"}"#,
            "\n\n",
            r#"{"schema_version":1,"text":"z","context":"q","output":"3"}"#,
            "\n"
        );
        let ex = parse(content, StructureVariant::Text).unwrap();
        let ids: Vec<&str> = ex.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "d:2", "d:4"]);
        assert_eq!(ex[2].context, "q");
    }

    #[test]
    fn bad_line_is_named() {
        let content = "{\"text\":\"x\",\"output\":\"1\"}\n{not json}\n";
        let err = parse(content, StructureVariant::Text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn ragged_table_uses_validator_message() {
        let content = r#"{"table":{"header":["a","b"],"rows":[["1"]]},"output":"o"}"#;
        let err = parse(content, StructureVariant::Table).unwrap_err();
        match err {
            IngestError::Invalid { line, violations, .. } => {
                assert_eq!(line, 1);
                assert_eq!(violations[0].0, "row 1 length 1 != 2 headers");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wrong_variant_payload() {
        let content = r#"{"triples":[{"subject":"s","relation":"r","object":"o"}],"output":"o"}"#;
        let err = parse(content, StructureVariant::Table).unwrap_err();
        assert!(
            err.to_string().contains("expected a table payload, found triples"),
            "{err}"
        );
        let err = parse(r#"{"output":"o"}"#, StructureVariant::Table).unwrap_err();
        assert!(err.to_string().contains("missing table payload"), "{err}");
    }

    #[test]
    fn duplicate_ids() {
        let content = "{\"id\":\"d:2\",\"text\":\"x\",\"output\":\"1\"}\n{\"text\":\"y\",\"output\":\"2\"}\n";
        let err = parse(content, StructureVariant::Text).unwrap_err();
        assert_eq!(
            err.to_string(),
            "d.jsonl: line 2: duplicate id \"d:2\" (first seen on line 1)"
        );
    }

    #[test]
    fn version_check() {
        let err = parse(
            r#"{"schema_version":2,"text":"x","output":"1"}"#,
            StructureVariant::Text,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unsupported schema_version 2"));
    }

    #[test]
    fn dump_round_trip() {
        let content = concat!(
            r#"{"table":{"header":["a","b"],"rows":[["1","2"]],"caption":"c"},"context":"q","output":"o"}"#,
            "\n"
        );
        let ex = parse(content, StructureVariant::Table).unwrap();
        let mut buf = Vec::new();
        dump_jsonl(&ex, &mut buf).unwrap();
        let again = parse(std::str::from_utf8(&buf).unwrap(), StructureVariant::Table).unwrap();
        assert_eq!(ex, again);
    }

    #[test]
    fn manifest_paths_resolve_against_base() {
        let text = r#"
schema_version = 1
seed = 7

[[datasets]]
name = "toy"
train = "toy.jsonl"
task_group = "table_qa"
structure = "table"
instruction_pool = "pools.jsonl"
metric = { kind = "exact_match" }
"#;
        let m = CorpusManifest::from_toml(text, Path::new("/data")).unwrap();
        assert_eq!(m.datasets[0].train.as_deref(), Some(Path::new("/data/toy.jsonl")));
        assert_eq!(m.budget, TokenBudget::default());
        let violations = validate_manifest(&m).unwrap_err();
        assert!(violations.iter().all(|v| v.kind == ManifestViolationKind::MissingPath));
        assert_eq!(violations.len(), 2);
    }

    #[test]
    fn manifest_violations() {
        let text = r#"
schema_version = 1
[mixture]
general_fraction = 0.5

[[datasets]]
name = "toy"
task_group = "table_qa"
structure = "table"

[[datasets]]
name = "toy"
task_group = "table_qa"
structure = "table"
"#;
        let m = CorpusManifest::from_toml(text, Path::new("")).unwrap();
        let msgs: Vec<String> = validate_manifest(&m)
            .unwrap_err()
            .into_iter()
            .map(|v| v.message)
            .collect();
        assert!(msgs.iter().any(|m| m.contains("requires a [general] source")));
        assert!(msgs.iter().any(|m| m == "duplicate dataset name \"toy\""));
        assert!(msgs.iter().any(|m| m == "dataset \"toy\" has no instruction pool"));
        assert!(msgs.iter().any(|m| m.contains("neither a train nor a test file")));
    }

    #[test]
    fn unknown_manifest_keys_are_rejected() {
        let err = CorpusManifest::from_toml("schema_version = 1\nsede = 3\n", Path::new("")).unwrap_err();
        assert!(err.contains("sede"), "{err}");
    }
}
