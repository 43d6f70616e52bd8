//! Per-task scorers and file-level evaluation.
//!
//! Ranges: `corpus_bleu` is on `[0, 100]`, every other metric on `[0, 1]`.

mod bleu;
mod external;
mod normalize;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::exec::{self, Execution};

pub use bleu::{corpus_bleu, score_from_stats, segment_stats, BleuScore, BleuStats, Smoothing, MAX_ORDER};
pub use external::{CommandScorer, ExternalError, ExternalScorer, Verdict};
pub use normalize::{canonical_number, normalize, Normalization};

/// Separates `slot=value` pairs in a serialized dialogue state.
pub const STATE_PAIR_DELIMITER: char = ';';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ExactMatch,
    Accuracy,
    TokenF1,
    CorpusBleu,
    JointAccuracy,
    DenotationMatch,
    MicroEntityF1,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::ExactMatch,
        MetricKind::Accuracy,
        MetricKind::TokenF1,
        MetricKind::CorpusBleu,
        MetricKind::JointAccuracy,
        MetricKind::DenotationMatch,
        MetricKind::MicroEntityF1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::ExactMatch => "exact_match",
            MetricKind::Accuracy => "accuracy",
            MetricKind::TokenF1 => "token_f1",
            MetricKind::CorpusBleu => "corpus_bleu",
            MetricKind::JointAccuracy => "joint_accuracy",
            MetricKind::DenotationMatch => "denotation_match",
            MetricKind::MicroEntityF1 => "micro_entity_f1",
        }
    }

    pub fn max_score(self) -> f64 {
        match self {
            MetricKind::CorpusBleu => 100.0,
            _ => 1.0,
        }
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            MetricKind::CorpusBleu => Aggregation::Corpus,
            MetricKind::MicroEntityF1 => Aggregation::Micro,
            _ => Aggregation::Mean,
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MetricError::UnknownKind(s.to_string()))
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-example scores.
    Mean,
    /// Pooled n-gram statistics.
    Corpus,
    /// Pooled TP/FP/FN counts.
    Micro,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub smoothing: Smoothing,
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        MetricSpec {
            kind,
            normalization: Normalization::default(),
            smoothing: Smoothing::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub metric: MetricSpec,
    pub aggregation: Aggregation,
    pub score: f64,
    pub count: usize,
    /// Sorted by id. For corpus BLEU these are sentence-level scores and do
    /// not average to the corpus score.
    pub per_example: Vec<ExampleScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuScore>,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown metric kind {0:?}")]
    UnknownKind(String),
    #[error("{predictions} predictions but {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("reference list {0} is empty")]
    EmptyReferences(usize),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{}", describe_ids(missing, extra, duplicates))]
    Ids {
        /// In the references but not the predictions.
        missing: Vec<String>,
        /// In the predictions but not the references.
        extra: Vec<String>,
        duplicates: Vec<String>,
    },
    #[error("malformed dialogue state {0:?}: expected slot=value pairs separated by ';'")]
    State(String),
}

fn describe_ids(missing: &[String], extra: &[String], duplicates: &[String]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        parts.push(format!("missing predictions for ids: {}", missing.join(", ")));
    }
    if !extra.is_empty() {
        parts.push(format!("predictions without references: {}", extra.join(", ")));
    }
    if !duplicates.is_empty() {
        parts.push(format!("duplicate ids: {}", duplicates.join(", ")));
    }
    parts.join("; ")
}

fn norm_all(items: &[String], norm: &Normalization) -> Vec<String> {
    items.iter().map(|s| normalize(s, norm)).collect()
}

/// 1 iff the normalized prediction equals some normalized gold; 0 for an
/// empty gold list.
pub fn exact_match(prediction: &str, golds: &[String], norm: &Normalization) -> f64 {
    let p = normalize(prediction, norm);
    if golds.iter().any(|g| normalize(g, norm) == p) {
        1.0
    } else {
        0.0
    }
}

/// F1 over token multisets. Both empty gives 1, exactly one empty gives 0.
pub fn token_f1(prediction: &str, gold: &str, norm: &Normalization) -> f64 {
    let p = normalize(prediction, norm);
    let g = normalize(gold, norm);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    match (pt.is_empty(), gt.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gt {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for t in &pt {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pt.len() as f64;
    let recall = common as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token F1 against any gold.
pub fn token_f1_multi(prediction: &str, golds: &[String], norm: &Normalization) -> f64 {
    golds.iter().map(|g| token_f1(prediction, g, norm)).fold(0.0, f64::max)
}

pub type DialogueState = BTreeMap<String, String>;

/// Parses `"slot=value; slot=value"`. Whitespace around slots and values is
/// trimmed; an empty string is the empty state.
pub fn parse_state(text: &str) -> Result<DialogueState, MetricError> {
    let mut state = DialogueState::new();
    for pair in text.split(STATE_PAIR_DELIMITER) {
        if pair.trim().is_empty() {
            continue;
        }
        let (slot, value) = pair
            .split_once('=')
            .ok_or_else(|| MetricError::State(text.to_string()))?;
        let slot = slot.trim();
        if slot.is_empty() {
            return Err(MetricError::State(text.to_string()));
        }
        state.insert(slot.to_string(), value.trim().to_string());
    }
    Ok(state)
}

fn normalize_state(state: &DialogueState, norm: &Normalization) -> DialogueState {
    state.iter().map(|(k, v)| (k.clone(), normalize(v, norm))).collect()
}

pub fn state_match(predicted: &DialogueState, gold: &DialogueState, norm: &Normalization) -> f64 {
    if normalize_state(predicted, norm) == normalize_state(gold, norm) {
        1.0
    } else {
        0.0
    }
}

/// Fraction of turns whose predicted state equals the gold state. An empty
/// input scores 1.
pub fn joint_accuracy(
    predicted: &[DialogueState],
    gold: &[DialogueState],
    norm: &Normalization,
) -> Result<f64, MetricError> {
    check_lengths(predicted.len(), gold.len())?;
    if gold.is_empty() {
        return Ok(1.0);
    }
    let hits: f64 = predicted.iter().zip(gold).map(|(p, g)| state_match(p, g, norm)).sum();
    Ok(hits / gold.len() as f64)
}

fn value_set(values: &[String], norm: &Normalization) -> BTreeSet<String> {
    values.iter().map(|v| canonical_number(&normalize(v, norm))).collect()
}

/// 1 iff the normalized, numerically canonicalized value sets are equal.
pub fn denotation_match(predicted: &[String], gold: &[String], norm: &Normalization) -> f64 {
    if value_set(predicted, norm) == value_set(gold, norm) {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EntityCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl EntityCounts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

pub fn entity_counts(predicted: &[String], gold: &[String], norm: &Normalization) -> EntityCounts {
    let p: BTreeSet<String> = norm_all(predicted, norm).into_iter().collect();
    let g: BTreeSet<String> = norm_all(gold, norm).into_iter().collect();
    let tp = p.intersection(&g).count();
    EntityCounts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - tp,
    }
}

/// F1 from TP/FP/FN pooled over all examples. With no entities anywhere the
/// score is 1.
pub fn micro_entity_f1(
    predicted: &[Vec<String>],
    gold: &[Vec<String>],
    norm: &Normalization,
) -> Result<f64, MetricError> {
    check_lengths(predicted.len(), gold.len())?;
    let mut total = EntityCounts::default();
    for (p, g) in predicted.iter().zip(gold) {
        let c = entity_counts(p, g, norm);
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn_ += c.fn_;
    }
    Ok(total.f1())
}

fn check_lengths(predictions: usize, references: usize) -> Result<(), MetricError> {
    if predictions != references {
        return Err(MetricError::LengthMismatch {
            predictions,
            references,
        });
    }
    Ok(())
}

/// One line of a predictions or references file.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Text(String),
    Texts(Vec<String>),
    Values(Vec<String>),
    State(DialogueState),
}

impl Payload {
    fn texts(&self) -> Vec<String> {
        match self {
            Payload::Text(t) => vec![t.clone()],
            Payload::Texts(ts) | Payload::Values(ts) => ts.clone(),
            Payload::State(s) => vec![s.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("; ")],
        }
    }

    fn first_text(&self) -> String {
        self.texts().into_iter().next().unwrap_or_default()
    }

    fn values(&self) -> Vec<String> {
        match self {
            Payload::Text(t) => vec![t.clone()],
            other => other.texts(),
        }
    }

    fn state(&self) -> Result<DialogueState, MetricError> {
        match self {
            Payload::State(s) => Ok(s.clone()),
            Payload::Text(t) => parse_state(t),
            Payload::Texts(ts) | Payload::Values(ts) => parse_state(ts.first().map(String::as_str).unwrap_or("")),
        }
    }
}

fn scalar_to_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn string_list(v: &Value) -> Option<Vec<String>> {
    v.as_array()?.iter().map(scalar_to_string).collect()
}

fn parse_payload(obj: &serde_json::Map<String, Value>) -> Result<Payload, String> {
    if let Some(v) = obj.get("state") {
        return match v {
            Value::Object(m) => m
                .iter()
                .map(|(k, v)| {
                    scalar_to_string(v)
                        .map(|s| (k.clone(), s))
                        .ok_or_else(|| format!("state value for {k:?} is not a scalar"))
                })
                .collect::<Result<_, _>>()
                .map(Payload::State),
            Value::String(s) => parse_state(s).map(Payload::State).map_err(|e| e.to_string()),
            _ => Err("\"state\" must be an object or a string".into()),
        };
    }
    if let Some(v) = obj.get("values") {
        return string_list(v)
            .map(Payload::Values)
            .ok_or_else(|| "\"values\" must be a list of scalars".into());
    }
    if let Some(v) = obj.get("texts") {
        return string_list(v)
            .map(Payload::Texts)
            .ok_or_else(|| "\"texts\" must be a list of strings".into());
    }
    if let Some(v) = obj.get("text") {
        return scalar_to_string(v)
            .map(Payload::Text)
            .ok_or_else(|| "\"text\" must be a string".into());
    }
    Err("expected one of \"text\", \"texts\", \"values\" or \"state\"".into())
}

/// Reads `{id, text|texts|values|state}` lines. Blank lines are skipped.
pub fn read_payloads(path: &Path) -> Result<Vec<(String, Payload)>, MetricError> {
    let content = fs::read_to_string(path).map_err(|source| MetricError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |detail: String| MetricError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err("expected a JSON object".into()))?;
        let id = obj
            .get("id")
            .and_then(scalar_to_string)
            .ok_or_else(|| parse_err("missing \"id\"".into()))?;
        let payload = parse_payload(obj).map_err(parse_err)?;
        out.push((id, payload));
    }
    Ok(out)
}

/// Pairs predictions with references by id, sorted by id.
pub fn align(
    predictions: Vec<(String, Payload)>,
    references: Vec<(String, Payload)>,
) -> Result<Vec<(String, Payload, Payload)>, MetricError> {
    let mut duplicates = BTreeSet::new();
    let mut preds = BTreeMap::new();
    for (id, p) in predictions {
        if preds.insert(id.clone(), p).is_some() {
            duplicates.insert(id);
        }
    }
    let mut refs = BTreeMap::new();
    for (id, r) in references {
        if refs.insert(id.clone(), r).is_some() {
            duplicates.insert(id);
        }
    }
    let missing: Vec<String> = refs.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    let extra: Vec<String> = preds.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() || !duplicates.is_empty() {
        return Err(MetricError::Ids {
            missing,
            extra,
            duplicates: duplicates.into_iter().collect(),
        });
    }
    Ok(refs
        .into_iter()
        .map(|(id, r)| {
            let p = preds.remove(&id).expect("aligned");
            (id, p, r)
        })
        .collect())
}

/// Scores aligned `(id, prediction, reference)` triples.
pub fn score_aligned(
    dataset: &str,
    items: &[(String, Payload, Payload)],
    spec: &MetricSpec,
    exec: Execution,
) -> Result<MetricReport, MetricError> {
    let norm = &spec.normalization;
    let mut bleu = None;
    let per_example: Vec<ExampleScore> = match spec.kind {
        MetricKind::ExactMatch | MetricKind::Accuracy => exec::map(items, exec, |(id, p, r)| ExampleScore {
            id: id.clone(),
            score: exact_match(&p.first_text(), &r.texts(), norm),
        }),
        MetricKind::TokenF1 => exec::map(items, exec, |(id, p, r)| ExampleScore {
            id: id.clone(),
            score: token_f1_multi(&p.first_text(), &r.texts(), norm),
        }),
        MetricKind::DenotationMatch => exec::map(items, exec, |(id, p, r)| ExampleScore {
            id: id.clone(),
            score: denotation_match(&p.values(), &r.values(), norm),
        }),
        MetricKind::MicroEntityF1 => exec::map(items, exec, |(id, p, r)| ExampleScore {
            id: id.clone(),
            score: entity_counts(&p.values(), &r.values(), norm).f1(),
        }),
        MetricKind::JointAccuracy => exec::try_map(items, exec, |(id, p, r)| {
            Ok::<_, MetricError>(ExampleScore {
                id: id.clone(),
                score: state_match(&p.state()?, &r.state()?, norm),
            })
        })?,
        MetricKind::CorpusBleu => {
            let stats = exec::map(items, exec, |(_, p, r)| {
                let refs = r.texts();
                if refs.is_empty() {
                    None
                } else {
                    Some(segment_stats(&p.first_text(), &refs, norm))
                }
            });
            if let Some(i) = stats.iter().position(Option::is_none) {
                return Err(MetricError::EmptyReferences(i));
            }
            let mut total = BleuStats::default();
            let mut scores = Vec::with_capacity(items.len());
            for ((id, _, _), st) in items.iter().zip(stats.into_iter().flatten()) {
                total.add(&st);
                scores.push(ExampleScore {
                    id: id.clone(),
                    score: score_from_stats(&st, spec.smoothing).score,
                });
            }
            bleu = Some(score_from_stats(&total, spec.smoothing));
            scores
        }
    };

    let score = match spec.kind {
        MetricKind::CorpusBleu => bleu.as_ref().map_or(0.0, |b| b.score),
        MetricKind::MicroEntityF1 => {
            let preds: Vec<Vec<String>> = items.iter().map(|(_, p, _)| p.values()).collect();
            let golds: Vec<Vec<String>> = items.iter().map(|(_, _, r)| r.values()).collect();
            micro_entity_f1(&preds, &golds, norm)?
        }
        _ => mean(per_example.iter().map(|e| e.score), spec.kind.max_score()),
    };

    Ok(MetricReport {
        dataset: dataset.to_string(),
        metric: *spec,
        aggregation: spec.kind.aggregation(),
        score,
        count: per_example.len(),
        per_example,
        bleu,
    })
}

/// Mean in id order; an empty set scores `empty`.
fn mean(scores: impl Iterator<Item = f64>, empty: f64) -> f64 {
    let (sum, n) = scores.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        empty
    } else {
        sum / n as f64
    }
}

/// Loads both files, aligns them by id and scores them.
pub fn evaluate(
    predictions: &Path,
    references: &Path,
    spec: &MetricSpec,
    exec: Execution,
) -> Result<MetricReport, MetricError> {
    let items = align(read_payloads(predictions)?, read_payloads(references)?)?;
    let dataset = references
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    score_aligned(&dataset, &items, spec, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn exact_match_cases() {
        let n = Normalization::default();
        assert_eq!(exact_match("Entailed", &s(&["Entailed"]), &n), 1.0);
        assert_eq!(exact_match("  entailed ", &s(&["Entailed"]), &n), 1.0);
        assert_eq!(exact_match("Refuted", &s(&["Entailed"]), &n), 0.0);
        assert_eq!(exact_match("b", &s(&["a", "B"]), &n), 1.0);
    }

    #[test]
    fn token_f1_cases() {
        let n = Normalization::default();
        assert_eq!(token_f1("a b", "a b", &n), 1.0);
        assert_eq!(token_f1("a b", "c d", &n), 0.0);
        assert!((token_f1("abiomed inc", "abiomed", &n) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("", "", &n), 1.0);
        assert_eq!(token_f1("", "a", &n), 0.0);
        assert_eq!(token_f1("a", " ", &n), 0.0);
        // Multiset: a repeated token only matches as often as it appears.
        assert!((token_f1("a a", "a", &n) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn states() {
        let n = Normalization::default();
        let a = parse_state("area=north; price = Cheap").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a["price"], "Cheap");
        let b = parse_state("price=cheap;area=north").unwrap();
        let c = parse_state("price=expensive;area=north").unwrap();
        assert_eq!(
            joint_accuracy(&[a.clone(), a.clone()], &[b.clone(), c], &n).unwrap(),
            0.5
        );
        assert_eq!(
            joint_accuracy(&[DialogueState::new()], &[parse_state("").unwrap()], &n).unwrap(),
            1.0
        );
        assert!(parse_state("novalue").is_err());
        assert!(joint_accuracy(&[a], &[], &n).is_err());
    }

    #[test]
    fn denotations() {
        let n = Normalization::default();
        assert_eq!(denotation_match(&s(&["b", "a"]), &s(&["a", "b"]), &n), 1.0);
        assert_eq!(denotation_match(&s(&["a"]), &s(&["a", "b"]), &n), 0.0);
        assert_eq!(denotation_match(&s(&["1.0"]), &s(&["1"]), &n), 1.0);
    }

    #[test]
    fn micro_f1_pooled() {
        let n = Normalization::default();
        // TP=3, FP=1, FN=2.
        let preds = vec![s(&["a", "b"]), s(&["c", "x"])];
        let golds = vec![s(&["a", "b", "d"]), s(&["c", "e"])];
        let f = micro_entity_f1(&preds, &golds, &n).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            micro_entity_f1(&[vec![], vec![]], &[s(&["a"]), s(&["b"])], &n).unwrap(),
            0.0
        );
        assert_eq!(micro_entity_f1(&preds, &preds, &n).unwrap(), 1.0);
    }

    #[test]
    fn alignment_errors_name_ids() {
        let p = vec![
            ("a".to_string(), Payload::Text("1".into())),
            ("a".to_string(), Payload::Text("1".into())),
        ];
        let r = vec![
            ("x".to_string(), Payload::Text("1".into())),
            ("a".to_string(), Payload::Text("1".into())),
        ];
        let err = align(p, r).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing predictions for ids: x"), "{msg}");
        assert!(msg.contains("duplicate ids: a"), "{msg}");
    }

    #[test]
    fn kind_round_trip() {
        for k in MetricKind::ALL {
            assert_eq!(k.as_str().parse::<MetricKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
        assert!("bleu".parse::<MetricKind>().is_err());
    }
}
