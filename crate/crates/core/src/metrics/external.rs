//! Plugin point for scorers that live outside this crate, such as SQL
//! execution or logic-to-text checkers.
//!
//! [`CommandScorer`] speaks a line protocol with a child process: one
//! `{"id","prediction","reference"}` JSON object per line on stdin, one
//! `{"id","score"}` object per line on stdout, in any order.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to run scorer {program:?}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scorer {program:?} exited with {status}: {stderr}")]
    Status {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("scorer output line {line}: {detail}")]
    Output { line: usize, detail: String },
    #[error("scorer returned no verdict for ids: {}", .0.join(", "))]
    Missing(Vec<String>),
}

pub trait ExternalScorer: Send + Sync {
    fn name(&self) -> String;

    /// One verdict per input id, sorted by id.
    fn score(&self, items: &[(String, String, String)]) -> Result<Vec<Verdict>, ExternalError>;
}

#[derive(Clone, Debug)]
pub struct CommandScorer {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandScorer {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandScorer {
            program: program.into(),
            args,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: &'a str,
    prediction: &'a str,
    reference: &'a str,
}

impl ExternalScorer for CommandScorer {
    fn name(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn score(&self, items: &[(String, String, String)]) -> Result<Vec<Verdict>, ExternalError> {
        let spawn_err = |source| ExternalError::Spawn {
            program: self.program.clone(),
            source,
        };
        let mut input = Vec::new();
        for (id, prediction, reference) in items {
            let req = Request {
                id,
                prediction,
                reference,
            };
            serde_json::to_writer(&mut input, &req).expect("serializable");
            input.push(b'\n');
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(spawn_err)?;
        // Write from a thread so a chatty child cannot deadlock on a full pipe.
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(&input));
        let output = child.wait_with_output().map_err(spawn_err)?;
        // A child that exits without reading all input is judged by its status.
        let _ = writer.join();
        if !output.status.success() {
            return Err(ExternalError::Status {
                program: self.program.clone(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }

        let wanted: BTreeSet<&str> = items.iter().map(|(id, _, _)| id.as_str()).collect();
        let mut verdicts = BTreeMap::new();
        for (i, line) in String::from_utf8_lossy(&output.stdout).lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |detail: String| ExternalError::Output { line: i + 1, detail };
            let v: Verdict = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if !wanted.contains(v.id.as_str()) {
                return Err(bad(format!("unknown id {:?}", v.id)));
            }
            if !v.score.is_finite() {
                return Err(bad(format!("non-finite score for {:?}", v.id)));
            }
            verdicts.insert(v.id.clone(), v);
        }
        let missing: Vec<String> = wanted
            .iter()
            .filter(|id| !verdicts.contains_key(**id))
            .map(|id| id.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ExternalError::Missing(missing));
        }
        Ok(verdicts.into_values().collect())
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn items() -> Vec<(String, String, String)> {
        vec![
            ("b".into(), "x".into(), "x".into()),
            ("a".into(), "y".into(), "z".into()),
        ]
    }

    #[test]
    fn echoes_verdicts_from_a_shell_scorer() {
        // Marks every request correct.
        let script = r#"sed -E 's/^\{"id":("[^"]*").*/{"id":\1,"score":1.0}/'"#;
        let scorer = CommandScorer::new("sh", vec!["-c".into(), script.into()]);
        let v = scorer.score(&items()).unwrap();
        assert_eq!(v.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(v.iter().all(|v| v.score == 1.0));
    }

    #[test]
    fn missing_verdicts_are_reported() {
        let scorer = CommandScorer::new(
            "sh",
            vec!["-c".into(), r#"cat >/dev/null; echo '{"id":"a","score":0}'"#.into()],
        );
        let err = scorer.score(&items()).unwrap_err();
        assert_eq!(err.to_string(), "scorer returned no verdict for ids: b");
    }

    #[test]
    fn failing_command() {
        let scorer = CommandScorer::new("sh", vec!["-c".into(), "echo boom >&2; exit 3".into()]);
        let err = scorer.score(&items()).unwrap_err();
        assert!(err.to_string().contains("boom"));
    }
}
