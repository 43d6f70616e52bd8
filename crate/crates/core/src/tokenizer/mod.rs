//! Token counting behind a pluggable interface.
//!
//! Two implementations ship: [`WhitespaceTokenizer`], the dependency-free
//! fallback, and [`BpeTokenizer`], a byte-level BPE loaded from a
//! `vocab.json` / `merges.txt` pair. Counts are only meaningful relative to
//! the configured tokenizer, so every report carries [`Tokenizer::id`].

mod bpe;
mod whitespace;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bpe::{BpeError, BpeToken, BpeTokenizer};
pub use whitespace::WhitespaceTokenizer;

/// Contract:
///
/// * `count("") == 0`, and `count` is deterministic.
/// * `prefix_fitting(t, n)` returns a prefix `p` of `t` with `count(p) <= n`,
///   cut on a token boundary and never inside a UTF-8 character.
///
/// Implementations hold no caller-visible mutable state and may be shared
/// between worker threads.
pub trait Tokenizer: Send + Sync {
    /// Short identifier stamped into reports.
    fn id(&self) -> String;

    fn count(&self, text: &str) -> usize;

    fn prefix_fitting<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str;
}

pub fn count_tokens(text: &str, tokenizer: &dyn Tokenizer) -> usize {
    tokenizer.count(text)
}

/// Tokenizer selection as written in a manifest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenizerSpec {
    #[default]
    Whitespace,
    Bpe {
        vocab: PathBuf,
        merges: PathBuf,
    },
}

impl TokenizerSpec {
    pub fn load(&self) -> Result<Arc<dyn Tokenizer>, BpeError> {
        Ok(match self {
            TokenizerSpec::Whitespace => Arc::new(WhitespaceTokenizer),
            TokenizerSpec::Bpe { vocab, merges } => Arc::new(BpeTokenizer::from_files(vocab, merges)?),
        })
    }

    /// Resolves relative file paths against `base`.
    pub fn resolved(&self, base: &std::path::Path) -> TokenizerSpec {
        match self {
            TokenizerSpec::Whitespace => TokenizerSpec::Whitespace,
            TokenizerSpec::Bpe { vocab, merges } => TokenizerSpec::Bpe {
                vocab: base.join(vocab),
                merges: base.join(merges),
            },
        }
    }
}
