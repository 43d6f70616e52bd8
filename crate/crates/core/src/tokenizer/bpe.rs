//! Byte-level BPE compatible with GPT-2 style `vocab.json` / `merges.txt`
//! files.
//!
//! Text is split into pre-tokens following the GPT-2 pattern (contractions,
//! optionally space-prefixed letter, number and symbol runs, whitespace runs),
//! each pre-token's bytes are mapped onto the printable byte alphabet, and
//! merges are applied lowest rank first. Every token covers a contiguous byte
//! span of the input, which is what `prefix_fitting` cuts on.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

use super::Tokenizer;

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("merges line {line}: {detail}")]
    Merges { line: usize, detail: String },
}

/// One encoded token and the byte span of the input it covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BpeToken {
    /// Vocabulary id, when the merged symbol is present in the vocabulary.
    pub id: Option<u32>,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    /// Symbol string -> internal symbol id.
    symbols: HashMap<String, u32>,
    /// Internal symbol id -> vocabulary id.
    vocab_ids: Vec<Option<u32>>,
    /// (left, right) -> (rank, merged symbol).
    merges: HashMap<(u32, u32), (u32, u32)>,
    byte_symbol: [u32; 256],
    label: String,
    /// Merged pieces keyed by pre-token bytes, shared between clones.
    cache: Arc<RwLock<PieceCache>>,
}

/// (vocabulary id, byte length) of one merged symbol.
type Piece = (Option<u32>, u32);
type PieceCache = HashMap<Box<[u8]>, Box<[Piece]>>;

const CACHE_LIMIT: usize = 1 << 16;

/// GPT-2's reversible byte -> printable character table.
pub(crate) fn byte_alphabet() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).expect("valid code point");
            extra += 1;
            c
        };
    }
    table
}

impl BpeTokenizer {
    pub fn from_files(vocab_path: &Path, merges_path: &Path) -> Result<Self, BpeError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| BpeError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let vocab: HashMap<String, u32> =
            serde_json::from_str(&read(vocab_path)?).map_err(|e| BpeError::Vocab(e.to_string()))?;
        let merges = parse_merges(&read(merges_path)?)?;
        let name = merges_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut tok = Self::from_parts(vocab, merges);
        tok.label = format!("bpe:{name}:{}", tok.merges.len());
        Ok(tok)
    }

    pub fn from_parts(vocab: HashMap<String, u32>, merges: Vec<(String, String)>) -> Self {
        let mut symbols: HashMap<String, u32> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut intern = |s: &str, symbols: &mut HashMap<String, u32>| -> u32 {
            if let Some(&id) = symbols.get(s) {
                return id;
            }
            let id = names.len() as u32;
            names.push(s.to_string());
            symbols.insert(s.to_string(), id);
            id
        };
        let alphabet = byte_alphabet();
        let mut byte_symbol = [0u32; 256];
        for (b, c) in alphabet.iter().enumerate() {
            byte_symbol[b] = intern(&c.to_string(), &mut symbols);
        }
        let mut merge_map = HashMap::new();
        for (rank, (a, b)) in merges.iter().enumerate() {
            let left = intern(a, &mut symbols);
            let right = intern(b, &mut symbols);
            let merged = intern(&format!("{a}{b}"), &mut symbols);
            merge_map.entry((left, right)).or_insert((rank as u32, merged));
        }
        let vocab_ids = names.iter().map(|n| vocab.get(n).copied()).collect();
        let label = format!("bpe:inline:{}", merge_map.len());
        BpeTokenizer {
            symbols,
            vocab_ids,
            merges: merge_map,
            byte_symbol,
            label,
            cache: Arc::default(),
        }
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn encode(&self, text: &str) -> Vec<BpeToken> {
        let mut out = Vec::new();
        self.for_each_piece(text, |start, pieces| {
            let mut pos = start;
            for &(id, len) in pieces {
                out.push(BpeToken {
                    id,
                    start: pos,
                    end: pos + len as usize,
                });
                pos += len as usize;
            }
        });
        out
    }

    fn for_each_piece(&self, text: &str, mut f: impl FnMut(usize, &[Piece])) {
        let bytes = text.as_bytes();
        let mut fresh = Vec::new();
        {
            let cache = self.cache.read().unwrap_or_else(|e| e.into_inner());
            for (start, end) in pretokenize(text) {
                let key = &bytes[start..end];
                match cache.get(key) {
                    Some(pieces) => f(start, pieces),
                    None => {
                        let pieces = self.merge_piece(key);
                        f(start, &pieces);
                        fresh.push((key, pieces));
                    }
                }
            }
        }
        if fresh.is_empty() {
            return;
        }
        let mut cache = self.cache.write().unwrap_or_else(|e| e.into_inner());
        if cache.len() + fresh.len() > CACHE_LIMIT {
            cache.clear();
        }
        for (key, pieces) in fresh {
            cache.insert(key.into(), pieces.into_boxed_slice());
        }
    }

    fn merge_piece(&self, bytes: &[u8]) -> Vec<Piece> {
        struct Sym {
            id: u32,
            len: usize,
            prev: Option<usize>,
            next: Option<usize>,
            alive: bool,
        }
        let n = bytes.len();
        let mut syms: Vec<Sym> = bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| Sym {
                id: self.byte_symbol[b as usize],
                len: 1,
                prev: i.checked_sub(1),
                next: (i + 1 < n).then_some(i + 1),
                alive: true,
            })
            .collect();

        // (rank, left position, left id, right id); ties go to the leftmost pair.
        let mut heap = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<Reverse<(u32, usize, u32, u32)>>, syms: &[Sym], i: usize| {
            if let Some(j) = syms[i].next {
                if let Some(&(rank, _)) = self.merges.get(&(syms[i].id, syms[j].id)) {
                    heap.push(Reverse((rank, i, syms[i].id, syms[j].id)));
                }
            }
        };
        for i in 0..n {
            push(&mut heap, &syms, i);
        }
        while let Some(Reverse((_, i, left, right))) = heap.pop() {
            let Some(j) = syms[i].next else { continue };
            if !syms[i].alive || syms[i].id != left || syms[j].id != right {
                continue;
            }
            let (_, merged) = self.merges[&(left, right)];
            syms[i].id = merged;
            syms[i].len += syms[j].len;
            syms[j].alive = false;
            let after = syms[j].next;
            syms[i].next = after;
            if let Some(k) = after {
                syms[k].prev = Some(i);
            }
            if let Some(p) = syms[i].prev {
                push(&mut heap, &syms, p);
            }
            push(&mut heap, &syms, i);
        }

        let mut out = Vec::new();
        let mut cur = (n > 0).then_some(0);
        while let Some(i) = cur {
            let s = &syms[i];
            out.push((self.vocab_ids[s.id as usize], s.len as u32));
            cur = s.next;
        }
        out
    }

    /// Looks up the internal symbol for a vocabulary string (test helper).
    #[doc(hidden)]
    pub fn has_symbol(&self, s: &str) -> bool {
        self.symbols.contains_key(s)
    }
}

impl Tokenizer for BpeTokenizer {
    fn id(&self) -> String {
        self.label.clone()
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        self.for_each_piece(text, |_, pieces| n += pieces.len());
        n
    }

    fn prefix_fitting<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        let tokens = self.encode(text);
        if tokens.len() <= max_tokens {
            return text;
        }
        let mut keep = max_tokens;
        loop {
            if keep == 0 {
                return "";
            }
            let mut cut = tokens[keep - 1].end;
            while !text.is_char_boundary(cut) {
                cut -= 1;
            }
            let candidate = &text[..cut];
            // Re-encoding a cut inside a pre-token can change the split.
            if self.count(candidate) <= max_tokens {
                return candidate;
            }
            keep -= 1;
        }
    }
}

fn parse_merges(text: &str) -> Result<Vec<(String, String)>, BpeError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with("#version") || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => out.push((a.to_string(), b.to_string())),
            _ => {
                return Err(BpeError::Merges {
                    line: i + 1,
                    detail: format!("expected two space-separated symbols, got {line:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class(c: char) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else {
        Class::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

/// Byte spans of GPT-2 pre-tokens:
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
pub(crate) fn pretokenize(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
    let run_end = |mut k: usize, cls: Class| {
        while k < chars.len() && class(chars[k].1) == cls {
            k += 1;
        }
        k
    };
    let mut spans = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let start = k;
        let rest = &text[chars[k].0..];
        if let Some(c) = CONTRACTIONS.iter().find(|c| rest.starts_with(**c)) {
            k += c.chars().count();
        } else {
            let c = chars[k].1;
            let next_cls = chars.get(k + 1).map(|&(_, n)| class(n));
            match class(c) {
                Class::Space if c == ' ' && matches!(next_cls, Some(cls) if cls != Class::Space) => {
                    k = run_end(k + 1, next_cls.unwrap());
                }
                Class::Space => {
                    let end = run_end(k, Class::Space);
                    k = if end == chars.len() || end - k == 1 {
                        end
                    } else {
                        // Leave the last whitespace character for the next
                        // pre-token (the `\s+(?!\S)` backtrack).
                        end - 1
                    };
                }
                cls => k = run_end(k, cls),
            }
        }
        spans.push((byte_at(start), byte_at(k)));
    }
    spans
}
