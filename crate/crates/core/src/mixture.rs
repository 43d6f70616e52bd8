//! Blending of SKG records with general instruction records.
//!
//! The general fraction `r` is defined over record counts: for `n_skg` SKG
//! records the builder adds `round(r / (1 - r) * n_skg)` general records so
//! that general records make up `r` of the corpus. [`build_mixture_by_tokens`]
//! is the token-count alternative.
//!
//! Randomness is a single ChaCha8 stream seeded with `seed_from_u64(seed)`.
//! General records are drawn first (a partial Fisher–Yates over pool indices
//! without replacement, or independent uniform draws with replacement), then
//! the concatenation `skg ++ general` is Fisher–Yates shuffled from the same
//! stream. All bounded draws go through `u64` so results do not depend on the
//! platform's pointer width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::Tokenizer;
use crate::types::{Origin, TrainingRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Share of general records, in `[0, 1)`.
    pub general_fraction: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub skg_sources: Vec<String>,
    pub general_source: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MixtureError {
    #[error("general fraction {0} is outside [0, 1)")]
    Fraction(f64),
    #[error("no SKG sources configured")]
    NoSkgSources,
    #[error("general fraction {0} requires a general source")]
    NoGeneralSource(f64),
    #[error("general pool has {available} records, {required} required without replacement (short by {})", required - available)]
    Shortfall { required: usize, available: usize },
    #[error("general pool is empty but {required} records are required")]
    EmptyPool { required: usize },
    #[error("record {0:?} has no origin tag")]
    Untagged(String),
    #[error("corpus is empty")]
    EmptyCorpus,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<(), MixtureError> {
        let r = self.general_fraction;
        if !(0.0..1.0).contains(&r) {
            return Err(MixtureError::Fraction(r));
        }
        if self.skg_sources.is_empty() {
            return Err(MixtureError::NoSkgSources);
        }
        if r > 0.0 && self.general_source.is_none() {
            return Err(MixtureError::NoGeneralSource(r));
        }
        Ok(())
    }
}

/// `round(r / (1 - r) * n_skg)`.
pub fn required_general_count(n_skg: usize, general_fraction: f64) -> usize {
    if general_fraction <= 0.0 {
        return 0;
    }
    (general_fraction / (1.0 - general_fraction) * n_skg as f64).round() as usize
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

fn fisher_yates<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// Pool indices in draw order. Without replacement this is a lazily
/// extended partial Fisher–Yates permutation.
struct Draws {
    order: Vec<usize>,
    next: usize,
    sampling: Sampling,
}

impl Draws {
    fn new(pool: usize, sampling: Sampling) -> Self {
        Draws {
            order: (0..pool).collect(),
            next: 0,
            sampling,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let n = self.order.len();
        match self.sampling {
            Sampling::WithReplacement => (n > 0).then(|| below(rng, n)),
            Sampling::WithoutReplacement => {
                if self.next >= n {
                    return None;
                }
                let j = self.next + below(rng, n - self.next);
                self.order.swap(self.next, j);
                self.next += 1;
                Some(self.order[self.next - 1])
            }
        }
    }
}

fn check_pool(required: usize, available: usize, sampling: Sampling) -> Result<(), MixtureError> {
    if required == 0 {
        return Ok(());
    }
    match sampling {
        Sampling::WithoutReplacement if available < required => Err(MixtureError::Shortfall { required, available }),
        Sampling::WithReplacement if available == 0 => Err(MixtureError::EmptyPool { required }),
        _ => Ok(()),
    }
}

fn shuffle_tagged(skg: Vec<TrainingRecord>, general: Vec<TrainingRecord>, rng: &mut ChaCha8Rng) -> Vec<TrainingRecord> {
    let mut corpus: Vec<TrainingRecord> = skg
        .into_iter()
        .map(|r| TrainingRecord {
            origin: Some(Origin::Skg),
            ..r
        })
        .chain(general.into_iter().map(|r| TrainingRecord {
            origin: Some(Origin::General),
            ..r
        }))
        .collect();
    fisher_yates(&mut corpus, rng);
    corpus
}

/// Mixes by record count. Every SKG record appears exactly once.
pub fn build_mixture(
    skg_records: Vec<TrainingRecord>,
    general_pool: &[TrainingRecord],
    spec: &MixtureSpec,
) -> Result<Vec<TrainingRecord>, MixtureError> {
    spec.validate()?;
    let required = required_general_count(skg_records.len(), spec.general_fraction);
    check_pool(required, general_pool.len(), spec.sampling)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draws = Draws::new(general_pool.len(), spec.sampling);
    let general = (0..required)
        .map(|_| general_pool[draws.draw(&mut rng).expect("pool size checked")].clone())
        .collect();
    Ok(shuffle_tagged(skg_records, general, &mut rng))
}

/// Mixes so that general records carry about `r` of all tokens, where a
/// record's weight is `count(prompt) + count(completion)`. Records are added
/// in draw order while doing so moves the general token total closer to the
/// target.
pub fn build_mixture_by_tokens(
    skg_records: Vec<TrainingRecord>,
    general_pool: &[TrainingRecord],
    spec: &MixtureSpec,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<TrainingRecord>, MixtureError> {
    spec.validate()?;
    let weight = |r: &TrainingRecord| (tokenizer.count(&r.prompt) + tokenizer.count(&r.completion)) as f64;
    let skg_tokens: f64 = skg_records.iter().map(weight).sum();
    let r = spec.general_fraction;
    let target = if r > 0.0 { r / (1.0 - r) * skg_tokens } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draws = Draws::new(general_pool.len(), spec.sampling);
    let mut general = Vec::new();
    let mut total = 0.0;
    if target > 0.0 && general_pool.is_empty() {
        return Err(MixtureError::EmptyPool { required: 1 });
    }
    while total < target {
        let Some(i) = draws.draw(&mut rng) else {
            return Err(MixtureError::Shortfall {
                required: general.len() + 1,
                available: general_pool.len(),
            });
        };
        let w = weight(&general_pool[i]);
        if (total + w - target).abs() >= (total - target).abs() {
            break;
        }
        total += w;
        general.push(general_pool[i].clone());
    }
    Ok(shuffle_tagged(skg_records, general, &mut rng))
}

/// Exact share of general-tagged records.
pub fn general_ratio<'a, I>(corpus: I) -> Result<f64, MixtureError>
where
    I: IntoIterator<Item = &'a TrainingRecord>,
{
    let (mut general, mut total) = (0usize, 0usize);
    for r in corpus {
        match r.origin {
            Some(Origin::General) => general += 1,
            Some(Origin::Skg) => {}
            None => return Err(MixtureError::Untagged(r.id.clone())),
        }
        total += 1;
    }
    if total == 0 {
        return Err(MixtureError::EmptyCorpus);
    }
    Ok(general as f64 / total as f64)
}

/// Share of tokens (prompt + completion) carried by general-tagged records.
pub fn general_token_ratio<'a, I>(corpus: I, tokenizer: &dyn Tokenizer) -> Result<f64, MixtureError>
where
    I: IntoIterator<Item = &'a TrainingRecord>,
{
    let (mut general, mut total) = (0usize, 0usize);
    for r in corpus {
        let w = tokenizer.count(&r.prompt) + tokenizer.count(&r.completion);
        match r.origin {
            Some(Origin::General) => general += w,
            Some(Origin::Skg) => {}
            None => return Err(MixtureError::Untagged(r.id.clone())),
        }
        total += w;
    }
    if total == 0 {
        return Err(MixtureError::EmptyCorpus);
    }
    Ok(general as f64 / total as f64)
}
