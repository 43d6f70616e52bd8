//! Corpus construction and evaluation toolkit for structured knowledge
//! grounding (SKG).
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`] loads datasets and a corpus manifest from disk.
//! 2. [`linearize`] flattens tables, triples, schemas and dialogues into text.
//! 3. [`prompt`] picks an instruction, assembles the prompt, and hands the
//!    result to [`budget`], which shrinks the structured segment until the
//!    record fits the token budget (or discards it).
//! 4. [`mixture`] blends SKG records with general instruction records.
//! 5. [`metrics`] and [`stats`] score predictions and report token statistics.
//!
//! Batch entry points take an [`Execution`] so the same call runs on the rayon
//! pool or on the current thread. Without the `parallel` feature every
//! execution is sequential.

pub mod budget;
pub mod exec;
mod hash;
pub mod ingest;
pub mod linearize;
pub mod metrics;
pub mod mixture;
pub mod prompt;
pub mod stats;
pub mod tokenizer;
pub mod types;
pub mod validate;

pub use budget::{fit_example, FitMode, FitOutcome, FitResult, FixedParts, Granularity, TokenBudget};
pub use exec::Execution;
pub use linearize::{linearize, EscapePolicy, LinearizationConfig, LinearizeError};
pub use prompt::{assemble_prompt, pick_instruction, InstructionPool, PromptTemplate};
pub use tokenizer::{count_tokens, BpeTokenizer, Tokenizer, WhitespaceTokenizer};
pub use types::{
    DatabaseSchema, DialogueHistory, Origin, SkgExample, StructureVariant, StructuredKnowledge, Table, TaskGroup,
    TrainingRecord, TripleSet,
};
pub use validate::{validate_example, Violation};
