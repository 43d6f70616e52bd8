pub mod build;
pub mod eval;
pub mod inspect;
pub mod stats;
