//! Verifier-in-the-loop synthesis of auxiliary JML annotations.
//!
//! An LLM oracle proposes a loop invariant or callee contract for the single
//! gap in a partially annotated Java file; a verifier decides. The
//! [`strategy`] module implements feedback, sampling and mixed error
//! recovery on top of that loop, and [`bench`] runs and aggregates them.

pub mod bench;
pub mod oracle;
pub mod prompting;
pub mod source_model;
pub mod strategy;
pub mod verifier;
