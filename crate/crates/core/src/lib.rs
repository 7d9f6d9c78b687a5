//! Project-aware cloze-style automated program repair.
//!
//! The pipeline ingests a buggy project, builds project-specific masked-span
//! fine-tuning datasets, retrieves relevant identifiers from lines similar to
//! the buggy line, generates candidate patches with a pluggable masked-span
//! predictor (four variants: base, knowledge-trained, repair-trained, and
//! base-with-prompt), ranks the candidates by mean token log-likelihood, and
//! validates them against the project's own test command in isolated working
//! directories.
//!
//! Modules follow the pipeline stages:
//!
//! - [`corpus`]: project ingestion, lexing, and function extraction
//! - [`masking`]: knowledge-intensified and repair-oriented dataset builders
//! - [`templates`]: the repair-template engine (mask and splice)
//! - [`retrieval`]: relevant-identifier ranking and prompt construction
//! - [`model`]: the masked-span predictor interface, reference backend, and
//!   remote backend
//! - [`repair`]: per-bug orchestration, ranking, and rank merging
//! - [`validation`]: patch application and test-suite classification
//! - [`config`]: run/bug configuration with flag > file > default precedence
//! - [`report`]: per-bug repair reports and multi-bug summaries

pub mod config;
pub mod corpus;
mod error;
pub mod masking;
pub mod model;
pub mod repair;
pub mod report;
pub mod retrieval;
mod seeding;
pub mod templates;
pub mod validation;

pub use error::{Error, Result};
