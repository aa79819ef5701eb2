//! Prompt optimization engine for structured extraction tasks.
//!
//! The crate searches over natural-language prompts (a task instruction plus
//! per-event-type guidelines) with Monte Carlo Tree Search. A task model
//! answers batches of queries under the current prompt, a parser and scorer
//! turn the answers into error sets and rewards, and an optimizer model
//! critiques the errors and rewrites the prompt. The best prompt is picked
//! by development-set reward.
//!
//! Modules map onto the moving parts:
//!
//! - [`schema`] / [`instance`]: the event ontology and extracted instances
//! - [`prompt`]: versioned prompt states, composition, guideline inheritance
//! - [`parser`]: tolerant parsing of model output in constructor-list form
//! - [`scorer`]: TI/TC/AI/AC micro-F1, accuracy and strict-span NER plug-ins
//! - [`gateway`]: task/optimizer model access (HTTP or scripted mock), batch
//!   prompting, transcripts
//! - [`template`] / [`optimizer`]: the four-step expansion loop
//! - [`mcts`]: UCT selection, expansion, back-propagation, checkpoints
//! - [`dataset`] / [`runner`] / [`report`]: data ingestion, evaluation runs,
//!   CSV analysis reports, and the CLI

pub mod cli;
pub mod dataset;
pub mod error;
pub mod gateway;
pub mod instance;
pub mod mcts;
pub mod optimizer;
pub mod parser;
pub mod prompt;
pub mod report;
pub mod runner;
pub mod schema;
pub mod scorer;
pub mod template;

pub use error::{Error, Result};
