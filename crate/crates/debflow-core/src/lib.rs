//! Core engine for debate-driven optimization of LLM agentic workflows.

pub mod debate;
pub mod demo;
pub mod evaluator;
pub mod executor;
pub mod memory;
pub mod optimizer;
pub mod prompts;
pub mod provider;
pub mod replay;
pub mod rundir;
pub mod runlog;
pub mod structured;
pub mod template;
pub mod workflow;
