//! Staged humour translation pipeline with LLM-as-judge scoring.
//!
//! The crate is organised as a small set of layers: `gateway` talks to any
//! OpenAI-compatible chat endpoint (with caching, rate limiting, and
//! retries), `prompts` renders the stage templates, `pipeline` runs the
//! staged decompose/translate/compose flow, `judge` scores outputs and
//! aggregates them, and `runstore`/`report` persist and present runs.
//! `experiment` ties the layers together for the CLI.

pub mod config;
pub mod corpus;
pub mod experiment;
pub mod gateway;
pub mod judge;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod runstore;
