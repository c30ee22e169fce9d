// SPDX-License-Identifier: Apache-2.0

//! Prediction of per-flip-flop SEU functional failure rates.
//!
//! The crate covers the full flow: a `.bench` netlist is parsed and turned
//! into a circuit graph ([`netlist`]); an exhaustive fault-injection campaign
//! measures the ground-truth failure rate of every flip-flop ([`fault_sim`]);
//! a max-pooling GraphSAGE encoder embeds every node ([`graphsage`]); a small
//! dense network regresses failure rates from embeddings ([`dnn`]); and
//! [`metrics`] scores the predictions. [`pipeline`] wires the stages together.

pub mod dnn;
pub mod fault_sim;
pub mod generate;
pub mod graphsage;
pub mod linalg;
pub mod metrics;
pub mod netlist;
pub mod pipeline;
