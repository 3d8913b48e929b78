// SPDX-License-Identifier: Apache-2.0

//! A miniature high-level-synthesis flow: an affine tensor-loop DSL is
//! lowered into a structural hardware IR, memory-banking and parallelism
//! transformations are applied, and results are checked with a golden-model
//! interpreter, a cycle-accurate simulator, and a structural resource
//! estimator.

pub mod bench;
pub mod cli;
pub mod floatlib;
pub mod frontend;
pub mod ir;
pub mod passes;
pub mod pipeline;
pub mod resources;
pub mod sim;
