// SPDX-License-Identifier: Apache-2.0
//! eFPGA redaction flow: design IR, candidate filtering, clustering, fabric
//! sizing, selection and design rewriting.

pub mod ir;
pub mod truth;
pub mod fabric;
pub mod dataflow;
pub mod clustering;
pub mod dse;
pub mod selection;
pub mod equiv;
pub mod rewriter;
pub mod fixtures;
pub mod config;
pub mod flow;
