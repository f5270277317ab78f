//! Feasibility-gated, group-relative policy optimization for interior layouts.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene`]: rooms, objects, layouts, briefs and their JSON documents.
//! - [`feasibility`] and [`pathway`]: the deterministic verifier and layout metrics.
//! - [`schematic`]: top-down projection, SVG/pixmap export and color histograms.
//! - [`aesthetics`]: style, balance and harmony scores behind an embedding provider.
//! - [`gate`]: hard-gated fusion of the two reward branches.
//! - [`policy`]: the small autoregressive layout policy with exact gradients.
//! - [`grpo`]: token-level credit assignment and the clipped group-relative update.
//! - [`harness`]: scenario templates, evaluation, sweeps and reports.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aesthetics;
pub mod config;
pub mod error;
pub mod feasibility;
pub mod gate;
pub mod geometry;
pub mod grpo;
pub mod harness;
pub mod pathway;
pub mod policy;
pub mod scene;
pub mod schematic;

pub use error::{Error, Result};
