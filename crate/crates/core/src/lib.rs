// SPDX-License-Identifier: Apache-2.0

//! Predictor-based event-triggered consensus for linear multi-agent systems
//! on directed graphs.
//!
//! Each agent runs `ẋᵢ = Axᵢ + Buᵢ` with `uᵢ = K Σⱼ aᵢⱼ (x̂ᵢ − x̂ⱼ)`, where
//! `x̂` is a model-based prediction of the last broadcast state. An agent
//! broadcasts only when `‖x̂ᵢ − xᵢ‖ ≥ c₁e^{−αt}`. The crate covers the
//! numerics ([`matlib`]), the topology ([`graph`]), the closed-loop analysis
//! and gain synthesis ([`model`]), the per-agent runtime ([`protocol`]), the
//! simulation engine ([`sim`]) and scenario configuration ([`config`]).

pub mod config;
pub mod graph;
pub mod matlib;
pub mod model;
pub mod protocol;
pub mod sim;

pub use matlib::{Mat, MatError, Spectrum};
