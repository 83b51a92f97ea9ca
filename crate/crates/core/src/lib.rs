//! Interaction-framework engine: closed-form accuracy and agreement, Monte
//! Carlo and enumeration checks, the activation-to-interaction-tensor
//! pipeline, observation analytics, and parameter sweeps.

pub mod analytics;
pub mod combinatorics;
pub mod enumerate;
pub mod formats;
pub mod model;
pub mod report;
pub mod simulator;
pub mod sweep;
pub mod tensor;
