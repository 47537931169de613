//! Morph attack detection on face images with gradient-based visual
//! explanations (saliency, CAM, Grad-CAM and their ensemble) and ISO
//! presentation-attack metrics, on a small from-scratch autodiff engine.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod explain;
pub mod metrics;
pub mod model;
pub mod resample;
pub mod rng;
pub mod tensor;
pub mod viz;

pub use error::{Error, Result};
