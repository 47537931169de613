//! Gradient-based explanations and their stacking ensemble.

mod cam;
mod ensemble;
mod gradcam;
mod heatmap;
mod pipeline;
mod saliency;
mod xhm;

pub use cam::{cam, class_activation_map};
pub use ensemble::{ensemble, EnsembleResult, DEFAULT_WEIGHTS};
pub use gradcam::{gradcam, GradCam, ImportanceWeights};
pub use heatmap::{normalize_map, upsample, Heatmap, Method};
pub use pipeline::{explain_image, Explanation};
pub use saliency::{saliency_map, LogitModel};
pub use xhm::{decode_xhm, encode_xhm, read_xhm, write_xhm, XhmRecord, ENSEMBLE_VECTOR};
