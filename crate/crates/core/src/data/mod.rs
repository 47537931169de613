//! Synthetic bona fide / morph corpus, preprocessing and splitting.

mod corpus;
mod face;
mod preprocess;
mod split;

pub use corpus::{
    build_corpus, load_corpus, manifest_text, morph, write_corpus, Label, LabeledImage, Provenance,
    DEFAULT_BONAFIDE, DEFAULT_MORPHED, LAMBDA_RANGE,
};
pub use face::{generate_face, FaceParams};
pub use preprocess::{image_to_tensor, preprocess, resize_image};
pub use split::{split, DatasetSplit};
