use super::corpus::{Label, LabeledImage};
use crate::error::{Error, Result};
use crate::rng::Lcg;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    pub seed: u64,
    pub ratio: f64,
}

/// Stratified seeded split: each class contributes `round(ratio * n_class)`
/// samples to `train`, the rest to `test`.
pub fn split(corpus: &[LabeledImage], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty corpus".into()));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} must lie in [0, 1]")));
    }
    let mut rng = Lcg::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::BonaFide, Label::Morphed] {
        let mut members: Vec<&LabeledImage> = corpus.iter().filter(|s| s.label == label).collect();
        rng.shuffle(&mut members);
        let cut = (ratio * members.len() as f64).round() as usize;
        train.extend(members[..cut].iter().map(|&s| s.clone()));
        test.extend(members[cut..].iter().map(|&s| s.clone()));
    }
    rng.shuffle(&mut train);
    rng.shuffle(&mut test);
    Ok(DatasetSplit { train, test, seed, ratio })
}
