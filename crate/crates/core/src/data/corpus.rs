use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::face::generate_face;
use crate::error::{Error, Result};
use crate::rng::Lcg;
use crate::viz::{read_ppm, write_ppm, RgbImage};

pub const DEFAULT_BONAFIDE: usize = 128;
pub const DEFAULT_MORPHED: usize = 128;
/// Allowed blend weights of the first parent.
pub const LAMBDA_RANGE: (f64, f64) = (0.25, 0.75);
/// Blend weights are stored in millionths.
const LAMBDA_SCALE: u64 = 1_000_000;
const MANIFEST: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    BonaFide,
    Morphed,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::BonaFide => 0,
            Label::Morphed => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Label::BonaFide),
            1 => Ok(Label::Morphed),
            other => Err(Error::ClassOutOfRange { index: other, classes: 2 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Generated,
    /// `lambda` weights `source_a`; `1 - lambda` weights `source_b`.
    Blend { source_a: String, source_b: String, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub image: RgbImage,
    pub label: Label,
    pub provenance: Provenance,
}

fn quantize_lambda(lambda: f64) -> u64 {
    (lambda * LAMBDA_SCALE as f64).round() as u64
}

/// Pixelwise `round(lambda * a + (1 - lambda) * b)`, with `lambda`
/// quantized to millionths and the blend evaluated in exact integer
/// arithmetic, so `morph(a, b, l) == morph(b, a, 1 - l)`.
pub fn morph(a: &LabeledImage, b: &LabeledImage, lambda: f64, id: &str) -> Result<LabeledImage> {
    let (lo, hi) = LAMBDA_RANGE;
    if !(lo..=hi).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("blend weight {lambda} outside [{lo}, {hi}]")));
    }
    if a.label != Label::BonaFide || b.label != Label::BonaFide {
        return Err(Error::InvalidArgument("morph parents must both be bona fide".into()));
    }
    let (ia, ib) = (&a.image, &b.image);
    if (ia.height(), ia.width()) != (ib.height(), ib.width()) {
        return Err(Error::shape(
            "morph",
            format!("{}x{} vs {}x{}", ia.height(), ia.width(), ib.height(), ib.width()),
        ));
    }
    let wa = quantize_lambda(lambda);
    let wb = LAMBDA_SCALE - wa;
    let pixels = ia
        .pixels()
        .iter()
        .zip(ib.pixels())
        .map(|(&pa, &pb)| {
            let num = wa * u64::from(pa) + wb * u64::from(pb);
            // round half up: floor(num / S + 1/2)
            ((2 * num + LAMBDA_SCALE) / (2 * LAMBDA_SCALE)) as u8
        })
        .collect();
    Ok(LabeledImage {
        id: id.to_string(),
        image: RgbImage::new(ia.height(), ia.width(), pixels)?,
        label: Label::Morphed,
        provenance: Provenance::Blend {
            source_a: a.id.clone(),
            source_b: b.id.clone(),
            lambda: wa as f64 / LAMBDA_SCALE as f64,
        },
    })
}

fn bonafide_id(i: usize) -> String {
    format!("bonafide/{i:04}")
}

fn morph_id(i: usize) -> String {
    format!("morph/{i:04}")
}

/// Distinct unordered pairs `(i, j)`, `i < j < n`, drawn without replacement.
fn draw_pairs(n: usize, count: usize, rng: &mut Lcg) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if 2 * count <= total {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (a, b) = (rng.below(n), rng.below(n));
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if seen.insert(pair) {
                out.push(pair);
            }
        }
        out
    } else {
        let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for k in 0..count {
            let pick = k + rng.below(all.len() - k);
            all.swap(k, pick);
        }
        all.truncate(count);
        all
    }
}

/// `n_bonafide` generated faces followed by `n_morphed` blends of distinct
/// parent pairs, all rendered at `size x size`.
pub fn build_corpus(n_bonafide: usize, n_morphed: usize, seed: u64, size: usize) -> Result<Vec<LabeledImage>> {
    let max_pairs = n_bonafide * n_bonafide.saturating_sub(1) / 2;
    if n_morphed > max_pairs {
        return Err(Error::InvalidArgument(format!(
            "{n_morphed} morphs requested but {n_bonafide} bona fide faces only form {max_pairs} distinct pairs"
        )));
    }
    let mut corpus: Vec<LabeledImage> = (0..n_bonafide)
        .map(|i| {
            let face_seed = Lcg::stream(seed, i as u64).next_u64();
            LabeledImage { id: bonafide_id(i), ..generate_face(face_seed, size) }
        })
        .collect();
    let mut rng = Lcg::new(seed);
    let pairs = draw_pairs(n_bonafide, n_morphed, &mut rng);
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        let lambda = rng.uniform(LAMBDA_RANGE.0, LAMBDA_RANGE.1);
        let m = morph(&corpus[i], &corpus[j], lambda, &morph_id(k))?;
        corpus.push(m);
    }
    Ok(corpus)
}

/// Tab-separated manifest: header then one row per image.
pub fn manifest_text(corpus: &[LabeledImage]) -> String {
    let mut out = String::from("id\tlabel\tsource_a\tsource_b\tlambda\n");
    for s in corpus {
        match &s.provenance {
            Provenance::Generated => writeln!(out, "{}\t{}\t-\t-\t-", s.id, s.label.index()),
            Provenance::Blend { source_a, source_b, lambda } => {
                writeln!(out, "{}\t{}\t{source_a}\t{source_b}\t{lambda:.6}", s.id, s.label.index())
            }
        }
        .expect("writing to a String");
    }
    out
}

/// Writes `bonafide/NNNN.ppm`, `morph/NNNN.ppm` and `manifest.tsv`.
pub fn write_corpus(dir: &Path, corpus: &[LabeledImage]) -> Result<()> {
    for sub in ["bonafide", "morph"] {
        let path = dir.join(sub);
        std::fs::create_dir_all(&path).map_err(|e| Error::io(path, e))?;
    }
    for s in corpus {
        write_ppm(&dir.join(format!("{}.ppm", s.id)), &s.image)?;
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest_text(corpus)).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(dir: &Path) -> Result<Vec<LabeledImage>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("id\tlabel\tsource_a\tsource_b\tlambda") {
        return Err(Error::format("manifest", "missing or unexpected header row"));
    }
    let mut corpus = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = |what: &str| Error::format("manifest", format!("row {}: {what}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, label, source_a, source_b, lambda] = cols[..] else {
            return Err(bad("expected 5 tab-separated columns"));
        };
        if id.contains("..") || id.starts_with('/') {
            return Err(bad("id must be a relative path inside the corpus"));
        }
        let label = Label::from_index(label.parse().map_err(|_| bad("label must be 0 or 1"))?)?;
        let provenance = match label {
            Label::BonaFide => Provenance::Generated,
            Label::Morphed => Provenance::Blend {
                source_a: source_a.to_string(),
                source_b: source_b.to_string(),
                lambda: lambda.parse().map_err(|_| bad("lambda must be a number"))?,
            },
        };
        let image = read_ppm(&dir.join(format!("{id}.ppm")))?;
        corpus.push(LabeledImage { id: id.to_string(), image, label, provenance });
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(id: &str, v: u8) -> LabeledImage {
        LabeledImage {
            id: id.into(),
            image: RgbImage::filled(2, 2, [v, v, v]).unwrap(),
            label: Label::BonaFide,
            provenance: Provenance::Generated,
        }
    }

    #[test]
    fn rejects_lambda_out_of_range() {
        assert!(morph(&flat("a", 0), &flat("b", 0), 0.1, "m").is_err());
        assert!(morph(&flat("a", 0), &flat("b", 0), 0.8, "m").is_err());
    }

    #[test]
    fn even_blend() {
        let m = morph(&flat("a", 100), &flat("b", 200), 0.5, "m").unwrap();
        assert!(m.image.pixels().iter().all(|&p| p == 150));
        assert_eq!(m.label, Label::Morphed);
        assert_eq!(
            m.provenance,
            Provenance::Blend { source_a: "a".into(), source_b: "b".into(), lambda: 0.5 }
        );
    }

    #[test]
    fn rejects_mismatched_or_morphed_parents() {
        let mut big = flat("c", 1);
        big.image = RgbImage::filled(3, 2, [1, 1, 1]).unwrap();
        assert!(morph(&flat("a", 0), &big, 0.5, "m").is_err());
        let m = morph(&flat("a", 0), &flat("b", 9), 0.5, "m").unwrap();
        assert!(morph(&m, &flat("b", 9), 0.5, "m2").is_err());
    }

    #[test]
    fn small_corpus_counts() {
        let c = build_corpus(2, 1, 3, 16).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.iter().filter(|s| s.label == Label::Morphed).count(), 1);
        assert!(build_corpus(2, 2, 3, 16).is_err());
    }

    #[test]
    fn corpus_provenance_invariant() {
        let c = build_corpus(12, 40, 5, 16).unwrap();
        let mut pairs = HashSet::new();
        for s in &c {
            match (&s.label, &s.provenance) {
                (Label::BonaFide, Provenance::Generated) => {}
                (Label::Morphed, Provenance::Blend { source_a, source_b, lambda }) => {
                    assert!((0.25..=0.75).contains(lambda));
                    let key = if source_a < source_b { (source_a, source_b) } else { (source_b, source_a) };
                    assert!(pairs.insert(key), "duplicate pair");
                }
                other => panic!("bad provenance {other:?}"),
            }
        }
        // dense regime: all 66 pairs
        assert_eq!(build_corpus(12, 66, 5, 8).unwrap().len(), 78);
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(build_corpus(6, 5, 17, 16).unwrap(), build_corpus(6, 5, 17, 16).unwrap());
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = build_corpus(4, 3, 1, 16).unwrap();
        write_corpus(dir.path(), &c).unwrap();
        assert!(dir.path().join("bonafide/0003.ppm").exists());
        assert!(dir.path().join("morph/0002.ppm").exists());
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back, c);
        let manifest = std::fs::read_to_string(dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(manifest.lines().count(), 8);
        assert!(manifest.lines().nth(1).unwrap().starts_with("bonafide/0000\t0\t-\t-\t-"));
    }

    proptest! {
        #[test]
        fn morph_is_between_parents_and_symmetric(
            pa in prop::collection::vec(any::<u8>(), 12),
            pb in prop::collection::vec(any::<u8>(), 12),
            lambda in 0.25f64..=0.75,
        ) {
            let a = LabeledImage { image: RgbImage::new(2, 2, pa).unwrap(), ..flat("a", 0) };
            let b = LabeledImage { image: RgbImage::new(2, 2, pb).unwrap(), ..flat("b", 0) };
            let ab = morph(&a, &b, lambda, "m").unwrap();
            let ba = morph(&b, &a, 1.0 - lambda, "m").unwrap();
            prop_assert_eq!(ab.image.pixels(), ba.image.pixels());
            for ((&m, &x), &y) in ab.image.pixels().iter().zip(a.image.pixels()).zip(b.image.pixels()) {
                prop_assert!(m >= x.min(y) && m <= x.max(y));
            }
        }
    }
}
