//! The acceptance suite: eleven criteria, one PASS/FAIL line each.
//!
//! The criteria run one after another inside a single test so the
//! runtime budgets are measured without other tests competing for the
//! CPU. Each line carries the measured numbers behind the verdict.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use morphlens::autodiff::{gradient_check, Mode};
use morphlens::checkpoint::{decode_checkpoint, encode_checkpoint};
use morphlens::config::RunConfig;
use morphlens::data::{generate_face, image_to_tensor, morph};
use morphlens::explain::{
    class_activation_map, decode_xhm, encode_xhm, ensemble, gradcam, saliency_map, Heatmap, Method, XhmRecord,
    ENSEMBLE_VECTOR,
};
use morphlens::metrics::{compute_metrics, identity_check, ConfusionCounts};
use morphlens::model::{build_model, plan_scaling, CnnModel, Layer, LossObjective, ScalingConfig};
use morphlens::rng::Lcg;
use morphlens::tensor::Tensor;
use morphlens::viz::{decode_pgm, decode_ppm, encode_pgm, encode_ppm, GrayImage, RgbImage};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn default_model(seed: u64) -> CnnModel {
    build_model(&plan_scaling(&ScalingConfig::default()).unwrap(), seed).unwrap()
}

fn random_image(rng: &mut Lcg, r: usize) -> Tensor {
    Tensor::new(vec![1, 3, r, r], (0..3 * r * r).map(|_| rng.next_f64()).collect()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// 1. Gradient oracle over the full default model.
fn gradient_oracle() -> Verdict {
    let start = Instant::now();
    let (mut worst, mut smooth, mut kinks, mut checked) = (0.0f64, 0.0f64, 0, 0);
    let mut failing = Vec::new();
    for seed in 0..20u64 {
        let m = default_model(seed);
        let r = m.resolution();
        let a = generate_face(2 * seed, r);
        let b = morph(&a, &generate_face(2 * seed + 1, r), 0.5, "m").unwrap();
        let x = Tensor::stack(&[image_to_tensor(&a.image), image_to_tensor(&b.image)]).unwrap();
        let objective = LossObjective::new(&m, x, vec![0, 1], Mode::Train, seed).unwrap();
        let report = gradient_check(&objective, 1e-5).unwrap();
        if report.max_relative_error >= 1e-4 {
            failing.push(seed);
        }
        worst = worst.max(report.max_relative_error);
        smooth = smooth.max(report.smooth_max_relative_error);
        kinks += report.kinks;
        checked += report.checked;
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "max rel err {worst:.3e} over {checked} elements ({} of 20 seeds >= 1e-4); \
             {kinks} differences straddle a ReLU kink, max {smooth:.3e} without them; {:.1}s",
            failing.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// 2. Mean CAM plus the class bias reproduces the class score.
fn cam_identity() -> Verdict {
    let m = default_model(1);
    let head = m.cam_head().unwrap();
    let weights = &m.params()[head.weight].1;
    let bias = &m.params()[head.bias].1;
    let mut rng = Lcg::new(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = random_image(&mut rng, m.resolution());
        let fwd = m.forward_eval(&x).unwrap();
        let logits = fwd.tape.value(fwd.logits()).data().to_vec();
        for class in 0..2 {
            let map = class_activation_map(fwd.activation(head.features), weights, class).unwrap();
            let z = map.values().len() as f64;
            let pooled = map.values().iter().sum::<f64>() / z + bias.data()[class];
            worst = worst.max((pooled - logits[class]).abs());
        }
    }
    verdict(worst <= 1e-9, format!("max |mean CAM + b - Y| = {worst:.3e} over 50 images x 2 classes"))
}

/// 3. Pre-ReLU Grad-CAM at the last block equals CAM / Z.
fn gradcam_cam_proportionality() -> Verdict {
    let m = default_model(3);
    let head = m.cam_head().unwrap();
    let weights = &m.params()[head.weight].1;
    let mut rng = Lcg::new(4);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let x = random_image(&mut rng, m.resolution());
        let class = i % 2;
        let fwd = m.forward_eval(&x).unwrap();
        let cam = class_activation_map(fwd.activation(head.features), weights, class).unwrap();
        let g = gradcam(&m, &x, class, None).unwrap();
        let z = cam.values().len() as f64;
        for (l, c) in g.linear.iter().zip(cam.values()) {
            worst = worst.max((l - c / z).abs());
        }
    }
    verdict(worst <= 1e-9, format!("max |Grad-CAM - CAM/Z| = {worst:.3e} over 50 images"))
}

/// Signs of every ReLU output, which fix the linear piece of the network.
fn relu_pattern(m: &CnnModel, x: &Tensor) -> Vec<bool> {
    let fwd = m.forward_eval(x).unwrap();
    m.layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Layer::Relu))
        .flat_map(|(i, _)| fwd.activation(i + 1).data().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// 4. Saliency against central differences of the class score.
fn saliency_fd() -> Verdict {
    let eps = 1e-4;
    let m = default_model(5);
    let r = m.resolution();
    let plane = r * r;
    let mut rng = Lcg::new(6);
    let (mut worst, mut smooth, mut kinks) = (0.0f64, 0.0f64, 0);
    for i in 0..10u64 {
        let x = image_to_tensor(&generate_face(300 + i, r).image);
        let class = (i % 2) as usize;
        let s = saliency_map(&m, &x, class).unwrap();
        let score = |t: &Tensor| m.forward_from(0, t).unwrap().data()[class];
        for _ in 0..20 {
            let p = rng.below(plane);
            let mut kinked = false;
            let numeric = (0..3)
                .map(|c| {
                    let (mut plus, mut minus) = (x.clone(), x.clone());
                    plus.data_mut()[c * plane + p] += eps;
                    minus.data_mut()[c * plane + p] -= eps;
                    kinked |= relu_pattern(&m, &plus) != relu_pattern(&m, &minus);
                    ((score(&plus) - score(&minus)) / (2.0 * eps)).abs()
                })
                .fold(0.0, f64::max);
            let err = rel(s.values()[p], numeric);
            worst = worst.max(err);
            if kinked {
                kinks += 1;
            } else {
                smooth = smooth.max(err);
            }
        }
    }
    verdict(
        worst <= 1e-3,
        format!(
            "max rel err {worst:.3e} over 10 images x 20 pixels at eps 1e-4; \
             {kinks} differences straddle a ReLU kink, max {smooth:.3e} without them"
        ),
    )
}

/// Counts over 10^4 attacks and 10^4 bona fides that give the two rates.
fn counts_for(apcer: f64, bpcer: f64) -> ConfusionCounts {
    let n = 10_000u64;
    let fn_ = (apcer * n as f64).round() as u64;
    let fp = (bpcer * n as f64).round() as u64;
    ConfusionCounts { tp: n - fn_, fn_, fp, tn: n - fp }
}

/// 5. Published (APCER, BPCER) pairs give the published HTER.
fn table_arithmetic() -> Verdict {
    let rows = [(0.0, 0.2419, 0.1209), (0.6842, 0.0, 0.3421), (0.0098, 0.0, 0.0049)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (apcer, bpcer, published) in rows {
        let report = compute_metrics(&counts_for(apcer, bpcer));
        let hter = report.hter.unwrap();
        // Four decimals: the published figure may be truncated, not rounded.
        let ok = (hter - published).abs() < 1e-4 && report.apcer == Some(apcer) && report.bpcer == Some(bpcer);
        pass &= ok;
        parts.push(format!("({apcer}, {bpcer}) -> {hter:.5} vs {published}"));
    }
    verdict(pass, parts.join("; "))
}

/// 6. Identities between metrics; undefined rates are None, never 0.
fn metric_identities() -> Verdict {
    let mut rng = Lcg::new(7);
    let (mut bad, mut undefined) = (0, 0);
    for i in 0..1000 {
        // Small counts make empty classes and empty predictions common.
        let hi = if i % 2 == 0 { 4 } else { 1000 };
        let mut draw = || rng.below(hi) as u64;
        let c = ConfusionCounts { tp: draw(), tn: draw(), fp: draw(), fn_: draw() };
        let m = compute_metrics(&c);
        let flags = [
            (m.recall.is_none(), c.tp + c.fn_ == 0),
            (m.apcer.is_none(), c.tp + c.fn_ == 0),
            (m.bpcer.is_none(), c.tn + c.fp == 0),
            (m.precision.is_none(), c.tp + c.fp == 0),
            (m.hter.is_none(), c.tp + c.fn_ == 0 || c.tn + c.fp == 0),
            (m.accuracy.is_none(), c.total() == 0),
        ];
        let zero_rate = [m.recall, m.apcer, m.bpcer, m.precision].iter().flatten().any(|v| !v.is_finite());
        if !identity_check(&m) || flags.iter().any(|(got, want)| got != want) || zero_rate {
            bad += 1;
        }
        undefined += usize::from(flags.iter().any(|f| f.1));
    }
    verdict(bad == 0, format!("{bad} of 1000 random counts violate an identity; {undefined} had an undefined rate"))
}

fn morphlens(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_morphlens"))
        .args(args)
        .current_dir(dir)
        .env_remove("MORPHLENS_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn value_of(text: &str, key: &str) -> Option<f64> {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

/// 7. Default gen-data, train and eval on the synthetic corpus.
fn end_to_end() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = || -> Result<(f64, f64), String> {
        morphlens(dir.path(), &["gen-data"])?;
        let trained = morphlens(dir.path(), &["train"])?;
        let evaluated = morphlens(dir.path(), &["eval"])?;
        let acc = value_of(&trained, "train_accuracy").ok_or("no train_accuracy")?;
        let hter = value_of(&evaluated, "hter").ok_or("no hter")?;
        Ok((acc, hter))
    };
    match run() {
        Ok((acc, hter)) => {
            let elapsed = start.elapsed();
            verdict(
                acc >= 0.95 && hter <= 0.15 && elapsed < Duration::from_secs(600),
                format!("train accuracy {acc:.4}, test HTER {hter:.4}, {:.1}s", elapsed.as_secs_f64()),
            )
        }
        Err(e) => verdict(false, e),
    }
}

fn normalized(values: Vec<f64>, h: usize, w: usize, method: Method) -> Heatmap {
    Heatmap::new(h, w, values, method, 0).unwrap().normalized()
}

/// 8. Convexity, degenerate weights, fixed point and feature layout.
fn ensemble_properties() -> Verdict {
    let mut rng = Lcg::new(8);
    let mut bad = Vec::new();
    for t in 0..100 {
        let (h, w) = (1 + rng.below(12), 1 + rng.below(12));
        let mut map = |m| normalized((0..h * w).map(|_| rng.next_f64()).collect(), h, w, m);
        let (s, c, g) = (map(Method::Saliency), map(Method::Cam), map(Method::GradCam));
        let raw = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
        let sum: f64 = raw.iter().sum();
        let weights = raw.map(|v| v / sum);
        let res = ensemble(&s, &c, &g, weights).unwrap();
        let convex = (0..h * w).all(|i| {
            let parts = [s.values()[i], c.values()[i], g.values()[i]];
            let (lo, hi) = parts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let v = res.blended[i];
            lo - 1e-12 <= v && v <= hi + 1e-12
        });
        let degenerate = [(0, &s), (1, &c), (2, &g)].iter().all(|(k, m)| {
            let mut one = [0.0; 3];
            one[*k] = 1.0;
            ensemble(&s, &c, &g, one).unwrap().blended == m.values()
        });
        let fixed = ensemble(&s, &s.clone(), &s.clone(), weights)
            .unwrap()
            .blended
            .iter()
            .zip(s.values())
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        let n = h * w;
        let fv = &res.feature_vector;
        let layout = fv.len() == 3 * n
            && fv[..n] == *g.values()
            && fv[n..2 * n] == *c.values()
            && fv[2 * n..] == *s.values();
        if !(convex && degenerate && fixed && layout) {
            bad.push(t);
        }
    }
    verdict(bad.is_empty(), format!("{} of 100 random triples violate a property {bad:?}", bad.len()))
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// 9. Every command twice with the default seed, byte for byte.
fn determinism() -> Verdict {
    let pipeline = |dir: &Path| -> Result<(), String> {
        morphlens(dir, &["gen-data"])?;
        morphlens(dir, &["train"])?;
        morphlens(dir, &["eval"])?;
        morphlens(dir, &["explain", "--image", "corpus/morph/0007.ppm"])?;
        morphlens(dir, &["dump-layer", "--image", "corpus/bonafide/0003.ppm", "--layer", "2"])?;
        Ok(())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = pipeline(a.path()).and_then(|_| pipeline(b.path())) {
        return verdict(false, e);
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.iter().filter(|(k, v)| sb.get(*k) != Some(v)).map(|(k, _)| k).collect();
    let same_set = sa.keys().eq(sb.keys());
    verdict(
        same_set && differing.is_empty(),
        format!("{} files compared, {} differ {differing:?}", sa.len(), differing.len()),
    )
}

/// 10. Planner identity at phi = 0 and the constraint band.
fn scaling_planner() -> Verdict {
    let base = ScalingConfig::default();
    let plan = plan_scaling(&base).unwrap();
    let identity = (plan.depth(), plan.width(0), plan.resolution()) == (base.base_depth, base.base_width, base.base_resolution)
        && (plan.depth_mult, plan.width_mult, plan.resolution_mult) == (1.0, 1.0, 1.0);
    let with = |alpha, beta, gamma| plan_scaling(&ScalingConfig { phi: 1.0, alpha, beta, gamma, ..base.clone() });
    let accepted = with(1.2, 1.1, 1.15);
    let product = accepted.as_ref().map(|p| p.constraint_value()).unwrap_or(f64::NAN);
    let band = with(1.0, 1.2, 1.18).is_ok()
        && with(1.0, 1.2, 1.05).is_err()
        && with(1.3, 1.3, 1.3).is_err()
        && with(1.0, 1.0, 1.0).is_err();
    let pass = identity && accepted.is_ok() && band && (product - 1.92032).abs() < 1e-4;
    verdict(
        pass,
        format!("phi=0 identity {identity}; (1.2, 1.1, 1.15) accepted with product {product:.5} (stated 1.92032); band {band}"),
    )
}

fn random_finite(rng: &mut Lcg) -> f64 {
    loop {
        let v = f64::from_bits(rng.next_u64());
        if v.is_finite() {
            return v;
        }
    }
}

/// 11. decode(encode(x)) == x on 100 random instances per format.
fn round_trips() -> Verdict {
    let mut rng = Lcg::new(11);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let (h, w) = (1 + rng.below(20), 1 + rng.below(20));
        let rgb = RgbImage::new(h, w, (0..3 * h * w).map(|_| rng.below(256) as u8).collect()).unwrap();
        if decode_ppm(&encode_ppm(&rgb)).ok() != Some(rgb) {
            failures.push("ppm");
        }
        let gray = GrayImage::new(h, w, (0..h * w).map(|_| rng.below(256) as u8).collect()).unwrap();
        if decode_pgm(&encode_pgm(&gray)).ok() != Some(gray) {
            failures.push("pgm");
        }

        let method = ["saliency", "cam", "gradcam", "ensemble", ENSEMBLE_VECTOR][rng.below(5)];
        let n = if method == ENSEMBLE_VECTOR { 3 * h * w } else { h * w };
        let record = XhmRecord::new(h, w, method, (0..n).map(|_| random_finite(&mut rng)).collect()).unwrap();
        let back = decode_xhm(&encode_xhm(&record)).unwrap();
        let bits = |r: &XhmRecord| r.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if (back.height, back.width, &back.method) != (h, w, &record.method) || bits(&back) != bits(&record) {
            failures.push("xhm");
        }

        let tensors: Vec<(String, Tensor)> = (0..1 + rng.below(4))
            .map(|i| {
                let shape: Vec<usize> = (0..1 + rng.below(4)).map(|_| 1 + rng.below(4)).collect();
                let len = shape.iter().product();
                (format!("p{i}.w"), Tensor::new(shape, (0..len).map(|_| random_finite(&mut rng)).collect()).unwrap())
            })
            .collect();
        let bytes = encode_checkpoint(&tensors).unwrap();
        let decoded = decode_checkpoint(&bytes).unwrap();
        let same = decoded.len() == tensors.len()
            && decoded.iter().zip(&tensors).all(|((na, a), (nb, b))| {
                na == nb && a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            });
        if !same || encode_checkpoint(&decoded).unwrap() != bytes {
            failures.push("checkpoint");
        }

        let mut config = RunConfig::default();
        config.set("phi", &format!("{}", rng.below(3))).unwrap();
        config.set("learning_rate", &format!("{}", rng.uniform(1e-4, 1.0))).unwrap();
        config.set("seed", &format!("{}", rng.next_u64())).unwrap();
        config.set("split_ratio", &format!("{}", rng.uniform(0.1, 0.9))).unwrap();
        config.set("overlay_alpha", &format!("{}", rng.next_f64())).unwrap();
        config.set("ensemble_weights", &format!("{},{},{}", rng.next_f64(), rng.next_f64(), rng.next_f64())).unwrap();
        config.set("output_dir", &format!("out{}", rng.below(1000))).unwrap();
        let text = config.to_text();
        match RunConfig::parse(&text) {
            Ok(back) if back == config && back.to_text() == text => {}
            _ => failures.push("config"),
        }
    }
    failures.dedup();
    verdict(failures.is_empty(), format!("100 instances each of PPM, PGM, XHM1, checkpoint, config; failures {failures:?}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("gradient oracle", gradient_oracle),
        ("CAM identity", cam_identity),
        ("Grad-CAM / CAM proportionality", gradcam_cam_proportionality),
        ("saliency finite differences", saliency_fd),
        ("HTER arithmetic", table_arithmetic),
        ("metric identities", metric_identities),
        ("end-to-end desk-scale run", end_to_end),
        ("ensemble properties", ensemble_properties),
        ("determinism", determinism),
        ("scaling planner", scaling_planner),
        ("format round-trips", round_trips),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("[{}] {:>2}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
