use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::data::{build_corpus, load_corpus, preprocess, resize_image, split, write_corpus};
use crate::error::{Error, Result};
use crate::explain::{explain_image, write_xhm, XhmRecord, ENSEMBLE_VECTOR};
use crate::model::{
    build_model, dump_layer_activations, evaluate, plan_scaling, read_plan_sidecar, sidecar_path, train,
    write_plan_sidecar, CnnModel, PlanSidecar, NUM_CLASSES,
};
use crate::viz::{colorize, read_ppm, superimpose, write_pgm, write_ppm};

/// File names written by `explain`, in output order.
pub const EXPLAIN_OUTPUTS: [&str; 9] = [
    "saliency.ppm",
    "cam.ppm",
    "gradcam.ppm",
    "ensemble.ppm",
    "saliency.xhm",
    "cam.xhm",
    "gradcam.xhm",
    "ensemble.xhm",
    "features.xhm",
];

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn report_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".report");
    PathBuf::from(name)
}

/// Rebuild a trained model from its checkpoint and plan sidecar.
pub fn load_model(checkpoint: &Path) -> Result<CnnModel> {
    let sidecar = read_plan_sidecar(checkpoint)?;
    let mut model = build_model(&sidecar.plan()?, sidecar.seed)?;
    let bytes = std::fs::read(checkpoint).map_err(|e| Error::io(checkpoint, e))?;
    model.load_checkpoint_bytes(&bytes)?;
    Ok(model)
}

pub fn cmd_gen_data(config: &RunConfig) -> Result<String> {
    let plan = plan_scaling(&config.scaling)?;
    let corpus = build_corpus(config.n_bonafide, config.n_morphed, config.training.seed, plan.resolution())?;
    let dir = config.corpus_path();
    create_dir(&dir)?;
    write_corpus(&dir, &corpus)?;
    Ok(format!(
        "wrote {} images ({} bona fide, {} morphed) at {r}x{r} to {}",
        corpus.len(),
        config.n_bonafide,
        config.n_morphed,
        dir.display(),
        r = plan.resolution()
    ))
}

pub fn cmd_train(config: &RunConfig) -> Result<String> {
    let plan = plan_scaling(&config.scaling)?;
    let corpus = load_corpus(&config.corpus_path())?;
    let data = split(&corpus, config.split_ratio, config.training.seed)?;
    let mut model = build_model(&plan, config.training.seed)?;
    let report = train(&mut model, &data.train, &config.training)?;

    let ckpt = config.checkpoint_path();
    create_parent(&ckpt)?;
    std::fs::write(&ckpt, model.checkpoint_bytes()?).map_err(|e| Error::io(&ckpt, e))?;
    write_plan_sidecar(&ckpt, &PlanSidecar::new(&plan, config.training.seed))?;
    let text = report.to_text();
    let rp = report_path(&ckpt);
    std::fs::write(&rp, &text).map_err(|e| Error::io(&rp, e))?;
    Ok(format!("{text}checkpoint={}\nplan={}", ckpt.display(), sidecar_path(&ckpt).display()))
}

pub fn cmd_eval(config: &RunConfig) -> Result<String> {
    let model = load_model(&config.checkpoint_path())?;
    let corpus = load_corpus(&config.corpus_path())?;
    let data = split(&corpus, config.split_ratio, config.training.seed)?;
    let report = evaluate(&model, &data.test)?;
    let text = report.to_text();
    let out = config.output_path();
    create_dir(&out)?;
    let path = out.join("metrics.txt");
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok(text.trim_end().to_string())
}

/// Overlays and raw maps for one image. `class` defaults to the predicted
/// class.
pub fn cmd_explain(config: &RunConfig, image_path: &Path, class: Option<usize>, layer: Option<usize>) -> Result<String> {
    let model = load_model(&config.checkpoint_path())?;
    let image = read_ppm(image_path)?;
    let r = model.resolution();
    let input = preprocess(&image, r)?;
    let class = match class {
        Some(c) if c >= NUM_CLASSES => return Err(Error::ClassOutOfRange { index: c, classes: NUM_CLASSES }),
        Some(c) => c,
        None => model.predict(&input)?.class,
    };
    let explanation = explain_image(&model, &input, class, config.ensemble_weights, layer)?;
    let base = resize_image(&image, r, r)?;

    let out = config.output_path();
    create_dir(&out)?;
    let maps = [explanation.saliency(), explanation.cam(), explanation.gradcam(), explanation.combined()];
    for map in maps {
        let overlay = superimpose(&base, &colorize(map)?, config.overlay_alpha)?;
        write_ppm(&out.join(format!("{}.ppm", map.method())), &overlay)?;
        write_xhm(&out.join(format!("{}.xhm", map.method())), &XhmRecord::from_map(map))?;
    }
    let features = XhmRecord::new(r, r, ENSEMBLE_VECTOR, explanation.ensemble.feature_vector.clone())?;
    write_xhm(&out.join("features.xhm"), &features)?;

    let mut msg = format!("class={class}\n");
    for name in EXPLAIN_OUTPUTS {
        writeln!(msg, "{}", out.join(name).display()).expect("writing to a String");
    }
    Ok(msg.trim_end().to_string())
}

pub fn cmd_dump_layer(config: &RunConfig, image_path: &Path, layer: usize) -> Result<String> {
    let model = load_model(&config.checkpoint_path())?;
    let input = preprocess(&read_ppm(image_path)?, model.resolution())?;
    let (act, grid) = dump_layer_activations(&model, &input, layer)?;
    let out = config.output_path();
    create_dir(&out)?;
    let path = out.join(format!("layer{layer}.pgm"));
    write_pgm(&path, &grid)?;
    Ok(format!("layer {layer} activation {:?} -> {}", act.shape(), path.display()))
}
