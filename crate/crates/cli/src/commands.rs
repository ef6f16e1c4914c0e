use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use muse::audio::{read_wav, write_wav};
use muse::eval::{plot, write_report, Task};
use muse::model::MuseModel;
use muse::sim::{generate_examples, load_manifest, manifest_base, write_dataset, LoadedExample};
use muse::training::{load_checkpoint, save_checkpoint, Trainer};
use serde_json::json;

use crate::config::RunConfig;
use crate::Common;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";

fn run_config(common: &Common) -> Result<RunConfig> {
    let base = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    base.resolve(common.seed, common.out.clone())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<MuseModel<f32>> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(ckpt.to_model()?)
}

fn load_examples(cfg: &RunConfig, manifest: &Path) -> Result<Vec<LoadedExample>> {
    let path = cfg.data_path(manifest);
    let m = load_manifest(&path)?;
    Ok(m.load_examples(&manifest_base(&path))?)
}

pub fn simulate(common: &Common) -> Result<()> {
    let cfg = run_config(common)?;
    if cfg.simulate.is_empty() {
        bail!("no [[simulate]] splits configured");
    }
    let corpus = cfg.corpus()?;
    for sim in &cfg.simulate {
        let examples = generate_examples(sim, &corpus)?;
        let dir = cfg.out.join(&sim.split);
        let manifest = write_dataset(&examples, &dir, &sim.split)?;
        println!("{}: {} examples in {}", sim.split, manifest.records.len(), dir.display());
    }
    cfg.persist(&cfg.out)
}

pub fn train(
    common: &Common,
    stage: Option<u8>,
    init: Option<PathBuf>,
    manifests: Vec<PathBuf>,
    max_steps: Option<usize>,
) -> Result<()> {
    let mut cfg = run_config(common)?;
    if let Some(s) = stage {
        cfg.train.stage = s;
    }
    if !manifests.is_empty() {
        cfg.train.manifests = manifests;
    }
    if max_steps.is_some() {
        cfg.train.max_steps = max_steps;
    }
    cfg.train.validate()?;
    if cfg.train.manifests.is_empty() {
        bail!("no training manifests given");
    }
    let model = match (&init, cfg.train.stage) {
        (Some(p), _) => load_model(p)?,
        (None, 1) => MuseModel::new(&cfg.model, cfg.train.seed)?,
        (None, _) => bail!("stage 2 needs a stage-1 checkpoint via --init"),
    };
    cfg.model = model.cfg().clone();
    let mut data = Vec::new();
    for m in &cfg.train.manifests {
        data.extend(load_examples(&cfg, m)?);
    }
    cfg.persist(&cfg.out)?;
    let log_path = cfg.out.join(TRAIN_LOG);
    let file = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut log = BufWriter::new(file);
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    trainer.run(&data, Some(&mut log), |_, _| std::ops::ControlFlow::Continue(()))?;
    log.flush().with_context(|| format!("writing {}", log_path.display()))?;
    let path = cfg.out.join(CHECKPOINT_FILE);
    save_checkpoint(&trainer.checkpoint(), &path)?;
    println!("stage {} finished after {} steps: {}", cfg.train.stage, trainer.step, path.display());
    Ok(())
}

pub fn separate(common: &Common, ckpt: &Path, oracle_n: Option<usize>, mixture: &Path) -> Result<()> {
    let cfg = run_config(common)?;
    let model = load_model(ckpt)?;
    let mix = read_wav(mixture)?;
    let out = model.separate(&mix, oracle_n)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut files = Vec::new();
    for (k, est) in out.estimates.iter().enumerate() {
        let name = format!("speaker{k}.wav");
        write_wav(&cfg.out.join(&name), est)?;
        files.push(name);
    }
    write_json(
        &cfg.out.join("separation.json"),
        &json!({ "n_est": out.n_est, "oracle_n": oracle_n, "probs": out.probs, "files": files }),
    )?;
    cfg.persist(&cfg.out)?;
    println!("{} speakers, existence probabilities {:?}", out.n_est, out.probs);
    Ok(())
}

pub fn extract(
    common: &Common,
    ckpt: &Path,
    oracle_n: Option<usize>,
    mixture: &Path,
    enrollment: &Path,
) -> Result<()> {
    let cfg = run_config(common)?;
    let model = load_model(ckpt)?;
    let mix = read_wav(mixture)?;
    let enroll = read_wav(enrollment)?;
    let out = model.extract(&mix, &enroll, oracle_n)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_wav(&cfg.out.join("target.wav"), &out.estimate)?;
    write_json(
        &cfg.out.join("extraction.json"),
        &json!({ "n_est": out.n_est, "probs": out.probs, "attention": out.attention }),
    )?;
    cfg.persist(&cfg.out)?;
    println!("{} speakers, mean attention {:?}", out.n_est, out.attention);
    Ok(())
}

pub fn evaluate(
    common: &Common,
    ckpt: &Path,
    manifest: Option<PathBuf>,
    task: Option<Task>,
    oracle_n: bool,
) -> Result<()> {
    let mut cfg = run_config(common)?;
    if let Some(m) = manifest {
        cfg.eval.manifest = Some(m);
    }
    if let Some(t) = task {
        cfg.eval.task = t;
    }
    cfg.eval.oracle_n |= oracle_n;
    let Some(manifest) = cfg.eval.manifest.clone() else {
        bail!("no evaluation manifest given");
    };
    let model = load_model(ckpt)?;
    let data = load_examples(&cfg, &manifest)?;
    let report = muse::eval::evaluate(&model, &data, &cfg.eval.options())?;
    write_report(&report, &cfg.out)?;
    for (name, svg) in [
        ("confusion.svg", plot::confusion_svg(&report)),
        ("metrics.svg", plot::metrics_svg(&report)),
    ] {
        let p = cfg.out.join(name);
        fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?;
    }
    cfg.persist(&cfg.out)?;
    for a in &report.aggregates {
        println!(
            "{} N={} examples={} SI-SNRi={:.2} dB SDRi={:.2} dB counting={}",
            a.task,
            a.n,
            a.examples,
            a.si_snri,
            a.sdri,
            a.counting_accuracy.map_or("-".into(), |v| format!("{:.1}%", 100.0 * v))
        );
    }
    Ok(())
}
