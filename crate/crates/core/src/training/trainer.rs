use std::collections::BTreeMap;
use std::io::Write;
use std::ops::ControlFlow;

use muse_autodiff::Tensor;
use ndarray::IxDyn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{lr_at, Sampling, TrainConfig};
use super::optim::{clip_grad_norm, grad_norm, Adam};
use crate::error::{Error, Result};
use crate::losses::{bce_logits_graph, pit_graph, si_snr_graph};
use crate::model::{is_tse_param, CountMode, MuseModel};
use crate::nn::{ParamId, Session};
use crate::signal::Waveform;
use crate::sim::LoadedExample;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub n_speakers: usize,
    pub loss: f64,
    pub pit: Option<f64>,
    pub eda: Option<f64>,
    pub tse: Option<f64>,
    pub grad_norm: f64,
}

/// Seed offset for the freshly drawn extraction parameters of stage 2.
const TSE_INIT_SALT: u64 = 0x7e5e_0002;

pub struct Trainer {
    pub cfg: TrainConfig,
    pub model: MuseModel<f32>,
    opt: Adam<f32>,
    rng: ChaCha8Rng,
    pub step: usize,
    pub epoch: usize,
    queue: Vec<Vec<usize>>,
}

fn crop(w: &Waveform, offset: usize, len: usize) -> Vec<f32> {
    w.samples()[offset..offset + len].iter().map(|&v| v as f32).collect()
}

fn tensor(rows: Vec<Vec<f32>>) -> Tensor<f32> {
    let (n, l) = (rows.len(), rows[0].len());
    Tensor::from_shape_vec(IxDyn(&[n, l]), rows.concat()).unwrap()
}

impl Trainer {
    /// Stage 2 redraws the extraction parameters before training.
    pub fn new(mut model: MuseModel<f32>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.stage == 2 {
            model
                .muse
                .reinit_tse(&mut model.params, cfg.seed ^ TSE_INIT_SALT)?;
        }
        Ok(Self {
            opt: Adam::new(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            model,
            step: 0,
            epoch: 0,
            queue: Vec::new(),
        })
    }

    fn trainable(&self) -> fn(&str) -> bool {
        if self.cfg.stage == 2 {
            is_tse_param
        } else {
            |n| !is_tse_param(n)
        }
    }

    /// Batches of one epoch, each holding examples of a single speaker count.
    fn plan_epoch(&mut self, data: &[LoadedExample]) -> Vec<Vec<usize>> {
        let mut by_n: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, ex) in data.iter().enumerate() {
            by_n.entry(ex.n_speakers()).or_default().push(i);
        }
        let bs = self.cfg.batch_size;
        let mut pools: Vec<Vec<Vec<usize>>> = Vec::new();
        for idx in by_n.values_mut() {
            idx.shuffle(&mut self.rng);
            pools.push(idx.chunks(bs).map(<[usize]>::to_vec).collect());
        }
        match self.cfg.sampling {
            Sampling::Proportional => {
                let mut all: Vec<Vec<usize>> = pools.into_iter().flatten().collect();
                all.shuffle(&mut self.rng);
                all
            }
            Sampling::Uniform => {
                let total: usize = pools.iter().map(Vec::len).sum();
                (0..total)
                    .map(|_| {
                        let p = &pools[self.rng.random_range(0..pools.len())];
                        p[self.rng.random_range(0..p.len())].clone()
                    })
                    .collect()
            }
        }
    }

    fn check_data(&self, data: &[LoadedExample]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Config("no training examples".into()));
        }
        for (i, ex) in data.iter().enumerate() {
            let n = ex.n_speakers();
            if n == 0 || n > self.cfg.n_max.min(self.model.cfg().n_max) {
                return Err(Error::Config(format!("example {i} has {n} speakers")));
            }
            if self.cfg.stage == 2 && ex.enrollments.len() != n {
                return Err(Error::MissingEnrollment(i));
            }
        }
        Ok(())
    }

    /// One optimizer step on the next batch.
    pub fn train_step(&mut self, data: &[LoadedExample]) -> Result<StepReport> {
        self.check_data(data)?;
        if self.queue.is_empty() {
            if self.step > 0 {
                self.epoch += 1;
            }
            let mut plan = self.plan_epoch(data);
            plan.reverse();
            self.queue = plan;
        }
        let batch = self.queue.pop().unwrap();
        let lr = lr_at(self.step, self.epoch, &self.cfg);
        let mut summed: BTreeMap<ParamId, Tensor<f32>> = BTreeMap::new();
        let (mut loss, mut pit, mut eda, mut tse) = (0.0, 0.0, 0.0, 0.0);
        let n_speakers = data[batch[0]].n_speakers();
        for &i in &batch {
            let (l, parts, grads) = self.example_gradients(&data[i])?;
            loss += l;
            pit += parts.0;
            eda += parts.1;
            tse += parts.2;
            for (id, g) in grads {
                match summed.get_mut(&id) {
                    Some(acc) => *acc += &g,
                    None => {
                        summed.insert(id, g);
                    }
                }
            }
        }
        let b = batch.len() as f64;
        loss /= b;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss,
            });
        }
        let inv = 1.0 / b as f32;
        let mut grads: Vec<(ParamId, Tensor<f32>)> = summed
            .into_iter()
            .map(|(id, g)| (id, g.mapv(|v| v * inv)))
            .collect();
        let norm = match self.cfg.clip_norm {
            Some(c) => clip_grad_norm(&mut grads, c),
            None => grad_norm(&grads),
        };
        if !norm.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                loss: norm,
            });
        }
        self.opt.step(&mut self.model.params, &grads, lr);
        self.step += 1;
        let stage1 = self.cfg.stage == 1;
        Ok(StepReport {
            step: self.step,
            epoch: self.epoch,
            lr,
            n_speakers,
            loss,
            pit: stage1.then_some(pit / b),
            eda: stage1.then_some(eda / b),
            tse: (!stage1).then_some(tse / b),
            grad_norm: norm,
        })
    }

    #[allow(clippy::type_complexity)]
    fn example_gradients(
        &mut self,
        ex: &LoadedExample,
    ) -> Result<(f64, (f64, f64, f64), Vec<(ParamId, Tensor<f32>)>)> {
        let sr = self.model.cfg().sample_rate as f64;
        let seg = ((self.cfg.segment_seconds * sr).round() as usize).max(1);
        let len = ex.mixture.len().min(seg);
        let offset = if ex.mixture.len() > len {
            self.rng.random_range(0..=ex.mixture.len() - len)
        } else {
            0
        };
        let n = ex.n_speakers();
        let shuffle_seed: u64 = self.rng.random();
        let muse = &self.model.muse;
        let mut s = Session::train(&self.model.params, self.trainable());
        let x = s.input(Tensor::from_shape_vec(IxDyn(&[len]), crop(&ex.mixture, offset, len)).unwrap());
        if self.cfg.stage == 1 {
            let refs = tensor(ex.references.iter().map(|r| crop(r, offset, len)).collect());
            let out = muse.separate(&mut s, x, CountMode::Oracle(n), Some(shuffle_seed))?;
            let est = out.estimates.ok_or(Error::NoOutputs)?;
            let (pit, _) = pit_graph(&mut s.g, &refs, est)?;
            let bce = bce_logits_graph(&mut s.g, out.attractors.logits, n);
            let weighted = s.g.scale(bce, self.cfg.eda_weight as f32);
            let total = s.g.add(pit, weighted);
            let v = |s: &Session<'_, f32>, var| s.g.value(var).sum() as f64;
            let parts = (v(&s, pit), v(&s, bce), 0.0);
            let l = v(&s, total);
            Ok((l, parts, s.gradients(total)))
        } else {
            let target = self.rng.random_range(0..n);
            let enrollment = &ex.enrollments[target];
            let ulen = enrollment.len().min(seg);
            let uoff = if enrollment.len() > ulen {
                self.rng.random_range(0..=enrollment.len() - ulen)
            } else {
                0
            };
            let u = s.input(Tensor::from_shape_vec(IxDyn(&[ulen]), crop(enrollment, uoff, ulen)).unwrap());
            let refs = tensor(vec![crop(&ex.references[target], offset, len)]);
            let out = muse.extract(&mut s, x, u, CountMode::Oracle(n), Some(shuffle_seed))?;
            let si = si_snr_graph(&mut s.g, &refs, out.estimate)?;
            let m = s.g.mean_all(si);
            let total = s.g.neg(m);
            let l = s.g.value(total).sum() as f64;
            Ok((l, (0.0, 0.0, l), s.gradients(total)))
        }
    }

    /// Trains until the configured epochs or step budget are used up or
    /// `on_step` breaks, writing one JSON line per step to `log`.
    pub fn run<C>(
        &mut self,
        data: &[LoadedExample],
        mut log: Option<&mut dyn Write>,
        mut on_step: C,
    ) -> Result<()>
    where
        C: FnMut(&StepReport, &MuseModel<f32>) -> ControlFlow<()>,
    {
        loop {
            if let Some(m) = self.cfg.max_steps {
                if self.step >= m {
                    return Ok(());
                }
            }
            if self.epoch + 1 >= self.cfg.epochs && self.queue.is_empty() && self.step > 0 {
                return Ok(());
            }
            let report = self.train_step(data)?;
            if let Some(w) = log.as_deref_mut() {
                let line = serde_json::to_string(&report)?;
                writeln!(w, "{line}").map_err(|e| Error::io("training log", e))?;
            }
            if on_step(&report, &self.model).is_break() {
                return Ok(());
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::from_model(&self.model);
        c.train = Some(self.cfg.clone());
        c.step = self.step;
        c.epoch = self.epoch;
        c.rng_seed = self.rng.get_seed();
        c.rng_word_pos = self.rng.get_word_pos();
        c
    }
}

/// Trains everything except the extraction module.
pub fn train_stage1(
    cfg: TrainConfig,
    model: MuseModel<f32>,
    data: &[LoadedExample],
    log: Option<&mut dyn Write>,
) -> Result<Checkpoint> {
    if cfg.stage != 1 {
        return Err(Error::Config("train_stage1 needs stage = 1".into()));
    }
    let mut t = Trainer::new(model, cfg)?;
    t.run(data, log, |_, _| ControlFlow::Continue(()))?;
    Ok(t.checkpoint())
}

/// Trains a freshly initialized extraction module on a frozen stage-1 model.
pub fn train_stage2(
    cfg: TrainConfig,
    stage1: &Checkpoint,
    data: &[LoadedExample],
    log: Option<&mut dyn Write>,
) -> Result<Checkpoint> {
    if cfg.stage != 2 {
        return Err(Error::Config("train_stage2 needs stage = 2".into()));
    }
    let mut t = Trainer::new(stage1.to_model()?, cfg)?;
    t.run(data, log, |_, _| ControlFlow::Continue(()))?;
    Ok(t.checkpoint())
}
