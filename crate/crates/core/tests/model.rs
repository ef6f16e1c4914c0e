use muse::model::eda::{apply_attractors, shuffle_permutation, CountMode};
use muse::model::tse::{FilmBlock, Selection};
use muse::model::{ModelConfig, Muse, MuseModel};
use muse::nn::{Builder, ParamStore, Session};
use muse::signal::Waveform;
use muse::training::{Checkpoint, FORMAT_VERSION};
use muse::Error;
use muse_autodiff::Tensor;
use ndarray::{Axis, IxDyn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_shape_fn(IxDyn(shape), |_| rng.random_range(-1.0..1.0))
}

fn wave(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..len).map(|_| rng.random_range(-0.3..0.3)).collect(), 8000).unwrap()
}

fn tiny() -> (Muse, ParamStore<f64>) {
    Muse::build::<f64>(&ModelConfig::tiny(), 4).unwrap()
}

#[test]
fn shape_chain_for_every_count() {
    let (m, store) = tiny();
    let cfg = ModelConfig::tiny();
    let len = 999;
    let frames = cfg.frames(len).unwrap();
    for n in 1..=5 {
        let mut s = Session::inference(&store);
        let x = m.waveform_input(&mut s, &wave(len, n as u64)).unwrap();
        let front = m.front(&mut s, x).unwrap();
        assert_eq!(s.g.shape(front.enc), [frames, cfg.hidden]);
        let plan = front.plan;
        assert_eq!(plan.frames, frames);
        assert!(plan.pad_frames < cfg.chunk);
        assert_eq!((plan.chunks + 1) * cfg.chunk / 2, frames + plan.pad_frames);
        assert_eq!(s.g.shape(front.chunks), [1, plan.chunks, cfg.chunk, cfg.hidden]);

        let sep = m.separate(&mut s, x, CountMode::Oracle(n), None).unwrap();
        assert_eq!(sep.attractors.n_est, n);
        assert_eq!(sep.attractors.probs.len(), n + 1);
        assert_eq!(s.g.shape(sep.speakers.unwrap()), [n, plan.chunks, cfg.chunk, cfg.hidden]);
        let est = s.g.value(sep.estimates.unwrap());
        assert_eq!(est.shape(), [n, len]);
        assert!(est.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn forward_is_deterministic() {
    let model = MuseModel::<f32>::new(&ModelConfig::tiny(), 8).unwrap();
    let mix = wave(640, 1);
    let enroll = wave(500, 2);
    let a = model.separate(&mix, None).unwrap();
    let b = model.separate(&mix, None).unwrap();
    assert_eq!(a, b);
    let a = model.extract(&mix, &enroll, Some(3)).unwrap();
    let b = model.extract(&mix, &enroll, Some(3)).unwrap();
    assert_eq!(a, b);
    let other = MuseModel::<f32>::new(&ModelConfig::tiny(), 8).unwrap();
    assert_eq!(other.separate(&mix, Some(2)).unwrap(), model.separate(&mix, Some(2)).unwrap());
}

#[test]
fn shuffled_chunks_keep_oracle_outputs() {
    let (m, store) = tiny();
    let x = noise(&[1, 6, 4, 8], 3);
    for n in 1..=5 {
        for seed in [None, Some(1), Some(2)] {
            let mut s = Session::inference(&store);
            let xv = s.input(x.clone());
            let set = m.eda.forward(&mut s, xv, CountMode::Oracle(n), 5, seed).unwrap();
            assert_eq!(set.n_est, n);
            assert_eq!(s.g.shape(set.logits), [n + 1]);
        }
    }
    let p = shuffle_permutation(17, 9);
    let mut sorted = p.clone();
    sorted.sort();
    assert_eq!(sorted, (0..17).collect::<Vec<_>>());
    assert_eq!(p, shuffle_permutation(17, 9));
}

#[test]
fn inference_count_follows_threshold() {
    let cfg = ModelConfig::tiny();
    for seed in 0..12 {
        let (m, store) = Muse::build::<f64>(&cfg, seed).unwrap();
        let mut s = Session::inference(&store);
        let xv = s.input(noise(&[1, 5, 4, 8], seed + 100));
        let set = m.eda.forward(&mut s, xv, CountMode::Inference, cfg.n_max, None).unwrap();
        let first_low = set.probs.iter().position(|&p| p < 0.5).unwrap_or(cfg.n_max);
        assert_eq!(set.n_est, first_low.min(cfg.n_max));
        assert!(set.probs[..set.n_est].iter().all(|&p| p >= 0.5));
        assert!(set.probs.len() <= cfg.n_max);
    }
}

#[test]
fn attractors_apply_linearly() {
    let (_, store) = tiny();
    let mut s = Session::inference(&store);
    let x1 = noise(&[1, 3, 4, 8], 1);
    let x2 = noise(&[1, 3, 4, 8], 2);
    let atts: Vec<_> = (0..3).map(|i| s.input(noise(&[1, 8], 10 + i))).collect();
    let combo = &x1 * 0.7 + &x2 * -1.9;
    let v1 = s.input(x1);
    let v2 = s.input(x2);
    let vc = s.input(combo);
    let z1 = apply_attractors(&mut s, v1, &atts).unwrap();
    let z2 = apply_attractors(&mut s, v2, &atts).unwrap();
    let zc = apply_attractors(&mut s, vc, &atts).unwrap();
    let expect = s.g.value(z1) * 0.7 + s.g.value(z2) * -1.9;
    let got = s.g.value(zc);
    assert_eq!(got.shape(), [3, 3, 4, 8]);
    assert!(got.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(matches!(apply_attractors(&mut s, v1, &[]), Err(Error::NoOutputs)));
}

fn selection(seed: u64) -> (Selection, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sel = Selection::new(&mut Builder::new(&mut store, &mut rng), &ModelConfig::tiny());
    (sel, store)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn attention_is_an_order_free_convex_combination(
        n in 1usize..=5,
        c in 1usize..4,
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
    ) {
        let (sel, store) = selection(seed);
        let z = noise(&[n, c, 4, 8], seed ^ 1);
        let u = noise(&[1, 2, 4, 8], seed ^ 2);
        let mut s = Session::inference(&store);
        let zv = s.input(z.clone());
        let uv = s.input(u.clone());
        let out = sel.forward(&mut s, zv, uv).unwrap();
        let w = s.g.value(out.weights).clone();
        prop_assert_eq!(w.shape(), &[n, c, 4, 1]);
        prop_assert!(w.iter().all(|&a| (0.0..=1.0).contains(&a)));
        for total in w.sum_axis(Axis(0)).iter() {
            prop_assert!((total - 1.0).abs() < 1e-6);
        }
        let target = s.g.value(out.target).clone();

        // reversing the speaker list
        let perm: Vec<usize> = (0..n).rev().collect();
        let zp = s.input(z.select(Axis(0), &perm));
        let out_p = sel.forward(&mut s, zp, uv).unwrap();
        let tp = s.g.value(out_p.target);
        prop_assert!(tp.iter().zip(target.iter()).all(|(a, b)| (a - b).abs() < 1e-12));

        // louder or quieter enrollment
        let us = s.input(u * scale);
        let out_s = sel.forward(&mut s, zv, us).unwrap();
        for total in s.g.value(out_s.weights).sum_axis(Axis(0)).iter() {
            prop_assert!((total - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn single_speaker_selection_is_trivial() {
    let (sel, store) = selection(5);
    let z = noise(&[1, 3, 4, 8], 6);
    let mut s = Session::inference(&store);
    let zv = s.input(z.clone());
    let uv = s.input(noise(&[1, 1, 4, 8], 7));
    let out = sel.forward(&mut s, zv, uv).unwrap();
    assert!(s.g.value(out.weights).iter().all(|&w| w == 1.0));
    assert_eq!(s.g.value(out.target), &z);
    let empty = s.input(Tensor::zeros(IxDyn(&[0, 3, 4, 8])));
    assert!(matches!(sel.forward(&mut s, empty, uv), Err(Error::NoOutputs)));
}

#[test]
fn identity_film_block_passes_features_through() {
    let mut store = ParamStore::<f64>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let blk = FilmBlock::new(&mut Builder::new(&mut store, &mut rng), &ModelConfig::tiny());
    let x = noise(&[1, 3, 4, 8], 2);
    let run = |store: &ParamStore<f64>| {
        let mut s = Session::inference(store);
        let xv = s.input(x.clone());
        let uv = s.input(noise(&[1, 8], 3));
        let y = blk.forward(&mut s, xv, uv);
        s.g.value(y).clone()
    };
    assert_ne!(run(&store), x);
    blk.set_identity(&mut store);
    let y = run(&store);
    assert!(y.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn fresh_model_extracts_like_it_separates_one_speaker() {
    let model = MuseModel::<f32>::new(&ModelConfig::tiny(), 2).unwrap();
    let mix = wave(800, 4);
    let sep = model.separate(&mix, Some(1)).unwrap();
    let ext = model.extract(&mix, &wave(700, 5), Some(1)).unwrap();
    assert_eq!(ext.attention, vec![1.0]);
    let diff = sep.estimates[0]
        .samples()
        .iter()
        .zip(ext.estimate.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-5, "{diff}");
}

#[test]
fn tse_reinit_only_touches_tse_parameters() {
    let (m, store) = tiny();
    let mut fresh = store.clone();
    m.reinit_tse(&mut fresh, 99).unwrap();
    let mut changed = 0;
    for ((_, name, a), (_, _, b)) in store.iter().zip(fresh.iter()) {
        if muse::model::is_tse_param(name) {
            changed += usize::from(a != b);
        } else {
            assert_eq!(a, b, "{name}");
        }
    }
    assert!(changed > 0);
}

#[test]
fn checkpoint_round_trip_and_rejections() {
    let model = MuseModel::<f32>::new(&ModelConfig::tiny(), 12).unwrap();
    let mix = wave(900, 8);
    let bytes = Checkpoint::from_model(&model).to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap().to_model().unwrap();
    assert_eq!(back.separate(&mix, None).unwrap(), model.separate(&mix, None).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/model.ckpt");
    muse::training::save_checkpoint(&Checkpoint::from_model(&model), &path).unwrap();
    let loaded = muse::training::load_checkpoint(&path).unwrap().to_model().unwrap();
    assert_eq!(loaded.params, model.params);

    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        Checkpoint::from_bytes(&future),
        Err(Error::CheckpointVersion { found, expected }) if found == FORMAT_VERSION + 1 && expected == FORMAT_VERSION
    ));

    let mut flipped = bytes.clone();
    let last = flipped.len() - 40;
    flipped[last] ^= 0x10;
    assert!(matches!(Checkpoint::from_bytes(&flipped), Err(Error::CorruptCheckpoint(_))));
    assert!(matches!(
        Checkpoint::from_bytes(&bytes[..bytes.len() / 2]),
        Err(Error::CorruptCheckpoint(_))
    ));
    assert!(matches!(Checkpoint::from_bytes(b"nonsense"), Err(Error::CorruptCheckpoint(_))));
}

#[test]
fn rejects_foreign_sample_rates_and_short_inputs() {
    let model = MuseModel::<f32>::new(&ModelConfig::tiny(), 1).unwrap();
    let w = Waveform::new(vec![0.1; 400], 16000).unwrap();
    assert!(matches!(model.separate(&w, None), Err(Error::SampleRateMismatch { .. })));
    let short = Waveform::new(vec![0.1; 3], 8000).unwrap();
    assert!(model.separate(&short, None).is_err());
    assert!(model.separate(&wave(400, 1), Some(6)).is_err());
}
