use itertools::Itertools;
use muse::losses::{eda_bce_loss, pairwise_loss, pit_loss, si_snr, stage1_loss};
use muse::signal::Waveform;
use muse::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signals(n: usize, len: usize, seed: u64) -> Vec<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap())
        .collect()
}

/// Each estimate is a noisy copy of some reference, so the best matching is informative.
fn noisy_mixups(refs: &[Waveform], seed: u64) -> Vec<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = refs.len();
    (0..n)
        .map(|_| {
            let src = &refs[rng.random_range(0..n)];
            let s: Vec<f64> = src.samples().iter().map(|v| v + rng.random_range(-0.8..0.8)).collect();
            Waveform::new(s, 8000).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn pit_beats_every_fixed_permutation(n in 1usize..=5, seed in any::<u64>()) {
        let refs = signals(n, 64, seed);
        let ests = noisy_mixups(&refs, seed ^ 7);
        let pit = pit_loss(&refs, &ests).unwrap();
        let m = pairwise_loss(&refs, &ests).unwrap();
        let mut sorted = pit.permutation.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        for perm in (0..n).permutations(n) {
            let mean = perm.iter().enumerate().map(|(i, &j)| m[[i, j]]).sum::<f64>() / n as f64;
            prop_assert!(pit.loss <= mean + 1e-12);
        }
    }

    #[test]
    fn pit_ignores_list_order(n in 2usize..=5, seed in any::<u64>()) {
        let refs = signals(n, 48, seed);
        let ests = noisy_mixups(&refs, seed ^ 3);
        let base = pit_loss(&refs, &ests).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let mut pr: Vec<usize> = (0..n).collect();
        let mut pe: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            pr.swap(i, rng.random_range(0..=i));
            pe.swap(i, rng.random_range(0..=i));
        }
        let refs_p: Vec<Waveform> = pr.iter().map(|&i| refs[i].clone()).collect();
        let ests_p: Vec<Waveform> = pe.iter().map(|&j| ests[j].clone()).collect();
        let moved = pit_loss(&refs_p, &ests_p).unwrap();
        prop_assert!((moved.loss - base.loss).abs() < 1e-9);
        // reference pr[i] goes to estimate pe[moved[i]], which is the same matching
        let m = pairwise_loss(&refs, &ests).unwrap();
        let recomposed: f64 = (0..n).map(|i| m[[pr[i], pe[moved.permutation[i]]]]).sum::<f64>() / n as f64;
        prop_assert!((recomposed - base.loss).abs() < 1e-9);
    }

    #[test]
    fn si_snr_is_scale_invariant(seed in any::<u64>(), a in 1e-3f64..1e3) {
        let v = signals(2, 128, seed);
        let scaled = Waveform::new(v[1].samples().iter().map(|x| x * a).collect(), 8000).unwrap();
        let d = si_snr(&v[0], &v[1]).unwrap() - si_snr(&v[0], &scaled).unwrap();
        prop_assert!(d.abs() < 1e-9);
    }
}

#[test]
fn counting_loss_values() {
    let ln2 = std::f64::consts::LN_2;
    assert!((eda_bce_loss(&[0.5, 0.5, 0.5], 2).unwrap() - ln2).abs() < 1e-12);
    let exact = -(0.9f64.ln() + 0.8f64.ln() + 0.7f64.ln()) / 3.0;
    assert!((eda_bce_loss(&[0.9, 0.8, 0.3], 2).unwrap() - exact).abs() < 1e-12);
    assert!(eda_bce_loss(&[1.0, 0.0], 1).unwrap() < 1e-6);
    assert!(eda_bce_loss(&[0.0, 1.0], 1).unwrap().is_finite());
    assert!(matches!(eda_bce_loss(&[0.5], 1), Err(Error::ShapeMismatch(_))));
}

#[test]
fn stage_one_total_is_the_sum() {
    let refs = signals(3, 80, 1);
    let ests = noisy_mixups(&refs, 2);
    let probs = [0.9, 0.7, 0.6, 0.2];
    let b = stage1_loss(&refs, &ests, &probs, 3, 1.0).unwrap();
    assert_eq!(b.total, b.pit + b.eda);
    assert_eq!(b.pit, pit_loss(&refs, &ests).unwrap().loss);
    assert_eq!(b.eda, eda_bce_loss(&probs, 3).unwrap());
    assert!(matches!(pit_loss(&refs, &ests[..2]), Err(Error::ShapeMismatch(_))));
    assert!(matches!(pit_loss(&[], &[]), Err(Error::NoOutputs)));
}
