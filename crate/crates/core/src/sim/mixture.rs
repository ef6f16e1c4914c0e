//! Noisy-reverberant mixture synthesis.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::corpus::{pick_enrollment, synthetic_noise, Corpus};
use super::rir::{simulate_rir, RoomSpec, RT60_MAX, RT60_MIN};
use crate::error::{Error, Result};
use crate::signal::{rms, snr_gain, Waveform};

/// Largest speaker count handled by the simulator and the model.
pub const MAX_SPEAKERS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum Acoustics {
    /// Sources are mixed unprocessed; references equal the dry sources.
    Anechoic,
    /// One room per source (typically one room, several source positions).
    Reverberant(Vec<RoomSpec>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerSource {
    pub speaker_id: String,
    pub utterance_id: String,
    pub dry: Waveform,
    /// A different recording of the same speaker, with its utterance id.
    pub enrollment: Option<(String, Waveform)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureMeta {
    pub rooms: Vec<RoomSpec>,
    pub noise_gain: f64,
    /// Index of the lowest-RMS reverberant source the SNR is set against.
    pub weakest_speaker: usize,
    pub source_rms: Vec<f64>,
    pub utterance_ids: Vec<String>,
    pub enrollment_ids: Vec<String>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureExample {
    pub mixture: Waveform,
    /// Dry sources convolved with the early part of their RIRs.
    pub references: Vec<Waveform>,
    /// Dry sources convolved with the full RIRs, as they enter the mix.
    pub reverberant: Vec<Waveform>,
    pub dry_sources: Vec<Waveform>,
    /// Noise exactly as added to the mixture (gain applied).
    pub noise: Waveform,
    pub enrollments: Vec<Waveform>,
    pub speaker_ids: Vec<String>,
    /// `None` for noiseless mixtures.
    pub snr_db: Option<f64>,
    pub meta: MixtureMeta,
}

impl MixtureExample {
    pub fn n_speakers(&self) -> usize {
        self.references.len()
    }
}

/// Mixes `sources` in the given acoustics and adds `noise` at
/// `target_snr_db` against the lowest-RMS reverberant source. Every signal
/// is truncated to the shortest source.
pub fn make_example(
    sources: &[SpeakerSource],
    noise: Option<&Waveform>,
    acoustics: &Acoustics,
    target_snr_db: f64,
    seed: u64,
) -> Result<MixtureExample> {
    let first = sources.first().ok_or(Error::EmptySources)?;
    if sources.len() > MAX_SPEAKERS {
        return Err(Error::InvalidArgument(format!(
            "{} sources exceed the maximum of {MAX_SPEAKERS}",
            sources.len()
        )));
    }
    let sr = first.dry.sample_rate();
    for s in sources {
        check_rate(sr, &s.dry)?;
        if let Some((_, e)) = &s.enrollment {
            check_rate(sr, e)?;
        }
    }
    if let Some(n) = noise {
        check_rate(sr, n)?;
        if !(0.0..=15.0).contains(&target_snr_db) {
            return Err(Error::InvalidArgument(format!(
                "target SNR {target_snr_db} dB outside [0, 15]"
            )));
        }
    }

    let len = sources.iter().map(|s| s.dry.len()).min().unwrap();
    let dry: Vec<Waveform> = sources.iter().map(|s| s.dry.truncated(len)).collect();
    let (reverberant, references, rooms) = match acoustics {
        Acoustics::Anechoic => (dry.clone(), dry.clone(), Vec::new()),
        Acoustics::Reverberant(rooms) => {
            if rooms.len() != sources.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} rooms for {} sources",
                    rooms.len(),
                    sources.len()
                )));
            }
            let mut rev = Vec::with_capacity(rooms.len());
            let mut refs = Vec::with_capacity(rooms.len());
            for (d, room) in dry.iter().zip(rooms) {
                let (full, early) = simulate_rir(room, sr)?;
                rev.push(Waveform::new(convolve(d.samples(), full.samples(), len), sr)?);
                refs.push(Waveform::new(convolve(d.samples(), early.samples(), len), sr)?);
            }
            (rev, refs, rooms.clone())
        }
    };

    let source_rms: Vec<f64> = reverberant.iter().map(|w| rms(w.samples())).collect();
    let weakest_speaker = source_rms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();

    let mut mixture = vec![0.0; len];
    for w in &reverberant {
        mixture.iter_mut().zip(w.samples()).for_each(|(m, s)| *m += s);
    }
    let (noise_wave, noise_gain, snr_db) = match noise {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cropped = loop_crop(n.samples(), len, &mut rng);
            let gain = snr_gain(source_rms[weakest_speaker], rms(&cropped), target_snr_db)?;
            let scaled: Vec<f64> = cropped.iter().map(|v| v * gain).collect();
            (scaled, gain, Some(target_snr_db))
        }
        None => (vec![0.0; len], 0.0, None),
    };
    mixture.iter_mut().zip(&noise_wave).for_each(|(m, v)| *m += v);

    let enrollments: Vec<Waveform> = sources
        .iter()
        .filter_map(|s| s.enrollment.as_ref().map(|(_, w)| w.clone()))
        .collect();
    if !enrollments.is_empty() && enrollments.len() != sources.len() {
        return Err(Error::InvalidArgument(
            "either every source or none carries an enrollment".into(),
        ));
    }
    Ok(MixtureExample {
        mixture: Waveform::new(mixture, sr)?,
        references,
        reverberant,
        dry_sources: dry,
        noise: Waveform::new(noise_wave, sr)?,
        enrollments,
        speaker_ids: sources.iter().map(|s| s.speaker_id.clone()).collect(),
        snr_db,
        meta: MixtureMeta {
            rooms,
            noise_gain,
            weakest_speaker,
            source_rms,
            utterance_ids: sources.iter().map(|s| s.utterance_id.clone()).collect(),
            enrollment_ids: sources
                .iter()
                .filter_map(|s| s.enrollment.as_ref().map(|(id, _)| id.clone()))
                .collect(),
            seed,
        },
    })
}

fn check_rate(expected: u32, w: &Waveform) -> Result<()> {
    if w.sample_rate() != expected {
        return Err(Error::SampleRateMismatch {
            expected,
            found: w.sample_rate(),
        });
    }
    Ok(())
}

/// A `len`-sample excerpt at a random offset, looping short inputs.
fn loop_crop(x: &[f64], len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let offset = if x.len() > len {
        rng.random_range(0..=x.len() - len)
    } else {
        0
    };
    (0..len).map(|i| x[(offset + i) % x.len()]).collect()
}

/// Linear convolution of `x` with `h`, truncated to the first `out_len` samples.
pub fn convolve(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    let full = x.len() + h.len() - 1;
    if (x.len() as u64) * (h.len() as u64) < 1 << 16 {
        let mut y = vec![0.0; out_len];
        for (n, yn) in y.iter_mut().enumerate() {
            let lo = n.saturating_sub(h.len() - 1);
            for k in lo..=n.min(x.len() - 1) {
                *yn += x[k] * h[n - k];
            }
        }
        return y;
    }
    let size = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&r| Complex::new(r, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(a, b)| *a *= b);
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    (0..out_len)
        .map(|i| if i < full { a[i].re * scale } else { 0.0 })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcousticsMode {
    Anechoic,
    Reverberant,
}

/// Recipe for a simulated split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub split: String,
    /// Speaker counts to simulate, each with `examples_per_count` mixtures.
    pub speaker_counts: Vec<usize>,
    pub examples_per_count: usize,
    /// Sources are cut to at most this many seconds before mixing.
    pub max_secs: Option<f64>,
    pub acoustics: AcousticsMode,
    pub noise: bool,
    pub snr_db: [f64; 2],
    pub rt60: [f64; 2],
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            split: "train".into(),
            speaker_counts: vec![1, 2, 3, 4, 5],
            examples_per_count: 4,
            max_secs: Some(4.0),
            acoustics: AcousticsMode::Reverberant,
            noise: true,
            snr_db: [0.0, 15.0],
            rt60: [RT60_MIN, RT60_MAX],
            seed: 0,
        }
    }
}

/// Per-example seed; distinct for distinct `(base, index)` pairs.
pub fn example_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates every example of `cfg` in memory; a pure function of
/// `(corpus, cfg)`.
pub fn generate_examples(cfg: &SimulationConfig, corpus: &Corpus) -> Result<Vec<MixtureExample>> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for &n in &cfg.speaker_counts {
        if n == 0 || n > MAX_SPEAKERS {
            return Err(Error::Config(format!("speaker count {n} outside 1..={MAX_SPEAKERS}")));
        }
        if n > corpus.speakers().len() {
            return Err(Error::Config(format!(
                "{n}-speaker mixtures need at least {n} speakers in the corpus"
            )));
        }
        for _ in 0..cfg.examples_per_count {
            out.push(simulate_one(cfg, corpus, n, example_seed(cfg.seed, index))?);
            index += 1;
        }
    }
    Ok(out)
}

fn simulate_one(
    cfg: &SimulationConfig,
    corpus: &Corpus,
    n: usize,
    seed: u64,
) -> Result<MixtureExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speakers = corpus.speakers();
    let picks = sample(&mut rng, speakers.len(), n).into_vec();
    let mut sources = Vec::with_capacity(n);
    for &si in &picks {
        let spk = &speakers[si];
        let utt = &spk.utterances[rng.random_range(0..spk.utterances.len())];
        let enrollment = pick_enrollment(corpus, &spk.id, &utt.id, rng.random())?;
        let dry = match cfg.max_secs {
            Some(s) => utt.audio.truncated((s * utt.audio.sample_rate() as f64).round() as usize),
            None => utt.audio.clone(),
        };
        sources.push(SpeakerSource {
            speaker_id: spk.id.clone(),
            utterance_id: utt.id.clone(),
            dry,
            enrollment: Some((enrollment.id.clone(), enrollment.audio.clone())),
        });
    }
    let acoustics = match cfg.acoustics {
        AcousticsMode::Anechoic => Acoustics::Anechoic,
        AcousticsMode::Reverberant => {
            let room = RoomSpec::sample(rng.random(), (cfg.rt60[0], cfg.rt60[1]));
            let rooms = (0..n)
                .map(|i| {
                    if i == 0 {
                        room.clone()
                    } else {
                        room.with_source_from(rng.random())
                    }
                })
                .collect();
            Acoustics::Reverberant(rooms)
        }
    };
    let len = sources.iter().map(|s| s.dry.len()).min().unwrap();
    let sr = sources[0].dry.sample_rate();
    let noise_seed: u64 = rng.random();
    let snr = if cfg.snr_db[1] > cfg.snr_db[0] {
        rng.random_range(cfg.snr_db[0]..cfg.snr_db[1])
    } else {
        cfg.snr_db[0]
    };
    let noise = cfg.noise.then(|| synthetic_noise(len + sr as usize, sr, noise_seed));
    make_example(&sources, noise.as_ref(), &acoustics, snr, seed)
}
