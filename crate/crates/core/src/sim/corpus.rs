//! Clean-speech corpora: a directory-backed corpus and a built-in
//! generator of speech-like signals with per-speaker voice characteristics.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::signal::{rms, Waveform};

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub audio: Waveform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Speaker {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    speakers: Vec<Speaker>,
}

impl Corpus {
    pub fn new(speakers: Vec<Speaker>) -> Self {
        Self { speakers }
    }

    pub fn speakers(&self) -> &[Speaker] {
        &self.speakers
    }

    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|s| s.id == id)
    }

    /// Loads `root/<speaker>/<utterance>.wav`, sorted by name.
    pub fn load_dir(root: &Path) -> Result<Self> {
        let mut speakers = Vec::new();
        for dir in sorted_entries(root)? {
            if !dir.is_dir() {
                continue;
            }
            let id = dir.file_name().unwrap().to_string_lossy().into_owned();
            let mut utterances = Vec::new();
            for file in sorted_entries(&dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("wav") {
                    continue;
                }
                utterances.push(Utterance {
                    id: file.file_stem().unwrap().to_string_lossy().into_owned(),
                    audio: read_wav(&file)?,
                });
            }
            if !utterances.is_empty() {
                speakers.push(Speaker { id, utterances });
            }
        }
        if speakers.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no speaker directories with wav files under {}",
                root.display()
            )));
        }
        Ok(Self { speakers })
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

/// Picks an utterance of `speaker_id` other than `exclude_utterance_id`,
/// uniformly under `seed`.
pub fn pick_enrollment<'c>(
    corpus: &'c Corpus,
    speaker_id: &str,
    exclude_utterance_id: &str,
    seed: u64,
) -> Result<&'c Utterance> {
    let speaker = corpus
        .speaker(speaker_id)
        .ok_or_else(|| Error::NoEnrollment(speaker_id.to_string()))?;
    if speaker.utterances.len() < 2 {
        return Err(Error::NoEnrollment(speaker_id.to_string()));
    }
    let candidates: Vec<&Utterance> = speaker
        .utterances
        .iter()
        .filter(|u| u.id != exclude_utterance_id)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(candidates[rng.random_range(0..candidates.len())])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCorpusConfig {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub min_secs: f64,
    pub max_secs: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            speakers: 16,
            utterances_per_speaker: 4,
            min_secs: 2.0,
            max_secs: 4.0,
            sample_rate: crate::signal::SAMPLE_RATE,
            seed: 0,
        }
    }
}

/// Voice characteristics of a synthetic speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct VoiceProfile {
    pub f0_hz: f64,
    /// Multiplies every formant frequency (vocal-tract length).
    pub tract_scale: f64,
    /// Harmonic amplitude roll-off exponent.
    pub tilt: f64,
    /// Fixed extra resonance, independent of the vowel being spoken.
    pub timbre_hz: f64,
    pub syllable_secs: f64,
    pub breath: f64,
}

impl VoiceProfile {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            f0_hz: 85.0 * (260.0f64 / 85.0).powf(rng.random::<f64>()),
            tract_scale: rng.random_range(0.8..1.25),
            tilt: rng.random_range(0.7..1.7),
            timbre_hz: rng.random_range(1200.0..3400.0),
            syllable_secs: rng.random_range(0.14..0.26),
            breath: rng.random_range(0.02..0.08),
        }
    }
}

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
];
const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 150.0];

/// Synthesizes one utterance of `profile`: a harmonic glottal source with
/// a syllabic pitch contour, shaped by time-varying formant resonators.
pub fn synthesize_utterance(
    profile: &VoiceProfile,
    secs: f64,
    sample_rate: u32,
    seed: u64,
) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let len = ((secs * fs).round() as usize).max(1);

    // syllable plan: (start, end, formants, pitch factor); pauses have no voicing
    let mut plan: Vec<(usize, usize, Option<([f64; 3], f64)>)> = Vec::new();
    let mut t = 0usize;
    while t < len {
        let dur = (profile.syllable_secs * rng.random_range(0.6..1.4) * fs) as usize;
        let dur = dur.max(16);
        let voiced = rng.random::<f64>() > 0.2;
        let seg = if voiced {
            let v = VOWELS[rng.random_range(0..VOWELS.len())];
            let f = v.map(|x| x * profile.tract_scale * rng.random_range(0.95..1.05));
            Some((f, rng.random_range(0.92..1.1)))
        } else {
            None
        };
        plan.push((t, (t + dur).min(len), seg));
        t += dur;
    }

    let mut out = vec![0.0; len];
    let breath = Normal::new(0.0, 1.0).unwrap();
    let nyquist = fs / 2.0;
    let mut phase = 0.0f64;
    let mut state = [[0.0f64; 2]; 4];
    let mut formants = VOWELS[0].map(|x| x * profile.tract_scale);
    for &(start, end, seg) in &plan {
        let Some((target, pitch)) = seg else {
            for v in &mut out[start..end] {
                *v = profile.breath * 0.05 * breath.sample(&mut rng);
            }
            continue;
        };
        let n = (end - start).max(1) as f64;
        let from = formants;
        for i in start..end {
            let pos = (i - start) as f64 / n;
            let glide = (pos * 4.0).min(1.0);
            for (f, (&a, &b)) in formants.iter_mut().zip(from.iter().zip(&target)) {
                *f = a + (b - a) * glide;
            }
            let f0 = profile.f0_hz * pitch * (1.0 + 0.06 * (2.0 * PI * pos).sin());
            phase += 2.0 * PI * f0 / fs;
            if phase > 2.0 * PI * 1e6 {
                phase %= 2.0 * PI;
            }
            let harmonics = ((nyquist - 200.0) / f0).floor().max(1.0) as usize;
            let mut src = 0.0;
            for k in 1..=harmonics {
                src += (k as f64 * phase).sin() / (k as f64).powf(profile.tilt);
            }
            src += profile.breath * breath.sample(&mut rng);
            let env = (PI * pos).sin().powf(0.6);
            let mut y = src * env;
            // cascade of second-order resonators
            let bank = formants.iter().chain([&profile.timbre_hz]).zip(BANDWIDTHS.iter().chain([&120.0]));
            for (st, (&freq, &bw)) in state.iter_mut().zip(bank) {
                let r = (-PI * bw / fs).exp();
                let theta = 2.0 * PI * freq.min(nyquist * 0.95) / fs;
                let a1 = -2.0 * r * theta.cos();
                let a2 = r * r;
                // unit gain at DC
                let y_new = (1.0 + a1 + a2) * y - a1 * st[0] - a2 * st[1];
                st[1] = st[0];
                st[0] = y_new;
                y = y_new;
            }
            out[i] = y;
        }
        formants = target;
    }
    let level = rms(&out);
    let gain_db: f64 = rng.random_range(-3.0..3.0);
    let target_rms = 0.05 * 10f64.powf(gain_db / 20.0);
    if level > 0.0 {
        out.iter_mut().for_each(|v| *v *= target_rms / level);
    }
    Waveform::new(out, sample_rate).expect("synthesized samples are finite")
}

/// Builds a corpus of synthetic speakers, deterministic in `cfg.seed`.
pub fn synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let speakers = (0..cfg.speakers)
        .map(|s| {
            let profile = VoiceProfile::sample(&mut rng);
            let utterances = (0..cfg.utterances_per_speaker)
                .map(|u| {
                    let secs = if cfg.max_secs > cfg.min_secs {
                        rng.random_range(cfg.min_secs..cfg.max_secs)
                    } else {
                        cfg.min_secs
                    };
                    let seed = rng.random::<u64>();
                    Utterance {
                        id: format!("spk{s:03}_utt{u:02}"),
                        audio: synthesize_utterance(&profile, secs, cfg.sample_rate, seed),
                    }
                })
                .collect();
            Speaker {
                id: format!("spk{s:03}"),
                utterances,
            }
        })
        .collect();
    Corpus { speakers }
}

/// Stationary-ish background noise: pink-like coloured noise with slow
/// level fluctuations and a faint low-frequency hum.
pub fn synthetic_noise(len: usize, sample_rate: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = Normal::new(0.0, 1.0).unwrap();
    let fs = sample_rate as f64;
    let hum_hz = rng.random_range(50.0..120.0);
    let mod_hz = rng.random_range(0.2..1.5);
    let mut b = [0.0f64; 3];
    let out: Vec<f64> = (0..len.max(1))
        .map(|i| {
            let w = white.sample(&mut rng);
            // Paul Kellet's economy pink filter
            b[0] = 0.99765 * b[0] + w * 0.0990460;
            b[1] = 0.96300 * b[1] + w * 0.2965164;
            b[2] = 0.57000 * b[2] + w * 1.0526913;
            let pink = b[0] + b[1] + b[2] + w * 0.1848;
            let t = i as f64 / fs;
            let level = 1.0 + 0.3 * (2.0 * PI * mod_hz * t).sin();
            level * pink + 0.2 * (2.0 * PI * hum_hz * t).sin()
        })
        .collect();
    Waveform::new(out, sample_rate).expect("noise samples are finite")
}
