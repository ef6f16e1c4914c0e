//! Shoebox room impulse responses by the image-source method.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Length of the early part kept for the dereverberation target.
pub const EARLY_WINDOW_SECS: f64 = 0.050;
pub const RT60_MIN: f64 = 0.150;
pub const RT60_MAX: f64 = 0.650;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reverb {
    /// Direct path only, rounded to the nearest sample.
    Anechoic,
    Rt60 { seconds: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room size in metres.
    pub dimensions: [f64; 3],
    pub reverb: Reverb,
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub seed: u64,
}

impl RoomSpec {
    /// Draws a room, a microphone and one source position from `seed`.
    pub fn sample(seed: u64, rt60_range: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dimensions = [
            rng.random_range(4.0..8.0),
            rng.random_range(4.0..7.0),
            rng.random_range(2.5..3.5),
        ];
        let margin = 0.5;
        let point = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(margin..dimensions[0] - margin),
                rng.random_range(margin..dimensions[1] - margin),
                rng.random_range(1.0..2.0f64.min(dimensions[2] - margin)),
            ]
        };
        let mic = point(&mut rng);
        let mut source = point(&mut rng);
        while distance(&mic, &source) < 0.5 {
            source = point(&mut rng);
        }
        let (lo, hi) = rt60_range;
        let seconds = if hi > lo { rng.random_range(lo..hi) } else { lo };
        Self {
            dimensions,
            reverb: Reverb::Rt60 { seconds },
            source,
            mic,
            seed,
        }
    }

    /// Same room with another source position drawn from `seed`.
    pub fn with_source_from(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 0.5;
        let d = self.dimensions;
        let mut source;
        loop {
            source = [
                rng.random_range(margin..d[0] - margin),
                rng.random_range(margin..d[1] - margin),
                rng.random_range(1.0..2.0f64.min(d[2] - margin)),
            ];
            if distance(&self.mic, &source) >= 0.5 {
                break;
            }
        }
        Self {
            source,
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Geometry("room dimensions must be positive".into()));
        }
        for (name, p) in [("source", &self.source), ("microphone", &self.mic)] {
            let inside = p
                .iter()
                .zip(&self.dimensions)
                .all(|(&x, &d)| x > 0.0 && x < d);
            if !inside {
                return Err(Error::Geometry(format!("{name} {p:?} is outside the room")));
            }
        }
        if distance(&self.source, &self.mic) == 0.0 {
            return Err(Error::Geometry("source coincides with microphone".into()));
        }
        if let Reverb::Rt60 { seconds } = self.reverb {
            if !(RT60_MIN..=RT60_MAX).contains(&seconds) {
                return Err(Error::Geometry(format!(
                    "rt60 {seconds} s outside [{RT60_MIN}, {RT60_MAX}]"
                )));
            }
            if self.absorption(seconds) > 1.0 {
                return Err(Error::Geometry(format!(
                    "rt60 {seconds} s is not reachable in a {:?} m room",
                    self.dimensions
                )));
            }
        }
        Ok(())
    }

    /// Sabine absorption coefficient for a target reverberation time.
    fn absorption(&self, rt60: f64) -> f64 {
        let [x, y, z] = self.dimensions;
        let volume = x * y * z;
        let surface = 2.0 * (x * y + x * z + y * z);
        24.0 * 10f64.ln() * volume / (SPEED_OF_SOUND * surface * rt60)
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Returns `(full_rir, early_rir)`. The early response keeps the first
/// 50 ms from the direct-path peak (argmax of `|full_rir|`) and is zero
/// everywhere else.
pub fn simulate_rir(room: &RoomSpec, sample_rate: u32) -> Result<(Waveform, Waveform)> {
    room.validate()?;
    let fs = sample_rate as f64;
    let full = match room.reverb {
        Reverb::Anechoic => {
            let d = distance(&room.source, &room.mic);
            let delay = (d / SPEED_OF_SOUND * fs).round() as usize;
            let mut h = vec![0.0; delay + 1];
            h[delay] = 1.0 / (4.0 * PI * d);
            h
        }
        Reverb::Rt60 { seconds } => image_source(room, seconds, fs),
    };
    let early = early_part(&full, fs);
    Ok((
        Waveform::new(full, sample_rate)?,
        Waveform::new(early, sample_rate)?,
    ))
}

/// Index of the direct-path peak.
pub fn direct_peak(rir: &[f64]) -> usize {
    rir.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        })
        .0
}

pub fn early_window_samples(fs: f64) -> usize {
    (EARLY_WINDOW_SECS * fs).round() as usize
}

fn early_part(full: &[f64], fs: f64) -> Vec<f64> {
    let peak = direct_peak(full);
    let end = (peak + early_window_samples(fs)).min(full.len());
    let mut early = vec![0.0; full.len()];
    early[peak..end].copy_from_slice(&full[peak..end]);
    early
}

fn image_source(room: &RoomSpec, rt60: f64, fs: f64) -> Vec<f64> {
    let beta = (1.0 - room.absorption(rt60)).max(0.0).sqrt();
    let n_samples = (rt60 * fs).ceil() as usize;
    let mut h = vec![0.0; n_samples];
    // Hann-windowed sinc fractional delay, 8 ms wide
    let tw = 2.0 * (0.004 * fs).round();
    let half = tw / 2.0;
    let max_dist = n_samples as f64 / fs * SPEED_OF_SOUND;
    let [lx, ly, lz] = room.dimensions;
    let orders = |l: f64| (max_dist / (2.0 * l)).ceil() as i64 + 1;
    let (n1, n2, n3) = (orders(lx), orders(ly), orders(lz));
    let (s, r) = (room.source, room.mic);

    for mx in -n1..=n1 {
        for my in -n2..=n2 {
            for mz in -n3..=n3 {
                for q in 0..=1i64 {
                    for j in 0..=1i64 {
                        for k in 0..=1i64 {
                            let dx = (1 - 2 * q) as f64 * s[0] - r[0] + 2.0 * mx as f64 * lx;
                            let dy = (1 - 2 * j) as f64 * s[1] - r[1] + 2.0 * my as f64 * ly;
                            let dz = (1 - 2 * k) as f64 * s[2] - r[2] + 2.0 * mz as f64 * lz;
                            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                            let tau = dist / SPEED_OF_SOUND * fs;
                            if tau + half >= n_samples as f64 {
                                continue;
                            }
                            let reflections = (mx - q).abs()
                                + mx.abs()
                                + (my - j).abs()
                                + my.abs()
                                + (mz - k).abs()
                                + mz.abs();
                            let gain = beta.powi(reflections as i32) / (4.0 * PI * dist);
                            let start = (tau - half).ceil().max(0.0) as usize;
                            let end = ((tau + half).floor() as usize).min(n_samples - 1);
                            for (n, hn) in h.iter_mut().enumerate().take(end + 1).skip(start) {
                                let t = n as f64 - tau;
                                let window = 0.5 * (1.0 + (2.0 * PI * t / tw).cos());
                                *hn += gain * window * sinc(PI * t);
                            }
                        }
                    }
                }
            }
        }
    }
    h
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(reverb: Reverb) -> RoomSpec {
        RoomSpec {
            dimensions: [5.0, 4.0, 3.0],
            reverb,
            source: [1.5, 2.0, 1.5],
            mic: [3.0, 2.5, 1.4],
            seed: 7,
        }
    }

    #[test]
    fn early_support_within_window() {
        let (full, early) = simulate_rir(&room(Reverb::Rt60 { seconds: 0.15 }), 8000).unwrap();
        let peak = direct_peak(full.samples());
        let win = early_window_samples(8000.0);
        for (i, &v) in early.samples().iter().enumerate() {
            if i < peak || i >= peak + win {
                assert_eq!(v, 0.0);
            } else {
                assert_eq!(v, full.samples()[i]);
            }
        }
        assert!((win as f64) / 8000.0 <= 0.05 + 1e-12);
        // the tail carries energy beyond the early window
        assert!(full.samples()[peak + win..].iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn anechoic_full_equals_early() {
        let (full, early) = simulate_rir(&room(Reverb::Anechoic), 8000).unwrap();
        assert_eq!(full, early);
        assert_eq!(full.samples().iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn deterministic() {
        let r = RoomSpec::sample(42, (RT60_MIN, RT60_MAX));
        assert_eq!(r, RoomSpec::sample(42, (RT60_MIN, RT60_MAX)));
        let a = simulate_rir(&r, 8000).unwrap();
        let b = simulate_rir(&r, 8000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn source_outside_room_is_rejected() {
        let mut r = room(Reverb::Rt60 { seconds: 0.3 });
        r.source = [6.0, 1.0, 1.0];
        assert!(matches!(simulate_rir(&r, 8000), Err(Error::Geometry(_))));
        let mut r = room(Reverb::Rt60 { seconds: 0.9 });
        r.source = [1.0, 1.0, 1.0];
        assert!(simulate_rir(&r, 8000).is_err());
    }

    #[test]
    fn longer_rt60_has_more_late_energy() {
        let late = |rt| {
            let (full, early) = simulate_rir(&room(Reverb::Rt60 { seconds: rt }), 8000).unwrap();
            let e: f64 = full
                .samples()
                .iter()
                .zip(early.samples())
                .map(|(f, e)| (f - e).powi(2))
                .sum();
            e / full.samples().iter().map(|v| v * v).sum::<f64>()
        };
        assert!(late(0.6) > late(0.2));
    }
}
