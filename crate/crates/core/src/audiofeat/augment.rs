//! Label-preserving waveform augmentation: loudness, 3-band EQ and
//! length-preserving pitch shift.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{invalid, Result};

pub const MAX_PITCH_SEMITONES: f64 = 4.0;
pub const MAX_GAIN_DB: f64 = 6.0;
pub const MAX_EQ_DB: f64 = 6.0;

const LOW_SHELF_HZ: f64 = 300.0;
const MID_PEAK_HZ: f64 = 1000.0;
const HIGH_SHELF_HZ: f64 = 3000.0;

/// Closed interval a parameter is drawn from. `lo == hi` pins the value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    pub fn fixed(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    fn check(&self, name: &str, limit: f64) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(invalid!("{name} range [{}, {}] is malformed", self.lo, self.hi));
        }
        if self.lo < -limit || self.hi > limit {
            return Err(invalid!(
                "{name} range [{}, {}] exceeds ±{limit}",
                self.lo,
                self.hi
            ));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub pitch_semitones: Interval,
    pub gain_db: Interval,
    /// Low shelf, mid peak and high shelf gains.
    pub eq_db: [Interval; 3],
}

impl Default for AugmentSpec {
    /// The widest allowed ranges.
    fn default() -> Self {
        AugmentSpec {
            pitch_semitones: Interval::symmetric(MAX_PITCH_SEMITONES),
            gain_db: Interval::symmetric(MAX_GAIN_DB),
            eq_db: [Interval::symmetric(MAX_EQ_DB); 3],
        }
    }
}

impl AugmentSpec {
    pub fn identity() -> Self {
        AugmentSpec {
            pitch_semitones: Interval::ZERO,
            gain_db: Interval::ZERO,
            eq_db: [Interval::ZERO; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pitch_semitones.check("pitch", MAX_PITCH_SEMITONES)?;
        self.gain_db.check("gain", MAX_GAIN_DB)?;
        for (band, iv) in ["eq low", "eq mid", "eq high"].iter().zip(&self.eq_db) {
            iv.check(band, MAX_EQ_DB)?;
        }
        Ok(())
    }
}

/// Concrete parameter draw for one augmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentDraw {
    pub pitch_semitones: f64,
    pub gain_db: f64,
    pub eq_db: [f64; 3],
}

pub fn draw(spec: &AugmentSpec, seed: u64) -> Result<AugmentDraw> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AugmentDraw {
        pitch_semitones: spec.pitch_semitones.draw(&mut rng),
        gain_db: spec.gain_db.draw(&mut rng),
        eq_db: [
            spec.eq_db[0].draw(&mut rng),
            spec.eq_db[1].draw(&mut rng),
            spec.eq_db[2].draw(&mut rng),
        ],
    })
}

/// Draws parameters from `spec` under `seed` and applies pitch shift, EQ and
/// gain, then clips to `[-1, 1]`. Output length equals input length.
pub fn augment(w: &Waveform, spec: &AugmentSpec, seed: u64) -> Result<Waveform> {
    let d = draw(spec, seed)?;
    let sr = w.sample_rate() as f64;
    let mut x = w.samples().to_vec();
    if d.pitch_semitones != 0.0 {
        x = pitch_shift(&x, d.pitch_semitones);
    }
    let bands = [
        (BiquadKind::LowShelf, LOW_SHELF_HZ),
        (BiquadKind::Peak, MID_PEAK_HZ),
        (BiquadKind::HighShelf, HIGH_SHELF_HZ),
    ];
    for ((kind, f0), &g) in bands.iter().zip(&d.eq_db) {
        if g != 0.0 && *f0 < sr / 2.0 {
            Biquad::new(*kind, f0 / sr, g).process(&mut x);
        }
    }
    if d.gain_db != 0.0 {
        let k = 10f64.powf(d.gain_db / 20.0);
        x.iter_mut().for_each(|v| *v *= k);
    }
    x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Waveform::new(x, w.sample_rate())
}

/// Length-preserving pitch shift: phase-vocoder time stretch by
/// `2^(semitones/12)` followed by resampling back to the input length.
fn pitch_shift(x: &[f64], semitones: f64) -> Vec<f64> {
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(x, ratio);
    let n = x.len();
    (0..n)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            let a = stretched.get(j).copied().unwrap_or(0.0);
            let b = stretched.get(j + 1).copied().unwrap_or(0.0);
            a + (b - a) * frac
        })
        .collect()
}

fn time_stretch(x: &[f64], ratio: f64) -> Vec<f64> {
    const N: usize = 1024;
    const SYN_HOP: usize = N / 4;
    let ana_hop = SYN_HOP as f64 / ratio;
    let out_len = (x.len() as f64 * ratio).ceil() as usize + N;
    let window: Vec<f64> = (0..N)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / N as f64).cos())
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(N);
    let inv = planner.plan_fft_inverse(N);
    let bins = N / 2 + 1;
    let mut prev_phase = vec![0.0; bins];
    let mut syn_phase = vec![0.0; bins];
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); N];
    let half = (N / 2) as isize;
    let frames = (out_len / SYN_HOP) + 1;
    let mut prev_pos: Option<isize> = None;
    for k in 0..frames {
        let pos = (k as f64 * ana_hop).round() as isize;
        if pos - half >= x.len() as isize {
            break;
        }
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = pos - half + i as isize;
            let v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
            *slot = Complex::new(v * window[i], 0.0);
        }
        fwd.process(&mut buf);
        for b in 0..bins {
            let phase = buf[b].arg();
            match prev_pos {
                None => syn_phase[b] = phase,
                Some(pp) => {
                    let da = (pos - pp) as f64;
                    let omega = 2.0 * PI * b as f64 / N as f64;
                    let mut dev = phase - prev_phase[b] - omega * da;
                    dev -= 2.0 * PI * (dev / (2.0 * PI)).round();
                    let freq = if da > 0.0 { omega + dev / da } else { omega };
                    syn_phase[b] += freq * SYN_HOP as f64;
                }
            }
            prev_phase[b] = phase;
        }
        prev_pos = Some(pos);
        for b in 0..bins {
            let mag = buf[b].norm();
            let c = Complex::from_polar(mag, syn_phase[b]);
            buf[b] = c;
            if b > 0 && b < N / 2 {
                buf[N - b] = c.conj();
            }
        }
        inv.process(&mut buf);
        let base = (k * SYN_HOP) as isize - half;
        for (i, w) in window.iter().enumerate() {
            let o = base + i as isize;
            if o >= 0 && (o as usize) < out_len {
                out[o as usize] += w * buf[i].re / N as f64;
                norm[o as usize] += w * w;
            }
        }
    }
    out.iter()
        .zip(&norm)
        .map(|(v, w)| if *w > 1e-6 { v / w } else { 0.0 })
        .collect()
}

#[derive(Clone, Copy, Debug)]
enum BiquadKind {
    LowShelf,
    Peak,
    HighShelf,
}

/// RBJ audio-EQ-cookbook biquad, direct form I.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn new(kind: BiquadKind, f_norm: f64, gain_db: f64) -> Self {
        let a_lin = 10f64.powf(gain_db / 40.0);
        let w0 = 2.0 * PI * f_norm;
        let (sw, cw) = w0.sin_cos();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let alpha = sw / (2.0 * q);
        let (b, a) = match kind {
            BiquadKind::Peak => (
                [1.0 + alpha * a_lin, -2.0 * cw, 1.0 - alpha * a_lin],
                [1.0 + alpha / a_lin, -2.0 * cw, 1.0 - alpha / a_lin],
            ),
            BiquadKind::LowShelf => {
                let sa = 2.0 * a_lin.sqrt() * alpha;
                (
                    [
                        a_lin * ((a_lin + 1.0) - (a_lin - 1.0) * cw + sa),
                        2.0 * a_lin * ((a_lin - 1.0) - (a_lin + 1.0) * cw),
                        a_lin * ((a_lin + 1.0) - (a_lin - 1.0) * cw - sa),
                    ],
                    [
                        (a_lin + 1.0) + (a_lin - 1.0) * cw + sa,
                        -2.0 * ((a_lin - 1.0) + (a_lin + 1.0) * cw),
                        (a_lin + 1.0) + (a_lin - 1.0) * cw - sa,
                    ],
                )
            }
            BiquadKind::HighShelf => {
                let sa = 2.0 * a_lin.sqrt() * alpha;
                (
                    [
                        a_lin * ((a_lin + 1.0) + (a_lin - 1.0) * cw + sa),
                        -2.0 * a_lin * ((a_lin - 1.0) + (a_lin + 1.0) * cw),
                        a_lin * ((a_lin + 1.0) + (a_lin - 1.0) * cw - sa),
                    ],
                    [
                        (a_lin + 1.0) - (a_lin - 1.0) * cw + sa,
                        2.0 * ((a_lin - 1.0) - (a_lin + 1.0) * cw),
                        (a_lin + 1.0) - (a_lin - 1.0) * cw - sa,
                    ],
                )
            }
        };
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    fn process(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, secs: f64) -> Waveform {
        let sr = 16000;
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    fn peak(w: &Waveform) -> f64 {
        w.samples().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn identity_spec_is_identity() {
        let w = sine(220.0, 0.3, 0.5);
        let out = augment(&w, &AugmentSpec::identity(), 42).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn gain_matches_decibel_formula() {
        let w = sine(250.0, 0.1, 0.5);
        let spec = AugmentSpec {
            gain_db: Interval::fixed(6.0),
            ..AugmentSpec::identity()
        };
        let out = augment(&w, &spec, 1).unwrap();
        let expect = peak(&w) * 10f64.powf(6.0 / 20.0);
        assert!((peak(&out) - expect).abs() < 1e-12);
        assert!((expect - 0.1 * 10f64.powf(0.3)).abs() < 1e-4);
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let w = sine(300.0, 0.5, 0.5);
        let spec = AugmentSpec::default();
        let a = augment(&w, &spec, 9).unwrap();
        let b = augment(&w, &spec, 9).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.samples().len(), w.samples().len());
        assert!(a.samples().iter().all(|v| v.abs() <= 1.0));
        let c = augment(&w, &spec, 10).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn out_of_range_specs_rejected() {
        let w = sine(300.0, 0.5, 0.2);
        let mut spec = AugmentSpec::identity();
        spec.gain_db = Interval::fixed(7.0);
        assert!(augment(&w, &spec, 0).is_err());
        let mut spec = AugmentSpec::identity();
        spec.pitch_semitones = Interval { lo: 1.0, hi: -1.0 };
        assert!(augment(&w, &spec, 0).is_err());
        let mut spec = AugmentSpec::identity();
        spec.eq_db[2] = Interval::symmetric(6.5);
        assert!(augment(&w, &spec, 0).is_err());
    }

    #[test]
    fn pitch_shift_moves_dominant_frequency() {
        let w = sine(400.0, 0.5, 1.0);
        let spec = AugmentSpec {
            pitch_semitones: Interval::fixed(4.0),
            ..AugmentSpec::identity()
        };
        let out = augment(&w, &spec, 0).unwrap();
        // count zero crossings in the steady middle section
        let zc = |s: &[f64]| s.windows(2).filter(|p| p[0] < 0.0 && p[1] >= 0.0).count() as f64;
        let mid = 4000..12000;
        let ratio = zc(&out.samples()[mid.clone()]) / zc(&w.samples()[mid]);
        assert!((ratio - 2f64.powf(4.0 / 12.0)).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn eq_low_shelf_boosts_bass_only() {
        let spec = AugmentSpec {
            eq_db: [Interval::fixed(6.0), Interval::ZERO, Interval::ZERO],
            ..AugmentSpec::identity()
        };
        let low = augment(&sine(60.0, 0.2, 1.0), &spec, 0).unwrap();
        let high = augment(&sine(6000.0, 0.2, 1.0), &spec, 0).unwrap();
        let tail = |w: &Waveform| peak(&Waveform::new(w.samples()[8000..].to_vec(), 16000).unwrap());
        assert!((tail(&low) / 0.2 - 10f64.powf(6.0 / 20.0)).abs() < 0.05);
        assert!((tail(&high) / 0.2 - 1.0).abs() < 0.02);
    }
}
