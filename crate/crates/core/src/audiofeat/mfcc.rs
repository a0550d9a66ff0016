use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioFeatures, Waveform, VIDEO_FPS};
use crate::error::{invalid, Result};

pub const N_MFCC: usize = 40;
pub const FFT_SIZE: usize = 1024;
pub const N_MELS: usize = 64;
pub const MEL_FMIN: f64 = 0.0;
pub const MEL_FMAX: f64 = 8000.0;
pub const LOG_FLOOR: f64 = 1e-10;

/// Analysis hop in samples: one video frame.
pub fn hop_length(sample_rate: u32) -> usize {
    (sample_rate as f64 / VIDEO_FPS).round() as usize
}

/// Number of feature frames for a clip: `ceil(samples · fps / rate)`.
pub fn frame_count(samples: usize, sample_rate: u32) -> usize {
    let exact = samples as f64 * VIDEO_FPS / sample_rate as f64;
    // tolerate representation error just above an integer
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// MFCC extractor with cached window, filterbank, DCT basis and FFT plan.
pub struct MfccExtractor {
    sample_rate: u32,
    hop: usize,
    window: Vec<f64>,
    filterbank: Vec<Vec<(usize, f64)>>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(sample_rate: u32) -> Result<Self> {
        if sample_rate < 8000 {
            return Err(invalid!("sample rate {sample_rate} Hz is below 8000 Hz"));
        }
        let window = (0..FFT_SIZE)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / FFT_SIZE as f64).cos())
            .collect();
        let fmax = MEL_FMAX.min(sample_rate as f64 / 2.0);
        let n_bins = FFT_SIZE / 2 + 1;
        let (mlo, mhi) = (hz_to_mel(MEL_FMIN), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (N_MELS + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / FFT_SIZE as f64;
        let filterbank = (0..N_MELS)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        let dct = (0..N_MFCC)
            .map(|k| {
                let norm = if k == 0 {
                    (1.0 / N_MELS as f64).sqrt()
                } else {
                    (2.0 / N_MELS as f64).sqrt()
                };
                (0..N_MELS)
                    .map(|n| norm * (PI * k as f64 * (2 * n + 1) as f64 / (2 * N_MELS) as f64).cos())
                    .collect()
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        Ok(MfccExtractor {
            sample_rate,
            hop: hop_length(sample_rate),
            window,
            filterbank,
            dct,
            fft,
        })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Frame `t` is the `FFT_SIZE` window centred on sample `t · hop`, zero-padded
    /// past either end of the clip.
    pub fn compute(&self, w: &Waveform) -> Result<AudioFeatures> {
        if w.sample_rate() != self.sample_rate {
            return Err(invalid!(
                "extractor built for {} Hz, waveform is {} Hz",
                self.sample_rate,
                w.sample_rate()
            ));
        }
        let samples = w.samples();
        if samples.len() < FFT_SIZE {
            return Err(invalid!(
                "clip of {} samples is shorter than one {FFT_SIZE}-sample window",
                samples.len()
            ));
        }
        let frames = frame_count(samples.len(), self.sample_rate);
        let half = (FFT_SIZE / 2) as isize;
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; FFT_SIZE / 2 + 1];
        let mut logmel = vec![0.0; N_MELS];
        let mut data = Vec::with_capacity(frames * N_MFCC);
        for t in 0..frames {
            let start = (t * self.hop) as isize - half;
            for (n, slot) in buf.iter_mut().enumerate() {
                let idx = start + n as isize;
                let x = if idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize]
                } else {
                    0.0
                };
                *slot = Complex::new(x * self.window[n], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, p) in power.iter_mut().enumerate() {
                *p = buf[k].norm_sqr();
            }
            for (m, filt) in self.filterbank.iter().enumerate() {
                let e: f64 = filt.iter().map(|&(k, wt)| wt * power[k]).sum();
                logmel[m] = e.max(LOG_FLOOR).ln();
            }
            for basis in &self.dct {
                data.push(basis.iter().zip(&logmel).map(|(b, l)| b * l).sum());
            }
        }
        AudioFeatures::new(frames, data)
    }
}

/// Convenience wrapper building a one-off extractor.
pub fn compute_mfcc(w: &Waveform) -> Result<AudioFeatures> {
    MfccExtractor::new(w.sample_rate())?.compute(w)
}
