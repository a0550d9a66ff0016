//! Waveforms, video-aligned MFCC features, augmentation, and the WAV /
//! feature-cache file formats.

mod augment;
mod mfcc;

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub use augment::{augment, draw as draw_augment, AugmentDraw, AugmentSpec, Interval};
pub use mfcc::{compute_mfcc, frame_count, hop_length, MfccExtractor, FFT_SIZE, LOG_FLOOR, N_MELS, N_MFCC};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16000;
pub const VIDEO_FPS: f64 = 30.0;
/// Largest feature/video length mismatch `align_frames` repairs.
pub const MAX_ALIGN_SLACK: usize = 2;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid!("waveform is empty"));
        }
        if sample_rate == 0 {
            return Err(invalid!("sample rate must be positive"));
        }
        if let Some(bad) = samples.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(invalid!("sample {bad} outside [-1, 1]"));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Band-limited resampling with a Hann-windowed sinc kernel.
    pub fn resample(&self, target_rate: u32) -> Result<Waveform> {
        if target_rate == 0 {
            return Err(invalid!("target sample rate must be positive"));
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        const HALF_TAPS: isize = 16;
        let ratio = target_rate as f64 / self.sample_rate as f64;
        let cutoff = ratio.min(1.0);
        let n_out = ((self.samples.len() as f64) * ratio).round().max(1.0) as usize;
        let x = &self.samples;
        let out = (0..n_out)
            .map(|j| {
                let pos = j as f64 / ratio;
                let centre = pos.floor() as isize;
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for k in (centre - HALF_TAPS + 1)..=(centre + HALF_TAPS) {
                    let d = pos - k as f64;
                    let arg = std::f64::consts::PI * d * cutoff;
                    let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
                    let win = 0.5 + 0.5 * (std::f64::consts::PI * d / HALF_TAPS as f64).cos();
                    let w = cutoff * sinc * win;
                    wsum += w;
                    if k >= 0 && (k as usize) < x.len() {
                        acc += w * x[k as usize];
                    }
                }
                let v = if wsum.abs() > 1e-12 { acc / wsum } else { 0.0 };
                v.clamp(-1.0, 1.0)
            })
            .collect();
        Waveform::new(out, target_rate)
    }
}

/// Per-frame MFCCs, `frames × 40`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFeatures {
    frames: usize,
    data: Vec<f64>,
}

impl AudioFeatures {
    pub fn new(frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * N_MFCC {
            return Err(invalid!(
                "feature data of length {} is not {frames} × {N_MFCC}",
                data.len()
            ));
        }
        Ok(AudioFeatures { frames, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        VIDEO_FPS
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * N_MFCC..(t + 1) * N_MFCC]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> AudioFeatures {
        AudioFeatures {
            frames: end - start,
            data: self.data[start * N_MFCC..end * N_MFCC].to_vec(),
        }
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * N_MFCC..(t + 1) * N_MFCC]
    }
}

/// Trims or edge-pads features to exactly `video_len` frames.
pub fn align_frames(f: &AudioFeatures, video_len: usize) -> Result<AudioFeatures> {
    let t = f.frames();
    if t.abs_diff(video_len) > MAX_ALIGN_SLACK || video_len == 0 {
        return Err(Error::MisalignedClip {
            features: t,
            video: video_len,
        });
    }
    let mut data = f.data[..t.min(video_len) * N_MFCC].to_vec();
    for _ in t..video_len {
        data.extend_from_slice(f.frame(t - 1));
    }
    AudioFeatures::new(video_len, data)
}

/// MFCCs of `w` trimmed or padded to `video_len` frames.
pub fn video_features(w: &Waveform, video_len: usize) -> Result<AudioFeatures> {
    align_frames(&compute_mfcc(w)?, video_len)
}

/// Reads mono 16-bit PCM or 32-bit float WAV; multichannel input is averaged.
/// Audio not at 16 kHz is resampled.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::Audio(format!(
                "{}: unsupported WAV format {fmt:?}/{bits} bit",
                path.display()
            )))
        }
    }
    .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64).clamp(-1.0, 1.0))
        .collect();
    Waveform::new(mono, spec.sample_rate)?.resample(DEFAULT_SAMPLE_RATE)
}

/// Writes mono 32-bit float WAV.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    for &s in w.samples() {
        writer
            .write_sample(s as f32)
            .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))
}

const CACHE_MAGIC: &[u8; 4] = b"MFCC";
const CACHE_VERSION: u32 = 1;

/// Feature cache layout (little endian): magic `MFCC`, version `u32`,
/// frame count `u32`, coefficient count `u32`, frame rate `f64`, then
/// `frames × coefficients` `f64` values row by row.
pub fn write_feature_cache(path: &Path, f: &AudioFeatures) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(CACHE_MAGIC)?;
    put(&CACHE_VERSION.to_le_bytes())?;
    put(&(f.frames as u32).to_le_bytes())?;
    put(&(N_MFCC as u32).to_le_bytes())?;
    put(&VIDEO_FPS.to_le_bytes())?;
    for v in &f.data {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_cache(path: &Path) -> Result<AudioFeatures> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 24 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::parse(path, "not a feature cache file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) != CACHE_VERSION {
        return Err(Error::parse(path, format!("unsupported version {}", u32_at(4))));
    }
    let frames = u32_at(8) as usize;
    let coeffs = u32_at(12) as usize;
    let rate = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if coeffs != N_MFCC || rate != VIDEO_FPS {
        return Err(Error::parse(path, format!("header {coeffs} coeffs @ {rate} fps")));
    }
    let body = &bytes[24..];
    if body.len() != frames * coeffs * 8 {
        return Err(Error::parse(path, "truncated feature data"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    AudioFeatures::new(frames, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(secs: f64, sr: u32) -> Waveform {
        let n = (secs * sr as f64).round() as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                0.3 * (2.0 * PI * 180.0 * t).sin() * (0.5 + 0.5 * (2.0 * PI * 3.0 * t).sin())
                    + 0.1 * (2.0 * PI * 900.0 * t).sin()
            })
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn one_second_gives_thirty_frames() {
        // independent hop arithmetic: centres at 0, 533, ..., last centre < 16000
        let hop = 16000.0 / 30.0;
        let by_hop = (0..).take_while(|t| (*t as f64) * hop < 16000.0).count();
        assert_eq!(by_hop, 30);
        let f = compute_mfcc(&tone(1.0, 16000)).unwrap();
        assert_eq!(f.frames(), 30);
        assert_eq!(f.frame(0).len(), 40);
        assert_eq!(hop_length(16000), 533);
    }

    #[test]
    fn frame_count_is_ceiling() {
        assert_eq!(frame_count(16000, 16000), 30);
        assert_eq!(frame_count(16001, 16000), 31);
        assert_eq!(frame_count(48000, 16000), 90);
        assert_eq!(frame_count(1024, 16000), 2);
    }

    #[test]
    fn silence_gives_constant_frames() {
        let w = Waveform::new(vec![0.0; 20000], 16000).unwrap();
        let f = compute_mfcc(&w).unwrap();
        let first = f.frame(0).to_vec();
        for t in 1..f.frames() {
            assert_eq!(f.frame(t), &first[..]);
        }
        // log floor through an orthonormal DCT: only c0 is non-zero
        assert!((first[0] - LOG_FLOOR.ln() * (N_MELS as f64).sqrt()).abs() < 1e-9);
        assert!(first[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn one_hop_shift_shifts_features() {
        let w = tone(1.5, 16000);
        let hop = hop_length(16000);
        let mut shifted = vec![0.0; hop];
        shifted.extend_from_slice(w.samples());
        let a = compute_mfcc(&w).unwrap();
        let b = compute_mfcc(&Waveform::new(shifted, 16000).unwrap()).unwrap();
        for t in 1..a.frames() - 1 {
            for (x, y) in a.frame(t).iter().zip(b.frame(t + 1)) {
                assert!((x - y).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn short_clip_and_low_rate_rejected() {
        assert!(compute_mfcc(&Waveform::new(vec![0.1; 1000], 16000).unwrap()).is_err());
        assert!(compute_mfcc(&Waveform::new(vec![0.1; 5000], 4000).unwrap()).is_err());
    }

    #[test]
    fn alignment_trims_and_pads() {
        let f = AudioFeatures::new(3, (0..120).map(|v| v as f64).collect()).unwrap();
        assert_eq!(align_frames(&f, 3).unwrap(), f);
        let shorter = align_frames(&f, 2).unwrap();
        assert_eq!(shorter.frames(), 2);
        assert_eq!(shorter.frame(1), f.frame(1));
        let longer = align_frames(&f, 4).unwrap();
        assert_eq!(longer.frame(3), f.frame(2));
        assert_eq!(longer.frame(2), f.frame(2));
        assert!(matches!(
            align_frames(&f, 6),
            Err(Error::MisalignedClip { features: 3, video: 6 })
        ));
    }

    #[test]
    fn wav_and_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = tone(0.5, 16000);
        let p = dir.path().join("a.wav");
        write_wav(&p, &w).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.samples().len(), w.samples().len());
        for (a, b) in back.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1e-6);
        }
        let f = compute_mfcc(&w).unwrap();
        let c = dir.path().join("a.mfcc");
        write_feature_cache(&c, &f).unwrap();
        assert_eq!(read_feature_cache(&c).unwrap(), f);
    }

    #[test]
    fn resampling_preserves_low_tone() {
        let w = Waveform::new(
            (0..44100)
                .map(|i| 0.5 * (2.0 * PI * 200.0 * i as f64 / 44100.0).sin())
                .collect(),
            44100,
        )
        .unwrap();
        let r = w.resample(16000).unwrap();
        assert_eq!(r.samples().len(), 16000);
        for i in (1000..15000).step_by(997) {
            let expect = 0.5 * (2.0 * PI * 200.0 * i as f64 / 16000.0).sin();
            assert!((r.samples()[i] - expect).abs() < 1e-2);
        }
    }
}
