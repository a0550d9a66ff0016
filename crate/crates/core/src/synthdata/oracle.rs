//! Deterministic stand-in for an image-based keypoint encoder: a frozen
//! two-layer random network from posed face landmarks to 20 bounded 3D
//! keypoints.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{contract, invalid, Result};
use crate::geometry::layout::FACE_DIM;
use crate::geometry::{LandmarkFrame, Point3, Space};

pub const NUM_KEYPOINTS: usize = 20;
pub const KEYPOINT_DIM: usize = NUM_KEYPOINTS * 3;
pub const ORACLE_HIDDEN: usize = 64;
/// Spectral norms the two weight matrices are rescaled to.
pub const ORACLE_NORMS: [f64; 2] = [1.0, 3.0];

/// 20 latent 3D keypoints of one frame, coordinates in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentKeypoints {
    points: Vec<Point3>,
}

impl LatentKeypoints {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.len() != NUM_KEYPOINTS {
            return Err(invalid!("expected {NUM_KEYPOINTS} keypoints, got {}", points.len()));
        }
        if points.iter().flatten().any(|v| !(v.abs() <= 1.0)) {
            return Err(invalid!("keypoint coordinates must lie in [-1, 1]"));
        }
        Ok(LatentKeypoints { points })
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() != KEYPOINT_DIM {
            return Err(invalid!("expected {KEYPOINT_DIM} keypoint values, got {}", v.len()));
        }
        Self::new(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    /// Mean absolute coordinate difference.
    pub fn mean_l1(&self, other: &LatentKeypoints) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .flatten()
            .zip(other.points.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum();
        s / KEYPOINT_DIM as f64
    }
}

/// `kp = tanh(W2 · tanh(W1 · x + b1) + b2)` with `x` the flattened posed face.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentOracle {
    seed: u64,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl LatentOracle {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
        };
        let mut w1 = gauss(ORACLE_HIDDEN, FACE_DIM);
        let mut w2 = gauss(KEYPOINT_DIM, ORACLE_HIDDEN);
        let b1 = gauss(ORACLE_HIDDEN, 1).column(0).mapv(|v| 0.3 * v);
        let b2 = gauss(KEYPOINT_DIM, 1).column(0).mapv(|v| 0.3 * v);
        for (w, target) in [(&mut w1, ORACLE_NORMS[0]), (&mut w2, ORACLE_NORMS[1])] {
            let s = spectral_norm(w);
            w.mapv_inplace(|v| v * target / s);
        }
        LatentOracle { seed, w1, b1, w2, b2 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spectral_norms(&self) -> [f64; 2] {
        [spectral_norm(&self.w1), spectral_norm(&self.w2)]
    }

    pub fn apply(&self, frame: &LandmarkFrame) -> Result<LatentKeypoints> {
        if frame.space() != Space::Posed {
            return Err(contract!("latent oracle expects a posed frame, got {:?}", frame.space()));
        }
        let x = Array1::from(frame.flat_face());
        let h = (self.w1.dot(&x) + &self.b1).mapv(f64::tanh);
        let y = (self.w2.dot(&h) + &self.b2).mapv(f64::tanh);
        LatentKeypoints::from_flat(y.as_slice().expect("contiguous"))
    }
}

/// Convenience form that rebuilds the oracle from its seed on each call.
pub fn latent_oracle(frame: &LandmarkFrame, seed: u64) -> Result<LatentKeypoints> {
    LatentOracle::new(seed).apply(frame)
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn spectral_norm(w: &Array2<f64>) -> f64 {
    let mut v = Array1::from_elem(w.ncols(), 1.0 / (w.ncols() as f64).sqrt());
    let mut sigma = 0.0;
    for _ in 0..500 {
        let u = w.dot(&v);
        let wtu = w.t().dot(&u);
        let n = wtu.dot(&wtu).sqrt();
        if n == 0.0 {
            return 0.0;
        }
        let next = wtu / n;
        let s = w.dot(&next).dot(&w.dot(&next)).sqrt();
        let done = (s - sigma).abs() <= 1e-13 * s;
        sigma = s;
        v = next;
        if done {
            break;
        }
    }
    sigma
}
