use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named tensors owned by a model: trainable weights plus non-trainable
/// buffers such as batch-norm running statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat, trainable: bool) -> ParamId {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        self.trainable.push(trainable);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|id| self.trainable[id.0])
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    /// Number of trainable scalars.
    pub fn num_weights(&self) -> usize {
        self.trainable_ids().map(|id| self.values[id.0].len()).sum()
    }

    pub fn apply_buffer_updates(&mut self, updates: Vec<(ParamId, Mat)>) {
        for (id, v) in updates {
            debug_assert!(!self.trainable[id.0]);
            self.values[id.0] = v;
        }
    }
}

/// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn uniform_fan_in<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Mat {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// He-style normal initialization for leaky-ReLU layers.
pub fn he_normal<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Mat {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}
