//! Building blocks over the autodiff graph: linear layers, MLPs, batch norm,
//! temporal convolutions, FiLM and a two-layer LSTM.
//!
//! Sequence tensors are time-major: row `t * batch + b`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{he_normal, uniform_fan_in, Graph, Mat, ParamId, ParamStore, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// He-normal weights for layers followed by a leaky ReLU.
    He,
    /// Uniform fan-in weights.
    Uniform,
    /// Uniform fan-in weights scaled down by 10.
    Small,
    Zero,
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, inputs: usize, outputs: usize, init: Init) -> Self {
        let w = match init {
            Init::He => he_normal(rng, inputs, outputs, inputs),
            Init::Uniform => uniform_fan_in(rng, inputs, outputs, inputs),
            Init::Small => uniform_fan_in(rng, inputs, outputs, inputs) * 0.1,
            Init::Zero => Array2::zeros((inputs, outputs)),
        };
        Linear {
            w: store.add(format!("{name}.w"), w, true),
            b: store.add(format!("{name}.b"), Array2::zeros((1, outputs)), true),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

/// Stack of linear layers with leaky ReLU between them. `act_out` also
/// activates the last layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub act_out: bool,
}

impl Mlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        inputs: usize,
        width: usize,
        outputs: usize,
        depth: usize,
        act_out: bool,
        last_init: Init,
    ) -> Self {
        assert!(depth >= 1);
        let layers = (0..depth)
            .map(|i| {
                let fan_in = if i == 0 { inputs } else { width };
                let last = i + 1 == depth;
                let out = if last { outputs } else { width };
                let init = if last { last_init } else { Init::He };
                Linear::new(store, rng, &format!("{name}.{i}"), fan_in, out, init)
            })
            .collect();
        Mlp { layers, act_out }
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mut x: Var) -> Var {
        let n = self.layers.len();
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(g, store, x);
            if i + 1 < n || self.act_out {
                x = g.leaky_relu(x, LEAKY_SLOPE);
            }
        }
        x
    }
}

/// Per-feature batch normalization with running statistics used outside
/// training.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, n: usize) -> Self {
        BatchNorm {
            gamma: store.add(format!("{name}.gamma"), Array2::ones((1, n)), true),
            beta: store.add(format!("{name}.beta"), Array2::zeros((1, n)), true),
            running_mean: store.add(format!("{name}.running_mean"), Array2::zeros((1, n)), false),
            running_var: store.add(format!("{name}.running_var"), Array2::ones((1, n)), false),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let xn = if g.is_training() {
            let rows = g.shape(x).0 as f64;
            let (xn, mean, var) = g.batch_norm_train(x, BN_EPS);
            let unbias = if rows > 1.0 { rows / (rows - 1.0) } else { 1.0 };
            let rm = store.value(self.running_mean);
            let rv = store.value(self.running_var);
            let new_mean = rm * (1.0 - BN_MOMENTUM) + &(mean.insert_axis(ndarray::Axis(0)) * BN_MOMENTUM);
            let new_var = rv * (1.0 - BN_MOMENTUM) + &(var.insert_axis(ndarray::Axis(0)) * (BN_MOMENTUM * unbias));
            g.push_buffer_update(self.running_mean, new_mean);
            g.push_buffer_update(self.running_var, new_var);
            xn
        } else {
            let shift = g.input(store.value(self.running_mean).mapv(|m| -m));
            let scale = g.input(store.value(self.running_var).mapv(|v| 1.0 / (v + BN_EPS).sqrt()));
            let c = g.add_row(x, shift);
            g.mul_row(c, scale)
        };
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        let y = g.mul_row(xn, gamma);
        g.add_row(y, beta)
    }
}

/// Fixed per-feature standardization, `(x - mean) * inv_std`, held as
/// non-trainable buffers and set from training data.
#[derive(Clone, Debug)]
pub struct FeatureNorm {
    pub mean: ParamId,
    pub inv_std: ParamId,
}

impl FeatureNorm {
    pub fn new(store: &mut ParamStore, name: &str, n: usize) -> Self {
        FeatureNorm {
            mean: store.add(format!("{name}.mean"), Array2::zeros((1, n)), false),
            inv_std: store.add(format!("{name}.inv_std"), Array2::ones((1, n)), false),
        }
    }

    /// Sets the statistics from the rows of `data`.
    pub fn fit(&self, store: &mut ParamStore, data: &Mat) {
        let n = data.nrows().max(1) as f64;
        let mean = data.sum_axis(ndarray::Axis(0)) / n;
        let var = (data - &mean).mapv(|v| v * v).sum_axis(ndarray::Axis(0)) / n;
        *store.value_mut(self.mean) = mean.insert_axis(ndarray::Axis(0));
        *store.value_mut(self.inv_std) = var.mapv(|v| 1.0 / v.sqrt().max(1e-6)).insert_axis(ndarray::Axis(0));
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let shift = g.input(store.value(self.mean).mapv(|m| -m));
        let scale = g.input(store.value(self.inv_std).clone());
        let c = g.add_row(x, shift);
        g.mul_row(c, scale)
    }
}

/// 1D convolution over time as one matmul over shifted copies of the input.
/// `offsets` lists the relative time of every tap: `[-1, 0, 1]` is a
/// symmetric kernel of 3, `[-4, .., 0]` a causal kernel of 5.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub linear: Linear,
    pub offsets: Vec<isize>,
}

impl Conv1d {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, cin: usize, cout: usize, offsets: Vec<isize>) -> Self {
        let linear = Linear::new(store, rng, name, cin * offsets.len(), cout, Init::He);
        Conv1d { linear, offsets }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, batch: usize) -> Var {
        let taps: Vec<Var> = self
            .offsets
            .iter()
            .map(|&o| if o == 0 { x } else { g.shift_rows(x, -o * batch as isize) })
            .collect();
        let cols = if taps.len() == 1 { taps[0] } else { g.concat_cols(&taps) };
        self.linear.forward(g, store, cols)
    }
}

/// Feature-wise modulation `γ(e) ⊙ x + β(e)` with `[γ - 1 | β]` produced by a
/// two-layer MLP of the emotion vector. The last layer starts at zero, so a
/// fresh module is the identity.
#[derive(Clone, Debug)]
pub struct Film {
    pub mlp: Mlp,
    pub features: usize,
}

impl Film {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, cond: usize, hidden: usize, features: usize) -> Self {
        let mlp = Mlp::new(store, rng, name, cond, hidden, 2 * features, 2, false, Init::Zero);
        Film { mlp, features }
    }

    /// `(γ, β)` for each conditioning row.
    pub fn params(&self, g: &mut Graph, store: &ParamStore, cond: Var) -> (Var, Var) {
        let out = self.mlp.forward(g, store, cond);
        let dg = g.slice_cols(out, 0, self.features);
        let gamma = g.add_scalar(dg, 1.0);
        let beta = g.slice_cols(out, self.features, 2 * self.features);
        (gamma, beta)
    }

    /// Modulates a time-major sequence whose batch rows match `cond`'s rows,
    /// `steps` time steps long.
    pub fn apply(&self, g: &mut Graph, store: &ParamStore, x: Var, cond: Var, steps: usize) -> Var {
        let (gamma, beta) = self.params(g, store, cond);
        film_apply(g, x, gamma, beta, steps)
    }
}

pub fn film_apply(g: &mut Graph, x: Var, gamma: Var, beta: Var, steps: usize) -> Var {
    let (gamma, beta) = if steps == 1 {
        (gamma, beta)
    } else {
        (g.tile_rows(gamma, steps), g.tile_rows(beta, steps))
    };
    let y = g.mul(x, gamma);
    g.add(y, beta)
}

/// `(h, c)` per layer.
pub type LstmState = Vec<(Var, Var)>;

#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmLayer {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, inputs: usize, hidden: usize) -> Self {
        let mut b = Array2::zeros((1, 4 * hidden));
        // forget gate starts open
        b.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        LstmLayer {
            w_ih: store.add(format!("{name}.w_ih"), uniform_fan_in(rng, inputs, 4 * hidden, hidden), true),
            w_hh: store.add(format!("{name}.w_hh"), uniform_fan_in(rng, hidden, 4 * hidden, hidden), true),
            b: store.add(format!("{name}.b"), b, true),
            hidden,
        }
    }

    /// Runs over `steps` time steps of `batch` rows each. With `reverse` the
    /// sequence is processed from the last step to the first; outputs keep
    /// the input time order.
    pub fn run(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        steps: usize,
        batch: usize,
        state: (Var, Var),
        reverse: bool,
    ) -> (Var, (Var, Var)) {
        let w_ih = g.param(store, self.w_ih);
        let w_hh = g.param(store, self.w_hh);
        let b = g.param(store, self.b);
        let xw = g.matmul(x, w_ih);
        let xw = g.add_row(xw, b);
        let (mut h, mut c) = state;
        let mut outs = vec![None; steps];
        let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
        for t in order {
            let xt = if steps == 1 { xw } else { g.slice_rows(xw, t * batch, (t + 1) * batch) };
            let hw = g.matmul(h, w_hh);
            let gates = g.add(xt, hw);
            let hc = g.lstm_cell(gates, c);
            h = g.slice_cols(hc, 0, self.hidden);
            c = g.slice_cols(hc, self.hidden, 2 * self.hidden);
            outs[t] = Some(h);
        }
        let outs: Vec<Var> = outs.into_iter().map(|o| o.expect("every step ran")).collect();
        let all = if outs.len() == 1 { outs[0] } else { g.concat_rows(&outs) };
        (all, (h, c))
    }
}

/// Stacked unidirectional LSTM.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, inputs: usize, hidden: usize, depth: usize) -> Self {
        let layers = (0..depth)
            .map(|i| LstmLayer::new(store, rng, &format!("{name}.{i}"), if i == 0 { inputs } else { hidden }, hidden))
            .collect();
        Lstm { layers }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn zero_state(&self, g: &mut Graph, batch: usize) -> LstmState {
        self.layers
            .iter()
            .map(|l| {
                let h = g.input(Array2::zeros((batch, l.hidden)));
                let c = g.input(Array2::zeros((batch, l.hidden)));
                (h, c)
            })
            .collect()
    }

    /// Splits a `batch × (2 · depth · hidden)` matrix laid out as
    /// `[h1 | c1 | h2 | c2 ..]` into a state.
    pub fn state_from(&self, g: &mut Graph, packed: Var) -> LstmState {
        let h = self.hidden();
        (0..self.layers.len())
            .map(|i| {
                let hv = g.slice_cols(packed, 2 * i * h, (2 * i + 1) * h);
                let cv = g.slice_cols(packed, (2 * i + 1) * h, (2 * i + 2) * h);
                (hv, cv)
            })
            .collect()
    }

    pub fn run(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        mut x: Var,
        steps: usize,
        batch: usize,
        state: LstmState,
    ) -> (Var, LstmState) {
        let mut out_state = Vec::with_capacity(self.layers.len());
        for (layer, s) in self.layers.iter().zip(state) {
            let (y, st) = layer.run(g, store, x, steps, batch, s, false);
            out_state.push(st);
            x = y;
        }
        (x, out_state)
    }
}

/// Audio encoder hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioEncoderConfig {
    pub channels: usize,
    pub symmetric_layers: usize,
    pub symmetric_kernel: usize,
    pub causal_layers: usize,
    pub causal_kernel: usize,
}

impl AudioEncoderConfig {
    pub fn with_channels(channels: usize) -> Self {
        AudioEncoderConfig {
            channels,
            symmetric_layers: 4,
            symmetric_kernel: 3,
            causal_layers: 8,
            causal_kernel: 5,
        }
    }

    pub fn layers(&self) -> usize {
        self.symmetric_layers + self.causal_layers
    }

    /// Frames the symmetric stack would look ahead: one per layer for
    /// kernel 3.
    fn symmetric_reach(&self) -> usize {
        self.symmetric_layers * (self.symmetric_kernel / 2)
    }

    /// Delay inserted after the symmetric stack.
    pub fn delay(&self) -> usize {
        self.symmetric_reach().saturating_sub(MAX_LOOKAHEAD)
    }

    /// Future frames each embedding depends on.
    pub fn lookahead(&self) -> usize {
        self.symmetric_reach() - self.delay()
    }
}

/// Largest number of future audio frames any model output may depend on.
pub const MAX_LOOKAHEAD: usize = 2;

/// Per-frame audio embeddings: feature standardization, symmetric then
/// causal conv blocks (conv, batch norm, leaky ReLU), optional FiLM on the
/// output. A fixed delay after the symmetric blocks caps the lookahead at
/// [`MAX_LOOKAHEAD`] frames.
#[derive(Clone, Debug)]
pub struct AudioEncoder {
    pub config: AudioEncoderConfig,
    pub norm: FeatureNorm,
    pub convs: Vec<Conv1d>,
    pub bns: Vec<BatchNorm>,
    pub film: Option<Film>,
}

impl AudioEncoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        inputs: usize,
        config: &AudioEncoderConfig,
        film: Option<(usize, usize)>,
    ) -> Self {
        let norm = FeatureNorm::new(store, &format!("{name}.input"), inputs);
        let mut convs = Vec::new();
        let mut bns = Vec::new();
        let ch = config.channels;
        let sym = config.symmetric_kernel as isize / 2;
        let caus = config.causal_kernel as isize - 1;
        for i in 0..config.layers() {
            let offsets: Vec<isize> = if i < config.symmetric_layers {
                (-sym..=sym).collect()
            } else {
                (-caus..=0).collect()
            };
            let cin = if i == 0 { inputs } else { ch };
            convs.push(Conv1d::new(store, rng, &format!("{name}.conv{i}"), cin, ch, offsets));
            bns.push(BatchNorm::new(store, &format!("{name}.bn{i}"), ch));
        }
        let film = film.map(|(cond, hidden)| Film::new(store, rng, &format!("{name}.film"), cond, hidden, ch));
        AudioEncoder {
            config: config.clone(),
            norm,
            convs,
            bns,
            film,
        }
    }

    pub fn channels(&self) -> usize {
        self.config.channels
    }

    /// `features` is `(steps · batch) × inputs`; `cond` is `batch × cond_dim`
    /// and is required when the encoder has FiLM.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        features: Var,
        steps: usize,
        batch: usize,
        cond: Option<Var>,
    ) -> Var {
        let mut x = self.norm.forward(g, store, features);
        for (i, (conv, bn)) in self.convs.iter().zip(&self.bns).enumerate() {
            if i == self.config.symmetric_layers && self.config.delay() > 0 {
                x = g.shift_rows(x, (self.config.delay() * batch) as isize);
            }
            x = conv.forward(g, store, x, batch);
            x = bn.forward(g, store, x);
            x = g.leaky_relu(x, LEAKY_SLOPE);
        }
        if let (Some(film), Some(cond)) = (&self.film, cond) {
            x = film.apply(g, store, x, cond, steps);
        }
        x
    }
}
