//! Minimal tensor autodiff: a tape of matrix ops, parameter storage and Adam.

mod graph;
mod optim;
mod params;

pub use graph::{Gradients, Graph, Mat, Var};
pub use optim::{clip_global_norm, Adam, AdamConfig};
pub use params::{he_normal, uniform_fan_in, ParamId, ParamStore};
