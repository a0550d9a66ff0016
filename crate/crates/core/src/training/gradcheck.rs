//! Central-difference check of analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::models::AnyModel;
use crate::nn::Graph;

use super::{model_loss, Batch, TrainConfig};

/// One sampled parameter entry.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

fn loss_value(model: &AnyModel, batch: &Batch, cfg: &TrainConfig) -> Result<f64> {
    let mut g = Graph::new(true);
    let t = model_loss(model, &mut g, batch, cfg)?;
    Ok(g.scalar(t.total))
}

/// Compares analytic gradients with `(L(w + h) − L(w − h)) / 2h` on `count`
/// trainable entries drawn uniformly by tensor then by element.
pub fn gradient_check(
    model: &mut AnyModel,
    batch: &Batch,
    cfg: &TrainConfig,
    count: usize,
    h: f64,
    floor: f64,
    seed: u64,
) -> Result<Vec<GradSample>> {
    let mut g = Graph::new(true);
    let terms = model_loss(model, &mut g, batch, cfg)?;
    let grads = g.backward(terms.total);
    let ids: Vec<_> = model.store().trainable_ids().collect();
    if ids.is_empty() {
        return Err(invalid!("model has no trainable parameters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id = ids[rng.gen_range(0..ids.len())];
        let n = model.store().value(id).len();
        let index = rng.gen_range(0..n);
        let analytic = grads.get(id).map_or(0.0, |m| m.iter().nth(index).copied().unwrap_or(0.0));
        let orig = *model.store().value(id).iter().nth(index).expect("index in range");
        let set = |m: &mut AnyModel, v: f64| {
            *m.store_mut().value_mut(id).iter_mut().nth(index).expect("index in range") = v;
        };
        set(model, orig + h);
        let up = loss_value(model, batch, cfg)?;
        set(model, orig - h);
        let down = loss_value(model, batch, cfg)?;
        set(model, orig);
        let numeric = (up - down) / (2.0 * h);
        out.push(GradSample {
            param: model.store().name(id).to_string(),
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric, floor),
        });
    }
    Ok(out)
}
