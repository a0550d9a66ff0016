//! Training losses in plain and graph form, and the learning-rate schedule.
//!
//! Sequences are time-major matrices: row `t * batch + b`.

use std::f64::consts::PI;

use crate::error::{contract, invalid, Result};
use crate::geometry::layout::FACE_DIM;
use crate::models::LANDMARK_DIM;
use crate::nn::{Graph, Mat, Var};

use super::TrainConfig;

/// Column weights for a landmark row: `λ_y` on every y coordinate, 1 elsewhere.
pub fn landmark_weights(lambda_y: f64) -> Vec<f64> {
    (0..LANDMARK_DIM)
        .map(|k| {
            let is_y = if k < FACE_DIM { k % 3 == 1 } else { (k - FACE_DIM) % 2 == 1 };
            if is_y {
                lambda_y
            } else {
                1.0
            }
        })
        .collect()
}

fn check_same(pred: &Mat, gt: &Mat) -> Result<()> {
    if pred.dim() != gt.dim() {
        return Err(contract!("prediction shape {:?} differs from target {:?}", pred.dim(), gt.dim()));
    }
    if pred.is_empty() {
        return Err(invalid!("empty sequences"));
    }
    Ok(())
}

/// Mean of `w_k · |pred − gt|` over every entry; `weights` has one value per
/// column.
pub fn weighted_l1(pred: &Mat, gt: &Mat, weights: &[f64]) -> Result<f64> {
    check_same(pred, gt)?;
    if weights.len() != pred.ncols() {
        return Err(contract!("{} column weights for {} columns", weights.len(), pred.ncols()));
    }
    let mut s = 0.0;
    for (r_p, r_g) in pred.rows().into_iter().zip(gt.rows()) {
        for ((p, g), w) in r_p.iter().zip(r_g.iter()).zip(weights) {
            s += w * (p - g).abs();
        }
    }
    Ok(s / pred.len() as f64)
}

/// Mean absolute difference between the first temporal differences of
/// `pred` and `gt`.
pub fn velocity_loss(pred: &Mat, gt: &Mat, batch: usize) -> Result<f64> {
    check_same(pred, gt)?;
    let steps = steps_of(pred.nrows(), batch)?;
    if steps < 2 {
        return Err(invalid!("velocity loss needs at least 2 steps, got {steps}"));
    }
    let d = pred - gt;
    let mut s = 0.0;
    for r in batch..d.nrows() {
        for c in 0..d.ncols() {
            s += (d[[r, c]] - d[[r - batch, c]]).abs();
        }
    }
    Ok(s / ((d.nrows() - batch) * d.ncols()) as f64)
}

/// `Σ_k ½(μ² + σ² − 1 − ln σ²)` per row, averaged over rows.
pub fn kl_loss(mu: &Mat, sigma: &Mat) -> Result<f64> {
    check_same(mu, sigma)?;
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(contract!("σ must be positive"));
    }
    let total: f64 = mu
        .iter()
        .zip(sigma.iter())
        .map(|(m, s)| 0.5 * (m * m + s * s - 1.0 - (s * s).ln()))
        .sum();
    Ok(total / mu.nrows() as f64)
}

fn steps_of(rows: usize, batch: usize) -> Result<usize> {
    if batch == 0 || !rows.is_multiple_of(batch) {
        return Err(contract!("{rows} rows do not split into batches of {batch}"));
    }
    Ok(rows / batch)
}

/// Graph form of [`weighted_l1`].
pub fn weighted_l1_graph(g: &mut Graph, pred: Var, gt: &Mat, weights: &[f64]) -> Result<Var> {
    if g.shape(pred) != gt.dim() || weights.len() != gt.ncols() {
        return Err(contract!("weighted L1 shapes {:?} / {:?}", g.shape(pred), gt.dim()));
    }
    let t = g.input(gt.clone());
    let d = g.sub(pred, t);
    let a = g.abs(d);
    let w = g.input(Mat::from_shape_vec((1, weights.len()), weights.to_vec()).expect("row"));
    let aw = g.mul_row(a, w);
    Ok(g.mean(aw))
}

/// Plain mean absolute error.
pub fn l1_graph(g: &mut Graph, pred: Var, gt: &Mat) -> Result<Var> {
    if g.shape(pred) != gt.dim() {
        return Err(contract!("L1 shapes {:?} / {:?}", g.shape(pred), gt.dim()));
    }
    let t = g.input(gt.clone());
    let d = g.sub(pred, t);
    let a = g.abs(d);
    Ok(g.mean(a))
}

/// Graph form of [`velocity_loss`].
pub fn velocity_graph(g: &mut Graph, pred: Var, gt: &Mat, batch: usize) -> Result<Var> {
    if g.shape(pred) != gt.dim() {
        return Err(contract!("velocity shapes {:?} / {:?}", g.shape(pred), gt.dim()));
    }
    let rows = gt.nrows();
    if steps_of(rows, batch)? < 2 {
        return Err(invalid!("velocity loss needs at least 2 steps"));
    }
    let t = g.input(gt.clone());
    let d = g.sub(pred, t);
    let later = g.slice_rows(d, batch, rows);
    let earlier = g.slice_rows(d, 0, rows - batch);
    let v = g.sub(later, earlier);
    let a = g.abs(v);
    Ok(g.mean(a))
}

/// Graph form of [`kl_loss`] in terms of `log σ²`.
pub fn kl_graph(g: &mut Graph, mu: Var, logvar: Var) -> Var {
    let rows = g.shape(mu).0 as f64;
    let m2 = g.square(mu);
    let s2 = g.exp(logvar);
    let a = g.add(m2, s2);
    let b = g.sub(a, logvar);
    let c = g.add_scalar(b, -1.0);
    let s = g.sum(c);
    g.scale(s, 0.5 / rows)
}

/// Linear warmup from `start_lr` to `peak_lr`, then cosine decay to 0 at
/// `total_steps`; 0 beyond.
pub fn lr_schedule(step: usize, cfg: &TrainConfig) -> f64 {
    let (w, total) = (cfg.warmup_steps, cfg.total_steps);
    if step >= total {
        return 0.0;
    }
    if step < w {
        return cfg.start_lr + (cfg.peak_lr - cfg.start_lr) * step as f64 / w as f64;
    }
    let p = (step - w) as f64 / (total - w) as f64;
    cfg.peak_lr * 0.5 * (1.0 + (PI * p).cos())
}
