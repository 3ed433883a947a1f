use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hyper::{Hyperparams, SearchSpace};
use super::model::{forward, init_model_in, loss_and_gradients_with, loss_with, LossKind, ModelParams};
use crate::error::{Error, Result};
use crate::features::InputGraph;
use crate::math;
use crate::matrix::Matrix;
use crate::rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Stop after this many epochs without a better checkpoint.
    pub patience: Option<usize>,
    pub seed: u64,
    pub loss: LossKind,
    /// Domain the hyperparameters are validated against.
    pub space: SearchSpace,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 300, patience: Some(30), seed: 0, loss: LossKind::Bce, space: SearchSpace::extended_depth() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Largest global gradient norm after clipping.
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    /// Best checkpoint by validation accuracy, ties broken by lower loss.
    pub model: ModelParams,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamW {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Matrix> = params.tensors.iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect();
        Self { lr, weight_decay, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Matrix]) {
        self.step += 1;
        let c1 = 1.0 - math::powf(BETA1, f64::from(self.step));
        let c2 = 1.0 - math::powf(BETA2, f64::from(self.step));
        for (((p, g), m), v) in params.tensors.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * gi;
                v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * gi * gi;
                let update = (m.data[i] / c1) / (math::sqrt(v.data[i] / c2) + EPS);
                p.data[i] -= self.lr * (update + self.weight_decay * p.data[i]);
            }
        }
    }
}

pub fn global_norm(grads: &[Matrix]) -> f64 {
    math::sqrt(grads.iter().map(Matrix::sum_squares).sum())
}

/// Rescales `grads` so their global norm is at most `max_norm`. Returns the
/// norm after clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale(s));
        return global_norm(grads);
    }
    norm
}

/// Index of the highest-scoring event region of `g`.
pub fn predict_index(m: &ModelParams, g: &InputGraph) -> Result<usize> {
    let p = forward(m, g)?;
    let mut best = g.event_regions[0];
    for &i in &g.event_regions[1..] {
        if p[i] > p[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Mean loss (no weight decay) and region accuracy over `graphs`.
pub fn evaluate(m: &ModelParams, graphs: &[InputGraph], kind: LossKind) -> Result<(f64, f64)> {
    if graphs.is_empty() {
        return Err(Error::Empty("no graphs to evaluate"));
    }
    let (mut loss, mut hits) = (0.0, 0usize);
    for g in graphs {
        loss += loss_with(m, g, 0.0, kind)?;
        let truth = g.truth_region.and_then(|t| g.region_index(t));
        if Some(predict_index(m, g)?) == truth {
            hits += 1;
        }
    }
    let n = graphs.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

fn better(acc: f64, loss: f64, best_acc: f64, best_loss: f64) -> bool {
    acc > best_acc || (acc == best_acc && loss < best_loss)
}

/// Trains a fresh model on `train`, selecting the checkpoint on `val`.
///
/// Each graph is one optimization step; the order is reshuffled every epoch.
/// With `epochs == 0` the initialized model is returned.
pub fn train(train: &[InputGraph], val: &[InputGraph], h: &Hyperparams, opts: &TrainOptions) -> Result<TrainRun> {
    let first = train.first().ok_or(Error::Empty("no training graphs"))?;
    if val.is_empty() {
        return Err(Error::Empty("no validation graphs"));
    }
    let schema = first.schema();
    if let Some(g) = train.iter().chain(val).find(|g| g.schema() != schema) {
        return Err(Error::Schema(alloc::format!("graph with schema {:?} in a {:?} set", g.schema(), schema)));
    }
    if let Some(g) = train.iter().chain(val).find(|g| g.target().is_none()) {
        return Err(Error::InputGraph(alloc::format!("unlabeled graph (truth {:?})", g.truth_region)));
    }
    let mut model = init_model_in(h, &schema, opts.seed, &opts.space)?;
    let mut opt = AdamW::new(&model, h.learning_rate, h.weight_decay);

    let (val_loss, val_acc) = evaluate(&model, val, opts.loss)?;
    let mut run = TrainRun {
        seed: opts.seed,
        model: model.clone(),
        best_epoch: 0,
        best_val_accuracy: val_acc,
        best_val_loss: val_loss,
        history: Vec::new(),
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng::stream(opts.seed, &[0x7a1e, epoch as u64]));
        let (mut total, mut max_norm) = (0.0, 0.0f64);
        for (step, &i) in order.iter().enumerate() {
            let (loss, mut grads) = loss_and_gradients_with(&model, &train[i], 0.0, opts.loss)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss });
            }
            max_norm = max_norm.max(clip_global_norm(&mut grads, h.max_grad_norm));
            opt.step(&mut model, &grads);
            if !model.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            total += loss;
        }
        let (val_loss, val_accuracy) = evaluate(&model, val, opts.loss)?;
        run.history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss,
            val_accuracy,
            max_grad_norm: max_norm,
        });
        if better(val_accuracy, val_loss, run.best_val_accuracy, run.best_val_loss) {
            run.model = model.clone();
            run.best_epoch = epoch;
            run.best_val_accuracy = val_accuracy;
            run.best_val_loss = val_loss;
            since_best = 0;
        } else {
            since_best += 1;
            if opts.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    Ok(run)
}

/// Stratified split: for every label, `val_fraction` of its items (rounded,
/// at least one when the label has two or more) go to validation. Returns
/// `(train, val)` index lists in ascending order.
pub fn stratified_split(labels: &[u32], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_label: alloc::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (label, mut idx) in by_label {
        idx.shuffle(&mut rng::stream(seed, &[u64::from(label)]));
        let mut k = math::floor(val_fraction * idx.len() as f64 + 0.5) as usize;
        if k == 0 && idx.len() >= 2 && val_fraction > 0.0 {
            k = 1;
        }
        k = k.min(idx.len().saturating_sub(1));
        va.extend_from_slice(&idx[..k]);
        tr.extend_from_slice(&idx[k..]);
    }
    tr.sort_unstable();
    va.sort_unstable();
    (tr, va)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = vec![Matrix::filled(2, 2, 3.0), Matrix::filled(1, 3, -4.0)];
        let after = clip_global_norm(&mut g, 1.0);
        assert!((after - 1.0).abs() < 1e-12);
        let mut small = vec![Matrix::filled(1, 1, 0.5)];
        assert_eq!(clip_global_norm(&mut small, 1.0), 0.5);
        assert_eq!(small[0].data[0], 0.5);
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u32> = (0..50).map(|i| i % 5).collect();
        let (tr, va) = stratified_split(&labels, 0.2, 4);
        assert_eq!(va.len(), 10);
        assert_eq!(tr.len() + va.len(), 50);
        for l in 0..5 {
            assert_eq!(va.iter().filter(|&&i| labels[i] == l).count(), 2);
        }
        assert!(tr.iter().all(|i| !va.contains(i)));
        assert_eq!(stratified_split(&labels, 0.2, 4), (tr, va));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = super::super::model::ModelParams {
            hyper: Hyperparams::default(),
            schema: crate::features::GraphSchema { region_dim: 1, anchor_dim: 1, master_dim: None, edge_types: vec![] },
            names: vec!["x".into()],
            tensors: vec![Matrix::filled(1, 2, 1.0)],
        };
        let mut opt = AdamW::new(&p, 0.1, 0.0);
        opt.step(&mut p, &[Matrix::from_vec(1, 2, vec![2.0, -0.5])]);
        assert!((p.tensors[0].data[0] - 0.9).abs() < 1e-6);
        assert!((p.tensors[0].data[1] - 1.1).abs() < 1e-6);
    }
}
