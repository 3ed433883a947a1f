use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hyper::{Hyperparams, SearchSpace};
use super::train::{train, TrainOptions};
use crate::error::{Error, Result};
use crate::features::InputGraph;
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub hyper: Hyperparams,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    let (a, b) = (math::ln(lo), math::ln(hi));
    math::exp(rng.gen_range(a..b)).clamp(lo, hi)
}

/// `budget` configurations drawn from `space`.
///
/// Discrete grid points are taken without replacement in a seeded order
/// (cycling once the grid is exhausted); the continuous fields are drawn
/// log-uniformly per candidate.
pub fn grid_candidates(space: &SearchSpace, budget: usize, seed: u64) -> Result<Vec<Hyperparams>> {
    space.validate()?;
    if budget == 0 {
        return Err(Error::Hyperparam { field: "budget", value: "0".into() });
    }
    let size = space.grid_size();
    let order = index::sample(&mut rng::stream(seed, &[0x9e1d]), size, budget.min(size)).into_vec();
    let mut out = Vec::with_capacity(budget);
    for k in 0..budget {
        let mut h = space.grid_point(order[k % order.len()]);
        let mut r = rng::stream(seed, &[0xc0de, k as u64]);
        h.learning_rate = log_uniform(&mut r, space.learning_rate);
        h.weight_decay = log_uniform(&mut r, space.weight_decay);
        h.max_grad_norm = log_uniform(&mut r, space.max_grad_norm);
        out.push(h);
    }
    Ok(out)
}

/// Sorts by validation accuracy (desc), loss (asc), then hyperparameters, and
/// assigns ranks starting at 1.
pub fn rank_leaderboard(entries: &mut [LeaderboardEntry]) {
    entries.sort_by(leaderboard_cmp);
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
}

/// Trains every candidate in turn. Candidates whose hyperparameters do not fit
/// the graphs' structure are errors, not skipped.
pub fn grid_search(
    train_set: &[InputGraph],
    val_set: &[InputGraph],
    space: &SearchSpace,
    budget: usize,
    opts: &TrainOptions,
) -> Result<(Hyperparams, Vec<LeaderboardEntry>)> {
    let candidates = grid_candidates(space, budget, opts.seed)?;
    let mut board = Vec::with_capacity(candidates.len());
    for h in candidates {
        let run = train(train_set, val_set, &h, &TrainOptions { space: space.clone(), ..opts.clone() })?;
        board.push(LeaderboardEntry {
            rank: 0,
            hyper: h,
            best_val_accuracy: run.best_val_accuracy,
            best_val_loss: run.best_val_loss,
            best_epoch: run.best_epoch,
        });
    }
    rank_leaderboard(&mut board);
    Ok((board[0].hyper, board))
}

/// Compares two entries the way [`rank_leaderboard`] orders them.
pub fn leaderboard_cmp(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    b.best_val_accuracy
        .total_cmp(&a.best_val_accuracy)
        .then(a.best_val_loss.total_cmp(&b.best_val_loss))
        .then_with(|| a.hyper.lexicographic_cmp(&b.hyper))
}
