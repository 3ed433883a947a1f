//! Heterogeneous graph neural network over the input graphs.
//!
//! Layout: per-type linear embeddings, `first_layers` region-to-region
//! convolutions (GAT or GCN), `hgt_layers` heterogeneous attention layers over
//! every edge type, `last_layers` more convolutions, then a per-region logit.
//! Gradients come from a small reverse-mode tape ([`tape`]).

mod check;
mod hyper;
mod model;
mod search;
pub mod tape;
mod train;

pub use check::{check_gradients, GradientCheck};
pub use hyper::{ConvType, Hyperparams, SearchSpace};
pub use model::{
    activation_pattern, forward, init_model, init_model_in, logits, loss, loss_and_gradients, loss_and_gradients_with,
    loss_with, LossKind, ModelParams,
};
pub use search::{grid_candidates, grid_search, leaderboard_cmp, rank_leaderboard, LeaderboardEntry};
pub use train::{
    clip_global_norm, evaluate, global_norm, predict_index, stratified_split, train, AdamW, EpochRecord, TrainOptions,
    TrainRun,
};
