//! Central finite-difference check of [`loss_and_gradients_with`].

use alloc::string::String;

use crate::error::Result;
use crate::features::InputGraph;
use crate::gnn::{activation_pattern, loss_and_gradients_with, loss_with, LossKind, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose two probes straddle a rectifier kink.
    pub skipped: usize,
    /// Largest `|fd - analytic| / max(|fd|, |analytic|, floor)`.
    pub worst_relative_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst_at: String,
}

/// Compares every analytic gradient coordinate of `m` on `g` against
/// `(L(θ + step) - L(θ - step)) / 2 step`. Coordinates where the two probes
/// change some rectifier's sign are skipped and counted.
pub fn check_gradients(m: &ModelParams, g: &InputGraph, weight_decay: f64, kind: LossKind, step: f64, floor: f64) -> Result<GradientCheck> {
    let (_, grads) = loss_and_gradients_with(m, g, weight_decay, kind)?;
    let mut out = GradientCheck { checked: 0, skipped: 0, worst_relative_error: 0.0, worst_at: String::new() };
    let mut probe = m.clone();
    for t in 0..m.tensors.len() {
        for k in 0..m.tensors[t].data.len() {
            let x = m.tensors[t].data[k];
            probe.tensors[t].data[k] = x + step;
            let (plus_pattern, plus) = (activation_pattern(&probe, g)?, loss_with(&probe, g, weight_decay, kind)?);
            probe.tensors[t].data[k] = x - step;
            let (minus_pattern, minus) = (activation_pattern(&probe, g)?, loss_with(&probe, g, weight_decay, kind)?);
            probe.tensors[t].data[k] = x;
            if plus_pattern != minus_pattern {
                out.skipped += 1;
                continue;
            }
            let fd = (plus - minus) / (2.0 * step);
            let an = grads[t].data[k];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
            if rel > out.worst_relative_error || out.checked == 0 {
                out.worst_relative_error = rel;
                out.worst_at = alloc::format!("{}[{k}]", m.names[t]);
            }
            out.checked += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gnn::{init_model_in, SearchSpace};

    #[test]
    fn every_coordinate_is_visited() {
        let (g, h, kind) = fixtures::gradient_case(3);
        let m = init_model_in(&h, &g.schema(), 3, &SearchSpace::unrestricted()).unwrap();
        let rep = check_gradients(&m, &g, 1e-3, kind, 1e-5, 1e-6).unwrap();
        assert_eq!(rep.checked + rep.skipped, m.num_scalars());
        assert!(rep.worst_relative_error < 1e-4, "{rep:?}");
    }
}
