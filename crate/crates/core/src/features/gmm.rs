//! Two-component 1-D Gaussian mixture fitted by expectation-maximization.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmSettings {
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iters: usize,
    /// Lower bound on each component variance, s².
    pub variance_floor: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 200, variance_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

impl GaussianComponent {
    fn log_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (LN_2PI + math::ln(self.variance) + d * d / self.variance)
    }
}

/// Components are ordered by ascending mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GmmParams {
    pub components: [GaussianComponent; 2],
    pub log_likelihood: f64,
}

impl GmmParams {
    /// All-zero block used when there is nothing to fit.
    pub const SENTINEL: GmmParams =
        GmmParams { components: [GaussianComponent { mean: 0.0, variance: 0.0, weight: 0.0 }; 2], log_likelihood: 0.0 };

    /// `[mean, variance, weight]` for each component.
    pub fn to_array(&self) -> [f64; 6] {
        let [a, b] = self.components;
        [a.mean, a.variance, a.weight, b.mean, b.variance, b.weight]
    }
}

/// Fitted parameters plus the per-iteration log-likelihood trace (initial
/// parameters first).
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub params: GmmParams,
    pub iterations: usize,
    pub log_likelihood_trace: Vec<f64>,
}

pub fn fit_gmm(times: &[f64], settings: &EmSettings) -> Result<GmmParams> {
    fit_gmm_traced(times, settings).map(|f| f.params)
}

pub fn fit_gmm_traced(times: &[f64], settings: &EmSettings) -> Result<GmmFit> {
    if times.is_empty() {
        return Err(Error::Empty("no samples to fit a mixture on"));
    }
    let floor = settings.variance_floor;
    let mut sorted = times.to_vec();
    math::sort_f64(&mut sorted);
    let n = sorted.len() as f64;

    if sorted[0] == sorted[sorted.len() - 1] {
        let v = sorted[0];
        let one = GaussianComponent { mean: v, variance: floor, weight: 1.0 };
        let ll = n * one.log_pdf(v);
        let params = GmmParams { components: [one, GaussianComponent { weight: 0.0, ..one }], log_likelihood: ll };
        return Ok(GmmFit { params, iterations: 0, log_likelihood_trace: vec![ll] });
    }

    let mean = times.iter().sum::<f64>() / n;
    let pooled = (times.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).max(floor);
    let mut comps = [
        GaussianComponent { mean: math::quantile_sorted(&sorted, 0.25), variance: pooled, weight: 0.5 },
        GaussianComponent { mean: math::quantile_sorted(&sorted, 0.75), variance: pooled, weight: 0.5 },
    ];

    let mut resp = vec![[0.0f64; 2]; times.len()];
    let mut ll = e_step(times, &comps, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    while iterations < settings.max_iters {
        iterations += 1;
        m_step(times, &resp, &mut comps, floor);
        let next = e_step(times, &comps, &mut resp);
        trace.push(next);
        debug_assert!(
            next >= ll - 1e-9 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {next} at iteration {iterations}"
        );
        let improvement = next - ll;
        ll = next;
        if improvement < settings.tol {
            break;
        }
    }

    if comps[1].mean < comps[0].mean {
        comps.swap(0, 1);
    }
    Ok(GmmFit { params: GmmParams { components: comps, log_likelihood: ll }, iterations, log_likelihood_trace: trace })
}

/// Fills responsibilities and returns the log-likelihood of `comps`.
fn e_step(xs: &[f64], comps: &[GaussianComponent; 2], resp: &mut [[f64; 2]]) -> f64 {
    let lw = comps.map(|c| if c.weight > 0.0 { math::ln(c.weight) } else { f64::NEG_INFINITY });
    let mut ll = 0.0;
    for (x, r) in xs.iter().zip(resp.iter_mut()) {
        let a = lw[0] + comps[0].log_pdf(*x);
        let b = lw[1] + comps[1].log_pdf(*x);
        let total = math::log_add_exp(a, b);
        ll += total;
        r[0] = math::exp(a - total);
        r[1] = math::exp(b - total);
    }
    ll
}

fn m_step(xs: &[f64], resp: &[[f64; 2]], comps: &mut [GaussianComponent; 2], floor: f64) {
    let n = xs.len() as f64;
    for k in 0..2 {
        let nk: f64 = resp.iter().map(|r| r[k]).sum();
        if nk <= f64::MIN_POSITIVE {
            comps[k].weight = 0.0;
            continue;
        }
        let mean = xs.iter().zip(resp).map(|(x, r)| r[k] * x).sum::<f64>() / nk;
        let var = xs.iter().zip(resp).map(|(x, r)| r[k] * (x - mean) * (x - mean)).sum::<f64>() / nk;
        comps[k] = GaussianComponent { mean, variance: var.max(floor), weight: nk / n };
    }
}
