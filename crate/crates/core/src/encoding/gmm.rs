//! Diagonal-covariance Gaussian mixtures fitted by expectation-maximization.
//!
//! Components are initialised with k-means++ seeding. The number of
//! components is chosen by BIC over `1..=max_components`, then components
//! whose weight falls below `1 / (2n)` are pruned and EM is resumed on the
//! survivors.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    /// `means[k][d]`
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Per-dimension lower bound on standard deviations.
    pub std_floor: Vec<f64>,
}

impl EmConfig {
    pub fn new(std_floor: Vec<f64>) -> Self {
        EmConfig {
            max_iter: 100,
            rel_tol: 1e-6,
            std_floor,
        }
    }
}

/// Result of one EM run: the model and the total log-likelihood of the data
/// under each successive parameter set.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub model: GaussianMixture,
    pub log_likelihoods: Vec<f64>,
}

impl GaussianMixture {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `ln w_k + ln N(x; mu_k, sigma_k)` for every component.
    pub fn component_log_densities(&self, x: ArrayView1<f64>) -> Vec<f64> {
        (0..self.n_components())
            .map(|k| {
                let mut lp = self.weights[k].ln();
                for (d, &xd) in x.iter().enumerate() {
                    let s = self.stds[k][d];
                    let z = (xd - self.means[k][d]) / s;
                    lp -= 0.5 * (LN_2PI + z * z) + s.ln();
                }
                lp
            })
            .collect()
    }

    pub fn log_pdf(&self, x: ArrayView1<f64>) -> f64 {
        log_sum_exp(&self.component_log_densities(x))
    }

    /// Index of the component with the largest posterior responsibility.
    pub fn most_likely_component(&self, x: ArrayView1<f64>) -> usize {
        argmax(&self.component_log_densities(x))
    }

    pub fn mean_log_likelihood(&self, data: ArrayView2<f64>) -> f64 {
        if data.nrows() == 0 {
            return f64::NAN;
        }
        data.rows().into_iter().map(|r| self.log_pdf(r)).sum::<f64>() / data.nrows() as f64
    }

    fn parameter_count(&self) -> usize {
        let k = self.n_components();
        (k - 1) + 2 * k * self.dims()
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding of `k` centres.
fn kmeans_pp(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.nrows();
    let mut centres = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.rows().into_iter().map(|r| sq_dist(r, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, r) in data.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c));
        }
        centres.push(c);
    }
    centres
}

fn column_stds(data: ArrayView2<f64>, floor: &[f64]) -> Vec<f64> {
    let n = data.nrows() as f64;
    data.columns()
        .into_iter()
        .zip(floor)
        .map(|(c, &f)| {
            let m = c.sum() / n;
            let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            v.sqrt().max(f)
        })
        .collect()
}

/// One EM run with `k` components from k-means++ seeding.
pub fn fit_em(data: ArrayView2<f64>, k: usize, seed: u64, config: &EmConfig) -> EmRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stds = column_stds(data, &config.std_floor);
    let init = GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(data, k, &mut rng),
        stds: vec![stds; k],
    };
    run_em(data, init, config)
}

/// Run EM from the given starting parameters.
pub fn run_em(data: ArrayView2<f64>, init: GaussianMixture, config: &EmConfig) -> EmRun {
    let (n, dims) = data.dim();
    let mut model = init;
    let k = model.n_components();
    let mut history = Vec::new();
    let mut resp = Array2::<f64>::zeros((n, k));
    for iter in 0..=config.max_iter {
        // E-step
        let mut ll = 0.0;
        for (i, row) in data.rows().into_iter().enumerate() {
            let lp = model.component_log_densities(row);
            let total = log_sum_exp(&lp);
            ll += total;
            for c in 0..k {
                resp[[i, c]] = (lp[c] - total).exp();
            }
        }
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= config.rel_tol * prev.abs().max(1.0));
        history.push(ll);
        if converged || iter == config.max_iter {
            break;
        }
        // M-step
        for c in 0..k {
            let nk: f64 = resp.column(c).sum();
            model.weights[c] = nk / n as f64;
            if nk <= 1e-300 {
                continue;
            }
            for d in 0..dims {
                let mean = (0..n).map(|i| resp[[i, c]] * data[[i, d]]).sum::<f64>() / nk;
                let var = (0..n)
                    .map(|i| resp[[i, c]] * (data[[i, d]] - mean).powi(2))
                    .sum::<f64>()
                    / nk;
                model.means[c][d] = mean;
                model.stds[c][d] = var.sqrt().max(config.std_floor[d]);
            }
        }
    }
    EmRun {
        model,
        log_likelihoods: history,
    }
}

/// Fit a mixture choosing the component count by BIC, then prune
/// components lighter than `1 / (2n)`.
pub fn fit_gmm(
    data: ArrayView2<f64>,
    max_components: usize,
    seed: u64,
    config: &EmConfig,
) -> GaussianMixture {
    let n = data.nrows();
    let distinct = count_distinct_rows(data);
    let max_k = max_components.max(1).min(distinct.max(1));
    let mut best: Option<(f64, GaussianMixture)> = None;
    for k in 1..=max_k {
        let run = fit_em(data, k, seed.wrapping_add(k as u64), config);
        let ll = *run.log_likelihoods.last().unwrap_or(&f64::NEG_INFINITY);
        let bic = -2.0 * ll + run.model.parameter_count() as f64 * (n as f64).ln();
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, run.model));
        }
    }
    let mut model = best.map(|(_, m)| m).expect("at least one component count");
    let threshold = 1.0 / (2.0 * n as f64);
    loop {
        let keep: Vec<usize> = (0..model.n_components())
            .filter(|&c| model.weights[c] >= threshold)
            .collect();
        if keep.len() == model.n_components() || keep.is_empty() {
            return model;
        }
        let total: f64 = keep.iter().map(|&c| model.weights[c]).sum();
        let pruned = GaussianMixture {
            weights: keep.iter().map(|&c| model.weights[c] / total).collect(),
            means: keep.iter().map(|&c| model.means[c].clone()).collect(),
            stds: keep.iter().map(|&c| model.stds[c].clone()).collect(),
        };
        model = run_em(data, pruned, config).model;
    }
}

fn count_distinct_rows(data: ArrayView2<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = data
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}
