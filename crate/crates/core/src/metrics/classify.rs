//! Classifiers and scores used by the discrimination and efficacy metrics.

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Standardisation fitted on training features.
#[derive(Debug, Clone)]
pub struct Scaler {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Scaler {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let scale = x
            .var_axis(Axis(0), 0.0)
            .mapv(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });
        Scaler { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

/// Binary L2-regularised logistic regression, full-batch gradient descent
/// with Adam from a zero start (deterministic).
#[derive(Debug, Clone)]
pub struct Logistic {
    scaler: Scaler,
    w: Array1<f64>,
    b: f64,
}

const EPOCHS: usize = 300;
const LR: f64 = 0.05;
const L2: f64 = 1e-3;

impl Logistic {
    pub fn fit(x: ArrayView2<f64>, y: &[bool]) -> Self {
        let scaler = Scaler::fit(x);
        let xs = scaler.apply(x);
        let (n, d) = xs.dim();
        let t = Array1::from_iter(y.iter().map(|&v| f64::from(u8::from(v))));
        let mut w = Array1::<f64>::zeros(d);
        let mut b = 0.0;
        let (mut mw, mut vw) = (Array1::<f64>::zeros(d), Array1::<f64>::zeros(d));
        let (mut mb, mut vb) = (0.0, 0.0);
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        for step in 1..=EPOCHS {
            let p = (xs.dot(&w) + b).mapv(crate::nn::sigmoid);
            let err = (&p - &t) / n.max(1) as f64;
            let gw = xs.t().dot(&err) + L2 * &w;
            let gb = err.sum();
            mw = b1 * &mw + (1.0 - b1) * &gw;
            vw = b2 * &vw + (1.0 - b2) * &gw.mapv(|g| g * g);
            mb = b1 * mb + (1.0 - b1) * gb;
            vb = b2 * vb + (1.0 - b2) * gb * gb;
            let c1 = 1.0 - b1.powi(step as i32);
            let c2 = 1.0 - b2.powi(step as i32);
            w = w - LR * (&mw / c1) / ((&vw / c2).mapv(f64::sqrt) + eps);
            b -= LR * (mb / c1) / ((vb / c2).sqrt() + eps);
        }
        Logistic { scaler, w, b }
    }

    /// Positive-class probabilities.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        (self.scaler.apply(x).dot(&self.w) + self.b)
            .mapv(crate::nn::sigmoid)
            .to_vec()
    }
}

/// One-vs-rest multi-class logistic regression over labels `0..classes`.
pub fn logistic_ovr(train_x: ArrayView2<f64>, train_y: &[usize], classes: usize, test_x: ArrayView2<f64>) -> Vec<usize> {
    let scores: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let y: Vec<bool> = train_y.iter().map(|&v| v == c).collect();
            if y.iter().any(|&v| v) {
                Logistic::fit(train_x, &y).predict_proba(test_x)
            } else {
                vec![f64::NEG_INFINITY; test_x.nrows()]
            }
        })
        .collect();
    (0..test_x.nrows())
        .map(|i| {
            (0..classes)
                .max_by(|&a, &b| scores[a][i].total_cmp(&scores[b][i]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect()
}

/// Brute-force Euclidean k-nearest-neighbour majority vote on standardised
/// features; ties go to the class of the nearest tied neighbour.
pub fn knn(train_x: ArrayView2<f64>, train_y: &[usize], classes: usize, test_x: ArrayView2<f64>, k: usize) -> Vec<usize> {
    let scaler = Scaler::fit(train_x);
    let tr = scaler.apply(train_x);
    let te = scaler.apply(test_x);
    let k = k.min(tr.nrows()).max(1);
    te.rows()
        .into_iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = tr
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; classes];
            let mut first = vec![usize::MAX; classes];
            for (rank, &(_, i)) in d.iter().take(k).enumerate() {
                votes[train_y[i]] += 1;
                first[train_y[i]] = first[train_y[i]].min(rank);
            }
            (0..classes)
                .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(first[b].cmp(&first[a])))
                .unwrap_or(0)
        })
        .collect()
}

/// Macro-averaged F1 over the labels present in either vector.
pub fn macro_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let labels: std::collections::BTreeSet<usize> = truth.iter().chain(pred).copied().collect();
    if labels.is_empty() {
        return 0.0;
    }
    let f1s: f64 = labels
        .iter()
        .map(|&c| {
            let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
            let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
            let fneg = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fneg)
            }
        })
        .sum();
    f1s / labels.len() as f64
}

/// ROC AUC via the rank-sum statistic with average ranks for ties.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let np = positive.iter().filter(|&&p| p).count();
    let nn = positive.len() - np;
    if np == 0 || nn == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if positive[k] {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    Some((rank_sum - (np * (np + 1)) as f64 / 2.0) / (np as f64 * nn as f64))
}
