//! Degrees for a table with two foreign keys: per left row, how many distinct
//! right partners it has, which ones (nearest neighbours of a predicted
//! partner context), and how many child rows each chosen pair produces.

use super::{fit_degree_regressor, round_to_range, sum_bounds, DegreeError, DegreeRegressor, RegressorConfig};
use crate::linear::Ridge;
use ndarray::{concatenate, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Candidate pool size relative to the number of matches to draw.
pub const DEFAULT_K_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPlan {
    /// Left row -> number of distinct right partners.
    pub match_count: DegreeRegressor,
    /// Left context -> expected right context of a partner.
    pub mapper: Ridge,
    /// `[left | right]` of a matched pair -> degree minus one.
    pub degree: DegreeRegressor,
    pub k_factor: f64,
    /// Distinct pairs per child row observed in training.
    pub pair_ratio: f64,
}

/// Fit the three sub-models. `pairs` lists `(left row, right row)` once per
/// child row, so repeated pairs carry the degree.
pub fn fit_match_plan(
    left: ArrayView2<f64>,
    right: ArrayView2<f64>,
    pairs: &[(usize, usize)],
    config: &RegressorConfig,
    k_factor: f64,
) -> Result<MatchPlan, DegreeError> {
    assert!(k_factor > 1.0, "k_factor must exceed 1");
    if pairs.is_empty() {
        return Err(DegreeError::DegenerateChild);
    }
    let mut degree_of: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &p in pairs {
        *degree_of.entry(p).or_default() += 1;
    }
    let mut matches = vec![0.0; left.nrows()];
    for &(l, _) in degree_of.keys() {
        matches[l] += 1.0;
    }
    let match_count = fit_degree_regressor(left, &matches, config)?;

    let li: Vec<usize> = degree_of.keys().map(|p| p.0).collect();
    let ri: Vec<usize> = degree_of.keys().map(|p| p.1).collect();
    let lx = left.select(Axis(0), &li);
    let rx = right.select(Axis(0), &ri);
    let mapper = Ridge::fit(lx.view(), rx.view(), config.lambda);
    let joint = concatenate![Axis(1), lx, rx];
    let extra: Vec<f64> = degree_of.values().map(|&d| d as f64 - 1.0).collect();
    let degree = fit_degree_regressor(joint.view(), &extra, config)?;
    Ok(MatchPlan {
        match_count,
        mapper,
        degree,
        k_factor,
        pair_ratio: degree_of.len() as f64 / pairs.len() as f64,
    })
}

/// Softmax of inverse distances.
pub fn selection_weights(distances: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = distances.iter().map(|&d| 1.0 / d.max(1e-12)).collect();
    let top = inv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = inv.iter().map(|&v| (v - top).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Draw `m` distinct indices with probability proportional to `weights`,
/// renormalising after each draw.
fn sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<(usize, f64)> = weights.iter().cloned().enumerate().collect();
    let mut out = Vec::with_capacity(m);
    while out.len() < m && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|r| r.1).sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut k = remaining.len() - 1;
            for (pos, r) in remaining.iter().enumerate() {
                if u < r.1 {
                    k = pos;
                    break;
                }
                u -= r.1;
            }
            k
        } else {
            rng.gen_range(0..remaining.len())
        };
        out.push(remaining.remove(pick).0);
    }
    out
}

/// Generate `(left row, right row, degree)` triples whose degrees sum to
/// within `eps` of `total` (unless no pair can be formed at all).
pub fn generate_pairs<R: Rng + ?Sized>(
    plan: &MatchPlan,
    left: ArrayView2<f64>,
    right: ArrayView2<f64>,
    total: f64,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize, u64)>, DegreeError> {
    let (lo, hi) = sum_bounds(total, eps);
    if left.nrows() == 0 || right.nrows() == 0 || hi == 0 {
        return Ok(Vec::new());
    }
    let raw = plan.match_count.predict_raw(left, rng)?;
    let mut counts = super::round_degrees(&raw, total * plan.pair_ratio, eps, rng);
    let n_right = right.nrows();
    let clamped = counts.iter().filter(|&&m| m as usize > n_right).count();
    if clamped > 0 {
        log::warn!("{clamped} rows requested more matches than the {n_right} candidates available; clamped");
        counts.iter_mut().for_each(|m| *m = (*m).min(n_right as u64));
    }
    let mapped = plan.mapper.predict(left);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (l, &m) in counts.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let target = mapped.row(l);
        let mut dist: Vec<(f64, usize)> = right
            .rows()
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                let d2: f64 = row.iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), r)
            })
            .collect();
        let k = ((plan.k_factor * m as f64).ceil() as usize).clamp(m as usize, n_right);
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let w = selection_weights(&dist.iter().map(|d| d.0).collect::<Vec<_>>());
        for pick in sample_without_replacement(&w, m as usize, rng) {
            pairs.push((l, dist[pick].1));
        }
    }
    // every pair contributes at least one row
    while pairs.len() as u64 > hi {
        let k = rng.gen_range(0..pairs.len());
        pairs.swap_remove(k);
    }
    pairs.sort_unstable();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let li: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ri: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let joint = concatenate![Axis(1), left.select(Axis(0), &li), right.select(Axis(0), &ri)];
    let extra = plan.degree.predict_raw(joint.view(), rng)?;
    let n = pairs.len() as u64;
    let extra = round_to_range(&extra, lo.saturating_sub(n), hi - n, rng);
    Ok(pairs
        .into_iter()
        .zip(extra)
        .map(|((l, r), e)| (l, r, e + 1))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn softmax_of_inverse_distance() {
        let w = selection_weights(&[1.0, 2.0]);
        let e1 = 1f64.exp();
        let e05 = 0.5f64.exp();
        assert!((w[0] - e1 / (e1 + e05)).abs() < 1e-12);
        assert!((w[0] - 0.6225).abs() < 1e-4 && (w[1] - 0.3775).abs() < 1e-4);
    }

    #[test]
    fn candidate_pool_is_one_and_a_half_times() {
        assert_eq!((DEFAULT_K_FACTOR * 2.0f64).ceil() as usize, 3);
    }

    fn toy() -> (Array2<f64>, Array2<f64>, Vec<(usize, usize)>) {
        // left rows on a line; partner is the right row with the same coordinate
        let left = Array2::from_shape_fn((8, 1), |(i, _)| i as f64);
        let right = Array2::from_shape_fn((8, 1), |(i, _)| i as f64);
        let pairs = (0..8).flat_map(|i| vec![(i, i); 1 + i % 2]).collect();
        (left, right, pairs)
    }

    #[test]
    fn one_partner_each_gives_unit_match_counts() {
        let (l, r, pairs) = toy();
        let plan = fit_match_plan(l.view(), r.view(), &pairs, &RegressorConfig::default(), 1.5).unwrap();
        let counts = plan.match_count.predict_point(l.view()).unwrap();
        assert!(counts.iter().all(|c| (c - 1.0).abs() < 1e-9));
        assert!(plan.match_count.residuals.iter().all(|r| r.abs() < 1e-9));
        // distinct pairs = 8, child rows = 12
        assert_eq!(plan.degree.residuals.len(), 8);
        assert!((plan.pair_ratio - 8.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn mapper_ignores_unmatched_rows() {
        // rows 4.. never match; their (absent) partners must not pull the mapper
        let left = Array2::from_shape_fn((8, 1), |(i, _)| i as f64);
        let right = Array2::from_shape_fn((8, 1), |(i, _)| 10.0 + 2.0 * i as f64);
        let pairs: Vec<(usize, usize)> = (0..4).map(|i| (i, i)).collect();
        let plan = fit_match_plan(left.view(), right.view(), &pairs, &RegressorConfig::default(), 1.5).unwrap();
        let m = plan.mapper.predict(left.view());
        for i in 0..8 {
            assert!((m[[i, 0]] - (10.0 + 2.0 * i as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_child_is_degenerate() {
        let (l, r, _) = toy();
        assert!(matches!(
            fit_match_plan(l.view(), r.view(), &[], &RegressorConfig::default(), 1.5),
            Err(DegreeError::DegenerateChild)
        ));
    }

    #[test]
    fn generated_pairs_follow_the_mapper() {
        let (l, r, pairs) = toy();
        let plan = fit_match_plan(l.view(), r.view(), &pairs, &RegressorConfig::default(), 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = generate_pairs(&plan, l.view(), r.view(), 12.0, 0.0, &mut rng).unwrap();
        assert_eq!(out.iter().map(|p| p.2).sum::<u64>(), 12);
        // nearest neighbour at distance ~0 dominates the softmax
        let exact = out.iter().filter(|p| p.0 == p.1).count();
        assert!(exact as f64 >= 0.75 * out.len() as f64, "{out:?}");
    }

    #[test]
    fn zero_match_rows_emit_nothing() {
        let left = Array2::from_shape_fn((6, 1), |(i, _)| (i % 2) as f64);
        let right = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
        // only odd rows match
        let pairs: Vec<(usize, usize)> = vec![(1, 0), (3, 1), (5, 2)];
        let plan = fit_match_plan(left.view(), right.view(), &pairs, &RegressorConfig::default(), 1.5).unwrap();
        let out = generate_pairs(&plan, left.view(), right.view(), 3.0, 0.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(out.iter().all(|p| p.0 % 2 == 1), "{out:?}");
    }

    proptest! {
        #[test]
        fn partners_distinct_and_total_bounded(
            nl in 1usize..15,
            nr in 1usize..10,
            raw_pairs in proptest::collection::vec((0usize..15, 0usize..10), 1..60),
            total in 1.0f64..80.0,
            seed in any::<u64>(),
        ) {
            let left = Array2::from_shape_fn((nl, 2), |(i, j)| ((i * 3 + j) % 5) as f64);
            let right = Array2::from_shape_fn((nr, 2), |(i, j)| ((i * 7 + j) % 4) as f64);
            let pairs: Vec<(usize, usize)> = raw_pairs.iter().map(|&(a, b)| (a % nl, b % nr)).collect();
            let plan = fit_match_plan(left.view(), right.view(), &pairs, &RegressorConfig::default(), 1.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = generate_pairs(&plan, left.view(), right.view(), total, 0.05, &mut rng).unwrap();
            let distinct: BTreeSet<(usize, usize)> = out.iter().map(|p| (p.0, p.1)).collect();
            prop_assert_eq!(distinct.len(), out.len());
            prop_assert!(out.iter().all(|p| p.2 >= 1 && p.0 < nl && p.1 < nr));
            let (lo, hi) = sum_bounds(total, 0.05);
            let s: u64 = out.iter().map(|p| p.2).sum();
            if !out.is_empty() {
                prop_assert!(s <= hi);
                // reaching the floor needs at least one pair; extras are unbounded
                prop_assert!(s >= lo);
            }
        }
    }
}
