use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Two-sample Kolmogorov-Smirnov statistic via a sorted merge of the
/// empirical CDFs. Non-finite values are ignored; `None` if a side is empty.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut a: Vec<f64> = a.iter().copied().filter(|x| x.is_finite()).collect();
    let mut b: Vec<f64> = b.iter().copied().filter(|x| x.is_finite()).collect();
    if a.is_empty() || b.is_empty() {
        return None;
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Some(d)
}

/// Chi-squared homogeneity test on the 2 x k table of category counts.
/// Categories with an expected count below 5 in either row are pooled into
/// one bin. Returns the p-value (1 when fewer than two bins remain).
pub fn chi_squared_p<K: Ord + Clone>(real: &BTreeMap<K, usize>, synth: &BTreeMap<K, usize>) -> Option<f64> {
    let nr: usize = real.values().sum();
    let ns: usize = synth.values().sum();
    if nr == 0 || ns == 0 {
        return None;
    }
    let total = (nr + ns) as f64;
    let mut keys: Vec<K> = real.keys().cloned().collect();
    keys.extend(synth.keys().filter(|k| !real.contains_key(*k)).cloned());
    keys.sort();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in &keys {
        let r = *real.get(k).unwrap_or(&0) as f64;
        let s = *synth.get(k).unwrap_or(&0) as f64;
        let col = r + s;
        let small = col * nr as f64 / total < 5.0 || col * ns as f64 / total < 5.0;
        if small {
            pooled.0 += r;
            pooled.1 += s;
        } else {
            bins.push((r, s));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        bins.push(pooled);
    }
    if bins.len() < 2 {
        return Some(1.0);
    }
    let mut stat = 0.0;
    for &(r, s) in &bins {
        let col = r + s;
        let er = col * nr as f64 / total;
        let es = col * ns as f64 / total;
        stat += (r - er).powi(2) / er + (s - es).powi(2) / es;
    }
    let dist = ChiSquared::new((bins.len() - 1) as f64).ok()?;
    Some((1.0 - dist.cdf(stat)).clamp(0.0, 1.0))
}

pub fn counts<'a, I: IntoIterator<Item = &'a Option<String>>>(values: I) -> BTreeMap<Option<String>, usize> {
    let mut out = BTreeMap::new();
    for v in values {
        *out.entry(v.clone()).or_default() += 1;
    }
    out
}
