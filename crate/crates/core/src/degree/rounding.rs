use rand::Rng;

/// Binary-search iterations before falling back to increment/decrement.
pub const MAX_SEARCH_STEPS: usize = 64;

/// Integer sum bounds accepted for target `total` and tolerance `eps`.
pub fn sum_bounds(total: f64, eps: f64) -> (u64, u64) {
    let total = total.max(0.0);
    let lo = ((1.0 - eps) * total - 1e-9).ceil().max(0.0);
    let hi = ((1.0 + eps) * total + 1e-9).floor().max(0.0);
    if lo > hi {
        let r = total.round();
        (r as u64, r as u64)
    } else {
        (lo as u64, hi as u64)
    }
}

fn thresholded(d: &[f64], tau: f64) -> Vec<u64> {
    d.iter().map(|&x| (x + tau).floor() as u64).collect()
}

/// Round non-negative real degrees to integers whose sum lies within
/// `[(1-eps)·total, (1+eps)·total]`. Negative inputs are clipped to zero.
///
/// Values are rounded with a shared threshold `τ` as `⌊d+τ⌋`; `τ` is found by
/// binary search. When even all-ceil (all-floor) is too small (too big),
/// random elements are incremented (decremented) until the sum fits.
pub fn round_degrees<R: Rng + ?Sized>(d: &[f64], total: f64, eps: f64, rng: &mut R) -> Vec<u64> {
    let (lo, hi) = sum_bounds(total, eps);
    round_to_range(d, lo, hi, rng)
}

/// Same as [`round_degrees`] with explicit integer sum bounds `lo <= hi`.
pub fn round_to_range<R: Rng + ?Sized>(d: &[f64], lo: u64, hi: u64, rng: &mut R) -> Vec<u64> {
    let d: Vec<f64> = d
        .iter()
        .map(|&x| if x.is_finite() { x.max(0.0) } else { 0.0 })
        .collect();
    let ceil: Vec<u64> = d.iter().map(|x| x.ceil() as u64).collect();
    let floor = thresholded(&d, 0.0);
    let out = if ceil.iter().sum::<u64>() < lo {
        ceil
    } else if floor.iter().sum::<u64>() > hi {
        floor
    } else {
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut tau = 0.5;
        let mut current = thresholded(&d, tau);
        for _ in 0..MAX_SEARCH_STEPS {
            let s: u64 = current.iter().sum();
            if (lo..=hi).contains(&s) {
                return current;
            }
            if s < lo {
                a = tau;
            } else {
                b = tau;
            }
            tau = 0.5 * (a + b);
            current = thresholded(&d, tau);
        }
        current
    };
    adjust(out, lo, hi, rng)
}

fn adjust<R: Rng + ?Sized>(mut out: Vec<u64>, lo: u64, hi: u64, rng: &mut R) -> Vec<u64> {
    let mut sum: u64 = out.iter().sum();
    if out.is_empty() {
        return out;
    }
    while sum < lo {
        let k = rng.gen_range(0..out.len());
        out[k] += 1;
        sum += 1;
    }
    if sum > hi {
        let mut nonzero: Vec<usize> = (0..out.len()).filter(|&k| out[k] > 0).collect();
        while sum > hi {
            let pick = rng.gen_range(0..nonzero.len());
            let k = nonzero[pick];
            out[k] -= 1;
            sum -= 1;
            if out[k] == 0 {
                nonzero.swap_remove(pick);
            }
        }
    }
    out
}
