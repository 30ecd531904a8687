//! Counter reset and leader schedule arithmetic.

/// Largest `c <= 0` outside every band `[d - kappa, d + kappa]`.
pub fn xi<I: IntoIterator<Item = i64>>(counters: I, kappa: u64) -> i64 {
    let kappa = kappa as i64;
    let mut bands: Vec<(i64, i64)> = counters.into_iter().map(|d| (d - kappa, d + kappa)).collect();
    // Scanning by descending upper end: once `c` is above a band's upper end
    // it is above all remaining ones, and `c` only ever decreases.
    bands.sort_unstable_by_key(|b| std::cmp::Reverse(b.1));
    let mut c = 0;
    for (lo, hi) in bands {
        if c > hi {
            break;
        }
        if c >= lo {
            c = lo - 1;
        }
    }
    c
}

/// Countdown until the next active interval of `tmp_color` in a leader's
/// schedule, given the leader's clock `c_prime`.
///
/// The schedule cycles through the `palette` input colors, giving each an
/// interval of `2 k² κ2` slots. Returns `t <= 0` where `-t` is the smallest
/// value with `-t ≡ tmp_color · 2k²κ2 - c_prime (mod palette · 2k²κ2)` and
/// `-t >= κ2`, leaving at least `κ2` slots to deliver the answer.
pub fn tau(tmp_color: usize, c_prime: i64, palette: usize, kappa2: u64, k: u64) -> i64 {
    let interval = (2 * k * k * kappa2) as i64;
    let period = palette as i64 * interval;
    let mut m = (tmp_color as i64 * interval - c_prime).rem_euclid(period);
    if m < kappa2 as i64 {
        m += period;
    }
    -m
}
