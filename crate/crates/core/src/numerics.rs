//! Small numeric helpers shared across the crate.

/// Neumaier-compensated summation. Used for long spectral sums (effective
/// dimension, norms) where plain accumulation loses digits at J ~ 10^3.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise (cascade) summation in fixed index order. The Monte Carlo harness
/// aggregates squared errors with this so the result is independent of the
/// worker count.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Geometric grid of `points` values from `lo` to `hi` inclusive, ascending.
///
/// Panics if `lo` or `hi` is non-positive or `points == 0`; callers validate.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(
        lo > 0.0 && hi > 0.0 && points > 0,
        "geometric_grid arguments"
    );
    if points == 1 {
        return vec![lo];
    }
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    (0..points)
        .map(|i| {
            // endpoints exact; interior points interpolated in log space
            if i == 0 {
                lo
            } else if i == points - 1 {
                hi
            } else {
                let f = i as f64 / (points - 1) as f64;
                (log_lo + f * (log_hi - log_lo)).exp()
            }
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Format a float with 17 significant digits so text output round-trips to
/// the identical f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        // 1 + 1e-16 * 10^4 loses the tail under naive summation.
        let terms: Vec<f64> = std::iter::once(1.0)
            .chain(std::iter::repeat_n(1e-16, 10_000))
            .collect();
        let s = compensated_sum(terms.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-18);
    }

    #[test]
    fn pairwise_matches_exact_on_integers() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn geometric_grid_endpoints_and_order() {
        let g = geometric_grid(1e-8, 1.0, 60);
        assert_eq!(g.len(), 60);
        assert!((g[0] - 1e-8).abs() < 1e-22);
        assert!((g[59] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn slope_of_line_is_exact() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((least_squares_slope(&xs, &ys) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fmt_round_trips() {
        for &x in &[0.1, 2.0 / 3.0, 1e-300, -17.25, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
