use statrs::function::beta::beta_reg;

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p)
}

/// Exact one-sided upper confidence limit for a binomial proportion:
/// the `p` at which `P(X <= k) = alpha`.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
    if k == n {
        return 1.0;
    }
    let (mut lo, mut hi) = (k as f64 / n as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(k, n, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_successes_has_closed_form() {
        // P(X = 0) = (1-p)^n = α  =>  p = 1 - α^{1/n}
        for &n in &[1u64, 10, 1000, 100_000] {
            let expected = -(1e-3f64.ln() / n as f64).exp_m1();
            let got = clopper_pearson_upper(0, n, 1e-3);
            assert!((got - expected).abs() <= 1e-9 * expected, "n={n}: {got} vs {expected}");
        }
    }

    #[test]
    fn cdf_matches_direct_sum() {
        let (n, p) = (12u64, 0.3f64);
        let mut pmf = Vec::new();
        let mut coef = 1.0;
        for k in 0..=n {
            if k > 0 {
                coef *= (n - k + 1) as f64 / k as f64;
            }
            pmf.push(coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
        }
        let mut acc = 0.0;
        for k in 0..=n {
            acc += pmf[k as usize];
            assert!((binomial_cdf(k, n, p) - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_brackets_estimate() {
        assert_eq!(clopper_pearson_upper(5, 5, 1e-3), 1.0);
        for &(k, n) in &[(0u64, 1u64), (1, 1), (3, 10), (500, 100_000), (99_999, 100_000)] {
            let u = clopper_pearson_upper(k, n, 1e-3);
            assert!(u >= k as f64 / n as f64 && u <= 1.0);
            if k < n {
                assert!((binomial_cdf(k, n, u) - 1e-3).abs() < 1e-9);
            }
        }
    }
}
