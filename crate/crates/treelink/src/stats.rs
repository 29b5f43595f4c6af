//! Small numerical toolkit shared by the samplers, the evaluation harness
//! and the tests: summaries, quantiles, Kolmogorov–Smirnov tests, the
//! potential scale reduction factor and a few truncated samplers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::{gamma_lr, gamma_ur};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Quantile with linear interpolation between order statistics at position
/// `(n - 1) p` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!(
        (0.0..=1.0).contains(&p),
        "quantile level {p} outside [0, 1]"
    );
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, p)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (intercept, slope, r2)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let k = f64::from(k);
        let term = sign * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample test of `xs` against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    KsTest {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// Two-sided two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let (d, ne) = two_sample_sup(a, b, |fa, fb| (fa - fb).abs());
    let en = ne.sqrt();
    KsTest {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// One-sided two-sample test of the alternative that `a` is stochastically
/// larger than `b`, i.e. `F_a < F_b` somewhere: statistic `sup (F_b - F_a)`.
pub fn ks_two_sample_greater(a: &[f64], b: &[f64]) -> KsTest {
    let (d, ne) = two_sample_sup(a, b, |fa, fb| fb - fa);
    KsTest {
        statistic: d,
        p_value: (-2.0 * ne * d * d).exp().min(1.0),
    }
}

fn two_sample_sup(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(f(i as f64 / na, j as f64 / nb));
    }
    (d, na * nb / (na + nb))
}

/// Potential scale reduction factor over equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    assert!(
        chains.len() >= 2 && n >= 2,
        "need at least two chains of length two"
    );
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let vars: Vec<f64> = chains.iter().map(|c| variance(&c[..n])).collect();
    let grand = mean(&means);
    let nf = n as f64;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = mean(&vars);
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    (var_plus / w).sqrt()
}

/// Effective sample size from Geyer's initial positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        xs[..n - lag]
            .iter()
            .zip(&xs[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0)).min(n as f64)
}

/// Solves `Q(a, z) = p` (upper regularized incomplete gamma) for `z`.
fn inverse_upper_gamma(a: f64, p: f64, z_min: f64) -> f64 {
    // Monotone decreasing target; compare on the log scale, switching to the
    // lower tail when that side is the small one.
    let use_lower = p > 0.5;
    let target = if use_lower { (1.0 - p).ln() } else { p.ln() };
    let g = |z: f64| -> f64 {
        if use_lower {
            // increasing in z
            gamma_lr(a, z).ln() - target
        } else {
            // decreasing in z
            target - gamma_ur(a, z).ln()
        }
    };
    // g is increasing in z in both branches.
    let mut lo = z_min.max(f64::MIN_POSITIVE);
    let mut hi = (a.max(1.0) * 2.0).max(lo * 2.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return lo;
        }
    }
    if g(lo) > 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile of the inverse-gamma(shape, scale) law.
pub fn inv_gamma_quantile(shape: f64, scale: f64, p: f64) -> f64 {
    // F(x) = Q(shape, scale / x)
    scale / inverse_upper_gamma(shape, p, 0.0)
}

/// Inverse-gamma(shape, scale) variate truncated to `(0, upper]`, drawn by
/// inverting the truncated CDF.
pub fn sample_truncated_inv_gamma<R: Rng + ?Sized>(
    shape: f64,
    scale: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    // F(x) = Q(shape, scale / x), so the truncated draw solves
    // Q(shape, scale / x) = u F(upper).
    let z_min = scale / upper;
    let mass = gamma_ur(shape, z_min);
    let u: f64 = rng.random::<f64>();
    if !(mass > 0.0) {
        return upper;
    }
    let p = (u * mass).max(f64::MIN_POSITIVE);
    let z = inverse_upper_gamma(shape, p, z_min);
    (scale / z).min(upper)
}

/// Standard normal variate truncated to `[lo, hi]` by inverse CDF.
pub fn sample_truncated_std_normal<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    let (flo, fhi) = (n.cdf(lo), n.cdf(hi));
    if fhi - flo > 1e-12 {
        let u: f64 = rng.random::<f64>();
        n.inverse_cdf(flo + u * (fhi - flo)).clamp(lo, hi)
    } else {
        // deep tail: rejection from the untruncated law is hopeless, fall back
        // to the nearest bound
        let z: f64 = StandardNormal.sample(rng);
        z.clamp(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn interpolated_quantiles() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&xs, 0.05) - 5.95).abs() < 1e-12);
        assert!((quantile(&xs, 0.95) - 95.05).abs() < 1e-12);
    }

    #[test]
    fn variance_uses_n_minus_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((sd(&xs) - 1.2909944487358056).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_survival_reference_points() {
        // Q_KS(1.36) ~ 0.049, Q_KS(1.63) ~ 0.0098
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn truncated_inv_gamma_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x = sample_truncated_inv_gamma(3.0, 2.0, 0.8, &mut rng);
            assert!(x > 0.0 && x <= 0.8);
        }
    }

    #[test]
    fn untruncated_inv_gamma_mean() {
        // IG(5, 8) has mean 8 / 4 = 2.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..40_000)
            .map(|_| sample_truncated_inv_gamma(5.0, 8.0, 1e9, &mut rng))
            .collect();
        assert!((mean(&xs) - 2.0).abs() < 0.03, "{}", mean(&xs));
    }

    #[test]
    fn inv_gamma_median_shape_one() {
        // shape 1: F(x) = exp(-scale / x), median scale / ln 2
        let m = inv_gamma_quantile(1.0, 0.3, 0.5);
        assert!((m - 0.3 / std::f64::consts::LN_2).abs() < 1e-10, "{m}");
    }

    #[test]
    fn gelman_rubin_near_one_for_iid_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        assert!(gelman_rubin(&chains) < 1.01);
    }

    #[test]
    fn ks_two_sample_detects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.3 + z
            })
            .collect();
        assert!(ks_two_sample(&a, &b).p_value < 1e-3);
        assert!(ks_two_sample_greater(&b, &a).p_value < 1e-3);
        assert!(ks_two_sample_greater(&a, &b).p_value > 0.5);
    }
}
