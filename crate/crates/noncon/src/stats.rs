//! Small statistics toolbox shared by the estimation modules: compensated
//! sums, moment estimates with 3σ bands, least-squares line fits and the
//! Kolmogorov–Smirnov distance against a normal law.

use statrs::distribution::{ContinuousCDF, Normal};

/// Kahan-compensated sum; keeps the measure/duality identities at 1e-12
/// even on grids with tens of thousands of cells.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Sample mean and 3σ half-width of the mean estimate.
pub fn mean_ci3(samples: &[f64]) -> (f64, f64) {
    let n = samples.len().max(1) as f64;
    let mean = ksum(samples.iter().copied()) / n;
    let var = ksum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0).max(1.0);
    (mean, 3.0 * (var / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = ksum(samples.iter().copied()) / n;
    ksum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0)
}

/// Ordinary least squares y = a + b x; returns (a, b, rms residual).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = ksum(xs.iter().copied()) / n;
    let my = ksum(ys.iter().copied()) / n;
    let sxx = ksum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = ksum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (ksum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - a - b * x) * (y - a - b * x)),
    ) / n)
        .sqrt();
    (a, b, rms)
}

/// Slope of an OLS line with a 3σ confidence half-width on the slope.
pub fn slope_ci3(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (a, b, _) = linear_fit(xs, ys);
    let n = xs.len() as f64;
    let mx = ksum(xs.iter().copied()) / n;
    let sxx = ksum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sse = ksum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - a - b * x) * (y - a - b * x)),
    );
    let dof = (n - 2.0).max(1.0);
    let se = (sse / dof / sxx.max(f64::MIN_POSITIVE)).sqrt();
    (b, 3.0 * se)
}

/// Decay-law fit for positive data: tries `c·x^(-θ)` against `c·e^(-λx)`
/// and reports whichever leaves the smaller log-space residual.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayFit {
    /// Prefactor of the winning law.
    pub c: f64,
    /// Power-law exponent θ; infinite when the exponential law wins.
    pub theta: f64,
    /// Exponential rate (only meaningful when `theta.is_infinite()`).
    pub rate: f64,
    /// Log-space rms residual of the winning fit.
    pub residual: f64,
}

/// Fit a decay law to (x, y) pairs with y > 0.
pub fn fit_decay(xs: &[f64], ys: &[f64]) -> DecayFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let (a_pow, b_pow, r_pow) = linear_fit(&lx, &ly);
    let (a_exp, b_exp, r_exp) = linear_fit(xs, &ly);
    if r_exp < r_pow {
        DecayFit {
            c: a_exp.exp(),
            theta: f64::INFINITY,
            rate: -b_exp,
            residual: r_exp,
        }
    } else {
        DecayFit {
            c: a_pow.exp(),
            theta: -b_pow,
            rate: 0.0,
            residual: r_pow,
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Kolmogorov–Smirnov distance of samples against N(0, sigma²).
pub fn ks_distance_normal(samples: &[f64], sigma: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf(x / sigma);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        ks = ks.max((f - lo).abs()).max((hi - f).abs());
    }
    ks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 0.75 * x).collect();
        let (a, b, r) = linear_fit(&xs, &ys);
        assert!((a - 2.5).abs() < 1e-12 && (b + 0.75).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn decay_fit_distinguishes_power_from_exponential() {
        let xs: Vec<f64> = (1..30).map(|i| i as f64).collect();
        let pow: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        let exp: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let fp = fit_decay(&xs, &pow);
        assert!(fp.theta.is_finite() && (fp.theta - 2.0).abs() < 1e-9);
        let fe = fit_decay(&xs, &exp);
        assert!(fe.theta.is_infinite() && (fe.rate - 0.7).abs() < 1e-9);
    }

    #[test]
    fn ks_of_exact_normal_quantiles_is_small() {
        // deterministic quantile stratification of N(0,1)
        let n = 2000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                // inverse via bisection on the CDF
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(ks_distance_normal(&samples, 1.0) < 1.0 / n as f64 + 1e-6);
    }
}
