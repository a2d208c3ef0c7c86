//! Monte Carlo statistics and regression fits.
//!
//! Everything here is a deterministic function of its inputs: the only
//! randomness (bootstrap resampling) is driven by an explicit seed.

use crate::error::{Error, Result};
use crate::noise::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Wilson score interval at confidence z for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let radius = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - radius) / denom).max(0.0),
        ((center + radius) / denom).min(1.0),
    )
}

/// Empirical exceedance probability with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub lambda: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

/// P{sample >= lambda} per threshold, with Wilson 95% intervals. Callers
/// studying two-sided tails pass `|u|` samples.
pub fn estimate_tail(samples: &[f64], lambdas: &[f64]) -> Result<Vec<TailEstimate>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("estimate_tail: empty samples".into()));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("estimate_tail: empty lambdas".into()));
    }
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    let n = samples.len();
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let hits = samples.iter().filter(|&&s| s >= lambda).count();
            let (ci_lo, ci_hi) = wilson_interval(hits, n, z);
            TailEstimate {
                lambda,
                p_hat: hits as f64 / n as f64,
                ci_lo,
                ci_hi,
                n,
            }
        })
        .collect())
}

/// Regression result for a scaling law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub exponent_se: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    /// Human-readable description of the x/y transforms that were fitted.
    pub transform: String,
}

impl ScalingFit {
    /// Two-sided t-test of `exponent != 0` at the 95% level.
    pub fn rejects_constant_at_95(&self) -> bool {
        if self.n_points < 3 || !(self.exponent_se > 0.0) {
            return false;
        }
        let t = StudentsT::new(0.0, 1.0, (self.n_points - 2) as f64).unwrap();
        (self.exponent / self.exponent_se).abs() > t.inverse_cdf(0.975)
    }
}

fn least_squares(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> ScalingFit {
    let n = x.len();
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let wsum: f64 = w.iter().sum();
    let xbar = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
        sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
        syy += w[i] * (y[i] - ybar) * (y[i] - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        ss_res += w[i] * r * r;
    }
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (n as f64 - 2.0).max(1.0);
    let se = (ss_res / dof / sxx).sqrt();
    ScalingFit {
        exponent: slope,
        exponent_se: se,
        intercept,
        r2: r2.clamp(0.0, 1.0),
        n_points: n,
        transform: String::new(),
    }
}

/// Which abscissa transform the tail fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Gaussian-type tails: fit log(-log p) against log lambda.
    Bounded,
    /// Multiplicative-noise tails: fit log(-log p) against log log lambda.
    Pam,
}

/// Fit the tail exponent from exceedance estimates with `p_hat` in (0, 1/2).
pub fn fit_tail_exponent(estimates: &[TailEstimate], mode: TailMode) -> Result<ScalingFit> {
    let usable: Vec<&TailEstimate> = estimates
        .iter()
        .filter(|e| e.p_hat > 0.0 && e.p_hat < 0.5)
        .collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientRange(format!(
            "tail fit needs >= 4 estimates with p_hat in (0, 0.5), have {}",
            usable.len()
        )));
    }
    let lo = usable.iter().map(|e| e.lambda).fold(f64::INFINITY, f64::min);
    let hi = usable
        .iter()
        .map(|e| e.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    if hi / lo < 2.0 {
        return Err(Error::InsufficientRange(format!(
            "usable lambda span {lo}..{hi} is below a factor of 2"
        )));
    }
    let (x, transform): (Vec<f64>, &str) = match mode {
        TailMode::Bounded => (
            usable.iter().map(|e| e.lambda.ln()).collect(),
            "log(-log p) ~ log lambda",
        ),
        TailMode::Pam => (
            usable.iter().map(|e| e.lambda.ln().ln()).collect(),
            "log(-log p) ~ log log lambda",
        ),
    };
    let y: Vec<f64> = usable.iter().map(|e| (-e.p_hat.ln()).ln()).collect();
    let mut fit = least_squares(&x, &y, None);
    fit.transform = transform.to_string();
    Ok(fit)
}

/// Which sup-growth law the regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMode {
    /// mean sup against (log R)^{1/2}
    Bounded,
    /// mean sup against (log R)^{1/6}
    General,
    /// mean log sup against (log R)^{2/3}
    Pam,
}

impl SupMode {
    fn x_exponent(self) -> f64 {
        match self {
            SupMode::Bounded => 0.5,
            SupMode::General => 1.0 / 6.0,
            SupMode::Pam => 2.0 / 3.0,
        }
    }

    fn transform(self) -> &'static str {
        match self {
            SupMode::Bounded => "mean sup ~ (log R)^(1/2)",
            SupMode::General => "mean sup ~ (log R)^(1/6)",
            SupMode::Pam => "mean log sup ~ (log R)^(2/3)",
        }
    }
}

/// Weighted regression of per-radius mean suprema on the mode's power of
/// log R. Weights are inverse squared standard errors of the per-R means.
pub fn fit_sup_scaling(
    r_values: &[f64],
    sup_samples: &[Vec<f64>],
    mode: SupMode,
) -> Result<ScalingFit> {
    if r_values.len() != sup_samples.len() || r_values.len() < 4 {
        return Err(Error::InsufficientRange(format!(
            "sup fit needs >= 4 radii with samples, have {}",
            r_values.len()
        )));
    }
    if !r_values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "sup fit requires strictly increasing radii".into(),
        ));
    }
    let span = r_values[r_values.len() - 1] / r_values[0];
    if span < 16.0 {
        return Err(Error::InsufficientRange(format!(
            "radius span factor {span:.2} is below 16"
        )));
    }
    let mut x = Vec::with_capacity(r_values.len());
    let mut y = Vec::with_capacity(r_values.len());
    let mut w = Vec::with_capacity(r_values.len());
    for (i, samples) in sup_samples.iter().enumerate() {
        if samples.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no sup samples for radius {}",
                r_values[i]
            )));
        }
        let transformed: Vec<f64> = match mode {
            SupMode::Pam => {
                if let Some(&bad) = samples.iter().find(|&&s| s <= 0.0) {
                    return Err(Error::NonPositive(format!(
                        "log sup undefined for sup = {bad} at R = {}",
                        r_values[i]
                    )));
                }
                samples.iter().map(|s| s.ln()).collect()
            }
            _ => samples.clone(),
        };
        let n = transformed.len() as f64;
        let mean = transformed.iter().sum::<f64>() / n;
        let var = transformed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let se_sq = (var / n).max(1e-300);
        x.push(r_values[i].ln().powf(mode.x_exponent()));
        y.push(mean);
        w.push(1.0 / se_sq);
    }
    let mut fit = least_squares(&x, &y, Some(&w));
    fit.transform = mode.transform().to_string();
    Ok(fit)
}

/// Log-log slope of the localization coupling RMS against the block scale.
pub fn estimate_coupling_decay(beta_values: &[f64], rms_diffs: &[f64]) -> Result<ScalingFit> {
    if beta_values.len() != rms_diffs.len() || beta_values.len() < 4 {
        return Err(Error::InsufficientRange(format!(
            "coupling fit needs >= 4 beta values, have {}",
            beta_values.len()
        )));
    }
    let lo = beta_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = beta_values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if hi / lo < 8.0 {
        return Err(Error::InsufficientRange(format!(
            "beta span factor {:.2} is below 8",
            hi / lo
        )));
    }
    if let Some(&bad) = rms_diffs.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::NonPositive(format!(
            "coupling RMS must be positive for a log-log fit, got {bad}"
        )));
    }
    let x: Vec<f64> = beta_values.iter().map(|b| b.ln()).collect();
    let y: Vec<f64> = rms_diffs.iter().map(|r| r.ln()).collect();
    let mut fit = least_squares(&x, &y, None);
    fit.transform = "log rms ~ log beta".to_string();
    Ok(fit)
}

/// Maximum absolute off-diagonal Pearson correlation across block columns.
pub fn independence_test(block_samples: &[Vec<f64>]) -> Result<f64> {
    let b = block_samples.len();
    if b < 2 {
        return Err(Error::InvalidInput(
            "independence test needs >= 2 blocks".into(),
        ));
    }
    let n = block_samples[0].len();
    if n < 1000 {
        return Err(Error::InvalidInput(format!(
            "independence test needs >= 1000 replicates, have {n}"
        )));
    }
    if block_samples.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput(
            "independence test: ragged sample matrix".into(),
        ));
    }
    let mut means = vec![0.0; b];
    let mut sds = vec![0.0; b];
    for (j, col) in block_samples.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "independence test: block {j} is degenerate (constant)"
            )));
        }
        means[j] = mean;
        sds[j] = var.sqrt();
    }
    let mut max_rho = 0.0f64;
    for j in 0..b {
        for k in (j + 1)..b {
            let mut cov = 0.0;
            for i in 0..n {
                cov += (block_samples[j][i] - means[j]) * (block_samples[k][i] - means[k]);
            }
            let rho = cov / (n as f64 * sds[j] * sds[k]);
            max_rho = max_rho.max(rho.abs());
        }
    }
    Ok(max_rho)
}

/// Least-squares slope of log(statistic) against t.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub n_points: usize,
}

impl LyapunovFit {
    /// One-sided test: slope < 0 at 95% confidence.
    pub fn negative_at_95(&self) -> bool {
        if self.n_points < 3 || !(self.slope_se > 0.0) {
            return false;
        }
        let t = StudentsT::new(0.0, 1.0, (self.n_points - 2) as f64).unwrap();
        self.slope + t.inverse_cdf(0.95) * self.slope_se < 0.0
    }

    /// Two-sided: zero slope inside the 95% interval.
    pub fn consistent_with_zero_at_95(&self) -> bool {
        if self.n_points < 3 || !(self.slope_se > 0.0) {
            return false;
        }
        let t = StudentsT::new(0.0, 1.0, (self.n_points - 2) as f64).unwrap();
        self.slope.abs() <= t.inverse_cdf(0.975) * self.slope_se
    }
}

/// Fit `log statistic ~ t` over a trajectory of `(t, statistic)` points.
pub fn estimate_lyapunov(trajectory: &[(f64, f64)]) -> Result<LyapunovFit> {
    if trajectory.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "lyapunov fit needs >= 5 time points, have {}",
            trajectory.len()
        )));
    }
    if let Some(&(t, s)) = trajectory.iter().find(|(_, s)| !(*s > 0.0)) {
        return Err(Error::NonPositive(format!(
            "statistic must be positive, got {s} at t = {t}"
        )));
    }
    let x: Vec<f64> = trajectory.iter().map(|(t, _)| *t).collect();
    let y: Vec<f64> = trajectory.iter().map(|(_, s)| s.ln()).collect();
    let fit = least_squares(&x, &y, None);
    Ok(LyapunovFit {
        slope: fit.exponent,
        slope_se: fit.exponent_se,
        intercept: fit.intercept,
        n_points: trajectory.len(),
    })
}

/// Empirical raw moment with a seeded bootstrap percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Raw moments `E|X|^k` for each requested order (k <= 8), with bootstrap
/// 95% intervals from `n_bootstrap` resamples driven by `seed`.
pub fn estimate_moments(
    samples: &[f64],
    orders: &[u32],
    n_bootstrap: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "estimate_moments: empty samples".into(),
        ));
    }
    if let Some(&k) = orders.iter().find(|&&k| k > 8 || k == 0) {
        return Err(Error::InvalidInput(format!(
            "moment order must lie in 1..=8, got {k}"
        )));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(orders.len());
    for &k in orders {
        let value = samples.iter().map(|s| s.abs().powi(k as i32)).sum::<f64>() / n as f64;
        let mut boots: Vec<f64> = (0..n_bootstrap)
            .map(|_| {
                let mut sum = 0.0;
                for _ in 0..n {
                    sum += samples[rng.gen_range(0..n)].abs().powi(k as i32);
                }
                sum / n as f64
            })
            .collect();
        boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (ci_lo, ci_hi) = if boots.is_empty() {
            (value, value)
        } else {
            let lo = boots[(0.025 * (n_bootstrap - 1) as f64).round() as usize];
            let hi = boots[(0.975 * (n_bootstrap - 1) as f64).round() as usize];
            (lo, hi)
        };
        out.push(MomentEstimate {
            order: k,
            value,
            ci_lo,
            ci_hi,
        });
    }
    Ok(out)
}

/// `mean exp(alpha * (log_+ u)^{3/2})` with `log_+ u = log(max(u, e))`.
pub fn exp_log_functional(samples: &[f64], alpha: f64) -> f64 {
    let n = samples.len() as f64;
    samples
        .iter()
        .map(|&u| (alpha * u.max(std::f64::consts::E).ln().powf(1.5)).exp())
        .sum::<f64>()
        / n
}

/// Smooth compactly supported probability weights on the grid: a standard
/// bump of total width `width` centered at `center`, normalized so that
/// `sum(psi_i) * dx = 1`.
pub fn bump_weights(grid: &GridSpec, center: f64, width: f64) -> Vec<f64> {
    let half = width / 2.0;
    let mut w: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            let y = (grid.position(i) - center) / half;
            if y.abs() < 1.0 {
                (-1.0 / (1.0 - y * y)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = w.iter().sum::<f64>() * grid.dx;
    if mass > 0.0 {
        for v in &mut w {
            *v /= mass;
        }
    }
    w
}

/// Streaming mean/variance accumulator whose merge is associative and
/// commutative, so replicate shards can be combined in any order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: MomentAccumulator) -> MomentAccumulator {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        MomentAccumulator { count, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::Distribution;

    #[test]
    fn tail_of_all_small_samples() {
        let samples = vec![0.1; 2000];
        let est = estimate_tail(&samples, &[1.0]).unwrap();
        assert_eq!(est[0].p_hat, 0.0);
        assert!(est[0].ci_hi > 0.0);
        assert_eq!(est[0].ci_lo, 0.0);
    }

    #[test]
    fn tail_matches_gaussian_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..400_000).map(|_| normal.sample(&mut rng)).collect();
        let est = estimate_tail(&samples, &[1.0]).unwrap()[0];
        // P{Z >= 1} ~ 0.1587
        let truth = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(1.0);
        assert!(
            est.ci_lo <= truth && truth <= est.ci_hi,
            "CI [{}, {}] misses {truth}",
            est.ci_lo,
            est.ci_hi
        );
        assert!((est.p_hat - truth).abs() < 0.01);
    }

    #[test]
    fn wilson_width_shrinks_like_sqrt_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let big: Vec<f64> = (0..80_000).map(|_| normal.sample(&mut rng)).collect();
        let small = &big[..40_000];
        let e_small = estimate_tail(small, &[1.5]).unwrap()[0];
        let e_big = estimate_tail(&big, &[1.5]).unwrap()[0];
        let ratio = (e_big.ci_hi - e_big.ci_lo) / (e_small.ci_hi - e_small.ci_lo);
        let expected = (0.5f64).sqrt();
        assert!(
            (ratio - expected).abs() < 0.2 * expected,
            "width ratio {ratio}"
        );
    }

    #[test]
    fn wilson_coverage_on_bernoulli() {
        // >= 93% empirical coverage at n = 10^4 for a nominal 95% interval
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for &p in &[0.01, 0.1, 0.3] {
            let mut covered = 0;
            let trials = 1000;
            for _ in 0..trials {
                let n = 10_000;
                let mut hits = 0;
                for _ in 0..n {
                    if rng.gen::<f64>() < p {
                        hits += 1;
                    }
                }
                let (lo, hi) = wilson_interval(hits, n, z);
                if lo <= p && p <= hi {
                    covered += 1;
                }
            }
            let coverage = covered as f64 / trials as f64;
            assert!(coverage >= 0.93, "coverage {coverage} at p={p}");
        }
    }

    #[test]
    fn tail_fit_recovers_exact_laws() {
        // p = exp(-lambda^2) -> slope 2 in bounded mode
        let lambdas: Vec<f64> = vec![1.0, 1.3, 1.7, 2.2, 2.9];
        let ests: Vec<TailEstimate> = lambdas
            .iter()
            .map(|&l| TailEstimate {
                lambda: l,
                p_hat: (-l * l).exp(),
                ci_lo: 0.0,
                ci_hi: 1.0,
                n: 1000,
            })
            .collect();
        let fit = fit_tail_exponent(&ests, TailMode::Bounded).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.05, "slope {}", fit.exponent);

        // p = exp(-(log lambda)^{3/2}) -> slope 1.5 in pam mode
        let lambdas: Vec<f64> = vec![3.0, 6.0, 12.0, 24.0, 48.0];
        let ests: Vec<TailEstimate> = lambdas
            .iter()
            .map(|&l| TailEstimate {
                lambda: l,
                p_hat: (-(l.ln().powf(1.5))).exp(),
                ci_lo: 0.0,
                ci_hi: 1.0,
                n: 1000,
            })
            .collect();
        let fit = fit_tail_exponent(&ests, TailMode::Pam).unwrap();
        assert!((fit.exponent - 1.5).abs() < 0.05, "slope {}", fit.exponent);
    }

    #[test]
    fn tail_fit_rejects_narrow_range() {
        let ests: Vec<TailEstimate> = [1.0, 1.2, 1.4, 1.8]
            .iter()
            .map(|&l| TailEstimate {
                lambda: l,
                p_hat: 0.1,
                ci_lo: 0.05,
                ci_hi: 0.2,
                n: 1000,
            })
            .collect();
        assert!(matches!(
            fit_tail_exponent(&ests, TailMode::Bounded),
            Err(Error::InsufficientRange(_))
        ));
    }

    #[test]
    fn sup_fit_recovers_planted_law() {
        let r_values: Vec<f64> = (0..8).map(|k| 4.0 * 2f64.powi(k)).collect();
        let samples: Vec<Vec<f64>> = r_values
            .iter()
            .map(|&r| {
                let v = 3.0 * r.ln().sqrt();
                vec![v, v + 1e-9, v - 1e-9]
            })
            .collect();
        let fit = fit_sup_scaling(&r_values, &samples, SupMode::Bounded).unwrap();
        assert!((fit.exponent - 3.0).abs() < 0.01);
        assert!(fit.r2 > 0.999);
        assert!(fit.rejects_constant_at_95());
    }

    #[test]
    fn sup_fit_on_gaussian_block_maxima() {
        // iid maxima: the sup of N ~ R Gaussians grows like sqrt(2 log N)
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let r_values: Vec<f64> = (0..8).map(|k| 8.0 * 2f64.powi(k)).collect();
        let samples: Vec<Vec<f64>> = r_values
            .iter()
            .map(|&r| {
                (0..200)
                    .map(|_| {
                        (0..r as usize)
                            .map(|_| normal.sample(&mut rng))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect()
            })
            .collect();
        let fit = fit_sup_scaling(&r_values, &samples, SupMode::Bounded).unwrap();
        assert!(fit.exponent > 0.0);
        assert!(fit.r2 > 0.95, "r2 {}", fit.r2);
        assert!(fit.rejects_constant_at_95());
    }

    #[test]
    fn sup_fit_range_checks() {
        let r = vec![1.0, 2.0, 4.0, 8.0];
        let s: Vec<Vec<f64>> = r.iter().map(|_| vec![1.0, 1.1]).collect();
        assert!(matches!(
            fit_sup_scaling(&r, &s, SupMode::Bounded),
            Err(Error::InsufficientRange(_))
        ));
    }

    #[test]
    fn coupling_fit_exact_and_noisy() {
        let betas = vec![4.0, 8.0, 16.0, 32.0, 64.0];
        let rms: Vec<f64> = betas.iter().map(|&b: &f64| b.powf(-0.5)).collect();
        let fit = estimate_coupling_decay(&betas, &rms).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);

        // 5% multiplicative perturbation
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noisy: Vec<f64> = betas
            .iter()
            .map(|&b: &f64| 2.0 * b.powf(-0.5) * (1.0 + 0.05 * (rng.gen::<f64>() - 0.5)))
            .collect();
        let fit = estimate_coupling_decay(&betas, &noisy).unwrap();
        assert!((fit.exponent + 0.5).abs() < 0.1, "slope {}", fit.exponent);
    }

    #[test]
    fn coupling_fit_guards() {
        assert!(matches!(
            estimate_coupling_decay(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.5, 0.3, 0.2]),
            Err(Error::InsufficientRange(_))
        ));
        assert!(matches!(
            estimate_coupling_decay(&[1.0, 2.0, 4.0, 8.0], &[1.0, 0.5, 0.0, 0.2]),
            Err(Error::NonPositive(_))
        ));
    }

    #[test]
    fn independence_identical_columns() {
        let col: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.7).sin()).collect();
        let rho = independence_test(&[col.clone(), col]).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independence_null_distribution() {
        // independent Gaussian columns at n = 10^4 stay below 3/sqrt(n) in
        // >= 95% of reruns
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let n = 10_000;
        let mut passes = 0;
        let runs = 40;
        for run in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
            let cols: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            if independence_test(&cols).unwrap() < 3.0 / (n as f64).sqrt() {
                passes += 1;
            }
        }
        assert!(passes * 100 >= runs * 95, "{passes}/{runs} runs passed");
    }

    #[test]
    fn independence_rejects_degenerate() {
        let a: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let b = vec![1.0; 2000];
        assert!(independence_test(&[a, b]).is_err());
    }

    #[test]
    fn lyapunov_exact_exponential() {
        let traj: Vec<(f64, f64)> = (1..=6)
            .map(|k| (k as f64, (-0.3 * k as f64).exp()))
            .collect();
        let fit = estimate_lyapunov(&traj).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-12);
        assert!(fit.negative_at_95());
    }

    #[test]
    fn lyapunov_guards() {
        let traj = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.1), (5.0, 0.1)];
        assert!(matches!(
            estimate_lyapunov(&traj),
            Err(Error::NonPositive(_))
        ));
        assert!(estimate_lyapunov(&traj[..4]).is_err());
    }

    #[test]
    fn moments_of_constant_samples() {
        let samples = vec![2.0; 5000];
        let est = estimate_moments(&samples, &[1, 2, 3], 100, 7).unwrap();
        for e in est {
            assert!((e.value - 2f64.powi(e.order as i32)).abs() < 1e-12);
            assert!((e.ci_lo - e.value).abs() < 1e-12);
        }
        assert!(estimate_moments(&samples, &[9], 10, 7).is_err());
    }

    #[test]
    fn bump_is_a_probability_density_on_grid() {
        let grid = GridSpec::new(1.0, 0.004, 0.1, -4.0, 4.0, 1.0).unwrap();
        let w = bump_weights(&grid, 0.0, 1.0);
        let mass: f64 = w.iter().sum::<f64>() * grid.dx;
        assert!((mass - 1.0).abs() < 1e-12);
        // compact support of width 1
        for i in 0..grid.n_cells() {
            if grid.position(i).abs() > 0.5 {
                assert_eq!(w[i], 0.0);
            }
        }
        assert!(w.iter().all(|&v| v >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn wilson_interval_is_ordered(hits in 0usize..1000, extra in 0usize..1000) {
            let n = hits + extra + 1;
            let (lo, hi) = wilson_interval(hits, n, 1.959963984540054);
            let p = hits as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }

        #[test]
        fn shard_merge_is_order_independent(
            values in prop::collection::vec(-100.0f64..100.0, 10..200),
            cut in 1usize..9,
        ) {
            let k = ((values.len() * cut) / 10).clamp(1, values.len() - 1);
            let (a, b) = values.split_at(k);
            let mut acc_a = MomentAccumulator::default();
            let mut acc_b = MomentAccumulator::default();
            for &v in a { acc_a.push(v); }
            for &v in b { acc_b.push(v); }
            let ab = acc_a.merge(acc_b);
            let ba = acc_b.merge(acc_a);
            prop_assert!((ab.mean - ba.mean).abs() <= 1e-12 * ab.mean.abs().max(1.0));
            prop_assert!((ab.variance() - ba.variance()).abs() <= 1e-12 * ab.variance().abs().max(1.0));

            let mut whole = MomentAccumulator::default();
            for &v in &values { whole.push(v); }
            prop_assert!((ab.mean - whole.mean).abs() <= 1e-10 * whole.mean.abs().max(1.0));
            prop_assert!((ab.variance() - whole.variance()).abs() <= 1e-10 * whole.variance().abs().max(1.0));
        }
    }
}
