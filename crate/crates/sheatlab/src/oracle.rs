//! Deterministic ground truth for second moments: the Volterra renewal
//! equation with the weakly singular Abel kernel,
//!
//! ```text
//! f(t) = 1 + coeff * integral_0^t f(s) (4 pi kappa (t-s))^{-1/2} ds,
//! ```
//!
//! its iterated-integral lower bounds, and exact moments of the Gaussian
//! comparison solution for constant noise coefficients.
//!
//! The `(t-s)^{-1/2}` singularity is handled by product integration: `f`
//! is taken piecewise linear on the time grid and the kernel is integrated
//! exactly against each linear segment.

use crate::error::{Error, Result};
use crate::heatkernel::gaussian_even_moment;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalParams {
    pub kappa: f64,
    /// Forcing coefficient: `eps0^2` for the additive lower chain,
    /// `c^2` for the multiplicative second moment.
    pub coeff: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl RenewalParams {
    pub fn new(kappa: f64, coeff: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "renewal kappa must be positive, got {kappa}"
            )));
        }
        if !coeff.is_finite() || coeff < 0.0 {
            return Err(Error::InvalidInput(format!(
                "renewal coeff must be nonnegative, got {coeff}"
            )));
        }
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "renewal t_end must be positive, got {t_end}"
            )));
        }
        if n_steps < 100 {
            return Err(Error::InvalidInput(format!(
                "renewal n_steps must be >= 100, got {n_steps}"
            )));
        }
        Ok(RenewalParams {
            kappa,
            coeff,
            t_end,
            n_steps,
        })
    }

    /// Kernel multiplier: `coeff / sqrt(4 pi kappa)`.
    fn c(&self) -> f64 {
        self.coeff / (4.0 * std::f64::consts::PI * self.kappa).sqrt()
    }

    /// Rate parameter of the closed-form candidate: `coeff / (2 sqrt(kappa))`.
    pub fn lambda(&self) -> f64 {
        self.coeff / (2.0 * self.kappa.sqrt())
    }
}

/// The solved renewal curve on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RenewalCurve {
    pub fn value_at_end(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Exact integrals of `(T - s)^{-1/2}` against the linear hat functions of
/// a segment at lag `d` behind the target, on a uniform grid of step `h`:
/// the segment is `[T - d h, T - (d-1) h]`. Returns the weights multiplying
/// the left and right node values.
///
/// On a uniform grid the weights depend only on the lag, so they are
/// precomputed once per operator application.
fn lag_weights(n: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut w_left = vec![0.0; n + 1];
    let mut w_right = vec![0.0; n + 1];
    for d in 1..=n {
        let ra = (d as f64 * h).sqrt();
        let rb = ((d - 1) as f64 * h).sqrt();
        // m0 = int (T-s)^{-1/2} ds, m1 = int (s-a)(T-s)^{-1/2} ds over the segment
        let m0 = 2.0 * (ra - rb);
        let m1 = d as f64 * h * m0 - (2.0 / 3.0) * (ra.powi(3) - rb.powi(3));
        w_right[d] = m1 / h;
        w_left[d] = m0 - w_right[d];
    }
    (w_left, w_right)
}

/// Apply the Abel-kernel Volterra operator `g(t_i) = int_0^{t_i} f(s)
/// k(t_i - s) ds` with `k(u) = (4 pi kappa u)^{-1/2}`, on the grid values
/// of a piecewise-linear `f`.
fn apply_abel_operator(values: &[f64], h: f64, kernel_scale: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let (w_left, w_right) = lag_weights(n, h);
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        let mut acc = 0.0;
        for j in 0..i {
            let d = i - j;
            acc += w_left[d] * values[j] + w_right[d] * values[j + 1];
        }
        out[i] = kernel_scale * acc;
    }
    out
}

fn solve_direct(params: &RenewalParams, n: usize) -> Vec<f64> {
    let h = params.t_end / n as f64;
    let c = params.c();
    let (w_left, w_right) = lag_weights(n, h);
    let mut f = vec![1.0; n + 1];
    // forward substitution: the newest node's own weight stays implicit
    let self_weight = w_right[1];
    for i in 1..=n {
        let mut acc = w_left[1] * f[i - 1];
        for j in 0..i.saturating_sub(1) {
            let d = i - j;
            acc += w_left[d] * f[j] + w_right[d] * f[j + 1];
        }
        f[i] = (1.0 + c * acc) / (1.0 - c * self_weight);
    }
    f
}

/// Solve the renewal equation by product integration. The resolution is
/// verified by internal refinement: solving at `n_steps` and `2 n_steps`
/// must agree to 1e-6 relative at `t_end`.
pub fn renewal_second_moment(params: &RenewalParams) -> Result<RenewalCurve> {
    let n = params.n_steps;
    let coarse = solve_direct(params, n);
    let fine = solve_direct(params, 2 * n);
    let fc = *coarse.last().unwrap();
    let ff = *fine.last().unwrap();
    if (fc - ff).abs() > 1e-6 * ff.abs() {
        return Err(Error::NonConvergence(format!(
            "renewal refinement gap {:.3e} exceeds 1e-6 at t_end (n = {n})",
            (fc - ff).abs() / ff.abs()
        )));
    }
    let h = params.t_end / (2 * n) as f64;
    Ok(RenewalCurve {
        times: (0..=2 * n).map(|i| i as f64 * h).collect(),
        values: fine,
    })
}

/// Solve the same equation by Picard (fixed-point) iteration on the same
/// quadrature grid; an independent route to the same discrete solution.
pub fn picard_second_moment(params: &RenewalParams) -> Result<RenewalCurve> {
    let n = 2 * params.n_steps;
    let h = params.t_end / n as f64;
    let c = params.c();
    let mut f = vec![1.0; n + 1];
    for iter in 0..200 {
        let applied = apply_abel_operator(&f, h, c);
        let mut next = vec![1.0; n + 1];
        let mut change = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..=n {
            next[i] += applied[i];
            change = change.max((next[i] - f[i]).abs());
            scale = scale.max(next[i].abs());
        }
        f = next;
        if change <= 1e-10 * scale {
            return Ok(RenewalCurve {
                times: (0..=n).map(|i| i as f64 * h).collect(),
                values: f,
            });
        }
        let _ = iter;
    }
    Err(Error::NonConvergence(
        "picard iteration did not converge within 200 iterations".into(),
    ))
}

/// Closed-form candidate `exp(lambda^2 t) (1 + erf(lambda sqrt(t)))` with
/// `lambda = coeff / (2 sqrt(kappa))`.
pub fn renewal_closed_form(params: &RenewalParams, t: f64) -> f64 {
    let lambda = params.lambda();
    (lambda * lambda * t).exp() * (1.0 + statrs::function::erf::erf(lambda * t.sqrt()))
}

/// The `(l+1)`-fold nested integral of the Abel measure
/// `nu(t, ds) = (4 pi kappa (t-s))^{-1/2} ds`, computed by recursive
/// quadrature (no closed form is assumed).
pub fn iterated_abel_integral(l: u32, kappa: f64, t: f64) -> Result<f64> {
    if l > 12 {
        return Err(Error::InvalidInput(format!(
            "iterated integral depth l must be <= 12, got {l}"
        )));
    }
    if !kappa.is_finite() || kappa <= 0.0 || !t.is_finite() || t <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "iterated integral requires kappa, t > 0, got kappa={kappa}, t={t}"
        )));
    }
    let n = 4096usize;
    let h = t / n as f64;
    let scale = (4.0 * std::f64::consts::PI * kappa).sqrt().recip();
    let mut g = vec![1.0; n + 1];
    for _ in 0..=l {
        g = apply_abel_operator(&g, h, scale);
        g[0] = 0.0;
    }
    Ok(g[n])
}

/// Exact 2k-th moment of `1 + zeta` with `zeta ~ N(0, eps0^2 sqrt(t/(pi
/// kappa)))`, via the binomial expansion over Gaussian even moments.
pub fn constant_sigma_moments(eps0: f64, kappa: f64, t: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidInput(format!(
            "moment index k must be >= 1, got {k}"
        )));
    }
    if !eps0.is_finite() || eps0 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "eps0 must be nonnegative, got {eps0}"
        )));
    }
    if !kappa.is_finite() || kappa <= 0.0 || !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!(
            "require kappa > 0 and t >= 0, got kappa={kappa}, t={t}"
        )));
    }
    let variance = eps0 * eps0 * (t / (std::f64::consts::PI * kappa)).sqrt();
    // E(1 + zeta)^{2k} = sum_{j} C(2k, 2j) E zeta^{2j}
    let mut total = 1.0;
    for j in 1..=k {
        total += binomial(2 * k, 2 * j) * gaussian_even_moment(variance, j)?;
    }
    Ok(total)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn zero_forcing_gives_unit_curve() {
        let params = RenewalParams::new(1.0, 0.0, 1.0, 200).unwrap();
        let curve = renewal_second_moment(&params).unwrap();
        assert!(curve.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn renewal_matches_closed_form_at_lambda_one() {
        // coeff = 2, kappa = 1 gives lambda = 1; f(1) = e (1 + erf 1)
        let params = RenewalParams::new(1.0, 2.0, 1.0, 6000).unwrap();
        assert_eq!(params.lambda(), 1.0);
        let curve = renewal_second_moment(&params).unwrap();
        let expected = renewal_closed_form(&params, 1.0);
        assert!((expected - 5.00898).abs() < 1e-4, "candidate {expected}");
        let rel = (curve.value_at_end() - expected).abs() / expected;
        assert!(rel < 1e-6, "relative error {rel:.3e}");
    }

    #[test]
    fn picard_agrees_with_direct_solve() {
        let params = RenewalParams::new(1.0, 2.0, 1.0, 4000).unwrap();
        let direct = renewal_second_moment(&params).unwrap();
        let picard = picard_second_moment(&params).unwrap();
        let gap = (direct.value_at_end() - picard.value_at_end()).abs();
        assert!(gap < 1e-8 * direct.value_at_end(), "gap {gap:.3e}");
    }

    #[test]
    fn refinement_changes_little() {
        let base = RenewalParams::new(1.0, 2.0, 1.0, 4000).unwrap();
        let doubled = RenewalParams::new(1.0, 2.0, 1.0, 8000).unwrap();
        let a = renewal_second_moment(&base).unwrap().value_at_end();
        let b = renewal_second_moment(&doubled).unwrap().value_at_end();
        assert!((a - b).abs() < 1e-6 * b);
    }

    #[test]
    fn curve_is_nondecreasing_and_starts_at_one() {
        let params = RenewalParams::new(0.7, 1.3, 2.0, 4000).unwrap();
        let curve = renewal_second_moment(&params).unwrap();
        assert_eq!(curve.values[0], 1.0);
        for w in curve.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn monotone_in_coeff_and_time() {
        let f = |coeff: f64, t: f64| {
            renewal_second_moment(&RenewalParams::new(1.0, coeff, t, 4000).unwrap())
                .unwrap()
                .value_at_end()
        };
        assert!(f(1.0, 1.0) < f(2.0, 1.0));
        assert!(f(1.0, 1.0) < f(1.0, 2.0));
    }

    #[test]
    fn iterated_level_zero_is_exact() {
        // l = 0: int_0^t (4 pi kappa (t-s))^{-1/2} ds = sqrt(t/(pi kappa))
        let v = iterated_abel_integral(0, 1.0, PI).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "value {v}");
        let v2 = iterated_abel_integral(0, 2.0, 1.0).unwrap();
        assert!((v2 - (1.0 / (2.0 * PI)).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn iterated_level_one_matches_monte_carlo() {
        // 2-D Monte Carlo of the nested integral over 0 < s2 < s1 < t with
        // the substitution s1 = t(1-a^2), s2 = s1(1-b^2) that removes both
        // singularities, so the integrand is bounded and the 3-sigma CI is
        // honest.
        let kappa = 1.0;
        let t = 1.0;
        let quad = iterated_abel_integral(1, kappa, t).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xAB31);
        let norm = 4.0 * PI * kappa;
        let n = 10_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a: f64 = rng.gen::<f64>();
            let b: f64 = rng.gen::<f64>();
            let s1 = t * (1.0 - a * a);
            // ds1 = 2 t a da; (t - s1)^{-1/2} = (t a^2)^{-1/2}
            let w1 = 2.0 * t * a / (norm * t * a * a).sqrt();
            let w2 = 2.0 * s1 * b / (norm * s1 * b * b).sqrt();
            sum += w1 * w2;
            sum_sq += (w1 * w2) * (w1 * w2);
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            (quad - mean).abs() < 3.0 * se,
            "quad {quad} vs mc {mean} (se {se:.2e})"
        );
    }

    #[test]
    fn iterated_depth_limit() {
        assert!(iterated_abel_integral(13, 1.0, 1.0).is_err());
        assert!(iterated_abel_integral(12, 1.0, 1.0).is_ok());
    }

    #[test]
    fn iterated_ratios_decay() {
        let mut prev_ratio = f64::INFINITY;
        let mut prev = iterated_abel_integral(0, 1.0, 1.0).unwrap();
        for l in 1..=7 {
            let cur = iterated_abel_integral(l, 1.0, 1.0).unwrap();
            let ratio = cur / prev;
            assert!(ratio < prev_ratio, "ratio not decaying at l={l}");
            prev_ratio = ratio;
            prev = cur;
        }
    }

    #[test]
    fn renewal_dominates_truncated_neumann_sums() {
        // the renewal solution with coeff = c^2 dominates every partial sum
        // 1 + sum_{m<=L} coeff^{m+1} J_m of the iterated lower bounds
        let coeff = 1.0f64; // c = 1
        let params = RenewalParams::new(1.0, coeff, 1.0, 4000).unwrap();
        let full = renewal_second_moment(&params).unwrap().value_at_end();
        let mut partial = 1.0;
        for l in 0..=6u32 {
            partial += coeff.powi(l as i32 + 1) * iterated_abel_integral(l, 1.0, 1.0).unwrap();
            assert!(
                full >= partial - 1e-9,
                "partial sum at level {l} exceeds renewal value: {partial} > {full}"
            );
        }
    }

    #[test]
    fn log_growth_rate_stabilizes() {
        // log f(t)/t approaches the squared rate lambda^2; Cauchy difference
        // between t and 2t under 2% at large t. One curve serves both times.
        let params = RenewalParams::new(1.0, 4.0, 10.0, 49152).unwrap();
        let curve = renewal_second_moment(&params).unwrap();
        let mid = curve.values[curve.values.len() / 2];
        let r1 = mid.ln() / 5.0;
        let r2 = curve.value_at_end().ln() / 10.0;
        assert!(
            (r1 - r2).abs() / r2.abs() < 0.02,
            "rates {r1} vs {r2} differ by more than 2%"
        );
        // the exponent itself lands near lambda^2 = 4
        assert!((r2 - params.lambda().powi(2)).abs() < 0.1, "rate {r2}");
    }

    #[test]
    fn constant_sigma_moment_examples() {
        // k = 1: 1 + variance
        let v = (PI / (PI * 1.0)).sqrt(); // t = pi, kappa = 1: variance = 1
        let m2 = constant_sigma_moments(1.0, 1.0, PI, 1).unwrap();
        assert!((m2 - (1.0 + v)).abs() < 1e-12);
        assert!((m2 - 2.0).abs() < 1e-12);

        // k = 2: 1 + 6v + 3v^2
        for &(eps0, kappa, t) in &[(1.0, 1.0, 1.0), (0.5, 2.0, 3.0)] {
            let var = eps0 * eps0 * (t / (PI * kappa)).sqrt();
            let m4 = constant_sigma_moments(eps0, kappa, t, 2).unwrap();
            assert!((m4 - (1.0 + 6.0 * var + 3.0 * var * var)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_sigma_moment_matches_monte_carlo() {
        let eps0 = 1.0;
        let kappa = 1.0;
        let t = 1.0;
        let var = eps0 * eps0 * (t / (PI * kappa)).sqrt();
        let exact = constant_sigma_moments(eps0, kappa, t, 2).unwrap();
        let normal = rand_distr::Normal::new(1.0, var.sqrt()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x4E4);
        let n = 10_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
            let x4 = x.powi(4);
            sum += x4;
            sum_sq += x4 * x4;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mc {mean} vs exact {exact}");
    }

    #[test]
    fn params_validation() {
        assert!(RenewalParams::new(0.0, 1.0, 1.0, 200).is_err());
        assert!(RenewalParams::new(1.0, -1.0, 1.0, 200).is_err());
        assert!(RenewalParams::new(1.0, 1.0, 0.0, 200).is_err());
        assert!(RenewalParams::new(1.0, 1.0, 1.0, 99).is_err());
    }
}
