//! Residual diagnostics: scaled residuals, a precision profile fitted to
//! them, and a QQ-correlation normality test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::error::{Error, Result};
use crate::inference::LineFit;
use crate::optim::brent_min;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    /// Raw residuals `y - alpha - beta x`.
    pub e: Vec<f64>,
    /// Raw residuals over their model standard deviation.
    pub r: Vec<f64>,
    /// Root mean square of `r` on `n - 2` degrees of freedom.
    pub sd_r: f64,
    pub sd_r_ci: (f64, f64),
    pub level: f64,
}

/// Model variance of the raw residual of sample `i` under `fit`.
///
/// Known-profile fits evaluate the profiles at the fitted latent mean; the
/// standalone fit evaluates its common profile at the observed `x`.
pub fn residual_variance(fit: &LineFit, i: usize, x: f64) -> f64 {
    match fit {
        LineFit::Known(f) => {
            let mu = f.mu_hat[i];
            f.profile_y.at(f.alpha + f.beta * mu) + f.beta * f.beta * f.profile_x.at(mu)
        }
        LineFit::Rl(f) => f.residual_variance(x),
    }
}

pub fn residuals(data: &MCDataset, fit: &LineFit) -> Result<ResidualSet> {
    residuals_at(data, fit, 0.95)
}

/// Scaled residuals of `fit`, which must have been fitted to `data`.
pub fn residuals_at(data: &MCDataset, fit: &LineFit, level: f64) -> Result<ResidualSet> {
    let n = data.n();
    if fit.mu_hat().len() != n {
        return Err(Error::data(format!(
            "fit has {} latent means but the data has {n} samples",
            fit.mu_hat().len()
        )));
    }
    let (a, b) = (fit.alpha(), fit.beta());
    let mut e = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for (i, s) in data.samples().iter().enumerate() {
        let var = residual_variance(fit, i, s.x);
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::degenerate(format!(
                "residual variance of sample {} is {var}",
                s.index
            )));
        }
        let ei = s.y - a - b * s.x;
        e.push(ei);
        r.push(ei / var.sqrt());
    }
    let (sd_r, sd_r_ci) = sd_with_ci(&r, level)?;
    Ok(ResidualSet {
        e,
        r,
        sd_r,
        sd_r_ci,
        level,
    })
}

/// `sqrt(sum r^2 / (n - 2))` and its chi-squared interval.
fn sd_with_ci(r: &[f64], level: f64) -> Result<(f64, (f64, f64))> {
    stats::z_for_level(level)?;
    let df = r.len() as f64 - 2.0;
    if df < 1.0 {
        return Err(Error::data("need at least 3 residuals"));
    }
    let sd = (r.iter().map(|v| v * v).sum::<f64>() / df).sqrt();
    let tail = (1.0 - level) / 2.0;
    let upper_q = stats::chi2_quantile(1.0 - tail, df);
    let lower_q = stats::chi2_quantile(tail, df);
    Ok((sd, (sd * (df / upper_q).sqrt(), sd * (df / lower_q).sqrt())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualProfileFit {
    pub sigma_r: f64,
    pub kappa_r: f64,
    #[serde(rename = "minus2logL")]
    pub minus2_log_l: f64,
    /// Restricted fit with `kappa_r = 0`.
    pub pooled_sd: f64,
    #[serde(rename = "minus2logL_const_sd")]
    pub minus2_log_l_const_sd: f64,
    /// Restricted fit with `sigma_r = 0`.
    pub pooled_cv: f64,
    #[serde(rename = "minus2logL_const_cv")]
    pub minus2_log_l_const_cv: f64,
    pub p_const_sd: f64,
    pub p_const_cv: f64,
    /// A restricted fit beat the unrestricted one and a statistic was set to 0.
    pub clamped: bool,
}

impl ResidualProfileFit {
    /// Modelled standard deviation of a scaled residual at `x`.
    pub fn sd_at(&self, x: f64) -> f64 {
        (self.sigma_r.powi(2) + (self.kappa_r * x).powi(2)).sqrt()
    }
}

/// -2 log likelihood of scaled residuals under `sigma_r^2 + (kappa_r x)^2`.
pub fn residual_profile_nll(x: &[f64], r: &[f64], sigma_r: f64, kappa_r: f64) -> f64 {
    x.iter()
        .zip(r)
        .map(|(xi, ri)| {
            let v = sigma_r * sigma_r + (kappa_r * xi).powi(2);
            ri * ri / v + v.ln()
        })
        .sum()
}

/// Fits `sigma_r, kappa_r` by maximum likelihood and tests both one-parameter
/// special cases.
///
/// Writing the variance as `c ((1 - w) + w x^2 / m)` with `m` the mean of
/// `x^2`, the scale `c` has a closed form for each shape `w` in `[0, 1]`,
/// and the restricted models are exactly the two endpoints.
pub fn fit_residual_profile(x: &[f64], r: &[f64]) -> Result<ResidualProfileFit> {
    let n = x.len();
    if r.len() != n {
        return Err(Error::data("x and r differ in length"));
    }
    if n < 4 {
        return Err(Error::data(format!("residual profile needs at least 4 samples, got {n}")));
    }
    if x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("residual profile needs positive finite x"));
    }
    if r.iter().any(|v| !v.is_finite()) || r.iter().all(|&v| v == 0.0) {
        return Err(Error::degenerate("scaled residuals are all zero or non-finite"));
    }
    let nf = n as f64;
    let m = x.iter().map(|v| v * v).sum::<f64>() / nf;
    let shape = |w: f64, xi: f64| (1.0 - w) + w * xi * xi / m;
    let scale_at = |w: f64| {
        x.iter()
            .zip(r)
            .map(|(&xi, ri)| ri * ri / shape(w, xi))
            .sum::<f64>()
            / nf
    };
    let profiled = |w: f64| {
        let c = scale_at(w);
        let v = nf + nf * c.ln() + x.iter().map(|&xi| shape(w, xi).ln()).sum::<f64>();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Coarse grid to pick the basin, then Brent inside it; the endpoints
    // stay candidates.
    const GRID: usize = 64;
    let grid: Vec<(f64, f64)> = (0..=GRID)
        .map(|k| {
            let w = k as f64 / GRID as f64;
            (w, profiled(w))
        })
        .collect();
    let k_best = (0..=GRID)
        .min_by(|&i, &j| grid[i].1.total_cmp(&grid[j].1))
        .expect("grid is non-empty");
    let lo = grid[k_best.saturating_sub(1)].0;
    let hi = grid[(k_best + 1).min(GRID)].0;
    let (w_in, f_in) = brent_min(profiled, lo, hi, 1e-12, 200);
    let (w, f) = [(w_in, f_in), grid[0], grid[GRID]]
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    if !f.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 200,
            alpha: f64::NAN,
            beta: f64::NAN,
        });
    }
    let c = scale_at(w);
    let sigma_r = (c * (1.0 - w)).max(0.0).sqrt();
    let kappa_r = (c * w / m).max(0.0).sqrt();

    let pooled_sd = (r.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let pooled_cv = (x.iter().zip(r).map(|(xi, ri)| (ri / xi).powi(2)).sum::<f64>() / nf).sqrt();
    let l_sd = residual_profile_nll(x, r, pooled_sd, 0.0);
    let l_cv = residual_profile_nll(x, r, 0.0, pooled_cv);
    let l_full = residual_profile_nll(x, r, sigma_r, kappa_r);
    let mut clamped = false;
    let mut stat = |restricted: f64| {
        let d = restricted - l_full;
        if d < 0.0 {
            clamped = true;
            0.0
        } else {
            d
        }
    };
    let (d_sd, d_cv) = (stat(l_sd), stat(l_cv));
    Ok(ResidualProfileFit {
        sigma_r,
        kappa_r,
        minus2_log_l: l_full,
        pooled_sd,
        minus2_log_l_const_sd: l_sd,
        pooled_cv,
        minus2_log_l_const_cv: l_cv,
        p_const_sd: stats::chi2_sf(d_sd, 1.0),
        p_const_cv: stats::chi2_sf(d_cv, 1.0),
        clamped,
    })
}

/// Normal quantiles at Blom plotting positions `(i - 3/8) / (n + 1/4)`.
pub fn blom_quantiles(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n)
        .map(|i| stats::norm_quantile((i as f64 - 0.375) / (nf + 0.25)))
        .collect()
}

/// Correlation between the sorted values and the Blom quantiles.
pub fn qq_correlation(r: &[f64]) -> Result<f64> {
    let mut sorted = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.first() == sorted.last() {
        return Err(Error::degenerate("QQ correlation of constant residuals is undefined"));
    }
    Ok(stats::pearson(&sorted, &blom_quantiles(r.len())))
}

/// Monte-Carlo null distribution of the QQ correlation for one sample size.
#[derive(Debug, Clone)]
pub struct QqReference {
    n: usize,
    sorted: Vec<f64>,
}

pub const QQ_DRAWS: usize = 10_000;

impl QqReference {
    pub fn new(n: usize, draws: usize, seed: u64) -> Result<Self> {
        if n < 10 {
            return Err(Error::data(format!("QQ test needs at least 10 residuals, got {n}")));
        }
        if draws == 0 {
            return Err(Error::domain("QQ reference needs at least one draw"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = vec![0.0; n];
        let mut sorted: Vec<f64> = (0..draws)
            .map(|_| {
                for v in sample.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                qq_correlation(&sample).unwrap_or(1.0)
            })
            .collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { n, sorted })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Share of the reference at or below the observed correlation, with the
    /// observation counted in.
    pub fn p_value(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.n {
            return Err(Error::data(format!(
                "reference built for {} residuals, got {}",
                self.n,
                r.len()
            )));
        }
        let obs = qq_correlation(r)?;
        let below = self.sorted.partition_point(|&v| v <= obs);
        Ok((1 + below) as f64 / (self.sorted.len() + 1) as f64)
    }
}

/// QQ-correlation normality p-value against a fresh seeded reference.
pub fn qq_normality(r: &[f64], seed: u64) -> Result<f64> {
    QqReference::new(r.len(), QQ_DRAWS, seed)?.p_value(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::known::fit_known;
    use crate::profiles::PrecisionProfile;

    #[test]
    fn scaled_residual_by_hand() {
        // alpha 0, beta 1, g = h = 2, sample (1, 4): e = 3, r = 3 / 2.
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [4.0, 2.0, 3.0, 4.0];
        let p = PrecisionProfile::constant_variance(2.0).unwrap();
        let mut fit = fit_known(&MCDataset::from_xy(&xs, &ys).unwrap(), &p, &p).unwrap();
        fit.alpha = 0.0;
        fit.beta = 1.0;
        let d = MCDataset::from_xy(&xs, &ys).unwrap();
        let res = residuals(&d, &LineFit::Known(fit)).unwrap();
        assert_eq!(res.e[0], 3.0);
        assert_eq!(res.r[0], 1.5);
    }

    #[test]
    fn exact_line_residuals_vanish() {
        let xs: Vec<f64> = (1..=6).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let d = MCDataset::from_xy(&xs, &ys).unwrap();
        let p = PrecisionProfile::constant_variance(1.0).unwrap();
        let res = residuals(&d, &LineFit::Known(fit_known(&d, &p, &p).unwrap())).unwrap();
        assert!(res.e.iter().chain(&res.r).all(|v| v.abs() < 1e-12));
        assert!(res.sd_r < 1e-12);
    }

    #[test]
    fn restricted_likelihood_by_hand() {
        assert_eq!(residual_profile_nll(&[1.0, 2.0], &[1.0, -1.0], 1.0, 0.0), 2.0);
    }

    #[test]
    fn unrestricted_never_worse() {
        let x: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let r: Vec<f64> = x.iter().map(|xi| ((xi * 1.7).sin()) * (0.5 + 0.05 * xi)).collect();
        let f = fit_residual_profile(&x, &r).unwrap();
        assert!(f.minus2_log_l <= f.minus2_log_l_const_sd);
        assert!(f.minus2_log_l <= f.minus2_log_l_const_cv);
        assert!(!f.clamped);
        assert!((0.0..=1.0).contains(&f.p_const_sd) && (0.0..=1.0).contains(&f.p_const_cv));
    }

    #[test]
    fn residual_profile_matches_grid_search() {
        let x: Vec<f64> = (1..=25).map(|i| 2.0 * i as f64).collect();
        let r: Vec<f64> = x.iter().enumerate().map(|(i, xi)| {
            let s = if i % 2 == 0 { 1.0 } else { -1.3 };
            s * (1.0 + 0.04 * xi) * (1.0 + 0.3 * ((i as f64) * 0.9).cos())
        }).collect();
        let f = fit_residual_profile(&x, &r).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let (s, k) = (i as f64 * 0.005, j as f64 * 0.0005);
                best = best.min(residual_profile_nll(&x, &r, s, k));
            }
        }
        assert!(f.minus2_log_l <= best + 1e-9, "{} vs {best}", f.minus2_log_l);
        assert!(best - f.minus2_log_l < 1e-2);
    }

    #[test]
    fn qq_on_blom_quantiles_is_one() {
        let q = blom_quantiles(25);
        assert!((qq_correlation(&q).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(qq_normality(&q, 3).unwrap(), 1.0);
        assert!(qq_correlation(&[1.0; 12]).is_err());
        assert!(qq_normality(&q[..9], 3).is_err());
    }

    #[test]
    fn sd_interval_contains_estimate() {
        let r: Vec<f64> = (0..40).map(|i| ((i * 7 % 13) as f64 - 6.0) / 4.0).collect();
        let (sd, (lo, hi)) = sd_with_ci(&r, 0.95).unwrap();
        assert!(lo < sd && sd < hi);
    }
}
