//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's optimizers or fitting routines.

#![allow(dead_code)]

use pwdeming::simlab::{generate, Estimator, SimDesign, Spacing};
use pwdeming::{MCDataset, PrecisionProfile};

/// Adaptive-coefficient simplex search (dimension-dependent expansion,
/// contraction and shrink). Returns `(x, f)` once the spread of function
/// values is below `ftol` relative or `max_evals` is spent.
pub fn simplex(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: &[f64], ftol: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    let df = d as f64;
    let (rho, chi, gamma, shrink) = (1.0, 1.0 + 2.0 / df, 0.75 - 0.5 / df, 1.0 - 1.0 / df);
    let safe = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| safe(p)).collect();
    let mut evals = d + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[d] - vals[0]).abs() <= ftol * (1.0 + vals[0].abs()) {
            break;
        }
        let cen: Vec<f64> = (0..d).map(|j| pts[..d].iter().map(|p| p[j]).sum::<f64>() / df).collect();
        let at = |t: f64| -> Vec<f64> { (0..d).map(|j| cen[j] + t * (cen[j] - pts[d][j])).collect() };
        let xr = at(rho);
        let fr = safe(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = at(rho * chi);
            let fe = safe(&xe);
            evals += 1;
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = at(rho * gamma);
                let fc = safe(&xc);
                (xc, fc)
            } else {
                let xc = at(-gamma);
                let fc = safe(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                pts[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    for j in 0..d {
                        pts[i][j] = pts[0][j] + shrink * (pts[i][j] - pts[0][j]);
                    }
                    vals[i] = safe(&pts[i]);
                }
                evals += d;
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    (pts[best].clone(), vals[best])
}

/// Restarts `simplex` from its own answer until a restart stops improving.
pub fn simplex_restarted(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: &[f64], rounds: usize) -> (Vec<f64>, f64) {
    let (mut x, mut fx) = simplex(f, x0, step, 1e-15, 200_000);
    let mut s: Vec<f64> = step.to_vec();
    for _ in 0..rounds {
        s.iter_mut().for_each(|v| *v *= 0.3);
        let (x2, f2) = simplex(f, &x, &s, 1e-16, 200_000);
        let gain = fx - f2;
        if f2 <= fx {
            x = x2;
            fx = f2;
        }
        if gain.abs() <= 1e-14 * (1.0 + fx.abs()) {
            s = step.to_vec();
            let (x3, f3) = simplex(f, &x, &s, 1e-16, 200_000);
            if f3 < fx - 1e-14 * (1.0 + fx.abs()) {
                x = x3;
                fx = f3;
                continue;
            }
            break;
        }
    }
    (x, fx)
}

/// Ordinary least squares, written out.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Known-profile fit by a different route: variances frozen at the current
/// latent means, the whole vector `(alpha, beta, mu_1..mu_n)` minimized by
/// the simplex, variances refreshed, repeated to a fixed point.
pub fn oracle_known(data: &MCDataset, gx: &PrecisionProfile, hy: &PrecisionProfile) -> (f64, f64) {
    let xs = data.xs();
    let ys = data.ys();
    let n = xs.len();
    let (mut a, mut b) = ols(&xs, &ys);
    let mut mu = xs.clone();
    for _ in 0..100 {
        let g: Vec<f64> = mu.iter().map(|&m| gx.evaluate(m).unwrap()).collect();
        let h: Vec<f64> = mu.iter().map(|&m| hy.evaluate(a + b * m).unwrap()).collect();
        let f = |v: &[f64]| {
            (0..n)
                .map(|i| {
                    let m = v[2 + i];
                    (xs[i] - m).powi(2) / g[i] + (ys[i] - v[0] - v[1] * m).powi(2) / h[i]
                })
                .sum::<f64>()
        };
        let mut x0 = vec![a, b];
        x0.extend(&mu);
        let mut step = vec![0.5, 0.02];
        step.extend(g.iter().map(|v| 0.5 * v.sqrt()));
        let (v, _) = simplex_restarted(&f, &x0, &step, 60);
        let change = (v[0] - a).abs().max((v[1] - b).abs());
        a = v[0];
        b = v[1];
        mu = v[2..].to_vec();
        if change < 1e-10 {
            break;
        }
    }
    (a, b)
}

/// Standalone Rocke-Lorenzato likelihood minimized over the whole vector
/// `(s, k, alpha, beta, mu_1..mu_n)` with `sigma = |s|`, `kappa = |k|`,
/// from several starts. Returns `(alpha, beta, value)`.
pub fn oracle_rl(data: &MCDataset, lambda: f64) -> (f64, f64, f64) {
    let xs = data.xs();
    let ys = data.ys();
    let n = xs.len();
    let f = |v: &[f64]| {
        let (s2, k2) = (v[0] * v[0], v[1] * v[1]);
        (0..n)
            .map(|i| {
                let mu = v[4 + i];
                let g = s2 + k2 * mu * mu;
                let m = v[2] + v[3] * mu;
                let h = s2 + k2 * m * m;
                (xs[i] - mu).powi(2) / (lambda * g) + (ys[i] - m).powi(2) / h + (g * h).ln()
            })
            .sum::<f64>()
    };
    let (a0, b0) = ols(&xs, &ys);
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - a0 - b0 * x).powi(2)).sum::<f64>() / n as f64).sqrt();
    let xbar = xs.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (fs, fk) in [(1.0, 1.0), (3.0, 0.3), (0.3, 3.0), (0.1, 0.1)] {
        let mut x0 = vec![0.5 * rms * fs, 0.5 * rms / xbar * fk, a0, b0];
        x0.extend(&xs);
        let mut step = vec![0.2 * rms, 0.2 * rms / xbar, 0.5 * rms, 0.02];
        step.extend(std::iter::repeat(0.5 * rms).take(n));
        let (v, fv) = simplex_restarted(&f, &x0, &step, 80);
        if best.as_ref().map_or(true, |b| fv < b.1) {
            best = Some((v, fv));
        }
    }
    let (v, fv) = best.unwrap();
    (v[2], v[3], fv)
}

pub fn design(n: usize, profile: PrecisionProfile, seed: u64) -> SimDesign {
    SimDesign {
        n,
        mu_low: 20.0,
        mu_high: 100.0,
        spacing: Spacing::Geometric,
        alpha_true: 0.0,
        beta_true: 1.0,
        profile_x: profile,
        profile_y: profile,
        replicates: 1,
        seed,
        estimators: vec![Estimator::Utopian],
        mdl: None,
        keep_raw: false,
    }
}

/// One replicate of the standard Rocke-Lorenzato design.
pub fn rl_dataset(n: usize, seed: u64, replicate: u64) -> MCDataset {
    let p = PrecisionProfile::rocke_lorenzato(5.0, 0.1).unwrap();
    generate(&design(n, p, seed), replicate).unwrap()
}
