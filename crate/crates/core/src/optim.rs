//! Derivative-free minimizers: Nelder-Mead simplex and Brent's 1-D method.

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge length along each coordinate.
    pub step: Vec<f64>,
    /// Stop once the largest vertex distance from the best vertex (max norm)
    /// falls below this.
    pub tol_diameter: f64,
    /// Also require the function spread across the simplex to fall below this.
    pub tol_f: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the standard reflection/expansion/contraction/
/// shrink coefficients (1, 2, 1/2, 1/2). Non-finite values are treated as +inf.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_mapped(f, x0, opts, |x, out| out.copy_from_slice(x))
}

/// As [`nelder_mead`], but the diameter test is taken on `map(x)` rather
/// than on the search coordinates. Useful when a search coordinate is a
/// logarithm whose natural value can sit on a numerically flat stretch.
pub fn nelder_mead_mapped<F, M>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
    map: M,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
    M: Fn(&[f64], &mut [f64]),
{
    let dim = x0.len();
    assert_eq!(opts.step.len(), dim, "step length must match dimension");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut converged = false;
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    let mut mapped = vec![0.0; dim];
    let mut mapped_best = vec![0.0; dim];
    loop {
        // Sort vertices; ties keep their earlier position.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        map(&simplex[0], &mut mapped_best);
        let mut diameter: f64 = 0.0;
        for v in &simplex[1..] {
            map(v, &mut mapped);
            for (a, b) in mapped.iter().zip(&mapped_best) {
                diameter = diameter.max((a - b).abs());
            }
        }
        let spread = values[dim] - values[0];
        if diameter < opts.tol_diameter && spread <= opts.tol_f * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..dim] {
            for (c, a) in centroid.iter_mut().zip(v) {
                *c += a / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let along = |t: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + t * (c - w);
            }
        };

        along(1.0, &mut trial);
        let fr = eval(&trial, &mut evals);
        if fr < values[0] {
            along(2.0, &mut trial2);
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                simplex[dim].clone_from(&trial2);
                values[dim] = fe;
            } else {
                simplex[dim].clone_from(&trial);
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim].clone_from(&trial);
            values[dim] = fr;
            continue;
        }
        let (t, reference) = if fr < values[dim] {
            (0.5, fr)
        } else {
            (-0.5, values[dim])
        };
        along(t, &mut trial2);
        let fc = eval(&trial2, &mut evals);
        if fc < reference || (t < 0.0 && fc <= reference) {
            simplex[dim].clone_from(&trial2);
            values[dim] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].clone();
        for k in 1..=dim {
            for (a, b) in simplex[k].iter_mut().zip(&best) {
                *a = b + 0.5 * (*a - b);
            }
            values[k] = eval(&simplex[k], &mut evals);
        }
    }

    NelderMeadResult {
        x: simplex[0].clone(),
        f: values[0],
        evals,
        converged,
    }
}

/// Brent minimization of `f` on `[a, b]`. Returns `(x_min, f_min)`.
pub fn brent_min<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}


/// Root of `f` on a bracket `[a, b]` with `f(a)`, `f(b)` of opposite sign,
/// by the Illinois variant of regula falsi with bisection fallback.
pub fn bracketed_root<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "root is not bracketed");
    let mut side = 0i8;
    for _ in 0..max_iter {
        let width = (b - a).abs();
        if width <= tol * a.abs().max(b.abs()) + 1e-300 {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod root_tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = bracketed_root(|x| x * x * x - 2.0, 0.0, 3.0, 1e-15, 200);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}

/// Solves `a x = b` for a symmetric positive-definite `a` (row-major, `n x n`)
/// by Cholesky factorization. `None` when `a` is not positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Some(x)
}
