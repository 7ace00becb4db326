//! Projected L-BFGS for box constraints with finite-difference gradients.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the iteration; the two-loop recursion runs on the remaining free
//! variables and an Armijo backtracking search runs along the projected path
//! `P(x + t d)`.

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the infinity norm of the projected gradient step is below this.
    pub pg_tol: f64,
    /// Stop when `f_k - f_{k+1} <= f_tol * max(|f_k|, |f_{k+1}|) + f_abs_tol`.
    pub f_tol: f64,
    pub f_abs_tol: f64,
    /// Central-difference step relative to `max(|x_i|, fd_floor)`.
    pub fd_step: f64,
    pub fd_floor: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 200,
            pg_tol: 1e-10,
            f_tol: 1e-12,
            f_abs_tol: 0.0,
            fd_step: 1e-6,
            fd_floor: 0.1,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective at the start point followed by every accepted iterate.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central differences with the step clamped into the box; falls back to a
/// one-sided difference when one side evaluates to a non-finite value.
pub fn fd_gradient<F>(f: &F, x: &[f64], fx: f64, lower: &[f64], upper: &[f64], cfg: &LbfgsConfig) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = cfg.fd_step * x[i].abs().max(cfg.fd_floor);
            let hi = (x[i] + h).min(upper[i]);
            let lo = (x[i] - h).max(lower[i]);
            let at = |v: f64| {
                let mut y = x.to_vec();
                y[i] = v;
                eval(f, &y)
            };
            let (fp, fm) = (at(hi), at(lo));
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) if hi > lo => (fp - fm) / (hi - lo),
                (true, false) if hi > x[i] => (fp - fx) / (hi - x[i]),
                (false, true) if lo < x[i] => (fx - fm) / (x[i] - lo),
                _ => 0.0,
            }
        })
        .collect()
}

fn dot_masked(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(free)
        .filter(|(_, f)| **f)
        .map(|((x, y), _)| x * y)
        .sum()
}

fn direction(g: &[f64], free: &[bool], hist: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(v, f)| if *f { *v } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y) in hist.iter().rev() {
        let sy = dot_masked(s, y, free);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot_masked(s, &q, free) / sy;
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y)) = hist.last() {
        let yy = dot_masked(y, y, free);
        let sy = dot_masked(s, y, free);
        if yy > 0.0 && sy > 0.0 {
            q.iter_mut().for_each(|v| *v *= sy / yy);
        }
    }
    for ((s, y), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let sy = dot_masked(s, y, free);
        if sy <= 0.0 {
            continue;
        }
        let b = dot_masked(y, &q, free) / sy;
        for i in 0..q.len() {
            if free[i] {
                q[i] += (a - b) * s[i];
            }
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` over `[lower, upper]` starting from `x0` (projected first).
pub fn minimize_box<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], cfg: &LbfgsConfig) -> LbfgsResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = eval(&f, &x);
    let mut evaluations = 1;
    let mut trace = vec![fx];
    let mut hist: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    if !fx.is_finite() {
        return LbfgsResult { x, value: fx, iterations, evaluations, converged, trace };
    }
    let mut g = fd_gradient(&f, &x, fx, lower, upper, cfg);
    evaluations += 2 * n;

    while iterations < cfg.max_iter {
        let pg = (0..n)
            .map(|i| ((x[i] - g[i]).clamp(lower[i], upper[i]) - x[i]).abs())
            .fold(0.0, f64::max);
        if pg <= cfg.pg_tol {
            converged = true;
            break;
        }
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let mut d = direction(&g, &free, &hist);
        if dot_masked(&d, &g, &free) >= 0.0 {
            hist.clear();
            d = direction(&g, &free, &hist);
        }
        if hist.is_empty() {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                d.iter_mut().for_each(|v| *v /= norm);
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lower, upper);
            if xn == x {
                break;
            }
            let fnew = eval(&f, &xn);
            evaluations += 1;
            let decrease: f64 = g.iter().zip(&xn).zip(&x).map(|((gi, a), b)| gi * (a - b)).sum();
            if fnew <= fx + 1e-4 * decrease {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }

        let Some((xn, fnew)) = accepted else {
            if hist.is_empty() {
                // Steepest descent cannot improve: numerically stationary.
                converged = true;
                break;
            }
            hist.clear();
            continue;
        };
        iterations += 1;
        let gn = fd_gradient(&f, &xn, fnew, lower, upper, cfg);
        evaluations += 2 * n;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > f64::EPSILON * yy {
            hist.push((s, y));
            if hist.len() > cfg.memory {
                hist.remove(0);
            }
        }
        let small_step = fx - fnew <= cfg.f_tol * fx.abs().max(fnew.abs()) + cfg.f_abs_tol;
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(fx);
        if small_step {
            converged = true;
            break;
        }
    }

    LbfgsResult { x, value: fx, iterations, evaluations, converged, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 10.0 * (x[1] + 0.2).powi(2) + x[0] * x[1];
        let r = minimize_box(f, &[0.9, 0.9], &[-1.0; 2], &[1.0; 2], &LbfgsConfig::default());
        let a = 0.8 / 1.95;
        let x1 = -0.2 - a / 20.0;
        assert!(r.converged);
        assert!((r.x[0] - a).abs() < 1e-6 && (r.x[1] - x1).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = minimize_box(f, &[-1.2, 1.0], &[-5.0; 2], &[5.0; 2], &LbfgsConfig::default());
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn active_bounds() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + (x[1] + 0.5).powi(2) + (x[2] + 3.0).powi(2);
        let lo = [0.0, -1.0, -1.0];
        let hi = [1.0, 1.0, 1.0];
        let r = minimize_box(f, &[0.5, 0.5, 0.5], &lo, &hi, &LbfgsConfig::default());
        assert_eq!(r.x[0], 1.0);
        assert!((r.x[1] + 0.5).abs() < 1e-7);
        assert_eq!(r.x[2], -1.0);
    }

    #[test]
    fn trace_is_monotone() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - 0.1).powi(2) + 0.1 * v.powi(4))
                .sum::<f64>()
        };
        let r = minimize_box(f, &[2.0; 5], &[-3.0; 5], &[3.0; 5], &LbfgsConfig::default());
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn start_outside_box_is_projected() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = minimize_box(f, &[7.0], &[0.5], &[2.0], &LbfgsConfig::default());
        assert_eq!(r.x[0], 0.5);
    }
}
