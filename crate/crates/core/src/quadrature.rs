//! Adaptive Gauss-Lobatto quadrature for vector-valued integrands.
//!
//! Each panel compares the 4-point Lobatto rule against its 7-point Kronrod
//! extension and splits into six sub-panels until the two agree within the
//! absolute tolerance for every component. The integrand writes all
//! components at once, which lets a caller share one expensive evaluation
//! (a characteristic function value) across many outputs (strikes).

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct LobattoConfig<T> {
    pub abs_tol: T,
    pub max_depth: usize,
    /// Number of equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
}

impl<T: Real> LobattoConfig<T> {
    pub fn new(abs_tol: T) -> Self {
        Self {
            abs_tol,
            max_depth: 24,
            initial_panels: 8,
        }
    }
}

struct Panel<'a, T, F> {
    f: F,
    dim: usize,
    cfg: &'a LobattoConfig<T>,
    scratch: Vec<Vec<T>>,
    worst: T,
    failed: bool,
}

impl<'a, T: Real, F: FnMut(T, &mut [T])> Panel<'a, T, F> {
    fn eval(&mut self, x: T) -> Vec<T> {
        let mut out = self
            .scratch
            .pop()
            .unwrap_or_else(|| vec![T::zero(); self.dim]);
        out.iter_mut().for_each(|v| *v = T::zero());
        (self.f)(x, &mut out);
        out
    }

    fn recycle(&mut self, v: Vec<T>) {
        self.scratch.push(v);
    }

    fn step(&mut self, a: T, b: T, fa: &[T], fb: &[T], depth: usize, acc: &mut [T]) {
        let two = T::lit(2.0);
        let h = (b - a) / two;
        let m = (a + b) / two;
        let alpha = T::lit((2.0f64 / 3.0).sqrt());
        let beta = T::lit(1.0 / 5.0f64.sqrt());
        let mll = m - alpha * h;
        let ml = m - beta * h;
        let mr = m + beta * h;
        let mrr = m + alpha * h;

        let fmll = self.eval(mll);
        let fml = self.eval(ml);
        let fm = self.eval(m);
        let fmr = self.eval(mr);
        let fmrr = self.eval(mrr);

        let mut worst = T::zero();
        let mut kronrod = vec![T::zero(); self.dim];
        for c in 0..self.dim {
            let lobatto = h / T::lit(6.0) * (fa[c] + fb[c] + T::lit(5.0) * (fml[c] + fmr[c]));
            let k = h / T::lit(1470.0)
                * (T::lit(77.0) * (fa[c] + fb[c])
                    + T::lit(432.0) * (fmll[c] + fmrr[c])
                    + T::lit(625.0) * (fml[c] + fmr[c])
                    + T::lit(672.0) * fm[c]);
            kronrod[c] = k;
            let err = (k - lobatto).abs();
            if !(err <= worst) {
                worst = err;
            }
        }

        let degenerate = mll <= a || b <= mrr;
        if worst <= self.cfg.abs_tol || degenerate || depth >= self.cfg.max_depth {
            if !(worst <= self.cfg.abs_tol) {
                self.failed = true;
                if !(worst <= self.worst) {
                    self.worst = worst;
                }
            }
            for (acc, k) in acc.iter_mut().zip(&kronrod) {
                *acc = *acc + *k;
            }
        } else {
            self.step(a, mll, fa, &fmll, depth + 1, acc);
            self.step(mll, ml, &fmll, &fml, depth + 1, acc);
            self.step(ml, m, &fml, &fm, depth + 1, acc);
            self.step(m, mr, &fm, &fmr, depth + 1, acc);
            self.step(mr, mrr, &fmr, &fmrr, depth + 1, acc);
            self.step(mrr, b, &fmrr, fb, depth + 1, acc);
        }
        for v in [fmll, fml, fm, fmr, fmrr] {
            self.recycle(v);
        }
    }
}

/// Integrates every component of `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: T, b: T, dim: usize, cfg: &LobattoConfig<T>) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &mut [T]),
{
    let mut panel = Panel {
        f,
        dim,
        cfg,
        scratch: Vec::new(),
        worst: T::zero(),
        failed: false,
    };
    let mut acc = vec![T::zero(); dim];
    let n = cfg.initial_panels.max(1);
    let width = (b - a) / T::lit(n as f64);
    let mut left = a;
    let mut f_left = panel.eval(left);
    for i in 0..n {
        let right = if i + 1 == n { b } else { a + width * T::lit((i + 1) as f64) };
        let f_right = panel.eval(right);
        panel.step(left, right, &f_left, &f_right, 0, &mut acc);
        panel.recycle(f_left);
        f_left = f_right;
        left = right;
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            tolerance: cfg.abs_tol.as_f64(),
            estimate: f64::NAN,
        });
    }
    if panel.failed {
        return Err(Error::Integration {
            tolerance: cfg.abs_tol.as_f64(),
            estimate: panel.worst.as_f64(),
        });
    }
    Ok(acc)
}
