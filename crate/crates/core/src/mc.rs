//! Monte Carlo oracle for the Heston dynamics.
//!
//! Full-truncation Euler: the variance is floored at zero inside both the
//! drift and the diffusion, the stored state may go negative. The drift
//! step uses the integrated reversion factor `1 - e^{-kappa dt}` in place of
//! `kappa dt`, so the conditional mean is exact for a non-negative state. Paths are split
//! into fixed-size blocks; block `j` draws from a ChaCha8 stream seeded with
//! the master seed and stream id `j`, and block statistics are reduced in
//! block order, so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston::HestonParams;
use crate::vstoxx::IndexWindow;

pub const BLOCK_PATHS: usize = 4096;
/// Paths advanced together inside a block.
const LANES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Pair every Gaussian draw with its negation.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed,
            antithetic: false,
        }
    }

    /// Budget used by the oracle acceptance runs: 10^6 paths, 500 steps.
    pub fn oracle(seed: u64) -> Self {
        Self::new(1_000_000, 500, seed)
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::Invalid(format!(
                "Monte Carlo needs at least one path and one step, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `x` lies within `k` standard errors of the estimate.
    pub fn brackets(&self, x: f64, k: f64) -> bool {
        (x - self.value).abs() <= k * self.std_error
    }
}

/// Terminal state of one simulated path.
#[derive(Debug, Clone, Copy)]
pub struct PathEnd {
    /// `ln(S_tau / F)`
    pub log_moneyness: f64,
    /// Variance floored at zero.
    pub variance: f64,
    /// Trapezoidal integral of the floored variance over `[0, tau]`.
    pub integrated_variance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    n: usize,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn merge(mut self, other: Moments) -> Moments {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
        self
    }
}

struct Stepper {
    dt: f64,
    sqrt_dt: f64,
    /// `1 - e^{-kappa dt}`: the mean-reversion fraction integrated over a step.
    revert: f64,
    theta: f64,
    xi: f64,
    rho: f64,
    rho_bar: f64,
    v0: f64,
    n_steps: usize,
    joint: bool,
}

impl Stepper {
    fn new(p: &HestonParams<f64>, tau: f64, n_steps: usize, joint: bool) -> Self {
        let dt = tau / n_steps as f64;
        Self {
            dt,
            sqrt_dt: dt.sqrt(),
            revert: -(-p.kappa * dt).exp_m1(),
            theta: p.theta,
            xi: p.xi,
            rho: p.rho,
            rho_bar: (1.0 - p.rho * p.rho).max(0.0).sqrt(),
            v0: p.v0,
            n_steps,
            joint,
        }
    }

    /// Simulates `LANES` paths in lockstep. With `antithetic`, lane `2i + 1`
    /// uses the negated draws of lane `2i`.
    fn run(&self, rng: &mut ChaCha8Rng, antithetic: bool) -> [PathEnd; LANES] {
        let mut x = [0.0f64; LANES];
        let mut v = [self.v0; LANES];
        let mut iv = [0.0f64; LANES];
        let mut z1 = [0.0f64; LANES];
        let mut z2 = [0.0f64; LANES];
        for _ in 0..self.n_steps {
            draw(rng, &mut z1, antithetic);
            if self.joint {
                draw(rng, &mut z2, antithetic);
            }
            for l in 0..LANES {
                let vp = v[l].max(0.0);
                let sv = vp.sqrt() * self.sqrt_dt;
                let zv = if self.joint {
                    x[l] += -0.5 * vp * self.dt + sv * z1[l];
                    self.rho * z1[l] + self.rho_bar * z2[l]
                } else {
                    z1[l]
                };
                let v_next = v[l] + (self.theta - vp) * self.revert + self.xi * sv * zv;
                iv[l] += 0.5 * (vp + v_next.max(0.0)) * self.dt;
                v[l] = v_next;
            }
        }
        std::array::from_fn(|l| PathEnd {
            log_moneyness: x[l],
            variance: v[l].max(0.0),
            integrated_variance: iv[l],
        })
    }
}

fn draw(rng: &mut ChaCha8Rng, z: &mut [f64; LANES], antithetic: bool) {
    if antithetic {
        for pair in z.chunks_exact_mut(2) {
            let g: f64 = rng.sample(StandardNormal);
            pair[0] = g;
            pair[1] = -g;
        }
    } else {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn block_sizes(n_paths: usize) -> Vec<usize> {
    let full = n_paths / BLOCK_PATHS;
    let rest = n_paths % BLOCK_PATHS;
    let mut sizes = vec![BLOCK_PATHS; full];
    if rest > 0 {
        sizes.push(rest);
    }
    sizes
}

/// Runs the simulation and averages `payoff` over paths. With antithetic
/// variates each sample is the mean over a pair, and a block of `m` paths
/// holds `ceil(m / 2)` pairs.
fn estimate<F>(
    p: &HestonParams<f64>,
    tau: f64,
    cfg: &McConfig,
    joint: bool,
    payoff: F,
) -> Result<McEstimate>
where
    F: Fn(&PathEnd) -> f64 + Sync,
{
    cfg.validate()?;
    p.validate()?;
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
    }
    let stepper = Stepper::new(p, tau, cfg.n_steps, joint);
    let sizes = block_sizes(cfg.n_paths);
    let partial: Vec<Moments> = sizes
        .par_iter()
        .enumerate()
        .map(|(j, &size)| {
            let mut rng = block_rng(cfg.seed, j);
            let mut m = Moments::default();
            let mut remaining = size;
            while remaining > 0 {
                let ends = stepper.run(&mut rng, cfg.antithetic);
                let take = remaining.min(LANES);
                if cfg.antithetic {
                    for pair in ends[..take.next_multiple_of(2)].chunks_exact(2) {
                        m.push(0.5 * (payoff(&pair[0]) + payoff(&pair[1])));
                    }
                } else {
                    for end in &ends[..take] {
                        m.push(payoff(end));
                    }
                }
                remaining -= take;
            }
            m
        })
        .collect();
    let total = partial.into_iter().fold(Moments::default(), Moments::merge);
    let n = total.n as f64;
    let mean = total.sum / n;
    let var = if total.n > 1 {
        ((total.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    })
}

/// Floored terminal variance samples, in path order.
pub fn simulate_terminal_variance(
    params: &HestonParams<f64>,
    tau: f64,
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    params.validate()?;
    let stepper = Stepper::new(params, tau, cfg.n_steps, false);
    let sizes = block_sizes(cfg.n_paths);
    let blocks: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(j, &size)| {
            let mut rng = block_rng(cfg.seed, j);
            let mut out = Vec::with_capacity(size);
            while out.len() < size {
                let ends = stepper.run(&mut rng, cfg.antithetic);
                let take = (size - out.len()).min(LANES);
                out.extend(ends[..take].iter().map(|e| e.variance));
            }
            out
        })
        .collect();
    Ok(blocks.concat())
}

/// Monte Carlo futures price `E[100 sqrt(a v_tau + b)]`.
pub fn mc_vstoxx_future(params: &HestonParams<f64>, tau: f64, cfg: &McConfig) -> Result<McEstimate> {
    let w = IndexWindow::new(params);
    estimate(params, tau, cfg, false, |end| {
        100.0 * w.variance(end.variance).sqrt()
    })
}

/// Monte Carlo estimate of the expected average variance over `[0, tau]`.
pub fn mc_average_variance(params: &HestonParams<f64>, tau: f64, cfg: &McConfig) -> Result<McEstimate> {
    if !(tau > 0.0) {
        return Err(Error::domain("averaging window must be positive"));
    }
    estimate(params, tau, cfg, false, |end| end.integrated_variance / tau)
}

/// Monte Carlo undiscounted call price.
pub fn mc_call(
    params: &HestonParams<f64>,
    forward: f64,
    strike: f64,
    tau: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    estimate(params, tau, cfg, true, |end| {
        (forward * end.log_moneyness.exp() - strike).max(0.0)
    })
}

/// Monte Carlo `E[S_tau]`, which must reproduce the forward.
pub fn mc_forward(params: &HestonParams<f64>, forward: f64, tau: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(params, tau, cfg, true, |end| forward * end.log_moneyness.exp())
}

/// Real and imaginary parts of `E[exp(i u ln(S_tau / F))]`.
pub fn mc_characteristic_fn(
    params: &HestonParams<f64>,
    u: f64,
    tau: f64,
    cfg: &McConfig,
) -> Result<(McEstimate, McEstimate)> {
    let re = estimate(params, tau, cfg, true, |end| (u * end.log_moneyness).cos())?;
    let im = estimate(params, tau, cfg, true, |end| (u * end.log_moneyness).sin())?;
    Ok((re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> HestonParams<f64> {
        HestonParams::new(2.0, 0.04, 0.5, -0.7, 0.09).unwrap()
    }

    #[test]
    fn zero_vol_of_vol_reverts_exactly() {
        let p = HestonParams::new(20.0, 0.04, 0.0, 0.0, 0.9).unwrap();
        let tau = 0.1;
        let v = simulate_terminal_variance(&p, tau, &McConfig::new(64, 7, 1)).unwrap();
        let exact = p.expected_variance(tau);
        for x in v {
            assert!((x - exact).abs() < 1e-14, "{x} vs {exact}");
        }
    }

    #[test]
    fn samples_are_non_negative() {
        let p = HestonParams::new(0.5, 0.02, 3.0, -0.5, 0.02).unwrap();
        let v = simulate_terminal_variance(&p, 0.5, &McConfig::new(5000, 100, 3)).unwrap();
        assert!(v.iter().all(|x| *x >= 0.0));
        assert_eq!(v.len(), 5000);
    }

    #[test]
    fn one_step_at_zero_maturity_gives_index() {
        let p = reference();
        let est = mc_vstoxx_future(&p, 0.0, &McConfig::new(1000, 1, 5)).unwrap();
        assert!((est.value - crate::vstoxx::vstoxx_index(&p)).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = McConfig::new(10_000, 20, 42);
        let a = mc_vstoxx_future(&reference(), 0.1, &cfg).unwrap();
        let b = mc_vstoxx_future(&reference(), 0.1, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let c = mc_vstoxx_future(&reference(), 0.1, &McConfig::new(10_000, 20, 43)).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = McConfig::new(3 * BLOCK_PATHS + 17, 10, 9);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_call(&reference(), 100.0, 100.0, 0.5, &cfg).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| mc_call(&reference(), 100.0, 100.0, 0.5, &cfg).unwrap());
        assert_eq!(single.value.to_bits(), multi.value.to_bits());
    }

    #[test]
    fn antithetic_does_not_shift_mean() {
        let p = reference();
        let plain = mc_vstoxx_future(&p, 0.1, &McConfig::new(100_000, 50, 11)).unwrap();
        let anti = mc_vstoxx_future(
            &p,
            0.1,
            &McConfig {
                antithetic: true,
                ..McConfig::new(100_000, 50, 11)
            },
        )
        .unwrap();
        let combined = (plain.std_error.powi(2) + anti.std_error.powi(2)).sqrt();
        assert!((plain.value - anti.value).abs() < 3.0 * combined);
    }

    #[test]
    fn std_error_scales_with_inverse_sqrt_paths() {
        let p = reference();
        let small = mc_vstoxx_future(&p, 0.1, &McConfig::new(50_000, 20, 1)).unwrap();
        let large = mc_vstoxx_future(&p, 0.1, &McConfig::new(200_000, 20, 1)).unwrap();
        let ratio = large.std_error / small.std_error;
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn invalid_budget_is_rejected() {
        assert!(mc_vstoxx_future(&reference(), 0.1, &McConfig::new(0, 10, 1)).is_err());
        assert!(mc_vstoxx_future(&reference(), 0.1, &McConfig::new(10, 0, 1)).is_err());
    }
}
