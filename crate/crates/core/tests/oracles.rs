//! Closed-form pricers against the Monte Carlo oracle at moderate budgets.

use vstoxx_core::blackscholes::{black_price, implied_vol};
use vstoxx_core::heston::heston_call;
use vstoxx_core::mc::{mc_call, mc_forward, mc_vstoxx_future, McConfig};
use vstoxx_core::vstoxx::{jensen_bound, vstoxx_future, vstoxx_index};
use vstoxx_core::{HestonParams, OptionKind};

fn budget(seed: u64) -> McConfig {
    McConfig::new(200_000, 250, seed)
}

#[test]
fn futures_formula_within_three_std_errors() {
    let cases = [
        (HestonParams::new(2.0, 0.04, 0.6, -0.7, 0.06).unwrap(), 21.0),
        (HestonParams::new(8.0, 0.09, 1.5, -0.5, 0.03).unwrap(), 35.0),
        (HestonParams::new(0.5, 0.02, 0.3, 0.0, 0.1).unwrap(), 7.0),
    ];
    for (i, (p, days)) in cases.iter().enumerate() {
        let tau = days / 365.0;
        let f = vstoxx_future(p, tau).unwrap();
        let mc = mc_vstoxx_future(p, tau, &budget(i as u64)).unwrap();
        assert!(mc.brackets(f, 3.0), "case {i}: formula {f}, mc {} ± {}", mc.value, mc.std_error);
        assert!(f < jensen_bound(p, tau));
    }
}

#[test]
fn call_formula_within_three_std_errors() {
    let p = HestonParams::new(3.0, 0.05, 0.8, -0.7, 0.04).unwrap();
    let tau = 0.25;
    for (i, strike) in [80.0, 100.0, 115.0].into_iter().enumerate() {
        let cf = heston_call(&p, 100.0, strike, tau).unwrap();
        let mc = mc_call(&p, 100.0, strike, tau, &budget(10 + i as u64)).unwrap();
        assert!(mc.brackets(cf, 3.0), "K={strike}: cf {cf}, mc {} ± {}", mc.value, mc.std_error);
    }
}

#[test]
fn simulated_spot_is_a_martingale() {
    let p = HestonParams::new(1.5, 0.06, 1.2, -0.9, 0.08).unwrap();
    let mc = mc_forward(&p, 3500.0, 0.5, &budget(3)).unwrap();
    assert!(mc.brackets(3500.0, 3.0), "{} ± {}", mc.value, mc.std_error);
}

#[test]
fn vanishing_vol_of_vol_recovers_black() {
    let p = HestonParams::new(2.0, 0.04, 1e-4, 0.0, 0.09).unwrap();
    let tau = 0.5;
    let sigma = (p.expected_total_variance(tau) / tau).sqrt();
    for strike in [70.0, 100.0, 140.0] {
        let cf = heston_call(&p, 100.0, strike, tau).unwrap();
        let black = black_price(100.0, strike, tau, sigma, OptionKind::Call).unwrap();
        assert!((cf - black).abs() < 1e-4 * black.max(1e-2), "K={strike}: {cf} vs {black}");
        let iv = implied_vol(cf, 100.0, strike, tau, OptionKind::Call).unwrap();
        assert!((iv - sigma).abs() < 1e-5);
    }
}

#[test]
fn short_maturity_future_is_the_index() {
    let p = HestonParams::new(4.0, 0.05, 0.9, -0.6, 0.07).unwrap();
    let mc = mc_vstoxx_future(&p, 0.0, &McConfig::new(8192, 1, 0)).unwrap();
    assert!((mc.value - vstoxx_index(&p)).abs() < 1e-9);
    assert!(mc.std_error < 1e-6);
}
