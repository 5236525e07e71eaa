//! Lognormal option pricing with continuous carry.
//!
//! Used by the synthetic market generator, by the vega book descriptor, and
//! by tests as an independent price oracle. Inputs are spot, strike, time to
//! expiry in years, a continuously compounded zero rate, a dividend yield,
//! and an implied volatility.

use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Carry-adjusted forward: `spot * exp((rate - div_yield) * tau)`.
pub fn forward(spot: f64, rate: f64, div_yield: f64, tau: f64) -> f64 {
    spot * ((rate - div_yield) * tau).exp()
}

fn d1_d2(fwd: f64, strike: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let sig_rt = sigma * tau.sqrt();
    let d1 = ((fwd / strike).ln() + 0.5 * sig_rt * sig_rt) / sig_rt;
    (d1, d1 - sig_rt)
}

/// True if the inputs have no optionality left (expired or zero vol); the
/// price degenerates to discounted intrinsic on the forward.
fn degenerate(sigma: f64, tau: f64) -> bool {
    tau <= 0.0 || sigma * tau.sqrt() < 1e-12
}

/// European call price.
pub fn call_price(spot: f64, strike: f64, tau: f64, rate: f64, div_yield: f64, sigma: f64) -> f64 {
    if tau <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let fwd = forward(spot, rate, div_yield, tau);
    let df = (-rate * tau).exp();
    if degenerate(sigma, tau) {
        return df * (fwd - strike).max(0.0);
    }
    let (d1, d2) = d1_d2(fwd, strike, sigma, tau);
    df * (fwd * norm_cdf(d1) - strike * norm_cdf(d2))
}

/// European put price.
pub fn put_price(spot: f64, strike: f64, tau: f64, rate: f64, div_yield: f64, sigma: f64) -> f64 {
    if tau <= 0.0 {
        return (strike - spot).max(0.0);
    }
    let fwd = forward(spot, rate, div_yield, tau);
    let df = (-rate * tau).exp();
    if degenerate(sigma, tau) {
        return df * (strike - fwd).max(0.0);
    }
    let (d1, d2) = d1_d2(fwd, strike, sigma, tau);
    df * (strike * norm_cdf(-d2) - fwd * norm_cdf(-d1))
}

/// Call delta (dividend-adjusted), in (0, 1).
pub fn call_delta(spot: f64, strike: f64, tau: f64, rate: f64, div_yield: f64, sigma: f64) -> f64 {
    if degenerate(sigma, tau) {
        let fwd = forward(spot, rate, div_yield, tau.max(0.0));
        return if fwd > strike { (-div_yield * tau.max(0.0)).exp() } else { 0.0 };
    }
    let fwd = forward(spot, rate, div_yield, tau);
    let (d1, _) = d1_d2(fwd, strike, sigma, tau);
    (-div_yield * tau).exp() * norm_cdf(d1)
}

/// Put delta (dividend-adjusted), in (-1, 0).
pub fn put_delta(spot: f64, strike: f64, tau: f64, rate: f64, div_yield: f64, sigma: f64) -> f64 {
    if degenerate(sigma, tau) {
        let fwd = forward(spot, rate, div_yield, tau.max(0.0));
        return if fwd < strike { -(-div_yield * tau.max(0.0)).exp() } else { 0.0 };
    }
    let fwd = forward(spot, rate, div_yield, tau);
    let (d1, _) = d1_d2(fwd, strike, sigma, tau);
    -(-div_yield * tau).exp() * norm_cdf(-d1)
}

/// Vega per unit volatility (not per vol point).
pub fn vega(spot: f64, strike: f64, tau: f64, rate: f64, div_yield: f64, sigma: f64) -> f64 {
    if degenerate(sigma, tau) {
        return 0.0;
    }
    let fwd = forward(spot, rate, div_yield, tau);
    let (d1, _) = d1_d2(fwd, strike, sigma, tau);
    spot * (-div_yield * tau).exp() * norm_pdf(d1) * tau.sqrt()
}
