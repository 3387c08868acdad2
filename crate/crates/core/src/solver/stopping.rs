//! Translation-invariant stopping objective for exponential service.

use crate::quadrature::{integrate, DEFAULT_REL_TOL};

/// `G(τ) = ∫₀^τ e^{−λt} (t − ρ + λ h_I(t)) dt + e^{−λτ} (κ_p + τ/λ)`.
///
/// Only meaningful when service is Exponential(λ); used to cross-check the
/// preemption threshold found by policy iteration.
pub fn exp_stopping_objective<H: Fn(f64) -> f64>(
    tau: f64,
    rho: f64,
    h_idle: H,
    lambda: f64,
    kappa_p: f64,
) -> f64 {
    let boundary = (-lambda * tau).exp() * (kappa_p + tau / lambda);
    if tau <= 0.0 {
        return boundary;
    }
    let body = integrate(
        |t| (-lambda * t).exp() * (t - rho + lambda * h_idle(t)),
        0.0,
        tau,
        DEFAULT_REL_TOL,
    );
    body + boundary
}
