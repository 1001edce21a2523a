//! Standard normal helpers built on the complementary error function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density φ(u).
pub fn density(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// P(X > u) for standard normal X.
pub fn upper_tail(u: f64) -> f64 {
    0.5 * libm::erfc(u * FRAC_1_SQRT_2)
}

/// P(X ≤ u) for standard normal X.
pub fn cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * FRAC_1_SQRT_2)
}

/// E[(X − u)^+] = φ(u) − u·P(X > u) for standard normal X.
///
/// For u ≥ 3 the difference is evaluated through a continued fraction for
/// the Mills ratio so the result keeps full relative precision deep in the
/// tail.
pub fn gaussian_mean_excess(u: f64) -> f64 {
    if u < 3.0 {
        return density(u) - u * upper_tail(u);
    }
    // Q(u)/φ(u) = 1/(u + c) with c = 1/(u + 2/(u + 3/(u + ...))),
    // hence 1 − u·Q/φ = c/(u + c).
    let mut tail = 0.0;
    for k in (2..=200).rev() {
        tail = k as f64 / (u + tail);
    }
    let c = 1.0 / (u + tail);
    density(u) * c / (u + c)
}
