//! The upper incomplete gamma function at integer order, the function
//! g(m, w) built from it, the root γ*_m of g, and the derived constant
//! G(m) — everything the exponential revenue bound is made of.

use crate::numeric::ln_add_exp;
use crate::priors::ln_factorial_f64;

/// ln(n!).
pub fn ln_factorial(n: u32) -> f64 {
    ln_factorial_f64(n)
}

/// Regularized upper incomplete gamma Q(m, w) = Γ(m, w)/(m-1)!,
/// i.e. the probability that a Poisson(w) variable is at most m-1.
///
/// Always in [0, 1]; safe for any m.
pub fn regularized_upper_gamma(m: u32, w: f64) -> f64 {
    debug_assert!(m >= 1 && w >= 0.0);
    if w == 0.0 {
        return 1.0;
    }
    // sum_{k<m} e^{-w} w^k / k!, accumulated around the largest term in
    // log domain to avoid underflow of e^{-w} for large w
    let mut ln_term = -w; // k = 0
    let mut ln_sum = ln_term;
    for k in 1..m {
        ln_term += w.ln() - (k as f64).ln();
        ln_sum = ln_add_exp(ln_sum, ln_term);
    }
    ln_sum.exp().min(1.0)
}

/// ln Γ(m, w) for the integer-order upper incomplete gamma.
pub fn ln_upper_incomplete_gamma(m: u32, w: f64) -> f64 {
    ln_factorial(m - 1) + regularized_upper_gamma(m, w).ln()
}

/// Γ(m, w) = (m-1)! e^{-w} Σ_{k<m} w^k/k!.
///
/// Overflows to infinity past m ≈ 171; use the log variant there.
pub fn upper_incomplete_gamma(m: u32, w: f64) -> f64 {
    ln_upper_incomplete_gamma(m, w).exp()
}

/// g(m, w) = Γ(m+1, w) - (m+1) Γ(m, w).
pub fn g(m: u32, w: f64) -> f64 {
    g_over_factorial(m, w) * ln_factorial(m - 1).exp()
}

/// Equivalent form g(m, w) = w^m e^{-w} - Γ(m, w); used as a cross-check.
pub fn g_alt(m: u32, w: f64) -> f64 {
    let ln_fm1 = ln_factorial(m - 1);
    let scaled = (m as f64 * w.ln() - w - ln_fm1).exp() - regularized_upper_gamma(m, w);
    scaled * ln_fm1.exp()
}

/// g(m, w)/(m-1)!, bounded for every m (no factorial overflow).
///
/// Γ(m+1,w)/(m-1)! = m·Q(m+1,w) and Γ(m,w)/(m-1)! = Q(m,w), so the
/// scaled value is m·Q(m+1,w) - (m+1)·Q(m,w).
pub fn g_over_factorial(m: u32, w: f64) -> f64 {
    let mf = m as f64;
    mf * regularized_upper_gamma(m + 1, w) - (mf + 1.0) * regularized_upper_gamma(m, w)
}

/// The unique positive root γ*_m of g(m, ·), located by bisection.
///
/// g is strictly increasing on [0, m+1] with g(m, 0) = -(m-1)! < 0 and
/// g(m, m+1) > 0, so [0, m+1] brackets the root; bisection converges
/// unconditionally. `tol` is the relative width of the final bracket.
pub fn gamma_star(m: u32, tol: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = m as f64 + 1.0;
    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g_over_factorial(m, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub const GAMMA_STAR_TOL: f64 = 1e-12;

/// The (m, γ*_m, G(m)) bundle with factorial-free log fields.
#[derive(Clone, Copy, Debug)]
pub struct GammaProfile {
    pub m: u32,
    /// Root of g(m, ·).
    pub gamma_star: f64,
    /// G(m) = (γ*)^{m+1} e^{-γ*}; +inf past m ≈ 130 (use the log field).
    pub big_g: f64,
    /// ln G(m).
    pub ln_big_g: f64,
    /// ln(G(m)/m!); finite and negative for every m.
    pub ln_g_over_m_factorial: f64,
}

/// Computes the profile for m items: the root γ*_m and G(m) in both the
/// closed form and log form.
pub fn big_g(m: u32) -> GammaProfile {
    let gs = gamma_star(m, GAMMA_STAR_TOL);
    let ln_big_g = (m as f64 + 1.0) * gs.ln() - gs;
    // second route: G = γ* Γ(m, γ*); the two agree because γ* is the root
    let alt = gs.ln() + ln_upper_incomplete_gamma(m, gs);
    debug_assert!(
        (ln_big_g - alt).abs() <= 1e-10,
        "G route disagreement at m={m}: {ln_big_g} vs {alt}"
    );
    GammaProfile {
        m,
        gamma_star: gs,
        big_g: ln_big_g.exp(),
        ln_big_g,
        ln_g_over_m_factorial: ln_big_g - ln_factorial(m),
    }
}
