//! Closed-form upper bounds on the optimal revenue and the derived
//! approximation-ratio bounds for separate selling, full bundling, and
//! the proportional lottery.

use crate::error::{Error, Result};
use crate::gamma;
use crate::mechanisms::{self, BundleOptimum};
use crate::priors::ProductPrior;

/// Optimal revenue for m i.i.d. uniform items is at most
/// m(1 + m²) / (2(1 + m)²).
pub fn uniform_upper_bound(m: u32) -> f64 {
    let mf = m as f64;
    mf * (1.0 + mf * mf) / (2.0 * (1.0 + mf) * (1.0 + mf))
}

/// The buyer's expected surplus m/2; a trivial bound the dual improves
/// on by the factor (m+1)²/(m²+1).
pub fn surplus_bound_uniform(m: u32) -> f64 {
    m as f64 / 2.0
}

/// Optimal revenue for independent exponential items is at most
/// G(m)/m! · Σ_j 1/λ_j.
pub fn exponential_upper_bound(rates: &[f64]) -> Result<f64> {
    ProductPrior::exponential(rates)?;
    let profile = gamma::big_g(rates.len() as u32);
    let inv_sum: f64 = rates.iter().map(|r| 1.0 / r).sum();
    Ok(profile.ln_g_over_m_factorial.exp() * inv_sum)
}

/// Upper bound on Rev/SRev for uniform items: 2(1 + m²)/(1 + m)², < 2.
pub fn ratio_separate_uniform(m: u32) -> f64 {
    let mf = m as f64;
    2.0 * (1.0 + mf * mf) / ((1.0 + mf) * (1.0 + mf))
}

/// Upper bound on Rev/BRev for uniform items; tends to 1 as m grows.
pub fn ratio_bundle_uniform(m: u32) -> Result<f64> {
    Ok(uniform_upper_bound(m) / mechanisms::brev_uniform(m)?.revenue)
}

pub fn ratio_bundle_uniform_with_precision(m: u32, bits: u32) -> Result<f64> {
    Ok(uniform_upper_bound(m) / mechanisms::brev_uniform_with_precision(m, bits)?.revenue)
}

/// Upper bound on Rev/SRev for exponential items: G(m)·e/m!, < e.
pub fn ratio_separate_exponential(m: u32) -> f64 {
    let profile = gamma::big_g(m);
    (profile.ln_g_over_m_factorial + 1.0).exp()
}

/// The two ratio forms for the proportional lottery, on rates sorted
/// into nonincreasing order.
#[derive(Clone, Debug)]
pub struct ProportionalRatio {
    /// (1 + λ₁/λ₂ + … + λ₁/λ_m)/m.
    pub mean_form: f64,
    /// λ₁/λ_m.
    pub max_form: f64,
    /// Indices of the input rates in the sorted (descending) order used.
    pub order: Vec<usize>,
}

/// Approximation-ratio bounds for the proportional lottery. Input rates
/// are sorted internally (descending); the permutation is recorded.
pub fn ratio_proportional(rates: &[f64]) -> Result<ProportionalRatio> {
    ProductPrior::exponential(rates)?;
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[b].partial_cmp(&rates[a]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| rates[i]).collect();
    let top = sorted[0];
    let m = sorted.len() as f64;
    let mean_form = sorted.iter().map(|r| top / r).sum::<f64>() / m;
    let max_form = top / sorted[sorted.len() - 1];
    Ok(ProportionalRatio { mean_form, max_form, order })
}

/// Which valuation setting a report is about.
#[derive(Clone, Debug, PartialEq)]
pub enum Setting {
    UniformIid { m: u32 },
    ExponentialIndep { rates: Vec<f64> },
}

/// Everything the bound computations say about one setting.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub setting: Setting,
    pub upper_bound: f64,
    pub surplus_bound: f64,
    pub srev: f64,
    pub brev: Option<f64>,
    pub bundle_price: Option<f64>,
    pub ratio_sep: f64,
    pub ratio_bundle: Option<f64>,
}

/// Bound report for m i.i.d. uniform items.
pub fn uniform_report(m: u32) -> Result<BoundReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let BundleOptimum { price, revenue } = mechanisms::brev_uniform(m)?;
    let upper = uniform_upper_bound(m);
    Ok(BoundReport {
        setting: Setting::UniformIid { m },
        upper_bound: upper,
        surplus_bound: surplus_bound_uniform(m),
        srev: m as f64 / 4.0,
        brev: Some(revenue),
        bundle_price: Some(price),
        ratio_sep: ratio_separate_uniform(m),
        ratio_bundle: Some(upper / revenue),
    })
}

/// Bound report for independent exponential items. For i.i.d. rates the
/// bound itself is attained by the full bundle, so `brev` is the bound.
pub fn exponential_report(rates: &[f64]) -> Result<BoundReport> {
    let prior = ProductPrior::exponential(rates)?;
    let m = prior.dim() as u32;
    let upper = exponential_upper_bound(rates)?;
    let iid = rates.iter().all(|&r| r == rates[0]);
    let profile = gamma::big_g(m);
    let (brev, bundle_price) = if iid {
        (Some(upper), Some(profile.gamma_star / rates[0]))
    } else {
        (None, None)
    };
    Ok(BoundReport {
        setting: Setting::ExponentialIndep { rates: rates.to_vec() },
        upper_bound: upper,
        surplus_bound: rates.iter().map(|r| 1.0 / r).sum(),
        srev: mechanisms::srev(&prior),
        brev,
        bundle_price,
        ratio_sep: ratio_separate_exponential(m),
        ratio_bundle: if iid { Some(1.0) } else { None },
    })
}
