//! Explicit dual solutions certifying the revenue upper bounds, verified
//! numerically: boundary conditions, the derivative cap, and the
//! integrated dual objective against its closed form. Also the exact
//! combinatorial identity behind the uniform objective and the simplex
//! volume/moment constants.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::bounds;
use crate::error::{Error, Result};
use crate::gamma::{self, GammaProfile};
use crate::numeric::halton_point;

/// Residuals and objective agreement from a dual verification run.
#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    /// Worst violation of the boundary conditions.
    pub max_boundary_residual: f64,
    /// Worst violation of the sum-of-partials cap (0 when none).
    pub max_derivative_residual: f64,
    /// Cells whose interior crosses a kink surface; skipped by the
    /// derivative check, still integrated in the objective.
    pub cells_skipped_at_kinks: usize,
    /// Cells whose midpoints passed through the derivative check.
    pub cells_checked: usize,
    pub objective_numeric: f64,
    pub objective_closed_form: f64,
    /// |numeric - closed| / closed.
    pub relative_gap: f64,
}

// ---------------------------------------------------------------------------
// Uniform dual
// ---------------------------------------------------------------------------

/// The dual solution for m i.i.d. uniform items.
///
/// With v_j = [x_j > 1/(m+1)], k = Σ v_j and c_k = 1 - k/(m+1):
/// z_j = 0 where v_j = 0, else max{0, (m+1)/k · (x_j - c_k)}.
#[derive(Clone, Copy, Debug)]
pub struct UniformDual {
    m: usize,
}

impl UniformDual {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        UniformDual { m }
    }

    fn threshold(&self) -> f64 {
        1.0 / (self.m as f64 + 1.0)
    }

    fn k_of(&self, x: &[f64]) -> usize {
        let thr = self.threshold();
        x.iter().filter(|&&v| v > thr).count()
    }

    /// z_j(x).
    pub fn z(&self, j: usize, x: &[f64]) -> f64 {
        let thr = self.threshold();
        if x[j] <= thr {
            return 0.0;
        }
        let k = self.k_of(x) as f64;
        let c_k = 1.0 - k / (self.m as f64 + 1.0);
        ((self.m as f64 + 1.0) / k * (x[j] - c_k)).max(0.0)
    }

    /// Analytic ∂z_j/∂x_j away from the kink surfaces: either 0 or (m+1)/k.
    pub fn z_partial(&self, j: usize, x: &[f64]) -> f64 {
        let thr = self.threshold();
        if x[j] <= thr {
            return 0.0;
        }
        let k = self.k_of(x) as f64;
        let c_k = 1.0 - k / (self.m as f64 + 1.0);
        if x[j] > c_k {
            (self.m as f64 + 1.0) / k
        } else {
            0.0
        }
    }

    fn z_sum(&self, x: &[f64]) -> f64 {
        (0..self.m).map(|j| self.z(j, x)).sum()
    }

    /// Kink locations along every axis: i/(m+1) for i = 1..=m (the
    /// indicator threshold and every reachable c_k).
    pub fn axis_kinks(&self) -> Vec<f64> {
        (1..=self.m).map(|i| i as f64 / (self.m as f64 + 1.0)).collect()
    }
}

/// Verifies the uniform dual on an m-dimensional grid:
/// boundary values on the faces, the derivative cap m+1 by central
/// differences (h = half the grid step) at midpoints of kink-free cells,
/// and the integrated objective against m(1+m²)/(2(1+m)²).
pub fn verify_uniform_dual(m: usize, grid: usize) -> Result<FeasibilityReport> {
    if !(1..=4).contains(&m) {
        return Err(Error::InvalidParameter(
            "full uniform verification supports 1 <= m <= 4".into(),
        ));
    }
    if grid < 50 {
        return Err(Error::InvalidParameter("need at least 50 grid cells per axis".into()));
    }
    let dual = UniformDual::new(m);
    let kinks = dual.axis_kinks();
    let g = grid as f64;
    let h = 0.5 / g;

    // --- derivative cap + skip accounting, parallel over the first axis ---
    let per_slice: Vec<(f64, usize, usize)> = (0..grid)
        .into_par_iter()
        .map(|i0| {
            let mut max_resid = 0.0f64;
            let mut skipped = 0usize;
            let mut checked = 0usize;
            let mut idx = vec![0usize; m];
            idx[0] = i0;
            let mut x = vec![0.0f64; m];
            loop {
                let crossing = idx.iter().any(|&i| {
                    let lo = i as f64 / g;
                    let hi = (i + 1) as f64 / g;
                    kinks.iter().any(|&kv| lo < kv && kv < hi)
                });
                if crossing {
                    skipped += 1;
                } else {
                    for (d, &i) in idx.iter().enumerate() {
                        x[d] = (i as f64 + 0.5) / g;
                    }
                    let mut sum = 0.0;
                    for j in 0..m {
                        let mid = x[j];
                        x[j] = mid + h;
                        let up = dual.z(j, &x);
                        x[j] = mid - h;
                        let dn = dual.z(j, &x);
                        x[j] = mid;
                        sum += (up - dn) / (2.0 * h);
                    }
                    max_resid = max_resid.max(sum - (m as f64 + 1.0));
                    checked += 1;
                }
                // advance the multi-index over axes 1..m
                let mut axis = 1;
                loop {
                    if axis >= m {
                        break;
                    }
                    idx[axis] += 1;
                    if idx[axis] < grid {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
                if axis >= m {
                    break;
                }
            }
            (max_resid, skipped, checked)
        })
        .collect();
    let (max_derivative_residual, cells_skipped, cells_checked) = per_slice
        .iter()
        .fold((0.0f64, 0usize, 0usize), |(r, s, c), &(r2, s2, c2)| {
            (r.max(r2), s + s2, c + c2)
        });

    let total_cells = grid.pow(m as u32);
    if cells_skipped * 5 > total_cells {
        return Err(Error::GridTooCoarse { skipped: cells_skipped, total: total_cells });
    }

    // --- boundary faces: z_j(0, ·) = 0 and z_j(1, ·) = 1 ---
    let mut max_boundary = 0.0f64;
    let face_dims = vec![grid; m - 1];
    for j in 0..m {
        for_each_index(&face_dims, |rest| {
            let mut x = Vec::with_capacity(m);
            let mut r = rest.iter();
            for d in 0..m {
                if d == j {
                    x.push(0.0);
                } else {
                    x.push((*r.next().unwrap() as f64 + 0.5) / g);
                }
            }
            max_boundary = max_boundary.max(dual.z(j, &x).abs());
            x[j] = 1.0;
            max_boundary = max_boundary.max((1.0 - dual.z(j, &x)).max(0.0));
        });
    }

    // --- objective: midpoint rule, exact because cells are split at the
    //     kink surfaces and z is linear on kink-free boxes ---
    let objective: f64 = (0..grid)
        .into_par_iter()
        .map(|i0| {
            let mut idx = vec![0usize; m];
            idx[0] = i0;
            let mut total = 0.0;
            loop {
                let lo: Vec<f64> = idx.iter().map(|&i| i as f64 / g).collect();
                let hi: Vec<f64> = idx.iter().map(|&i| (i + 1) as f64 / g).collect();
                total += integrate_split(&|x| dual.z_sum(x), &lo, &hi, &kinks, 40);
                let mut axis = 1;
                loop {
                    if axis >= m {
                        break;
                    }
                    idx[axis] += 1;
                    if idx[axis] < grid {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
                if axis >= m {
                    break;
                }
            }
            total
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();

    let closed = bounds::uniform_upper_bound(m as u32);
    Ok(FeasibilityReport {
        max_boundary_residual: max_boundary,
        max_derivative_residual,
        cells_skipped_at_kinks: cells_skipped,
        cells_checked,
        objective_numeric: objective,
        objective_closed_form: closed,
        relative_gap: (objective - closed).abs() / closed,
    })
}

/// Midpoint integration of `f` over the box [lo, hi], recursively split
/// at any kink value lying strictly inside an axis range. On kink-free
/// boxes one midpoint evaluation is used.
fn integrate_split(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    axis_kinks: &[f64],
    depth: u32,
) -> f64 {
    if depth > 0 {
        for (axis, (&a, &b)) in lo.iter().zip(hi).enumerate() {
            for &kv in axis_kinks {
                if a < kv && kv < b {
                    let mut lo2 = lo.to_vec();
                    let mut hi2 = hi.to_vec();
                    hi2[axis] = kv;
                    let left = integrate_split(f, lo, &hi2, axis_kinks, depth - 1);
                    lo2[axis] = kv;
                    let right = integrate_split(f, &lo2, hi, axis_kinks, depth - 1);
                    return left + right;
                }
            }
        }
    }
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| 0.5 * (a + b)).collect();
    let vol: f64 = lo.iter().zip(hi).map(|(&a, &b)| b - a).product();
    f(&mid) * vol
}

fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.is_empty() {
        f(&[]);
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    loop {
        f(&idx);
        let mut axis = 0;
        loop {
            if axis >= dims.len() {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < dims[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential dual
// ---------------------------------------------------------------------------

/// The dual solution for independent exponential items:
/// z_j(x) = max{0, λ̂ x_j w^{-m} g(m, w)} with w = Σ λ_j x_j, λ̂ = Π λ_j.
/// Both branches vanish on w = γ*_m, so z is continuous there.
#[derive(Clone, Debug)]
pub struct ExponentialDual {
    rates: Vec<f64>,
    rate_product: f64,
    pub profile: GammaProfile,
}

impl ExponentialDual {
    pub fn new(rates: &[f64]) -> Result<Self> {
        crate::priors::ProductPrior::exponential(rates)?;
        let profile = gamma::big_g(rates.len() as u32);
        Ok(ExponentialDual {
            rates: rates.to_vec(),
            rate_product: rates.iter().product(),
            profile,
        })
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn w(&self, x: &[f64]) -> f64 {
        self.rates.iter().zip(x).map(|(l, v)| l * v).sum()
    }

    /// z_j(x).
    pub fn z(&self, j: usize, x: &[f64]) -> f64 {
        let w = self.w(x);
        if w < self.profile.gamma_star {
            return 0.0;
        }
        self.branch_value(x[j], w).max(0.0)
    }

    /// The active branch λ̂ x_j w^{-m} g(m, w) without the max; exposed so
    /// continuity across w = γ* can be checked directly.
    pub fn branch_value(&self, x_j: f64, w: f64) -> f64 {
        let m = self.dim() as u32;
        self.rate_product * x_j * w.powi(-(m as i32)) * gamma::g(m, w)
    }

    fn z_sum(&self, x: &[f64]) -> f64 {
        let w = self.w(x);
        if w < self.profile.gamma_star {
            return 0.0;
        }
        let m = self.dim() as u32;
        let xs: f64 = x.iter().sum();
        (self.rate_product * xs * w.powi(-(m as i32)) * gamma::g(m, w)).max(0.0)
    }

    /// Right-hand side of the derivative constraint: λ̂ (m+1-w) e^{-w}.
    pub fn derivative_cap(&self, w: f64) -> f64 {
        self.rate_product * (self.dim() as f64 + 1.0 - w) * (-w).exp()
    }
}

/// Verifies the exponential dual over the truncated box
/// Π_j [0, w_max/λ_j]: zero boundary at x_j = 0, finite-difference
/// partial sums under the cap λ̂(m+1-w)e^{-w}, and the integrated
/// objective against G(m)/m!·Σ 1/λ_j.
///
/// The FD step is a small constant (1e-5 scale), not the grid step: the
/// dual meets the cap with equality for w ≥ γ*, so a grid-sized step
/// would alias O(h²) truncation error into spurious violations.
/// Objective quadrature: midpoint with kink-splitting for m ≤ 2,
/// quasi-random (Halton, 10⁷ points) for m = 3.
pub fn verify_exponential_dual(
    rates: &[f64],
    points_per_axis: usize,
    w_max: f64,
) -> Result<FeasibilityReport> {
    let dual = ExponentialDual::new(rates)?;
    let m = dual.dim();
    if m > 3 {
        return Err(Error::InvalidParameter(
            "full exponential verification supports m <= 3".into(),
        ));
    }
    if points_per_axis < 32 {
        return Err(Error::InvalidParameter("need at least 32 grid cells per axis".into()));
    }
    let gamma_star = dual.profile.gamma_star;
    if w_max < gamma_star + 40.0 {
        return Err(Error::InvalidParameter(format!(
            "w_max must be at least gamma_star + 40 = {}",
            gamma_star + 40.0
        )));
    }

    let closed = bounds::exponential_upper_bound(rates)?;
    // analytic bound on the omitted mass: the objective restricted to
    // w >= W integrates to W·Γ(m,W)/m!·Σ 1/λ_j
    let inv_sum: f64 = rates.iter().map(|r| 1.0 / r).sum();
    let tail = w_max
        * (gamma::ln_upper_incomplete_gamma(m as u32, w_max) - gamma::ln_factorial(m as u32))
            .exp()
        * inv_sum;
    let limit = 1e-6 * closed;
    if tail > limit {
        return Err(Error::TruncationInsufficient { w_max, tail, limit });
    }

    let grid = points_per_axis;
    let g = grid as f64;
    let widths: Vec<f64> = rates.iter().map(|l| w_max / l / g).collect();

    // --- derivative cap at midpoints of cells with w bounded away from γ* ---
    let per_slice: Vec<(f64, usize, usize)> = (0..grid)
        .into_par_iter()
        .map(|i0| {
            let mut max_resid = 0.0f64;
            let mut skipped = 0usize;
            let mut checked = 0usize;
            let mut idx = vec![0usize; m];
            idx[0] = i0;
            let mut x = vec![0.0f64; m];
            loop {
                let w_lo: f64 = idx
                    .iter()
                    .zip(&widths)
                    .zip(rates)
                    .map(|((&i, &wd), &l)| l * (i as f64) * wd)
                    .sum();
                let w_hi: f64 = idx
                    .iter()
                    .zip(&widths)
                    .zip(rates)
                    .map(|((&i, &wd), &l)| l * (i as f64 + 1.0) * wd)
                    .sum();
                if w_lo < gamma_star && gamma_star < w_hi {
                    skipped += 1;
                } else {
                    for (d, &i) in idx.iter().enumerate() {
                        x[d] = (i as f64 + 0.5) * widths[d];
                    }
                    let mut fd_sum = 0.0;
                    for j in 0..m {
                        let mid = x[j];
                        let h = (1e-5 * (1.0 + mid)).min(0.45 * widths[j]);
                        x[j] = mid + h;
                        let up = dual.z(j, &x);
                        x[j] = mid - h;
                        let dn = dual.z(j, &x);
                        x[j] = mid;
                        fd_sum += (up - dn) / (2.0 * h);
                    }
                    let cap = dual.derivative_cap(dual.w(&x));
                    max_resid = max_resid.max(fd_sum - cap);
                    checked += 1;
                }
                let mut axis = 1;
                loop {
                    if axis >= m {
                        break;
                    }
                    idx[axis] += 1;
                    if idx[axis] < grid {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
                if axis >= m {
                    break;
                }
            }
            (max_resid, skipped, checked)
        })
        .collect();
    let (max_derivative_residual, cells_skipped, cells_checked) = per_slice
        .iter()
        .fold((0.0f64, 0usize, 0usize), |(r, s, c), &(r2, s2, c2)| {
            (r.max(r2), s + s2, c + c2)
        });

    // --- boundary: z_j(0, x_{-j}) must be exactly zero ---
    let mut max_boundary = 0.0f64;
    let face_dims = vec![grid; m - 1];
    for j in 0..m {
        for_each_index(&face_dims, |rest| {
            let mut x = Vec::with_capacity(m);
            let mut r = rest.iter();
            for d in 0..m {
                if d == j {
                    x.push(0.0);
                } else {
                    x.push((*r.next().unwrap() as f64 + 0.5) * widths[d]);
                }
            }
            max_boundary = max_boundary.max(dual.z(j, &x).abs());
        });
    }

    // --- objective ---
    let objective = if m <= 2 {
        // kinks lie on the surface w = γ*; split cells there so the
        // midpoint rule never straddles the non-smooth set
        (0..grid)
            .into_par_iter()
            .map(|i0| {
                let mut idx = vec![0usize; m];
                idx[0] = i0;
                let mut total = 0.0;
                loop {
                    let lo: Vec<f64> =
                        idx.iter().zip(&widths).map(|(&i, &wd)| i as f64 * wd).collect();
                    let hi: Vec<f64> = idx
                        .iter()
                        .zip(&widths)
                        .map(|(&i, &wd)| (i as f64 + 1.0) * wd)
                        .collect();
                    total += integrate_split_w(&dual, &lo, &hi, 24);
                    let mut axis = 1;
                    loop {
                        if axis >= m {
                            break;
                        }
                        idx[axis] += 1;
                        if idx[axis] < grid {
                            break;
                        }
                        idx[axis] = 0;
                        axis += 1;
                    }
                    if axis >= m {
                        break;
                    }
                }
                total
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    } else {
        qmc_objective(&dual, w_max, 10_000_000)
    };

    Ok(FeasibilityReport {
        max_boundary_residual: max_boundary,
        max_derivative_residual,
        cells_skipped_at_kinks: cells_skipped,
        cells_checked,
        objective_numeric: objective,
        objective_closed_form: closed,
        relative_gap: (objective - closed).abs() / closed,
    })
}

/// Midpoint rule with recursive bisection of cells crossing w = γ*.
fn integrate_split_w(dual: &ExponentialDual, lo: &[f64], hi: &[f64], depth: u32) -> f64 {
    let w_lo = dual.w(lo);
    let w_hi = dual.w(hi);
    let gs = dual.profile.gamma_star;
    if depth > 0 && w_lo < gs && gs < w_hi {
        // bisect the widest axis (in w units)
        let (axis, _) = lo
            .iter()
            .zip(hi)
            .enumerate()
            .map(|(a, (&l, &h))| (a, (h - l) * dual.rates[a]))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let mut hi2 = hi.to_vec();
        hi2[axis] = mid;
        let mut lo2 = lo.to_vec();
        lo2[axis] = mid;
        return integrate_split_w(dual, lo, &hi2, depth - 1)
            + integrate_split_w(dual, &lo2, hi, depth - 1);
    }
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| 0.5 * (a + b)).collect();
    let vol: f64 = lo.iter().zip(hi).map(|(&a, &b)| b - a).product();
    dual.z_sum(&mid) * vol
}

/// Halton-sequence estimate of ∫ Σ z_j over the truncated box.
fn qmc_objective(dual: &ExponentialDual, w_max: f64, n: usize) -> f64 {
    let m = dual.dim();
    let his: Vec<f64> = dual.rates.iter().map(|l| w_max / l).collect();
    let vol: f64 = his.iter().product();
    let sum: f64 = (0..n)
        .into_par_iter()
        .chunks(1 << 16)
        .map(|chunk| {
            let mut pt = vec![0.0f64; m];
            let mut local = 0.0;
            for i in chunk {
                halton_point(i as u64 + 1000, &mut pt);
                let x: Vec<f64> = pt.iter().zip(&his).map(|(u, h)| u * h).collect();
                local += dual.z_sum(&x);
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    vol * sum / n as f64
}

// ---------------------------------------------------------------------------
// Exact identity and simplex moments
// ---------------------------------------------------------------------------

/// Both sides of the identity Σ_{k=1}^m C(m,k)·k²·m^{k-1}
/// = m(1+m²)(m+1)^{m-2}, evaluated in exact rational arithmetic. This is
/// the combinatorial core of the closed-form uniform objective.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub lhs: BigRational,
    pub rhs: BigRational,
    pub holds: bool,
}

pub fn uniform_objective_identity(m: u32) -> IdentityCheck {
    let big_m = BigInt::from(m);
    let mut lhs = BigInt::zero();
    let mut binom = BigInt::one(); // C(m, 0)
    let mut m_pow = BigInt::one(); // m^{k-1} at k = 1
    for k in 1..=m {
        binom = binom * (m - k + 1) / k;
        if k > 1 {
            m_pow = &m_pow * &big_m;
        }
        lhs += &binom * BigInt::from(k as u64 * k as u64) * &m_pow;
    }
    let lhs = BigRational::from_integer(lhs);

    // m(1+m²)·(m+1)^{m-2}; the exponent is negative for m = 1, so the
    // right-hand side is assembled as a rational
    let base = BigRational::from_integer(BigInt::from(m + 1));
    let mut pow = BigRational::one();
    if m >= 2 {
        for _ in 0..(m - 2) {
            pow *= &base;
        }
    } else {
        pow /= &base;
    }
    let rhs = BigRational::from_integer(&big_m * (BigInt::one() + &big_m * &big_m)) * pow;
    IdentityCheck { holds: lhs == rhs, lhs, rhs }
}

/// Volume and first coordinate moment of the simplex
/// {t ∈ [0,1]^{m-1} : Σ t_j ≤ 1}: 1/(m-1)! and 1/m!, with log forms, and
/// for m ≤ 6 a quasi-random hit-count cross-estimate from 10⁷ points.
#[derive(Clone, Debug)]
pub struct SimplexMoments {
    pub volume: f64,
    pub first_moment: f64,
    pub ln_volume: f64,
    pub ln_first_moment: f64,
    /// (volume, first moment) estimated by quasi-random hit counting.
    pub qmc_estimate: Option<(f64, f64)>,
}

pub fn simplex_moments(m: u32) -> Result<SimplexMoments> {
    if m < 2 {
        return Err(Error::InvalidParameter("simplex moments need m >= 2".into()));
    }
    let ln_volume = -gamma::ln_factorial(m - 1);
    let ln_first_moment = -gamma::ln_factorial(m);
    let qmc_estimate = if m <= 6 {
        let dims = (m - 1) as usize;
        const N: usize = 10_000_000;
        let sums: Vec<(f64, f64)> = (0..N)
            .into_par_iter()
            .chunks(1 << 16)
            .map(|chunk| {
                let mut pt = vec![0.0f64; dims];
                let mut hits = 0.0;
                let mut moment = 0.0;
                for i in chunk {
                    halton_point(i as u64 + 1000, &mut pt);
                    if pt.iter().sum::<f64>() <= 1.0 {
                        hits += 1.0;
                        moment += pt[0];
                    }
                }
                (hits, moment)
            })
            .collect();
        let (hits, moment) =
            sums.iter().fold((0.0, 0.0), |(a, b), &(h, mm)| (a + h, b + mm));
        Some((hits / N as f64, moment / N as f64))
    } else {
        None
    };
    Ok(SimplexMoments {
        volume: ln_volume.exp(),
        first_moment: ln_first_moment.exp(),
        ln_volume,
        ln_first_moment,
        qmc_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn uniform_dual_boundary_structure() {
        // z_j(0, ·) = 0 and z_j(1, ·) = 1 for arbitrary other coordinates
        let dual = UniformDual::new(3);
        let rest = [[0.1, 0.9], [0.5, 0.5], [0.81, 0.13]];
        for r in rest {
            let x0 = [0.0, r[0], r[1]];
            assert_eq!(dual.z(0, &x0), 0.0);
            let x1 = [1.0, r[0], r[1]];
            assert_abs_diff_eq!(dual.z(0, &x1), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_dual_partials_match_finite_differences() {
        let dual = UniformDual::new(2);
        // sample off-kink points; analytic partial is 0 or (m+1)/k
        let pts = [[0.1, 0.2], [0.5, 0.9], [0.9, 0.9], [0.5, 0.2], [0.99, 0.35]];
        let h = 1e-7;
        for p in pts {
            for j in 0..2 {
                let analytic = dual.z_partial(j, &p);
                assert!(analytic == 0.0 || analytic == 1.5 || analytic == 3.0);
                let mut up = p;
                up[j] += h;
                let mut dn = p;
                dn[j] -= h;
                let fd = (dual.z(j, &up) - dual.z(j, &dn)) / (2.0 * h);
                assert_abs_diff_eq!(fd, analytic, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn verify_uniform_examples() {
        let r1 = verify_uniform_dual(1, 200).unwrap();
        assert!(r1.relative_gap < 1e-3, "gap {}", r1.relative_gap);
        assert_relative_eq!(r1.objective_numeric, 0.25, max_relative = 1e-9);
        assert!(r1.max_derivative_residual <= 1e-6);
        assert!(r1.max_boundary_residual <= 1e-9);

        let r2 = verify_uniform_dual(2, 200).unwrap();
        assert!(r2.relative_gap < 1e-3, "gap {}", r2.relative_gap);
        assert!(r2.max_derivative_residual <= 1e-6);

        let r3 = verify_uniform_dual(3, 100).unwrap();
        assert!(r3.relative_gap < 5e-3, "gap {}", r3.relative_gap);
        assert!(r3.max_derivative_residual <= 1e-6);
    }

    #[test]
    fn verify_uniform_rejects_bad_inputs() {
        assert!(verify_uniform_dual(5, 100).is_err());
        assert!(verify_uniform_dual(2, 10).is_err());
    }

    #[test]
    fn exponential_dual_continuous_at_gamma_star() {
        for rates in [vec![1.0], vec![1.0, 1.0], vec![2.0, 1.0]] {
            let dual = ExponentialDual::new(&rates).unwrap();
            let gs = dual.profile.gamma_star;
            // both branch formulas nearly vanish on the kink surface
            let below = dual.branch_value(0.7, gs - 1e-9);
            let above = dual.branch_value(0.7, gs + 1e-9);
            assert_abs_diff_eq!(below, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(above, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exponential_dual_zero_at_origin_face() {
        let dual = ExponentialDual::new(&[2.0, 1.0]).unwrap();
        for x2 in [0.0, 0.5, 3.0, 10.0] {
            assert_eq!(dual.z(0, &[0.0, x2]), 0.0);
        }
    }

    #[test]
    fn verify_exponential_examples() {
        let gs1 = gamma::gamma_star(1, 1e-12);
        let r1 = verify_exponential_dual(&[1.0], 20_000, gs1 + 48.0).unwrap();
        assert!(
            (r1.objective_numeric - (-1.0f64).exp()).abs() < 1e-4,
            "objective {}",
            r1.objective_numeric
        );
        assert_eq!(r1.max_boundary_residual, 0.0);
        assert!(r1.max_derivative_residual <= 1e-9, "resid {}", r1.max_derivative_residual);

        let gs2 = gamma::gamma_star(2, 1e-12);
        let r2 = verify_exponential_dual(&[1.0, 1.0], 400, gs2 + 40.0).unwrap();
        assert!(r2.relative_gap < 1e-3, "gap {}", r2.relative_gap);
        assert!(r2.max_derivative_residual <= 1e-9, "resid {}", r2.max_derivative_residual);

        let r21 = verify_exponential_dual(&[2.0, 1.0], 400, gs2 + 40.0).unwrap();
        assert!(r21.relative_gap < 1e-3, "gap {}", r21.relative_gap);
        assert_relative_eq!(
            r21.objective_closed_form,
            0.62997157099288131735,
            max_relative = 1e-11
        );
    }

    #[test]
    fn verify_exponential_m3_qmc() {
        let gs3 = gamma::gamma_star(3, 1e-12);
        let r = verify_exponential_dual(&[1.0, 1.0, 1.0], 48, gs3 + 40.0).unwrap();
        assert!(r.relative_gap < 5e-3, "gap {}", r.relative_gap);
        assert!(r.max_derivative_residual <= 1e-9);
    }

    #[test]
    fn verify_exponential_rejects_truncation_violations() {
        let gs2 = gamma::gamma_star(2, 1e-12);
        // below the γ*+40 floor
        assert!(matches!(
            verify_exponential_dual(&[1.0, 1.0], 400, gs2 + 10.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(verify_exponential_dual(&[1.0, 1.0, 1.0, 1.0], 64, 50.0).is_err());
    }

    #[test]
    fn identity_small_cases() {
        let c1 = uniform_objective_identity(1);
        assert!(c1.holds);
        assert_eq!(c1.lhs, BigRational::from_integer(BigInt::from(1)));
        let c2 = uniform_objective_identity(2);
        assert!(c2.holds);
        assert_eq!(c2.lhs, BigRational::from_integer(BigInt::from(10)));
        let c3 = uniform_objective_identity(3);
        assert!(c3.holds);
        assert_eq!(c3.lhs, BigRational::from_integer(BigInt::from(120)));
    }

    #[test]
    fn identity_holds_exactly_up_to_thirty() {
        for m in 1..=30 {
            assert!(uniform_objective_identity(m).holds, "identity fails at m={m}");
        }
    }

    #[test]
    fn simplex_moment_closed_forms() {
        let s2 = simplex_moments(2).unwrap();
        assert_relative_eq!(s2.volume, 1.0, max_relative = 1e-14);
        assert_relative_eq!(s2.first_moment, 0.5, max_relative = 1e-14);
        let s3 = simplex_moments(3).unwrap();
        assert_relative_eq!(s3.volume, 0.5, max_relative = 1e-14);
        assert_relative_eq!(s3.first_moment, 1.0 / 6.0, max_relative = 1e-14);
        let s4 = simplex_moments(4).unwrap();
        assert_relative_eq!(s4.volume, 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(s4.first_moment, 1.0 / 24.0, max_relative = 1e-14);
        assert!(simplex_moments(1).is_err());
    }

    #[test]
    fn simplex_moments_qmc_cross_check() {
        for m in [2u32, 3, 4, 6] {
            let s = simplex_moments(m).unwrap();
            let (vol_est, mom_est) = s.qmc_estimate.unwrap();
            assert_relative_eq!(vol_est, s.volume, max_relative = 1e-3);
            assert_relative_eq!(mom_est, s.first_moment, max_relative = 1e-3);
        }
        assert!(simplex_moments(9).unwrap().qmc_estimate.is_none());
    }
}
