//! Brute-force oracle: the optimal-revenue linear program on a small
//! discretized type space, solved by a self-contained dense simplex.
//!
//! Variables are a utility u_i >= 0 (individual rationality) and an
//! allocation vector a_i in [0,1]^m per grid type; the objective is the
//! expected payment Σ mass_i (a_i·x_i - u_i) and the constraints are all
//! pairwise incentive constraints u_i >= u_k + a_k·(x_i - x_k). The
//! pairwise constraints are activated lazily: solve on a working set,
//! enumerate every violated pair directly, add the worst, repeat until
//! none exceeds 1e-9. The returned solution therefore satisfies the full
//! constraint set independently of the solver's bookkeeping.

use crate::error::{Error, Result};
use crate::priors::{Prior, ProductPrior};

pub const DEFAULT_TRUNCATION_QUANTILE: f64 = 0.999;
pub const DEFAULT_PIVOT_CAP: usize = 1_000_000;

/// A discretized single-buyer instance.
#[derive(Clone, Debug)]
pub struct LpInstance {
    /// Grid types in lexicographic order.
    pub grid: Vec<Vec<f64>>,
    /// Probability mass per grid type (sums to 1).
    pub masses: Vec<f64>,
    pub m: usize,
}

/// Discretizes the prior onto a per-axis grid of `points_per_axis`
/// quantile-spaced points. Uniform factors get the even grid on [0,1];
/// exponential factors get quantiles of i·q/(n-1), spanning [0, F⁻¹(q)].
/// Each point carries the exact CDF mass of [x_i, x_{i+1}) — the last
/// exponential point absorbs the tail — so the discrete buyer's values
/// are rounded down and the LP value approaches the continuous optimum
/// from below as the grid refines.
pub fn build_lp(
    prior: &ProductPrior,
    points_per_axis: usize,
    trunc_quantile: f64,
) -> Result<LpInstance> {
    let m = prior.dim();
    if m > 2 {
        return Err(Error::LpTooLarge(format!(
            "pairwise constraints grow as (n^m)^2; m={m} > 2 is not supported"
        )));
    }
    let n = points_per_axis;
    if !(2..=25).contains(&n) {
        return Err(Error::LpTooLarge(format!("points_per_axis must be in 2..=25, got {n}")));
    }
    if !(0.5..1.0).contains(&trunc_quantile) {
        return Err(Error::InvalidParameter(format!(
            "truncation quantile must be in [0.5, 1), got {trunc_quantile}"
        )));
    }

    let mut axis_points = Vec::with_capacity(m);
    let mut axis_masses = Vec::with_capacity(m);
    for factor in prior.factors() {
        let q_max = match factor {
            Prior::UniformUnit => 1.0,
            Prior::Exponential { .. } => trunc_quantile,
        };
        let mut pts = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        for i in 0..n {
            let q = q_max * i as f64 / (n - 1) as f64;
            pts.push(factor.quantile(q.min(1.0 - 1e-15)));
        }
        for i in 0..n {
            let here = factor.cdf(pts[i]);
            let next = if i + 1 < n { factor.cdf(pts[i + 1]) } else { 1.0 };
            mass.push(next - here);
        }
        axis_points.push(pts);
        axis_masses.push(mass);
    }

    let total = n.pow(m as u32);
    let mut grid = Vec::with_capacity(total);
    let mut masses = Vec::with_capacity(total);
    for flat in 0..total {
        let mut point = Vec::with_capacity(m);
        let mut mass = 1.0;
        let mut rem = flat;
        for axis in (0..m).rev() {
            let i = rem % n;
            rem /= n;
            point.push(axis_points[axis][i]);
            mass *= axis_masses[axis][i];
        }
        point.reverse();
        grid.push(point);
        masses.push(mass);
    }
    let sum: f64 = masses.iter().sum();
    debug_assert!((sum - 1.0).abs() <= 1e-12, "masses sum to {sum}");
    Ok(LpInstance { grid, masses, m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Expected revenue of the optimal discrete mechanism.
    pub value: f64,
    /// Allocation vector per grid type.
    pub allocations: Vec<Vec<f64>>,
    /// Payment per grid type.
    pub payments: Vec<f64>,
    pub status: LpStatus,
    pub pivots: usize,
}

pub fn solve_lp(instance: &LpInstance) -> Result<LpSolution> {
    solve_lp_with_cap(instance, DEFAULT_PIVOT_CAP)
}

pub fn solve_lp_with_cap(instance: &LpInstance, pivot_cap: usize) -> Result<LpSolution> {
    let n = instance.grid.len();
    let m = instance.m;
    let nv = n * (1 + m); // u_0..u_{n-1}, then a_{i,j}
    let u_var = |i: usize| i;
    let a_var = |i: usize, j: usize| n + i * m + j;

    let mut objective = vec![0.0f64; nv];
    for i in 0..n {
        objective[u_var(i)] = -instance.masses[i];
        for j in 0..m {
            objective[a_var(i, j)] = instance.masses[i] * instance.grid[i][j];
        }
    }

    // working rows: allocation upper bounds first, IC rows added lazily
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            rows.push((vec![(a_var(i, j), 1.0)], 1.0));
        }
    }

    let mut pivots_used = 0usize;
    let mut status = LpStatus::Optimal;
    let mut primal = vec![0.0f64; nv];
    loop {
        let (solution, pivots) =
            dense_simplex(nv, &objective, &rows, pivot_cap - pivots_used)?;
        pivots_used += pivots;
        primal = solution;
        if pivots_used >= pivot_cap {
            status = LpStatus::IterationLimit;
            break;
        }

        // enumerate every pairwise incentive constraint directly
        let mut violated: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            let ui = primal[u_var(i)];
            for k in 0..n {
                if i == k {
                    continue;
                }
                let mut gain = -ui + primal[u_var(k)];
                for j in 0..m {
                    gain += primal[a_var(k, j)] * (instance.grid[i][j] - instance.grid[k][j]);
                }
                if gain > 1e-9 {
                    violated.push((gain, i, k));
                }
            }
        }
        if violated.is_empty() {
            break;
        }
        violated.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let take = violated.len().min(n.max(256));
        for &(_, i, k) in &violated[..take] {
            let mut coeffs = vec![(u_var(i), -1.0), (u_var(k), 1.0)];
            for j in 0..m {
                let d = instance.grid[i][j] - instance.grid[k][j];
                if d != 0.0 {
                    coeffs.push((a_var(k, j), d));
                }
            }
            rows.push((coeffs, 0.0));
        }
    }

    let value = objective.iter().zip(&primal).map(|(c, v)| c * v).sum();
    let allocations: Vec<Vec<f64>> =
        (0..n).map(|i| (0..m).map(|j| primal[a_var(i, j)]).collect()).collect();
    let payments: Vec<f64> = (0..n)
        .map(|i| {
            let gross: f64 = (0..m).map(|j| primal[a_var(i, j)] * instance.grid[i][j]).sum();
            gross - primal[u_var(i)]
        })
        .collect();
    Ok(LpSolution { value, allocations, payments, status, pivots: pivots_used })
}

/// Maximizes c·v subject to the given rows (all `<=`, rhs >= 0) and
/// v >= 0, from the all-slack basis. Dantzig pricing, switching to
/// Bland's rule after a degenerate stall so cycling is impossible.
/// Returns the primal solution and the pivot count.
fn dense_simplex(
    nv: usize,
    objective: &[f64],
    rows: &[(Vec<(usize, f64)>, f64)],
    pivot_budget: usize,
) -> Result<(Vec<f64>, usize)> {
    const EPS: f64 = 1e-9;
    let nr = rows.len();
    let cols = nv + nr + 1; // structural + slack + rhs
    let rhs_col = nv + nr;
    let mut tab = vec![0.0f64; (nr + 1) * cols];
    for (r, (coeffs, rhs)) in rows.iter().enumerate() {
        debug_assert!(*rhs >= 0.0);
        let base = r * cols;
        for &(c, v) in coeffs {
            tab[base + c] = v;
        }
        tab[base + nv + r] = 1.0;
        tab[base + rhs_col] = *rhs;
    }
    let obj_base = nr * cols;
    for (c, &v) in objective.iter().enumerate() {
        tab[obj_base + c] = v; // reduced costs; positive = improving
    }
    let mut basis: Vec<usize> = (nv..nv + nr).collect();

    let mut pivots = 0usize;
    let mut degenerate_streak = 0usize;
    let mut bland = false;
    while pivots < pivot_budget {
        // entering column
        let mut enter = None;
        if bland {
            for c in 0..nv + nr {
                if tab[obj_base + c] > EPS {
                    enter = Some(c);
                    break;
                }
            }
        } else {
            let mut best = EPS;
            for c in 0..nv + nr {
                let rc = tab[obj_base + c];
                if rc > best {
                    best = rc;
                    enter = Some(c);
                }
            }
        }
        let Some(enter) = enter else { break };

        // ratio test; ties to the lowest row index keep pivoting deterministic
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..nr {
            let a = tab[r * cols + enter];
            if a > 1e-11 {
                let ratio = tab[r * cols + rhs_col] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((_, best)) if ratio < best - 1e-12 => leave = Some((r, ratio)),
                    _ => {}
                }
            }
        }
        let Some((piv_row, ratio)) = leave else {
            return Err(Error::Numerical("simplex detected an unbounded direction".into()));
        };
        if ratio <= 1e-12 {
            degenerate_streak += 1;
            if degenerate_streak > 64 {
                bland = true;
            }
        } else {
            degenerate_streak = 0;
        }

        // pivot
        let pbase = piv_row * cols;
        let pivot = tab[pbase + enter];
        let inv = 1.0 / pivot;
        for c in 0..cols {
            tab[pbase + c] *= inv;
        }
        for r in 0..=nr {
            if r == piv_row {
                continue;
            }
            let factor = tab[r * cols + enter];
            if factor != 0.0 {
                let base = r * cols;
                for c in 0..cols {
                    tab[base + c] -= factor * tab[pbase + c];
                }
                tab[base + enter] = 0.0;
            }
        }
        basis[piv_row] = enter;
        pivots += 1;
    }

    let mut primal = vec![0.0f64; nv];
    for (r, &b) in basis.iter().enumerate() {
        if b < nv {
            primal[b] = tab[r * cols + rhs_col];
        }
    }
    Ok((primal, pivots))
}

/// Largest violation of any IR / IC / allocation-range constraint,
/// checked by direct enumeration over all grid pairs.
pub fn max_feasibility_violation(instance: &LpInstance, solution: &LpSolution) -> f64 {
    let n = instance.grid.len();
    let m = instance.m;
    let utility = |i: usize| -> f64 {
        let gross: f64 =
            (0..m).map(|j| solution.allocations[i][j] * instance.grid[i][j]).sum();
        gross - solution.payments[i]
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max(-utility(i)); // IR
        for j in 0..m {
            worst = worst.max(-solution.allocations[i][j]);
            worst = worst.max(solution.allocations[i][j] - 1.0);
        }
        for k in 0..n {
            if i == k {
                continue;
            }
            let gross_k_at_i: f64 =
                (0..m).map(|j| solution.allocations[k][j] * instance.grid[i][j]).sum();
            worst = worst.max(gross_k_at_i - solution.payments[k] - utility(i));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn uniform_instance(m: usize, n: usize) -> LpInstance {
        let prior = ProductPrior::uniform(m).unwrap();
        build_lp(&prior, n, DEFAULT_TRUNCATION_QUANTILE).unwrap()
    }

    #[test]
    fn build_uniform_grid_masses() {
        let inst = uniform_instance(1, 11);
        assert_eq!(inst.grid.len(), 11);
        // even cells of width 1/10; the top point carries the empty [1,1)
        for i in 0..10 {
            assert_relative_eq!(inst.masses[i], 0.1, max_relative = 1e-12);
        }
        assert_abs_diff_eq!(inst.masses[10], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(inst.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_product_grid_counts_and_order() {
        let inst = uniform_instance(2, 11);
        assert_eq!(inst.grid.len(), 121);
        // lexicographic: first axis major
        assert_eq!(inst.grid[0], vec![0.0, 0.0]);
        assert_eq!(inst.grid[1][0], 0.0);
        assert!(inst.grid[1][1] > 0.0);
        let mut sorted = inst.grid.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, inst.grid);
        assert_abs_diff_eq!(inst.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_exponential_grid_spans_quantile_range() {
        let prior = ProductPrior::exponential(&[1.0]).unwrap();
        let inst = build_lp(&prior, 11, 0.999).unwrap();
        assert_eq!(inst.grid.len(), 11);
        assert_eq!(inst.grid[0][0], 0.0);
        // top point at F^{-1}(0.999) = ln 1000
        assert_relative_eq!(inst.grid[10][0], 1000.0f64.ln(), max_relative = 1e-9);
        // tail mass on the top point
        assert_relative_eq!(inst.masses[10], 0.001, max_relative = 1e-9);
        assert_abs_diff_eq!(inst.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn size_limits_enforced() {
        let p3 = ProductPrior::uniform(3).unwrap();
        assert!(matches!(build_lp(&p3, 5, 0.999), Err(Error::LpTooLarge(_))));
        let p1 = ProductPrior::uniform(1).unwrap();
        assert!(build_lp(&p1, 26, 0.999).is_err());
        assert!(build_lp(&p1, 1, 0.999).is_err());
    }

    #[test]
    fn single_item_lp_matches_posted_price_enumeration() {
        // for one item the optimum is a posted price at a grid value
        for (prior, n) in [
            (ProductPrior::uniform(1).unwrap(), 21),
            (ProductPrior::exponential(&[1.0]).unwrap(), 11),
        ] {
            let inst = build_lp(&prior, n, 0.999).unwrap();
            let sol = solve_lp(&inst).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            let best_posted = inst
                .grid
                .iter()
                .map(|p| {
                    let price = p[0];
                    let demand: f64 = inst
                        .grid
                        .iter()
                        .zip(&inst.masses)
                        .filter(|(x, _)| x[0] >= price - 1e-12)
                        .map(|(_, m)| m)
                        .sum();
                    price * demand
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(sol.value, best_posted, epsilon = 1e-8);
        }
    }

    #[test]
    fn solutions_are_feasible_by_enumeration() {
        let cases: Vec<LpInstance> = vec![
            uniform_instance(1, 11),
            uniform_instance(2, 8),
            build_lp(&ProductPrior::exponential(&[1.0, 1.0]).unwrap(), 8, 0.999).unwrap(),
        ];
        for inst in &cases {
            let sol = solve_lp(inst).unwrap();
            assert!(max_feasibility_violation(inst, &sol) <= 1e-8);
        }
    }

    #[test]
    fn lp_value_nondecreasing_on_nested_grids() {
        // grids at n = 6, 11, 21 nest (steps 1/5, 1/10, 1/20)
        let mut last = 0.0;
        for n in [6, 11, 21] {
            let inst = uniform_instance(1, n);
            let v = solve_lp(&inst).unwrap().value;
            assert!(v >= last - 1e-10, "n={n}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn lp_values_stay_under_closed_form_bounds() {
        let u2 = solve_lp(&uniform_instance(2, 11)).unwrap();
        assert!(u2.value <= crate::bounds::uniform_upper_bound(2) + 0.02);
        assert!(u2.value >= 0.50);
        // regression against an independent solver (scipy HiGHS): 0.531
        assert_abs_diff_eq!(u2.value, 0.531, epsilon = 1e-8);

        let e2 = build_lp(&ProductPrior::exponential(&[1.0, 1.0]).unwrap(), 11, 0.999).unwrap();
        let e2sol = solve_lp(&e2).unwrap();
        assert!(e2sol.value <= crate::bounds::exponential_upper_bound(&[1.0, 1.0]).unwrap() + 0.02);
        assert_abs_diff_eq!(e2sol.value, 0.788017264949, epsilon = 1e-8);
    }

    #[test]
    fn deterministic_across_runs() {
        let inst = uniform_instance(2, 8);
        let a = solve_lp(&inst).unwrap();
        let b = solve_lp(&inst).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.pivots, b.pivots);
        assert_eq!(a.allocations, b.allocations);
    }

    #[test]
    fn pivot_cap_reports_iteration_limit() {
        let inst = uniform_instance(2, 8);
        let sol = solve_lp_with_cap(&inst, 3).unwrap();
        assert_eq!(sol.status, LpStatus::IterationLimit);
    }
}
