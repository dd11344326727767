//! Euclidean projection onto `{s : 1^T (s0 - s) <= mu, 0 <= s <= s0}`.
//!
//! The minimizer is `clamp(y + lambda, 0, s0)` for the smallest `lambda >= 0`
//! at which the budget holds. The budget used, `U(lambda)`, is piecewise
//! linear and nonincreasing with two breakpoints per coordinate; `lambda` is
//! located by a median search over the breakpoints that discards half of the
//! remaining ones per round, so the expected cost is linear in `n`.

use nalgebra::DVector;

use super::DefenseBudget;
use crate::fj::OpinionVector;

/// Contribution of one coordinate to the budget used at shift `lambda`.
#[inline]
fn reduction(y: f64, cap: f64, lambda: f64) -> f64 {
    cap - (y + lambda).clamp(0.0, cap)
}

fn clamp_shifted(y: &DVector<f64>, s0: &DVector<f64>, lambda: f64) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| (y[i] + lambda).clamp(0.0, s0[i]))
}

/// Budget used by `clamp(y + lambda, 0, s0)`.
pub fn budget_used_at(y: &DVector<f64>, s0: &DVector<f64>, lambda: f64) -> f64 {
    y.iter()
        .zip(s0.iter())
        .map(|(&yi, &ci)| reduction(yi, ci, lambda))
        .sum()
}

/// Project `y` onto the feasible set of `budget`.
pub fn project(y: &DVector<f64>, budget: &DefenseBudget) -> OpinionVector {
    let s0 = budget.s0.as_vector();
    assert_eq!(y.len(), s0.len(), "projection input length must match s0");
    let used = budget_used_at(y, s0, 0.0);
    if used <= budget.mu {
        return clamp_shifted(y, s0, 0.0).into();
    }
    clamp_shifted(y, s0, find_shift(y, s0, budget.mu)).into()
}

/// Smallest `lambda > 0` with `U(lambda) = mu`, given `U(0) > mu`.
fn find_shift(y: &DVector<f64>, s0: &DVector<f64>, mu: f64) -> f64 {
    // U(hi) = 0 <= mu
    let mut hi = y
        .iter()
        .zip(s0.iter())
        .map(|(&yi, &ci)| ci - yi)
        .fold(0.0, f64::max);
    let mut lo = 0.0;

    // Coordinates whose breakpoints both lie outside (lo, hi) contribute
    // either a constant or the linear term (s0_i - y_i) - lambda there.
    let mut constant = 0.0;
    let mut linear_offset = 0.0;
    let mut linear_count = 0usize;
    let mut active: Vec<usize> = Vec::with_capacity(y.len());

    let classify = |i: usize,
                    lo: f64,
                    hi: f64,
                    constant: &mut f64,
                    linear_offset: &mut f64,
                    linear_count: &mut usize|
     -> bool {
        let lower = -y[i];
        let upper = s0[i] - y[i];
        if upper <= lo {
            // already at s0 on the whole interval
            true
        } else if lower >= hi {
            *constant += s0[i];
            true
        } else if lower <= lo && upper >= hi {
            *linear_offset += upper;
            *linear_count += 1;
            true
        } else {
            false
        }
    };

    for i in 0..y.len() {
        if !classify(
            i,
            lo,
            hi,
            &mut constant,
            &mut linear_offset,
            &mut linear_count,
        ) {
            active.push(i);
        }
    }

    let mut points: Vec<f64> = Vec::with_capacity(2 * active.len());
    while !active.is_empty() {
        points.clear();
        for &i in &active {
            for bp in [-y[i], s0[i] - y[i]] {
                if bp > lo && bp < hi {
                    points.push(bp);
                }
            }
        }
        if points.is_empty() {
            break;
        }
        let mid = points.len() / 2;
        let (_, &mut pivot, _) = points.select_nth_unstable_by(mid, f64::total_cmp);
        let at_pivot = constant + linear_offset - linear_count as f64 * pivot
            + active
                .iter()
                .map(|&i| reduction(y[i], s0[i], pivot))
                .sum::<f64>();
        if at_pivot > mu {
            lo = pivot;
        } else {
            hi = pivot;
        }
        active.retain(|&i| {
            !classify(
                i,
                lo,
                hi,
                &mut constant,
                &mut linear_offset,
                &mut linear_count,
            )
        });
    }

    // U is linear on [lo, hi]: U(l) = constant + linear_offset - count * l
    // (coordinates still active have no breakpoint inside and were not yet
    // folded in, so add them evaluated at the midpoint).
    let mid = 0.5 * (lo + hi);
    let mut c = constant;
    let mut off = linear_offset;
    let mut count = linear_count;
    for &i in &active {
        let lower = -y[i];
        let upper = s0[i] - y[i];
        if upper <= mid {
        } else if lower >= mid {
            c += s0[i];
        } else {
            off += upper;
            count += 1;
        }
    }
    if count == 0 {
        return hi;
    }
    let lambda = (c + off - mu) / count as f64;
    lambda.clamp(lo, hi)
}
