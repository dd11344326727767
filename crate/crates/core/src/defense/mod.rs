//! The defender: budgeted control of innate opinions against the worst-case attack.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::attack::optimal_attack;
use crate::error::{Error, Result};
use crate::fj::{FjSystem, OpinionVector};
use crate::perturbation::{build_delta, exact_perturbed_total, influence_vectors, AttackPlan};

mod planner;
mod projection;

pub use planner::{
    b_spectral_norm, bound_at, plan_iterations, w_spectral_norm, xi_sums, BoundConstants,
    BoundVariant, IterationPlan, DEFAULT_ITERATION_CAP,
};
pub use projection::{budget_used_at, project};

pub const DEFAULT_ETA0: f64 = 1.0;

/// Feasible set `{s : 1^T (s0 - s) <= mu, 0 <= s <= s0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseBudget {
    pub s0: OpinionVector,
    pub mu: f64,
}

impl DefenseBudget {
    pub fn new(s0: OpinionVector, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::argument(format!("budget mu = {mu} must be finite and >= 0")));
        }
        if s0.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::validation("innate opinions must lie in [0, 1]"));
        }
        Ok(Self { s0, mu })
    }

    pub fn n(&self) -> usize {
        self.s0.len()
    }

    /// `1^T (s0 - s)`.
    pub fn used(&self, s: &OpinionVector) -> f64 {
        self.s0.iter().zip(s.iter()).map(|(a, b)| a - b).sum()
    }

    pub fn is_feasible(&self, s: &OpinionVector, tol: f64) -> bool {
        s.len() == self.n()
            && self.used(s) <= self.mu + tol
            && s.iter().zip(self.s0.iter()).all(|(&x, &c)| x >= -tol && x <= c + tol)
    }
}

fn check_dims(sys: &FjSystem, s: &OpinionVector) -> Result<()> {
    if s.len() != sys.n() {
        return Err(Error::argument(format!(
            "opinion vector has length {}, system has {} nodes",
            s.len(),
            sys.n()
        )));
    }
    Ok(())
}

/// The attacker's best response at `s` and the first-order total it achieves.
pub fn worst_case_objective(
    s: &OpinionVector,
    sys: &FjSystem,
    m: usize,
    k: usize,
    p: f64,
) -> Result<(f64, AttackPlan)> {
    check_dims(sys, s)?;
    let vectors = influence_vectors(sys, s)?;
    let attack = optimal_attack(&vectors, m, k, p)?;
    Ok((vectors.approx_total(&attack.plan), attack.plan))
}

/// Gradient in `s` of the first-order total under a fixed plan:
/// `A (B^T 1 + p B^T Delta_W^T c1)`.
///
/// With `plan` the best response at `s`, this is a subgradient of the
/// worst-case objective there.
pub fn subgradient(s: &OpinionVector, sys: &FjSystem, plan: &AttackPlan) -> Result<DVector<f64>> {
    check_dims(sys, s)?;
    let mut y = sys.b_column_sums().clone();
    if !plan.is_empty() && plan.p != 0.0 {
        let delta = build_delta(plan, sys.adjacency())?;
        let pulled = delta.apply_transpose(sys.column_sum_through_b());
        y += sys.solve_transpose(&pulled)? * plan.p;
    }
    Ok(y.component_mul(sys.stubbornness().as_vector()))
}

/// Step-size and iteration settings for [`defend`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseOptions {
    pub eta0: f64,
    pub t_max: u64,
}

impl Default for DefenseOptions {
    fn default() -> Self {
        Self {
            eta0: DEFAULT_ETA0,
            t_max: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 0-based; the step size uses `iter + 1`.
    pub iter: u64,
    /// Worst-case objective at the iterate before its update.
    pub f: f64,
    pub step_size: f64,
    pub n_attackers: usize,
    pub budget_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseRun {
    pub best_s: OpinionVector,
    pub best_f: f64,
    /// Best response at `best_s`.
    pub best_plan: AttackPlan,
    /// Exact perturbed total at `best_s` under `best_plan`.
    pub best_f_exact: f64,
    pub history: Vec<IterationRecord>,
    /// Composed bound after `t_max` iterations.
    pub planned_gap: f64,
}

impl DefenseRun {
    /// CSV `iter,f,step_size,n_attackers,budget_used`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,f,step_size,n_attackers,budget_used\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter, r.f, r.step_size, r.n_attackers, r.budget_used
            );
        }
        out
    }
}

/// Projected subgradient descent on the worst-case objective, starting at `s0`
/// with steps `eta0 / sqrt(T)`. Returns the best iterate seen.
pub fn defend(
    sys: &FjSystem,
    budget: &DefenseBudget,
    m: usize,
    k: usize,
    p: f64,
    options: DefenseOptions,
) -> Result<DefenseRun> {
    if !(options.eta0 > 0.0 && options.eta0.is_finite()) {
        return Err(Error::argument(format!("eta0 = {} must be positive", options.eta0)));
    }
    if options.t_max == 0 {
        return Err(Error::argument("t_max must be at least 1"));
    }
    check_dims(sys, &budget.s0)?;

    let mut s = budget.s0.clone();
    let mut best: Option<(f64, OpinionVector, AttackPlan)> = None;
    let mut history = Vec::with_capacity(options.t_max.min(1 << 24) as usize);
    for t in 1..=options.t_max {
        let vectors = influence_vectors(sys, &s)?;
        let attack = optimal_attack(&vectors, m, k, p)?;
        let f = vectors.approx_total(&attack.plan);
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("objective {f} at iteration {}", t - 1)));
        }
        let step_size = options.eta0 / (t as f64).sqrt();
        history.push(IterationRecord {
            iter: t - 1,
            f,
            step_size,
            n_attackers: attack.plan.active_attacker_count(),
            budget_used: budget.used(&s),
        });
        let g = subgradient(&s, sys, &attack.plan)?;
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("subgradient at iteration {}", t - 1)));
        }
        let next = project(&(s.as_vector() - g * step_size), budget);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, std::mem::replace(&mut s, next), attack.plan));
        } else {
            s = next;
        }
    }

    let (best_f, best_s, best_plan) = best.expect("t_max >= 1");
    let best_f_exact = exact_perturbed_total(&best_plan, sys, &best_s)?;
    let constants = planner::BoundConstants::for_system(sys, m, k, p, budget.mu, options.eta0);
    let planned_gap = bound_at(&constants, BoundVariant::Composed, options.t_max)?;
    Ok(DefenseRun {
        best_s,
        best_f,
        best_plan,
        best_f_exact,
        history,
        planned_gap,
    })
}

/// Exact minimizer of `1^T B A x` over the budget set: spend the budget on
/// the largest coefficients of `(B A)^T 1` first, ties by ascending id.
pub fn min_total_baseline(sys: &FjSystem, budget: &DefenseBudget) -> Result<OpinionVector> {
    check_dims(sys, &budget.s0)?;
    let c = sys.total_opinion_weights();
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    let mut x = budget.s0.clone();
    let mut remaining = budget.mu;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let cut = x[i].min(remaining);
        x[i] -= cut;
        remaining -= cut;
    }
    Ok(x)
}
