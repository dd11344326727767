//! Iteration planning for the projected subgradient defense.
//!
//! With step sizes `eta0 / sqrt(T)`, the best objective after `T` steps is
//! within `(R^2 + eta0^2 G^2 xi2) / (2 eta0 xi1)` of the optimum, where
//! `xi1 = sum 1/sqrt(i)`, `xi2 = sum 1/i`, `R` bounds the distance from the
//! start to the optimum and `G` bounds the subgradient norm. Two constant
//! sets are supported, see [`BoundVariant`].

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fj::FjSystem;

pub const DEFAULT_ITERATION_CAP: u64 = 100_000_000;

/// Above this many terms the harmonic-type sums use their asymptotic expansions.
const EXACT_SUM_LIMIT: u64 = 1 << 20;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// zeta(1/2)
const ZETA_HALF: f64 = -1.460_354_508_809_586_8;

/// Which closed form of the suboptimality bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundVariant {
    /// `(mu^2 + xi2 N (1 + 2 m k p^2 (1/alpha_min - 1)^2)) / xi1`.
    Printed,
    /// `(R^2 + eta0^2 G^2 xi2) / (2 eta0 xi1)` with `R^2 = mu^2` and
    /// `G^2 = N ||B||^2 (1 + p^2 m k ||B||^2 (1 + ||W||^2))`.
    #[default]
    Composed,
}

impl BoundVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" | "printed" => Ok(BoundVariant::Printed),
            "b" | "composed" => Ok(BoundVariant::Composed),
            other => Err(Error::argument(format!("unknown bound variant `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::Printed => "printed",
            BoundVariant::Composed => "composed",
        }
    }
}

/// Problem constants entering the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub p: f64,
    pub alpha_min: f64,
    pub mu: f64,
    pub eta0: f64,
    /// Spectral norm of `B`; needed by [`BoundVariant::Composed`].
    pub b_norm: Option<f64>,
    /// Spectral norm of `W`; needed by [`BoundVariant::Composed`].
    pub w_norm: Option<f64>,
}

impl BoundConstants {
    /// Constants for a concrete system, with both spectral norms estimated.
    pub fn for_system(sys: &FjSystem, m: usize, k: usize, p: f64, mu: f64, eta0: f64) -> Self {
        Self {
            n: sys.n(),
            m,
            k,
            p,
            alpha_min: sys.stubbornness().min(),
            mu,
            eta0,
            b_norm: Some(b_spectral_norm(sys)),
            w_norm: Some(w_spectral_norm(sys)),
        }
    }

    /// `G^2` of the composed bound.
    pub fn gradient_bound_sq(&self) -> Option<f64> {
        let b2 = self.b_norm? * self.b_norm?;
        let w2 = self.w_norm? * self.w_norm?;
        let mk = (self.m * self.k) as f64;
        Some(self.n as f64 * b2 * (1.0 + self.p * self.p * mk * b2 * (1.0 + w2)))
    }

    /// `R / G`, the step scale that balances the two terms of the composed bound.
    pub fn balanced_eta0(&self) -> Option<f64> {
        let g = self.gradient_bound_sq()?.sqrt();
        (g > 0.0 && self.mu > 0.0).then(|| self.mu / g)
    }

    fn check(&self, variant: BoundVariant) -> Result<()> {
        if variant == BoundVariant::Composed && (self.b_norm.is_none() || self.w_norm.is_none()) {
            return Err(Error::argument(
                "the composed bound needs the spectral norms of B and W",
            ));
        }
        if !(self.eta0 > 0.0) && variant == BoundVariant::Composed {
            return Err(Error::argument("eta0 must be positive"));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return Err(Error::argument("alpha_min must lie in (0, 1)"));
        }
        if self.mu < 0.0 || self.p < 0.0 {
            return Err(Error::argument("mu and p must be nonnegative"));
        }
        Ok(())
    }

    fn evaluate(&self, variant: BoundVariant, xi1: f64, xi2: f64) -> f64 {
        match variant {
            BoundVariant::Printed => {
                let r = 1.0 / self.alpha_min - 1.0;
                let g = 1.0 + 2.0 * (self.m * self.k) as f64 * self.p * self.p * r * r;
                (self.mu * self.mu + xi2 * self.n as f64 * g) / xi1
            }
            BoundVariant::Composed => {
                let g2 = self.gradient_bound_sq().expect("checked");
                let eta = self.eta0;
                (self.mu * self.mu + eta * eta * g2 * xi2) / (2.0 * eta * xi1)
            }
        }
    }
}

/// `(sum_{i<=t} 1/sqrt(i), sum_{i<=t} 1/i)`.
pub fn xi_sums(t: u64) -> (f64, f64) {
    if t <= EXACT_SUM_LIMIT {
        // summed from the small terms up
        let mut xi1 = 0.0;
        let mut xi2 = 0.0;
        for i in (1..=t).rev() {
            let x = i as f64;
            xi1 += 1.0 / x.sqrt();
            xi2 += 1.0 / x;
        }
        (xi1, xi2)
    } else {
        let x = t as f64;
        let sx = x.sqrt();
        let xi1 = 2.0 * sx + ZETA_HALF + 0.5 / sx - 1.0 / (24.0 * x * sx);
        let xi2 = x.ln() + EULER_GAMMA + 0.5 / x - 1.0 / (12.0 * x * x);
        (xi1, xi2)
    }
}

/// The selected bound after `t` iterations.
pub fn bound_at(constants: &BoundConstants, variant: BoundVariant, t: u64) -> Result<f64> {
    constants.check(variant)?;
    if t == 0 {
        return Ok(f64::INFINITY);
    }
    let (xi1, xi2) = xi_sums(t);
    Ok(constants.evaluate(variant, xi1, xi2))
}

/// The smallest iteration count meeting a target gap, and the bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationPlan {
    pub t_max: u64,
    pub variant: BoundVariant,
    /// Bound value at `t_max`.
    pub bound: f64,
    pub constants: BoundConstants,
}

impl IterationPlan {
    pub fn bound_curve(&self, t: u64) -> f64 {
        bound_at(&self.constants, self.variant, t).expect("constants validated when planning")
    }

    /// CSV `T,bound` at roughly log-spaced points up to `t_max`.
    pub fn curve_csv(&self, points: usize) -> String {
        let mut out = String::from("T,bound\n");
        let mut ts: Vec<u64> = (0..points.max(2))
            .map(|i| {
                let frac = i as f64 / (points.max(2) - 1) as f64;
                (self.t_max as f64).powf(frac).round().max(1.0) as u64
            })
            .collect();
        ts.dedup();
        for t in ts {
            let _ = writeln!(out, "{t},{}", self.bound_curve(t));
        }
        out
    }
}

/// Smallest `T <= cap` whose bound is at most `epsilon`.
///
/// The bound is scanned exactly for small `T`; beyond that it is strictly
/// decreasing and the search bisects on the asymptotic sums.
pub fn plan_iterations(
    epsilon: f64,
    constants: &BoundConstants,
    variant: BoundVariant,
    cap: u64,
) -> Result<IterationPlan> {
    if !(epsilon > 0.0) {
        return Err(Error::argument(format!("epsilon must be positive (got {epsilon})")));
    }
    constants.check(variant)?;
    let done = |t: u64, bound: f64| IterationPlan {
        t_max: t,
        variant,
        bound,
        constants: *constants,
    };

    let scan_limit = cap.min(EXACT_SUM_LIMIT);
    let mut xi1 = 0.0;
    let mut xi2 = 0.0;
    for t in 1..=scan_limit {
        let x = t as f64;
        xi1 += 1.0 / x.sqrt();
        xi2 += 1.0 / x;
        let b = constants.evaluate(variant, xi1, xi2);
        if b <= epsilon {
            return Ok(done(t, b));
        }
    }
    if cap <= scan_limit {
        return Err(Error::BoundUnreachable {
            cap,
            bound: constants.evaluate(variant, xi1, xi2),
            epsilon,
        });
    }
    let at_cap = bound_at(constants, variant, cap)?;
    if at_cap > epsilon {
        return Err(Error::BoundUnreachable {
            cap,
            bound: at_cap,
            epsilon,
        });
    }
    let (mut lo, mut hi) = (scan_limit, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound_at(constants, variant, mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(done(hi, bound_at(constants, variant, hi)?))
}

fn power_iteration(n: usize, mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>) -> f64 {
    // deterministic start with a small tilt so it is not orthogonal to the top vector
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i * 7919) % 101) as f64);
    x.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..5000 {
        let y = apply(&x);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - estimate).abs() <= 1e-13 * norm;
        estimate = norm;
        x = y / norm;
        if converged {
            break;
        }
    }
    estimate.sqrt()
}

/// `||B||_2`, by power iteration on `B^T B` through the cached factorizations.
pub fn b_spectral_norm(sys: &FjSystem) -> f64 {
    power_iteration(sys.n(), |x| {
        let bx = sys.solve(x).expect("dimensions match");
        sys.solve_transpose(&bx).expect("dimensions match")
    })
}

/// `||W||_2`, by power iteration on `W^T W`.
pub fn w_spectral_norm(sys: &FjSystem) -> f64 {
    let w = sys.adjacency().matrix();
    power_iteration(sys.n(), |x| w.tr_mul(&(w * x)))
}
