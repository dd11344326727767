//! Adversarial network perturbation.
//!
//! Every attacker `u` pushes its expressed opinion onto each of its targets
//! `v` with weight `p`; a target's original in-weights are discounted by
//! `1 - |A_v| p` so its row stays stochastic (`A_v` is the set of attackers
//! targeting `v`). The perturbed matrix is `W~ = W + p * Delta` with
//!
//! ```text
//! Delta = sum_v e_v (sum_{u in A_v} e_u^T)  -  sum_v |A_v| e_v e_v^T W .
//! ```
//!
//! To first order in `p` the perturbed total opinion is
//! `f + p * sum_u sum_{v in T_u} c1(v) (z*(u) - c2(v))` where
//! `c1 = (1^T B (I - A))^T` and `c2 = W z*`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fj::{total_opinion, FjSystem, OpinionVector};
use crate::graph::AdjacencyMatrix;

/// Slack allowed on `|A_v| p <= 1` for floating-point products such as `10 * 0.1`.
const LOAD_SLACK: f64 = 1e-12;

/// One attacker and the users it targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerTargets {
    pub attacker: usize,
    pub targets: Vec<usize>,
}

/// Attackers, their targets, and the perturbation coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub p: f64,
    pub m_limit: usize,
    pub k_limit: usize,
    entries: Vec<AttackerTargets>,
}

impl AttackPlan {
    pub fn new(p: f64, m_limit: usize, k_limit: usize) -> Self {
        Self {
            p,
            m_limit,
            k_limit,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, attacker: usize, targets: Vec<usize>) {
        self.entries.push(AttackerTargets { attacker, targets });
    }

    pub fn with(mut self, attacker: usize, targets: Vec<usize>) -> Self {
        self.push(attacker, targets);
        self
    }

    /// Same attackers and targets under another coefficient.
    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn entries(&self) -> &[AttackerTargets] {
        &self.entries
    }

    pub fn attackers(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.attacker)
    }

    /// Attackers that target at least one user.
    pub fn active_attacker_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.targets.is_empty()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().map(|e| e.targets.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    /// Map target `v` to the attackers `A_v`, both in ascending order.
    pub fn attackers_by_target(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in &self.entries {
            for &v in &e.targets {
                map.entry(v).or_default().push(e.attacker);
            }
        }
        for list in map.values_mut() {
            list.sort_unstable();
        }
        map
    }

    /// Check every invariant that does not depend on the network size.
    pub fn validate_structure(&self) -> Result<()> {
        if !(self.p.is_finite() && (0.0..=1.0).contains(&self.p)) {
            return Err(Error::validation(format!(
                "perturbation coefficient p = {} must lie in [0, 1]",
                self.p
            )));
        }
        if self.entries.len() > self.m_limit {
            return Err(Error::validation(format!(
                "{} attackers exceed the limit m = {}",
                self.entries.len(),
                self.m_limit
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.attacker) {
                return Err(Error::validation(format!(
                    "attacker {} listed twice",
                    e.attacker
                )));
            }
            if e.targets.len() > self.k_limit {
                return Err(Error::validation(format!(
                    "attacker {} has {} targets, limit k = {}",
                    e.attacker,
                    e.targets.len(),
                    self.k_limit
                )));
            }
            let mut targets = BTreeSet::new();
            for &v in &e.targets {
                if v == e.attacker {
                    return Err(Error::validation(format!(
                        "attacker {v} targets itself"
                    )));
                }
                if !targets.insert(v) {
                    return Err(Error::validation(format!(
                        "attacker {} lists target {v} twice",
                        e.attacker
                    )));
                }
            }
        }
        for (v, us) in self.attackers_by_target() {
            if us.len() as f64 * self.p > 1.0 + LOAD_SLACK {
                return Err(Error::validation(format!(
                    "target {v} is pushed by {} attackers; |A_v| * p = {} exceeds 1",
                    us.len(),
                    us.len() as f64 * self.p
                )));
            }
        }
        Ok(())
    }

    /// Full validation against a network of `n` users.
    pub fn validate(&self, n: usize) -> Result<()> {
        for e in &self.entries {
            if let Some(bad) = std::iter::once(e.attacker)
                .chain(e.targets.iter().copied())
                .find(|&x| x >= n)
            {
                return Err(Error::validation(format!(
                    "node {bad} is outside 0..{n}"
                )));
            }
        }
        self.validate_structure()
    }
}

impl fmt::Display for AttackPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "m_limit = {}", self.m_limit)?;
        writeln!(f, "k_limit = {}", self.k_limit)?;
        for e in &self.entries {
            write!(f, "{}:", e.attacker)?;
            for v in &e.targets {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for AttackPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut p = None;
        let mut m_limit = None;
        let mut k_limit = None;
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            let parse_err = |message: String| Error::Parse {
                line: lineno,
                message,
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "p" => {
                        p = Some(value.parse::<f64>().map_err(|_| {
                            parse_err(format!("`{value}` is not a number"))
                        })?)
                    }
                    "m_limit" => {
                        m_limit = Some(value.parse::<usize>().map_err(|_| {
                            parse_err(format!("`{value}` is not a count"))
                        })?)
                    }
                    "k_limit" => {
                        k_limit = Some(value.parse::<usize>().map_err(|_| {
                            parse_err(format!("`{value}` is not a count"))
                        })?)
                    }
                    other => return Err(parse_err(format!("unknown key `{other}`"))),
                }
            } else if let Some((head, tail)) = line.split_once(':') {
                let attacker = head
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| parse_err(format!("`{}` is not a node id", head.trim())))?;
                let targets = tail
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| parse_err(format!("`{t}` is not a node id")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                entries.push(AttackerTargets { attacker, targets });
            } else {
                return Err(parse_err(format!("unrecognized line `{line}`")));
            }
        }
        let missing = |key: &str| Error::Parse {
            line: 0,
            message: format!("missing `{key}`"),
        };
        let plan = AttackPlan {
            p: p.ok_or_else(|| missing("p"))?,
            m_limit: m_limit.ok_or_else(|| missing("m_limit"))?,
            k_limit: k_limit.ok_or_else(|| missing("k_limit"))?,
            entries,
        };
        plan.validate_structure()?;
        Ok(plan)
    }
}

/// `Delta_W`, stored by its nonzero (target) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDelta {
    n: usize,
    rows: BTreeMap<usize, DVector<f64>>,
}

impl PerturbationDelta {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &BTreeMap<usize, DVector<f64>> {
        &self.rows
    }

    /// Row `v`, or `None` if `v` is not a target.
    pub fn row(&self, v: usize) -> Option<&DVector<f64>> {
        self.rows.get(&v)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (&v, row) in &self.rows {
            d.set_row(v, &row.transpose());
        }
        d
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        self.rows.values().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// `Delta x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (&v, row) in &self.rows {
            out[v] = row.dot(x);
        }
        out
    }

    /// `Delta^T y`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (&v, row) in &self.rows {
            out.axpy(y[v], row, 1.0);
        }
        out
    }
}

/// Build `Delta_W` for a plan on influence matrix `w`.
pub fn build_delta(plan: &AttackPlan, w: &AdjacencyMatrix) -> Result<PerturbationDelta> {
    let n = w.n();
    plan.validate(n)?;
    let rows = plan
        .attackers_by_target()
        .into_iter()
        .map(|(v, attackers)| {
            let mut row: DVector<f64> = w.matrix().row(v).transpose() * -(attackers.len() as f64);
            for u in attackers {
                row[u] += 1.0;
            }
            (v, row)
        })
        .collect();
    Ok(PerturbationDelta { n, rows })
}

/// The perturbed influence matrix `W~ = W + p Delta_W`.
///
/// Target rows are formed as `(1 - |A_v| p) W_v + p sum_{u in A_v} e_u`,
/// which keeps every entry nonnegative.
pub fn perturbed_matrix(plan: &AttackPlan, w: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    plan.validate(w.n())?;
    let mut out = w.matrix().clone();
    for (v, attackers) in plan.attackers_by_target() {
        let discount = (1.0 - attackers.len() as f64 * plan.p).max(0.0);
        out.row_mut(v).scale_mut(discount);
        for u in attackers {
            out[(v, u)] += plan.p;
        }
    }
    AdjacencyMatrix::new(out)
}

/// Total opinion at the equilibrium of the perturbed network, by a fresh solve.
pub fn exact_perturbed_total(plan: &AttackPlan, sys: &FjSystem, s: &OpinionVector) -> Result<f64> {
    if plan.is_empty() || plan.p == 0.0 {
        plan.validate(sys.n())?;
        return Ok(total_opinion(&sys.equilibrium(s)?));
    }
    let w = perturbed_matrix(plan, sys.adjacency())?;
    let perturbed = sys.with_adjacency(w)?;
    Ok(total_opinion(&perturbed.equilibrium(s)?))
}

/// The vectors that drive the first-order analysis of a perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVectors {
    /// `(1^T B (I - A))^T`, entrywise positive.
    pub c1: DVector<f64>,
    /// `W z*`: each user's in-neighbour average of expressed opinions.
    pub c2: DVector<f64>,
    pub z_star: OpinionVector,
}

impl InfluenceVectors {
    pub fn n(&self) -> usize {
        self.c1.len()
    }

    /// The unperturbed total `1^T z*`.
    pub fn total(&self) -> f64 {
        total_opinion(&self.z_star)
    }

    /// `c1(v) (z*(u) - c2(v))`.
    #[inline]
    pub fn delta(&self, u: usize, v: usize) -> f64 {
        self.c1[v] * (self.z_star[u] - self.c2[v])
    }

    /// `1^T B (I - A) Delta_W B A s`, summed attacker by attacker.
    pub fn first_order_term(&self, plan: &AttackPlan) -> f64 {
        plan.entries()
            .iter()
            .map(|e| e.targets.iter().map(|&v| self.delta(e.attacker, v)).sum::<f64>())
            .sum()
    }

    /// The same quantity evaluated as `c1^T (Delta_W z*)`.
    pub fn first_order_term_via_delta(&self, delta: &PerturbationDelta) -> f64 {
        self.c1.dot(&delta.apply(self.z_star.as_vector()))
    }

    /// First-order approximation of the perturbed total.
    pub fn approx_total(&self, plan: &AttackPlan) -> f64 {
        self.total() + plan.p * self.first_order_term(plan)
    }
}

/// Compute `c1`, `c2 = W z*` and `z* = B A s`.
pub fn influence_vectors(sys: &FjSystem, s: &OpinionVector) -> Result<InfluenceVectors> {
    let z_star = sys.equilibrium(s)?;
    let c2 = sys.adjacency().matrix() * z_star.as_vector();
    Ok(InfluenceVectors {
        c1: sys.column_sum_through_b().clone(),
        c2,
        z_star,
    })
}

/// First-order approximation of the perturbed total opinion.
pub fn approx_perturbed_total(
    plan: &AttackPlan,
    sys: &FjSystem,
    s: &OpinionVector,
) -> Result<f64> {
    plan.validate(sys.n())?;
    Ok(influence_vectors(sys, s)?.approx_total(plan))
}
