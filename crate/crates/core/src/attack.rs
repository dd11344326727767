//! The adversary: choosing attackers and their targets.
//!
//! Under the first-order model an edge from attacker `u` to target `v`
//! contributes the meta-influence `delta(u, v) = c1(v) (z*(u) - c2(v))`.
//! A user with a larger `z*` has a larger meta-influence on every user other
//! than itself. Attackers are searched in descending `z*` and each takes its
//! `k` best positive targets.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fj::{total_opinion, FjSystem, OpinionVector};
use crate::graph::AdjacencyMatrix;
use crate::perturbation::{exact_perturbed_total, influence_vectors, AttackPlan, InfluenceVectors};
use crate::rng::seeded;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-10;

/// Default cap on the number of plans [`brute_force_attack`] will enumerate.
pub const BRUTE_FORCE_DEFAULT_CAP: u128 = 10_000_000;

/// Opinion gaps `z*(u) - c2(v)` at or below this count as zero; they are
/// within the rounding error of the equilibrium solve.
pub const GAP_TOL: f64 = 1e-12;

/// Relative margin by which [`brute_force_attack`] requires a plan to beat the incumbent.
const IMPROVEMENT_TOL: f64 = 1e-12;

/// Candidate-times-node work above which target scans run on the thread pool.
const PARALLEL_WORK: usize = 200_000;

/// Descending score, then ascending id.
fn by_score_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The best `count` entries by [`by_score_desc`], in that order.
fn top_by_score(mut scored: Vec<(usize, f64)>, count: usize) -> Vec<(usize, f64)> {
    if count == 0 {
        return Vec::new();
    }
    if scored.len() > count {
        scored.select_nth_unstable_by(count - 1, by_score_desc);
        scored.truncate(count);
    }
    scored.sort_unstable_by(by_score_desc);
    scored
}

/// `c1(v) (z*(u) - c2(v))`; attackers may not target themselves.
pub fn meta_influence(u: usize, v: usize, vectors: &InfluenceVectors) -> Result<f64> {
    let n = vectors.n();
    if u >= n || v >= n {
        return Err(Error::argument(format!("node ids ({u}, {v}) outside 0..{n}")));
    }
    if u == v {
        return Err(Error::argument(format!("attacker {u} cannot target itself")));
    }
    Ok(vectors.delta(u, v))
}

/// Meta-influence scores, materialized one attacker at a time.
#[derive(Debug, Clone, Copy)]
pub struct MetaInfluenceTable<'a> {
    vectors: &'a InfluenceVectors,
}

impl<'a> MetaInfluenceTable<'a> {
    pub fn new(vectors: &'a InfluenceVectors) -> Self {
        Self { vectors }
    }

    pub fn score(&self, u: usize, v: usize) -> Result<f64> {
        meta_influence(u, v, self.vectors)
    }

    /// Scores of attacker `u` against every node, with entry `u` zero.
    pub fn row(&self, u: usize) -> DVector<f64> {
        let v = self.vectors;
        let zu = v.z_star[u];
        let mut row = DVector::from_fn(v.n(), |j, _| v.c1[j] * (zu - v.c2[j]));
        row[u] = 0.0;
        row
    }
}

/// Up to `k` targets with the largest strictly positive meta-influence
/// (opinion gap above [`GAP_TOL`]).
///
/// Returns the targets in selection order and their summed influence.
pub fn optimal_targets(u: usize, vectors: &InfluenceVectors, k: usize) -> (Vec<usize>, f64) {
    let n = vectors.n();
    let zu = vectors.z_star[u];
    let positive: Vec<(usize, f64)> = (0..n)
        .filter(|&v| v != u)
        .filter_map(|v| {
            let gap = zu - vectors.c2[v];
            (gap > GAP_TOL).then(|| (v, vectors.c1[v] * gap))
        })
        .collect();
    let chosen = top_by_score(positive, k);
    let total = chosen.iter().map(|&(_, d)| d).sum();
    (chosen.into_iter().map(|(v, _)| v).collect(), total)
}

/// An attack together with the quantities that justify it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub plan: AttackPlan,
    /// `(u, delta*_u)` for every attacker in the plan, in plan order.
    pub individual_influences: Vec<(usize, f64)>,
    /// Increase of the objective over the unperturbed total. For first-order
    /// attacks this is `p * sum_u delta*_u`.
    pub objective_gain: f64,
}

impl AttackResult {
    fn empty(p: f64, m: usize, k: usize) -> Self {
        Self {
            plan: AttackPlan::new(p, m, k),
            individual_influences: Vec::new(),
            objective_gain: 0.0,
        }
    }

    /// Plan text followed by a `# delta_star <u> <value>` comment block.
    pub fn to_text(&self) -> String {
        let mut out = self.plan.to_string();
        for &(u, d) in &self.individual_influences {
            let _ = writeln!(out, "# delta_star {u} {d}");
        }
        out
    }

    /// CSV `u,v,delta_uv` for every selected attacker-target edge.
    pub fn meta_influence_csv(&self, vectors: &InfluenceVectors) -> String {
        let mut out = String::from("u,v,delta_uv\n");
        for e in self.plan.entries() {
            for &v in &e.targets {
                let _ = writeln!(out, "{},{},{}", e.attacker, v, vectors.delta(e.attacker, v));
            }
        }
        out
    }
}

fn check_attack_args(m: usize, p: f64) -> Result<()> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::argument(format!("p = {p} must lie in [0, 1]")));
    }
    if m as f64 * p > 1.0 + 1e-12 {
        return Err(Error::argument(format!(
            "m * p = {} exceeds 1; a target pushed by every attacker would be invalid",
            m as f64 * p
        )));
    }
    Ok(())
}

/// Top `m` users by equilibrium opinion, ties by ascending id.
pub fn candidate_attackers(vectors: &InfluenceVectors, m: usize) -> Vec<usize> {
    let scored = vectors.z_star.iter().copied().enumerate().collect();
    top_by_score(scored, m).into_iter().map(|(u, _)| u).collect()
}

/// Best individual influence of `u` if it were allowed to target itself.
///
/// It is nondecreasing in `z*(u)` and bounds `delta*_u` from above.
fn unrestricted_bound(u: usize, targets: &[usize], delta_star: f64, vectors: &InfluenceVectors, k: usize) -> f64 {
    let own = vectors.delta(u, u);
    if k == 0 || own <= 0.0 || vectors.z_star[u] - vectors.c2[u] <= GAP_TOL {
        return delta_star;
    }
    if targets.len() < k {
        return delta_star + own;
    }
    let weakest = targets
        .iter()
        .map(|&v| vectors.delta(u, v))
        .fold(f64::INFINITY, f64::min);
    delta_star + (own - weakest).max(0.0)
}

/// Attack maximizing the first-order perturbed total.
///
/// Candidates are scanned in descending `z*` (ties by ascending id), each
/// taking its optimal targets. The first `m` candidates are the linear-search
/// attackers; the scan continues past them only while a later candidate could
/// still beat the weakest selected one, which happens when a candidate's best
/// target is a higher-ranked user it may not target itself. The scan stops at
/// the first candidate that cannot contribute positively.
pub fn optimal_attack(vectors: &InfluenceVectors, m: usize, k: usize, p: f64) -> Result<AttackResult> {
    check_attack_args(m, p)?;
    let n = vectors.n();
    let mut result = AttackResult::empty(p, m, k);
    if m == 0 || k == 0 {
        return Ok(result);
    }
    let order = candidate_attackers(vectors, n);
    let scan = |u: usize| {
        let (t, d) = optimal_targets(u, vectors, k);
        let bound = unrestricted_bound(u, &t, d, vectors, k);
        (u, t, d, bound)
    };
    let head = m.min(n);
    let first: Vec<(usize, Vec<usize>, f64, f64)> = if head * n >= PARALLEL_WORK {
        order[..head].par_iter().map(|&u| scan(u)).collect()
    } else {
        order[..head].iter().map(|&u| scan(u)).collect()
    };

    // (scan rank, attacker, targets, delta*), kept sorted by descending delta*, then rank
    let mut chosen: Vec<(usize, usize, Vec<usize>, f64)> = Vec::with_capacity(head + 1);
    let admit = |chosen: &mut Vec<(usize, usize, Vec<usize>, f64)>, rank: usize, u, t, d: f64| {
        if d > 0.0 {
            let at = chosen.partition_point(|c| c.3 > d || (c.3 == d && c.0 < rank));
            chosen.insert(at, (rank, u, t, d));
            chosen.truncate(m);
        }
    };
    let mut stopped = false;
    for (rank, (u, t, d, bound)) in first.into_iter().enumerate() {
        if bound <= 0.0 {
            stopped = true;
            break;
        }
        admit(&mut chosen, rank, u, t, d);
    }
    if !stopped {
        for (rank, &u) in order.iter().enumerate().skip(head) {
            let weakest = if chosen.len() == m { chosen[m - 1].3 } else { 0.0 };
            let (u, t, d, bound) = scan(u);
            if bound <= weakest {
                break;
            }
            admit(&mut chosen, rank, u, t, d);
        }
    }

    chosen.sort_by_key(|c| c.0);
    let mut sum = 0.0;
    for (_, u, t, d) in chosen {
        result.plan.push(u, t);
        result.individual_influences.push((u, d));
        sum += d;
    }
    result.objective_gain = p * sum;
    Ok(result)
}

/// Build an attack from fixed attackers, each taking its optimal targets.
/// Attackers without a positive target are dropped.
pub fn attack_with_attackers(
    attackers: &[usize],
    vectors: &InfluenceVectors,
    k: usize,
    p: f64,
) -> Result<AttackResult> {
    check_attack_args(attackers.len(), p)?;
    let mut result = AttackResult::empty(p, attackers.len(), k);
    let mut sum = 0.0;
    for &u in attackers {
        let (targets, d) = optimal_targets(u, vectors, k);
        if d > 0.0 {
            result.plan.push(u, targets);
            result.individual_influences.push((u, d));
            sum += d;
        }
    }
    result.objective_gain = p * sum;
    Ok(result)
}

/// Build an attack from fixed attackers and fixed target sets.
pub fn attack_with_targets(
    attackers: &[usize],
    targets: Vec<Vec<usize>>,
    vectors: &InfluenceVectors,
    k: usize,
    p: f64,
) -> Result<AttackResult> {
    check_attack_args(attackers.len(), p)?;
    let mut result = AttackResult::empty(p, attackers.len(), k);
    let mut sum = 0.0;
    for (&u, t) in attackers.iter().zip(targets) {
        let d: f64 = t.iter().map(|&v| vectors.delta(u, v)).sum();
        result.plan.push(u, t);
        result.individual_influences.push((u, d));
        sum += d;
    }
    result.plan.validate(vectors.n())?;
    result.objective_gain = p * sum;
    Ok(result)
}

/// Objective evaluated by [`brute_force_attack`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Fresh linear solve on the perturbed network.
    Exact,
    /// First-order approximation.
    Approx,
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Number of plans with at most `m` attackers and `1..=k` targets each, plus the empty plan.
pub fn plan_count(n: usize, m: usize, k: usize) -> u128 {
    let per_attacker: u128 = (1..=k.min(n.saturating_sub(1)))
        .map(|j| binomial(n - 1, j))
        .fold(0u128, |a, b| a.saturating_add(b));
    (0..=m.min(n)).fold(0u128, |acc, a| {
        let mut term = binomial(n, a);
        for _ in 0..a {
            term = term.saturating_mul(per_attacker);
        }
        acc.saturating_add(term)
    })
}

/// All `r`-subsets of `items` in lexicographic order.
fn combinations(items: &[usize], r: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if r > n {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = r;
        while i > 0 && idx[i - 1] == n - r + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exhaustive search over every plan with at most `m` attackers and `k`
/// targets per attacker.
///
/// Plans are visited in a fixed order (empty plan, then attacker sets by
/// size and lexicographically, target sets likewise) and a later plan only
/// replaces the incumbent when better by a relative margin of 1e-12.
pub fn brute_force_attack(
    sys: &FjSystem,
    s: &OpinionVector,
    m: usize,
    k: usize,
    p: f64,
    objective: Objective,
    cap: u128,
) -> Result<AttackResult> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::argument(format!("p = {p} must lie in [0, 1]")));
    }
    let n = sys.n();
    let estimate = plan_count(n, m, k);
    if estimate > cap {
        return Err(Error::CapExceeded { estimate, cap });
    }
    let vectors = influence_vectors(sys, s)?;
    let base = match objective {
        Objective::Exact => total_opinion(&vectors.z_star),
        Objective::Approx => vectors.total(),
    };
    let always_valid = m as f64 * p <= 1.0 + 1e-12;

    // target options per attacker with their summed meta-influence
    let options: Vec<Vec<(Vec<usize>, f64)>> = (0..n)
        .map(|u| {
            let others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            (1..=k.min(n - 1))
                .flat_map(|r| combinations(&others, r))
                .map(|t| {
                    let d = t.iter().map(|&v| vectors.delta(u, v)).sum();
                    (t, d)
                })
                .collect()
        })
        .collect();

    let mut best_value = base;
    let mut best: Option<(Vec<usize>, Vec<usize>)> = None;
    let users: Vec<usize> = (0..n).collect();
    let max_attackers = if k == 0 || n < 2 { 0 } else { m.min(n) };
    for size in 1..=max_attackers {
        for attackers in combinations(&users, size) {
            let mut choice = vec![0usize; size];
            loop {
                let plan = || {
                    attackers
                        .iter()
                        .zip(&choice)
                        .fold(AttackPlan::new(p, m, k), |plan, (&u, &c)| {
                            plan.with(u, options[u][c].0.clone())
                        })
                };
                let value = match objective {
                    Objective::Approx => {
                        if always_valid || plan().validate(n).is_ok() {
                            let gain: f64 =
                                attackers.iter().zip(&choice).map(|(&u, &c)| options[u][c].1).sum();
                            Some(base + p * gain)
                        } else {
                            None
                        }
                    }
                    Objective::Exact => {
                        let plan = plan();
                        if always_valid || plan.validate(n).is_ok() {
                            Some(exact_perturbed_total(&plan, sys, s)?)
                        } else {
                            None
                        }
                    }
                };
                if let Some(value) = value {
                    if value > best_value + IMPROVEMENT_TOL * best_value.abs().max(1.0) {
                        best_value = value;
                        best = Some((attackers.clone(), choice.clone()));
                    }
                }
                // odometer over target options
                let mut pos = size;
                let mut exhausted = true;
                while pos > 0 {
                    pos -= 1;
                    choice[pos] += 1;
                    if choice[pos] < options[attackers[pos]].len() {
                        exhausted = false;
                        break;
                    }
                    choice[pos] = 0;
                }
                if exhausted {
                    break;
                }
            }
        }
    }

    let mut result = AttackResult::empty(p, m, k);
    if let Some((attackers, choice)) = best {
        for (u, c) in attackers.into_iter().zip(choice) {
            let (targets, d) = options[u][c].clone();
            result.plan.push(u, targets);
            result.individual_influences.push((u, d));
        }
    }
    result.objective_gain = best_value - base;
    Ok(result)
}

/// Attacker-selection baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackerCriterion {
    InternalOpinion,
    PageRank,
    OutDegree,
    Random,
}

impl AttackerCriterion {
    pub const ALL: [AttackerCriterion; 4] = [
        AttackerCriterion::InternalOpinion,
        AttackerCriterion::PageRank,
        AttackerCriterion::OutDegree,
        AttackerCriterion::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackerCriterion::InternalOpinion => "internal_opinion",
            AttackerCriterion::PageRank => "pagerank",
            AttackerCriterion::OutDegree => "outdegree",
            AttackerCriterion::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown attacker criterion `{s}`")))
    }
}

/// Target-selection baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetCriterion {
    Stubbornness,
    NeighborAvgOpinion,
    InternalOpinion,
    PageRank,
    OutDegree,
    Random,
}

impl TargetCriterion {
    pub const ALL: [TargetCriterion; 6] = [
        TargetCriterion::Stubbornness,
        TargetCriterion::NeighborAvgOpinion,
        TargetCriterion::InternalOpinion,
        TargetCriterion::PageRank,
        TargetCriterion::OutDegree,
        TargetCriterion::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetCriterion::Stubbornness => "stubbornness",
            TargetCriterion::NeighborAvgOpinion => "neighbor_avg_opinion",
            TargetCriterion::InternalOpinion => "internal_opinion",
            TargetCriterion::PageRank => "pagerank",
            TargetCriterion::OutDegree => "outdegree",
            TargetCriterion::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown target criterion `{s}`")))
    }
}

/// PageRank where user `i` follows its influencers with the weights of row `i`.
///
/// Iterates `x <- d W^T x + (1 - d) / n` until the l1 change is below `tol`.
pub fn pagerank(w: &AdjacencyMatrix, damping: f64, tol: f64) -> DVector<f64> {
    let n = w.n();
    let teleport = (1.0 - damping) / n as f64;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..100_000 {
        let mut next = w.matrix().tr_mul(&x) * damping;
        next.add_scalar_mut(teleport);
        let change = (&next - &x).lp_norm(1);
        x = next;
        if change <= tol {
            break;
        }
    }
    x
}

fn ranked_ids(scores: impl IntoIterator<Item = f64>) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    scored.sort_unstable_by(by_score_desc);
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Select `m` attackers by a heuristic criterion.
pub fn heuristic_attackers(
    criterion: AttackerCriterion,
    sys: &FjSystem,
    s: &OpinionVector,
    m: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = sys.n();
    if m > n {
        return Err(Error::argument(format!("m = {m} exceeds n = {n}")));
    }
    if s.len() != n {
        return Err(Error::argument("opinion vector length does not match the system"));
    }
    let chosen = match criterion {
        AttackerCriterion::InternalOpinion => ranked_ids(s.iter().copied()),
        AttackerCriterion::PageRank => {
            ranked_ids(pagerank(sys.adjacency(), PAGERANK_DAMPING, PAGERANK_TOL).iter().copied())
        }
        AttackerCriterion::OutDegree => {
            ranked_ids(sys.adjacency().out_degrees().into_iter().map(|d| d as f64))
        }
        AttackerCriterion::Random => {
            let mut picked = index::sample(&mut seeded(seed), n, m).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    Ok(chosen.into_iter().take(m).collect())
}

/// Select up to `k` targets per attacker by a heuristic criterion.
///
/// Lists come back in the same order as `attackers`; an attacker never
/// targets itself.
pub fn heuristic_targets(
    criterion: TargetCriterion,
    attackers: &[usize],
    sys: &FjSystem,
    s: &OpinionVector,
    vectors: &InfluenceVectors,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let n = sys.n();
    if let Some(&u) = attackers.iter().find(|&&u| u >= n) {
        return Err(Error::argument(format!("attacker {u} outside 0..{n}")));
    }
    let order = match criterion {
        TargetCriterion::Stubbornness => ranked_ids(sys.stubbornness().iter().map(|a| -a)),
        TargetCriterion::NeighborAvgOpinion => ranked_ids(vectors.c2.iter().copied()),
        TargetCriterion::InternalOpinion => ranked_ids(s.iter().copied()),
        TargetCriterion::PageRank => {
            ranked_ids(pagerank(sys.adjacency(), PAGERANK_DAMPING, PAGERANK_TOL).iter().copied())
        }
        TargetCriterion::OutDegree => {
            ranked_ids(sys.adjacency().out_degrees().into_iter().map(|d| d as f64))
        }
        TargetCriterion::Random => {
            let mut rng = seeded(seed);
            let take = k.min(n - 1);
            return Ok(attackers
                .iter()
                .map(|&u| {
                    index::sample(&mut rng, n - 1, take)
                        .into_iter()
                        .map(|v| if v >= u { v + 1 } else { v })
                        .collect()
                })
                .collect());
        }
    };
    Ok(attackers
        .iter()
        .map(|&u| order.iter().copied().filter(|&v| v != u).take(k).collect())
        .collect())
}
