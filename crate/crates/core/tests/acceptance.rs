//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p fjguard-core --test acceptance`.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fjguard_core::attack::{
    brute_force_attack, candidate_attackers, optimal_attack, optimal_targets, Objective,
    BRUTE_FORCE_DEFAULT_CAP,
};
use fjguard_core::defense::{
    defend, min_total_baseline, plan_iterations, project, subgradient,
    worst_case_objective, BoundConstants, BoundVariant, DefenseBudget, DefenseOptions,
    DEFAULT_ITERATION_CAP,
};
use fjguard_core::fj::{FjSystem, OpinionVector, StubbornnessVector};
use fjguard_core::graph::{random_in_regular, random_opinions, random_row_stochastic};
use fjguard_core::harness::{
    run_comparison_experiment, ComparisonAxis, ExperimentConfig, ExperimentKind, GraphSource,
    Report,
};
use fjguard_core::perturbation::{
    exact_perturbed_total, influence_vectors, perturbed_matrix, AttackPlan,
};
use fjguard_core::rng::{derive_seed, seeded, SeededRng};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

/// Median relative surrogate-vs-exact gap of criterion 3b, pinned from a reference run.
const GAP_FIXTURE: f64 = 0.0;
const GAP_FIXTURE_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: "1", name: "stochasticity preservation", limit: Some(Duration::from_secs(10)), run: c1_stochasticity },
        Criterion { id: "2", name: "first-order fidelity", limit: Some(Duration::from_secs(30)), run: c2_fidelity },
        Criterion { id: "3", name: "attack oracle equivalence", limit: Some(Duration::from_secs(60)), run: c3_oracle },
        Criterion { id: "3b", name: "surrogate vs exact gap report", limit: None, run: c3b_gap },
        Criterion { id: "4", name: "influence ordering and attacker set", limit: None, run: c4_ordering },
        Criterion { id: "5", name: "projection correctness", limit: Some(Duration::from_secs(10)), run: c5_projection },
        Criterion { id: "6", name: "subgradient validity", limit: None, run: c6_subgradient },
        Criterion { id: "7", name: "defense optimality at tiny scale", limit: Some(Duration::from_secs(300)), run: c7_defense },
        Criterion { id: "8", name: "min-total exactness", limit: None, run: c8_min_total },
        Criterion { id: "9", name: "trend reproduction", limit: Some(Duration::from_secs(600)), run: c9_trends },
        Criterion { id: "10", name: "convexity", limit: None, run: c10_convexity },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == c.id) {
            continue;
        }
        let started = Instant::now();
        let outcome = (c.run)();
        let elapsed = started.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        if !pass {
            failures += 1;
        }
        let limit = c.limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        println!(
            "{} [{:>2}] {:<38} {:>8.2}s{}  {}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            limit,
            outcome.detail
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn random_system(rng: &mut SeededRng, n: usize, max_in: usize, alpha: (f64, f64)) -> FjSystem {
    let d = rng.random_range(1..=max_in.min(n - 1));
    let graph = random_in_regular(n, d, rng.random()).unwrap();
    let w = random_row_stochastic(&graph, rng.random()).unwrap();
    let a = StubbornnessVector::random(n, alpha.0, alpha.1, rng.random()).unwrap();
    FjSystem::new(w, a).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Dense `B = (I - (I - A) W)^{-1}` by explicit inversion.
fn dense_b(sys: &FjSystem) -> DMatrix<f64> {
    let n = sys.n();
    let i_a = DMatrix::from_diagonal(&sys.stubbornness().as_vector().map(|a| 1.0 - a));
    (DMatrix::identity(n, n) - i_a * sys.adjacency().matrix())
        .try_inverse()
        .unwrap()
}

/// Coefficients `w` with `approx total = w^T s` under a fixed plan, from dense matrices.
fn dense_plan_weights(sys: &FjSystem, b: &DMatrix<f64>, plan: &AttackPlan) -> DVector<f64> {
    let n = sys.n();
    let a = DMatrix::from_diagonal(sys.stubbornness().as_vector());
    let i_a = DMatrix::identity(n, n) - &a;
    let ba = b * &a;
    let mut w = ba.tr_mul(&ones(n));
    if !plan.is_empty() {
        // Delta_W entrywise from the definition
        let wm = sys.adjacency().matrix();
        let mut delta = DMatrix::zeros(n, n);
        for e in plan.entries() {
            for &v in &e.targets {
                delta[(v, e.attacker)] += 1.0;
                for j in 0..n {
                    delta[(v, j)] -= wm[(v, j)];
                }
            }
        }
        let m2 = b * i_a * delta * &ba;
        w += m2.tr_mul(&ones(n)) * plan.p;
    }
    w
}

fn random_feasible(rng: &mut SeededRng, budget: &DefenseBudget) -> OpinionVector {
    let n = budget.n();
    let scale = rng.random_range(0.0..1.0);
    let y = DVector::from_fn(n, |i, _| budget.s0[i] - scale * rng.random_range(0.0..1.0));
    project(&y, budget)
}

fn c1_stochasticity() -> Outcome {
    let mut rng = seeded(1);
    let n = 50;
    let mut worst_sum: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    for trial in 0..1000 {
        let d = rng.random_range(1..=10);
        let graph = random_in_regular(n, d, rng.random()).unwrap();
        let w = random_row_stochastic(&graph, rng.random()).unwrap();
        let plan = if trial % 10 == 0 {
            // saturated target: |A_v| p = 1
            let m = rng.random_range(1..=10);
            let p = 1.0 / m as f64;
            let attackers = index::sample(&mut rng, n - 1, m).into_iter().map(|u| u + 1);
            attackers.fold(AttackPlan::new(p, m, 1), |plan, u| plan.with(u, vec![0]))
        } else {
            let p: f64 = rng.random_range(1e-3..1.0);
            let m_max = ((1.0 / p).floor() as usize).clamp(1, 10);
            let m = rng.random_range(1..=m_max);
            let k = rng.random_range(1..=10);
            let mut plan = AttackPlan::new(p, m, k);
            for u in index::sample(&mut rng, n, m) {
                let size = rng.random_range(1..=k);
                let targets = index::sample(&mut rng, n - 1, size)
                    .into_iter()
                    .map(|v| if v >= u { v + 1 } else { v })
                    .collect();
                plan.push(u, targets);
            }
            plan
        };
        if let Err(e) = plan.validate(n) {
            return Outcome::new(false, format!("trial {trial}: generated plan rejected: {e}"));
        }
        let tilde = perturbed_matrix(&plan, &w).unwrap();
        let m = tilde.matrix();
        for i in 0..n {
            worst_sum = worst_sum.max((m.row(i).sum() - 1.0).abs());
        }
        min_entry = min_entry.min(m.min());
    }
    Outcome::new(
        worst_sum <= 1e-12 && min_entry >= 0.0,
        format!("1000 pairs, max |row sum - 1| = {worst_sum:.2e}, min entry = {min_entry:.2e}"),
    )
}

fn c2_fidelity() -> Outcome {
    let ps = [1e-3, 2e-3, 4e-3];
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let mut rng = seeded(200 + seed);
        let sys = random_system(&mut rng, 100, 8, (0.0, 1.0));
        let s = random_opinions(100, 0.0, 1.0, rng.random()).unwrap();
        let vectors = influence_vectors(&sys, &s).unwrap();
        let plan = optimal_attack(&vectors, 5, 10, 0.1).unwrap().plan;
        let errs: Vec<f64> = ps
            .iter()
            .map(|&p| {
                let at_p = plan.with_p(p);
                (exact_perturbed_total(&at_p, &sys, &s).unwrap() - vectors.approx_total(&at_p)).abs()
            })
            .collect();
        ratios.push(errs[1] / errs[0]);
        ratios.push(errs[2] / errs[1]);
    }
    let med = median(ratios.clone());
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        (3.0..=5.0).contains(&med),
        format!("median err(2p)/err(p) = {med:.4} over {} ratios (range {lo:.4}..{hi:.4})", ratios.len()),
    )
}

struct TinyInstance {
    sys: FjSystem,
    s: OpinionVector,
    m: usize,
    k: usize,
    p: f64,
}

fn tiny_instance(i: u64) -> TinyInstance {
    let mut rng = seeded(derive_seed(3, &format!("instance/{i}")));
    let n = rng.random_range(3..=10);
    let sys = random_system(&mut rng, n, 3, (0.0, 1.0));
    let s = random_opinions(n, 0.0, 1.0, rng.random()).unwrap();
    TinyInstance {
        sys,
        s,
        m: rng.random_range(1..=2),
        k: rng.random_range(1..=2),
        p: rng.random_range(0.01..0.5),
    }
}

fn c3_oracle() -> Outcome {
    let diffs: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let t = tiny_instance(i);
            let vectors = influence_vectors(&t.sys, &t.s).unwrap();
            let lin = vectors.approx_total(&optimal_attack(&vectors, t.m, t.k, t.p).unwrap().plan);
            let bf = brute_force_attack(&t.sys, &t.s, t.m, t.k, t.p, Objective::Approx, BRUTE_FORCE_DEFAULT_CAP)
                .unwrap();
            let bf_total = vectors.total() + bf.objective_gain;
            (lin - bf_total).abs()
        })
        .collect();
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    let bad = diffs.iter().filter(|&&d| d > 1e-9).count();
    Outcome::new(bad == 0, format!("200 instances, max |linear - brute force| = {worst:.2e}, {bad} above 1e-9"))
}

fn c3b_gap() -> Outcome {
    let p = 0.01;
    let rows: Vec<(u64, usize, f64, f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let t = tiny_instance(i);
            let vectors = influence_vectors(&t.sys, &t.s).unwrap();
            let f = vectors.total();
            let plan = optimal_attack(&vectors, t.m, t.k, p).unwrap().plan;
            let lin_exact = exact_perturbed_total(&plan, &t.sys, &t.s).unwrap();
            let bf = brute_force_attack(&t.sys, &t.s, t.m, t.k, p, Objective::Exact, BRUTE_FORCE_DEFAULT_CAP)
                .unwrap();
            (i, t.sys.n(), f, lin_exact, f + bf.objective_gain)
        })
        .collect();
    let mut csv = String::from("# fjguard acceptance 3b v1\ninstance,n,f,f_exact_linear,f_exact_brute_force,relative_gap\n");
    let mut gaps = Vec::new();
    let mut min_gap = f64::INFINITY;
    for &(i, n, f, lin, bf) in &rows {
        let gain = bf - f;
        let rel = if gain > 1e-15 { (bf - lin) / gain } else { 0.0 };
        min_gap = min_gap.min(bf - lin);
        gaps.push(rel);
        let _ = writeln!(csv, "{i},{n},{f},{lin},{bf},{rel}");
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_3b_gap.csv");
    let written = std::fs::write(&path, &csv).is_ok();
    let med = median(gaps.clone());
    let max = gaps.iter().copied().fold(0.0, f64::max);
    let fixture_ok = if GAP_FIXTURE.is_nan() {
        true
    } else {
        (med - GAP_FIXTURE).abs() <= GAP_FIXTURE_TOL * GAP_FIXTURE.abs().max(1e-12)
    };
    Outcome::new(
        written && fixture_ok && min_gap >= -1e-12,
        format!(
            "median relative gap = {med:.6e} (fixture {GAP_FIXTURE:.6e}), max = {max:.3e}, report {}",
            path.display()
        ),
    )
}

fn c4_ordering() -> Outcome {
    let mut worst_violation: f64 = 0.0;
    let mut violating_pairs = 0;
    let mut explained = 0;
    let mut worst_unrestricted: f64 = 0.0;
    let mut subset_failures = 0;
    let mut extreme_failures = 0;
    for i in 0..100u64 {
        let mut rng = seeded(400 + i);
        let n = 50;
        let sys = random_system(&mut rng, n, 8, (0.0, 1.0));
        let s = random_opinions(n, 0.0, 1.0, rng.random()).unwrap();
        let m = rng.random_range(1..=10);
        let k = rng.random_range(1..=10);
        let vectors = influence_vectors(&sys, &s).unwrap();
        let z = vectors.z_star.as_vector();
        let best: Vec<(Vec<usize>, f64)> = (0..n).map(|u| optimal_targets(u, &vectors, k)).collect();
        // the same quantity with self-targeting permitted
        let unrestricted: Vec<f64> = (0..n)
            .map(|u| {
                let mut d: Vec<f64> = (0..n).map(|v| vectors.delta(u, v)).filter(|&d| d > 0.0).collect();
                d.sort_by(|a, b| b.total_cmp(a));
                d.iter().take(k).sum()
            })
            .collect();
        for u1 in 0..n {
            for u2 in 0..n {
                if u1 != u2 && z[u1] >= z[u2] {
                    let gap = best[u2].1 - best[u1].1;
                    worst_violation = worst_violation.max(gap);
                    if gap > 1e-12 {
                        violating_pairs += 1;
                        if best[u2].0.contains(&u1) {
                            explained += 1;
                        }
                    }
                    worst_unrestricted = worst_unrestricted.max(unrestricted[u2] - unrestricted[u1]);
                }
            }
        }
        let result = optimal_attack(&vectors, m, k, 0.05).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
        let top = &order[..m];
        let attackers: Vec<usize> = result.plan.attackers().collect();
        if !attackers.iter().all(|u| top.contains(u)) || candidate_attackers(&vectors, m) != top {
            subset_failures += 1;
        }
        let argmax = order[0];
        let argmin = order[n - 1];
        if attackers.contains(&argmin) || (!attackers.is_empty() && !attackers.contains(&argmax)) {
            extreme_failures += 1;
        }
    }
    Outcome::new(
        worst_violation <= 1e-12 && subset_failures == 0 && extreme_failures == 0,
        format!(
            "100 instances, max ordering violation = {worst_violation:.2e} over {violating_pairs} pairs \
             ({explained} where the lower-ranked user's best targets include the higher-ranked one; \
             with self-targeting permitted the violation is {worst_unrestricted:.2e}), \
             attacker sets outside top-m = {subset_failures}, argmax/argmin failures = {extreme_failures}"
        ),
    )
}

/// Bisection on the shift to 1e-12.
fn bisection_projection(y: &DVector<f64>, s0: &DVector<f64>, mu: f64) -> DVector<f64> {
    let clamp = |l: f64| DVector::from_fn(y.len(), |i, _| (y[i] + l).clamp(0.0, s0[i]));
    let used = |x: &DVector<f64>| (s0 - x).sum();
    if used(&clamp(0.0)) <= mu {
        return clamp(0.0);
    }
    let mut lo = 0.0;
    let mut hi = (s0 - y).max().max(0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if used(&clamp(mid)) > mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(hi)
}

fn c5_projection() -> Outcome {
    let mut rng = seeded(5);
    let (mut infeasible, mut not_idempotent, mut oracle_misses) = (0, 0, 0);
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let s0 = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let mu = rng.random_range(0.0..=1.0) * s0.sum();
        let spread = rng.random_range(0.1..3.0);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-spread..spread) + 0.5);
        let budget = DefenseBudget::new(OpinionVector::from(s0.clone()), mu).unwrap();
        let out = project(&y, &budget);
        let x = out.as_vector();
        let feasible = (&s0 - x).sum() <= mu + 1e-9
            && x.iter().zip(s0.iter()).all(|(&a, &c)| a >= 0.0 && a <= c);
        if !feasible {
            infeasible += 1;
        }
        if (project(x, &budget).as_vector() - x).amax() > 1e-10 {
            not_idempotent += 1;
        }
        let gap = (bisection_projection(&y, &s0, mu) - x).amax();
        worst_oracle = worst_oracle.max(gap);
        if gap > 1e-8 {
            oracle_misses += 1;
        }
    }
    Outcome::new(
        infeasible + not_idempotent + oracle_misses == 0,
        format!(
            "1000 triples, infeasible = {infeasible}, non-idempotent = {not_idempotent}, max |out - bisection| = {worst_oracle:.2e}"
        ),
    )
}

fn c6_subgradient() -> Outcome {
    let (m, k, p) = (3, 3, 0.1);
    let mut inequality_failures = 0;
    let mut worst_slack = f64::INFINITY;
    let mut worst_fd: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = seeded(600 + i);
        let sys = random_system(&mut rng, 15, 4, (0.0, 1.0));
        let s0 = random_opinions(15, 0.6, 1.0, rng.random()).unwrap();
        let budget = DefenseBudget::new(s0, rng.random_range(0.5..5.0)).unwrap();
        let s = random_feasible(&mut rng, &budget);
        let (f, plan) = worst_case_objective(&s, &sys, m, k, p).unwrap();
        let g = subgradient(&s, &sys, &plan).unwrap();
        for _ in 0..50 {
            let t = random_feasible(&mut rng, &budget);
            let (ft, _) = worst_case_objective(&t, &sys, m, k, p).unwrap();
            let slack = ft - f - g.dot(&(t.as_vector() - s.as_vector()));
            worst_slack = worst_slack.min(slack);
            if slack < -1e-9 {
                inequality_failures += 1;
            }
        }
        // central differences of the fixed-plan objective
        let fixed = |x: &OpinionVector| influence_vectors(&sys, x).unwrap().approx_total(&plan);
        let h = 1e-6;
        for j in 0..15 {
            let mut up = s.clone();
            up[j] += h;
            let mut down = s.clone();
            down[j] -= h;
            let fd = (fixed(&up) - fixed(&down)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - g[j]).abs() / g[j].abs());
        }
    }
    Outcome::new(
        inequality_failures == 0 && worst_fd <= 1e-4,
        format!(
            "20 systems x 50 points, inequality failures = {inequality_failures} (min slack {worst_slack:.2e}), max finite-difference rel. error = {worst_fd:.2e}"
        ),
    )
}

/// `min_s max_plan w_plan^T s` over the budget set, by LP over every plan with
/// at most one attacker and one target.
fn enumeration_lp(sys: &FjSystem, budget: &DefenseBudget, p: f64) -> f64 {
    let n = sys.n();
    let b = dense_b(sys);
    let mut plans = vec![AttackPlan::new(p, 1, 1)];
    for u in 0..n {
        for v in 0..n {
            if u != v {
                plans.push(AttackPlan::new(p, 1, 1).with(u, vec![v]));
            }
        }
    }
    let weights: Vec<DVector<f64>> = plans.iter().map(|pl| dense_plan_weights(sys, &b, pl)).collect();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let s: Vec<_> = (0..n).map(|i| lp.add_var(0.0, (0.0, budget.s0[i]))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for w in &weights {
        let mut expr: Vec<_> = s.iter().zip(w.iter()).map(|(&v, &c)| (v, c)).collect();
        expr.push((t, -1.0));
        lp.add_constraint(expr, ComparisonOp::Le, 0.0);
    }
    let budget_expr: Vec<_> = s.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(budget_expr, ComparisonOp::Ge, budget.s0.iter().sum::<f64>() - budget.mu);
    let solution = lp.solve().unwrap();
    // re-evaluate the max at the LP solution so solver round-off does not leak in
    let x = DVector::from_fn(n, |i, _| solution[s[i]].clamp(0.0, budget.s0[i]));
    weights.iter().map(|w| w.dot(&x)).fold(f64::NEG_INFINITY, f64::max)
}

fn c7_defense() -> Outcome {
    let p = 0.1;
    let results: Vec<(f64, f64, u64)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(700 + i);
            let n = rng.random_range(3..=8);
            let sys = random_system(&mut rng, n, 3, (0.5, 0.95));
            let s0 = random_opinions(n, 0.6, 1.0, rng.random()).unwrap();
            let mu = rng.random_range(0.05..0.3);
            let budget = DefenseBudget::new(s0, mu).unwrap();
            let mut constants = BoundConstants::for_system(&sys, 1, 1, p, mu, 1.0);
            constants.eta0 = constants.balanced_eta0().unwrap();
            let plan = plan_iterations(0.01, &constants, BoundVariant::Composed, DEFAULT_ITERATION_CAP).unwrap();
            let run = defend(
                &sys,
                &budget,
                1,
                1,
                p,
                DefenseOptions { eta0: constants.eta0, t_max: plan.t_max },
            )
            .unwrap();
            let optimum = enumeration_lp(&sys, &budget, p);
            (run.best_f - optimum, plan.bound, plan.t_max)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let below = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let within = results.iter().all(|&(gap, bound, _)| gap <= bound && (-1e-9..=0.01).contains(&gap));
    let t_max = results.iter().map(|r| r.2).max().unwrap();
    Outcome::new(
        within,
        format!("20 instances, gap to LP optimum in [{below:.2e}, {worst:.2e}], largest T_max = {t_max}"),
    )
}

/// Minimum of `c^T x` over the vertices of `{0 <= x <= s0, 1^T (s0 - x) <= mu}`.
fn vertex_enumeration(c: &DVector<f64>, s0: &DVector<f64>, mu: f64) -> f64 {
    let n = c.len();
    let total: f64 = s0.sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        // budget inactive: every coordinate at a bound
        let x = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { 0.0 } else { s0[i] });
        if total - x.sum() <= mu + 1e-12 {
            best = best.min(c.dot(&x));
        }
        // budget active: one free coordinate fixed by the budget equation
        for free in 0..n {
            if mask >> free & 1 == 1 {
                continue;
            }
            let mut y = x.clone();
            let others = total - s0[free] - (x.sum() - x[free]);
            let value = s0[free] - (mu - others);
            if (-1e-12..=s0[free] + 1e-12).contains(&value) {
                y[free] = value.clamp(0.0, s0[free]);
                best = best.min(c.dot(&y));
            }
        }
    }
    best
}

fn c8_min_total() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = seeded(800 + i);
        let n = rng.random_range(1..=8);
        let sys = if n == 1 {
            let w = fjguard_core::graph::AdjacencyMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
            FjSystem::new(w, StubbornnessVector::random(1, 0.0, 1.0, rng.random()).unwrap()).unwrap()
        } else {
            random_system(&mut rng, n, 3, (0.0, 1.0))
        };
        let s0 = random_opinions(n, 0.0, 1.0, rng.random()).unwrap();
        let mu = rng.random_range(0.0..=1.2) * s0.iter().sum::<f64>();
        let budget = DefenseBudget::new(s0.clone(), mu).unwrap();
        let b = dense_b(&sys);
        let c = (b * DMatrix::from_diagonal(sys.stubbornness().as_vector())).tr_mul(&ones(n));
        let x = min_total_baseline(&sys, &budget).unwrap();
        let greedy = c.dot(x.as_vector());
        let oracle = vertex_enumeration(&c, s0.as_vector(), mu);
        worst = worst.max((greedy - oracle).abs());
    }
    Outcome::new(worst <= 1e-10, format!("100 instances, max |greedy - vertex optimum| = {worst:.2e}"))
}

fn trend_config(kind: ExperimentKind) -> ExperimentConfig {
    let graph = GraphSource::PreferentialAttachment { nodes: 500, links: 5 };
    let mut c = ExperimentConfig::synthetic(kind, graph, 9000);
    c.id = format!("trend-{kind}");
    c.repetitions = 10;
    c
}

/// For each `(sweep value, baseline)`, the fraction of seeds in which the
/// proposed method beats the baseline by `better`.
fn win_rates(
    report: &Report,
    proposed: &str,
    key: impl Fn(&fjguard_core::harness::ReportRow) -> String,
    better: impl Fn(f64, f64) -> bool,
    value: impl Fn(&fjguard_core::harness::ReportRow) -> f64,
) -> Vec<(String, String, f64)> {
    let rows: Vec<_> = report.per_seed().collect();
    let mut out: Vec<(String, String, f64)> = Vec::new();
    let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).filter(|m| *m != proposed).collect();
    methods.sort();
    methods.dedup();
    let mut keys: Vec<String> = rows.iter().map(|r| key(r)).collect();
    keys.dedup();
    keys.sort();
    keys.dedup();
    for k in &keys {
        for method in &methods {
            let mut wins = 0;
            let mut total = 0;
            for base in rows.iter().filter(|r| r.method == *method && key(r) == *k) {
                let ours = rows
                    .iter()
                    .find(|r| r.method == proposed && r.seed == base.seed && key(r) == *k)
                    .expect("proposed row for every seed");
                total += 1;
                if better(value(ours), value(base)) {
                    wins += 1;
                }
            }
            if total > 0 {
                out.push((k.clone(), method.to_string(), wins as f64 / total as f64));
            }
        }
    }
    out
}

fn c9_trends() -> Outcome {
    let mut attack = trend_config(ExperimentKind::Attackers);
    attack.p = vec![0.1];
    attack.m = vec![2, 4, 8];
    attack.k = vec![100];
    let attack_report = run_comparison_experiment(&attack, ComparisonAxis::Attackers).unwrap();
    let attack_rates = win_rates(
        &attack_report,
        "proposed",
        |r| format!("m={}", r.m),
        |a, b| a > b,
        |r| r.exact_increase(),
    );
    let attack_worst = attack_rates.iter().map(|r| r.2).fold(1.0, f64::min);

    let mut targets = trend_config(ExperimentKind::Targets);
    targets.p = vec![0.1];
    targets.m = vec![5];
    targets.k = vec![25, 50, 100];
    let target_report = run_comparison_experiment(&targets, ComparisonAxis::Targets).unwrap();
    let target_rates = win_rates(
        &target_report,
        "proposed",
        |r| format!("k={}", r.k),
        |a, b| a > b,
        |r| r.exact_increase(),
    );
    let target_worst = target_rates.iter().map(|r| r.2).fold(1.0, f64::min);

    let mut defense = trend_config(ExperimentKind::Defense);
    defense.p = vec![0.15];
    defense.m = vec![6];
    defense.k = vec![100];
    defense.mu = vec![10.0, 20.0, 40.0, 80.0];
    defense.eta0 = DEFENSE_ETA0;
    defense.t_max = DEFENSE_T_MAX;
    let defense_report = run_comparison_experiment(&defense, ComparisonAxis::Defense).unwrap();
    let rows: Vec<_> = defense_report.per_seed().collect();
    let seeds: Vec<u64> = {
        let mut s: Vec<u64> = rows.iter().filter_map(|r| r.seed).collect();
        s.sort();
        s.dedup();
        s
    };
    let winning_seeds = seeds
        .iter()
        .filter(|&&seed| {
            defense.mu.iter().all(|&mu| {
                let get = |method: &str| {
                    rows.iter()
                        .find(|r| r.seed == Some(seed) && r.mu == mu && r.method == method)
                        .unwrap()
                        .f_exact
                };
                get("proposed_defense") < get("min_total")
            })
        })
        .count();
    let defense_rate = winning_seeds as f64 / seeds.len() as f64;

    let mut detail = format!(
        "attackers: min win rate {attack_worst:.2}; targets: min win rate {target_worst:.2}; defense: {winning_seeds}/{} seeds win at every mu",
        seeds.len()
    );
    for (k, method, rate) in attack_rates.iter().chain(&target_rates) {
        if *rate < 0.9 {
            let _ = write!(detail, "; {k} vs {method}: {rate:.2}");
        }
    }
    Outcome::new(
        attack_worst >= 0.9 && target_worst >= 0.9 && defense_rate >= 0.95,
        detail,
    )
}

/// Defense step scale and iteration count used by the criterion 9 sweep.
const DEFENSE_ETA0: f64 = 0.1;
const DEFENSE_T_MAX: u64 = 500;

fn c10_convexity() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut rng = seeded(10);
    let mut i = 0;
    while i < 500 {
        let n = rng.random_range(5..=30);
        let sys = random_system(&mut rng, n, 5, (0.0, 1.0));
        let s0 = random_opinions(n, 0.0, 1.0, rng.random()).unwrap();
        let budget = DefenseBudget::new(s0, rng.random_range(0.0..n as f64 * 0.5)).unwrap();
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=5);
        let p = rng.random_range(0.01..0.25);
        for _ in 0..10 {
            let a = random_feasible(&mut rng, &budget);
            let b = random_feasible(&mut rng, &budget);
            let lambda = rng.random_range(0.0..1.0);
            let mix = OpinionVector::from(a.as_vector() * lambda + b.as_vector() * (1.0 - lambda));
            let fa = worst_case_objective(&a, &sys, m, k, p).unwrap().0;
            let fb = worst_case_objective(&b, &sys, m, k, p).unwrap().0;
            let fm = worst_case_objective(&mix, &sys, m, k, p).unwrap().0;
            let excess = fm - (lambda * fa + (1.0 - lambda) * fb);
            worst = worst.max(excess);
            if excess > 1e-9 {
                failures += 1;
            }
            i += 1;
        }
    }
    Outcome::new(failures == 0, format!("500 checks, max excess over the chord = {worst:.2e}"))
}
