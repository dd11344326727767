//! Experiment pipelines: one system per seed, every sweep point per system.

use std::fs;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, GraphSource, OpinionSource};
use super::report::{Report, ReportRow};
use crate::attack::{
    attack_with_attackers, attack_with_targets, candidate_attackers, heuristic_attackers,
    heuristic_targets, optimal_attack, AttackResult,
};
use crate::defense::{defend, min_total_baseline, DefenseBudget, DefenseOptions};
use crate::error::{Error, Result};
use crate::fj::{FjSystem, OpinionVector, StubbornnessVector};
use crate::graph::{
    load_edge_list, preferential_attachment, random_in_regular, random_opinions,
    random_row_stochastic, EdgeListOptions, Graph,
};
use crate::io::{read_opinion_csv, LoadedOpinions};
use crate::perturbation::{exact_perturbed_total, influence_vectors, InfluenceVectors};
use crate::rng::derive_seed;

/// Which comparison a [`run_comparison_experiment`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonAxis {
    Attackers,
    Targets,
    Defense,
}

/// Files read once for every seed.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub graph: Option<Graph>,
    pub opinions: Option<LoadedOpinions>,
}

impl Inputs {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let graph = match &config.graph {
            GraphSource::File { path, symmetrize } => {
                let text = fs::read_to_string(path)?;
                let options = if *symmetrize {
                    EdgeListOptions::undirected()
                } else {
                    EdgeListOptions::directed()
                };
                Some(load_edge_list(&text, options)?)
            }
            _ => None,
        };
        let opinions = match (&config.opinions, &graph) {
            (OpinionSource::File { path, rescale }, Some(g)) => {
                let text = fs::read_to_string(path)?;
                Some(read_opinion_csv(&text, g.id_map(), *rescale)?)
            }
            (OpinionSource::File { .. }, None) => {
                return Err(Error::argument(
                    "opinion files need a graph file to resolve node ids",
                ))
            }
            _ => None,
        };
        Ok(Self { graph, opinions })
    }
}

/// A seeded system and its innate opinions.
#[derive(Debug)]
pub struct Instance {
    pub seed: u64,
    pub sys: FjSystem,
    pub s0: OpinionVector,
}

pub fn build_instance(config: &ExperimentConfig, inputs: &Inputs, seed: u64) -> Result<Instance> {
    let graph = match (&config.graph, &inputs.graph) {
        (_, Some(g)) => g.clone(),
        (GraphSource::PreferentialAttachment { nodes, links }, None) => {
            preferential_attachment(*nodes, *links, derive_seed(seed, "graph"))?
        }
        (GraphSource::InRegular { nodes, in_degree }, None) => {
            random_in_regular(*nodes, *in_degree, derive_seed(seed, "graph"))?
        }
        (GraphSource::File { .. }, None) => {
            return Err(Error::argument("graph file was not loaded"));
        }
    };
    let n = graph.n();
    let w = random_row_stochastic(&graph, derive_seed(seed, "weights"))?;
    let (lo, hi) = config.stubbornness;
    let alpha = StubbornnessVector::random(n, lo, hi, derive_seed(seed, "stubbornness"))?;
    let s0 = match (&config.opinions, &inputs.opinions) {
        (_, Some(loaded)) => loaded.values.clone(),
        (OpinionSource::Uniform { lo, hi }, None) => {
            random_opinions(n, *lo, *hi, derive_seed(seed, "opinions"))?
        }
        (OpinionSource::File { .. }, None) => {
            return Err(Error::argument("opinion file was not loaded"));
        }
    };
    Ok(Instance {
        seed,
        sys: FjSystem::new(w, alpha)?,
        s0,
    })
}

/// Dispatch on the configured experiment kind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    match config.kind {
        ExperimentKind::Increase => run_increase_experiment(config),
        ExperimentKind::Attackers => run_comparison_experiment(config, ComparisonAxis::Attackers),
        ExperimentKind::Targets => run_comparison_experiment(config, ComparisonAxis::Targets),
        ExperimentKind::Defense => run_comparison_experiment(config, ComparisonAxis::Defense),
    }
}

fn notes(config: &ExperimentConfig, inputs: &Inputs) -> Vec<String> {
    let mut notes = vec![format!(
        "experiment={} kind={} seed={} repetitions={}",
        config.id, config.kind, config.seed, config.repetitions
    )];
    if let Some(loaded) = &inputs.opinions {
        notes.push(format!("opinion_map={}", loaded.map));
    }
    notes
}

fn per_seed(
    config: &ExperimentConfig,
    inputs: &Inputs,
    body: impl Fn(&Instance) -> Result<Vec<ReportRow>> + Sync,
) -> Result<Report> {
    let chunks: Vec<Vec<ReportRow>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let instance = build_instance(config, inputs, config.repetition_seed(r))?;
            body(&instance)
        })
        .collect::<Result<_>>()?;
    let mut report = Report {
        notes: notes(config, inputs),
        rows: chunks.into_iter().flatten().collect(),
    };
    report.push_means();
    Ok(report)
}

struct Point {
    p: f64,
    m: usize,
    k: usize,
    mu: f64,
}

impl Point {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        config: &ExperimentConfig,
        seed: u64,
        method: &str,
        f: f64,
        f_exact: f64,
        f_approx: f64,
        started: Instant,
    ) -> ReportRow {
        ReportRow {
            experiment: config.id.clone(),
            seed: Some(seed),
            p: self.p,
            m: self.m,
            k: self.k,
            mu: self.mu,
            method: method.to_string(),
            f,
            f_exact,
            f_approx,
            wall_time: started.elapsed(),
        }
    }
}

fn attack_row(
    config: &ExperimentConfig,
    instance: &Instance,
    point: &Point,
    vectors: &InfluenceVectors,
    method: &str,
    attack: &AttackResult,
    started: Instant,
) -> Result<ReportRow> {
    let f = vectors.total();
    let f_exact = exact_perturbed_total(&attack.plan, &instance.sys, &instance.s0)?;
    let f_approx = vectors.approx_total(&attack.plan);
    Ok(point.row(config, instance.seed, method, f, f_exact, f_approx, started))
}

fn sweep(config: &ExperimentConfig) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
    config.p.iter().flat_map(move |&p| {
        config
            .m
            .iter()
            .flat_map(move |&m| config.k.iter().map(move |&k| (p, m, k)))
    })
}

/// Exact and first-order perturbed totals under the proposed attack for
/// every `(p, m, k)` and seed, followed by means over seeds.
pub fn run_increase_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let inputs = Inputs::load(config)?;
    per_seed(config, &inputs, |instance| {
        let vectors = influence_vectors(&instance.sys, &instance.s0)?;
        let mut rows = Vec::new();
        for (p, m, k) in sweep(config) {
            let started = Instant::now();
            let point = Point { p, m, k, mu: 0.0 };
            let attack = optimal_attack(&vectors, m, k, p)?;
            rows.push(attack_row(config, instance, &point, &vectors, "proposed", &attack, started)?);
        }
        Ok(rows)
    })
}

/// Compare the proposed attack or defense against baselines along `axis`.
///
/// - attackers: each attacker criterion picks `m` users, who then take
///   their optimal targets.
/// - targets: the proposed attackers pick `k` targets by each criterion.
/// - defense: no defense, Min-Total and the proposed defense for every
///   budget, each evaluated without and under the optimal attack.
pub fn run_comparison_experiment(config: &ExperimentConfig, axis: ComparisonAxis) -> Result<Report> {
    config.validate()?;
    let inputs = Inputs::load(config)?;
    per_seed(config, &inputs, |instance| match axis {
        ComparisonAxis::Attackers => attackers_axis(config, instance),
        ComparisonAxis::Targets => targets_axis(config, instance),
        ComparisonAxis::Defense => defense_axis(config, instance),
    })
}

fn attackers_axis(config: &ExperimentConfig, instance: &Instance) -> Result<Vec<ReportRow>> {
    let vectors = influence_vectors(&instance.sys, &instance.s0)?;
    let mut rows = Vec::new();
    for (p, m, k) in sweep(config) {
        let point = Point { p, m, k, mu: 0.0 };
        let started = Instant::now();
        let attack = optimal_attack(&vectors, m, k, p)?;
        rows.push(attack_row(config, instance, &point, &vectors, "proposed", &attack, started)?);
        if !config.baselines {
            continue;
        }
        for &criterion in &config.attacker_criteria {
            let started = Instant::now();
            let seed = derive_seed(instance.seed, &format!("random_attackers/m={m}"));
            let attackers = heuristic_attackers(criterion, &instance.sys, &instance.s0, m, seed)?;
            let attack = attack_with_attackers(&attackers, &vectors, k, p)?;
            rows.push(attack_row(config, instance, &point, &vectors, criterion.name(), &attack, started)?);
        }
    }
    Ok(rows)
}

fn targets_axis(config: &ExperimentConfig, instance: &Instance) -> Result<Vec<ReportRow>> {
    let vectors = influence_vectors(&instance.sys, &instance.s0)?;
    let mut rows = Vec::new();
    for (p, m, k) in sweep(config) {
        let point = Point { p, m, k, mu: 0.0 };
        let started = Instant::now();
        let attack = optimal_attack(&vectors, m, k, p)?;
        rows.push(attack_row(config, instance, &point, &vectors, "proposed", &attack, started)?);
        if !config.baselines {
            continue;
        }
        let attackers = candidate_attackers(&vectors, m);
        for &criterion in &config.target_criteria {
            let started = Instant::now();
            let seed = derive_seed(instance.seed, &format!("random_targets/m={m}/k={k}"));
            let targets = heuristic_targets(
                criterion,
                &attackers,
                &instance.sys,
                &instance.s0,
                &vectors,
                k,
                seed,
            )?;
            let attack = attack_with_targets(&attackers, targets, &vectors, k, p)?;
            rows.push(attack_row(config, instance, &point, &vectors, criterion.name(), &attack, started)?);
        }
    }
    Ok(rows)
}

type Control<'a> = Box<dyn Fn() -> Result<OpinionVector> + 'a>;

fn defense_axis(config: &ExperimentConfig, instance: &Instance) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let options = DefenseOptions {
        eta0: config.eta0,
        t_max: config.t_max,
    };
    for (p, m, k) in sweep(config) {
        for &mu in &config.mu {
            let point = Point { p, m, k, mu };
            let budget = DefenseBudget::new(instance.s0.clone(), mu)?;
            let mut methods: Vec<(&str, Control<'_>)> =
                vec![("no_defense", Box::new(|| Ok(instance.s0.clone())))];
            if config.baselines {
                methods.push(("min_total", Box::new(|| min_total_baseline(&instance.sys, &budget))));
            }
            if config.defense {
                methods.push((
                    "proposed_defense",
                    Box::new(|| Ok(defend(&instance.sys, &budget, m, k, p, options)?.best_s)),
                ));
            }
            for (name, control) in methods {
                let started = Instant::now();
                let s = control()?;
                let vectors = influence_vectors(&instance.sys, &s)?;
                let attack = optimal_attack(&vectors, m, k, p)?;
                let f_exact = exact_perturbed_total(&attack.plan, &instance.sys, &s)?;
                let f_approx = vectors.approx_total(&attack.plan);
                rows.push(point.row(config, instance.seed, name, vectors.total(), f_exact, f_approx, started));
            }
        }
    }
    Ok(rows)
}
