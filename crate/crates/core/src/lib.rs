//! Opinion control on social networks under adversarial network perturbation.
//!
//! The crate models Friedkin-Johnsen opinion dynamics on a directed weighted
//! influence network, computes the adversary's best perturbation (which users
//! attack and whom they target), and computes a budget-constrained defense of
//! the innate opinions against that adversary.
//!
//! Module map:
//!
//! - [`graph`]: edge-list ingestion, influence weights, seeded generators.
//! - [`fj`]: the dynamics, its equilibrium and the total-opinion functional.
//! - [`perturbation`]: attack plans, the perturbed adjacency matrix and the
//!   first-order approximation of the perturbed total opinion.
//! - [`attack`]: meta-influence scoring, the linear-search attack, heuristic
//!   baselines and a brute-force oracle.
//! - [`defense`]: projection onto the budget set, subgradients, the projected
//!   subgradient defense, the Min-Total baseline and the iteration planner.
//! - [`harness`]: experiment configuration, sweeps and CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod defense;
pub mod error;
pub mod fj;
pub mod graph;
pub mod harness;
pub mod io;
pub mod perturbation;
pub mod rng;

pub use attack::{
    brute_force_attack, heuristic_attackers, heuristic_targets, meta_influence, optimal_attack,
    optimal_targets, AttackResult, AttackerCriterion, MetaInfluenceTable, Objective,
    TargetCriterion,
};
pub use defense::{
    defend, min_total_baseline, plan_iterations, project, subgradient, worst_case_objective,
    BoundConstants, BoundVariant, DefenseBudget, DefenseOptions, DefenseRun, IterationPlan,
};
pub use error::{Error, Result};
pub use fj::{FjSystem, OpinionVector, Simulation, StubbornnessVector};
pub use graph::{AdjacencyMatrix, EdgeListOptions, Graph};
pub use perturbation::{
    approx_perturbed_total, build_delta, exact_perturbed_total, influence_vectors,
    perturbed_matrix, AttackPlan, InfluenceVectors, PerturbationDelta,
};
