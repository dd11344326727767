//! `fjguard`: opinion attacks and defenses from the command line.
//!
//! Exit status: 0 on success, 1 when the input is rejected or a run fails,
//! 2 on a usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod system;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use fjguard_core::attack::{attack_with_attackers, attack_with_targets};
use fjguard_core::defense::DEFAULT_ITERATION_CAP;
use fjguard_core::fj::{total_opinion, DEFAULT_MAX_STEPS, DEFAULT_SIMULATION_TOL};
use fjguard_core::graph::IdMap;
use fjguard_core::harness::{run_experiment, ExperimentConfig};
use fjguard_core::io::{read_csv_ids, read_opinion_csv, read_value_csv, write_opinion_csv};
use fjguard_core::rng::derive_seed;
use fjguard_core::{
    defend, exact_perturbed_total, heuristic_attackers, heuristic_targets, influence_vectors,
    min_total_baseline, optimal_attack, plan_iterations, project, worst_case_objective,
    AttackerCriterion, BoundConstants, BoundVariant, DefenseBudget, DefenseOptions, OpinionVector,
    TargetCriterion,
};

use system::{read, SystemArgs};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FJGUARD_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fjguard", version, about = "Friedkin-Johnsen opinion attacks and defenses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium opinions of a network.
    Equilibrium(EquilibriumArgs),
    /// Best network perturbation for an adversary.
    Attack(AttackArgs),
    /// Budget-constrained defense of the innate opinions.
    Defend(DefendArgs),
    /// Project a vector onto the defense budget set.
    Project(ProjectArgs),
    /// Run an experiment sweep from a config file.
    Experiment(ExperimentArgs),
    /// Iterations needed for a target optimality gap.
    PlanIterations(PlanArgs),
}

#[derive(Debug, Clone, Args)]
struct Output {
    /// Output file; defaults to a fixed name inside the output directory.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Default output directory.
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
}

impl Output {
    fn path(&self, default_name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }

    fn sibling(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

#[derive(Debug, Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Iterate the dynamics instead of solving directly.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = DEFAULT_SIMULATION_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Args)]
struct AttackShape {
    /// Maximum number of attackers.
    #[arg(long)]
    m: usize,
    /// Maximum number of targets per attacker.
    #[arg(long)]
    k: usize,
    /// Weight each attacker moves onto its targets.
    #[arg(long)]
    p: f64,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    shape: AttackShape,
    /// `proposed` or a heuristic: internal_opinion, pagerank, outdegree, random.
    #[arg(long, default_value = "proposed")]
    attackers: String,
    /// `optimal` or a heuristic: stubbornness, neighbor_avg_opinion,
    /// internal_opinion, pagerank, outdegree, random.
    #[arg(long, default_value = "optimal")]
    targets: String,
    /// Also write the selected `u,v,delta_uv` meta-influences.
    #[arg(long, value_name = "PATH")]
    delta_csv: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct DefendArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    shape: AttackShape,
    /// Control budget.
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = fjguard_core::defense::DEFAULT_ETA0)]
    eta0: f64,
    #[arg(long, default_value_t = 1000)]
    t_max: u64,
    /// Final opinion CSV; defaults to `defense_final.csv` in the output directory.
    #[arg(long, value_name = "PATH")]
    final_out: Option<PathBuf>,
    /// Also report the Min-Total baseline.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Innate opinions `node_id,value` bounding the box.
    #[arg(long, value_name = "PATH")]
    s0: PathBuf,
    /// Vector to project, `node_id,value` over the same nodes.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long)]
    mu: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-time sidecar; defaults to `<id>_timing.csv` in the output directory.
    #[arg(long, value_name = "PATH")]
    timing_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    epsilon: f64,
    #[command(flatten)]
    shape: AttackShape,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = fjguard_core::defense::DEFAULT_ETA0)]
    eta0: f64,
    /// `a`/`printed` or `b`/`composed`.
    #[arg(long, default_value = "composed")]
    variant: String,
    #[arg(long, default_value_t = DEFAULT_ITERATION_CAP)]
    cap: u64,
    /// Points in the `T,bound` curve.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Take n, the smallest stubbornness and both norms from a system.
    #[command(flatten)]
    system: Option<SystemArgs>,
    /// Node count when no graph is given.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    n: Option<usize>,
    /// Smallest stubbornness when no graph is given.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    alpha_min: Option<f64>,
    #[arg(long, conflicts_with = "graph")]
    b_norm: Option<f64>,
    #[arg(long, conflicts_with = "graph")]
    w_norm: Option<f64>,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(clap::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<fjguard_core::Error> for Failure {
    fn from(e: fjguard_core::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Equilibrium(a) => equilibrium(a),
        Command::Attack(a) => attack(a),
        Command::Defend(a) => defend_cmd(a),
        Command::Project(a) => project_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::PlanIterations(a) => plan(a),
    }
}

fn usage(subcommand: &str, message: String) -> Failure {
    let mut cli = Cli::command();
    cli.build();
    let cmd = cli.find_subcommand_mut(subcommand).expect("known subcommand");
    Failure::Usage(cmd.error(ErrorKind::MissingRequiredArgument, message))
}

fn load(subcommand: &str, system: &SystemArgs) -> std::result::Result<system::Loaded, Failure> {
    match system.load() {
        Some(loaded) => {
            let loaded = loaded?;
            if !loaded.opinion_map.is_identity() {
                eprintln!("note: opinions rescaled by {}", loaded.opinion_map);
            }
            Ok(loaded)
        }
        None => Err(usage(
            subcommand,
            format!(
            "--seed is required when drawing random inputs ({})",
                system.random_parts().join(", ")
            ),
        )),
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn equilibrium(a: EquilibriumArgs) -> Outcome {
    let loaded = load("equilibrium", &a.system)?;
    let path = a.output.path("equilibrium.csv");
    let (z, extra) = if a.simulate {
        let sim = loaded.sys.simulate(&loaded.s0, &loaded.s0, a.tol, a.max_steps)?;
        let extra = format!(" steps={} converged={}", sim.steps, sim.converged);
        (sim.state, extra)
    } else {
        (loaded.sys.equilibrium(&loaded.s0)?, String::new())
    };
    write_file(&path, &write_opinion_csv(&z, loaded.ids()))?;
    println!(
        "n={} total_opinion={}{} out={}",
        loaded.sys.n(),
        total_opinion(&z),
        extra,
        path.display()
    );
    Ok(())
}

fn attack(a: AttackArgs) -> Outcome {
    let needs_seed = a.attackers == "random" || a.targets == "random";
    if needs_seed && a.system.seed.is_none() {
        return Err(usage("attack", "--seed is required for random attackers or targets".into()));
    }
    let loaded = load("attack", &a.system)?;
    let (sys, s0) = (&loaded.sys, &loaded.s0);
    let AttackShape { m, k, p } = a.shape;
    let seed = a.system.seed.unwrap_or(0);
    let vectors = influence_vectors(sys, s0)?;

    let result = match (a.attackers.as_str(), a.targets.as_str()) {
        ("proposed", "optimal") => optimal_attack(&vectors, m, k, p)?,
        ("proposed", t) => {
            let criterion = TargetCriterion::parse(t)?;
            let chosen = fjguard_core::attack::candidate_attackers(&vectors, m);
            let targets = heuristic_targets(
                criterion,
                &chosen,
                sys,
                s0,
                &vectors,
                k,
                derive_seed(seed, "random_targets"),
            )?;
            attack_with_targets(&chosen, targets, &vectors, k, p)?
        }
        (u, t) => {
            let criterion = AttackerCriterion::parse(u)?;
            let chosen =
                heuristic_attackers(criterion, sys, s0, m, derive_seed(seed, "random_attackers"))?;
            if t == "optimal" {
                attack_with_attackers(&chosen, &vectors, k, p)?
            } else {
                let targets = heuristic_targets(
                    TargetCriterion::parse(t)?,
                    &chosen,
                    sys,
                    s0,
                    &vectors,
                    k,
                    derive_seed(seed, "random_targets"),
                )?;
                attack_with_targets(&chosen, targets, &vectors, k, p)?
            }
        }
    };

    let path = a.output.path("attack_plan.txt");
    write_file(&path, &result.to_text())?;
    if let Some(delta) = &a.delta_csv {
        write_file(delta, &result.meta_influence_csv(&vectors))?;
    }
    let f = vectors.total();
    let f_approx = vectors.approx_total(&result.plan);
    let f_exact = exact_perturbed_total(&result.plan, sys, s0)?;
    println!(
        "attackers={} edges={} f={} f_approx={} f_exact={} gain_approx={} gain_exact={} out={}",
        result.plan.active_attacker_count(),
        result.plan.edge_count(),
        f,
        f_approx,
        f_exact,
        f_approx - f,
        f_exact - f,
        path.display()
    );
    Ok(())
}

fn defend_cmd(a: DefendArgs) -> Outcome {
    let loaded = load("defend", &a.system)?;
    let AttackShape { m, k, p } = a.shape;
    let budget = DefenseBudget::new(loaded.s0.clone(), a.mu)?;
    let options = DefenseOptions {
        eta0: a.eta0,
        t_max: a.t_max,
    };
    let run = defend(&loaded.sys, &budget, m, k, p, options)?;
    let history = a.output.path("defense_history.csv");
    let final_path = a.output.sibling(&a.final_out, "defense_final.csv");
    write_file(&history, &run.history_csv())?;
    write_file(&final_path, &write_opinion_csv(&run.best_s, loaded.ids()))?;
    let (f0, _) = worst_case_objective(&loaded.s0, &loaded.sys, m, k, p)?;
    print!(
        "no_defense_f={} best_f={} best_f_exact={} budget_used={} planned_gap={} iterations={}",
        f0,
        run.best_f,
        run.best_f_exact,
        budget.used(&run.best_s),
        run.planned_gap,
        run.history.len()
    );
    if a.baseline {
        let x = min_total_baseline(&loaded.sys, &budget)?;
        let (f, attack) = worst_case_objective(&x, &loaded.sys, m, k, p)?;
        let f_exact = exact_perturbed_total(&attack, &loaded.sys, &x)?;
        print!(" min_total_f={f} min_total_f_exact={f_exact}");
    }
    println!(" out={} final={}", history.display(), final_path.display());
    Ok(())
}

fn project_cmd(a: ProjectArgs) -> Outcome {
    let s0_text = read(&a.s0)?;
    let ids: IdMap = read_csv_ids(&s0_text).with_context(|| format!("in {}", a.s0.display()))?;
    let s0 = read_opinion_csv(&s0_text, &ids, false)
        .with_context(|| format!("in {}", a.s0.display()))?
        .values;
    let y = read_value_csv(&read(&a.input)?, &ids)
        .with_context(|| format!("in {}", a.input.display()))?;
    let budget = DefenseBudget::new(s0, a.mu)?;
    let out = project(OpinionVector::from(y).as_vector(), &budget);
    let path = a.output.path("projected.csv");
    write_file(&path, &write_opinion_csv(&out, &ids))?;
    println!(
        "n={} budget_used={} mu={} out={}",
        ids.len(),
        budget.used(&out),
        a.mu,
        path.display()
    );
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Outcome {
    let text = read(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let mut config =
        ExperimentConfig::parse(&text, base).with_context(|| format!("in {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let report = run_experiment(&config)?;
    let path = a.output.path(&format!("{}.csv", config.id));
    let timing = a.output.sibling(&a.timing_out, &format!("{}_timing.csv", config.id));
    write_file(&path, &report.to_csv()?)?;
    write_file(&timing, &report.timing_csv()?)?;
    println!(
        "experiment={} rows={} means={} out={} timing={}",
        config.id,
        report.per_seed().count(),
        report.means().count(),
        path.display(),
        timing.display()
    );
    Ok(())
}

fn plan(a: PlanArgs) -> Outcome {
    let variant = BoundVariant::parse(&a.variant)?;
    let AttackShape { m, k, p } = a.shape;
    let constants = match &a.system {
        Some(system) => {
            let loaded = load("plan-iterations", system)?;
            BoundConstants::for_system(&loaded.sys, m, k, p, a.mu, a.eta0)
        }
        None => BoundConstants {
            n: a.n.expect("required by clap"),
            m,
            k,
            p,
            alpha_min: a.alpha_min.expect("required by clap"),
            mu: a.mu,
            eta0: a.eta0,
            b_norm: a.b_norm,
            w_norm: a.w_norm,
        },
    };
    let planned = plan_iterations(a.epsilon, &constants, variant, a.cap)?;
    let path = a.output.path("iteration_bound.csv");
    write_file(&path, &planned.curve_csv(a.points))?;
    print!(
        "t_max={} variant={} bound={} epsilon={}",
        planned.t_max,
        variant.name(),
        planned.bound,
        a.epsilon
    );
    if let Some(eta) = constants.balanced_eta0() {
        print!(" balanced_eta0={eta}");
    }
    println!(" out={}", path.display());
    Ok(())
}
