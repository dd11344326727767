//! Building a system and innate opinions from command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use fjguard_core::graph::{load_edge_list, random_opinions, random_row_stochastic, IdMap};
use fjguard_core::io::{read_opinion_csv, read_value_csv, AffineMap};
use fjguard_core::rng::derive_seed;
use fjguard_core::{AdjacencyMatrix, EdgeListOptions, FjSystem, Graph, OpinionVector, StubbornnessVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    /// Every out-neighbour weighs `1 / in-degree`.
    Uniform,
    /// Seeded random row-stochastic weights.
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Edge list: one `i j` pair per line, `#` comments.
    #[arg(long, value_name = "PATH")]
    pub graph: PathBuf,

    /// Add every edge in both directions.
    #[arg(long)]
    pub undirected: bool,

    #[arg(long, value_enum, default_value_t = Weights::Random)]
    pub weights: Weights,

    /// Stubbornness CSV `node_id,value`, values in (0, 1).
    #[arg(long, value_name = "PATH", conflicts_with = "alpha_range")]
    pub alpha: Option<PathBuf>,

    /// Open range for seeded uniform stubbornness.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range, default_value = "0,1")]
    pub alpha_range: (f64, f64),

    /// Innate opinion CSV `node_id,value`.
    #[arg(long, value_name = "PATH", conflicts_with = "opinion_range")]
    pub opinions: Option<PathBuf>,

    /// Range for seeded uniform innate opinions.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range, default_value = "0.6,1")]
    pub opinion_range: (f64, f64),

    /// Map file opinions outside [0, 1] onto it.
    #[arg(long)]
    pub rescale_opinions: bool,

    /// Base seed; required whenever weights, stubbornness or opinions are drawn.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Also write the `original_id,internal_id` map here.
    #[arg(long, value_name = "PATH")]
    pub id_map_out: Option<PathBuf>,
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number `{hi}`"))?;
    if !(lo < hi) {
        return Err(format!("range {lo},{hi} is empty"));
    }
    Ok((lo, hi))
}

pub struct Loaded {
    pub graph: Graph,
    pub sys: FjSystem,
    pub s0: OpinionVector,
    pub opinion_map: AffineMap,
}

impl Loaded {
    pub fn ids(&self) -> &IdMap {
        self.graph.id_map()
    }
}

impl SystemArgs {
    /// Which stochastic inputs are drawn, for the missing-seed message.
    pub fn random_parts(&self) -> Vec<&'static str> {
        let mut parts = Vec::new();
        if self.weights == Weights::Random {
            parts.push("--weights random");
        }
        if self.alpha.is_none() {
            parts.push("--alpha-range");
        }
        if self.opinions.is_none() {
            parts.push("--opinion-range");
        }
        parts
    }

    /// `None` when a seed is needed and missing.
    pub fn load(&self) -> Option<Result<Loaded>> {
        if self.seed.is_none() && !self.random_parts().is_empty() {
            return None;
        }
        Some(self.load_seeded(self.seed.unwrap_or(0)))
    }

    fn load_seeded(&self, seed: u64) -> Result<Loaded> {
        let text = read(&self.graph)?;
        let options = if self.undirected {
            EdgeListOptions::undirected()
        } else {
            EdgeListOptions::directed()
        };
        let graph = load_edge_list(&text, options).with_context(|| in_file(&self.graph))?;
        let n = graph.n();
        let w = match self.weights {
            Weights::Uniform => AdjacencyMatrix::uniform(&graph),
            Weights::Random => random_row_stochastic(&graph, derive_seed(seed, "weights"))?,
        };
        let alpha = match &self.alpha {
            Some(path) => {
                let values = read_value_csv(&read(path)?, graph.id_map()).with_context(|| in_file(path))?;
                StubbornnessVector::new(values).with_context(|| in_file(path))?
            }
            None => {
                let (lo, hi) = self.alpha_range;
                StubbornnessVector::random(n, lo, hi, derive_seed(seed, "stubbornness"))?
            }
        };
        let (s0, opinion_map) = match &self.opinions {
            Some(path) => {
                let loaded = read_opinion_csv(&read(path)?, graph.id_map(), self.rescale_opinions)
                    .with_context(|| in_file(path))?;
                (loaded.values, loaded.map)
            }
            None => {
                let (lo, hi) = self.opinion_range;
                let s0 = random_opinions(n, lo, hi, derive_seed(seed, "opinions"))?;
                (s0, AffineMap::IDENTITY)
            }
        };
        if let Some(path) = &self.id_map_out {
            crate::write_file(path, &fjguard_core::graph::write_id_map(graph.id_map()))?;
        }
        Ok(Loaded {
            sys: FjSystem::new(w, alpha)?,
            graph,
            s0,
            opinion_map,
        })
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn in_file(path: &Path) -> String {
    format!("in {}", path.display())
}
