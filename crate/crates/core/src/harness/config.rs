//! Experiment configuration.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, list values
//! are comma separated (`p = 0.05, 0.1, 0.15`). Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `id` | experiment name written into every row (default `experiment`) |
//! | `experiment` | `increase`, `attackers`, `targets` or `defense` |
//! | `graph` | edge-list path, relative to the config file |
//! | `symmetrize` | `true` to add every edge in both directions |
//! | `generator` | `preferential_attachment` or `in_regular` when no `graph` is given |
//! | `nodes`, `links`, `in_degree` | generator parameters |
//! | `opinions` | opinion CSV path (`node_id,value`) |
//! | `rescale_opinions` | `true` to map file opinions onto `[0, 1]` |
//! | `opinion_range` | `lo, hi` for uniform innate opinions (default `0.6, 1.0`) |
//! | `stubbornness_range` | `lo, hi` (default `0.0, 1.0`, open interval) |
//! | `seed` | base seed; repetition `r` uses `seed + r` |
//! | `repetitions` | number of seeds (default 10) |
//! | `p`, `m`, `k`, `mu` | sweep lists |
//! | `attacker_criteria` | subset of `internal_opinion, pagerank, outdegree, random` |
//! | `target_criteria` | subset of `stubbornness, neighbor_avg_opinion, internal_opinion, pagerank, outdegree, random` |
//! | `defense` | `true`/`false`: include the proposed defense on the defense axis |
//! | `baselines` | `true`/`false`: include the heuristic or Min-Total baselines |
//! | `eta0`, `t_max` | defense step scale and iteration count |

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::attack::{AttackerCriterion, TargetCriterion};
use crate::defense::DEFAULT_ETA0;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Increase of total opinion under the proposed attack, exact vs approximated.
    Increase,
    /// Attacker-selection criteria compared across `m`.
    Attackers,
    /// Target-selection criteria compared across `k`.
    Targets,
    /// Defenses compared across `mu`.
    Defense,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "increase" => Ok(ExperimentKind::Increase),
            "attackers" => Ok(ExperimentKind::Attackers),
            "targets" => Ok(ExperimentKind::Targets),
            "defense" => Ok(ExperimentKind::Defense),
            other => Err(Error::argument(format!("unknown experiment kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Increase => "increase",
            ExperimentKind::Attackers => "attackers",
            ExperimentKind::Targets => "targets",
            ExperimentKind::Defense => "defense",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File { path: PathBuf, symmetrize: bool },
    PreferentialAttachment { nodes: usize, links: usize },
    InRegular { nodes: usize, in_degree: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpinionSource {
    File { path: PathBuf, rescale: bool },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub graph: GraphSource,
    pub opinions: OpinionSource,
    pub stubbornness: (f64, f64),
    pub seed: u64,
    pub repetitions: usize,
    pub p: Vec<f64>,
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    pub mu: Vec<f64>,
    pub attacker_criteria: Vec<AttackerCriterion>,
    pub target_criteria: Vec<TargetCriterion>,
    pub defense: bool,
    pub baselines: bool,
    pub eta0: f64,
    pub t_max: u64,
}

impl ExperimentConfig {
    /// A config with the given kind, a synthetic graph and default settings.
    pub fn synthetic(kind: ExperimentKind, graph: GraphSource, seed: u64) -> Self {
        Self {
            id: "experiment".into(),
            kind,
            graph,
            opinions: OpinionSource::Uniform { lo: 0.6, hi: 1.0 },
            stubbornness: (0.0, 1.0),
            seed,
            repetitions: 10,
            p: vec![0.1],
            m: vec![5],
            k: vec![100],
            mu: vec![0.0],
            attacker_criteria: AttackerCriterion::ALL.to_vec(),
            target_criteria: TargetCriterion::ALL.to_vec(),
            defense: true,
            baselines: true,
            eta0: DEFAULT_ETA0,
            t_max: 200,
        }
    }

    /// Parse a config file; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut id = None;
        let mut kind = None;
        let mut graph_path = None;
        let mut symmetrize = false;
        let mut generator = None;
        let mut nodes = None;
        let mut links = None;
        let mut in_degree = None;
        let mut opinion_path = None;
        let mut rescale = false;
        let mut opinion_range = None;
        let mut stubbornness = None;
        let mut seed = None;
        let mut repetitions = None;
        let mut p = None;
        let mut m = None;
        let mut k = None;
        let mut mu = None;
        let mut attacker_criteria = None;
        let mut target_criteria = None;
        let mut defense = None;
        let mut baselines = None;
        let mut eta0 = None;
        let mut t_max = None;

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    message: format!("key `{key}` given twice"),
                });
            }
            let v = Value { line, key, value };
            match key {
                "id" => id = Some(v.name()?),
                "experiment" => kind = Some(ExperimentKind::parse(value).map_err(|e| v.wrap(e))?),
                "graph" => graph_path = Some(base_dir.join(value)),
                "symmetrize" => symmetrize = v.boolean()?,
                "generator" => generator = Some(value.to_string()),
                "nodes" => nodes = Some(v.scalar::<usize>()?),
                "links" => links = Some(v.scalar::<usize>()?),
                "in_degree" => in_degree = Some(v.scalar::<usize>()?),
                "opinions" => opinion_path = Some(base_dir.join(value)),
                "rescale_opinions" => rescale = v.boolean()?,
                "opinion_range" => opinion_range = Some(v.pair()?),
                "stubbornness_range" => stubbornness = Some(v.pair()?),
                "seed" => seed = Some(v.scalar::<u64>()?),
                "repetitions" => repetitions = Some(v.scalar::<usize>()?),
                "p" => p = Some(v.list::<f64>()?),
                "m" => m = Some(v.list::<usize>()?),
                "k" => k = Some(v.list::<usize>()?),
                "mu" => mu = Some(v.list::<f64>()?),
                "attacker_criteria" => {
                    attacker_criteria = Some(
                        v.words()
                            .map(|w| AttackerCriterion::parse(w).map_err(|e| v.wrap(e)))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "target_criteria" => {
                    target_criteria = Some(
                        v.words()
                            .map(|w| TargetCriterion::parse(w).map_err(|e| v.wrap(e)))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "defense" => defense = Some(v.boolean()?),
                "baselines" => baselines = Some(v.boolean()?),
                "eta0" => eta0 = Some(v.scalar::<f64>()?),
                "t_max" => t_max = Some(v.scalar::<u64>()?),
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }

        let kind = kind.ok_or_else(|| Error::argument("config needs an `experiment` key"))?;
        let seed = seed.ok_or_else(|| Error::argument("config needs a `seed` key"))?;
        let graph = match (graph_path, generator.as_deref()) {
            (Some(path), None) => GraphSource::File { path, symmetrize },
            (None, Some("preferential_attachment")) => GraphSource::PreferentialAttachment {
                nodes: nodes.ok_or_else(|| Error::argument("generator needs `nodes`"))?,
                links: links.unwrap_or(5),
            },
            (None, Some("in_regular")) => GraphSource::InRegular {
                nodes: nodes.ok_or_else(|| Error::argument("generator needs `nodes`"))?,
                in_degree: in_degree.unwrap_or(10),
            },
            (None, Some(other)) => {
                return Err(Error::argument(format!("unknown generator `{other}`")))
            }
            (Some(_), Some(_)) => {
                return Err(Error::argument("give either `graph` or `generator`, not both"))
            }
            (None, None) => return Err(Error::argument("config needs `graph` or `generator`")),
        };
        let opinions = match (opinion_path, opinion_range) {
            (Some(path), None) => OpinionSource::File { path, rescale },
            (None, range) => {
                let (lo, hi) = range.unwrap_or((0.6, 1.0));
                OpinionSource::Uniform { lo, hi }
            }
            (Some(_), Some(_)) => {
                return Err(Error::argument("give either `opinions` or `opinion_range`, not both"))
            }
        };

        let mut config = Self::synthetic(kind, graph, seed);
        config.opinions = opinions;
        if let Some(v) = id {
            config.id = v;
        }
        if let Some(v) = stubbornness {
            config.stubbornness = v;
        }
        if let Some(v) = repetitions {
            config.repetitions = v;
        }
        if let Some(v) = p {
            config.p = v;
        }
        if let Some(v) = m {
            config.m = v;
        }
        if let Some(v) = k {
            config.k = v;
        }
        if let Some(v) = mu {
            config.mu = v;
        }
        if let Some(v) = attacker_criteria {
            config.attacker_criteria = v;
        }
        if let Some(v) = target_criteria {
            config.target_criteria = v;
        }
        if let Some(v) = defense {
            config.defense = v;
        }
        if let Some(v) = baselines {
            config.baselines = v;
        }
        if let Some(v) = eta0 {
            config.eta0 = v;
        }
        if let Some(v) = t_max {
            config.t_max = v;
        }
        config.validate()?;
        Ok(config)
    }

    /// Check sweep values against the model constraints.
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::argument("repetitions must be at least 1"));
        }
        for (name, list) in [("p", self.p.len()), ("m", self.m.len()), ("k", self.k.len())] {
            if list == 0 {
                return Err(Error::argument(format!("sweep list `{name}` is empty")));
            }
        }
        if self.kind == ExperimentKind::Defense && self.mu.is_empty() {
            return Err(Error::argument("sweep list `mu` is empty"));
        }
        if let Some(&p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::argument(format!("p = {p} must lie in [0, 1]")));
        }
        if let Some(&mu) = self.mu.iter().find(|mu| !(mu.is_finite() && **mu >= 0.0)) {
            return Err(Error::argument(format!("mu = {mu} must be finite and >= 0")));
        }
        for &p in &self.p {
            for &m in &self.m {
                if m as f64 * p > 1.0 + 1e-12 {
                    return Err(Error::argument(format!("m * p = {m} * {p} exceeds 1")));
                }
            }
        }
        let (lo, hi) = self.stubbornness;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::argument("stubbornness_range must satisfy 0 <= lo < hi <= 1"));
        }
        if let OpinionSource::Uniform { lo, hi } = self.opinions {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::argument("opinion_range must satisfy 0 <= lo < hi <= 1"));
            }
        }
        if !(self.eta0 > 0.0) || self.t_max == 0 {
            return Err(Error::argument("eta0 must be positive and t_max at least 1"));
        }
        Ok(())
    }

    /// Seed of repetition `r`.
    pub fn repetition_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

struct Value<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Value<'_> {
    fn wrap(&self, e: Error) -> Error {
        Error::Parse {
            line: self.line,
            message: e.to_string(),
        }
    }

    fn fail(&self, what: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("`{}` expects {what}, found `{}`", self.key, self.value),
        }
    }

    fn words(&self) -> impl Iterator<Item = &str> {
        self.value.split(',').map(str::trim).filter(|w| !w.is_empty())
    }

    fn name(&self) -> Result<String> {
        if self.value.is_empty() || self.value.contains(',') {
            return Err(self.fail("a name without commas"));
        }
        Ok(self.value.to_string())
    }

    fn boolean(&self) -> Result<bool> {
        match self.value {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            _ => Err(self.fail("true or false")),
        }
    }

    fn scalar<T: std::str::FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| self.fail("a number"))
    }

    fn list<T: std::str::FromStr>(&self) -> Result<Vec<T>> {
        self.words()
            .map(|w| w.parse().map_err(|_| self.fail("a comma-separated list of numbers")))
            .collect()
    }

    fn pair(&self) -> Result<(f64, f64)> {
        match self.list::<f64>()?.as_slice() {
            &[lo, hi] => Ok((lo, hi)),
            _ => Err(self.fail("two numbers `lo, hi`")),
        }
    }
}
