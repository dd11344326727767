//! Graph ingestion, influence-weight generation and network validation.
//!
//! A directed edge `(i, j)` means that user `j` influences user `i`, so the
//! influence matrix `W` has `W[i][j] > 0` exactly on edges and every row of
//! `W` is a probability distribution over a user's in-neighbours.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fj::OpinionVector;
use crate::rng::seeded;

/// Tolerance on `|row sum - 1|` for a valid influence matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Options for [`load_edge_list`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeListOptions {
    /// Add every edge in both directions (undirected datasets).
    pub symmetrize: bool,
    /// Keep `i i` lines instead of dropping them.
    pub allow_self_loops: bool,
}

impl EdgeListOptions {
    pub fn directed() -> Self {
        Self::default()
    }

    pub fn undirected() -> Self {
        Self {
            symmetrize: true,
            ..Self::default()
        }
    }
}

/// Mapping between dataset node ids and contiguous internal ids.
///
/// Internal ids are assigned in ascending order of the original ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    original: Vec<i64>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        Self {
            original: (0..n as i64).collect(),
        }
    }

    /// Map over the distinct ids given, in ascending order.
    pub fn from_ids(ids: impl IntoIterator<Item = i64>) -> Self {
        let set: BTreeSet<i64> = ids.into_iter().collect();
        Self {
            original: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn original(&self, internal: usize) -> i64 {
        self.original[internal]
    }

    pub fn internal(&self, original: i64) -> Option<usize> {
        self.original.binary_search(&original).ok()
    }

    pub fn originals(&self) -> &[i64] {
        &self.original
    }
}

/// Directed influence graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted, deduplicated `(i, j)` pairs: `j` influences `i`.
    edges: Vec<(usize, usize)>,
    ids: IdMap,
}

impl Graph {
    /// Build a graph on `n` nodes with identity id map.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build(n, edges, IdMap::identity(n), false)
    }

    /// Like [`Graph::from_edges`] but keeps self-loops.
    pub fn from_edges_with_self_loops(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::build(n, edges, IdMap::identity(n), true)
    }

    fn build(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        ids: IdMap,
        allow_self_loops: bool,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("graph has no nodes"));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::validation(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j && !allow_self_loops {
                return Err(Error::validation(format!("self-loop on node {i}")));
            }
            set.insert((i, j));
        }
        let graph = Self {
            n,
            edges: set.into_iter().collect(),
            ids,
        };
        graph.check_in_degrees()?;
        Ok(graph)
    }

    fn check_in_degrees(&self) -> Result<()> {
        let deg = self.in_degrees();
        if let Some(v) = deg.iter().position(|&d| d == 0) {
            let original = self.ids.original(v);
            return Err(Error::validation(format!(
                "node {original} (internal id {v}) has in-degree 0; its influence row cannot be normalized"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn id_map(&self) -> &IdMap {
        &self.ids
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }

    /// Number of users influencing each node.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, _) in &self.edges {
            deg[i] += 1;
        }
        deg
    }

    /// Number of users each node influences.
    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(_, j) in &self.edges {
            deg[j] += 1;
        }
        deg
    }

    /// Serialize with internal ids, one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

/// Parse a whitespace-separated edge list.
///
/// Lines starting with `#` and blank lines are skipped. Node ids are remapped
/// to contiguous internal ids in ascending original order; duplicate edges
/// collapse. Self-loops are dropped unless `allow_self_loops` is set.
pub fn load_edge_list(text: &str, options: EdgeListOptions) -> Result<Graph> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<i64> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "expected two node ids".into(),
            })?;
            tok.parse::<i64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("`{tok}` is not an integer node id"),
            })
        };
        let a = parse(fields.next())?;
        let b = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: "expected exactly two node ids".into(),
            });
        }
        raw.push((a, b));
    }
    if raw.is_empty() {
        return Err(Error::validation("edge list contains no edges"));
    }

    let originals: BTreeSet<i64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    let ids = IdMap {
        original: originals.into_iter().collect(),
    };
    let lookup = |id: i64| ids.internal(id).expect("id collected above");

    let mut edges = Vec::with_capacity(raw.len() * if options.symmetrize { 2 } else { 1 });
    for (a, b) in raw {
        if a == b && !options.allow_self_loops {
            continue;
        }
        let (i, j) = (lookup(a), lookup(b));
        edges.push((i, j));
        if options.symmetrize {
            edges.push((j, i));
        }
    }
    let n = ids.len();
    Graph::build(n, edges, ids, options.allow_self_loops)
}

/// Dense row-stochastic, entrywise nonnegative influence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(DMatrix<f64>);

impl AdjacencyMatrix {
    /// Validate and wrap a square matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::validation(format!(
                "influence matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::validation("influence matrix is empty"));
        }
        for i in 0..matrix.nrows() {
            let row = matrix.row(i);
            if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::validation(format!(
                    "row {i} has invalid entry {x}; entries must be finite and nonnegative"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::validation(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self(matrix))
    }

    /// Equal weights `1 / in-degree` on every edge.
    pub fn uniform(graph: &Graph) -> Self {
        let deg = graph.in_degrees();
        let mut w = DMatrix::zeros(graph.n(), graph.n());
        for &(i, j) in graph.edges() {
            w[(i, j)] = 1.0 / deg[i] as f64;
        }
        Self(w)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Largest `|row sum - 1|` over all rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n())
            .map(|i| (self.0.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Number of nonzero entries per column: how many users each node influences.
    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n())
            .map(|j| self.0.column(j).iter().filter(|&&x| x > 0.0).count())
            .collect()
    }
}

/// Draw `W_ij ~ U(0, 1)` on every edge, then normalize each row to sum to 1.
///
/// Edges are visited in sorted `(i, j)` order so the draw is reproducible.
pub fn random_row_stochastic(graph: &Graph, seed: u64) -> Result<AdjacencyMatrix> {
    graph.check_in_degrees()?;
    let n = graph.n();
    let mut rng = seeded(seed);
    let mut w = DMatrix::zeros(n, n);
    let mut sums = vec![0.0; n];
    for &(i, j) in graph.edges() {
        let x: f64 = rng.sample(rand::distr::Open01);
        w[(i, j)] = x;
        sums[i] += x;
    }
    for &(i, j) in graph.edges() {
        w[(i, j)] /= sums[i];
    }
    Ok(AdjacencyMatrix(w))
}

/// Draw `n` values i.i.d. uniform on the open interval `(lo, hi)`.
pub(crate) fn uniform_open(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| loop {
            let x = rng.random_range(lo..hi);
            if x > lo {
                break x;
            }
        })
        .collect()
}

/// Innate opinions i.i.d. uniform on `(lo, hi)` with `0 <= lo < hi <= 1`.
pub fn random_opinions(n: usize, lo: f64, hi: f64, seed: u64) -> Result<OpinionVector> {
    if !(lo < hi) || lo < 0.0 || hi > 1.0 {
        return Err(Error::argument(format!(
            "opinion range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
        )));
    }
    Ok(OpinionVector::from(uniform_open(n, lo, hi, seed)))
}

/// Undirected preferential-attachment graph, stored symmetrized.
///
/// Starts from a clique on `links + 1` nodes; each later node links to
/// `links` distinct earlier nodes chosen proportionally to degree.
pub fn preferential_attachment(n: usize, links: usize, seed: u64) -> Result<Graph> {
    if links == 0 || n <= links {
        return Err(Error::argument(format!(
            "preferential attachment needs 1 <= links < n (got links={links}, n={n})"
        )));
    }
    let mut rng = seeded(seed);
    let core = links + 1;
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n * links);
    let mut edges = Vec::with_capacity(2 * n * links);
    for a in 0..core {
        for b in (a + 1)..core {
            edges.push((a, b));
            edges.push((b, a));
            endpoints.push(a);
            endpoints.push(b);
        }
    }
    for v in core..n {
        let mut chosen = BTreeSet::new();
        while chosen.len() < links {
            let pick = endpoints[rng.random_range(0..endpoints.len())];
            chosen.insert(pick);
        }
        for u in chosen {
            edges.push((v, u));
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Graph::from_edges(n, edges)
}

/// Directed graph where every node receives `in_degree` distinct random in-neighbours.
pub fn random_in_regular(n: usize, in_degree: usize, seed: u64) -> Result<Graph> {
    if in_degree == 0 || in_degree >= n {
        return Err(Error::argument(format!(
            "in-degree must lie in 1..{n} (got {in_degree})"
        )));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::with_capacity(n * in_degree);
    for i in 0..n {
        for j in index::sample(&mut rng, n - 1, in_degree) {
            let j = if j >= i { j + 1 } else { j };
            edges.push((i, j));
        }
    }
    Graph::from_edges(n, edges)
}

/// Parse an id-map CSV with header `original_id,internal_id`.
pub fn read_id_map(text: &str) -> Result<IdMap> {
    let mut pairs = BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let field = |idx: usize| -> Result<&str> {
            rec.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: "expected original_id,internal_id".into(),
            })
        };
        let original: i64 = field(0)?.parse().map_err(|_| Error::Parse {
            line,
            message: "bad original_id".into(),
        })?;
        let internal: usize = field(1)?.parse().map_err(|_| Error::Parse {
            line,
            message: "bad internal_id".into(),
        })?;
        pairs.insert(internal, original);
    }
    let original: Vec<i64> = pairs.values().copied().collect();
    let contiguous = pairs.keys().enumerate().all(|(k, &v)| k == v);
    let sorted = original.windows(2).all(|w| w[0] < w[1]);
    if !contiguous || !sorted {
        return Err(Error::validation(
            "id map must cover 0..n with original ids in ascending order",
        ));
    }
    Ok(IdMap { original })
}

pub fn write_id_map(ids: &IdMap) -> String {
    let mut out = String::from("original_id,internal_id\n");
    for (internal, original) in ids.originals().iter().enumerate() {
        let _ = writeln!(out, "{original},{internal}");
    }
    out
}
