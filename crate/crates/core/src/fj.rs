//! Friedkin-Johnsen opinion dynamics.
//!
//! Each user `i` updates `z_i(t+1) = a_i s_i + (1 - a_i) sum_j W_ij z_j(t)`,
//! which converges to `z* = B A s` with `B = [I - (I - A) W]^{-1}` and
//! `A = diag(a)`. [`FjSystem`] factorizes `I - (I - A) W` once and answers
//! every equilibrium query with a triangular solve.

use std::ops::{Deref, DerefMut};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::graph::{uniform_open, AdjacencyMatrix};

/// Largest system for which [`FjSystem::explicit_b`] materializes `B`.
pub const EXPLICIT_B_MAX_N: usize = 500;

pub const DEFAULT_SIMULATION_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// A vector of opinions (innate `s`, expressed `z`, or a control `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(DVector<f64>);

impl OpinionVector {
    /// Innate opinions, validated to lie in `[0, 1]`.
    pub fn innate(values: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = values
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(Error::validation(format!(
                "innate opinion of node {i} is {x}, outside [0, 1]"
            )));
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(DVector::from_element(n, value))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<Vec<f64>> for OpinionVector {
    fn from(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }
}

impl From<DVector<f64>> for OpinionVector {
    fn from(values: DVector<f64>) -> Self {
        Self(values)
    }
}

impl Deref for OpinionVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for OpinionVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

/// Sum of opinions, `1^T z`.
pub fn total_opinion(z: &OpinionVector) -> f64 {
    z.sum()
}

/// Per-user stubbornness, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StubbornnessVector(DVector<f64>);

impl StubbornnessVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("stubbornness vector is empty"));
        }
        if let Some((i, a)) = values
            .iter()
            .enumerate()
            .find(|(_, a)| !(**a > 0.0 && **a < 1.0))
        {
            return Err(Error::validation(format!(
                "stubbornness of node {i} is {a}; must lie strictly inside (0, 1)"
            )));
        }
        Ok(Self(DVector::from_vec(values)))
    }

    /// Draw i.i.d. uniform on the open interval `(lo, hi)`, `0 <= lo < hi <= 1`.
    pub fn random(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo < hi) || lo < 0.0 || hi > 1.0 {
            return Err(Error::argument(format!(
                "stubbornness range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Self::new(uniform_open(n, lo, hi, seed))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for StubbornnessVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

struct TransposedCache {
    lu: LU<f64, Dyn, Dyn>,
    /// `B^T 1`, the column sums of `B`.
    column_sums: DVector<f64>,
    /// `(1^T B (I - A))^T`.
    c1: DVector<f64>,
}

/// An influence network together with user stubbornness.
///
/// Immutable after construction. The factorization of `I - (I - A) W` is
/// computed in [`FjSystem::new`]; the transposed factorization and the
/// column sums through `B` are computed on first use and then shared.
pub struct FjSystem {
    w: AdjacencyMatrix,
    alpha: StubbornnessVector,
    lu: LU<f64, Dyn, Dyn>,
    transposed: OnceLock<TransposedCache>,
}

impl std::fmt::Debug for FjSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FjSystem")
            .field("n", &self.n())
            .field("alpha_min", &self.alpha.min())
            .finish_non_exhaustive()
    }
}

fn system_matrix(w: &DMatrix<f64>, alpha: &DVector<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - (1.0 - alpha[i]) * w[(i, j)]
    })
}

impl FjSystem {
    pub fn new(w: AdjacencyMatrix, alpha: StubbornnessVector) -> Result<Self> {
        if w.n() != alpha.len() {
            return Err(Error::argument(format!(
                "influence matrix has {} nodes but stubbornness has {}",
                w.n(),
                alpha.len()
            )));
        }
        let lu = system_matrix(w.matrix(), alpha.as_vector()).lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("I - (I - A) W is not invertible".into()));
        }
        Ok(Self {
            w,
            alpha,
            lu,
            transposed: OnceLock::new(),
        })
    }

    /// The same users and stubbornness on a different influence matrix.
    pub fn with_adjacency(&self, w: AdjacencyMatrix) -> Result<Self> {
        Self::new(w, self.alpha.clone())
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.w
    }

    pub fn stubbornness(&self) -> &StubbornnessVector {
        &self.alpha
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n() {
            return Err(Error::argument(format!(
                "{what} has length {len}, system has {} nodes",
                self.n()
            )));
        }
        Ok(())
    }

    fn transposed(&self) -> &TransposedCache {
        self.transposed.get_or_init(|| {
            let mt = system_matrix(self.w.matrix(), self.alpha.as_vector()).transpose();
            let lu = mt.lu();
            let ones = DVector::from_element(self.n(), 1.0);
            let column_sums = lu.solve(&ones).expect("transpose of an invertible matrix");
            let c1 = column_sums.component_mul(&self.alpha.map(|a| 1.0 - a));
            TransposedCache {
                lu,
                column_sums,
                c1,
            }
        })
    }

    /// `B x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len(), "right-hand side")?;
        self.lu
            .solve(x)
            .ok_or_else(|| Error::Singular("forward solve failed".into()))
    }

    /// `B^T x`.
    pub fn solve_transpose(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len(), "right-hand side")?;
        self.transposed()
            .lu
            .solve(x)
            .ok_or_else(|| Error::Singular("transposed solve failed".into()))
    }

    /// Equilibrium expressed opinions `z* = B A s`.
    pub fn equilibrium(&self, s: &OpinionVector) -> Result<OpinionVector> {
        self.check_len(s.len(), "opinion vector")?;
        let rhs = s.component_mul(self.alpha.as_vector());
        self.solve(&rhs).map(OpinionVector)
    }

    /// Column sums of `B`, i.e. `B^T 1`.
    pub fn b_column_sums(&self) -> &DVector<f64> {
        &self.transposed().column_sums
    }

    /// `c1 = (1^T B (I - A))^T`; every entry is positive.
    pub fn column_sum_through_b(&self) -> &DVector<f64> {
        &self.transposed().c1
    }

    /// Coefficients of the unperturbed total, `(B A)^T 1`.
    pub fn total_opinion_weights(&self) -> DVector<f64> {
        self.b_column_sums().component_mul(self.alpha.as_vector())
    }

    /// Explicit `B`; only for `n <= EXPLICIT_B_MAX_N`.
    pub fn explicit_b(&self) -> Result<DMatrix<f64>> {
        if self.n() > EXPLICIT_B_MAX_N {
            return Err(Error::argument(format!(
                "explicit B is limited to n <= {EXPLICIT_B_MAX_N} (n = {})",
                self.n()
            )));
        }
        self.lu
            .try_inverse()
            .ok_or_else(|| Error::Singular("inverse failed".into()))
    }

    /// One synchronous update of the dynamics.
    pub fn step(&self, s: &OpinionVector, z: &OpinionVector) -> OpinionVector {
        let wz = self.w.matrix() * z.as_vector();
        let a = self.alpha.as_vector();
        OpinionVector(DVector::from_fn(self.n(), |i, _| {
            a[i] * s[i] + (1.0 - a[i]) * wz[i]
        }))
    }

    /// Iterator over `z(1), z(2), ...` starting from `z0`.
    pub fn dynamics<'a>(&'a self, s: &'a OpinionVector, z0: OpinionVector) -> Dynamics<'a> {
        Dynamics {
            sys: self,
            s,
            z: z0,
        }
    }

    /// Run the dynamics until `||z(t+1) - z(t)||_inf <= tol` or `max_steps`.
    ///
    /// Running out of steps is reported through [`Simulation::converged`].
    pub fn simulate(
        &self,
        s: &OpinionVector,
        z0: &OpinionVector,
        tol: f64,
        max_steps: usize,
    ) -> Result<Simulation> {
        self.check_len(s.len(), "innate opinions")?;
        self.check_len(z0.len(), "initial opinions")?;
        if !(tol > 0.0) {
            return Err(Error::argument(format!("tolerance must be positive (got {tol})")));
        }
        let mut prev = z0.clone();
        let mut last_change = f64::INFINITY;
        for (t, z) in self.dynamics(s, z0.clone()).take(max_steps).enumerate() {
            last_change = (&z.0 - &prev.0).amax();
            prev = z;
            if last_change <= tol {
                return Ok(Simulation {
                    state: prev,
                    steps: t + 1,
                    converged: true,
                    last_change,
                });
            }
        }
        Ok(Simulation {
            state: prev,
            steps: max_steps,
            converged: false,
            last_change,
        })
    }
}

pub struct Dynamics<'a> {
    sys: &'a FjSystem,
    s: &'a OpinionVector,
    z: OpinionVector,
}

impl Iterator for Dynamics<'_> {
    type Item = OpinionVector;

    fn next(&mut self) -> Option<OpinionVector> {
        self.z = self.sys.step(self.s, &self.z);
        Some(self.z.clone())
    }
}

/// Outcome of [`FjSystem::simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: OpinionVector,
    pub steps: usize,
    pub converged: bool,
    /// `||z(t) - z(t-1)||_inf` at the last step taken.
    pub last_change: f64,
}
