//! Finite discrete-time Markov chains.
//!
//! Validation of row-stochastic matrices, structural checks on the support
//! graph (irreducibility, period), the equilibrium distribution, matrix
//! powers, the fundamental matrix with respect to a target state and the
//! first two moments of hitting times derived from it.
//!
//! States are dense indices `0..n`. Labels live with the protocol layer.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance on row sums (and distribution sums) at construction.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Residual bound for `(I - Q) N = I`.
pub const FUNDAMENTAL_RESIDUAL_TOL: f64 = 1e-10;

/// Default cap on power-iteration sweeps.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Relative pivot magnitude under which an LU factorisation is treated as singular.
const PIVOT_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("state index {index} out of range for {n} states")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("state {state} has no return path to itself")]
    NoReturnPath { state: usize },
    #[error("power iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("equilibrium system is singular (chain is likely reducible)")]
    SingularSystem,
    #[error("equilibrium residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualExceeded { residual: f64, tol: f64 },
    #[error("I - Q is singular for target state {target} (target unreachable from some state)")]
    SingularMatrix { target: usize },
    #[error("state {state} has zero equilibrium mass")]
    NotRecurrent { state: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// Square row-stochastic matrix.
#[derive(Clone, PartialEq)]
pub struct StochasticMatrix {
    inner: DMatrix<f64>,
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticMatrix")
            .field("n", &self.n())
            .field("rows", &self.rows())
            .finish()
    }
}

impl StochasticMatrix {
    /// Validates a dense row-major matrix.
    pub fn validate(rows: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let n = rows.len();
        if n == 0 {
            return Err(MarkovError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MarkovError::NonSquare { row: i, len: row.len(), expected: n });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(MarkovError::EntryOutOfRange { row: i, col: j, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MarkovError::RowSumViolation { row: i, sum });
            }
        }
        let inner = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inner.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    fn check_index(&self, index: usize) -> Result<(), MarkovError> {
        if index >= self.n() {
            Err(MarkovError::IndexOutOfRange { index, n: self.n() })
        } else {
            Ok(())
        }
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.inner[(i, j)] > 0.0)
    }

    /// States reachable from `start` in zero or more steps (forward or on the
    /// reversed support graph).
    fn reachable(&self, start: usize, reverse: bool) -> Vec<bool> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for (v, seen_v) in seen.iter_mut().enumerate() {
                let w = if reverse { self.inner[(v, u)] } else { self.inner[(u, v)] };
                if w > 0.0 && !*seen_v {
                    *seen_v = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// True iff the support graph is a single strongly connected component.
    pub fn is_irreducible(&self) -> bool {
        self.reachable(0, false).iter().all(|&b| b) && self.reachable(0, true).iter().all(|&b| b)
    }

    /// Period of `state`: gcd of the lengths of all cycles through it,
    /// computed on the support graph restricted to its communicating class.
    pub fn period(&self, state: usize) -> Result<usize, MarkovError> {
        self.check_index(state)?;
        let fwd = self.reachable(state, false);
        let bwd = self.reachable(state, true);
        let class: Vec<bool> = fwd.iter().zip(&bwd).map(|(&a, &b)| a && b).collect();
        let returns = (0..self.n()).any(|u| class[u] && self.inner[(u, state)] > 0.0);
        if !returns {
            return Err(MarkovError::NoReturnPath { state });
        }

        let mut level: Vec<Option<usize>> = vec![None; self.n()];
        level[state] = Some(0);
        let mut queue = VecDeque::from([state]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            let lu = level[u].expect("queued states have a level");
            for v in self.successors(u).filter(|&v| class[v]) {
                match level[v] {
                    None => {
                        level[v] = Some(lu + 1);
                        queue.push_back(v);
                    }
                    Some(lv) => g = gcd(g, (lu + 1).abs_diff(lv)),
                }
            }
        }
        Ok(g)
    }

    /// True iff irreducible and state 0 (hence every state) has period 1.
    pub fn is_ergodic(&self) -> bool {
        self.is_irreducible() && matches!(self.period(0), Ok(1))
    }

    /// Equilibrium distribution by direct linear solve.
    pub fn equilibrium(&self, tol: f64) -> Result<Distribution, MarkovError> {
        self.equilibrium_with(EquilibriumMethod::LinearSolve, tol)
    }

    pub fn equilibrium_with(
        &self,
        method: EquilibriumMethod,
        tol: f64,
    ) -> Result<Distribution, MarkovError> {
        let probs = match method {
            EquilibriumMethod::LinearSolve => self.equilibrium_linear(tol)?,
            EquilibriumMethod::PowerIteration { max_iterations } => {
                self.equilibrium_power(tol, max_iterations)?
            }
        };
        Distribution::new(probs)
    }

    fn equilibrium_linear(&self, tol: f64) -> Result<Vec<f64>, MarkovError> {
        let n = self.n();
        // pi (P - I) = 0 transposed, last equation replaced by sum(pi) = 1.
        let mut a = self.inner.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = nalgebra::DVector::zeros(n);
        b[n - 1] = 1.0;
        let lu = a.lu();
        if lu_is_singular(&lu) {
            return Err(MarkovError::SingularSystem);
        }
        let x = lu.solve(&b).ok_or(MarkovError::SingularSystem)?;
        if x.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            return Err(MarkovError::SingularSystem);
        }
        let mut probs: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|v| *v /= total);
        let residual = self.stationarity_residual(&probs);
        if residual > tol {
            return Err(MarkovError::ResidualExceeded { residual, tol });
        }
        Ok(probs)
    }

    fn equilibrium_power(&self, tol: f64, max_iterations: usize) -> Result<Vec<f64>, MarkovError> {
        let n = self.n();
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..max_iterations {
            self.step_distribution(&pi, &mut next);
            let residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if residual <= tol {
                let total: f64 = pi.iter().sum();
                return Ok(pi.iter().map(|v| v / total).collect());
            }
            std::mem::swap(&mut pi, &mut next);
        }
        Err(MarkovError::NotConverged { iterations: max_iterations })
    }

    /// `out = dist * P`.
    pub fn step_distribution(&self, dist: &[f64], out: &mut [f64]) {
        let n = self.n();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in dist.iter().enumerate().take(n) {
            if w == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += w * self.inner[(i, j)];
            }
        }
    }

    /// `max_j |(pi P)_j - pi_j|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; self.n()];
        self.step_distribution(pi, &mut out);
        pi.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `P^k` by repeated squaring; `P^0` is the identity.
    pub fn matrix_power(&self, k: u64) -> DMatrix<f64> {
        let n = self.n();
        let mut result = DMatrix::identity(n, n);
        let mut base = self.inner.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// `(I - Q)^{-1}` where `Q` drops the row and column of `target`.
    pub fn fundamental_matrix(&self, target: usize) -> Result<FundamentalMatrix, MarkovError> {
        self.check_index(target)?;
        let index_map: Vec<usize> = (0..self.n()).filter(|&s| s != target).collect();
        let m = index_map.len();
        if m == 0 {
            return Ok(FundamentalMatrix { target, values: DMatrix::zeros(0, 0), index_map });
        }
        let i_minus_q = DMatrix::from_fn(m, m, |a, b| {
            let delta = if a == b { 1.0 } else { 0.0 };
            delta - self.inner[(index_map[a], index_map[b])]
        });
        let lu = i_minus_q.clone().lu();
        if lu_is_singular(&lu) {
            return Err(MarkovError::SingularMatrix { target });
        }
        let values = lu.try_inverse().ok_or(MarkovError::SingularMatrix { target })?;
        let residual = (&i_minus_q * &values - DMatrix::identity(m, m)).amax();
        if !residual.is_finite() || residual > FUNDAMENTAL_RESIDUAL_TOL {
            return Err(MarkovError::SingularMatrix { target });
        }
        Ok(FundamentalMatrix { target, values, index_map })
    }

    /// Mean and variance of the hitting time of `target` from every other state.
    pub fn hitting_stats(&self, target: usize) -> Result<HittingStats, MarkovError> {
        let fundamental = self.fundamental_matrix(target)?;
        let nmat = &fundamental.values;
        let m = nmat.nrows();
        let t = nmat * nalgebra::DVector::from_element(m, 1.0);
        let two_n_minus_i = nmat * 2.0 - DMatrix::identity(m, m);
        let second = &two_n_minus_i * &t;
        let variances: Vec<f64> = (0..m).map(|i| second[i] - t[i] * t[i]).collect();
        Ok(HittingStats {
            target,
            means: t.iter().copied().collect(),
            variances,
            index_map: fundamental.index_map,
        })
    }

    /// Expected return time to `state`, `1 / pi_state`.
    pub fn mean_return_time(&self, state: usize) -> Result<f64, MarkovError> {
        self.check_index(state)?;
        let pi = self.equilibrium(DEFAULT_EQUILIBRIUM_TOL)?;
        let mass = pi.probs()[state];
        if mass <= 0.0 {
            return Err(MarkovError::NotRecurrent { state });
        }
        Ok(1.0 / mass)
    }
}

/// Tolerance used where callers do not supply one.
pub const DEFAULT_EQUILIBRIUM_TOL: f64 = 1e-12;

fn lu_is_singular(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    max == 0.0 || diag.iter().any(|&d| !d.is_finite() || d <= PIVOT_REL_TOL * max.max(1.0))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EquilibriumMethod {
    #[default]
    LinearSolve,
    PowerIteration { max_iterations: usize },
}

impl EquilibriumMethod {
    pub fn power_iteration() -> Self {
        Self::PowerIteration { max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for StochasticMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixDoc { n: self.n(), rows: self.rows() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = MatrixDoc::deserialize(deserializer)?;
        if doc.rows.len() != doc.n {
            return Err(serde::de::Error::custom(format!(
                "declared n = {} but found {} rows",
                doc.n,
                doc.rows.len()
            )));
        }
        StochasticMatrix::validate(doc.rows).map_err(serde::de::Error::custom)
    }
}

/// Probability row vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, MarkovError> {
        if probs.is_empty() {
            return Err(MarkovError::InvalidDistribution("empty".into()));
        }
        if let Some(v) = probs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MarkovError::InvalidDistribution(format!("entry {v} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(MarkovError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `(I - Q)^{-1}` for a target state, indexed by the remaining states.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    pub target: usize,
    pub values: DMatrix<f64>,
    /// Reduced index -> original state index.
    pub index_map: Vec<usize>,
}

impl FundamentalMatrix {
    pub fn reduced_index(&self, state: usize) -> Option<usize> {
        self.index_map.iter().position(|&s| s == state)
    }
}

/// Hitting-time moments (in steps) towards `target`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingStats {
    pub target: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub index_map: Vec<usize>,
}

impl HittingStats {
    pub fn mean_from(&self, start: usize) -> Option<f64> {
        self.position(start).map(|i| self.means[i])
    }

    pub fn variance_from(&self, start: usize) -> Option<f64> {
        self.position(start).map(|i| self.variances[i])
    }

    fn position(&self, start: usize) -> Option<usize> {
        self.index_map.iter().position(|&s| s == start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::validate(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn bkp(p1: f64, p2: f64) -> StochasticMatrix {
        m(&[&[1.0 - p1, p1, 0.0], &[1.0 - p2, 0.0, p2], &[1.0 - p1, p1, 0.0]])
    }

    /// gcd of { t <= horizon : (A^t)_ii > 0 } on the boolean support graph.
    fn brute_force_period(p: &StochasticMatrix, state: usize, horizon: usize) -> Option<usize> {
        let n = p.n();
        let adj: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| p.get(i, j) > 0.0).collect()).collect();
        let mut reach = adj.clone();
        let mut g = 0;
        for t in 1..=horizon {
            if reach[state][state] {
                g = gcd(g, t);
            }
            let mut next = vec![vec![false; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if reach[i][k] {
                        for j in 0..n {
                            next[i][j] |= adj[k][j];
                        }
                    }
                }
            }
            reach = next;
        }
        (g > 0).then_some(g)
    }

    #[test]
    fn validate_examples() {
        assert_eq!(m(&[&[1.0]]).n(), 1);
        assert_eq!(m(&[&[0.5, 0.5], &[0.3, 0.7]]).n(), 2);
        match StochasticMatrix::validate(vec![vec![0.5, 0.6], vec![0.3, 0.7]]) {
            Err(MarkovError::RowSumViolation { row: 0, sum }) => assert!((sum - 1.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            StochasticMatrix::validate(vec![vec![1.0, 0.0]]),
            Err(MarkovError::NonSquare { .. })
        ));
        assert!(matches!(
            StochasticMatrix::validate(vec![vec![1.5, -0.5], vec![0.5, 0.5]]),
            Err(MarkovError::EntryOutOfRange { row: 0, col: 0, .. })
        ));
        assert!(matches!(StochasticMatrix::validate(vec![]), Err(MarkovError::Empty)));
        assert!(StochasticMatrix::validate(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn irreducibility() {
        assert!(m(&[&[0.0, 1.0], &[1.0, 0.0]]).is_irreducible());
        assert!(!m(&[&[1.0, 0.0], &[0.5, 0.5]]).is_irreducible());
        assert!(bkp(0.5, 0.5).is_irreducible());
        assert!(!bkp(1.0, 1.0).is_irreducible());
    }

    #[test]
    fn period_examples() {
        let flip = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(flip.period(0).unwrap(), 2);
        assert_eq!(bkp(0.5, 0.5).period(0).unwrap(), 1);
        assert_eq!(bkp(0.5, 0.5).period(2).unwrap(), 1);

        let det = bkp(1.0, 1.0);
        let oracle = brute_force_period(&det, 2, 12).unwrap();
        assert_eq!(oracle, 2);
        assert_eq!(det.period(2).unwrap(), oracle);
        // state 0 is transient once p1 = 1
        assert_eq!(det.period(0), Err(MarkovError::NoReturnPath { state: 0 }));
        assert!(brute_force_period(&det, 0, 12).is_none());
    }

    #[test]
    fn period_matches_brute_force_on_cycles() {
        // 3-cycle with a chord making a 2-cycle: gcd(2, 3) = 1
        let a = m(&[&[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5], &[1.0, 0.0, 0.0]]);
        assert_eq!(a.period(0).unwrap(), brute_force_period(&a, 0, 20).unwrap());
        let b = m(&[&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(b.period(1).unwrap(), 4);
        assert_eq!(brute_force_period(&b, 1, 20).unwrap(), 4);
    }

    #[test]
    fn equilibrium_examples() {
        let sym = m(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let pi = sym.equilibrium(1e-12).unwrap();
        assert!((pi.probs()[0] - 0.5).abs() < 1e-15);

        let pi = bkp(0.5, 0.5).equilibrium(1e-12).unwrap();
        assert!((pi.probs()[2] - 1.0 / 6.0).abs() < 1e-14);
        let pw = bkp(0.5, 0.5).equilibrium_with(EquilibriumMethod::power_iteration(), 1e-14).unwrap();
        assert!((pw.probs()[2] - 1.0 / 6.0).abs() < 1e-12);

        // two absorbing states: equilibrium not unique
        let split = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(split.equilibrium(1e-12), Err(MarkovError::SingularSystem));
    }

    #[test]
    fn power_iteration_fails_on_periodic_chain() {
        // uniform start is stationary for the symmetric flip, so use an asymmetric one
        let periodic = m(&[&[0.0, 0.5, 0.5], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(
            periodic.equilibrium_with(EquilibriumMethod::PowerIteration { max_iterations: 1000 }, 1e-12),
            Err(MarkovError::NotConverged { iterations: 1000 })
        );
    }

    #[test]
    fn matrix_power_examples() {
        let p = bkp(0.3, 0.6);
        assert_eq!(p.matrix_power(0), DMatrix::identity(3, 3));
        assert_eq!(&p.matrix_power(1), p.as_matrix());
        let idem = m(&[&[0.7, 0.3], &[0.7, 0.3]]);
        assert!((idem.matrix_power(5) - idem.as_matrix()).amax() < 1e-15);
        let p5 = p.as_matrix() * p.as_matrix() * p.as_matrix() * p.as_matrix() * p.as_matrix();
        assert!((p.matrix_power(5) - p5).amax() < 1e-14);
    }

    #[test]
    fn fundamental_matrix_examples() {
        let p = 0.3;
        let geo = m(&[&[1.0 - p, p], &[1.0 - p, p]]);
        let f = geo.fundamental_matrix(1).unwrap();
        assert!((f.values[(0, 0)] - 1.0 / p).abs() < 1e-12);

        let f = bkp(1.0, 1.0).fundamental_matrix(2).unwrap();
        assert_eq!(f.index_map, vec![0, 1]);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((f.values - expected).amax() < 1e-15);

        let stuck = m(&[&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0], &[0.5, 0.5, 0.0]]);
        assert_eq!(stuck.fundamental_matrix(2).unwrap_err(), MarkovError::SingularMatrix { target: 2 });
        assert!(matches!(stuck.fundamental_matrix(7), Err(MarkovError::IndexOutOfRange { .. })));
    }

    #[test]
    fn hitting_stats_examples() {
        for p in [0.1, 0.5, 0.9] {
            let geo = m(&[&[1.0 - p, p], &[1.0 - p, p]]);
            let h = geo.hitting_stats(1).unwrap();
            assert!((h.mean_from(0).unwrap() - 1.0 / p).abs() < 1e-12);
            assert!((h.variance_from(0).unwrap() - (1.0 - p) / (p * p)).abs() < 1e-10);
            assert!(h.mean_from(1).is_none());
        }
        let h = bkp(1.0, 1.0).hitting_stats(2).unwrap();
        assert_eq!(h.mean_from(0), Some(2.0));
        assert_eq!(h.variance_from(0), Some(0.0));
        let h = bkp(0.5, 0.5).hitting_stats(2).unwrap();
        assert!((h.mean_from(0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn return_time_examples() {
        let sym = m(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!((sym.mean_return_time(0).unwrap() - 2.0).abs() < 1e-12);
        assert!((bkp(0.5, 0.5).mean_return_time(2).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(bkp(1.0, 1.0).mean_return_time(0), Err(MarkovError::NotRecurrent { state: 0 }));
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let p = bkp(0.25, 0.75);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with("{\"n\":3,\"rows\":"));
        let back: StochasticMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<StochasticMatrix>(r#"{"n":2,"rows":[[0.5,0.6],[0.3,0.7]]}"#).is_err());
        assert!(serde_json::from_str::<StochasticMatrix>(r#"{"n":3,"rows":[[1.0]]}"#).is_err());
    }
}
