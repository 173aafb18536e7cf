//! Markov chains of continuous entanglement-distribution protocols.
//!
//! Three families are built here:
//!
//! * multiheralded generation over one link (`n` heralding rounds; `n = 1`
//!   is plain single-heralded generation, `n = 2` the double-heralded
//!   Barrett-Kok scheme),
//! * two links joined by a swap, each link single-heralded (`shs`),
//! * two links joined by a swap, each link double-heralded (`dhs`).
//!
//! Every chain carries a success state and a start (failure) state whose
//! transition rows are identical: both begin a fresh attempt.

pub mod closed_form;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MarkovError, StochasticMatrix, ROW_SUM_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("multiheralded protocol needs at least one round")]
    EmptyRounds,
    #[error("probability {name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: f64 },
    #[error("expected {expected} heralding round(s) per link, got left = {left}, right = {right}")]
    WrongHeraldCount { expected: usize, left: usize, right: usize },
    #[error("probability {name} must be nonzero for this quantity")]
    ZeroProbability { name: String },
    #[error("both link probabilities are zero; the chain never leaves its start state")]
    DegenerateChain,
    #[error("tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("{labels} labels for a {n}-state matrix")]
    LabelMismatch { labels: usize, n: usize },
    #[error("state index {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("success and start state coincide ({0})")]
    SameStartAndSuccess(usize),
    #[error("row of success state {success} differs from row of start state {start}")]
    RowMismatch { success: usize, start: usize },
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<f64, ProtocolError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ProtocolError::ProbabilityOutOfRange { name: name.to_string(), value })
    }
}

/// Per-round success probabilities `p_1 .. p_n` of a multiheralded scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeraldParams {
    round_probs: Vec<f64>,
}

impl MultiHeraldParams {
    pub fn new(round_probs: Vec<f64>) -> Result<Self, ProtocolError> {
        if round_probs.is_empty() {
            return Err(ProtocolError::EmptyRounds);
        }
        for (i, &p) in round_probs.iter().enumerate() {
            check_probability(&format!("p{}", i + 1), p)?;
        }
        Ok(Self { round_probs })
    }

    pub fn round_probs(&self) -> &[f64] {
        &self.round_probs
    }

    pub fn rounds(&self) -> usize {
        self.round_probs.len()
    }
}

/// Link and swap probabilities of a two-link chain. Each link has one
/// probability per heralding round.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkParams {
    left_probs: Vec<f64>,
    right_probs: Vec<f64>,
    swap_prob: f64,
}

impl TwoLinkParams {
    pub fn new(left_probs: Vec<f64>, right_probs: Vec<f64>, swap_prob: f64) -> Result<Self, ProtocolError> {
        if left_probs.is_empty() || left_probs.len() != right_probs.len() {
            return Err(ProtocolError::WrongHeraldCount {
                expected: left_probs.len().max(1),
                left: left_probs.len(),
                right: right_probs.len(),
            });
        }
        for (i, &p) in left_probs.iter().enumerate() {
            check_probability(&format!("pl{}", i + 1), p)?;
        }
        for (i, &p) in right_probs.iter().enumerate() {
            check_probability(&format!("pr{}", i + 1), p)?;
        }
        check_probability("ps", swap_prob)?;
        Ok(Self { left_probs, right_probs, swap_prob })
    }

    pub fn single(pl: f64, pr: f64, ps: f64) -> Result<Self, ProtocolError> {
        Self::new(vec![pl], vec![pr], ps)
    }

    pub fn double(left: [f64; 2], right: [f64; 2], ps: f64) -> Result<Self, ProtocolError> {
        Self::new(left.to_vec(), right.to_vec(), ps)
    }

    pub fn left_probs(&self) -> &[f64] {
        &self.left_probs
    }

    pub fn right_probs(&self) -> &[f64] {
        &self.right_probs
    }

    pub fn swap_prob(&self) -> f64 {
        self.swap_prob
    }

    fn expect_rounds(&self, expected: usize) -> Result<(), ProtocolError> {
        if self.left_probs.len() != expected {
            return Err(ProtocolError::WrongHeraldCount {
                expected,
                left: self.left_probs.len(),
                right: self.right_probs.len(),
            });
        }
        Ok(())
    }
}

/// A protocol's transition matrix together with its state labels, the
/// success and start states, and the duration `tau` of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolChain {
    matrix: StochasticMatrix,
    labels: Vec<String>,
    success_state: usize,
    start_state: usize,
    tau: f64,
}

impl ProtocolChain {
    pub fn new(
        matrix: StochasticMatrix,
        labels: Vec<String>,
        success_state: usize,
        start_state: usize,
        tau: f64,
    ) -> Result<Self, ProtocolError> {
        let n = matrix.n();
        if labels.len() != n {
            return Err(ProtocolError::LabelMismatch { labels: labels.len(), n });
        }
        for index in [success_state, start_state] {
            if index >= n {
                return Err(ProtocolError::StateOutOfRange { index, n });
            }
        }
        if success_state == start_state {
            return Err(ProtocolError::SameStartAndSuccess(start_state));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ProtocolError::InvalidTau(tau));
        }
        let rows_match = (0..n)
            .all(|j| (matrix.get(success_state, j) - matrix.get(start_state, j)).abs() <= ROW_SUM_TOL);
        if !rows_match {
            return Err(ProtocolError::RowMismatch { success: success_state, start: start_state });
        }
        Ok(Self { matrix, labels, success_state, start_state, tau })
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn success_state(&self) -> usize {
        self.success_state
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Builds a row from `(column, weight)` pairs. The first weight is replaced
/// by one minus the rest so the row sums to one up to rounding of the others.
fn row(n: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let rest: f64 = entries[1..].iter().map(|&(_, w)| w).sum();
    out[entries[0].0] += (1.0 - rest).max(0.0);
    for &(j, w) in &entries[1..] {
        out[j] += w;
    }
    out
}

/// `(n + 1)`-state chain of an `n`-round heralded scheme; state `i` means
/// rounds `1..=i` succeeded, state 0 is failure and state `n` is success.
pub fn build_multiheralded(params: &MultiHeraldParams, tau: f64) -> Result<ProtocolChain, ProtocolError> {
    let p = params.round_probs();
    let n = p.len();
    let dim = n + 1;
    let mut rows = Vec::with_capacity(dim);
    for (i, &pi) in p.iter().enumerate() {
        rows.push(row(dim, &[(0, 1.0 - pi), (i + 1, pi)]));
    }
    rows.push(rows[0].clone());
    let labels = (0..dim).map(|i| i.to_string()).collect();
    ProtocolChain::new(StochasticMatrix::validate(rows)?, labels, n, 0, tau)
}

pub const SHS_LABELS: [&str; 5] = ["00", "01", "10", "11", "S"];

/// Two single-heralded links and a swap. States 00, 01, 10, 11 record which
/// link holds a pair (left digit = left link); S is a successful swap.
pub fn build_two_link_single_heralded(
    params: &TwoLinkParams,
    tau: f64,
) -> Result<ProtocolChain, ProtocolError> {
    params.expect_rounds(1)?;
    let (pl, pr, ps) = (params.left_probs[0], params.right_probs[0], params.swap_prob);
    let (ql, qr) = (1.0 - pl, 1.0 - pr);
    let fresh = row(5, &[(0, ql * qr), (1, ql * pr), (2, pl * qr), (3, pl * pr)]);
    let rows = vec![
        fresh.clone(),
        row(5, &[(1, ql), (3, pl)]),
        row(5, &[(2, qr), (3, pr)]),
        row(5, &[(0, 1.0 - ps), (4, ps)]),
        fresh,
    ];
    let labels = SHS_LABELS.iter().map(|s| s.to_string()).collect();
    ProtocolChain::new(StochasticMatrix::validate(rows)?, labels, 4, 0, tau)
}

pub const DHS_LABELS: [&str; 10] = ["00", "01", "02", "10", "11", "12", "20", "21", "22", "S"];

/// Two double-heralded links and a swap. State `ij` means the left link has
/// completed `i` rounds and the right link `j` rounds.
pub fn build_two_link_double_heralded(
    params: &TwoLinkParams,
    tau: f64,
) -> Result<ProtocolChain, ProtocolError> {
    params.expect_rounds(2)?;
    let l = &params.left_probs;
    let r = &params.right_probs;
    let ps = params.swap_prob;
    let idx = |i: usize, j: usize| 3 * i + j;
    let mut rows = vec![vec![0.0; 10]; 10];
    for i in 0..3 {
        for j in 0..3 {
            rows[idx(i, j)] = match (i, j) {
                (2, 2) => row(10, &[(0, 1.0 - ps), (9, ps)]),
                // right link complete: only the left link advances
                (i, 2) => row(10, &[(idx(0, 2), 1.0 - l[i]), (idx(i + 1, 2), l[i])]),
                (2, j) => row(10, &[(idx(2, 0), 1.0 - r[j]), (idx(2, j + 1), r[j])]),
                (i, j) => {
                    let (pl, pr) = (l[i], r[j]);
                    row(
                        10,
                        &[
                            (idx(0, 0), (1.0 - pl) * (1.0 - pr)),
                            (idx(0, j + 1), (1.0 - pl) * pr),
                            (idx(i + 1, 0), pl * (1.0 - pr)),
                            (idx(i + 1, j + 1), pl * pr),
                        ],
                    )
                }
            };
        }
    }
    rows[9] = rows[0].clone();
    let labels = DHS_LABELS.iter().map(|s| s.to_string()).collect();
    ProtocolChain::new(StochasticMatrix::validate(rows)?, labels, 9, 0, tau)
}

/// Serialized protocol parameter set, tagged by `"protocol"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProtocolParams {
    Multiherald {
        round_probs: Vec<f64>,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Shs {
        left_probs: Vec<f64>,
        right_probs: Vec<f64>,
        swap_prob: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Dhs {
        left_probs: Vec<f64>,
        right_probs: Vec<f64>,
        swap_prob: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

fn default_tau() -> f64 {
    1.0
}

impl ProtocolParams {
    pub fn tau(&self) -> f64 {
        match self {
            Self::Multiherald { tau, .. } | Self::Shs { tau, .. } | Self::Dhs { tau, .. } => *tau,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Multiherald { .. } => "multiherald",
            Self::Shs { .. } => "shs",
            Self::Dhs { .. } => "dhs",
        }
    }

    pub fn build(&self) -> Result<ProtocolChain, ProtocolError> {
        match self {
            Self::Multiherald { round_probs, tau } => {
                build_multiheralded(&MultiHeraldParams::new(round_probs.clone())?, *tau)
            }
            Self::Shs { left_probs, right_probs, swap_prob, tau } => build_two_link_single_heralded(
                &TwoLinkParams::new(left_probs.clone(), right_probs.clone(), *swap_prob)?,
                *tau,
            ),
            Self::Dhs { left_probs, right_probs, swap_prob, tau } => build_two_link_double_heralded(
                &TwoLinkParams::new(left_probs.clone(), right_probs.clone(), *swap_prob)?,
                *tau,
            ),
        }
    }

    /// Closed-form equilibrium probability of the success state, where one exists.
    pub fn closed_form_equilibrium(&self) -> Result<Option<f64>, ProtocolError> {
        match self {
            Self::Multiherald { round_probs, .. } => Ok(Some(closed_form::equilibrium_multiheralded(
                &MultiHeraldParams::new(round_probs.clone())?,
            ))),
            Self::Shs { left_probs, right_probs, swap_prob, .. } => {
                let p = TwoLinkParams::new(left_probs.clone(), right_probs.clone(), *swap_prob)?;
                closed_form::equilibrium_shs(&p).map(Some)
            }
            Self::Dhs { .. } => Ok(None),
        }
    }

    /// Closed-form latency variance in steps squared, where one exists.
    pub fn closed_form_latency_variance(&self) -> Result<Option<f64>, ProtocolError> {
        match self {
            Self::Multiherald { round_probs, .. } => closed_form::latency_variance_multiheralded(
                &MultiHeraldParams::new(round_probs.clone())?,
            )
            .map(Some),
            Self::Shs { left_probs, right_probs, swap_prob, .. } => {
                let p = TwoLinkParams::new(left_probs.clone(), right_probs.clone(), *swap_prob)?;
                closed_form::latency_variance_shs(&p).map(Some)
            }
            Self::Dhs { .. } => Ok(None),
        }
    }
}
