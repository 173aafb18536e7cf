//! Closed-form throughput and latency expressions for the protocol chains.
//!
//! All quantities are in step units: equilibrium probabilities are successes
//! per step, latency variances are in steps squared. Scale by `tau` at the
//! call site.

use super::{MultiHeraldParams, ProtocolError, TwoLinkParams};

/// `prod_{j<=i} p_j` for `i = 1..=n`.
fn prefix_products(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(1.0, |acc, &x| {
            *acc *= x;
            Some(*acc)
        })
        .collect()
}

/// Equilibrium probability of the success state of an `n`-round scheme:
/// `prod p_i / (1 + sum_{i<n} prod_{j<=i} p_j)`.
pub fn equilibrium_multiheralded(params: &MultiHeraldParams) -> f64 {
    let prefix = prefix_products(params.round_probs());
    let n = prefix.len();
    let denom = 1.0 + prefix[..n - 1].iter().sum::<f64>();
    prefix[n - 1] / denom
}

/// Variance of the latency (steps squared) of an `n`-round scheme, starting
/// from failure:
///
/// `((1 + sum_{i<n} prod_{j<=i} p_j) / prod p)^2
///   - (2n - 1 + sum_{i<n} (2i - 1) prod_{j<=n-i} p_j) / prod p`.
pub fn latency_variance_multiheralded(params: &MultiHeraldParams) -> Result<f64, ProtocolError> {
    let p = params.round_probs();
    if let Some(i) = p.iter().position(|&x| x == 0.0) {
        return Err(ProtocolError::ZeroProbability { name: format!("p{}", i + 1) });
    }
    let prefix = prefix_products(p);
    let n = p.len();
    let total = prefix[n - 1];
    let mean = (1.0 + prefix[..n - 1].iter().sum::<f64>()) / total;
    let weighted: f64 = (1..n).map(|i| (2 * i - 1) as f64 * prefix[n - i - 1]).sum();
    Ok(mean * mean - ((2 * n - 1) as f64 + weighted) / total)
}

/// Exact expected successes per step over `horizon` steps of the
/// double-heralded chain started in failure.
pub fn bkp_exact_mean_throughput(p1: f64, p2: f64, horizon: u64) -> f64 {
    let n = horizon as f64;
    let stationary = p1 * p2 / (1.0 + p1);
    // (-p1)^N via powi needs an i32 exponent; fall back to powf for long horizons
    let alternating = if horizon <= i32::MAX as u64 {
        (-p1).powi(horizon as i32)
    } else {
        let mag = p1.powf(n);
        if horizon.is_multiple_of(2) { mag } else { -mag }
    };
    // factored so that N = 1 gives exactly 0
    stationary * (1.0 - (1.0 - alternating) / (n * (1.0 + p1)))
}

/// Leading coefficient of the double-heralded throughput variance:
/// `N tau^2 Var[T] -> p1 p2 [(1 + p1)^2 - p1 p2 (3 + p1)] / (1 + p1)^3`.
pub fn bkp_throughput_variance_leading(p1: f64, p2: f64) -> f64 {
    let a = 1.0 + p1;
    p1 * p2 * (a * a - p1 * p2 * (3.0 + p1)) / (a * a * a)
}

/// Equilibrium probability of the success state of the single-heralded
/// two-link chain.
pub fn equilibrium_shs(params: &TwoLinkParams) -> Result<f64, ProtocolError> {
    let (pl, pr, ps) = single_heralded(params)?;
    shs_equilibrium_raw(pl, pr, ps)
}

/// Same as [`equilibrium_shs`] on bare arguments, each in `[0, 1]`.
pub fn shs_equilibrium_raw(pl: f64, pr: f64, ps: f64) -> Result<f64, ProtocolError> {
    if pl == 0.0 && pr == 0.0 {
        return Err(ProtocolError::DegenerateChain);
    }
    let (ql, qr) = (1.0 - pl, 1.0 - pr);
    let num = pl * pr * ps * (1.0 - ql * qr);
    let den = 2.0 * pl * pr + ql * pr * pr + qr * pl * pl - pl * pr * ql * qr;
    Ok(num / den)
}

/// Latency variance (steps squared) of the single-heralded two-link chain
/// started in `00`.
pub fn latency_variance_shs(params: &TwoLinkParams) -> Result<f64, ProtocolError> {
    let (pl, pr, ps) = single_heralded(params)?;
    for (name, v) in [("pl", pl), ("pr", pr), ("ps", ps)] {
        if v == 0.0 {
            return Err(ProtocolError::ZeroProbability { name: name.into() });
        }
    }
    let either = pl + pr - pl * pr;
    let base = pl * pr * ps;
    let first = (pl * pr + pl * pl + pr * pr - pl * pl * pr * pr) / (base * either);
    let second_num = pl * pl * pr * (1.0 - pr) * (2.0 - pr)
        + pl.powi(3) * (1.0 - pr).powi(2) * (3.0 + pr)
        + 3.0 * pr.powi(3)
        + pl * pr * (4.0 + 2.0 * pr - 5.0 * pr * pr);
    Ok(first * first - second_num / (base * either * either))
}

fn single_heralded(params: &TwoLinkParams) -> Result<(f64, f64, f64), ProtocolError> {
    params.expect_rounds(1)?;
    Ok((params.left_probs()[0], params.right_probs()[0], params.swap_prob()))
}
