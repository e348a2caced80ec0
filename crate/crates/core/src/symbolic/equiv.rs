//! Equivalence up to an additive or multiplicative constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simplify;
use crate::expr::{evaluate, Expr};

/// Number of probe points drawn per check.
pub const PROBE_POINTS: usize = 256;
/// Minimum number of probe points where both expressions must be defined.
pub const MIN_VALID_POINTS: usize = 64;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const PROBE_SEED: u64 = 0x5eed_cafe_f00d;
const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    ExactAdditive,
    ExactMultiplicative,
    NotEquivalent,
}

/// Outcome of comparing a candidate model with the generating function.
///
/// For `ExactAdditive` the constant is `truth - candidate`; for
/// `ExactMultiplicative` it is `truth / candidate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub kind: VerdictKind,
    pub constant: Option<f64>,
    /// Probe points that entered the decision.
    pub evidence: usize,
}

impl EquivalenceVerdict {
    pub fn is_exact(&self) -> bool {
        self.kind != VerdictKind::NotEquivalent
    }

    fn not_equivalent(evidence: usize) -> Self {
        EquivalenceVerdict {
            kind: VerdictKind::NotEquivalent,
            constant: None,
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivalenceError {
    #[error("only {valid} of {drawn} probe points are inside both domains (need {required})")]
    InsufficientDomain {
        valid: usize,
        drawn: usize,
        required: usize,
    },
    #[error("expressions need {needed} variables but the domain lists {given}")]
    DomainArity { needed: usize, given: usize },
    #[error("empty or inverted interval for variable {0}")]
    EmptyInterval(usize),
}

/// Radical inverse of `i` in `base`.
fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Randomly shifted Halton points mapped onto `domain`.
pub fn probe_points(domain: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = domain.iter().map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            domain
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = if d < PRIMES.len() {
                        (radical_inverse(i, PRIMES[d]) + shifts[d]).fract()
                    } else {
                        rng.random::<f64>()
                    };
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Decides whether `candidate` equals `truth` up to an additive or a
/// multiplicative constant on `domain`.
///
/// The difference `truth - candidate` is simplified first; when it folds to a
/// constant that settles the question. Otherwise both expressions are probed
/// on [`PROBE_POINTS`] quasi-random points and the difference and ratio are
/// tested for constancy at relative tolerance `tol`.
pub fn equivalent_up_to_constant(
    truth: &Expr,
    candidate: &Expr,
    domain: &[(f64, f64)],
    tol: f64,
) -> Result<EquivalenceVerdict, EquivalenceError> {
    let needed = truth.arity().max(candidate.arity());
    if domain.len() < needed {
        return Err(EquivalenceError::DomainArity {
            needed,
            given: domain.len(),
        });
    }
    if let Some(i) = domain.iter().position(|(lo, hi)| !(lo <= hi)) {
        return Err(EquivalenceError::EmptyInterval(i));
    }

    let mut diffs = Vec::with_capacity(PROBE_POINTS);
    let mut pairs = Vec::with_capacity(PROBE_POINTS);
    for p in probe_points(domain, PROBE_POINTS, PROBE_SEED) {
        if let (Ok(t), Ok(c)) = (evaluate(truth, &p), evaluate(candidate, &p)) {
            diffs.push(t - c);
            pairs.push((t, c));
        }
    }
    let valid = pairs.len();
    if valid < MIN_VALID_POINTS {
        return Err(EquivalenceError::InsufficientDomain {
            valid,
            drawn: PROBE_POINTS,
            required: MIN_VALID_POINTS,
        });
    }

    let difference = simplify(&(truth.clone() - candidate.clone()));
    if let Some(c) = difference.as_const() {
        return Ok(EquivalenceVerdict {
            kind: VerdictKind::ExactAdditive,
            constant: Some(c),
            evidence: valid,
        });
    }

    let (mean_d, std_d) = mean_std(&diffs);
    if std_d <= tol * (1.0 + mean_d.abs()) {
        return Ok(EquivalenceVerdict {
            kind: VerdictKind::ExactAdditive,
            constant: Some(mean_d),
            evidence: valid,
        });
    }

    if pairs.iter().all(|&(_, c)| c.abs() > tol) {
        let ratios: Vec<f64> = pairs.iter().map(|&(t, c)| t / c).collect();
        let (mean_r, std_r) = mean_std(&ratios);
        if mean_r.abs() > tol && std_r <= tol * (1.0 + mean_r.abs()) {
            return Ok(EquivalenceVerdict {
                kind: VerdictKind::ExactMultiplicative,
                constant: Some(mean_r),
                evidence: valid,
            });
        }
    }
    Ok(EquivalenceVerdict::not_equivalent(valid))
}
