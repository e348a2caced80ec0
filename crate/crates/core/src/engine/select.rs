use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::pareto::{FrontMember, ParetoFront};
use super::EngineError;
use crate::datagen::Dataset;
use crate::expr::print_infix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Highest R² on held-out data.
    BestTestR2,
    /// Member reached by the largest SSE drop per added node.
    Knee,
    /// Smallest member whose SSE is within a factor `1 + epsilon` of the best.
    SmallestWithin { epsilon: f64 },
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::SmallestWithin { epsilon: 0.01 }
    }
}

/// R² of `m` on `ds` under exact semantics; `-inf` where undefined.
pub fn member_r2(m: &FrontMember, ds: &Dataset) -> f64 {
    super::model_r2(&m.expr, ds)
}

fn tiebreak(a: &FrontMember, b: &FrontMember) -> Ordering {
    a.nodes
        .cmp(&b.nodes)
        .then_with(|| print_infix(&a.expr).cmp(&print_infix(&b.expr)))
}

/// Applies `policy` to arbitrary candidates. Ties go to the smaller node
/// count, then to the lexicographically smaller printed form.
pub fn select_from<'a>(
    members: &'a [FrontMember],
    policy: SelectionPolicy,
    test: Option<&Dataset>,
) -> Result<&'a FrontMember, EngineError> {
    if members.is_empty() {
        return Err(EngineError::EmptyFront);
    }
    let pick_max = |score: &dyn Fn(&FrontMember) -> f64| {
        members
            .iter()
            .map(|m| (m, score(m)))
            .min_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then_with(|| tiebreak(a, b)))
            .map(|(m, _)| m)
            .expect("nonempty")
    };
    match policy {
        SelectionPolicy::BestTestR2 => {
            let ds = test.ok_or(EngineError::MissingTestData)?;
            Ok(pick_max(&|m| {
                let v = member_r2(m, ds);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }))
        }
        SelectionPolicy::Knee => {
            let mut sorted: Vec<&FrontMember> = members.iter().collect();
            sorted.sort_by(|a, b| a.nodes.cmp(&b.nodes).then(a.train_sse.total_cmp(&b.train_sse)));
            let mut best = sorted[0];
            let mut best_gain = 0.0;
            for w in sorted.windows(2) {
                let extra = (w[1].nodes - w[0].nodes).max(1) as f64;
                let gain = (w[0].train_sse - w[1].train_sse) / extra;
                if gain > best_gain || (gain == best_gain && gain > 0.0 && tiebreak(w[1], best).is_lt()) {
                    best = w[1];
                    best_gain = gain;
                }
            }
            Ok(best)
        }
        SelectionPolicy::SmallestWithin { epsilon } => {
            let min = members.iter().map(|m| m.train_sse).fold(f64::INFINITY, f64::min);
            let limit = min * (1.0 + epsilon.max(0.0));
            Ok(members
                .iter()
                .filter(|m| m.train_sse <= limit)
                .min_by(|a, b| tiebreak(a, b))
                .unwrap_or_else(|| pick_max(&|m| -m.train_sse)))
        }
    }
}

pub fn select_model<'a>(
    front: &'a ParetoFront,
    policy: SelectionPolicy,
    test: Option<&Dataset>,
) -> Result<&'a FrontMember, EngineError> {
    select_from(front.members(), policy, test)
}
