use serde::{Deserialize, Serialize};

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub expr: Expr,
    pub train_sse: f64,
    pub nodes: usize,
}

impl FrontMember {
    pub fn new(expr: Expr, train_sse: f64) -> Self {
        let nodes = expr.node_count();
        FrontMember { expr, train_sse, nodes }
    }

    /// Weakly better on both objectives and strictly better on one.
    pub fn dominates(&self, other: &FrontMember) -> bool {
        self.train_sse <= other.train_sse
            && self.nodes <= other.nodes
            && (self.train_sse < other.train_sse || self.nodes < other.nodes)
    }
}

/// Mutually non-dominated models under (train SSE, node count), sorted by
/// node count ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    members: Vec<FrontMember>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a front from arbitrary candidates, dropping dominated ones.
    pub fn from_members(members: impl IntoIterator<Item = FrontMember>) -> Self {
        let mut front = ParetoFront::new();
        for m in members {
            front.insert(m);
        }
        front
    }

    /// Offers `m` to the archive. Returns whether it was kept.
    ///
    /// Non-finite SSEs are refused; on an exact tie in both objectives the
    /// incumbent stays.
    pub fn insert(&mut self, m: FrontMember) -> bool {
        if !m.train_sse.is_finite() {
            return false;
        }
        if self
            .members
            .iter()
            .any(|o| o.dominates(&m) || (o.train_sse == m.train_sse && o.nodes == m.nodes))
        {
            return false;
        }
        self.members.retain(|o| !m.dominates(o));
        let at = self.members.partition_point(|o| o.nodes < m.nodes);
        self.members.insert(at, m);
        true
    }

    pub fn members(&self) -> &[FrontMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Lowest-SSE member (the largest one on a valid front).
    pub fn most_accurate(&self) -> Option<&FrontMember> {
        self.members.last()
    }

    /// Checks the front invariants.
    pub fn is_valid(&self) -> bool {
        let sorted = self.members.windows(2).all(|w| w[0].nodes < w[1].nodes);
        let free = self
            .members
            .iter()
            .all(|a| self.members.iter().all(|b| !a.dominates(b)));
        sorted && free
    }

    pub fn into_members(self) -> Vec<FrontMember> {
        self.members
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(sse: f64, nodes: usize) -> FrontMember {
        // a chain of negations has the requested node count
        let mut e = Expr::var(0);
        for _ in 1..nodes {
            e = -e;
        }
        FrontMember::new(e, sse)
    }

    #[test]
    fn dominated_candidates_are_rejected() {
        let mut f = ParetoFront::new();
        assert!(f.insert(member(1.0, 3)));
        assert!(!f.insert(member(2.0, 5)));
        assert!(!f.insert(member(1.0, 3)));
        assert!(f.insert(member(0.5, 7)));
        assert!(f.insert(member(3.0, 1)));
        assert_eq!(f.len(), 3);
        assert!(f.is_valid());
    }

    #[test]
    fn newcomer_evicts_dominated_members() {
        let mut f = ParetoFront::from_members([member(5.0, 2), member(4.0, 4), member(3.0, 6)]);
        assert!(f.insert(member(1.0, 3)));
        let nodes: Vec<usize> = f.members().iter().map(|m| m.nodes).collect();
        assert_eq!(nodes, vec![2, 3]);
        assert_eq!(f.most_accurate().unwrap().train_sse, 1.0);
    }

    #[test]
    fn non_finite_refused() {
        let mut f = ParetoFront::new();
        assert!(!f.insert(member(f64::INFINITY, 1)));
        assert!(!f.insert(member(f64::NAN, 1)));
        assert!(f.is_empty());
    }
}
