use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowMethod {
    /// Leaves may appear at any depth.
    Grow,
    /// Every branch reaches the depth bound.
    Full,
}

/// Primitive set and leaf distribution for random tree generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub n_vars: usize,
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    /// Constants are drawn uniformly from this interval.
    pub const_range: (f64, f64),
    /// Probability that a leaf is a constant rather than a variable.
    pub const_prob: f64,
    /// Probability of stopping early at an inner position under `Grow`.
    pub leaf_prob: f64,
}

impl Grammar {
    pub fn arithmetic(n_vars: usize) -> Self {
        Grammar {
            n_vars,
            unary: vec![],
            binary: vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul],
            const_range: (-5.0, 5.0),
            const_prob: 0.3,
            leaf_prob: 0.3,
        }
    }

    fn leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        if self.n_vars == 0 || rng.random::<f64>() < self.const_prob {
            let (lo, hi) = self.const_range;
            // short constants keep printed models readable
            let v = lo + (hi - lo) * rng.random::<f64>();
            Expr::Const((v * 1000.0).round() / 1000.0)
        } else {
            Expr::Var(rng.random_range(0..self.n_vars))
        }
    }

    fn n_ops(&self) -> usize {
        self.unary.len() + self.binary.len()
    }
}

/// Random tree with depth at most `max_depth` (a leaf has depth 1).
///
/// Panics if `max_depth` is zero.
pub fn random_expr<R: Rng + ?Sized>(grammar: &Grammar, max_depth: usize, method: GrowMethod, rng: &mut R) -> Expr {
    assert!(max_depth >= 1, "depth bound must be at least 1");
    if max_depth == 1 || grammar.n_ops() == 0 {
        return grammar.leaf(rng);
    }
    if method == GrowMethod::Grow && rng.random::<f64>() < grammar.leaf_prob {
        return grammar.leaf(rng);
    }
    let pick = rng.random_range(0..grammar.n_ops());
    if pick < grammar.unary.len() {
        let op = grammar.unary[pick];
        Expr::unary(op, random_expr(grammar, max_depth - 1, method, rng))
    } else {
        let op = grammar.binary[pick - grammar.unary.len()];
        let l = random_expr(grammar, max_depth - 1, method, rng);
        let r = random_expr(grammar, max_depth - 1, method, rng);
        Expr::binary(op, l, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_grammar() -> Grammar {
        Grammar {
            n_vars: 3,
            unary: UnaryOp::ALL.to_vec(),
            binary: BinaryOp::ALL.to_vec(),
            const_range: (-3.0, 3.0),
            const_prob: 0.3,
            leaf_prob: 0.3,
        }
    }

    #[test]
    fn depth_one_is_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(random_expr(&full_grammar(), 1, GrowMethod::Full, &mut rng).is_leaf());
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let a = random_expr(&full_grammar(), 6, GrowMethod::Grow, &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_expr(&full_grammar(), 6, GrowMethod::Grow, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.to_string(), b.to_string());
    }

    #[test]
    fn depth_bound_respected_over_many_samples() {
        let g = full_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut max_seen = 0;
        for i in 0..10_000 {
            let method = if i % 2 == 0 { GrowMethod::Grow } else { GrowMethod::Full };
            let e = random_expr(&g, 6, method, &mut rng);
            max_seen = max_seen.max(e.depth());
            assert!(e.arity() <= g.n_vars);
        }
        assert!(max_seen <= 6);
        assert_eq!(max_seen, 6);
    }

    #[test]
    fn full_method_reaches_bound() {
        let g = Grammar::arithmetic(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            assert_eq!(random_expr(&g, 4, GrowMethod::Full, &mut rng).depth(), 4);
        }
    }
}
