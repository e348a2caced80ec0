//! Algebraic simplification.
//!
//! Two passes: local rewrites with constant folding, then a canonical
//! sum-of-monomials form over opaque atoms (variables, function calls,
//! non-integer powers, and sums that were not expanded). The canonical form
//! is built twice, with and without distributing products over sums, and the
//! smallest of the candidates (including the input itself) wins, so the
//! result never has more nodes than the input.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::expr::{print_infix, BinaryOp, Expr, UnaryOp, DIV_EPSILON};

/// Largest integer exponent that is folded into monomials.
const MAX_INT_EXPONENT: f64 = 8.0;
/// Products whose expansion would exceed this many terms stay factored.
const MAX_EXPANDED_TERMS: usize = 256;

/// A rewrite applied while simplifying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub rule: &'static str,
    /// The rewrite can enlarge the domain of definition (e.g. `x/x -> 1`).
    pub domain_changing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simplified {
    pub expr: Expr,
    /// Rewrites applied while exploring candidate forms.
    pub rewrites: Vec<Rewrite>,
}

impl Simplified {
    pub fn changed_domain(&self) -> bool {
        self.rewrites.iter().any(|r| r.domain_changing)
    }
}

/// Simplified copy of `expr`; never larger than the input.
pub fn simplify(expr: &Expr) -> Expr {
    simplify_logged(expr).expr
}

/// [`simplify`] plus the log of applied rewrites.
pub fn simplify_logged(expr: &Expr) -> Simplified {
    let mut cx = Context::default();
    let out = cx.simplify(expr);
    let mut rewrites = cx.rewrites;
    rewrites.dedup();
    Simplified { expr: out, rewrites }
}

/// Node count after simplification.
pub fn simplified_node_count(expr: &Expr) -> usize {
    simplify(expr).node_count()
}

fn has_partial(e: &Expr) -> bool {
    let mut partial = false;
    e.visit(&mut |n| match n {
        Expr::Unary(op, _) if op.is_partial() => partial = true,
        Expr::Binary(BinaryOp::Div | BinaryOp::Pow, ..) => partial = true,
        _ => {}
    });
    partial
}

#[derive(Default)]
struct Context {
    cache: HashMap<String, Expr>,
    rewrites: Vec<Rewrite>,
}

impl Context {
    fn note(&mut self, rule: &'static str, domain_changing: bool) {
        let r = Rewrite { rule, domain_changing };
        if !self.rewrites.contains(&r) {
            self.rewrites.push(r);
        }
    }

    fn simplify(&mut self, e: &Expr) -> Expr {
        if e.is_leaf() {
            return e.clone();
        }
        let key = print_infix(e);
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let basic = self.local(e);
        let mut best = if basic.node_count() <= e.node_count() {
            basic.clone()
        } else {
            e.clone()
        };
        for expand in [false, true] {
            let poly = self.to_poly(&basic, expand);
            let candidate = self.from_poly(&poly);
            let finite = candidate.constants().iter().all(|c| c.is_finite());
            if finite && candidate.node_count() <= best.node_count() {
                best = candidate;
            }
        }
        self.cache.insert(key, best.clone());
        best
    }

    // ---- local rewrites -------------------------------------------------

    fn local(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Const(_) | Expr::Var(_) => e.clone(),
            Expr::Unary(op, c) => {
                let c = self.local(c);
                self.local_unary(*op, c)
            }
            Expr::Binary(op, l, r) => {
                let l = self.local(l);
                let r = self.local(r);
                self.local_binary(*op, l, r)
            }
        }
    }

    fn local_unary(&mut self, op: UnaryOp, c: Expr) -> Expr {
        if let Expr::Const(v) = c {
            if let Some(folded) = Expr::try_constant(crate::expr::eval_unary_raw(op, v)) {
                self.note("constant-fold", false);
                return folded;
            }
        }
        match (op, c) {
            (UnaryOp::Neg, Expr::Unary(UnaryOp::Neg, inner)) => {
                self.note("double-negation", false);
                *inner
            }
            (UnaryOp::Abs, Expr::Unary(UnaryOp::Abs | UnaryOp::Neg, inner)) => {
                self.note("abs-idempotent", false);
                Expr::unary(UnaryOp::Abs, *inner)
            }
            (op, c) => Expr::unary(op, c),
        }
    }

    fn local_binary(&mut self, op: BinaryOp, l: Expr, r: Expr) -> Expr {
        use BinaryOp::*;
        if let (Expr::Const(a), Expr::Const(b)) = (&l, &r) {
            if let Some(folded) = Expr::try_constant(crate::expr::eval_binary_raw(op, *a, *b)) {
                self.note("constant-fold", false);
                return folded;
            }
        }
        let lc = l.as_const();
        let rc = r.as_const();
        match op {
            Add => {
                if rc == Some(0.0) {
                    self.note("add-zero", false);
                    return l;
                }
                if lc == Some(0.0) {
                    self.note("add-zero", false);
                    return r;
                }
                if let Expr::Unary(UnaryOp::Neg, inner) = r {
                    self.note("add-negation", false);
                    return Expr::binary(Sub, l, *inner);
                }
                Expr::binary(Add, l, r)
            }
            Sub => {
                if rc == Some(0.0) {
                    self.note("sub-zero", false);
                    return l;
                }
                if lc == Some(0.0) {
                    self.note("zero-minus", false);
                    return Expr::unary(UnaryOp::Neg, r);
                }
                if l == r {
                    self.note("self-cancel", has_partial(&l));
                    return Expr::Const(0.0);
                }
                if let Expr::Unary(UnaryOp::Neg, inner) = r {
                    self.note("sub-negation", false);
                    return Expr::binary(Add, l, *inner);
                }
                Expr::binary(Sub, l, r)
            }
            Mul => {
                if rc == Some(1.0) {
                    self.note("mul-one", false);
                    return l;
                }
                if lc == Some(1.0) {
                    self.note("mul-one", false);
                    return r;
                }
                if rc == Some(0.0) || lc == Some(0.0) {
                    let dropped = if rc == Some(0.0) { &l } else { &r };
                    self.note("mul-zero", has_partial(dropped));
                    return Expr::Const(0.0);
                }
                if rc == Some(-1.0) {
                    self.note("mul-minus-one", false);
                    return Expr::unary(UnaryOp::Neg, l);
                }
                if lc == Some(-1.0) {
                    self.note("mul-minus-one", false);
                    return Expr::unary(UnaryOp::Neg, r);
                }
                Expr::binary(Mul, l, r)
            }
            Div => {
                if rc == Some(1.0) {
                    self.note("div-one", false);
                    return l;
                }
                if rc == Some(-1.0) {
                    self.note("div-minus-one", false);
                    return Expr::unary(UnaryOp::Neg, l);
                }
                if lc == Some(0.0) && rc.is_none() {
                    self.note("zero-div", true);
                    return Expr::Const(0.0);
                }
                if l == r {
                    self.note("self-div", true);
                    return Expr::Const(1.0);
                }
                Expr::binary(Div, l, r)
            }
            Pow => {
                if rc == Some(1.0) {
                    self.note("pow-one", false);
                    return l;
                }
                if rc == Some(0.0) {
                    self.note("pow-zero", has_partial(&l));
                    return Expr::Const(1.0);
                }
                if lc == Some(1.0) {
                    self.note("one-pow", has_partial(&r));
                    return Expr::Const(1.0);
                }
                Expr::binary(Pow, l, r)
            }
        }
    }

    // ---- canonical polynomial form --------------------------------------

    fn to_poly(&mut self, e: &Expr, expand: bool) -> Poly {
        match e {
            Expr::Const(c) => Poly::constant(*c),
            Expr::Var(_) => Poly::atom(e.clone(), 1),
            Expr::Unary(UnaryOp::Neg, c) => self.to_poly(c, expand).scale(-1.0),
            Expr::Unary(op, c) => {
                let inner = self.simplify(c);
                Poly::atom(Expr::unary(*op, inner), 1)
            }
            Expr::Binary(BinaryOp::Add, l, r) => {
                let a = self.to_poly(l, expand);
                let b = self.to_poly(r, expand);
                self.add(a, b)
            }
            Expr::Binary(BinaryOp::Sub, l, r) => {
                let a = self.to_poly(l, expand);
                let b = self.to_poly(r, expand).scale(-1.0);
                self.add(a, b)
            }
            Expr::Binary(BinaryOp::Mul, l, r) => {
                let a = self.to_poly(l, expand);
                let b = self.to_poly(r, expand);
                self.mul(a, b, expand)
            }
            Expr::Binary(BinaryOp::Div, l, r) => {
                let a = self.to_poly(l, expand);
                let b = self.to_poly(r, expand);
                match self.reciprocal(&b) {
                    Some(inv) => self.mul(a, inv, expand),
                    None => {
                        let num = self.from_poly(&a);
                        let den = self.from_poly(&b);
                        Poly::atom(Expr::binary(BinaryOp::Div, num, den), 1)
                    }
                }
            }
            Expr::Binary(BinaryOp::Pow, base, exponent) => {
                if let Some(n) = exponent
                    .as_const()
                    .filter(|n| n.fract() == 0.0 && n.abs() <= MAX_INT_EXPONENT && *n != 0.0)
                {
                    let b = self.to_poly(base, expand);
                    if let Some(p) = self.int_pow(&b, n as i32, expand) {
                        return p;
                    }
                }
                let base = self.simplify(base);
                let exponent = self.simplify(exponent);
                Poly::atom(Expr::binary(BinaryOp::Pow, base, exponent), 1)
            }
        }
    }

    fn add(&mut self, mut a: Poly, b: Poly) -> Poly {
        a.terms.extend(b.terms);
        self.collect(a)
    }

    fn collect(&mut self, p: Poly) -> Poly {
        let mut merged: Vec<Term> = Vec::with_capacity(p.terms.len());
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cancelled = false;
        for t in p.terms {
            let key = t.key();
            match index.get(&key) {
                Some(&i) => {
                    merged[i].coef += t.coef;
                }
                None => {
                    index.insert(key, merged.len());
                    merged.push(t);
                }
            }
        }
        merged.retain(|t| {
            if t.coef == 0.0 && !t.factors.is_empty() {
                cancelled |= t.factors.iter().any(|(_, a, _)| has_partial(a));
            }
            t.coef != 0.0
        });
        if cancelled {
            self.note("term-cancel", true);
        }
        Poly { terms: merged }
    }

    fn mul(&mut self, a: Poly, b: Poly, expand: bool) -> Poly {
        let single = a.terms.len() <= 1 && b.terms.len() <= 1;
        if single || (expand && a.terms.len() * b.terms.len() <= MAX_EXPANDED_TERMS) {
            if !single {
                self.note("expand", false);
            }
            let mut out = Vec::with_capacity(a.terms.len() * b.terms.len());
            for s in &a.terms {
                for t in &b.terms {
                    let (term, cancelled) = s.mul(t);
                    if cancelled {
                        self.note("factor-cancel", true);
                    }
                    out.push(term);
                }
            }
            return self.collect(Poly { terms: out });
        }
        // keep multi-term factors as atoms
        let a = self.as_monomial(a);
        let b = self.as_monomial(b);
        let (term, cancelled) = a.mul(&b);
        if cancelled {
            self.note("factor-cancel", true);
        }
        self.collect(Poly { terms: vec![term] })
    }

    fn as_monomial(&mut self, p: Poly) -> Term {
        if p.terms.len() == 1 {
            return p.terms.into_iter().next().unwrap();
        }
        if p.terms.is_empty() {
            return Term {
                coef: 0.0,
                factors: vec![],
            };
        }
        let atom = self.from_poly(&p);
        Term {
            coef: 1.0,
            factors: vec![(print_infix(&atom), atom, 1)],
        }
    }

    fn reciprocal(&mut self, p: &Poly) -> Option<Poly> {
        if p.terms.len() == 1 {
            let t = &p.terms[0];
            if t.coef.abs() < DIV_EPSILON {
                return None;
            }
            let coef = 1.0 / t.coef;
            if !coef.is_finite() {
                return None;
            }
            return Some(Poly {
                terms: vec![Term {
                    coef,
                    factors: t.factors.iter().map(|(k, a, n)| (k.clone(), a.clone(), -n)).collect(),
                }],
            });
        }
        if p.terms.is_empty() {
            return None;
        }
        let atom = self.from_poly(p);
        Some(Poly::atom(atom, -1))
    }

    fn int_pow(&mut self, base: &Poly, n: i32, expand: bool) -> Option<Poly> {
        if base.terms.len() == 1 {
            let t = &base.terms[0];
            let coef = t.coef.powi(n);
            if !coef.is_finite() || (n < 0 && t.coef.abs() < DIV_EPSILON) {
                return None;
            }
            return Some(Poly {
                terms: vec![Term {
                    coef,
                    factors: t
                        .factors
                        .iter()
                        .map(|(k, a, m)| (k.clone(), a.clone(), m * n))
                        .collect(),
                }],
            });
        }
        if base.terms.is_empty() {
            return None;
        }
        if expand && n > 0 && base.terms.len().pow(n as u32) <= MAX_EXPANDED_TERMS {
            let mut acc = base.clone();
            for _ in 1..n {
                acc = self.mul(acc, base.clone(), true);
            }
            return Some(acc);
        }
        let atom = self.from_poly(base);
        Some(Poly::atom(atom, n))
    }

    fn from_poly(&mut self, p: &Poly) -> Expr {
        if p.terms.is_empty() {
            return Expr::Const(0.0);
        }
        let mut terms: Vec<&Term> = p.terms.iter().collect();
        terms.sort_by(|a, b| term_order(a, b));
        // lead with a positive term when there is one
        if terms[0].coef < 0.0 {
            if let Some(pos) = terms.iter().position(|t| t.coef > 0.0) {
                let t = terms.remove(pos);
                terms.insert(0, t);
            }
        }
        let mut acc: Option<Expr> = None;
        for t in terms {
            let negative = t.coef < 0.0;
            let body = t.build(t.coef.abs());
            acc = Some(match acc {
                None if negative => {
                    if t.coef == -1.0 && !t.factors.is_empty() {
                        Expr::unary(UnaryOp::Neg, body)
                    } else {
                        t.build(t.coef)
                    }
                }
                None => body,
                Some(prev) if negative => Expr::binary(BinaryOp::Sub, prev, body),
                Some(prev) => Expr::binary(BinaryOp::Add, prev, body),
            });
        }
        acc.unwrap()
    }
}

/// Monomial: coefficient times a product of atoms raised to integer powers.
#[derive(Debug, Clone)]
struct Term {
    coef: f64,
    /// (canonical key, atom, exponent), sorted by key, no zero exponents.
    factors: Vec<(String, Expr, i32)>,
}

impl Term {
    fn key(&self) -> String {
        let mut k = String::new();
        for (key, _, n) in &self.factors {
            k.push('[');
            k.push_str(key);
            k.push_str("]^");
            k.push_str(&n.to_string());
        }
        k
    }

    fn degree(&self) -> i32 {
        self.factors.iter().map(|(_, _, n)| n.abs()).sum()
    }

    /// Product of two monomials; the flag reports exponents that cancelled
    /// across numerator and denominator.
    fn mul(&self, other: &Term) -> (Term, bool) {
        let mut factors = self.factors.clone();
        let mut cancelled = false;
        for (k, a, n) in &other.factors {
            match factors.binary_search_by(|(fk, _, _)| fk.as_str().cmp(k)) {
                Ok(i) => {
                    let m = factors[i].2;
                    if m.signum() != n.signum() {
                        cancelled = true;
                    }
                    factors[i].2 += n;
                    if factors[i].2 == 0 {
                        factors.remove(i);
                    }
                }
                Err(i) => factors.insert(i, (k.clone(), a.clone(), *n)),
            }
        }
        (
            Term {
                coef: self.coef * other.coef,
                factors,
            },
            cancelled,
        )
    }

    fn build(&self, magnitude: f64) -> Expr {
        let mut num: Option<Expr> =
            (magnitude != 1.0 || self.factors.iter().all(|f| f.2 < 0)).then(|| Expr::Const(magnitude));
        let mut den: Option<Expr> = None;
        for (_, atom, n) in &self.factors {
            let power = |m: i32| {
                if m == 1 {
                    atom.clone()
                } else {
                    Expr::binary(BinaryOp::Pow, atom.clone(), Expr::Const(m as f64))
                }
            };
            if *n > 0 {
                let f = power(*n);
                num = Some(match num {
                    None => f,
                    Some(prev) => Expr::binary(BinaryOp::Mul, prev, f),
                });
            } else {
                let f = power(-n);
                den = Some(match den {
                    None => f,
                    Some(prev) => Expr::binary(BinaryOp::Mul, prev, f),
                });
            }
        }
        let num = num.unwrap_or(Expr::Const(magnitude));
        match den {
            None => num,
            Some(d) => Expr::binary(BinaryOp::Div, num, d),
        }
    }
}

fn term_order(a: &Term, b: &Term) -> Ordering {
    // constants last, higher degree first, then canonical key
    a.factors
        .is_empty()
        .cmp(&b.factors.is_empty())
        .then_with(|| b.degree().cmp(&a.degree()))
        .then_with(|| a.key().cmp(&b.key()))
}

#[derive(Debug, Clone)]
struct Poly {
    terms: Vec<Term>,
}

impl Poly {
    fn constant(c: f64) -> Poly {
        if c == 0.0 {
            return Poly { terms: vec![] };
        }
        Poly {
            terms: vec![Term {
                coef: c,
                factors: vec![],
            }],
        }
    }

    fn atom(e: Expr, n: i32) -> Poly {
        Poly {
            terms: vec![Term {
                coef: 1.0,
                factors: vec![(print_infix(&e), e, n)],
            }],
        }
    }

    fn scale(mut self, s: f64) -> Poly {
        for t in &mut self.terms {
            t.coef *= s;
        }
        self
    }
}
