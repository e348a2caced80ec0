//! Generational tree GP with constant tuning and a Pareto archive.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{optimize_constants_with, sse};
use super::pareto::{FrontMember, ParetoFront};
use super::semantics::{materialize, DivisionPolicy, Protected};
use super::EngineError;
use crate::datagen::Dataset;
use crate::expr::{evaluate_columns, random_expr, BinaryOp, Expr, Grammar, GrowMethod, Raw, UnaryOp};

/// Search stops once `SSE <= EXACT_FIT * SST`.
pub const EXACT_FIT: f64 = 1e-16;
/// LM iterations spent on each archived model after the search.
const POLISH_ITERATIONS: usize = 50;
/// Share of the budget held back for the final polish.
const POLISH_SHARE: f64 = 0.1;
/// Relative SSE drop that resets the restart counter.
const STALL_TOLERANCE: f64 = 1e-4;
/// Chance that crossover and mutation pick an inner node when one exists.
const INNER_NODE_BIAS: f64 = 0.9;
const MUTATION_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstantTuning {
    None,
    /// Levenberg-Marquardt every `every` generations on the best `fraction`
    /// of the population.
    Lm {
        every: usize,
        fraction: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Sse,
    /// SSE first; near-equal SSEs are decided by node count.
    SseSizeTiebreak,
    /// NSGA-II on (SSE, node count).
    BiObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub max_depth: usize,
    pub max_nodes: usize,
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    pub division: DivisionPolicy,
    pub tuning: ConstantTuning,
    pub objective: Objective,
    pub const_range: (f64, f64),
    /// Depth range of the ramped half-and-half initialisation.
    pub init_depth: (usize, usize),
    /// Score every tree after the least-squares fit `a + b * f`.
    pub linear_scaling: bool,
    /// Reinitialise the population after this many generations without a
    /// better best SSE; 0 never restarts. The archive is kept.
    pub restart_after: usize,
    pub seed: u64,
    /// Fitness-evaluation threads; 1 runs on the caller's thread, 0 uses all
    /// cores. Results do not depend on this value.
    pub workers: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population: 512,
            generations: 10_000,
            tournament: 5,
            p_crossover: 0.9,
            p_mutation: 0.2,
            max_depth: 10,
            max_nodes: 50,
            unary: vec![
                UnaryOp::Sin,
                UnaryOp::Cos,
                UnaryOp::Exp,
                UnaryOp::Log,
                UnaryOp::Sqrt,
                UnaryOp::Tanh,
                UnaryOp::Erf,
            ],
            binary: vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div],
            division: DivisionPolicy::AnalyticQuotient,
            tuning: ConstantTuning::None,
            objective: Objective::SseSizeTiebreak,
            const_range: (-5.0, 5.0),
            init_depth: (2, 6),
            linear_scaling: true,
            restart_after: 150,
            seed: 0,
            workers: 1,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.p_crossover) || !(0.0..=1.0).contains(&self.p_mutation) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.population < 2 || self.generations == 0 || self.max_depth == 0 || self.max_nodes == 0 {
            return bad("population, generations and size limits must be positive");
        }
        if self.tournament < 2 {
            return bad("tournament size must be at least 2");
        }
        if self.binary.is_empty() && self.unary.is_empty() {
            return bad("primitive set is empty");
        }
        if self.init_depth.0 == 0 || self.init_depth.0 > self.init_depth.1 || self.init_depth.1 > self.max_depth {
            return bad("initial depth range must lie within 1..=max_depth");
        }
        if !(self.const_range.0 < self.const_range.1) {
            return bad("constant range is empty");
        }
        if let ConstantTuning::Lm { every, fraction, .. } = self.tuning {
            if every == 0 || !(0.0..=1.0).contains(&fraction) {
                return bad("LM schedule needs every >= 1 and fraction in [0, 1]");
            }
        }
        Ok(())
    }

    fn grammar(&self, n_vars: usize) -> Grammar {
        Grammar {
            n_vars,
            unary: self.unary.clone(),
            binary: self.binary.clone(),
            const_range: self.const_range,
            const_prob: 0.3,
            leaf_prob: 0.3,
        }
    }

    fn fits(&self, e: &Expr) -> bool {
        e.node_count() <= self.max_nodes && e.depth() <= self.max_depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    GenerationCap,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpOutcome {
    /// Archive after materialisation, scored under exact semantics.
    pub front: ParetoFront,
    /// Archive in search form, scored under the search semantics.
    pub search_front: ParetoFront,
    /// Best training SSE at the end of each generation.
    pub best_sse_history: Vec<f64>,
    pub generations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
struct Individual {
    expr: Expr,
    sse: f64,
    nodes: usize,
    /// Intercept and slope applied to `expr`; `(0, 1)` without scaling.
    scale: (f64, f64),
}

impl Individual {
    /// `a + b * expr`, dropping a zero intercept and a unit slope.
    fn scaled_expr(&self) -> Expr {
        let (a, b) = self.scale;
        if b == 0.0 {
            return Expr::Const(a);
        }
        let body = if b == 1.0 {
            self.expr.clone()
        } else {
            Expr::binary(BinaryOp::Mul, Expr::Const(b), self.expr.clone())
        };
        if a == 0.0 {
            body
        } else {
            Expr::binary(BinaryOp::Add, Expr::Const(a), body)
        }
    }

    fn member(&self) -> FrontMember {
        let expr = self.scaled_expr();
        FrontMember {
            nodes: expr.node_count(),
            expr,
            train_sse: self.sse,
        }
    }
}

/// Least-squares `(a, b)` for `y ~ a + b * f` and the resulting SSE.
fn linear_scale(f: &[f64], y: &[f64]) -> ((f64, f64), f64) {
    let n = y.len() as f64;
    if f.iter().any(|v| !v.is_finite()) {
        return ((0.0, 1.0), f64::INFINITY);
    }
    let fm = f.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sff, mut sfy) = (0.0, 0.0);
    for (fi, yi) in f.iter().zip(y) {
        sff += (fi - fm) * (fi - fm);
        sfy += (fi - fm) * (yi - ym);
    }
    let b = if sff > 0.0 && (sfy / sff).is_finite() {
        sfy / sff
    } else {
        0.0
    };
    let a = ym - b * fm;
    let sse: f64 = f.iter().zip(y).map(|(fi, yi)| (yi - a - b * fi).powi(2)).sum();
    if sse.is_finite() && a.is_finite() {
        ((a, b), sse)
    } else {
        ((0.0, 1.0), f64::INFINITY)
    }
}

fn by_sse_then_size(a: &Individual, b: &Individual) -> Ordering {
    a.sse.total_cmp(&b.sse).then(a.nodes.cmp(&b.nodes))
}

fn near(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

struct Search<'a> {
    cfg: &'a GpConfig,
    grammar: Grammar,
    columns: Vec<Vec<f64>>,
    target: &'a [f64],
    sem: Protected,
    pool: Option<rayon::ThreadPool>,
    evaluations: usize,
}

impl Search<'_> {
    fn score(&mut self, exprs: Vec<Expr>) -> Vec<Individual> {
        self.evaluations += exprs.len();
        let (cols, y, sem, scaling) = (&self.columns, self.target, &self.sem, self.cfg.linear_scaling);
        let one = |e: Expr| score_one(e, cols, y, sem, scaling);
        match &self.pool {
            Some(pool) => pool.install(|| exprs.into_par_iter().map(one).collect()),
            None => exprs.into_iter().map(one).collect(),
        }
    }

    fn tune(&mut self, targets: Vec<Individual>, iterations: usize) -> Vec<Individual> {
        let (cols, y, sem) = (&self.columns, self.target, &self.sem);
        self.evaluations += targets.len();
        let scaling = self.cfg.linear_scaling;
        let one = |ind: Individual| {
            if ind.expr.constant_count() == 0 || !ind.sse.is_finite() {
                return ind;
            }
            if !scaling {
                let r = optimize_constants_with(&ind.expr, cols, y, iterations, sem);
                return if r.sse < ind.sse {
                    Individual {
                        nodes: r.expr.node_count(),
                        expr: r.expr,
                        sse: r.sse,
                        scale: (0.0, 1.0),
                    }
                } else {
                    ind
                };
            }
            let (a, b) = ind.scale;
            let wrapped = Expr::binary(
                BinaryOp::Add,
                Expr::Const(a),
                Expr::binary(BinaryOp::Mul, Expr::Const(b), ind.expr.clone()),
            );
            let r = optimize_constants_with(&wrapped, cols, y, iterations, sem);
            let inner = match r.expr {
                Expr::Binary(BinaryOp::Add, _, rest) => match *rest {
                    Expr::Binary(BinaryOp::Mul, _, f) => *f,
                    _ => return ind,
                },
                _ => return ind,
            };
            let tuned = score_one(inner, cols, y, sem, true);
            if tuned.sse < ind.sse {
                tuned
            } else {
                ind
            }
        };
        match &self.pool {
            Some(pool) => pool.install(|| targets.into_par_iter().map(one).collect()),
            None => targets.into_iter().map(one).collect(),
        }
    }

    fn pick_node(&self, e: &Expr, rng: &mut ChaCha8Rng) -> usize {
        let n = e.node_count();
        if n > 1 && rng.random::<f64>() < INNER_NODE_BIAS {
            let inner: Vec<usize> = (0..n).filter(|&i| !e.subtree(i).is_some_and(Expr::is_leaf)).collect();
            if let Some(&i) = inner.choose(rng) {
                return i;
            }
        }
        rng.random_range(0..n)
    }

    fn crossover(&self, a: &Expr, b: &Expr, rng: &mut ChaCha8Rng) -> Expr {
        let i = self.pick_node(a, rng);
        let j = self.pick_node(b, rng);
        a.replace_subtree(i, b.subtree(j).expect("index within tree"))
    }

    fn subtree_mutation(&self, e: &Expr, rng: &mut ChaCha8Rng) -> Expr {
        let i = rng.random_range(0..e.node_count());
        let depth = rng.random_range(1..=MUTATION_MAX_DEPTH);
        let fresh = random_expr(&self.grammar, depth, GrowMethod::Grow, rng);
        e.replace_subtree(i, &fresh)
    }

    fn point_mutation(&self, e: &Expr, rng: &mut ChaCha8Rng) -> Expr {
        let i = rng.random_range(0..e.node_count());
        let node = e.subtree(i).expect("index within tree");
        let changed = match node {
            Expr::Const(c) => {
                let jitter = Normal::new(0.0, 0.1 * (1.0 + c.abs())).expect("positive scale");
                Expr::try_constant(c + jitter.sample(rng)).unwrap_or(Expr::Const(*c))
            }
            Expr::Var(_) => Expr::var(rng.random_range(0..self.grammar.n_vars.max(1))),
            Expr::Unary(op, c) => {
                let op = *self.cfg.unary.choose(rng).unwrap_or(op);
                Expr::unary(op, (**c).clone())
            }
            Expr::Binary(op, l, r) => {
                let op = *self.cfg.binary.choose(rng).unwrap_or(op);
                Expr::binary(op, (**l).clone(), (**r).clone())
            }
        };
        e.replace_subtree(i, &changed)
    }
}

fn score_one(e: Expr, cols: &[Vec<f64>], y: &[f64], sem: &Protected, scaling: bool) -> Individual {
    let nodes = e.node_count();
    if !scaling {
        let s = sse(&e, cols, y, sem);
        return Individual {
            expr: e,
            sse: s,
            nodes,
            scale: (0.0, 1.0),
        };
    }
    let values = evaluate_columns(&e, cols, y.len(), sem).values;
    let (scale, s) = linear_scale(&values, y);
    Individual {
        expr: e,
        sse: s,
        nodes,
        scale,
    }
}

/// Non-dominated sorting; returns the front index of every point.
fn pareto_ranks(objs: &[(f64, usize)]) -> Vec<usize> {
    let n = objs.len();
    let dominates = |a: (f64, usize), b: (f64, usize)| a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1);
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![vec![]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(objs[i], objs[j]) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = vec![];
        for &i in &current {
            rank[i] = level;
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        level += 1;
    }
    rank
}

/// Crowding distance within each front.
fn crowding(objs: &[(f64, usize)], ranks: &[usize]) -> Vec<f64> {
    let n = objs.len();
    let mut dist = vec![0.0; n];
    let fronts = ranks.iter().max().map_or(0, |m| m + 1);
    for f in 0..fronts {
        let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == f).collect();
        for axis in 0..2 {
            let value = |i: usize| if axis == 0 { objs[i].0 } else { objs[i].1 as f64 };
            let mut sorted = members.clone();
            sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let (lo, hi) = (value(sorted[0]), value(*sorted.last().unwrap()));
            dist[sorted[0]] = f64::INFINITY;
            dist[*sorted.last().unwrap()] = f64::INFINITY;
            let span = hi - lo;
            if span > 0.0 && span.is_finite() {
                for w in sorted.windows(3) {
                    dist[w[1]] += (value(w[2]) - value(w[0])) / span;
                }
            }
        }
    }
    dist
}

fn objectives(pop: &[Individual]) -> Vec<(f64, usize)> {
    pop.iter()
        .map(|i| (if i.sse.is_nan() { f64::INFINITY } else { i.sse }, i.nodes))
        .collect()
}

/// NSGA-II environmental selection; the lowest-SSE individual always
/// survives.
fn nsga_survivors(mut merged: Vec<Individual>, size: usize) -> Vec<Individual> {
    let objs = objectives(&merged);
    let ranks = pareto_ranks(&objs);
    let crowd = crowding(&objs, &ranks);
    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by(|&a, &b| {
        ranks[a]
            .cmp(&ranks[b])
            .then(crowd[b].total_cmp(&crowd[a]))
            .then(a.cmp(&b))
    });
    let best = (0..merged.len())
        .min_by(|&a, &b| by_sse_then_size(&merged[a], &merged[b]).then(a.cmp(&b)))
        .expect("nonempty population");
    let mut keep: Vec<usize> = order.into_iter().take(size).collect();
    if !keep.contains(&best) {
        *keep.last_mut().expect("size >= 1") = best;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = merged.drain(..).map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("distinct indices"))
        .collect()
}

/// Runs the GP on the training data in `ds`.
///
/// Fitness is computed under the protected semantics chosen by
/// `cfg.division`; the returned [`GpOutcome::front`] holds materialised models
/// re-scored with exact semantics (plus the constant mean model, so it is
/// never empty). The search ends at the generation cap, when the budget is
/// spent, or once a model fits to within [`EXACT_FIT`] of the target
/// variance. For a fixed seed the outcome is identical for any worker count
/// as long as the budget is not what stops the run.
/// Ramped half-and-half over `init_depth`.
fn initial_population(cfg: &GpConfig, grammar: &Grammar, rng: &mut ChaCha8Rng) -> Vec<Expr> {
    let (dmin, dmax) = cfg.init_depth;
    let span = dmax - dmin + 1;
    (0..cfg.population)
        .map(|i| {
            let depth = dmin + i % span;
            let method = if (i / span) % 2 == 0 {
                GrowMethod::Grow
            } else {
                GrowMethod::Full
            };
            loop {
                let e = random_expr(grammar, depth, method, rng);
                if cfg.fits(&e) {
                    break e;
                }
            }
        })
        .collect()
}

pub fn fit_gp(ds: &Dataset, cfg: &GpConfig, budget_seconds: f64) -> Result<GpOutcome, EngineError> {
    cfg.validate()?;
    if !(budget_seconds > 0.0) {
        return Err(EngineError::InvalidBudget(budget_seconds));
    }
    if ds.n_rows() == 0 {
        return Err(EngineError::EmptyDataset);
    }
    let start = Instant::now();
    let deadline = Duration::try_from_secs_f64(budget_seconds).ok();
    let search_deadline = Duration::try_from_secs_f64(budget_seconds * (1.0 - POLISH_SHARE)).ok();
    let out_of_time = || deadline.is_some_and(|d| start.elapsed() >= d);
    let search_over = || search_deadline.is_some_and(|d| start.elapsed() >= d);

    let pool = match cfg.workers {
        1 => None,
        w => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?,
        ),
    };
    let mut s = Search {
        cfg,
        grammar: cfg.grammar(ds.n_features()),
        columns: ds.columns(),
        target: &ds.target,
        sem: Protected { division: cfg.division },
        pool,
        evaluations: 0,
    };
    let mean = ds.target.iter().sum::<f64>() / ds.n_rows() as f64;
    let sst: f64 = ds.target.iter().map(|y| (y - mean).powi(2)).sum();
    let converged = |v: f64| v <= EXACT_FIT * sst.max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop = s.score(initial_population(cfg, &s.grammar, &mut rng));

    let mut archive = ParetoFront::new();
    let mut history = Vec::new();
    let mut generation = 0;
    let mut record = f64::INFINITY;
    let mut stalled = 0;
    let stop = loop {
        if let ConstantTuning::Lm {
            every,
            fraction,
            iterations,
        } = cfg.tuning
        {
            if generation % every == 0 && !search_over() {
                let mut order: Vec<usize> = (0..pop.len()).collect();
                order.sort_by(|&a, &b| by_sse_then_size(&pop[a], &pop[b]).then(a.cmp(&b)));
                let count = ((fraction * pop.len() as f64).ceil() as usize).min(pop.len());
                let chosen: Vec<usize> = order.into_iter().take(count).collect();
                let tuned = s.tune(chosen.iter().map(|&i| pop[i].clone()).collect(), iterations);
                for (i, ind) in chosen.into_iter().zip(tuned) {
                    pop[i] = ind;
                }
            }
        }
        for ind in &pop {
            archive.insert(ind.member());
        }
        let best = pop
            .iter()
            .min_by(|a, b| by_sse_then_size(a, b))
            .expect("nonempty population")
            .clone();
        history.push(best.sse);
        generation += 1;
        if converged(best.sse) {
            break StopReason::Converged;
        }
        if generation >= cfg.generations {
            break StopReason::GenerationCap;
        }
        if search_over() {
            break StopReason::Budget;
        }
        if best.sse < record * (1.0 - STALL_TOLERANCE) {
            record = best.sse;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if cfg.restart_after > 0 && stalled >= cfg.restart_after {
            let m = best.member();
            if m.expr.constant_count() > 0 {
                let r = optimize_constants_with(&m.expr, &s.columns, s.target, POLISH_ITERATIONS, &s.sem);
                s.evaluations += 1;
                let done = converged(r.sse);
                archive.insert(FrontMember::new(r.expr, r.sse));
                if done {
                    break StopReason::Converged;
                }
            }
            pop = s.score(initial_population(cfg, &s.grammar, &mut rng));
            record = f64::INFINITY;
            stalled = 0;
            continue;
        }

        let (ranks, crowd) = if cfg.objective == Objective::BiObjective {
            let objs = objectives(&pop);
            let r = pareto_ranks(&objs);
            let c = crowding(&objs, &r);
            (r, c)
        } else {
            (vec![], vec![])
        };
        let better = |a: usize, b: usize| -> bool {
            let (x, y) = (&pop[a], &pop[b]);
            match cfg.objective {
                Objective::Sse => x.sse < y.sse || (y.sse.is_nan() && !x.sse.is_nan()),
                Objective::SseSizeTiebreak => {
                    if near(x.sse, y.sse) {
                        x.nodes < y.nodes
                    } else {
                        x.sse.total_cmp(&y.sse) == Ordering::Less
                    }
                }
                Objective::BiObjective => (ranks[a], -crowd[a]) < (ranks[b], -crowd[b]),
            }
        };
        let tournament = |rng: &mut ChaCha8Rng| {
            let mut winner = rng.random_range(0..pop.len());
            for _ in 1..cfg.tournament {
                let c = rng.random_range(0..pop.len());
                if better(c, winner) {
                    winner = c;
                }
            }
            winner
        };

        let mut kept = vec![best];
        let mut fresh = Vec::with_capacity(cfg.population);
        while kept.len() + fresh.len() < cfg.population {
            let p1 = tournament(&mut rng);
            let mut child = None;
            if rng.random::<f64>() < cfg.p_crossover {
                let p2 = tournament(&mut rng);
                child = Some(s.crossover(&pop[p1].expr, &pop[p2].expr, &mut rng));
            }
            if rng.random::<f64>() < cfg.p_mutation {
                let base = child.as_ref().unwrap_or(&pop[p1].expr);
                child = Some(if rng.random::<bool>() {
                    s.subtree_mutation(base, &mut rng)
                } else {
                    s.point_mutation(base, &mut rng)
                });
            }
            match child.filter(|c| cfg.fits(c)) {
                Some(c) => fresh.push(c),
                None => kept.push(pop[p1].clone()),
            }
        }
        let mut offspring = kept;
        offspring.extend(s.score(fresh));
        pop = if cfg.objective == Objective::BiObjective {
            let mut merged = pop;
            merged.extend(offspring);
            nsga_survivors(merged, cfg.population)
        } else {
            offspring
        };
    };

    let mut polished = Vec::new();
    let mut by_accuracy: Vec<&FrontMember> = archive.members().iter().collect();
    by_accuracy.sort_by(|a, b| a.train_sse.total_cmp(&b.train_sse).then(a.nodes.cmp(&b.nodes)));
    for m in by_accuracy {
        if out_of_time() {
            break;
        }
        if m.expr.constant_count() > 0 {
            let r = optimize_constants_with(&m.expr, &s.columns, s.target, POLISH_ITERATIONS, &s.sem);
            if r.sse < m.train_sse {
                polished.push(FrontMember::new(r.expr, r.sse));
            }
        }
    }
    s.evaluations += polished.len();
    for m in polished {
        archive.insert(m);
    }

    let mut front = ParetoFront::new();
    front.insert(FrontMember::new(Expr::constant(mean), sst));
    for m in archive.members() {
        let e = materialize(&m.expr, cfg.division);
        let raw_sse = sse(&e, &s.columns, s.target, &Raw);
        front.insert(FrontMember::new(e, raw_sse));
    }

    Ok(GpOutcome {
        front,
        search_front: archive,
        best_sse_history: history,
        generations: generation,
        evaluations: s.evaluations,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 10.0 - 3.0]).collect();
        let y = rows.iter().map(|r| r[0]).collect();
        Dataset::new("id", rows, y)
    }

    fn small_cfg(seed: u64) -> GpConfig {
        GpConfig {
            population: 60,
            generations: 15,
            seed,
            ..GpConfig::default()
        }
    }

    #[test]
    fn validation() {
        let mut c = GpConfig::default();
        assert!(c.validate().is_ok());
        c.tournament = 1;
        assert!(c.validate().is_err());
        c = GpConfig {
            p_mutation: 1.5,
            ..GpConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(matches!(
            fit_gp(&line_data(), &GpConfig::default(), 0.0),
            Err(EngineError::InvalidBudget(_))
        ));
    }

    #[test]
    fn identity_target_converges() {
        let out = fit_gp(&line_data(), &small_cfg(1), 30.0).unwrap();
        assert_eq!(out.stop, StopReason::Converged);
        assert!(out.front.most_accurate().unwrap().train_sse < 1e-12);
    }

    #[test]
    fn elitism_keeps_best_sse_monotone() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0 - 2.5, (i % 7) as f64]).collect();
        let y = rows.iter().map(|r| (r[0] * 1.7).sin() * r[1] + 0.3).collect();
        let ds = Dataset::new("s", rows, y);
        let out = fit_gp(&ds, &small_cfg(4), 30.0).unwrap();
        assert!(out.best_sse_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.front.is_valid());
        assert!(out.search_front.is_valid());
    }

    #[test]
    fn same_seed_same_front_for_any_worker_count() {
        let ds = line_data();
        let mut cfg = small_cfg(9);
        cfg.generations = 4;
        let a = fit_gp(&ds, &cfg, 60.0).unwrap();
        cfg.workers = 3;
        let b = fit_gp(&ds, &cfg, 60.0).unwrap();
        assert_eq!(a.front, b.front);
        assert_eq!(a.best_sse_history, b.best_sse_history);
    }

    #[test]
    fn bi_objective_runs() {
        let ds = line_data();
        let cfg = GpConfig {
            objective: Objective::BiObjective,
            ..small_cfg(2)
        };
        let out = fit_gp(&ds, &cfg, 30.0).unwrap();
        assert!(out.best_sse_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.front.is_valid());
    }

    #[test]
    fn ranks_and_crowding() {
        let objs = [(1.0, 5), (2.0, 3), (3.0, 1), (2.0, 6), (4.0, 4)];
        assert_eq!(pareto_ranks(&objs), vec![0, 0, 0, 1, 1]);
        let c = crowding(&objs, &pareto_ranks(&objs));
        assert!(c[0].is_infinite() && c[2].is_infinite());
        assert!(c[1].is_finite() && c[1] > 0.0);
    }
}
