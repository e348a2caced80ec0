use chrono::NaiveDate;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srcomp::engine::{finite_difference_jacobian, Protected, JACOBIAN_STEP};
use srcomp::expr::{evaluate, parse, print_infix, random_expr, BinaryOp, Expr, Grammar, GrowMethod, UnaryOp};
use srcomp::realworld::{prepare, SeriesFrame};
use srcomp::scoring::{harmonic_rank, rank_criterion};
use srcomp::symbolic::simplify;

fn grammar(unary: Vec<UnaryOp>, binary: Vec<BinaryOp>) -> Grammar {
    Grammar {
        n_vars: 3,
        unary,
        binary,
        const_range: (-5.0, 5.0),
        const_prob: 0.3,
        leaf_prob: 0.3,
    }
}

fn full_grammar() -> Grammar {
    grammar(
        vec![
            UnaryOp::Sin,
            UnaryOp::Cos,
            UnaryOp::Exp,
            UnaryOp::Log,
            UnaryOp::Sqrt,
            UnaryOp::Tanh,
            UnaryOp::Abs,
            UnaryOp::Neg,
            UnaryOp::Erf,
        ],
        vec![
            BinaryOp::Add,
            BinaryOp::Sub,
            BinaryOp::Mul,
            BinaryOp::Div,
            BinaryOp::Pow,
        ],
    )
}

fn smooth_grammar() -> Grammar {
    grammar(
        vec![UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Tanh, UnaryOp::Erf],
        vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul],
    )
}

fn expr_from(g: &Grammar, seed: u64, depth: usize) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let method = if seed % 2 == 0 {
        GrowMethod::Grow
    } else {
        GrowMethod::Full
    };
    random_expr(g, depth, method, &mut rng)
}

fn probe_rows() -> Vec<Vec<f64>> {
    (0..40)
        .map(|i| {
            let t = i as f64;
            vec![(t * 0.37).sin() * 2.5, (t * 0.71).cos() * 1.5 + 0.2, t / 13.0 - 1.4]
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), depth in 1usize..6) {
        let e = expr_from(&full_grammar(), seed, depth);
        let text = print_infix(&e);
        let back = parse(&text).unwrap();
        prop_assert_eq!(print_infix(&back), text.clone());
        for row in probe_rows() {
            match (evaluate(&e, &row), evaluate(&back, &row)) {
                (Ok(a), Ok(b)) => prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} at {:?}", text, row),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "domains differ for {}", text),
            }
        }
    }

    #[test]
    fn simplify_preserves_values_and_never_grows(seed in any::<u64>(), depth in 1usize..6) {
        let e = expr_from(&full_grammar(), seed, depth);
        let s = simplify(&e);
        prop_assert!(s.node_count() <= e.node_count(), "{} -> {}", print_infix(&e), print_infix(&s));
        for row in probe_rows() {
            let Ok(a) = evaluate(&e, &row) else { continue };
            if !a.is_finite() || a.abs() > 1e8 {
                continue;
            }
            let b = evaluate(&s, &row);
            prop_assert!(
                b.as_ref().is_ok_and(|b| close(a, *b, 1e-6)),
                "{} -> {} at {:?}: {} vs {:?}", print_infix(&e), print_infix(&s), row, a, b
            );
        }
    }

    #[test]
    fn rank_is_invariant_to_increasing_affine_maps(
        values in prop::collection::vec(-50i32..50, 2..12),
        scale in 0.5f64..20.0,
        shift in -100.0f64..100.0,
        higher in any::<bool>(),
    ) {
        let raw: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let mapped: Vec<f64> = raw.iter().map(|v| scale * v + shift).collect();
        prop_assert_eq!(rank_criterion(&raw, higher), rank_criterion(&mapped, higher));
        let ranks = rank_criterion(&raw, higher);
        let k = raw.len() as f64;
        prop_assert!(close(ranks.iter().sum::<f64>(), k * (k + 1.0) / 2.0, 1e-12));
    }

    #[test]
    fn harmonic_rank_is_bounded_and_monotone(
        ranks in prop::collection::vec(1.0f64..20.0, 1..6),
        bump in prop::collection::vec(0.0f64..5.0, 6),
    ) {
        let h = harmonic_rank(&ranks).unwrap();
        let min = ranks.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = ranks.iter().sum::<f64>() / ranks.len() as f64;
        prop_assert!(h >= min * (1.0 - 1e-12) && h <= mean * (1.0 + 1e-12));
        let better: Vec<f64> = ranks.iter().zip(&bump).map(|(r, b)| r + b).collect();
        prop_assert!(harmonic_rank(&better).unwrap() >= h * (1.0 - 1e-12));
    }

    #[test]
    fn jacobian_is_stable_under_doubled_step(seed in any::<u64>(), depth in 2usize..5) {
        let e = expr_from(&smooth_grammar(), seed, depth);
        prop_assume!(e.constant_count() > 0);
        let rows = probe_rows();
        let columns: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let sem = Protected::default();
        let j1 = finite_difference_jacobian(&e, &columns, rows.len(), JACOBIAN_STEP, &sem).unwrap();
        let j2 = finite_difference_jacobian(&e, &columns, rows.len(), 2.0 * JACOBIAN_STEP, &sem).unwrap();
        for (a, b) in j1.iter().zip(j2.iter()) {
            prop_assert!(close(*a, *b, 1e-4), "{}: {} vs {}", print_infix(&e), a, b);
        }
    }

    #[test]
    fn realworld_features_never_see_the_label_day(
        base in prop::collection::vec(0.0f64..500.0, 30..70),
        cut_frac in 0.1f64..0.9,
        replacement in 0.0f64..1e4,
    ) {
        let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
        let n = base.len();
        let cut = ((n as f64) * cut_frac) as usize;
        let frame = SeriesFrame::from_fn(start, n, |_, t| base[t]).unwrap();
        let moved = SeriesFrame::from_fn(start, n, |_, t| if t >= cut { replacement + t as f64 } else { base[t] }).unwrap();
        let a = prepare(&frame, 0.25).unwrap();
        let b = prepare(&moved, 0.25).unwrap();
        for ((_, ta), (_, tb)) in a.iter().zip(&b) {
            for r in 0..ta.len() {
                prop_assert!(ta.day[r] < (ta.label_dates[r] - start).num_days() as usize);
                if (ta.label_dates[r] - start).num_days() as usize <= cut {
                    prop_assert_eq!(&ta.rows[r], &tb.rows[r]);
                }
            }
        }
    }
}
