//! Property-based invariants for the expression language and the jet
//! arithmetic.

use std::sync::Arc;

use fmk_core::expr::{parse_expr, Expr, Func, Params};
use fmk_core::field::{lie_bracket, VectorField};
use proptest::prelude::*;

const DIM: usize = 3;

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000u32, 0u32..100u32).prop_map(|(a, b)| Expr::Num(a as f64 + b as f64 / 100.0)),
        (0..DIM).prop_map(Expr::Coord),
        Just(Expr::Param("k".into())),
    ];
    leaf.prop_recursive(5, 64, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Pow(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (
                prop_oneof![
                    Just(Func::Log),
                    Just(Func::Exp),
                    Just(Func::Sqrt),
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Tanh)
                ],
                inner
            )
                .prop_map(|(f, a)| Expr::Fun(f, Box::new(a))),
        ]
    })
}

/// Polynomial with positive-definite shape so that log/sqrt stay in domain.
fn arb_safe_poly() -> impl Strategy<Value = Expr> {
    (proptest::collection::vec(-100i32..100i32, 4)).prop_map(|cs| {
        // c0/50 + 2 + (c1 u1 + c2 u2 + c3 u3)/100
        let mut e = Expr::add(Expr::Num(cs[0] as f64 / 50.0 + 4.0), Expr::Num(0.0));
        for (i, c) in cs.iter().skip(1).enumerate() {
            e = Expr::add(
                e,
                Expr::mul(Expr::Num(*c as f64 / 100.0), Expr::Coord(i)),
            );
        }
        e
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Printing then re-parsing returns a structurally identical tree.
    #[test]
    fn print_parse_roundtrip(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = parse_expr(&printed, DIM, &["k"]).unwrap();
        prop_assert_eq!(e, reparsed);
    }

    /// Symbolic differentiation and Taylor-jet evaluation are two
    /// independent derivative routes; they must agree.
    #[test]
    fn symbolic_and_jet_derivatives_agree(
        e in arb_safe_poly(),
        x in 0.2f64..1.8,
        y in 0.2f64..1.8,
        z in 0.2f64..1.8,
        var in 0..DIM,
    ) {
        let params = Params::<f64>::new();
        let p = [x, y, z];
        let composed = Expr::fun(Func::Log, Expr::mul(e.clone(), e.clone()));
        let jet = composed.eval_jet(&p, 3, &params).unwrap();
        let sym = composed.diff(var);
        let jet_of_diff = sym.eval_jet(&p, 2, &params).unwrap();
        let extracted = jet.deriv(var);
        prop_assert!((jet_of_diff.value() - extracted.value()).abs() <= 1e-11 * (1.0 + extracted.value().abs()));
        for i in 0..DIM {
            prop_assert!((jet_of_diff.grad(i) - extracted.grad(i)).abs() <= 1e-10 * (1.0 + extracted.grad(i).abs()));
            for j in 0..DIM {
                prop_assert!((jet_of_diff.hess(i, j) - extracted.hess(i, j)).abs() <= 1e-9 * (1.0 + extracted.hess(i, j).abs()));
            }
        }
    }

    /// Mixed partials commute: extracting derivatives in either order gives
    /// the same jet.
    #[test]
    fn derivative_extraction_commutes(
        e in arb_safe_poly(),
        x in 0.2f64..1.8,
        y in 0.2f64..1.8,
        z in 0.2f64..1.8,
    ) {
        let params = Params::<f64>::new();
        let p = [x, y, z];
        let composed = Expr::fun(Func::Exp, Expr::fun(Func::Sin, e));
        let jet = composed.eval_jet(&p, 3, &params).unwrap();
        for i in 0..DIM {
            for j in 0..DIM {
                let a = jet.deriv(i).deriv(j);
                let b = jet.deriv(j).deriv(i);
                prop_assert!((a.value() - b.value()).abs() <= 1e-12 * (1.0 + a.value().abs()));
                for k in 0..DIM {
                    prop_assert!((a.grad(k) - b.grad(k)).abs() <= 1e-12 * (1.0 + a.grad(k).abs()));
                }
            }
        }
    }

    /// Jacobi identity for the bracket of polynomial fields.
    #[test]
    fn jacobi_identity(
        cx in proptest::collection::vec(-50i32..50i32, DIM * (DIM + 1)),
        cy in proptest::collection::vec(-50i32..50i32, DIM * (DIM + 1)),
        cz in proptest::collection::vec(-50i32..50i32, DIM * (DIM + 1)),
        x in -0.9f64..0.9,
        y in -0.9f64..0.9,
        z in -0.9f64..0.9,
    ) {
        let field = |cs: &[i32]| {
            let mut comps = Vec::with_capacity(DIM);
            for c in 0..DIM {
                let base = c * (DIM + 1);
                let mut e = Expr::Num(cs[base] as f64 / 50.0);
                for v in 0..DIM {
                    e = Expr::add(
                        e,
                        Expr::mul(Expr::Num(cs[base + 1 + v] as f64 / 50.0), Expr::Coord(v)),
                    );
                }
                comps.push(e);
            }
            VectorField::from_exprs(DIM, comps, Arc::new(Params::<f64>::new())).unwrap()
        };
        let xf = field(&cx);
        let yf = field(&cy);
        let zf = field(&cz);
        let jac = lie_bracket(&lie_bracket(&xf, &yf), &zf)
            .add(&lie_bracket(&lie_bracket(&yf, &zf), &xf))
            .add(&lie_bracket(&lie_bracket(&zf, &xf), &yf));
        let v = jac.values(&[x, y, z]).unwrap();
        for comp in v {
            prop_assert!(comp.abs() <= 1e-9, "jacobi residual {comp:.3e}");
        }
    }
}

/// The scalar-generic core also instantiates at `f32` (smoke, loose bounds).
#[test]
fn generic_scalar_f32_smoke() {
    let params = Params::<f32>::new();
    let e = parse_expr("u1^2 * log(u2) + sqrt(u2)", 2, &[]).unwrap();
    let j = e.eval_jet(&[2.0f32, 1.5], 2, &params).unwrap();
    let expect = 4.0 * 1.5f32.ln() + 1.5f32.sqrt();
    assert!((j.value() - expect).abs() < 1e-5);
    let d1 = 2.0 * 2.0 * 1.5f32.ln();
    assert!((j.grad(0) - d1).abs() < 1e-4);

    let dom = fmk_core::domain::ChartDomain::<f32>::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
    let pts = dom.sample(10, 1, &params).unwrap();
    assert_eq!(pts.len(), 10);
}

/// A corpus of one hundred generated expressions round-trips (spelled-out
/// variant of the proptest above with a fixed seed, as a plain test).
#[test]
fn roundtrip_corpus_of_100() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
    fn gen(rng: &mut impl rand::Rng, depth: usize) -> Expr {
        if depth == 0 || rng.gen_bool(0.3) {
            return match rng.gen_range(0..3) {
                0 => Expr::Num((rng.gen_range(0..10000) as f64) / 100.0),
                1 => Expr::Coord(rng.gen_range(0..3)),
                _ => Expr::Param("k".into()),
            };
        }
        let a = gen(rng, depth - 1);
        let b = gen(rng, depth - 1);
        match rng.gen_range(0..7) {
            0 => Expr::Add(Box::new(a), Box::new(b)),
            1 => Expr::Sub(Box::new(a), Box::new(b)),
            2 => Expr::Mul(Box::new(a), Box::new(b)),
            3 => Expr::Div(Box::new(a), Box::new(b)),
            4 => Expr::Pow(Box::new(a), Box::new(b)),
            5 => Expr::Neg(Box::new(a)),
            _ => Expr::Fun(Func::Tanh, Box::new(a)),
        }
    }
    for _ in 0..100 {
        let e = gen(&mut rng, 4);
        let printed = e.to_string();
        let reparsed = parse_expr(&printed, 3, &["k"]).unwrap();
        assert_eq!(e, reparsed, "round-trip failed for `{printed}`");
    }
}
