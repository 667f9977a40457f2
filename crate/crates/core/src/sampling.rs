//! Seeded random generators for fuzz corpora and verification sweeps.
//!
//! Everything here is driven by a `ChaCha8Rng` so a fixed seed reproduces the
//! exact same corpus on every platform and thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{BinOp, FieldExpr, Func, Var, VarSpace};

/// Deterministic RNG for a named sub-experiment of a master seed.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn space_vars(space: VarSpace) -> &'static [Var] {
    match space {
        VarSpace::Ambient => &[Var::X, Var::Y, Var::Z],
        VarSpace::Chart => &[Var::U, Var::V],
    }
}

/// A random expression tree. Not guaranteed to be evaluable everywhere
/// (division and `ln` may leave their domain); used for parser round-trip
/// fuzzing where both sides see the same inputs.
pub fn random_expr(rng: &mut ChaCha8Rng, space: VarSpace, depth: usize) -> FieldExpr {
    let vars = space_vars(space);
    if depth == 0 || rng.random_range(0..6) == 0 {
        return if rng.random_bool(0.5) {
            FieldExpr::Var(vars[rng.random_range(0..vars.len())])
        } else {
            FieldExpr::Const((rng.random_range(-399..400) as f64) / 100.0)
        };
    }
    match rng.random_range(0..8) {
        0 => FieldExpr::binary(
            BinOp::Add,
            random_expr(rng, space, depth - 1),
            random_expr(rng, space, depth - 1),
        ),
        1 => FieldExpr::binary(
            BinOp::Sub,
            random_expr(rng, space, depth - 1),
            random_expr(rng, space, depth - 1),
        ),
        2 => FieldExpr::binary(
            BinOp::Mul,
            random_expr(rng, space, depth - 1),
            random_expr(rng, space, depth - 1),
        ),
        3 => FieldExpr::binary(
            BinOp::Div,
            random_expr(rng, space, depth - 1),
            random_expr(rng, space, depth - 1),
        ),
        4 => FieldExpr::Neg(Box::new(random_expr(rng, space, depth - 1))),
        5 => FieldExpr::Pow(
            Box::new(random_expr(rng, space, depth - 1)),
            rng.random_range(-3..=4),
        ),
        _ => {
            let f = match rng.random_range(0..5) {
                0 => Func::Exp,
                1 => Func::Ln,
                2 => Func::Sin,
                3 => Func::Cos,
                _ => Func::Sqrt,
            };
            FieldExpr::func(f, random_expr(rng, space, depth - 1))
        }
    }
}

/// A random expression that stays in-domain and moderately sized on the unit
/// box: `ln`/`sqrt`/division only see arguments bounded away from zero.
pub fn random_safe_expr(rng: &mut ChaCha8Rng, space: VarSpace, depth: usize) -> FieldExpr {
    let vars = space_vars(space);
    if depth == 0 || rng.random_range(0..5) == 0 {
        return if rng.random_bool(0.6) {
            FieldExpr::Var(vars[rng.random_range(0..vars.len())])
        } else {
            FieldExpr::Const((rng.random_range(-150..150) as f64) / 100.0)
        };
    }
    let positive = |rng: &mut ChaCha8Rng, depth: usize, space: VarSpace| {
        // 2 + sin(e): in [1, 3]
        FieldExpr::binary(
            BinOp::Add,
            FieldExpr::Const(2.0),
            FieldExpr::func(Func::Sin, random_safe_expr(rng, space, depth)),
        )
    };
    match rng.random_range(0..9) {
        0 => FieldExpr::binary(
            BinOp::Add,
            random_safe_expr(rng, space, depth - 1),
            random_safe_expr(rng, space, depth - 1),
        ),
        1 => FieldExpr::binary(
            BinOp::Sub,
            random_safe_expr(rng, space, depth - 1),
            random_safe_expr(rng, space, depth - 1),
        ),
        2 => FieldExpr::binary(
            BinOp::Mul,
            random_safe_expr(rng, space, depth - 1),
            random_safe_expr(rng, space, depth - 1),
        ),
        3 => FieldExpr::binary(
            BinOp::Div,
            random_safe_expr(rng, space, depth - 1),
            positive(rng, depth - 1, space),
        ),
        4 => FieldExpr::func(Func::Sin, random_safe_expr(rng, space, depth - 1)),
        5 => FieldExpr::func(Func::Cos, random_safe_expr(rng, space, depth - 1)),
        6 => FieldExpr::func(Func::Ln, positive(rng, depth - 1, space)),
        7 => FieldExpr::func(Func::Sqrt, positive(rng, depth - 1, space)),
        _ => FieldExpr::Pow(Box::new(random_safe_expr(rng, space, depth - 1)), 2),
    }
}

/// A random trigonometric polynomial in the chart variables, periodic in
/// both, for smooth test fields on torus charts.
pub fn random_periodic_chart_expr(rng: &mut ChaCha8Rng, terms: usize) -> FieldExpr {
    let mut acc = FieldExpr::Const((rng.random_range(-100..100) as f64) / 100.0);
    for _ in 0..terms {
        let coeff = (rng.random_range(-100..100) as f64) / 100.0;
        let ku = rng.random_range(0..=2);
        let kv = rng.random_range(0..=2);
        let fu = if rng.random_bool(0.5) { Func::Sin } else { Func::Cos };
        let fv = if rng.random_bool(0.5) { Func::Sin } else { Func::Cos };
        let tu = FieldExpr::func(
            fu,
            FieldExpr::binary(BinOp::Mul, FieldExpr::Const(ku as f64), FieldExpr::Var(Var::U)),
        );
        let tv = FieldExpr::func(
            fv,
            FieldExpr::binary(BinOp::Mul, FieldExpr::Const(kv as f64), FieldExpr::Var(Var::V)),
        );
        let term = FieldExpr::binary(
            BinOp::Mul,
            FieldExpr::Const(coeff),
            FieldExpr::binary(BinOp::Mul, tu, tv),
        );
        acc = FieldExpr::binary(BinOp::Add, acc, term);
    }
    acc
}

/// A random smooth ambient field (low-order polynomial and trig mix), safe
/// everywhere. Used for variation speeds and tangent test fields.
pub fn random_ambient_field(rng: &mut ChaCha8Rng) -> FieldExpr {
    let var = |v: Var| FieldExpr::Var(v);
    let c = |rng: &mut ChaCha8Rng| FieldExpr::Const((rng.random_range(-100..100) as f64) / 100.0);
    let lin = |rng: &mut ChaCha8Rng| {
        FieldExpr::binary(
            BinOp::Add,
            FieldExpr::binary(
                BinOp::Add,
                FieldExpr::binary(BinOp::Mul, c(rng), var(Var::X)),
                FieldExpr::binary(BinOp::Mul, c(rng), var(Var::Y)),
            ),
            FieldExpr::binary(BinOp::Mul, c(rng), var(Var::Z)),
        )
    };
    let a = lin(rng);
    let b = lin(rng);
    let trig = if rng.random_bool(0.5) {
        FieldExpr::func(Func::Sin, b)
    } else {
        FieldExpr::func(Func::Cos, b)
    };
    FieldExpr::binary(
        BinOp::Add,
        c(rng),
        FieldExpr::binary(BinOp::Add, a, FieldExpr::binary(BinOp::Mul, c(rng), trig)),
    )
}

/// Uniform point in a box.
pub fn random_point_in_box(rng: &mut ChaCha8Rng, half_extent: f64) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(-half_extent..half_extent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_field;
    use crate::jet::{Jet, JetShape};

    #[test]
    fn rng_is_deterministic_per_label() {
        let mut a = rng_for(7, "check");
        let mut b = rng_for(7, "check");
        let mut c = rng_for(7, "other");
        let (xa, xb, xc): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn parse_print_round_trip_on_fuzz_corpus() {
        let mut rng = rng_for(2024, "roundtrip");
        let shape = JetShape::get(2, 3);
        let mut evaluated = 0usize;
        for i in 0..1000 {
            let space = if i % 2 == 0 { VarSpace::Chart } else { VarSpace::Ambient };
            let expr = random_expr(&mut rng, space, 4);
            let printed = expr.to_string();
            let reparsed = parse_field(&printed)
                .unwrap_or_else(|e| panic!("reparse failed on `{printed}`: {e}"));
            // identical evaluation on random jets (or identical failure)
            let n = space.num_vars();
            let seeds: Vec<Jet> = (0..n)
                .map(|k| Jet::variable(shape.clone(), k.min(1), rng.random_range(-1.0..1.0)))
                .collect();
            let a = expr.eval(space, &seeds);
            let b = reparsed.eval(space, &seeds);
            match (a, b) {
                (Ok(ja), Ok(jb)) => {
                    evaluated += 1;
                    for (x, y) in ja.coeffs().iter().zip(jb.coeffs().iter()) {
                        assert!(
                            (x - y).abs() <= 1e-12 * x.abs().max(1.0),
                            "mismatch on `{printed}`"
                        );
                    }
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("divergent outcomes on `{printed}`: {a:?} vs {b:?}"),
            }
        }
        assert!(evaluated > 200, "corpus too hostile: {evaluated} evaluable");
    }

    #[test]
    fn safe_exprs_evaluate_on_the_unit_box() {
        let mut rng = rng_for(55, "safe");
        for _ in 0..300 {
            let expr = random_safe_expr(&mut rng, VarSpace::Ambient, 3);
            let p = random_point_in_box(&mut rng, 1.0);
            expr.eval_f64(VarSpace::Ambient, &p)
                .unwrap_or_else(|e| panic!("safe expr `{expr}` failed at {p:?}: {e}"));
        }
    }
}
