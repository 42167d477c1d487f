use cpg_actor::grad::{finite_diff_check, record_forward, FdCheck, Primitive, Tape, Tensor, Var};
use cpg_actor::Error;
use proptest::prelude::*;

fn scalar_grad(f: impl Fn(&mut Tape, Var) -> Var, x: f64) -> (f64, f64) {
    let mut tape = Tape::new();
    let v = tape.leaf(Tensor::scalar(x));
    let y = f(&mut tape, v);
    let g = tape.backward(y, &Tensor::scalar(1.0)).unwrap();
    (tape.value(y).item(), g.wrt(v).unwrap().item())
}

#[test]
fn square_value_and_slope() {
    let (y, g) = scalar_grad(|t, x| t.square(x), 3.0);
    assert_eq!(y, 9.0);
    assert_eq!(g, 6.0);
}

#[test]
fn polar_projection() {
    let (outs, tape) = record_forward(&[Tensor::scalar(0.0), Tensor::scalar(1.0)], |t, v| {
        let c = t.cos(v[0]);
        Ok(vec![t.mul(v[1], c)?])
    })
    .unwrap();
    assert_eq!(tape.value(outs[0]).item(), 1.0);

    let mut tape = Tape::new();
    let th = tape.leaf(Tensor::scalar(std::f64::consts::FRAC_PI_2));
    let r = tape.leaf(Tensor::scalar(2.0));
    let c = tape.cos(th);
    let y = tape.mul(r, c).unwrap();
    let g = tape.backward(y, &Tensor::scalar(1.0)).unwrap();
    assert!((g.wrt(th).unwrap().item() + 2.0).abs() < 1e-15);
}

#[test]
fn unknown_primitive_is_named() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(0.3));
    match tape.apply("tan", &[x]) {
        Err(Error::UnsupportedPrimitive(name)) => assert_eq!(name, "tan"),
        other => panic!("expected unsupported primitive, got {other:?}"),
    }
    let y = tape.apply("sin", &[x]).unwrap();
    assert_eq!(tape.value(y).item(), 0.3f64.sin());
}

#[test]
fn seed_shape_is_checked() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::row(vec![1.0, 2.0]));
    let y = tape.sin(x);
    assert!(matches!(
        tape.backward(y, &Tensor::scalar(1.0)),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn clip_gradient_zero_at_and_beyond_bounds() {
    for (x, expect) in [(0.5, 1.0), (1.0, 0.0), (1.5, 0.0), (-1.0, 0.0), (-3.0, 0.0)] {
        let (_, g) = scalar_grad(|t, v| t.clip(v, -1.0, 1.0), x);
        assert_eq!(g, expect, "x={x}");
    }
}

#[test]
fn max_tie_routes_to_first_operand() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::scalar(2.0));
    let b = tape.leaf(Tensor::scalar(2.0));
    let m = tape.max(a, b).unwrap();
    let g = tape.backward(m, &Tensor::scalar(1.0)).unwrap();
    assert_eq!(g.wrt(a).unwrap().item(), 1.0);
    assert_eq!(g.wrt(b).unwrap().item(), 0.0);
}

#[test]
fn constants_get_no_gradient() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::scalar(2.0));
    let c = tape.constant(Tensor::scalar(5.0));
    let y = tape.mul(a, c).unwrap();
    let g = tape.backward(y, &Tensor::scalar(1.0)).unwrap();
    assert!(g.wrt(c).is_none());
    assert_eq!(g.to_vector().0, vec![5.0]);
}

#[test]
fn nodes_are_topologically_ordered() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::row(vec![0.1, 0.2, 0.3]));
    let s = tape.sin(x);
    let e = tape.exp(s);
    let m = tape.mul(s, e).unwrap();
    let _ = tape.sum(m);
    assert!(tape.is_topologically_ordered());
}

/// A composite that touches every primitive and structural op.
fn composite(t: &mut Tape, x: Var) -> cpg_actor::Result<Var> {
    let a = t.view(x, 0, 2, 3)?;
    let w = t.view(x, 6, 2, 3)?;
    let mv = t.matvec(a, w)?;
    let s = t.sin(mv);
    let c = t.cos(a);
    let g = t.gather(c, &[2, 0])?;
    let p = t.mul(s, g)?;
    let e = t.exp(p);
    let l = t.log(e);
    let sp = t.softplus(l);
    let th = t.tanh(sp);
    let d = t.div(th, e)?;
    let sub = t.sub(d, p)?;
    let mx = t.max(sub, p)?;
    let cl = t.clip(mx, -0.9, 0.9);
    let sc = t.scatter_add(cl, &[1, 1], 3)?;
    let cat = t.concat(&[sc, cl])?;
    let sc2 = t.mul_scalar(cat, 1.7);
    let sh = t.add_scalar(sc2, 0.2);
    let rs = t.sum_cols(sh);
    let m = t.mean(rs);
    let tot = t.sum(sh);
    t.add(m, tot)
}

#[test]
fn composite_matches_central_differences() {
    let point = [0.3, -0.2, 0.5, 0.1, 0.7, -0.4, 0.9, -0.6, 0.25, 0.05, -0.35, 0.45];
    let rep = finite_diff_check(composite, &point, 1e-6, 1e-5).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn linear_function_is_exact() {
    let point = [1.0, -2.0, 3.5, 0.25];
    let rep = finite_diff_check(
        |t, x| {
            let y = t.mul_scalar(x, 3.0);
            let z = t.add_scalar(y, 1.0);
            Ok(t.sum(z))
        },
        &point,
        // Dyadic step and point keep every difference exactly representable.
        1.0 / 1_048_576.0,
        1e-5,
    )
    .unwrap();
    assert!(rep.max_rel_err < 1e-10, "{}", rep.max_rel_err);
}

#[test]
fn corrupted_sin_adjoint_is_caught() {
    let point = [0.3, -1.1, 0.8];
    let f = |t: &mut Tape, x: Var| {
        let s = t.sin(x);
        Ok(t.sum(s))
    };
    assert!(FdCheck::new(1e-6, 1e-5).run(f, &point).unwrap().passed());
    let rep = FdCheck::new(1e-6, 1e-5)
        .with_fault(Primitive::Sin)
        .run(f, &point)
        .unwrap();
    assert!(!rep.failing_indices.is_empty());
}

#[test]
fn every_primitive_name_parses() {
    for p in Primitive::ALL {
        assert_eq!(p.name().parse::<Primitive>().unwrap(), p);
    }
}

#[test]
fn broadcasting_gradient_sums_over_rows() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::new(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap());
    let b = tape.leaf(Tensor::row(vec![10.0, 20.0]));
    let y = tape.mul(x, b).unwrap();
    let s = tape.sum(y);
    let g = tape.backward(s, &Tensor::scalar(1.0)).unwrap();
    assert_eq!(g.wrt(b).unwrap().data(), &[9.0, 12.0]);
}

proptest! {
    #[test]
    fn backward_is_linear_in_the_output(
        xs in proptest::collection::vec(-2.0f64..2.0, 4),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let grad_of = |coef: (f64, f64)| {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::row(xs.clone()));
            let s = t.sin(x);
            let f = t.sum(s);
            let sq = t.square(x);
            let th = t.tanh(sq);
            let g = t.mean(th);
            let fa = t.mul_scalar(f, coef.0);
            let gb = t.mul_scalar(g, coef.1);
            let y = t.add(fa, gb).unwrap();
            t.backward(y, &Tensor::scalar(1.0)).unwrap().to_vector().0
        };
        let combo = grad_of((a, b));
        let gf = grad_of((1.0, 0.0));
        let gg = grad_of((0.0, 1.0));
        for i in 0..4 {
            let lin = a * gf[i] + b * gg[i];
            prop_assert!((combo[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn elementwise_primitives_match_differences(x in 0.2f64..2.5) {
        for name in ["sin", "cos", "exp", "log", "tanh", "softplus"] {
            let rep = finite_diff_check(|t, v| { let y = t.apply(name, &[v])?; Ok(t.sum(y)) }, &[x], 1e-6, 1e-6).unwrap();
            prop_assert!(rep.passed(), "{name} at {x}: {:?}", rep);
        }
    }
}
