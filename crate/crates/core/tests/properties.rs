//! Randomized identities of the exterior calculus and the kernel.

mod common;

use proptest::prelude::*;

use common::*;
use singpert::forms::*;
use singpert::kernel::expr;
use singpert::kernel::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn d_squared_vanishes_on_functions(f in expr()) {
        d_squared(f)?;
    }

    #[test]
    fn cartan_matches_leibniz(x in field(), w in one_form()) {
        cartan_vs_leibniz(x, w)?;
    }

    #[test]
    fn lie_derivative_of_function_is_directional(x in field(), f in expr()) {
        let w = KForm::scalar(&chart(), f.clone());
        let l = lie_derivative(&x, &w).unwrap();
        let want = x.apply(&f);
        prop_assert!(equivalent(&l.function(), &want).unwrap().holds());
    }

    #[test]
    fn interior_product_is_an_antiderivation(x in field(), a in one_form(), b in one_form()) {
        antiderivation(x, a, b)?;
    }

    #[test]
    fn wedge_of_one_forms_anticommutes(a in one_form(), b in one_form()) {
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().is_zero_exact());
    }

    #[test]
    fn d_is_a_derivation(f in expr(), w in one_form()) {
        let fw = KForm::scalar(&chart(), f.clone());
        let lhs = exterior_derivative(&wedge(&fw, &w).unwrap()).unwrap();
        let rhs = wedge(&exterior_derivative(&fw).unwrap(), &w)
            .unwrap()
            .add(&wedge(&fw, &exterior_derivative(&w).unwrap()).unwrap())
            .unwrap();
        assert_forms_equal(&lhs, &rhs)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn printing_round_trips(e in expr()) {
        let back = parse(&e.to_string()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn sum_is_order_independent(a in expr(), b in expr(), c in expr()) {
        let l = expr::add(vec![a.clone(), b.clone(), c.clone()]);
        let r = expr::add(vec![c, a, b]);
        prop_assert_eq!(l, r);
    }

    #[test]
    fn derivative_is_linear(a in expr(), b in expr(), k in -5i64..=5) {
        let s = expr::add2(&a, &expr::mul2(&Expr::int(k), &b));
        let lhs = differentiate(&s, "x");
        let rhs = expr::add2(&differentiate(&a, "x"), &expr::mul2(&Expr::int(k), &differentiate(&b, "x")));
        prop_assert!(equivalent(&lhs, &rhs).unwrap().holds());
    }

    #[test]
    fn mixed_partials_commute(e in expr()) {
        let xy = differentiate(&differentiate(&e, "x"), "y");
        let yx = differentiate(&differentiate(&e, "y"), "x");
        prop_assert_eq!(xy, yx);
    }
}

#[test]
fn three_forms_are_out_of_range() {
    let c = chart();
    let w = KForm::one_form(&c, vec![parse("y*z").unwrap(), Expr::zero(), parse("x").unwrap()]).unwrap();
    let dw = exterior_derivative(&w).unwrap();
    assert!(matches!(exterior_derivative(&dw), Err(FormError::Degree { degree: 2, .. })));
}
