//! Shared generators for the randomized suites.
#![allow(dead_code)]

use proptest::prelude::*;

use singpert::forms::*;
use singpert::kernel::expr;
use singpert::kernel::*;

pub const COORDS: [&str; 3] = ["x", "y", "z"];

pub fn chart() -> Chart {
    Chart::new(&COORDS).unwrap()
}

/// Expression source text over the chart coordinates.
pub fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(COORDS.to_vec()).prop_map(String::from),
        (-4i32..=4).prop_map(|n| format!("({n})")),
        (1i32..=5, 2i32..=4).prop_map(|(a, b)| format!("({a}/{b})")),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}*{b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}/(2 + {b}^2))")),
            (inner.clone(), 2u32..=3).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp({a})")),
        ]
    })
}

pub fn expr() -> impl Strategy<Value = Expr> {
    expr_text().prop_map(|s| parse(&s).expect("generated text parses"))
}

pub fn one_form() -> impl Strategy<Value = KForm> {
    prop::collection::vec(expr(), 3).prop_map(|c| KForm::one_form(&chart(), c).unwrap())
}

pub fn field() -> impl Strategy<Value = VectorField> {
    prop::collection::vec(expr(), 3).prop_map(|c| VectorField::new(&chart(), c).unwrap())
}

pub fn assert_forms_equal(a: &KForm, b: &KForm) -> Result<(), TestCaseError> {
    let d = a.sub(b).unwrap();
    for (idx, c) in d.terms() {
        let eq = equivalent(c, &Expr::zero()).unwrap();
        prop_assert!(eq.holds(), "component {idx:?} differs: {c}");
    }
    Ok(())
}

pub fn d_squared(f: Expr) -> Result<(), TestCaseError> {
    let w = KForm::scalar(&chart(), f);
    let dd = exterior_derivative(&exterior_derivative(&w).unwrap()).unwrap();
    prop_assert!(dd.is_zero_exact(), "{dd}");
    Ok(())
}

/// Cartan formula against the coordinate expression
/// (L_X w)_i = X^j d_j w_i + w_j d_i X^j.
pub fn cartan_vs_leibniz(x: VectorField, w: KForm) -> Result<(), TestCaseError> {
    let cartan = lie_derivative(&x, &w).unwrap();
    let c = chart();
    let comps: Vec<Expr> = (0..3)
        .map(|i| {
            let mut terms = Vec::new();
            for j in 0..3 {
                terms.push(expr::mul2(x.component(j), &differentiate(&w.components()[i], c.name(j))));
                terms.push(expr::mul2(&w.components()[j], &differentiate(x.component(j), c.name(i))));
            }
            expr::add(terms)
        })
        .collect();
    assert_forms_equal(&cartan, &KForm::one_form(&c, comps).unwrap())
}

/// i_X(a^b) = i_X a ^ b - a ^ i_X b for 1-forms.
pub fn antiderivation(x: VectorField, a: KForm, b: KForm) -> Result<(), TestCaseError> {
    let lhs = interior_product(&x, &wedge(&a, &b).unwrap()).unwrap();
    let ia = interior_product(&x, &a).unwrap();
    let ib = interior_product(&x, &b).unwrap();
    let rhs = wedge(&ia, &b).unwrap().sub(&wedge(&a, &ib).unwrap()).unwrap();
    assert_forms_equal(&lhs, &rhs)
}

