use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

use bwl_core::measure::moment;
use bwl_core::weights::{
    exact_dual_exponent, exact_power_range, interval_product, power_membership, weight_constant, BaseClass,
};
use bwl_core::{ClassKind, Grid, Interval, LambdaMeasure, Weight, Window};

const BASES: [BaseClass; 3] = [BaseClass::Ap, BaseClass::ApLambda, BaseClass::ApLambdaTilde];

fn grid(l: u32, r: u32) -> Grid {
    Grid::new(Window::new(l).unwrap(), r).unwrap()
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

fn lambda_strategy() -> impl Strategy<Value = f64> {
    (-0.45f64..3.0).prop_filter("λ ≠ 0", |l| l.abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn products_are_at_least_one(
        alpha in -5.0f64..9.0, p in 1.05f64..6.0, lambda in lambda_strategy(),
        a in -8.0f64..8.0, len in -12.0f64..5.0, which in 0usize..3,
    ) {
        let mu = LambdaMeasure::new(lambda).unwrap();
        let a = 2f64.powf(a);
        let b = Interval::new(a, a * (1.0 + 2f64.powf(len))).unwrap();
        let v = interval_product(&Weight::power(alpha).unwrap(), p, &mu, ClassKind::global(BASES[which]), &b).unwrap();
        prop_assert!(v >= 1.0 - 1e-9, "{v}");
    }

    #[test]
    fn tilde_is_classical_ap_of_the_density(
        alpha in -0.9f64..6.0, p in 1.2f64..4.0, lambda in lambda_strategy(), a in -6.0f64..6.0, len in -8.0f64..3.0,
    ) {
        let mu = LambdaMeasure::new(lambda).unwrap();
        let a = 2f64.powf(a);
        let b = Interval::new(a, a * (1.0 + 2f64.powf(len))).unwrap();
        let v = interval_product(&Weight::power(alpha).unwrap(), p, &mu, ClassKind::ApLambdaTilde, &b).unwrap();
        // u = w/ν_λ against dν_λ: u·t^{2λ+1} = t^α, u^{-1/(p-1)}·t^{2λ+1} = t^{(2λ+1)p' − α/(p−1)}
        let e = 2.0 * lambda + 1.0;
        let nu = moment(e, b.a, b.b).unwrap();
        let first = moment(alpha, b.a, b.b).unwrap() / nu;
        let second = moment(e * p / (p - 1.0) - alpha / (p - 1.0), b.a, b.b).unwrap() / nu;
        let classical = first * second.powf(p - 1.0);
        prop_assert!((v - classical).abs() <= 1e-10 * classical, "{v} vs {classical}");
    }

    #[test]
    fn dual_map_preserves_membership(an in -400i64..800, ad in 1i64..50, pn in 11i64..60, ln in -9i64..40) {
        let (alpha, p, lambda) = (rat(an, ad), rat(pn, 10), rat(ln, 20));
        prop_assume!(ln != 0);
        let pp = &p / (&p - BigRational::one());
        for base in BASES {
            let (lo, hi) = exact_power_range(&p, &lambda, base);
            let d = exact_dual_exponent(&alpha, &p, &lambda, base);
            let (dlo, dhi) = exact_power_range(&pp, &lambda, base);
            prop_assert_eq!(lo < alpha && alpha < hi, dlo < d && d < dhi, "{:?}", base);
            prop_assert_eq!(exact_dual_exponent(&d, &pp, &lambda, base), alpha.clone());
        }
    }

    #[test]
    fn ranges_grow_with_lambda(pn in 11i64..60, l1 in -9i64..40, dl in 1i64..40) {
        let p = rat(pn, 10);
        let (lam1, lam2) = (rat(l1, 20), rat(l1 + dl, 20));
        for base in BASES {
            let (a1, b1) = exact_power_range(&p, &lam1, base);
            let (a2, b2) = exact_power_range(&p, &lam2, base);
            prop_assert!(a2 <= a1 && b1 <= b2);
        }
    }
}

#[test]
fn tilde_and_ap_constants_decrease_in_p() {
    let g = grid(6, 3);
    for lambda in [1.0, 0.5, -0.25] {
        let mu = LambdaMeasure::new(lambda).unwrap();
        for (p1, p2) in [(1.5, 2.0), (2.0, 3.0)] {
            for base in [BaseClass::Ap, BaseClass::ApLambdaTilde] {
                let kind = ClassKind::global(base);
                let (lo, hi) = power_membership(0.0, p1, lambda, kind).unwrap().range;
                let mut alpha = lo + 0.25;
                while alpha <= hi - 0.25 {
                    let w = Weight::power(alpha).unwrap();
                    let c1 = weight_constant(&w, p1, &mu, kind, g).unwrap().value;
                    let c2 = weight_constant(&w, p2, &mu, kind, g).unwrap().value;
                    assert!(c2 <= c1 + 1e-9, "{base:?} λ={lambda} α={alpha}: {c1} → {c2}");
                    alpha += 0.5;
                }
            }
        }
    }
}

#[test]
fn apl_constants_obey_normalised_nesting() {
    let g = grid(6, 3);
    let kind = ClassKind::ApLambda;
    for lambda in [1.0, 0.5, -0.25] {
        let mu = LambdaMeasure::new(lambda).unwrap();
        let factor = (2.0 * lambda + 2.0) / (2.0 * lambda + 1.0);
        for (p1, p2) in [(1.5, 2.0), (2.0, 3.0)] {
            let (lo, hi) = power_membership(0.0, p1, lambda, kind).unwrap().range;
            let mut alpha = lo + 0.25;
            while alpha <= hi - 0.25 {
                let w = Weight::power(alpha).unwrap();
                let c1 = weight_constant(&w, p1, &mu, kind, g).unwrap().value;
                let c2 = weight_constant(&w, p2, &mu, kind, g).unwrap().value;
                assert!(c2 <= c1 * factor.powf(p2 - p1) + 1e-9, "λ={lambda} α={alpha}: {c1} → {c2}");
                alpha += 0.5;
            }
        }
    }
    // without the normalisation factor the inequality fails
    let mu = LambdaMeasure::new(-0.25).unwrap();
    let w = Weight::power(-1.5).unwrap();
    let c2 = weight_constant(&w, 2.0, &mu, kind, g).unwrap().value;
    let c3 = weight_constant(&w, 3.0, &mu, kind, g).unwrap().value;
    assert!(c3 > c2 + 0.1, "{c2} → {c3}");
}

#[test]
fn separation_pair() {
    let (p, lambda) = (2.0, 1.0);
    let mu = LambdaMeasure::new(lambda).unwrap();
    let member = |alpha, kind| power_membership(alpha, p, lambda, kind).unwrap().member;
    assert!(member(-2.0, ClassKind::ApLambda) && !member(-2.0, ClassKind::ApLambdaTilde));
    assert!(member(5.0, ClassKind::ApLambdaTilde) && !member(5.0, ClassKind::ApLambda));
    let w = Weight::power(-2.0).unwrap();
    let c6 = weight_constant(&w, p, &mu, ClassKind::ApLambdaTilde, grid(6, 3)).unwrap().value;
    let c10 = weight_constant(&w, p, &mu, ClassKind::ApLambdaTilde, grid(10, 3)).unwrap().value;
    assert!(c10 >= 4.0 * c6, "{c6} → {c10}");
    // α = 5 sits on the upper end of the A_{p,λ} range, where the constant grows linearly in L
    let w = Weight::power(5.0).unwrap();
    let c: Vec<f64> = [6, 10, 14]
        .iter()
        .map(|&l| weight_constant(&w, p, &mu, ClassKind::ApLambda, grid(l, 3)).unwrap().value)
        .collect();
    for (k, l) in [(1, 10.0 / 6.0), (2, 14.0 / 10.0)] {
        let ratio = c[k] / c[k - 1];
        assert!((ratio - l).abs() < 0.05 * l, "{c:?}");
    }
}
