//! Property-based invariants for the closed forms and the parameter order.

use proptest::prelude::*;

use cps::rates::{
    alpha, dominating_cp_rates, effective_fast_rates, lambda_bar, param_dominates, RateSet,
};

fn rate() -> impl Strategy<Value = f64> {
    (0u32..4000).prop_map(|v| v as f64 / 1000.0)
}

fn positive_rate() -> impl Strategy<Value = f64> {
    (1u32..4000).prop_map(|v| v as f64 / 1000.0)
}

prop_compose! {
    fn plain_rates()(
        laa in rate(), lad in rate(), lda in rate(), ldd in rate(),
        da in rate(), dd in rate(),
        sigma in positive_rate(), rho in positive_rate(),
    ) -> RateSet {
        RateSet::plain(laa, lad, lda, ldd, da, dd, sigma, rho)
    }
}

proptest! {
    #[test]
    fn lambda_bar_exchange_symmetry(
        l0 in rate(), l1 in rate(),
        sigma in positive_rate(), rho in positive_rate(),
        k in 1usize..6,
    ) {
        let a = lambda_bar(l0, l1, sigma, rho, k).unwrap();
        let b = lambda_bar(l1, l0, rho, sigma, k).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn lambda_bar_within_analytic_bracket(
        l0 in rate(), l1 in rate(),
        sigma in positive_rate(), rho in positive_rate(),
        k in 1usize..6,
    ) {
        let v = lambda_bar(l0, l1, sigma, rho, k).unwrap();
        prop_assert!(v >= l0.min(l1));
        prop_assert!(v <= l0.max(l1));
        // Below the stationary mean when the high state is the `1` state.
        if l1 >= l0 {
            let a = rho / (sigma + rho);
            prop_assert!(v <= a * l1 + (1.0 - a) * l0 + 1e-12);
        }
    }

    #[test]
    fn recovery_bound_between_min_and_fast_limit(rates in plain_rates()) {
        let (_, dbar) = dominating_cp_rates(&rates).unwrap();
        let (_, dstar) = effective_fast_rates(&rates).unwrap();
        let dd = rates.delta_d.finite().unwrap();
        prop_assert!(dbar >= rates.delta_a.min(dd) - 1e-12);
        prop_assert!(dbar <= dstar + 1e-12);
    }

    #[test]
    fn closed_forms_are_pure(rates in plain_rates()) {
        prop_assert_eq!(alpha(&rates).unwrap(), alpha(&rates).unwrap());
        let a = effective_fast_rates(&rates).unwrap();
        let b = effective_fast_rates(&rates).unwrap();
        prop_assert_eq!(a, b);
        let a = dominating_cp_rates(&rates).unwrap();
        let b = dominating_cp_rates(&rates).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn param_order_is_a_partial_order(
        base in plain_rates(),
        bump1 in rate(), bump2 in rate(),
        shrink1 in 0u32..1000, shrink2 in 0u32..1000,
    ) {
        // Build a chain low <= mid <= high and check order axioms on it.
        let mut mid = base.clone();
        mid.lambda_aa += bump1;
        mid.delta_a *= shrink1 as f64 / 1000.0;
        let mut high = mid.clone();
        high.lambda_dd += bump2;
        high.delta_a *= shrink2 as f64 / 1000.0;

        // Reflexivity.
        prop_assert!(param_dominates(&base, &base).unwrap());
        // Chain construction gives domination.
        prop_assert!(param_dominates(&base, &mid).unwrap());
        prop_assert!(param_dominates(&mid, &high).unwrap());
        // Transitivity.
        prop_assert!(param_dominates(&base, &high).unwrap());
        // Antisymmetry: mutual domination forces equality of every compared
        // rate.
        if param_dominates(&mid, &base).unwrap() {
            prop_assert_eq!(&base, &mid);
        }
    }
}
