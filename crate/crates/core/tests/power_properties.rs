use proptest::prelude::*;

use powerforge_core::stats::{noncentral_t_power, Tails};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn null_power_is_alpha(n in 2u32..200, alpha in 0.001f64..0.5) {
        prop_assert!((noncentral_t_power(0.0, n, alpha, Tails::TwoSided) - alpha).abs() < 1e-6);
    }

    #[test]
    fn monotone_in_n_d_and_alpha(n in 2u32..120, d in 0.0f64..2.0, alpha in 0.005f64..0.3, bump in 0.01f64..0.5) {
        let p = noncentral_t_power(d, n, alpha, Tails::TwoSided);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(noncentral_t_power(d, n + 1, alpha, Tails::TwoSided) >= p - 1e-12);
        prop_assert!(noncentral_t_power(d + bump, n, alpha, Tails::TwoSided) >= p - 1e-12);
        prop_assert!(noncentral_t_power(d, n, (alpha + bump).min(0.9), Tails::TwoSided) >= p - 1e-12);
        // Two-sided power depends on |d| only.
        prop_assert!((noncentral_t_power(-d, n, alpha, Tails::TwoSided) - p).abs() < 1e-9);
    }
}

#[test]
fn strict_increase_at_the_anchor() {
    let at34 = noncentral_t_power(0.5, 34, 0.05, Tails::TwoSided);
    assert!(noncentral_t_power(0.5, 35, 0.05, Tails::TwoSided) > at34);
    assert!((at34 - 0.80).abs() < 0.01, "{at34}");
}
