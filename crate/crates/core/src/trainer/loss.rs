use crate::scalar::Scalar;

/// Pinball loss of a labelled score: `max(u, -tau u)` with `u = 1 - y * score`.
pub fn pinball_loss<T: Scalar>(tau: T, y: i64, score: T) -> T {
    let y = if y >= 0 { T::one() } else { -T::one() };
    let u = T::one() - y * score;
    if u >= T::zero() {
        u
    } else {
        -tau * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn both_branches() {
        assert!((pinball_loss(0.5, 1, 0.6) - 0.4f64).abs() < 1e-15);
        assert!((pinball_loss(0.5, 1, 1.4) - 0.2f64).abs() < 1e-15);
        assert_eq!(pinball_loss(0.0, 1, 6.0f64), 0.0);
        assert_eq!(pinball_loss(0.3, -1, -1.0f64), 0.0);
    }

    proptest! {
        #[test]
        fn convex_in_score(tau in 0.0f64..1.0, y in prop::bool::ANY, s1 in -10.0f64..10.0, s2 in -10.0f64..10.0, lam in 0.0f64..1.0) {
            let y = if y { 1 } else { -1 };
            let mix = pinball_loss(tau, y, lam * s1 + (1.0 - lam) * s2);
            let bound = lam * pinball_loss(tau, y, s1) + (1.0 - lam) * pinball_loss(tau, y, s2);
            prop_assert!(mix <= bound + 1e-12);
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn zero_tau_is_hinge(score in -100.0f64..100.0, y in prop::bool::ANY) {
            let y = if y { 1 } else { -1 };
            let u = 1.0 - y as f64 * score;
            prop_assert_eq!(pinball_loss(0.0, y, score), u.max(0.0));
        }
    }
}
