//! Scalar special functions for Dirichlet likelihood work: log-gamma,
//! digamma, trigamma and the inverse of digamma.
//!
//! All four are implemented with upward recurrence into the asymptotic
//! regime followed by a Bernoulli-number series. No reflection formulas:
//! the domain is strictly `x > 0`.

use crate::error::SpecialFnError;

/// Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Bernoulli numbers B_2..B_16.
const B2: f64 = 1.0 / 6.0;
const B4: f64 = -1.0 / 30.0;
const B6: f64 = 1.0 / 42.0;
const B8: f64 = -1.0 / 30.0;
const B10: f64 = 5.0 / 66.0;
const B12: f64 = -691.0 / 2730.0;
const B14: f64 = 7.0 / 6.0;
const B16: f64 = -3617.0 / 510.0;

/// Natural log of the gamma function, `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, SpecialFnError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(SpecialFnError::Domain { function: "log_gamma", x });
    }
    // Recurrence ln Γ(x) = ln Γ(x + k) - Σ ln(x + j) until the Stirling
    // series is accurate.
    let mut shift = 0.0;
    let mut z = x;
    while z < 10.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Stirling series: Σ B_{2n} / (2n (2n-1) z^{2n-1}).
    let mut series = B16 / (16.0 * 15.0);
    series = series * inv2 + B14 / (14.0 * 13.0);
    series = series * inv2 + B12 / (12.0 * 11.0);
    series = series * inv2 + B10 / (10.0 * 9.0);
    series = series * inv2 + B8 / (8.0 * 7.0);
    series = series * inv2 + B6 / (6.0 * 5.0);
    series = series * inv2 + B4 / (4.0 * 3.0);
    series = series * inv2 + B2 / (2.0 * 1.0);
    let stirling = (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series * inv;
    Ok(stirling - shift)
}

/// Digamma function ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64, SpecialFnError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(SpecialFnError::Domain { function: "digamma", x });
    }
    Ok(digamma_unchecked(x))
}

/// Digamma without the domain check, for hot inner loops that have already
/// validated their arguments. Positive `x` only.
#[inline]
pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < 6.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // ψ(z) ~ ln z - 1/(2z) - Σ B_{2n} / (2n z^{2n}).
    let mut series = B16 / 16.0;
    series = series * inv2 + B14 / 14.0;
    series = series * inv2 + B12 / 12.0;
    series = series * inv2 + B10 / 10.0;
    series = series * inv2 + B8 / 8.0;
    series = series * inv2 + B6 / 6.0;
    series = series * inv2 + B4 / 4.0;
    series = series * inv2 + B2 / 2.0;
    acc + z.ln() - 0.5 * inv - series * inv2
}

/// Trigamma function ψ′(x) for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64, SpecialFnError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(SpecialFnError::Domain { function: "trigamma", x });
    }
    Ok(trigamma_unchecked(x))
}

#[inline]
pub(crate) fn trigamma_unchecked(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < 6.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // ψ′(z) ~ 1/z + 1/(2z²) + Σ B_{2n} / z^{2n+1}.
    let mut series = B16;
    series = series * inv2 + B14;
    series = series * inv2 + B12;
    series = series * inv2 + B10;
    series = series * inv2 + B8;
    series = series * inv2 + B6;
    series = series * inv2 + B4;
    series = series * inv2 + B2;
    acc + inv + 0.5 * inv2 + series * inv2 * inv
}

/// Inverse of digamma: returns `x > 0` with `ψ(x) = y`.
///
/// Uses the standard piecewise initializer (`exp(y) + 0.5` for `y ≥ -2.22`,
/// `-1/(y + γ)` otherwise) followed by five Newton steps.
pub fn inv_digamma(y: f64) -> Result<f64, SpecialFnError> {
    if !y.is_finite() {
        return Err(SpecialFnError::Domain { function: "inv_digamma", x: y });
    }
    Ok(inv_digamma_unchecked(y))
}

#[inline]
pub(crate) fn inv_digamma_unchecked(y: f64) -> f64 {
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    for _ in 0..5 {
        let step = (digamma_unchecked(x) - y) / trigamma_unchecked(x);
        x -= step;
        if x <= 0.0 {
            // Newton overshot below the domain; ψ is monotone so halving
            // back toward the previous iterate keeps the bracket.
            x = (x + step) * 0.5;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Reference values computed with 30-digit arbitrary-precision arithmetic.
    const LOG_GAMMA_REF: [(f64, f64); 17] = [
        (0.0001, 9.2102826586339622584),
        (0.001, 6.9071788853838536825),
        (0.01, 4.5994798780420217225),
        (0.1, 2.2527126517342059599),
        (0.5, 0.57236494292470008707),
        (1.0, 0.0),
        (1.5, -0.12078223763524522235),
        (2.0, 0.0),
        (3.7, 1.4280723266653879219),
        (4.0, 1.7917594692280550008),
        (6.0, 4.7874917427820459942),
        (10.0, 12.801827480081469611),
        (25.0, 54.78472939811231919),
        (123.456, 469.60554712992946873),
        (1000.0, 5905.2204232091812118),
        (12345.678, 103959.91990554606092),
        (1000000.0, 12815504.56914761166),
    ];

    const DIGAMMA_REF: [(f64, f64); 17] = [
        (0.0001, -10000.577051183514335),
        (0.001, -1000.5755719318103005),
        (0.01, -100.5608854578686745),
        (0.1, -10.423754940411076795),
        (0.5, -1.9635100260214234794),
        (1.0, -0.57721566490153286061),
        (1.5, 0.036489973978576520559),
        (2.0, 0.42278433509846713939),
        (3.7, 1.1671535393615113859),
        (4.0, 1.2561176684318004727),
        (6.0, 1.7061176684318004727),
        (10.0, 2.2517525890667211076),
        (25.0, 3.1987425128519740085),
        (123.456, 4.8118293238289853873),
        (1000.0, 6.9072551956488120521),
        (12345.678, 9.4210208207417608869),
        (1000000.0, 13.815510057964190771),
    ];

    const TRIGAMMA_REF: [(f64, f64); 17] = [
        (0.0001, 100000001.64469368793),
        (0.001, 1000001.642533195869),
        (0.01, 10001.62121352831322),
        (0.1, 101.43329915079275882),
        (0.5, 4.9348022005446793094),
        (1.0, 1.6449340668482264365),
        (1.5, 0.93480220054467930942),
        (2.0, 0.64493406684822643647),
        (3.7, 0.3100378576700383191),
        (4.0, 0.28382295573711532536),
        (6.0, 0.18132295573711532536),
        (10.0, 0.10516633568168574612),
        (25.0, 0.040810663257225579187),
        (123.456, 0.0081329458342781980101),
        (1000.0, 0.0010005001666666333334),
        (12345.678, 0.000081003287231112068383),
        (1000000.0, 1.0000005000001666667e-6),
    ];

    fn rel_or_abs(err: f64, reference: f64) -> f64 {
        err / reference.abs().max(1.0)
    }

    #[test]
    fn log_gamma_reference_values() {
        for &(x, want) in &LOG_GAMMA_REF {
            let got = log_gamma(x).unwrap();
            assert!(
                rel_or_abs((got - want).abs(), want) < 1e-12,
                "log_gamma({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn log_gamma_analytic_spots() {
        assert!((log_gamma(1.0).unwrap()).abs() < 1e-10);
        assert!((log_gamma(4.0).unwrap() - 6.0f64.ln()).abs() < 1e-10);
        assert!((log_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn digamma_reference_values() {
        for &(x, want) in &DIGAMMA_REF {
            let got = digamma(x).unwrap();
            assert!(
                (got - want).abs() < 1e-10 * want.abs().max(1.0),
                "digamma({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn digamma_analytic_spots() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-10);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_GAMMA)).abs() < 1e-10);
        let want_half = -EULER_GAMMA - 2.0 * 2.0f64.ln();
        assert!((digamma(0.5).unwrap() - want_half).abs() < 1e-10);
    }

    #[test]
    fn trigamma_reference_values() {
        for &(x, want) in &TRIGAMMA_REF {
            let got = trigamma(x).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-8,
                "trigamma({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn trigamma_analytic_spots() {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((trigamma(1.0).unwrap() - pi2 / 6.0).abs() < 1e-10);
        assert!((trigamma(2.0).unwrap() - (pi2 / 6.0 - 1.0)).abs() < 1e-10);
        assert!((trigamma(0.5).unwrap() - pi2 / 2.0).abs() < 1e-10);
    }

    #[test]
    fn inv_digamma_spots() {
        assert!((inv_digamma(digamma(3.7).unwrap()).unwrap() - 3.7).abs() < 1e-8);
        assert!((inv_digamma(-EULER_GAMMA).unwrap() - 1.0).abs() < 1e-8);
        assert!((inv_digamma(0.4227843351).unwrap() - 2.0).abs() < 1e-7);
    }

    #[test]
    fn domain_errors() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
        assert!(digamma(0.0).is_err());
        assert!(digamma(-3.0).is_err());
        assert!(trigamma(0.0).is_err());
        assert!(inv_digamma(f64::NAN).is_err());
        assert!(inv_digamma(f64::INFINITY).is_err());
    }

    #[test]
    fn digamma_recurrence_random() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(1e-6..100.0);
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!(
                (lhs - 1.0 / x).abs() <= 1e-9 * (1.0 / x).max(1.0),
                "recurrence failed at x={x}"
            );
        }
    }

    #[test]
    fn trigamma_matches_digamma_derivative() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..2_000 {
            let x: f64 = rng.gen_range(0.05..50.0);
            let h = 1e-5 * x.max(1.0);
            let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
            let tg = trigamma(x).unwrap();
            assert!(
                ((fd - tg) / tg).abs() < 1e-4,
                "derivative mismatch at x={x}: fd={fd} tg={tg}"
            );
        }
    }

    #[test]
    fn inv_digamma_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10_000 {
            // log-uniform over (1e-3, 1e4)
            let e: f64 = rng.gen_range(-3.0..4.0);
            let x = 10f64.powf(e);
            let back = inv_digamma(digamma(x).unwrap()).unwrap();
            assert!(
                ((back - x) / x).abs() <= 1e-7,
                "round trip failed: x={x} back={back}"
            );
        }
    }

    proptest! {
        #[test]
        fn log_gamma_midpoint_convexity(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            let mid = log_gamma(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (log_gamma(a).unwrap() + log_gamma(b).unwrap());
            prop_assert!(mid <= avg + 1e-9 * avg.abs().max(1.0));
        }

        #[test]
        fn inv_digamma_residual(y in -500.0f64..13.0) {
            let x = inv_digamma(y).unwrap();
            prop_assert!(x > 0.0);
            prop_assert!((digamma(x).unwrap() - y).abs() <= 1e-10 * y.abs().max(1.0));
        }
    }
}
