//! Standard normal CDF, its logarithm, and the quantile function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// `Phi(x)`, accurate to full relative precision in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `ln Phi(x)`, finite far into the lower tail where `Phi` underflows.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return normal_cdf(x).ln();
    }
    // Asymptotic expansion: Phi(x) ~ phi(x)/|x| * sum_m (-1)^m (2m-1)!! / x^{2m}.
    let z2 = x * x;
    let mut term = 1.0;
    let mut series = 1.0;
    for m in 1..=8 {
        term *= -((2 * m - 1) as f64) / z2;
        series += term;
    }
    -0.5 * z2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

// Acklam's rational approximation; relative error below 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn lower_half_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    let x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // One Halley step against the exact CDF.
    let e = normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `Phi^{-1}(p)` for `p` in `(0, 1)`.
///
/// The upper half is evaluated as `-Phi^{-1}(1 - p)`, which is exact in
/// floating point for `p >= 0.5`, so the symmetry holds bitwise.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    Ok(if p <= 0.5 {
        lower_half_quantile(p)
    } else {
        -lower_half_quantile(1.0 - p)
    })
}

/// Probit threshold of a probability, with `0 -> -inf` and `1 -> +inf`.
pub(crate) fn probit_threshold(q: f64) -> f64 {
    if q <= 0.0 {
        f64::NEG_INFINITY
    } else if q >= 1.0 {
        f64::INFINITY
    } else {
        normal_quantile(q).expect("interior probability")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Phi via its everywhere-convergent Taylor series:
    /// Phi(x) = 1/2 + phi(x) * sum_n x^{2n+1} / (1*3*...*(2n+1)).
    fn phi_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            n += 1;
            term *= x * x / (2 * n + 1) as f64;
            sum += term;
            if n > 500 {
                break;
            }
        }
        0.5 + normal_pdf(x) * sum
    }

    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-8.0, 8.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi_series(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantile_975_matches_series_inversion() {
        let oracle = quantile_by_bisection(0.975);
        assert!((oracle - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.975).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn quantile_against_oracle_grid() {
        for &p in &[
            1e-6, 1e-4, 0.001, 0.0243, 0.0245, 0.1, 0.3, 0.49, 0.51, 0.7, 0.9, 0.99, 0.999_999,
        ] {
            let oracle = quantile_by_bisection(p);
            let got = normal_quantile(p).unwrap();
            assert!((got - oracle).abs() < 1e-9, "p={p}: {got} vs {oracle}");
        }
    }

    #[test]
    fn quantile_symmetry() {
        for i in 1..256 {
            let p = i as f64 / 512.0;
            assert_eq!(
                normal_quantile(1.0 - p).unwrap(),
                -normal_quantile(p).unwrap()
            );
        }
        for &p in &[1e-300, 1e-100, 1e-20] {
            let x = normal_quantile(p).unwrap();
            assert!(x.is_finite() && x < -9.0);
            assert!((log_normal_cdf(x) - p.ln()).abs() < 1e-9 * p.ln().abs());
        }
    }

    #[test]
    fn boundary_is_error() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_matches_series() {
        for i in -60..=60 {
            let x = i as f64 / 10.0;
            assert!((normal_cdf(x) - phi_series(x)).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn log_cdf_is_continuous_at_switch() {
        let a = log_normal_cdf(-20.0 + 1e-9);
        let b = log_normal_cdf(-20.0 - 1e-9);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!(log_normal_cdf(-60.0).is_finite());
        assert!(log_normal_cdf(-60.0) < -1800.0);
    }
}
