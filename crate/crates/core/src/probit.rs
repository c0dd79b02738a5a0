//! Standard normal CDF and its inverse, used for DET plot axes.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("probability {0} is outside the open interval (0, 1)")]
pub struct ProbabilityOutOfRange(pub f64);

/// `Phi(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

// Acklam's rational approximation, relative error below 1.15e-9.
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
const P_LOW: f64 = 0.024_25;

fn tail(q: f64) -> f64 {
    let q = (-2.0 * q.ln()).sqrt();
    (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
        / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
}

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// `Phi^-1(p)`: rational approximation refined by one Newton step on `Phi`.
pub fn normal_deviate(p: f64) -> Result<f64, ProbabilityOutOfRange> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ProbabilityOutOfRange(p));
    }
    if p > 0.5 {
        // 1 - p is exact here, and the lower tail keeps full relative precision
        return normal_deviate(1.0 - p).map(|x| -x);
    }
    let x = acklam(p);
    let refined = x - (normal_cdf(x) - p) / normal_pdf(x);
    Ok(if refined.is_finite() { refined } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on the CDF; independent of the rational approximation.
    fn bisect(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_is_zero() {
        assert!(normal_deviate(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn upper_quantile() {
        let x = normal_deviate(0.975).unwrap();
        assert!((x - 1.959_963_984_540_054).abs() < 1e-11, "{x}");
        assert!((x - bisect(0.975)).abs() < 1e-12);
    }

    #[test]
    fn matches_bisection_across_range() {
        for &p in &[1e-10, 1e-6, 1e-4, 0.01, 0.02425, 0.1, 0.3, 0.7, 0.9, 0.97575, 0.999, 1.0 - 1e-4] {
            let x = normal_deviate(p).unwrap();
            assert!((x - bisect(p)).abs() < 1e-8, "p={p}: {x} vs {}", bisect(p));
        }
    }

    #[test]
    fn inverse_identity() {
        let mut p = 1e-4;
        while p < 1.0 - 1e-4 {
            let back = normal_cdf(normal_deviate(p).unwrap());
            assert!((back - p).abs() < 1e-8, "p={p}");
            p += 1.7e-3;
        }
    }

    #[test]
    fn endpoints_are_rejected() {
        assert_eq!(normal_deviate(0.0), Err(ProbabilityOutOfRange(0.0)));
        assert_eq!(normal_deviate(1.0), Err(ProbabilityOutOfRange(1.0)));
        assert!(normal_deviate(f64::NAN).is_err());
    }
}
