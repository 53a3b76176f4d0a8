//! Numerical helpers shared by the estimators and the constant evaluators:
//! compensated summation, adaptive Gauss-Kronrod quadrature and the Hurwitz
//! zeta function.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Neumaier-compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated arithmetic mean. Returns `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    neumaier_sum(values.iter().copied()) / values.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    neumaier_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over the finite
/// interval `[a, b]`. The segment with the largest error estimate is bisected
/// until the summed error drops below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    const MAX_SEGMENTS: usize = 4000;
    let (value, error) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Quadrature {
                value: total,
                abs_error: total_err,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-add the segments to wash out drift from the running updates.
    let segments = heap.into_vec();
    Quadrature {
        value: neumaier_sum(segments.iter().map(|s| s.value)),
        abs_error: segments.iter().map(|s| s.error).sum(),
        converged: true,
    }
}

/// Integral of `f` over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}

// B_2, B_4, ..., B_16
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta function `ζ(s, a) = Σ_{k≥0} (a + k)^{-s}` for `s > 1`, `a > 0`,
/// by Euler-Maclaurin summation after shifting `a` past `max(20, 2s)`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let threshold = 20.0_f64.max(2.0 * s);
    let shift = if a >= threshold { 0 } else { (threshold - a).ceil() as usize };
    let head = neumaier_sum((0..shift).map(|k| (a + k as f64).powf(-s)));
    let w = a + shift as f64;
    let mut tail = w.powf(1.0 - s) / (s - 1.0) + 0.5 * w.powf(-s);
    // term_j = B_2j / (2j)! * s (s+1) ... (s+2j-2) * w^{-s-2j+1}
    let mut rising = s; // s (s+1) ... (s+2j-2)
    let mut factorial = 2.0; // (2j)!
    let mut power = w.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / factorial * rising * power;
        tail += term;
        if term.abs() < 1e-17 * tail.abs() {
            break;
        }
        let k = 2.0 * j as f64 + 2.0;
        rising *= (s + k - 1.0) * (s + k);
        factorial *= (k + 1.0) * (k + 2.0);
        power /= w * w;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
    }

    #[test]
    fn quadrature_polynomial_and_singular() {
        let q = integrate(|x| x * x, 0.0, 3.0, 1e-12, 1e-12);
        assert!((q.value - 9.0).abs() < 1e-12);
        // ∫_0^1 x^{-1/2} dx = 2
        let q = integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-10, 1e-10);
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn quadrature_to_infinity() {
        let q = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-12, 1e-12);
        assert!((q.value - 1.0).abs() < 1e-11);
        let q = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, 1e-12, 1e-12);
        assert!((q.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert!((riemann_zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        // ζ(1.5) = 2.612375348685488...
        assert!((riemann_zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-13);
        // ζ(s, a) - ζ(s, a + 1) = a^{-s}
        let (s, a) = (1.7, 0.3);
        assert!((hurwitz_zeta(s, a) - hurwitz_zeta(s, a + 1.0) - a.powf(-s)).abs() < 1e-12);
        // large shift
        let big = hurwitz_zeta(2.0, 1e6);
        assert!((big - (1e-6 + 0.5e-12)).abs() < 1e-18);
    }
}
