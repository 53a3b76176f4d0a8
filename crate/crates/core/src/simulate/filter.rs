//! Truncated moving-average filtering `out_t = Σ_{i<M} c_i u_{t-i}` with a
//! direct and an FFT back-end.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Work threshold (`n · M`) above which `Auto` switches to the FFT back-end.
pub const AUTO_FFT_THRESHOLD: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMethod {
    Direct,
    Fft,
    #[default]
    Auto,
}

impl ConvMethod {
    /// Back-end actually used for an `n`-output filter with `m` taps.
    pub fn resolve(self, n: usize, m: usize) -> ConvMethod {
        match self {
            ConvMethod::Auto if n.saturating_mul(m) > AUTO_FFT_THRESHOLD => ConvMethod::Fft,
            ConvMethod::Auto => ConvMethod::Direct,
            other => other,
        }
    }
}

fn check_lengths(innov: &[f64], coeffs: &[f64]) -> Result<usize> {
    if coeffs.is_empty() {
        return Err(Error::Dimension("filter needs at least one coefficient".into()));
    }
    if innov.len() < coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} innovations cannot feed a {}-tap filter (need n + M - 1 with n >= 1)",
            innov.len(),
            coeffs.len()
        )));
    }
    Ok(innov.len() + 1 - coeffs.len())
}

/// Applies `coeffs` to `innov`, whose first `M - 1` entries are pre-sample
/// values. Returns the `n = len(innov) - M + 1` in-sample outputs.
pub fn linear_filter(innov: &[f64], coeffs: &[f64], method: ConvMethod) -> Result<Vec<f64>> {
    let n = check_lengths(innov, coeffs)?;
    match method.resolve(n, coeffs.len()) {
        ConvMethod::Fft => FftFilter::new(coeffs, n).apply(innov),
        _ => Ok(direct_filter(innov, coeffs, n)),
    }
}

fn direct_filter(innov: &[f64], coeffs: &[f64], n: usize) -> Vec<f64> {
    let m = coeffs.len();
    let mut out = vec![0.0; n];
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let src = &innov[m - 1 - i..m - 1 - i + n];
        for (o, &u) in out.iter_mut().zip(src) {
            *o += c * u;
        }
    }
    out
}

/// Smallest `2^a 3^b 5^c` that is at least `len`.
pub(crate) fn smooth_size(len: usize) -> usize {
    let mut best = len.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut cand = p35;
            while cand < len {
                cand *= 2;
            }
            best = best.min(cand);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// FFT filter with the coefficient spectrum computed once, so that many
/// innovation sequences of the same length can be filtered cheaply.
pub struct FftFilter {
    taps: usize,
    n: usize,
    size: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl FftFilter {
    pub fn new(coeffs: &[f64], n: usize) -> Self {
        let taps = coeffs.len();
        // circular convolution of this size leaves outputs M-1.. uncontaminated
        let size = smooth_size(n + taps - 1);
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut buf = vec![0.0; size];
        buf[..taps].copy_from_slice(coeffs);
        let mut spectrum = forward.make_output_vec();
        forward
            .process(&mut buf, &mut spectrum)
            .expect("buffer sizes match the plan");
        let norm = 1.0 / size as f64;
        spectrum.iter_mut().for_each(|c| *c *= norm);
        FftFilter {
            taps,
            n,
            size,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn outputs(&self) -> usize {
        self.n
    }

    pub fn apply(&self, innov: &[f64]) -> Result<Vec<f64>> {
        if innov.len() != self.n + self.taps - 1 {
            return Err(Error::Dimension(format!(
                "expected {} innovations, got {}",
                self.n + self.taps - 1,
                innov.len()
            )));
        }
        let mut buf = vec![0.0; self.size];
        buf[..innov.len()].copy_from_slice(innov);
        let mut freq = self.forward.make_output_vec();
        self.forward
            .process(&mut buf, &mut freq)
            .expect("buffer sizes match the plan");
        for (f, s) in freq.iter_mut().zip(&self.spectrum) {
            *f *= s;
        }
        // imaginary parts of DC/Nyquist are zero up to rounding; realfft rejects them otherwise
        freq[0].im = 0.0;
        if self.size.is_multiple_of(2) {
            let last = freq.len() - 1;
            freq[last].im = 0.0;
        }
        self.inverse
            .process(&mut freq, &mut buf)
            .expect("buffer sizes match the plan");
        Ok(buf[self.taps - 1..self.taps - 1 + self.n].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_filter() {
        let innov = [0.3, -1.2, 4.0];
        assert_eq!(linear_filter(&innov, &[1.0], ConvMethod::Direct).unwrap(), innov.to_vec());
        let fft = linear_filter(&innov, &[1.0], ConvMethod::Fft).unwrap();
        for (a, b) in fft.iter().zip(&innov) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_tap_hand_convolution() {
        let out = linear_filter(&[1.0, 2.0, 3.0], &[1.0, 1.0], ConvMethod::Direct).unwrap();
        assert_eq!(out, vec![3.0, 5.0]);
        let out = linear_filter(&[1.0, 2.0, 3.0], &[1.0, 1.0], ConvMethod::Fft).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-13 && (out[1] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn length_mismatch_is_a_dimension_error() {
        assert!(matches!(
            linear_filter(&[1.0], &[1.0, 2.0], ConvMethod::Direct),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(linear_filter(&[1.0], &[], ConvMethod::Fft), Err(Error::Dimension(_))));
        let f = FftFilter::new(&[1.0, 0.5], 4);
        assert!(f.apply(&[0.0; 4]).is_err());
    }

    #[test]
    fn fft_matches_direct_on_long_filter() {
        let (m, n) = (4096, 8192);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let innov: Vec<f64> = (0..n + m - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coeffs: Vec<f64> = (0..m).map(|i| ((i + 1) as f64).powf(-0.75)).collect();
        let direct = linear_filter(&innov, &coeffs, ConvMethod::Direct).unwrap();
        let fft = linear_filter(&innov, &coeffs, ConvMethod::Fft).unwrap();
        let scale = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = direct.iter().zip(&fft).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err <= 1e-10 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1), 1);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(11), 12);
        assert_eq!(smooth_size(278_528), 279_936); // 2^7 · 3^7
        for len in 1..2000 {
            let s = smooth_size(len);
            assert!(s >= len);
            let mut r = s;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            assert_eq!(r, 1);
        }
    }

    #[test]
    fn auto_threshold() {
        assert_eq!(ConvMethod::Auto.resolve(1 << 12, 1 << 12), ConvMethod::Direct);
        assert_eq!(ConvMethod::Auto.resolve(1 << 12, (1 << 12) + 1), ConvMethod::Fft);
        assert_eq!(ConvMethod::Direct.resolve(1 << 20, 1 << 20), ConvMethod::Direct);
    }
}
