//! Discrete Fourier transforms and one-sided power spectra.
//!
//! [`dft_naive`] evaluates the transform straight from its definition and is
//! kept as the reference for [`fft`], an iterative radix-2 decimation-in-time
//! kernel that only accepts power-of-two lengths.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub values: Vec<Complex64>,
    /// Number of time-domain samples the spectrum was computed from.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub frequencies_hz: Vec<f64>,
    pub power: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl SpectrumResult {
    /// Frequency of the strongest bin.
    pub fn peak_frequency_hz(&self) -> f64 {
        let (k, _) = self
            .power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &p)| {
                if p > best.1 {
                    (k, p)
                } else {
                    best
                }
            });
        self.frequencies_hz[k]
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// `e^{sign·j2π·num/den}` with the exponent reduced mod `den` first.
fn twiddle(num: usize, den: usize, sign: f64) -> Complex64 {
    let angle = sign * 2.0 * PI * (num % den) as f64 / den as f64;
    Complex64::new(angle.cos(), angle.sin())
}

pub fn dft_naive(x: &[Complex64]) -> Result<ComplexSpectrum> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let values = (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &xn)| xn * twiddle(k * i, n, -1.0))
                .sum()
        })
        .collect();
    Ok(ComplexSpectrum { values, n })
}

fn fft_in_place(buf: &mut [Complex64], sign: f64) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                buf.swap(i, j);
            }
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let w: Vec<Complex64> = (0..half).map(|j| twiddle(j, len, sign)).collect();
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&w) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
    Ok(())
}

pub fn fft(x: &[Complex64]) -> Result<ComplexSpectrum> {
    let mut values = x.to_vec();
    fft_in_place(&mut values, -1.0)?;
    Ok(ComplexSpectrum { values, n: x.len() })
}

pub fn ifft(s: &ComplexSpectrum) -> Result<Vec<Complex64>> {
    let mut out = s.values.clone();
    fft_in_place(&mut out, 1.0)?;
    let scale = 1.0 / out.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

pub fn fft_real(x: &[f64]) -> Result<ComplexSpectrum> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&buf)
}

/// One-sided periodogram: demean, zero-pad to the next power of two `M`,
/// `|X_k|²/M` for `k = 0..=M/2` with bins strictly between DC and Nyquist doubled.
pub fn power_spectrum(x: &[f64], sample_rate_hz: f64) -> Result<SpectrumResult> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "power spectrum needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let m = x.len().next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v - mean;
    }
    fft_in_place(&mut buf, -1.0)?;
    let half = m / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / m as f64;
            if k == 0 || k == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let frequencies_hz = (0..=half)
        .map(|k| k as f64 * sample_rate_hz / m as f64)
        .collect();
    Ok(SpectrumResult {
        frequencies_hz,
        power,
        sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let x = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let s = dft_naive(&x).unwrap();
        assert!(s.values.iter().all(|&v| close(v, c(1.0, 0.0), 1e-15)));
    }

    #[test]
    fn dft_of_constant() {
        let x = vec![c(2.5, 0.0); 12];
        let s = dft_naive(&x).unwrap();
        assert!(close(s.values[0], c(30.0, 0.0), 1e-12));
        assert!(s.values[1..].iter().all(|&v| v.norm() < 1e-12));
    }

    #[test]
    fn dft_of_ramp_by_hand() {
        // X_k = Σ (n+1) e^{-jπkn/2}
        let x = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        let s = dft_naive(&x).unwrap();
        let want = [c(10.0, 0.0), c(-2.0, 2.0), c(-2.0, 0.0), c(-2.0, -2.0)];
        for (g, w) in s.values.iter().zip(want) {
            assert!(close(*g, w, 1e-12), "{g} vs {w}");
        }
        let f = fft(&x).unwrap();
        for (g, w) in f.values.iter().zip(want) {
            assert!(close(*g, w, 1e-12), "{g} vs {w}");
        }
    }

    #[test]
    fn empty_and_bad_lengths() {
        assert!(matches!(dft_naive(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            fft(&[c(1.0, 0.0); 3]),
            Err(Error::NotPowerOfTwo(3))
        ));
        assert!(fft(&[]).is_err());
        let s = ComplexSpectrum {
            values: vec![c(0.0, 0.0); 6],
            n: 6,
        };
        assert!(ifft(&s).is_err());
    }

    #[test]
    fn length_one_is_identity() {
        let x = [c(3.0, -1.0)];
        assert_eq!(fft(&x).unwrap().values, x.to_vec());
        assert_eq!(ifft(&fft(&x).unwrap()).unwrap(), x.to_vec());
    }

    #[test]
    fn inverse_of_constant_spectrum() {
        let n = 16;
        let mut values = vec![c(0.0, 0.0); n];
        values[0] = c(n as f64 * 1.75, 0.0);
        let x = ifft(&ComplexSpectrum { values, n }).unwrap();
        assert!(x.iter().all(|&v| close(v, c(1.75, 0.0), 1e-14)));

        let zeros = ifft(&ComplexSpectrum {
            values: vec![c(0.0, 0.0); n],
            n,
        })
        .unwrap();
        assert!(zeros.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn constant_signal_has_no_power() {
        let s = power_spectrum(&[4.0; 300], 250.0).unwrap();
        assert_eq!(s.power.len(), 257);
        assert!(s.power.iter().all(|&p| p.abs() < 1e-9));
        assert_eq!(s.frequencies_hz[0], 0.0);
        assert_eq!(*s.frequencies_hz.last().unwrap(), 125.0);
    }

    #[test]
    fn spectrum_rejects_degenerate_input() {
        assert!(power_spectrum(&[1.0], 250.0).is_err());
        assert!(power_spectrum(&[], 250.0).is_err());
        assert!(power_spectrum(&[1.0, 2.0], 0.0).is_err());
    }
}
