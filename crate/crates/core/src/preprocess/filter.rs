use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Recording;

/// Linear-phase FIR kernel with unit DC gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterKernel {
    taps: Vec<f64>,
    cutoff_hz: f64,
    sample_rate_hz: f64,
}

impl FilterKernel {
    pub fn new(taps: Vec<f64>, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel needs an odd tap count, got {}",
                taps.len()
            )));
        }
        let dc: f64 = taps.iter().sum();
        if (dc - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "kernel DC gain {dc} is not 1"
            )));
        }
        if !(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "cutoff and sample rate must be positive".into(),
            ));
        }
        Ok(FilterKernel {
            taps,
            cutoff_hz,
            sample_rate_hz,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Hamming-windowed sinc low-pass, rescaled to unit DC gain.
pub fn design_lowpass(
    cutoff_hz: f64,
    sample_rate_hz: f64,
    num_taps: usize,
) -> Result<FilterKernel> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            sample_rate_hz / 2.0
        )));
    }
    if num_taps < 3 || num_taps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "tap count must be odd and ≥ 3, got {num_taps}"
        )));
    }
    let fc = cutoff_hz / sample_rate_hz;
    let mid = (num_taps - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * i as f64 / (num_taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    FilterKernel::new(taps, cutoff_hz, sample_rate_hz)
}

/// Zero-padded convolution shifted by the group delay so output sample `n`
/// lines up with input sample `n`.
pub fn filter_samples(x: &[f64], kernel: &FilterKernel) -> Vec<f64> {
    let taps = kernel.taps();
    let delay = kernel.group_delay() as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(k, &t)| {
                    let j = i + delay - k as isize;
                    (0..n).contains(&j).then(|| t * x[j as usize])
                })
                .sum()
        })
        .collect()
}

pub fn apply_filter(r: &Recording, kernel: &FilterKernel) -> Result<Recording> {
    if r.sample_rate_hz() != kernel.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            expected: kernel.sample_rate_hz(),
            actual: r.sample_rate_hz(),
        });
    }
    let data = r
        .data()
        .iter()
        .map(|row| filter_samples(row, kernel))
        .collect();
    r.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::channel_names;

    #[test]
    fn design_preconditions() {
        assert!(design_lowpass(125.0, 250.0, 101).is_err());
        assert!(design_lowpass(40.0, 250.0, 100).is_err());
        assert!(design_lowpass(40.0, 250.0, 1).is_err());
        assert!(design_lowpass(0.0, 250.0, 101).is_err());
    }

    #[test]
    fn three_tap_kernel_has_unit_gain() {
        let k = design_lowpass(30.0, 250.0, 3).unwrap();
        assert_eq!(k.taps().len(), 3);
        assert!((k.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k.group_delay(), 1);
    }

    #[test]
    fn kernel_is_symmetric() {
        let k = design_lowpass(40.0, 250.0, 101).unwrap();
        let t = k.taps();
        for i in 0..t.len() {
            assert!((t[i] - t[t.len() - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_kernel_passes_input() {
        let k = FilterKernel::new(vec![0.0, 0.0, 1.0, 0.0, 0.0], 1.0, 250.0).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        assert_eq!(filter_samples(&x, &k), x);
    }

    #[test]
    fn constant_interior_is_preserved() {
        let k = design_lowpass(40.0, 250.0, 31).unwrap();
        let y = filter_samples(&[2.5; 200], &k);
        assert_eq!(y.len(), 200);
        for v in &y[15..185] {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_kernels() {
        assert!(FilterKernel::new(vec![0.5, 0.5], 1.0, 250.0).is_err());
        assert!(FilterKernel::new(vec![0.5, 0.4, 0.0], 1.0, 250.0).is_err());
    }

    #[test]
    fn rate_mismatch() {
        let r = crate::signal::Recording::new(
            500.0,
            channel_names(&["a"]).unwrap(),
            vec![vec![1.0; 10]],
        )
        .unwrap();
        let k = design_lowpass(40.0, 250.0, 11).unwrap();
        assert!(matches!(
            apply_filter(&r, &k),
            Err(Error::SampleRateMismatch { .. })
        ));
    }
}
