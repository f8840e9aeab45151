use eegpipe_core::spectral::{dft_naive, fft, fft_real, ifft, power_spectrum, ComplexSpectrum};
use eegpipe_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b)
}

// textbook summation with angles from f64 products, kept apart from the library
fn reference_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * t) as f64 / n)
                })
                .sum()
        })
        .collect()
}

#[test]
fn naive_dft_matches_reference_summation() {
    for n in [1, 3, 5, 12, 31] {
        let x = random_complex(n, n as u64);
        assert!(rel_l2(&dft_naive(&x).unwrap().values, &reference_dft(&x)) < 1e-12);
    }
}

#[test]
fn hand_evaluated_four_point_transform() {
    let x: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0]
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let want = [
        Complex64::new(10.0, 0.0),
        Complex64::new(-2.0, 2.0),
        Complex64::new(-2.0, 0.0),
        Complex64::new(-2.0, -2.0),
    ];
    for s in [dft_naive(&x).unwrap(), fft(&x).unwrap()] {
        for (a, b) in s.values.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn non_power_of_two_is_rejected() {
    let x = random_complex(3, 0);
    assert!(matches!(fft(&x), Err(Error::NotPowerOfTwo(3))));
    let s = ComplexSpectrum { values: x, n: 3 };
    assert!(matches!(ifft(&s), Err(Error::NotPowerOfTwo(3))));
    assert!(matches!(dft_naive(&[]), Err(Error::EmptyInput)));
}

#[test]
fn all_zero_spectrum_inverts_to_zero() {
    let s = ComplexSpectrum {
        values: vec![Complex64::new(0.0, 0.0); 64],
        n: 64,
    };
    assert!(ifft(&s).unwrap().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn ten_hz_sine_peaks_at_bin_164() {
    let x: Vec<f64> = (0..2500)
        .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 250.0).sin())
        .collect();
    let s = power_spectrum(&x, 250.0).unwrap();
    assert_eq!(s.power.len(), 2049);
    let peak = s
        .power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(peak, 164);
    assert!((s.frequencies_hz[164] - 10.009765625).abs() < 1e-12);
    assert_eq!(*s.frequencies_hz.last().unwrap(), 125.0);
}

#[test]
fn constant_signal_has_no_power() {
    let s = power_spectrum(&[3.5; 300], 100.0).unwrap();
    assert!(s.power.iter().all(|p| p.abs() < 1e-9));
    assert!(power_spectrum(&[1.0], 100.0).is_err());
}

#[test]
fn white_noise_power_matches_variance() {
    use rand_distr::{Distribution, StandardNormal};
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // length already a power of two so padding does not dilute the sum
        let x: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
        let total = power_spectrum(&x, 250.0).unwrap().total_power() / x.len() as f64;
        assert!(
            (total - var).abs() / var < 0.05,
            "seed {seed}: {total} vs {var}"
        );
    }
}

fn pow2() -> impl Strategy<Value = usize> {
    (0u32..=12).prop_map(|e| 1usize << e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_agrees_with_naive(n in pow2(), seed in any::<u64>()) {
        let x = random_complex(n, seed);
        let err = rel_l2(&fft(&x).unwrap().values, &dft_naive(&x).unwrap().values);
        prop_assert!(err < 1e-9, "N={} err={}", n, err);
    }

    #[test]
    fn inverse_recovers_input(n in pow2(), seed in any::<u64>()) {
        let x = random_complex(n, seed);
        let back = ifft(&fft(&x).unwrap()).unwrap();
        let max = x.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(max < 1e-9);
    }

    #[test]
    fn parseval(n in pow2(), seed in any::<u64>()) {
        let x = random_complex(n, seed);
        let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let freq: f64 = fft(&x).unwrap().values.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        prop_assert!((time - freq).abs() / time < 1e-9);
    }

    #[test]
    fn real_input_is_conjugate_symmetric(n in pow2(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = fft_real(&x).unwrap().values;
        for k in 1..n {
            prop_assert!((s[k] - s[n - k].conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn transform_is_linear(n in pow2(), seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let x = random_complex(n, seed);
        let y = random_complex(n, seed ^ 0xabcdef);
        let combo: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let lhs = fft(&combo).unwrap().values;
        let fx = fft(&x).unwrap().values;
        let fy = fft(&y).unwrap().values;
        let rhs: Vec<Complex64> = fx.iter().zip(&fy).map(|(p, q)| p * a + q * b).collect();
        let scale = l2(&rhs).max(1.0);
        let diff: Vec<Complex64> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        prop_assert!(l2(&diff) / scale < 1e-9);
    }

    #[test]
    fn power_spectrum_shape(len in 2usize..3000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = power_spectrum(&x, 250.0).unwrap();
        let m = len.next_power_of_two();
        prop_assert_eq!(s.power.len(), m / 2 + 1);
        prop_assert_eq!(s.frequencies_hz.len(), m / 2 + 1);
        prop_assert!(s.power.iter().all(|&p| p >= 0.0));
        prop_assert!(s.frequencies_hz.windows(2).all(|w| w[0] < w[1]));
    }
}
