//! Linear convolution of nonnegative real sequences.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Products below this size go through the direct O(n·m) loop.
const DIRECT_LIMIT: usize = 1 << 18;

/// Full linear convolution, `out.len() == a.len() + b.len() - 1`.
///
/// Large inputs use an FFT; entries that come back slightly negative from
/// round-off are clamped to zero.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT || a.len().min(b.len()) <= 16 {
        direct(a, b)
    } else {
        fft(a, b)
    }
}

pub fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    // Pack both real inputs into one complex transform.
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(a.get(i).copied().unwrap_or(0.0), b.get(i).copied().unwrap_or(0.0)))
        .collect();
    forward.process(&mut buf);
    let mut prod = vec![Complex::new(0.0, 0.0); size];
    for k in 0..size {
        let z = buf[k];
        let zc = buf[(size - k) % size].conj();
        let fa = (z + zc) * 0.5;
        let fb = (z - zc) * Complex::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inverse.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..len].iter().map(|c| (c.re * scale).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..700).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
        let b: Vec<f64> = (0..900).map(|i| ((i * 13 % 53) as f64) / 53.0).collect();
        let d = direct(&a, &b);
        let f = fft(&a, &b);
        assert_eq!(d.len(), f.len());
        let scale = d.iter().cloned().fold(0.0, f64::max);
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn small_example() {
        assert_eq!(convolve(&[1.0, 2.0], &[3.0, 4.0]), vec![3.0, 10.0, 8.0]);
    }
}
