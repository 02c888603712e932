use fourier_density::fourier::{FourierHypothesis, FrequencySet};
use fourier_density::Stream;
use num_complex::Complex64;
use rand::Rng;

/// Hermitian coefficients with |û| ≤ scale, so u is real.
pub fn random_hypothesis(d: usize, t: usize, seed: u64, clip: bool) -> FourierHypothesis {
    let freqs = FrequencySet::build(d, t).unwrap();
    let mut rng = Stream::new(seed).rng();
    let mut c = vec![Complex64::new(0.0, 0.0); freqs.len()];
    for i in 0..freqs.len() {
        let j = freqs.mirror(i);
        if j < i {
            continue;
        }
        let v = if i == j {
            Complex64::new(rng.random_range(-1.0..1.0), 0.0)
        } else {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        c[i] = v;
        c[j] = v.conj();
    }
    FourierHypothesis::new(freqs, c, clip).unwrap()
}

pub fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|k| -1.0 + (2 * k + 1) as f64 / n as f64).collect()
}
