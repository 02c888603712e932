//! Algebraic invariants checked on randomly generated inputs.

mod common;

use common::{midpoints, random_hypothesis};
use fourier_density::domain::max_norm;
use fourier_density::fourier::FourierHypothesis;
use fourier_density::lowerbound::{exact_kl, exact_tv, exact_tv_ratio, CheckerboardDensity};
use fourier_density::synthetic::{estimate_tv, registry, tv_hypothesis_to_truth, Bounds, TvMode};
use fourier_density::transform::{pull_back_hypothesis, AffineMap};
use fourier_density::{AffineFrame, Stream, TailBound};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use serde_json::json;

fn tail_kind() -> impl Strategy<Value = TailBound> {
    prop_oneof![
        (0.05f64..5.0).prop_map(TailBound::exponential),
        (0.05f64..5.0).prop_map(TailBound::gaussian),
        (0.05f64..5.0).prop_map(TailBound::bounded),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_inverse_is_antitone(g in tail_kind(), a in 1e-6f64..0.999, b in 1e-6f64..0.999) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g.inverse(lo).unwrap() >= g.inverse(hi).unwrap());
    }

    #[test]
    fn tail_at_its_inverse_is_at_most_eps(g in tail_kind(), eps in 1e-9f64..0.999) {
        let r = g.inverse(eps).unwrap();
        prop_assert!(g.eval(r) <= eps * (1.0 + 1e-12));
    }

    #[test]
    fn parseval_identity(seed in any::<u64>(), d in 1usize..=2, t in 1usize..6) {
        let h = random_hypothesis(d, t, seed, false);
        // the midpoint rule is exact for trigonometric polynomials of degree < n
        let n = 4 * t + 4;
        let g = h.grid_values(n).unwrap();
        let cell = (2.0 / n as f64).powi(d as i32);
        let l2: f64 = g.iter().map(|v| v * v).sum::<f64>() * cell;
        prop_assert!((l2 - h.parseval_norm()).abs() <= 1e-6 * l2.max(1.0));
    }

    #[test]
    fn inversion_round_trip(seed in any::<u64>(), t in 1usize..12) {
        let h = random_hypothesis(1, t, seed, false);
        let n = 2 * t + 8;
        let g = h.grid_values(n).unwrap();
        let z = midpoints(n);
        for (i, xi) in h.freqs().iter().enumerate() {
            let k = xi[0] as f64;
            let back: Complex64 = z
                .iter()
                .zip(&g)
                .map(|(&zj, &u)| u * Complex64::from_polar(1.0, -std::f64::consts::PI * k * zj))
                .sum::<Complex64>()
                * (2.0 / n as f64);
            prop_assert!((back - h.coeffs()[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn grid_and_direct_evaluation_agree(seed in any::<u64>(), t in 1usize..8) {
        let h = random_hypothesis(2, t, seed, true);
        let n = 16;
        let g = h.grid_values(n).unwrap();
        let z = midpoints(n);
        let mut ev = h.evaluator();
        for (r, &a) in z.iter().enumerate() {
            for (c, &b) in z.iter().enumerate() {
                let v = ev.value(&[a, b]);
                prop_assert!(v >= 0.0);
                prop_assert!((v - g[r * n + c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hypothesis_json_round_trips(seed in any::<u64>(), d in 1usize..=2, t in 0usize..4) {
        let h = random_hypothesis(d, t, seed, seed % 2 == 0);
        let frame = AffineFrame::new(vec![0.25; d], 3.5).unwrap();
        let s = h.to_json(Some(&frame)).unwrap();
        let (back, f) = FourierHypothesis::from_json(&s).unwrap();
        prop_assert_eq!(back, h);
        prop_assert_eq!(f.unwrap(), frame);
    }

    #[test]
    fn composed_affine_maps_invert(
        mu in prop::collection::vec(-3.0f64..3.0, 2),
        t in 0.1f64..10.0,
        l in prop::collection::vec(-2.0f64..2.0, 4),
        c in prop::collection::vec(-5.0f64..5.0, 2),
        y in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let det = l[0] * l[3] - l[1] * l[2];
        prop_assume!(det.abs() > 0.1);
        let frame = AffineFrame::new(mu, t).unwrap();
        let m = AffineMap::from_frame(&frame).then(&l, &c).unwrap();
        let mut x = [0.0; 2];
        let mut back = [0.0; 2];
        m.to_original(&y, &mut x);
        m.to_conditioned(&x, &mut back);
        prop_assert!((back[0] - y[0]).abs() < 1e-9 && (back[1] - y[1]).abs() < 1e-9);
        prop_assert!((m.abs_det() - frame.scale().powi(2) * det.abs()).abs() < 1e-9 * m.abs_det());
    }

    #[test]
    fn frame_maps_invert(mu in prop::collection::vec(-10.0f64..10.0, 1..4), t in 0.01f64..100.0, s in 0.0f64..1.0) {
        let f = AffineFrame::new(mu.clone(), t).unwrap();
        let x: Vec<f64> = mu.iter().enumerate().map(|(i, m)| m + s * (i as f64 - 1.0)).collect();
        let y = f.forward_map(&x);
        let mut back = vec![0.0; x.len()];
        f.inverse(&y, &mut back);
        prop_assert!(max_norm(&back.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-9 * (1.0 + max_norm(&x)));
    }

    #[test]
    fn checkerboard_metrics(seed in any::<u64>(), t in 1u64..6) {
        let n = (2 * t) as usize;
        let mut rng = Stream::new(seed).rng();
        let mut a: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let u = CheckerboardDensity::new(1, t, a).unwrap();
        let v = CheckerboardDensity::new(1, t, b).unwrap();
        let total: u64 = (0..n).map(|i| u.numerator(i)).sum();
        prop_assert_eq!(total, u.normalizer());
        prop_assert_eq!(exact_tv(&u, &v).unwrap(), exact_tv(&v, &u).unwrap());
        let (num, den) = exact_tv_ratio(&u, &v).unwrap();
        prop_assert!(num <= n as u64 && den == u.normalizer());
        prop_assert!(exact_kl(&u, &v).unwrap() >= -1e-15);
        prop_assert!(exact_kl(&u, &v).unwrap() <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// ∫|h − f| is the same in original and conditioned coordinates.
    #[test]
    fn affine_tv_invariance(seed in any::<u64>(), mu in -2.0f64..2.0, t in 0.05f64..4.0) {
        let h = random_hypothesis(1, 6, seed, true);
        let frame = AffineFrame::new(vec![mu], t).unwrap();
        let pb = pull_back_hypothesis(h, &frame);
        let f = registry("gaussian", 1, &json!({"sigma": 0.7})).unwrap();
        let conditioned = tv_hypothesis_to_truth(&pb, &f, TvMode::Grid(1 << 14)).unwrap().tv;
        let s = frame.scale();
        let bx = Bounds::new(vec![mu - s], vec![mu + s]).union(&Bounds::new(vec![-9.0], vec![9.0]));
        let original = estimate_tv(&pb, &f, &bx, TvMode::Grid(1 << 14)).unwrap().tv;
        prop_assert!((conditioned - original).abs() < 1e-3, "{} vs {}", conditioned, original);
    }
}
