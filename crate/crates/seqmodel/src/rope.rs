//! Rotary positional embedding.
//!
//! A vector of even length is split into consecutive pairs; pair k is
//! rotated by the angle `α_k · p` with `α_k = base^(−2k/d)`.

use gravview_core::Real;

use crate::SeqError;

pub fn rope_frequencies<T: Real>(dim: usize, base: f64) -> Vec<T> {
    (0..dim / 2).map(|k| T::lit(base.powf(-2.0 * k as f64 / dim as f64))).collect()
}

/// Rotates consecutive pairs of `v` by `freqs[k] · position`.
pub fn rope_pair_rotate<T: Real>(v: &[T], position: i64, freqs: &[T]) -> Result<Vec<T>, SeqError> {
    if !v.len().is_multiple_of(2) {
        return Err(SeqError::OddDimension(v.len()));
    }
    if freqs.len() != v.len() / 2 {
        return Err(SeqError::ShapeMismatch { what: "rope frequencies", expected: v.len() / 2, got: freqs.len() });
    }
    let mut out = v.to_vec();
    rotate_in_place(&mut out, T::lit(position as f64), freqs);
    Ok(out)
}

/// In-place rotation of an even-length slice by a real-valued position.
pub(crate) fn rotate_in_place<T: Real>(v: &mut [T], position: T, freqs: &[T]) {
    for (pair, &f) in v.chunks_exact_mut(2).zip(freqs) {
        let (s, c) = (f * position).sin_cos();
        let (a, b) = (pair[0], pair[1]);
        pair[0] = a * c - b * s;
        pair[1] = a * s + b * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn position_zero_is_identity() {
        let f = rope_frequencies::<f64>(8, 10000.0);
        let v = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 4.0];
        assert_eq!(rope_pair_rotate(&v, 0, &f).unwrap(), v);
    }

    #[test]
    fn rotations_add() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = rope_frequencies::<f64>(16, 10000.0);
        for _ in 0..100 {
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (p, q) = (rng.random_range(-500..500), rng.random_range(-500..500));
            let twice = rope_pair_rotate(&rope_pair_rotate(&v, q, &f).unwrap(), p, &f).unwrap();
            let once = rope_pair_rotate(&v, p + q, &f).unwrap();
            for (a, b) in twice.iter().zip(&once) {
                assert!((a - b).abs() < 1e-9);
            }
            let n0: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let n1: f64 = once.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n0 - n1).abs() < 1e-12);
        }
    }

    #[test]
    fn frequencies_follow_geometric_schedule() {
        let f = rope_frequencies::<f64>(8, 10000.0);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - 0.1).abs() < 1e-15);
        assert!((f[3] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn odd_length_rejected() {
        assert!(matches!(rope_pair_rotate(&[1.0f64, 2.0, 3.0], 1, &[1.0]), Err(SeqError::OddDimension(3))));
    }
}
