use rand::Rng;

/// Poisson(`lambda`) draw by CDF inversion of a single uniform.
pub fn poisson_weight<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    debug_assert!(lambda > 0.0);
    let u: f64 = rng.gen();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u32;
    // the tail beyond 1000 is below f64 resolution for any sensible lambda
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / f64::from(k);
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

/// SplitMix64 finalizer, used to derive independent per-learner seeds.
pub fn mix(base_seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(base_seed ^ splitmix(index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_mass_at_lambda_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| poisson_weight(&mut rng, 1.0) == 0).count();
        let frac = zeros as f64 / n as f64;
        assert!((0.3669..=0.3689).contains(&frac), "{frac}");
    }

    #[test]
    fn mean_at_lambda_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| u64::from(poisson_weight(&mut rng, 6.0))).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 6.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn same_state_same_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = a.clone();
        for _ in 0..100 {
            assert_eq!(poisson_weight(&mut a, 6.0), poisson_weight(&mut b, 6.0));
        }
    }

    #[test]
    fn mixed_seeds_differ() {
        assert_ne!(mix(1, 0), mix(1, 1));
        assert_ne!(mix(1, 0), mix(2, 0));
        assert_eq!(mix(9, 4), mix(9, 4));
    }
}
