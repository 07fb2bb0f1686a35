use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streambag::change_detection::Adwin;

fn bit(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    f64::from(u8::from(rng.gen::<f64>() < p))
}

#[test]
fn stationary_streams_rarely_fire() {
    let mut total = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut a = Adwin::<f64>::new(0.002);
        for _ in 0..10_000 {
            let v = bit(&mut rng, 0.5);
            if a.add(v).unwrap() {
                total += 1;
            }
        }
    }
    assert!(total <= 2, "{total} false detections");
}

#[test]
fn abrupt_shift_found_quickly() {
    let mut found = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let mut a = Adwin::<f64>::new(0.002);
        for _ in 0..5000 {
            let v = bit(&mut rng, 0.2);
            a.add(v).unwrap();
        }
        let mut hit = false;
        for _ in 0..1000 {
            let v = bit(&mut rng, 0.8);
            if a.add(v).unwrap() {
                hit = true;
                break;
            }
        }
        found += usize::from(hit);
    }
    assert!(found >= 19, "detected in {found}/20");
}
