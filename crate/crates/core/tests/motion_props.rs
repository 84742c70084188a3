mod oracles;

use handsign::imaging::{BinaryImage, GrayImage};
use handsign::motiongate::{motion_parameter, MotionGate, ThresholdRule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binary(w: usize, h: usize) -> impl Strategy<Value = BinaryImage> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |d| BinaryImage::new(w, h, d).unwrap())
}

fn triple() -> impl Strategy<Value = (BinaryImage, BinaryImage, BinaryImage)> {
    (1usize..20, 1usize..20).prop_flat_map(|(w, h)| (binary(w, h), binary(w, h), binary(w, h)))
}

proptest! {
    #[test]
    fn symmetric_in_b_and_c((a, b, c) in triple()) {
        prop_assert_eq!(motion_parameter(&a, &b, &c).unwrap(), motion_parameter(&a, &c, &b).unwrap());
    }

    #[test]
    fn identical_frames_have_no_motion((a, _, _) in triple()) {
        prop_assert_eq!(motion_parameter(&a, &a, &a).unwrap(), 0);
    }

    #[test]
    fn bounded_by_pixel_count((a, b, c) in triple()) {
        prop_assert!(motion_parameter(&a, &b, &c).unwrap() <= a.width() * a.height());
    }
}

/// Frames drawn as small perturbations of a few base scenes, so that both
/// static and moving windows occur.
fn random_sequence(rng: &mut ChaCha8Rng, w: usize, h: usize, len: usize) -> Vec<Vec<u8>> {
    let mut base: Vec<u8> = (0..w * h).map(|_| if rng.gen_bool(0.5) { 200 } else { 30 }).collect();
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.2) {
                base = (0..w * h).map(|_| if rng.gen_bool(0.5) { 200 } else { 30 }).collect();
            }
            let limit = w * h / 100;
            let flips = rng.gen_range(0..=2 * limit);
            let mut f = base.clone();
            for _ in 0..flips {
                let i = rng.gen_range(0..w * h);
                f[i] = 230 - f[i];
            }
            f
        })
        .collect()
}

#[test]
fn gate_matches_brute_force_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fired = 0;
    for _ in 0..40 {
        let (w, h) = (rng.gen_range(10..=40), rng.gen_range(10..=40));
        let frames = random_sequence(&mut rng, w, h, 50);
        let expected = oracles::brute_gate(&frames, w, h, 128);
        let mut gate = MotionGate::new(w, h, ThresholdRule::Fixed(128));
        for (f, want) in frames.iter().zip(&expected) {
            let got = gate.push_frame(&GrayImage::new(w, h, f.clone()).unwrap()).unwrap();
            assert_eq!(got.map(|g| g.into_data()), want.map(|i| frames[i].clone()));
            fired += usize::from(want.is_some());
        }
    }
    assert!(fired > 10, "fixture should exercise captures, got {fired}");
}

#[test]
fn otsu_session_fixes_threshold_on_first_frame() {
    let first = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 10 } else { 250 }).unwrap();
    let mut gate = MotionGate::new(10, 10, ThresholdRule::OtsuSession);
    gate.push_frame(&first).unwrap();
    assert_eq!(gate.session_threshold(), Some(10));
    let brighter = GrayImage::filled(10, 10, 100).unwrap();
    gate.push_frame(&brighter).unwrap();
    assert_eq!(gate.session_threshold(), Some(10));
    gate.reset();
    assert_eq!(gate.session_threshold(), None);
}
