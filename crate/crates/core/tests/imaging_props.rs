mod oracles;

use handsign::imaging::{binarize, flatten, histogram, otsu_threshold, resize, sobel, to_grayscale, GrayImage};
use proptest::prelude::*;

fn gray_image(min: usize, max: usize) -> impl Strategy<Value = GrayImage> {
    (min..=max, min..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

/// Clockwise quarter turn of a `w x h` raster.
fn rot90<T: Copy>(w: usize, h: usize, data: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..w {
        for x in 0..h {
            out.push(data[(h - 1 - x) * w + y]);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sobel_matches_naive_convolution(img in gray_image(3, 32)) {
        let g = sobel(&img).unwrap();
        let (gx, gy) = oracles::naive_sobel(img.width(), img.height(), img.data());
        for i in 0..gx.len() {
            prop_assert_eq!(g.gx()[i], gx[i] as f64);
            prop_assert_eq!(g.gy()[i], gy[i] as f64);
            prop_assert_eq!(g.magnitude()[i], ((gx[i] * gx[i] + gy[i] * gy[i]) as f64).sqrt());
        }
    }

    #[test]
    fn sobel_magnitude_commutes_with_rotation(img in gray_image(3, 24), turns in 1usize..4) {
        let (mut w, mut h) = img.dims();
        let mut rotated = img.data().to_vec();
        let mut expected = sobel(&img).unwrap().magnitude().to_vec();
        for _ in 0..turns {
            rotated = rot90(w, h, &rotated);
            expected = rot90(w, h, &expected);
            std::mem::swap(&mut w, &mut h);
        }
        let got = sobel(&GrayImage::new(w, h, rotated).unwrap()).unwrap();
        for (a, b) in got.magnitude().iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn otsu_matches_exhaustive_search(img in gray_image(1, 24)) {
        prop_assert_eq!(otsu_threshold(&img), oracles::exhaustive_otsu(img.data()));
    }

    #[test]
    fn otsu_on_few_levels(levels in prop::collection::vec(any::<u8>(), 1..4), n in 4usize..200, seed in any::<u64>()) {
        let data: Vec<u8> = (0..n).map(|i| levels[(i as u64).wrapping_mul(seed | 1) as usize % levels.len()]).collect();
        let img = GrayImage::new(n, 1, data).unwrap();
        prop_assert_eq!(otsu_threshold(&img), oracles::exhaustive_otsu(img.data()));
    }

    #[test]
    fn binarized_features_are_zero_or_one(img in gray_image(1, 32), t in any::<u8>()) {
        let b = binarize(&img, t);
        prop_assert!(flatten(&b).iter().all(|&v| v == 0.0 || v == 1.0));
        let expected = img.data().iter().filter(|&&v| v > t).count();
        prop_assert_eq!(b.count_ones(), expected);
    }

    #[test]
    fn resize_to_same_dims_is_identity(img in gray_image(1, 32)) {
        let (w, h) = img.dims();
        prop_assert_eq!(resize(&img, w, h).unwrap(), img);
    }

    #[test]
    fn histogram_counts_every_pixel(img in gray_image(1, 32)) {
        prop_assert_eq!(histogram(&img).iter().sum::<u64>(), (img.width() * img.height()) as u64);
    }

    #[test]
    fn grayscale_of_gray_rgb_is_identity(v in prop::collection::vec(any::<u8>(), 1..64)) {
        let rgb: Vec<u8> = v.iter().flat_map(|&p| [p, p, p]).collect();
        let g = to_grayscale(v.len(), 1, &rgb).unwrap();
        prop_assert_eq!(g.data(), &v[..]);
    }
}
