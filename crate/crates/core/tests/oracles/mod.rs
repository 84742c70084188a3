//! Independent reference implementations used as test oracles.
//! Shared with the CLI acceptance suite via `#[path]`.
#![allow(dead_code)]

use rand::Rng;

/// Naive 3x3 correlation with replicate padding; returns (gx, gy) as integers.
pub fn naive_sobel(w: usize, h: usize, px: &[u8]) -> (Vec<i64>, Vec<i64>) {
    let kx = [[-1i64, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    let ky = [[-1i64, -2, -1], [0, 0, 0], [1, 2, 1]];
    let mut gx = vec![0; w * h];
    let mut gy = vec![0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0, 0);
            for (j, (rx, ry)) in kx.iter().zip(&ky).enumerate() {
                for i in 0..3 {
                    let xx = (x as i64 + i as i64 - 1).max(0).min(w as i64 - 1) as usize;
                    let yy = (y as i64 + j as i64 - 1).max(0).min(h as i64 - 1) as usize;
                    let v = px[yy * w + xx] as i64;
                    sx += rx[i] * v;
                    sy += ry[i] * v;
                }
            }
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
        }
    }
    (gx, gy)
}

/// Tries every threshold t in 0..=254 with floating-point class statistics
/// and returns the smallest t within 1e-12 relative of the best variance.
/// Degenerate (single-valued) images return their minimum value.
pub fn exhaustive_otsu(px: &[u8]) -> u8 {
    let n = px.len() as f64;
    let mut scores = Vec::new();
    for t in 0..=254u8 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = {
            let lo: Vec<f64> = px.iter().filter(|&&v| v <= t).map(|&v| f64::from(v)).collect();
            let hi: Vec<f64> = px.iter().filter(|&&v| v > t).map(|&v| f64::from(v)).collect();
            (lo, hi)
        };
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let w0 = lo.len() as f64 / n;
        let w1 = hi.len() as f64 / n;
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        scores.push((t, w0 * w1 * (m0 - m1) * (m0 - m1)));
    }
    let Some(best) = scores.iter().map(|s| s.1).reduce(f64::max) else {
        return *px.iter().min().expect("nonempty image");
    };
    scores.iter().find(|s| s.1 >= best * (1.0 - 1e-12)).expect("best exists").0
}

/// The gate, restated: binarise with `v > t`, slide a three-frame window,
/// fire when `|(A^B)|(A^C)| < floor(w*h/100)`, clear on fire.
/// Returns, per pushed frame, the index of the captured frame if any.
pub fn brute_gate(frames: &[Vec<u8>], w: usize, h: usize, t: u8) -> Vec<Option<usize>> {
    let limit = w * h / 100;
    let mut window: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for i in 0..frames.len() {
        window.push(i);
        if window.len() < 3 {
            out.push(None);
            continue;
        }
        let (a, b, c) = (&frames[window[0]], &frames[window[1]], &frames[window[2]]);
        let mut count = 0;
        for p in 0..w * h {
            let (ba, bb, bc) = (a[p] > t, b[p] > t, c[p] > t);
            if ba != bb || ba != bc {
                count += 1;
            }
        }
        if count < limit {
            out.push(Some(window[0]));
            window.clear();
        } else {
            window.remove(0);
            out.push(None);
        }
    }
    out
}

/// Label of the training vector nearest to `probe` in raw feature space.
pub fn nearest_neighbor<'a>(train: &'a [Vec<f64>], labels: &'a [String], probe: &[f64]) -> &'a str {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in train.iter().enumerate() {
        let d: f64 = v.iter().zip(probe).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    &labels[best.1]
}

/// Forward pass and MSE of a sigmoid MLP, written from the layer equations.
pub fn mlp_mse(
    (input, hidden, output): (usize, usize, usize),
    params: &[f64],
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> f64 {
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let (w1, rest) = params.split_at(hidden * input);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(output * hidden);
    let mut sum = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let h: Vec<f64> = (0..hidden)
            .map(|j| sig((0..input).map(|i| w1[j * input + i] * x[i]).sum::<f64>() + b1[j]))
            .collect();
        for o in 0..output {
            let y = sig((0..hidden).map(|j| w2[o * hidden + j] * h[j]).sum::<f64>() + b2[o]);
            sum += (y - t[o]) * (y - t[o]);
        }
    }
    sum / (inputs.len() * output) as f64
}

/// Central differences of [`mlp_mse`] with step `eps`.
pub fn numeric_gradient(
    shape: (usize, usize, usize),
    params: &[f64],
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    eps: f64,
) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = mlp_mse(shape, &p, inputs, targets);
            p[i] = orig - eps;
            let down = mlp_mse(shape, &p, inputs, targets);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Random symmetric matrix with entries in [-1, 1], row-major.
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..=1.0);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}
