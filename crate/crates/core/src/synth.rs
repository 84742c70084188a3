//! Synthetic gesture silhouettes.
//!
//! Ten filled shapes standing in for hand poses, drawn light on a dark
//! background. Used for the synthetic frame source, demo
//! databases and end-to-end tests.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::GrayImage;
use crate::store::{write_db_image, StoreError};

/// Labels in the order of the webcam gesture set.
pub const GESTURE_LABELS: [&str; 10] = ["S", "R", "T", "H", "X", "A", "G", "C", "I", "E"];

const BACKGROUND: u8 = 20;
const FOREGROUND: u8 = 220;
/// Shapes are authored in a 60 x 80 frame and scaled to the target.
const BASE_W: f64 = 60.0;
const BASE_H: f64 = 80.0;

#[derive(Debug, Clone, Copy)]
enum Primitive {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Capsule { x0: f64, y0: f64, x1: f64, y1: f64, r: f64 },
    /// Annulus with an opening of `gap` radians centred on +x.
    Arc { cx: f64, cy: f64, inner: f64, outer: f64, gap: f64 },
}

impl Primitive {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Primitive::Ellipse { cx, cy, rx, ry } => {
                let (u, v) = ((x - cx) / rx, (y - cy) / ry);
                u * u + v * v <= 1.0
            }
            Primitive::Capsule { x0, y0, x1, y1, r } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let t = (((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                let (px, py) = (x0 + t * dx - x, y0 + t * dy - y);
                px * px + py * py <= r * r
            }
            Primitive::Arc { cx, cy, inner, outer, gap } => {
                let (dx, dy) = (x - cx, y - cy);
                let d = dx.hypot(dy);
                d >= inner && d <= outer && dy.atan2(dx).abs() >= gap / 2.0
            }
        }
    }
}

fn bar(x0: f64, y0: f64, x1: f64, y1: f64) -> Primitive {
    Primitive::Capsule { x0, y0, x1, y1, r: 7.0 }
}

/// Poses are thick strokes and blobs whose layouts differ by more than the
/// corpus jitter.
fn shape(label: &str) -> Vec<Primitive> {
    match label {
        // closed fist
        "A" => vec![Primitive::Ellipse { cx: 30.0, cy: 44.0, rx: 19.0, ry: 22.0 }],
        // curled hand, open to the right
        "C" => vec![Primitive::Arc { cx: 32.0, cy: 40.0, inner: 12.0, outer: 25.0, gap: 1.8 }],
        // folded fingers over the palm: spine with three bars
        "E" => vec![bar(12.0, 12.0, 12.0, 68.0), bar(12.0, 12.0, 48.0, 12.0), bar(12.0, 40.0, 40.0, 40.0), bar(12.0, 68.0, 48.0, 68.0)],
        // pointing sideways from a low fist
        "G" => vec![bar(8.0, 34.0, 52.0, 34.0), Primitive::Ellipse { cx: 18.0, cy: 56.0, rx: 11.0, ry: 12.0 }],
        // two raised fingers joined by the palm
        "H" => vec![bar(12.0, 10.0, 12.0, 70.0), bar(48.0, 10.0, 48.0, 70.0), bar(12.0, 40.0, 48.0, 40.0)],
        // single raised finger
        "I" => vec![bar(30.0, 8.0, 30.0, 72.0)],
        // thumb and finger at a right angle
        "R" => vec![bar(12.0, 10.0, 12.0, 68.0), bar(12.0, 68.0, 50.0, 68.0)],
        // low flat fist
        "S" => vec![Primitive::Ellipse { cx: 30.0, cy: 60.0, rx: 24.0, ry: 13.0 }],
        // raised finger under a crossing thumb
        "T" => vec![bar(8.0, 12.0, 52.0, 12.0), bar(30.0, 12.0, 30.0, 72.0)],
        // crossed fingers
        "X" => vec![bar(10.0, 10.0, 50.0, 70.0), bar(50.0, 10.0, 10.0, 70.0)],
        _ => vec![Primitive::Ellipse { cx: 30.0, cy: 40.0, rx: 10.0, ry: 10.0 }],
    }
}

/// Renders `label` at `width x height`, shifted by `(dx, dy)` pixels.
pub fn render_gesture(label: &str, width: usize, height: usize, dx: i32, dy: i32) -> GrayImage {
    let prims = shape(label);
    let sx = BASE_W / width as f64;
    let sy = BASE_H / height as f64;
    GrayImage::from_fn(width, height, |x, y| {
        let bx = (x as f64 + 0.5 - f64::from(dx)) * sx;
        let by = (y as f64 + 0.5 - f64::from(dy)) * sy;
        if prims.iter().any(|p| p.contains(bx, by)) {
            FOREGROUND
        } else {
            BACKGROUND
        }
    })
    .expect("nonzero dims")
}

/// Sets `fraction` of the pixels (rounded) to 0 or 255 at random.
pub fn salt_and_pepper(img: &mut GrayImage, fraction: f64, rng: &mut impl Rng) {
    let (w, h) = img.dims();
    let count = (fraction * (w * h) as f64).round() as usize;
    for idx in rand::seq::index::sample(rng, w * h, count) {
        let v = if rng.gen_bool(0.5) { 255 } else { 0 };
        img.set(idx % w, idx / w, v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusParams {
    pub width: usize,
    pub height: usize,
    pub samples_per_label: usize,
    /// Maximum shift, in pixels, in each axis.
    pub max_shift: i32,
    pub noise: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self { width: 60, height: 80, samples_per_label: 10, max_shift: 5, noise: 0.01, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: String,
    pub image: GrayImage,
}

/// Randomly shifted, noisy renders of every gesture, label-major.
pub fn generate_corpus(params: &CorpusParams) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(GESTURE_LABELS.len() * params.samples_per_label);
    for label in GESTURE_LABELS {
        for _ in 0..params.samples_per_label {
            let dx = rng.gen_range(-params.max_shift..=params.max_shift);
            let dy = rng.gen_range(-params.max_shift..=params.max_shift);
            let mut image = render_gesture(label, params.width, params.height, dx, dy);
            salt_and_pepper(&mut image, params.noise, &mut rng);
            out.push(Sample { label: label.to_string(), image });
        }
    }
    out
}

/// First `train_per_label` samples of each label train, the rest test.
pub fn split_corpus(samples: &[Sample], train_per_label: usize) -> (Vec<Sample>, Vec<Sample>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for s in samples {
        let count = match seen.iter_mut().find(|(l, _)| *l == s.label) {
            Some((_, c)) => {
                *c += 1;
                *c
            }
            None => {
                seen.push((&s.label, 1));
                1
            }
        };
        if count <= train_per_label {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    (train, test)
}

/// Writes samples as `<root>/<label>/<nnn>.pgm`.
pub fn write_corpus(root: &Path, samples: &[Sample]) -> Result<(), StoreError> {
    let mut counters: Vec<(String, usize)> = Vec::new();
    for s in samples {
        let idx = match counters.iter_mut().find(|(l, _)| *l == s.label) {
            Some((_, c)) => {
                *c += 1;
                *c
            }
            None => {
                counters.push((s.label.clone(), 0));
                0
            }
        };
        write_db_image(root, &s.label, &format!("{idx:03}"), &s.image)?;
    }
    Ok(())
}

/// Generated frame sequences for the synthetic frame source.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticScene {
    /// The same render of one gesture, every frame.
    Static { label: String, frames: usize, width: usize, height: usize },
    /// A gesture sliding sideways by several pixels per frame.
    Moving { frames: usize, width: usize, height: usize },
    Sequence(Vec<GrayImage>),
}

pub const SCENE_DIMS: (usize, usize) = (120, 160);
const DEFAULT_SCENE_FRAMES: usize = 30;

impl SyntheticScene {
    pub fn frames(&self) -> Vec<GrayImage> {
        match self {
            SyntheticScene::Static { label, frames, width, height } => {
                vec![render_gesture(label, *width, *height, 0, 0); *frames]
            }
            SyntheticScene::Moving { frames, width, height } => (0..*frames)
                .map(|i| {
                    let phase = (i % 8) as i32;
                    let dx = if phase < 4 { phase * 6 - 12 } else { 12 - (phase - 4) * 6 };
                    render_gesture(GESTURE_LABELS[i % GESTURE_LABELS.len()], *width, *height, dx, 0)
                })
                .collect(),
            SyntheticScene::Sequence(frames) => frames.clone(),
        }
    }
}

impl FromStr for SyntheticScene {
    type Err = String;

    /// `static[:LABEL[:FRAMES]]` or `moving[:FRAMES]`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split(':');
        let (width, height) = SCENE_DIMS;
        let frames = |p: Option<&str>| -> Result<usize, String> {
            p.map_or(Ok(DEFAULT_SCENE_FRAMES), |v| v.parse().map_err(|_| format!("bad frame count {v:?}")))
        };
        match parts.next() {
            Some("static") => {
                let label = parts.next().unwrap_or("A").to_string();
                let frames = frames(parts.next())?;
                Ok(SyntheticScene::Static { label, frames, width, height })
            }
            Some("moving") => Ok(SyntheticScene::Moving { frames: frames(parts.next())?, width, height }),
            _ => Err(format!("unknown synthetic scene {s:?}; expected static[:LABEL[:N]] or moving[:N]")),
        }
    }
}
