//! Browser bindings: edge view, contour tokens and recognition of a drawn shape.
//!
//! Canvases hand over RGBA bytes; everything here works on those directly so the
//! same functions are testable natively.

use handsign::imaging::{edge_map, magnitude_otsu_threshold, sobel, to_grayscale, GrayImage};
use handsign::pca::{default_components, train_pca, PcaModel, TrainingSet};
use handsign::pipeline::pca_features;
use handsign::synth::{generate_corpus, render_gesture, CorpusParams};
use handsign::tokenizer::{resample, trace_contour, tokens as to_tokens};
use wasm_bindgen::prelude::*;

const MODEL_DIMS: (usize, usize) = (60, 80);

fn gray_from_rgba(width: usize, height: usize, rgba: &[u8]) -> Result<GrayImage, String> {
    if rgba.len() != width * height * 4 {
        return Err(format!("expected {} RGBA bytes, got {}", width * height * 4, rgba.len()));
    }
    let rgb: Vec<u8> = rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
    to_grayscale(width, height, &rgb).map_err(|e| e.to_string())
}

fn gray_to_rgba(img: &GrayImage) -> Vec<u8> {
    img.data().iter().flat_map(|&v| [v, v, v, 255]).collect()
}

/// Sobel magnitude scaled to 0..=255, with edge pixels above the Otsu
/// threshold tinted red.
#[wasm_bindgen]
pub fn edge_view(width: usize, height: usize, rgba: &[u8]) -> Result<Vec<u8>, String> {
    let img = gray_from_rgba(width, height, rgba)?;
    let grad = sobel(&img).map_err(|e| e.to_string())?;
    let edges = edge_map(&grad, magnitude_otsu_threshold(&grad)).map_err(|e| e.to_string())?;
    let peak = grad.max_magnitude();
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    Ok(grad
        .magnitude()
        .iter()
        .zip(edges.data())
        .flat_map(|(&m, &e)| {
            let v = (m * scale).round() as u8;
            if e {
                [255, v / 2, v / 2, 255]
            } else {
                [v, v, v, 255]
            }
        })
        .collect())
}

/// Traces the drawn shape's outline and returns `count` resampled points
/// followed by their direction tokens, as `[x0, y0, ..., cos0, sin0, ...]`.
#[wasm_bindgen]
pub fn contour_tokens(width: usize, height: usize, rgba: &[u8], count: usize) -> Result<Vec<f64>, String> {
    let img = gray_from_rgba(width, height, rgba)?;
    let grad = sobel(&img).map_err(|e| e.to_string())?;
    let edges = edge_map(&grad, magnitude_otsu_threshold(&grad)).map_err(|e| e.to_string())?;
    let path = trace_contour(&edges).map_err(|e| e.to_string())?;
    let points = resample(&path, count).map_err(|e| e.to_string())?;
    let seq = to_tokens(&points).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = points.iter().flat_map(|&(x, y)| [x, y]).collect();
    out.extend(seq.tokens().iter().flat_map(|t| [t.cos, t.sin]));
    Ok(out)
}

/// Renders a reference gesture as RGBA.
#[wasm_bindgen]
pub fn gesture_sample(label: &str, width: usize, height: usize) -> Vec<u8> {
    gray_to_rgba(&render_gesture(label, width, height, 0, 0))
}

#[wasm_bindgen]
pub fn gesture_labels() -> String {
    handsign::synth::GESTURE_LABELS.join(",")
}

/// PCA recogniser trained on the synthetic gesture set.
#[wasm_bindgen]
pub struct Recognizer {
    model: PcaModel,
}

#[wasm_bindgen]
impl Recognizer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Recognizer, String> {
        let params = CorpusParams { seed, ..CorpusParams::default() };
        let (vectors, labels): (Vec<_>, Vec<_>) = generate_corpus(&params)
            .into_iter()
            .map(|s| (pca_features(&s.image, MODEL_DIMS).expect("corpus images are non-empty"), s.label))
            .unzip();
        let ts = TrainingSet::new(vectors, labels)
            .and_then(|ts| ts.with_dims(MODEL_DIMS.0, MODEL_DIMS.1))
            .map_err(|e| e.to_string())?;
        let k = default_components(ts.len());
        let model = train_pca(&ts, k).map_err(|e| e.to_string())?;
        Ok(Recognizer { model })
    }

    /// Ranked labels, one `label percent` pair per line, best first.
    pub fn classify(&self, width: usize, height: usize, rgba: &[u8]) -> Result<String, String> {
        let img = gray_from_rgba(width, height, rgba)?;
        let features = pca_features(&img, MODEL_DIMS).map_err(|e| e.to_string())?;
        let ranked = self.model.classify(&features).map_err(|e| e.to_string())?;
        Ok(ranked.entries().iter().map(|m| format!("{} {:.2}\n", m.label, m.percentage)).collect())
    }
}
