//! Raster types and pixel kernels.
//!
//! Everything downstream of acquisition works on [`GrayImage`] (8-bit
//! intensities) or [`BinaryImage`] (one bit per pixel), both stored
//! row-major with `x` = column and `y` = row, origin top-left.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image too small for a 3x3 kernel: {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("invalid edge threshold {0}")]
    InvalidThreshold(f64),
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::DimensionMismatch(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImagingError::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }
}

/// One bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(ImagingError::DimensionMismatch(format!(
                "{} bits for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Renders set pixels as 255 and clear pixels as 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Sobel response. `magnitude[i] == hypot(gx[i], gy[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientImage {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
    magnitude: Vec<f64>,
}

impl GradientImage {
    pub fn from_components(width: usize, height: usize, gx: Vec<f64>, gy: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if gx.len() != n || gy.len() != n {
            return Err(ImagingError::DimensionMismatch(format!(
                "gradient planes of {} and {} values for {width}x{height}",
                gx.len(),
                gy.len()
            )));
        }
        let magnitude = gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect();
        Ok(Self { width, height, gx, gy, magnitude })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

/// Converts interleaved RGB to luma with ITU-R BT.601 weights.
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8]) -> Result<GrayImage> {
    if rgb.len() != 3 * width * height {
        return Err(ImagingError::DimensionMismatch(format!(
            "{} RGB bytes for a {width}x{height} image",
            rgb.len()
        )));
    }
    let data = rgb
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, data)
}

/// Nearest-neighbour resampling.
pub fn resize(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(ImagingError::DimensionMismatch(format!(
            "zero resize target {out_w}x{out_h}"
        )));
    }
    if (out_w, out_h) == img.dims() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let xs: Vec<usize> = (0..out_w).map(|x| x * w / out_w).collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let sy = y * h / out_h;
        let row = &img.data[sy * w..(sy + 1) * w];
        data.extend(xs.iter().map(|&sx| row[sx]));
    }
    GrayImage::new(out_w, out_h, data)
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &img.data {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu's threshold over the 256-bin histogram.
///
/// Pixels `<= t` form the background class, matching [`binarize`]'s strict
/// `>`. Ties go to the smallest `t`. A single-valued image returns that value.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    otsu_from_histogram(&histogram(img))
}

pub(crate) fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t: Option<u8> = None;
    let mut best_var = f64::NEG_INFINITY;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..=255usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        // N^2 * sigma_b^2 = (s0*n1 - s1*n0)^2 / (n0*n1); depends only on the partition.
        let diff = (i128::from(s0) * i128::from(n1) - i128::from(s1) * i128::from(n0)) as f64;
        let var = diff * diff / (n0 as f64 * n1 as f64);
        if var > best_var {
            best_var = var;
            best_t = Some(t as u8);
        }
    }
    // Every split leaves one class empty only when the histogram has a single bin.
    best_t.unwrap_or_else(|| hist.iter().position(|&c| c > 0).unwrap_or(0) as u8)
}

/// `out[i] = img[i] > t`.
pub fn binarize(img: &GrayImage, t: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v > t).collect(),
    }
}

pub fn binarize_otsu(img: &GrayImage) -> BinaryImage {
    binarize(img, otsu_threshold(img))
}

/// Row-major feature vector of 0.0 / 1.0.
pub fn flatten(img: &BinaryImage) -> Vec<f64> {
    img.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

pub const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
pub const SOBEL_Y: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];

/// 3x3 Sobel gradients with replicate-edge padding.
///
/// Kernels are applied in correlation form, so `gx > 0` where intensity
/// grows to the right and `gy > 0` where it grows downward.
pub fn sobel(img: &GrayImage) -> Result<GradientImage> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(ImagingError::ImageTooSmall { width: w, height: h });
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let px = |x: isize, y: isize| -> i32 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        i32::from(img.data[cy * w + cx])
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (p00, p10, p20) = (px(x - 1, y - 1), px(x, y - 1), px(x + 1, y - 1));
            let (p01, p21) = (px(x - 1, y), px(x + 1, y));
            let (p02, p12, p22) = (px(x - 1, y + 1), px(x, y + 1), px(x + 1, y + 1));
            let sx = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
            let sy = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
            let i = y as usize * w + x as usize;
            gx[i] = f64::from(sx);
            gy[i] = f64::from(sy);
        }
    }
    GradientImage::from_components(w, h, gx, gy)
}

/// `out[i] = magnitude[i] > t`. Negative or NaN thresholds are rejected.
pub fn edge_map(grad: &GradientImage, t: f64) -> Result<BinaryImage> {
    if t.is_nan() || t < 0.0 {
        return Err(ImagingError::InvalidThreshold(t));
    }
    Ok(BinaryImage {
        width: grad.width,
        height: grad.height,
        data: grad.magnitude.iter().map(|&m| m > t).collect(),
    })
}

/// Otsu threshold on gradient magnitude, quantised to 256 levels of the
/// image's own maximum and mapped back to magnitude units.
pub fn magnitude_otsu_threshold(grad: &GradientImage) -> f64 {
    let max = grad.max_magnitude();
    if max <= 0.0 {
        return 0.0;
    }
    let mut hist = [0u64; 256];
    for &m in &grad.magnitude {
        hist[quantize_magnitude(m, max) as usize] += 1;
    }
    let t = otsu_from_histogram(&hist);
    // Largest magnitude that still quantises to bin t.
    (f64::from(t) + 0.5) * max / 255.0
}

fn quantize_magnitude(m: f64, max: f64) -> u8 {
    (m / max * 255.0).round().clamp(0.0, 255.0) as u8
}
