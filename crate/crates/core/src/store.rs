//! Gesture database, image codecs and model persistence.
//!
//! Database layout is `<root>/<LABEL>/<name>.pgm|.jpg`. Model files are
//! little-endian throughout:
//!
//! ```text
//! "HSRM" | version u32 = 1 | backend u8 (1 = PCA, 2 = NN) | width u32 | height u32
//! | payload | CRC-32 u32 over every preceding byte
//! ```
//!
//! Real arrays are written as a `u64` element count followed by `f64`
//! values; strings as a `u32` byte count followed by UTF-8.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::{binarize_otsu, resize, to_grayscale, BinaryImage, GrayImage};
use crate::nn::{Mlp, NnModel};
use crate::pca::PcaModel;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("PGM pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported PGM maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("cannot decode {}: {reason}", path.display())]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("no images under {}", .0.display())]
    EmptyDatabase(PathBuf),
    #[error("invalid label directory {0:?}")]
    InvalidLabel(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a model file")]
    BadModelMagic,
    #[error("model checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("unknown model file version {0}")]
    UnknownVersion(u32),
    #[error("unknown model backend tag {0}")]
    UnknownBackend(u8),
    #[error("model payload corrupt: {0}")]
    CorruptModel(String),
    #[error("invalid profile {0:?}; expected webcam, android or WxH")]
    BadProfile(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- PGM

/// Parses a binary (P5) PGM with maxval 255. `#` comments in the header
/// are skipped.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(StoreError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        let start_len = pos;
        skip_space_and_comments(bytes, &mut pos);
        if pos == start_len && i == 0 {
            return Err(StoreError::BadHeader("missing whitespace after magic".into()));
        }
        let digits_start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if digits_start == pos {
            return Err(StoreError::BadHeader(format!("expected a number at byte {pos}")));
        }
        let text = std::str::from_utf8(&bytes[digits_start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| StoreError::BadHeader(format!("number {text} out of range")))?;
    }
    let [width, height, maxval] = fields;
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(StoreError::BadHeader("missing whitespace before pixel data".into())),
    }
    if width == 0 || height == 0 {
        return Err(StoreError::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(StoreError::UnsupportedMaxval(maxval));
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| StoreError::BadHeader("dimensions overflow".into()))?;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(StoreError::TruncatedData { expected, found: data.len() });
    }
    GrayImage::new(width as usize, height as usize, data[..expected].to_vec())
        .map_err(|e| StoreError::BadHeader(e.to_string()))
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

/// Decodes PGM or JPEG, chosen by content.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.starts_with(b"P5") {
        return read_pgm(bytes).map_err(|e| e.to_string());
    }
    decode_jpeg(bytes)
}

/// The decoder pads missing scan data with grey, so a payload cut short is
/// caught here by requiring the end-of-image marker (trailing padding allowed).
pub fn decode_jpeg(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let end = bytes.iter().rposition(|&b| !(b == 0 || b.is_ascii_whitespace())).map_or(0, |i| i + 1);
    if !bytes.starts_with(&[0xFF, 0xD8]) || end < 4 || bytes[end - 2..end] != [0xFF, 0xD9] {
        return Err("truncated or malformed JPEG (missing SOI/EOI marker)".into());
    }
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Jpeg)
        .map_err(|e| e.to_string())?
        .to_rgb8();
    let (w, h) = img.dimensions();
    to_grayscale(w as usize, h as usize, img.as_raw()).map_err(|e| e.to_string())
}

pub fn read_image_file(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| StoreError::UnreadableImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_image(&bytes).map_err(|reason| StoreError::UnreadableImage { path: path.to_path_buf(), reason })
}

pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "jpg" | "jpeg")
    )
}

// ---------------------------------------------------------------- profiles

/// Canonical image geometry. Webcam is 60 wide by 80 high.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Webcam,
    Android,
    Custom(usize, usize),
}

impl Profile {
    pub fn dims(self) -> (usize, usize) {
        match self {
            Profile::Webcam => (60, 80),
            Profile::Android => (100, 100),
            Profile::Custom(w, h) => (w, h),
        }
    }

    pub fn from_dims(dims: (usize, usize)) -> Self {
        match dims {
            (60, 80) => Profile::Webcam,
            (100, 100) => Profile::Android,
            (w, h) => Profile::Custom(w, h),
        }
    }
}

impl FromStr for Profile {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "webcam" => Ok(Profile::Webcam),
            "android" => Ok(Profile::Android),
            other => {
                let bad = || StoreError::BadProfile(s.to_string());
                let (w, h) = other.split_once('x').ok_or_else(bad)?;
                let w: usize = w.parse().map_err(|_| bad())?;
                let h: usize = h.parse().map_err(|_| bad())?;
                if w < 3 || h < 3 {
                    return Err(bad());
                }
                Ok(Profile::Custom(w, h))
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Webcam => f.write_str("webcam"),
            Profile::Android => f.write_str("android"),
            Profile::Custom(w, h) => write!(f, "{w}x{h}"),
        }
    }
}

// ---------------------------------------------------------------- database

#[derive(Debug, Clone, PartialEq)]
pub struct GestureEntry {
    pub label: String,
    pub path: PathBuf,
    /// Resized to the profile.
    pub gray: GrayImage,
    /// `gray` after Otsu binarisation.
    pub binary: BinaryImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureDb {
    pub root: PathBuf,
    pub profile: Profile,
    pub entries: Vec<GestureEntry>,
}

impl GestureDb {
    /// Distinct labels, sorted.
    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = self.entries.iter().map(|e| e.label.clone()).collect();
        l.dedup();
        l
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Label directories are uppercase ASCII letters, digits, `_` or `-`.
pub fn is_valid_label(name: &str) -> bool {
    !name.is_empty()
        && name.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Loads every image under `root/<LABEL>/`, resized to the profile and
/// Otsu-binarised, sorted by `(label, filename)`. Hidden entries are skipped.
pub fn load_db(root: &Path, profile: Profile) -> Result<GestureDb> {
    let (w, h) = profile.dims();
    let mut entries = Vec::new();
    for (label, dir) in sorted_children(root)? {
        if label.starts_with('.') || !dir.is_dir() {
            continue;
        }
        if !is_valid_label(&label) {
            return Err(StoreError::InvalidLabel(label));
        }
        for (_, path) in sorted_children(&dir)? {
            if !path.is_file() || !is_image_path(&path) {
                continue;
            }
            let img = read_image_file(&path)?;
            let gray = resize(&img, w, h).expect("profile dims are nonzero");
            let binary = binarize_otsu(&gray);
            entries.push(GestureEntry { label: label.clone(), path, gray, binary });
        }
    }
    if entries.is_empty() {
        return Err(StoreError::EmptyDatabase(root.to_path_buf()));
    }
    Ok(GestureDb { root: root.to_path_buf(), profile, entries })
}

fn sorted_children(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Writes `<root>/<label>/<name>.pgm`, creating directories as needed.
pub fn write_db_image(root: &Path, label: &str, name: &str, img: &GrayImage) -> Result<PathBuf> {
    let dir = root.join(label);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(format!("{name}.pgm"));
    fs::write(&path, write_pgm(img)).map_err(io_err(&path))?;
    Ok(path)
}

// ---------------------------------------------------------------- models

pub const MODEL_MAGIC: &[u8; 4] = b"HSRM";
pub const MODEL_VERSION: u32 = 1;
const BACKEND_PCA: u8 = 1;
const BACKEND_NN: u8 = 2;
const HEADER_LEN: usize = 4 + 4 + 1 + 4 + 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pca(PcaModel),
    Nn(NnModel),
}

/// A classifier with the image geometry it was trained at.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub dims: (usize, usize),
    pub model: Model,
}

impl SavedModel {
    pub fn backend_name(&self) -> &'static str {
        match self.model {
            Model::Pca(_) => "pca",
            Model::Nn(_) => "nn",
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.model {
            Model::Pca(m) => m.label_set(),
            Model::Nn(m) => m.label_order.clone(),
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn reals(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn matrix(&mut self, rows: &[Vec<f64>]) {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        self.reals(&flat);
    }
    fn strings(&mut self, v: &[String]) {
        self.u64(v.len() as u64);
        for s in v {
            self.u32(s.len() as u32);
            self.0.extend_from_slice(s.as_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| StoreError::CorruptModel(format!("read past end at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| StoreError::CorruptModel(format!("count {n}")))
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.count()?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| StoreError::CorruptModel("array length".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn reals_exact(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let v = self.reals()?;
        if v.len() != expected {
            return Err(StoreError::CorruptModel(format!("{what}: {} values, expected {expected}", v.len())));
        }
        Ok(v)
    }
    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<f64>>> {
        let flat = self.reals_exact(rows * cols, what)?;
        Ok(if cols == 0 { vec![Vec::new(); rows] } else { flat.chunks(cols).map(<[f64]>::to_vec).collect() })
    }
    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.count()?;
        (0..n)
            .map(|_| {
                let len = self.u32()? as usize;
                String::from_utf8(self.take(len)?.to_vec())
                    .map_err(|_| StoreError::CorruptModel("label is not UTF-8".into()))
            })
            .collect()
    }
}

pub fn encode_model(saved: &SavedModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.u8(match saved.model {
        Model::Pca(_) => BACKEND_PCA,
        Model::Nn(_) => BACKEND_NN,
    });
    w.u32(saved.dims.0 as u32);
    w.u32(saved.dims.1 as u32);
    match &saved.model {
        Model::Pca(m) => {
            w.u64(m.feature_len() as u64);
            w.u64(m.components() as u64);
            w.u64(m.labels.len() as u64);
            w.reals(&m.mean);
            w.matrix(&m.basis);
            w.reals(&m.eigenvalues);
            w.matrix(&m.projections);
            w.strings(&m.labels);
        }
        Model::Nn(m) => {
            w.u64(m.token_count as u64);
            w.u64(m.net.input_width as u64);
            w.u64(m.net.hidden_width as u64);
            w.u64(m.net.output_width as u64);
            w.reals(&m.net.w1);
            w.reals(&m.net.b1);
            w.reals(&m.net.w2);
            w.reals(&m.net.b2);
            w.strings(&m.label_order);
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    if bytes.len() < HEADER_LEN + 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(StoreError::BadModelMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(StoreError::UnknownVersion(version));
    }
    let backend = r.u8()?;
    if backend != BACKEND_PCA && backend != BACKEND_NN {
        return Err(StoreError::UnknownBackend(backend));
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(StoreError::ChecksumMismatch { stored, computed });
    }
    let mut r = Reader { bytes: &bytes[..body_len], pos: r.pos };
    let dims = (r.u32()? as usize, r.u32()? as usize);

    let model = if backend == BACKEND_PCA {
        let dim = r.count()?;
        let k = r.count()?;
        let n = r.count()?;
        let mean = r.reals_exact(dim, "mean")?;
        let basis = r.matrix(k, dim, "basis")?;
        let eigenvalues = r.reals_exact(k, "eigenvalues")?;
        let projections = r.matrix(n, k, "projections")?;
        let labels = r.strings()?;
        if labels.len() != n {
            return Err(StoreError::CorruptModel(format!("{} labels for {n} exemplars", labels.len())));
        }
        Model::Pca(PcaModel { mean, basis, eigenvalues, projections, labels, dims })
    } else {
        let token_count = r.count()?;
        let input = r.count()?;
        let hidden = r.count()?;
        let output = r.count()?;
        if input != 2 * token_count {
            return Err(StoreError::CorruptModel(format!("input width {input} for {token_count} tokens")));
        }
        let net = Mlp {
            input_width: input,
            hidden_width: hidden,
            output_width: output,
            w1: r.reals_exact(hidden * input, "w1")?,
            b1: r.reals_exact(hidden, "b1")?,
            w2: r.reals_exact(output * hidden, "w2")?,
            b2: r.reals_exact(output, "b2")?,
        };
        let label_order = r.strings()?;
        if label_order.len() != output {
            return Err(StoreError::CorruptModel(format!("{} labels for {output} outputs", label_order.len())));
        }
        Model::Nn(NnModel { net, token_count, label_order })
    };
    if r.pos != r.bytes.len() {
        return Err(StoreError::CorruptModel(format!("{} trailing bytes", r.bytes.len() - r.pos)));
    }
    Ok(SavedModel { dims, model })
}

pub fn save_model(saved: &SavedModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(saved)).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    decode_model(&fs::read(path).map_err(io_err(path))?)
}
