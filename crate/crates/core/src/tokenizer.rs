//! Hand-shape tokens.
//!
//! The outer boundary of the dominant blob in an edge map is traced with
//! Moore-neighbour following, resampled to `T` points at equal arc length,
//! and each segment between consecutive points (including the closing one)
//! becomes a unit direction `(cos, sin)`.

use thiserror::Error;

use crate::imaging::BinaryImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenError {
    #[error("no set pixels to trace")]
    NoContour,
    #[error("contour has zero arc length")]
    DegeneratePath,
    #[error("zero-length segment at point {0}")]
    DegenerateSegment(usize),
    #[error("token count must be at least 2, got {0}")]
    InvalidTokenCount(usize),
    #[error("expected {expected} tokens, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, TokenError>;

pub const DEFAULT_TOKEN_COUNT: usize = 32;

/// Closed boundary; consecutive points (and last-to-first) are 8-neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourPath {
    points: Vec<(i32, i32)>,
}

impl ContourPath {
    pub fn new(points: Vec<(i32, i32)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(i32, i32)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Perimeter of the closed polyline.
    pub fn arc_length(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (x0, y0) = self.points[i];
                let (x1, y1) = self.points[(i + 1) % n];
                f64::from(x1 - x0).hypot(f64::from(y1 - y0))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Token {
    pub cos: f64,
    pub sin: f64,
}

impl Token {
    /// Direction of the segment from `p1` to `p2`.
    pub fn between(p1: (f64, f64), p2: (f64, f64)) -> Option<Token> {
        let dx = p2.0 - p1.0;
        let dy = p2.1 - p1.1;
        let h = dx.hypot(dy);
        (h > 0.0).then(|| Token { cos: dx / h, sin: dy / h })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `(cos0, sin0, cos1, sin1, ...)`, length `2 * T`.
    pub fn to_features(&self) -> Vec<f64> {
        self.tokens.iter().flat_map(|t| [t.cos, t.sin]).collect()
    }
}

// Clockwise on screen (y down), starting west.
const NEIGHBORS: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn direction_index(from: (i32, i32), to: (i32, i32)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    NEIGHBORS.iter().position(|&n| n == d).expect("not an 8-neighbour")
}

/// Longest outer boundary among the 8-connected components of `edges`.
/// Ties go to the component whose first pixel comes earliest in scan order.
pub fn trace_contour(edges: &BinaryImage) -> Result<ContourPath> {
    let (w, h) = edges.dims();
    let mut seen = vec![false; w * h];
    let mut best: Option<ContourPath> = None;
    for y in 0..h {
        for x in 0..w {
            if !edges.get(x, y) || seen[y * w + x] {
                continue;
            }
            mark_component(edges, &mut seen, x, y);
            let path = moore_trace(edges, (x as i32, y as i32));
            if best.as_ref().is_none_or(|b| path.len() > b.len()) {
                best = Some(path);
            }
        }
    }
    best.ok_or(TokenError::NoContour)
}

fn mark_component(img: &BinaryImage, seen: &mut [bool], x: usize, y: usize) {
    let (w, h) = img.dims();
    let mut stack = vec![(x, y)];
    seen[y * w + x] = true;
    while let Some((cx, cy)) = stack.pop() {
        for (dx, dy) in NEIGHBORS {
            let nx = cx as i32 + dx;
            let ny = cy as i32 + dy;
            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if img.get(nx, ny) && !seen[ny * w + nx] {
                seen[ny * w + nx] = true;
                stack.push((nx, ny));
            }
        }
    }
}

/// Moore-neighbour boundary following from a component's first scan pixel.
/// Stops on re-entering the start with the same first step (Jacob's criterion).
fn moore_trace(img: &BinaryImage, start: (i32, i32)) -> ContourPath {
    let (w, h) = img.dims();
    let set = |p: (i32, i32)| {
        p.0 >= 0 && p.1 >= 0 && p.0 < w as i32 && p.1 < h as i32 && img.get(p.0 as usize, p.1 as usize)
    };

    let mut points = vec![start];
    let mut current = start;
    // The start is the first pixel of its component in scan order, so its
    // west neighbour is background.
    let mut backtrack = (start.0 - 1, start.1);
    let limit = 4 * w * h + 8;
    loop {
        let from = direction_index(current, backtrack);
        let mut next = None;
        for i in 1..=8 {
            let d = NEIGHBORS[(from + i) % 8];
            let candidate = (current.0 + d.0, current.1 + d.1);
            if set(candidate) {
                let pd = NEIGHBORS[(from + i - 1) % 8];
                next = Some((candidate, (current.0 + pd.0, current.1 + pd.1)));
                break;
            }
        }
        let Some((candidate, back)) = next else {
            break; // isolated pixel
        };
        if current == start && points.len() > 1 && candidate == points[1] {
            break;
        }
        if points.len() >= limit {
            break;
        }
        points.push(candidate);
        backtrack = back;
        current = candidate;
    }
    // The walk ends back on the start pixel; keep it once.
    if points.len() > 1 && points.last() == Some(&start) {
        points.pop();
    }
    ContourPath { points }
}

/// `t` points at equal arc-length spacing along the closed polyline,
/// starting at the path's first point.
pub fn resample(path: &ContourPath, t: usize) -> Result<Vec<(f64, f64)>> {
    if t < 2 {
        return Err(TokenError::InvalidTokenCount(t));
    }
    let pts: Vec<(f64, f64)> =
        path.points.iter().map(|&(x, y)| (f64::from(x), f64::from(y))).collect();
    let total = path.arc_length();
    if pts.len() < 2 || total <= 0.0 {
        return Err(TokenError::DegeneratePath);
    }
    let n = pts.len();
    let step = total / t as f64;
    let mut out = Vec::with_capacity(t);
    let mut seg = 0;
    let mut seg_start = 0.0;
    let seg_len = |i: usize| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        (b.0 - a.0).hypot(b.1 - a.1)
    };
    let mut len = seg_len(0);
    for i in 0..t {
        let target = i as f64 * step;
        while seg + 1 < n && seg_start + len < target {
            seg_start += len;
            seg += 1;
            len = seg_len(seg);
        }
        let (a, b) = (pts[seg], pts[(seg + 1) % n]);
        let f = if len > 0.0 { ((target - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
    }
    Ok(out)
}

/// One token per consecutive pair, closing pair included.
pub fn tokens(points: &[(f64, f64)]) -> Result<TokenSequence> {
    if points.len() < 2 {
        return Err(TokenError::DegeneratePath);
    }
    let n = points.len();
    let tokens = (0..n)
        .map(|i| Token::between(points[i], points[(i + 1) % n]).ok_or(TokenError::DegenerateSegment(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TokenSequence { tokens })
}

/// Edge map to a `t`-token sequence.
pub fn tokenize(edges: &BinaryImage, t: usize) -> Result<TokenSequence> {
    let path = trace_contour(edges)?;
    tokens(&resample(&path, t)?)
}
