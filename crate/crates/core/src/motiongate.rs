//! Three-frame static-scene detector.
//!
//! With binarised frames `A` (oldest), `B`, `C` the motion parameter is
//! `popcount((A ^ B) | (A ^ C))`. `A` counts as static when that is strictly
//! below `floor(M * N / 100)`.

use std::collections::VecDeque;

use crate::imaging::{binarize, otsu_threshold, BinaryImage, GrayImage, ImagingError};

/// How incoming grayscale frames are binarised before XOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    Fixed(u8),
    /// Otsu on the first frame of the session, then held fixed.
    OtsuSession,
}

pub fn motion_parameter(a: &BinaryImage, b: &BinaryImage, c: &BinaryImage) -> Result<usize, ImagingError> {
    if a.dims() != b.dims() || a.dims() != c.dims() {
        return Err(ImagingError::DimensionMismatch(format!(
            "frames {:?}, {:?}, {:?}",
            a.dims(),
            b.dims(),
            c.dims()
        )));
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .filter(|((&a, &b), &c)| (a ^ b) | (a ^ c))
        .count())
}

pub fn static_threshold(width: usize, height: usize) -> usize {
    width * height / 100
}

#[derive(Debug, Clone)]
pub struct MotionGate {
    width: usize,
    height: usize,
    threshold: usize,
    rule: ThresholdRule,
    session_threshold: Option<u8>,
    window: VecDeque<(GrayImage, BinaryImage)>,
}

impl MotionGate {
    pub fn new(width: usize, height: usize, rule: ThresholdRule) -> Self {
        Self {
            width,
            height,
            threshold: static_threshold(width, height),
            rule,
            session_threshold: match rule {
                ThresholdRule::Fixed(t) => Some(t),
                ThresholdRule::OtsuSession => None,
            },
            window: VecDeque::with_capacity(3),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel count a window must stay strictly below to count as static.
    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn session_threshold(&self) -> Option<u8> {
        self.session_threshold
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Clears the window and, for Otsu sessions, the learned threshold.
    pub fn reset(&mut self) {
        self.window.clear();
        if self.rule == ThresholdRule::OtsuSession {
            self.session_threshold = None;
        }
    }

    /// Adds a frame. Once three are held, returns the oldest if the window
    /// is static (and empties the window) or evicts it otherwise.
    pub fn push_frame(&mut self, frame: &GrayImage) -> Result<Option<GrayImage>, ImagingError> {
        if frame.dims() != (self.width, self.height) {
            return Err(ImagingError::DimensionMismatch(format!(
                "frame {:?} for a gate of {:?}",
                frame.dims(),
                (self.width, self.height)
            )));
        }
        let t = *self.session_threshold.get_or_insert_with(|| otsu_threshold(frame));
        self.window.push_back((frame.clone(), binarize(frame, t)));
        if self.window.len() < 3 {
            return Ok(None);
        }
        let motion = motion_parameter(&self.window[0].1, &self.window[1].1, &self.window[2].1)?;
        if motion < self.threshold {
            let (captured, _) = self.window.pop_front().expect("window holds three frames");
            self.window.clear();
            Ok(Some(captured))
        } else {
            self.window.pop_front();
            Ok(None)
        }
    }
}
