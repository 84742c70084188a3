//! Frame sources behind one "next frame" contract.
//!
//! IP cameras follow the IP Webcam URL layout: `<endpoint>/shot.jpg` for a
//! single JPEG and `<endpoint>/video` for a `multipart/x-mixed-replace`
//! MJPEG stream. Paced sources never yield two frames closer than their
//! cadence (1/3 s by default).

use std::io::Read;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::imaging::GrayImage;
use crate::store::{decode_image, decode_jpeg, is_image_path};
use crate::synth::SyntheticScene;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("cannot connect to {endpoint}: {reason}")]
    ConnectFailed { endpoint: String, reason: String },
    #[error("bad endpoint {0:?}")]
    BadEndpoint(String),
    #[error("end of stream")]
    EndOfStream,
    #[error("cannot decode frame: {0}")]
    DecodeError(String),
    #[error("no frame within {0:?}")]
    Timeout(Duration),
    #[error("malformed multipart stream: {0}")]
    MalformedStream(String),
    #[error("multipart part header exceeds {0} bytes")]
    HeaderTooLarge(usize),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, AcquisitionError>;

pub const DEFAULT_CADENCE: Duration = Duration::from_nanos(333_333_333);
pub const MAX_PART_HEADER: usize = 8 * 1024;
const UNPACED_TIMEOUT: Duration = Duration::from_secs(5);
const MAX_SNAPSHOT_BYTES: u64 = 32 * 1024 * 1024;

// ---------------------------------------------------------------- MJPEG

/// Incremental `multipart/x-mixed-replace` splitter.
///
/// A part is released only once the delimiter that follows it has arrived,
/// so a truncated trailing part is never yielded. `Content-Length`, when
/// present, fixes the body length so payload bytes are never scanned for
/// the boundary.
#[derive(Debug, Clone)]
pub struct MjpegParser {
    delimiter: Vec<u8>,
    buf: Vec<u8>,
    started: bool,
    closed: bool,
}

impl MjpegParser {
    /// `boundary` is the token from the `Content-Type` header, without the
    /// leading `--`.
    pub fn new(boundary: &str) -> Self {
        let token = boundary.trim().trim_matches('"');
        let token = token.strip_prefix("--").unwrap_or(token);
        let mut delimiter = b"--".to_vec();
        delimiter.extend_from_slice(token.as_bytes());
        Self { delimiter, buf: Vec::new(), started: false, closed: false }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Feeds bytes and returns every part completed by them.
    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
        self.buf.extend_from_slice(bytes);
        let mut parts = Vec::new();
        if self.closed {
            self.buf.clear();
            return Ok(parts);
        }
        if !self.started {
            match find(&self.buf, &self.delimiter) {
                Some(at) => {
                    self.buf.drain(..at);
                    self.started = true;
                }
                None => {
                    if self.buf.len() > MAX_PART_HEADER + self.delimiter.len() {
                        return Err(AcquisitionError::MalformedStream("boundary not found".into()));
                    }
                    return Ok(parts);
                }
            }
        }
        // Invariant: buf starts with a delimiter.
        loop {
            let after = self.delimiter.len();
            if self.buf.len() < after + 2 {
                break;
            }
            if &self.buf[after..after + 2] == b"--" {
                self.closed = true;
                self.buf.clear();
                break;
            }
            let Some(line_end) = find(&self.buf[after..], b"\n").map(|i| after + i + 1) else {
                if self.buf.len() > after + MAX_PART_HEADER {
                    return Err(AcquisitionError::HeaderTooLarge(MAX_PART_HEADER));
                }
                break;
            };
            let Some((header_len, body_start)) = header_end(&self.buf[line_end..]) else {
                if self.buf.len() - line_end > MAX_PART_HEADER {
                    return Err(AcquisitionError::HeaderTooLarge(MAX_PART_HEADER));
                }
                break;
            };
            if header_len > MAX_PART_HEADER {
                return Err(AcquisitionError::HeaderTooLarge(MAX_PART_HEADER));
            }
            let headers = &self.buf[line_end..line_end + header_len];
            let body_start = line_end + body_start;
            let next = match content_length(headers) {
                Some(len) => {
                    let body_end = body_start + len;
                    if self.buf.len() < body_end {
                        break;
                    }
                    let mut at = body_end;
                    // Optional CRLF / LF between body and delimiter.
                    for sep in [&b"\r\n"[..], b"\n"] {
                        if self.buf[at..].starts_with(sep) {
                            at += sep.len();
                            break;
                        }
                    }
                    if self.buf.len() < at + self.delimiter.len() {
                        break;
                    }
                    if !self.buf[at..].starts_with(&self.delimiter) {
                        return Err(AcquisitionError::MalformedStream(
                            "part body does not end at a boundary".into(),
                        ));
                    }
                    Some((body_end, at))
                }
                None => find(&self.buf[body_start..], &self.delimiter).map(|i| {
                    let at = body_start + i;
                    let mut end = at;
                    if end > body_start && self.buf[end - 1] == b'\n' {
                        end -= 1;
                        if end > body_start && self.buf[end - 1] == b'\r' {
                            end -= 1;
                        }
                    }
                    (end, at)
                }),
            };
            let Some((body_end, next_delim)) = next else {
                break;
            };
            parts.push(self.buf[body_start..body_end].to_vec());
            self.buf.drain(..next_delim);
        }
        Ok(parts)
    }

    /// Signals end of input. Errors if data arrived but no boundary did.
    pub fn finish(&mut self) -> Result<()> {
        if !self.started && self.buf.iter().any(|b| !b.is_ascii_whitespace()) {
            return Err(AcquisitionError::MalformedStream("boundary not found".into()));
        }
        self.buf.clear();
        Ok(())
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// `(header bytes, offset of body)` for a header block ending in a blank line.
fn header_end(buf: &[u8]) -> Option<(usize, usize)> {
    // A part with no headers starts with the blank line itself.
    if buf.starts_with(b"\r\n") {
        return Some((0, 2));
    }
    if buf.starts_with(b"\n") {
        return Some((0, 1));
    }
    let crlf = find(buf, b"\r\n\r\n").map(|i| (i, i + 4));
    let lf = find(buf, b"\n\n").map(|i| (i, i + 2));
    match (crlf, lf) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (a, b) => a.or(b),
    }
}

fn content_length(headers: &[u8]) -> Option<usize> {
    String::from_utf8_lossy(headers).lines().find_map(|line| {
        let (name, value) = line.split_once(':')?;
        name.trim().eq_ignore_ascii_case("content-length").then(|| value.trim().parse().ok())?
    })
}

/// Splits a complete multipart body. An unterminated trailing part is dropped.
pub fn parse_mjpeg(stream: &[u8], boundary: &str) -> Result<Vec<Vec<u8>>> {
    let mut parser = MjpegParser::new(boundary);
    let parts = parser.push(stream)?;
    parser.finish()?;
    Ok(parts)
}

/// One multipart part as an MJPEG server would send it.
pub fn write_mjpeg_part(out: &mut Vec<u8>, boundary: &str, payload: &[u8]) {
    out.extend_from_slice(
        format!("--{boundary}\r\nContent-Type: image/jpeg\r\nContent-Length: {}\r\n\r\n", payload.len())
            .as_bytes(),
    );
    out.extend_from_slice(payload);
    out.extend_from_slice(b"\r\n");
}

pub fn write_mjpeg_end(out: &mut Vec<u8>, boundary: &str) {
    out.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
}

/// Extracts `boundary=` from a `multipart/x-mixed-replace` content type.
pub fn boundary_from_content_type(content_type: &str) -> Option<String> {
    content_type.split(';').find_map(|p| {
        let (k, v) = p.split_once('=')?;
        k.trim().eq_ignore_ascii_case("boundary").then(|| v.trim().trim_matches('"').to_string())
    })
}

// ---------------------------------------------------------------- sources

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    Every(Duration),
    /// Frames as fast as the producer yields them.
    Unpaced,
}

impl Pacing {
    pub fn from_seconds(secs: f64) -> std::result::Result<Self, String> {
        if secs > 0.0 && secs.is_finite() {
            Ok(Pacing::Every(Duration::from_secs_f64(secs)))
        } else {
            Err(format!("cadence must be positive, got {secs}"))
        }
    }

    fn read_timeout(self) -> Duration {
        match self {
            Pacing::Every(d) => (d * 5).max(Duration::from_millis(50)),
            Pacing::Unpaced => UNPACED_TIMEOUT,
        }
    }
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing::Every(DEFAULT_CADENCE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CameraMode {
    /// Repeated GET of `<endpoint>/shot.jpg`.
    #[default]
    Snapshot,
    /// One long GET of `<endpoint>/video`.
    Mjpeg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    IpCamera { endpoint: String, mode: CameraMode },
    Directory(PathBuf),
    Synthetic(SyntheticScene),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSourceSpec {
    pub kind: SourceKind,
    pub pacing: Pacing,
}

impl FrameSourceSpec {
    /// `http://...` is a camera, `synthetic:...` a generated scene,
    /// anything else a directory.
    pub fn parse(text: &str, mode: CameraMode, pacing: Pacing) -> Result<Self> {
        let kind = if text.starts_with("http://") || text.starts_with("https://") {
            SourceKind::IpCamera { endpoint: text.to_string(), mode }
        } else if let Some(rest) = text.strip_prefix("synthetic:") {
            SourceKind::Synthetic(rest.parse().map_err(AcquisitionError::BadEndpoint)?)
        } else {
            SourceKind::Directory(PathBuf::from(text))
        };
        Ok(Self { kind, pacing })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: GrayImage,
    pub sequence_no: u64,
    /// Seconds since the source was opened.
    pub timestamp: f64,
}

trait Producer: Send {
    fn produce(&mut self) -> Result<GrayImage>;
}

/// An open frame source. Owned by one thread at a time.
pub struct FrameSource {
    producer: Box<dyn Producer>,
    pacing: Pacing,
    started: Instant,
    next_seq: u64,
    last: Option<Instant>,
}

impl std::fmt::Debug for FrameSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSource")
            .field("pacing", &self.pacing)
            .field("next_seq", &self.next_seq)
            .finish_non_exhaustive()
    }
}

pub fn open_source(spec: &FrameSourceSpec) -> Result<FrameSource> {
    let producer: Box<dyn Producer> = match &spec.kind {
        SourceKind::IpCamera { endpoint, mode } => {
            let base = parse_endpoint(endpoint)?;
            let timeout = spec.pacing.read_timeout();
            match mode {
                CameraMode::Snapshot => Box::new(SnapshotProducer::connect(base, timeout)?),
                CameraMode::Mjpeg => Box::new(MjpegProducer::connect(base, timeout)?),
            }
        }
        SourceKind::Directory(dir) => Box::new(DirectoryProducer::open(dir)?),
        SourceKind::Synthetic(scene) => Box::new(SyntheticProducer { frames: scene.frames().into_iter() }),
    };
    Ok(FrameSource { producer, pacing: spec.pacing, started: Instant::now(), next_seq: 0, last: None })
}

impl FrameSource {
    pub fn pacing(&self) -> Pacing {
        self.pacing
    }

    /// Waits out the cadence, then fetches and decodes one frame. Failed
    /// fetches do not consume a sequence number.
    pub fn next_frame(&mut self) -> Result<Frame> {
        if let (Pacing::Every(cadence), Some(last)) = (self.pacing, self.last) {
            let due = last + cadence;
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        let image = self.producer.produce()?;
        let now = Instant::now();
        self.last = Some(now);
        let frame = Frame {
            image,
            sequence_no: self.next_seq,
            timestamp: now.duration_since(self.started).as_secs_f64(),
        };
        self.next_seq += 1;
        Ok(frame)
    }
}

impl Iterator for FrameSource {
    type Item = Result<Frame>;

    /// Ends at [`AcquisitionError::EndOfStream`]; other errors are yielded.
    fn next(&mut self) -> Option<Self::Item> {
        match self.next_frame() {
            Err(AcquisitionError::EndOfStream) => None,
            other => Some(other),
        }
    }
}

fn parse_endpoint(endpoint: &str) -> Result<url::Url> {
    let url = url::Url::parse(endpoint).map_err(|e| AcquisitionError::BadEndpoint(format!("{endpoint}: {e}")))?;
    if url.scheme() != "http" || url.host_str().is_none() {
        return Err(AcquisitionError::BadEndpoint(format!("{endpoint}: only plain http endpoints are supported")));
    }
    Ok(url)
}

fn endpoint_path(base: &url::Url, leaf: &str) -> String {
    format!("{}/{leaf}", base.as_str().trim_end_matches('/'))
}

fn map_http_error(endpoint: &str, timeout: Duration, err: ureq::Error) -> AcquisitionError {
    match err {
        ureq::Error::Status(code, _) => AcquisitionError::ConnectFailed {
            endpoint: endpoint.to_string(),
            reason: format!("HTTP status {code}"),
        },
        ureq::Error::Transport(t) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<std::io::Error>())
                .is_some_and(|e| matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
            if timed_out {
                AcquisitionError::Timeout(timeout)
            } else {
                {
                let mut reason = t.kind().to_string();
                if let Some(src) = std::error::Error::source(&t) {
                    reason = format!("{reason}: {src}");
                }
                AcquisitionError::ConnectFailed { endpoint: endpoint.to_string(), reason }
            }
            }
        }
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::AgentBuilder::new().timeout_connect(timeout).timeout_read(timeout).build()
}

struct SnapshotProducer {
    agent: ureq::Agent,
    url: String,
    timeout: Duration,
    pending: Option<Vec<u8>>,
}

impl SnapshotProducer {
    fn connect(base: url::Url, timeout: Duration) -> Result<Self> {
        let mut p = Self { agent: agent(timeout), url: endpoint_path(&base, "shot.jpg"), timeout, pending: None };
        p.pending = Some(p.fetch()?);
        Ok(p)
    }

    fn fetch_once(&self) -> Result<Vec<u8>> {
        let resp = self.agent.get(&self.url).call().map_err(|e| map_http_error(&self.url, self.timeout, e))?;
        let mut body = Vec::new();
        resp.into_reader().take(MAX_SNAPSHOT_BYTES).read_to_end(&mut body).map_err(|e| {
            if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                AcquisitionError::Timeout(self.timeout)
            } else {
                AcquisitionError::Io(e.to_string())
            }
        })?;
        Ok(body)
    }

    /// One retry on failure.
    fn fetch(&self) -> Result<Vec<u8>> {
        self.fetch_once().or_else(|_| self.fetch_once())
    }
}

impl Producer for SnapshotProducer {
    fn produce(&mut self) -> Result<GrayImage> {
        let body = match self.pending.take() {
            Some(b) => b,
            None => self.fetch()?,
        };
        decode_jpeg(&body).map_err(AcquisitionError::DecodeError)
    }
}

#[derive(Default)]
struct Latest {
    payload: Option<Vec<u8>>,
    generation: u64,
    finished: Option<AcquisitionError>,
}

/// Reads the stream on a background thread and keeps only the newest part.
struct MjpegProducer {
    shared: Arc<(Mutex<Latest>, Condvar)>,
    seen: u64,
    timeout: Duration,
}

impl MjpegProducer {
    fn connect(base: url::Url, timeout: Duration) -> Result<Self> {
        let url = endpoint_path(&base, "video");
        let resp = agent(timeout).get(&url).call().map_err(|e| map_http_error(&url, timeout, e))?;
        let content_type = resp.header("Content-Type").unwrap_or_default().to_string();
        let boundary = boundary_from_content_type(&content_type).ok_or_else(|| {
            AcquisitionError::MalformedStream(format!("no boundary in content type {content_type:?}"))
        })?;
        let mut reader = resp.into_reader();
        let shared = Arc::new((Mutex::new(Latest::default()), Condvar::new()));
        let worker = Arc::clone(&shared);
        thread::spawn(move || {
            let mut parser = MjpegParser::new(&boundary);
            let mut chunk = vec![0u8; 64 * 1024];
            let end = loop {
                let n = match reader.read(&mut chunk) {
                    Ok(0) => break AcquisitionError::EndOfStream,
                    Ok(n) => n,
                    Err(e) => break AcquisitionError::Io(e.to_string()),
                };
                match parser.push(&chunk[..n]) {
                    Ok(parts) => {
                        if let Some(last) = parts.into_iter().last() {
                            let (lock, cvar) = &*worker;
                            let mut latest = lock.lock().expect("mjpeg state poisoned");
                            latest.payload = Some(last);
                            latest.generation += 1;
                            cvar.notify_all();
                        }
                        if parser.is_closed() {
                            break AcquisitionError::EndOfStream;
                        }
                    }
                    Err(e) => break e,
                }
            };
            let (lock, cvar) = &*worker;
            lock.lock().expect("mjpeg state poisoned").finished = Some(end);
            cvar.notify_all();
        });
        Ok(Self { shared, seen: 0, timeout })
    }
}

impl Producer for MjpegProducer {
    fn produce(&mut self) -> Result<GrayImage> {
        let (lock, cvar) = &*self.shared;
        let guard = lock.lock().expect("mjpeg state poisoned");
        let (mut latest, _) = cvar
            .wait_timeout_while(guard, self.timeout, |l| l.generation == self.seen && l.finished.is_none())
            .expect("mjpeg state poisoned");
        if latest.generation == self.seen {
            return Err(latest.finished.clone().unwrap_or(AcquisitionError::Timeout(self.timeout)));
        }
        self.seen = latest.generation;
        let payload = latest.payload.take().expect("new generation carries a payload");
        drop(latest);
        decode_jpeg(&payload).map_err(AcquisitionError::DecodeError)
    }
}

struct DirectoryProducer {
    files: std::vec::IntoIter<PathBuf>,
}

impl DirectoryProducer {
    fn open(dir: &std::path::Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(AcquisitionError::BadEndpoint(format!("{} is not a directory", dir.display())));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| AcquisitionError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        Ok(Self { files: files.into_iter() })
    }
}

impl Producer for DirectoryProducer {
    fn produce(&mut self) -> Result<GrayImage> {
        let path = self.files.next().ok_or(AcquisitionError::EndOfStream)?;
        let bytes = std::fs::read(&path).map_err(|e| AcquisitionError::Io(format!("{}: {e}", path.display())))?;
        decode_image(&bytes).map_err(|e| AcquisitionError::DecodeError(format!("{}: {e}", path.display())))
    }
}

struct SyntheticProducer {
    frames: std::vec::IntoIter<GrayImage>,
}

impl Producer for SyntheticProducer {
    fn produce(&mut self) -> Result<GrayImage> {
        self.frames.next().ok_or(AcquisitionError::EndOfStream)
    }
}
