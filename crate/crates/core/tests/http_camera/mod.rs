//! Minimal IP-camera stand-in on a loopback port.
//! Shared with the CLI acceptance suite via `#[path]`.
#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

pub const BOUNDARY: &str = "frame";

#[derive(Clone)]
pub struct CameraScript {
    /// Body served at `/shot.jpg`.
    pub shot: Vec<u8>,
    /// Parts served at `/video`, with a pause before each.
    pub video: Vec<Vec<u8>>,
    pub video_gap: Duration,
}

pub struct TestCamera {
    pub endpoint: String,
    pub shot_requests: Arc<Mutex<Vec<Instant>>>,
}

pub fn serve(script: CameraScript) -> TestCamera {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let shot_requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&shot_requests);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let script = script.clone();
            let log = Arc::clone(&log);
            thread::spawn(move || handle(stream, &script, &log));
        }
    });
    TestCamera { endpoint, shot_requests }
}

fn read_request_path(stream: &mut TcpStream) -> Option<String> {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    while !buf.ends_with(b"\r\n\r\n") {
        if stream.read(&mut byte).ok()? == 0 {
            return None;
        }
        buf.push(byte[0]);
    }
    let text = String::from_utf8_lossy(&buf);
    text.split_whitespace().nth(1).map(str::to_string)
}

fn handle(mut stream: TcpStream, script: &CameraScript, log: &Mutex<Vec<Instant>>) {
    let Some(path) = read_request_path(&mut stream) else { return };
    match path.as_str() {
        "/shot.jpg" => {
            log.lock().unwrap().push(Instant::now());
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: image/jpeg\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                script.shot.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&script.shot);
        }
        "/video" => {
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: multipart/x-mixed-replace; boundary={BOUNDARY}\r\nConnection: close\r\n\r\n"
            );
            let _ = stream.write_all(head.as_bytes());
            for part in &script.video {
                thread::sleep(script.video_gap);
                let mut out = Vec::new();
                handsign::acquisition::write_mjpeg_part(&mut out, BOUNDARY, part);
                if stream.write_all(&out).is_err() {
                    return;
                }
            }
            let mut out = Vec::new();
            handsign::acquisition::write_mjpeg_end(&mut out, BOUNDARY);
            let _ = stream.write_all(&out);
        }
        _ => {
            let _ = stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        }
    }
    let _ = stream.flush();
}

/// Encodes a gray raster as a baseline JPEG.
pub fn jpeg(img: &handsign::imaging::GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, 95)
        .encode(img.data(), img.width() as u32, img.height() as u32, image::ExtendedColorType::L8)
        .unwrap();
    out
}

/// A loopback port with nothing listening.
pub fn dead_endpoint() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}
