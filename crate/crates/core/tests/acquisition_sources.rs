mod http_camera;

use std::time::{Duration, Instant};

use handsign::acquisition::{
    open_source, parse_mjpeg, write_mjpeg_end, write_mjpeg_part, AcquisitionError, CameraMode, FrameSourceSpec,
    MjpegParser, Pacing,
};
use handsign::store::write_pgm;
use handsign::synth::render_gesture;
use http_camera::{dead_endpoint, jpeg, serve, CameraScript};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multipart_round_trip(parts in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..2048), 0..=50),
                            chunk in 1usize..4096) {
        let mut stream = Vec::new();
        for p in &parts {
            write_mjpeg_part(&mut stream, "b0undary", p);
        }
        write_mjpeg_end(&mut stream, "b0undary");
        prop_assert_eq!(&parse_mjpeg(&stream, "b0undary").unwrap(), &parts);

        let mut parser = MjpegParser::new("b0undary");
        let mut got = Vec::new();
        for c in stream.chunks(chunk) {
            got.extend(parser.push(c).unwrap());
        }
        parser.finish().unwrap();
        prop_assert_eq!(got, parts);
    }
}

fn spec(endpoint: &str, mode: CameraMode, pacing: Pacing) -> FrameSourceSpec {
    FrameSourceSpec::parse(endpoint, mode, pacing).unwrap()
}

#[test]
fn snapshot_polling_decodes_frames_with_contiguous_sequence() {
    let img = render_gesture("G", 60, 80, 0, 0);
    let cam = serve(CameraScript { shot: jpeg(&img), video: vec![], video_gap: Duration::ZERO });
    let mut src = open_source(&spec(&cam.endpoint, CameraMode::Snapshot, Pacing::Unpaced)).unwrap();
    for i in 0..4 {
        let f = src.next_frame().unwrap();
        assert_eq!(f.sequence_no, i);
        assert_eq!(f.image.dims(), (60, 80));
        let close = f.image.data().iter().zip(img.data()).filter(|(a, b)| a.abs_diff(**b) <= 16).count();
        assert!(close > 60 * 80 * 95 / 100);
    }
}

#[test]
fn snapshot_cadence_is_honoured() {
    let cam = serve(CameraScript {
        shot: jpeg(&render_gesture("A", 32, 32, 0, 0)),
        video: vec![],
        video_gap: Duration::ZERO,
    });
    let mut src = open_source(&spec(&cam.endpoint, CameraMode::Snapshot, Pacing::default())).unwrap();
    let stamps: Vec<f64> = (0..4).map(|_| src.next_frame().unwrap().timestamp).collect();
    for w in stamps.windows(2) {
        assert!(w[1] - w[0] >= 0.9 / 3.0, "frames {:.3}s apart", w[1] - w[0]);
    }
}

#[test]
fn mjpeg_stream_delivers_latest_parts_then_ends() {
    let frames: Vec<Vec<u8>> = ["S", "R", "T"].iter().map(|l| jpeg(&render_gesture(l, 40, 40, 0, 0))).collect();
    let cam = serve(CameraScript { shot: vec![], video: frames, video_gap: Duration::from_millis(150) });
    let mut src = open_source(&spec(&cam.endpoint, CameraMode::Mjpeg, Pacing::Unpaced)).unwrap();
    let mut seqs = Vec::new();
    loop {
        match src.next_frame() {
            Ok(f) => {
                assert_eq!(f.image.dims(), (40, 40));
                seqs.push(f.sequence_no);
            }
            Err(AcquisitionError::EndOfStream) => break,
            Err(e) => panic!("unexpected {e}"),
        }
    }
    assert!(!seqs.is_empty() && seqs.len() <= 3);
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
}

#[test]
fn unreachable_camera_fails_to_connect() {
    let err = open_source(&spec(&dead_endpoint(), CameraMode::Snapshot, Pacing::Unpaced)).unwrap_err();
    assert!(matches!(err, AcquisitionError::ConnectFailed { .. }), "{err:?}");
    let err = open_source(&spec(&dead_endpoint(), CameraMode::Mjpeg, Pacing::Unpaced)).unwrap_err();
    assert!(matches!(err, AcquisitionError::ConnectFailed { .. }), "{err:?}");
}

#[test]
fn truncated_jpeg_is_a_decode_error() {
    let full = jpeg(&render_gesture("C", 60, 80, 0, 0));
    let cam = serve(CameraScript { shot: full[..full.len() / 2].to_vec(), video: vec![], video_gap: Duration::ZERO });
    let mut src = open_source(&spec(&cam.endpoint, CameraMode::Snapshot, Pacing::Unpaced)).unwrap();
    assert!(matches!(src.next_frame(), Err(AcquisitionError::DecodeError(_))));
}

#[test]
fn empty_stream_ends_and_missing_path_fails() {
    let cam = serve(CameraScript { shot: vec![], video: vec![], video_gap: Duration::ZERO });
    let mut src = open_source(&spec(&cam.endpoint, CameraMode::Mjpeg, Pacing::Unpaced)).unwrap();
    assert_eq!(src.next_frame().unwrap_err(), AcquisitionError::EndOfStream);
    let wrong = format!("{}/nothing-here", cam.endpoint);
    let err = open_source(&spec(&wrong, CameraMode::Snapshot, Pacing::Unpaced)).unwrap_err();
    assert!(matches!(err, AcquisitionError::ConnectFailed { .. }), "{err:?}");
}

#[test]
fn directory_source_reads_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for (name, label) in [("b.pgm", "R"), ("a.pgm", "S"), ("c.pgm", "T")] {
        std::fs::write(dir.path().join(name), write_pgm(&render_gesture(label, 30, 40, 0, 0))).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), b"skip me").unwrap();
    let src = open_source(&spec(dir.path().to_str().unwrap(), CameraMode::Snapshot, Pacing::Unpaced)).unwrap();
    let frames: Vec<_> = src.map(Result::unwrap).collect();
    assert_eq!(frames.len(), 3);
    assert_eq!(frames[0].image, render_gesture("S", 30, 40, 0, 0));
    assert_eq!(frames[1].image, render_gesture("R", 30, 40, 0, 0));
    assert_eq!(frames.iter().map(|f| f.sequence_no).collect::<Vec<_>>(), [0, 1, 2]);
}

#[test]
fn synthetic_source_is_paced_and_finite() {
    let pacing = Pacing::Every(Duration::from_millis(40));
    let src = open_source(&spec("synthetic:static:A:4", CameraMode::Snapshot, pacing)).unwrap();
    let start = Instant::now();
    let frames: Vec<_> = src.map(Result::unwrap).collect();
    assert_eq!(frames.len(), 4);
    assert!(start.elapsed() >= Duration::from_millis(3 * 36));
    assert!(matches!(
        FrameSourceSpec::parse("synthetic:wobble", CameraMode::Snapshot, pacing),
        Err(AcquisitionError::BadEndpoint(_))
    ));
}
