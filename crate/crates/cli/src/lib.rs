//! `handsign` command line: capture, train, recognize, watch, evaluate.
//!
//! Exit codes: 0 success, 2 input or I/O error, 3 output error,
//! 4 training did not converge.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, TrySendError};
use std::thread;

use clap::{Parser, Subcommand};
use handsign::acquisition::{open_source, AcquisitionError, CameraMode, FrameSourceSpec, Pacing, SourceKind};
use handsign::imaging::{binarize_otsu, resize};
use handsign::motiongate::{MotionGate, ThresholdRule};
use handsign::nn::{NnError, TrainParams};
use handsign::pca::PcaError;
use handsign::pipeline::{classify_image, evaluate, train_from_db, Backend, PipelineConfig, PipelineError};
use handsign::store::{is_valid_label, load_db, load_model, save_model, write_db_image, Profile};
use handsign::synth::{generate_corpus, split_corpus, write_corpus, CorpusParams};
use handsign::RankedMatches;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUTPUT: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "handsign", version, about = "Static hand-sign recognition from camera frames")]
pub struct Cli {
    /// Image geometry: webcam (60x80), android (100x100) or WxH.
    /// Defaults to webcam, or to the model's geometry when a model is given.
    #[arg(long, global = true)]
    pub profile: Option<Profile>,
    /// Classifier backend: pca or nn.
    #[arg(long, global = true, default_value = "pca")]
    pub backend: Backend,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Contour tokens per shape (nn backend).
    #[arg(long, global = true, default_value_t = handsign::tokenizer::DEFAULT_TOKEN_COUNT)]
    pub tokens: usize,
    /// Machine-readable output where supported.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Ring the terminal bell on each recognition.
    #[arg(long, global = true)]
    pub bell: bool,
    #[arg(long, global = true)]
    pub no_timestamps: bool,
    /// Frame source: http://host:port, a directory, or synthetic:static[:LABEL[:N]] / synthetic:moving[:N].
    #[arg(long, global = true)]
    pub source: Option<String>,
    /// Seconds between acquisitions; 0 reads as fast as the source allows.
    #[arg(long, global = true, default_value_t = 1.0 / 3.0)]
    pub cadence: f64,
    /// Read the camera's MJPEG stream instead of polling snapshots.
    #[arg(long, global = true)]
    pub mjpeg: bool,
    /// PCA components to keep (default min(n, 20)).
    #[arg(long, global = true)]
    pub pca_k: Option<usize>,
    #[arg(long, global = true, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, global = true, default_value_t = 0.3)]
    pub learning_rate: f64,
    #[arg(long, global = true, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, global = true, default_value_t = 0.01)]
    pub target_mse: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store motion-free frames from --source under <out>/<label>/.
    Capture {
        label: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Give up after this many frames.
        #[arg(long, default_value_t = 300)]
        max_frames: usize,
    },
    /// Train a model from a gesture database.
    Train {
        db: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Classify one image.
    Recognize { model: PathBuf, image: PathBuf },
    /// Recognize every motion-free frame from --source.
    Watch {
        model: PathBuf,
        /// Stop after this many frames (default: until the source ends).
        #[arg(long)]
        max_frames: Option<usize>,
    },
    /// Per-label accuracy over a test database.
    Evaluate { model: PathBuf, test_db: PathBuf },
    /// Write a synthetic gesture database.
    SynthDb {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Split into <out>/train and <out>/test with this many training samples per label.
        #[arg(long)]
        split: Option<usize>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure { code, message: message.to_string() }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Capture { label, out: root, count, max_frames } => {
            cmd_capture(cli, label, root, *count, *max_frames, out, err)
        }
        Command::Train { db, out: model } => cmd_train(cli, db, model, out, err),
        Command::Recognize { model, image } => cmd_recognize(cli, model, image, out),
        Command::Watch { model, max_frames } => cmd_watch(cli, model, *max_frames, out, err),
        Command::Evaluate { model, test_db } => cmd_evaluate(cli, model, test_db, out),
        Command::SynthDb { out: root, samples, split } => cmd_synth_db(cli, root, *samples, *split, out),
    }
}

impl Cli {
    pub fn config(&self) -> Result<PipelineConfig, String> {
        let cadence = if self.cadence == 0.0 { Pacing::Unpaced } else { Pacing::from_seconds(self.cadence)? };
        Ok(PipelineConfig {
            profile: self.profile.unwrap_or(Profile::Webcam),
            backend: self.backend,
            token_count: self.tokens,
            pca_k: self.pca_k,
            nn: TrainParams {
                learning_rate: self.learning_rate,
                max_epochs: self.epochs,
                target_mse: self.target_mse,
                hidden_width: self.hidden,
                seed: self.seed,
            },
            source: self.source.clone(),
            cadence,
        })
    }

    fn source_spec(&self) -> Result<FrameSourceSpec, Failure> {
        let config = self.config().map_err(|e| fail(EXIT_INPUT, e))?;
        let text = self.source.as_deref().ok_or_else(|| fail(EXIT_INPUT, "--source is required"))?;
        let mode = if self.mjpeg { CameraMode::Mjpeg } else { CameraMode::Snapshot };
        FrameSourceSpec::parse(text, mode, config.cadence).map_err(|e| fail(EXIT_INPUT, e))
    }

    fn bell(&self, out: &mut dyn Write) -> CmdResult {
        if self.bell {
            write!(out, "\x07").map_err(output_error)?;
        }
        Ok(())
    }
}

fn output_error(e: std::io::Error) -> Failure {
    fail(EXIT_OUTPUT, format!("cannot write output: {e}"))
}

fn cmd_capture(
    cli: &Cli,
    label: &str,
    root: &Path,
    count: usize,
    max_frames: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if !is_valid_label(label) {
        return Err(fail(EXIT_INPUT, format!("invalid label {label:?}; use A-Z, 0-9, '_' or '-'")));
    }
    let spec = cli.source_spec()?;
    let (w, h) = cli.profile.unwrap_or(Profile::Webcam).dims();
    let mut source = open_source(&spec).map_err(|e| fail(EXIT_INPUT, e))?;
    let mut gate = MotionGate::new(w, h, ThresholdRule::OtsuSession);
    let mut next_index = next_free_index(&root.join(label));
    let mut captured = 0;
    let mut seen = 0;
    while captured < count && seen < max_frames {
        let frame = match source.next_frame() {
            Ok(f) => f,
            Err(AcquisitionError::EndOfStream) => break,
            Err(e) => {
                let _ = writeln!(err, "warning: {e}");
                seen += 1;
                continue;
            }
        };
        seen += 1;
        let small = resize(&frame.image, w, h).map_err(|e| fail(EXIT_INPUT, e))?;
        if let Some(still) = gate.push_frame(&small).map_err(|e| fail(EXIT_INPUT, e))? {
            let binary = binarize_otsu(&still).to_gray();
            let path = write_db_image(root, label, &format!("{next_index:03}"), &binary)
                .map_err(|e| fail(EXIT_OUTPUT, e))?;
            next_index += 1;
            captured += 1;
            writeln!(out, "{}", path.display()).map_err(output_error)?;
        }
    }
    if captured < count {
        let _ = writeln!(err, "timeout: captured {captured} of {count} after {seen} frames without a still scene");
    }
    Ok(())
}

/// One past the largest numeric file stem in `dir`, or 0.
fn next_free_index(dir: &Path) -> usize {
    fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str()?.parse::<usize>().ok())
        .map(|n| n + 1)
        .max()
        .unwrap_or(0)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let code = match &e {
        PipelineError::Pca(PcaError::Linalg(_)) | PipelineError::Nn(NnError::NonFiniteLoss(_)) => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    };
    fail(code, e)
}

fn cmd_train(cli: &Cli, db_root: &Path, model_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let config = cli.config().map_err(|e| fail(EXIT_INPUT, e))?;
    let db = load_db(db_root, config.profile).map_err(|e| fail(EXIT_INPUT, e))?;
    let (saved, summary) = train_from_db(&db, &config).map_err(pipeline_failure)?;
    writeln!(out, "config: {config}").map_err(output_error)?;
    writeln!(out, "{summary}").map_err(output_error)?;
    if !summary.converged() {
        let _ = writeln!(err, "model not written: mse did not fall below {}", config.nn.target_mse);
        return Err(fail(EXIT_NO_CONVERGENCE, "training did not converge"));
    }
    save_model(&saved, model_path).map_err(|e| fail(EXIT_OUTPUT, e))?;
    writeln!(out, "labels: {}", saved.labels().join(" ")).map_err(output_error)?;
    writeln!(out, "wrote {}", model_path.display()).map_err(output_error)?;
    Ok(())
}

fn load_model_for(cli: &Cli, path: &Path) -> Result<handsign::SavedModel, Failure> {
    let saved = load_model(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    if let Some(p) = cli.profile {
        if p.dims() != saved.dims {
            return Err(fail(
                EXIT_INPUT,
                format!("profile {p} does not match model profile {}", Profile::from_dims(saved.dims)),
            ));
        }
    }
    Ok(saved)
}

fn print_ranking(out: &mut dyn Write, ranked: &RankedMatches) -> CmdResult {
    for m in ranked.entries() {
        writeln!(out, "{} {:.9}%", m.label, m.percentage).map_err(output_error)?;
    }
    writeln!(out, "{}", ranked.top().label).map_err(output_error)
}

fn cmd_recognize(cli: &Cli, model_path: &Path, image_path: &Path, out: &mut dyn Write) -> CmdResult {
    let saved = load_model_for(cli, model_path)?;
    let img = handsign::store::read_image_file(image_path).map_err(|e| fail(EXIT_INPUT, e))?;
    let ranked = classify_image(&saved, &img).map_err(|e| fail(EXIT_INPUT, e))?;
    print_ranking(out, &ranked)?;
    cli.bell(out)
}

/// Frames handed from the acquisition thread to the recognizer.
const IN_FLIGHT: usize = 3;

fn cmd_watch(
    cli: &Cli,
    model_path: &Path,
    max_frames: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let saved = load_model_for(cli, model_path)?;
    let spec = cli.source_spec()?;
    // Live cameras drop frames when the recognizer falls behind; finite
    // sources wait so that every frame is seen.
    let live = matches!(spec.kind, SourceKind::IpCamera { .. });
    let mut source = open_source(&spec).map_err(|e| fail(EXIT_INPUT, e))?;
    let (tx, rx) = mpsc::sync_channel(IN_FLIGHT);
    let producer = thread::spawn(move || {
        let mut produced = 0;
        while max_frames.is_none_or(|m| produced < m) {
            let item = source.next_frame();
            if matches!(item, Err(AcquisitionError::EndOfStream)) {
                break;
            }
            produced += 1;
            let sent = if live {
                !matches!(tx.try_send(item), Err(TrySendError::Disconnected(_)))
            } else {
                tx.send(item).is_ok()
            };
            if !sent {
                break;
            }
        }
    });

    let (w, h) = saved.dims;
    let mut gate = MotionGate::new(w, h, ThresholdRule::OtsuSession);
    let mut result = Ok(());
    for item in rx {
        let frame = match item {
            Ok(f) => f,
            Err(e) => {
                let _ = writeln!(err, "warning: {e}");
                continue;
            }
        };
        let small = match resize(&frame.image, w, h) {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(err, "warning: frame {}: {e}", frame.sequence_no);
                continue;
            }
        };
        let Some(still) = gate.push_frame(&small).expect("frames are resized to the gate") else { continue };
        let ranked = match classify_image(&saved, &still) {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "warning: frame {}: {e}", frame.sequence_no);
                continue;
            }
        };
        let top = ranked.top();
        let line = if cli.no_timestamps {
            format!("{} {:.9}%", top.label, top.percentage)
        } else {
            format!("[{:.3}s] {} {:.9}%", frame.timestamp, top.label, top.percentage)
        };
        if let Err(e) = writeln!(out, "{line}").map_err(output_error).and_then(|()| cli.bell(out)) {
            result = Err(e);
            break;
        }
        let _ = out.flush();
    }
    producer.join().expect("acquisition thread panicked");
    result
}

fn cmd_evaluate(cli: &Cli, model_path: &Path, db_root: &Path, out: &mut dyn Write) -> CmdResult {
    let saved = load_model_for(cli, model_path)?;
    let profile = cli.profile.unwrap_or(Profile::from_dims(saved.dims));
    let db = load_db(db_root, profile).map_err(|e| fail(EXIT_INPUT, e))?;
    let report = evaluate(&saved, &db).map_err(|e| fail(EXIT_INPUT, e))?;
    let text = if cli.csv { report.to_csv() } else { report.to_table() };
    write!(out, "{text}").map_err(output_error)
}

fn cmd_synth_db(cli: &Cli, root: &Path, samples: usize, split: Option<usize>, out: &mut dyn Write) -> CmdResult {
    let (width, height) = cli.profile.unwrap_or(Profile::Webcam).dims();
    let corpus = generate_corpus(&CorpusParams {
        width,
        height,
        samples_per_label: samples,
        seed: cli.seed,
        ..CorpusParams::default()
    });
    match split {
        Some(k) => {
            let (train, test) = split_corpus(&corpus, k);
            write_corpus(&root.join("train"), &train).map_err(|e| fail(EXIT_OUTPUT, e))?;
            write_corpus(&root.join("test"), &test).map_err(|e| fail(EXIT_OUTPUT, e))?;
            writeln!(out, "wrote {} training and {} test images under {}", train.len(), test.len(), root.display())
        }
        None => {
            write_corpus(root, &corpus).map_err(|e| fail(EXIT_OUTPUT, e))?;
            writeln!(out, "wrote {} images under {}", corpus.len(), root.display())
        }
    }
    .map_err(output_error)
}
