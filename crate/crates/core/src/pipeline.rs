//! Per-backend preprocessing, training from a database, and evaluation.
//!
//! PCA features: resize, Otsu binarise, flatten.
//! NN features: resize, Sobel, edge map at the Otsu threshold of the
//! magnitude, contour trace, resample, tokens.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::acquisition::Pacing;
use crate::imaging::{
    binarize_otsu, edge_map, flatten, magnitude_otsu_threshold, resize, sobel, GrayImage, ImagingError,
};
use crate::nn::{train_nn, NnError, TrainParams, TrainReport};
use crate::pca::{default_components, train_pca, PcaError, TrainingSet};
use crate::ranking::RankedMatches;
use crate::store::{GestureDb, Model, Profile, SavedModel};
use crate::tokenizer::{tokenize, TokenError, TokenSequence, DEFAULT_TOKEN_COUNT};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("database profile {db} does not match model profile {model}")]
    ProfileMismatch { db: Profile, model: Profile },
    #[error("no training sample produced a contour")]
    NoUsableSamples,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Pca,
    Nn,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pca" => Ok(Backend::Pca),
            "nn" => Ok(Backend::Nn),
            other => Err(format!("unknown backend {other:?}; expected pca or nn")),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Pca => "pca",
            Backend::Nn => "nn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub backend: Backend,
    pub token_count: usize,
    /// `None` keeps `min(n, 20)` components.
    pub pca_k: Option<usize>,
    pub nn: TrainParams,
    pub source: Option<String>,
    pub cadence: Pacing,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Webcam,
            backend: Backend::Pca,
            token_count: DEFAULT_TOKEN_COUNT,
            pca_k: None,
            nn: TrainParams::default(),
            source: None,
            cadence: Pacing::default(),
        }
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.pca_k.map_or_else(|| "auto".to_string(), |k| k.to_string());
        let cadence = match self.cadence {
            Pacing::Every(d) => format!("{}s", d.as_secs_f64()),
            Pacing::Unpaced => "unpaced".to_string(),
        };
        write!(
            f,
            "profile={} backend={} tokens={} pca_k={} lr={} epochs={} target_mse={} hidden={} seed={} source={} cadence={}",
            self.profile,
            self.backend,
            self.token_count,
            k,
            self.nn.learning_rate,
            self.nn.max_epochs,
            self.nn.target_mse,
            self.nn.hidden_width,
            self.nn.seed,
            self.source.as_deref().unwrap_or("-"),
            cadence
        )
    }
}

pub fn pca_features(img: &GrayImage, dims: (usize, usize)) -> Result<Vec<f64>> {
    let small = resize(img, dims.0, dims.1)?;
    Ok(flatten(&binarize_otsu(&small)))
}

pub fn nn_tokens(img: &GrayImage, dims: (usize, usize), token_count: usize) -> Result<TokenSequence> {
    let small = resize(img, dims.0, dims.1)?;
    let grad = sobel(&small)?;
    let edges = edge_map(&grad, magnitude_otsu_threshold(&grad))?;
    Ok(tokenize(&edges, token_count)?)
}

/// Resizes `img` to the model's geometry, extracts that backend's features
/// and classifies.
pub fn classify_image(saved: &SavedModel, img: &GrayImage) -> Result<RankedMatches> {
    match &saved.model {
        Model::Pca(m) => Ok(m.classify(&pca_features(img, saved.dims)?)?),
        Model::Nn(m) => Ok(m.classify(&nn_tokens(img, saved.dims, m.token_count)?)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainSummary {
    Pca { samples: usize, feature_len: usize, components: usize },
    Nn { samples: usize, skipped: usize, report: TrainReport },
}

impl TrainSummary {
    pub fn converged(&self) -> bool {
        match self {
            TrainSummary::Pca { .. } => true,
            TrainSummary::Nn { report, .. } => report.converged,
        }
    }
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainSummary::Pca { samples, feature_len, components } => {
                write!(f, "pca: n={samples} N={feature_len} k={components}")
            }
            TrainSummary::Nn { samples, skipped, report } => write!(
                f,
                "nn: n={samples} skipped={skipped} epochs={} mse={:.6} converged={}",
                report.epochs, report.mse, report.converged
            ),
        }
    }
}

pub fn train_from_db(db: &GestureDb, config: &PipelineConfig) -> Result<(SavedModel, TrainSummary)> {
    let dims = db.profile.dims();
    match config.backend {
        Backend::Pca => {
            let vectors: Vec<Vec<f64>> = db.entries.iter().map(|e| flatten(&e.binary)).collect();
            let labels: Vec<String> = db.entries.iter().map(|e| e.label.clone()).collect();
            let ts = TrainingSet::new(vectors, labels)?.with_dims(dims.0, dims.1)?;
            let k = config.pca_k.unwrap_or_else(|| default_components(ts.len()));
            let model = train_pca(&ts, k)?;
            let summary =
                TrainSummary::Pca { samples: ts.len(), feature_len: ts.feature_len(), components: model.components() };
            Ok((SavedModel { dims, model: Model::Pca(model) }, summary))
        }
        Backend::Nn => {
            let mut samples = Vec::with_capacity(db.len());
            let mut skipped = 0;
            for e in &db.entries {
                match nn_tokens(&e.gray, dims, config.token_count) {
                    Ok(t) => samples.push((t, e.label.clone())),
                    Err(PipelineError::Token(_)) => skipped += 1,
                    Err(other) => return Err(other),
                }
            }
            if samples.is_empty() {
                return Err(PipelineError::NoUsableSamples);
            }
            let (model, report) = train_nn(&samples, &config.nn)?;
            let summary = TrainSummary::Nn { samples: samples.len(), skipped, report };
            Ok((SavedModel { dims, model: Model::Nn(model) }, summary))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRow {
    pub label: String,
    pub trials: usize,
    pub hits: usize,
}

impl EvalRow {
    pub fn percent(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            100.0 * self.hits as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

/// Whole numbers print bare, otherwise one decimal.
pub fn format_percent(p: f64) -> String {
    let rounded = (p * 10.0).round() / 10.0;
    if rounded.fract() == 0.0 {
        format!("{rounded:.0}")
    } else {
        format!("{rounded:.1}")
    }
}

impl EvalReport {
    pub fn overall(&self) -> EvalRow {
        EvalRow {
            label: "Overall".into(),
            trials: self.rows.iter().map(|r| r.trials).sum(),
            hits: self.rows.iter().map(|r| r.hits).sum(),
        }
    }

    /// `<label> <hits>/<trials> <percent>%` per label, then the overall row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for r in self.rows.iter().chain(std::iter::once(&self.overall())) {
            out.push_str(&format!("{} {}/{} {}%\n", r.label, r.hits, r.trials, format_percent(r.percent())));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,trials,hits,percent\n");
        for r in self.rows.iter().chain(std::iter::once(&self.overall())) {
            out.push_str(&format!("{},{},{},{}\n", r.label, r.trials, r.hits, format_percent(r.percent())));
        }
        out
    }
}

/// Classifies every entry of `db`. An entry the backend cannot featurise
/// counts as a miss.
pub fn evaluate(saved: &SavedModel, db: &GestureDb) -> Result<EvalReport> {
    if db.profile.dims() != saved.dims {
        return Err(PipelineError::ProfileMismatch { db: db.profile, model: Profile::from_dims(saved.dims) });
    }
    let mut rows: Vec<EvalRow> = Vec::new();
    for e in &db.entries {
        let hit = match classify_image(saved, &e.gray) {
            Ok(r) => r.top().label == e.label,
            Err(PipelineError::Token(_)) => false,
            Err(other) => return Err(other),
        };
        match rows.last_mut() {
            Some(row) if row.label == e.label => {
                row.trials += 1;
                row.hits += usize::from(hit);
            }
            _ => rows.push(EvalRow { label: e.label.clone(), trials: 1, hits: usize::from(hit) }),
        }
    }
    Ok(EvalReport { rows })
}
