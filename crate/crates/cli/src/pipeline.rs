use gridrep_core::cae::{frames_to_tensor, train, CaeArch, CaeModel, TrainConfig};
use gridrep_core::classify::cross_validate;
use gridrep_core::ingest::{
    import_features, load_labels, load_manifest, DatasetManifest, LabelTable, EVENTS,
};
use gridrep_core::numerics::{Matrix, SeededRng};
use gridrep_core::pca::{
    inverse_transform, partial_fit, reconstruction_rmse, transform, PcaModel,
};
use gridrep_core::verify::{
    delta_scores, render_performance_diagram, render_sweep_chart, scores, ContingencyTable,
    DiagramPoint, Scores, ScoresDelta, SweepSeries,
};
use gridrep_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

// Sub-stream tags: fold draws are keyed per event (so every method sees the
// same folds) and network training is keyed per latent dimension.
const CV_STREAM: u64 = 0x4556_454E_5446_4F4C;
const CAE_STREAM: u64 = 0x4E45_5454_5241_494E;

/// Frames folded into one incremental PCA update.
const PCA_BATCH_ROWS: usize = 100;

/// Frames encoded per forward pass when extracting features.
const ENCODE_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Cae,
    Imported,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Cae => "cae",
            Method::Imported => "imported",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "pca" => Ok(Method::Pca),
            "cae" => Ok(Method::Cae),
            "imported" => Ok(Method::Imported),
            _ => Err(Error::InvalidInput(format!(
                "unknown method '{s}' (expected pca, cae or imported)"
            ))),
        }
    }
}

/// Everything an experiment run needs, echoed verbatim to `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub labels: PathBuf,
    pub out_dir: PathBuf,
    pub methods: Vec<Method>,
    pub latent_dims: Vec<usize>,
    pub cv_folds: usize,
    pub ridge: f64,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub imported_features: Option<PathBuf>,
}

impl ExperimentConfig {
    fn validate(&self, resolution: usize) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".to_string()));
        }
        if self.latent_dims.is_empty() {
            return Err(Error::InvalidInput("no latent dimensions requested".to_string()));
        }
        for &d in &self.latent_dims {
            if d == 0 || d > resolution * resolution {
                return Err(Error::InvalidInput(format!(
                    "latent dimension {d} outside 1..={} for resolution {resolution}",
                    resolution * resolution
                )));
            }
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidInput(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.cv_folds
            )));
        }
        if self.ridge < 0.0 {
            return Err(Error::InvalidInput(format!("negative ridge {}", self.ridge)));
        }
        if self.epochs == 0 && self.methods.contains(&Method::Cae) {
            return Err(Error::InvalidInput("network training needs at least 1 epoch".to_string()));
        }
        if self.methods.contains(&Method::Imported) && self.imported_features.is_none() {
            return Err(Error::InvalidInput(
                "the imported method needs --imported <feature file>".to_string(),
            ));
        }
        Ok(())
    }
}

/// Pooled cross-validation outcome for one (method, event, dimension) cell.
#[derive(Debug, Clone)]
pub struct CellScores {
    pub method: Method,
    pub event: String,
    pub latent_dim: usize,
    pub table: ContingencyTable,
    pub scores: Scores,
    pub degenerate_folds: usize,
}

/// Wall-clock learning cost and serialized model size for one method.
#[derive(Debug, Clone)]
pub struct MethodTiming {
    pub method: Method,
    pub learn_seconds: f64,
    pub storage_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub cells: Vec<CellScores>,
    pub timings: Vec<MethodTiming>,
    pub out_dir: PathBuf,
}

/// High-minus-low score changes for one (method, event) cell.
#[derive(Debug, Clone)]
pub struct DeltaRow {
    pub method: Method,
    pub event: String,
    pub delta: ScoresDelta,
}

struct LoadedData {
    manifest: DatasetManifest,
    labels: LabelTable,
    /// One frame per row, values in [0, 1].
    matrix: Matrix,
    resolution: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn fmt_flag(v: Option<bool>) -> String {
    v.map_or_else(|| "NA".to_string(), |b| b.to_string())
}

pub fn square_resolution(manifest: &DatasetManifest) -> Result<usize> {
    let d = &manifest.descriptor;
    if d.height != d.width {
        return Err(Error::InvalidInput(format!(
            "experiments need square frames, dataset is {}x{}",
            d.height, d.width
        )));
    }
    Ok(d.height)
}

/// Loads every frame as one row of a matrix, insisting on [0, 1] data.
pub fn frame_matrix(manifest: &DatasetManifest) -> Result<Matrix> {
    let d = &manifest.descriptor;
    let mut rows = Vec::with_capacity(manifest.len());
    for i in 0..manifest.len() {
        let frame = gridrep_core::ingest::load_frame(manifest, i)?;
        if !frame.scaled {
            return Err(Error::Range(format!(
                "frame {i} is not scaled to [0, 1]; run `gridrep preprocess --rescale` first"
            )));
        }
        rows.push(frame.values.iter().map(|&v| f64::from(v)).collect::<Vec<f64>>());
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("dataset has no frames".to_string()));
    }
    debug_assert_eq!(rows[0].len(), d.height * d.width);
    Matrix::from_rows(&rows)
}

/// True when a label date names a frame: either the full timestamp or its
/// calendar-date prefix ("2013-01-05" matches "2013-01-05T00:00:00Z").
fn stamp_matches(label: &str, stamp: &str) -> bool {
    label == stamp || stamp.strip_prefix(label).is_some_and(|rest| rest.starts_with('T'))
}

/// Checks that label row `i` names frame `i` for the whole run.
pub fn check_alignment(manifest: &DatasetManifest, labels: &LabelTable) -> Result<()> {
    let stamps = manifest.timestamps();
    if labels.len() != stamps.len() {
        return Err(Error::Alignment(format!(
            "labels cover {} dates, dataset has {} frames",
            labels.len(),
            stamps.len()
        )));
    }
    for (i, (label, stamp)) in labels.dates().iter().zip(&stamps).enumerate() {
        if !stamp_matches(label, stamp) {
            return Err(Error::Alignment(format!(
                "row {i}: label date '{label}' does not name frame '{stamp}'"
            )));
        }
    }
    Ok(())
}

/// Loads dataset and labels, refusing misaligned inputs before any frame
/// data is read.
fn load_aligned(dataset: &Path, labels_path: &Path) -> Result<LoadedData> {
    let manifest = load_manifest(dataset)?;
    let labels = load_labels(labels_path)?;
    check_alignment(&manifest, &labels)?;
    let resolution = square_resolution(&manifest)?;
    let matrix = frame_matrix(&manifest)?;
    Ok(LoadedData { manifest, labels, matrix, resolution })
}

/// Streams the frame matrix through incremental PCA updates.
pub fn fit_pca_streaming(x: &Matrix, k: usize, batch_rows: usize) -> Result<PcaModel> {
    if batch_rows == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".to_string()));
    }
    let mut model = PcaModel::empty(k, x.cols())?;
    for start in (0..x.rows()).step_by(batch_rows) {
        let end = (start + batch_rows).min(x.rows());
        let rows: Vec<Vec<f64>> = (start..end).map(|i| x.row(i).to_vec()).collect();
        model = partial_fit(&model, &Matrix::from_rows(&rows)?)?;
    }
    Ok(model)
}

/// Encodes every row of `x` (one frame per row) in bounded-size chunks.
pub fn encode_features(model: &CaeModel, x: &Matrix, resolution: usize) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(x.rows());
    for start in (0..x.rows()).step_by(ENCODE_CHUNK) {
        let end = (start + ENCODE_CHUNK).min(x.rows());
        let frames: Vec<Vec<f64>> = (start..end).map(|i| x.row(i).to_vec()).collect();
        let z = model.encode(&frames_to_tensor(&frames, resolution, resolution)?)?;
        for i in 0..z.rows() {
            rows.push(z.row(i).to_vec());
        }
    }
    Matrix::from_rows(&rows)
}

pub fn cae_train_config(cfg: &ExperimentConfig, dim: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: SeededRng::derived(cfg.seed, CAE_STREAM.wrapping_add(dim as u64)).next_u64(),
        ..TrainConfig::default()
    }
}

struct Learned {
    features: Matrix,
    learn_seconds: f64,
    storage_bytes: u64,
}

fn learn_features(
    data: &LoadedData,
    method: Method,
    dim: usize,
    cfg: &ExperimentConfig,
    models_dir: &Path,
) -> Result<Learned> {
    match method {
        Method::Pca => {
            let started = Instant::now();
            let model = fit_pca_streaming(&data.matrix, dim, PCA_BATCH_ROWS)?;
            let learn_seconds = started.elapsed().as_secs_f64();
            let features = transform(&model, &data.matrix)?;
            let path = models_dir.join(format!("pca_{dim}.bin"));
            model.save(&path)?;
            let storage_bytes = fs::metadata(&path).map_err(|e| io_err(&path, e))?.len();
            Ok(Learned { features, learn_seconds, storage_bytes })
        }
        Method::Cae => {
            let arch = CaeArch::new(data.resolution, dim)?;
            let rows: Vec<Vec<f64>> =
                (0..data.matrix.rows()).map(|i| data.matrix.row(i).to_vec()).collect();
            let tensor = frames_to_tensor(&rows, data.resolution, data.resolution)?;
            let train_cfg = cae_train_config(cfg, dim);
            let started = Instant::now();
            let (model, _history) = train(&arch, &tensor, &train_cfg)?;
            let learn_seconds = started.elapsed().as_secs_f64();
            let features = encode_features(&model, &data.matrix, data.resolution)?;
            let path = models_dir.join(format!("cae_{dim}.bin"));
            model.save(&path)?;
            let storage_bytes = fs::metadata(&path).map_err(|e| io_err(&path, e))?.len();
            Ok(Learned { features, learn_seconds, storage_bytes })
        }
        Method::Imported => {
            let path = cfg.imported_features.as_ref().ok_or_else(|| {
                Error::InvalidInput("imported method without a feature file".to_string())
            })?;
            let set = import_features(path, &data.manifest, Some("imported"))?;
            let storage_bytes = fs::metadata(path).map_err(|e| io_err(path, e))?.len();
            Ok(Learned { features: set.matrix, learn_seconds: 0.0, storage_bytes })
        }
    }
}

/// Pooled cross-validation outcome for one event.
#[derive(Debug, Clone)]
pub struct EventOutcome {
    pub event: String,
    pub table: ContingencyTable,
    pub scores: Scores,
    pub degenerate_folds: usize,
}

/// Cross-validates one feature matrix against all five event labels.
/// Fold assignments depend only on (seed, event), so methods share folds.
pub fn evaluate_events(
    features: &Matrix,
    labels: &LabelTable,
    folds: usize,
    ridge: f64,
    seed: u64,
) -> Result<Vec<EventOutcome>> {
    let mut out = Vec::with_capacity(EVENTS.len());
    for (ei, event) in EVENTS.iter().enumerate() {
        let y = labels.event_column(event)?;
        let mut rng = SeededRng::derived(seed, CV_STREAM.wrapping_add(ei as u64));
        let cv = cross_validate(features, &y, folds, ridge, &mut rng)?;
        out.push(EventOutcome {
            event: event.to_string(),
            table: cv.pooled,
            scores: scores(&cv.pooled),
            degenerate_folds: cv.degenerate_folds.len(),
        });
    }
    Ok(out)
}

fn scores_csv(cells: &[CellScores]) -> String {
    let mut out = String::from(
        "method,event,latent_dim,hits,false_alarms,misses,correct_negatives,pod,far,sr,bias,csi,degenerate_folds\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.method,
            c.event,
            c.latent_dim,
            c.table.hits,
            c.table.false_alarms,
            c.table.misses,
            c.table.correct_negatives,
            fmt_opt(c.scores.pod),
            fmt_opt(c.scores.far),
            fmt_opt(c.scores.sr),
            fmt_opt(c.scores.bias),
            fmt_opt(c.scores.csi),
            c.degenerate_folds,
        ));
    }
    out
}

fn timings_csv(timings: &[MethodTiming]) -> String {
    let mut out = String::from("method,learn_seconds,storage_bytes\n");
    for t in timings {
        out.push_str(&format!("{},{:.3},{}\n", t.method, t.learn_seconds, t.storage_bytes));
    }
    out
}

fn delta_csv(rows: &[DeltaRow]) -> String {
    let mut out = String::from(
        "method,event,pod_delta,far_delta,sr_delta,bias_delta,csi_delta,pod_improved,far_improved,sr_improved,csi_improved\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.event,
            fmt_opt(r.delta.pod),
            fmt_opt(r.delta.far),
            fmt_opt(r.delta.sr),
            fmt_opt(r.delta.bias),
            fmt_opt(r.delta.csi),
            fmt_flag(r.delta.pod_improved),
            fmt_flag(r.delta.far_improved),
            fmt_flag(r.delta.sr_improved),
            fmt_flag(r.delta.csi_improved),
        ));
    }
    out
}

fn diagram_points(cells: &[CellScores]) -> Vec<DiagramPoint> {
    cells
        .iter()
        .filter_map(|c| match (c.scores.sr, c.scores.pod) {
            (Some(sr), Some(pod)) => Some(DiagramPoint {
                sr,
                pod,
                event: c.event.clone(),
                method: c.method.name().to_string(),
            }),
            _ => None,
        })
        .collect()
}

fn config_json(cfg: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Format(format!("config serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Single-resolution run: learn each method's features at the first
/// requested dimension, cross-validate all five events, and emit scores,
/// timings, the performance diagram, and the config echo.
pub fn run_experiment1(cfg: &ExperimentConfig) -> Result<RunReport> {
    let data = load_aligned(&cfg.dataset, &cfg.labels)?;
    cfg.validate(data.resolution)?;
    make_dir(&cfg.out_dir)?;
    let models_dir = cfg.out_dir.join("models");
    make_dir(&models_dir)?;

    let dim = cfg.latent_dims[0];
    let mut cells = Vec::new();
    let mut timings = Vec::new();
    for &method in &cfg.methods {
        let learned = learn_features(&data, method, dim, cfg, &models_dir)?;
        timings.push(MethodTiming {
            method,
            learn_seconds: learned.learn_seconds,
            storage_bytes: learned.storage_bytes,
        });
        for o in
            evaluate_events(&learned.features, &data.labels, cfg.cv_folds, cfg.ridge, cfg.seed)?
        {
            cells.push(CellScores {
                method,
                event: o.event,
                latent_dim: learned.features.cols(),
                table: o.table,
                scores: o.scores,
                degenerate_folds: o.degenerate_folds,
            });
        }
    }

    write_text(&cfg.out_dir.join("scores.csv"), &scores_csv(&cells))?;
    write_text(&cfg.out_dir.join("timings.csv"), &timings_csv(&timings))?;
    write_text(&cfg.out_dir.join("config.json"), &config_json(cfg)?)?;
    let title = format!("Performance diagram (d = {dim})");
    let svg = render_performance_diagram(&title, &diagram_points(&cells))?;
    write_text(&cfg.out_dir.join("performance_diagram.svg"), &svg)?;
    Ok(RunReport { cells, timings, out_dir: cfg.out_dir.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Config {
    pub low: ExperimentConfig,
    pub high: ExperimentConfig,
}

/// Two-resolution comparison: runs the single-resolution experiment per
/// dataset, then reports high-minus-low score deltas per (method, event).
pub fn run_experiment2(
    cfg_low: &ExperimentConfig,
    cfg_high: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(RunReport, RunReport, Vec<DeltaRow>)> {
    let low_manifest = load_manifest(&cfg_low.dataset)?;
    let high_manifest = load_manifest(&cfg_high.dataset)?;
    if low_manifest.timestamps() != high_manifest.timestamps() {
        return Err(Error::Alignment(
            "the two datasets cover different timestamps".to_string(),
        ));
    }
    if cfg_low.methods != cfg_high.methods {
        return Err(Error::InvalidInput(
            "both resolutions must request the same methods".to_string(),
        ));
    }
    let low = run_experiment1(cfg_low)?;
    let high = run_experiment1(cfg_high)?;

    let mut deltas = Vec::new();
    for (lo, hi) in low.cells.iter().zip(&high.cells) {
        debug_assert_eq!((lo.method, &lo.event), (hi.method, &hi.event));
        deltas.push(DeltaRow {
            method: lo.method,
            event: lo.event.clone(),
            delta: delta_scores(&hi.scores, &lo.scores),
        });
    }

    make_dir(out_dir)?;
    write_text(&out_dir.join("delta.csv"), &delta_csv(&deltas))?;
    let echo = Exp2Config { low: cfg_low.clone(), high: cfg_high.clone() };
    write_text(&out_dir.join("config.json"), &config_json(&echo)?)?;
    Ok((low, high, deltas))
}

/// Latent-dimension sweep for PCA and the network. PCA is fitted once at
/// the largest dimension and truncated downward, so its subspaces nest and
/// reconstruction error is monotone; the network is refitted per dimension.
pub fn run_experiment3(cfg: &ExperimentConfig) -> Result<RunReport> {
    if cfg.methods.contains(&Method::Imported) {
        return Err(Error::InvalidInput(
            "imported features have a fixed size and cannot join the dimension sweep".to_string(),
        ));
    }
    let data = load_aligned(&cfg.dataset, &cfg.labels)?;
    cfg.validate(data.resolution)?;
    let mut dims = cfg.latent_dims.clone();
    dims.sort_unstable();
    dims.dedup();
    for &d in &dims {
        if !d.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "sweep dimensions must be powers of two, got {d}"
            )));
        }
    }
    make_dir(&cfg.out_dir)?;
    let models_dir = cfg.out_dir.join("models");
    make_dir(&models_dir)?;

    let mut cells = Vec::new();
    let mut timings = Vec::new();
    let mut pca_rmse: Vec<(usize, f64)> = Vec::new();
    for &method in &cfg.methods {
        let mut learn_seconds = 0.0;
        let mut storage_bytes = 0;
        match method {
            Method::Pca => {
                let dmax = *dims.last().expect("validated non-empty");
                let started = Instant::now();
                let full = fit_pca_streaming(&data.matrix, dmax, PCA_BATCH_ROWS)?;
                learn_seconds = started.elapsed().as_secs_f64();
                let path = models_dir.join(format!("pca_{dmax}.bin"));
                full.save(&path)?;
                storage_bytes = fs::metadata(&path).map_err(|e| io_err(&path, e))?.len();
                for &dim in &dims {
                    let model = full.truncated(dim.min(full.rank()))?;
                    let features = transform(&model, &data.matrix)?;
                    pca_rmse.push((dim, reconstruction_rmse(&model, &data.matrix)?));
                    for o in evaluate_events(
                        &features,
                        &data.labels,
                        cfg.cv_folds,
                        cfg.ridge,
                        cfg.seed,
                    )? {
                        cells.push(CellScores {
                            method,
                            event: o.event,
                            latent_dim: dim,
                            table: o.table,
                            scores: o.scores,
                            degenerate_folds: o.degenerate_folds,
                        });
                    }
                }
            }
            Method::Cae => {
                for &dim in &dims {
                    let learned = learn_features(&data, method, dim, cfg, &models_dir)?;
                    learn_seconds += learned.learn_seconds;
                    storage_bytes += learned.storage_bytes;
                    for o in evaluate_events(
                        &learned.features,
                        &data.labels,
                        cfg.cv_folds,
                        cfg.ridge,
                        cfg.seed,
                    )? {
                        cells.push(CellScores {
                            method,
                            event: o.event,
                            latent_dim: dim,
                            table: o.table,
                            scores: o.scores,
                            degenerate_folds: o.degenerate_folds,
                        });
                    }
                }
            }
            Method::Imported => unreachable!("rejected above"),
        }
        timings.push(MethodTiming { method, learn_seconds, storage_bytes });
    }

    write_text(&cfg.out_dir.join("scores.csv"), &scores_csv(&cells))?;
    write_text(&cfg.out_dir.join("timings.csv"), &timings_csv(&timings))?;
    write_text(&cfg.out_dir.join("config.json"), &config_json(cfg)?)?;
    let mut rmse_csv = String::from("latent_dim,rmse\n");
    for (dim, rmse) in &pca_rmse {
        rmse_csv.push_str(&format!("{dim},{rmse:.6}\n"));
    }
    if cfg.methods.contains(&Method::Pca) {
        write_text(&cfg.out_dir.join("pca_reconstruction.csv"), &rmse_csv)?;
    }

    for event in EVENTS {
        let series: Vec<SweepSeries> = cfg
            .methods
            .iter()
            .map(|m| {
                let take = |pick: fn(&Scores) -> Option<f64>| -> Vec<Option<f64>> {
                    dims.iter()
                        .map(|&dim| {
                            cells
                                .iter()
                                .find(|c| {
                                    c.method == *m && c.event == event && c.latent_dim == dim
                                })
                                .and_then(|c| pick(&c.scores))
                        })
                        .collect()
                };
                SweepSeries {
                    method: m.name().to_string(),
                    csi: take(|s| s.csi),
                    pod: take(|s| s.pod),
                    far: take(|s| s.far),
                }
            })
            .collect();
        let title = format!("{event} scores across latent dimension");
        let svg = render_sweep_chart(&title, &dims, &series)?;
        write_text(&cfg.out_dir.join(format!("sweep_{event}.svg")), &svg)?;
    }
    Ok(RunReport { cells, timings, out_dir: cfg.out_dir.clone() })
}

/// Case study export: original frame plus PCA and network reconstructions,
/// as PGM images and one SVG montage.
pub fn emit_reconstructions(cfg: &ExperimentConfig, cases: &[String]) -> Result<Vec<PathBuf>> {
    if cases.is_empty() {
        return Err(Error::InvalidInput("no case timestamps given".to_string()));
    }
    let manifest = load_manifest(&cfg.dataset)?;
    let resolution = square_resolution(&manifest)?;
    cfg.validate(resolution)?;
    let stamps = manifest.timestamps();
    let mut indices = Vec::with_capacity(cases.len());
    for ts in cases {
        let idx = stamps.iter().position(|s| stamp_matches(ts, s)).ok_or_else(|| {
            Error::InvalidInput(format!("timestamp '{ts}' is not in the dataset"))
        })?;
        indices.push(idx);
    }
    let matrix = frame_matrix(&manifest)?;
    make_dir(&cfg.out_dir)?;

    let dim = cfg.latent_dims[0];
    let pca_model = fit_pca_streaming(&matrix, dim, PCA_BATCH_ROWS)?;
    let arch = CaeArch::new(resolution, dim)?;
    let rows: Vec<Vec<f64>> = (0..matrix.rows()).map(|i| matrix.row(i).to_vec()).collect();
    let tensor = frames_to_tensor(&rows, resolution, resolution)?;
    let (cae_model, _) = train(&arch, &tensor, &cae_train_config(cfg, dim))?;

    let mut outputs = Vec::new();
    let mut montage = Vec::new();
    for (&idx, ts) in indices.iter().zip(cases) {
        let original = matrix.row(idx).to_vec();
        let one = Matrix::from_rows(&[original.clone()])?;
        let pca_recon = inverse_transform(&pca_model, &transform(&pca_model, &one)?)?
            .row(0)
            .to_vec();
        let cae_recon = cae_model
            .reconstruct(&frames_to_tensor(&[original.clone()], resolution, resolution)?)?
            .values()
            .to_vec();
        let safe = ts.replace(':', "");
        for (suffix, values) in
            [("original", &original), ("pca", &pca_recon), ("cae", &cae_recon)]
        {
            let path = cfg.out_dir.join(format!("{safe}_{suffix}.pgm"));
            crate::render::write_pgm(&path, resolution, resolution, values)?;
            outputs.push(path);
        }
        montage.push(crate::render::MontageRow {
            label: ts.clone(),
            original,
            pca: pca_recon,
            cae: cae_recon,
        });
    }
    let svg = crate::render::render_montage(&montage, resolution, resolution)?;
    let montage_path = cfg.out_dir.join("montage.svg");
    write_text(&montage_path, &svg)?;
    outputs.push(montage_path);
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ExperimentConfig {
        ExperimentConfig {
            dataset: PathBuf::from("data"),
            labels: PathBuf::from("labels.csv"),
            out_dir: PathBuf::from("out"),
            methods: vec![Method::Pca, Method::Cae],
            latent_dims: vec![16],
            cv_folds: 10,
            ridge: 1e-4,
            seed: 7,
            epochs: 3,
            learning_rate: 1e-3,
            batch_size: 32,
            imported_features: None,
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = sample_config();
        let text = config_json(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Pca, Method::Cae, Method::Imported] {
            assert_eq!(Method::from_str(m.name()).unwrap(), m);
        }
        assert!(Method::from_str("vae").is_err());
    }

    #[test]
    fn validation_rejects_bad_requests() {
        let mut cfg = sample_config();
        cfg.latent_dims = vec![];
        assert!(cfg.validate(64).is_err());
        let mut cfg = sample_config();
        cfg.latent_dims = vec![64 * 64 + 1];
        assert!(cfg.validate(64).is_err());
        let mut cfg = sample_config();
        cfg.methods = vec![Method::Imported];
        assert!(cfg.validate(64).is_err());
        let mut cfg = sample_config();
        cfg.cv_folds = 1;
        assert!(cfg.validate(64).is_err());
        assert!(sample_config().validate(64).is_ok());
    }

    #[test]
    fn label_dates_match_frame_timestamps() {
        assert!(stamp_matches("2013-01-05", "2013-01-05T00:00:00Z"));
        assert!(stamp_matches("2013-01-05T00:00:00Z", "2013-01-05T00:00:00Z"));
        assert!(!stamp_matches("2013-01-05", "2013-01-15T00:00:00Z"));
        assert!(!stamp_matches("2013-01-05", "2013-01-050T00:00:00Z"));
        assert!(!stamp_matches("2013-01", "2013-01-05T00:00:00Z"));
    }

    #[test]
    fn metric_formatting_uses_na() {
        assert_eq!(fmt_opt(None), "NA");
        assert_eq!(fmt_opt(Some(0.5)), "0.500000");
        assert_eq!(fmt_flag(None), "NA");
        assert_eq!(fmt_flag(Some(true)), "true");
    }
}
