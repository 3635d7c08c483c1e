use clap::{Args, Parser, Subcommand};
use gridrep_cli::pipeline::{
    check_alignment, emit_reconstructions, encode_features, evaluate_events, fit_pca_streaming,
    frame_matrix, run_experiment1, run_experiment2, run_experiment3, square_resolution,
    ExperimentConfig, Method,
};
use gridrep_core::cae::{frames_to_tensor, train, CaeArch, CaeModel, TrainConfig};
use gridrep_core::ingest::{
    bilinear_resize, crop_to_box, export_features, export_features_csv, generate_synthetic,
    import_features, load_frame, load_labels, load_manifest, rescale_unit, save_dataset,
    save_labels, FeatureSet,
};
use gridrep_core::numerics::Matrix;
use gridrep_core::pca::{reconstruction_rmse, transform, PcaModel};
use gridrep_core::verify::{scores, tabulate, ContingencyTable, Scores};
use gridrep_core::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridrep",
    version,
    about = "Representation learning and forecast verification for gridded raster time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Grid resolution (64, 128, 256 or 512).
    #[arg(long, global = true, default_value_t = 64)]
    resolution: usize,
    /// Latent dimensions, comma separated.
    #[arg(long = "latent-dim", global = true, value_delimiter = ',', default_values_t = [64])]
    latent_dim: Vec<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true, default_value_t = 10)]
    folds: usize,
    /// Ridge stabilizer for the logistic fits.
    #[arg(long, global = true, default_value_t = 1e-4)]
    ridge: f64,
    /// Feature methods, comma separated (pca, cae, imported).
    #[arg(long, global = true, value_delimiter = ',', default_values = ["pca", "cae"])]
    methods: Vec<Method>,
}

#[derive(Args)]
struct TrainArgs {
    /// Autoencoder training epochs.
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    /// Adam learning rate.
    #[arg(long = "lr", default_value_t = 1e-3)]
    learning_rate: f64,
    /// Minibatch size.
    #[arg(long = "batch", default_value_t = 32)]
    batch_size: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    GenData {
        /// Number of daily frames.
        #[arg(long, default_value_t = 120)]
        days: usize,
    },
    /// Crop, resize and rescale a dataset into a new directory.
    Preprocess {
        /// Source dataset directory.
        #[arg(long)]
        input: PathBuf,
        /// Crop box: south north west east (degrees).
        #[arg(long, num_args = 4, value_names = ["LAT0", "LAT1", "LON0", "LON1"], allow_negative_numbers = true)]
        crop: Option<Vec<f64>>,
        /// Resize frames to resolution x resolution.
        #[arg(long)]
        resize: Option<usize>,
        /// Divide raw counts by 255 into [0, 1].
        #[arg(long)]
        rescale: bool,
    },
    /// Fit an incremental PCA model and save it.
    FitPca {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train the convolutional autoencoder and save it.
    FitCae {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Encode a dataset into feature vectors with a saved model.
    Extract {
        #[arg(long)]
        input: PathBuf,
        /// Saved PCA or autoencoder model file.
        #[arg(long)]
        model: PathBuf,
        /// Also write a CSV copy of the features.
        #[arg(long)]
        csv: bool,
    },
    /// Validate an external feature file against a dataset.
    ImportFeatures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Cross-validate feature vectors against all five event labels.
    Classify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Score a contingency table or a forecast/observation CSV.
    Evaluate {
        /// CSV with a forecast,observed header and boolean rows.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Direct counts: hits false-alarms misses correct-negatives.
        #[arg(long, num_args = 4, value_names = ["HITS", "FALSE_ALARMS", "MISSES", "CORRECT_NEGATIVES"])]
        counts: Option<Vec<u64>>,
    },
    /// Single-resolution run: scores, timings and a performance diagram.
    Exp1 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// External feature file for the imported method.
        #[arg(long)]
        imported: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Two-resolution comparison with per-cell score deltas.
    Exp2 {
        #[arg(long = "data-low")]
        data_low: PathBuf,
        #[arg(long = "data-high")]
        data_high: PathBuf,
        /// Label table shared by both resolutions.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        imported: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Latent-dimension sweep with per-event charts.
    Exp3 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Export originals and reconstructions as PGM images and a montage.
    Reconstruct {
        #[arg(long)]
        data: PathBuf,
        /// Case timestamps or dates, comma separated.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2: the request itself is wrong. 3: the data cannot be used as given.
/// 4: the numbers went bad while computing.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) => 2,
        Error::Format(_)
        | Error::Alignment(_)
        | Error::Range(_)
        | Error::DegenerateLabels(_)
        | Error::Io { .. } => 3,
        Error::TrainingDiverged { .. } | Error::Numerical(_) => 4,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn experiment_config(
    g: &GlobalArgs,
    data: &Path,
    labels: &Path,
    out_dir: PathBuf,
    train: &TrainArgs,
    imported: Option<PathBuf>,
) -> ExperimentConfig {
    ExperimentConfig {
        dataset: data.to_path_buf(),
        labels: labels.to_path_buf(),
        out_dir,
        methods: g.methods.clone(),
        latent_dims: g.latent_dim.clone(),
        cv_folds: g.folds,
        ridge: g.ridge,
        seed: g.seed,
        epochs: train.epochs,
        learning_rate: train.learning_rate,
        batch_size: train.batch_size,
        imported_features: imported,
    }
}

fn matrix_rows(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn print_scores(prefix: &str, table: &ContingencyTable, s: &Scores) {
    println!(
        "{prefix}hits {} false_alarms {} misses {} correct_negatives {}",
        table.hits, table.false_alarms, table.misses, table.correct_negatives
    );
    println!(
        "{prefix}pod {} far {} sr {} bias {} csi {}",
        fmt_metric(s.pod),
        fmt_metric(s.far),
        fmt_metric(s.sr),
        fmt_metric(s.bias),
        fmt_metric(s.csi)
    );
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    match field.trim() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::Format(format!(
            "line {line}: expected a boolean, got '{other}'"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::GenData { days } => {
            let (frames, labels) = generate_synthetic(days, g.resolution, g.seed)?;
            let manifest = save_dataset(&g.out, &frames)?;
            let labels_path = g.out.join("labels.csv");
            save_labels(&labels, &labels_path)?;
            println!(
                "wrote {} frames at {}x{} plus labels.csv to {}",
                manifest.len(),
                g.resolution,
                g.resolution,
                g.out.display()
            );
        }
        Command::Preprocess { input, crop, resize, rescale } => {
            let manifest = load_manifest(&input)?;
            let mut frames = Vec::with_capacity(manifest.len());
            for i in 0..manifest.len() {
                let mut f = load_frame(&manifest, i)?;
                if let Some(c) = &crop {
                    f = crop_to_box(&f, c[0], c[1], c[2], c[3])?;
                }
                if let Some(n) = resize {
                    f = bilinear_resize(&f, n, n)?;
                }
                if rescale && !f.scaled {
                    f = rescale_unit(&f)?;
                }
                frames.push(f);
            }
            let out = save_dataset(&g.out, &frames)?;
            let d = &out.descriptor;
            println!(
                "wrote {} frames at {}x{} (scaled: {}) to {}",
                out.len(),
                d.height,
                d.width,
                d.scaled,
                g.out.display()
            );
        }
        Command::FitPca { input } => {
            let manifest = load_manifest(&input)?;
            let x = frame_matrix(&manifest)?;
            let k = g.latent_dim[0];
            let model = fit_pca_streaming(&x, k, 100)?;
            make_dir(&g.out)?;
            let path = g.out.join(format!("pca_{k}.bin"));
            model.save(&path)?;
            println!(
                "fitted rank-{} PCA on {} frames; reconstruction rmse {:.6}; saved {}",
                model.rank(),
                x.rows(),
                reconstruction_rmse(&model, &x)?,
                path.display()
            );
        }
        Command::FitCae { input, train: t } => {
            let manifest = load_manifest(&input)?;
            let resolution = square_resolution(&manifest)?;
            let x = frame_matrix(&manifest)?;
            let k = g.latent_dim[0];
            let arch = CaeArch::new(resolution, k)?;
            let tensor = frames_to_tensor(&matrix_rows(&x), resolution, resolution)?;
            let cfg = TrainConfig {
                learning_rate: t.learning_rate,
                epochs: t.epochs,
                batch_size: t.batch_size,
                seed: g.seed,
                ..TrainConfig::default()
            };
            let (model, history) = train(&arch, &tensor, &cfg)?;
            make_dir(&g.out)?;
            let path = g.out.join(format!("cae_{k}.bin"));
            model.save(&path)?;
            println!(
                "trained {} epochs on {} frames; final loss {:.6}; saved {}",
                history.len(),
                x.rows(),
                history.last().expect("at least one epoch"),
                path.display()
            );
        }
        Command::Extract { input, model, csv } => {
            let manifest = load_manifest(&input)?;
            let x = frame_matrix(&manifest)?;
            let magic = fs::read(&model).map_err(|e| io_err(&model, e))?;
            let (tag, features) = if magic.starts_with(b"GRCAE1") {
                let m = CaeModel::load(&model)?;
                let resolution = square_resolution(&manifest)?;
                ("cae", encode_features(&m, &x, resolution)?)
            } else {
                let m = PcaModel::load(&model)?;
                ("pca", transform(&m, &x)?)
            };
            let set = FeatureSet::new(tag, manifest.timestamps(), features)?;
            make_dir(&g.out)?;
            let path = g.out.join("features.bin");
            export_features(&set, &path)?;
            if csv {
                export_features_csv(&set, &g.out.join("features.csv"))?;
            }
            println!(
                "extracted {} x {} {} features to {}",
                set.matrix.rows(),
                set.matrix.cols(),
                tag,
                path.display()
            );
        }
        Command::ImportFeatures { input, features } => {
            let manifest = load_manifest(&input)?;
            let set = import_features(&features, &manifest, Some("imported"))?;
            make_dir(&g.out)?;
            let path = g.out.join("features.bin");
            export_features(&set, &path)?;
            println!(
                "imported {} x {} features; aligned copy saved to {}",
                set.matrix.rows(),
                set.matrix.cols(),
                path.display()
            );
        }
        Command::Classify { input, features, labels } => {
            let manifest = load_manifest(&input)?;
            let set = import_features(&features, &manifest, None)?;
            let table = load_labels(&labels)?;
            check_alignment(&manifest, &table)?;
            let outcomes = evaluate_events(&set.matrix, &table, g.folds, g.ridge, g.seed)?;
            let mut csv = String::from(
                "event,hits,false_alarms,misses,correct_negatives,pod,far,sr,bias,csi,degenerate_folds\n",
            );
            for o in &outcomes {
                println!("{}:", o.event);
                print_scores("  ", &o.table, &o.scores);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    o.event,
                    o.table.hits,
                    o.table.false_alarms,
                    o.table.misses,
                    o.table.correct_negatives,
                    fmt_metric(o.scores.pod),
                    fmt_metric(o.scores.far),
                    fmt_metric(o.scores.sr),
                    fmt_metric(o.scores.bias),
                    fmt_metric(o.scores.csi),
                    o.degenerate_folds,
                ));
            }
            make_dir(&g.out)?;
            let path = g.out.join("classification.csv");
            fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate { pairs, counts } => {
            let table = match (pairs, counts) {
                (Some(path), None) => {
                    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                    let mut forecast = Vec::new();
                    let mut observed = Vec::new();
                    for (i, line) in text.lines().enumerate() {
                        if i == 0 && line.to_lowercase().starts_with("forecast") {
                            continue;
                        }
                        if line.trim().is_empty() {
                            continue;
                        }
                        let (f, o) = line.split_once(',').ok_or_else(|| {
                            Error::Format(format!("line {}: expected 'forecast,observed'", i + 1))
                        })?;
                        forecast.push(parse_bool(f, i + 1)?);
                        observed.push(parse_bool(o, i + 1)?);
                    }
                    tabulate(&forecast, &observed)?
                }
                (None, Some(c)) => ContingencyTable {
                    hits: c[0],
                    false_alarms: c[1],
                    misses: c[2],
                    correct_negatives: c[3],
                },
                _ => {
                    return Err(Error::InvalidInput(
                        "give exactly one of --pairs or --counts".to_string(),
                    ))
                }
            };
            print_scores("", &table, &scores(&table));
        }
        Command::Exp1 { data, labels, imported, train: t } => {
            let cfg = experiment_config(g, &data, &labels, g.out.clone(), &t, imported);
            let report = run_experiment1(&cfg)?;
            println!(
                "evaluated {} cells; wrote scores.csv, timings.csv, config.json and performance_diagram.svg to {}",
                report.cells.len(),
                report.out_dir.display()
            );
        }
        Command::Exp2 { data_low, data_high, labels, imported, train: t } => {
            let low = experiment_config(
                g,
                &data_low,
                &labels,
                g.out.join("low"),
                &t,
                imported.clone(),
            );
            let high =
                experiment_config(g, &data_high, &labels, g.out.join("high"), &t, imported);
            let (_, _, deltas) = run_experiment2(&low, &high, &g.out)?;
            println!(
                "compared {} cells; wrote low/, high/, delta.csv and config.json to {}",
                deltas.len(),
                g.out.display()
            );
        }
        Command::Exp3 { data, labels, train: t } => {
            let cfg = experiment_config(g, &data, &labels, g.out.clone(), &t, None);
            let report = run_experiment3(&cfg)?;
            println!(
                "swept {} cells; wrote scores.csv, timings.csv, config.json and sweep charts to {}",
                report.cells.len(),
                report.out_dir.display()
            );
        }
        Command::Reconstruct { data, cases, train: t } => {
            let cfg = experiment_config(g, &data, Path::new(""), g.out.clone(), &t, None);
            let outputs = emit_reconstructions(&cfg, &cases)?;
            println!("wrote {} files to {}", outputs.len(), g.out.display());
        }
    }
    Ok(())
}
