//! Subcommands behind the `landmark-sfs` binary.
//!
//! Exit codes: 0 on success, 2 for input errors (unreadable or malformed
//! files, bad configuration, usage errors), 3 for internal failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{counts_csv, cross_validate, grid_search, render_confusion};
use crate::features::{FeatureIndex, FeatureMatrix};
use crate::io::write_atomic;
use crate::landmarks::{load_manifest, Dataset, DatasetManifest, ExpressionLabel, ManifestEntry};
use crate::selection::{
    format_subset, load_subset, parse_trace_csv, render_trace, save_subset, sfs, trace_csv,
    SelectionTrace,
};
use crate::svm::{save_model, train_multiclass};
use crate::synth::generate;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub fn exit_code(error: &Error) -> i32 {
    if error.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_INTERNAL
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "landmark-sfs",
    version,
    about = "Landmark-pair feature selection and SVM evaluation"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the full displacement feature matrix as CSV.
    Extract(ExtractArgs),
    /// Run forward selection and write the chosen subset and trace.
    Select(SelectArgs),
    /// Cross-validate a subset and write the confusion matrix and metrics.
    Evaluate(EvaluateArgs),
    /// Describe a selected subset and its accuracy trajectory.
    Report(ReportArgs),
    /// Generate a synthetic planted-feature dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Config file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// `scale`, `scale*<m>` or a positive number.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub calibrate: bool,
    /// Stop after this many features, 0 for no cap.
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub min_improvement: Option<f64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    config.$field = v;
                }
            )*};
        }
        set!(
            seed,
            threads,
            folds,
            train_ratio,
            c,
            tolerance,
            max_features,
            min_improvement
        );
        if let Some(g) = &self.gamma {
            config.gamma = g.parse()?;
        }
        if self.calibrate {
            config.calibrate = true;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output CSV; the resolved config goes to `<out>.config.toml`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub subset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Pick C and gamma by a coarse cross-validated grid.
    #[arg(long)]
    pub grid_search: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub subset: PathBuf,
    /// Manifest supplying mean neutral landmark positions for the plot data.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write landmark coordinates and selected bars as CSV for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub landmarks: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub planted: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Run a parsed command line; report text goes to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let threads = match &cli.command {
        Command::Extract(a) => a.overrides.resolve()?.threads,
        Command::Select(a) => a.overrides.resolve()?.threads,
        Command::Evaluate(a) => a.overrides.resolve()?.threads,
        Command::Synth(a) => a.overrides.resolve()?.threads,
        Command::Report(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let text = pool.install(|| match cli.command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Synth(a) => cmd_synth(&a),
    })?;
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn require_manifest(flag: &Option<PathBuf>, config: &mut RunConfig) -> Result<PathBuf> {
    if let Some(path) = flag {
        config.manifest = Some(path.clone());
    }
    config
        .manifest
        .clone()
        .ok_or_else(|| Error::Config("no manifest given (use --manifest or set `manifest`)".into()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<String> {
    let mut config = args.overrides.resolve()?;
    let manifest = require_manifest(&args.manifest, &mut config)?;
    let dataset = load_manifest(&manifest)?;
    let matrix = FeatureMatrix::from_dataset(&dataset)?;
    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    write_atomic(&args.out, &csv)?;
    let mut config_path = args.out.clone().into_os_string();
    config_path.push(".config.toml");
    config.save(Path::new(&config_path))?;
    Ok(format!(
        "wrote {} rows x {} columns to {}\n",
        matrix.len(),
        matrix.dim() + 2,
        args.out.display()
    ))
}

pub fn cmd_select(args: &SelectArgs) -> Result<String> {
    let mut config = args.overrides.resolve()?;
    let manifest = require_manifest(&args.manifest, &mut config)?;
    let dataset = load_manifest(&manifest)?;
    let matrix = FeatureMatrix::from_dataset(&dataset)?;
    let trace = sfs(&matrix, &config.selection())?;

    create_dir(&args.out)?;
    save_subset(
        matrix.landmark_count,
        &trace.final_subset,
        &args.out.join("subset.txt"),
    )?;
    write_atomic(&args.out.join("trace.csv"), trace_csv(&trace).as_bytes())?;
    let rendered = render_trace(&trace);
    write_atomic(&args.out.join("trace.txt"), rendered.as_bytes())?;
    config.save(&args.out.join("config.toml"))?;
    Ok(format!(
        "{rendered}selected {} features, final accuracy {:.4}\n",
        trace.steps.len(),
        trace.final_accuracy()
    ))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let mut config = args.overrides.resolve()?;
    let manifest = require_manifest(&args.manifest, &mut config)?;
    if let Some(path) = &args.subset {
        config.subset = Some(path.clone());
    }
    let subset_path = config
        .subset
        .clone()
        .ok_or_else(|| Error::Config("no subset given (use --subset or set `subset`)".into()))?;
    config.grid_search |= args.grid_search;

    let subset = load_subset(&subset_path)?;
    let dataset = load_manifest(&manifest)?;
    if subset.landmark_count != dataset.landmark_count {
        return Err(Error::LandmarkCountMismatch {
            expected: dataset.landmark_count,
            found: subset.landmark_count,
        });
    }
    if subset.features.is_empty() {
        return Err(Error::Domain("subset file lists no features".into()));
    }
    let matrix = FeatureMatrix::from_dataset(&dataset)?;
    let report = if config.grid_search {
        let best = grid_search(&matrix, &subset.features, &config.evaluation())?;
        config.c = best.svm.c;
        config.gamma = best.svm.gamma;
        config.grid_search = false;
        best
    } else {
        cross_validate(&matrix, &subset.features, &config.evaluation())?
    };

    let flats = crate::features::flat_indices(&subset.features, matrix.landmark_count)?;
    let all: Vec<usize> = (0..matrix.len()).collect();
    let model = train_multiclass(
        &matrix.normalized_rows(&flats, &all)?,
        &matrix.label_codes(),
        ExpressionLabel::COUNT,
        &config.svm(),
    )?;

    create_dir(&args.out)?;
    let table = render_confusion(&report.confusion, &ExpressionLabel::ALL)?;
    let summary = report.summary_line();
    write_atomic(&args.out.join("confusion.txt"), table.as_bytes())?;
    write_atomic(
        &args.out.join("confusion_counts.csv"),
        counts_csv(&report.confusion, &ExpressionLabel::ALL).as_bytes(),
    )?;
    write_atomic(
        &args.out.join("summary.txt"),
        format!("{summary}\n").as_bytes(),
    )?;
    save_model(&model, &args.out.join("model.txt"))?;
    config.save(&args.out.join("config.toml"))?;
    Ok(format!("{table}{summary}\n"))
}

/// `landmark i ↔ landmark j, horizontal|vertical`
pub fn describe_feature(feature: &FeatureIndex) -> String {
    format!(
        "landmark {} \u{2194} landmark {}, {}",
        feature.i,
        feature.j,
        feature.axis.name()
    )
}

/// Per-landmark mean of the neutral frames.
pub fn mean_neutral_shape(dataset: &Dataset) -> Vec<(f64, f64)> {
    let n = dataset.len().max(1) as f64;
    let mut mean = vec![(0.0, 0.0); dataset.landmark_count];
    for ex in &dataset.examples {
        for (m, p) in mean.iter_mut().zip(ex.neutral.points()) {
            m.0 += p.x / n;
            m.1 += p.y / n;
        }
    }
    mean
}

/// Plot data: one `landmark` row per landmark position and one `bar` row per
/// selected feature, in selection order.
pub fn plot_data_csv(trace: &SelectionTrace, shape: Option<&[(f64, f64)]>) -> String {
    let mut out = String::from("kind,step,i,j,axis,x_i,y_i,x_j,y_j,accuracy\n");
    let coord = |k: usize| {
        shape.map_or((String::new(), String::new()), |s| {
            (s[k].0.to_string(), s[k].1.to_string())
        })
    };
    if let Some(s) = shape {
        for (k, (x, y)) in s.iter().enumerate() {
            let _ = writeln!(out, "landmark,,{k},,,{x},{y},,,");
        }
    }
    for (n, step) in trace.steps.iter().enumerate() {
        let f = step.feature;
        let ((xi, yi), (xj, yj)) = (coord(f.i), coord(f.j));
        let _ = writeln!(
            out,
            "bar,{},{},{},{},{xi},{yi},{xj},{yj},{}",
            n + 1,
            f.i,
            f.j,
            f.axis.short(),
            step.accuracy
        );
    }
    out
}

/// Selected features listed in a plot-data file, in step order.
pub fn parse_plot_data(text: &str, landmark_count: usize) -> Result<Vec<FeatureIndex>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut bars = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        if record.get(0) != Some("bar") {
            continue;
        }
        let line = n + 2;
        let field = |k: usize| -> Result<usize> {
            record
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse("plot data", line, format!("bad column {k}")))
        };
        let axis = record
            .get(4)
            .and_then(crate::features::Axis::from_short)
            .ok_or_else(|| Error::parse("plot data", line, "bad axis"))?;
        bars.push((
            field(1)?,
            FeatureIndex::new(field(2)?, field(3)?, axis, landmark_count)?,
        ));
    }
    bars.sort_by_key(|(step, _)| *step);
    Ok(bars.into_iter().map(|(_, f)| f).collect())
}

pub fn cmd_report(args: &ReportArgs) -> Result<String> {
    let subset = load_subset(&args.subset)?;
    let trace_text = std::fs::read_to_string(&args.trace).map_err(|e| Error::io(&args.trace, e))?;
    let trace = parse_trace_csv(&trace_text, subset.landmark_count, 0)?;
    if trace.final_subset != subset.features {
        return Err(Error::Domain(format!(
            "trace {} and subset {} list different features",
            args.trace.display(),
            args.subset.display()
        )));
    }

    let mut out = format!("selected features ({}):\n", subset.features.len());
    for (n, f) in subset.features.iter().enumerate() {
        let _ = writeln!(out, "{:>3}. {}", n + 1, describe_feature(f));
    }
    let trajectory: Vec<String> = trace
        .accuracies()
        .iter()
        .map(|a| format!("{a:.4}"))
        .collect();
    let _ = writeln!(out, "accuracy trajectory: {}", trajectory.join(" -> "));

    if let Some(path) = &args.plot_data {
        let shape = match &args.manifest {
            Some(m) => {
                let dataset = load_manifest(m)?;
                if dataset.landmark_count != subset.landmark_count {
                    return Err(Error::LandmarkCountMismatch {
                        expected: dataset.landmark_count,
                        found: subset.landmark_count,
                    });
                }
                Some(mean_neutral_shape(&dataset))
            }
            None => None,
        };
        write_atomic(path, plot_data_csv(&trace, shape.as_deref()).as_bytes())?;
        let _ = writeln!(out, "plot data written to {}", path.display());
    }
    Ok(out)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let mut config = args.overrides.resolve()?;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = args.$flag {
                config.$field = v;
            }
        )*};
    }
    set!(
        landmarks => synth_landmarks,
        classes => synth_classes,
        per_class => synth_per_class,
        planted => synth_planted,
        amplitude => synth_amplitude,
        noise => synth_noise
    );
    let synth = generate(&config.synth_spec()?)?;

    let frames = args.out.join("frames");
    create_dir(&frames)?;
    let mut entries = Vec::with_capacity(synth.dataset.len());
    for ex in &synth.dataset.examples {
        let neutral = PathBuf::from("frames").join(format!("{}_neutral.pts", ex.id));
        let apex = PathBuf::from("frames").join(format!("{}_apex.pts", ex.id));
        write_atomic(
            &args.out.join(&neutral),
            ex.neutral.to_pts_string().as_bytes(),
        )?;
        write_atomic(&args.out.join(&apex), ex.apex.to_pts_string().as_bytes())?;
        entries.push(ManifestEntry {
            id: ex.id.clone(),
            subject: ex.subject.clone(),
            label: ex.label,
            neutral_path: neutral,
            apex_path: apex,
        });
    }
    let manifest = DatasetManifest {
        landmark_count: synth.dataset.landmark_count,
        entries,
    };
    let manifest_path = args.out.join("manifest.csv");
    write_atomic(&manifest_path, manifest.to_csv_string()?.as_bytes())?;
    let planted = synth.planted();
    write_atomic(
        &args.out.join("planted.txt"),
        format_subset(synth.dataset.landmark_count, &planted).as_bytes(),
    )?;
    config.manifest = Some(manifest_path.clone());
    config.save(&args.out.join("config.toml"))?;

    let mut out = format!(
        "wrote {} examples ({} landmarks) to {}\nplanted:\n",
        synth.dataset.len(),
        synth.dataset.landmark_count,
        manifest_path.display()
    );
    for f in &planted {
        let _ = writeln!(out, "  {}", describe_feature(f));
    }
    Ok(out)
}
