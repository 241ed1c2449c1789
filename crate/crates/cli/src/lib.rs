//! Command-line harness: phantom generation, preprocessing exports and
//! active learning experiments driven by a TOML experiment file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use geoal::engine::{
    read_curve_csv, write_report, Dataset, LearningCurve, PreprocessConfig, Strategy,
};
use geoal::experiment::{run_experiment, sweep_radius, ExperimentSpec};
use geoal::io::{load_dataset, save_dataset, save_ids};
use geoal::volume::{generate_synthetic, Dims, LabelVolume, SyntheticConfig};

#[derive(Parser, Debug)]
#[command(
    name = "geoal",
    version,
    about = "Geometry-aware active learning for volumetric segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic blob phantom with ground truth.
    Synth(SynthArgs),
    /// Oversegment a volume and export the partition and neighbour graph.
    Segment(PrepArgs),
    /// Export the per-supervoxel feature matrix as CSV.
    Features(PrepArgs),
    /// Run the strategies of an experiment file.
    Run(ExperimentArgs),
    /// Repeat pCUs for several patch radii.
    SweepRadius(SweepArgs),
    /// Re-render the summary and chart from curve CSVs in a directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Header path to write; the raw files go next to it.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with synthetic phantom parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size as NXxNYxNZ.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    #[arg(long)]
    blobs: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct PrepArgs {
    /// Dataset header to read.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (segment) or CSV path (features).
    #[arg(long)]
    out: PathBuf,
    /// Experiment file whose preprocessing section is used.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the output directory of the experiment file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed of the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the repetitions.
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated strategies, e.g. `Rs,FUs,pCUs`.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    strategies: Option<Vec<Strategy>>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated patch radii.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory holding `curve_*.csv` files.
    #[arg(long)]
    out: PathBuf,
}

fn parse_dims(s: &str) -> std::result::Result<Dims, String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("bad dims `{s}`: {e}"))?;
    match nums.as_slice() {
        [x, y, z] => Ok(Dims::new(*x, *y, *z)),
        [x, y] => Ok(Dims::new(*x, *y, 1)),
        _ => Err(format!("bad dims `{s}`, expected NXxNYxNZ")),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.trim().parse().map_err(|e: geoal::Error| e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Segment(a) => segment(a),
        Command::Features(a) => features(a),
        Command::Run(a) => {
            let (spec, threads) = load_spec(&a)?;
            let curves = run_experiment(&spec, threads)?;
            print_summary(&curves, &spec.out_dir)
        }
        Command::SweepRadius(a) => {
            let (mut spec, threads) = load_spec(&a.experiment)?;
            if let Some(radii) = a.radii {
                spec.sweep_radii = radii;
                spec.validate()?;
            }
            let curves = sweep_radius(&spec, threads)?;
            print_summary(&curves, &spec.out_dir)
        }
        Command::Report(a) => report(a),
    }
}

fn load_spec(a: &ExperimentArgs) -> Result<(ExperimentSpec, Option<usize>)> {
    let mut spec =
        ExperimentSpec::load(&a.spec).with_context(|| format!("loading {}", a.spec.display()))?;
    if let Some(out) = &a.out {
        spec.out_dir = out.clone();
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(s) = &a.strategies {
        spec.strategies = s.clone();
    }
    spec.validate()?;
    if a.threads == Some(0) {
        bail!("--threads must be positive");
    }
    Ok((spec, a.threads))
}

fn print_summary(curves: &[LearningCurve], out: &Path) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    for c in curves {
        let s = geoal::engine::summarize(c)?;
        writeln!(
            stdout,
            "{:>10}  mean final VOC {:.4}  dice {:.4}  80% interval {:.4}",
            s.label, s.mean_voc, s.mean_dice, s.voc_variability
        )?;
    }
    writeln!(stdout, "wrote {}", out.display())?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SyntheticConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.rng_seed = seed;
    }
    if let Some(d) = a.dims {
        cfg.dims = d;
    }
    if let Some(b) = a.blobs {
        cfg.blob_count = b;
    }
    if let Some(n) = a.noise {
        cfg.noise_sigma = n;
    }
    let (vol, labels) = generate_synthetic(&cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_dataset(&vol, Some(&labels), &a.out)?;
    println!(
        "wrote {} ({}, {} foreground voxels)",
        a.out.display(),
        vol.dims(),
        labels.foreground_count()
    );
    Ok(())
}

fn preprocess_config(spec: &Option<PathBuf>) -> Result<PreprocessConfig> {
    match spec {
        Some(p) => Ok(ExperimentSpec::load(p)
            .with_context(|| format!("loading {}", p.display()))?
            .preprocess),
        None => Ok(PreprocessConfig::default()),
    }
}

fn load_labeled(path: &Path) -> Result<(geoal::volume::Volume, LabelVolume)> {
    let (vol, labels) = load_dataset(path)?;
    // unlabeled volumes can still be segmented; an empty mask stands in
    let labels = match labels {
        Some(l) => l,
        None => LabelVolume::new(vol.dims(), vec![0; vol.len()])?,
    };
    Ok((vol, labels))
}

fn segment(a: PrepArgs) -> Result<()> {
    let cfg = preprocess_config(&a.spec)?;
    let (vol, labels) = load_labeled(&a.input)?;
    let data = Dataset::prepare(vol, labels, &cfg)?;
    let p = &data.partition;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_ids(
        p.dims(),
        p.spacing(),
        p.assignment(),
        a.out.join("supervoxels.hdr"),
    )?;

    let mut w = csv::Writer::from_path(a.out.join("supervoxels.csv"))?;
    w.write_record(["id", "size", "x", "y", "z", "radius", "label"])?;
    for i in 0..p.count() {
        let c = p.centers()[i];
        w.write_record([
            i.to_string(),
            p.sizes()[i].to_string(),
            c[0].to_string(),
            c[1].to_string(),
            c[2].to_string(),
            p.radii()[i].to_string(),
            data.truth[i].to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(a.out.join("graph.csv"))?;
    w.write_record(["id", "neighbor", "weight"])?;
    for i in 0..data.graph.len() {
        for (n, wt) in data.graph.neighbors(i).iter().zip(data.graph.transition(i)) {
            w.write_record([i.to_string(), n.to_string(), wt.to_string()])?;
        }
    }
    w.flush()?;
    println!(
        "{} supervoxels, k = {}, wrote {}",
        p.count(),
        data.graph.k(),
        a.out.display()
    );
    Ok(())
}

fn features(a: PrepArgs) -> Result<()> {
    let cfg = preprocess_config(&a.spec)?;
    let (vol, labels) = load_labeled(&a.input)?;
    let data = Dataset::prepare(vol, labels, &cfg)?;
    let f = &data.features;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    f.write_csv(&a.out)?;
    println!(
        "{} rows x {} features, wrote {}",
        f.len(),
        f.dim(),
        a.out.display()
    );
    Ok(())
}

/// Strategy encoded in a curve label: the label itself, or its prefix
/// before `_` for sweep curves such as `pCUs_r10`.
fn strategy_of(label: &str) -> Option<Strategy> {
    label
        .parse()
        .ok()
        .or_else(|| label.split('_').next().and_then(|p| p.parse().ok()))
}

fn report(a: ReportArgs) -> Result<()> {
    let mut found = Vec::new();
    for entry in fs::read_dir(&a.out).with_context(|| format!("reading {}", a.out.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(label) = name
            .strip_prefix("curve_")
            .and_then(|n| n.strip_suffix(".csv"))
        else {
            continue;
        };
        let strategy = strategy_of(label).with_context(|| format!("{name}: unknown strategy"))?;
        found.push((strategy, label.to_string(), path));
    }
    if found.is_empty() {
        bail!("no curve_*.csv files in {}", a.out.display());
    }
    found.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
    let curves = found
        .into_iter()
        .map(|(strategy, label, path)| {
            let mut c = read_curve_csv(&path, strategy)?;
            c.label = label;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    write_report(&curves, &a.out)?;
    print_summary(&curves, &a.out)
}
