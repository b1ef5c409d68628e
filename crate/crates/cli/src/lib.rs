//! `hyplab` command-line front end: reads representation specs, runs the
//! experiments of `hyplab-core` and writes CSV, JSON and SVG artifacts.

pub mod export;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use hyplab_core::entropy::{box_dimension_default, circle_points, dense_words, koch_points, root_entropy, segment_points};
use hyplab_core::flags::limit_set_view;
use hyplab_core::flow::{orbital_growth, parse_potential, potential_net, validate_potential, NET_POINTS};
use hyplab_core::rep::gap;
use hyplab_core::surface::{fuchsian_reference, ClassCatalog, FuchsianRep};
use hyplab_core::{LinearRep, RepSpec};

use export::{write_csv, write_json, write_svg, Cell, Meta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(hyplab_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Compute(hyplab_core::Error::Config(_)) => EXIT_CONFIG,
            CliError::Compute(_) | CliError::Io(_) => EXIT_COMPUTE,
        }
    }

    /// Machine-readable `{"error": code, "message": text}`.
    pub fn to_json(&self) -> String {
        let (code, message) = match self {
            CliError::Config(m) => ("ConfigError", m.clone()),
            CliError::Compute(e) => (e.code(), e.to_string()),
            CliError::Io(m) => ("IoError", m.clone()),
        };
        json!({ "error": code, "message": message }).to_string()
    }
}

impl From<hyplab_core::Error> for CliError {
    fn from(e: hyplab_core::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "hyplab", version, about = "Numerical laboratory for hyperconvex surface-group representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalue gaps of every class up to a reference length (CSV).
    Spectrum(SpectrumArgs),
    /// Fitted k-th root entropy (JSON).
    Entropy(EntropyArgs),
    /// Limit set in a tangent chart (CSV, optional SVG).
    Limitset(LimitsetArgs),
    /// Box-counting dimension of a limit set or oracle curve (JSON).
    Dimension(DimensionArgs),
    /// Orbit growth rate of a reparameterized geodesic flow (JSON).
    Flow(FlowArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Representation spec: a JSON file, or inline JSON.
    #[arg(long)]
    pub rep: String,
    #[arg(long, default_value_t = 6.0)]
    pub max_length: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    #[arg(long)]
    pub rep: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub rmax: f64,
    /// Fit window `lo:hi`.
    #[arg(long)]
    pub window: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LimitsetArgs {
    #[arg(long)]
    pub rep: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of group elements whose attracting points are sampled.
    #[arg(long, default_value_t = 5000)]
    pub words: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Oracle {
    Circle,
    Segment,
    Koch,
}

#[derive(Args, Debug)]
pub struct DimensionArgs {
    /// Limit set of this representation; exclusive with `--oracle`.
    #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
    pub rep: Option<String>,
    #[arg(long)]
    pub oracle: Option<Oracle>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000)]
    pub words: usize,
    /// Seeds the box-grid offsets.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// `const:<c>` or `bump:amp=<a>,width=<w>`.
    #[arg(long)]
    pub potential: String,
    #[arg(long)]
    pub rmax: f64,
    #[arg(long)]
    pub window: String,
    /// Seeds the net on which the potential is validated.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// `all`, or a comma-separated list of criterion numbers.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Directory for the report files.
    #[arg(long, default_value = "verify-out")]
    pub out: PathBuf,
}

/// Parse `argv` (including the program name), run, and return the exit code.
/// Errors are reported as JSON on standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            eprintln!("{}", CliError::Config(e.to_string().trim().to_string()).to_json());
            return EXIT_CONFIG;
        }
    };
    let outcome = configure_threads().and_then(|()| dispatch(cli.command));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Honour `HYPLAB_THREADS`; the global pool can only be set once per process.
fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HYPLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HYPLAB_THREADS must be a positive integer, got '{v}'")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> CliResult<i32> {
    match command {
        Command::Spectrum(a) => spectrum(&a),
        Command::Entropy(a) => entropy(&a),
        Command::Limitset(a) => limitset(&a),
        Command::Dimension(a) => dimension(&a),
        Command::Flow(a) => flow(&a),
        Command::Verify(a) => verify::verify(&a),
    }
}

/// A spec file path, or inline JSON when the argument starts with `{`.
pub fn load_spec(arg: &str) -> CliResult<RepSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Config(format!("cannot read {arg}: {e}")))?
    };
    Ok(RepSpec::from_json(&text)?)
}

/// `lo:hi` with `0 < lo < hi`.
pub fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Config(format!("window '{s}' must be lo:hi with 0 < lo < hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn positive(name: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn build(spec: &RepSpec) -> CliResult<(FuchsianRep, LinearRep)> {
    let rep0 = fuchsian_reference()?;
    let rep = spec.build(&rep0)?;
    Ok((rep0, rep))
}

fn check_k(rep: &LinearRep, k: usize) -> CliResult<()> {
    if k == 0 || k >= rep.d {
        return Err(CliError::Config(format!("k = {k} outside 1..{}", rep.d - 1)));
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn spectrum(a: &SpectrumArgs) -> CliResult<i32> {
    let spec = load_spec(&a.rep)?;
    let max_length = positive("max-length", a.max_length)?;
    let (rep0, rep) = build(&spec)?;
    let meta = Meta::new("spectrum", &json!({ "command": "spectrum", "rep": spec, "max_length": max_length }));
    let cat = ClassCatalog::enumerate(&rep0, max_length)?;
    // Ties (no gap at some index) are skipped and counted.
    let per_class: Vec<CliResult<Vec<(usize, Option<hyplab_core::linalg::C64>)>>> = cat
        .classes
        .par_iter()
        .map(|c| {
            (1..rep.d)
                .map(|k| match gap(&rep, &c.rep_word, k) {
                    Ok(z) => Ok((k, Some(z))),
                    Err(hyplab_core::Error::InsufficientGap { .. }) => Ok((k, None)),
                    Err(e) => Err(e.into()),
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (c, gaps) in cat.classes.iter().zip(per_class) {
        for (k, z) in gaps? {
            match z {
                Some(z) => rows.push(vec![
                    Cell::Text(c.rep_word.to_string()),
                    Cell::Float(c.length),
                    Cell::Int(k as i64),
                    Cell::Float(z.re),
                    Cell::Float(z.im),
                ]),
                None => skipped += 1,
            }
        }
    }
    ensure_parent(&a.out)?;
    let notes = [format!("classes {} skipped_gaps {skipped}", cat.len())];
    write_csv(&a.out, &meta, &["word", "length", "k", "re_L", "im_L"], &rows, &notes)?;
    Ok(EXIT_OK)
}

fn entropy(a: &EntropyArgs) -> CliResult<i32> {
    let spec = load_spec(&a.rep)?;
    let window = parse_window(&a.window)?;
    let rmax = positive("rmax", a.rmax)?;
    let (rep0, rep) = build(&spec)?;
    check_k(&rep, a.k)?;
    let meta = Meta::new(
        "entropy",
        &json!({ "command": "entropy", "rep": spec, "k": a.k, "rmax": rmax, "window": window }),
    );
    let fit = root_entropy(&rep, &rep0, a.k, rmax, window)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &meta, &fit)?;
    Ok(EXIT_OK)
}

fn limitset(a: &LimitsetArgs) -> CliResult<i32> {
    let spec = load_spec(&a.rep)?;
    let (rep0, rep) = build(&spec)?;
    check_k(&rep, a.k)?;
    if a.words == 0 {
        return Err(CliError::Config("words must be positive".into()));
    }
    let meta = Meta::new("limitset", &json!({ "command": "limitset", "rep": spec, "k": a.k, "words": a.words }));
    let view = limit_set_view(&rep, &rep0, &dense_words(&rep0, a.words), a.k)?;
    let rows: Vec<Vec<Cell>> = view
        .iter()
        .map(|p| vec![Cell::Text(p.word.to_string()), Cell::Float(p.angle), Cell::Float(p.x), Cell::Float(p.y)])
        .collect();
    ensure_parent(&a.out)?;
    write_csv(&a.out, &meta, &["word", "angle", "x", "y"], &rows, &[format!("points {}", rows.len())])?;
    if let Some(svg) = &a.svg {
        ensure_parent(svg)?;
        let pts: Vec<[f64; 2]> = view.iter().map(|p| [p.x, p.y]).collect();
        write_svg(svg, &meta, &format!("limit set, k = {}", a.k), &pts)?;
    }
    Ok(EXIT_OK)
}

fn dimension(a: &DimensionArgs) -> CliResult<i32> {
    let (source, points) = match (&a.rep, a.oracle) {
        (_, Some(o)) => {
            let pts = match o {
                Oracle::Circle => circle_points(a.words),
                Oracle::Segment => segment_points(a.words),
                // Depth 7 has 4^7 segments; `words` samples are spread over them.
                Oracle::Koch => koch_points(7, a.words.div_ceil(4usize.pow(7)).max(1)),
            };
            (json!({ "oracle": format!("{o:?}").to_lowercase() }), pts)
        }
        (Some(r), None) => {
            let spec = load_spec(r)?;
            let (rep0, rep) = build(&spec)?;
            check_k(&rep, a.k)?;
            let view = limit_set_view(&rep, &rep0, &dense_words(&rep0, a.words), a.k)?;
            (json!({ "rep": spec, "k": a.k }), view.iter().map(|p| [p.x, p.y]).collect())
        }
        (None, None) => return Err(CliError::Config("one of --rep or --oracle is required".into())),
    };
    let meta = Meta::new(
        "dimension",
        &json!({ "command": "dimension", "source": source, "words": a.words, "seed": a.seed }),
    );
    let fit = box_dimension_default(&points, a.seed)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &meta, &json!({ "points": points.len(), "fit": fit }))?;
    if let Some(svg) = &a.svg {
        ensure_parent(svg)?;
        write_svg(svg, &meta, "box-counting input", &points)?;
    }
    Ok(EXIT_OK)
}

fn flow(a: &FlowArgs) -> CliResult<i32> {
    let window = parse_window(&a.window)?;
    let rmax = positive("rmax", a.rmax)?;
    let rep0 = fuchsian_reference()?;
    let r = parse_potential(&rep0, &a.potential)?;
    let meta = Meta::new(
        "flow",
        &json!({ "command": "flow", "potential": a.potential, "rmax": rmax, "window": window, "seed": a.seed }),
    );
    let observed = validate_potential(r.as_ref(), &potential_net(NET_POINTS, a.seed))?;
    let fit = orbital_growth(&rep0, r.as_ref(), rmax, window)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &meta, &json!({ "bounds": r.bounds(), "observed_range": observed, "fit": fit }))?;
    Ok(EXIT_OK)
}
