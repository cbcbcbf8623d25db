//! `odis` command-line tool.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when the inputs cannot be
//! read or processed.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::info;
use odis::blending::{blend_views, embed_nfov_center};
use odis::codebook::{train_codebook_with_report, CodeGrid, Codebook};
use odis::conditioning::{make_condition, ConditionSpec};
use odis::geometry::{direction_from_yaw_pitch, rhombicuboctahedron_directions, UnitVec3};
use odis::io::{load_mask, load_png, save_mask, save_png};
use odis::metrics::MetricReport;
use odis::pipeline::{
    fixed_codes, oracle_low_codes, oracle_view_codes, reconstruct_direct, reconstruct_via_views, resize_mask, Pipeline,
    PipelineConfig,
};
use odis::projection::{extract_nfov, project_nfov_to_erp, ErpImage, NfovCamera, NfovImage, ViewSet};
use odis::raster::{Mask, Raster};
use odis::sampler::{
    sample, Conditioning, ContextCopyPredictor, MarginalPredictor, OraclePredictor, Predictor, SampleConfig,
};
use odis::scene::Scene;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "odis", version, about = "Two-stage omni-directional image synthesis toolkit")]
#[command(args_override_self = true, subcommand_required = true, arg_required_else_help = true)]
struct Cli {
    /// `key = value` file supplying defaults for the subcommand's options;
    /// flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// error, warn, info, debug or trace; `RUST_LOG` overrides it.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the 26 standard view directions as CSV.
    Directions,
    /// Cut a perspective view out of a panorama.
    Extract(ExtractArgs),
    /// Re-project a perspective view onto an otherwise black panorama.
    Project(ProjectArgs),
    /// Blend the 26 standard views back into a panorama.
    Blend(BlendArgs),
    /// Place a forward-facing photo on the sphere as a condition.
    Embed(EmbedArgs),
    /// Train a k-means patch codebook on a directory of PNGs.
    TrainCodebook(TrainArgs),
    /// Quantize an image into a code grid.
    Encode(EncodeArgs),
    /// Render a code grid back into an image.
    Decode(DecodeArgs),
    /// Build a conditional panorama and its known-region mask.
    Mask(MaskArgs),
    /// Fill the MASK entries of a code grid by iterative sampling.
    Sample(SampleArgs),
    /// Run the two-stage synthesis.
    Synthesize(SynthArgs),
    /// Compare direct and view-based quantization of a panorama.
    ReconstructCompare(CompareArgs),
    /// Area-weighted error, seam and coverage report for two panoramas.
    Metrics(MetricsArgs),
    /// Render a seeded procedural test panorama.
    Scene(SceneArgs),
}

#[derive(Args)]
#[group(id = "direction", required = true)]
struct DirectionArgs {
    /// Index into the standard view set (see `directions`).
    #[arg(long, group = "direction", conflicts_with_all = ["yaw", "pitch"])]
    dir: Option<usize>,
    /// Longitude of the view centre in degrees.
    #[arg(long, group = "direction", requires = "pitch", allow_hyphen_values = true)]
    yaw: Option<f64>,
    /// Latitude of the view centre in degrees.
    #[arg(long, requires = "yaw", allow_hyphen_values = true)]
    pitch: Option<f64>,
}

impl DirectionArgs {
    fn direction(&self) -> Result<UnitVec3> {
        match (self.dir, self.yaw, self.pitch) {
            (Some(k), _, _) => rhombicuboctahedron_directions()
                .get(k)
                .copied()
                .ok_or_else(|| usage(format!("--dir {k} is out of range 0..26"))),
            (None, Some(yaw), Some(pitch)) => Ok(direction_from_yaw_pitch(yaw, pitch)),
            _ => Err(usage("give --dir or both --yaw and --pitch")),
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    direction: DirectionArgs,
    /// Horizontal and vertical field of view in degrees.
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    direction: DirectionArgs,
    /// Horizontal field of view in degrees; the vertical one follows from
    /// the image aspect.
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// Rows of the output panorama.
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the footprint (white = covered).
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct BlendArgs {
    /// The 26 views in standard direction order.
    #[arg(long, num_args = 1.., required = true)]
    views: Vec<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// Rows of the output panorama; defaults to four times the view size.
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 126.87)]
    fovw: f64,
    #[arg(long, default_value_t = 112.62)]
    fovh: f64,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mask: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of training PNGs.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = 256)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    patch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resize every (2:1) training panorama to this many rows first.
    #[arg(long)]
    height: Option<usize>,
    /// Also train on the 26 standard views of each panorama at this size.
    #[arg(long)]
    view_size: Option<usize>,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    /// Known-region mask; patches not entirely known become MASK.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output grid; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Center,
    Boxes,
    Ground,
    Two,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long, value_enum)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mask_out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum GridPredictor {
    /// Code frequencies of `--corpus`, or of the grid's own known codes.
    Marginal,
    /// Point masses on `--truth`.
    Oracle,
    /// Per-position frequencies of `--corpus`.
    Contextcopy,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    codes: PathBuf,
    #[arg(long, value_enum, default_value = "marginal")]
    predictor: GridPredictor,
    /// Complete grid for the oracle predictor.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Grids to fit the marginal or context-copy predictor on.
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long = "T", default_value_t = 16)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Output grid; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SynthPredictor {
    /// Code frequencies of the known region.
    Marginal,
    /// Every code equally likely.
    Uniform,
    /// Codes of `--reference`.
    Oracle,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    cond: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long, value_enum, default_value = "marginal")]
    predictor: SynthPredictor,
    /// Ground-truth panorama for the oracle predictor.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long = "T", default_value_t = 16)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Rows of the stage-1 panorama.
    #[arg(long, default_value_t = 256)]
    low_height: usize,
    /// Rows of the output panorama.
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 256)]
    view_size: usize,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    save_stage1: Option<PathBuf>,
    /// Directory for the 26 synthesized views (created if missing).
    #[arg(long)]
    save_views: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long, default_value_t = 256)]
    view_size: usize,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// JSON report; standard output if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference panorama.
    #[arg(long)]
    a: PathBuf,
    /// Candidate panorama; its seam is scored.
    #[arg(long)]
    b: PathBuf,
    /// View set used for the coverage fields.
    #[arg(long, default_value_t = 256)]
    view_size: usize,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// JSON report; standard output if omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    height: usize,
    /// Supersampling factor per axis.
    #[arg(long, default_value_t = 2)]
    ss: usize,
    #[arg(long)]
    out: PathBuf,
}

/// A request that is well-formed for clap but still meaningless.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::config_path(&args) {
        match config::inject(&Cli::command(), args, Path::new(&path)) {
            Ok(a) => args = a,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn read_png(path: &Path) -> Result<Raster> {
    load_png(path).with_context(|| format!("reading image {}", path.display()))
}

fn read_erp(path: &Path) -> Result<ErpImage> {
    ErpImage::new(read_png(path)?).with_context(|| format!("reading panorama {}", path.display()))
}

fn read_mask(path: &Path) -> Result<Mask> {
    load_mask(path).with_context(|| format!("reading mask {}", path.display()))
}

fn read_codebook(path: &Path) -> Result<Codebook> {
    Codebook::load(path).with_context(|| format!("reading codebook {}", path.display()))
}

fn read_grid(path: &Path) -> Result<CodeGrid> {
    let text = fs::read_to_string(path).with_context(|| format!("reading code grid {}", path.display()))?;
    CodeGrid::from_text(&text, None).with_context(|| format!("parsing code grid {}", path.display()))
}

fn write_png(raster: &Raster, path: &Path) -> Result<()> {
    save_png(raster, path).with_context(|| format!("writing {}", path.display()))
}

fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing to standard output"),
    }
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(&text, path)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Directions => directions(),
        Cmd::Extract(a) => extract(a),
        Cmd::Project(a) => project(a),
        Cmd::Blend(a) => blend(a),
        Cmd::Embed(a) => embed(a),
        Cmd::TrainCodebook(a) => train(a),
        Cmd::Encode(a) => encode(a),
        Cmd::Decode(a) => decode(a),
        Cmd::Mask(a) => mask(a),
        Cmd::Sample(a) => sample_grid(a),
        Cmd::Synthesize(a) => synthesize(a),
        Cmd::ReconstructCompare(a) => reconstruct_compare(a),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Scene(a) => scene(a),
    }
}

fn directions() -> Result<()> {
    let mut out = String::from("index,x,y,z\n");
    for (i, d) in rhombicuboctahedron_directions().iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", d.x(), d.y(), d.z()));
    }
    write_text(&out, None)
}

fn extract(a: ExtractArgs) -> Result<()> {
    let erp = read_erp(&a.input)?;
    let cam = NfovCamera::looking_at(a.direction.direction()?, a.fov, a.fov, a.size, a.size).map_err(|e| usage(e.to_string()))?;
    write_png(extract_nfov(&erp, &cam).raster(), &a.out)
}

fn project(a: ProjectArgs) -> Result<()> {
    let img = read_png(&a.input)?;
    let fov_h = 2.0 * ((a.fov / 2.0).to_radians().tan() * img.height() as f64 / img.width() as f64).atan().to_degrees();
    let cam = NfovCamera::looking_at(a.direction.direction()?, a.fov, fov_h, img.width(), img.height())
        .map_err(|e| usage(e.to_string()))?;
    let view = project_nfov_to_erp(&NfovImage::new(cam, img)?, 2 * a.height, a.height)?;
    write_png(view.to_erp().raster(), &a.out)?;
    if let Some(m) = &a.mask_out {
        save_mask(&view.coverage(), m).with_context(|| format!("writing {}", m.display()))?;
    }
    Ok(())
}

fn blend(a: BlendArgs) -> Result<()> {
    let dirs = rhombicuboctahedron_directions();
    if a.views.len() != dirs.len() {
        return Err(usage(format!("blend needs {} views, got {}", dirs.len(), a.views.len())));
    }
    let mut projected = Vec::with_capacity(dirs.len());
    let mut height = a.height;
    for (k, (path, d)) in a.views.iter().zip(&dirs).enumerate() {
        let img = read_png(path)?;
        if img.width() != img.height() {
            anyhow::bail!("view {} is {}x{}, expected square", path.display(), img.width(), img.height());
        }
        let h = *height.get_or_insert(4 * img.width());
        let cam = NfovCamera::looking_at(*d, a.fov, a.fov, img.width(), img.height()).map_err(|e| usage(e.to_string()))?;
        projected.push(project_nfov_to_erp(&NfovImage::new(cam, img)?, 2 * h, h)?.with_view_id(k));
    }
    write_png(blend_views(&projected)?.raster(), &a.out)
}

fn embed(a: EmbedArgs) -> Result<()> {
    let img = read_png(&a.input)?;
    let (erp, known) = embed_nfov_center(&img, a.fovw, a.fovh, 2 * a.height, a.height).map_err(|e| usage(e.to_string()))?;
    write_png(erp.raster(), &a.out)?;
    save_mask(&known, &a.mask).with_context(|| format!("writing {}", a.mask.display()))
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        anyhow::bail!("no PNG files in {}", dir.display());
    }
    Ok(files)
}

fn train(a: TrainArgs) -> Result<()> {
    info!("seed = {}", a.seed);
    let views = a.view_size.map(|s| ViewSet::standard(a.fov, s)).transpose().map_err(|e| usage(e.to_string()))?;
    let mut images = Vec::new();
    for path in png_files(&a.images)? {
        let mut img = read_png(&path)?;
        if a.height.is_some() || views.is_some() {
            let erp = read_erp(&path)?;
            if let Some(vs) = &views {
                images.extend(vs.iter().map(|c| extract_nfov(&erp, c).into_raster()));
            }
            if let Some(h) = a.height {
                img = erp.resized(h)?.into_raster();
            }
        }
        images.push(img);
    }
    let (cb, report) = train_codebook_with_report(&images, a.k, a.patch, a.seed)?;
    info!(
        "{} patches, {} iterations, final mse {:.6}",
        report.patches, report.iterations, report.final_mse
    );
    cb.save(&a.out).with_context(|| format!("writing {}", a.out.display()))
}

fn encode(a: EncodeArgs) -> Result<()> {
    let img = read_png(&a.input)?;
    let cb = read_codebook(&a.codebook)?;
    let grid = match &a.mask {
        Some(m) => fixed_codes(&cb, &img, &read_mask(m)?)?,
        None => cb.encode(&img)?,
    };
    write_text(&grid.to_text(), a.out.as_deref())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let grid = read_grid(&a.codes)?;
    let cb = read_codebook(&a.codebook)?;
    write_png(&cb.decode(&grid)?, &a.out)
}

fn mask(a: MaskArgs) -> Result<()> {
    info!("seed = {}", a.seed);
    let erp = read_erp(&a.input)?;
    let spec = match a.variant {
        Variant::Center => ConditionSpec::center(),
        Variant::Boxes => ConditionSpec::random_boxes(),
        Variant::Ground => ConditionSpec::ground(),
        Variant::Two => ConditionSpec::two_view(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (cond, known) = make_condition(&erp, &spec, &mut rng)?;
    write_png(cond.raster(), &a.out)?;
    save_mask(&known, &a.mask_out).with_context(|| format!("writing {}", a.mask_out.display()))
}

fn sample_grid(a: SampleArgs) -> Result<()> {
    info!("seed = {}", a.seed);
    let grid = read_grid(&a.codes)?;
    let k = grid.num_codes();
    let corpus = a.corpus.iter().map(|p| read_grid(p)).collect::<Result<Vec<_>>>()?;
    let predictor: Box<dyn Predictor> = match a.predictor {
        GridPredictor::Marginal if corpus.is_empty() => Box::new(MarginalPredictor::fit(k, [&grid])),
        GridPredictor::Marginal => Box::new(MarginalPredictor::fit(k, &corpus)),
        GridPredictor::Oracle => {
            let truth = a.truth.as_ref().ok_or_else(|| usage("--predictor oracle needs --truth"))?;
            Box::new(OraclePredictor::new(read_grid(truth)?)?)
        }
        GridPredictor::Contextcopy => {
            if corpus.is_empty() {
                return Err(usage("--predictor contextcopy needs --corpus"));
            }
            Box::new(ContextCopyPredictor::fit(k, grid.rows(), grid.cols(), &corpus)?)
        }
    };
    let cfg = SampleConfig {
        steps: a.steps,
        temperature: a.temperature,
        seed: a.seed,
    };
    let out = sample(predictor.as_ref(), &grid, &Conditioning::default(), &cfg)?;
    write_text(&out.to_text(), a.out.as_deref())
}

fn synthesize(a: SynthArgs) -> Result<()> {
    info!("seed = {}", a.seed);
    let cond = read_erp(&a.cond)?;
    let known = read_mask(&a.mask)?;
    let cb = read_codebook(&a.codebook)?;
    let config = PipelineConfig {
        low_height: a.low_height,
        high_height: a.height,
        nfov_size: a.view_size,
        fov_deg: a.fov,
        views: ViewSet::standard(a.fov, a.view_size).map_err(|e| usage(e.to_string()))?,
        steps: a.steps,
        temperature: a.temperature,
        seed: a.seed,
    };
    config.validate(&cb).map_err(|e| usage(e.to_string()))?;
    let k = cb.num_codes();
    let (p1, p2): (Box<dyn Predictor>, Box<dyn Predictor>) = match a.predictor {
        SynthPredictor::Uniform => (Box::new(MarginalPredictor::uniform(k)), Box::new(MarginalPredictor::uniform(k))),
        SynthPredictor::Marginal => {
            // Fit on the codes of fully known patches at each stage's scale.
            let low = cond.resized(config.low_height)?;
            let low_known = resize_mask(&known, low.width(), low.height());
            let low_codes = fixed_codes(&cb, low.raster(), &low_known)?;
            let hi = cond.resized(config.high_height)?;
            let hi_known = resize_mask(&known, hi.width(), hi.height());
            let view_codes = config
                .views
                .iter()
                .map(|cam| {
                    let view = extract_nfov(&hi, cam);
                    fixed_codes(&cb, view.raster(), &odis::conditioning::extract_mask(&hi_known, cam))
                })
                .collect::<odis::Result<Vec<_>>>()?;
            (
                Box::new(MarginalPredictor::fit(k, [&low_codes])),
                Box::new(MarginalPredictor::fit(k, &view_codes)),
            )
        }
        SynthPredictor::Oracle => {
            let path = a.reference.as_ref().ok_or_else(|| usage("--predictor oracle needs --reference"))?;
            let reference = read_erp(path)?;
            (
                Box::new(OraclePredictor::new(oracle_low_codes(&reference, &cb, &config)?)?),
                Box::new(OraclePredictor::per_view(oracle_view_codes(&reference, &cb, &config.views)?)?),
            )
        }
    };
    let pipeline = Pipeline::new(config, &cb, p1.as_ref(), p2.as_ref())?;
    let result = pipeline.synthesize(&cond, &known)?;
    write_png(result.output.raster(), &a.out)?;
    if let Some(p) = &a.save_stage1 {
        write_png(result.stage1.raster(), p)?;
    }
    if let Some(dir) = &a.save_views {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, v) in result.views.iter().enumerate() {
            write_png(v.raster(), &dir.join(format!("view_{i:02}.png")))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    direct: MetricReport,
    via_views: MetricReport,
}

fn reconstruct_compare(a: CompareArgs) -> Result<()> {
    let erp = read_erp(&a.input)?;
    let cb = read_codebook(&a.codebook)?;
    let views = ViewSet::standard(a.fov, a.view_size).map_err(|e| usage(e.to_string()))?;
    let direct = reconstruct_direct(&erp, &cb)?;
    let via = reconstruct_via_views(&erp, &cb, &views)?;
    let report = CompareReport {
        direct: MetricReport::compare(&erp, &direct, &views)?,
        via_views: MetricReport::compare(&erp, &via, &views)?,
    };
    write_json(&report, a.report.as_deref())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let reference = read_erp(&a.a)?;
    let candidate = read_erp(&a.b)?;
    let views = ViewSet::standard(a.fov, a.view_size).map_err(|e| usage(e.to_string()))?;
    write_json(&MetricReport::compare(&reference, &candidate, &views)?, a.json.as_deref())
}

fn scene(a: SceneArgs) -> Result<()> {
    info!("seed = {}", a.seed);
    if a.height == 0 {
        return Err(usage("--height must be positive"));
    }
    write_png(Scene::random(a.seed).render(a.height, a.ss).raster(), &a.out)
}
