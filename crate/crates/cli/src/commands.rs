//! Subcommand implementations. Each writes its human-readable output to
//! `out` so the binary and the tests share one code path.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctgi::{
    add_noise, build_hadamard_basis_with_order, build_random_basis, deserialize_basis,
    direct_capture, modulate_accumulate, modulate_accumulate_scene, plan_sampling,
    serialize_basis, DcPolicy, ExposureImage, HadamardOrdering, ModulationBasis,
    NoiseKind, NoiseModel, ReconMode, SamplingPlan, SuperPixelGeometry, TvMode, Video,
};
use num_rational::Ratio;

use crate::config::{RunConfig, RunPaths};
use crate::demo::{run_demo, DemoArgs};
use crate::io::{self, PgmDepth};
use crate::metrics::MetricsReport;

/// Bad flag combination detected after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(name = "ctgi", version, about = "Temporal ghost imaging: simulate and reconstruct high-speed video from one coded exposure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a modulation basis file.
    GenBasis(GenBasisArgs),
    /// Modulate and integrate a frame sequence into one exposure.
    Simulate(SimulateArgs),
    /// Recover frames from an exposure.
    Reconstruct(ReconstructArgs),
    /// Compare two frame sequences.
    Metrics(MetricsArgs),
    /// Run a complete generate, simulate, reconstruct, score pipeline.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Hadamard,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    Natural,
    Sequency,
}

impl From<OrderingArg> for HadamardOrdering {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Natural => HadamardOrdering::NaturalSylvester,
            OrderingArg::Sequency => HadamardOrdering::WalshSequency,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenBasisArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Number of patterns K. Defaults to l² for Hadamard bases.
    #[arg(long, visible_alias = "K")]
    pub order: Option<usize>,
    #[arg(long, value_enum)]
    pub ordering: Option<OrderingArg>,
    /// Super-pixel side.
    #[arg(long)]
    pub l: usize,
    /// Scene side in super-pixels.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Directory of frame_0001.pgm, frame_0002.pgm, ...
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long, value_enum, default_value_t = NoiseArg::None)]
    pub noise: NoiseArg,
    /// Gaussian standard deviation in exposure units.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Photons per unit exposure for Poisson noise.
    #[arg(long)]
    pub photons: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_exposure: PathBuf,
    /// Unmodulated long exposure, averaged over frames, as 16-bit PGM.
    #[arg(long)]
    pub out_blur: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Correlation,
    Exact,
    Cs,
    Sliding,
}

impl From<ModeArg> for ReconMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Correlation => ReconMode::Correlation,
            ModeArg::Exact => ReconMode::Exact,
            ModeArg::Cs => ReconMode::Compressive,
            ModeArg::Sliding => ReconMode::Sliding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DcArg {
    Formula,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvArg {
    Temporal,
    Spatial,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub exposure: PathBuf,
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Correlation)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = DcArg::Formula)]
    pub dc: DcArg,
    /// TV weight for cs mode; defaults to 0.01 * ||phi^T y||_inf.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = TvArg::Temporal)]
    pub tv: TvArg,
    /// Zero values below tau times each frame's maximum.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth frames; writes metrics.txt next to the output frames.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Report file; defaults to metrics.txt inside the recon directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::GenBasis(a) => gen_basis(&a, out),
        Command::Simulate(a) => simulate(&a, out),
        Command::Reconstruct(a) => reconstruct(&a, out).map(|_| ()),
        Command::Metrics(a) => metrics(&a, out).map(|_| ()),
        Command::Demo(a) => run_demo(&a, out).map(|_| ()),
    }
}

/// Exact decimal when it terminates within four places, otherwise rounded
/// to four.
pub fn fmt_ratio(r: Ratio<u64>, scale: u64) -> String {
    let num = *r.numer() as u128 * scale as u128;
    let den = *r.denom() as u128;
    if !(num * 10_000).is_multiple_of(den) {
        let s = format!("{:.4}", num as f64 / den as f64);
        return s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    let s = format!("{}.{:04}", num / den, (num % den) * 10_000 / den);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn describe_plan(plan: &SamplingPlan) -> String {
    format!(
        "T = {}\nsampling rate {}%\n",
        fmt_ratio(plan.transfer_efficiency(), 1),
        fmt_ratio(plan.sampling_rate(), 100)
    )
}

pub fn build_basis(a: &GenBasisArgs) -> anyhow::Result<ModulationBasis> {
    let geometry = SuperPixelGeometry::new(a.l, a.n)?;
    match a.kind {
        KindArg::Hadamard => {
            if a.seed.is_some() || a.density.is_some() {
                return usage("--seed and --density apply to --kind random only");
            }
            let ordering = a.ordering.unwrap_or(OrderingArg::Sequency).into();
            let k = a.order.unwrap_or(a.l * a.l);
            Ok(build_hadamard_basis_with_order(geometry, ordering, k)?)
        }
        KindArg::Random => {
            if a.ordering.is_some() {
                return usage("--ordering applies to --kind hadamard only");
            }
            let Some(k) = a.order else {
                return usage("--kind random needs --order (K)");
            };
            Ok(build_random_basis(
                geometry,
                k,
                a.seed.unwrap_or(0),
                a.density.unwrap_or(0.5),
            )?)
        }
    }
}

pub fn gen_basis(a: &GenBasisArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let basis = build_basis(a)?;
    io::write_atomic(&a.out, &serialize_basis(&basis))?;
    let g = basis.geometry();
    let plan = plan_sampling(basis.k(), g.l())?;
    writeln!(out, "wrote {}", a.out.display())?;
    writeln!(out, "K = {}, l = {}, n = {}, m = {}", basis.k(), g.l(), g.n(), g.m())?;
    write!(out, "{}", describe_plan(&plan))?;
    Ok(())
}

pub fn read_basis(path: &Path) -> anyhow::Result<ModulationBasis> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_basis(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn noise_model(a: &SimulateArgs) -> anyhow::Result<Option<NoiseModel>> {
    let kind = match (a.noise, a.sigma, a.photons) {
        (NoiseArg::None, None, None) => return Ok(None),
        (NoiseArg::Gaussian, Some(sigma), None) => NoiseKind::AdditiveGaussian { sigma },
        (NoiseArg::Poisson, None, Some(scale)) => NoiseKind::Poisson { scale },
        (NoiseArg::Gaussian, _, _) => return usage("--noise gaussian needs --sigma (and no --photons)"),
        (NoiseArg::Poisson, _, _) => return usage("--noise poisson needs --photons (and no --sigma)"),
        (NoiseArg::None, _, _) => return usage("--sigma and --photons need --noise"),
    };
    let model = NoiseModel { kind, seed: a.seed };
    model.validate()?;
    Ok(Some(model))
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let noise = noise_model(a)?;
    let basis = read_basis(&a.basis)?;
    let frames = io::read_sequence(&a.scene)?;
    let (count, h, w) = frames.dim();
    if count != basis.k() {
        bail!(
            "scene has {count} frames but the basis expects K = {}",
            basis.k()
        );
    }
    let g = basis.geometry();
    let video = Video::new(frames)?;
    let exposure = if h == g.n() && w == g.n() {
        modulate_accumulate_scene(&video, &basis)?
    } else if h == g.m() && w == g.m() {
        modulate_accumulate(&video, &basis)?
    } else {
        bail!(
            "scene frames are {h}x{w}; the basis needs {n}x{n} or {m}x{m}",
            n = g.n(),
            m = g.m()
        );
    };
    let exposure = match noise {
        Some(model) => add_noise(&exposure, &model)?,
        None => exposure,
    };
    io::write_exposure(&a.out_exposure, &exposure.values)?;
    writeln!(out, "wrote {} ({m}x{m})", a.out_exposure.display(), m = g.m())?;
    if let Some(path) = &a.out_blur {
        let blur = direct_capture(&video)? / count as f64;
        io::write_pgm(path, &blur, PgmDepth::Sixteen)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

pub fn reconstruct_config(a: &ReconstructArgs, basis: &ModulationBasis) -> RunConfig {
    let mut cfg = RunConfig::for_basis(basis, a.mode.into());
    cfg.dc_policy = match a.dc {
        DcArg::Formula => DcPolicy::Formula,
        DcArg::Zero => DcPolicy::Zero,
    };
    cfg.lambda = a.lambda;
    cfg.tv_mode = match a.tv {
        TvArg::Temporal => TvMode::Temporal1d,
        TvArg::Spatial => TvMode::Spatial2d,
    };
    cfg.tau = a.tau;
    cfg.paths = RunPaths {
        basis: Some(a.basis.clone()),
        exposure: Some(a.exposure.clone()),
        out: Some(a.out.clone()),
        truth: a.truth.clone(),
        ..RunPaths::default()
    };
    cfg.metrics = a.truth.is_some();
    cfg
}

/// Returns the metrics report when `--truth` is given.
pub fn reconstruct(a: &ReconstructArgs, out: &mut dyn Write) -> anyhow::Result<Option<MetricsReport>> {
    let basis = read_basis(&a.basis)?;
    let cfg = reconstruct_config(a, &basis);
    if a.lambda.is_some() && a.mode != ModeArg::Cs {
        return usage("--lambda applies to --mode cs only");
    }
    if !(0.0..=1.0).contains(&a.tau) {
        return usage(format!("--tau must lie in [0, 1], got {}", a.tau));
    }
    let values = io::read_exposure(&a.exposure)?;
    let exposure = ExposureImage::new(values, basis.geometry())?;
    let t0 = Instant::now();
    let result = cfg.reconstruct(&exposure, &basis)?;
    let t_recon = t0.elapsed().as_secs_f64();
    io::write_sequence(&a.out, &result.frames, PgmDepth::Sixteen, true)?;
    writeln!(
        out,
        "wrote {} frames of {}x{} to {}",
        result.k(),
        result.height(),
        result.width(),
        a.out.display()
    )?;
    if let Some(r) = result.residual {
        writeln!(out, "max residual {r:e}")?;
    }
    let Some(truth_dir) = &a.truth else {
        eprintln!("reconstruct_seconds={t_recon:.3}");
        return Ok(None);
    };
    let truth = io::read_sequence(truth_dir)?;
    // Score the frames as stored so `ctgi metrics` on the output reproduces
    // this report.
    let stored = result.frames.mapv(|v| v as f32 as f64);
    let mut report = MetricsReport::compare(&stored, &truth)?;
    report.timings.push(("reconstruct".into(), t_recon));
    io::write_atomic(&a.out.join("metrics.txt"), report.to_text().as_bytes())?;
    print_summary(&report, out)?;
    eprint!("{}", report.timings_text());
    Ok(Some(report))
}

fn print_summary(report: &MetricsReport, out: &mut dyn Write) -> anyhow::Result<()> {
    use crate::metrics::fmt_value;
    writeln!(out, "mean_psnr_db={}", fmt_value(report.mean_psnr_db))?;
    writeln!(out, "mean_rmse={}", fmt_value(report.mean_rmse))?;
    writeln!(out, "mean_pearson={}", fmt_value(report.mean_pearson))?;
    Ok(())
}

pub fn metrics(a: &MetricsArgs, out: &mut dyn Write) -> anyhow::Result<MetricsReport> {
    let recon = io::read_sequence(&a.recon)?;
    let truth = io::read_sequence(&a.truth)?;
    let report = MetricsReport::compare(&recon, &truth)?;
    let text = report.to_text();
    let path = a.out.clone().unwrap_or_else(|| a.recon.join("metrics.txt"));
    io::write_atomic(&path, text.as_bytes())?;
    write!(out, "{text}")?;
    Ok(report)
}
