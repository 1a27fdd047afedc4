//! End-to-end pipelines on procedural scenes, driven through the same
//! file-based commands as the CLI.
//!
//! 1. Hadamard basis, `K = l²`, block-uniform scene, correlation retrieval.
//!    Scale `s` gives an `128s x 128s` scene with `l = 8 sqrt(s)`.
//! 2. `K = 64` random bases with `l` in 4..=7, TV-regularized recovery at
//!    each sampling rate.
//! 3. `l = 8` Hadamard basis over a full-resolution scene, sliding-window
//!    retrieval plus threshold.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use ctgi::plan_sampling;
use ndarray::{Array2, Array3};

use crate::commands::{
    describe_plan, fmt_ratio, gen_basis, reconstruct, simulate, DcArg, GenBasisArgs, KindArg,
    ModeArg, NoiseArg, OrderingArg, ReconstructArgs, SimulateArgs, TvArg, UsageError,
};
use crate::io::{self, PgmDepth};
use crate::metrics::{fmt_value, MetricsReport};
use crate::scenes::{falling_objects, moving_square};

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    /// Which simulation to run.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub paper_sim: u8,
    /// Scene side as a fraction of 128.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value = "demo_out")]
    pub out: PathBuf,
    /// Seed for the scene generator and random bases.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Threshold for simulation 3.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub l: usize,
    pub rate_percent: String,
    pub transfer_efficiency: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemoOutcome {
    Exact { n: usize, l: usize, k: usize, report: MetricsReport },
    Sweep { n: usize, rows: Vec<RateRow> },
    Sliding { m: usize, l: usize, side: usize, report: MetricsReport },
}

impl DemoOutcome {
    /// Sweep rows have non-decreasing mean PSNR.
    pub fn is_monotone(&self) -> bool {
        match self {
            DemoOutcome::Sweep { rows, .. } => rows
                .windows(2)
                .all(|w| w[1].report.mean_psnr_db >= w[0].report.mean_psnr_db),
            _ => true,
        }
    }
}

fn scene_side(scale: f64) -> anyhow::Result<usize> {
    let n = 128.0 * scale;
    if scale.is_nan() || scale <= 0.0 || n.fract() != 0.0 || n < 1.0 {
        return Err(UsageError(format!("--scale {scale} must make 128 * scale a positive integer")).into());
    }
    Ok(n as usize)
}

fn write_scene(dir: &Path, frames: &Array3<f64>) -> anyhow::Result<()> {
    io::write_sequence(dir, frames, PgmDepth::Eight, false)?;
    Ok(())
}

fn basis_args(kind: KindArg, l: usize, n: usize, k: usize, seed: Option<u64>, out: PathBuf) -> GenBasisArgs {
    GenBasisArgs {
        kind,
        order: Some(k),
        ordering: (kind == KindArg::Hadamard).then_some(OrderingArg::Sequency),
        l,
        n,
        seed,
        density: None,
        out,
    }
}

fn simulate_args(scene: PathBuf, basis: PathBuf, exposure: PathBuf, blur: PathBuf) -> SimulateArgs {
    SimulateArgs {
        scene,
        basis,
        noise: NoiseArg::None,
        sigma: None,
        photons: None,
        seed: 0,
        out_exposure: exposure,
        out_blur: Some(blur),
    }
}

fn recon_args(exposure: PathBuf, basis: PathBuf, mode: ModeArg, out: PathBuf, truth: Option<PathBuf>, tau: f64) -> ReconstructArgs {
    ReconstructArgs {
        exposure,
        basis,
        mode,
        dc: DcArg::Formula,
        lambda: None,
        tv: TvArg::Temporal,
        tau,
        out,
        truth,
    }
}

pub fn run_demo(a: &DemoArgs, out: &mut dyn Write) -> anyhow::Result<DemoOutcome> {
    io::create_dir(&a.out)?;
    let outcome = match a.paper_sim {
        1 => sim_exact(a, out)?,
        2 => sim_sweep(a, out)?,
        3 => sim_sliding(a, out)?,
        other => return Err(UsageError(format!("unknown simulation {other}")).into()),
    };
    let summary = summarize(a, &outcome);
    io::write_atomic(&a.out.join("summary.txt"), summary.as_bytes())?;
    write!(out, "{summary}")?;
    Ok(outcome)
}

fn sim_exact(a: &DemoArgs, out: &mut dyn Write) -> anyhow::Result<DemoOutcome> {
    let n = scene_side(a.scale)?;
    let l = 8.0 * a.scale.sqrt();
    if l.fract() != 0.0 || !(l as usize).is_power_of_two() {
        return Err(UsageError(format!("--scale {} gives l = {l}, not a power of two", a.scale)).into());
    }
    let l = l as usize;
    let k = l * l;
    let d = &a.out;
    write_scene(&d.join("scene"), &moving_square(n, k, a.seed))?;
    gen_basis(&basis_args(KindArg::Hadamard, l, n, k, None, d.join("basis.ctgb")), out)?;
    simulate(&simulate_args(d.join("scene"), d.join("basis.ctgb"), d.join("exposure.ctge"), d.join("blur.pgm")), out)?;
    let report = reconstruct(
        &recon_args(d.join("exposure.ctge"), d.join("basis.ctgb"), ModeArg::Correlation, d.join("recon"), Some(d.join("scene")), 0.0),
        out,
    )?
    .context("metrics were requested")?;
    Ok(DemoOutcome::Exact { n, l, k, report })
}

fn sim_sweep(a: &DemoArgs, out: &mut dyn Write) -> anyhow::Result<DemoOutcome> {
    let n = scene_side(a.scale)?;
    let k = 64;
    let d = &a.out;
    write_scene(&d.join("scene"), &moving_square(n, k, a.seed))?;
    let mut rows = Vec::new();
    for l in 4..=7 {
        let sub = d.join(format!("l{l}"));
        io::create_dir(&sub)?;
        let basis = sub.join("basis.ctgb");
        gen_basis(&basis_args(KindArg::Random, l, n, k, Some(a.seed), basis.clone()), out)?;
        simulate(&simulate_args(d.join("scene"), basis.clone(), sub.join("exposure.ctge"), sub.join("blur.pgm")), out)?;
        let report = reconstruct(
            &recon_args(sub.join("exposure.ctge"), basis, ModeArg::Cs, sub.join("recon"), Some(d.join("scene")), 0.0),
            out,
        )?
        .context("metrics were requested")?;
        let plan = plan_sampling(k, l)?;
        rows.push(RateRow {
            l,
            rate_percent: fmt_ratio(plan.sampling_rate(), 100),
            transfer_efficiency: fmt_ratio(plan.transfer_efficiency(), 1),
            report,
        });
    }
    Ok(DemoOutcome::Sweep { n, rows })
}

/// Mean of every `l x l` window, the target of window retrieval.
fn window_means(frames: &Array3<f64>, l: usize) -> Array3<f64> {
    let (k, h, w) = frames.dim();
    let side = h - l + 1;
    let mut out = Array3::zeros((k, side, w - l + 1));
    for (f, mut dst) in frames.outer_iter().zip(out.outer_iter_mut()) {
        let mut sat = Array2::<f64>::zeros((h + 1, w + 1));
        for i in 0..h {
            for j in 0..w {
                sat[[i + 1, j + 1]] = f[[i, j]] + sat[[i, j + 1]] + sat[[i + 1, j]] - sat[[i, j]];
            }
        }
        let area = (l * l) as f64;
        for ((r, c), v) in dst.indexed_iter_mut() {
            *v = (sat[[r + l, c + l]] - sat[[r, c + l]] - sat[[r + l, c]] + sat[[r, c]]) / area;
        }
    }
    out
}

fn sim_sliding(a: &DemoArgs, out: &mut dyn Write) -> anyhow::Result<DemoOutcome> {
    let n = scene_side(a.scale)?;
    let (l, k) = (8, 64);
    let m = l * n;
    let d = &a.out;
    let scene = falling_objects(m, k, a.seed);
    write_scene(&d.join("scene"), &scene)?;
    gen_basis(&basis_args(KindArg::Hadamard, l, n, k, None, d.join("basis.ctgb")), out)?;
    simulate(&simulate_args(d.join("scene"), d.join("basis.ctgb"), d.join("exposure.ctge"), d.join("blur.pgm")), out)?;
    reconstruct(
        &recon_args(d.join("exposure.ctge"), d.join("basis.ctgb"), ModeArg::Sliding, d.join("recon"), None, a.tau),
        out,
    )?;
    let recon = io::read_sequence(&d.join("recon"))?;
    let target = window_means(&scene, l);
    drop(scene);
    let report = MetricsReport::compare(&recon, &target)?;
    io::write_atomic(&d.join("recon").join("metrics.txt"), report.to_text().as_bytes())?;
    Ok(DemoOutcome::Sliding { m, l, side: recon.dim().1, report })
}

fn summarize(a: &DemoArgs, outcome: &DemoOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "simulation={}", a.paper_sim);
    let _ = writeln!(s, "scale={}", a.scale);
    let _ = writeln!(s, "seed={}", a.seed);
    match outcome {
        DemoOutcome::Exact { n, l, k, report } => {
            let plan = plan_sampling(*k, *l).expect("valid plan");
            let _ = writeln!(s, "scene={n}x{n}");
            let _ = writeln!(s, "l={l}");
            let _ = writeln!(s, "K={k}");
            let _ = write!(s, "{}", describe_plan(&plan).replace(" = ", "=").replace("sampling rate ", "sampling_rate="));
            let _ = writeln!(s, "output={k}x{n}x{n}");
            let _ = writeln!(s, "mean_psnr_db={}", fmt_value(report.mean_psnr_db));
            let min = report.frames.iter().map(|f| f.psnr_db).fold(f64::INFINITY, f64::min);
            let _ = writeln!(s, "min_psnr_db={}", fmt_value(min));
        }
        DemoOutcome::Sweep { n, rows } => {
            let _ = writeln!(s, "scene={n}x{n}");
            let _ = writeln!(s, "K=64");
            for r in rows {
                let _ = writeln!(
                    s,
                    "l={} rate_percent={} T={} mean_psnr_db={} mean_pearson={}",
                    r.l,
                    r.rate_percent,
                    r.transfer_efficiency,
                    fmt_value(r.report.mean_psnr_db),
                    fmt_value(r.report.mean_pearson)
                );
            }
            let _ = writeln!(s, "monotone={}", outcome.is_monotone());
        }
        DemoOutcome::Sliding { m, l, side, report } => {
            let _ = writeln!(s, "modulator={m}x{m}");
            let _ = writeln!(s, "l={l}");
            let _ = writeln!(s, "tau={}", a.tau);
            let _ = writeln!(s, "output=64x{side}x{side}");
            let _ = writeln!(s, "mean_psnr_db_vs_window_mean={}", fmt_value(report.mean_psnr_db));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_means_of_constant_blocks() {
        let f = Array3::from_shape_fn((1, 4, 4), |(_, i, j)| (i * 4 + j) as f64);
        let w = window_means(&f, 2);
        assert_eq!(w.dim(), (1, 3, 3));
        assert_eq!(w[[0, 0, 0]], (0.0 + 1.0 + 4.0 + 5.0) / 4.0);
        assert_eq!(w[[0, 2, 2]], (10.0 + 11.0 + 14.0 + 15.0) / 4.0);
    }

    #[test]
    fn scale_validation() {
        assert_eq!(scene_side(0.25).unwrap(), 32);
        assert!(scene_side(0.3).is_err());
        assert!(scene_side(0.0).is_err());
    }
}
