use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use beamwave::covariance::{build_kernel_grid, KernelOptions};
use beamwave::grid::TransverseGrid;
use beamwave::harness::converge::converge_study;
use beamwave::harness::output::run_to_dir;
use beamwave::harness::{scale_limit_study, Model, RunConfig, ScaleLimitRequest};
use beamwave::moments::{mean_field_exact, solve_npt, MomentField};
use beamwave::parabolic::initial_field;
use beamwave::rng::{Purpose, SeedRecord};
use beamwave::spectra::{SpectrumParams, SpectrumVariant};
use beamwave::synth::VolumeSynthesizer;
use beamwave::whitenoise::WnVariant;
use beamwave::{Error, Result};

#[derive(Parser)]
#[command(name = "beamwave", version, about = "Beam propagation in random media and its white-noise limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the spectral density on a log grid of |κ| (CSV).
    Spectrum(SpectrumArgs),
    /// Tabulate the transverse kernel Γ(r), or D(r) when eta = 0 (CSV).
    Kernel(KernelArgs),
    /// Synthesize one screen stack and write it in binary form.
    Synth(SynthArgs),
    /// Run an ensemble of one model.
    Run(RunArgs),
    /// Solve the first or second moment equation.
    Moments(MomentsArgs),
    /// Parabolic vs white-noise distance for a list of eps.
    Converge(ConvergeArgs),
    /// Kernel behaviour across (eta, rho).
    ScaleLimits(ScaleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    VonKarman,
    Hill,
    BoundedPowerLaw,
}

#[derive(Args)]
struct SpectrumParamArgs {
    #[arg(long, value_enum, default_value = "bounded-power-law")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long = "H", default_value_t = 1.0 / 3.0)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Inverse inner scale; `inf` for none.
    #[arg(long, default_value_t = 8.0)]
    rho: f64,
}

impl SpectrumParamArgs {
    fn params(&self) -> Result<SpectrumParams> {
        let v = match self.variant {
            VariantArg::VonKarman => SpectrumVariant::VonKarman,
            VariantArg::Hill => SpectrumVariant::Hill,
            VariantArg::BoundedPowerLaw => SpectrumVariant::BoundedPowerLaw,
        };
        SpectrumParams::new(v, self.h, self.eta, self.rho, self.amplitude)
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    spectrum: SpectrumParamArgs,
    #[arg(long, default_value_t = 1e-2)]
    kmin: f64,
    #[arg(long, default_value_t = 1e2)]
    kmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    spectrum: SpectrumParamArgs,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    dx: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration (defaults to the desk configuration).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::desk()),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    realization: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Parabolic,
    Wn,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MomentVariant {
    Standard,
    OriginPinned,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, value_enum, default_value = "standard")]
    variant: MomentVariant,
    #[arg(long, default_value_t = 0.01)]
    dz: f64,
    /// Flat grid index held fixed for the second factor in the CSV slice.
    #[arg(long)]
    fixed: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, num_args = 1.., default_values_t = [0.4, 0.2, 0.1])]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScaleArgs {
    /// JSON request; defaults to a small (eta, rho) grid.
    #[arg(long)]
    request: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let p = a.spectrum.params()?;
    if !(a.kmin > 0.0 && a.kmax > a.kmin && a.points >= 2) {
        return Err(Error::config("need 0 < kmin < kmax and at least 2 points"));
    }
    let mut w = sink(&a.out)?;
    writeln!(w, "kappa,phi,clamped")?;
    let ratio = (a.kmax / a.kmin).powf(1.0 / (a.points - 1) as f64);
    for i in 0..a.points {
        let k = a.kmin * ratio.powi(i as i32);
        let d = p.radial_checked(k);
        writeln!(w, "{k},{},{}", d.value, d.clamped)?;
    }
    Ok(w.flush()?)
}

fn kernel(a: KernelArgs) -> Result<()> {
    let p = a.spectrum.params()?;
    let grid = TransverseGrid::new(a.dim, a.n, a.dx)?;
    let k = build_kernel_grid(&p, &grid, KernelOptions::default())?;
    let mut w = sink(&a.out)?;
    k.write_csv(&mut w)?;
    Ok(w.flush()?)
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let s = VolumeSynthesizer::new(&cfg.sim.spectrum, &cfg.sim.grid)?;
    for w in &s.warnings {
        log::warn!("{w:?}");
    }
    let stack = s.sample(SeedRecord::new(a.seed, a.realization, Purpose::Medium));
    let mut f = io::BufWriter::new(fs::File::create(&a.out)?);
    stack.write_binary(&mut f)?;
    Ok(f.flush()?)
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = a.config.load()?;
    for w in cfg.sim.warnings() {
        log::warn!("{w:?}");
    }
    let model = match a.model {
        ModelArg::Parabolic => Model::Parabolic,
        ModelArg::Wn => Model::Wn,
    };
    let stats = run_to_dir(&cfg, model, a.realizations, a.seed, &a.out)?;
    log::info!("{} realizations written to {}", stats.count, a.out.display());
    Ok(())
}

fn moments(a: MomentsArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    cfg.wn.variant = match a.variant {
        MomentVariant::Standard => WnVariant::Standard,
        MomentVariant::OriginPinned => WnVariant::OriginPinned,
    };
    let wn = cfg.wn_config()?;
    let f0 = initial_field(&cfg.sim)?;
    let z = cfg.sim.z_final;
    let out = solve_npt(&MomentField::tensor(&f0, a.n)?, &wn.kernel, cfg.sim.k_tilde, z, a.dz)?;
    if a.n == 1 {
        if let Some(g0) = wn.kernel.gamma0 {
            let exact = mean_field_exact(&f0, z, cfg.sim.k_tilde, g0)?;
            let gap = out
                .values
                .iter()
                .zip(&exact.values)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            log::info!("max |solve_npt - closed form| = {gap:.3e}");
        }
    }
    let fixed = a.fixed.unwrap_or_else(|| f0.grid.origin_index());
    if fixed >= f0.grid.len() {
        return Err(Error::config(format!("fixed index {fixed} outside the grid")));
    }
    let mut w = sink(&a.out)?;
    out.write_slice_csv(&mut w, fixed)?;
    Ok(w.flush()?)
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let report = converge_study(&cfg, &a.eps, a.realizations, a.seed)?;
    fs::create_dir_all(&a.out)?;
    write_json(&a.out, "convergence.json", &report)?;
    fs::write(a.out.join("convergence.csv"), report.to_csv())?;
    print!("{}", report.to_csv());
    println!("monotone: {}", report.monotone);
    Ok(())
}

fn scale_limits(a: ScaleArgs) -> Result<()> {
    let req: ScaleLimitRequest = match &a.request {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => ScaleLimitRequest::default(),
    };
    let report = scale_limit_study(&req)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write_json(dir, "scale_limits.json", &report)?;
        fs::write(dir.join("scale_limits.csv"), report.to_csv())?;
    }
    print!("{}", report.to_csv());
    if let Some(r) = report.pinned_identity_residual {
        println!("pinned identity residual: {r:.3e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Kernel(a) => kernel(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Moments(a) => moments(a),
        Command::Converge(a) => converge(a),
        Command::ScaleLimits(a) => scale_limits(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
