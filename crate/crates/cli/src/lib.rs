//! `kiebm` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or parse error, 3 numerical
//! failure. Diagnostics go to standard error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kiebm_core::ebm::{domain_samples, train, AdamState, Domain, EnergyModel, ReplayBuffer};
use kiebm_core::io::{write_atomic, Checkpoint, CheckpointMeta, RunConfig, TensorFile};
use kiebm_core::metrics::{evaluate, psnr, ssim, MetricReport};
use kiebm_core::mri::{
    coil_image_dataset, generate_mask, random_phantom, shepp_logan, simulate_acquisition, synth_sensitivities,
    MaskKind, MaskSpec, SensitivityMaps, WeightParams,
};
use kiebm_core::recon::{reconstruct, Calibration, Method, Priors, ReconProblem};
use kiebm_core::{ComplexTensor, Error};
use kiebm_grad::Architecture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => CliError::Numerical(e.to_string()),
            Error::Parameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "kiebm", about = "Energy-based parallel MRI reconstruction", disable_version_flag = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a ground-truth phantom, coil sensitivities and metadata.
    Phantom(PhantomArgs),
    /// Generate a k-space sampling mask.
    MaskGen(MaskArgs),
    /// Write a k-space weight matrix.
    WeightGen(WeightArgs),
    /// Simulate undersampled multi-coil measurements.
    Simulate(SimulateArgs),
    /// Train an energy model.
    Train(TrainArgs),
    /// Reconstruct an image from undersampled measurements.
    Reconstruct(ReconArgs),
    /// Compare a reconstruction against ground truth.
    Eval(EvalArgs),
    /// Print the program version.
    Version,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PhantomKind {
    SheppLogan,
    Random,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [64, 64])]
    pub size: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub coils: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PhantomKind::SheppLogan)]
    pub kind: PhantomKind,
    /// Also write `dataset.kieb` with this many single-coil training images.
    #[arg(long, default_value_t = 0)]
    pub dataset: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long, value_parser = ["cartesian1d", "random2d", "poisson2d"])]
    pub kind: String,
    #[arg(long)]
    pub accel: u32,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [64, 64])]
    pub size: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fully sampled centre columns (cartesian1d only).
    #[arg(long, default_value_t = 0)]
    pub acs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WeightArgs {
    #[arg(long, default_value_t = 0.1)]
    pub r: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Lower clamp, relative to the largest weight.
    #[arg(long, default_value_t = 1e-3)]
    pub floor: f64,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [64, 64])]
    pub size: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub sens: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Standard deviation of the complex Gaussian measurement noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DomainArg {
    Image,
    Kspace,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    /// Directory holding `dataset.kieb`, or a dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-step loss trace as CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReconArgs {
    #[arg(long, value_parser = ["i-ebm", "k-ebm", "pki-ebm", "ski-ebm"])]
    pub method: Option<String>,
    #[arg(long)]
    pub meas: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Model checkpoints; the domain is read from each file.
    #[arg(long)]
    pub ckpt: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub sens: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Defaults to the maximum of the ground truth.
    #[arg(long)]
    pub data_range: Option<f64>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match run(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kiebm: {e}");
            e.code()
        }
    }
}

pub fn run(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Phantom(a) => phantom(&a, out),
        Command::MaskGen(a) => mask_gen(&a, out),
        Command::WeightGen(a) => weight_gen(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Train(a) => train_cmd(&a, out),
        Command::Reconstruct(a) => reconstruct_cmd(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Version => {
            writeln!(out, "kiebm {}", env!("CARGO_PKG_VERSION"))?;
            Ok(())
        }
    }
}

fn dims(size: &[usize]) -> CliResult<(usize, usize)> {
    match size {
        [h, w] if *h > 0 && *w > 0 => Ok((*h, *w)),
        _ => Err(CliError::Usage(format!("--size needs two positive values, got {size:?}"))),
    }
}

fn read(path: &Path) -> CliResult<TensorFile> {
    TensorFile::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Io(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn phantom(a: &PhantomArgs, out: &mut dyn Write) -> CliResult<()> {
    let (h, w) = dims(&a.size)?;
    if a.coils == 0 {
        return Err(CliError::Usage("--coils must be >= 1".into()));
    }
    let truth = match a.kind {
        PhantomKind::SheppLogan => shepp_logan(h, w)?,
        PhantomKind::Random => random_phantom(h, w, &mut ChaCha8Rng::seed_from_u64(a.seed))?,
    };
    let maps = synth_sensitivities(a.coils, h, w)?;
    fs::create_dir_all(&a.out)?;
    TensorFile::from_image(&truth).write(&a.out.join("truth.kieb"))?;
    TensorFile::from_complex(maps.maps()).write(&a.out.join("sensitivities.kieb"))?;
    if a.dataset > 0 {
        let images = coil_image_dataset(a.dataset, h, w, a.coils, a.seed)?;
        let stack = ComplexTensor::from_planes(&images)?;
        TensorFile::from_complex(&stack).write(&a.out.join("dataset.kieb"))?;
    }
    let kind = match a.kind {
        PhantomKind::SheppLogan => "shepp-logan",
        PhantomKind::Random => "random",
    };
    let meta = serde_json::json!({
        "kind": kind,
        "height": h,
        "width": w,
        "coils": a.coils,
        "seed": a.seed,
        "dataset": a.dataset,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialises") + "\n";
    write_atomic(&a.out.join("meta.json"), text.as_bytes())?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

fn mask_gen(a: &MaskArgs, out: &mut dyn Write) -> CliResult<()> {
    let (h, w) = dims(&a.size)?;
    let kind = MaskKind::parse(&a.kind)?;
    let mask = generate_mask(&MaskSpec {
        kind,
        accel: a.accel,
        height: h,
        width: w,
        seed: a.seed,
        acs_lines: a.acs,
    })?;
    TensorFile::from_mask(&mask).write(&a.out)?;
    writeln!(
        out,
        "kind={} accel={} height={h} width={w} sampled={} density={:.6} target={:.6}",
        kind.as_str(),
        a.accel,
        mask.count(),
        mask.density(),
        1.0 / a.accel.max(1) as f64
    )?;
    Ok(())
}

fn weight_gen(a: &WeightArgs) -> CliResult<()> {
    let (h, w) = dims(&a.size)?;
    let wm = WeightParams {
        r: a.r,
        p: a.p,
        floor: a.floor,
    }
    .build(h, w)?;
    let img = kiebm_core::RealImage::new(h, w, wm.values().to_vec())?;
    TensorFile::from_image(&img).write(&a.out)?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let truth = read(&a.truth)?.to_image()?;
    let maps = SensitivityMaps::new(read(&a.sens)?.to_complex()?)?;
    let mask = read(&a.mask)?.to_mask()?;
    let meas = simulate_acquisition(&ComplexTensor::from_real(&truth), &maps, &mask, a.noise, a.seed)?;
    TensorFile::from_complex(&meas).write(&a.out)?;
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Vec<ComplexTensor>> {
    let file = if path.is_dir() { path.join("dataset.kieb") } else { path.to_path_buf() };
    let stack = read(&file)?.to_complex()?;
    if stack.planes() == 0 {
        return Err(CliError::Io(format!("{}: dataset is empty", file.display())));
    }
    Ok((0..stack.planes()).map(|c| stack.plane_tensor(c)).collect())
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let domain = match a.domain {
        DomainArg::Image => Domain::Image,
        DomainArg::Kspace => Domain::WeightedKspace,
    };
    let images = load_dataset(&a.data)?;
    let (h, w) = (images[0].height(), images[0].width());
    let weight = match domain {
        Domain::WeightedKspace => Some(cfg.recon.weight),
        Domain::Image => None,
    };
    let wm = weight.map(|p| p.build(h, w)).transpose()?;
    let image_scale = 1.0;
    let data = domain_samples::<f32>(domain, &images, wm.as_ref(), image_scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture::with_width(cfg.model.base_width);
    let mut model = EnergyModel::<f32>::init(arch, domain, &mut rng);
    let mut buffer = ReplayBuffer::new(cfg.train.buffer_capacity, seed.wrapping_add(1))?;
    let mut adam = AdamState::new(model.net.params(), cfg.train.lr);
    adam.clip_norm = cfg.train.clip_norm;
    let report = train(&mut model, &data, &mut buffer, &mut adam, &cfg.train, &mut rng)?;
    let meta = CheckpointMeta {
        domain,
        architecture: model.net.architecture().descriptor(),
        seed,
        weight,
        image_scale,
        train: cfg.train.clone(),
    };
    Checkpoint::from_model(&model, meta)?.write(&a.out)?;
    if let Some(p) = &a.loss_csv {
        let mut csv = String::from("step,loss,mean_pos,mean_neg\n");
        for i in 0..report.losses.len() {
            csv += &format!("{i},{},{},{}\n", report.losses[i], report.mean_pos[i], report.mean_neg[i]);
        }
        write_atomic(p, csv.as_bytes())?;
    }
    let last = report.losses.last().copied().unwrap_or(f64::NAN);
    writeln!(
        out,
        "domain={} steps={} final_loss={last:.6} buffer_fraction={:.4}",
        domain.as_str(),
        report.losses.len(),
        report.buffer_draws as f64 / report.total_draws.max(1) as f64
    )?;
    Ok(())
}

fn reconstruct_cmd(a: &ReconArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut rc = cfg.recon.clone();
    if let Some(m) = &a.method {
        rc.method = Method::parse(m)?;
    }
    let meas = read(&a.meas)?.to_complex()?;
    let mask = read(&a.mask)?.to_mask()?;
    let truth = a.truth.as_deref().map(|p| read(p)?.to_image().map_err(CliError::from)).transpose()?;
    let sens = match &a.sens {
        Some(p) => Some(SensitivityMaps::new(read(p)?.to_complex()?)?),
        None => None,
    };
    if rc.calibration == Calibration::SensitivityKnown && sens.is_none() {
        return Err(CliError::Usage("sensitivity-known calibration needs --sens".into()));
    }
    let mut image_model = None;
    let mut kspace_model = None;
    for path in &a.ckpt {
        let ck = Checkpoint::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let model = ck.to_model::<f32>()?;
        match ck.meta.domain {
            Domain::Image => image_model = Some(model),
            Domain::WeightedKspace => {
                if let Some(w) = ck.meta.weight {
                    rc.weight = w;
                }
                kspace_model = Some(model)
            }
        }
    }
    let missing = (rc.method.needs_image_model() && image_model.is_none())
        || (rc.method.needs_kspace_model() && kspace_model.is_none());
    if missing {
        return Err(CliError::Usage(format!("{} needs a checkpoint for each of its domains", rc.method.as_str())));
    }
    let problem = ReconProblem {
        meas: &meas,
        mask: &mask,
        sens: sens.as_ref(),
        truth: truth.as_ref(),
    };
    let priors = Priors {
        image: image_model.as_ref(),
        kspace: kspace_model.as_ref(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(cfg.seed));
    let result = reconstruct(problem, priors, &rc, &mut rng)?;
    fs::create_dir_all(&a.out)?;
    TensorFile::from_image(&result.image).write(&a.out.join("image.kieb"))?;
    TensorFile::from_complex(&result.coil_images).write(&a.out.join("coils.kieb"))?;
    TensorFile::from_complex(&result.coil_kspace).write(&a.out.join("kspace.kieb"))?;
    if !result.psnr_trace.is_empty() {
        let mut csv = String::from("iteration,psnr_db\n");
        for (i, v) in result.psnr_trace.iter().enumerate() {
            csv += &format!("{},{v}\n", i + 1);
        }
        write_atomic(&a.out.join("psnr.csv"), csv.as_bytes())?;
    }
    match result.psnr_trace.last() {
        Some(p) => writeln!(out, "method={} iterations={} psnr_db={p:.6}", rc.method.as_str(), result.psnr_trace.len())?,
        None => writeln!(out, "method={}", rc.method.as_str())?,
    }
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let x = read(&a.recon)?.to_image()?;
    let truth = read(&a.truth)?.to_image()?;
    let report = match a.data_range {
        Some(r) => MetricReport {
            psnr_db: psnr(&x, &truth, r)?,
            ssim: ssim(&x, &truth, r)?,
            data_range: r,
        },
        None => evaluate(&x, &truth)?,
    };
    writeln!(out, "{}", report.to_record())?;
    Ok(())
}
