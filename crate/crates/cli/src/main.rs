use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use tu1_core::decomposition::{tdsl_decompose, tdst_sparsity};
use tu1_core::harness::config::default_pair;
use tu1_core::harness::images::{export_images, image_fixture, ingest_images};
use tu1_core::harness::sweep::{sweep as run_sweep, SweepSpec};
use tu1_core::harness::{
    default_family, gen_mask, gen_synthetic, psnr, relative_error, resolve_model, CompletionMetrics, FactorSource,
    ModelKind, RunConfig, SyntheticSpec,
};
use tu1_core::solver::{self, Mask, Model, SolverConfig, Status};
use tu1_core::tensor::io;
use tu1_core::{AnyTensor, FamilySpec, RealTensor, SlicePair};

/// Exit code for command-line usage errors (sysexits EX_USAGE).
const EXIT_USAGE: u8 = 64;
const EXIT_MAX_ITER: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "tu1", version, about = "Tensor completion with learnable unitary transforms")]
struct Cli {
    /// Log as JSON lines on stderr.
    #[arg(long, global = true)]
    json_logs: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic low-rank tensor (and optionally a mask).
    Synth(SynthArgs),
    /// Recover a tensor from a subset of its entries.
    Complete(CompleteArgs),
    /// Run a phase-transition sweep over rank and sampling rate.
    Sweep(SweepArgs),
    /// Slice-low-rank decomposition of a fully observed tensor.
    Decompose(DecomposeArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Factors {
    Dcm,
    Random,
}

impl From<Factors> for FactorSource {
    fn from(f: Factors) -> Self {
        match f {
            Factors::Dcm => FactorSource::Dcm,
            Factors::Random => FactorSource::RandomOrthogonal,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Shape such as 20x20x20x20.
    #[arg(long, default_value = "20x20x20x20", value_parser = parse_shape)]
    shape: Shape,
    #[arg(long, short = 'r', default_value_t = 3)]
    rank: usize,
    #[arg(long, value_enum, default_value_t = Factors::Dcm)]
    factors: Factors,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a mask with this sampling rate next to the tensor.
    #[arg(long)]
    p: Option<f64>,
    /// Output tensor file.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "images", "synthetic"])))]
#[command(group(ArgGroup::new("sampling").required(true).args(["mask", "p"])))]
struct CompleteArgs {
    /// Tensor file to complete.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory of images forming an H x W x 3 x N stack.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Generate the data: `R=3` (see --shape), or `fixture` for a
    /// 32x32x3x8 synthetic image stack.
    #[arg(long)]
    synthetic: Option<String>,
    /// Shape for --synthetic.
    #[arg(long, default_value = "20x20x20x20", value_parser = parse_shape)]
    shape: Shape,
    /// Ground truth for the relative error when completing --input.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Mask tensor file; nonzero entries are observed.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Sample this fraction of entries uniformly at random.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Slice modes for tcsl, 1-based, e.g. `2,3`.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<[usize; 2]>,
    /// Transform family, e.g. `mode1=dfm,mode2=dfm,3=learnable,4=learnable`.
    #[arg(long)]
    transforms: Option<FamilySpec>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Shuffle image frames with the run seed before completion.
    #[arg(long)]
    shuffle: bool,
    /// Write diagnostics as JSON lines instead of CSV.
    #[arg(long)]
    jsonl: bool,
    /// Output directory.
    #[arg(long, short = 'o', default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_parser = parse_shape)]
    shape: Option<Shape>,
    /// Ranks, e.g. `1,3,5` or `1..10`.
    #[arg(long, value_parser = parse_usize_list)]
    ranks: Option<List<usize>>,
    /// Sampling rates, e.g. `0.3,0.5,0.7`.
    #[arg(long, value_parser = parse_f64_list)]
    ps: Option<List<f64>>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Factors::Dcm)]
    factors: Factors,
    #[arg(long)]
    transforms: Option<FamilySpec>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// The 30x30x30x30 grid (R = 1..10, p = 0.5); takes hours.
    #[arg(long)]
    long: bool,
    /// CSV file; completed cells found there are skipped.
    #[arg(long, short = 'o', default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Slice modes, 1-based.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<[usize; 2]>,
    #[arg(long, short = 'r')]
    rank: usize,
    /// Transform family; defaults to learnable on every non-slice mode.
    #[arg(long)]
    transforms: Option<FamilySpec>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, short = 'o', default_value = "decomposition")]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct Shape(Vec<usize>);

#[derive(Clone, Debug)]
struct List<T>(Vec<T>);

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.split(['x', 'X', ','])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad extent '{p}': {e}")))
        .collect::<Result<_, _>>()
        .map(Shape)
}

fn parse_pair(s: &str) -> Result<[usize; 2], String> {
    match parse_usize_list(s)?.0.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(format!("expected two modes, got '{s}'")),
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: tu1_core::Error| e.to_string())
}

/// `1,3,5` or an inclusive range `1..10`.
fn parse_usize_list(s: &str) -> Result<List<usize>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|e| format!("{e}"))?;
        return Ok(List((a..=b).collect()));
    }
    parse_list(s)
}

fn parse_f64_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<List<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("bad value '{p}': {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn init_logging(json: bool) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if json {
        b.format(|buf, rec| {
            let line = serde_json::json!({
                "ts": buf.timestamp_millis().to_string(),
                "level": rec.level().as_str(),
                "target": rec.target(),
                "msg": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    b.init();
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn load_real(path: &Path) -> Result<RealTensor> {
    let t = io::load(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(t.into_real(1e-12)
        .with_context(|| format!("{} is not real-valued", path.display()))?)
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let spec = SyntheticSpec {
        shape: args.shape.0.clone(),
        rank: args.rank,
        seed: args.seed,
        factors: args.factors.into(),
    };
    let m = gen_synthetic(&spec)?;
    io::save(&args.out, &AnyTensor::Real(m))?;
    info!("wrote {}", args.out.display());
    if let Some(p) = args.p {
        let mask = gen_mask(&args.shape.0, p, args.seed.wrapping_add(1))?;
        let path = args.out.with_extension("mask.tu1t");
        io::save(&path, &AnyTensor::Real(mask.to_tensor()))?;
        info!("wrote {} ({} observed)", path.display(), mask.count());
    }
    Ok(ExitCode::SUCCESS)
}

struct Problem {
    data: RealTensor,
    truth: Option<RealTensor>,
    image: bool,
    synthetic: bool,
}

fn complete(args: CompleteArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);

    let problem = if let Some(path) = &args.input {
        let data = load_real(path)?;
        let truth = match &args.truth {
            Some(t) => Some(load_real(t)?),
            None => None,
        };
        Problem {
            data,
            truth,
            image: false,
            synthetic: false,
        }
    } else if let Some(dir) = &args.images {
        let stack = ingest_images(dir, args.shuffle.then_some(seed))?;
        info!(
            "loaded {} frames of {:?}",
            stack.names.len(),
            &stack.tensor.shape()[..2]
        );
        Problem {
            data: stack.tensor.clone(),
            truth: Some(stack.tensor),
            image: true,
            synthetic: false,
        }
    } else {
        let spec = args.synthetic.as_deref().unwrap_or_default();
        if spec.eq_ignore_ascii_case("fixture") {
            let t = image_fixture(32, 32, 8, seed)?;
            Problem {
                data: t.clone(),
                truth: Some(t),
                image: true,
                synthetic: false,
            }
        } else {
            let rank = spec
                .trim_start_matches(['R', 'r'])
                .trim_start_matches('=')
                .parse::<usize>()
                .with_context(|| format!("--synthetic expects R=<rank> or fixture, got '{spec}'"))?;
            let m = gen_synthetic(&SyntheticSpec::new(&args.shape.0, rank, seed))?;
            Problem {
                data: m.clone(),
                truth: Some(m),
                image: false,
                synthetic: true,
            }
        }
    };
    let shape = problem.data.shape().to_vec();
    let order = shape.len();

    let mask = match (&args.mask, args.p) {
        (Some(path), _) => {
            let m = Mask::from_tensor(&load_real(path)?)?;
            if m.shape() != shape.as_slice() {
                bail!("mask shape {:?} does not match data shape {:?}", m.shape(), shape);
            }
            m
        }
        (None, Some(p)) => gen_mask(&shape, p, seed.wrapping_add(1))?,
        (None, None) => unreachable!("clap requires --mask or --p"),
    };

    let kind = args.model.or(cfg.model).unwrap_or_default();
    let model = resolve_model(kind, args.pair.or(cfg.pair), order)?;
    let fam_spec = args
        .transforms
        .clone()
        .or(cfg.transforms.clone())
        .unwrap_or_else(|| default_family(model, order, problem.synthetic));
    let fam = fam_spec.build(&shape)?;
    let mut solver_cfg: SolverConfig = cfg.solver.clone().with_model(model);
    if let Some(n) = args.max_iter {
        solver_cfg.max_iter = n;
    }
    info!(
        "model {kind}{} transforms {fam_spec} shape {shape:?} observed {}/{}",
        match model {
            Model::TcSl(p) => format!(" pair {},{}", p.k1 + 1, p.k2 + 1),
            Model::TcU1 => String::new(),
        },
        mask.count(),
        mask.len()
    );

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let observed = mask.project(&problem.data)?;
    let start = Instant::now();
    let out = solver::solve(&observed, &mask, &fam, &solver_cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let d = &out.diagnostics;

    io::save(args.out.join("recovered.tu1t"), &AnyTensor::Real(out.x.clone()))?;
    for (k, u) in &out.factors {
        io::save(
            args.out.join(format!("factor_mode{}.tu1t", k + 1)),
            &AnyTensor::Real(RealTensor::from_matrix(u)),
        )?;
    }
    if args.jsonl {
        d.write_json_lines(fs::File::create(args.out.join("diagnostics.jsonl"))?)?;
    } else {
        d.write_csv(fs::File::create(args.out.join("diagnostics.csv"))?)?;
    }
    if problem.image {
        let frames = args.out.join("frames");
        export_images(&out.x, &frames, "recovered_")?;
        export_images(&observed, &frames, "observed_")?;
    }

    let re = match &problem.truth {
        Some(t) => Some(relative_error(t, &out.x)?),
        None => None,
    };
    let psnr_db = match (&problem.truth, problem.image) {
        (Some(t), true) => Some(psnr(t, &out.x.map(|v| v.clamp(0.0, 1.0)), 1.0)?),
        _ => None,
    };
    let metrics = CompletionMetrics {
        model: kind.to_string(),
        transforms: fam_spec.to_string(),
        shape: shape.clone(),
        sampling_rate: mask.sampling_rate(),
        observed: mask.count(),
        seed,
        re,
        psnr_db,
        iterations: d.iterations,
        status: d.status,
        final_rel_residual: d.final_rel_residual(),
        penalty_scale: d.penalty_scale,
        eta_capped_early: d.eta_capped_early,
        max_unitarity_error: d.max_unitarity_error,
        wall_time_s: wall,
    };
    fs::write(
        args.out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)? + "\n",
    )?;
    info!(
        "{:?} after {} iterations; RE {} PSNR {}",
        d.status,
        d.iterations,
        re.map_or("-".into(), |v| format!("{v:.4e}")),
        psnr_db.map_or("-".into(), |v| format!("{v:.2} dB"))
    );
    Ok(match d.status {
        Status::Converged => ExitCode::SUCCESS,
        Status::MaxIter | Status::Diverged => {
            warn!("did not converge ({:?})", d.status);
            ExitCode::from(EXIT_MAX_ITER)
        }
    })
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref())?;
    let mut spec = SweepSpec::desk_default();
    if args.long {
        spec.shape = vec![30; 4];
        spec.ps = vec![0.5];
    }
    if let Some(s) = args.shape {
        spec.shape = s.0;
    }
    if let Some(r) = args.ranks {
        spec.ranks = r.0;
    }
    if let Some(p) = args.ps {
        spec.ps = p.0;
    }
    spec.trials = args.trials;
    spec.seed = args.seed.or(cfg.seed).unwrap_or(0);
    spec.factors = args.factors.into();
    spec.transforms = args.transforms.or(cfg.transforms);
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    let records = run_sweep(&spec, &cfg.solver, &args.out)?;
    let ok = records.iter().filter(|r| r.success).count();
    info!("{ok}/{} cells successful; wrote {}", records.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn decompose(args: DecomposeArgs) -> Result<ExitCode> {
    let a = load_real(&args.input)?;
    let order = a.order();
    let [k1, k2] = args.pair.unwrap_or_else(|| default_pair(order));
    let pair = SlicePair::from_one_based(k1, k2, order)?;
    let fam_spec = args
        .transforms
        .unwrap_or_else(|| default_family(Model::TcSl(pair), order, false));
    let fam = fam_spec.build(a.shape())?;
    let res = tdsl_decompose(&a, &fam, pair, args.rank, args.iters)?;
    let sparsity = tdst_sparsity(&a, &fam.without_learnable())?;

    fs::create_dir_all(&args.out)?;
    io::save(args.out.join("core.tu1t"), &AnyTensor::Real(res.z1.clone()))?;
    for (k, u) in &res.factors {
        io::save(
            args.out.join(format!("factor_mode{}.tu1t", k + 1)),
            &AnyTensor::Real(RealTensor::from_matrix(u)),
        )?;
    }
    let summary = serde_json::json!({
        "shape": a.shape(),
        "pair": [k1, k2],
        "rank": res.r,
        "transforms": fam_spec.to_string(),
        "residual": res.residual,
        "relative_residual": res.residual / a.fro_norm().max(f64::MIN_POSITIVE),
        "iterations": res.history.len(),
        "history": res.history,
        "learnable_modes": res.factors.iter().map(|(k, _)| k + 1).collect::<Vec<_>>(),
        "sparsity": sparsity,
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    info!("residual {:.4e} after {} alternations", res.residual, res.history.len());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.json_logs);
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Complete(a) => complete(a),
        Command::Sweep(a) => sweep(a),
        Command::Decompose(a) => decompose(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
