//! `certeval`: evaluate classified images against expert references,
//! generate synthetic test pairs, and convert PGM rasters to map files.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use certeval_core::convert::{read_pgm, to_class_map, to_expert_map, ValueMapping};
use certeval_core::eval::{run_eval, EvalOptions, EvalRun, ImageInput};
use certeval_core::field::BdNormalization;
use certeval_core::rational::parse_rational;
use certeval_core::synth::{gen_synthetic, write_pair, Corruption, Geometry, SynthSpec};
use certeval_core::{CertaintyScheme, EcrMode, GvfConfig, Grade, Stencil, Tiling, Variant};

#[derive(Parser)]
#[command(name = "certeval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predicted class maps against expert maps and write a JSON report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic (expert.uem, pred.ucm) pair.
    Synth(SynthArgs),
    /// Convert an 8-bit PGM into a UEM or UCM file through a value table.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted class map (UCM1). Repeat once per image.
    #[arg(long = "pred", required = true)]
    preds: Vec<PathBuf>,
    /// Expert maps (UEM1) for the `--pred` at the same position, comma
    /// separated. With a single `--pred`, every `--expert` belongs to it.
    #[arg(long = "expert", required = true)]
    experts: Vec<String>,
    /// Weights for sure, moderately sure, not sure.
    #[arg(long, default_value = "2/3,1/2,1/3")]
    scheme: String,
    #[arg(long, default_value_t = 32)]
    tile: usize,
    /// Tile step; defaults to the tile size.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "plain,nef,gvf")]
    variants: Vec<String>,
    /// WDC normalization exponent.
    #[arg(long, default_value = "1/6")]
    a: String,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = StencilArg::Forward)]
    stencil: StencilArg,
    /// Divide BD by gradient magnitudes instead of GVF magnitudes.
    #[arg(long)]
    bd_gradient_norm: bool,
    /// Report the ECR of the unmodeled row, counting it in the divisor.
    #[arg(long)]
    ecr_all_rows: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum StencilArg {
    Forward,
    Central,
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    StraightEdge,
    TwoRegion,
    Checkerboard,
}

#[derive(Copy, Clone, ValueEnum)]
enum CorruptionArg {
    Shift,
    OrthogonalCross,
    Spurious,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Defaults to `shift`.
    #[arg(long, value_enum)]
    corruption: Option<CorruptionArg>,
    #[arg(long, default_value_t = 0)]
    shift: usize,
    /// Number of spurious pixels for `--corruption spurious`.
    #[arg(long, default_value_t = 1)]
    spurious: usize,
    /// Checkerboard cell side; defaults to half the size.
    #[arg(long)]
    cell: Option<usize>,
    #[arg(long, default_value = "s")]
    grade: String,
    #[arg(long, default_value = "s")]
    boundary_grade: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    map: PathBuf,
    /// Output file; `.uem` writes an expert map, `.ucm` a class map.
    #[arg(long)]
    out: PathBuf,
    /// Declared class count; defaults to the largest class in the table.
    #[arg(long)]
    classes: Option<usize>,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let numerical = error
            .chain()
            .filter_map(|e| e.downcast_ref::<certeval_core::Error>())
            .any(|e| e.is_numerical());
        Failure {
            code: if numerical { 3 } else { 2 },
            error,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => evaluate(args),
        Command::Synth(args) => synth(args),
        Command::Convert(args) => convert(args),
    };
    match result.map_err(Failure::from) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn pair_inputs(preds: Vec<PathBuf>, experts: Vec<String>) -> Result<Vec<ImageInput>> {
    let split = |s: &str| -> Vec<PathBuf> {
        s.split(',').filter(|p| !p.is_empty()).map(PathBuf::from).collect()
    };
    if preds.len() == 1 {
        let experts = experts.iter().flat_map(|e| split(e)).collect();
        return Ok(vec![ImageInput {
            pred: preds.into_iter().next().unwrap(),
            experts,
        }]);
    }
    if preds.len() != experts.len() {
        bail!(
            "{} --pred values but {} --expert values; give one --expert list per --pred",
            preds.len(),
            experts.len()
        );
    }
    Ok(preds
        .into_iter()
        .zip(experts)
        .map(|(pred, e)| ImageInput {
            pred,
            experts: split(&e),
        })
        .collect())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let scheme = CertaintyScheme::parse(&args.scheme)?;
    let tiling = Tiling::new(args.tile, args.step.unwrap_or(args.tile), (0, 0))?;
    let variants = args
        .variants
        .iter()
        .map(|v| Variant::parse(v).ok_or_else(|| anyhow!("unknown variant `{v}`")))
        .collect::<Result<Vec<_>>>()?;
    let exponent = parse_rational(&args.a).ok_or_else(|| anyhow!("bad exponent `{}`", args.a))?;
    let defaults = GvfConfig::default();
    let gvf = GvfConfig {
        mu: args.mu.unwrap_or(defaults.mu),
        dt: args.dt.unwrap_or(defaults.dt),
        max_iterations: args.max_iter.unwrap_or(defaults.max_iterations),
        tolerance: args.tol.unwrap_or(defaults.tolerance),
        stencil: match args.stencil {
            StencilArg::Forward => Stencil::Forward,
            StencilArg::Central => Stencil::Central,
        },
    };
    gvf.validate()?;
    let run = EvalRun {
        images: pair_inputs(args.preds, args.experts)?,
        options: EvalOptions {
            tiling,
            scheme,
            variants,
            exponent,
            gvf,
            bd_normalization: if args.bd_gradient_norm {
                BdNormalization::Gradient
            } else {
                BdNormalization::Field
            },
            ecr_mode: if args.ecr_all_rows {
                EcrMode::AllRows
            } else {
                EcrMode::ModeledOnly
            },
            workers: args.workers,
        },
    };
    let json = run_eval(&run)?.to_json();
    match args.out {
        Some(path) => fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let geometry = match args.kind {
        KindArg::StraightEdge => Geometry::StraightEdge,
        KindArg::TwoRegion => Geometry::TwoRegion,
        KindArg::Checkerboard => Geometry::Checkerboard {
            cell: args.cell.unwrap_or(args.size / 2),
        },
    };
    let corruption = match args.corruption.unwrap_or(CorruptionArg::Shift) {
        CorruptionArg::Shift => Corruption::Shift(args.shift),
        CorruptionArg::OrthogonalCross => Corruption::OrthogonalCross,
        CorruptionArg::Spurious => Corruption::Spurious(args.spurious),
    };
    let spec = SynthSpec {
        geometry,
        size: args.size,
        corruption,
        seed: args.seed,
        grade: Grade::from_name(&args.grade)?,
        boundary_grade: Grade::from_name(&args.boundary_grade)?,
    };
    let pair = gen_synthetic(&spec)?;
    let (expert, pred) = write_pair(&pair, &args.out_dir)?;
    println!("{}", expert.display());
    println!("{}", pred.display());
    Ok(())
}

fn convert(args: ConvertArgs) -> Result<()> {
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let img = read_pgm(&bytes).with_context(|| args.input.display().to_string())?;
    let table = fs::File::open(&args.map).with_context(|| format!("reading {}", args.map.display()))?;
    let mapping = ValueMapping::read_csv(table).with_context(|| args.map.display().to_string())?;
    let text = match args.out.extension().and_then(|e| e.to_str()) {
        Some("uem") => to_expert_map(&img, &mapping, args.classes)?.to_uem(),
        Some("ucm") => to_class_map(&img, &mapping, args.classes)?.to_ucm(),
        _ => bail!("output must end in .uem or .ucm: {}", args.out.display()),
    };
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
