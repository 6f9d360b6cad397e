use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propkern::attributes::{p2k_traced, AttributeMode, P2KConfig, DEFAULT_RIDGE};
use propkern::eval::{evaluate, EvalConfig};
use propkern::graph::degree_labels;
use propkern::grid::{filter_matrix, grid_kernel_traced, quantize_grayscale, GridConfig, GridGraph, Padding};
use propkern::io::gram::{read_kernel, write_kernel};
use propkern::io::pgm::load_pgm;
use propkern::io::read_classes;
use propkern::io::tu::{load_tu_dataset, write_tu_dataset, TuOptions};
use propkern::kernel::{normalize_kernel, propagation_kernel_traced, KernelRun, DEFAULT_LABEL_WIDTH};
use propkern::masking::mask_labels;
use propkern::{Error, GraphDatabase, Metric, PKConfig, Result, Scheme};

#[derive(Parser)]
#[command(name = "propkern", version, about = "Propagation kernels for graph databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagation kernel for labeled or partially labeled graphs.
    Compute(ComputeArgs),
    /// Propagation kernel for graphs with continuous node attributes.
    P2k(P2kArgs),
    /// Propagation kernel for grayscale or label images.
    Grid(GridArgs),
    /// Hide a random fraction of node labels and write the dataset back.
    Mask(MaskArgs),
    /// Cross-validate a Gram matrix with kernel k-nearest-neighbors.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tu,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Diffusion,
    Labelprop,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelMetric {
    Tv,
    H,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttrMetric {
    L1,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    #[value(name = "n1_4")]
    N14,
    #[value(name = "n1_8")]
    N18,
    #[value(name = "n2_16")]
    N216,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaddingArg {
    Renorm,
    Circular,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 10)]
    tmax: i64,
    /// Label bin width.
    #[arg(long, default_value_t = DEFAULT_LABEL_WIDTH)]
    w: f64,
    #[arg(long, value_enum, default_value = "tv")]
    metric: LabelMetric,
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output Gram matrix.
    #[arg(long)]
    out: PathBuf,
    /// Also write the kernel of every shorter run to `<out>.t<T>`.
    #[arg(long)]
    per_iteration: bool,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "tu")]
    format: Format,
    #[arg(long, value_enum, default_value = "diffusion")]
    scheme: SchemeArg,
    /// Replace node labels with node degrees.
    #[arg(long)]
    degree_labels: bool,
    /// Add the reverse of every listed edge.
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct P2kArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 1.0)]
    w_attr: f64,
    #[arg(long, value_enum, default_value = "l1")]
    metric_attr: AttrMetric,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Hash raw attributes per dimension instead of propagating them.
    #[arg(long)]
    per_dimension: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Directory of .pgm images, processed in file-name order.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, value_enum, default_value = "n1_4")]
    filter: FilterArg,
    #[arg(long, value_enum, default_value = "renorm")]
    padding: PaddingArg,
    /// Quantization levels; without it pixel values are used as labels.
    #[arg(long)]
    levels: Option<u32>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for the masked dataset.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    kernel: PathBuf,
    /// One integer class per line, in kernel order.
    #[arg(long)]
    classes: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    knn: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl KernelArgs {
    fn pk_config(&self, scheme: Scheme) -> Result<PKConfig> {
        let t_max = usize::try_from(self.tmax)
            .map_err(|_| Error::InvalidInput(format!("--tmax must be >= 0, got {}", self.tmax)))?;
        let cfg = PKConfig {
            t_max,
            w_label: self.w,
            metric_label: match self.metric {
                LabelMetric::Tv => Metric::TotalVariation,
                LabelMetric::H => Metric::Hellinger,
            },
            scheme,
            normalize: self.normalize,
            seed: self.seed,
            ..PKConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn write(&self, run: &KernelRun) -> Result<()> {
        write_kernel(&run.kernel, &self.out)?;
        if self.per_iteration {
            for t in 0..run.contributions.len() {
                let mut k = run.partial_sum(t);
                if self.normalize {
                    k = normalize_kernel(&k)?;
                }
                let mut name = self.out.clone().into_os_string();
                name.push(format!(".t{t}"));
                write_kernel(&k, Path::new(&name))?;
            }
        }
        Ok(())
    }
}

impl DatasetArgs {
    fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeArg::Diffusion => Scheme::Diffusion,
            SchemeArg::Labelprop => Scheme::LabelPropagation,
        }
    }

    fn load(&self) -> Result<GraphDatabase> {
        let Format::Tu = self.format;
        let db = load_tu_dataset(
            &self.dataset,
            TuOptions {
                symmetrize: self.symmetrize,
            },
        )?;
        Ok(if self.degree_labels { degree_labels(&db) } else { db })
    }
}

fn load_grids(dir: &Path, levels: Option<u32>) -> Result<Vec<GridGraph>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no .pgm images", dir.display())));
    }
    let images = paths.iter().map(|p| load_pgm(p)).collect::<Result<Vec<_>>>()?;
    let labels = images
        .iter()
        .map(|img| match levels {
            Some(l) => quantize_grayscale(&img.pixels, l),
            None => Ok(img.pixels.iter().map(|&v| u32::from(v)).collect()),
        })
        .collect::<Result<Vec<_>>>()?;
    let k = match levels {
        Some(l) => l as usize,
        None => labels.iter().flatten().max().map_or(1, |m| *m as usize + 1),
    };
    images
        .iter()
        .zip(labels)
        .map(|(img, l)| GridGraph::new(img.height, img.width, k, l))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compute(args) => {
            let db = args.data.load()?;
            let cfg = args.kernel.pk_config(args.data.scheme())?;
            args.kernel.write(&propagation_kernel_traced(&db, &cfg)?)
        }
        Command::P2k(args) => {
            let db = args.data.load()?;
            let cfg = P2KConfig {
                pk: args.kernel.pk_config(args.data.scheme())?,
                w_attr: args.w_attr,
                metric_attr: match args.metric_attr {
                    AttrMetric::L1 => Metric::L1,
                    AttrMetric::L2 => Metric::L2,
                },
                samples: args.samples,
                ridge: DEFAULT_RIDGE,
                mode: if args.per_dimension {
                    AttributeMode::PerDimension
                } else {
                    AttributeMode::Propagated
                },
            };
            args.kernel.write(&p2k_traced(&db, &cfg)?)
        }
        Command::Grid(args) => {
            let grids = load_grids(&args.images, args.levels)?;
            let filter = filter_matrix(match args.filter {
                FilterArg::N14 => "n1_4",
                FilterArg::N18 => "n1_8",
                FilterArg::N216 => "n2_16",
            })?;
            let cfg = GridConfig {
                pk: args.kernel.pk_config(Scheme::Diffusion)?,
                filter,
                padding: match args.padding {
                    PaddingArg::Renorm => Padding::RenormalizedZero,
                    PaddingArg::Circular => Padding::Circular,
                },
            };
            args.kernel.write(&grid_kernel_traced(&grids, &cfg)?)
        }
        Command::Mask(args) => {
            let db = load_tu_dataset(
                &args.dataset,
                TuOptions {
                    symmetrize: args.symmetrize,
                },
            )?;
            let masked = mask_labels(&db, args.fraction, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
            let name = args
                .dataset
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("DS")
                .to_string();
            write_tu_dataset(&masked, &args.out, &name)
        }
        Command::Eval(args) => {
            let k = read_kernel(&args.kernel)?;
            let classes = read_classes(&args.classes)?;
            let cfg = EvalConfig {
                folds: args.folds,
                runs: args.runs,
                k_nn: args.knn,
                seed: args.seed,
            };
            println!("{}", evaluate(&k, &classes, &cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("propkern: {e}");
            ExitCode::from(2)
        }
    }
}
