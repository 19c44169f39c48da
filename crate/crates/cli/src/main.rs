use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use adapted_wasserstein::experiments::{
    deviation_experiment, gap_demo, rate_experiment, rate_svg, DeviationConfig, GridChoice, RateConfig, Reference,
    XGrid,
};
use adapted_wasserstein::measure::{adapted_empirical, empirical};
use adapted_wasserstein::models::{ModelKind, SdePreset};
use adapted_wasserstein::nested::{aw_nested, bicausal_lp_oracle_with_cap, DEFAULT_BUDGET, DEFAULT_ORACLE_CAP};
use adapted_wasserstein::paths::fmt_exact;
use adapted_wasserstein::{
    wp_discrete, DiscreteMeasure, Dims, GridKind, GridSpec, ModelSpec, PathMeasureTree, PathSample,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aw", version, about = "Adapted empirical measures and adapted Wasserstein distances")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw i.i.d. paths from a model and write them as CSV.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a path CSV onto a grid; also writes the cell of every path.
    Project {
        input: PathBuf,
        #[arg(long, default_value = "uniform")]
        grid: GridKind,
        /// Tune the grid to this N instead of the number of paths.
        #[arg(long)]
        n_override: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Cell sidecar (default: `<out>.cells.csv`).
        #[arg(long)]
        cells: Option<PathBuf>,
    },
    /// Build the (adapted) empirical tree of a path CSV and write its dump.
    Tree {
        input: PathBuf,
        #[arg(long, default_value = "uniform")]
        grid: GridChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wasserstein distance between two discrete measures (CSV `x_0..x_{d-1},weight`).
    W1 {
        mu: PathBuf,
        nu: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Write the optimal plan as `i,j,mass`.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Adapted Wasserstein distance between two tree dumps.
    Aw {
        mu: PathBuf,
        nu: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Also solve the bicausal LP and report the discrepancy.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
    },
    /// Mean adapted error over a list of sample sizes, with a log-log fit.
    Rate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated, strictly increasing sample sizes.
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096,16384")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Empirical tail of the adapted error above its mean.
    Deviate {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// `auto:K` for K points up to the largest deviation, or a
        /// comma-separated list of x values.
        #[arg(long, default_value = "auto:25")]
        x_grid: String,
    },
    /// Flat and adapted distance of the two-leaf example.
    GapDemo {
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        /// Also write `gap.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// black-scholes, sde, gaussian-walk, ar1, uniform-cube or tree.
    #[arg(long, default_value = "gaussian-walk")]
    model: String,
    /// State dimension d.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Number of time steps T.
    #[arg(long, default_value_t = 2)]
    t: usize,
    /// Time step (black-scholes, sde).
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Drift/volatility preset for sde: linear or trig.
    #[arg(long, default_value = "linear")]
    preset: SdePreset,
    /// Start point for sde, comma-separated (default: ones).
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    /// AR coefficient (ar1).
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Cube radius (uniform-cube).
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Tree dump for the tree model, or a preset name (coin2, coin2-biased, markov3).
    #[arg(long)]
    tree: Option<String>,
}

impl ModelArgs {
    fn load_tree(&self) -> Result<PathMeasureTree> {
        let Some(src) = &self.tree else {
            bail!("--tree is required for the tree model");
        };
        if adapted_wasserstein::models::TREE_PRESETS.contains(&src.as_str()) {
            return Ok(adapted_wasserstein::models::ground_truth_tree(src)?);
        }
        read_tree(Path::new(src))
    }

    fn spec(&self) -> Result<ModelSpec> {
        let kind = match self.model.as_str() {
            "black-scholes" => ModelKind::BlackScholesDisc { dt: self.dt },
            "sde" => ModelKind::SdeDisc {
                dt: self.dt,
                preset: self.preset,
                x0: self.x0.clone(),
            },
            "gaussian-walk" => ModelKind::GaussianWalk,
            "ar1" => ModelKind::ArOne { a: self.a },
            "uniform-cube" => ModelKind::UniformCube { radius: self.radius },
            "tree" => {
                let tree = self.load_tree()?;
                let dims = tree.dims();
                return Ok(ModelSpec::new(ModelKind::CustomTree { tree }, dims)?);
            }
            other => bail!("unknown model {other:?}"),
        };
        Ok(ModelSpec::new(kind, Dims::new(self.d, self.t)?)?)
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "uniform")]
    grid: GridChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `truth` (tree model only) or `proxy:M`.
    #[arg(long, default_value = "proxy:131072")]
    reference: String,
    /// Largest admissible node-pair count per level.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: PathBuf,
}

impl ExperimentArgs {
    fn reference(&self, model: &ModelSpec) -> Result<Reference> {
        if self.reference == "truth" {
            let Some(tree) = model.exact_tree() else {
                bail!("--reference truth needs a finitely supported model (--model tree)");
            };
            return Ok(Reference::GroundTruth(tree.clone()));
        }
        let Some(m) = self.reference.strip_prefix("proxy:") else {
            bail!("--reference must be `truth` or `proxy:M`, got {:?}", self.reference);
        };
        let m = m.parse().with_context(|| format!("bad proxy size {m:?}"))?;
        Ok(Reference::Proxy { m })
    }
}

fn read_tree(path: &Path) -> Result<PathMeasureTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PathMeasureTree::parse_dump(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DiscreteMeasure::read_csv(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn read_sample(path: &Path) -> Result<PathSample> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PathSample::read_csv(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or stdout when it is `None`.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_x_grid(s: &str) -> Result<XGrid> {
    if let Some(k) = s.strip_prefix("auto:") {
        return Ok(XGrid::Auto(k.parse().with_context(|| format!("bad point count {k:?}"))?));
    }
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad x value {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(XGrid::Values(values))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Sample { model, n, seed, out } => {
            let sample = model.spec()?.sample(n, seed)?;
            let mut w = output(out.as_deref())?;
            sample.write_csv(&mut w)?;
            w.flush()?;
        }
        Cmd::Project {
            input,
            grid,
            n_override,
            out,
            cells,
        } => {
            let sample = read_sample(&input)?;
            let dims = sample.dims();
            let spec = GridSpec::new(grid, dims, n_override.unwrap_or(sample.len() as u64))?;
            let mut projected = Vec::with_capacity(sample.data().len());
            let cells_path = cells.unwrap_or_else(|| {
                let mut s = out.clone().into_os_string();
                s.push(".cells.csv");
                PathBuf::from(s)
            });
            let mut cw = create(&cells_path)?;
            let rings: Vec<String> = (1..=dims.t()).map(|t| format!("ring_t{t}")).collect();
            let index: Vec<String> = (0..dims.len()).map(|k| format!("z{k}")).collect();
            writeln!(cw, "{},{}", rings.join(","), index.join(","))?;
            for x in sample.iter() {
                let cell = spec.cell_of(x)?;
                projected.extend(spec.project_values(x)?);
                let r: Vec<String> = cell.time_rings.iter().map(u32::to_string).collect();
                let z: Vec<String> = cell.index.iter().map(i64::to_string).collect();
                writeln!(cw, "{},{}", r.join(","), z.join(","))?;
            }
            cw.flush()?;
            let projected = PathSample::from_flat(dims, projected, sample.seed())?;
            let mut w = create(&out)?;
            projected.write_csv(&mut w)?;
            w.flush()?;
            eprintln!(
                "grid {grid:?}: N = {}, Delta = {}, m = {}; cells written to {}",
                spec.n(),
                spec.delta(),
                spec.m(),
                cells_path.display()
            );
        }
        Cmd::Tree { input, grid, out } => {
            let sample = read_sample(&input)?;
            let tree = match grid {
                GridChoice::None => empirical(&sample)?,
                GridChoice::Uniform | GridChoice::NonUniform => {
                    let kind = if grid == GridChoice::Uniform {
                        GridKind::Uniform
                    } else {
                        GridKind::NonUniform
                    };
                    adapted_empirical(&sample, &GridSpec::new(kind, sample.dims(), sample.len() as u64)?)?
                }
            };
            let mut w = output(out.as_deref())?;
            w.write_all(tree.dump().as_bytes())?;
            w.flush()?;
        }
        Cmd::W1 { mu, nu, p, plan } => {
            let (mu, nu) = (read_measure(&mu)?, read_measure(&nu)?);
            let (value, coupling) = wp_discrete(&mu, &nu, p)?;
            println!("{}", fmt_exact(value));
            if !coupling.exact {
                eprintln!("note: supplies too large for exact scaling; solved in floating point");
            }
            if let Some(path) = plan {
                let mut w = create(&path)?;
                writeln!(w, "i,j,mass")?;
                for (i, j, q) in &coupling.entries {
                    writeln!(w, "{i},{j},{}", fmt_exact(*q))?;
                }
                w.flush()?;
            }
        }
        Cmd::Aw {
            mu,
            nu,
            p,
            oracle,
            oracle_cap,
        } => {
            let (mu, nu) = (read_tree(&mu)?, read_tree(&nu)?);
            let (value, _) = aw_nested(&mu, &nu, p)?;
            if oracle {
                let lp = bicausal_lp_oracle_with_cap(&mu, &nu, p, oracle_cap)?;
                println!("aw {}", fmt_exact(value));
                println!("oracle {}", fmt_exact(lp));
                println!("discrepancy {}", fmt_exact((value - lp).abs()));
            } else {
                println!("{}", fmt_exact(value));
            }
        }
        Cmd::Rate { exp, n_list, trials } => {
            let model = exp.model.spec()?;
            let reference = exp.reference(&model)?;
            let mut cfg = RateConfig::new(model, exp.grid, n_list, trials, exp.seed, reference);
            cfg.budget = exp.budget;
            let report = rate_experiment(&cfg)?;
            fs::create_dir_all(&exp.out)?;
            let mut w = create(&exp.out.join("rate.csv"))?;
            report.write_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&exp.out.join("errors.csv"))?;
            report.write_errors_csv(&mut w)?;
            w.flush()?;
            fs::write(exp.out.join("plot.svg"), rate_svg(&report))?;
            for row in &report.rows {
                println!("N = {:>7}  mean = {:.6}  std = {:.6}", row.n, row.mean, row.std);
            }
            println!(
                "slope = {:.4} +- {:.4} (theory {:.4})",
                report.slope, report.slope_stderr, report.theoretical_slope
            );
            if !report.audits_passed() {
                bail!("audit failed: flat distance exceeded adapted distance on some trial");
            }
        }
        Cmd::Deviate {
            exp,
            n,
            trials,
            x_grid,
        } => {
            let model = exp.model.spec()?;
            let reference = exp.reference(&model)?;
            let mut cfg = DeviationConfig::new(model, exp.grid, n, trials, exp.seed, reference);
            cfg.budget = exp.budget;
            cfg.x_grid = parse_x_grid(&x_grid)?;
            let report = deviation_experiment(&cfg)?;
            fs::create_dir_all(&exp.out)?;
            let mut w = create(&exp.out.join("tail.csv"))?;
            report.write_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&exp.out.join("errors.csv"))?;
            report.write_errors_csv(&mut w)?;
            w.flush()?;
            println!(
                "N = {n}, {trials} trials: mean = {:.6}, std = {:.6}, Spearman(log tail, x^2) = {:.4}",
                report.mean, report.std, report.spearman
            );
        }
        Cmd::GapDemo { epsilon, out } => {
            let r = gap_demo(epsilon)?;
            println!("{r}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(
                    dir.join("gap.csv"),
                    format!(
                        "epsilon,w,aw,gap\n{},{},{},{}\n",
                        fmt_exact(r.epsilon),
                        fmt_exact(r.w),
                        fmt_exact(r.aw),
                        fmt_exact(r.gap)
                    ),
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    run(cli)
}
