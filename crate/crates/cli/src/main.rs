use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use peakgrid::generator::{batch, GeneratorConfig};
use peakgrid::harness::{run_experiment, solve_instance, verify_result, ExperimentPlan, ModelKind, SolveRecord};
use peakgrid::model::Instance;
use peakgrid::reformulation::{build_cp_mip, build_mp_mip};
use peakgrid_milp::{to_lp_string, SolverLimits};

/// Seconds per solve for the desk-scale and the full-scale design.
const DESK_TIME_LIMIT: f64 = 60.0;
const FULL_TIME_LIMIT: f64 = 4.0 * 3600.0;

#[derive(Parser)]
#[command(name = "peakgrid", version, about = "Peak-aware bilevel electricity pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Bc,
    Mp,
    Cp,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Bc => ModelKind::Bc,
            ModelArg::Mp => ModelKind::Mp,
            ModelArg::Cp => ModelKind::Cp,
        }
    }
}

#[derive(Args, Clone, Debug)]
struct DesignArgs {
    /// JSON generator config; keys not given keep the scale's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; instance i of each cell uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Paper-scale design (10 customers x 3 jobs, 4 h limit) instead of the
    /// desk-scale one (5 x 2, 60 s).
    #[arg(long)]
    full: bool,
}

#[derive(Args, Clone, Debug)]
struct LimitArgs {
    /// Wall-clock limit per solve in seconds.
    #[arg(long, env = "PEAKGRID_TIME_LIMIT")]
    time_limit: Option<f64>,
    /// Relative gap at which a solve stops.
    #[arg(long)]
    gap: Option<f64>,
    /// Branch-and-bound node limit per solve. Unlike a time limit it gives
    /// the same answer on every machine.
    #[arg(long)]
    node_limit: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the instances of a design plus a manifest.
    Generate {
        #[command(flatten)]
        design: DesignArgs,
        /// Also fix competitor prices at the cap on every instance.
        #[arg(long)]
        competitor_at_cap: bool,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
    },
    /// Solve one instance and write the result JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "mp")]
        model: ModelArg,
        /// Fill in competitor prices at the cap when the instance has none.
        #[arg(long)]
        competitor_at_cap: bool,
        #[command(flatten)]
        limits: LimitArgs,
        /// Result file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the MIP in LP format.
        #[arg(long)]
        write_lp: Option<PathBuf>,
    },
    /// Run every model on every instance of a design and write the tables.
    Experiment {
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// Worker threads across instances; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "bc,mp,cp")]
        models: Vec<ModelArg>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-check a result file against the follower.
    Verify { result: PathBuf },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse().command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            design,
            competitor_at_cap,
            out,
        } => generate(&design, competitor_at_cap, &out),
        Command::Solve {
            instance,
            model,
            competitor_at_cap,
            limits,
            out,
            write_lp,
        } => solve(&instance, model.into(), competitor_at_cap, &limits, out.as_deref(), write_lp.as_deref()),
        Command::Experiment {
            design,
            limits,
            threads,
            models,
            out,
        } => experiment(&design, &limits, threads, &models, &out),
        Command::Verify { result } => verify(&result),
    }
}

fn load_config(design: &DesignArgs) -> Result<GeneratorConfig> {
    let base = if design.full {
        GeneratorConfig::default()
    } else {
        GeneratorConfig::desk()
    };
    let mut config = match &design.config {
        None => base,
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let overrides: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let Some(overrides) = overrides.as_object() else {
                bail!("{}: config must be a JSON object", path.display());
            };
            let mut merged = serde_json::to_value(&base)?;
            for (k, v) in overrides {
                merged[k] = v.clone();
            }
            serde_json::from_value(merged).with_context(|| format!("config {}", path.display()))?
        }
    };
    if let Some(seed) = design.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn limits(args: &LimitArgs, full: bool) -> SolverLimits {
    let mut l = SolverLimits::default().with_time_limit(args.time_limit.unwrap_or(if full {
        FULL_TIME_LIMIT
    } else {
        DESK_TIME_LIMIT
    }));
    if let Some(g) = args.gap {
        l = l.with_gap(g);
    }
    if let Some(n) = args.node_limit {
        l = l.with_node_limit(n);
    }
    l
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    kappa: f64,
    tww: f64,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest {
    config: GeneratorConfig,
    instances: Vec<ManifestEntry>,
}

fn generate(design: &DesignArgs, competitor_at_cap: bool, out: &Path) -> Result<()> {
    let config = load_config(design)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut entries = Vec::new();
    for item in batch(&config)? {
        let file = format!("tww{}_k{}_s{}.json", item.tww, item.kappa, item.seed);
        let inst = if competitor_at_cap {
            item.instance.with_competitor_at_cap()
        } else {
            item.instance
        };
        write_json(&out.join(&file), &inst)?;
        entries.push(ManifestEntry {
            file,
            kappa: item.kappa,
            tww: item.tww,
            seed: item.seed,
        });
    }
    let n = entries.len();
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            config,
            instances: entries,
        },
    )?;
    println!("wrote {n} instances to {}", out.display());
    Ok(())
}

fn solve(
    path: &Path,
    kind: ModelKind,
    competitor_at_cap: bool,
    args: &LimitArgs,
    out: Option<&Path>,
    lp: Option<&Path>,
) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut inst: Instance<f64> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if competitor_at_cap && kind == ModelKind::Cp && inst.competitor_prices.is_none() {
        inst = inst.with_competitor_at_cap();
    }
    if let Some(lp) = lp {
        let mip = match kind {
            ModelKind::Cp => build_cp_mip(&inst)?,
            _ => build_mp_mip(&inst)?,
        };
        fs::write(lp, to_lp_string(&mip.model)).with_context(|| format!("writing {}", lp.display()))?;
    }
    let rec = solve_instance(&inst, kind, &limits(args, false))?;
    match out {
        Some(p) => write_json(p, &rec)?,
        None => println!("{}", serde_json::to_string_pretty(&rec)?),
    }
    Ok(())
}

fn experiment(design: &DesignArgs, args: &LimitArgs, threads: usize, models: &[ModelArg], out: &Path) -> Result<()> {
    if models.is_empty() {
        bail!("at least one model is required");
    }
    let config = load_config(design)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut plan = ExperimentPlan::new(config, limits(args, design.full));
    plan.models = models.iter().map(|&m| m.into()).collect();
    plan.threads = threads;
    plan.out = Some(out.to_path_buf());
    let runs = run_experiment(&plan)?;
    let mut failed = 0;
    for r in &runs {
        for kind in [ModelKind::Mp, ModelKind::Cp] {
            if let Some(rec) = r.get(kind) {
                let rep = verify_result(rec);
                if !rep.passed() {
                    failed += 1;
                    warn!("{kind} tww={} kappa={} seed={} fails verification:\n{rep}", r.tww, r.kappa, r.seed);
                }
            } else if plan.models.contains(&kind) {
                warn!("{kind} tww={} kappa={} seed={}: no result", r.tww, r.kappa, r.seed);
            }
        }
    }
    info!("{} instances, {failed} results failed verification", runs.len());
    println!("wrote tables for {} instances to {}", runs.len(), out.display());
    if failed > 0 {
        bail!("{failed} results failed verification");
    }
    Ok(())
}

fn verify(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rec: SolveRecord = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let rep = verify_result(&rec);
    print!("{rep}");
    if !rep.passed() {
        bail!("verification failed");
    }
    Ok(())
}
