use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cadclust::dataset::{
    load_csv, save_csv, BlobSpec, Dataset, GenSpec, RingSpec,
};
use cadclust::dkernel::Partition;
use cadclust::kbc::{self, KbcParams};
use cadclust::kmeans::{kmeans_fit, KmeansParams};
use cadclust_bench::config::{default_psi_grid, default_tau_grid, BenchConfig};
use cadclust_bench::{engine, plot};

#[derive(Parser)]
#[command(name = "bench", about = "Clustering benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark config: datasets x methods x seeded runs.
    Run(RunArgs),
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Fit one method on one CSV dataset.
    Fit(FitArgs),
    /// Render a labeled scatter plot as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark config (JSON).
    #[arg(long)]
    config: String,
    /// Output directory for results.json, summary.csv, and plots/.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; falls back to BENCH_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Family {
    TwoCrescents,
    Blobs,
    Spiral,
    RingsGaussians,
    SubspaceGaussians,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Output CSV path (includes a label column).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// two_crescents: total points (even); spiral uses --n-per-arm.
    #[arg(long = "n", alias = "n-total")]
    n_total: Option<usize>,
    /// two_crescents / spiral: Gaussian noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// blobs / rings_gaussians: blob list "cx,cy,...,stddev,count;...".
    #[arg(long)]
    spec: Option<String>,
    /// rings_gaussians: ring list "cx,cy,radius,jitter,count;...".
    #[arg(long)]
    rings: Option<String>,
    #[arg(long)]
    n_per_arm: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    dim_total: Option<usize>,
    #[arg(long)]
    dim_sub: Option<usize>,
    #[arg(long)]
    n_per_cluster: Option<usize>,
    #[arg(long)]
    stddev: Option<f64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Method {
    Kbc,
    Kmeans,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input CSV.
    #[arg(long)]
    data: String,
    /// Output JSON with labels, objective, and parameters.
    #[arg(long)]
    out: PathBuf,
    /// Name of the ground-truth column to strip from the features.
    #[arg(long)]
    label_column: Option<String>,
    /// Treat the first CSV row as data, not a header.
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// kbc: sample size for seeding (default min(n, 512)).
    #[arg(long)]
    s: Option<usize>,
    /// kbc: chaining threshold; omitted => tuned by the objective.
    #[arg(long)]
    tau: Option<f64>,
    /// kbc: partition sharpness; omitted => tuned by the objective.
    #[arg(long)]
    psi: Option<usize>,
    /// kbc: number of random partitions.
    #[arg(long, default_value_t = 200)]
    t: usize,
    #[arg(long, default_value_t = 50)]
    max_refine_iters: usize,
    /// kmeans: independent restarts.
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV.
    #[arg(long)]
    data: String,
    /// Labels JSON: either a bare integer array or a fit result object.
    #[arg(long)]
    labels: PathBuf,
    /// Output SVG.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    no_header: bool,
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn parse_num_list(entry: &str, want: usize, what: &str) -> Result<Vec<f64>, String> {
    let nums: Result<Vec<f64>, _> = entry.split(',').map(|f| f.trim().parse::<f64>()).collect();
    match nums {
        Ok(nums) if nums.len() == want => Ok(nums),
        Ok(nums) => Err(format!("{what} '{entry}': expected {want} fields, found {}", nums.len())),
        Err(e) => Err(format!("{what} '{entry}': {e}")),
    }
}

/// "cx,cy,stddev,count;..." (2-D shown; any dimension works).
fn parse_blob_specs(text: &str) -> Result<Vec<BlobSpec>, String> {
    text.split(';')
        .filter(|e| !e.trim().is_empty())
        .map(|entry| {
            let nums: Result<Vec<f64>, _> =
                entry.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| format!("blob '{entry}': {e}"))?;
            if nums.len() < 4 {
                return Err(format!("blob '{entry}': need at least cx,cy,stddev,count"));
            }
            let count = nums[nums.len() - 1];
            if count < 1.0 || count.fract() != 0.0 {
                return Err(format!("blob '{entry}': count must be a positive integer"));
            }
            Ok(BlobSpec {
                center: nums[..nums.len() - 2].to_vec(),
                stddev: nums[nums.len() - 2],
                count: count as usize,
            })
        })
        .collect()
}

/// "cx,cy,radius,jitter,count;...".
fn parse_ring_specs(text: &str) -> Result<Vec<RingSpec>, String> {
    text.split(';')
        .filter(|e| !e.trim().is_empty())
        .map(|entry| {
            let nums = parse_num_list(entry, 5, "ring")?;
            if nums[4] < 1.0 || nums[4].fract() != 0.0 {
                return Err(format!("ring '{entry}': count must be a positive integer"));
            }
            Ok(RingSpec {
                center: vec![nums[0], nums[1]],
                radius: nums[2],
                jitter: nums[3],
                count: nums[4] as usize,
            })
        })
        .collect()
}

fn gen_spec_from_args(args: &GenArgs) -> Result<GenSpec, String> {
    let need = |opt: Option<f64>, flag: &str| opt.ok_or(format!("--{flag} is required"));
    let need_n = |opt: Option<usize>, flag: &str| opt.ok_or(format!("--{flag} is required"));
    match args.family {
        Family::TwoCrescents => Ok(GenSpec::TwoCrescents {
            n_total: need_n(args.n_total, "n")?,
            noise: need(args.noise, "noise")?,
            seed: args.seed,
        }),
        Family::Blobs => {
            let spec = args.spec.as_deref().ok_or("--spec is required".to_string())?;
            Ok(GenSpec::Blobs { specs: parse_blob_specs(spec)?, seed: args.seed })
        }
        Family::Spiral => Ok(GenSpec::Spiral {
            n_per_arm: need_n(args.n_per_arm, "n-per-arm")?,
            arms: need_n(args.arms, "arms")?,
            noise: need(args.noise, "noise")?,
            seed: args.seed,
        }),
        Family::RingsGaussians => {
            let rings = args.rings.as_deref().ok_or("--rings is required".to_string())?;
            let blobs = args.spec.as_deref().unwrap_or("");
            Ok(GenSpec::RingsGaussians {
                rings: parse_ring_specs(rings)?,
                blobs: parse_blob_specs(blobs)?,
                seed: args.seed,
            })
        }
        Family::SubspaceGaussians => Ok(GenSpec::SubspaceGaussians {
            dim_total: need_n(args.dim_total, "dim-total")?,
            dim_sub: need_n(args.dim_sub, "dim-sub")?,
            n_per_cluster: need_n(args.n_per_cluster, "n-per-cluster")?,
            stddev: need(args.stddev, "stddev")?,
            seed: args.seed,
        }),
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let threads = args.threads.or_else(|| {
        std::env::var("BENCH_THREADS").ok().and_then(|v| v.parse().ok())
    });
    let config = match BenchConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => return usage_error(&e.to_string()),
    };
    match engine::run(&config, &args.out, threads.unwrap_or(0)) {
        Ok(bundle) => {
            println!("{} records written to {}", bundle.records.len(), args.out.display());
            print!("{}", engine::summary_csv(&bundle));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(args: &GenArgs) -> ExitCode {
    let spec = match gen_spec_from_args(args) {
        Ok(s) => s,
        Err(e) => return usage_error(&e),
    };
    let data = match spec.generate() {
        Ok(d) => d,
        Err(e) => return usage_error(&e.to_string()),
    };
    if let Err(e) = save_csv(&data, &args.out) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    println!(
        "{}: n = {}, d = {}, clusters = {} -> {}",
        data.name,
        data.n(),
        data.d(),
        data.n_clusters().unwrap_or(0),
        args.out.display()
    );
    ExitCode::SUCCESS
}

fn load_data(path: &str, no_header: bool, label_column: Option<&str>) -> Result<Dataset, cadclust::Error> {
    load_csv(path, !no_header, label_column)
}

fn cmd_fit(args: &FitArgs) -> ExitCode {
    let data = match load_data(&args.data, args.no_header, args.label_column.as_deref()) {
        Ok(d) => d,
        Err(e) => return usage_error(&e.to_string()),
    };
    let result = match args.method {
        Method::Kbc => {
            let base = KbcParams {
                k: args.k,
                s: args.s.unwrap_or(512).min(data.n()),
                tau: args.tau.unwrap_or(0.5),
                psi: args.psi.unwrap_or(16),
                t: args.t,
                max_refine_iters: args.max_refine_iters,
                seed: args.seed,
            };
            if args.psi.is_some() && args.tau.is_some() {
                kbc::fit(&data, &base)
            } else {
                // Tune the unpinned parameters by the objective.
                let psis = args.psi.map_or_else(default_psi_grid, |p| vec![p]);
                let taus = args.tau.map_or_else(default_tau_grid, |t| vec![t]);
                kbc::tune(&data, &psis, &taus, &base).map(|(_, r)| r)
            }
        }
        Method::Kmeans => kmeans_fit(
            &data,
            &KmeansParams {
                k: args.k,
                n_init: args.n_init,
                max_iters: args.max_iters,
                tol: args.tol,
                seed: args.seed,
            },
        ),
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    if let Err(e) = std::fs::write(&args.out, json) {
        eprintln!("error: {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    let scored = data.labels.as_ref().map(|truth| {
        (
            cadclust::metrics::nmi(truth, &result.labels).expect("equal lengths"),
            cadclust::metrics::ari(truth, &result.labels).expect("equal lengths"),
        )
    });
    match scored {
        Some((nmi, ari)) => println!(
            "k = {}, objective = {:.6}, nmi = {nmi:.4}, ari = {ari:.4} -> {}",
            result.k,
            result.objective,
            args.out.display()
        ),
        None => println!(
            "k = {}, objective = {:.6} -> {}",
            result.k,
            result.objective,
            args.out.display()
        ),
    }
    ExitCode::SUCCESS
}

fn read_labels(path: &PathBuf) -> Result<Vec<usize>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(labels) = serde_json::from_str::<Vec<usize>>(&text) {
        return Ok(labels);
    }
    #[derive(serde::Deserialize)]
    struct WithLabels {
        labels: Vec<usize>,
    }
    serde_json::from_str::<WithLabels>(&text)
        .map(|w| w.labels)
        .map_err(|e| format!("{}: expected a label array or an object with a labels field: {e}", path.display()))
}

fn cmd_plot(args: &PlotArgs) -> ExitCode {
    let data = match load_data(&args.data, args.no_header, args.label_column.as_deref()) {
        Ok(d) => d,
        Err(e) => return usage_error(&e.to_string()),
    };
    let labels = match read_labels(&args.labels) {
        Ok(l) => l,
        Err(e) => return usage_error(&e),
    };
    if labels.len() != data.n() {
        return usage_error(&format!(
            "label count {} does not match the {} data rows",
            labels.len(),
            data.n()
        ));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let partition = match Partition::new(labels, k.max(1)) {
        Ok(p) => p,
        Err(e) => return usage_error(&e.to_string()),
    };
    if let Err(e) = plot::save_scatter(&data, &partition, &args.out) {
        eprintln!("error: {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    println!("{} points -> {}", data.n(), args.out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Plot(args) => cmd_plot(args),
    }
}
