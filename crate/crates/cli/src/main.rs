use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ordsieve_core::diagnostics::{RatioPoint, RossbergReport, RossbergSettings};
use ordsieve_core::format::{fmt_f64, write_csv};
use ordsieve_core::study::{deciles_csv, montecarlo, summary_csv, timing_csv};
use ordsieve_core::{ObservedSample, RunConfig};

/// Sieve estimation of latent and measurement-error distributions from
/// order statistics of repeated measurements.
#[derive(Parser)]
#[command(name = "ordsieve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draws a data sample from the configured truth and writes it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Draw from the estimation panel for this seed instead of the data
        /// stream, so `estimate` with the same seed sees its own panel.
        #[arg(long)]
        self_match: bool,
    },
    /// Fits the sieve model to a data file.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Data CSV with header `x_r,x_s`.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for `estimate.txt` and `curve.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the replication study.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Output directory for `summary.csv`, `deciles.csv` and `timing.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares exponential and Rossberg errors through spacings,
    /// cross-sums and ch.f. ratios.
    Rossberg {
        /// Draws per simulated sample.
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory for the curve tables and `summary.txt`.
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_ESTIMATION: u8 = 5;

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ordsieve: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Simulate {
            common,
            out,
            self_match,
        } => {
            let cfg = load_config(&common)?;
            simulate(&cfg, &out, self_match)
        }
        Command::Estimate { common, data, out } => {
            let cfg = load_config(&common)?;
            estimate(&cfg, &data, &out)
        }
        Command::Montecarlo { common, out } => {
            let cfg = load_config(&common)?;
            let jobs = common.jobs.unwrap_or_else(default_jobs);
            run_montecarlo(&cfg, jobs, &out)
        }
        Command::Rossberg {
            draws,
            seed,
            jobs,
            out,
        } => {
            set_jobs(jobs)?;
            rossberg(draws, seed, &out)
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    if jobs == Some(0) {
        return Err(fail(EXIT_CONFIG, "--jobs must be at least 1"));
    }
    let threads = jobs.unwrap_or_else(default_jobs);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| fail(EXIT_CONFIG, format!("thread pool: {e}")))
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    set_jobs(common.jobs)?;
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)
                .map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| fail(EXIT_CONFIG, e))?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| fail(EXIT_IO, format!("{}: {e}", dir.display())))
}

fn simulate(cfg: &RunConfig, out: &Path, self_match: bool) -> Outcome {
    let sample = if self_match {
        let (xi, eps) = cfg.truth().map_err(|e| fail(EXIT_CONFIG, e))?;
        ordsieve_core::simulate_sample(&xi, &eps, &cfg.panel(cfg.seed), &cfg.design)
    } else {
        cfg.generate_data(cfg.seed)
    }
    .map_err(|e| fail(EXIT_CONFIG, e))?;
    write(out, &sample.to_csv())?;
    Ok(0)
}

fn estimate(cfg: &RunConfig, data_path: &Path, out: &Path) -> Outcome {
    let text = fs::read_to_string(data_path)
        .map_err(|e| fail(EXIT_DATA, format!("{}: {e}", data_path.display())))?;
    let data = ObservedSample::from_csv(&text)
        .map_err(|e| fail(EXIT_DATA, format!("{}: {e}", data_path.display())))?;
    if data.len() != cfg.sample_size {
        return Err(fail(
            EXIT_DATA,
            format!(
                "{} has {} rows but sample_size is {}",
                data_path.display(),
                data.len(),
                cfg.sample_size
            ),
        ));
    }
    let result = cfg
        .estimate(&data, cfg.seed)
        .map_err(|e| fail(EXIT_ESTIMATION, e))?;
    let (f_xi, f_eps) = (
        result.f_xi().map_err(|e| fail(EXIT_ESTIMATION, e))?,
        result.f_eps().map_err(|e| fail(EXIT_ESTIMATION, e))?,
    );
    let lo = data.rows().iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let hi = data.rows().iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    let curve = (0..201).map(|i| {
        let x = lo + (hi - lo) * i as f64 / 200.0;
        vec![x, f_xi.eval(x), f_eps.eval(x)]
    });
    create_dir(out)?;
    write(&out.join("estimate.txt"), &result.to_record())?;
    write(
        &out.join("curve.csv"),
        &write_csv(&["x", "F_xi_hat", "F_eps_hat"], curve),
    )?;
    if result.converged {
        Ok(0)
    } else {
        eprintln!(
            "ordsieve: optimizer stopped at the evaluation budget before meeting the tolerance; result written"
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn run_montecarlo(cfg: &RunConfig, jobs: usize, out: &Path) -> Outcome {
    let outcomes = montecarlo(cfg, jobs).map_err(|e| fail(EXIT_CONFIG, e))?;
    create_dir(out)?;
    write(&out.join("summary.csv"), &summary_csv(&outcomes))?;
    write(
        &out.join("deciles.csv"),
        &deciles_csv(cfg, &outcomes).map_err(|e| fail(EXIT_CONFIG, e))?,
    )?;
    write(&out.join("timing.csv"), &timing_csv(&outcomes))?;
    Ok(0)
}

fn ratio_table(report: &RossbergReport, part: fn(&RatioPoint) -> (f64, f64)) -> String {
    let mut out = String::from(
        "t,observed,observed_se,exponential,exponential_se,rossberg,rossberg_se\n",
    );
    let curves = [
        &report.ratio_observed,
        &report.ratio_exponential,
        &report.ratio_rossberg,
    ];
    for i in 0..report.ratio_observed.len() {
        let mut cells = vec![fmt_f64(report.ratio_observed[i].t)];
        for curve in curves {
            let p = &curve[i];
            if p.flagged {
                cells.extend([String::new(), String::new()]);
            } else {
                let (v, se) = part(p);
                cells.extend([fmt_f64(v), fmt_f64(se)]);
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn rossberg(draws: usize, seed: u64, out: &Path) -> Outcome {
    if draws < 2 {
        return Err(fail(EXIT_CONFIG, "--draws must be at least 2"));
    }
    let settings = RossbergSettings {
        draws,
        seed,
        ..RossbergSettings::default()
    };
    let report = RossbergReport::run(&settings).map_err(|e| fail(EXIT_CONFIG, e))?;
    create_dir(out)?;
    write(
        &out.join("ratio_re.csv"),
        &ratio_table(&report, |p| (p.value.re, p.se_re)),
    )?;
    write(
        &out.join("ratio_im.csv"),
        &ratio_table(&report, |p| (p.value.im, p.se_im)),
    )?;
    let cdf_rows = |r: &ordsieve_core::DistanceReport| {
        (0..r.grid.len())
            .map(|i| vec![r.grid[i], r.cdf_a[i], r.cdf_b[i]])
            .collect::<Vec<_>>()
    };
    write(
        &out.join("spacing_cdf.csv"),
        &write_csv(&["x", "exponential", "rossberg"], cdf_rows(&report.spacing)),
    )?;
    write(
        &out.join("crosssum_cdf.csv"),
        &write_csv(
            &["x", "exponential_exponential", "rossberg_exponential"],
            cdf_rows(&report.crosssum),
        ),
    )?;
    let flag = |ok: bool, yes: &str, no: &str| if ok { yes.to_string() } else { no.to_string() };
    let summary = format!(
        "draws = {draws}\nseed = {seed}\n\
         spacing_ks = {}\nspacing_p_value = {}\nspacing = {}\n\
         crosssum_ks = {}\ncrosssum_p_value = {}\ncrosssum = {}\n\
         ratio_gap_exponential = {}\nratio_gap_rossberg = {}\nratio = {}\n",
        fmt_f64(report.spacing.statistic),
        fmt_f64(report.spacing.p_value),
        flag(report.spacing_aligned(), "aligned", "not aligned"),
        fmt_f64(report.crosssum.statistic),
        fmt_f64(report.crosssum.p_value),
        flag(report.crosssum_distinct(), "distinct", "not distinct"),
        fmt_f64(report.exponential_gap()),
        fmt_f64(report.rossberg_gap()),
        flag(report.ratio_departs(), "departs", "does not depart"),
    );
    write(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(0)
}
