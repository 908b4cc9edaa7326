//! `sdpmap` command-line front end.
//!
//! Exit codes: 0 certified (or success), 2 solved but uncertified,
//! unconverged or infeasible, 1 error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sdpmap::certificate::{check_optimality, CertificateReport};
use sdpmap::dataio::{load_csv, load_embedding, save_embedding, Dataset, EmbeddingFile, EmbeddingMetadata};
use sdpmap::diffmaps::{diffusion_map, spectral_basis};
use sdpmap::embed::{factor_to_embedding, EmbeddingResult};
use sdpmap::kernel::{build, DiffusionKernel};
use sdpmap::oos::extend_points;
use sdpmap::sdp::{build_coupling, solve, SolverConfig};
use sdpmap::toy::{build_interval_problem, run_interval_experiment};
use sdpmap::Error;

#[derive(Parser)]
#[command(name = "sdpmap", version, about = "SDP embeddings over a diffusion kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, embed and certify a CSV point cloud.
    Embed {
        input: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Extend a saved embedding to the points of a CSV file.
    Extend {
        embedding: PathBuf,
        points: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-check the dual certificate of a saved embedding.
    Certify {
        embedding: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// SDP embedding next to the diffusion-map embedding.
    Compare {
        input: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Discretized interval experiment.
    Toy {
        /// Number of grid points on [-1, 1].
        #[arg(long, default_value_t = 201)]
        n: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct CsvArgs {
    /// The first row is a header.
    #[arg(long)]
    header: bool,
    /// 0-based column holding integer labels.
    #[arg(long)]
    label_column: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Gaussian bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 10)]
    r0: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("tol", self.tol), ("rank-tol", self.rank_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("--{name} must be positive, got {v}");
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                bail!("--sigma must be positive, got {s}");
            }
        }
        fs::create_dir_all(&self.out).with_context(|| format!("creating output directory {}", self.out.display()))?;
        Ok(())
    }

    fn sigma(&self) -> Result<f64> {
        self.sigma.context("--sigma is required for this command")
    }

    fn solver(&self, n: usize) -> SolverConfig {
        let r0 = self.r0.min(n);
        if r0 != self.r0 {
            eprintln!("note: r0 reduced from {} to N = {n}", self.r0);
        }
        SolverConfig { r0, max_iters: self.max_iters, tol_conv: self.tol, seed: self.seed }
    }
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    converged: bool,
    iterations: usize,
    objective: f64,
    stationarity: f64,
    rank: usize,
    certificate: &'a CertificateReport,
}

#[derive(Serialize)]
struct CompareFile<'a> {
    t: f64,
    m: usize,
    diffusion_eigenvalues: &'a [f64],
    sdp_rank: usize,
    sdp_certified: bool,
}

enum Outcome {
    Certified,
    Uncertified,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_matrix_csv(path: &Path, ids: &[String], prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = String::from("id");
    for c in 1..=width {
        write!(out, ",{prefix}{c}")?;
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        out.push_str(id);
        for v in row {
            write!(out, ",{v}")?;
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

struct Solved {
    dk: DiffusionKernel,
    embedding: EmbeddingResult,
    cert: CertificateReport,
    converged: bool,
}

/// Kernel, solver, embedding and certificate; writes the three embed artifacts.
fn solve_and_write(ds: &Dataset, run: &RunArgs) -> Result<Solved> {
    let sigma = run.sigma()?;
    let dk = build(ds, sigma).context("building diffusion kernel")?;
    let cfg = run.solver(ds.len());
    let coupling = build_coupling(&dk.k).context("building coupling matrix")?;
    let state = solve(&coupling, &cfg).context("solving SDP")?;
    let embedding = factor_to_embedding(&dk.k, &state.h, run.rank_tol).context("computing embedding")?;
    let cert = check_optimality(&dk.k, &embedding.h_xi).context("checking certificate")?;

    let file = EmbeddingFile {
        ids: ds.ids.clone(),
        coordinates: matrix_rows(&embedding.xi),
        singular_values: embedding.singular_values[..embedding.rank].to_vec(),
        metadata: EmbeddingMetadata {
            sigma,
            seed: cfg.seed,
            tol_conv: cfg.tol_conv,
            max_iters: cfg.max_iters,
            r0: cfg.r0,
            rank_tol: run.rank_tol,
        },
        training_points: Some(ds.rows()),
    };
    save_embedding(&file, run.out.join("embedding.json")).context("writing embedding.json")?;
    write_matrix_csv(&run.out.join("embedding.csv"), &ds.ids, "xi", &file.coordinates)?;
    write_json(
        &run.out.join("certificate.json"),
        &CertificateFile {
            converged: state.converged,
            iterations: state.iterations,
            objective: state.objective,
            stationarity: state.stationarity,
            rank: embedding.rank,
            certificate: &cert,
        },
    )?;
    if !state.converged {
        eprintln!("solver did not converge within {} iterations", cfg.max_iters);
    }
    eprintln!(
        "rank {}, objective {}, slackness {:e}, least eigenvalue {:e}, certified: {}",
        embedding.rank, state.objective, cert.slackness_residual, cert.least_eigenvalues[0], cert.is_certified
    );
    Ok(Solved { dk, embedding, cert, converged: state.converged })
}

fn outcome(certified: bool, converged: bool) -> Outcome {
    if certified && converged {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    }
}

fn cmd_embed(input: &Path, csv: &CsvArgs, run: &RunArgs) -> Result<Outcome> {
    run.validate()?;
    let ds = load_csv(input, csv.header, csv.label_column).with_context(|| format!("loading {}", input.display()))?;
    let s = solve_and_write(&ds, run)?;
    Ok(outcome(s.cert.is_certified, s.converged))
}

/// Rebuild the kernel and the embedding stored in a file.
fn reload(path: &Path, run: &RunArgs) -> Result<(EmbeddingFile, DiffusionKernel, EmbeddingResult)> {
    let file = load_embedding(path).with_context(|| format!("loading {}", path.display()))?;
    let ds = file.training_dataset()?;
    let sigma = run.sigma.unwrap_or(file.metadata.sigma);
    let dk = build(&ds, sigma).context("rebuilding diffusion kernel")?;
    let xi = file.coordinate_matrix();
    let embedding = EmbeddingResult {
        rank: xi.ncols(),
        singular_values: file.singular_values.clone(),
        h_xi: xi.clone(),
        xi,
    };
    Ok((file, dk, embedding))
}

fn cmd_certify(path: &Path, run: &RunArgs) -> Result<Outcome> {
    run.validate()?;
    let (_, dk, e) = reload(path, run)?;
    match check_optimality(&dk.k, &e.h_xi) {
        Ok(cert) => {
            write_json(&run.out.join("certificate.json"), &cert)?;
            eprintln!(
                "slackness {:e}, least eigenvalue {:e}, certified: {}",
                cert.slackness_residual, cert.least_eigenvalues[0], cert.is_certified
            );
            Ok(outcome(cert.is_certified, true))
        }
        Err(err @ Error::Infeasible { .. }) => {
            eprintln!("not certified: {err}");
            Ok(Outcome::Uncertified)
        }
        Err(err) => Err(err).context("checking certificate"),
    }
}

fn cmd_extend(path: &Path, points: &Path, csv: &CsvArgs, run: &RunArgs) -> Result<Outcome> {
    run.validate()?;
    let (_, dk, e) = reload(path, run)?;
    let new = load_csv(points, csv.header, csv.label_column).with_context(|| format!("loading {}", points.display()))?;
    if new.dim() != dk.base.dim() {
        bail!("new points have dimension {}, training points have {}", new.dim(), dk.base.dim());
    }
    let ext = extend_points(&dk, &e, &new.points).context("extending embedding")?;

    let mut out = String::from("id");
    for c in 1..=e.rank {
        write!(out, ",xi{c}")?;
    }
    out.push_str(",kappa,degenerate\n");
    for (id, p) in new.ids.iter().zip(&ext) {
        out.push_str(id);
        for v in &p.coords {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{}", p.kappa, p.degenerate)?;
    }
    let target = run.out.join("extension.csv");
    fs::write(&target, out).with_context(|| format!("writing {}", target.display()))?;
    let degenerate = ext.iter().filter(|p| p.degenerate).count();
    if degenerate > 0 {
        eprintln!("{degenerate} of {} extensions are degenerate", ext.len());
    }
    Ok(Outcome::Certified)
}

fn cmd_compare(input: &Path, csv: &CsvArgs, run: &RunArgs) -> Result<Outcome> {
    run.validate()?;
    let ds = load_csv(input, csv.header, csv.label_column).with_context(|| format!("loading {}", input.display()))?;
    let s = solve_and_write(&ds, run)?;
    let basis = spectral_basis(&s.dk.base).context("diffusion spectral basis")?;
    let m = 2.min(ds.len().saturating_sub(1));
    if m == 0 {
        bail!("diffusion map needs at least two points");
    }
    let t = 1.0;
    let map = diffusion_map(&basis, t, m)?;
    write_matrix_csv(&run.out.join("diffmap.csv"), &ds.ids, "psi", &matrix_rows(&map))?;
    let top = &basis.eigenvalues[..basis.len().min(6)];
    write_json(
        &run.out.join("compare.json"),
        &CompareFile { t, m, diffusion_eigenvalues: top, sdp_rank: s.embedding.rank, sdp_certified: s.cert.is_certified },
    )?;
    Ok(outcome(s.cert.is_certified, s.converged))
}

fn cmd_toy(n: usize, run: &RunArgs) -> Result<Outcome> {
    run.validate()?;
    let p = build_interval_problem(n, run.sigma()?).context("building interval problem")?;
    let (report, _) = run_interval_experiment(&p, &run.solver(n), run.rank_tol).context("running interval experiment")?;
    write_json(&run.out.join("toy_report.json"), &report)?;
    eprintln!("rank {}, certified: {}", report.rank, report.certified);
    if let Some(r) = report.sign_residual {
        eprintln!("sign solution residual {r:e}");
    }
    Ok(outcome(report.certified, report.converged))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result) = match &cli.command {
        Command::Embed { input, csv, run } => ("embed", cmd_embed(input, csv, run)),
        Command::Extend { embedding, points, csv, run } => ("extend", cmd_extend(embedding, points, csv, run)),
        Command::Certify { embedding, run } => ("certify", cmd_certify(embedding, run)),
        Command::Compare { input, csv, run } => ("compare", cmd_compare(input, csv, run)),
        Command::Toy { n, run } => ("toy", cmd_toy(*n, run)),
    };
    match result {
        Ok(Outcome::Certified) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {stage}: {err:#}");
            ExitCode::from(1)
        }
    }
}
