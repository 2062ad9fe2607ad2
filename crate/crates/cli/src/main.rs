use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sbp_embed::assembly::Discretization;
use sbp_embed::experiment::{circle_convergence, convergence_csv, run_simulation};
use sbp_embed::mesh::{generate_circle_mesh, load_mesh, save_mesh, MultiblockMesh};
use sbp_embed::sbp1d::{SbpOperator1D, SUPPORTED_ORDERS};
use sbp_embed::sparse::write_coo;
use sbp_embed::verify::verify_suite;
use sbp_embed::wave::load_problem;
use sbp_embed::Error;

/// Continuous-SBP Laplacian and acoustic wave solver on curvilinear
/// multiblock meshes.
#[derive(Parser)]
#[command(name = "sbp-embed", version)]
struct Cli {
    /// Cap on worker threads used inside library calls.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check operator identities on built-in blocks and meshes.
    Verify(VerifyArgs),
    /// Convergence study of the circle point-source experiment.
    Converge(ConvergeArgs),
    /// Time-step a problem on a mesh file, writing snapshots and a report.
    Run(RunArgs),
    /// Summarize a mesh and optionally save it or dump its operators.
    MeshInfo(MeshInfoArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Operator orders, comma separated.
    #[arg(long = "p", value_delimiter = ',', default_value = "5,7,9")]
    orders: Vec<usize>,
    /// Random vector pairs per identity.
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Scale one quadrature weight by 1 + REL before checking.
    #[arg(long, hide = true)]
    perturb_weight: Option<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long = "p", default_value_t = 5)]
    order: usize,
    /// Number of refinement levels.
    #[arg(long, default_value_t = 3)]
    levels: u32,
    /// First circle refinement level.
    #[arg(long, default_value_t = 2)]
    start: u32,
    #[arg(long, default_value = "convergence.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Output directory for snapshots, energy log and report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "p", default_value_t = 5)]
    order: usize,
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false)]
struct MeshSource {
    /// Built-in circle mesh at this refinement level.
    #[arg(long, group = "source")]
    circle: Option<u32>,
    /// Mesh file.
    #[arg(long, group = "source")]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct MeshInfoArgs {
    #[command(flatten)]
    source: MeshSource,
    /// Boundary tag for the built-in circle.
    #[arg(long, default_value = "outer")]
    tag: String,
    /// Save the mesh as JSON.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Assemble with this order and report grid sizes.
    #[arg(long = "p")]
    order: Option<usize>,
    /// Write H and D_L of the reduced grid in coordinate format.
    #[arg(long, requires = "order")]
    dump_operators: Option<PathBuf>,
}

/// Bad flags or inputs: exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A check that ran but did not pass: exit status 1.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_)
            | Error::Configuration(_)
            | Error::Schema(_)
            | Error::InvalidMesh(_)
            | Error::InconsistentMesh(_)
            | Error::InvalidMapping { .. }
            | Error::Unsupported(_)
            | Error::Io { .. },
        ) => 2,
        _ => 1,
    }
}

fn check_order(p: usize) -> anyhow::Result<()> {
    if !SUPPORTED_ORDERS.contains(&p) {
        return Err(usage(format!(
            "unsupported order {p}; supported orders are {SUPPORTED_ORDERS:?}"
        )));
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<()> {
    if args.orders.is_empty() {
        return Err(usage("--p needs at least one order"));
    }
    for &p in &args.orders {
        check_order(p)?;
    }
    if args.pairs == 0 {
        return Err(usage("--pairs must be at least 1"));
    }
    let report = verify_suite(&args.orders, args.pairs, args.perturb_weight)?;
    for c in &report.checks {
        println!(
            "{} p={} {:<34} {:>10.3e} <= {:.1e}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.p,
            c.name,
            c.value,
            c.threshold,
            c.error
                .as_ref()
                .map(|e| format!("  ({e})"))
                .unwrap_or_default()
        );
    }
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(
            CheckFailed(format!("{failed} of {} checks failed", report.checks.len())).into(),
        );
    }
    println!("all {} checks passed", report.checks.len());
    Ok(())
}

fn cmd_converge(args: ConvergeArgs) -> anyhow::Result<()> {
    check_order(args.order)?;
    if args.levels < 2 {
        return Err(usage("--levels must be at least 2"));
    }
    if args.start == 0 {
        return Err(usage(
            "--start must be at least 1 so the source at the origin is a grid point",
        ));
    }
    let levels: Vec<u32> = (args.start..args.start + args.levels).collect();
    println!("refinement,n_blocks,N_dofs,log10_error,rate_q,seconds");
    let rows = circle_convergence(args.order, &levels, |r| {
        println!(
            "{},{},{},{:.4},{},{:.2}",
            r.refinement,
            r.n_blocks,
            r.n_dofs,
            r.log10_error,
            r.rate_q.map_or("-".into(), |q| format!("{q:.3}")),
            r.seconds
        );
        let _ = std::io::stdout().flush();
    })?;
    let path = &args.out;
    std::fs::write(path, convergence_csv(&rows)).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    if let Some(bad) = rows.iter().find(|r| r.failure.is_some()) {
        return Err(CheckFailed(format!(
            "refinement {}: {}",
            bad.refinement,
            bad.failure.as_deref().unwrap_or_default()
        ))
        .into());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    check_order(args.order)?;
    let mesh = load_mesh(&args.mesh)?;
    let problem = load_problem(&args.config)?;
    let report = run_simulation(mesh, problem, args.order, &args.out)?;
    println!(
        "{} steps of dt = {:.6e} on {} points in {} blocks ({:.2} s assembly, {:.2} s stepping)",
        report.steps_completed,
        report.dt,
        report.n_dofs,
        report.n_blocks,
        report.timings.assembly_seconds,
        report.timings.stepping_seconds
    );
    println!(
        "final energy {:.6e}, state hash {}",
        report.final_energy, report.state_hash
    );
    println!(
        "report written to {}",
        args.out.join("report.json").display()
    );
    if !report.succeeded() {
        bail!(CheckFailed(report.status));
    }
    Ok(())
}

fn load_source(src: &MeshSource, tag: &str) -> anyhow::Result<MultiblockMesh> {
    match (&src.circle, &src.mesh) {
        (Some(r), None) => Ok(generate_circle_mesh(*r, tag)),
        (None, Some(path)) => Ok(load_mesh(path)?),
        _ => Err(usage("give exactly one of --circle or --mesh")),
    }
}

fn dump(
    path: &Path,
    write: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>,
) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    write(&mut f).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(())
}

fn cmd_mesh_info(args: MeshInfoArgs) -> anyhow::Result<()> {
    let mesh = load_source(&args.source, &args.tag)?;
    println!("blocks      {}", mesh.num_blocks());
    println!("interfaces  {}", mesh.interfaces.len());
    for tag in mesh.tags() {
        let sides = mesh.boundaries.values().filter(|t| **t == tag).count();
        println!("tag         {tag} ({sides} sides)");
    }
    if let Some(path) = &args.save {
        save_mesh(&mesh, path)?;
        println!("saved       {}", path.display());
    }
    if let Some(p) = args.order {
        check_order(p)?;
        let start = Instant::now();
        let disc = Discretization::new(mesh, SbpOperator1D::gauss_lobatto(p)?)?;
        println!("order       {p} ({} nodes per direction)", disc.tensor.n);
        println!("N           {}", disc.embedding.n_full());
        println!("N reduced   {}", disc.n_reduced());
        println!(
            "area        {:.15}",
            disc.global.h_reduced.iter().sum::<f64>()
        );
        println!("assembly    {:.3} s", start.elapsed().as_secs_f64());
        if let Some(dir) = &args.dump_operators {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let h = sbp_embed::sparse::diag(&disc.global.h_reduced);
            dump(&dir.join("h.coo"), |f| write_coo(&h, f))?;
            dump(&dir.join("laplace.coo"), |f| {
                write_coo(&disc.global.dl_reduced, f)
            })?;
            dump(&dir.join("coords.txt"), |f| {
                for p in disc.coords() {
                    writeln!(f, "{:.16e} {:.16e}", p[0], p[1])?;
                }
                Ok(())
            })?;
            println!("operators   {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Run(a) => cmd_run(a),
        Command::MeshInfo(a) => cmd_mesh_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
