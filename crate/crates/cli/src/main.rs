use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use torus_toeplitz::harness::{
    build_report, check_identities, emit_report, ExperimentConfig, PreparedExperiment,
};
use torus_toeplitz::structured::{build_system, structured_inverse_columns};
use torus_toeplitz::toeplitz::{assemble_toeplitz, inverse, logdet_and_trace};

#[derive(Parser, Debug)]
#[command(name = "torus-toeplitz", version, about = "Truncated Toeplitz operators on lattice triangles")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed recorded with the run for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 keeps the default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factorize the symbol along the configured cone.
    Factorize,
    /// Dump the dense matrix at one scale.
    Assemble {
        #[arg(long)]
        lambda: u32,
    },
    /// Compare the structured inverse with the dense one at one scale.
    Invert {
        #[arg(long)]
        lambda: u32,
    },
    /// Sweep the trace of the inverse over the configured scales.
    TraceSweep,
    /// Sweep the log-determinant over the configured scales.
    DetSweep,
    /// Moment, integral and homotopy identities.
    CheckIdentities,
    /// Sweep plus identities, with CSV, JSON and plot files.
    Report,
}

fn configure_threads(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        eprintln!("built without the parallel feature; --threads {n} ignored");
    }
    Ok(())
}

fn load(common: &Common) -> Result<PreparedExperiment> {
    let path = common
        .config
        .as_ref()
        .context("--config is required for this command")?;
    let cfg = ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(cfg.prepare()?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.common.threads)?;
    let out = &cli.common.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let p = load(&cli.common)?;
    match cli.command {
        Command::Factorize => {
            let f = &p.factorization;
            write_json(&out.join("factorization.json"), &serde_json::to_value(f)?)?;
            println!(
                "exact={} residual_sup={:.3e} leak_alpha={:.3e} leak_beta={:.3e}",
                f.is_exact(),
                f.residual_sup,
                f.leak_alpha,
                f.leak_beta
            );
        }
        Command::Assemble { lambda } => {
            let t = p.base.at_lambda(lambda)?;
            let m = assemble_toeplitz(&p.f_coeffs, &t);
            m.dump(&out.join("matrix.bin"), &out.join("index_map.json"))?;
            println!("n_points={} hermitian_defect={:.3e}", m.size(), m.hermitian_defect());
        }
        Command::Invert { lambda } => {
            let t = p.base.at_lambda(lambda)?;
            let m = assemble_toeplitz(&p.f_coeffs, &t);
            let dense = inverse(&m)?;
            let (_, trace_dense) = logdet_and_trace(&m)?;
            let sys = build_system(&p.factorization, &t, &p.config.structured_options())?;
            let (cols, report) = structured_inverse_columns(&sys)?;
            let mut worst = 0.0f64;
            for (j, c) in cols.iter().enumerate() {
                let (mut err, mut norm) = (0.0, 0.0);
                for (i, v) in c.values.iter().enumerate() {
                    err += (v - dense[(i, j)]).norm_sqr();
                    norm += dense[(i, j)].norm_sqr();
                }
                worst = worst.max((err / norm).sqrt());
            }
            let trace_structured: f64 = cols.iter().enumerate().map(|(i, c)| c.values[i].re).sum();
            let doc = json!({
                "lambda": lambda,
                "n_points": t.n_points,
                "box_m": sys.box_radius(),
                "trace_dense": trace_dense,
                "trace_structured": trace_structured,
                "max_column_rel_error": worst,
                "solve": report,
            });
            write_json(&out.join("invert.json"), &doc)?;
            println!("max_column_rel_error={worst:.3e} trace_dense={trace_dense:.12} trace_structured={trace_structured:.12}");
        }
        Command::TraceSweep | Command::DetSweep | Command::Report => {
            let with_identities = matches!(cli.command, Command::Report);
            let doc = build_report(&p, with_identities)?;
            let files = emit_report(&doc, out)?;
            for r in &doc.records {
                match cli.command {
                    Command::DetSweep => println!(
                        "lambda={} logdet={:.12} predicted={:.12} resid/lambda={:.6e}",
                        r.lambda, r.logdet_dense, r.logdet_predicted, r.resid_logdet_per_lambda
                    ),
                    _ => println!(
                        "lambda={} trace={:.12} predicted={:.12} resid/lambda={:.6e}",
                        r.lambda, r.trace_dense, r.trace_predicted, r.resid_trace_per_lambda
                    ),
                }
            }
            let fit = match cli.command {
                Command::DetSweep => &doc.logdet_fit,
                _ => &doc.trace_fit,
            };
            if let Some(fit) = fit {
                println!("fitted slope {:.6}", fit.slope);
            }
            println!("wrote {}", files.csv.display());
        }
        Command::CheckIdentities => {
            let checks = check_identities(&p)?;
            write_json(&out.join("identities.json"), &serde_json::to_value(&checks)?)?;
            if let Some(m) = &checks.moments {
                println!("moment identity gap u={:.3e} v={:.3e}", m.gap_u, m.gap_v);
            }
            for r in &checks.integral {
                println!("integral identity lambda={} gap={:.3e}", r.lambda, r.gap);
            }
            let h = &checks.homotopy;
            println!(
                "homotopy integral={:.10} target={:.10} gap={:.3e} opposite-sign gap={:.3e}",
                h.integral, h.target, h.gap, h.opposite_sign_gap
            );
        }
    }
    write_json(
        &out.join("run.json"),
        &json!({ "seed": cli.common.seed, "threads": cli.common.threads }),
    )?;
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
