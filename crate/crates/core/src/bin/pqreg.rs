use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use pqreg::extension::{extend_operator_lq, hahn_banach_extend, DyadicLevel, Subspace};
use pqreg::factor::{maurey_rosenthal_factorize, strong_factorize_lr, verify_factorization, DEFAULT_MAX_CUTS};
use pqreg::report::{Report, RunConfig};
use pqreg::suite::{default_corpus, verify_suite};
use pqreg::tensor::{tensor_norm_bounds, Tensor, TensorNorm};
use pqreg::{
    mz_coincidence_sweep, rho_lower_bound, rho_oracle, Error, Exponent, FunctionSpace, LatticeVector, OperatorMatrix,
    RegularityParams,
};

const CORPUS_ENV: &str = "PQREG_CORPUS";

#[derive(Parser)]
#[command(name = "pqreg", version, about = "Regularity of operators between finite Banach function spaces")]
struct Cli {
    /// Seed for every stochastic estimator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance for the writer-side interval check.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certified interval for ρ_{p,q}(T).
    Rho {
        /// Operator JSON.
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        p: Exponent,
        #[arg(long)]
        q: Exponent,
        #[arg(long, default_value_t = 2)]
        tuple: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        /// Also run the brute-force oracle at this resolution.
        #[arg(long)]
        oracle: Option<f64>,
    },
    /// Certified interval for a tensor norm.
    TensorNorm {
        /// Tensor JSON.
        #[arg(long)]
        tensor: PathBuf,
        /// eps, pi, g_p, d_p, w_p, phi_pq, r_pq, h_pq or k_pq.
        #[arg(long)]
        norm: String,
        #[arg(long)]
        p: Option<Exponent>,
        #[arg(long)]
        q: Option<Exponent>,
    },
    /// Maurey–Rosenthal factorization, optionally the strong L_r version.
    Factorize {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        p: Exponent,
        #[arg(long)]
        s: Exponent,
        /// Constant to certify; defaults to the analytic upper bound.
        #[arg(long)]
        constant: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_CUTS)]
        max_cuts: usize,
        /// Strong factorization through L_r with (p,q) = (--p, --strong-q).
        #[arg(long, requires = "strong_r")]
        strong_q: Option<Exponent>,
        #[arg(long, requires = "strong_q")]
        strong_r: Option<Exponent>,
    },
    /// Minimal ρ_{∞,q} extension from a subspace.
    Extend {
        /// JSON {ambient, basis, images}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        q: Exponent,
        /// Route through the dyadic level (ambient must be uniform L_q).
        #[arg(long)]
        level: Option<u32>,
    },
    /// Marcinkiewicz–Zygmund coincidence sweep.
    MzSweep {
        /// Cell p,q,r1,r2; repeatable.
        #[arg(long = "cell", value_parser = parse_cell)]
        cells: Vec<[Exponent; 4]>,
        /// CSV file with columns p,q,r1,r2.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Runs the acceptance battery over a corpus directory.
    Verify {
        /// Corpus directory; defaults to $PQREG_CORPUS, then the shipped corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Writes the default corpus.
    Corpus {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn parse_cell(s: &str) -> Result<[Exponent; 4], String> {
    let v: Vec<Exponent> = s.split(',').map(|t| t.trim().parse::<Exponent>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected p,q,r1,r2, got `{s}`"))
}

#[derive(Deserialize)]
struct ExtendInput {
    ambient: FunctionSpace,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct GridRow {
    p: Exponent,
    q: Exponent,
    r1: Exponent,
    r2: Exponent,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn tensor_norm(name: &str, p: Option<Exponent>, q: Option<Exponent>) -> anyhow::Result<TensorNorm> {
    let need = |x: Option<Exponent>, w: &str| x.with_context(|| format!("--{w} is required for {name}"));
    Ok(match name {
        "eps" => TensorNorm::Eps,
        "pi" => TensorNorm::Pi,
        "g_p" => TensorNorm::Gp { p: need(p, "p")? },
        "d_p" => TensorNorm::Dp { p: need(p, "p")? },
        "w_p" => TensorNorm::Wp { p: need(p, "p")? },
        "phi_pq" => TensorNorm::Phi { p: need(p, "p")?, q: need(q, "q")? },
        "r_pq" => TensorNorm::Rpq { p: need(p, "p")?, q: need(q, "q")? },
        "h_pq" => TensorNorm::Hpq { p: need(p, "p")?, q: need(q, "q")? },
        "k_pq" => TensorNorm::Kpq { p: need(p, "p")?, q: need(q, "q")? },
        _ => bail!("unknown tensor norm `{name}`"),
    })
}

fn default_corpus_dir() -> PathBuf {
    std::env::var_os(CORPUS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus"))
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let start = Instant::now();
    let (name, inputs): (&str, Vec<&Path>) = match &cli.cmd {
        Cmd::Rho { operator, .. } | Cmd::Factorize { operator, .. } => {
            (if matches!(cli.cmd, Cmd::Rho { .. }) { "rho" } else { "factorize" }, vec![operator])
        }
        Cmd::TensorNorm { tensor, .. } => ("tensor-norm", vec![tensor]),
        Cmd::Extend { input, .. } => ("extend", vec![input]),
        Cmd::MzSweep { grid, .. } => ("mz-sweep", grid.iter().map(|g| g.as_path()).collect()),
        Cmd::Verify { .. } => ("verify", vec![]),
        Cmd::Corpus { dir } => ("corpus", vec![dir]),
    };
    let mut config = RunConfig::new(name, cli.seed, cli.tol);
    config.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
    config.output = cli.out.as_ref().map(|p| p.display().to_string());
    config.validate()?;
    let mut report = Report::new(config);
    let seed = cli.seed;

    match &cli.cmd {
        Cmd::Rho { operator, p, q, tuple, restarts, oracle } => {
            report.config.exponents.extend([("p".into(), *p), ("q".into(), *q)]);
            report.config.sizes.extend([("tuple".into(), *tuple), ("restarts".into(), *restarts)]);
            let t: OperatorMatrix = read_json(operator)?;
            let params = RegularityParams::new(*p, *q)?;
            let est = rho_lower_bound(&t, params, *tuple, seed, *restarts)?;
            report.push(&json!({"estimator": "ascent", "estimate": est}))?;
            if let Some(res) = oracle {
                let o = rho_oracle(&t, params, *tuple, *res)?;
                report.oracle_flags.push(format!("rho_oracle(resolution={res})"));
                if est.lower > o.upper_or_inf() * (1.0 + cli.tol) {
                    report.fail(format!("ascent lower {} exceeds oracle upper {}", est.lower, o.upper_or_inf()));
                }
                report.push(&json!({"estimator": "oracle", "estimate": o}))?;
            }
        }
        Cmd::TensorNorm { tensor, norm, p, q } => {
            let z: Tensor = read_json(tensor)?;
            let which = tensor_norm(norm, *p, *q)?;
            let b = tensor_norm_bounds(&z, which, seed)?;
            report.push(&b)?;
        }
        Cmd::Factorize { operator, p, s, constant, max_cuts, strong_q, strong_r } => {
            report.config.exponents.extend([("p".into(), *p), ("s".into(), *s)]);
            let t: OperatorMatrix = read_json(operator)?;
            let res = match (strong_q, strong_r) {
                (Some(q), Some(r)) => strong_factorize_lr(&t, *p, *q, *r, *constant, *max_cuts, seed)
                    .map(|f| (f, Some(RegularityParams::new(*p, *q)))),
                _ => maurey_rosenthal_factorize(&t, *p, *s, *constant, *max_cuts, seed).map(|f| (f, None)),
            };
            match res {
                Ok((f, params)) => {
                    let params = params.transpose()?;
                    let v = verify_factorization(&f, &t, params)?;
                    if !v.ok {
                        report.fail(format!("verification failed: {v:?}"));
                    }
                    report.push(&json!({"factorization": f, "verify": v}))?;
                }
                Err(Error::Infeasible { constant, cuts, violation, witness }) => {
                    report.fail(format!("no factorization at constant {constant}"));
                    report.push(&json!({"infeasible": {"constant": constant, "cuts": cuts, "violation": violation, "witness": witness}}))?;
                }
                Err(e) => return Err(e.into()),
            }
        }
        Cmd::Extend { input, q, level } => {
            report.config.exponents.insert("q".into(), *q);
            let inp: ExtendInput = read_json(input)?;
            let x0 = Subspace::new(inp.ambient, inp.basis.into_iter().map(LatticeVector).collect())?;
            let ext = match level {
                Some(l) => {
                    report.config.sizes.insert("level".into(), *l as usize);
                    extend_operator_lq(&x0, &inp.images, DyadicLevel::new(*l, *q)?, seed)?
                }
                None => hahn_banach_extend(&x0, &inp.images, *q, seed)?,
            };
            if ext.agreement_residual > 1e-8 {
                report.fail(format!("extension disagrees on the subspace by {}", ext.agreement_residual));
            }
            if ext.rho_after > ext.rho_before * (1.0 + 1e-2) {
                report.fail(format!("rho grew from {} to {}", ext.rho_before, ext.rho_after));
            }
            report.push(&ext)?;
        }
        Cmd::MzSweep { cells, grid, ns, samples, csv } => {
            let mut pts: Vec<(Exponent, Exponent, Exponent, Exponent)> = cells.iter().map(|c| (c[0], c[1], c[2], c[3])).collect();
            if let Some(g) = grid {
                let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(g).with_context(|| format!("reading {}", g.display()))?;
                for row in rd.deserialize::<GridRow>() {
                    let r = row.with_context(|| format!("parsing {}", g.display()))?;
                    pts.push((r.p, r.q, r.r1, r.r2));
                }
            }
            if pts.is_empty() {
                bail!("no sweep cells given (use --cell or --grid)");
            }
            report.config.sizes.insert("samples".into(), *samples);
            let out = mz_coincidence_sweep(&pts, ns, *samples, seed)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
                for c in &out {
                    w.serialize(c)?;
                }
                w.flush()?;
            }
            for c in &out {
                report.push(c)?;
            }
        }
        Cmd::Verify { corpus } => {
            let dir = corpus.clone().unwrap_or_else(default_corpus_dir);
            report.config.inputs = vec![dir.display().to_string()];
            let suite = verify_suite(&dir, seed, &mut |o| eprintln!("{}", o.line()))?;
            for o in &suite.outcomes {
                if !o.passed {
                    report.fail(format!("criterion {} failed: {:?}", o.criterion, o.failures));
                }
                report.push(o)?;
            }
        }
        Cmd::Corpus { dir } => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, entry) in default_corpus(seed) {
                let path = dir.join(&name);
                std::fs::write(&path, serde_json::to_string_pretty(&entry)?).with_context(|| format!("writing {}", path.display()))?;
                report.push(&json!({"file": name, "criterion": entry.criterion}))?;
            }
        }
    }
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let text = match report.to_json() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
        ExitCode::from(2)
    }
}
