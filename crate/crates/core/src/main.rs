//! Command-line runner: verification suites, character tables, defining
//! polynomials, and single fixed-point count queries.

use clap::{Parser, Subcommand};
use std::io::Write;
use std::process::ExitCode;
use uhq::chars::canonical_psi;
use uhq::suite::{self, Config};
use uhq::sympoly::{self, PolyCtx};
use uhq::unipotent::SubgroupName;
use uhq::variety::{self, FixedPointQuery};

#[derive(Parser)]
#[command(
    name = "uhq",
    about = "exact verification workbench for higher unipotent groups",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct Params {
    /// odd prime characteristic
    #[arg(long)]
    p: u64,
    /// exponent f with q = p^f
    #[arg(long, default_value_t = 1)]
    f: usize,
    /// level (h >= 2)
    #[arg(long)]
    h: usize,
    /// seed for sampled checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// worker threads (0 = available parallelism; UHQ_WORKERS overrides)
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite and write a machine-readable report
    Verify {
        #[command(flatten)]
        params: Params,
        /// suite name from the registry
        #[arg(long, default_value = "all")]
        suite: String,
        /// output path (stdout when omitted)
        #[arg(long)]
        out: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Emit a character table as CSV
    Table {
        #[command(flatten)]
        params: Params,
        /// which table: rho-restrictions
        #[arg(long)]
        what: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Print the defining polynomials of the subscheme
    Polys {
        #[command(flatten)]
        params: Params,
    },
    /// Count fixed points of one twisted pair query; actors are given by
    /// their even coefficients as comma-separated field-element indices
    Count {
        #[command(flatten)]
        params: Params,
        #[arg(long, value_delimiter = ',')]
        g: Vec<u16>,
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<u16>,
    },
}

fn validate(params: &Params) -> Result<Config, String> {
    let p = params.p;
    if p < 3 || p % 2 == 0 || !is_prime(p) {
        return Err(format!("--p {p} is not an odd prime"));
    }
    if params.h < 2 {
        return Err("--h must be at least 2".into());
    }
    if params.f == 0 {
        return Err("--f must be at least 1".into());
    }
    let workers = std::env::var("UHQ_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(params.workers);
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .ok();
    }
    Ok(Config {
        p,
        f: params.f,
        h: params.h,
        seed: params.seed,
    })
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn write_out(out: &Option<String>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => std::io::stdout().write_all(content.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn status_str(s: suite::Status) -> &'static str {
    match s {
        suite::Status::Pass => "pass",
        suite::Status::Fail => "fail",
        suite::Status::Excluded => "excluded",
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.cmd {
        Cmd::Verify {
            params,
            suite,
            out,
            format,
        } => {
            let cfg = validate(&params)?;
            let report = suite::run_suite(&cfg, &suite).map_err(|e| e.to_string())?;
            let all_pass = report.checks.iter().all(|c| c.ok());
            let content = match format {
                Format::Json => serde_json::to_string_pretty(&report).unwrap() + "\n",
                Format::Csv => {
                    let mut s = String::from("name,ref,status\n");
                    for c in &report.checks {
                        s.push_str(&format!(
                            "{},{},{}\n",
                            c.name,
                            c.reference.replace(',', ";"),
                            status_str(c.status)
                        ));
                    }
                    s
                }
            };
            write_out(&out, &content).map_err(|e| e.to_string())?;
            for c in &report.checks {
                eprintln!("{:<28} {}", c.name, status_str(c.status));
            }
            if let Some(first) = report.checks.iter().find(|c| !c.ok()) {
                eprintln!("first failure: {} — {}", first.name, first.witness);
            }
            Ok(all_pass)
        }
        Cmd::Table { params, what, out } => {
            let cfg = validate(&params)?;
            if what != "rho-restrictions" {
                return Err(format!("unknown table {what}"));
            }
            let cc = suite::toolkit(&cfg).map_err(|e| e.to_string())?;
            let ctx = &cc.g;
            let psi = canonical_psi(ctx);
            let hsub = ctx.subgroup(SubgroupName::H).map_err(|e| e.to_string())?;
            let hels = ctx.enumerate(&hsub);
            let mut s = String::from("chi");
            for v in &hels {
                s.push_str(&format!(",s{}", ctx.uv_to_id(v)));
            }
            s.push('\n');
            for (i, chi) in cc.a_psi(&psi).iter().enumerate() {
                s.push_str(&format!("chi{i}"));
                for v in &hels {
                    let t = cc.trace_closed_form(chi, v).map_err(|e| e.to_string())?;
                    s.push_str(&format!(",{}", cc.cyc.format(&t).replace(',', ";")));
                }
                s.push('\n');
            }
            write_out(&out, &s).map_err(|e| e.to_string())?;
            Ok(true)
        }
        Cmd::Polys { params } => {
            let cfg = validate(&params)?;
            let cx = PolyCtx::new(cfg.p, cfg.f);
            for k in 1..cfg.h {
                let f2k = sympoly::f_poly(&cx, cfg.h, k);
                println!("f_{} = {}", 2 * k, cx.format(&f2k));
            }
            Ok(true)
        }
        Cmd::Count { params, g, gamma } => {
            let cfg = validate(&params)?;
            let cc = suite::toolkit(&cfg).map_err(|e| e.to_string())?;
            let ctx = &cc.g;
            let want = cfg.h - 1;
            if g.len() != want || gamma.len() != want {
                return Err(format!(
                    "--g and --gamma need {} comma-separated indices below {}",
                    want, ctx.q2
                ));
            }
            if g.iter().chain(gamma.iter()).any(|&i| i as u64 >= ctx.q2) {
                return Err(format!("coefficient index out of range 0..{}", ctx.q2));
            }
            let q = FixedPointQuery { g, gamma };
            let n = variety::count_fixed_points(ctx, &q).map_err(|e| e.to_string())?;
            println!("{}", n.count);
            for t in &n.coords {
                eprintln!(
                    "x_{:<2} {} survivors={}{}",
                    t.index,
                    if t.enumerated { "enumerated" } else { "free      " },
                    t.survivors,
                    if t.all_zero { " (forced zero)" } else { "" }
                );
            }
            Ok(true)
        }
    }
}
