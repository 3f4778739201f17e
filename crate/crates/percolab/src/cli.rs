//! Command-line dispatch.
//!
//! Exit codes: 0 success, 1 a verification found a counterexample where a
//! pass was expected, 2 usage or domain errors. Every output embeds the
//! fully-resolved configuration, so runs are self-describing, and identical
//! argv (including seeds) produces byte-identical output.

use crate::engine::{Domain, Rule};
use crate::error::{Error, Result};
use crate::graph::{make_graph, GraphSpec};
use crate::lab;
use crate::local;
use crate::verify;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "percolab", version, about = "bootstrap percolation laboratory on implicit high-dimensional graphs")]
struct Cli {
    /// Worker threads for trial fan-out (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GraphArg {
    /// Graph family, e.g. hypercube:n=10, permutahedron:n=4, stars:n=10,q=2,
    /// product:q3^4, middlelayers:k=3
    #[arg(long)]
    graph: String,
}

#[derive(Args, Debug)]
struct RuleArg {
    /// Infection rule: majority, rneib:r=3, boot:k=3,gscale=1.0
    #[arg(long, default_value = "majority")]
    rule: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one seeded closure and export the round-by-round trace as JSON
    Simulate {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        rule: RuleArg,
        /// Initial infection probability
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Round budget (default: vertex count + 1)
        #[arg(long)]
        max_rounds: Option<u32>,
    },
    /// Coupled percolation-probability sweep over a probability grid
    Sweep {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        rule: RuleArg,
        /// Grid as start:end:count, e.g. 0:1:21
        #[arg(long)]
        pgrid: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output format: csv (default) or json
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Bracket the critical probability by coupled bisection (JSON)
    Pc {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Estimate Pr[x in A_t] from trials over the ball B(x, t) only (JSON)
    Localprob {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        rule: RuleArg,
        /// Vertex word, or `root`
        #[arg(long, default_value = "root")]
        vertex: String,
        /// Star products: use the canonical vertex of this layer instead
        #[arg(long)]
        layer: Option<u32>,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Check structural properties, reporting counterexamples (JSON).
    /// Exits 1 when a counterexample is found.
    Verify {
        #[command(flatten)]
        graph: GraphArg,
        /// Property: P1, P2, P3i..P3v, P4, P5, P6, or `all`, or a
        /// comma-separated list
        #[arg(long)]
        prop: String,
        /// The family constant K
        #[arg(long = "K", default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 2)]
        lmax: u32,
        /// Root scope: `exhaustive` or `sample:<count>:seed=<seed>`
        /// (default: exhaustive up to 4096 vertices, else sample:100:seed=1)
        #[arg(long)]
        roots: Option<String>,
    },
    /// All-pairs BFS vs inversion-vector distance on the permutahedron
    /// (JSON). Exits 1 on a mismatch.
    Isometry {
        #[arg(long)]
        n: u32,
    },
    /// Layer structure of the star product; optionally run the
    /// deterministic bottom-layers percolation (JSON)
    Starlayers {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        q: u32,
        /// Seed the layers 0..=i1 and confirm the majority closure fills
        /// the graph
        #[arg(long, default_value_t = false)]
        deterministic: bool,
    },
}

/// Parse argv and run. Returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own usage text; keep its choice of stream
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(workers) = cli.workers {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            file.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                file.write_all(b"\n")?;
            }
        }
        None => println!("{}", text.trim_end_matches('\n')),
    }
    Ok(())
}

fn json_output(config: Value, report: Value) -> String {
    serde_json::to_string_pretty(&json!({ "config": config, "report": report }))
        .expect("report serialisation cannot fail")
}

fn build_domain(graph: &GraphArg) -> Result<std::sync::Arc<Domain>> {
    let spec = GraphSpec::parse(&graph.graph)?;
    let handle = make_graph(spec)?;
    Domain::build(&handle)
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate { graph, rule, p, seed, max_rounds } => {
            let domain = build_domain(graph)?;
            let rule = Rule::parse(&rule.rule)?;
            let budget = max_rounds.unwrap_or(domain.len() as u32 + 1);
            let report = lab::simulate(&domain, *p, &rule, *seed, budget)?;
            let config = json!({
                "subcommand": "simulate",
                "graph": domain.handle().spec_string(),
                "rule": rule.to_string(),
                "p": p,
                "seed": seed,
                "max_rounds": budget,
            });
            emit(&cli.out, &json_output(config, serde_json::to_value(&report).unwrap()))?;
            Ok(0)
        }
        Command::Sweep { graph, rule, pgrid, trials, seed, format } => {
            let domain = build_domain(graph)?;
            let rule = Rule::parse(&rule.rule)?;
            let grid = lab::parse_grid(pgrid)?;
            let estimates = lab::sweep(&domain, &rule, &grid, *trials, *seed)?;
            match format.as_str() {
                "csv" => {
                    let config_lines = vec![
                        format!("subcommand=sweep graph={} rule={rule} pgrid={pgrid} trials={trials} seed={seed}",
                            domain.handle().spec_string()),
                        "logs=natural coupled_sampling=on".to_string(),
                    ];
                    let mut buf = Vec::new();
                    lab::write_sweep_csv(&mut buf, &estimates, &config_lines)?;
                    emit(&cli.out, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
                }
                "json" => {
                    let config = json!({
                        "subcommand": "sweep",
                        "graph": domain.handle().spec_string(),
                        "rule": rule.to_string(),
                        "pgrid": pgrid,
                        "trials": trials,
                        "seed": seed,
                    });
                    emit(&cli.out, &json_output(config, serde_json::to_value(&estimates).unwrap()))?;
                }
                other => {
                    return Err(Error::DomainError(format!("unknown format `{other}`")));
                }
            }
            Ok(0)
        }
        Command::Pc { graph, rule, trials, tol, seed } => {
            let domain = build_domain(graph)?;
            let rule = Rule::parse(&rule.rule)?;
            let estimate = lab::find_pc(&domain, &rule, *trials, *tol, *seed)?;
            let config = json!({
                "subcommand": "pc",
                "graph": domain.handle().spec_string(),
                "rule": rule.to_string(),
                "trials": trials,
                "tol": tol,
                "seed": seed,
            });
            emit(&cli.out, &json_output(config, serde_json::to_value(&estimate).unwrap()))?;
            Ok(0)
        }
        Command::Localprob { graph, rule, vertex, layer, t, p, trials, seed } => {
            let spec = GraphSpec::parse(&graph.graph)?;
            let handle = make_graph(spec)?;
            let rule = Rule::parse(&rule.rule)?;
            let x = match layer {
                Some(i) => handle.star_layer_vertex(*i)?,
                None => handle.parse_vertex(vertex)?,
            };
            let estimate = local::local_round_prob(&handle, x, *t, *p, &rule, *trials, *seed)?;
            let config = json!({
                "subcommand": "localprob",
                "graph": handle.spec_string(),
                "rule": rule.to_string(),
                "vertex": handle.format_vertex(x),
                "t": t,
                "p": p,
                "trials": trials,
                "seed": seed,
            });
            emit(&cli.out, &json_output(config, serde_json::to_value(&estimate).unwrap()))?;
            Ok(0)
        }
        Command::Verify { graph, prop, k, lmax, roots } => {
            let spec = GraphSpec::parse(&graph.graph)?;
            let handle = make_graph(spec)?;
            let scope = match roots {
                Some(text) => verify::RootScope::parse(text)?,
                None => verify::RootScope::auto(&handle),
            };
            let properties: Vec<verify::PropertyId> = if prop == "all" {
                verify::PropertyId::ALL.to_vec()
            } else {
                prop.split(',')
                    .map(verify::PropertyId::parse)
                    .collect::<Result<_>>()?
            };
            let reports = verify::verify_properties(&handle, &properties, *k, *lmax, scope)?;
            let all_pass = reports.iter().all(|r| r.verdict);
            let config = json!({
                "subcommand": "verify",
                "graph": handle.spec_string(),
                "prop": prop,
                "K": k,
                "lmax": lmax,
                "roots": scope.to_string(),
            });
            emit(&cli.out, &json_output(config, serde_json::to_value(&reports).unwrap()))?;
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Isometry { n } => {
            let report = verify::verify_permutahedron_isometry(*n)?;
            let config = json!({ "subcommand": "isometry", "n": n });
            let pass = report.verdict;
            emit(&cli.out, &json_output(config, serde_json::to_value(&report).unwrap()))?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Starlayers { n, q, deterministic } => {
            let report = lab::star_layer_report(*n, *q, *deterministic)?;
            let config = json!({
                "subcommand": "starlayers",
                "n": n,
                "q": q,
                "deterministic": deterministic,
            });
            emit(&cli.out, &json_output(config, serde_json::to_value(&report).unwrap()))?;
            Ok(0)
        }
    }
}
