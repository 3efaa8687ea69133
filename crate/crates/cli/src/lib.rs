//! Command-line front end: data ingestion, model fitting and persistence,
//! solver invocation, iterative top-k mining, and JSON/TSV reporting.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cyclemine::background::{
    fit_maxent_with_report, MaxEntModel, PriorSpec,
};
use cyclemine::graph::{load_edge_list, load_labels, IdMode, LoadedGraph};
use cyclemine::interestingness::ICDLParams;
use cyclemine::mining::{mine_iterative, Algorithm, MiningReport};
use cyclemine::oracle::{enumerate_cycles, exact_msic, gen_erdos, EnumerationBudget};
use cyclemine::steiner::SteinerQuery;
use cyclemine::SurprisalGraph;

#[derive(Parser)]
#[command(
    name = "cyclemine",
    about = "Discover subjectively interesting cycles in weighted digraphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Tsv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IdFlag {
    /// Node ids are integers as written in the file.
    Numeric,
    /// Node tokens are labels, numbered by first appearance.
    Appearance,
}

impl From<IdFlag> for IdMode {
    fn from(flag: IdFlag) -> IdMode {
        match flag {
            IdFlag::Numeric => IdMode::Numeric,
            IdFlag::Appearance => IdMode::ByAppearance,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: `src dst weight` per line, `#` comments.
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "numeric")]
    ids: IdFlag,
    /// Optional `id<TAB>label` sidecar for display names.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Fitted model JSON produced by `fit`.
    #[arg(long, conflicts_with = "uniform")]
    model: Option<PathBuf>,
    /// No-knowledge mode: one bit of surprisal per edge.
    #[arg(long)]
    uniform: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Expected probability that a random node lies on a cycle.
    #[arg(long, default_value_t = 0.01)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the maximum-entropy background model and write it as JSON.
    Fit {
        #[command(flatten)]
        graph: GraphArgs,
        /// `degrees` or a prior JSON file
        /// `{"degree_prior": bool, "blocks": [{"rows": [...], "cols": [...], "target": ...}]}`.
        #[arg(long)]
        prior: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
        /// Output path for the model JSON (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Most interesting simple cycle (unconstrained).
    Msic {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        score: ScoreArgs,
        #[arg(long, default_value = "karp")]
        algorithm: Algorithm,
        #[arg(long, value_enum, default_value = "json")]
        output: OutputFormat,
    },
    /// Most interesting Steiner cycle through the given terminals.
    Kmsic {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        score: ScoreArgs,
        /// Comma-separated terminal node ids.
        #[arg(long, value_delimiter = ',', required = true)]
        terminals: Vec<usize>,
        /// Maximum cycle length (defaults to the graph order).
        #[arg(long)]
        lmax: Option<usize>,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, value_enum, default_value = "json")]
        output: OutputFormat,
    },
    /// Iteratively mine the top-k most interesting cycles.
    Mine {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        score: ScoreArgs,
        #[arg(long, default_value = "karp")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        /// Terminals for the local-scs algorithm.
        #[arg(long, value_delimiter = ',')]
        terminals: Vec<usize>,
        #[arg(long)]
        lmax: Option<usize>,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, value_enum, default_value = "json")]
        output: OutputFormat,
    },
    /// Enumerate every simple cycle (exhaustive; small graphs only).
    Enumerate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        /// Print only the number of cycles.
        #[arg(long)]
        count_only: bool,
    },
    /// Random-instance benchmark; emits one CSV row per solver run.
    Bench {
        #[arg(long, default_value_t = 20)]
        instances: u64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        w_lo: u64,
        #[arg(long, default_value_t = 10_000)]
        w_hi: u64,
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the exhaustive solver (enumeration-bound).
        #[arg(long)]
        exact: bool,
        /// Steiner terminal count; enables the local search per instance.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 20)]
        lmax: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
    },
}

/// Parses `args` and runs the selected subcommand, writing reports to
/// `out`. Returns the process exit code: 0 on success, 1 on data errors,
/// 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), String> {
    match command {
        Command::Fit { graph, prior, tol, max_iters, output } => {
            let loaded = load_graph(&graph)?;
            let prior = parse_prior(&prior)?;
            let (model, report) = fit_maxent_with_report(&loaded.graph, &prior, tol, max_iters)
                .map_err(|e| e.to_string())?;
            eprintln!(
                "fit converged after {} iterations (residual {:.3e})",
                report.iterations, report.residual
            );
            let text = serde_json::to_string_pretty(&model).map_err(|e| e.to_string())?;
            match output {
                Some(path) => std::fs::write(path, text).map_err(|e| e.to_string())?,
                None => writeln!(out, "{text}").map_err(|e| e.to_string())?,
            }
            Ok(())
        }
        Command::Msic { graph, model, score, algorithm, output } => {
            if algorithm == Algorithm::LocalScs {
                return Err("msic runs karp or karp-variant; use kmsic for local-scs".into());
            }
            let loaded = load_graph(&graph)?;
            let params = params_for(&loaded, &score)?;
            let model = load_model(&model, &loaded)?;
            let report = mine_iterative(
                &loaded.graph,
                model.as_ref(),
                &params,
                algorithm,
                1,
                None,
                loaded.labels.as_deref(),
            )
            .map_err(|e| e.to_string())?;
            emit_report(&report, output, out)
        }
        Command::Kmsic {
            graph,
            model,
            score,
            terminals,
            lmax,
            restarts,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            let params = params_for(&loaded, &score)?;
            let model = load_model(&model, &loaded)?;
            let n = loaded.graph.node_count();
            check_terminals(&terminals, n)?;
            let query = SteinerQuery::new(terminals, lmax.unwrap_or(n), restarts, score.seed)
                .map_err(|e| e.to_string())?;
            let report = mine_iterative(
                &loaded.graph,
                model.as_ref(),
                &params,
                Algorithm::LocalScs,
                1,
                Some(&query),
                loaded.labels.as_deref(),
            )
            .map_err(|e| e.to_string())?;
            if report.cycles.is_empty() {
                eprintln!("none found");
            }
            emit_report(&report, output, out)
        }
        Command::Mine {
            graph,
            model,
            score,
            algorithm,
            top_k,
            terminals,
            lmax,
            restarts,
            output,
        } => {
            let loaded = load_graph(&graph)?;
            let params = params_for(&loaded, &score)?;
            let model = load_model(&model, &loaded)?;
            let n = loaded.graph.node_count();
            let query = if algorithm == Algorithm::LocalScs {
                check_terminals(&terminals, n)?;
                Some(
                    SteinerQuery::new(terminals, lmax.unwrap_or(n), restarts, score.seed)
                        .map_err(|e| e.to_string())?,
                )
            } else {
                None
            };
            let report = mine_iterative(
                &loaded.graph,
                model.as_ref(),
                &params,
                algorithm,
                top_k,
                query.as_ref(),
                loaded.labels.as_deref(),
            )
            .map_err(|e| e.to_string())?;
            emit_report(&report, output, out)
        }
        Command::Enumerate { graph, budget, count_only } => {
            let loaded = load_graph(&graph)?;
            let cycles = enumerate_cycles(&loaded.graph, EnumerationBudget { max_cycles: budget })
                .map_err(|e| e.to_string())?;
            if count_only {
                writeln!(out, "{}", cycles.len()).map_err(|e| e.to_string())?;
            } else {
                for c in cycles {
                    let ids: Vec<String> = c.nodes().iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{}", ids.join("\t")).map_err(|e| e.to_string())?;
                }
            }
            Ok(())
        }
        Command::Bench {
            instances,
            n,
            p,
            w_lo,
            w_hi,
            q,
            seed,
            exact,
            k,
            lmax,
            restarts,
        } => bench(instances, n, p, w_lo, w_hi, q, seed, exact, k, lmax, restarts, out),
    }
}

fn load_graph(args: &GraphArgs) -> Result<LoadedGraph, String> {
    let mut loaded = load_edge_list(&args.graph, args.ids.into()).map_err(|e| e.to_string())?;
    if let Some(path) = &args.labels {
        loaded.labels =
            Some(load_labels(path, loaded.graph.node_count()).map_err(|e| e.to_string())?);
    }
    Ok(loaded)
}

fn parse_prior(text: &str) -> Result<PriorSpec, String> {
    if text == "degrees" {
        return Ok(PriorSpec::degrees());
    }
    let body = std::fs::read_to_string(text)
        .map_err(|e| format!("cannot read prior file {text:?}: {e}"))?;
    serde_json::from_str(&body).map_err(|e| format!("bad prior file {text:?}: {e}"))
}

fn params_for(loaded: &LoadedGraph, score: &ScoreArgs) -> Result<ICDLParams, String> {
    ICDLParams::from_q(score.q, loaded.graph.node_count()).map_err(|e| e.to_string())
}

fn load_model(args: &ModelArgs, loaded: &LoadedGraph) -> Result<Option<MaxEntModel>, String> {
    match &args.model {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read model {path:?}: {e}"))?;
            let model: MaxEntModel =
                serde_json::from_str(&body).map_err(|e| format!("bad model {path:?}: {e}"))?;
            if model.n != loaded.graph.node_count() {
                return Err(format!(
                    "model order {} does not match graph order {}",
                    model.n,
                    loaded.graph.node_count()
                ));
            }
            Ok(Some(model))
        }
        None => Ok(None), // uniform mode, with or without the explicit flag
    }
}

fn check_terminals(terminals: &[usize], n: usize) -> Result<(), String> {
    match terminals.iter().find(|&&t| t >= n) {
        Some(t) => Err(format!("terminal {t} out of range (n = {n})")),
        None => Ok(()),
    }
}

fn emit_report(
    report: &MiningReport,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), String> {
    match format {
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
            writeln!(out, "{text}").map_err(|e| e.to_string())
        }
        OutputFormat::Tsv => {
            for entry in &report.cycles {
                let nodes: Vec<String> = match &entry.labels {
                    Some(labels) => labels.clone(),
                    None => entry.nodes.iter().map(|v| v.to_string()).collect(),
                };
                writeln!(
                    out,
                    "{:.6}\t{}\t{:.6}\t{:.6}\t{}",
                    entry.f,
                    entry.nodes.len(),
                    entry.ic,
                    entry.dl,
                    nodes.join(",")
                )
                .map_err(|e| e.to_string())?;
            }
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn bench(
    instances: u64,
    n: usize,
    p: f64,
    w_lo: u64,
    w_hi: u64,
    q: f64,
    seed: u64,
    exact: bool,
    k: Option<usize>,
    lmax: usize,
    restarts: usize,
    out: &mut dyn Write,
) -> Result<(), String> {
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("edge probability {p} out of range"));
    }
    if w_lo > w_hi {
        return Err("empty weight range".into());
    }
    let params = ICDLParams::from_q(q, n).map_err(|e| e.to_string())?;
    writeln!(out, "seed,algorithm,f,cycle_length,runtime_ms").map_err(|e| e.to_string())?;
    let row = |seed: u64,
                   name: &str,
                   result: Option<(usize, f64)>,
                   elapsed_ms: f64,
                   out: &mut dyn Write|
     -> Result<(), String> {
        let (len, f) = result.map_or((0, 0.0), |(len, f)| (len, f));
        writeln!(out, "{seed},{name},{f:.9},{len},{elapsed_ms:.3}").map_err(|e| e.to_string())
    };
    for i in 0..instances {
        let inst_seed = seed + i;
        let graph = gen_erdos(n, p, w_lo, w_hi, inst_seed);
        let sg = SurprisalGraph::new(graph.clone());

        let t = Instant::now();
        let karp = cyclemine::mmc::karp_mmc(&sg).map(|mc| {
            let f = cyclemine::interestingness::interestingness(&mc.cycle, &sg, &params)
                .expect("karp cycle valid");
            (mc.cycle.len(), f)
        });
        row(inst_seed, "karp", karp, ms(t), out)?;

        let t = Instant::now();
        let variant =
            cyclemine::mmc::karp_variant(&sg, &params).map(|vc| (vc.cycle.len(), vc.f));
        row(inst_seed, "karp-variant", variant, ms(t), out)?;

        if let Some(k) = k {
            let terminals = random_terminals(n, k, inst_seed);
            let query = SteinerQuery::new(terminals, lmax, restarts, inst_seed)
                .map_err(|e| e.to_string())?;
            let t = Instant::now();
            let local = cyclemine::steiner::local_search(&graph, &sg, &query, &params)
                .best
                .map(|(c, f)| (c.len(), f));
            row(inst_seed, "local-scs", local, ms(t), out)?;
        }

        if exact {
            let t = Instant::now();
            let best = exact_msic(&sg, &params, EnumerationBudget::default())
                .map_err(|e| e.to_string())?
                .map(|(c, f)| (c.len(), f));
            row(inst_seed, "exact", best, ms(t), out)?;
        }
    }
    Ok(())
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// First k node ids of a seeded shuffle; deterministic per instance.
fn random_terminals(n: usize, k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xB5AD_4ECE_DA1C_E2A9);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    ids.truncate(k.min(n));
    ids
}
