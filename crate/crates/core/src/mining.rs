//! Iterative top-k mining: run a solver, report the cycle, zero the
//! surprisal of its edges (the user has seen them, they now carry no
//! information), and repeat on the updated landscape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::background::{surprisal_graph, uniform_surprisal_graph, BackgroundError, MaxEntModel};
use crate::graph::{Cycle, DiGraph};
use crate::interestingness::{dl, ic, interestingness, ICDLParams};
use crate::mmc::{karp_mmc, karp_variant};
use crate::steiner::{local_search, SteinerQuery};

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("top_k must be at least 1")]
    BadTopK,
    #[error("the local-scs algorithm needs a terminal query")]
    MissingQuery,
    #[error(transparent)]
    Background(#[from] BackgroundError),
}

/// Solver driving each mining iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Karp,
    KarpVariant,
    LocalScs,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Algorithm::Karp => "karp",
            Algorithm::KarpVariant => "karp-variant",
            Algorithm::LocalScs => "local-scs",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "karp" => Ok(Algorithm::Karp),
            "karp-variant" => Ok(Algorithm::KarpVariant),
            "local-scs" => Ok(Algorithm::LocalScs),
            other => Err(format!("unknown algorithm {other:?} (karp, karp-variant, local-scs)")),
        }
    }
}

/// Parameters echoed into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportParams {
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
}

/// One reported edge: observed weight, surprisal at emission time, the
/// matching survival probability, and the weight as a fraction of the
/// endpoint strengths (how the case studies annotate edges).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeReport {
    pub src: usize,
    pub dst: usize,
    pub mu: f64,
    pub w: f64,
    pub survival: f64,
    pub frac_in: f64,
    pub frac_out: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleReport {
    pub nodes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub edges: Vec<EdgeReport>,
    pub ic: f64,
    pub dl: f64,
    pub f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningReport {
    pub params: ReportParams,
    pub cycles: Vec<CycleReport>,
}

/// Runs up to `top_k` mining iterations of `algorithm` on `graph` under
/// `model` (uniform surprisal when absent). After each emitted cycle the
/// surprisal of its edges drops to zero; mining stops early when the
/// solver finds nothing or the best cycle carries no information (F <= 0).
pub fn mine_iterative(
    graph: &DiGraph,
    model: Option<&MaxEntModel>,
    p: &ICDLParams,
    algorithm: Algorithm,
    top_k: usize,
    query: Option<&SteinerQuery>,
    labels: Option<&[String]>,
) -> Result<MiningReport, MiningError> {
    if top_k == 0 {
        return Err(MiningError::BadTopK);
    }
    if algorithm == Algorithm::LocalScs && query.is_none() {
        return Err(MiningError::MissingQuery);
    }
    let mut sg = match model {
        Some(m) => surprisal_graph(graph, m)?,
        None => uniform_surprisal_graph(graph),
    };
    let seed = query.map_or(0, |q| q.seed);
    let mut report = MiningReport {
        params: ReportParams {
            q: p.q,
            alpha: p.alpha,
            beta: p.beta,
            n: p.n,
            algorithm,
            seed,
        },
        cycles: Vec::new(),
    };

    for _ in 0..top_k {
        let found: Option<(Cycle, f64)> = match algorithm {
            Algorithm::Karp => karp_mmc(&sg).map(|mc| {
                let f = interestingness(&mc.cycle, &sg, p).expect("solver cycle valid");
                (mc.cycle, f)
            }),
            Algorithm::KarpVariant => karp_variant(&sg, p).map(|vc| (vc.cycle, vc.f)),
            Algorithm::LocalScs => {
                local_search(graph, &sg, query.expect("checked above"), p).best
            }
        };
        let Some((cycle, f)) = found else {
            break;
        };
        if f <= 0.0 {
            break;
        }
        report.cycles.push(report_cycle(&cycle, graph, &sg, p, labels));
        sg.zero_cycle(&cycle);
    }
    Ok(report)
}

fn report_cycle(
    cycle: &Cycle,
    graph: &DiGraph,
    sg: &crate::interestingness::SurprisalGraph,
    p: &ICDLParams,
    labels: Option<&[String]>,
) -> CycleReport {
    let cycle = &cycle.canonical();
    let frac = |x: f64, strength: f64| if strength > 0.0 { x / strength } else { 0.0 };
    let edges: Vec<EdgeReport> = cycle
        .edges()
        .map(|(src, dst)| {
            let mu = graph.weight(src, dst).expect("cycle edge in graph");
            let w = sg.w(src, dst).expect("cycle edge in surprisal graph");
            EdgeReport {
                src,
                dst,
                mu,
                w,
                survival: 2f64.powf(-w),
                frac_in: frac(mu, graph.in_strength(dst)),
                frac_out: frac(mu, graph.out_strength(src)),
            }
        })
        .collect();
    let ic_value = ic(cycle, sg).expect("cycle valid in sg");
    CycleReport {
        nodes: cycle.nodes().to_vec(),
        labels: labels.map(|names| {
            cycle
                .nodes()
                .iter()
                .map(|&v| names.get(v).cloned().unwrap_or_else(|| v.to_string()))
                .collect()
        }),
        edges,
        ic: ic_value,
        dl: dl(cycle.len(), p),
        f: ic_value / dl(cycle.len(), p),
    }
}
