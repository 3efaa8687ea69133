//! Maximum-entropy background model over non-negative edge weights, under
//! weighted in/out-degree priors and block-density priors, and the
//! transform from observed weights to surprisal weights.
//!
//! Each admissible cell (i, j) carries an independent geometric
//! distribution with survival Pr(mu >= l) = exp(-l * Lambda_ij), where
//! Lambda_ij = lambda_out_i + lambda_in_j + sum of multipliers of blocks
//! covering the cell, and expected value exp(-Lambda)/(1 - exp(-Lambda)).
//! Fitting minimizes the convex dual by full-gradient descent with a
//! halving (backtracking) line search; the dual's partial derivatives are
//! exactly the constraint residuals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DiGraph;
use crate::interestingness::SurprisalGraph;

/// Multiplier standing in for an infinite one: pinned on dropped
/// zero-degree constraints and zero-target blocks. exp(-40) ~= 4e-18, so
/// expectations and survivals of such cells underflow to zero while every
/// Lambda stays finite.
const PINNED_LAMBDA: f64 = 40.0;

#[derive(Debug, Error)]
pub enum BackgroundError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("prior infeasible: residual stagnated at {residual:.3e}")]
    InfeasiblePrior { residual: f64 },
    #[error("block {index}: {msg}")]
    BadBlock { index: usize, msg: String },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("cell ({i}, {j}) outside the model domain")]
    OutsideDomain { i: usize, j: usize },
    #[error("edge ({i}, {j}) outside the model domain")]
    EdgeOutsideDomain { i: usize, j: usize },
    #[error("model order {model} does not match graph order {graph}")]
    OrderMismatch { model: usize, graph: usize },
}

/// Density constraint on a set of adjacency cells, given as the product
/// rows x cols; the target is the required sum of expected weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub target: f64,
}

impl Block {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>, target: f64) -> Self {
        Block { rows, cols, target }
    }

    fn covers(&self, i: usize, j: usize) -> bool {
        self.rows.contains(&i) && self.cols.contains(&j)
    }

    fn cell_count(&self) -> usize {
        self.rows.len() * self.cols.len()
    }
}

/// What the analyst claims to know about the graph. With `degree_prior`
/// false and no blocks the model is the no-knowledge uniform-surprisal
/// mode and nothing needs fitting.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PriorSpec {
    pub degree_prior: bool,
    #[serde(default)]
    pub blocks: Vec<Block>,
}

impl PriorSpec {
    pub fn degrees() -> Self {
        PriorSpec { degree_prior: true, blocks: Vec::new() }
    }

    pub fn is_uniform(&self) -> bool {
        !self.degree_prior && self.blocks.is_empty()
    }
}

/// A fitted block: the prior constraint plus its Lagrange multiplier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub target: f64,
    pub lambda: f64,
}

impl FittedBlock {
    fn covers(&self, i: usize, j: usize) -> bool {
        self.rows.contains(&i) && self.cols.contains(&j)
    }
}

/// Fitted Lagrange multipliers defining the background distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntModel {
    pub n: usize,
    pub degree_prior: bool,
    pub lambda_out: Vec<f64>,
    pub lambda_in: Vec<f64>,
    pub blocks: Vec<FittedBlock>,
}

impl MaxEntModel {
    /// A cell is admissible when some constraint speaks about it: every
    /// cell under a degree prior, otherwise only block-covered ones.
    pub fn in_domain(&self, i: usize, j: usize) -> bool {
        if i >= self.n || j >= self.n {
            return false;
        }
        self.degree_prior || self.blocks.iter().any(|b| b.covers(i, j))
    }

    /// Total multiplier Lambda_ij of an admissible cell.
    pub fn lambda(&self, i: usize, j: usize) -> Result<f64, BackgroundError> {
        if !self.in_domain(i, j) {
            return Err(BackgroundError::OutsideDomain { i, j });
        }
        let mut lam = self.lambda_out[i] + self.lambda_in[j];
        for b in &self.blocks {
            if b.covers(i, j) {
                lam += b.lambda;
            }
        }
        Ok(lam)
    }

    /// Pr(mu(e) >= ell) = exp(-ell * Lambda_ij), in (0, 1] for ell >= 0.
    pub fn edge_survival(&self, i: usize, j: usize, ell: f64) -> Result<f64, BackgroundError> {
        assert!(ell >= 0.0, "lower bound must be non-negative");
        Ok((-ell * self.lambda(i, j)?).exp())
    }

    /// Expected weight of cell (i, j) under the model.
    pub fn expected(&self, i: usize, j: usize) -> Result<f64, BackgroundError> {
        Ok(1.0 / self.lambda(i, j)?.exp_m1())
    }

    /// Dense matrix of expected weights; inadmissible cells read as zero.
    pub fn expected_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.expected(i, j).unwrap_or(0.0)).collect())
            .collect()
    }

    /// Surprisal of observing weight at least `ell` on cell (i, j), in
    /// bits: ell * Lambda_ij / ln 2.
    pub fn surprisal(&self, i: usize, j: usize, ell: f64) -> Result<f64, BackgroundError> {
        Ok(ell * self.lambda(i, j)? / std::f64::consts::LN_2)
    }
}

/// Convergence record of a fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub iterations: usize,
    pub residual: f64,
    /// Dual objective after every accepted step, starting with the value
    /// at the initial point.
    pub dual_trace: Vec<f64>,
}

struct FitProblem<'a> {
    n: usize,
    degree_prior: bool,
    d_out: Vec<f64>,
    d_in: Vec<f64>,
    out_active: Vec<bool>,
    in_active: Vec<bool>,
    blocks: &'a [Block],
    block_active: Vec<bool>,
    admissible: Vec<Vec<bool>>,
}

/// Multiplier vector: lambda_out | lambda_in | lambda_block.
#[derive(Clone)]
struct Params {
    out: Vec<f64>,
    inc: Vec<f64>,
    block: Vec<f64>,
}

impl FitProblem<'_> {
    /// Per-cell sum of block multipliers for the current iterate.
    fn block_offsets(&self, block: &[f64]) -> Vec<Vec<f64>> {
        let mut off = vec![vec![0.0; self.n]; self.n];
        for (b, spec) in self.blocks.iter().enumerate() {
            for &i in &spec.rows {
                for &j in &spec.cols {
                    off[i][j] += block[b];
                }
            }
        }
        off
    }

    /// True iff Lambda > 0 on every admissible cell.
    fn feasible(&self, p: &Params) -> bool {
        let off = self.block_offsets(&p.block);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.admissible[i][j] && p.out[i] + p.inc[j] + off[i][j] <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Convex dual: sum over admissible cells of -ln(1 - exp(-Lambda))
    /// plus the linear constraint terms.
    fn dual(&self, p: &Params) -> f64 {
        let off = self.block_offsets(&p.block);
        let mut value = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.admissible[i][j] {
                    continue;
                }
                let lam = p.out[i] + p.inc[j] + off[i][j];
                value += -(-(-lam).exp()).ln_1p();
            }
        }
        for i in 0..self.n {
            value += p.out[i] * self.d_out[i];
            value += p.inc[i] * self.d_in[i];
        }
        for (b, spec) in self.blocks.iter().enumerate() {
            value += p.block[b] * spec.target;
        }
        value
    }

    /// dual(p - t * g) - dual(p), in compensated form. The raw dual's
    /// rounding floor (~1e-13 relative) hides the tiny true decreases of
    /// late iterations; evaluating the per-cell difference through
    /// `exp_m1`/`ln_1p` keeps them measurable. Returns +inf when the trial
    /// point leaves the Lambda > 0 region.
    fn dual_delta(&self, p: &Params, g: &Params, t: f64) -> f64 {
        let off = self.block_offsets(&p.block);
        let goff = self.block_offsets(&g.block);
        let mut delta = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.admissible[i][j] {
                    continue;
                }
                let lam = p.out[i] + p.inc[j] + off[i][j];
                let step = -t * (g.out[i] + g.inc[j] + goff[i][j]);
                if lam + step <= 0.0 {
                    return f64::INFINITY;
                }
                let x = (-lam).exp();
                delta += -(-x * (-step).exp_m1() / (1.0 - x)).ln_1p();
            }
        }
        for i in 0..self.n {
            delta -= t * (g.out[i] * self.d_out[i] + g.inc[i] * self.d_in[i]);
        }
        for (b, spec) in self.blocks.iter().enumerate() {
            delta -= t * g.block[b] * spec.target;
        }
        delta
    }

    /// Gradient over all multipliers (pinned entries zeroed) and the
    /// largest relative residual over active constraints. Each partial
    /// derivative of the dual is target minus model sum, i.e. exactly the
    /// constraint residual.
    fn gradient(&self, p: &Params) -> (Params, f64) {
        let off = self.block_offsets(&p.block);
        let mut g_out = vec![0.0; self.n];
        let mut g_in = vec![0.0; self.n];
        let mut g_block = vec![0.0; self.blocks.len()];
        let mut expected = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.admissible[i][j] {
                    continue;
                }
                let e = 1.0 / (p.out[i] + p.inc[j] + off[i][j]).exp_m1();
                expected[i][j] = e;
                g_out[i] -= e;
                g_in[j] -= e;
            }
        }
        for i in 0..self.n {
            g_out[i] += self.d_out[i];
            g_in[i] += self.d_in[i];
        }
        for (b, spec) in self.blocks.iter().enumerate() {
            let mut sum = 0.0;
            for &i in &spec.rows {
                for &j in &spec.cols {
                    sum += expected[i][j];
                }
            }
            g_block[b] = spec.target - sum;
        }

        let mut residual = 0.0f64;
        let mut fold = |active: bool, grad: &mut f64, target: f64| {
            if active {
                residual = residual.max(grad.abs() / target.abs().max(1.0));
            } else {
                *grad = 0.0;
            }
        };
        for i in 0..self.n {
            let (oa, ia) = if self.degree_prior {
                (self.out_active[i], self.in_active[i])
            } else {
                (false, false)
            };
            fold(oa, &mut g_out[i], self.d_out[i]);
            fold(ia, &mut g_in[i], self.d_in[i]);
        }
        for (b, spec) in self.blocks.iter().enumerate() {
            fold(self.block_active[b], &mut g_block[b], spec.target);
        }
        (Params { out: g_out, inc: g_in, block: g_block }, residual)
    }
}

/// Gradient of the dual at the given multipliers, one entry per prior
/// constraint in declaration order (out multipliers, in multipliers,
/// block multipliers), with pinned or inactive entries zeroed, plus the
/// largest relative constraint residual. Each partial derivative equals
/// the corresponding constraint residual, which makes this the natural
/// diagnostic for a fitted model.
pub fn dual_gradient(
    graph: &DiGraph,
    prior: &PriorSpec,
    lambda_out: &[f64],
    lambda_in: &[f64],
    lambda_block: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let problem = build_problem(graph, prior);
    let params = Params {
        out: lambda_out.to_vec(),
        inc: lambda_in.to_vec(),
        block: lambda_block.to_vec(),
    };
    let (grad, residual) = problem.gradient(&params);
    (grad.out, grad.inc, grad.block, residual)
}

/// Value of the convex dual at the given multipliers. Infinite when some
/// admissible cell has a non-positive total multiplier.
pub fn dual_objective(
    graph: &DiGraph,
    prior: &PriorSpec,
    lambda_out: &[f64],
    lambda_in: &[f64],
    lambda_block: &[f64],
) -> f64 {
    let problem = build_problem(graph, prior);
    let params = Params {
        out: lambda_out.to_vec(),
        inc: lambda_in.to_vec(),
        block: lambda_block.to_vec(),
    };
    if !problem.feasible(&params) {
        return f64::INFINITY;
    }
    problem.dual(&params)
}

fn build_problem<'a>(graph: &DiGraph, prior: &'a PriorSpec) -> FitProblem<'a> {
    let n = graph.node_count();
    let d_out: Vec<f64> = (0..n).map(|v| graph.out_strength(v)).collect();
    let d_in: Vec<f64> = (0..n).map(|v| graph.in_strength(v)).collect();
    FitProblem {
        n,
        degree_prior: prior.degree_prior,
        out_active: d_out.iter().map(|&d| prior.degree_prior && d > 0.0).collect(),
        in_active: d_in.iter().map(|&d| prior.degree_prior && d > 0.0).collect(),
        d_out,
        d_in,
        blocks: &prior.blocks,
        block_active: prior.blocks.iter().map(|b| b.target > 0.0).collect(),
        admissible: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| prior.degree_prior || prior.blocks.iter().any(|b| b.covers(i, j)))
                    .collect()
            })
            .collect(),
    }
}

/// Fits the maximum-entropy model for `graph` under `prior`. The returned
/// model's active row, column and block sums match their empirical targets
/// within `tol` (relative residual).
pub fn fit_maxent(
    graph: &DiGraph,
    prior: &PriorSpec,
    tol: f64,
    max_iters: usize,
) -> Result<MaxEntModel, BackgroundError> {
    fit_maxent_with_report(graph, prior, tol, max_iters).map(|(m, _)| m)
}

pub fn fit_maxent_with_report(
    graph: &DiGraph,
    prior: &PriorSpec,
    tol: f64,
    max_iters: usize,
) -> Result<(MaxEntModel, FitReport), BackgroundError> {
    if tol <= 0.0 {
        return Err(BackgroundError::BadTolerance(tol));
    }
    let n = graph.node_count();
    for (index, b) in prior.blocks.iter().enumerate() {
        let bad = |msg: &str| BackgroundError::BadBlock { index, msg: msg.to_string() };
        if b.rows.is_empty() || b.cols.is_empty() {
            return Err(bad("empty row or column set"));
        }
        if b.rows.iter().chain(&b.cols).any(|&v| v >= n) {
            return Err(bad("node id out of range"));
        }
        if !b.target.is_finite() || b.target < 0.0 {
            return Err(bad("target must be non-negative and finite"));
        }
        let unique = |ids: &[usize]| {
            let mut s = ids.to_vec();
            s.sort_unstable();
            s.dedup();
            s.len() == ids.len()
        };
        if !unique(&b.rows) || !unique(&b.cols) {
            return Err(bad("duplicate row or column ids"));
        }
    }

    let problem = build_problem(graph, prior);

    // Initial point: uniform degree multipliers solving the aggregate
    // weight constraint, zero for free block multipliers, pins elsewhere.
    let total = graph.total_weight().max(f64::MIN_POSITIVE);
    let cells = (n * n) as f64;
    let c = -(total / (cells + total)).ln() / 2.0;
    let mut params = Params {
        out: (0..n)
            .map(|i| match (prior.degree_prior, problem.out_active[i]) {
                (false, _) => 0.0,
                (true, true) => c,
                (true, false) => PINNED_LAMBDA,
            })
            .collect(),
        inc: (0..n)
            .map(|j| match (prior.degree_prior, problem.in_active[j]) {
                (false, _) => 0.0,
                (true, true) => c,
                (true, false) => PINNED_LAMBDA,
            })
            .collect(),
        block: prior
            .blocks
            .iter()
            .enumerate()
            .map(|(b, spec)| {
                if !problem.block_active[b] {
                    PINNED_LAMBDA
                } else if prior.degree_prior {
                    0.0
                } else {
                    // Block-only mode: match each block's own target in
                    // isolation, which keeps Lambda positive.
                    let k = spec.cell_count() as f64;
                    -(spec.target / (k + spec.target)).ln()
                }
            })
            .collect(),
    };
    debug_assert!(problem.feasible(&params));

    let mut dual = problem.dual(&params);
    let mut dual_trace = vec![dual];
    let mut step = 0.5f64;
    let mut best_residual = f64::INFINITY;
    let mut last_improvement = 0usize;

    for iter in 0..max_iters {
        let (grad, residual) = problem.gradient(&params);
        if residual <= tol {
            let model = finish_model(n, prior, &params);
            return Ok((model, FitReport { iterations: iter, residual, dual_trace }));
        }
        if residual < best_residual * (1.0 - 1e-9) {
            best_residual = residual;
            last_improvement = iter;
        } else if iter - last_improvement > 20_000 {
            // An incompatible block target leaves a positive residual the
            // dual descent cannot reduce.
            return Err(BackgroundError::InfeasiblePrior { residual });
        }

        let gnorm2: f64 = grad.out.iter().chain(&grad.inc).chain(&grad.block).map(|g| g * g).sum();
        let mut t = (step * 2.0).min(1e6);
        loop {
            let delta = problem.dual_delta(&params, &grad, t);
            if delta <= -1e-4 * t * gnorm2 {
                for (x, g) in params.out.iter_mut().zip(&grad.out) {
                    *x -= t * g;
                }
                for (x, g) in params.inc.iter_mut().zip(&grad.inc) {
                    *x -= t * g;
                }
                for (x, g) in params.block.iter_mut().zip(&grad.block) {
                    *x -= t * g;
                }
                dual += delta;
                dual_trace.push(dual);
                step = t;
                break;
            }
            t *= 0.5;
            if t < 1e-18 {
                // No descending step exists at float precision.
                return Err(BackgroundError::InfeasiblePrior { residual });
            }
        }
    }
    let (_, residual) = problem.gradient(&params);
    Err(BackgroundError::NonConvergence { iterations: max_iters, residual })
}

fn finish_model(n: usize, prior: &PriorSpec, params: &Params) -> MaxEntModel {
    MaxEntModel {
        n,
        degree_prior: prior.degree_prior,
        lambda_out: params.out.clone(),
        lambda_in: params.inc.clone(),
        blocks: prior
            .blocks
            .iter()
            .zip(&params.block)
            .map(|(spec, &lambda)| FittedBlock {
                rows: spec.rows.clone(),
                cols: spec.cols.clone(),
                target: spec.target,
                lambda,
            })
            .collect(),
    }
}

/// Surprisal weights from a fitted model: w(e) = mu(e) * Lambda_ij / ln 2,
/// the observed weight serving as the communicated lower bound.
pub fn surprisal_graph(
    graph: &DiGraph,
    model: &MaxEntModel,
) -> Result<SurprisalGraph, BackgroundError> {
    if model.n != graph.node_count() {
        return Err(BackgroundError::OrderMismatch { model: model.n, graph: graph.node_count() });
    }
    let mut edges = Vec::with_capacity(graph.edge_count());
    for e in graph.edges() {
        if !model.in_domain(e.src, e.dst) {
            return Err(BackgroundError::EdgeOutsideDomain { i: e.src, j: e.dst });
        }
        let w = model.surprisal(e.src, e.dst, e.weight)?;
        edges.push((e.src, e.dst, w));
    }
    let g = DiGraph::from_edges(graph.node_count(), edges)
        .expect("surprisal weighting of a valid graph is valid");
    Ok(SurprisalGraph::new(g))
}

/// No-knowledge mode: every edge carries one bit of surprisal.
pub fn uniform_surprisal_graph(graph: &DiGraph) -> SurprisalGraph {
    let edges: Vec<_> = graph.edges().iter().map(|e| (e.src, e.dst, 1.0)).collect();
    let g = DiGraph::from_edges(graph.node_count(), edges)
        .expect("uniform reweighting of a valid graph is valid");
    SurprisalGraph::new(g)
}
