//! QAOA reference solver on the standard one-hot TSP encoding.
//!
//! City 0 is pinned at time 0 (and, cyclically, time `n`), leaving binary
//! variables `x_{c,t}` for cities and times `1..n`, stored at flat index
//! `(c - 1)(n - 1) + (t - 1)`. The objective is
//!
//! ```text
//! Σ_t Σ_{i≠j} (ε_ij / W) x_{i,t} x_{j,t+1}
//!   + P Σ_c (1 - Σ_t x_{c,t})² + P Σ_t (1 - Σ_c x_{c,t})²
//! ```
//!
//! with `W` the largest edge weight and `P` the penalty weight. Variable `k`
//! is qubit `k`, so bit `k` of a basis index is `x_k`.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::path::Path;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{tour_cost, Tour, WeightedGraph};
use crate::simulator::{Gate, Statevector};

/// Largest register the QAOA baseline simulates (five cities).
pub const MAX_QAOA_QUBITS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    n_cities: usize,
    normalizer: f64,
    penalty: f64,
    constant: f64,
    linear: Vec<f64>,
    /// Symmetric; `quadratic[a * n_vars + b]` multiplies `x_a x_b` once for `a < b`.
    quadratic: Vec<f64>,
}

impl QuboProblem {
    pub fn new(g: &WeightedGraph, penalty: f64) -> Result<Self> {
        let n = g.n();
        if n < 3 {
            return Err(Error::InvalidArgument(format!("QUBO needs n >= 3, got {n}")));
        }
        if !(penalty.is_finite() && penalty >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad penalty weight {penalty}")));
        }
        let m = n - 1;
        let nv = m * m;
        let w = g.max_weight();
        let mut q = QuboProblem {
            n_cities: n,
            normalizer: w,
            penalty,
            constant: 0.0,
            linear: vec![0.0; nv],
            quadratic: vec![0.0; nv * nv],
        };

        for c in 1..n {
            let (first, last) = (q.var(c, 1), q.var(c, m));
            q.linear[first] += g.weight(0, c) / w;
            q.linear[last] += g.weight(c, 0) / w;
        }
        for t in 1..m {
            for i in 1..n {
                for j in 1..n {
                    if i != j {
                        q.add_pair(q.var(i, t), q.var(j, t + 1), g.weight(i, j) / w);
                    }
                }
            }
        }

        // (1 - Σ x)² = 1 - Σ x + 2 Σ_{a<b} x_a x_b on binaries.
        let groups = (1..n)
            .map(|c| (1..n).map(|t| q.var(c, t)).collect::<Vec<_>>())
            .chain((1..n).map(|t| (1..n).map(|c| q.var(c, t)).collect::<Vec<_>>()))
            .collect::<Vec<_>>();
        for vars in groups {
            q.constant += penalty;
            for (k, &a) in vars.iter().enumerate() {
                q.linear[a] -= penalty;
                for &b in &vars[k + 1..] {
                    q.add_pair(a, b, 2.0 * penalty);
                }
            }
        }
        Ok(q)
    }

    fn add_pair(&mut self, a: usize, b: usize, c: f64) {
        let nv = self.n_vars();
        self.quadratic[a * nv + b] += c;
        self.quadratic[b * nv + a] += c;
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }

    pub fn n_vars(&self) -> usize {
        (self.n_cities - 1) * (self.n_cities - 1)
    }

    /// `W`, the largest edge weight.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self, a: usize, b: usize) -> f64 {
        self.quadratic[a * self.n_vars() + b]
    }

    /// Flat index of "city `c` at time `t`", both in `1..n`.
    pub fn var(&self, city: usize, time: usize) -> usize {
        debug_assert!((1..self.n_cities).contains(&city) && (1..self.n_cities).contains(&time));
        (city - 1) * (self.n_cities - 1) + (time - 1)
    }

    /// Objective of an assignment given as bits of `x`.
    pub fn objective(&self, x: u64) -> f64 {
        let nv = self.n_vars();
        let mut total = self.constant;
        for a in (0..nv).filter(|&a| x >> a & 1 == 1) {
            total += self.linear[a];
            for b in (a + 1..nv).filter(|&b| x >> b & 1 == 1) {
                total += self.quadratic[a * nv + b];
            }
        }
        total
    }

    /// One-hot assignment of `tour`, after rotating it to start at city 0.
    pub fn encode(&self, tour: &Tour) -> Result<u64> {
        if tour.len() != self.n_cities {
            return Err(Error::InvalidArgument(format!(
                "tour has {} nodes, problem has {}",
                tour.len(),
                self.n_cities
            )));
        }
        let t = tour.rotated_to(0);
        Ok(t.order()[1..]
            .iter()
            .enumerate()
            .fold(0u64, |x, (k, &c)| x | 1 << self.var(c, k + 1)))
    }

    /// The tour encoded by `x`, or `None` unless every city and time is one-hot.
    pub fn decode(&self, x: u64) -> Option<Tour> {
        let n = self.n_cities;
        if self.n_vars() < 64 && x >> self.n_vars() != 0 {
            return None;
        }
        let mut order = vec![0usize; n];
        let mut city_seen = vec![false; n];
        for t in 1..n {
            let mut found = None;
            for c in 1..n {
                if x >> self.var(c, t) & 1 == 1 {
                    if found.is_some() || city_seen[c] {
                        return None;
                    }
                    found = Some(c);
                }
            }
            let c = found?;
            city_seen[c] = true;
            order[t] = c;
        }
        Tour::new(order).ok()
    }

    /// Objective value of every basis state.
    pub fn cost_diagonal(&self) -> Result<Vec<f64>> {
        let nv = self.n_vars();
        if nv > MAX_QAOA_QUBITS {
            return Err(Error::Capacity {
                what: "QAOA qubit count",
                got: nv,
                limit: MAX_QAOA_QUBITS,
            });
        }
        Ok((0..1u64 << nv).into_par_iter().map(|x| self.objective(x)).collect())
    }
}

/// A QUBO with its precomputed cost diagonal.
#[derive(Clone, Debug)]
pub struct QaoaCircuit {
    pub problem: QuboProblem,
    diagonal: Vec<f64>,
}

/// Angles `γ_1..γ_p`, `β_1..β_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn zeros(p: usize) -> Self {
        Self {
            gammas: vec![0.0; p],
            betas: vec![0.0; p],
        }
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    /// Appends a `(γ, β) = (0, 0)` layer.
    pub fn extended(&self) -> Self {
        let mut next = self.clone();
        next.gammas.push(0.0);
        next.betas.push(0.0);
        next
    }

    fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    fn from_flat(v: &[f64]) -> Self {
        let p = v.len() / 2;
        Self {
            gammas: v[..p].to_vec(),
            betas: v[p..].to_vec(),
        }
    }

    /// One `gamma beta` line per layer.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# gamma beta\n");
        for (g, b) in self.gammas.iter().zip(&self.betas) {
            let _ = writeln!(out, "{g:?} {b:?}");
        }
        out
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let mut p = QaoaParams::zeros(0);
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(source, no + 1, format!("bad number in {line:?}")))?;
            let [g, b] = vals[..] else {
                return Err(Error::parse(source, no + 1, "expected `gamma beta`"));
            };
            p.gammas.push(g);
            p.betas.push(b);
        }
        if p.depth() == 0 {
            return Err(Error::parse(source, 0, "no layers"));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

impl QaoaCircuit {
    pub fn new(problem: QuboProblem) -> Result<Self> {
        let diagonal = problem.cost_diagonal()?;
        Ok(Self { problem, diagonal })
    }

    pub fn for_graph(g: &WeightedGraph, penalty: f64) -> Result<Self> {
        Self::new(QuboProblem::new(g, penalty)?)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `Π_l e^{-iβ_l Σ X} e^{-iγ_l C} H^{⊗m} |0⟩`.
    pub fn state(&self, params: &QaoaParams) -> Result<Statevector> {
        if params.gammas.len() != params.betas.len() {
            return Err(Error::InvalidArgument("need one beta per gamma".into()));
        }
        let nv = self.problem.n_vars();
        let mut psi = Statevector::uniform(nv)?;
        for (&g, &b) in params.gammas.iter().zip(&params.betas) {
            psi.apply_diagonal_phase(&self.diagonal, g)?;
            for q in 0..nv {
                psi.apply_gate(&Gate::Rx(q, 2.0 * b))?;
            }
        }
        Ok(psi)
    }

    pub fn expected_cost(&self, params: &QaoaParams) -> Result<f64> {
        self.state(params)?.expectation_diagonal(&self.diagonal)
    }

    /// Walks outcomes by decreasing probability (ties to the lower index)
    /// and returns the cheapest of the first `top_k` feasible tours with
    /// nonzero probability.
    pub fn best_feasible(&self, state: &Statevector, top_k: usize) -> Option<Tour> {
        let probs = state.probabilities();
        let mut idx: Vec<usize> = (0..probs.len()).collect();
        idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take_while(|&x| probs[x] > 0.0)
            .filter_map(|x| self.problem.decode(x as u64).map(|t| (x, t)))
            .take(top_k.max(1))
            .min_by(|(a, _), (b, _)| self.diagonal[*a].total_cmp(&self.diagonal[*b]))
            .map(|(_, t)| t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QaoaSettings {
    /// Random-search samples for the first layer.
    pub budget: usize,
    /// Objective evaluations allowed per local optimization.
    pub max_evals: usize,
    /// Initial simplex edge.
    pub simplex_step: f64,
    pub top_k: usize,
    pub penalty: f64,
    pub threads: usize,
}

impl Default for QaoaSettings {
    fn default() -> Self {
        Self {
            budget: 500,
            max_evals: 500,
            simplex_step: 0.1,
            top_k: 1,
            penalty: 1.0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerResult {
    pub params: QaoaParams,
    pub expected_cost: f64,
    /// Expected cost at the starting point of this layer's search.
    pub initial_cost: f64,
    pub evaluations: usize,
    pub tour: Option<Tour>,
    pub ratio: Option<f64>,
}

/// Best of `budget` uniform draws from `[0, 2π]²` for a single layer.
pub fn random_search<R: Rng + ?Sized>(
    circ: &QaoaCircuit,
    budget: usize,
    rng: &mut R,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(QaoaParams, f64)> {
    let tau = std::f64::consts::TAU;
    let candidates: Vec<QaoaParams> = (0..budget.max(1))
        .map(|_| QaoaParams {
            gammas: vec![rng.gen_range(0.0..tau)],
            betas: vec![rng.gen_range(0.0..tau)],
        })
        .collect();
    let eval = |c: &QaoaParams| circ.expected_cost(c);
    let costs: Vec<Result<f64>> = match pool {
        Some(pool) => pool.install(|| candidates.par_iter().map(eval).collect()),
        None => candidates.iter().map(eval).collect(),
    };
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in costs.into_iter().enumerate() {
        let c = c?;
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((k, c));
        }
    }
    let (k, c) = best.expect("non-empty");
    Ok((candidates[k].clone(), c))
}

/// Budgeted objective with a record of the best point seen.
struct Objective<'a> {
    circ: &'a QaoaCircuit,
    max_evals: usize,
    log: RefCell<EvalLog>,
}

struct EvalLog {
    evals: usize,
    best: Option<(Vec<f64>, f64)>,
    error: Option<Error>,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let mut log = self.log.borrow_mut();
        if log.evals >= self.max_evals {
            return Err(argmin::core::Error::msg("evaluation budget exhausted"));
        }
        log.evals += 1;
        match self.circ.expected_cost(&QaoaParams::from_flat(x)) {
            Ok(c) => {
                if log.best.as_ref().is_none_or(|(_, b)| c < *b) {
                    log.best = Some((x.clone(), c));
                }
                Ok(c)
            }
            Err(e) => {
                let msg = e.to_string();
                log.error = Some(e);
                Err(argmin::core::Error::msg(msg))
            }
        }
    }
}

/// Nelder-Mead from `init` within `max_evals` objective evaluations,
/// restarting from the incumbent while budget remains. Returns the best
/// point seen and the evaluation count.
pub fn local_optimize(
    circ: &QaoaCircuit,
    init: &QaoaParams,
    max_evals: usize,
    simplex_step: f64,
) -> Result<(QaoaParams, f64, usize)> {
    let objective = Objective {
        circ,
        max_evals,
        log: RefCell::new(EvalLog {
            evals: 0,
            best: None,
            error: None,
        }),
    };
    let mut start = init.to_flat();
    loop {
        let before = objective.log.borrow().best.as_ref().map(|(_, c)| *c);
        let mut simplex = vec![start.clone()];
        for k in 0..start.len() {
            let mut v = start.clone();
            v[k] += simplex_step;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-10)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        // The only error sources are the budget and the objective itself.
        let _ = Executor::new(&objective, solver)
            .configure(|s| s.max_iters(max_evals as u64))
            .run();
        let log = objective.log.borrow();
        if let Some(e) = &log.error {
            return Err(Error::Validation(format!("QAOA objective failed: {e}")));
        }
        let (best, cost) = log.best.clone().expect("at least one evaluation");
        let improved = before.is_none_or(|b| cost < b - 1e-12);
        if log.evals + start.len() + 1 > max_evals || !improved {
            return Ok((QaoaParams::from_flat(&best), cost, log.evals));
        }
        start = best;
    }
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        (**self).cost(x)
    }
}

fn ratio_of(g: &WeightedGraph, tour: &Option<Tour>, optimal_cost: Option<f64>) -> Result<Option<f64>> {
    match (tour, optimal_cost) {
        (Some(t), Some(opt)) => Ok(Some(tour_cost(g, t)? / opt)),
        _ => Ok(None),
    }
}

/// Random search at depth 1, then for each deeper layer a zero-extended
/// start refined by [`local_optimize`]. One result per depth `1..=p_max`.
pub fn optimize_layerwise<R: Rng + ?Sized>(
    g: &WeightedGraph,
    optimal_cost: Option<f64>,
    p_max: usize,
    settings: &QaoaSettings,
    rng: &mut R,
) -> Result<Vec<LayerResult>> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let circ = QaoaCircuit::for_graph(g, settings.penalty)?;
    let pool = if settings.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(settings.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut results: Vec<LayerResult> = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let (params, cost, initial_cost, evaluations) = if p == 1 {
            let (params, cost) = random_search(&circ, settings.budget, rng, pool.as_ref())?;
            (params, cost, cost, settings.budget.max(1))
        } else {
            let init = results[p - 2].params.extended();
            let initial = circ.expected_cost(&init)?;
            let (params, cost, evals) = local_optimize(&circ, &init, settings.max_evals, settings.simplex_step)?;
            (params, cost, initial, evals)
        };
        let tour = circ.best_feasible(&circ.state(&params)?, settings.top_k);
        let ratio = ratio_of(g, &tour, optimal_cost)?;
        results.push(LayerResult {
            params,
            expected_cost: cost,
            initial_cost,
            evaluations,
            tour,
            ratio,
        });
    }
    Ok(results)
}

/// Applies fixed angles without optimization.
pub fn evaluate_fixed(
    g: &WeightedGraph,
    optimal_cost: Option<f64>,
    params: &QaoaParams,
    settings: &QaoaSettings,
) -> Result<LayerResult> {
    let circ = QaoaCircuit::for_graph(g, settings.penalty)?;
    let cost = circ.expected_cost(params)?;
    let tour = circ.best_feasible(&circ.state(params)?, settings.top_k);
    let ratio = ratio_of(g, &tour, optimal_cost)?;
    Ok(LayerResult {
        params: params.clone(),
        expected_cost: cost,
        initial_cost: cost,
        evaluations: 1,
        tour,
        ratio,
    })
}
