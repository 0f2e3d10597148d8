//! Closed-form depth-1 EQC Q-values.
//!
//! For the last tour node `u` (mixer off) and an available candidate `v`,
//!
//! ```text
//! Q(v) = ε_uv · sin(πβ) · sin(2γ ε_uv) · Π_{k ≠ u, k ≠ v} cos(2γ ε_vk)
//! ```
//!
//! The factor 2 in the trigonometric arguments comes from writing each edge
//! term `exp(-iγ ε Z Z)` as `RZZ(2γε)`. The product runs over every other
//! neighbour of `v`, whether it is still available or not.

use std::f64::consts::PI;

use rand::Rng;

use crate::agent::{rollout_with, QValues, MASK_VALUE};
use crate::error::{Error, Result};
use crate::graph::{AnnotatedGraph, Tour, WeightedGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticExpectation {
    pub value: f64,
    pub weight: f64,
    pub mixer: f64,
    pub edge: f64,
    /// One `cos(2γ ε_vk)` factor per other neighbour `k`, in ascending `k`.
    pub cosines: Vec<f64>,
}

pub fn depth1_expectation(
    g: &AnnotatedGraph<'_>,
    last: usize,
    v: usize,
    beta: f64,
    gamma: f64,
) -> Result<AnalyticExpectation> {
    let graph = g.graph();
    let n = graph.n();
    if last >= n || v >= n || last == v {
        return Err(Error::InvalidArgument(format!("bad node pair ({last}, {v})")));
    }
    if !g.is_available(v) {
        return Err(Error::InvalidArgument(format!("node {v} is not available")));
    }
    let weight = graph.weight(last, v);
    let mixer = (PI * beta).sin();
    let edge = (2.0 * gamma * weight).sin();
    let cosines: Vec<f64> = (0..n)
        .filter(|&k| k != last && k != v)
        .map(|k| (2.0 * gamma * graph.weight(v, k)).cos())
        .collect();
    let value = weight * mixer * edge * cosines.iter().product::<f64>();
    Ok(AnalyticExpectation {
        value,
        weight,
        mixer,
        edge,
        cosines,
    })
}

/// `∂Q(v)/∂β` of the closed form.
pub fn depth1_beta_derivative(g: &AnnotatedGraph<'_>, last: usize, v: usize, beta: f64, gamma: f64) -> Result<f64> {
    let e = depth1_expectation(g, last, v, beta, gamma)?;
    Ok(e.weight * PI * (PI * beta).cos() * e.edge * e.cosines.iter().product::<f64>())
}

pub fn depth1_q_values(g: &AnnotatedGraph<'_>, last: usize, beta: f64, gamma: f64) -> Result<QValues> {
    let n = g.graph().n();
    if g.n_available() == 0 {
        return Err(Error::EpisodeComplete);
    }
    let mut values = vec![MASK_VALUE; n];
    for v in g.available() {
        values[v] = depth1_expectation(g, last, v, beta, gamma)?.value;
    }
    Ok(QValues::new(values, (0..n).map(|v| g.is_available(v)).collect()))
}

/// Greedy node selection from node 0 driven by the closed form alone.
pub fn depth1_greedy_tour(g: &WeightedGraph, beta: f64, gamma: f64) -> Result<Tour> {
    depth1_greedy_tour_from(g, 0, beta, gamma)
}

pub fn depth1_greedy_tour_from(g: &WeightedGraph, start: usize, beta: f64, gamma: f64) -> Result<Tour> {
    // Greedy selection never draws from the rng.
    let mut rng = NoRng;
    rollout_with(g, start, 0.0, &mut rng, |ag, last| depth1_q_values(ag, last, beta, gamma)).map(|ep| ep.tour)
}

struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("greedy rollout drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("greedy rollout drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("greedy rollout drew a random number")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("greedy rollout drew a random number")
    }
}

/// Largest `|simulated − closed form|` Q-value over random tour prefixes.
pub fn max_deviation_sweep<R: Rng + ?Sized>(graphs: &[WeightedGraph], trials: usize, rng: &mut R) -> Result<f64> {
    use crate::ansatz::build_eqc;
    use crate::agent::q_values;
    use rand::seq::SliceRandom;

    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let g = &graphs[t % graphs.len()];
        let n = g.n();
        let mut nodes: Vec<usize> = (1..n).collect();
        nodes.shuffle(rng);
        let len = rng.gen_range(1..n);
        let mut partial = vec![0];
        partial.extend_from_slice(&nodes[..len - 1]);
        let ag = AnnotatedGraph::from_partial_tour(g, &partial)?;
        let last = *partial.last().expect("non-empty");
        let beta = rng.gen_range(-2.0..2.0);
        let gamma = rng.gen_range(-PI..PI);
        let sim = q_values(&build_eqc(&ag, 1), &[gamma, beta], &ag, last)?;
        let closed = depth1_q_values(&ag, last, beta, gamma)?;
        for v in ag.available() {
            worst = worst.max((sim.values()[v] - closed.values()[v]).abs());
        }
    }
    Ok(worst)
}
