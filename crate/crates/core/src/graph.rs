//! TSP instances on complete Euclidean graphs, tours, costs and rewards.
//!
//! Instance files hold one instance per line:
//!
//! ```text
//! x1 y1 x2 y2 ... xn yn | i1 i2 ... in
//! ```
//!
//! The `| ...` tour suffix is optional. The reader also accepts the
//! `output` separator, 1-based indices and a trailing repeat of the start
//! node, as found in the published pointer-network files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simulator::check_bijection;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// Builds the complete graph with Euclidean edge weights. Points must be
    /// finite and pairwise distinct.
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::Validation(format!("graph needs at least 2 nodes, got {n}")));
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite coordinate".into()));
        }
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclid(coords[i], coords[j]);
                if d == 0.0 {
                    return Err(Error::Validation(format!("nodes {i} and {j} coincide")));
                }
                weights[i * n + j] = d;
                weights[j * n + i] = d;
            }
        }
        Ok(Self { coords, weights })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Edges `(i, j, ε_ij)` with `i < j`, in ascending lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.weight(i, j))))
    }

    /// The same instance with node `i` renamed to `sigma[i]`.
    pub fn relabel(&self, sigma: &[usize]) -> Result<WeightedGraph> {
        check_bijection(sigma, self.n())?;
        let mut coords = vec![[0.0; 2]; self.n()];
        for (i, &s) in sigma.iter().enumerate() {
            coords[s] = self.coords[i];
        }
        WeightedGraph::new(coords)
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A closed tour: each node exactly once, the cycle returning to `order[0]`.
/// Tours produced by the environment start at node 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tour {
    order: Vec<usize>,
}

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::Validation(format!("{order:?} is not a tour on {n} nodes")));
            }
            seen[v] = true;
        }
        Ok(Self { order })
    }

    /// `0, 1, …, n-1`.
    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The tour with every node `v` renamed to `sigma[v]`.
    pub fn relabel(&self, sigma: &[usize]) -> Tour {
        Tour {
            order: self.order.iter().map(|&v| sigma[v]).collect(),
        }
    }

    /// Same cycle, rotated to start at `start`.
    pub fn rotated_to(&self, start: usize) -> Tour {
        let pos = self.order.iter().position(|&v| v == start).unwrap_or(0);
        let mut order = self.order[pos..].to_vec();
        order.extend_from_slice(&self.order[..pos]);
        Tour { order }
    }
}

/// Node features α for a partial tour: 0 for nodes in the tour, π for
/// available ones.
#[derive(Clone, Debug)]
pub struct AnnotatedGraph<'g> {
    graph: &'g WeightedGraph,
    alpha: Vec<f64>,
}

impl<'g> AnnotatedGraph<'g> {
    pub fn new(graph: &'g WeightedGraph, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != graph.n() {
            return Err(Error::Validation(format!(
                "alpha has {} entries for {} nodes",
                alpha.len(),
                graph.n()
            )));
        }
        if let Some(a) = alpha.iter().find(|&&a| a != 0.0 && a != PI) {
            return Err(Error::Validation(format!("alpha entry {a} is neither 0 nor π")));
        }
        Ok(Self { graph, alpha })
    }

    /// Annotation for the nodes already placed in `partial`.
    pub fn from_partial_tour(graph: &'g WeightedGraph, partial: &[usize]) -> Result<Self> {
        check_partial(graph.n(), partial)?;
        let mut alpha = vec![PI; graph.n()];
        for &v in partial {
            alpha[v] = 0.0;
        }
        Ok(Self { graph, alpha })
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn is_available(&self, v: usize) -> bool {
        self.alpha[v] == PI
    }

    pub fn available(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.alpha.len()).filter(|&v| self.is_available(v))
    }

    pub fn n_available(&self) -> usize {
        self.available().count()
    }

    pub fn relabel(&self, relabeled_graph: &'g WeightedGraph, sigma: &[usize]) -> Result<Self> {
        check_bijection(sigma, self.alpha.len())?;
        let mut alpha = vec![0.0; self.alpha.len()];
        for (i, &s) in sigma.iter().enumerate() {
            alpha[s] = self.alpha[i];
        }
        AnnotatedGraph::new(relabeled_graph, alpha)
    }
}

fn check_partial(n: usize, partial: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in partial {
        if v >= n {
            return Err(Error::Validation(format!("node {v} out of range for {n} nodes")));
        }
        if seen[v] {
            return Err(Error::Validation(format!("node {v} repeated in {partial:?}")));
        }
        seen[v] = true;
    }
    Ok(())
}

/// Length of an open path through `nodes` (no closing edge).
pub fn path_cost(g: &WeightedGraph, nodes: &[usize]) -> Result<f64> {
    check_partial(g.n(), nodes)?;
    Ok(nodes.windows(2).map(|w| g.weight(w[0], w[1])).sum())
}

/// Length of the closed cycle.
pub fn tour_cost(g: &WeightedGraph, tour: &Tour) -> Result<f64> {
    if tour.len() != g.n() {
        return Err(Error::Validation(format!(
            "tour has {} nodes, graph has {}",
            tour.len(),
            g.n()
        )));
    }
    let o = tour.order();
    Ok(path_cost(g, o)? + g.weight(o[o.len() - 1], o[0]))
}

pub fn approximation_ratio(g: &WeightedGraph, tour: &Tour, optimal: &Tour) -> Result<f64> {
    Ok(tour_cost(g, tour)? / tour_cost(g, optimal)?)
}

/// Reward for appending `v` to `partial`: the negated growth in tour length.
///
/// When at most one node remains after `v`, the tour is completed (the
/// remaining node is appended and the cycle closed back to `partial[0]`),
/// so summing rewards over an episode gives minus the closed-tour cost.
pub fn step_reward(g: &WeightedGraph, partial: &[usize], v: usize) -> Result<f64> {
    check_partial(g.n(), partial)?;
    let (&start, &last) = match (partial.first(), partial.last()) {
        (Some(s), Some(l)) => (s, l),
        _ => return Err(Error::Validation("partial tour is empty".into())),
    };
    if v >= g.n() {
        return Err(Error::Validation(format!("node {v} out of range")));
    }
    if partial.contains(&v) {
        return Err(Error::Validation(format!("node {v} already in tour")));
    }
    let mut delta = g.weight(last, v);
    let remaining = g.n() - partial.len() - 1;
    if remaining <= 1 {
        let mut end = v;
        if remaining == 1 {
            let u = (0..g.n())
                .find(|&u| u != v && !partial.contains(&u))
                .expect("one node remains");
            delta += g.weight(v, u);
            end = u;
        }
        delta += g.weight(end, start);
    }
    Ok(-delta)
}

/// Points drawn uniformly from the unit square; a point equal to an earlier
/// one is redrawn.
pub fn generate_instances(n: usize, count: usize, seed: u64) -> Result<Vec<WeightedGraph>> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("instances need n >= 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut coords: Vec<[f64; 2]> = Vec::with_capacity(n);
            while coords.len() < n {
                let p = [rng.gen::<f64>(), rng.gen::<f64>()];
                if !coords.contains(&p) {
                    coords.push(p);
                }
            }
            WeightedGraph::new(coords)
        })
        .collect()
}

/// A graph plus, when known, an optimal tour.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub graph: WeightedGraph,
    pub optimal: Option<Tour>,
}

impl Instance {
    pub fn optimal_cost(&self) -> Option<f64> {
        self.optimal
            .as_ref()
            .map(|t| tour_cost(&self.graph, t).expect("stored tour matches graph"))
    }
}

/// Formats one instance line. Coordinates use the shortest round-trip
/// decimal form; tour indices are written 1-based like the published files.
pub fn format_instance(inst: &Instance) -> String {
    let mut line = String::new();
    for (k, [x, y]) in inst.graph.coords().iter().enumerate() {
        if k > 0 {
            line.push(' ');
        }
        write!(line, "{x:?} {y:?}").unwrap();
    }
    if let Some(t) = &inst.optimal {
        line.push_str(" |");
        for v in t.order() {
            write!(line, " {}", v + 1).unwrap();
        }
    }
    line
}

pub fn parse_instances(text: &str, source: &Path) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_line(line).map_err(|msg| Error::parse(source, lineno + 1, msg))?);
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<Instance, String> {
    let (coord_part, tour_part) = match line.split_once('|').or_else(|| line.split_once("output")) {
        Some((c, t)) => (c, Some(t)),
        None => (line, None),
    };
    let nums: Vec<f64> = coord_part
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| format!("bad coordinate {s:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if !nums.len().is_multiple_of(2) {
        return Err(format!("odd number of coordinates ({})", nums.len()));
    }
    let coords: Vec<[f64; 2]> = nums.chunks(2).map(|c| [c[0], c[1]]).collect();
    let n = coords.len();
    let graph = WeightedGraph::new(coords).map_err(|e| e.to_string())?;
    let optimal = match tour_part {
        None => None,
        Some(t) => {
            let mut idx: Vec<usize> = t
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| format!("bad tour index {s:?}: {e}")))
                .collect::<std::result::Result<_, _>>()?;
            if idx.len() == n + 1 && idx.first() == idx.last() {
                idx.pop();
            }
            if idx.len() != n {
                return Err(format!("tour has {} indices for {n} nodes", idx.len()));
            }
            if !idx.contains(&0) {
                for v in &mut idx {
                    *v = v.checked_sub(1).ok_or("tour index 0 in 1-based tour")?;
                }
            }
            let tour = Tour::new(idx).map_err(|e| e.to_string())?;
            Some(tour.rotated_to(0))
        }
    };
    Ok(Instance { graph, optimal })
}

pub fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instances(&text, path)
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut text = String::new();
    for inst in instances {
        text.push_str(&format_instance(inst));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
