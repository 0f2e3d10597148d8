//! Classical reference solvers.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{tour_cost, Tour, WeightedGraph};

/// Largest instance the exact solver accepts (`O(n² 2ⁿ)` time, `O(n 2ⁿ)` memory).
pub const MAX_EXACT_NODES: usize = 20;

/// Held-Karp dynamic program. Returns a minimum-cost tour starting at node 0.
pub fn solve_exact(g: &WeightedGraph) -> Result<Tour> {
    let n = g.n();
    if n > MAX_EXACT_NODES {
        return Err(Error::Capacity {
            what: "exact-solver node count",
            got: n,
            limit: MAX_EXACT_NODES,
        });
    }
    if n <= 3 {
        return Tour::new((0..n).collect());
    }
    // Subsets of nodes 1..n, node k at bit k-1; cost[S * m + (k-1)] is the
    // cheapest path 0 → … → k through exactly S.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];
    for k in 0..m {
        cost[(1 << k) * m + k] = g.weight(0, k + 1);
    }
    for set in 1..=full {
        for k in 0..m {
            if set & (1 << k) == 0 {
                continue;
            }
            let here = cost[set * m + k];
            if !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if set & (1 << next) != 0 {
                    continue;
                }
                let to = set | (1 << next);
                let c = here + g.weight(k + 1, next + 1);
                if c < cost[to * m + next] {
                    cost[to * m + next] = c;
                    parent[to * m + next] = k as u8;
                }
            }
        }
    }
    let (mut end, _) = (0..m)
        .map(|k| (k, cost[full * m + k] + g.weight(k + 1, 0)))
        .fold((0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
    let mut order = Vec::with_capacity(n);
    let mut set = full;
    loop {
        order.push(end + 1);
        let p = parent[set * m + end];
        set &= !(1 << end);
        if p == u8::MAX {
            break;
        }
        end = p as usize;
    }
    order.push(0);
    order.reverse();
    Tour::new(order)
}

/// Greedy closest-unvisited tour from `start`; ties go to the lowest index.
/// The result is rotated to begin at node 0.
pub fn nearest_neighbor(g: &WeightedGraph, start: usize) -> Result<Tour> {
    let n = g.n();
    if start >= n {
        return Err(Error::InvalidArgument(format!("start node {start} out of range")));
    }
    let mut visited = vec![false; n];
    let mut order = vec![start];
    visited[start] = true;
    let mut cur = start;
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .fold(None::<usize>, |best, v| match best {
                Some(b) if g.weight(cur, b) <= g.weight(cur, v) => Some(b),
                _ => Some(v),
            })
            .expect("unvisited node");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    Ok(Tour::new(order)?.rotated_to(0))
}

/// Node 0 followed by a uniformly random permutation of the rest.
pub fn random_tour<R: Rng + ?Sized>(g: &WeightedGraph, rng: &mut R) -> Tour {
    let mut rest: Vec<usize> = (1..g.n()).collect();
    rest.shuffle(rng);
    let mut order = vec![0];
    order.extend(rest);
    Tour::new(order).expect("permutation")
}

/// 1.5 × the optimal tour length: the worst case Christofides guarantees.
pub fn christofides_bound(g: &WeightedGraph) -> Result<f64> {
    Ok(1.5 * tour_cost(g, &solve_exact(g)?)?)
}
