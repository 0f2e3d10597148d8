use std::collections::HashSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eqc_core::baselines::{christofides_bound, nearest_neighbor, random_tour, solve_exact};
use eqc_core::graph::{approximation_ratio, generate_instances, tour_cost};
use eqc_core::{Tour, WeightedGraph};

/// Cheapest cycle by enumerating orders of nodes `1..n` after node 0,
/// keeping one orientation per cycle. Returns the cost, the cycle in
/// canonical orientation and the number of cycles visited.
fn brute_force(g: &WeightedGraph) -> (f64, Vec<usize>, usize) {
    let n = g.n();
    let mut best = f64::INFINITY;
    let mut best_cycle = Vec::new();
    let mut seen = HashSet::new();
    for perm in (1..n).permutations(n - 1) {
        if perm[0] > perm[n - 2] {
            continue;
        }
        let mut cost = g.weight(0, perm[0]) + g.weight(perm[n - 2], 0);
        for w in perm.windows(2) {
            cost += g.weight(w[0], w[1]);
        }
        if cost < best {
            best = cost;
            best_cycle = std::iter::once(0).chain(perm.iter().copied()).collect();
        }
        seen.insert(perm);
    }
    (best, best_cycle, seen.len())
}

/// Orients a cycle starting at 0 so that its second node is below its last.
fn canonical(order: &[usize]) -> Vec<usize> {
    let mut c = order.to_vec();
    if c[1] > c[c.len() - 1] {
        c[1..].reverse();
    }
    c
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

#[test]
fn held_karp_matches_enumeration() {
    for n in 4..=8 {
        for g in generate_instances(n, 10, 100 + n as u64).unwrap() {
            let (oracle, cycle, cycles) = brute_force(&g);
            assert_eq!(cycles, factorial(n - 1) / 2);
            let t = solve_exact(&g).unwrap();
            assert_eq!(t.order()[0], 0);
            // Same cycle; costs differ at most by summation order.
            assert_eq!(canonical(t.order()), cycle, "n={n}");
            assert!((tour_cost(&g, &t).unwrap() - oracle).abs() <= 1e-12 * oracle, "n={n}");
        }
    }
}

#[test]
fn nearest_neighbour_can_be_suboptimal() {
    // Search small random layouts for one where the greedy tour loses.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let found = (0..1000).find_map(|_| {
        let coords: Vec<[f64; 2]> = (0..5).map(|_| [rng.gen(), rng.gen()]).collect();
        let g = WeightedGraph::new(coords).ok()?;
        let opt = solve_exact(&g).ok()?;
        let nn = nearest_neighbor(&g, 0).ok()?;
        let ratio = approximation_ratio(&g, &nn, &opt).ok()?;
        (ratio > 1.0 + 1e-9).then_some((g, ratio))
    });
    let (g, ratio) = found.expect("an adversarial layout exists among 1000 draws");
    let (oracle, _, _) = brute_force(&g);
    let nn = nearest_neighbor(&g, 0).unwrap();
    assert!((tour_cost(&g, &nn).unwrap() / oracle - ratio).abs() < 1e-12);
}

#[test]
fn random_tours_lose_to_nearest_neighbour_at_ten_cities() {
    let graphs = generate_instances(10, 20, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut nn_sum, mut rnd_sum, mut rnd_count) = (0.0, 0.0, 0usize);
    for g in &graphs {
        let opt = solve_exact(g).unwrap();
        nn_sum += approximation_ratio(g, &nearest_neighbor(g, 0).unwrap(), &opt).unwrap();
        for _ in 0..500 {
            let t = random_tour(g, &mut rng);
            assert_eq!(t.order()[0], 0);
            rnd_sum += approximation_ratio(g, &t, &opt).unwrap();
            rnd_count += 1;
        }
    }
    assert_eq!(rnd_count, 10_000);
    let nn_mean = nn_sum / graphs.len() as f64;
    let rnd_mean = rnd_sum / rnd_count as f64;
    assert!(rnd_mean > nn_mean, "random {rnd_mean} vs nearest neighbour {nn_mean}");
}

#[test]
fn christofides_bound_dominates_optimum() {
    for g in generate_instances(7, 10, 3).unwrap() {
        let opt = tour_cost(&g, &solve_exact(&g).unwrap()).unwrap();
        let bound = christofides_bound(&g).unwrap();
        assert!((bound - 1.5 * opt).abs() < 1e-12);
        assert!(bound >= opt);
    }
}

#[test]
fn every_start_gives_a_valid_tour() {
    let g = &generate_instances(8, 1, 9).unwrap()[0];
    for s in 0..8 {
        let t = nearest_neighbor(g, s).unwrap();
        assert!(Tour::new(t.order().to_vec()).is_ok());
        assert_eq!(t.order()[0], 0);
    }
    assert!(nearest_neighbor(g, 8).is_err());
}
