//! Q-values from circuit expectations, ε-greedy selection and tour rollouts.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ansatz::{Ansatz, AnsatzProgram};
use crate::error::{Error, Result};
use crate::graph::{step_reward, AnnotatedGraph, Tour, WeightedGraph};
use crate::simulator::Statevector;

/// Q-value assigned to nodes that are already in the tour.
pub const MASK_VALUE: f64 = -10000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct QValues {
    values: Vec<f64>,
    available: Vec<bool>,
}

impl QValues {
    /// Builds masked Q-values; `values` entries for unavailable nodes are overwritten.
    pub fn new(mut values: Vec<f64>, available: Vec<bool>) -> Self {
        for (v, &ok) in values.iter_mut().zip(&available) {
            if !ok {
                *v = MASK_VALUE;
            }
        }
        Self { values, available }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_available(&self, v: usize) -> bool {
        self.available[v]
    }

    pub fn available(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(|&v| self.available[v])
    }

    /// Largest unmasked value, ties to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for v in self.available() {
            if best.is_none_or(|b| self.values[v] > self.values[b]) {
                best = Some(v);
            }
        }
        best
    }

    pub fn max(&self) -> Option<f64> {
        self.argmax().map(|v| self.values[v])
    }
}

/// `Q[v] = ε_{last,v} ⟨Z_last Z_v⟩` for every available `v`, read from one state.
pub fn q_values_from_state(state: &Statevector, g: &AnnotatedGraph<'_>, last: usize) -> Result<QValues> {
    let n = g.graph().n();
    if g.n_available() == 0 {
        return Err(Error::EpisodeComplete);
    }
    let available: Vec<bool> = (0..n).map(|v| g.is_available(v)).collect();
    let mut values = vec![MASK_VALUE; n];
    for v in g.available() {
        values[v] = g.graph().weight(last, v) * state.expectation_zz(last, v)?;
    }
    Ok(QValues::new(values, available))
}

pub fn q_values(
    program: &AnsatzProgram,
    params: &[f64],
    g: &AnnotatedGraph<'_>,
    last: usize,
) -> Result<QValues> {
    if g.n_available() == 0 {
        return Err(Error::EpisodeComplete);
    }
    let state = program.evaluate(params)?;
    q_values_from_state(&state, g, last)
}

/// ε-greedy: with probability `epsilon` a uniformly random available node,
/// otherwise [`QValues::argmax`].
pub fn select_action<R: Rng + ?Sized>(q: &QValues, epsilon: f64, rng: &mut R) -> Result<usize> {
    let greedy = q.argmax().ok_or(Error::EpisodeComplete)?;
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let choices: Vec<usize> = q.available().collect();
        return Ok(*choices.choose(rng).expect("at least one available node"));
    }
    Ok(greedy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub tour: Tour,
    /// One reward per chosen action; the last one also pays for the
    /// auto-appended node and the closing edge.
    pub rewards: Vec<f64>,
    pub ratio: Option<f64>,
}

impl EpisodeResult {
    /// Partial tour before action `step` (0-based).
    pub fn prefix(&self, step: usize) -> &[usize] {
        &self.tour.order()[..step + 1]
    }

    pub fn n_steps(&self) -> usize {
        self.rewards.len()
    }
}

/// Runs node selection from `start` with an arbitrary Q-function. After the
/// second-to-last selection the remaining node is appended automatically,
/// so an `n`-node episode takes `n - 2` actions.
pub fn rollout_with<R, F>(
    g: &WeightedGraph,
    start: usize,
    epsilon: f64,
    rng: &mut R,
    mut q_fn: F,
) -> Result<EpisodeResult>
where
    R: Rng + ?Sized,
    F: FnMut(&AnnotatedGraph<'_>, usize) -> Result<QValues>,
{
    let n = g.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("rollout needs n >= 3, got {n}")));
    }
    if start >= n {
        return Err(Error::InvalidArgument(format!("start node {start} out of range")));
    }
    let mut partial = vec![start];
    let mut rewards = Vec::with_capacity(n - 2);
    while partial.len() < n - 1 {
        let ag = AnnotatedGraph::from_partial_tour(g, &partial)?;
        let last = *partial.last().expect("non-empty");
        let q = q_fn(&ag, last)?;
        let v = select_action(&q, epsilon, rng)?;
        rewards.push(step_reward(g, &partial, v)?);
        partial.push(v);
    }
    let rest = (0..n).find(|v| !partial.contains(v)).expect("one node left");
    partial.push(rest);
    Ok(EpisodeResult {
        tour: Tour::new(partial)?,
        rewards,
        ratio: None,
    })
}

pub fn rollout_from<R: Rng + ?Sized>(
    ansatz: &Ansatz,
    params: &[f64],
    g: &WeightedGraph,
    start: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpisodeResult> {
    rollout_with(g, start, epsilon, rng, |ag, last| {
        q_values(&ansatz.build(ag), params, ag, last)
    })
}

/// One episode starting from node 0.
pub fn rollout<R: Rng + ?Sized>(
    ansatz: &Ansatz,
    params: &[f64],
    g: &WeightedGraph,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpisodeResult> {
    rollout_from(ansatz, params, g, 0, epsilon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnsatzKind;
    use crate::graph::{generate_instances, tour_cost};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(values: &[f64]) -> QValues {
        let available = values.iter().map(|&v| v != MASK_VALUE).collect();
        QValues::new(values.to_vec(), available)
    }

    #[test]
    fn greedy_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&q(&[MASK_VALUE, 0.3, 0.1]), 0.0, &mut rng).unwrap(), 1);
        assert_eq!(select_action(&q(&[MASK_VALUE, 0.2, 0.2]), 0.0, &mut rng).unwrap(), 1);
        let all_masked = QValues::new(vec![0.0, 0.0], vec![false, false]);
        assert!(matches!(
            select_action(&all_masked, 0.0, &mut rng),
            Err(Error::EpisodeComplete)
        ));
    }

    #[test]
    fn exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qv = q(&[MASK_VALUE, 0.9, MASK_VALUE, 0.1, -0.5]);
        let draws = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[select_action(&qv, 1.0, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[2], 0);
        let p = 1.0 / 3.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for v in [1, 3, 4] {
            assert!((counts[v] as f64 - draws as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn zero_params_give_zero_q() {
        let g = &generate_instances(5, 1, 3).unwrap()[0];
        let ag = AnnotatedGraph::from_partial_tour(g, &[0, 3]).unwrap();
        let prog = Ansatz::new(AnsatzKind::Eqc, 1).unwrap().build(&ag);
        let qv = q_values(&prog, &[0.0, 0.0], &ag, 3).unwrap();
        for v in 0..5 {
            if ag.is_available(v) {
                assert!(qv.values()[v].abs() < 1e-12);
            } else {
                assert_eq!(qv.values()[v], MASK_VALUE);
            }
        }
    }

    #[test]
    fn no_available_nodes() {
        let g = &generate_instances(4, 1, 3).unwrap()[0];
        let ag = AnnotatedGraph::from_partial_tour(g, &[0, 1, 2, 3]).unwrap();
        let prog = Ansatz::new(AnsatzKind::Eqc, 1).unwrap().build(&ag);
        assert!(matches!(q_values(&prog, &[0.1, 0.2], &ag, 3), Err(Error::EpisodeComplete)));
    }

    #[test]
    fn rollout_shapes() {
        let ansatz = Ansatz::new(AnsatzKind::Eqc, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in generate_instances(4, 5, 9).unwrap() {
            let ep = rollout(&ansatz, &[0.3, -0.7], &g, 0.5, &mut rng).unwrap();
            assert_eq!(ep.n_steps(), 2);
            assert_eq!(ep.tour.len(), 4);
            assert_eq!(ep.tour.order()[0], 0);
            let total: f64 = ep.rewards.iter().sum();
            assert!((total + tour_cost(&g, &ep.tour).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn greedy_rollout_is_deterministic() {
        let ansatz = Ansatz::new(AnsatzKind::Neqc, 1).unwrap();
        let g = &generate_instances(6, 1, 4).unwrap()[0];
        let params: Vec<f64> = (0..21).map(|k| (k as f64 * 0.37).sin()).collect();
        let a = rollout(&ansatz, &params, g, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = rollout(&ansatz, &params, g, 0.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_params_follow_index_order() {
        let ansatz = Ansatz::new(AnsatzKind::Eqc, 1).unwrap();
        let g = &generate_instances(7, 1, 4).unwrap()[0];
        let ep = rollout(&ansatz, &[0.0, 0.0], g, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(ep.tour, Tour::identity(7));
    }
}
