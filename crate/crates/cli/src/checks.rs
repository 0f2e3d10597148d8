//! Property suites behind `eqc check`.

use rand::seq::SliceRandom;
use rand::Rng;

use eqc_core::agent::{q_values, rollout_from};
use eqc_core::analytic::max_deviation_sweep;
use eqc_core::ansatz::build_eqc;
use eqc_core::graph::{generate_instances, AnnotatedGraph};
use eqc_core::trainer::{expectation_gradient, GradientMethod};
use eqc_core::{Ansatz, AnsatzKind, Result, Statevector, WeightedGraph};

pub const EQUIVARIANCE_TOL: f64 = 1e-10;
pub const ANALYTIC_TOL: f64 = 1e-9;
pub const GRADIENT_TOL: f64 = 1e-5;

/// Margin below which two Q-values count as tied.
const TIE_MARGIN: f64 = 1e-9;

pub struct CheckLine {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.value < self.tolerance
    }
}

fn random_graph<R: Rng>(n: usize, rng: &mut R) -> Result<WeightedGraph> {
    Ok(generate_instances(n, 1, rng.gen())?.remove(0))
}

fn random_partial<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut rest: Vec<usize> = (1..n).collect();
    rest.shuffle(rng);
    let len = rng.gen_range(1..n);
    let mut partial = vec![0];
    partial.extend_from_slice(&rest[..len - 1]);
    partial
}

fn permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.shuffle(rng);
    sigma
}

fn has_ties(values: &[f64], available: impl Iterator<Item = usize>) -> bool {
    let mut vals: Vec<f64> = available.map(|v| values[v]).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.len() > 1 && vals[0] - vals[1] < TIE_MARGIN
}

/// Circuit-state, Q-value and greedy-tour equivariance under random relabelings.
pub fn equivariance<R: Rng>(trials: usize, rng: &mut R) -> Result<Vec<CheckLine>> {
    let mut state_dev: f64 = 0.0;
    let mut q_dev: f64 = 0.0;
    let mut tour_mismatches = 0usize;
    let mut tour_trials = 0usize;
    for _ in 0..trials {
        let n = rng.gen_range(4..=8);
        let p = rng.gen_range(1..=3);
        let g = random_graph(n, rng)?;
        let sigma = permutation(n, rng);
        let h = g.relabel(&sigma)?;
        let params: Vec<f64> = (0..2 * p).map(|_| rng.gen_range(-3.0..3.0)).collect();

        let partial = random_partial(n, rng);
        let ag = AnnotatedGraph::from_partial_tour(&g, &partial)?;
        let ah = ag.relabel(&h, &sigma)?;
        let psi = build_eqc(&ag, p).evaluate(&params)?;
        let phi = build_eqc(&ah, p).evaluate(&params)?;
        state_dev = state_dev.max(phi.max_deviation(&psi.apply_permutation(&sigma)?));

        let last = *partial.last().expect("non-empty");
        if ag.n_available() > 0 {
            let qg = q_values(&build_eqc(&ag, p), &params, &ag, last)?;
            let qh = q_values(&build_eqc(&ah, p), &params, &ah, sigma[last])?;
            for v in ag.available() {
                q_dev = q_dev.max((qg.values()[v] - qh.values()[sigma[v]]).abs());
            }
        }

        // Tours are compared only when every greedy choice is unambiguous.
        let ansatz = Ansatz::new(AnsatzKind::Eqc, p)?;
        let mut tied = false;
        let mut none = NoDraw;
        let tour_g = eqc_core::agent::rollout_with(&g, 0, 0.0, &mut none, |a, l| {
            let q = q_values(&ansatz.build(a), &params, a, l)?;
            tied |= has_ties(q.values(), a.available());
            Ok(q)
        })?;
        if tied {
            continue;
        }
        let tour_h = rollout_from(&ansatz, &params, &h, sigma[0], 0.0, &mut none)?;
        tour_trials += 1;
        if tour_h.tour.order() != tour_g.tour.relabel(&sigma).order() {
            tour_mismatches += 1;
        }
    }
    Ok(vec![
        CheckLine {
            name: "state equivariance (max amplitude deviation)",
            value: state_dev,
            tolerance: EQUIVARIANCE_TOL,
            trials,
        },
        CheckLine {
            name: "Q-value equivariance (max deviation)",
            value: q_dev,
            tolerance: EQUIVARIANCE_TOL,
            trials,
        },
        CheckLine {
            name: "tour equivariance (mismatched tie-free tours)",
            value: tour_mismatches as f64,
            tolerance: 0.5,
            trials: tour_trials,
        },
    ])
}

/// Simulated depth-1 Q-values against the closed form.
pub fn analytic<R: Rng>(trials: usize, rng: &mut R) -> Result<Vec<CheckLine>> {
    let graphs = (0..trials.clamp(1, 64))
        .map(|k| random_graph(4 + k % 3, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![CheckLine {
        name: "closed form vs simulator (max |difference|)",
        value: max_deviation_sweep(&graphs, trials, rng)?,
        tolerance: ANALYTIC_TOL,
        trials,
    }])
}

/// Parameter-shift against central differences for every ansatz at n = 4.
pub fn gradients<R: Rng>(trials: usize, rng: &mut R) -> Result<Vec<CheckLine>> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let g = random_graph(4, rng)?;
        let partial = random_partial(4, rng);
        let ag = AnnotatedGraph::from_partial_tour(&g, &partial)?;
        let last = *partial.last().expect("non-empty");
        let Some(v) = ag.available().next() else { continue };
        let w = g.weight(last, v);
        let f = |s: &Statevector| s.expectation_zz(last, v).map(|z| w * z);
        for kind in AnsatzKind::ALL {
            for p in 1..=2 {
                let prog = Ansatz::new(kind, p)?.build(&ag);
                let params: Vec<f64> = (0..prog.n_trainable()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a = expectation_gradient(&prog, &params, GradientMethod::ParameterShift, f)?;
                let b = expectation_gradient(&prog, &params, GradientMethod::CentralDifference, f)?;
                for (x, y) in a.iter().zip(&b) {
                    worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-3));
                }
            }
        }
    }
    Ok(vec![CheckLine {
        name: "parameter shift vs central difference (max relative error)",
        value: worst,
        tolerance: GRADIENT_TOL,
        trials,
    }])
}

/// Greedy rollouts never draw; this panics if one does.
struct NoDraw;

impl rand::RngCore for NoDraw {
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
