//! Deep Q-learning for the circuit agent.
//!
//! Each environment step after warm-up samples a batch from replay memory,
//! regresses `Q(s, a)` onto `r + γ · max_a' Q̂(s', a')` computed with a frozen
//! copy of the parameters, and takes one Adam step. The frozen copy is
//! refreshed every `target_update_interval` steps.

pub mod checkpoint;
pub mod gradient;
pub mod optimizer;
pub mod replay;

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{q_values, select_action, QValues};
use crate::ansatz::{Ansatz, AnsatzKind};
use crate::error::{Error, Result};
use crate::graph::{approximation_ratio, step_reward, AnnotatedGraph, Instance, Tour};
use crate::simulator::Statevector;

pub use checkpoint::Checkpoint;
pub use gradient::{expectation_gradient, GradientMethod};
pub use optimizer::{Adam, AdamState};
pub use replay::{ReplayMemory, Transition};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub episodes_max: usize,
    pub solve_window: usize,
    pub solve_threshold: f64,
    pub batch_size: usize,
    pub memory_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub target_update_interval: usize,
    /// `None` picks the per-ansatz default, see [`default_learning_rate`].
    pub learning_rate: Option<f64>,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
    /// Parameters start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    pub gradient: GradientMethod,
    pub seed: u64,
    /// Worker threads for batch gradients; 1 runs on the calling thread.
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes_max: 5000,
            solve_window: 100,
            solve_threshold: 1.05,
            batch_size: 32,
            memory_capacity: 10_000,
            warmup: 1000,
            target_update_interval: 30,
            learning_rate: None,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay: 0.99,
            init_range: 0.1,
            gradient: GradientMethod::ParameterShift,
            seed: 0,
            threads: 1,
        }
    }
}

pub fn default_learning_rate(kind: AnsatzKind) -> f64 {
    match kind {
        AnsatzKind::Eqc => 1e-2,
        _ => 1e-3,
    }
}

/// Keys accepted by [`TrainerConfig::set`] and config files.
pub const CONFIG_KEYS: [&str; 16] = [
    "episodes_max",
    "solve_window",
    "solve_threshold",
    "batch_size",
    "memory_capacity",
    "warmup",
    "target_update_interval",
    "learning_rate",
    "discount",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay",
    "init_range",
    "gradient",
    "seed",
    "threads",
];

impl TrainerConfig {
    pub fn learning_rate_for(&self, kind: AnsatzKind) -> f64 {
        self.learning_rate.unwrap_or_else(|| default_learning_rate(kind))
    }

    /// Exploration rate for 0-based episode `e`.
    pub fn epsilon(&self, e: usize) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powi(e.min(i32::MAX as usize) as i32)).max(self.epsilon_end)
    }

    /// Overrides one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
        }
        match key {
            "episodes_max" => self.episodes_max = parse(key, value)?,
            "solve_window" => self.solve_window = parse(key, value)?,
            "solve_threshold" => self.solve_threshold = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "memory_capacity" => self.memory_capacity = parse(key, value)?,
            "warmup" => self.warmup = parse(key, value)?,
            "target_update_interval" => self.target_update_interval = parse(key, value)?,
            "learning_rate" => {
                self.learning_rate = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "discount" => self.discount = parse(key, value)?,
            "epsilon_start" => self.epsilon_start = parse(key, value)?,
            "epsilon_end" => self.epsilon_end = parse(key, value)?,
            "epsilon_decay" => self.epsilon_decay = parse(key, value)?,
            "init_range" => self.init_range = parse(key, value)?,
            "gradient" => self.gradient = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and text
    /// after `#` are ignored.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, no + 1, "expected `key = value`"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(source, no + 1, e.to_string()))?;
        }
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// The full configuration in the file format.
    pub fn to_text(&self) -> String {
        let lr = self.learning_rate.map_or("auto".to_string(), |v| v.to_string());
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match key {
                "episodes_max" => self.episodes_max.to_string(),
                "solve_window" => self.solve_window.to_string(),
                "solve_threshold" => self.solve_threshold.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "memory_capacity" => self.memory_capacity.to_string(),
                "warmup" => self.warmup.to_string(),
                "target_update_interval" => self.target_update_interval.to_string(),
                "learning_rate" => lr.clone(),
                "discount" => self.discount.to_string(),
                "epsilon_start" => self.epsilon_start.to_string(),
                "epsilon_end" => self.epsilon_end.to_string(),
                "epsilon_decay" => self.epsilon_decay.to_string(),
                "init_range" => self.init_range.to_string(),
                "gradient" => self.gradient.to_string(),
                "seed" => self.seed.to_string(),
                "threads" => self.threads.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.batch_size == 0 || self.memory_capacity == 0 {
            return bad("batch_size and memory_capacity must be positive");
        }
        if self.target_update_interval == 0 || self.solve_window == 0 || self.threads == 0 {
            return bad("target_update_interval, solve_window and threads must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("learning_rate must be positive");
            }
        }
        Ok(())
    }
}

/// Everything a TD update needs besides the parameters.
#[derive(Clone, Copy, Debug)]
pub struct DqnContext<'a> {
    pub instances: &'a [Instance],
    pub ansatz: Ansatz,
    pub discount: f64,
    pub gradient: GradientMethod,
}

impl<'a> DqnContext<'a> {
    fn state_graph(&self, t: &Transition, next: bool) -> Result<AnnotatedGraph<'a>> {
        let inst = self
            .instances
            .get(t.instance)
            .ok_or_else(|| Error::InvalidArgument(format!("no training instance {}", t.instance)))?;
        let partial = if next { &t.next_state } else { &t.state };
        AnnotatedGraph::from_partial_tour(&inst.graph, partial)
    }

    fn last(partial: &[usize]) -> Result<usize> {
        partial
            .last()
            .copied()
            .ok_or_else(|| Error::Validation("empty state in transition".into()))
    }

    /// `Q(s, a)` for the stored state and action.
    pub fn q_sa(&self, t: &Transition, params: &[f64]) -> Result<f64> {
        let ag = self.state_graph(t, false)?;
        let q = q_values(&self.ansatz.build(&ag), params, &ag, Self::last(&t.state)?)?;
        if !q.is_available(t.action) {
            return Err(Error::Validation(format!("action {} is not available", t.action)));
        }
        Ok(q.values()[t.action])
    }

    /// Q-values of the successor state under `params`.
    pub fn next_q_values(&self, t: &Transition, params: &[f64]) -> Result<QValues> {
        let ag = self.state_graph(t, true)?;
        q_values(&self.ansatz.build(&ag), params, &ag, Self::last(&t.next_state)?)
    }

    pub fn td_target(&self, t: &Transition, target_params: &[f64]) -> Result<f64> {
        if t.done || self.discount == 0.0 {
            return Ok(t.reward);
        }
        let best = self
            .next_q_values(t, target_params)?
            .max()
            .ok_or(Error::EpisodeComplete)?;
        Ok(t.reward + self.discount * best)
    }

    /// Mean squared TD error over `batch`.
    pub fn loss(&self, batch: &[&Transition], params: &[f64], target_params: &[f64]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for t in batch {
            let r = self.q_sa(t, params)? - self.td_target(t, target_params)?;
            sum += r * r;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Residual and `∇_θ Q(s, a)` for one transition.
    fn residual_and_gradient(&self, t: &Transition, params: &[f64], target_params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ag = self.state_graph(t, false)?;
        let last = Self::last(&t.state)?;
        if !ag.is_available(t.action) {
            return Err(Error::Validation(format!("action {} is not available", t.action)));
        }
        let program = self.ansatz.build(&ag);
        let weight = ag.graph().weight(last, t.action);
        let f = |s: &Statevector| s.expectation_zz(last, t.action).map(|z| weight * z);
        let q = f(&program.evaluate(params)?)?;
        let y = self.td_target(t, target_params)?;
        let grad = expectation_gradient(&program, params, self.gradient, f)?;
        Ok((q - y, grad))
    }

    /// Loss and its gradient `mean 2 (Q - y) ∇Q`. Per-transition terms may be
    /// computed on `pool`; they are always summed in batch order.
    pub fn loss_and_gradient(
        &self,
        batch: &[&Transition],
        params: &[f64],
        target_params: &[f64],
        pool: Option<&rayon::ThreadPool>,
    ) -> Result<(f64, Vec<f64>)> {
        let terms: Vec<Result<(f64, Vec<f64>)>> = match pool {
            Some(pool) => pool.install(|| {
                batch
                    .par_iter()
                    .map(|t| self.residual_and_gradient(t, params, target_params))
                    .collect()
            }),
            None => batch
                .iter()
                .map(|t| self.residual_and_gradient(t, params, target_params))
                .collect(),
        };
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for term in terms {
            let (r, g) = term?;
            loss += r * r;
            for (acc, gk) in grad.iter_mut().zip(g) {
                *acc += 2.0 * r * gk;
            }
        }
        let m = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        Ok((loss / m, grad))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based.
    pub episode: usize,
    pub ratio: Option<f64>,
    /// Mean loss over the updates made during the episode.
    pub loss: Option<f64>,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub ansatz: Ansatz,
    pub n: usize,
    /// Parameters after the last update; evaluation uses these.
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub history: Vec<EpisodeRecord>,
    pub solved: bool,
    pub steps: usize,
}

impl TrainingOutcome {
    pub fn episodes_run(&self) -> usize {
        self.history.len()
    }

    /// Mean ratio over the last `window` episodes that have one.
    pub fn final_mean_ratio(&self, window: usize) -> Option<f64> {
        let ratios: Vec<f64> = self.history.iter().filter_map(|r| r.ratio).collect();
        let tail = &ratios[ratios.len().saturating_sub(window)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: self.ansatz.kind,
            n: self.n,
            depth: self.ansatz.depth,
            episode: self.episodes_run(),
            params: self.params.clone(),
            adam: self.adam.clone(),
        }
    }
}

/// Uniform initial parameters in `[-range, range]`.
pub fn init_params<R: Rng + ?Sized>(n_params: usize, range: f64, rng: &mut R) -> Vec<f64> {
    if range == 0.0 {
        return vec![0.0; n_params];
    }
    (0..n_params).map(|_| rng.gen_range(-range..=range)).collect()
}

fn common_size(instances: &[Instance]) -> Result<usize> {
    let n = instances
        .first()
        .ok_or_else(|| Error::InvalidArgument("no instances given".into()))?
        .graph
        .n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("instances need n >= 3, got {n}")));
    }
    if let Some(k) = instances.iter().position(|i| i.graph.n() != n) {
        return Err(Error::InvalidArgument(format!(
            "instance {k} has {} nodes, expected {n}",
            instances[k].graph.n()
        )));
    }
    Ok(n)
}

fn ensure_finite(what: &str, values: &[f64], episode: usize, step: usize) -> Result<()> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{what}[{k}] = {} at episode {episode}, step {step}",
            values[k]
        )));
    }
    Ok(())
}

/// Trains from a fresh uniform initialization.
pub fn train(config: &TrainerConfig, instances: &[Instance], ansatz: Ansatz) -> Result<TrainingOutcome> {
    train_with(config, instances, ansatz, |_| {})
}

/// As [`train`], calling `on_episode` after every episode.
pub fn train_with<F>(
    config: &TrainerConfig,
    instances: &[Instance],
    ansatz: Ansatz,
    mut on_episode: F,
) -> Result<TrainingOutcome>
where
    F: FnMut(&EpisodeRecord),
{
    config.validate()?;
    let n = common_size(instances)?;
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(ansatz.n_trainable(n), config.init_range, &mut rng);
    let mut target = params.clone();
    let mut adam = Adam::new(config.learning_rate_for(ansatz.kind), params.len());
    let mut memory = ReplayMemory::new(config.memory_capacity);
    let ctx = DqnContext {
        instances,
        ansatz,
        discount: config.discount,
        gradient: config.gradient,
    };

    let mut history = Vec::new();
    let mut ratios_window = std::collections::VecDeque::with_capacity(config.solve_window);
    let mut solved = false;
    let mut steps = 0usize;

    for e in 0..config.episodes_max {
        let idx = e % instances.len();
        let inst = &instances[idx];
        let g = &inst.graph;
        let epsilon = config.epsilon(e);
        let mut partial = vec![0];
        let mut losses = Vec::new();

        while partial.len() < n - 1 {
            let ag = AnnotatedGraph::from_partial_tour(g, &partial)?;
            let last = *partial.last().expect("non-empty");
            let q = q_values(&ansatz.build(&ag), &params, &ag, last)?;
            let action = select_action(&q, epsilon, &mut rng)?;
            let reward = step_reward(g, &partial, action)?;
            let mut next = partial.clone();
            next.push(action);
            memory.push(Transition {
                instance: idx,
                state: partial,
                action,
                reward,
                done: n - next.len() <= 1,
                next_state: next.clone(),
            });
            partial = next;
            steps += 1;

            if memory.len() >= config.warmup.max(config.batch_size) {
                let batch = memory.sample(config.batch_size, &mut rng);
                let (loss, grad) = ctx.loss_and_gradient(&batch, &params, &target, pool.as_ref())?;
                ensure_finite("loss", &[loss], e + 1, steps)?;
                ensure_finite("gradient", &grad, e + 1, steps)?;
                adam.step(&mut params, &grad);
                ensure_finite("params", &params, e + 1, steps)?;
                losses.push(loss);
            }
            if steps.is_multiple_of(config.target_update_interval) {
                target.copy_from_slice(&params);
            }
        }
        let rest = (0..n).find(|v| !partial.contains(v)).expect("one node left");
        partial.push(rest);
        let tour = Tour::new(partial)?;
        let ratio = match &inst.optimal {
            Some(opt) => Some(approximation_ratio(g, &tour, opt)?),
            None => None,
        };

        let record = EpisodeRecord {
            episode: e + 1,
            ratio,
            loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            epsilon,
        };
        on_episode(&record);
        history.push(record);

        if let Some(r) = ratio {
            if ratios_window.len() == config.solve_window {
                ratios_window.pop_front();
            }
            ratios_window.push_back(r);
            if ratios_window.len() == config.solve_window {
                let mean = ratios_window.iter().sum::<f64>() / config.solve_window as f64;
                if mean < config.solve_threshold {
                    solved = true;
                    break;
                }
            }
        }
    }

    Ok(TrainingOutcome {
        ansatz,
        n,
        params,
        adam: adam.state,
        history,
        solved,
        steps,
    })
}

/// Box-plot statistics of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation over `sqrt(count)`; 0 for one value.
    pub std_err: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let std_err = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count,
            mean,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            min: sorted[0],
            max: sorted[count - 1],
            std_err,
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub tours: Vec<Tour>,
    pub ratios: Vec<f64>,
    pub summary: Summary,
}

/// Greedy rollouts from node 0 on every instance. Each instance needs an
/// optimal tour.
pub fn evaluate(params: &[f64], ansatz: Ansatz, instances: &[Instance]) -> Result<EvalReport> {
    let n = common_size(instances)?;
    if params.len() != ansatz.n_trainable(n) {
        return Err(Error::InvalidArgument(format!(
            "{} parameters given, {} {} at depth {} needs {}",
            params.len(),
            ansatz.kind,
            n,
            ansatz.depth,
            ansatz.n_trainable(n)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut tours = Vec::with_capacity(instances.len());
    let mut ratios = Vec::with_capacity(instances.len());
    for (k, inst) in instances.iter().enumerate() {
        let opt = inst
            .optimal
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("instance {k} has no optimal tour")))?;
        let ep = crate::agent::rollout(&ansatz, params, &inst.graph, 0.0, &mut rng)?;
        ratios.push(approximation_ratio(&inst.graph, &ep.tour, opt)?);
        tours.push(ep.tour);
    }
    let summary = Summary::of(&ratios).expect("at least one instance");
    Ok(EvalReport { tours, ratios, summary })
}

/// `episode,ratio,loss,epsilon` with empty cells for missing values.
pub fn episodes_csv(history: &[EpisodeRecord]) -> String {
    let mut out = String::from("episode,ratio,loss,epsilon\n");
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in history {
        let _ = writeln!(out, "{},{},{},{}", r.episode, cell(r.ratio), cell(r.loss), r.epsilon);
    }
    out
}
