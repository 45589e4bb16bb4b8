//! Q-learning over plans and sampling temperatures.
//!
//! A state is a plan bit vector plus one index into [`TEMPERATURE_GRID`] for
//! each of the two temperatures. Actions flip one plan bit or step one
//! temperature up or down. Q-values come from a one-hidden-layer network
//! trained online with the Watkins target `r + γ·max Q(s', ·)`.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{compose, ComposeError, SamplerConfig, SeedSource};
use crate::multistream::{MultiStreamSequence, RepresentationConfig};
use crate::reward::{evaluate, ReferenceCorpus, RewardBreakdown, RewardConfig, RewardError};
use crate::seqmodel::ModelParams;

pub const TEMPERATURE_GRID: [f64; 6] = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0];
/// Grid index of temperature 1.0.
pub const NEUTRAL_TEMPERATURE: usize = 2;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no valid action in the current state")]
    NoValidAction,
    #[error("non-finite Q target at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchHyperparams {
    pub gamma: f64,
    pub learning_rate: f64,
    pub hidden: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the budget over which ε anneals linearly.
    pub epsilon_decay_fraction: f64,
    pub iterations: usize,
    pub window: usize,
    /// Note-sets composed per rollout.
    pub composition_length: usize,
    /// Restart to a fresh state every this many iterations; 0 never restarts.
    pub restart_every: usize,
    /// Plan bits switched on at each restart.
    pub restart_bits: usize,
    pub top_k: usize,
}

impl Default for SearchHyperparams {
    fn default() -> Self {
        SearchHyperparams {
            gamma: 0.8,
            learning_rate: 0.075,
            hidden: 20,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.5,
            iterations: 1000,
            window: 200,
            composition_length: 64,
            restart_every: 50,
            restart_bits: 2,
            top_k: 10,
        }
    }
}

impl SearchHyperparams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(SearchError::Config(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SearchError::Config("learning rate must be positive".into()));
        }
        if self.window == 0 {
            return Err(SearchError::Config("window must be positive".into()));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, iteration: usize) -> f64 {
        let span = (self.iterations as f64 * self.epsilon_decay_fraction).floor();
        if span <= 0.0 {
            return self.epsilon_end;
        }
        let f = (iteration as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchState {
    pub plan: Vec<bool>,
    pub t_pitch_idx: usize,
    pub t_dur_idx: usize,
}

impl SearchState {
    pub fn new(plan: Vec<bool>) -> Self {
        SearchState { plan, t_pitch_idx: NEUTRAL_TEMPERATURE, t_dur_idx: NEUTRAL_TEMPERATURE }
    }

    pub fn t_pitch(&self) -> f64 {
        TEMPERATURE_GRID[self.t_pitch_idx]
    }

    pub fn t_dur(&self) -> f64 {
        TEMPERATURE_GRID[self.t_dur_idx]
    }

    pub fn plan_vector(&self) -> Vec<f64> {
        self.plan.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Bit `i` of the plan is bit `i` of the number, printed most significant
    /// digit first.
    pub fn plan_hex(&self) -> String {
        let digits = self.plan.len().div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4).filter(|&b| self.plan.get(4 * d + b).copied().unwrap_or(false)).fold(0u32, |n, b| n | 1 << b);
                std::char::from_digit(nibble, 16).expect("nibble")
            })
            .collect()
    }

    /// Exactly `bits` distinct plan bits on, temperatures at 1.0.
    pub fn random<R: Rng>(n_songs: usize, bits: usize, rng: &mut R) -> Self {
        let picks = rand::seq::index::sample(rng, n_songs, bits.min(n_songs));
        let mut plan = vec![false; n_songs];
        for i in picks.iter() {
            plan[i] = true;
        }
        SearchState::new(plan)
    }

    /// Every bit and both temperature indices drawn uniformly.
    pub fn uniform<R: Rng>(n_songs: usize, rng: &mut R) -> Self {
        let plan = (0..n_songs).map(|_| rng.gen::<bool>()).collect();
        SearchState {
            plan,
            t_pitch_idx: rng.gen_range(0..TEMPERATURE_GRID.len()),
            t_dur_idx: rng.gen_range(0..TEMPERATURE_GRID.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    FlipBit(usize),
    PitchTempStep(i8),
    DurTempStep(i8),
}

impl Action {
    /// Actions in index order: every bit flip, then pitch down/up, then
    /// duration down/up.
    pub fn all(n_songs: usize) -> Vec<Action> {
        let mut v: Vec<Action> = (0..n_songs).map(Action::FlipBit).collect();
        v.extend([Action::PitchTempStep(-1), Action::PitchTempStep(1), Action::DurTempStep(-1), Action::DurTempStep(1)]);
        v
    }

    pub fn is_valid(&self, state: &SearchState) -> bool {
        let ok = |idx: usize, step: i8| {
            let j = idx as isize + step as isize;
            j >= 0 && (j as usize) < TEMPERATURE_GRID.len()
        };
        match *self {
            Action::FlipBit(i) => i < state.plan.len(),
            Action::PitchTempStep(s) => ok(state.t_pitch_idx, s),
            Action::DurTempStep(s) => ok(state.t_dur_idx, s),
        }
    }

    pub fn apply(&self, state: &SearchState) -> SearchState {
        let mut next = state.clone();
        match *self {
            Action::FlipBit(i) => next.plan[i] = !next.plan[i],
            Action::PitchTempStep(s) => next.t_pitch_idx = (state.t_pitch_idx as isize + s as isize) as usize,
            Action::DurTempStep(s) => next.t_dur_idx = (state.t_dur_idx as isize + s as isize) as usize,
        }
        next
    }
}

pub fn valid_mask(state: &SearchState) -> Vec<bool> {
    Action::all(state.plan.len()).iter().map(|a| a.is_valid(state)).collect()
}

/// Plan bits as 0/1 followed by both temperatures scaled to `[0, 1]` over
/// the grid's range.
pub fn encode_state(state: &SearchState) -> Vec<f64> {
    let lo = TEMPERATURE_GRID[0];
    let hi = TEMPERATURE_GRID[TEMPERATURE_GRID.len() - 1];
    let mut x = state.plan_vector();
    x.push((state.t_pitch() - lo) / (hi - lo));
    x.push((state.t_dur() - lo) / (hi - lo));
    x
}

/// Inputs → tanh hidden layer → linear outputs. With zero hidden units the
/// network is linear in its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `[hidden × inputs]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `[outputs × width]` where width is `hidden`, or `inputs` when linear.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let width = if hidden == 0 { inputs } else { hidden };
        QNetwork {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * width],
            b2: vec![0.0; outputs],
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut q = Self::zeros(inputs, hidden, outputs);
        let b1 = 1.0 / (inputs.max(1) as f64).sqrt();
        for w in &mut q.w1 {
            *w = rng.gen_range(-b1..b1);
        }
        let b2 = 1.0 / (q.width().max(1) as f64).sqrt();
        for w in &mut q.w2 {
            *w = rng.gen_range(-b2..b2);
        }
        q
    }

    fn width(&self) -> usize {
        if self.hidden == 0 {
            self.inputs
        } else {
            self.hidden
        }
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        if self.hidden == 0 {
            return x.to_vec();
        }
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                (self.b1[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()).tanh()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs, "Q-network input width");
        let h = self.features(x);
        let w = self.width();
        (0..self.outputs).map(|a| self.b2[a] + self.w2[a * w..(a + 1) * w].iter().zip(&h).map(|(w, h)| w * h).sum::<f64>()).collect()
    }

    /// One SGD step on `(Q(x)[action] − target)²`; only that output's error
    /// is propagated. Returns the error before the step.
    pub fn sgd_step(&mut self, x: &[f64], action: usize, target: f64, lr: f64) -> f64 {
        let h = self.features(x);
        let w = self.width();
        let q = self.b2[action] + self.w2[action * w..(action + 1) * w].iter().zip(&h).map(|(w, h)| w * h).sum::<f64>();
        let err = q - target;
        let dq = 2.0 * err;
        if self.hidden > 0 {
            for j in 0..self.hidden {
                let dpre = dq * self.w2[action * w + j] * (1.0 - h[j] * h[j]);
                self.b1[j] -= lr * dpre;
                for (wij, xi) in self.w1[j * self.inputs..(j + 1) * self.inputs].iter_mut().zip(x) {
                    *wij -= lr * dpre * xi;
                }
            }
        }
        for (wj, hj) in self.w2[action * w..(action + 1) * w].iter_mut().zip(&h) {
            *wj -= lr * dq * hj;
        }
        self.b2[action] -= lr * dq;
        err
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite())
    }
}

/// Q-values with invalid actions set to −∞.
pub fn q_values(qnet: &QNetwork, state: &SearchState) -> Vec<f64> {
    let mut q = qnet.forward(&encode_state(state));
    for (v, ok) in q.iter_mut().zip(valid_mask(state)) {
        if !ok {
            *v = f64::NEG_INFINITY;
        }
    }
    q
}

/// ε-greedy over the finite entries of `q`; greedy ties go to the lowest
/// index.
pub fn select_action<R: Rng>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize, SearchError> {
    let valid: Vec<usize> = (0..q.len()).filter(|&i| q[i].is_finite()).collect();
    if valid.is_empty() {
        return Err(SearchError::NoValidAction);
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(valid[rng.gen_range(0..valid.len())]);
    }
    let mut best = valid[0];
    for &i in &valid {
        if q[i] > q[best] {
            best = i;
        }
    }
    Ok(best)
}

/// `r + γ·max_a' Q(s', a')` over the finite entries of `next_q`.
pub fn q_target(reward: f64, next_q: &[f64], gamma: f64) -> f64 {
    if gamma == 0.0 {
        return reward;
    }
    let max = next_q.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * if max == f64::NEG_INFINITY { 0.0 } else { max }
}

/// Watkins update for the transition `(s, a, r, s')`.
pub fn q_update(
    qnet: &mut QNetwork,
    state: &SearchState,
    action: usize,
    reward: f64,
    next: &SearchState,
    hyper: &SearchHyperparams,
    iteration: usize,
) -> Result<f64, SearchError> {
    let target = q_target(reward, &q_values(qnet, next), hyper.gamma);
    if !target.is_finite() {
        return Err(SearchError::NonFinite { iteration });
    }
    let err = qnet.sgd_step(&encode_state(state), action, target, hyper.learning_rate);
    if !qnet.is_finite() {
        return Err(SearchError::NonFinite { iteration });
    }
    Ok(err)
}

/// Result of scoring one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub is_good: bool,
    pub breakdown: Option<RewardBreakdown>,
}

/// Produces the reward of a state for a given rollout seed.
pub trait RewardEnvironment {
    fn n_songs(&self) -> usize;
    fn score(&self, state: &SearchState, seed: u64) -> Result<Outcome, SearchError>;
}

/// Composes with the state's plan and temperatures and evaluates the result.
pub struct CompositionEnvironment<'a> {
    pub params: &'a ModelParams,
    pub context_len: usize,
    pub repr: &'a RepresentationConfig,
    pub corpus: &'a [MultiStreamSequence],
    pub reference: &'a ReferenceCorpus,
    pub reward: &'a RewardConfig,
    pub length: usize,
}

impl CompositionEnvironment<'_> {
    pub fn sampler(&self, state: &SearchState, seed: u64) -> SamplerConfig {
        SamplerConfig {
            plan: state.plan_vector(),
            t_pitch: state.t_pitch(),
            t_dur: state.t_dur(),
            length: self.length,
            seed_source: SeedSource::FromPlan,
            rng_seed: seed,
        }
    }
}

impl RewardEnvironment for CompositionEnvironment<'_> {
    fn n_songs(&self) -> usize {
        self.params.dims().plan_width
    }

    fn score(&self, state: &SearchState, seed: u64) -> Result<Outcome, SearchError> {
        let c = compose(self.params, self.context_len, self.repr, self.corpus, &self.sampler(state, seed))?;
        let b = evaluate(&c.sequence, self.reference, self.reward)?;
        Ok(Outcome { reward: b.total, is_good: b.is_good, breakdown: Some(b) })
    }
}

/// Reward `7·(plan bits equal to a hidden target)/n`, independent of the
/// temperatures and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPlanOracle {
    pub target: Vec<bool>,
    pub good_threshold: f64,
}

impl TargetPlanOracle {
    pub fn random<R: Rng>(n_songs: usize, rng: &mut R) -> Self {
        TargetPlanOracle { target: (0..n_songs).map(|_| rng.gen()).collect(), good_threshold: 5.0 }
    }
}

impl RewardEnvironment for TargetPlanOracle {
    fn n_songs(&self) -> usize {
        self.target.len()
    }

    fn score(&self, state: &SearchState, _seed: u64) -> Result<Outcome, SearchError> {
        let matches = state.plan.iter().zip(&self.target).filter(|(a, b)| a == b).count();
        let reward = 7.0 * matches as f64 / self.target.len() as f64;
        Ok(Outcome { reward, is_good: reward > self.good_threshold, breakdown: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Rl,
    Random,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Rl => "rl",
            Arm::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// State that was scored.
    pub state: SearchState,
    /// Action index taken (RL arm only).
    pub action: Option<usize>,
    pub reward: f64,
    pub is_good: bool,
    pub epsilon: f64,
    /// Good flags among the last `window` iterations, this one included.
    pub window_count: usize,
    pub arm: Arm,
    pub breakdown: Option<RewardBreakdown>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub rl: Vec<IterationLog>,
    pub random: Vec<IterationLog>,
    /// Best distinct RL states by reward, first occurrence wins ties.
    pub best: Vec<(SearchState, f64)>,
    pub qnet: QNetwork,
}

/// Rollout seed shared by both arms at `iteration`.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (iteration as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// For every `i ≥ window − 1`, the good flags in `(i − window, i]`.
pub fn moving_good_count(flags: &[bool], window: usize) -> Vec<usize> {
    if window == 0 || flags.len() < window {
        return Vec::new();
    }
    let mut count = flags[..window].iter().filter(|&&g| g).count();
    let mut out = vec![count];
    for i in window..flags.len() {
        count += flags[i] as usize;
        count -= flags[i - window] as usize;
        out.push(count);
    }
    out
}

fn trailing_count(logs: &[IterationLog], is_good: bool, window: usize) -> usize {
    let start = logs.len().saturating_sub(window - 1);
    logs[start..].iter().filter(|l| l.is_good).count() + is_good as usize
}

/// Runs the RL arm and a uniform-random arm for the same budget. Both arms
/// draw rollout seeds from [`iteration_seed`].
pub fn run_search<E: RewardEnvironment + ?Sized>(env: &E, hyper: &SearchHyperparams, seed: u64) -> Result<SearchReport, SearchError> {
    hyper.validate()?;
    let n = env.n_songs();
    let n_actions = n + 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qnet = QNetwork::init(n + 2, hyper.hidden, n_actions, &mut rng);
    let mut state = SearchState::random(n, hyper.restart_bits, &mut rng);
    let mut rl: Vec<IterationLog> = Vec::with_capacity(hyper.iterations);
    for it in 0..hyper.iterations {
        if hyper.restart_every > 0 && it > 0 && it % hyper.restart_every == 0 {
            state = SearchState::random(n, hyper.restart_bits, &mut rng);
        }
        let epsilon = hyper.epsilon(it);
        let a = select_action(&q_values(&qnet, &state), epsilon, &mut rng)?;
        let next = Action::all(n)[a].apply(&state);
        let out = env.score(&next, iteration_seed(seed, it))?;
        q_update(&mut qnet, &state, a, out.reward, &next, hyper, it)?;
        rl.push(IterationLog {
            iteration: it,
            state: next.clone(),
            action: Some(a),
            reward: out.reward,
            is_good: out.is_good,
            epsilon,
            window_count: trailing_count(&rl, out.is_good, hyper.window),
            arm: Arm::Rl,
            breakdown: out.breakdown,
        });
        state = next;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0001);
    let mut random: Vec<IterationLog> = Vec::with_capacity(hyper.iterations);
    for it in 0..hyper.iterations {
        let s = SearchState::uniform(n, &mut rng);
        let out = env.score(&s, iteration_seed(seed, it))?;
        random.push(IterationLog {
            iteration: it,
            state: s,
            action: None,
            reward: out.reward,
            is_good: out.is_good,
            epsilon: 1.0,
            window_count: trailing_count(&random, out.is_good, hyper.window),
            arm: Arm::Random,
            breakdown: out.breakdown,
        });
    }

    Ok(SearchReport { best: best_states(&rl, hyper.top_k), rl, random, qnet })
}

pub fn best_states(logs: &[IterationLog], k: usize) -> Vec<(SearchState, f64)> {
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.sort_by(|&a, &b| logs[b].reward.total_cmp(&logs[a].reward).then(a.cmp(&b)));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in order {
        if out.len() == k {
            break;
        }
        if seen.insert(logs[i].state.clone()) {
            out.push((logs[i].state.clone(), logs[i].reward));
        }
    }
    out
}

/// CSV `iter,plan_hex,t_pitch,t_dur,reward,is_good,epsilon,window_count,arm`.
pub fn write_iteration_csv<W: Write>(mut w: W, logs: &[IterationLog]) -> std::io::Result<()> {
    writeln!(w, "iter,plan_hex,t_pitch,t_dur,reward,is_good,epsilon,window_count,arm")?;
    for l in logs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            l.iteration,
            l.state.plan_hex(),
            l.state.t_pitch(),
            l.state.t_dur(),
            l.reward,
            l.is_good as u8,
            l.epsilon,
            l.window_count,
            l.arm.name()
        )?;
    }
    Ok(())
}

/// Ranked states with plan bits named by song id.
pub fn write_best_states<W: Write>(mut w: W, best: &[(SearchState, f64)], song_ids: &[String]) -> std::io::Result<()> {
    for (rank, (s, r)) in best.iter().enumerate() {
        let songs: Vec<&str> = s
            .plan
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| song_ids.get(i).map_or("?", |x| x.as_str()))
            .collect();
        writeln!(w, "{}\treward={}\tt_pitch={}\tt_dur={}\tplan={}\tsongs={}", rank + 1, r, s.t_pitch(), s.t_dur(), s.plan_hex(), songs.join(","))?;
    }
    Ok(())
}

/// Finite deterministic MDP used to check Q-learning against value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicMdp {
    /// `next[s][a]`
    pub next: Vec<Vec<usize>>,
    /// `reward[s][a]`
    pub reward: Vec<Vec<f64>>,
}

impl DeterministicMdp {
    /// Two states, two actions. Action 0 stays, action 1 switches state.
    /// Staying in state 0 pays 0, switching from 0 pays 1, staying in state 1
    /// pays 0.5 and switching from 1 pays 0.
    pub fn two_state_chain() -> Self {
        DeterministicMdp { next: vec![vec![0, 1], vec![1, 0]], reward: vec![vec![0.0, 1.0], vec![0.5, 0.0]] }
    }

    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_actions(&self) -> usize {
        self.next[0].len()
    }

    /// Fixed point of the Bellman optimality operator, to `1e-12`.
    pub fn value_iteration(&self, gamma: f64) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.n_actions()]; self.n_states()];
        loop {
            let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            let mut delta = 0.0f64;
            for s in 0..self.n_states() {
                for a in 0..self.n_actions() {
                    let new = self.reward[s][a] + gamma * v[self.next[s][a]];
                    delta = delta.max((new - q[s][a]).abs());
                    q[s][a] = new;
                }
            }
            if delta < 1e-12 {
                return q;
            }
        }
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        (0..self.n_states()).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
    }

    /// `updates` Watkins updates on uniformly drawn `(s, a)` pairs with a
    /// linear network over one-hot states.
    pub fn learn_q<R: Rng>(&self, gamma: f64, learning_rate: f64, updates: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut net = QNetwork::zeros(self.n_states(), 0, self.n_actions());
        for _ in 0..updates {
            let s = rng.gen_range(0..self.n_states());
            let a = rng.gen_range(0..self.n_actions());
            let s2 = self.next[s][a];
            let target = q_target(self.reward[s][a], &net.forward(&self.one_hot(s2)), gamma);
            net.sgd_step(&self.one_hot(s), a, target, learning_rate);
        }
        (0..self.n_states()).map(|s| net.forward(&self.one_hot(s))).collect()
    }
}
