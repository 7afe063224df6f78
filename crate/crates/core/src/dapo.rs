//! Group-relative policy optimization with decoupled clipping and dynamic
//! sampling.
//!
//! Each visited state yields a [`GroupSample`]: `n` actions drawn from the
//! frozen snapshot, their shaped rewards and their group-normalized
//! advantages `(r_i - mean) / (std + eps)` (population std). Groups whose
//! rewards are all equal carry no signal and are filtered out. The remaining
//! samples maximize the clipped surrogate
//!
//! ```text
//! min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)
//! ```
//!
//! averaged over every (group, member) pair, by plain gradient ascent.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ActionVector, EnvError, TradingEnv};
use crate::exec::Exec;
use crate::policy::{self, Policy, PolicyError, PolicyParams, PolicySnapshot};
use crate::reward::{self, RewardConfig, RewardError, Weighting};

/// Samples per parallel work unit in the loss; fixed so the floating-point
/// reduction order never depends on the thread count.
const LOSS_CHUNK: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum DapoError {
    #[error("every group in epoch {epoch} had uniform rewards; nothing to learn from")]
    AllFiltered { epoch: usize },
    #[error("non-finite ratio or advantage in the surrogate loss")]
    NonFiniteLoss,
    #[error("empty training batch")]
    EmptyBatch,
    #[error("parameter shape mismatch")]
    ShapeMismatch,
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Actions sampled per state.
    pub group_size: usize,
    pub adv_epsilon: f64,
    pub eps_low: f64,
    pub eps_high: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// States visited per epoch; 0 means one full episode from day 0.
    pub steps_per_epoch: usize,
    /// Passes over the kept groups per snapshot refresh.
    pub update_epochs: usize,
    /// Groups per ascent step; 0 uses the whole batch.
    pub minibatch_groups: usize,
    /// Absolute spread below which a group counts as uniform.
    pub uniform_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            adv_epsilon: 1e-8,
            eps_low: 0.2,
            eps_high: 0.28,
            learning_rate: 3e-4,
            epochs: 100,
            steps_per_epoch: 0,
            update_epochs: 4,
            minibatch_groups: 32,
            uniform_tolerance: 1e-12,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), DapoError> {
        let bad = |m: &str| Err(DapoError::InvalidConfig(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be >= 2");
        }
        if !(self.eps_low > 0.0 && self.eps_low < 1.0) {
            return bad("eps_low must lie in (0, 1)");
        }
        if !(self.eps_high > 0.0 && self.eps_high.is_finite()) {
            return bad("eps_high must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.adv_epsilon >= 0.0 && self.uniform_tolerance >= 0.0) {
            return bad("adv_epsilon and uniform_tolerance must be >= 0");
        }
        if self.update_epochs == 0 {
            return bad("update_epochs must be >= 1");
        }
        Ok(())
    }

    pub fn clip(&self) -> Clip {
        Clip {
            eps_low: self.eps_low,
            eps_high: self.eps_high,
        }
    }
}

/// Ratio band `[1 - eps_low, 1 + eps_high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Clip {
    pub fn symmetric(eps: f64) -> Self {
        Self {
            eps_low: eps,
            eps_high: eps,
        }
    }
}

/// `(r_i - mean) / (pop_std + adv_epsilon)` for every reward of one group.
pub fn group_advantage(rewards: &[f64], adv_epsilon: f64) -> Vec<f64> {
    // the mean of equal floats need not round back to their value
    if is_uniform(rewards, 0.0) {
        return vec![0.0; rewards.len()];
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    rewards
        .iter()
        .map(|r| (r - mean) / (std + adv_epsilon))
        .collect()
}

/// True when `max - min <= tolerance`.
pub fn is_uniform(rewards: &[f64], tolerance: f64) -> bool {
    let (lo, hi) = rewards
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(*r), hi.max(*r))
        });
    rewards.is_empty() || hi - lo <= tolerance
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    /// Normalized observation the actions were drawn for.
    pub obs: Vec<f64>,
    pub actions: Vec<ActionVector>,
    pub raw_rewards: Vec<f64>,
    pub shaped_rewards: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Dynamic-sampling verdict; `false` for uniform-reward groups.
    pub kept: bool,
}

impl GroupSample {
    pub fn new(
        obs: Vec<f64>,
        actions: Vec<ActionVector>,
        raw_rewards: Vec<f64>,
        shaped_rewards: Vec<f64>,
        old_log_probs: Vec<f64>,
        cfg: &OptimizerConfig,
    ) -> Self {
        let advantages = group_advantage(&shaped_rewards, cfg.adv_epsilon);
        let kept = !is_uniform(&shaped_rewards, cfg.uniform_tolerance);
        Self {
            obs,
            actions,
            raw_rewards,
            shaped_rewards,
            old_log_probs,
            advantages,
            kept,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Keep the informative groups, in order.
pub fn dynamic_filter(
    groups: Vec<GroupSample>,
    epoch: usize,
) -> Result<Vec<GroupSample>, DapoError> {
    let total = groups.len();
    let kept: Vec<GroupSample> = groups.into_iter().filter(|g| g.kept).collect();
    log::debug!(
        "epoch {epoch}: dynamic sampling dropped {} of {total} groups",
        total - kept.len()
    );
    if kept.is_empty() {
        return Err(DapoError::AllFiltered { epoch });
    }
    Ok(kept)
}

/// One clipped surrogate term.
pub fn clipped_term(ratio: f64, advantage: f64, clip: Clip) -> f64 {
    let clipped = ratio.clamp(1.0 - clip.eps_low, 1.0 + clip.eps_high);
    (ratio * advantage).min(clipped * advantage)
}

/// d term / d ratio: the advantage while the unclipped branch is selected,
/// zero once clipping takes over.
fn clipped_slope(ratio: f64, advantage: f64, clip: Clip) -> f64 {
    let clipped = ratio.clamp(1.0 - clip.eps_low, 1.0 + clip.eps_high);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

/// Elementwise [`clipped_term`] over paired slices.
pub fn surrogate_terms(ratios: &[f64], advantages: &[f64], clip: Clip) -> Vec<f64> {
    let lo = 1.0 - clip.eps_low;
    let hi = 1.0 + clip.eps_high;
    let unclipped = ratios.iter().zip(advantages).map(|(r, a)| r * a);
    let clipped = ratios
        .iter()
        .zip(advantages)
        .map(|(r, a)| r.clamp(lo, hi) * a);
    unclipped.zip(clipped).map(|(u, c)| u.min(c)).collect()
}

/// Mean surrogate over every member of every kept group in `batch`, and its
/// exact gradient. Groups with `kept == false` are skipped entirely.
pub fn dapo_loss(
    params: &PolicyParams,
    batch: &[GroupSample],
    clip: Clip,
    exec: Exec,
) -> Result<(f64, PolicyParams), DapoError> {
    let items: Vec<(&GroupSample, usize)> = batch
        .iter()
        .filter(|g| g.kept)
        .flat_map(|g| (0..g.len()).map(move |i| (g, i)))
        .collect();
    if items.is_empty() {
        return Err(DapoError::EmptyBatch);
    }
    let scale = 1.0 / items.len() as f64;
    let partials = exec.map_chunks(
        &items,
        LOSS_CHUNK,
        |chunk| -> Result<(f64, Vec<f64>), DapoError> {
            let mut grad = vec![0.0; params.len()];
            let mut sum = 0.0;
            for &(g, i) in chunk {
                let adv = g.advantages[i];
                let old = g.old_log_probs[i];
                let mut term = 0.0;
                policy::accumulate_grad_with(
                    params,
                    &g.obs,
                    g.actions[i].as_slice(),
                    &mut grad,
                    |lp| {
                        let ratio = (lp - old).exp();
                        if !ratio.is_finite() || !adv.is_finite() {
                            return Err(DapoError::NonFiniteLoss);
                        }
                        term = clipped_term(ratio, adv, clip);
                        Ok(clipped_slope(ratio, adv, clip) * ratio * scale)
                    },
                )?;
                sum += term;
            }
            Ok((sum, grad))
        },
    );
    let mut loss = 0.0;
    let mut grad = PolicyParams::zeros(params.arch().clone());
    for part in partials {
        let (s, g) = part?;
        loss += s;
        grad.as_mut_slice()
            .iter_mut()
            .zip(&g)
            .for_each(|(a, b)| *a += b);
    }
    Ok((loss * scale, grad))
}

/// `params + learning_rate * gradient`, with `log_std` re-clamped.
pub fn sgd_update(
    params: &PolicyParams,
    gradient: &PolicyParams,
    learning_rate: f64,
) -> Result<PolicyParams, DapoError> {
    if params.arch() != gradient.arch() {
        return Err(DapoError::ShapeMismatch);
    }
    let mut next = params.clone();
    next.as_mut_slice()
        .iter_mut()
        .zip(gradient.as_slice())
        .for_each(|(p, g)| *p += learning_rate * g);
    next.clamp_log_std();
    Ok(next)
}

/// One ascent step on `batch`; returns the new parameters and the loss.
pub fn update_step(
    params: &PolicyParams,
    batch: &[GroupSample],
    cfg: &OptimizerConfig,
    exec: Exec,
) -> Result<(PolicyParams, f64), DapoError> {
    let (loss, grad) = dapo_loss(params, batch, cfg.clip(), exec)?;
    Ok((sgd_update(params, &grad, cfg.learning_rate)?, loss))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_raw_reward: f64,
    pub mean_shaped_reward: f64,
    pub filtered_fraction: f64,
    pub loss: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub const HEADER: &'static str =
        "epoch\tmean_raw_reward\tmean_shaped_reward\tfiltered_fraction\tloss";

    /// Header line plus one tab-separated line per epoch. Wall-clock time is
    /// left out so that seeded runs produce identical logs; see
    /// [`TrainLog::timings_tsv`].
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.epoch, e.mean_raw_reward, e.mean_shaped_reward, e.filtered_fraction, e.loss
            ));
        }
        out
    }

    /// `epoch\twall_seconds` per epoch.
    pub fn timings_tsv(&self) -> String {
        let mut out = String::from("epoch\twall_seconds\n");
        for e in &self.epochs {
            out.push_str(&format!("{}\t{:.3}\n", e.epoch, e.wall_seconds));
        }
        out
    }

    /// Same log with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut log = self.clone();
        log.epochs.iter_mut().for_each(|e| e.wall_seconds = 0.0);
        log
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub log: TrainLog,
}

/// Collect one group per visited state using the snapshot's policy.
fn collect(
    env: &TradingEnv,
    policy: &mut Policy,
    snapshot: &PolicySnapshot,
    state: &mut crate::env::EnvState,
    steps: usize,
    opt: &OptimizerConfig,
    reward_cfg: &RewardConfig,
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Result<Vec<GroupSample>, DapoError> {
    let mut groups = Vec::with_capacity(steps);
    for _ in 0..steps {
        if env.is_done(state) {
            *state = env.reset();
        }
        let raw_obs = state.features();
        policy.normalizer.update(&raw_obs);
        let obs = policy.normalizer.normalize(&raw_obs);
        let actions = policy::sample_group(snapshot.params(), &obs, opt.group_size, rng)?;
        let outcomes = env.peek_group(state, &actions, exec)?;
        let pre_trade = state.holdings_values();
        let mut raw = Vec::with_capacity(outcomes.len());
        let mut shaped = Vec::with_capacity(outcomes.len());
        for o in &outcomes {
            let weights = match reward_cfg.weighting {
                Weighting::PostTrade => &o.post_trade_values,
                Weighting::PreTrade => &pre_trade,
            };
            let agg = reward::aggregate(weights, &state.sentiment, &state.risk)?;
            raw.push(o.raw_reward);
            shaped.push(reward::shape_reward(o.raw_reward, &agg, reward_cfg));
        }
        let old_log_probs = exec
            .map(&actions, |a| {
                policy::log_prob(snapshot.params(), &obs, a.as_slice())
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        groups.push(GroupSample::new(
            obs,
            actions,
            raw,
            shaped,
            old_log_probs,
            opt,
        ));
        *state = outcomes
            .into_iter()
            .next()
            .expect("group is non-empty")
            .next_state;
    }
    Ok(groups)
}

/// Train `policy` on the environment's market.
///
/// Per epoch: freeze a snapshot, visit states collecting one group each
/// (the episode advances with the group's first action), drop uniform
/// groups, then run `update_epochs` shuffled passes of minibatch ascent.
pub fn train(
    env: &TradingEnv,
    mut policy: Policy,
    opt: &OptimizerConfig,
    reward_cfg: &RewardConfig,
    exec: Exec,
) -> Result<TrainOutcome, DapoError> {
    opt.validate()?;
    reward_cfg.validate()?;
    if env.n_days() < 2 {
        return Err(DapoError::InvalidConfig(
            "training needs at least two days of data".into(),
        ));
    }
    if policy.input_dim() != env.feature_dim() || policy.action_dim() != env.n_tickers() {
        return Err(DapoError::ShapeMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut log = TrainLog::default();
    let mut state = env.reset();

    for epoch in 0..opt.epochs {
        let started = Instant::now();
        let steps = if opt.steps_per_epoch == 0 {
            state = env.reset();
            env.n_days() - 1
        } else {
            opt.steps_per_epoch
        };
        let snapshot = PolicySnapshot::of(&policy.params);
        let groups = collect(
            env,
            &mut policy,
            &snapshot,
            &mut state,
            steps,
            opt,
            reward_cfg,
            &mut rng,
            exec,
        )?;

        let members: usize = groups.iter().map(GroupSample::len).sum();
        let mean_raw = groups.iter().flat_map(|g| &g.raw_rewards).sum::<f64>() / members as f64;
        let mean_shaped =
            groups.iter().flat_map(|g| &g.shaped_rewards).sum::<f64>() / members as f64;
        let total = groups.len();
        let kept = dynamic_filter(groups, epoch)?;
        let filtered_fraction = (total - kept.len()) as f64 / total as f64;

        let mb = if opt.minibatch_groups == 0 {
            kept.len()
        } else {
            opt.minibatch_groups
        };
        let mut order: Vec<usize> = (0..kept.len()).collect();
        let mut losses = Vec::new();
        for _ in 0..opt.update_epochs {
            order.shuffle(&mut rng);
            for idx in order.chunks(mb) {
                let batch: Vec<GroupSample> = idx.iter().map(|&i| kept[i].clone()).collect();
                let (next, loss) = update_step(&policy.params, &batch, opt, exec)?;
                if !next.is_finite() {
                    return Err(DapoError::NonFiniteLoss);
                }
                policy.params = next;
                losses.push(loss);
            }
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        log::info!("epoch {epoch}: raw {mean_raw:.6} shaped {mean_shaped:.6} filtered {filtered_fraction:.3} loss {loss:.6}");
        log.epochs.push(EpochStats {
            epoch,
            mean_raw_reward: mean_raw,
            mean_shaped_reward: mean_shaped,
            filtered_fraction,
            loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { policy, log })
}
