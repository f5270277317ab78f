//! Token-level credit assignment and the clipped group-relative update.
//!
//! Per candidate `i` with holistic score `S_i` and reference log-probs
//! `ℓ_{i,t}`:
//!
//! ```text
//! w_{i,t} = -ℓ_{i,t} / Σ_j -ℓ_{i,j}            token weights
//! r_{i,t} = S_i · w_{i,t},  r̃_i = TruncMean_t r_{i,t}
//! Â_i     = (r̃_i - mean r̃) / std r̃            over the group
//! A_{i,t} = Â_i · w_{i,t} / TruncMean_t w_{i,t}
//! J = 1/G Σ_i 1/T_i Σ_t [min(ρ A, clip(ρ, 1±ε) A) - β·kl]
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aesthetics::AestheticCritic;
use crate::config::{GrpoConfig, Optimizer, RunConfig, ValueScale};
use crate::error::{Error, Result};
use crate::feasibility::{self, FeasibilityReport};
use crate::gate::{holistic_scores, RewardBreakdown};
use crate::policy::{decode, derive_seed, Policy, PolicyParams, TokenTrace};
use crate::scene::{DesignBrief, Layout};

/// Below this many tokens the truncated mean is the plain mean.
pub const TRUNC_MIN_LEN: usize = 10;

pub fn token_weights(ref_logprobs: &[f64]) -> Result<Vec<f64>> {
    if ref_logprobs.is_empty() {
        return Err(Error::InvalidInput("token weights need a nonempty sequence".into()));
    }
    if let Some(bad) = ref_logprobs.iter().find(|&&l| !(l <= 0.0)) {
        return Err(Error::InvalidInput(format!("log-probability {bad} is not <= 0")));
    }
    let surprisal: Vec<f64> = ref_logprobs.iter().map(|&l| -l).collect();
    let total: f64 = surprisal.iter().sum();
    if total > 0.0 {
        Ok(surprisal.iter().map(|s| s / total).collect())
    } else {
        Ok(vec![1.0 / surprisal.len() as f64; surprisal.len()])
    }
}

/// Mean after dropping `⌊α·T⌋` entries from each tail; plain mean when `T < 10`.
pub fn trunc_mean(values: &[f64], alpha: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if values.len() < TRUNC_MIN_LEN {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (alpha * values.len() as f64).floor() as usize;
    let kept = &sorted[k..sorted.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

pub fn token_rewards(s: f64, weights: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| s * w).collect()
}

pub fn trajectory_value(s: f64, weights: &[f64], trunc_alpha: f64) -> f64 {
    trunc_mean(&token_rewards(s, weights), trunc_alpha)
}

/// Population z-scores; all zeros when the spread is below `eps_std`.
pub fn group_advantages(values: &[f64], eps_std: f64) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("group advantages need at least 2 values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if !(std >= eps_std) {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// `Â · r_t / r̃`, evaluated as `Â · w_t / TruncMean(w)` so the sign of `S`
/// cancels. Ratios are 1 when `S = 0` or the weights' truncated mean vanishes.
pub fn token_advantages(a_hat: f64, weights: &[f64], s: f64, trunc_alpha: f64) -> Vec<f64> {
    let m = trunc_mean(weights, trunc_alpha);
    if s == 0.0 || !(m > 0.0) {
        return vec![a_hat; weights.len()];
    }
    weights.iter().map(|w| a_hat * w / m).collect()
}

/// `exp(ref - new) - (ref - new) - 1`.
pub fn kl_term(new_logprob: f64, ref_logprob: f64) -> f64 {
    let d = ref_logprob - new_logprob;
    (d.exp() - d - 1.0).max(0.0)
}

/// One brief's sampled group with every per-candidate quantity.
#[derive(Debug, Clone)]
pub struct GroupBatch {
    pub brief: DesignBrief,
    pub traces: Vec<TokenTrace>,
    pub rewards: Vec<RewardBreakdown>,
    pub weights: Vec<Vec<f64>>,
    pub token_rewards: Vec<Vec<f64>>,
    pub r_tilde: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub advantages: Vec<Vec<f64>>,
}

impl GroupBatch {
    /// Derives weights, values and advantages from traces and scores.
    pub fn assemble(
        brief: DesignBrief,
        traces: Vec<TokenTrace>,
        rewards: Vec<RewardBreakdown>,
        config: &GrpoConfig,
    ) -> Result<Self> {
        if traces.len() != rewards.len() {
            return Err(Error::InvalidInput("one reward per trace is required".into()));
        }
        let weights = traces
            .iter()
            .map(|t| token_weights(&t.ref_logprobs))
            .collect::<Result<Vec<_>>>()?;
        let token_rewards: Vec<Vec<f64>> = weights
            .iter()
            .zip(&rewards)
            .map(|(w, r)| token_rewards(r.s, w))
            .collect();
        let r_tilde: Vec<f64> = token_rewards
            .iter()
            .map(|r| {
                let v = trunc_mean(r, config.trunc_alpha);
                match config.value_scale {
                    ValueScale::PerToken => v,
                    ValueScale::Sequence => v * r.len() as f64,
                }
            })
            .collect();
        let a_hat = group_advantages(&r_tilde, config.eps_std)?;
        let advantages = weights
            .iter()
            .zip(&rewards)
            .zip(&a_hat)
            .map(|((w, r), &a)| token_advantages(a, w, r.s, config.trunc_alpha))
            .collect();
        Ok(Self {
            brief,
            traces,
            rewards,
            weights,
            token_rewards,
            r_tilde,
            a_hat,
            advantages,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateStats {
    pub objective: f64,
    /// Mean token KL term over the batch.
    pub kl: f64,
    /// Fraction of tokens whose clipped branch was selected.
    pub clip_fraction: f64,
}

/// Objective (summed over groups) and its gradient accumulated into `grad`.
pub fn surrogate_objective(
    policy: &Policy,
    params: &PolicyParams,
    batches: &[GroupBatch],
    config: &GrpoConfig,
    grad: &mut [f64],
) -> Result<SurrogateStats> {
    let eps = config.clip_epsilon;
    let beta = config.kl_beta;
    let mut stats = SurrogateStats::default();
    let mut tokens = 0usize;
    let mut clipped = 0usize;
    for batch in batches {
        let g = batch.traces.len() as f64;
        for (trace, adv) in batch.traces.iter().zip(&batch.advantages) {
            policy.accumulate_grad_with(params, &batch.brief, &trace.tokens, trace.temperature, grad, |new| {
                if new.len() != trace.ref_logprobs.len() || adv.len() != new.len() {
                    return Err(Error::InvalidInput("trace does not match the policy vocabulary".into()));
                }
                let scale = 1.0 / (g * new.len() as f64);
                let mut coeffs = Vec::with_capacity(new.len());
                for ((&lp, &rp), &a) in new.iter().zip(&trace.ref_logprobs).zip(adv) {
                    let rho = (lp - rp).exp();
                    let unclipped = rho * a;
                    let clipped_value = rho.clamp(1.0 - eps, 1.0 + eps) * a;
                    // gradient flows through ρ only where the unclipped branch is selected
                    let active = unclipped <= clipped_value;
                    let kl = kl_term(lp, rp);
                    stats.objective += scale * (unclipped.min(clipped_value) - beta * kl);
                    stats.kl += kl;
                    tokens += 1;
                    if !active {
                        clipped += 1;
                    }
                    let surrogate_grad = if active { unclipped } else { 0.0 };
                    let kl_grad = 1.0 - (rp - lp).exp();
                    coeffs.push(scale * (surrogate_grad - beta * kl_grad));
                }
                Ok(coeffs)
            })?;
        }
    }
    if tokens > 0 {
        stats.kl /= tokens as f64;
        stats.clip_fraction = clipped as f64 / tokens as f64;
    }
    Ok(stats)
}

/// First/second moment state for Adam; unused by plain gradient ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Ascent step along `grad`.
    pub fn apply(&mut self, kind: Optimizer, lr: f64, theta: &mut [f64], grad: &[f64]) {
        if lr == 0.0 {
            return;
        }
        match kind {
            Optimizer::Sgd => theta.iter_mut().zip(grad).for_each(|(x, g)| *x += lr * g),
            Optimizer::Adam => {
                self.t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for k in 0..theta.len() {
                    self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * grad[k];
                    self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
                    theta[k] += lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Rewards for one group: feasibility for everyone, the critic only for
/// gate-passing candidates.
pub fn score_group(
    layouts: &[Layout],
    brief: &DesignBrief,
    config: &RunConfig,
    critic: &AestheticCritic,
) -> Result<Vec<RewardBreakdown>> {
    let reports: Vec<FeasibilityReport> = layouts
        .iter()
        .map(|l| feasibility::r_feas(l, brief, &config.feasibility))
        .collect();
    let raw_feas: Vec<f64> = reports.iter().map(|r| r.r_feas).collect();
    let mut scores = Vec::with_capacity(layouts.len());
    for (layout, &rf) in layouts.iter().zip(&raw_feas) {
        scores.push(if config.gate.passes(rf) {
            Some(critic.score(layout, brief)?)
        } else {
            None
        });
    }
    let raw_aes: Vec<Option<f64>> = scores.iter().map(|s| s.as_ref().map(|a| a.r_aes)).collect();
    let mut out = holistic_scores(&raw_feas, &raw_aes, &config.gate)?;
    for ((b, rep), sc) in out.iter_mut().zip(reports).zip(scores) {
        b.feasibility = Some(rep);
        b.aesthetics = sc;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub pass_rate: f64,
    pub mean_r_feas: f64,
    /// `None` when no candidate passed the gate.
    pub mean_r_aes_gated: Option<f64>,
    pub mean_phi_coll: f64,
    pub objective: f64,
    /// Token KL of the updated policy against the sampling snapshot.
    pub kl: f64,
    pub mean_abs_advantage: f64,
    pub candidates: usize,
    pub critic_calls: usize,
    /// Step halvings applied by the KL guard.
    pub backtracks: u32,
}

pub const METRICS_HEADER: &str =
    "step,pass_rate,mean_r_feas,mean_r_aes_gated,mean_phi_coll,objective,kl,mean_abs_advantage";

impl StepMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.pass_rate,
            self.mean_r_feas,
            self.mean_r_aes_gated.map_or(String::new(), |v| v.to_string()),
            self.mean_phi_coll,
            self.objective,
            self.kl,
            self.mean_abs_advantage
        )
    }
}

/// Everything a step reads but never mutates.
pub struct TrainContext<'a> {
    pub policy: &'a Policy,
    pub critic: &'a AestheticCritic<'a>,
    pub config: &'a RunConfig,
}

/// Sample, score and update once over `briefs` (`(index, brief)` pairs;
/// the index keys the sampling stream).
pub fn train_step(
    ctx: &TrainContext,
    params: &mut PolicyParams,
    optimizer: &mut OptimizerState,
    briefs: &[(usize, &DesignBrief)],
    step: u64,
) -> Result<(StepMetrics, Vec<GroupBatch>)> {
    let cfg = &ctx.config.grpo;
    let calls_before = ctx.critic.calls();
    let step_seed = derive_seed(cfg.rng_seed, step);
    let mut batches = Vec::with_capacity(briefs.len());
    for &(index, brief) in briefs {
        let traces = ctx.policy.sample_group(
            params,
            brief,
            cfg.group_size,
            cfg.temperature,
            derive_seed(step_seed, index as u64),
        )?;
        let layouts = traces
            .iter()
            .map(|t| decode(&t.tokens, brief, ctx.policy.catalog(), ctx.policy.vocab()).map(|d| d.0))
            .collect::<Result<Vec<_>>>()?;
        let rewards = score_group(&layouts, brief, ctx.config, ctx.critic)?;
        batches.push(GroupBatch::assemble(brief.clone(), traces, rewards, cfg)?);
    }
    let mut grad = params.zeros_like();
    let stats = surrogate_objective(ctx.policy, params, &batches, cfg, &mut grad)?;
    let before = params.theta.clone();
    optimizer.apply(cfg.optimizer, cfg.learning_rate, &mut params.theta, &grad);
    let mut kl = snapshot_kl(ctx.policy, params, &batches)?;
    let mut backtracks = 0;
    while cfg.max_kl > 0.0 && !(kl <= cfg.max_kl) && backtracks < cfg.max_backtracks {
        for (t, b) in params.theta.iter_mut().zip(&before) {
            *t = b + 0.5 * (*t - b);
        }
        kl = snapshot_kl(ctx.policy, params, &batches)?;
        backtracks += 1;
    }
    if !params.is_finite() {
        return Err(Error::invariant("policy parameters", "update produced a non-finite value"));
    }
    params.step += 1;

    let all: Vec<&RewardBreakdown> = batches.iter().flat_map(|b| &b.rewards).collect();
    let n = all.len() as f64;
    let gated: Vec<f64> = all.iter().filter_map(|r| r.r_aes_raw).collect();
    let adv: Vec<f64> = batches.iter().flat_map(|b| b.advantages.iter().flatten().copied()).collect();
    let metrics = StepMetrics {
        step,
        pass_rate: all.iter().filter(|r| r.gated).count() as f64 / n,
        mean_r_feas: all.iter().map(|r| r.r_feas_raw).sum::<f64>() / n,
        mean_r_aes_gated: (!gated.is_empty()).then(|| gated.iter().sum::<f64>() / gated.len() as f64),
        mean_phi_coll: all
            .iter()
            .map(|r| r.feasibility.as_ref().map_or(0.0, |f| f.phi_coll))
            .sum::<f64>()
            / n,
        objective: stats.objective,
        kl,
        backtracks,
        mean_abs_advantage: if adv.is_empty() {
            0.0
        } else {
            adv.iter().map(|a| a.abs()).sum::<f64>() / adv.len() as f64
        },
        candidates: all.len(),
        critic_calls: ctx.critic.calls() - calls_before,
    };
    Ok((metrics, batches))
}

/// Mean token KL of `params` against the log-probs recorded at sampling.
fn snapshot_kl(policy: &Policy, params: &PolicyParams, batches: &[GroupBatch]) -> Result<f64> {
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for batch in batches {
        for trace in &batch.traces {
            let new = policy.log_probs(params, &batch.brief, &trace.tokens, trace.temperature)?;
            sum += new.iter().zip(&trace.ref_logprobs).map(|(&n, &r)| kl_term(n, r)).sum::<f64>();
            tokens += new.len();
        }
    }
    Ok(if tokens > 0 { sum / tokens as f64 } else { 0.0 })
}

/// Round-robin slice of `per_step` briefs (all when 0) for `step`.
fn briefs_for(briefs: &[DesignBrief], per_step: usize, step: u64) -> Vec<(usize, &DesignBrief)> {
    let n = briefs.len();
    let k = match per_step {
        0 => n,
        k => k.min(n),
    };
    let start = (step as usize * k) % n;
    (0..k)
        .map(|j| {
            let idx = (start + j) % n;
            (idx, &briefs[idx])
        })
        .collect()
}

/// Multi-step driver owning the parameters and optimizer state.
pub struct Trainer<'a> {
    ctx: TrainContext<'a>,
    briefs: Vec<DesignBrief>,
    pub params: PolicyParams,
    optimizer: OptimizerState,
    pub history: Vec<StepMetrics>,
}

impl<'a> Trainer<'a> {
    pub fn new(ctx: TrainContext<'a>, briefs: Vec<DesignBrief>, params: PolicyParams) -> Result<Self> {
        if briefs.is_empty() {
            return Err(Error::InvalidInput("training needs at least one brief".into()));
        }
        ctx.config.validate()?;
        let optimizer = OptimizerState::new(params.theta.len());
        Ok(Self {
            ctx,
            briefs,
            params,
            optimizer,
            history: Vec::new(),
        })
    }

    pub fn step(&mut self) -> Result<&StepMetrics> {
        let step = self.params.step;
        let briefs = briefs_for(&self.briefs, self.ctx.config.grpo.briefs_per_step, step);
        let (metrics, _) = train_step(&self.ctx, &mut self.params, &mut self.optimizer, &briefs, step)?;
        self.history.push(metrics);
        Ok(self.history.last().expect("just pushed"))
    }

    /// Runs to `grpo.max_steps`, writing `metrics.csv`, `config.resolved`
    /// and `checkpoints/step_N` under `out` when given.
    pub fn run(&mut self, out: Option<&Path>) -> Result<()> {
        let cfg = self.ctx.config.grpo.clone();
        if let Some(dir) = out {
            std::fs::create_dir_all(dir.join("checkpoints"))?;
            std::fs::write(dir.join("config.resolved"), self.ctx.config.resolved())?;
        }
        while self.params.step < cfg.max_steps {
            let m = self.step()?;
            log::debug!("step {} pass_rate {:.3} objective {:.4}", m.step, m.pass_rate, m.objective);
            let done = self.params.step;
            if let Some(dir) = out {
                if cfg.checkpoint_every > 0 && done.is_multiple_of(cfg.checkpoint_every) && done < cfg.max_steps {
                    self.write_checkpoint(dir)?;
                }
            }
        }
        if let Some(dir) = out {
            self.write_checkpoint(dir)?;
            std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        }
        Ok(())
    }

    fn write_checkpoint(&self, dir: &Path) -> Result<()> {
        let path = dir.join("checkpoints").join(format!("step_{}", self.params.step));
        std::fs::write(path, self.ctx.policy.save_checkpoint(&self.params)?)?;
        Ok(())
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for m in &self.history {
            let _ = writeln!(s, "{}", m.csv_row());
        }
        s
    }
}
