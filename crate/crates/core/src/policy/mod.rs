//! Small autoregressive layout policy with exact reverse-mode gradients.
//!
//! An Elman recurrence conditioned on brief features `f` and a prefix
//! summary `c_t` (see [`context`]):
//!
//! ```text
//! u   = W_in f + b_in
//! h_t = tanh(W_rec h_{t-1} + E[x_t] + P[t] + C_h c_t + u),   h_{-1} = 0
//! z_t = W_out h_t + C_z c_t + b_out
//! π(x_{t+1} | x_≤t) = softmax over the grammar-legal set of z_t / τ
//! ```
//!
//! Parameter layout in the flat vector: `W_in (H×F)`, `b_in (H)`,
//! `E (V×H)`, `P (L×H)`, `W_rec (H×H)`, `C_h (H×C)`, `W_out (V×H)`,
//! `b_out (V)`, `C_z (V×C)`, all row-major. The output head (`W_out`,
//! `b_out`, `C_z`) starts at zero so a fresh policy is uniform over every
//! legal set.

pub mod codec;
pub mod context;
pub mod features;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aesthetics::embedding::Lexicon;
use crate::aesthetics::HarmonyTemplates;
use crate::error::{Error, Result};
use crate::scene::{Catalog, DesignBrief};

pub use codec::{
    decode, encode, DecodeStatus, GrammarState, TokenId, TokenKind, TokenVocab, BOS, EOS,
    MAX_SEQUENCE_LEN,
};
pub use features::FeatureSpec;
use context::PrefixContext;

pub const MAX_PARAMS: usize = 50_000;
/// At or below this temperature sampling is greedy (argmax, lowest id on ties).
pub const GREEDY_TEMPERATURE: f64 = 1e-6;
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub masking: bool,
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: 48,
            masking: true,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
    pub step: u64,
}

impl PolicyParams {
    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.theta.len()]
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }
}

/// One sampled sequence. `logprobs[k]` and `ref_logprobs[k]` belong to
/// `tokens[k + 1]`; BOS is given, not predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTrace {
    pub tokens: Vec<TokenId>,
    pub logprobs: Vec<f64>,
    pub ref_logprobs: Vec<f64>,
    pub temperature: f64,
    pub status: DecodeStatus,
}

impl TokenTrace {
    /// Number of predicted tokens.
    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Offsets {
    w_in: usize,
    b_in: usize,
    embed: usize,
    pos: usize,
    w_rec: usize,
    ctx_h: usize,
    w_out: usize,
    b_out: usize,
    ctx_z: usize,
    /// Context width.
    c: usize,
    len: usize,
}

impl Offsets {
    fn new(h: usize, f: usize, v: usize, l: usize, c: usize) -> Self {
        let w_in = 0;
        let b_in = w_in + h * f;
        let embed = b_in + h;
        let pos = embed + v * h;
        let w_rec = pos + l * h;
        let ctx_h = w_rec + h * h;
        let w_out = ctx_h + h * c;
        let b_out = w_out + v * h;
        let ctx_z = b_out + v;
        Self {
            w_in,
            b_in,
            embed,
            pos,
            w_rec,
            ctx_h,
            w_out,
            b_out,
            ctx_z,
            c,
            len: ctx_z + v * c,
        }
    }
}

/// Legal next-token ids (ascending) with their tempered log-probabilities.
struct Dist {
    legal: Vec<usize>,
    logprobs: Vec<f64>,
}

impl Dist {
    fn logprob_of(&self, token: usize) -> Option<f64> {
        self.legal
            .binary_search(&token)
            .ok()
            .map(|i| self.logprobs[i])
    }
}

/// Teacher-forced activations for one sequence.
struct Forward {
    hidden: Vec<Vec<f64>>,
    contexts: Vec<Vec<(usize, f64)>>,
    dists: Vec<Dist>,
    logprobs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Policy {
    catalog: Catalog,
    vocab: TokenVocab,
    features: FeatureSpec,
    config: PolicyConfig,
    offsets: Offsets,
}

/// Deterministic per-candidate stream seed (splitmix64 finalizer over both parts).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mask_bits(mask: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Position of `u ∈ [0,1)` in the cumulative distribution of `exp(logprobs)`.
fn inverse_cdf(logprobs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, lp) in logprobs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    logprobs.len() - 1
}

impl Policy {
    pub fn new(
        catalog: &Catalog,
        lexicon: &Lexicon,
        templates: &HarmonyTemplates,
        config: PolicyConfig,
    ) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::InvalidInput("policy.hidden must be >= 1".into()));
        }
        if !(config.init_scale >= 0.0 && config.init_scale.is_finite()) {
            return Err(Error::InvalidInput("policy.init_scale must be finite and >= 0".into()));
        }
        let vocab = TokenVocab::new(catalog);
        if vocab.len() > codec::MAX_VOCAB {
            return Err(Error::InvalidInput(format!(
                "vocabulary of {} tokens exceeds {}",
                vocab.len(),
                codec::MAX_VOCAB
            )));
        }
        let features = FeatureSpec::new(catalog.categories().len(), lexicon, templates);
        let offsets = Offsets::new(
            config.hidden,
            features.dimension(),
            vocab.len(),
            MAX_SEQUENCE_LEN,
            context::context_dimension(vocab.n_categories()),
        );
        if offsets.len > MAX_PARAMS {
            return Err(Error::InvalidInput(format!(
                "policy has {} parameters; the limit is {MAX_PARAMS}",
                offsets.len
            )));
        }
        Ok(Self {
            catalog: catalog.clone(),
            vocab,
            features,
            config,
            offsets,
        })
    }

    pub fn vocab(&self) -> &TokenVocab {
        &self.vocab
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.offsets.len
    }

    pub fn features(&self, brief: &DesignBrief) -> Vec<f64> {
        self.features.features(brief)
    }

    /// Digest of everything that fixes the meaning of the parameter vector.
    pub fn vocab_hash(&self) -> String {
        codec::hex_digest(
            format!(
                "{};{};context:{};hidden:{};len:{}",
                self.vocab.hash(),
                self.features.describe(),
                self.offsets.c,
                self.config.hidden,
                self.offsets.len
            )
            .as_bytes(),
        )
    }

    /// Random recurrence and embeddings, zero output head.
    pub fn init_params(&self, seed: u64) -> PolicyParams {
        let o = self.offsets;
        let h = self.config.hidden as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; o.len];
        let s = self.config.init_scale;
        let rec = s.min(1.0 / h.sqrt());
        for (k, x) in theta[..o.w_out].iter_mut().enumerate() {
            let scale = if (o.w_rec..o.ctx_h).contains(&k) { rec } else { s };
            *x = rng.gen_range(-1.0..1.0) * scale * 3f64.sqrt();
        }
        for x in &mut theta[o.b_in..o.embed] {
            *x = 0.0;
        }
        PolicyParams { theta, step: 0 }
    }

    fn check_params(&self, params: &PolicyParams) -> Result<()> {
        if params.theta.len() != self.offsets.len {
            return Err(Error::InvalidInput(format!(
                "parameter vector has {} entries, policy expects {}",
                params.theta.len(),
                self.offsets.len
            )));
        }
        Ok(())
    }

    fn check_temperature(temperature: f64) -> Result<()> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput("temperature must be finite and > 0".into()));
        }
        Ok(())
    }

    fn input_bias(&self, theta: &[f64], feats: &[f64]) -> Vec<f64> {
        let o = self.offsets;
        let hd = self.config.hidden;
        let f = feats.len();
        (0..hd)
            .map(|r| dot(&theta[o.w_in + r * f..o.w_in + (r + 1) * f], feats) + theta[o.b_in + r])
            .collect()
    }

    fn sparse_dot(&self, theta: &[f64], row: usize, ctx: &[(usize, f64)]) -> f64 {
        ctx.iter().map(|&(j, v)| theta[row + j] * v).sum()
    }

    /// `h_t` from `h_{t-1}`, the token at position `t`, the prefix context
    /// and the input bias.
    fn step_hidden(
        &self,
        theta: &[f64],
        prev: &[f64],
        token: TokenId,
        t: usize,
        ctx: &[(usize, f64)],
        u: &[f64],
    ) -> Vec<f64> {
        let o = self.offsets;
        let hd = self.config.hidden;
        let e = o.embed + token as usize * hd;
        let p = o.pos + t * hd;
        (0..hd)
            .map(|r| {
                let rec = dot(&theta[o.w_rec + r * hd..o.w_rec + (r + 1) * hd], prev);
                let c = self.sparse_dot(theta, o.ctx_h + r * o.c, ctx);
                (rec + theta[e + r] + theta[p + r] + c + u[r]).tanh()
            })
            .collect()
    }

    fn logit(&self, theta: &[f64], h: &[f64], ctx: &[(usize, f64)], k: usize) -> f64 {
        let o = self.offsets;
        let hd = self.config.hidden;
        dot(&theta[o.w_out + k * hd..o.w_out + (k + 1) * hd], h)
            + self.sparse_dot(theta, o.ctx_z + k * o.c, ctx)
            + theta[o.b_out + k]
    }

    /// Tempered log-softmax over the legal set only.
    fn dist(&self, theta: &[f64], h: &[f64], ctx: &[(usize, f64)], mask: u128, temperature: f64) -> Dist {
        let legal = mask_bits(mask);
        let scaled: Vec<f64> = legal
            .iter()
            .map(|&k| self.logit(theta, h, ctx, k) / temperature)
            .collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        Dist {
            legal,
            logprobs: scaled.iter().map(|z| (z - lse).min(0.0)).collect(),
        }
    }

    fn validate_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        if tokens.first() != Some(&BOS) {
            return Err(Error::InvalidInput("token sequence must start with BOS".into()));
        }
        if tokens.len() > MAX_SEQUENCE_LEN {
            return Err(Error::InvalidInput(format!(
                "sequence of {} tokens exceeds the {MAX_SEQUENCE_LEN}-token cap",
                tokens.len()
            )));
        }
        if let Some(bad) = tokens.iter().find(|&&t| t as usize >= self.vocab.len()) {
            return Err(Error::InvalidInput(format!("token id {bad} is out of vocabulary")));
        }
        Ok(())
    }

    fn forward(
        &self,
        theta: &[f64],
        brief: &DesignBrief,
        feats: &[f64],
        tokens: &[TokenId],
        temperature: f64,
    ) -> Result<Forward> {
        self.validate_tokens(tokens)?;
        let u = self.input_bias(theta, feats);
        let mut state = GrammarState::start();
        let mut prefix = PrefixContext::new(brief, self.vocab.n_categories());
        let mut prev = vec![0.0; self.config.hidden];
        let steps = tokens.len() - 1;
        let mut out = Forward {
            hidden: Vec::with_capacity(steps),
            contexts: Vec::with_capacity(steps),
            dists: Vec::with_capacity(steps),
            logprobs: Vec::with_capacity(steps),
        };
        for t in 0..steps {
            prefix.advance(&self.vocab, tokens[t]);
            let ctx = prefix.sparse();
            let h = self.step_hidden(theta, &prev, tokens[t], t, &ctx, &u);
            let mask = state.legal_mask(&self.vocab, self.config.masking);
            let dist = self.dist(theta, &h, &ctx, mask, temperature);
            let next = tokens[t + 1];
            let lp = dist.logprob_of(next as usize).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "token {} at position {} is not legal here",
                    self.vocab.name(next),
                    t + 1
                ))
            })?;
            out.logprobs.push(lp);
            out.dists.push(dist);
            state.advance(&self.vocab, next);
            out.hidden.push(h.clone());
            out.contexts.push(ctx);
            prev = h;
        }
        Ok(out)
    }

    /// Teacher-forced per-token log-probabilities (one per token after BOS).
    pub fn log_probs(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        tokens: &[TokenId],
        temperature: f64,
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        Self::check_temperature(temperature)?;
        let feats = self.features(brief);
        Ok(self.forward(&params.theta, brief, &feats, tokens, temperature)?.logprobs)
    }

    /// Adds `∇_θ Σ_t weights[t] · log π(tokens[t+1] | tokens[..=t])` into `grad`.
    pub fn accumulate_grad(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        tokens: &[TokenId],
        weights: &[f64],
        temperature: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if tokens.is_empty() || weights.len() != tokens.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} token weights, got {}",
                tokens.len().saturating_sub(1),
                weights.len()
            )));
        }
        if weights.iter().all(|&w| w == 0.0) {
            self.check_params(params)?;
            return Ok(());
        }
        self.accumulate_grad_with(params, brief, tokens, temperature, grad, |_| Ok(weights.to_vec()))
            .map(|_| ())
    }

    /// One forward pass; `weights_for` maps the per-token log-probs to the
    /// per-token weights, whose weighted log-likelihood gradient is added
    /// into `grad`. Returns the log-probs.
    pub fn accumulate_grad_with<F>(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        tokens: &[TokenId],
        temperature: f64,
        grad: &mut [f64],
        weights_for: F,
    ) -> Result<Vec<f64>>
    where
        F: FnOnce(&[f64]) -> Result<Vec<f64>>,
    {
        self.check_params(params)?;
        Self::check_temperature(temperature)?;
        if grad.len() != self.offsets.len {
            return Err(Error::InvalidInput("gradient buffer has the wrong shape".into()));
        }
        let theta = &params.theta;
        let feats = self.features(brief);
        let fwd = self.forward(theta, brief, &feats, tokens, temperature)?;
        let weights = weights_for(&fwd.logprobs)?;
        if weights.len() != fwd.logprobs.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} token weights, got {}",
                fwd.logprobs.len(),
                weights.len()
            )));
        }
        let o = self.offsets;
        let hd = self.config.hidden;
        let nf = feats.len();
        let zero = vec![0.0; hd];
        let mut dh_next = vec![0.0; hd];
        let mut du = vec![0.0; hd];
        let mut da = vec![0.0; hd];
        for t in (0..weights.len()).rev() {
            let h = &fwd.hidden[t];
            let ctx = &fwd.contexts[t];
            let mut dh = std::mem::replace(&mut dh_next, vec![0.0; hd]);
            let c = weights[t];
            if c != 0.0 {
                let target = tokens[t + 1] as usize;
                let dist = &fwd.dists[t];
                for (&k, &lp) in dist.legal.iter().zip(&dist.logprobs) {
                    let indicator = if k == target { 1.0 } else { 0.0 };
                    let dz = c * (indicator - lp.exp()) / temperature;
                    if dz == 0.0 {
                        continue;
                    }
                    grad[o.b_out + k] += dz;
                    let crow = o.ctx_z + k * o.c;
                    for &(j, v) in ctx {
                        grad[crow + j] += dz * v;
                    }
                    let row = o.w_out + k * hd;
                    for r in 0..hd {
                        grad[row + r] += dz * h[r];
                        dh[r] += dz * theta[row + r];
                    }
                }
            }
            let prev = if t == 0 { &zero } else { &fwd.hidden[t - 1] };
            for r in 0..hd {
                da[r] = dh[r] * (1.0 - h[r] * h[r]);
            }
            let e = o.embed + tokens[t] as usize * hd;
            let p = o.pos + t * hd;
            for r in 0..hd {
                let a = da[r];
                if a == 0.0 {
                    continue;
                }
                grad[e + r] += a;
                grad[p + r] += a;
                du[r] += a;
                let crow = o.ctx_h + r * o.c;
                for &(j, v) in ctx {
                    grad[crow + j] += a * v;
                }
                let row = o.w_rec + r * hd;
                for j in 0..hd {
                    grad[row + j] += a * prev[j];
                    dh_next[j] += a * theta[row + j];
                }
            }
        }
        for r in 0..hd {
            grad[o.b_in + r] += du[r];
            let row = o.w_in + r * nf;
            for j in 0..nf {
                grad[row + j] += du[r] * feats[j];
            }
        }
        Ok(fwd.logprobs)
    }

    pub fn grad_weighted_logprob(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        tokens: &[TokenId],
        weights: &[f64],
        temperature: f64,
    ) -> Result<Vec<f64>> {
        let mut grad = params.zeros_like();
        self.accumulate_grad(params, brief, tokens, weights, temperature, &mut grad)?;
        Ok(grad)
    }

    /// Masked next-token distribution after `prefix`, indexed by token id.
    pub fn next_token_probs(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        prefix: &[TokenId],
        temperature: f64,
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        Self::check_temperature(temperature)?;
        self.validate_tokens(prefix)?;
        if prefix.len() >= MAX_SEQUENCE_LEN {
            return Err(Error::InvalidInput("prefix is already at the length cap".into()));
        }
        let theta = &params.theta;
        let feats = self.features(brief);
        let u = self.input_bias(theta, &feats);
        let mut state = GrammarState::start();
        let mut summary = PrefixContext::new(brief, self.vocab.n_categories());
        let mut h = vec![0.0; self.config.hidden];
        let mut ctx = Vec::new();
        for (t, &tok) in prefix.iter().enumerate() {
            if t > 0 {
                state.advance(&self.vocab, tok);
            }
            summary.advance(&self.vocab, tok);
            ctx = summary.sparse();
            h = self.step_hidden(theta, &h, tok, t, &ctx, &u);
        }
        let mask = state.legal_mask(&self.vocab, self.config.masking);
        if mask == 0 {
            return Err(Error::InvalidInput("prefix already ended with EOS".into()));
        }
        let dist = self.dist(theta, &h, &ctx, mask, temperature);
        let mut probs = vec![0.0; self.vocab.len()];
        for (&k, lp) in dist.legal.iter().zip(&dist.logprobs) {
            probs[k] = lp.exp();
        }
        Ok(probs)
    }

    /// One draw after `prefix` using the same inverse-CDF rule as sampling.
    pub fn sample_next(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        prefix: &[TokenId],
        temperature: f64,
        rng: &mut impl Rng,
    ) -> Result<TokenId> {
        let probs = self.next_token_probs(params, brief, prefix, temperature)?;
        let legal: Vec<usize> = (0..probs.len()).filter(|&k| probs[k] > 0.0).collect();
        let logprobs: Vec<f64> = legal.iter().map(|&k| probs[k].ln()).collect();
        Ok(legal[inverse_cdf(&logprobs, rng.gen::<f64>())] as TokenId)
    }

    fn sample_one(&self, theta: &[f64], u: &[f64], brief: &DesignBrief, temperature: f64, seed: u64) -> Result<TokenTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let greedy = temperature <= GREEDY_TEMPERATURE;
        let mut tokens = vec![BOS];
        let mut logprobs = Vec::new();
        let mut state = GrammarState::start();
        let mut summary = PrefixContext::new(brief, self.vocab.n_categories());
        let mut h = vec![0.0; self.config.hidden];
        while state.slot != codec::Slot::Done {
            let t = tokens.len() - 1;
            summary.advance(&self.vocab, tokens[t]);
            let ctx = summary.sparse();
            h = self.step_hidden(theta, &h, tokens[t], t, &ctx, u);
            let mask = state.legal_mask(&self.vocab, self.config.masking);
            let dist = self.dist(theta, &h, &ctx, mask, temperature);
            let i = if greedy {
                // first maximum, i.e. lowest id on ties
                (0..dist.legal.len())
                    .fold(0, |best, i| if dist.logprobs[i] > dist.logprobs[best] { i } else { best })
            } else {
                inverse_cdf(&dist.logprobs, rng.gen::<f64>())
            };
            logprobs.push(dist.logprobs[i]);
            let next = dist.legal[i] as TokenId;
            tokens.push(next);
            state.advance(&self.vocab, next);
        }
        let (_, status) = decode(&tokens, brief, &self.catalog, &self.vocab)?;
        Ok(TokenTrace {
            ref_logprobs: logprobs.clone(),
            tokens,
            logprobs,
            temperature,
            status,
        })
    }

    /// `n` independent samples; candidate `i` draws from the stream
    /// `derive_seed(seed, i)`, so results do not depend on evaluation order.
    pub fn sample_group(
        &self,
        params: &PolicyParams,
        brief: &DesignBrief,
        n: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Vec<TokenTrace>> {
        self.check_params(params)?;
        Self::check_temperature(temperature)?;
        if n == 0 {
            return Err(Error::InvalidInput("group size must be >= 1".into()));
        }
        let u = self.input_bias(&params.theta, &self.features(brief));
        (0..n)
            .map(|i| self.sample_one(&params.theta, &u, brief, temperature, derive_seed(seed, i as u64)))
            .collect()
    }

    /// Greedy decode of a single layout.
    pub fn greedy(&self, params: &PolicyParams, brief: &DesignBrief) -> Result<TokenTrace> {
        self.check_params(params)?;
        let u = self.input_bias(&params.theta, &self.features(brief));
        self.sample_one(&params.theta, &u, brief, GREEDY_TEMPERATURE, 0)
    }

    pub fn save_checkpoint(&self, params: &PolicyParams) -> Result<String> {
        self.check_params(params)?;
        let doc = Checkpoint {
            version: CHECKPOINT_VERSION,
            vocab_hash: self.vocab_hash(),
            config: self.config,
            step: params.step,
            theta: params.theta.clone(),
        };
        let mut text = serde_json::to_string(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn load_checkpoint(&self, text: &str) -> Result<PolicyParams> {
        let doc: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable: {e}")))?;
        if doc.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", doc.version)));
        }
        if doc.vocab_hash != self.vocab_hash() {
            return Err(Error::Checkpoint(
                "vocabulary hash mismatch: checkpoint was trained with a different catalog, lexicon or network size".into(),
            ));
        }
        let params = PolicyParams {
            theta: doc.theta,
            step: doc.step,
        };
        if params.theta.len() != self.offsets.len || !params.is_finite() {
            return Err(Error::Checkpoint("parameter vector is malformed".into()));
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    vocab_hash: String,
    config: PolicyConfig,
    step: u64,
    theta: Vec<f64>,
}
