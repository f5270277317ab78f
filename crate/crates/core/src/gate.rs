//! Hard-gated fusion of the feasibility and aesthetic branches into the
//! per-candidate holistic score.
//!
//! Within a sampled group, raw `R_feas` is min-max normalized over all
//! candidates and raw `R_aes` over gate-passing candidates only. A passing
//! candidate scores `λ_feas·n_feas + λ_aes·n_aes ∈ [0, λ_feas + λ_aes]`; a
//! failing one scores `λ_feas·n_feas − Ψ ≤ λ_feas − Ψ`, so with `Ψ ≥ 2` and
//! `λ_feas ≤ 1` every failing candidate sits strictly below every passing one.

use serde::{Deserialize, Serialize};

use crate::aesthetics::AestheticScores;
use crate::error::{Error, Result};
use crate::feasibility::FeasibilityReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub tau_gate: f64,
    pub psi_penalty: f64,
    pub degenerate_norm_value: f64,
    /// Weight of the normalized feasibility term. 0 disables the gate entirely.
    pub lambda_feas: f64,
    /// Weight of the normalized aesthetic term.
    pub lambda_aes: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            tau_gate: -0.01,
            psi_penalty: 2.0,
            degenerate_norm_value: 0.5,
            lambda_feas: 1.0,
            lambda_aes: 1.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_gate <= 0.0) {
            return Err(Error::InvalidInput("tau_gate must be <= 0".into()));
        }
        if !(self.psi_penalty >= 2.0) {
            return Err(Error::InvalidInput(
                "psi_penalty must be >= 2 for gating dominance".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.degenerate_norm_value) {
            return Err(Error::InvalidInput(
                "degenerate_norm_value must be in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda_feas) || !(self.lambda_aes >= 0.0) {
            return Err(Error::InvalidInput(
                "lambda_feas must be in [0, 1] and lambda_aes >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn gate_enabled(&self) -> bool {
        self.lambda_feas > 0.0
    }

    pub fn passes(&self, r_feas: f64) -> bool {
        !self.gate_enabled() || r_feas >= self.tau_gate
    }
}

/// Per-candidate reward record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_feas_raw: f64,
    pub r_aes_raw: Option<f64>,
    pub n_feas: f64,
    pub n_aes: Option<f64>,
    /// True when the candidate passed the gate.
    pub gated: bool,
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aesthetics: Option<AestheticScores>,
}

/// Min-max normalization; a constant group maps to `degenerate_value`.
pub fn normalize_group(values: &[f64], degenerate_value: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty group".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !(span > 0.0) {
        return Ok(vec![degenerate_value; values.len()]);
    }
    Ok(values
        .iter()
        .map(|v| ((v - min) / span).clamp(0.0, 1.0))
        .collect())
}

/// Assembles `S_i` for one group. `aes[i]` must be present for every
/// gate-passing candidate; it is ignored for failing ones.
pub fn holistic_scores(
    feas: &[f64],
    aes: &[Option<f64>],
    config: &GateConfig,
) -> Result<Vec<RewardBreakdown>> {
    if feas.len() != aes.len() {
        return Err(Error::InvalidInput(format!(
            "feasibility ({}) and aesthetic ({}) lists differ in length",
            feas.len(),
            aes.len()
        )));
    }
    let n_feas = normalize_group(feas, config.degenerate_norm_value)?;
    let gated: Vec<bool> = feas.iter().map(|&r| config.passes(r)).collect();
    let mut gated_aes = Vec::new();
    for (i, &g) in gated.iter().enumerate() {
        if g {
            let a = aes[i].ok_or_else(|| {
                Error::InvalidInput(format!("candidate {i} passed the gate without an aesthetic score"))
            })?;
            gated_aes.push(a);
        }
    }
    let n_aes_gated = if gated_aes.is_empty() {
        Vec::new()
    } else {
        normalize_group(&gated_aes, config.degenerate_norm_value)?
    };
    let mut next = n_aes_gated.into_iter();
    Ok(feas
        .iter()
        .zip(n_feas)
        .zip(gated)
        .enumerate()
        .map(|(i, ((&raw, nf), g))| {
            let (n_aes, s) = if g {
                let na = next.next().expect("one normalized value per gated candidate");
                (Some(na), config.lambda_feas * nf + config.lambda_aes * na)
            } else {
                (None, config.lambda_feas * nf - config.psi_penalty)
            };
            RewardBreakdown {
                r_feas_raw: raw,
                r_aes_raw: if g { aes[i] } else { None },
                n_feas: nf,
                n_aes,
                gated: g,
                s,
                feasibility: None,
                aesthetics: None,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let n = normalize_group(&[-3.0, -1.0, 0.0], 0.5).unwrap();
        assert_eq!(n[0], 0.0);
        assert!((n[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(n[2], 1.0);
        assert_eq!(normalize_group(&[5.0, 5.0, 5.0], 0.5).unwrap(), vec![0.5; 3]);
        assert!(normalize_group(&[], 0.5).is_err());
    }

    #[test]
    fn both_feasible() {
        let out = holistic_scores(&[0.0, 0.0], &[Some(0.4), Some(0.8)], &GateConfig::default()).unwrap();
        assert_eq!(out[0].s, 0.5);
        assert_eq!(out[1].s, 1.5);
        assert!(out.iter().all(|b| b.gated));
    }

    #[test]
    fn one_gated_out() {
        let out = holistic_scores(&[0.0, -5.0], &[Some(0.9), None], &GateConfig::default()).unwrap();
        assert_eq!(out[0].n_feas, 1.0);
        assert_eq!(out[1].n_feas, 0.0);
        assert_eq!(out[0].s, 1.5);
        assert_eq!(out[1].s, -2.0);
        assert!(!out[1].gated);
        assert_eq!(out[1].n_aes, None);
    }

    #[test]
    fn errors() {
        assert!(holistic_scores(&[0.0], &[], &GateConfig::default()).is_err());
        assert!(holistic_scores(&[0.0], &[None], &GateConfig::default()).is_err());
    }

    #[test]
    fn disabled_gate_admits_everything() {
        let cfg = GateConfig {
            lambda_feas: 0.0,
            ..Default::default()
        };
        let out = holistic_scores(&[0.0, -5.0], &[Some(0.2), Some(0.9)], &cfg).unwrap();
        assert!(out.iter().all(|b| b.gated));
        assert_eq!(out[0].s, 0.0);
        assert_eq!(out[1].s, 1.0);
    }
}
