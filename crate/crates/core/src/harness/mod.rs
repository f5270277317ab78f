//! Scenario generation, evaluation, sweeps and reports.

pub mod scenarios;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aesthetics::{s_style, AestheticCritic, EmbeddingProvider};
use crate::config::{Assets, RunConfig};
use crate::error::{Error, Result};
use crate::feasibility;
use crate::grpo::{StepMetrics, TrainContext, Trainer};
use crate::pathway::pathway_cost;
use crate::policy::{decode, DecodeStatus, Policy, PolicyParams};
use crate::scene::{save_layout, Catalog, DesignBrief, Layout};
use crate::schematic;

/// Cosine between the projected layout and the brief's style text; the same
/// computation as the critic's style term.
pub fn alignment_score(
    layout: &Layout,
    brief: &DesignBrief,
    catalog: &Catalog,
    provider: &dyn EmbeddingProvider,
    cell_size: f64,
) -> Result<f64> {
    s_style(layout, brief, catalog, provider, cell_size)
}

/// Scale applied to the alignment cosine in reports (cosmetic).
pub const CAS_SCALE: f64 = 100.0;

fn scene_id(brief: &DesignBrief, index: usize) -> String {
    brief.name.clone().unwrap_or_else(|| format!("scene_{index:03}"))
}

/// Metrics for one evaluated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene_id: String,
    pub objects: usize,
    pub status: DecodeStatus,
    pub oob: f64,
    pub oor: f64,
    pub pathway_cost: f64,
    /// Raw cosine in [-1, 1].
    pub alignment: f64,
    /// `100 × alignment`.
    pub cas: f64,
    pub r_feas: f64,
    /// 1 when the layout passes the gate, else 0.
    pub gate_pass: f64,
}

/// Column means over the scene rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenes: usize,
    pub oob: f64,
    pub oor: f64,
    pub pathway_cost: f64,
    pub alignment: f64,
    pub cas: f64,
    pub r_feas: f64,
    pub gate_pass_rate: f64,
}

impl Aggregate {
    pub fn from_rows(rows: &[SceneRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("aggregate needs at least one row".into()));
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&SceneRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            scenes: rows.len(),
            oob: mean(|r| r.oob),
            oor: mean(|r| r.oor),
            pathway_cost: mean(|r| r.pathway_cost),
            alignment: mean(|r| r.alignment),
            cas: mean(|r| r.cas),
            r_feas: mean(|r| r.r_feas),
            gate_pass_rate: mean(|r| r.gate_pass),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub checkpoint_step: u64,
    pub decoding: String,
    pub cas_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: EvalMetadata,
    pub rows: Vec<SceneRow>,
    pub aggregate: Aggregate,
}

pub const EVAL_HEADER: [&str; 10] = [
    "scene_id",
    "objects",
    "status",
    "oob",
    "oor",
    "pathway_cost",
    "alignment",
    "cas",
    "r_feas",
    "gate_pass",
];

impl EvalReport {
    /// Scene rows followed by an `aggregate` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(EVAL_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scene_id.clone(),
                r.objects.to_string(),
                status_name(r.status).to_string(),
                r.oob.to_string(),
                r.oor.to_string(),
                r.pathway_cost.to_string(),
                r.alignment.to_string(),
                r.cas.to_string(),
                r.r_feas.to_string(),
                r.gate_pass.to_string(),
            ])?;
        }
        let a = &self.aggregate;
        w.write_record([
            "aggregate".to_string(),
            String::new(),
            String::new(),
            a.oob.to_string(),
            a.oor.to_string(),
            a.pathway_cost.to_string(),
            a.alignment.to_string(),
            a.cas.to_string(),
            a.r_feas.to_string(),
            a.gate_pass_rate.to_string(),
        ])?;
        finish_csv(w)
    }
}

fn status_name(s: DecodeStatus) -> &'static str {
    match s {
        DecodeStatus::Ok => "ok",
        DecodeStatus::Salvaged => "salvaged",
        DecodeStatus::Empty => "empty",
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Everything one scene's metrics depend on.
pub fn scene_row(
    id: String,
    layout: &Layout,
    status: DecodeStatus,
    brief: &DesignBrief,
    config: &RunConfig,
    catalog: &Catalog,
    provider: &dyn EmbeddingProvider,
) -> Result<SceneRow> {
    let layouts = std::slice::from_ref(layout);
    let report = feasibility::r_feas(layout, brief, &config.feasibility);
    let alignment = alignment_score(layout, brief, catalog, provider, config.grpo.critic_cell_size)?;
    Ok(SceneRow {
        scene_id: id,
        objects: layout.objects.len(),
        status,
        oob: feasibility::oob_rate(layouts)?,
        oor: feasibility::oor_rate(layouts)?,
        pathway_cost: pathway_cost(layout, catalog)?.cost,
        alignment,
        cas: CAS_SCALE * alignment,
        r_feas: report.r_feas,
        gate_pass: if config.gate.passes(report.r_feas) { 1.0 } else { 0.0 },
    })
}

/// Greedy-decodes one layout per brief and scores it. With `out`, writes
/// `report.csv`, `report.json`, `layouts/<id>.json` and `renders/<id>.svg`.
pub fn evaluate(
    policy: &Policy,
    params: &PolicyParams,
    briefs: &[DesignBrief],
    config: &RunConfig,
    provider: &dyn EmbeddingProvider,
    seed: u64,
    out: Option<&Path>,
) -> Result<(EvalReport, Vec<Layout>)> {
    if briefs.is_empty() {
        return Err(Error::InvalidInput("evaluation needs at least one brief".into()));
    }
    let catalog = policy.catalog();
    let mut rows = Vec::with_capacity(briefs.len());
    let mut layouts = Vec::with_capacity(briefs.len());
    for (i, brief) in briefs.iter().enumerate() {
        let trace = policy.greedy(params, brief)?;
        let (layout, status) = decode(&trace.tokens, brief, catalog, policy.vocab())?;
        rows.push(scene_row(scene_id(brief, i), &layout, status, brief, config, catalog, provider)?);
        layouts.push(layout);
    }
    let report = EvalReport {
        metadata: EvalMetadata {
            seed,
            config_hash: config.hash(),
            checkpoint_step: params.step,
            decoding: "greedy".into(),
            cas_scale: CAS_SCALE,
        },
        aggregate: Aggregate::from_rows(&rows)?,
        rows,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("layouts"))?;
        std::fs::create_dir_all(dir.join("renders"))?;
        std::fs::write(dir.join("report.csv"), report.to_csv()?)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        for (row, layout) in report.rows.iter().zip(&layouts) {
            std::fs::write(dir.join("layouts").join(format!("{}.json", row.scene_id)), save_layout(layout, catalog)?)?;
            std::fs::write(
                dir.join("renders").join(format!("{}.svg", row.scene_id)),
                schematic::to_svg(layout, catalog),
            )?;
        }
    }
    Ok((report, layouts))
}

/// One row of the standalone layout-metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scene_id: String,
    pub oob: f64,
    pub oor: f64,
    pub phi_coll: f64,
    pub phi_ergo: f64,
    pub phi_func: u32,
    pub r_feas: f64,
    pub pathway_cost: f64,
}

pub const METRICS_COLUMNS: [&str; 8] =
    ["scene_id", "oob", "oor", "phi_coll", "phi_ergo", "phi_func", "r_feas", "pathway_cost"];

pub fn layout_metrics(
    scene_id: String,
    layout: &Layout,
    brief: &DesignBrief,
    config: &RunConfig,
    catalog: &Catalog,
) -> Result<MetricsRow> {
    let layouts = std::slice::from_ref(layout);
    let report = feasibility::r_feas(layout, brief, &config.feasibility);
    Ok(MetricsRow {
        scene_id,
        oob: feasibility::oob_rate(layouts)?,
        oor: feasibility::oor_rate(layouts)?,
        phi_coll: report.phi_coll,
        phi_ergo: report.phi_ergo,
        phi_func: report.phi_func,
        r_feas: report.r_feas,
        pathway_cost: pathway_cost(layout, catalog)?.cost,
    })
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scene_id.clone(),
            r.oob.to_string(),
            r.oor.to_string(),
            r.phi_coll.to_string(),
            r.phi_ergo.to_string(),
            r.phi_func.to_string(),
            r.r_feas.to_string(),
            r.pathway_cost.to_string(),
        ])?;
    }
    finish_csv(w)
}

/// Trains a fresh policy (initialized from `grpo.rng_seed`) on `briefs`.
/// With `out`, the trainer writes its metrics, checkpoints and resolved config there.
pub fn train(
    config: &RunConfig,
    assets: &Assets,
    briefs: &[DesignBrief],
    out: Option<&Path>,
) -> Result<(Policy, PolicyParams, Vec<StepMetrics>)> {
    let policy = Policy::new(&assets.catalog, &assets.lexicon, &assets.templates, config.policy)?;
    let critic = AestheticCritic::new(
        &assets.catalog,
        assets.provider.as_ref(),
        &assets.templates,
        config.aesthetics,
        config.grpo.critic_cell_size,
    );
    let params = policy.init_params(config.grpo.rng_seed);
    let ctx = TrainContext {
        policy: &policy,
        critic: &critic,
        config,
    };
    let mut trainer = Trainer::new(ctx, briefs.to_vec(), params)?;
    trainer.run(out)?;
    let Trainer { params, history, .. } = trainer;
    Ok((policy, params, history))
}

/// Gate weight varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Feas,
    Aes,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "feas" => Ok(Self::Feas),
            "aes" => Ok(Self::Aes),
            _ => Err(Error::InvalidInput(format!("sweep parameter must be feas or aes, got '{s}'"))),
        }
    }

    fn apply(self, config: &mut RunConfig, value: f64) {
        match self {
            Self::Feas => config.gate.lambda_feas = value,
            Self::Aes => config.gate.lambda_aes = value,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Feas => "lambda_feas",
            Self::Aes => "lambda_aes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub oor: f64,
    pub oob: f64,
    pub alignment: f64,
    pub gate_pass_rate: f64,
    /// Sampled-candidate pass rate over the final 100 training steps.
    pub train_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub value: f64,
    pub runs: usize,
    pub oor_mean: f64,
    pub oor_std: f64,
    pub alignment_mean: f64,
    pub alignment_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParam,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl SweepReport {
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.parameter.name(), "seed", "oor", "oob", "alignment", "gate_pass_rate", "train_pass_rate"])?;
        for r in &self.rows {
            w.write_record([
                r.value.to_string(),
                r.seed.to_string(),
                r.oor.to_string(),
                r.oob.to_string(),
                r.alignment.to_string(),
                r.gate_pass_rate.to_string(),
                r.train_pass_rate.to_string(),
            ])?;
        }
        finish_csv(w)
    }

    /// Plot-ready per-value mean and population std.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.parameter.name(), "runs", "oor_mean", "oor_std", "alignment_mean", "alignment_std"])?;
        for s in &self.summary {
            w.write_record([
                s.value.to_string(),
                s.runs.to_string(),
                s.oor_mean.to_string(),
                s.oor_std.to_string(),
                s.alignment_mean.to_string(),
                s.alignment_std.to_string(),
            ])?;
        }
        finish_csv(w)
    }
}

/// Mean sampled pass rate over the last `window` recorded steps.
pub fn final_pass_rate(history: &[StepMetrics], window: usize) -> f64 {
    let tail = &history[history.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|m| m.pass_rate).sum::<f64>() / tail.len() as f64
}

/// Full train + greedy evaluation for every `(value, seed)` cell, values
/// outermost. Each cell trains from `init_params(seed)` with `grpo.rng_seed = seed`.
pub fn sensitivity_sweep(
    parameter: SweepParam,
    values: &[f64],
    base: &RunConfig,
    assets: &Assets,
    briefs: &[DesignBrief],
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<SweepReport> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput("a sweep needs at least one value and one seed".into()));
    }
    let mut rows = Vec::with_capacity(values.len() * seeds.len());
    for &value in values {
        for &seed in seeds {
            let mut config = base.clone();
            parameter.apply(&mut config, value);
            config.grpo.rng_seed = seed;
            config.validate()?;
            let (policy, params, history) = train(&config, assets, briefs, None)?;
            let (report, _) = evaluate(&policy, &params, briefs, &config, assets.provider.as_ref(), seed, None)?;
            rows.push(SweepRow {
                value,
                seed,
                oor: report.aggregate.oor,
                oob: report.aggregate.oob,
                alignment: report.aggregate.alignment,
                gate_pass_rate: report.aggregate.gate_pass_rate,
                train_pass_rate: final_pass_rate(&history, 100),
            });
        }
    }
    let summary = values
        .iter()
        .map(|&value| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value).collect();
            let oor: Vec<f64> = cell.iter().map(|r| r.oor).collect();
            let al: Vec<f64> = cell.iter().map(|r| r.alignment).collect();
            let (oor_mean, oor_std) = mean_std(&oor);
            let (alignment_mean, alignment_std) = mean_std(&al);
            SweepSummary {
                value,
                runs: cell.len(),
                oor_mean,
                oor_std,
                alignment_mean,
                alignment_std,
            }
        })
        .collect();
    let report = SweepReport {
        parameter,
        rows,
        summary,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), report.rows_csv()?)?;
        std::fs::write(dir.join("sweep_summary.csv"), report.summary_csv()?)?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(oob: f64, oor: f64) -> SceneRow {
        SceneRow {
            scene_id: "s".into(),
            objects: 1,
            status: DecodeStatus::Ok,
            oob,
            oor,
            pathway_cost: 1.0,
            alignment: 0.5,
            cas: 50.0,
            r_feas: 0.0,
            gate_pass: 1.0,
        }
    }

    #[test]
    fn aggregate_is_row_mean() {
        let a = Aggregate::from_rows(&[row(0.0, 10.0), row(50.0, 0.0)]).unwrap();
        assert_eq!(a.oob, 25.0);
        assert_eq!(a.oor, 5.0);
        assert_eq!(a.cas, 50.0);
        assert!(Aggregate::from_rows(&[]).is_err());
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }
}
