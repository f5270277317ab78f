//! Command-line front end: instance generation, training, evaluation,
//! verification, scoring, rendering and sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use layout_rl::aesthetics::AestheticCritic;
use layout_rl::config::{Assets, RunConfig};
use layout_rl::feasibility::{self, FeasibilityWeights};
use layout_rl::harness::scenarios::{gen_instances, ScenarioTemplate};
use layout_rl::harness::{self, SweepParam};
use layout_rl::policy::Policy;
use layout_rl::scene::{load_brief, load_layout, save_brief, DesignBrief, Layout};
use layout_rl::{schematic, Error};

#[derive(Parser)]
#[command(name = "layout-rl", version, about = "Feasibility-gated GRPO for interior layouts")]
struct Cli {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for generation, training and evaluation metadata.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (for `eval`, the CSV path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic design briefs from scenario templates.
    GenInstances {
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Scenario template file; the shipped templates otherwise.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Train a policy on a directory of briefs.
    Train {
        #[arg(long)]
        briefs: PathBuf,
        /// Overrides `grpo.max_steps`.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Greedy-decode and score a checkpoint on a directory of briefs.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        briefs: PathBuf,
    },
    /// Print the feasibility report; exit 1 when the layout fails the gate.
    Verify {
        #[command(flatten)]
        scene: SceneArgs,
        /// Feasibility weights `coll,ergo,func`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        weights: Option<Vec<f64>>,
    },
    /// Print feasibility and aesthetic scores for one layout.
    Score {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Render a layout as SVG or a plain pixmap of its schematic projection.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderFormat::Svg)]
        format: RenderFormat,
    },
    /// Train and evaluate over a grid of gate weights and seeds.
    Sweep {
        #[arg(long)]
        briefs: PathBuf,
        /// `feas` or `aes`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Training seeds; defaults to `seed, seed+1, seed+2`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Layout metrics table for a directory of layouts against one brief.
    Eval {
        #[arg(long)]
        layouts: PathBuf,
        #[arg(long)]
        brief: PathBuf,
    },
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    brief: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Svg,
    Ppm,
}

/// Outcome that is not an error but still exits nonzero.
struct GateFailure;

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn json_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!("no .json files in {}", dir.display())).into());
    }
    Ok(files)
}

fn load_briefs(dir: &Path, assets: &Assets) -> anyhow::Result<Vec<DesignBrief>> {
    json_files(dir)?
        .iter()
        .map(|p| {
            let mut brief = load_brief(&read(p)?, &assets.catalog)?;
            if brief.name.is_none() {
                brief.name = p.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            Ok(brief)
        })
        .collect()
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: &Cli) -> anyhow::Result<Option<GateFailure>> {
    let (mut config, base) = match &cli.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let assets = config.assets.load(&base)?;
    match &cli.command {
        Command::GenInstances { count, templates } => {
            let templates = match templates {
                Some(p) => ScenarioTemplate::from_toml(&read(p)?, &assets.catalog)?,
                None => ScenarioTemplate::builtin(&assets.catalog)?,
            };
            let briefs = gen_instances(&templates, &assets.catalog, *count, cli.seed)?;
            let dir = out_dir(cli);
            for brief in &briefs {
                let name = brief.name.as_deref().expect("generated briefs are named");
                write(&dir.join(format!("{name}.json")), &save_brief(brief, &assets.catalog)?)?;
            }
            println!("wrote {} briefs to {}", briefs.len(), dir.display());
        }
        Command::Train { briefs, steps } => {
            config.grpo.rng_seed = cli.seed;
            if let Some(s) = steps {
                config.grpo.max_steps = *s;
            }
            config.validate()?;
            let briefs = load_briefs(briefs, &assets)?;
            let dir = out_dir(cli);
            let (_, params, history) = harness::train(&config, &assets, &briefs, Some(&dir))?;
            let last = history.last();
            println!(
                "trained {} steps; final pass rate {:.3}; checkpoint {}",
                params.step,
                last.map_or(0.0, |m| m.pass_rate),
                dir.join("checkpoints").join(format!("step_{}", params.step)).display()
            );
        }
        Command::Evaluate { checkpoint, briefs } => {
            let policy = Policy::new(&assets.catalog, &assets.lexicon, &assets.templates, config.policy)?;
            let params = policy.load_checkpoint(&read(checkpoint)?)?;
            let briefs = load_briefs(briefs, &assets)?;
            let dir = out_dir(cli);
            let (report, _) = harness::evaluate(
                &policy,
                &params,
                &briefs,
                &config,
                assets.provider.as_ref(),
                cli.seed,
                Some(&dir),
            )?;
            let a = &report.aggregate;
            println!(
                "scenes {} oob {:.3} oor {:.3} pathway {:.3} cas {:.2} pass {:.3}",
                a.scenes, a.oob, a.oor, a.pathway_cost, a.cas, a.gate_pass_rate
            );
        }
        Command::Verify { scene, weights } => {
            let (layout, brief) = load_scene(scene, &assets)?;
            let w = match weights {
                Some(v) => {
                    let w = FeasibilityWeights {
                        lambda_coll: v[0],
                        lambda_ergo: v[1],
                        lambda_func: v[2],
                    };
                    w.validate()?;
                    w
                }
                None => config.feasibility,
            };
            let report = feasibility::r_feas(&layout, &brief, &w);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.r_feas < config.gate.tau_gate {
                return Ok(Some(GateFailure));
            }
        }
        Command::Score { scene } => {
            let (layout, brief) = load_scene(scene, &assets)?;
            let feas = feasibility::r_feas(&layout, &brief, &config.feasibility);
            let critic = AestheticCritic::new(
                &assets.catalog,
                assets.provider.as_ref(),
                &assets.templates,
                config.aesthetics,
                config.grpo.critic_cell_size,
            );
            let aes = critic.score(&layout, &brief)?;
            let path = layout_rl::pathway::pathway_cost(&layout, &assets.catalog)?;
            let doc = serde_json::json!({
                "feasibility": feas,
                "passes_gate": config.gate.passes(feas.r_feas),
                "aesthetics": aes,
                "cas": harness::CAS_SCALE * aes.s_style,
                "pathway": path,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Render { layout, format } => {
            let layout = load_layout(&read(layout)?, &assets.catalog)?;
            let text = match format {
                RenderFormat::Svg => schematic::to_svg(&layout, &assets.catalog),
                RenderFormat::Ppm => {
                    schematic::project(&layout, &assets.catalog, config.grpo.critic_cell_size)?.to_ppm()
                }
            };
            match &cli.out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Sweep {
            briefs,
            param,
            values,
            seeds,
            steps,
        } => {
            if let Some(s) = steps {
                config.grpo.max_steps = *s;
            }
            let parameter = SweepParam::parse(param)?;
            let seeds = seeds.clone().unwrap_or_else(|| (0..3).map(|k| cli.seed + k).collect());
            let briefs = load_briefs(briefs, &assets)?;
            let dir = out_dir(cli);
            let report = harness::sensitivity_sweep(parameter, values, &config, &assets, &briefs, &seeds, Some(&dir))?;
            print!("{}", report.summary_csv()?);
        }
        Command::Eval { layouts, brief } => {
            let brief = load_brief(&read(brief)?, &assets.catalog)?;
            let mut rows = Vec::new();
            for path in json_files(layouts)? {
                let layout = load_layout(&read(&path)?, &assets.catalog)?;
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| anyhow!("bad layout file name {}", path.display()))?;
                rows.push(harness::layout_metrics(id, &layout, &brief, &config, &assets.catalog)?);
            }
            let csv = harness::metrics_csv(&rows)?;
            match &cli.out {
                Some(path) => write(path, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(None)
}

fn load_scene(scene: &SceneArgs, assets: &Assets) -> anyhow::Result<(Layout, DesignBrief)> {
    let layout = load_layout(&read(&scene.layout)?, &assets.catalog)?;
    let brief = load_brief(&read(&scene.brief)?, &assets.catalog)?;
    Ok((layout, brief))
}

/// 2 validation, 3 unsatisfiable template, 4 provider failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Unsatisfiable { .. }) => 3,
        Some(Error::Provider(_)) => 4,
        Some(Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(GateFailure)) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
