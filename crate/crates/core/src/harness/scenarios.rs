//! Parameterized scenario templates and seeded brief generation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{self, FeasibilityWeights, ViolationKind};
use crate::geometry::Vec2;
use crate::policy::derive_seed;
use crate::scene::{
    AdjacencyRequirement, Catalog, CategoryId, ClearancePair, DesignBrief, Layout, ObjectInstance,
    RoomSpec, MAX_OBJECTS,
};

const DEFAULT_SCENARIOS: &str = include_str!("../../assets/scenarios.toml");

pub const MAX_ATTEMPTS: usize = 10_000;
pub const CEILING_HEIGHT: f64 = 2.7;
pub const DOOR_WIDTH: f64 = 0.9;
/// Sampled room dimensions snap to this grid (m).
const DIMENSION_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    Functionality,
    Layout,
    Color,
    Atmosphere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub name: String,
    pub prompt: PromptCategory,
    pub width: [f64; 2],
    pub depth: [f64; 2],
    pub required: BTreeMap<CategoryId, u32>,
    pub adjacency: Vec<AdjacencyRequirement>,
    pub clearance: Vec<ClearancePair>,
    pub style_pool: Vec<String>,
    pub style_count: usize,
    pub atmosphere_pool: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjacencyDoc {
    a: String,
    b: String,
    max_distance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClearanceDoc {
    a: String,
    b: String,
    tau_path: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    prompt: PromptCategory,
    width: [f64; 2],
    depth: [f64; 2],
    required: BTreeMap<String, u32>,
    #[serde(default)]
    adjacency: Vec<AdjacencyDoc>,
    #[serde(default)]
    clearance: Vec<ClearanceDoc>,
    style_pool: Vec<String>,
    style_count: usize,
    atmosphere_pool: Vec<String>,
}

#[derive(Deserialize)]
struct ScenarioFile {
    template: BTreeMap<String, TemplateDoc>,
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(format!("template {}: {m}", self.name)));
        for (label, r) in [("width", self.width), ("depth", self.depth)] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return fail(format!("{label} range must satisfy 0 < min <= max"));
            }
        }
        if self.required.values().any(|&n| n == 0) {
            return fail("required counts must be >= 1".into());
        }
        if self.style_pool.is_empty() || self.style_count == 0 || self.style_count > self.style_pool.len() {
            return fail("style_count must be between 1 and the pool size".into());
        }
        if self.atmosphere_pool.is_empty() {
            return fail("atmosphere pool is empty".into());
        }
        Ok(())
    }

    /// Templates in name order.
    pub fn from_toml(text: &str, catalog: &Catalog) -> Result<Vec<Self>> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenarios: {e}")))?;
        file.template
            .into_iter()
            .map(|(name, doc)| {
                let required = doc
                    .required
                    .iter()
                    .map(|(c, &n)| Ok((catalog.category_id(c)?, n)))
                    .collect::<Result<_>>()?;
                let adjacency = doc
                    .adjacency
                    .iter()
                    .map(|a| {
                        Ok(AdjacencyRequirement {
                            a: catalog.category_id(&a.a)?,
                            b: catalog.category_id(&a.b)?,
                            max_distance: a.max_distance,
                        })
                    })
                    .collect::<Result<_>>()?;
                let clearance = doc
                    .clearance
                    .iter()
                    .map(|c| {
                        Ok(ClearancePair {
                            a: catalog.category_id(&c.a)?,
                            b: catalog.category_id(&c.b)?,
                            tau_path: c.tau_path,
                        })
                    })
                    .collect::<Result<_>>()?;
                let template = Self {
                    name,
                    prompt: doc.prompt,
                    width: doc.width,
                    depth: doc.depth,
                    required,
                    adjacency,
                    clearance,
                    style_pool: doc.style_pool,
                    style_count: doc.style_count,
                    atmosphere_pool: doc.atmosphere_pool,
                };
                template.validate()?;
                Ok(template)
            })
            .collect()
    }

    /// The shipped templates.
    pub fn builtin(catalog: &Catalog) -> Result<Vec<Self>> {
        Self::from_toml(DEFAULT_SCENARIOS, catalog)
    }
}

fn sample_dimension(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    let steps = ((range[1] - range[0]) / DIMENSION_STEP).round() as u64;
    range[0] + rng.gen_range(0..=steps) as f64 * DIMENSION_STEP
}

fn instantiate(template: &ScenarioTemplate, index: usize, rng: &mut impl Rng) -> Result<DesignBrief> {
    let width = sample_dimension(rng, template.width);
    let depth = sample_dimension(rng, template.depth);
    let door_start = if width > DOOR_WIDTH + 0.2 {
        let slots = ((width - DOOR_WIDTH - 0.2) / DIMENSION_STEP).floor() as u64;
        0.1 + rng.gen_range(0..=slots) as f64 * DIMENSION_STEP
    } else {
        0.0
    };
    let room = RoomSpec::rectangle(width, depth, CEILING_HEIGHT)?.with_door(
        Vec2::new(door_start, 0.0),
        Vec2::new((door_start + DOOR_WIDTH).min(width), 0.0),
    )?;
    let mut style: Vec<String> = template
        .style_pool
        .choose_multiple(rng, template.style_count)
        .cloned()
        .collect();
    style.sort();
    let atmosphere = template
        .atmosphere_pool
        .choose(rng)
        .cloned()
        .unwrap_or_default();
    Ok(DesignBrief {
        name: Some(format!("{}_{index:03}", template.name)),
        room,
        style_keywords: style,
        atmosphere_keyword: atmosphere,
        required_categories: template.required.clone(),
        adjacency_requirements: template.adjacency.clone(),
        clearance_pairs: template.clearance.clone(),
    })
}

fn kind_label(kind: ViolationKind) -> &'static str {
    match kind {
        ViolationKind::Collision => "collision between required objects",
        ViolationKind::Wall => "required object does not fit inside the room",
        ViolationKind::Clearance => "clearance requirement",
        ViolationKind::Adjacency => "adjacency requirement",
        ViolationKind::MissingCategory => "missing category",
    }
}

/// A violation-free placement of exactly the required objects, found by
/// rejection sampling after cheap count and area pigeonhole checks.
pub fn find_witness(
    brief: &DesignBrief,
    catalog: &Catalog,
    rng: &mut impl Rng,
    template: &str,
) -> Result<Layout> {
    let unsat = |reason: String| Error::Unsatisfiable {
        template: template.to_string(),
        reason,
    };
    let total: u32 = brief.required_categories.values().sum();
    if total as usize > MAX_OBJECTS {
        return Err(unsat(format!(
            "requires {total} objects but a layout holds at most {MAX_OBJECTS}"
        )));
    }
    let mut min_area = 0.0;
    for (&c, &n) in &brief.required_categories {
        let cat = catalog.category(c).ok_or_else(|| Error::UnknownId {
            kind: "category",
            name: c.to_string(),
        })?;
        let smallest = cat
            .size_variants
            .iter()
            .map(|s| s[0] * s[1])
            .fold(f64::INFINITY, f64::min);
        min_area += smallest * n as f64;
    }
    if min_area > brief.room.area() {
        return Err(unsat(format!(
            "area pigeonhole: required footprints need at least {min_area:.2} m² but the room has {:.2} m²",
            brief.room.area()
        )));
    }
    let bbox = brief.room.bounding_box();
    let weights = FeasibilityWeights::default();
    let mut failures: BTreeMap<&'static str, usize> = BTreeMap::new();
    for _ in 0..MAX_ATTEMPTS {
        let mut objects = Vec::with_capacity(total as usize);
        for (&c, &n) in &brief.required_categories {
            let cat = catalog.category(c).expect("checked above");
            for _ in 0..n {
                let dims = cat.size_variants[rng.gen_range(0..3)];
                let sample = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64, extent: f64| {
                    let (a, b) = (lo + extent / 2.0, hi - extent / 2.0);
                    if a < b {
                        rng.gen_range(a..b)
                    } else {
                        (lo + hi) / 2.0
                    }
                };
                let x = sample(rng, bbox.min.x, bbox.max.x, dims[0]);
                let y = sample(rng, bbox.min.y, bbox.max.y, dims[1]);
                let material = rng.gen_range(0..catalog.materials().len());
                objects.push(ObjectInstance::new(c, Vec2::new(x, y), dims, material));
            }
        }
        let layout = Layout::new(brief.room.clone(), objects);
        let report = feasibility::r_feas(&layout, brief, &weights);
        if report.violations.is_empty() {
            return Ok(layout);
        }
        for v in &report.violations {
            *failures.entry(kind_label(v.kind)).or_default() += 1;
        }
    }
    let worst = failures
        .iter()
        .max_by_key(|(_, &n)| n)
        .map_or("unknown", |(k, _)| k);
    Err(unsat(format!(
        "no feasible placement in {MAX_ATTEMPTS} attempts; most frequent failure: {worst}"
    )))
}

/// `count` briefs cycling through `templates`; brief `k` draws from the
/// stream `derive_seed(seed, k)`.
pub fn gen_instances(
    templates: &[ScenarioTemplate],
    catalog: &Catalog,
    count: usize,
    seed: u64,
) -> Result<Vec<DesignBrief>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be >= 1".into()));
    }
    if templates.is_empty() {
        return Err(Error::InvalidInput("no scenario templates given".into()));
    }
    (0..count)
        .map(|k| {
            let template = &templates[k % templates.len()];
            template.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let brief = instantiate(template, k, &mut rng)?;
            brief.validate(catalog)?;
            find_witness(&brief, catalog, &mut rng, &template.name)?;
            Ok(brief)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_load() {
        let catalog = Catalog::default();
        let t = ScenarioTemplate::builtin(&catalog).unwrap();
        let names: Vec<&str> = t.iter().map(|t| t.name.as_str()).collect();
        assert!(names.contains(&"small_office"));
        assert!(names.contains(&"vampire_bedroom"));
        assert!(names.contains(&"musician_studio"));
        for p in [
            PromptCategory::Functionality,
            PromptCategory::Layout,
            PromptCategory::Color,
            PromptCategory::Atmosphere,
        ] {
            assert!(t.iter().any(|t| t.prompt == p));
        }
    }

    #[test]
    fn small_office_dimensions_and_requirements() {
        let catalog = Catalog::default();
        let t: Vec<_> = ScenarioTemplate::builtin(&catalog)
            .unwrap()
            .into_iter()
            .filter(|t| t.name == "small_office")
            .collect();
        let briefs = gen_instances(&t, &catalog, 3, 11).unwrap();
        for b in briefs {
            let bbox = b.room.bounding_box();
            assert!(bbox.width() <= 2.5 + 1e-9 && bbox.depth() <= 3.0 + 1e-9);
            assert_eq!(b.required_categories[&catalog.category_id("desk").unwrap()], 1);
            assert_eq!(b.required_categories[&catalog.category_id("chair").unwrap()], 1);
        }
    }

    #[test]
    fn wardrobe_pigeonhole_is_unsatisfiable() {
        let catalog = Catalog::default();
        let t = ScenarioTemplate {
            name: "closet_hoard".into(),
            prompt: PromptCategory::Layout,
            width: [2.0, 2.0],
            depth: [2.0, 2.0],
            required: BTreeMap::from([(catalog.category_id("wardrobe").unwrap(), 30)]),
            adjacency: vec![],
            clearance: vec![],
            style_pool: vec!["modern".into()],
            style_count: 1,
            atmosphere_pool: vec!["neutral".into()],
        };
        match gen_instances(&[t], &catalog, 1, 0) {
            Err(Error::Unsatisfiable { template, .. }) => assert_eq!(template, "closet_hoard"),
            other => panic!("expected unsatisfiable, got {other:?}"),
        }
    }
}
