//! Aesthetic-preference branch: style alignment, visual balance and color
//! harmony, aggregated into `R_aes = λ_st·S_style + λ_co·S_comp + λ_ha·S_harm`.

pub mod embedding;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::{footprint, Catalog, DesignBrief, Layout};
use crate::schematic::{self, color_histogram, ColorHistogram, DARK_BIN, HIST_BINS, LIGHT_BIN};

pub use embedding::{cosine, AttributeEmbedder, EmbeddingProvider, Lexicon, RemoteEmbedder};

const DEFAULT_TEMPLATES: &str = include_str!("../../assets/templates.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AestheticWeights {
    pub lambda_st: f64,
    pub lambda_co: f64,
    pub lambda_ha: f64,
    /// Gaussian width of the balance score in meters; `None` means a quarter
    /// of the room's bounding-box diagonal.
    pub sigma: Option<f64>,
}

impl Default for AestheticWeights {
    fn default() -> Self {
        Self {
            lambda_st: 1.0 / 3.0,
            lambda_co: 1.0 / 3.0,
            lambda_ha: 1.0 / 3.0,
            sigma: None,
        }
    }
}

impl AestheticWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_st, self.lambda_co, self.lambda_ha];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput("aesthetic weights must be >= 0".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidInput("sigma must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn sigma_for(&self, layout: &Layout) -> f64 {
        self.sigma.unwrap_or_else(|| {
            let bbox = layout.room.bounding_box();
            0.25 * bbox.width().hypot(bbox.depth())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonyTemplate {
    pub name: String,
    pub target: ColorHistogram,
}

/// Atmosphere keyword → target histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonyTemplates {
    templates: BTreeMap<String, HarmonyTemplate>,
}

#[derive(Deserialize)]
struct TemplateFile {
    template: BTreeMap<String, BTreeMap<String, f64>>,
}

impl HarmonyTemplates {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: TemplateFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("templates: {e}")))?;
        let mut templates = BTreeMap::new();
        for (name, masses) in file.template {
            let mut bins = [0.0; HIST_BINS];
            for (key, mass) in masses {
                let idx = match key.as_str() {
                    "dark" => DARK_BIN,
                    "light" => LIGHT_BIN,
                    hue => hue
                        .strip_prefix("hue")
                        .and_then(|n| n.parse::<usize>().ok())
                        .filter(|n| *n < DARK_BIN)
                        .ok_or_else(|| Error::Config(format!("unknown template bin '{key}'")))?,
                };
                if !(mass >= 0.0) {
                    return Err(Error::Config(format!("negative mass in template '{name}'")));
                }
                bins[idx] += mass;
            }
            let target = ColorHistogram::from_masses(&bins);
            target.validate()?;
            templates.insert(name.clone(), HarmonyTemplate { name, target });
        }
        Ok(Self { templates })
    }

    pub fn get(&self, atmosphere: &str) -> Option<&HarmonyTemplate> {
        self.templates.get(atmosphere)
    }

    /// Template for the atmosphere keyword, uniform when unknown.
    pub fn resolve(&self, atmosphere: &str) -> HarmonyTemplate {
        self.get(atmosphere).cloned().unwrap_or_else(|| HarmonyTemplate {
            name: "uniform".into(),
            target: ColorHistogram::uniform(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

impl Default for HarmonyTemplates {
    fn default() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }
}

/// Cosine between the projected layout and the brief's style text.
pub fn s_style(
    layout: &Layout,
    brief: &DesignBrief,
    catalog: &Catalog,
    provider: &dyn EmbeddingProvider,
    cell_size: f64,
) -> Result<f64> {
    let raster = schematic::project(layout, catalog, cell_size)?;
    let image = provider.embed_image(&raster)?;
    let text = provider.embed_text(&brief.style_text())?;
    if image.len() != text.len() || image.len() != provider.dimension() {
        return Err(Error::Provider("embedding dimensions disagree".into()));
    }
    Ok(cosine(&image, &text))
}

/// Saliency- and area-weighted center of the footprints; `None` when empty.
pub fn visual_center(layout: &Layout, catalog: &Catalog) -> Option<Vec2> {
    let mut total = 0.0;
    let mut acc = Vec2::default();
    for obj in &layout.objects {
        let saliency = catalog.category(obj.category_id).map_or(1.0, |c| c.saliency);
        let w = footprint(obj).area() * saliency;
        acc = acc + obj.position * w;
        total += w;
    }
    (total > 0.0).then(|| acc * (1.0 / total))
}

/// `exp(-|c_mass - c_room|² / 2σ²)`; 0 for an empty layout.
pub fn s_comp(layout: &Layout, catalog: &Catalog, sigma: f64) -> f64 {
    match visual_center(layout, catalog) {
        Some(center) => {
            let d = center - layout.room.centroid();
            (-d.dot(d) / (2.0 * sigma * sigma)).exp()
        }
        None => 0.0,
    }
}

/// `1 / (1 + KL(H ‖ T))` over the smoothed 14-bin histograms.
pub fn s_harm(layout: &Layout, catalog: &Catalog, template: &HarmonyTemplate) -> f64 {
    let hist = color_histogram(layout, catalog);
    1.0 / (1.0 + hist.kl_divergence(&template.target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AestheticScores {
    pub s_style: f64,
    pub s_comp: f64,
    pub s_harm: f64,
    pub r_aes: f64,
    /// Balance is undefined without objects; `s_comp` was set to 0.
    pub empty_layout: bool,
    pub template: String,
}

/// Provider, templates and weights bundled into one scorer. Counts its
/// invocations so callers can audit that only gate-passing candidates are scored.
pub struct AestheticCritic<'a> {
    pub catalog: &'a Catalog,
    pub provider: &'a dyn EmbeddingProvider,
    pub templates: &'a HarmonyTemplates,
    pub weights: AestheticWeights,
    pub cell_size: f64,
    calls: AtomicUsize,
}

impl<'a> AestheticCritic<'a> {
    pub fn new(
        catalog: &'a Catalog,
        provider: &'a dyn EmbeddingProvider,
        templates: &'a HarmonyTemplates,
        weights: AestheticWeights,
        cell_size: f64,
    ) -> Self {
        Self {
            catalog,
            provider,
            templates,
            weights,
            cell_size,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn score(&self, layout: &Layout, brief: &DesignBrief) -> Result<AestheticScores> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        r_aes(
            layout,
            brief,
            self.catalog,
            self.provider,
            self.templates,
            &self.weights,
            self.cell_size,
        )
    }
}

pub fn r_aes(
    layout: &Layout,
    brief: &DesignBrief,
    catalog: &Catalog,
    provider: &dyn EmbeddingProvider,
    templates: &HarmonyTemplates,
    weights: &AestheticWeights,
    cell_size: f64,
) -> Result<AestheticScores> {
    let style = s_style(layout, brief, catalog, provider, cell_size)?;
    let comp = s_comp(layout, catalog, weights.sigma_for(layout));
    let template = templates.resolve(&brief.atmosphere_keyword);
    let harm = s_harm(layout, catalog, &template);
    Ok(AestheticScores {
        s_style: style,
        s_comp: comp,
        s_harm: harm,
        r_aes: weights.lambda_st * style + weights.lambda_co * comp + weights.lambda_ha * harm,
        empty_layout: layout.objects.is_empty(),
        template: template.name,
    })
}
