//! Joint image/text embedding providers.
//!
//! [`AttributeEmbedder`] is the deterministic built-in: both modalities are
//! reduced to weighted attribute keys (category, material, color bin) and
//! feature-hashed into the same 64-dimensional space. [`RemoteEmbedder`]
//! forwards to an HTTP service speaking the `/embed` JSON protocol.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::Catalog;
use crate::schematic::{color_bin, SchematicRaster, DARK_BIN, LIGHT_BIN};

pub const BUILTIN_DIM: usize = 64;
const HASH_SEED: u64 = 0x5eed_1a70_u64;

const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon.toml");

/// Image and text encoders sharing one embedding space. Outputs are unit vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_image(&self, raster: &SchematicRaster) -> Result<Vec<f64>>;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// FNV-1a over the seed and key bytes.
fn feature_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in HASH_SEED.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn hash_into(v: &mut [f64], key: &str, weight: f64) {
    let h = feature_hash(key);
    let idx = (h % v.len() as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    v[idx] += sign * weight;
}

pub fn color_key(bin: usize) -> String {
    match bin {
        DARK_BIN => "color:dark".to_string(),
        LIGHT_BIN => "color:light".to_string(),
        hue => format!("color:hue{hue}"),
    }
}

/// Keyword → weighted attribute keys.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Lexicon {
    keyword: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("lexicon: {e}")))
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.keyword.keys().map(String::as_str)
    }

    pub fn affinities(&self, keyword: &str) -> Option<&BTreeMap<String, f64>> {
        self.keyword.get(keyword)
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_toml(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }
}

/// Deterministic, stateless built-in provider.
#[derive(Debug, Clone)]
pub struct AttributeEmbedder {
    catalog: Catalog,
    lexicon: Lexicon,
}

impl AttributeEmbedder {
    pub fn new(catalog: Catalog, lexicon: Lexicon) -> Self {
        Self { catalog, lexicon }
    }

    /// Reserved direction for inputs with no recognised attribute.
    pub fn neutral_direction() -> Vec<f64> {
        vec![1.0 / (BUILTIN_DIM as f64).sqrt(); BUILTIN_DIM]
    }

    /// Words of `text` absent from the lexicon.
    pub fn unknown_keywords(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .filter(|w| self.lexicon.affinities(w).is_none())
            .map(str::to_string)
            .collect()
    }

    /// Unnormalized hashed attribute counts of the raster, weighted by cell area.
    fn image_features(&self, raster: &SchematicRaster) -> Vec<f64> {
        let mut counts: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
        for p in &raster.pixels {
            if let (Some(c), Some(m)) = (p.category, p.material) {
                *counts.entry((c, m, color_bin(p.rgb))).or_default() += 1;
            }
        }
        let cell_area = raster.cell_size * raster.cell_size;
        let mut v = vec![0.0; BUILTIN_DIM];
        for ((c, m, bin), n) in counts {
            let w = n as f64 * cell_area;
            if let Some(cat) = self.catalog.category(c) {
                hash_into(&mut v, &format!("cat:{}", cat.name), w);
            }
            if let Some(mat) = self.catalog.material(m) {
                hash_into(&mut v, &format!("mat:{}", mat.name), w);
            }
            hash_into(&mut v, &color_key(bin), w);
        }
        v
    }
}

impl EmbeddingProvider for AttributeEmbedder {
    fn dimension(&self) -> usize {
        BUILTIN_DIM
    }

    fn embed_image(&self, raster: &SchematicRaster) -> Result<Vec<f64>> {
        Ok(normalize(self.image_features(raster)).unwrap_or_else(Self::neutral_direction))
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        let mut words: Vec<&str> = text.split_whitespace().collect();
        words.sort_unstable();
        let mut v = vec![0.0; BUILTIN_DIM];
        for word in words {
            if let Some(affinities) = self.lexicon.affinities(word) {
                for (key, weight) in affinities {
                    hash_into(&mut v, key, *weight);
                }
            }
        }
        Ok(normalize(v).unwrap_or_else(Self::neutral_direction))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    kind: &'a str,
    payload: String,
}

#[derive(Deserialize)]
struct EmbedReply {
    vector: Vec<f64>,
}

/// HTTP adapter: `POST {base_url}/embed` with `{"kind", "payload"}` → `{"vector"}`.
/// Image payloads are base64-encoded plain pixmaps.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    base_url: String,
    dimension: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(base_url: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            dimension,
            agent,
        }
    }

    fn request(&self, kind: &str, payload: String) -> Result<Vec<f64>> {
        let url = format!("{}/embed", self.base_url);
        let mut response = self
            .agent
            .post(&url)
            .send_json(&EmbedRequest { kind, payload })
            .map_err(|e| Error::Provider(format!("{url}: {e}")))?;
        let reply: EmbedReply = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(format!("malformed reply: {e}")))?;
        if reply.vector.len() != self.dimension {
            return Err(Error::Provider(format!(
                "expected {} dimensions, got {}",
                self.dimension,
                reply.vector.len()
            )));
        }
        normalize(reply.vector).ok_or_else(|| Error::Provider("zero or non-finite vector".into()))
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_image(&self, raster: &SchematicRaster) -> Result<Vec<f64>> {
        let payload = base64::engine::general_purpose::STANDARD.encode(raster.to_ppm());
        self.request("image", payload)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        self.request("text", text.to_string())
    }
}
