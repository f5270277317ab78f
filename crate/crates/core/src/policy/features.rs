//! Fixed-length conditioning vector derived from a design brief.

use crate::aesthetics::embedding::Lexicon;
use crate::aesthetics::HarmonyTemplates;
use crate::scene::DesignBrief;

/// Upper edges (m) of the room width/depth bins; the last bin is open.
const EXTENT_EDGES: [f64; 5] = [2.5, 3.25, 4.0, 5.0, 6.0];
const EXTENT_BINS: usize = EXTENT_EDGES.len() + 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    n_categories: usize,
    keywords: Vec<String>,
    atmospheres: Vec<String>,
}

impl FeatureSpec {
    pub fn new(n_categories: usize, lexicon: &Lexicon, templates: &HarmonyTemplates) -> Self {
        Self {
            n_categories,
            keywords: lexicon.keywords().map(str::to_string).collect(),
            atmospheres: templates.names().map(str::to_string).collect(),
        }
    }

    /// Width bins, depth bins, required counts, keyword indicators,
    /// atmosphere one-hot (plus an "other" slot), bias.
    pub fn dimension(&self) -> usize {
        2 * EXTENT_BINS + self.n_categories + self.keywords.len() + self.atmospheres.len() + 2
    }

    pub fn describe(&self) -> String {
        format!(
            "extent:{EXTENT_EDGES:?};categories:{};keywords:{};atmospheres:{}",
            self.n_categories,
            self.keywords.join(","),
            self.atmospheres.join(",")
        )
    }

    pub fn features(&self, brief: &DesignBrief) -> Vec<f64> {
        let mut f = vec![0.0; self.dimension()];
        let bbox = brief.room.bounding_box();
        let bin = |v: f64| EXTENT_EDGES.iter().take_while(|&&e| v > e).count();
        f[bin(bbox.width())] = 1.0;
        f[EXTENT_BINS + bin(bbox.depth())] = 1.0;
        let mut at = 2 * EXTENT_BINS;
        for (&c, &n) in &brief.required_categories {
            if c < self.n_categories {
                f[at + c] = n.min(4) as f64 / 2.0;
            }
        }
        at += self.n_categories;
        for (k, kw) in self.keywords.iter().enumerate() {
            if brief.style_keywords.iter().any(|s| s == kw) {
                f[at + k] = 1.0;
            }
        }
        at += self.keywords.len();
        let atm = self
            .atmospheres
            .iter()
            .position(|a| *a == brief.atmosphere_keyword)
            .unwrap_or(self.atmospheres.len());
        f[at + atm] = 1.0;
        let last = f.len() - 1;
        f[last] = 1.0;
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RoomSpec;

    #[test]
    fn deterministic_fixed_dimension() {
        let spec = FeatureSpec::new(13, &Lexicon::default(), &HarmonyTemplates::default());
        let mut brief = DesignBrief::bare(RoomSpec::rectangle(2.5, 3.0, 2.7).unwrap());
        brief.style_keywords = vec!["gothic".into()];
        brief.atmosphere_keyword = "dark".into();
        brief.required_categories.insert(3, 1);
        let a = spec.features(&brief);
        assert_eq!(a.len(), spec.dimension());
        assert_eq!(a, spec.features(&brief));
        assert_eq!(a[0], 1.0);
        assert_eq!(a[EXTENT_BINS + 1], 1.0);
        assert_eq!(a.iter().filter(|&&x| x == 1.0).count(), 5);
    }
}
