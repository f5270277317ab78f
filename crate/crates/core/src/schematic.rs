//! Top-down schematic projection of a layout, SVG and pixmap export, and
//! the material color histogram used by the harmony score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, Vec2};
use crate::scene::{footprint, Catalog, CategoryId, Layout, MaterialId, OpeningKind};

pub const FLOOR_COLOR: [u8; 3] = [222, 218, 210];
pub const OUTSIDE_COLOR: [u8; 3] = [255, 255, 255];
pub const MIN_CELL: f64 = 0.01;
pub const MAX_CELL: f64 = 0.2;

pub const HUE_BINS: usize = 12;
pub const HIST_BINS: usize = HUE_BINS + 2;
pub const DARK_BIN: usize = HUE_BINS;
pub const LIGHT_BIN: usize = HUE_BINS + 1;
pub const HIST_EPSILON: f64 = 1e-3;
const ACHROMATIC_SATURATION: f64 = 0.15;
const ACHROMATIC_VALUE_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub category: Option<CategoryId>,
    pub material: Option<MaterialId>,
    pub rgb: [u8; 3],
}

/// Row-major raster; row 0 is the southmost row (smallest y).
#[derive(Debug, Clone, PartialEq)]
pub struct SchematicRaster {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin: Vec2,
    pub pixels: Vec<Pixel>,
}

impl SchematicRaster {
    pub fn pixel(&self, i: usize, j: usize) -> &Pixel {
        &self.pixels[j * self.width + i]
    }

    /// Plain (P3) portable pixmap, top row first.
    pub fn to_ppm(&self) -> String {
        let mut out = format!("P3\n{} {}\n255\n", self.width, self.height);
        for j in (0..self.height).rev() {
            let row: Vec<String> = (0..self.width)
                .map(|i| {
                    let [r, g, b] = self.pixel(i, j).rgb;
                    format!("{r} {g} {b}")
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Orthographic top-down raster. Later objects paint over earlier ones.
pub fn project(layout: &Layout, catalog: &Catalog, cell_size: f64) -> Result<SchematicRaster> {
    if !(MIN_CELL..=MAX_CELL).contains(&cell_size) {
        return Err(Error::InvalidInput(format!(
            "cell_size {cell_size} outside [{MIN_CELL}, {MAX_CELL}]"
        )));
    }
    let bbox = layout.room.bounding_box();
    let width = ((bbox.width() / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let height = ((bbox.depth() / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let origin = bbox.min;
    let mut pixels = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let c = Vec2::new(
                origin.x + (i as f64 + 0.5) * cell_size,
                origin.y + (j as f64 + 0.5) * cell_size,
            );
            let rgb = if point_in_polygon(c, layout.room.boundary()) {
                FLOOR_COLOR
            } else {
                OUTSIDE_COLOR
            };
            pixels.push(Pixel {
                category: None,
                material: None,
                rgb,
            });
        }
    }
    for obj in &layout.objects {
        let rect = footprint(obj);
        let color = material_color(catalog, obj.material_id)?;
        // Cells whose center falls in the half-open footprint [min, max).
        let first = |lo: f64, o: f64| ((lo - o) / cell_size - 0.5).ceil().max(0.0) as usize;
        let last = |hi: f64, o: f64, n: usize| {
            let k = ((hi - o) / cell_size - 0.5).ceil() as i64;
            k.clamp(0, n as i64) as usize
        };
        let (i0, i1) = (first(rect.min.x, origin.x), last(rect.max.x, origin.x, width));
        let (j0, j1) = (first(rect.min.y, origin.y), last(rect.max.y, origin.y, height));
        for j in j0..j1 {
            for i in i0..i1 {
                pixels[j * width + i] = Pixel {
                    category: Some(obj.category_id),
                    material: Some(obj.material_id),
                    rgb: color,
                };
            }
        }
    }
    Ok(SchematicRaster {
        width,
        height,
        cell_size,
        origin,
        pixels,
    })
}

fn material_color(catalog: &Catalog, id: MaterialId) -> Result<[u8; 3]> {
    catalog
        .material(id)
        .map(|m| m.base_color)
        .ok_or_else(|| Error::UnknownId {
            kind: "material",
            name: id.to_string(),
        })
}

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Deterministic vector rendering. Geometry is in meters inside a y-flipped
/// group, so point coordinates are room coordinates verbatim.
pub fn to_svg(layout: &Layout, catalog: &Catalog) -> String {
    let bbox = layout.room.bounding_box();
    let pad = 0.2;
    let (x0, y0) = (bbox.min.x - pad, bbox.min.y - pad);
    let (w, h) = (bbox.width() + 2.0 * pad, bbox.depth() + 2.0 * pad);
    let flip = bbox.min.y + bbox.max.y;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        num(x0),
        num(y0),
        num(w),
        num(h),
        (w * 100.0).round() as i64,
        (h * 100.0).round() as i64
    );
    let _ = writeln!(svg, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, num(flip));
    let mut d = String::new();
    for (k, p) in layout.room.boundary().iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if k == 0 { "M" } else { "L" }, num(p.x), num(p.y));
    }
    d.push('Z');
    let _ = writeln!(
        svg,
        r##"<path class="room" d="{d}" fill="{}" stroke="#222222" stroke-width="0.04"/>"##,
        hex(FLOOR_COLOR)
    );
    for opening in layout.room.doors().iter().chain(layout.room.windows()) {
        let (class, color) = match opening.kind {
            OpeningKind::Door => ("door", "#b5651d"),
            OpeningKind::Window => ("window", "#3a8fd9"),
        };
        let _ = writeln!(
            svg,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="0.08"/>"#,
            num(opening.start.x),
            num(opening.start.y),
            num(opening.end.x),
            num(opening.end.y)
        );
    }
    for obj in &layout.objects {
        let rect = footprint(obj);
        let points: Vec<String> = rect
            .corners()
            .iter()
            .map(|c| format!("{},{}", num(c.x), num(c.y)))
            .collect();
        let name = catalog
            .category(obj.category_id)
            .map_or("unknown", |c| c.name.as_str());
        let color = catalog
            .material(obj.material_id)
            .map_or([128, 128, 128], |m| m.base_color);
        let _ = writeln!(
            svg,
            r##"<polygon class="object" data-category="{name}" points="{}" fill="{}" fill-opacity="0.85" stroke="#111111" stroke-width="0.02"/>"##,
            points.join(" "),
            hex(color)
        );
    }
    svg.push_str("</g>\n");
    for obj in &layout.objects {
        let name = catalog
            .category(obj.category_id)
            .map_or("unknown", |c| c.name.as_str());
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="0.14" text-anchor="middle" font-family="sans-serif">{name}</text>"#,
            num(obj.position.x),
            num(flip - obj.position.y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// 12 hue bins of 30° plus dark and light achromatic bins, ε-smoothed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    pub bins: [f64; HIST_BINS],
}

impl ColorHistogram {
    /// Smooths raw nonnegative masses (any scale) into a distribution with
    /// every bin at least ε before renormalization. Zero total mass is uniform.
    pub fn from_masses(masses: &[f64; HIST_BINS]) -> Self {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Self::uniform();
        }
        let mut bins = [0.0; HIST_BINS];
        for (b, m) in bins.iter_mut().zip(masses) {
            let p = m / total;
            *b = (p + HIST_EPSILON) / (1.0 + HIST_BINS as f64 * HIST_EPSILON);
        }
        Self { bins }
    }

    pub fn uniform() -> Self {
        Self {
            bins: [1.0 / HIST_BINS as f64; HIST_BINS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.bins.iter().sum();
        if self.bins.iter().any(|b| !(*b > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invariant(
                "histogram",
                "bins must be positive and sum to 1",
            ));
        }
        Ok(())
    }

    /// KL(self ‖ other).
    pub fn kl_divergence(&self, other: &ColorHistogram) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(p, q)| if *p > 0.0 { p * (p / q).ln() } else { 0.0 })
            .sum::<f64>()
            .max(0.0)
    }
}

/// HSV triple with hue in degrees [0, 360), saturation and value in [0, 1].
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let saturation = if max == 0.0 { 0.0 } else { delta / max };
    (hue.rem_euclid(360.0), saturation, max)
}

pub fn color_bin(rgb: [u8; 3]) -> usize {
    let (h, s, v) = rgb_to_hsv(rgb);
    if s < ACHROMATIC_SATURATION {
        if v < ACHROMATIC_VALUE_SPLIT {
            DARK_BIN
        } else {
            LIGHT_BIN
        }
    } else {
        ((h / 30.0).floor() as usize) % HUE_BINS
    }
}

/// Footprint-area-weighted distribution of the objects' material colors.
pub fn color_histogram(layout: &Layout, catalog: &Catalog) -> ColorHistogram {
    let mut masses = [0.0; HIST_BINS];
    for obj in &layout.objects {
        if let Some(m) = catalog.material(obj.material_id) {
            masses[color_bin(m.base_color)] += footprint(obj).area();
        }
    }
    ColorHistogram::from_masses(&masses)
}
