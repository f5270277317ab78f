//! Rooms, objects, layouts and design briefs, plus their JSON documents.
//!
//! All constructors validate; a value of these types is always well formed
//! with respect to the catalog it was loaded against.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Rect, Vec2};

pub type CategoryId = usize;
pub type MaterialId = usize;

pub const MAX_OBJECTS: usize = 12;
pub const MAX_CATEGORIES: usize = 16;
pub const MAX_MATERIALS: usize = 8;
pub const MIN_DOOR_WIDTH: f64 = 0.6;
const OPENING_TOLERANCE: f64 = 1e-6;

const DEFAULT_CATALOG: &str = include_str!("../assets/catalog.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpeningKind {
    Door,
    Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpeningSegment {
    pub start: Vec2,
    pub end: Vec2,
    pub kind: OpeningKind,
}

impl OpeningSegment {
    pub fn midpoint(&self) -> Vec2 {
        (self.start + self.end) * 0.5
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// A single room: a simple counter-clockwise polygon extruded to the ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    boundary: Vec<Vec2>,
    ceiling_height: f64,
    doors: Vec<OpeningSegment>,
    windows: Vec<OpeningSegment>,
}

impl RoomSpec {
    /// Validates the room and reorients a clockwise boundary to counter-clockwise.
    pub fn new(
        mut boundary: Vec<Vec2>,
        ceiling_height: f64,
        doors: Vec<OpeningSegment>,
        windows: Vec<OpeningSegment>,
    ) -> Result<Self> {
        if boundary.len() < 3 {
            return Err(Error::invariant(
                "room",
                "boundary has fewer than 3 vertices",
            ));
        }
        if boundary.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invariant("room", "boundary has non-finite coordinates"));
        }
        if !(ceiling_height.is_finite() && ceiling_height > 0.0) {
            return Err(Error::invariant("room", "ceiling_height must be > 0"));
        }
        let area = geometry::signed_area(&boundary);
        if area == 0.0 {
            return Err(Error::invariant("room", "boundary has zero area"));
        }
        if !geometry::is_simple(&boundary) {
            return Err(Error::invariant("room", "boundary is not a simple polygon"));
        }
        if area < 0.0 {
            boundary.reverse();
        }
        let room = Self {
            boundary,
            ceiling_height,
            doors,
            windows,
        };
        for opening in room.doors.iter().chain(&room.windows) {
            room.check_opening(opening)?;
        }
        Ok(room)
    }

    /// Axis-aligned rectangular room `[0,width] × [0,depth]`.
    pub fn rectangle(width: f64, depth: f64, ceiling_height: f64) -> Result<Self> {
        Self::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(width, 0.0),
                Vec2::new(width, depth),
                Vec2::new(0.0, depth),
            ],
            ceiling_height,
            Vec::new(),
            Vec::new(),
        )
    }

    pub fn with_door(mut self, start: Vec2, end: Vec2) -> Result<Self> {
        let door = OpeningSegment {
            start,
            end,
            kind: OpeningKind::Door,
        };
        self.check_opening(&door)?;
        self.doors.push(door);
        Ok(self)
    }

    pub fn with_window(mut self, start: Vec2, end: Vec2) -> Result<Self> {
        let window = OpeningSegment {
            start,
            end,
            kind: OpeningKind::Window,
        };
        self.check_opening(&window)?;
        self.windows.push(window);
        Ok(self)
    }

    fn check_opening(&self, opening: &OpeningSegment) -> Result<()> {
        if opening.start == opening.end {
            return Err(Error::invariant("opening", "start equals end"));
        }
        if opening.kind == OpeningKind::Door && opening.length() < MIN_DOOR_WIDTH {
            return Err(Error::invariant(
                "opening",
                format!("door narrower than {MIN_DOOR_WIDTH} m"),
            ));
        }
        let n = self.boundary.len();
        let on_some_edge = (0..n).any(|i| {
            let (a, b) = (self.boundary[i], self.boundary[(i + 1) % n]);
            geometry::point_segment_distance(opening.start, a, b) <= OPENING_TOLERANCE
                && geometry::point_segment_distance(opening.end, a, b) <= OPENING_TOLERANCE
        });
        if !on_some_edge {
            return Err(Error::invariant(
                "opening",
                "opening does not lie on a boundary edge",
            ));
        }
        Ok(())
    }

    pub fn boundary(&self) -> &[Vec2] {
        &self.boundary
    }

    pub fn ceiling_height(&self) -> f64 {
        self.ceiling_height
    }

    pub fn doors(&self) -> &[OpeningSegment] {
        &self.doors
    }

    pub fn windows(&self) -> &[OpeningSegment] {
        &self.windows
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.boundary)
    }

    pub fn centroid(&self) -> Vec2 {
        geometry::centroid(&self.boundary)
    }

    pub fn bounding_box(&self) -> Rect {
        geometry::bounding_box(&self.boundary)
    }

    /// Rigidly translated copy (openings move with the walls).
    pub fn translated(&self, offset: Vec2) -> Self {
        let shift = |o: &OpeningSegment| OpeningSegment {
            start: o.start + offset,
            end: o.end + offset,
            kind: o.kind,
        };
        Self {
            boundary: self.boundary.iter().map(|&p| p + offset).collect(),
            ceiling_height: self.ceiling_height,
            doors: self.doors.iter().map(shift).collect(),
            windows: self.windows.iter().map(shift).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCategory {
    pub id: CategoryId,
    pub name: String,
    /// (width, depth, height) for the small, medium and large variants.
    pub size_variants: [[f64; 3]; 3],
    pub saliency: f64,
    pub needs_access: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    pub id: MaterialId,
    pub name: String,
    pub base_color: [u8; 3],
}

/// Category vocabulary plus material palette.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    categories: Vec<ObjectCategory>,
    materials: Vec<MaterialSpec>,
}

#[derive(Deserialize)]
struct CatalogFile {
    #[serde(default)]
    category: Vec<CategoryEntry>,
    #[serde(default)]
    material: Vec<MaterialEntry>,
}

#[derive(Deserialize)]
struct CategoryEntry {
    name: String,
    sizes: Vec<[f64; 3]>,
    saliency: f64,
    #[serde(default)]
    needs_access: bool,
}

#[derive(Deserialize)]
struct MaterialEntry {
    name: String,
    color: [u8; 3],
}

impl Catalog {
    pub fn new(categories: Vec<ObjectCategory>, materials: Vec<MaterialSpec>) -> Result<Self> {
        if categories.is_empty() || categories.len() > MAX_CATEGORIES {
            return Err(Error::invariant(
                "catalog",
                format!("needs 1..={MAX_CATEGORIES} categories"),
            ));
        }
        if materials.is_empty() || materials.len() > MAX_MATERIALS {
            return Err(Error::invariant(
                "catalog",
                format!("needs 1..={MAX_MATERIALS} materials"),
            ));
        }
        for (i, c) in categories.iter().enumerate() {
            if c.id != i {
                return Err(Error::invariant("catalog", "category ids must be dense"));
            }
            let dims_ok = c
                .size_variants
                .iter()
                .flatten()
                .all(|&d| d.is_finite() && d > 0.0);
            if !dims_ok {
                return Err(Error::invariant(
                    "catalog",
                    format!("category '{}' has a non-positive dimension", c.name),
                ));
            }
            if !(c.saliency > 0.0) {
                return Err(Error::invariant(
                    "catalog",
                    format!("category '{}' saliency must be > 0", c.name),
                ));
            }
            if categories[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invariant(
                    "catalog",
                    format!("duplicate category '{}'", c.name),
                ));
            }
        }
        for (i, m) in materials.iter().enumerate() {
            if m.id != i {
                return Err(Error::invariant("catalog", "material ids must be dense"));
            }
            if materials[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::invariant(
                    "catalog",
                    format!("duplicate material '{}'", m.name),
                ));
            }
        }
        Ok(Self {
            categories,
            materials,
        })
    }

    /// Parses the key-value catalog file (`[[category]]` / `[[material]]` tables).
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut categories = Vec::with_capacity(file.category.len());
        for (id, entry) in file.category.into_iter().enumerate() {
            let sizes: [[f64; 3]; 3] = entry.sizes.try_into().map_err(|_| {
                Error::invariant("catalog", "each category needs exactly 3 size variants")
            })?;
            categories.push(ObjectCategory {
                id,
                name: entry.name,
                size_variants: sizes,
                saliency: entry.saliency,
                needs_access: entry.needs_access,
            });
        }
        let materials = file
            .material
            .into_iter()
            .enumerate()
            .map(|(id, m)| MaterialSpec {
                id,
                name: m.name,
                base_color: m.color,
            })
            .collect();
        Self::new(categories, materials)
    }

    pub fn categories(&self) -> &[ObjectCategory] {
        &self.categories
    }

    pub fn materials(&self) -> &[MaterialSpec] {
        &self.materials
    }

    pub fn category(&self, id: CategoryId) -> Option<&ObjectCategory> {
        self.categories.get(id)
    }

    pub fn material(&self, id: MaterialId) -> Option<&MaterialSpec> {
        self.materials.get(id)
    }

    pub fn category_id(&self, name: &str) -> Result<CategoryId> {
        self.categories
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownId {
                kind: "category",
                name: name.to_string(),
            })
    }

    pub fn material_id(&self, name: &str) -> Result<MaterialId> {
        self.materials
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownId {
                kind: "material",
                name: name.to_string(),
            })
    }

    fn category_name(&self, id: CategoryId) -> Result<&str> {
        self.category(id)
            .map(|c| c.name.as_str())
            .ok_or_else(|| Error::UnknownId {
                kind: "category",
                name: id.to_string(),
            })
    }

    fn material_name(&self, id: MaterialId) -> Result<&str> {
        self.material(id)
            .map(|m| m.name.as_str())
            .ok_or_else(|| Error::UnknownId {
                kind: "material",
                name: id.to_string(),
            })
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CATALOG).expect("shipped catalog is valid")
    }
}

/// A floor-standing axis-aligned box: footprint center `position`, extents
/// `dimensions = (width, depth, height)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub category_id: CategoryId,
    pub position: Vec2,
    pub dimensions: [f64; 3],
    pub material_id: MaterialId,
}

impl ObjectInstance {
    pub fn new(
        category_id: CategoryId,
        position: Vec2,
        dimensions: [f64; 3],
        material_id: MaterialId,
    ) -> Self {
        Self {
            category_id,
            position,
            dimensions,
            material_id,
        }
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if !(self.position.x.is_finite() && self.position.y.is_finite()) {
            return Err(Error::invariant("object", "non-finite position"));
        }
        if !self.dimensions.iter().all(|&d| d.is_finite() && d > 0.0) {
            return Err(Error::invariant("object", "all dimensions must be > 0"));
        }
        Ok(())
    }
}

/// Axis-aligned floor rectangle covered by the object.
pub fn footprint(obj: &ObjectInstance) -> Rect {
    Rect::from_center(obj.position, obj.dimensions[0], obj.dimensions[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub room: RoomSpec,
    pub objects: Vec<ObjectInstance>,
}

impl Layout {
    pub fn new(room: RoomSpec, objects: Vec<ObjectInstance>) -> Self {
        Self { room, objects }
    }

    pub fn empty(room: RoomSpec) -> Self {
        Self::new(room, Vec::new())
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.objects.len() > MAX_OBJECTS {
            return Err(Error::invariant(
                "layout",
                format!("more than {MAX_OBJECTS} objects"),
            ));
        }
        for obj in &self.objects {
            obj.validate()?;
            catalog.category_name(obj.category_id)?;
            catalog.material_name(obj.material_id)?;
        }
        Ok(())
    }

    pub fn translated(&self, offset: Vec2) -> Self {
        Self {
            room: self.room.translated(offset),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectInstance {
                    position: o.position + offset,
                    ..o.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyRequirement {
    pub a: CategoryId,
    pub b: CategoryId,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearancePair {
    pub a: CategoryId,
    pub b: CategoryId,
    pub tau_path: f64,
}

/// Conditioning input: room plus style text and constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBrief {
    pub name: Option<String>,
    pub room: RoomSpec,
    pub style_keywords: Vec<String>,
    pub atmosphere_keyword: String,
    pub required_categories: BTreeMap<CategoryId, u32>,
    pub adjacency_requirements: Vec<AdjacencyRequirement>,
    pub clearance_pairs: Vec<ClearancePair>,
}

impl DesignBrief {
    /// Brief with no constraints and no keywords.
    pub fn bare(room: RoomSpec) -> Self {
        Self {
            name: None,
            room,
            style_keywords: Vec::new(),
            atmosphere_keyword: String::new(),
            required_categories: BTreeMap::new(),
            adjacency_requirements: Vec::new(),
            clearance_pairs: Vec::new(),
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        for (&cat, &count) in &self.required_categories {
            catalog.category_name(cat)?;
            if count < 1 {
                return Err(Error::invariant("brief", "required category count must be >= 1"));
            }
        }
        for adj in &self.adjacency_requirements {
            catalog.category_name(adj.a)?;
            catalog.category_name(adj.b)?;
            if !(adj.max_distance > 0.0) {
                return Err(Error::invariant("brief", "max_distance must be > 0"));
            }
        }
        for pair in &self.clearance_pairs {
            catalog.category_name(pair.a)?;
            catalog.category_name(pair.b)?;
            if !(pair.tau_path > 0.0) {
                return Err(Error::invariant("brief", "tau_path must be > 0"));
            }
        }
        Ok(())
    }

    /// Sorted style keywords followed by the atmosphere keyword, space-joined.
    pub fn style_text(&self) -> String {
        let mut words: Vec<&str> = self.style_keywords.iter().map(String::as_str).collect();
        words.sort_unstable();
        if !self.atmosphere_keyword.is_empty() {
            words.push(&self.atmosphere_keyword);
        }
        words.join(" ")
    }
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpeningDoc {
    start: [f64; 2],
    end: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomDoc {
    boundary: Vec<[f64; 2]>,
    ceiling_height: f64,
    #[serde(default)]
    doors: Vec<OpeningDoc>,
    #[serde(default)]
    windows: Vec<OpeningDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    category: String,
    position: [f64; 3],
    dimensions: [f64; 3],
    material: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    room: RoomDoc,
    objects: Vec<ObjectDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjacencyDoc {
    a: String,
    b: String,
    max_distance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClearanceDoc {
    a: String,
    b: String,
    tau_path: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BriefDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    room: RoomDoc,
    #[serde(default)]
    style_keywords: Vec<String>,
    #[serde(default)]
    atmosphere_keyword: String,
    #[serde(default)]
    required_categories: BTreeMap<String, u32>,
    #[serde(default)]
    adjacency_requirements: Vec<AdjacencyDoc>,
    #[serde(default)]
    clearance_pairs: Vec<ClearanceDoc>,
}

fn vec2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn room_from_doc(doc: RoomDoc) -> Result<RoomSpec> {
    let opening = |o: &OpeningDoc, kind| OpeningSegment {
        start: vec2(o.start),
        end: vec2(o.end),
        kind,
    };
    RoomSpec::new(
        doc.boundary.into_iter().map(vec2).collect(),
        doc.ceiling_height,
        doc.doors.iter().map(|o| opening(o, OpeningKind::Door)).collect(),
        doc.windows
            .iter()
            .map(|o| opening(o, OpeningKind::Window))
            .collect(),
    )
}

fn room_to_doc(room: &RoomSpec) -> RoomDoc {
    let opening = |o: &OpeningSegment| OpeningDoc {
        start: [o.start.x, o.start.y],
        end: [o.end.x, o.end.y],
    };
    RoomDoc {
        boundary: room.boundary.iter().map(|p| [p.x, p.y]).collect(),
        ceiling_height: room.ceiling_height,
        doors: room.doors.iter().map(opening).collect(),
        windows: room.windows.iter().map(opening).collect(),
    }
}

/// Canonical, key-sorted, pretty-printed JSON.
fn canonical_json<T: Serialize>(doc: &T) -> String {
    // serde_json::Value objects are BTreeMap-backed, so keys come out sorted.
    let value = serde_json::to_value(doc).expect("documents serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn load_layout(document: &str, catalog: &Catalog) -> Result<Layout> {
    let doc: LayoutDoc = serde_json::from_str(document)?;
    let room = room_from_doc(doc.room)?;
    let mut objects = Vec::with_capacity(doc.objects.len());
    for o in doc.objects {
        if o.position[2] != 0.0 {
            return Err(Error::invariant(
                "object",
                "z must be 0 for floor-standing objects",
            ));
        }
        objects.push(ObjectInstance {
            category_id: catalog.category_id(&o.category)?,
            position: Vec2::new(o.position[0], o.position[1]),
            dimensions: o.dimensions,
            material_id: catalog.material_id(&o.material)?,
        });
    }
    let layout = Layout::new(room, objects);
    layout.validate(catalog)?;
    Ok(layout)
}

pub fn save_layout(layout: &Layout, catalog: &Catalog) -> Result<String> {
    let objects = layout
        .objects
        .iter()
        .map(|o| {
            Ok(ObjectDoc {
                category: catalog.category_name(o.category_id)?.to_string(),
                position: [o.position.x, o.position.y, 0.0],
                dimensions: o.dimensions,
                material: catalog.material_name(o.material_id)?.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(canonical_json(&LayoutDoc {
        room: room_to_doc(&layout.room),
        objects,
    }))
}

pub fn load_brief(document: &str, catalog: &Catalog) -> Result<DesignBrief> {
    let doc: BriefDoc = serde_json::from_str(document)?;
    let mut required_categories = BTreeMap::new();
    for (name, count) in doc.required_categories {
        required_categories.insert(catalog.category_id(&name)?, count);
    }
    let adjacency_requirements = doc
        .adjacency_requirements
        .into_iter()
        .map(|a| {
            Ok(AdjacencyRequirement {
                a: catalog.category_id(&a.a)?,
                b: catalog.category_id(&a.b)?,
                max_distance: a.max_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clearance_pairs = doc
        .clearance_pairs
        .into_iter()
        .map(|c| {
            Ok(ClearancePair {
                a: catalog.category_id(&c.a)?,
                b: catalog.category_id(&c.b)?,
                tau_path: c.tau_path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let brief = DesignBrief {
        name: doc.name,
        room: room_from_doc(doc.room)?,
        style_keywords: doc.style_keywords,
        atmosphere_keyword: doc.atmosphere_keyword,
        required_categories,
        adjacency_requirements,
        clearance_pairs,
    };
    brief.validate(catalog)?;
    Ok(brief)
}

pub fn save_brief(brief: &DesignBrief, catalog: &Catalog) -> Result<String> {
    let mut required = BTreeMap::new();
    for (&cat, &count) in &brief.required_categories {
        required.insert(catalog.category_name(cat)?.to_string(), count);
    }
    let adjacency_requirements = brief
        .adjacency_requirements
        .iter()
        .map(|a| {
            Ok(AdjacencyDoc {
                a: catalog.category_name(a.a)?.to_string(),
                b: catalog.category_name(a.b)?.to_string(),
                max_distance: a.max_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clearance_pairs = brief
        .clearance_pairs
        .iter()
        .map(|c| {
            Ok(ClearanceDoc {
                a: catalog.category_name(c.a)?.to_string(),
                b: catalog.category_name(c.b)?.to_string(),
                tau_path: c.tau_path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(canonical_json(&BriefDoc {
        name: brief.name.clone(),
        room: room_to_doc(&brief.room),
        style_keywords: brief.style_keywords.clone(),
        atmosphere_keyword: brief.atmosphere_keyword.clone(),
        required_categories: required,
        adjacency_requirements,
        clearance_pairs,
    }))
}

/// Instances grouped by category id.
pub(crate) fn instances_by_category(layout: &Layout) -> HashMap<CategoryId, Vec<usize>> {
    let mut map: HashMap<CategoryId, Vec<usize>> = HashMap::new();
    for (i, o) in layout.objects.iter().enumerate() {
        map.entry(o.category_id).or_default().push(i);
    }
    map
}
