//! Deterministic spatial-feasibility verifier.
//!
//! Three violation magnitudes feed the penalty `R_feas = -Σ λ_j Φ_j`:
//! collisions (pairwise and wall IoU), clearance shortfall between
//! circulation pairs, and missing functional edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::scene::{footprint, instances_by_category, DesignBrief, Layout, ObjectInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityWeights {
    pub lambda_coll: f64,
    pub lambda_ergo: f64,
    pub lambda_func: f64,
}

impl Default for FeasibilityWeights {
    fn default() -> Self {
        Self {
            lambda_coll: 1.0,
            lambda_ergo: 1.0,
            lambda_func: 1.0,
        }
    }
}

impl FeasibilityWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_coll, self.lambda_ergo, self.lambda_func];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(
                "feasibility weights must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Collision,
    Wall,
    Clearance,
    Adjacency,
    MissingCategory,
}

/// One entry of the blame list: which objects, which constraint, how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub objects: Vec<usize>,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub phi_coll: f64,
    pub phi_ergo: f64,
    pub phi_func: u32,
    pub r_feas: f64,
    pub violations: Vec<Violation>,
}

/// Volume IoU of two floor-standing axis-aligned boxes.
pub fn box_iou(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let inter = intersection_volume(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub(crate) fn intersection_volume(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let area = footprint(a).intersection_area(&footprint(b));
    if area == 0.0 {
        return 0.0;
    }
    area * a.dimensions[2].min(b.dimensions[2])
}

/// Part of the object's volume lying outside the room prism, over the union
/// of object and prism. 0 iff the box is fully inside.
pub fn wall_overlap(layout: &Layout, obj: &ObjectInstance) -> f64 {
    let room = &layout.room;
    let rect = footprint(obj);
    let volume = obj.volume();
    let inside_area = geometry::polygon_rect_intersection_area(room.boundary(), &rect);
    let inside_volume = inside_area * obj.dimensions[2].min(room.ceiling_height());
    let outside = volume - inside_volume;
    if outside <= 1e-12 * volume {
        return 0.0;
    }
    let union = room.area() * room.ceiling_height() + outside;
    outside / union
}

fn collision_terms(layout: &Layout, violations: &mut Vec<Violation>) -> f64 {
    let objs = &layout.objects;
    let mut total = 0.0;
    for i in 0..objs.len() {
        for k in (i + 1)..objs.len() {
            let iou = box_iou(&objs[i], &objs[k]);
            if iou > 0.0 {
                total += iou;
                violations.push(Violation {
                    objects: vec![i, k],
                    kind: ViolationKind::Collision,
                    magnitude: iou,
                });
            }
        }
    }
    for (i, obj) in objs.iter().enumerate() {
        let wall = wall_overlap(layout, obj);
        if wall > 0.0 {
            total += wall;
            violations.push(Violation {
                objects: vec![i],
                kind: ViolationKind::Wall,
                magnitude: wall,
            });
        }
    }
    total
}

/// Σ over unordered object pairs of `box_iou` plus the per-object wall term.
pub fn phi_coll(layout: &Layout) -> f64 {
    collision_terms(layout, &mut Vec::new())
}

/// Minimum Euclidean gap between two footprints (0 when they overlap).
pub fn min_distance(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    footprint(a).gap(&footprint(b))
}

/// Instance index pairs `(i, k)`, `i != k`, matching the unordered category
/// pair `(a, b)`. Each unordered instance pair appears once.
fn matching_pairs(layout: &Layout, a: usize, b: usize) -> Vec<(usize, usize)> {
    let by_cat = instances_by_category(layout);
    let empty = Vec::new();
    let xs = by_cat.get(&a).unwrap_or(&empty);
    let ys = by_cat.get(&b).unwrap_or(&empty);
    let mut pairs = Vec::new();
    if a == b {
        for (n, &i) in xs.iter().enumerate() {
            for &k in &xs[n + 1..] {
                pairs.push((i, k));
            }
        }
    } else {
        for &i in xs {
            for &k in ys {
                pairs.push((i, k));
            }
        }
    }
    pairs
}

fn ergo_terms(layout: &Layout, brief: &DesignBrief, violations: &mut Vec<Violation>) -> f64 {
    let mut total = 0.0;
    for pair in &brief.clearance_pairs {
        for (i, k) in matching_pairs(layout, pair.a, pair.b) {
            let gap = min_distance(&layout.objects[i], &layout.objects[k]);
            let shortfall = (pair.tau_path - gap).max(0.0);
            if shortfall > 0.0 {
                total += shortfall;
                violations.push(Violation {
                    objects: vec![i, k],
                    kind: ViolationKind::Clearance,
                    magnitude: shortfall,
                });
            }
        }
    }
    total
}

/// Σ over clearance-pair instance matches of `max(0, τ_path − gap)`.
pub fn phi_ergo(layout: &Layout, brief: &DesignBrief) -> f64 {
    ergo_terms(layout, brief, &mut Vec::new())
}

fn func_terms(layout: &Layout, brief: &DesignBrief, violations: &mut Vec<Violation>) -> u32 {
    let by_cat = instances_by_category(layout);
    let mut missing = 0u32;
    for (&cat, &required) in &brief.required_categories {
        let present = by_cat.get(&cat).map_or(0, Vec::len) as u32;
        let shortfall = required.saturating_sub(present);
        if shortfall > 0 {
            missing += shortfall;
            violations.push(Violation {
                objects: Vec::new(),
                kind: ViolationKind::MissingCategory,
                magnitude: shortfall as f64,
            });
        }
    }
    for req in &brief.adjacency_requirements {
        let satisfied = matching_pairs(layout, req.a, req.b).into_iter().any(|(i, k)| {
            min_distance(&layout.objects[i], &layout.objects[k]) <= req.max_distance
        });
        if !satisfied {
            missing += 1;
            let mut involved: Vec<usize> = by_cat.get(&req.a).cloned().unwrap_or_default();
            if req.b != req.a {
                involved.extend(by_cat.get(&req.b).cloned().unwrap_or_default());
            }
            involved.sort_unstable();
            violations.push(Violation {
                objects: involved,
                kind: ViolationKind::Adjacency,
                magnitude: 1.0,
            });
        }
    }
    missing
}

/// Count of missing required edges plus missing required instances.
pub fn phi_func(layout: &Layout, brief: &DesignBrief) -> u32 {
    func_terms(layout, brief, &mut Vec::new())
}

pub fn r_feas(layout: &Layout, brief: &DesignBrief, weights: &FeasibilityWeights) -> FeasibilityReport {
    let mut violations = Vec::new();
    let phi_coll = collision_terms(layout, &mut violations);
    let phi_ergo = ergo_terms(layout, brief, &mut violations);
    let phi_func = func_terms(layout, brief, &mut violations);
    let r_feas = -(weights.lambda_coll * phi_coll
        + weights.lambda_ergo * phi_ergo
        + weights.lambda_func * phi_func as f64);
    FeasibilityReport {
        phi_coll,
        phi_ergo,
        phi_func,
        // Avoid reporting -0.0 for a clean layout.
        r_feas: if r_feas == 0.0 { 0.0 } else { r_feas },
        violations,
    }
}

/// True when any part of the footprint leaves the room polygon.
pub fn is_out_of_bounds(layout: &Layout, obj: &ObjectInstance) -> bool {
    let rect = footprint(obj);
    let inside = geometry::polygon_rect_intersection_area(layout.room.boundary(), &rect);
    inside < rect.area() * (1.0 - 1e-9)
}

/// Percentage of objects (over all layouts) whose footprint leaves the room.
pub fn oob_rate(layouts: &[Layout]) -> Result<f64> {
    if layouts.is_empty() {
        return Err(Error::InvalidInput("oob_rate needs at least one layout".into()));
    }
    let total: usize = layouts.iter().map(|l| l.objects.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let out: usize = layouts
        .iter()
        .map(|l| l.objects.iter().filter(|o| is_out_of_bounds(l, o)).count())
        .sum();
    Ok(100.0 * out as f64 / total as f64)
}

/// Per-scene overlap severity: pairwise intersection volume over total object volume, ×100.
pub fn scene_overlap_rate(layout: &Layout) -> f64 {
    let objs = &layout.objects;
    let total: f64 = objs.iter().map(ObjectInstance::volume).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut inter = 0.0;
    for i in 0..objs.len() {
        for k in (i + 1)..objs.len() {
            inter += intersection_volume(&objs[i], &objs[k]);
        }
    }
    100.0 * inter / total
}

/// Mean over scenes of [`scene_overlap_rate`].
pub fn oor_rate(layouts: &[Layout]) -> Result<f64> {
    if layouts.is_empty() {
        return Err(Error::InvalidInput("oor_rate needs at least one layout".into()));
    }
    Ok(layouts.iter().map(scene_overlap_rate).sum::<f64>() / layouts.len() as f64)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::Vec2;
    use crate::scene::{AdjacencyRequirement, Catalog, ClearancePair, RoomSpec};

    fn obj(cat: usize, x: f64, y: f64, dims: [f64; 3]) -> ObjectInstance {
        ObjectInstance::new(cat, Vec2::new(x, y), dims, 0)
    }

    fn room() -> RoomSpec {
        RoomSpec::rectangle(5.0, 4.0, 2.7).unwrap()
    }

    #[test]
    fn iou_basics() {
        let a = obj(0, 1.0, 1.0, [1.0, 1.0, 1.0]);
        let b = obj(0, 3.0, 3.0, [1.0, 1.0, 1.0]);
        assert_eq!(box_iou(&a, &b), 0.0);
        assert_eq!(box_iou(&a, &a), 1.0);
        let c = obj(0, 1.5, 1.0, [1.0, 1.0, 1.0]);
        // overlap 0.5 m^3, union 1.5 m^3
        assert!((box_iou(&a, &c) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(box_iou(&a, &c), box_iou(&c, &a));
    }

    #[test]
    fn phi_coll_cases() {
        let single = Layout::new(room(), vec![obj(0, 2.0, 2.0, [1.0, 1.0, 1.0])]);
        assert_eq!(phi_coll(&single), 0.0);
        let twins = Layout::new(
            room(),
            vec![obj(0, 2.0, 2.0, [1.0, 1.0, 1.0]), obj(1, 2.0, 2.0, [1.0, 1.0, 1.0])],
        );
        assert!((phi_coll(&twins) - 1.0).abs() < 1e-12);
        let protruding = Layout::new(room(), vec![obj(0, 0.0, 2.0, [1.0, 1.0, 1.0])]);
        let expected = 0.5 / (20.0 * 2.7 + 0.5);
        assert!((phi_coll(&protruding) - expected).abs() < 1e-12);
    }

    #[test]
    fn min_distance_cases() {
        let a = obj(0, 0.5, 0.5, [1.0, 1.0, 1.0]);
        let b = obj(0, 2.5, 0.5, [1.0, 1.0, 1.0]);
        assert!((min_distance(&a, &b) - 1.0).abs() < 1e-12);
        let c = obj(0, 1.0, 0.5, [1.0, 1.0, 1.0]);
        assert_eq!(min_distance(&a, &c), 0.0);
    }

    fn brief_with(
        clearance: Vec<ClearancePair>,
        adjacency: Vec<AdjacencyRequirement>,
        required: &[(usize, u32)],
    ) -> DesignBrief {
        let mut b = DesignBrief::bare(room());
        b.clearance_pairs = clearance;
        b.adjacency_requirements = adjacency;
        b.required_categories = required.iter().copied().collect::<BTreeMap<_, _>>();
        b
    }

    #[test]
    fn phi_ergo_examples() {
        let cat = Catalog::default();
        let sofa = cat.category_id("sofa").unwrap();
        let table = cat.category_id("coffee_table").unwrap();
        let brief = brief_with(
            vec![ClearancePair {
                a: sofa,
                b: table,
                tau_path: 0.9,
            }],
            vec![],
            &[],
        );
        // sofa footprint y in [0.55, 1.45]; table y in [2.65, 3.25] -> gap 1.2
        let far = Layout::new(
            room(),
            vec![obj(sofa, 2.0, 1.0, [2.0, 0.9, 0.8]), obj(table, 2.0, 2.95, [1.0, 0.6, 0.4])],
        );
        assert!(phi_ergo(&far, &brief).abs() < 1e-12);
        let near = Layout::new(
            room(),
            vec![obj(sofa, 2.0, 1.0, [2.0, 0.9, 0.8]), obj(table, 2.0, 2.15, [1.0, 0.6, 0.4])],
        );
        assert!((phi_ergo(&near, &brief) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn phi_func_examples() {
        let cat = Catalog::default();
        let bed = cat.category_id("bed").unwrap();
        let ns = cat.category_id("nightstand").unwrap();
        let req = AdjacencyRequirement {
            a: ns,
            b: bed,
            max_distance: 0.5,
        };
        let brief = brief_with(vec![], vec![req.clone()], &[]);
        // bed x in [1.2, 2.8]; nightstand at gap 0.3 to its right
        let close = Layout::new(
            room(),
            vec![obj(bed, 2.0, 2.0, [1.6, 2.0, 0.5]), obj(ns, 3.325, 2.0, [0.45, 0.4, 0.55])],
        );
        assert_eq!(phi_func(&close, &brief), 0);
        let far = Layout::new(
            room(),
            vec![obj(bed, 2.0, 2.0, [1.6, 2.0, 0.5]), obj(ns, 4.7, 2.0, [0.45, 0.4, 0.55])],
        );
        assert_eq!(phi_func(&far, &brief), 1);
        let brief = brief_with(vec![], vec![req], &[(bed, 1)]);
        let no_bed = Layout::new(room(), vec![obj(ns, 1.0, 1.0, [0.45, 0.4, 0.55])]);
        assert_eq!(phi_func(&no_bed, &brief), 2);
    }

    #[test]
    fn r_feas_arithmetic_and_linearity() {
        let cat = Catalog::default();
        let bed = cat.category_id("bed").unwrap();
        let brief = brief_with(vec![], vec![], &[(bed, 1)]);
        let twins = Layout::new(
            room(),
            vec![obj(0, 2.0, 2.0, [1.0, 1.0, 1.0]), obj(0, 2.5, 2.0, [1.0, 1.0, 1.0])],
        );
        let unit = r_feas(&twins, &brief, &FeasibilityWeights::default());
        let doubled = r_feas(
            &twins,
            &brief,
            &FeasibilityWeights {
                lambda_coll: 2.0,
                ..Default::default()
            },
        );
        assert_eq!(unit.phi_func, 0);
        assert!((doubled.r_feas - unit.r_feas + unit.phi_coll).abs() < 1e-12);
        let clean = Layout::new(room(), vec![obj(bed, 2.0, 2.0, [1.6, 2.0, 0.5])]);
        let report = r_feas(&clean, &brief, &FeasibilityWeights::default());
        assert_eq!(report.r_feas, 0.0);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn oob_and_oor() {
        let inside = Layout::new(
            room(),
            vec![obj(0, 1.0, 1.0, [1.0, 1.0, 1.0]), obj(0, 3.0, 3.0, [1.0, 1.0, 1.0])],
        );
        assert_eq!(oob_rate(std::slice::from_ref(&inside)).unwrap(), 0.0);
        assert_eq!(oor_rate(&[inside]).unwrap(), 0.0);
        let straddle = Layout::new(
            room(),
            vec![
                obj(0, 1.0, 1.0, [0.5, 0.5, 1.0]),
                obj(0, 2.0, 1.0, [0.5, 0.5, 1.0]),
                obj(0, 3.0, 1.0, [0.5, 0.5, 1.0]),
                obj(0, 5.0, 1.0, [0.5, 0.5, 1.0]),
            ],
        );
        assert_eq!(oob_rate(&[straddle]).unwrap(), 25.0);
        let cubes = Layout::new(
            room(),
            vec![obj(0, 2.0, 2.0, [1.0, 1.0, 1.0]), obj(0, 2.0, 2.0, [1.0, 1.0, 1.0])],
        );
        assert_eq!(oor_rate(&[cubes]).unwrap(), 50.0);
        assert!(oob_rate(&[]).is_err());
        assert!(oor_rate(&[]).is_err());
    }
}
