//! Clearance-weighted circulation cost from the door to furniture that
//! needs to be reached.
//!
//! Free floor is rasterized, an exact Euclidean distance transform gives the
//! clearance of every free cell, and Dijkstra on the 8-connected grid finds
//! the cheapest route where entering a cell costs `cell / max(clearance, floor)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, Vec2};
use crate::scene::{footprint, Catalog, Layout};

pub const CELL_SIZE: f64 = 0.05;
pub const CLEARANCE_FLOOR: f64 = 0.05;
pub const UNREACHABLE_COST: f64 = 10.0;

/// Occupancy raster with a one-cell obstacle border around the room's bounding box.
#[derive(Debug, Clone)]
pub struct FloorGrid {
    pub width: usize,
    pub height: usize,
    pub cell: f64,
    pub origin: Vec2,
    pub free: Vec<bool>,
}

impl FloorGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell,
            self.origin.y + (j as f64 + 0.5) * self.cell,
        )
    }

    /// Rasterizes the room at `cell` meters; cells whose center lies inside
    /// an object footprint or outside the polygon are obstacles.
    pub fn from_layout(layout: &Layout, cell: f64) -> Self {
        let bbox = layout.room.bounding_box();
        let width = (bbox.width() / cell - 1e-9).ceil() as usize + 2;
        let height = (bbox.depth() / cell - 1e-9).ceil() as usize + 2;
        let origin = Vec2::new(bbox.min.x - cell, bbox.min.y - cell);
        let rects: Vec<_> = layout.objects.iter().map(footprint).collect();
        let mut free = vec![false; width * height];
        for j in 0..height {
            for i in 0..width {
                let c = Vec2::new(
                    origin.x + (i as f64 + 0.5) * cell,
                    origin.y + (j as f64 + 0.5) * cell,
                );
                let blocked = rects.iter().any(|r| {
                    c.x >= r.min.x && c.x <= r.max.x && c.y >= r.min.y && c.y <= r.max.y
                });
                free[j * width + i] = !blocked && point_in_polygon(c, layout.room.boundary());
            }
        }
        Self {
            width,
            height,
            cell,
            origin,
            free,
        }
    }

    /// Euclidean distance (meters) from each cell center to the nearest obstacle cell center.
    pub fn clearance(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let inf = 1e20;
        let mut sq = vec![0.0; w * h];
        // Columns first, then rows (separable squared EDT).
        let mut f = vec![0.0; w.max(h)];
        let mut d = vec![0.0; w.max(h)];
        for i in 0..w {
            for (j, fj) in f[..h].iter_mut().enumerate() {
                *fj = if self.free[j * w + i] { inf } else { 0.0 };
            }
            edt_1d(&f[..h], &mut d[..h]);
            for (j, &dj) in d[..h].iter().enumerate() {
                sq[j * w + i] = dj;
            }
        }
        for j in 0..h {
            f[..w].copy_from_slice(&sq[j * w..(j + 1) * w]);
            edt_1d(&f[..w], &mut d[..w]);
            sq[j * w..(j + 1) * w].copy_from_slice(&d[..w]);
        }
        sq.into_iter().map(|s| s.sqrt() * self.cell).collect()
    }
}

/// Lower envelope of parabolas: `d[q] = min_p (q - p)^2 + f[p]`.
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect = |p: usize, q: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = intersect(v[k], q);
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    cost: f64,
    index: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Cost of entering cell `idx` with a step of length factor `step` (1 or √2).
pub fn entry_cost(clearance: f64, cell: f64, step: f64) -> f64 {
    step * cell / clearance.max(CLEARANCE_FLOOR)
}

/// Single-source path costs over free cells. The start cell is free of
/// charge; diagonal moves may not cut obstacle corners. Unreached cells are
/// `f64::INFINITY`.
pub fn path_costs(grid: &FloorGrid, clearance: &[f64], start: usize) -> Vec<f64> {
    let (w, h) = (grid.width as i64, grid.height as i64);
    let mut dist = vec![f64::INFINITY; grid.free.len()];
    if !grid.free[start] {
        return dist;
    }
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        cost: 0.0,
        index: start,
    });
    while let Some(Frontier { cost, index }) = heap.pop() {
        if cost > dist[index] {
            continue;
        }
        let (i, j) = ((index as i64) % w, (index as i64) / w);
        for (di, dj) in NEIGHBORS {
            let (ni, nj) = (i + di, j + dj);
            if ni < 0 || nj < 0 || ni >= w || nj >= h {
                continue;
            }
            let next = (nj * w + ni) as usize;
            if !grid.free[next] {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            if diagonal
                && (!grid.free[(j * w + ni) as usize] || !grid.free[(nj * w + i) as usize])
            {
                continue;
            }
            let step = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
            let candidate = cost + entry_cost(clearance[next], grid.cell, step);
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(Frontier {
                    cost: candidate,
                    index: next,
                });
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAccess {
    pub object: usize,
    pub cost: f64,
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayReport {
    /// Mean access cost over objects that need access (0 when there are none).
    pub cost: f64,
    pub objects: Vec<ObjectAccess>,
    /// Set when no object in the layout needs access.
    pub no_access_objects: bool,
}

impl PathwayReport {
    pub fn any_unreachable(&self) -> bool {
        self.objects.iter().any(|o| !o.reachable)
    }
}

fn nearest_free_cell(grid: &FloorGrid, p: Vec2) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for j in 0..grid.height {
        for i in 0..grid.width {
            let idx = grid.index(i, j);
            if !grid.free[idx] {
                continue;
            }
            let d = (grid.center(i, j) - p).norm();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
    }
    best.map(|(_, idx)| idx)
}

/// Free cells 8-adjacent to the cells covered by object `k`.
fn access_cells(grid: &FloorGrid, layout: &Layout, k: usize) -> Vec<usize> {
    let rect = footprint(&layout.objects[k]);
    let to_i = |x: f64| ((x - grid.origin.x) / grid.cell).floor() as i64;
    let to_j = |y: f64| ((y - grid.origin.y) / grid.cell).floor() as i64;
    let (w, h) = (grid.width as i64, grid.height as i64);
    let (i0, i1) = (to_i(rect.min.x) - 1, to_i(rect.max.x) + 1);
    let (j0, j1) = (to_j(rect.min.y) - 1, to_j(rect.max.y) + 1);
    let mut cells = Vec::new();
    for j in j0.max(0)..=j1.min(h - 1) {
        for i in i0.max(0)..=i1.min(w - 1) {
            let idx = (j * w + i) as usize;
            if grid.free[idx] {
                cells.push(idx);
            }
        }
    }
    cells
}

/// Mean door-to-object circulation cost over `needs_access` objects.
pub fn pathway_cost(layout: &Layout, catalog: &Catalog) -> Result<PathwayReport> {
    let door = layout
        .room
        .doors()
        .first()
        .ok_or_else(|| Error::InvalidInput("pathway cost needs a room with a door".into()))?;
    let targets: Vec<usize> = layout
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| catalog.category(o.category_id).is_some_and(|c| c.needs_access))
        .map(|(k, _)| k)
        .collect();
    if targets.is_empty() {
        return Ok(PathwayReport {
            cost: 0.0,
            objects: Vec::new(),
            no_access_objects: true,
        });
    }
    let grid = FloorGrid::from_layout(layout, CELL_SIZE);
    let clearance = grid.clearance();
    let dist = match nearest_free_cell(&grid, door.midpoint()) {
        Some(start) => path_costs(&grid, &clearance, start),
        None => vec![f64::INFINITY; grid.free.len()],
    };
    let objects: Vec<ObjectAccess> = targets
        .into_iter()
        .map(|k| {
            let best = access_cells(&grid, layout, k)
                .into_iter()
                .map(|idx| dist[idx])
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                ObjectAccess {
                    object: k,
                    cost: best,
                    reachable: true,
                }
            } else {
                ObjectAccess {
                    object: k,
                    cost: UNREACHABLE_COST,
                    reachable: false,
                }
            }
        })
        .collect();
    let cost = objects.iter().map(|o| o.cost).sum::<f64>() / objects.len() as f64;
    Ok(PathwayReport {
        cost,
        objects,
        no_access_objects: false,
    })
}
