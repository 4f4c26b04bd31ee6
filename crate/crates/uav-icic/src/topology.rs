//! Hexagonal cell layout, tier neighborhoods and the UAV's coordination region.
//!
//! Cells are flat-top hexagons generated on axial coordinates, with cell 0 at
//! the origin and ids assigned ring by ring, counterclockwise from the +x
//! axis. Ring membership is decided by exact integer hex distance, never by
//! Euclidean thresholds, so neighborhoods need no tolerance.

use std::collections::{BTreeMap, BTreeSet};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Axial hex coordinate (flat-top orientation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

/// Axial step directions, ordered counterclockwise starting from the
/// neighbor at +30 degrees.
const DIRECTIONS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

impl Axial {
    pub fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }

    /// Exact hex (ring) distance between two cells.
    pub fn hex_distance(self, other: Axial) -> u32 {
        let dq = i64::from(self.q) - i64::from(other.q);
        let dr = i64::from(self.r) - i64::from(other.r);
        ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
    }

    /// Cartesian center in meters for a given cell radius (center-to-vertex).
    pub fn to_xy(self, cell_radius_m: f64) -> (f64, f64) {
        let x = 1.5 * f64::from(self.q) * cell_radius_m;
        let y = SQRT_3 * (f64::from(self.q) / 2.0 + f64::from(self.r)) * cell_radius_m;
        (x, y)
    }
}

/// One hexagonal cell with its base station at the center.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Index into [`HexGrid::cells`]; unique and stable across runs.
    pub id: usize,
    pub axial: Axial,
    /// BS position in meters.
    pub center_m: (f64, f64),
    /// BS antenna height in meters.
    pub bs_height_m: f64,
}

/// The hexagonal layout of all base stations in the coordination region.
#[derive(Debug, Clone)]
pub struct HexGrid {
    pub cell_radius_m: f64,
    pub tiers: usize,
    pub cells: Vec<Cell>,
    index: BTreeMap<Axial, usize>,
}

impl HexGrid {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of cells a layout with `tiers` rings contains: 1 + 3t(t+1).
    pub fn cell_count_for_tiers(tiers: usize) -> usize {
        1 + 3 * tiers * (tiers + 1)
    }

    pub fn cell_id(&self, axial: Axial) -> Option<usize> {
        self.index.get(&axial).copied()
    }

    /// Cell whose hexagon contains the point, or `None` outside the layout.
    pub fn containing_cell(&self, xy_m: (f64, f64)) -> Option<usize> {
        self.cell_id(round_to_axial(xy_m, self.cell_radius_m))
    }

    /// Horizontal distance from a point to the BS of cell `id`.
    pub fn horizontal_distance_m(&self, id: usize, xy_m: (f64, f64)) -> f64 {
        let c = self.cells[id].center_m;
        ((xy_m.0 - c.0).powi(2) + (xy_m.1 - c.1).powi(2)).sqrt()
    }
}

/// Map a Cartesian point to the axial coordinate of the hexagon containing it.
fn round_to_axial(xy_m: (f64, f64), cell_radius_m: f64) -> Axial {
    let qf = 2.0 / 3.0 * xy_m.0 / cell_radius_m;
    let rf = xy_m.1 / (SQRT_3 * cell_radius_m) - xy_m.0 / (3.0 * cell_radius_m);
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    Axial::new(q as i32, r as i32)
}

/// Build the layout with `tiers` rings around the center cell.
///
/// Cell 0 sits at the origin; each ring is appended counterclockwise
/// starting from the +x axis, which fixes ids across runs.
pub fn build_grid(cell_radius_m: f64, tiers: usize, bs_height_m: f64) -> HexGrid {
    assert!(cell_radius_m > 0.0, "cell radius must be positive");
    assert!(bs_height_m > 0.0, "BS height must be positive");

    let mut axials = vec![Axial::new(0, 0)];
    for t in 1..=tiers {
        axials.extend(ring_axials(t as i32, cell_radius_m));
    }

    let mut index = BTreeMap::new();
    let cells = axials
        .iter()
        .enumerate()
        .map(|(id, &axial)| {
            index.insert(axial, id);
            Cell {
                id,
                axial,
                center_m: axial.to_xy(cell_radius_m),
                bs_height_m,
            }
        })
        .collect();

    HexGrid {
        cell_radius_m,
        tiers,
        cells,
        index,
    }
}

/// Cells of ring `t`, sorted by polar angle in [0, 2pi).
fn ring_axials(t: i32, cell_radius_m: f64) -> Vec<Axial> {
    let mut ring = Vec::with_capacity(6 * t as usize);
    let mut cur = Axial::new(t, 0);
    for side in 0..6 {
        let (dq, dr) = DIRECTIONS[(side + 2) % 6];
        for _ in 0..t {
            ring.push(cur);
            cur = Axial::new(cur.q + dq, cur.r + dr);
        }
    }
    debug_assert_eq!(cur, Axial::new(t, 0));
    ring.sort_by(|a, b| {
        let ang = |ax: &Axial| {
            let (x, y) = ax.to_xy(cell_radius_m);
            let a = y.atan2(x);
            if a < 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            }
        };
        ang(a).partial_cmp(&ang(b)).unwrap()
    });
    ring
}

/// Per-cell q-ring neighborhoods, N_j(q), for every q up to `q_max`.
#[derive(Debug, Clone)]
pub struct NeighborSets {
    q_max: usize,
    /// sets[j][q - 1] holds the ids within the first q rings of cell j.
    sets: Vec<Vec<BTreeSet<usize>>>,
    empty: BTreeSet<usize>,
}

impl NeighborSets {
    pub fn q_max(&self) -> usize {
        self.q_max
    }

    /// Number of cells these sets were built for.
    pub fn cell_count(&self) -> usize {
        self.sets.len()
    }

    /// The cells within the first `q` rings of `cell`, excluding `cell`
    /// itself. `q = 0` is the empty set.
    pub fn get(&self, cell: usize, q: usize) -> &BTreeSet<usize> {
        if q == 0 {
            return &self.empty;
        }
        assert!(q <= self.q_max, "q={q} exceeds q_max={}", self.q_max);
        &self.sets[cell][q - 1]
    }
}

/// Compute N_j(q) for all cells and all q in 1..=q_max by exact hex distance,
/// clipped to the generated layout.
pub fn neighbor_sets(grid: &HexGrid, q_max: usize) -> NeighborSets {
    let n = grid.num_cells();
    let mut sets = vec![vec![BTreeSet::new(); q_max]; n];
    for a in &grid.cells {
        for b in &grid.cells {
            if a.id == b.id {
                continue;
            }
            let d = a.axial.hex_distance(b.axial) as usize;
            for q in d..=q_max {
                if q >= 1 {
                    sets[a.id][q - 1].insert(b.id);
                }
            }
        }
    }
    NeighborSets {
        q_max,
        sets,
        empty: BTreeSet::new(),
    }
}

/// Cells whose BS receives non-negligible UAV signal.
///
/// With an isotropic UAV antenna (`main_lobe_radius_m = None`) the region is
/// the whole layout. A directional antenna restricts it to the BSs under the
/// main-lobe footprint of radius r_c around the UAV's ground projection.
pub fn icic_region(
    grid: &HexGrid,
    uav_xy_m: (f64, f64),
    main_lobe_radius_m: Option<f64>,
) -> BTreeSet<usize> {
    match main_lobe_radius_m {
        None => grid.cells.iter().map(|c| c.id).collect(),
        Some(rc) => grid
            .cells
            .iter()
            .filter(|c| grid.horizontal_distance_m(c.id, uav_xy_m) <= rc)
            .map(|c| c.id)
            .collect(),
    }
}
