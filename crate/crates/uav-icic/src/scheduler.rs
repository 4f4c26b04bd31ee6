//! Ground-UE placement, q-tier RB assignment and occupancy bookkeeping.
//!
//! The RB allocation criterion: a BS may give an RB to one of its UEs only if
//! no ground UE within its first q rings (and none of its own) already holds
//! that RB. UEs that cannot be accommodated are reported as blocked, never
//! dropped silently.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::channel::{stream_rng, ChannelState, STREAM_ASSIGN, STREAM_PLACE_CELL, STREAM_PLACE_POS};
use crate::topology::{HexGrid, NeighborSets};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("per-cell UE counts sum to {sum}, expected {expected}")]
    PerCellCountMismatch { sum: usize, expected: usize },
    #[error("per-cell count list has {got} entries for {cells} cells")]
    PerCellLengthMismatch { got: usize, cells: usize },
    #[error("a UE cannot occupy {l} RBs when only {n_rbs} exist")]
    TooManyVirtualRbs { l: usize, n_rbs: usize },
}

/// One active ground UE.
#[derive(Debug, Clone)]
pub struct GroundUe {
    pub id: usize,
    pub serving_cell: usize,
    pub position_m: (f64, f64),
    pub height_m: f64,
    pub tx_power_w: f64,
    /// Assigned RB, `None` until scheduled (or blocked).
    pub rb: Option<usize>,
}

/// Which RBs are occupied where, plus the ground-UE SINRs on them.
#[derive(Debug, Clone)]
pub struct RbOccupancy {
    pub n_cells: usize,
    pub n_rbs: usize,
    /// Per RB, the set of cells with a UE on it (the occupied set).
    occupied: Vec<BTreeSet<usize>>,
    /// (cell, rb) -> UE index.
    ue_of: BTreeMap<(usize, usize), usize>,
    /// gamma_j(n): linear SINR of the scheduled UE, keyed by (cell, rb).
    pub gamma: BTreeMap<(usize, usize), f64>,
    /// UEs the criterion could not accommodate.
    pub blocked: Vec<usize>,
}

impl RbOccupancy {
    pub fn empty(n_cells: usize, n_rbs: usize) -> Self {
        Self {
            n_cells,
            n_rbs,
            occupied: vec![BTreeSet::new(); n_rbs],
            ue_of: BTreeMap::new(),
            gamma: BTreeMap::new(),
            blocked: Vec::new(),
        }
    }

    /// Build directly from (cell, rb, ue) triples; used for synthetic setups.
    pub fn from_assignments(n_cells: usize, n_rbs: usize, entries: &[(usize, usize, usize)]) -> Self {
        let mut occ = Self::empty(n_cells, n_rbs);
        for &(cell, rb, ue) in entries {
            occ.insert(cell, rb, ue);
        }
        occ
    }

    fn insert(&mut self, cell: usize, rb: usize, ue: usize) {
        let fresh = self.occupied[rb].insert(cell);
        assert!(fresh, "cell {cell} already occupies RB {rb}");
        self.ue_of.insert((cell, rb), ue);
    }

    /// The occupied set J(n).
    pub fn occupied_cells(&self, rb: usize) -> &BTreeSet<usize> {
        &self.occupied[rb]
    }

    /// The complement J^c(n): cells where RB `rb` is free.
    pub fn unoccupied_cells(&self, rb: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cells).filter(move |j| !self.occupied[rb].contains(j))
    }

    pub fn is_occupied(&self, cell: usize, rb: usize) -> bool {
        self.occupied[rb].contains(&cell)
    }

    pub fn ue_at(&self, cell: usize, rb: usize) -> Option<usize> {
        self.ue_of.get(&(cell, rb)).copied()
    }

    /// RBs unoccupied in every cell (the altruistic scheme's domain).
    pub fn fully_free_rbs(&self) -> Vec<usize> {
        (0..self.n_rbs)
            .filter(|&n| self.occupied[n].is_empty())
            .collect()
    }
}

/// Place `k` UEs: serving cells either multinomial-uniform or from explicit
/// per-cell counts, positions uniform inside the serving hexagon.
pub fn place_ues(
    grid: &HexGrid,
    k: usize,
    per_cell: Option<&[usize]>,
    ue_height_m: f64,
    tx_power_w: f64,
    seed: u64,
) -> Result<Vec<GroundUe>, ScheduleError> {
    let cells: Vec<usize> = match per_cell {
        Some(counts) => {
            if counts.len() != grid.num_cells() {
                return Err(ScheduleError::PerCellLengthMismatch {
                    got: counts.len(),
                    cells: grid.num_cells(),
                });
            }
            let sum: usize = counts.iter().sum();
            if sum != k {
                return Err(ScheduleError::PerCellCountMismatch { sum, expected: k });
            }
            counts
                .iter()
                .enumerate()
                .flat_map(|(j, &c)| std::iter::repeat(j).take(c))
                .collect()
        }
        None => (0..k)
            .map(|ue| {
                let mut rng = stream_rng(seed, STREAM_PLACE_CELL, ue as u64, 0);
                rng.gen_range(0..grid.num_cells())
            })
            .collect(),
    };

    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(id, cell)| GroundUe {
            id,
            serving_cell: cell,
            position_m: sample_in_cell(grid, cell, seed, id as u64),
            height_m: ue_height_m,
            tx_power_w,
            rb: None,
        })
        .collect())
}

/// Uniform point in the hexagon of `cell`, by rejection from its bounding box.
fn sample_in_cell(grid: &HexGrid, cell: usize, seed: u64, ue: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, STREAM_PLACE_POS, ue, 0);
    let r = grid.cell_radius_m;
    let center = grid.cells[cell].center_m;
    let half_h = r * 3f64.sqrt() / 2.0;
    for _ in 0..10_000 {
        let x = center.0 + rng.gen_range(-r..=r);
        let y = center.1 + rng.gen_range(-half_h..=half_h);
        if grid.containing_cell((x, y)) == Some(cell) {
            return (x, y);
        }
    }
    // Statistically unreachable (75% acceptance per try).
    center
}

/// Processing order for RB assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignOrder {
    /// Cells in id order, UEs within a cell in placement order; each UE
    /// takes the lowest-index feasible RB. Deterministic.
    CellOrder,
    /// UEs in a shuffled order; used by sweeps to decorrelate assignments.
    Random,
}

/// Assign one RB per UE under the q-tier criterion.
///
/// Never panics on infeasible instances: UEs with no feasible RB end up in
/// `occupancy.blocked` with `rb = None`.
pub fn assign_rbs(
    mut ues: Vec<GroundUe>,
    neighbors: &NeighborSets,
    q: usize,
    n_rbs: usize,
    order: AssignOrder,
    seed: u64,
) -> (Vec<GroundUe>, RbOccupancy) {
    assert!(n_rbs >= 1, "need at least one RB");
    let mut occ = RbOccupancy::empty(neighbors.cell_count(), n_rbs);

    let mut idx: Vec<usize> = (0..ues.len()).collect();
    match order {
        AssignOrder::CellOrder => idx.sort_by_key(|&i| (ues[i].serving_cell, i)),
        AssignOrder::Random => {
            let mut rng = stream_rng(seed, STREAM_ASSIGN, 0, 0);
            for i in (1..idx.len()).rev() {
                idx.swap(i, rng.gen_range(0..=i));
            }
        }
    }

    for i in idx {
        let cell = ues[i].serving_cell;
        let blockers = neighbors.get(cell, q);
        let rb = (0..n_rbs).find(|&n| {
            !occ.occupied[n].contains(&cell)
                && occ.occupied[n].iter().all(|j| !blockers.contains(j))
        });
        match rb {
            Some(n) => {
                occ.insert(cell, n, ues[i].id);
                ues[i].rb = Some(n);
            }
            None => occ.blocked.push(ues[i].id),
        }
    }
    occ.blocked.sort_unstable();
    (ues, occ)
}

/// Expand a UE holding `l` RBs into `l` virtual single-RB UEs.
///
/// The virtual UEs share the position and serving cell; `assign_rbs` then
/// gives each a distinct RB because a cell never reuses an RB.
pub fn virtual_ues(
    ue: &GroundUe,
    l: usize,
    n_rbs: usize,
    id_start: usize,
) -> Result<Vec<GroundUe>, ScheduleError> {
    if l > n_rbs {
        return Err(ScheduleError::TooManyVirtualRbs { l, n_rbs });
    }
    Ok((0..l)
        .map(|i| GroundUe {
            id: id_start + i,
            rb: None,
            ..ue.clone()
        })
        .collect())
}

/// gamma_j(n) = p_j(n) H_j(n) / sigma_j^2(n) for every occupied (cell, RB).
pub fn compute_ground_sinrs(
    occupancy: &RbOccupancy,
    ues: &[GroundUe],
    channel: &ChannelState,
) -> BTreeMap<(usize, usize), f64> {
    let mut gamma = BTreeMap::new();
    for n in 0..occupancy.n_rbs {
        for &j in occupancy.occupied_cells(n) {
            let ue = occupancy.ue_at(j, n).expect("occupied cell has a UE");
            let h = channel.h(j, n).expect("gain drawn for scheduled UE");
            gamma.insert((j, n), ues[ue].tx_power_w * h / channel.sigma2(j, n));
        }
    }
    gamma
}
