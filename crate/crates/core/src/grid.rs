//! The developmental lattice: cell states, maturity, the synchronous neural
//! update and the cleanup that turns a grown grid into a morphology.
//!
//! Cells are stored in index order `x + nx * (y + ny * z)` (x fastest, then
//! y, then z). Every rule that walks cells "in order" uses this order. A 2D
//! lattice is a 3D lattice with `nz == 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::NetworkInstance;

/// Alpha above which a cell counts as living.
pub const LIVING_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Empty = 0,
    SoftPassive = 1,
    HardPassive = 2,
    MuscleA = 3,
    MuscleB = 4,
}

impl CellState {
    pub const ALL: [CellState; 5] = [
        CellState::Empty,
        CellState::SoftPassive,
        CellState::HardPassive,
        CellState::MuscleA,
        CellState::MuscleB,
    ];
    pub const COUNT: usize = 5;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Network input encoding of the state, `code / 4`.
    pub fn scalar(self) -> f64 {
        f64::from(self.code()) / 4.0
    }

    pub fn is_empty(self) -> bool {
        self == CellState::Empty
    }

    pub fn is_muscle(self) -> bool {
        matches!(self, CellState::MuscleA | CellState::MuscleB)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maturity {
    Empty,
    Growing,
    Living,
}

/// Maturity tag of an alpha value. The threshold is strict: exactly 0.1 is
/// still growing.
pub fn classify_maturity(alpha: f64) -> Maturity {
    if alpha > LIVING_THRESHOLD {
        Maturity::Living
    } else if alpha > 0.0 {
        Maturity::Growing
    } else {
        Maturity::Empty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn planar(nx: usize, ny: usize) -> Self {
        Dims { nx, ny, nz: 1 }
    }

    pub const fn cube(n: usize) -> Self {
        Dims { nx: n, ny: n, nz: n }
    }

    /// Lattice dimensionality: 2 when `nz == 1`, otherwise 3.
    pub fn rank(&self) -> usize {
        if self.nz == 1 {
            2
        } else {
            3
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    pub fn coord(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / (self.nx * self.ny);
        [x, y, z]
    }

    pub fn contains(&self, [x, y, z]: [usize; 3]) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }

    /// True for cells strictly inside the boundary frame. In 2D the z axis
    /// has no frame.
    pub fn is_interior(&self, [x, y, z]: [usize; 3]) -> bool {
        let inside = |c: usize, n: usize| c >= 1 && c + 1 < n;
        inside(x, self.nx) && inside(y, self.ny) && (self.rank() == 2 || inside(z, self.nz))
    }

    /// Length of the network input for this lattice: `2 * 3^rank`.
    pub fn input_width(&self) -> usize {
        2 * neighborhood_size(self.rank())
    }

    pub fn label(&self) -> String {
        if self.rank() == 2 {
            format!("{}x{}", self.nx, self.ny)
        } else {
            format!("{}x{}x{}", self.nx, self.ny, self.nz)
        }
    }
}

pub fn neighborhood_size(rank: usize) -> usize {
    3usize.pow(rank as u32)
}

/// Moore offsets including the center, dx fastest, then dy, then dz. In 2D
/// dz is always 0. The center sits at index 4 (2D) or 13 (3D).
pub fn moore_offsets(rank: usize) -> Vec<[isize; 3]> {
    let zs: &[isize] = if rank == 2 { &[0] } else { &[-1, 0, 1] };
    let mut out = Vec::with_capacity(neighborhood_size(rank));
    for &dz in zs {
        for dy in -1..=1 {
            for dx in -1..=1 {
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

fn offset_coord(c: [usize; 3], o: [isize; 3], dims: &Dims) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    let n = [dims.nx, dims.ny, dims.nz];
    for k in 0..3 {
        let v = c[k] as isize + o[k];
        if v < 0 || v as usize >= n[k] {
            return None;
        }
        out[k] = v as usize;
    }
    Some(out)
}

/// One lattice cell as seen from outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub state: CellState,
    pub alpha: f64,
    /// Recurrent memory `[h.., c..]`, present only for recurrent networks.
    pub memory: Option<Vec<f64>>,
}

impl Cell {
    pub fn maturity(&self) -> Maturity {
        if self.state.is_empty() {
            Maturity::Empty
        } else {
            classify_maturity(self.alpha)
        }
    }
}

/// Developmental state of the automaton.
///
/// A cell whose state is empty always carries alpha 0; writes normalise this.
/// Recurrent memories are stored flat, `memory_width` values per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    dims: Dims,
    states: Vec<CellState>,
    alpha: Vec<f64>,
    memory_width: usize,
    memory: Vec<f64>,
    step_count: usize,
}

impl CellGrid {
    /// An all-empty grid. `memory_width` is 0 for feed-forward networks.
    pub fn empty(dims: Dims, memory_width: usize) -> Self {
        let n = dims.len();
        CellGrid {
            dims,
            states: vec![CellState::Empty; n],
            alpha: vec![0.0; n],
            memory_width,
            memory: vec![0.0; n * memory_width],
            step_count: 0,
        }
    }

    /// A grid holding a single living soft passive cell (alpha 1) at `seed`.
    pub fn seeded(dims: Dims, seed: [usize; 3], memory_width: usize) -> Result<Self> {
        if !dims.contains(seed) || !dims.is_interior(seed) {
            return Err(Error::config(format!(
                "seed position {seed:?} is not strictly inside the {} lattice",
                dims.label()
            )));
        }
        let mut grid = Self::empty(dims, memory_width);
        grid.set(seed, CellState::SoftPassive, 1.0);
        Ok(grid)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn memory_width(&self) -> usize {
        self.memory_width
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn state(&self, c: [usize; 3]) -> CellState {
        self.states[self.dims.index(c)]
    }

    pub fn alpha(&self, c: [usize; 3]) -> f64 {
        self.alpha[self.dims.index(c)]
    }

    pub fn memory_at(&self, idx: usize) -> &[f64] {
        &self.memory[idx * self.memory_width..(idx + 1) * self.memory_width]
    }

    pub fn memory_at_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.memory[idx * self.memory_width..(idx + 1) * self.memory_width]
    }

    pub fn cell(&self, c: [usize; 3]) -> Cell {
        let idx = self.dims.index(c);
        Cell {
            state: self.states[idx],
            alpha: self.alpha[idx],
            memory: (self.memory_width > 0).then(|| self.memory_at(idx).to_vec()),
        }
    }

    /// Writes a cell, clamping alpha to [0, 1] and forcing alpha 0 for the
    /// empty state. Boundary writes are ignored so the frame stays empty.
    pub fn set(&mut self, c: [usize; 3], state: CellState, alpha: f64) {
        if !self.dims.is_interior(c) {
            return;
        }
        let idx = self.dims.index(c);
        self.write(idx, state, alpha);
    }

    fn write(&mut self, idx: usize, state: CellState, alpha: f64) {
        self.states[idx] = state;
        self.alpha[idx] = if state.is_empty() {
            0.0
        } else {
            alpha.clamp(0.0, 1.0)
        };
    }

    /// Clears a cell: empty, alpha 0, zero memory.
    pub fn clear(&mut self, idx: usize) {
        self.write(idx, CellState::Empty, 0.0);
        self.memory_at_mut(idx).fill(0.0);
    }

    pub fn maturity_at(&self, idx: usize) -> Maturity {
        if self.states[idx].is_empty() {
            Maturity::Empty
        } else {
            classify_maturity(self.alpha[idx])
        }
    }

    pub fn is_living(&self, idx: usize) -> bool {
        self.maturity_at(idx) == Maturity::Living
    }

    pub fn living_count(&self) -> usize {
        (0..self.states.len()).filter(|&i| self.is_living(i)).count()
    }

    /// True if every boundary cell is empty with alpha 0 and zero memory.
    pub fn boundary_is_empty(&self) -> bool {
        (0..self.dims.len()).all(|idx| {
            self.dims.is_interior(self.dims.coord(idx))
                || (self.states[idx].is_empty()
                    && self.alpha[idx] == 0.0
                    && self.memory_at(idx).iter().all(|&m| m == 0.0))
        })
    }
}

/// Network input for the cell at `pos`: `(state scalar, alpha)` per Moore
/// neighbor in [`moore_offsets`] order. Neighbors that are not living
/// contribute `(0, 0)`.
pub fn neighborhood_vector(grid: &CellGrid, pos: [usize; 3]) -> Result<Vec<f64>> {
    let dims = grid.dims();
    if !dims.contains(pos) || !dims.is_interior(pos) {
        return Err(Error::contract(format!(
            "neighborhood requested for non-interior cell {pos:?}"
        )));
    }
    let offsets = moore_offsets(dims.rank());
    let mut out = vec![0.0; 2 * offsets.len()];
    fill_neighborhood(grid, &offsets, pos, &mut out);
    Ok(out)
}

fn fill_neighborhood(grid: &CellGrid, offsets: &[[isize; 3]], pos: [usize; 3], out: &mut [f64]) {
    let dims = grid.dims();
    for (k, &o) in offsets.iter().enumerate() {
        let (s, a) = match offset_coord(pos, o, &dims) {
            Some(c) => {
                let idx = dims.index(c);
                if grid.is_living(idx) {
                    (grid.states[idx].scalar(), grid.alpha[idx])
                } else {
                    (0.0, 0.0)
                }
            }
            None => (0.0, 0.0),
        };
        out[2 * k] = s;
        out[2 * k + 1] = a;
    }
}

/// One synchronous developmental step.
///
/// A cell is updated iff it is interior and either non-empty with alpha > 0
/// or has a living Moore neighbor. Every update reads the previous grid only.
/// Cells outside that frontier end up empty with zero memory.
pub fn develop_step(grid: &CellGrid, net: &NetworkInstance) -> Result<CellGrid> {
    let dims = grid.dims();
    let arch = net.architecture();
    if arch.input_dim != dims.input_width() {
        return Err(Error::contract(format!(
            "network expects {} inputs but a {} lattice provides {}",
            arch.input_dim,
            dims.label(),
            dims.input_width()
        )));
    }
    if arch.memory_width() != grid.memory_width() {
        return Err(Error::contract(format!(
            "network memory width {} does not match grid memory width {}",
            arch.memory_width(),
            grid.memory_width()
        )));
    }

    // Interior cells have all Moore neighbors in bounds, so neighbors are
    // plain index offsets.
    let offsets = moore_offsets(dims.rank());
    let deltas: Vec<isize> = offsets
        .iter()
        .map(|&[dx, dy, dz]| dx + dims.nx as isize * (dy + dims.ny as isize * dz))
        .collect();
    let living: Vec<bool> = (0..dims.len()).map(|i| grid.is_living(i)).collect();
    let mut near_living = vec![false; dims.len()];
    for idx in (0..dims.len()).filter(|&i| living[i]) {
        let c = dims.coord(idx);
        for &o in &offsets {
            if let Some(n) = offset_coord(c, o, &dims) {
                near_living[dims.index(n)] = true;
            }
        }
    }
    let mut next = CellGrid::empty(dims, grid.memory_width());
    next.step_count = grid.step_count + 1;

    let mut input = vec![0.0; dims.input_width()];
    let mut scratch = net.scratch();
    for idx in 0..dims.len() {
        let active = !grid.states[idx].is_empty() && grid.alpha[idx] > 0.0;
        if !(active || near_living[idx]) || !dims.is_interior(dims.coord(idx)) {
            continue;
        }
        for (k, &d) in deltas.iter().enumerate() {
            let n = (idx as isize + d) as usize;
            let (s, a) = if living[n] {
                (grid.states[n].scalar(), grid.alpha[n])
            } else {
                (0.0, 0.0)
            };
            input[2 * k] = s;
            input[2 * k + 1] = a;
        }
        let (state, alpha) = if grid.memory_width() > 0 {
            let mut memory = grid.memory_at(idx).to_vec();
            let out = net.forward_with(&input, Some(&mut memory), &mut scratch)?;
            next.memory_at_mut(idx).copy_from_slice(&memory);
            crate::nets::decode_outputs(&out)
        } else {
            let out = net.forward_with(&input, None, &mut scratch)?;
            crate::nets::decode_outputs(&out)
        };
        next.write(idx, state, alpha);
    }
    Ok(next)
}

/// Runs `steps` developmental steps and returns every grid, the input first.
pub fn develop(grid: &CellGrid, net: &NetworkInstance, steps: usize) -> Result<Vec<CellGrid>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(grid.clone());
    for _ in 0..steps {
        let next = develop_step(out.last().expect("trajectory is never empty"), net)?;
        out.push(next);
    }
    Ok(out)
}

/// Like [`develop`] but keeps only the final grid.
pub fn develop_final(grid: &CellGrid, net: &NetworkInstance, steps: usize) -> Result<CellGrid> {
    let mut current = grid.clone();
    for _ in 0..steps {
        current = develop_step(&current, net)?;
    }
    Ok(current)
}

/// Material occupancy handed to the physics engine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Morphology {
    dims: Dims,
    voxels: Vec<CellState>,
}

impl Morphology {
    pub fn empty(dims: Dims) -> Self {
        Morphology {
            dims,
            voxels: vec![CellState::Empty; dims.len()],
        }
    }

    pub fn from_voxels(dims: Dims, voxels: Vec<CellState>) -> Result<Self> {
        if voxels.len() != dims.len() {
            return Err(Error::contract(format!(
                "{} voxels supplied for a {} lattice",
                voxels.len(),
                dims.label()
            )));
        }
        Ok(Morphology { dims, voxels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxels(&self) -> &[CellState] {
        &self.voxels
    }

    pub fn get(&self, c: [usize; 3]) -> CellState {
        self.voxels[self.dims.index(c)]
    }

    pub fn set(&mut self, c: [usize; 3], state: CellState) {
        let idx = self.dims.index(c);
        self.voxels[idx] = state;
    }

    pub fn live_voxel_count(&self) -> usize {
        self.voxels.iter().filter(|s| !s.is_empty()).count()
    }

    /// Present voxels with their lattice coordinates, in index order.
    pub fn present(&self) -> impl Iterator<Item = ([usize; 3], CellState)> + '_ {
        self.voxels
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(i, &s)| (self.dims.coord(i), s))
    }

    /// Reflection across the plane orthogonal to x.
    pub fn mirror_x(&self) -> Morphology {
        let mut out = Morphology::empty(self.dims);
        for ([x, y, z], s) in self.present() {
            out.set([self.dims.nx - 1 - x, y, z], s);
        }
        out
    }

    /// Places the morphology back on a lattice with alpha 1 for every voxel.
    pub fn to_grid(&self, memory_width: usize) -> CellGrid {
        let mut grid = CellGrid::empty(self.dims, memory_width);
        for (i, &s) in self.voxels.iter().enumerate() {
            grid.write(i, s, if s.is_empty() { 0.0 } else { 1.0 });
        }
        grid
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanupOptions {
    /// Keep only the largest face-connected component.
    pub largest_component: bool,
}

/// Converts a grid into a morphology with the default options.
pub fn cleanup(grid: &CellGrid) -> Morphology {
    cleanup_with(grid, CleanupOptions::default())
}

/// A cell is present iff it is non-empty and living. Two sequential passes in
/// index order, each with immediate effect: first drop cells touching others
/// only diagonally, then drop cells with no Moore neighbor at all.
pub fn cleanup_with(grid: &CellGrid, opts: CleanupOptions) -> Morphology {
    let dims = grid.dims();
    let mut present: Vec<bool> = (0..dims.len()).map(|i| grid.is_living(i)).collect();
    let offsets: Vec<[isize; 3]> = moore_offsets(dims.rank())
        .into_iter()
        .filter(|o| *o != [0, 0, 0])
        .collect();
    let is_face = |o: &[isize; 3]| o.iter().map(|v| v.abs()).sum::<isize>() == 1;

    for idx in 0..dims.len() {
        if !present[idx] {
            continue;
        }
        let c = dims.coord(idx);
        let (mut face, mut diag) = (0, 0);
        for o in &offsets {
            if let Some(n) = offset_coord(c, *o, &dims) {
                if present[dims.index(n)] {
                    if is_face(o) {
                        face += 1;
                    } else {
                        diag += 1;
                    }
                }
            }
        }
        if face == 0 && diag > 0 {
            present[idx] = false;
        }
    }

    for idx in 0..dims.len() {
        if !present[idx] {
            continue;
        }
        let c = dims.coord(idx);
        let any = offsets
            .iter()
            .any(|o| offset_coord(c, *o, &dims).is_some_and(|n| present[dims.index(n)]));
        if !any {
            present[idx] = false;
        }
    }

    if opts.largest_component {
        keep_largest_component(&dims, &mut present);
    }

    let voxels = (0..dims.len())
        .map(|i| if present[i] { grid.states[i] } else { CellState::Empty })
        .collect();
    Morphology { dims, voxels }
}

fn keep_largest_component(dims: &Dims, present: &mut [bool]) {
    let faces: Vec<[isize; 3]> = moore_offsets(dims.rank())
        .into_iter()
        .filter(|o| o.iter().map(|v| v.abs()).sum::<isize>() == 1)
        .collect();
    let mut label = vec![usize::MAX; present.len()];
    let mut sizes = Vec::new();
    for start in 0..present.len() {
        if !present[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let c = dims.coord(i);
            for o in &faces {
                if let Some(n) = offset_coord(c, *o, dims) {
                    let j = dims.index(n);
                    if present[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    // first largest component in index order wins ties
    let Some(best) = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))) else {
        return;
    };
    for (i, p) in present.iter_mut().enumerate() {
        if *p && label[i] != best {
            *p = false;
        }
    }
}
