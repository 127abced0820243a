//! Damage, regrowth and the recovery report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{self, Development, EvoConfig, EvoHistory, FitnessContext, FitnessKind, Task};
use crate::grid::{cleanup_with, develop_final, CellGrid, CleanupOptions, Morphology};
use crate::nets::NetworkInstance;
use crate::physics::{evaluate_locomotion, MaterialParams, PhysicsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

/// Removes every cell strictly on `side` of `plane_index` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DamageSpec {
    pub axis: Axis,
    pub side: Side,
    pub plane_index: usize,
}

impl DamageSpec {
    /// `x < n / 2`: the low-x half, keeping the center plane.
    pub fn left_half(n: usize) -> Self {
        DamageSpec {
            axis: Axis::X,
            side: Side::Low,
            plane_index: n / 2,
        }
    }

    pub fn removes(&self, c: [usize; 3]) -> bool {
        let v = c[self.axis.index()];
        match self.side {
            Side::Low => v < self.plane_index,
            Side::High => v > self.plane_index,
        }
    }
}

/// Clears the removed side: empty state, alpha 0, zero memory. The intact
/// side is untouched.
pub fn apply_damage(grid: &CellGrid, spec: &DamageSpec) -> Result<CellGrid> {
    let dims = grid.dims();
    let extent = [dims.nx, dims.ny, dims.nz][spec.axis.index()];
    if spec.plane_index >= extent {
        return Err(Error::config(format!(
            "damage plane {} lies outside the {} lattice along {:?}",
            spec.plane_index,
            dims.label(),
            spec.axis
        )));
    }
    let mut out = grid.clone();
    for idx in 0..dims.len() {
        if spec.removes(dims.coord(idx)) {
            out.clear(idx);
        }
    }
    Ok(out)
}

/// Number of lattice positions, frame included, whose material states match.
pub fn similarity(a: &Morphology, b: &Morphology) -> Result<usize> {
    check_dims(a, b)?;
    Ok(a.voxels().iter().zip(b.voxels()).filter(|(x, y)| x == y).count())
}

/// Number of positions whose material states differ.
pub fn hamming(a: &Morphology, b: &Morphology) -> Result<usize> {
    check_dims(a, b)?;
    Ok(a.voxels().iter().zip(b.voxels()).filter(|(x, y)| x != y).count())
}

fn check_dims(a: &Morphology, b: &Morphology) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::contract(format!(
            "cannot compare {} with {} morphology",
            a.dims().label(),
            b.dims().label()
        )));
    }
    Ok(())
}

/// Develops a damaged grid with the regeneration network and cleans it up.
pub fn regrow(damaged: &CellGrid, regen_net: &NetworkInstance, steps: usize) -> Result<Morphology> {
    regrow_with(damaged, regen_net, steps, CleanupOptions::default())
}

pub fn regrow_with(
    damaged: &CellGrid,
    regen_net: &NetworkInstance,
    steps: usize,
    cleanup: CleanupOptions,
) -> Result<Morphology> {
    let grid = develop_final(damaged, regen_net, steps)?;
    Ok(cleanup_with(&grid, cleanup))
}

/// The similarity fitness task for evolving a regeneration network.
pub fn regeneration_task(
    original: &Morphology,
    damaged_template: &CellGrid,
    arch: crate::nets::NetworkArchitecture,
    steps: usize,
    cfg: &EvoConfig,
) -> Result<Task> {
    if cfg.fitness_kind != FitnessKind::Similarity {
        return Err(Error::config("regeneration evolution needs the similarity fitness"));
    }
    if original.dims() != damaged_template.dims() {
        return Err(Error::contract("original and damaged template lattices differ"));
    }
    if arch.input_dim != damaged_template.dims().input_width()
        || arch.memory_width() != damaged_template.memory_width()
    {
        return Err(Error::contract("regeneration network does not fit the damaged grid"));
    }
    Ok(Task {
        cfg: cfg.clone(),
        ctx: FitnessContext {
            arch,
            development: Development {
                start: damaged_template.clone(),
                steps,
                cleanup: CleanupOptions::default(),
            },
            material: MaterialParams::default(),
            physics: PhysicsConfig::default(),
            duration: 1.0,
            target: Some(original.clone()),
        },
    })
}

/// Evolves a regeneration network scored by similarity to `original`.
pub fn evolve_regeneration(
    original: &Morphology,
    damaged_template: &CellGrid,
    arch: crate::nets::NetworkArchitecture,
    steps: usize,
    cfg: &EvoConfig,
    threads: usize,
) -> Result<EvoHistory> {
    let task = regeneration_task(original, damaged_template, arch, steps, cfg)?;
    evo::evolve(cfg, &task, threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub similarity_count: usize,
    pub total_cells: usize,
    pub similarity_percent: f64,
    pub distance_original: f64,
    pub distance_damaged: f64,
    pub distance_regrown: f64,
    /// `None` when the original did not move.
    pub recovery_percent_damaged: Option<f64>,
    pub recovery_percent_regrown: Option<f64>,
}

/// Scores the three morphologies under identical physics.
pub fn recovery_report(
    original: &Morphology,
    damaged: &Morphology,
    regrown: &Morphology,
    mat: &MaterialParams,
    pc: &PhysicsConfig,
    duration: f64,
) -> Result<RecoveryReport> {
    check_dims(original, damaged)?;
    let sim = similarity(regrown, original)?;
    let total = original.dims().len();
    let d_orig = evaluate_locomotion(original, mat, pc, duration)?.distance;
    let d_dam = evaluate_locomotion(damaged, mat, pc, duration)?.distance;
    let d_reg = evaluate_locomotion(regrown, mat, pc, duration)?.distance;
    let pct = |d: f64| (d_orig > 0.0).then(|| 100.0 * (d / d_orig));
    Ok(RecoveryReport {
        similarity_count: sim,
        total_cells: total,
        similarity_percent: 100.0 * sim as f64 / total as f64,
        distance_original: d_orig,
        distance_damaged: d_dam,
        distance_regrown: d_reg,
        recovery_percent_damaged: pct(d_dam),
        recovery_percent_regrown: pct(d_reg),
    })
}

impl RecoveryReport {
    /// e.g. `98% (718/729)`. Percentages are truncated, never rounded up.
    pub fn similarity_cell(&self) -> String {
        format!(
            "{}% ({}/{})",
            self.similarity_percent.floor(),
            self.similarity_count,
            self.total_cells
        )
    }

    /// e.g. `40.4 | 27.2 (67%) | 35.1 (86%)`
    pub fn locomotion_cells(&self) -> String {
        let pct = |p: Option<f64>| match p {
            Some(p) => format!("{}%", p.floor()),
            None => "n/a".to_string(),
        };
        format!(
            "{:.1} | {:.1} ({}) | {:.1} ({})",
            self.distance_original,
            self.distance_damaged,
            pct(self.recovery_percent_damaged),
            self.distance_regrown,
            pct(self.recovery_percent_regrown)
        )
    }

    /// One table row: `name (variant) | similarity | original | damaged | regrown`.
    pub fn row(&self, name: &str, variant: &str) -> String {
        format!("{name} ({variant}) | {} | {}", self.similarity_cell(), self.locomotion_cells())
    }
}

pub const TABLE_HEADER: &str = "Morphology (Network) | Similarity | Original | Damaged | Regrown";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellState, Dims};
    use crate::nets::{Genome, NetworkArchitecture, NetworkVariant};

    fn symmetric_grid() -> CellGrid {
        let mut g = CellGrid::empty(Dims::cube(9), 4);
        for z in 2..7 {
            for y in 3..6 {
                for x in 2..7 {
                    let s = if x == 4 { CellState::HardPassive } else { CellState::MuscleA };
                    g.set([x, y, z], s, 0.8);
                    let idx = g.dims().index([x, y, z]);
                    g.memory_at_mut(idx).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
                }
            }
        }
        g
    }

    #[test]
    fn damage_clears_low_side_only() {
        let g = symmetric_grid();
        let d = apply_damage(&g, &DamageSpec::left_half(9)).unwrap();
        for idx in 0..d.dims().len() {
            let c = d.dims().coord(idx);
            if c[0] < 4 {
                assert_eq!(d.states()[idx], CellState::Empty);
                assert_eq!(d.alphas()[idx], 0.0);
                assert!(d.memory_at(idx).iter().all(|&m| m == 0.0));
            } else {
                assert_eq!(d.states()[idx], g.states()[idx]);
                assert_eq!(d.alphas()[idx], g.alphas()[idx]);
                assert_eq!(d.memory_at(idx), g.memory_at(idx));
            }
        }
        // the kept half mirrors what was removed
        for idx in 0..g.dims().len() {
            let [x, y, z] = g.dims().coord(idx);
            if x < 4 {
                assert_eq!(g.state([x, y, z]), d.state([8 - x, y, z]));
            }
        }
        assert_eq!(apply_damage(&d, &DamageSpec::left_half(9)).unwrap(), d);
    }

    #[test]
    fn damage_plane_outside_lattice() {
        let g = symmetric_grid();
        let spec = DamageSpec {
            axis: Axis::Z,
            side: Side::High,
            plane_index: 9,
        };
        assert!(matches!(apply_damage(&g, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn similarity_examples() {
        let a = Morphology::empty(Dims::cube(9));
        assert_eq!(similarity(&a, &a).unwrap(), 729);
        let mut b = a.clone();
        b.set([4, 4, 4], CellState::MuscleB);
        assert_eq!(similarity(&a, &b).unwrap(), 728);
        assert_eq!(hamming(&a, &b).unwrap(), 1);
        assert!(similarity(&a, &Morphology::empty(Dims::planar(7, 7))).is_err());
    }

    #[test]
    fn report_formatting() {
        let r = RecoveryReport {
            similarity_count: 718,
            total_cells: 729,
            similarity_percent: 100.0 * 718.0 / 729.0,
            distance_original: 40.4,
            distance_damaged: 27.2,
            distance_regrown: 35.1,
            recovery_percent_damaged: Some(100.0 * 27.2 / 40.4),
            recovery_percent_regrown: Some(100.0 * 35.1 / 40.4),
        };
        assert_eq!(r.similarity_cell(), "98% (718/729)");
        let tripod = RecoveryReport {
            similarity_count: 728,
            similarity_percent: 100.0 * 728.0 / 729.0,
            ..r.clone()
        };
        assert_eq!(tripod.similarity_cell(), "99% (728/729)");
        assert_eq!(r.locomotion_cells(), "40.4 | 27.2 (67%) | 35.1 (86%)");
        let undefined = RecoveryReport {
            recovery_percent_damaged: None,
            recovery_percent_regrown: None,
            ..r
        };
        assert!(undefined.locomotion_cells().contains("(n/a)"));
    }

    #[test]
    fn regrow_zero_steps_is_cleanup() {
        let g = symmetric_grid();
        let arch = NetworkArchitecture::new(NetworkVariant::Recurrent, 3, 2).unwrap();
        let net = NetworkInstance::new(Genome::zeros(arch));
        let d = apply_damage(&g, &DamageSpec::left_half(9)).unwrap();
        assert_eq!(regrow(&d, &net, 0).unwrap(), crate::grid::cleanup(&d));
        // zero weights: alpha clamps to 0, nothing survives
        assert_eq!(regrow(&d, &net, 3).unwrap().live_voxel_count(), 0);
    }

    #[test]
    fn regeneration_task_requires_similarity() {
        let g = symmetric_grid();
        let arch = NetworkArchitecture::new(NetworkVariant::Recurrent, 3, 2).unwrap();
        let cfg = EvoConfig::default();
        let m = crate::grid::cleanup(&g);
        assert!(regeneration_task(&m, &g, arch, 10, &cfg).is_err());
    }
}
