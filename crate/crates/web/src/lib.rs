//! Browser demo. A [`Demo`] holds one 2D robot: grow it from a seed cell,
//! watch it walk, cut away its left half and let it regrow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softbot_core::grid::{cleanup, develop, Morphology};
use softbot_core::physics::{evaluate_locomotion_recorded, Recording};
use softbot_core::regen::apply_damage;
use softbot_core::{CellGrid, Genome, NetworkInstance, Preset, RunConfig};
use wasm_bindgen::prelude::*;

/// Hand-set genome: a cell becomes muscle A when its -x neighbor is living
/// and muscle B otherwise. It fills the lattice and regrows after damage.
pub fn walker_genome(cfg: &RunConfig) -> Genome {
    let arch = cfg.architecture().expect("preset architecture");
    let (ni, nh) = (arch.input_dim, arch.hidden_dim);
    let mut g = Genome::zeros(arch);
    g.params[7] = 10.0;
    g.params[nh * ni] = -5.0;
    let base = nh * ni + nh;
    g.params[base + 3 * nh] = 2.0;
    g.params[base + 4 * nh] = -2.0;
    g.params[base + 6 * nh + 5] = 3.0;
    g
}

fn codes(grids: &[CellGrid]) -> Vec<u8> {
    grids.iter().flat_map(|g| g.states().iter().map(|s| s.code())).collect()
}

#[wasm_bindgen]
pub struct Demo {
    cfg: RunConfig,
    genome: Genome,
    grid: CellGrid,
    body: Morphology,
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        let cfg = RunConfig::preset(Preset::TwoD);
        let genome = walker_genome(&cfg);
        let grid = cfg.init_grid().expect("preset seed");
        let body = Morphology::empty(cfg.dims);
        Demo {
            cfg,
            genome,
            grid,
            body,
        }
    }

    pub fn width(&self) -> usize {
        self.cfg.dims.nx
    }

    pub fn height(&self) -> usize {
        self.cfg.dims.ny
    }

    /// Swaps in a random genome. Large `scale` values grow more varied bodies.
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let arch = self.genome.arch;
        self.genome = Genome::random(arch, &mut ChaCha8Rng::seed_from_u64(seed), scale);
    }

    pub fn use_walker(&mut self) {
        self.genome = walker_genome(&self.cfg);
    }

    /// Develops from the seed cell. Returns the state codes of every step,
    /// grid after grid, each `width * height` long.
    pub fn grow(&mut self) -> Result<Vec<u8>, JsError> {
        let net = NetworkInstance::new(self.genome.clone());
        let grids = develop(&self.cfg.init_grid()?, &net, self.cfg.development_steps)?;
        self.grid = grids.last().expect("start grid").clone();
        self.body = cleanup(&self.grid);
        Ok(codes(&grids))
    }

    /// Cleaned body after the last grow or regrow, as state codes.
    pub fn body(&self) -> Vec<u8> {
        self.body.voxels().iter().map(|s| s.code()).collect()
    }

    /// Runs one locomotion evaluation of the current body. Returns
    /// `[frames, masses, distance, then x, z per mass per frame]` in voxel
    /// edges.
    pub fn simulate(&self) -> Result<Vec<f64>, JsError> {
        let c = &self.cfg;
        let rec = Recording {
            sample_every: c.replay_sample_every,
            frames: true,
        };
        let r = evaluate_locomotion_recorded(&self.body, &c.material, &c.physics, c.duration, rec)?;
        let masses = r.frames.first().map_or(0, Vec::len);
        let mut out = vec![r.frames.len() as f64, masses as f64, r.distance];
        for frame in &r.frames {
            for p in frame {
                out.extend([p[0], p[2]]);
            }
        }
        Ok(out)
    }

    /// Removes the low-x half of the grown grid and regrows it with the same
    /// genome. Returns the regrowth steps like [`Demo::grow`].
    pub fn damage_and_regrow(&mut self) -> Result<Vec<u8>, JsError> {
        let damaged = apply_damage(&self.grid, &self.cfg.damage)?;
        let net = NetworkInstance::new(self.genome.clone());
        let grids = develop(&damaged, &net, self.cfg.regen_steps)?;
        self.grid = grids.last().expect("start grid").clone();
        self.body = cleanup(&self.grid);
        Ok(codes(&grids))
    }
}
