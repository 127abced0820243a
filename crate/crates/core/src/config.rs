//! Run configuration and the experiment presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evo::{Development, EvoConfig, FitnessContext, FitnessKind, Task};
use crate::grid::{CellGrid, CleanupOptions, Dims};
use crate::nets::{NetworkArchitecture, NetworkVariant, DEFAULT_HIDDEN};
use crate::physics::{MaterialParams, PhysicsConfig};
use crate::regen::DamageSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "regen")]
    Regen,
    #[serde(rename = "2d-desk")]
    TwoDDesk,
    #[serde(rename = "3d-desk")]
    ThreeDDesk,
    #[serde(rename = "regen-desk")]
    RegenDesk,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::TwoD,
        Preset::ThreeD,
        Preset::Regen,
        Preset::TwoDDesk,
        Preset::ThreeDDesk,
        Preset::RegenDesk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TwoD => "2d",
            Preset::ThreeD => "3d",
            Preset::Regen => "regen",
            Preset::TwoDDesk => "2d-desk",
            Preset::ThreeDDesk => "3d-desk",
            Preset::RegenDesk => "regen-desk",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variant: NetworkVariant,
    pub hidden_dim: usize,
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub preset: Option<Preset>,
    pub dims: Dims,
    pub seed_position: [usize; 3],
    pub development_steps: usize,
    pub network: NetworkSpec,
    pub cleanup: CleanupOptions,
    pub evolution: EvoConfig,
    pub material: MaterialParams,
    pub physics: PhysicsConfig,
    /// Seconds of actuated locomotion per evaluation.
    pub duration: f64,
    pub damage: DamageSpec,
    pub regen_steps: usize,
    pub regen_network: NetworkSpec,
    pub regeneration: EvoConfig,
    /// Physics steps between replay samples.
    pub replay_sample_every: usize,
    pub output_dir: String,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let two_d = RunConfig {
            version: CONFIG_VERSION,
            preset: Some(preset),
            dims: Dims::planar(7, 7),
            seed_position: [3, 3, 0],
            development_steps: 10,
            network: NetworkSpec {
                variant: NetworkVariant::FeedForward,
                hidden_dim: DEFAULT_HIDDEN,
            },
            cleanup: CleanupOptions::default(),
            evolution: EvoConfig {
                population_size: 300,
                generations: 500,
                fitness_kind: FitnessKind::Locomotion2d,
                ..EvoConfig::default()
            },
            material: MaterialParams::default(),
            physics: PhysicsConfig::default(),
            duration: 0.25,
            damage: DamageSpec::left_half(7),
            regen_steps: 10,
            regen_network: NetworkSpec {
                variant: NetworkVariant::FeedForward,
                hidden_dim: DEFAULT_HIDDEN,
            },
            regeneration: EvoConfig {
                population_size: 1000,
                generations: 1000,
                fitness_kind: FitnessKind::Similarity,
                ..EvoConfig::default()
            },
            replay_sample_every: 100,
            output_dir: "runs".to_string(),
        };
        let three_d = RunConfig {
            dims: Dims::cube(9),
            seed_position: [4, 4, 4],
            evolution: EvoConfig {
                population_size: 100,
                generations: 300,
                fitness_kind: FitnessKind::Locomotion3d,
                ..EvoConfig::default()
            },
            duration: 0.5,
            damage: DamageSpec::left_half(9),
            ..two_d.clone()
        };
        match preset {
            Preset::TwoD => two_d,
            Preset::ThreeD | Preset::Regen => three_d,
            Preset::TwoDDesk => RunConfig {
                evolution: EvoConfig {
                    population_size: 30,
                    generations: 30,
                    ..two_d.evolution.clone()
                },
                regeneration: EvoConfig {
                    population_size: 100,
                    generations: 200,
                    ..two_d.regeneration.clone()
                },
                ..two_d
            },
            Preset::ThreeDDesk | Preset::RegenDesk => RunConfig {
                evolution: EvoConfig {
                    population_size: 20,
                    generations: 10,
                    ..three_d.evolution.clone()
                },
                regeneration: EvoConfig {
                    population_size: 100,
                    generations: 200,
                    ..three_d.regeneration.clone()
                },
                ..three_d
            },
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.evolution.seed = seed;
        self.regeneration.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let rank = self.dims.rank();
        if self.dims.nx < 3 || self.dims.ny < 3 || (rank == 3 && self.dims.nz < 3) {
            return Err(Error::config(format!("lattice {} is too small", self.dims.label())));
        }
        if !self.dims.contains(self.seed_position) || !self.dims.is_interior(self.seed_position) {
            return Err(Error::config(format!(
                "seed position {:?} is not strictly inside the {} lattice",
                self.seed_position,
                self.dims.label()
            )));
        }
        self.architecture()?;
        self.regen_architecture()?;
        self.evolution.validate()?;
        self.regeneration.validate()?;
        self.material.validate()?;
        self.physics.validate()?;
        if !(self.duration > 0.0) {
            return Err(Error::config("duration must be positive"));
        }
        let extent = [self.dims.nx, self.dims.ny, self.dims.nz];
        let axis = match self.damage.axis {
            crate::regen::Axis::X => 0,
            crate::regen::Axis::Y => 1,
            crate::regen::Axis::Z => 2,
        };
        if self.damage.plane_index >= extent[axis] {
            return Err(Error::config("damage plane lies outside the lattice"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<NetworkArchitecture> {
        NetworkArchitecture::new(self.network.variant, self.dims.rank(), self.network.hidden_dim)
    }

    pub fn regen_architecture(&self) -> Result<NetworkArchitecture> {
        NetworkArchitecture::new(
            self.regen_network.variant,
            self.dims.rank(),
            self.regen_network.hidden_dim,
        )
    }

    /// The single-seed starting grid for the growth network.
    pub fn init_grid(&self) -> Result<CellGrid> {
        CellGrid::seeded(self.dims, self.seed_position, self.architecture()?.memory_width())
    }

    pub fn development(&self) -> Result<Development> {
        Ok(Development {
            start: self.init_grid()?,
            steps: self.development_steps,
            cleanup: self.cleanup,
        })
    }

    pub fn fitness_context(&self) -> Result<FitnessContext> {
        Ok(FitnessContext {
            arch: self.architecture()?,
            development: self.development()?,
            material: self.material,
            physics: self.physics,
            duration: self.duration,
            target: None,
        })
    }

    /// The growth-and-locomotion evolution task.
    pub fn task(&self) -> Result<Task> {
        Ok(Task {
            cfg: self.evolution.clone(),
            ctx: self.fitness_context()?,
        })
    }

    /// SHA-256 over the canonical JSON of everything except `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir.clear();
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
