//! Neural cellular automata that grow voxel soft robots from a single seed
//! cell, a mass-spring engine that scores their locomotion, a genetic
//! algorithm that evolves the automaton weights, and the damage/regrowth
//! laboratory built on top of them.

pub mod config;
pub mod error;
pub mod evo;
pub mod formats;
pub mod grid;
pub mod nets;
pub mod physics;
pub mod regen;
pub mod rng;

pub use config::{Preset, RunConfig};
pub use error::{Error, Result};
pub use evo::{EvoConfig, EvoHistory, FitnessKind};
pub use grid::{Cell, CellGrid, CellState, Dims, Maturity, Morphology};
pub use nets::{Genome, NetworkArchitecture, NetworkInstance, NetworkVariant};
pub use physics::{LocomotionResult, MaterialParams, PhysicsConfig, PhysicsWorld};
pub use regen::{DamageSpec, RecoveryReport};
