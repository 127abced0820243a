mod common;

use common::*;
use softbot_core::evo::{evolve, Evaluation, EvolutionState, Fitness};
use softbot_core::formats::{
    parse_checkpoint, parse_genome, parse_morphology, parse_trajectory, write_checkpoint, write_frames_csv,
    write_genome, write_log, write_trajectory, write_trajectory_csv,
};
use softbot_core::grid::{develop, Morphology};
use softbot_core::nets::{Genome, NetworkArchitecture, NetworkInstance, NetworkVariant};
use softbot_core::physics::{evaluate_locomotion_recorded, Recording};
use softbot_core::{
    CellGrid, CellState, Dims, EvoConfig, Error, MaterialParams, PhysicsConfig, Preset, Result, RunConfig,
};

#[test]
fn trajectory_text_holds_every_step() {
    let net = NetworkInstance::new(left_neighbor_genome());
    let grids = develop(&CellGrid::seeded(Dims::planar(7, 7), [3, 3, 0], 0).unwrap(), &net, 10).unwrap();
    let text = write_trajectory(&grids);
    let blocks = parse_trajectory(&text).unwrap();
    assert_eq!(blocks.len(), 11);
    for (k, (step, dims, states)) in blocks.iter().enumerate() {
        assert_eq!((*step, *dims), (k, Dims::planar(7, 7)));
        assert_eq!(states.as_slice(), grids[k].states());
    }
}

#[test]
fn unknown_versions_are_rejected() {
    assert!(matches!(
        parse_morphology("# morphology v2 3x3\n000\n000\n000\n"),
        Err(Error::Parse { .. })
    ));
    let g = write_genome(&Genome::zeros(ff_arch(2))).replace("\"version\": 1", "\"version\": 9");
    assert!(matches!(parse_genome(&g), Err(Error::Parse { .. })));
}

#[test]
fn genome_file_is_bit_exact() {
    let a = NetworkArchitecture::new(NetworkVariant::Recurrent, 3, 7).unwrap();
    let g = Genome::random(a, &mut rng(4), 3.0);
    assert_eq!(parse_genome(&write_genome(&g)).unwrap(), g);
}

struct Sum;

impl Fitness for Sum {
    fn architecture(&self) -> NetworkArchitecture {
        NetworkArchitecture::new(NetworkVariant::FeedForward, 2, 2).unwrap()
    }
    fn evaluate(&self, g: &Genome) -> Result<Evaluation> {
        Ok(Evaluation {
            fitness: g.params.iter().sum(),
            live_voxels: 1,
            diverged: false,
        })
    }
}

#[test]
fn checkpoint_round_trip_and_hash_guard() {
    let cfg = EvoConfig {
        population_size: 5,
        generations: 3,
        ..EvoConfig::default()
    };
    let mut state = EvolutionState::initial(Sum.architecture(), &cfg);
    state.history = evolve(&cfg, &Sum, 1).unwrap();
    state.generation = 3;
    let text = write_checkpoint(&state, "abc");
    assert_eq!(parse_checkpoint(&text, "abc").unwrap(), state);
    assert!(matches!(parse_checkpoint(&text, "abd"), Err(Error::Checkpoint(_))));
}

#[test]
fn log_has_header_and_one_row_per_generation() {
    let cfg = EvoConfig {
        population_size: 4,
        generations: 3,
        ..EvoConfig::default()
    };
    let log = write_log(&evolve(&cfg, &Sum, 1).unwrap());
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "# evolog v1");
    assert_eq!(lines[1], "generation,best,mean,min,best_live_voxels");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("0,"));
}

#[test]
fn replay_sampling_contract() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let mut m = Morphology::empty(Dims::planar(7, 7));
    for x in 1..6 {
        m.set([x, 1, 0], if x % 2 == 0 { CellState::MuscleA } else { CellState::MuscleB });
    }
    let rec = Recording {
        sample_every: 300,
        frames: true,
    };
    let r = evaluate_locomotion_recorded(&m, &mat, &pc, 0.25, rec).unwrap();
    assert_eq!(r.trajectory.len(), 2500 / 300 + 1);
    assert_eq!(r.frames.len(), r.trajectory.len());
    assert!(r.frames.iter().all(|f| f.len() == 5));
    let again = evaluate_locomotion_recorded(&m, &mat, &pc, 0.25, rec).unwrap();
    assert_eq!(write_trajectory_csv(&r), write_trajectory_csv(&again));
    assert_eq!(write_frames_csv(&r), write_frames_csv(&again));

    let empty = evaluate_locomotion_recorded(&Morphology::empty(Dims::planar(7, 7)), &mat, &pc, 0.25, rec).unwrap();
    let csv = write_trajectory_csv(&empty);
    assert!(csv.contains("\n0,0,0,0\n"));
    assert!(csv.ends_with("# distance=0\n"));
}

#[test]
fn config_snapshot_reproduces_config() {
    for p in Preset::ALL {
        let mut c = RunConfig::preset(p);
        c.set_seed(1234);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }
}
