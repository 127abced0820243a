mod common;

use common::*;
use rand::Rng;
use softbot_core::grid::Morphology;
use softbot_core::physics::{
    actuation_factor, build_world, center_of_mass, evaluate_locomotion, MaterialParams, PhysicsConfig,
    PhysicsWorld,
};
use softbot_core::{CellState, Dims};

const PASSIVE: [CellState; 2] = [CellState::SoftPassive, CellState::HardPassive];
const ANY: [CellState; 4] = [
    CellState::SoftPassive,
    CellState::HardPassive,
    CellState::MuscleA,
    CellState::MuscleB,
];

#[test]
fn free_fall_follows_closed_form() {
    let pc = PhysicsConfig::vacuum();
    let start = pc.voxel_edge;
    let mut w = PhysicsWorld::from_masses(&[([0.0, 0.0, start], 1e-3)], &pc);
    let steps = pc.steps_for(0.05);
    for _ in 0..steps {
        w.step().unwrap();
    }
    let t = steps as f64 * pc.dt;
    assert!((w.time - 0.05).abs() < 1e-12);
    let fallen = start - w.masses[0].position[2];
    let want = 0.5 * pc.gravity * t * t;
    assert!((fallen - want).abs() / want < 0.02, "fell {fallen}, closed form {want}");
}

#[test]
fn resting_mass_stays_put() {
    let pc = PhysicsConfig::default();
    let m = 1e-3;
    let z0 = -m * pc.gravity / pc.ground_stiffness;
    let mut w = PhysicsWorld::from_masses(&[([0.0, 0.0, z0], m)], &pc);
    for _ in 0..1000 {
        w.step().unwrap();
        let p = w.masses[0].position;
        let drift = ((p[0]).powi(2) + p[1].powi(2) + (p[2] - z0).powi(2)).sqrt() / pc.voxel_edge;
        assert!(drift < 1e-6, "drift {drift} voxel");
    }
}

#[test]
fn world_construction_counts() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let mut m = Morphology::empty(Dims::planar(5, 5));
    m.set([1, 1, 0], CellState::SoftPassive);
    let w = build_world(&m, &mat, &pc);
    assert_eq!((w.masses.len(), w.springs.len()), (1, 0));
    m.set([2, 1, 0], CellState::HardPassive);
    let w = build_world(&m, &mat, &pc);
    assert_eq!(w.springs.len(), 1);
    assert!((w.springs[0].rest_length - pc.voxel_edge).abs() < 1e-15);
    // Harmonic mean of 500 and 5000.
    assert!((w.springs[0].stiffness - 2.0 * 500.0 * 5000.0 / 5500.0).abs() < 1e-9);
    m.set([1, 2, 0], CellState::SoftPassive);
    m.set([2, 2, 0], CellState::SoftPassive);
    let w = build_world(&m, &mat, &pc);
    let diag = w.springs.iter().filter(|s| s.rest_length > 1.2 * pc.voxel_edge).count();
    assert_eq!((w.masses.len(), w.springs.len(), diag), (4, 6, 2));
    let lowest = w.masses.iter().map(|p| p.position[2]).fold(f64::INFINITY, f64::min);
    assert_eq!(lowest, 0.0);

    let cube = solid_cube(Dims::cube(5), 1, 2, CellState::SoftPassive);
    let w = build_world(&cube, &mat, &pc);
    let r3 = 3f64.sqrt() * pc.voxel_edge;
    let cube_diag = w.springs.iter().filter(|s| (s.rest_length - r3).abs() < 1e-12).count();
    assert_eq!((w.masses.len(), w.springs.len(), cube_diag), (8, 28, 4));
}

#[test]
fn actuation_factor_examples() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let quarter = 0.25 / pc.frequency;
    let a = mat.get(CellState::MuscleA).unwrap().amplitude;
    for s in PASSIVE {
        assert_eq!(actuation_factor(s, 0.0123, &mat, &pc).unwrap(), 1.0);
    }
    assert_eq!(actuation_factor(CellState::MuscleA, 0.0, &mat, &pc).unwrap(), 1.0);
    assert!((actuation_factor(CellState::MuscleA, quarter, &mat, &pc).unwrap() - (1.0 + a)).abs() < 1e-12);
    assert!((actuation_factor(CellState::MuscleB, quarter, &mat, &pc).unwrap() - (1.0 - a)).abs() < 1e-12);
    assert!(actuation_factor(CellState::Empty, 0.0, &mat, &pc).is_err());
}

/// Counts peaks of a muscle spring's actuated rest length over `seconds`.
fn cycles_in(seconds: f64) -> usize {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::vacuum());
    let mut m = Morphology::empty(Dims::planar(5, 5));
    m.set([1, 1, 0], CellState::MuscleA);
    m.set([2, 1, 0], CellState::MuscleA);
    let mut w = build_world(&m, &mat, &PhysicsConfig { gravity: 0.0, ..pc });
    w.start_actuation();
    let mut lengths = vec![w.actuated_rest_length(&w.springs[0])];
    for _ in 0..pc.steps_for(seconds) {
        w.step().unwrap();
        lengths.push(w.actuated_rest_length(&w.springs[0]));
    }
    lengths.windows(3).filter(|v| v[1] > v[0] && v[1] >= v[2]).count()
}

#[test]
fn actuation_cycle_counts() {
    assert_eq!(cycles_in(0.25), 10);
    assert_eq!(cycles_in(0.5), 20);
}

#[test]
fn center_of_mass_examples() {
    assert_eq!(center_of_mass([([1.0, 2.0, 3.0], 2.0)]), Some([1.0, 2.0, 3.0]));
    assert_eq!(center_of_mass([([0.0; 3], 1.0), ([4.0, 0.0, 0.0], 3.0)]), Some([3.0, 0.0, 0.0]));
    assert_eq!(center_of_mass(std::iter::empty()), None);
}

#[test]
fn empty_morphology_scores_zero() {
    let r = evaluate_locomotion(
        &Morphology::empty(Dims::cube(9)),
        &MaterialParams::default(),
        &PhysicsConfig::default(),
        0.5,
    )
    .unwrap();
    assert_eq!((r.distance, r.live_voxel_count), (0.0, 0));
}

#[test]
fn passive_bodies_do_not_travel() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let mut r = rng(5);
    for i in 0..10 {
        let dims = if i % 2 == 0 { Dims::planar(7, 7) } else { Dims::cube(5) };
        let m = random_morphology(&mut r, dims, 0.6, &PASSIVE);
        let d = evaluate_locomotion(&m, &mat, &pc, 0.25).unwrap().distance;
        assert!(d < 0.1, "passive body travelled {d}");
    }
    let cube = solid_cube(Dims::cube(9), 2, 6, CellState::HardPassive);
    assert!(evaluate_locomotion(&cube, &mat, &pc, 0.5).unwrap().distance < 0.1);
}

#[test]
fn mirrored_bodies_travel_equal_distances() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let mut r = rng(6);
    for i in 0..20 {
        let dims = if i % 4 == 3 { Dims::cube(6) } else { Dims::planar(7, 7) };
        let m = random_morphology(&mut r, dims, 0.7, &ANY);
        let a = evaluate_locomotion(&m, &mat, &pc, 0.25).unwrap().distance;
        let b = evaluate_locomotion(&m.mirror_x(), &mat, &pc, 0.25).unwrap().distance;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn evaluation_is_bit_reproducible() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let m = random_morphology(&mut rng(8), Dims::planar(7, 7), 0.8, &ANY);
    let a = evaluate_locomotion(&m, &mat, &pc, 0.25).unwrap();
    let b = evaluate_locomotion(&m, &mat, &pc, 0.25).unwrap();
    assert_eq!(a.distance.to_bits(), b.distance.to_bits());
}

#[test]
fn unactuated_energy_never_grows() {
    let (mat, pc) = (MaterialParams::default(), PhysicsConfig::default());
    let mut r = rng(9);
    for i in 0..20 {
        let dims = if i % 4 == 3 { Dims::cube(5) } else { Dims::planar(7, 7) };
        let mut m = random_morphology(&mut r, dims, 0.6, &ANY);
        if m.live_voxel_count() == 0 {
            m.set([2, 2, if dims.rank() == 2 { 0 } else { 2 }], CellState::SoftPassive);
        }
        let mut w = build_world(&m, &mat, &pc);
        // Lift the body so it also has to land.
        let lift = r.random_range(0.0..2.0) * pc.voxel_edge;
        for p in &mut w.masses {
            p.position[2] += lift;
        }
        let e0 = w.mechanical_energy();
        let scale = w.masses.iter().map(|p| p.mass).sum::<f64>() * pc.gravity * pc.voxel_edge;
        for _ in 0..10_000 {
            w.step().unwrap();
            assert!(w.mechanical_energy() <= e0 + 1e-3 * scale);
        }
    }
}

#[test]
fn diverging_world_reports_the_step() {
    let pc = PhysicsConfig { dt: 1.0, ..PhysicsConfig::default() };
    let m = random_morphology(&mut rng(10), Dims::planar(7, 7), 0.9, &ANY);
    let err = evaluate_locomotion(&m, &MaterialParams::default(), &pc, 100.0).unwrap_err();
    match err {
        softbot_core::Error::Diverged { morphology, .. } => assert_eq!(morphology.as_deref(), Some(&m)),
        other => panic!("expected divergence, got {other:?}"),
    }
}
