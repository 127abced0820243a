//! Lumped mass-spring voxel physics.
//!
//! Each present voxel becomes one point mass at its center. Springs join
//! voxels that share a face (rest 1 edge), an edge (rest sqrt 2) or a corner
//! (rest sqrt 3). Muscle voxels modulate the rest length of their springs
//! sinusoidally; passive voxels do not. The ground is the plane `z = 0`,
//! realised as a vertical penalty spring with Coulomb friction.
//!
//! Lattice to world mapping: a 3D voxel `(x, y, z)` sits at `(x, y, z)`
//! edges with `z` up; a 2D voxel `(x, y)` sits at `(x, 0, y)`, so the 2D
//! lattice is a vertical slice and lattice `y` is height. The whole body is
//! shifted so the lowest masses start at height 0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{moore_offsets, CellState, Morphology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    /// N/m
    pub stiffness: f64,
    /// Fraction of rest length.
    pub amplitude: f64,
    /// Radians.
    pub phase: f64,
    /// kg
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub soft_passive: MaterialProps,
    pub hard_passive: MaterialProps,
    pub muscle_a: MaterialProps,
    pub muscle_b: MaterialProps,
}

impl Default for MaterialParams {
    fn default() -> Self {
        let passive = |stiffness| MaterialProps {
            stiffness,
            amplitude: 0.0,
            phase: 0.0,
            mass: 1e-3,
        };
        let muscle = |phase| MaterialProps {
            stiffness: 1000.0,
            amplitude: 0.2,
            phase,
            mass: 1e-3,
        };
        MaterialParams {
            soft_passive: passive(500.0),
            hard_passive: passive(5000.0),
            muscle_a: muscle(0.0),
            muscle_b: muscle(PI),
        }
    }
}

impl MaterialParams {
    pub fn get(&self, state: CellState) -> Option<&MaterialProps> {
        match state {
            CellState::Empty => None,
            CellState::SoftPassive => Some(&self.soft_passive),
            CellState::HardPassive => Some(&self.hard_passive),
            CellState::MuscleA => Some(&self.muscle_a),
            CellState::MuscleB => Some(&self.muscle_b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("soft_passive", &self.soft_passive),
            ("hard_passive", &self.hard_passive),
            ("muscle_a", &self.muscle_a),
            ("muscle_b", &self.muscle_b),
        ] {
            if !(m.stiffness > 0.0 && m.mass > 0.0) || !m.amplitude.is_finite() || !m.phase.is_finite() {
                return Err(Error::config(format!("material {name} needs positive stiffness and mass")));
            }
        }
        if self.soft_passive.amplitude != 0.0 || self.hard_passive.amplitude != 0.0 {
            return Err(Error::config("passive materials must have zero actuation amplitude"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// s
    pub dt: f64,
    /// m/s^2
    pub gravity: f64,
    /// Disable for free flight.
    pub ground: bool,
    /// N/m per contacting mass.
    pub ground_stiffness: f64,
    /// Coulomb coefficient.
    pub friction: f64,
    /// Fraction of critical damping along each spring.
    pub spring_damping_ratio: f64,
    /// Fraction of critical damping applied to each mass's absolute velocity.
    pub global_damping: f64,
    /// Hz
    pub frequency: f64,
    /// m
    pub voxel_edge: f64,
    /// s, minimum unactuated settling before the distance baseline is taken.
    pub settle_time: f64,
    /// Settling continues past `settle_time` while any mass moves faster than
    /// this, in voxel edges per second.
    pub settle_speed: f64,
    /// s, upper bound on settling.
    pub settle_max_time: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            dt: 1e-4,
            gravity: 9.81,
            ground: true,
            ground_stiffness: 1e4,
            friction: 1.0,
            spring_damping_ratio: 0.1,
            global_damping: 0.01,
            frequency: 40.0,
            voxel_edge: 0.01,
            settle_time: 0.1,
            settle_speed: 0.1,
            settle_max_time: 1.0,
        }
    }
}

impl PhysicsConfig {
    /// No ground and no damping.
    pub fn vacuum() -> Self {
        PhysicsConfig {
            ground: false,
            global_damping: 0.0,
            spring_damping_ratio: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("voxel_edge", self.voxel_edge),
            ("ground_stiffness", self.ground_stiffness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("gravity", self.gravity),
            ("friction", self.friction),
            ("spring_damping_ratio", self.spring_damping_ratio),
            ("global_damping", self.global_damping),
            ("frequency", self.frequency),
            ("settle_time", self.settle_time),
            ("settle_speed", self.settle_speed),
            ("settle_max_time", self.settle_max_time),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Integer number of steps covering `seconds`.
    pub fn steps_for(&self, seconds: f64) -> usize {
        (seconds / self.dt).round() as usize
    }
}

/// Rest-length factor of a material at time `t` since actuation started:
/// `1 + A sin(2 pi f t + phase)`.
pub fn actuation_factor(material: CellState, t: f64, mat: &MaterialParams, pc: &PhysicsConfig) -> Result<f64> {
    let m = mat
        .get(material)
        .ok_or_else(|| Error::contract("actuation factor requested for an empty voxel"))?;
    Ok(factor(m.amplitude, m.phase, t, pc.frequency))
}

fn factor(amplitude: f64, phase: f64, t: f64, frequency: f64) -> f64 {
    if amplitude == 0.0 {
        1.0
    } else {
        1.0 + amplitude * (2.0 * PI * frequency * t + phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub mass: f64,
    pub material: CellState,
    stiffness: f64,
    amplitude: f64,
    phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spring {
    pub a: usize,
    pub b: usize,
    /// m
    pub rest_length: f64,
    pub stiffness: f64,
    damping: f64,
}

#[derive(Debug, Clone)]
pub struct PhysicsWorld {
    pub masses: Vec<PointMass>,
    pub springs: Vec<Spring>,
    pub time: f64,
    pub config: PhysicsConfig,
    steps_taken: usize,
    actuation_start: Option<f64>,
    forces: Vec<[f64; 3]>,
    spring_forces: Vec<[f64; 3]>,
    /// Per mass, the spring to each Moore neighbor by offset slot.
    links: Vec<[u32; 27]>,
}

const NO_LINK: u32 = u32::MAX;

fn slot_of([dx, dy, dz]: [isize; 3]) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

/// Builds the lumped mass-spring body for a morphology.
pub fn build_world(m: &Morphology, mat: &MaterialParams, pc: &PhysicsConfig) -> PhysicsWorld {
    let dims = m.dims();
    let planar = dims.rank() == 2;
    // Horizontal coordinates are centered on the lattice so a mirrored body
    // is the exact floating-point negation of the original.
    let cx = (dims.nx as f64 - 1.0) / 2.0;
    let cy = (dims.ny as f64 - 1.0) / 2.0;
    let to_world = |[x, y, z]: [usize; 3]| -> [f64; 3] {
        if planar {
            [x as f64 - cx, 0.0, y as f64]
        } else {
            [x as f64 - cx, y as f64 - cy, z as f64]
        }
    };

    let mut slot = vec![usize::MAX; dims.len()];
    let mut masses = Vec::new();
    for (c, state) in m.present() {
        let props = mat.get(state).expect("present voxels are non-empty");
        slot[dims.index(c)] = masses.len();
        let p = to_world(c);
        masses.push(PointMass {
            position: [p[0] * pc.voxel_edge, p[1] * pc.voxel_edge, p[2] * pc.voxel_edge],
            velocity: [0.0; 3],
            mass: props.mass,
            material: state,
            stiffness: props.stiffness,
            amplitude: props.amplitude,
            phase: props.phase,
        });
    }
    let floor = masses
        .iter()
        .map(|m| m.position[2])
        .fold(f64::INFINITY, f64::min);
    if floor.is_finite() {
        for m in &mut masses {
            m.position[2] -= floor;
        }
    }

    // forward half of the Moore neighborhood so every pair is seen once
    let forward: Vec<[isize; 3]> = moore_offsets(dims.rank())
        .into_iter()
        .filter(|o| {
            let key = o[2] * 9 + o[1] * 3 + o[0];
            key > 0
        })
        .collect();
    let mut springs = Vec::new();
    let mut links = vec![[NO_LINK; 27]; masses.len()];
    for (c, _) in m.present() {
        let a = slot[dims.index(c)];
        for o in &forward {
            let n = [c[0] as isize + o[0], c[1] as isize + o[1], c[2] as isize + o[2]];
            if n.iter().any(|&v| v < 0) {
                continue;
            }
            let n = [n[0] as usize, n[1] as usize, n[2] as usize];
            if !dims.contains(n) {
                continue;
            }
            let b = slot[dims.index(n)];
            if b == usize::MAX {
                continue;
            }
            let (fwd, back) = if planar {
                ([o[0], o[2], o[1]], [-o[0], -o[2], -o[1]])
            } else {
                (*o, [-o[0], -o[1], -o[2]])
            };
            links[a][slot_of(fwd)] = springs.len() as u32;
            links[b][slot_of(back)] = springs.len() as u32;
            let taxicab = o.iter().map(|v| v.abs()).sum::<isize>() as f64;
            let (ma, mb) = (&masses[a], &masses[b]);
            let k = 2.0 * ma.stiffness * mb.stiffness / (ma.stiffness + mb.stiffness);
            let reduced = ma.mass * mb.mass / (ma.mass + mb.mass);
            springs.push(Spring {
                a,
                b,
                rest_length: taxicab.sqrt() * pc.voxel_edge,
                stiffness: k,
                damping: 2.0 * pc.spring_damping_ratio * (k * reduced).sqrt(),
            });
        }
    }

    let n = masses.len();
    PhysicsWorld {
        spring_forces: vec![[0.0; 3]; springs.len()],
        masses,
        springs,
        time: 0.0,
        config: *pc,
        steps_taken: 0,
        actuation_start: None,
        forces: vec![[0.0; 3]; n],
        links,
    }
}

impl PhysicsWorld {
    /// A world with explicitly placed masses and no springs.
    pub fn from_masses(points: &[([f64; 3], f64)], pc: &PhysicsConfig) -> Self {
        let masses: Vec<PointMass> = points
            .iter()
            .map(|&(position, mass)| PointMass {
                position,
                velocity: [0.0; 3],
                mass,
                material: CellState::SoftPassive,
                stiffness: MaterialParams::default().soft_passive.stiffness,
                amplitude: 0.0,
                phase: 0.0,
            })
            .collect();
        let n = masses.len();
        PhysicsWorld {
            masses,
            springs: Vec::new(),
            time: 0.0,
            config: *pc,
            steps_taken: 0,
            actuation_start: None,
            forces: vec![[0.0; 3]; n],
            spring_forces: Vec::new(),
            links: vec![[NO_LINK; 27]; n],
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Starts the actuation clock at the current time.
    pub fn start_actuation(&mut self) {
        self.actuation_start = Some(self.time);
    }

    pub fn stop_actuation(&mut self) {
        self.actuation_start = None;
    }

    fn mass_factor(&self, m: &PointMass) -> f64 {
        match self.actuation_start {
            Some(t0) => factor(m.amplitude, m.phase, self.time - t0, self.config.frequency),
            None => 1.0,
        }
    }

    /// Current rest length of a spring.
    pub fn actuated_rest_length(&self, s: &Spring) -> f64 {
        let fa = self.mass_factor(&self.masses[s.a]);
        let fb = self.mass_factor(&self.masses[s.b]);
        s.rest_length * 0.5 * (fa + fb)
    }

    /// One semi-implicit Euler step.
    pub fn step(&mut self) -> Result<()> {
        let pc = self.config;
        let dt = pc.dt;
        if !(dt > 0.0) {
            return Err(Error::config("time step must be positive"));
        }
        for (k, s) in self.springs.iter().enumerate() {
            let rest = self.actuated_rest_length(s);
            let (pa, pb) = (&self.masses[s.a], &self.masses[s.b]);
            let d = sub(pb.position, pa.position);
            let len = norm(d);
            self.spring_forces[k] = if len == 0.0 {
                [0.0; 3]
            } else {
                let u = scale(d, 1.0 / len);
                let rel = dot(sub(pb.velocity, pa.velocity), u);
                scale(u, s.stiffness * (len - rest) + s.damping * rel)
            };
        }
        // Each mass sums its springs in a fixed slot order, adding the -x and
        // +x neighbors of a row as a pair first. Reflection across x swaps the
        // two members of every pair, which commutes exactly, so mirrored
        // bodies evolve as exact mirror images.
        for (i, m) in self.masses.iter().enumerate() {
            let link = |slot: usize| -> [f64; 3] {
                match self.links[i][slot] {
                    NO_LINK => [0.0; 3],
                    k => {
                        let f = self.spring_forces[k as usize];
                        if self.springs[k as usize].a == i {
                            f
                        } else {
                            scale(f, -1.0)
                        }
                    }
                }
            };
            let mut f = [0.0, 0.0, -m.mass * pc.gravity];
            for row in 0..9 {
                let pair = add(link(3 * row), link(3 * row + 2));
                add_assign(&mut f, link(3 * row + 1));
                add_assign(&mut f, pair);
            }
            self.forces[i] = f;
        }
        for (f, m) in self.forces.iter_mut().zip(&self.masses) {
            let c = 2.0 * pc.global_damping * (m.stiffness * m.mass).sqrt();
            add_assign(f, scale(m.velocity, -c));
            if pc.ground && m.position[2] < 0.0 {
                f[2] -= pc.ground_stiffness * m.position[2];
            }
        }
        for (m, f) in self.masses.iter_mut().zip(&self.forces) {
            for k in 0..3 {
                m.velocity[k] += f[k] / m.mass * dt;
            }
            if pc.ground && m.position[2] < 0.0 {
                // Coulomb friction, clamped so it can stop but never reverse sliding
                let normal = -pc.ground_stiffness * m.position[2];
                let max_dv = pc.friction * normal / m.mass * dt;
                let speed = m.velocity[0].hypot(m.velocity[1]);
                if speed <= max_dv {
                    m.velocity[0] = 0.0;
                    m.velocity[1] = 0.0;
                } else {
                    let keep = 1.0 - max_dv / speed;
                    m.velocity[0] *= keep;
                    m.velocity[1] *= keep;
                }
            }
            for k in 0..3 {
                m.position[k] += m.velocity[k] * dt;
            }
        }
        self.time += dt;
        self.steps_taken += 1;
        let finite = self
            .masses
            .iter()
            .all(|m| m.position.iter().chain(&m.velocity).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Diverged {
                step: self.steps_taken,
                morphology: None,
            });
        }
        Ok(())
    }

    /// Largest mass speed, m/s.
    pub fn max_speed(&self) -> f64 {
        self.masses.iter().map(|p| norm(p.velocity)).fold(0.0, f64::max)
    }

    pub fn center_of_mass(&self) -> Option<[f64; 3]> {
        center_of_mass(self.masses.iter().map(|m| (m.position, m.mass)))
    }

    /// Kinetic + spring + gravitational + ground-penalty energy (J).
    pub fn mechanical_energy(&self) -> f64 {
        let pc = &self.config;
        let mut e = 0.0;
        for m in &self.masses {
            e += 0.5 * m.mass * dot(m.velocity, m.velocity);
            e += m.mass * pc.gravity * m.position[2];
            if pc.ground && m.position[2] < 0.0 {
                e += 0.5 * pc.ground_stiffness * m.position[2] * m.position[2];
            }
        }
        for s in &self.springs {
            let len = norm(sub(self.masses[s.b].position, self.masses[s.a].position));
            let stretch = len - self.actuated_rest_length(s);
            e += 0.5 * s.stiffness * stretch * stretch;
        }
        e
    }
}

/// Mass-weighted mean position; `None` when there are no masses.
pub fn center_of_mass<I>(points: I) -> Option<[f64; 3]>
where
    I: IntoIterator<Item = ([f64; 3], f64)>,
{
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    for (p, m) in points {
        for k in 0..3 {
            acc[k] += m * p[k];
        }
        total += m;
    }
    (total > 0.0).then(|| scale(acc, 1.0 / total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionResult {
    /// Horizontal center-of-mass displacement, in voxel edges.
    pub distance: f64,
    pub live_voxel_count: usize,
    /// `(t, com)` samples during the actuated phase, in voxel edges.
    pub trajectory: Vec<(f64, [f64; 3])>,
    /// Mass positions (voxel edges) at the same sample times.
    pub frames: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recording {
    /// Sample every this many steps; 0 records nothing.
    pub sample_every: usize,
    pub frames: bool,
}

pub fn evaluate_locomotion(
    m: &Morphology,
    mat: &MaterialParams,
    pc: &PhysicsConfig,
    duration: f64,
) -> Result<LocomotionResult> {
    evaluate_locomotion_recorded(m, mat, pc, duration, Recording::default())
}

/// Settles the body without actuation, then actuates for `duration` seconds
/// and measures the horizontal travel of the center of mass. The empty
/// morphology scores 0 without simulation.
pub fn evaluate_locomotion_recorded(
    m: &Morphology,
    mat: &MaterialParams,
    pc: &PhysicsConfig,
    duration: f64,
    rec: Recording,
) -> Result<LocomotionResult> {
    if !(duration > 0.0) {
        return Err(Error::config(format!("evaluation duration must be positive, got {duration}")));
    }
    let edge = pc.voxel_edge;
    let steps = pc.steps_for(duration);
    let live = m.live_voxel_count();
    if live == 0 {
        let mut out = LocomotionResult {
            distance: 0.0,
            live_voxel_count: 0,
            trajectory: Vec::new(),
            frames: Vec::new(),
        };
        if rec.sample_every > 0 {
            for k in 0..=steps / rec.sample_every {
                out.trajectory.push(((k * rec.sample_every) as f64 * pc.dt, [0.0; 3]));
                if rec.frames {
                    out.frames.push(Vec::new());
                }
            }
        }
        return Ok(out);
    }

    let attach = |e: Error| match e {
        Error::Diverged { step, .. } => Error::Diverged {
            step,
            morphology: Some(Box::new(m.clone())),
        },
        other => other,
    };

    let mut world = build_world(m, mat, pc);
    // Loose parts can keep toppling well past the minimum settle time; that
    // motion is collapse, not locomotion.
    let min_steps = pc.steps_for(pc.settle_time);
    let max_steps = pc.steps_for(pc.settle_max_time).max(min_steps);
    let speed_limit = pc.settle_speed * edge;
    for k in 0..max_steps {
        if k >= min_steps && world.max_speed() <= speed_limit {
            break;
        }
        world.step().map_err(attach)?;
    }
    let start = world.center_of_mass().expect("non-empty world");
    world.start_actuation();

    let mut out = LocomotionResult {
        distance: 0.0,
        live_voxel_count: live,
        trajectory: Vec::new(),
        frames: Vec::new(),
    };
    let sample = |w: &PhysicsWorld, k: usize, out: &mut LocomotionResult| {
        if rec.sample_every > 0 && k % rec.sample_every == 0 {
            let com = w.center_of_mass().expect("non-empty world");
            out.trajectory.push((k as f64 * pc.dt, scale(com, 1.0 / edge)));
            if rec.frames {
                out.frames
                    .push(w.masses.iter().map(|m| scale(m.position, 1.0 / edge)).collect());
            }
        }
    };
    sample(&world, 0, &mut out);
    for k in 1..=steps {
        world.step().map_err(attach)?;
        sample(&world, k, &mut out);
    }
    let end = world.center_of_mass().expect("non-empty world");
    out.distance = (end[0] - start[0]).hypot(end[1] - start[1]) / edge;
    Ok(out)
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add_assign(a: &mut [f64; 3], b: [f64; 3]) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
}
