//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance target. Nothing here calls the code under test to compute an
//! expected value.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softbot_core::grid::Morphology;
use softbot_core::nets::{Genome, NetworkArchitecture, NetworkVariant, DEFAULT_HIDDEN};
use softbot_core::{CellGrid, CellState, Dims};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state<R: Rng>(rng: &mut R) -> CellState {
    CellState::ALL[rng.random_range(1..5)]
}

/// Random interior occupancy with a mix of living, growing and empty cells.
pub fn random_grid<R: Rng>(rng: &mut R, dims: Dims, density: f64) -> CellGrid {
    let mut g = CellGrid::empty(dims, 0);
    for idx in 0..dims.len() {
        let c = dims.coord(idx);
        if !dims.is_interior(c) || !rng.random_bool(density) {
            continue;
        }
        let alpha = if rng.random_bool(0.85) {
            rng.random_range(0.11..=1.0)
        } else {
            rng.random_range(0.0..=0.1)
        };
        g.set(c, random_state(rng), alpha);
    }
    g
}

pub fn random_morphology<R: Rng>(rng: &mut R, dims: Dims, density: f64, states: &[CellState]) -> Morphology {
    let mut m = Morphology::empty(dims);
    for idx in 0..dims.len() {
        let c = dims.coord(idx);
        if dims.is_interior(c) && rng.random_bool(density) {
            m.set(c, states[rng.random_range(0..states.len())]);
        }
    }
    m
}

type Coord = [i64; 3];

fn neighbors(c: Coord, rank: usize) -> impl Iterator<Item = (Coord, bool)> {
    let dzs: Vec<i64> = if rank == 2 { vec![0] } else { vec![-1, 0, 1] };
    let mut out = Vec::new();
    for dz in dzs {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                if manhattan > 0 {
                    out.push(([c[0] + dx, c[1] + dy, c[2] + dz], manhattan == 1));
                }
            }
        }
    }
    out.into_iter()
}

fn present_set(grid: &CellGrid) -> Vec<Coord> {
    let dims = grid.dims();
    let mut out = Vec::new();
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let (s, a) = (grid.state([x, y, z]), grid.alpha([x, y, z]));
                if s != CellState::Empty && a > 0.1 {
                    out.push([x as i64, y as i64, z as i64]);
                }
            }
        }
    }
    out
}

fn to_morphology(grid: &CellGrid, keep: &HashSet<Coord>) -> Morphology {
    let mut m = Morphology::empty(grid.dims());
    for c in keep {
        let u = [c[0] as usize, c[1] as usize, c[2] as usize];
        m.set(u, grid.state(u));
    }
    m
}

/// Literal replay of the two sequential passes over a coordinate set, walking
/// z, then y, then x with x innermost.
pub fn brute_force_cleanup(grid: &CellGrid) -> Morphology {
    let rank = grid.dims().rank();
    let order = present_set(grid);
    let mut alive: HashSet<Coord> = order.iter().copied().collect();
    for c in &order {
        if !alive.contains(c) {
            continue;
        }
        let (mut face, mut diag) = (0, 0);
        for (n, is_face) in neighbors(*c, rank) {
            if alive.contains(&n) {
                if is_face {
                    face += 1
                } else {
                    diag += 1
                }
            }
        }
        if diag >= 1 && face == 0 {
            alive.remove(c);
        }
    }
    for c in &order {
        if alive.contains(c) && !neighbors(*c, rank).any(|(n, _)| alive.contains(&n)) {
            alive.remove(c);
        }
    }
    to_morphology(grid, &alive)
}

/// Closed form of the two passes: exactly the present cells with a present
/// face neighbor survive.
pub fn face_supported(grid: &CellGrid) -> Morphology {
    let rank = grid.dims().rank();
    let all: HashSet<Coord> = present_set(grid).into_iter().collect();
    let keep = all
        .iter()
        .copied()
        .filter(|c| neighbors(*c, rank).any(|(n, f)| f && all.contains(&n)))
        .collect();
    to_morphology(grid, &keep)
}

/// No surviving cell satisfies a removal predicate.
pub fn survivors_are_stable(m: &Morphology) -> bool {
    let rank = m.dims().rank();
    let set: HashSet<Coord> = m
        .present()
        .map(|(c, _)| [c[0] as i64, c[1] as i64, c[2] as i64])
        .collect();
    set.iter().all(|&c| {
        let face = neighbors(c, rank).filter(|(n, f)| *f && set.contains(n)).count();
        let any = neighbors(c, rank).filter(|(n, _)| set.contains(n)).count();
        face > 0 && any > 0
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line feed-forward evaluation over the flat layout
/// `W1[h][i], b1[h], W2[o][h], b2[o]`.
pub fn ff_oracle(g: &Genome, x: &[f64]) -> Vec<f64> {
    let (ni, nh, no) = (g.arch.input_dim, g.arch.hidden_dim, g.arch.output_dim);
    let p = &g.params;
    let w1 = |r: usize, c: usize| p[r * ni + c];
    let b1 = |r: usize| p[nh * ni + r];
    let base = nh * ni + nh;
    let w2 = |r: usize, c: usize| p[base + r * nh + c];
    let b2 = |r: usize| p[base + no * nh + r];
    let mut h = vec![0.0; nh];
    for r in 0..nh {
        let mut s = 0.0;
        for c in 0..ni {
            s += w1(r, c) * x[c];
        }
        h[r] = (s + b1(r)).tanh();
    }
    (0..no)
        .map(|r| {
            let mut s = 0.0;
            for c in 0..nh {
                s += w2(r, c) * h[c];
            }
            (s + b2(r)).tanh()
        })
        .collect()
}

/// Gate equations written out per gate over the flat layout: four blocks
/// `Wx[h][i], Wh[h][h], b[h]` in order input, forget, candidate, output, then
/// the readout as in the feed-forward case.
pub fn lstm_oracle(g: &Genome, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ni, nh, no) = (g.arch.input_dim, g.arch.hidden_dim, g.arch.output_dim);
    let p = &g.params;
    let block = ni * nh + nh * nh + nh;
    let pre = |gate: usize, r: usize| {
        let off = gate * block;
        let mut s = 0.0;
        for k in 0..ni {
            s += p[off + r * ni + k] * x[k];
        }
        let mut t = 0.0;
        for k in 0..nh {
            t += p[off + ni * nh + r * nh + k] * h[k];
        }
        s + t + p[off + ni * nh + nh * nh + r]
    };
    let mut h2 = vec![0.0; nh];
    let mut c2 = vec![0.0; nh];
    for r in 0..nh {
        let i_g = sigmoid(pre(0, r));
        let f_g = sigmoid(pre(1, r));
        let cand = pre(2, r).tanh();
        let o_g = sigmoid(pre(3, r));
        c2[r] = f_g * c[r] + i_g * cand;
        h2[r] = o_g * c2[r].tanh();
    }
    let base = 4 * block;
    let out = (0..no)
        .map(|r| {
            let mut s = 0.0;
            for k in 0..nh {
                s += p[base + r * nh + k] * h2[k];
            }
            (s + p[base + no * nh + r]).tanh()
        })
        .collect();
    (out, h2, c2)
}

pub fn ff_arch(rank: usize) -> NetworkArchitecture {
    NetworkArchitecture::new(NetworkVariant::FeedForward, rank, DEFAULT_HIDDEN).unwrap()
}

/// Feed-forward 2D genome whose cells turn muscle A when their -x neighbor
/// is living and muscle B otherwise, always with alpha near 1. Grown from
/// the center of a 7x7 lattice it settles into the full interior with a
/// muscle B column at x = 1, and it regrows that shape exactly after any
/// low-x damage.
pub fn left_neighbor_genome() -> Genome {
    let arch = ff_arch(2);
    let (ni, nh) = (arch.input_dim, arch.hidden_dim);
    let mut g = Genome::zeros(arch);
    // Alpha channel of Moore slot 3, offset (-1, 0).
    let left_alpha = 2 * 3 + 1;
    g.params[left_alpha] = 10.0;
    g.params[nh * ni] = -5.0;
    let base = nh * ni + nh;
    g.params[base + 3 * nh] = 2.0;
    g.params[base + 4 * nh] = -2.0;
    g.params[base + 6 * nh + 5] = 3.0;
    g
}

pub fn solid_cube(dims: Dims, lo: usize, hi: usize, state: CellState) -> Morphology {
    let mut m = Morphology::empty(dims);
    for z in lo..=hi {
        for y in lo..=hi {
            for x in lo..=hi {
                m.set([x, y, z], state);
            }
        }
    }
    m
}
