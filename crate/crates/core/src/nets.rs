//! Per-cell networks and the genome that parameterises them.
//!
//! Flat parameter layout, all matrices row-major (one row per output unit):
//!
//! * feed-forward: `W_in[hidden][input]`, `b_in[hidden]`, then the readout.
//! * recurrent: four gate blocks in the order input, forget, cell, output;
//!   each block is `W_x[hidden][input]`, `W_h[hidden][hidden]`, `b[hidden]`.
//!   Then the readout.
//! * readout: `W_out[output][hidden]`, `b_out[output]`.
//!
//! Recurrent memory is kept by the grid as `[h.., c..]` per cell.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{neighborhood_size, CellState};

/// Number of network outputs: one per cell state plus alpha.
pub const OUTPUT_DIM: usize = CellState::COUNT + 1;
pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkVariant {
    FeedForward,
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub variant: NetworkVariant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl NetworkArchitecture {
    /// Architecture for a lattice of the given rank (2 or 3).
    pub fn new(variant: NetworkVariant, rank: usize, hidden_dim: usize) -> Result<Self> {
        if rank != 2 && rank != 3 {
            return Err(Error::config(format!("lattice rank must be 2 or 3, got {rank}")));
        }
        let arch = NetworkArchitecture {
            variant,
            input_dim: 2 * neighborhood_size(rank),
            hidden_dim,
            output_dim: OUTPUT_DIM,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::config(format!(
                "network dimensions must be positive: {}/{}/{}",
                self.input_dim, self.hidden_dim, self.output_dim
            )));
        }
        if self.output_dim != OUTPUT_DIM {
            return Err(Error::config(format!(
                "output dimension must be {OUTPUT_DIM}, got {}",
                self.output_dim
            )));
        }
        Ok(())
    }

    /// Per-cell memory values the grid must carry for this network.
    pub fn memory_width(&self) -> usize {
        match self.variant {
            NetworkVariant::FeedForward => 0,
            NetworkVariant::Recurrent => 2 * self.hidden_dim,
        }
    }

    fn hidden_param_count(&self) -> usize {
        let (i, h) = (self.input_dim, self.hidden_dim);
        match self.variant {
            NetworkVariant::FeedForward => (i + 1) * h,
            NetworkVariant::Recurrent => 4 * (i + h + 1) * h,
        }
    }

    fn readout_param_count(&self) -> usize {
        (self.hidden_dim + 1) * self.output_dim
    }
}

/// Length of the flat parameter vector for `arch`.
pub fn param_count(arch: &NetworkArchitecture) -> Result<usize> {
    arch.validate()?;
    Ok(arch.hidden_param_count() + arch.readout_param_count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub arch: NetworkArchitecture,
    pub params: Vec<f64>,
}

impl Genome {
    pub fn new(arch: NetworkArchitecture, params: Vec<f64>) -> Result<Self> {
        let n = param_count(&arch)?;
        if params.len() != n {
            return Err(Error::contract(format!(
                "genome has {} parameters, architecture needs {n}",
                params.len()
            )));
        }
        Ok(Genome { arch, params })
    }

    pub fn zeros(arch: NetworkArchitecture) -> Self {
        let n = arch.hidden_param_count() + arch.readout_param_count();
        Genome {
            arch,
            params: vec![0.0; n],
        }
    }

    /// i.i.d. Gaussian parameters with mean 0 and standard deviation `std`.
    pub fn random<R: Rng + ?Sized>(arch: NetworkArchitecture, rng: &mut R, std: f64) -> Self {
        let mut g = Self::zeros(arch);
        for p in &mut g.params {
            let e: f64 = rng.sample(StandardNormal);
            *p = std * e;
        }
        g
    }

    /// A network whose output ignores its input: `state` wins the argmax and
    /// alpha decodes to `alpha`.
    pub fn constant_output(arch: NetworkArchitecture, state: CellState, alpha: f64) -> Self {
        let mut g = Self::zeros(arch);
        let b_out = arch.hidden_param_count() + arch.hidden_dim * arch.output_dim;
        g.params[b_out + state.code() as usize] = 1.0;
        g.params[b_out + CellState::COUNT] = alpha.clamp(0.0, 0.999_999).atanh();
        g
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn unflatten(&self) -> NetworkParams {
        let a = &self.arch;
        let (i, h, o) = (a.input_dim, a.hidden_dim, a.output_dim);
        let mut cursor = ParamCursor::new(&self.params);
        let hidden = match a.variant {
            NetworkVariant::FeedForward => HiddenParams::FeedForward(DenseLayer {
                rows: h,
                cols: i,
                weights: cursor.take(h * i),
                bias: cursor.take(h),
            }),
            NetworkVariant::Recurrent => HiddenParams::Recurrent(std::array::from_fn(|_| GateBlock {
                input_weights: cursor.take(h * i),
                recurrent_weights: cursor.take(h * h),
                bias: cursor.take(h),
            })),
        };
        let readout = DenseLayer {
            rows: o,
            cols: h,
            weights: cursor.take(o * h),
            bias: cursor.take(o),
        };
        NetworkParams { hidden, readout }
    }
}

struct ParamCursor<'a> {
    rest: &'a [f64],
}

impl<'a> ParamCursor<'a> {
    fn new(rest: &'a [f64]) -> Self {
        ParamCursor { rest }
    }

    fn take(&mut self, n: usize) -> Vec<f64> {
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        head.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateBlock {
    pub input_weights: Vec<f64>,
    pub recurrent_weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HiddenParams {
    FeedForward(DenseLayer),
    /// Gates in order: input, forget, cell candidate, output.
    Recurrent([GateBlock; 4]),
}

/// Structured view of a genome's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub hidden: HiddenParams,
    pub readout: DenseLayer,
}

impl NetworkParams {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.hidden {
            HiddenParams::FeedForward(l) => {
                out.extend_from_slice(&l.weights);
                out.extend_from_slice(&l.bias);
            }
            HiddenParams::Recurrent(gates) => {
                for g in gates {
                    out.extend_from_slice(&g.input_weights);
                    out.extend_from_slice(&g.recurrent_weights);
                    out.extend_from_slice(&g.bias);
                }
            }
        }
        out.extend_from_slice(&self.readout.weights);
        out.extend_from_slice(&self.readout.bias);
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Working buffers for repeated forward passes.
#[derive(Debug, Clone)]
pub struct Scratch {
    hidden: Vec<f64>,
    gates: Vec<f64>,
    recur: Vec<f64>,
    nonzero: Vec<usize>,
}

/// Column-major copy of a `rows x cols` row-major weight matrix, so a
/// matrix-vector product accumulates all rows at once. Each row still sums
/// its terms in ascending column order.
#[derive(Debug, Clone)]
struct Transposed {
    rows: usize,
    cols: Vec<f64>,
}

impl Transposed {
    fn new(w: &[f64], rows: usize, cols: usize) -> Self {
        let mut t = vec![0.0; w.len()];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = w[r * cols + c];
            }
        }
        Transposed { rows, cols: t }
    }

    /// `acc[r] += w[r][k] * x[k]` for each listed `k`, in order.
    fn accumulate(&self, x: &[f64], ks: impl Iterator<Item = usize>, acc: &mut [f64]) {
        for k in ks {
            let xk = x[k];
            let col = &self.cols[k * self.rows..(k + 1) * self.rows];
            for (a, w) in acc.iter_mut().zip(col) {
                *a += w * xk;
            }
        }
    }
}

/// A genome ready for evaluation. Holds no per-cell state.
#[derive(Debug, Clone)]
pub struct NetworkInstance {
    genome: Genome,
    /// Feed-forward: one input matrix. Recurrent: Wx then Wh per gate.
    hidden: Vec<Transposed>,
    readout: Transposed,
}

impl NetworkInstance {
    pub fn new(genome: Genome) -> Self {
        let a = genome.arch;
        let (i, h, o) = (a.input_dim, a.hidden_dim, a.output_dim);
        let p = &genome.params;
        let hidden = match a.variant {
            NetworkVariant::FeedForward => vec![Transposed::new(&p[..h * i], h, i)],
            NetworkVariant::Recurrent => {
                let block = (i + h + 1) * h;
                (0..4)
                    .flat_map(|gate| {
                        let blk = &p[gate * block..(gate + 1) * block];
                        [
                            Transposed::new(&blk[..h * i], h, i),
                            Transposed::new(&blk[h * i..h * (i + h)], h, h),
                        ]
                    })
                    .collect()
            }
        };
        let start = a.hidden_param_count();
        let readout = Transposed::new(&p[start..start + o * h], o, h);
        NetworkInstance {
            genome,
            hidden,
            readout,
        }
    }

    pub fn genome(&self) -> &Genome {
        &self.genome
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.genome.arch
    }

    pub fn scratch(&self) -> Scratch {
        let h = self.genome.arch.hidden_dim;
        Scratch {
            hidden: vec![0.0; h],
            gates: vec![0.0; 4 * h],
            recur: vec![0.0; h],
            nonzero: Vec::with_capacity(self.genome.arch.input_dim),
        }
    }

    /// Evaluates the network. Recurrent networks require `memory` as
    /// `[h.., c..]` and update it in place.
    pub fn forward_with(
        &self,
        input: &[f64],
        memory: Option<&mut [f64]>,
        scratch: &mut Scratch,
    ) -> Result<[f64; OUTPUT_DIM]> {
        let a = &self.genome.arch;
        if input.len() != a.input_dim {
            return Err(Error::contract(format!(
                "input has length {}, network expects {}",
                input.len(),
                a.input_dim
            )));
        }
        let (i, h) = (a.input_dim, a.hidden_dim);
        let p = &self.genome.params;
        // Empty and growing neighbors feed exact zeros; skipping them keeps
        // the order of the remaining terms.
        scratch.nonzero.clear();
        scratch.nonzero.extend((0..i).filter(|&k| input[k] != 0.0));
        match (a.variant, memory) {
            (NetworkVariant::FeedForward, _) => {
                let b = &p[h * i..(i + 1) * h];
                scratch.hidden.fill(0.0);
                self.hidden[0].accumulate(input, scratch.nonzero.iter().copied(), &mut scratch.hidden);
                for (x, b) in scratch.hidden.iter_mut().zip(b) {
                    *x = (*x + b).tanh();
                }
            }
            (NetworkVariant::Recurrent, Some(mem)) => {
                if mem.len() != 2 * h {
                    return Err(Error::contract(format!(
                        "memory has length {}, network expects {}",
                        mem.len(),
                        2 * h
                    )));
                }
                let block = (i + h + 1) * h;
                let (h_prev, c_prev) = mem.split_at_mut(h);
                for gate in 0..4 {
                    let b = &p[gate * block + h * (i + h)..(gate + 1) * block];
                    let sx = &mut scratch.gates[gate * h..(gate + 1) * h];
                    sx.fill(0.0);
                    self.hidden[2 * gate].accumulate(input, scratch.nonzero.iter().copied(), sx);
                    scratch.recur.fill(0.0);
                    self.hidden[2 * gate + 1].accumulate(h_prev, 0..h, &mut scratch.recur);
                    for ((g, sh), b) in sx.iter_mut().zip(&scratch.recur).zip(b) {
                        *g = *g + sh + b;
                    }
                }
                for r in 0..h {
                    let ig = sigmoid(scratch.gates[r]);
                    let fg = sigmoid(scratch.gates[h + r]);
                    let cand = scratch.gates[2 * h + r].tanh();
                    let og = sigmoid(scratch.gates[3 * h + r]);
                    let c = fg * c_prev[r] + ig * cand;
                    c_prev[r] = c;
                    scratch.hidden[r] = og * c.tanh();
                }
                h_prev.copy_from_slice(&scratch.hidden);
            }
            (NetworkVariant::Recurrent, None) => {
                return Err(Error::contract("recurrent network evaluated without memory"));
            }
        }

        let o = a.output_dim;
        let b = &p[a.hidden_param_count() + o * h..];
        let mut out = [0.0; OUTPUT_DIM];
        self.readout.accumulate(&scratch.hidden, 0..h, &mut out);
        for (x, b) in out.iter_mut().zip(b) {
            *x = (*x + b).tanh();
        }
        Ok(out)
    }
}

/// Single feed-forward evaluation.
pub fn forward_feedforward(genome: &Genome, input: &[f64]) -> Result<[f64; OUTPUT_DIM]> {
    if genome.arch.variant != NetworkVariant::FeedForward {
        return Err(Error::contract("forward_feedforward called on a recurrent genome"));
    }
    let net = NetworkInstance::new(genome.clone());
    net.forward_with(input, None, &mut net.scratch())
}

/// Single recurrent step; returns the outputs and the new `(h, c)`.
pub fn forward_recurrent(
    genome: &Genome,
    input: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<([f64; OUTPUT_DIM], Vec<f64>, Vec<f64>)> {
    if genome.arch.variant != NetworkVariant::Recurrent {
        return Err(Error::contract("forward_recurrent called on a feed-forward genome"));
    }
    let hd = genome.arch.hidden_dim;
    if h.len() != hd || c.len() != hd {
        return Err(Error::contract(format!(
            "memory lengths {}/{} do not match hidden size {hd}",
            h.len(),
            c.len()
        )));
    }
    let net = NetworkInstance::new(genome.clone());
    let mut mem = [h, c].concat();
    let out = net.forward_with(input, Some(&mut mem), &mut net.scratch())?;
    let c_new = mem.split_off(hd);
    Ok((out, mem, c_new))
}

/// Argmax over the five state outputs (lowest code wins ties) and alpha
/// clamped to [0, 1].
pub fn decode_outputs(out: &[f64]) -> (CellState, f64) {
    let mut best = 0;
    for k in 1..CellState::COUNT {
        if out[k] > out[best] {
            best = k;
        }
    }
    let state = CellState::ALL[best];
    (state, out[CellState::COUNT].clamp(0.0, 1.0))
}
