//! On-disk formats.
//!
//! * Lattices: a header line `# morphology v1 <dims>` (or `# grid v1 <dims>
//!   step=<k>` for trajectory blocks) followed by one line of digits 0-4 per
//!   y-row, rows in increasing y. 3D lattices write one such block per
//!   z-layer with layers separated by a blank line.
//! * Genomes, checkpoints, reports and manifests: JSON with `format` and
//!   `version` fields.
//! * Logs and trajectories: CSV with a leading `# <kind> v1` comment line.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{EvoHistory, EvolutionState, GenerationStats};
use crate::grid::{CellGrid, CellState, Dims, Morphology};
use crate::nets::{Genome, NetworkArchitecture};
use crate::physics::LocomotionResult;
use crate::regen::RecoveryReport;

pub const FORMAT_VERSION: u32 = 1;

fn write_states(out: &mut String, dims: Dims, states: impl Fn(usize) -> CellState) {
    for z in 0..dims.nz {
        if z > 0 {
            out.push('\n');
        }
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                out.push(char::from(b'0' + states(dims.index([x, y, z])).code()));
            }
            out.push('\n');
        }
    }
}

pub fn write_morphology(m: &Morphology) -> String {
    let mut out = format!("# morphology v{FORMAT_VERSION} {}\n", m.dims().label());
    write_states(&mut out, m.dims(), |i| m.voxels()[i]);
    out
}

/// Development trajectory as consecutive `# grid` blocks separated by blank
/// lines. Only cell states are written.
pub fn write_trajectory(grids: &[CellGrid]) -> String {
    let mut out = String::new();
    for (k, g) in grids.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "# grid v{FORMAT_VERSION} {} step={}", g.dims().label(), g.step_count());
        write_states(&mut out, g.dims(), |i| g.states()[i]);
    }
    out
}

fn parse_dims(label: &str, line: usize) -> Result<Dims> {
    let parts: Vec<usize> = label
        .split('x')
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(line, format!("bad lattice size `{label}`")))?;
    match parts.as_slice() {
        [nx, ny] if *nx > 0 && *ny > 0 => Ok(Dims::planar(*nx, *ny)),
        [nx, ny, nz] if *nx > 0 && *ny > 0 && *nz > 1 => Ok(Dims { nx: *nx, ny: *ny, nz: *nz }),
        _ => Err(parse_err(line, format!("bad lattice size `{label}`"))),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Block {
    dims: Dims,
    step: Option<usize>,
    states: Vec<CellState>,
}

fn parse_blocks(text: &str, kind: &str) -> Result<Vec<Block>> {
    let mut blocks: Vec<(usize, Block, Vec<(usize, &str)>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if let Some(header) = line.strip_prefix('#') {
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.first() != Some(&kind) {
                return Err(parse_err(line_no, format!("expected a `# {kind}` header")));
            }
            if fields.get(1) != Some(&format!("v{FORMAT_VERSION}").as_str()) {
                return Err(parse_err(
                    line_no,
                    format!("unsupported {kind} format version {:?}", fields.get(1)),
                ));
            }
            let dims = parse_dims(fields.get(2).copied().unwrap_or(""), line_no)?;
            let step = fields
                .iter()
                .find_map(|f| f.strip_prefix("step="))
                .map(|s| s.parse::<usize>().map_err(|_| parse_err(line_no, "bad step")))
                .transpose()?;
            blocks.push((
                line_no,
                Block {
                    dims,
                    step,
                    states: Vec::new(),
                },
                Vec::new(),
            ));
        } else if line.is_empty() {
            continue;
        } else {
            let Some(last) = blocks.last_mut() else {
                return Err(parse_err(line_no, format!("data before `# {kind}` header")));
            };
            last.2.push((line_no, line));
        }
    }
    if blocks.is_empty() {
        return Err(parse_err(1, format!("no `# {kind}` header found")));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (header_line, mut block, rows) in blocks {
        let d = block.dims;
        if rows.len() != d.ny * d.nz {
            return Err(parse_err(
                header_line,
                format!("expected {} rows for {}, found {}", d.ny * d.nz, d.label(), rows.len()),
            ));
        }
        // rows arrive ordered by (z, y), matching index order
        for (line_no, row) in rows {
            if row.chars().count() != d.nx {
                return Err(parse_err(line_no, format!("expected {} cells, found {}", d.nx, row.len())));
            }
            for ch in row.chars() {
                let state = ch
                    .to_digit(10)
                    .and_then(|v| CellState::from_code(v as u8))
                    .ok_or_else(|| parse_err(line_no, format!("invalid cell `{ch}`")))?;
                block.states.push(state);
            }
        }
        out.push(block);
    }
    Ok(out)
}

pub fn parse_morphology(text: &str) -> Result<Morphology> {
    let mut blocks = parse_blocks(text, "morphology")?;
    if blocks.len() != 1 {
        return Err(parse_err(1, "expected exactly one morphology block"));
    }
    let b = blocks.pop().expect("one block");
    Morphology::from_voxels(b.dims, b.states)
}

/// Parses a trajectory file into `(step, states)` pairs.
pub fn parse_trajectory(text: &str) -> Result<Vec<(usize, Dims, Vec<CellState>)>> {
    Ok(parse_blocks(text, "grid")?
        .into_iter()
        .enumerate()
        .map(|(k, b)| (b.step.unwrap_or(k), b.dims, b.states))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeFile {
    pub format: String,
    pub version: u32,
    pub arch: NetworkArchitecture,
    pub params: Vec<f64>,
}

pub const GENOME_FORMAT: &str = "softbot-genome";

pub fn write_genome(g: &Genome) -> String {
    let file = GenomeFile {
        format: GENOME_FORMAT.to_string(),
        version: FORMAT_VERSION,
        arch: g.arch,
        params: g.params.clone(),
    };
    serde_json::to_string_pretty(&file).expect("genome serialises")
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.to_string())
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(parse_err(1, format!("expected format `{expected}`, found `{format}`")));
    }
    if version != FORMAT_VERSION {
        return Err(parse_err(1, format!("unsupported {expected} version {version}")));
    }
    Ok(())
}

pub fn parse_genome(text: &str) -> Result<Genome> {
    let file: GenomeFile = serde_json::from_str(text).map_err(json_err)?;
    check_header(&file.format, file.version, GENOME_FORMAT)?;
    Genome::new(file.arch, file.params).map_err(|e| parse_err(1, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub generation: usize,
    /// Streams are addressed by generation, so the cursor is the generation.
    pub rng_cursor: u64,
    pub population: Vec<Genome>,
    pub history: EvoHistory,
}

pub const CHECKPOINT_FORMAT: &str = "softbot-checkpoint";

pub fn write_checkpoint(state: &EvolutionState, config_hash: &str) -> String {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        generation: state.generation,
        rng_cursor: state.generation as u64,
        population: state.population.clone(),
        history: state.history.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serialises")
}

/// Reads a checkpoint, refusing it unless it was written for `config_hash`.
pub fn parse_checkpoint(text: &str, config_hash: &str) -> Result<EvolutionState> {
    let file: CheckpointFile = serde_json::from_str(text).map_err(json_err)?;
    check_header(&file.format, file.version, CHECKPOINT_FORMAT)?;
    if file.config_hash != config_hash {
        return Err(Error::Checkpoint(format!(
            "checkpoint was written for config {} but the current config hashes to {}",
            file.config_hash, config_hash
        )));
    }
    Ok(EvolutionState {
        generation: file.generation,
        population: file.population,
        history: file.history,
    })
}

pub const LOG_HEADER: &str = "# evolog v1\ngeneration,best,mean,min,best_live_voxels\n";

pub fn log_row(s: &GenerationStats) -> String {
    format!(
        "{},{},{},{},{}\n",
        s.generation, s.best, s.mean, s.min, s.best_live_voxels
    )
}

pub fn write_log(history: &EvoHistory) -> String {
    let mut out = LOG_HEADER.to_string();
    for s in &history.generations {
        out.push_str(&log_row(s));
    }
    out
}

/// Center-of-mass trajectory CSV with a distance footer.
pub fn write_trajectory_csv(r: &LocomotionResult) -> String {
    let mut out = String::from("# trajectory v1\nt,com_x,com_y,com_z\n");
    for (t, c) in &r.trajectory {
        let _ = writeln!(out, "{t},{},{},{}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "# distance={}", r.distance);
    out
}

/// Mass positions per sampled frame.
pub fn write_frames_csv(r: &LocomotionResult) -> String {
    let mut out = String::from("# frames v1\nframe,t,mass,x,y,z\n");
    for (k, (frame, (t, _))) in r.frames.iter().zip(&r.trajectory).enumerate() {
        for (i, p) in frame.iter().enumerate() {
            let _ = writeln!(out, "{k},{t},{i},{},{},{}", p[0], p[1], p[2]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub variant: String,
    pub report: RecoveryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    /// morphology name -> network variant -> report
    pub entries: std::collections::BTreeMap<String, std::collections::BTreeMap<String, RecoveryReport>>,
}

pub const REPORT_FORMAT: &str = "softbot-recovery-report";

pub fn write_report_json(entries: &[ReportEntry]) -> String {
    let mut file = ReportFile {
        format: REPORT_FORMAT.to_string(),
        version: FORMAT_VERSION,
        entries: Default::default(),
    };
    for e in entries {
        file.entries
            .entry(e.name.clone())
            .or_default()
            .insert(e.variant.clone(), e.report.clone());
    }
    serde_json::to_string_pretty(&file).expect("report serialises")
}

pub fn write_report_table(entries: &[ReportEntry]) -> String {
    let mut out = format!("{}\n", crate::regen::TABLE_HEADER);
    for e in entries {
        out.push_str(&e.report.row(&e.name, &e.variant));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub files: Vec<String>,
}

pub const MANIFEST_FORMAT: &str = "softbot-manifest";
