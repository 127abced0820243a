use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use softbot_core::evo::{self, EvoHistory, EvolutionState, GenerationStats, Observer};
use softbot_core::formats::{
    self, log_row, parse_checkpoint, parse_genome, parse_morphology, write_checkpoint, write_frames_csv,
    write_genome, write_log, write_morphology, write_report_json, write_report_table, write_trajectory,
    write_trajectory_csv, ReportEntry, RunManifest,
};
use softbot_core::grid::{cleanup_with, develop, Morphology};
use softbot_core::physics::{evaluate_locomotion_recorded, Recording};
use softbot_core::regen::{apply_damage, evolve_regeneration, recovery_report, regrow_with};
use softbot_core::{CellGrid, Error, Genome, NetworkInstance, NetworkVariant, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "softbot", version, about = "Grow, evolve, damage and regrow voxel soft robots")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration (for example a `config.json` snapshot).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment preset, used when no config file is given.
    #[arg(long, global = true, value_parser = preset_names())]
    preset: Option<String>,
    /// Overrides the evolution and regeneration seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "SOFTBOT_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for evaluation; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

fn preset_names() -> clap::builder::PossibleValuesParser {
    Preset::ALL.map(Preset::name).into()
}

#[derive(Subcommand)]
enum Command {
    /// Develop a genome from the seed cell and write the cleaned morphology.
    Grow {
        #[arg(long)]
        genome: PathBuf,
        /// Also write every intermediate grid.
        #[arg(long)]
        trace: bool,
    },
    /// Evolve growth networks for locomotion.
    Evolve {
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after writing the checkpoint for this generation.
        #[arg(long, hide = true)]
        halt_after: Option<usize>,
    },
    /// Grow a genome and remove the configured half of the body.
    Damage {
        #[arg(long)]
        genome: PathBuf,
    },
    /// Grow, damage, and regrow with a regeneration network.
    Regrow {
        #[arg(long)]
        genome: PathBuf,
        #[command(flatten)]
        regen: RegenSource,
    },
    /// Regrow and score original, damaged and regrown bodies.
    Report {
        #[arg(long)]
        genome: PathBuf,
        #[command(flatten)]
        regen: RegenSource,
        /// Row label in the report.
        #[arg(long, default_value = "robot")]
        name: String,
        /// Also export locomotion replays of all three bodies.
        #[arg(long)]
        replay: bool,
    },
    /// Simulate a morphology and export its trajectory and frames.
    Replay {
        #[arg(long)]
        morphology: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RegenSource {
    /// Regeneration genome to apply to the damaged body.
    #[arg(long)]
    regen_genome: Option<PathBuf>,
    /// Evolve a regeneration genome instead of loading one.
    #[arg(long)]
    evolve: bool,
}

enum Failure {
    Usage(String),
    Architecture(String),
    Output(PathBuf, std::io::Error),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Architecture(_) => 6,
            Failure::Output(..) => 1,
            Failure::Core(e) => match e {
                Error::Parse { .. } | Error::Config(_) | Error::Json(_) => 3,
                Error::Diverged { .. } => 4,
                Error::Checkpoint(_) => 5,
                Error::Contract(_) | Error::Io(_) => 1,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Architecture(m) => m.clone(),
            Failure::Output(p, e) => format!("cannot write {}: {e}", p.display()),
            Failure::Core(e) => e.to_string(),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    threads: usize,
}

impl Context {
    fn from_global(g: &Global) -> Outcome<Self> {
        let mut cfg = match (&g.config, &g.preset) {
            (Some(path), _) => {
                let text = read_input(path)?;
                RunConfig::from_json(&text).map_err(|e| with_path(e, path))?
            }
            (None, Some(name)) => RunConfig::preset(Preset::parse(name).expect("validated by clap")),
            (None, None) => RunConfig::preset(Preset::TwoD),
        };
        if let Some(seed) = g.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        let out = g.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        let threads = match g.threads {
            Some(0) => return Err(Failure::Usage("--threads must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(Context { cfg, out, threads })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Outcome {
        fs::create_dir_all(&self.out).map_err(|e| Failure::Output(self.out.clone(), e))?;
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, contents)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| Failure::Output(path, e))
    }

    fn write_snapshot(&self) -> Outcome {
        self.write("config.json", &self.cfg.to_json())
    }

    fn load_genome(&self, path: &Path, expected: softbot_core::NetworkArchitecture, role: &str) -> Outcome<Genome> {
        let g = parse_genome(&read_input(path)?).map_err(|e| with_path(e, path))?;
        if g.arch != expected {
            return Err(Failure::Architecture(format!(
                "{}: {role} genome is {:?} rank-{} with {} hidden units, but the config expects {:?} rank-{} with {}",
                path.display(),
                g.arch.variant,
                rank_of(g.arch),
                g.arch.hidden_dim,
                expected.variant,
                rank_of(expected),
                expected.hidden_dim
            )));
        }
        Ok(g)
    }
}

fn rank_of(a: softbot_core::NetworkArchitecture) -> usize {
    if a.input_dim == 18 {
        2
    } else {
        3
    }
}

fn read_input(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn epoch_seconds() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn variant_name(v: NetworkVariant) -> &'static str {
    match v {
        NetworkVariant::FeedForward => "feed-forward",
        NetworkVariant::Recurrent => "recurrent",
    }
}

/// Grows `genome` from the configured seed; returns the final grid and its
/// cleaned morphology.
fn grow(ctx: &Context, genome: Genome) -> Outcome<(Vec<CellGrid>, Morphology)> {
    let net = NetworkInstance::new(genome);
    let grids = develop(&ctx.cfg.init_grid()?, &net, ctx.cfg.development_steps)?;
    let morph = cleanup_with(grids.last().expect("development keeps the start grid"), ctx.cfg.cleanup);
    Ok((grids, morph))
}

/// Copies states and alphas onto a grid with `width` memory slots per cell.
fn with_memory(grid: &CellGrid, width: usize) -> CellGrid {
    if grid.memory_width() == width {
        return grid.clone();
    }
    let dims = grid.dims();
    let mut out = CellGrid::empty(dims, width);
    for idx in 0..dims.len() {
        let c = dims.coord(idx);
        out.set(c, grid.state(c), grid.alpha(c));
    }
    out
}

struct Damaged {
    original: Morphology,
    damaged_grid: CellGrid,
    damaged: Morphology,
}

fn grow_and_damage(ctx: &Context, genome_path: &Path) -> Outcome<Damaged> {
    let genome = ctx.load_genome(genome_path, ctx.cfg.architecture()?, "growth")?;
    let (grids, original) = grow(ctx, genome)?;
    let damaged_grid = apply_damage(grids.last().expect("start grid"), &ctx.cfg.damage)?;
    let damaged = cleanup_with(&damaged_grid, ctx.cfg.cleanup);
    Ok(Damaged {
        original,
        damaged_grid,
        damaged,
    })
}

struct Regrown {
    body: Damaged,
    regrown: Morphology,
    variant: NetworkVariant,
}

fn run_regrow(ctx: &Context, genome_path: &Path, src: &RegenSource) -> Outcome<Regrown> {
    let body = grow_and_damage(ctx, genome_path)?;
    let arch = ctx.cfg.regen_architecture()?;
    let template = with_memory(&body.damaged_grid, arch.memory_width());
    let genome = match (&src.regen_genome, src.evolve) {
        (Some(path), _) => ctx.load_genome(path, arch, "regeneration")?,
        (None, true) => {
            let h = evolve_regeneration(
                &body.original,
                &template,
                arch,
                ctx.cfg.regen_steps,
                &ctx.cfg.regeneration,
                ctx.threads,
            )?;
            ctx.write("regen_log.csv", &write_log(&h))?;
            let g = h.best_genome.expect("at least one generation is evaluated");
            ctx.write("regen_genome.json", &write_genome(&g))?;
            g
        }
        (None, false) => {
            return Err(Failure::Usage(
                "a regeneration genome is required: pass --regen-genome or --evolve".into(),
            ))
        }
    };
    let net = NetworkInstance::new(genome);
    let regrown = regrow_with(&template, &net, ctx.cfg.regen_steps, ctx.cfg.cleanup)?;
    Ok(Regrown {
        body,
        regrown,
        variant: arch.variant,
    })
}

fn write_bodies(ctx: &Context, r: &Regrown) -> Outcome {
    ctx.write("original.txt", &write_morphology(&r.body.original))?;
    ctx.write("damaged.txt", &write_morphology(&r.body.damaged))?;
    ctx.write("regrown.txt", &write_morphology(&r.regrown))
}

fn replay_recording(ctx: &Context) -> Recording {
    Recording {
        sample_every: ctx.cfg.replay_sample_every,
        frames: true,
    }
}

fn write_replay(ctx: &Context, prefix: &str, m: &Morphology) -> Outcome<f64> {
    let c = &ctx.cfg;
    let r = evaluate_locomotion_recorded(m, &c.material, &c.physics, c.duration, replay_recording(ctx))?;
    ctx.write(&format!("{prefix}trajectory.csv"), &write_trajectory_csv(&r))?;
    ctx.write(&format!("{prefix}frames.csv"), &write_frames_csv(&r))?;
    Ok(r.distance)
}

/// Streams log rows and checkpoints to the output directory.
struct RunFiles<'a> {
    ctx: &'a Context,
    hash: String,
    halt_after: Option<usize>,
    halted: bool,
}

impl Observer for RunFiles<'_> {
    fn on_generation(&mut self, stats: &GenerationStats, _history: &EvoHistory) -> softbot_core::Result<()> {
        let mut log = fs::OpenOptions::new().append(true).open(self.ctx.path("log.csv"))?;
        log.write_all(log_row(stats).as_bytes())?;
        Ok(())
    }

    fn on_checkpoint(&mut self, state: &EvolutionState) -> softbot_core::Result<()> {
        self.ctx
            .write("checkpoint.json", &write_checkpoint(state, &self.hash))
            .map_err(|f| Error::Io(std::io::Error::other(f.message())))?;
        if self.halt_after == Some(state.generation) {
            self.halted = true;
            return Err(Error::Checkpoint(format!("halted at generation {}", state.generation)));
        }
        Ok(())
    }
}

fn cmd_evolve(ctx: &Context, resume: bool, halt_after: Option<usize>) -> Outcome {
    let started = epoch_seconds();
    let hash = ctx.cfg.hash();
    let task = ctx.cfg.task()?;
    let state = if resume {
        let path = ctx.path("checkpoint.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        parse_checkpoint(&text, &hash)?
    } else {
        EvolutionState::initial(ctx.cfg.architecture()?, &ctx.cfg.evolution)
    };
    ctx.write_snapshot()?;
    // A resumed log restarts from the checkpoint so rows past it are dropped.
    ctx.write("log.csv", &write_log(&state.history))?;
    let mut files = RunFiles {
        ctx,
        hash,
        halt_after,
        halted: false,
    };
    let history = match evo::resume(&ctx.cfg.evolution, &task, ctx.threads, state, &mut files) {
        Ok(h) => h,
        Err(_) if files.halted => {
            eprintln!("halted after generation {}; continue with --resume", halt_after.unwrap_or(0));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    ctx.write("log.csv", &write_log(&history))?;
    let best = history.best_genome.clone().expect("at least one generation is evaluated");
    ctx.write("best_genome.json", &write_genome(&best))?;
    let (_, morph) = grow(ctx, best)?;
    ctx.write("best_morphology.txt", &write_morphology(&morph))?;

    let mut files_list = vec!["config.json", "log.csv", "best_genome.json", "best_morphology.txt"];
    if ctx.path("checkpoint.json").exists() {
        files_list.push("checkpoint.json");
    }
    let manifest = RunManifest {
        format: formats::MANIFEST_FORMAT.to_string(),
        version: formats::FORMAT_VERSION,
        config_hash: ctx.cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: epoch_seconds().max(started),
        files: files_list.into_iter().map(String::from).collect(),
    };
    ctx.write("manifest.json", &serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
    println!(
        "best fitness {} after {} generations",
        history.best_fitness.unwrap_or(0.0),
        history.generations.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let ctx = Context::from_global(&cli.global)?;
    match cli.command {
        Command::Grow { genome, trace } => {
            let g = ctx.load_genome(&genome, ctx.cfg.architecture()?, "growth")?;
            let (grids, morph) = grow(&ctx, g)?;
            ctx.write_snapshot()?;
            ctx.write("morphology.txt", &write_morphology(&morph))?;
            if trace {
                ctx.write("trajectory.txt", &write_trajectory(&grids))?;
            }
            println!("{} live voxels", morph.live_voxel_count());
        }
        Command::Evolve { resume, halt_after } => cmd_evolve(&ctx, resume, halt_after)?,
        Command::Damage { genome } => {
            let d = grow_and_damage(&ctx, &genome)?;
            ctx.write_snapshot()?;
            ctx.write("original.txt", &write_morphology(&d.original))?;
            ctx.write("damaged.txt", &write_morphology(&d.damaged))?;
            println!(
                "{} of {} voxels remain",
                d.damaged.live_voxel_count(),
                d.original.live_voxel_count()
            );
        }
        Command::Regrow { genome, regen } => {
            let r = run_regrow(&ctx, &genome, &regen)?;
            ctx.write_snapshot()?;
            write_bodies(&ctx, &r)?;
            println!("regrown body has {} live voxels", r.regrown.live_voxel_count());
        }
        Command::Report {
            genome,
            regen,
            name,
            replay,
        } => {
            let r = run_regrow(&ctx, &genome, &regen)?;
            let c = &ctx.cfg;
            let report = recovery_report(
                &r.body.original,
                &r.body.damaged,
                &r.regrown,
                &c.material,
                &c.physics,
                c.duration,
            )?;
            if replay {
                write_replay(&ctx, "original_", &r.body.original)?;
                write_replay(&ctx, "damaged_", &r.body.damaged)?;
                write_replay(&ctx, "regrown_", &r.regrown)?;
            }
            ctx.write_snapshot()?;
            write_bodies(&ctx, &r)?;
            let entries = [ReportEntry {
                name,
                variant: variant_name(r.variant).to_string(),
                report,
            }];
            let table = write_report_table(&entries);
            ctx.write("report.json", &write_report_json(&entries))?;
            ctx.write("report.txt", &table)?;
            print!("{table}");
        }
        Command::Replay { morphology } => {
            let m = parse_morphology(&read_input(&morphology)?).map_err(|e| with_path(e, &morphology))?;
            if m.dims() != ctx.cfg.dims {
                return Err(Failure::Usage(format!(
                    "{} is {} but the config lattice is {}",
                    morphology.display(),
                    m.dims().label(),
                    ctx.cfg.dims.label()
                )));
            }
            ctx.write_snapshot()?;
            let d = write_replay(&ctx, "", &m)?;
            println!("distance {d}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
