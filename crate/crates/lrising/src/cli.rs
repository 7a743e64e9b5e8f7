//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 task failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Resolved, RunConfig};
use crate::error::ConfigError;
use crate::manifest::{hash_of, run_stage, ResultManifest, StageSummary, Task};
use crate::render::render_tasks;
use crate::tasks::{self, output_dir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TASK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lrising", version, about = "Quench dynamics, ensembles and Monte Carlo for the long-range transverse-field Ising chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recompute tasks even when cached outputs match
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override every seed in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the coupling matrix and initial states; print J and the distance profile
    Couplings,
    /// Time-evolve every (state, g) pair
    Quench,
    /// Diagonal, canonical and microcanonical values per field
    Ensemble,
    /// Wolff Monte Carlo at g = 0 for each size and temperature
    Mc,
    /// Assemble (energy density, g) grids and the critical line
    PhaseDiagram,
    /// Binder crossings, extrapolated T_c and scaling collapse
    Collapse,
    /// Draw SVG figures from existing results
    Render {
        /// couplings, quench, ensemble, phase, correlations, binder or all
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Check the config and list the tasks it would run
    Validate,
    /// Every stage the config enables, in dependency order
    Run,
}

fn load(common: &Common) -> Result<(PathBuf, Resolved), ConfigError> {
    let path = common.config.clone().ok_or_else(|| ConfigError::Invalid {
        key: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut config = RunConfig::load(&path)?;
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    Ok((path, config.resolve()?))
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    let (path, resolved) = match load(&cli.common) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Command::Validate = cli.command {
        print_plan(&resolved);
        return EXIT_OK;
    }
    if cli.common.jobs == Some(0) {
        eprintln!("error: invalid `--jobs`: must be at least 1");
        return EXIT_CONFIG;
    }
    if let Command::Render { kind } = &cli.command {
        if kind != "all" && !crate::render::KINDS.contains(&kind.as_str()) {
            eprintln!("error: invalid `--kind`: unknown figure kind `{kind}`");
            return EXIT_CONFIG;
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.common.jobs {
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_TASK;
        }
    };
    let dir = output_dir(&resolved, &path, cli.common.out.as_deref());
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_TASK;
    }
    pool.install(|| execute(&cli.command, &resolved, &dir, cli.common.force))
}

fn print_plan(r: &Resolved) {
    let c = &r.config;
    println!("config ok: L = {}, provenance = {}, gamma = {}", r.size, r.couplings.provenance(), c.model.gamma);
    println!("fields: {:?}", c.model.fields);
    println!("initial states ({}):", r.states.len());
    for (s, e) in &r.states {
        println!("  {s}  E/(JL) = {:.6}", e / r.size as f64);
    }
    println!("quench tasks: {} ({} fields x {} states)", r.quench_tasks(), c.model.fields.len(), r.states.len());
    println!("ensemble tasks: {}", if c.ensembles.is_some() { c.model.fields.len() } else { 0 });
    println!("mc tasks: {}", c.mc.as_ref().map_or(0, |m| m.sizes.len()));
}

fn stage(
    name: &str,
    dir: &Path,
    manifest: &mut ResultManifest,
    tasks: Vec<Task<'_>>,
    force: bool,
    failures: &mut Vec<(String, String)>,
) -> bool {
    match run_stage(dir, manifest, tasks, force) {
        Ok(StageSummary { done, cached, failed }) => {
            println!("{name}: {done} run, {cached} cached, {} failed", failed.len());
            let ok = failed.is_empty();
            failures.extend(failed);
            ok
        }
        Err(e) => {
            failures.push((name.into(), e.to_string()));
            false
        }
    }
}

fn execute(command: &Command, r: &Resolved, dir: &Path, force: bool) -> i32 {
    let mut manifest = ResultManifest::load_or_new(dir, &hash_of(&r.config));
    let mut failures = Vec::new();
    let f = &mut failures;
    let m = &mut manifest;
    macro_rules! downstream {
        ($name:expr, $build:expr) => {
            match $build {
                Ok(t) => stage($name, dir, m, t, force, f),
                Err(e) => {
                    f.push(($name.to_string(), e.to_string()));
                    false
                }
            }
        };
    }
    match command {
        Command::Couplings => {
            if stage("couplings", dir, m, tasks::couplings_tasks(r), force, f) {
                print_couplings(r);
            }
        }
        Command::Quench => {
            stage("couplings", dir, m, tasks::couplings_tasks(r), force, f);
            stage("quench", dir, m, tasks::quench_tasks(r), force, f);
        }
        Command::Ensemble => {
            if r.config.ensembles.is_none() {
                eprintln!("error: invalid `ensembles`: the config has no [ensembles] block");
                return EXIT_CONFIG;
            }
            stage("couplings", dir, m, tasks::couplings_tasks(r), force, f);
            stage("ensemble", dir, m, tasks::ensemble_tasks(r), force, f);
        }
        Command::Mc => {
            if r.config.mc.is_none() {
                eprintln!("error: invalid `mc`: the config has no [mc] block");
                return EXIT_CONFIG;
            }
            stage("mc", dir, m, tasks::mc_tasks(r), force, f);
        }
        Command::PhaseDiagram => {
            downstream!("phase-diagram", tasks::phase_tasks(r, dir));
        }
        Command::Collapse => {
            if r.config.mc.is_none() {
                eprintln!("error: invalid `mc`: collapse needs an [mc] block");
                return EXIT_CONFIG;
            }
            downstream!("collapse", tasks::collapse_tasks(r, dir));
        }
        Command::Render { kind } => {
            downstream!("render", render_tasks(r, dir, kind));
        }
        Command::Validate => unreachable!("handled before execution"),
        Command::Run => {
            stage("couplings", dir, m, tasks::couplings_tasks(r), force, f);
            let q = stage("quench", dir, m, tasks::quench_tasks(r), force, f);
            let e = stage("ensemble", dir, m, tasks::ensemble_tasks(r), force, f);
            if q && e {
                downstream!("phase-diagram", tasks::phase_tasks(r, dir));
            }
            if r.config.mc.is_some() && stage("mc", dir, m, tasks::mc_tasks(r), force, f) {
                downstream!("collapse", tasks::collapse_tasks(r, dir));
            }
            downstream!("render", render_tasks(r, dir, "all"));
        }
    }
    if let Err(e) = manifest.save(dir) {
        failures.push(("manifest".into(), e.to_string()));
    }
    if failures.is_empty() {
        println!("outputs in {}", dir.display());
        EXIT_OK
    } else {
        for (id, msg) in &failures {
            eprintln!("failed: {id}: {msg}");
        }
        EXIT_TASK
    }
}

fn print_couplings(r: &Resolved) {
    let c = &r.couplings;
    let j = r.config.model.j;
    println!("J = {j}");
    println!("J_ij / J:");
    for i in 0..c.size() {
        let row: Vec<String> = c.row(i).iter().map(|v| format!("{:8.5}", v / j)).collect();
        println!("  {}", row.join(" "));
    }
    println!("distance profile (l, mean J(l) / J):");
    for (l, v) in c.distance_profile().iter().enumerate() {
        println!("  {:3} {:.6}", l + 1, v / j);
    }
}
