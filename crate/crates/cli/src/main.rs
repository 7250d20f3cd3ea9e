mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eit_core::experiment::{
    compare, replay, run_on, sweep, write_sweep, ExperimentReport, ExperimentSpec, MeshSource, MeshSpec, Method,
    PhantomId, SweepAxis, Workbench,
};
use eit_core::mesh::{generate_disk_mesh, write_mesh, ElectrodeLayout};
use eit_core::Exec;

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "eit", version, about = "Elastic-net EIT reconstruction: phantom runs, sweeps and method comparisons")]
struct Cli {
    /// Run every map sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One reconstruction.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// One reconstruction per value of a parameter.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every method on every phantom and noise level, with table5.csv.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "alg1,alg2,tv,l1,l2")]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
        phantoms: Vec<PhantomId>,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.003")]
        noise: Vec<f64>,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the experiment recorded in a report.json and check RE bitwise.
    Replay {
        report: PathBuf,
        /// Also write the rerun's outputs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated disk mesh.
    Meshgen {
        /// Target element count.
        #[arg(long, default_value_t = eit_core::experiment::DEFAULT_COARSE_ELEMENTS)]
        elements: usize,
        #[arg(long, default_value_t = 16)]
        electrodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    phantom: PhantomId,
    /// Noise level as a fraction (0.001 = 0.1%).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// TOML overrides on top of the preset parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    mesh: MeshArgs,
}

#[derive(Debug, Args)]
struct MeshArgs {
    /// Simulation mesh file.
    #[arg(long, conflicts_with = "elements_fine")]
    mesh_fine: Option<PathBuf>,
    /// Inversion mesh file.
    #[arg(long, conflicts_with = "elements_coarse")]
    mesh_coarse: Option<PathBuf>,
    #[arg(long)]
    elements_fine: Option<usize>,
    #[arg(long)]
    elements_coarse: Option<usize>,
}

impl MeshArgs {
    fn apply(&self, spec: &mut MeshSpec) {
        let pick = |file: &Option<PathBuf>, n: Option<usize>, current: &MeshSource| match (file, n) {
            (Some(p), _) => MeshSource::File(p.clone()),
            (None, Some(n)) => MeshSource::Generate { elements: n },
            (None, None) => current.clone(),
        };
        spec.fine = pick(&self.mesh_fine, self.elements_fine, &spec.fine);
        spec.coarse = pick(&self.mesh_coarse, self.elements_coarse, &spec.coarse);
    }
}

impl ExperimentArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::preset(self.method, self.phantom, self.noise);
        if let Some(path) = &self.config {
            FileConfig::load(path)?.apply(&mut spec)?;
        }
        self.mesh.apply(&mut spec.mesh);
        spec.validate()?;
        Ok(spec)
    }
}

fn describe(r: &ExperimentReport) -> String {
    match (&r.re, &r.error) {
        (Some(re), _) => format!(
            "{} phantom {} eps {}: RE {re:.6} residual {:.4e} after {} iterations ({:?})",
            r.spec.method,
            r.spec.phantom,
            r.spec.noise.epsilon,
            r.residual.unwrap_or(f64::NAN),
            r.iterations,
            r.stop.expect("ok runs have a stop reason"),
        ),
        (None, e) => format!(
            "{} phantom {} eps {}: FAILED: {}",
            r.spec.method,
            r.spec.phantom,
            r.spec.noise.epsilon,
            e.as_deref().unwrap_or("unknown error")
        ),
    }
}

fn bench(spec: &MeshSpec, exec: Exec) -> Result<Workbench> {
    Workbench::new(spec, exec).context("building meshes and forward models")
}

/// Returns whether every run succeeded.
fn execute(cli: Cli) -> Result<bool> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Run { exp, out } => {
            let spec = exp.spec()?;
            let wb = bench(&spec.mesh, exec)?;
            let mut outcome = run_on(&wb, &spec)?;
            outcome.write(&out, &wb)?;
            println!("{}", describe(&outcome.report));
            Ok(outcome.report.is_ok())
        }
        Command::Sweep { exp, axis, values, out } => {
            let spec = exp.spec()?;
            let wb = bench(&spec.mesh, exec)?;
            let mut outcomes = sweep(&wb, &spec, axis, &values, exec)?;
            write_sweep(&out, &wb, axis, &values, &mut outcomes)?;
            for (v, o) in values.iter().zip(&outcomes) {
                println!("{axis} = {v}: {}", describe(&o.report));
            }
            println!("summary: {}", out.join("summary.csv").display());
            Ok(outcomes.iter().all(|o| o.report.is_ok()))
        }
        Command::Compare { methods, phantoms, noise, mesh, out } => {
            let mut spec = MeshSpec::default();
            mesh.apply(&mut spec);
            let wb = bench(&spec, exec)?;
            let mut cmp = compare(&wb, &methods, &phantoms, &noise, exec)?;
            for row in cmp.outcomes.iter_mut() {
                for o in row.iter_mut() {
                    let s = &o.report.spec;
                    let dir = out.join(format!("{}_{}_{}", s.method, s.phantom, s.noise.epsilon));
                    o.write(&dir, &wb)?;
                    println!("{}", describe(&o.report));
                }
            }
            std::fs::create_dir_all(&out)?;
            let table = out.join("table5.csv");
            cmp.write_table(&table)?;
            println!("table: {}", table.display());
            Ok(cmp.outcomes.iter().flatten().all(|o| o.report.is_ok()))
        }
        Command::Replay { report, out } => {
            let recorded = ExperimentReport::read(&report)?;
            let mut outcome = replay(&recorded, exec)?;
            if let Some(dir) = out {
                outcome.write(&dir, &bench(&recorded.spec.mesh, exec)?)?;
            }
            println!("{}", describe(&outcome.report));
            if !outcome.report.same_result(&recorded) {
                bail!("replay differs from {}: RE {:?} vs recorded {:?}", report.display(), outcome.report.re, recorded.re);
            }
            println!("replay matches {} bitwise", report.display());
            Ok(outcome.report.is_ok())
        }
        Command::Meshgen { elements, electrodes, out } => {
            let layout = ElectrodeLayout::uniform(electrodes, 0.05, 0.5)?;
            let mesh = generate_disk_mesh(elements, &layout)?;
            write_mesh(&mesh, &out)?;
            println!("{} elements, {} nodes -> {}", mesh.element_count(), mesh.node_count(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
