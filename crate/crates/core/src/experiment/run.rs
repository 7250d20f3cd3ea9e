use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::data::{default_seed, synthesize_data, NoiseSpec};
use super::phantom::{Phantom, PhantomId, BACKGROUND_RESISTIVITY};
use super::presets;
use super::{MeshSpec, Workbench};
use crate::baselines::{run_l1, run_l2, run_tv, TvConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::forward::ForwardModel;
use crate::inversion::{
    run_algorithm1, run_algorithm2, squared_relative_error, InversionConfig, InversionProblem, IterationRecord,
    SparsityDomain, SplitBregmanState, StopReason,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Alg1,
    Alg2,
    L1,
    L2,
    Tv,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Alg1, Method::Alg2, Method::Tv, Method::L1, Method::L2];

    pub fn name(self) -> &'static str {
        match self {
            Self::Alg1 => "alg1",
            Self::Alg2 => "alg2",
            Self::L1 => "l1",
            Self::L2 => "l2",
            Self::Tv => "tv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Experiment(format!("unknown method {s:?} (expected alg1, alg2, l1, l2 or tv)")))
    }
}

/// Everything needed to reproduce one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub method: Method,
    pub phantom: PhantomId,
    pub noise: NoiseSpec,
    /// `noise_norm` is overwritten with the stop threshold before the run.
    pub config: InversionConfig,
    /// TV smoothing; `None` picks it from the reference conductivity.
    #[serde(default)]
    pub tv_gamma: Option<f64>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub noise_free_stop: NoiseFreeStop,
}

/// Stopping threshold for runs on noise-free data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFreeStop {
    /// `‖U - F_coarse(σ*)‖` with `σ*` the truth averaged onto the inversion
    /// mesh, i.e. the discretization error the coarse model cannot fit.
    #[default]
    ModelError,
    /// `residual_floor · ‖U‖`.
    Floor,
}

impl ExperimentSpec {
    /// Parameter tables for the phantom studies: noise-free runs use the
    /// per-phantom schedule, noisy runs the per-algorithm one.
    pub fn preset(method: Method, phantom: PhantomId, epsilon: f64) -> Self {
        let config = if epsilon == 0.0 { presets::noise_free(phantom) } else { presets::noisy(method, epsilon) };
        Self {
            method,
            phantom,
            noise: NoiseSpec::for_phantom(phantom, epsilon),
            config,
            tv_gamma: None,
            mesh: MeshSpec::default(),
            noise_free_stop: NoiseFreeStop::default(),
        }
    }

    /// The β a method actually runs with.
    pub fn effective_beta(&self) -> f64 {
        match self.method {
            Method::L1 => 0.0,
            Method::L2 => 1.0,
            _ => self.config.beta,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        if self.noise.seed == default_seed(self.phantom, self.noise.epsilon) {
            self.noise.seed = default_seed(self.phantom, epsilon);
        }
        self.noise.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.config.validate()?;
        if let Some(g) = self.tv_gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("tv_gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub status: RunStatus,
    #[serde(default)]
    pub error: Option<String>,
    /// Final relative error; `None` when the run failed.
    #[serde(rename = "RE")]
    pub re: Option<f64>,
    pub residual: Option<f64>,
    pub noise_norm: f64,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub wall_time_s: f64,
    #[serde(default)]
    pub history_path: Option<PathBuf>,
    #[serde(default)]
    pub image_path: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Equality of everything except wall time and output paths.
    pub fn same_result(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self { wall_time_s: 0.0, history_path: None, image_path: None, ..r.clone() };
        let (a, b) = (strip(self), strip(other));
        a.spec == b.spec
            && a.status == b.status
            && a.error == b.error
            && a.re.map(f64::to_bits) == b.re.map(f64::to_bits)
            && a.residual.map(f64::to_bits) == b.residual.map(f64::to_bits)
            && a.noise_norm.to_bits() == b.noise_norm.to_bits()
            && a.iterations == b.iterations
            && a.stop == b.stop
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Experiment(format!("{}: {e}", path.display())))
    }
}

/// A finished run with the arrays behind its report.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub history: Vec<IterationRecord>,
    /// Reconstruction on the inversion mesh (empty on failure).
    pub sigma: Vec<f64>,
    /// Area-averaged truth on the inversion mesh.
    pub truth: Vec<f64>,
}

/// Builds the meshes and runs one experiment.
pub fn run_experiment(spec: &ExperimentSpec, exec: Exec) -> Result<ExperimentOutcome> {
    let bench = Workbench::new(&spec.mesh, exec)?;
    run_on(&bench, spec)
}

/// Runs one experiment on prepared meshes. Solver failures end up in the
/// report; only setup errors are returned as `Err`.
pub fn run_on(bench: &Workbench, spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    if bench.spec != spec.mesh {
        return Err(Error::Experiment("experiment mesh spec does not match the prepared workbench".into()));
    }
    spec.validate()?;
    let start = Instant::now();
    let phantom = Phantom::reference(spec.phantom);
    let (fine, coarse) = bench.truth(&phantom)?;
    let data = synthesize_data(&bench.fine, &fine, &spec.noise)?;
    let mut spec = spec.clone();
    spec.config.noise_norm = match spec.noise_free_stop {
        NoiseFreeStop::ModelError if spec.noise.epsilon == 0.0 => {
            (&data.noisy.voltages - bench.coarse.predict(coarse.values())?).norm()
        }
        _ => data.noise_norm,
    };
    let sigma_ref = vec![1.0 / BACKGROUND_RESISTIVITY; bench.coarse.parameter_count()];
    let problem = InversionProblem {
        model: &bench.coarse,
        data: &data.noisy.voltages,
        difference: &bench.difference,
        sigma_ref: &sigma_ref,
        truth: Some(coarse.values()),
    };
    let config = &spec.config;
    let result: Result<SplitBregmanState> = match spec.method {
        Method::Alg1 => run_algorithm1(&problem, config, &bench.phi),
        Method::Alg2 => run_algorithm2(&problem, config, &sigma_ref),
        Method::L1 => run_l1(&problem, config, &SparsityDomain::Transform(bench.phi)),
        Method::L2 => run_l2(&problem, config, &bench.phi),
        Method::Tv => run_tv(&problem, &TvConfig { gamma: spec.tv_gamma, ..TvConfig::matching(config) }),
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let truth = coarse.into_values();
    let outcome = match result {
        Ok(state) => ExperimentOutcome {
            report: ExperimentReport {
                re: Some(squared_relative_error(&state.sigma, &truth)),
                residual: Some(state.final_residual()),
                iterations: state.k,
                stop: Some(state.stop),
                status: RunStatus::Ok,
                error: None,
                noise_norm: data.noise_norm,
                wall_time_s,
                history_path: None,
                image_path: None,
                spec,
            },
            history: state.history,
            sigma: state.sigma,
            truth,
        },
        Err(e) => {
            let history = match &e {
                Error::NonFinite { history, .. } => history.clone(),
                _ => Vec::new(),
            };
            ExperimentOutcome {
                report: ExperimentReport {
                    re: None,
                    residual: None,
                    iterations: history.len(),
                    stop: None,
                    status: RunStatus::Failed,
                    error: Some(e.to_string()),
                    noise_norm: data.noise_norm,
                    wall_time_s,
                    history_path: None,
                    image_path: None,
                    spec,
                },
                history,
                sigma: Vec::new(),
                truth,
            }
        }
    };
    Ok(outcome)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Experiment(format!("csv: {e}"))
}

/// `k, alpha_k, inner_iters, residual, RE`
pub fn write_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in history {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

#[derive(Debug, Clone, Serialize)]
struct ImageRow {
    element: usize,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    x3: f64,
    y3: f64,
    sigma: f64,
    sigma_true: f64,
    resistivity: f64,
    resistivity_true: f64,
}

/// Element values with their triangle vertices, for external plotting.
pub fn write_image(path: &Path, bench: &Workbench, sigma: &[f64], truth: &[f64]) -> Result<()> {
    let mesh = bench.coarse.mesh();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for (e, tri) in mesh.elements().iter().enumerate() {
        let [p1, p2, p3] = tri.map(|n| mesh.nodes()[n]);
        let s = sigma.get(e).copied().unwrap_or(f64::NAN);
        w.serialize(ImageRow {
            element: e + 1,
            x1: p1[0],
            y1: p1[1],
            x2: p2[0],
            y2: p2[1],
            x3: p3[0],
            y3: p3[1],
            sigma: s,
            sigma_true: truth[e],
            resistivity: 1.0 / s,
            resistivity_true: 1.0 / truth[e],
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentOutcome {
    /// Writes `history.csv`, `image.csv` and `report.json` into `dir`.
    pub fn write(&mut self, dir: &Path, bench: &Workbench) -> Result<()> {
        fs::create_dir_all(dir)?;
        let history = dir.join("history.csv");
        write_history(&history, &self.history)?;
        self.report.history_path = Some(history);
        if !self.sigma.is_empty() {
            let image = dir.join("image.csv");
            write_image(&image, bench, &self.sigma, &self.truth)?;
            self.report.image_path = Some(image);
        }
        let json = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Experiment(e.to_string()))?;
        fs::write(dir.join("report.json"), json + "\n")?;
        Ok(())
    }
}

/// Reruns the experiment recorded in a report.
pub fn replay(report: &ExperimentReport, exec: Exec) -> Result<ExperimentOutcome> {
    let mut spec = report.spec.clone();
    spec.config.noise_norm = 0.0;
    run_experiment(&spec, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Beta,
    Mu,
    Epsilon,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta" => Ok(Self::Beta),
            "mu" => Ok(Self::Mu),
            "epsilon" | "eps" | "noise" => Ok(Self::Epsilon),
            other => Err(Error::Experiment(format!("unknown sweep axis {other:?} (expected beta, mu or epsilon)"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Beta => "beta",
            Self::Mu => "mu",
            Self::Epsilon => "epsilon",
        })
    }
}

impl SweepAxis {
    pub fn apply(self, base: &ExperimentSpec, value: f64) -> ExperimentSpec {
        let mut spec = base.clone();
        match self {
            Self::Beta => spec.config.beta = value,
            Self::Mu => spec.config.mu = value,
            Self::Epsilon => spec = spec.with_epsilon(value),
        }
        spec
    }
}

/// One run per value on shared meshes; points run concurrently under
/// `exec` and failures are recorded per point.
pub fn sweep(bench: &Workbench, base: &ExperimentSpec, axis: SweepAxis, values: &[f64], exec: Exec) -> Result<Vec<ExperimentOutcome>> {
    if values.is_empty() {
        return Err(Error::Experiment("sweep needs at least one value".into()));
    }
    let specs: Vec<ExperimentSpec> = values.iter().map(|&v| axis.apply(base, v)).collect();
    exec.try_map(specs.len(), |i| run_on(bench, &specs[i]))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow<'a> {
    value: f64,
    method: Method,
    phantom: PhantomId,
    epsilon: f64,
    status: RunStatus,
    #[serde(rename = "RE")]
    re: Option<f64>,
    residual: Option<f64>,
    iterations: usize,
    error: &'a str,
}

/// Writes every point under `dir/point_NN` plus a `summary.csv`.
pub fn write_sweep(dir: &Path, bench: &Workbench, axis: SweepAxis, values: &[f64], outcomes: &mut [ExperimentOutcome]) -> Result<()> {
    fs::create_dir_all(dir)?;
    // header written by hand: the first column is named after the axis
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join("summary.csv")).map_err(csv_error)?;
    w.write_record([axis.to_string().as_str(), "method", "phantom", "epsilon", "status", "RE", "residual", "iterations", "error"])
        .map_err(csv_error)?;
    for (i, (value, outcome)) in values.iter().zip(outcomes.iter_mut()).enumerate() {
        outcome.write(&dir.join(format!("point_{i:02}")), bench)?;
        let r = &outcome.report;
        w.serialize(SweepRow {
            value: *value,
            method: r.spec.method,
            phantom: r.spec.phantom,
            epsilon: r.spec.noise.epsilon,
            status: r.status,
            re: r.re,
            residual: r.residual,
            iterations: r.iterations,
            error: r.error.as_deref().unwrap_or(""),
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// RE of every method on every (phantom, ε) cell, each with its preset.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub methods: Vec<Method>,
    pub columns: Vec<(PhantomId, f64)>,
    /// `outcomes[m][c]`
    pub outcomes: Vec<Vec<ExperimentOutcome>>,
}

impl Comparison {
    pub fn re(&self, method: Method, phantom: PhantomId, epsilon: f64) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        let c = self.columns.iter().position(|&(p, e)| p == phantom && e == epsilon)?;
        self.outcomes[m][c].report.re
    }

    /// Rows per method, one column per (phantom, ε).
    pub fn write_table(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        let mut header = vec!["method".to_string()];
        header.extend(self.columns.iter().map(|(p, e)| format!("{p}_{}%", e * 100.0)));
        w.write_record(&header).map_err(csv_error)?;
        for (m, row) in self.methods.iter().zip(&self.outcomes) {
            let mut rec = vec![m.to_string()];
            rec.extend(row.iter().map(|o| o.report.re.map_or_else(|| "failed".to_string(), |re| format!("{re:.6}"))));
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compare(bench: &Workbench, methods: &[Method], phantoms: &[PhantomId], epsilons: &[f64], exec: Exec) -> Result<Comparison> {
    let columns: Vec<(PhantomId, f64)> = phantoms.iter().flat_map(|&p| epsilons.iter().map(move |&e| (p, e))).collect();
    let specs: Vec<ExperimentSpec> = methods
        .iter()
        .flat_map(|&m| columns.iter().map(move |&(p, e)| ExperimentSpec { mesh: bench.spec.clone(), ..ExperimentSpec::preset(m, p, e) }))
        .collect();
    let mut flat = exec.try_map(specs.len(), |i| run_on(bench, &specs[i]))?.into_iter();
    let outcomes = methods.iter().map(|_| flat.by_ref().take(columns.len()).collect()).collect();
    Ok(Comparison { methods: methods.to_vec(), columns, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("alg3".parse::<Method>().is_err());
        assert_eq!("TV".parse::<Method>().unwrap(), Method::Tv);
    }

    #[test]
    fn sweep_axis_changes_one_field() {
        let base = ExperimentSpec::preset(Method::Alg1, PhantomId::B, 0.001);
        let b = SweepAxis::Beta.apply(&base, 0.7);
        assert_eq!(b.config.beta, 0.7);
        assert_eq!(ExperimentSpec { config: base.config.clone(), ..b.clone() }, base);
        let e = SweepAxis::Epsilon.apply(&base, 0.003);
        assert_eq!(e.noise.epsilon, 0.003);
        assert_eq!(e.noise.seed, default_seed(PhantomId::B, 0.003));
        let mut custom = base.clone();
        custom.noise.seed = 5;
        assert_eq!(SweepAxis::Epsilon.apply(&custom, 0.003).noise.seed, 5);
        assert_eq!(SweepAxis::Mu.apply(&base, 3e-7).config.mu, 3e-7);
        assert!("gamma".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn effective_beta_per_method() {
        let spec = |m| ExperimentSpec::preset(m, PhantomId::A, 0.0);
        assert_eq!(spec(Method::L1).effective_beta(), 0.0);
        assert_eq!(spec(Method::L2).effective_beta(), 1.0);
        assert_eq!(spec(Method::Alg1).effective_beta(), spec(Method::Alg1).config.beta);
    }

    #[test]
    fn spec_json_round_trip_is_exact() {
        let mut spec = ExperimentSpec::preset(Method::Tv, PhantomId::C, 0.003);
        spec.config.alpha0 = 0.1 + 0.2;
        spec.tv_gamma = Some(1.0 / 3.0);
        let back: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"method":"alg1"}"#).is_err());
    }
}
