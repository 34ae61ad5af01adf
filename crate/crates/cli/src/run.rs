//! Stage orchestration and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use ellopt_core::homogenization::{epsilon_sweep, hlimit_matrix, Laminate, RationalDirection, SweepRow};
use ellopt_core::optimality::{classify_candidates_with, verify_pontryagin, OptimalityContext, PontryaginCheck, SingularityReport};
use ellopt_core::relaxation::{expansion_probe, soc_value, soc_value_control_free_coefficient, soc_value_singular, SocReport};
use ellopt_core::{ControlField, Instance, Mat, Mesh, SpdMatrix};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::CliError;
use crate::generate;
use crate::improve::{improve_control, ImproveOptions};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Solve,
    Improve,
    Classify,
    Expand,
    Soc,
    Homogenize,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Solve, Stage::Improve, Stage::Classify, Stage::Expand, Stage::Soc, Stage::Homogenize];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub ellopt: &'static str,
    pub ellopt_core: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub versions: Versions,
    pub problem: String,
    pub mesh: usize,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub cost: f64,
    pub ellipticity: [f64; 2],
    pub pontryagin: PontryaginCheck<f64>,
    pub tolerance: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SocKind {
    Singular,
    WeaklySingular,
    /// Neither; the integral is reported with `precondition_ok = false`.
    Nonsingular,
}

#[derive(Debug, Clone, Serialize)]
pub struct SocArtifact {
    pub candidate: String,
    pub kind: SocKind,
    pub report: SocReport<f64>,
    /// Two-term value for problems whose coefficient ignores the control.
    pub control_free_value: Option<f64>,
    pub first_order_coefficient: f64,
    pub expansion_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizationArtifact {
    pub hlimit: Mat<f64>,
    pub rows: Vec<SweepRow<f64>>,
    pub mesh: usize,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub violation: Option<f64>,
}

impl RunOutcome {
    /// Maps the outcome to the process result: solver failures first, then
    /// optimality violations.
    pub fn into_result(self, tolerance: f64) -> Result<Manifest, CliError> {
        if let Some(s) = self.manifest.stages.iter().find(|s| s.status == Status::Failed) {
            return Err(CliError::StageFailed {
                stage: format!("{:?}", s.stage).to_lowercase(),
                message: s.message.clone().unwrap_or_default(),
            });
        }
        match self.violation {
            Some(v) if v > tolerance => Err(CliError::Violation { violation: v, tolerance }),
            _ => Ok(self.manifest),
        }
    }
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn record(&mut self, file: &str) -> Result<(), CliError> {
        let bytes = fs::read(self.path(file)).map_err(CliError::io(file.to_owned()))?;
        self.artifacts.push(Artifact { file: file.to_owned(), sha256: hex(&Sha256::digest(&bytes)) });
        Ok(())
    }

    fn json<V: Serialize>(&mut self, file: &str, v: &V) -> Result<(), CliError> {
        output::json(&self.path(file), v)?;
        self.record(file)
    }

    fn take(&mut self) -> Vec<Artifact> {
        std::mem::take(&mut self.artifacts)
    }
}

struct Setup {
    inst: Instance<f64>,
    ctx: OptimalityContext<f64>,
    candidates: Vec<(String, ControlField)>,
    improved: bool,
}

fn setup(cfg: &RunConfig, improve: bool, w: &mut Writer) -> Result<Setup, CliError> {
    let inst = cfg.problem.build::<f64>(cfg.mesh)?;
    let mut reference = inst.reference.clone();
    let improve_cfg = cfg.improve.clone().or(improve.then(|| crate::config::ImproveConfig { max_rounds: 100 }));
    if let Some(ic) = &improve_cfg {
        let opts = ImproveOptions { max_rounds: ic.max_rounds, tie: cfg.tolerances.improve_tie, ..Default::default() };
        let rep = improve_control(&inst.problem, reference, &opts)?;
        for msg in &rep.warnings {
            log::warn!("{msg}");
        }
        reference = rep.control.clone();
        w.json("improve.json", &rep)?;
        control_csv(&w.path("control.csv"), &reference)?;
        w.record("control.csv")?;
    }
    let ctx = OptimalityContext::new(&inst.problem, reference)?;
    let candidates = cfg
        .candidates
        .iter()
        .enumerate()
        .map(|(k, spec)| Ok((spec.name().to_owned(), generate::candidate(&inst, &ctx.ubar, spec, cfg.seed, k)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Setup { inst, ctx, candidates, improved: improve_cfg.is_some() })
}

#[derive(Serialize)]
struct ControlRow {
    element: usize,
    label: usize,
}

fn control_csv(path: &Path, u: &ControlField) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Output(e.to_string()))?;
    for (element, &label) in u.labels().iter().enumerate() {
        w.serialize(ControlRow { element, label }).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(CliError::io(path.display().to_string()))
}

fn solve_stage(cfg: &RunConfig, s: &Setup, w: &mut Writer) -> Result<f64, CliError> {
    let p = &s.inst.problem;
    let mesh = p.mesh();
    output::nodal_csv(&w.path("state.csv"), mesh, &s.ctx.ybar)?;
    w.record("state.csv")?;
    output::nodal_csv(&w.path("adjoint.csv"), mesh, &s.ctx.psibar)?;
    w.record("adjoint.csv")?;
    let centroid = |f: &[f64]| (0..mesh.num_elements()).map(|e| mesh.centroid_value(e, f)).collect::<Vec<_>>();
    output::heatmap_svg(&w.path("state.svg"), mesh, &centroid(&s.ctx.ybar), "state")?;
    w.record("state.svg")?;
    output::heatmap_svg(&w.path("adjoint.svg"), mesh, &centroid(&s.ctx.psibar), "adjoint")?;
    w.record("adjoint.svg")?;
    let grad: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.gradient(e, &s.ctx.ybar).norm()).collect();
    output::heatmap_svg(&w.path("state_gradient.svg"), mesh, &grad, "|grad state|")?;
    w.record("state_gradient.svg")?;
    let check = verify_pontryagin(p, &s.ctx)?;
    let (lo, hi) = p.ellipticity();
    w.json(
        "solution.json",
        &SolutionSummary {
            cost: s.ctx.cost,
            ellipticity: [lo, hi],
            pontryagin: check,
            tolerance: cfg.tolerances.pontryagin,
            improved: s.improved,
        },
    )?;
    Ok(check.max_violation)
}

fn classify_stage(cfg: &RunConfig, s: &Setup, w: &mut Writer) -> Result<SingularityReport<f64>, CliError> {
    let report = classify_candidates_with(&s.inst.problem, &s.ctx, &s.candidates, cfg.tolerances.sing)?;
    w.json("singularity_report.json", &report)?;
    Ok(report)
}

fn expand_and_soc(
    cfg: &RunConfig,
    s: &Setup,
    report: &SingularityReport<f64>,
    expand: bool,
    soc: bool,
    w: &mut Writer,
) -> Result<(), CliError> {
    let p = &s.inst.problem;
    for (k, ((name, u), cand)) in s.candidates.iter().zip(&report.candidates).enumerate() {
        if cand.trivial {
            log::info!("candidate '{name}' equals the reference control; nothing to expand");
            continue;
        }
        let ell = generate::directions(&s.inst, &s.ctx, u, &cfg.directions, cfg.seed, k)?;
        let table = expansion_probe(p, &s.ctx, u, &ell, &cfg.alphas)?;
        if expand {
            let file = format!("expansion_{name}.csv");
            output::expansion_csv(&w.path(&file), &table)?;
            w.record(&file)?;
        }
        if soc {
            let (kind, report) = if cand.all_singular {
                (SocKind::Singular, soc_value_singular(p, &s.ctx, u)?.0)
            } else {
                let kind = if cand.all_weakly_singular { SocKind::WeaklySingular } else { SocKind::Nonsingular };
                (kind, soc_value(p, &s.ctx, u, &ell)?.0)
            };
            let control_free_value = match soc_value_control_free_coefficient(p, &s.ctx, u) {
                Ok((v, _)) => Some(v),
                Err(ellopt_core::Error::InvalidArgument(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let file = format!("soc_{name}.json");
            w.json(
                &file,
                &SocArtifact {
                    candidate: name.clone(),
                    kind,
                    report,
                    control_free_value,
                    first_order_coefficient: table.j1,
                    expansion_limit: table.second_order_limit,
                },
            )?;
        }
    }
    Ok(())
}

fn spd(rows: &[[f64; 2]; 2]) -> Result<SpdMatrix<f64>, CliError> {
    let m = Mat::from_rows(&[&rows[0], &rows[1]]).map_err(ellopt_core::Error::from)?;
    Ok(SpdMatrix::new(m).map_err(ellopt_core::Error::from)?)
}

fn homogenize_stage(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let Some(h) = &cfg.homogenization else {
        return Ok(());
    };
    let m = h.mesh.unwrap_or(cfg.mesh);
    let mesh = Mesh::<f64>::new(m)?;
    let dir = RationalDirection::new(&[(h.direction[0][0], h.direction[0][1]), (h.direction[1][0], h.direction[1][1])])?;
    let lam = Laminate::uniform(spd(&h.b)?, spd(&h.c)?, h.alpha, dir, mesh.num_elements())?;
    let g = vec![h.source; mesh.num_elements()];
    let rows = epsilon_sweep(&lam, &mesh, &g, &h.eps)?;
    output::sweep_csv(&w.path("sweep.csv"), &rows)?;
    w.record("sweep.csv")?;
    let hlimit = hlimit_matrix(&lam.b, &lam.c, lam.alpha, &lam.regions()[0].1.to_vector())?.into_mat();
    w.json("homogenization.json", &HomogenizationArtifact { hlimit, rows, mesh: m })
}

/// Runs the requested stages, writing artifacts and `manifest.json` into
/// `out`. A failed stage is recorded and stages that do not depend on it
/// still run.
pub fn run(cfg: &RunConfig, out: &Path, stages: &[Stage]) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(out).map_err(CliError::io(out.display().to_string()))?;
    let mut w = Writer { dir: out.to_owned(), artifacts: Vec::new() };
    let wants = |s: Stage| stages.contains(&s);
    let mut records = Vec::new();
    let mut violation = None;
    let push = |records: &mut Vec<StageRecord>, stage, res: Result<(), CliError>, w: &mut Writer| {
        let (status, message) = match res {
            Ok(()) => (Status::Ok, None),
            Err(e) => {
                log::error!("stage {stage:?} failed: {e}");
                (Status::Failed, Some(e.to_string()))
            }
        };
        records.push(StageRecord { stage, status, message, artifacts: w.take() });
    };
    let skip = |records: &mut Vec<StageRecord>, stage, why: &str| {
        records.push(StageRecord { stage, status: Status::Skipped, message: Some(why.to_owned()), artifacts: Vec::new() });
    };

    let problem_stages = [Stage::Solve, Stage::Improve, Stage::Classify, Stage::Expand, Stage::Soc];
    if problem_stages.iter().any(|&s| wants(s)) {
        let setup = setup(cfg, wants(Stage::Improve), &mut w);
        let setup = match setup {
            Ok(s) => {
                if wants(Stage::Improve) || s.improved {
                    push(&mut records, Stage::Improve, Ok(()), &mut w);
                }
                Some(s)
            }
            Err(e) => {
                push(&mut records, Stage::Improve, Err(e), &mut w);
                None
            }
        };
        match &setup {
            None => {
                for s in problem_stages.into_iter().filter(|&s| s != Stage::Improve && wants(s)) {
                    skip(&mut records, s, "problem setup failed");
                }
            }
            Some(s) => {
                if wants(Stage::Solve) {
                    let res = solve_stage(cfg, s, &mut w).map(|v| violation = Some(v));
                    push(&mut records, Stage::Solve, res, &mut w);
                }
                let need_report = wants(Stage::Classify) || wants(Stage::Expand) || wants(Stage::Soc);
                if need_report && s.candidates.is_empty() {
                    for st in [Stage::Classify, Stage::Expand, Stage::Soc].into_iter().filter(|&st| wants(st)) {
                        skip(&mut records, st, "no candidates configured");
                    }
                } else if need_report {
                    match classify_stage(cfg, s, &mut w) {
                        Ok(report) => {
                            if wants(Stage::Classify) {
                                push(&mut records, Stage::Classify, Ok(()), &mut w);
                            } else {
                                w.take();
                            }
                            if wants(Stage::Expand) || wants(Stage::Soc) {
                                let res = expand_and_soc(cfg, s, &report, wants(Stage::Expand), wants(Stage::Soc), &mut w);
                                let stage = if wants(Stage::Soc) { Stage::Soc } else { Stage::Expand };
                                if wants(Stage::Expand) && wants(Stage::Soc) {
                                    // Both share one pass; attribute artifacts by name.
                                    let (exp, soc): (Vec<_>, Vec<_>) = w.take().into_iter().partition(|a| a.file.starts_with("expansion_"));
                                    let failed = res.as_ref().err().map(|e| e.to_string());
                                    for (st, arts) in [(Stage::Expand, exp), (Stage::Soc, soc)] {
                                        records.push(StageRecord {
                                            stage: st,
                                            status: if failed.is_some() { Status::Failed } else { Status::Ok },
                                            message: failed.clone(),
                                            artifacts: arts,
                                        });
                                    }
                                } else {
                                    push(&mut records, stage, res, &mut w);
                                }
                            }
                        }
                        Err(e) => {
                            let msg = e.to_string();
                            push(&mut records, Stage::Classify, Err(e), &mut w);
                            for st in [Stage::Expand, Stage::Soc].into_iter().filter(|&st| wants(st)) {
                                skip(&mut records, st, &format!("classification failed: {msg}"));
                            }
                        }
                    }
                }
            }
        }
    }
    if wants(Stage::Homogenize) {
        if cfg.homogenization.is_some() {
            let res = homogenize_stage(cfg, &mut w);
            push(&mut records, Stage::Homogenize, res, &mut w);
        } else {
            skip(&mut records, Stage::Homogenize, "no homogenization section in the config");
        }
    }

    let manifest = Manifest {
        config_sha256: cfg.hash(),
        versions: Versions { ellopt: env!("CARGO_PKG_VERSION"), ellopt_core: ellopt_core::VERSION },
        problem: cfg.problem.name().to_owned(),
        mesh: cfg.mesh,
        seed: cfg.seed,
        stages: records,
    };
    output::json(&out.join("manifest.json"), &manifest)?;
    Ok(RunOutcome { manifest, violation })
}
