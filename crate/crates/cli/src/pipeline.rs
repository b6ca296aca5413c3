//! Model → bands → selection → projectors → topology → sections → Wannier
//! functions → verification.

use std::time::Instant;

use log::{info, warn};
use serde::Serialize;
use wanframe_core::gauge::{frame_diagnostics, seed_vectors};
use wanframe_core::spectral::riesz_projector_field;
use wanframe_core::{
    band_structure, build_model, canonical_tight_frame, decay_profile, discontinuous_control_gauge, gram_matrix,
    parallel_transport_gauge, parseval_check, projector_field, select_bands, synthesize_wannier,
    triviality_verdict, BandSelection, BandStructure, Contour, Error, FrameOperatorDiagnostics, FrameReport, KGrid,
    ModelSpec, ProjectorField, SectionFamily, SectionKind, Verdict,
};

use crate::config::{ConfigError, ConstructionMode, PipelineConfig, Tolerances};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Gap(Error),
    #[error("construction failed: {0}")]
    Construction(Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl PipelineError {
    /// Process exit code: 2 config or I/O, 3 gap violation, 4 construction.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Output(_) => 2,
            PipelineError::Gap(_) => 3,
            PipelineError::Construction(_) => 4,
        }
    }
}

/// One verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub passed: bool,
    /// Unenforced checks are reported but do not affect the exit code.
    pub enforced: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value: Some(value), threshold: Some(threshold), passed: value <= threshold, enforced: true }
    }

    fn flag(name: &str, passed: bool) -> Self {
        Check { name: name.into(), value: None, threshold: None, passed, enforced: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridInfo {
    pub sizes: Vec<usize>,
    pub points: usize,
    pub dimension: usize,
    pub fiber_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionInfo {
    pub first: usize,
    pub last: usize,
    pub rank: usize,
    /// Absent when the selection starts at band 1.
    pub gap_below: Option<f64>,
    /// Absent when the selection ends at the top band.
    pub gap_above: Option<f64>,
    pub interval: (f64, f64),
}

impl From<&BandSelection> for SelectionInfo {
    fn from(s: &BandSelection) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        SelectionInfo {
            first: s.range.first,
            last: s.range.last,
            rank: s.rank(),
            gap_below: finite(s.gap_below),
            gap_above: finite(s.gap_above),
            interval: s.interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectorInfo {
    pub hermiticity_defect: f64,
    pub idempotency_defect: f64,
    pub trace_defect: f64,
    /// `max_k ‖[L, P]‖ / max(1, max |λ|)`.
    pub relative_commutator: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<Contour>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riesz_difference: Option<f64>,
}

/// One attempt of the frame-size escalation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EscalationStep {
    pub l: usize,
    pub outcome: String,
    pub min_margin: f64,
    pub k_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstructionInfo {
    pub requested: String,
    pub kind: SectionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<String>,
    pub escalation: Vec<EscalationStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_diagnostics: Option<FrameOperatorDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionInfo {
    pub membership_residual: f64,
    pub pointwise_gram_defect: f64,
    pub frame_identity_residual: f64,
    pub max_bond_difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_bond_alignment: Option<f64>,
    pub plancherel_defect: f64,
    pub spectral_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram_projection_defect: Option<f64>,
}

/// Everything a run establishes, without timings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub model: ModelSpec,
    pub grid: GridInfo,
    pub selection: SelectionInfo,
    pub projector: ProjectorInfo,
    /// How the sections were built; `construction` itself is the kind.
    pub construction_details: ConstructionInfo,
    #[serde(flatten)]
    pub frame: FrameReport,
    pub sections: SectionInfo,
    pub rng_seed: u64,
    pub trials: usize,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.enforced && !c.passed)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

/// Result of a successful run: the report plus the data behind the CSV dumps.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    pub timings: Timings,
    pub bands: BandStructure,
    pub sections: SectionFamily,
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    timings: Timings,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Stopwatch { start: now, last: now, timings: Timings::default() }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        let seconds = (now - self.last).as_secs_f64();
        info!("{stage}: {seconds:.3} s");
        self.timings.stages.push(StageTiming { stage, seconds });
        self.last = now;
    }

    fn finish(mut self) -> Timings {
        self.timings.total_seconds = self.start.elapsed().as_secs_f64();
        self.timings
    }
}

fn construction_error(e: Error) -> PipelineError {
    match e {
        Error::InvalidSpec(m) => PipelineError::Config(ConfigError::invalid("model", m)),
        other => PipelineError::Construction(other),
    }
}

/// Runs the whole pipeline in memory.
pub fn run_pipeline(config: &PipelineConfig, scenario: Option<&str>) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    let mut clock = Stopwatch::new();
    let tol = config.tolerances;

    let family = build_model(&config.model).map_err(construction_error)?;
    config.validate_for(&family)?;
    let grid = KGrid::new(family.lattice().clone(), &config.grid.sizes).map_err(construction_error)?;
    let bands = band_structure(&family, &grid).map_err(PipelineError::Construction)?;
    clock.lap("bands");

    let range = config.selection.range()?;
    let selection = select_bands(&bands, range).map_err(|e| match e {
        Error::GapViolation { .. } => PipelineError::Gap(e),
        other => PipelineError::Construction(other),
    })?;
    let m = selection.rank();
    info!("selected bands {}..{} (gaps {:.4} / {:.4})", range.first, range.last, selection.gap_below, selection.gap_above);

    let proj = projector_field(&bands, &selection);
    let spectral_scale = (0..grid.len())
        .flat_map(|k| bands.eigenvalues(k).iter().map(|e| e.abs()))
        .fold(1.0, f64::max);
    let mut projector = ProjectorInfo {
        hermiticity_defect: proj.hermiticity_defect(),
        idempotency_defect: proj.idempotency_defect(),
        trace_defect: proj.trace_defect(),
        relative_commutator: proj.commutator_defect(&family) / spectral_scale,
        contour: None,
        riesz_difference: None,
    };
    if config.checks.riesz {
        let contour = Contour::default_for(&selection);
        let riesz = riesz_projector_field(&family, &grid, &selection, &contour, config.checks.quad_order)
            .map_err(PipelineError::Construction)?;
        projector.contour = Some(contour);
        projector.riesz_difference = Some(riesz.max_difference(&proj));
    }
    clock.lap("projectors");

    let topology = triviality_verdict(&proj);
    info!("topology: chern {:?}, verdict {:?}", topology.chern, topology.verdict);
    clock.lap("topology");

    let mode = match config.construction.mode {
        ConstructionMode::Auto => match topology.verdict {
            Verdict::Trivial => ConstructionMode::Orthonormal,
            Verdict::Obstructed | Verdict::Undetermined => ConstructionMode::TightFrame,
        },
        other => other,
    };
    let upper = topology.frame_bounds.1.min(family.fiber_dim());
    let mut escalation = Vec::new();
    let mut diagnostics = None;
    let mut seeds_label = None;
    let sections = match mode {
        ConstructionMode::Orthonormal => parallel_transport_gauge(&proj).map_err(construction_error)?,
        ConstructionMode::Control => discontinuous_control_gauge(&proj).map_err(construction_error)?,
        ConstructionMode::TightFrame => {
            let strategy = config.seed_strategy();
            seeds_label = Some(format!("{:?}", config.construction.seeds).to_lowercase());
            let candidates: Vec<usize> = match config.construction.l {
                Some(l) => vec![l],
                None => (topology.minimal_l_estimate.max(m)..=upper).collect(),
            };
            let mut built = None;
            let mut last_error = None;
            for &l in &candidates {
                let seeds = SectionFamily::constant(&grid, SectionKind::RawSeed, &seed_vectors(family.fiber_dim(), l, strategy));
                let diag = frame_diagnostics(&proj, &seeds);
                let attempt = if diag.spans() {
                    canonical_tight_frame(&proj, &seeds)
                } else {
                    Err(Error::SpanningFailure { min_sigma: diag.min_margin, k_index: diag.argmin })
                };
                let outcome = match &attempt {
                    Ok(_) => "ok",
                    Err(Error::SpanningFailure { .. }) => "spanning-failure",
                    Err(Error::IllConditioned { .. }) => "ill-conditioned",
                    Err(_) => "error",
                };
                escalation.push(EscalationStep { l, outcome: outcome.into(), min_margin: diag.min_margin, k_index: diag.argmin });
                match attempt {
                    Ok(frame) => {
                        diagnostics = Some(diag);
                        built = Some(frame);
                        break;
                    }
                    Err(e @ (Error::SpanningFailure { .. } | Error::IllConditioned { .. })) => {
                        warn!("l = {l}: {e}");
                        last_error = Some(e);
                    }
                    Err(e) => return Err(construction_error(e)),
                }
            }
            match built {
                Some(frame) => frame,
                None => {
                    return Err(PipelineError::Construction(last_error.unwrap_or_else(|| {
                        Error::InvalidArgument(format!("no admissible frame size in [{m}, {upper}]"))
                    })))
                }
            }
        }
        ConstructionMode::Auto => unreachable!("auto resolved above"),
    };
    let l = sections.count();
    clock.lap("sections");

    let wannier = synthesize_wannier(&sections, &grid).map_err(PipelineError::Construction)?;
    clock.lap("synthesis");
    let decay = decay_profile(&wannier).map_err(PipelineError::Construction)?;
    clock.lap("decay");
    let parseval = parseval_check(&wannier, &proj, config.checks.trials, config.checks.rng_seed)
        .map_err(PipelineError::Construction)?;
    clock.lap("parseval");
    let gram = gram_matrix(&wannier);
    let orthonormality = (sections.kind() != SectionKind::TightFrame || l == m).then(|| gram.max_orthonormality_defect());
    let gram_projection = (sections.kind() == SectionKind::TightFrame).then(|| {
        gram.spectrum().iter().map(|e| e.abs().min((e - 1.0).abs())).fold(0.0, f64::max)
    });
    clock.lap("gram");

    let section_info = SectionInfo {
        membership_residual: sections.membership_residual(&proj),
        pointwise_gram_defect: sections.gram_defect(),
        frame_identity_residual: sections.frame_identity_residual(&proj),
        max_bond_difference: sections.max_bond_difference(),
        min_bond_alignment: (l == 1).then(|| sections.min_bond_alignment()),
        plancherel_defect: wannier.plancherel_defect(&sections),
        spectral_residual: wannier.spectral_residual(&proj),
        gram_projection_defect: gram_projection,
    };

    let mut checks = vec![
        Check::at_most("projector-hermiticity", projector.hermiticity_defect, tol.projector),
        Check::at_most("projector-idempotency", projector.idempotency_defect, tol.projector),
        Check::at_most("projector-trace", projector.trace_defect, tol.projector),
        Check::at_most("projector-commutation", projector.relative_commutator, tol.projector),
    ];
    if let Some(d) = projector.riesz_difference {
        checks.push(Check::at_most("riesz-agreement", d, tol.riesz));
    }
    checks.push(Check::at_most("section-membership", section_info.membership_residual, tol.membership));
    let frame_identity = Check::at_most("frame-identity", section_info.frame_identity_residual, tol.frame_identity);
    let parseval_check = Check::at_most("parseval", parseval, tol.parseval);
    match sections.kind() {
        SectionKind::TightFrame => {
            checks.push(Check::flag(
                "l-within-bounds",
                topology.frame_bounds.0 <= l && l <= topology.frame_bounds.1,
            ));
            checks.push(Check::flag("parseval-agrees-with-frame-identity", parseval_check.passed == frame_identity.passed));
            checks.push(frame_identity);
            if let Some(g) = gram_projection {
                checks.push(Check::at_most("gram-projection", g, tol.gram_projection));
            }
        }
        _ => {
            checks.push(Check::at_most("section-orthonormality", section_info.pointwise_gram_defect, tol.orthonormality));
        }
    }
    if let Some(o) = orthonormality {
        checks.push(Check::at_most("wannier-gram", o, tol.orthonormality));
    }
    checks.push(Check::at_most("plancherel", section_info.plancherel_defect, tol.plancherel));
    checks.push(Check::at_most("spectral-membership", section_info.spectral_residual, tol.spectral_membership));
    checks.push(parseval_check);
    for (j, d) in decay.iter().enumerate() {
        checks.push(Check {
            name: format!("exponential-decay-{}", j + 1),
            value: d.r_squared,
            threshold: Some(tol.decay_r2),
            passed: d.decays_exponentially(tol.decay_r2),
            enforced: sections.kind() != SectionKind::DiscontinuousControl,
        });
    }
    let passed = checks.iter().all(|c| c.passed || !c.enforced);
    clock.lap("checks");

    let report = PipelineReport {
        scenario: scenario.map(str::to_string),
        model: config.model.clone(),
        grid: GridInfo { sizes: grid.sizes().to_vec(), points: grid.len(), dimension: grid.dim(), fiber_dim: family.fiber_dim() },
        selection: SelectionInfo::from(&selection),
        projector,
        construction_details: ConstructionInfo {
            requested: config.construction.mode.to_string(),
            kind: sections.kind(),
            seeds: seeds_label,
            escalation,
            frame_diagnostics: diagnostics,
        },
        frame: FrameReport {
            topology,
            achieved_l: l,
            parseval_residual: Some(parseval),
            orthonormality_residual: orthonormality,
            decay,
            construction: sections.kind(),
        },
        sections: section_info,
        rng_seed: config.checks.rng_seed,
        trials: config.checks.trials,
        tolerances: tol,
        checks,
        passed,
    };
    Ok(PipelineOutcome { report, timings: clock.finish(), bands, sections })
}

/// Projector field for external inspection of a config's selection.
pub fn projector_for(config: &PipelineConfig) -> Result<ProjectorField, PipelineError> {
    let family = build_model(&config.model).map_err(construction_error)?;
    config.validate_for(&family)?;
    let grid = KGrid::new(family.lattice().clone(), &config.grid.sizes).map_err(construction_error)?;
    let bands = band_structure(&family, &grid).map_err(PipelineError::Construction)?;
    let selection = select_bands(&bands, config.selection.range()?).map_err(PipelineError::Gap)?;
    Ok(projector_field(&bands, &selection))
}
