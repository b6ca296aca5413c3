//! Bundled demonstration scenarios.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Serialize;
use wanframe_core::ModelSpec;

use crate::config::{
    ChecksConfig, ConstructionConfig, ConstructionMode, GridConfig, OutputConfig, PipelineConfig, SelectionConfig,
    Tolerances,
};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    /// Expected topology verdict, or the expected failure.
    pub expected: &'static str,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "1d-cosine-band1",
        description: "1D Schrodinger operator with V(x) = 10 cos(2πx), lowest band, 64 k-points",
        expected: "trivial: one orthonormal exponentially decaying Wannier function",
    },
    Scenario {
        name: "haldane-topological-band1",
        description: "Haldane model (t2 = 0.15, flux = π/2, mass = 0), lower band, 48x48",
        expected: "obstructed (|C| = 1): tight frame of l = 2 functions",
    },
    Scenario {
        name: "haldane-trivial-band1",
        description: "Haldane model with mass 4 (trivial phase), lower band, 24x24",
        expected: "trivial: one orthonormal Wannier function",
    },
    Scenario {
        name: "hofstadter-q3-band1",
        description: "Harper-Hofstadter model at flux 1/3, lowest band, 96x96, 10 Parseval trials",
        expected: "obstructed (C = 1): tight frame",
    },
    Scenario {
        name: "haldane-control-band1",
        description: "Haldane topological band with the pointwise phase-fixed control gauge, 48x48",
        expected: "obstructed: slow, non-exponential decay (reported, not enforced)",
    },
    Scenario {
        name: "free-1d-band1",
        description: "free 1D Laplacian, lowest band (touches band 2 at the zone edge)",
        expected: "gap violation",
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

fn config(model: ModelSpec, sizes: &[usize], mode: ConstructionMode, name: &str) -> PipelineConfig {
    PipelineConfig {
        model,
        grid: GridConfig { sizes: sizes.to_vec() },
        selection: SelectionConfig { first: 1, last: None },
        construction: ConstructionConfig { mode, ..Default::default() },
        checks: ChecksConfig::default(),
        tolerances: Tolerances::default(),
        output: OutputConfig { dir: PathBuf::from("wanframe-out").join(name), sections: true },
    }
}

/// The pipeline config of a bundled scenario.
pub fn scenario_config(name: &str) -> Option<PipelineConfig> {
    let haldane_trivial = ModelSpec::Haldane { t1: 1.0, t2: 0.15, flux: PI / 2.0, mass: 4.0 };
    let cfg = match name {
        "1d-cosine-band1" => config(ModelSpec::cosine_1d(5.0, 8), &[64], ConstructionMode::Auto, name),
        "haldane-topological-band1" => config(ModelSpec::haldane_default(), &[48, 48], ConstructionMode::Auto, name),
        "haldane-trivial-band1" => config(haldane_trivial, &[24, 24], ConstructionMode::Auto, name),
        "hofstadter-q3-band1" => {
            // The q x 1 magnetic cell makes shell norms step in threes; the
            // exponential fit only settles once the window spans many steps.
            let mut c = config(ModelSpec::hofstadter(1, 3), &[96, 96], ConstructionMode::Auto, name);
            c.checks.trials = 10;
            c
        }
        "haldane-control-band1" => config(ModelSpec::haldane_default(), &[48, 48], ConstructionMode::Control, name),
        "free-1d-band1" => config(ModelSpec::free_1d(4), &[64], ConstructionMode::Auto, name),
        _ => return None,
    };
    Some(cfg)
}
