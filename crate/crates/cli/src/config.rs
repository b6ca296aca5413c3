//! Pipeline configuration: a TOML document with `[model]`, `[grid]`,
//! `[selection]`, `[construction]`, `[checks]`, `[tolerances]` and `[output]`
//! sections. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wanframe_core::{BandRange, BlochOperatorFamily, ModelSpec, SeedStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSpec,
    pub grid: GridConfig,
    pub selection: SelectionConfig,
    #[serde(default)]
    pub construction: ConstructionConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub sizes: Vec<usize>,
}

/// 1-based band range; `last` defaults to `first`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub first: usize,
    #[serde(default)]
    pub last: Option<usize>,
}

impl SelectionConfig {
    pub fn range(&self) -> Result<BandRange, ConfigError> {
        let last = self.last.unwrap_or(self.first);
        BandRange::new(self.first, last).map_err(|_| {
            ConfigError::invalid("selection", format!("need 1 <= first <= last, got first = {}, last = {last}", self.first))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionMode {
    /// Orthonormal basis when the verdict is trivial, tight frame otherwise.
    #[default]
    Auto,
    Orthonormal,
    #[serde(alias = "tightFrame")]
    TightFrame,
    Control,
}

impl FromStr for ConstructionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "orthonormal" => Ok(Self::Orthonormal),
            "tight-frame" | "tightFrame" => Ok(Self::TightFrame),
            "control" => Ok(Self::Control),
            other => Err(format!("unknown construction `{other}` (auto, orthonormal, tight-frame, control)")),
        }
    }
}

impl fmt::Display for ConstructionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Orthonormal => "orthonormal",
            Self::TightFrame => "tight-frame",
            Self::Control => "control",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    #[default]
    Canonical,
    /// Random orthonormal seeds drawn from `checks.rng-seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConstructionConfig {
    #[serde(default)]
    pub mode: ConstructionMode,
    /// Fixed frame size; disables escalation.
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub seeds: SeedKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChecksConfig {
    /// Random fields for the Parseval check.
    pub trials: usize,
    pub rng_seed: u64,
    /// Cross-check the eigenvector projector with contour quadrature.
    pub riesz: bool,
    pub quad_order: usize,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { trials: 50, rng_seed: 7, riesz: true, quad_order: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Tolerances {
    pub projector: f64,
    pub riesz: f64,
    pub membership: f64,
    pub orthonormality: f64,
    pub frame_identity: f64,
    pub gram_projection: f64,
    pub plancherel: f64,
    pub spectral_membership: f64,
    pub parseval: f64,
    pub decay_r2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            projector: 1e-9,
            riesz: 1e-7,
            membership: 1e-10,
            orthonormality: 1e-10,
            frame_identity: 1e-10,
            gram_projection: 1e-8,
            plancherel: 1e-12,
            spectral_membership: 1e-9,
            parseval: 1e-8,
            decay_r2: 0.99,
        }
    }
}

impl Tolerances {
    fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("projector", self.projector),
            ("riesz", self.riesz),
            ("membership", self.membership),
            ("orthonormality", self.orthonormality),
            ("frame-identity", self.frame_identity),
            ("gram-projection", self.gram_projection),
            ("plancherel", self.plancherel),
            ("spectral-membership", self.spectral_membership),
            ("parseval", self.parseval),
            ("decay-r2", self.decay_r2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `sections_<j>.csv`.
    pub sections: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("wanframe-out"), sections: true }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.to_string(), message: message.into() }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let mut message = e.to_string();
            if let Some(line) = unknown_key_line(text, &e) {
                message = format!("line {line}: {message}");
            }
            ConfigError::Parse { path: origin.to_string(), message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Checks that do not need the model.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.sizes.is_empty() || self.grid.sizes.contains(&0) {
            return Err(ConfigError::invalid("grid.sizes", "sizes must be positive"));
        }
        self.selection.range()?;
        if self.checks.trials == 0 {
            return Err(ConfigError::invalid("checks.trials", "need at least one trial"));
        }
        if self.checks.quad_order < 8 {
            return Err(ConfigError::invalid("checks.quad-order", "quadrature order must be at least 8"));
        }
        for (name, value) in self.tolerances.fields() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::invalid(&format!("tolerances.{name}"), format!("must be positive, got {value}")));
            }
        }
        if let Some(l) = self.construction.l {
            if self.construction.mode != ConstructionMode::TightFrame && self.construction.mode != ConstructionMode::Auto {
                return Err(ConfigError::invalid("construction.l", "only meaningful for auto or tight-frame"));
            }
            if l == 0 {
                return Err(ConfigError::invalid("construction.l", "must be positive"));
            }
        }
        Ok(())
    }

    /// Checks against the built model.
    pub fn validate_for(&self, family: &BlochOperatorFamily) -> Result<(), ConfigError> {
        if self.grid.sizes.len() != family.dim() {
            return Err(ConfigError::invalid(
                "grid.sizes",
                format!("model is {}-dimensional, got {} sizes", family.dim(), self.grid.sizes.len()),
            ));
        }
        let range = self.selection.range()?;
        if range.last > family.fiber_dim() {
            return Err(ConfigError::invalid(
                "selection.last",
                format!("model has {} bands, selection ends at {}", family.fiber_dim(), range.last),
            ));
        }
        if let Some(l) = self.construction.l {
            if l < range.count() || l > family.fiber_dim() {
                return Err(ConfigError::invalid(
                    "construction.l",
                    format!("must lie in [{}, {}], got {l}", range.count(), family.fiber_dim()),
                ));
            }
        }
        Ok(())
    }

    pub fn seed_strategy(&self) -> SeedStrategy {
        match self.construction.seeds {
            SeedKind::Canonical => SeedStrategy::Canonical,
            SeedKind::Random => SeedStrategy::RandomDeterministic(self.checks.rng_seed),
        }
    }
}

/// Parses `48x48`, `48×48` or `64`.
/// The model table is internally tagged, so the parser reports unknown keys
/// at the table header. Find the key's own line within that table.
fn unknown_key_line(text: &str, e: &toml::de::Error) -> Option<usize> {
    let msg = e.message();
    let key = msg.strip_prefix("unknown field `")?.split('`').next()?;
    let start = e.span()?.start;
    let header_line = text[..start].matches('\n').count() + 1;
    text.lines()
        .enumerate()
        .skip(header_line)
        .take_while(|(_, l)| !l.trim_start().starts_with('['))
        .find(|(_, l)| l.split('=').next().map(str::trim) == Some(key))
        .map(|(i, _)| i + 1)
}

pub fn parse_grid(text: &str) -> Result<Vec<usize>, String> {
    text.split(['x', 'X', '×'])
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("invalid grid `{text}` (expected e.g. 48x48)")))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.contains(&0) { Err(format!("grid `{text}` has a zero size")) } else { Ok(v) })
}
