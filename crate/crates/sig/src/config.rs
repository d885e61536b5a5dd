//! Run configuration: seed resolution, optional TOML config file, and the
//! config record embedded in every command's output.

use std::path::Path;

use curvesig::tracking::TrackerSettings;
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

/// The effective numerical tolerances, recorded in output for auditability.
/// These are fixed by the library; the config file cannot change them.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub w_eps: f64,
    pub on_curve_tol: f64,
    pub refine_tol: f64,
    pub rank_tol: f64,
    pub point_dedup_tol: f64,
    pub image_dedup_tol: f64,
    pub membership_tol: f64,
    pub witness_residual_tol: f64,
    pub element_validation_tol: f64,
}

impl Tolerances {
    pub fn current() -> Self {
        Tolerances {
            w_eps: curvesig::curves::W_EPS,
            on_curve_tol: curvesig::curves::TOL_ON_CURVE,
            refine_tol: curvesig::curves::REFINE_TOL,
            rank_tol: curvesig::algebra::RANK_TOL,
            point_dedup_tol: curvesig::witness::POINT_DEDUP_TOL,
            image_dedup_tol: curvesig::witness::IMAGE_DEDUP_TOL,
            membership_tol: curvesig::witness::MEMBERSHIP_TOL,
            witness_residual_tol: curvesig::witness::WITNESS_RESIDUAL_TOL,
            element_validation_tol: curvesig::equivalence::ELEMENT_VALIDATION_TOL,
        }
    }
}

/// Everything that determines a run's output besides the input files; each
/// command embeds this in what it prints so results carry their own
/// provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    pub tracker: TrackerSettings,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn new(seed: u64, map: Option<&str>, tracker: &TrackerSettings) -> Self {
        RunConfig {
            seed,
            map: map.map(str::to_owned),
            tracker: tracker.clone(),
            tolerances: Tolerances::current(),
        }
    }
}

/// Partial tracker settings from the config file; unset fields keep their
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerPatch {
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub newton_tol: Option<f64>,
    pub endpoint_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
    pub max_steps: Option<usize>,
    pub step_grow: Option<f64>,
    pub step_shrink: Option<f64>,
}

impl TrackerPatch {
    fn apply(&self, mut base: TrackerSettings) -> TrackerSettings {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { base.$field = v; })*
            };
        }
        set!(
            dt_init, dt_min, dt_max, newton_tol, endpoint_tol, max_newton_iters, max_steps,
            step_grow, step_shrink
        );
        base
    }
}

/// Contents of the optional `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub tracker: TrackerPatch,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("bad config {}: {e}", path.display())))
    }

    pub fn tracker_settings(&self) -> Result<TrackerSettings, CliError> {
        let settings = self.tracker.apply(TrackerSettings::default());
        settings
            .validate()
            .map_err(|e| CliError::validation(format!("bad tracker settings: {e}")))?;
        Ok(settings)
    }
}

/// Seed precedence: `--seed` flag, then the `SIG_SEED` environment variable,
/// then the config file, then 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var("SIG_SEED") {
        return v
            .trim()
            .parse()
            .map_err(|e| CliError::validation(format!("bad SIG_SEED `{v}`: {e}")));
    }
    Ok(file.seed.unwrap_or(0))
}
