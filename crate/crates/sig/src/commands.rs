//! One function per subcommand.  Each returns the process exit code on the
//! success path (compare encodes its verdict there) or a [`CliError`]
//! carrying the code for the failure path.  Machine-readable output goes to
//! stdout, diagnostics to stderr.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use curvesig::algebra::MultiPoly;
use curvesig::curves::{sample, transform, Curve, CurveError};
use curvesig::equivalence::{equality_test, symmetry_analyze, EqualityVerdict, Verdict};
use curvesig::groups::GroupElement;
use curvesig::rng::{complex_unit, seeded, subseed};
use curvesig::sigmaps::MapId;
use curvesig::tracking::TrackerSettings;
use curvesig::witness::{compute_pws, WitnessError};

use crate::config::RunConfig;

/// Exit code for input/validation problems (bad files, bad flags).
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code when on-curve sampling gives up.
pub const EXIT_SAMPLE_FAILURE: i32 = 2;
/// Exit codes carrying the comparison verdict.
pub const EXIT_NOT_EQUIVALENT: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }
}

fn load_curve(path: &Path) -> Result<Curve, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("bad curve file {}: {e}", path.display())))
}

fn parse_map(name: &str) -> Result<MapId, CliError> {
    MapId::parse(name).ok_or_else(|| {
        let known: Vec<&str> = MapId::ALL.iter().map(|m| m.name()).collect();
        CliError::validation(format!("unknown map `{name}`; expected one of {known:?}"))
    })
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

fn emit<T: Serialize>(value: &T) {
    print!("{}", to_pretty(value));
}

// --- sample -----------------------------------------------------------------

#[derive(Serialize)]
struct SampleOut {
    config: RunConfig,
    count: usize,
    points: Vec<curvesig::curves::CurvePoint>,
    /// `|f(p)| / coeff_scale` at each returned point.
    residuals: Vec<f64>,
}

pub fn cmd_sample(
    curve_path: &Path,
    count: usize,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve = load_curve(curve_path)?;
    let points = sample(&curve, count, seed).map_err(|e| {
        let code = match e {
            CurveError::SampleFailure { .. } => EXIT_SAMPLE_FAILURE,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: format!("sampling failed: {e}") }
    })?;
    let residuals = points.iter().map(|p| curve.residual(p)).collect();
    emit(&SampleOut {
        config: RunConfig::new(seed, None, settings),
        count: points.len(),
        points,
        residuals,
    });
    Ok(0)
}

// --- witness ------------------------------------------------------------------

#[derive(Serialize)]
struct WitnessSummary {
    config: RunConfig,
    map: String,
    dim: usize,
    e: usize,
    e_img: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Serialize)]
struct WitnessFull {
    config: RunConfig,
    witness: curvesig::witness::PseudoWitnessSet,
}

pub fn cmd_witness(
    curve_path: &Path,
    map_name: &str,
    seed: u64,
    out: Option<&Path>,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve = load_curve(curve_path)?;
    let id = parse_map(map_name)?;
    let pws = compute_pws(id, &curve, seed, settings)
        .map_err(|e| CliError::validation(format!("witness computation failed: {e}")))?;
    match out {
        Some(path) => {
            std::fs::write(path, to_pretty(&pws)).map_err(|e| {
                CliError::validation(format!("cannot write {}: {e}", path.display()))
            })?;
            emit(&WitnessSummary {
                config: RunConfig::new(seed, Some(id.name()), settings),
                map: id.name().to_owned(),
                dim: pws.dim,
                e: pws.e,
                e_img: pws.e_img,
                out: Some(path.display().to_string()),
            });
        }
        None => emit(&WitnessFull {
            config: RunConfig::new(seed, Some(id.name()), settings),
            witness: pws,
        }),
    }
    Ok(0)
}

// --- compare ------------------------------------------------------------------

#[derive(Serialize)]
struct ResidualsOut {
    #[serde(skip_serializing_if = "Option::is_none")]
    endpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    membership_distance: Option<f64>,
}

#[derive(Serialize)]
struct CompareOut {
    verdict: Verdict,
    reason: String,
    map: String,
    /// Set on verdicts under the equi-affine joint map: image equality is
    /// used as evidence of equivalence there, not proof.
    heuristic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    dim_expected: Option<usize>,
    attempts: usize,
    residuals: ResidualsOut,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    config: RunConfig,
}

fn verdict_exit(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Equivalent => 0,
        Verdict::NotEquivalent => EXIT_NOT_EQUIVALENT,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// The full decision pipeline: pseudowitness set of `curve1`, then the
/// image-equality test from `curve0`.  A witness-phase failure is reported
/// as an inconclusive verdict, not a hard error.
fn decide(
    curve0: &Curve,
    curve1: &Curve,
    id: MapId,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<EqualityVerdict, WitnessError> {
    let pws = compute_pws(id, curve1, subseed(seed, 1), settings)?;
    Ok(equality_test(curve0, &pws, settings, subseed(seed, 2)))
}

fn equiaffine_caveat(id: MapId) {
    if id.is_equiaffine() {
        eprintln!(
            "note: equi-affine joint verdicts are heuristic; matching images are strong \
             evidence of equivalence but not a proof for this group"
        );
    }
}

pub fn cmd_compare(
    curve0_path: &Path,
    curve1_path: &Path,
    map_name: &str,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve0 = load_curve(curve0_path)?;
    let curve1 = load_curve(curve1_path)?;
    let id = parse_map(map_name)?;
    equiaffine_caveat(id);

    let config = RunConfig::new(seed, Some(id.name()), settings);
    let out = match decide(&curve0, &curve1, id, seed, settings) {
        Ok(v) => CompareOut {
            verdict: v.verdict,
            reason: snake_name(&v.reason),
            map: id.name().to_owned(),
            heuristic: id.is_equiaffine(),
            d: Some(v.d),
            dim_expected: Some(v.dim_expected),
            attempts: v.attempts,
            residuals: ResidualsOut {
                endpoint: v.endpoint_residual,
                membership_distance: v.membership_distance,
            },
            seed,
            note: None,
            config,
        },
        Err(e) => CompareOut {
            verdict: Verdict::Inconclusive,
            reason: "track_failure".to_owned(),
            map: id.name().to_owned(),
            heuristic: id.is_equiaffine(),
            d: None,
            dim_expected: None,
            attempts: 0,
            residuals: ResidualsOut { endpoint: None, membership_distance: None },
            seed,
            note: Some(format!("witness computation failed: {e}")),
            config,
        },
    };
    emit(&out);
    Ok(verdict_exit(out.verdict))
}

fn snake_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value).expect("enum serializes") {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

// --- symmetry -----------------------------------------------------------------

#[derive(Serialize)]
struct SymmetryOut {
    config: RunConfig,
    classification: curvesig::equivalence::SymmetryClass,
    dim_j: usize,
    dim3: usize,
    e: usize,
    e_img: usize,
    element_count: usize,
    element_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    elements: Option<Vec<GroupElement>>,
}

pub fn cmd_symmetry(
    curve_path: &Path,
    seed: u64,
    with_elements: bool,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve = load_curve(curve_path)?;
    let report = symmetry_analyze(&curve, seed, settings)
        .map_err(|e| CliError::validation(format!("symmetry analysis failed: {e}")))?;
    emit(&SymmetryOut {
        config: RunConfig::new(seed, Some(MapId::EuclidJoint.name()), settings),
        classification: report.classification,
        dim_j: report.dim_j,
        dim3: report.dim3,
        e: report.e,
        e_img: report.e_img,
        element_count: report.elements.len(),
        element_failures: report.element_failures,
        elements: with_elements.then_some(report.elements),
    });
    Ok(0)
}

// --- transform ------------------------------------------------------------------

pub enum ElementSource {
    RandomEuclidean,
    RandomEquiaffine,
    File(PathBuf),
}

#[derive(Serialize)]
struct TransformOut {
    config: RunConfig,
    element: GroupElement,
    inverse_applied: bool,
    curve: Curve,
}

pub fn cmd_transform(
    curve_path: &Path,
    source: ElementSource,
    inverse: bool,
    seed: u64,
    out: Option<&Path>,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve = load_curve(curve_path)?;
    let element = match source {
        ElementSource::RandomEuclidean => GroupElement::random_euclidean(seed),
        ElementSource::RandomEquiaffine => GroupElement::random_equiaffine(seed),
        ElementSource::File(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::validation(format!("bad element file {}: {e}", path.display()))
            })?
        }
    };
    let applied = if inverse { element.inverse() } else { element.clone() };
    let moved = transform(&curve, &applied)
        .map_err(|e| CliError::validation(format!("transform failed: {e}")))?;
    if let Some(path) = out {
        std::fs::write(path, to_pretty(&moved))
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    }
    emit(&TransformOut {
        config: RunConfig::new(seed, None, settings),
        element,
        inverse_applied: inverse,
        curve: moved,
    });
    Ok(0)
}

// --- noise ----------------------------------------------------------------------

/// Multiply every coefficient by `1 + eps * u` with `u` uniform in the
/// complex unit box: a relative perturbation that leaves the degree intact
/// for `eps < 1`.
fn perturb(curve: &Curve, eps: f64, seed: u64) -> Result<Curve, CurveError> {
    let mut rng = seeded(seed);
    let terms: Vec<(Vec<u32>, Complex64)> = curve
        .poly()
        .terms()
        .map(|t| (t.exp, t.coeff * (1.0 + eps * complex_unit(&mut rng))))
        .collect();
    Curve::new(MultiPoly::from_terms(2, terms))
}

pub fn cmd_noise(
    curve_path: &Path,
    map_name: &str,
    eps_tokens: &[String],
    trials: usize,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<i32, CliError> {
    let curve = load_curve(curve_path)?;
    let id = parse_map(map_name)?;
    equiaffine_caveat(id);
    if trials == 0 {
        return Err(CliError::validation("--trials must be positive"));
    }
    let mut eps_values = Vec::with_capacity(eps_tokens.len());
    for tok in eps_tokens {
        let eps: f64 = tok
            .parse()
            .map_err(|e| CliError::validation(format!("bad eps `{tok}`: {e}")))?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(CliError::validation(format!("eps must be >= 0, got `{tok}`")));
        }
        eps_values.push(eps);
    }

    let config = RunConfig::new(seed, Some(id.name()), settings);
    let mut csv = String::new();
    csv.push_str(&format!(
        "# config: {}\n",
        serde_json::to_string(&config).expect("config serializes")
    ));
    csv.push_str("eps,trials,equivalent,not_equivalent,inconclusive\n");

    let mut prev: Option<(f64, usize)> = None;
    for (row, (tok, &eps)) in eps_tokens.iter().zip(&eps_values).enumerate() {
        let verdicts: Vec<Verdict> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let ts = subseed(seed, ((row as u64) << 32) | trial as u64);
                let g = GroupElement::random_euclidean(subseed(ts, 1));
                let Ok(moved) = transform(&curve, &g) else {
                    return Verdict::Inconclusive;
                };
                let noisy = if eps == 0.0 {
                    moved
                } else {
                    match perturb(&moved, eps, subseed(ts, 2)) {
                        Ok(c) => c,
                        Err(_) => return Verdict::Inconclusive,
                    }
                };
                match decide(&curve, &noisy, id, subseed(ts, 3), settings) {
                    Ok(v) => v.verdict,
                    Err(_) => Verdict::Inconclusive,
                }
            })
            .collect();
        let count = |v: Verdict| verdicts.iter().filter(|&&x| x == v).count();
        let eq = count(Verdict::Equivalent);
        csv.push_str(&format!(
            "{tok},{trials},{eq},{},{}\n",
            count(Verdict::NotEquivalent),
            count(Verdict::Inconclusive)
        ));
        if let Some((p_eps, p_eq)) = prev {
            if eps > p_eps && eq > p_eq {
                eprintln!(
                    "warning: equivalent count rose from {p_eq} (eps {p_eps}) to {eq} (eps {eps})"
                );
            }
        }
        prev = Some((eps, eq));
    }
    print!("{csv}");
    Ok(0)
}
