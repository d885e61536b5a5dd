//! Pseudowitness sets for signature images.
//!
//! A pseudowitness set records, for one curve and one signature map, a
//! generic affine slice of the image together with every tuple the map
//! sends onto that slice.  The tuples are found by seeding one point on an
//! incidence variety (tuple, curve and slice solved together, so membership
//! is exact by construction), growing the fiber with monodromy loops, and
//! transporting the result to the requested curve along a coefficient
//! pencil.
//!
//! The witness cardinality `e` and the number of distinct images `e_img`
//! carry the geometry downstream: `e / e_img` counts the symmetry group,
//! and membership of a fresh signature value in the stored image list is
//! the decision step of the equality test.
//!
//! Monodromy has no termination certificate here (no trace test): looping
//! stops after [`STALL_LIMIT`] consecutive loops that discover nothing, and
//! stability of `e` across independent seeds is the practical completeness
//! check.  Test fixtures pin those counts.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{nullspace, rel_dist, Matrix, MultiPoly, RANK_TOL};
use crate::curves::{refine, Curve, CurvePoint, Tuple};
use crate::rng::{complex_unit, seeded, subseed};
use crate::sigmaps::{flatten, unflatten, MapId, SignatureMap};
use crate::tracking::{
    build_monodromy_leg, build_parameter_homotopy, track, PathStatus, TrackerSettings,
};
use crate::wire::{c_in, c_out};

/// Relative tolerance identifying two witness tuples as the same point.
pub const POINT_DEDUP_TOL: f64 = 1e-6;
/// Relative tolerance identifying two signature values as the same image.
/// Polished duplicates agree to ~1e-10, while the closest genuinely
/// distinct images a random slice produces on fibers of ~3000 points have
/// been observed near 3e-7 — so this sits between the two regimes, well
/// away from both.
pub const IMAGE_DEDUP_TOL: f64 = 1e-8;
/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-6;
/// Consecutive discovery-free monodromy loops before the fiber is declared
/// complete.
pub const STALL_LIMIT: usize = 5;
/// Residual bound every stored witness tuple must meet, on the curve and on
/// the slice, after refinement.
pub const WITNESS_RESIDUAL_TOL: f64 = 1e-9;

const SEED_ATTEMPTS: u64 = 20;
const MAX_LOOPS: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WitnessError {
    #[error("slice rows exceed ambient dimension ({rows} > {ambient})")]
    TooManyRows { rows: usize, ambient: usize },
    #[error("slice row {0} has zero norm")]
    ZeroRow(usize),
    #[error("linear system for seed curve coefficients is rank-deficient")]
    RankDeficiency,
    #[error("all transported witness paths failed")]
    EmptyWitness,
    #[error("malformed witness data: {0}")]
    BadData(String),
    #[error(transparent)]
    Curve(#[from] crate::curves::CurveError),
    #[error(transparent)]
    Sig(#[from] crate::sigmaps::SigError),
}

/// An affine-linear slice `{ v : A v + c = 0 }` of a complex ambient space,
/// with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    coeffs: Matrix,
    constants: Vec<Complex64>,
}

impl Slice {
    /// Build a slice, normalizing each row (and its constant) to unit
    /// coefficient norm.  Zero rows are rejected.
    pub fn new(coeffs: Matrix, constants: Vec<Complex64>) -> Result<Slice, WitnessError> {
        let (d, m) = (coeffs.rows(), coeffs.cols());
        assert_eq!(constants.len(), d, "constants length mismatch");
        if d > m {
            return Err(WitnessError::TooManyRows { rows: d, ambient: m });
        }
        let mut norm_coeffs = coeffs;
        let mut norm_constants = constants;
        for r in 0..d {
            let norm = norm_coeffs.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(WitnessError::ZeroRow(r));
            }
            for v in 0..m {
                norm_coeffs[(r, v)] /= norm;
            }
            norm_constants[r] /= norm;
        }
        Ok(Slice { coeffs: norm_coeffs, constants: norm_constants })
    }

    /// The empty slice (no constraints) of an ambient space.
    pub fn empty(ambient: usize) -> Slice {
        Slice { coeffs: Matrix::zeros(0, ambient), constants: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn ambient(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn constants(&self) -> &[Complex64] {
        &self.constants
    }

    /// `A v + c`.
    pub fn residual(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.ambient(), "slice ambient mismatch");
        let mut out = self.coeffs.mul_vec(v);
        for (o, c) in out.iter_mut().zip(&self.constants) {
            *o += c;
        }
        out
    }

    /// Largest residual component magnitude.
    pub fn max_residual(&self, v: &[Complex64]) -> f64 {
        self.residual(v).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// The image of this slice under the coordinate involution
    /// `v_i -> signs[i] * v_i`: `w` satisfies the result exactly when the
    /// mirrored `w` satisfies `self`.
    pub fn mirrored(&self, signs: &[f64]) -> Slice {
        assert_eq!(signs.len(), self.ambient(), "sign vector length mismatch");
        let mut coeffs = self.coeffs.clone();
        for r in 0..self.rows() {
            for v in 0..self.ambient() {
                coeffs[(r, v)] *= signs[v];
            }
        }
        Slice { coeffs, constants: self.constants.clone() }
    }
}

/// A random slice of `rows` affine hyperplanes in dimension `ambient`,
/// optionally passing exactly through one given value.
pub fn random_slice(
    ambient: usize,
    rows: usize,
    through: Option<&[Complex64]>,
    seed: u64,
) -> Slice {
    assert!(rows <= ambient, "more slice rows than dimensions");
    let mut rng = seeded(seed);
    let mut coeffs = Matrix::zeros(rows, ambient);
    for r in 0..rows {
        for v in 0..ambient {
            coeffs[(r, v)] = complex_unit(&mut rng);
        }
    }
    let constants: Vec<Complex64> = match through {
        None => (0..rows).map(|_| complex_unit(&mut rng)).collect(),
        Some(val) => {
            assert_eq!(val.len(), ambient, "through-value dimension mismatch");
            (0..rows)
                .map(|r| -(0..ambient).map(|v| coeffs[(r, v)] * val[v]).sum::<Complex64>())
                .collect()
        }
    };
    Slice::new(coeffs, constants).expect("random rows are nonzero")
}

// --- incidence seeding -----------------------------------------------------

/// A seeded point of the incidence variety: a generic curve, a tuple on it,
/// and slices through the tuple (`dom`) and its signature value (`img`).
#[derive(Debug, Clone)]
pub struct SeedIncidence {
    pub curve: Curve,
    pub tuple: Tuple,
    pub img: Slice,
    pub dom: Slice,
}

/// Exponent pairs `(i, j)` with `i + j <= degree`, in a fixed order.
pub(crate) fn monomial_exponents(degree: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for j in 0..=total {
            out.push((total - j, j));
        }
    }
    out
}

/// The `k x n_c` matrix whose row `i` evaluates every coefficient monomial
/// at tuple point `i`: curves through the whole tuple are its nullspace.
pub(crate) fn coefficient_conditions(tuple: &[CurvePoint], degree: u32) -> Matrix {
    let monos = monomial_exponents(degree);
    let mut m = Matrix::zeros(tuple.len(), monos.len());
    for (r, p) in tuple.iter().enumerate() {
        for (c, &(i, j)) in monos.iter().enumerate() {
            m[(r, c)] = p.x.powu(i) * p.y.powu(j);
        }
    }
    m
}

/// Fix a random tuple and solve the linear conditions `f(p_i) = 0` for a
/// random curve of the given degree through all of it, then lay slices
/// through the tuple and its signature value.  `dim` is the image slice row
/// count; the domain slice gets `arity - dim` rows.
pub fn seed_incidence(
    id: MapId,
    d_curve: u32,
    dim: usize,
    seed: u64,
) -> Result<SeedIncidence, WitnessError> {
    assert!(d_curve >= 2, "seed curves must have degree at least 2");
    let k = id.arity();
    let m = id.ambient_dim();
    assert!(dim <= k && dim <= m, "image slice rows exceed a dimension bound");

    let monos = monomial_exponents(d_curve);
    let n_c = monos.len();
    let mut last = WitnessError::RankDeficiency;
    for attempt in 0..SEED_ATTEMPTS {
        let sub = subseed(seed, attempt);
        let mut rng = seeded(sub);
        let tuple: Tuple = (0..k)
            .map(|_| CurvePoint::new(complex_unit(&mut rng), complex_unit(&mut rng)))
            .collect();

        let conditions = coefficient_conditions(&tuple, d_curve);
        let basis = nullspace(&conditions, RANK_TOL);
        if basis.len() != n_c - k {
            last = WitnessError::RankDeficiency;
            continue;
        }
        let mut coeffs = vec![Complex64::default(); n_c];
        for b in &basis {
            let w = complex_unit(&mut rng);
            for (c, z) in coeffs.iter_mut().zip(b) {
                *c += w * z;
            }
        }
        let poly = MultiPoly::from_terms(
            2,
            monos.iter().zip(&coeffs).map(|(&(i, j), &c)| (vec![i, j], c)),
        )
        .trim_relative(1e-13);
        let curve = match Curve::new(poly) {
            Ok(c) if c.degree() == d_curve => c,
            _ => continue,
        };

        // Polish the tuple onto the numeric curve and insist on regular
        // points with evaluable signatures.
        let mut polished = Vec::with_capacity(k);
        for p in &tuple {
            match refine(&curve, *p) {
                Ok(q) if curve.is_regular(&q) => polished.push(q),
                _ => {
                    polished.clear();
                    break;
                }
            }
        }
        if polished.len() != k {
            continue;
        }
        let map = SignatureMap::build(id, &curve);
        let Ok(sig) = map.eval(&polished) else {
            continue;
        };

        let img = random_slice(m, dim, Some(&sig), subseed(sub, u64::MAX - 1));
        let dom = if k > dim {
            random_slice(2 * k, k - dim, Some(&flatten(&polished)), subseed(sub, u64::MAX - 2))
        } else {
            Slice::empty(2 * k)
        };
        return Ok(SeedIncidence { curve, tuple: polished, img, dom });
    }
    Err(last)
}

// --- monodromy ----------------------------------------------------------------

/// Total order on coordinate vectors for canonical point ordering.
fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Sort lexicographically and drop points within `tol` of an earlier one.
/// Sorting first makes the survivor set independent of discovery order.
fn sort_dedup(points: &mut Vec<Vec<Complex64>>, tol: f64) {
    points.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<Vec<Complex64>> = Vec::with_capacity(points.len());
    for p in points.drain(..) {
        if kept.iter().all(|q| rel_dist(q, &p) > tol) {
            kept.push(p);
        }
    }
    *points = kept;
}

/// Grow a witness fiber by monodromy: repeatedly drive every known point
/// around random triangle loops in (curve coefficient, slice) parameter
/// space and keep whatever new points come back.  Loop legs are tracked in
/// parallel; failed paths are dropped.  Stops after `stall_limit`
/// consecutive loops with no discovery (so `stall_limit = 0` returns the
/// input unchanged).
pub fn monodromy_populate(
    map: &SignatureMap,
    img: &Slice,
    dom: &Slice,
    known: &[Tuple],
    seed: u64,
    stall_limit: usize,
    settings: &TrackerSettings,
) -> Vec<Tuple> {
    let k = map.arity();
    let m = map.ambient_dim();
    let id = map.id();
    let base = map.curve();

    let mut points: Vec<Vec<Complex64>> = known.iter().map(|t| flatten(t)).collect();
    sort_dedup(&mut points, POINT_DEDUP_TOL);

    let mut stall = 0usize;
    for loop_idx in 0..MAX_LOOPS {
        if stall >= stall_limit {
            break;
        }
        let ls = subseed(seed, loop_idx as u64);
        let c1 = crate::curves::random_curve(base.degree(), subseed(ls, 1));
        let c2 = crate::curves::random_curve(base.degree(), subseed(ls, 2));
        let img1 = random_slice(m, img.rows(), None, subseed(ls, 3));
        let img2 = random_slice(m, img.rows(), None, subseed(ls, 4));
        let (dom1, dom2) = if dom.rows() > 0 {
            (
                random_slice(2 * k, dom.rows(), None, subseed(ls, 5)),
                random_slice(2 * k, dom.rows(), None, subseed(ls, 6)),
            )
        } else {
            (Slice::empty(2 * k), Slice::empty(2 * k))
        };

        let map1 = SignatureMap::build(id, &c1);
        let map2 = SignatureMap::build(id, &c2);
        let legs: [(&SignatureMap, &Curve, &Slice, &Slice, &Slice, &Slice); 3] = [
            (map, &c1, dom, &dom1, img, &img1),
            (&map1, &c2, &dom1, &dom2, &img1, &img2),
            (&map2, base, &dom2, dom, &img2, img),
        ];
        let mut travelers = points.clone();
        for (li, (m, ct, d0, d1, i0, i1)) in legs.iter().enumerate() {
            let build = || {
                build_monodromy_leg(m, ct, d0, d1, i0, i1)
                    .expect("loop legs are square by construction")
            };
            travelers =
                track_all_guarded(&build, &travelers, settings, subseed(ls, 10 + li as u64), true)
                    .into_iter()
                    .flatten()
                    .collect();
            if travelers.is_empty() {
                break;
            }
        }

        let before = points.len();
        points.extend(travelers);
        sort_dedup(&mut points, POINT_DEDUP_TOL);
        if points.len() > before {
            stall = 0;
        } else {
            stall += 1;
        }
    }

    points.iter().map(|x| unflatten(x)).collect()
}

// --- pseudowitness sets ---------------------------------------------------------

/// A slice of one signature image together with every witness tuple the
/// map sends onto it.
#[derive(Debug, Clone)]
pub struct PseudoWitnessSet {
    pub map_id: MapId,
    pub curve: Curve,
    /// Image-space slice the witness images satisfy (`dim` rows).
    pub slice: Slice,
    /// Domain-space slice cutting symmetry orbits (`arity - dim` rows).
    pub domain_slice: Slice,
    pub points: Vec<Tuple>,
    pub images: Vec<Vec<Complex64>>,
    /// Witness point count.
    pub e: usize,
    /// Distinct image count at [`IMAGE_DEDUP_TOL`].
    pub e_img: usize,
    /// Image dimension the slice rows realize.
    pub dim: usize,
    pub seed: u64,
}

fn mirror_of(images: &[Complex64], signs: &[f64]) -> Vec<Complex64> {
    images.iter().zip(signs).map(|(v, s)| v * s).collect()
}

/// Flip-aware image distance: identified vectors compare at zero.
fn image_dist(id: MapId, a: &[Complex64], b: &[Complex64]) -> f64 {
    let direct = rel_dist(a, b);
    match id.mirror_signs() {
        None => direct,
        Some(signs) => direct.min(rel_dist(a, &mirror_of(b, signs))),
    }
}

fn count_distinct_images(id: MapId, images: &[Vec<Complex64>], tol: f64) -> usize {
    let mut reps: Vec<&Vec<Complex64>> = Vec::new();
    for img in images {
        if reps.iter().all(|r| image_dist(id, r, img) > tol) {
            reps.push(img);
        }
    }
    reps.len()
}

/// Settings for re-tracking paths suspected of crossing: the same policy
/// with a much smaller step cap, so the corrector basin stays on-path.
fn strict_settings(s: &TrackerSettings) -> TrackerSettings {
    let mut t = s.clone();
    t.dt_max = (s.dt_max / 8.0).max(s.dt_min);
    t.dt_init = s.dt_init.min(t.dt_max);
    t.max_steps = s.max_steps.saturating_mul(4);
    t
}

/// Alternative pencil arcs for path retries.  A failed path usually means
/// the arc passed near a singular pencil member; a fresh arc takes an
/// independent route around it.
fn retry_gamma(seed: u64, round: u64) -> Complex64 {
    let mut rng = seeded(subseed(seed, 0xA5C0_0000 + round));
    loop {
        let u = complex_unit(&mut rng);
        let n = u.norm();
        // Stay away from the real axis, where the bad loci live.
        if n >= 0.3 && u.im.abs() >= 0.2 * n {
            return u / n;
        }
    }
}

/// Fine stepping for hard paths: smaller steps, a deeper step floor, and a
/// slightly looser Newton target with more iterations.
fn fine_settings(s: &TrackerSettings) -> TrackerSettings {
    let mut t = s.clone();
    t.dt_init = s.dt_init.min(0.01);
    t.dt_max = s.dt_max.min(0.05);
    t.dt_min = s.dt_min.min(1e-9);
    t.max_steps = s.max_steps.saturating_mul(20);
    t.max_newton_iters = s.max_newton_iters.max(12);
    t
}

/// Track every start point to `t = 1` on the homotopy produced by
/// `build`, with three safety nets:
///
/// - failed paths are re-tracked on fresh pencil arcs (new `gamma`), which
///   route around singular pencil members;
/// - paths still failing get fine-stepping rounds, which push through
///   hard-but-regular stretches;
/// - distinct starts landing on one endpoint mean the corrector jumped
///   between nearby paths, so those starts are re-tracked with a tighter
///   step cap.  Genuinely merging paths still coincide afterwards and are
///   kept as one.
///
/// `light` trims the retry schedule to one arc and one fine round, for
/// call sites (monodromy loops) that tolerate individual losses.
/// Paths failing every net come back as `None`.
fn track_all_guarded(
    build: &dyn Fn() -> crate::tracking::SignatureHomotopy,
    starts: &[Vec<Complex64>],
    settings: &TrackerSettings,
    seed: u64,
    light: bool,
) -> Vec<Option<Vec<Complex64>>> {
    let run = |system: &crate::tracking::SignatureHomotopy,
               xs: &[&Vec<Complex64>],
               s: &TrackerSettings|
     -> Vec<Option<Vec<Complex64>>> {
        xs.par_iter()
            .map(|x| {
                let r = track(system, x, s);
                match r.status {
                    PathStatus::Success => r.endpoint,
                    _ => None,
                }
            })
            .collect()
    };

    let base = build();
    let mut ends = run(&base, &starts.iter().collect::<Vec<_>>(), settings);

    let fine = fine_settings(settings);
    let rounds: Vec<(Option<Complex64>, &TrackerSettings)> = if light {
        vec![(Some(retry_gamma(seed, 0)), settings), (None, &fine)]
    } else {
        vec![
            (Some(retry_gamma(seed, 0)), settings),
            (Some(retry_gamma(seed, 1)), settings),
            (Some(retry_gamma(seed, 2)), settings),
            (None, &fine),
            (Some(retry_gamma(seed, 3)), &fine),
        ]
    };
    for (gamma, s) in rounds {
        let failed: Vec<usize> =
            (0..ends.len()).filter(|&i| ends[i].is_none()).collect();
        if failed.is_empty() {
            break;
        }
        let system = match gamma {
            Some(g) => build().with_gamma(g),
            None => build(),
        };
        let redone = run(&system, &failed.iter().map(|&i| &starts[i]).collect::<Vec<_>>(), s);
        for (&i, end) in failed.iter().zip(redone) {
            ends[i] = end;
        }
    }

    let mut suspicious: Vec<usize> = Vec::new();
    for i in 0..ends.len() {
        for j in (i + 1)..ends.len() {
            if let (Some(a), Some(b)) = (&ends[i], &ends[j]) {
                if rel_dist(a, b) <= POINT_DEDUP_TOL {
                    suspicious.push(i);
                    suspicious.push(j);
                }
            }
        }
    }
    suspicious.sort_unstable();
    suspicious.dedup();
    if !suspicious.is_empty() {
        let strict = strict_settings(settings);
        let retracked = run(
            &base,
            &suspicious.iter().map(|&i| &starts[i]).collect::<Vec<_>>(),
            &strict,
        );
        for (&i, end) in suspicious.iter().zip(retracked) {
            if end.is_some() {
                ends[i] = end;
            }
        }
    }
    ends
}

/// Compute a pseudowitness set for `target` under the map `id`:
/// measure the image dimension, seed an incidence point on a random curve
/// of the same degree, complete its fiber by monodromy, and transport
/// everything to `target` along a coefficient pencil with the slices held
/// fixed.
pub fn compute_pws(
    id: MapId,
    target: &Curve,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<PseudoWitnessSet, WitnessError> {
    let target_map = SignatureMap::build(id, target);
    let dim = target_map.measured_image_dim(subseed(seed, 0))?;

    let inc = seed_incidence(id, target.degree(), dim, subseed(seed, 1))?;
    let seed_map = SignatureMap::build(id, &inc.curve);
    let populated = monodromy_populate(
        &seed_map,
        &inc.img,
        &inc.dom,
        &[inc.tuple.clone()],
        subseed(seed, 2),
        STALL_LIMIT,
        settings,
    );

    let build_transport = || {
        build_parameter_homotopy(&seed_map, target, &inc.dom, &inc.img)
            .expect("transport system is square by construction")
    };
    let starts: Vec<Vec<Complex64>> = populated.iter().map(|t| flatten(t)).collect();
    let tracked = track_all_guarded(&build_transport, &starts, settings, subseed(seed, 3), false);
    let lost_paths = tracked.iter().filter(|r| r.is_none()).count();
    let mut endpoints: Vec<Vec<Complex64>> = tracked.into_iter().flatten().collect();
    if endpoints.is_empty() {
        return Err(WitnessError::EmptyWitness);
    }
    sort_dedup(&mut endpoints, POINT_DEDUP_TOL);

    // Transport is a bijection between the two generic fibers, so when every
    // path lands on its own endpoint the target fiber is already complete.
    // Otherwise (dropped paths, or merged endpoints that survived the
    // collision re-track) a second monodromy run on the target itself
    // recovers whatever transport missed.
    let carried: Vec<Tuple> = endpoints.iter().map(|x| unflatten(x)).collect();
    let completed = if lost_paths == 0 && carried.len() == populated.len() {
        carried
    } else {
        monodromy_populate(
            &target_map,
            &inc.img,
            &inc.dom,
            &carried,
            subseed(seed, 4),
            STALL_LIMIT,
            settings,
        )
    };

    let mut points = Vec::with_capacity(completed.len());
    let mut images = Vec::with_capacity(completed.len());
    for tuple in completed {
        if !tuple.iter().all(|p| target.residual(p) <= WITNESS_RESIDUAL_TOL) {
            continue;
        }
        let Ok(sig) = target_map.eval(&tuple) else {
            continue;
        };
        let scale = sig.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if inc.img.max_residual(&sig) > WITNESS_RESIDUAL_TOL * scale {
            continue;
        }
        points.push(tuple);
        images.push(sig);
    }
    if points.is_empty() {
        return Err(WitnessError::EmptyWitness);
    }

    let e = points.len();
    let e_img = count_distinct_images(id, &images, IMAGE_DEDUP_TOL);
    Ok(PseudoWitnessSet {
        map_id: id,
        curve: target.clone(),
        slice: inc.img,
        domain_slice: inc.dom,
        points,
        images,
        e,
        e_img,
        dim,
        seed,
    })
}

/// Distance from `value` to the nearest stored witness image (flip-aware
/// for maps whose image is taken modulo the reflection involution), or
/// `None` for an empty witness set.
pub fn membership_distance(pws: &PseudoWitnessSet, value: &[Complex64]) -> Option<f64> {
    pws.images.iter().map(|img| image_dist(pws.map_id, img, value)).reduce(f64::min)
}

/// Whether `value` matches a stored witness image to `tol`.
pub fn membership(pws: &PseudoWitnessSet, value: &[Complex64], tol: f64) -> bool {
    membership_distance(pws, value).is_some_and(|d| d <= tol)
}

// --- wire formats ---------------------------------------------------------

/// Lowercase hex of the IEEE-754 bits: decimal-free, bit-exact by
/// construction, and immune to parser rounding.
fn hex_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn f64_hex(s: &str) -> Result<f64, String> {
    if s.len() != 16 {
        return Err(format!("bad float field length {}", s.len()));
    }
    let bits = u64::from_str_radix(s, 16).map_err(|e| e.to_string())?;
    let x = f64::from_bits(bits);
    if !x.is_finite() {
        return Err("non-finite float".into());
    }
    Ok(x)
}

fn hex_c(z: Complex64) -> [String; 2] {
    [hex_f64(z.re), hex_f64(z.im)]
}

fn c_hex(pair: &[String; 2]) -> Result<Complex64, String> {
    Ok(Complex64::new(f64_hex(&pair[0])?, f64_hex(&pair[1])?))
}

#[derive(Serialize, Deserialize)]
struct HexSliceWire {
    ambient: usize,
    coeffs: Vec<Vec<[String; 2]>>,
    constants: Vec<[String; 2]>,
}

impl HexSliceWire {
    fn from_slice(s: &Slice) -> HexSliceWire {
        HexSliceWire {
            ambient: s.ambient(),
            coeffs: (0..s.rows())
                .map(|r| s.coeffs.row(r).iter().map(|&z| hex_c(z)).collect())
                .collect(),
            constants: s.constants.iter().map(|&z| hex_c(z)).collect(),
        }
    }

    fn into_slice(self) -> Result<Slice, String> {
        let d = self.coeffs.len();
        if self.constants.len() != d {
            return Err("slice constants length mismatch".into());
        }
        if d > self.ambient {
            return Err("more slice rows than dimensions".into());
        }
        let mut coeffs = Matrix::zeros(d, self.ambient);
        for (r, row) in self.coeffs.iter().enumerate() {
            if row.len() != self.ambient {
                return Err("slice row length mismatch".into());
            }
            for (v, pair) in row.iter().enumerate() {
                coeffs[(r, v)] = c_hex(pair)?;
            }
            let norm: f64 = coeffs.row(r).iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(format!("slice row {r} is not unit norm"));
            }
        }
        let mut constants = Vec::with_capacity(d);
        for pair in &self.constants {
            constants.push(c_hex(pair)?);
        }
        Ok(Slice { coeffs, constants })
    }
}

#[derive(Serialize, Deserialize)]
struct PwsWire {
    format_version: u32,
    tool_version: String,
    map: MapId,
    seed: u64,
    dim: usize,
    e: usize,
    e_img: usize,
    curve: Curve,
    image_slice: HexSliceWire,
    domain_slice: HexSliceWire,
    points: Vec<Vec<[String; 2]>>,
    images: Vec<Vec<[String; 2]>>,
}

/// Version tag of the witness-file layout.
pub const WITNESS_FORMAT_VERSION: u32 = 1;

impl Serialize for PseudoWitnessSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        PwsWire {
            format_version: WITNESS_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            map: self.map_id,
            seed: self.seed,
            dim: self.dim,
            e: self.e,
            e_img: self.e_img,
            curve: self.curve.clone(),
            image_slice: HexSliceWire::from_slice(&self.slice),
            domain_slice: HexSliceWire::from_slice(&self.domain_slice),
            points: self
                .points
                .iter()
                .map(|t| flatten(t).iter().map(|&z| hex_c(z)).collect())
                .collect(),
            images: self
                .images
                .iter()
                .map(|im| im.iter().map(|&z| hex_c(z)).collect())
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PseudoWitnessSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = PwsWire::deserialize(de)?;
        if wire.format_version != WITNESS_FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported witness format version {}",
                wire.format_version
            )));
        }
        let k = wire.map.arity();
        let m = wire.map.ambient_dim();
        let slice = wire.image_slice.into_slice().map_err(D::Error::custom)?;
        let domain_slice = wire.domain_slice.into_slice().map_err(D::Error::custom)?;
        if slice.ambient() != m || domain_slice.ambient() != 2 * k {
            return Err(D::Error::custom("slice ambient does not match the map"));
        }
        if wire.points.len() != wire.e || wire.images.len() != wire.e {
            return Err(D::Error::custom("witness counts do not match the data"));
        }
        if wire.e_img > wire.e {
            return Err(D::Error::custom("more distinct images than points"));
        }
        let mut points = Vec::with_capacity(wire.points.len());
        for flat in &wire.points {
            if flat.len() != 2 * k {
                return Err(D::Error::custom("tuple length does not match the map arity"));
            }
            let mut coords = Vec::with_capacity(2 * k);
            for pair in flat {
                coords.push(c_hex(pair).map_err(D::Error::custom)?);
            }
            points.push(unflatten(&coords));
        }
        let mut images = Vec::with_capacity(wire.images.len());
        for im in &wire.images {
            if im.len() != m {
                return Err(D::Error::custom("image length does not match the map"));
            }
            let mut v = Vec::with_capacity(m);
            for pair in im {
                v.push(c_hex(pair).map_err(D::Error::custom)?);
            }
            images.push(v);
        }
        Ok(PseudoWitnessSet {
            map_id: wire.map,
            curve: wire.curve,
            slice,
            domain_slice,
            points,
            images,
            e: wire.e,
            e_img: wire.e_img,
            dim: wire.dim,
            seed: wire.seed,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SliceWire {
    ambient: usize,
    coeffs: Vec<Vec<[f64; 2]>>,
    constants: Vec<[f64; 2]>,
}

impl Serialize for Slice {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let coeffs = (0..self.rows())
            .map(|r| self.coeffs.row(r).iter().map(|&z| c_out(z)).collect())
            .collect();
        SliceWire {
            ambient: self.ambient(),
            coeffs,
            constants: self.constants.iter().map(|&z| c_out(z)).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Slice {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = SliceWire::deserialize(de)?;
        let d = wire.coeffs.len();
        if wire.constants.len() != d {
            return Err(D::Error::custom("slice constants length mismatch"));
        }
        let mut coeffs = Matrix::zeros(d, wire.ambient);
        for (r, row) in wire.coeffs.iter().enumerate() {
            if row.len() != wire.ambient {
                return Err(D::Error::custom("slice row length mismatch"));
            }
            for (v, &pair) in row.iter().enumerate() {
                coeffs[(r, v)] = c_in(pair).map_err(D::Error::custom)?;
            }
        }
        let mut constants = Vec::with_capacity(d);
        for &pair in &wire.constants {
            constants.push(c_in(pair).map_err(D::Error::custom)?);
        }
        if d > wire.ambient {
            return Err(D::Error::custom("more slice rows than dimensions"));
        }
        // Stored rows are already unit norm; renormalizing would shift the
        // last ulp and break bit-exact round trips, so only validate.
        for r in 0..d {
            let norm: f64 = coeffs.row(r).iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(D::Error::custom(format!("slice row {r} is not unit norm")));
            }
        }
        Ok(Slice { coeffs, constants })
    }
}
