//! Deciding curve equivalence and classifying symmetry groups.
//!
//! Two curves are Euclidean-equivalent exactly when their signature images
//! coincide, and equality of those (irreducible) images is decided by a
//! probability-one membership test: slide a generic slice of one image onto
//! the slice stored in the other's pseudowitness set and check whether the
//! tracked point lands on a stored witness image.
//!
//! Symmetry classification rides on the four-point joint map: an infinite
//! symmetry group collapses the joint image below full dimension, while for
//! finite groups the map is generically `n : 1` onto its image, so the
//! group order is the witness quotient `e / e_img` and the individual
//! motions can be recovered from witness tuples sharing an image.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{numeric_rank, MultiPoly, RANK_TOL};
use crate::curves::{sample_regular_tuple, transform, Curve};
use crate::groups::{recover_element, EuclideanElement, GroupElement};
use crate::rng::subseed;
use crate::sigmaps::{dim3_rank, flatten, unflatten, MapId, SignatureMap};
use crate::tracking::{build_equality_homotopy, track, PathStatus, TrackerSettings};
use crate::witness::{
    compute_pws, membership_distance, random_slice, PseudoWitnessSet, Slice, WitnessError,
    IMAGE_DEDUP_TOL, MEMBERSHIP_TOL,
};

/// Resamples of the base tuple and moving slice before giving up.
pub const RETRY_BUDGET: usize = 3;
/// Relative tolerance for validating a recovered symmetry: the transformed
/// curve's monic coefficient vector must match the original this closely.
pub const ELEMENT_VALIDATION_TOL: f64 = 1e-7;
/// Tolerance for recovering a motion from two witness tuples.
const RECOVERY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    /// The two signature images have different dimensions.
    DimensionMismatch,
    /// The tracked image value matched a stored witness image.
    MembershipHit,
    /// The tracked image value missed every stored witness image.
    MembershipMiss,
    /// Path tracking failed on every attempt.
    TrackFailure,
}

/// Outcome of the image-equality test, with enough diagnostics to audit a
/// verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityVerdict {
    pub verdict: Verdict,
    pub reason: VerdictReason,
    /// Measured dimension of the first curve's signature image.
    pub d: usize,
    /// Image dimension stored in the witness set.
    pub dim_expected: usize,
    /// Sample/track attempts consumed.
    pub attempts: usize,
    /// Largest on-curve residual over the final endpoint tuple.
    pub endpoint_residual: Option<f64>,
    /// Distance from the final image value to the nearest stored image.
    pub membership_distance: Option<f64>,
}

impl EqualityVerdict {
    fn conclusion(reason: VerdictReason) -> Verdict {
        match reason {
            VerdictReason::MembershipHit => Verdict::Equivalent,
            VerdictReason::MembershipMiss | VerdictReason::DimensionMismatch => {
                Verdict::NotEquivalent
            }
            VerdictReason::TrackFailure => Verdict::Inconclusive,
        }
    }

    fn new(reason: VerdictReason, d: usize, dim_expected: usize, attempts: usize) -> Self {
        EqualityVerdict {
            verdict: Self::conclusion(reason),
            reason,
            d,
            dim_expected,
            attempts,
            endpoint_residual: None,
            membership_distance: None,
        }
    }
}

/// Decide whether `curve0`'s signature image equals the image recorded in
/// `pws1`.
///
/// The image dimension at a random tuple of `curve0` is compared against
/// the stored dimension first; images of different dimension cannot be
/// equal.  Zero-dimensional images (single points) skip tracking and
/// compare directly.  Otherwise a generic slice through the sampled image
/// value is slid onto the stored slice and the endpoint's image is tested
/// for membership among the stored witness images.
///
/// A hit is conclusive, so it returns immediately.  A miss is not: the
/// stored fiber can be missing a few points (hard paths are dropped rather
/// than mis-tracked), and the endpoint may have landed on exactly such a
/// point.  Misses therefore resample and re-track, up to [`RETRY_BUDGET`]
/// attempts, and only a full budget of misses yields `NotEquivalent`.
pub fn equality_test(
    curve0: &Curve,
    pws1: &PseudoWitnessSet,
    settings: &TrackerSettings,
    seed: u64,
) -> EqualityVerdict {
    let id = pws1.map_id;
    let k = id.arity();
    let m = id.ambient_dim();
    let map0 = SignatureMap::build(id, curve0);

    let mut attempts = 0;
    let mut best_miss: Option<(f64, f64)> = None;
    for attempt in 0..RETRY_BUDGET {
        attempts = attempt + 1;
        let s = subseed(seed, attempt as u64);

        let Ok(x0) = sample_regular_tuple(curve0, k, subseed(s, 1)) else {
            continue;
        };
        let Ok(jac) = map0.jacobian_on_curve(&x0) else {
            continue;
        };
        let d = numeric_rank(&jac, RANK_TOL);
        if d != pws1.dim {
            return EqualityVerdict::new(VerdictReason::DimensionMismatch, d, pws1.dim, attempts);
        }
        let Ok(sig0) = map0.eval(&x0) else {
            continue;
        };

        if d == 0 {
            // Point image: nothing to track, membership decides directly.
            let dist = membership_distance(pws1, &sig0);
            let reason = if dist.is_some_and(|x| x <= MEMBERSHIP_TOL) {
                VerdictReason::MembershipHit
            } else {
                VerdictReason::MembershipMiss
            };
            let mut v = EqualityVerdict::new(reason, d, pws1.dim, attempts);
            v.membership_distance = dist;
            v.endpoint_residual =
                Some(x0.iter().map(|p| curve0.residual(p)).fold(0.0, f64::max));
            return v;
        }

        let img0 = random_slice(m, d, Some(&sig0), subseed(s, 2));
        let dom = if k > d {
            random_slice(2 * k, k - d, Some(&flatten(&x0)), subseed(s, 3))
        } else {
            Slice::empty(2 * k)
        };

        // Direct leg: slide the slice through the sampled image value onto
        // the stored one and look the endpoint's image up.
        let Some((end1, sig1)) = slide_to_slice(&map0, &dom, &img0, &pws1.slice, &x0, settings)
        else {
            continue;
        };
        let dist1 = membership_distance(pws1, &sig1);
        if dist1.is_some_and(|x| x <= MEMBERSHIP_TOL) {
            let mut v = EqualityVerdict::new(VerdictReason::MembershipHit, d, pws1.dim, attempts);
            v.membership_distance = dist1;
            v.endpoint_residual =
                Some(end1.iter().map(|p| curve0.residual(p)).fold(0.0, f64::max));
            return v;
        }

        // Mirror leg, for maps whose invariants flip sign under
        // reflections: the two curves' exact images may be mirror images
        // of each other, in which case this curve's image meets the
        // *mirrored* stored slice at the mirrors of the stored values.
        let mut dist2 = None;
        let mut end2_residual = None;
        if let Some(signs) = id.mirror_signs() {
            let mirrored = pws1.slice.mirrored(signs);
            let Some((end2, sig2)) = slide_to_slice(&map0, &dom, &img0, &mirrored, &x0, settings)
            else {
                continue;
            };
            let sig2_back: Vec<Complex64> =
                sig2.iter().zip(signs).map(|(v, s)| v * s).collect();
            dist2 = membership_distance(pws1, &sig2_back);
            end2_residual =
                Some(end2.iter().map(|p| curve0.residual(p)).fold(0.0, f64::max));
            if dist2.is_some_and(|x| x <= MEMBERSHIP_TOL) {
                let mut v =
                    EqualityVerdict::new(VerdictReason::MembershipHit, d, pws1.dim, attempts);
                v.membership_distance = dist2;
                v.endpoint_residual = end2_residual;
                return v;
            }
        }

        let dist = match (dist1, dist2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let resid = end2_residual
            .unwrap_or_else(|| end1.iter().map(|p| curve0.residual(p)).fold(0.0, f64::max));
        if let Some(dist) = dist {
            if best_miss.is_none_or(|(b, _)| dist < b) {
                best_miss = Some((dist, resid));
            }
        }
    }
    if let Some((dist, resid)) = best_miss {
        let mut v = EqualityVerdict::new(VerdictReason::MembershipMiss, pws1.dim, pws1.dim, attempts);
        v.membership_distance = Some(dist);
        v.endpoint_residual = Some(resid);
        return v;
    }
    EqualityVerdict::new(VerdictReason::TrackFailure, 0, pws1.dim, attempts)
}

/// Track the equality homotopy from `x0`, sliding the image constraint
/// from `img0` to `target`: returns the endpoint tuple and its signature,
/// or `None` on any tracking failure.
fn slide_to_slice(
    map0: &SignatureMap,
    dom: &Slice,
    img0: &Slice,
    target: &Slice,
    x0: &[crate::curves::CurvePoint],
    settings: &TrackerSettings,
) -> Option<(Vec<crate::curves::CurvePoint>, Vec<Complex64>)> {
    let homotopy = build_equality_homotopy(map0, dom, img0, target).ok()?;
    let result = track(&homotopy, &flatten(x0), settings);
    if result.status != PathStatus::Success {
        return None;
    }
    let endpoint = unflatten(&result.endpoint?);
    let sig = map0.eval(&endpoint).ok()?;
    Some((endpoint, sig))
}

// --- symmetry classification ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum SymmetryClass {
    Finite(usize),
    Infinite,
}

/// Classification of a curve's group of Euclidean symmetries, with the
/// measured dimensions backing it and the recovered motions when finite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub classification: SymmetryClass,
    /// Measured dimension of the four-point joint signature image.
    pub dim_j: usize,
    /// Measured dimension of the three-point restricted signature, the
    /// independent witness for infinite symmetry (drops below 3 exactly
    /// when `dim_j` drops below 4).
    pub dim3: usize,
    /// Validated symmetries (identity included).  Empty for infinite
    /// groups.
    pub elements: Vec<GroupElement>,
    /// Recovered motions that failed the `g . C = C` validation.
    pub element_failures: usize,
    /// Witness counts behind a finite classification (0 when infinite).
    pub e: usize,
    pub e_img: usize,
    pub seed: u64,
}

/// Compare two curves by monic-normalized coefficient vectors.
fn curves_match(a: &Curve, b: &Curve, tol: f64) -> bool {
    let pa = a.poly().normalized();
    let pb = b.poly().normalized();
    polys_match(&pa, &pb, tol)
}

fn polys_match(pa: &MultiPoly, pb: &MultiPoly, tol: f64) -> bool {
    let scale = pa.coeff_scale().max(pb.coeff_scale()).max(1.0);
    let close = |x: Complex64, y: Complex64| (x - y).norm() <= tol * scale;
    pa.terms().all(|t| close(t.coeff, pb.coeff(&t.exp)))
        && pb.terms().all(|t| close(t.coeff, pa.coeff(&t.exp)))
}

/// Recover and validate the symmetries pairing witness tuples that share
/// one image.  Returns (validated elements, failure count).
fn recover_symmetries(
    curve: &Curve,
    pws: &PseudoWitnessSet,
) -> (Vec<GroupElement>, usize) {
    let map = SignatureMap::build(pws.map_id, curve);
    let base_img = &pws.images[0];
    let base = &pws.points[0];

    let mut elements: Vec<EuclideanElement> = Vec::new();
    let mut failures = 0;
    for (tuple, img) in pws.points.iter().zip(&pws.images) {
        if map.distance(base_img, img) > IMAGE_DEDUP_TOL {
            continue;
        }
        let g = match recover_element(base, tuple, RECOVERY_TOL) {
            Ok(g) => g,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let moved = match transform(curve, &GroupElement::Euclidean(g.clone())) {
            Ok(c) => c,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if !curves_match(curve, &moved, ELEMENT_VALIDATION_TOL) {
            failures += 1;
            continue;
        }
        elements.push(g);
    }
    (elements.into_iter().map(GroupElement::Euclidean).collect(), failures)
}

/// Classify a curve's Euclidean symmetry group.
///
/// The group is infinite exactly when the joint signature image drops
/// below dimension 4 (cross-checked by the three-point dimension dropping
/// below 3).  For full-dimensional images the joint map is generically
/// `n : 1`, so `n = e / e_img` from a witness set, and each witness tuple
/// sharing the base tuple's image yields one motion, validated by
/// transforming the curve and comparing coefficients.
pub fn symmetry_analyze(
    curve: &Curve,
    seed: u64,
    settings: &TrackerSettings,
) -> Result<SymmetryReport, WitnessError> {
    let map = SignatureMap::build(MapId::EuclidJoint, curve);
    let dim_j = map.measured_image_dim(subseed(seed, 1))?;
    let dim3 = dim3_rank(curve, subseed(seed, 2))?;

    if dim_j < 4 {
        return Ok(SymmetryReport {
            classification: SymmetryClass::Infinite,
            dim_j,
            dim3,
            elements: Vec::new(),
            element_failures: 0,
            e: 0,
            e_img: 0,
            seed,
        });
    }

    let pws = compute_pws(MapId::EuclidJoint, curve, subseed(seed, 3), settings)?;
    let n = if pws.e_img > 0 { pws.e / pws.e_img } else { 0 };
    let (elements, element_failures) = recover_symmetries(curve, &pws);
    Ok(SymmetryReport {
        classification: SymmetryClass::Finite(n),
        dim_j,
        dim3,
        elements,
        element_failures,
        e: pws.e,
        e_img: pws.e_img,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::random_curve;
    use crate::groups::GroupElement;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn circle(r_sq: f64) -> Curve {
        Curve::new(MultiPoly::from_terms(
            2,
            [
                (vec![2u32, 0u32], c(1.0)),
                (vec![0, 2], c(1.0)),
                (vec![0, 0], c(-r_sq)),
            ],
        ))
        .unwrap()
    }

    fn ellipse() -> Curve {
        Curve::new(MultiPoly::from_terms(
            2,
            [
                (vec![2u32, 0u32], c(0.25)),
                (vec![0, 2], c(1.0)),
                (vec![0, 0], c(-1.0)),
            ],
        ))
        .unwrap()
    }

    fn settings() -> TrackerSettings {
        TrackerSettings::default()
    }

    #[test]
    fn moved_conic_is_equivalent_to_itself() {
        let curve = random_curve(2, 42);
        let g = GroupElement::random_euclidean(43);
        let moved = transform(&curve, &g).unwrap();
        let pws = compute_pws(MapId::EuclidDiff, &moved, 7, &settings()).unwrap();
        let v = equality_test(&curve, &pws, &settings(), 11);
        assert_eq!(v.verdict, Verdict::Equivalent, "{v:?}");
        assert_eq!(v.reason, VerdictReason::MembershipHit);
    }

    #[test]
    fn independent_conics_are_not_equivalent() {
        let a = random_curve(2, 101);
        let b = random_curve(2, 202);
        let pws = compute_pws(MapId::EuclidDiff, &b, 7, &settings()).unwrap();
        let v = equality_test(&a, &pws, &settings(), 11);
        assert_eq!(v.verdict, Verdict::NotEquivalent, "{v:?}");
        assert_eq!(v.reason, VerdictReason::MembershipMiss);
    }

    #[test]
    fn moved_cubic_matches_under_the_two_point_map() {
        let curve = random_curve(3, 77);
        let g = GroupElement::random_euclidean(78);
        let moved = transform(&curve, &g).unwrap();
        let pws = compute_pws(MapId::EuclidJointDiff, &moved, 5, &settings()).unwrap();
        let v = equality_test(&curve, &pws, &settings(), 6);
        assert_eq!(v.verdict, Verdict::Equivalent, "{v:?}");
    }

    #[test]
    fn circles_of_different_radius_are_distinguished() {
        // Both curvature images are single points, (1, 0) and (1/4, 0):
        // the zero-dimensional short-circuit must separate them.
        let pws = compute_pws(MapId::EuclidDiff, &circle(4.0), 3, &settings()).unwrap();
        assert_eq!(pws.dim, 0);
        let v = equality_test(&circle(1.0), &pws, &settings(), 9);
        assert_eq!(v.verdict, Verdict::NotEquivalent, "{v:?}");
        assert_eq!(v.reason, VerdictReason::MembershipMiss);
        assert_eq!(v.d, 0);

        let same = equality_test(&circle(4.0), &pws, &settings(), 9);
        assert_eq!(same.verdict, Verdict::Equivalent, "{same:?}");
    }

    #[test]
    fn dimension_mismatch_is_decisive() {
        // Circle image is a point; a generic conic's is a curve.
        let pws = compute_pws(MapId::EuclidDiff, &random_curve(2, 606), 3, &settings()).unwrap();
        assert_eq!(pws.dim, 1);
        let v = equality_test(&circle(1.0), &pws, &settings(), 4);
        assert_eq!(v.verdict, Verdict::NotEquivalent);
        assert_eq!(v.reason, VerdictReason::DimensionMismatch);
        assert_eq!((v.d, v.dim_expected), (0, 1));
    }

    #[test]
    fn verdict_survives_a_common_motion() {
        let a = random_curve(2, 11);
        let b = transform(&a, &GroupElement::random_euclidean(12)).unwrap();
        let g = GroupElement::random_euclidean(13);
        let (am, bm) = (transform(&a, &g).unwrap(), transform(&b, &g).unwrap());

        let pws = compute_pws(MapId::EuclidDiff, &b, 7, &settings()).unwrap();
        let pws_m = compute_pws(MapId::EuclidDiff, &bm, 7, &settings()).unwrap();
        let v = equality_test(&a, &pws, &settings(), 21).verdict;
        let vm = equality_test(&am, &pws_m, &settings(), 21).verdict;
        assert_eq!(v, Verdict::Equivalent);
        assert_eq!(v, vm);
    }

    #[test]
    fn ellipse_symmetry_group_is_the_klein_four_group() {
        let report = symmetry_analyze(&ellipse(), 17, &settings()).unwrap();
        assert_eq!(report.classification, SymmetryClass::Finite(4), "{report:?}");
        assert_eq!(report.dim_j, 4);
        assert_eq!(report.element_failures, 0);
        assert_eq!(report.elements.len(), 4);

        // The four motions: identity, both axis reflections, half-turn.
        let mut ids = 0;
        let mut reflections = 0;
        let mut half_turns = 0;
        for e in &report.elements {
            let GroupElement::Euclidean(g) = e else { panic!("wrong group kind") };
            let is_id = (g.c - 1.0).norm() <= 1e-6 && g.s.norm() <= 1e-6;
            match (g.eps, is_id) {
                (1, true) => ids += 1,
                (1, false) => half_turns += 1,
                _ => reflections += 1,
            }
        }
        assert_eq!((ids, reflections, half_turns), (1, 2, 1), "{:?}", report.elements);
    }

    #[test]
    fn recovered_elements_are_closed_under_composition() {
        let report = symmetry_analyze(&ellipse(), 23, &settings()).unwrap();
        let els: Vec<EuclideanElement> = report
            .elements
            .iter()
            .map(|e| match e {
                GroupElement::Euclidean(g) => g.clone(),
                _ => panic!("wrong group kind"),
            })
            .collect();
        assert_eq!(els.len(), 4);
        let dist = |a: &EuclideanElement, b: &EuclideanElement| -> f64 {
            [(a.c - b.c), (a.s - b.s), (a.a - b.a), (a.b - b.b)]
                .iter()
                .map(|z| z.norm())
                .fold((a.eps - b.eps).abs() as f64, f64::max)
        };
        for g in &els {
            for h in &els {
                let gh = g.compose(h);
                let nearest = els.iter().map(|k| dist(&gh, k)).fold(f64::INFINITY, f64::min);
                assert!(nearest <= 1e-8, "composition left the group: {nearest:.2e}");
            }
        }
    }

    #[test]
    fn circle_symmetry_group_is_infinite() {
        let report = symmetry_analyze(&circle(1.0), 29, &settings()).unwrap();
        assert_eq!(report.classification, SymmetryClass::Infinite);
        assert_eq!(report.dim_j, 3);
        assert_eq!(report.dim3, 2);
        assert!(report.elements.is_empty());
    }

    #[test]
    fn generic_conic_reports_its_four_symmetries() {
        // Smooth central conics always carry the Klein four-group even
        // with random complex coefficients.
        let report = symmetry_analyze(&random_curve(2, 88), 31, &settings()).unwrap();
        assert_eq!(report.classification, SymmetryClass::Finite(4), "{report:?}");
        assert_eq!(report.element_failures, 0);
        assert_eq!(report.elements.len(), 4);
    }

    #[test]
    fn infinite_and_finite_routes_agree() {
        for (curve, finite) in [
            (circle(1.0), false),
            (circle(9.0), false),
            (ellipse(), true),
            (random_curve(2, 404), true),
        ] {
            let report = symmetry_analyze(&curve, 37, &settings()).unwrap();
            assert_eq!(report.dim_j == 4, finite, "{report:?}");
            assert_eq!(
                report.dim_j < 4,
                report.dim3 < 3,
                "dimension routes disagree: {report:?}"
            );
        }
    }

    #[test]
    fn verdicts_serialize_stably() {
        let v = EqualityVerdict::new(VerdictReason::MembershipHit, 1, 1, 1);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"verdict\":\"equivalent\""), "{json}");
        assert!(json.contains("\"reason\":\"membership_hit\""), "{json}");
        let back: EqualityVerdict = serde_json::from_str(&json).unwrap();
        assert_eq!(back.verdict, Verdict::Equivalent);

        let inf = serde_json::to_string(&SymmetryClass::Infinite).unwrap();
        assert_eq!(inf, "{\"kind\":\"infinite\"}");
        let fin = serde_json::to_string(&SymmetryClass::Finite(4)).unwrap();
        assert_eq!(fin, "{\"kind\":\"finite\",\"n\":4}");
    }
}
