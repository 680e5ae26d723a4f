//! Covering certificates f(source) ⊇ target, the Bohr and Harnack covering checks,
//! preimage-annulus tracing and the omitted-values constant probe.
//!
//! Two certification routes:
//!
//! * **argument principle** — when the sampled image of the source boundary stays
//!   clear of the target, the number of solutions of f(z) = w in the source is
//!   constant over the target and equals the winding count (outer − inner, plus
//!   poles for disc sources). A count ≥ 1 at the probe points certifies.
//! * **patch cover** — when the boundary image sweeps through the target (exp-type
//!   maps on annuli always do), the target is tiled with small discs and each disc
//!   is covered by the image of a small patch around a Newton preimage, checked
//!   by the same argument on the patch boundary.
//!
//! Both are sampled evidence at a stated resolution, not proofs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::catalog::{ExtEval, Family, MapDescriptor};
use crate::error::{Error, Result};
use crate::ext::ExtComplex;
use crate::radial;
use crate::region::{Annulus, Disc, Placement, Region};

pub const BOUNDARY_HITS_TARGET: &str = "boundary_hits_target";
pub const NO_SEPARATION: &str = "no_separation";
pub const ANALYTICITY_FAILED: &str = "analyticity_precondition_failed";

/// Cap used while sampling curves; the extended-exponent type handles far more than f64.
const SAMPLING_CAP: f64 = 1e12;
const N_PROBES: usize = 16;
const MAX_JUMP: f64 = PI / 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverOptions {
    pub n_samples: usize,
    pub max_samples: usize,
    /// Required boundary margin: log-radius units for annulus targets, radius fractions for discs.
    pub margin_req: f64,
    pub patch_fallback: bool,
    /// Log-polar cell size of the initial target tiling.
    pub patch_sigma: f64,
    pub patch_max_depth: u32,
    pub max_pieces: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            n_samples: 8192,
            max_samples: 1 << 20,
            margin_req: 1e-3,
            patch_fallback: true,
            patch_sigma: 0.25,
            patch_max_depth: 3,
            max_pieces: 400_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    ArgumentPrinciple,
    PatchCover,
    /// Exact image of a centered annulus under z^d.
    Analytic,
}

/// Sampled image of one boundary component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentEvidence {
    pub component: String,
    pub samples: usize,
    /// Smallest distance of the sampled image from the target (negative: it enters the target).
    pub margin: f64,
    /// Winding number of the image curve about each probe point.
    pub windings: Vec<i64>,
    pub max_arg_step: f64,
    /// Largest ln|f| seen on the component.
    pub ln_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringCertificate {
    pub map: String,
    pub source: Region,
    pub target: Region,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<CoverMethod>,
    pub margin: f64,
    pub winding_evidence: Vec<ComponentEvidence>,
    /// Solution counts of f(z) = w at the probe points (argument principle route).
    pub preimage_counts: Vec<i64>,
    pub poles_inside: u32,
    pub samples: usize,
    pub patches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch_margin: Option<f64>,
    pub assumptions: Vec<String>,
}

impl CoveringCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    fn refused(
        map: &MapDescriptor,
        source: &Region,
        target: &Region,
        reason: &str,
        detail: String,
    ) -> Self {
        CoveringCertificate {
            map: map.label.clone(),
            source: source.clone(),
            target: target.clone(),
            verdict: Verdict::Refused,
            reason: Some(reason.to_string()),
            detail: Some(detail),
            method: None,
            margin: f64::NAN,
            winding_evidence: vec![],
            preimage_counts: vec![],
            poles_inside: 0,
            samples: 0,
            patches: 0,
            patch_margin: None,
            assumptions: vec![],
        }
    }

    /// Converts a refusal into an error carrying its reason.
    pub fn into_result(self) -> Result<Self> {
        if self.is_certified() {
            Ok(self)
        } else {
            let reason = self.reason.clone().unwrap_or_else(|| "refused".into());
            Err(Error::refused(
                &reason,
                self.detail.clone().unwrap_or_default(),
            ))
        }
    }
}

/// A circle c + e^{ln_r + iθ}, traversed counter-clockwise.
#[derive(Clone, Copy, Debug)]
struct Circle {
    center: ExtComplex,
    ln_r: f64,
}

impl Circle {
    fn point(&self, theta: f64) -> ExtComplex {
        self.center
            .add(&ExtComplex::from_polar_ln(self.ln_r, theta))
    }
}

fn wrap(a: f64) -> f64 {
    let mut d = a.rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

fn probes(target: &Region) -> Vec<ExtComplex> {
    let offset = PI / N_PROBES as f64;
    (0..N_PROBES)
        .map(|k| {
            let phi = offset + TAU * k as f64 / N_PROBES as f64;
            match target {
                Region::Annulus(a) => {
                    ExtComplex::from_c64(a.center).add(&ExtComplex::from_polar_ln(a.ln_mid(), phi))
                }
                Region::Disc(d) => {
                    ExtComplex::from_c64(d.center + Complex64::from_polar(0.5 * d.radius, phi))
                }
                Region::Cells(c) => {
                    let b = c.boxes[k % c.boxes.len()];
                    ExtComplex::from_c64(b.center())
                }
            }
        })
        .collect()
}

fn sample_images(
    map: &MapDescriptor,
    circle: &Circle,
    n: usize,
) -> std::result::Result<Vec<ExtComplex>, String> {
    let vals: Vec<ExtEval> = (0..n)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| map.eval_ext(&circle.point(TAU * i as f64 / n as f64), SAMPLING_CAP))
        .collect();
    vals.into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            ExtEval::Finite(w) => Ok(w),
            ExtEval::PoleHit(p) => Err(format!("boundary sample {i} hits the pole {p}")),
            ExtEval::Overflow(l) => Err(format!("boundary sample {i} overflows (ln|f| = {l:e})")),
        })
        .collect()
}

/// Margin, windings and largest argument step of a sampled closed image curve.
fn curve_evidence(
    images: &[ExtComplex],
    target: &Region,
    probes: &[ExtComplex],
) -> (f64, Vec<i64>, f64, f64) {
    let margin = images
        .iter()
        .map(|w| -target.slack(w))
        .fold(f64::INFINITY, f64::min);
    let ln_max = images
        .iter()
        .map(|w| w.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let per_probe: Vec<(i64, f64)> = probes
        .par_iter()
        .map(|p| {
            let args: Vec<f64> = images.iter().map(|w| w.sub(p).arg()).collect();
            let mut total = 0.0;
            let mut max_step: f64 = 0.0;
            for i in 0..args.len() {
                let d = wrap(args[(i + 1) % args.len()] - args[i]);
                max_step = max_step.max(d.abs());
                total += d;
            }
            ((total / TAU).round() as i64, max_step)
        })
        .collect();
    let windings = per_probe.iter().map(|x| x.0).collect();
    let max_step = per_probe.iter().map(|x| x.1).fold(0.0, f64::max);
    (margin, windings, max_step, ln_max)
}

fn component_evidence(
    map: &MapDescriptor,
    name: &str,
    circle: &Circle,
    target: &Region,
    probes: &[ExtComplex],
    opts: &CoverOptions,
) -> std::result::Result<ComponentEvidence, String> {
    let mut n = opts.n_samples.max(16);
    let mut prev: Option<f64> = None;
    let mut total = 0;
    loop {
        let images = sample_images(map, circle, n)?;
        total += n;
        let (margin, windings, step, ln_max) = curve_evidence(&images, target, probes);
        // Grids are nested under doubling, so the sampled margin can only shrink:
        // once it is below the requirement more samples will not rescue it.
        let stable = prev.is_some_and(|p| (margin - p).abs() <= 0.01 * p.abs());
        let done =
            margin < opts.margin_req || (stable && step <= MAX_JUMP) || n >= opts.max_samples;
        if done {
            return Ok(ComponentEvidence {
                component: name.to_string(),
                samples: total,
                margin,
                windings,
                max_arg_step: step,
                ln_max,
            });
        }
        prev = Some(margin);
        n *= 2;
    }
}

fn boundary_circles(source: &Region) -> Vec<(&'static str, Circle)> {
    match source {
        Region::Annulus(a) => {
            let c = ExtComplex::from_c64(a.center);
            vec![
                (
                    "outer",
                    Circle {
                        center: c,
                        ln_r: a.ln_r_out,
                    },
                ),
                (
                    "inner",
                    Circle {
                        center: c,
                        ln_r: a.ln_r_in,
                    },
                ),
            ]
        }
        Region::Disc(d) => vec![(
            "circle",
            Circle {
                center: ExtComplex::from_c64(d.center),
                ln_r: d.radius.ln(),
            },
        )],
        Region::Cells(_) => vec![],
    }
}

/// Poles in the closed source; `Err` when a pole sits on (or within exclusion of) the boundary.
fn poles_in_source(map: &MapDescriptor, source: &Region) -> std::result::Result<u32, String> {
    if map.poles.is_empty() {
        return Ok(0);
    }
    let (center, ln_outer) = match source {
        Region::Annulus(a) => (a.center, a.ln_r_out),
        Region::Disc(d) => (d.center, d.radius.ln()),
        Region::Cells(_) => return Err("cell covers are not supported as covering sources".into()),
    };
    if ln_outer > 700.0 {
        return Err("source too large to enumerate poles".into());
    }
    let mut count = 0;
    for p in map.poles.in_window(center, ln_outer.exp() * 1.01 + 1.0) {
        let s = source.slack(&ExtComplex::from_c64(p.at));
        let excl = 1e-9;
        if s.abs() <= excl {
            return Err(format!("pole {} lies on the source boundary", p.at));
        }
        if s > 0.0 {
            match source {
                Region::Annulus(_) => {
                    return Err(format!("pole {} lies inside the annulus source", p.at))
                }
                _ => count += p.order,
            }
        }
    }
    Ok(count)
}

/// Certifies f(source) ⊇ target by sampled boundary evidence.
pub fn certify_covering(
    map: &MapDescriptor,
    source: &Region,
    target: &Region,
    opts: &CoverOptions,
) -> CoveringCertificate {
    if matches!(source, Region::Cells(_)) || matches!(target, Region::Cells(_)) {
        return CoveringCertificate::refused(
            map,
            source,
            target,
            ANALYTICITY_FAILED,
            "cell covers are itinerary targets only".into(),
        );
    }
    let poles = match poles_in_source(map, source) {
        Ok(p) => p,
        Err(e) => return CoveringCertificate::refused(map, source, target, ANALYTICITY_FAILED, e),
    };
    // An open target is covered when every closed sub-region at twice the margin is.
    let work = if target.is_closed() {
        target.clone()
    } else {
        target.shrink(2.0 * opts.margin_req)
    };
    let probes = probes(&work);
    let mut evidence = vec![];
    for (name, circle) in boundary_circles(source) {
        match component_evidence(map, name, &circle, &work, &probes, opts) {
            Ok(e) => evidence.push(e),
            Err(e) => {
                return CoveringCertificate::refused(map, source, target, ANALYTICITY_FAILED, e)
            }
        }
    }
    let margin = evidence
        .iter()
        .map(|e| e.margin)
        .fold(f64::INFINITY, f64::min);
    let samples = evidence.iter().map(|e| e.samples).sum();
    let counts: Vec<i64> = (0..probes.len())
        .map(|k| {
            let outer = evidence[0].windings[k];
            let inner = evidence.get(1).map_or(0, |e| e.windings[k]);
            outer - inner + poles as i64
        })
        .collect();
    let mut cert = CoveringCertificate {
        map: map.label.clone(),
        source: source.clone(),
        target: target.clone(),
        verdict: Verdict::Refused,
        reason: None,
        detail: None,
        method: None,
        margin,
        winding_evidence: evidence,
        preimage_counts: counts.clone(),
        poles_inside: poles,
        samples,
        patches: 0,
        patch_margin: None,
        assumptions: vec![],
    };
    if !target.is_closed() {
        cert.assumptions.push(format!(
            "open target checked on its {:.1e} relative shrink",
            2.0 * opts.margin_req
        ));
    }
    let unresolved = cert
        .winding_evidence
        .iter()
        .any(|e| e.max_arg_step > MAX_JUMP);
    if margin >= opts.margin_req && !unresolved {
        if counts.iter().all(|&c| c >= 1) {
            cert.verdict = Verdict::Certified;
            cert.method = Some(CoverMethod::ArgumentPrinciple);
        } else {
            cert.reason = Some(NO_SEPARATION.into());
            cert.detail = Some(format!(
                "boundary image avoids the target but winds {:?} times around it: no solutions inside",
                counts.iter().min()
            ));
        }
        return cert;
    }
    // The boundary image reaches the target (or sampling could not resolve it).
    let ln_sup = cert
        .winding_evidence
        .iter()
        .map(|e| e.ln_max)
        .fold(f64::NEG_INFINITY, f64::max);
    if poles == 0 && work.ln_outer_extent() > ln_sup + 1e-9 {
        cert.reason = Some(BOUNDARY_HITS_TARGET.into());
        cert.detail = Some(format!(
            "target reaches modulus e^{:.6} beyond the sampled maximum e^{:.6} of |f| on the source",
            work.ln_outer_extent(),
            ln_sup
        ));
        return cert;
    }
    if !opts.patch_fallback {
        cert.reason = Some(BOUNDARY_HITS_TARGET.into());
        cert.detail = Some(format!(
            "boundary margin {margin:.3e} below {:.3e}",
            opts.margin_req
        ));
        return cert;
    }
    match patch_cover(map, source, &work, opts) {
        Ok(stats) => {
            cert.verdict = Verdict::Certified;
            cert.method = Some(CoverMethod::PatchCover);
            cert.patches = stats.patches;
            cert.patch_margin = Some(stats.min_margin);
            cert.samples += stats.samples;
        }
        Err(e) => {
            cert.reason = Some(BOUNDARY_HITS_TARGET.into());
            cert.detail = Some(format!(
                "boundary margin {margin:.3e}; patch cover failed: {e}"
            ));
        }
    }
    cert
}

fn monomial_degree(map: &MapDescriptor) -> Option<usize> {
    let p = &map.params.p;
    let lead = p.last()?;
    let pure = map.family == Family::PolyExp
        && map.params.q.is_empty()
        && *lead == Complex64::new(1.0, 0.0)
        && p[..p.len() - 1]
            .iter()
            .all(|a| *a == Complex64::new(0.0, 0.0));
    (pure && p.len() >= 2).then_some(p.len() - 1)
}

/// Exact certificate for z^d on centered annuli: f(A(a, b)) = A(a^d, b^d).
///
/// `None` when the map is not a monic monomial or the regions are not centered annuli.
pub fn monomial_certificate(
    map: &MapDescriptor,
    source: &Region,
    target: &Region,
) -> Option<CoveringCertificate> {
    let d = monomial_degree(map)? as f64;
    let (Region::Annulus(a), Region::Annulus(b)) = (source, target) else {
        return None;
    };
    if !a.is_centered() || !b.is_centered() {
        return None;
    }
    let tol = 1e-12 * (1.0 + b.ln_r_out.abs());
    let ok = d * a.ln_r_in <= b.ln_r_in + tol && b.ln_r_out <= d * a.ln_r_out + tol;
    let mut cert = CoveringCertificate::refused(
        map,
        source,
        target,
        BOUNDARY_HITS_TARGET,
        format!(
            "image A(e^{:.6}, e^{:.6}) misses part of the target",
            d * a.ln_r_in,
            d * a.ln_r_out
        ),
    );
    cert.margin = (b.ln_r_in - d * a.ln_r_in).min(d * a.ln_r_out - b.ln_r_out);
    if ok {
        cert.verdict = Verdict::Certified;
        cert.reason = None;
        cert.detail = None;
        cert.method = Some(CoverMethod::Analytic);
    }
    Some(cert)
}

/// Shorthand with default options.
pub fn certify(map: &MapDescriptor, source: &Region, target: &Region) -> CoveringCertificate {
    certify_covering(map, source, target, &CoverOptions::default())
}

// ---------------------------------------------------------------------------
// Patch cover

#[derive(Clone, Copy, Debug)]
enum Piece {
    /// Log-polar cell of an annulus target.
    Polar {
        u: f64,
        phi: f64,
        hu: f64,
        hphi: f64,
        depth: u32,
    },
    /// Square cell of a disc target.
    Square { x: f64, y: f64, h: f64, depth: u32 },
}

impl Piece {
    fn depth(&self) -> u32 {
        match self {
            Piece::Polar { depth, .. } | Piece::Square { depth, .. } => *depth,
        }
    }

    /// Covering disc: (center, ln radius).
    fn disc(&self, target: &Region) -> (ExtComplex, f64) {
        match *self {
            Piece::Polar {
                u, phi, hu, hphi, ..
            } => {
                let c = match target {
                    Region::Annulus(a) => a.center,
                    _ => Complex64::new(0.0, 0.0),
                };
                let w = ExtComplex::from_c64(c).add(&ExtComplex::from_polar_ln(u, phi));
                (w, u + hu.hypot(hphi).exp_m1().ln())
            }
            Piece::Square { x, y, h, .. } => (
                ExtComplex::from_c64(Complex64::new(x, y)),
                (h * std::f64::consts::SQRT_2).ln(),
            ),
        }
    }

    fn split(&self) -> [Piece; 4] {
        match *self {
            Piece::Polar {
                u,
                phi,
                hu,
                hphi,
                depth,
            } => {
                let (a, b) = (hu / 2.0, hphi / 2.0);
                [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].map(|(s, t)| Piece::Polar {
                    u: u + s * a,
                    phi: phi + t * b,
                    hu: a,
                    hphi: b,
                    depth: depth + 1,
                })
            }
            Piece::Square { x, y, h, depth } => {
                let a = h / 2.0;
                [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].map(|(s, t)| Piece::Square {
                    x: x + s * a,
                    y: y + t * a,
                    h: a,
                    depth: depth + 1,
                })
            }
        }
    }
}

fn initial_pieces(target: &Region, sigma: f64) -> Vec<Piece> {
    match target {
        Region::Annulus(a) => {
            let n_phi = (TAU / sigma).ceil().max(4.0) as usize;
            let hphi = PI / n_phi as f64;
            let len = a.ln_r_out - a.ln_r_in;
            let n_u = (len / sigma).ceil().max(1.0) as usize;
            let hu = len / (2 * n_u) as f64;
            let mut out = Vec::with_capacity(n_u * n_phi);
            for i in 0..n_u {
                for j in 0..n_phi {
                    out.push(Piece::Polar {
                        u: a.ln_r_in + (2 * i + 1) as f64 * hu,
                        phi: (2 * j + 1) as f64 * hphi,
                        hu,
                        hphi,
                        depth: 0,
                    });
                }
            }
            out
        }
        Region::Disc(d) => {
            let k = 4usize;
            let h = d.radius / k as f64;
            let mut out = vec![];
            for i in 0..2 * k {
                for j in 0..2 * k {
                    let x = d.center.re - d.radius + (2 * i + 1) as f64 * h;
                    let y = d.center.im - d.radius + (2 * j + 1) as f64 * h;
                    // keep squares meeting the disc
                    let dx = ((x - d.center.re).abs() - h).max(0.0);
                    let dy = ((y - d.center.im).abs() - h).max(0.0);
                    if dx.hypot(dy) <= d.radius {
                        out.push(Piece::Square { x, y, h, depth: 0 });
                    }
                }
            }
            out
        }
        Region::Cells(_) => vec![],
    }
}

/// Pieces that actually meet the target (split pieces can poke out of a disc target).
fn piece_meets_target(p: &Piece, target: &Region) -> bool {
    match (p, target) {
        (Piece::Square { x, y, h, .. }, Region::Disc(d)) => {
            let dx = ((x - d.center.re).abs() - h).max(0.0);
            let dy = ((y - d.center.im).abs() - h).max(0.0);
            dx.hypot(dy) <= d.radius
        }
        _ => true,
    }
}

struct PatchStats {
    patches: usize,
    samples: usize,
    min_margin: f64,
}

/// Approximate preimage finder over a source region.
pub struct PreimageSolver<'a> {
    map: &'a MapDescriptor,
    source: Region,
    grid: OnceLock<Vec<(ExtComplex, ExtComplex)>>,
}

impl<'a> PreimageSolver<'a> {
    pub fn new(map: &'a MapDescriptor, source: &Region) -> Self {
        PreimageSolver {
            map,
            source: source.clone(),
            grid: OnceLock::new(),
        }
    }

    fn grid(&self) -> &[(ExtComplex, ExtComplex)] {
        self.grid.get_or_init(|| {
            let (center, ln_lo, ln_hi, n_r, n_t) = match &self.source {
                Region::Annulus(a) => (a.center, a.ln_r_in, a.ln_r_out, 48usize, 256usize),
                Region::Disc(d) => (d.center, (d.radius * 1e-3).ln(), d.radius.ln(), 32, 128),
                Region::Cells(cc) => {
                    let pts: Vec<ExtComplex> = cc
                        .boxes
                        .iter()
                        .flat_map(|b| {
                            (0..16).map(move |k| {
                                let (i, j) = ((k % 4) as f64, (k / 4) as f64);
                                let x = b.x0 + (b.x1 - b.x0) * (i + 0.5) / 4.0;
                                let y = b.y0 + (b.y1 - b.y0) * (j + 0.5) / 4.0;
                                ExtComplex::from_c64(Complex64::new(x, y))
                            })
                        })
                        .collect();
                    return pts
                        .into_par_iter()
                        .filter_map(|z| self.map.eval_ext(&z, SAMPLING_CAP).value().map(|w| (z, w)))
                        .collect();
                }
            };
            let c = ExtComplex::from_c64(center);
            let pts: Vec<ExtComplex> = (0..n_r)
                .flat_map(|i| {
                    let l = ln_lo + (ln_hi - ln_lo) * (i as f64 + 0.5) / n_r as f64;
                    (0..n_t).map(move |j| {
                        c.add(&ExtComplex::from_polar_ln(
                            l,
                            TAU * (j as f64 + 0.5) / n_t as f64,
                        ))
                    })
                })
                .collect();
            pts.into_par_iter()
                .filter_map(|z| self.map.eval_ext(&z, SAMPLING_CAP).value().map(|w| (z, w)))
                .collect()
        })
    }

    /// Newton's method for f(z) = w from `z0`, with step halving.
    pub fn newton(&self, w: &ExtComplex, z0: &ExtComplex) -> Option<ExtComplex> {
        newton_solve(self.map, w, z0)
    }

    /// Grid points whose images are closest to `w` in log-polar distance.
    pub fn seeds(&self, w: &ExtComplex, k: usize) -> Vec<ExtComplex> {
        let (lw, aw) = (w.ln_abs(), w.arg());
        let mut scored: Vec<(f64, usize)> = self
            .grid()
            .iter()
            .enumerate()
            .map(|(i, (_, fz))| ((fz.ln_abs() - lw).abs() + wrap(fz.arg() - aw).abs(), i))
            .collect();
        let k = k.min(scored.len());
        if k == 0 {
            return vec![];
        }
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Vec<(f64, usize)> = scored[..k].to_vec();
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        best.into_iter().map(|(_, i)| self.grid()[i].0).collect()
    }
}

pub fn newton_solve(map: &MapDescriptor, w: &ExtComplex, z0: &ExtComplex) -> Option<ExtComplex> {
    let mut z = *z0;
    let lw = w.ln_abs().max(-700.0);
    let mut res = map.eval_ext(&z, SAMPLING_CAP).value()?.sub(w);
    for _ in 0..100 {
        if res.is_zero() || res.ln_abs() - lw < -13.0 * std::f64::consts::LN_10 {
            return Some(z);
        }
        let d = map.derivative_ext(&z)?;
        if d.is_zero() {
            return None;
        }
        let step = res.div(&d);
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let zn = z.sub(&step.scale(lam));
            if let Some(fzn) = map.eval_ext(&zn, SAMPLING_CAP).value() {
                let rn = fzn.sub(w);
                if rn.ln_abs() < res.ln_abs() || rn.is_zero() {
                    z = zn;
                    res = rn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            // Stagnation at rounding level still counts if the residual is tiny.
            return (res.ln_abs() - lw < -11.0 * std::f64::consts::LN_10).then_some(z);
        }
    }
    (res.ln_abs() - lw < -11.0 * std::f64::consts::LN_10).then_some(z)
}

/// Checks that f maps a disc around `z` over the piece disc B(w_c, t). Returns the margin.
fn certify_patch(
    map: &MapDescriptor,
    source: &Region,
    w_c: &ExtComplex,
    ln_t: f64,
    z: &ExtComplex,
    margin_req: f64,
) -> Option<(f64, usize, ExtComplex, f64)> {
    let d = map.derivative_ext(z)?;
    if d.is_zero() {
        return None;
    }
    let ln_rho = 1.5f64.ln() + ln_t - d.ln_abs();
    if source.place_disc(z, ln_rho + 1e-9) != Placement::Inside {
        return None;
    }
    if !map.poles.is_empty() && map.poles.distance(z.to_c64()) <= 2.0 * ln_rho.exp() {
        return None;
    }
    let circle = Circle {
        center: *z,
        ln_r: ln_rho,
    };
    let mut n = 128;
    let mut total = 0;
    loop {
        let imgs = sample_images(map, &circle, n).ok()?;
        total += n;
        let mut margin = f64::INFINITY;
        let mut wind = 0.0;
        let mut step: f64 = 0.0;
        let args: Vec<f64> = imgs.iter().map(|w| w.sub(w_c).arg()).collect();
        for (i, w) in imgs.iter().enumerate() {
            let rel = (w.sub(w_c).ln_abs() - ln_t).exp() - 1.0;
            margin = margin.min(rel);
            let dd = wrap(args[(i + 1) % n] - args[i]);
            step = step.max(dd.abs());
            wind += dd;
        }
        if margin < margin_req {
            return None;
        }
        if step <= MAX_JUMP || n >= 4096 {
            let w = (wind / TAU).round() as i64;
            return (w >= 1 && step <= MAX_JUMP).then_some((margin, total, *z, ln_rho));
        }
        n *= 2;
    }
}

fn patch_cover(
    map: &MapDescriptor,
    source: &Region,
    target: &Region,
    opts: &CoverOptions,
) -> std::result::Result<PatchStats, String> {
    let solver = PreimageSolver::new(map, source);
    let mut queue: std::collections::VecDeque<Piece> =
        initial_pieces(target, opts.patch_sigma).into();
    let mut stats = PatchStats {
        patches: 0,
        samples: 0,
        min_margin: f64::INFINITY,
    };
    let mut last: Option<ExtComplex> = None;
    let mut processed = 0usize;
    while let Some(piece) = queue.pop_front() {
        processed += 1;
        if processed > opts.max_pieces {
            return Err(format!("piece budget {} exhausted", opts.max_pieces));
        }
        if !piece_meets_target(&piece, target) {
            continue;
        }
        let (w_c, ln_t) = piece.disc(target);
        let mut ok = None;
        // Continuation from the previous piece first, then the best grid seeds.
        let mut tried: Vec<ExtComplex> = vec![];
        let seeds = last
            .into_iter()
            .map(|z| (z, true))
            .chain(std::iter::once((ExtComplex::ZERO, false)));
        for (seed, is_hint) in seeds {
            let candidates: Vec<ExtComplex> = if is_hint {
                vec![seed]
            } else {
                solver.seeds(&w_c, 8)
            };
            for s in candidates {
                let Some(z) = solver.newton(&w_c, &s) else {
                    continue;
                };
                if tried
                    .iter()
                    .any(|t| t.sub(&z).ln_abs() < z.ln_abs().max(0.0) - 25.0)
                {
                    continue;
                }
                tried.push(z);
                if let Some(res) = certify_patch(map, source, &w_c, ln_t, &z, opts.margin_req) {
                    ok = Some(res);
                    break;
                }
            }
            if ok.is_some() {
                break;
            }
        }
        match ok {
            Some((m, samples, z, _)) => {
                stats.patches += 1;
                stats.samples += samples;
                stats.min_margin = stats.min_margin.min(m);
                last = Some(z);
            }
            None if piece.depth() < opts.patch_max_depth => {
                queue.extend(piece.split());
            }
            None => {
                return Err(format!(
                    "no certified patch for the target piece around w = {} (ln|w| = {:.6}) at depth {}",
                    w_c.to_c64(),
                    w_c.ln_abs(),
                    piece.depth()
                ));
            }
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Bohr-type dichotomy

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefer {
    Near,
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrOutcome {
    pub chosen: Prefer,
    pub preference_miss: bool,
    pub certificate: CoveringCertificate,
    pub near: CoveringCertificate,
    pub far: CoveringCertificate,
    /// Radius where ln m(ρ) ≤ c ln M(ρ) was observed.
    pub hypothesis_rho: f64,
    pub window_satisfied: bool,
    pub assumptions: Vec<String>,
}

/// f(A(r, 8r)) covers A(R, R^5) or A(R̃, R̃^5).
pub fn bohr_cover(
    map: &MapDescriptor,
    r: f64,
    c: f64,
    ln_big_r: f64,
    ln_big_r_tilde: f64,
    prefer: Prefer,
    opts: &CoverOptions,
) -> Result<BohrOutcome> {
    if !(r > 0.0 && c > 0.0) {
        return Err(Error::invalid("bohr_cover needs r > 0 and c > 0"));
    }
    let mut rho = None;
    let n = 32;
    for i in 0..n {
        let ln_rho = (2.0 * r).ln() + (i as f64 + 0.5) / n as f64 * 2f64.ln();
        let lm = radial::min_modulus_ln(map, ln_rho, 1e-9)?.ln_value;
        let l_max = radial::max_modulus_ln(map, ln_rho, 1e-9)?.ln_value;
        if lm <= c * l_max {
            rho = Some(ln_rho.exp());
            break;
        }
    }
    let Some(rho) = rho else {
        return Err(Error::refused(
            "hypothesis_unverified",
            format!(
                "no sampled rho in ({}, {}) with log m <= {c} log M",
                2.0 * r,
                4.0 * r
            ),
        ));
    };
    let ln_m_r = radial::max_modulus(map, r, 1e-9)?.ln_value;
    let window_satisfied =
        ln_big_r > 2f64.ln() && 10.0 * ln_big_r < ln_big_r_tilde && ln_big_r_tilde < ln_m_r / 10.0;
    let mut assumptions =
        vec!["c*L < 1/4 (L is an absolute constant that cannot be computed)".to_string()];
    if !window_satisfied {
        assumptions.push(format!(
            "parameter window 2 < R, R^10 < R~ < M(r)^(1/10) not met (ln R = {ln_big_r:.4}, ln R~ = {ln_big_r_tilde:.4}, ln M(r)/10 = {:.4}); coverings certified directly",
            ln_m_r / 10.0
        ));
    }
    let source = Region::Annulus(Annulus::centered(r, 8.0 * r));
    let near_t = Region::Annulus(Annulus::centered_ln(ln_big_r, 5.0 * ln_big_r));
    let far_t = Region::Annulus(Annulus::centered_ln(ln_big_r_tilde, 5.0 * ln_big_r_tilde));
    let near = certify_covering(map, &source, &near_t, opts);
    let far = certify_covering(map, &source, &far_t, opts);
    let (chosen, miss) = match (prefer, near.is_certified(), far.is_certified()) {
        (Prefer::Near, true, _) => (Prefer::Near, false),
        (Prefer::Near, false, true) => (Prefer::Far, true),
        (Prefer::Far, _, true) => (Prefer::Far, false),
        (Prefer::Far, true, false) => (Prefer::Near, true),
        (_, false, false) => {
            return Err(Error::refused(
                "neither_certified",
                format!(
                    "near: {}; far: {}",
                    near.detail.clone().unwrap_or_default(),
                    far.detail.clone().unwrap_or_default()
                ),
            ))
        }
    };
    let mut certificate = if chosen == Prefer::Near {
        near.clone()
    } else {
        far.clone()
    };
    certificate.assumptions.extend(assumptions.iter().cloned());
    Ok(BohrOutcome {
        chosen,
        preference_miss: miss,
        certificate,
        near,
        far,
        hypothesis_rho: rho,
        window_satisfied,
        assumptions,
    })
}

// ---------------------------------------------------------------------------
// Harnack-type bounds

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackRow {
    pub ln_rho: f64,
    pub ln_min: f64,
    /// (1 - 2π/s) ln M(ρ)
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub ln_r: f64,
    pub k: f64,
    pub s: f64,
    pub rows: Vec<HarnackRow>,
    pub violations: Vec<HarnackRow>,
}

fn harnack_hypotheses(map: &MapDescriptor, ln_r: f64, k: f64, n_rho: usize) -> Result<f64> {
    if !(k > 1.0) || !(ln_r > 0.0) {
        return Err(Error::invalid("harnack checks need r > 1 and k > 1"));
    }
    let s = ln_r.sqrt();
    let need = (2.0 * PI).max(4.0 / (k - 1.0));
    if s <= need {
        return Err(Error::refused(
            "hypothesis_unverified",
            format!("s = sqrt(ln r) = {s:.4} must exceed max(2pi, 4/(k-1)) = {need:.4}"),
        ));
    }
    let ln_m = radial::max_modulus_ln(map, ln_r, 1e-9)?.ln_value;
    if ln_m <= k * ln_r {
        return Err(Error::refused(
            "hypothesis_unverified",
            format!("M(r) = e^{ln_m:.4} does not exceed r^k = e^{:.4}", k * ln_r),
        ));
    }
    let (lo, hi) = (ln_r * (1.0 + 1.0 / s), ln_r * (k - 1.0 / s));
    for i in 0..n_rho {
        let l = lo + (hi - lo) * (i as f64 + 0.5) / n_rho as f64;
        let m = radial::min_modulus_ln(map, l, 1e-9)?;
        if m.ln_value <= 0.0 {
            return Err(Error::refused(
                "hypothesis_unverified",
                format!("m(rho) = e^{:.4} <= 1 at rho = e^{l:.4}", m.ln_value),
            ));
        }
    }
    Ok(s)
}

/// ln m(ρ) ≥ (1 − 2π/s) ln M(ρ) on [r^{1+2/s}, r^{k−2/s}], s = sqrt(ln r).
pub fn harnack_bound_check(
    map: &MapDescriptor,
    r: f64,
    k: f64,
    n_rho: usize,
) -> Result<HarnackReport> {
    harnack_bound_check_ln(map, r.ln(), k, n_rho)
}

pub fn harnack_bound_check_ln(
    map: &MapDescriptor,
    ln_r: f64,
    k: f64,
    n_rho: usize,
) -> Result<HarnackReport> {
    let s = harnack_hypotheses(map, ln_r, k, n_rho.max(8))?;
    let (lo, hi) = (ln_r * (1.0 + 2.0 / s), ln_r * (k - 2.0 / s));
    let n = n_rho.max(2);
    let mut rows = vec![];
    for i in 0..n {
        let l = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let ln_min = radial::min_modulus_ln(map, l, 1e-9)?.ln_value;
        let bound = (1.0 - 2.0 * PI / s) * radial::max_modulus_ln(map, l, 1e-9)?.ln_value;
        let ok = ln_min >= bound - 1e-9 * bound.abs() && bound > 0.0;
        rows.push(HarnackRow {
            ln_rho: l,
            ln_min,
            bound,
            ok,
        });
    }
    let violations = rows.iter().filter(|r| !r.ok).cloned().collect();
    Ok(HarnackReport {
        ln_r,
        k,
        s,
        rows,
        violations,
    })
}

/// f(A(r^{1+2/s}, r^{k−2/s})) ⊇ A(R, R^{k(1−12/s)}) with R = M(r^{1+2/s}).
pub fn harnack_cover(
    map: &MapDescriptor,
    r: f64,
    k: f64,
    opts: &CoverOptions,
) -> Result<CoveringCertificate> {
    harnack_cover_ln(map, r.ln(), k, opts)
}

pub fn harnack_cover_ln(
    map: &MapDescriptor,
    ln_r: f64,
    k: f64,
    opts: &CoverOptions,
) -> Result<CoveringCertificate> {
    let s = harnack_hypotheses(map, ln_r, k, 32)?;
    let exponent = k * (1.0 - 12.0 / s);
    if exponent <= 1.0 {
        return Err(Error::refused(
            "hypothesis_unverified",
            format!("target exponent k(1-12/s) = {exponent:.4} <= 1; needs s > 12k/(k-1)"),
        ));
    }
    let (lo, hi) = (ln_r * (1.0 + 2.0 / s), ln_r * (k - 2.0 / s));
    let ln_big_r = radial::max_modulus_ln(map, lo, 1e-9)?.ln_value;
    let source = Region::Annulus(Annulus::centered_ln(lo, hi));
    // The inner circle of the source maps onto |w| <= R, touching the target's inner edge.
    let target = Region::Annulus(Annulus::centered_ln(ln_big_r, exponent * ln_big_r).open());
    let mut cert = certify_covering(map, &source, &target, opts);
    cert.assumptions.push(format!(
        "s = {s:.6}, ln R = {ln_big_r:.6}, target exponent {exponent:.6}"
    ));
    Ok(cert)
}

// ---------------------------------------------------------------------------
// Preimage annulus tracing

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedCurve {
    #[serde(with = "crate::catalog::cplx::vec")]
    pub vertices: Vec<Complex64>,
    /// Number of trips around the target circle needed to close the path.
    pub loops: usize,
    pub max_residual: f64,
    pub winding: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedAnnulus {
    pub inner: TracedCurve,
    pub outer: TracedCurve,
}

fn trace_circle(
    map: &MapDescriptor,
    center: Complex64,
    ln_radius: f64,
    search: &Annulus,
    n: usize,
) -> Result<TracedCurve> {
    let search_r = Region::Annulus(*search);
    let solver = PreimageSolver::new(map, &search_r);
    let cw = ExtComplex::from_c64(center);
    let w_at = |t: f64| cw.add(&ExtComplex::from_polar_ln(ln_radius, TAU * t));
    let w0 = w_at(0.0);
    let start = solver
        .seeds(&w0, 16)
        .into_iter()
        .filter_map(|s| solver.newton(&w0, &s))
        .find(|z| search_r.contains(z))
        .ok_or_else(|| {
            Error::refused(
                "continuation_failure",
                "no starting preimage in the search annulus",
            )
        })?;
    let mut verts = vec![start.to_c64()];
    let mut z = start;
    let max_loops = 12;
    let mut max_res: f64 = 0.0;
    for lp in 0..max_loops {
        for j in 1..=n {
            let (t0, t1) = ((j - 1) as f64 / n as f64, j as f64 / n as f64);
            // subdivide the step until Newton tracks the branch
            let mut sub = 1usize;
            let next = loop {
                let mut zz = z;
                let mut ok = true;
                for q in 1..=sub {
                    let w = w_at(t0 + (t1 - t0) * q as f64 / sub as f64);
                    match solver.newton(&w, &zz) {
                        Some(v) if v.sub(&zz).ln_abs() < zz.ln_abs().max(0.0) + 0.0 => zz = v,
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    break Some(zz);
                }
                sub *= 2;
                if sub > 1024 {
                    break None;
                }
            };
            let Some(next) = next else {
                return Err(Error::refused(
                    "continuation_failure",
                    format!("Newton diverged near t = {t1:.6} on loop {lp}"),
                ));
            };
            if !search_r.contains(&next) {
                return Err(Error::refused(
                    "nonunique_branch_detected",
                    format!(
                        "continuation left the search annulus at z = {}",
                        next.to_c64()
                    ),
                ));
            }
            let w = w_at(t1);
            let fz = map
                .eval_ext(&next, SAMPLING_CAP)
                .value()
                .expect("finite on a converged point");
            let res = (fz.sub(&w).ln_abs() - w.ln_abs()).exp();
            max_res = max_res.max(res);
            z = next;
            if j < n {
                verts.push(z.to_c64());
            }
        }
        let closed = z.sub(&start).ln_abs() < (1.0 + start.ln_abs().exp()).ln() + (1e-7f64).ln();
        if closed {
            let c = search.center;
            let mut total = 0.0;
            for i in 0..verts.len() {
                let a = (verts[i] - c).arg();
                let b = (verts[(i + 1) % verts.len()] - c).arg();
                total += wrap(b - a);
            }
            let winding = (total / TAU).round() as i64;
            if winding.abs() != 1 {
                return Err(Error::refused(
                    "nonunique_branch_detected",
                    format!("traced boundary winds {winding} times about the center"),
                ));
            }
            return Ok(TracedCurve {
                vertices: verts,
                loops: lp + 1,
                max_residual: max_res,
                winding,
            });
        }
        verts.push(z.to_c64());
    }
    Err(Error::refused(
        "nonunique_branch_detected",
        format!("path did not close after {max_loops} loops (monodromy)"),
    ))
}

/// Traces ∂B for the component B of f^{-1}(target) inside `search`.
pub fn preimage_annulus(
    map: &MapDescriptor,
    target: &Annulus,
    search: &Annulus,
    n_boundary_pts: usize,
) -> Result<TracedAnnulus> {
    let n = n_boundary_pts.max(16);
    let inner = trace_circle(map, target.center, target.ln_r_in, search, n)?;
    let outer = trace_circle(map, target.center, target.ln_r_out, search, n)?;
    Ok(TracedAnnulus { inner, outer })
}

// ---------------------------------------------------------------------------
// Omitted-values constant probe

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlProbe {
    pub l_emp: f64,
    pub samples: usize,
    pub g_z0_abs: f64,
    pub theta_max: f64,
}

/// Empirical exponent of |g(z)| ≤ (|g(z0)| + 2)^L for g = (f − w1)/(w2 − w1) on the mean circle.
pub fn bl_constant_probe(
    map: &MapDescriptor,
    w1: Complex64,
    w2: Complex64,
    annulus: &Annulus,
    z0_angle: f64,
    n_samples: usize,
) -> Result<BlProbe> {
    if annulus.ln_r_out - annulus.ln_r_in < 2f64.ln() - 1e-12 {
        return Err(Error::invalid("annulus ratio must be at least 2"));
    }
    if w1 == w2 {
        return Err(Error::invalid("w1 and w2 must differ"));
    }
    let n = n_samples.max(64);
    let source = Region::Annulus(*annulus);
    poles_in_source(map, &source).map_err(|e| Error::refused("omission_check_failed", e))?;
    let (ew1, ew2) = (ExtComplex::from_c64(w1), ExtComplex::from_c64(w2));
    let scale = ew2.sub(&ew1);
    let g = |z: &ExtComplex| -> Option<ExtComplex> {
        Some(map.eval_ext(z, SAMPLING_CAP).value()?.sub(&ew1).div(&scale))
    };
    // Zero counts of g and g - 1 by the argument principle, plus a sampled distance check.
    let c = ExtComplex::from_c64(annulus.center);
    for (name, a) in [("0", ExtComplex::ZERO), ("1", ExtComplex::from_real(1.0))] {
        let mut count = 0i64;
        for (sgn, ln_r) in [(1i64, annulus.ln_r_out), (-1, annulus.ln_r_in)] {
            let vals: Option<Vec<ExtComplex>> = (0..n)
                .map(|i| {
                    g(&c.add(&ExtComplex::from_polar_ln(ln_r, TAU * i as f64 / n as f64)))
                        .map(|v| v.sub(&a))
                })
                .collect();
            let vals = vals.ok_or_else(|| {
                Error::refused("omission_check_failed", "g not finite on the boundary")
            })?;
            if vals.iter().any(|v| v.is_zero()) {
                return Err(Error::refused(
                    "omission_check_failed",
                    format!("g takes the value {name} on the boundary"),
                ));
            }
            let args: Vec<f64> = vals.iter().map(|v| v.arg()).collect();
            let total: f64 = (0..n).map(|i| wrap(args[(i + 1) % n] - args[i])).sum();
            count += sgn * (total / TAU).round() as i64;
        }
        if count != 0 {
            return Err(Error::refused(
                "omission_check_failed",
                format!("g takes the value {name} {count} times in the annulus"),
            ));
        }
    }
    let ln_mid = annulus.ln_mid();
    let z0 = c.add(&ExtComplex::from_polar_ln(ln_mid, z0_angle));
    let g0 = g(&z0).ok_or_else(|| Error::refused("omission_check_failed", "g(z0) not finite"))?;
    let g0_abs = g0.ln_abs().exp();
    let denom = (g0_abs + 2.0).ln();
    let eps_hat = 1e-15;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let t = TAU * i as f64 / n as f64;
        if let Some(v) = g(&c.add(&ExtComplex::from_polar_ln(ln_mid, t))) {
            let l = (v.ln_abs().exp() + eps_hat).ln() / denom;
            if l > best.0 {
                best = (l, t);
            }
        }
    }
    Ok(BlProbe {
        l_emp: best.0,
        samples: n,
        g_z0_abs: g0_abs,
        theta_max: best.1,
    })
}

/// Convenience: the disc region B(center, radius).
pub fn disc(center: Complex64, radius: f64) -> Region {
    Region::Disc(Disc::new(center, radius).expect("positive radius"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, MapParams};
    use proptest::prelude::*;

    fn fast() -> CoverOptions {
        CoverOptions {
            n_samples: 1024,
            ..CoverOptions::default()
        }
    }

    fn ann(a: f64, b: f64) -> Region {
        Region::annulus(a, b)
    }

    #[test]
    fn squares_cover_annuli() {
        let sq = MapDescriptor::monomial(2);
        let c = certify_covering(&sq, &ann(1.0, 2.0), &ann(1.5, 3.5), &fast());
        assert!(c.is_certified(), "{c:?}");
        assert_eq!(c.method, Some(CoverMethod::ArgumentPrinciple));
        assert!(c.preimage_counts.iter().all(|&n| n == 2));
    }

    #[test]
    fn cube_does_not_reach_far_target() {
        let cube = MapDescriptor::monomial(3);
        let c = certify_covering(&cube, &ann(1.0, 2.0), &ann(9.0, 100.0), &fast());
        assert!(!c.is_certified());
        assert_eq!(c.reason.as_deref(), Some(NO_SEPARATION));
    }

    #[test]
    fn exp_covers_by_patches() {
        let e = MapDescriptor::exp(1.0);
        let c = certify_covering(&e, &ann(1.0, 8.0), &ann(3.0, 243.0), &fast());
        assert!(c.is_certified(), "{:?} {:?}", c.reason, c.detail);
        assert_eq!(c.method, Some(CoverMethod::PatchCover));
        assert!(c.patches > 0);
        // |exp| < e^8 on A(1, 8): a target reaching e^9 cannot be covered.
        let far = certify_covering(&e, &ann(1.0, 8.0), &ann(3.0, 9f64.exp()), &fast());
        assert!(!far.is_certified());
        assert_eq!(far.reason.as_deref(), Some(BOUNDARY_HITS_TARGET));
    }

    #[test]
    fn pole_discs_cover_neighbourhoods_of_infinity() {
        let ht = MapDescriptor::simple(Family::HalfTan);
        let src = disc(Complex64::new(PI / 2.0, 0.0), 0.25);
        let tgt = disc(Complex64::new(1.5 * PI + PI, 0.0), 0.25);
        let c = certify_covering(&ht, &src, &tgt, &fast());
        assert!(c.is_certified(), "{c:?}");
        assert_eq!(c.poles_inside, 1);
        // Near the origin the image of the disc boundary is in the way.
        let near = certify_covering(&ht, &src, &disc(Complex64::new(0.0, 0.0), 0.5), &fast());
        assert!(!near.is_certified());
    }

    #[test]
    fn annulus_with_pole_is_refused() {
        let sp = MapDescriptor::simple(Family::SinPole);
        let c = certify_covering(&sp, &ann(2.0, 4.0), &ann(1.0, 2.0), &fast());
        assert_eq!(c.reason.as_deref(), Some(ANALYTICITY_FAILED));
    }

    #[test]
    fn bohr_examples() {
        let e = MapDescriptor::exp(1.0);
        let near = bohr_cover(&e, 4.0, 0.5, 3f64.ln(), 1e6f64.ln(), Prefer::Near, &fast()).unwrap();
        assert_eq!(near.chosen, Prefer::Near);
        assert!(near.certificate.is_certified());
        assert!(!near.window_satisfied);
        let far = bohr_cover(&e, 4.0, 0.5, 3f64.ln(), 1e6f64.ln(), Prefer::Far, &fast()).unwrap();
        assert!(far.certificate.is_certified());
        assert!(far.chosen == Prefer::Far || far.preference_miss);
        let p = MapDescriptor::new(Family::PolyExp, MapParams::poly(&[1e10, 0.0, 1.0])).unwrap();
        let err =
            bohr_cover(&p, 1.0, 0.5, 3f64.ln(), 1e6f64.ln(), Prefer::Near, &fast()).unwrap_err();
        assert_eq!(err.reason(), Some("hypothesis_unverified"));
    }

    #[test]
    fn harnack_examples() {
        let mut p = vec![0.0; 41];
        p[40] = 1.0;
        let z40 = MapDescriptor::new(Family::PolyExp, MapParams::poly(&p)).unwrap();
        let rep = harnack_bound_check(&z40, 50f64.exp(), 5.0, 16).unwrap();
        assert!(rep.violations.is_empty());
        for row in &rep.rows {
            assert!((row.ln_min - 40.0 * row.ln_rho).abs() < 1e-6 * row.ln_min);
        }
        let e = MapDescriptor::exp(1.0);
        let err = harnack_bound_check(&e, 50f64.exp(), 5.0, 16).unwrap_err();
        assert_eq!(err.reason(), Some("hypothesis_unverified"));
        let sixth = MapDescriptor::new(
            Family::PolyExp,
            MapParams::poly(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let rep = harnack_bound_check(&sixth, 45f64.exp(), 5.0, 16).unwrap();
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn harnack_cover_for_quintic() {
        let z5 = MapDescriptor::monomial(5);
        let c = harnack_cover_ln(&z5, 300.0, 4.0, &fast()).unwrap();
        assert!(c.is_certified(), "{c:?}");
        // Small r makes the target exponent negative.
        let err = harnack_cover(&z5, 10.0, 4.0, &fast()).unwrap_err();
        assert_eq!(err.reason(), Some("hypothesis_unverified"));
    }

    #[test]
    fn square_root_preimages() {
        let sq = MapDescriptor::monomial(2);
        let t = preimage_annulus(
            &sq,
            &Annulus::centered(4.0, 16.0),
            &Annulus::centered(1.0, 8.0),
            256,
        )
        .unwrap();
        for v in &t.inner.vertices {
            assert!((v.norm() - 2.0).abs() < 1e-9);
        }
        for v in &t.outer.vertices {
            assert!((v.norm() - 4.0).abs() < 1e-9);
        }
        assert_eq!(t.inner.loops, 2);
        assert_eq!(t.inner.winding.abs(), 1);
        let cube = MapDescriptor::monomial(3);
        let t = preimage_annulus(
            &cube,
            &Annulus::centered(8.0, 27.0),
            &Annulus::centered(1.0, 4.0),
            256,
        )
        .unwrap();
        assert!(t
            .outer
            .vertices
            .iter()
            .all(|v| (v.norm() - 3.0).abs() < 1e-9));
        let e = MapDescriptor::exp(1.0);
        let tgt = Annulus::centered(2f64.exp() * 1.1, 3f64.exp() * 0.9);
        let err = preimage_annulus(&e, &tgt, &Annulus::centered(2.0, 3.0), 256).unwrap_err();
        assert_eq!(err.reason(), Some("nonunique_branch_detected"));
    }

    #[test]
    fn omitted_values_probe() {
        let five = MapDescriptor::new(Family::PolyExp, MapParams::poly(&[5.0])).unwrap();
        let a = Annulus::centered(1.0, 4.0);
        let p = bl_constant_probe(
            &five,
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            &a,
            0.0,
            256,
        )
        .unwrap();
        assert!((p.l_emp - 5f64.ln() / 7f64.ln()).abs() < 1e-12);
        let id = MapDescriptor::monomial(1);
        let p = bl_constant_probe(
            &id,
            Complex64::new(-10.0, 0.0),
            Complex64::new(10.0, 0.0),
            &a,
            0.0,
            256,
        )
        .unwrap();
        assert!(p.l_emp.is_finite());
        let err = bl_constant_probe(
            &id,
            Complex64::new(2.0, 0.0),
            Complex64::new(10.0, 0.0),
            &a,
            0.0,
            256,
        )
        .unwrap_err();
        assert_eq!(err.reason(), Some("omission_check_failed"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monomial_oracle(d in 2usize..7, r in 0.5f64..3.0, w in 1.3f64..4.0, a in -0.5f64..1.5, b in 0.05f64..1.5) {
            let big_r = r * w;
            let (lo, hi) = (d as f64 * r.ln(), d as f64 * big_r.ln());
            let t_in = lo + a * (hi - lo);
            let t_out = t_in + b * (hi - lo);
            let near = |x: f64| (x - lo).abs() < 0.01 || (x - hi).abs() < 0.01;
            prop_assume!(!near(t_in) && !near(t_out));
            let truth = t_in >= lo && t_out <= hi;
            let c = certify_covering(
                &MapDescriptor::monomial(d),
                &Region::annulus(r, big_r),
                &Region::Annulus(Annulus::centered_ln(t_in, t_out)),
                &fast(),
            );
            prop_assert_eq!(c.is_certified(), truth, "{:?}", c.detail);
        }

        #[test]
        fn certificates_survive_doubling(d in 2usize..5, r in 0.5f64..2.0, a in 0.05f64..0.4, b in 0.1f64..0.5) {
            let big_r = 2.0 * r;
            let (lo, hi) = (d as f64 * r.ln(), d as f64 * big_r.ln());
            let t = Region::Annulus(Annulus::centered_ln(lo + a * (hi - lo), lo + (a + b) * (hi - lo)));
            let m = MapDescriptor::monomial(d);
            let s = Region::annulus(r, big_r);
            let c1 = certify_covering(&m, &s, &t, &CoverOptions { n_samples: 512, ..fast() });
            let c2 = certify_covering(&m, &s, &t, &CoverOptions { n_samples: 1024, ..fast() });
            if c1.is_certified() {
                prop_assert!(c2.is_certified());
                prop_assert!(c2.margin <= c1.margin + 1e-12);
            }
        }
    }
}
