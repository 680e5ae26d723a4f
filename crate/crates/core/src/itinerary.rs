//! Points whose orbits visit a prescribed sequence of regions.
//!
//! Refinement runs forward through the targets. Each surviving cell of E₀ carries
//! its center orbit and the derivative of fⁿ at the center; a cell is kept at
//! level n when a disc enclosing fⁿ(cell) lies inside Eₙ. Cells whose enclosure
//! straddles the boundary are split, and when the derivative is so large that
//! plain bisection would need hundreds of halvings, the split jumps straight to
//! the deep sub-cells around the linearised preimage of the target.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, LOG2_E};

use crate::catalog::{EvalKind, Family, MapDescriptor};
use crate::covering::{self, CoverOptions, CoveringCertificate};
use crate::error::{Error, Result};
use crate::ext::ExtComplex;
use crate::hp::HpComplex;
use crate::region::{Placement, Region};

pub const EXHAUSTED: &str = "exhausted";
pub const PRECISION_OVERFLOW: &str = "precision_overflow";

/// Regions E₀..E_N with certified coverings f(Eₙ) ⊇ Eₙ₊₁.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSequence {
    pub targets: Vec<Region>,
    pub covering_certs: Vec<CoveringCertificate>,
}

impl TargetSequence {
    pub fn new(targets: Vec<Region>, covering_certs: Vec<CoveringCertificate>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("target sequence needs at least E_0"));
        }
        if covering_certs.len() + 1 != targets.len() {
            return Err(Error::invalid(format!(
                "{} targets need {} covering certificates, got {}",
                targets.len(),
                targets.len() - 1,
                covering_certs.len()
            )));
        }
        if let Some((i, c)) = covering_certs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_certified())
        {
            return Err(Error::invalid(format!(
                "covering {i} -> {} is not certified ({})",
                i + 1,
                c.reason.as_deref().unwrap_or("refused")
            )));
        }
        if targets.iter().any(|t| !t.is_closed()) {
            return Err(Error::invalid("itinerary targets must be closed"));
        }
        Ok(TargetSequence {
            targets,
            covering_certs,
        })
    }

    /// Certifies each consecutive pair; identical pairs are certified once.
    pub fn certify(map: &MapDescriptor, targets: Vec<Region>, opts: &CoverOptions) -> Result<Self> {
        let mut certs: Vec<CoveringCertificate> =
            Vec::with_capacity(targets.len().saturating_sub(1));
        for w in targets.windows(2) {
            let known = certs
                .iter()
                .find(|c| c.source == w[0] && c.target == w[1])
                .cloned();
            let cert = match known {
                Some(c) => c,
                None => covering::monomial_certificate(map, &w[0], &w[1])
                    .unwrap_or_else(|| covering::certify_covering(map, &w[0], &w[1], opts))
                    .into_result()?,
            };
            certs.push(cert);
        }
        Self::new(targets, certs)
    }

    pub fn horizon(&self) -> usize {
        self.targets.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Enclosure radius |Dfⁿ(c)|·(cell radius).
    Heuristic,
    /// Enclosure radius propagated through per-family bounds on sup|f'| over discs.
    Bounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecisionSchedule {
    pub base_bits: usize,
    pub cap_bits: usize,
}

impl Default for PrecisionSchedule {
    fn default() -> Self {
        PrecisionSchedule {
            base_bits: 128,
            cap_bits: 16384,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    pub mode: RefineMode,
    pub precision: PrecisionSchedule,
    /// Survivors kept per level.
    pub beam_width: usize,
    /// Split rounds per level before giving up.
    pub max_passes: usize,
    /// Cells examined per split round.
    pub max_queue: usize,
    /// Relative inward shrink applied to every target.
    pub target_shrink: f64,
    /// Dilation used by the a-posteriori check.
    pub verify_slack: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            mode: RefineMode::Heuristic,
            precision: PrecisionSchedule::default(),
            beam_width: 24,
            max_passes: 64,
            max_queue: 256,
            target_shrink: 1e-9,
            verify_slack: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub n: usize,
    pub survivors: usize,
    pub evaluated: usize,
    pub precision_bits: usize,
    /// Largest ln|f'| along surviving center orbits at this step.
    pub max_ln_deriv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub n: usize,
    pub ln_abs: f64,
    pub abs: f64,
    /// Depth inside the (dilated) target; positive means inside.
    pub slack: f64,
    pub inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub precision_bits: usize,
    pub dilation: f64,
    pub rows: Vec<VerifyRow>,
    pub all_inside: bool,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.inside).map(|r| r.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub mode: RefineMode,
    pub levels: Vec<LevelStats>,
    pub zeta: HpComplex,
    pub precision_bits: usize,
    pub verification: VerifyReport,
    /// The same check at twice the precision.
    pub reverification: VerifyReport,
}

/// Orbit of fⁿ(ζ) at the given precision checked against each target dilated by `slack`.
pub fn verify_itinerary(
    map: &MapDescriptor,
    zeta: &HpComplex,
    seq: &TargetSequence,
    slack: f64,
    precision_bits: usize,
) -> VerifyReport {
    let dilated: Vec<Region> = seq
        .targets
        .iter()
        .map(|t| t.dilate(slack.max(0.0)))
        .collect();
    let mut rows = Vec::with_capacity(dilated.len());
    let mut z = zeta.with_precision(precision_bits);
    for (n, t) in dilated.iter().enumerate() {
        if n > 0 {
            let r = map.evaluate_capped(&z, precision_bits, f64::MAX);
            match r.kind {
                EvalKind::Finite => z = r.value.expect("finite value"),
                _ => {
                    rows.push(VerifyRow {
                        n,
                        ln_abs: r.log_magnitude,
                        abs: f64::INFINITY,
                        slack: f64::NEG_INFINITY,
                        inside: false,
                    });
                    break;
                }
            }
        }
        let w = z.to_ext();
        let s = t.slack(&w);
        let ln_abs = w.ln_abs();
        rows.push(VerifyRow {
            n,
            ln_abs,
            abs: ln_abs.exp(),
            slack: s,
            inside: s >= 0.0,
        });
    }
    let all_inside = rows.len() == dilated.len() && rows.iter().all(|r| r.inside);
    VerifyReport {
        precision_bits,
        dilation: slack,
        rows,
        all_inside,
    }
}

// ---------------------------------------------------------------------------
// enclosures

/// ln sup |f'| over the disc B(z, e^{ln_rho}); +inf when no bound is available.
fn ln_derivative_bound(map: &MapDescriptor, z: &ExtComplex, ln_rho: f64) -> f64 {
    let rho = ln_rho.exp();
    let c = z.to_c64();
    if !(c.re.is_finite() && c.im.is_finite()) || !rho.is_finite() {
        return f64::INFINITY;
    }
    let t = c.norm() + rho;
    let ln_add = |a: f64, b: f64| a.max(b) + (-(a - b).abs()).exp().ln_1p();
    // ln cosh(y) for y >= 0
    let ln_cosh = |y: f64| y + (-2.0 * y).exp().ln_1p() - LN_2;
    let lam = || map.params.lambda.unwrap_or(Complex64::new(1.0, 0.0)).norm();
    let b = match map.family {
        Family::ExpScaled => lam().ln() + c.re + rho,
        Family::FatouBaker | Family::ExpShift => ln_add(0.0, -c.re + rho),
        Family::SineShift => ln_add(0.0, ln_cosh(c.im.abs() + rho)),
        Family::BergweilerBaker => ln_add(2f64.ln(), c.re + rho),
        Family::QuarterCos => {
            // Positive Taylor coefficients: |f'(w)| <= f'(|w|).
            let s = ExtComplex::from_real(t);
            map.apply_derivative(&s, 64).ln_abs()
        }
        Family::SinPole => {
            let eps = map.params.epsilon.unwrap_or_default().norm();
            let gap = (c - Complex64::new(std::f64::consts::PI, 0.0)).norm() - rho;
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            ln_add(
                lam().ln() + ln_cosh(c.im.abs() + rho),
                eps.ln() - 2.0 * gap.ln(),
            )
        }
        Family::HalfTan => {
            // |cos w| >= |cos c| - rho cosh(|Im c| + rho)
            let lower = c.cos().norm() - rho * (c.im.abs() + rho).cosh();
            if !(lower > 0.0) {
                return f64::INFINITY;
            }
            -LN_2 - 2.0 * lower.ln()
        }
        Family::PolyExp => {
            let poly = |coef: &[Complex64], deriv: bool| -> f64 {
                coef.iter()
                    .enumerate()
                    .map(|(k, a)| {
                        if deriv {
                            if k == 0 {
                                0.0
                            } else {
                                k as f64 * a.norm() * t.powi(k as i32 - 1)
                            }
                        } else {
                            a.norm() * t.powi(k as i32)
                        }
                    })
                    .sum()
            };
            let dp = poly(&map.params.p, true);
            if map.params.q.is_empty() {
                dp.ln()
            } else {
                let cc = map.params.c.unwrap_or_default();
                let growth = (cc * c).re + cc.norm() * rho;
                let inner = poly(&map.params.q, true) + cc.norm() * poly(&map.params.q, false);
                ln_add(dp.ln(), inner.ln() + growth)
            }
        }
    };
    // outward rounding
    b + 1e-12 * (1.0 + b.abs())
}

#[derive(Clone, Debug)]
struct Cell {
    center: HpComplex,
    ln_h: f64,
    /// Image of the center after `level` steps.
    image: HpComplex,
    /// Dfⁿ at the center.
    deriv: ExtComplex,
    /// Bounded-mode enclosure radius (log).
    ln_rho_bounded: f64,
    ln_derivs: Vec<f64>,
}

impl Cell {
    fn ln_rho(&self, mode: RefineMode) -> f64 {
        match mode {
            RefineMode::Heuristic => self.ln_h + 0.5 * LN_2 + self.deriv.ln_abs(),
            RefineMode::Bounded => self.ln_rho_bounded,
        }
    }
}

struct Engine<'a> {
    map: &'a MapDescriptor,
    mode: RefineMode,
    guide: Vec<Option<ExtComplex>>,
}

impl Engine<'_> {
    /// Fresh cell with its center orbit advanced `level` steps; `None` on pole/overflow.
    fn cell(&self, center: HpComplex, ln_h: f64, level: usize, bits: usize) -> Option<Cell> {
        let center = center.with_precision(bits);
        let mut c = Cell {
            image: center.clone(),
            center,
            ln_h,
            deriv: ExtComplex::from_real(1.0),
            ln_rho_bounded: ln_h + 0.5 * LN_2,
            ln_derivs: Vec::with_capacity(level),
        };
        for _ in 0..level {
            self.advance(&mut c, bits)?;
        }
        Some(c)
    }

    fn advance(&self, c: &mut Cell, bits: usize) -> Option<()> {
        let ze = c.image.to_ext();
        let d = self.map.derivative_ext(&ze)?;
        if self.mode == RefineMode::Bounded {
            c.ln_rho_bounded += ln_derivative_bound(self.map, &ze, c.ln_rho_bounded);
        }
        let r = self.map.evaluate_capped(&c.image, bits, f64::MAX);
        if r.kind != EvalKind::Finite {
            return None;
        }
        c.image = r.value.expect("finite value");
        c.deriv = c.deriv.mul(&d);
        c.ln_derivs.push(d.ln_abs());
        if !c.deriv.ln_abs().is_finite() || c.deriv.is_zero() {
            return None;
        }
        Some(())
    }

    /// Sub-cell re-centred on the linearised preimage of the guide point, small
    /// enough that its enclosure sits well inside the target.
    fn recentre(&self, c: &Cell, target: &Region, level: usize, bits: usize) -> Option<Cell> {
        let g = self.guide.get(level).copied().flatten()?;
        let delta = g.sub(&c.image.to_ext()).div(&c.deriv);
        let dm = delta.to_c64();
        let off = dm.re.abs().max(dm.im.abs());
        let h = c.ln_h.exp();
        if !(off < h) {
            return None;
        }
        let want = c.ln_h - (c.ln_rho(self.mode) - (guide_scale(target, &g) - 4f64.ln())).max(0.0);
        let ln_h2 = want.min((h - off).ln());
        self.cell(
            c.center.add(&HpComplex::from_ext(&delta, bits)),
            ln_h2,
            level,
            bits,
        )
    }

    fn split(&self, c: &Cell, target: &Region, level: usize, bits: usize) -> Vec<Cell> {
        let ln_rho = c.ln_rho(self.mode);
        let w = c.image.to_ext();
        let (anchor, ln_scale) = match self.guide.get(level).copied().flatten() {
            Some(g) => (g, guide_scale(target, &g)),
            None => anchor_point(target, &w),
        };
        let delta = anchor.sub(&w).div(&c.deriv);
        let h = c.ln_h.exp();
        let dm = delta.to_c64();
        let in_cell = dm.re.is_finite() && dm.re.abs().max(dm.im.abs()) <= c.ln_h.exp();
        let gap = ln_rho - ln_scale;
        // Refuse to split below the working precision.
        let floor = c.center.to_ext().ln_abs().max(0.0) - (bits as f64 - 16.0) * LN_2;
        if c.ln_h - LN_2 < floor {
            return vec![];
        }
        let mut out = vec![];
        let guided = self.guide.get(level).copied().flatten().is_some();
        if in_cell && (guided || gap > 6.0 * LN_2) {
            let k = ((gap / LN_2).ceil() - 1.0).max(1.0);
            let ln_h2 = (c.ln_h - k * LN_2).max(floor);
            let h2 = ln_h2.exp();
            let base = c.center.add(&HpComplex::from_ext(&delta, bits));
            for j in -1i32..=1 {
                for i in -1i32..=1 {
                    let off = Complex64::new(2.0 * h2 * i as f64, 2.0 * h2 * j as f64);
                    out.push((base.add(&HpComplex::from_c64(off, bits)), ln_h2));
                }
            }
        } else {
            let q = 0.5 * h;
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                let off = Complex64::new(sx * q, sy * q);
                out.push((c.center.add(&HpComplex::from_c64(off, bits)), c.ln_h - LN_2));
            }
        }
        out.into_iter()
            .filter_map(|(z, lh)| self.cell(z, lh, level, bits))
            .collect()
    }
}

/// Deepest point of the target near `w`, and ln of its distance to the boundary.
fn anchor_point(target: &Region, w: &ExtComplex) -> (ExtComplex, f64) {
    match target {
        Region::Annulus(a) => {
            let c = ExtComplex::from_c64(a.center);
            let v = w.sub(&c);
            let dir = if v.is_zero() { 0.0 } else { v.arg() };
            let hw = 0.5 * (a.ln_r_out - a.ln_r_in);
            (
                c.add(&ExtComplex::from_polar_ln(a.ln_mid(), dir)),
                a.ln_mid() + (-(-hw).exp_m1()).ln(),
            )
        }
        Region::Disc(d) => (ExtComplex::from_c64(d.center), d.radius.ln()),
        Region::Cells(cc) => {
            let z = w.to_c64();
            let b = cc
                .boxes
                .iter()
                .min_by(|a, b| (a.center() - z).norm().total_cmp(&(b.center() - z).norm()))
                .expect("nonempty cell cover");
            (ExtComplex::from_c64(b.center()), b.half_width().ln())
        }
    }
}

/// ln of the distance from a guide point to the target boundary (roughly).
fn guide_scale(target: &Region, g: &ExtComplex) -> f64 {
    match target {
        Region::Annulus(a) => {
            let s = target.slack(g).max(1e-12);
            g.sub(&ExtComplex::from_c64(a.center)).ln_abs() + (-(-s).exp_m1()).ln()
        }
        Region::Disc(d) => (target.slack(g).max(1e-12) * d.radius).ln(),
        Region::Cells(_) => anchor_point(target, g).1,
    }
}

/// Approximate orbit g₀..g_N with f(gₙ) = gₙ₊₁, pulled back from the deepest point of E_N.
///
/// Entries are `None` below the first level where no preimage could be found.
fn backward_guide(map: &MapDescriptor, targets: &[Region]) -> Vec<Option<ExtComplex>> {
    let n = targets.len();
    let mut guide = vec![None; n];
    let last = &targets[n - 1];
    let start = match last {
        Region::Annulus(a) => {
            ExtComplex::from_c64(a.center).add(&ExtComplex::from_polar_ln(a.ln_mid(), 0.25))
        }
        _ => anchor_point(last, &ExtComplex::from_c64(Complex64::new(0.0, 0.0))).0,
    };
    guide[n - 1] = Some(start);
    let mut w = start;
    for k in (0..n - 1).rev() {
        let solver = covering::PreimageSolver::new(map, &targets[k]);
        let best = solver
            .seeds(&w, 16)
            .into_iter()
            .filter_map(|s| solver.newton(&w, &s))
            .map(|z| (targets[k].slack(&z), z))
            .filter(|(s, _)| *s > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((_, z)) => {
                guide[k] = Some(z);
                w = z;
            }
            None => break,
        }
    }
    guide
}

/// Initial cover of E₀ by squares.
fn initial_cells(e0: &Region) -> Result<Vec<(Complex64, f64)>> {
    let grid = |center: Complex64, half: f64, fine: f64| -> Vec<(Complex64, f64)> {
        let mut g = ((2.0 * half / fine).ceil() as usize).clamp(9, 129);
        if g % 2 == 0 {
            g += 1;
        }
        let h = half / g as f64;
        let mid = (g / 2) as f64;
        let mut v = vec![];
        for j in 0..g {
            for i in 0..g {
                let off = Complex64::new((i as f64 - mid) * 2.0 * h, (j as f64 - mid) * 2.0 * h);
                v.push((center + off, h));
            }
        }
        v
    };
    match e0 {
        Region::Annulus(a) => {
            let (ri, ro) = (a.r_in(), a.r_out());
            if !ro.is_finite() {
                return Err(Error::invalid(
                    "E_0 must be a bounded region of moderate size",
                ));
            }
            Ok(grid(a.center, ro, 0.5 * (ro - ri)))
        }
        Region::Disc(d) => Ok(grid(d.center, d.radius, d.radius)),
        Region::Cells(c) => Ok(c
            .boxes
            .iter()
            .map(|b| (b.center(), b.half_width()))
            .collect()),
    }
}

fn order_by_slack(cells: &mut Vec<Cell>, target: &Region) {
    let mut keyed: Vec<(f64, Cell)> = cells
        .drain(..)
        .map(|c| (target.slack(&c.image.to_ext()), c))
        .collect();
    // stable: ties keep creation order
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    cells.extend(keyed.into_iter().map(|(_, c)| c));
}

/// Cells nearest the guide point first; by slack when there is no guide.
fn order_cells(
    cells: &mut Vec<Cell>,
    target: &Region,
    guide: Option<ExtComplex>,
    mode: RefineMode,
) {
    let Some(g) = guide else {
        return order_by_slack(cells, target);
    };
    // distance in units of the enclosure radius: cells whose image disc holds the guide come first
    let mut keyed: Vec<(f64, Cell)> = cells
        .drain(..)
        .map(|c| (c.image.to_ext().sub(&g).ln_abs() - c.ln_rho(mode), c))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.extend(keyed.into_iter().map(|(_, c)| c));
}

/// Finds ζ with fⁿ(ζ) ∈ Eₙ for n = 0..N.
pub fn refine_point(
    map: &MapDescriptor,
    seq: &TargetSequence,
    opts: &RefineOptions,
) -> Result<(HpComplex, RefinementTrace)> {
    let targets: Vec<Region> = seq
        .targets
        .iter()
        .map(|t| t.shrink(opts.target_shrink))
        .collect();
    let guide = backward_guide(map, &targets);
    let eng = Engine {
        map,
        mode: opts.mode,
        guide,
    };
    let sched = opts.precision;
    let mut bits = sched.base_bits.max(64);
    let mut levels = vec![];
    let mut accum = 0.0f64;

    let mut survivors: Vec<Cell> = initial_cells(&targets[0])?
        .into_iter()
        .filter_map(|(z, h)| eng.cell(HpComplex::from_c64(z, bits), h.ln(), 0, bits))
        .collect();

    for (n, target) in targets.iter().enumerate() {
        if n > 0 {
            // Precision grows with the accumulated expansion of the previous step,
            // measured along the guide orbit when there is one (survivors that
            // have not been filtered yet can sit where |f'| is enormous).
            let along_guide = eng.guide[n - 1]
                .and_then(|g| map.derivative_ext(&g))
                .map(|d| d.ln_abs());
            let step = along_guide.unwrap_or_else(|| {
                survivors
                    .iter()
                    .filter_map(|c| map.derivative_ext(&c.image.to_ext()).map(|d| d.ln_abs()))
                    .fold(0.0f64, f64::max)
            });
            accum += step.max(0.0);
            let center_bits = survivors
                .iter()
                .map(|c| {
                    ((c.center.to_ext().ln_abs().max(0.0) - c.ln_h) * LOG2_E).ceil() as usize + 32
                })
                .max()
                .unwrap_or(0);
            let want = (sched.base_bits + (LOG2_E * accum).ceil() as usize).max(center_bits);
            if want > sched.cap_bits {
                return Err(Error::refused(
                    PRECISION_OVERFLOW,
                    format!("level {n} needs {want} bits, cap is {}", sched.cap_bits),
                ));
            }
            if want > bits {
                bits = want;
            }
        }
        let mut queue: Vec<Cell> = if n == 0 {
            std::mem::take(&mut survivors)
        } else {
            std::mem::take(&mut survivors)
                .into_par_iter()
                .filter_map(|c| {
                    if c.center.precision() + 32 < bits {
                        eng.cell(c.center, c.ln_h, n, bits)
                    } else {
                        let mut c = c;
                        eng.advance(&mut c, bits).map(|_| c)
                    }
                })
                .collect()
        };
        if eng.guide[n].is_some() {
            let extra: Vec<Cell> = queue
                .par_iter()
                .filter_map(|c| eng.recentre(c, target, n, bits))
                .collect();
            queue = extra.into_iter().chain(queue).collect();
        }
        let mut evaluated = queue.len();
        let mut accepted: Vec<Cell> = vec![];
        let mut leftovers: Vec<Cell> = vec![];
        for _ in 0..opts.max_passes {
            if queue.is_empty() || accepted.len() >= opts.beam_width {
                break;
            }
            let placed: Vec<(Placement, Cell)> = queue
                .into_par_iter()
                .map(|c| (target.place_disc(&c.image.to_ext(), c.ln_rho(opts.mode)), c))
                .collect();
            let mut undecided = vec![];
            for (p, c) in placed {
                match p {
                    Placement::Inside => accepted.push(c),
                    Placement::Disjoint => {}
                    Placement::Undecided => undecided.push(c),
                }
            }
            order_cells(&mut undecided, target, eng.guide[n], opts.mode);
            undecided.truncate(opts.max_queue);
            let children: Vec<Vec<Cell>> = undecided
                .par_iter()
                .map(|c| eng.split(c, target, n, bits))
                .collect();
            leftovers = undecided;
            queue = children.into_iter().flatten().collect();
            evaluated += queue.len();
        }
        if accepted.is_empty() && opts.mode == RefineMode::Heuristic {
            // Last resort: cells whose center image lies inside.
            accepted = leftovers
                .into_iter()
                .chain(queue)
                .filter(|c| target.contains(&c.image.to_ext()))
                .collect();
        }
        if accepted.is_empty() {
            return Err(Error::refused(
                EXHAUSTED,
                format!(
                    "no surviving cells at level {n} (target {})",
                    seq.targets[n].describe()
                ),
            ));
        }
        order_cells(&mut accepted, target, eng.guide[n], opts.mode);
        accepted.truncate(opts.beam_width);
        let max_ln_deriv = if n == 0 {
            0.0
        } else {
            accepted
                .iter()
                .filter_map(|c| c.ln_derivs.get(n - 1).copied())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        levels.push(LevelStats {
            n,
            survivors: accepted.len(),
            evaluated,
            precision_bits: bits,
            max_ln_deriv,
        });
        survivors = accepted;
    }

    // Best-slack candidate that passes both checks.
    let last = targets.last().expect("nonempty");
    order_by_slack(&mut survivors, last);
    let mut first_fail = None;
    for c in &survivors {
        let v = verify_itinerary(map, &c.center, seq, opts.verify_slack, bits);
        if !v.all_inside {
            first_fail.get_or_insert(v.first_failure());
            continue;
        }
        let v2 = verify_itinerary(map, &c.center, seq, opts.verify_slack, 2 * bits);
        if !v2.all_inside {
            first_fail.get_or_insert(v2.first_failure());
            continue;
        }
        let zeta = c.center.clone();
        let trace = RefinementTrace {
            mode: opts.mode,
            levels,
            zeta: zeta.clone(),
            precision_bits: bits,
            verification: v,
            reverification: v2,
        };
        return Ok((zeta, trace));
    }
    Err(Error::refused(
        EXHAUSTED,
        format!(
            "{} final cells, none verified a posteriori (first failure at n = {:?})",
            survivors.len(),
            first_fail.flatten()
        ),
    ))
}

/// Whether a single cell (no subdivision) stays enclosed in every target.
pub fn cell_survives(
    map: &MapDescriptor,
    seq: &TargetSequence,
    center: Complex64,
    half_width: f64,
    mode: RefineMode,
    bits: usize,
) -> bool {
    let eng = Engine {
        map,
        mode,
        guide: vec![],
    };
    let Some(mut c) = eng.cell(HpComplex::from_c64(center, bits), half_width.ln(), 0, bits) else {
        return false;
    };
    for (n, t) in seq.targets.iter().enumerate() {
        if n > 0 && eng.advance(&mut c, bits).is_none() {
            return false;
        }
        if t.place_disc(&c.image.to_ext(), c.ln_rho(mode)) != Placement::Inside {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MapParams;
    use crate::region::Annulus;
    use proptest::prelude::*;

    fn square_chain(n: usize) -> (MapDescriptor, TargetSequence) {
        let sq = MapDescriptor::monomial(2);
        let targets = (0..=n)
            .map(|k| {
                let p = 2f64.powi(k as i32);
                Region::Annulus(Annulus::centered_ln(p * 2f64.ln(), p * 3f64.ln()))
            })
            .collect();
        let seq = TargetSequence::certify(&sq, targets, &CoverOptions::default()).unwrap();
        (sq, seq)
    }

    #[test]
    fn square_chain_verification() {
        let (sq, seq) = square_chain(4);
        let rep = verify_itinerary(
            &sq,
            &HpComplex::from_c64(Complex64::new(2.5, 0.0), 128),
            &seq,
            0.0,
            128,
        );
        assert!(rep.all_inside);
        assert!(rep.rows.iter().all(|r| r.slack > 0.0));
        let rep = verify_itinerary(
            &sq,
            &HpComplex::from_c64(Complex64::new(1.9, 0.0), 128),
            &seq,
            0.0,
            128,
        );
        assert_eq!(rep.first_failure(), Some(0));
    }

    #[test]
    fn square_chain_refines() {
        let (sq, seq) = square_chain(4);
        let (z, trace) = refine_point(&sq, &seq, &RefineOptions::default()).unwrap();
        assert!(trace.verification.all_inside && trace.reverification.all_inside);
        let r = z.abs_f64();
        assert!((2.0..=3.0).contains(&r), "{r}");
        assert!(trace.levels.iter().all(|l| l.survivors > 0));
    }

    #[test]
    fn empty_chain_returns_center() {
        let e = MapDescriptor::exp(1.0);
        let d = Region::disc(Complex64::new(0.5, -0.25), 0.1);
        let seq = TargetSequence::new(vec![d], vec![]).unwrap();
        let (z, _) = refine_point(&e, &seq, &RefineOptions::default()).unwrap();
        assert_eq!(z.to_c64(), Complex64::new(0.5, -0.25));
    }

    #[test]
    fn uncertified_sequences_are_rejected() {
        let sq = MapDescriptor::monomial(2);
        let a = Region::annulus(2.0, 3.0);
        let b = Region::annulus(100.0, 200.0);
        let err =
            TargetSequence::certify(&sq, vec![a.clone(), b], &CoverOptions::default()).unwrap_err();
        assert!(err.reason().is_some());
        assert!(TargetSequence::new(vec![a.clone(), a], vec![]).is_err());
    }

    #[test]
    fn exp_self_covering_chain() {
        let e = MapDescriptor::exp(1.0);
        let a0 = Region::annulus(1.5, 7.59);
        let seq = TargetSequence::certify(&e, vec![a0; 7], &CoverOptions::default()).unwrap();
        let (z, trace) = refine_point(&e, &seq, &RefineOptions::default()).unwrap();
        assert!(trace.reverification.all_inside);
        let again = refine_point(&e, &seq, &RefineOptions::default()).unwrap().0;
        assert_eq!(z, again, "refinement must be deterministic");
        let bounded = RefineOptions {
            mode: RefineMode::Bounded,
            ..Default::default()
        };
        let (_, tb) = refine_point(&e, &seq, &bounded).unwrap();
        assert!(tb.verification.all_inside);
    }

    #[test]
    fn derivative_bounds_dominate_samples() {
        let maps = [
            MapDescriptor::exp(1.0),
            MapDescriptor::simple(Family::SineShift),
            MapDescriptor::simple(Family::FatouBaker),
            MapDescriptor::simple(Family::BergweilerBaker),
            MapDescriptor::simple(Family::QuarterCos),
            MapDescriptor::simple(Family::HalfTan),
            MapDescriptor::new(
                Family::PolyExp,
                MapParams::poly_exp(&[1.0, 0.0, 2.0], &[0.5, 1.0], 0.7),
            )
            .unwrap(),
        ];
        for m in &maps {
            for &(c, rho) in &[
                (Complex64::new(0.3, 0.2), 0.1f64),
                (Complex64::new(2.0, -1.0), 0.5),
                (Complex64::new(-3.0, 4.0), 1.0),
            ] {
                let b = ln_derivative_bound(m, &ExtComplex::from_c64(c), rho.ln());
                for k in 0..64 {
                    let w = c + Complex64::from_polar(rho, k as f64 * std::f64::consts::TAU / 64.0);
                    if let Some(d) = m.derivative_ext(&ExtComplex::from_c64(w)) {
                        assert!(
                            d.ln_abs() <= b + 1e-9,
                            "{} at {w}: {} > {b}",
                            m.family,
                            d.ln_abs()
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bounded_survivors_survive_heuristically(x in 2.05f64..2.95, y in -0.3f64..0.3, lh in -12.0f64..-4.0) {
            let (sq, seq) = square_chain(3);
            let c = Complex64::new(x, y);
            let b = cell_survives(&sq, &seq, c, lh.exp(), RefineMode::Bounded, 128);
            let h = cell_survives(&sq, &seq, c, lh.exp(), RefineMode::Heuristic, 128);
            prop_assert!(!b || h);
        }
    }
}
