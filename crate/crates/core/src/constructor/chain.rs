//! Annulus chains A₀, A₁, … with certified coverings f(A_{m−1}) ⊇ A_m.

use serde::{Deserialize, Serialize};

use super::{LoopKind, ScaledParameters, CHAIN_STALLED};
use crate::catalog::MapDescriptor;
use crate::covering::{
    self, bohr_cover, harnack_cover_ln, CoverOptions, CoveringCertificate, Prefer,
};
use crate::error::{Error, Result};
use crate::radial;
use crate::region::{Annulus, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// The starting annulus; nothing to certify.
    Seed,
    Bohr,
    Harnack,
    Direct,
}

/// A certified return to an annulus: f(path[i]) ⊇ path[i+1], path closing up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCertificate {
    pub kind: LoopKind,
    pub path: Vec<Region>,
    pub links: Vec<CoveringCertificate>,
}

impl LoopCertificate {
    pub fn is_certified(&self) -> bool {
        !self.links.is_empty() && self.links.iter().all(|c| c.is_certified())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub index: usize,
    pub annulus: Annulus,
    pub case_tag: CaseTag,
    /// A_m = A(r_m, r_m^{k_m}).
    pub k: f64,
    /// sqrt(ln r_{m−1}) for Harnack steps.
    pub s: Option<f64>,
    /// Certifies f(A_{m−1}) ⊇ A_m, possibly from a sub-annulus of A_{m−1}.
    pub certificate: Option<CoveringCertificate>,
    /// ln r_m / ln r_{m−1}.
    pub gap_exponent: Option<f64>,
    /// Whether the step meets the asymptotic argument's own constants.
    pub lemma_faithful: bool,
    pub notes: Vec<String>,
    pub loops: Vec<LoopCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusChain {
    pub map: String,
    pub params: ScaledParameters,
    pub steps: Vec<ChainStep>,
}

impl AnnulusChain {
    pub fn annuli(&self) -> Vec<Annulus> {
        self.steps.iter().map(|s| s.annulus).collect()
    }

    /// Consecutive coverings certified and radii strictly increasing.
    pub fn is_consistent(&self) -> bool {
        self.steps.windows(2).all(|w| {
            w[1].annulus.ln_r_in > w[0].annulus.ln_r_in
                && w[1].certificate.as_ref().is_some_and(|c| c.is_certified())
        })
    }
}

fn region(a: Annulus) -> Region {
    Region::Annulus(a)
}

fn certify_pair(
    map: &MapDescriptor,
    src: &Region,
    tgt: &Region,
    opts: &CoverOptions,
) -> CoveringCertificate {
    covering::monomial_certificate(map, src, tgt)
        .unwrap_or_else(|| covering::certify_covering(map, src, tgt, opts))
}

/// Certifies a return loop of the given kind on `annulus`. A two-step loop
/// goes through `partner` when given, otherwise it is the self-cover used twice.
pub fn certify_loop(
    map: &MapDescriptor,
    annulus: &Region,
    kind: LoopKind,
    partner: Option<&Region>,
    opts: &CoverOptions,
) -> Result<LoopCertificate> {
    let (path, links) = match (kind, partner) {
        (LoopKind::SelfLoop, _) => {
            let c = certify_pair(map, annulus, annulus, opts);
            (vec![annulus.clone(), annulus.clone()], vec![c])
        }
        (LoopKind::TwoStep, Some(p)) => {
            let a = certify_pair(map, annulus, p, opts);
            let b = certify_pair(map, p, annulus, opts);
            (
                vec![annulus.clone(), p.clone(), annulus.clone()],
                vec![a, b],
            )
        }
        (LoopKind::TwoStep, None) => {
            let c = certify_pair(map, annulus, annulus, opts);
            (vec![annulus.clone(); 3], vec![c.clone(), c])
        }
        (LoopKind::Cycle60, _) => {
            return Err(Error::invalid(
                "60-link cycles are assembled by build_pole_chain",
            ));
        }
    };
    Ok(LoopCertificate { kind, path, links })
}

/// Builds A₀ = A(r0, r0^{k0}) and `m_steps` successors.
///
/// Each step first looks for a radius ρ ∈ (3r, ⅜r^k) with m(ρ) ≤ 1 and, if
/// found, certifies the Bohr-type near/far alternative from A(ρ/3, 8ρ/3) ⊆ A_{m−1}.
/// Otherwise the Harnack-type step is tried, and when neither applies a target
/// is searched for and certified directly.
pub fn build_chain(
    map: &MapDescriptor,
    params: &ScaledParameters,
    m_steps: usize,
    opts: &CoverOptions,
) -> Result<AnnulusChain> {
    build_chain_with(map, params, m_steps, Prefer::Near, opts)
}

pub(crate) fn build_chain_with(
    map: &MapDescriptor,
    params: &ScaledParameters,
    m_steps: usize,
    prefer: Prefer,
    opts: &CoverOptions,
) -> Result<AnnulusChain> {
    params.validate()?;
    if !map.poles.is_finite() {
        return Err(Error::refused(
            CHAIN_STALLED,
            format!("{} has infinitely many poles; annulus chains need finitely many (use build_pole_chain)", map.label),
        ));
    }
    if let crate::catalog::PoleSet::Finite { poles } = &map.poles {
        let far = poles.iter().map(|p| p.at.norm()).fold(0.0, f64::max);
        if params.r0 <= far {
            return Err(Error::invalid(format!(
                "r0 = {} must exceed every pole modulus ({far})",
                params.r0
            )));
        }
    }
    let ln_r0 = params.r0.ln();
    let mut notes = vec![];
    if ln_r0 > 0.0 {
        let ratio = radial::max_modulus_ln(map, ln_r0, 1e-9)?.ln_value / ln_r0;
        if ratio < params.growth_threshold {
            notes.push(format!(
                "ln M(r0)/ln r0 = {ratio:.4} below growth threshold {}",
                params.growth_threshold
            ));
        }
    }
    let seed = Annulus::centered_ln(ln_r0, params.k0 * ln_r0.max(1e-3));
    let steps = vec![ChainStep {
        index: 0,
        annulus: seed,
        case_tag: CaseTag::Seed,
        k: params.k0,
        s: None,
        certificate: None,
        gap_exponent: None,
        lemma_faithful: true,
        notes,
        loops: vec![],
    }];
    let mut chain = AnnulusChain {
        map: map.label.clone(),
        params: params.clone(),
        steps,
    };
    for _ in 0..m_steps {
        grow_chain(&mut chain, map, prefer, opts)?;
    }
    Ok(chain)
}

/// Appends one certified step.
pub(crate) fn grow_chain(
    chain: &mut AnnulusChain,
    map: &MapDescriptor,
    prefer: Prefer,
    opts: &CoverOptions,
) -> Result<()> {
    let last = chain.steps.last().expect("chains start with a seed");
    let step = next_step(
        map,
        &chain.params,
        &last.annulus,
        last.k,
        chain.steps.len(),
        prefer,
        opts,
    )?;
    chain.steps.push(step);
    Ok(())
}

fn next_step(
    map: &MapDescriptor,
    params: &ScaledParameters,
    prev: &Annulus,
    k_prev: f64,
    index: usize,
    prefer: Prefer,
    opts: &CoverOptions,
) -> Result<ChainStep> {
    let ln_r = prev.ln_r_in;
    let ln_big_r = (params.gap_exponent * ln_r).max(ln_r + 0.1);
    let mut notes = vec![];
    let base =
        |annulus: Annulus, case_tag, k, cert: CoveringCertificate, notes: Vec<String>| ChainStep {
            index,
            annulus,
            case_tag,
            k,
            s: None,
            certificate: Some(cert),
            gap_exponent: (ln_r > 0.0).then(|| annulus.ln_r_in / ln_r),
            lemma_faithful: false,
            notes,
            loops: vec![],
        };

    // Case 1: small minimum modulus somewhere in (3r, 3/8 r^k).
    let (lo, hi) = (3f64.ln() + ln_r, (3.0 / 8.0f64).ln() + prev.ln_r_out);
    let trigger = if hi > lo {
        radial::find_small_min_modulus_ln(map, lo, hi, 0.0, 32)?.ln_rho
    } else {
        None
    };
    if let Some(ln_rho) = trigger {
        let r_src = (ln_rho - 3f64.ln()).exp();
        let ln_m_src = radial::max_modulus(map, r_src, 1e-9)?.ln_value;
        let ln_far = (ln_m_src / 10.0).max(2.0 * ln_big_r);
        match bohr_cover(map, r_src, params.c, ln_big_r, ln_far, prefer, opts) {
            Ok(out) => {
                let ln_in = if out.chosen == Prefer::Near {
                    ln_big_r
                } else {
                    ln_far
                };
                let ann = Annulus::centered_ln(ln_in, 5.0 * ln_in);
                notes.push(format!(
                    "trigger rho = e^{ln_rho:.4}; source A({r_src:.4}, {:.4}) inside A_(m-1)",
                    8.0 * r_src
                ));
                if out.preference_miss {
                    notes.push(format!(
                        "preferred {prefer:?} target refused; took the other"
                    ));
                }
                let mut step = base(ann, CaseTag::Bohr, 5.0, out.certificate, notes);
                step.lemma_faithful = out.window_satisfied && ln_in >= 10.0 * ln_r;
                return Ok(step);
            }
            Err(e) => notes.push(format!("Bohr step refused ({e}); trying a direct target")),
        }
    } else {
        match harnack_cover_ln(map, ln_r, k_prev, opts) {
            Ok(cert) if cert.is_certified() => {
                if let Region::Annulus(t) = &cert.target {
                    let mut ann = t.shrink(2.0 * opts.margin_req);
                    ann.closed = true;
                    let s = ln_r.sqrt();
                    let k = k_prev * (1.0 - 12.0 / s);
                    let mut step = base(ann, CaseTag::Harnack, k, cert, notes.clone());
                    step.s = Some(s);
                    step.lemma_faithful = (4.0..=5.0).contains(&k) && ann.ln_r_in >= 10.0 * ln_r;
                    if !params.lemma_faithful || step.lemma_faithful {
                        return Ok(step);
                    }
                    notes.push("Harnack step leaves the [4, 5] exponent band".into());
                }
            }
            Ok(cert) => notes.push(format!(
                "Harnack covering refused: {}",
                cert.reason.unwrap_or_default()
            )),
            Err(e) => notes.push(format!("Harnack step unavailable ({e})")),
        }
    }

    // Direct search over a few natural inner radii.
    let src = region(*prev);
    let ln_m_in = radial::max_modulus_ln(map, prev.ln_r_in, 1e-9)?.ln_value;
    let mut candidates = vec![ln_big_r, prev.ln_r_out, ln_m_in];
    candidates.retain(|c| c.is_finite() && *c > ln_r);
    candidates.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let ks = if params.lemma_faithful {
        vec![params.k0, 4.0]
    } else {
        vec![params.k0, 4.0, 2.0]
    };
    for &ln_in in &candidates {
        for &k in &ks {
            let ann = Annulus::centered_ln(ln_in, k * ln_in);
            let cert = certify_pair(map, &src, &region(ann), opts);
            if cert.is_certified() {
                let mut step = base(ann, CaseTag::Direct, k, cert, notes);
                step.lemma_faithful = false;
                return Ok(step);
            }
        }
    }
    Err(Error::refused(
        CHAIN_STALLED,
        format!(
            "no certifiable successor of A(e^{:.4}, e^{:.4}) at step {index}; {}",
            prev.ln_r_in,
            prev.ln_r_out,
            notes.join("; ")
        ),
    ))
}
