//! Command-line front end. `run` takes argv and returns the process exit code:
//! 0 on success, 1 on usage or parameter errors, 2 when the numerics refused.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{Family, MapDescriptor, MapParams, DEFAULT_PRECISION};
use crate::classify::{classify_orbit, ClassifierParams};
use crate::constructor::{
    build_chain, build_pole_chain, construct_oscillating, construct_slow_point,
    construct_two_sided, feasibility_check, OscillationOptions, ScaledParameters,
};
use crate::covering::{certify_covering, preimage_annulus, CoverOptions};
use crate::distortion::distortion_probe;
use crate::error::{Error, ParamError, Result};
use crate::itinerary::RefineOptions;
use crate::radial::{self, RadialProfile, Spacing};
use crate::region::Region;
use crate::render::{render_escape_classes, GridSpec};
use crate::sequence::SequenceSpec;

pub const PRECISION_ENV: &str = "ESCAPE_LAB_PRECISION";

#[derive(Parser, Debug)]
#[command(
    name = "escape-lab",
    version,
    about = "Covering certificates, orbit constructions and escape-rate maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Catalog family name (see `catalog`).
    #[arg(long)]
    pub map: Option<String>,
    /// JSON object, inline or `@path`, with map parameters and subcommand settings.
    #[arg(long)]
    pub config: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV table next to a JSON report.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Base working precision in bits (default: $ESCAPE_LAB_PRECISION, then the built-in default).
    #[arg(long)]
    pub precision: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; never changes the output.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List families, or describe one map.
    Catalog(Common),
    /// Max/min modulus on circles (CSV).
    Stats(Common),
    /// Certify f(source) ⊇ target, optionally tracing the preimage annulus.
    Cover(Common),
    /// Build an annulus chain.
    Chain(Common),
    /// Slowly escaping point under a rate sequence.
    Slowpoint(Common),
    /// Point in the band aₙ ≤ |fⁿ| ≤ d⁶aₙ.
    Twosided(Common),
    /// Orbit alternating between a bounded annulus and growing ones.
    Oscillate(Common),
    /// Pole discs with island cycles.
    Polechain(Common),
    /// Scan for radii with m(r) > M(r)^c.
    Feasible(Common),
    /// Escape-rate bands of given points (JSON lines).
    Classify(Common),
    /// Class map over a grid (binary PPM).
    Render(Common),
    /// Distortion of orbit pairs on a disc (CSV).
    Probe(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Catalog(c) => ("catalog", c),
            Command::Stats(c) => ("stats", c),
            Command::Cover(c) => ("cover", c),
            Command::Chain(c) => ("chain", c),
            Command::Slowpoint(c) => ("slowpoint", c),
            Command::Twosided(c) => ("twosided", c),
            Command::Oscillate(c) => ("oscillate", c),
            Command::Polechain(c) => ("polechain", c),
            Command::Feasible(c) => ("feasible", c),
            Command::Classify(c) => ("classify", c),
            Command::Render(c) => ("render", c),
            Command::Probe(c) => ("probe", c),
        }
    }
}

/// Everything that determines an output; embedded in every file written.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    /// Subcommand settings with defaults filled in.
    pub settings: Value,
    pub precision_bits: usize,
    pub seed: u64,
}

/// What a subcommand produced.
enum Output {
    Json(Value),
    Text(String),
    Bytes(Vec<u8>),
    Refused {
        reason: String,
        detail: String,
        payload: Option<Value>,
    },
}

fn sv<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn param_err(e: impl std::fmt::Display) -> Error {
    Error::Param(ParamError::Invalid(e.to_string()))
}

fn load_config(raw: Option<&str>) -> Result<Value> {
    let text = match raw {
        None => return Ok(json!({})),
        Some(s) if s.starts_with('@') => std::fs::read_to_string(&s[1..])
            .map_err(|e| param_err(format!("reading config {}: {e}", &s[1..])))?,
        Some(s) => s.to_string(),
    };
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| param_err(format!("config is not valid JSON: {e}")))?;
    if !v.is_object() {
        return Err(param_err("config must be a JSON object"));
    }
    Ok(v)
}

const MAP_KEYS: [&str; 5] = ["lambda", "epsilon", "p", "q", "c"];

/// The family from `--map` (or `"map"` in the config); parameters missing from
/// the config fall back to the family's defaults.
fn resolve_map(flag: Option<&str>, cfg: &Value, keys: &[&str]) -> Result<Option<MapDescriptor>> {
    let name = match flag.or(cfg.get("map").and_then(Value::as_str)) {
        Some(n) => n,
        None => return Ok(None),
    };
    let family: Family = name.parse().map_err(Error::Param)?;
    let mut given = serde_json::Map::new();
    for k in keys {
        if let Some(v) = cfg.get(*k) {
            given.insert(k.to_string(), v.clone());
        }
    }
    let params: MapParams = serde_json::from_value(Value::Object(given)).map_err(param_err)?;
    let defaults = MapDescriptor::simple(family).params;
    let merged = MapParams {
        lambda: params.lambda.or(defaults.lambda),
        epsilon: params.epsilon.or(defaults.epsilon),
        p: if params.p.is_empty() && params.q.is_empty() {
            defaults.p
        } else {
            params.p
        },
        q: params.q,
        c: params.c.or(defaults.c),
    };
    MapDescriptor::new(family, merged).map(Some)
}

fn settings<T: for<'de> Deserialize<'de>>(cfg: &Value) -> Result<T> {
    serde_json::from_value(cfg.clone()).map_err(|e| param_err(format!("config: {e}")))
}

fn need_map(map: &Option<MapDescriptor>) -> Result<&MapDescriptor> {
    map.as_ref().ok_or_else(|| param_err("--map is required"))
}

fn default_precision(flag: Option<usize>) -> Result<usize> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var(PRECISION_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| param_err(format!("{PRECISION_ENV}={s} is not an integer"))),
        Err(_) => Ok(DEFAULT_PRECISION),
    }
}

// Subcommand settings ------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct StatsSettings {
    r: Vec<f64>,
    r_min: f64,
    r_max: f64,
    n: usize,
    spacing: String,
    rel_tol: f64,
}

impl Default for StatsSettings {
    fn default() -> Self {
        StatsSettings {
            r: vec![],
            r_min: 1.0,
            r_max: 100.0,
            n: 16,
            spacing: "log".into(),
            rel_tol: 1e-9,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CoverSettings {
    source: Region,
    target: Region,
    #[serde(default)]
    preimage: bool,
    #[serde(default = "default_boundary_pts")]
    n_boundary_pts: usize,
    #[serde(default)]
    options: CoverOptions,
}

fn default_boundary_pts() -> usize {
    256
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ChainSettings {
    steps: usize,
    #[serde(flatten)]
    params: ScaledParameters,
    cover: CoverOptions,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            steps: 4,
            params: ScaledParameters::default(),
            cover: CoverOptions::default(),
        }
    }
}

fn seq(s: &str) -> SequenceSpec {
    s.parse().expect("built-in sequence")
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct SlowSettings {
    a: SequenceSpec,
    #[serde(rename = "N", alias = "horizon")]
    horizon: usize,
    #[serde(flatten)]
    params: ScaledParameters,
    cover: CoverOptions,
    refine: RefineOptions,
}

impl Default for SlowSettings {
    fn default() -> Self {
        SlowSettings {
            a: seq("sqrt_plus:10"),
            horizon: 30,
            params: ScaledParameters::default(),
            cover: CoverOptions::default(),
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct TwoSidedSettings {
    a: SequenceSpec,
    #[serde(rename = "N", alias = "horizon")]
    horizon: usize,
    d: f64,
    #[serde(rename = "c_growth")]
    c: f64,
    #[serde(rename = "K")]
    growth_k: f64,
    cover: CoverOptions,
    refine: RefineOptions,
}

impl Default for TwoSidedSettings {
    fn default() -> Self {
        TwoSidedSettings {
            a: seq("linear:5"),
            horizon: 20,
            d: 2.0,
            c: 1.0,
            growth_k: 1.0,
            cover: CoverOptions::default(),
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct OscSettings {
    low_bound: f64,
    a: SequenceSpec,
    #[serde(rename = "N", alias = "horizon")]
    horizon: usize,
    #[serde(flatten)]
    opts: OscillationOptions,
    cover: CoverOptions,
    refine: RefineOptions,
}

impl Default for OscSettings {
    fn default() -> Self {
        OscSettings {
            low_bound: 10.0,
            a: seq("linear:1000"),
            horizon: 24,
            opts: OscillationOptions::default(),
            cover: CoverOptions::default(),
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct PoleSettings {
    n_discs: usize,
    cover: CoverOptions,
}

impl Default for PoleSettings {
    fn default() -> Self {
        PoleSettings {
            n_discs: 10,
            cover: CoverOptions::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct FeasSettings {
    r_lo: f64,
    r_hi: f64,
    #[serde(rename = "c_exponent")]
    c: f64,
    n: usize,
}

impl Default for FeasSettings {
    fn default() -> Self {
        FeasSettings {
            r_lo: 1e2,
            r_hi: 1e6,
            c: 0.25,
            n: 200,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ClassifySettings {
    points: Vec<[f64; 2]>,
    #[serde(flatten)]
    params: ClassifierParams,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            points: vec![[0.0, 0.0]],
            params: ClassifierParams::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct RenderSettings {
    re: [f64; 2],
    im: [f64; 2],
    width: usize,
    height: usize,
    #[serde(flatten)]
    params: ClassifierParams,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            re: [-4.0, 4.0],
            im: [-4.0, 4.0],
            width: 200,
            height: 200,
            params: ClassifierParams::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ProbeSettings {
    center: [f64; 2],
    radius: f64,
    n_max: usize,
    n_pairs: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            center: [-10.0, 0.0],
            radius: 0.5,
            n_max: 40,
            n_pairs: 64,
        }
    }
}

// Dispatch -----------------------------------------------------------------

fn refused_or<T>(r: Result<T>, ok: impl FnOnce(T) -> Result<Output>) -> Result<Output> {
    match r {
        Ok(v) => ok(v),
        Err(Error::Refused(rf)) => Ok(Output::Refused {
            reason: rf.reason,
            detail: rf.detail,
            payload: None,
        }),
        Err(e) => Err(e),
    }
}

fn csv_with_config(cfg: &RunConfig, header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = format!(
        "# config: {}\n{header}\n",
        serde_json::to_string(cfg).expect("config serializes")
    );
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn execute(name: &str, common: &Common) -> Result<(RunConfig, Output, Option<String>)> {
    let cfg = load_config(common.config.as_deref())?;
    // `c` is a map parameter for poly_exp; subcommand settings use c_growth / c_exponent.
    let map = resolve_map(common.map.as_deref(), &cfg, &MAP_KEYS)?;
    let precision_bits = default_precision(common.precision)?;
    if precision_bits < 53 {
        return Err(param_err("precision must be at least 53 bits"));
    }
    let mut run = RunConfig {
        command: name.to_string(),
        map: map.clone(),
        settings: json!({}),
        precision_bits,
        seed: common.seed,
    };
    let mut table = None;
    let out = match name {
        "catalog" => match &map {
            None => Output::Json(json!({
                "families": Family::ALL.iter().map(|f| {
                    let m = MapDescriptor::simple(*f);
                    json!({"name": f.name(), "formula": f.formula(), "scale": f.scale(), "entire": m.is_entire(), "defaults": m})
                }).collect::<Vec<_>>()
            })),
            Some(m) => Output::Json(json!({
                "name": m.family.name(), "formula": m.family.formula(), "label": m.label,
                "scale": m.family.scale(), "entire": m.is_entire(), "poles": sv(&m.poles), "descriptor": m,
            })),
        },
        "stats" => {
            let s: StatsSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            let spacing = match s.spacing.as_str() {
                "log" => Spacing::Log,
                "linear" => Spacing::Linear,
                o => return Err(param_err(format!("spacing `{o}` (log|linear)"))),
            };
            let rs = if s.r.is_empty() {
                radial::radii(s.r_min, s.r_max, s.n.max(2), spacing)
            } else {
                s.r.clone()
            };
            if rs.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(param_err("radii must be positive and finite"));
            }
            run.settings = sv(&s);
            let rows: Vec<RadialProfile> = rs
                .iter()
                .map(|r| radial::profile_at(m, *r, s.rel_tol))
                .collect();
            Output::Text(csv_with_config(
                &run,
                RadialProfile::CSV_HEADER,
                rows.iter().map(|p| p.csv_row()),
            ))
        }
        "cover" => {
            let s: CoverSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            run.settings = sv(&s);
            let cert = certify_covering(m, &s.source, &s.target, &s.options);
            if !cert.is_certified() {
                Output::Refused {
                    reason: cert.reason.clone().unwrap_or_else(|| "refused".into()),
                    detail: cert.detail.clone().unwrap_or_default(),
                    payload: Some(sv(&cert)),
                }
            } else if s.preimage {
                let (Region::Annulus(t), Region::Annulus(src)) = (&s.target, &s.source) else {
                    return Err(param_err(
                        "preimage tracing needs annulus source and target",
                    ));
                };
                refused_or(preimage_annulus(m, t, src, s.n_boundary_pts), |b| {
                    Ok(Output::Json(json!({"certificate": cert, "preimage": b})))
                })?
            } else {
                Output::Json(json!({ "certificate": cert }))
            }
        }
        "chain" => {
            let mut s: ChainSettings = settings(&cfg)?;
            s.params.precision.base_bits = precision_bits;
            let m = need_map(&map)?;
            s.params.validate()?;
            run.settings = sv(&s);
            refused_or(build_chain(m, &s.params, s.steps, &s.cover), |c| {
                Ok(Output::Json(sv(&c)))
            })?
        }
        "slowpoint" | "twosided" | "oscillate" => {
            let m = need_map(&map)?;
            let report = match name {
                "slowpoint" => {
                    let mut s: SlowSettings = settings(&cfg)?;
                    s.params.precision.base_bits = precision_bits;
                    s.params.validate()?;
                    run.settings = sv(&s);
                    construct_slow_point(m, &s.a, s.horizon, &s.params, &s.cover, &s.refine)
                }
                "twosided" => {
                    let mut s: TwoSidedSettings = settings(&cfg)?;
                    s.refine.precision.base_bits = precision_bits;
                    run.settings = sv(&s);
                    construct_two_sided(
                        m, &s.a, s.d, s.c, s.horizon, s.growth_k, &s.cover, &s.refine,
                    )
                }
                _ => {
                    let mut s: OscSettings = settings(&cfg)?;
                    s.refine.precision.base_bits = precision_bits;
                    run.settings = sv(&s);
                    construct_oscillating(
                        m,
                        s.low_bound,
                        &s.a,
                        s.horizon,
                        &s.opts,
                        &s.cover,
                        &s.refine,
                    )
                }
            };
            refused_or(report, |r| {
                table = Some(r.to_csv());
                if r.holds() {
                    Ok(Output::Json(sv(&r)))
                } else {
                    Ok(Output::Refused {
                        reason: "verification_failed".into(),
                        detail: "some rows fail at the trace or doubled precision".into(),
                        payload: Some(sv(&r)),
                    })
                }
            })?
        }
        "polechain" => {
            let s: PoleSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            run.settings = sv(&s);
            refused_or(build_pole_chain(m, s.n_discs, &s.cover), |c| {
                if c.all_links_certified() && c.cycles.iter().all(|x| x.certified) {
                    Ok(Output::Json(sv(&c)))
                } else {
                    Ok(Output::Refused {
                        reason: "link_refused".into(),
                        detail: "a disc link or cycle did not certify".into(),
                        payload: Some(sv(&c)),
                    })
                }
            })?
        }
        "feasible" => {
            let s: FeasSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            run.settings = sv(&s);
            let r = feasibility_check(m, s.r_lo, s.r_hi, s.c, s.n)?;
            table = Some(csv_with_config(
                &run,
                crate::constructor::FeasibilityRow::CSV_HEADER,
                r.rows.iter().map(|x| x.csv_row()),
            ));
            Output::Json(sv(&r))
        }
        "classify" => {
            let s: ClassifySettings = settings(&cfg)?;
            let m = need_map(&map)?;
            s.params.validate()?;
            run.settings = sv(&s);
            let cfg_line =
                serde_json::to_string(&json!({ "config": &run })).expect("config serializes");
            let mut lines = vec![cfg_line];
            for p in &s.points {
                let r = classify_orbit(m, Complex64::new(p[0], p[1]), &s.params);
                lines.push(
                    serde_json::to_string(&json!({"z": p, "rate": r})).expect("rate serializes"),
                );
            }
            Output::Text(lines.join("\n") + "\n")
        }
        "render" => {
            let s: RenderSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            let grid = GridSpec::new((s.re[0], s.re[1]), (s.im[0], s.im[1]), s.width, s.height)?;
            run.settings = sv(&s);
            let img = render_escape_classes(m, &grid, &s.params)?;
            let header = vec![format!(
                "config {}",
                serde_json::to_string(&run).expect("config serializes")
            )];
            Output::Bytes(img.to_ppm(&header))
        }
        "probe" => {
            let s: ProbeSettings = settings(&cfg)?;
            let m = need_map(&map)?;
            run.settings = sv(&s);
            let r = distortion_probe(
                m,
                Complex64::new(s.center[0], s.center[1]),
                s.radius,
                s.n_max,
                s.n_pairs,
                common.seed,
            )?;
            let mut text = csv_with_config(
                &run,
                crate::distortion::DistortionRow::CSV_HEADER,
                r.rows.iter().map(|x| x.csv_row()),
            );
            for t in &r.terminated {
                text.push_str(&format!(
                    "# orbit_terminated pair={} n={} reason={}\n",
                    t.pair, t.n, t.reason
                ));
            }
            Output::Text(text)
        }
        _ => unreachable!("clap restricts subcommands"),
    };
    Ok((run, out, table))
}

fn write_out(path: Option<&PathBuf>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(bytes)?;
            o.flush()
        }
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("json serializes");
    s.push(b'\n');
    s
}

/// Parses argv (including the program name) and runs one subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (name, common) = cli.command.parts();
    if let Some(j) = common.jobs {
        // Ignored if a global pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global();
    }
    let (run_cfg, out, table) = match execute(name, common) {
        Ok(x) => x,
        Err(Error::Param(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
        Err(Error::Refused(r)) => {
            eprintln!("refused: {r}");
            return 2;
        }
    };
    let io = |r: std::io::Result<()>| {
        r.map_err(|e| {
            eprintln!("error: writing output: {e}");
        })
    };
    if let Some(t) = &table {
        if let Some(p) = &common.table {
            if io(std::fs::write(p, t)).is_err() {
                return 1;
            }
        }
    }
    let (bytes, code) = match out {
        Output::Json(v) => (
            pretty(&json!({"status": "ok", "config": run_cfg, "result": v})),
            0,
        ),
        Output::Text(s) => (s.into_bytes(), 0),
        Output::Bytes(b) => (b, 0),
        Output::Refused {
            reason,
            detail,
            payload,
        } => {
            eprintln!("refused: {reason}: {detail}");
            let mut v =
                json!({"status": "refused", "reason": reason, "detail": detail, "config": run_cfg});
            if let Some(p) = payload {
                v["result"] = p;
            }
            (pretty(&v), 2)
        }
    };
    if io(write_out(common.out.as_ref(), &bytes)).is_err() {
        return 1;
    }
    code
}
