//! Batch front end: model and symbol file formats, the four subcommands and
//! their reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::forward_symbols_tol;
use crate::elastic::{forward_orders_elastic, CMatrix3};
use crate::geometry::{
    level_set_curvature_profile, mean_curvature_jet, mean_curvature_normal_derivatives, profile_derivative_fd,
    CurvatureSpectrum,
};
use crate::inversion::{
    acoustic_recover_jets, elastic_recover_jets, CurvatureHandling, InversionError, InversionOptions, RecoveryReport,
    SymbolSample, SymbolSamples,
};
use crate::jetcalc::Jet;
use crate::medium::{
    AcousticModel, AcousticSideJet, Covector, ElasticModel, ElasticSideJet, InterfaceGeometry, MediumError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{context}: parse error at line {line}, column {column}: {message}")]
    Parse { context: String, line: usize, column: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{code}: {message}")]
    Math { code: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Math { .. } => 3,
            _ => 2,
        }
    }

    /// Machine-readable error object written to stderr.
    pub fn to_json(&self) -> String {
        let code = match self {
            CliError::Io { .. } => "IoError",
            CliError::Parse { .. } => "ParseError",
            CliError::Usage(_) => "UsageError",
            CliError::Math { code, .. } => code,
        };
        serde_json::json!({ "error": code, "message": self.to_string() }).to_string()
    }
}

impl From<InversionError> for CliError {
    fn from(e: InversionError) -> Self {
        CliError::Math { code: e.code(), message: e.to_string() }
    }
}

impl From<MediumError> for CliError {
    fn from(e: MediumError) -> Self {
        CliError::Usage(format!("invalid model: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Acoustic,
    Elastic,
}

#[derive(Debug, Parser)]
#[command(name = "reflectjet", version, about = "Interface reflection symbols and jet reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Model JSON (forward, invert, roundtrip) or spectra JSON (curvature-check).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Symbol CSV to invert.
    #[arg(long, global = true)]
    pub symbols: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Comma-separated slownesses b = |xi'|/tau.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tau: f64,
    /// Tolerance override NAME=VALUE (glancing, residual, condition, root, confirm, curvature_bound).
    #[arg(long = "tol", global = true)]
    pub tol: Vec<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Model kind for random roundtrip models.
    #[arg(long, global = true, value_enum, default_value_t = Kind::Acoustic)]
    pub kind: Kind,
    /// Recover the interface curvatures instead of taking them from the model.
    #[arg(long, global = true)]
    pub recover_curvature: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Symbol CSV over a slowness grid.
    Forward,
    /// Plus-side jets from a symbol CSV and the minus side.
    Invert,
    /// Forward then invert in-process, reporting jet errors.
    Roundtrip,
    /// Curvature derivative formulas against finite differences.
    CurvatureCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<PathBuf>,
    pub symbols: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub depth: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub tau: f64,
    pub options: InversionOptions,
    pub jobs: usize,
    pub seed: u64,
    pub kind: Kind,
    pub recover_curvature: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let mut options = InversionOptions::default();
        for t in &cli.tol {
            let (name, value) = t
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--tol expects NAME=VALUE, got {t:?}")))?;
            let v: f64 = value.trim().parse().map_err(|_| CliError::Usage(format!("bad tolerance value {value:?}")))?;
            match name.trim() {
                "glancing" => options.glancing_tol = v,
                "residual" => options.residual_tol = v,
                "condition" => options.condition_limit = v,
                "root" => options.root_tol = v,
                "confirm" => options.confirm_tol = v,
                "curvature_bound" => options.curvature_bound = v,
                other => return Err(CliError::Usage(format!("unknown tolerance {other:?}"))),
            }
        }
        let grid = match &cli.grid {
            None => None,
            Some(g) => {
                let v = g
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad grid value {s:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err(CliError::Usage("empty grid".into()));
                }
                if v.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
                    return Err(CliError::Usage("grid slownesses must be finite and >= 0".into()));
                }
                Some(v)
            }
        };
        if !(cli.tau.is_finite() && cli.tau != 0.0) {
            return Err(CliError::Usage("--tau must be finite and non-zero".into()));
        }
        Ok(RunConfig {
            command: cli.command,
            model: cli.model,
            symbols: cli.symbols,
            out: cli.out,
            depth: cli.depth,
            grid,
            tau: cli.tau,
            options,
            jobs: cli.jobs.max(1),
            seed: cli.seed,
            kind: cli.kind,
            recover_curvature: cli.recover_curvature,
        })
    }
}

// ------------------------------------------------------------- model files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSpec {
    pub rho_jet: Vec<f64>,
    pub cs_jet: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_jet: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub minus: SideSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<SideSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<InterfaceGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedModel {
    Acoustic(AcousticModel),
    Elastic(ElasticModel),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedSide {
    Acoustic(AcousticSideJet),
    Elastic(ElasticSideJet),
}

impl SideSpec {
    pub fn from_acoustic(s: &AcousticSideJet) -> Self {
        SideSpec { rho_jet: s.rho.coeffs().to_vec(), cs_jet: s.cs.coeffs().to_vec(), cp_jet: None }
    }

    pub fn from_elastic(s: &ElasticSideJet) -> Self {
        SideSpec {
            rho_jet: s.rho.coeffs().to_vec(),
            cs_jet: s.cs.coeffs().to_vec(),
            cp_jet: Some(s.cp.coeffs().to_vec()),
        }
    }

    fn natural_depth(&self) -> usize {
        let mut n = self.rho_jet.len().min(self.cs_jet.len());
        if let Some(cp) = &self.cp_jet {
            n = n.min(cp.len());
        }
        n.saturating_sub(1)
    }

    fn to_side(&self, depth: usize) -> Result<LoadedSide, CliError> {
        if self.natural_depth() < depth || self.rho_jet.is_empty() {
            return Err(CliError::Usage(format!("model jets are shorter than depth {depth}")));
        }
        let cut = |v: &Vec<f64>| Jet::new(v[..=depth].to_vec());
        Ok(match &self.cp_jet {
            None => LoadedSide::Acoustic(AcousticSideJet::new(cut(&self.rho_jet), cut(&self.cs_jet))?),
            Some(cp) => LoadedSide::Elastic(ElasticSideJet::new(cut(&self.rho_jet), cut(&self.cs_jet), cut(cp))?),
        })
    }
}

impl ModelSpec {
    pub fn from_model(m: &LoadedModel) -> Self {
        match m {
            LoadedModel::Acoustic(a) => ModelSpec {
                minus: SideSpec::from_acoustic(&a.minus),
                plus: Some(SideSpec::from_acoustic(&a.plus)),
                geometry: Some(a.geometry),
                depth: Some(a.depth),
            },
            LoadedModel::Elastic(e) => ModelSpec {
                minus: SideSpec::from_elastic(&e.minus),
                plus: Some(SideSpec::from_elastic(&e.plus)),
                geometry: Some(e.geometry),
                depth: Some(e.depth),
            },
        }
    }

    fn depth_or_natural(&self) -> usize {
        let mut d = self.minus.natural_depth();
        if let Some(p) = &self.plus {
            d = d.min(p.natural_depth());
        }
        self.depth.unwrap_or(d)
    }

    pub fn minus_side(&self) -> Result<LoadedSide, CliError> {
        self.minus.to_side(self.depth_or_natural())
    }

    pub fn to_model(&self) -> Result<LoadedModel, CliError> {
        let plus = self.plus.as_ref().ok_or_else(|| CliError::Usage("model has no \"plus\" side".into()))?;
        let depth = self.depth_or_natural();
        let g = self.geometry.unwrap_or_else(InterfaceGeometry::flat);
        match (self.minus.to_side(depth)?, plus.to_side(depth)?) {
            (LoadedSide::Acoustic(m), LoadedSide::Acoustic(p)) => {
                Ok(LoadedModel::Acoustic(AcousticModel::new_acoustic(m, p, g)?))
            }
            (LoadedSide::Elastic(m), LoadedSide::Elastic(p)) => Ok(LoadedModel::Elastic(ElasticModel::new_elastic(m, p, g)?)),
            _ => Err(CliError::Usage("both sides must be acoustic or both elastic".into())),
        }
    }
}

impl LoadedModel {
    pub fn depth(&self) -> usize {
        match self {
            LoadedModel::Acoustic(m) => m.depth,
            LoadedModel::Elastic(m) => m.depth,
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            LoadedModel::Acoustic(_) => Kind::Acoustic,
            LoadedModel::Elastic(_) => Kind::Elastic,
        }
    }

    /// Smallest critical slowness over participating modes.
    pub fn critical_slowness(&self) -> f64 {
        match self {
            LoadedModel::Acoustic(m) => 1.0 / m.max_speed(),
            LoadedModel::Elastic(m) => 1.0 / m.max_speed(),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, context: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        context: context.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_model(text: &str) -> Result<ModelSpec, CliError> {
    parse_json(text, "model")
}

fn load_model_spec(cfg: &RunConfig) -> Result<ModelSpec, CliError> {
    let p = cfg.model.as_ref().ok_or_else(|| CliError::Usage("--model is required".into()))?;
    parse_model(&read_file(p)?)
}

// ------------------------------------------------------------- random models

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

fn random_jet(rng: &mut ChaCha8Rng, value: f64, depth: usize) -> Jet {
    let mut v = vec![value];
    for _ in 0..depth {
        v.push(value * rng.gen_range(-1.0..=1.0));
    }
    Jet::new(v)
}

/// Random acoustic model with plus/minus parameter ratios within `contrast`.
pub fn random_acoustic_model(rng: &mut ChaCha8Rng, depth: usize, contrast: f64, geometry: InterfaceGeometry) -> AcousticModel {
    let (rm, cm) = (rng.gen_range(1.0..=2.0), rng.gen_range(1.0..=2.0));
    let rp = rm * log_uniform(rng, 1.0 / contrast, contrast);
    let cp = cm * log_uniform(rng, 1.0 / contrast, contrast);
    let minus = AcousticSideJet { rho: random_jet(rng, rm, depth), cs: random_jet(rng, cm, depth) };
    let plus = AcousticSideJet { rho: random_jet(rng, rp, depth), cs: random_jet(rng, cp, depth) };
    AcousticModel::new_acoustic(minus, plus, geometry).expect("positive random model")
}

/// Random elastic model with c_P/c_S in [1.6, 2.2] on both sides.
pub fn random_elastic_model(rng: &mut ChaCha8Rng, depth: usize, contrast: f64, geometry: InterfaceGeometry) -> ElasticModel {
    let (rm, sm) = (rng.gen_range(1.0..=2.0), rng.gen_range(1.0..=2.0));
    let rp = rm * log_uniform(rng, 1.0 / contrast, contrast);
    let sp = sm * log_uniform(rng, 1.0 / contrast, contrast);
    let pm = sm * rng.gen_range(1.6..=2.2);
    let pp = sp * rng.gen_range(1.6..=2.2);
    let side = |rng: &mut ChaCha8Rng, r: f64, s: f64, p: f64| ElasticSideJet {
        rho: random_jet(rng, r, depth),
        cs: random_jet(rng, s, depth),
        cp: random_jet(rng, p, depth),
    };
    let minus = side(rng, rm, sm, pm);
    let plus = side(rng, rp, sp, pp);
    ElasticModel::new_elastic(minus, plus, geometry).expect("positive random model")
}

/// Default grid: 8 slownesses equispaced over [0, 0.8 b_crit].
pub fn default_grid(b_crit: f64) -> Vec<f64> {
    (0..8).map(|i| 0.8 * b_crit * i as f64 / 7.0).collect()
}

// ------------------------------------------------------------------ forward

/// One block of CSV lines for a grid point: data rows or a regime comment.
enum Block {
    Rows(Vec<String>),
    Flagged(String),
}

fn fmt_c(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

pub const ACOUSTIC_HEADER: &str = "tau,xi1,xi2,order,re_aR,im_aR,re_aT,im_aT";
pub const ELASTIC_HEADER: &str = "tau,xi1,xi2,order,row,col,re_R,im_R,re_T,im_T";

fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let n = g.len();
    g.dedup();
    if g.len() < n {
        warn!("dropped {} duplicated grid slownesses", n - g.len());
    }
    g
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Symbol CSV for `model` over the slowness grid.
pub fn forward_csv(model: &LoadedModel, grid: &[f64], tau: f64, depth: usize, cfg: &RunConfig) -> Result<String, CliError> {
    if depth > model.depth() {
        return Err(CliError::Usage(format!("depth {depth} exceeds model depth {}", model.depth())));
    }
    let grid = sorted_grid(grid);
    let tol = cfg.options.glancing_tol;
    let blocks: Vec<Block> = with_pool(cfg.jobs, || {
        grid.par_iter()
            .map(|&b| {
                let cov = Covector::from_slowness(tau, b);
                let head = format!("{},{},{}", cov.tau, cov.xi[0], cov.xi[1]);
                match model {
                    LoadedModel::Acoustic(m) => match forward_symbols_tol(&cov, m, depth, tol) {
                        Ok(s) => Block::Rows(
                            s.orders.iter().map(|o| format!("{head},{},{},{}", o.order, fmt_c(o.a_r), fmt_c(o.a_t))).collect(),
                        ),
                        Err(e) => Block::Flagged(format!("# b={b} regime violation: {e}")),
                    },
                    LoadedModel::Elastic(m) => {
                        let h = mean_curvature_jet(&m.geometry, depth);
                        let mm = m.minus.truncate(depth);
                        let pp = m.plus.truncate(depth);
                        match forward_orders_elastic(&cov, &mm, &pp, &h, depth, tol) {
                            Ok(orders) => {
                                let mut rows = Vec::with_capacity(9 * orders.len());
                                for o in &orders {
                                    for i in 0..3 {
                                        for j in 0..3 {
                                            rows.push(format!(
                                                "{head},{},{},{},{},{}",
                                                o.order,
                                                i + 1,
                                                j + 1,
                                                fmt_c(o.r[(i, j)]),
                                                fmt_c(o.t[(i, j)])
                                            ));
                                        }
                                    }
                                }
                                Block::Rows(rows)
                            }
                            Err(e) => Block::Flagged(format!("# b={b} regime violation: {e}")),
                        }
                    }
                }
            })
            .collect()
    })?;
    let mut out = String::new();
    out.push_str(match model {
        LoadedModel::Acoustic(_) => ACOUSTIC_HEADER,
        LoadedModel::Elastic(_) => ELASTIC_HEADER,
    });
    out.push('\n');
    for blk in blocks {
        match blk {
            Block::Rows(rows) => {
                for r in rows {
                    out.push_str(&r);
                    out.push('\n');
                }
            }
            Block::Flagged(c) => {
                warn!("{}", &c[2..]);
                out.push_str(&c.replace('\n', " "));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn run_forward(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = load_model_spec(cfg)?;
    let model = spec.to_model()?;
    let depth = cfg.depth.unwrap_or(model.depth());
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(model.critical_slowness()));
    forward_csv(&model, &grid, cfg.tau, depth, cfg)
}

// ------------------------------------------------------------------- invert

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedSymbols {
    Acoustic(SymbolSamples<Complex64>),
    Elastic(SymbolSamples<CMatrix3>),
}

fn csv_err(context: &str, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse { context: context.to_string(), line: line as usize, column: 0, message: message.into() }
}

/// Parse a symbol CSV; the column set decides acoustic or elastic.
pub fn parse_symbols(text: &str) -> Result<ParsedSymbols, CliError> {
    let ctx = "symbols";
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_err(ctx, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| csv_err(ctx, 1, format!("missing column {name:?}")));
    let (it, ix1, ix2, io) = (need("tau")?, need("xi1")?, need("xi2")?, need("order")?);
    let elastic = col("row").is_some();
    let (ire, iim) = if elastic { (need("re_R")?, need("im_R")?) } else { (need("re_aR")?, need("im_aR")?) };
    let (irow, icol) = if elastic { (Some(need("row")?), Some(need("col")?)) } else { (None, None) };

    let mut acoustic = Vec::new();
    type Key = (i32, u64, u64, u64);
    let mut mats: BTreeMap<Key, (Covector, CMatrix3, [bool; 9])> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(ctx, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, CliError> {
            let s = rec.get(i).ok_or_else(|| csv_err(ctx, line, "short record"))?;
            s.parse::<f64>().map_err(|_| csv_err(ctx, line, format!("field {:?}: bad number {s:?}", &headers[i])))
        };
        let int = |i: usize| -> Result<i64, CliError> {
            let s = rec.get(i).ok_or_else(|| csv_err(ctx, line, "short record"))?;
            s.parse::<i64>().map_err(|_| csv_err(ctx, line, format!("field {:?}: bad integer {s:?}", &headers[i])))
        };
        let cov = Covector::new(num(it)?, [num(ix1)?, num(ix2)?]).map_err(|e| csv_err(ctx, line, e.to_string()))?;
        let order = int(io)? as i32;
        let value = Complex64::new(num(ire)?, num(iim)?);
        if !elastic {
            acoustic.push(SymbolSample { covector: cov, order, value });
            continue;
        }
        let (r, c) = (int(irow.expect("elastic"))?, int(icol.expect("elastic"))?);
        if !(1..=3).contains(&r) || !(1..=3).contains(&c) {
            return Err(csv_err(ctx, line, format!("row/col out of range: ({r},{c})")));
        }
        let key = (order, cov.tau.to_bits(), cov.xi[0].to_bits(), cov.xi[1].to_bits());
        let entry = mats.entry(key).or_insert((cov, CMatrix3::zeros(), [false; 9]));
        let k = (3 * (r - 1) + (c - 1)) as usize;
        if entry.2[k] {
            warn!("duplicated entry ({r},{c}) at line {line} ignored");
            continue;
        }
        entry.1[((r - 1) as usize, (c - 1) as usize)] = value;
        entry.2[k] = true;
    }
    if !elastic {
        return Ok(ParsedSymbols::Acoustic(SymbolSamples::new(acoustic)));
    }
    let mut samples = Vec::with_capacity(mats.len());
    for ((order, ..), (cov, m, seen)) in mats {
        if seen.iter().any(|s| !s) {
            return Err(csv_err(ctx, 0, format!("incomplete 3x3 matrix at order {order}, xi = {:?}", cov.xi)));
        }
        samples.push(SymbolSample { covector: cov, order, value: m });
    }
    Ok(ParsedSymbols::Elastic(SymbolSamples::new(samples)))
}

fn options_for(cfg: &RunConfig, geometry: Option<InterfaceGeometry>) -> InversionOptions {
    let mut o = cfg.options;
    o.curvature = if cfg.recover_curvature {
        CurvatureHandling::Recover
    } else {
        CurvatureHandling::Known(geometry.unwrap_or_else(InterfaceGeometry::flat))
    };
    o
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

pub fn invert_report(symbols: &ParsedSymbols, spec: &ModelSpec, cfg: &RunConfig) -> Result<RecoveryReport, CliError> {
    let max_depth = match symbols {
        ParsedSymbols::Acoustic(s) => s.max_order_depth(),
        ParsedSymbols::Elastic(s) => s.max_order_depth(),
    };
    let depth = cfg.depth.or(spec.depth).unwrap_or(max_depth);
    let mut minus_spec = spec.clone();
    minus_spec.plus = None;
    minus_spec.depth = Some(depth);
    let minus = minus_spec.minus_side()?;
    let opts = options_for(cfg, spec.geometry);
    Ok(match (symbols, minus) {
        (ParsedSymbols::Acoustic(s), LoadedSide::Acoustic(m)) => acoustic_recover_jets(s, &m, depth, &opts)?,
        (ParsedSymbols::Elastic(s), LoadedSide::Elastic(m)) => elastic_recover_jets(s, &m, depth, &opts)?,
        _ => return Err(CliError::Usage("symbol file and model kind differ".into())),
    })
}

pub fn run_invert(cfg: &RunConfig) -> Result<String, CliError> {
    let spec = load_model_spec(cfg)?;
    let p = cfg.symbols.as_ref().ok_or_else(|| CliError::Usage("--symbols is required".into()))?;
    let symbols = parse_symbols(&read_file(p)?)?;
    Ok(to_json(&invert_report(&symbols, &spec, cfg)?))
}

// ---------------------------------------------------------------- roundtrip

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub kind: Kind,
    pub seed: u64,
    pub depth: usize,
    pub slowness: Vec<f64>,
    pub truth: ModelSpec,
    pub recovered: RecoveryReport,
    /// Per order k, the largest |recovered - true| / max(|true_k|, |true_0|) over parameters.
    pub max_relative_error: Vec<f64>,
    /// Largest mismatch of transmission symbols predicted from the recovered jets.
    pub max_transmission_error: f64,
}

fn jet_errors(truth: &[&Jet], recovered: &[&[f64]], depth: usize) -> Vec<f64> {
    (0..=depth)
        .map(|k| {
            truth
                .iter()
                .zip(recovered)
                .map(|(t, r)| (r[k] - t.get(k)).abs() / t.get(k).abs().max(t.value().abs()))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Forward run over `grid`, inversion, and comparison against `model`.
pub fn roundtrip(model: &LoadedModel, grid: &[f64], tau: f64, cfg: &RunConfig) -> Result<RoundtripReport, CliError> {
    let depth = model.depth();
    let csv = forward_csv(model, grid, tau, depth, cfg)?;
    if csv.lines().any(|l| l.starts_with('#')) {
        return Err(CliError::Usage("grid leaves the hyperbolic regime".into()));
    }
    let symbols = parse_symbols(&csv)?;
    let spec = ModelSpec::from_model(model);
    let report = invert_report(&symbols, &spec, cfg)?;
    let geometry = report.geometry().unwrap_or_else(|| spec.geometry.unwrap_or_else(InterfaceGeometry::flat));
    let tol = cfg.options.glancing_tol;
    let (errors, t_err) = match model {
        LoadedModel::Acoustic(m) => {
            let rec = report.acoustic_plus();
            let e = jet_errors(&[&m.plus.rho, &m.plus.cs], &[&report.rho_jet, &report.cs_jet], depth);
            let rm = AcousticModel::new_acoustic(m.minus.clone(), rec, geometry)?;
            let mut worst = 0.0f64;
            for &b in grid {
                let cov = Covector::from_slowness(tau, b);
                let a = forward_symbols_tol(&cov, m, depth, tol).map_err(InversionError::from)?;
                let r = forward_symbols_tol(&cov, &rm, depth, tol).map_err(InversionError::from)?;
                let scale = a.orders[0].a_t.norm();
                for (x, y) in a.orders.iter().zip(&r.orders) {
                    worst = worst.max((x.a_t - y.a_t).norm() / x.a_t.norm().max(scale));
                }
            }
            (e, worst)
        }
        LoadedModel::Elastic(m) => {
            let rec = report.elastic_plus().expect("elastic report");
            let cp = report.cp_jet.as_deref().expect("elastic report");
            let e = jet_errors(
                &[&m.plus.rho, &m.plus.cs, &m.plus.cp],
                &[&report.rho_jet, &report.cs_jet, cp],
                depth,
            );
            let h_true = mean_curvature_jet(&m.geometry, depth);
            let h_rec = mean_curvature_jet(&geometry, depth);
            let mut worst = 0.0f64;
            for &b in grid {
                let cov = Covector::from_slowness(tau, b);
                let a = forward_orders_elastic(&cov, &m.minus, &m.plus, &h_true, depth, tol).map_err(InversionError::from)?;
                let r = forward_orders_elastic(&cov, &m.minus, &rec, &h_rec, depth, tol).map_err(InversionError::from)?;
                let scale = a[0].t.norm();
                for (x, y) in a.iter().zip(&r) {
                    worst = worst.max((x.t - y.t).norm() / x.t.norm().max(scale));
                }
            }
            (e, worst)
        }
    };
    Ok(RoundtripReport {
        kind: model.kind(),
        seed: cfg.seed,
        depth,
        slowness: sorted_grid(grid),
        truth: spec,
        recovered: report,
        max_relative_error: errors,
        max_transmission_error: t_err,
    })
}

pub fn run_roundtrip(cfg: &RunConfig) -> Result<String, CliError> {
    let model = match &cfg.model {
        Some(_) => {
            let m = load_model_spec(cfg)?.to_model()?;
            match cfg.depth {
                Some(d) if d > m.depth() => {
                    return Err(CliError::Usage(format!("depth {d} exceeds model depth {}", m.depth())))
                }
                Some(d) => truncate_model(&m, d),
                None => m,
            }
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let depth = cfg.depth.unwrap_or(2);
            match cfg.kind {
                Kind::Acoustic => {
                    LoadedModel::Acoustic(random_acoustic_model(&mut rng, depth, 5.0, InterfaceGeometry::flat()))
                }
                Kind::Elastic => LoadedModel::Elastic(random_elastic_model(&mut rng, depth, 2.0, InterfaceGeometry::flat())),
            }
        }
    };
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(model.critical_slowness()));
    Ok(to_json(&roundtrip(&model, &grid, cfg.tau, cfg)?))
}

fn truncate_model(m: &LoadedModel, d: usize) -> LoadedModel {
    match m {
        LoadedModel::Acoustic(a) => LoadedModel::Acoustic(AcousticModel {
            minus: a.minus.truncate(d),
            plus: a.plus.truncate(d),
            geometry: a.geometry,
            depth: d,
        }),
        LoadedModel::Elastic(e) => LoadedModel::Elastic(ElasticModel {
            minus: e.minus.truncate(d),
            plus: e.plus.truncate(d),
            geometry: e.geometry,
            depth: d,
        }),
    }
}

// ---------------------------------------------------------- curvature check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureCheckInput {
    pub spectra: Vec<Vec<f64>>,
    #[serde(default = "default_max_j")]
    pub max_j: usize,
    #[serde(default)]
    pub s_values: Vec<f64>,
}

fn default_max_j() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRow {
    pub spectrum: usize,
    pub kappas: Vec<f64>,
    pub j: usize,
    pub formula: f64,
    pub oracle: Option<f64>,
    pub relative_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub spectrum: usize,
    pub s: f64,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCheckReport {
    pub rows: Vec<CurvatureRow>,
    pub profile: Vec<ProfileRow>,
}

pub fn curvature_check(input: &CurvatureCheckInput) -> CurvatureCheckReport {
    let mut rows = Vec::new();
    let mut profile = Vec::new();
    for (i, k) in input.spectra.iter().enumerate() {
        let spec = CurvatureSpectrum::new(k.clone());
        for j in 0..=input.max_j {
            let formula = mean_curvature_normal_derivatives(&spec, j);
            let (oracle, relative_error, error) = match profile_derivative_fd(&spec, j) {
                Ok(fd) => {
                    let fact: f64 = (1..=j).map(|x| x as f64).product();
                    let floor = fact * k.iter().map(|x| x.abs().powi(j as i32 + 1)).sum::<f64>();
                    let denom = formula.abs().max(floor);
                    let err = if denom > 0.0 { (fd - formula).abs() / denom } else { (fd - formula).abs() };
                    (Some(fd), Some(err), None)
                }
                Err(e) => (None, None, Some(format!("FocalPoint: {e}"))),
            };
            rows.push(CurvatureRow { spectrum: i, kappas: k.clone(), j, formula, oracle, relative_error, error });
        }
        for &s in &input.s_values {
            let (value, error) = match level_set_curvature_profile(&spec, s) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(format!("FocalPoint: {e}"))),
            };
            profile.push(ProfileRow { spectrum: i, s, value, error });
        }
    }
    CurvatureCheckReport { rows, profile }
}

pub fn run_curvature_check(cfg: &RunConfig) -> Result<String, CliError> {
    let p = cfg.model.as_ref().ok_or_else(|| CliError::Usage("--model (spectra JSON) is required".into()))?;
    let mut input: CurvatureCheckInput = parse_json(&read_file(p)?, "spectra")?;
    if let Some(d) = cfg.depth {
        input.max_j = d;
    }
    Ok(to_json(&curvature_check(&input)))
}

// -------------------------------------------------------------------- entry

pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.command {
        Command::Forward => run_forward(cfg),
        Command::Invert => run_invert(cfg),
        Command::Roundtrip => run_roundtrip(cfg),
        Command::CurvatureCheck => run_curvature_check(cfg),
    }
}

/// Runs the command and writes its output; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let out = run(&cfg)?;
        match &cfg.out {
            Some(p) => std::fs::write(p, out)
                .map_err(|e| CliError::Io { path: p.display().to_string(), message: e.to_string() }),
            None => {
                print!("{out}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
