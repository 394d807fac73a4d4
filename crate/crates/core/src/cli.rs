//! Command-line front end: `run` integrates a scenario and writes CSV/JSON, `check` runs the
//! invariant suites, `oracle` evaluates the classical identities.

use crate::algebra::{matrix_to_elem, state_checks, Algebra};
use crate::classical_oracle::{self, FdConfig, Identity, Manifold};
use crate::error::{Error, Result};
use crate::flows::{
    integrate, oracles, GeodesicFlow, GeodesicModel, OdeSystem, RunOutput, Series, StepConfig,
};
use crate::geometry::{
    fuzzy_qlc_gamma, fuzzy_ricci_index, fuzzy_scalar_closed, ricci_m2_reference,
};
use crate::linalg;
use crate::models::{
    build_from_spec, build_fuzzy_n2_with, build_m2, fuzzy_amplitude_from_coords, fuzzy_calculus,
    fuzzy_field, fuzzy_field_parts, m2_calculus, m2_real_field, metric_is_positive, model_suite,
    AmplitudeForm, CustomModel, FuzzyConst, FuzzyN2Family,
};
use crate::report::Report;
use crate::specfun;
use crate::tolerance;
use crate::C64;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Default bound on the deviation from a scenario's closed-form trajectory.
pub const ORACLE_BOUND: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "qgeo",
    version,
    about = "Geodesic flows on finite noncommutative geometries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate a scenario, writing a CSV time series and a JSON summary.
    Run(RunArgs),
    /// Run invariant suites and print a table of residuals.
    Check(CheckArgs),
    /// Evaluate a classical identity at random chart points.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// RunConfig JSON document; explicit flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: RunConfig,
}

/// Everything a run needs. Every field is optional so that a config file and flags can be
/// layered.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// m2-geodesic, fuzzy-const, fuzzy-n2, custom-json, or a preset figure1/figure2/figure3.
    pub scenario: Option<String>,
    /// Braiding parameter of the matrix model, e.g. i or 2i.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: Option<f64>,
    /// Metric eigenvalues for fuzzy-const, as an alternative to mu1, mu2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c2: Option<f64>,
    /// Fuzzy metric: three diagonal entries or nine row-major entries.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub metric: Option<Vec<f64>>,
    /// Constant part f of the reduced fuzzy field.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub force: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Amplitude equation of the reduced fuzzy model.
    #[arg(long, value_enum)]
    pub amplitude: Option<AmplitudeArg>,
    /// Model document for custom-json.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long = "tmax", allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Record every n-th step.
    #[arg(long)]
    pub every: Option<usize>,
    /// CSV output path ("-" for stdout).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON summary path (always also printed to stdout).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Bound overrides, NAME=VALUE (monitor names or "oracle").
    #[arg(long = "tol", value_parser = parse_tol)]
    #[serde(with = "tol_map")]
    pub tolerances: Vec<(String, f64)>,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeArg {
    Hamiltonian,
    Generic,
    LeftOrdered,
}

impl From<AmplitudeArg> for AmplitudeForm {
    fn from(a: AmplitudeArg) -> Self {
        match a {
            AmplitudeArg::Hamiltonian => AmplitudeForm::Hamiltonian,
            AmplitudeArg::Generic => AmplitudeForm::Generic,
            AmplitudeArg::LeftOrdered => AmplitudeForm::LeftOrdered,
        }
    }
}

mod tol_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(v: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
        v.iter().cloned().collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, f64)>, D::Error> {
        Ok(BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .collect())
    }
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v: f64 = v.parse().map_err(|e| format!("{e}"))?;
    if !(v >= 0.0) {
        return Err("tolerance must be non-negative".into());
    }
    Ok((k.to_string(), v))
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.clone().or($lo.$f.clone()),)* tolerances: {
            let mut t = $lo.tolerances.clone();
            t.extend($hi.tolerances.iter().cloned());
            t
        } }
    };
}

impl RunConfig {
    /// Fields set here win over those in `base`.
    pub fn over(&self, base: &RunConfig) -> RunConfig {
        layer!(
            self, base, scenario, rho, alpha, beta, gamma, delta, mu1, mu2, lambda, c1, c2, metric,
            force, seed, amplitude, model, dt, t_max, every, csv, summary
        )
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Sample points for the classical identities.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Random fields per model.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Geometry,
    Oracle,
    All,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// sphere or flatN.
    #[arg(long, default_value = "sphere")]
    pub manifold: String,
    /// zero, constant, linear, quadratic or gradcos.
    #[arg(long, default_value = "quadratic")]
    pub field: String,
    /// div, speed or deviation.
    #[arg(long, default_value = "div")]
    pub identity: String,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub outer: f64,
    #[arg(long)]
    pub no_richardson: bool,
    /// Fail (exit 1) if the largest residual exceeds this.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Parses a complex number such as `i`, `-2i`, `0.5`, `1+2i` or `1-0.5i`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Invalid(format!("cannot parse '{s}' as a complex number"));
    if t.is_empty() {
        return Err(bad());
    }
    let imag = |u: &str| -> Result<f64> {
        match u {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => u.parse::<f64>().map_err(|_| bad()),
        }
    };
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t
            .parse::<f64>()
            .map(|r| C64::new(r, 0.0))
            .map_err(|_| bad());
    };
    // split at the last sign that is not the leading one or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().map_err(|_| bad())?;
            Ok(C64::new(re, imag(&body[k..])?))
        }
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

fn fuzzy_metric(v: &[f64]) -> Result<Matrix3<f64>> {
    match v.len() {
        3 => Ok(Matrix3::from_diagonal(&Vector3::new(v[0], v[1], v[2]))),
        9 => Ok(Matrix3::from_row_slice(v)),
        n => Err(Error::Invalid(format!(
            "metric needs 3 or 9 entries, got {n}"
        ))),
    }
}

enum Oracle {
    None,
    M2Shm([f64; 4]),
    Rotation { x0: Matrix3<f64>, f: Vector3<f64> },
    Elliptic { c1: f64, c2: f64 },
}

enum System {
    Geo(Box<GeodesicModel>),
    Const(FuzzyConst),
}

struct Prepared {
    scenario: String,
    system: System,
    y0: Vec<C64>,
    oracle: Oracle,
    params: BTreeMap<String, Value>,
    t_max: f64,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let scenario = cfg
        .scenario
        .clone()
        .ok_or_else(|| Error::Invalid("no scenario given".into()))?;
    let mut params = BTreeMap::new();
    // figure presets are the scenarios at their default parameters
    let base = match scenario.as_str() {
        "figure1" => "m2-geodesic",
        "figure2" => "fuzzy-const",
        "figure3" => "fuzzy-n2",
        s => s,
    };
    match base {
        "m2-geodesic" => {
            let rho = parse_complex(cfg.rho.as_deref().unwrap_or("i"))?;
            let [alpha, beta, gamma, delta] = [
                cfg.alpha.unwrap_or(1.0),
                cfg.beta.unwrap_or(0.0),
                cfg.gamma.unwrap_or(1.0),
                cfg.delta.unwrap_or(1.0),
            ];
            let model = build_m2(rho)?;
            let (xs, _) = oracles::m2_shm(alpha, beta, gamma, delta, 0.0);
            let y0 = model.pack(&m2_real_field(&xs), &matrix_to_elem(&linalg::identity(2)));
            params.insert("rho".into(), json!([rho.re, rho.im]));
            for (k, v) in [
                ("alpha", alpha),
                ("beta", beta),
                ("gamma", gamma),
                ("delta", delta),
            ] {
                params.insert(k.into(), json!(v));
            }
            // the harmonic family is a geodesic only at rho = i
            let oracle = if (rho - crate::I).norm() < 1e-12 {
                Oracle::M2Shm([alpha, beta, gamma, delta])
            } else {
                Oracle::None
            };
            Ok(Prepared {
                scenario,
                system: System::Geo(Box::new(model)),
                y0,
                oracle,
                params,
                t_max: 3.0 * std::f64::consts::PI,
            })
        }
        "fuzzy-const" => {
            let fc = match (&cfg.lambda, cfg.mu1, cfg.mu2) {
                (Some(l), None, None) if l.len() == 3 => {
                    FuzzyConst::from_lambda([l[0], l[1], l[2]])?
                }
                (Some(_), None, None) => {
                    return Err(Error::Invalid("lambda needs three entries".into()))
                }
                (Some(_), _, _) => {
                    return Err(Error::Invalid(
                        "give either lambda or mu1/mu2, not both".into(),
                    ))
                }
                (None, m1, m2) => FuzzyConst::from_mu(m1.unwrap_or(-0.5), m2.unwrap_or(1.0))?,
            };
            let (c1, c2) = (cfg.c1.unwrap_or(1.0), cfg.c2.unwrap_or(1.0));
            let y0 = fc.initial(c1, c2)?;
            let m = -fc.mu[0] * fc.mu[1] * fc.mu[2] * c1 * c1 / (c2 * c2);
            let t_max = if m < 1.0 {
                4.0 * specfun::elliptic_k(m)? / c2.abs()
            } else {
                10.0
            };
            params.insert("mu".into(), json!(fc.mu));
            params.insert("metric".into(), json!(fc.metric));
            params.insert("c1".into(), json!(c1));
            params.insert("c2".into(), json!(c2));
            params.insert("elliptic_parameter".into(), json!(m));
            params.insert("metric_positive".into(), json!(fc.is_positive()));
            Ok(Prepared {
                scenario,
                system: System::Const(fc),
                y0,
                oracle: Oracle::Elliptic { c1, c2 },
                params,
                t_max,
            })
        }
        "fuzzy-n2" => {
            let g = fuzzy_metric(cfg.metric.as_deref().unwrap_or(&[1.0, 1.0, 1.0]))?;
            let form: AmplitudeForm = cfg.amplitude.map(Into::into).unwrap_or_default();
            let model = build_fuzzy_n2_with(&g, form)?;
            let seed = cfg.seed.unwrap_or(7);
            let fam = FuzzyN2Family::random(seed);
            let fv = cfg.force.clone().unwrap_or_else(|| vec![0.0, 0.0, 1.0]);
            if fv.len() != 3 {
                return Err(Error::Invalid("force needs three entries".into()));
            }
            let f = Vector3::new(fv[0], fv[1], fv[2]);
            let x0 = fam.matrix();
            let c = |z: f64| C64::new(z, 0.0);
            let e0 = fuzzy_amplitude_from_coords([c(1.0), c(0.0), c(0.0), c(0.0)]);
            let y0 = model.pack(&fuzzy_field(&x0, &f), &e0);
            params.insert(
                "metric".into(),
                json!(g.iter().copied().collect::<Vec<f64>>()),
            );
            params.insert("metric_positive".into(), json!(metric_is_positive(&g)));
            params.insert("seed".into(), json!(seed));
            params.insert("force".into(), json!(fv));
            params.insert("family".into(), serde_json::to_value(fam)?);
            params.insert("amplitude".into(), serde_json::to_value(form)?);
            // the rotation solution is derived for the round metric
            let round = (g - Matrix3::identity()).abs().max() == 0.0;
            let oracle = if round {
                Oracle::Rotation { x0, f }
            } else {
                Oracle::None
            };
            Ok(Prepared {
                scenario,
                system: System::Geo(Box::new(model)),
                y0,
                oracle,
                params,
                t_max: 10.0,
            })
        }
        "custom-json" => {
            let path = cfg
                .model
                .as_ref()
                .ok_or_else(|| Error::Invalid("custom-json needs --model FILE".into()))?;
            let spec: CustomModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let (model, x, e) = build_from_spec(&spec)?;
            let y0 = model.pack(&x, &e);
            params.insert("model".into(), json!(path.display().to_string()));
            params.insert("name".into(), json!(spec.name));
            Ok(Prepared {
                scenario,
                system: System::Geo(Box::new(model)),
                y0,
                oracle: Oracle::None,
                params,
                t_max: 1.0,
            })
        }
        other => Err(Error::Invalid(format!(
            "unknown scenario '{other}' (m2-geodesic, fuzzy-const, fuzzy-n2, custom-json)"
        ))),
    }
}

fn oracle_deviation(p: &Prepared, series: &Series) -> Result<Option<f64>> {
    let mut worst: f64 = 0.0;
    for (t, y) in series.t.iter().zip(&series.states) {
        let d = match (&p.oracle, &p.system) {
            (Oracle::None, _) => return Ok(None),
            (Oracle::M2Shm(q), _) => {
                let (xs, xt) = oracles::m2_shm(q[0], q[1], q[2], q[3], *t);
                let want = xs
                    .transpose()
                    .iter()
                    .chain(xt.transpose().iter())
                    .copied()
                    .collect::<Vec<_>>();
                want.iter()
                    .zip(y)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
            (Oracle::Rotation { x0, f }, System::Geo(model)) => {
                let (x, _) = model.unpack(y);
                let (xm, fv) = fuzzy_field_parts(&x);
                let want = oracles::fuzzyn2_rotation(x0, f, *t);
                let mut d: f64 = 0.0;
                for i in 0..3 {
                    d = d.max((fv[i] - C64::new(f[i], 0.0)).norm());
                    for j in 0..3 {
                        d = d.max((xm[(i, j)] - C64::new(want[(i, j)], 0.0)).norm());
                    }
                }
                d
            }
            (Oracle::Elliptic { c1, c2 }, System::Const(fc)) => {
                let want = fc.closed_form(*c1, *c2, *t)?;
                (0..3).map(|i| (want[i] - y[i]).norm()).fold(0.0, f64::max)
            }
            _ => return Ok(None),
        };
        worst = worst.max(d);
    }
    Ok(Some(worst))
}

/// The CSV text of a series: `t`, then re/im of every state component and monitor.
pub fn series_to_csv(series: &Series) -> String {
    let mut s = String::from("t");
    for c in series.columns.iter().chain(&series.monitor_names) {
        s.push_str(&format!(",{c}_re,{c}_im"));
    }
    s.push('\n');
    for (k, t) in series.t.iter().enumerate() {
        s.push_str(&format!("{t:.16e}"));
        for z in &series.states[k] {
            s.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
        }
        for m in &series.monitors[k] {
            s.push_str(&format!(",{m:.16e},{:.16e}", 0.0));
        }
        s.push('\n');
    }
    s
}

/// Parses CSV text written by [`series_to_csv`] into its header and numeric rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty CSV".into()))?
        .split(',')
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("row {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Invalid(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// JSON summary of a run.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub params: BTreeMap<String, Value>,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub monitor_max_drift: BTreeMap<String, f64>,
    pub monitor_bounds: BTreeMap<String, f64>,
    pub oracle_max_deviation: Option<f64>,
    pub oracle_bound: f64,
    pub aborted: Option<String>,
    pub pass: bool,
}

/// Result of [`run`]: the summary, the CSV text and the process exit code.
pub struct RunResult {
    pub summary: Summary,
    pub csv: String,
    pub exit_code: i32,
}

/// Integrates a scenario; does not touch the filesystem except to read a custom model.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    let p = prepare(cfg)?;
    let step = StepConfig {
        dt: cfg.dt.unwrap_or(1e-3),
        t_max: cfg.t_max.unwrap_or(p.t_max),
        every: cfg.every.unwrap_or(1),
    };
    let out: RunOutput = match &p.system {
        System::Geo(model) => integrate(&GeodesicFlow::new(model), p.y0.clone(), step)?,
        System::Const(fc) => integrate(fc as &dyn OdeSystem, p.y0.clone(), step)?,
    };
    let mut bounds = out.bounds.clone();
    let mut oracle_bound = ORACLE_BOUND;
    for (k, v) in &cfg.tolerances {
        if k == "oracle" {
            oracle_bound = *v;
        } else if let Some(b) = bounds.get_mut(k) {
            *b = *v;
        } else {
            return Err(Error::Invalid(format!("no monitor named '{k}'")));
        }
    }
    let oracle = oracle_deviation(&p, &out.series)?;
    let monitors_ok = out.drift.iter().all(|(k, d)| *d <= bounds[k]);
    let oracle_ok = oracle.map_or(true, |d| d <= oracle_bound);
    let pass = out.aborted.is_none() && monitors_ok && oracle_ok;
    let exit_code = if out.aborted.is_some() {
        EXIT_NUMERICAL
    } else if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    let summary = Summary {
        scenario: p.scenario.clone(),
        params: p.params.clone(),
        steps: out.steps,
        dt: step.dt,
        t_end: out.final_t,
        monitor_max_drift: out.drift.clone(),
        monitor_bounds: bounds,
        oracle_max_deviation: oracle,
        oracle_bound,
        aborted: out.aborted.as_ref().map(|e| e.to_string()),
        pass,
    };
    Ok(RunResult {
        summary,
        csv: series_to_csv(&out.series),
        exit_code,
    })
}

fn check_algebra() -> Report {
    let mut rep = Report::new();
    for n in 1..=3 {
        rep.extend(&format!("matrix{n}."), Algebra::matrix(n).axioms_report());
    }
    let m2 = m2_calculus();
    rep.extend("m2_calculus.", m2.checks());
    rep.extend(
        "m2_state.",
        state_checks(
            m2.algebra(),
            &crate::algebra::StateFunctional::normalized_trace(2),
        ),
    );
    rep.extend("fuzzy_calculus.", fuzzy_calculus().checks());
    let mut worst: f64 = 0.0;
    for m in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        for i in 0..=100 {
            let u = -5.0 + 0.1 * i as f64;
            match specfun::jacobi(u, m) {
                Ok(j) => {
                    worst = worst
                        .max((j.sn * j.sn + j.cn * j.cn - 1.0).abs())
                        .max((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs())
                }
                Err(_) => worst = f64::NAN,
            }
        }
    }
    rep.at_most("jacobi.identities", worst, tolerance::SPECFUN);
    rep
}

fn check_geometry(samples: usize, seed: u64) -> Report {
    let mut rep = Report::new();
    let c = |re: f64, im: f64| C64::new(re, im);
    let models: Vec<(&str, Result<GeodesicModel>)> = vec![
        ("m2_i.", build_m2(c(0.0, 1.0))),
        ("m2_2i.", build_m2(c(0.0, 2.0))),
        (
            "fuzzy_round.",
            build_fuzzy_n2_with(&Matrix3::identity(), AmplitudeForm::default()),
        ),
        (
            "fuzzy_431.",
            build_fuzzy_n2_with(
                &Matrix3::from_diagonal(&Vector3::new(4.0, 3.0, 1.0)),
                AmplitudeForm::default(),
            ),
        ),
    ];
    for (name, m) in models {
        match m {
            Ok(model) => rep.extend(name, model_suite(&model, samples, seed)),
            Err(_) => rep.at_most(format!("{name}build"), f64::INFINITY, 0.0),
        }
    }
    // Ricci references
    for rho in [1.0, 2.0, 0.5] {
        let r = ricci_m2_reference(c(0.0, rho));
        let want = c(1.0 - rho * rho, 0.0);
        let gap = [
            (r[(0, 0)]).norm(),
            (r[(1, 1)]).norm(),
            (r[(0, 1)] - want).norm(),
            (r[(1, 0)] - want).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        rep.at_most(format!("ricci.m2_rho_{rho}i"), gap, tolerance::IDENTITY);
    }
    match fuzzy_qlc_gamma(&Matrix3::identity()) {
        Ok(g) => {
            let r = fuzzy_ricci_index(&g);
            let mut gap: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    gap = gap.max((r[(i, j)] - if i == j { -0.25 } else { 0.0 }).abs());
                }
            }
            rep.at_most("ricci.fuzzy_round", gap, tolerance::IDENTITY);
        }
        Err(_) => rep.at_most("ricci.fuzzy_round", f64::INFINITY, 0.0),
    }
    let s = fuzzy_scalar_closed(&Matrix3::identity());
    rep.at_most(
        "ricci.fuzzy_round_scalar",
        (s + 0.75).abs(),
        tolerance::IDENTITY,
    );
    rep
}

fn check_oracle(points: usize, seed: u64) -> Report {
    classical_oracle::oracle_suite(points, seed).unwrap_or_else(|e| {
        let mut r = Report::new();
        r.at_most(format!("oracle.error: {e}"), f64::INFINITY, 0.0);
        r
    })
}

/// Runs the selected suites (in parallel for `all`).
pub fn check(args: &CheckArgs) -> Report {
    let (points, samples, seed) = (args.points, args.samples, args.seed);
    let mut rep = Report::new();
    match args.suite {
        Suite::Algebra => rep.extend("algebra.", check_algebra()),
        Suite::Geometry => rep.extend("geometry.", check_geometry(samples, seed)),
        Suite::Oracle => rep.extend("oracle.", check_oracle(points, seed)),
        Suite::All => {
            let (a, g, o) = std::thread::scope(|s| {
                let a = s.spawn(check_algebra);
                let g = s.spawn(move || check_geometry(samples, seed));
                let o = s.spawn(move || check_oracle(points, seed));
                (a.join(), g.join(), o.join())
            });
            for (name, r) in [("algebra.", a), ("geometry.", g), ("oracle.", o)] {
                match r {
                    Ok(r) => rep.extend(name, r),
                    Err(_) => rep.at_most(format!("{name}panicked"), f64::INFINITY, 0.0),
                }
            }
        }
    }
    rep
}

fn oracle_cmd(a: &OracleArgs, out: &mut dyn Write) -> Result<i32> {
    let man: Manifold = a.manifold.parse()?;
    let which: Identity = a.identity.parse()?;
    if !(a.h > 0.0) || !(a.outer > 0.0) {
        return Err(Error::Invalid("steps must be positive".into()));
    }
    let fd = FdConfig {
        h: a.h,
        outer: a.outer,
        richardson: !a.no_richardson,
    };
    let r = classical_oracle::sample_max(man, &a.field, which, a.points, a.seed, &fd)?;
    writeln!(
        out,
        "manifold {man} field {} identity {} points {}: max residual {r:.6e}",
        a.field, a.identity, a.points
    )?;
    Ok(match a.tol {
        Some(t) if !(r <= t) => EXIT_FAIL,
        _ => EXIT_PASS,
    })
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn write_target(path: &Path, text: &str, out: &mut dyn Write) -> Result<()> {
    if path.as_os_str() == "-" {
        out.write_all(text.as_bytes())?;
    } else {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn run_cmd(a: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = match &a.config {
        Some(p) => a.cfg.over(&RunConfig::load(p)?),
        None => a.cfg.clone(),
    };
    let res = run(&cfg)?;
    if let Some(p) = &cfg.csv {
        write_target(p, &res.csv, out)?;
    }
    let js = serde_json::to_string_pretty(&res.summary)?;
    if let Some(p) = &cfg.summary {
        std::fs::write(p, format!("{js}\n"))?;
    }
    if cfg.csv.as_deref() != Some(Path::new("-")) {
        writeln!(out, "{js}")?;
    }
    Ok(res.exit_code)
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Run(a) => run_cmd(a, out),
        Command::Check(a) => {
            let rep = check(a);
            let _ = write!(out, "{rep}");
            if rep.all_pass() {
                Ok(EXIT_PASS)
            } else {
                for f in rep.failures() {
                    let _ = writeln!(
                        err,
                        "failed: {} = {:.3e} (tol {:.1e})",
                        f.name, f.residual, f.tol
                    );
                }
                Ok(EXIT_FAIL)
            }
        }
        Command::Oracle(a) => oracle_cmd(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_for(&e)
        }
    }
}
