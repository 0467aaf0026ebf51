//! Command implementations behind the `cuspidal` binary. Every command returns a JSON
//! value for stdout and a [`RunManifest`].

pub mod cache;
pub mod descriptor;
pub mod error;
pub mod manifest;

use std::collections::BTreeMap;
use std::time::Instant;

use cuspidal::arith::lcm;
use cuspidal::bgbasis::{expand_at_cusps, represent, BGForm, BgError, RepresentOpts};
use cuspidal::modcurve::{Cusp, CosetSystem};
use cuspidal::num::{digits_to_bits, Prec, Q};
use cuspidal::petersson::{auto_method, lengths_for, run_method, CosetExpansions, Method, PeterssonResult};
use cuspidal::qseries::{float_str, parse_q};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use cache::{Cache, CacheKey};
pub use descriptor::FormDescriptor;
pub use error::CliError;
pub use manifest::{CacheEvent, RunManifest};

/// Coefficients requested from an extensible source before the solver asks for more.
const INITIAL_LENGTH: usize = 60;

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub digits: u32,
    pub length: usize,
    pub level: Option<u64>,
    pub weight: Option<String>,
    pub method: String,
    pub jobs: usize,
    pub cache: Cache,
}

impl Options {
    pub fn new(digits: u32) -> Self {
        Self { digits, length: 20, level: None, weight: None, method: "auto".into(), jobs: 0, cache: Cache::disabled() }
    }

    pub fn prec(&self) -> Prec {
        digits_to_bits(self.digits)
    }

    /// Precision of the representation, 32 bits above the target.
    fn bg_prec(&self) -> Prec {
        self.prec() + 32
    }

    fn weight_q(&self) -> Result<Option<Q>, CliError> {
        self.weight.as_deref().map(|w| parse_q(w).map_err(|e| CliError::Input(format!("--weight: {e}")))).transpose()
    }
}

pub struct Output {
    pub json: Value,
    pub manifest: RunManifest,
}

struct Run {
    command: &'static str,
    inputs: Value,
    start: Instant,
    cache: Vec<CacheEvent>,
}

impl Run {
    fn new(command: &'static str, inputs: Value) -> Self {
        Self { command, inputs, start: Instant::now(), cache: Vec::new() }
    }

    fn finish(self, opts: &Options, lengths: Vec<usize>, method: Option<Method>, results: &[PeterssonResult]) -> RunManifest {
        RunManifest {
            command: self.command.into(),
            inputs_hash: hex::encode(Sha256::digest(serde_json::to_vec(&self.inputs).expect("inputs serialize"))),
            inputs: self.inputs,
            precision_bits: opts.prec(),
            truncation_lengths: lengths,
            method: method.map(|m| m.tag().to_string()),
            values: results.iter().map(|r| [float_str(&r.value.re), float_str(&r.value.im)]).collect(),
            error_estimates: results.iter().map(|r| r.error_estimate).collect(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            cache: self.cache,
            jobs: opts.jobs,
            parallel: cuspidal::par::is_parallel(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

fn natural_level(desc: &FormDescriptor) -> Result<u64, CliError> {
    Ok(desc.resolve(1, 64)?.level)
}

/// Solve (or load) the representation of `desc` at `level`.
fn obtain_form(desc: &FormDescriptor, level: u64, opts: &Options, run: &mut Run) -> Result<BGForm, CliError> {
    let prec = opts.bg_prec();
    let mut target = desc.resolve(INITIAL_LENGTH, prec)?;
    if let Some(k) = opts.weight_q()? {
        if k != target.weight {
            return Err(CliError::Input(format!("--weight {k} does not match the form's weight {}", target.weight)));
        }
    }
    target.check_parity()?;
    if !level.is_multiple_of(target.level) {
        return Err(CliError::Input(format!("level {level} is not a multiple of the form's level {}", target.level)));
    }
    let chi = target.character.extend_to(level).map_err(|e| CliError::Input(e.to_string()))?;
    let label = chi.label();
    // keyed on the first request; a descriptor and a length determine the solve
    let key = CacheKey::new(level, target.weight, (label.modulus, label.index), desc.hash(), target.expansion.len(), prec);
    if let Some(form) = opts.cache.get(&key) {
        log::info!("cache hit {}", key.digest());
        run.cache.push(CacheEvent { key: key.digest(), hit: true });
        return Ok(form);
    }
    let ropts = RepresentOpts::new(prec);
    let form = loop {
        match represent(&target.expansion, level, &chi, &ropts) {
            Err(BgError::TooShort { have, need }) if target.extensible && need > have => {
                log::info!("solver needs {need} coefficients, regenerating");
                target = desc.resolve(need + 8, prec)?;
            }
            r => break r?,
        }
    };
    log::info!("represented with {} products, residual {:e}, out-of-sample {:e}", form.combination.len(), form.residual, form.oos_residual);
    opts.cache.put(&key, &form);
    run.cache.push(CacheEvent { key: key.digest(), hit: false });
    Ok(form)
}

fn q_str(x: Q) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn char_json(form: &BGForm) -> Value {
    let l = form.character.label();
    json!([l.modulus, l.index])
}

/// Expansions of `desc` at every cusp of `Gamma0(N)`, or at one cusp.
pub fn cmd_expand(desc: &FormDescriptor, cusp: Option<&str>, opts: &Options) -> Result<Output, CliError> {
    let inputs = json!({ "form": desc, "cusp": cusp, "level": opts.level, "weight": opts.weight, "digits": opts.digits, "length": opts.length });
    let mut run = Run::new("expand", inputs);
    let level = match opts.level {
        Some(n) => n,
        None => natural_level(desc)?,
    };
    let form = obtain_form(desc, level, opts, &mut run)?;
    let sys = CosetSystem::new(level);
    let wanted = match cusp {
        None => None,
        Some(s) => {
            let (a, c) = Cusp::parse_label(s).map_err(|e| CliError::Input(e.to_string()))?;
            if cuspidal::arith::gcd(a, c) != 1 {
                return Err(CliError::Input(format!("cusp {s} is not in lowest terms")));
            }
            Some(sys.cusp_index_of(a, c))
        }
    };
    let len = opts.length.max(1);
    let all = cuspidal::par::with_jobs(opts.jobs, || expand_at_cusps(&form, &sys, &|_| len))?;
    let mut cusps = BTreeMap::new();
    for (i, e) in all.iter().enumerate() {
        if wanted.is_none_or(|w| w == i) {
            cusps.insert(e.cusp.clone(), e.to_json());
        }
    }
    let json = json!({
        "level": level,
        "weight": q_str(form.weight),
        "character": char_json(&form),
        "cusps": cusps,
    });
    let lengths = all.iter().map(|e| e.expansion.len()).collect();
    Ok(Output { json, manifest: run.finish(opts, lengths, None, &[]) })
}

/// `haberland` leaves the cuspidal/general choice to the vanishing sets.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Requested {
    Auto,
    Haberland,
    Exact(Method),
}

fn parse_method(s: &str) -> Result<Requested, CliError> {
    Ok(match s {
        "auto" => Requested::Auto,
        "haberland" => Requested::Haberland,
        "haberland-cuspidal" => Requested::Exact(Method::HaberlandCuspidal),
        "haberland-general" => Requested::Exact(Method::HaberlandGeneral),
        "nelson" | "nelson-collins" => Requested::Exact(Method::NelsonCollins),
        "oracle" | "quadrature-oracle" => Requested::Exact(Method::QuadratureOracle),
        _ => return Err(CliError::Input(format!("unknown method {s:?} (auto, haberland, nelson, oracle)"))),
    })
}

fn haberland_applies(k: Q) -> bool {
    k.is_integer() && k >= Q::from_integer(2)
}

#[derive(Serialize)]
struct PeterssonOut<'a> {
    level: u64,
    weight: String,
    character: Value,
    method_requested: &'a str,
    result: cuspidal::petersson::PeterssonJson,
}

/// `<f, g>` by the requested method; `g` defaults to `f`.
pub fn cmd_petersson(f: &FormDescriptor, g: &FormDescriptor, opts: &Options) -> Result<Output, CliError> {
    let inputs = json!({ "f": f, "g": g, "level": opts.level, "weight": opts.weight, "digits": opts.digits, "method": opts.method });
    let mut run = Run::new("petersson", inputs);
    let requested = parse_method(&opts.method)?;
    let level = match opts.level {
        Some(n) => n,
        None => lcm(natural_level(f)?, natural_level(g)?),
    };
    let ff = obtain_form(f, level, opts, &mut run)?;
    let same = f == g;
    let gf = if same { ff.clone() } else { obtain_form(g, level, opts, &mut run)? };
    if ff.weight != gf.weight {
        return Err(CliError::Input(format!("weights differ: {} and {}", ff.weight, gf.weight)));
    }
    let k = ff.weight;
    let sys = CosetSystem::new(level);
    let prec = opts.prec();
    let expand = |form: &BGForm, len: &[usize]| CosetExpansions::from_form(form, &sys, len);
    let result = cuspidal::par::with_jobs(opts.jobs, || -> Result<(PeterssonResult, Vec<usize>), CliError> {
        let pair = |m: Method| -> Result<(CosetExpansions, CosetExpansions, Vec<usize>), CliError> {
            let len = lengths_for(m, &sys, k, prec);
            let fe = expand(&ff, &len)?;
            let ge = if same { fe.clone() } else { expand(&gf, &len)? };
            Ok((fe, ge, len))
        };
        let haberland = matches!(requested, Requested::Haberland | Requested::Exact(Method::HaberlandCuspidal | Method::HaberlandGeneral));
        if haberland && !haberland_applies(k) {
            return Err(CliError::NotApplicable(format!("Haberland needs an integral weight k >= 2, got k = {}", q_str(k))));
        }
        let method = match requested {
            Requested::Exact(m) => Some(m),
            Requested::Auto if !haberland_applies(k) => Some(Method::NelsonCollins),
            Requested::Auto | Requested::Haberland => None,
        };
        let (fe, ge, len, method) = match method {
            Some(m) => {
                let (fe, ge, len) = pair(m)?;
                (fe, ge, len, m)
            }
            // both Haberland variants use the same lengths; pick after expanding
            None => {
                let (fe, ge, len) = pair(Method::HaberlandCuspidal)?;
                let m = auto_method(&fe, &ge, &sys)?;
                log::info!("selected {}", m.tag());
                (fe, ge, len, m)
            }
        };
        Ok((run_method(method, &fe, &ge, &sys, prec)?, len))
    })?;
    let (r, len) = result;
    let out = PeterssonOut { level, weight: q_str(k), character: char_json(&ff), method_requested: &opts.method, result: r.to_json() };
    let json = serde_json::to_value(out).expect("result serializes");
    let manifest = run.finish(opts, len, Some(r.method), std::slice::from_ref(&r));
    Ok(Output { json, manifest })
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Quick end-to-end checks against known values; fails with exit code 3.
pub fn cmd_selftest(opts: &Options) -> Result<Output, CliError> {
    let mut run = Run::new("selftest", json!({ "digits": opts.digits }));
    let mut checks = Vec::new();
    let o = Options { digits: 19, length: 8, level: None, weight: None, method: "auto".into(), jobs: opts.jobs, cache: Cache::disabled() };

    let s = cuspidal::petersson::eta_lattice_sum(96).map_err(CliError::from)?;
    let err = (s - rug::Float::with_val(96, 1) / 12u32).abs().to_f64();
    checks.push(Check { name: "eta-lattice-sum", pass: err < 1e-25, detail: format!("|sum - 1/12| = {err:e}") });

    let bad: Vec<u64> = (1..=100).filter(|&n| CosetSystem::new(n).cusps.iter().map(|c| c.width).sum::<u64>() != cuspidal::arith::gamma0_index(n)).collect();
    checks.push(Check { name: "cusp-widths", pass: bad.is_empty(), detail: format!("N <= 100, mismatches {bad:?}") });

    let th = cmd_expand(&FormDescriptor::Fixture { id: "theta".into() }, Some("1/2"), &o)?;
    let e = &th.json["cusps"]["1/2"]["expansion"];
    let lead = e["alpha"].as_str().unwrap_or_default().to_string();
    checks.push(Check { name: "theta-cusp-1/2", pass: lead == "1/4", detail: format!("leading exponent {lead}") });

    let delta = FormDescriptor::Fixture { id: "delta".into() };
    let d = cmd_petersson(&delta, &delta, &o)?;
    let v: f64 = d.json["result"]["re"].as_str().and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    let want = 1.035_362_056_804_321e-6;
    let m = d.json["result"]["method"].as_str().unwrap_or_default().to_string();
    checks.push(Check { name: "delta-norm", pass: m == "haberland-cuspidal" && ((v - want) / want).abs() < 1e-14, detail: format!("{v:e} by {m}") });

    let theta = FormDescriptor::Fixture { id: "theta".into() };
    let t = cmd_petersson(&theta, &theta, &o)?;
    let mt = t.json["result"]["method"].as_str().unwrap_or_default().to_string();
    let tv: f64 = t.json["result"]["re"].as_str().and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    let oracle = cmd_petersson(&theta, &theta, &Options { method: "oracle".into(), ..o.clone() })?;
    let ov: f64 = oracle.json["result"]["re"].as_str().and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    checks.push(Check { name: "theta-norm", pass: mt == "nelson-collins" && ((tv - ov) / ov).abs() < 1e-4, detail: format!("{tv:e} by {mt}, oracle {ov:e}") });

    let x = rug::Float::with_val(120, 1.5);
    let (u, _) = cuspidal::specfun::u_integral_de(3, &x, 53).map_err(|e| CliError::Petersson(e.into()))?;
    let ud = cuspidal::specfun::u_direct(Q::from_integer(3), &x, 120);
    let ue = (rug::Float::with_val(120, &u - &ud).abs() / ud).to_f64();
    checks.push(Check { name: "bessel-kernel", pass: ue < 2f64.powi(-47), detail: format!("U_3(1.5) relative error {ue:e}") });

    run.cache.extend(th.manifest.cache.into_iter().chain(d.manifest.cache).chain(t.manifest.cache));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let json = json!({ "pass": failed.is_empty(), "checks": checks });
    let manifest = run.finish(opts, Vec::new(), None, &[]);
    if !failed.is_empty() {
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&json).expect("json"));
        return Err(CliError::SelfTest(failed.join(", ")));
    }
    Ok(Output { json, manifest })
}
