//! Form descriptors accepted on the command line, and their resolution into a target
//! q-expansion at infinity.

use cuspidal::arithchar::DirichletCharacter;
use cuspidal::eisenstein::{f_expansion, theta_expansion, EisParams};
use cuspidal::fixtures::{bundled, generate};
use cuspidal::num::{ComplexBig, Prec, Q};
use cuspidal::qseries::{parse_float, parse_q, FracQExp};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One of the four accepted shapes; serialized without a tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FormDescriptor {
    Stream { level: u64, weight: Value, character: (u64, u64), coeffs: Vec<Value> },
    Eisenstein { chi1: (u64, u64), chi2: (u64, u64), k: u32, e: u64 },
    ThetaPower { t: u32 },
    Fixture { id: String },
}

/// A descriptor resolved to its expansion at infinity.
#[derive(Debug, Clone)]
pub struct Target {
    pub expansion: FracQExp,
    pub level: u64,
    pub weight: Q,
    pub character: DirichletCharacter,
    /// Whether more coefficients can be produced on demand.
    pub extensible: bool,
}

impl FormDescriptor {
    /// A fixture id, a JSON object, or `@path` to a JSON file.
    pub fn parse_arg(arg: &str) -> Result<Self, CliError> {
        let text = if let Some(path) = arg.strip_prefix('@') {
            std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?
        } else {
            arg.to_string()
        };
        let t = text.trim();
        if t.starts_with('{') {
            serde_json::from_str(t).map_err(|e| CliError::Input(format!("bad form descriptor: {e}")))
        } else {
            Ok(FormDescriptor::Fixture { id: t.to_string() })
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("descriptor serializes")))
    }

    /// Resolve with at least `len` coefficients where the source allows it.
    pub fn resolve(&self, len: usize, prec: Prec) -> Result<Target, CliError> {
        match self {
            FormDescriptor::Stream { level, weight, character, coeffs } => {
                let k = match weight {
                    Value::String(s) => parse_q(s).map_err(|e| CliError::Input(e.to_string()))?,
                    Value::Number(n) => Q::from_integer(n.as_i64().ok_or_else(|| CliError::Input(format!("weight {n}")))?),
                    v => return Err(CliError::Input(format!("weight must be a number or a fraction string, got {v}"))),
                };
                let chi = conrey(*character)?.extend_to(*level).map_err(|_| {
                    CliError::Input(format!("character modulus {} does not divide the level {level}", character.0))
                })?;
                let c = coeffs.iter().map(|v| coefficient(v, prec)).collect::<Result<Vec<_>, _>>()?;
                if c.is_empty() {
                    return Err(CliError::Input("empty coefficient stream".into()));
                }
                Ok(Target { expansion: FracQExp::new(Q::from_integer(0), 1, k, c, prec), level: *level, weight: k, character: chi, extensible: false })
            }
            FormDescriptor::Eisenstein { chi1, chi2, k, e } => {
                let p = EisParams::new(conrey(*chi1)?, conrey(*chi2)?, *k, *e).map_err(|err| CliError::Input(err.to_string()))?;
                if p.is_quasimodular() || *k == 0 {
                    return Err(CliError::Input("weight 2 with trivial characters is only quasimodular".into()));
                }
                let f = f_expansion(&p, Q::from_integer(len as i64), prec);
                Ok(Target { expansion: f, level: p.level(), weight: Q::from_integer(*k as i64), character: p.character(), extensible: true })
            }
            FormDescriptor::ThetaPower { t } => {
                if *t == 0 {
                    return Err(CliError::Input("theta power must be positive".into()));
                }
                let th = theta_expansion(Q::from_integer(len as i64), prec);
                let mut acc = th.clone();
                for _ in 1..*t {
                    acc = acc.mul(&th).map_err(|e| CliError::Input(e.to_string()))?;
                }
                // odd powers carry the theta multiplier; even powers are chi_{-4}^{t/2}
                let chi = if t % 2 == 1 { DirichletCharacter::trivial(4) } else { conrey((4, 3))?.pow(*t as u64 / 2) };
                Ok(Target { expansion: acc, level: 4, weight: Q::new(*t as i64, 2), character: chi, extensible: true })
            }
            FormDescriptor::Fixture { id } => {
                let f = if len <= 50 { bundled(id) } else { generate(id, len) };
                let f = f.ok_or_else(|| CliError::Input(format!("unknown fixture {id:?} (known: {})", cuspidal::fixtures::IDS.join(", "))))?;
                Ok(Target { expansion: f.expansion(prec), level: f.level, weight: f.weight_q(), character: f.character().extend_to(f.level).expect("fixture character"), extensible: true })
            }
        }
    }
}

fn conrey((m, i): (u64, u64)) -> Result<DirichletCharacter, CliError> {
    DirichletCharacter::conrey(m, i).map_err(|e| CliError::Input(format!("character ({m}, {i}): {e}")))
}

/// A real number, a decimal string, or a `[re, im]` pair.
fn coefficient(v: &Value, prec: Prec) -> Result<ComplexBig, CliError> {
    let real = |v: &Value| -> Result<rug::Float, CliError> {
        match v {
            Value::String(s) => parse_float(s, prec).map_err(|e| CliError::Input(e.to_string())),
            Value::Number(n) => parse_float(&n.to_string(), prec).map_err(|e| CliError::Input(e.to_string())),
            v => Err(CliError::Input(format!("coefficient {v} is not a number"))),
        }
    };
    match v {
        Value::Array(p) if p.len() == 2 => Ok(ComplexBig::new(real(&p[0])?, real(&p[1])?)),
        v => Ok(ComplexBig::new(real(v)?, rug::Float::new(prec))),
    }
}

impl Target {
    /// Integral weight forms need `chi(-1) = (-1)^k`.
    pub fn check_parity(&self) -> Result<(), CliError> {
        if self.weight.is_integer() {
            let k = self.weight.to_integer();
            let want = if k % 2 == 0 { 1 } else { -1 };
            if self.character.parity() != want {
                return Err(CliError::Input(format!("character {} has the wrong parity for weight {k}", self.character.label())));
            }
        }
        Ok(())
    }
}
