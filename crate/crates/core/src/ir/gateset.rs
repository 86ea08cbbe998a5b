//! Cost models: which gates exist, what they cost and what error they add.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{CExpr, Param, ParamKind};
use super::parser::parse_cexpr;
use crate::symexpr::{free_vars, Expr};

#[derive(Debug, Clone, PartialEq)]
pub struct GateDef {
    pub name: String,
    pub params: Vec<Param>,
    /// Cost counted by the `T` counter.
    pub cost: CExpr,
    pub error: CExpr,
    pub intrinsic_epsilon: Option<String>,
}

impl GateDef {
    fn simple(name: &str, qubits: usize, cost: i64) -> GateDef {
        GateDef {
            name: name.into(),
            params: qubit_params(qubits),
            cost: Expr::int(cost),
            error: Expr::zero(),
            intrinsic_epsilon: None,
        }
    }

    fn rotation(name: &str) -> GateDef {
        let eps = "eps_R";
        let mut params = qubit_params(1);
        params.push(Param::dont_care("angle", ParamKind::Real));
        GateDef {
            name: name.into(),
            params,
            cost: rotation_cost(eps),
            error: Expr::var(eps),
            intrinsic_epsilon: Some(eps.into()),
        }
    }

    pub fn is_free(&self) -> bool {
        self.cost.is_zero_const() && self.error.is_zero_const() && self.intrinsic_epsilon.is_none()
    }
}

/// `1.5 · log₂(1/ε)`, the T-count of a synthesized single-qubit rotation.
pub fn rotation_cost(eps: &str) -> CExpr {
    Expr::num(1.5) * Expr::log2(Expr::div_nonzero(Expr::one(), Expr::var(eps)))
}

fn qubit_params(n: usize) -> Vec<Param> {
    let names = ["q", "t", "u"];
    (0..n)
        .map(|k| Param::dont_care(names[k], ParamKind::Int))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    pub name: String,
    pub gates: BTreeMap<String, GateDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid gate-set configuration at `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

impl GateSet {
    /// Clifford+T: only T gates and synthesized rotations cost.
    pub fn clifford_t() -> GateSet {
        let mut gates = BTreeMap::new();
        for (name, qubits, cost) in [
            ("T", 1, 1),
            ("H", 1, 0),
            ("S", 1, 0),
            ("X", 1, 0),
            ("Z", 1, 0),
            ("M", 1, 0),
            ("CNOT", 2, 0),
        ] {
            gates.insert(name.to_string(), GateDef::simple(name, qubits, cost));
        }
        for name in ["Rz", "Rx"] {
            gates.insert(name.to_string(), GateDef::rotation(name));
        }
        GateSet {
            name: "clifford_t".into(),
            gates,
        }
    }

    /// NISQ model: cost is the number of CNOTs, rotations are native.
    pub fn nisq() -> GateSet {
        let mut gs = GateSet::clifford_t();
        gs.name = "nisq".into();
        for g in gs.gates.values_mut() {
            g.cost = Expr::int((g.name == "CNOT") as i64);
            g.error = Expr::zero();
            g.intrinsic_epsilon = None;
        }
        gs
    }

    pub fn get(&self, name: &str) -> Option<&GateDef> {
        self.gates.get(name)
    }

    /// Loads a JSON configuration. Empty text (or `{}`) gives the default
    /// Clifford+T model.
    pub fn load(text: &str) -> Result<GateSet, ConfigError> {
        if text.trim().is_empty() {
            return Ok(GateSet::clifford_t());
        }
        let doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| invalid("<document>", e.to_string()))?;
        let mut gs = match doc.base.as_deref() {
            None | Some("clifford_t") => GateSet::clifford_t(),
            Some("nisq") => GateSet::nisq(),
            Some("empty") => GateSet {
                name: "empty".into(),
                gates: BTreeMap::new(),
            },
            Some(other) => return Err(invalid("base", format!("unknown base model `{other}`"))),
        };
        if let Some(name) = doc.name {
            gs.name = name;
        }
        for (gate, entry) in doc.gates {
            let key = format!("gates.{gate}");
            let mut def = gs.gates.get(&gate).cloned().unwrap_or_else(|| GateDef {
                name: gate.clone(),
                params: qubit_params(1),
                cost: Expr::zero(),
                error: Expr::zero(),
                intrinsic_epsilon: None,
            });
            if let Some(params) = entry.params {
                def.params = params
                    .iter()
                    .map(|p| parse_param(p).ok_or_else(|| invalid(format!("{key}.params"), format!("bad parameter `{p}`"))))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(eps) = entry.intrinsic_epsilon {
                def.intrinsic_epsilon = if eps.is_empty() { None } else { Some(eps) };
            }
            if let Some(c) = entry.cost {
                def.cost = parse_formula(&c, &format!("{key}.cost"))?;
            }
            if let Some(e) = entry.error {
                def.error = parse_formula(&e, &format!("{key}.error"))?;
            }
            check_epsilon_use(&def, &key)?;
            gs.gates.insert(gate, def);
        }
        Ok(gs)
    }
}

fn parse_formula(text: &str, key: &str) -> Result<CExpr, ConfigError> {
    parse_cexpr(text).map_err(|e| invalid(key, e.to_string()))
}

/// Accepts `"name: kind"` with an optional `@dontcare ` prefix.
fn parse_param(text: &str) -> Option<Param> {
    let t = text.trim();
    let (dont_care, rest) = match t.strip_prefix("@dontcare") {
        Some(r) => (true, r.trim()),
        None => (false, t),
    };
    let (name, kind) = rest.split_once(':')?;
    let kind = match kind.trim() {
        "int" => ParamKind::Int,
        "real" => ParamKind::Real,
        "qureg" => ParamKind::Qureg,
        _ => return None,
    };
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some(Param {
        name: name.into(),
        kind,
        dont_care,
    })
}

fn check_epsilon_use(def: &GateDef, key: &str) -> Result<(), ConfigError> {
    let mut used: BTreeSet<String> = free_vars(&def.cost);
    used.extend(free_vars(&def.error));
    match &def.intrinsic_epsilon {
        Some(eps) => {
            if !used.contains(eps) {
                return Err(invalid(
                    format!("{key}.intrinsicEpsilon"),
                    format!("`{eps}` is not referenced by cost or error"),
                ));
            }
            if let Some(other) = used.iter().find(|v| *v != eps) {
                return Err(invalid(key, format!("unknown name `{other}` in formula")));
            }
        }
        None => {
            if let Some(v) = used.iter().next() {
                return Err(invalid(key, format!("formula references `{v}` but no intrinsicEpsilon is declared")));
            }
        }
    }
    Ok(())
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    base: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    gates: BTreeMap<String, GateEntry>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct GateEntry {
    #[serde(default)]
    params: Option<Vec<String>>,
    #[serde(default)]
    cost: Option<String>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    intrinsic_epsilon: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{evaluate, Env};

    #[test]
    fn empty_config_is_clifford_t() {
        assert_eq!(GateSet::load("").unwrap(), GateSet::clifford_t());
        assert_eq!(GateSet::load("{}").unwrap(), GateSet::clifford_t());
        let gs = GateSet::clifford_t();
        assert_eq!(gs.get("T").unwrap().cost, Expr::int(1));
        assert!(gs.get("CNOT").unwrap().is_free());
        let rz = gs.get("Rz").unwrap();
        let v = evaluate(&rz.cost, &Env::new().with("eps_R", 2f64.powi(-10))).unwrap();
        assert!((v - 15.0).abs() < 1e-12);
    }

    #[test]
    fn override_rotation_cost() {
        let gs = GateSet::load(r#"{"gates": {"Rz": {"cost": "3*log2(1/eps_R)+11"}}}"#).unwrap();
        let v = evaluate(&gs.get("Rz").unwrap().cost, &Env::new().with("eps_R", 0.25)).unwrap();
        assert!((v - 17.0).abs() < 1e-12);
        assert_eq!(gs.get("Rx").unwrap().cost, rotation_cost("eps_R"));
    }

    #[test]
    fn nisq_counts_cnots() {
        let gs = GateSet::load(r#"{"base": "nisq"}"#).unwrap();
        assert_eq!(gs.get("CNOT").unwrap().cost, Expr::int(1));
        assert_eq!(gs.get("T").unwrap().cost, Expr::int(0));
        assert!(gs.get("Rz").unwrap().intrinsic_epsilon.is_none());
    }

    #[test]
    fn malformed_entries_name_the_key() {
        let bad = [
            r#"{"base": "nope"}"#,
            r#"{"gates": {"Rz": {"cost": "3*("}}}"#,
            r#"{"gates": {"Q": {"cost": "y"}}}"#,
            r#"{"gates": {"Q": {"cost": "1", "intrinsicEpsilon": "e"}}}"#,
            r#"{"gates": {"Q": {"params": ["q int"]}}}"#,
            r#"{"gates": {"Q": {"colour": "red"}}}"#,
        ];
        for text in bad {
            assert!(matches!(GateSet::load(text), Err(ConfigError::Invalid { .. })), "{text}");
        }
        let Err(ConfigError::Invalid { key, .. }) = GateSet::load(bad[1]) else {
            unreachable!()
        };
        assert_eq!(key, "gates.Rz.cost");
    }

    #[test]
    fn custom_gate() {
        let gs = GateSet::load(
            r#"{"gates": {"CCZ": {"params": ["@dontcare a: int", "@dontcare b: int", "@dontcare c: int"], "cost": "7"}}}"#,
        )
        .unwrap();
        let ccz = gs.get("CCZ").unwrap();
        assert_eq!(ccz.params.len(), 3);
        assert_eq!(ccz.cost, Expr::int(7));
    }
}
