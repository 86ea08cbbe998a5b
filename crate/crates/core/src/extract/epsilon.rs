use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ir::{walk_stmts, GateSet, Program, StmtKind, Subroutine};

/// Default sampling and optimization domain of every epsilon variable.
pub const EPS_DOMAIN: (f64, f64) = (1e-18, 0.5);

/// How much call context distinguishes epsilon variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Granularity {
    /// `None` means the full call path.
    pub context_depth: Option<usize>,
}

impl Granularity {
    pub fn depth(d: usize) -> Granularity {
        Granularity {
            context_depth: Some(d),
        }
    }

    pub fn unlimited() -> Granularity {
        Granularity {
            context_depth: None,
        }
    }

    /// Keeps the outermost `depth` labels of a call path.
    pub fn truncate<'a>(&self, path: &'a [String]) -> &'a [String] {
        match self.context_depth {
            Some(d) if d < path.len() => &path[..d],
            _ => path,
        }
    }
}

/// Depth 0: one variable per declaration site.
impl Default for Granularity {
    fn default() -> Granularity {
        Granularity::depth(0)
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.context_depth {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("unlimited"),
        }
    }
}

impl FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Granularity, String> {
        if s == "unlimited" {
            return Ok(Granularity::unlimited());
        }
        s.parse::<usize>()
            .map(Granularity::depth)
            .map_err(|_| format!("expected a non-negative depth or `unlimited`, got `{s}`"))
    }
}

impl Serialize for Granularity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.context_depth {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for Granularity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Granularity, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Depth(usize),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Depth(k) => Ok(Granularity::depth(k)),
            Repr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One optimizable accuracy parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsilonVar {
    pub source_name: String,
    pub context_path: Vec<String>,
    pub mangled_name: String,
    pub domain: (f64, f64),
}

/// `a::b::name` for context path `[a, b]` after truncation.
pub fn mangle(path: &[String], source: &str, g: Granularity) -> String {
    let kept = g.truncate(path);
    if kept.is_empty() {
        source.to_string()
    } else {
        format!("{}::{source}", kept.join("::"))
    }
}

/// Call-site label of the statement at preorder index `k` calling `callee`.
pub fn site_label(callee: &str, k: usize) -> String {
    format!("{callee}@{k}")
}

/// Epsilon sites of one subroutine: `(path relative to the subroutine,
/// source name)`. Gate intrinsics sit one label below their call site.
pub(crate) fn local_sites(sub: &Subroutine, gates: &GateSet) -> Vec<(Vec<String>, String)> {
    let mut out = Vec::new();
    let mut k = 0usize;
    walk_stmts(&sub.body, &mut |s| {
        match &s.kind {
            StmtKind::EpsilonDecl { name } => out.push((Vec::new(), name.clone())),
            StmtKind::GateCall { gate, .. } => {
                if let Some(eps) = gates.get(gate).and_then(|d| d.intrinsic_epsilon.clone()) {
                    out.push((vec![site_label(gate, k)], eps));
                }
            }
            _ => {}
        }
        k += 1;
    });
    out
}

/// Labelled subroutine calls of `sub`, in preorder.
pub(crate) fn call_sites(sub: &Subroutine) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut k = 0usize;
    walk_stmts(&sub.body, &mut |s| {
        if let StmtKind::Call { callee, .. } = &s.kind {
            out.push((callee.clone(), site_label(callee, k)));
        }
        k += 1;
    });
    out
}

/// Inventories the epsilon variables of `p` reachable from its entry, one
/// per declaration site and distinct call context up to the granularity.
/// Order is first discovery in a depth-first walk.
pub fn collect_epsilons(p: &Program, gates: &GateSet, g: Granularity) -> Vec<EpsilonVar> {
    let mut out = Vec::new();
    let mut names = HashSet::new();
    let mut visited: HashSet<(String, Vec<String>)> = HashSet::new();
    let subs: BTreeMap<&str, &Subroutine> =
        p.subroutines.iter().map(|s| (s.name.as_str(), s)).collect();

    fn visit(
        sub: &Subroutine,
        path: &mut Vec<String>,
        ctx: &mut (
            &BTreeMap<&str, &Subroutine>,
            &GateSet,
            Granularity,
            &mut Vec<EpsilonVar>,
            &mut HashSet<String>,
            &mut HashSet<(String, Vec<String>)>,
        ),
    ) {
        let g = ctx.2;
        let key = (sub.name.clone(), g.truncate(path).to_vec());
        if !ctx.5.insert(key) {
            return;
        }
        for (rel, source) in local_sites(sub, ctx.1) {
            let mut full = path.clone();
            full.extend(rel);
            let mangled = mangle(&full, &source, g);
            if ctx.4.insert(mangled.clone()) {
                ctx.3.push(EpsilonVar {
                    source_name: source,
                    context_path: g.truncate(&full).to_vec(),
                    mangled_name: mangled,
                    domain: EPS_DOMAIN,
                });
            }
        }
        for (callee, label) in call_sites(sub) {
            if let Some(target) = ctx.0.get(callee.as_str()) {
                path.push(label);
                visit(target, path, ctx);
                path.pop();
            }
        }
    }

    if let Some(entry) = p.entry() {
        let mut ctx = (&subs, gates, g, &mut out, &mut names, &mut visited);
        visit(entry, &mut Vec::new(), &mut ctx);
    }
    out
}
