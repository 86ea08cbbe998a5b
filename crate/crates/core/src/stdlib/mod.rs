//! Built-in benchmark programs, written in the DSL and parsed on demand.
//!
//! Every builder takes an optional concrete `n`. Without one the program's
//! entry keeps `n` as a symbolic parameter; with one a parameterless `main`
//! calls it.

use std::fmt::Write;

use thiserror::Error;

use crate::ir::{parse, Program};

pub const NAMES: [&str; 8] = [
    "qft",
    "aqft",
    "tfim_trotter",
    "qpe_simplified",
    "qpe_with_qft",
    "qpe_with_aqft",
    "shor",
    "bell",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub n: Option<i64>,
    /// Success probability of phase estimation.
    pub p: f64,
    /// Proportionality constant of the Trotter step count.
    pub c_tr: f64,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            n: None,
            p: 0.5,
            c_tr: 1.0,
        }
    }
}

impl Options {
    pub fn with_n(n: i64) -> Options {
        Options {
            n: Some(n),
            ..Options::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StdlibError {
    #[error("unknown stdlib program `{0}` (available: {list})", list = NAMES.join(", "))]
    UnknownProgram(String),
    #[error("`{name}` needs n >= {min}, got {n}")]
    InvalidSize { name: String, n: i64, min: i64 },
    #[error("success probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
}

const QFT: &str = "\
# One Hadamard per qubit followed by controlled phase rotations; each
# controlled rotation is three Rz and two CNOT.
def qft(n: int) {
    for i in 0..n {
        H(i);
        for j in 0..n - 1 - i {
            Rz(i + j + 1, pi / exp2(j + 2));
            CNOT(i, i + j + 1);
            Rz(i + j + 1, -pi / exp2(j + 2));
            CNOT(i, i + j + 1);
            Rz(i, pi / exp2(j + 2));
        }
    }
}
";

const AQFT: &str = "\
# Rotations by angles below pi / 2^l are dropped.
def aqft(n: int) {
    epsilon eps_QFT;
    let l = ceil(log2(n / eps_QFT)) + 3;
    for i in 0..n {
        H(i);
        for j in 0..n - 1 - i {
            if j < l {
                Rz(i + j + 1, pi / exp2(j + 2));
                CNOT(i, i + j + 1);
                Rz(i + j + 1, -pi / exp2(j + 2));
                CNOT(i, i + j + 1);
                Rz(i, pi / exp2(j + 2));
            }
        }
    }
}
";

fn tfim(c_tr: f64) -> String {
    format!(
        "\
# Transverse-field Ising chain: per step, n ZZ couplings and n X fields.
def tfim_trotter(n: int, @dontcare J: real, @dontcare h: real, @dontcare t: real) {{
    epsilon eps_TE;
    let M = ceil({c_tr:?} / eps_TE ^ 0.5);
    for s in 0..M {{
        for k in 0..n {{
            CNOT(k, k + 1);
            Rz(k + 1, 2 * J * t / M);
            CNOT(k, k + 1);
        }}
        for k in 0..n {{
            Rx(k, 2 * h * t / M);
        }}
    }}
}}
"
    )
}

fn ctl_tfim(c_tr: f64) -> String {
    format!(
        "\
# Controlled time step: a controlled ZZ coupling is two Rz and four CNOT, a
# controlled X field two Rz.
def ctl_tfim(@dontcare c: int, n: int, @dontcare J: real, @dontcare h: real, @dontcare t: real) {{
    epsilon eps_TE;
    let M = ceil({c_tr:?} / eps_TE ^ 0.5);
    for s in 0..M {{
        for k in 0..n {{
            CNOT(k, k + 1);
            CNOT(c, k + 1);
            Rz(k + 1, J * t / M);
            CNOT(c, k + 1);
            Rz(k + 1, -J * t / M);
            CNOT(k, k + 1);
        }}
        for k in 0..n {{
            H(k);
            Rz(k, h * t / M);
            CNOT(c, k);
            Rz(k, -h * t / M);
            CNOT(c, k);
            H(k);
        }}
    }}
}}
"
    )
}

fn qpe(name: &str, p: f64, inverse: Option<&str>) -> String {
    let mut s = format!(
        "\
def {name}(n: int) {{
    epsilon eps_QPE;
    let m = ceil(log2(2 * pi / eps_QPE)) + ceil(log2(2 + 1 / (2 * (1 - {p:?}))));
    for i in 0..m {{
        H(i);
        for r in 0..exp2(i) {{
            ctl_tfim(i, n, 1.0, 1.0, 1.0);
        }}
    }}
"
    );
    if let Some(inv) = inverse {
        let _ = writeln!(s, "    {inv}(m);");
    }
    s.push_str("}\n");
    s
}

const SHOR: &str = "\
# Fourier-basis addition of a classical constant: one controlled rotation per
# register qubit.
def phi_add(n: int) {
    for k in 0..n {
        Rz(k, pi / exp2(k + 1));
        CNOT(n, k);
        Rz(k, -pi / exp2(k + 1));
        CNOT(n, k);
        Rz(n, pi / exp2(k + 1));
    }
}

# Modular addition: five Fourier-basis additions, each wrapped in a forward
# and an inverse transform. The overflow check costs one Toffoli (7 T,
# 6 CNOT, 2 H) plus two X and two CNOT.
def modadd(n: int) {
    for a in 0..5 {
        aqft(n);
        phi_add(n);
        aqft(n);
    }
    X(n);
    CNOT(n, 0);
    X(n);
    CNOT(n, 0);
    H(0);
    CNOT(1, 0); T(0); CNOT(n, 0); T(0); CNOT(1, 0); T(0); CNOT(n, 0);
    T(0); T(1); CNOT(n, 1); T(1); CNOT(n, 1); T(n);
    H(0);
}

# Controlled modular multiplication: n additions into the ancilla register,
# n controlled swaps (one Toffoli each), n additions to uncompute.
def cmodmul(n: int) {
    for k in 0..n {
        modadd(n + 1);
    }
    for k in 0..n {
        CNOT(k, n + k);
        H(k);
        CNOT(n + k, k); T(k); CNOT(0, k); T(k); CNOT(n + k, k); T(k); CNOT(0, k);
        T(k); T(n + k); CNOT(0, n + k); T(n + k); CNOT(0, n + k); T(0);
        H(k);
        CNOT(k, n + k);
    }
    for k in 0..n {
        modadd(n + 1);
    }
}

# Semiclassical phase estimation over 2n exponent bits on one control qubit.
def shor(n: int) {
    for k in 0..2 * n {
        H(0);
        cmodmul(n);
        Rz(0, pi / exp2(k + 1));
        H(0);
        M(0);
    }
}
";

const BELL: &str = "\
def bell() {
    H(0);
    CNOT(0, 1);
}
";

fn check_n(name: &str, n: Option<i64>, min: i64) -> Result<(), StdlibError> {
    match n {
        Some(n) if n < min => Err(StdlibError::InvalidSize {
            name: name.to_string(),
            n,
            min,
        }),
        _ => Ok(()),
    }
}

/// DSL source of a builder.
pub fn source(name: &str, opts: &Options) -> Result<String, StdlibError> {
    if !(opts.p > 0.0 && opts.p < 1.0) {
        return Err(StdlibError::InvalidProbability(opts.p));
    }
    let mut src = match name {
        "qft" => {
            check_n(name, opts.n, 1)?;
            QFT.to_string()
        }
        "aqft" => {
            check_n(name, opts.n, 1)?;
            AQFT.to_string()
        }
        "tfim_trotter" => {
            check_n(name, opts.n, 2)?;
            tfim(opts.c_tr)
        }
        "qpe_simplified" | "qpe_with_qft" | "qpe_with_aqft" => {
            check_n(name, opts.n, 2)?;
            let (deps, inv) = match name {
                "qpe_simplified" => (String::new(), None),
                "qpe_with_qft" => (format!("{QFT}\n"), Some("qft")),
                _ => (format!("{AQFT}\n"), Some("aqft")),
            };
            format!("{}\n{deps}{}", ctl_tfim(opts.c_tr), qpe(name, opts.p, inv))
        }
        "shor" => {
            check_n(name, opts.n, 2)?;
            format!("{AQFT}\n{SHOR}")
        }
        "bell" => return Ok(BELL.to_string()),
        other => return Err(StdlibError::UnknownProgram(other.to_string())),
    };
    if let Some(n) = opts.n {
        let extra = if name == "tfim_trotter" { ", 1.0, 1.0, 1.0" } else { "" };
        let _ = write!(src, "\ndef main() {{\n    {name}({n}{extra});\n}}\n");
    }
    Ok(src)
}

/// Parsed builder output.
pub fn build(name: &str, opts: &Options) -> Result<Program, StdlibError> {
    let src = source(name, opts)?;
    Ok(parse(&src).expect("stdlib sources parse"))
}

pub fn qft(n: Option<i64>) -> Program {
    build("qft", &Options { n, ..Options::default() }).expect("valid size")
}

pub fn aqft(n: Option<i64>) -> Program {
    build("aqft", &Options { n, ..Options::default() }).expect("valid size")
}
