//! Eigenvalue tables at four decimals, one `λᵢ, vᵢ` pair per row.

use std::fmt::Write as _;

use attitude_manifolds::spectral::{Classification, EigenStructure};
use attitude_manifolds::EquilibriumId;
use num_complex::Complex64;

/// Below this a printed component is zero at four decimals.
const PRINT_EPS: f64 = 5e-5;

fn real(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" { "0.0000".into() } else { s }
}

pub fn complex(z: Complex64) -> String {
    if z.im.abs() < PRINT_EPS {
        real(z.re)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{}{sign}{}i", real(z.re), real(z.im.abs()))
    }
}

/// `e1 - 1.6180e4` style, dropping components that print as zero.
pub fn vector(v: &[Complex64]) -> String {
    let mut out = String::new();
    for (k, c) in v.iter().enumerate() {
        if c.norm() < PRINT_EPS {
            continue;
        }
        let basis = format!("e{}", k + 1);
        let unit = c.im.abs() < PRINT_EPS && (c.re.abs() - 1.0).abs() < PRINT_EPS;
        let term = if c.im.abs() >= PRINT_EPS {
            format!("({}){basis}", complex(*c))
        } else if unit {
            basis
        } else {
            format!("{}{basis}", real(c.re.abs()))
        };
        let negative = c.im.abs() < PRINT_EPS && c.re < 0.0;
        match (out.is_empty(), negative) {
            (true, true) => write!(out, "-{term}"),
            (true, false) => write!(out, "{term}"),
            (false, true) => write!(out, " - {term}"),
            (false, false) => write!(out, " + {term}"),
        }
        .unwrap();
    }
    if out.is_empty() { "0".into() } else { out }
}

pub fn render(id: EquilibriumId, e: &EigenStructure, cls: &Classification) -> String {
    let mut out = format!("equilibrium {id}\n");
    let values: Vec<String> = e.values.iter().map(|z| complex(*z)).collect();
    let width = values.iter().map(String::len).max().unwrap_or(0);
    for (i, value) in values.iter().enumerate() {
        let v: Vec<Complex64> = e.pivot_form(i).iter().copied().collect();
        let note = if cls.retained.contains(&i) { "" } else { "  (not admissible)" };
        writeln!(out, "  λ{} = {value:>width$}   v{} = {}{note}", i + 1, i + 1, vector(&v)).unwrap();
    }
    writeln!(out, "  stable {}, unstable {}: {}", cls.stable, cls.unstable, cls.label).unwrap();
    out
}
