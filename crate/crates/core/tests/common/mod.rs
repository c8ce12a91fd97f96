//! Independent reference values for the bundled fixtures, computed by
//! enumerating all 16 states by hand rather than through the library.

#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub const UNIFORM_4: f64 = -2.772588722239781;
pub const FIG1_G_STANDARD: f64 = -2.453268316381112;
pub const FIG1_G_ALT: f64 = -2.457151752657743;
pub const FIG1_K: f64 = 0.9921259842519685;
pub const FIG1_WEIGHT_SUM: f64 = 1.007936507936508;
pub const FIG1_G_SELF_ALT: f64 = -2.431478047911802;
pub const FIG1_INDEP_G: f64 = -2.4601726861199547;

pub const P_AB: [[f64; 2]; 2] = [[0.3, 0.2], [0.1, 0.4]];
pub const P_AC: [[f64; 2]; 2] = [[0.4, 0.1], [0.3, 0.2]];
pub const P_BC: [[f64; 2]; 2] = [[0.3, 0.1], [0.4, 0.2]];
pub const P_D1_GIVEN_BC: [[f64; 2]; 2] = [[0.2, 0.4], [0.6, 0.8]];

pub fn p_bcd(b: usize, c: usize, d: usize) -> f64 {
    let d1 = P_D1_GIVEN_BC[b][c];
    P_BC[b][c] * if d == 1 { d1 } else { 1.0 - d1 }
}

fn p_a(a: usize) -> f64 {
    P_AB[a][0] + P_AB[a][1]
}

fn p_b(b: usize) -> f64 {
    P_BC[b][0] + P_BC[b][1]
}

fn p_c(c: usize) -> f64 {
    P_BC[0][c] + P_BC[1][c]
}

/// States `(a, b, c, d)` in row-major order, `d` fastest.
pub fn fig1_states() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|i| (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1))
}

/// `P(AB) P(C|A) P(D|BC)`.
pub fn fig1_px() -> Vec<f64> {
    fig1_states()
        .map(|(a, b, c, d)| {
            P_AB[a][b] * (P_AC[a][c] / p_a(a)) * (p_bcd(b, c, d) / P_BC[b][c])
        })
        .collect()
}

/// `P(AB) P(AC) P(BCD) / (P(A) P(B) P(C))`, unnormalized.
pub fn fig1_alt_weights() -> Vec<f64> {
    fig1_states()
        .map(|(a, b, c, d)| {
            P_AB[a][b] * P_AC[a][c] * p_bcd(b, c, d) / (p_a(a) * p_b(b) * p_c(c))
        })
        .collect()
}

pub fn xlogy_sum(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * b.ln())
        .sum()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beliefweb"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Value of a `key = value` line.
pub fn field(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .find(|(k, _)| k.trim() == key)
        .and_then(|(_, v)| v.trim().parse().ok())
}
