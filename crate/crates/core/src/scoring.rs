//! Logarithmic scores.
//!
//! `G(P) = Σ P ln P` is the expected self-score (negative entropy) and
//! `G(P, Q) = Σ P ln Q` the relative score of asserting `Q` when `P` holds.
//! For any `P` consistent with a system, `G(P, ·)` of both expansions
//! depends only on the component tables; the `guaranteed_*` functions
//! compute that value locally, without touching the joint space.

use std::fmt;

use crate::error::{Error, Result};
use crate::expansion::{alternative_model, product_extension, ProbabilitySystem};
use crate::model::{JointDistribution, JointSpace, ProbTable};
use crate::scalar::Prob;
use crate::web::{Unpacking, VarSet};

/// `Σ p ln p` with `0 ln 0 = 0`.
pub fn log_score<T: Prob>(values: &[T]) -> T {
    values.iter().map(|p| p.x_ln_x()).sum()
}

pub fn table_score<T: Prob>(table: &ProbTable<T>) -> T {
    log_score(table.values())
}

/// Shannon entropy in nats.
pub fn entropy<T: Prob>(dist: &JointDistribution<T>) -> T {
    -log_score(dist.values())
}

/// `Σ p ln q`. Negative infinity when `q` vanishes somewhere `p` does not.
pub fn relative_score<T: Prob>(p: &JointDistribution<T>, q: &JointDistribution<T>) -> Result<T> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let mut total = T::zero();
    for (&pv, &qv) in p.values().iter().zip(q.values()) {
        if pv > T::zero() {
            if qv <= T::zero() {
                return Ok(T::neg_infinity());
            }
            total = total + pv * qv.ln();
        }
    }
    Ok(total)
}

/// `KL(p || q) = G(p) - G(p, q)`.
pub fn kl_divergence<T: Prob>(p: &JointDistribution<T>, q: &JointDistribution<T>) -> Result<T> {
    Ok(log_score(p.values()) - relative_score(p, q)?)
}

/// Log score of the uniform distribution on `space`: `-ln |space|`.
pub fn uniform_baseline<T: Prob>(space: &JointSpace) -> T {
    -T::lit(space.size() as f64).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Component,
    Overlap,
    IntersectionOverlap,
}

impl TermKind {
    fn sign(self) -> f64 {
        match self {
            TermKind::Component => 1.0,
            TermKind::Overlap | TermKind::IntersectionOverlap => -1.0,
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermKind::Component => "component",
            TermKind::Overlap => "overlap",
            TermKind::IntersectionOverlap => "intersection",
        })
    }
}

/// One `G(P(·))` entering a local score, with the component whose table
/// supplied the marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTerm<T = f64> {
    pub kind: TermKind,
    pub component: usize,
    pub label: String,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalScore<T = f64> {
    pub value: T,
    pub terms: Vec<ScoreTerm<T>>,
    /// Zero for the standard model.
    pub ln_k: T,
}

fn reassemble<T: Prob>(terms: &[ScoreTerm<T>], ln_k: T) -> T {
    terms
        .iter()
        .fold(T::zero(), |acc, t| acc + T::lit(t.kind.sign()) * t.value)
        + ln_k
}

fn component_terms<T: Prob>(system: &ProbabilitySystem<T>, unpacking: &Unpacking) -> Vec<ScoreTerm<T>> {
    unpacking
        .steps()
        .iter()
        .map(|s| ScoreTerm {
            kind: TermKind::Component,
            component: s.component,
            label: system.structure().label(s.component),
            value: table_score(system.table(s.component)),
        })
        .collect()
}

fn overlap_term<T: Prob>(
    system: &ProbabilitySystem<T>,
    kind: TermKind,
    component: usize,
    set: &VarSet,
) -> Result<ScoreTerm<T>> {
    Ok(ScoreTerm {
        kind,
        component,
        label: system.structure().set_label(set),
        value: table_score(&system.local_marginal(component, set)?),
    })
}

/// `Σ G(P(C_i)) - Σ G(P(O_i))` from the component tables alone.
pub fn guaranteed_score_standard<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
) -> Result<LocalScore<T>> {
    let mut terms = component_terms(system, unpacking);
    for s in unpacking.steps().iter().filter(|s| !s.overlap.is_empty()) {
        terms.push(overlap_term(system, TermKind::Overlap, s.component, &s.overlap)?);
    }
    Ok(LocalScore {
        value: reassemble(&terms, T::zero()),
        terms,
        ln_k: T::zero(),
    })
}

/// `Σ G(P(C_i)) - Σ G(P(O*)) + ln k` for a known normalizer `k`.
pub fn guaranteed_score_alt_with_k<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
    k: T,
) -> Result<LocalScore<T>> {
    let mut terms = component_terms(system, unpacking);
    for s in unpacking.steps() {
        for o in &s.intersection_overlaps {
            terms.push(overlap_term(system, TermKind::IntersectionOverlap, s.component, o)?);
        }
    }
    let ln_k = k.ln();
    Ok(LocalScore {
        value: reassemble(&terms, ln_k),
        terms,
        ln_k,
    })
}

/// Alternative-model guaranteed score. `k` needs one pass over the joint
/// space; everything else is local.
pub fn guaranteed_score_alt<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
) -> Result<LocalScore<T>> {
    let k = alternative_model(system, unpacking)?.k;
    guaranteed_score_alt_with_k(system, unpacking, k)
}

/// Everything `score` reports about a system.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport<T = f64> {
    /// `G(P^x)`: the score the standard model promises itself.
    pub g_self_standard: T,
    /// `G(P*)`
    pub g_self_alt: T,
    pub g_guaranteed_standard: T,
    pub g_guaranteed_alt: T,
    pub k: T,
    pub ln_k: T,
    pub uniform_baseline: T,
    pub standard_terms: Vec<ScoreTerm<T>>,
    pub alt_terms: Vec<ScoreTerm<T>>,
    /// Direct `G(P, P^x)` and `G(P, P*)` for a supplied reference `P`.
    pub g_relative: Option<(T, T)>,
}

pub fn score_report<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
    reference: Option<&JointDistribution<T>>,
) -> Result<ScoreReport<T>> {
    let px = product_extension(system, unpacking)?;
    let ps = alternative_model(system, unpacking)?;
    let standard = guaranteed_score_standard(system, unpacking)?;
    let alt = guaranteed_score_alt_with_k(system, unpacking, ps.k)?;
    let g_relative = match reference {
        Some(p) => Some((relative_score(p, &px.joint)?, relative_score(p, &ps.joint)?)),
        None => None,
    };
    Ok(ScoreReport {
        g_self_standard: log_score(px.joint.values()),
        g_self_alt: log_score(ps.joint.values()),
        g_guaranteed_standard: standard.value,
        g_guaranteed_alt: alt.value,
        k: ps.k,
        ln_k: alt.ln_k,
        uniform_baseline: uniform_baseline(system.space()),
        standard_terms: standard.terms,
        alt_terms: alt.terms,
        g_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::web::{unpack, Structure};

    fn fig1() -> ProbabilitySystem {
        let st = Structure::binary_from_labels(&["AB", "AC", "BCD"]).unwrap();
        let sp = st.space().clone();
        let t = |c: usize, v: Vec<f64>| ProbTable::<f64>::over(&sp, st.component(c).to_vec(), v).unwrap();
        let tables = vec![
            t(0, vec![0.3, 0.2, 0.1, 0.4]),
            t(1, vec![0.4, 0.1, 0.3, 0.2]),
            t(2, vec![0.24, 0.06, 0.06, 0.04, 0.16, 0.24, 0.04, 0.16]),
        ];
        ProbabilitySystem::new(st, tables).unwrap()
    }

    #[test]
    fn uniform_over_sixteen_states() {
        let sp = JointSpace::binary(&["A", "B", "C", "D"]).unwrap();
        let u = JointDistribution::<f64>::uniform(&sp);
        assert!((log_score(u.values()) - (-2.772589)).abs() < 1e-6);
        assert!((relative_score(&u, &u).unwrap() - (-2.772589)).abs() < 1e-6);
        assert_eq!(uniform_baseline::<f64>(&sp), log_score(u.values()));
    }

    #[test]
    fn point_mass_scores_zero() {
        assert_eq!(log_score(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn fig1_ab_table() {
        // .4 ln .4 + .1 ln .1 + .2 ln .2 + .3 ln .3
        assert!((log_score(&[0.3f64, 0.2, 0.1, 0.4]) - (-1.279854)).abs() < 1e-6);
    }

    #[test]
    fn relative_score_cases() {
        let sp = JointSpace::binary(&["A"]).unwrap();
        let p = JointDistribution::<f64>::new(sp.clone(), vec![1.0, 0.0]).unwrap();
        let q = JointDistribution::<f64>::new(sp.clone(), vec![0.5, 0.5]).unwrap();
        assert!((relative_score(&p, &q).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let r = JointDistribution::<f64>::new(sp.clone(), vec![0.0, 1.0]).unwrap();
        assert_eq!(relative_score(&p, &r).unwrap(), f64::NEG_INFINITY);
        assert_eq!(relative_score(&q, &q).unwrap(), log_score(q.values()));
        let other = JointDistribution::<f64>::uniform(&JointSpace::binary(&["B"]).unwrap());
        assert_eq!(relative_score(&p, &other), Err(Error::SpaceMismatch));
    }

    #[test]
    fn fig1_local_scores() {
        let sys = fig1();
        let u = unpack(sys.structure()).unwrap();
        let std = guaranteed_score_standard(&sys, &u).unwrap();
        assert!((std.value - (-2.453268)).abs() < 1e-6);
        let alt = guaranteed_score_alt(&sys, &u).unwrap();
        assert!((alt.value - (-2.457152)).abs() < 1e-6);
        assert!((alt.ln_k - 0.992126f64.ln()).abs() < 1e-6);
        let labels: Vec<(TermKind, &str)> = std.terms.iter().map(|t| (t.kind, t.label.as_str())).collect();
        assert_eq!(
            labels,
            vec![
                (TermKind::Component, "BCD"),
                (TermKind::Component, "AC"),
                (TermKind::Component, "AB"),
                (TermKind::Overlap, "BC"),
                (TermKind::Overlap, "A"),
            ]
        );
        let ostar: Vec<&str> = alt
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::IntersectionOverlap)
            .map(|t| t.label.as_str())
            .collect();
        assert_eq!(ostar, vec!["B", "C", "A"]);
    }

    #[test]
    fn breakdown_reassembles_exactly() {
        let sys = fig1();
        let u = unpack(sys.structure()).unwrap();
        let r = score_report(&sys, &u, None).unwrap();
        let std: f64 = r
            .standard_terms
            .iter()
            .fold(0.0, |a, t| a + t.kind.sign() * t.value);
        assert_eq!(std, r.g_guaranteed_standard);
        let alt: f64 = r.alt_terms.iter().fold(0.0, |a, t| a + t.kind.sign() * t.value) + r.ln_k;
        assert_eq!(alt, r.g_guaranteed_alt);
    }

    #[test]
    fn single_and_disjoint_components() {
        let st = Structure::binary_from_labels(&["A", "B"]).unwrap();
        let sp = st.space().clone();
        let a = ProbTable::<f64>::over(&sp, vec![VarId(0)], vec![0.2, 0.8]).unwrap();
        let b = ProbTable::<f64>::over(&sp, vec![VarId(1)], vec![0.6, 0.4]).unwrap();
        let sys = ProbabilitySystem::new(st, vec![a.clone(), b.clone()]).unwrap();
        let u = unpack(sys.structure()).unwrap();
        let want = table_score(&a) + table_score(&b);
        assert!((guaranteed_score_standard(&sys, &u).unwrap().value - want).abs() < 1e-15);
        let alt = guaranteed_score_alt(&sys, &u).unwrap();
        assert!((alt.value - want).abs() < 1e-15);
        assert!(alt.ln_k.abs() < 1e-15);
    }

    #[test]
    fn generic_over_f32() {
        let sys: ProbabilitySystem<f32> = fig1().cast();
        let u = unpack(sys.structure()).unwrap();
        let std = guaranteed_score_standard(&sys, &u).unwrap();
        assert!((std.value - (-2.453268f32)).abs() < 1e-5);
        let alt = guaranteed_score_alt(&sys, &u).unwrap();
        assert!((alt.value - (-2.457152f32)).abs() < 1e-5);
    }
}
