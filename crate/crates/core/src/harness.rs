//! Random systems and the seeded Monte Carlo comparison of the standard and
//! alternative models.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::{alternative_model, product_extension, ProbabilitySystem};
use crate::format::format_g;
use crate::maxent::random_positive_joint;
use crate::model::{JointDistribution, JointSpace, ProbTable, VarId, Variable};
use crate::scoring::{guaranteed_score_alt_with_k, guaranteed_score_standard};
use crate::web::{all_unpackings, unpack_in_order, unpack_with_rule, OStarRule, Structure};

/// Gaps within this distance of zero are ties.
pub const WIN_TOL: f64 = 1e-12;
/// Slack for the ordering check `g_alt >= g_standard` when it must hold.
pub const ORDERING_TOL: f64 = 1e-10;
/// Largest structure the unpacking probe will enumerate.
pub const PROBE_LIMIT: usize = 10;
/// Random structures keep their joint space at most this large.
pub const MAX_JOINT_SIZE: usize = 4096;

pub const CSV_HEADER: &str = "trial,k,ln_k,g_standard,g_alt,gap,partition,winner";

const PRESETS: &[(&str, &[&str])] = &[
    ("fig1", &["AB", "AC", "BCD"]),
    ("fig1-dag", &["A", "AB", "AC", "BCD"]),
    ("chain", &["AB", "BC", "CD", "DE"]),
    ("star", &["AB", "AC", "AD", "AE"]),
    ("fork3", &["AB", "AC", "AD", "BCDE"]),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Named binary structure.
pub fn preset(name: &str) -> Result<Structure> {
    let (_, labels) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    Structure::binary_from_labels(labels)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tables are the exact component marginals of a random positive joint, so
/// the system is consistent by construction.
pub fn random_consistent_system(structure: &Structure, seed: u64) -> ProbabilitySystem {
    let joint: JointDistribution = random_positive_joint(structure.space(), &mut rng_for(seed));
    ProbabilitySystem::from_joint(structure.clone(), &joint).expect("marginals of a joint form a valid system")
}

/// Every table drawn independently, so neighbours generally disagree on
/// their shared marginals.
pub fn random_independent_system(structure: &Structure, seed: u64) -> ProbabilitySystem {
    let mut rng = rng_for(seed);
    let tables = structure
        .components()
        .iter()
        .map(|c| {
            let cards = structure.space().cards(c);
            let raw: Vec<f64> = (0..cards.iter().product::<usize>())
                .map(|_| rng.random::<f64>().max(1e-12))
                .collect();
            let total: f64 = raw.iter().sum();
            ProbTable::new(c.clone(), cards, raw.iter().map(|v| (v / total).min(1.0)).collect())
                .expect("random table is valid")
        })
        .collect();
    ProbabilitySystem::new(structure.clone(), tables).expect("random tables are normalized")
}

/// Cardinality for a new variable, keeping the joint space bounded.
fn pick_card<R: Rng>(rng: &mut R, size: usize) -> Option<usize> {
    let card = if rng.random_bool(0.25) { 3 } else { 2 };
    if size * card <= MAX_JOINT_SIZE {
        Some(card)
    } else if size * 2 <= MAX_JOINT_SIZE {
        Some(2)
    } else {
        None
    }
}

/// Grows a web in reverse unpacking order: each new component gets one or
/// two fresh variables plus a random subset of existing ones (any subset
/// for a general web, a subset of one existing component for a hypertree).
fn grow_structure<R: Rng>(rng: &mut R, components: usize, tree: bool) -> Structure {
    let mut vars: Vec<Variable> = Vec::new();
    let mut comps: Vec<Vec<VarId>> = Vec::new();
    let mut size = 1usize;
    for _ in 0..components.max(1) {
        let mut comp: Vec<VarId> = if comps.is_empty() {
            Vec::new()
        } else if tree {
            let host = &comps[rng.random_range(0..comps.len())];
            let n = rng.random_range(0..=host.len().min(2));
            host.choose_multiple(rng, n).copied().collect()
        } else {
            let n = rng.random_range(0..=vars.len().min(3));
            let all: Vec<VarId> = (0..vars.len()).map(VarId).collect();
            all.choose_multiple(rng, n).copied().collect()
        };
        let mut added = 0;
        for _ in 0..rng.random_range(1..=2) {
            let Some(card) = pick_card(rng, size) else { break };
            size *= card;
            comp.push(VarId(vars.len()));
            vars.push(Variable::new(format!("X{}", vars.len()), card).unwrap());
            added += 1;
        }
        if added == 0 {
            // The joint space is full.
            break;
        }
        comp.sort();
        comps.push(comp);
    }
    Structure::new(JointSpace::new(vars).unwrap(), comps).expect("grown structure is valid")
}

/// Random web with up to `components` components.
pub fn random_web_structure<R: Rng>(rng: &mut R, components: usize) -> Structure {
    grow_structure(rng, components, false)
}

/// Random hypertree with up to `components` components.
pub fn random_hypertree_structure<R: Rng>(rng: &mut R, components: usize) -> Structure {
    grow_structure(rng, components, true)
}

/// Chain `X0X1, X1X2, ...` with `components` links.
pub fn chain_structure<R: Rng>(rng: &mut R, components: usize) -> Structure {
    let mut vars = Vec::new();
    let mut size = 1;
    for i in 0..=components {
        let card = pick_card(rng, size).unwrap_or(2);
        size *= card;
        vars.push(Variable::new(format!("X{i}"), card).unwrap());
    }
    let comps = (0..components).map(|i| vec![VarId(i), VarId(i + 1)]).collect();
    Structure::new(JointSpace::new(vars).unwrap(), comps).unwrap()
}

/// Star `HX1, HX2, ...` around a hub variable `H`.
pub fn star_structure<R: Rng>(rng: &mut R, components: usize) -> Structure {
    let mut vars = vec![Variable::new("H", 2).unwrap()];
    let mut size = 2;
    for i in 1..=components {
        let card = pick_card(rng, size).unwrap_or(2);
        size *= card;
        vars.push(Variable::new(format!("X{i}"), card).unwrap());
    }
    let comps = (1..=components).map(|i| vec![VarId(0), VarId(i)]).collect();
    Structure::new(JointSpace::new(vars).unwrap(), comps).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    Alt,
    Standard,
    Tie,
}

impl Winner {
    pub fn from_gap(gap: f64) -> Self {
        if gap > WIN_TOL {
            Winner::Alt
        } else if gap < -WIN_TOL {
            Winner::Standard
        } else {
            Winner::Tie
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Alt => "alt",
            Winner::Standard => "standard",
            Winner::Tie => "tie",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub structure: Structure,
    pub trials: usize,
    pub seed: u64,
    pub ostar_rule: OStarRule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub trial: usize,
    pub k: f64,
    pub ln_k: f64,
    pub g_standard: f64,
    pub g_alt: f64,
    /// `g_alt - g_standard`
    pub gap: f64,
    pub partition: bool,
    pub winner: Winner,
}

impl ExperimentRecord {
    /// The ordering result applies to this trial and must hold.
    pub fn ordering_applies(&self) -> bool {
        self.partition && self.k >= 1.0
    }

    pub fn ordering_holds(&self) -> bool {
        self.g_alt >= self.g_standard - ORDERING_TOL
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial,
            format_g(self.k, 12),
            format_g(self.ln_k, 12),
            format_g(self.g_standard, 12),
            format_g(self.g_alt, 12),
            format_g(self.gap, 12),
            self.partition,
            self.winner
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: Error,
}

pub type TrialResult = std::result::Result<ExperimentRecord, TrialFailure>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WinRate {
    pub trials: usize,
    pub alt_wins: usize,
}

impl WinRate {
    pub fn fraction(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.alt_wins as f64 / self.trials as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub failures: usize,
    pub alt_wins: usize,
    pub standard_wins: usize,
    pub ties: usize,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub k_below_one: WinRate,
    pub k_at_least_one: WinRate,
    /// Trials where the ordering result applies but `g_alt < g_standard`.
    pub ordering_violations: usize,
}

impl ExperimentSummary {
    pub fn alt_win_fraction(&self) -> Option<f64> {
        let done = self.trials - self.failures;
        (done > 0).then(|| self.alt_wins as f64 / done as f64)
    }

    fn from_results(results: &[TrialResult]) -> Self {
        let records: Vec<&ExperimentRecord> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let count = |w: Winner| records.iter().filter(|r| r.winner == w).count();
        let gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
        let rate = |pred: &dyn Fn(&ExperimentRecord) -> bool| {
            let sel: Vec<_> = records.iter().filter(|r| pred(r)).collect();
            WinRate {
                trials: sel.len(),
                alt_wins: sel.iter().filter(|r| r.winner == Winner::Alt).count(),
            }
        };
        ExperimentSummary {
            trials: results.len(),
            failures: results.len() - records.len(),
            alt_wins: count(Winner::Alt),
            standard_wins: count(Winner::Standard),
            ties: count(Winner::Tie),
            mean_gap: if gaps.is_empty() {
                f64::NAN
            } else {
                gaps.iter().sum::<f64>() / gaps.len() as f64
            },
            min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
            max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            k_below_one: rate(&|r| r.k < 1.0),
            k_at_least_one: rate(&|r| r.k >= 1.0),
            ordering_violations: records
                .iter()
                .filter(|r| r.ordering_applies() && !r.ordering_holds())
                .count(),
        }
    }
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frac = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        writeln!(f, "trials = {}", self.trials)?;
        writeln!(f, "failures = {}", self.failures)?;
        writeln!(
            f,
            "alt_wins = {}, standard_wins = {}, ties = {}",
            self.alt_wins, self.standard_wins, self.ties
        )?;
        writeln!(f, "alt_win_fraction = {}", frac(self.alt_win_fraction()))?;
        writeln!(
            f,
            "gap mean = {}, min = {}, max = {}",
            format_g(self.mean_gap, 12),
            format_g(self.min_gap, 12),
            format_g(self.max_gap, 12)
        )?;
        writeln!(
            f,
            "k < 1: {} trials, alt_win_fraction = {}",
            self.k_below_one.trials,
            frac(self.k_below_one.fraction())
        )?;
        writeln!(
            f,
            "k >= 1: {} trials, alt_win_fraction = {}",
            self.k_at_least_one.trials,
            frac(self.k_at_least_one.fraction())
        )?;
        write!(f, "ordering_violations = {}", self.ordering_violations)
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub results: Vec<TrialResult>,
    pub summary: ExperimentSummary,
}

impl Experiment {
    pub fn records(&self) -> impl Iterator<Item = &ExperimentRecord> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    /// CSV with one row per trial in trial order. Failed trials keep their
    /// row with empty numeric fields and winner `error:<code>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.results {
            match r {
                Ok(rec) => writeln!(out, "{}", rec.to_csv_row())?,
                Err(fail) => writeln!(out, "{},,,,,,,error:{}", fail.trial, fail.error.code())?,
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<ExperimentRecord> {
    let unpacking = unpack_with_rule(&config.structure, config.ostar_rule)?;
    let system = random_consistent_system(&config.structure, config.seed.wrapping_add(trial as u64));
    let g_standard = guaranteed_score_standard(&system, &unpacking)?.value;
    let k = alternative_model(&system, &unpacking)?.k;
    let alt = guaranteed_score_alt_with_k(&system, &unpacking, k)?;
    let gap = alt.value - g_standard;
    Ok(ExperimentRecord {
        trial,
        k,
        ln_k: alt.ln_k,
        g_standard,
        g_alt: alt.value,
        gap,
        partition: unpacking.partition_condition(),
        winner: Winner::from_gap(gap),
    })
}

/// Runs every trial (in parallel) and returns results in trial order.
/// Trial `i` uses seed `config.seed + i`, so output does not depend on
/// scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    if config.trials == 0 {
        return Err(Error::Parse("trials must be at least 1".into()));
    }
    let mut results: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t).map_err(|error| TrialFailure { trial: t, error }))
        .collect();
    results.sort_by_key(|r| match r {
        Ok(rec) => rec.trial,
        Err(f) => f.trial,
    });
    let summary = ExperimentSummary::from_results(&results);
    Ok(Experiment { results, summary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub unpackings: usize,
    /// Distinct (component, overlap) assignments among the unpackings.
    pub distinct_overlap_sets: usize,
    /// Largest pairwise `max_x |P^x(x) - P^x'(x)|`.
    pub max_joint_deviation: f64,
    /// Largest pairwise difference of the local standard score.
    pub max_score_deviation: f64,
}

/// Computes the standard model and its local score under every admissible
/// unpacking and reports how far they disagree.
pub fn unpacking_invariance_probe(system: &ProbabilitySystem) -> Result<ProbeReport> {
    let structure = system.structure();
    let orders = all_unpackings(structure, PROBE_LIMIT)?;
    if orders.is_empty() {
        // Reuse the not-a-web diagnostics.
        unpack_with_rule(structure, OStarRule::Maximal)?;
    }
    let mut by_signature = BTreeMap::new();
    for order in &orders {
        let u = unpack_in_order(structure, order, OStarRule::Maximal)?;
        by_signature.entry(u.overlap_signature()).or_insert(u);
    }
    let mut evaluated = Vec::with_capacity(by_signature.len());
    for u in by_signature.values() {
        let px = product_extension(system, u)?;
        let g = guaranteed_score_standard(system, u)?.value;
        evaluated.push((px.joint, g));
    }
    let mut max_joint: f64 = 0.0;
    let mut max_score: f64 = 0.0;
    for (i, (ja, ga)) in evaluated.iter().enumerate() {
        for (jb, gb) in &evaluated[i + 1..] {
            max_joint = max_joint.max(ja.max_abs_diff(jb)?);
            max_score = max_score.max((ga - gb).abs());
        }
    }
    Ok(ProbeReport {
        unpackings: orders.len(),
        distinct_overlap_sets: evaluated.len(),
        max_joint_deviation: max_joint,
        max_score_deviation: max_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{check_consistency, ConsistencyStatus};
    use crate::web::{classify, unpack, StructureLabel};

    #[test]
    fn presets_are_webs() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            assert!(unpack(&s).is_ok(), "{name}");
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn random_system_is_consistent_and_deterministic() {
        let s = preset("fig1").unwrap();
        let a = random_consistent_system(&s, 1);
        assert_eq!(a, random_consistent_system(&s, 1));
        assert_ne!(a, random_consistent_system(&s, 2));
        let v = check_consistency(&a, 1e-9, 10_000);
        assert_eq!(v.status, ConsistencyStatus::Consistent);
        assert!(v.residual < 1e-9);
        // A-marginals of AB and AC agree.
        let a = VarId(0);
        let from_ab = a_marginal(&random_consistent_system(&s, 1), 0, a);
        let from_ac = a_marginal(&random_consistent_system(&s, 1), 1, a);
        for (x, y) in from_ab.iter().zip(&from_ac) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    fn a_marginal(sys: &ProbabilitySystem, c: usize, v: VarId) -> Vec<f64> {
        sys.table(c).marginalize(&[v]).unwrap().values().to_vec()
    }

    #[test]
    fn generated_structures_have_their_shape() {
        let mut rng = rng_for(42);
        for _ in 0..50 {
            let web = random_web_structure(&mut rng, 6);
            assert!(classify(&web).contains(&StructureLabel::Web));
            assert!(web.space().size() <= MAX_JOINT_SIZE);
            let tree = random_hypertree_structure(&mut rng, 6);
            assert!(classify(&tree).contains(&StructureLabel::Hypertree));
            assert!(tree.space().size() <= MAX_JOINT_SIZE);
        }
        for m in 1..=8 {
            assert!(classify(&chain_structure(&mut rng, m)).contains(&StructureLabel::Hypertree));
            assert!(classify(&star_structure(&mut rng, m)).contains(&StructureLabel::Hypertree));
        }
    }

    #[test]
    fn hypertree_trial_is_a_tie() {
        let config = ExperimentConfig {
            structure: preset("chain").unwrap(),
            trials: 1,
            seed: 3,
            ostar_rule: OStarRule::Maximal,
        };
        let exp = run_experiment(&config).unwrap();
        let r = exp.records().next().unwrap();
        assert!(r.gap.abs() < 1e-12);
        assert_eq!(r.winner, Winner::Tie);
    }

    #[test]
    fn csv_layout() {
        let config = ExperimentConfig {
            structure: preset("fig1").unwrap(),
            trials: 3,
            seed: 0,
            ostar_rule: OStarRule::Maximal,
        };
        let csv = run_experiment(&config).unwrap().to_csv();
        let lines: Vec<&str> = csv.split_terminator('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn probe_fig1_two_orders_agree() {
        let sys = random_consistent_system(&preset("fig1").unwrap(), 8);
        let r = unpacking_invariance_probe(&sys).unwrap();
        assert_eq!(r.unpackings, 2);
        assert_eq!(r.distinct_overlap_sets, 2);
        assert!(r.max_joint_deviation < 1e-12);
        assert!(r.max_score_deviation < 1e-12);
    }

    #[test]
    fn probe_single_order() {
        let s = Structure::binary_from_labels(&["AB"]).unwrap();
        let sys = random_consistent_system(&s, 1);
        let r = unpacking_invariance_probe(&sys).unwrap();
        assert_eq!(r.unpackings, 1);
        assert_eq!(r.max_joint_deviation, 0.0);
    }

    #[test]
    fn probe_not_a_web() {
        let s = Structure::binary_from_labels(&["AB", "BC", "CA"]).unwrap();
        let sys = random_consistent_system(&s, 1);
        assert!(matches!(unpacking_invariance_probe(&sys), Err(Error::NotAWeb { .. })));
    }

    #[test]
    fn winner_from_gap() {
        assert_eq!(Winner::from_gap(1e-9), Winner::Alt);
        assert_eq!(Winner::from_gap(-1e-9), Winner::Standard);
        assert_eq!(Winner::from_gap(5e-13), Winner::Tie);
    }
}
