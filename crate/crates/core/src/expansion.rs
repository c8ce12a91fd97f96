//! Probability systems and their two joint expansions.
//!
//! The standard model is the product of each unpacking step's conditional
//! `P(T_i | O_i)`. The alternative model divides the product of component
//! tables by the marginals on the intersection overlaps and renormalizes
//! with a constant `k`.
//!
//! Overlap marginals always come from the table of the step's own
//! component, so both models stay well defined when neighbouring tables
//! disagree about a shared marginal.

use std::fmt;

use crate::error::{Error, Result};
use crate::maxent::{ipf, IpfTermination};
use crate::model::{JointDistribution, JointSpace, ProbTable, Projector, VarId};
use crate::scalar::Prob;
use crate::web::{pairwise_intersection_overlaps, OStarRule, Structure, Unpacking, VarSet};

/// Default marginal tolerance for [`check_consistency`].
pub const CONSISTENCY_TOL: f64 = 1e-9;
/// Default sweep budget for [`check_consistency`].
pub const CONSISTENCY_MAX_ITER: usize = 10_000;

/// A structure together with one joint table per component.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilitySystem<T = f64> {
    structure: Structure,
    tables: Vec<ProbTable<T>>,
}

impl<T: Prob> ProbabilitySystem<T> {
    pub fn new(structure: Structure, tables: Vec<ProbTable<T>>) -> Result<Self> {
        if tables.len() != structure.len() {
            return Err(Error::InvalidStructure(format!(
                "{} tables for {} components",
                tables.len(),
                structure.len()
            )));
        }
        let tol = normalization_tol::<T>();
        for (i, t) in tables.iter().enumerate() {
            if t.scope() != structure.component(i) {
                return Err(Error::Scope(format!(
                    "table {i} scope does not match component {}",
                    structure.label(i)
                )));
            }
            if t.cards() != structure.space().cards(t.scope()).as_slice() {
                return Err(Error::Scope(format!(
                    "table {i} cardinalities do not match the variables"
                )));
            }
            if !t.is_normalized(tol) {
                return Err(Error::Normalization {
                    component: structure.label(i),
                    sum: t.sum().as_f64(),
                });
            }
        }
        Ok(ProbabilitySystem { structure, tables })
    }

    /// The system whose tables are the component marginals of `joint`.
    pub fn from_joint(structure: Structure, joint: &JointDistribution<T>) -> Result<Self> {
        if joint.space() != structure.space() {
            return Err(Error::SpaceMismatch);
        }
        let tables = structure
            .components()
            .iter()
            .map(|c| joint.marginal(c))
            .collect::<Result<Vec<_>>>()?;
        ProbabilitySystem::new(structure, tables)
    }

    pub fn space(&self) -> &JointSpace {
        self.structure.space()
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn tables(&self) -> &[ProbTable<T>] {
        &self.tables
    }

    pub fn table(&self, component: usize) -> &ProbTable<T> {
        &self.tables[component]
    }

    /// Marginal of `vars` taken from the table of `component`.
    pub fn local_marginal(&self, component: usize, vars: &VarSet) -> Result<ProbTable<T>> {
        let keep: Vec<VarId> = vars.iter().copied().collect();
        self.tables[component].marginalize(&keep)
    }

    /// Largest deviation between the component marginals of `joint` and the
    /// system's tables.
    pub fn marginal_residual(&self, joint: &JointDistribution<T>) -> Result<T> {
        if joint.space() != self.space() {
            return Err(Error::SpaceMismatch);
        }
        let mut worst = T::zero();
        for t in &self.tables {
            let m = joint.marginal(t.scope())?;
            for (a, b) in m.values().iter().zip(t.values()) {
                worst = worst.max((*a - *b).abs());
            }
        }
        Ok(worst)
    }

    pub fn cast<U: Prob>(&self) -> ProbabilitySystem<U> {
        ProbabilitySystem {
            structure: self.structure.clone(),
            tables: self.tables.iter().map(ProbTable::cast).collect(),
        }
    }
}

fn normalization_tol<T: Prob>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Standard,
    Alternative,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Standard => "standard",
            ModelKind::Alternative => "alt",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionResult<T = f64> {
    pub joint: JointDistribution<T>,
    pub model: ModelKind,
    /// Normalizing constant; exactly one for the standard model.
    pub k: T,
    /// `None` only for the alternative model on a non-web structure.
    pub unpacking: Option<Unpacking>,
}

/// Per-component projection of every joint state, computed once.
struct StateIndex {
    per_table: Vec<Vec<usize>>,
}

impl StateIndex {
    fn new(space: &JointSpace, scopes: &[(&[VarId], &[usize])]) -> Self {
        let projectors: Vec<Projector> = scopes.iter().map(|(s, c)| Projector::new(s, c)).collect();
        let mut per_table = vec![Vec::with_capacity(space.size()); projectors.len()];
        for state in space.enumerate_states() {
            for (p, out) in projectors.iter().zip(per_table.iter_mut()) {
                out.push(p.index(&state));
            }
        }
        StateIndex { per_table }
    }
}

fn joint_from_weights<T: Prob>(space: &JointSpace, weights: Vec<T>) -> Result<JointDistribution<T>> {
    let clamped = weights.into_iter().map(|w| w.min(T::one())).collect();
    JointDistribution::new(space.clone(), clamped)
}

/// Standard model: the joint `∏_i P(T_i | O_i)` over the unpacking steps.
pub fn product_extension<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
) -> Result<ExpansionResult<T>> {
    check_unpacking(system, unpacking)?;
    let conditionals = unpacking
        .steps()
        .iter()
        .map(|step| {
            let given: Vec<VarId> = system.table(step.component).scope().iter().copied()
                .filter(|v| step.overlap.contains(v))
                .collect();
            system.table(step.component).condition(&given).map(|c| c.table)
        })
        .collect::<Result<Vec<_>>>()?;
    let scopes: Vec<(&[VarId], &[usize])> =
        conditionals.iter().map(|t| (t.scope(), t.cards())).collect();
    let index = StateIndex::new(system.space(), &scopes);
    let weights = (0..system.space().size())
        .map(|x| {
            conditionals
                .iter()
                .zip(&index.per_table)
                .fold(T::one(), |acc, (t, idx)| acc * t.values()[idx[x]])
        })
        .collect();
    Ok(ExpansionResult {
        joint: joint_from_weights(system.space(), weights)?,
        model: ModelKind::Standard,
        k: T::one(),
        unpacking: Some(unpacking.clone()),
    })
}

/// Alternative model on a web: component tables over the step-wise
/// intersection overlaps, normalized by `k`.
pub fn alternative_model<T: Prob>(
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
) -> Result<ExpansionResult<T>> {
    check_unpacking(system, unpacking)?;
    let denominators: Vec<(usize, VarSet)> = unpacking
        .steps()
        .iter()
        .flat_map(|s| s.intersection_overlaps.iter().map(move |o| (s.component, o.clone())))
        .collect();
    let (joint, k) = alternative_from_terms(system, &denominators)?;
    Ok(ExpansionResult {
        joint,
        model: ModelKind::Alternative,
        k,
        unpacking: Some(unpacking.clone()),
    })
}

/// Alternative model on any structure, webs or not, using the pairwise
/// intersection overlaps of all component pairs.
pub fn alternative_model_any<T: Prob>(
    system: &ProbabilitySystem<T>,
    rule: OStarRule,
) -> Result<ExpansionResult<T>> {
    let denominators = pairwise_intersection_overlaps(system.structure(), rule);
    let (joint, k) = alternative_from_terms(system, &denominators)?;
    Ok(ExpansionResult {
        joint,
        model: ModelKind::Alternative,
        k,
        unpacking: None,
    })
}

/// Unnormalized alternative-model weights `∏ P(C_i) / ∏ P(O*)`.
pub fn alternative_weights<T: Prob>(
    system: &ProbabilitySystem<T>,
    denominators: &[(usize, VarSet)],
) -> Result<Vec<T>> {
    let overlap_tables = denominators
        .iter()
        .map(|(c, o)| system.local_marginal(*c, o))
        .collect::<Result<Vec<_>>>()?;
    let scopes: Vec<(&[VarId], &[usize])> = system
        .tables()
        .iter()
        .chain(&overlap_tables)
        .map(|t| (t.scope(), t.cards()))
        .collect();
    let index = StateIndex::new(system.space(), &scopes);
    let m = system.tables().len();
    Ok((0..system.space().size())
        .map(|x| {
            let num = system
                .tables()
                .iter()
                .zip(&index.per_table[..m])
                .fold(T::one(), |acc, (t, idx)| acc * t.values()[idx[x]]);
            if num <= T::zero() {
                // Some owner table is zero here, so its overlap marginal may be too.
                return T::zero();
            }
            overlap_tables
                .iter()
                .zip(&index.per_table[m..])
                .fold(num, |acc, (t, idx)| acc / t.values()[idx[x]])
        })
        .collect())
}

fn alternative_from_terms<T: Prob>(
    system: &ProbabilitySystem<T>,
    denominators: &[(usize, VarSet)],
) -> Result<(JointDistribution<T>, T)> {
    let weights = alternative_weights(system, denominators)?;
    let total: T = weights.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::AllZeroWeight);
    }
    let k = T::one() / total;
    let joint = joint_from_weights(system.space(), weights.into_iter().map(|w| w * k).collect())?;
    Ok((joint, k))
}

fn check_unpacking<T: Prob>(system: &ProbabilitySystem<T>, unpacking: &Unpacking) -> Result<()> {
    let mut order = unpacking.order();
    order.sort_unstable();
    if order != (0..system.structure().len()).collect::<Vec<_>>() {
        return Err(Error::InvalidUnpacking(
            "steps do not cover every component exactly once".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsistencyStatus {
    Consistent,
    Inconsistent,
    Undetermined,
}

impl fmt::Display for ConsistencyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConsistencyStatus::Consistent => "consistent",
            ConsistencyStatus::Inconsistent => "inconsistent",
            ConsistencyStatus::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyVerdict<T = f64> {
    pub status: ConsistencyStatus,
    /// Largest component-marginal error of the final fitted joint.
    pub residual: T,
    pub sweeps: usize,
    /// The fitted joint; present exactly when the status is consistent.
    pub witness: Option<JointDistribution<T>>,
}

/// Decides whether some joint has all the system's tables as marginals by
/// iterative proportional fitting from the uniform joint.
///
/// A residual that drops by less than `1e-14` over 100 consecutive sweeps
/// while still above `tol` is reported inconsistent; running out of sweeps
/// otherwise gives undetermined.
pub fn check_consistency<T: Prob>(
    system: &ProbabilitySystem<T>,
    tol: T,
    max_iter: usize,
) -> ConsistencyVerdict<T> {
    let out = ipf(system, JointDistribution::uniform(system.space()), tol, max_iter);
    let status = match out.termination {
        IpfTermination::Converged => ConsistencyStatus::Consistent,
        IpfTermination::Stalled => ConsistencyStatus::Inconsistent,
        IpfTermination::Exhausted => ConsistencyStatus::Undetermined,
    };
    ConsistencyVerdict {
        status,
        residual: out.residual,
        sweeps: out.sweeps,
        witness: (status == ConsistencyStatus::Consistent).then_some(out.joint),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDeviation<T = f64> {
    pub component: usize,
    pub max_deviation: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalReport<T = f64> {
    pub steps: Vec<StepDeviation<T>>,
}

impl<T: Prob> ConditionalReport<T> {
    pub fn max_deviation(&self) -> T {
        self.steps
            .iter()
            .fold(T::zero(), |m, s| m.max(s.max_deviation))
    }
}

/// Compares the conditionals `P(T_i | O_i)` of `joint` with those of the
/// system, on overlap states the joint gives positive probability.
pub fn check_conditional_consistency<T: Prob>(
    joint: &JointDistribution<T>,
    system: &ProbabilitySystem<T>,
    unpacking: &Unpacking,
) -> Result<ConditionalReport<T>> {
    if joint.space() != system.space() {
        return Err(Error::SpaceMismatch);
    }
    let steps = unpacking
        .steps()
        .iter()
        .map(|step| {
            let table = system.table(step.component);
            let given: Vec<VarId> = table
                .scope()
                .iter()
                .copied()
                .filter(|v| step.overlap.contains(v))
                .collect();
            let wanted = table.condition(&given)?.table;
            let local = joint.marginal(table.scope())?;
            let overlap_marginal = local.marginalize(&given)?;
            let slices = local.slice_indices(&given)?;
            let mut worst = T::zero();
            for (e, &g) in slices.iter().enumerate() {
                let m = overlap_marginal.values()[g];
                if m > T::zero() {
                    let have = local.values()[e] / m;
                    worst = worst.max((have - wanted.values()[e]).abs());
                }
            }
            Ok(StepDeviation {
                component: step.component,
                max_deviation: worst,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalReport { steps })
}
