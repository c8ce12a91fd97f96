//! Structures, terminal components and unpackings.
//!
//! A structure is a set of components (variable subsets). A component is
//! terminal when it holds a variable no other component has. A structure is
//! a web when terminal components can be removed one at a time until none
//! are left; the removal order is an unpacking.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{JointSpace, VarId};

pub type VarSet = BTreeSet<VarId>;

/// Components are stored as bitmasks over component indices during search.
const MAX_COMPONENTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    space: JointSpace,
    components: Vec<Vec<VarId>>,
}

impl Structure {
    pub fn new(space: JointSpace, components: Vec<Vec<VarId>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidStructure("no components".into()));
        }
        if components.len() > MAX_COMPONENTS {
            return Err(Error::TooManyComponents {
                components: components.len(),
                limit: MAX_COMPONENTS,
            });
        }
        let n = space.num_variables();
        let mut covered = vec![false; n];
        let mut seen: HashSet<VarSet> = HashSet::new();
        for comp in &components {
            if comp.is_empty() {
                return Err(Error::InvalidStructure("empty component".into()));
            }
            let set: VarSet = comp.iter().copied().collect();
            if set.len() != comp.len() {
                return Err(Error::InvalidStructure(
                    "variable repeated inside a component".into(),
                ));
            }
            for v in comp {
                if v.0 >= n {
                    return Err(Error::InvalidStructure(format!(
                        "variable index {} out of range",
                        v.0
                    )));
                }
                covered[v.0] = true;
            }
            if !seen.insert(set) {
                return Err(Error::InvalidStructure(format!(
                    "duplicate component {}",
                    space.label(comp)
                )));
            }
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidStructure(format!(
                "variable `{}` is in no component",
                space.name(VarId(v))
            )));
        }
        Ok(Structure { space, components })
    }

    /// Structure over binary variables named by single characters, e.g.
    /// `["AB", "AC", "BCD"]`. Variables are ordered by first appearance.
    pub fn binary_from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        for l in labels {
            for c in l.as_ref().chars() {
                let s = c.to_string();
                if !names.contains(&s) {
                    names.push(s);
                }
            }
        }
        let space = JointSpace::binary(&names)?;
        let components = labels
            .iter()
            .map(|l| {
                l.as_ref()
                    .chars()
                    .map(|c| space.id(&c.to_string()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Structure::new(space, components)
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn components(&self) -> &[Vec<VarId>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[VarId] {
        &self.components[i]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn var_set(&self, i: usize) -> VarSet {
        self.components[i].iter().copied().collect()
    }

    pub fn label(&self, i: usize) -> String {
        self.space.label(&self.components[i])
    }

    pub fn set_label(&self, set: &VarSet) -> String {
        self.space.label(set)
    }

    /// Sorted variable names; terminals are chosen by comparing these.
    fn sort_key(&self, i: usize) -> Vec<&str> {
        let mut k: Vec<&str> = self.components[i]
            .iter()
            .map(|&v| self.space.name(v))
            .collect();
        k.sort_unstable();
        k
    }

    fn full_mask(&self) -> u64 {
        if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        }
    }

    fn terminals_in(&self, remaining: u64) -> Vec<usize> {
        let mut counts = vec![0usize; self.space.num_variables()];
        for i in members(remaining) {
            for v in &self.components[i] {
                counts[v.0] += 1;
            }
        }
        members(remaining)
            .filter(|&i| self.components[i].iter().any(|v| counts[v.0] == 1))
            .collect()
    }

    /// Terminals ordered by descending sort key (the deterministic preference).
    fn ordered_terminals(&self, remaining: u64) -> Vec<usize> {
        let mut t = self.terminals_in(remaining);
        t.sort_by(|&a, &b| self.sort_key(b).cmp(&self.sort_key(a)).then(a.cmp(&b)));
        t
    }

    fn step_sets(&self, i: usize, rest: u64) -> (VarSet, VarSet) {
        let others: VarSet = members(rest)
            .flat_map(|j| self.components[j].iter().copied())
            .collect();
        let comp = self.var_set(i);
        let overlap: VarSet = comp.intersection(&others).copied().collect();
        let tail: VarSet = comp.difference(&overlap).copied().collect();
        (tail, overlap)
    }
}

fn members(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1u64 << i) != 0)
}

/// How intersection overlaps are reduced once collected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum OStarRule {
    /// Distinct nonempty intersections that are maximal under inclusion.
    #[default]
    Maximal,
    /// Every distinct nonempty intersection.
    AllDistinct,
}

impl fmt::Display for OStarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OStarRule::Maximal => "maximal",
            OStarRule::AllDistinct => "all-distinct",
        })
    }
}

impl FromStr for OStarRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximal" => Ok(OStarRule::Maximal),
            "all-distinct" => Ok(OStarRule::AllDistinct),
            other => Err(Error::Parse(format!("unknown O* rule `{other}`"))),
        }
    }
}

fn reduce_intersections(sets: Vec<VarSet>, rule: OStarRule) -> Vec<VarSet> {
    let mut distinct: Vec<VarSet> = Vec::new();
    for s in sets {
        if !s.is_empty() && !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    if rule == OStarRule::Maximal {
        let all = distinct.clone();
        distinct.retain(|s| !all.iter().any(|o| o != s && s.is_subset(o)));
    }
    distinct.sort();
    distinct
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnpackingStep {
    /// Index of the removed component in its structure.
    pub component: usize,
    pub tail: VarSet,
    pub overlap: VarSet,
    pub intersection_overlaps: Vec<VarSet>,
}

impl UnpackingStep {
    /// The intersection overlaps are pairwise disjoint and cover the overlap.
    pub fn intersections_partition_overlap(&self) -> bool {
        let mut union = VarSet::new();
        for s in &self.intersection_overlaps {
            if !union.is_disjoint(s) {
                return false;
            }
            union.extend(s.iter().copied());
        }
        union == self.overlap
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unpacking {
    steps: Vec<UnpackingStep>,
    rule: OStarRule,
}

impl Unpacking {
    pub fn steps(&self) -> &[UnpackingStep] {
        &self.steps
    }

    pub fn rule(&self) -> OStarRule {
        self.rule
    }

    /// Component indices in removal order.
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.component).collect()
    }

    /// Every tail is a single variable.
    pub fn has_unit_tails(&self) -> bool {
        self.steps.iter().all(|s| s.tail.len() == 1)
    }

    /// Every overlap lies inside one component removed later.
    pub fn is_tree(&self, structure: &Structure) -> bool {
        self.steps.iter().enumerate().all(|(i, s)| {
            s.overlap.is_empty()
                || self.steps[i + 1..]
                    .iter()
                    .any(|later| s.overlap.is_subset(&structure.var_set(later.component)))
        })
    }

    /// For every step the intersection overlaps partition the overlap.
    pub fn partition_condition(&self) -> bool {
        self.steps
            .iter()
            .all(UnpackingStep::intersections_partition_overlap)
    }

    /// Sorted (component, overlap) pairs; equal for unpackings that induce
    /// the same product extension.
    pub fn overlap_signature(&self) -> Vec<(usize, VarSet)> {
        let mut sig: Vec<(usize, VarSet)> = self
            .steps
            .iter()
            .map(|s| (s.component, s.overlap.clone()))
            .collect();
        sig.sort();
        sig
    }

    /// Recomputes the intersection overlaps of every step under `rule`.
    pub fn with_rule(&self, structure: &Structure, rule: OStarRule) -> Unpacking {
        intersection_overlaps(structure, self, rule)
    }
}

/// Components holding at least one variable no other component has.
pub fn find_terminals(structure: &Structure) -> Vec<usize> {
    structure.terminals_in(structure.full_mask())
}

fn build(structure: &Structure, order: &[usize], rule: OStarRule) -> Unpacking {
    let mut remaining = structure.full_mask();
    let mut steps = Vec::with_capacity(order.len());
    for &i in order {
        remaining &= !(1u64 << i);
        let (tail, overlap) = structure.step_sets(i, remaining);
        steps.push(UnpackingStep {
            component: i,
            tail,
            overlap,
            intersection_overlaps: Vec::new(),
        });
    }
    intersection_overlaps(structure, &Unpacking { steps, rule }, rule)
}

/// Checks that `order` is a valid unpacking and builds it.
pub fn unpack_in_order(structure: &Structure, order: &[usize], rule: OStarRule) -> Result<Unpacking> {
    let mut remaining = structure.full_mask();
    if order.len() != structure.len() {
        return Err(Error::InvalidUnpacking(format!(
            "{} steps for {} components",
            order.len(),
            structure.len()
        )));
    }
    for &i in order {
        if i >= structure.len() || remaining & (1u64 << i) == 0 {
            return Err(Error::InvalidUnpacking(format!(
                "component {i} missing or repeated"
            )));
        }
        if !structure.terminals_in(remaining).contains(&i) {
            return Err(Error::InvalidUnpacking(format!(
                "{} is not terminal at its stage",
                structure.label(i)
            )));
        }
        remaining &= !(1u64 << i);
    }
    Ok(build(structure, order, rule))
}

/// Depth-first search for a removal order whose every step passes `accept`.
/// Terminal choices are tried in preference order and dead ends are memoized
/// by the set of remaining components.
fn search<F>(structure: &Structure, accept: F) -> Option<Vec<usize>>
where
    F: Fn(&VarSet, &VarSet, u64) -> bool,
{
    fn go<F: Fn(&VarSet, &VarSet, u64) -> bool>(
        s: &Structure,
        remaining: u64,
        accept: &F,
        dead: &mut HashSet<u64>,
        order: &mut Vec<usize>,
    ) -> bool {
        if remaining == 0 {
            return true;
        }
        if dead.contains(&remaining) {
            return false;
        }
        for i in s.ordered_terminals(remaining) {
            let rest = remaining & !(1u64 << i);
            let (tail, overlap) = s.step_sets(i, rest);
            if !accept(&tail, &overlap, rest) {
                continue;
            }
            order.push(i);
            if go(s, rest, accept, dead, order) {
                return true;
            }
            order.pop();
        }
        dead.insert(remaining);
        false
    }
    let mut order = Vec::with_capacity(structure.len());
    let mut dead = HashSet::new();
    go(structure, structure.full_mask(), &accept, &mut dead, &mut order).then_some(order)
}

fn tree_step(structure: &Structure, overlap: &VarSet, rest: u64) -> bool {
    overlap.is_empty() || members(rest).any(|j| overlap.is_subset(&structure.var_set(j)))
}

fn tree_order(structure: &Structure) -> Option<Vec<usize>> {
    search(structure, |_, overlap, rest| tree_step(structure, overlap, rest))
}

fn dag_order(structure: &Structure) -> Option<Vec<usize>> {
    search(structure, |tail, _, _| tail.len() == 1)
}

/// Unpacks a web.
///
/// When the structure admits a tree unpacking (every overlap inside one
/// remaining component) one is returned. Otherwise terminals are removed
/// greedily. Ties go to the component whose sorted variable names compare
/// greatest, so the result does not depend on component listing order.
/// Removing any terminal of a web leaves a web, so the greedy pass never
/// needs to backtrack.
pub fn unpack(structure: &Structure) -> Result<Unpacking> {
    unpack_with_rule(structure, OStarRule::default())
}

pub fn unpack_with_rule(structure: &Structure, rule: OStarRule) -> Result<Unpacking> {
    if let Some(order) = tree_order(structure) {
        return Ok(build(structure, &order, rule));
    }
    let mut remaining = structure.full_mask();
    let mut order = Vec::with_capacity(structure.len());
    while remaining != 0 {
        let Some(&i) = structure.ordered_terminals(remaining).first() else {
            let left: Vec<String> = members(remaining).map(|i| structure.label(i)).collect();
            return Err(Error::NotAWeb {
                remaining: left.join(", "),
            });
        };
        order.push(i);
        remaining &= !(1u64 << i);
    }
    Ok(build(structure, &order, rule))
}

/// Fills in each step's intersection overlaps: the nonempty intersections of
/// the step's component with each individual component still remaining,
/// reduced by `rule`.
pub fn intersection_overlaps(structure: &Structure, unpacking: &Unpacking, rule: OStarRule) -> Unpacking {
    let steps = unpacking
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let comp = structure.var_set(step.component);
            let sets = unpacking.steps[i + 1..]
                .iter()
                .map(|later| {
                    comp.intersection(&structure.var_set(later.component))
                        .copied()
                        .collect::<VarSet>()
                })
                .collect();
            UnpackingStep {
                intersection_overlaps: reduce_intersections(sets, rule),
                ..step.clone()
            }
        })
        .collect();
    Unpacking { steps, rule }
}

/// Intersection overlaps for an arbitrary structure, without an unpacking:
/// the distinct nonempty pairwise intersections over all unordered component
/// pairs, reduced by `rule`. Each set is paired with the lowest-indexed
/// component containing it, whose table supplies its marginal.
pub fn pairwise_intersection_overlaps(structure: &Structure, rule: OStarRule) -> Vec<(usize, VarSet)> {
    let mut sets = Vec::new();
    for i in 0..structure.len() {
        for j in i + 1..structure.len() {
            sets.push(
                structure
                    .var_set(i)
                    .intersection(&structure.var_set(j))
                    .copied()
                    .collect(),
            );
        }
    }
    reduce_intersections(sets, rule)
        .into_iter()
        .map(|s| {
            let owner = (0..structure.len())
                .find(|&c| s.is_subset(&structure.var_set(c)))
                .expect("intersection lies in its components");
            (owner, s)
        })
        .collect()
}

/// Every admissible unpacking order.
pub fn all_unpackings(structure: &Structure, limit: usize) -> Result<Vec<Vec<usize>>> {
    if structure.len() > limit {
        return Err(Error::TooManyComponents {
            components: structure.len(),
            limit,
        });
    }
    fn go(s: &Structure, remaining: u64, order: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(order.clone());
            return;
        }
        for i in s.ordered_terminals(remaining) {
            order.push(i);
            go(s, remaining & !(1u64 << i), order, out);
            order.pop();
        }
    }
    let mut out = Vec::new();
    go(structure, structure.full_mask(), &mut Vec::new(), &mut out);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureLabel {
    NonWeb,
    Web,
    DagLike,
    Hypertree,
}

impl fmt::Display for StructureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureLabel::NonWeb => "non_web",
            StructureLabel::Web => "web",
            StructureLabel::DagLike => "dag_like",
            StructureLabel::Hypertree => "hypertree",
        })
    }
}

/// Labels that apply to a structure. `web` accompanies `dag_like` and
/// `hypertree`; `non_web` stands alone.
pub fn classify(structure: &Structure) -> BTreeSet<StructureLabel> {
    let mut labels = BTreeSet::new();
    if search(structure, |_, _, _| true).is_none() {
        labels.insert(StructureLabel::NonWeb);
        return labels;
    }
    labels.insert(StructureLabel::Web);
    if dag_order(structure).is_some() {
        labels.insert(StructureLabel::DagLike);
    }
    if tree_order(structure).is_some() {
        labels.insert(StructureLabel::Hypertree);
    }
    labels
}
