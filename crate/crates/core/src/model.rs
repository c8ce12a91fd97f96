//! Discrete variables, joint state spaces and dense probability tables.
//!
//! All tables use row-major order over their scope with the last listed
//! variable varying fastest; states of a variable are `0..card`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Prob;

/// Index of a variable inside its [`JointSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    name: String,
    card: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, card: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidVariable("empty variable name".into()));
        }
        if card < 2 {
            return Err(Error::InvalidVariable(format!(
                "`{name}` has cardinality {card}, need at least 2"
            )));
        }
        Ok(Variable { name, card })
    }

    pub fn binary(name: impl Into<String>) -> Result<Self> {
        Variable::new(name, 2)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn card(&self) -> usize {
        self.card
    }
}

/// An ordered list of variables and the product state space they span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointSpace {
    variables: Vec<Variable>,
}

impl JointSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.name()) {
                return Err(Error::InvalidVariable(format!(
                    "duplicate variable name `{}`",
                    v.name()
                )));
            }
        }
        Ok(JointSpace { variables })
    }

    /// Space of binary variables with the given names.
    pub fn binary<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let vars = names
            .iter()
            .map(|n| Variable::binary(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        JointSpace::new(vars)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn ids(&self) -> Vec<VarId> {
        (0..self.variables.len()).map(VarId).collect()
    }

    /// Number of joint states: the product of all cardinalities.
    pub fn size(&self) -> usize {
        self.variables.iter().map(Variable::card).product()
    }

    pub fn card(&self, id: VarId) -> usize {
        self.variables[id.0].card
    }

    pub fn cards(&self, scope: &[VarId]) -> Vec<usize> {
        scope.iter().map(|&v| self.card(v)).collect()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn ids_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<VarId>> {
        names.iter().map(|n| self.id(n.as_ref())).collect()
    }

    /// Human readable label for a set of variables: `BC` when every name is a
    /// single character, `x1,x2` otherwise. The empty set prints as `{}`.
    pub fn label<'a, I>(&self, scope: I) -> String
    where
        I: IntoIterator<Item = &'a VarId>,
    {
        let names: Vec<&str> = scope.into_iter().map(|&v| self.name(v)).collect();
        if names.is_empty() {
            "{}".to_string()
        } else if names.iter().all(|n| n.chars().count() == 1) {
            names.concat()
        } else {
            names.join(",")
        }
    }

    /// All joint states in row-major order, last variable fastest.
    pub fn enumerate_states(&self) -> Vec<Vec<usize>> {
        let cards: Vec<usize> = self.variables.iter().map(Variable::card).collect();
        states(&cards).collect()
    }
}

/// Iterator over the multi-indices of a product space, last axis fastest.
pub fn states(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = cards.iter().product();
    (0..total).map(move |i| {
        let mut digits = vec![0; cards.len()];
        decode(i, cards, &mut digits);
        digits
    })
}

/// Row-major strides for the given cardinalities.
pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * cards[i + 1];
    }
    out
}

pub(crate) fn decode(mut index: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
}

/// Maps full joint states onto flat indices of a table over `scope`.
#[derive(Clone, Debug)]
pub(crate) struct Projector {
    vars: Vec<usize>,
    strides: Vec<usize>,
}

impl Projector {
    pub(crate) fn new(scope: &[VarId], cards: &[usize]) -> Self {
        Projector {
            vars: scope.iter().map(|v| v.0).collect(),
            strides: strides(cards),
        }
    }

    #[inline]
    pub(crate) fn index(&self, joint_state: &[usize]) -> usize {
        self.vars
            .iter()
            .zip(&self.strides)
            .map(|(&v, &s)| joint_state[v] * s)
            .sum()
    }
}

fn check_scope(scope: &[VarId]) -> Result<()> {
    let mut seen = HashSet::new();
    for v in scope {
        if !seen.insert(*v) {
            return Err(Error::Scope(format!("variable {} repeated in scope", v.0)));
        }
    }
    Ok(())
}

/// Dense table of weights over the joint states of `scope`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable<T = f64> {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<T>,
}

impl<T: Prob> ProbTable<T> {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<T>) -> Result<Self> {
        check_scope(&scope)?;
        if scope.len() != cards.len() {
            return Err(Error::Scope(format!(
                "{} variables but {} cardinalities",
                scope.len(),
                cards.len()
            )));
        }
        let expected: usize = cards.iter().product();
        if values.len() != expected {
            return Err(Error::TableSize {
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || **v < T::zero() || **v > T::one())
        {
            return Err(Error::InvalidTable(format!("entry {bad} outside [0, 1]")));
        }
        Ok(ProbTable {
            scope,
            cards,
            values,
        })
    }

    /// Table over `scope` with cardinalities looked up in `space`.
    pub fn over(space: &JointSpace, scope: Vec<VarId>, values: Vec<T>) -> Result<Self> {
        if let Some(v) = scope.iter().find(|v| v.0 >= space.num_variables()) {
            return Err(Error::Scope(format!("variable {} not in space", v.0)));
        }
        let cards = space.cards(&scope);
        ProbTable::new(scope, cards, values)
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn is_normalized(&self, tol: T) -> bool {
        (self.sum() - T::one()).abs() <= tol
    }

    /// Value at a multi-index over this table's own scope.
    pub fn get(&self, assignment: &[usize]) -> T {
        let idx: usize = strides(&self.cards)
            .iter()
            .zip(assignment)
            .map(|(s, a)| s * a)
            .sum();
        self.values[idx]
    }

    pub(crate) fn projector(&self) -> Projector {
        Projector::new(&self.scope, &self.cards)
    }

    /// Sums out every variable not in `keep`. The result's scope is `keep` in
    /// the order given.
    pub fn marginalize(&self, keep: &[VarId]) -> Result<ProbTable<T>> {
        check_scope(keep)?;
        let positions = keep
            .iter()
            .map(|v| {
                self.scope.iter().position(|s| s == v).ok_or_else(|| {
                    Error::Scope(format!("variable {} is not in the table scope", v.0))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out_cards: Vec<usize> = positions.iter().map(|&p| self.cards[p]).collect();
        let out_strides = strides(&out_cards);
        let mut out = vec![T::zero(); out_cards.iter().product()];
        let mut digits = vec![0; self.cards.len()];
        for (i, &v) in self.values.iter().enumerate() {
            decode(i, &self.cards, &mut digits);
            let j: usize = positions
                .iter()
                .zip(&out_strides)
                .map(|(&p, &s)| digits[p] * s)
                .sum();
            out[j] = out[j] + v;
        }
        // Rounding can push a sum of entries in [0,1] a hair past 1.
        for v in &mut out {
            if *v > T::one() {
                *v = T::one();
            }
        }
        Ok(ProbTable {
            scope: keep.to_vec(),
            cards: out_cards,
            values: out,
        })
    }

    /// For every entry, the flat index of its restriction to `given`.
    pub(crate) fn slice_indices(&self, given: &[VarId]) -> Result<Vec<usize>> {
        let positions = given
            .iter()
            .map(|v| {
                self.scope.iter().position(|s| s == v).ok_or_else(|| {
                    Error::Scope(format!("variable {} is not in the table scope", v.0))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let given_cards: Vec<usize> = positions.iter().map(|&p| self.cards[p]).collect();
        let given_strides = strides(&given_cards);
        let mut digits = vec![0; self.cards.len()];
        Ok((0..self.values.len())
            .map(|i| {
                decode(i, &self.cards, &mut digits);
                positions
                    .iter()
                    .zip(&given_strides)
                    .map(|(&p, &s)| digits[p] * s)
                    .sum()
            })
            .collect())
    }

    /// Conditional table of `scope \ given` given each state of `given`.
    ///
    /// Slices whose `given` marginal is zero are set uniform and reported in
    /// [`Conditional::zero_marginals`].
    pub fn condition(&self, given: &[VarId]) -> Result<Conditional<T>> {
        let marginal = self.marginalize(given)?;
        if given.is_empty() {
            return Ok(Conditional {
                table: self.clone(),
                given: Vec::new(),
                zero_marginals: Vec::new(),
            });
        }
        let slices = self.slice_indices(given)?;
        let slice_len = self.values.len() / marginal.len();
        let uniform = T::one() / T::lit(slice_len as f64);
        let values = self
            .values
            .iter()
            .zip(&slices)
            .map(|(&v, &g)| {
                let m = marginal.values[g];
                if m > T::zero() {
                    (v / m).min(T::one())
                } else {
                    uniform
                }
            })
            .collect();
        let zero_marginals = marginal
            .values
            .iter()
            .enumerate()
            .filter(|(_, m)| **m <= T::zero())
            .map(|(g, _)| g)
            .collect();
        Ok(Conditional {
            table: ProbTable {
                scope: self.scope.clone(),
                cards: self.cards.clone(),
                values,
            },
            given: given.to_vec(),
            zero_marginals,
        })
    }

    /// Divides by the total so the entries sum to one.
    pub fn normalized(&self) -> Result<ProbTable<T>> {
        let s = self.sum();
        if s <= T::zero() {
            return Err(Error::InvalidTable("table has zero mass".into()));
        }
        Ok(ProbTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|&v| v / s).collect(),
        })
    }

    pub fn cast<U: Prob>(&self) -> ProbTable<U> {
        ProbTable {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Result of [`ProbTable::condition`]: entries are `P(rest | given)` laid out
/// over the source table's scope.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional<T = f64> {
    pub table: ProbTable<T>,
    pub given: Vec<VarId>,
    /// Flat indices (over `given`) of states with zero marginal.
    pub zero_marginals: Vec<usize>,
}

impl<T> Conditional<T> {
    pub fn has_zero_marginal(&self) -> bool {
        !self.zero_marginals.is_empty()
    }
}

/// Dense distribution over every joint state of a [`JointSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution<T = f64> {
    space: JointSpace,
    table: ProbTable<T>,
}

impl<T: Prob> JointDistribution<T> {
    pub fn new(space: JointSpace, values: Vec<T>) -> Result<Self> {
        let table = ProbTable::over(&space, space.ids(), values)?;
        Ok(JointDistribution { space, table })
    }

    /// Every state gets `1 / size`.
    pub fn uniform(space: &JointSpace) -> Self {
        let n = space.size();
        let p = T::one() / T::lit(n as f64);
        JointDistribution::new(space.clone(), vec![p; n]).expect("uniform table is valid")
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        self.table.values()
    }

    pub fn as_table(&self) -> &ProbTable<T> {
        &self.table
    }

    pub fn sum(&self) -> T {
        self.table.sum()
    }

    pub fn get(&self, state: &[usize]) -> T {
        self.table.get(state)
    }

    pub fn marginal(&self, scope: &[VarId]) -> Result<ProbTable<T>> {
        self.table.marginalize(scope)
    }

    /// Largest absolute difference between two distributions on one space.
    pub fn max_abs_diff(&self, other: &JointDistribution<T>) -> Result<T> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(self
            .values()
            .iter()
            .zip(other.values())
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    pub fn cast<U: Prob>(&self) -> JointDistribution<U> {
        JointDistribution {
            space: self.space.clone(),
            table: self.table.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> JointSpace {
        JointSpace::binary(&["A", "B"]).unwrap()
    }

    #[test]
    fn enumerates_last_variable_fastest() {
        assert_eq!(
            ab().enumerate_states(),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        let s = JointSpace::new(vec![Variable::new("X", 3).unwrap()]).unwrap();
        assert_eq!(s.enumerate_states(), vec![vec![0], vec![1], vec![2]]);
        let four = JointSpace::binary(&["A", "B", "C", "D"]).unwrap();
        assert_eq!(four.enumerate_states().len(), 16);
        assert_eq!(four.size(), 16);
    }

    #[test]
    fn rejects_bad_variables() {
        assert!(Variable::new("A", 1).is_err());
        assert!(Variable::new("", 2).is_err());
        let dup = JointSpace::binary(&["A", "A"]);
        assert!(matches!(dup, Err(Error::InvalidVariable(_))));
    }

    #[test]
    fn marginalize_row_sums() {
        let s = ab();
        let t = ProbTable::<f64>::over(&s, s.ids(), vec![0.3, 0.1, 0.2, 0.4]).unwrap();
        let a = t.marginalize(&[VarId(0)]).unwrap();
        assert!((a.values()[0] - 0.4).abs() < 1e-15);
        assert!((a.values()[1] - 0.6).abs() < 1e-15);
        let b = t.marginalize(&[VarId(1)]).unwrap();
        assert!((b.values()[0] - 0.5).abs() < 1e-15);
        assert_eq!(t.marginalize(&s.ids()).unwrap(), t);
    }

    #[test]
    fn marginalize_fig1_ab_gives_p_a() {
        // P(A=1,B=1)=.4, P(A=1,B=0)=.1
        let s = ab();
        let t = ProbTable::<f64>::over(&s, s.ids(), vec![0.3, 0.2, 0.1, 0.4]).unwrap();
        let a = t.marginalize(&[VarId(0)]).unwrap();
        assert!((a.values()[1] - 0.5).abs() < 1e-15);
        let b = t.marginalize(&[VarId(1)]).unwrap();
        assert!((b.values()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn marginalize_reorders_scope() {
        let s = ab();
        let t = ProbTable::<f64>::over(&s, s.ids(), vec![0.3, 0.1, 0.2, 0.4]).unwrap();
        let ba = t.marginalize(&[VarId(1), VarId(0)]).unwrap();
        assert_eq!(ba.values(), &[0.3, 0.2, 0.1, 0.4]);
    }

    #[test]
    fn marginalize_outside_scope_is_scope_error() {
        let s = JointSpace::binary(&["A", "B", "C"]).unwrap();
        let t = ProbTable::<f64>::over(&s, vec![VarId(0), VarId(1)], vec![0.25; 4]).unwrap();
        assert!(matches!(t.marginalize(&[VarId(2)]), Err(Error::Scope(_))));
    }

    #[test]
    fn condition_fig1_bcd() {
        let s = JointSpace::binary(&["B", "C", "D"]).unwrap();
        let bcd = vec![0.24, 0.06, 0.06, 0.04, 0.16, 0.24, 0.04, 0.16];
        let t = ProbTable::<f64>::over(&s, s.ids(), bcd).unwrap();
        let c = t.condition(&[VarId(0), VarId(1)]).unwrap();
        assert!(!c.has_zero_marginal());
        assert!((c.table.get(&[1, 1, 1]) - 0.8).abs() < 1e-12);
        assert!((c.table.get(&[1, 0, 1]) - 0.6).abs() < 1e-12);
        assert!((c.table.get(&[0, 1, 1]) - 0.4).abs() < 1e-12);
        assert!((c.table.get(&[0, 0, 1]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn condition_on_nothing_is_identity() {
        let s = ab();
        let t = ProbTable::<f64>::over(&s, s.ids(), vec![0.3, 0.1, 0.2, 0.4]).unwrap();
        assert_eq!(t.condition(&[]).unwrap().table, t);
    }

    #[test]
    fn condition_zero_marginal_is_uniform_and_flagged() {
        let s = ab();
        let t = ProbTable::<f64>::over(&s, s.ids(), vec![0.0, 0.0, 0.3, 0.7]).unwrap();
        let c = t.condition(&[VarId(0)]).unwrap();
        assert_eq!(c.zero_marginals, vec![0]);
        assert_eq!(c.table.get(&[0, 0]), 0.5);
        assert_eq!(c.table.get(&[0, 1]), 0.5);
        assert!((c.table.get(&[1, 1]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uniform_tables() {
        let four = JointSpace::binary(&["A", "B", "C", "D"]).unwrap();
        let u = JointDistribution::<f64>::uniform(&four);
        assert!(u.values().iter().all(|&v| v == 1.0 / 16.0));
        let one = JointSpace::binary(&["A"]).unwrap();
        assert_eq!(JointDistribution::<f64>::uniform(&one).values(), &[0.5, 0.5]);
        let three = JointSpace::new(vec![Variable::new("X", 3).unwrap()]).unwrap();
        let u3 = JointDistribution::<f64>::uniform(&three);
        assert!(u3.values().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-16));
    }

    #[test]
    fn table_validation() {
        let s = ab();
        assert!(matches!(
            ProbTable::<f64>::over(&s, s.ids(), vec![0.5, 0.5]),
            Err(Error::TableSize { expected: 4, got: 2 })
        ));
        assert!(ProbTable::<f64>::over(&s, s.ids(), vec![0.5, 0.5, -0.1, 0.1]).is_err());
        assert!(ProbTable::<f64>::over(&s, vec![VarId(0), VarId(0)], vec![0.25; 4]).is_err());
    }

    #[test]
    fn labels() {
        let s = JointSpace::binary(&["B", "C", "long"]).unwrap();
        assert_eq!(s.label(&[VarId(0), VarId(1)]), "BC");
        assert_eq!(s.label(&[VarId(0), VarId(2)]), "B,long");
        assert_eq!(s.label(&[]), "{}");
    }
}
