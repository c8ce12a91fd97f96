//! Iterative proportional fitting, the maximum-entropy member of the set of
//! joints consistent with a system, and checks of its score guarantee.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::ProbabilitySystem;
use crate::model::{JointDistribution, JointSpace, Projector};
use crate::scalar::Prob;
use crate::scoring::{log_score, relative_score};

/// Default residual target for [`maxent_fit`].
pub const MAXENT_TOL: f64 = 1e-10;
/// Default sweep budget for [`maxent_fit`] and [`sample_k`].
pub const MAXENT_MAX_ITER: usize = 10_000;

/// A positive residual is stalled when it drops by less than this much
/// over [`IPF_STALL_WINDOW`] consecutive sweeps.
pub const IPF_STALL_DELTA: f64 = 1e-14;
pub const IPF_STALL_WINDOW: usize = 100;

/// Floor applied to random initial joints so they have full support.
const INIT_FLOOR: f64 = 1e-12;

/// In-progress fit of a joint to a system's component marginals.
pub struct IpfState<'a, T: Prob> {
    system: &'a ProbabilitySystem<T>,
    values: Vec<T>,
    /// For each component, the table index of every joint state.
    index: Vec<Vec<usize>>,
}

impl<'a, T: Prob> IpfState<'a, T> {
    pub fn new(system: &'a ProbabilitySystem<T>, init: JointDistribution<T>) -> Self {
        let projectors: Vec<Projector> = system.tables().iter().map(|t| t.projector()).collect();
        let mut index = vec![Vec::with_capacity(system.space().size()); projectors.len()];
        for state in system.space().enumerate_states() {
            for (p, out) in projectors.iter().zip(index.iter_mut()) {
                out.push(p.index(&state));
            }
        }
        IpfState {
            system,
            values: init.values().to_vec(),
            index,
        }
    }

    fn marginal(&self, c: usize) -> Vec<T> {
        let mut m = vec![T::zero(); self.system.table(c).len()];
        for (v, &i) in self.values.iter().zip(&self.index[c]) {
            m[i] = m[i] + *v;
        }
        m
    }

    /// Rescales the joint to match one component table.
    pub fn fit_component(&mut self, c: usize) {
        let m = self.marginal(c);
        let target = self.system.table(c).values();
        let factors: Vec<T> = m
            .iter()
            .zip(target)
            .map(|(&have, &want)| if have > T::zero() { want / have } else { T::zero() })
            .collect();
        for (v, &i) in self.values.iter_mut().zip(&self.index[c]) {
            *v = *v * factors[i];
        }
    }

    /// Largest component-marginal error of the current joint.
    pub fn residual(&self) -> T {
        (0..self.system.tables().len())
            .map(|c| {
                self.marginal(c)
                    .iter()
                    .zip(self.system.table(c).values())
                    .fold(T::zero(), |w, (a, b)| w.max((*a - *b).abs()))
            })
            .fold(T::zero(), T::max)
    }

    /// One cycle over the components in structure order; returns the
    /// residual afterwards.
    pub fn sweep(&mut self) -> T {
        for c in 0..self.system.tables().len() {
            self.fit_component(c);
        }
        self.residual()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn joint(&self) -> JointDistribution<T> {
        let vals = self.values.iter().map(|v| v.min(T::one())).collect();
        JointDistribution::new(self.system.space().clone(), vals)
            .expect("fitted values stay in [0, 1]")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpfTermination {
    Converged,
    Stalled,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpfOutcome<T = f64> {
    pub joint: JointDistribution<T>,
    pub sweeps: usize,
    pub residual: T,
    pub termination: IpfTermination,
}

/// Runs full sweeps from `init` until the residual is below `tol`, stalls,
/// or `max_iter` sweeps have run.
pub fn ipf<T: Prob>(
    system: &ProbabilitySystem<T>,
    init: JointDistribution<T>,
    tol: T,
    max_iter: usize,
) -> IpfOutcome<T> {
    let mut state = IpfState::new(system, init);
    let mut history: Vec<T> = Vec::new();
    let mut termination = IpfTermination::Exhausted;
    let mut residual = T::infinity();
    let mut sweeps = 0;
    while sweeps < max_iter {
        residual = state.sweep();
        sweeps += 1;
        if residual < tol {
            termination = IpfTermination::Converged;
            break;
        }
        history.push(residual);
        if history.len() > IPF_STALL_WINDOW {
            let before = history[history.len() - 1 - IPF_STALL_WINDOW];
            if before - residual < T::lit(IPF_STALL_DELTA) {
                termination = IpfTermination::Stalled;
                break;
            }
        }
    }
    IpfOutcome {
        joint: state.joint(),
        sweeps,
        residual,
        termination,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxentResult<T = f64> {
    pub joint: JointDistribution<T>,
    pub iterations: usize,
    pub residual: T,
    pub entropy: T,
}

/// Maximum-entropy joint with the system's component marginals: the IPF
/// limit started from the uniform joint.
pub fn maxent_fit<T: Prob>(
    system: &ProbabilitySystem<T>,
    tol: T,
    max_iter: usize,
) -> Result<MaxentResult<T>> {
    let out = ipf(system, JointDistribution::uniform(system.space()), tol, max_iter);
    match out.termination {
        IpfTermination::Converged => {
            let entropy = -log_score(out.joint.values());
            Ok(MaxentResult {
                joint: out.joint,
                iterations: out.sweeps,
                residual: out.residual,
                entropy,
            })
        }
        IpfTermination::Stalled => Err(Error::Inconsistent {
            residual: out.residual.as_f64(),
        }),
        IpfTermination::Exhausted => Err(Error::NotConverged {
            iterations: out.sweeps,
            residual: out.residual.as_f64(),
        }),
    }
}

/// Strictly positive random joint: independent uniform draws per state,
/// floored and normalized.
pub fn random_positive_joint<T: Prob, R: Rng>(space: &JointSpace, rng: &mut R) -> JointDistribution<T> {
    let raw: Vec<f64> = (0..space.size())
        .map(|_| rng.random::<f64>().max(INIT_FLOOR))
        .collect();
    let total: f64 = raw.iter().sum();
    let vals = raw.iter().map(|v| T::lit(v / total).min(T::one())).collect();
    JointDistribution::new(space.clone(), vals).expect("normalized positive joint")
}

/// Deterministic per (seed, index) generator for sample `index`.
fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `count` members of the consistent set, each the IPF limit from an
/// independent random positive start.
pub fn sample_k<T: Prob>(
    system: &ProbabilitySystem<T>,
    seed: u64,
    count: usize,
    tol: T,
    max_iter: usize,
) -> Result<Vec<JointDistribution<T>>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let init = random_positive_joint(system.space(), &mut sample_rng(seed, i));
            let out = ipf(system, init, tol, max_iter);
            match out.termination {
                IpfTermination::Converged => Ok(out.joint),
                IpfTermination::Stalled => Err(Error::Inconsistent {
                    residual: out.residual.as_f64(),
                }),
                IpfTermination::Exhausted => Err(Error::NotConverged {
                    iterations: out.sweeps,
                    residual: out.residual.as_f64(),
                }),
            }
        })
        .collect()
}

/// Guarantee inequalities must hold to this slack.
pub const CHAIN_TOL: f64 = 1e-8;
/// `G(P, P')` and `G(P')` must agree to this.
pub const PYTHAGOREAN_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainCheck<T = f64> {
    /// `G(P)`
    pub g_p: T,
    /// `G(P, P')`
    pub g_p_maxent: T,
    /// `G(P')`
    pub g_maxent: T,
    pub chain_holds: bool,
    pub pythagorean_holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport<T = f64> {
    pub checks: Vec<ChainCheck<T>>,
    /// Indices of samples failing either check.
    pub violations: Vec<usize>,
}

/// Checks `G(P) >= G(P, P') >= G(P')` and `G(P, P') = G(P')` for each
/// sample `P`, where `P'` is the maximum-entropy joint.
pub fn verify_guarantee_chain<T: Prob>(
    maxent: &JointDistribution<T>,
    samples: &[JointDistribution<T>],
) -> Result<ChainReport<T>> {
    let g_maxent = log_score(maxent.values());
    let slack = T::lit(CHAIN_TOL);
    let mut checks = Vec::with_capacity(samples.len());
    let mut violations = Vec::new();
    for (i, p) in samples.iter().enumerate() {
        let g_p = log_score(p.values());
        let g_p_maxent = relative_score(p, maxent)?;
        let chain_holds = g_p >= g_p_maxent - slack && g_p_maxent >= g_maxent - slack;
        let pythagorean_holds = (g_p_maxent - g_maxent).abs() < T::lit(PYTHAGOREAN_TOL);
        if !(chain_holds && pythagorean_holds) {
            violations.push(i);
        }
        checks.push(ChainCheck {
            g_p,
            g_p_maxent,
            g_maxent,
            chain_holds,
            pythagorean_holds,
        });
    }
    Ok(ChainReport { checks, violations })
}
