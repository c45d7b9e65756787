//! Seeded numerical search for projective realizations of a support target.
//!
//! Each restart runs Levenberg-Marquardt on a least-squares penalty. The
//! unknowns are the state and, per measurement, a `dim x rank` complex
//! matrix whose orthonormalized columns span the outcome-1 subspace.
//! Residual blocks:
//!
//! * forbidden tuple: the amplitude vector `Q_a Q_b psi`, whose squared norm
//!   is the tuple's probability;
//! * context: `sqrt2 (1 - P_i) P_j B_i`, whose squared norm equals
//!   `||[P_i, P_j]||_F^2`;
//! * required tuple: `max(0, sqrt(SEARCH_MARGIN) - sqrt(p))`. Hinging the
//!   amplitude rather than `p` keeps a nonzero gradient at `p = 0`.
//!
//! A converged restart is accepted only after an independent rebuild of the
//! behavior through [`behavior_from_realization`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64, ZERO};
use crate::ncycle::{CycleBehavior, SupportEntry};
use crate::quantum::{behavior_from_realization, Projector, QuantumRealization};
use crate::scenario::{Label, Outcome, PossibilisticBehavior, Scenario};

pub const DEFAULT_RESTARTS: usize = 50;
pub const MAX_ITERATIONS: usize = 2000;
/// Largest forbidden probability counted as zero.
pub const FORBIDDEN_TOL: f64 = 1e-10;
/// Largest context commutator norm counted as compatible during search.
pub const COMMUTATOR_TOL: f64 = 1e-8;
/// Smallest probability counted as possible for a required tuple.
pub const REQUIRED_MARGIN: f64 = 1e-3;
/// The hinge aims above `REQUIRED_MARGIN` so converged points clear it.
const SEARCH_MARGIN: f64 = 2e-3;
const CONVERGED: f64 = 1e-28;
const POLISH_BELOW: f64 = 1e-4;

/// Tuples that must be impossible and tuples that must stay possible.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportTarget {
    scenario: Scenario,
    forbidden: Vec<(usize, Vec<Outcome>)>,
    required: Vec<(usize, Vec<Outcome>)>,
}

impl SupportTarget {
    pub fn new(scenario: Scenario, forbidden: &[SupportEntry], required: &[SupportEntry]) -> Result<Self> {
        let index = |e: &SupportEntry| -> Result<(usize, Vec<Outcome>)> {
            let c = scenario
                .context_index(&e.context)
                .ok_or_else(|| Error::InvalidBehavior(format!("{:?} is not a context", e.context)))?;
            if e.tuple.len() != e.context.len() || e.tuple.iter().any(|&o| o as usize >= scenario.outcomes()) {
                return Err(Error::InvalidBehavior(format!("bad tuple {:?}", e.tuple)));
            }
            Ok((c, e.tuple.clone()))
        };
        let forbidden = forbidden.iter().map(index).collect::<Result<_>>()?;
        let required = required.iter().map(index).collect::<Result<_>>()?;
        Ok(Self { scenario, forbidden, required })
    }

    pub fn from_cycle(b: &CycleBehavior) -> Self {
        Self::new(b.scenario().clone(), b.forbidden(), b.required()).expect("cycle constraints index their scenario")
    }

    /// Exact support: impossible tuples forbidden, possible tuples required.
    pub fn from_support(pb: &PossibilisticBehavior) -> Self {
        let s = pb.scenario();
        let mut forbidden = Vec::new();
        let mut required = Vec::new();
        for c in 0..s.contexts().len() {
            for i in 0..s.tuple_count(c) {
                let t = s.tuple_at(c, i);
                if pb.support(c)[i] {
                    required.push((c, t));
                } else {
                    forbidden.push((c, t));
                }
            }
        }
        Self { scenario: s.clone(), forbidden, required }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn is_satisfied_by(&self, pb: &PossibilisticBehavior) -> bool {
        pb.scenario() == &self.scenario
            && self.forbidden.iter().all(|(c, t)| !pb.is_possible(*c, t))
            && self.required.iter().all(|(c, t)| pb.is_possible(*c, t))
    }

    /// Why no behavior at all can meet the target, if that is evident.
    fn infeasibility(&self) -> Option<String> {
        for c in 0..self.scenario.contexts().len() {
            let dead = self.forbidden.iter().filter(|(fc, _)| *fc == c).count();
            let mut seen: Vec<&Vec<Outcome>> =
                self.forbidden.iter().filter(|(fc, _)| *fc == c).map(|(_, t)| t).collect();
            seen.sort();
            seen.dedup();
            if dead > 0 && seen.len() == self.scenario.tuple_count(c) {
                return Some(format!("every outcome of context {:?} is forbidden", self.scenario.context(c)));
            }
        }
        self.required
            .iter()
            .find(|r| self.forbidden.contains(r))
            .map(|(c, t)| format!("tuple {t:?} on {:?} is both forbidden and required", self.scenario.context(*c)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Found {
    pub realization: QuantumRealization,
    pub restart: usize,
    pub ranks: Vec<usize>,
    /// Objective after each accepted step of the successful restart.
    pub descent_log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureReason {
    Infeasible(String),
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub reason: FailureReason,
    pub best_objective: f64,
    pub restarts: usize,
    /// Descent log of the restart that reached `best_objective`.
    pub descent_log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found(Box<Found>),
    Failed(Failure),
}

impl SearchOutcome {
    pub fn realization(&self) -> Option<&QuantumRealization> {
        match self {
            SearchOutcome::Found(f) => Some(&f.realization),
            SearchOutcome::Failed(_) => None,
        }
    }
}

/// Runs up to `budget` seeded restarts. Restart `k` draws from stream `k` of
/// a ChaCha8 generator seeded with `seed`, so results depend only on
/// `(seed, k)`.
pub fn find_quantum_realization(target: &SupportTarget, dim: usize, seed: u64, budget: usize) -> Result<SearchOutcome> {
    let s = target.scenario();
    if dim < 2 {
        return Err(Error::InvalidRealization("search needs dim >= 2".into()));
    }
    if s.outcomes() != 2 {
        return Err(Error::InvalidScenario("search needs binary outcomes".into()));
    }
    if s.contexts().iter().any(|c| c.len() > 2) {
        return Err(Error::InvalidScenario("search handles contexts of one or two labels".into()));
    }
    if let Some(why) = target.infeasibility() {
        return Ok(SearchOutcome::Failed(Failure {
            reason: FailureReason::Infeasible(why),
            best_objective: f64::INFINITY,
            restarts: 0,
            descent_log: Vec::new(),
        }));
    }
    let patterns = rank_patterns(target, dim);
    let mut best = (f64::INFINITY, Vec::new());
    for restart in 0..budget {
        let ranks = &patterns[restart % patterns.len()];
        let problem = Problem::new(target, dim, ranks.clone(), SEARCH_MARGIN);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let x0: Vec<f64> = (0..problem.param_count()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (mut x, mut log) = levenberg_marquardt(&problem, x0);
        let objective = *log.last().expect("log starts with the initial objective");
        if objective > CONVERGED && objective < POLISH_BELOW {
            // the hinge may be holding the zeros away from convergence; a
            // lower margin frees them when every required tuple already clears it
            let polish = Problem::new(target, dim, ranks.clone(), REQUIRED_MARGIN / 2.0);
            let (xp, plog) = levenberg_marquardt(&polish, x.clone());
            x = xp;
            log.extend(plog.into_iter().skip(1));
        }
        if let Some(realization) = problem.accept(&x) {
            return Ok(SearchOutcome::Found(Box::new(Found {
                realization,
                restart,
                ranks: ranks.clone(),
                descent_log: log,
            })));
        }
        if objective < best.0 {
            best = (objective, log);
        }
    }
    Ok(SearchOutcome::Failed(Failure {
        reason: FailureReason::BudgetExhausted,
        best_objective: best.0,
        restarts: budget,
        descent_log: best.1,
    }))
}

/// Candidate projector ranks, cycled over restarts: half-dimensional
/// everywhere (even `dim` only), then two patterns that make every forbidden
/// pair a same-outcome pair after complementing the rank-`dim-1` projectors,
/// then rank 1 everywhere.
fn rank_patterns(target: &SupportTarget, dim: usize) -> Vec<Vec<usize>> {
    let s = target.scenario();
    let n = s.measurements();
    let mut flip: Vec<Option<bool>> = vec![None; n + 1];
    while let Some(start) = (1..=n).find(|&l| flip[l].is_none()) {
        flip[start] = Some(false);
        let mut changed = true;
        while changed {
            changed = false;
            for (c, t) in &target.forbidden {
                let ctx = s.context(*c);
                if let ([i, j], [x, y]) = (ctx, t.as_slice()) {
                    let parity = (x ^ y) == 1;
                    match (flip[*i], flip[*j]) {
                        (Some(fi), None) => {
                            flip[*j] = Some(fi ^ parity);
                            changed = true;
                        }
                        (None, Some(fj)) => {
                            flip[*i] = Some(fj ^ parity);
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    let rank = |f: bool| if f { dim - 1 } else { 1 };
    let pattern: Vec<usize> = (1..=n).map(|l| rank(flip[l].unwrap_or(false))).collect();
    let complement: Vec<usize> = (1..=n).map(|l| rank(!flip[l].unwrap_or(false))).collect();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let half = dim.is_multiple_of(2).then(|| vec![dim / 2; n]);
    for p in [half, Some(pattern), Some(complement), Some(vec![1; n])].into_iter().flatten() {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

struct Problem<'a> {
    target: &'a SupportTarget,
    dim: usize,
    ranks: Vec<usize>,
    offsets: Vec<usize>,
    margin: f64,
}

/// State and orthonormal bases decoded from a parameter vector.
struct Decoded {
    psi: Vec<C64>,
    bases: Vec<Vec<Vec<C64>>>,
}

impl Decoded {
    fn project(&self, label: Label, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        for b in &self.bases[label - 1] {
            let c: C64 = b.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
            for (o, x) in out.iter_mut().zip(b) {
                *o += x * c;
            }
        }
        out
    }

    fn outcome(&self, label: Label, a: Outcome, v: &[C64]) -> Vec<C64> {
        let p = self.project(label, v);
        if a == 1 {
            p
        } else {
            v.iter().zip(&p).map(|(x, y)| x - y).collect()
        }
    }

    /// `Q_{t_k}` of each label applied right to left.
    fn branch(&self, ctx: &[Label], t: &[Outcome]) -> Vec<C64> {
        let mut v = self.psi.clone();
        for (&l, &a) in ctx.iter().zip(t).rev() {
            v = self.outcome(l, a, &v);
        }
        v
    }

    /// `(1 - P_i) P_j B_i`, column by column.
    fn commutator_block(&self, i: Label, j: Label) -> Vec<Vec<C64>> {
        self.bases[i - 1].iter().map(|b| self.outcome(i, 0, &self.project(j, b))).collect()
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn gram_schmidt(cols: &mut [Vec<C64>]) -> bool {
    for k in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(k);
        let v = &mut rest[0];
        for _ in 0..2 {
            for u in done.iter() {
                let c: C64 = u.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= y * c;
                }
            }
        }
        let n = norm_sqr(v).sqrt();
        if n.is_nan() || n <= 1e-8 {
            return false;
        }
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    true
}

impl<'a> Problem<'a> {
    fn new(target: &'a SupportTarget, dim: usize, ranks: Vec<usize>, margin: f64) -> Self {
        let mut offsets = vec![2 * dim];
        for r in &ranks {
            offsets.push(offsets.last().unwrap() + 2 * dim * r);
        }
        Self { target, dim, ranks, offsets, margin }
    }

    fn param_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn complex(&self, x: &[f64], start: usize) -> Vec<C64> {
        (0..self.dim).map(|k| C64::new(x[start + 2 * k], x[start + 2 * k + 1])).collect()
    }

    fn decode(&self, x: &[f64]) -> Option<Decoded> {
        let mut psi = self.complex(x, 0);
        let n = norm_sqr(&psi).sqrt();
        if n.is_nan() || n <= 1e-8 {
            return None;
        }
        psi.iter_mut().for_each(|z| *z /= n);
        let mut bases = Vec::with_capacity(self.ranks.len());
        for (m, &r) in self.ranks.iter().enumerate() {
            let mut cols: Vec<Vec<C64>> = (0..r).map(|c| self.complex(x, self.offsets[m] + 2 * self.dim * c)).collect();
            if !gram_schmidt(&mut cols) {
                return None;
            }
            bases.push(cols);
        }
        Some(Decoded { psi, bases })
    }

    fn encode(&self, d: &Decoded) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.param_count());
        let mut push = |v: &[C64]| v.iter().for_each(|z| x.extend([z.re, z.im]));
        push(&d.psi);
        for b in &d.bases {
            b.iter().for_each(|c| push(c));
        }
        x
    }

    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.decode(x)?;
        let s = self.target.scenario();
        let mut r = Vec::new();
        let mut push = |v: &[C64]| v.iter().for_each(|z| r.extend([z.re, z.im]));
        for (c, t) in &self.target.forbidden {
            push(&d.branch(s.context(*c), t));
        }
        let root2 = std::f64::consts::SQRT_2;
        for ctx in s.contexts() {
            if let [i, j] = ctx.as_slice() {
                for col in d.commutator_block(*i, *j) {
                    let scaled: Vec<C64> = col.iter().map(|z| z * root2).collect();
                    push(&scaled);
                }
            }
        }
        for (c, t) in &self.target.required {
            let amp = norm_sqr(&d.branch(s.context(*c), t)).sqrt();
            r.push((self.margin.sqrt() - amp).max(0.0));
        }
        Some(r)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.residuals(x).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
    }

    fn jacobian(&self, x: &[f64], m: usize) -> Option<DMatrix<f64>> {
        let p = x.len();
        let mut j = DMatrix::zeros(m, p);
        let mut xp = x.to_vec();
        for k in 0..p {
            let h = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let rp = self.residuals(&xp)?;
            xp[k] = x[k] - h;
            let rm = self.residuals(&xp)?;
            xp[k] = x[k];
            for row in 0..m {
                j[(row, k)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        Some(j)
    }

    /// Independent check of a converged point; `None` unless every
    /// constraint holds in the rebuilt behavior.
    fn accept(&self, x: &[f64]) -> Option<QuantumRealization> {
        let d = self.decode(x)?;
        let vec = |v: &[C64]| StateVector::new(v.to_vec()).ok();
        let state = vec(&d.psi)?;
        let projectors = d
            .bases
            .iter()
            .map(|b| Projector::from_basis(b.iter().map(|c| vec(c)).collect::<Option<Vec<_>>>()?).ok())
            .collect::<Option<Vec<_>>>()?;
        let r = QuantumRealization::new(state, projectors).ok()?;
        let s = self.target.scenario();
        for ctx in s.contexts() {
            if let [i, j] = ctx.as_slice() {
                if r.commutator(*i, *j).ok()? > COMMUTATOR_TOL {
                    return None;
                }
            }
        }
        let b = behavior_from_realization(&r, s).ok()?;
        let forbidden_ok = self.target.forbidden.iter().all(|(c, t)| b.prob(*c, t) <= FORBIDDEN_TOL);
        let required_ok = self.target.required.iter().all(|(c, t)| b.prob(*c, t) >= REQUIRED_MARGIN);
        let collapse = b.possibilistic_collapse(crate::scenario::POSSIBILITY_EPS);
        (forbidden_ok && required_ok && self.target.is_satisfied_by(&collapse)).then_some(r)
    }
}

/// Returns the final point and the objective after each accepted step.
fn levenberg_marquardt(problem: &Problem, x0: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut x = match problem.decode(&x0) {
        Some(d) => problem.encode(&d),
        None => return (x0, vec![f64::INFINITY]),
    };
    let mut r = problem.residuals(&x).expect("decodable point");
    let mut f: f64 = r.iter().map(|v| v * v).sum();
    let mut log = vec![f];
    let mut lambda = 1e-3;
    for it in 0..MAX_ITERATIONS {
        if f < CONVERGED {
            break;
        }
        // stalled in a local minimum well above zero
        if it >= 200 && f > 1e-8 && f > 0.999 * log[log.len().saturating_sub(100)] {
            break;
        }
        let Some(jac) = problem.jacobian(&x, r.len()) else { break };
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e12 {
            let mut m = a.clone();
            for k in 0..m.nrows() {
                m[(k, k)] += lambda * (a[(k, k)].max(1e-9));
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let candidate = problem.decode(&trial).map(|d| problem.encode(&d));
            if let Some(xn) = candidate {
                let fnew = problem.objective(&xn);
                if fnew < f {
                    x = xn;
                    r = problem.residuals(&x).expect("decodable point");
                    f = fnew;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
        log.push(f);
    }
    (x, log)
}
