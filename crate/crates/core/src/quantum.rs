//! Projective quantum realizations of binary-outcome scenarios.
//!
//! A realization is a pure state and, for every measurement, the projector
//! onto its outcome-1 subspace. Joint statistics of a compatible pair come
//! from the spectral projectors of the commuting pair acting on the state;
//! no state-update rule is involved.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::format::json_number;
use crate::linalg::{commutator_norm, ComplexMatrix, StateVector, ALGEBRAIC_TOL, C64, ONE, ZERO};
use crate::scenario::{Behavior, Label, Outcome, Scenario};

/// Orthogonal projector given by an orthonormal basis of its range.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    dim: usize,
    basis: Vec<StateVector>,
}

impl Projector {
    pub fn rank_one(v: StateVector) -> Result<Self> {
        Self::from_basis(vec![v])
    }

    /// Basis vectors must be orthonormal within `ALGEBRAIC_TOL`.
    pub fn from_basis(basis: Vec<StateVector>) -> Result<Self> {
        let dim = match basis.first() {
            Some(v) => v.dim(),
            None => return Err(Error::InvalidRealization("projector needs rank >= 1".into())),
        };
        if basis.len() > dim || basis.iter().any(|v| v.dim() != dim) {
            return Err(Error::InvalidRealization("projector basis has inconsistent dimensions".into()));
        }
        for (a, u) in basis.iter().enumerate() {
            if !u.is_normalized(ALGEBRAIC_TOL) {
                return Err(Error::NotNormalized(u.norm_sqr()));
            }
            for w in &basis[a + 1..] {
                if u.inner(w).norm() > ALGEBRAIC_TOL {
                    return Err(Error::InvalidRealization("projector basis is not orthogonal".into()));
                }
            }
        }
        Ok(Self { dim, basis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    /// The defining vector of a rank-1 projector.
    pub fn vector(&self) -> Option<&StateVector> {
        match self.basis.as_slice() {
            [v] => Some(v),
            _ => None,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = vec![ZERO; self.dim];
        for b in &self.basis {
            let c = b.inner(psi);
            for (o, x) in out.iter_mut().zip(b.amplitudes()) {
                *o += x * c;
            }
        }
        StateVector::new(out).expect("finite input gives finite output")
    }

    /// `(1 - P) psi`.
    pub fn apply_complement(&self, psi: &StateVector) -> StateVector {
        psi.sub(&self.apply(psi))
    }

    /// The projector for outcome `a` of the binary measurement.
    pub fn apply_outcome(&self, a: Outcome, psi: &StateVector) -> StateVector {
        if a == 1 {
            self.apply(psi)
        } else {
            self.apply_complement(psi)
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::outer_sum(&self.basis, self.dim)
    }
}

/// A state and one outcome-1 projector per measurement label `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRealization {
    dim: usize,
    state: StateVector,
    projectors: Vec<Projector>,
}

impl QuantumRealization {
    pub fn new(state: StateVector, projectors: Vec<Projector>) -> Result<Self> {
        let dim = state.dim();
        if dim == 0 {
            return Err(Error::InvalidRealization("zero-dimensional state".into()));
        }
        if !state.is_normalized(ALGEBRAIC_TOL) {
            return Err(Error::NotNormalized(state.norm_sqr()));
        }
        if let Some(p) = projectors.iter().find(|p| p.dim() != dim) {
            return Err(Error::InvalidRealization(format!(
                "projector of dimension {} for a state of dimension {dim}",
                p.dim()
            )));
        }
        Ok(Self { dim, state, projectors })
    }

    /// All projectors rank 1.
    pub fn from_vectors(state: StateVector, vectors: Vec<StateVector>) -> Result<Self> {
        let projectors = vectors.into_iter().map(Projector::rank_one).collect::<Result<_>>()?;
        Self::new(state, projectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn measurements(&self) -> usize {
        self.projectors.len()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn projector(&self, label: Label) -> Result<&Projector> {
        label.checked_sub(1).and_then(|k| self.projectors.get(k)).ok_or(Error::UnknownLabel(label))
    }

    pub fn with_state(&self, state: StateVector) -> Result<Self> {
        Self::new(state, self.projectors.clone())
    }

    pub fn with_projector(&self, label: Label, p: Projector) -> Result<Self> {
        self.projector(label)?;
        let mut projectors = self.projectors.clone();
        projectors[label - 1] = p;
        Self::new(self.state.clone(), projectors)
    }

    pub fn commutator(&self, i: Label, j: Label) -> Result<f64> {
        commutator_norm(&self.projector(i)?.matrix(), &self.projector(j)?.matrix())
    }

    /// Rank-1 projectors go under `vectors`; higher ranks under `subspaces`.
    pub fn to_json(&self) -> Value {
        let mut vectors = Map::new();
        let mut subspaces = Map::new();
        for (k, p) in self.projectors.iter().enumerate() {
            match p.vector() {
                Some(v) => {
                    vectors.insert((k + 1).to_string(), complex_json(v));
                }
                None => {
                    let basis = p.basis().iter().map(complex_json).collect();
                    subspaces.insert((k + 1).to_string(), Value::Array(basis));
                }
            }
        }
        let mut out = Map::new();
        out.insert("dim".into(), json!(self.dim));
        out.insert("state".into(), complex_json(&self.state));
        out.insert("vectors".into(), Value::Object(vectors));
        if !subspaces.is_empty() {
            out.insert("subspaces".into(), Value::Object(subspaces));
        }
        Value::Object(out)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = v["dim"].as_u64().ok_or_else(|| Error::Json("missing dim".into()))? as usize;
        let state = parse_complex(&v["state"])?;
        if state.dim() != dim {
            return Err(Error::Json(format!("state has {} entries, dim is {dim}", state.dim())));
        }
        let mut slots: Vec<Option<Projector>> = Vec::new();
        let mut put = |key: &str, p: Projector| -> Result<()> {
            let label: Label = key.parse().map_err(|_| Error::Json(format!("bad label {key:?}")))?;
            if label == 0 {
                return Err(Error::UnknownLabel(0));
            }
            if slots.len() < label {
                slots.resize(label, None);
            }
            if slots[label - 1].replace(p).is_some() {
                return Err(Error::Json(format!("label {label} given twice")));
            }
            Ok(())
        };
        if let Some(vs) = v["vectors"].as_object() {
            for (key, entry) in vs {
                put(key, Projector::rank_one(parse_complex(entry)?)?)?;
            }
        } else {
            return Err(Error::Json("missing vectors".into()));
        }
        if let Some(ss) = v.get("subspaces").and_then(Value::as_object) {
            for (key, entry) in ss {
                let basis = entry
                    .as_array()
                    .ok_or_else(|| Error::Json("subspace is not a list".into()))?
                    .iter()
                    .map(parse_complex)
                    .collect::<Result<Vec<_>>>()?;
                put(key, Projector::from_basis(basis)?)?;
            }
        }
        let projectors = slots
            .into_iter()
            .enumerate()
            .map(|(k, p)| p.ok_or(Error::Json(format!("no projector for label {}", k + 1))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(state, projectors)
    }
}

fn complex_json(v: &StateVector) -> Value {
    Value::Array(v.amplitudes().iter().map(|z| Value::Array(vec![json_number(z.re), json_number(z.im)])).collect())
}

fn parse_complex(v: &Value) -> Result<StateVector> {
    let entries = v.as_array().ok_or_else(|| Error::Json("expected a list of [re, im]".into()))?;
    let amps = entries
        .iter()
        .map(|e| match e.as_array().map(Vec::as_slice) {
            Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                (Some(re), Some(im)) => Ok(C64::new(re, im)),
                _ => Err(Error::Json("complex entry is not numeric".into())),
            },
            _ => Err(Error::Json("complex entry must be [re, im]".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    StateVector::new(amps)
}

/// The qutrit realization of the five-cycle: state `(1,1,1)/sqrt3` and five
/// vectors with each adjacent pair orthogonal.
pub fn kcbs_realization() -> QuantumRealization {
    let a = (1.0f64 / 3.0).sqrt();
    let b = 0.5f64.sqrt();
    let vectors = [[a, -a, a], [b, b, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, b, b]]
        .iter()
        .map(|xs| StateVector::from_real(xs).expect("finite"))
        .collect();
    let state = StateVector::from_real(&[a, a, a]).expect("finite");
    QuantumRealization::from_vectors(state, vectors).expect("valid construction")
}

/// Joint distribution of a set of binary measurements, indexed
/// lexicographically with the first label most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    labels: Vec<Label>,
    probs: Vec<f64>,
}

impl JointDistribution {
    /// Entries within `1e-15` below zero are clamped; the total must be 1
    /// within `ALGEBRAIC_TOL`.
    pub fn new(labels: Vec<Label>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << labels.len() {
            return Err(Error::InvalidBehavior(format!("{} entries for {} binary labels", probs.len(), labels.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-15) {
            return Err(Error::InvalidBehavior("negative or non-finite probability".into()));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidBehavior(format!("distribution sums to {total}")));
        }
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outcomes: &[Outcome]) -> f64 {
        assert_eq!(outcomes.len(), self.labels.len(), "one outcome per label");
        self.probs[outcomes.iter().fold(0, |acc, &o| acc * 2 + o as usize)]
    }

    pub fn outcomes_at(&self, idx: usize) -> Vec<Outcome> {
        let k = self.labels.len();
        (0..k).map(|b| ((idx >> (k - 1 - b)) & 1) as Outcome).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.labels == other.labels)
            .then(|| self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// `p(a_i, a_j)` for an ordered pair of measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    context: (Label, Label),
    probs: [[f64; 2]; 2],
}

impl PairDistribution {
    pub fn new(context: (Label, Label), probs: [[f64; 2]; 2]) -> Result<Self> {
        let joint = JointDistribution::new(
            vec![context.0, context.1],
            vec![probs[0][0], probs[0][1], probs[1][0], probs[1][1]],
        )?;
        Ok(Self::from_joint(&joint).expect("two labels"))
    }

    pub fn from_joint(j: &JointDistribution) -> Option<Self> {
        match (j.labels(), j.probabilities()) {
            ([a, b], [p00, p01, p10, p11]) => Some(Self { context: (*a, *b), probs: [[*p00, *p01], [*p10, *p11]] }),
            _ => None,
        }
    }

    pub fn context(&self) -> (Label, Label) {
        self.context
    }

    pub fn prob(&self, ai: Outcome, aj: Outcome) -> f64 {
        self.probs[ai as usize][aj as usize]
    }

    pub fn probabilities(&self) -> [[f64; 2]; 2] {
        self.probs
    }

    /// The same distribution with the pair order swapped.
    pub fn swapped(&self) -> Self {
        let p = self.probs;
        Self { context: (self.context.1, self.context.0), probs: [[p[0][0], p[1][0]], [p[0][1], p[1][1]]] }
    }

    pub fn marginal_first(&self, a: Outcome) -> f64 {
        self.probs[a as usize].iter().sum()
    }

    pub fn marginal_second(&self, a: Outcome) -> f64 {
        self.probs[0][a as usize] + self.probs[1][a as usize]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let (a, b) = (self.probs, other.probs);
        (0..4).map(|k| (a[k / 2][k % 2] - b[k / 2][k % 2]).abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for a in 0..2u8 {
            for b in 0..2u8 {
                m.insert(format!("{a},{b}"), json_number(self.prob(a, b)));
            }
        }
        json!({"context": [self.context.0, self.context.1], "probabilities": m})
    }
}

fn ensure_commuting(r: &QuantumRealization, i: Label, j: Label) -> Result<()> {
    let norm = r.commutator(i, j)?;
    if norm > ALGEBRAIC_TOL {
        return Err(Error::NonCommuting { i, j, norm });
    }
    Ok(())
}

/// Born statistics of a commuting pair from its four joint spectral
/// projectors.
pub fn born_pair(r: &QuantumRealization, i: Label, j: Label) -> Result<PairDistribution> {
    if i == j {
        return Err(Error::InvalidRealization(format!("pair ({i},{i}) repeats a label")));
    }
    ensure_commuting(r, i, j)?;
    let (pi, pj) = (r.projector(i)?, r.projector(j)?);
    let psi = r.state();
    let x1 = pj.apply(psi);
    let x11 = pi.apply(&x1);
    let xi = pi.apply(psi);
    let x10 = xi.sub(&x11);
    let x01 = x1.sub(&x11);
    let x00 = psi.sub(&xi).sub(&x1).sub(&x11.scaled(-ONE));
    PairDistribution::new((i, j), [[x00.norm_sqr(), x01.norm_sqr()], [x10.norm_sqr(), x11.norm_sqr()]])
}

/// `p(a_i = 1)`.
pub fn born_single(r: &QuantumRealization, i: Label) -> Result<f64> {
    Ok(r.projector(i)?.apply(r.state()).norm_sqr())
}

fn check_scenario(r: &QuantumRealization, s: &Scenario) -> Result<()> {
    if s.measurements() != r.measurements() {
        return Err(Error::InvalidRealization(format!(
            "{} projectors for {} measurements",
            r.measurements(),
            s.measurements()
        )));
    }
    if s.outcomes() != 2 {
        return Err(Error::InvalidScenario("projective realizations need binary outcomes".into()));
    }
    Ok(())
}

/// Context tables from `born_pair` (pairs) or a single Born probability.
pub fn behavior_from_realization(r: &QuantumRealization, s: &Scenario) -> Result<Behavior> {
    check_scenario(r, s)?;
    let tables = s
        .contexts()
        .iter()
        .map(|ctx| match ctx.as_slice() {
            [i] => {
                let p = born_single(r, *i)?.clamp(0.0, 1.0);
                Ok(vec![1.0 - p, p])
            }
            [i, j] => {
                let d = born_pair(r, *i, *j)?;
                Ok(vec![d.prob(0, 0), d.prob(0, 1), d.prob(1, 0), d.prob(1, 1)])
            }
            _ => Err(Error::InvalidScenario("realized contexts must have one or two labels".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Behavior::new(s.clone(), tables)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairNorm {
    pub pair: (Label, Label),
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub tol: f64,
    /// Every pair inside a context, in scenario order.
    pub contexts: Vec<PairNorm>,
    /// Every remaining pair of measurements.
    pub others: Vec<PairNorm>,
}

impl CompatibilityReport {
    pub fn pass(&self) -> bool {
        self.contexts.iter().all(|p| p.norm <= self.tol)
    }

    pub fn max_context_norm(&self) -> f64 {
        self.contexts.iter().map(|p| p.norm).fold(0.0, f64::max)
    }
}

pub fn verify_compatibility(r: &QuantumRealization, s: &Scenario, tol: f64) -> Result<CompatibilityReport> {
    check_scenario(r, s)?;
    let n = s.measurements();
    let mut in_context = vec![vec![false; n + 1]; n + 1];
    let mut contexts = Vec::new();
    for ctx in s.contexts() {
        for (a, &i) in ctx.iter().enumerate() {
            for &j in &ctx[a + 1..] {
                if !in_context[i][j] {
                    in_context[i][j] = true;
                    contexts.push(PairNorm { pair: (i, j), norm: r.commutator(i, j)? });
                }
            }
        }
    }
    let mut others = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if !in_context[i][j] {
                others.push(PairNorm { pair: (i, j), norm: r.commutator(i, j)? });
            }
        }
    }
    Ok(CompatibilityReport { tol, contexts, others })
}
