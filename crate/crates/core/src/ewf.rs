//! Unitary simulation of the extended Wigner's-friend schedule.
//!
//! Friend `A_i` records measurement `M_i` in a qubit through the gate
//! `P_i (x) X + (1 - P_i) (x) 1`, so the record reads 1 exactly on the
//! outcome-1 branch. The gate is its own inverse; an undo applies it again.
//!
//! Register layout: system index slowest, then records `A_1..A_n` with `A_1`
//! the most significant bit. Amplitude index = `s * 2^n + bits`, record `i`
//! at bit `n - i`.

use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::json_number;
use crate::linalg::{kron, ComplexMatrix, StateVector, ALGEBRAIC_TOL, C64, PROBABILITY_TOL, ZERO};
use crate::quantum::{verify_compatibility, JointDistribution, PairDistribution, Projector, QuantumRealization};
use crate::scenario::{
    make_cycle_scenario, propagate_chain, Label, Outcome, PossibilisticBehavior, Propagation, Scenario, POSSIBILITY_EPS,
};

pub const CONVENTION: &str = "flip-on-outcome-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateStep {
    Measure(Label),
    Undo(Label),
}

impl GateStep {
    pub fn friend(self) -> Label {
        match self {
            GateStep::Measure(i) | GateStep::Undo(i) => i,
        }
    }

    /// Name of the stage right after this step.
    pub fn stage_name(self) -> String {
        match self {
            GateStep::Measure(i) => format!("after M{i}"),
            GateStep::Undo(i) => format!("after undo {i}"),
        }
    }
}

impl fmt::Display for GateStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateStep::Measure(i) => write!(f, "M{i}"),
            GateStep::Undo(i) => write!(f, "U†{i}"),
        }
    }
}

/// A gate schedule over `n` friends. Stage `k` is the state after `k` steps;
/// stage 0 is `"initial"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    n: usize,
    steps: Vec<GateStep>,
    aliases: Vec<(String, usize)>,
}

impl Protocol {
    /// Every friend measures exactly once; an undo needs a live measurement.
    pub fn new(n: usize, steps: Vec<GateStep>) -> Result<Self> {
        let mut measured = vec![false; n + 1];
        let mut live = vec![false; n + 1];
        for step in &steps {
            let i = step.friend();
            if i == 0 || i > n {
                return Err(Error::UnknownLabel(i));
            }
            match step {
                GateStep::Measure(_) => {
                    if measured[i] {
                        return Err(Error::InvalidProtocol(format!("M{i} appears twice")));
                    }
                    measured[i] = true;
                    live[i] = true;
                }
                GateStep::Undo(_) => {
                    if !live[i] {
                        return Err(Error::InvalidProtocol(format!("undo {i} without a live M{i}")));
                    }
                    live[i] = false;
                }
            }
        }
        if let Some(i) = (1..=n).find(|&i| !measured[i]) {
            return Err(Error::InvalidProtocol(format!("M{i} never appears")));
        }
        Ok(Self { n, steps, aliases: Vec::new() })
    }

    fn with_alias(mut self, name: &str, stage: usize) -> Self {
        self.aliases.push((name.to_string(), stage));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[GateStep] {
        &self.steps
    }

    pub fn stage_names(&self) -> Vec<String> {
        let mut names = vec!["initial".to_string()];
        names.extend(self.steps.iter().map(|s| s.stage_name()));
        names.extend(self.aliases.iter().map(|(a, _)| a.clone()));
        names
    }

    pub fn stage_index(&self, name: &str) -> Result<usize> {
        if name == "initial" {
            return Ok(0);
        }
        if let Some((_, k)) = self.aliases.iter().find(|(a, _)| a == name) {
            return Ok(*k);
        }
        self.steps
            .iter()
            .position(|s| s.stage_name() == name)
            .map(|k| k + 1)
            .ok_or_else(|| Error::UnknownStage(name.to_string()))
    }

    /// Whether record `i` holds its outcome after `stage` steps.
    pub fn is_readable(&self, record: Label, stage: usize) -> bool {
        let mut live = false;
        for step in &self.steps[..stage.min(self.steps.len())] {
            match *step {
                GateStep::Measure(i) if i == record => live = true,
                GateStep::Undo(i) if i == record => live = false,
                _ => {}
            }
        }
        live
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 5 {
        return Err(Error::InvalidCycleSize { n, reason: "the friend schedule needs n >= 5" });
    }
    Ok(())
}

/// The block `M_2, U†_1, M_3, U†_2, ..., M_{n-1}, U†_{n-2}`.
fn interleaved_block(n: usize) -> Vec<GateStep> {
    (1..=n - 2).flat_map(|k| [GateStep::Measure(k + 1), GateStep::Undo(k)]).collect()
}

/// `M_1`, then the interleaved block, then `M_n`: the first `n-2`
/// measurements are undone.
pub fn build_protocol(n: usize) -> Result<Protocol> {
    check_n(n)?;
    let mut steps = vec![GateStep::Measure(1)];
    steps.extend(interleaved_block(n));
    steps.push(GateStep::Measure(n));
    Protocol::new(n, steps)
}

/// `M_1, M_n`, then the interleaved block. `"before U"` names the stage
/// after `M_n`.
pub fn build_counterfactual_protocol(n: usize) -> Result<Protocol> {
    check_n(n)?;
    let mut steps = vec![GateStep::Measure(1), GateStep::Measure(n)];
    steps.extend(interleaved_block(n));
    Ok(Protocol::new(n, steps)?.with_alias("before U", 2))
}

/// Each measurement immediately undone: `M_1, U†_1, ..., M_n, U†_n`.
pub fn build_measure_undo_protocol(n: usize) -> Result<Protocol> {
    if n < 1 {
        return Err(Error::InvalidCycleSize { n, reason: "at least one friend" });
    }
    Protocol::new(n, (1..=n).flat_map(|i| [GateStep::Measure(i), GateStep::Undo(i)]).collect())
}

/// `psi (x) |0...0>` over `records` friend qubits.
pub fn initial_state(r: &QuantumRealization, records: usize) -> StateVector {
    r.state().kron(&StateVector::basis(1 << records, 0))
}

/// Applies the record gate of projector `p` to register bit `bit` (counted
/// from the least significant end) of a state with `records` qubits.
fn apply_record_gate(p: &Projector, records: usize, bit: usize, state: &mut [C64]) {
    let dim = p.dim();
    let width = 1usize << records;
    let mask = 1usize << bit;
    let fiber = |bits: usize, amps: &[C64]| -> StateVector {
        StateVector::new((0..dim).map(|s| amps[s * width + bits]).collect()).expect("finite")
    };
    for bits in (0..width).filter(|b| b & mask == 0) {
        let u = fiber(bits, state);
        let w = fiber(bits | mask, state);
        let (pu, pw) = (p.apply(&u), p.apply(&w));
        for s in 0..dim {
            let (us, ws) = (u.amplitudes()[s], w.amplitudes()[s]);
            let (pus, pws) = (pu.amplitudes()[s], pw.amplitudes()[s]);
            state[s * width + bits] = us - pus + pws;
            state[s * width + (bits | mask)] = ws - pws + pus;
        }
    }
}

/// Dense `U_{M_i}` on system (x) `n` records, built from Kronecker products.
pub fn measurement_unitary(r: &QuantumRealization, i: Label, n: usize) -> Result<ComplexMatrix> {
    if i == 0 || i > n {
        return Err(Error::UnknownLabel(i));
    }
    let p = r.projector(i)?.matrix();
    let complement = ComplexMatrix::identity(r.dim()).try_sub(&p)?;
    let flip = kron(
        &kron(&ComplexMatrix::identity(1 << (i - 1)), &ComplexMatrix::pauli_x()),
        &ComplexMatrix::identity(1 << (n - i)),
    );
    kron(&p, &flip).try_add(&kron(&complement, &ComplexMatrix::identity(1 << n)))
}

/// States after each step of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    protocol: Protocol,
    states: Vec<StateVector>,
}

/// Runs `p` from `psi (x) |0...0>`. The realization must have one projector
/// per friend and commute on every n-cycle context.
pub fn simulate(p: &Protocol, r: &QuantumRealization) -> Result<SimulationTrace> {
    let n = p.n();
    if r.measurements() != n {
        return Err(Error::InvalidRealization(format!("{} projectors for {n} friends", r.measurements())));
    }
    if n >= 3 {
        let report = verify_compatibility(r, &make_cycle_scenario(n)?, ALGEBRAIC_TOL)?;
        if let Some(bad) = report.contexts.iter().find(|c| c.norm > ALGEBRAIC_TOL) {
            return Err(Error::NonCommuting { i: bad.pair.0, j: bad.pair.1, norm: bad.norm });
        }
    }
    let mut states = vec![initial_state(r, n)];
    let mut amps = states[0].amplitudes().to_vec();
    for step in p.steps() {
        let i = step.friend();
        apply_record_gate(r.projector(i)?, n, n - i, &mut amps);
        states.push(StateVector::new(amps.clone())?);
    }
    Ok(SimulationTrace { protocol: p.clone(), states })
}

impl SimulationTrace {
    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, stage: &str) -> Result<&StateVector> {
        Ok(&self.states[self.protocol.stage_index(stage)?])
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trace holds the initial state")
    }

    /// Computational-basis marginal of the listed records at `stage`. Only
    /// records currently holding an outcome can be read.
    pub fn record_distribution(&self, stage: &str, records: &[Label]) -> Result<JointDistribution> {
        let t = self.protocol.stage_index(stage)?;
        let n = self.protocol.n();
        for (k, &i) in records.iter().enumerate() {
            if i == 0 || i > n {
                return Err(Error::UnknownLabel(i));
            }
            if records[..k].contains(&i) {
                return Err(Error::InvalidProtocol(format!("record A{i} listed twice")));
            }
            if !self.protocol.is_readable(i, t) {
                return Err(Error::RecordNotReadable { record: i, stage: stage.to_string() });
            }
        }
        let width = 1usize << n;
        let mut probs = vec![0.0; 1 << records.len()];
        for (idx, z) in self.states[t].amplitudes().iter().enumerate() {
            let bits = idx % width;
            let key = records.iter().fold(0, |acc, &i| acc * 2 + ((bits >> (n - i)) & 1));
            probs[key] += z.norm_sqr();
        }
        JointDistribution::new(records.to_vec(), probs)
    }

    pub fn pair_distribution(&self, stage: &str, i: Label, j: Label) -> Result<PairDistribution> {
        let joint = self.record_distribution(stage, &[i, j])?;
        Ok(PairDistribution::from_joint(&joint).expect("two records"))
    }
}

/// Commutator norm of two gate sequences restricted to `records`, computed
/// column by column on basis states.
fn sequence_commutator(r: &QuantumRealization, records: &[Label], a: &[GateStep], b: &[GateStep]) -> Result<f64> {
    let k = records.len();
    let bit = |i: Label| -> Result<usize> {
        records.iter().position(|&x| x == i).map(|pos| k - 1 - pos).ok_or(Error::UnknownLabel(i))
    };
    let run = |gates: &[GateStep], v: &mut Vec<C64>| -> Result<()> {
        for g in gates {
            apply_record_gate(r.projector(g.friend())?, k, bit(g.friend())?, v);
        }
        Ok(())
    };
    let dim = r.dim() << k;
    let mut total = 0.0;
    for col in 0..dim {
        let mut ab = vec![ZERO; dim];
        ab[col] = C64::new(1.0, 0.0);
        let mut ba = ab.clone();
        run(b, &mut ab)?;
        run(a, &mut ab)?;
        run(a, &mut ba)?;
        run(b, &mut ba)?;
        total += ab.iter().zip(&ba).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Measurement unitaries of a context.
    Context,
    /// An undo against the next measurement of the schedule.
    Undo,
    /// The interleaved block against `U_{M_n}`.
    Block,
    /// Reported for reference; not required to vanish.
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub name: String,
    pub norm: f64,
}

impl Certificate {
    pub fn is_required(&self) -> bool {
        self.kind != CertificateKind::Reference
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub tol: f64,
    pub certificates: Vec<Certificate>,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.first_failure().is_none()
    }

    pub fn first_failure(&self) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.is_required() && (c.norm.is_nan() || c.norm > self.tol))
    }

    pub fn get(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.certificates
                .iter()
                .map(|c| {
                    json!({
                        "pair": c.name,
                        "norm": json_number(c.norm),
                        "required": c.is_required(),
                    })
                })
                .collect(),
        )
    }
}

/// Embedded commutator norms behind the schedule:
///
/// * `Mi,Mj` for every n-cycle context;
/// * `undo k,M(k+1)` for each undo of the schedule, which is what lets the
///   undo pass the next measurement;
/// * `U,Mn` for the interleaved block;
/// * `Mi,Mj` for the other pairs and `undo k,M(k+2)`, for reference.
pub fn commutation_certificates(r: &QuantumRealization, n: usize) -> Result<CertificateReport> {
    check_n(n)?;
    if r.measurements() != n {
        return Err(Error::InvalidRealization(format!("{} projectors for {n} friends", r.measurements())));
    }
    use GateStep::{Measure, Undo};
    let mut certificates = Vec::new();
    let mut push = |kind, name: String, norm| certificates.push(Certificate { kind, name, norm });
    let scenario = make_cycle_scenario(n)?;
    for ctx in scenario.contexts() {
        let (i, j) = (ctx[0], ctx[1]);
        let norm = sequence_commutator(r, &[i, j], &[Measure(i)], &[Measure(j)])?;
        push(CertificateKind::Context, format!("M{i},M{j}"), norm);
    }
    for k in 1..=n - 2 {
        let norm = sequence_commutator(r, &[k, k + 1], &[Undo(k)], &[Measure(k + 1)])?;
        push(CertificateKind::Undo, format!("undo {k},M{}", k + 1), norm);
    }
    let all: Vec<Label> = (1..=n).collect();
    let block = sequence_commutator(r, &all, &interleaved_block(n), &[Measure(n)])?;
    push(CertificateKind::Block, format!("U,M{n}"), block);
    for i in 1..=n {
        for j in i + 1..=n {
            if scenario.context_index(&[i, j]).is_none() {
                let norm = sequence_commutator(r, &[i, j], &[Measure(i)], &[Measure(j)])?;
                push(CertificateKind::Reference, format!("M{i},M{j}"), norm);
            }
        }
    }
    for k in 1..=n - 3 {
        let norm = sequence_commutator(r, &[k, k + 2], &[Undo(k)], &[Measure(k + 2)])?;
        push(CertificateKind::Reference, format!("undo {k},M{}", k + 2), norm);
    }
    Ok(CertificateReport { tol: ALGEBRAIC_TOL, certificates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Commutator norms.
    pub algebraic: f64,
    /// Largest value accepted as a forbidden entry.
    pub probability: f64,
    /// Smallest value accepted as possible.
    pub possibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { algebraic: ALGEBRAIC_TOL, probability: PROBABILITY_TOL, possibility: POSSIBILITY_EPS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCheck {
    pub distribution: PairDistribution,
    pub forbidden: [Outcome; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualCheck {
    pub distribution: PairDistribution,
    pub tuple: [Outcome; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParadoxReport {
    pub n: usize,
    pub tolerances: Tolerances,
    /// Forced assignments read off the observed adjacent-pair supports.
    pub chain: Propagation,
    pub chain_complete: bool,
    pub pairwise: Vec<PairwiseCheck>,
    pub counterfactual: CounterfactualCheck,
    pub certificates: CertificateReport,
    pub verdict: bool,
}

impl ParadoxReport {
    /// `(label, value)` in label order; empty labels were not forced.
    pub fn chain_values(&self) -> Vec<(Label, Option<Outcome>)> {
        (1..=self.n).map(|l| (l, self.chain.value(l))).collect()
    }

    /// The seed followed by each forced value, in the order derived.
    pub fn chain_steps(&self) -> Vec<(Label, Outcome)> {
        let mut steps = self.chain.seeds.clone();
        steps.extend(self.chain.forced());
        steps
    }

    pub fn to_json(&self) -> Value {
        let pairwise: Vec<Value> = self
            .pairwise
            .iter()
            .map(|p| {
                let (i, j) = p.distribution.context();
                json!({"context": [i, j], "forbidden": p.forbidden, "value": json_number(p.value)})
            })
            .collect();
        let chain: Vec<Value> = self.chain_steps().into_iter().map(|(l, v)| json!({"label": l, "value": v})).collect();
        let (i, j) = self.counterfactual.distribution.context();
        json!({
            "n": self.n,
            "convention": CONVENTION,
            "pairwise": pairwise,
            "chain": chain,
            "counterfactual": {
                "context": [i, j],
                "tuple": self.counterfactual.tuple,
                "value": json_number(self.counterfactual.value),
            },
            "certificates": self.certificates.to_json(),
            "verdict": self.verdict,
        })
    }
}

/// Runs both circuits and assembles the argument.
///
/// Adjacent pair `(i, i+1)` is read after `M_{i+1}`, before the undo of `i`.
/// The supports of those reads drive `propagate_chain` from `a_1 = 1`, or
/// from `a_1 = 0` when that leaves the chain incomplete. Each link
/// `a_i = m_i => a_{i+1} = m_{i+1}` rests on the forbidden entry
/// `(m_i, 1 - m_{i+1})`; the chain's conclusion is contradicted when
/// `(m_1, 1 - m_n)` is possible in the counterfactual circuit.
pub fn paradox_report(r: &QuantumRealization, n: usize, tol: Tolerances) -> Result<ParadoxReport> {
    let mut certificates = commutation_certificates(r, n)?;
    certificates.tol = tol.algebraic;
    if let Some(bad) = certificates.first_failure() {
        return Err(Error::CertificateFailure { what: bad.name.clone(), norm: bad.norm });
    }
    let actual = simulate(&build_protocol(n)?, r)?;
    let observed =
        (1..n).map(|i| actual.pair_distribution(&format!("after M{}", i + 1), i, i + 1)).collect::<Result<Vec<_>>>()?;
    let counterfactual = simulate(&build_counterfactual_protocol(n)?, r)?;
    let closing = counterfactual.pair_distribution("before U", 1, n)?;

    let path = Scenario::new(n, (1..n).map(|i| vec![i, i + 1]).collect(), 2)?;
    let supports = observed
        .iter()
        .map(|d| {
            let p = d.probabilities();
            vec![p[0][0], p[0][1], p[1][0], p[1][1]].into_iter().map(|x| x > tol.possibility).collect()
        })
        .collect();
    let pb = PossibilisticBehavior::new(path, supports)?;
    let complete = |p: &Propagation| !p.is_conflict() && (1..=n).all(|l| p.value(l).is_some());
    let first = propagate_chain(&pb, &[(1, 1)])?;
    let chain = if complete(&first) {
        first
    } else {
        let second = propagate_chain(&pb, &[(1, 0)])?;
        if complete(&second) {
            second
        } else {
            first
        }
    };
    let chain_complete = complete(&chain);
    let m = |l: Label| chain.value(l).unwrap_or(0);

    let pairwise: Vec<PairwiseCheck> = observed
        .into_iter()
        .enumerate()
        .map(|(k, d)| {
            let i = k + 1;
            let forbidden = [m(i), 1 - m(i + 1)];
            let value = d.prob(forbidden[0], forbidden[1]);
            PairwiseCheck { distribution: d, forbidden, value }
        })
        .collect();
    let tuple = [m(1), 1 - m(n)];
    let value = closing.prob(tuple[0], tuple[1]);
    let counterfactual = CounterfactualCheck { distribution: closing, tuple, value };
    let verdict = chain_complete
        && pairwise.iter().all(|p| p.value <= tol.probability)
        && counterfactual.value >= tol.possibility;
    Ok(ParadoxReport { n, tolerances: tol, chain, chain_complete, pairwise, counterfactual, certificates, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_unitary;
    use crate::quantum::{born_pair, born_single, kcbs_realization};
    use GateStep::{Measure as M, Undo as U};

    #[test]
    fn schedules() {
        let p = build_protocol(5).unwrap();
        assert_eq!(p.steps(), &[M(1), M(2), U(1), M(3), U(2), M(4), U(3), M(5)]);
        let p6 = build_protocol(6).unwrap();
        assert_eq!(p6.steps().len(), 10);
        let undone: Vec<Label> = p6
            .steps()
            .iter()
            .filter_map(|s| match s {
                U(i) => Some(*i),
                _ => None,
            })
            .collect();
        assert_eq!(undone, vec![1, 2, 3, 4]);
        let c = build_counterfactual_protocol(5).unwrap();
        assert_eq!(c.steps(), &[M(1), M(5), M(2), U(1), M(3), U(2), M(4), U(3)]);
        assert_eq!(c.stage_index("before U").unwrap(), c.stage_index("after M5").unwrap());
        let mu = build_measure_undo_protocol(5).unwrap();
        assert_eq!(mu.steps().len(), 10);
        assert_eq!(mu.steps()[..4], [M(1), U(1), M(2), U(2)]);
        assert!(build_protocol(4).is_err());
        assert!(build_counterfactual_protocol(3).is_err());
        assert!(build_measure_undo_protocol(0).is_err());
    }

    #[test]
    fn protocol_well_formedness() {
        assert!(Protocol::new(2, vec![M(1), U(1), U(1), M(2)]).is_err());
        assert!(Protocol::new(2, vec![U(1), M(1), M(2)]).is_err());
        assert!(Protocol::new(2, vec![M(1), M(1), M(2)]).is_err());
        assert!(Protocol::new(2, vec![M(1)]).is_err());
        assert!(Protocol::new(2, vec![M(1), M(3)]).is_err());
        assert!(Protocol::new(2, vec![M(2), M(1), U(2)]).is_ok());
    }

    #[test]
    fn stage_lookup_and_readability() {
        let p = build_protocol(5).unwrap();
        assert_eq!(p.stage_index("initial").unwrap(), 0);
        assert_eq!(p.stage_index("after M2").unwrap(), 2);
        assert_eq!(p.stage_index("after undo 1").unwrap(), 3);
        assert!(matches!(p.stage_index("after M9"), Err(Error::UnknownStage(_))));
        assert!(p.is_readable(1, 2));
        assert!(!p.is_readable(1, 3));
        assert!(!p.is_readable(5, 7));
        assert!(p.is_readable(5, 8));
        assert!(p.stage_names().contains(&"after undo 3".to_string()));
    }

    #[test]
    fn dense_unitary_matches_structural_gate() {
        let r = kcbs_realization();
        let u1 = measurement_unitary(&r, 1, 5).unwrap();
        assert_eq!(u1.shape(), (96, 96));
        assert!(is_unitary(&u1, 1e-12).unwrap());
        let prod = u1.matmul(&u1.adjoint()).unwrap();
        assert!(prod.try_sub(&ComplexMatrix::identity(96)).unwrap().frobenius_norm() <= 1e-12);
        let psi = initial_state(&r, 5);
        let dense = u1.apply(&psi).unwrap();
        let trace = simulate(&build_protocol(5).unwrap(), &r).unwrap();
        assert!(dense.sub(trace.state("after M1").unwrap()).norm() <= 1e-14);
        let u2 = measurement_unitary(&r, 2, 5).unwrap();
        assert!(crate::linalg::commutator_norm(&u1, &u2).unwrap() <= 1e-12);
        assert!(measurement_unitary(&r, 6, 5).is_err());
        assert!(measurement_unitary(&r, 0, 5).is_err());
    }

    #[test]
    fn kcbs_records() {
        let r = kcbs_realization();
        let t = simulate(&build_protocol(5).unwrap(), &r).unwrap();
        for s in t.states() {
            assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
        }
        let a1 = t.record_distribution("after M1", &[1]).unwrap();
        assert!((a1.prob(&[1]) - 1.0 / 9.0).abs() <= 1e-12);
        assert!((a1.prob(&[0]) - 8.0 / 9.0).abs() <= 1e-12);
        assert!(t.pair_distribution("after M2", 1, 2).unwrap().prob(1, 1) <= 1e-12);
        assert!(t.pair_distribution("after M3", 2, 3).unwrap().prob(0, 0) <= 1e-12);
        assert!(t.pair_distribution("after M4", 3, 4).unwrap().prob(1, 1) <= 1e-12);
        assert!(t.pair_distribution("after M5", 4, 5).unwrap().prob(0, 0) <= 1e-12);
    }

    #[test]
    fn undone_records_are_not_readable() {
        let r = kcbs_realization();
        let t = simulate(&build_protocol(5).unwrap(), &r).unwrap();
        assert!(matches!(t.record_distribution("after undo 1", &[1]), Err(Error::RecordNotReadable { record: 1, .. })));
        assert!(t.record_distribution("after M5", &[1, 5]).is_err());
        assert!(t.record_distribution("initial", &[1]).is_err());
        assert!(t.record_distribution("after M2", &[1, 1]).is_err());
        assert!(matches!(t.record_distribution("nowhere", &[1]), Err(Error::UnknownStage(_))));
    }

    #[test]
    fn undo_restores_the_ready_record() {
        // read through the raw state, since the public read refuses it
        let r = kcbs_realization();
        let t = simulate(&build_protocol(5).unwrap(), &r).unwrap();
        let s = t.state("after undo 1").unwrap();
        let set: f64 = s
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx % 32) >> 4 & 1 == 1)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        assert!(set <= 1e-12);
    }

    #[test]
    fn records_match_born_pairs() {
        let r = kcbs_realization();
        let t = simulate(&build_protocol(5).unwrap(), &r).unwrap();
        for i in 1..5 {
            let rec = t.pair_distribution(&format!("after M{}", i + 1), i, i + 1).unwrap();
            let born = born_pair(&r, i, i + 1).unwrap();
            assert!(rec.max_abs_diff(&born) <= 1e-10, "pair {i}");
        }
        let cf = simulate(&build_counterfactual_protocol(5).unwrap(), &r).unwrap();
        let rec = cf.pair_distribution("before U", 1, 5).unwrap();
        assert!(rec.max_abs_diff(&born_pair(&r, 1, 5).unwrap()) <= 1e-10);
        assert!((rec.prob(1, 0) - 1.0 / 9.0).abs() <= 1e-10);
    }

    #[test]
    fn measure_undo_round_trip() {
        let r = kcbs_realization();
        let t = simulate(&build_measure_undo_protocol(5).unwrap(), &r).unwrap();
        assert!((t.final_state().fidelity(&initial_state(&r, 5)) - 1.0).abs() <= 1e-10);
        for i in 1..=5 {
            let d = t.record_distribution(&format!("after M{i}"), &[i]).unwrap();
            assert!((d.prob(&[1]) - born_single(&r, i).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn kcbs_certificates() {
        let r = kcbs_realization();
        let rep = commutation_certificates(&r, 5).unwrap();
        assert!(rep.pass());
        for name in ["M1,M2", "M2,M3", "M3,M4", "M4,M5", "M1,M5", "U,M5"] {
            assert!(rep.get(name).unwrap().norm <= 1e-12, "{name}");
        }
        assert!(rep.get("M1,M3").unwrap().norm > 0.1);
        // an undo does not commute with the measurement two steps later
        assert!(rep.get("undo 1,M3").unwrap().norm > 0.1);
        assert!(!rep.get("undo 1,M3").unwrap().is_required());
    }

    #[test]
    fn kcbs_paradox() {
        let r = kcbs_realization();
        let rep = paradox_report(&r, 5, Tolerances::default()).unwrap();
        assert!(rep.verdict);
        assert!(rep.chain_complete);
        let chain: Vec<Option<Outcome>> = rep.chain_values().into_iter().map(|(_, v)| v).collect();
        assert_eq!(chain, vec![Some(1), Some(0), Some(1), Some(0), Some(1)]);
        let forbidden: Vec<[Outcome; 2]> = rep.pairwise.iter().map(|p| p.forbidden).collect();
        assert_eq!(forbidden, vec![[1, 1], [0, 0], [1, 1], [0, 0]]);
        assert_eq!(rep.counterfactual.tuple, [1, 0]);
        assert!((rep.counterfactual.value - 1.0 / 9.0).abs() <= 1e-10);
        let v = rep.to_json();
        assert_eq!(v["convention"], CONVENTION);
        assert_eq!(v["pairwise"].as_array().unwrap().len(), 4);
        assert_eq!(v["verdict"], true);
    }

    #[test]
    fn state_v4_breaks_the_argument() {
        let r = kcbs_realization();
        let v4 = r.projector(4).unwrap().vector().unwrap().clone();
        let rep = paradox_report(&r.with_state(v4).unwrap(), 5, Tolerances::default()).unwrap();
        assert!(!rep.verdict);
        assert!(rep.counterfactual.value <= 1e-12);
    }

    #[test]
    fn faulty_vector_fails_certification() {
        let r = kcbs_realization();
        let a = (1.0f64 / 3.0).sqrt();
        let bad = StateVector::from_real(&[a, a, a]).unwrap();
        let r = r.with_projector(1, Projector::rank_one(bad).unwrap()).unwrap();
        assert!(!commutation_certificates(&r, 5).unwrap().pass());
        assert!(matches!(paradox_report(&r, 5, Tolerances::default()), Err(Error::CertificateFailure { .. })));
        assert!(simulate(&build_protocol(5).unwrap(), &r).is_err());
    }
}
