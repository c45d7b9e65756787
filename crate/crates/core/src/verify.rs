//! The end-to-end verification suite run by `cyclectx verify-all`.
//!
//! Every criterion reports deterministic details only, so the serialized
//! report is byte-stable for a fixed configuration.

use serde_json::{json, Value};

use crate::error::Result;
use crate::ewf::{
    build_counterfactual_protocol, build_measure_undo_protocol, build_protocol, commutation_certificates,
    initial_state, simulate, CertificateKind,
};
use crate::format::sig17;
use crate::ncycle::{
    even_ncycle_behavior, even_to_unified_mask, odd_ncycle_behavior, odd_to_unified_mask, relabel,
    unified_ncycle_behavior, CycleBehavior,
};
use crate::oracles::{exhaustive_support_check, projection_sequential};
use crate::quantum::{behavior_from_realization, born_pair, born_single, kcbs_realization, QuantumRealization};
use crate::scenario::{is_logically_contextual, make_cycle_scenario, propagate_chain, Label, POSSIBILITY_EPS};
use crate::search::{find_quantum_realization, SearchOutcome, SupportTarget, DEFAULT_RESTARTS};

pub const MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Upper end of every n-sweep.
    pub n_max: usize,
    pub seed: u64,
    pub budget: usize,
    /// Realization used for the five-cycle criteria.
    pub realization: QuantumRealization,
}

impl VerifyConfig {
    pub fn new(n_max: usize, seed: u64) -> Self {
        Self { n_max, seed, budget: DEFAULT_RESTARTS, realization: kcbs_realization() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
    /// Parts that could not run, with the reason.
    pub skipped: Vec<String>,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, pass: true, details: Vec::new(), skipped: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        let mark = if ok { "ok" } else { "FAIL" };
        self.details.push(format!("{mark}: {detail}"));
    }

    fn fail(&mut self, detail: String) {
        self.check(false, detail);
    }

    /// Runs `f`, failing the criterion with the error text if it errors.
    fn guard(&mut self, what: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.fail(format!("{what}: {e}"));
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "title": self.title,
            "pass": self.pass,
            "details": self.details,
            "skipped": self.skipped,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub n_max: usize,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| !c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n_max": self.n_max,
            "seed": self.seed,
            "pass": self.pass(),
            "criteria": self.criteria.iter().map(CriterionResult::to_json).collect::<Vec<_>>(),
        })
    }
}

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol
}

/// Criterion 1: the five-cycle zeros and the closing `1/9`.
pub fn kcbs_behavior(r: &QuantumRealization) -> CriterionResult {
    let mut c = CriterionResult::new(1, "five-cycle behavior of the realization");
    c.guard("behavior", |c| {
        let s = make_cycle_scenario(5)?;
        let b = behavior_from_realization(r, &s)?;
        for (ctx, t) in [([1, 2], [1, 1]), ([2, 3], [0, 0]), ([3, 4], [1, 1]), ([4, 5], [0, 0])] {
            let p = b.prob(s.context_index(&ctx).expect("cycle context"), &t);
            c.check(p <= 1e-12, format!("p({},{}|{},{}) = {}", t[0], t[1], ctx[0], ctx[1], sig17(p)));
        }
        // p(a5=0, a1=1), keyed (1,5) as (1,0)
        let p = b.prob(s.context_index(&[1, 5]).expect("closing context"), &[1, 0]);
        c.check(close(p, 1.0 / 9.0, 1e-10), format!("p(0,1|5,1) = {}", sig17(p)));
        Ok(())
    });
    c
}

fn behaviors_in_range(n_max: usize) -> Vec<CycleBehavior> {
    let mut out = Vec::new();
    for n in [5, 7, 9, 11].into_iter().filter(|&n| n <= n_max) {
        out.push(odd_ncycle_behavior(n).expect("odd n >= 5"));
    }
    for n in [4, 6, 8, 10].into_iter().filter(|&n| n <= n_max) {
        out.push(even_ncycle_behavior(n).expect("even n >= 4"));
    }
    for n in 4..=n_max.min(MAX_N) {
        out.push(unified_ncycle_behavior(n).expect("n >= 4"));
    }
    out
}

/// Criterion 2: logical contextuality, confirmed by a propagation conflict
/// from the required tuple.
pub fn contextuality(n_max: usize) -> CriterionResult {
    let mut c = CriterionResult::new(2, "contextuality verdicts with witnesses");
    for b in behaviors_in_range(n_max) {
        let tag = format!("{} n={}", b.kind(), b.n());
        c.guard(&tag, |c| {
            let verdict = is_logically_contextual(b.support())?;
            let req = &b.required()[0];
            let witnessed = verdict.contextual && verdict.is_witness(&req.context, &req.tuple);
            let seeds: Vec<(Label, u8)> = req.context.iter().copied().zip(req.tuple.iter().copied()).collect();
            let conflict = propagate_chain(b.support(), &seeds)?.is_conflict();
            c.check(
                witnessed && conflict,
                format!(
                    "{tag}: contextual={} witness {:?}{:?} conflict={conflict}",
                    verdict.contextual, req.context, req.tuple
                ),
            );
            Ok(())
        });
    }
    c
}

/// Criterion 3: odd and even families relabel onto the unified family.
pub fn relabeling(n_max: usize) -> CriterionResult {
    let mut c = CriterionResult::new(3, "relabeling onto the unified family");
    for b in behaviors_in_range(n_max).into_iter().filter(|b| b.kind() != crate::ncycle::CycleKind::Unified) {
        let tag = format!("{} n={}", b.kind(), b.n());
        c.guard(&tag, |c| {
            let n = b.n();
            let mask = if n % 2 == 1 { odd_to_unified_mask(n)? } else { even_to_unified_mask(n)? };
            let unified = unified_ncycle_behavior(n)?;
            let same_support = &relabel(b.support(), &mask)? == unified.support();
            let same_constraints = b.relabel(&mask)?.same_constraints(&unified);
            c.check(
                same_support && same_constraints,
                format!("{tag} -> unified via flips {:?}", mask.flipped_labels()),
            );
            Ok(())
        });
    }
    c
}

/// Criterion 4: embedded commutators behind the five-friend schedule.
pub fn certificates(r: &QuantumRealization) -> CriterionResult {
    let mut c = CriterionResult::new(4, "commutation certificates");
    c.guard("certificates", |c| {
        let rep = commutation_certificates(r, 5)?;
        for cert in
            rep.certificates.iter().filter(|x| matches!(x.kind, CertificateKind::Context | CertificateKind::Block))
        {
            c.check(cert.norm <= 1e-12, format!("[{}] = {}", cert.name, sig17(cert.norm)));
        }
        let m13 = rep.get("M1,M3").map_or(f64::NAN, |x| x.norm);
        c.check(m13 > 0.1, format!("[M1,M3] = {} (non-context)", sig17(m13)));
        Ok(())
    });
    c
}

fn circuit_forbidden(c: &mut CriterionResult, r: &QuantumRealization, b: &CycleBehavior) -> Result<()> {
    let n = b.n();
    let trace = simulate(&build_protocol(n)?, r)?;
    for e in b.forbidden() {
        let (i, j) = (e.context[0], e.context[1]);
        let d = trace.pair_distribution(&format!("after M{j}"), i, j)?;
        let p = d.prob(e.tuple[0], e.tuple[1]);
        c.check(p <= 1e-10, format!("n={n} p({},{}|{i},{j}) after M{j} = {}", e.tuple[0], e.tuple[1], sig17(p)));
    }
    Ok(())
}

/// Criterion 5: forbidden entries read from the friends' records.
pub fn ewf_simulation(cfg: &VerifyConfig) -> CriterionResult {
    let mut c = CriterionResult::new(5, "friend records at their readout stages");
    c.guard("n=5", |c| circuit_forbidden(c, &cfg.realization, &odd_ncycle_behavior(5)?));
    for n in (6..=8).filter(|&n| n <= cfg.n_max) {
        c.guard(&format!("n={n}"), |c| {
            let b = unified_ncycle_behavior(n)?;
            let dim = if n % 2 == 1 { 3 } else { 4 };
            match find_quantum_realization(&SupportTarget::from_cycle(&b), dim, cfg.seed, cfg.budget)? {
                SearchOutcome::Found(f) => circuit_forbidden(c, &f.realization, &b),
                SearchOutcome::Failed(f) => {
                    c.skipped.push(format!(
                        "n={n}: no realization in dim {dim} (best objective {})",
                        sig17(f.best_objective)
                    ));
                    Ok(())
                }
            }
        });
    }
    c
}

/// Criterion 6: the closing pair through the reordered circuit.
pub fn counterfactual(r: &QuantumRealization) -> CriterionResult {
    let mut c = CriterionResult::new(6, "counterfactual circuit");
    c.guard("counterfactual", |c| {
        let trace = simulate(&build_counterfactual_protocol(5)?, r)?;
        let d = trace.pair_distribution("before U", 1, 5)?;
        let p = d.prob(1, 0);
        c.check(close(p, 1.0 / 9.0, 1e-10), format!("p(a1=1,a5=0) = {}", sig17(p)));
        let born = born_pair(r, 1, 5)?;
        c.check(d.max_abs_diff(&born) <= 1e-10, format!("vs joint Born: {}", sig17(d.max_abs_diff(&born))));
        let seq = projection_sequential(r, &[1, 5])?;
        let diff = (p - seq.prob(&[1, 0])).abs();
        c.check(diff <= 1e-12, format!("vs sequential projection: {}", sig17(diff)));
        Ok(())
    });
    c
}

/// Criterion 7: measuring and immediately undoing restores the start.
pub fn measure_undo(r: &QuantumRealization) -> CriterionResult {
    let mut c = CriterionResult::new(7, "measure-undo protocol");
    c.guard("measure-undo", |c| {
        let trace = simulate(&build_measure_undo_protocol(5)?, r)?;
        let f = trace.final_state().fidelity(&initial_state(r, 5));
        c.check(close(f, 1.0, 1e-10), format!("final fidelity {}", sig17(f)));
        for i in 1..=5 {
            let p = trace.record_distribution(&format!("after M{i}"), &[i])?.prob(&[1]);
            let expected = born_single(r, i)?;
            c.check(close(p, expected, 1e-10), format!("p(a{i}=1) = {}", sig17(p)));
        }
        Ok(())
    });
    c
}

/// Criterion 8: three independent computations of the context tables.
pub fn oracle_equivalence(r: &QuantumRealization) -> CriterionResult {
    let mut c = CriterionResult::new(8, "oracle equivalence");
    c.guard("oracles", |c| {
        let s = make_cycle_scenario(5)?;
        let exhaustive = exhaustive_support_check(r, &s, POSSIBILITY_EPS)?;
        c.check(
            exhaustive.max_abs_diff <= 1e-12,
            format!("trace formula vs pipeline: {}", sig17(exhaustive.max_abs_diff)),
        );
        for ctx in s.contexts() {
            let (i, j) = (ctx[0], ctx[1]);
            let born = born_pair(r, i, j)?;
            let seq = projection_sequential(r, &[i, j])?;
            let diff = (0..4usize)
                .map(|k| (born.prob((k / 2) as u8, (k % 2) as u8) - seq.probabilities()[k]).abs())
                .fold(0.0, f64::max);
            c.check(diff <= 1e-12, format!("({i},{j}) joint Born vs sequential: {}", sig17(diff)));
        }
        Ok(())
    });
    c
}

/// Criteria 1-8. Runtime and byte stability are properties of the caller.
pub fn verify_all(cfg: &VerifyConfig) -> VerifyReport {
    let r = &cfg.realization;
    VerifyReport {
        n_max: cfg.n_max,
        seed: cfg.seed,
        criteria: vec![
            kcbs_behavior(r),
            contextuality(cfg.n_max),
            relabeling(cfg.n_max),
            certificates(r),
            ewf_simulation(cfg),
            counterfactual(r),
            measure_undo(r),
            oracle_equivalence(r),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::StateVector;
    use crate::quantum::Projector;

    #[test]
    fn small_sweep_passes() {
        let rep = verify_all(&VerifyConfig::new(6, 1));
        for c in &rep.criteria {
            assert!(c.pass, "criterion {}: {:?}", c.id, c.details);
        }
        assert_eq!(rep.criteria.len(), 8);
        assert!(rep.first_failure().is_none());
    }

    #[test]
    fn sweeps_respect_n_max() {
        let c = contextuality(5);
        // odd 5, even 4, unified 4 and 5
        assert_eq!(c.details.len(), 4);
        assert_eq!(relabeling(5).details.len(), 2);
    }

    #[test]
    fn perturbed_vector_fails_certificates() {
        let r = kcbs_realization();
        let v3 = StateVector::from_real(&[0.0, 0.1, 1.0]).unwrap().normalized().unwrap();
        let r = r.with_projector(3, Projector::rank_one(v3).unwrap()).unwrap();
        let c = certificates(&r);
        assert!(!c.pass);
        assert!(c.details.iter().any(|d| d.starts_with("FAIL: [M2,M3]") || d.starts_with("FAIL: [M3,M4]")));
    }
}
