//! Brute-force cross-checks that share no code path with the pipeline they
//! check: density matrices and sequential collapse instead of joint spectral
//! projectors, trace formulas instead of vector norms, dense Kronecker
//! embeddings instead of structural gates.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ewf::{measurement_unitary, GateStep, Protocol};
use crate::format::json_number;
use crate::linalg::{ComplexMatrix, StateVector};
use crate::quantum::{behavior_from_realization, JointDistribution, QuantumRealization};
use crate::scenario::{Label, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub quantity: String,
    pub oracle: Vec<(String, f64)>,
    pub pipeline: Vec<(String, f64)>,
    pub max_abs_diff: f64,
    /// Whether both sides agree on which entries exceed the possibility
    /// threshold.
    pub supports_agree: bool,
}

impl OracleResult {
    /// Key sets must match exactly; order may differ.
    pub fn compare(quantity: &str, oracle: Vec<(String, f64)>, pipeline: Vec<(String, f64)>, eps: f64) -> Result<Self> {
        if oracle.len() != pipeline.len() {
            return Err(Error::OracleKeyMismatch(quantity.to_string()));
        }
        let mut max_abs_diff = 0.0f64;
        let mut supports_agree = true;
        for (key, o) in &oracle {
            let p = pipeline
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, p)| *p)
                .ok_or_else(|| Error::OracleKeyMismatch(format!("{quantity}: {key}")))?;
            max_abs_diff = max_abs_diff.max((o - p).abs());
            supports_agree &= (*o > eps) == (p > eps);
        }
        Ok(Self { quantity: quantity.to_string(), oracle, pipeline, max_abs_diff, supports_agree })
    }

    pub fn to_json(&self) -> Value {
        let side = |v: &[(String, f64)]| {
            Value::Object(v.iter().map(|(k, x)| (k.clone(), json_number(*x))).collect::<Map<_, _>>())
        };
        serde_json::json!({
            "quantity": self.quantity,
            "oracle": side(&self.oracle),
            "pipeline": side(&self.pipeline),
            "max_abs_diff": json_number(self.max_abs_diff),
            "supports_agree": self.supports_agree,
        })
    }
}

fn density(psi: &StateVector) -> ComplexMatrix {
    ComplexMatrix::outer(psi)
}

fn outcome_projector(r: &QuantumRealization, label: Label, a: u8) -> Result<ComplexMatrix> {
    let p = r.projector(label)?.matrix();
    if a == 1 {
        Ok(p)
    } else {
        ComplexMatrix::identity(r.dim()).try_sub(&p)
    }
}

/// Textbook sequential measurement: after each outcome the density matrix
/// becomes `P rho P`, and the weight of a branch is its final trace.
pub fn projection_sequential(r: &QuantumRealization, sequence: &[Label]) -> Result<JointDistribution> {
    if sequence.is_empty() {
        return Err(Error::InvalidBehavior("empty measurement sequence".into()));
    }
    let k = sequence.len();
    let mut branches = vec![density(r.state())];
    for &label in sequence {
        let p1 = outcome_projector(r, label, 1)?;
        let p0 = outcome_projector(r, label, 0)?;
        let mut next = Vec::with_capacity(branches.len() * 2);
        for rho in &branches {
            for p in [&p0, &p1] {
                next.push(p.matmul(rho)?.matmul(p)?);
            }
        }
        branches = next;
    }
    let probs = branches.iter().map(|rho| Ok(rho.trace()?.re)).collect::<Result<Vec<f64>>>()?;
    debug_assert_eq!(probs.len(), 1 << k);
    JointDistribution::new(sequence.to_vec(), probs)
}

fn tuple_key(t: &[u8]) -> String {
    t.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
}

/// Every context table as `Tr(P_{o_1} ... P_{o_k} rho)`, diffed against
/// [`behavior_from_realization`].
pub fn exhaustive_support_check(r: &QuantumRealization, s: &Scenario, eps: f64) -> Result<OracleResult> {
    if s.contexts().iter().any(|c| c.len() > 3) {
        return Err(Error::InvalidScenario("oracle handles contexts of at most three labels".into()));
    }
    let rho = density(r.state());
    let behavior = behavior_from_realization(r, s)?;
    let mut oracle = Vec::new();
    let mut pipeline = Vec::new();
    for (c, ctx) in s.contexts().iter().enumerate() {
        let ctx_key = ctx.iter().map(Label::to_string).collect::<Vec<_>>().join(",");
        for idx in 0..s.tuple_count(c) {
            let t = s.tuple_at(c, idx);
            let mut prod = ComplexMatrix::identity(r.dim());
            for (&l, &a) in ctx.iter().zip(&t) {
                prod = prod.matmul(&outcome_projector(r, l, a)?)?;
            }
            let value = prod.matmul(&rho)?.trace()?.re;
            let key = format!("{ctx_key}|{}", tuple_key(&t));
            oracle.push((key.clone(), value));
            pipeline.push((key, behavior.table(c)[idx]));
        }
    }
    OracleResult::compare("context tables", oracle, pipeline, eps)
}

/// Record marginal after the first `stage` steps of `p`, computed with dense
/// embedded unitaries on the full register.
pub fn dense_circuit_distribution(
    r: &QuantumRealization,
    p: &Protocol,
    stage: usize,
    records: &[Label],
) -> Result<JointDistribution> {
    let n = p.n();
    let ready = StateVector::basis(1 << n, 0);
    let mut psi = r.state().kron(&ready);
    for step in &p.steps()[..stage.min(p.steps().len())] {
        let u = match *step {
            GateStep::Measure(i) => measurement_unitary(r, i, n)?,
            GateStep::Undo(i) => measurement_unitary(r, i, n)?.adjoint(),
        };
        psi = u.apply(&psi)?;
    }
    let mut probs = vec![0.0; 1 << records.len()];
    let width = 1usize << n;
    for (idx, z) in psi.amplitudes().iter().enumerate() {
        let bits = idx % width;
        let mut key = 0;
        for &i in records {
            key = 2 * key + ((bits >> (n - i)) & 1);
        }
        probs[key] += z.norm_sqr();
    }
    JointDistribution::new(records.to_vec(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewf::{build_counterfactual_protocol, build_protocol, simulate};
    use crate::linalg::C64;
    use crate::quantum::{born_pair, kcbs_realization, Projector};
    use crate::scenario::{make_cycle_scenario, POSSIBILITY_EPS};

    #[test]
    fn single_measurement() {
        let r = kcbs_realization();
        let d = projection_sequential(&r, &[1]).unwrap();
        assert!((d.prob(&[1]) - 1.0 / 9.0).abs() <= 1e-12);
        assert!((d.prob(&[0]) - 8.0 / 9.0).abs() <= 1e-12);
        assert!(projection_sequential(&r, &[]).is_err());
    }

    #[test]
    fn closing_pair() {
        let r = kcbs_realization();
        let d = projection_sequential(&r, &[5, 1]).unwrap();
        assert!((d.prob(&[0, 1]) - 1.0 / 9.0).abs() <= 1e-12);
    }

    #[test]
    fn sequential_agrees_with_born_on_contexts() {
        let r = kcbs_realization();
        for (i, j) in [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)] {
            let born = born_pair(&r, i, j).unwrap();
            let ij = projection_sequential(&r, &[i, j]).unwrap();
            let ji = projection_sequential(&r, &[j, i]).unwrap();
            for a in 0..2u8 {
                for b in 0..2u8 {
                    assert!((ij.prob(&[a, b]) - born.prob(a, b)).abs() <= 1e-12);
                    assert!((ji.prob(&[b, a]) - born.prob(a, b)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn sequential_order_matters_off_context() {
        let r = kcbs_realization();
        let d13 = projection_sequential(&r, &[1, 3]).unwrap();
        let d31 = projection_sequential(&r, &[3, 1]).unwrap();
        assert!((d13.prob(&[1, 1]) - d31.prob(&[1, 1])).abs() > 1e-3);
    }

    #[test]
    fn trace_formula_matches_pipeline() {
        let r = kcbs_realization();
        let res = exhaustive_support_check(&r, &make_cycle_scenario(5).unwrap(), POSSIBILITY_EPS).unwrap();
        assert!(res.max_abs_diff <= 1e-12);
        assert!(res.supports_agree);
        assert_eq!(res.oracle.len(), 20);
    }

    #[test]
    fn identity_projectors_put_mass_on_all_ones() {
        let r = kcbs_realization();
        let full = Projector::from_basis((0..3).map(|k| StateVector::basis(3, k)).collect()).unwrap();
        let r = QuantumRealization::new(r.state().clone(), vec![full; 5]).unwrap();
        let res = exhaustive_support_check(&r, &make_cycle_scenario(5).unwrap(), POSSIBILITY_EPS).unwrap();
        for (key, v) in &res.oracle {
            let expected = if key.ends_with("|1,1") { 1.0 } else { 0.0 };
            assert!((v - expected).abs() <= 1e-12, "{key}");
        }
    }

    #[test]
    fn orthogonal_state_puts_mass_on_all_zeros() {
        let e = |k| StateVector::basis(4, k);
        let p = Projector::from_basis(vec![e(0), e(1)]).unwrap();
        let psi =
            StateVector::new(vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.6, 0.0), C64::new(0.0, 0.8)])
                .unwrap();
        let r = QuantumRealization::new(psi, vec![p.clone(), p.clone(), p]).unwrap();
        let s = Scenario::new(3, vec![vec![1, 2, 3]], 2).unwrap();
        assert!(exhaustive_support_check(&r, &s, POSSIBILITY_EPS).is_err());
        let s = Scenario::new(3, vec![vec![1, 2], vec![2, 3], vec![1, 3]], 2).unwrap();
        let res = exhaustive_support_check(&r, &s, POSSIBILITY_EPS).unwrap();
        for (key, v) in &res.oracle {
            let expected = if key.ends_with("|0,0") { 1.0 } else { 0.0 };
            assert!((v - expected).abs() <= 1e-12, "{key}");
        }
    }

    #[test]
    fn key_mismatch_is_an_error() {
        let a = vec![("x".to_string(), 0.5)];
        let b = vec![("y".to_string(), 0.5)];
        assert!(matches!(OracleResult::compare("q", a.clone(), b, 1e-9), Err(Error::OracleKeyMismatch(_))));
        assert!(OracleResult::compare("q", a.clone(), vec![], 1e-9).is_err());
        let ok = OracleResult::compare("q", a.clone(), a, 1e-9).unwrap();
        assert_eq!(ok.max_abs_diff, 0.0);
    }

    #[test]
    fn dense_circuit_matches_structural_simulation() {
        let r = kcbs_realization();
        let p = build_protocol(5).unwrap();
        let t = simulate(&p, &r).unwrap();
        for i in 1..5 {
            let stage = p.stage_index(&format!("after M{}", i + 1)).unwrap();
            let dense = dense_circuit_distribution(&r, &p, stage, &[i, i + 1]).unwrap();
            let fast = t.record_distribution(&format!("after M{}", i + 1), &[i, i + 1]).unwrap();
            assert!(dense.max_abs_diff(&fast).unwrap() <= 1e-12);
        }
        let cf = build_counterfactual_protocol(5).unwrap();
        let dense = dense_circuit_distribution(&r, &cf, 2, &[1, 5]).unwrap();
        assert!((dense.prob(&[1, 0]) - 1.0 / 9.0).abs() <= 1e-12);
    }
}
