//! Compatibility scenarios, behaviors over their maximal contexts, and the
//! possibilistic (support-level) notion of contextuality.
//!
//! Measurements are labeled `1..=n`. Each context is stored with its labels
//! in ascending order, and a joint outcome for a context is a tuple whose
//! k-th entry belongs to the k-th label of that ordering. In an n-cycle the
//! closing context `{n, 1}` is therefore keyed `(1, n)`.
//!
//! Tuples inside a context table are indexed lexicographically (the first
//! label is the most significant digit), and global assignments are
//! enumerated the same way with measurement 1 most significant.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::format::json_number;

pub type Label = usize;
pub type Outcome = u8;

/// Largest assignment space `is_logically_contextual` will enumerate.
pub const MAX_ASSIGNMENTS: usize = 1 << 24;

/// Default threshold above which a probability counts as "possible".
pub const POSSIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    measurements: usize,
    contexts: Vec<Vec<Label>>,
    outcomes: usize,
}

impl Scenario {
    pub fn new(measurements: usize, contexts: Vec<Vec<Label>>, outcomes: usize) -> Result<Self> {
        if measurements == 0 {
            return Err(Error::InvalidScenario("no measurements".into()));
        }
        if outcomes < 2 || outcomes > Outcome::MAX as usize {
            return Err(Error::InvalidScenario(format!("unsupported outcome count {outcomes}")));
        }
        let mut sorted = Vec::with_capacity(contexts.len());
        for mut ctx in contexts {
            ctx.sort_unstable();
            if ctx.is_empty() {
                return Err(Error::InvalidScenario("empty context".into()));
            }
            if ctx.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidScenario(format!("repeated label in {ctx:?}")));
            }
            if let Some(&bad) = ctx.iter().find(|&&l| l == 0 || l > measurements) {
                return Err(Error::InvalidScenario(format!("label {bad} outside 1..={measurements}")));
            }
            sorted.push(ctx);
        }
        for (a, ca) in sorted.iter().enumerate() {
            for (b, cb) in sorted.iter().enumerate() {
                if a != b && ca.iter().all(|l| cb.contains(l)) {
                    return Err(Error::InvalidScenario(format!("context {ca:?} is contained in {cb:?}")));
                }
            }
        }
        Ok(Self { measurements, contexts: sorted, outcomes })
    }

    pub fn measurements(&self) -> usize {
        self.measurements
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn contexts(&self) -> &[Vec<Label>] {
        &self.contexts
    }

    pub fn context(&self, c: usize) -> &[Label] {
        &self.contexts[c]
    }

    /// Index of the context holding exactly these labels, in any order.
    pub fn context_index(&self, labels: &[Label]) -> Option<usize> {
        let mut key = labels.to_vec();
        key.sort_unstable();
        self.contexts.iter().position(|c| *c == key)
    }

    pub fn tuple_count(&self, c: usize) -> usize {
        self.outcomes.pow(self.contexts[c].len() as u32)
    }

    pub fn tuple_at(&self, c: usize, mut idx: usize) -> Vec<Outcome> {
        let len = self.contexts[c].len();
        let mut t = vec![0; len];
        for slot in t.iter_mut().rev() {
            *slot = (idx % self.outcomes) as Outcome;
            idx /= self.outcomes;
        }
        t
    }

    pub fn tuple_index(&self, tuple: &[Outcome]) -> usize {
        tuple.iter().fold(0, |acc, &o| acc * self.outcomes + o as usize)
    }

    /// Table index of the restriction of a global assignment (indexed by
    /// `label - 1`) to context `c`.
    pub fn restrict(&self, c: usize, assignment: &[Outcome]) -> usize {
        self.contexts[c].iter().fold(0, |acc, &l| acc * self.outcomes + assignment[l - 1] as usize)
    }

    fn contexts_json(&self) -> Value {
        Value::Array(self.contexts.iter().map(|c| json!(c)).collect())
    }

    fn context_key(&self, c: usize) -> String {
        join(&self.contexts[c])
    }

    fn tuple_key(&self, c: usize, idx: usize) -> String {
        join(&self.tuple_at(c, idx))
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// The n-cycle scenario: binary measurements `1..=n` with contexts
/// `{i, i+1}` and the closing context `{n, 1}`.
pub fn make_cycle_scenario(n: usize) -> Result<Scenario> {
    if n < 3 {
        return Err(Error::InvalidCycleSize { n, reason: "a cycle needs at least 3 measurements" });
    }
    let mut contexts: Vec<Vec<Label>> = (1..n).map(|i| vec![i, i + 1]).collect();
    contexts.push(vec![1, n]);
    Scenario::new(n, contexts, 2)
}

/// One probability distribution per maximal context.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    tables: Vec<Vec<f64>>,
}

impl Behavior {
    pub fn new(scenario: Scenario, tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.len() != scenario.contexts.len() {
            return Err(Error::InvalidBehavior(format!(
                "{} tables for {} contexts",
                tables.len(),
                scenario.contexts.len()
            )));
        }
        for (c, table) in tables.iter().enumerate() {
            if table.len() != scenario.tuple_count(c) {
                return Err(Error::InvalidBehavior(format!(
                    "table for {:?} has {} entries",
                    scenario.contexts[c],
                    table.len()
                )));
            }
            if table.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidBehavior(format!("entry outside [0,1] in {:?}", scenario.contexts[c])));
            }
            let total: f64 = table.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidBehavior(format!("table for {:?} sums to {total}", scenario.contexts[c])));
            }
        }
        Ok(Self { scenario, tables })
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, &[Outcome]) -> f64) -> Result<Self> {
        let tables = (0..scenario.contexts.len())
            .map(|c| (0..scenario.tuple_count(c)).map(|i| f(c, &scenario.tuple_at(c, i))).collect())
            .collect();
        Self::new(scenario, tables)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self, c: usize) -> &[f64] {
        &self.tables[c]
    }

    pub fn prob(&self, c: usize, tuple: &[Outcome]) -> f64 {
        self.tables[c][self.scenario.tuple_index(tuple)]
    }

    /// Marginal of context `c` onto `labels` (a subset of the context).
    fn marginal(&self, c: usize, labels: &[Label]) -> Vec<f64> {
        let ctx = &self.scenario.contexts[c];
        let positions: Vec<usize> =
            labels.iter().map(|l| ctx.iter().position(|x| x == l).expect("label in context")).collect();
        let k = self.scenario.outcomes;
        let mut out = vec![0.0; k.pow(labels.len() as u32)];
        for (idx, p) in self.tables[c].iter().enumerate() {
            let t = self.scenario.tuple_at(c, idx);
            let key = positions.iter().fold(0, |acc, &pos| acc * k + t[pos] as usize);
            out[key] += p;
        }
        out
    }

    pub fn check_no_disturbance(&self, tol: f64) -> bool {
        let ctxs = &self.scenario.contexts;
        for a in 0..ctxs.len() {
            for b in a + 1..ctxs.len() {
                let shared: Vec<Label> = ctxs[a].iter().copied().filter(|l| ctxs[b].contains(l)).collect();
                if shared.is_empty() {
                    continue;
                }
                let ma = self.marginal(a, &shared);
                let mb = self.marginal(b, &shared);
                if ma.iter().zip(&mb).any(|(x, y)| (x - y).abs() > tol) {
                    return false;
                }
            }
        }
        true
    }

    pub fn possibilistic_collapse(&self, eps: f64) -> PossibilisticBehavior {
        PossibilisticBehavior {
            scenario: self.scenario.clone(),
            supports: self.tables.iter().map(|t| t.iter().map(|&p| p > eps).collect()).collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        tables_json(&self.scenario, |c, i| json_number(self.tables[c][i]))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let (scenario, raw) = parse_tables(v)?;
        let tables = raw
            .into_iter()
            .map(|t| {
                t.into_iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Json("probability is not a number".into())))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenario, tables)
    }
}

pub fn check_no_disturbance(b: &Behavior, tol: f64) -> bool {
    b.check_no_disturbance(tol)
}

pub fn possibilistic_collapse(b: &Behavior, eps: f64) -> PossibilisticBehavior {
    b.possibilistic_collapse(eps)
}

fn tables_json(s: &Scenario, mut entry: impl FnMut(usize, usize) -> Value) -> Value {
    let mut tables = Map::new();
    for c in 0..s.contexts.len() {
        let mut table = Map::new();
        for i in 0..s.tuple_count(c) {
            table.insert(s.tuple_key(c, i), entry(c, i));
        }
        tables.insert(s.context_key(c), Value::Object(table));
    }
    json!({
        "n": s.measurements,
        "contexts": s.contexts_json(),
        "tables": tables,
    })
}

fn parse_labels(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| Error::Json(format!("bad key {s:?}: {e}")))).collect()
}

/// Parses the shared `{n, contexts, tables}` layout, returning raw table
/// values in tuple-index order.
fn parse_tables(v: &Value) -> Result<(Scenario, Vec<Vec<Value>>)> {
    let n = v["n"].as_u64().ok_or_else(|| Error::Json("missing n".into()))? as usize;
    let contexts: Vec<Vec<Label>> = v["contexts"]
        .as_array()
        .ok_or_else(|| Error::Json("missing contexts".into()))?
        .iter()
        .map(|c| {
            c.as_array()
                .ok_or_else(|| Error::Json("context is not an array".into()))?
                .iter()
                .map(|l| l.as_u64().map(|x| x as usize).ok_or_else(|| Error::Json("bad label".into())))
                .collect()
        })
        .collect::<Result<_>>()?;
    let tables = v["tables"].as_object().ok_or_else(|| Error::Json("missing tables".into()))?;
    let mut outcomes = 2;
    for table in tables.values() {
        let table = table.as_object().ok_or_else(|| Error::Json("table is not an object".into()))?;
        for key in table.keys() {
            if let Some(&m) = parse_labels(key)?.iter().max() {
                outcomes = outcomes.max(m + 1);
            }
        }
    }
    let scenario = Scenario::new(n, contexts, outcomes)?;
    let mut raw = Vec::with_capacity(scenario.contexts.len());
    for c in 0..scenario.contexts.len() {
        let table = tables
            .get(&scenario.context_key(c))
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Json(format!("no table for context {}", scenario.context_key(c))))?;
        let mut entries = vec![Value::Null; scenario.tuple_count(c)];
        for (key, val) in table {
            let t: Vec<Outcome> = parse_labels(key)?.into_iter().map(|x| x as Outcome).collect();
            if t.len() != scenario.contexts[c].len() {
                return Err(Error::Json(format!("tuple {key:?} has wrong arity")));
            }
            entries[scenario.tuple_index(&t)] = val.clone();
        }
        if entries.iter().any(Value::is_null) {
            return Err(Error::Json(format!("incomplete table {}", scenario.context_key(c))));
        }
        raw.push(entries);
    }
    Ok((scenario, raw))
}

/// Support of a behavior: which joint outcomes are possible in each context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PossibilisticBehavior {
    scenario: Scenario,
    supports: Vec<Vec<bool>>,
}

impl PossibilisticBehavior {
    pub fn new(scenario: Scenario, supports: Vec<Vec<bool>>) -> Result<Self> {
        if supports.len() != scenario.contexts.len() {
            return Err(Error::InvalidBehavior("support count differs from context count".into()));
        }
        for (c, s) in supports.iter().enumerate() {
            if s.len() != scenario.tuple_count(c) {
                return Err(Error::InvalidBehavior(format!(
                    "support for {:?} has {} entries",
                    scenario.contexts[c],
                    s.len()
                )));
            }
            if !s.iter().any(|&x| x) {
                return Err(Error::InvalidBehavior(format!(
                    "no possible outcome in context {:?}",
                    scenario.contexts[c]
                )));
            }
        }
        Ok(Self { scenario, supports })
    }

    /// Every joint outcome possible everywhere.
    pub fn full(scenario: Scenario) -> Self {
        let supports = (0..scenario.contexts.len()).map(|c| vec![true; scenario.tuple_count(c)]).collect();
        Self { scenario, supports }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn support(&self, c: usize) -> &[bool] {
        &self.supports[c]
    }

    pub fn is_possible(&self, c: usize, tuple: &[Outcome]) -> bool {
        self.supports[c][self.scenario.tuple_index(tuple)]
    }

    pub fn possible_count(&self, c: usize) -> usize {
        self.supports[c].iter().filter(|&&x| x).count()
    }

    /// The uniform distribution over each context's support.
    pub fn uniform(&self) -> Behavior {
        let tables = self
            .supports
            .iter()
            .map(|s| {
                let k = s.iter().filter(|&&x| x).count() as f64;
                s.iter().map(|&x| if x { 1.0 / k } else { 0.0 }).collect()
            })
            .collect();
        Behavior::new(self.scenario.clone(), tables).expect("uniform tables are normalized")
    }

    /// True when every tuple impossible here is impossible in `other` too
    /// and both share a scenario.
    pub fn is_refined_by(&self, other: &Self) -> bool {
        self.scenario == other.scenario
            && self.supports.iter().zip(&other.supports).all(|(a, b)| a.iter().zip(b).all(|(&x, &y)| x || !y))
    }

    pub fn to_json(&self) -> Value {
        tables_json(&self.scenario, |c, i| json!(u8::from(self.supports[c][i])))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let (scenario, raw) = parse_tables(v)?;
        let supports = raw
            .into_iter()
            .map(|t| {
                t.into_iter()
                    .map(|x| match x.as_u64() {
                        Some(0) => Ok(false),
                        Some(1) => Ok(true),
                        _ => Err(Error::Json("support entry must be 0 or 1".into())),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenario, supports)
    }
}

/// Lexicographic iterator over all global assignments (measurement 1 is the
/// most significant digit). Items are indexed by `label - 1`.
#[derive(Debug, Clone)]
pub struct GlobalAssignments {
    next: Option<Vec<Outcome>>,
    outcomes: Outcome,
}

impl Iterator for GlobalAssignments {
    type Item = Vec<Outcome>;

    fn next(&mut self) -> Option<Vec<Outcome>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for slot in succ.iter_mut().rev() {
            if *slot + 1 < self.outcomes {
                *slot += 1;
                self.next = Some(succ);
                return Some(current);
            }
            *slot = 0;
        }
        Some(current)
    }
}

fn assignment_space(s: &Scenario) -> Result<usize> {
    let too_big = Error::TooManyAssignments { measurements: s.measurements, outcomes: s.outcomes };
    let size = s.outcomes.checked_pow(s.measurements as u32).ok_or_else(|| too_big.clone())?;
    if size > MAX_ASSIGNMENTS {
        return Err(too_big);
    }
    Ok(size)
}

pub fn enumerate_global_assignments(s: &Scenario) -> Result<GlobalAssignments> {
    assignment_space(s)?;
    Ok(GlobalAssignments { next: Some(vec![0; s.measurements]), outcomes: s.outcomes as Outcome })
}

/// An assignment extending the witness tuple, and the first context (in
/// scenario order) where its restriction is impossible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kill {
    pub assignment: Vec<Outcome>,
    pub context: Vec<Label>,
    pub restricted: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub context: Vec<Label>,
    pub tuple: Vec<Outcome>,
    pub kills: Vec<Kill>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextualityVerdict {
    pub contextual: bool,
    /// First witnessing tuple in scenario/lexicographic order, with the
    /// full list of its killed extensions.
    pub witness: Option<Witness>,
    /// Every possible tuple that no surviving global assignment reproduces.
    pub witnessing_tuples: Vec<(Vec<Label>, Vec<Outcome>)>,
}

impl ContextualityVerdict {
    pub fn is_witness(&self, context: &[Label], tuple: &[Outcome]) -> bool {
        self.witnessing_tuples.iter().any(|(c, t)| c == context && t == tuple)
    }

    pub fn to_json(&self) -> Value {
        let witness = match &self.witness {
            None => Value::Null,
            Some(w) => json!({
                "context": w.context,
                "tuple": w.tuple,
                "kills": w.kills.iter().map(|k| json!({
                    "assignment": k.assignment,
                    "context": k.context,
                    "restricted": k.restricted,
                })).collect::<Vec<_>>(),
            }),
        };
        json!({
            "contextual": self.contextual,
            "witness": witness,
            "witnessing_tuples": self.witnessing_tuples.iter()
                .map(|(c, t)| json!({"context": c, "tuple": t}))
                .collect::<Vec<_>>(),
        })
    }
}

/// Decides logical contextuality by exhaustive enumeration of global
/// assignments.
pub fn is_logically_contextual(pb: &PossibilisticBehavior) -> Result<ContextualityVerdict> {
    let s = &pb.scenario;
    let mut realized: Vec<Vec<bool>> = pb.supports.iter().map(|t| vec![false; t.len()]).collect();
    for t in enumerate_global_assignments(s)? {
        let idx: Vec<usize> = (0..s.contexts.len()).map(|c| s.restrict(c, &t)).collect();
        if idx.iter().enumerate().all(|(c, &i)| pb.supports[c][i]) {
            for (c, i) in idx.into_iter().enumerate() {
                realized[c][i] = true;
            }
        }
    }

    let mut witnessing_tuples = Vec::new();
    let mut first = None;
    for c in 0..s.contexts.len() {
        for i in 0..s.tuple_count(c) {
            if pb.supports[c][i] && !realized[c][i] {
                first.get_or_insert((c, i));
                witnessing_tuples.push((s.contexts[c].clone(), s.tuple_at(c, i)));
            }
        }
    }

    let witness = match first {
        None => None,
        Some((c, i)) => {
            let mut kills = Vec::new();
            for t in enumerate_global_assignments(s)? {
                if s.restrict(c, &t) != i {
                    continue;
                }
                let dead = (0..s.contexts.len())
                    .find(|&d| !pb.supports[d][s.restrict(d, &t)])
                    .expect("extension of a witness tuple must die somewhere");
                kills.push(Kill {
                    restricted: s.tuple_at(dead, s.restrict(dead, &t)),
                    context: s.contexts[dead].clone(),
                    assignment: t,
                });
            }
            Some(Witness { context: s.contexts[c].clone(), tuple: s.tuple_at(c, i), kills })
        }
    };

    Ok(ContextualityVerdict { contextual: witness.is_some(), witness, witnessing_tuples })
}

/// A value forced onto `label` because `context` admits only one completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Implication {
    pub context: Vec<Label>,
    pub label: Label,
    pub value: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Propagation {
    pub seeds: Vec<(Label, Outcome)>,
    pub implications: Vec<Implication>,
    /// Context in which the fixed values admit no possible joint outcome.
    pub conflict: Option<Vec<Label>>,
    values: Vec<Option<Outcome>>,
}

impl Propagation {
    pub fn value(&self, label: Label) -> Option<Outcome> {
        self.values.get(label.wrapping_sub(1)).copied().flatten()
    }

    pub fn is_conflict(&self) -> bool {
        self.conflict.is_some()
    }

    pub fn forced(&self) -> Vec<(Label, Outcome)> {
        self.implications.iter().map(|i| (i.label, i.value)).collect()
    }
}

/// Unit propagation of fixed outcomes through the context supports.
///
/// Contexts are swept in scenario order until nothing changes. A context
/// with exactly one unfixed member forces it when only one of its values
/// keeps the joint outcome possible; a context whose fixed values (or all
/// completions of them) are impossible is reported as the conflict.
pub fn propagate_chain(pb: &PossibilisticBehavior, seeds: &[(Label, Outcome)]) -> Result<Propagation> {
    let s = &pb.scenario;
    let mut values: Vec<Option<Outcome>> = vec![None; s.measurements];
    for &(label, value) in seeds {
        if label == 0 || label > s.measurements {
            return Err(Error::UnknownLabel(label));
        }
        if value as usize >= s.outcomes {
            return Err(Error::InvalidBehavior(format!("outcome {value} out of range")));
        }
        match values[label - 1] {
            Some(v) if v != value => return Err(Error::InvalidBehavior(format!("contradictory seeds for {label}"))),
            _ => values[label - 1] = Some(value),
        }
    }

    let mut implications = Vec::new();
    let mut conflict = None;
    let mut changed = true;
    'sweep: while changed {
        changed = false;
        for (c, ctx) in s.contexts.iter().enumerate() {
            let free: Vec<usize> = (0..ctx.len()).filter(|&k| values[ctx[k] - 1].is_none()).collect();
            if free.len() > 1 {
                continue;
            }
            let mut tuple: Vec<Outcome> = ctx.iter().map(|&l| values[l - 1].unwrap_or(0)).collect();
            match free.first() {
                None => {
                    if !pb.supports[c][s.tuple_index(&tuple)] {
                        conflict = Some(ctx.clone());
                        break 'sweep;
                    }
                }
                Some(&k) => {
                    let options: Vec<Outcome> = (0..s.outcomes as Outcome)
                        .filter(|&v| {
                            tuple[k] = v;
                            pb.supports[c][s.tuple_index(&tuple)]
                        })
                        .collect();
                    match options.as_slice() {
                        [] => {
                            conflict = Some(ctx.clone());
                            break 'sweep;
                        }
                        [v] => {
                            values[ctx[k] - 1] = Some(*v);
                            implications.push(Implication { context: ctx.clone(), label: ctx[k], value: *v });
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
    }

    Ok(Propagation { seeds: seeds.to_vec(), implications, conflict, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_scenarios() {
        let s4 = make_cycle_scenario(4).unwrap();
        assert_eq!(s4.contexts(), &[vec![1, 2], vec![2, 3], vec![3, 4], vec![1, 4]]);
        let s5 = make_cycle_scenario(5).unwrap();
        assert_eq!(s5.contexts(), &[vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![1, 5]]);
        let s3 = make_cycle_scenario(3).unwrap();
        assert_eq!(s3.contexts().len(), 3);
        assert!(s3.contexts().iter().all(|c| c.len() == 2));
        assert!(make_cycle_scenario(2).is_err());
    }

    #[test]
    fn scenario_rejects_non_maximal_contexts() {
        assert!(Scenario::new(3, vec![vec![1, 2], vec![2]], 2).is_err());
        assert!(Scenario::new(3, vec![vec![1, 4]], 2).is_err());
        assert!(Scenario::new(3, vec![vec![1, 1]], 2).is_err());
        assert!(Scenario::new(3, vec![vec![1, 2], vec![2, 1]], 2).is_err());
    }

    #[test]
    fn product_behavior_is_non_disturbing() {
        let q = [0.3, 0.7];
        let b = Behavior::from_fn(make_cycle_scenario(5).unwrap(), |_, t| t.iter().map(|&o| q[o as usize]).product())
            .unwrap();
        assert!(b.check_no_disturbance(1e-12));
    }

    #[test]
    fn constructed_disturbance_is_detected() {
        let s = make_cycle_scenario(4).unwrap();
        // {1,2}: m1 = 0 always; {1,4}: m1 = 1 always.
        let b = Behavior::from_fn(s, |c, t| match c {
            0 => f64::from(t == [0, 0]),
            3 => f64::from(t == [1, 0]),
            _ => f64::from(t == [0, 0]),
        })
        .unwrap();
        assert!(!check_no_disturbance(&b, 1e-12));
    }

    #[test]
    fn behavior_validation() {
        let s = make_cycle_scenario(3).unwrap();
        assert!(Behavior::new(s.clone(), vec![vec![0.25; 4]; 2]).is_err());
        assert!(Behavior::new(s.clone(), vec![vec![0.3; 4]; 3]).is_err());
        let mut bad = vec![vec![0.25; 4]; 3];
        bad[1] = vec![1.5, -0.5, 0.0, 0.0];
        assert!(Behavior::new(s, bad).is_err());
    }

    #[test]
    fn collapse_of_uniform_is_full() {
        let s = make_cycle_scenario(4).unwrap();
        let full = PossibilisticBehavior::full(s.clone());
        let b = full.uniform();
        assert_eq!(possibilistic_collapse(&b, POSSIBILITY_EPS), full);
    }

    #[test]
    fn collapse_of_indicator_is_identity() {
        let s = make_cycle_scenario(4).unwrap();
        let mut supports: Vec<Vec<bool>> = vec![vec![true; 4]; 4];
        supports[0][1] = false;
        supports[2][3] = false;
        let pb = PossibilisticBehavior::new(s, supports).unwrap();
        assert_eq!(pb.uniform().possibilistic_collapse(POSSIBILITY_EPS), pb);
    }

    #[test]
    fn assignments_are_lexicographic() {
        let s3 = make_cycle_scenario(3).unwrap();
        assert_eq!(enumerate_global_assignments(&s3).unwrap().count(), 8);
        let s5 = make_cycle_scenario(5).unwrap();
        let all: Vec<_> = enumerate_global_assignments(&s5).unwrap().collect();
        assert_eq!(all.len(), 32);
        assert_eq!(all[0], vec![0; 5]);
        assert_eq!(all[1], vec![0, 0, 0, 0, 1]);
        assert_eq!(all[31], vec![1; 5]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn enumeration_guard() {
        let s = make_cycle_scenario(25).unwrap();
        assert!(matches!(enumerate_global_assignments(&s), Err(Error::TooManyAssignments { .. })));
        assert!(is_logically_contextual(&PossibilisticBehavior::full(s)).is_err());
        let ternary = Scenario::new(16, vec![vec![1, 2]], 3).unwrap();
        assert!(enumerate_global_assignments(&ternary).is_err());
    }

    #[test]
    fn full_support_is_noncontextual() {
        let pb = PossibilisticBehavior::full(make_cycle_scenario(5).unwrap());
        let v = is_logically_contextual(&pb).unwrap();
        assert!(!v.contextual);
        assert!(v.witness.is_none());
        let p = propagate_chain(&pb, &[(1, 1)]).unwrap();
        assert!(p.implications.is_empty());
        assert!(!p.is_conflict());
    }

    #[test]
    fn propagation_rejects_bad_seeds() {
        let pb = PossibilisticBehavior::full(make_cycle_scenario(4).unwrap());
        assert!(propagate_chain(&pb, &[(5, 0)]).is_err());
        assert!(propagate_chain(&pb, &[(1, 2)]).is_err());
        assert!(propagate_chain(&pb, &[(1, 0), (1, 1)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let q = [1.0 / 9.0, 8.0 / 9.0];
        let b = Behavior::from_fn(make_cycle_scenario(5).unwrap(), |_, t| t.iter().map(|&o| q[o as usize]).product())
            .unwrap();
        let v = b.to_json();
        assert_eq!(v["n"], 5);
        assert_eq!(v["contexts"][4], json!([1, 5]));
        assert!(v["tables"]["1,5"]["0,1"].is_number());
        let text = serde_json::to_string(&v).unwrap();
        let back = Behavior::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, b);

        let pb = b.possibilistic_collapse(POSSIBILITY_EPS);
        assert_eq!(PossibilisticBehavior::from_json(&pb.to_json()).unwrap(), pb);
    }
}
