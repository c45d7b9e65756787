//! Logically contextual n-cycle behaviors and outcome relabelings.
//!
//! Three families are generated: the alternating pattern for odd n, the
//! three-phase pattern for even n, and the unified form in which `(0,1)` is
//! impossible on every `(i, i+1)` while `(0,1)` on the closing context stays
//! possible. All three are partial: they list forbidden
//! joint outcomes and one outcome that must be possible. Every tuple that is
//! not forbidden counts as possible in the support.
//!
//! Tuples follow the ascending-label convention of [`crate::scenario`], so a
//! constraint stated on the pair `(n, 1)` is stored on `(1, n)` with its
//! entries swapped.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scenario::{make_cycle_scenario, Label, Outcome, PossibilisticBehavior, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleKind {
    Unified,
    Odd,
    Even,
}

impl CycleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleKind::Unified => "unified",
            CycleKind::Odd => "odd",
            CycleKind::Even => "even",
        }
    }
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CycleKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unified" => Ok(CycleKind::Unified),
            "odd" => Ok(CycleKind::Odd),
            "even" => Ok(CycleKind::Even),
            other => Err(format!("unknown cycle kind {other:?} (expected unified, odd or even)")),
        }
    }
}

/// A joint outcome on a context, keyed in ascending label order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SupportEntry {
    pub context: Vec<Label>,
    pub tuple: Vec<Outcome>,
}

impl SupportEntry {
    fn pair(i: Label, j: Label, a: Outcome, b: Outcome) -> Self {
        if i < j {
            Self { context: vec![i, j], tuple: vec![a, b] }
        } else {
            Self { context: vec![j, i], tuple: vec![b, a] }
        }
    }

    fn flipped(&self, mask: &FlipMask) -> Self {
        Self {
            context: self.context.clone(),
            tuple: self
                .context
                .iter()
                .zip(&self.tuple)
                .map(|(&l, &o)| if mask.is_flipped(l) { 1 - o } else { o })
                .collect(),
        }
    }

    fn to_json(&self) -> Value {
        json!({"context": self.context, "tuple": self.tuple})
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleBehavior {
    kind: CycleKind,
    n: usize,
    forbidden: Vec<SupportEntry>,
    required: Vec<SupportEntry>,
    support: PossibilisticBehavior,
}

impl CycleBehavior {
    fn build(kind: CycleKind, n: usize, forbidden: Vec<SupportEntry>, required: Vec<SupportEntry>) -> Result<Self> {
        let scenario = make_cycle_scenario(n)?;
        let support = support_without(&scenario, &forbidden)?;
        Ok(Self { kind, n, forbidden, required, support })
    }

    pub fn kind(&self) -> CycleKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scenario(&self) -> &Scenario {
        self.support.scenario()
    }

    pub fn forbidden(&self) -> &[SupportEntry] {
        &self.forbidden
    }

    pub fn required(&self) -> &[SupportEntry] {
        &self.required
    }

    pub fn support(&self) -> &PossibilisticBehavior {
        &self.support
    }

    /// Applies an outcome relabeling to every constraint.
    pub fn relabel(&self, mask: &FlipMask) -> Result<Self> {
        if mask.len() != self.n {
            return Err(Error::MaskMismatch { mask: mask.len(), scenario: self.n });
        }
        let forbidden = self.forbidden.iter().map(|e| e.flipped(mask)).collect();
        let required = self.required.iter().map(|e| e.flipped(mask)).collect();
        Self::build(self.kind, self.n, forbidden, required)
    }

    /// Same constraint sets, ignoring the kind tag and listing order.
    pub fn same_constraints(&self, other: &Self) -> bool {
        let sorted = |v: &[SupportEntry]| {
            let mut v = v.to_vec();
            v.sort();
            v
        };
        self.n == other.n
            && sorted(&self.forbidden) == sorted(&other.forbidden)
            && sorted(&self.required) == sorted(&other.required)
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.support.to_json();
        let obj = v.as_object_mut().expect("support json is an object");
        obj.insert("kind".into(), json!(self.kind.as_str()));
        obj.insert("forbidden".into(), Value::Array(self.forbidden.iter().map(SupportEntry::to_json).collect()));
        obj.insert("required".into(), Value::Array(self.required.iter().map(SupportEntry::to_json).collect()));
        v
    }
}

fn support_without(scenario: &Scenario, forbidden: &[SupportEntry]) -> Result<PossibilisticBehavior> {
    let mut supports: Vec<Vec<bool>> =
        (0..scenario.contexts().len()).map(|c| vec![true; scenario.tuple_count(c)]).collect();
    for e in forbidden {
        let c = scenario
            .context_index(&e.context)
            .ok_or_else(|| Error::InvalidBehavior(format!("{:?} is not a context", e.context)))?;
        supports[c][scenario.tuple_index(&e.tuple)] = false;
    }
    PossibilisticBehavior::new(scenario.clone(), supports)
}

/// `(0,1)` impossible on `(i, i+1)` for `i < n`; `(0,1)` possible on `(1, n)`.
pub fn unified_ncycle_behavior(n: usize) -> Result<CycleBehavior> {
    if n < 4 {
        return Err(Error::InvalidCycleSize { n, reason: "unified behavior needs n >= 4" });
    }
    let forbidden = (1..n).map(|i| SupportEntry::pair(i, i + 1, 0, 1)).collect();
    let required = vec![SupportEntry::pair(1, n, 0, 1)];
    CycleBehavior::build(CycleKind::Unified, n, forbidden, required)
}

/// `(1,1)` and `(0,0)` alternately impossible along the path, `(0,1)`
/// possible on `(n, 1)`.
pub fn odd_ncycle_behavior(n: usize) -> Result<CycleBehavior> {
    if n < 5 || n.is_multiple_of(2) {
        return Err(Error::InvalidCycleSize { n, reason: "odd behavior needs odd n >= 5" });
    }
    let forbidden = (1..n)
        .map(|i| {
            let v = if i % 2 == 1 { 1 } else { 0 };
            SupportEntry::pair(i, i + 1, v, v)
        })
        .collect();
    let required = vec![SupportEntry::pair(n, 1, 0, 1)];
    CycleBehavior::build(CycleKind::Odd, n, forbidden, required)
}

/// `(1,0)` impossible up to `(n/2-1, n/2)`, `(1,1)` on `(n/2, n/2+1)`, `(0,1)`
/// on the rest of the path; `(1,1)` possible on `(n, 1)`.
pub fn even_ncycle_behavior(n: usize) -> Result<CycleBehavior> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidCycleSize { n, reason: "even behavior needs even n >= 4" });
    }
    let half = n / 2;
    let forbidden = (1..n)
        .map(|i| {
            let (a, b) = match i.cmp(&half) {
                std::cmp::Ordering::Less => (1, 0),
                std::cmp::Ordering::Equal => (1, 1),
                std::cmp::Ordering::Greater => (0, 1),
            };
            SupportEntry::pair(i, i + 1, a, b)
        })
        .collect();
    let required = vec![SupportEntry::pair(n, 1, 1, 1)];
    CycleBehavior::build(CycleKind::Even, n, forbidden, required)
}

pub fn cycle_behavior(kind: CycleKind, n: usize) -> Result<CycleBehavior> {
    match kind {
        CycleKind::Unified => unified_ncycle_behavior(n),
        CycleKind::Odd => odd_ncycle_behavior(n),
        CycleKind::Even => even_ncycle_behavior(n),
    }
}

/// Which measurements have their outcome labels swapped `0 <-> 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipMask {
    flips: Vec<bool>,
}

impl FlipMask {
    pub fn new(flips: Vec<bool>) -> Self {
        Self { flips }
    }

    pub fn identity(n: usize) -> Self {
        Self { flips: vec![false; n] }
    }

    pub fn from_labels(n: usize, labels: &[Label]) -> Result<Self> {
        let mut flips = vec![false; n];
        for &l in labels {
            if l == 0 || l > n {
                return Err(Error::UnknownLabel(l));
            }
            flips[l - 1] = true;
        }
        Ok(Self { flips })
    }

    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    pub fn is_flipped(&self, label: Label) -> bool {
        self.flips[label - 1]
    }

    pub fn flipped_labels(&self) -> Vec<Label> {
        (1..=self.flips.len()).filter(|&l| self.flips[l - 1]).collect()
    }
}

/// Relabels outcomes of the flipped measurements. Binary outcomes only.
pub fn relabel(pb: &PossibilisticBehavior, mask: &FlipMask) -> Result<PossibilisticBehavior> {
    let s = pb.scenario();
    if mask.len() != s.measurements() {
        return Err(Error::MaskMismatch { mask: mask.len(), scenario: s.measurements() });
    }
    if s.outcomes() != 2 {
        return Err(Error::InvalidBehavior("outcome flips need binary outcomes".into()));
    }
    let supports = (0..s.contexts().len())
        .map(|c| {
            let ctx = s.context(c);
            (0..s.tuple_count(c))
                .map(|i| {
                    let t: Vec<Outcome> = s
                        .tuple_at(c, i)
                        .into_iter()
                        .zip(ctx)
                        .map(|(o, &l)| if mask.is_flipped(l) { 1 - o } else { o })
                        .collect();
                    pb.is_possible(c, &t)
                })
                .collect()
        })
        .collect();
    PossibilisticBehavior::new(s.clone(), supports)
}

/// Flips every odd-labeled measurement `1, 3, ..., n`.
pub fn odd_to_unified_mask(n: usize) -> Result<FlipMask> {
    if n.is_multiple_of(2) {
        return Err(Error::InvalidCycleSize { n, reason: "odd-to-unified mask needs odd n" });
    }
    Ok(FlipMask::new((1..=n).map(|l| l % 2 == 1).collect()))
}

/// Flips the first half `1..=n/2`.
pub fn even_to_unified_mask(n: usize) -> Result<FlipMask> {
    if n % 2 == 1 {
        return Err(Error::InvalidCycleSize { n, reason: "even-to-unified mask needs even n" });
    }
    Ok(FlipMask::new((1..=n).map(|l| l <= n / 2).collect()))
}

/// Cyclic relabeling of an n-cycle behavior: measurement `l` becomes
/// `l + k (mod n)`.
pub fn rotate(pb: &PossibilisticBehavior, k: usize) -> Result<PossibilisticBehavior> {
    let n = pb.scenario().measurements();
    let target = make_cycle_scenario(n)?;
    if *pb.scenario() != target {
        return Err(Error::InvalidBehavior("rotation needs an n-cycle scenario".into()));
    }
    let shift = |l: Label| (l - 1 + k) % n + 1;
    let mut supports: Vec<Vec<bool>> = vec![Vec::new(); target.contexts().len()];
    for c in 0..target.contexts().len() {
        let ctx = target.context(c);
        let image: Vec<Label> = ctx.iter().map(|&l| shift(l)).collect();
        let dst = target.context_index(&image).expect("rotation maps contexts to contexts");
        supports[dst] = (0..4)
            .map(|i| {
                // tuple on the image context, in its ascending order
                let t = target.tuple_at(dst, i);
                let dst_ctx = target.context(dst);
                let src: Vec<Outcome> =
                    ctx.iter().map(|&l| t[dst_ctx.iter().position(|&x| x == shift(l)).unwrap()]).collect();
                pb.is_possible(c, &src)
            })
            .collect();
    }
    PossibilisticBehavior::new(target, supports)
}
