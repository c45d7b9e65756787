//! Rendering of command results as JSON, CSV or text.

use std::fmt::Write as _;

use serde_json::{json, Value};

use cyclectx::ewf::{ParadoxReport, CONVENTION};
use cyclectx::format::{json_number, probability_text, sig17};
use cyclectx::ncycle::{CycleBehavior, SupportEntry};
use cyclectx::scenario::{Behavior, ContextualityVerdict};
use cyclectx::search::Found;
use cyclectx::verify::VerifyReport;

use crate::Format;

pub struct Output {
    json: Value,
    text: String,
    csv: Vec<Vec<String>>,
}

impl Output {
    pub fn failure(json: Value, message: String) -> Self {
        let csv = vec![vec!["status".into(), "message".into()], vec!["failed".into(), message.clone()]];
        Self { json, text: message + "\n", csv }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).expect("serializable") + "\n",
            Format::Text => self.text.clone(),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in &self.csv {
                    w.write_record(row).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
            }
        }
    }
}

fn pair(a: impl std::fmt::Display, b: impl std::fmt::Display) -> String {
    format!("({a},{b})")
}

fn tuple_text(e: &SupportEntry) -> String {
    let join = |xs: Vec<String>| xs.join(",");
    format!(
        "({}) on ({})",
        join(e.tuple.iter().map(u8::to_string).collect()),
        join(e.context.iter().map(usize::to_string).collect())
    )
}

pub fn paradox(rep: &ParadoxReport) -> Output {
    let mut text = String::new();
    let mut csv = vec![vec!["section".into(), "item".into(), "tuple".into(), "value".into()]];
    let _ = writeln!(text, "{}-friend paradox (records {CONVENTION})", rep.n);
    let _ = writeln!(text, "\nobserved pairs");
    for p in &rep.pairwise {
        let (i, j) = p.distribution.context();
        // A failing entry is shown exactly: its fraction form would read 0.
        let (ok, shown) = if p.value <= rep.tolerances.probability {
            ("ok", probability_text(p.value))
        } else {
            ("FAIL", sig17(p.value))
        };
        let _ =
            writeln!(text, "  {} after M{j}: p{} = {shown}  {ok}", pair(i, j), pair(p.forbidden[0], p.forbidden[1]),);
        csv.push(vec!["pairwise".into(), pair(i, j), pair(p.forbidden[0], p.forbidden[1]), sig17(p.value)]);
    }
    let steps: Vec<String> = rep.chain_steps().iter().map(|(l, v)| format!("a{l}={v}")).collect();
    let complete = if rep.chain_complete { "" } else { " (incomplete)" };
    let _ = writeln!(text, "\nchain: {}{complete}", steps.join(" => "));
    for (l, v) in rep.chain_steps() {
        csv.push(vec!["chain".into(), format!("a{l}"), String::new(), v.to_string()]);
    }
    let cf = &rep.counterfactual;
    let (i, j) = cf.distribution.context();
    let _ = writeln!(
        text,
        "counterfactual {} before U: p(a{i}={},a{j}={}) = {}",
        pair(i, j),
        cf.tuple[0],
        cf.tuple[1],
        probability_text(cf.value)
    );
    csv.push(vec!["counterfactual".into(), pair(i, j), pair(cf.tuple[0], cf.tuple[1]), sig17(cf.value)]);
    let _ = writeln!(text, "\ncommutators (tolerance {:e})", rep.certificates.tol);
    for c in &rep.certificates.certificates {
        let status = match (c.is_required(), c.norm <= rep.certificates.tol) {
            (true, true) => "ok",
            (true, false) => "FAIL",
            (false, _) => "reference",
        };
        let _ = writeln!(text, "  [{}] {:.3e}  {status}", c.name, c.norm);
        csv.push(vec!["certificate".into(), c.name.clone(), String::new(), sig17(c.norm)]);
    }
    let verdict = if rep.verdict { "contradiction certified" } else { "not certified" };
    let _ = writeln!(text, "\nverdict: {verdict}");
    csv.push(vec!["verdict".into(), String::new(), String::new(), rep.verdict.to_string()]);
    Output { json: rep.to_json(), text, csv }
}

pub fn contextuality(b: &CycleBehavior, v: &ContextualityVerdict) -> Output {
    let mut text = String::new();
    let status = if v.contextual { "logically contextual" } else { "not logically contextual" };
    let _ = writeln!(text, "{} n={}: {status}", b.kind(), b.n());
    for e in b.forbidden() {
        let _ = writeln!(text, "  impossible {}", tuple_text(e));
    }
    for e in b.required() {
        let witness = if v.is_witness(&e.context, &e.tuple) { " (witness)" } else { "" };
        let _ = writeln!(text, "  possible   {}{witness}", tuple_text(e));
    }
    if let Some(w) = &v.witness {
        let _ = writeln!(
            text,
            "first witness: {:?} on {:?}; each of its {} global extensions hits an impossible tuple",
            w.tuple,
            w.context,
            w.kills.len()
        );
    }
    let _ = writeln!(text, "witnessing tuples: {}", v.witnessing_tuples.len());
    let mut csv = vec![vec!["context".into(), "tuple".into()]];
    for (c, t) in &v.witnessing_tuples {
        let join = |xs: Vec<String>| xs.join(",");
        csv.push(vec![join(c.iter().map(usize::to_string).collect()), join(t.iter().map(u8::to_string).collect())]);
    }
    let json = json!({"behavior": b.to_json(), "verdict": v.to_json()});
    Output { json, text, csv }
}

pub fn found(head: Value, b: &CycleBehavior, f: &Found, behavior: &Behavior) -> Output {
    let s = behavior.scenario();
    let value = |e: &SupportEntry| behavior.prob(s.context_index(&e.context).expect("cycle context"), &e.tuple);
    let checks = |es: &[SupportEntry]| -> Vec<Value> {
        es.iter().map(|e| json!({"context": e.context, "tuple": e.tuple, "value": json_number(value(e))})).collect()
    };
    let mut json = head;
    let obj = json.as_object_mut().expect("object");
    obj.insert("status".into(), json!("found"));
    obj.insert("restart".into(), json!(f.restart));
    obj.insert("ranks".into(), json!(f.ranks));
    obj.insert("forbidden".into(), Value::Array(checks(b.forbidden())));
    obj.insert("required".into(), Value::Array(checks(b.required())));
    obj.insert("realization".into(), f.realization.to_json());

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} n={} realized in dim {} (restart {}, projector ranks {:?})",
        b.kind(),
        b.n(),
        f.realization.dim(),
        f.restart,
        f.ranks
    );
    let mut csv = vec![vec!["role".into(), "context".into(), "tuple".into(), "value".into()]];
    for (role, es) in [("impossible", b.forbidden()), ("possible", b.required())] {
        for e in es {
            let _ = writeln!(text, "  {role:<10} {} = {}", tuple_text(e), probability_text(value(e)));
            let join = |xs: Vec<String>| xs.join(",");
            csv.push(vec![
                role.into(),
                join(e.context.iter().map(usize::to_string).collect()),
                join(e.tuple.iter().map(u8::to_string).collect()),
                sig17(value(e)),
            ]);
        }
    }
    Output { json, text, csv }
}

pub fn verify(rep: &VerifyReport) -> Output {
    let mut text = String::new();
    let mut csv = vec![vec!["criterion".into(), "title".into(), "pass".into(), "skipped".into()]];
    for c in &rep.criteria {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "[{status}] {}. {}", c.id, c.title);
        for d in &c.details {
            let _ = writeln!(text, "    {d}");
        }
        for s in &c.skipped {
            let _ = writeln!(text, "    skipped: {s}");
        }
        csv.push(vec![c.id.to_string(), c.title.into(), c.pass.to_string(), c.skipped.join("; ")]);
    }
    match rep.first_failure() {
        None => {
            let _ = writeln!(text, "all criteria pass");
        }
        Some(c) => {
            let _ = writeln!(text, "first failure: criterion {}", c.id);
        }
    }
    Output { json: rep.to_json(), text, csv }
}
