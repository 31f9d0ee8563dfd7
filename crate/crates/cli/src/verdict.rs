//! The result of one command and its two renderings.

use serde::Serialize;
use serde_json::{json, Value};
use xguard_core::tree::MarkedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Answer::Yes => 0,
            Answer::No => 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Stats {
    #[serde(rename = "elapsed-ms", skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
    #[serde(rename = "instances-explored")]
    pub instances_explored: Option<u64>,
    #[serde(rename = "bound-used")]
    pub bound_used: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub answer: Answer,
    pub witness: Option<Value>,
    pub stats: Stats,
    /// Human-readable body, one line per entry.
    #[serde(skip)]
    pub lines: Vec<String>,
}

impl Verdict {
    pub fn new(answer: Answer) -> Self {
        Verdict {
            answer,
            witness: None,
            stats: Stats::default(),
            lines: Vec::new(),
        }
    }

    pub fn witness(mut self, w: Value) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn line(mut self, l: impl Into<String>) -> Self {
        self.lines.push(l.into());
        self
    }

    pub fn explored(mut self, n: impl TryInto<u64>) -> Self {
        self.stats.instances_explored = n.try_into().ok();
        self
    }

    pub fn bound(mut self, n: impl TryInto<u64>) -> Self {
        self.stats.bound_used = n.try_into().ok();
        self
    }

    pub fn render(&self, as_json: bool) -> String {
        if as_json {
            return serde_json::to_string(self).expect("verdicts serialize") + "\n";
        }
        let mut out = String::new();
        out.push_str(match self.answer {
            Answer::Yes => "yes\n",
            Answer::No => "no\n",
        });
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        let mut stats = Vec::new();
        if let Some(n) = self.stats.instances_explored {
            stats.push(format!("instances-explored={n}"));
        }
        if let Some(n) = self.stats.bound_used {
            stats.push(format!("bound-used={n}"));
        }
        if let Some(ms) = self.stats.elapsed_ms {
            stats.push(format!("elapsed-ms={ms}"));
        }
        if !stats.is_empty() {
            out.push_str(&format!("stats: {}\n", stats.join(" ")));
        }
        out
    }
}

pub fn marked_json(t: &MarkedTree) -> Value {
    json!({ "tree": t.tree.to_string(), "mark": t.mark_path() })
}
