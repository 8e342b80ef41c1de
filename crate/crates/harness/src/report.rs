//! `key=value` reports and the JSON summary.

use std::fmt::Write;

use hdlog_core::seminaive::RoundStats;
use hdlog_core::{Interner, MaterialisationState, UpdateReport};
use serde_json::{json, Value};

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn phase(&mut self, name: &str, stats: &RoundStats, time: std::time::Duration) {
        self.push(format!("{name}.rounds"), stats.rounds);
        self.push(format!("{name}.substitutions_considered"), stats.substitutions_considered);
        self.push(format!("{name}.facts_derived"), stats.facts_derived);
        self.push(format!("{name}.time_ms"), format!("{:.3}", time.as_secs_f64() * 1e3));
    }

    /// Module assignment per rule and sizes of E and I.
    pub fn state(&mut self, state: &MaterialisationState) {
        self.push("mode", state.config.mode);
        self.push("rules", state.rules.len());
        for r in &state.rules {
            self.push(format!("rule.r{}", r.rule.id), r.module);
        }
        self.push("explicit", state.explicit.len());
        self.push("facts", state.len());
        self.push("derived", state.len() - state.explicit.len());
    }

    /// Phase counters of an update, prefixed by `name`.
    pub fn update(&mut self, name: &str, u: &UpdateReport) {
        self.push(format!("{name}.overdeleted"), u.overdeleted);
        self.push(format!("{name}.rederived"), u.rederived);
        self.push(format!("{name}.added"), u.added);
        self.push(format!("{name}.substitutions_considered"), u.substitutions());
        self.phase(&format!("{name}.delete"), &u.delete, u.delete_time);
        self.phase(&format!("{name}.rederive"), &u.rederive, u.rederive_time);
        self.phase(&format!("{name}.add"), &u.add, u.add_time);
    }

    pub fn to_json(&self) -> Value {
        let map: serde_json::Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| {
                let value = v.parse::<i64>().map(Value::from).or_else(|_| v.parse::<f64>().map(Value::from));
                (k.clone(), value.unwrap_or_else(|_| json!(v)))
            })
            .collect();
        Value::Object(map)
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// One fact per line, in dump order.
pub fn facts_text<'a>(interner: &Interner, facts: impl IntoIterator<Item = &'a hdlog_core::Fact>) -> String {
    let mut out = String::new();
    for f in interner.sorted_facts(facts) {
        writeln!(out, "{}.", interner.display_fact(f)).unwrap();
    }
    out
}
