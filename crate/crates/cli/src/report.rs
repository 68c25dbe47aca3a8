use std::time::Duration;

use serde_json::{json, Map, Value};

use absorber_core::Error;

pub const EXIT_YES: u8 = 0;
pub const EXIT_NO: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CAP: u8 = 3;

/// Outcome of one command: the JSON fields plus a human rendering.
#[derive(Debug)]
pub struct Report {
    pub command: Value,
    pub verdict: String,
    pub witness: Value,
    pub caps: Vec<String>,
    pub counters: Map<String, Value>,
    pub error: Option<String>,
    pub lines: Vec<String>,
    pub exit: u8,
}

impl Report {
    pub fn new(command: Value) -> Self {
        Report {
            command,
            verdict: String::new(),
            witness: Value::Null,
            caps: Vec::new(),
            counters: Map::new(),
            error: None,
            lines: Vec::new(),
            exit: EXIT_YES,
        }
    }

    pub fn decide(&mut self, yes: bool, yes_word: &str, no_word: &str) {
        self.verdict = if yes { yes_word } else { no_word }.to_string();
        self.exit = if yes { EXIT_YES } else { EXIT_NO };
    }

    pub fn counter(&mut self, key: &str, value: impl Into<Value>) {
        self.counters.insert(key.to_string(), value.into());
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn fail(mut self, err: anyhow::Error) -> Self {
        let capped = err.downcast_ref::<Error>().is_some_and(Error::is_cap);
        if capped {
            self.verdict = "capped".into();
            self.exit = EXIT_CAP;
            self.caps.push(err.to_string());
        } else {
            self.verdict = "input_error".into();
            self.exit = EXIT_INPUT;
        }
        self.error = Some(format!("{err:#}"));
        self
    }

    pub fn to_json(&self, elapsed: Duration) -> Value {
        let mut v = json!({
            "command": self.command,
            "verdict": self.verdict,
            "witness": self.witness,
            "caps": self.caps,
            "counters": self.counters,
            "wall_time_ms": elapsed.as_millis() as u64,
        });
        if let Some(e) = &self.error {
            v["error"] = json!(e);
        }
        v
    }

    pub fn print(&self, json: bool, elapsed: Duration) {
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&self.to_json(elapsed)).unwrap()
            );
            return;
        }
        if let Some(e) = &self.error {
            eprintln!("error: {e}");
            if self.exit == EXIT_INPUT {
                return;
            }
        }
        println!("{}", self.verdict);
        for l in &self.lines {
            println!("{l}");
        }
        for (k, v) in &self.counters {
            println!("{k}: {v}");
        }
        for c in &self.caps {
            println!("cap: {c}");
        }
    }
}
