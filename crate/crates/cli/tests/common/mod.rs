// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wolff-trace"))
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env("WOLFF_TRACE_THREADS", "2").output().expect("binary runs")
}

/// Report with wall-clock fields removed, for byte comparisons.
pub fn strip_timings(stdout: &[u8]) -> String {
    let text = String::from_utf8_lossy(stdout).into_owned();
    let Ok(mut v) = serde_json::from_str::<serde_json::Value>(&text) else {
        return text;
    };
    fn scrub(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                for key in ["timings", "naive_ms", "tree_ms", "speedup"] {
                    m.remove(key);
                }
                m.values_mut().for_each(scrub);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(scrub),
            _ => {}
        }
    }
    scrub(&mut v);
    v.to_string()
}
