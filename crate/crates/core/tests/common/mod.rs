//! Stub evaluator processes speaking the line-delimited JSON protocol.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hord_core::{Domain, EvaluatorSpec, VariableSpec};

const PRELUDE: &str = r#"
import json, sys
handshake = json.loads(sys.stdin.readline())
names = [v["name"] for v in handshake["domain"]]
print(json.dumps({"ready": True}), flush=True)
"#;

/// Answers with the sum of squared coordinates.
pub const SUM: &str = r#"
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"id": req["id"], "f": sum(req["x"][n] ** 2 for n in names)}), flush=True)
"#;

/// Reports an error for its third request only, and logs every id.
pub const ERROR_ONCE: &str = r#"
count = 0
log = open(sys.argv[1], "a")
for line in sys.stdin:
    req = json.loads(line)
    count += 1
    log.write(f"{req['id']}\n")
    log.flush()
    if count == 3:
        print(json.dumps({"id": req["id"], "error": "out of memory"}), flush=True)
    else:
        print(json.dumps({"id": req["id"], "f": sum(req["x"][n] ** 2 for n in names)}), flush=True)
"#;

/// Handshakes, then never answers.
pub const HANG: &str = r#"
import time
for line in sys.stdin:
    time.sleep(3600)
"#;

/// Exits on its first request.
pub const CRASH: &str = r#"
sys.stdin.readline()
sys.exit(7)
"#;

/// Writes garbage instead of a response.
pub const GARBAGE: &str = r#"
for line in sys.stdin:
    print("not json", flush=True)
"#;

pub fn write_stub(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.py"));
    std::fs::write(&path, format!("{PRELUDE}{body}")).unwrap();
    path
}

pub fn stub_spec(script: &Path, extra_args: &[&Path], timeout_s: f64) -> EvaluatorSpec {
    let mut args = vec![script.display().to_string()];
    args.extend(extra_args.iter().map(|p| p.display().to_string()));
    EvaluatorSpec::External {
        command: "python3".into(),
        args,
        timeout_s,
    }
}

pub fn square() -> Domain {
    Domain::new(vec![
        VariableSpec::continuous("a", -2.0, 2.0),
        VariableSpec::integer("b", -3, 3),
    ])
    .unwrap()
}
