//! Minimal protocol plugin that forecasts the last input value of the
//! first history channel. Used by the test-suite and as a template.
//!
//! Flags:
//!   --reply-version N   announce protocol version N in the handshake
//!   --silent            never answer the handshake
//!   --wrong-length      return one value too many
//!   --size N            declared model size in bytes

use std::io::{BufRead, Write};

use serde_json::{json, Value};

fn main() {
    let mut version = 1u64;
    let mut silent = false;
    let mut wrong_length = false;
    let mut size = 1u64;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--reply-version" => version = args.next().and_then(|v| v.parse().ok()).unwrap_or(1),
            "--size" => size = args.next().and_then(|v| v.parse().ok()).unwrap_or(1),
            "--silent" => silent = true,
            "--wrong-length" => wrong_length = true,
            other => {
                eprintln!("unknown flag {other}");
                std::process::exit(2);
            }
        }
    }

    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(msg) if msg.get("hello").is_some() => {
                if silent {
                    continue;
                }
                json!({"capabilities": {
                    "version": version,
                    "supports_future_covariates": true,
                    "model_size_bytes": size,
                }})
            }
            Ok(msg) => match msg.get("predict") {
                Some(req) => predict(req, wrong_length),
                None => json!({"error": {"seq": null, "message": "unknown message"}}),
            },
            Err(e) => json!({"error": {"seq": null, "message": format!("malformed line: {e}")}}),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}

fn predict(req: &Value, wrong_length: bool) -> Value {
    let seq = req.get("seq").cloned().unwrap_or(Value::Null);
    let last = req
        .get("inputs")
        .and_then(Value::as_array)
        .and_then(|rows| rows.last())
        .and_then(|row| row.get(0))
        .and_then(Value::as_f64);
    let horizon = req
        .pointer("/layout/horizon")
        .and_then(Value::as_u64)
        .map(|h| h as usize);
    match (last, horizon) {
        (Some(v), Some(h)) => {
            let n = if wrong_length { h + 1 } else { h };
            json!({"prediction": {"seq": seq, "values": vec![v; n]}})
        }
        _ => json!({"error": {"seq": seq, "message": "missing inputs or horizon"}}),
    }
}
