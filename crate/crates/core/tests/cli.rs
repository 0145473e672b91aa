use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::thread;
use std::time::Duration;

use serde_json::Value;

fn qstore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qstore"))
        .args(args)
        .env_remove("QPS_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad report ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn write_program(dir: &Path) -> String {
    let path = dir.join("prog.txt");
    std::fs::write(
        &path,
        "# demo\nqubits 3\nX 1\nJ 1,3 0.7\nJ 2 -1.3\nJ 1,2,3 2.2\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

/// Runs `connect`, retrying while the server is not yet listening.
fn connect_when_ready(args: &[&str]) -> Output {
    for _ in 0..100 {
        let out = qstore(args);
        if out.status.code() != Some(3) {
            return out;
        }
        thread::sleep(Duration::from_millis(50));
    }
    panic!("server never came up");
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn retrieve_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = qstore(&[
            "retrieve",
            "--generator",
            "z:1,3",
            "--qubits",
            "3",
            "--theta",
            "0.9",
            "--seed",
            "11",
            "--report",
            path.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["command"], "retrieve");
    assert_eq!(v["seed"], 11);
    assert_eq!(v["success"], true);
    assert!(v["fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
    assert_eq!(v["config"]["qubits"], 3);
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["retrieve", "--generator", "ps:2", "--theta", "1.3"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_qstore"))
        .args(args)
        .env("QPS_SEED", "42")
        .output()
        .unwrap();
    let with_flag = qstore(&[&args[..], &["--seed", "42"]].concat());
    assert_eq!(report(&with_env)["seed"], 42);
    assert_eq!(with_env.stdout, with_flag.stdout);
}

#[test]
fn exhausted_retrieval_exits_one_with_residual() {
    // find a seed whose first attempt fails, then cap at one attempt
    let seed = (0..64)
        .find(|s| {
            let out = qstore(&[
                "retrieve",
                "--generator",
                "z:1",
                "--theta",
                "0.5",
                "--seed",
                &s.to_string(),
            ]);
            report(&out)["attempts"] != 1
        })
        .expect("some seed fails first");
    let out = qstore(&[
        "retrieve",
        "--generator",
        "z:1",
        "--theta",
        "0.5",
        "--seed",
        &seed.to_string(),
        "--max-attempts",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = report(&out);
    assert_eq!(v["success"], false);
    assert_eq!(v["residual_angle"].as_f64().unwrap(), -0.5);
    assert!(v["residual_fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["retrieve", "--generator", "q:1", "--theta", "1"][..],
        &["retrieve", "--generator", "z:1", "--theta", "nan"],
        &[
            "retrieve",
            "--generator",
            "z:4",
            "--qubits",
            "2",
            "--theta",
            "1",
        ],
        &["retrieve", "--theta", "1"],
        &[
            "retrieve",
            "--generator",
            "z:1",
            "--theta",
            "1",
            "--data",
            "basis:9",
        ],
        &[
            "montecarlo",
            "--generator",
            "z:1",
            "--theta",
            "1",
            "--trials",
            "0",
        ],
        &["protocol", "loopback", "--program", "/nonexistent/prog.txt"],
        &["frobnicate"],
    ] {
        let out = qstore(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn montecarlo_self_check() {
    let out = qstore(&[
        "montecarlo",
        "--generator",
        "z:1,2",
        "--theta",
        "0.4",
        "--trials",
        "20000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["stats"]["trials"], 20000);
    assert_eq!(v["self_check"]["passed"], true);
    let mean = v["stats"]["mean_attempts"].as_f64().unwrap();
    assert!((mean - 2.0).abs() < 0.05);
}

#[test]
fn verify_passes() {
    let out = qstore(&["verify", "--qubits", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn serve_and_connect_match_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let addr = format!("127.0.0.1:{}", free_port());

    let serve_addr = addr.clone();
    let bob = thread::spawn(move || {
        qstore(&[
            "protocol",
            "serve",
            "--listen",
            &serve_addr,
            "--qubits",
            "3",
            "--seed",
            "8",
        ])
    });
    let alice = connect_when_ready(&[
        "protocol",
        "connect",
        "--connect",
        &addr,
        "--program",
        &program,
        "--seed",
        "8",
    ]);
    let bob = bob.join().unwrap();
    assert_eq!(
        alice.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&alice.stderr)
    );
    assert_eq!(
        bob.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&bob.stderr)
    );

    let local = qstore(&["protocol", "loopback", "--program", &program, "--seed", "8"]);
    assert_eq!(local.status.code(), Some(0));
    let (alice, bob, local) = (report(&alice), report(&bob), report(&local));
    assert_eq!(alice["transcript"], local["transcript"]);
    assert_eq!(bob["transcript"], local["transcript"]);
    assert_eq!(bob["final_state"], local["final_state"]);
    assert!(local["fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
}

#[test]
fn connection_refused_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let addr = format!("127.0.0.1:{}", free_port());
    let out = qstore(&[
        "protocol",
        "connect",
        "--connect",
        &addr,
        "--program",
        &program,
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn width_mismatch_is_a_protocol_violation() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let addr = format!("127.0.0.1:{}", free_port());
    let serve_addr = addr.clone();
    let bob = thread::spawn(move || {
        qstore(&[
            "protocol",
            "serve",
            "--listen",
            &serve_addr,
            "--qubits",
            "2",
        ])
    });
    let alice = connect_when_ready(&[
        "protocol",
        "connect",
        "--connect",
        &addr,
        "--program",
        &program,
    ]);
    let bob = bob.join().unwrap();
    assert_eq!(
        alice.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&alice.stderr)
    );
    assert_eq!(bob.status.code(), Some(4));
    assert_eq!(report(&bob)["completed"], false);
}

#[test]
fn retry_limit_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.txt");
    std::fs::write(&path, "J 1 0.5\n").unwrap();
    let path = path.to_str().unwrap();
    let seed = (0..64)
        .find(|s| {
            let out = qstore(&[
                "protocol",
                "loopback",
                "--program",
                path,
                "--seed",
                &s.to_string(),
            ]);
            report(&out)["angle_states_sent"] != 1
        })
        .unwrap();
    let out = qstore(&[
        "protocol",
        "loopback",
        "--program",
        path,
        "--seed",
        &seed.to_string(),
        "--max-attempts",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
}
