use std::process::{Command, Output};

fn divsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divsum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn dense_hand_trace() {
    let o = divsum(&["dense", "--target", "1", "--eps", "0.25", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["q"], "7");
    assert_eq!(v["bootstrap_primes"], serde_json::json!(["2"]));
}

#[test]
fn sieve_twelve_rows() {
    let o = divsum(&["sieve", "--limit", "12", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "n,sigma,s,S_sigma,S_s,phi");
    assert_eq!(lines.len(), 13);
    let last: Vec<u64> = lines[12].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(last[0], 12);
    assert_eq!(last[4], 27);
}

#[test]
fn verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let path = path.to_str().unwrap();
    let o = divsum(&["dense", "--target", "2718281828/1000000000", "--eps", "1e-6", "--format", "json", "--out", path]);
    assert_eq!(o.status.code(), Some(0));
    let o = divsum(&["verify", "--cert", path]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("ok:"));

    // Change one prime in the transcript.
    let text = std::fs::read_to_string(path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["steps"][0]["q"] = serde_json::json!("4");
    std::fs::write(path, v.to_string()).unwrap();
    let o = divsum(&["verify", "--cert", path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("failed:"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: &[&[&str]] = &[
        &["sieve", "--limit", "2000"],
        &["sieve", "--limit", "50", "--format", "json"],
        &["edf", "--limit", "5000", "--grid", "0:3:0.1"],
        &["edf", "--limit", "5000", "--eps", "0.01,0.001"],
        &["dense", "--target", "10", "--eps", "1e-6", "--format", "json"],
        &["mean", "--checkpoints", "decades:2:5"],
        &["mean", "--limit", "1e5", "--format", "json"],
        &["moments", "--k", "3", "--limit", "1e4", "--euler-primes", "1e4", "--format", "json"],
        &["moments", "--kmax", "4", "--limit", "1e4"],
        &["series", "--function", "log_sigma", "--limit", "1e5"],
        &["series", "--wintner", "--k", "2", "--j", "1", "--limit", "1e5", "--format", "json"],
    ];
    for args in cases {
        let a = divsum(args);
        let b = divsum(&[args, &["--threads", "2"][..]].concat());
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert!(!a.stdout.is_empty(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn help_lists_emitted_headers() {
    let cases: &[(&str, &[&str], &str)] = &[
        ("sieve", &["--limit", "5"], "n,sigma,s,S_sigma,S_s,phi"),
        ("edf", &["--limit", "5"], "x,F_N"),
        ("edf", &["--limit", "5", "--eps", "0.1"], "epsilon,max_window_density,argmax_center"),
        ("dense", &["--target", "1", "--eps", "0.1"], "step,B,q,ratio,gap"),
        ("mean", &["--limit", "10"], "x,statistic,partial_sum,mean,limit,normalized_error"),
        ("moments", &["--k", "1", "--limit", "10", "--euler-primes", "100"], "j,binom,sign,mean,tail"),
        ("moments", &["--kmax", "4", "--limit", "100"], "k,mu_k,loglog_ratio,carleman_ratio,stability,phi_moment_2k,phi_bound"),
        ("series", &["--limit", "100"], "series,bound,partial_sum,trend"),
    ];
    for (cmd, args, header) in cases {
        let help = stdout(&divsum(&[cmd, "--help"]));
        assert!(help.contains(header), "{cmd} help lacks {header}");
        let o = divsum(&[&[*cmd][..], args].concat());
        assert_eq!(o.status.code(), Some(0), "{cmd} {args:?}");
        assert_eq!(stdout(&o).lines().next(), Some(*header), "{cmd} {args:?}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(divsum(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(divsum(&["sieve"]).status.code(), Some(2));
    assert_eq!(divsum(&["sieve", "--limit", "12", "--bogus"]).status.code(), Some(2));
    assert_eq!(divsum(&["sieve", "--limit", "1.5"]).status.code(), Some(2));
    assert_eq!(divsum(&["series", "--function", "log_phi"]).status.code(), Some(2));
    assert_eq!(divsum(&["dense", "--target", "1", "--eps", "0"]).status.code(), Some(2));
    assert_eq!(divsum(&["verify", "--cert", "/nonexistent/cert.json"]).status.code(), Some(2));
    // An inner sum truncated far too early is a computation failure.
    assert_eq!(
        divsum(&["moments", "--k", "3", "--limit", "100", "--euler-nu", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(divsum(&["--help"]).status.code(), Some(0));
}

#[test]
fn scientific_notation_limits() {
    let a = divsum(&["mean", "--limit", "1e3"]);
    let b = divsum(&["mean", "--limit", "1000"]);
    assert_eq!(a.stdout, b.stdout);
}
