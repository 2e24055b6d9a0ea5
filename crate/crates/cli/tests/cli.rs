use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn cvqsdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqsdc"))
        .args(args)
        .env_remove("CVQSDC_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn transcript(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("transcript JSON")
}

fn csv(out: &Output) -> Vec<Vec<f64>> {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn qsdc_delivers_real_and_bit_payloads() {
    let t = transcript(&cvqsdc(&[
        "run",
        "--protocol",
        "qsdc",
        "--mode",
        "expectation",
        "--payload-real",
        "-1.5",
    ]));
    assert_eq!(t["protocol"], "qsdc");
    assert_eq!(t["n"], 64);
    assert!((t["outcome"]["result"]["estimate"].as_f64().unwrap() + 1.5).abs() < 1e-10);

    let t = transcript(&cvqsdc(&[
        "run",
        "--protocol",
        "qsdc",
        "--mode",
        "expectation",
        "--n",
        "32",
        "--payload-bits",
        "1011001",
    ]));
    assert_eq!(t["outcome"]["result"]["bits"], "1011001");
}

#[test]
fn dialogue_and_millionaire_complete() {
    let t = transcript(&cvqsdc(&[
        "run",
        "--protocol",
        "cqd",
        "--mode",
        "expectation",
        "--m-a",
        "1.25",
        "--m-b",
        "-0.5",
        "--w-policy",
        "per-slot-w",
    ]));
    let r = &t["outcome"]["result"];
    assert!((r["bob_recovers_m_a"].as_f64().unwrap() - 1.25).abs() < 1e-10);
    assert!((r["alice_recovers_m_b"].as_f64().unwrap() + 0.5).abs() < 1e-10);

    let t = transcript(&cvqsdc(&[
        "run",
        "--protocol",
        "smp",
        "--assets-a",
        "2",
        "--assets-b",
        "5",
        "--seed",
        "4",
    ]));
    assert_eq!(t["protocol"], "smp");
    assert_eq!(t["outcome"]["result"]["verdict"], "B");
}

#[test]
fn detected_attacks_exit_two() {
    let out = cvqsdc(&[
        "run",
        "--protocol",
        "qsdc",
        "--attack",
        "intercept-measure-resend",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("aborted: "));
    let t: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(t["outcome"]["status"], "aborted");

    let out = cvqsdc(&[
        "run",
        "--protocol",
        "cqd",
        "--attack",
        "participant-charlie",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn undetectable_attack_completes() {
    let t = transcript(&cvqsdc(&[
        "run",
        "--protocol",
        "qsdc",
        "--attack",
        "gqcm",
        "--gain",
        "1",
        "--transmission",
        "1",
        "--seed",
        "8",
    ]));
    assert_eq!(t["attack"]["kind"], "gqcm");
    assert_eq!(t["attack"]["leg"], "bob-alice");
    assert!(t["eavesdropper"].is_object());
}

#[test]
fn bad_input_exits_one() {
    let cases: &[&[&str]] = &[
        &["run", "--protocol", "qsdc", "--attack", "dos", "--leg", "moon"],
        &["run", "--protocol", "qsdc", "--attack", "dos", "--leg", "charlie-alice"],
        &[
            "run",
            "--protocol",
            "cqd",
            "--attack",
            "intercept-measure-resend",
            "--leg",
            "bob-alice",
        ],
        &["run", "--protocol", "smp", "--attack", "dos"],
        &["run", "--protocol", "qsdc", "--n", "10"],
        &[
            "run",
            "--protocol",
            "qsdc",
            "--payload-bits",
            "10",
            "--payload-real",
            "1",
        ],
        &["run", "--protocol", "qsdc", "--attack", "gqcm", "--gain", "0.5"],
        &["run", "--protocol", "smp", "--assets-a", "-1"],
        &["sweep", "--A", "2", "--T", "1:0:0.1", "--g", "0", "--h", "0"],
        &["sweep", "--A", "0.5", "--T", "0.5", "--g", "0", "--h", "0"],
        &["sweep", "--A", "2", "--T", "0.5", "--g", "-1", "--h", "0"],
        &["wigner", "--alpha", "1+i+"],
        &["wigner", "--alpha", "0", "--grid", "0:1:0"],
        &["run", "--config", "/nonexistent/cvqsdc.conf", "--protocol", "qsdc"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = cvqsdc(args);
        assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}

#[test]
fn help_and_version_exit_zero() {
    for args in [
        &["--help"][..],
        &["--version"],
        &["run", "--help"],
        &["sweep", "--help"],
        &["wigner", "--help"],
    ] {
        let out = cvqsdc(args);
        assert_eq!(code(&out), 0, "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(
        &path,
        "# session\nprotocol = qsdc\nmode = expectation\n\nn = 16\npayload-real = 2.0\nseed = 11\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();

    let t = transcript(&cvqsdc(&["run", "--config", p]));
    assert_eq!(t["n"], 16);
    assert_eq!(t["seed"], 11);
    assert!((t["outcome"]["result"]["estimate"].as_f64().unwrap() - 2.0).abs() < 1e-10);

    let t = transcript(&cvqsdc(&[
        "--config",
        p,
        "run",
        "--payload-real",
        "0.5",
        "--seed",
        "12",
    ]));
    assert_eq!(t["seed"], 12);
    assert!((t["outcome"]["result"]["estimate"].as_f64().unwrap() - 0.5).abs() < 1e-10);

    fs::write(&path, "protocol qsdc\n").unwrap();
    assert_eq!(code(&cvqsdc(&["run", "--config", p])), 1);
    fs::write(&path, "protocol = qsdc\nleg = nowhere\n").unwrap();
    assert_eq!(code(&cvqsdc(&["run", "--config", p])), 1);
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvqsdc"));
        cmd.args(["run", "--protocol", "qsdc", "--n", "16"]).args(extra);
        match env {
            Some(v) => cmd.env("CVQSDC_SEED", v),
            None => cmd.env_remove("CVQSDC_SEED"),
        };
        cmd.output().unwrap()
    };
    assert_eq!(transcript(&run(None, &[]))["seed"], 0);
    let from_env = run(Some("77"), &[]);
    assert_eq!(transcript(&from_env)["seed"], 77);
    assert_eq!(from_env.stdout, run(None, &["--seed", "77"]).stdout);
    assert_eq!(transcript(&run(Some("77"), &["--seed", "5"]))["seed"], 5);
    assert_eq!(code(&run(Some("not-a-seed"), &[])), 1);
}

#[test]
fn transmission_sweep_crosses_zero_at_half() {
    let rows = csv(&cvqsdc(&[
        "sweep", "--A", "2", "--T", "0:1:0.01", "--g", "0.5", "--h", "0",
    ]));
    assert_eq!(rows.len(), 101);
    for row in &rows {
        assert_eq!(row.len(), 18);
        let (t, dx) = (row[1], row[16]);
        if (t - 0.5).abs() < 1e-9 {
            assert!(dx.abs() < 1e-12);
        } else {
            assert_eq!(dx > 0.0, t > 0.5, "T={t} dI_X={dx}");
        }
    }
}

#[test]
fn sweep_writes_header_and_grid_order() {
    let out = cvqsdc(&["sweep", "--A", "1:2:1", "--T", "0.8", "--g", "0:1:0.5", "--h", "0:3:3"]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.starts_with("A,T,g,h,M_XB,"));
    let rows = csv(&out);
    assert_eq!(rows.len(), 2 * 3 * 2);
    assert_eq!(&rows[1][..4], &[1.0, 0.8, 0.0, 3.0]);
    assert_eq!(&rows[2][..4], &[1.0, 0.8, 0.5, 0.0]);
    assert_eq!(rows[11][0], 2.0);
}

#[test]
fn wigner_peaks_at_the_coherent_amplitude() {
    let rows = csv(&cvqsdc(&["wigner", "--alpha", "1.2+2.1i"]));
    assert_eq!(rows.len(), 201 * 201);
    let peak = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((peak[0] - 1.2).abs() < 1e-9 && (peak[1] - 2.1).abs() < 1e-9, "{peak:?}");
}

#[test]
fn squeezing_reshapes_the_wigner_function() {
    let r = 0.5f64;
    let rows = csv(&cvqsdc(&[
        "wigner",
        "--alpha",
        "0",
        "--squeeze-r",
        "0.5",
        "--squeeze-theta",
        "0",
        "--x-grid",
        "-4:4:0.02",
        "--p-grid",
        "-6:6:0.02",
    ]));
    let area = 0.02 * 0.02;
    let total: f64 = rows.iter().map(|v| v[2]).sum::<f64>() * area;
    let vx: f64 = rows.iter().map(|v| v[0] * v[0] * v[2]).sum::<f64>() * area;
    let vp: f64 = rows.iter().map(|v| v[1] * v[1] * v[2]).sum::<f64>() * area;
    assert!((total - 1.0).abs() < 1e-3);
    assert!((vx - 0.25 * (-2.0 * r).exp()).abs() < 1e-3, "Var X {vx}");
    assert!((vp - 0.25 * (2.0 * r).exp()).abs() < 1e-3, "Var P {vp}");
}

#[test]
fn out_flag_matches_stdout_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &[
            "run",
            "--protocol",
            "cqd",
            "--seed",
            "21",
            "--attack",
            "gqcm",
            "--gain",
            "1.5",
            "--transmission",
            "0.6",
        ],
        &["sweep", "--A", "1:3:1", "--T", "0.3", "--g", "0.2", "--h", "0:1:0.5"],
        &["wigner", "--alpha", "-0.5+0.25i", "--grid", "-2:2:0.5"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let path = dir.path().join(format!("out{i}"));
        let mut with_out = args.to_vec();
        with_out.extend(["--out", path.to_str().unwrap()]);
        let written = cvqsdc(&with_out);
        assert_eq!(code(&written), 0);
        assert!(written.stdout.is_empty());
        assert_eq!(fs::read(&path).unwrap(), cvqsdc(args).stdout, "{args:?}");
    }
}
