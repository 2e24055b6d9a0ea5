//! Acceptance gate. Runs every exit criterion at its pinned tolerance, prints
//! one line per criterion and fails the target if any criterion fails.
//!
//! Run with `cargo test -p cvqsdc-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use cvqsdc_core::attacks::gqcm_clone;
use cvqsdc_core::encoding::symbol_error_rate;
use cvqsdc_core::gaussian::{commute_ds, commute_sd_inverse, displace, squeeze, vacuum, wigner};
use cvqsdc_core::protocols::{
    run_cqd, run_qsdc, run_socialist_millionaire, Decoded, PrepDistribution, QsdcMessage, Verdict, WPolicy,
};
use cvqsdc_core::security::{delta_i, delta_i_with, monte_carlo_variances, variances, BogoliubovCoeffs};
use cvqsdc_core::{
    rng_from_seed, AttackKind, Complex64, CqdConfig, EncoderConfig, GaussianState, GqcmParams, Leg, MeasurementMode,
    PhaseGrid, QsdcConfig, SqueezeParam, SweepRange, Transcript,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_operator_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(0xA1);
    let mut round_trip = 0.0f64;
    let mut order = 0.0f64;
    for _ in 0..10_000 {
        let alpha = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let s = SqueezeParam::new(rng.random_range(0.0..2.0), rng.random_range(0.0..TAU)).unwrap();
        let back = commute_sd_inverse(commute_ds(alpha, s), s);
        round_trip = round_trip.max((back - alpha).norm());

        let base = SqueezeParam::new(rng.random_range(0.0..1.5), rng.random_range(0.0..TAU)).unwrap();
        let psi = squeeze(
            &displace(
                &vacuum(),
                Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            ),
            base,
        );
        let s_then_d = squeeze(&displace(&psi, alpha), s);
        let d_then_s = displace(&squeeze(&psi, s), commute_ds(alpha, s));
        let diff = (s_then_d.mean() - d_then_s.mean())
            .abs()
            .max()
            .max((s_then_d.cov() - d_then_s.cov()).abs().max());
        order = order.max(diff);
    }
    let elapsed = start.elapsed();
    outcome(
        round_trip <= 1e-10 && order <= 1e-10 && within(elapsed, 1.0),
        format!("max round-trip error {round_trip:.2e}, max operator-order error {order:.2e}, {elapsed:.2?}"),
    )
}

fn c2_gqcm_identity() -> Outcome {
    let params = GqcmParams::new(1.0, 1.0).unwrap();
    let inputs = [
        vacuum(),
        GaussianState::coherent(Complex64::new(1.2, -0.7)),
        squeeze(
            &displace(&vacuum(), Complex64::new(-2.0, 0.3)),
            SqueezeParam::new(0.8, 1.1).unwrap(),
        ),
    ];
    let ok = inputs.iter().all(|input| {
        let clone = gqcm_clone(input, &params).unwrap();
        let bob = clone.bob().unwrap();
        let eve = clone.eve().unwrap();
        bob.mean() == input.mean()
            && bob.cov() == input.cov()
            && eve.mean() == vacuum().mean()
            && eve.cov() == vacuum().cov()
    });
    outcome(ok, "Bob ≡ input, Eve ≡ vacuum on 3 inputs, exact equality")
}

fn c3_variance_oracle() -> Outcome {
    const SAMPLES: usize = 100_000;
    const SEED: u64 = 0xC3;
    let start = Instant::now();
    let mut points = Vec::new();
    for a in [1.0, 2.0, 5.0] {
        for t in [0.2, 0.5, 0.8] {
            for g in [0.0, 0.5, 1.0] {
                for h in [0.0, FRAC_PI_2, PI] {
                    points.push((a, t, g, h));
                }
            }
        }
    }
    // Common random numbers: every grid point reuses the same stream.
    let worst: Vec<(f64, (f64, f64, f64, f64))> = points
        .par_iter()
        .map(|&(a, t, g, h)| {
            let analytic = variances(a, t, g, h).unwrap().totals();
            let sampled = monte_carlo_variances(a, t, g, h, SAMPLES, &mut rng_from_seed(SEED))
                .unwrap()
                .as_array();
            let z = analytic
                .iter()
                .zip(sampled)
                .map(|(&v, s)| {
                    let se = v * (2.0 / (SAMPLES as f64 - 1.0)).sqrt();
                    (s - v).abs() / se
                })
                .fold(0.0, f64::max);
            (z, (a, t, g, h))
        })
        .collect();
    let (z, at) = worst
        .iter()
        .copied()
        .fold((0.0, (0.0, 0.0, 0.0, 0.0)), |acc, w| if w.0 > acc.0 { w } else { acc });
    let failing = worst.iter().filter(|w| w.0 > 3.0).count();
    let elapsed = start.elapsed();
    outcome(
        failing == 0 && within(elapsed, 60.0),
        format!(
            "{} comparisons, {failing} points beyond 3 SE, worst {z:.2} SE at (A,T,g,h)={at:?}, {elapsed:.2?}",
            4 * points.len()
        ),
    )
}

fn dense(start: f64, stop: f64, step: f64) -> Vec<f64> {
    SweepRange::new(start, stop, step).unwrap().values()
}

fn coeffs_at(g: f64, h: f64) -> BogoliubovCoeffs {
    let phase = Complex64::from_polar(1.0, h);
    BogoliubovCoeffs {
        m: g.cosh() - phase * g.sinh(),
        n: g.cosh() + phase * g.sinh(),
    }
}

fn c4_security_identities() -> Vec<(&'static str, Outcome)> {
    const TOL: f64 = 1e-12;
    let gains = [1.0, 2.0, 5.0];
    let transmissions = [0.2, 0.5, 0.8];
    let gs = dense(0.0, 2.0, 0.05);
    let hs = dense(0.0, TAU, PI / 36.0);
    let mut out = Vec::new();

    let start = Instant::now();
    let mut worst = 0.0f64;
    for &a in &gains {
        for &g in &gs {
            for &h in &hs {
                let d = delta_i(a, 0.5, g, h).unwrap();
                worst = worst.max(d.delta_x.abs()).max(d.delta_p.abs());
            }
        }
    }
    out.push(("4a", outcome(worst <= TOL, format!("max |ΔI| at T=1/2: {worst:.2e}"))));

    // The other side of the parity identity evaluates the coefficients at −g directly.
    let mut worst = 0.0f64;
    for &a in &gains {
        for &t in &transmissions {
            for &g in &gs {
                for &h in &hs {
                    let at_g = delta_i(a, t, g, h).unwrap();
                    let at_minus_g = delta_i_with(a, t, &coeffs_at(-g, h)).unwrap();
                    worst = worst.max((at_g.delta_p - at_minus_g.delta_x).abs());
                }
            }
        }
    }
    out.push((
        "4b",
        outcome(worst <= TOL, format!("max |ΔI_P(g) − ΔI_X(−g)|: {worst:.2e}")),
    ));

    let mut worst = 0.0f64;
    for &a in &gains {
        for &t in &transmissions {
            for &g in &gs {
                for &h in &hs {
                    let d = delta_i(a, t, g, h).unwrap();
                    let r = delta_i(a, t, g, TAU - h).unwrap();
                    worst = worst
                        .max((d.delta_x - r.delta_x).abs())
                        .max((d.delta_p - r.delta_p).abs());
                }
            }
        }
    }
    out.push((
        "4c",
        outcome(worst <= TOL, format!("max |ΔI(h) − ΔI(2π−h)|: {worst:.2e}")),
    ));

    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for a in dense(1.0, 5.0, 0.5) {
        for t in dense(0.0, 1.0, 0.01) {
            for &g in &[0.0, 0.5, 1.0, 1.5] {
                for &h in &hs {
                    let dx = delta_i(a, t, g, h).unwrap().delta_x;
                    checked += 1;
                    let ok = if (t - 0.5).abs() < 1e-12 {
                        dx.abs() <= TOL
                    } else {
                        dx.abs() > TOL && dx.signum() == (t - 0.5).signum()
                    };
                    if !ok {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    out.push((
        "4d",
        outcome(
            mismatches == 0,
            format!("{mismatches} sign mismatches over {checked} points"),
        ),
    ));

    let mut violations = 0usize;
    let mut smallest_drop = f64::INFINITY;
    for &g in &[0.0, 0.5, 1.0] {
        for &h in &hs {
            let curve: Vec<f64> = dense(1.0, 5.0, 0.05)
                .into_iter()
                .map(|a| delta_i(a, 0.8, g, h).unwrap().delta_x)
                .collect();
            for w in curve.windows(2) {
                smallest_drop = smallest_drop.min(w[0] - w[1]);
                if w[1] >= w[0] {
                    violations += 1;
                }
            }
        }
    }
    out.push((
        "4e",
        outcome(
            violations == 0,
            format!("{violations} non-decreasing steps in A at T=0.8, smallest drop {smallest_drop:.2e}"),
        ),
    ));

    let curve: Vec<(f64, f64)> = dense(0.0, 3.0, 0.01)
        .into_iter()
        .map(|g| (g, delta_i(2.0, 0.8, g, FRAC_PI_2).unwrap().delta_x))
        .collect();
    let peak = curve
        .windows(3)
        .find(|w| w[1].1 > w[0].1 + TOL && w[1].1 > w[2].1 + TOL)
        .map(|w| w[1]);
    let (argmax, max) = curve
        .iter()
        .copied()
        .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let elapsed = start.elapsed();
    out.push((
        "4f",
        outcome(
            peak.is_some() && within(elapsed, 10.0),
            match peak {
                Some((g, v)) => format!("interior maximum ΔI_X={v:.6} at g={g}"),
                None => {
                    format!("no interior maximum on g∈[0,3] at (A=2,T=0.8,h=π/2); largest ΔI_X={max:.6} at g={argmax}")
                }
            },
        ),
    ));
    out.push(("4 runtime", outcome(within(elapsed, 10.0), format!("{elapsed:.2?}"))));
    out
}

fn decoded_bits(t: &Transcript) -> Option<(String, bool)> {
    match t.decoded()? {
        Decoded::Symbols { bits, slots, .. } => Some((bits.clone(), slots.iter().all(|s| s.sent == s.decoded))),
        _ => None,
    }
}

fn c5_round_trips() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut qsdc_runs = 0;
    let bits_of = |v: usize, width: usize| format!("{v:0width$b}");
    for n in [8usize, 64] {
        let cfg = QsdcConfig::new(n, MeasurementMode::Expectation, n as u64);
        let mut payloads: Vec<String> = (0..64).map(|v| bits_of(v, 6)).collect();
        payloads.extend((0..8).map(|v| bits_of(v, 3)));
        if n == 64 {
            let mut rng = rng_from_seed(5);
            payloads.extend((0..32).map(|_| (0..48).map(|_| if rng.random::<bool>() { '1' } else { '0' }).collect()));
        }
        for (k, bits) in payloads.iter().enumerate() {
            let cfg = QsdcConfig { seed: k as u64, ..cfg };
            let t = run_qsdc(&cfg, &QsdcMessage::Bits(bits.clone()), &AttackKind::None).unwrap();
            qsdc_runs += 1;
            match decoded_bits(&t) {
                Some((out, true)) if &out == bits => {}
                other => failures.push(format!("qsdc n={n} {bits}: {other:?}")),
            }
        }
    }

    let mut cqd_err = 0.0f64;
    for (k, (m_a, m_b)) in [(2.5, -1.0), (0.0, 0.0), (-3.25, 1.5), (0.1, 4.0)]
        .into_iter()
        .enumerate()
    {
        for w_policy in [WPolicy::SharedW, WPolicy::PerSlotW] {
            let cfg = CqdConfig {
                w_policy,
                ..CqdConfig::new(8, MeasurementMode::Expectation, k as u64)
            };
            let t = run_cqd(&cfg, m_a, m_b, &AttackKind::None).unwrap();
            match t.decoded() {
                Some(Decoded::Dialogue {
                    announced,
                    alice_recovers_m_b,
                    bob_recovers_m_a,
                }) => {
                    let target = Complex64::new(m_a + m_b, m_a + m_b);
                    for v in announced {
                        cqd_err = cqd_err.max((v.value - target).norm());
                    }
                    cqd_err = cqd_err
                        .max((alice_recovers_m_b - m_b).abs())
                        .max((bob_recovers_m_a - m_a).abs());
                }
                other => failures.push(format!("cqd ({m_a},{m_b}): {other:?}")),
            }
        }
    }
    if cqd_err > 1e-10 {
        failures.push(format!("cqd error {cqd_err:.2e}"));
    }

    for (a, b, want) in [
        (5.0, 3.0, Verdict::A),
        (3.0, 5.0, Verdict::B),
        (4.0, 4.0, Verdict::TieUndetermined),
    ] {
        let t = run_socialist_millionaire(a, b, &CqdConfig::new(8, MeasurementMode::Expectation, 1)).unwrap();
        match t.decoded() {
            Some(Decoded::Millionaire { verdict, .. }) if *verdict == want => {}
            other => failures.push(format!("smp ({a},{b}): {other:?}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, 5.0),
        format!(
            "{qsdc_runs} qsdc payloads, cqd max error {cqd_err:.2e}, 3 smp verdicts, {elapsed:.2?}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {failures:?}")
            }
        ),
    )
}

fn rate(runs: usize, f: impl Fn(u64) -> bool + Sync) -> f64 {
    let hits = (0..runs as u64).into_par_iter().filter(|&seed| f(seed)).count();
    hits as f64 / runs as f64
}

fn c6_detection() -> Vec<(&'static str, Outcome)> {
    const RUNS: usize = 500;
    let start = Instant::now();
    let qsdc = |seed| QsdcConfig::new(64, MeasurementMode::Sampled, seed);
    let cqd = |seed| CqdConfig::new(64, MeasurementMode::Sampled, seed);
    let message = QsdcMessage::Bits("101011".into());

    let imr = rate(RUNS, |seed| {
        let attack = AttackKind::InterceptMeasureResend { leg: Leg::BobAlice };
        run_qsdc(&qsdc(seed), &message, &attack).unwrap().is_aborted()
    });
    let dos = rate(RUNS, |seed| {
        let attack = AttackKind::DenialOfService {
            leg: Leg::AliceBob,
            amplitude_scale: 2.0,
        };
        run_qsdc(&qsdc(seed), &message, &attack).unwrap().is_aborted()
    });
    let charlie = rate(RUNS, |seed| {
        run_cqd(&cqd(seed), 1.0, -0.5, &AttackKind::ParticipantCharlie)
            .unwrap()
            .is_aborted()
    });
    let honest_qsdc = rate(RUNS, |seed| {
        run_qsdc(&qsdc(seed), &message, &AttackKind::None).unwrap().is_aborted()
    });
    let honest_cqd = rate(RUNS, |seed| {
        run_cqd(&cqd(seed), 1.0, -0.5, &AttackKind::None).unwrap().is_aborted()
    });
    let elapsed = start.elapsed();
    vec![
        (
            "6 imr",
            outcome(
                imr >= 0.99,
                format!("intercept-measure-resend on bob-alice detected {:.1}%", 100.0 * imr),
            ),
        ),
        (
            "6 dos",
            outcome(
                dos >= 0.99,
                format!("denial of service on alice-bob detected {:.1}%", 100.0 * dos),
            ),
        ),
        (
            "6 charlie",
            outcome(
                charlie >= 0.99,
                format!("participant Charlie (shared w) detected {:.1}%", 100.0 * charlie),
            ),
        ),
        (
            "6 honest",
            outcome(
                honest_qsdc <= 0.01 && honest_cqd <= 0.01,
                format!(
                    "false aborts qsdc {:.1}%, cqd {:.1}%",
                    100.0 * honest_qsdc,
                    100.0 * honest_cqd
                ),
            ),
        ),
        ("6 runtime", outcome(within(elapsed, 180.0), format!("{elapsed:.2?}"))),
    ]
}

fn c7_decode_noise() -> Outcome {
    const SLOTS: usize = 100_000;
    const N: usize = 4000;
    let start = Instant::now();
    let encoder = EncoderConfig::default();
    let expected = symbol_error_rate(&encoder, 0.25).unwrap();
    // Without squeezing Bob's estimate carries exactly the homodyne variance 1/4.
    let prep = PrepDistribution {
        squeeze_max: 0.0,
        ..PrepDistribution::default()
    };
    let runs = SLOTS / (N / 4);
    let per_run: Vec<(usize, usize)> = (0..runs as u64 + 20)
        .into_par_iter()
        .filter_map(|seed| {
            let cfg = QsdcConfig {
                prep,
                encoder,
                ..QsdcConfig::new(N, MeasurementMode::Sampled, seed)
            };
            let mut rng = rng_from_seed(seed ^ 0x7777);
            let bits: String = (0..3 * N / 4)
                .map(|_| if rng.random::<bool>() { '1' } else { '0' })
                .collect();
            let t = run_qsdc(&cfg, &QsdcMessage::Bits(bits), &AttackKind::None).unwrap();
            match t.decoded()? {
                Decoded::Symbols { slots, .. } => {
                    Some((slots.len(), slots.iter().filter(|s| s.decoded != s.sent).count()))
                }
                _ => None,
            }
        })
        .collect();
    let (mut slots, mut errors) = (0, 0);
    for (s, e) in per_run {
        if slots >= SLOTS {
            break;
        }
        slots += s;
        errors += e;
    }
    let p = errors as f64 / slots as f64;
    let se = (expected * (1.0 - expected) / slots as f64).sqrt();
    let z = (p - expected) / se;
    let elapsed = start.elapsed();
    outcome(
        slots >= SLOTS && z.abs() <= 3.0 && within(elapsed, 30.0),
        format!("{slots} slots, empirical {p:.5} vs integrated {expected:.5} ({z:+.2} SE), {elapsed:.2?}"),
    )
}

fn c8_wigner() -> Outcome {
    let grid = PhaseGrid::square(SweepRange::new(-4.0, 6.0, 0.05).unwrap());
    let field = wigner(&GaussianState::coherent(Complex64::new(1.2, 2.1)), &grid).unwrap();
    let (x, p, _) = field.argmax();
    let norm = field.integral();
    let vac_grid = PhaseGrid::square(SweepRange::new(-3.0, 3.0, 0.5).unwrap());
    let vac = wigner(&vacuum(), &vac_grid).unwrap();
    let peak = vac.argmax().2;
    let ok =
        (x - 1.2).abs() < 1e-9 && (p - 2.1).abs() < 1e-9 && (norm - 1.0).abs() < 1e-3 && (peak - 2.0 / PI).abs() < 1e-9;
    outcome(
        ok,
        format!(
            "argmax ({x:.3}, {p:.3}), normalisation {norm:.6}, vacuum peak error {:.1e}",
            (peak - 2.0 / PI).abs()
        ),
    )
}

fn cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_cvqsdc"))
        .args(args)
        .env_remove("CVQSDC_SEED")
        .output()
        .expect("cli runs");
    (out.status.code(), out.stdout)
}

fn c9_determinism(dir: &Path) -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "run",
            "--protocol",
            "qsdc",
            "--n",
            "64",
            "--mode",
            "sampled",
            "--payload-bits",
            "101011",
            "--seed",
            "7",
        ],
        vec![
            "run",
            "--protocol",
            "qsdc",
            "--attack",
            "intercept-measure-resend",
            "--leg",
            "bob-alice",
            "--mode",
            "sampled",
            "--n",
            "64",
            "--seed",
            "7",
        ],
        vec![
            "run",
            "--protocol",
            "qsdc",
            "--attack",
            "gqcm",
            "--leg",
            "alice-bob",
            "--gain",
            "2",
            "--transmission",
            "0.8",
            "--seed",
            "3",
        ],
        vec![
            "run",
            "--protocol",
            "cqd",
            "--m-a",
            "2.5",
            "--m-b",
            "-1",
            "--seed",
            "11",
        ],
        vec![
            "run",
            "--protocol",
            "cqd",
            "--attack",
            "participant-charlie",
            "--seed",
            "11",
        ],
        vec![
            "run",
            "--protocol",
            "smp",
            "--assets-a",
            "5",
            "--assets-b",
            "3",
            "--seed",
            "2",
        ],
        vec![
            "sweep", "--A", "1:5:1", "--T", "0.8", "--g", "0:2:0.1", "--h", "3.14159",
        ],
        vec![
            "wigner",
            "--alpha",
            "1.2+2.1i",
            "--squeeze-r",
            "0.3",
            "--grid",
            "-4:6:0.1",
        ],
    ];
    let mut mismatched = Vec::new();
    for (k, args) in commands.iter().enumerate() {
        let first = cli(args);
        let second = cli(args);
        let a = dir.join(format!("{k}-a.out"));
        let b = dir.join(format!("{k}-b.out"));
        let file_run = |path: &Path| {
            let mut with_out = args.clone();
            let p = path.to_str().unwrap();
            with_out.extend(["--out", p]);
            let code = cli(&with_out).0;
            (code, fs::read(path).unwrap_or_default())
        };
        let fa = file_run(&a);
        let fb = file_run(&b);
        if first != second || fa != fb || first.1.is_empty() || fa.1 != first.1 {
            mismatched.push(args.join(" "));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{} commands run twice to stdout and to files; mismatches: {mismatched:?}",
            commands.len()
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1", c1_operator_algebra()),
        ("2", c2_gqcm_identity()),
        ("3", c3_variance_oracle()),
    ];
    results.extend(c4_security_identities());
    results.push(("5", c5_round_trips()));
    results.extend(c6_detection());
    results.push(("7", c7_decode_noise()));
    results.push(("8", c8_wigner()));
    results.push(("9", c9_determinism(dir.path())));

    let mut failed = 0;
    for (id, r) in &results {
        println!(
            "{} criterion {id:<10} {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        if !r.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
