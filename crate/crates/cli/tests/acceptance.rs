//! Acceptance gate. Every criterion runs at its stated tolerance and prints
//! one pass/fail line; the test fails if any criterion does.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C;

use spinsense::acquisition::{spectrum, Fid, Spectrum};
use spinsense::experiments::{
    run_fid_appendix, run_noise_decay, run_phase_sweep, DecayCurve, ExperimentConfig, PhaseSweepReport,
};
use spinsense::gates::pseudo_cnot;
use spinsense::hamiltonian::{build_hamiltonian, EntanglingMode, Frame};
use spinsense::noise::{apply_decoupling, calibrate_rates, DecouplingMode, Evolver, SampleSpec, ValidityMonitor};
use spinsense::pulseprog::{builtin_sequence, parse, print, Builtin, BuiltinParams};
use spinsense::sim::{run_program, InitialState, SimConfig};
use spinsense::spin::{DensityMatrix, SpinSystem};

const THETAS: [f64; 4] = [0.0, 30.0, 50.0, 90.0];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn cis(a: f64) -> C {
    C::from_polar(1.0, a)
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str("", dir).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn carbons() -> SpinSystem {
    apply_decoupling(&SpinSystem::two_propanol(), DecouplingMode::Full).unwrap()
}

fn noiseless_run(which: Builtin, theta_deg: f64) -> spinsense::sim::RunOutput {
    let molecule = SpinSystem::two_propanol();
    let params = BuiltinParams { theta_deg, ..Default::default() };
    let program = builtin_sequence(&molecule, which, &params).unwrap();
    run_program(&program, &SimConfig::new(molecule), &InitialState::Thermal).unwrap()
}

fn criterion_1() -> Outcome {
    // identity on the CC = 0 block, i on the anti-diagonal of the CC = 1 block
    let mut literal = DMatrix::<C>::zeros(8, 8);
    for a in 0..4 {
        literal[(a, a)] = c(1.0, 0.0);
    }
    for (r, col) in [(4, 7), (5, 6), (6, 5), (7, 4)] {
        literal[(r, col)] = c(0.0, 1.0);
    }
    let u = pseudo_cnot(&carbons(), EntanglingMode::Ideal).unwrap();
    let m = u.matrix();
    let phase = literal[(0, 0)] / m[(0, 0)];
    let phase = phase / phase.norm();
    let err = m.iter().zip(literal.iter()).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max);
    Outcome::new(err <= 1e-10, format!("max |U - U_closed_form| = {err:.2e} (tol 1e-10)"))
}

fn closed_form_state(theta: f64) -> DMatrix<C> {
    let mut m = DMatrix::<C>::identity(8, 8);
    m[(0, 4)] = cis(-2.0 * theta);
    m[(4, 0)] = cis(2.0 * theta);
    m[(3, 7)] = cis(2.0 * theta);
    m[(7, 3)] = cis(-2.0 * theta);
    for (a, b) in [(1, 5), (5, 1), (2, 6), (6, 2)] {
        m[(a, b)] = c(1.0, 0.0);
    }
    m / c(8.0, 0.0)
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for theta in THETAS {
        let out = noiseless_run(Builtin::FieldOnCs, theta);
        let want = closed_form_state(theta.to_radians());
        let got = out.final_state.matrix();
        let err = got.iter().zip(want.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    Outcome::new(worst <= 1e-10, format!("max elementwise error over θ = {THETAS:?}: {worst:.2e} (tol 1e-10)"))
}

fn center_signal(theta: f64, j: f64, w0: f64, t: f64) -> C {
    (cis(-j * t) + 2.0 + cis(j * t)) * cis(w0 * t + theta) / 4.0
}

fn side_signal(theta: f64, j: f64, w0: f64, t: f64) -> C {
    (cis(-j * t - 2.0 * theta) + 2.0 + cis(j * t + 2.0 * theta)) * cis(w0 * t) / 4.0
}

/// Frequency of the largest bin within `half` of `center`.
fn local_peak(spec: &Spectrum, center: f64, half: f64) -> f64 {
    let mut best = (0.0, f64::NAN);
    for (f, b) in spec.freqs().iter().zip(spec.bins()) {
        if (f - center).abs() <= half && b.norm() > best.0 {
            best = (b.norm(), *f);
        }
    }
    best.1
}

fn criterion_3() -> Outcome {
    let j = TAU * 38.4;
    let w0 = TAU * 100.0;
    let mut worst: f64 = 0.0;
    let mut worst_peak: f64 = 0.0;
    let mut bin = 0.0;
    for theta in THETAS {
        for which in [Builtin::FieldOnCc, Builtin::FieldOnCs] {
            let out = noiseless_run(which, theta);
            let fid: Fid = out.fid.unwrap();
            assert_eq!(fid.len(), 4096);
            let th = theta.to_radians();
            for (t, z) in fid.times().zip(fid.samples()) {
                let want = match which {
                    Builtin::FieldOnCc => center_signal(th, j, w0, t),
                    _ => side_signal(th, j, w0, t),
                };
                worst = worst.max((z - want).norm());
            }
            let spec = spectrum(&fid, 1).unwrap();
            bin = spec.bin_width();
            for line in [w0 + j, w0, w0 - j] {
                let f = local_peak(&spec, line, j / 2.0);
                worst_peak = worst_peak.max((f - line).abs() / bin);
            }
        }
    }
    let pass = worst <= 1e-8 && worst_peak <= 1.0;
    Outcome::new(
        pass,
        format!(
            "max FID error {worst:.2e} (tol 1e-8); worst peak offset {worst_peak:.3} bins of {bin:.4} rad/s (tol 1 bin)"
        ),
    )
}

fn criterion_4(dir: &Path) -> (Outcome, PhaseSweepReport) {
    let mut cfg = config(dir);
    cfg.thetas_deg = THETAS.to_vec();
    cfg.tau_ms = 3.4;
    cfg.decoupling = Some(DecouplingMode::Full);
    let r = run_phase_sweep(&cfg).unwrap();
    let worst = r.rows.iter().map(|row| row.error_deg.abs()).fold(0.0, f64::max);
    let complete = r.rows.len() == 2 * THETAS.len() * 3;
    (
        Outcome::new(worst <= 1.0 && complete, format!("max |phase - expected| = {worst:.3} deg over {} lines (tol 1 deg)", r.rows.len())),
        r,
    )
}

/// Expectation of `σ` on a one-spin state.
fn single_expectation(rho: &DensityMatrix, sigma: Matrix2<C>) -> C {
    let m = rho.matrix();
    let mut s = c(0.0, 0.0);
    for a in 0..2 {
        for b in 0..2 {
            s += sigma[(a, b)] * m[(b, a)];
        }
    }
    s
}

fn criterion_5() -> Outcome {
    let sx = Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
    let sz = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
    let one = SpinSystem::with_offsets(&[("A", 0.0)], &[]).unwrap();
    let h = build_hamiltonian(&one, &Frame::lab(&one)).unwrap();
    let labels = vec!["A".to_string()];
    let plus = DMatrix::from_element(2, 2, c(0.5, 0.0));
    let up = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);

    let mut worst: f64 = 0.0;
    for gamma in [1.0 / 1.3, 1.0 / 0.093, 50.0] {
        let dt = 1e-4;
        let ev = Evolver::new(&h, &[gamma], dt).unwrap();
        let mut rx = DensityMatrix::new(labels.clone(), plus.clone()).unwrap();
        let mut rz = DensityMatrix::new(labels.clone(), up.clone()).unwrap();
        for k in 1..=400 {
            ev.step(&mut rx);
            ev.step(&mut rz);
            let t = k as f64 * dt;
            worst = worst.max((single_expectation(&rx, sx).re - (-gamma * t / 2.0).exp()).abs());
            worst = worst.max((single_expectation(&rz, sz).re - (-gamma * t).exp()).abs());
        }
    }

    // every rate of a preset moved to another concentration scales by C'/C
    let reg = apply_decoupling(&SpinSystem::two_propanol(), DecouplingMode::None).unwrap();
    let presets = SampleSpec::presets();
    let mut worst_scale: f64 = 0.0;
    for s in &presets {
        let base = calibrate_rates(s, &reg).unwrap();
        for other in &presets {
            let cm = other.impurity_concentration_mm;
            let moved = calibrate_rates(&s.with_concentration(cm).unwrap(), &reg).unwrap();
            let k = cm / s.impurity_concentration_mm;
            for (a, b) in base.rates().iter().zip(moved.rates()) {
                worst_scale = worst_scale.max((b - k * a).abs() / (k * a).max(f64::MIN_POSITIVE));
            }
        }
    }
    Outcome::new(
        worst <= 1e-6 && worst_scale <= 1e-12,
        format!("max channel error {worst:.2e} (tol 1e-6); max relative rate-scaling error {worst_scale:.2e}"),
    )
}

fn kron(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    a.kronecker(b)
}

/// `op` on spin `k` of `n`, spin 0 leftmost.
fn on_spin(op: &DMatrix<C>, k: usize, n: usize) -> DMatrix<C> {
    let id = DMatrix::<C>::identity(2, 2);
    (0..n).fold(DMatrix::<C>::identity(1, 1), |acc, i| kron(&acc, if i == k { op } else { &id }))
}

/// Frobenius distance between `steps` Strang steps and `exp(L t)` for the
/// given offsets, couplings (rad/s) and flip rates.
fn trotter_vs_exact(offsets: [f64; 3], couplings: &[(usize, usize, f64)], rates: [f64; 3], dt: f64, steps: usize) -> f64 {
    let names = ["A", "B", "C"];
    let pairs: Vec<(&str, &str, f64)> = couplings.iter().map(|&(a, b, j)| (names[a], names[b], j)).collect();
    let sys = SpinSystem::with_offsets(&[(names[0], offsets[0]), (names[1], offsets[1]), (names[2], offsets[2])], &pairs).unwrap();
    let n = 3;
    let d = 8;

    let z = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let raise = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let lower = raise.adjoint();
    let mut h = DMatrix::<C>::zeros(d, d);
    for k in 0..n {
        h += on_spin(&z, k, n) * c(offsets[k] / 2.0, 0.0);
    }
    for &(a, b, j) in couplings {
        h += on_spin(&z, a, n) * on_spin(&z, b, n) * c(j / 4.0, 0.0);
    }

    // column-major vec: vec(A X B) = (Bᵀ ⊗ A) vec X
    let id = DMatrix::<C>::identity(d, d);
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for k in 0..n {
        for op in [&raise, &lower] {
            let jump = on_spin(op, k, n) * c((rates[k] / 2.0).sqrt(), 0.0);
            let jj = jump.adjoint() * &jump;
            l += kron(&jump.conjugate(), &jump) - (kron(&id, &jj) + kron(&jj.transpose(), &id)) * c(0.5, 0.0);
        }
    }

    let psi: Vec<C> = (0..d).map(|k| cis(0.7 * k as f64) * (1.0 + k as f64).sqrt()).collect();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut rho0 = DMatrix::<C>::from_fn(d, d, |a, b| psi[a] * psi[b].conj() / norm) * c(0.7, 0.0);
    rho0 += DMatrix::<C>::identity(d, d) * c(0.3 / d as f64, 0.0);

    let prop = (l * c(dt * steps as f64, 0.0)).exp();
    let exact = DMatrix::from_column_slice(d, d, (prop * DMatrix::from_column_slice(d * d, 1, rho0.as_slice())).as_slice());

    let hd = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
    let ev = Evolver::new(&hd, &rates, dt).unwrap();
    let labels: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut rho = DensityMatrix::new(labels, rho0).unwrap();
    ev.run(&mut rho, steps, None).unwrap();
    (rho.matrix() - &exact).norm()
}

fn criterion_6() -> Outcome {
    let dt = spinsense::noise::DEFAULT_MAX_DT;
    let steps = 100;

    // the carbon register the sensing sequences run on, Sample 1 rates
    let sample = SampleSpec::preset(1).unwrap();
    let g = 1.0 / sample.t1_cc_s;
    let jc = TAU * 38.4;
    let carbons = [(0, 1, jc), (0, 2, jc)];
    let err = trotter_vs_exact([0.0, TAU * 3900.0, -TAU * 3900.0], &carbons, [g; 3], dt, steps);

    // a proton-coupled stress case; halving dt at fixed total time should cut the error 4x
    let gh = 1.0 / sample.t1_hss_s;
    let stress = [(0, 1, TAU * 38.4), (0, 2, TAU * 124.0), (1, 2, TAU * 4.4)];
    let offsets = [TAU * 150.0, -TAU * 80.0, TAU * 40.0];
    let e1 = trotter_vs_exact(offsets, &stress, [g, gh, gh], dt, steps);
    let e2 = trotter_vs_exact(offsets, &stress, [g, gh, gh], dt / 2.0, 2 * steps);
    let order = (e1 / e2).log2();
    let pass = err <= 1e-8 && (1.8..=2.2).contains(&order);
    Outcome::new(
        pass,
        format!(
            "Frobenius |ρ_trotter - ρ_exact| = {err:.2e} after {steps} steps of {dt:e} s on CC/CS1/CS2 (tol 1e-8); \
             proton-coupled stress case {e1:.2e}, global order {order:.2} (expect 2)"
        ),
    )
}

fn criterion_7(dir: &Path) -> (Outcome, spinsense::experiments::NoiseDecayReport) {
    let mut cfg = config(dir);
    cfg.tau_unit_ms = 3.44;
    cfg.n_max = 16;
    let r = run_noise_decay(&cfg).unwrap();
    let full = r.curve(DecayCurve::Full).unwrap();
    let sel = r.curve(DecayCurve::Selective).unwrap();
    let xy8 = r.curve(DecayCurve::SelectiveXy8).unwrap();
    let a = full.loss_50ms <= 0.10;
    let t_sel = sel.fit.exponential.time_constant;
    let b = (0.015..=0.060).contains(&t_sel) && sel.fit.score > 1.0;
    let (ys, yx) = (sel.amplitude_at(8).unwrap(), xy8.amplitude_at(8).unwrap());
    let ratio = yx / ys;
    let c = yx > ys && ratio >= 1.5;
    let detail = format!(
        "(a) full loss over 50 ms {:.2}% (tol 10%) {}; (b) selective T = {:.2} ms (15..60), score {:.3} (> 1) {}; \
         (c) at τ = 27.5 ms xy8 {yx:.4} vs selective {ys:.4}, ratio {ratio:.2} (>= 1.5) {}",
        100.0 * full.loss_50ms,
        if a { "ok" } else { "FAIL" },
        t_sel * 1e3,
        sel.fit.score,
        if b { "ok" } else { "FAIL" },
        if c { "ok" } else { "FAIL" },
    );
    (Outcome::new(a && b && c, detail), r)
}

fn criterion_8() -> Outcome {
    let root = workspace_root();
    let mut shipped: Vec<PathBuf> = std::fs::read_dir(root.join("programs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "dsl"))
        .collect();
    shipped.sort();
    let mut round_trip_fail = Vec::new();
    for p in &shipped {
        let src = std::fs::read_to_string(p).unwrap();
        let ok = match parse(&src) {
            Ok(a) => parse(&print(&a)).map(|b| b == a && print(&b) == print(&a)).unwrap_or(false),
            Err(_) => false,
        };
        if !ok {
            round_trip_fail.push(p.display().to_string());
        }
    }

    let mut fixtures: Vec<PathBuf> = std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    fixtures.sort();
    let out = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    for f in &fixtures {
        let src = std::fs::read_to_string(f).unwrap();
        let spanned = match parse(&src) {
            Ok(_) => false,
            Err(d) => d.iter().count() >= 1 && d.iter().all(|x| x.span.line >= 1 && x.span.col >= 1),
        };
        let run = Command::new(env!("CARGO_BIN_EXE_spinsense"))
            .args(["--sample", "none", "--out"])
            .arg(out.path())
            .arg("run")
            .arg(f)
            .output()
            .unwrap();
        let stderr = String::from_utf8_lossy(&run.stderr);
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        let located = stderr.contains(&format!("{name}:")) && stderr.contains('^');
        if !spanned || run.status.success() || !located {
            bad.push(name);
        }
    }
    let pass = shipped.len() >= 4 && round_trip_fail.is_empty() && fixtures.len() == 20 && bad.is_empty();
    Outcome::new(
        pass,
        format!(
            "{} shipped programs, round-trip failures {round_trip_fail:?}; {} malformed fixtures, without spanned diagnostic or nonzero exit {bad:?}",
            shipped.len(),
            fixtures.len()
        ),
    )
}

fn criterion_9(monitors: &[(&str, &ValidityMonitor)]) -> Outcome {
    let mut problems = Vec::new();
    let mut total = 0;
    for (name, m) in monitors {
        total += m.checks;
        if m.checks == 0 || m.every != 10 || m.worst_hermiticity > 1e-10 || m.worst_trace > 1e-10 {
            problems.push(format!("{name}: {m:?}"));
        }
    }

    // eigenvalue floor on final states, computed here rather than by the monitors
    let molecule = SpinSystem::two_propanol();
    let sim = SimConfig::new(molecule.clone()).with_sample(SampleSpec::preset(1).unwrap());
    let mut min_eig = f64::INFINITY;
    for (which, mode, tau_ms, n_cycles) in [
        (Builtin::FieldOnCc, DecouplingMode::Full, 3.4, 1),
        (Builtin::FieldOnCs, DecouplingMode::Full, 3.4, 1),
        (Builtin::EchoSense, DecouplingMode::Selective, 6.88, 1),
        (Builtin::Xy8Sense, DecouplingMode::Selective, 0.43, 2),
    ] {
        let params = BuiltinParams { theta_deg: 50.0, tau_ms, n_cycles, decoupling: mode, points: 2, ..Default::default() };
        let program = builtin_sequence(&molecule, which, &params).unwrap();
        let out = run_program(&program, &sim, &InitialState::Thermal).unwrap();
        total += out.monitor.checks;
        min_eig = min_eig.min(out.final_state.min_eigenvalue());
        if out.final_state.hermiticity_error() > 1e-10 || out.final_state.trace_error() > 1e-10 {
            problems.push(format!("{which} final state"));
        }
    }
    let pass = problems.is_empty() && min_eig >= -1e-9;
    Outcome::new(
        pass,
        format!("{total} spot checks, Hermiticity/trace within 1e-10; min final eigenvalue {min_eig:.2e} (floor -1e-9) {problems:?}"),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let mut results: Vec<(u32, Outcome, Duration, Duration)> = Vec::new();
    let s = Duration::from_secs;

    let (o, t) = timed(criterion_1);
    results.push((1, o, t, s(1)));
    let (o, t) = timed(criterion_2);
    results.push((2, o, t, s(1)));
    let (o, t) = timed(criterion_3);
    results.push((3, o, t, s(10)));
    let ((o, sweep), t) = timed(|| criterion_4(&dir("phase")));
    results.push((4, o, t, s(60)));
    let (o, t) = timed(criterion_5);
    results.push((5, o, t, s(10)));
    let (o, t) = timed(criterion_6);
    results.push((6, o, t, s(30)));
    let ((o, decay), t) = timed(|| criterion_7(&dir("decay")));
    results.push((7, o, t, s(600)));
    let (o, t) = timed(criterion_8);
    results.push((8, o, t, s(1)));

    let mut cfg = config(&dir("fid"));
    cfg.check_every = 10;
    let appendix = run_fid_appendix(&cfg).unwrap();
    let (o, t) = timed(|| {
        criterion_9(&[
            ("phase-sweep", &sweep.validity),
            ("noise-decay", &decay.validity),
            ("fid-appendix", &appendix.validity),
        ])
    });
    results.push((9, o, t, Duration::MAX));

    // written straight to stderr so the report shows without --nocapture
    let mut report = std::io::stderr().lock();
    let mut all = true;
    for (k, o, t, budget) in &results {
        let in_time = t <= budget;
        let pass = o.pass && in_time;
        all &= pass;
        let limit = if *budget == Duration::MAX { String::new() } else { format!(" / {:.0?}", budget) };
        writeln!(
            report,
            "criterion {k} {}: {} [{:.2?}{limit}{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            t,
            if in_time { "" } else { ", over time budget" }
        )
        .unwrap();
    }
    assert!(all, "acceptance criteria failed");
}
