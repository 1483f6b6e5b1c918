//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! cargo test -p qdcavity-cli --test acceptance -- --nocapture

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use qdcavity_cli::config::DEFAULT_AGREEMENT_BAND;
use qdcavity_core::model::coupling_strength;
use qdcavity_core::observables::PHOTON_FLOOR;
use qdcavity_core::oracle::{
    oracle_steady_observables_auto, oracle_steady_state, propagate, BasisState, DensityMatrix, HilbertSpace, Liouvillian,
};
use qdcavity_core::solver::integrate;
use qdcavity_core::{
    g2_zero, observables_of, rhs, run_sweep, steady_state, CavityGeometry, CorrelationToggles, DynamicState,
    FrequencyConvention, IntegrationConfig, ModelParams, ReferenceRabi, SweepGrid, SweepRecord, G2,
};

const REFERENCE_COUPLING_PER_PS: f64 = 0.25149340787616414;
const QUOTED_RABI_PER_PS: f64 = 0.025;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_runtime(v: Verdict, elapsed: Duration, limit: Duration) -> Verdict {
    let ok = elapsed < limit;
    verdict(
        v.pass && ok,
        format!("{}; runtime {:.3} s (limit {} s)", v.detail, elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn random_params() -> impl Strategy<Value = ModelParams> {
    (
        0.0f64..1.0,
        0.01f64..5.0,
        0.01f64..5.0,
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1e3,
        -1.0f64..1.0,
    )
        .prop_map(|(g, gamma_c, gamma_deph, gamma_nr, gamma_nl, pump, detuning)| ModelParams {
            g,
            gamma_c,
            gamma_deph,
            gamma_nr,
            gamma_nl,
            pump,
            detuning,
        })
}

fn random_state() -> impl Strategy<Value = DynamicState> {
    proptest::collection::vec(-1.0f64..1.0, 10).prop_map(|mut y| {
        y[0] = y[0].abs();
        y[1] = y[1].abs();
        y[2] = 10.0 * y[2].abs();
        DynamicState::from_slice(&y)
    })
}

fn decoupled_limit() -> Verdict {
    let cfg = IntegrationConfig::default();
    let mut worst: f64 = 0.0;

    let params = ModelParams::paperlike_defaults(0.0, 0.35, 0.0);
    let init = DynamicState {
        n_p: 1.0,
        d_photon2: -1.0,
        ..DynamicState::vacuum()
    };
    let traj = integrate(
        &init,
        &params,
        CorrelationToggles::FULL,
        &IntegrationConfig {
            max_time: 20.0,
            ..cfg.clone()
        },
    )
    .expect("photon decay");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        worst = worst.max(rel(s.n_p, (-2.0 * params.gamma_c * t).exp()));
    }

    for pump in [0.05, 1.0, 1e5] {
        let params = ModelParams {
            gamma_nr: 0.2,
            gamma_nl: 0.7,
            ..ModelParams::paperlike_defaults(0.0, 1.0, pump)
        };
        let b = params.pump + params.gamma_nr;
        let root = 2.0 * params.pump / (b + (b * b + 4.0 * params.gamma_nl * params.pump).sqrt());
        let ss = steady_state(&params, CorrelationToggles::FULL, &cfg).expect("carrier steady state");
        worst = worst.max(rel(ss.state.n_e, root)).max(rel(ss.state.n_h, root));
    }

    let params = ModelParams {
        gamma_nl: 0.0,
        gamma_nr: 0.3,
        ..ModelParams::paperlike_defaults(0.0, 0.4, 0.8)
    };
    let space = HilbertSpace::new(4).expect("space");
    let rho0 = DensityMatrix::pure(
        space,
        BasisState {
            electron: 1,
            hole: 0,
            photons: 3,
        },
    );
    let init = DynamicState {
        n_e: 1.0,
        n_p: 3.0,
        d_photon2: 6.0 - 2.0 * 9.0,
        ..DynamicState::vacuum()
    };
    let times = [0.5, 2.0, 6.0];
    let exact = propagate(&Liouvillian::new(&params, space), &rho0, &times, 1e-11, 1e-14).expect("oracle");
    for (&t, rho) in times.iter().zip(&exact) {
        let ce = *integrate(
            &init,
            &params,
            CorrelationToggles::FULL,
            &IntegrationConfig {
                max_time: t,
                ..cfg.clone()
            },
        )
        .expect("cluster trajectory")
        .final_state();
        worst = worst
            .max(rel(ce.n_e, rho.electron_population()))
            .max(rel(ce.n_h, rho.hole_population()))
            .max(rel(ce.n_p, rho.photon_number()))
            .max(rel(ce.two_photon(), rho.two_photon()));
    }
    verdict(worst < 1e-6, format!("max relative error {worst:.3e} (limit 1e-6)"))
}

fn bookkeeping() -> Verdict {
    let mut runner = TestRunner::deterministic();
    let (ps, ss) = (random_params(), random_state());
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = sample(&mut runner, &ps);
        let y = sample(&mut runner, &ss);
        let d = rhs(&y, &k, CorrelationToggles::FULL);
        let terms = [
            k.pump * (1.0 - y.n_e),
            -k.gamma_nr * y.n_e,
            -k.gamma_nl * y.n_e * y.n_h,
            -2.0 * k.gamma_c * y.n_p,
        ];
        let expected: f64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.abs()).sum::<f64>() + 4.0 * (k.g * y.p.re).abs();
        if scale > 0.0 {
            worst = worst.max((d.n_e + d.n_p - expected).abs() / scale);
        }
    }
    verdict(worst < 1e-12, format!("max relative deviation {worst:.3e} over 1000 samples (limit 1e-12)"))
}

fn thermal_value() -> Verdict {
    let mut runner = TestRunner::deterministic();
    let ss = random_state();
    let photons = (-14.0f64..3.0).prop_map(|e| 10f64.powf(e));
    let params = ModelParams::paperlike_defaults(0.1, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut all_defined = true;
    for _ in 0..1000 {
        let mut y = sample(&mut runner, &ss);
        y.n_p = sample(&mut runner, &photons).max(2.0 * PHOTON_FLOOR);
        y.d_photon2 = 0.0;
        match (g2_zero(&y), observables_of(&y, &params).g2_zero) {
            (Ok(a), G2::Value(b)) => worst = worst.max((a - 2.0).abs()).max((b - 2.0).abs()),
            _ => all_defined = false,
        }
    }
    verdict(
        all_defined && worst <= 1e-12,
        format!("max |g2 - 2| = {worst:.3e} over 1000 states (limit 1e-12)"),
    )
}

fn log_lifetimes(count: usize) -> Vec<f64> {
    let (a, b) = (0.2f64.ln(), 10f64.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

struct LifetimeSweep {
    records: Vec<SweepRecord>,
    elapsed: Duration,
}

impl LifetimeSweep {
    fn run() -> Self {
        let grid = SweepGrid {
            gamma_cav_values: log_lifetimes(50).iter().map(|t| 1.0 / t).collect(),
            g_values: vec![0.18, 0.20],
            pump_values: vec![1e5],
            toggle_variants: vec![CorrelationToggles::FULL, CorrelationToggles::NO_INVERSION],
            reference: ReferenceRabi::default(),
        };
        let base = ModelParams::paperlike_defaults(0.0, 1.0, 1e5);
        let start = Instant::now();
        let records = run_sweep(&grid, &base, &IntegrationConfig::default()).expect("sweep");
        Self {
            records,
            elapsed: start.elapsed(),
        }
    }

    /// Records for one (g, toggles) curve, ordered by increasing lifetime.
    fn curve(&self, g: f64, toggles: CorrelationToggles) -> Vec<&SweepRecord> {
        let mut c: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.g_over_omega_r0 == g && r.toggles == toggles)
            .collect();
        c.sort_by(|a, b| a.cavity_lifetime.total_cmp(&b.cavity_lifetime));
        c
    }

    fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged && r.observables.is_some())
    }
}

fn g2_of(r: &SweepRecord) -> f64 {
    r.observables
        .as_ref()
        .and_then(|o| o.g2_zero.value())
        .unwrap_or(f64::NAN)
}

fn field(r: &SweepRecord, f: impl Fn(&qdcavity_core::Observables) -> f64) -> f64 {
    r.observables.as_ref().map_or(f64::NAN, f)
}

fn has_interior_minimum(v: &[f64]) -> bool {
    v.windows(3).any(|w| w[1] < w[0] && w[1] < w[2])
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn dip_existence(s: &LifetimeSweep) -> Verdict {
    let mut pass = s.all_converged();
    let mut notes = vec![format!("all points converged: {}", s.all_converged())];
    for g in [0.18, 0.20] {
        let on = s.curve(g, CorrelationToggles::FULL);
        let off = s.curve(g, CorrelationToggles::NO_INVERSION);
        let g2_on: Vec<f64> = on.iter().map(|r| g2_of(r)).collect();
        let g2_off: Vec<f64> = off.iter().map(|r| g2_of(r)).collect();
        let dip = has_interior_minimum(&g2_on);
        let monotone = non_decreasing(&g2_off);
        let ordered = on
            .iter()
            .zip(&off)
            .all(|(a, b)| field(b, |o| o.two_photon) >= field(a, |o| o.two_photon));
        pass &= dip && monotone && ordered;
        notes.push(format!(
            "g={g}: interior minimum (on) {dip}, non-decreasing (off) {monotone}, two_photon off >= on {ordered}, \
             g2 on {:.4}..{:.4}, off {:.4}..{:.4}",
            g2_on[0],
            g2_on[g2_on.len() - 1],
            g2_off[0],
            g2_off[g2_off.len() - 1]
        ));
    }
    within_runtime(verdict(pass, notes.join("; ")), s.elapsed, Duration::from_secs(120))
}

fn output_monotone_in_g(s: &LifetimeSweep) -> Verdict {
    let mut violations = 0;
    let mut checked = 0;
    for toggles in [CorrelationToggles::FULL, CorrelationToggles::NO_INVERSION] {
        let low = s.curve(0.18, toggles);
        let high = s.curve(0.20, toggles);
        for (a, b) in low.iter().zip(&high) {
            checked += 1;
            if !(field(b, |o| o.output_rate) >= field(a, |o| o.output_rate)) {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0 && s.all_converged(),
        format!("{violations} of {checked} lifetimes with output decreasing in g"),
    )
}

fn interior_optimum(s: &LifetimeSweep) -> Verdict {
    let curve = s.curve(0.20, CorrelationToggles::FULL);
    let output: Vec<f64> = curve.iter().map(|r| field(r, |o| o.output_rate)).collect();
    let photons: Vec<f64> = curve.iter().map(|r| field(r, |o| o.photon_number)).collect();
    let argmax = output
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(k, _)| k);
    let interior = argmax > 0 && argmax + 1 < output.len();
    let monotone = non_decreasing(&photons);
    verdict(
        interior && monotone,
        format!(
            "output maximum at lifetime {:.4} ps (index {argmax} of {}), interior {interior}; n_p non-decreasing {monotone}",
            curve[argmax].cavity_lifetime,
            output.len()
        ),
    )
}

fn coupling_computation() -> Verdict {
    let (d, nu, n, v) = (8.0e-29, 2.05e15, 3.5, 2.0e-20);
    let g = |d: f64, nu: f64, v: f64| coupling_strength(d, nu, n, v).expect("in domain");
    let base = g(d, nu, v);
    let scaling = [
        rel(g(3.7 * d, nu, v), 3.7 * base),
        rel(g(d, nu, 5.3 * v), base / 5.3f64.sqrt()),
        rel(g(d, 2.9 * nu, v), base * 2.9f64.sqrt()),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let reference = CavityGeometry::reference()
        .coupling(FrequencyConvention::Angular)
        .expect("reference geometry");
    let regression = rel(reference, REFERENCE_COUPLING_PER_PS);
    let band = rel(reference / TAU, QUOTED_RABI_PER_PS);
    verdict(
        scaling < 1e-12 && regression < 1e-12 && band <= 0.15,
        format!(
            "scaling deviation {scaling:.2e} (limit 1e-12); reference g = {reference} 1/ps, frozen deviation {regression:.2e}; \
             g/2pi = {:.5} 1/ps is {:.1}% from {QUOTED_RABI_PER_PS} (limit 15%)",
            reference / TAU,
            100.0 * band
        ),
    )
}

fn random_hermitian(runner: &mut TestRunner, dim: usize) -> DMatrix<C64> {
    let entries = proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim);
    let raw = sample(runner, &entries);
    let m = DMatrix::from_fn(dim, dim, |i, j| C64::new(raw[i * dim + j].0, raw[i * dim + j].1));
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace();
    h / tr
}

fn oracle_integrity() -> Verdict {
    let params = ModelParams::paperlike_defaults(0.3, 0.05, 0.2);
    let start = Instant::now();
    let space = HilbertSpace::new(16).expect("space");
    let liouvillian = Liouvillian::new(&params, space);
    let mut runner = TestRunner::deterministic();
    let mut trace_defect: f64 = 0.0;
    for _ in 0..5 {
        let rho = random_hermitian(&mut runner, space.dim());
        trace_defect = trace_defect.max(liouvillian.apply(&rho).trace().norm() / rho.norm());
    }
    let accepted = oracle_steady_observables_auto(&params, 16);
    let elapsed = start.elapsed();
    let (steady, accepted_space) = match accepted {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("steady state failed: {e}")),
    };
    let min_eigenvalue = steady.rho.min_eigenvalue();
    let doubled = oracle_steady_state(&params, HilbertSpace::new(2 * accepted_space.n_max()).expect("space"));
    let change = match (doubled, steady.observables.g2_zero) {
        (Ok(d), G2::Value(a)) => d.observables.g2_zero.value().map_or(f64::INFINITY, |b| (a - b).abs()),
        _ => f64::INFINITY,
    };
    within_runtime(
        verdict(
            trace_defect < 1e-12 && min_eigenvalue >= -1e-10 && change < 1e-6,
            format!(
                "trace defect {trace_defect:.2e} (limit 1e-12); min eigenvalue {min_eigenvalue:.2e} (limit -1e-10); \
                 n_p = {:.4}, g2 change {change:.2e} from n_max {} to {} (limit 1e-6)",
                steady.observables.photon_number,
                accepted_space.n_max(),
                2 * accepted_space.n_max()
            ),
        ),
        elapsed,
        Duration::from_secs(30),
    )
}

fn weak_coupling() -> Verdict {
    let reference = ReferenceRabi::default();
    let params = ModelParams::paperlike_defaults(reference.coupling(0.1), 1.0, 0.001);
    let cluster = steady_state(&params, CorrelationToggles::FULL, &IntegrationConfig::default())
        .map(|s| s.state.n_p)
        .unwrap_or(f64::NAN);
    let exact = oracle_steady_observables_auto(&params, 8)
        .map(|(s, _)| s.observables.photon_number)
        .unwrap_or(f64::NAN);
    let diff = rel(cluster, exact);
    verdict(
        diff <= DEFAULT_AGREEMENT_BAND,
        format!("n_p cluster {cluster:.6e}, oracle {exact:.6e}, relative difference {diff:.4} (band {DEFAULT_AGREEMENT_BAND})"),
    )
}

const DETERMINISM_CONFIG: &str = r#"
[model]
preset = "paperlike-defaults"
g_over_omega_r0 = 0.2
cavity_lifetime_ps = 1.0
pump_per_ps = 1e5

[grid]
cavity_lifetime_ps = { start = 0.2, stop = 10.0, count = 6, spacing = "log" }
g_over_omega_r0 = [0.1, 0.2]
pump_per_ps = [1e3, 1e5]
toggles = ["full", "no-inversion"]
"#;

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("grid.cfg");
    std::fs::write(&config, DETERMINISM_CONFIG).expect("write config");
    let mut outputs = Vec::new();
    for (run, workers) in [1, 2, 4, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{run}.csv"));
        let args = [
            "qdcavity".to_string(),
            "sweep".into(),
            "--config".into(),
            config.display().to_string(),
            "--out".into(),
            out.display().to_string(),
            "--workers".into(),
            workers.to_string(),
        ];
        let code = qdcavity_cli::run(args, &mut std::io::sink(), &mut std::io::sink());
        if code != 0 {
            return verdict(false, format!("sweep with {workers} workers exited with {code}"));
        }
        outputs.push(std::fs::read(&out).expect("read output"));
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        identical,
        format!(
            "{} runs at 1, 2, 4, 4 workers, {} bytes each, byte-identical {identical}",
            outputs.len(),
            outputs[0].len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |number: usize, name: &str, v: Verdict| {
        if !v.pass {
            failures += 1;
        }
        println!("{} criterion {number} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };

    let start = Instant::now();
    let v = decoupled_limit();
    report(1, "decoupled-limit exactness", within_runtime(v, start.elapsed(), Duration::from_secs(1)));
    let start = Instant::now();
    let v = bookkeeping();
    report(2, "excitation bookkeeping", within_runtime(v, start.elapsed(), Duration::from_secs(1)));
    report(3, "thermal doublet value", thermal_value());

    let sweep = LifetimeSweep::run();
    report(4, "g2 dip existence", dip_existence(&sweep));
    report(5, "output monotone in g", output_monotone_in_g(&sweep));
    report(6, "interior optimum lifetime", interior_optimum(&sweep));
    report(7, "coupling strength", coupling_computation());
    report(8, "oracle integrity", oracle_integrity());
    report(9, "weak-coupling cross-validation", weak_coupling());
    report(10, "determinism and parallel equivalence", determinism());

    println!("{} of 10 criteria failed", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
