//! Adaptive one-step integrators for autonomous systems `y' = f(y)`.
//!
//! Two schemes are provided: Dormand–Prince 5(4) for non-stiff problems and the
//! L-stable Rosenbrock 2(3) pair of Shampine & Reichelt for stiff ones. Both are
//! driven by the same accept/reject loop in [`drive`].

use nalgebra::{DMatrix, DVector};

/// Right-hand side of an autonomous ODE system.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64], dy: &mut [f64]);

    /// ∂f/∂y. The default uses central differences.
    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.dim();
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for col in 0..n {
            let h = f64::EPSILON.cbrt() * y[col].abs().max(1.0);
            yp[col] = y[col] + h;
            self.eval(&yp, &mut fp);
            yp[col] = y[col] - h;
            self.eval(&yp, &mut fm);
            yp[col] = y[col];
            for row in 0..n {
                jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// Rosenbrock for stiff parameter sets, Dormand–Prince otherwise.
    #[default]
    Auto,
    DormandPrince,
    Rosenbrock,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::DormandPrince => "dormand-prince",
            Method::Rosenbrock => "rosenbrock",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Method::Auto),
            "dormand-prince" | "dopri5" => Some(Method::DormandPrince),
            "rosenbrock" | "ros23" => Some(Method::Rosenbrock),
            _ => None,
        }
    }
}

/// Smallest step the drivers accept before declaring failure, ps.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct DriveOptions {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: Vec<f64>,
    pub initial_step: f64,
    pub max_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub(crate) struct DriveOutcome {
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug)]
pub(crate) enum StepFailure {
    Collapse { t: f64, h: f64 },
    NonFinite { t: f64 },
}

trait Stepper {
    /// Error-estimator order plus one, used for the step-size exponent.
    const ERR_EXPONENT: f64;

    /// Fraction of the requested tolerance the local error is held to.
    const TOL_FRACTION: f64 = 1.0;

    /// Attempts one step of size `h` from `y`, writing the candidate into `y_new`
    /// and the local error estimate into `err`.
    fn attempt<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]);

    /// Called after a step is accepted.
    fn accept(&mut self) {}
}

struct DormandPrince {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    fsal_valid: bool,
}

impl DormandPrince {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            fsal_valid: false,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Stepper for DormandPrince {
    const ERR_EXPONENT: f64 = 5.0;
    const TOL_FRACTION: f64 = 0.1;

    fn attempt<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        if !self.fsal_valid {
            sys.eval(y, k1);
        }
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.eval(tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.eval(tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.eval(tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.eval(tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.eval(tmp, k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.eval(y_new, k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        self.fsal_valid = true;
    }

    fn accept(&mut self) {
        self.k.swap(0, 6);
    }
}

struct Rosenbrock23 {
    jac: DMatrix<f64>,
    f0: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    k1: DVector<f64>,
    k2: DVector<f64>,
    tmp: Vec<f64>,
}

impl Rosenbrock23 {
    fn new(n: usize) -> Self {
        Self {
            jac: DMatrix::zeros(n, n),
            f0: vec![0.0; n],
            f1: vec![0.0; n],
            f2: vec![0.0; n],
            k1: DVector::zeros(n),
            k2: DVector::zeros(n),
            tmp: vec![0.0; n],
        }
    }
}

impl Stepper for Rosenbrock23 {
    const ERR_EXPONENT: f64 = 3.0;

    fn attempt<S: OdeSystem>(&mut self, sys: &S, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) {
        let n = y.len();
        let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
        let e32 = 6.0 + std::f64::consts::SQRT_2;

        sys.eval(y, &mut self.f0);
        sys.jacobian(y, &mut self.jac);
        let w = DMatrix::<f64>::identity(n, n) - &self.jac * (h * d);
        let lu = w.lu();
        let solve = |rhs: DVector<f64>| lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(n, f64::NAN));

        self.k1 = solve(DVector::from_column_slice(&self.f0));
        for ((t, yi), k) in self.tmp.iter_mut().zip(y).zip(self.k1.iter()) {
            *t = yi + 0.5 * h * k;
        }
        sys.eval(&self.tmp, &mut self.f1);
        let r2 = DVector::from_fn(n, |i, _| self.f1[i] - self.k1[i]);
        self.k2 = solve(r2) + &self.k1;
        for i in 0..n {
            y_new[i] = y[i] + h * self.k2[i];
        }
        sys.eval(y_new, &mut self.f2);
        let r3 = DVector::from_fn(n, |i, _| {
            self.f2[i] - e32 * (self.k2[i] - self.f1[i]) - 2.0 * (self.k1[i] - self.f0[i])
        });
        let k3 = solve(r3);
        for i in 0..n {
            err[i] = h / 6.0 * (self.k1[i] - 2.0 * self.k2[i] + k3[i]);
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], rel_tol: f64, abs_tol: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..y.len() {
        let scale = abs_tol[i] + rel_tol * y[i].abs().max(y_new[i].abs());
        let r = (err[i] / scale).abs();
        if r.is_nan() {
            return f64::NAN;
        }
        worst = worst.max(r);
    }
    worst
}

/// Integrates from `t = 0` to `t_end`, calling `on_accept` after every accepted
/// step. Returning [`Flow::Stop`] ends the integration early.
pub(crate) fn drive<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    opts: &DriveOptions,
    on_accept: impl FnMut(f64, &[f64]) -> Flow,
) -> Result<DriveOutcome, StepFailure> {
    let n = sys.dim();
    match opts.method {
        Method::Rosenbrock => run(Rosenbrock23::new(n), sys, y0, t_end, opts, on_accept),
        _ => run(DormandPrince::new(n), sys, y0, t_end, opts, on_accept),
    }
}

fn run<St: Stepper, S: OdeSystem>(
    mut stepper: St,
    sys: &S,
    y0: &[f64],
    t_end: f64,
    opts: &DriveOptions,
    mut on_accept: impl FnMut(f64, &[f64]) -> Flow,
) -> Result<DriveOutcome, StepFailure> {
    const SAFETY: f64 = 0.9;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 5.0;

    let n = y0.len();
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut t = 0.0;
    let mut h = opts.initial_step.min(opts.max_step).min(t_end);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut last_rejection_nonfinite = false;

    while t < t_end {
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        stepper.attempt(sys, &y, h_try, &mut y_new, &mut err);
        let e = error_norm(&y, &y_new, &err, opts.rel_tol, &opts.abs_tol) / St::TOL_FRACTION;
        let finite = e.is_finite() && y_new.iter().all(|v| v.is_finite());

        if finite && e <= 1.0 {
            t = if last { t_end } else { t + h_try };
            std::mem::swap(&mut y, &mut y_new);
            stepper.accept();
            accepted += 1;
            last_rejection_nonfinite = false;
            if on_accept(t, &y) == Flow::Stop {
                break;
            }
            let fac = if e == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * e.powf(-1.0 / St::ERR_EXPONENT)).clamp(FAC_MIN, FAC_MAX)
            };
            if !last {
                h = (h_try * fac).min(opts.max_step);
            }
        } else {
            // A rejected Dormand–Prince attempt keeps f(y) in its first stage.
            rejected += 1;
            let fac = if finite {
                (SAFETY * e.powf(-1.0 / St::ERR_EXPONENT)).clamp(FAC_MIN, 1.0)
            } else {
                last_rejection_nonfinite = true;
                0.1
            };
            h = h_try * fac;
            if h < MIN_STEP {
                return Err(if last_rejection_nonfinite {
                    StepFailure::NonFinite { t }
                } else {
                    StepFailure::Collapse { t, h }
                });
            }
        }
    }
    Ok(DriveOutcome { y, accepted, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    /// Harmonic oscillator, non-stiff.
    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    fn opts(method: Method, rel_tol: f64) -> DriveOptions {
        DriveOptions {
            method,
            rel_tol,
            abs_tol: vec![1e-14; 2],
            initial_step: 1e-3,
            max_step: f64::INFINITY,
        }
    }

    fn oscillator_error(method: Method, rel_tol: f64) -> f64 {
        let out = drive(&Oscillator, &[1.0, 0.0], 10.0, &opts(method, rel_tol), |_, _| Flow::Continue).unwrap();
        ((out.y[0] - 10f64.cos()).powi(2) + (out.y[1] + 10f64.sin()).powi(2)).sqrt()
    }

    #[test]
    fn both_methods_converge_on_oscillator() {
        for method in [Method::DormandPrince, Method::Rosenbrock] {
            let coarse = oscillator_error(method, 1e-5);
            let fine = oscillator_error(method, 1e-8);
            assert!(fine < coarse, "{method:?}: {fine} !< {coarse}");
            assert!(fine < 1e-5, "{method:?}: {fine}");
        }
    }

    #[test]
    fn rosenbrock_handles_stiff_decay() {
        let out = drive(&Decay(1e5), &[1.0], 10.0, &opts(Method::Rosenbrock, 1e-9), |_, _| Flow::Continue).unwrap();
        assert!(out.y[0].abs() < 1e-12);
        assert!(out.accepted < 20_000, "{} steps", out.accepted);
    }

    #[test]
    fn stop_ends_early() {
        let out = drive(&Decay(1.0), &[1.0], 10.0, &opts(Method::DormandPrince, 1e-9), |t, _| {
            if t > 1.0 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })
        .unwrap();
        assert!(out.y[0] < (-1.0f64).exp() && out.y[0] > (-10.0f64).exp());
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        let res = drive(&Blowup, &[1.0], 2.0, &opts(Method::DormandPrince, 1e-9), |_, _| Flow::Continue);
        assert!(res.is_err());
    }
}
