//! Initial-value solver for -y'' + q(x) y = lambda y on a subinterval,
//! together with the normalized lambda-derivative jets
//! y<nu> = (1/nu!) d^nu y / d lambda^nu, which satisfy the variational chain
//! -u_nu'' + (q - lambda) u_nu = u_{nu-1} with zero initial data for nu >= 1.
//!
//! Fixed-step classical RK4 on the first-order complex system. Steps are a
//! multiple of the potential's grid segments so that the kinks of the
//! piecewise-linear interpolant fall on step boundaries and fourth-order
//! accuracy is preserved.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::problem::ProblemSpec;
use crate::trig::sqrt_lambda;

/// Endpoint values of a solution and its lambda-jets: `y[nu]` and
/// `yprime[nu]` hold the nu-th normalized derivative of y and y' at the
/// right end of the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionJet {
    pub y: Vec<Complex64>,
    pub yprime: Vec<Complex64>,
}

impl SolutionJet {
    pub fn order(&self) -> usize {
        self.y.len() - 1
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    /// Step density against oscillation: steps >= ceil(c |rho| d).
    pub steps_per_rho: f64,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            steps_per_rho: 8.0,
            min_steps: 8192,
            max_steps: 4_000_000,
        }
    }
}

impl IntegratorOptions {
    /// Coarse settings for tests that probe refinement behavior.
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps_per_rho: 0.0,
            min_steps: steps,
            max_steps: usize::MAX,
        }
    }

    fn step_count(&self, q: &ComplexGrid, lambda: Complex64) -> Result<usize> {
        let d = q.interval_length;
        let rho_abs = sqrt_lambda(lambda).norm();
        let oscillation = (self.steps_per_rho * rho_abs * d).ceil() as usize;
        let target = oscillation.max(self.min_steps).max(1);
        // round up to a multiple of the grid segment count
        let segs = q.len() - 1;
        let steps = segs * target.div_ceil(segs);
        if steps > self.max_steps {
            return Err(Error::StepOverflow {
                rho_abs,
                length: d,
                cap: self.max_steps,
            });
        }
        Ok(steps)
    }
}

/// Integrate the jet system over the full interval of `q` with initial data
/// (y0, yp0) for the 0-th jet and zero data for the higher jets.
pub fn integrate_jet(
    q: &ComplexGrid,
    lambda: Complex64,
    y0: Complex64,
    yp0: Complex64,
    nu_max: usize,
) -> Result<SolutionJet> {
    integrate_jet_with(q, lambda, y0, yp0, nu_max, &IntegratorOptions::default())
}

pub fn integrate_jet_with(
    q: &ComplexGrid,
    lambda: Complex64,
    y0: Complex64,
    yp0: Complex64,
    nu_max: usize,
    opts: &IntegratorOptions,
) -> Result<SolutionJet> {
    for v in [lambda, y0, yp0] {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite("integrator inputs"));
        }
    }
    let steps = opts.step_count(q, lambda)?;
    let h = q.interval_length / steps as f64;
    let m = nu_max + 1;

    // state layout: [y_0, y_0', y_1, y_1', ...]
    let mut state = vec![Complex64::ZERO; 2 * m];
    state[0] = y0;
    state[1] = yp0;

    let deriv = |qx: Complex64, s: &[Complex64], out: &mut [Complex64]| {
        for nu in 0..m {
            out[2 * nu] = s[2 * nu + 1];
            let mut acc = (qx - lambda) * s[2 * nu];
            if nu > 0 {
                acc -= s[2 * (nu - 1)];
            }
            out[2 * nu + 1] = acc;
        }
    };

    let mut k1 = vec![Complex64::ZERO; 2 * m];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    for step in 0..steps {
        let x = step as f64 * h;
        let q_lo = q.eval(x);
        let q_mid = q.eval(x + 0.5 * h);
        let q_hi = q.eval(x + h);

        deriv(q_lo, &state, &mut k1);
        for j in 0..2 * m {
            tmp[j] = state[j] + 0.5 * h * k1[j];
        }
        deriv(q_mid, &tmp, &mut k2);
        for j in 0..2 * m {
            tmp[j] = state[j] + 0.5 * h * k2[j];
        }
        deriv(q_mid, &tmp, &mut k3);
        for j in 0..2 * m {
            tmp[j] = state[j] + h * k3[j];
        }
        deriv(q_hi, &tmp, &mut k4);
        for j in 0..2 * m {
            state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }

    if state.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("integrator state"));
    }
    Ok(SolutionJet {
        y: (0..m).map(|nu| state[2 * nu]).collect(),
        yprime: (0..m).map(|nu| state[2 * nu + 1]).collect(),
    })
}

/// Jets of phi and phi' at x = a, where phi solves the inner problem with
/// phi(0) = 1, phi'(0) = h.
pub fn phi_jet(spec: &ProblemSpec, lambda: Complex64, nu_max: usize) -> Result<SolutionJet> {
    phi_jet_with(spec, lambda, nu_max, &IntegratorOptions::default())
}

pub fn phi_jet_with(
    spec: &ProblemSpec,
    lambda: Complex64,
    nu_max: usize,
    opts: &IntegratorOptions,
) -> Result<SolutionJet> {
    integrate_jet_with(&spec.q1, lambda, Complex64::ONE, spec.h, nu_max, opts)
}

/// Jets of psi_i and psi_i' at x = d2 = 1 - a, on the reflected outer
/// interval. i = 0 uses initial data (0, 1); i = 1 uses (1, H).
pub fn psi_jet(
    spec: &ProblemSpec,
    i: u8,
    lambda: Complex64,
    nu_max: usize,
) -> Result<SolutionJet> {
    psi_jet_with(spec, i, lambda, nu_max, &IntegratorOptions::default())
}

pub fn psi_jet_with(
    spec: &ProblemSpec,
    i: u8,
    lambda: Complex64,
    nu_max: usize,
    opts: &IntegratorOptions,
) -> Result<SolutionJet> {
    let (y0, yp0) = match i {
        0 => (Complex64::ZERO, Complex64::ONE),
        1 => (Complex64::ONE, spec.big_h.value()?),
        _ => {
            return Err(Error::InvalidInput(format!(
                "boundary-condition tag must be 0 or 1, got {i}"
            )))
        }
    };
    integrate_jet_with(&spec.q2, lambda, y0, yp0, nu_max, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::BoundaryH;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_q(d: f64) -> ComplexGrid {
        ComplexGrid::zeros(d, 8)
    }

    #[test]
    fn zero_potential_cosine() {
        let jet = integrate_jet(&zero_q(0.5), c(PI * PI, 0.0), Complex64::ONE, Complex64::ZERO, 0)
            .unwrap();
        assert!(jet.y[0].norm() < 1e-10);
        assert!((jet.yprime[0] - c(-PI, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn zero_potential_linear() {
        let jet =
            integrate_jet(&zero_q(0.5), Complex64::ZERO, Complex64::ONE, c(2.0, 0.0), 0).unwrap();
        assert!((jet.y[0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((jet.yprime[0] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn first_jet_closed_form() {
        // d/dlambda cos(rho x) = -x sin(rho x)/(2 rho); at x=1/2, lambda=pi^2
        let jet = integrate_jet(&zero_q(0.5), c(PI * PI, 0.0), Complex64::ONE, Complex64::ZERO, 1)
            .unwrap();
        assert!((jet.y[1] - c(-1.0 / (4.0 * PI), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn jet_matches_central_difference() {
        let q = ComplexGrid::from_fn(0.7, 64, |x| c((3.0 * x).sin(), 0.2 * x)).unwrap();
        let lam = c(11.0, 3.0);
        let d = 1e-4;
        let plus = integrate_jet(&q, lam + d, Complex64::ONE, c(0.5, 0.0), 0).unwrap();
        let minus = integrate_jet(&q, lam - d, Complex64::ONE, c(0.5, 0.0), 0).unwrap();
        let jet = integrate_jet(&q, lam, Complex64::ONE, c(0.5, 0.0), 1).unwrap();
        let fd = (plus.y[0] - minus.y[0]) / (2.0 * d);
        assert!((jet.y[1] - fd).norm() < 1e-7 * (1.0 + fd.norm()));
    }

    #[test]
    fn refinement_is_fourth_order() {
        let q = ComplexGrid::from_fn(1.0, 16, |x| c(x * x, -x)).unwrap();
        let lam = c(40.0, 1.0);
        let run = |steps: usize| {
            integrate_jet_with(
                &q,
                lam,
                Complex64::ONE,
                Complex64::ZERO,
                0,
                &IntegratorOptions::with_steps(steps),
            )
            .unwrap()
            .y[0]
        };
        let fine = run(16384);
        let e1 = (run(64) - fine).norm();
        let e2 = (run(128) - fine).norm();
        let order = (e1 / e2).log2();
        assert!(
            (order - 4.0).abs() < 0.4,
            "observed order {order}, errors {e1:.3e}/{e2:.3e}"
        );
    }

    #[test]
    fn branch_independent() {
        // same lambda handed to phi_jet is all that matters; check evenness by
        // comparing against the closed form built from either branch of rho
        let spec = ProblemSpec::zero_model(0.5);
        let lam = c(7.0, 4.0);
        let jet = phi_jet(&spec, lam, 0).unwrap();
        for rho in [sqrt_lambda(lam), -sqrt_lambda(lam)] {
            let expected = (rho * 0.5).cos();
            assert!((jet.y[0] - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn psi_initial_conditions() {
        let mut spec = ProblemSpec::zero_model(0.5);
        spec.big_h = BoundaryH::Value(c(3.0, 0.0));
        let p0 = psi_jet(&spec, 0, c(PI * PI, 0.0), 0).unwrap();
        assert!((p0.y[0] - c(1.0 / PI, 0.0)).norm() < 1e-10);
        assert!(p0.yprime[0].norm() < 1e-10);
        let p1 = psi_jet(&spec, 1, Complex64::ZERO, 0).unwrap();
        assert!((p1.y[0] - c(2.5, 0.0)).norm() < 1e-12);
        assert!((p1.yprime[0] - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn step_overflow_reported() {
        let opts = IntegratorOptions {
            steps_per_rho: 8.0,
            min_steps: 8,
            max_steps: 100,
        };
        let err = integrate_jet_with(
            &zero_q(1.0),
            c(1e8, 0.0),
            Complex64::ONE,
            Complex64::ZERO,
            0,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepOverflow { .. }));
    }
}
