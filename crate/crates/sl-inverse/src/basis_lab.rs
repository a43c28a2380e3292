//! Diagnostics for the functional-analytic machinery behind the inversion:
//! closed-form limit rows, Riesz-basis/frame proxies for cosine systems,
//! Bessel-type bounds, interpolation-error orders, row-norm asymptotics,
//! and decay of outer-solution perturbations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::maineq::{KnownData, SystemBuilder};
use crate::ode::{integrate_jet_with, IntegratorOptions};
use crate::problem::ProblemSpec;
use crate::spectra::Subspectrum;
use crate::trig::{composite_gl, integrate_pl_exp, osc_panels, sqrt_lambda};

/// One emitted checker record.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: serde_json::Value,
    pub statistic: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }
}

/// A system of cosine frequencies on (0, 2a), pairwise distinct and without
/// conjugate coincidences.
#[derive(Debug, Clone)]
pub struct FrequencySystem {
    pub alphas: Vec<Complex64>,
    /// The length 2a of the interval.
    pub interval_length: f64,
}

impl FrequencySystem {
    pub fn new(alphas: Vec<Complex64>, interval_length: f64) -> Result<Self> {
        if !(interval_length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "interval length must be positive, got {interval_length}"
            )));
        }
        for (k, ak) in alphas.iter().enumerate() {
            for al in alphas.iter().skip(k + 1) {
                let scale = 1e-9 * (1.0 + ak.norm());
                if (ak - al).norm() < scale {
                    return Err(Error::FrequencyHypothesis(format!(
                        "coincident frequencies near {ak}"
                    )));
                }
                if (ak - al.conj()).norm() < scale {
                    return Err(Error::FrequencyHypothesis(format!(
                        "conjugate-coincident frequencies near {ak}"
                    )));
                }
            }
        }
        Ok(Self {
            alphas,
            interval_length,
        })
    }

    /// Frequencies sqrt(mu) of a computed subspectrum.
    pub fn from_subspectrum(sub: &Subspectrum, a: f64) -> Result<Self> {
        Self::new(sub.mus().iter().map(|&m| sqrt_lambda(m)).collect(), 2.0 * a)
    }
}

/// The four closed forms u_{i,1}, u_{i,2}, v_1, v_2 at (t, lambda).
#[derive(Debug, Clone, Copy)]
pub struct ClosedForms {
    pub u1: Complex64,
    pub u2: Complex64,
    pub v1: Complex64,
    pub v2: Complex64,
}

/// Limit shapes of the basis rows and of the auxiliary pair (v1, v2):
///   u_{1,1} = (a1/2)[cos rho(d2+t) - cos rho(d2-t)],
///   u_{1,2} = -(1/2a1)[cos rho(d2-t) + cos rho(d2+t)],
///   u_{0,j} the analogous sine forms divided by rho,
///   v_1 = (1/2)[cos rho(a+t) - cos rho(a-t)],
///   v_2 = (1/2)[cos rho(a-t) + cos rho(a+t)].
pub fn closed_forms(t: f64, lambda: Complex64, i: u8, a1: f64, a: f64) -> ClosedForms {
    let rho = sqrt_lambda(lambda);
    let d2 = 1.0 - a;
    let cosr = |x: f64| (rho * x).cos();
    // sin(rho x) / rho with a stable small-rho branch
    let sincr = |x: f64| {
        if rho.norm() * x.abs() < 1e-6 {
            let z2 = (rho * x) * (rho * x);
            x * (Complex64::ONE - z2 / 6.0 + z2 * z2 / 120.0)
        } else {
            (rho * x).sin() / rho
        }
    };
    let (u1, u2) = if i == 1 {
        (
            0.5 * a1 * (cosr(d2 + t) - cosr(d2 - t)),
            -0.5 / a1 * (cosr(d2 - t) + cosr(d2 + t)),
        )
    } else {
        (
            0.5 * a1 * (sincr(d2 + t) - sincr(d2 - t)),
            -0.5 / a1 * (sincr(d2 - t) + sincr(d2 + t)),
        )
    };
    ClosedForms {
        u1,
        u2,
        v1: 0.5 * (cosr(a + t) - cosr(a - t)),
        v2: 0.5 * (cosr(a - t) + cosr(a + t)),
    }
}

/// int_0^L cos(beta t) cos(gamma t) dt, exact with stable small-frequency
/// branches.
fn int_cos_cos(beta: Complex64, gamma: Complex64, length: f64) -> Complex64 {
    let half_sinc = |z: Complex64| {
        // sin(z L)/z with series branch
        if z.norm() * length < 1e-6 {
            let w = z * length;
            length * (Complex64::ONE - w * w / 6.0)
        } else {
            (z * length).sin() / z
        }
    };
    0.5 * (half_sinc(beta - gamma) + half_sinc(beta + gamma))
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszDiagnostics {
    pub condition: f64,
    pub frame_lower: f64,
    pub frame_upper: f64,
}

/// Extreme eigenvalues of the M x M Gram section of {cos(alpha_n t)} on
/// (0, 2a) as frame-bound proxies.
pub fn riesz_diagnostics(fs: &FrequencySystem, m: usize) -> Result<RieszDiagnostics> {
    if m == 0 || m > fs.alphas.len() {
        return Err(Error::InvalidInput(format!(
            "section size {m} exceeds the {} available frequencies",
            fs.alphas.len()
        )));
    }
    let length = fs.interval_length;
    let gram = DMatrix::from_fn(m, m, |j, k| {
        int_cos_cos(fs.alphas[j].conj(), fs.alphas[k], length)
    });
    // Gram matrices are Hermitian positive semidefinite, so the singular
    // values are the eigenvalues.
    let sv = gram.singular_values();
    let upper = sv.iter().cloned().fold(0.0, f64::max);
    let lower = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lower > 0.0) {
        return Err(Error::FrequencyHypothesis(
            "degenerate Gram section: frame lower bound is zero".into(),
        ));
    }
    Ok(RieszDiagnostics {
        condition: upper / lower,
        frame_lower: lower,
        frame_upper: upper,
    })
}

/// |<v_j, v_k> - (1/2) int_0^{2a} cos(conj(alpha_j) t) cos(alpha_k t) dt|
/// with both sides computed by independent quadratures.
pub fn vn_identity_check(alpha_j: Complex64, alpha_k: Complex64, a: f64) -> f64 {
    let freq = alpha_j.norm() + alpha_k.norm();
    let panels = osc_panels(freq + 4.0, a).max(8);
    let lhs = composite_gl(
        |t| {
            let fj = closed_forms(t, alpha_j * alpha_j, 1, 1.0, a);
            let fk = closed_forms(t, alpha_k * alpha_k, 1, 1.0, a);
            // inner product conjugates the first slot; the v-forms use
            // rho = alpha_j directly (conjugation turns it into conj(alpha))
            fj.v1.conj() * fk.v1 + fj.v2.conj() * fk.v2
        },
        0.0,
        a,
        panels,
        16,
    );
    let rhs = composite_gl(
        |t| 0.5 * (alpha_j.conj() * t).cos() * (alpha_k * t).cos(),
        0.0,
        2.0 * a,
        2 * panels,
        16,
    );
    (lhs - rhs).norm()
}

#[derive(Debug, Clone, Serialize)]
pub struct BesselCheck {
    /// sum_n |int_{-b}^b W(t) e^{i rho_n t} dt|^2
    pub sum: f64,
    /// The sum relative to ||W||^2.
    pub bound_ratio: f64,
}

/// Bessel-type bound for exponentials at separated frequencies with bounded
/// imaginary parts; `w` lives on (-b, b) with b = interval_length / 2.
pub fn bessel_check(rhos: &[Complex64], w: &ComplexGrid) -> Result<BesselCheck> {
    for (n, rn) in rhos.iter().enumerate() {
        for rm in rhos.iter().skip(n + 1) {
            if (rn - rm).norm() < 1e-8 {
                return Err(Error::FrequencyHypothesis(format!(
                    "frequencies not separated near {rn}"
                )));
            }
        }
    }
    let b = 0.5 * w.interval_length;
    let norm_sq = w.l2_norm().powi(2);
    if norm_sq == 0.0 {
        return Err(Error::InvalidInput("zero test function".into()));
    }
    let mut sum = 0.0;
    for &rho in rhos {
        // shift (-b,b) to the grid's (0,2b) parameterization
        let f = (-Complex64::I * rho * b).exp() * integrate_pl_exp(w, rho);
        sum += f.norm_sqr();
    }
    Ok(BesselCheck {
        sum,
        bound_ratio: sum / norm_sq,
    })
}

/// Analytic test functions for the interpolation-order check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Exp,
    Square,
}

impl TestFunction {
    /// Normalized jets f^(k)(z)/k! for k = 0..=order.
    fn jets(self, z: Complex64, order: usize) -> Vec<Complex64> {
        match self {
            TestFunction::Exp => {
                let mut out = vec![z.exp()];
                let mut fact = 1.0;
                for k in 1..=order {
                    fact *= k as f64;
                    out.push(z.exp() / fact);
                }
                out
            }
            TestFunction::Square => {
                let mut out = vec![z * z, 2.0 * z, Complex64::ONE];
                out.truncate(order + 1);
                out.resize(order + 1, Complex64::ZERO);
                out
            }
        }
    }
}

/// p^<j>(z0) for the polynomial interpolating f at distinct `nodes`
/// (Newton divided differences, jet Horner evaluation).
fn interp_jet(f: TestFunction, nodes: &[Complex64], z0: Complex64, j: usize) -> Complex64 {
    let m = nodes.len();
    let mut table: Vec<Complex64> = nodes.iter().map(|&z| f.jets(z, 0)[0]).collect();
    let mut coeffs = vec![table[0]];
    for k in 1..m {
        for idx in 0..m - k {
            table[idx] = (table[idx + 1] - table[idx]) / (nodes[idx + k] - nodes[idx]);
        }
        coeffs.push(table[0]);
    }
    let mut jets = vec![Complex64::ZERO; j + 1];
    jets[0] = coeffs[m - 1];
    for k in (0..m - 1).rev() {
        let shift = z0 - nodes[k];
        let mut next = vec![Complex64::ZERO; j + 1];
        for nu in 0..=j {
            next[nu] = jets[nu] * shift;
            if nu >= 1 {
                next[nu] += jets[nu - 1];
            }
        }
        next[0] += coeffs[k];
        jets = next;
    }
    jets[j]
}

/// Interpolation nodes for radius r: asymmetric spread around z0 so the
/// generic error order m - j is observed (symmetric stencils superconverge).
fn spread_nodes(z0: Complex64, r: f64, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|k| {
            let angle = 0.7 + 2.1 * k as f64;
            let radius = r * (0.55 + 0.45 * (k + 1) as f64 / m as f64);
            z0 + radius * Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

/// Observed order of |f^<j>(z0) - p^<j>(z0)| as the node radius shrinks;
/// expected close to m - j.
pub fn interp_error_check(
    f: TestFunction,
    z0: Complex64,
    m: usize,
    j: usize,
    radii: &[f64],
) -> Result<f64> {
    if radii.len() < 3 {
        return Err(Error::InvalidInput(
            "order fit needs at least 3 radii".into(),
        ));
    }
    if j >= m {
        return Err(Error::InvalidInput(format!(
            "derivative order {j} must be below the node count {m}"
        )));
    }
    let mut logs = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::InvalidInput(format!(
                "node radius must be in (0, 1/2), got {r}"
            )));
        }
        let nodes = spread_nodes(z0, r, m);
        let err = (f.jets(z0, j)[j] - interp_jet(f, &nodes, z0, j)).norm();
        logs.push((r.ln(), err.max(1e-300).ln()));
    }
    // least-squares slope of log error vs log radius
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Deviations ||U_n^i||^2 * 4 |mu_n|^{1-i} / ((a1^2 + a1^-2) a) - 1 per
/// subspectrum entry; the tail must stay bounded in modulus by a constant
/// below 1.
pub fn norm_asymptotics_check(spec: &ProblemSpec, sub: &Subspectrum, i: u8) -> Result<Vec<f64>> {
    let known = KnownData::from_spec(spec);
    let builder = SystemBuilder::new(&known)?;
    let a1 = spec.a1;
    let scale = (a1 * a1 + 1.0 / (a1 * a1)) * spec.a / 4.0;
    let mut out = Vec::new();
    for (mu, _) in sub.taken_once() {
        let (row, _) = builder.plain_row(i, mu, 0)?;
        let weight = if i == 0 { mu.norm() } else { 1.0 };
        out.push(row.norm_sq() * weight / scale - 1.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// |psi0~ - psi0|(d2) * rho^2 per sample.
    pub psi0_scaled: Vec<f64>,
    /// |psi0~' - psi0'|(d2) * rho per sample.
    pub dpsi0_scaled: Vec<f64>,
    /// |psi1~ - psi1|(d2) * rho per sample.
    pub psi1_scaled: Vec<f64>,
    /// |psi1~' - psi1'|(d2) per sample.
    pub dpsi1_scaled: Vec<f64>,
}

impl DecayReport {
    pub fn sups(&self) -> [f64; 4] {
        let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        [
            sup(&self.psi0_scaled),
            sup(&self.dpsi0_scaled),
            sup(&self.psi1_scaled),
            sup(&self.dpsi1_scaled),
        ]
    }
}

/// Decay of outer-solution differences under a mean-preserving perturbation
/// of q2: the scaled differences must stay bounded over the rho samples.
pub fn perturbation_decay_check(
    q2: &ComplexGrid,
    q2_tilde: &ComplexGrid,
    big_h: Complex64,
    rho_samples: &[f64],
) -> Result<DecayReport> {
    if (q2.interval_length - q2_tilde.interval_length).abs() > 1e-12 {
        return Err(Error::InvalidInput(
            "perturbed potential lives on a different interval".into(),
        ));
    }
    let mean_gap = (q2_tilde.integral() - q2.integral()).norm();
    let tol = 1e-8 * (1.0 + q2.l2_norm() + q2_tilde.l2_norm());
    if mean_gap > tol {
        return Err(Error::MeanNotPreserved(mean_gap));
    }
    let one = Complex64::ONE;
    let zero = Complex64::ZERO;
    let opts = IntegratorOptions::default();
    let mut report = DecayReport {
        psi0_scaled: Vec::new(),
        dpsi0_scaled: Vec::new(),
        psi1_scaled: Vec::new(),
        dpsi1_scaled: Vec::new(),
    };
    for &rho in rho_samples {
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rho samples must be positive, got {rho}"
            )));
        }
        let lambda = Complex64::new(rho * rho, 0.0);
        let p0 = integrate_jet_with(q2, lambda, zero, one, 0, &opts)?;
        let p0t = integrate_jet_with(q2_tilde, lambda, zero, one, 0, &opts)?;
        let p1 = integrate_jet_with(q2, lambda, one, big_h, 0, &opts)?;
        let p1t = integrate_jet_with(q2_tilde, lambda, one, big_h, 0, &opts)?;
        report.psi0_scaled.push((p0t.y[0] - p0.y[0]).norm() * rho * rho);
        report
            .dpsi0_scaled
            .push((p0t.yprime[0] - p0.yprime[0]).norm() * rho);
        report.psi1_scaled.push((p1t.y[0] - p1.y[0]).norm() * rho);
        report
            .dpsi1_scaled
            .push((p1t.yprime[0] - p1.yprime[0]).norm());
    }
    Ok(report)
}
