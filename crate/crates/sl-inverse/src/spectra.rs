//! Characteristic functions Delta_0, Delta_1, explicit model spectra with
//! asymptotic corrections, and complex eigenvalue enumeration with
//! multiplicity detection via the argument principle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{phi_jet_with, psi_jet_with, IntegratorOptions};
use crate::problem::{BoundaryH, ProblemSpec};
use crate::trig::{jet_mul, sqrt_lambda};

/// One eigenvalue with its multiplicity and the boundary-condition tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub multiplicity: usize,
    pub i: u8,
}

/// Eigenvalues of one boundary-value problem, sorted by |lambda|
/// nondecreasing (ties broken by real then imaginary part).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspectrum {
    pub i: u8,
    pub points: Vec<SpectralPoint>,
}

fn sort_key(lambda: Complex64) -> (f64, f64, f64) {
    (lambda.norm(), lambda.re, lambda.im)
}

impl Subspectrum {
    pub fn new(i: u8, mut points: Vec<SpectralPoint>) -> Result<Self> {
        if points.iter().any(|p| p.multiplicity == 0) {
            return Err(Error::InvalidInput("multiplicity must be >= 1".into()));
        }
        if points.iter().any(|p| p.i != i) {
            return Err(Error::InvalidInput(
                "spectral point tagged with the wrong boundary condition".into(),
            ));
        }
        points.sort_by(|x, y| {
            sort_key(x.lambda)
                .partial_cmp(&sort_key(y.lambda))
                .unwrap()
        });
        Ok(Self { i, points })
    }

    /// The mu-renumbering: eigenvalues repeated with multiplicity,
    /// |mu_{k+1}| >= |mu_k|.
    pub fn mus(&self) -> Vec<Complex64> {
        self.points
            .iter()
            .flat_map(|p| std::iter::repeat(p.lambda).take(p.multiplicity))
            .collect()
    }

    /// Distinct eigenvalues ("taken once") with multiplicities, in mu order.
    pub fn taken_once(&self) -> Vec<(Complex64, usize)> {
        self.points
            .iter()
            .map(|p| (p.lambda, p.multiplicity))
            .collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,i,re_lambda,im_lambda,multiplicity\n");
        for (k, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{}\n",
                k, p.i, p.lambda.re, p.lambda.im, p.multiplicity
            ));
        }
        out
    }
}

/// Parse spectral points from CSV (columns index,i,re_lambda,im_lambda,multiplicity).
pub fn points_from_csv(text: &str) -> Result<Vec<SpectralPoint>> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("index") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidInput(format!(
                "csv line {}: expected 5 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("csv line {}: bad number {s:?}", lineno + 1)))
        };
        let i = parse(fields[1])? as u8;
        let mult = parse(fields[4])? as usize;
        points.push(SpectralPoint {
            lambda: Complex64::new(parse(fields[2])?, parse(fields[3])?),
            multiplicity: mult.max(1),
            i,
        });
    }
    Ok(points)
}

/// Coefficients of the model characteristic functions and the first-order
/// asymptotic corrections (b_pm = (a1 pm a1^-1)/2 etc.).
#[derive(Debug, Clone, Copy)]
pub struct ModelSpectrumParams {
    pub b_plus: f64,
    pub b_minus: f64,
    pub eta_plus: Complex64,
    pub eta_minus: Complex64,
    pub zeta_plus: Complex64,
    pub zeta_minus: Complex64,
    pub omega0: Complex64,
    pub omega1: Complex64,
    pub omega2: Complex64,
}

impl ModelSpectrumParams {
    /// Build from a problem spec. For i = 1 a finite H is required (omega2
    /// and the eta coefficients depend on it); for i = 0 an infinite H leaves
    /// omega2 and eta zeroed, which the i = 0 formulas never read.
    pub fn from_spec(spec: &ProblemSpec, i: u8) -> Result<Self> {
        let omega0 = spec.omega0();
        let omega1 = spec.omega1();
        let omega2 = match (&spec.big_h, i) {
            (BoundaryH::Value(v), _) => v + omega0,
            (BoundaryH::Infinity, 0) => Complex64::ZERO,
            (BoundaryH::Infinity, _) => {
                return Err(Error::InvalidInput(
                    "H = infinity: the i = 1 model spectrum is undefined".into(),
                ))
            }
        };
        let b_plus = (spec.a1 + 1.0 / spec.a1) / 2.0;
        let b_minus = (spec.a1 - 1.0 / spec.a1) / 2.0;
        let half_a2 = 0.5 * spec.a2;
        Ok(Self {
            b_plus,
            b_minus,
            eta_plus: b_plus * (omega2 + omega1) + half_a2,
            // expanding phi0 g11 - phi1 g10 to O(1): the a2/2 enters the
            // cos rho(2a-1) coefficient with a plus sign
            eta_minus: b_minus * (omega2 - omega1) + half_a2,
            zeta_plus: b_plus * (omega1 + omega0) + half_a2,
            zeta_minus: b_minus * (omega1 - omega0) - half_a2,
            omega0,
            omega1,
            omega2,
        })
    }

    /// The rho-profile whose zeros (together with rho = 0 for i = 1) are the
    /// model eigenvalue square roots: F1 = b+ sin rho - b- sin rho(2a-1),
    /// F0 = b+ cos rho + b- cos rho(2a-1).
    fn profile(&self, a: f64, i: u8, rho: f64) -> f64 {
        let w = 2.0 * a - 1.0;
        match i {
            1 => self.b_plus * rho.sin() - self.b_minus * (rho * w).sin(),
            _ => self.b_plus * rho.cos() + self.b_minus * (rho * w).cos(),
        }
    }

    fn profile_deriv(&self, a: f64, i: u8, rho: f64) -> f64 {
        let w = 2.0 * a - 1.0;
        match i {
            1 => self.b_plus * rho.cos() - self.b_minus * w * (rho * w).cos(),
            _ => -self.b_plus * rho.sin() - self.b_minus * w * (rho * w).sin(),
        }
    }

    /// d/dlambda of the model characteristic function at a model zero rho0.
    pub fn model_delta_dot(&self, a: f64, i: u8, rho0: f64) -> f64 {
        if i == 1 {
            if rho0 == 0.0 {
                // Delta_1^0(lambda) ~ -lambda (b+ - b- (2a-1)) near lambda = 0
                -(self.b_plus - self.b_minus * (2.0 * a - 1.0))
            } else {
                // Delta_1^0 = -rho F1(rho); at F1 = 0: d/dlambda = -F1'(rho0)/2
                -self.profile_deriv(a, 1, rho0) / 2.0
            }
        } else {
            self.profile_deriv(a, 0, rho0) / (2.0 * rho0)
        }
    }
}

/// Jets of g_{i,0} = -a1^{-1} psi_i(d2) and g_{i,1} = a1 psi_i'(d2) + a2 psi_i(d2).
pub fn g_jet(
    spec: &ProblemSpec,
    i: u8,
    lambda: Complex64,
    nu_max: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    g_jet_with(spec, i, lambda, nu_max, &IntegratorOptions::default())
}

pub fn g_jet_with(
    spec: &ProblemSpec,
    i: u8,
    lambda: Complex64,
    nu_max: usize,
    opts: &IntegratorOptions,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let psi = psi_jet_with(spec, i, lambda, nu_max, opts)?;
    let a1_inv = 1.0 / spec.a1;
    let g0 = psi.y.iter().map(|v| -a1_inv * v).collect();
    let g1 = psi
        .yprime
        .iter()
        .zip(&psi.y)
        .map(|(dp, p)| spec.a1 * dp + spec.a2 * p)
        .collect();
    Ok((g0, g1))
}

/// Jet of the characteristic function Delta_i = phi0 g_{i,1} - phi1 g_{i,0}.
pub fn delta(spec: &ProblemSpec, i: u8, lambda: Complex64, nu_max: usize) -> Result<Vec<Complex64>> {
    delta_with(spec, i, lambda, nu_max, &IntegratorOptions::default())
}

pub fn delta_with(
    spec: &ProblemSpec,
    i: u8,
    lambda: Complex64,
    nu_max: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<Complex64>> {
    let phi = phi_jet_with(spec, lambda, nu_max, opts)?;
    let (g0, g1) = g_jet_with(spec, i, lambda, nu_max, opts)?;
    let t1 = jet_mul(&phi.y, &g1, nu_max);
    let t2 = jet_mul(&phi.yprime, &g0, nu_max);
    Ok(t1.iter().zip(&t2).map(|(x, y)| x - y).collect())
}

/// The rho-values of the first `count` model eigenvalues, nondecreasing.
pub fn model_rho_zeros(
    params: &ModelSpectrumParams,
    a: f64,
    i: u8,
    count: usize,
) -> Result<Vec<f64>> {
    let mut zeros = Vec::with_capacity(count);
    if i == 1 {
        zeros.push(0.0); // Delta_1^0 has the simple lambda-zero at 0
    }
    let step = 0.02;
    let limit = (count as f64 + 8.0) * std::f64::consts::PI / (1.0 - (2.0 * a - 1.0).abs()).max(0.25);
    let mut rho = 1e-4;
    let mut prev = params.profile(a, i, rho);
    while zeros.len() < count && rho < limit {
        let next_rho = rho + step;
        let next = params.profile(a, i, next_rho);
        if prev == 0.0 {
            zeros.push(rho);
        } else if prev * next < 0.0 {
            // bisection then Newton polish
            let (mut lo, mut hi) = (rho, next_rho);
            let mut flo = prev;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = params.profile(a, i, mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let mut root = 0.5 * (lo + hi);
            for _ in 0..4 {
                let d = params.profile_deriv(a, i, root);
                if d.abs() > 1e-12 {
                    root -= params.profile(a, i, root) / d;
                }
            }
            zeros.push(root);
        }
        rho = next_rho;
        prev = next;
    }
    if zeros.len() < count {
        return Err(Error::BracketingFailed {
            found: zeros.len(),
            needed: count,
        });
    }
    zeros.truncate(count);
    Ok(zeros)
}

/// The first `count` model eigenvalues lambda0 = (rho0)^2, real, nondecreasing.
pub fn model_spectrum(
    params: &ModelSpectrumParams,
    a: f64,
    i: u8,
    count: usize,
) -> Result<Vec<f64>> {
    Ok(model_rho_zeros(params, a, i, count)?
        .iter()
        .map(|r| r * r)
        .collect())
}

/// First-order correction theta_{i,n} at a model zero rho0.
pub fn theta_correction(
    params: &ModelSpectrumParams,
    a: f64,
    i: u8,
    rho0: f64,
) -> Result<Complex64> {
    let dot = params.model_delta_dot(a, i, rho0);
    if dot.abs() < 1e-8 * params.b_plus {
        return Err(Error::DegenerateModelZero { rho0 });
    }
    let w = 2.0 * a - 1.0;
    Ok(match i {
        1 => {
            -(params.eta_plus * rho0.cos() + params.eta_minus * (rho0 * w).cos()) / (2.0 * dot)
        }
        _ => {
            -(params.zeta_plus * rho0.sin() + params.zeta_minus * (rho0 * w).sin())
                / (2.0 * rho0 * dot)
        }
    })
}

/// Residuals kappa_{i,n} = (rho_{i,n} - rho0_{i,n}) rho0_{i,n} - theta_{i,n}
/// of the asymptotic law rho = rho0 + theta/rho0 + kappa/rho0.
pub fn asymptotic_residuals(
    spectrum: &Subspectrum,
    model_lambda0: &[f64],
    thetas: &[Complex64],
) -> Result<Vec<Complex64>> {
    let mus = spectrum.mus();
    if mus.len() < model_lambda0.len() || model_lambda0.len() != thetas.len() {
        return Err(Error::InvalidInput(format!(
            "asymptotic residuals: got {} eigenvalues, {} model zeros, {} thetas",
            mus.len(),
            model_lambda0.len(),
            thetas.len()
        )));
    }
    Ok(model_lambda0
        .iter()
        .zip(thetas)
        .zip(&mus)
        .map(|((&lam0, &theta), &mu)| {
            let rho0 = lam0.max(0.0).sqrt();
            (sqrt_lambda(mu) - rho0) * rho0 - theta
        })
        .collect())
}

/// Partial sums of |kappa_n|^2 (for l^2-stabilization diagnostics).
pub fn ell2_partial_sums(kappas: &[Complex64]) -> Vec<f64> {
    let mut acc = 0.0;
    kappas
        .iter()
        .map(|k| {
            acc += k.norm_sqr();
            acc
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Eigenvalue enumeration
// ---------------------------------------------------------------------------

const NEWTON_MAX_ITERS: usize = 50;
const CONTOUR_MAX_DEPTH: usize = 13;

fn multiplicity_radius(lambda: Complex64) -> f64 {
    (1e-6 * (1.0 + lambda.norm())).max(1e-4)
}

/// Evaluates (Delta, Delta') at a point; caches nothing, carries options.
struct DeltaEval<'a> {
    spec: &'a ProblemSpec,
    i: u8,
    opts: IntegratorOptions,
}

impl DeltaEval<'_> {
    fn eval(&self, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let j = delta_with(self.spec, self.i, lambda, 1, &self.opts)?;
        Ok((j[0], j[1]))
    }
}

/// Winding number and power sums s_p = (1/2 pi i) oint lambda^p Delta'/Delta
/// along a closed parametrized path, by adaptive phase-tracking refinement.
fn contour_scan(
    ev: &DeltaEval,
    path: &dyn Fn(f64) -> Complex64,
    n0: usize,
    p_max: usize,
) -> Result<(i64, Vec<Complex64>)> {
    struct Node {
        lambda: Complex64,
        d: Complex64,
        dd: Complex64,
    }
    let probe = |t: f64| -> Result<Node> {
        let lambda = path(t);
        let (d, dd) = ev.eval(lambda)?;
        Ok(Node { lambda, d, dd })
    };
    let mut ts: Vec<f64> = (0..=n0).map(|j| j as f64 / n0 as f64).collect();
    let mut nodes: Vec<Node> = ts.iter().map(|&t| probe(t)).collect::<Result<_>>()?;
    let scale = nodes.iter().map(|n| n.d.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::ContourFailed { lambda: path(0.0) });
    }

    let mut phase = 0.0;
    let mut sums = vec![Complex64::ZERO; p_max + 1];
    let mut k = 0;
    while k + 1 < ts.len() {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        if a.d.norm() < 1e-13 * scale {
            return Err(Error::ContourFailed { lambda: a.lambda });
        }
        let dphi = (b.d / a.d).arg();
        let fine_enough = dphi.abs() < 1.0 && (b.d.norm() > 1e-13 * scale);
        // depth limit expressed through minimal parameter spacing
        let dt = ts[k + 1] - ts[k];
        if fine_enough || dt < 1.0 / (n0 as f64 * (1 << CONTOUR_MAX_DEPTH) as f64) {
            if !fine_enough {
                return Err(Error::ContourFailed { lambda: a.lambda });
            }
            phase += dphi;
            let dl = b.lambda - a.lambda;
            for (p, s) in sums.iter_mut().enumerate() {
                let fa = a.lambda.powu(p as u32) * (a.dd / a.d);
                let fb = b.lambda.powu(p as u32) * (b.dd / b.d);
                *s += 0.5 * (fa + fb) * dl;
            }
            k += 1;
        } else {
            let tm = 0.5 * (ts[k] + ts[k + 1]);
            ts.insert(k + 1, tm);
            nodes.insert(k + 1, probe(tm)?);
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let winding = (phase / two_pi).round();
    if (phase / two_pi - winding).abs() > 0.2 {
        return Err(Error::ContourFailed { lambda: path(0.0) });
    }
    let norm = Complex64::new(0.0, two_pi);
    for s in sums.iter_mut() {
        *s /= norm;
    }
    Ok((winding as i64, sums))
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn path(&self, t: f64) -> Complex64 {
        let t = t.rem_euclid(1.0) * 4.0;
        let (x0, x1, y0, y1) = (self.x0, self.x1, self.y0, self.y1);
        if t < 1.0 {
            Complex64::new(x0 + (x1 - x0) * t, y0)
        } else if t < 2.0 {
            Complex64::new(x1, y0 + (y1 - y0) * (t - 1.0))
        } else if t < 3.0 {
            Complex64::new(x1 - (x1 - x0) * (t - 2.0), y1)
        } else {
            Complex64::new(x0, y1 - (y1 - y0) * (t - 3.0))
        }
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn diameter(&self) -> f64 {
        ((self.x1 - self.x0).powi(2) + (self.y1 - self.y0).powi(2)).sqrt()
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.x0 - slack
            && z.re <= self.x1 + slack
            && z.im >= self.y0 - slack
            && z.im <= self.y1 + slack
    }
}

fn circle_winding(ev: &DeltaEval, center: Complex64, radius: f64) -> Result<i64> {
    let path = move |t: f64| {
        center + radius * Complex64::new(0.0, 2.0 * std::f64::consts::PI * t).exp()
    };
    Ok(contour_scan(ev, &path, 24, 0)?.0)
}

/// Newton iteration on Delta; `mult` > 1 uses the multiple-root step
/// mult * Delta / Delta'. `scale` calibrates the convergence threshold.
fn newton_polish(
    ev: &DeltaEval,
    seed: Complex64,
    mult: usize,
    scale: f64,
    fine: &DeltaEval,
) -> Result<Complex64> {
    let mut lam = seed;
    let mut ev_ref = ev;
    for iter in 0..NEWTON_MAX_ITERS {
        let (d, dd) = ev_ref.eval(lam)?;
        if d.norm() < 1e-12 * scale {
            if std::ptr::eq(ev_ref, fine) {
                return Ok(lam);
            }
            ev_ref = fine; // confirm at full resolution
            continue;
        }
        if dd.norm() == 0.0 {
            return Err(Error::NewtonFailed { seed });
        }
        let step = mult as f64 * d / dd;
        lam -= step;
        if step.norm() < 1e-14 * (1.0 + lam.norm()) && iter > 2 {
            ev_ref = fine;
        }
    }
    // accept if the final residual is small at full resolution
    let (d, _) = fine.eval(lam)?;
    if d.norm() < 1e-9 * scale {
        Ok(lam)
    } else {
        Err(Error::NewtonFailed { seed })
    }
}

/// Newton convergence scale: max |Delta| on a probe circle around the seed.
fn newton_scale(ev: &DeltaEval, seed: Complex64, radius: f64) -> Result<f64> {
    let mut scale = 0.0f64;
    for k in 0..6 {
        let ang = 2.0 * std::f64::consts::PI * k as f64 / 6.0;
        let (d, _) = ev.eval(seed + radius * Complex64::new(0.0, ang).exp())?;
        scale = scale.max(d.norm());
    }
    if scale == 0.0 {
        return Err(Error::NewtonFailed { seed });
    }
    Ok(scale)
}

/// Roots of the monic polynomial with the given power sums of roots
/// (Newton's identities + Durand-Kerner iteration).
fn roots_from_power_sums(sums: &[Complex64], m: usize, spread: f64) -> Vec<Complex64> {
    // elementary symmetric functions e_1..e_m
    let mut e = vec![Complex64::ZERO; m + 1];
    e[0] = Complex64::ONE;
    for k in 1..=m {
        let mut acc = Complex64::ZERO;
        for j in 1..=k {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - j] * sums[j];
        }
        e[k] = acc / k as f64;
    }
    // monic coefficients: z^m - e1 z^{m-1} + e2 z^{m-2} - ...
    let coeffs: Vec<Complex64> = (0..=m)
        .map(|k| if k % 2 == 0 { e[k] } else { -e[k] })
        .collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::ZERO;
        for c in &coeffs {
            acc = acc * z + c;
        }
        acc
    };
    let centroid = sums[1] / m as f64;
    let mut roots: Vec<Complex64> = (0..m)
        .map(|k| centroid + spread * Complex64::new(0.4, 0.9).powu(k as u32 + 1))
        .collect();
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for k in 0..m {
            let mut denom = Complex64::ONE;
            for j in 0..m {
                if j != k {
                    denom *= roots[k] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(roots[k]) / denom;
            roots[k] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-12 * (1.0 + centroid.norm()) {
            break;
        }
    }
    roots
}

/// Locate all zeros (with multiplicity) of Delta_i inside `rect`, whose
/// winding count is `m`.
#[allow(clippy::too_many_arguments)]
fn resolve_region(
    ev: &DeltaEval,
    fine: &DeltaEval,
    rect: Rect,
    m: i64,
    sums: &[Complex64],
    scale_hint: f64,
    depth: usize,
) -> Result<Vec<(Complex64, usize)>> {
    if m <= 0 {
        return Ok(vec![]);
    }
    let m = m as usize;
    let centroid = sums[1] / m as f64;

    // cluster too tight to split further: accept the centroid
    if rect.diameter() < 10.0 * multiplicity_radius(centroid) {
        let lam = newton_polish(ev, centroid, m, scale_hint, fine).unwrap_or(centroid);
        return Ok(vec![(lam, m)]);
    }

    if m == 1 {
        if let Ok(lam) = newton_polish(ev, centroid, 1, scale_hint, fine) {
            if rect.contains(lam, 0.05 * rect.diameter()) {
                return Ok(vec![(lam, 1)]);
            }
        }
    } else if m <= 4 {
        // try a genuinely multiple zero first
        let r = multiplicity_radius(centroid);
        if let Ok(w) = circle_winding(ev, centroid, r) {
            if w == m as i64 {
                let lam = newton_polish(ev, centroid, m, scale_hint, fine).unwrap_or(centroid);
                return Ok(vec![(lam, m)]);
            }
        }
        // split cluster via power sums
        let approx = roots_from_power_sums(sums, m, 0.25 * rect.diameter());
        let mut polished = Vec::new();
        let mut ok = true;
        for seed in approx {
            match newton_polish(ev, seed, 1, scale_hint, fine) {
                Ok(lam) if rect.contains(lam, 0.05 * rect.diameter()) => polished.push(lam),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let grouped = group_points(&polished);
            let total: usize = grouped.iter().map(|g| g.1).sum();
            if total == m && verify_groups(ev, &grouped).unwrap_or(false) {
                return Ok(grouped);
            }
        }
    }

    // subdivide along the longer axis; require child windings to add up
    if depth >= 24 {
        return Err(Error::UnresolvedCluster {
            center: centroid,
            winding: m as i32,
            capacity: 4,
        });
    }
    let split_x = (rect.x1 - rect.x0) >= (rect.y1 - rect.y0);
    for frac in [0.5, 0.43, 0.57, 0.36] {
        let (ra, rb) = if split_x {
            let cut = rect.x0 + frac * (rect.x1 - rect.x0);
            (
                Rect { x1: cut, ..rect },
                Rect { x0: cut, ..rect },
            )
        } else {
            let cut = rect.y0 + frac * (rect.y1 - rect.y0);
            (
                Rect { y1: cut, ..rect },
                Rect { y0: cut, ..rect },
            )
        };
        let scan_a = contour_scan(ev, &|t| ra.path(t), 32, 1);
        let scan_b = contour_scan(ev, &|t| rb.path(t), 32, 1);
        if let (Ok((wa, sa)), Ok((wb, sb))) = (scan_a, scan_b) {
            if wa + wb == m as i64 && wa >= 0 && wb >= 0 {
                let mut out = resolve_region(ev, fine, ra, wa, &sa, scale_hint, depth + 1)?;
                out.extend(resolve_region(ev, fine, rb, wb, &sb, scale_hint, depth + 1)?);
                return Ok(out);
            }
        }
    }
    Err(Error::UnresolvedCluster {
        center: centroid,
        winding: m as i32,
        capacity: 4,
    })
}

/// Merge points lying within each other's multiplicity radius.
fn group_points(points: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for &p in points {
        if let Some(g) = groups
            .iter_mut()
            .find(|g| (g.0 - p).norm() <= multiplicity_radius(p))
        {
            // running mean of the group
            g.0 = (g.0 * g.1 as f64 + p) / (g.1 + 1) as f64;
            g.1 += 1;
        } else {
            groups.push((p, 1));
        }
    }
    groups
}

/// Check each group's multiplicity against the winding number of a small circle.
fn verify_groups(ev: &DeltaEval, groups: &[(Complex64, usize)]) -> Result<bool> {
    for &(center, mult) in groups {
        let w = circle_winding(ev, center, multiplicity_radius(center))?;
        if w != mult as i64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coefficient-size scale used for search-region bounds.
fn size_scale(spec: &ProblemSpec) -> f64 {
    let h_abs = match spec.big_h {
        BoundaryH::Value(v) => v.norm(),
        BoundaryH::Infinity => 0.0,
    };
    1.0 + spec.h.norm()
        + h_abs
        + spec.a2.norm()
        + spec.q1.l2_norm()
        + spec.q2.l2_norm()
}

/// The `n` smallest-|lambda| eigenvalues of problem B_i, with multiplicities.
/// Low-index (possibly complex, possibly multiple) eigenvalues are swept by
/// contour subdivision; the asymptotic tail is found by Newton from
/// theta-corrected model seeds.
pub fn find_spectrum(spec: &ProblemSpec, i: u8, n: usize) -> Result<Subspectrum> {
    if n == 0 {
        return Err(Error::InvalidInput("eigenvalue count must be >= 1".into()));
    }
    let params = ModelSpectrumParams::from_spec(spec, i)?;
    let a = spec.a;
    let buffer = 6;
    let rhos0 = model_rho_zeros(&params, a, i, n + buffer)?;

    let fine = DeltaEval {
        spec,
        i,
        opts: IntegratorOptions::default(),
    };
    let coarse = DeltaEval {
        spec,
        i,
        opts: IntegratorOptions {
            min_steps: 2048,
            ..IntegratorOptions::default()
        },
    };

    let s = size_scale(spec);
    let r_asym = 4.0 * s + 2.0;
    let k_low = rhos0.iter().take_while(|&&r| r < r_asym).count().min(rhos0.len() - 1);

    let mut found: Vec<(Complex64, usize)> = Vec::new();

    // low region sweep
    if k_low > 0 {
        let lam_top = (0.5 * (rhos0[k_low - 1] + rhos0[k_low])).powi(2);
        let rect = Rect {
            x0: -(4.0 * s * s + 4.0),
            x1: lam_top,
            y0: -(8.0 * s * s + 8.0),
            y1: 8.0 * s * s + 8.0,
        };
        let n0 = 64 + 8 * k_low;
        let (w, sums) = contour_scan(&coarse, &|t| rect.path(t), n0, 4)?;
        let scale_hint = newton_scale(&coarse, rect.center(), 0.25 * (rect.x1 - rect.x0))?;
        found.extend(resolve_region(&coarse, &fine, rect, w, &sums, scale_hint, 0)?);
    }

    // asymptotic tail: Newton from theta-corrected seeds, provably simple
    for &rho0 in &rhos0[k_low..] {
        let theta = theta_correction(&params, a, i, rho0)?;
        let rho_seed = Complex64::new(rho0, 0.0)
            + if rho0 > 0.0 {
                theta / rho0
            } else {
                Complex64::ZERO
            };
        let seed = rho_seed * rho_seed;
        // RK4 phase error grows like rho^6 / steps^4; scale the step count
        // as rho^1.5 to keep the located eigenvalue accurate in absolute
        // terms as lambda grows
        let tail_fine = DeltaEval {
            spec,
            i,
            opts: IntegratorOptions {
                min_steps: 8192usize.max((40.0 * rho0.max(1.0).powf(1.5)).ceil() as usize),
                ..IntegratorOptions::default()
            },
        };
        let scale = newton_scale(&fine, seed, (rho0 + 1.0).max(2.0))?;
        let lam = newton_polish(&tail_fine, seed, 1, scale, &tail_fine)?;
        found.push((lam, 1));
    }

    // deduplicate (a stray Newton duplicate collapses onto an existing point)
    let mut dedup: Vec<(Complex64, usize)> = Vec::new();
    for (lam, mult) in found {
        if let Some(g) = dedup
            .iter_mut()
            .find(|g| (g.0 - lam).norm() <= multiplicity_radius(lam))
        {
            g.1 = g.1.max(mult);
        } else {
            dedup.push((lam, mult));
        }
    }
    dedup.sort_by(|x, y| sort_key(x.0).partial_cmp(&sort_key(y.0)).unwrap());

    let mut points = Vec::new();
    let mut total = 0;
    for (lam, mult) in dedup {
        if total >= n {
            break;
        }
        points.push(SpectralPoint {
            lambda: lam,
            multiplicity: mult,
            i,
        });
        total += mult;
    }
    Subspectrum::new(i, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn g_jet_zero_data() {
        let spec = ProblemSpec::zero_model(0.5);
        let lam = c(9.0, 0.0);
        let rho = 3.0;
        let (g0, g1) = g_jet(&spec, 1, lam, 0).unwrap();
        assert!((g0[0] - c(-(rho * 0.5f64).cos(), 0.0)).norm() < 1e-9);
        assert!((g1[0] - c(-rho * (rho * 0.5f64).sin(), 0.0)).norm() < 1e-9);
        let (g0, g1) = g_jet(&spec, 0, lam, 0).unwrap();
        assert!((g0[0] - c(-(rho * 0.5f64).sin() / rho, 0.0)).norm() < 1e-9);
        assert!((g1[0] - c((rho * 0.5f64).cos(), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn g_jet_with_jump() {
        let mut spec = ProblemSpec::zero_model(0.5);
        spec.a1 = 2.0;
        let (g0, g1) = g_jet(&spec, 1, Complex64::ZERO, 0).unwrap();
        assert!((g0[0] - c(-0.5, 0.0)).norm() < 1e-10);
        assert!(g1[0].norm() < 1e-10);
    }

    #[test]
    fn delta_zero_data() {
        let spec = ProblemSpec::zero_model(0.5);
        let d1 = delta(&spec, 1, c(PI * PI, 0.0), 0).unwrap();
        assert!(d1[0].norm() < 1e-8, "Delta_1(pi^2) = {}", d1[0]);
        let d0 = delta(&spec, 0, c(PI * PI, 0.0), 0).unwrap();
        assert!((d0[0] - c(-1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn model_spectrum_unit_jump() {
        let spec = ProblemSpec::zero_model(0.5);
        let params = ModelSpectrumParams::from_spec(&spec, 1).unwrap();
        assert!((params.b_plus * params.b_plus - params.b_minus * params.b_minus - 1.0).abs() < 1e-14);
        let l1 = model_spectrum(&params, 0.5, 1, 5).unwrap();
        for (k, &l) in l1.iter().enumerate() {
            assert!((l - (k as f64 * PI).powi(2)).abs() < 1e-8, "n={k}: {l}");
        }
        let l0 = model_spectrum(&params, 0.5, 0, 4).unwrap();
        for (k, &l) in l0.iter().enumerate() {
            assert!((l - ((k as f64 + 0.5) * PI).powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn model_spectrum_jump_two() {
        let mut spec = ProblemSpec::zero_model(0.5);
        spec.a1 = 2.0;
        let params = ModelSpectrumParams::from_spec(&spec, 0).unwrap();
        assert!((params.b_plus - 1.25).abs() < 1e-14);
        assert!((params.b_minus - 0.75).abs() < 1e-14);
        let rhos = model_rho_zeros(&params, 0.5, 0, 1).unwrap();
        // (5/4) cos rho + 3/4 = 0 -> rho = arccos(-3/5)
        assert!((rhos[0] - (-0.6f64).acos()).abs() < 1e-10, "rho0 = {}", rhos[0]);
    }

    #[test]
    fn theta_zero_for_zero_coefficients() {
        let spec = ProblemSpec::zero_model(0.5);
        for i in [0u8, 1u8] {
            let params = ModelSpectrumParams::from_spec(&spec, i).unwrap();
            let rhos = model_rho_zeros(&params, 0.5, i, 3).unwrap();
            for &r in &rhos {
                let th = theta_correction(&params, 0.5, i, r).unwrap();
                assert!(th.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn find_spectrum_zero_model() {
        let spec = ProblemSpec::zero_model(0.5);
        let sub = find_spectrum(&spec, 1, 5).unwrap();
        assert_eq!(sub.points.len(), 5);
        for (k, p) in sub.points.iter().enumerate() {
            assert_eq!(p.multiplicity, 1);
            let expect = (k as f64 * PI).powi(2);
            assert!(
                (p.lambda - c(expect, 0.0)).norm() < 1e-8,
                "n={k}: {} vs {expect}",
                p.lambda
            );
        }
        let sub0 = find_spectrum(&spec, 0, 3).unwrap();
        for (k, p) in sub0.points.iter().enumerate() {
            let expect = ((k as f64 + 0.5) * PI).powi(2);
            assert!((p.lambda - c(expect, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn find_spectrum_matches_scan_oracle_h1() {
        // q = 0, h = 1, H = 0, a1 = 1, a2 = 0: Delta_1 explicitly computable
        let mut spec = ProblemSpec::zero_model(0.5);
        spec.h = Complex64::ONE;
        // closed form: phi0 = cos(r/2) + sin(r/2)/r, phi1 = -r sin(r/2) + cos(r/2)
        // g10 = -cos(r/2), g11 = -r sin(r/2)
        let delta_cf = |lam: f64| -> f64 {
            let r = Complex64::new(lam, 0.0).sqrt();
            let half = r * 0.5;
            let phi0 = half.cos() + half.sin() / r;
            let phi1 = -r * half.sin() + half.cos();
            let g10 = -half.cos();
            let g11 = -r * half.sin();
            (phi0 * g11 - phi1 * g10).re
        };
        // dense scan + bisection on real lambda
        let mut oracle = Vec::new();
        let mut lam = -20.0;
        let step = 0.05;
        let mut prev = delta_cf(lam);
        while oracle.len() < 10 && lam < 1200.0 {
            let next = delta_cf(lam + step);
            if prev * next < 0.0 {
                let (mut lo, mut hi, mut flo) = (lam, lam + step, prev);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = delta_cf(mid);
                    if flo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                oracle.push(0.5 * (lo + hi));
            }
            lam += step;
            prev = next;
        }
        assert_eq!(oracle.len(), 10);
        let sub = find_spectrum(&spec, 1, 10).unwrap();
        assert!(sub.points.len() >= 10);
        for (k, &l) in oracle.iter().enumerate() {
            let got = sub.points[k].lambda;
            assert!(
                (got - c(l, 0.0)).norm() < 1e-9 * (1.0 + l.abs()),
                "n={k}: got {got}, oracle {l}"
            );
        }
    }

    #[test]
    fn winding_counts_enclosed_eigenvalues() {
        let mut spec = ProblemSpec::zero_model(0.5);
        spec.h = c(0.4, 0.2);
        spec.big_h = BoundaryH::Value(c(-0.3, 0.1));
        spec.q1 = ComplexGridExt::smooth(0.5, |x| c((2.0 * PI * x).sin() * 0.5, 0.2 * x));
        let sub = find_spectrum(&spec, 1, 8).unwrap();
        // circle around the 3rd..5th eigenvalues (radius between gaps)
        let lam3 = sub.points[2].lambda;
        let lam5 = sub.points[4].lambda;
        let center = 0.5 * (lam3 + lam5);
        let radius = 0.5 * (lam5 - lam3).norm() + 8.0;
        let inside = sub
            .points
            .iter()
            .filter(|p| (p.lambda - center).norm() < radius)
            .map(|p| p.multiplicity)
            .sum::<usize>();
        let ev = DeltaEval {
            spec: &spec,
            i: 1,
            opts: IntegratorOptions::default(),
        };
        let w = circle_winding(&ev, center, radius).unwrap();
        assert_eq!(w, inside as i64);
    }

    #[test]
    fn csv_round_trip() {
        let spec = ProblemSpec::zero_model(0.5);
        let sub = find_spectrum(&spec, 0, 3).unwrap();
        let text = sub.to_csv();
        let points = points_from_csv(&text).unwrap();
        let back = Subspectrum::new(0, points).unwrap();
        for (p, q) in sub.points.iter().zip(&back.points) {
            assert!((p.lambda - q.lambda).norm() < 1e-12);
            assert_eq!(p.multiplicity, q.multiplicity);
        }
    }

    // small helper for tests
    struct ComplexGridExt;
    impl ComplexGridExt {
        fn smooth(len: f64, f: impl Fn(f64) -> Complex64) -> crate::grid::ComplexGrid {
            crate::grid::ComplexGrid::from_fn(len, 64, f).unwrap()
        }
    }
}
