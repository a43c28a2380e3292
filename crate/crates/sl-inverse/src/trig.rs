//! Entire-function building blocks s(t,lambda) = sin(rho t)/rho and
//! c(t,lambda) = cos(rho t) with lambda = rho^2, their normalized
//! lambda-derivative jets, Gauss-Legendre quadrature, and oscillatory
//! integrals against piecewise-linear grid data.
//!
//! Both s and c are even in rho, so every routine here is independent of
//! the branch of sqrt(lambda).

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::grid::ComplexGrid;

/// Principal square root with Re >= 0.
pub fn sqrt_lambda(lambda: Complex64) -> Complex64 {
    let r = lambda.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    t_pow: u32,
    rho_inv_pow: u32,
    coef: f64,
}

/// One jet order of an entire function written as
/// sum coef * t^p * rho^{-m} * cos(rho t)  +  sum ... * sin(rho t).
#[derive(Debug, Clone, Default)]
struct TrigJet {
    cos: Vec<Term>,
    sin: Vec<Term>,
}

impl TrigJet {
    /// Apply (1/n) d/dlambda = (1/(2 n rho)) d/drho termwise.
    fn derive(&self, n: f64) -> TrigJet {
        let mut out = TrigJet::default();
        for t in &self.cos {
            // d/drho [t^p rho^-m cos] = -m t^p rho^{-m-1} cos - t^{p+1} rho^-m sin
            push(&mut out.cos, t.t_pow, t.rho_inv_pow + 2, -t.coef * t.rho_inv_pow as f64 / (2.0 * n));
            push(&mut out.sin, t.t_pow + 1, t.rho_inv_pow + 1, -t.coef / (2.0 * n));
        }
        for t in &self.sin {
            push(&mut out.sin, t.t_pow, t.rho_inv_pow + 2, -t.coef * t.rho_inv_pow as f64 / (2.0 * n));
            push(&mut out.cos, t.t_pow + 1, t.rho_inv_pow + 1, t.coef / (2.0 * n));
        }
        out
    }

    fn eval(&self, t: f64, rho: Complex64) -> Complex64 {
        let rho_inv = 1.0 / rho;
        let (sin_rt, cos_rt) = {
            let z = rho * t;
            (z.sin(), z.cos())
        };
        let mut acc = Complex64::ZERO;
        for term in &self.cos {
            acc += term.coef * t.powi(term.t_pow as i32) * rho_inv.powu(term.rho_inv_pow) * cos_rt;
        }
        for term in &self.sin {
            acc += term.coef * t.powi(term.t_pow as i32) * rho_inv.powu(term.rho_inv_pow) * sin_rt;
        }
        acc
    }
}

fn push(v: &mut Vec<Term>, t_pow: u32, rho_inv_pow: u32, coef: f64) {
    if coef == 0.0 {
        return;
    }
    if let Some(t) = v
        .iter_mut()
        .find(|t| t.t_pow == t_pow && t.rho_inv_pow == rho_inv_pow)
    {
        t.coef += coef;
    } else {
        v.push(Term {
            t_pow,
            rho_inv_pow,
            coef,
        });
    }
}

const MAX_JET_ORDER: usize = 10;

fn jet_tables() -> &'static (Vec<TrigJet>, Vec<TrigJet>) {
    static TABLES: OnceLock<(Vec<TrigJet>, Vec<TrigJet>)> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut s_jets = vec![TrigJet {
            cos: vec![],
            sin: vec![Term {
                t_pow: 0,
                rho_inv_pow: 1,
                coef: 1.0,
            }],
        }];
        let mut c_jets = vec![TrigJet {
            cos: vec![Term {
                t_pow: 0,
                rho_inv_pow: 0,
                coef: 1.0,
            }],
            sin: vec![],
        }];
        for nu in 1..=MAX_JET_ORDER {
            s_jets.push(s_jets[nu - 1].derive(nu as f64));
            c_jets.push(c_jets[nu - 1].derive(nu as f64));
        }
        (s_jets, c_jets)
    })
}

/// Power series in lambda: s<nu> = sum_{m>=nu} (-1)^m C(m,nu) lambda^{m-nu} t^{2m+1}/(2m+1)!
/// and analogously for c with t^{2m}/(2m)!. Used near rho t = 0 where the
/// closed forms cancel.
fn series_jet(t: f64, lambda: Complex64, nu: usize, is_s: bool) -> Complex64 {
    let mut term = Complex64::new(if nu % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    // term at m = nu: (+-1) t^{2nu + e} / (2nu + e)!
    let e = if is_s { 1 } else { 0 };
    let mut fact = 1.0;
    for k in 1..=(2 * nu + e) {
        fact *= k as f64;
    }
    term *= t.powi((2 * nu + e) as i32) / fact;
    let mut sum = term;
    let t2 = t * t;
    for m in nu..nu + 80 {
        let mf = m as f64;
        let nf = nu as f64;
        let denom = if is_s {
            (2.0 * mf + 2.0) * (2.0 * mf + 3.0)
        } else {
            (2.0 * mf + 1.0) * (2.0 * mf + 2.0)
        };
        term *= -lambda * t2 * ((mf + 1.0) / (mf + 1.0 - nf)) / denom;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() + 1e-300 {
            break;
        }
    }
    sum
}

/// Normalized lambda-derivative jets of s(t, lambda) and c(t, lambda) up to
/// order `nu_max`: returns (s jets, c jets), each of length nu_max + 1.
pub fn sc_jets(t: f64, lambda: Complex64, nu_max: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    assert!(nu_max <= MAX_JET_ORDER, "jet order {nu_max} beyond table");
    let rho = sqrt_lambda(lambda);
    if rho.norm() * t.abs() < 3.0 {
        let s = (0..=nu_max)
            .map(|nu| series_jet(t, lambda, nu, true))
            .collect();
        let c = (0..=nu_max)
            .map(|nu| series_jet(t, lambda, nu, false))
            .collect();
        (s, c)
    } else {
        let (s_tab, c_tab) = jet_tables();
        let s = (0..=nu_max).map(|nu| s_tab[nu].eval(t, rho)).collect();
        let c = (0..=nu_max).map(|nu| c_tab[nu].eval(t, rho)).collect();
        (s, c)
    }
}

/// Jets of lambda * s(t, lambda) (= rho sin(rho t)), composed from s jets.
pub fn lambda_s_jets(lambda: Complex64, s_jets: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(s_jets.len());
    for nu in 0..s_jets.len() {
        let mut v = lambda * s_jets[nu];
        if nu >= 1 {
            v += s_jets[nu - 1];
        }
        out.push(v);
    }
    out
}

/// Leibniz product of two normalized jet sequences.
pub fn jet_mul(a: &[Complex64], b: &[Complex64], nu_max: usize) -> Vec<Complex64> {
    (0..=nu_max)
        .map(|nu| {
            (0..=nu)
                .map(|k| a.get(k).copied().unwrap_or(Complex64::ZERO)
                    * b.get(nu - k).copied().unwrap_or(Complex64::ZERO))
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [4usize, 8, 16, 32]
            .iter()
            .map(|&m| compute_gl(m))
            .collect()
    });
    match n {
        4 => &rules[0],
        8 => &rules[1],
        16 => &rules[2],
        32 => &rules[3],
        _ => panic!("unsupported Gauss-Legendre order {n}"),
    }
}

fn compute_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre integral of a complex-valued function.
pub fn composite_gl(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> Complex64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::ZERO;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    acc * (0.5 * h)
}

/// Panel count for integrands oscillating with total |frequency| over `length`.
pub fn osc_panels(freq: f64, length: f64) -> usize {
    ((freq.abs() * length / 3.0).ceil() as usize).max(4)
}

// ---------------------------------------------------------------------------
// Oscillatory integrals of piecewise-linear data
// ---------------------------------------------------------------------------

enum OscKind {
    Sin,
    Cos,
    Exp,
}

fn integrate_pl(grid: &ComplexGrid, rho: Complex64, kind: OscKind) -> Complex64 {
    let h = grid.spacing();
    let small = rho.norm() * h <= 1.0;
    let mut acc = Complex64::ZERO;
    for (k, w) in grid.values.windows(2).enumerate() {
        let t0 = k as f64 * h;
        let t1 = t0 + h;
        let beta = (w[1] - w[0]) / h;
        let alpha = w[0] - beta * t0;
        if small {
            let (nodes, weights) = gauss_legendre(4);
            let mid = 0.5 * (t0 + t1);
            for (x, wt) in nodes.iter().zip(weights) {
                let t = mid + 0.5 * h * x;
                let f = alpha + beta * t;
                let z = rho * t;
                let osc = match kind {
                    OscKind::Sin => z.sin(),
                    OscKind::Cos => z.cos(),
                    OscKind::Exp => (Complex64::I * z).exp(),
                };
                acc += wt * f * osc * (0.5 * h);
            }
        } else {
            let anti = |t: f64| -> Complex64 {
                let f = alpha + beta * t;
                let z = rho * t;
                match kind {
                    // int f cos = f sin/rho + beta cos/rho^2
                    OscKind::Cos => f * z.sin() / rho + beta * z.cos() / (rho * rho),
                    // int f sin = -f cos/rho + beta sin/rho^2
                    OscKind::Sin => -f * z.cos() / rho + beta * z.sin() / (rho * rho),
                    // int f e^{i rho t} = e^{i rho t} (f/(i rho) - beta/(i rho)^2)
                    OscKind::Exp => {
                        let irho = Complex64::I * rho;
                        (Complex64::I * z).exp() * (f / irho - beta / (irho * irho))
                    }
                }
            };
            acc += anti(t1) - anti(t0);
        }
    }
    acc
}

/// int_0^L f(t) sin(rho t) dt with f piecewise-linear.
pub fn integrate_pl_sin(grid: &ComplexGrid, rho: Complex64) -> Complex64 {
    integrate_pl(grid, rho, OscKind::Sin)
}

/// int_0^L f(t) cos(rho t) dt with f piecewise-linear.
pub fn integrate_pl_cos(grid: &ComplexGrid, rho: Complex64) -> Complex64 {
    integrate_pl(grid, rho, OscKind::Cos)
}

/// int_0^L f(t) e^{i rho t} dt with f piecewise-linear.
pub fn integrate_pl_exp(grid: &ComplexGrid, rho: Complex64) -> Complex64 {
    integrate_pl(grid, rho, OscKind::Exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jets_match_closed_forms_order_zero() {
        for &(t, lam) in &[(0.5, c(9.8696, 0.0)), (0.3, c(-4.0, 2.0)), (0.7, c(400.0, 9.0))] {
            let rho = sqrt_lambda(lam);
            let (s, cj) = sc_jets(t, lam, 0);
            assert!((s[0] - (rho * t).sin() / rho).norm() < 1e-12 * (1.0 + s[0].norm()));
            assert!((cj[0] - (rho * t).cos()).norm() < 1e-12 * (1.0 + cj[0].norm()));
        }
    }

    #[test]
    fn first_jet_matches_finite_difference() {
        for &(t, lam) in &[(0.5, c(30.0, 3.0)), (0.25, c(-2.0, 1.0)), (0.9, c(1500.0, 40.0))] {
            let d = 1e-5 * (1.0 + lam.norm());
            let (sp, cp) = sc_jets(t, lam + d, 0);
            let (sm, cm) = sc_jets(t, lam - d, 0);
            let (s1, c1) = sc_jets(t, lam, 1);
            let fd_s = (sp[0] - sm[0]) / (2.0 * d);
            let fd_c = (cp[0] - cm[0]) / (2.0 * d);
            assert!(
                (s1[1] - fd_s).norm() < 1e-6 * (1.0 + fd_s.norm()),
                "s jet mismatch at t={t} lam={lam}"
            );
            assert!((c1[1] - fd_c).norm() < 1e-6 * (1.0 + fd_c.norm()));
        }
    }

    #[test]
    fn series_and_closed_form_agree_at_crossover() {
        // |rho| t just above and below the branch threshold must agree.
        let t = 0.5;
        for nu in 0..4 {
            let lam_lo = c(35.0, 2.0); // |rho| t ~ 2.96 -> series
            let lam_hi = c(37.0, 2.0); // |rho| t ~ 3.04 -> closed form
            for lam in [lam_lo, lam_hi] {
                let rho = sqrt_lambda(lam);
                let series = series_jet(t, lam, nu, true);
                let closed = jet_tables().0[nu].eval(t, rho);
                assert!(
                    (series - closed).norm() < 1e-11 * (1.0 + series.norm()),
                    "nu={nu} lam={lam}"
                );
            }
        }
    }

    #[test]
    fn even_in_rho() {
        let (s_tab, c_tab) = jet_tables();
        let rho = c(7.0, 1.5);
        for nu in 0..4 {
            assert!((s_tab[nu].eval(0.6, rho) - s_tab[nu].eval(0.6, -rho)).norm() < 1e-13);
            assert!((c_tab[nu].eval(0.6, rho) - c_tab[nu].eval(0.6, -rho)).norm() < 1e-13);
        }
    }

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // x^7 over [0,1] with the 4-point rule
        let v = composite_gl(|x| c(x.powi(7), 0.0), 0.0, 1.0, 1, 4);
        assert!((v.re - 0.125).abs() < 1e-14);
        let v = composite_gl(|x| c((5.0 * x).cos(), 0.0), 0.0, 2.0, 8, 16);
        assert!((v.re - (10.0f64).sin() / 5.0).abs() < 1e-13);
    }

    #[test]
    fn pl_oscillatory_matches_quadrature() {
        let g = ComplexGrid::from_fn(0.5, 64, |x| c(x, 1.0 - x)).unwrap();
        for &rho in &[c(0.3, 0.0), c(40.0, 2.0), c(300.0, 0.5)] {
            let exact = integrate_pl_sin(&g, rho);
            let quad = composite_gl(
                |t| g.eval(t) * (rho * t).sin(),
                0.0,
                0.5,
                osc_panels(rho.norm(), 0.5) * 4,
                16,
            );
            assert!(
                (exact - quad).norm() < 1e-9 * (1.0 + exact.norm()),
                "rho={rho}: {exact} vs {quad}"
            );
        }
    }
}
