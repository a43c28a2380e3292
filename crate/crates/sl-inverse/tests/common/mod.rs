//! Shared test oracles, independent of the library's numerical pipeline.

use num_complex::Complex64;
use sl_inverse::ComplexGrid;

/// Forward computation of the Cauchy data {K1, K2, omega1} by solving the
/// kernel's characteristic-coordinate integral equation with Picard
/// iteration on an (m+1)^2 grid (m even). This route shares nothing with
/// the library implementation, which goes through Fourier moments of the
/// boundary values.
///
/// In characteristic coordinates xi = (x+t)/2, eta = (x-t)/2 the kernel
/// satisfies
///   Ktilde(xi, eta) = w(xi) + w(eta) - h
///                   + int_0^xi int_0^eta q(s+s') Ktilde(s, s') ds' ds,
/// with w(x) = h + (1/2) int_0^x q. The traces at x = a follow from the
/// differentiated equation, avoiding numerical differentiation:
///   Ktilde_xi  = q(xi)/2  + int_0^eta q(xi+s)  Ktilde(xi, s) ds,
///   Ktilde_eta = q(eta)/2 + int_0^xi  q(s+eta) Ktilde(s, eta) ds,
/// and K1 = (Ktilde_xi - Ktilde_eta)/2, K2 = (Ktilde_xi + Ktilde_eta)/2
/// on xi + eta = a.
pub fn goursat_cauchy(
    q1: &ComplexGrid,
    h: Complex64,
    m: usize,
) -> (ComplexGrid, ComplexGrid, Complex64) {
    let a = q1.interval_length;
    let m = if m % 2 == 0 { m } else { m + 1 };
    let step = a / m as f64;
    let q: Vec<Complex64> = (0..=2 * m).map(|k| q1.eval(0.5 * k as f64 * step)).collect();
    // w at the grid nodes by cumulative trapezoid
    let mut w = vec![h; m + 1];
    for j in 1..=m {
        w[j] = w[j - 1] + 0.25 * step * (q[2 * (j - 1)] + q[2 * j]);
    }

    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let base: Vec<Complex64> = (0..=m)
        .flat_map(|i| (0..=m).map(move |j| (i, j)))
        .map(|(i, j)| w[i] + w[j] - h)
        .collect();
    let mut k = base.clone();
    let mut g = vec![Complex64::ZERO; (m + 1) * (m + 1)];
    let mut c = vec![Complex64::ZERO; (m + 1) * (m + 1)];

    // Picard iteration; the integral operator is a contraction on the
    // triangle for any bounded q, and only triangle values (which never
    // reference points outside it) are consumed below.
    for _ in 0..200 {
        for i in 0..=m {
            for j in 0..=m {
                // q(xi_i + eta_j) clamps beyond x = a; those entries are
                // outside the triangle and never reach triangle targets
                g[idx(i, j)] = q[(2 * (i + j)).min(2 * m)] * k[idx(i, j)];
            }
        }
        // cumulative trapezoid in eta, then in xi
        for i in 0..=m {
            c[idx(i, 0)] = Complex64::ZERO;
            for j in 1..=m {
                c[idx(i, j)] = c[idx(i, j - 1)] + 0.5 * step * (g[idx(i, j - 1)] + g[idx(i, j)]);
            }
        }
        let mut change = 0.0f64;
        for j in 0..=m {
            let mut acc = Complex64::ZERO;
            let mut prev = c[idx(0, j)];
            let next = base[idx(0, j)] + acc;
            change = change.max((next - k[idx(0, j)]).norm());
            k[idx(0, j)] = next;
            for i in 1..=m {
                let cur = c[idx(i, j)];
                acc += 0.5 * step * (prev + cur);
                prev = cur;
                let next = base[idx(i, j)] + acc;
                change = change.max((next - k[idx(i, j)]).norm());
                k[idx(i, j)] = next;
            }
        }
        if change < 1e-15 * (1.0 + h.norm()) {
            break;
        }
    }

    // traces on the anti-diagonal xi + eta = m (t = 2k * step)
    let n_out = m / 2;
    let mut k1 = Vec::with_capacity(n_out + 1);
    let mut k2 = Vec::with_capacity(n_out + 1);
    for kk in 0..=n_out {
        let i = n_out + kk; // xi index
        let j = n_out - kk; // eta index
        let mut d_xi = 0.5 * q[2 * i];
        for s in 1..=j {
            d_xi += 0.5
                * step
                * (q[(2 * (i + s - 1)).min(2 * m)] * k[idx(i, s - 1)]
                    + q[(2 * (i + s)).min(2 * m)] * k[idx(i, s)]);
        }
        let mut d_eta = 0.5 * q[2 * j];
        for s in 1..=i {
            d_eta += 0.5
                * step
                * (q[(2 * (s - 1 + j)).min(2 * m)] * k[idx(s - 1, j)]
                    + q[(2 * (s + j)).min(2 * m)] * k[idx(s, j)]);
        }
        k1.push(0.5 * (d_xi - d_eta));
        k2.push(0.5 * (d_xi + d_eta));
    }
    (
        ComplexGrid::new(a, k1).unwrap(),
        ComplexGrid::new(a, k2).unwrap(),
        w[m],
    )
}
