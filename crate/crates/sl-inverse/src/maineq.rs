//! Assembly and solution of the main equations <K, U_n^i> = tau_n^i:
//! basis rows from subspectra (with derivative rows at multiple
//! eigenvalues), Hermite-interpolation regularization of perturbed
//! clusters, weighted truncated least squares, and the end-to-end
//! inversion pipeline recovering (q1, h).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchy::{cauchy_to_potential, CauchyData};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::linalg::{solve_truncated_lsq, LsqSolution};
use crate::problem::{complex_to_pairs, pairs_to_complex, BoundaryH, ProblemSpec};
use crate::spectra::{g_jet, Subspectrum};
use crate::trig::{gauss_legendre, jet_mul, lambda_s_jets, sc_jets, sqrt_lambda};

/// The data known a priori in the inverse problem: the outer potential,
/// boundary constant, jump parameters, and the mean constant omega1.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownData {
    pub a: f64,
    pub q2: ComplexGrid,
    pub big_h: BoundaryH,
    pub a1: f64,
    pub a2: Complex64,
    pub omega1: Complex64,
}

impl KnownData {
    pub fn new(
        a: f64,
        q2: ComplexGrid,
        big_h: BoundaryH,
        a1: f64,
        a2: Complex64,
        omega1: Complex64,
    ) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!("a must be in (0,1), got {a}")));
        }
        if (q2.interval_length - (1.0 - a)).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "q2 must live on [0, 1-a]: length {} vs {}",
                q2.interval_length,
                1.0 - a
            )));
        }
        if !(a1 > 0.0) {
            return Err(Error::InvalidInput(format!("a1 must be positive, got {a1}")));
        }
        Ok(Self {
            a,
            q2,
            big_h,
            a1,
            a2,
            omega1,
        })
    }

    /// Extract the known data of a full spec (forgetting q1 and h except
    /// through omega1).
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            a: spec.a,
            q2: spec.q2.clone(),
            big_h: spec.big_h,
            a1: spec.a1,
            a2: spec.a2,
            omega1: spec.omega1(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: KnownJson = serde_json::from_str(text)?;
        Self::new(
            raw.a,
            ComplexGrid::new(1.0 - raw.a, pairs_to_complex(&raw.q2))?,
            match raw.big_h {
                HJson::Value(p) => BoundaryH::Value(Complex64::new(p[0], p[1])),
                HJson::Infinity(_) => BoundaryH::Infinity,
            },
            raw.a1,
            Complex64::new(raw.a2[0], raw.a2[1]),
            Complex64::new(raw.omega1[0], raw.omega1[1]),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&KnownJson {
            a: self.a,
            q2: complex_to_pairs(&self.q2.values),
            big_h: match self.big_h {
                BoundaryH::Value(v) => HJson::Value([v.re, v.im]),
                BoundaryH::Infinity => HJson::Infinity("infinity".into()),
            },
            a1: self.a1,
            a2: [self.a2.re, self.a2.im],
            omega1: [self.omega1.re, self.omega1.im],
        })
        .unwrap()
    }
}

#[derive(Serialize, Deserialize)]
struct KnownJson {
    a: f64,
    q2: Vec<[f64; 2]>,
    #[serde(rename = "H")]
    big_h: HJson,
    a1: f64,
    a2: [f64; 2],
    omega1: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HJson {
    Value([f64; 2]),
    Infinity(String),
}

/// One linear term coeff * U_i^<nu>(t, mu) of a row, with the g-jets at mu
/// baked in.
#[derive(Debug, Clone)]
struct JetAtom {
    mu: Complex64,
    nu: usize,
    coeff: Complex64,
    g0: Vec<Complex64>,
    g1: Vec<Complex64>,
}

impl JetAtom {
    fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let (s, c) = sc_jets(t, self.mu, self.nu);
        let mut u1 = Complex64::ZERO;
        let mut u2 = Complex64::ZERO;
        for k in 0..=self.nu {
            u1 += self.g1[k] * s[self.nu - k];
            u2 += self.g0[k] * c[self.nu - k];
        }
        (self.coeff * u1, self.coeff * u2)
    }
}

/// One row of the main equations: the vector function (component1,
/// component2) and its weight. Exact evaluation goes through the atoms;
/// the grids are sampled views for diagnostics.
#[derive(Debug, Clone)]
pub struct BasisVector {
    pub i: u8,
    /// Reference eigenvalue this row belongs to.
    pub mu: Complex64,
    /// Derivative order of the row within its eigenvalue block.
    pub nu: usize,
    pub weight: f64,
    atoms: Vec<JetAtom>,
    pub component1: ComplexGrid,
    pub component2: ComplexGrid,
}

impl BasisVector {
    pub fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let mut u1 = Complex64::ZERO;
        let mut u2 = Complex64::ZERO;
        for atom in &self.atoms {
            let (a1, a2) = atom.eval(t);
            u1 += a1;
            u2 += a2;
        }
        (u1, u2)
    }

    /// |U|^2 in H = L^2 x L^2 by composite Gauss-Legendre.
    pub fn norm_sq(&self) -> f64 {
        let a = self.component1.interval_length;
        let rho = sqrt_lambda(self.mu).norm();
        let panels = ((2.0 * rho * a / 3.0).ceil() as usize).max(8);
        let (nodes, weights) = gauss_legendre(16);
        let h = a / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                let (u1, u2) = self.eval(mid + 0.5 * h * x);
                acc += w * (u1.norm_sqr() + u2.norm_sqr()) * 0.5 * h;
            }
        }
        acc
    }
}

/// Assembled main equations over a finite trial space: `modes` sine modes
/// for K1 and `modes` cosine modes (including the constant) for K2.
#[derive(Debug, Clone)]
pub struct MainSystem {
    pub a: f64,
    pub basis: Vec<BasisVector>,
    pub rhs: Vec<Complex64>,
    pub modes: usize,
}

/// Output of the inversion pipeline.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub q1: ComplexGrid,
    pub h: Complex64,
    pub residual_norm: f64,
    pub gram_condition: f64,
    pub effective_rank: usize,
    pub truncated_fraction: f64,
    /// (reference eigenvalue, matched perturbed eigenvalues) per cluster.
    pub cluster_report: Vec<(Complex64, Vec<Complex64>)>,
}

impl ReconstructionResult {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out {
            q1: Vec<[f64; 2]>,
            a: f64,
            h: [f64; 2],
            residual_norm: f64,
            gram_condition: f64,
            effective_rank: usize,
            truncated_fraction: f64,
            cluster_report: Vec<ClusterOut>,
        }
        #[derive(Serialize)]
        struct ClusterOut {
            reference: [f64; 2],
            matched: Vec<[f64; 2]>,
        }
        serde_json::to_string_pretty(&Out {
            q1: complex_to_pairs(&self.q1.values),
            a: self.q1.interval_length,
            h: [self.h.re, self.h.im],
            residual_norm: self.residual_norm,
            gram_condition: self.gram_condition,
            effective_rank: self.effective_rank,
            truncated_fraction: self.truncated_fraction,
            cluster_report: self
                .cluster_report
                .iter()
                .map(|(r, m)| ClusterOut {
                    reference: [r.re, r.im],
                    matched: m.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        })
        .unwrap()
    }
}

/// Row factory over the known data: g-jets, f-jets, plain jet rows, and
/// Hermite-interpolated rows.
pub struct SystemBuilder {
    pub known: KnownData,
    facade: ProblemSpec,
}

impl SystemBuilder {
    pub fn new(known: &KnownData) -> Result<Self> {
        let facade = ProblemSpec::new(
            known.a,
            ComplexGrid::zeros(known.a, 8),
            known.q2.clone(),
            Complex64::ZERO,
            known.big_h,
            known.a1,
            known.a2,
        )?;
        Ok(Self {
            known: known.clone(),
            facade,
        })
    }

    fn g_jets(&self, i: u8, mu: Complex64, nu_max: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let (g0, g1) = g_jet(&self.facade, i, mu, nu_max)?;
        let scale = 1.0 + self.known.a1 + self.known.a2.norm();
        if g0[0].norm() < 1e-10 * scale && g1[0].norm() < 1e-10 * scale {
            return Err(Error::DegenerateRow { mu });
        }
        Ok((g0, g1))
    }

    /// Jets of f_i(lambda) = [c(a) + omega1 s(a)] g_{i,1}
    ///                      - g_{i,0} [omega1 c(a) - lambda s(a)].
    pub fn f_jets(&self, i: u8, mu: Complex64, nu_max: usize) -> Result<Vec<Complex64>> {
        let (g0, g1) = self.g_jets(i, mu, nu_max)?;
        let (s, c) = sc_jets(self.known.a, mu, nu_max);
        let ls = lambda_s_jets(mu, &s);
        let w1 = self.known.omega1;
        let e1: Vec<Complex64> = c.iter().zip(&s).map(|(cv, sv)| cv + w1 * sv).collect();
        let e2: Vec<Complex64> = c.iter().zip(&ls).map(|(cv, lv)| w1 * cv - lv).collect();
        let t1 = jet_mul(&e1, &g1, nu_max);
        let t2 = jet_mul(&g0, &e2, nu_max);
        Ok(t1.iter().zip(&t2).map(|(x, y)| x - y).collect())
    }

    fn row_weight(&self, i: u8, mu: Complex64) -> f64 {
        if i == 0 {
            (mu.norm() + 1.0).sqrt()
        } else {
            1.0
        }
    }

    fn sample_components(&self, atoms: &[JetAtom], mu: Complex64) -> (ComplexGrid, ComplexGrid) {
        let a = self.known.a;
        let rho = sqrt_lambda(mu).norm();
        let n = ((8.0 * rho * a).ceil() as usize).max(256);
        let eval1 = |t: f64| atoms.iter().map(|at| at.eval(t).0).sum();
        let eval2 = |t: f64| atoms.iter().map(|at| at.eval(t).1).sum();
        (
            ComplexGrid::from_fn(a, n, eval1).unwrap(),
            ComplexGrid::from_fn(a, n, eval2).unwrap(),
        )
    }

    /// Plain jet row U_i^<nu>(., mu) with its tau.
    pub fn plain_row(&self, i: u8, mu: Complex64, nu: usize) -> Result<(BasisVector, Complex64)> {
        let (g0, g1) = self.g_jets(i, mu, nu)?;
        let atoms = vec![JetAtom {
            mu,
            nu,
            coeff: Complex64::ONE,
            g0,
            g1,
        }];
        let tau = self.f_jets(i, mu, nu)?[nu];
        let (c1, c2) = self.sample_components(&atoms, mu);
        Ok((
            BasisVector {
                i,
                mu,
                nu,
                weight: self.row_weight(i, mu),
                atoms,
                component1: c1,
                component2: c2,
            },
            tau,
        ))
    }

    /// Hermite rows for one reference eigenvalue of multiplicity m with the
    /// matched perturbed nodes: degree <= m-1 interpolation of U and f at
    /// the nodes, with jets of the interpolant taken at the reference point.
    pub fn hermite_rows(
        &self,
        i: u8,
        reference: Complex64,
        nodes: &[Complex64],
    ) -> Result<Vec<(BasisVector, Complex64)>> {
        let m = nodes.len();
        // group coincident nodes (jets are needed up to repetition count - 1)
        let mut sorted = nodes.to_vec();
        sorted.sort_by(|x, y| {
            (x.norm(), x.re, x.im)
                .partial_cmp(&(y.norm(), y.re, y.im))
                .unwrap()
        });
        let coincide = |x: Complex64, y: Complex64| (x - y).norm() < 1e-12 * (1.0 + x.norm());
        // slot r -> (distinct node, jet order)
        let mut slots: Vec<(Complex64, usize)> = Vec::with_capacity(m);
        for &z in &sorted {
            let order = slots
                .iter()
                .rev()
                .take_while(|(zz, _)| coincide(*zz, z))
                .count();
            let z_canon = if order > 0 {
                slots[slots.len() - 1].0
            } else {
                z
            };
            slots.push((z_canon, order));
        }
        // divided-difference weights of each slot in the Newton coefficients,
        // then jets of the interpolant at the reference point, computed by
        // pushing indicator data through the table
        let weights = hermite_weights(&slots, reference, m);

        // g and f jets at each distinct node, to the maximal needed order
        let mut g_cache: Vec<(Vec<Complex64>, Vec<Complex64>)> = Vec::with_capacity(m);
        let mut f_cache: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        for &(z, order) in &slots {
            g_cache.push(self.g_jets(i, z, order)?);
            f_cache.push(self.f_jets(i, z, order)?);
        }

        let w = self.row_weight(i, reference);
        let mut out = Vec::with_capacity(m);
        for nu in 0..m {
            let mut atoms = Vec::new();
            let mut tau = Complex64::ZERO;
            for (r, &(z, order)) in slots.iter().enumerate() {
                let coeff = weights[nu][r];
                if coeff.norm() == 0.0 {
                    continue;
                }
                let (g0, g1) = &g_cache[r];
                atoms.push(JetAtom {
                    mu: z,
                    nu: order,
                    coeff,
                    g0: g0.clone(),
                    g1: g1.clone(),
                });
                tau += coeff * f_cache[r][order];
            }
            let (c1, c2) = self.sample_components(&atoms, reference);
            out.push((
                BasisVector {
                    i,
                    mu: reference,
                    nu,
                    weight: w,
                    atoms,
                    component1: c1,
                    component2: c2,
                },
                tau,
            ));
        }
        Ok(out)
    }
}

/// For each jet order nu = 0..m-1, the linear weights of the data slots
/// (F^<order>(z_r)) in p^<nu>(z0), where p is the Hermite interpolant of
/// degree <= m-1 at the slots.
fn hermite_weights(slots: &[(Complex64, usize)], z0: Complex64, m: usize) -> Vec<Vec<Complex64>> {
    let eval_jets = |data: &[Complex64]| -> Vec<Complex64> {
        // divided-difference table with repeated nodes; data[r] plays the
        // normalized jet F^<order_r>(z_r)
        let n = slots.len();
        let mut table: Vec<Vec<Complex64>> = vec![data.to_vec()];
        for k in 1..n {
            let mut row = Vec::with_capacity(n - k);
            for idx in 0..n - k {
                let (zi, _) = slots[idx];
                let (zk, _) = slots[idx + k];
                let v = if (zk - zi).norm() < 1e-12 * (1.0 + zi.norm()) {
                    // repeated node: the divided difference equals the
                    // normalized k-th jet, which sits at slot order k
                    data[idx + k]
                } else {
                    (table[k - 1][idx + 1] - table[k - 1][idx]) / (zk - zi)
                };
                row.push(v);
            }
            table.push(row);
        }
        let coeffs: Vec<Complex64> = (0..n).map(|k| table[k][0]).collect();
        // jets of the Newton-form polynomial at z0 (Horner in jet arithmetic)
        let mut jets = vec![Complex64::ZERO; m];
        jets[0] = coeffs[n - 1];
        for k in (0..n - 1).rev() {
            // multiply by (z - z_{k+1}): jet [z0 - z_{k+1}, 1, 0, ...]
            let shift = z0 - slots[k + 1].0;
            let mut next = vec![Complex64::ZERO; m];
            for nu in 0..m {
                next[nu] = jets[nu] * shift;
                if nu >= 1 {
                    next[nu] += jets[nu - 1];
                }
            }
            next[0] += coeffs[k];
            jets = next;
        }
        jets
    };

    let n = slots.len();
    let mut weights = vec![vec![Complex64::ZERO; n]; m];
    for r in 0..n {
        let mut indicator = vec![Complex64::ZERO; n];
        indicator[r] = Complex64::ONE;
        let jets = eval_jets(&indicator);
        for (nu, row) in weights.iter_mut().enumerate() {
            row[r] = jets[nu];
        }
    }
    weights
}

fn push_subspectrum_rows(
    builder: &SystemBuilder,
    sub: &Subspectrum,
    basis: &mut Vec<BasisVector>,
    rhs: &mut Vec<Complex64>,
) -> Result<()> {
    for (mu, m) in sub.taken_once() {
        for nu in 0..m {
            let (row, tau) = builder.plain_row(sub.i, mu, nu)?;
            basis.push(row);
            rhs.push(tau);
        }
    }
    Ok(())
}

/// Build the main-equation system from exact subspectra (sub0 may be empty).
pub fn build_basis_and_rhs(
    known: &KnownData,
    sub0: &Subspectrum,
    sub1: &Subspectrum,
) -> Result<MainSystem> {
    let builder = SystemBuilder::new(known)?;
    let mut basis = Vec::new();
    let mut rhs = Vec::new();
    push_subspectrum_rows(&builder, sub0, &mut basis, &mut rhs)?;
    push_subspectrum_rows(&builder, sub1, &mut basis, &mut rhs)?;
    let rows = basis.len().max(2);
    Ok(MainSystem {
        a: known.a,
        basis,
        rhs,
        modes: rows.div_ceil(2),
    })
}

/// Match perturbed eigenvalues to reference clusters and build the
/// Hermite-regularized rows for one subspectrum.
pub fn hermite_regularize(
    reference: &Subspectrum,
    perturbed: &[Complex64],
    builder: &SystemBuilder,
) -> Result<(Vec<BasisVector>, Vec<Complex64>, Vec<(Complex64, Vec<Complex64>)>)> {
    let refs = reference.taken_once();
    if refs.is_empty() {
        if perturbed.is_empty() {
            return Ok((vec![], vec![], vec![]));
        }
        return Err(Error::UnmatchedEigenvalue {
            value: perturbed[0],
        });
    }
    // matching radius: half the minimal gap between distinct reference values
    let mut min_gap = f64::INFINITY;
    for (j, (zj, _)) in refs.iter().enumerate() {
        for (zk, _) in refs.iter().skip(j + 1) {
            min_gap = min_gap.min((zj - zk).norm());
        }
    }
    let radius = if min_gap.is_finite() {
        0.5 * min_gap
    } else {
        f64::INFINITY
    };

    let mut clusters: Vec<Vec<Complex64>> = vec![Vec::new(); refs.len()];
    for &z in perturbed {
        let (best, dist) = refs
            .iter()
            .enumerate()
            .map(|(k, (zr, _))| (k, (z - zr).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if dist > radius {
            return Err(Error::UnmatchedEigenvalue { value: z });
        }
        clusters[best].push(z);
    }

    let mut basis = Vec::new();
    let mut rhs = Vec::new();
    let mut report = Vec::new();
    for ((mu, m), nodes) in refs.iter().zip(&clusters) {
        if nodes.len() != *m {
            return Err(Error::UnresolvedCluster {
                center: *mu,
                winding: nodes.len() as i32,
                capacity: *m,
            });
        }
        for (row, tau) in builder.hermite_rows(reference.i, *mu, nodes)? {
            basis.push(row);
            rhs.push(tau);
        }
        report.push((*mu, nodes.clone()));
    }
    Ok((basis, rhs, report))
}

/// Assemble the weighted rectangular system: rows are the main-equation
/// functionals against the trial modes, columns are sine modes (K1) then
/// cosine modes (K2).
pub fn assemble(system: &MainSystem) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let a = system.a;
    let m_modes = system.modes;
    let pi = std::f64::consts::PI;
    let n_rows = system.basis.len();
    let mut mat = DMatrix::from_element(n_rows, 2 * m_modes, Complex64::ZERO);
    let mut b = DVector::from_element(n_rows, Complex64::ZERO);
    let (gl_nodes, gl_weights) = gauss_legendre(16);

    for (r, row) in system.basis.iter().enumerate() {
        let rho = sqrt_lambda(row.mu).norm();
        let freq = rho + m_modes as f64 * pi / a;
        let panels = ((freq * a / 3.0).ceil() as usize).max(8);
        let h = a / panels as f64;
        // shared quadrature nodes for all columns of this row
        let mut ts = Vec::with_capacity(panels * gl_nodes.len());
        let mut u1 = Vec::with_capacity(ts.capacity());
        let mut u2 = Vec::with_capacity(ts.capacity());
        let mut ws = Vec::with_capacity(ts.capacity());
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in gl_nodes.iter().zip(gl_weights) {
                let t = mid + 0.5 * h * x;
                let (v1, v2) = row.eval(t);
                ts.push(t);
                u1.push(v1);
                u2.push(v2);
                ws.push(w * 0.5 * h);
            }
        }
        for k in 1..=m_modes {
            let mut acc = Complex64::ZERO;
            for j in 0..ts.len() {
                acc += ws[j] * u1[j] * (k as f64 * pi * ts[j] / a).sin();
            }
            mat[(r, k - 1)] = row.weight * acc;
        }
        for k in 0..m_modes {
            let mut acc = Complex64::ZERO;
            for j in 0..ts.len() {
                acc += ws[j] * u2[j] * (k as f64 * pi * ts[j] / a).cos();
            }
            mat[(r, m_modes + k)] = row.weight * acc;
        }
        b[r] = row.weight * system.rhs[r];
    }
    (mat, b)
}

impl MainSystem {
    /// <K, row> = int K1 U1 + K2 U2 for each row (unweighted), with K given
    /// as piecewise-linear grids; used by identity checks.
    pub fn apply(&self, k1: &ComplexGrid, k2: &ComplexGrid) -> Vec<Complex64> {
        let (gl_nodes, gl_weights) = gauss_legendre(8);
        self.basis
            .iter()
            .map(|row| {
                let rho = sqrt_lambda(row.mu).norm();
                let mut acc = Complex64::ZERO;
                let h = k1.spacing();
                let sub = ((rho * h / 2.0).ceil() as usize).max(1);
                for seg in 0..k1.len() - 1 {
                    for s in 0..sub {
                        let lo = seg as f64 * h + s as f64 * h / sub as f64;
                        let mid = lo + 0.5 * h / sub as f64;
                        for (x, w) in gl_nodes.iter().zip(gl_weights) {
                            let t = mid + 0.5 * h / sub as f64 * x;
                            let (u1, u2) = row.eval(t);
                            acc += w * (k1.eval(t) * u1 + k2.eval(t) * u2)
                                * (0.5 * h / sub as f64);
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// Synthesize K1, K2 grids from trial-space coefficients.
pub fn solve_k(
    system: &MainSystem,
    mat: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    reg: f64,
) -> Result<(ComplexGrid, ComplexGrid, LsqSolution)> {
    let sol = solve_truncated_lsq(mat, b, reg)?;
    let a = system.a;
    let m_modes = system.modes;
    let pi = std::f64::consts::PI;
    let n_out = (4 * m_modes).max(256);
    let k1 = ComplexGrid::from_fn(a, n_out, |t| {
        (1..=m_modes)
            .map(|k| sol.x[k - 1] * (k as f64 * pi * t / a).sin())
            .sum()
    })?;
    let k2 = ComplexGrid::from_fn(a, n_out, |t| {
        (0..m_modes)
            .map(|k| sol.x[m_modes + k] * (k as f64 * pi * t / a).cos())
            .sum()
    })?;
    Ok((k1, k2, sol))
}

#[derive(Debug, Clone)]
pub struct InvertOptions {
    /// Trial modes M; default ceil(rows / 2).
    pub modes: Option<usize>,
    /// Relative singular-value cutoff.
    pub reg: f64,
    /// Marching grid for the Goursat continuation.
    pub grid_n: usize,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            modes: None,
            reg: 1e-10,
            grid_n: 256,
        }
    }
}

fn finish_invert(
    known: &KnownData,
    mut system: MainSystem,
    report: Vec<(Complex64, Vec<Complex64>)>,
    options: &InvertOptions,
) -> Result<ReconstructionResult> {
    if let Some(m) = options.modes {
        system.modes = m.max(2);
    }
    let (mat, b) = assemble(&system);
    let (k1, k2, sol) =
        solve_k(&system, &mat, &b, options.reg).map_err(|e| Error::stage("solve", e))?;
    let cd = CauchyData::new(k1, k2, known.omega1).map_err(|e| Error::stage("solve", e))?;
    let (q1, h) = cauchy_to_potential(&cd, options.grid_n)
        .map_err(|e| Error::stage("goursat continuation", e))?;
    Ok(ReconstructionResult {
        q1,
        h,
        residual_norm: sol.residual_norm,
        gram_condition: sol.condition,
        effective_rank: sol.effective_rank,
        truncated_fraction: sol.truncated_fraction,
        cluster_report: report,
    })
}

/// End-to-end inversion from exact subspectra.
pub fn invert(
    known: &KnownData,
    sub0: &Subspectrum,
    sub1: &Subspectrum,
    options: &InvertOptions,
) -> Result<ReconstructionResult> {
    let system =
        build_basis_and_rhs(known, sub0, sub1).map_err(|e| Error::stage("basis", e))?;
    finish_invert(known, system, vec![], options)
}

/// End-to-end inversion from perturbed eigenvalues, regularized by Hermite
/// interpolation against reference subspectra.
pub fn invert_regularized(
    known: &KnownData,
    reference0: &Subspectrum,
    perturbed0: &[Complex64],
    reference1: &Subspectrum,
    perturbed1: &[Complex64],
    options: &InvertOptions,
) -> Result<ReconstructionResult> {
    let builder = SystemBuilder::new(known).map_err(|e| Error::stage("basis", e))?;
    let (mut basis, mut rhs, mut report) = hermite_regularize(reference0, perturbed0, &builder)
        .map_err(|e| Error::stage("regularize", e))?;
    let (b1, r1, rep1) = hermite_regularize(reference1, perturbed1, &builder)
        .map_err(|e| Error::stage("regularize", e))?;
    basis.extend(b1);
    rhs.extend(r1);
    report.extend(rep1);
    let rows = basis.len().max(2);
    let system = MainSystem {
        a: known.a,
        basis,
        rhs,
        modes: rows.div_ceil(2),
    };
    finish_invert(known, system, report, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::forward_cauchy;
    use crate::spectra::{delta, SpectralPoint};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_known() -> KnownData {
        KnownData::new(
            0.5,
            ComplexGrid::zeros(0.5, 8),
            BoundaryH::Value(Complex64::ZERO),
            1.0,
            Complex64::ZERO,
            Complex64::ZERO,
        )
        .unwrap()
    }

    fn sub_from(i: u8, lambdas: &[Complex64]) -> Subspectrum {
        Subspectrum::new(
            i,
            lambdas
                .iter()
                .map(|&l| SpectralPoint {
                    lambda: l,
                    multiplicity: 1,
                    i,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_rows_match_closed_form() {
        let builder = SystemBuilder::new(&zero_known()).unwrap();
        for n in [1usize, 3] {
            let mu = c((n as f64 * PI).powi(2), 0.0);
            let rho = n as f64 * PI;
            let (row, tau) = builder.plain_row(1, mu, 0).unwrap();
            for &t in &[0.1, 0.27, 0.45] {
                let (u1, u2) = row.eval(t);
                let expect1 = -(rho * 0.5).sin() * (rho * t).sin();
                let expect2 = -(rho * 0.5).cos() * (rho * t).cos();
                assert!((u1 - c(expect1, 0.0)).norm() < 1e-8, "u1 at t={t}");
                assert!((u2 - c(expect2, 0.0)).norm() < 1e-8, "u2 at t={t}");
            }
            // f_1(lambda) = -rho sin rho vanishes at (n pi)^2
            assert!(tau.norm() < 1e-8, "tau = {tau}");
        }
    }

    #[test]
    fn identity_2_11_at_generic_lambda() {
        // <K, U_i(., lambda)> - f_i(lambda) = -Delta_i(lambda) for any lambda
        let a = 0.5;
        let q1 = ComplexGrid::from_fn(a, 128, |x| {
            c(0.6 * (PI * x / a).sin(), 0.2 * (2.0 * PI * x / a).sin())
        })
        .unwrap();
        let h = c(0.3, -0.1);
        let q2 = ComplexGrid::from_fn(0.5, 64, |x| c(0.4 * (3.0 * x).cos(), 0.1)).unwrap();
        let spec = ProblemSpec::new(
            a,
            q1.clone(),
            q2,
            h,
            BoundaryH::Value(c(0.2, 0.1)),
            1.5,
            c(0.1, 0.0),
        )
        .unwrap();
        let known = KnownData::from_spec(&spec);
        let builder = SystemBuilder::new(&known).unwrap();
        let cd = forward_cauchy(&q1, h, 128).unwrap();
        for (i, lam) in [(1u8, c(30.0, 2.0)), (0u8, c(7.0, -1.0)), (1u8, c(150.0, 0.0))] {
            let (row, tau) = builder.plain_row(i, lam, 0).unwrap();
            let system = MainSystem {
                a,
                basis: vec![row],
                rhs: vec![tau],
                modes: 4,
            };
            let inner = system.apply(&cd.k1, &cd.k2)[0];
            let d = delta(&spec, i, lam, 0).unwrap()[0];
            let lhs = inner - tau;
            assert!(
                (lhs + d).norm() < 2e-5 * (1.0 + d.norm()),
                "i={i} lam={lam}: <K,U>-f = {lhs}, -Delta = {}",
                -d
            );
        }
    }

    #[test]
    fn hermite_passthrough_equals_plain() {
        let known = zero_known();
        let builder = SystemBuilder::new(&known).unwrap();
        let mu = c(PI * PI, 0.0);
        let reference = sub_from(1, &[mu]);
        let (basis, rhs, _) = hermite_regularize(&reference, &[mu], &builder).unwrap();
        let (plain, tau) = builder.plain_row(1, mu, 0).unwrap();
        assert_eq!(basis.len(), 1);
        assert!((rhs[0] - tau).norm() < 1e-14);
        for &t in &[0.1, 0.33] {
            let (a1, a2) = basis[0].eval(t);
            let (b1, b2) = plain.eval(t);
            assert!((a1 - b1).norm() < 1e-13);
            assert!((a2 - b2).norm() < 1e-13);
        }
    }

    #[test]
    fn hermite_split_double_is_first_order() {
        // synthetic double reference eigenvalue split into two simple nodes
        let known = zero_known();
        let builder = SystemBuilder::new(&known).unwrap();
        let mu = c(PI * PI, 0.0);
        let reference = Subspectrum::new(
            1,
            vec![SpectralPoint {
                lambda: mu,
                multiplicity: 2,
                i: 1,
            }],
        )
        .unwrap();
        let jets: Vec<_> = (0..2)
            .map(|nu| builder.plain_row(1, mu, nu).unwrap())
            .collect();
        let mut errs = Vec::new();
        let rs = [1e-3, 1e-2, 1e-1];
        for &r in &rs {
            let nodes = [mu - r, mu + r];
            let (basis, rhs, _) = hermite_regularize(&reference, &nodes, &builder).unwrap();
            // compare row nu=0 and tau against the jet construction
            let mut worst = 0.0f64;
            for (row, (jet_row, jet_tau)) in basis.iter().zip(&jets) {
                for &t in &[0.12, 0.4] {
                    let (a1, a2) = row.eval(t);
                    let (b1, b2) = jet_row.eval(t);
                    worst = worst.max((a1 - b1).norm()).max((a2 - b2).norm());
                }
                let _ = jet_tau;
            }
            worst = worst.max((rhs[0] - jets[0].1).norm());
            errs.push(worst);
        }
        // log-log slope approximately 1 (first order in the split radius)
        let slope = ((errs[2] / errs[0]).ln()) / ((rs[2] / rs[0]).ln());
        assert!(
            (slope - 1.0).abs() < 0.35,
            "slope {slope}, errors {errs:?}"
        );
    }

    #[test]
    fn synthetic_coefficients_recovered() {
        let known = zero_known();
        let sub1 = sub_from(
            1,
            &(0..8)
                .map(|n| c((n as f64 * PI).powi(2), 0.0))
                .collect::<Vec<_>>(),
        );
        let system = build_basis_and_rhs(&known, &sub_from(0, &[]), &sub1).unwrap();
        let (mat, _) = assemble(&system);
        let x_true = DVector::from_fn(2 * system.modes, |k, _| {
            c(0.3 / (k + 1) as f64, -0.1 / (k + 2) as f64)
        });
        let b = &mat * &x_true;
        let sol = solve_truncated_lsq(&mat, &b, 1e-12).unwrap();
        assert!(
            (sol.x - x_true).norm() < 1e-8,
            "condition {}",
            sol.condition
        );
    }

    #[test]
    fn invert_zero_model() {
        let known = zero_known();
        let sub1 = sub_from(
            1,
            &(0..12)
                .map(|n| c((n as f64 * PI).powi(2), 0.0))
                .collect::<Vec<_>>(),
        );
        let result = invert(
            &known,
            &sub_from(0, &[]),
            &sub1,
            &InvertOptions {
                grid_n: 128,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(result.q1.l2_norm() < 1e-6, "q norm {}", result.q1.l2_norm());
        assert!(result.h.norm() < 1e-6, "h {}", result.h);
        // mean constraint holds exactly by construction
        let omega = result.h + 0.5 * result.q1.integral();
        assert!((omega - known.omega1).norm() < 1e-12);
    }

    #[test]
    fn known_data_json_round_trip() {
        let known = KnownData::new(
            0.4,
            ComplexGrid::from_fn(0.6, 16, |x| c(x, -x)).unwrap(),
            BoundaryH::Value(c(1.0, 2.0)),
            1.5,
            c(0.2, 0.1),
            c(0.5, -0.5),
        )
        .unwrap();
        let back = KnownData::from_json(&known.to_json()).unwrap();
        assert_eq!(known, back);
    }
}
