//! Flat model tori, their symplectic data, compatible almost-complex
//! structures built by an ω-orthogonal frame, and Darboux charts obtained by
//! integrating the Moser vector field.
//!
//! Points are real coordinate vectors ordered `(x₁, y₁, x₂, y₂)`. Two-forms
//! and endomorphisms are `2n × 2n` real matrices with `ω(u, v) = uᵀ W v`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAXD: usize = 4;

/// Model torus `ℝ^{2n}/ℤ^{2n}` at ampleness level `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryContext {
    pub n: usize,
    pub k: u32,
    pub c_k: f64,
}

impl GeometryContext {
    pub fn new(n: usize, k: u32) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidInput(format!("complex dimension {n} not in {{1, 2}}")));
        }
        if k == 0 {
            return Err(Error::InvalidInput("ampleness level must be positive".into()));
        }
        Ok(GeometryContext {
            n,
            k,
            c_k: 2.0 * PI * k as f64,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Length scale between g and g_k.
    pub fn sqrt_ck(&self) -> f64 {
        self.c_k.sqrt()
    }

    pub fn omega0(&self) -> DMatrix<f64> {
        standard_omega(self.n)
    }

    pub fn j0(&self) -> DMatrix<f64> {
        standard_j(self.n)
    }

    /// The g_k metric tensor `c_k · I`.
    pub fn metric_k(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) * self.c_k
    }
}

pub fn standard_omega(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        w[(2 * j, 2 * j + 1)] = 1.0;
        w[(2 * j + 1, 2 * j)] = -1.0;
    }
    w
}

pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j0 = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        j0[(2 * j, 2 * j + 1)] = -1.0;
        j0[(2 * j + 1, 2 * j)] = 1.0;
    }
    j0
}

/// Flat torus distance in g_k units: minimum over lattice representatives.
pub fn rescaled_distance(x: &[f64], y: &[f64], ctx: &GeometryContext) -> f64 {
    let d2: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            let d = d - d.round();
            d * d
        })
        .sum();
    ctx.sqrt_ck() * d2.sqrt()
}

type MatFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A field of antisymmetric matrices. The evaluator writes the row-major
/// `2n × 2n` matrix at a point into the output slice.
#[derive(Clone)]
pub struct TwoFormField {
    dim: usize,
    eval: Arc<MatFn>,
}

impl std::fmt::Debug for TwoFormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TwoFormField(dim = {})", self.dim)
    }
}

impl TwoFormField {
    pub fn new(dim: usize, eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4");
        TwoFormField { dim, eval: Arc::new(eval) }
    }

    pub fn constant(w: DMatrix<f64>) -> Self {
        let dim = w.nrows();
        let rows: Vec<f64> = (0..dim * dim).map(|i| w[(i / dim, i % dim)]).collect();
        TwoFormField::new(dim, move |_, out| out.copy_from_slice(&rows))
    }

    pub fn standard(n: usize) -> Self {
        TwoFormField::constant(standard_omega(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn write(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = [0.0; MAXD * MAXD];
        self.write(x, &mut buf[..self.dim * self.dim]);
        DMatrix::from_row_slice(self.dim, self.dim, &buf[..self.dim * self.dim])
    }

    pub fn antisymmetry_residual(&self, x: &[f64]) -> f64 {
        let w = self.at(x);
        (&w + w.transpose()).amax()
    }

    /// Max component of the finite-difference exterior derivative
    /// `∂_a ω_bc + ∂_b ω_ca + ∂_c ω_ab`.
    pub fn closedness_residual(&self, x: &[f64], h: f64) -> f64 {
        let d = self.dim;
        let grad: Vec<DMatrix<f64>> = (0..d)
            .map(|a| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[a] += h;
                m[a] -= h;
                (self.at(&p) - self.at(&m)) / (2.0 * h)
            })
            .collect();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let r = grad[a][(b, c)] + grad[b][(c, a)] + grad[c][(a, b)];
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }
}

/// A field of endomorphisms, evaluated like [`TwoFormField`].
#[derive(Clone)]
pub struct AlmostComplexField {
    dim: usize,
    eval: Arc<MatFn>,
}

impl std::fmt::Debug for AlmostComplexField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AlmostComplexField(dim = {})", self.dim)
    }
}

impl AlmostComplexField {
    pub fn new(dim: usize, eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4");
        AlmostComplexField { dim, eval: Arc::new(eval) }
    }

    pub fn constant(j: DMatrix<f64>) -> Self {
        let dim = j.nrows();
        let rows: Vec<f64> = (0..dim * dim).map(|i| j[(i / dim, i % dim)]).collect();
        AlmostComplexField::new(dim, move |_, out| out.copy_from_slice(&rows))
    }

    pub fn standard(n: usize) -> Self {
        AlmostComplexField::constant(standard_j(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = [0.0; MAXD * MAXD];
        (self.eval)(x, &mut buf[..self.dim * self.dim]);
        DMatrix::from_row_slice(self.dim, self.dim, &buf[..self.dim * self.dim])
    }

    /// `‖J² + I‖` (max entry) at a point.
    pub fn square_residual(&self, x: &[f64]) -> f64 {
        let j = self.at(x);
        (&j * &j + DMatrix::identity(self.dim, self.dim)).amax()
    }
}

/// Output of [`compatible_almost_complex`]: the structure together with the
/// residuals and the measured constant in `‖J̃ − J_ref‖ ≤ C‖ω − ω₀‖`.
#[derive(Clone, Debug)]
pub struct CompatibleStructure {
    pub field: AlmostComplexField,
    pub constant: f64,
    pub square_residual: f64,
    pub invariance_residual: f64,
    /// Smallest eigenvalue of the symmetric part of `W J̃` over the samples.
    pub min_taming: f64,
}

fn probe_vectors(d: usize, sample: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ sample as u64);
    for _ in 0..d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|a| *a /= nrm);
        out.push(v);
    }
    out
}

fn form(w: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += u[a] * w[(a, b)] * v[b];
        }
    }
    s
}

/// Builds an ω-compatible structure from a symplectic frame
/// `e₁, e₁', …, eₙ, eₙ'` where `eᵢ' = J_ref eᵢ` corrected to be ω-orthogonal
/// to the earlier pairs.
fn frame_structure(w: &DMatrix<f64>, j: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, ()> {
    let d = w.nrows();
    let n = d / 2;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut used = vec![false; d];
    let project = |v: &[f64], pairs: &[(Vec<f64>, Vec<f64>, f64)]| -> Vec<f64> {
        let mut out = v.to_vec();
        for (e, ep, c) in pairs {
            let a = form(w, v, ep) / c;
            let b = form(w, v, e) / c;
            for i in 0..d {
                out[i] += -a * e[i] + b * ep[i];
            }
        }
        out
    };
    for _ in 0..n {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for i in 0..d {
            if used[i] {
                continue;
            }
            let mut b = vec![0.0; d];
            b[i] = 1.0;
            let p = project(&b, &pairs);
            let nrm = p.iter().map(|a| a * a).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(_, _, bn)| nrm > *bn) {
                best = Some((i, p, nrm));
            }
        }
        let (i, mut e, nrm) = best.ok_or(())?;
        if nrm < 1e-12 {
            return Err(());
        }
        used[i] = true;
        e.iter_mut().for_each(|a| *a /= nrm);
        let je: Vec<f64> = (0..d).map(|a| (0..d).map(|b| j[(a, b)] * e[b]).sum()).collect();
        let ep = project(&je, &pairs);
        let c = form(w, &e, &ep);
        if c <= 0.0 {
            return Err(());
        }
        pairs.push((e, ep, c));
    }
    let mut basis = DMatrix::zeros(d, d);
    for (i, (e, ep, _)) in pairs.iter().enumerate() {
        for a in 0..d {
            basis[(a, 2 * i)] = e[a];
            basis[(a, 2 * i + 1)] = ep[a];
        }
    }
    let inv = basis.clone().try_inverse().ok_or(())?;
    Ok(&basis * standard_j(n) * inv)
}

/// Compatible almost-complex structure for `omega`, starting from `j_ref`.
/// Taming and nondegeneracy are checked at every sample point; the
/// returned field evaluates the frame construction pointwise.
pub fn compatible_almost_complex(omega: &TwoFormField, j_ref: &AlmostComplexField, samples: &[Vec<f64>]) -> Result<CompatibleStructure> {
    let d = omega.dim();
    if j_ref.dim() != d {
        return Err(Error::InvalidInput("dimension mismatch between ω and J".into()));
    }
    let w0 = standard_omega(d / 2);
    let mut constant: f64 = 0.0;
    let mut square_residual: f64 = 0.0;
    let mut invariance_residual: f64 = 0.0;
    let mut min_taming = f64::INFINITY;
    for (idx, x) in samples.iter().enumerate() {
        let w = omega.at(x);
        let det = w.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateForm { sample: idx, det });
        }
        let j = j_ref.at(x);
        for v in probe_vectors(d, idx) {
            let jv: Vec<f64> = (0..d).map(|a| (0..d).map(|b| j[(a, b)] * v[b]).sum()).collect();
            if form(&w, &v, &jv) <= 0.0 {
                return Err(Error::TamingFailure { sample: idx });
            }
        }
        let jt = frame_structure(&w, &j).map_err(|_| Error::TamingFailure { sample: idx })?;
        square_residual = square_residual.max((&jt * &jt + DMatrix::identity(d, d)).amax());
        invariance_residual = invariance_residual.max((jt.transpose() * &w * &jt - &w).amax());
        let wj = &w * &jt;
        let sym = (&wj + wj.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues().min();
        min_taming = min_taming.min(eig);
        let dw = (&w - &w0).norm();
        let dj = (&jt - &j).norm();
        if dw > 0.0 {
            constant = constant.max(dj / dw);
        }
    }
    let om = omega.clone();
    let jr = j_ref.clone();
    let field = AlmostComplexField::new(d, move |x, out| {
        let w = om.at(x);
        let j = jr.at(x);
        match frame_structure(&w, &j) {
            Ok(m) => {
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = m[(a, b)];
                    }
                }
            }
            Err(()) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
    });
    Ok(CompatibleStructure {
        field,
        constant,
        square_residual,
        invariance_residual,
        min_taming,
    })
}

// ---------------------------------------------------------------------------
// Moser flow

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

fn pfaffian(w: &[f64], d: usize) -> f64 {
    if d == 2 {
        w[1]
    } else {
        w[1] * w[2 * 4 + 3] - w[2] * w[4 + 3] + w[3] * w[4 + 2]
    }
}

/// Solves `A x = b` for `d ≤ 4` by Gaussian elimination with partial pivoting.
fn solve_small(a: &[f64], b: &[f64], d: usize) -> Option<[f64; MAXD]> {
    let mut m = [[0.0; MAXD + 1]; MAXD];
    for i in 0..d {
        for j in 0..d {
            m[i][j] = a[i * d + j];
        }
        m[i][d] = b[i];
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..d {
            let f = m[row][col] / m[col][col];
            for j in col..=d {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    let mut x = [0.0; MAXD];
    for i in (0..d).rev() {
        let mut s = m[i][d];
        for j in i + 1..d {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

struct MoserField {
    omega1: TwoFormField,
    center: Vec<f64>,
    d: usize,
    nodes: Vec<(f64, f64)>,
}

impl MoserField {
    fn diff_at(&self, y: &[f64], out: &mut [f64]) {
        let d = self.d;
        let mut p = [0.0; MAXD];
        for i in 0..d {
            p[i] = self.center[i] + y[i];
        }
        self.omega1.write(&p[..d], out);
        for j in 0..d / 2 {
            out[(2 * j) * d + 2 * j + 1] -= 1.0;
            out[(2 * j + 1) * d + 2 * j] += 1.0;
        }
    }

    /// Radial-homotopy primitive `α(y) = ∫₀¹ t ι_y(ω₁ − ω₀)(t y) dt`.
    fn alpha(&self, y: &[f64]) -> [f64; MAXD] {
        let d = self.d;
        let mut a = [0.0; MAXD];
        let mut buf = [0.0; MAXD * MAXD];
        let mut ty = [0.0; MAXD];
        for &(t, wt) in &self.nodes {
            for i in 0..d {
                ty[i] = t * y[i];
            }
            self.diff_at(&ty[..d], &mut buf[..d * d]);
            for b in 0..d {
                let mut s = 0.0;
                for c in 0..d {
                    s += y[c] * buf[c * d + b];
                }
                a[b] += wt * t * s;
            }
        }
        a
    }

    fn interpolant(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let d = self.d;
        self.diff_at(y, out);
        for v in out.iter_mut() {
            *v *= t;
        }
        for j in 0..d / 2 {
            out[(2 * j) * d + 2 * j + 1] += 1.0;
            out[(2 * j + 1) * d + 2 * j] -= 1.0;
        }
    }

    /// `X_t = W_t⁻¹ α`, so that `ι_X ω_t = −α`.
    fn vector(&self, t: f64, y: &[f64]) -> Result<[f64; MAXD]> {
        let d = self.d;
        let mut w = [0.0; MAXD * MAXD];
        self.interpolant(t, y, &mut w[..d * d]);
        let a = self.alpha(y);
        solve_small(&w[..d * d], &a[..d], d).ok_or_else(|| Error::InterpolantDegenerate { t, point: y.to_vec() })
    }

    /// Jacobian of `X_t` by Richardson-extrapolated central differences.
    fn jacobian(&self, t: f64, y: &[f64]) -> Result<[[f64; MAXD]; MAXD]> {
        let d = self.d;
        let h = 1e-2;
        let mut jac = [[0.0; MAXD]; MAXD];
        let mut p = [0.0; MAXD];
        for c in 0..d {
            let mut diff = |step: f64| -> Result<[f64; MAXD]> {
                p[..d].copy_from_slice(&y[..d]);
                p[c] += step;
                let xp = self.vector(t, &p[..d])?;
                p[c] -= 2.0 * step;
                let xm = self.vector(t, &p[..d])?;
                let mut r = [0.0; MAXD];
                for i in 0..d {
                    r[i] = (xp[i] - xm[i]) / (2.0 * step);
                }
                Ok(r)
            };
            let d1 = diff(h)?;
            let d2 = diff(h / 2.0)?;
            for i in 0..d {
                jac[i][c] = (4.0 * d2[i] - d1[i]) / 3.0;
            }
        }
        Ok(jac)
    }
}

/// Local Darboux chart around `center`. Chart coordinates are offsets from
/// the center; [`DarbouxChart::inverse`] maps them to the manifold and
/// satisfies `ψ*ω₁ = ω₀` up to the stored residual.
#[derive(Clone)]
pub struct DarbouxChart {
    pub center: Vec<f64>,
    pub radius: f64,
    pub ode_step: f64,
    /// Max entry of `Dψᵀ W₁(ψ) Dψ − W₀` over the validation grid.
    pub residual: f64,
    field: Arc<MoserField>,
    steps: usize,
}

impl std::fmt::Debug for DarbouxChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DarbouxChart")
            .field("center", &self.center)
            .field("radius", &self.radius)
            .field("ode_step", &self.ode_step)
            .field("residual", &self.residual)
            .finish()
    }
}

type State = ([f64; MAXD], [[f64; MAXD]; MAXD]);

impl DarbouxChart {
    fn rhs(&self, t: f64, s: &State) -> Result<State> {
        let d = self.field.d;
        let x = self.field.vector(t, &s.0[..d])?;
        let jx = self.field.jacobian(t, &s.0[..d])?;
        let mut dm = [[0.0; MAXD]; MAXD];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += jx[i][l] * s.1[l][j];
                }
                dm[i][j] = acc;
            }
        }
        Ok((x, dm))
    }

    fn flow(&self, z: &[f64]) -> Result<State> {
        let d = self.field.d;
        let mut s: State = ([0.0; MAXD], [[0.0; MAXD]; MAXD]);
        s.0[..d].copy_from_slice(&z[..d]);
        for i in 0..d {
            s.1[i][i] = 1.0;
        }
        let h = 1.0 / self.steps as f64;
        let axpy = |a: &State, k: &State, c: f64| -> State {
            let mut r = *a;
            for i in 0..d {
                r.0[i] += c * k.0[i];
                for j in 0..d {
                    r.1[i][j] += c * k.1[i][j];
                }
            }
            r
        };
        let escape = 4.0 * self.radius.max(0.25) + 1.0;
        for step in 0..self.steps {
            let t = step as f64 * h;
            let k1 = self.rhs(t, &s)?;
            let k2 = self.rhs(t + h / 2.0, &axpy(&s, &k1, h / 2.0))?;
            let k3 = self.rhs(t + h / 2.0, &axpy(&s, &k2, h / 2.0))?;
            let k4 = self.rhs(t + h, &axpy(&s, &k3, h))?;
            for i in 0..d {
                s.0[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                for j in 0..d {
                    s.1[i][j] += h / 6.0 * (k1.1[i][j] + 2.0 * k2.1[i][j] + 2.0 * k3.1[i][j] + k4.1[i][j]);
                }
            }
            let r = s.0[..d].iter().map(|a| a * a).sum::<f64>().sqrt();
            if !r.is_finite() || r > escape {
                return Err(Error::FlowEscaped { radius: r });
            }
        }
        Ok(s)
    }

    /// `ψ(z)`: chart offset to manifold point.
    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inverse_with_jacobian(z)?.0)
    }

    pub fn inverse_with_jacobian(&self, z: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let d = self.field.d;
        let s = self.flow(z)?;
        let p: Vec<f64> = (0..d).map(|i| self.center[i] + s.0[i]).collect();
        let jac = DMatrix::from_fn(d, d, |i, j| s.1[i][j]);
        Ok((p, jac))
    }

    /// Chart coordinates of a manifold point, by Newton on `ψ`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.field.d;
        let mut z: Vec<f64> = (0..d).map(|i| x[i] - self.center[i]).collect();
        for _ in 0..50 {
            let (p, jac) = self.inverse_with_jacobian(&z)?;
            let r = nalgebra::DVector::from_fn(d, |i, _| p[i] - x[i]);
            if r.amax() < 1e-14 {
                return Ok(z);
            }
            let dz = jac
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::InterpolantDegenerate { t: 1.0, point: z.clone() })?;
            for i in 0..d {
                z[i] -= dz[i];
            }
            if dz.amax() < 1e-15 {
                return Ok(z);
            }
        }
        Ok(z)
    }

    /// Max entry of `Dψᵀ W₁(ψ(z)) Dψ − W₀` at a chart point.
    pub fn pullback_defect(&self, z: &[f64]) -> Result<f64> {
        let d = self.field.d;
        let (p, jac) = self.inverse_with_jacobian(z)?;
        let w1 = self.field.omega1.at(&p);
        let pulled = jac.transpose() * w1 * &jac;
        Ok((pulled - standard_omega(d / 2)).amax())
    }

    /// Chart points used for validation: a `side²` grid of the ball in the
    /// first coordinate plane.
    pub fn validation_grid(&self, side: usize) -> Vec<Vec<f64>> {
        let d = self.field.d;
        let mut pts = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let a = -self.radius + 2.0 * self.radius * i as f64 / (side - 1) as f64;
                let b = -self.radius + 2.0 * self.radius * j as f64 / (side - 1) as f64;
                if a * a + b * b <= self.radius * self.radius * (1.0 + 1e-12) {
                    let mut z = vec![0.0; d];
                    z[0] = a;
                    z[1] = b;
                    pts.push(z);
                }
            }
        }
        pts
    }
}

fn check_interpolants(field: &MoserField, radius: f64) -> Result<()> {
    let d = field.d;
    let mut probes: Vec<Vec<f64>> = vec![vec![0.0; d]];
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0c);
    for _ in 0..64 {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        let r = radius * rng.gen_range(0.0f64..1.0).sqrt();
        probes.push(v.iter().map(|a| a * r / nrm).collect());
    }
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; d];
            v[i] = s * radius;
            probes.push(v);
        }
    }
    let mut buf = [0.0; MAXD * MAXD];
    for y in &probes {
        let mut prev = 1.0;
        for step in 0..=128 {
            let t = step as f64 / 128.0;
            field.interpolant(t, y, &mut buf[..d * d]);
            let pf = pfaffian(&buf[..d * d], d);
            if pf.abs() < 1e-10 || pf.signum() != prev {
                return Err(Error::InterpolantDegenerate { t, point: y.clone() });
            }
            prev = pf.signum();
        }
    }
    Ok(())
}

/// Darboux chart for `omega1` on the ball of the given radius around
/// `center`, by RK4 integration of the Moser vector field with a uniform
/// step. The residual is measured on a 50 × 50 validation grid.
pub fn moser_darboux(omega1: &TwoFormField, center: &[f64], radius: f64, ode_step: f64) -> Result<DarbouxChart> {
    moser_darboux_with_grid(omega1, center, radius, ode_step, 50)
}

/// As [`moser_darboux`] with a custom validation grid side.
pub fn moser_darboux_with_grid(
    omega1: &TwoFormField,
    center: &[f64],
    radius: f64,
    ode_step: f64,
    grid_side: usize,
) -> Result<DarbouxChart> {
    let d = omega1.dim();
    if center.len() != d {
        return Err(Error::InvalidInput("center dimension mismatch".into()));
    }
    if !(ode_step > 0.0 && ode_step <= 1.0) || radius <= 0.0 {
        return Err(Error::InvalidInput("ode step must lie in (0, 1] and radius be positive".into()));
    }
    let field = MoserField {
        omega1: omega1.clone(),
        center: center.to_vec(),
        d,
        nodes: gauss_legendre(10),
    };
    check_interpolants(&field, radius)?;
    let mut chart = DarbouxChart {
        center: center.to_vec(),
        radius,
        ode_step,
        residual: 0.0,
        field: Arc::new(field),
        steps: (1.0 / ode_step).round().max(1.0) as usize,
    };
    let mut residual: f64 = 0.0;
    for z in chart.validation_grid(grid_side.max(2)) {
        residual = residual.max(chart.pullback_defect(&z)?);
    }
    chart.residual = residual;
    Ok(chart)
}

/// `α(0)` of the radial-homotopy primitive, exposed for checks.
pub fn moser_primitive(omega1: &TwoFormField, center: &[f64], y: &[f64]) -> Vec<f64> {
    let d = omega1.dim();
    let field = MoserField {
        omega1: omega1.clone(),
        center: center.to_vec(),
        d,
        nodes: gauss_legendre(10),
    };
    field.alpha(y)[..d].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_forms() {
        let ctx = GeometryContext::new(2, 1).unwrap();
        let w = ctx.omega0();
        let j = ctx.j0();
        assert!((w.determinant() - 1.0).abs() < 1e-15);
        assert!((&j * &j + DMatrix::identity(4, 4)).amax() == 0.0);
        // ω0(∂x, J0 ∂x) = ω0(∂x, ∂y) = 1
        assert_eq!(w[(0, 1)], 1.0);
        assert_eq!(j[(1, 0)], 1.0);
    }

    #[test]
    fn distances() {
        let c1 = GeometryContext::new(1, 1).unwrap();
        let d = rescaled_distance(&[0.0, 0.0], &[0.5, 0.0], &c1);
        assert!((d - (2.0 * PI).sqrt() * 0.5).abs() < 1e-12);
        let c4 = GeometryContext::new(1, 4).unwrap();
        let d = rescaled_distance(&[0.0, 0.0], &[0.9, 0.0], &c4);
        assert!((d - (8.0 * PI).sqrt() * 0.1).abs() < 1e-12);
    }

    #[test]
    fn standard_pair_is_fixed() {
        for n in 1..=2 {
            let cs = compatible_almost_complex(&TwoFormField::standard(n), &AlmostComplexField::standard(n), &[vec![0.1; 2 * n]]).unwrap();
            assert_eq!(cs.field.at(&vec![0.3; 2 * n]), standard_j(n));
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(5);
        let s: f64 = q.iter().map(|(t, w)| w * t.powi(8)).sum();
        assert!((s - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn primitive_vanishes_at_center() {
        let om = TwoFormField::new(2, |x, out| {
            out.copy_from_slice(&[0.0, 1.0 + 0.05 * x[0], -1.0 - 0.05 * x[0], 0.0]);
        });
        let a = moser_primitive(&om, &[0.2, 0.1], &[0.0, 0.0]);
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn negated_form_is_rejected() {
        let om = TwoFormField::constant(-standard_omega(1));
        let err = moser_darboux_with_grid(&om, &[0.0, 0.0], 0.5, 0.1, 5).unwrap_err();
        assert!(matches!(err, Error::InterpolantDegenerate { .. }));
    }
}
