//! The level-k line bundle over the model torus in a single global unitary
//! gauge on the universal cover.
//!
//! In rescaled complex coordinates `w = √c_k (x + i y)` the connection is
//! `A = ¼ Σ (w dw̄ − w̄ dw)`, so `F = −i c_k ω₀`. Represented sections obey
//! `s(w + λ') = e_λ(w) s(w)` with the unit-modulus multiplier
//! `e_λ(w) = χ(λ) exp(−¼ Σ (λ' w̄ − λ̄' w))` and the character
//! `χ(λ) = exp(iπk Σ a_j b_j)` for `λ = (a₁, b₁, …)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::GeometryContext;
use crate::sections::{SectionField, WordSet};
use crate::{Error, Result};

/// `E_k = ℂ^{m+1} ⊗ L_k` over a model torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub ctx: GeometryContext,
    pub m_plus_1: usize,
}

impl BundleSpec {
    pub fn new(ctx: GeometryContext, m_plus_1: usize) -> Result<Self> {
        if !(1..=3).contains(&m_plus_1) {
            return Err(Error::InvalidInput(format!("rank {m_plus_1} not in 1..=3")));
        }
        Ok(BundleSpec { ctx, m_plus_1 })
    }

    pub fn n(&self) -> usize {
        self.ctx.n
    }

    pub fn k(&self) -> u32 {
        self.ctx.k
    }

    pub fn c_k(&self) -> f64 {
        self.ctx.c_k
    }

    /// Rescaled complex coordinates of a real point.
    pub fn complex_coords(&self, x: &[f64]) -> Vec<Complex64> {
        let s = self.ctx.sqrt_ck();
        (0..self.n()).map(|j| Complex64::new(s * x[2 * j], s * x[2 * j + 1])).collect()
    }
}

fn lattice_integers(lambda: &[f64]) -> Result<Vec<i64>> {
    if lambda.iter().any(|v| (v - v.round()).abs() > 1e-12 || !v.is_finite()) {
        return Err(Error::NonLatticeVector(lambda.to_vec()));
    }
    Ok(lambda.iter().map(|v| v.round() as i64).collect())
}

/// `χ(λ)⁻¹ · exp(−φ_λ(w))`-free part: the character of a lattice vector.
pub(crate) fn character(k: u32, lambda: &[i64]) -> Complex64 {
    let mut ab: i64 = 0;
    for j in 0..lambda.len() / 2 {
        ab += lambda[2 * j] * lambda[2 * j + 1];
    }
    // exp(iπk ab) = ±1
    if (k as i64 * ab).rem_euclid(2) == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(-1.0, 0.0)
    }
}

/// Multiplier `e_λ(x)` with `s(x + λ) = e_λ(x) s(x)`.
pub fn automorphy_factor(lambda: &[f64], x: &[f64], spec: &BundleSpec) -> Result<Complex64> {
    if lambda.len() != spec.ctx.dim() || x.len() != spec.ctx.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let li = lattice_integers(lambda)?;
    let w = spec.complex_coords(x);
    let lp = spec.complex_coords(lambda);
    let mut phi = Complex64::new(0.0, 0.0);
    for j in 0..spec.n() {
        phi += (lp[j] * w[j].conj() - lp[j].conj() * w[j]) / 4.0;
    }
    Ok(character(spec.k(), &li) * (-phi).exp())
}

/// `∫ A` along the straight segment from `x` to `y` (original coordinates).
pub fn connection_integral(spec: &BundleSpec, x: &[f64], y: &[f64]) -> Complex64 {
    let wx = spec.complex_coords(x);
    let wy = spec.complex_coords(y);
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..spec.n() {
        let d = wy[j] - wx[j];
        s += (wx[j] * d.conj() - wx[j].conj() * d) / 4.0;
    }
    s
}

/// Factor bringing the fibre at `y` back to `x` by parallel transport along
/// the straight segment: `P_{y→x} v = transport(x, y) · v`.
pub fn transport(spec: &BundleSpec, x: &[f64], y: &[f64]) -> Complex64 {
    connection_integral(spec, x, y).exp()
}

/// Holonomy of the square of side `h` (original units) spanned by the
/// coordinate directions `a`, `b` at `x`, traversed `x → x+h e_a → x+h e_a+h e_b
/// → x+h e_b → x`. For `(a, b) = (x_j, y_j)` this is the counterclockwise
/// loop, with holonomy `exp(+i c_k h²)`.
pub fn holonomy_square(spec: &BundleSpec, x: &[f64], a: usize, b: usize, h: f64) -> Complex64 {
    let mut p1 = x.to_vec();
    p1[a] += h;
    let mut p2 = p1.clone();
    p2[b] += h;
    let mut p3 = x.to_vec();
    p3[b] += h;
    let loop_pts = [x.to_vec(), p1, p2, p3, x.to_vec()];
    let mut integral = Complex64::new(0.0, 0.0);
    for w in loop_pts.windows(2) {
        integral += connection_integral(spec, &w[0], &w[1]);
    }
    (-integral).exp()
}

/// Curvature matrix `F_ab` (original coordinates) from the holonomy of small
/// squares: `F_ab ≈ −log(hol_ab) / h²`.
pub fn curvature_fd(spec: &BundleSpec, x: &[f64], h: f64) -> DMatrix<Complex64> {
    let d = spec.ctx.dim();
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            Complex64::new(0.0, 0.0)
        } else {
            -holonomy_square(spec, x, a, b, h).ln() / (h * h)
        }
    })
}

/// `‖F + i c_k ω₀‖` (max entry) with `F` from [`curvature_fd`].
pub fn curvature_residual(spec: &BundleSpec, x: &[f64], h: f64) -> f64 {
    let f = curvature_fd(spec, x, h);
    let w0 = spec.ctx.omega0();
    let i = Complex64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for a in 0..w0.nrows() {
        for b in 0..w0.ncols() {
            worst = worst.max((f[(a, b)] + i * spec.c_k() * w0[(a, b)]).norm());
        }
    }
    worst
}

/// Covariant derivative tensor at a point in g_k units, expanded in the
/// complex coframe `(dw₁ … dwₙ, dw̄₁ … dw̄ₙ)`. Entry `word = (a₁, …, a_j)`
/// holds `∇_{a₁} ⋯ ∇_{a_j} s ∈ ℂ^{m+1}`; letters `< n` are (1,0)
/// directions and letters `≥ n` are (0,1) directions.
#[derive(Clone, Debug, PartialEq)]
pub struct CovTensor {
    pub order: usize,
    pub n: usize,
    pub m_plus_1: usize,
    /// `(2n)^order` blocks of `m+1` values, word-major.
    pub data: Vec<Complex64>,
}

impl CovTensor {
    pub fn get(&self, word: &[usize]) -> &[Complex64] {
        let l = 2 * self.n;
        let idx = word.iter().fold(0, |acc, &a| acc * l + a);
        &self.data[idx * self.m_plus_1..(idx + 1) * self.m_plus_1]
    }

    /// Euclidean norm over all word coefficients.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn words_of(order: usize, n: usize) -> Vec<Vec<usize>> {
    let l = 2 * n;
    let total = l.pow(order as u32);
    (0..total)
        .map(|mut i| {
            let mut w = vec![0; order];
            for p in (0..order).rev() {
                w[p] = i % l;
                i /= l;
            }
            w
        })
        .collect()
}

/// `∇ʲ s` at `x` for `j ≤ 3`.
pub fn covariant_derivative(s: &SectionField, x: &[f64], order: usize) -> Result<CovTensor> {
    if order > 3 {
        return Err(Error::OrderTooHigh { order, max: 3 });
    }
    let n = s.spec.n();
    let wv = s.words(x, &WordSet::full(n, order));
    let mut data = Vec::new();
    for w in words_of(order, n) {
        data.extend_from_slice(wv.get(&w));
    }
    Ok(CovTensor {
        order,
        n,
        m_plus_1: s.spec.m_plus_1,
        data,
    })
}

/// `∇ʲ ∂̄ s` at `x` for `j ≤ 2`: the words of length `j + 1` whose innermost
/// letter is a (0,1) direction. Stored with the innermost letter last.
pub fn antiholomorphic_part(s: &SectionField, x: &[f64], order: usize) -> Result<CovTensor> {
    if order > 2 {
        return Err(Error::OrderTooHigh { order, max: 2 });
    }
    let n = s.spec.n();
    let full = covariant_derivative(s, x, order + 1)?;
    let mut data = Vec::new();
    for w in words_of(order + 1, n) {
        let last = *w.last().unwrap();
        if last >= n {
            data.extend_from_slice(full.get(&w));
        }
    }
    Ok(CovTensor {
        order: order + 1,
        n,
        m_plus_1: s.spec.m_plus_1,
        data,
    })
}

/// `∫_{T²} ω₀` over one elementary factor, from the lattice normalization.
pub fn chern_number(spec: &BundleSpec) -> f64 {
    spec.c_k() / (2.0 * PI)
}
