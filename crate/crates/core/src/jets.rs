//! Symmetric holomorphic jets `(σ₀, σ₁, σ₂)`, their projectivization to
//! map-jets into `ℂP^m`, and local frames built from dressed reference
//! sections.
//!
//! Flattened jet coordinates are ordered `σ₀`, then `σ₁(e_j)` for each `j`,
//! then `σ₂(e_j, e_l)` for `j ≤ l`, each block holding `m+1` components.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::BundleSpec;
use crate::sections::{self, make_monomial_section_with_order, multi_indices, SectionField, WordSet, WordValues};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Index arithmetic for flattened jet coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetLayout {
    pub n: usize,
    pub m_plus_1: usize,
    pub r: usize,
}

impl JetLayout {
    pub fn new(n: usize, m_plus_1: usize, r: usize) -> Self {
        JetLayout { n, m_plus_1, r }
    }

    pub fn pairs(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn dim(&self) -> usize {
        let blocks = 1 + if self.r >= 1 { self.n } else { 0 } + if self.r >= 2 { self.pairs() } else { 0 };
        blocks * self.m_plus_1
    }

    pub fn s0(&self, c: usize) -> usize {
        c
    }

    pub fn s1(&self, j: usize, c: usize) -> usize {
        self.m_plus_1 * (1 + j) + c
    }

    pub fn pair_index(&self, j: usize, l: usize) -> usize {
        let (a, b) = if j <= l { (j, l) } else { (l, j) };
        // (0,0), (0,1), .., (0,n-1), (1,1), ..
        a * self.n - a * (a + 1) / 2 + b
    }

    pub fn s2(&self, j: usize, l: usize, c: usize) -> usize {
        self.m_plus_1 * (1 + self.n + self.pair_index(j, l)) + c
    }

    /// Holomorphic word and component behind each flattened coordinate.
    pub fn coordinates(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out = Vec::with_capacity(self.dim());
        for c in 0..self.m_plus_1 {
            out.push((vec![], c));
        }
        if self.r >= 1 {
            for j in 0..self.n {
                for c in 0..self.m_plus_1 {
                    out.push((vec![j], c));
                }
            }
        }
        if self.r >= 2 {
            for j in 0..self.n {
                for l in j..self.n {
                    for c in 0..self.m_plus_1 {
                        out.push((vec![j, l], c));
                    }
                }
            }
        }
        out
    }
}

/// Symmetric holomorphic r-jet at a point, in g_k units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloJet {
    pub x: Vec<f64>,
    pub layout: JetLayout,
    /// `sigma[j]` holds the full tensor: `n^j` blocks of `m+1` values,
    /// indexed by `(a₁ … a_j)` in base `n`.
    pub sigma: Vec<Vec<Complex64>>,
    /// Magnitude of the discarded antisymmetric part of `∇^{1,0}∇^{1,0} s`.
    pub antisymmetric_defect: f64,
}

impl HoloJet {
    pub fn r(&self) -> usize {
        self.layout.r
    }

    pub fn get(&self, word: &[usize], c: usize) -> Complex64 {
        let n = self.layout.n;
        let idx = word.iter().fold(0, |acc, &a| acc * n + a);
        self.sigma[word.len()][idx * self.layout.m_plus_1 + c]
    }

    pub fn flatten(&self) -> Vec<Complex64> {
        self.layout.coordinates().iter().map(|(w, c)| self.get(w, *c)).collect()
    }

    pub fn from_flat(layout: JetLayout, x: Vec<f64>, z: &[Complex64]) -> Result<Self> {
        if z.len() != layout.dim() {
            return Err(Error::InvalidInput(format!(
                "flat jet has {} entries, expected {}",
                z.len(),
                layout.dim()
            )));
        }
        let (n, m1) = (layout.n, layout.m_plus_1);
        let mut sigma = vec![z[..m1].to_vec()];
        if layout.r >= 1 {
            let mut s1 = vec![ZERO; n * m1];
            for j in 0..n {
                for c in 0..m1 {
                    s1[j * m1 + c] = z[layout.s1(j, c)];
                }
            }
            sigma.push(s1);
        }
        if layout.r >= 2 {
            let mut s2 = vec![ZERO; n * n * m1];
            for j in 0..n {
                for l in 0..n {
                    for c in 0..m1 {
                        s2[(j * n + l) * m1 + c] = z[layout.s2(j, l, c)];
                    }
                }
            }
            sigma.push(s2);
        }
        Ok(HoloJet {
            x,
            layout,
            sigma,
            antisymmetric_defect: 0.0,
        })
    }

    /// Max deviation of `σ₂` from symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        if self.layout.r < 2 {
            return 0.0;
        }
        let n = self.layout.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for l in 0..n {
                for c in 0..self.layout.m_plus_1 {
                    worst = worst.max((self.get(&[j, l], c) - self.get(&[l, j], c)).norm());
                }
            }
        }
        worst
    }

    pub fn scaled(&self, f: Complex64) -> HoloJet {
        let mut out = self.clone();
        for s in &mut out.sigma {
            s.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    pub fn sigma0_norm(&self) -> f64 {
        self.sigma[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn symmetric_from_words(wv: &WordValues, layout: JetLayout) -> HoloJet {
    let (n, m1, r) = (layout.n, layout.m_plus_1, layout.r);
    let mut sigma = Vec::with_capacity(r + 1);
    let mut defect: f64 = 0.0;
    sigma.push(wv.get(&[]).to_vec());
    if r >= 1 {
        let mut s1 = Vec::with_capacity(n * m1);
        for j in 0..n {
            s1.extend_from_slice(wv.get(&[j]));
        }
        sigma.push(s1);
    }
    if r >= 2 {
        let mut s2 = vec![ZERO; n * n * m1];
        for j in 0..n {
            for l in 0..n {
                let a = wv.get(&[j, l]);
                let b = wv.get(&[l, j]);
                for c in 0..m1 {
                    s2[(j * n + l) * m1 + c] = (a[c] + b[c]) / 2.0;
                    defect = defect.max(((a[c] - b[c]) / 2.0).norm());
                }
            }
        }
        sigma.push(s2);
    }
    HoloJet {
        x: Vec::new(),
        layout,
        sigma,
        antisymmetric_defect: defect,
    }
}

/// `(1,0)`-parts of the iterated covariant derivatives of `s` at `x`,
/// symmetrized.
pub fn holomorphic_jet(s: &SectionField, x: &[f64], r: usize) -> Result<HoloJet> {
    if r > 2 {
        return Err(Error::OrderTooHigh { order: r, max: 2 });
    }
    let layout = JetLayout::new(s.spec.n(), s.spec.m_plus_1, r);
    let wv = s.words(x, &WordSet::holo(s.spec.n(), r));
    let mut j = symmetric_from_words(&wv, layout);
    j.x = x.to_vec();
    Ok(j)
}

/// A jet together with the covariant derivatives of its flattened
/// coordinates along `(1,0)` (`d`) and `(0,1)` (`db`) directions. This is
/// the data needed to differentiate `f ∘ jʳs` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct JetSample {
    pub layout: JetLayout,
    pub zeta: Vec<Complex64>,
    pub d: Vec<Vec<Complex64>>,
    pub db: Vec<Vec<Complex64>>,
}

impl JetSample {
    pub fn zeros(layout: JetLayout) -> Self {
        let dim = layout.dim();
        JetSample {
            layout,
            zeta: vec![ZERO; dim],
            d: vec![vec![ZERO; dim]; layout.n],
            db: vec![vec![ZERO; dim]; layout.n],
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: Complex64, other: &JetSample) {
        for (x, y) in self.zeta.iter_mut().zip(&other.zeta) {
            *x += a * y;
        }
        for j in 0..self.layout.n {
            for (x, y) in self.d[j].iter_mut().zip(&other.d[j]) {
                *x += a * y;
            }
            for (x, y) in self.db[j].iter_mut().zip(&other.db[j]) {
                *x += a * y;
            }
        }
    }

    pub fn sigma0_norm(&self) -> f64 {
        self.zeta[..self.layout.m_plus_1].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub(crate) fn sample_from_words(wv: &WordValues, layout: JetLayout) -> JetSample {
    let n = layout.n;
    let mut out = JetSample::zeros(layout);
    for (k, (w, c)) in layout.coordinates().iter().enumerate() {
        // symmetrize the σ₂ entries; words of holomorphic letters commute in
        // the flat model but the average keeps the convention explicit
        let variants: Vec<Vec<usize>> = if w.len() == 2 && w[0] != w[1] {
            vec![w.clone(), vec![w[1], w[0]]]
        } else {
            vec![w.clone()]
        };
        let f = 1.0 / variants.len() as f64;
        for v in &variants {
            out.zeta[k] += wv.get(v)[*c] * f;
            for j in 0..n {
                let mut pre = vec![j];
                pre.extend_from_slice(v);
                out.d[j][k] += wv.get(&pre)[*c] * f;
                pre[0] = n + j;
                out.db[j][k] += wv.get(&pre)[*c] * f;
            }
        }
    }
    out
}

/// Jet and its first covariant derivatives at `x`.
pub fn jet_sample(s: &SectionField, x: &[f64], r: usize) -> Result<JetSample> {
    if r > 2 {
        return Err(Error::OrderTooHigh { order: r, max: 2 });
    }
    let layout = JetLayout::new(s.spec.n(), s.spec.m_plus_1, r);
    let wv = s.words(x, &WordSet::jet_plus_one(s.spec.n(), r));
    Ok(sample_from_words(&wv, layout))
}

// ---------------------------------------------------------------------------
// Projectivization

/// Jet of the induced map into `ℂP^m`. `phi0` is a unit representative
/// with its largest component real positive; tangent components are
/// represented in the orthogonal complement of `phi0`, with the same phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjJet {
    pub n: usize,
    pub m_plus_1: usize,
    pub phi0: Vec<Complex64>,
    /// `phi1[j]` = `φ₁(e_j)`.
    pub phi1: Vec<Vec<Complex64>>,
    /// `phi2[j][l]` = `φ₂(e_j, e_l)`.
    pub phi2: Vec<Vec<Vec<Complex64>>>,
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

impl ProjJet {
    /// The matrix of `φ₁` (columns `φ₁(e_j)`).
    pub fn phi1_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.m_plus_1, self.n, |c, j| self.phi1[j][c])
    }
}

pub fn projectivize_jet(j: &HoloJet) -> Result<ProjJet> {
    let (n, m1, r) = (j.layout.n, j.layout.m_plus_1, j.layout.r);
    let s0 = &j.sigma[0];
    let nrm = j.sigma0_norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::JetInZeroStratum);
    }
    let e0: Vec<Complex64> = s0.iter().map(|z| z / nrm).collect();
    let imax = (0..m1).max_by(|&a, &b| e0[a].norm().partial_cmp(&e0[b].norm()).unwrap()).unwrap();
    let theta = e0[imax].conj() / e0[imax].norm();
    let perp = |v: &[Complex64]| -> Vec<Complex64> {
        let b = inner(v, &e0);
        v.iter().zip(&e0).map(|(x, e)| x - b * e).collect()
    };
    let sig1 = |a: usize| -> Vec<Complex64> { (0..m1).map(|c| j.get(&[a], c)).collect() };
    let mut phi1 = Vec::new();
    let mut b1 = Vec::new();
    let mut p1 = Vec::new();
    if r >= 1 {
        for a in 0..n {
            let v = sig1(a);
            b1.push(inner(&v, &e0));
            let pv = perp(&v);
            phi1.push(pv.iter().map(|z| theta * z / nrm).collect());
            p1.push(pv);
        }
    }
    let mut phi2 = Vec::new();
    if r >= 2 {
        for a in 0..n {
            let mut row = Vec::new();
            for b in 0..n {
                let v: Vec<Complex64> = (0..m1).map(|c| j.get(&[a, b], c)).collect();
                let pv = perp(&v);
                let t: Vec<Complex64> = (0..m1)
                    .map(|c| theta * (pv[c] - (p1[a][c] * b1[b] + p1[b][c] * b1[a]) / nrm) / nrm)
                    .collect();
                row.push(t);
            }
            phi2.push(row);
        }
    }
    Ok(ProjJet {
        n,
        m_plus_1: m1,
        phi0: e0.iter().map(|z| theta * z).collect(),
        phi1,
        phi2,
    })
}

// ---------------------------------------------------------------------------
// Frames

/// Jets at `x` of the normalized dressed sections `N_I u^I s^ref_c` for all
/// `|I| ≤ r` and components `c`.
#[derive(Clone, Debug)]
pub struct JetFrame {
    pub x: Vec<f64>,
    pub layout: JetLayout,
    /// `(component, I)` per column.
    pub labels: Vec<(usize, Vec<u32>)>,
    pub sections: Vec<SectionField>,
    pub matrix: DMatrix<Complex64>,
    /// `|det|` of the frame matrix.
    pub determinant: f64,
    /// `|det|` with the normalization constants divided out: the frame bound
    /// of the monomial frame `u^I s^ref`.
    pub unit_determinant: f64,
}

/// Floor on [`JetFrame::unit_determinant`].
pub const FRAME_FLOOR: f64 = 0.1;

pub fn jet_frame(x: &[f64], spec: &BundleSpec, r: usize) -> Result<JetFrame> {
    jet_frame_with_order(x, spec, r, r + 1)
}

/// As [`jet_frame`] with the `C^order` normalization of the sections.
pub fn jet_frame_with_order(x: &[f64], spec: &BundleSpec, r: usize, order: usize) -> Result<JetFrame> {
    if r > 2 {
        return Err(Error::OrderTooHigh { order: r, max: 2 });
    }
    let layout = JetLayout::new(spec.n(), spec.m_plus_1, r);
    let mut labels = Vec::new();
    let mut sections_out = Vec::new();
    let mut cols = Vec::new();
    let mut scale = 1.0;
    for mi in multi_indices(spec.n(), r) {
        for c in 0..spec.m_plus_1 {
            let s = make_monomial_section_with_order(x, &mi, c, spec, order)?;
            let j = holomorphic_jet(&s, x, r)?;
            cols.push(j.flatten());
            scale *= sections::normalization_with_order(spec.n(), spec.k(), &mi, order);
            labels.push((c, mi.clone()));
            sections_out.push(s);
        }
    }
    let dim = layout.dim();
    let matrix = DMatrix::from_fn(dim, dim, |i, k| cols[k][i]);
    let determinant = crate::linalg::cdet(&matrix).norm();
    let unit_determinant = determinant / scale;
    if unit_determinant < FRAME_FLOOR {
        return Err(Error::FrameDegenerate {
            det: unit_determinant,
            floor: FRAME_FLOOR,
        });
    }
    Ok(JetFrame {
        x: x.to_vec(),
        layout,
        labels,
        sections: sections_out,
        matrix,
        determinant,
        unit_determinant,
    })
}

impl JetFrame {
    /// Coefficients reproducing a target flattened jet at the base point.
    pub fn solve(&self, target: &[Complex64]) -> Result<Vec<Complex64>> {
        let b = nalgebra::DVector::from_column_slice(target);
        let sol = self.matrix.clone().lu().solve(&b).ok_or(Error::FrameDegenerate {
            det: 0.0,
            floor: FRAME_FLOOR,
        })?;
        Ok(sol.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryContext;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn layout_indices() {
        let l = JetLayout::new(2, 3, 2);
        assert_eq!(l.dim(), 18);
        assert_eq!(l.s2(1, 0, 0), l.s2(0, 1, 0));
        let coords = l.coordinates();
        for (k, (w, comp)) in coords.iter().enumerate() {
            let idx = match w.len() {
                0 => l.s0(*comp),
                1 => l.s1(w[0], *comp),
                _ => l.s2(w[0], w[1], *comp),
            };
            assert_eq!(idx, k);
        }
    }

    #[test]
    fn projectivization_examples() {
        let l = JetLayout::new(1, 2, 1);
        let j = HoloJet::from_flat(l, vec![0.0, 0.0], &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let p = projectivize_jet(&j).unwrap();
        assert_eq!(p.phi0, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((p.phi1[0][1] - c(1.0, 0.0)).norm() < 1e-15);
        let j = HoloJet::from_flat(l, vec![0.0, 0.0], &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let p = projectivize_jet(&j).unwrap();
        assert!(p.phi1[0].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn zero_value_is_rejected() {
        let l = JetLayout::new(1, 2, 0);
        let j = HoloJet::from_flat(l, vec![0.0, 0.0], &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(projectivize_jet(&j), Err(Error::JetInZeroStratum)));
    }

    #[test]
    fn small_frames() {
        let sp = BundleSpec::new(GeometryContext::new(1, 4).unwrap(), 1).unwrap();
        let f = jet_frame(&[0.2, 0.4], &sp, 0).unwrap();
        assert_eq!(f.matrix.shape(), (1, 1));
        assert!((f.unit_determinant - 1.0).abs() < 1e-12);
        let sp = BundleSpec::new(GeometryContext::new(1, 3).unwrap(), 2).unwrap();
        let f = jet_frame(&[0.2, 0.4], &sp, 2).unwrap();
        assert_eq!(f.matrix.shape(), (6, 6));
        assert!((f.unit_determinant - 4.0).abs() < 1e-9);
    }
}
