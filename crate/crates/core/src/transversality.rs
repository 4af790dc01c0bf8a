//! Quantified transversality: right-inverse norms, minimum angles between
//! subspaces, the pointwise margin of `h = f ∘ jʳs` and a Lipschitz-certified
//! grid minimum over the torus.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::jets::jet_sample;
use crate::linalg::{self, CMat};
use crate::sections::{torus_grid, SectionField};
use crate::strata::{Stratum, StratumId};
use crate::{Error, Result};

/// Safety factor on measured Lipschitz constants.
pub const LIPSCHITZ_SAFETY: f64 = 1.25;

/// Coarsest grid spacing accepted by [`eta_global`] (g_k units).
pub const MAX_SPACING: f64 = 0.25;

/// Norm of the minimal right inverse of `a`: `1/σ_p` for a surjective
/// `p × n` map, `+∞` otherwise.
pub fn right_inverse_norm(a: &CMat) -> f64 {
    let p = a.nrows();
    if p == 0 {
        return 0.0;
    }
    let s = linalg::sigma_k(a, p);
    let smax = linalg::sigma_k(a, 1);
    if s <= 1e-14 * smax.max(1.0) {
        f64::INFINITY
    } else {
        1.0 / s
    }
}

/// Minimum angle between subspaces `U`, `V` of `ℝ^d` spanned by the columns
/// of `u` and `v`: the smallest principal angle between the orthogonal
/// complements of `U ∩ V` inside `U` and inside `V`. Zero when
/// `dim U + dim V < d`; otherwise `π/2` when either complement is trivial
/// (so `U = V` gives `π/2`), and zero when `U + V ≠ ℝ^d`.
pub fn min_angle(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let d = u.nrows();
    let qu = linalg::orth(u, 1e-12);
    let qv = linalg::orth(v, 1e-12);
    let (a, b) = (qu.ncols(), qv.ncols());
    if a + b < d {
        return 0.0;
    }
    let mut both = DMatrix::zeros(d, a + b);
    both.view_mut((0, 0), (d, a)).copy_from(&qu);
    both.view_mut((0, a), (d, b)).copy_from(&qv);
    // U ∩ V from the null space of [Q_U, −Q_V]
    let mut stacked = both.clone();
    stacked.view_mut((0, a), (d, b)).scale_mut(-1.0);
    let null = linalg::null_space(&stacked, 1e-10);
    let w = linalg::orth(&(&qu * null.rows(0, a)), 1e-10);
    let complement = |q: &DMatrix<f64>| {
        let proj = q - &w * (w.transpose() * q);
        linalg::orth(&proj, 1e-8)
    };
    let cu = complement(&qu);
    let cv = complement(&qv);
    if cu.ncols() == 0 || cv.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    if linalg::orth(&both, 1e-10).ncols() < d {
        return 0.0;
    }
    let m = cu.transpose() * cv;
    let smax = m.singular_values().iter().cloned().fold(0.0, f64::max);
    smax.min(1.0).acos()
}

/// Pointwise margin `max(|h|, σ_p(∇^{1,0} h))` with its ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMargin {
    pub margin: f64,
    pub value_norm: f64,
    pub sigma_min: f64,
    /// `|∇^{0,1} h|`, the holomorphicity defect of `h`.
    pub dbar_norm: f64,
}

/// Pointwise margin of `s` against a stratum with defining functions.
pub fn point_margin(s: &SectionField, st: &Stratum, x: &[f64]) -> Result<PointMargin> {
    if !st.has_equations() {
        return Err(Error::UnsupportedStratum {
            stratum: st.id.name(),
            n: st.n(),
            m: st.m(),
            r: st.r(),
        });
    }
    let sample = jet_sample(s, x, st.read_order())?;
    let pb = st.pullback(&sample)?;
    let value_norm = pb.h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let sigma_min = linalg::sigma_k(&pb.dh, st.p());
    Ok(PointMargin {
        margin: value_norm.max(sigma_min),
        value_norm,
        sigma_min,
        dbar_norm: pb.dbar_h.norm(),
    })
}

/// `max(|h(x)|, σ_p(∇^{1,0}h(x)))` for `h = f ∘ jʳs`.
pub fn eta_at_point(s: &SectionField, st: &Stratum, x: &[f64], r: usize) -> Result<f64> {
    if r < st.read_order() || r > 2 || st.n() != s.spec.n() || st.m() + 1 != s.spec.m_plus_1 {
        return Err(Error::UnsupportedStratum {
            stratum: st.id.name(),
            n: s.spec.n(),
            m: s.spec.m_plus_1 - 1,
            r,
        });
    }
    Ok(point_margin(s, st, x)?.margin)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub stratum: String,
    pub eta_grid: f64,
    pub eta_cert: f64,
    /// Grid spacing in g_k units.
    pub h: f64,
    /// Local Lipschitz constant at the certifying vertex, safety factor
    /// included.
    pub lipschitz: f64,
    /// Largest local constant over the grid.
    pub lipschitz_global: f64,
    /// `eta_grid − lipschitz_global · h`.
    pub eta_cert_global: f64,
    /// Grid point attaining `eta_grid`.
    pub witness: Vec<f64>,
    /// Grid point attaining `eta_cert`.
    pub cert_witness: Vec<f64>,
    /// `|σ₀|` below which points were excluded.
    pub exclusion: f64,
    pub requested_spacing: f64,
    pub points: usize,
    pub excluded: usize,
}

/// Grid points, points per axis, spacing and per-point margins.
pub type MarginGrid = (Vec<Vec<f64>>, usize, f64, Vec<Option<f64>>);

/// Margins over the regular torus grid; `None` marks excluded points.
pub fn margin_grid(s: &SectionField, st: &Stratum, spacing: f64, exclusion: f64) -> Result<MarginGrid> {
    if !(spacing > 0.0) || spacing > MAX_SPACING {
        return Err(Error::SpacingTooCoarse { spacing, max: MAX_SPACING });
    }
    let (pts, m, h) = torus_grid(&s.spec, spacing);
    let mut out = Vec::with_capacity(pts.len());
    for p in &pts {
        let sample = jet_sample(s, p, st.read_order())?;
        if st.id != StratumId::Z && sample.sigma0_norm() <= exclusion {
            out.push(None);
            continue;
        }
        let pb = st.pullback(&sample)?;
        let vn = pb.h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(Some(vn.max(linalg::sigma_k(&pb.dh, st.p()))));
    }
    Ok((pts, m, h, out))
}

/// Grid minimum of the margin with a Lipschitz certificate. Points with
/// `|σ₀| ≤ exclusion` are skipped for strata other than `Z`.
///
/// Each grid vertex `v` carries the largest slope of the margin along its
/// incident grid edges; the certificate is `min_v (m(v) − 1.25 · slope(v) · h)`,
/// so steep regions far above the minimum do not mask it.
pub fn eta_global(s: &SectionField, st: &Stratum, spacing: f64, exclusion: f64) -> Result<TransversalityReport> {
    let (pts, m, h, margins) = margin_grid(s, st, spacing, exclusion)?;
    let dim = s.spec.ctx.dim();
    let mut slopes = vec![0.0f64; margins.len()];
    for (i, v) in margins.iter().enumerate() {
        let Some(v) = *v else { continue };
        let mut stride = 1;
        for _ in 0..dim {
            let digit = (i / stride) % m;
            let j = if digit + 1 == m { i + stride - m * stride } else { i + stride };
            if let Some(w) = margins[j] {
                let sl = (v - w).abs() / h;
                slopes[i] = slopes[i].max(sl);
                slopes[j] = slopes[j].max(sl);
            }
            stride *= m;
        }
    }
    let mut best: Option<(f64, usize)> = None;
    let mut cert: Option<(f64, usize)> = None;
    let mut excluded = 0;
    for (i, v) in margins.iter().enumerate() {
        let Some(v) = *v else {
            excluded += 1;
            continue;
        };
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
        let c = v - LIPSCHITZ_SAFETY * slopes[i] * h;
        if cert.is_none_or(|(b, _)| c < b) {
            cert = Some((c, i));
        }
    }
    let (eta_grid, wi) = best.ok_or(Error::EmptyGrid)?;
    let (eta_cert, ci) = cert.ok_or(Error::EmptyGrid)?;
    let global = LIPSCHITZ_SAFETY * slopes.iter().copied().fold(0.0, f64::max);
    Ok(TransversalityReport {
        stratum: st.id.name(),
        eta_grid,
        eta_cert,
        h,
        lipschitz: LIPSCHITZ_SAFETY * slopes[ci],
        lipschitz_global: global,
        eta_cert_global: eta_grid - global * h,
        witness: pts[wi].clone(),
        cert_witness: pts[ci].clone(),
        exclusion,
        requested_spacing: spacing,
        points: pts.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn right_inverse_examples() {
        assert_eq!(right_inverse_norm(&CMat::identity(2, 2)), 1.0);
        let a = CMat::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(0.5)]);
        assert!((right_inverse_norm(&a) - 2.0).abs() < 1e-12);
        let a = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(1.0), c(0.0)]);
        assert!(right_inverse_norm(&a).is_infinite());
    }

    fn plane_xz() -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn min_angle_examples() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let diag = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!((min_angle(&e1, &e2) - FRAC_PI_2).abs() < 1e-12);
        assert!((min_angle(&e1, &diag) - FRAC_PI_4).abs() < 1e-12);
        assert!((min_angle(&e1, &e1) - FRAC_PI_2).abs() < 1e-12);
        // complements e₂, e₃ of the common e₁ do not fill ℝ⁴
        let u = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let v = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(min_angle(&u, &v), 0.0);
        let xy = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((min_angle(&xy, &plane_xz()) - FRAC_PI_2).abs() < 1e-12);
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((min_angle(&plane, &plane) - FRAC_PI_2).abs() < 1e-12);
    }
}
