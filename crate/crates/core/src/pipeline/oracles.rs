//! Counting oracles independent of the transversality engine: the argument
//! principle on a cell decomposition of the fundamental domain, quadtree
//! refinement down to isolated zeros, and Newton on finite differences of
//! plain section values.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::covariant_derivative;
use crate::sections::{evaluate, GaussianAtom, SectionField};
use crate::{Error, Result};

/// Newton iteration cap and step tolerance (g_k units).
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;

/// Cells are refined until their side is below this (g_k units).
const LEAF_SIZE: f64 = 1e-3;
/// Initial samples per cell edge before adaptive bisection.
const EDGE_SAMPLES: usize = 8;
const MAX_BISECTIONS: usize = 40;
const GRID_SHIFTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocatedZero {
    /// Torus coordinates in `[0, 1)²`.
    pub location: Vec<f64>,
    /// Local degree from the winding number of the enclosing leaf cell.
    pub degree: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    /// Signed count over the fundamental domain.
    pub count: i32,
    pub zeros: Vec<LocatedZero>,
    /// Cells of the coarse decomposition.
    pub cells: usize,
    /// Offset of the decomposition (torus units).
    pub offset: [f64; 2],
}

/// A complex function on the plane in torus coordinates, single-valued in
/// the global gauge.
pub trait PlaneFunction {
    fn value(&self, x: f64, y: f64) -> Complex64;
}

impl<F: Fn(f64, f64) -> Complex64> PlaneFunction for F {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        self(x, y)
    }
}

struct Counter<'a> {
    f: &'a dyn PlaneFunction,
    /// `√c_k`, to express sizes in g_k units.
    scale: f64,
    /// Values at or below this count as a zero on an edge.
    floor: f64,
}

fn wrap(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl Counter<'_> {
    fn at(&self, p: [f64; 2]) -> Result<Complex64> {
        let v = self.f.value(p[0], p[1]);
        if !(v.norm() > self.floor) {
            return Err(Error::ZeroOnEdge { point: p.to_vec() });
        }
        Ok(v)
    }

    fn segment(&self, a: [f64; 2], b: [f64; 2], fa: Complex64, fb: Complex64, depth: usize) -> Result<f64> {
        let d = (fb / fa).arg();
        if d.abs() <= FRAC_PI_4 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(Error::ZeroOnEdge {
                point: vec![(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0],
            });
        }
        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let fm = self.at(m)?;
        Ok(self.segment(a, m, fa, fm, depth - 1)? + self.segment(m, b, fm, fb, depth - 1)?)
    }

    /// Winding number of `f` around the boundary of `[lo, hi]`.
    fn winding(&self, lo: [f64; 2], hi: [f64; 2]) -> Result<i32> {
        let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        let mut total = 0.0;
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let pt = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let mut prev = pt(0.0);
            let mut fprev = self.at(prev)?;
            for i in 1..=EDGE_SAMPLES {
                let next = pt(i as f64 / EDGE_SAMPLES as f64);
                let fnext = self.at(next)?;
                total += self.segment(prev, next, fprev, fnext, MAX_BISECTIONS)?;
                prev = next;
                fprev = fnext;
            }
        }
        let w = total / (2.0 * PI);
        if (w - w.round()).abs() > 0.25 {
            return Err(Error::ZeroOnEdge {
                point: vec![(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
            });
        }
        Ok(w.round() as i32)
    }

    /// Split a cell of winding `deg` until every zero sits alone in a leaf.
    fn refine(&self, lo: [f64; 2], hi: [f64; 2], deg: i32, out: &mut Vec<LocatedZero>) -> Result<()> {
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]) * self.scale;
        if side < LEAF_SIZE {
            let seed = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
            let z = newton_fd(self.f, seed, self.scale)?;
            // the polished zero must stay near its leaf
            let slack = 2.0 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
            if (z[0] - seed[0]).abs() > slack || (z[1] - seed[1]).abs() > slack {
                return Err(Error::NewtonFailed { seed: seed.to_vec() });
            }
            out.push(LocatedZero {
                location: vec![wrap(z[0]), wrap(z[1])],
                degree: deg,
            });
            return Ok(());
        }
        let mut last = None;
        for attempt in 0..GRID_SHIFTS {
            let t = 0.5 + 0.0137 * attempt as f64;
            let mx = lo[0] + t * (hi[0] - lo[0]);
            let my = lo[1] + t * (hi[1] - lo[1]);
            let kids = [
                ([lo[0], lo[1]], [mx, my]),
                ([mx, lo[1]], [hi[0], my]),
                ([lo[0], my], [mx, hi[1]]),
                ([mx, my], [hi[0], hi[1]]),
            ];
            let windings: Result<Vec<i32>> = kids.iter().map(|(a, b)| self.winding(*a, *b)).collect();
            match windings {
                Ok(ws) if ws.iter().sum::<i32>() == deg => {
                    for ((a, b), w) in kids.iter().zip(ws) {
                        if w != 0 {
                            self.refine(*a, *b, w, out)?;
                        }
                    }
                    return Ok(());
                }
                Ok(_) => last = Some(Error::ZeroOnEdge { point: vec![mx, my] }),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Newton on `(Re f, Im f)` with central finite differences.
pub fn newton_fd(f: &dyn PlaneFunction, seed: [f64; 2], scale: f64) -> Result<[f64; 2]> {
    let mut x = seed;
    let h = 1e-7 / scale;
    for _ in 0..NEWTON_MAX_ITER {
        let v = f.value(x[0], x[1]);
        let fx = (f.value(x[0] + h, x[1]) - f.value(x[0] - h, x[1])) / (2.0 * h);
        let fy = (f.value(x[0], x[1] + h) - f.value(x[0], x[1] - h)) / (2.0 * h);
        let det = fx.re * fy.im - fx.im * fy.re;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (v.re * fy.im - v.im * fy.re) / det;
        let dy = (fx.re * v.im - fx.im * v.re) / det;
        x = [x[0] - dx, x[1] - dy];
        if v == Complex64::new(0.0, 0.0) || scale * (dx * dx + dy * dy).sqrt() < NEWTON_TOL {
            return Ok(x);
        }
    }
    Err(Error::NewtonFailed { seed: seed.to_vec() })
}

/// Zeros of `f` over the fundamental domain `[o, o+1]²` on cells of side at
/// most `spacing` (g_k units). The decomposition is shifted when a zero
/// lands on a cell edge.
pub fn count_plane_zeros(f: &dyn PlaneFunction, sqrt_ck: f64, spacing: f64, floor: f64) -> Result<ZeroCount> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput(format!("cell spacing {spacing} must be positive")));
    }
    let m = (sqrt_ck / spacing).ceil() as usize;
    let counter = Counter { f, scale: sqrt_ck, floor };
    let mut last = None;
    for attempt in 0..GRID_SHIFTS {
        let off = [0.0371 * attempt as f64 / m as f64, 0.0617 * attempt as f64 / m as f64];
        match count_on_grid(&counter, m, off) {
            Ok(c) => return Ok(c),
            Err(e @ (Error::ZeroOnEdge { .. } | Error::NewtonFailed { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn count_on_grid(counter: &Counter, m: usize, off: [f64; 2]) -> Result<ZeroCount> {
    let cell = 1.0 / m as f64;
    let mut zeros = Vec::new();
    let mut count = 0;
    for j in 0..m {
        for i in 0..m {
            let lo = [off[0] + i as f64 * cell, off[1] + j as f64 * cell];
            let hi = [lo[0] + cell, lo[1] + cell];
            let w = counter.winding(lo, hi)?;
            if w != 0 {
                count += w;
                counter.refine(lo, hi, w, &mut zeros)?;
            }
        }
    }
    Ok(ZeroCount {
        count,
        zeros,
        cells: m * m,
        offset: off,
    })
}

fn require_curve(s: &SectionField) -> Result<()> {
    if s.spec.n() != 1 {
        return Err(Error::InvalidInput(format!("winding oracles need n = 1, got n = {}", s.spec.n())));
    }
    Ok(())
}

/// Rough sup of `|s|` on a coarse grid, to set the edge floor.
fn value_scale(f: &dyn PlaneFunction) -> f64 {
    let m = 16;
    let mut sup: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            sup = sup.max(f.value(i as f64 / m as f64, j as f64 / m as f64).norm());
        }
    }
    sup.max(f64::MIN_POSITIVE)
}

/// Signed zero count of a scalar section on `T²`.
pub fn count_zeros(s: &SectionField, spacing: f64) -> Result<ZeroCount> {
    require_curve(s)?;
    if s.spec.m_plus_1 != 1 {
        return Err(Error::InvalidInput("count_zeros needs a scalar section (m + 1 = 1)".into()));
    }
    let f = |x: f64, y: f64| evaluate(s, &[x, y])[0];
    let floor = 1e-13 * value_scale(&f);
    count_plane_zeros(&f, s.spec.ctx.sqrt_ck(), spacing, floor)
}

/// `W = s₀ ∇s₁ − s₁ ∇s₀` for a pair of sections on `T²`: its zeros are the
/// critical points of `[s₀ : s₁]`.
pub fn wronskian(s: &SectionField, x: f64, y: f64) -> Complex64 {
    let p = [x, y];
    let v = evaluate(s, &p);
    let d = covariant_derivative(s, &p, 1).expect("first order is supported");
    let dv = d.get(&[0]);
    v[0] * dv[1] - v[1] * dv[0]
}

/// Critical points of `[s₀ : s₁]` by the winding of the Wronskian.
pub fn count_critical_points(s: &SectionField, spacing: f64) -> Result<ZeroCount> {
    require_curve(s)?;
    if s.spec.m_plus_1 != 2 {
        return Err(Error::InvalidInput("critical points need a pair of sections (m + 1 = 2)".into()));
    }
    let f = |x: f64, y: f64| wronskian(s, x, y);
    let floor = 1e-13 * value_scale(&f);
    count_plane_zeros(&f, s.spec.ctx.sqrt_ck(), spacing, floor)
}

/// The scalar section `Σ_c a_c s_c`.
pub fn combine(s: &SectionField, coeffs: &[Complex64]) -> Result<SectionField> {
    if coeffs.len() != s.spec.m_plus_1 {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} components",
            coeffs.len(),
            s.spec.m_plus_1
        )));
    }
    let spec = crate::bundle::BundleSpec::new(s.spec.ctx.clone(), 1)?;
    let atoms = s
        .atoms()
        .iter()
        .filter(|a| coeffs[a.component] != Complex64::new(0.0, 0.0))
        .map(|a| GaussianAtom {
            component: 0,
            coeff: a.coeff * coeffs[a.component],
            ..a.clone()
        })
        .collect();
    SectionField::from_atoms(spec, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_zeros() {
        // (z − a)(z − b)·conj-free: two simple zeros inside the unit square
        let a = Complex64::new(0.3, 0.4);
        let b = Complex64::new(0.7, 0.2);
        let f = move |x: f64, y: f64| {
            let z = Complex64::new(x, y);
            (z - a) * (z - b)
        };
        let c = count_plane_zeros(&f, 1.0, 0.1, 1e-15).unwrap();
        assert_eq!(c.count, 2);
        let mut locs: Vec<_> = c.zeros.iter().map(|z| Complex64::new(z.location[0], z.location[1])).collect();
        locs.sort_by(|u, v| u.re.partial_cmp(&v.re).unwrap());
        assert!((locs[0] - a).norm() < 1e-12 && (locs[1] - b).norm() < 1e-12);
        assert!(c.zeros.iter().all(|z| z.degree == 1));
    }

    #[test]
    fn antiholomorphic_zero_counts_negative() {
        let f = |x: f64, y: f64| Complex64::new(x - 0.5, -(y - 0.5));
        let c = count_plane_zeros(&f, 1.0, 0.1, 1e-15).unwrap();
        assert_eq!(c.count, -1);
        assert_eq!(c.zeros[0].degree, -1);
    }

    #[test]
    fn zero_on_grid_line_is_handled_by_shifting() {
        let f = |x: f64, y: f64| Complex64::new(x - 0.5, y - 0.5);
        let c = count_plane_zeros(&f, 1.0, 0.1, 1e-15).unwrap();
        assert_eq!(c.count, 1);
        assert!((c.zeros[0].location[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nowhere_zero_region_counts_nothing() {
        let f = |x: f64, y: f64| Complex64::new(2.0 + x, y);
        let c = count_plane_zeros(&f, 1.0, 0.1, 1e-15).unwrap();
        assert_eq!(c.count, 0);
        assert!(c.zeros.is_empty());
    }
}
