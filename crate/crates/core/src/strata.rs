//! Jet-space strata: the zero stratum `Z`, first-order Boardman strata `Σᵢ`
//! and the second-order `Σ₁,₁`, with local defining functions on flattened
//! jet coordinates, Θ-membership and the precedence order.
//!
//! Defining functions are written once over [`JetScalar`] and evaluated
//! either on plain values, on Wirtinger duals seeded by jet coordinates (for
//! Jacobians), or on duals seeded by a [`JetSample`] (for derivatives along
//! the base).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::BundleSpec;
use crate::jets::{projectivize_jet, HoloJet, JetLayout, JetSample};
use crate::linalg::{self, CMat};
use crate::wirtinger::{JetScalar, Wd};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Jet coordinates count at most `3 · (1 + 2 + 3)`.
const MAX_JET_DIM: usize = 18;

/// Defining values at most this large count as on-stratum.
pub const ON_STRATUM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StratumId {
    Z,
    Sigma(usize),
    Sigma11,
}

impl StratumId {
    pub fn name(&self) -> String {
        match self {
            StratumId::Z => "Z".into(),
            StratumId::Sigma(i) => format!("S{i}"),
            StratumId::Sigma11 => "S11".into(),
        }
    }

    pub fn parse(s: &str) -> Option<StratumId> {
        match s {
            "Z" => Some(StratumId::Z),
            "S11" => Some(StratumId::Sigma11),
            _ => s.strip_prefix('S')?.parse().ok().map(StratumId::Sigma),
        }
    }
}

impl std::fmt::Display for StratumId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum Kind {
    Zero,
    /// `m = 1`, `i = n`: the components of `φ₁`.
    SigmaFull,
    /// `n = m = 2`, `i = 1`: `det φ₁`.
    SigmaDet,
    /// Membership only.
    SigmaRank,
    /// `n = m = 1`: `(φ₁, φ₂)`.
    Sigma11Curve,
    /// `n = m = 2`: `(det φ₁, φ₂(u, u)` off the image of `φ₁)`.
    Sigma11Surface,
}

/// One stratum of a quasi-stratification of the jet bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: StratumId,
    /// Complex codimension.
    pub codim: usize,
    pub layout: JetLayout,
    kind: Kind,
}

/// Values of a defining function together with its derivatives along the
/// base: `h` and the `p × n` matrix `∇^{1,0} h`, plus `∇^{0,1} h`.
#[derive(Clone, Debug, PartialEq)]
pub struct PullbackJet {
    pub h: Vec<Complex64>,
    pub dh: CMat,
    pub dbar_h: CMat,
}

impl Stratum {
    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn m(&self) -> usize {
        self.layout.m_plus_1 - 1
    }

    pub fn r(&self) -> usize {
        self.layout.r
    }

    /// Number of defining functions; zero for rank-test-only strata.
    pub fn p(&self) -> usize {
        match self.kind {
            Kind::SigmaRank => 0,
            _ => self.codim,
        }
    }

    pub fn has_equations(&self) -> bool {
        self.kind != Kind::SigmaRank
    }

    /// Whether the stratum applies to jets with the given shape.
    pub fn applies_to(&self, layout: &JetLayout) -> bool {
        layout.n == self.layout.n && layout.m_plus_1 == self.layout.m_plus_1 && layout.r >= self.layout.r
    }

    /// Highest jet order the defining functions read.
    pub fn read_order(&self) -> usize {
        match self.kind {
            Kind::Zero => 0,
            Kind::SigmaFull | Kind::SigmaDet | Kind::SigmaRank => 1,
            Kind::Sigma11Curve | Kind::Sigma11Surface => 2,
        }
    }

    /// Gauge weight of the defining functions: under `s ↦ e^{iθ} s` they pick
    /// up `e^{i q θ}`. `None` when the phase is not homogeneous.
    pub fn gauge_charge(&self) -> Option<i32> {
        match self.kind {
            Kind::Zero => Some(1),
            Kind::SigmaFull | Kind::Sigma11Curve => Some(2),
            Kind::SigmaDet => Some(3),
            Kind::SigmaRank | Kind::Sigma11Surface => None,
        }
    }

    fn unsupported(&self) -> Error {
        Error::UnsupportedStratum {
            stratum: self.id.name(),
            n: self.n(),
            m: self.m(),
            r: self.r(),
        }
    }

    fn check_jet(&self, layout: &JetLayout) -> Result<()> {
        if !self.applies_to(layout) {
            return Err(Error::UnsupportedStratum {
                stratum: self.id.name(),
                n: layout.n,
                m: layout.m_plus_1.saturating_sub(1),
                r: layout.r,
            });
        }
        Ok(())
    }

    /// Defining functions on flattened jet coordinates laid out per
    /// `self.layout` (only the entries the stratum reads must be present).
    fn eval<T: JetScalar>(&self, z: &[T]) -> Vec<T> {
        let l = &self.layout;
        let m1 = l.m_plus_1;
        let s0 = |c: usize| z[l.s0(c)];
        let s1 = |j: usize, c: usize| z[l.s1(j, c)];
        match self.kind {
            Kind::Zero => (0..m1).map(s0).collect(),
            Kind::SigmaRank => Vec::new(),
            Kind::SigmaFull | Kind::Sigma11Curve => {
                let nrm2 = s0(0).norm_sqr() + s0(1).norm_sqr();
                let inv = nrm2.recip_real();
                let w = |j: usize| s0(0) * s1(j, 1) - s0(1) * s1(j, 0);
                if self.kind == Kind::SigmaFull {
                    return (0..l.n).map(|j| w(j) * inv).collect();
                }
                let s2 = |c: usize| z[l.s2(0, 0, c)];
                let w1 = w(0);
                let w2 = s0(0) * s2(1) - s0(1) * s2(0);
                let ip = s1(0, 0) * s0(0).conj() + s1(0, 1) * s0(1).conj();
                let two = T::cst(Complex64::new(2.0, 0.0));
                vec![w1 * inv, w2 * inv - two * w1 * ip * inv * inv]
            }
            Kind::SigmaDet | Kind::Sigma11Surface => {
                let v0 = [s0(0), s0(1), s0(2)];
                let v1 = [s1(0, 0), s1(0, 1), s1(0, 2)];
                let v2 = [s1(1, 0), s1(1, 1), s1(1, 2)];
                let nrm2 = norm_sqr3(&v0);
                let f1 = det3(&v0, &v1, &v2) * (nrm2 * nrm2.sqrt_real()).recip_real();
                if self.kind == Kind::SigmaDet {
                    return vec![f1];
                }
                let x0 = cross(&v0, &v1);
                let x1 = cross(&v0, &v2);
                // branch: the component where the kernel equation is best
                // conditioned
                let i = (0..3)
                    .max_by(|&a, &b| {
                        let wa = x0[a].val().norm_sqr() + x1[a].val().norm_sqr();
                        let wb = x0[b].val().norm_sqr() + x1[b].val().norm_sqr();
                        wa.partial_cmp(&wb).unwrap()
                    })
                    .unwrap();
                let u = [x1[i], -x0[i]];
                let un = u[0].norm_sqr() + u[1].norm_sqr();
                let inv = un.sqrt_real().recip_real();
                let u = [u[0] * inv, u[1] * inv];
                let up = [-u[1].conj(), u[0].conj()];
                let y: [T; 3] = std::array::from_fn(|c| v1[c] * up[0] + v2[c] * up[1]);
                let q: [T; 3] = std::array::from_fn(|c| {
                    let s2 = |j: usize, k: usize| z[l.s2(j, k, c)];
                    s2(0, 0) * u[0] * u[0] + T::cst(Complex64::new(2.0, 0.0)) * s2(0, 1) * u[0] * u[1] + s2(1, 1) * u[1] * u[1]
                });
                let yy = norm_sqr3(&y);
                let ys = y[0] * v0[0].conj() + y[1] * v0[1].conj() + y[2] * v0[2].conj();
                let py2 = yy - ys.norm_sqr() * nrm2.recip_real();
                let f2 = det3(&v0, &y, &q) * (nrm2 * py2.sqrt_real()).recip_real();
                vec![f1, f2]
            }
        }
    }

    /// Defining values at a jet.
    pub fn values(&self, jet: &HoloJet) -> Result<Vec<Complex64>> {
        self.check_jet(&jet.layout)?;
        if !self.has_equations() {
            return Err(self.unsupported());
        }
        let z = self.embed(jet);
        self.guard_domain(&z)?;
        Ok(self.eval(&z))
    }

    /// Jet coordinates re-laid out for this stratum's order.
    fn embed(&self, jet: &HoloJet) -> Vec<Complex64> {
        let full = jet.flatten();
        let src = jet.layout;
        self.layout
            .coordinates()
            .iter()
            .map(|(w, c)| match w.len() {
                0 => full[src.s0(*c)],
                1 => full[src.s1(w[0], *c)],
                _ => full[src.s2(w[0], w[1], *c)],
            })
            .collect()
    }

    fn guard_domain(&self, z: &[Complex64]) -> Result<()> {
        if self.kind == Kind::Zero {
            return Ok(());
        }
        let n0: f64 = z[..self.layout.m_plus_1].iter().map(|v| v.norm_sqr()).sum();
        if n0 == 0.0 {
            return Err(Error::JetInZeroStratum);
        }
        Ok(())
    }

    /// Defining values with holomorphic and antiholomorphic Jacobians with
    /// respect to this stratum's flattened jet coordinates.
    pub fn defining(&self, jet: &HoloJet) -> Result<(Vec<Complex64>, CMat, CMat)> {
        self.check_jet(&jet.layout)?;
        if !self.has_equations() {
            return Err(self.unsupported());
        }
        let z = self.embed(jet);
        self.guard_domain(&z)?;
        Ok(self.jacobian_flat(&z))
    }

    fn jacobian_flat(&self, z: &[Complex64]) -> (Vec<Complex64>, CMat, CMat) {
        let dim = z.len();
        let seeded: Vec<Wd<MAX_JET_DIM>> = (0..dim)
            .map(|k| {
                let mut d = [ZERO; MAX_JET_DIM];
                d[k] = ONE;
                Wd::seeded(z[k], d, [ZERO; MAX_JET_DIM])
            })
            .collect();
        let out = self.eval(&seeded);
        let p = out.len();
        let vals = out.iter().map(|w| w.v).collect();
        let jac = DMatrix::from_fn(p, dim, |i, k| out[i].d[k]);
        let jbar = DMatrix::from_fn(p, dim, |i, k| out[i].db[k]);
        (vals, jac, jbar)
    }

    /// `|df₁ ∧ … ∧ df_p|` of the holomorphic Jacobian at a jet.
    pub fn wedge(&self, jet: &HoloJet) -> Result<f64> {
        let (_, j, _) = self.defining(jet)?;
        Ok(wedge_norm(&j))
    }

    /// `h = f ∘ jʳs` and its covariant derivatives along the base, from a
    /// sample of the jet and its first derivatives.
    pub fn pullback(&self, sample: &JetSample) -> Result<PullbackJet> {
        let src = sample.layout;
        if src.n != self.n() || src.m_plus_1 != self.layout.m_plus_1 || src.r < self.read_order() {
            return Err(Error::UnsupportedStratum {
                stratum: self.id.name(),
                n: src.n,
                m: src.m_plus_1.saturating_sub(1),
                r: src.r,
            });
        }
        if !self.has_equations() {
            return Err(self.unsupported());
        }
        let n = src.n;
        let coords = self.layout.coordinates();
        // coordinates above the sampled order are never read
        let idx: Vec<Option<usize>> = coords
            .iter()
            .map(|(w, c)| match w.len() {
                0 => Some(src.s0(*c)),
                l if l > src.r => None,
                1 => Some(src.s1(w[0], *c)),
                _ => Some(src.s2(w[0], w[1], *c)),
            })
            .collect();
        let zv: Vec<Complex64> = idx.iter().map(|k| k.map_or(ZERO, |k| sample.zeta[k])).collect();
        self.guard_domain(&zv)?;
        let seeded: Vec<Wd<2>> = idx
            .iter()
            .map(|k| {
                let Some(k) = *k else {
                    return Wd::cst(ZERO);
                };
                let mut d = [ZERO; 2];
                let mut db = [ZERO; 2];
                for j in 0..n {
                    d[j] = sample.d[j][k];
                    db[j] = sample.db[j][k];
                }
                Wd::seeded(sample.zeta[k], d, db)
            })
            .collect();
        let out = self.eval(&seeded);
        let p = out.len();
        Ok(PullbackJet {
            h: out.iter().map(|w| w.v).collect(),
            dh: DMatrix::from_fn(p, n, |i, j| out[i].d[j]),
            dbar_h: DMatrix::from_fn(p, n, |i, j| out[i].db[j]),
        })
    }

    /// Distance proxy from singular values of the projectivized jet, computed
    /// independently of the defining functions.
    pub fn rank_distance(&self, jet: &HoloJet) -> Result<f64> {
        self.check_jet(&jet.layout)?;
        if self.kind == Kind::Zero {
            return Ok(jet.sigma0_norm());
        }
        let pj = projectivize_jet(jet)?;
        let (n, m1) = (pj.n, pj.m_plus_1);
        // φ₁ in an orthonormal basis of the complement of φ₀
        let basis = complement_basis(&pj.phi0);
        let phi1 = DMatrix::from_fn(m1 - 1, n, |a, j| inner(&pj.phi1[j], &basis[a]));
        let sv = linalg::singular_values(&phi1);
        let i = match self.id {
            StratumId::Sigma(i) => i,
            _ => 1,
        };
        // rank ≤ n − i iff the (n − i + 1)-th singular value vanishes
        let d1 = sv.get(n - i).copied().unwrap_or(0.0);
        if self.id != StratumId::Sigma11 {
            return Ok(d1);
        }
        let d2 = if n == 1 {
            pj.phi2[0][0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        } else {
            let svd = phi1.clone().svd(true, true);
            let v_t = svd.v_t.unwrap();
            let u_mat = svd.u.unwrap();
            let smin = (0..2)
                .min_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap())
                .unwrap();
            let smax = 1 - smin;
            let u = [v_t[(smin, 0)].conj(), v_t[(smin, 1)].conj()];
            let img = [u_mat[(0, smax)], u_mat[(1, smax)]];
            let q: Vec<Complex64> = (0..2)
                .map(|a| {
                    let mut acc = ZERO;
                    for j in 0..2 {
                        for l in 0..2 {
                            acc += inner(&pj.phi2[j][l], &basis[a]) * u[j] * u[l];
                        }
                    }
                    acc
                })
                .collect();
            (q[0] * img[1] - q[1] * img[0]).norm()
        };
        Ok(d1.max(d2))
    }

    /// Singular-value membership test.
    pub fn contains(&self, jet: &HoloJet, tol: f64) -> Result<bool> {
        Ok(self.rank_distance(jet)? <= tol)
    }

    /// Θ-membership of an on-stratum jet: some lift of `j` to an
    /// `(r+1)`-jet makes `f ∘ j` submersive at the point.
    pub fn theta_membership(&self, jet: &HoloJet) -> Result<bool> {
        let (vals, jac, _) = self.defining(jet)?;
        let v = vals.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if v > ON_STRATUM_TOL {
            return Err(Error::NotOnStratum {
                stratum: self.id.name(),
                value: v,
            });
        }
        let p = self.p();
        let l = self.layout;
        let (n, m1) = (l.n, l.m_plus_1);
        let z = self.embed(jet);
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e7a);
        for attempt in 0..5 {
            // free top slot: σ_{r+1}, symmetric, zero on the first attempt
            let mut free = |_: &[usize]| -> Vec<Complex64> {
                if attempt == 0 {
                    vec![ZERO; m1]
                } else {
                    (0..m1)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect()
                }
            };
            let mut top = std::collections::HashMap::new();
            let mut slot = |w: Vec<usize>| -> Vec<Complex64> {
                let mut key = w.clone();
                key.sort();
                top.entry(key.clone()).or_insert_with(|| free(&key)).clone()
            };
            let mut mcol = CMat::zeros(p, n);
            for a in 0..n {
                let shift: Vec<Complex64> = l
                    .coordinates()
                    .iter()
                    .map(|(w, c)| {
                        let mut up = vec![a];
                        up.extend_from_slice(w);
                        if up.len() > l.r {
                            slot(up)[*c]
                        } else {
                            match up.len() {
                                1 => z[l.s1(up[0], *c)],
                                _ => z[l.s2(up[0], up[1], *c)],
                            }
                        }
                    })
                    .collect();
                let col = &jac * nalgebra::DVector::from_column_slice(&shift);
                mcol.set_column(a, &col);
            }
            let smax = linalg::sigma_k(&mcol, 1).max(1.0);
            if linalg::sigma_k(&mcol, p) > 1e-8 * smax {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Orthonormal basis of the complement of a unit vector in `ℂ^d`.
fn complement_basis(e: &[Complex64]) -> Vec<Vec<Complex64>> {
    let d = e.len();
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    let mut cands: Vec<usize> = (0..d).collect();
    cands.sort_by(|&a, &b| e[a].norm().partial_cmp(&e[b].norm()).unwrap());
    for &i in &cands {
        if out.len() == d - 1 {
            break;
        }
        let mut v = vec![ZERO; d];
        v[i] = ONE;
        let mut prev = vec![e.to_vec()];
        prev.extend(out.iter().cloned());
        for b in &prev {
            let c = inner(&v, b);
            for k in 0..d {
                v[k] -= c * b[k];
            }
        }
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-6 {
            out.push(v.iter().map(|z| z / nrm).collect());
        }
    }
    out
}

fn norm_sqr3<T: JetScalar>(v: &[T; 3]) -> T {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

fn det3<T: JetScalar>(a: &[T; 3], b: &[T; 3], c: &[T; 3]) -> T {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn cross<T: JetScalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `sqrt(det(J J*))`: the norm of the wedge of the rows.
pub(crate) fn wedge_norm(j: &CMat) -> f64 {
    linalg::singular_values(j).iter().take(j.nrows()).product()
}

// ---------------------------------------------------------------------------
// Constructors

pub fn stratum_z(spec: &BundleSpec, r: usize) -> Result<Stratum> {
    if r > 2 {
        return Err(Error::OrderTooHigh { order: r, max: 2 });
    }
    Ok(Stratum {
        id: StratumId::Z,
        codim: spec.m_plus_1,
        layout: JetLayout::new(spec.n(), spec.m_plus_1, r),
        kind: Kind::Zero,
    })
}

pub fn stratum_sigma_i(i: usize, spec: &BundleSpec, r: usize) -> Result<Stratum> {
    let (n, m) = (spec.n(), spec.m_plus_1 - 1);
    let unsupported = || Error::UnsupportedStratum {
        stratum: format!("S{i}"),
        n,
        m,
        r,
    };
    if r == 0 || r > 2 || i <= n.saturating_sub(m) || i > n {
        return Err(unsupported());
    }
    let kind = if m == 1 && i == n {
        Kind::SigmaFull
    } else if n == 2 && m == 2 && i == 1 {
        Kind::SigmaDet
    } else {
        Kind::SigmaRank
    };
    Ok(Stratum {
        id: StratumId::Sigma(i),
        codim: i * (m + i - n),
        layout: JetLayout::new(n, spec.m_plus_1, r),
        kind,
    })
}

pub fn stratum_sigma_11(spec: &BundleSpec, r: usize) -> Result<Stratum> {
    let (n, m) = (spec.n(), spec.m_plus_1 - 1);
    let kind = match (n, m, r) {
        (1, 1, 2) => Kind::Sigma11Curve,
        (2, 2, 2) => Kind::Sigma11Surface,
        _ => {
            return Err(Error::UnsupportedStratum {
                stratum: "S11".into(),
                n,
                m,
                r,
            })
        }
    };
    Ok(Stratum {
        id: StratumId::Sigma11,
        codim: 2,
        layout: JetLayout::new(n, spec.m_plus_1, 2),
        kind,
    })
}

/// Ordered strata with a precedence relation (`(a, b)`: `a ≺ b`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiStratification {
    pub strata: Vec<Stratum>,
    pub precedence: Vec<(usize, usize)>,
}

impl QuasiStratification {
    pub fn ids(&self) -> Vec<StratumId> {
        self.strata.iter().map(|s| s.id).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        self.total_order().is_some()
    }

    /// A topological order of the precedence relation, if one exists.
    pub fn total_order(&self) -> Option<Vec<usize>> {
        let k = self.strata.len();
        let mut indeg = vec![0; k];
        for &(_, b) in &self.precedence {
            indeg[b] += 1;
        }
        let mut out = Vec::with_capacity(k);
        let mut done = vec![false; k];
        while out.len() < k {
            let next = (0..k).find(|&i| !done[i] && indeg[i] == 0)?;
            done[next] = true;
            out.push(next);
            for &(a, b) in &self.precedence {
                if a == next {
                    indeg[b] -= 1;
                }
            }
        }
        Some(out)
    }

    /// Whether the list order extends the precedence relation.
    pub fn is_ordered(&self) -> bool {
        self.precedence.iter().all(|&(a, b)| a < b)
    }
}

/// The Boardman quasi-stratification of `J^r(ℂⁿ, ℂP^m)` for the supported
/// desk-scale triples.
pub fn boardman_quasistratification(n: usize, m: usize, r: usize, spec: &BundleSpec) -> Result<QuasiStratification> {
    if spec.n() != n || spec.m_plus_1 != m + 1 {
        return Err(Error::InvalidInput(format!(
            "bundle has (n, m) = ({}, {}), requested ({n}, {m})",
            spec.n(),
            spec.m_plus_1 - 1
        )));
    }
    let unsupported = || Error::UnsupportedStratum {
        stratum: "boardman".into(),
        n,
        m,
        r,
    };
    let z = stratum_z(spec, r)?;
    let strata = if r == 0 || m == 0 {
        vec![z]
    } else {
        match (n, m, r) {
            (1, 1, 1) | (2, 2, 1) => vec![z, stratum_sigma_i(1, spec, r)?],
            (2, 1, _) => vec![z, stratum_sigma_i(2, spec, r)?],
            (1, 1, 2) | (2, 2, 2) => vec![z, stratum_sigma_11(spec, r)?, stratum_sigma_i(1, spec, r)?],
            _ => return Err(unsupported()),
        }
    };
    let mut precedence: Vec<(usize, usize)> = (1..strata.len()).map(|b| (0, b)).collect();
    if strata.len() == 3 {
        precedence.push((1, 2));
    }
    Ok(QuasiStratification { strata, precedence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryContext;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(n: usize, m1: usize) -> BundleSpec {
        BundleSpec::new(GeometryContext::new(n, 3).unwrap(), m1).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for id in [StratumId::Z, StratumId::Sigma(1), StratumId::Sigma(2), StratumId::Sigma11] {
            assert_eq!(StratumId::parse(&id.name()), Some(id));
        }
    }

    #[test]
    fn zero_stratum_values() {
        let sp = spec(1, 2);
        let z = stratum_z(&sp, 0).unwrap();
        let j = HoloJet::from_flat(JetLayout::new(1, 2, 0), vec![], &[c(0.3, 0.0), c(0.4, 0.0)]).unwrap();
        let v = z.values(&j).unwrap();
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((nrm - 0.5).abs() < 1e-15);
        assert_eq!(z.wedge(&j).unwrap(), 1.0);
    }

    #[test]
    fn sigma1_on_curves() {
        let sp = spec(1, 2);
        let s = stratum_sigma_i(1, &sp, 1).unwrap();
        let l = JetLayout::new(1, 2, 1);
        let crit = HoloJet::from_flat(l, vec![], &[c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(s.values(&crit).unwrap()[0].norm() < 1e-15);
        assert!(s.contains(&crit, 1e-12).unwrap());
        let reg = HoloJet::from_flat(l, vec![], &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((s.values(&reg).unwrap()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn admissible_range() {
        // n = m = 2
        let sp = spec(2, 3);
        assert!(stratum_sigma_i(0, &sp, 1).is_err());
        assert!(stratum_sigma_i(3, &sp, 1).is_err());
        assert!(stratum_sigma_i(1, &sp, 0).is_err());
        assert!(stratum_sigma_i(1, &sp, 1).unwrap().has_equations());
        let s2 = stratum_sigma_i(2, &sp, 1).unwrap();
        assert!(!s2.has_equations());
        assert_eq!(s2.codim, 4);
        // n = 2, m = 1: i = 1 is outside max(0, n − m) < i
        let sp = spec(2, 2);
        assert!(stratum_sigma_i(1, &sp, 1).is_err());
        assert_eq!(stratum_sigma_i(2, &sp, 1).unwrap().codim, 2);
    }

    #[test]
    fn boardman_lists() {
        let ids = |n, m, r| {
            let sp = spec(n, m + 1);
            boardman_quasistratification(n, m, r, &sp).unwrap().ids()
        };
        use StratumId::*;
        assert_eq!(ids(1, 1, 2), vec![Z, Sigma11, Sigma(1)]);
        assert_eq!(ids(2, 1, 2), vec![Z, Sigma(2)]);
        assert_eq!(ids(2, 2, 2), vec![Z, Sigma11, Sigma(1)]);
        assert_eq!(ids(1, 1, 0), vec![Z]);
        assert_eq!(ids(1, 0, 0), vec![Z]);
        let qs = boardman_quasistratification(1, 1, 2, &spec(1, 2)).unwrap();
        assert!(qs.is_acyclic() && qs.is_ordered());
    }

    #[test]
    fn theta_examples() {
        // Z, n = 2, m+1 = 1, σ₁ ≠ 0
        let sp = spec(2, 1);
        let z = stratum_z(&sp, 1).unwrap();
        let l = JetLayout::new(2, 1, 1);
        let j = HoloJet::from_flat(l, vec![], &[c(0.0, 0.0), c(0.3, 0.0), c(0.0, 0.1)]).unwrap();
        assert!(z.theta_membership(&j).unwrap());
        let j0 = HoloJet::from_flat(l, vec![], &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(!z.theta_membership(&j0).unwrap());
        let off = HoloJet::from_flat(l, vec![], &[c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(z.theta_membership(&off), Err(Error::NotOnStratum { .. })));
    }

    #[test]
    fn sigma1_theta_at_flat_critical_jet() {
        // φ₁ = φ₂ = 0: the lift slot does not enter the defining functions
        let sp = spec(1, 2);
        let s = stratum_sigma_i(1, &sp, 2).unwrap();
        let mut v = vec![c(0.0, 0.0); 6];
        v[0] = c(1.0, 0.0);
        let j = HoloJet::from_flat(JetLayout::new(1, 2, 2), vec![], &v).unwrap();
        assert!(!s.theta_membership(&j).unwrap());
    }
}
