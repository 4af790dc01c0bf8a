//! Sections as finite sums of Gaussian atoms, periodized over the lattice in
//! the global gauge of [`crate::bundle`].
//!
//! An atom centered at `c` (rescaled) with monomial `u^I` contributes, for
//! every lattice translate, a magnetic translate `G(u) E_{c'}(w)` where
//! `u = w − c'`, `G = a u^I χ(|u|)` and `E_c(w) = exp(−¼|w−c|² + ¼(c̄w − c w̄))`
//! is the holomorphic frame with `|E| = e^{−|u|²/4}`. Covariant derivatives
//! act on `G` as `D_j = ∂_{u_j} − ū_j/2` and `D̄_j = ∂_{ū_j}`; they are
//! computed by truncated Taylor arithmetic so that the cutoff chain rule is
//! exact.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::{character, BundleSpec};
use crate::taylor::{compose_real, layout, poly_series, sqrt_series, Tps};
use crate::{Error, Result};

/// Longest covariant word the engine evaluates.
pub const MAX_ORDER: usize = 3;

/// Tail radius (g_k units) beyond which un-cutoff Gaussian terms are dropped.
pub const TAIL_RADIUS: f64 = 13.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Standard cutoff radii `(c_k^{1/6}, 2 c_k^{1/6})`.
pub fn standard_cutoff(c_k: f64) -> (f64, f64) {
    let r1 = c_k.powf(1.0 / 6.0);
    (r1, 2.0 * r1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianAtom {
    /// Torus point in original coordinates.
    pub center: Vec<f64>,
    pub component: usize,
    pub multi_index: Vec<u32>,
    pub coeff: Complex64,
    /// Cutoff radii `(R₁, R₂)` in g_k units; `None` for a bare Gaussian.
    pub cutoff: Option<(f64, f64)>,
}

impl GaussianAtom {
    fn validate(&self, spec: &BundleSpec) -> Result<()> {
        if self.center.len() != spec.ctx.dim() || self.multi_index.len() != spec.n() {
            return Err(Error::InvalidInput("atom dimension mismatch".into()));
        }
        if self.component >= spec.m_plus_1 {
            return Err(Error::InvalidInput(format!("component {} out of range", self.component)));
        }
        let deg: u32 = self.multi_index.iter().sum();
        if deg > 2 {
            return Err(Error::InvalidInput(format!("monomial degree {deg} exceeds 2")));
        }
        if let Some((r1, r2)) = self.cutoff {
            if !(r1 > 0.0 && r1 < r2) {
                return Err(Error::InvalidInput(format!("cutoff radii ({r1}, {r2}) invalid")));
            }
        }
        if !self.coeff.re.is_finite() || !self.coeff.im.is_finite() {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(())
    }
}

/// A finite sum of atoms; evaluation is by lattice periodization.
#[derive(Clone, Serialize, Deserialize)]
pub struct SectionField {
    pub spec: BundleSpec,
    atoms: Vec<GaussianAtom>,
    pub truncation: f64,
    #[serde(skip)]
    cache: OnceLock<Arc<Evaluator>>,
}

impl PartialEq for SectionField {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.atoms == other.atoms && self.truncation == other.truncation
    }
}

impl std::fmt::Debug for SectionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SectionField")
            .field("spec", &self.spec)
            .field("atoms", &self.atoms.len())
            .finish()
    }
}

impl SectionField {
    pub fn zero(spec: BundleSpec) -> Self {
        SectionField {
            spec,
            atoms: Vec::new(),
            truncation: TAIL_RADIUS,
            cache: OnceLock::new(),
        }
    }

    pub fn from_atoms(spec: BundleSpec, atoms: Vec<GaussianAtom>) -> Result<Self> {
        for a in &atoms {
            a.validate(&spec)?;
        }
        Ok(SectionField {
            spec,
            atoms,
            truncation: TAIL_RADIUS,
            cache: OnceLock::new(),
        })
    }

    pub fn atoms(&self) -> &[GaussianAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn push(&mut self, atom: GaussianAtom) -> Result<()> {
        atom.validate(&self.spec)?;
        self.atoms.push(atom);
        self.cache = OnceLock::new();
        Ok(())
    }

    /// Appends all atoms of `other` (same bundle).
    pub fn extend(&mut self, other: &SectionField) -> Result<()> {
        if other.spec != self.spec {
            return Err(Error::InvalidInput("bundle mismatch".into()));
        }
        self.atoms.extend(other.atoms.iter().cloned());
        self.cache = OnceLock::new();
        Ok(())
    }

    pub fn scaled(&self, f: Complex64) -> SectionField {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.coeff *= f;
        }
        out.cache = OnceLock::new();
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SectionField = serde_json::from_str(text)?;
        for a in &s.atoms {
            a.validate(&s.spec)?;
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        SectionField::from_json(&std::fs::read_to_string(path)?)
    }

    fn evaluator(&self) -> &Evaluator {
        self.cache.get_or_init(|| Arc::new(Evaluator::build(self)))
    }

    /// Covariant words at `x` for the requested set.
    pub fn words(&self, x: &[f64], set: &WordSet) -> WordValues {
        self.evaluator().words(x, set)
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<Complex64> {
        evaluate(self, x)
    }
}

/// Section value at `x` in the global gauge.
pub fn evaluate(s: &SectionField, x: &[f64]) -> Vec<Complex64> {
    let set = WordSet::full(s.spec.n(), 0);
    s.words(x, &set).get(&[]).to_vec()
}

// ---------------------------------------------------------------------------
// Words

fn offsets(letters: usize, max_len: usize) -> Vec<usize> {
    let mut off = vec![0; max_len + 2];
    for j in 0..=max_len {
        off[j + 1] = off[j] + letters.pow(j as u32);
    }
    off
}

/// A set of covariant words `(a₁, …, a_j)`, meaning `∇_{a₁} ⋯ ∇_{a_j}`, over
/// the letters `0..n` (holomorphic) and `n..2n` (antiholomorphic).
#[derive(Clone, Debug)]
pub struct WordSet {
    n: usize,
    max_len: usize,
    needed: Vec<bool>,
}

impl WordSet {
    fn empty(n: usize, max_len: usize) -> Self {
        let off = offsets(2 * n, max_len);
        let mut needed = vec![false; off[max_len + 1]];
        needed[0] = true;
        WordSet { n, max_len, needed }
    }

    /// Every word up to the given length.
    pub fn full(n: usize, max_len: usize) -> Self {
        let mut s = WordSet::empty(n, max_len);
        s.needed.iter_mut().for_each(|b| *b = true);
        s
    }

    /// Holomorphic words up to length `r`.
    pub fn holo(n: usize, r: usize) -> Self {
        let mut s = WordSet::empty(n, r);
        for len in 0..=r {
            for w in holo_words(n, len) {
                let i = s.index(&w);
                s.needed[i] = true;
            }
        }
        s
    }

    /// Holomorphic words up to length `r`, each also prefixed by one letter
    /// of either type: what a jet and its first covariant derivative need.
    pub fn jet_plus_one(n: usize, r: usize) -> Self {
        let mut s = WordSet::empty(n, r + 1);
        for len in 0..=r {
            for w in holo_words(n, len) {
                let i = s.index(&w);
                s.needed[i] = true;
                for a in 0..2 * n {
                    let mut p = vec![a];
                    p.extend_from_slice(&w);
                    let i = s.index(&p);
                    s.needed[i] = true;
                }
            }
        }
        s
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    fn index(&self, w: &[usize]) -> usize {
        let l = 2 * self.n;
        let off = offsets(l, self.max_len);
        off[w.len()] + w.iter().fold(0, |acc, &a| acc * l + a)
    }

    /// Marks every suffix of a needed word as needed.
    fn closed(&self) -> Vec<bool> {
        let l = 2 * self.n;
        let off = offsets(l, self.max_len);
        let mut need = self.needed.clone();
        for len in (1..=self.max_len).rev() {
            let block = l.pow(len as u32 - 1);
            for li in 0..l.pow(len as u32) {
                if need[off[len] + li] {
                    need[off[len - 1] + li % block] = true;
                }
            }
        }
        need
    }
}

pub(crate) fn holo_words(n: usize, len: usize) -> Vec<Vec<usize>> {
    let total = n.pow(len as u32);
    (0..total)
        .map(|mut i| {
            let mut w = vec![0; len];
            for p in (0..len).rev() {
                w[p] = i % n;
                i /= n;
            }
            w
        })
        .collect()
}

/// Values of covariant words at a point, each in `ℂ^{m+1}`.
#[derive(Clone, Debug)]
pub struct WordValues {
    pub n: usize,
    pub m_plus_1: usize,
    max_len: usize,
    off: Vec<usize>,
    vals: Vec<Complex64>,
}

impl WordValues {
    fn zeros(n: usize, m1: usize, max_len: usize) -> Self {
        let off = offsets(2 * n, max_len);
        WordValues {
            n,
            m_plus_1: m1,
            max_len,
            vals: vec![ZERO; off[max_len + 1] * m1],
            off,
        }
    }

    fn index(&self, w: &[usize]) -> usize {
        let l = 2 * self.n;
        self.off[w.len()] + w.iter().fold(0, |acc, &a| acc * l + a)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn get(&self, w: &[usize]) -> &[Complex64] {
        let i = self.index(w);
        &self.vals[i * self.m_plus_1..(i + 1) * self.m_plus_1]
    }

    /// Euclidean norm of all words of a given length.
    pub fn level_norm(&self, len: usize) -> f64 {
        let a = self.off[len] * self.m_plus_1;
        let b = self.off[len + 1] * self.m_plus_1;
        self.vals[a..b].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Norm of the words of length `len + 1` whose innermost letter is
    /// antiholomorphic: `|∇^len ∂̄ s|`.
    pub fn dbar_norm(&self, len: usize) -> f64 {
        let l = 2 * self.n;
        let total = l.pow(len as u32 + 1);
        let mut acc = 0.0;
        for li in 0..total {
            if li % l >= self.n {
                let i = self.off[len + 1] + li;
                for c in 0..self.m_plus_1 {
                    acc += self.vals[i * self.m_plus_1 + c].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

// ---------------------------------------------------------------------------
// Evaluation engine

struct Group {
    center: Vec<f64>,
    cutoff: Option<(f64, f64)>,
    /// Per component: monomial terms `(I, a)`.
    polys: Vec<Vec<(Vec<u32>, Complex64)>>,
}

pub(crate) struct Evaluator {
    spec: BundleSpec,
    truncation: f64,
    groups: Vec<Group>,
}

fn cutoff_key(c: Option<(f64, f64)>) -> (u64, u64) {
    c.map_or((0, 0), |(a, b)| (a.to_bits(), b.to_bits()))
}

impl Evaluator {
    fn build(s: &SectionField) -> Evaluator {
        let mut index: HashMap<(Vec<u64>, (u64, u64)), usize> = HashMap::new();
        let mut groups: Vec<Group> = Vec::new();
        for a in &s.atoms {
            if a.coeff == ZERO {
                continue;
            }
            let key = (a.center.iter().map(|v| v.to_bits()).collect(), cutoff_key(a.cutoff));
            let gi = *index.entry(key).or_insert_with(|| {
                groups.push(Group {
                    center: a.center.clone(),
                    cutoff: a.cutoff,
                    polys: vec![Vec::new(); s.spec.m_plus_1],
                });
                groups.len() - 1
            });
            let poly = &mut groups[gi].polys[a.component];
            match poly.iter_mut().find(|(i, _)| *i == a.multi_index) {
                Some((_, c)) => *c += a.coeff,
                None => poly.push((a.multi_index.clone(), a.coeff)),
            }
        }
        Evaluator {
            spec: s.spec.clone(),
            truncation: s.truncation,
            groups,
        }
    }

    fn words(&self, x: &[f64], set: &WordSet) -> WordValues {
        let n = self.spec.n();
        let m1 = self.spec.m_plus_1;
        let mut out = WordValues::zeros(n, m1, set.max_len);
        let plan = WordPlan::new(set);
        for g in &self.groups {
            self.add_group(g, x, &plan, &mut out);
        }
        out
    }

    fn add_group(&self, g: &Group, x: &[f64], plan: &WordPlan, out: &mut WordValues) {
        let n = self.spec.n();
        let dim = 2 * n;
        let sc = self.spec.ctx.sqrt_ck();
        let rcut = g.cutoff.map_or(self.truncation, |(_, r2)| r2);
        let rho = rcut / sc;
        let d: Vec<f64> = (0..dim).map(|i| x[i] - g.center[i]).collect();
        let lo: Vec<i64> = d.iter().map(|v| (-v - rho).ceil() as i64).collect();
        let hi: Vec<i64> = d.iter().map(|v| (-v + rho).floor() as i64).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return;
        }
        let cvec: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(sc * g.center[2 * j], sc * g.center[2 * j + 1]))
            .collect();
        let w: Vec<Complex64> = (0..n).map(|j| Complex64::new(sc * x[2 * j], sc * x[2 * j + 1])).collect();
        let mut lam = lo.clone();
        loop {
            let v: Vec<f64> = (0..dim).map(|i| d[i] + lam[i] as f64).collect();
            let r2: f64 = v.iter().map(|a| a * a).sum::<f64>() * sc * sc;
            if r2 < rcut * rcut {
                let u: Vec<Complex64> = (0..n).map(|j| Complex64::new(sc * v[2 * j], sc * v[2 * j + 1])).collect();
                let lp: Vec<Complex64> = (0..n)
                    .map(|j| Complex64::new(sc * lam[2 * j] as f64, sc * lam[2 * j + 1] as f64))
                    .collect();
                let mut arg = Complex64::new(-r2 / 4.0, 0.0);
                for j in 0..n {
                    arg += (cvec[j].conj() * lp[j] - cvec[j] * lp[j].conj()) / 4.0;
                    let cp = cvec[j] - lp[j];
                    arg += (cp.conj() * w[j] - cp * w[j].conj()) / 4.0;
                }
                let mult = character(self.spec.k(), &lam) * Complex64::from_polar(arg.re.exp(), arg.im);
                plan.accumulate(&u, g.cutoff, &g.polys, mult, out);
            }
            // odometer over the lattice box
            let mut i = 0;
            loop {
                if i == dim {
                    return;
                }
                lam[i] += 1;
                if lam[i] <= hi[i] {
                    break;
                }
                lam[i] = lo[i];
                i += 1;
            }
        }
    }
}

/// Evaluation order for a word set: words grouped by length, each computed
/// from its suffix by one operator application.
struct WordPlan {
    n: usize,
    max_len: usize,
    /// (word index, first letter, suffix index), in increasing length.
    steps: Vec<(usize, usize, usize)>,
    needed: Vec<bool>,
}

impl WordPlan {
    fn new(set: &WordSet) -> Self {
        let l = 2 * set.n;
        let off = offsets(l, set.max_len);
        let need = set.closed();
        let mut steps = Vec::new();
        for len in 1..=set.max_len {
            let block = l.pow(len as u32 - 1);
            for li in 0..l.pow(len as u32) {
                let idx = off[len] + li;
                if need[idx] {
                    steps.push((idx, li / block, off[len - 1] + li % block));
                }
            }
        }
        WordPlan {
            n: set.n,
            max_len: set.max_len,
            steps,
            needed: need,
        }
    }

    /// Adds `mult · (word of G)` for every needed word, where
    /// `G = χ(|u|) Σ a_I u^I` per component.
    fn accumulate(
        &self,
        u: &[Complex64],
        cutoff: Option<(f64, f64)>,
        polys: &[Vec<(Vec<u32>, Complex64)>],
        mult: Complex64,
        out: &mut WordValues,
    ) {
        let n = self.n;
        let lay = layout(2 * n, self.max_len.max(1));
        let ubar: Vec<Complex64> = u.iter().map(|z| z.conj()).collect();
        let chi = match cutoff {
            None => None,
            Some((r1, r2)) => {
                let q0: f64 = u.iter().map(|z| z.norm_sqr()).sum();
                let t0 = q0.sqrt();
                if t0 >= r2 {
                    return;
                }
                if t0 <= r1 {
                    None
                } else {
                    let ord = lay.order;
                    let x0 = (t0 - r1) / (r2 - r1);
                    let s = poly_series(&[0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0], x0, ord);
                    let mut ct = vec![0.0; ord + 1];
                    for (k, sk) in s.iter().enumerate() {
                        ct[k] = -sk / (r2 - r1).powi(k as i32);
                    }
                    ct[0] += 1.0;
                    let psi = compose_real(&ct, &sqrt_series(q0, ord));
                    let mut q = Tps::constant(lay, ZERO);
                    for j in 0..n {
                        q = q.add(&Tps::variable(lay, j, u[j]).mul_var(n + j, ubar[j]));
                    }
                    let g: Vec<Complex64> = psi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                    Some(q.compose(&g))
                }
            }
        };
        let total = self.needed.len();
        for (comp, poly) in polys.iter().enumerate() {
            if poly.is_empty() {
                continue;
            }
            let mut p = Tps::constant(lay, ZERO);
            for (mi, a) in poly {
                let mut t = Tps::constant(lay, *a);
                for j in 0..n {
                    for _ in 0..mi[j] {
                        t = t.mul_var(j, u[j]);
                    }
                }
                p = p.add(&t);
            }
            let g = match &chi {
                Some(c) => c.mul(&p),
                None => p,
            };
            let mut table: Vec<Option<Tps>> = vec![None; total];
            out.vals[comp] += mult * g.value();
            table[0] = Some(g);
            for &(idx, letter, suffix) in &self.steps {
                let src = table[suffix].as_ref().expect("suffix computed");
                let t = if letter < n {
                    src.deriv(letter)
                        .sub(&src.mul_var(n + letter, ubar[letter]).scale(Complex64::new(0.5, 0.0)))
                } else {
                    src.deriv(letter)
                };
                out.vals[idx * out.m_plus_1 + comp] += mult * t.value();
                table[idx] = Some(t);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reference sections and normalization

/// Reference section at `x`: one undressed atom with value 1 at its center.
pub fn make_reference_section(x: &[f64], component: usize, spec: &BundleSpec) -> Result<SectionField> {
    let atom = GaussianAtom {
        center: x.to_vec(),
        component,
        multi_index: vec![0; spec.n()],
        coeff: Complex64::new(1.0, 0.0),
        cutoff: Some(standard_cutoff(spec.c_k())),
    };
    SectionField::from_atoms(spec.clone(), vec![atom])
}

/// Dressed reference section `N_I u^I s^ref`, normalized to unit `C³` norm.
pub fn make_monomial_section(x: &[f64], multi_index: &[u32], component: usize, spec: &BundleSpec) -> Result<SectionField> {
    make_monomial_section_with_order(x, multi_index, component, spec, MAX_ORDER)
}

/// Dressed reference section normalized to unit `C^order` norm.
pub fn make_monomial_section_with_order(
    x: &[f64],
    multi_index: &[u32],
    component: usize,
    spec: &BundleSpec,
    order: usize,
) -> Result<SectionField> {
    if order > MAX_ORDER {
        return Err(Error::OrderTooHigh { order, max: MAX_ORDER });
    }
    if multi_index.len() != spec.n() {
        return Err(Error::InvalidInput("multi-index length must equal n".into()));
    }
    if multi_index.iter().sum::<u32>() > 2 {
        return Err(Error::OrderTooHigh {
            order: multi_index.iter().sum::<u32>() as usize,
            max: 2,
        });
    }
    let atom = GaussianAtom {
        center: x.to_vec(),
        component,
        multi_index: multi_index.to_vec(),
        coeff: Complex64::new(normalization_with_order(spec.n(), spec.k(), multi_index, order), 0.0),
        cutoff: Some(standard_cutoff(spec.c_k())),
    };
    SectionField::from_atoms(spec.clone(), vec![atom])
}

/// Radial `C^j` profile of an isolated atom `u^I χ E` (coefficient 1):
/// rows `(t, [|∇⁰|, |∇¹|, |∇²|, |∇³|])` maximized over points at radius
/// within each bin of the grid.
struct Profile {
    step: f64,
    rows: Vec<[f64; MAX_ORDER + 1]>,
}

fn atom_profile(n: usize, c_k: f64, multi_index: &[u32]) -> Profile {
    let cutoff = standard_cutoff(c_k);
    let r2 = cutoff.1;
    let plan = WordPlan::new(&WordSet::full(n, MAX_ORDER));
    let polys = vec![vec![(multi_index.to_vec(), Complex64::new(1.0, 0.0))]];
    let step = if n == 1 { 0.005 } else { 0.04 };
    let bins = (r2 / step).ceil() as usize + 2;
    let mut rows = vec![[0.0f64; MAX_ORDER + 1]; bins];
    let mut record = |u: &[Complex64]| {
        let t: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut out = WordValues::zeros(n, 1, MAX_ORDER);
        let mult = Complex64::new((-t * t / 4.0).exp(), 0.0);
        plan.accumulate(u, Some(cutoff), &polys, mult, &mut out);
        let b = ((t / step).floor() as usize).min(bins - 1);
        for j in 0..=MAX_ORDER {
            rows[b][j] = rows[b][j].max(out.level_norm(j));
        }
    };
    let m = (r2 / step).ceil() as usize + 1;
    if n == 1 {
        for i in 0..m {
            record(&[Complex64::new(i as f64 * step, 0.0)]);
        }
    } else {
        for i in 0..m {
            for j in 0..m {
                let (a, b) = (i as f64 * step, j as f64 * step);
                if a * a + b * b <= (r2 + step) * (r2 + step) {
                    record(&[Complex64::new(a, 0.0), Complex64::new(b, 0.0)]);
                }
            }
        }
    }
    Profile { step, rows }
}

type ProfileKey = (usize, u64, Vec<u32>);

fn profile_cached(n: usize, c_k: f64, multi_index: &[u32]) -> Arc<Profile> {
    static CACHE: OnceLock<Mutex<HashMap<ProfileKey, Arc<Profile>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, c_k.to_bits(), multi_index.to_vec());
    if let Some(p) = cache.lock().unwrap().get(&key) {
        return p.clone();
    }
    let p = Arc::new(atom_profile(n, c_k, multi_index));
    cache.lock().unwrap().insert(key, p.clone());
    p
}

/// `N_I = 1 / sup_j≤3 sup |∇ʲ(u^I χ E)|`, measured on a radial grid around
/// the isolated atom. Cached per `(n, k, I)`.
pub fn normalization(n: usize, k: u32, multi_index: &[u32]) -> f64 {
    normalization_with_order(n, k, multi_index, MAX_ORDER)
}

/// As [`normalization`] with the `C^order` norm.
pub fn normalization_with_order(n: usize, k: u32, multi_index: &[u32], order: usize) -> f64 {
    let c_k = 2.0 * std::f64::consts::PI * k as f64;
    let p = profile_cached(n, c_k, multi_index);
    let sup = p
        .rows
        .iter()
        .flat_map(|r| r[..=order.min(MAX_ORDER)].iter().copied())
        .fold(0.0, f64::max);
    1.0 / sup
}

/// Multi-indices with `|I| ≤ r` in graded order.
pub fn multi_indices(n: usize, r: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=r as u32 {
        if n == 1 {
            out.push(vec![deg]);
        } else {
            for a in (0..=deg).rev() {
                out.push(vec![a, deg - a]);
            }
        }
    }
    out
}

/// Decreasing radial envelope of the `C^{order}` norm of every dressed
/// section with `|I| ≤ r` normalized to unit `C^{order}` norm.
#[derive(Clone, Debug)]
pub struct RadialEnvelope {
    pub step: f64,
    pub values: Vec<f64>,
}

impl RadialEnvelope {
    pub fn at(&self, d: f64) -> f64 {
        let b = (d / self.step).floor();
        if b < 0.0 {
            return self.values[0];
        }
        self.values.get(b as usize).copied().unwrap_or(0.0)
    }
}

pub fn radial_envelope(n: usize, k: u32, r: usize, order: usize) -> RadialEnvelope {
    let c_k = 2.0 * std::f64::consts::PI * k as f64;
    let mut step = 0.0;
    let mut values: Vec<f64> = Vec::new();
    for mi in multi_indices(n, r) {
        let p = profile_cached(n, c_k, &mi);
        let nrm = normalization_with_order(n, k, &mi, order);
        step = p.step;
        if values.len() < p.rows.len() {
            values.resize(p.rows.len(), 0.0);
        }
        for (b, row) in p.rows.iter().enumerate() {
            let v = row[..=order.min(MAX_ORDER)].iter().copied().fold(0.0, f64::max) * nrm;
            values[b] = values[b].max(v);
        }
    }
    // bins hold maxima over [b·step, (b+1)·step); make the envelope an upper
    // bound for every distance in the bin and non-increasing.
    let len = values.len();
    let mut env = vec![0.0; len];
    let mut run: f64 = 0.0;
    for b in (0..len).rev() {
        run = run.max(values[b]);
        if b + 1 < len {
            run = run.max(values[b + 1]);
        }
        env[b] = run;
    }
    RadialEnvelope { step, values: env }
}

// ---------------------------------------------------------------------------
// Norms

/// Grid suprema of `|∇ʲ s|` (j ≤ r+1) and `|∇ʲ ∂̄ s|` (j ≤ r).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AHNormReport {
    pub sup_nabla: Vec<f64>,
    pub sup_dbar: Vec<f64>,
    /// Grid spacing in g_k units.
    pub spacing: f64,
}

/// Points of the regular grid on the fundamental domain with at most the
/// given spacing (g_k units). Returns the points and the actual spacing.
pub fn torus_grid(spec: &BundleSpec, spacing: f64) -> (Vec<Vec<f64>>, usize, f64) {
    let sc = spec.ctx.sqrt_ck();
    let m = (sc / spacing).ceil() as usize;
    let dim = spec.ctx.dim();
    let total = m.pow(dim as u32);
    let mut pts = Vec::with_capacity(total);
    for mut i in 0..total {
        let mut p = vec![0.0; dim];
        for c in 0..dim {
            p[c] = (i % m) as f64 / m as f64;
            i /= m;
        }
        pts.push(p);
    }
    (pts, m, sc / m as f64)
}

pub fn ah_norms(s: &SectionField, r: usize, spacing: f64) -> Result<AHNormReport> {
    if !(spacing > 0.0) || spacing > 0.25 {
        return Err(Error::SpacingTooCoarse { spacing, max: 0.25 });
    }
    if r > 2 {
        return Err(Error::OrderTooHigh { order: r, max: 2 });
    }
    let n = s.spec.n();
    let set = WordSet::full(n, r + 1);
    let (pts, _, h) = torus_grid(&s.spec, spacing);
    let mut sup_nabla = vec![0.0f64; r + 2];
    let mut sup_dbar = vec![0.0f64; r + 1];
    for p in &pts {
        let wv = s.words(p, &set);
        for j in 0..=r + 1 {
            sup_nabla[j] = sup_nabla[j].max(wv.level_norm(j));
        }
        for j in 0..=r {
            sup_dbar[j] = sup_dbar[j].max(wv.dbar_norm(j));
        }
    }
    Ok(AHNormReport {
        sup_nabla,
        sup_dbar,
        spacing: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryContext;

    fn spec(n: usize, k: u32, m1: usize) -> BundleSpec {
        BundleSpec::new(GeometryContext::new(n, k).unwrap(), m1).unwrap()
    }

    #[test]
    fn word_sets() {
        let s = WordSet::jet_plus_one(1, 2);
        assert_eq!(s.max_len, 3);
        let count = s.needed.iter().filter(|&&b| b).count();
        // [], D, DD, D̄, D̄D, DDD, D̄DD
        assert_eq!(count, 7);
    }

    #[test]
    fn reference_atom_values() {
        let sp = spec(1, 4, 1);
        let s = make_reference_section(&[0.3, 0.6], 0, &sp).unwrap();
        let v = evaluate(&s, &[0.3, 0.6]);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // g_k distance 1 along x
        let dx = 1.0 / sp.ctx.sqrt_ck();
        let v = evaluate(&s, &[0.3 + dx, 0.6]);
        assert!((v[0].norm() - (-0.25f64).exp()).abs() < 1e-6);
        // first derivative vanishes at the center
        let wv = s.words(&[0.3, 0.6], &WordSet::full(1, 1));
        assert!(wv.level_norm(1) < 1e-14);
    }

    #[test]
    fn monomial_jets_at_center() {
        let sp = spec(1, 4, 1);
        let s = make_monomial_section(&[0.5, 0.5], &[2], 0, &sp).unwrap();
        let wv = s.words(&[0.5, 0.5], &WordSet::holo(1, 2));
        let nrm = normalization(1, 4, &[2]);
        assert!(wv.get(&[])[0].norm() < 1e-14);
        assert!(wv.get(&[0])[0].norm() < 1e-14);
        assert!((wv.get(&[0, 0])[0] - Complex64::new(2.0 * nrm, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sp = spec(2, 2, 2);
        let atoms = vec![GaussianAtom {
            center: vec![0.1, 0.2, 1.0 / 3.0, 0.7],
            component: 1,
            multi_index: vec![1, 0],
            coeff: Complex64::new(0.1 + 0.2, -1e-300),
            cutoff: Some(standard_cutoff(sp.c_k())),
        }];
        let s = SectionField::from_atoms(sp, atoms).unwrap();
        let back = SectionField::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn envelope_is_non_increasing() {
        let e = radial_envelope(1, 4, 2, 3);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        assert!(e.at(0.0) >= 0.99);
        assert_eq!(e.at(100.0), 0.0);
    }
}
