//! Local perturbation bases, the quantitative-Sard search, the
//! net-and-batch globalization sweep and the stratum-by-stratum induction.
//!
//! At a center `x` the dressed reference sections `N_I u^I s^ref_c` move the
//! defining functions of a stratum through `T = (∂f/∂ζ) · F`, with `F` the
//! jet frame at `x`. The basis combinations `σ_i` use the columns of `T⁺`
//! normalized in `ℓ¹` and divided by `p`, so a perturbation
//! `τ = −Σ wᵢ σᵢ` has `C^{r+1}` norm at most `|w|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::BundleSpec;
use crate::geometry::rescaled_distance;
use crate::jets::{holomorphic_jet, jet_frame_with_order, jet_sample, JetSample};
use crate::linalg::{self, CMat};
use crate::sections::{radial_envelope, torus_grid, GaussianAtom, SectionField};
use crate::strata::{QuasiStratification, Stratum, StratumId};
use crate::transversality::{eta_global, TransversalityReport};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this `|det(T Λ)|` the local basis is rejected.
pub const WEDGE_FLOOR: f64 = 1e-8;

/// Budgets below this collapse the induction schedule.
pub const MIN_BUDGET: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SardParams {
    /// Perturbation budget in `C^{r+1}` norm units, `0 < delta < 1/2`.
    pub delta: f64,
    pub nu: u32,
    /// Nested w-grid levels: level `j` uses `2^j + 1` points per real axis.
    pub levels: usize,
    /// Sample points per real axis on a ball.
    pub ball_resolution: usize,
}

impl SardParams {
    pub fn new(delta: f64, nu: u32) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidInput(format!("delta {delta} not in (0, 1/2)")));
        }
        if nu == 0 {
            return Err(Error::InvalidInput("nu must be positive".into()));
        }
        Ok(SardParams {
            delta,
            nu,
            levels: 3,
            ball_resolution: 7,
        })
    }

    /// `δ · ln(1/δ)^{−ν}`.
    pub fn eta_target(&self) -> f64 {
        self.delta * (1.0 / self.delta).ln().powi(-(self.nu as i32))
    }

    fn with_delta(&self, delta: f64) -> SardParams {
        SardParams { delta, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SardResult {
    pub w: Vec<Complex64>,
    pub margin: f64,
    pub evaluations: usize,
}

/// Grid search over the `radius`-ball in `ℂ^p` for the `w` maximizing
/// `margin_of(w)`, with local refinement after each nested level. Every level
/// repeats the work of the coarser ones, so more levels never lower the
/// result.
pub fn sard_search_with<F: FnMut(&[Complex64]) -> f64>(p: usize, radius: f64, levels: usize, mut margin_of: F) -> SardResult {
    let zero = vec![ZERO; p];
    let mut best = SardResult {
        margin: margin_of(&zero),
        w: zero,
        evaluations: 1,
    };
    if radius <= 0.0 || p == 0 {
        return best;
    }
    let dim = 2 * p;
    let mut consider = |w: Vec<Complex64>, best: &mut SardResult| {
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > radius * (1.0 + 1e-12) {
            return;
        }
        let m = margin_of(&w);
        best.evaluations += 1;
        if m > best.margin {
            best.margin = m;
            best.w = w;
        }
    };
    let to_w = |coords: &[f64]| -> Vec<Complex64> { (0..p).map(|i| Complex64::new(coords[2 * i], coords[2 * i + 1])).collect() };
    for level in 1..=levels.max(1) {
        let per = (1usize << level) + 1;
        let step = 2.0 * radius / (per - 1) as f64;
        let total = per.pow(dim as u32);
        for mut idx in 0..total {
            let mut coords = vec![0.0; dim];
            for c in coords.iter_mut() {
                *c = -radius + (idx % per) as f64 * step;
                idx /= per;
            }
            consider(to_w(&coords), &mut best);
        }
        // local refinement around the incumbent
        let mut h = step / 2.0;
        for _ in 0..3 {
            let center: Vec<f64> = best.w.iter().flat_map(|z| [z.re, z.im]).collect();
            for mut idx in 0..3usize.pow(dim as u32) {
                let mut coords = center.clone();
                let mut moved = false;
                for c in coords.iter_mut() {
                    let o = idx % 3;
                    idx /= 3;
                    if o != 1 {
                        moved = true;
                        *c += (o as f64 - 1.0) * h;
                    }
                }
                if moved {
                    consider(to_w(&coords), &mut best);
                }
            }
            h /= 2.0;
        }
    }
    best
}

/// Values of `h` and `σ_p(∇h)` at sample points of a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledBall {
    pub values: Vec<Vec<Complex64>>,
    pub sigma: Vec<f64>,
    /// Factor the samples were divided by to reach `sup |h| ≤ 1`.
    pub rescale: f64,
}

impl SampledBall {
    pub fn new(values: Vec<Vec<Complex64>>, sigma: Vec<f64>) -> Self {
        let sup = values
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let rescale = sup.max(1.0);
        SampledBall {
            values: values.into_iter().map(|v| v.into_iter().map(|z| z / rescale).collect()).collect(),
            sigma: sigma.into_iter().map(|s| s / rescale).collect(),
            rescale,
        }
    }

    pub fn p(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// `min_y max(|h(y) − w|, σ_p(∇h(y)))`.
    pub fn margin(&self, w: &[Complex64]) -> f64 {
        self.values
            .iter()
            .zip(&self.sigma)
            .map(|(v, s)| {
                let d = v.iter().zip(w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                d.max(*s)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Best constant shift `w`, `|w| ≤ delta`, for a sampled function.
pub fn local_sard_search(ball: &SampledBall, params: &SardParams) -> SardResult {
    sard_search_with(ball.p(), params.delta, params.levels, |w| ball.margin(w))
}

// ---------------------------------------------------------------------------
// Local bases

#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub x: Vec<f64>,
    /// `σ_{k,x,i}` as sections.
    pub sections: Vec<SectionField>,
    /// `(component, I)` of each dressed section.
    pub labels: Vec<(usize, Vec<u32>)>,
    /// Coefficients of `σ_i` on the normalized dressed sections (`dim × p`).
    pub lambda: CMat,
    /// `T`: variation of the defining functions by each dressed section
    /// (`p × dim`).
    pub variation: CMat,
    /// `|det(T Λ)|`.
    pub wedge: f64,
    dressed: Vec<GaussianAtom>,
}

impl LocalBasis {
    /// `Θ(y)`: columns `df(jʳs(y)) · jʳσᵢ(y)`.
    pub fn theta(&self, s: &SectionField, st: &Stratum, y: &[f64]) -> Result<CMat> {
        let r = st.r();
        let (_, j, _) = st.defining(&holomorphic_jet(s, y, r)?)?;
        let mut out = CMat::zeros(j.nrows(), self.sections.len());
        for (i, sec) in self.sections.iter().enumerate() {
            let z = holomorphic_jet(sec, y, r)?.flatten();
            out.set_column(i, &(&j * nalgebra::DVector::from_column_slice(&z)));
        }
        Ok(out)
    }

    /// `‖T Λ‖₂`: the largest change of `h(x)` per unit `|w|`.
    pub fn gain(&self) -> f64 {
        linalg::sigma_k(&(&self.variation * &self.lambda), 1)
    }
}

/// Perturbation basis at `x` for a stratum with defining functions, using
/// dressed sections normalized in `C^{r+1}`.
pub fn local_basis(s: &SectionField, x: &[f64], st: &Stratum, spec: &BundleSpec, r: usize) -> Result<LocalBasis> {
    if !st.has_equations() || st.r() != r {
        return Err(Error::UnsupportedStratum {
            stratum: st.id.name(),
            n: spec.n(),
            m: spec.m_plus_1 - 1,
            r,
        });
    }
    let (_, jac, _) = st.defining(&holomorphic_jet(s, x, r)?)?;
    let frame = jet_frame_with_order(x, spec, r, r + 1)?;
    let t = &jac * &frame.matrix;
    let p = t.nrows();
    let mut lambda = linalg::pinv(&t, 1e-12);
    for i in 0..p {
        let l1: f64 = lambda.column(i).iter().map(|z| z.norm()).sum();
        if l1 > 0.0 {
            lambda.column_mut(i).scale_mut(1.0 / (l1 * p as f64));
        }
    }
    let wedge = linalg::cdet(&(&t * &lambda)).norm();
    if !(wedge >= WEDGE_FLOOR) {
        return Err(Error::WedgeFloor { wedge });
    }
    let dressed: Vec<GaussianAtom> = frame.sections.iter().map(|f| f.atoms()[0].clone()).collect();
    let mut sections = Vec::with_capacity(p);
    for i in 0..p {
        let atoms = dressed
            .iter()
            .enumerate()
            .filter(|(a, _)| lambda[(*a, i)] != ZERO)
            .map(|(a, atom)| GaussianAtom {
                coeff: atom.coeff * lambda[(a, i)],
                ..atom.clone()
            })
            .collect();
        sections.push(SectionField::from_atoms(spec.clone(), atoms)?);
    }
    Ok(LocalBasis {
        x: x.to_vec(),
        sections,
        labels: frame.labels,
        lambda,
        variation: t,
        wedge,
        dressed,
    })
}

/// Atoms of `τ = −Σ wᵢ σᵢ`.
fn perturbation_atoms(w: &[Complex64], basis: &LocalBasis) -> Vec<GaussianAtom> {
    basis
        .dressed
        .iter()
        .enumerate()
        .filter_map(|(a, atom)| {
            let c: Complex64 = -w.iter().enumerate().map(|(i, wi)| wi * basis.lambda[(a, i)]).sum::<Complex64>();
            (c != ZERO).then(|| GaussianAtom {
                coeff: atom.coeff * c,
                ..atom.clone()
            })
        })
        .collect()
}

/// `s + τ` with `τ = −Σ wᵢ σᵢ`; `w = 0` returns `s` unchanged.
pub fn apply_local_perturbation(s: &SectionField, w: &[Complex64], basis: &LocalBasis, budget: f64) -> Result<SectionField> {
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > budget * (1.0 + 1e-12) {
        return Err(Error::BudgetViolation { norm, budget });
    }
    let mut out = s.clone();
    for atom in perturbation_atoms(w, basis) {
        out.push(atom)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Globalization

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalizeConfig {
    /// Net spacing in g_k units.
    pub net_spacing: f64,
    /// Minimum distance between centers of one batch (g_k units).
    pub batch_distance: f64,
    /// Grid spacing for the final certification.
    pub grid_spacing: f64,
    /// `|σ₀|` below which points count as near the zero stratum.
    pub exclusion: f64,
    /// Scale of the near-boundary carve-out relative to the zero-stratum
    /// margin.
    pub kappa: f64,
    pub seed: u64,
}

impl Default for GlobalizeConfig {
    fn default() -> Self {
        GlobalizeConfig {
            net_spacing: 1.0,
            batch_distance: 6.0,
            grid_spacing: 0.1,
            exclusion: 0.0,
            kappa: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CenterAction {
    Perturbed,
    /// Local margin already beyond what the budget can change.
    Far,
    /// Within the exclusion radius of the zero stratum.
    NearBoundary,
    /// The search kept `w = 0`.
    Unchanged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterRecord {
    pub center: Vec<f64>,
    pub batch: usize,
    pub action: CenterAction,
    pub margin_before: f64,
    pub margin_after: f64,
    pub w: Vec<Complex64>,
    /// `Λ` columns on the dressed sections, row-major `dim × p`.
    pub lambda: Vec<Complex64>,
    pub wedge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub stratum: String,
    pub budget: f64,
    pub net_spacing: f64,
    pub batch_distance: f64,
    pub net: Vec<Vec<f64>>,
    pub batches: Vec<Vec<usize>>,
    /// `sup_y Σ_x env(d(x, y))` over the net.
    pub overlap: f64,
    /// Per-center bound on `|w|`.
    pub cap: f64,
    pub centers: Vec<CenterRecord>,
    /// `Σ_x |w_x|`.
    pub applied_norm: f64,
    /// Radial envelope of one unit perturbation, for overlap audits.
    pub envelope_step: f64,
    pub envelope: Vec<f64>,
}

impl PerturbationPlan {
    /// `sup_y Σ_x |w_x| env(d(x, y))` over a grid: a bound on the pointwise
    /// `C^{r+1}` norm of the total perturbation.
    pub fn pointwise_bound(&self, spec: &BundleSpec, spacing: f64) -> f64 {
        let (pts, _, _) = torus_grid(spec, spacing);
        let env = |d: f64| {
            let b = (d / self.envelope_step).floor() as usize;
            self.envelope.get(b).copied().unwrap_or(0.0)
        };
        pts.iter()
            .map(|y| {
                self.centers
                    .iter()
                    .map(|c| {
                        let w = c.w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        w * env(rescaled_distance(&c.center, y, &spec.ctx))
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Maximal `spacing`-separated set of a shuffled candidate grid.
pub fn build_net(spec: &BundleSpec, spacing: f64, seed: u64) -> Vec<Vec<f64>> {
    let (mut cands, _, _) = torus_grid(spec, spacing / 3.0);
    cands.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut net: Vec<Vec<f64>> = Vec::new();
    for c in cands {
        if net.iter().all(|x| rescaled_distance(x, &c, &spec.ctx) >= spacing) {
            net.push(c);
        }
    }
    net
}

/// Greedy coloring: centers of one batch are pairwise at least `d` apart.
pub fn color_batches(spec: &BundleSpec, net: &[Vec<f64>], d: f64) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for (i, x) in net.iter().enumerate() {
        let slot = batches
            .iter()
            .position(|b| b.iter().all(|&j| rescaled_distance(x, &net[j], &spec.ctx) >= d));
        match slot {
            Some(b) => batches[b].push(i),
            None => batches.push(vec![i]),
        }
    }
    batches
}

fn ball_points(spec: &BundleSpec, x: &[f64], radius: f64, res: usize) -> Vec<Vec<f64>> {
    let dim = spec.ctx.dim();
    let sc = spec.ctx.sqrt_ck();
    let res = res.max(2);
    let mut out = vec![x.to_vec()];
    for mut idx in 0..res.pow(dim as u32) {
        let mut off = vec![0.0; dim];
        for o in off.iter_mut() {
            *o = -radius + 2.0 * radius * (idx % res) as f64 / (res - 1) as f64;
            idx /= res;
        }
        let norm = off.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= radius * (1.0 + 1e-12) && norm > 0.0 {
            out.push(x.iter().zip(&off).map(|(a, o)| a + o / sc).collect());
        }
    }
    out
}

struct BallModel {
    base: Vec<JetSample>,
    basis: Vec<Vec<JetSample>>,
}

impl BallModel {
    fn margin(&self, st: &Stratum, w: &[Complex64], exclusion: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for (y, base) in self.base.iter().enumerate() {
            let mut smp = base.clone();
            for (i, wi) in w.iter().enumerate() {
                if *wi != ZERO {
                    smp.axpy(-wi, &self.basis[i][y]);
                }
            }
            if st.id != StratumId::Z && smp.sigma0_norm() <= exclusion {
                continue;
            }
            let Ok(pb) = st.pullback(&smp) else {
                continue;
            };
            let vn = pb.h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.min(vn.max(linalg::sigma_k(&pb.dh, st.p())));
        }
        worst
    }
}

/// Sweep the net batch by batch, perturbing each center by the best `w` the
/// local search finds within the per-center cap, then certify on the grid.
pub fn globalize(
    s: &SectionField,
    st: &Stratum,
    params: &SardParams,
    cfg: &GlobalizeConfig,
) -> Result<(SectionField, TransversalityReport, PerturbationPlan)> {
    let spec = s.spec.clone();
    let r = st.r();
    if !st.has_equations() {
        return Err(Error::UnsupportedStratum {
            stratum: st.id.name(),
            n: spec.n(),
            m: spec.m_plus_1 - 1,
            r,
        });
    }
    let env = radial_envelope(spec.n(), spec.k(), r, r + 1);
    let net = build_net(&spec, cfg.net_spacing, cfg.seed);
    let batches = color_batches(&spec, &net, cfg.batch_distance);
    let (grid, _, _) = torus_grid(&spec, 0.25);
    let overlap = grid
        .iter()
        .map(|y| net.iter().map(|x| env.at(rescaled_distance(x, y, &spec.ctx))).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1.0);
    let cap = params.delta / overlap;
    let p = st.p();
    let mut current = s.clone();
    let mut records: Vec<Option<CenterRecord>> = vec![None; net.len()];
    let mut applied_norm = 0.0;
    for (b, batch) in batches.iter().enumerate() {
        let base = current.clone();
        let mut pending = Vec::new();
        for &ci in batch {
            let x = &net[ci];
            let mut rec = CenterRecord {
                center: x.clone(),
                batch: b,
                action: CenterAction::Unchanged,
                margin_before: 0.0,
                margin_after: 0.0,
                w: vec![ZERO; p],
                lambda: Vec::new(),
                wedge: 0.0,
            };
            if st.id != StratumId::Z && jet_sample(&base, x, 0)?.sigma0_norm() <= cfg.exclusion {
                rec.action = CenterAction::NearBoundary;
                records[ci] = Some(rec);
                continue;
            }
            let basis = match local_basis(&base, x, st, &spec, r) {
                Ok(basis) => basis,
                Err(Error::JetInZeroStratum) => {
                    rec.action = CenterAction::NearBoundary;
                    records[ci] = Some(rec);
                    continue;
                }
                Err(e) => return Err(e),
            };
            rec.wedge = basis.wedge;
            rec.lambda = basis.lambda.transpose().iter().copied().collect();
            let pts = ball_points(&spec, x, cfg.net_spacing, params.ball_resolution);
            let order = st.read_order();
            let model = BallModel {
                base: pts.iter().map(|y| jet_sample(&base, y, order)).collect::<Result<_>>()?,
                basis: basis
                    .sections
                    .iter()
                    .map(|sec| pts.iter().map(|y| jet_sample(sec, y, order)).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?,
            };
            let m0 = model.margin(st, &vec![ZERO; p], cfg.exclusion);
            rec.margin_before = m0;
            rec.margin_after = m0;
            if m0 >= cap * basis.gain() {
                rec.action = CenterAction::Far;
                records[ci] = Some(rec);
                continue;
            }
            let found = sard_search_with(p, cap, params.levels, |w| model.margin(st, w, cfg.exclusion));
            rec.margin_after = found.margin;
            if found.w.iter().all(|z| *z == ZERO) {
                records[ci] = Some(rec);
                continue;
            }
            rec.action = CenterAction::Perturbed;
            rec.w = found.w.clone();
            applied_norm += found.w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            pending.push((found.w, basis));
            records[ci] = Some(rec);
        }
        for (w, basis) in pending {
            current = apply_local_perturbation(&current, &w, &basis, cap)?;
        }
    }
    let report = eta_global(&current, st, cfg.grid_spacing, cfg.exclusion)?;
    let plan = PerturbationPlan {
        stratum: st.id.name(),
        budget: params.delta,
        net_spacing: cfg.net_spacing,
        batch_distance: cfg.batch_distance,
        net,
        batches,
        overlap,
        cap,
        centers: records.into_iter().map(|r| r.expect("every center recorded")).collect(),
        applied_norm,
        envelope_step: env.step,
        envelope: env.values.clone(),
    };
    Ok((current, report, plan))
}

// ---------------------------------------------------------------------------
// Induction

/// One attempt at one stratum in the induction ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stratum: String,
    pub budget: f64,
    pub eta_grid: f64,
    pub eta_cert: f64,
    /// Re-measured `eta_grid` of earlier strata after this stage.
    pub earlier: Vec<(String, f64)>,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct InductionOutcome {
    pub section: SectionField,
    /// Final report per stratum, re-measured on the final section.
    pub reports: Vec<TransversalityReport>,
    /// Report of each stratum right after its own stage.
    pub stage_reports: Vec<TransversalityReport>,
    pub plans: Vec<PerturbationPlan>,
    pub ledger: Vec<LedgerEntry>,
    /// Exclusion radius used for the Σ strata.
    pub exclusion: f64,
}

fn exclusion_for(st: &Stratum, z_margin: Option<f64>, cfg: &GlobalizeConfig) -> f64 {
    match (st.id, z_margin) {
        (StratumId::Z, _) => 0.0,
        (_, Some(m)) => cfg.exclusion.max(cfg.kappa * m / 4.0),
        (_, None) => cfg.exclusion,
    }
}

/// Process the strata in order with budgets `δ_j = δ / 2^{j+1}`, each at
/// most a quarter of the previous stage's margin. A stage that halves an
/// earlier margin is redone with half the budget.
pub fn stratum_induction(
    s: &SectionField,
    qs: &QuasiStratification,
    delta: f64,
    params: &SardParams,
    cfg: &GlobalizeConfig,
) -> Result<InductionOutcome> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!("delta {delta} not in (0, 1]")));
    }
    if !qs.is_ordered() {
        return Err(Error::InvalidInput("strata not listed in precedence order".into()));
    }
    let mut current = s.clone();
    let mut stage_reports: Vec<TransversalityReport> = Vec::new();
    let mut plans = Vec::new();
    let mut ledger = Vec::new();
    let mut z_margin = None;
    let mut exclusions = Vec::new();
    for (j, st) in qs.strata.iter().enumerate() {
        let mut budget = delta / 2f64.powi(j as i32 + 1);
        if let Some(prev) = stage_reports.last() {
            budget = budget.min(prev.eta_grid / 4.0);
        }
        let exclusion = exclusion_for(st, z_margin, cfg);
        let stage_cfg = GlobalizeConfig {
            exclusion,
            seed: cfg.seed.wrapping_add(j as u64),
            ..cfg.clone()
        };
        loop {
            if !(budget >= MIN_BUDGET) {
                return Err(Error::ScheduleCollapse {
                    stratum: st.id.name(),
                    budget,
                });
            }
            let (next, report, plan) = globalize(&current, st, &params.with_delta(budget), &stage_cfg)?;
            let mut earlier = Vec::new();
            let mut ok = true;
            for (i, prev) in qs.strata[..j].iter().enumerate() {
                let again = eta_global(&next, prev, cfg.grid_spacing, exclusions[i])?;
                if again.eta_grid < stage_reports[i].eta_grid / 2.0 {
                    ok = false;
                }
                earlier.push((prev.id.name(), again.eta_grid));
            }
            ledger.push(LedgerEntry {
                stratum: st.id.name(),
                budget,
                eta_grid: report.eta_grid,
                eta_cert: report.eta_cert,
                earlier,
                accepted: ok,
            });
            if ok {
                current = next;
                if st.id == StratumId::Z {
                    z_margin = Some(report.eta_grid);
                }
                stage_reports.push(report);
                plans.push(plan);
                exclusions.push(exclusion);
                break;
            }
            budget /= 2.0;
        }
    }
    let reports = qs
        .strata
        .iter()
        .zip(&exclusions)
        .map(|(st, &ex)| eta_global(&current, st, cfg.grid_spacing, ex))
        .collect::<Result<Vec<_>>>()?;
    let exclusion = exclusions.iter().copied().fold(0.0, f64::max);
    Ok(InductionOutcome {
        section: current,
        reports,
        stage_reports,
        plans,
        ledger,
        exclusion,
    })
}

/// Matrix view of `Λ` from a center record.
pub fn record_lambda(rec: &CenterRecord, p: usize) -> CMat {
    let dim = rec.lambda.len().checked_div(p).unwrap_or(0);
    DMatrix::from_row_slice(p, dim, &rec.lambda).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eta_target_value() {
        let p = SardParams::new(0.1, 3).unwrap();
        assert!((p.eta_target() - 8.19e-3).abs() < 1e-5);
        assert!(SardParams::new(0.5, 3).is_err());
    }

    #[test]
    fn constant_function_gets_full_budget() {
        let ball = SampledBall::new(vec![vec![c(0.0, 0.0)]; 5], vec![0.0; 5]);
        let p = SardParams::new(0.1, 3).unwrap();
        let res = local_sard_search(&ball, &p);
        assert!((res.margin - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_function_is_already_transverse() {
        let mut vals = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                let z = c(i as f64 / 3.0, j as f64 / 3.0);
                if z.norm() <= 1.0 {
                    vals.push(vec![z]);
                }
            }
        }
        let n = vals.len();
        let ball = SampledBall::new(vals, vec![1.0; n]);
        let res = local_sard_search(&ball, &SardParams::new(0.1, 3).unwrap());
        assert!(res.margin >= 0.9);
    }

    #[test]
    fn more_levels_never_hurt() {
        let vals: Vec<Vec<Complex64>> = (0..20)
            .map(|i| vec![c((i as f64 * 0.37).sin() * 0.05, (i as f64 * 0.91).cos() * 0.05)])
            .collect();
        let ball = SampledBall::new(vals, vec![0.0; 20]);
        let mut prev = 0.0;
        for levels in 1..=5 {
            let p = SardParams {
                levels,
                ..SardParams::new(0.1, 3).unwrap()
            };
            let m = local_sard_search(&ball, &p).margin;
            assert!(m >= prev);
            prev = m;
        }
    }
}
