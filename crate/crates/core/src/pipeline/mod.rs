//! End-to-end runs: build the model, drive the stratum induction from the
//! zero section, re-measure the result, cross-check the topology with the
//! independent oracles and persist everything needed for replay.

pub mod config;
pub mod oracles;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use oracles::{count_critical_points, count_zeros, LocatedZero, ZeroCount};

use crate::bundle::BundleSpec;
use crate::geometry::{rescaled_distance, GeometryContext};
use crate::jets::{holomorphic_jet, jet_sample, projectivize_jet};
use crate::perturb::{stratum_induction, GlobalizeConfig, LedgerEntry, PerturbationPlan, SardParams};
use crate::sections::{ah_norms, evaluate, torus_grid, AHNormReport, SectionField};
use crate::strata::{boardman_quasistratification, Stratum, StratumId};
use crate::transversality::{eta_global, TransversalityReport};
use crate::{Error, Result};

/// Engine-located and oracle-located points must agree to this (g_k units).
pub const MATCH_TOL: f64 = 1e-6;
/// Minimum chordal separation of distinct critical values.
pub const VALUE_SEPARATION: f64 = 1e-3;
/// Random pencil members checked for the degree.
pub const DEGREE_CHECKS: usize = 5;
/// Cell size of the winding decomposition (g_k units).
pub const ORACLE_CELL: f64 = 0.25;

// ---------------------------------------------------------------------------
// Engine-side locators

/// Newton for `v(x) = 0` from the engine's `(v, ∇^{1,0}v, ∇^{0,1}v)`.
fn engine_newton<F>(eval: F, seed: [f64; 2], sqrt_ck: f64) -> Option<[f64; 2]>
where
    F: Fn(&[f64]) -> Result<(Complex64, Complex64, Complex64)>,
{
    let mut x = seed;
    for _ in 0..oracles::NEWTON_MAX_ITER {
        let (v, a, b) = eval(&x).ok()?;
        let den = a.norm_sqr() - b.norm_sqr();
        if den == 0.0 || !den.is_finite() {
            return None;
        }
        let dw = (b * v.conj() - a.conj() * v) / den;
        x = [x[0] + dw.re / sqrt_ck, x[1] + dw.im / sqrt_ck];
        if dw.norm() < oracles::NEWTON_TOL {
            return Some([x[0] - x[0].floor(), x[1] - x[1].floor()]);
        }
    }
    None
}

/// Zeros of `v` by Newton from the local minima of `|v|` on the grid.
fn engine_locate<F>(spec: &BundleSpec, spacing: f64, eval: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<(Complex64, Complex64, Complex64)>,
{
    if spec.n() != 1 {
        return Err(Error::InvalidInput("engine locators need n = 1".into()));
    }
    let (pts, m, _) = torus_grid(spec, spacing);
    let mags = pts.iter().map(|p| Ok(eval(p)?.0.norm())).collect::<Result<Vec<f64>>>()?;
    let sc = spec.ctx.sqrt_ck();
    let mut found: Vec<Vec<f64>> = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let v = mags[j * m + i];
            let is_min = (-1i64..=1).all(|dj| {
                (-1i64..=1).all(|di| {
                    let ii = (i as i64 + di).rem_euclid(m as i64) as usize;
                    let jj = (j as i64 + dj).rem_euclid(m as i64) as usize;
                    (di == 0 && dj == 0) || v <= mags[jj * m + ii]
                })
            });
            if !is_min {
                continue;
            }
            let p = &pts[j * m + i];
            let Some(z) = engine_newton(&eval, [p[0], p[1]], sc) else {
                continue;
            };
            let z = z.to_vec();
            if found.iter().all(|f| rescaled_distance(f, &z, &spec.ctx) > MATCH_TOL) {
                found.push(z);
            }
        }
    }
    Ok(found)
}

/// Zeros of a scalar section located with the engine's jets.
pub fn engine_zeros(s: &SectionField, spacing: f64) -> Result<Vec<Vec<f64>>> {
    engine_locate(&s.spec, spacing, |x| {
        let j = jet_sample(s, x, 0)?;
        Ok((j.zeta[0], j.d[0][0], j.db[0][0]))
    })
}

/// Points of `j^r s ∈ Σ₁` located with the stratum's defining function.
pub fn engine_critical_points(s: &SectionField, st: &Stratum, spacing: f64) -> Result<Vec<Vec<f64>>> {
    engine_locate(&s.spec, spacing, |x| {
        let pb = st.pullback(&jet_sample(s, x, st.read_order())?)?;
        Ok((pb.h[0], pb.dh[(0, 0)], pb.dbar_h[(0, 0)]))
    })
}

/// Largest distance in a one-to-one matching of two point sets, or an
/// oracle disagreement.
pub fn match_points(oracle: &[Vec<f64>], engine: &[Vec<f64>], ctx: &GeometryContext, what: &str) -> Result<f64> {
    if oracle.len() != engine.len() {
        return Err(Error::OracleDisagreement(format!(
            "{what}: winding oracle found {}, engine found {}",
            oracle.len(),
            engine.len()
        )));
    }
    let mut used = vec![false; engine.len()];
    let mut worst: f64 = 0.0;
    for p in oracle {
        let best = engine
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, q)| (i, rescaled_distance(p, q, ctx)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= MATCH_TOL => {
                used[i] = true;
                worst = worst.max(d);
            }
            _ => {
                return Err(Error::OracleDisagreement(format!(
                    "{what}: no engine point within {MATCH_TOL:e} of {p:?}"
                )))
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Pencils

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub degree: i32,
    /// `|φ₂|` of the projectivized 2-jet.
    pub hessian_margin: f64,
    /// Unit representative of `[s₀ : s₁]`, largest entry real positive.
    pub value: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub c: Complex64,
    pub count: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilData {
    /// Common zeros of `s₀, s₁`; empty on curves.
    pub base_points: Vec<Vec<f64>>,
    /// Grid minimum of `|σ₀|`.
    pub min_sigma0: f64,
    pub min_sigma0_spacing: f64,
    pub critical: Vec<CriticalPoint>,
    /// Signed winding count of the Wronskian.
    pub winding_count: i32,
    /// Smallest chordal distance between critical values; `None` with
    /// fewer than two critical points.
    pub min_value_separation: Option<f64>,
    /// Counts of `s₀ − c·s₁` for random `c`.
    pub degree_checks: Vec<DegreeCheck>,
}

fn unit_value(v: &[Complex64]) -> Vec<Complex64> {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let phase = big.conj() / big.norm();
    v.iter().map(|z| z * phase / nrm).collect()
}

fn chordal(a: &[Complex64], b: &[Complex64]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).norm()
}

/// Map data of `[s₀ : s₁]` on `T²`: base locus, critical points with their
/// Hessian margins, critical values and degree checks.
pub fn extract_pencil(s: &SectionField, spacing: f64, seed: u64) -> Result<PencilData> {
    if s.spec.m_plus_1 != 2 {
        return Err(Error::InvalidInput("a pencil needs m + 1 = 2".into()));
    }
    if s.spec.n() != 1 {
        return Err(Error::InvalidInput("pencil extraction is implemented for n = 1".into()));
    }
    let (pts, _, h) = torus_grid(&s.spec, spacing);
    let min_sigma0 = pts
        .iter()
        .map(|p| evaluate(s, p).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    let wc = count_critical_points(s, ORACLE_CELL)?;
    let mut critical = Vec::new();
    for z in &wc.zeros {
        let pj = projectivize_jet(&holomorphic_jet(s, &z.location, 2)?)?;
        let hess = pj.phi2[0][0].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        critical.push(CriticalPoint {
            location: z.location.clone(),
            degree: z.degree,
            hessian_margin: hess,
            value: unit_value(&evaluate(s, &z.location)),
        });
    }
    let mut sep: Option<f64> = None;
    for (i, a) in critical.iter().enumerate() {
        for b in &critical[i + 1..] {
            let d = chordal(&a.value, &b.value);
            sep = Some(sep.map_or(d, |v| v.min(d)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree_checks = Vec::new();
    for _ in 0..DEGREE_CHECKS {
        let c = Complex64::from_polar(rng.gen_range(0.2..5.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let member = oracles::combine(s, &[Complex64::new(1.0, 0.0), -c])?;
        degree_checks.push(DegreeCheck {
            c,
            count: count_zeros(&member, ORACLE_CELL)?.count,
        });
    }
    Ok(PencilData {
        base_points: Vec::new(),
        min_sigma0,
        min_sigma0_spacing: h,
        critical,
        winding_count: wc.count,
        min_value_separation: sep,
        degree_checks,
    })
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroData {
    pub oracle: ZeroCount,
    pub engine: Vec<Vec<f64>>,
    /// Largest oracle-engine distance (g_k units); `None` when unmatched.
    pub max_mismatch: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub zeros: Option<ZeroData>,
    pub pencil: Option<PencilData>,
    /// Engine-located critical points and their largest distance to the
    /// oracle's.
    pub engine_critical: Option<Vec<Vec<f64>>>,
    pub critical_mismatch: Option<f64>,
}

/// Everything re-derivable from the final section and the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub ah_norms: AHNormReport,
    pub strata: Vec<TransversalityReport>,
    /// `|σ₀|` exclusion used for the Σ strata.
    pub exclusion: f64,
    pub counts: Counts,
    /// Oracle or engine disagreement, if any.
    pub disagreement: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub induction_seconds: f64,
    pub measure_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Configuration echo, restricted to this run's degree.
    pub config: RunConfig,
    pub k: u32,
    pub measurement: Measurement,
    /// Reports right after each stratum's own stage.
    pub stage_reports: Vec<TransversalityReport>,
    /// Reports re-measured by the induction after the last stage.
    pub induction_reports: Vec<TransversalityReport>,
    pub ledger: Vec<LedgerEntry>,
    pub plans: Vec<PerturbationPlan>,
    pub section: SectionField,
    pub timing: Timing,
    pub failure: Option<Failure>,
}

fn verdict_of(failure: Option<&Failure>, m: &Measurement) -> Result<()> {
    match failure {
        None => Ok(()),
        Some(f) if f.code == 3 => Err(Error::OracleDisagreement(f.message.clone())),
        Some(f) => Err(Error::TransversalityFailure {
            stratum: f.message.clone(),
            eta_cert: m.strata.iter().map(|r| r.eta_cert).fold(f64::INFINITY, f64::min),
        }),
    }
}

impl Measurement {
    pub fn verdict(&self) -> Result<()> {
        verdict_of(self.failure().as_ref(), self)
    }

    /// Code 2 for a non-positive certified margin, 3 for an oracle
    /// disagreement.
    pub fn failure(&self) -> Option<Failure> {
        if let Some(bad) = self.strata.iter().find(|r| !(r.eta_cert > 0.0)) {
            return Some(Failure {
                code: 2,
                message: bad.stratum.clone(),
            });
        }
        self.disagreement.as_ref().map(|d| Failure {
            code: 3,
            message: d.clone(),
        })
    }
}

impl RunRecord {
    pub fn report(&self, id: &str) -> Option<&TransversalityReport> {
        self.measurement.strata.iter().find(|r| r.stratum == id)
    }

    /// The run's verdict as an error carrying the CLI exit code.
    pub fn verdict(&self) -> Result<()> {
        verdict_of(self.failure.as_ref(), &self.measurement)
    }
}

fn spec_for(cfg: &RunConfig, k: u32) -> Result<BundleSpec> {
    BundleSpec::new(GeometryContext::new(cfg.model.n, k)?, cfg.model.m + 1)
}

fn globalize_config(cfg: &RunConfig) -> GlobalizeConfig {
    GlobalizeConfig {
        net_spacing: cfg.perturb.net_spacing,
        batch_distance: cfg.perturb.batch_distance,
        grid_spacing: cfg.grid.spacing,
        seed: cfg.seed,
        ..GlobalizeConfig::default()
    }
}

/// Re-measure a section: AH norms, per-stratum reports and the counting
/// oracles against the engine. Deterministic in its inputs.
pub fn measure(s: &SectionField, cfg: &RunConfig) -> Result<Measurement> {
    let spec = &s.spec;
    let (n, m, r) = (cfg.model.n, cfg.model.m, cfg.jets.r);
    if spec.n() != n || spec.m_plus_1 != m + 1 {
        return Err(Error::Config(format!(
            "section has (n, m) = ({}, {}), config says ({n}, {m})",
            spec.n(),
            spec.m_plus_1 - 1
        )));
    }
    let spacing = cfg.grid.spacing;
    let ah = ah_norms(s, r, spacing).map_err(|e| e.in_stage("ah_norms"))?;
    let qs = boardman_quasistratification(n, m, r, spec).map_err(|e| e.in_stage("strata"))?;
    let gc = globalize_config(cfg);
    let mut strata = Vec::new();
    let mut exclusion = gc.exclusion;
    for st in qs.strata.iter().filter(|st| st.has_equations()) {
        let ex = if st.id == StratumId::Z { 0.0 } else { exclusion };
        let rep = eta_global(s, st, spacing, ex).map_err(|e| e.in_stage("measure"))?;
        if st.id == StratumId::Z {
            exclusion = exclusion.max(gc.kappa * rep.eta_grid / 4.0);
        }
        strata.push(rep);
    }
    let mut counts = Counts::default();
    let mut disagreement = None;
    // the counting oracles need zeros kept away from cell edges
    let z_certified = strata.iter().all(|r| r.stratum != StratumId::Z.to_string() || r.eta_cert > 0.0);
    if n == 1 && m == 0 && z_certified {
        let oracle = count_zeros(s, ORACLE_CELL).map_err(|e| e.in_stage("count_zeros"))?;
        let engine = engine_zeros(s, spacing).map_err(|e| e.in_stage("engine_zeros"))?;
        let locs: Vec<Vec<f64>> = oracle.zeros.iter().map(|z| z.location.clone()).collect();
        let max_mismatch = match match_points(&locs, &engine, &spec.ctx, "zeros") {
            Ok(d) => Some(d),
            Err(e) => {
                disagreement = Some(e.to_string());
                None
            }
        };
        if disagreement.is_none() && oracle.count != spec.k() as i32 {
            disagreement = Some(format!("winding count {} differs from the degree {}", oracle.count, spec.k()));
        }
        counts.zeros = Some(ZeroData {
            oracle,
            engine,
            max_mismatch,
        });
    }
    if n == 1 && m == 1 && r >= 1 && z_certified {
        let pencil = extract_pencil(s, spacing, cfg.seed).map_err(|e| e.in_stage("extract_pencil"))?;
        let sigma = qs
            .strata
            .iter()
            .find(|st| st.id == StratumId::Sigma(1))
            .expect("Σ₁ present for r ≥ 1");
        let engine = engine_critical_points(s, sigma, spacing).map_err(|e| e.in_stage("engine_critical"))?;
        let locs: Vec<Vec<f64>> = pencil.critical.iter().map(|c| c.location.clone()).collect();
        match match_points(&locs, &engine, &spec.ctx, "critical points") {
            Ok(d) => counts.critical_mismatch = Some(d),
            Err(e) => disagreement = Some(e.to_string()),
        }
        let expected = 2 * spec.k() as i32;
        if disagreement.is_none() && pencil.winding_count != expected {
            disagreement = Some(format!("critical count {} differs from 2k = {expected}", pencil.winding_count));
        }
        if disagreement.is_none() {
            if let Some(d) = pencil.degree_checks.iter().find(|d| d.count != spec.k() as i32) {
                disagreement = Some(format!("pencil member for c = {} has {} zeros", d.c, d.count));
            }
        }
        counts.engine_critical = Some(engine);
        counts.pencil = Some(pencil);
    }
    Ok(Measurement {
        ah_norms: ah,
        strata,
        exclusion,
        counts,
        disagreement,
    })
}

/// One run at one degree from the zero section.
pub fn run_single(cfg: &RunConfig, k: u32) -> Result<RunRecord> {
    cfg.validate()?;
    let cfg = cfg.with_degree(k);
    let spec = spec_for(&cfg, k).map_err(|e| e.in_stage("model"))?;
    let qs = boardman_quasistratification(cfg.model.n, cfg.model.m, cfg.jets.r, &spec).map_err(|e| e.in_stage("strata"))?;
    let params = SardParams::new(cfg.perturb.delta / 2.0, cfg.perturb.nu).map_err(|e| Error::Config(e.to_string()))?;
    let t0 = Instant::now();
    let out = stratum_induction(
        &SectionField::zero(spec.clone()),
        &qs,
        cfg.perturb.delta,
        &params,
        &globalize_config(&cfg),
    )
    .map_err(|e| e.in_stage("perturb"))?;
    let induction_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let measurement = measure(&out.section, &cfg)?;
    let measure_seconds = t1.elapsed().as_secs_f64();
    let failure = measurement.failure();
    Ok(RunRecord {
        config: cfg,
        k,
        measurement,
        stage_reports: out.stage_reports,
        induction_reports: out.reports,
        ledger: out.ledger,
        plans: out.plans,
        section: out.section,
        timing: Timing {
            induction_seconds,
            measure_seconds,
        },
        failure,
    })
}

/// One record per configured degree.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    cfg.degrees().into_iter().map(|k| run_single(cfg, k)).collect()
}

/// Directory of one run below `output.dir`.
pub fn run_dir(cfg: &RunConfig, k: u32) -> PathBuf {
    cfg.output
        .dir
        .join(format!("n{}-k{}-m{}-r{}-seed{}", cfg.model.n, k, cfg.model.m, cfg.jets.r, cfg.seed))
}

/// Write config echo, section, plans and record of one run.
pub fn persist(record: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), record.config.to_toml_string()?)?;
    record.section.save(&dir.join("section.json"))?;
    std::fs::write(dir.join("plans.json"), serde_json::to_string_pretty(&record.plans)?)?;
    std::fs::write(dir.join("record.json"), serde_json::to_string(record)?)?;
    Ok(())
}

pub fn load_record(dir: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(dir.join("record.json"))?;
    Ok(serde_json::from_str(&text)?)
}
