use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use holotrans::bundle::BundleSpec;
use holotrans::geometry::{
    compatible_almost_complex, moser_darboux, standard_j, standard_omega, AlmostComplexField, GeometryContext, TwoFormField,
};
use holotrans::pipeline::report::{emit_report, RunSummary};
use holotrans::pipeline::{load_record, measure, persist, run_dir, run_single, RunConfig, RunRecord};
use holotrans::sections::{ah_norms, make_reference_section, SectionField};
use holotrans::{Error, Result};

#[derive(Parser)]
#[command(name = "holotrans", version, about = "Estimated transversality on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.k=[3,5]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compatible almost-complex structures and Darboux charts on random forms.
    GeometryCheck {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of random perturbations.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Reference section and its holomorphicity norms per degree.
    Sections {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Stratum induction from the zero section, one run per degree.
    Perturb {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// As `perturb` with `model.m = 1` and `jets.r = 2` unless configured.
    Pencil {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Re-measure a persisted run from its section alone.
    Measure {
        /// Run directory holding `config.toml` and `section.json`.
        run: PathBuf,
    },
    /// Aggregate persisted runs into report files.
    Report {
        /// Run directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Output directory.
        #[arg(short, long, default_value = "report")]
        out: PathBuf,
    },
}

fn load_config(args: &ConfigArgs, defaults: &[(&str, &str)]) -> Result<RunConfig> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    RunConfig::from_toml_with_overrides(&text, defaults, &args.overrides)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn random_antisymmetric(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = rng.gen_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}

fn geometry_check(cfg: &RunConfig, samples: usize) -> Result<()> {
    let n = cfg.model.n;
    let d = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_square: f64 = 0.0;
    let mut worst_invariance: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..samples {
        let p = random_antisymmetric(d, &mut rng);
        let size = rng.gen_range(0.001..0.1);
        let w = standard_omega(n) + &p * (size / p.norm());
        let cs = compatible_almost_complex(&TwoFormField::constant(w), &AlmostComplexField::standard(n), &[vec![0.0; d]])?;
        worst_square = worst_square.max(cs.square_residual);
        worst_invariance = worst_invariance.max(cs.invariance_residual);
        worst_ratio = worst_ratio.max((cs.field.at(&vec![0.0; d]) - standard_j(n)).norm() / size);
    }
    let form = TwoFormField::new(d, move |x, out| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let f = 1.0 + 0.05 * x[0];
        out[1] = f;
        out[d] = -f;
        for j in 1..d / 2 {
            out[2 * j * d + 2 * j + 1] = 1.0;
            out[(2 * j + 1) * d + 2 * j] = -1.0;
        }
    });
    let chart = moser_darboux(&form, &vec![0.0; d], 0.5, 0.01)?;
    let report = json!({
        "n": n,
        "samples": samples,
        "square_residual": worst_square,
        "invariance_residual": worst_invariance,
        "max_deviation_ratio": worst_ratio,
        "moser_residual": chart.residual,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_json(
        &cfg.output.dir.join(format!("geometry-n{n}-seed{}", cfg.seed)).join("geometry.json"),
        &report,
    )
}

fn sections(cfg: &RunConfig) -> Result<()> {
    for k in cfg.degrees() {
        let spec = BundleSpec::new(GeometryContext::new(cfg.model.n, k)?, cfg.model.m + 1)?;
        let s = make_reference_section(&vec![0.5; 2 * cfg.model.n], 0, &spec)?;
        let norms = ah_norms(&s, cfg.jets.r, cfg.grid.spacing)?;
        let dir = cfg.output.dir.join(format!("sections-n{}-k{k}-m{}", cfg.model.n, cfg.model.m));
        std::fs::create_dir_all(&dir)?;
        s.save(&dir.join("section.json"))?;
        let report = json!({ "k": k, "ah_norms": norms });
        write_json(&dir.join("norms.json"), &report)?;
        println!(
            "k={k} sup|s|={:.6} sup|dbar s|={:.3e} ratio={:.3e}",
            norms.sup_nabla[0],
            norms.sup_dbar[0],
            norms.sup_dbar[0] / norms.sup_nabla[0]
        );
    }
    Ok(())
}

fn print_record(rec: &RunRecord) {
    let sum = RunSummary::of(rec);
    for s in &sum.strata {
        println!(
            "k={} {}: eta_grid={:.4e} eta_cert={:.4e} h={:.4} L={:.3}",
            sum.k, s.id, s.eta_grid, s.eta_cert, s.h, s.lipschitz
        );
    }
    if let Some(z) = sum.counts.zeros {
        println!("k={} zeros={z}", sum.k);
    }
    if !sum.counts.critical.is_empty() {
        let min = sum.counts.critical.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        println!("k={} critical={} min_hessian={min:.4}", sum.k, sum.counts.critical.len());
    }
    if let Some(f) = &rec.failure {
        println!("k={} failure (code {}): {}", sum.k, f.code, f.message);
    }
}

/// Run every configured degree, persist each run, and return the first
/// failing verdict.
fn induction(cfg: &RunConfig) -> Result<()> {
    let mut verdict = Ok(());
    for k in cfg.degrees() {
        let rec = run_single(cfg, k)?;
        let dir = run_dir(cfg, k);
        persist(&rec, &dir)?;
        emit_report(std::slice::from_ref(&rec), &dir)?;
        print_record(&rec);
        println!("k={k} run directory {}", dir.display());
        if verdict.is_ok() {
            verdict = rec.verdict();
        }
    }
    verdict
}

fn measure_run(run: &Path) -> Result<()> {
    let cfg = RunConfig::load(&run.join("config.toml"))?;
    let section = SectionField::load(&run.join("section.json"))?;
    let m = measure(&section, &cfg)?;
    std::fs::write(run.join("measurement.json"), serde_json::to_string_pretty(&m)?)?;
    for r in &m.strata {
        println!("{}: eta_grid={:.4e} eta_cert={:.4e}", r.stratum, r.eta_grid, r.eta_cert);
    }
    if run.join("record.json").exists() {
        let rec = load_record(run)?;
        let same = rec.measurement == m;
        println!("replay {}", if same { "identical" } else { "differs from record" });
        if !same {
            return Err(Error::OracleDisagreement("replayed measurement differs from the record".into()));
        }
    }
    m.verdict()
}

fn report(runs: &[PathBuf], out: &Path) -> Result<()> {
    let records = runs.iter().map(|r| load_record(r)).collect::<Result<Vec<_>>>()?;
    let files = emit_report(&records, out)?;
    println!("{}", files.summary.display());
    println!("{}", files.margins.display());
    println!("{}", files.points.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GeometryCheck { cfg, samples } => geometry_check(&load_config(&cfg, &[])?, samples),
        Command::Sections { cfg } => sections(&load_config(&cfg, &[])?),
        Command::Perturb { cfg } => induction(&load_config(&cfg, &[])?),
        Command::Pencil { cfg } => {
            let cfg = load_config(&cfg, &[("model.m", "1"), ("jets.r", "2")])?;
            if cfg.model.m != 1 {
                return Err(Error::Config(format!("a pencil has model.m = 1, not {}", cfg.model.m)));
            }
            induction(&cfg)
        }
        Command::Measure { run } => measure_run(&run),
        Command::Report { runs, out } => report(&runs, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
