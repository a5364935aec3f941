use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tblab::curvature::{c2, gamma_plus_lb, mv_identity_check, ring};
use tblab::geometry::sample_lattice;
use tblab::io::{parse_config, parse_measure, parse_suite_config, read_text, LatticeFile, MeasureMeta, OutputDir};
use tblab::measure::{exceptional_set_above, generate, Generator};
use tblab::pipeline::{run_theorem1_pipeline, run_theorem1a_pipeline, run_theorem3_pipeline, vitushkin_on, ExperimentConfig, PipelineReport};
use tblab::probability::bad_square_probability;
use tblab::suite::{run_criterion, Scale, SuiteConfig, SuiteReport, CRITERIA};
use tblab::transform::cotlar_check;
use tblab::{pt, CheckReport, PlanarMeasure, Rect};

#[derive(Parser, Debug)]
#[command(name = "tblab", version, about = "Experiments on suppressed Cauchy kernels and random dyadic lattices")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory holding `reports/`, `tables/` and `measures/`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Pipeline {
    T1,
    T1a,
    T3,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a measure from the config or from an inline generator.
    Gen {
        /// Generator as JSON, e.g. `{"kind": "cantor_corner", "level": 3}`.
        #[arg(long)]
        generator: Option<String>,
        /// Rescale to unit mass inside the working disk.
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value = "measure")]
        name: String,
    },
    /// Sample a shifted lattice and list its squares at one level.
    Lattice {
        #[arg(long, default_value_t = 2)]
        level: u32,
        /// Keep only squares charged by this measure.
        #[arg(long)]
        measure: Option<PathBuf>,
    },
    /// Run the acceptance battery.
    #[command(alias = "suite")]
    Verify {
        /// Criteria to run; all when omitted.
        #[arg(long)]
        criterion: Vec<u32>,
        /// Smoke-test sample sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Monte Carlo badness frequency of a square over shifted lattices.
    Badsquares {
        /// Side of the square as a power of two exponent: side = 2^-exp.
        #[arg(long, default_value_t = 16)]
        side_exp: u32,
        #[arg(long, default_value_t = 3)]
        m: u32,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Menger curvature and the discrete curvature identity.
    Curvature {
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Only triples with pairwise distances above this.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Linear-programming lower bound for the positive Cauchy capacity.
    Capacity {
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        directions: usize,
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Radius of the constraint ring relative to the bounding disk.
        #[arg(long, default_value_t = 1.5)]
        ring: f64,
    },
    /// Cotlar-type inequality for the suppressed operator.
    Cotlar {
        #[arg(long, default_value_t = 1.5)]
        beta: f64,
    },
    /// Curvature of the good set `F` built from the configured measure.
    Vitushkin,
    /// One of the end-to-end pipelines.
    Pipeline {
        #[arg(value_enum)]
        which: Pipeline,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard assert failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("this command needs --config")?;
    let mut cfg = parse_config(&read_text(path)?).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_measure(cli: &Cli, path: Option<&Path>) -> Result<(String, PlanarMeasure)> {
    match path {
        Some(p) => {
            let mu = parse_measure(&read_text(p)?).with_context(|| format!("reading {}", p.display()))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "measure".into());
            Ok((name, mu))
        }
        None => {
            let cfg = experiment(cli)?;
            Ok((cfg.scenario.clone(), cfg.measure()?))
        }
    }
}

fn check_rows(checks: &[CheckReport]) -> Vec<Vec<String>> {
    checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.observed.to_string(),
                c.bound.map(|b| b.to_string()).unwrap_or_default(),
                c.pass.map(|p| p.to_string()).unwrap_or_default(),
                c.samples.to_string(),
                c.seed.to_string(),
                c.note.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

const CHECK_HEADER: [&str; 7] = ["name", "observed", "bound", "pass", "samples", "seed", "note"];

/// Writes the report as JSON, or the table as CSV, and prints the written path.
fn emit<T: Serialize>(cli: &Cli, name: &str, report: &T, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let out = OutputDir::new(&cli.out);
    let path = match cli.format {
        Format::Json => out.write_report(name, report)?,
        Format::Csv => out.write_table(name, header, rows)?,
    };
    println!("{}", path.display());
    Ok(())
}

fn hard_pass(checks: &[CheckReport]) -> bool {
    checks.iter().all(|c| c.pass != Some(false))
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Gen { generator, normalize, name } => {
            let g: Generator = match (generator, &cli.config) {
                (Some(text), _) => serde_json::from_str(text).context("parsing --generator")?,
                (None, Some(_)) => experiment(cli)?.measure,
                (None, None) => bail!("gen needs --generator or --config"),
            };
            let raw = generate(&g)?;
            let mu = if *normalize { raw.normalized(tblab::pipeline::NORMAL_RADIUS).0 } else { raw };
            let meta = MeasureMeta {
                generator: Some(g),
                seed: cli.seed,
            };
            let path = OutputDir::new(&cli.out).write_measure(name, &mu, meta)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Lattice { level, measure } => {
            let lattice = sample_lattice(cli.seed.unwrap_or(0));
            let mu = match measure {
                Some(p) => Some(load_measure(cli, Some(p))?.1),
                None => None,
            };
            let mut rows = Vec::new();
            let mut keys = Vec::new();
            for sq in lattice.squares_at(*level) {
                let mass = mu.as_ref().map(|m| m.mass_where(|_, z| sq.contains(z)));
                if mass == Some(0.0) {
                    continue;
                }
                let r = sq.rect();
                keys.push(sq.key);
                rows.push(vec![
                    sq.key.level.to_string(),
                    sq.key.ix.to_string(),
                    sq.key.iy.to_string(),
                    r.x0.to_string(),
                    r.x1.to_string(),
                    r.y0.to_string(),
                    r.y1.to_string(),
                    mass.map(|m| m.to_string()).unwrap_or_default(),
                ]);
            }
            let file = LatticeFile::from_lattice(&lattice, keys);
            emit(cli, "lattice", &file, &["level", "ix", "iy", "x0", "x1", "y0", "y1", "mass"], &rows)?;
            Ok(true)
        }
        Command::Verify { criterion, quick } => {
            let mut cfg = match &cli.config {
                Some(p) => parse_suite_config(&read_text(p)?).with_context(|| format!("reading {}", p.display()))?,
                None => SuiteConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if *quick {
                cfg.scale = Scale::Quick;
            }
            let ids: Vec<u32> = if criterion.is_empty() { CRITERIA.to_vec() } else { criterion.clone() };
            let mut criteria = Vec::new();
            for id in ids {
                let c = run_criterion(id, &cfg)?;
                println!("{}", c.line());
                criteria.push(c);
            }
            let report = SuiteReport { seed: cfg.seed, criteria };
            let out = OutputDir::new(&cli.out);
            out.write_report("suite", &report)?;
            let rows: Vec<Vec<String>> = report
                .criteria
                .iter()
                .flat_map(|c| {
                    check_rows(&c.checks).into_iter().map(move |mut r| {
                        r.insert(0, c.id.to_string());
                        r
                    })
                })
                .collect();
            let mut header = vec!["criterion"];
            header.extend(CHECK_HEADER);
            out.write_table("suite", &header, &rows)?;
            Ok(report.all_pass())
        }
        Command::Badsquares { side_exp, m, alpha, trials } => {
            let side = 2f64.powi(-(*side_exp as i32));
            let q = Rect::new(0.1, 0.1 + side, 0.1, 0.1 + side);
            let ks: Vec<u32> = (*m..*m + 5).collect();
            let est = bad_square_probability(&q, *m, &ks, *alpha, *trials, cli.seed.unwrap_or(0))?;
            let rows: Vec<Vec<String>> = est
                .scales
                .iter()
                .chain(std::iter::once(&est.aggregate))
                .map(|s| {
                    vec![
                        s.k.to_string(),
                        s.hits.to_string(),
                        s.trials.to_string(),
                        s.frequency.to_string(),
                        s.wilson_lo.to_string(),
                        s.wilson_hi.to_string(),
                        s.exact.to_string(),
                        s.bound.to_string(),
                        s.pass.to_string(),
                    ]
                })
                .collect();
            let header = ["k", "hits", "trials", "frequency", "wilson_lo", "wilson_hi", "exact", "bound", "pass"];
            emit(cli, "badsquares", &est, &header, &rows)?;
            Ok(est.scales.iter().all(|s| s.pass))
        }
        Command::Curvature { measure, eps } => {
            let (name, mu) = load_measure(cli, measure.as_deref())?;
            let c = c2(&mu, *eps);
            let check = mv_identity_check(&mu)?;
            #[derive(Serialize)]
            struct Out {
                measure: String,
                atoms: usize,
                curvature: tblab::curvature::CurvatureResult,
                identity: CheckReport,
            }
            let pass = check.pass != Some(false);
            let rows = vec![vec![name.clone(), mu.len().to_string(), c.c2.to_string(), c.triples.to_string(), check.observed.to_string(), pass.to_string()]];
            let out = Out {
                measure: name,
                atoms: mu.len(),
                curvature: c,
                identity: check,
            };
            emit(cli, "curvature", &out, &["measure", "atoms", "c2", "triples", "identity_rel_error", "pass"], &rows)?;
            Ok(pass)
        }
        Command::Capacity { measure, directions, points, ring: factor } => {
            let (_, mu) = load_measure(cli, measure.as_deref())?;
            let (c, r) = mu.bounding_disk();
            let radius = if r > 0.0 { r * factor } else { *factor };
            let grid = ring(c, radius, *points);
            let b = gamma_plus_lb(&mu, &grid, *directions)?;
            let rows: Vec<Vec<String>> = mu
                .atoms()
                .iter()
                .zip(&b.weights)
                .map(|(a, w)| vec![a.z.re.to_string(), a.z.im.to_string(), w.to_string()])
                .collect();
            println!("lower bound {:.6} (max violation {:.3e}, slack {:.6})", b.value, b.max_violation, b.slack);
            emit(cli, "capacity", &b, &["x", "y", "weight"], &rows)?;
            Ok(b.max_violation <= b.slack - 1.0 + 1e-9)
        }
        Command::Cotlar { beta } => {
            let cfg = experiment(cli)?;
            let mu = cfg.measure()?;
            let m = cfg.params.m_ahlfors;
            let ex = exceptional_set_above(&mu, m, cfg.resolution.unwrap_or(0.0))?;
            let phi: Vec<f64> = (0..mu.len()).map(|i| ex.h.dist_to_complement(mu.z(i))).collect();
            let one = vec![pt(1.0, 0.0); mu.len()];
            let report = cotlar_check(&mu, &phi, m, *beta, &one)?;
            let checks = [report];
            emit(cli, "cotlar", &checks[0], &CHECK_HEADER, &check_rows(&checks))?;
            Ok(hard_pass(&checks))
        }
        Command::Vitushkin => {
            let cfg = experiment(cli)?;
            let raw = generate(&cfg.measure)?;
            let v = vitushkin_on(&raw, &cfg)?;
            let rows = vec![vec![
                v.length.to_string(),
                v.diameter.to_string(),
                v.gamma.to_string(),
                v.length_f.to_string(),
                v.c2_f.to_string(),
                v.ratio.to_string(),
                v.shape.to_string(),
            ]];
            let name = format!("{}_vitushkin", cfg.scenario);
            emit(cli, &name, &v, &["length", "diameter", "gamma", "length_f", "c2_f", "ratio", "shape"], &rows)?;
            Ok(v.pipeline.hard_asserts_pass())
        }
        Command::Pipeline { which } => {
            let cfg = experiment(cli)?;
            let report = match which {
                Pipeline::T1 => run_theorem1_pipeline(&cfg)?,
                Pipeline::T1a => run_theorem1a_pipeline(&cfg)?,
                Pipeline::T3 => run_theorem3_pipeline(&cfg)?,
            };
            for (stage, secs) in &report.timings {
                eprintln!("{stage}: {secs:.3} s");
            }
            let name = format!("{}_{}", cfg.scenario, report.pipeline);
            emit(cli, &name, &report, &["key", "value"], &pipeline_rows(&report))?;
            Ok(report.hard_asserts_pass())
        }
    }
}

fn pipeline_rows(r: &PipelineReport) -> Vec<Vec<String>> {
    let s = &r.stages;
    let mut rows = vec![vec!["mass_total".to_string(), s.total.to_string()], vec!["mass_h".to_string(), s.h.to_string()]];
    for (k, v) in [("mass_g", s.g), ("mass_t", s.t), ("mass_kept_in_hg", s.kept_in_hg), ("mass_f", s.f)] {
        if let Some(v) = v {
            rows.push(vec![k.to_string(), v.to_string()]);
        }
    }
    rows.extend(r.quantities.iter().map(|(k, v)| vec![k.clone(), v.to_string()]));
    for c in &r.checks {
        rows.push(vec![format!("check_{}", c.name), c.observed.to_string()]);
        if let Some(p) = c.pass {
            rows.push(vec![format!("pass_{}", c.name), p.to_string()]);
        }
    }
    rows
}
