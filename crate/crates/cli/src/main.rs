mod inits;
mod manifest;

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use riesz_torus::analysis::{crossover, grid_score, phase_scan, recover_mask, Family};
use riesz_torus::census::{
    build_report, pending, read_jsonl, run_records, write_jsonl, CensusOptions, SymmetryGroup,
};
use riesz_torus::energy::{gradient, log_domain_energy, log_energy, riesz_energy};
use riesz_torus::factory::{construct_theorem1, named, random_config, ConstructionSpec, NamedConfig};
use riesz_torus::flow::{descend, DescentOptions};
use riesz_torus::verify::{all_passed, run_suite, Suite};
use riesz_torus::{Configuration, EnergySpec};
use serde_json::json;

use manifest::Recorder;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "riesz", version, about = "Riesz and logarithmic energies of point sets on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct EnergyArgs {
    /// Riesz exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Use the logarithmic energy instead.
    #[arg(long, conflicts_with = "p")]
    log: bool,
}

impl EnergyArgs {
    fn spec(self) -> Result<EnergySpec> {
        match (self.p, self.log) {
            (_, true) => Ok(EnergySpec::Log),
            (Some(p), false) => Ok(EnergySpec::riesz(p)?),
            (None, false) => Err(Usage::new("pass --p <P> or --log")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the energy of a configuration.
    Energy {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        energy: EnergyArgs,
        /// Print log E (finite at any p).
        #[arg(long)]
        log_domain: bool,
    },
    /// Print the gradient field and its sup-norm as JSON.
    Grad {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        energy: EnergyArgs,
        /// Multiply by d_min^(p+2).
        #[arg(long)]
        scaled: bool,
    },
    /// Run gradient descent and print the result as JSON.
    Descend {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        energy: EnergyArgs,
        /// JSON file with descent options; the flags below override it.
        #[arg(long)]
        opts: Option<PathBuf>,
        #[arg(long)]
        grad_tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        step_fraction: Option<f64>,
        /// Do not restrict the flow to the symmetry class of the input.
        #[arg(long)]
        no_symmetry: bool,
        /// Write every k-th iterate (and the last) as JSON lines.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a named or parametric configuration.
    Construct {
        /// t1 t2 t3 s-alpha s-shift f5 type1 grid theorem1 random
        family: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Comma-separated deleted rows, e.g. 0,1,2,3.
        #[arg(long)]
        mask: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Defaults to $RIESZ_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Descend from many starting points and group the critical points reached.
    Census {
        /// JSON list of init descriptors, or shorthand such as theorem1:m=10.
        #[arg(long)]
        inits: String,
        #[command(flatten)]
        energy: EnergyArgs,
        /// Records as JSON lines; existing records are reused.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = riesz_torus::census::DEFAULT_Q)]
        q: f64,
        /// Factor out translations only instead of translations and lattice symmetries.
        #[arg(long)]
        translations_only: bool,
        /// Fingerprint the inputs without descending.
        #[arg(long)]
        no_descent: bool,
        #[arg(long)]
        no_classify: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate closed-form log-energies of families over a range of p.
    PhaseScan {
        /// Comma-separated families (t1 t2 t3 s0 s-shift f5 s-min s-alpha=A).
        #[arg(long)]
        families: String,
        /// LO:HI:STEP
        #[arg(long)]
        p_range: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the exponent where two families have equal energy.
    Crossover {
        #[arg(long)]
        families: String,
        /// LO:HI
        #[arg(long)]
        bracket: String,
    },
    /// Run the acceptance checks; exit status 3 if any fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Read the deletion mask off a configuration reached from the striped construction.
    RecoverMask {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Count axis-parallel lines of points.
    GridScore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

/// A command-line mistake rather than a numerical problem.
#[derive(Debug)]
struct Usage(String);

impl Usage {
    fn new(msg: impl Into<String>) -> anyhow::Error {
        anyhow::Error::new(Usage(msg.into()))
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use riesz_torus::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter(_) | E::Format(_) | E::Json(_) | E::Io(_) | E::TooFewPoints(_) | E::SizeMismatch(..) => {
                    EXIT_USAGE
                }
                _ => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_NUMERICAL
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_config(path: &Path, rec: &mut Recorder) -> Result<Configuration> {
    rec.input(path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Configuration::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Write `text` to `out` (plus its manifest) or to stdout.
fn emit(text: &str, out: Option<&Path>, rec: &Recorder) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            rec.finish(&[path])
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn default_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("RIESZ_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| Usage::new(format!("RIESZ_SEED={v:?} is not an integer"))),
        Err(_) => Ok(0),
    }
}

fn parse_range<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Usage::new(format!("bad {what} {text:?}")))?;
    parts
        .try_into()
        .map_err(|_| Usage::new(format!("{what} needs {N} colon-separated numbers, got {text:?}")))
}

fn parse_families(text: &str) -> Result<Vec<Family>> {
    text.split(',').map(|f| Ok(Family::parse(f)?)).collect()
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Energy { config, energy, log_domain } => {
            let mut rec = Recorder::new("energy");
            let c = read_config(&config, &mut rec)?;
            let value = match energy.spec()? {
                EnergySpec::Log => log_energy(&c)?,
                EnergySpec::Riesz { p } if log_domain => log_domain_energy(&c, p)?,
                EnergySpec::Riesz { p } => riesz_energy(&c, p)?,
            };
            println!("{value}");
        }
        Command::Grad { config, energy, scaled } => {
            let mut rec = Recorder::new("grad");
            let c = read_config(&config, &mut rec)?;
            let g = gradient(&c, energy.spec()?, scaled)?;
            let body = json!({ "vectors": g.vectors, "scale": g.scale, "sup_norm": g.sup_norm() });
            println!("{body}");
        }
        Command::Descend {
            config,
            energy,
            opts,
            grad_tol,
            max_iters,
            step_fraction,
            no_symmetry,
            trajectory,
            every,
            out,
        } => {
            let mut rec = Recorder::new("descend");
            let c = read_config(&config, &mut rec)?;
            let mut options: DescentOptions = match &opts {
                Some(path) => {
                    rec.input(path);
                    serde_json::from_str(&std::fs::read_to_string(path)?)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => DescentOptions::default(),
            };
            options.grad_tol = grad_tol.unwrap_or(options.grad_tol);
            options.max_iters = max_iters.unwrap_or(options.max_iters);
            options.step_fraction = step_fraction.unwrap_or(options.step_fraction);
            options.preserve_symmetry &= !no_symmetry;
            if trajectory.is_some() {
                if every == 0 {
                    return Err(Usage::new("--every must be at least 1"));
                }
                options.record_trajectory_every = every;
            }
            let result = descend(&c, energy.spec()?, &options)?;
            if let Some(path) = &trajectory {
                let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
                for (iteration, frame) in result.trajectory.iter().flatten() {
                    let line = json!({ "iteration": iteration, "n": frame.len(), "points": frame.coords() });
                    writeln!(w, "{line}")?;
                }
                w.flush()?;
                rec.finish(&[path])?;
            }
            emit(&(serde_json::to_string(&result)? + "\n"), out.as_deref(), &rec)?;
        }
        Command::Construct {
            family,
            alpha,
            cols,
            rows,
            k,
            m,
            mask,
            n,
            seed,
            out,
        } => {
            let mut rec = Recorder::new("construct");
            let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Usage::new(format!("{family} needs --{flag}")));
            let config = match family.to_ascii_lowercase().as_str() {
                "s-alpha" => named(&NamedConfig::SAlpha {
                    alpha: alpha.ok_or_else(|| Usage::new("s-alpha needs --alpha"))?,
                })?,
                "type1" => named(&NamedConfig::TypeI {
                    cols: need(cols, "cols")?,
                    rows: need(rows, "rows")?,
                })?,
                "grid" => named(&NamedConfig::Grid { k: need(k, "k")? })?,
                "theorem1" => {
                    let mask_text = mask.as_deref().ok_or_else(|| Usage::new("theorem1 needs --mask"))?;
                    let rows: Vec<usize> = mask_text
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Usage::new(format!("bad mask {mask_text:?}")))?;
                    construct_theorem1(&ConstructionSpec::new(need(m, "m")?, rows)?)?
                }
                "random" => {
                    let s = default_seed(seed)?;
                    rec.seeds.push(s);
                    random_config(need(n, "n")?, s)?
                }
                other => named(
                    &NamedConfig::from_name(other).ok_or_else(|| Usage::new(format!("unknown family {other:?}")))?,
                )?,
            };
            emit(&(config.to_json() + "\n"), out.as_deref(), &rec)?;
        }
        Command::Census {
            inits,
            energy,
            out,
            report,
            jobs,
            q,
            translations_only,
            no_descent,
            no_classify,
            seed,
        } => {
            let mut rec = Recorder::new("census");
            let base_seed = default_seed(seed)?;
            rec.seeds.push(base_seed);
            if Path::new(&inits).is_file() {
                rec.input(Path::new(&inits));
            }
            let list = inits::parse(&inits, base_seed)?;
            let spec = energy.spec()?;
            let copts = CensusOptions {
                q,
                equiv_tol: 2.0 * q,
                group: if translations_only {
                    SymmetryGroup::TranslationsOnly
                } else {
                    SymmetryGroup::Full
                },
                descend: !no_descent,
                classify: !no_classify,
                jobs,
                ..Default::default()
            };
            let dopts = DescentOptions {
                record_history: false,
                ..Default::default()
            };
            let mut done = if out.is_file() {
                read_jsonl(BufReader::new(File::open(&out)?))
                    .with_context(|| format!("reading existing records in {}", out.display()))?
            } else {
                Vec::new()
            };
            done.retain(|r| r.spec == spec && list.get(r.index) == Some(&r.init));
            // Rewrite the kept records so a truncated tail never precedes new lines.
            write_jsonl(BufWriter::new(File::create(&out)?), &sorted(done.clone()))?;
            let todo = pending(&list, &done);
            let chunk = 4 * jobs.max(1);
            for batch in todo.chunks(chunk) {
                let fresh = run_records(batch, spec, &dopts, &copts)?;
                let mut f = BufWriter::new(OpenOptions::new().append(true).open(&out)?);
                write_jsonl(&mut f, &fresh)?;
                f.flush()?;
                done.extend(fresh);
            }
            let done = sorted(done);
            write_jsonl(BufWriter::new(File::create(&out)?), &done)?;
            let summary = build_report(&done, spec, &copts)?;
            std::fs::write(&report, serde_json::to_string_pretty(&summary)? + "\n")?;
            rec.finish(&[&out, &report])?;
            println!(
                "{} records, {} keyed, {} failed, {} distinct",
                summary.records, summary.keyed, summary.failed, summary.distinct
            );
        }
        Command::PhaseScan { families, p_range, out } => {
            let rec = Recorder::new("phase-scan");
            let fams = parse_families(&families)?;
            let [lo, hi, step] = parse_range::<3>(&p_range, "--p-range")?;
            let rows = phase_scan(&fams, lo, hi, step)?;
            let mut csv = String::from("p");
            for f in &fams {
                csv.push(',');
                csv.push_str(&f.label());
            }
            csv.push('\n');
            for (p, values) in rows {
                csv.push_str(&format!("{p:.16e}"));
                for v in values {
                    csv.push_str(&format!(",{v:.16e}"));
                }
                csv.push('\n');
            }
            emit(&csv, out.as_deref(), &rec)?;
        }
        Command::Crossover { families, bracket } => {
            let fams = parse_families(&families)?;
            let [a, b] = fams.as_slice() else {
                return Err(Usage::new("--families needs exactly two families"));
            };
            let [lo, hi] = parse_range::<2>(&bracket, "--bracket")?;
            println!("{}", crossover(a, b, lo, hi)?);
        }
        Command::Verify { suite } => {
            let outcomes = run_suite(suite);
            for o in &outcomes {
                println!("{o}");
            }
            if !all_passed(&outcomes) {
                return Ok(EXIT_VERIFY);
            }
        }
        Command::RecoverMask { config, m } => {
            let mut rec = Recorder::new("recover-mask");
            let c = read_config(&config, &mut rec)?;
            println!("{}", serde_json::to_string(&recover_mask(&c, m)?)?);
        }
        Command::GridScore { config, tol } => {
            let mut rec = Recorder::new("grid-score");
            let c = read_config(&config, &mut rec)?;
            if !(tol > 0.0) {
                return Err(Usage::new("--tol must be positive"));
            }
            println!("{}", serde_json::to_string(&grid_score(&c, tol))?);
        }
    }
    Ok(0)
}

fn sorted(mut records: Vec<riesz_torus::census::CensusRecord>) -> Vec<riesz_torus::census::CensusRecord> {
    records.sort_by_key(|r| r.index);
    records
}
