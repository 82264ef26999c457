//! `patchdyn` subcommands. Every command writes a short summary to stdout
//! and, with `--out DIR`, CSV/JSON artifacts into DIR.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use patchdyn_core::analysis::bounds::check_constant_equilibrium;
use patchdyn_core::analysis::conjecture::{conjecture_probe, ProbeFamily, ProbeOptions};
use patchdyn_core::analysis::crossings::{find_crossings_with, ScanOptions};
use patchdyn_core::analysis::{
    classify_two_block, classify_two_patch, compare_infinity_vs_zero, two_block_reduce,
};
use patchdyn_core::dynamics::{equilibrium, fmt_real, vector_field};
use patchdyn_core::linalg;
use patchdyn_core::mixing::limit_equilibrium;
use patchdyn_core::random::geometric_grid;
use patchdyn_core::reference::{evaluate_row, reference_set, RowOutcome};
use patchdyn_core::sis::{logistic_to_sis, minimal_total_population, SisSpec};
use patchdyn_core::{derivative_at_zero, ModelSpec, PatchModel, SisModel, TwoBlockPartition};

pub mod error;

pub use error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "patchdyn",
    version,
    about = "Equilibria and dispersal analysis for multi-patch logistic models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalar diagnostics: derivative at β = 0, perfect-mixing limit, verdicts.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// X_T*(β) on a geometric grid with refined crossings of ΣK.
    Scan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e4)]
        beta_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region of a two-patch model, or the dispersal verdict for n > 2.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce two blocks of identical patches to a two-patch model.
    TwoBlock {
        #[arg(long)]
        model: PathBuf,
        /// 1-based patch indices of block I, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        block_i: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// R0 and endemic total of an SIS model over a grid of ε.
    Sis {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e4)]
        epsilon_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map a logistic model to the equivalent SIS model.
    SisMap {
        #[arg(long)]
        model: PathBuf,
        /// Total population N, or `auto` for twice the minimal admissible value.
        #[arg(long, default_value = "auto")]
        total_n: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the built-in three-patch reference rows.
    Table3 {
        #[arg(long, default_value_t = 1e4)]
        beta_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random search for models with 1/α ∈ ker Γ and X_T*(β) < ΣK.
    ConjectureProbe {
        #[arg(long, default_value_t = 200)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Family::General)]
        family: Family,
        #[arg(long, default_value_t = 1e3)]
        beta_max: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    General,
    Balanced,
    TwoPatch,
}

impl From<Family> for ProbeFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::General => ProbeFamily::General,
            Family::Balanced => ProbeFamily::Balanced,
            Family::TwoPatch => ProbeFamily::TwoPatch,
        }
    }
}

/// Sizes the global rayon pool from `PATCHDYN_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PATCHDYN_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Input(format!(
            "PATCHDYN_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Analyze { model, out } => run_analyze(model, out.as_deref(), stdout),
        Command::Scan {
            model,
            beta_max,
            points,
            out,
        } => run_scan(model, *beta_max, *points, out.as_deref(), stdout),
        Command::Classify { model, out } => run_classify(model, out.as_deref(), stdout),
        Command::TwoBlock {
            model,
            block_i,
            out,
        } => run_two_block(model, block_i, out.as_deref(), stdout),
        Command::Sis {
            model,
            epsilon_max,
            points,
            out,
        } => run_sis(model, *epsilon_max, *points, out.as_deref(), stdout),
        Command::SisMap {
            model,
            total_n,
            out,
        } => run_sis_map(model, total_n, out.as_deref(), stdout),
        Command::Table3 {
            beta_max,
            points,
            out,
        } => run_table3(*beta_max, *points, out.as_deref(), stdout),
        Command::ConjectureProbe {
            samples,
            seed,
            family,
            beta_max,
            points,
            out,
        } => run_conjecture_probe(
            *samples,
            *seed,
            *family,
            *beta_max,
            *points,
            out.as_deref(),
            stdout,
        ),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {}",
            path.display(),
            e.line(),
            e.column(),
            e
        ))
    })
}

pub fn load_model(path: &Path) -> Result<PatchModel> {
    let spec: ModelSpec = parse_json(path)?;
    Ok(PatchModel::try_from(spec)?)
}

pub fn load_sis(path: &Path) -> Result<SisModel> {
    let spec: SisSpec = parse_json(path)?;
    Ok(SisModel::try_from(spec)?)
}

fn out_dir(out: Option<&Path>) -> Result<Option<&Path>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    }
    Ok(out)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn say(stdout: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(stdout, "{}", line.as_ref()).map_err(|e| CliError::Input(format!("stdout: {e}")))
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub n: usize,
    pub sum_k: f64,
    pub kernel: Vec<f64>,
    pub derivative_at_zero: f64,
    pub x_t_infinity: f64,
    pub e_infinity: Vec<f64>,
    pub r_eff: f64,
    pub zero_eigenvalue_simple: bool,
    pub max_nonzero_real_part: f64,
    pub capacity_in_kernel: bool,
    pub max_deviation_from_capacity: f64,
    pub verdict: Option<patchdyn_core::DispersalVerdict>,
    pub verdict_error: Option<String>,
}

pub fn analyze(model: &PatchModel) -> Result<Analysis> {
    model.require_migration()?;
    let kernel = model.gamma().kernel_vector()?.normalized().to_vec();
    let lim = limit_equilibrium(model)?;
    let spectral = model.gamma().spectral_check();
    let constancy = check_constant_equilibrium(model, &geometric_grid(1e-3, 1e3, 13))?;
    let (verdict, verdict_error) = match compare_infinity_vs_zero(model) {
        Ok(v) => (Some(v), None),
        Err(e) if e.is_validation() => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok(Analysis {
        n: model.n(),
        sum_k: model.sum_k(),
        kernel,
        derivative_at_zero: derivative_at_zero(model)?,
        x_t_infinity: lim.x_t_infinity,
        e_infinity: lim.e_infinity,
        r_eff: lim.r_eff,
        zero_eigenvalue_simple: spectral.zero_is_simple(),
        max_nonzero_real_part: spectral.max_nonzero_real_part,
        capacity_in_kernel: constancy.capacity_in_kernel,
        max_deviation_from_capacity: constancy.max_deviation,
        verdict,
        verdict_error,
    })
}

pub fn run_analyze(path: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(path)?;
    let a = analyze(&model)?;
    say(stdout, format!("sum K            {}", a.sum_k))?;
    say(stdout, format!("dX_T/dbeta(0)    {}", a.derivative_at_zero))?;
    say(stdout, format!("X_T(+inf)        {}", a.x_t_infinity))?;
    if let Some(v) = &a.verdict {
        say(
            stdout,
            format!(
                "X_T(+inf) vs sum K: {} (implied by hypotheses: {})",
                v.numerical_relation.symbol(),
                v.relation_at_infinity.symbol()
            ),
        )?;
    }
    if let Some(dir) = out_dir(out)? {
        write_json(dir, "analysis.json", &a)?;
    }
    Ok(())
}

pub fn run_scan(
    path: &Path,
    beta_max: f64,
    points: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model = load_model(path)?;
    let scan = find_crossings_with(
        &model,
        &ScanOptions {
            beta_max,
            points,
            ..Default::default()
        },
    )?;
    say(stdout, format!("level (sum K)    {}", scan.level))?;
    say(
        stdout,
        format!("sign pattern     {}", scan.sign_pattern_string()),
    )?;
    for c in &scan.crossings {
        say(
            stdout,
            format!(
                "crossing         beta = {}  gap = {:e}",
                fmt_real(c.beta),
                c.gap
            ),
        )?;
    }
    for t in &scan.tangency_suspected {
        say(
            stdout,
            format!("tangency?        beta in [{}, {}]", t[0], t[1]),
        )?;
    }
    if !scan.failures.is_empty() {
        say(stdout, format!("unsolved points  {}", scan.failures.len()))?;
    }
    if let Some(dir) = out_dir(out)? {
        scan.write_csv(create(dir, "scan.csv")?)?;
        write_json(dir, "scan.json", &scan.summary(&model))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Classification {
    TwoPatch(patchdyn_core::RegionVerdict),
    Verdict(patchdyn_core::DispersalVerdict),
}

pub fn run_classify(path: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(path)?;
    let result = if model.n() == 2 {
        let g = model.gamma();
        let (r, k) = (model.r(), model.k());
        let v = classify_two_patch(r[0], r[1], k[0], k[1], g.get(0, 1), g.get(1, 0))?;
        say(stdout, format!("region           {:?}", v.region))?;
        if let Some(b0) = v.beta0 {
            say(stdout, format!("beta0            {}", fmt_real(b0)))?;
        }
        Classification::TwoPatch(v)
    } else {
        let v = compare_infinity_vs_zero(&model)?;
        say(
            stdout,
            format!("X_T(+inf) vs sum K: {}", v.relation_at_infinity.symbol()),
        )?;
        say(
            stdout,
            format!("matched          {:?}", v.conditions_matched),
        )?;
        Classification::Verdict(v)
    };
    if let Some(dir) = out_dir(out)? {
        write_json(dir, "classify.json", &result)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LiftCheck {
    beta: f64,
    reduced: Vec<f64>,
    lifted: Vec<f64>,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct TwoBlockReport {
    partition: TwoBlockPartition,
    reduced: PatchModel,
    region: Option<patchdyn_core::RegionVerdict>,
    region_error: Option<String>,
    lifts: Vec<LiftCheck>,
}

pub fn run_two_block(
    path: &Path,
    block_i: &[usize],
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model = load_model(path)?;
    if block_i.contains(&0) {
        return Err(CliError::Input(
            "--block-i takes 1-based patch indices".into(),
        ));
    }
    let zero_based: Vec<usize> = block_i.iter().map(|i| i - 1).collect();
    let part = TwoBlockPartition::new(&model, &zero_based)?;
    let reduced = two_block_reduce(&model, &part)?;
    let (region, region_error) = match classify_two_block(&reduced, part.p(), part.q()) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut lifts = Vec::new();
    for beta in [0.1, 1.0, 10.0] {
        let y = equilibrium(&reduced, beta)?;
        let lifted = part.lift([y.x[0], y.x[1]]);
        let residual = linalg::max_abs(&vector_field(&model, beta, &lifted));
        lifts.push(LiftCheck {
            beta,
            reduced: y.x,
            lifted,
            residual,
        });
    }
    say(
        stdout,
        format!("blocks           p = {}, q = {}", part.p(), part.q()),
    )?;
    match (&region, &region_error) {
        (Some(v), _) => {
            say(stdout, format!("region           {:?}", v.region))?;
            if let Some(b0) = v.beta0 {
                say(stdout, format!("beta0            {}", fmt_real(b0)))?;
            }
        }
        (None, Some(e)) => say(stdout, format!("region           {e}"))?,
        _ => {}
    }
    let worst = lifts.iter().map(|l| l.residual).fold(0.0, f64::max);
    say(stdout, format!("lift residual    {worst:e}"))?;
    if let Some(dir) = out_dir(out)? {
        write_json(
            dir,
            "two_block.json",
            &TwoBlockReport {
                partition: part,
                reduced,
                region,
                region_error,
                lifts,
            },
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SisReport {
    n_star: Vec<f64>,
    r0_infinity: f64,
    total_at_infinity: f64,
    disease_free_at_infinity: bool,
    derivative_at_zero: Option<f64>,
    derivative_error: Option<String>,
}

pub fn run_sis(
    path: &Path,
    epsilon_max: f64,
    points: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let sis = load_sis(path)?;
    if epsilon_max.partial_cmp(&1e-3) != Some(std::cmp::Ordering::Greater) || points < 2 {
        return Err(CliError::Input(
            "need --epsilon-max > 1e-3 and --points >= 2".into(),
        ));
    }
    let inf = sis.total_infection_at_infinity();
    let (derivative_at_zero, derivative_error) = match sis.derivative_at_zero() {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    say(stdout, format!("R0(+inf)         {}", inf.r0_infinity))?;
    say(stdout, format!("T(+inf)          {}", inf.total))?;
    if let Some(d) = derivative_at_zero {
        say(stdout, format!("dT/deps(0)       {d}"))?;
    }
    if let Some(eps) = sis.epsilon() {
        let r0 = sis.r0(eps)?;
        let t = sis.endemic_equilibrium(eps)?.total();
        say(stdout, format!("at epsilon {eps}: R0 = {r0}, T = {t}"))?;
    }
    if let Some(dir) = out_dir(out)? {
        let grid = geometric_grid(1e-3, epsilon_max, points);
        let mut wr = csv::Writer::from_writer(create(dir, "sis.csv")?);
        let io = |e: csv::Error| CliError::Input(format!("sis.csv: {e}"));
        wr.write_record(["epsilon", "R0", "T"]).map_err(io)?;
        for eps in grid {
            let r0 = sis.r0(eps)?;
            let t = sis.endemic_equilibrium(eps)?.total();
            wr.write_record([fmt_real(eps), fmt_real(r0), fmt_real(t)])
                .map_err(io)?;
        }
        wr.flush()
            .map_err(|e| CliError::Input(format!("sis.csv: {e}")))?;
        write_json(
            dir,
            "sis.json",
            &SisReport {
                n_star: sis.n_star(),
                r0_infinity: inf.r0_infinity,
                total_at_infinity: inf.total,
                disease_free_at_infinity: inf.disease_free,
                derivative_at_zero,
                derivative_error,
            },
        )?;
    }
    Ok(())
}

pub fn run_sis_map(
    path: &Path,
    total_n: &str,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let model = load_model(path)?;
    let n = match total_n.trim() {
        "auto" => None,
        v => Some(v.parse::<f64>().map_err(|_| {
            CliError::Input(format!("--total-n expects a number or auto, got {v:?}"))
        })?),
    };
    let sis = logistic_to_sis(&model, n)?;
    say(
        stdout,
        format!("minimal N        {}", minimal_total_population(&model)?),
    )?;
    say(stdout, format!("N                {}", sis.total_n()))?;
    let spec = SisSpec::from(sis);
    match out_dir(out)? {
        Some(dir) => write_json(dir, "sis_model.json", &spec)?,
        None => say(
            stdout,
            serde_json::to_string_pretty(&spec).expect("serializable"),
        )?,
    }
    Ok(())
}

pub fn table3_outcomes(beta_max: f64, points: usize) -> Result<Vec<RowOutcome>> {
    let set = reference_set();
    let rows: Vec<_> = set
        .rows
        .par_iter()
        .map(|row| evaluate_row(&set, row, beta_max, points))
        .collect();
    rows.into_iter()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

pub fn run_table3(
    beta_max: f64,
    points: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let set = reference_set();
    let outcomes = table3_outcomes(beta_max, points)?;
    say(
        stdout,
        format!(
            "{:<7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}  {}",
            "row", "dX/db(0)", "expected", "X(+inf)", "expected", "crossings", "pattern", "status"
        ),
    )?;
    for (row, o) in set.rows.iter().zip(&outcomes) {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        let note = if o.reconstructed {
            " (reconstructed)"
        } else {
            ""
        };
        say(
            stdout,
            format!(
                "{:<7} {:>9.4} {:>9.2} {:>9.4} {:>9.2} {:>9} {:>8}  {status}{note}",
                o.label,
                o.derivative,
                row.derivative,
                o.limit,
                row.limit,
                o.crossings.len(),
                o.sign_pattern
            ),
        )?;
    }
    if let Some(dir) = out_dir(out)? {
        write_json(dir, "table3.json", &outcomes)?;
        let mut wr = csv::Writer::from_writer(create(dir, "table3.csv")?);
        let io = |e: csv::Error| CliError::Input(format!("table3.csv: {e}"));
        wr.write_record([
            "row",
            "derivative",
            "expected_derivative",
            "limit",
            "expected_limit",
            "crossings",
            "sign_pattern",
            "passed",
        ])
        .map_err(io)?;
        for (row, o) in set.rows.iter().zip(&outcomes) {
            wr.write_record([
                o.label.clone(),
                fmt_real(o.derivative),
                row.derivative.to_string(),
                fmt_real(o.limit),
                row.limit.to_string(),
                o.crossings.len().to_string(),
                o.sign_pattern.clone(),
                o.passed().to_string(),
            ])
            .map_err(io)?;
        }
        wr.flush()
            .map_err(|e| CliError::Input(format!("table3.csv: {e}")))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn run_conjecture_probe(
    samples: u64,
    seed: u64,
    family: Family,
    beta_max: f64,
    points: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let opts = ProbeOptions {
        beta_max,
        points,
        ..Default::default()
    };
    let report = conjecture_probe(samples, seed, family.into(), &opts)?;
    say(stdout, format!("samples          {}", report.samples))?;
    say(stdout, format!("min margin       {:e}", report.min_margin))?;
    say(stdout, format!("violations       {}", report.violations))?;
    if report.solver_failures > 0 {
        say(
            stdout,
            format!("solver failures  {}", report.solver_failures),
        )?;
    }
    if let Some(dir) = out_dir(out)? {
        write_json(dir, "conjecture.json", &report)?;
    }
    Ok(())
}
