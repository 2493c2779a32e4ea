//! Command-line front end: `simulate`, `fit-null`, `score`, `detect` and
//! `evaluate`.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when the inputs cannot
//! be read or processed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dbirs::{
    bonferroni_baseline, fixed_threshold_baseline, run_dbirs_on, DbirsConfig, ScoreSource,
};
use crate::error::{Error, Result};
use crate::evaluate::{aggregate_replicates, MetricsReport, ReplicateOutcome, DEFAULT_H_KB};
use crate::family::Family;
use crate::io::sumstats::{read_boot_matrix, write_boot_matrix, BootMatrixFile};
use crate::io::{
    read_matrix, read_regions, read_sumstats, write_matrix, write_regions, write_sumstats,
    MatrixFile, RegionFile, RegionRecord, SumstatsFile,
};
use crate::null_model::{fit_null, NullModel};
use crate::region::Region;
use crate::sbirs::{run_sbirs, DetectionResult};
use crate::score::{compute_score_set, GenotypeMatrix, Multipliers, ScoreSet, DEFAULT_BOOTSTRAP};
use crate::simulate::{simulate_replicate, SimConfig, Trait};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const GENOTYPES_FILE: &str = "genotypes.tsv";
pub const PHENOTYPE_FILE: &str = "phenotype.tsv";
pub const COVARIATES_FILE: &str = "covariates.tsv";
pub const VARIANTS_FILE: &str = "variants.tsv";
pub const TRUTH_FILE: &str = "truth.tsv";
pub const CONFIG_FILE: &str = "config.json";
pub const REGIONS_FILE: &str = "regions.tsv";

#[derive(Debug, Parser)]
#[command(name = "birs", version, about = "Signal region detection with sBiRS and dBiRS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one replicate into a directory.
    Simulate(SimulateArgs),
    /// Fit the null model and write it as JSON.
    FitNull(FitNullArgs),
    /// Compute scores and bootstrap pseudo-scores (summary statistics).
    Score(ScoreArgs),
    /// Detect signal regions.
    Detect(DetectArgs),
    /// Aggregate metrics over a directory of replicates.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraitArg {
    Continuous,
    Dichotomous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Binomial,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Gaussian => Family::GaussianIdentity,
            FamilyArg::Binomial => Family::BinomialLogit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Sbirs,
    Dbirs,
    BonferroniBaseline,
    FixedThresholdBaseline,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SimConfig::default().n)]
    n: usize,
    #[arg(long, default_value_t = SimConfig::default().p)]
    p: usize,
    #[arg(long, default_value_t = SimConfig::default().ld_rho)]
    ld_rho: f64,
    #[arg(long, default_value_t = SimConfig::default().maf_range.0)]
    maf_low: f64,
    #[arg(long, default_value_t = SimConfig::default().maf_range.1)]
    maf_high: f64,
    /// Number of causal windows; 0 simulates the global null.
    #[arg(long, default_value_t = SimConfig::default().n_causal_windows)]
    windows: usize,
    #[arg(long, default_value_t = SimConfig::default().window_bp)]
    window_bp: u64,
    #[arg(long, default_value_t = SimConfig::default().causal_fraction)]
    causal_fraction: f64,
    #[arg(long, default_value_t = SimConfig::default().effect_c)]
    effect_c: f64,
    #[arg(long, value_enum, default_value_t = TraitArg::Continuous)]
    r#trait: TraitArg,
    #[arg(long, default_value_t = SimConfig::default().spacing_bp)]
    spacing_bp: u64,
    #[arg(long, default_value_t = SimConfig::default().seed)]
    seed: u64,
}

#[derive(Debug, clap::Args)]
struct FitNullArgs {
    /// Single-column outcome matrix.
    #[arg(long)]
    phenotype: PathBuf,
    /// Covariate matrix whose first column is the intercept.
    #[arg(long)]
    covariates: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct ScoreArgs {
    #[arg(long)]
    genotypes: PathBuf,
    /// Null model JSON written by `fit-null`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    n_boot: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Summary statistics output; the bootstrap matrix goes to `<out>.boot`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct DetectArgs {
    #[arg(long, value_enum, default_value_t = Mode::Dbirs)]
    mode: Mode,
    /// Genotype matrix (requires --model).
    #[arg(long, requires = "model", conflicts_with = "sumstats")]
    genotypes: Option<PathBuf>,
    #[arg(long, requires = "genotypes")]
    model: Option<PathBuf>,
    /// Summary statistics written by `score`.
    #[arg(long, required_unless_present = "genotypes")]
    sumstats: Option<PathBuf>,
    /// Bootstrap file; defaults to the one named in the sumstats header.
    #[arg(long, requires = "sumstats")]
    boot: Option<PathBuf>,
    #[arg(long, default_value_t = DbirsConfig::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = DbirsConfig::default().truncation_s)]
    truncation_s: u32,
    #[arg(long, default_value_t = DbirsConfig::default().block_size)]
    block_size: usize,
    /// Bootstrap replicates (genotype input), or the expected count
    /// (sumstats input).
    #[arg(long)]
    n_boot: Option<usize>,
    /// Multiplier seed (genotype input), or the expected seed (sumstats
    /// input).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the block stage; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output region file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct EvaluateArgs {
    /// Directory whose subdirectories each hold one replicate
    /// (truth.tsv, variants.tsv and region files).
    #[arg(long)]
    replicates: PathBuf,
    /// Region file name inside each replicate directory.
    #[arg(long, default_value = REGIONS_FILE)]
    detected: String,
    /// Method label for the main region file.
    #[arg(long, default_value = "dbirs")]
    method: String,
    /// Extra methods as NAME=FILE, read from each replicate directory.
    #[arg(long = "baseline", value_parser = parse_baseline)]
    baselines: Vec<(String, String)>,
    /// Distances in kb for FDR(h).
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_H_KB)]
    h_kb: Vec<u32>,
    /// Output prefix: writes <prefix>.json, <prefix>.csv and
    /// <prefix>.selection.csv.
    #[arg(long)]
    out: PathBuf,
}

fn parse_baseline(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((name, file)) if !name.is_empty() && !file.is_empty() => {
            Ok((name.to_string(), file.to_string()))
        }
        _ => Err(format!("expected NAME=FILE, got {s:?}")),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::FitNull(a) => fit_null_cmd(a),
        Command::Score(a) => score(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config types serialize")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_model(path: &Path) -> Result<NullModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path.display().to_string(), e.line(), e.to_string()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let config = SimConfig {
        n: a.n,
        p: a.p,
        ld_rho: a.ld_rho,
        maf_range: (a.maf_low, a.maf_high),
        n_causal_windows: a.windows,
        window_bp: a.window_bp,
        causal_fraction: a.causal_fraction,
        effect_c: a.effect_c,
        trait_type: match a.r#trait {
            TraitArg::Continuous => Trait::Continuous,
            TraitArg::Dichotomous => Trait::Dichotomous,
        },
        spacing_bp: a.spacing_bp,
        seed: a.seed,
    };
    let rep = simulate_replicate(&config)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let cfg = to_json(&config);

    let g = &rep.genotypes;
    write_matrix(
        &a.out.join(GENOTYPES_FILE),
        &MatrixFile::from_genotypes(g).with_meta("config", &cfg),
    )?;
    let mut variants = MatrixFile::from_genotypes(g);
    variants.values = ndarray::Array2::zeros((0, g.p()));
    write_matrix(&a.out.join(VARIANTS_FILE), &variants.with_meta("config", &cfg))?;
    write_matrix(
        &a.out.join(PHENOTYPE_FILE),
        &MatrixFile::from_vector("y", &rep.y).with_meta("config", &cfg),
    )?;
    write_matrix(
        &a.out.join(COVARIATES_FILE),
        &MatrixFile::from_covariates(&rep.covariates).with_meta("config", &cfg),
    )?;
    let positions = g.positions();
    let truth = RegionFile {
        meta: vec![
            ("config".into(), cfg.clone()),
            ("effects".into(), to_json(&rep.truth.beta)),
        ],
        records: rep
            .truth
            .causal_windows
            .iter()
            .map(|w| RegionRecord {
                chrom: crate::io::regions::DEFAULT_CHROM.into(),
                region: *w,
                start_bp: Some(positions[w.start]),
                end_bp: Some(positions[w.end - 1] + 1),
                stat: None,
                threshold: None,
            })
            .collect(),
    };
    write_regions(&a.out.join(TRUTH_FILE), &truth)?;
    let pretty = serde_json::to_string_pretty(&json!({
        "config": config,
        "truth": rep.truth,
    }))
    .expect("serializable");
    write_text(&a.out.join(CONFIG_FILE), &pretty)
}

fn fit_null_cmd(a: FitNullArgs) -> Result<()> {
    let y = read_matrix(&a.phenotype)?.into_vector()?;
    let x = read_matrix(&a.covariates)?.into_covariates()?;
    let model = fit_null(y.view(), &x, a.family.into())?;
    let text = serde_json::to_string(&model).expect("model serializes");
    write_text(&a.out, &text)
}

fn boot_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".boot");
    PathBuf::from(s)
}

fn score(a: ScoreArgs) -> Result<()> {
    let g = read_matrix(&a.genotypes)?.into_genotypes()?;
    let model = read_model(&a.model)?;
    let scores = compute_score_set(&g, &model, a.n_boot, a.seed)?;
    let hash = model.fingerprint();
    let boot = boot_path(&a.out);
    let boot_name = boot
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = SumstatsFile::new(
        g.positions().to_vec(),
        g.maf().to_vec(),
        scores.u.to_vec(),
    )?
    .with_meta("seed", &a.seed.to_string())
    .with_meta("n_boot", &a.n_boot.to_string())
    .with_meta("family", model.family.name())
    .with_meta("model_hash", &format!("{hash:016x}"))
    .with_meta("boot_file", &boot_name);
    write_boot_matrix(&boot, &BootMatrixFile::from_score_set(&scores, hash))?;
    write_sumstats(&a.out, &file)
}

/// Everything in a `detect` run that can change its output. Worker count is
/// left out on purpose: results do not depend on it.
#[derive(Serialize)]
struct ResolvedDetect<'a> {
    mode: Mode,
    alpha: f64,
    truncation_s: u32,
    block_size: usize,
    n_boot: usize,
    seed: u64,
    input: BTreeMap<&'a str, String>,
}

fn detect(a: DetectArgs) -> Result<()> {
    let mut input = BTreeMap::new();
    let mut config = DbirsConfig {
        alpha: a.alpha,
        truncation_s: a.truncation_s,
        block_size: a.block_size,
        n_boot: a.n_boot.unwrap_or(DEFAULT_BOOTSTRAP),
        seed: a.seed.unwrap_or(1),
        workers: a.workers,
    };
    config.validate()?;

    let result;
    let positions: Vec<u64>;
    if let (Some(gpath), Some(mpath)) = (&a.genotypes, &a.model) {
        input.insert("genotypes", gpath.display().to_string());
        input.insert("model", mpath.display().to_string());
        let g = read_matrix(gpath)?.into_genotypes()?;
        let model = read_model(mpath)?;
        positions = g.positions().to_vec();
        result = detect_from_genotypes(a.mode, &g, &model, &config)?;
    } else {
        let spath = a.sumstats.as_ref().expect("clap requires an input");
        let stats = read_sumstats(spath)?;
        let bpath = match (&a.boot, stats.meta("boot_file")) {
            (Some(b), _) => b.clone(),
            (None, Some(name)) if !name.is_empty() => spath.with_file_name(name),
            _ => boot_path(spath),
        };
        let boot = read_boot_matrix(&bpath)?;
        if let Some(seed) = a.seed {
            if seed != boot.seed {
                return Err(Error::InvalidInput(format!(
                    "--seed {seed} does not match the bootstrap file's seed {}",
                    boot.seed
                )));
            }
        }
        if let Some(nb) = a.n_boot {
            if nb != boot.values.nrows() {
                return Err(Error::InvalidInput(format!(
                    "--n-boot {nb} does not match the bootstrap file's {} rows",
                    boot.values.nrows()
                )));
            }
        }
        config.seed = boot.seed;
        config.n_boot = boot.values.nrows();
        input.insert("sumstats", spath.display().to_string());
        input.insert("boot", bpath.display().to_string());
        positions = stats.positions.clone();
        let scores = stats.score_set(boot)?;
        result = detect_from_scores(a.mode, &scores, &config)?;
    }

    let resolved = ResolvedDetect {
        mode: a.mode,
        alpha: config.alpha,
        truncation_s: config.truncation_s,
        block_size: config.block_size,
        n_boot: config.n_boot,
        seed: config.seed,
        input,
    };
    let file = RegionFile::from_detection(&result, Some(&positions))
        .with_meta("config", &to_json(&resolved))
        .with_meta("global_stat", &result.global_stat.to_string())
        .with_meta("global_threshold", &result.global_threshold.to_string());
    write_regions(&a.out, &file)
}

fn detect_from_genotypes(
    mode: Mode,
    g: &GenotypeMatrix,
    model: &NullModel,
    config: &DbirsConfig,
) -> Result<DetectionResult> {
    if g.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes have {} samples, null model has {}",
            g.n(),
            model.n()
        )));
    }
    if mode == Mode::Sbirs {
        let scores = compute_score_set(g, model, config.n_boot, config.seed)?;
        return detect_from_scores(mode, &scores, config);
    }
    let multipliers = Multipliers::generate(model, config.n_boot, config.seed)?;
    let source = ScoreSource::Genotypes {
        g,
        model,
        multipliers: &multipliers,
    };
    run_mode(mode, &source, config)
}

fn detect_from_scores(mode: Mode, scores: &ScoreSet, config: &DbirsConfig) -> Result<DetectionResult> {
    if mode == Mode::Sbirs {
        return run_sbirs(scores, Region::full(scores.p())?, &config.sbirs());
    }
    run_mode(mode, &ScoreSource::Scores(scores), config)
}

fn run_mode(mode: Mode, source: &ScoreSource<'_>, config: &DbirsConfig) -> Result<DetectionResult> {
    match mode {
        Mode::Dbirs => Ok(run_dbirs_on(source, config)?.central.detection),
        Mode::BonferroniBaseline => bonferroni_baseline(source, config),
        Mode::FixedThresholdBaseline => fixed_threshold_baseline(source, config),
        Mode::Sbirs => unreachable!("handled by the caller"),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(&a.replicates)
        .map_err(|e| Error::io(&a.replicates, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} has no replicate subdirectories",
            a.replicates.display()
        )));
    }
    let mut methods = vec![(a.method.clone(), a.detected.clone())];
    methods.extend(a.baselines.iter().cloned());

    let mut per_method: Vec<Vec<ReplicateOutcome>> = vec![Vec::new(); methods.len()];
    let mut positions0: Option<Vec<u64>> = None;
    for dir in &dirs {
        let truth = read_regions(&dir.join(TRUTH_FILE))?.regions();
        let variants = read_matrix(&dir.join(VARIANTS_FILE))?;
        let positions = variants.positions.ok_or_else(|| {
            Error::InvalidInput(format!("{} lacks positions", dir.join(VARIANTS_FILE).display()))
        })?;
        if let Some(p0) = &positions0 {
            if p0.len() != positions.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} has {} variants, expected {}",
                    dir.display(),
                    positions.len(),
                    p0.len()
                )));
            }
        } else {
            positions0 = Some(positions.clone());
        }
        for (k, (_, file)) in methods.iter().enumerate() {
            let detected = read_regions(&dir.join(file))?.regions();
            per_method[k].push(ReplicateOutcome {
                truth: truth.clone(),
                detected,
                positions: positions.clone(),
            });
        }
    }
    let positions = positions0.expect("at least one replicate");
    let p = positions.len();

    let mut reports: BTreeMap<String, MetricsReport> = BTreeMap::new();
    let mut csv = MetricsReport::csv_header(&a.h_kb);
    csv.push('\n');
    for ((name, _), outcomes) in methods.iter().zip(&per_method) {
        let report = aggregate_replicates(outcomes, &a.h_kb, p)?;
        csv.push_str(&report.csv_row(name));
        csv.push('\n');
        reports.insert(name.clone(), report);
    }

    let mut sel = String::from("index,position");
    for (name, _) in &methods {
        sel.push(',');
        sel.push_str(name);
    }
    sel.push('\n');
    for j in 0..p {
        sel.push_str(&format!("{j},{}", positions[j]));
        for (name, _) in &methods {
            sel.push_str(&format!(",{}", reports[name].selection_prob[j]));
        }
        sel.push('\n');
    }

    let prefix = a.out.as_os_str().to_string_lossy().into_owned();
    let json = serde_json::to_string_pretty(&json!({
        "replicates": dirs.len(),
        "h_kb": a.h_kb,
        "methods": reports,
    }))
    .expect("serializable");
    write_text(Path::new(&format!("{prefix}.json")), &json)?;
    write_text(Path::new(&format!("{prefix}.csv")), &csv)?;
    write_text(Path::new(&format!("{prefix}.selection.csv")), &sel)
}
