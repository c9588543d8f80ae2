//! Batch pipeline: `smooth → fpca → fit-predict → report`, plus a
//! `synthetic` mode that checks the regression on generated data.
//!
//! Every command computes its complete output set in memory first and only
//! then writes it, so an invalid configuration or input never leaves partial
//! results behind.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::{make_bspline_basis, select_basis_count_many, smooth_series, CandidateScore, FunctionalDataset};
use crate::error::{FdaError, Result};
use crate::eval::{generate_synthetic, mse_curve, prediction_table, PredictionInputs, SplitSpec};
use crate::ffreg::{fit_mfflr, predict_response, reconstruct_beta, MfflrModel};
use crate::fpca::{fpca_fit_with, perturbation_curves, score_pairs, FpcaModel, FpcaOptions};
use crate::ingest::{
    parse_population, parse_series, restrict_window, scale_per_capita, ColumnSchema, PopulationTable, ScaledSeries,
    Variable,
};

pub use config::PipelineConfig;
use output::{num, Artifacts, Provenance, Stamped};

pub const SMOOTHED_FILE: &str = "smoothed.json";
pub const EXPLAINED_VARIANCE_FILE: &str = "explained_variance.csv";
pub const MSE_FILE: &str = "mse.csv";
pub const OBS_PRED_FILE: &str = "obs_pred.csv";
pub const REPORT_FILE: &str = "summary.md";

/// Perturbation plots are exported for at most this many components.
const PERTURBATION_COMPONENTS: usize = 4;
/// Points per axis of exported β surfaces.
const BETA_GRID_POINTS: usize = 21;

#[derive(Debug, Parser)]
#[command(name = "fda", version, about = "Functional data analysis of epidemic curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smooth daily series into B-spline curves.
    Smooth(CommonArgs),
    /// Functional PCA of every variable on the training regions.
    Fpca(CommonArgs),
    /// Fit the response models and predict the test regions.
    FitPredict(CommonArgs),
    /// Write a markdown summary of the previous outputs.
    Report(CommonArgs),
    /// Fit the regression on seeded synthetic data.
    Synthetic(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Pipeline config (flat TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `test_regions`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub test_regions: Option<Vec<String>>,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Smooth(a) | Command::Fpca(a) | Command::FitPredict(a) | Command::Report(a) | Command::Synthetic(a) => a,
        }
    }
}

/// Loads the config named on the command line and applies the overrides.
pub fn load_config(args: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(regions) = &args.test_regions {
        cfg.test_regions = regions.iter().map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(cli.command.args())?;
    let artifacts = build(&cli.command, &cfg)?;
    artifacts.write_all(&cfg.output_dir)
}

/// Computes the outputs of a command without touching the filesystem
/// (beyond reading inputs and earlier outputs).
pub fn build(command: &Command, cfg: &PipelineConfig) -> Result<Artifacts> {
    match command {
        Command::Smooth(_) => cmd_smooth(cfg),
        Command::Fpca(_) => cmd_fpca(cfg),
        Command::FitPredict(_) => cmd_fit_predict(cfg),
        Command::Report(_) => cmd_report(cfg),
        Command::Synthetic(_) => cmd_synthetic(cfg),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| FdaError::io(path, e))
}

/// Scaled daily series inside the configured window, sorted by region and
/// variable, plus the population table.
pub fn load_observations(cfg: &PipelineConfig) -> Result<(Vec<ScaledSeries>, PopulationTable)> {
    cfg.validate_inputs()?;
    let population = parse_population(&read_text(&cfg.population_path)?)?;
    let raw = parse_series(&read_text(&cfg.data_path)?, &ColumnSchema::default())?;
    let unknown: Vec<&str> = raw
        .iter()
        .filter(|s| population.get(&s.region).is_err())
        .map(|s| s.region.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !unknown.is_empty() {
        return Err(FdaError::Validation(format!(
            "regions missing from the population table: {}",
            unknown.join(", ")
        )));
    }
    let scaled = raw
        .iter()
        .map(|s| restrict_window(s, cfg.date_start, cfg.date_end).and_then(|w| scale_per_capita(&w, &population)))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled, population))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothedVariable {
    pub variable: Variable,
    pub num_basis: usize,
    pub dataset: FunctionalDataset,
    pub per_curve_mse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothedBundle {
    pub date_start: NaiveDate,
    pub date_end: NaiveDate,
    pub variables: Vec<SmoothedVariable>,
    pub observations: Vec<ScaledSeries>,
}

impl SmoothedBundle {
    pub fn regions(&self) -> Vec<String> {
        self.variables.first().map(|v| v.dataset.labels.clone()).unwrap_or_default()
    }

    pub fn datasets(&self) -> BTreeMap<Variable, FunctionalDataset> {
        self.variables.iter().map(|v| (v.variable, v.dataset.clone())).collect()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SMOOTHED_FILE);
        if !path.exists() {
            return Err(FdaError::MissingArtifact {
                path,
                command: "fda smooth".into(),
            });
        }
        let stamped: Stamped<SmoothedBundle> = serde_json::from_str(&read_text(&path)?)?;
        Ok(stamped.body)
    }
}

fn split_for(cfg: &PipelineConfig, regions: &[String]) -> Result<SplitSpec> {
    SplitSpec::new(regions.iter().map(String::as_str), cfg.test_regions.iter().map(String::as_str))
}

pub fn cmd_smooth(cfg: &PipelineConfig) -> Result<Artifacts> {
    let (observations, _) = load_observations(cfg)?;
    let regions: Vec<String> = observations
        .iter()
        .map(|s| s.region.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    split_for(cfg, &regions)?;

    let mut variables = Vec::new();
    let mut selection_rows = Vec::new();
    for variable in Variable::ALL {
        let series: Vec<&ScaledSeries> = observations.iter().filter(|s| s.variable == variable).collect();
        let num_basis = if cfg.basis_candidates.is_empty() {
            cfg.num_basis
        } else {
            let (chosen, report) = select_basis_count_many(&series, cfg.order, &cfg.basis_candidates)?;
            for CandidateScore { num_basis, mse, gcv } in report {
                selection_rows.push(vec![
                    variable.to_string(),
                    num_basis.to_string(),
                    num(mse),
                    num(gcv),
                    (num_basis == chosen).to_string(),
                ]);
            }
            chosen
        };
        let basis = Arc::new(make_bspline_basis(cfg.order, num_basis)?);
        let fit = smooth_series(&series, &basis)?;
        variables.push(SmoothedVariable {
            variable,
            num_basis,
            dataset: fit.dataset,
            per_curve_mse: fit.per_curve_mse,
        });
    }

    let mut out = Artifacts::default();
    let mse_rows: Vec<Vec<String>> = variables
        .iter()
        .flat_map(|v| {
            v.dataset.labels.iter().zip(&v.per_curve_mse).map(move |(region, mse)| {
                vec![region.clone(), v.variable.to_string(), v.num_basis.to_string(), num(*mse)]
            })
        })
        .collect();
    out.add_json(
        SMOOTHED_FILE,
        &Stamped {
            provenance: Provenance::new(cfg.hash()),
            body: SmoothedBundle {
                date_start: cfg.date_start,
                date_end: cfg.date_end,
                variables,
                observations,
            },
        },
    )?;
    out.add_csv("smoothing_mse.csv", &["region", "variable", "num_basis", "mse"], mse_rows)?;
    if !selection_rows.is_empty() {
        out.add_csv("basis_selection.csv", &["variable", "num_basis", "mse", "gcv", "chosen"], selection_rows)?;
    }
    Ok(out)
}

fn fpca_options(cfg: &PipelineConfig) -> FpcaOptions {
    FpcaOptions {
        max_components: (cfg.max_components > 0).then_some(cfg.max_components),
        metric: cfg.fpca_metric,
    }
}

pub fn cmd_fpca(cfg: &PipelineConfig) -> Result<Artifacts> {
    let bundle = SmoothedBundle::load(&cfg.output_dir)?;
    let split = split_for(cfg, &bundle.regions())?;
    let train = split.train();
    let grid = bundle
        .observations
        .first()
        .map(|s| s.grid.points.clone())
        .ok_or_else(|| FdaError::Validation("smoothed bundle holds no observations".into()))?;

    let mut out = Artifacts::default();
    let mut variance_rows = Vec::new();
    for sv in &bundle.variables {
        let data = sv.dataset.select(&train)?;
        let model = fpca_fit_with(&data, fpca_options(cfg))?;
        let name = sv.variable.as_str();

        let mut cumulative = 0.0;
        for (l, share) in model.var_proportions.iter().enumerate() {
            cumulative += share;
            variance_rows.push(vec![
                name.to_string(),
                (l + 1).to_string(),
                num(model.eigenvalues[l]),
                num(*share),
                num(cumulative),
            ]);
        }

        let r = model.num_components();
        if r >= 1 {
            let j = r.min(2);
            let pairs = score_pairs(&model, 1, j)?;
            out.add_csv(
                &format!("scores_{name}_pc1_pc{j}.csv"),
                &["label", "score_i", "score_j"],
                pairs.into_iter().map(|p| vec![p.label, num(p.score_i), num(p.score_j)]),
            )?;
        }
        for l in 1..=r.min(PERTURBATION_COMPONENTS) {
            let pc = perturbation_curves(&model, l, cfg.perturbation_multiplier, &grid)?;
            out.add_csv(
                &format!("perturbation_{name}_pc{l}.csv"),
                &["t", "mean", "plus", "minus"],
                (0..grid.len()).map(|k| vec![num(pc.grid[k]), num(pc.mean[k]), num(pc.plus[k]), num(pc.minus[k])]),
            )?;
        }
        let harmonics = (1..=r)
            .map(|l| model.basis.eval_coeffs(&model.harmonic(l)?.coeffs, &grid))
            .collect::<Result<Vec<_>>>()?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=r).map(|l| format!("f{l}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        out.add_csv(
            &format!("harmonics_{name}.csv"),
            &header_refs,
            (0..grid.len()).map(|k| {
                std::iter::once(num(grid[k]))
                    .chain(harmonics.iter().map(|h| num(h[k])))
                    .collect::<Vec<_>>()
            }),
        )?;
        out.add_json(
            &format!("fpca_{name}.json"),
            &Stamped {
                provenance: Provenance::new(cfg.hash()),
                body: model,
            },
        )?;
    }
    out.add_csv(
        EXPLAINED_VARIANCE_FILE,
        &["variable", "component", "eigenvalue", "proportion", "cumulative"],
        variance_rows,
    )?;
    Ok(out)
}

fn fit_response_models(
    cfg: &PipelineConfig,
    datasets: &BTreeMap<Variable, FunctionalDataset>,
    train: &[String],
) -> Result<Vec<(Variable, MfflrModel)>> {
    let regression = cfg.regression()?;
    let predictors = Variable::PREDICTORS
        .iter()
        .map(|v| {
            datasets
                .get(v)
                .ok_or_else(|| FdaError::Validation(format!("no smoothed curves for {v}")))?
                .select(train)
        })
        .collect::<Result<Vec<_>>>()?;
    Variable::RESPONSES
        .iter()
        .map(|v| {
            let responses = datasets
                .get(v)
                .ok_or_else(|| FdaError::Validation(format!("no smoothed curves for {v}")))?
                .select(train)?;
            Ok((*v, fit_mfflr(&responses, &predictors, &regression)?))
        })
        .collect()
}

pub fn cmd_fit_predict(cfg: &PipelineConfig) -> Result<Artifacts> {
    let bundle = SmoothedBundle::load(&cfg.output_dir)?;
    let split = split_for(cfg, &bundle.regions())?;
    cfg.validate_inputs()?;
    let population = parse_population(&read_text(&cfg.population_path)?)?;
    let datasets = bundle.datasets();
    let models = fit_response_models(cfg, &datasets, &split.train())?;

    let model_refs: Vec<(Variable, &MfflrModel)> = models.iter().map(|(v, m)| (*v, m)).collect();
    let (report, predictions) = prediction_table(
        &model_refs,
        &split,
        &PredictionInputs {
            smoothed: &datasets,
            observed: &bundle.observations,
            population: &population,
            mse_grid: None,
        },
    )?;

    let mut out = Artifacts::default();
    let provenance = Provenance::new(cfg.hash());
    for (variable, model) in &models {
        out.add_json(
            &format!("model_{variable}.json"),
            &Stamped {
                provenance: provenance.clone(),
                body: model,
            },
        )?;
        let beta_grid: Vec<f64> = (0..BETA_GRID_POINTS).map(|i| i as f64 / (BETA_GRID_POINTS - 1) as f64).collect();
        for (j, name) in model.predictor_names.iter().enumerate() {
            let surface = reconstruct_beta(model, j, &beta_grid, &beta_grid)?;
            out.add_csv(
                &format!("beta_{variable}_{name}.csv"),
                &["s", "t", "value"],
                beta_grid.iter().enumerate().flat_map(|(a, s)| {
                    let values = &surface.values;
                    beta_grid
                        .iter()
                        .enumerate()
                        .map(move |(b, t)| vec![num(*s), num(*t), num(values[(a, b)])])
                }),
            )?;
        }
    }

    let mut mse_header = vec!["region".to_string()];
    mse_header.extend(report.variables.iter().map(|v| format!("mse_{}", v.symbol().to_lowercase())));
    let mse_header: Vec<&str> = mse_header.iter().map(String::as_str).collect();
    out.add_csv(
        MSE_FILE,
        &mse_header,
        report.per_region_mse.iter().map(|(region, values)| {
            std::iter::once(region.clone()).chain(values.iter().map(|v| num(*v))).collect::<Vec<_>>()
        }),
    )?;
    out.add_csv(
        OBS_PRED_FILE,
        &["date", "region", "variable", "observed", "predicted"],
        report.predicted_vs_observed.iter().map(|r| {
            vec![
                r.date.to_string(),
                r.region.clone(),
                r.variable.to_string(),
                r.observed.to_string(),
                r.predicted.to_string(),
            ]
        }),
    )?;

    let mut curve_rows = Vec::new();
    for pred in &predictions {
        let smoothed = &datasets[&pred.variable];
        for (sample, set) in [("train", &pred.train), ("test", &pred.test)] {
            for (i, region) in set.labels.iter().enumerate() {
                let series = bundle
                    .observations
                    .iter()
                    .find(|s| s.region == *region && s.variable == pred.variable)
                    .ok_or_else(|| FdaError::Validation(format!("no observations for {region}")))?;
                let idx = smoothed.index_of(region).ok_or_else(|| FdaError::UnknownRegion(region.clone()))?;
                let ts = &series.grid.points;
                let fitted = smoothed.basis.eval_coeffs(&smoothed.curve(idx).coeffs, ts)?;
                let predicted = set.basis.eval_coeffs(&set.curve(i).coeffs, ts)?;
                for k in 0..ts.len() {
                    curve_rows.push(vec![
                        region.clone(),
                        pred.variable.to_string(),
                        sample.to_string(),
                        series.grid.dates[k].to_string(),
                        num(ts[k]),
                        num(series.values[k]),
                        num(fitted[k]),
                        num(predicted[k]),
                    ]);
                }
            }
        }
    }
    out.add_csv(
        "predicted_curves.csv",
        &["region", "variable", "sample", "date", "t", "observed", "smoothed", "predicted"],
        curve_rows,
    )?;
    out.add_json(
        "evaluation.json",
        &Stamped {
            provenance,
            body: report,
        },
    )?;
    Ok(out)
}

fn read_csv_rows(dir: &Path, name: &str, command: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(FdaError::MissingArtifact {
            path,
            command: command.into(),
        });
    }
    let text = read_text(&path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| FdaError::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: format!("{}: {e}", path.display()),
    };
    let header = reader.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(parse_err)?;
    Ok((header, rows))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| FdaError::Validation(format!("'{s}' is not a number")))
}

/// Number of leading and trailing dates shown per region in the summary.
const EXCERPT_DAYS: usize = 10;

pub fn cmd_report(cfg: &PipelineConfig) -> Result<Artifacts> {
    use std::fmt::Write as _;
    let dir = &cfg.output_dir;
    if !dir.is_dir() {
        return Err(FdaError::MissingArtifact {
            path: dir.clone(),
            command: "fda smooth, fda fpca and fda fit-predict".into(),
        });
    }
    let (_, variance) = read_csv_rows(dir, EXPLAINED_VARIANCE_FILE, "fda fpca")?;
    let (mse_header, mse) = read_csv_rows(dir, MSE_FILE, "fda fit-predict")?;
    let (_, obs_pred) = read_csv_rows(dir, OBS_PRED_FILE, "fda fit-predict")?;

    let mut md = String::new();
    let w = &mut md;
    let provenance = Provenance::new(cfg.hash());
    let _ = writeln!(
        w,
        "<!-- {} {} config sha256 {} -->",
        provenance.tool, provenance.version, provenance.config_hash
    );
    let _ = writeln!(w, "# Functional data analysis summary\n");
    let _ = writeln!(w, "Config hash: `{}`\n", provenance.config_hash);
    let _ = writeln!(w, "## Artifacts\n");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| FdaError::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != REPORT_FILE && !n.starts_with('.'))
        .collect();
    names.sort();
    for n in &names {
        let _ = writeln!(w, "- [`{n}`](./{n})");
    }

    let _ = writeln!(w, "\n## Explained variance ([`{EXPLAINED_VARIANCE_FILE}`](./{EXPLAINED_VARIANCE_FILE}))\n");
    let _ = writeln!(w, "| variable | component | proportion (%) | cumulative (%) |");
    let _ = writeln!(w, "|---|---:|---:|---:|");
    for row in &variance {
        if row.len() < 5 {
            return Err(FdaError::Validation(format!("malformed row in {EXPLAINED_VARIANCE_FILE}")));
        }
        let _ = writeln!(
            w,
            "| {} | {} | {:.2} | {:.2} |",
            row[0],
            row[1],
            100.0 * parse_f64(&row[3])?,
            100.0 * parse_f64(&row[4])?
        );
    }

    let _ = writeln!(w, "\n## Training-sample MSE ([`{MSE_FILE}`](./{MSE_FILE}))\n");
    let labels: Vec<String> = mse_header
        .iter()
        .skip(1)
        .map(|h| format!("MSE({})", h.trim_start_matches("mse_")))
        .collect();
    let _ = writeln!(w, "| region | {} |", labels.join(" | "));
    let _ = writeln!(w, "|---|{}", "---:|".repeat(labels.len()));
    let mut extremes: Vec<(f64, String, f64, String)> = vec![(f64::INFINITY, String::new(), f64::NEG_INFINITY, String::new()); labels.len()];
    for row in &mse {
        let values = row[1..].iter().map(|v| parse_f64(v)).collect::<Result<Vec<_>>>()?;
        for (c, v) in values.iter().enumerate() {
            let e = &mut extremes[c];
            if *v < e.0 {
                e.0 = *v;
                e.1 = row[0].clone();
            }
            if *v > e.2 {
                e.2 = *v;
                e.3 = row[0].clone();
            }
        }
        let cells: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(w, "| {} | {} |", row[0], cells.join(" | "));
    }
    let _ = writeln!(w);
    for (label, (lo, lo_r, hi, hi_r)) in labels.iter().zip(&extremes) {
        if !lo_r.is_empty() {
            let _ = writeln!(w, "- {label}: lowest {lo_r} ({lo:.6}), highest {hi_r} ({hi:.6})");
        }
    }

    let _ = writeln!(w, "\n## Test-sample counts, observed/predicted ([`{OBS_PRED_FILE}`](./{OBS_PRED_FILE}))\n");
    // variable -> region -> date -> "obs/pred"
    let mut table: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, String>>> = BTreeMap::new();
    for row in &obs_pred {
        if row.len() < 5 {
            return Err(FdaError::Validation(format!("malformed row in {OBS_PRED_FILE}")));
        }
        table
            .entry(row[2].as_str())
            .or_default()
            .entry(row[1].as_str())
            .or_default()
            .insert(row[0].as_str(), format!("{}/{}", row[3], row[4]));
    }
    if table.is_empty() {
        let _ = writeln!(w, "No test regions configured.");
    }
    for (variable, by_region) in &table {
        let regions: Vec<&str> = by_region.keys().copied().collect();
        let dates: Vec<&str> = by_region
            .values()
            .flat_map(|d| d.keys().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let _ = writeln!(w, "### {variable}\n");
        let _ = writeln!(w, "| date | {} |", regions.join(" | "));
        let _ = writeln!(w, "|---|{}", "---:|".repeat(regions.len()));
        let shown: Vec<Option<&str>> = if dates.len() > 2 * EXCERPT_DAYS {
            dates[..EXCERPT_DAYS]
                .iter()
                .map(|d| Some(*d))
                .chain(std::iter::once(None))
                .chain(dates[dates.len() - EXCERPT_DAYS..].iter().map(|d| Some(*d)))
                .collect()
        } else {
            dates.iter().map(|d| Some(*d)).collect()
        };
        for date in shown {
            match date {
                Some(date) => {
                    let cells: Vec<&str> = regions
                        .iter()
                        .map(|r| by_region[r].get(date).map_or("", String::as_str))
                        .collect();
                    let _ = writeln!(w, "| {date} | {} |", cells.join(" | "));
                }
                None => {
                    let _ = writeln!(w, "| ... |{}", " ... |".repeat(regions.len()));
                }
            }
        }
        let _ = writeln!(w);
    }

    let mut out = Artifacts::default();
    out.add(REPORT_FILE, md.into_bytes());
    Ok(out)
}

pub fn cmd_synthetic(cfg: &PipelineConfig) -> Result<Artifacts> {
    let spec = cfg.synthetic_spec();
    let data = generate_synthetic(&spec).map_err(|e| FdaError::Config(format!("synthetic spec: {e}")))?;
    let regression = cfg.regression()?;
    let model = fit_mfflr(&data.responses, &data.predictors, &regression)?;
    let predicted = predict_response(&model, &data.predictors)?;

    let grid: Vec<f64> = (0..256).map(|k| k as f64 / 255.0).collect();
    let mut mse_rows = Vec::with_capacity(data.responses.len());
    for (i, label) in data.responses.labels.iter().enumerate() {
        let mse = mse_curve(&data.responses.curve(i), &predicted.curve(i), &grid)?;
        mse_rows.push(vec![label.clone(), num(mse)]);
    }

    let mut coeff_rows = Vec::new();
    let (kt, ct) = data.true_coeffs.shape();
    for k in 0..model.coeffs.nrows() {
        for c in 0..model.coeffs.ncols() {
            let truth = if k < kt && c < ct { num(data.true_coeffs[(k, c)]) } else { String::new() };
            coeff_rows.push(vec![
                (k + 1).to_string(),
                c.to_string(),
                truth,
                num(model.coeffs[(k, c)]),
                num(model.std_errors[(k, c)]),
            ]);
        }
    }

    #[derive(Serialize)]
    struct SyntheticRun<'a> {
        spec: &'a crate::eval::SyntheticSpec,
        model: &'a MfflrModel,
    }

    let mut out = Artifacts::default();
    out.add_json(
        "synthetic_model.json",
        &Stamped {
            provenance: Provenance::new(cfg.hash()),
            body: SyntheticRun { spec: &spec, model: &model },
        },
    )?;
    out.add_csv("synthetic_mse.csv", &["label", "mse"], mse_rows)?;
    out.add_csv(
        "synthetic_coefficients.csv",
        &["component", "column", "true", "fitted", "std_error"],
        coeff_rows,
    )?;
    Ok(out)
}

/// Fitted FPCA model as stored by `fda fpca`.
pub fn load_fpca(dir: &Path, variable: Variable) -> Result<FpcaModel> {
    let path = dir.join(format!("fpca_{variable}.json"));
    if !path.exists() {
        return Err(FdaError::MissingArtifact {
            path,
            command: "fda fpca".into(),
        });
    }
    let stamped: Stamped<FpcaModel> = serde_json::from_str(&read_text(&path)?)?;
    Ok(stamped.body)
}

/// Process exit code for a command result: 0 success, 1 numerical or
/// internal failure, 2 input or configuration error.
pub fn exit_code(result: &Result<Vec<PathBuf>>) -> u8 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_input_error() => 2,
        Err(_) => 1,
    }
}
