use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use radsurv::evaluation::{ensemble_average, ensemble_vote, segmentation_report, SegCase};
use radsurv::multitask::{train_survival_net, write_loss_history, NetFile, ProbabilityMap};
use radsurv::pipeline::{
    ensemble_cv_models, load_manifest, load_subject, make_synthetic_cohort, run_cv, CohortData, CohortManifest,
    PipelineConfig, ScoreSet, SynthParams,
};
use radsurv::survival::{concordance_index, fit_coxph, predict_risk, select_features, CoxModel, Selection};
use radsurv::volume::{read_labels, read_scalar, write_volume};
use radsurv::{Execution, FeatureMatrix};

#[derive(Parser)]
#[command(name = "radsurv", version, about = "Radiomics and Cox-model survival prognosis from PET/CT volumes")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Run without worker threads.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapEnsemble {
    Average,
    Vote,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort (volumes and manifest.csv).
    Synth {
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Resample, crop and normalize one subject's images.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        subject: String,
        /// Crop edge length around the lesion center.
        #[arg(long, default_value_t = 160)]
        crop: usize,
    },
    /// Extract the radiomics catalog for every subject into features.csv.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// LASSO-Cox feature selection into selection.json.
    Select {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Fit a Cox model into model.json.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Restrict to the features in a selection.json.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Score subjects with a fitted model into scores.csv.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Harrell's C of a scores.csv against manifest outcomes.
    Cindex {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scores: PathBuf,
    },
    /// Per-subject and aggregated Dice into dice.csv and dice_summary.json.
    Dice {
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        truth: Vec<PathBuf>,
        #[arg(long, num_args = 1.., default_values_t = [1u8, 2])]
        labels: Vec<u8>,
    },
    /// Combine risk score files (z-score average) or probability maps.
    Ensemble {
        #[arg(long, num_args = 1..)]
        scores: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        maps: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "average")]
        method: MapEnsemble,
    },
    /// K-fold cross-validation; writes report.json and folds/<k>/.
    Cv {
        #[arg(long)]
        manifest: PathBuf,
        /// Also score this cohort with every fold model and ensemble the scores.
        #[arg(long)]
        test_manifest: Option<PathBuf>,
    },
    /// Train the survival net on a feature table into net.json and loss.csv.
    TrainNet {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config: PipelineConfig = match &cli.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.net.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn features_for(manifest: &CohortManifest, path: &Path) -> Result<FeatureMatrix> {
    let table = FeatureMatrix::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(table.select_subjects(&manifest.subject_ids())?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let out = cli.out.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let config = load_config(&cli)?;

    match &cli.command {
        Command::Synth { n } => {
            let cohort = make_synthetic_cohort(&out, *n, config.seed, &SynthParams::default())?;
            let events = cohort.manifest.rows.iter().filter(|r| r.event).count();
            println!("wrote {} subjects ({events} events) to {}", n, cohort.manifest_path.display());
        }
        Command::Preprocess { manifest, subject, crop } => {
            let m = load_manifest(manifest)?;
            let row = m
                .rows
                .iter()
                .find(|r| &r.subject_id == subject)
                .with_context(|| format!("subject {subject} not in manifest"))?;
            let mut cfg = config.clone();
            cfg.preprocess.crop_size = Some([*crop; 3]);
            let images = load_subject(row, &cfg)?;
            write_volume(&images.ct.normalize_ct(), out.join("ct.json"))?;
            write_volume(&images.pet.normalize_zscore()?, out.join("pet.json"))?;
            write_volume(&images.mask, out.join("mask.json"))?;
            println!("wrote ct.json, pet.json, mask.json ({:?}) to {}", images.dims(), out.display());
        }
        Command::Extract { manifest } => {
            let m = load_manifest(manifest)?;
            let mut cfg = config.clone();
            cfg.blocks.radiomics = true;
            let data = CohortData::build(&m, &cfg, exec)?;
            let x = data.radiomics.expect("radiomics requested");
            x.write_csv(out.join("features.csv"))?;
            println!("{} subjects x {} features", x.nrows(), x.ncols());
        }
        Command::Select { manifest, features, k } => {
            let m = load_manifest(manifest)?;
            let x = features_for(&m, features)?;
            let (z, _, _) = radsurv::pipeline::standardize_features(&x, &x)?;
            let sel = select_features(&z, &m.outcomes(), k.unwrap_or(config.target_k))?;
            if !sel.reached_target {
                eprintln!("warning: only {} features became active on the penalty grid", sel.active);
            }
            write_json(&out.join("selection.json"), &sel)?;
            println!("{}", sel.names.join("\n"));
        }
        Command::Fit { manifest, features, selection } => {
            let m = load_manifest(manifest)?;
            let mut x = features_for(&m, features)?;
            if let Some(p) = selection {
                let sel: Selection = serde_json::from_str(&fs::read_to_string(p)?)?;
                x = x.select_named(&sel.names)?;
            }
            let model = fit_coxph(&x, &m.outcomes())?;
            model.write_json(out.join("model.json"))?;
            println!("converged in {} iterations", model.diagnostics.iterations);
        }
        Command::Predict { model, features } => {
            let model = CoxModel::read_json(model)?;
            let x = FeatureMatrix::read_csv(features)?;
            let scores = ScoreSet {
                subject_ids: x.subject_ids().to_vec(),
                scores: predict_risk(&model, &x)?,
            };
            scores.write_csv(out.join("scores.csv"))?;
        }
        Command::Cindex { manifest, scores } => {
            let m = load_manifest(manifest)?;
            let s = ScoreSet::read_csv(scores)?;
            let risk = m
                .subject_ids()
                .iter()
                .map(|id| {
                    s.subject_ids
                        .iter()
                        .position(|x| x == id)
                        .map(|i| s.scores[i])
                        .with_context(|| format!("no score for {id}"))
                })
                .collect::<Result<Vec<_>>>()?;
            println!("{:.6}", concordance_index(&risk, &m.outcomes())?);
        }
        Command::Dice { pred, truth, labels } => {
            if pred.len() != truth.len() {
                bail!("{} predictions but {} reference masks", pred.len(), truth.len());
            }
            let cases = pred
                .iter()
                .zip(truth)
                .map(|(p, t)| {
                    Ok(SegCase {
                        subject_id: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                        predicted: read_labels(p)?,
                        truth: read_labels(t)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = segmentation_report(&cases, labels, exec)?;
            report.write_csv(out.join("dice.csv"))?;
            report.write_summary_json(out.join("dice_summary.json"))?;
            for s in &report.summary {
                println!("label {}: aggregated {:.4}, mean {:.4}", s.label, s.aggregated_dice, s.mean_dice);
            }
        }
        Command::Ensemble { scores, maps, method } => match (scores.is_empty(), maps.is_empty()) {
            (false, true) => {
                let sets = scores.iter().map(ScoreSet::read_csv).collect::<radsurv::Result<Vec<_>>>()?;
                ensemble_cv_models(&sets)?.write_csv(out.join("ensemble.csv"))?;
            }
            (true, false) => {
                let maps = maps
                    .iter()
                    .map(|p| Ok(ProbabilityMap::new(read_scalar(p)?)?))
                    .collect::<Result<Vec<_>>>()?;
                let mask = match method {
                    MapEnsemble::Average => ensemble_average(&maps)?,
                    MapEnsemble::Vote => ensemble_vote(&maps)?,
                };
                write_volume(&mask, out.join("ensemble_mask.json"))?;
            }
            _ => bail!("pass either --scores or --maps"),
        },
        Command::Cv { manifest, test_manifest } => {
            let m = load_manifest(manifest)?;
            for c in &m.unknown_columns {
                eprintln!("warning: ignoring unknown manifest column {c:?}");
            }
            let run = run_cv(&m, &config, exec)?;
            run.write(&out)?;
            if let Some(t) = test_manifest {
                let test = load_manifest(t)?;
                let sets = run.score_external(&test, exec)?;
                let ens = ensemble_cv_models(&sets)?;
                ens.write_csv(out.join("ensemble.csv"))?;
                println!("ensemble C-index {:.4}", concordance_index(&ens.scores, &test.outcomes())?);
            }
            println!("{}", run.report.table_row());
        }
        Command::TrainNet { manifest, features } => {
            let m = load_manifest(manifest)?;
            let x = features_for(&m, features)?;
            let (z, _, _) = radsurv::pipeline::standardize_features(&x, &x)?;
            let trained = train_survival_net(&z, &m.outcomes(), &config.net)?;
            NetFile {
                net: trained.net,
                config: config.net.clone(),
            }
            .write_json(out.join("net.json"))?;
            write_loss_history(out.join("loss.csv"), &trained.history)?;
            println!("final batch loss {:.6}", trained.history.last().copied().unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
