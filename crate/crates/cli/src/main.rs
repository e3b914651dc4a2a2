//! Command-line frontend: feature dumps, blind scoring, the
//! full-reference metric, corpus generation, SVR training, quality-driven
//! enhancement, and correlation benchmarking.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use biqme::boiem;
use biqme::error::Error;
use biqme::evalstats::{evaluate, render_report, ScorePairs};
use biqme::features::feature_header;
use biqme::svr::{self, GridSpec, SvrHyper, SvrModel, TrainSet};
use biqme::trainset;
use biqme::{RasterImage, ToolkitConfig};

#[derive(Parser)]
#[command(name = "biqme", version, about = "Blind IQA of enhanced images and quality-driven enhancement")]
struct Cli {
    /// Config file (flat `key = value` document).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for batch commands (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 17-feature vector of each image as CSV.
    Features {
        /// Image paths (PNG, BMP, JPEG).
        paths: Vec<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the blind quality score of each image (JSON lines).
    Score {
        paths: Vec<PathBuf>,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-reference score of a distorted image against a reference.
    Cpcqi {
        reference: PathBuf,
        distorted: PathBuf,
    },
    /// Synthesize a labeled training corpus from source images.
    Gen {
        /// Source image paths.
        sources: Vec<PathBuf>,
        /// Parameter draws per operator (overrides gen.per_op).
        #[arg(long)]
        per_op: Option<usize>,
        /// Output directory for train.csv and manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the regression module from a labeled feature CSV.
    Train {
        csv: PathBuf,
        /// Cross-validated grid search instead of fixed hyperparameters.
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Output model file.
        #[arg(long)]
        out_model: PathBuf,
        /// Optional JSON training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Enhance images, maximizing the blind score (six evaluations each).
    Enhance {
        paths: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Output directory for enhanced PNGs and JSON sidecars.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Correlation report (PLC/SRC/KRC) of scores against MOS ratings.
    Eval {
        /// CSV with header `image_path,score`.
        scores_csv: PathBuf,
        /// CSV with header `image_path,mos`.
        mos_csv: PathBuf,
        /// Refuse evaluation images whose content hash appears in this
        /// training manifest.
        #[arg(long)]
        train_manifest: Option<PathBuf>,
        /// Optional JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct HyperArgs {
    /// Box constraint (overrides svr.t).
    #[arg(long)]
    t: Option<f64>,
    /// Tube half-width (overrides svr.p).
    #[arg(long)]
    p: Option<f64>,
    /// RBF width (overrides svr.k).
    #[arg(long)]
    k: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            let line = serde_json::json!({
                "error": err.class(),
                "message": err.to_string(),
            });
            eprintln!("{line}");
            1
        }
    };
    std::process::exit(code);
}

fn load_config(path: &Option<PathBuf>) -> Result<ToolkitConfig, Error> {
    match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("config file {} not found", p.display()),
                )));
            }
            ToolkitConfig::load_file(p)
        }
        None => Ok(ToolkitConfig::default()),
    }
}

fn decode_all(paths: &[PathBuf]) -> Result<Vec<(String, RasterImage)>, Error> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no input images given".into()));
    }
    paths
        .iter()
        .map(|p| {
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} not found", p.display()),
                )));
            }
            Ok((p.display().to_string(), RasterImage::decode_file(p)?))
        })
        .collect()
}

fn write_or_stdout(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = load_config(&cli.config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cli.jobs > 0 {
        builder = builder.num_threads(cli.jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli, config))
}

fn dispatch(cli: Cli, config: ToolkitConfig) -> Result<(), Error> {
    let extractor = config.extractor();
    match cli.command {
        Command::Features { paths, out } => {
            let images = decode_all(&paths)?;
            let rows: Vec<Result<String, Error>> = images
                .par_iter()
                .map(|(_, img)| Ok(extractor.extract(img)?.to_csv_row()))
                .collect();
            let mut text = String::new();
            text.push_str(&feature_header());
            text.push('\n');
            for row in rows {
                text.push_str(&row?);
                text.push('\n');
            }
            write_or_stdout(&out, &text)
        }
        Command::Score { paths, model, out } => {
            let model = SvrModel::load_file(&model)?;
            let images = decode_all(&paths)?;
            let lines: Vec<Result<String, Error>> = images
                .par_iter()
                .map(|(path, img)| {
                    let score = model.predict(&extractor.extract(img)?.values);
                    Ok(serde_json::json!({ "path": path, "score": score }).to_string())
                })
                .collect();
            let mut text = String::new();
            for line in lines {
                text.push_str(&line?);
                text.push('\n');
            }
            write_or_stdout(&out, &text)
        }
        Command::Cpcqi {
            reference,
            distorted,
        } => {
            let imgs = decode_all(&[reference, distorted])?;
            let score = biqme::cpcqi::cpcqi_score(&imgs[0].1, &imgs[1].1, &config.cpcqi)?;
            println!("{score}");
            Ok(())
        }
        Command::Gen {
            sources,
            per_op,
            out,
        } => {
            let images = decode_all(&sources)?;
            let mut gen_cfg = config.gen.clone();
            if let Some(n) = per_op {
                gen_cfg.per_op = n;
            }
            let corpus =
                trainset::build_corpus(&images, &gen_cfg, &extractor, &config.cpcqi, cli.seed)?;
            std::fs::create_dir_all(&out)?;
            let mut csv = Vec::new();
            corpus.train_set().write_csv(&mut csv)?;
            std::fs::write(out.join("train.csv"), csv)?;
            let mut manifest = Vec::new();
            trainset::write_manifest(&corpus, &config.echo(), &mut manifest)?;
            std::fs::write(out.join("manifest.jsonl"), manifest)?;
            println!(
                "wrote {} rows from {} sources to {}",
                corpus.rows.len(),
                images.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            csv,
            grid,
            hyper,
            out_model,
            report,
        } => {
            if !csv.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} not found", csv.display()),
                )));
            }
            let file = std::fs::File::open(&csv)?;
            let data = TrainSet::read_csv(std::io::BufReader::new(file))?;
            let mut chosen = SvrHyper {
                t: hyper.t.unwrap_or(config.svr.t),
                p: hyper.p.unwrap_or(config.svr.p),
                k: hyper.k.unwrap_or(config.svr.k),
            };
            let mut grid_table = None;
            if grid {
                let (best, table) = svr::grid_search(&data, &GridSpec::default(), cli.seed)?;
                chosen = best;
                grid_table = Some(table);
            }
            let outcome = svr::train(&data, &chosen)?;
            outcome.model.save_file(&out_model)?;

            println!("rows          {}", data.len());
            println!("hyper         t={} p={} k={}", chosen.t, chosen.p, chosen.k);
            println!("support vecs  {}", outcome.model.sv_count());
            println!("kkt residual  {:.3e}", outcome.kkt_residual);
            println!("max self err  {:.6}", outcome.max_self_error);
            if let Some(table) = &grid_table {
                println!("cv table (t, k, p -> rmse):");
                for cell in table {
                    println!(
                        "  {:>8} {:>10.6} {:>7} -> {:.6}",
                        cell.hyper.t, cell.hyper.k, cell.hyper.p, cell.cv_rmse
                    );
                }
            }
            if let Some(path) = report {
                let json = serde_json::json!({
                    "rows": data.len(),
                    "hyper": { "t": chosen.t, "p": chosen.p, "k": chosen.k },
                    "support_vectors": outcome.model.sv_count(),
                    "kkt_residual": outcome.kkt_residual,
                    "max_self_error": outcome.max_self_error,
                    "grid": grid_table.as_ref().map(|t| t
                        .iter()
                        .map(|c| serde_json::json!({
                            "t": c.hyper.t, "k": c.hyper.k, "p": c.hyper.p,
                            "cv_rmse": c.cv_rmse,
                        }))
                        .collect::<Vec<_>>()),
                    "config": config.echo(),
                });
                std::fs::write(path, serde_json::to_string_pretty(&json).unwrap())?;
            }
            Ok(())
        }
        Command::Enhance {
            paths,
            model,
            out_dir,
        } => {
            let model = SvrModel::load_file(&model)?;
            let images = decode_all(&paths)?;
            std::fs::create_dir_all(&out_dir)?;
            let results: Vec<Result<(String, PathBuf), Error>> = images
                .par_iter()
                .zip(paths.par_iter())
                .map(|((input, img), path)| {
                    let (enhanced, outcome) =
                        boiem::enhance(img, &config.boiem, &model, &extractor)?;
                    let stem = path
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or("image");
                    let out_img = out_dir.join(format!("{stem}.png"));
                    enhanced.encode_file(&out_img)?;
                    let sidecar = serde_json::json!({
                        "input": input,
                        "lambda_b": outcome.lambda_b,
                        "lambda_e": outcome.lambda_e,
                        "lambda_s": outcome.lambda_s,
                        "scores": outcome.scores,
                        "config": config.echo(),
                    });
                    let out_json = out_dir.join(format!("{stem}.json"));
                    std::fs::write(&out_json, serde_json::to_string_pretty(&sidecar).unwrap())?;
                    Ok((input.clone(), out_img))
                })
                .collect();
            for r in results {
                let (input, out_img) = r?;
                println!("{input} -> {}", out_img.display());
            }
            Ok(())
        }
        Command::Eval {
            scores_csv,
            mos_csv,
            train_manifest,
            out,
        } => {
            let scores = read_two_column_csv(&scores_csv, "score")?;
            let mos = read_two_column_csv(&mos_csv, "mos")?;
            if let Some(manifest) = train_manifest {
                let file = std::fs::File::open(&manifest)?;
                let hashes = trainset::read_manifest_hashes(std::io::BufReader::new(file))?;
                for (path, _) in &mos {
                    let img = RasterImage::decode_file(Path::new(path))?;
                    if hashes.contains(&img.content_hash()) {
                        return Err(Error::TrainEvalOverlap { path: path.clone() });
                    }
                }
            }
            let by_path: HashMap<&str, f64> =
                scores.iter().map(|(p, v)| (p.as_str(), *v)).collect();
            let mut objective = Vec::with_capacity(mos.len());
            let mut subjective = Vec::with_capacity(mos.len());
            for (path, rating) in &mos {
                let s = by_path.get(path.as_str()).ok_or_else(|| {
                    Error::Malformed(format!("no score for `{path}` in {}", scores_csv.display()))
                })?;
                objective.push(*s);
                subjective.push(*rating);
            }
            let pairs = ScorePairs::new(objective, subjective)?;
            let report = evaluate(&pairs, cli.seed)?;
            print!("{}", render_report(&report));
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())?;
            }
            Ok(())
        }
    }
}

/// Reads a two-column CSV with header `image_path,<value_name>`.
fn read_two_column_csv(path: &Path, value_name: &str) -> Result<Vec<(String, f64)>, Error> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found", path.display()),
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        if headers.len() != 2 || &headers[0] != "image_path" || &headers[1] != value_name {
            return Err(Error::Malformed(format!(
                "{} must have header `image_path,{value_name}`",
                path.display()
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|e| Error::Malformed(format!("bad {value_name} `{}`: {e}", &record[1])))?;
        if !value.is_finite() {
            return Err(Error::Malformed(format!("non-finite {value_name}")));
        }
        rows.push((record[0].to_string(), value));
    }
    Ok(rows)
}
