//! Command-line front end for concept discovery, sparse decomposition,
//! editing, retrieval, evaluation and sweeps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use scocca::baselines::encode_batch;
use scocca::concepts::{recompose, retrieve_top_k, EditOp, InsertMode};
use scocca::harness::{
    self, evaluate, load_array, load_bank, run_sweep, save_array, text_io, Config, Dataset,
    Dictionary, DiscoveryOptions, EvalOptions, Split, SweepGrid, SyntheticSpec, ZeroShotMode,
};
use scocca::metrics::ReportConfig;
use scocca::{ConceptBank, EmbeddingMatrix, LassoConfig, Matrix, Provenance, SparseCode};

#[derive(Parser)]
#[command(
    name = "scocca",
    version,
    about = "Sparse concept discovery for paired image/text embeddings"
)]
struct Cli {
    /// File of `key = value` lines mirroring the long flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a concept bank from paired embeddings and label it with classes.
    Discover(DiscoverArgs),
    /// Sparse codes of image embeddings against a bank.
    Decompose(DecomposeArgs),
    /// Edit codes (ablate, insert, swap) and recompose embeddings.
    Edit(EditArgs),
    /// Rows with the highest activation on one concept.
    Retrieve(RetrieveArgs),
    /// Purity, sparsity and reconstruction metrics for a bank.
    Report(ReportArgs),
    /// Zero-shot accuracy and code density over a lambda or k grid.
    Sweep(SweepArgs),
    /// Write a planted synthetic train/test pair.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Image embeddings (NPY, n x d).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Text embeddings paired row by row with the images (NPY, n x d).
    #[arg(long)]
    texts: Option<PathBuf>,
    /// One class index per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// One class name per line.
    #[arg(long)]
    classes: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_texts: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
}

#[derive(Args)]
struct LassoArgs {
    /// Sparsity penalty.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Relative change at which ISTA stops.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    data: DataArgs,
    /// scocca, varimax, kmeans, nmf, tcav or external.
    #[arg(long)]
    method: Option<String>,
    /// Number of concepts (default: min(d, number of classes)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CCA ridge (default: 1e-6 times the mean variance).
    #[arg(long)]
    ridge: Option<f64>,
    /// Concept embeddings for the external method (NPY, one concept per row).
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Names of the dictionary rows, one per line.
    #[arg(long)]
    dictionary_labels: Option<PathBuf>,
    /// Bank archive to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[command(flatten)]
    lasso: LassoArgs,
    /// Codes to write (NPY, n x k).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the recomposed embeddings (NPY, n x d).
    #[arg(long)]
    reconstruction: Option<PathBuf>,
}

#[derive(Args)]
struct EditArgs {
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    /// `ablate:i`, `insert:i:j` or `swap:i:j`; repeatable, applied left to right.
    #[arg(long = "edit")]
    edits: Vec<String>,
    /// additive (w_j + w_i) or replace (w_i).
    #[arg(long)]
    insert_mode: Option<String>,
    #[command(flatten)]
    lasso: LassoArgs,
    /// Edited embeddings to write (NPY, n x d).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the edited codes (NPY, n x k).
    #[arg(long)]
    codes_out: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    /// Concept index or label.
    #[arg(long)]
    concept: Option<String>,
    #[arg(long)]
    topk: Option<usize>,
    #[command(flatten)]
    lasso: LassoArgs,
    /// Tab-separated ranking to write instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// `probe` (logistic probe on images) or `text` (text class prototypes).
    #[arg(long)]
    zero_shot: Option<String>,
    /// Softmax temperature for text-prototype zero-shot.
    #[arg(long)]
    temperature: Option<f64>,
    /// Share of classes drawn for the pairwise metrics.
    #[arg(long)]
    pair_fraction: Option<f64>,
    #[arg(long)]
    insert_mode: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Training split; the probe is fit here.
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    lasso: LassoArgs,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Text report to write; the JSON form goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated lambda values (one bank, many penalties).
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Comma-separated concept counts (one bank per value).
    #[arg(long)]
    k_grid: Option<String>,
    #[command(flatten)]
    lasso: LassoArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Text table to write; the JSON form goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Norm of the offset shared by all text rows.
    #[arg(long)]
    gap: Option<f64>,
    /// Use one linear map for both modalities.
    #[arg(long)]
    shared_maps: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving `train/` and `test/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag values backed by the config file.
struct Settings {
    cfg: Config,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            Some(p) => {
                Config::load(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => Config::default(),
        };
        let known = known_keys();
        let known: Vec<&str> = known.iter().map(String::as_str).collect();
        cfg.check_keys(&known)?;
        Ok(Self { cfg })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Ok(self.cfg.parsed(key)?),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn need<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| anyhow!(scocca::Error::Usage(format!("--{key} is required"))))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.cfg.parsed::<bool>(key)?.unwrap_or(false))
    }
}

/// Every long flag of every subcommand, usable as a config key.
fn known_keys() -> BTreeSet<String> {
    let cmd = Cli::command();
    cmd.get_subcommands()
        .flat_map(|s| s.get_arguments())
        .chain(cmd.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

fn method(s: &Settings, flag: Option<String>) -> Result<Provenance> {
    Ok(Provenance::from_str(&s.or(
        flag,
        "method",
        "scocca".to_string(),
    )?)?)
}

fn insert_mode(s: &Settings, flag: Option<String>) -> Result<InsertMode> {
    match s.or(flag, "insert-mode", "additive".to_string())?.as_str() {
        "additive" => Ok(InsertMode::Additive),
        "replace" => Ok(InsertMode::Replace),
        other => bail!(scocca::Error::Usage(format!(
            "insert mode '{other}' is not additive or replace"
        ))),
    }
}

fn lasso(s: &Settings, a: LassoArgs) -> Result<LassoConfig> {
    let d = LassoConfig::default();
    let cfg = LassoConfig {
        lambda: s.or(a.lambda, "lambda", d.lambda)?,
        max_iter: s.or(a.max_iter, "max-iter", d.max_iter)?,
        tol: s.or(a.tol, "tol", d.tol)?,
        step: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_data(s: &Settings, a: DataArgs) -> Result<Dataset> {
    let classes = s.get(a.classes, "classes")?;
    Dataset::load(
        s.need(a.images, "images")?,
        s.need(a.texts, "texts")?,
        s.need(a.labels, "labels")?,
        classes.as_deref(),
        Split::Train,
    )
    .context("loading training data")
}

fn test_data(s: &Settings, a: TestArgs, train: &Dataset) -> Result<Dataset> {
    let test = Dataset::load(
        s.need(a.test_images, "test-images")?,
        s.need(a.test_texts, "test-texts")?,
        s.need(a.test_labels, "test-labels")?,
        None,
        Split::Test,
    )
    .context("loading test data")?;
    Ok(Dataset::new(
        test.images,
        test.texts,
        test.labels,
        train.class_names.clone(),
        Split::Test,
    )?)
}

fn eval_options(s: &Settings, a: EvalArgs, lasso: LassoConfig, seed: u64) -> Result<EvalOptions> {
    let zero_shot = match s
        .or(a.zero_shot, "zero-shot", "probe".to_string())?
        .as_str()
    {
        "probe" => ZeroShotMode::Probe,
        "text" => ZeroShotMode::TextPrototypes(s.or(a.temperature, "temperature", 0.07)?),
        other => bail!(scocca::Error::Usage(format!(
            "zero-shot mode '{other}' is not probe or text"
        ))),
    };
    let d = ReportConfig::default();
    Ok(EvalOptions {
        report: ReportConfig {
            lasso,
            pair_fraction: s.or(a.pair_fraction, "pair-fraction", d.pair_fraction)?,
            seed,
            insert_mode: insert_mode(s, a.insert_mode)?,
            energy_top: d.energy_top,
        },
        zero_shot,
        ..EvalOptions::default()
    })
}

fn read_bank(s: &Settings, flag: Option<PathBuf>) -> Result<ConceptBank> {
    let path: PathBuf = s.need(flag, "bank")?;
    load_bank(&path).with_context(|| format!("reading bank {}", path.display()))
}

fn read_images(s: &Settings, flag: Option<PathBuf>) -> Result<EmbeddingMatrix> {
    let path: PathBuf = s.need(flag, "images")?;
    let m = load_array(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(m.into())
}

fn codes_matrix(codes: &[SparseCode]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = codes.iter().map(|c| c.w.as_slice()).collect();
    Ok(Matrix::from_rows(&rows)?)
}

fn recompose_rows(bank: &ConceptBank, codes: &[SparseCode]) -> Result<Matrix> {
    let rows = codes
        .iter()
        .map(|c| recompose(bank, c))
        .collect::<scocca::Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(&rows)?)
}

fn parse_grid<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| anyhow!(scocca::Error::Usage(format!("bad {what} value '{v}'"))))
        })
        .collect()
}

fn cmd_discover(s: &Settings, a: DiscoverArgs) -> Result<()> {
    let out: PathBuf = s.need(a.out, "out")?;
    let data = train_data(s, a.data)?;
    let mut opts = DiscoveryOptions::new(method(s, a.method)?);
    opts.k = s.get(a.k, "k")?;
    opts.seed = s.or(a.seed, "seed", 0)?;
    opts.ridge = s.get(a.ridge, "ridge")?;
    if let Some(path) = s.get(a.dictionary, "dictionary")? {
        let embeddings: EmbeddingMatrix = load_array(&path)
            .with_context(|| format!("reading dictionary {}", path.display()))?
            .into();
        let labels = match s.get(a.dictionary_labels, "dictionary-labels")? {
            Some(p) => text_io::read_classes(p)?,
            None => (0..embeddings.rows())
                .map(|i| format!("entry_{i}"))
                .collect(),
        };
        opts.dictionary = Some(Dictionary { embeddings, labels });
    }
    let bank = harness::run_discovery(&data, &opts, &out)?;
    println!(
        "{} bank: d = {}, k = {}, written to {}",
        bank.provenance(),
        bank.d(),
        bank.k(),
        out.display()
    );
    if let Some(labels) = bank.labels() {
        for (j, l) in labels.iter().enumerate() {
            println!("  concept {j}: {l}");
        }
    }
    Ok(())
}

fn cmd_decompose(s: &Settings, a: DecomposeArgs) -> Result<()> {
    let out: PathBuf = s.need(a.out, "out")?;
    let bank = read_bank(s, a.bank)?;
    let x = read_images(s, a.images)?;
    let cfg = lasso(s, a.lasso)?;
    let codes = encode_batch(&bank, &x, &cfg)?;
    save_array(&out, &codes_matrix(&codes)?)?;
    if let Some(path) = s.get(a.reconstruction, "reconstruction")? {
        save_array(&path, &recompose_rows(&bank, &codes)?)?;
    }
    let density =
        codes.iter().map(|c| c.active_count as f64).sum::<f64>() / (codes.len() * bank.k()) as f64;
    let unconverged = codes.iter().filter(|c| !c.converged).count();
    println!(
        "{} codes written to {}; mean ||w||_0 / k = {density:.4}",
        codes.len(),
        out.display()
    );
    if unconverged > 0 {
        eprintln!("warning: {unconverged} codes hit the iteration limit");
    }
    Ok(())
}

fn cmd_edit(s: &Settings, a: EditArgs) -> Result<()> {
    let out: PathBuf = s.need(a.out, "out")?;
    let bank = read_bank(s, a.bank)?;
    let x = read_images(s, a.images)?;
    let cfg = lasso(s, a.lasso)?;
    let mode = insert_mode(s, a.insert_mode)?;
    let specs: Vec<String> = if a.edits.is_empty() {
        s.cfg
            .get("edit")
            .map(|v| parse_grid(v, "edit"))
            .transpose()?
            .unwrap_or_default()
    } else {
        a.edits
    };
    if specs.is_empty() {
        bail!(scocca::Error::Usage(
            "at least one --edit is required".into()
        ));
    }
    let ops = specs
        .iter()
        .map(|e| EditOp::from_str(e))
        .collect::<scocca::Result<Vec<_>>>()?;
    let codes = encode_batch(&bank, &x, &cfg)?;
    let edited = codes
        .iter()
        .enumerate()
        .map(|(i, code)| {
            ops.iter()
                .try_fold(code.clone(), |c, op| op.apply(&c, mode))
                .map_err(|e| e.at_row(i))
        })
        .collect::<scocca::Result<Vec<_>>>()?;
    save_array(&out, &recompose_rows(&bank, &edited)?)?;
    if let Some(path) = s.get(a.codes_out, "codes-out")? {
        save_array(&path, &codes_matrix(&edited)?)?;
    }
    println!(
        "{} edited embeddings written to {}",
        edited.len(),
        out.display()
    );
    Ok(())
}

fn cmd_retrieve(s: &Settings, a: RetrieveArgs) -> Result<()> {
    let bank = read_bank(s, a.bank)?;
    let x = read_images(s, a.images)?;
    let cfg = lasso(s, a.lasso)?;
    let concept: String = s.need(a.concept, "concept")?;
    let index = match concept.parse::<usize>() {
        Ok(i) => i,
        Err(_) => bank.concept_for_label(&concept).ok_or_else(|| {
            anyhow!(scocca::Error::Usage(format!(
                "no concept is labeled '{concept}'"
            )))
        })?,
    };
    let topk = s.or(a.topk, "topk", 5)?.min(x.rows());
    let hits = retrieve_top_k(&bank, index, &x, &cfg, topk)?;
    let mut table = String::from("rank\trow\tactivation\n");
    for (r, h) in hits.iter().enumerate() {
        table.push_str(&format!("{}\t{}\t{:.6}\n", r + 1, h.row, h.activation));
    }
    match s.get(a.out, "out")? {
        Some(path) => {
            harness::write_atomic(&path, table.as_bytes())?;
            println!("{} rows written to {}", hits.len(), path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_report(s: &Settings, a: ReportArgs) -> Result<()> {
    let bank = read_bank(s, a.bank)?;
    let train = train_data(s, a.data)?;
    let test = test_data(s, a.test, &train)?;
    let cfg = lasso(s, a.lasso)?;
    let opts = eval_options(s, a.eval, cfg, s.or(a.seed, "seed", 0)?)?;
    let ev = evaluate(&bank, &train, &test, &opts)?;
    match s.get(a.out, "out")? {
        Some(path) => {
            harness::write_atomic(&path, ev.report.to_text().as_bytes())?;
            harness::write_atomic(&path.with_extension("json"), ev.report.to_json().as_bytes())?;
            println!("report written to {} (and .json)", path.display());
        }
        None => print!("{}", ev.report.to_text()),
    }
    println!(
        "probe accuracy on raw test embeddings: {:.4}",
        ev.probe_accuracy
    );
    Ok(())
}

fn cmd_sweep(s: &Settings, a: SweepArgs) -> Result<()> {
    let lambda_grid: Option<String> = s.get(a.lambda_grid, "lambda-grid")?;
    let k_grid: Option<String> = s.get(a.k_grid, "k-grid")?;
    let grid = match (lambda_grid, k_grid) {
        (Some(l), None) => SweepGrid::Lambda(parse_grid(&l, "lambda")?),
        (None, Some(k)) => SweepGrid::K(parse_grid(&k, "k")?),
        _ => bail!(scocca::Error::Usage(
            "give exactly one of --lambda-grid and --k-grid".into()
        )),
    };
    let train = train_data(s, a.data)?;
    let test = test_data(s, a.test, &train)?;
    let seed = s.or(a.seed, "seed", 0)?;
    let mut disc = DiscoveryOptions::new(method(s, a.method)?).with_seed(seed);
    disc.k = s.get(a.k, "k")?;
    let cfg = lasso(s, a.lasso)?;
    let eval = eval_options(s, a.eval, cfg, seed)?;
    let out: Option<PathBuf> = s.get(a.out, "out")?;
    let table = run_sweep(&train, &test, &disc, &eval, &grid, out.as_deref())?;
    print!("{}", table.to_text());
    Ok(())
}

fn cmd_synth(s: &Settings, a: SynthArgs) -> Result<()> {
    let out: PathBuf = s.need(a.out, "out")?;
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_per_class: s.or(a.n_per_class, "n-per-class", d.n_per_class)?,
        classes: s.or(a.num_classes, "num-classes", d.classes)?,
        d: s.or(a.dim, "dim", d.d)?,
        latent_dim: s.or(a.latent_dim, "latent-dim", d.latent_dim)?,
        noise_sigma: s.or(a.noise, "noise", d.noise_sigma)?,
        gap_magnitude: s.or(a.gap, "gap", d.gap_magnitude)?,
        seed: s.or(a.seed, "seed", d.seed)?,
        shared_maps: s.flag(a.shared_maps, "shared-maps")?,
    };
    let (train, test) = scocca::harness::generate_synthetic(&spec)?;
    train.save(out.join("train"))?;
    test.save(out.join("test"))?;
    println!(
        "{} train and {} test rows (d = {}, {} classes) written to {}",
        train.len(),
        test.len(),
        train.dim(),
        train.num_classes(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Discover(a) => cmd_discover(&s, a),
        Command::Decompose(a) => cmd_decompose(&s, a),
        Command::Edit(a) => cmd_edit(&s, a),
        Command::Retrieve(a) => cmd_retrieve(&s, a),
        Command::Report(a) => cmd_report(&s, a),
        Command::Sweep(a) => cmd_sweep(&s, a),
        Command::Synth(a) => cmd_synth(&s, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<scocca::Error>(),
                    Some(scocca::Error::Usage(_))
                )
            });
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
