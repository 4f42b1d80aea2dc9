mod args;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use clenshaw_core::data::{generate_sbm, homophily, load_dataset, parse_labels, random_split, Dataset, SbmSpec};
use clenshaw_core::graph::{read_edge_list, Edge};
use clenshaw_core::models::{Checkpoint, ModelConfig, Variant};
use clenshaw_core::poly::{Basis, CoeffVector};
use clenshaw_core::spectral::{eig_sym_with_limit, filter_response, uniform_grid};
use clenshaw_core::train::{fit, for_each_seed, mean_std, TrainResult};
use clenshaw_core::verify::{parse_suite, run_suite};
use clenshaw_core::{normalized_adjacency, Error, Graph};

use args::{Cli, Command, FilterArgs, HomophilyArgs, SpectrumArgs, TrainArgs, VerifyArgs};
use manifest::{unix_now, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    /// Ran to completion but a check or a run failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Core(Error::Io { path: path.display().to_string(), source })
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) | CliError::Core(Error::Divergence { .. }) => 1,
            _ => 2,
        }
    }
}

/// What a command produced: the primary text artifact, extra files it wrote
/// and whether its checks passed.
struct Outcome {
    text: String,
    extra: Vec<PathBuf>,
    failure: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, extra: Vec::new(), failure: None }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(Error::OverDenseLimit { .. }) = e {
                eprintln!("hint: raise --dense-limit to compute the spectrum anyway");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let command = match command {
        Command::Replay(r) => {
            let mut recorded = RunManifest::load(&r.manifest)?.command;
            if let Command::Replay(_) = recorded {
                return Err(CliError::Usage("a manifest cannot record a replay".into()));
            }
            if r.out.is_some() {
                recorded.set_out(r.out);
            }
            recorded
        }
        c => c,
    };
    let started = unix_now();
    let outcome = match &command {
        Command::Verify(a) => cmd_verify(a)?,
        Command::Train(a) => cmd_train(a)?,
        Command::FilterResponse(a) => cmd_filter_response(a)?,
        Command::Homophily(a) => cmd_homophily(a)?,
        Command::Spectrum(a) => cmd_spectrum(a)?,
        Command::Replay(_) => unreachable!(),
    };
    match command.out() {
        Some(out) => {
            std::fs::write(out, &outcome.text).map_err(|e| CliError::io(out, e))?;
            let mut artifacts = vec![out.clone()];
            artifacts.extend(outcome.extra);
            let manifest = RunManifest {
                command: command.clone(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                artifacts,
                started_unix: started,
                finished_unix: unix_now(),
            };
            let path = manifest.write(out)?;
            eprintln!("wrote {} and {}", out.display(), path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(outcome.text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let suite = parse_suite(&a.suite)?;
    let report = run_suite(suite, a.seed, a.trials)?;
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        eprintln!(
            "{status} {}/{} cases={} max_error={:e} tolerance={:e}",
            c.suite, c.name, c.cases, c.max_error, c.tolerance
        );
        if let Some(f) = &c.failure {
            eprintln!("     case {} seed {}: error {:e} ({})", f.case, f.seed, f.error, f.detail);
        }
    }
    let mut text = report.to_json()?;
    text.push('\n');
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    let failure = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")));
    Ok(Outcome { text, extra: Vec::new(), failure })
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse seeds '{s}' (use a..b or a,b,c)"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse {what} value '{t}'"))))
        .collect()
}

fn parse_split(s: &str) -> Result<(f64, f64, f64), CliError> {
    match parse_floats(s, "split")?.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::Usage(format!("--split needs three fractions, got '{s}'"))),
    }
}

#[derive(Serialize)]
struct SeedRun {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<TrainResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct TrainSummary {
    variant: String,
    alphas_learned: bool,
    runs: Vec<SeedRun>,
    completed: usize,
    test_acc_mean: f64,
    test_acc_std: f64,
    val_acc_mean: f64,
    val_acc_std: f64,
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, CliError> {
    p.as_ref().ok_or_else(|| CliError::Usage(format!("missing --{flag} (or use --sbm)")))
}

fn cmd_train(a: &TrainArgs) -> Result<Outcome, CliError> {
    let variant =
        Variant::parse(&a.variant).ok_or_else(|| CliError::Usage(format!("unknown variant {}", a.variant)))?;
    let seeds = parse_seeds(&a.seeds)?;
    let proportions = parse_split(&a.split)?;
    let base = ModelConfig {
        variant,
        k: a.k,
        hidden: a.hidden,
        lambda: a.lambda,
        dropout: a.dropout,
        layer_dropout: !a.no_layer_dropout,
        lr_alpha: a.lr_alpha,
        lr_weights: a.lr_weights,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        fixed_alpha: a.fixed_alpha,
        seed: 0,
        max_epochs: a.max_epochs,
        patience: a.patience,
    };
    base.validate()?;
    let files = match &a.sbm {
        Some(_) => None,
        None => {
            let (e, f, l) = (
                require(&a.files.edges, "edges")?,
                require(&a.files.features, "features")?,
                require(&a.files.labels, "labels")?,
            );
            Some(load_dataset(e, f, l, a.normalize_features)?)
        }
    };
    let sbm = a.sbm.clone();

    let job = |seed: u64| -> Result<(TrainResult, Checkpoint), Error> {
        let generated;
        let dataset: &Dataset = match (&files, sbm.as_deref()) {
            (Some(d), _) => d,
            (None, Some("homo-default")) => {
                generated = generate_sbm(&SbmSpec::homophilic(seed))?;
                &generated
            }
            (None, _) => {
                generated = generate_sbm(&SbmSpec::heterophilic(seed))?;
                &generated
            }
        };
        let split = random_split(dataset.node_count(), proportions, seed)?;
        let config = ModelConfig { seed, ..base.clone() };
        let trained = fit(dataset, &split, &config)?;
        Ok((trained.result, Checkpoint::capture(&trained.model, &trained.store)))
    };
    let outcomes = for_each_seed(&seeds, job);

    let mut runs = Vec::new();
    let mut extra = Vec::new();
    let mut errors = Vec::new();
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok((result, checkpoint)) => {
                eprintln!(
                    "seed {seed}: test {:.4} val {:.4} best epoch {} of {}",
                    result.test_acc, result.best_val_acc, result.best_epoch, result.epochs
                );
                if let Some(out) = &a.out {
                    let path = checkpoint_path(out, seed);
                    checkpoint.save(&path)?;
                    extra.push(path);
                }
                runs.push(SeedRun { seed, result: Some(result), error: None });
            }
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                errors.push(format!("seed {seed}: {e}"));
                runs.push(SeedRun { seed, result: None, error: Some(e.to_string()) });
            }
        }
    }
    let tests: Vec<f64> = runs.iter().filter_map(|r| r.result.as_ref().map(|t| t.test_acc)).collect();
    let vals: Vec<f64> = runs.iter().filter_map(|r| r.result.as_ref().map(|t| t.best_val_acc)).collect();
    let (test_acc_mean, test_acc_std) = mean_std(&tests);
    let (val_acc_mean, val_acc_std) = mean_std(&vals);
    eprintln!("test accuracy {test_acc_mean:.4} ± {test_acc_std:.4} over {} seeds", tests.len());
    let summary = TrainSummary {
        variant: variant.name().to_string(),
        alphas_learned: variant.learns_alphas(),
        completed: tests.len(),
        runs,
        test_acc_mean,
        test_acc_std,
        val_acc_mean,
        val_acc_std,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
    text.push('\n');
    let failure = (!errors.is_empty()).then(|| errors.join("; "));
    Ok(Outcome { text, extra, failure })
}

fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.seed{seed}.ckpt.json"))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn graph_from_edges(path: &Path, nodes: Option<usize>) -> Result<Graph, CliError> {
    let edges: Vec<Edge> = read_edge_list(path)?;
    let implied = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
    let n = nodes.unwrap_or(implied);
    Ok(Graph::from_edges(&edges, n)?)
}

fn cmd_filter_response(a: &FilterArgs) -> Result<Outcome, CliError> {
    let coeffs = if let Some(path) = &a.checkpoint {
        let (model, store) = Checkpoint::load(path)?.restore()?;
        model.filter_coefficients(&store)?.ok_or_else(|| {
            CliError::Usage(format!(
                "{} holds a {} model, which has no residue filter",
                path.display(),
                model.config.variant.name()
            ))
        })?
    } else {
        let raw = match (&a.alphas, &a.alphas_file) {
            (Some(s), _) => parse_floats(s, "coefficient")?,
            (None, Some(p)) => {
                parse_floats(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?, "coefficient")?
            }
            (None, None) => return Err(CliError::Usage("give --alphas, --alphas-file or --checkpoint".into())),
        };
        let basis = Basis::parse(&a.basis).ok_or_else(|| CliError::Usage(format!("unknown basis {}", a.basis)))?;
        let c = CoeffVector::new(raw, basis)?;
        if a.reverse {
            c.reversed()
        } else {
            c
        }
    };
    let grid = match &a.spectrum_of {
        Some(edges) => {
            let g = graph_from_edges(edges, a.nodes)?;
            eig_sym_with_limit(&normalized_adjacency(&g).to_dense(), a.dense_limit)?.mu
        }
        None => uniform_grid(a.grid),
    };
    let mut text = String::from("mu,h\n");
    for (mu, h) in filter_response(&coeffs, &grid) {
        text.push_str(&format!("{},{}\n", fmt17(mu), fmt17(h)));
    }
    Ok(Outcome::ok(text))
}

#[derive(Serialize)]
struct HomophilyReport {
    nodes: usize,
    edges: usize,
    classes: usize,
    homophily: f64,
}

fn cmd_homophily(a: &HomophilyArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&a.labels).map_err(|e| CliError::io(&a.labels, e))?;
    let labels = parse_labels(&text, &a.labels.display().to_string())?;
    let g = graph_from_edges(&a.edges, Some(labels.len()))?;
    let report = HomophilyReport {
        nodes: g.node_count(),
        edges: g.edge_count(),
        classes: labels.iter().max().map_or(0, |m| m + 1),
        homophily: homophily(&g, &labels)?,
    };
    eprintln!("homophily {}", report.homophily);
    let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    text.push('\n');
    Ok(Outcome::ok(text))
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<Outcome, CliError> {
    let g = graph_from_edges(&a.edges, a.nodes)?;
    let d = eig_sym_with_limit(&normalized_adjacency(&g).to_dense(), a.dense_limit)?;
    let mut text = String::from("mu\n");
    for mu in d.mu {
        text.push_str(&fmt17(mu));
        text.push('\n');
    }
    Ok(Outcome::ok(text))
}
