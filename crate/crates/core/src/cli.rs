//! Command-line driver. `run` takes the argument list and output streams so
//! it can be exercised without spawning a process.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::frontend::View;
use crate::graphs::{build_bundle, to_dot, to_json, GraphError};
use crate::model::{score_pair, ModelConfig, ModelError, Pooling};
use crate::numcore::NumError;
use crate::pipeline::{
    evaluate, history_csv, load_dataset, run_ablation, score_pairs, toygen, train, tune_threshold,
    AblationGrid, AblationRow, Checkpoint, PipelineError, TrainConfig,
};
use crate::featurize::featurize_bundle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "magnet", version, about = "Multi-graph code clone detection")]
struct Cli {
    /// key=value file with defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export the AST, CFG or DFG of a source file.
    Graph(GraphArgs),
    /// Train a model and write a checkpoint plus a history CSV.
    Train(TrainArgs),
    /// Score a labelled pair list and print metrics JSON.
    Eval(EvalArgs),
    /// Score two source files.
    Compare(CompareArgs),
    /// Write the synthetic clone corpus.
    Toygen(ToygenArgs),
    /// Train and evaluate a grid of model variants.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ViewChoice {
    Ast,
    Cfg,
    Dfg,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    view: ViewChoice,
    #[arg(long, value_enum, default_value = "dot")]
    format: Format,
    /// Output path; with `--view all` the view name is inserted before the
    /// extension. Stdout when omitted and a single view is requested.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Comma-separated subset of ast,cfg,dfg
    #[arg(long, default_value = "ast,cfg,dfg")]
    views: String,
    #[arg(long)]
    no_residual: bool,
    #[arg(long)]
    no_intra_attn: bool,
    #[arg(long)]
    no_cross_attn: bool,
    /// set2set, mean or global_attn
    #[arg(long, default_value = "set2set")]
    pooling: String,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, default_value_t = 64)]
    head_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
}

#[derive(Args, Debug, Clone)]
struct TrainingArgs {
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, env = "MAGNET_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Cap on training pairs per epoch
    #[arg(long)]
    max_train_pairs: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// History CSV path; defaults to `<out>.history.csv`
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    /// Decision threshold; defaults to the one stored in the checkpoint
    #[arg(long, conflicts_with = "tune_sigma")]
    sigma: Option<f64>,
    /// Pick the F1-maximising threshold on these pairs
    #[arg(long)]
    tune_sigma: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct ToygenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "MAGNET_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GridChoice {
    /// Every view subset, the component factorial and all poolings
    Full,
    /// View subsets only
    Views,
    /// Component factorial and poolings only
    Components,
    /// Just the configuration given by the model flags
    Single,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    /// Results CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    grid: GridChoice,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Debug)]
enum CliError {
    User(String),
    Internal(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let internal = match &e {
            PipelineError::Model(m) => model_error_is_internal(m),
            PipelineError::Num(n) => num_error_is_internal(n),
            _ => false,
        };
        if internal {
            CliError::Internal(e.to_string())
        } else {
            CliError::User(e.to_string())
        }
    }
}

fn num_error_is_internal(e: &NumError) -> bool {
    !matches!(e, NumError::VersionMismatch { .. } | NumError::Format(_) | NumError::Io(_))
}

fn model_error_is_internal(e: &ModelError) -> bool {
    match e {
        ModelError::Num(n) => num_error_is_internal(n),
        ModelError::InvalidConfig(_) | ModelError::EmptyGraph => false,
        _ => true,
    }
}

type R<T> = Result<T, CliError>;

fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config_file(args) {
        Ok(a) => a,
        Err(CliError::User(m)) | Err(CliError::Internal(m)) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_USER;
        }
    };
    let cli = match parse_cli(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Graph(a) => cmd_graph(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Toygen(a) => cmd_toygen(a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::User(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USER
        }
        Err(CliError::Internal(m)) => {
            let _ = writeln!(err, "internal error: {m}");
            EXIT_INTERNAL
        }
    }
}

/// Repeated flags override earlier ones, which is what lets config-file
/// values sit under explicit flags.
fn parse_cli(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

/// Splices `key=value` lines from `--config FILE` in front of the explicit
/// flags of the subcommand, so explicit flags win. Keys are long flag names;
/// boolean flags take `true` or `false`.
fn merge_config_file(mut args: Vec<OsString>) -> R<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            let v = args.get(i + 1).ok_or_else(|| user("--config needs a file"))?;
            path = Some(PathBuf::from(v));
            args.drain(i..i + 2);
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(v));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(args) };
    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(args);
    };
    let sub_pos = sub_pos + 1;
    let sub_name = args[sub_pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&sub_name) else { return Ok(args) };

    let text = fs::read_to_string(&path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| user(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        entries.insert(k.trim().replace('_', "-"), (n + 1, v.trim().to_string()));
    }

    let mut injected = Vec::new();
    for (key, (line, value)) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| user(format!("{}:{line}: unknown key `{key}`", path.display())))?;
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}={value}")));
        } else {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(user(format!(
                        "{}:{line}: `{key}` takes true or false",
                        path.display()
                    )))
                }
            }
        }
    }
    let tail = args.split_off(sub_pos + 1);
    args.extend(injected);
    args.extend(tail);
    Ok(args)
}

fn parse_views(s: &str) -> R<Vec<View>> {
    let mut views = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let v = View::parse(part).ok_or_else(|| user(format!("unknown view `{part}`")))?;
        if !views.contains(&v) {
            views.push(v);
        }
    }
    if views.is_empty() {
        return Err(user("no views given"));
    }
    Ok(views)
}

impl ModelArgs {
    fn to_config(&self) -> R<ModelConfig> {
        let cfg = ModelConfig {
            d: self.dim,
            layers: self.layers,
            heads: self.heads,
            head_dim: self.head_dim,
            dropout: self.dropout,
            use_residual: !self.no_residual,
            use_intra_attn: !self.no_intra_attn,
            use_cross_attn: !self.no_cross_attn,
            pooling: Pooling::parse(&self.pooling)
                .ok_or_else(|| user(format!("unknown pooling `{}`", self.pooling)))?,
            views: parse_views(&self.views)?,
            ..ModelConfig::default()
        };
        cfg.validate().map_err(|e| user(e.to_string()))?;
        Ok(cfg)
    }
}

impl TrainingArgs {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            lr: self.lr,
            seed: self.seed,
            val_fraction: self.val_fraction,
            test_fraction: self.test_fraction,
            max_train_pairs: self.max_train_pairs,
            ..TrainConfig::default()
        }
    }
}

fn read_source(path: &Path) -> R<String> {
    fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> R<()> {
    fs::write(path, text).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> R<()> {
    writeln!(out, "{text}").map_err(|e| user(format!("stdout: {e}")))
}

fn to_json_line<T: serde::Serialize>(v: &T) -> R<String> {
    serde_json::to_string(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn graph_error(path: &Path, e: GraphError) -> CliError {
    user(format!("{}: {e}", path.display()))
}

/// `g.dot` becomes `g.cfg.dot`; a path without extension gets `.cfg`.
fn view_path(out: &Path, view: View) -> PathBuf {
    match (out.file_stem(), out.extension()) {
        (Some(stem), Some(ext)) => out.with_file_name(format!(
            "{}.{}.{}",
            stem.to_string_lossy(),
            view,
            ext.to_string_lossy()
        )),
        _ => {
            let mut s = out.as_os_str().to_owned();
            s.push(format!(".{view}"));
            PathBuf::from(s)
        }
    }
}

fn cmd_graph(a: GraphArgs, out: &mut dyn Write) -> R<()> {
    let src = read_source(&a.input)?;
    let id = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let bundle = build_bundle(&src, &id).map_err(|e| graph_error(&a.input, e))?;
    let render = |v: View| match a.format {
        Format::Dot => to_dot(bundle.view(v)),
        Format::Json => to_json(bundle.view(v)) + "\n",
    };
    let single = match a.view {
        ViewChoice::Ast => Some(View::Ast),
        ViewChoice::Cfg => Some(View::Cfg),
        ViewChoice::Dfg => Some(View::Dfg),
        ViewChoice::All => None,
    };
    match (single, &a.out) {
        (Some(v), Some(path)) => write_file(path, &render(v)),
        (Some(v), None) => out.write_all(render(v).as_bytes()).map_err(|e| user(e.to_string())),
        (None, Some(path)) => {
            for v in View::ALL {
                write_file(&view_path(path, v), &render(v))?;
            }
            Ok(())
        }
        (None, None) => Err(user("--view all needs --out")),
    }
}

fn cmd_toygen(a: ToygenArgs, out: &mut dyn Write) -> R<()> {
    let corpus = toygen::generate(a.seed);
    corpus.write_to(&a.out)?;
    let summary = serde_json::json!({
        "dir": a.out,
        "fragments": corpus.fragments.len(),
        "pairs": corpus.pairs.len(),
        "manifest": a.out.join("manifest.tsv"),
        "pairs_file": a.out.join("pairs.tsv"),
    });
    emit(out, &summary.to_string())
}

fn load(manifest: &Path, pairs: &Path) -> R<crate::pipeline::Dataset> {
    let ds = load_dataset(manifest, pairs)?;
    if ds.pairs.is_empty() {
        return Err(PipelineError::NoPairs.into());
    }
    Ok(ds)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> R<()> {
    let model = a.model.to_config()?;
    let tcfg = a.training.to_config();
    let ds = load(&a.manifest, &a.pairs)?;
    let outcome = train(&ds, &model, &tcfg)?;
    let ck = &outcome.checkpoint;
    ck.save(&a.out)?;
    let history_path = a.history.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    write_file(&history_path, &history_csv(&outcome.history))?;

    let test = if outcome.splits.test.is_empty() {
        None
    } else {
        Some(evaluate(&ck.params, &ck.model, &ck.vocab, &ds, &outcome.splits.test, ck.sigma)?)
    };
    let summary = serde_json::json!({
        "checkpoint": a.out,
        "history": history_path,
        "sigma": ck.sigma,
        "best_val_loss": ck.best_val_loss,
        "test": test,
    });
    emit(out, &summary.to_string())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> R<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let ds = load(&a.manifest, &a.pairs)?;
    let all: Vec<usize> = (0..ds.pairs.len()).collect();
    let sigma = if a.tune_sigma {
        let scores = score_pairs(&ck.params, &ck.model, &ck.vocab, &ds, &all)?;
        let labels: Vec<bool> = ds.pairs.iter().map(|p| p.label).collect();
        tune_threshold(&scores, &labels)?
    } else {
        a.sigma.unwrap_or(ck.sigma)
    };
    let m = evaluate(&ck.params, &ck.model, &ck.vocab, &ds, &all, sigma)?;
    emit(out, &to_json_line(&m)?)
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> R<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let mut bundles = Vec::new();
    for path in [&a.a, &a.b] {
        let src = read_source(path)?;
        let b = build_bundle(&src, &path.to_string_lossy()).map_err(|e| graph_error(path, e))?;
        bundles.push(featurize_bundle(&b, &ck.vocab, ck.model.adjacency));
    }
    let s = match score_pair(&ck.params, &ck.model, &bundles[0], &bundles[1]) {
        Ok(s) => s,
        Err(ModelError::Num(NumError::ZeroVector)) => 0.0,
        Err(e) => return Err(PipelineError::from(e).into()),
    };
    let sigma = a.sigma.unwrap_or(ck.sigma);
    emit(out, &format!("score={s:.6} clone={}", u8::from(s > sigma)))
}

fn cmd_ablate(a: AblateArgs, out: &mut dyn Write) -> R<()> {
    let base = a.model.to_config()?;
    let tcfg = a.training.to_config();
    let ds = load(&a.manifest, &a.pairs)?;
    let full = AblationGrid::full();
    let single = AblationGrid::single(&base);
    let grid = match a.grid {
        GridChoice::Full => full,
        GridChoice::Single => single,
        GridChoice::Views => AblationGrid { view_subsets: full.view_subsets, ..single },
        GridChoice::Components => AblationGrid { view_subsets: single.view_subsets.clone(), ..full },
    };
    let variants = grid.variants(&base);
    let rows = run_ablation(&ds, &variants, &tcfg)?;
    let mut csv = String::from(AblationRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write_file(&a.out, &csv)?;
    emit(out, &to_json_line(&rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn unknown_flag_is_rejected() {
        let (code, _, err) = run_capture(&["magnet", "toygen", "--out", "x", "--bogus"]);
        assert_eq!(code, EXIT_USER);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn train_defaults() {
        let cli = Cli::try_parse_from(["magnet", "train", "--manifest", "m", "--pairs", "p", "--out", "o"])
            .unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        let c = t.training.to_config();
        assert_eq!((c.epochs, c.batch_size, c.lr), (5, 10, 5e-4));
        assert_eq!(t.model.to_config().unwrap(), ModelConfig::default());
    }

    #[test]
    fn view_flag_maps_to_config() {
        let cli = Cli::try_parse_from([
            "magnet", "train", "--manifest", "m", "--pairs", "p", "--out", "o", "--views", "cfg",
            "--no-residual", "--pooling", "mean",
        ])
        .unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        let m = t.model.to_config().unwrap();
        assert_eq!(m.views, vec![View::Cfg]);
        assert!(!m.use_residual && m.use_intra_attn);
        assert_eq!(m.pooling, Pooling::Mean);
    }

    #[test]
    fn config_file_sits_under_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        fs::write(&cfg, "# defaults\nepochs = 3\nlr=0.01\nno-cross-attn = true\nno_residual=false\n").unwrap();
        let args: Vec<OsString> = ["magnet", "train", "--config", cfg.to_str().unwrap(), "--manifest", "m",
            "--pairs", "p", "--out", "o", "--epochs", "2"]
            .iter()
            .map(OsString::from)
            .collect();
        let merged = merge_config_file(args).unwrap();
        let cli = parse_cli(merged).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.training.epochs, 2);
        assert_eq!(t.training.lr, 0.01);
        assert!(t.model.no_cross_attn && !t.model.no_residual);
    }

    #[test]
    fn config_file_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        fs::write(&cfg, "epochz = 3\n").unwrap();
        let (code, _, err) = run_capture(&["magnet", "toygen", "--config", cfg.to_str().unwrap(), "--out", "x"]);
        assert_eq!(code, EXIT_USER);
        assert!(err.contains("epochz"), "{err}");
    }

    #[test]
    fn view_paths() {
        assert_eq!(view_path(Path::new("d/g.dot"), View::Cfg), PathBuf::from("d/g.cfg.dot"));
        assert_eq!(view_path(Path::new("g"), View::Ast), PathBuf::from("g.ast"));
    }
}
