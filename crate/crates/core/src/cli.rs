// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Every flag can also be given in a TOML config file (`--config`), one
//! section per subcommand with keys named like the flags (underscores instead
//! of dashes). Flags on the command line win.
//!
//! Item ids on the command line and in output files are the external ids of
//! the input tables. A network CSV has no external ids; its dense indices are
//! used as is.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    biased_benchmark, recommend_with, report_schema, sweep, Dataset, Method, MethodParams, SweepConfig, Task,
};
use crate::fairness::{AttributeTable, FairnessParams, ItemId, ItemSet};
use crate::ingest::{
    k_core, leave_one_out, load_attributes, load_interactions, load_vectors, parse_label_file, write_attributes,
    write_interactions, write_remap, write_vectors, AttributeRule, InteractionLog,
};
use crate::network::{crawl, RecNetwork};
use crate::provider::{with_meter, Oracle, ScoreProvider, TableProvider};
use crate::rank::{PprParams, PrivateRank};
use crate::recover::{
    classical_mds, procrustes_similarity, shortest_paths, spearman, DistanceMatrix, RecoveredEmbedding,
};
use crate::walk::WalkParams;

const DEFAULT_K: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "userrec", version, about = "User-side fair recommendation over black-box providers")]
struct Cli {
    /// TOML file with one section per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the JSON description of the sweep report and exit.
    #[arg(long)]
    schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean an interaction log: dedupe, k-core, dense ids, attributes, split.
    Ingest(IngestArgs),
    /// Query every item once and write the recommendation network.
    Crawl(CrawlArgs),
    /// Fair recommendation list for one source item.
    Recommend(RecommendArgs),
    /// Recover item coordinates from the provider's k-NN graph.
    Recover(RecoverArgs),
    /// Fairness and accuracy trade-off over a range of tau.
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Crawl(_) => "crawl",
            Command::Recommend(_) => "recommend",
            Command::Recover(_) => "recover",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ProviderArgs {
    /// knn, cosine, dot or table; inferred from the input when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    provider: Option<String>,
    /// Item features CSV (knn).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<PathBuf>,
    /// Item embeddings CSV (dot).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    embeddings: Option<PathBuf>,
    /// Interactions CSV (cosine).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    interactions: Option<PathBuf>,
    /// Recommendation network CSV (table).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<PathBuf>,
    /// Provider list length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct IngestArgs {
    /// Raw `user,item[,timestamp]` CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    interactions: Option<PathBuf>,
    /// Minimum interactions per user and per item.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_core: Option<usize>,
    /// `item,label` CSV giving the sensitive attribute.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<PathBuf>,
    /// Items with fewer interactions are protected.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    popularity_threshold: Option<usize>,
    /// Seed for the leave-one-out order of logs without timestamps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Directory for the cleaned tables.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CrawlArgs {
    #[command(flatten)]
    #[serde(flatten)]
    provider: ProviderArgs,
    /// Network CSV; standard output when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RecommendArgs {
    #[command(flatten)]
    #[serde(flatten)]
    provider: ProviderArgs,
    /// `item,label` CSV giving the sensitive attribute.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    attributes: Option<PathBuf>,
    /// Protect items with fewer interactions (cosine provider only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    popularity_threshold: Option<usize>,
    /// provider, privaterank, privatewalk, consul, random_fair or oracle_fair.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    /// Source item id.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<u64>,
    /// Minimum items per group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<usize>,
    /// PrivateRank damping factor.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// PrivateRank power iterations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    /// Walk length (PrivateWalk) or page budget (Consul).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<usize>,
    /// Seed of the randomized methods.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Items the user already knows, excluded from the list.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    history: Option<Vec<u64>>,
    /// List CSV; standard output when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RecoverArgs {
    #[command(flatten)]
    #[serde(flatten)]
    provider: ProviderArgs,
    /// Target dimension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    /// Keep only reciprocated edges instead of symmetrizing.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    mutual: Option<bool>,
    /// Ground-truth coordinates CSV for diagnostics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<PathBuf>,
    /// Embeddings CSV; standard output when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Diagnostics JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SweepArgs {
    /// synthetic, features or interactions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    /// Items in the synthetic dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Seed of the synthetic dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data_seed: Option<u64>,
    /// Item features CSV (features dataset).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<PathBuf>,
    /// Interactions CSV (interactions dataset).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    interactions: Option<PathBuf>,
    /// `item,label` CSV giving the sensitive attribute.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    attributes: Option<PathBuf>,
    /// `item,label` CSV of class labels (features dataset).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classes: Option<PathBuf>,
    /// Protect rarely interacted items (interactions dataset without attributes).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    popularity_threshold: Option<usize>,
    /// List length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    /// Comma-separated methods; all when omitted.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    methods: Option<Vec<Method>>,
    /// Comma-separated tau values; 0 to K / 2 when omitted.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    taus: Option<Vec<usize>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    /// Queries per seed; all sources when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    queries: Option<usize>,
    /// PrivateRank damping factor.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    /// PrivateRank power iterations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    /// PrivateWalk walk length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    privatewalk_steps: Option<usize>,
    /// Consul page budget.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    consul_steps: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    /// csv or json; taken from the output extension when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
    /// Report file; standard output when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.schema {
        let schema = serde_json::to_string_pretty(&report_schema()).expect("static schema");
        let _ = writeln!(io::stdout(), "{schema}");
        return 0;
    }
    let Some(command) = cli.command else {
        let _ = Cli::command().write_help(&mut io::stderr());
        return 2;
    };
    match dispatch(command, cli.config.as_deref()) {
        Ok(()) => 0,
        // a closed pipe downstream (`| head`) is not a failure
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, config: Option<&Path>) -> Result<()> {
    let section = load_section(config, command.name())?;
    match command {
        Command::Ingest(a) => ingest(merge(a, section)?),
        Command::Crawl(a) => crawl_cmd(merge(a, section)?),
        Command::Recommend(a) => recommend(merge(a, section)?),
        Command::Recover(a) => recover(merge(a, section)?),
        Command::Sweep(a) => sweep_cmd(merge(a, section)?),
    }
}

fn load_section(config: Option<&Path>, name: &str) -> Result<toml::Table> {
    let Some(path) = config else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let section = match doc.remove(name) {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t,
        Some(_) => {
            return Err(Error::InvalidInput(format!(
                "{}: [{name}] must be a table",
                path.display()
            )))
        }
    };
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(name).expect("known subcommand");
    let known: Vec<String> = sub.get_arguments().map(|a| a.get_id().to_string()).collect();
    for key in section.keys() {
        if !known.iter().any(|k| k == key) {
            return Err(Error::InvalidInput(format!(
                "{}: unknown key {key:?} in [{name}]",
                path.display()
            )));
        }
    }
    Ok(section)
}

/// Config-file values overlaid by command-line values.
fn merge<T: Serialize + DeserializeOwned>(flags: T, mut file: toml::Table) -> Result<T> {
    let flags = toml::Table::try_from(&flags).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
    file.extend(flags);
    toml::Value::Table(file)
        .try_into()
        .map_err(|e| Error::InvalidInput(format!("config: {e}")))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("missing --{flag}")))
}

/// Writes through a temporary file in the target directory, renamed into
/// place on success.
fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
            {
                let mut w = BufWriter::new(tmp.as_file());
                f(&mut w)?;
                w.flush().map_err(|e| Error::io(path, e))?;
            }
            tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

enum Loaded {
    Score(ScoreProvider),
    Table(TableProvider),
}

struct LoadedProvider {
    provider: Loaded,
    item_ids: Vec<u64>,
    log: Option<InteractionLog>,
}

impl LoadedProvider {
    fn oracle(&self) -> &(dyn Oracle + Sync) {
        match &self.provider {
            Loaded::Score(p) => p,
            Loaded::Table(p) => p,
        }
    }

    fn scores(&self) -> Option<&ScoreProvider> {
        match &self.provider {
            Loaded::Score(p) => Some(p),
            Loaded::Table(_) => None,
        }
    }

    fn dense(&self, external: u64) -> Result<ItemId> {
        self.item_ids
            .binary_search(&external)
            .map(ItemId::new)
            .map_err(|_| Error::InvalidInput(format!("unknown item {external}")))
    }

    fn external(&self, item: ItemId) -> u64 {
        self.item_ids[item.index()]
    }
}

fn load_provider(a: &ProviderArgs) -> Result<LoadedProvider> {
    let kind = match &a.provider {
        Some(p) => p.as_str(),
        None if a.features.is_some() => "knn",
        None if a.embeddings.is_some() => "dot",
        None if a.interactions.is_some() => "cosine",
        None if a.network.is_some() => "table",
        None => {
            return Err(Error::InvalidInput(
                "no provider input; give --features, --embeddings, --interactions or --network".into(),
            ))
        }
    };
    let k = a.k.unwrap_or(DEFAULT_K);
    match kind {
        "knn" => {
            let t = load_vectors(&required(a.features.clone(), "features")?)?;
            Ok(LoadedProvider {
                provider: Loaded::Score(ScoreProvider::knn(&t, k)?),
                item_ids: t.item_ids().to_vec(),
                log: None,
            })
        }
        "dot" => {
            let t = load_vectors(&required(a.embeddings.clone(), "embeddings")?)?;
            Ok(LoadedProvider {
                provider: Loaded::Score(ScoreProvider::dot(&t, k)?),
                item_ids: t.item_ids().to_vec(),
                log: None,
            })
        }
        "cosine" => {
            let log = load_interactions(&required(a.interactions.clone(), "interactions")?)?;
            Ok(LoadedProvider {
                provider: Loaded::Score(ScoreProvider::cosine(&log, k)?),
                item_ids: log.item_ids().to_vec(),
                log: Some(log),
            })
        }
        "table" => {
            let path = required(a.network.clone(), "network")?;
            let net = RecNetwork::read_csv(open(&path)?, &path.display().to_string(), None, a.k)?;
            let n = net.n();
            Ok(LoadedProvider {
                provider: Loaded::Table(TableProvider::new(net.k(), net.lists())?),
                item_ids: (0..n as u64).collect(),
                log: None,
            })
        }
        other => Err(Error::InvalidInput(format!(
            "unknown provider {other:?}; expected knn, cosine, dot or table"
        ))),
    }
}

fn resolve_attributes(
    attributes: Option<&Path>,
    popularity_threshold: Option<usize>,
    loaded: &LoadedProvider,
) -> Result<AttributeTable> {
    match (attributes, popularity_threshold) {
        (Some(path), None) => load_attributes(AttributeRule::LabelFile(path), &loaded.item_ids),
        (None, Some(threshold)) => {
            let log = loaded.log.as_ref().ok_or_else(|| {
                Error::InvalidInput("--popularity-threshold needs an interactions provider".into())
            })?;
            load_attributes(AttributeRule::Popularity { log, threshold }, &loaded.item_ids)
        }
        (Some(_), Some(_)) => Err(Error::InvalidInput(
            "give either --attributes or --popularity-threshold, not both".into(),
        )),
        (None, None) => Err(Error::InvalidInput(
            "missing --attributes (or --popularity-threshold)".into(),
        )),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let path = required(a.interactions, "interactions")?;
    let out_dir = required(a.out_dir, "out-dir")?;
    let raw = load_interactions(&path)?;
    let core = k_core(&raw, a.k_core.unwrap_or(1))?;
    if core.is_empty() {
        return Err(Error::Empty(format!(
            "{}: nothing survives the {}-core",
            path.display(),
            a.k_core.unwrap_or(1)
        )));
    }
    let log = core.log;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let file = |name: &str| out_dir.join(name);
    write_output(Some(&file("interactions.csv")), |w| write_interactions(&log, w))?;
    write_output(Some(&file("items.csv")), |w| write_remap(log.item_ids(), w))?;
    write_output(Some(&file("users.csv")), |w| write_remap(log.user_ids(), w))?;
    let attrs = match (a.labels, a.popularity_threshold) {
        (Some(p), None) => Some(load_attributes(AttributeRule::LabelFile(&p), log.item_ids())?),
        (None, Some(threshold)) => Some(load_attributes(
            AttributeRule::Popularity { log: &log, threshold },
            log.item_ids(),
        )?),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(
                "give either --labels or --popularity-threshold, not both".into(),
            ))
        }
        (None, None) => None,
    };
    if let Some(attrs) = &attrs {
        write_output(Some(&file("attributes.csv")), |w| write_attributes(attrs, log.item_ids(), w))?;
    }
    let split = leave_one_out(&log, a.seed.unwrap_or(0))?;
    write_output(Some(&file("split.csv")), |w| {
        writeln!(w, "user,source,positive").map_err(|e| Error::io("split.csv", e))?;
        for s in &split.users {
            writeln!(
                w,
                "{},{},{}",
                log.user_ids()[s.user as usize],
                log.item_ids()[s.source.index()],
                log.item_ids()[s.positive.index()]
            )
            .map_err(|e| Error::io("split.csv", e))?;
        }
        Ok(())
    })?;
    eprintln!(
        "{} interactions, {} users, {} items ({} users and {} items removed)",
        log.len(),
        log.n_users(),
        log.n_items(),
        core.removed_users,
        core.removed_items
    );
    Ok(())
}

fn crawl_cmd(a: CrawlArgs) -> Result<()> {
    let loaded = load_provider(&a.provider)?;
    let (metered, meter) = with_meter(loaded.oracle());
    let net = crawl(&metered)?;
    write_output(a.out.as_deref(), |w| net.write_csv(w))?;
    eprintln!("{} pages, {} edges", meter.distinct(), net.n_edges());
    Ok(())
}

fn recommend(a: RecommendArgs) -> Result<()> {
    let loaded = load_provider(&a.provider)?;
    let attrs = resolve_attributes(a.attributes.as_deref(), a.popularity_threshold, &loaded)?;
    let method = required(a.method, "method")?;
    let oracle = loaded.oracle();
    let params = FairnessParams::new(oracle.k(), a.tau.unwrap_or(0), &attrs)?;
    let source = loaded.dense(required(a.source, "source")?)?;
    let history: ItemSet = a
        .history
        .unwrap_or_default()
        .into_iter()
        .map(|h| loaded.dense(h))
        .collect::<Result<_>>()?;
    let default_steps = match method {
        Method::Consul => WalkParams::CONSUL_DEFAULT_STEPS,
        _ => WalkParams::PRIVATEWALK_DEFAULT_STEPS,
    };
    let steps = a.max_steps.unwrap_or(default_steps);
    let mp = MethodParams {
        ppr: PprParams::new(
            a.c.unwrap_or(PprParams::DEFAULT_C),
            a.iterations.unwrap_or(PprParams::DEFAULT_ITERATIONS),
        )?,
        privatewalk_steps: steps,
        consul_steps: steps,
    };
    WalkParams::new(steps, 0)?;
    let pr = match method {
        Method::PrivateRank => Some(PrivateRank::crawl(oracle, mp.ppr)?),
        _ => None,
    };
    let (metered, meter) = with_meter(oracle);
    let rec = recommend_with(
        method,
        &metered,
        loaded.scores(),
        pr.as_ref(),
        source,
        &attrs,
        params,
        &mp,
        a.seed.unwrap_or(0),
        &history,
    )?;
    write_output(a.out.as_deref(), |w| {
        let e = |e| Error::io("recommendation", e);
        writeln!(w, "rank,item,group,fallback").map_err(e)?;
        for (r, (item, fb)) in rec.list.iter().zip(&rec.from_fallback).enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                r + 1,
                loaded.external(item),
                attrs.name(attrs.group_of(item)),
                u8::from(*fb)
            )
            .map_err(e)?;
        }
        Ok(())
    })?;
    let accesses = match method {
        Method::PrivateRank => oracle.n_items() as u64,
        _ => meter.distinct(),
    };
    eprintln!("{accesses} pages accessed");
    if rec.short {
        eprintln!("warning: only {} eligible items, list is short", rec.list.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct RecoverReport {
    n: usize,
    dim: usize,
    accesses: u64,
    symmetrized: bool,
    disconnected: bool,
    padded: bool,
    eigenvalues: Vec<f64>,
    distance_spearman: Option<f64>,
    procrustes_rmse: Option<f64>,
    truth_diameter: Option<f64>,
}

fn recover(a: RecoverArgs) -> Result<()> {
    let loaded = load_provider(&a.provider)?;
    let dim = a.dim.unwrap_or(2);
    let symmetrize = !a.mutual.unwrap_or(false);
    let (metered, meter) = with_meter(loaded.oracle());
    let net = crawl(&metered)?;
    let paths = shortest_paths(&net, symmetrize);
    let mds = classical_mds(&paths.distances, dim)?;
    let mut report = RecoverReport {
        n: net.n(),
        dim,
        accesses: meter.distinct(),
        symmetrized: symmetrize,
        disconnected: paths.disconnected,
        padded: mds.padded,
        eigenvalues: mds.eigenvalues.iter().take(dim + 2).copied().collect(),
        distance_spearman: None,
        procrustes_rmse: None,
        truth_diameter: None,
    };
    if let Some(path) = &a.truth {
        let truth = load_vectors(path)?;
        if truth.item_ids() != loaded.item_ids || truth.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "{}: truth must cover the provider's items in {dim} dimensions",
                path.display()
            )));
        }
        let td = DistanceMatrix::euclidean(truth.values(), dim)?.upper_triangle();
        let rd = DistanceMatrix::euclidean(mds.embedding.coords(), dim)?.upper_triangle();
        report.distance_spearman = Some(spearman(&rd, &td));
        report.truth_diameter = Some(td.iter().copied().fold(0.0, f64::max));
        let y = RecoveredEmbedding::new(truth.n_items(), dim, truth.values().to_vec())?;
        report.procrustes_rmse = Some(procrustes_similarity(&mds.embedding, &y)?.rmse);
    }
    let table = mds.embedding.to_table(loaded.item_ids.clone())?;
    write_output(a.out.as_deref(), |w| write_vectors(&table, w))?;
    let json = serde_json::to_string_pretty(&report).expect("plain report");
    match &a.diagnostics {
        Some(p) => write_output(Some(p), |w| writeln!(w, "{json}").map_err(|e| Error::io(p, e)))?,
        None => eprintln!("{json}"),
    }
    if paths.disconnected {
        eprintln!("warning: graph is disconnected; missing distances capped at {}", net.n());
    }
    Ok(())
}

fn class_labels(path: &Path, item_ids: &[u64]) -> Result<Vec<u32>> {
    let raw = parse_label_file(open(path)?, &path.display().to_string())?;
    let names: std::collections::BTreeSet<&str> = raw.values().map(String::as_str).collect();
    let index: BTreeMap<&str, u32> = names.into_iter().zip(0..).collect();
    item_ids
        .iter()
        .map(|id| {
            raw.get(id)
                .map(|l| index[l.as_str()])
                .ok_or_else(|| Error::InvalidInput(format!("item {id} has no class label")))
        })
        .collect()
}

fn build_dataset(a: &SweepArgs, k: usize) -> Result<Dataset> {
    let kind = a.dataset.as_deref().unwrap_or("synthetic");
    match kind {
        "synthetic" => {
            let n = a.n.unwrap_or(1000);
            let b = biased_benchmark(n, k / 2, a.data_seed.unwrap_or(0))?;
            Ok(Dataset {
                name: format!("synthetic-{n}"),
                provider: ScoreProvider::knn(&b.features, k)?,
                attrs: b.attrs,
                task: Task::SameLabel(b.labels),
            })
        }
        "features" => {
            let path = required(a.features.clone(), "features")?;
            let t = load_vectors(&path)?;
            let attrs = load_attributes(
                AttributeRule::LabelFile(&required(a.attributes.clone(), "attributes")?),
                t.item_ids(),
            )?;
            let labels = class_labels(&required(a.classes.clone(), "classes")?, t.item_ids())?;
            Ok(Dataset {
                name: path.file_stem().map_or("features".into(), |s| s.to_string_lossy().into_owned()),
                provider: ScoreProvider::knn(&t, k)?,
                attrs,
                task: Task::SameLabel(labels),
            })
        }
        "interactions" => {
            let path = required(a.interactions.clone(), "interactions")?;
            let log = load_interactions(&path)?;
            let attrs = match (&a.attributes, a.popularity_threshold) {
                (Some(p), None) => load_attributes(AttributeRule::LabelFile(p), log.item_ids())?,
                (None, Some(threshold)) => load_attributes(
                    AttributeRule::Popularity { log: &log, threshold },
                    log.item_ids(),
                )?,
                _ => {
                    return Err(Error::InvalidInput(
                        "give exactly one of --attributes or --popularity-threshold".into(),
                    ))
                }
            };
            let split = leave_one_out(&log, a.data_seed.unwrap_or(0))?;
            Ok(Dataset {
                name: path.file_stem().map_or("interactions".into(), |s| s.to_string_lossy().into_owned()),
                provider: ScoreProvider::cosine(&log, k)?,
                attrs,
                task: Task::LeaveOneOut(split),
            })
        }
        other => Err(Error::InvalidInput(format!(
            "unknown dataset {other:?}; expected synthetic, features or interactions"
        ))),
    }
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let k = a.k.unwrap_or(DEFAULT_K);
    let format = match (a.format.as_deref(), a.out.as_ref().and_then(|p| p.extension())) {
        (Some(f), _) => f.to_string(),
        (None, Some(ext)) => ext.to_string_lossy().into_owned(),
        (None, None) => "csv".to_string(),
    };
    if format != "csv" && format != "json" {
        return Err(Error::InvalidInput(format!("unknown report format {format:?}")));
    }
    let config = SweepConfig {
        taus: a.taus.clone().unwrap_or_else(|| (0..=k / 2).collect()),
        seeds: a.seeds.clone().unwrap_or_else(|| vec![0]),
        methods: a.methods.clone().unwrap_or_else(|| Method::ALL.to_vec()),
        params: MethodParams {
            ppr: PprParams::new(
                a.c.unwrap_or(PprParams::DEFAULT_C),
                a.iterations.unwrap_or(PprParams::DEFAULT_ITERATIONS),
            )?,
            privatewalk_steps: WalkParams::new(
                a.privatewalk_steps.unwrap_or(WalkParams::PRIVATEWALK_DEFAULT_STEPS),
                0,
            )?
            .max_steps(),
            consul_steps: WalkParams::new(a.consul_steps.unwrap_or(WalkParams::CONSUL_DEFAULT_STEPS), 0)?
                .max_steps(),
        },
        queries: a.queries,
        threads: a.threads.unwrap_or(0),
    };
    let dataset = build_dataset(&a, k)?;
    let report = sweep(std::slice::from_ref(&dataset), &config)?;
    write_output(a.out.as_deref(), |w| match format.as_str() {
        "json" => report.write_json(w),
        _ => report.write_csv(w),
    })?;
    for row in &report.rows {
        if let Some(err) = &row.error {
            eprintln!("warning: {} tau={} failed: {err}", row.method, row.tau);
        }
    }
    Ok(())
}
