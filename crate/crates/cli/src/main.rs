use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vspfit_core::analysis::{
    average_rank, consensus_order, depth_posterior, edge_marginals, ess, savage_dickey_bf, scalar_series, waic_elpd,
    AnalysisError, BoundaryBayesFactors, Waic, DEFAULT_EPS_STRONG, DEFAULT_EPS_WEAK,
};
use vspfit_core::io::{
    dataset_stats, dataset_to_string, export_dot, filter_lpa, parse_dataset, parse_order, partial_path, read_trace,
    write_atomic, RunConfig, TraceWriter,
};
use vspfit_core::mcmc::{Chain, ChainTrace, McmcError, Parameterization};
use vspfit_core::observation::simulate_dataset;
use vspfit_core::{count_le, ActorSubset, Mdt, ObsModel, RankDataset};

#[derive(Parser)]
#[command(name = "vspfit", version, about = "Bayesian inference of series-parallel partial orders from rank lists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate rank lists from a known order.
    Simulate(SimulateArgs),
    /// Run an MCMC chain and write its trace.
    Fit(FitArgs),
    /// Posterior summaries of a trace: marginals, consensus, ranks, depth.
    Summarize(SummarizeArgs),
    /// WAIC and boundary Bayes factors for one or more traces.
    Compare(CompareArgs),
    /// Print the number of linear extensions of a series-parallel order.
    CountLe { order: PathBuf },
    /// Report whether an order is vertex-series-parallel.
    CheckVsp { order: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    #[value(name = "qj-u")]
    QjU,
    #[value(name = "qj-d")]
    QjD,
    #[value(name = "qj-b")]
    QjB,
}

impl From<ModelArg> for ObsModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::QjU => ObsModel::QjU,
            ModelArg::QjD => ObsModel::QjD,
            ModelArg::QjB => ObsModel::QjB,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Bdt,
    Mdt,
}

impl From<ParamArg> for Parameterization {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Bdt => Parameterization::Bdt,
            ParamArg::Mdt => Parameterization::Mdt,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// True order as a tree or relation JSON file.
    #[arg(long)]
    order: PathBuf,
    #[arg(long, default_value_t = 50)]
    lists: usize,
    /// Actors per list, drawn at random; all actors when omitted.
    #[arg(long)]
    list_size: Option<usize>,
    #[arg(long, value_enum, default_value = "qj-u")]
    model: ModelArg,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset JSON; overrides the config's `data`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    param: Option<ParamArg>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep only actors appearing in at least this many lists.
    #[arg(long)]
    lpa: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    trace: PathBuf,
    /// Dataset with actor names and groups, used for ranks and colors.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPS_WEAK)]
    eps_weak: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_STRONG)]
    eps_strong: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Boundary window half-widths for the Bayes factors.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05")]
    delta: Vec<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Summarize(a) => summarize(a),
        Command::Compare(a) => compare(a),
        Command::CountLe { order } => {
            let po = parse_order(&order)?.to_partial_order()?;
            let m = Mdt::from_partial_order(&po).context("count-le needs a series-parallel order")?;
            println!("{}", count_le(m.tree()).value);
            Ok(())
        }
        Command::CheckVsp { order } => {
            let po = parse_order(&order)?.to_partial_order()?;
            match po.forbidden_witness() {
                None => println!("vsp: true"),
                Some(w) => println!("vsp: false\nwitness: {} {} {} {}", w[0], w[1], w[2], w[3]),
            }
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let po = parse_order(&a.order)?.to_partial_order()?;
    let truth = Mdt::from_partial_order(&po).context("simulation needs a series-parallel order")?;
    let actors = po.labels().to_vec();
    let size = a.list_size.unwrap_or(actors.len());
    if size == 0 || size > actors.len() {
        bail!("list size must be between 1 and {}", actors.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let memberships = (0..a.lists)
        .map(|_| {
            let mut pool = actors.clone();
            pool.shuffle(&mut rng);
            pool.truncate(size);
            ActorSubset::new(pool)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ds = simulate_dataset(truth.tree(), a.model.into(), a.p, a.phi, &memberships, &mut rng)?;
    write_atomic(&a.out, dataset_to_string(&ds).as_bytes())?;
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.data {
        cfg.data = Some(v);
    }
    if let Some(v) = a.out {
        cfg.out = Some(v);
    }
    if let Some(v) = a.lpa {
        cfg.lpa = Some(v);
    }
    let m = &mut cfg.mcmc;
    if let Some(v) = a.seed {
        m.seed = v;
    }
    if let Some(v) = a.model {
        m.model = v.into();
    }
    if let Some(v) = a.param {
        m.param = v.into();
    }
    if let Some(v) = a.iterations {
        m.iterations = v;
    }
    if let Some(v) = a.thin {
        m.thin = v;
    }
    if let Some(v) = a.burn_in {
        m.burn_in = v;
    }
    let data_path = cfg.data.clone().context("no dataset given (use --data or set `data` in the config)")?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut ds = parse_dataset(&data_path)?;
    if let Some(k) = cfg.lpa {
        ds = filter_lpa(&ds, k);
    }
    let stats = dataset_stats(&ds);
    eprintln!("{} actors, {} lists, longest list {}", stats.actors, stats.lists, stats.max_list_len);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("run.toml"), cfg.to_toml().as_bytes())?;

    let mut chain = Chain::new(&ds, cfg.mcmc.clone(), cfg.priors)?;
    let final_path = out.join("trace.jsonl");
    let tmp = partial_path(&final_path);
    let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut writer = TraceWriter::new(BufWriter::new(file), &chain.header())?;
    chain.run_with(|r| writer.sample(r).map_err(|e| McmcError::Sink(e.to_string())))?;
    writer.finish(&chain.acceptance())?;
    fs::rename(&tmp, &final_path).with_context(|| format!("renaming {}", tmp.display()))?;
    for (name, s) in chain.acceptance() {
        eprintln!("{name}: accepted {}/{} ({:.3})", s.accepted, s.proposed, s.rate());
    }
    println!("{}", final_path.display());
    Ok(())
}

fn groups_for(trace: &ChainTrace, ds: Option<&RankDataset>) -> BTreeMap<usize, String> {
    trace
        .header
        .actors
        .iter()
        .map(|&a| {
            let g = ds.and_then(|d| d.actor(a)).map(|i| i.group.clone()).filter(|g| !g.is_empty());
            (a, g.unwrap_or_else(|| a.to_string()))
        })
        .collect()
}

#[derive(Serialize)]
struct Diagnostics {
    samples: usize,
    ess: BTreeMap<&'static str, f64>,
    acceptance: BTreeMap<String, f64>,
}

fn summarize(a: SummarizeArgs) -> Result<()> {
    let trace = read_trace(&a.trace)?;
    let ds = a.data.as_deref().map(parse_dataset).transpose()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let recs = &trace.records;

    let marg = edge_marginals(recs)?;
    write_atomic(&a.out.join("marginals.csv"), marg.to_csv().as_bytes())?;

    let consensus = consensus_order(&marg, a.eps_weak, a.eps_strong)?;
    write_atomic(&a.out.join("consensus.dot"), export_dot(&consensus, ds.as_ref()).as_bytes())?;
    write_atomic(&a.out.join("consensus.json"), serde_json::to_string_pretty(&consensus)?.as_bytes())?;

    let ranks = average_rank(recs, &groups_for(&trace, ds.as_ref()))?;
    let mut csv = String::from("group,members,mean_rank,mc_se\n");
    for (g, r) in &ranks {
        csv.push_str(&format!("{g},{},{},{}\n", r.members, r.mean, r.mc_se));
    }
    write_atomic(&a.out.join("ranks.csv"), csv.as_bytes())?;

    let depth = depth_posterior(recs)?;
    let mut csv = String::from("depth,count,fraction\n");
    for (d, &c) in depth.iter().enumerate().skip(1) {
        csv.push_str(&format!("{d},{c},{}\n", c as f64 / recs.len() as f64));
    }
    write_atomic(&a.out.join("depth.csv"), csv.as_bytes())?;

    let diag = Diagnostics {
        samples: recs.len(),
        ess: scalar_series(recs).into_iter().map(|(k, v)| (k, ess(&v))).collect(),
        acceptance: trace.acceptance.iter().map(|(k, s)| (k.clone(), s.rate())).collect(),
    };
    write_atomic(&a.out.join("diagnostics.json"), serde_json::to_string_pretty(&diag)?.as_bytes())?;
    println!("{}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum BfOutcome {
    Estimate(BoundaryBayesFactors),
    Unavailable { delta: f64, reason: String },
}

#[derive(Serialize)]
struct TraceReport {
    path: PathBuf,
    model: ObsModel,
    samples: usize,
    data_hash: String,
    waic: Waic,
    bayes_factors: Vec<BfOutcome>,
}

#[derive(Serialize)]
struct Difference {
    a: PathBuf,
    b: PathBuf,
    elpd_diff: f64,
    se: f64,
}

#[derive(Serialize)]
struct CompareReport {
    traces: Vec<TraceReport>,
    differences: Vec<Difference>,
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut reports = Vec::new();
    for path in &a.traces {
        let trace = read_trace(path)?;
        let ll: Vec<Vec<f64>> = trace.records.iter().map(|r| r.per_list.clone()).collect();
        let waic = waic_elpd(&ll).with_context(|| format!("WAIC for {}", path.display()))?;
        let model = trace.header.config.model;
        let mut bfs = Vec::new();
        if model.uses_phi() {
            let phi: Vec<f64> = trace.records.iter().map(|r| r.hyper.phi).collect();
            for &d in &a.delta {
                bfs.push(match savage_dickey_bf(&phi, trace.header.priors.phi, d) {
                    Ok(bf) => BfOutcome::Estimate(bf),
                    Err(e @ (AnalysisError::EmptyWindow { .. } | AnalysisError::ZeroPriorMass(_))) => {
                        BfOutcome::Unavailable { delta: d, reason: e.to_string() }
                    }
                    Err(e) => return Err(e.into()),
                });
            }
        }
        reports.push(TraceReport {
            path: path.clone(),
            model,
            samples: trace.records.len(),
            data_hash: trace.header.data_hash.clone(),
            waic,
            bayes_factors: bfs,
        });
    }
    let mut differences = Vec::new();
    for (i, x) in reports.iter().enumerate() {
        for y in &reports[i + 1..] {
            if x.data_hash != y.data_hash {
                continue;
            }
            let d: Vec<f64> = x.waic.pointwise.iter().zip(&y.waic.pointwise).map(|(u, v)| u - v).collect();
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let var = if d.len() > 1 { d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            differences.push(Difference {
                a: x.path.clone(),
                b: y.path.clone(),
                elpd_diff: x.waic.elpd - y.waic.elpd,
                se: (n * var).sqrt(),
            });
        }
    }
    let text = serde_json::to_string_pretty(&CompareReport { traces: reports, differences })? + "\n";
    match &a.out {
        Some(p) => write_report(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_report(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}
