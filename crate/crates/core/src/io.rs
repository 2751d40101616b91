//! File formats: datasets, run configuration, orders, traces and DOT export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ConsensusOrder;
use crate::mcmc::{ChainTrace, McmcConfig, MoveStats, TraceHeader, TraceRecord, TRACE_FORMAT_VERSION};
use crate::observation::{ObsError, RankDataset, RankList};
use crate::poset::{Actor, PartialOrder, PosetError};
use crate::prior::HyperPriorSpec;
use crate::tree::NestedTree;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}", .path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("{context}")]
    Parse { context: String, source: serde_json::Error },
    #[error("{}", .path.display())]
    Config { path: PathBuf, source: Box<toml::de::Error> },
    #[error(transparent)]
    Dataset(#[from] ObsError),
    #[error(transparent)]
    Order(#[from] PosetError),
    #[error("trace format version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("trace ends early at line {line}; {} samples recovered", .recovered.records.len())]
    TruncatedTrace { line: usize, recovered: Box<ChainTrace> },
    #[error("trace line {line}: {message}")]
    BadTraceLine { line: usize, message: String },
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_owned(), source })
}

/// Parses and validates a dataset from JSON text.
pub fn parse_dataset_str(text: &str) -> Result<RankDataset, IoError> {
    let ds: RankDataset =
        serde_json::from_str(text).map_err(|source| IoError::Parse { context: "dataset".into(), source })?;
    ds.validate()?;
    Ok(ds)
}

pub fn parse_dataset(path: &Path) -> Result<RankDataset, IoError> {
    parse_dataset_str(&read_file(path)?).map_err(|e| match e {
        IoError::Parse { source, .. } => IoError::Parse { context: path.display().to_string(), source },
        other => other,
    })
}

pub fn dataset_to_string(ds: &RankDataset) -> String {
    serde_json::to_string_pretty(ds).expect("dataset serializes") + "\n"
}

/// Keeps actors appearing in at least `k` lists; others are dropped from the
/// ground set and from every list, and lists left empty are removed.
pub fn filter_lpa(ds: &RankDataset, k: usize) -> RankDataset {
    let mut counts: BTreeMap<Actor, usize> = BTreeMap::new();
    for l in &ds.lists {
        for &a in l.order() {
            *counts.entry(a).or_default() += 1;
        }
    }
    let keep = |a: &Actor| counts.get(a).copied().unwrap_or(0) >= k;
    let actors = ds.actors.iter().filter(|a| keep(&a.id)).cloned().collect();
    let lists = ds
        .lists
        .iter()
        .filter_map(|l| RankList::new(l.order().iter().copied().filter(keep).collect()).ok())
        .collect();
    RankDataset { actors, lists }
}

/// Summary counts of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub actors: usize,
    pub lists: usize,
    pub max_list_len: usize,
}

pub fn dataset_stats(ds: &RankDataset) -> DatasetStats {
    DatasetStats {
        actors: ds.actors.len(),
        lists: ds.lists.len(),
        max_list_len: ds.lists.iter().map(RankList::len).max().unwrap_or(0),
    }
}

/// Settings for a `fit` run. Paths are resolved relative to the working
/// directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Minimum number of lists an actor must appear in.
    pub lpa: Option<usize>,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub priors: HyperPriorSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_toml(&read_file(path)?).map_err(|e| IoError::Config { path: path.to_owned(), source: Box::new(e) })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// An order on disk: either a decomposition tree or an explicit relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderFile {
    Tree(NestedTree),
    Relation { actors: Vec<Actor>, edges: Vec<(Actor, Actor)> },
}

impl OrderFile {
    pub fn to_partial_order(&self) -> Result<PartialOrder, IoError> {
        Ok(match self {
            OrderFile::Tree(t) => crate::tree::SpTree::from_nested(t).to_partial_order(),
            OrderFile::Relation { actors, edges } => PartialOrder::from_edges(actors, edges)?,
        })
    }
}

pub fn parse_order_str(text: &str) -> Result<OrderFile, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Parse { context: "order".into(), source })
}

pub fn parse_order(path: &Path) -> Result<OrderFile, IoError> {
    parse_order_str(&read_file(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TraceLine {
    Header(TraceHeader),
    Sample(TraceRecord),
    Summary { acceptance: BTreeMap<String, MoveStats> },
}

fn line_json(line: &TraceLine) -> String {
    let mut s = serde_json::to_string(line).expect("trace line serializes");
    s.push('\n');
    s
}

/// Streams a trace as JSON lines: a header, one line per sample, and a
/// closing summary line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> std::io::Result<Self> {
        out.write_all(line_json(&TraceLine::Header(header.clone())).as_bytes())?;
        Ok(Self { out })
    }

    pub fn sample(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        self.out.write_all(line_json(&TraceLine::Sample(record.clone())).as_bytes())
    }

    pub fn finish(mut self, acceptance: &BTreeMap<String, MoveStats>) -> std::io::Result<W> {
        self.out.write_all(line_json(&TraceLine::Summary { acceptance: acceptance.clone() }).as_bytes())?;
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn trace_to_string(trace: &ChainTrace) -> String {
    let mut w = TraceWriter::new(Vec::new(), &trace.header).expect("writes to memory");
    for r in &trace.records {
        w.sample(r).expect("writes to memory");
    }
    String::from_utf8(w.finish(&trace.acceptance).expect("writes to memory")).expect("utf-8 json")
}

pub fn write_trace(path: &Path, trace: &ChainTrace) -> Result<(), IoError> {
    fs::write(path, trace_to_string(trace)).map_err(|source| IoError::File { path: path.to_owned(), source })
}

/// Reads a trace. A file cut off before its summary line yields
/// [`IoError::TruncatedTrace`] carrying every complete sample.
pub fn read_trace_from(reader: impl Read) -> Result<ChainTrace, IoError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let bad = |line: usize, message: String| IoError::BadTraceLine { line, message };
    let header = match lines.next() {
        Some((_, Ok(text))) => {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(1, e.to_string()))?;
            let found = v.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
            if found != TRACE_FORMAT_VERSION {
                return Err(IoError::SchemaMismatch { found, expected: TRACE_FORMAT_VERSION });
            }
            match serde_json::from_value(v).map_err(|e| bad(1, e.to_string()))? {
                TraceLine::Header(h) => h,
                _ => return Err(bad(1, "expected a header line".into())),
            }
        }
        Some((_, Err(e))) => return Err(bad(1, e.to_string())),
        None => return Err(bad(1, "empty trace".into())),
    };
    let mut trace = ChainTrace { header, records: Vec::new(), acceptance: BTreeMap::new() };
    let mut last = 1;
    for (i, text) in lines {
        let line = i + 1;
        last = line;
        let parsed = text.ok().and_then(|t| serde_json::from_str::<TraceLine>(&t).ok());
        match parsed {
            Some(TraceLine::Sample(r)) => trace.records.push(r),
            Some(TraceLine::Summary { acceptance }) => {
                trace.acceptance = acceptance;
                return Ok(trace);
            }
            Some(TraceLine::Header(_)) => return Err(bad(line, "second header".into())),
            None => return Err(IoError::TruncatedTrace { line, recovered: Box::new(trace) }),
        }
    }
    Err(IoError::TruncatedTrace { line: last + 1, recovered: Box::new(trace) })
}

pub fn read_trace(path: &Path) -> Result<ChainTrace, IoError> {
    let f = fs::File::open(path).map_err(|source| IoError::File { path: path.to_owned(), source })?;
    read_trace_from(f)
}

const GROUP_COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph of a consensus order. Edges are the display reduction;
/// those also above the strong threshold are red. Nodes are filled by group,
/// with colors assigned in sorted group order.
pub fn export_dot(consensus: &ConsensusOrder, ds: Option<&RankDataset>) -> String {
    let info = |a: Actor| ds.and_then(|d| d.actor(a));
    let groups: BTreeSet<&str> =
        consensus.labels.iter().filter_map(|&a| info(a)).map(|i| i.group.as_str()).filter(|g| !g.is_empty()).collect();
    let color: BTreeMap<&str, &str> =
        groups.iter().enumerate().map(|(i, g)| (*g, GROUP_COLORS[i % GROUP_COLORS.len()])).collect();
    let mut s = String::from("digraph consensus {\n  rankdir=TB;\n  node [shape=ellipse, style=filled, fillcolor=white];\n");
    for &a in &consensus.labels {
        let (label, fill) = match info(a) {
            Some(i) => (
                if i.name.is_empty() { a.to_string() } else { i.name.clone() },
                color.get(i.group.as_str()).copied().unwrap_or("white"),
            ),
            None => (a.to_string(), "white"),
        };
        writeln!(s, "  {a} [label={}, fillcolor={}];", dot_id(&label), dot_id(fill)).unwrap();
    }
    for &(a, b) in &consensus.display {
        let c = if consensus.is_strong((a, b)) { "red" } else { "black" };
        writeln!(s, "  {a} -> {b} [color={c}];").unwrap();
    }
    s.push_str("}\n");
    s
}

/// Writes `contents` to `path` through a `.partial` sibling renamed on
/// success, so readers never see a half-written file under the final name.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let tmp = partial_path(path);
    let err = |source| IoError::File { path: path.to_owned(), source };
    fs::write(&tmp, contents).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{consensus_order, EdgeMarginals};
    use crate::observation::ActorInfo;
    use crate::prior::Hyperparams;

    fn small() -> RankDataset {
        RankDataset::new(
            vec![
                ActorInfo { id: 1, name: "Ann".into(), group: "clergy".into() },
                ActorInfo { id: 2, name: "Bo".into(), group: "earl".into() },
            ],
            vec![RankList::new(vec![1, 2]).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let ds = small();
        assert_eq!(parse_dataset_str(&dataset_to_string(&ds)).unwrap(), ds);
    }

    #[test]
    fn undeclared_actor_rejected() {
        let text = r#"{"actors":[{"id":1,"name":"a","group":"g"}],"lists":[[1,7]]}"#;
        assert!(matches!(parse_dataset_str(text), Err(IoError::Dataset(ObsError::UnknownActor(7)))));
        let dup = r#"{"actors":[{"id":1}],"lists":[[1,1]]}"#;
        assert!(matches!(parse_dataset_str(dup), Err(IoError::Parse { .. })));
    }

    #[test]
    fn lpa_filter() {
        // Actor 9 appears in 4 of 20 lists.
        let actors = (1..=3).chain([9]).map(ActorInfo::anonymous).collect();
        let lists = (0..20)
            .map(|i| RankList::new(if i < 4 { vec![1, 9, 2] } else if i == 5 { vec![9] } else { vec![3, 1] }).unwrap())
            .collect();
        let ds = RankDataset::new(actors, lists).unwrap();
        assert_eq!(filter_lpa(&ds, 1), ds);
        let f = filter_lpa(&ds, 6);
        assert_eq!(f.actor_ids(), vec![1, 3]);
        assert!(f.lists.iter().all(|l| !l.order().contains(&9) && !l.order().contains(&2)));
        assert_eq!(dataset_stats(&f), DatasetStats { actors: 2, lists: 19, max_list_len: 2 });
        assert_eq!(filter_lpa(&f, 6), f);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok = "data = \"d.json\"\nlpa = 5\n[mcmc]\niterations = 100\nburn_in = 10\nmodel = \"qj-b\"\nparam = \"mdt\"\n[priors]\nphi = { kind = \"beta\", a = 2.0, b = 2.0 }\n";
        let c = RunConfig::from_toml(ok).unwrap();
        assert_eq!(c.mcmc.iterations, 100);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(RunConfig::from_toml("[mcmc]\nsteps = 3\n").is_err());
        assert!(RunConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn order_files() {
        let rel = parse_order_str(r#"{"actors":[1,2,3,4],"edges":[[1,3],[2,3],[2,4]]}"#).unwrap();
        assert!(!rel.to_partial_order().unwrap().is_vsp());
        let tree = parse_order_str(r#"{"kind":"s","children":[{"kind":"leaf","actor":1},{"kind":"leaf","actor":2}]}"#).unwrap();
        assert!(tree.to_partial_order().unwrap().is_above(1, 2));
    }

    fn tiny_trace(k: usize) -> ChainTrace {
        let header = TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            seed: 3,
            config: McmcConfig::default(),
            priors: HyperPriorSpec::default(),
            actors: vec![1, 2],
            data_hash: "abc".into(),
        };
        let records = (0..k)
            .map(|i| TraceRecord {
                iteration: i,
                tree: NestedTree::P { children: vec![NestedTree::leaf(1), NestedTree::leaf(2)] },
                hyper: Hyperparams { q: 0.1 + i as f64 / 7.0 / k as f64, p: 1.0 / 3.0, phi: 0.5 },
                log_prior: -(i as f64).sqrt(),
                log_lik: -1.0 / (i as f64 + 3.0),
                per_list: vec![-0.1 * i as f64, std::f64::consts::PI],
            })
            .collect();
        ChainTrace { header, records, acceptance: BTreeMap::from([("p".into(), MoveStats { proposed: 4, accepted: 1 })]) }
    }

    #[test]
    fn trace_round_trip_is_byte_identical() {
        let t = tiny_trace(1000);
        let text = trace_to_string(&t);
        let back = read_trace_from(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(trace_to_string(&back), text);
    }

    #[test]
    fn truncated_trace_recovers_prefix() {
        let text = trace_to_string(&tiny_trace(10));
        let cut = &text[..text.len() - 40];
        match read_trace_from(cut.as_bytes()) {
            Err(IoError::TruncatedTrace { recovered, .. }) => assert_eq!(recovered.records.len(), 10),
            other => panic!("{other:?}"),
        }
        let no_summary: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        match read_trace_from(no_summary.as_bytes()) {
            Err(IoError::TruncatedTrace { recovered, .. }) => assert_eq!(recovered.records.len(), 5),
            other => panic!("{other:?}"),
        }
        let bumped = text.replacen("\"format_version\":1", "\"format_version\":9", 1);
        assert!(matches!(read_trace_from(bumped.as_bytes()), Err(IoError::SchemaMismatch { found: 9, .. })));
    }

    #[test]
    fn dot_output() {
        let empty = EdgeMarginals { labels: vec![1, 2], m: vec![vec![0.0; 2]; 2], se: vec![vec![0.0; 2]; 2], samples: 1 };
        let c = consensus_order(&empty, 0.5, 0.9).unwrap();
        let dot = export_dot(&c, Some(&small()));
        assert!(!dot.contains("->"));
        assert!(dot.contains("\"Ann\""));
        let po = PartialOrder::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let mut marg = EdgeMarginals::from_weighted([(&po, 1.0)]).unwrap();
        marg.m[1][2] = 0.6;
        let c = consensus_order(&marg, 0.5, 0.9).unwrap();
        let dot = export_dot(&c, None);
        assert!(dot.contains("1 -> 2 [color=red]"));
        assert!(dot.contains("2 -> 3 [color=black]"));
        assert_eq!(dot.matches("->").count(), 2);
    }

    #[test]
    fn atomic_write_leaves_no_partial() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"{}");
        assert!(!partial_path(&p).exists());
    }
}
