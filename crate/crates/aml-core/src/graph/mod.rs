//! Graph storage, ingestion, normalization, symmetrization, and structure
//! pre-encoding.

mod synth;

pub use synth::{generate_synthetic, FeatureMode, SynthData, SynthKind, SynthSpec};

use crate::error::{CoreError, Result};
use crate::nn::DenseMatrix;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Dense N×u node feature matrix (f64, row-major).
pub type FeatureMatrix = DenseMatrix;

/// Normalization applied to the adjacency before message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Row,
    Column,
    Symmetric,
}

impl NormMode {
    pub fn parse(s: &str) -> Result<NormMode> {
        match s {
            "row" => Ok(NormMode::Row),
            "column" | "col" => Ok(NormMode::Column),
            "symmetric" | "sym" => Ok(NormMode::Symmetric),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown norm mode '{other}' (expected row|column|symmetric)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::Row => "row",
            NormMode::Column => "column",
            NormMode::Symmetric => "symmetric",
        }
    }
}

/// Sparse adjacency in compressed row form. Canonical: offsets
/// non-decreasing, column indices strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrGraph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrGraph {
    /// Builds a canonical graph from directed edges; duplicates are removed.
    pub fn from_edges(num_nodes: usize, edges: &[(u32, u32)]) -> Result<CsrGraph> {
        let mut sorted: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(h, t) in edges {
            if h as usize >= num_nodes {
                return Err(CoreError::NodeOutOfRange {
                    id: u64::from(h),
                    num_nodes,
                });
            }
            if t as usize >= num_nodes {
                return Err(CoreError::NodeOutOfRange {
                    id: u64::from(t),
                    num_nodes,
                });
            }
            sorted.push((h, t));
        }
        sorted.sort_unstable();
        sorted.dedup();

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(h, _) in &sorted {
            row_offsets[h as usize + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices: Vec<u32> = sorted.iter().map(|&(_, t)| t).collect();
        let values = vec![1.0; col_indices.len()];
        Ok(CsrGraph {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Reads a "head<TAB>tail" edge list; malformed lines and out-of-range
    /// ids are reported with their line number.
    pub fn load_edge_list(path: impl AsRef<Path>, num_nodes: usize) -> Result<CsrGraph> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CoreError::io(path.display().to_string(), e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let parse_field = |field: Option<&str>, lineno: usize| -> Result<u32> {
                field
                    .and_then(|f| f.trim().parse::<u32>().ok())
                    .ok_or_else(|| CoreError::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message: "expected two tab-separated integers".into(),
                    })
            };
            let h = parse_field(fields.next(), lineno)?;
            let t = parse_field(fields.next(), lineno)?;
            if fields.next().is_some() {
                return Err(CoreError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected exactly two fields".into(),
                });
            }
            edges.push((h, t));
        }
        CsrGraph::from_edges(num_nodes, &edges)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file =
            fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        for i in 0..self.num_nodes {
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                writeln!(w, "{}\t{}", i, self.col_indices[e])
                    .map_err(|e| CoreError::io(path.display().to_string(), e))?;
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn out_degree(&self, node: u32) -> usize {
        self.row_offsets[node as usize + 1] - self.row_offsets[node as usize]
    }

    /// Neighbor ids and weights of one row.
    pub fn neighbors(&self, node: u32) -> (&[u32], &[f64]) {
        let lo = self.row_offsets[node as usize];
        let hi = self.row_offsets[node as usize + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &c in &self.col_indices {
            deg[c as usize] += 1;
        }
        deg
    }

    /// Normalized copy. Empty rows (isolated nodes) are left as zeros.
    pub fn normalize(&self, mode: NormMode) -> CsrGraph {
        let mut out = self.clone();
        match mode {
            NormMode::Row => {
                for i in 0..self.num_nodes {
                    let lo = self.row_offsets[i];
                    let hi = self.row_offsets[i + 1];
                    let sum: f64 = self.values[lo..hi].iter().sum();
                    if sum > 0.0 {
                        for e in lo..hi {
                            out.values[e] = self.values[e] / sum;
                        }
                    }
                }
            }
            NormMode::Column => {
                let mut col_sum = vec![0.0f64; self.num_nodes];
                for (e, &c) in self.col_indices.iter().enumerate() {
                    col_sum[c as usize] += self.values[e];
                }
                for (e, &c) in self.col_indices.iter().enumerate() {
                    let s = col_sum[c as usize];
                    if s > 0.0 {
                        out.values[e] = self.values[e] / s;
                    }
                }
            }
            NormMode::Symmetric => {
                let in_deg = self.in_degrees();
                for i in 0..self.num_nodes {
                    let d_out = self.out_degree(i as u32);
                    for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                        let d_in = in_deg[self.col_indices[e] as usize];
                        out.values[e] = 1.0 / ((d_out * d_in) as f64).sqrt();
                    }
                }
            }
        }
        out
    }

    /// Transposed copy (reversed edge directions), canonical.
    pub fn transpose(&self) -> CsrGraph {
        let in_deg = self.in_degrees();
        let mut row_offsets = vec![0usize; self.num_nodes + 1];
        for i in 0..self.num_nodes {
            row_offsets[i + 1] = row_offsets[i] + in_deg[i];
        }
        let mut cursor = row_offsets.clone();
        let mut col_indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        for i in 0..self.num_nodes {
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                let c = self.col_indices[e] as usize;
                col_indices[cursor[c]] = i as u32;
                values[cursor[c]] = self.values[e];
                cursor[c] += 1;
            }
        }
        CsrGraph {
            num_nodes: self.num_nodes,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Copy with a weight-1 self-loop on every node (existing loops kept).
    pub fn with_self_loops(&self) -> CsrGraph {
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(self.nnz() + self.num_nodes);
        for i in 0..self.num_nodes {
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                edges.push((i as u32, self.col_indices[e]));
            }
            edges.push((i as u32, i as u32));
        }
        CsrGraph::from_edges(self.num_nodes, &edges).expect("ids already validated")
    }

    /// Sparse-times-dense product `Â·M` with a fixed per-row summation order,
    /// so the result does not depend on scheduling.
    pub fn spmm(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if dense.rows() != self.num_nodes {
            return Err(CoreError::ShapeMismatch {
                context: "spmm",
                got_rows: dense.rows(),
                got_cols: dense.cols(),
                want_rows: self.num_nodes,
                want_cols: dense.cols(),
            });
        }
        let c = dense.cols();
        let mut out = DenseMatrix::zeros(self.num_nodes, c);
        for i in 0..self.num_nodes {
            let orow = out.row_mut(i);
            for e in self.row_offsets[i]..self.row_offsets[i + 1] {
                let w = self.values[e];
                let src = dense.row(self.col_indices[e] as usize);
                for j in 0..c {
                    orow[j] += w * src[j];
                }
            }
        }
        Ok(out)
    }

    /// FNV-1a over the structure and weights; keys the pre-encoding cache.
    pub fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.num_nodes as u64).to_le_bytes());
        for &o in &self.row_offsets {
            eat(&(o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            eat(&c.to_le_bytes());
        }
        for &v in &self.values {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Directed training pairs with labels and a CSR index over heads.
#[derive(Debug, Clone)]
pub struct EdgeSet {
    num_nodes: usize,
    pairs: Vec<(u32, u32)>,
    labels: Vec<u8>,
    head_index: PairIndex,
}

/// CSR-style index over pairs keyed by one endpoint.
#[derive(Debug, Clone)]
pub struct PairIndex {
    offsets: Vec<usize>,
    pair_ids: Vec<usize>,
}

impl PairIndex {
    fn build(num_nodes: usize, keys: impl Iterator<Item = u32> + Clone) -> PairIndex {
        let mut offsets = vec![0usize; num_nodes + 1];
        for k in keys.clone() {
            offsets[k as usize + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut pair_ids = vec![0usize; offsets[num_nodes]];
        for (pid, k) in keys.enumerate() {
            pair_ids[cursor[k as usize]] = pid;
            cursor[k as usize] += 1;
        }
        PairIndex { offsets, pair_ids }
    }

    /// Pair ids whose key endpoint equals `node`.
    pub fn pairs_of(&self, node: u32) -> &[usize] {
        &self.pair_ids[self.offsets[node as usize]..self.offsets[node as usize + 1]]
    }
}

impl EdgeSet {
    pub fn new(num_nodes: usize, pairs: Vec<(u32, u32)>, labels: Vec<u8>) -> Result<EdgeSet> {
        if pairs.len() != labels.len() {
            return Err(CoreError::InvalidConfig(
                "pairs and labels length mismatch".into(),
            ));
        }
        for &(h, t) in &pairs {
            if h as usize >= num_nodes || t as usize >= num_nodes {
                return Err(CoreError::NodeOutOfRange {
                    id: u64::from(h.max(t)),
                    num_nodes,
                });
            }
        }
        let mut positives: Vec<(u32, u32)> = pairs
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&p, _)| p)
            .collect();
        positives.sort_unstable();
        if positives.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::InvalidConfig(
                "duplicate positive pair in edge set".into(),
            ));
        }
        let head_index = PairIndex::build(num_nodes, pairs.iter().map(|&(h, _)| h));
        Ok(EdgeSet {
            num_nodes,
            pairs,
            labels,
            head_index,
        })
    }

    pub fn from_positives(num_nodes: usize, pairs: Vec<(u32, u32)>) -> Result<EdgeSet> {
        let n = pairs.len();
        EdgeSet::new(num_nodes, pairs, vec![1; n])
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn head_index(&self) -> &PairIndex {
        &self.head_index
    }

    /// Index over tails, for samplers that group by the tail endpoint.
    pub fn tail_index(&self) -> PairIndex {
        PairIndex::build(self.num_nodes, self.pairs.iter().map(|&(_, t)| t))
    }

    /// Loads "head<TAB>tail" or "head<TAB>tail<TAB>label" lines.
    pub fn load_split(path: impl AsRef<Path>, num_nodes: usize) -> Result<EdgeSet> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CoreError::io(path.display().to_string(), e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(CoreError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected head<TAB>tail with optional label".into(),
                });
            }
            let parse = |s: &str| -> Result<u32> {
                s.trim().parse::<u32>().map_err(|_| CoreError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("invalid integer '{s}'"),
                })
            };
            pairs.push((parse(fields[0])?, parse(fields[1])?));
            labels.push(if fields.len() == 3 {
                match fields[2].trim() {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(CoreError::Parse {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            message: format!("label must be 0 or 1, got '{other}'"),
                        })
                    }
                }
            } else {
                1
            });
        }
        EdgeSet::new(num_nodes, pairs, labels)
    }

    pub fn write_split(&self, path: impl AsRef<Path>, with_labels: bool) -> Result<()> {
        let path = path.as_ref();
        let file =
            fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        for (&(h, t), &l) in self.pairs.iter().zip(&self.labels) {
            if with_labels {
                writeln!(w, "{h}\t{t}\t{l}")
            } else {
                writeln!(w, "{h}\t{t}")
            }
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        }
        Ok(())
    }
}

/// Expands each undirected positive link into both directed pairs,
/// deduplicated and in canonical (sorted) order.
pub fn symmetrize(edges: &EdgeSet) -> Result<EdgeSet> {
    if edges.labels.iter().any(|&l| l != 1) {
        return Err(CoreError::InvalidConfig(
            "symmetrize expects positive pairs only".into(),
        ));
    }
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(edges.pairs.len() * 2);
    for &(h, t) in &edges.pairs {
        pairs.push((h, t));
        pairs.push((t, h));
    }
    pairs.sort_unstable();
    pairs.dedup();
    EdgeSet::from_positives(edges.num_nodes, pairs)
}

/// One-time structure pre-encoding: `v0 = Â·(Â·(…·X))` applied `layers`
/// times, and the residual `delta0 = X − v0`. Cached for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreEncoding {
    pub v0: DenseMatrix,
    pub delta0: DenseMatrix,
    pub layers: usize,
}

pub fn pre_encode(adj_norm: &CsrGraph, x: &FeatureMatrix, layers: usize) -> Result<PreEncoding> {
    if layers == 0 {
        return Err(CoreError::InvalidConfig(
            "pre_encode requires at least one layer".into(),
        ));
    }
    let mut v0 = adj_norm.spmm(x)?;
    for _ in 1..layers {
        v0 = adj_norm.spmm(&v0)?;
    }
    let delta0 = x.sub(&v0);
    Ok(PreEncoding { v0, delta0, layers })
}

/// Cache key for persisted pre-encodings.
pub fn pre_encode_cache_key(
    graph: &CsrGraph,
    mode: NormMode,
    layers: usize,
    self_loops: bool,
) -> u64 {
    let mut h = graph.hash64();
    h ^= (mode as u64).wrapping_mul(0x9e3779b97f4a7c15);
    h = h.rotate_left(17) ^ (layers as u64);
    h = h.rotate_left(17) ^ u64::from(self_loops);
    h
}

const PE_MAGIC: &[u8; 8] = b"AMLPENC1";

impl PreEncoding {
    pub fn save(&self, path: impl AsRef<Path>, key: u64) -> Result<()> {
        let path = path.as_ref();
        let file =
            fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let mut write = |bytes: &[u8]| -> Result<()> {
            w.write_all(bytes)
                .map_err(|e| CoreError::io(path.display().to_string(), e))
        };
        write(PE_MAGIC)?;
        write(&key.to_le_bytes())?;
        write(&(self.layers as u32).to_le_bytes())?;
        write(&(self.v0.rows() as u32).to_le_bytes())?;
        write(&(self.v0.cols() as u32).to_le_bytes())?;
        for &v in self.v0.data() {
            write(&v.to_le_bytes())?;
        }
        for &v in self.delta0.data() {
            write(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Loads a cached pre-encoding; `Ok(None)` if the key does not match.
    pub fn load(path: impl AsRef<Path>, key: u64) -> Result<Option<PreEncoding>> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let corrupt = |message: &str| CoreError::CorruptFile {
            path: path.display().to_string(),
            message: message.into(),
        };
        if bytes.len() < 28 || &bytes[0..8] != PE_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let stored_key = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if stored_key != key {
            return Ok(None);
        }
        let layers = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let rows = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let need = 28 + 2 * rows * cols * 8;
        if bytes.len() != need {
            return Err(corrupt("truncated"));
        }
        let read_matrix = |off: usize| -> DenseMatrix {
            let mut data = Vec::with_capacity(rows * cols);
            for i in 0..rows * cols {
                let s = off + i * 8;
                data.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
            }
            DenseMatrix::from_vec(rows, cols, data)
        };
        let v0 = read_matrix(28);
        let delta0 = read_matrix(28 + rows * cols * 8);
        Ok(Some(PreEncoding { v0, delta0, layers }))
    }
}

/// Writes the feature matrix: 8-byte header (N, u as u32 little-endian)
/// followed by row-major f64 little-endian entries.
pub fn write_features(x: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes)
            .map_err(|e| CoreError::io(path.display().to_string(), e))
    };
    write(&(x.rows() as u32).to_le_bytes())?;
    write(&(x.cols() as u32).to_le_bytes())?;
    for &v in x.data() {
        write(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    if bytes.len() < 8 {
        return Err(CoreError::CorruptFile {
            path: path.display().to_string(),
            message: "missing header".into(),
        });
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + rows * cols * 8 {
        return Err(CoreError::CorruptFile {
            path: path.display().to_string(),
            message: format!("expected {rows}x{cols} f64 payload"),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        let s = 8 + i * 8;
        data.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    Ok(DenseMatrix::from_vec(rows, cols, data))
}
