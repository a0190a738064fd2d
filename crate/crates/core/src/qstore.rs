//! Action-value tables keyed by time-augmented states.
//!
//! [`DenseQ`] preallocates every `(state, t)` row; [`SparseQ`] starts empty
//! and appends a zero row the first time a key is visited, recording the
//! key in an insertion-ordered registry. Both keep per-row visit counters.
//! Columns are the `2^m` joint input assignments, indexed by
//! [`PackedInput`] bits.
//!
//! File format (UTF-8, one record per line):
//!
//! ```text
//! n=<n> m=<m> tmax=<T>
//! <state bit string>,<t>,<visits>,<q_0>,...,<q_{2^m-1}>
//! ```
//!
//! States are written as `0`/`1` strings with `x1` first; Q-values use 17
//! significant digits so a save/load cycle is lossless.

use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{PackedInput, PackedState, PbcnModel};

/// Upper bound on dense entries (rows × columns), about 512 MiB of `f64`.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QKey {
    pub state: PackedState,
    pub t: u32,
}

impl QKey {
    pub fn new(state: PackedState, t: u32) -> Self {
        Self { state, t }
    }
}

impl From<crate::env::TimeState> for QKey {
    fn from(s: crate::env::TimeState) -> Self {
        Self {
            state: s.state,
            t: s.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableMeta {
    pub n: usize,
    pub m: usize,
    pub t_max: u32,
}

impl TableMeta {
    pub fn for_model(model: &PbcnModel, t_max: u32) -> Self {
        Self {
            n: model.n(),
            m: model.m(),
            t_max,
        }
    }

    pub fn n_actions(&self) -> usize {
        1 << self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    Dense,
    Sparse,
}

impl std::str::FromStr for StoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "sparse" => Ok(Self::Sparse),
            other => Err(Error::InvalidParameter(format!(
                "store kind '{other}' (expected dense or sparse)"
            ))),
        }
    }
}

impl std::fmt::Display for StoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StoreKind::Dense => "dense",
            StoreKind::Sparse => "sparse",
        })
    }
}

/// Position of a row inside a store. Only valid for the store that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowId(usize);

/// Lowest-index maximiser of a row.
#[inline]
pub fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = (0, row[0]);
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (a, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseQ {
    meta: TableMeta,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl DenseQ {
    pub fn new(meta: TableMeta) -> Result<Self> {
        let rows = 1usize
            .checked_shl(meta.n as u32)
            .filter(|_| meta.n < usize::BITS as usize)
            .and_then(|s| s.checked_mul(meta.t_max as usize + 1));
        let entries = rows.and_then(|r| r.checked_mul(meta.n_actions()));
        match (rows, entries) {
            (Some(rows), Some(entries)) if entries <= MAX_DENSE_ENTRIES => Ok(Self {
                meta,
                values: vec![0.0; entries],
                visits: vec![0; rows],
            }),
            _ => Err(Error::TooLarge(format!(
                "dense table for n={} m={} tmax={} exceeds {MAX_DENSE_ENTRIES} entries",
                meta.n, meta.m, meta.t_max
            ))),
        }
    }

    /// Row index = state_index · (t_max + 1) + t.
    #[inline]
    pub fn row_index(&self, key: QKey) -> usize {
        key.state.index() * (self.meta.t_max as usize + 1) + key.t as usize
    }

    fn key_of_row(&self, row: usize) -> QKey {
        let per_state = self.meta.t_max as usize + 1;
        QKey {
            state: PackedState::new((row / per_state) as u64, self.meta.n),
            t: (row % per_state) as u32,
        }
    }

    pub fn row_count(&self) -> usize {
        self.visits.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseQ {
    meta: TableMeta,
    index: FxHashMap<QKey, usize>,
    registry: Vec<QKey>,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl SparseQ {
    pub fn new(meta: TableMeta) -> Self {
        Self {
            meta,
            index: FxHashMap::default(),
            registry: Vec::new(),
            values: Vec::new(),
            visits: Vec::new(),
        }
    }

    /// Registry of keys in first-visit order.
    pub fn registry(&self) -> &[QKey] {
        &self.registry
    }

    pub fn row_count(&self) -> usize {
        self.registry.len()
    }

    /// Finds the row for `key`, appending a zero row if it is new.
    pub fn lookup_or_insert(&mut self, key: QKey) -> RowId {
        if let Some(&r) = self.index.get(&key) {
            return RowId(r);
        }
        let r = self.registry.len();
        self.registry.push(key);
        self.index.insert(key, r);
        self.values
            .resize(self.values.len() + self.meta.n_actions(), 0.0);
        self.visits.push(0);
        RowId(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QStore {
    Dense(DenseQ),
    Sparse(SparseQ),
}

impl QStore {
    pub fn new(kind: StoreKind, meta: TableMeta) -> Result<Self> {
        Ok(match kind {
            StoreKind::Dense => QStore::Dense(DenseQ::new(meta)?),
            StoreKind::Sparse => QStore::Sparse(SparseQ::new(meta)),
        })
    }

    pub fn kind(&self) -> StoreKind {
        match self {
            QStore::Dense(_) => StoreKind::Dense,
            QStore::Sparse(_) => StoreKind::Sparse,
        }
    }

    pub fn meta(&self) -> TableMeta {
        match self {
            QStore::Dense(d) => d.meta,
            QStore::Sparse(s) => s.meta,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.meta().n_actions()
    }

    fn check_key(&self, key: QKey) -> Result<()> {
        let meta = self.meta();
        if key.t > meta.t_max {
            return Err(Error::TimeOutOfRange {
                t: key.t,
                t_max: meta.t_max,
            });
        }
        if key.state.width() != meta.n {
            return Err(Error::WidthMismatch {
                expected: meta.n,
                actual: key.state.width(),
            });
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        let columns = self.n_actions();
        if action >= columns {
            return Err(Error::ActionOutOfRange { action, columns });
        }
        Ok(())
    }

    /// Records a visit to `key`, creating its row in the sparse layout.
    pub fn visit(&mut self, key: QKey) -> Result<RowId> {
        self.check_key(key)?;
        Ok(match self {
            QStore::Dense(d) => {
                let r = d.row_index(key);
                d.visits[r] += 1;
                RowId(r)
            }
            QStore::Sparse(s) => {
                let id = s.lookup_or_insert(key);
                s.visits[id.0] += 1;
                id
            }
        })
    }

    fn find(&self, key: QKey) -> Option<RowId> {
        match self {
            QStore::Dense(d) => Some(RowId(d.row_index(key))),
            QStore::Sparse(s) => s.index.get(&key).map(|&r| RowId(r)),
        }
    }

    #[inline]
    pub fn row(&self, id: RowId) -> &[f64] {
        let (values, cols) = match self {
            QStore::Dense(d) => (&d.values, d.meta.n_actions()),
            QStore::Sparse(s) => (&s.values, s.meta.n_actions()),
        };
        &values[id.0 * cols..(id.0 + 1) * cols]
    }

    #[inline]
    pub fn row_mut(&mut self, id: RowId) -> &mut [f64] {
        let (values, cols) = match self {
            QStore::Dense(d) => (&mut d.values, d.meta.n_actions()),
            QStore::Sparse(s) => (&mut s.values, s.meta.n_actions()),
        };
        &mut values[id.0 * cols..(id.0 + 1) * cols]
    }

    /// Row for `key` if it is stored; dense tables store every valid key.
    pub fn row_of(&self, key: QKey) -> Option<&[f64]> {
        self.check_key(key).ok()?;
        self.find(key).map(|id| self.row(id))
    }

    /// Reads `Q(key, action)`; keys without a row read as 0.
    pub fn get(&self, key: QKey, action: usize) -> Result<f64> {
        self.check_action(action)?;
        self.check_key(key)?;
        Ok(self.find(key).map_or(0.0, |id| self.row(id)[action]))
    }

    /// Writes `Q(key, action)`, creating the row if needed (without counting a visit).
    pub fn set(&mut self, key: QKey, action: usize, value: f64) -> Result<()> {
        self.check_action(action)?;
        self.check_key(key)?;
        let id = match self {
            QStore::Dense(d) => RowId(d.row_index(key)),
            QStore::Sparse(s) => s.lookup_or_insert(key),
        };
        self.row_mut(id)[action] = value;
        Ok(())
    }

    /// Overwrites a whole row, creating it if needed.
    pub fn set_row(&mut self, key: QKey, values: &[f64]) -> Result<()> {
        self.check_key(key)?;
        if values.len() != self.n_actions() {
            return Err(Error::ActionOutOfRange {
                action: values.len(),
                columns: self.n_actions(),
            });
        }
        let id = match self {
            QStore::Dense(d) => RowId(d.row_index(key)),
            QStore::Sparse(s) => s.lookup_or_insert(key),
        };
        self.row_mut(id).copy_from_slice(values);
        Ok(())
    }

    /// Greedy action with lowest-index tie-break; unseen keys give `(0, 0.0)`.
    pub fn best_action(&self, key: QKey) -> (PackedInput, f64) {
        let (a, v) = self.row_of(key).map_or((0, 0.0), argmax);
        (PackedInput::new(a as u64, self.meta().m), v)
    }

    pub fn visits(&self, key: QKey) -> u64 {
        if self.check_key(key).is_err() {
            return 0;
        }
        match self {
            QStore::Dense(d) => d.visits[d.row_index(key)],
            QStore::Sparse(s) => s.index.get(&key).map_or(0, |&r| s.visits[r]),
        }
    }

    /// Number of allocated rows.
    pub fn row_count(&self) -> usize {
        match self {
            QStore::Dense(d) => d.row_count(),
            QStore::Sparse(s) => s.row_count(),
        }
    }

    /// Keys with at least one visit: registry order (sparse) or row order (dense).
    pub fn visited_keys(&self) -> Vec<QKey> {
        self.stored_rows()
            .filter(|(_, visits, _)| *visits > 0)
            .map(|(k, _, _)| k)
            .collect()
    }

    /// Rows that carry information: every sparse row, and dense rows that
    /// were visited or hold a nonzero value.
    pub fn stored_rows(&self) -> Box<dyn Iterator<Item = (QKey, u64, &[f64])> + '_> {
        match self {
            QStore::Dense(d) => {
                let cols = d.meta.n_actions();
                Box::new(
                    d.values
                        .chunks_exact(cols)
                        .enumerate()
                        .filter(move |(r, row)| d.visits[*r] > 0 || row.iter().any(|&v| v != 0.0))
                        .map(move |(r, row)| (d.key_of_row(r), d.visits[r], row)),
                )
            }
            QStore::Sparse(s) => {
                let cols = s.meta.n_actions();
                Box::new(
                    s.registry
                        .iter()
                        .zip(s.values.chunks_exact(cols))
                        .zip(&s.visits)
                        .map(|((k, row), v)| (*k, *v, row)),
                )
            }
        }
    }

    /// Sparse registry, or `None` for the dense layout.
    pub fn registry(&self) -> Option<&[QKey]> {
        match self {
            QStore::Dense(_) => None,
            QStore::Sparse(s) => Some(s.registry()),
        }
    }

    pub fn reset_visits(&mut self) {
        match self {
            QStore::Dense(d) => d.visits.iter_mut().for_each(|v| *v = 0),
            QStore::Sparse(s) => s.visits.iter_mut().for_each(|v| *v = 0),
        }
    }

    fn set_visits(&mut self, key: QKey, visits: u64) {
        match self {
            QStore::Dense(d) => {
                let r = d.row_index(key);
                d.visits[r] = visits;
            }
            QStore::Sparse(s) => {
                let id = s.lookup_or_insert(key);
                s.visits[id.0] = visits;
            }
        }
    }

    /// Errors unless the table was built for a network with `model`'s dimensions.
    pub fn check_compatible(&self, model: &PbcnModel) -> Result<()> {
        let meta = self.meta();
        if meta.n != model.n() || meta.m != model.m() {
            return Err(Error::MetadataMismatch(format!(
                "table has n={} m={}, model has n={} m={}",
                meta.n,
                meta.m,
                model.n(),
                model.m()
            )));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let meta = self.meta();
        writeln!(out, "n={} m={} tmax={}", meta.n, meta.m, meta.t_max)?;
        for (key, visits, row) in self.stored_rows() {
            write!(out, "{},{},{}", key.state.to_bit_string(), key.t, visits)?;
            for v in row {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: R, kind: StoreKind) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let malformed = |line: usize, message: &str| Error::MalformedTable {
            line,
            message: message.to_string(),
        };
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(malformed(1, "empty file")),
        };
        let meta =
            parse_header(&header).ok_or_else(|| malformed(1, "expected 'n=<n> m=<m> tmax=<T>'"))?;
        if meta.n == 0 || meta.n > crate::model::MAX_NODES || meta.m > crate::model::MAX_INPUTS {
            return Err(malformed(1, "dimensions out of range"));
        }
        let mut store = QStore::new(kind, meta)?;
        let mut seen = rustc_hash::FxHashSet::default();
        let mut row = vec![0.0; meta.n_actions()];
        for (k, line) in lines {
            let line_no = k + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 + meta.n_actions() {
                return Err(malformed(
                    line_no,
                    &format!(
                        "expected {} fields, got {}",
                        3 + meta.n_actions(),
                        fields.len()
                    ),
                ));
            }
            let state = PackedState::from_bit_string(fields[0], meta.n)
                .map_err(|e| malformed(line_no, &e.to_string()))?;
            let t: u32 = fields[1]
                .parse()
                .map_err(|_| malformed(line_no, "bad time index"))?;
            let visits: u64 = fields[2]
                .parse()
                .map_err(|_| malformed(line_no, "bad visit count"))?;
            for (slot, f) in row.iter_mut().zip(&fields[3..]) {
                *slot = f.parse().map_err(|_| malformed(line_no, "bad Q-value"))?;
            }
            let key = QKey::new(state, t);
            if t > meta.t_max {
                return Err(malformed(line_no, "time index exceeds tmax"));
            }
            if !seen.insert(key) {
                return Err(malformed(line_no, "duplicate key"));
            }
            store.set_row(key, &row)?;
            store.set_visits(key, visits);
        }
        Ok(store)
    }

    /// Copies this table into the other layout.
    pub fn to_kind(&self, kind: StoreKind) -> Result<QStore> {
        if kind == self.kind() {
            return Ok(self.clone());
        }
        let mut out = QStore::new(kind, self.meta())?;
        for (key, visits, row) in self.stored_rows() {
            out.set_row(key, row)?;
            out.set_visits(key, visits);
        }
        Ok(out)
    }
}

fn parse_header(line: &str) -> Option<TableMeta> {
    let mut n = None;
    let mut m = None;
    let mut t_max = None;
    for part in line.split_whitespace() {
        let (k, v) = part.split_once('=')?;
        match k {
            "n" => n = v.parse().ok(),
            "m" => m = v.parse().ok(),
            "tmax" => t_max = v.parse().ok(),
            _ => return None,
        }
    }
    Some(TableMeta {
        n: n?,
        m: m?,
        t_max: t_max?,
    })
}
