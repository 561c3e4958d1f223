//! QC-LDPC exponent matrices, sparse parity-check matrices and the Tanner graph.
//!
//! Everything is 0-based internally. Exponent `k` at block `(i, j)` places the
//! 1 of row `r` of the block at column `(r + k) mod p`; `-1` is the all-zero block.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentMatrix {
    lift: usize,
    rows: usize,
    cols: usize,
    entries: Vec<i64>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_ints<T: std::str::FromStr>(line: usize, s: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>().map_err(|_| Error::CodeFormat {
                line,
                msg: format!("cannot parse integer '{t}'"),
            })
        })
        .collect()
}

impl ExponentMatrix {
    pub fn new(lift: usize, grid: Vec<Vec<i64>>) -> Result<Self> {
        if lift == 0 {
            return Err(Error::DimensionMismatch("lift size must be positive".into()));
        }
        let rows = grid.len();
        let cols = grid.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("empty exponent matrix".into()));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for (i, row) in grid.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    cols
                )));
            }
            for (j, &k) in row.iter().enumerate() {
                if k < -1 || k >= lift as i64 {
                    return Err(Error::InvalidExponent {
                        row: i + 1,
                        col: j + 1,
                        value: k,
                        lift,
                    });
                }
                entries.push(k);
            }
        }
        Ok(Self {
            lift,
            rows,
            cols,
            entries,
        })
    }

    /// Parses the text format: a header `p m_b n_b` followed by `m_b` rows.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let (hl, header) = lines.next().ok_or(Error::CodeFormat {
            line: 0,
            msg: "missing header".into(),
        })?;
        let h: Vec<usize> = parse_ints(hl, header)?;
        if h.len() != 3 {
            return Err(Error::CodeFormat {
                line: hl,
                msg: "header must be 'p m_b n_b'".into(),
            });
        }
        let (lift, rows, cols) = (h[0], h[1], h[2]);
        let mut grid = Vec::with_capacity(rows);
        for (ln, l) in lines {
            let row: Vec<i64> = parse_ints(ln, l)?;
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "line {ln}: {} entries, header says {cols}",
                    row.len()
                )));
            }
            grid.push(row);
        }
        if grid.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "{} rows read, header says {rows}",
                grid.len()
            )));
        }
        Self::new(lift, grid)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.lift, self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.entry(i, j).to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn lift_size(&self) -> usize {
        self.lift
    }
    pub fn base_rows(&self) -> usize {
        self.rows
    }
    pub fn base_cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.cols + j]
    }

    pub fn shift(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.entry(i, j);
        (k >= 0).then_some(k as usize)
    }

    /// 0/1 base matrix (protograph).
    pub fn base_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| u8::from(self.entry(i, j) >= 0)).collect())
            .collect()
    }

    /// Design rate `1 - m_b / n_b`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.rows as f64 / self.cols as f64
    }

    pub fn expand(&self) -> ParityCheckMatrix {
        let p = self.lift;
        let mut rows = vec![Vec::new(); self.rows * p];
        for i in 0..self.rows {
            for j in 0..self.cols {
                if let Some(k) = self.shift(i, j) {
                    for r in 0..p {
                        rows[i * p + r].push(j * p + (r + k) % p);
                    }
                }
            }
        }
        ParityCheckMatrix::from_rows(self.cols * p, rows, p, p)
            .expect("expanded exponent matrix is well formed")
    }
}

/// Sparse binary parity-check matrix. `row_block` groups rows into layers and
/// `col_block` groups columns into VN types.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    row_block: usize,
    col_block: usize,
}

impl ParityCheckMatrix {
    pub fn from_rows(
        n: usize,
        mut rows: Vec<Vec<usize>>,
        row_block: usize,
        col_block: usize,
    ) -> Result<Self> {
        if row_block == 0 || col_block == 0 || !rows.len().is_multiple_of(row_block) || !n.is_multiple_of(col_block) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{n} matrix is not tiled by {row_block}x{col_block} blocks",
                rows.len()
            )));
        }
        let mut cols = vec![Vec::new(); n];
        for (c, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::DimensionMismatch(format!("duplicate entry in row {}", c + 1)));
            }
            for &v in row.iter() {
                if v >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "column index {} out of range in row {}",
                        v + 1,
                        c + 1
                    )));
                }
                cols[v].push(c);
            }
        }
        Ok(Self {
            n,
            rows,
            cols,
            row_block,
            col_block,
        })
    }

    /// Reads MacKay's alist format. Without block information every row is
    /// its own layer and every column its own type.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let mut next = |what: &str| {
            lines.next().ok_or(Error::CodeFormat {
                line: 0,
                msg: format!("unexpected end of alist while reading {what}"),
            })
        };
        let (l, s) = next("dimensions")?;
        let dims: Vec<usize> = parse_ints(l, s)?;
        if dims.len() != 2 {
            return Err(Error::CodeFormat { line: l, msg: "expected 'n m'".into() });
        }
        let (n, m) = (dims[0], dims[1]);
        next("max degrees")?;
        let (l, s) = next("column degrees")?;
        let col_deg: Vec<usize> = parse_ints(l, s)?;
        let (l, s) = next("row degrees")?;
        let row_deg: Vec<usize> = parse_ints(l, s)?;
        if col_deg.len() != n || row_deg.len() != m {
            return Err(Error::DimensionMismatch("alist degree list lengths".into()));
        }
        let mut from_cols = vec![Vec::new(); m];
        for (v, &d) in col_deg.iter().enumerate() {
            let (l, s) = next("column list")?;
            let idx: Vec<usize> = parse_ints(l, s)?;
            for &c in idx.iter().filter(|&&c| c != 0).take(d) {
                if c > m {
                    return Err(Error::CodeFormat { line: l, msg: format!("row index {c} > {m}") });
                }
                from_cols[c - 1].push(v);
            }
        }
        let mut rows = vec![Vec::new(); m];
        for (c, &d) in row_deg.iter().enumerate() {
            let (l, s) = next("row list")?;
            let idx: Vec<usize> = parse_ints(l, s)?;
            rows[c] = idx
                .into_iter()
                .filter(|&v| v != 0)
                .take(d)
                .map(|v| v - 1)
                .collect();
        }
        let h = Self::from_rows(n, rows, 1, 1)?;
        for (c, mut r) in from_cols.into_iter().enumerate() {
            r.sort_unstable();
            if r != h.rows[c] {
                return Err(Error::CodeFormat {
                    line: 0,
                    msg: format!("row {} disagrees with the column lists", c + 1),
                });
            }
        }
        Ok(h)
    }

    pub fn to_alist(&self) -> String {
        let fmt_list = |v: &[usize], width: usize| {
            let mut items: Vec<String> = v.iter().map(|x| (x + 1).to_string()).collect();
            items.resize(width, "0".into());
            items.join(" ")
        };
        let max_c = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_r = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = format!("{} {}\n{max_c} {max_r}\n", self.n, self.m());
        let degs = |v: &[Vec<usize>]| v.iter().map(|x| x.len().to_string()).collect::<Vec<_>>().join(" ");
        s.push_str(&degs(&self.cols));
        s.push('\n');
        s.push_str(&degs(&self.rows));
        s.push('\n');
        for c in &self.cols {
            s.push_str(&fmt_list(c, max_c));
            s.push('\n');
        }
        for r in &self.rows {
            s.push_str(&fmt_list(r, max_r));
            s.push('\n');
        }
        s
    }

    pub fn with_blocks(mut self, row_block: usize, col_block: usize) -> Result<Self> {
        if row_block == 0 || col_block == 0 || !self.m().is_multiple_of(row_block) || !self.n.is_multiple_of(col_block) {
            return Err(Error::DimensionMismatch("block sizes do not tile the matrix".into()));
        }
        self.row_block = row_block;
        self.col_block = col_block;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.rows.len()
    }
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
    pub fn row(&self, c: usize) -> &[usize] {
        &self.rows[c]
    }
    pub fn col(&self, v: usize) -> &[usize] {
        &self.cols[v]
    }
    pub fn row_block(&self) -> usize {
        self.row_block
    }
    pub fn col_block(&self) -> usize {
        self.col_block
    }
    pub fn num_layers(&self) -> usize {
        self.m() / self.row_block
    }
    pub fn design_rate(&self) -> f64 {
        1.0 - self.m() as f64 / self.n as f64
    }

    pub fn get(&self, c: usize, v: usize) -> bool {
        self.rows[c].binary_search(&v).is_ok()
    }

    /// True when every check is satisfied by `hard` (one byte per bit).
    pub fn syndrome_ok(&self, hard: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().fold(0u8, |acc, &v| acc ^ hard[v]) == 0)
    }
}

/// Order in which row blocks are processed by the layered decoder.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerPermutation {
    order: Vec<usize>,
}

impl LayerPermutation {
    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &x in &order {
            if x >= order.len() || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
        }
        Ok(Self { order })
    }

    /// Parses a 1-based comma-separated list such as `2,3,1`.
    pub fn parse(s: &str) -> Result<Self> {
        let order = s
            .split(',')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(x) if x >= 1 => Ok(x - 1),
                _ => Err(Error::InvalidPermutation(format!("bad entry '{t}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of row block `t` in the processing order.
    pub fn position(&self, t: usize) -> usize {
        self.order.iter().position(|&x| x == t).expect("row block in permutation")
    }

    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (q, &t) in self.order.iter().enumerate() {
            pos[t] = q;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        Self { order: self.order.iter().rev().copied().collect() }
    }

    /// Rotates the processing order left by `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut order = self.order.clone();
        if !order.is_empty() {
            let k = k % order.len();
            order.rotate_left(k);
        }
        Self { order }
    }

    pub fn check_len(&self, layers: usize) -> Result<()> {
        if self.order.len() != layers {
            return Err(Error::InvalidPermutation(format!(
                "permutation has {} entries, code has {layers} layers",
                self.order.len()
            )));
        }
        Ok(())
    }

    /// All permutations of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            out.push(Self { order: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

impl fmt::Display for LayerPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.order.iter().map(|x| (x + 1).to_string()).collect();
        write!(f, "{}", s.join(","))
    }
}

/// Tanner graph with edges stored check-major.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    h: ParityCheckMatrix,
    edge_vn: Vec<usize>,
    edge_cn: Vec<usize>,
    cn_start: Vec<usize>,
    vn_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn new(h: ParityCheckMatrix) -> Self {
        let mut edge_vn = Vec::with_capacity(h.nnz());
        let mut edge_cn = Vec::with_capacity(h.nnz());
        let mut cn_start = Vec::with_capacity(h.m() + 1);
        let mut vn_edges = vec![Vec::new(); h.n()];
        for c in 0..h.m() {
            cn_start.push(edge_vn.len());
            for &v in h.row(c) {
                vn_edges[v].push(edge_vn.len());
                edge_vn.push(v);
                edge_cn.push(c);
            }
        }
        cn_start.push(edge_vn.len());
        Self { h, edge_vn, edge_cn, cn_start, vn_edges }
    }

    pub fn from_exponents(e: &ExponentMatrix) -> Self {
        Self::new(e.expand())
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }
    pub fn n(&self) -> usize {
        self.h.n()
    }
    pub fn m(&self) -> usize {
        self.h.m()
    }
    pub fn num_edges(&self) -> usize {
        self.edge_vn.len()
    }
    pub fn num_layers(&self) -> usize {
        self.h.num_layers()
    }
    pub fn num_vn_types(&self) -> usize {
        self.h.n() / self.h.col_block()
    }
    pub fn lift(&self) -> usize {
        self.h.row_block()
    }
    /// QC symmetry applies when rows and columns share one circulant size.
    pub fn is_quasi_cyclic(&self) -> bool {
        self.h.row_block() == self.h.col_block() && self.h.row_block() > 1
    }
    pub fn rate(&self) -> f64 {
        self.h.design_rate()
    }

    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e]
    }
    pub fn edge_cn(&self, e: usize) -> usize {
        self.edge_cn[e]
    }
    pub fn cn_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.cn_start[c]..self.cn_start[c + 1]
    }
    pub fn vn_edges(&self, v: usize) -> &[usize] {
        &self.vn_edges[v]
    }
    pub fn cn_vns(&self, c: usize) -> &[usize] {
        self.h.row(c)
    }
    pub fn vn_cns(&self, v: usize) -> &[usize] {
        self.h.col(v)
    }
    pub fn vn_degree(&self, v: usize) -> usize {
        self.vn_edges[v].len()
    }
    pub fn cn_degree(&self, c: usize) -> usize {
        self.cn_start[c + 1] - self.cn_start[c]
    }

    pub fn vn_type(&self, v: usize) -> usize {
        v / self.h.col_block()
    }
    pub fn cn_type(&self, c: usize) -> usize {
        c / self.h.row_block()
    }
    pub fn cn_layer(&self, c: usize, perm: &LayerPermutation) -> usize {
        perm.position(self.cn_type(c))
    }

    /// Cyclic shift of a VN index within its circulant block.
    pub fn shift_vn(&self, v: usize, s: usize) -> usize {
        let p = self.h.col_block();
        (v / p) * p + (v % p + s) % p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> ExponentMatrix {
        ExponentMatrix::parse("3 2 3\n0 1 -1\n2 -1 0\n").unwrap()
    }

    #[test]
    fn expansion_places_shifted_identity() {
        let h = toy().expand();
        assert_eq!(h.n(), 9);
        assert_eq!(h.m(), 6);
        // block (0,1) with shift 1: row 0 -> column 3 + 1
        assert!(h.get(0, 4));
        assert!(h.get(2, 3));
        assert!(h.get(3, 2));
        assert_eq!(h.nnz(), 12);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(
            ExponentMatrix::parse("3 1 2\n0 3\n"),
            Err(Error::InvalidExponent { value: 3, .. })
        ));
        assert!(matches!(
            ExponentMatrix::parse("3 2 2\n0 1\n"),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            ExponentMatrix::parse("3 1 2\n0 x\n"),
            Err(Error::CodeFormat { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let e = toy();
        assert_eq!(ExponentMatrix::parse(&e.to_text()).unwrap(), e);
    }

    #[test]
    fn alist_round_trip() {
        let h = toy().expand();
        let back = ParityCheckMatrix::from_alist(&h.to_alist()).unwrap();
        for c in 0..h.m() {
            assert_eq!(back.row(c), h.row(c));
        }
    }

    #[test]
    fn permutation_parse_and_positions() {
        let p = LayerPermutation::parse("2,3,1").unwrap();
        assert_eq!(p.order(), &[1, 2, 0]);
        assert_eq!(p.position(0), 2);
        assert_eq!(p.to_string(), "2,3,1");
        assert!(LayerPermutation::parse("1,1,2").is_err());
        assert!(LayerPermutation::parse("0,1").is_err());
        assert_eq!(LayerPermutation::all(4).len(), 24);
    }

    #[test]
    fn tanner_types_and_layers() {
        let g = TannerGraph::from_exponents(&toy());
        assert_eq!(g.num_layers(), 2);
        assert_eq!(g.vn_type(5), 1);
        assert_eq!(g.cn_type(4), 1);
        let perm = LayerPermutation::parse("2,1").unwrap();
        assert_eq!(g.cn_layer(4, &perm), 0);
        assert_eq!(g.shift_vn(5, 2), 4);
    }

    proptest! {
        #[test]
        fn lifted_blocks_are_permutations(p in 1usize..12, seed in proptest::collection::vec(-1i64..12, 6)) {
            let grid: Vec<Vec<i64>> = seed.chunks(3).map(|r| r.iter().map(|&k| if k < 0 { -1 } else { k % p as i64 }).collect()).collect();
            let e = ExponentMatrix::new(p, grid).unwrap();
            let h = e.expand();
            for i in 0..2 {
                for j in 0..3 {
                    let ones: usize = (0..p).map(|r| (0..p).filter(|&c| h.get(i * p + r, j * p + c)).count()).sum();
                    prop_assert_eq!(ones, if e.entry(i, j) >= 0 { p } else { 0 });
                }
            }
        }

        #[test]
        fn qc_shift_preserves_adjacency(s in 0usize..31, v in 0usize..155) {
            let e = crate::codes::tanner_155();
            let g = TannerGraph::from_exponents(&e);
            let w = g.shift_vn(v, s);
            let shift_cn = |c: usize| (c / 31) * 31 + (c % 31 + s) % 31;
            let mut a: Vec<usize> = g.vn_cns(v).iter().map(|&c| shift_cn(c)).collect();
            a.sort_unstable();
            prop_assert_eq!(a, g.vn_cns(w).to_vec());
        }
    }
}
