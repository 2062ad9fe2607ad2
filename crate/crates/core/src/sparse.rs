//! Thin helpers over `sprs` compressed-row matrices.

use std::io::Write;

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

pub type SpMat = CsMat<f64>;

/// Rows per rayon task in matrix-vector products.
const PAR_CHUNK: usize = 512;

pub fn diag(v: &[f64]) -> SpMat {
    let n = v.len();
    CsMat::new((n, n), (0..=n).collect(), (0..n).collect(), v.to_vec())
}

pub fn identity(n: usize) -> SpMat {
    CsMat::eye(n)
}

/// Assemble a CSR matrix; duplicate entries are summed.
pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> SpMat {
    let mut tri = TriMat::with_capacity((rows, cols), entries.len());
    for &(r, c, v) in entries {
        tri.add_triplet(r, c, v);
    }
    tri.to_csr()
}

/// Convert a dense row-major block (as produced by nalgebra) to CSR,
/// dropping exact zeros.
pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> SpMat {
    let mut tri = TriMat::new((m.nrows(), m.ncols()));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                tri.add_triplet(i, j, v);
            }
        }
    }
    tri.to_csr()
}

pub fn to_dense(m: &SpMat) -> nalgebra::DMatrix<f64> {
    let mut out = nalgebra::DMatrix::zeros(m.rows(), m.cols());
    for (&v, (i, j)) in m.iter() {
        out[(i, j)] += v;
    }
    out
}

/// `diag(s) * m`
pub fn scale_rows(m: &SpMat, s: &[f64]) -> SpMat {
    let csr = ensure_csr(m);
    let mut out = csr.clone();
    let indptr = csr.indptr().raw_storage().to_vec();
    let data = out.data_mut();
    for (row, w) in indptr.windows(2).enumerate() {
        for v in &mut data[w[0]..w[1]] {
            *v *= s[row];
        }
    }
    out
}

/// `m * diag(s)`
pub fn scale_cols(m: &SpMat, s: &[f64]) -> SpMat {
    let mut out = ensure_csr(m);
    let indices = out.indices().to_vec();
    for (v, &c) in out.data_mut().iter_mut().zip(&indices) {
        *v *= s[c];
    }
    out
}

fn ensure_csr(m: &SpMat) -> SpMat {
    if m.is_csr() {
        m.clone()
    } else {
        m.to_csr()
    }
}

/// `y = m x`. Rows are reduced sequentially, so the result does not depend
/// on the number of threads.
pub fn matvec_into(m: &SpMat, x: &[f64], y: &mut [f64]) {
    assert!(m.is_csr(), "matvec expects CSR storage");
    assert_eq!(m.cols(), x.len());
    assert_eq!(m.rows(), y.len());
    let indptr = m.indptr();
    let indptr = indptr.raw_storage();
    let indices = m.indices();
    let data = m.data();
    let row = |i: usize| -> f64 {
        let (a, b) = (indptr[i], indptr[i + 1]);
        indices[a..b]
            .iter()
            .zip(&data[a..b])
            .map(|(&j, &v)| v * x[j])
            .sum()
    };
    if y.len() >= 4 * PAR_CHUNK {
        y.par_chunks_mut(PAR_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PAR_CHUNK;
                for (k, out) in chunk.iter_mut().enumerate() {
                    *out = row(base + k);
                }
            });
    } else {
        for (i, out) in y.iter_mut().enumerate() {
            *out = row(i);
        }
    }
}

pub fn matvec(m: &SpMat, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.rows()];
    matvec_into(m, x, &mut y);
    y
}

/// `sum_i w_i a_i b_i`
pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

pub fn max_abs(m: &SpMat) -> f64 {
    m.data().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Write in coordinate format: a `rows cols nnz` header, then one
/// `row col value` line per stored entry (zero-based).
pub fn write_coo(m: &SpMat, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    for (&v, (i, j)) in m.iter() {
        writeln!(out, "{i} {j} {v:e}")?;
    }
    Ok(())
}

/// Upper bound on `rows * cols` accepted by [`read_coo`], so hostile headers
/// cannot request enormous allocations.
const COO_MAX_ENTRIES: usize = 1 << 26;

/// Parse the format written by [`write_coo`].
pub fn read_coo(text: &str) -> Result<SpMat> {
    let bad = |line: usize, msg: &str| Error::Schema(format!("coordinate file line {line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(hl, "header must be three non-negative integers"))?;
    let [rows, cols, nnz] = head[..] else {
        return Err(bad(hl, "header must be three non-negative integers"));
    };
    if rows.checked_mul(cols).is_none_or(|p| p > COO_MAX_ENTRIES) || nnz > COO_MAX_ENTRIES {
        return Err(bad(hl, "matrix too large"));
    }
    let mut entries = Vec::new();
    for (ln, line) in lines {
        let mut tok = line.split_whitespace();
        let (Some(i), Some(j), Some(v), None) = (tok.next(), tok.next(), tok.next(), tok.next())
        else {
            return Err(bad(ln, "expected 'row col value'"));
        };
        let i: usize = i.parse().map_err(|_| bad(ln, "bad row index"))?;
        let j: usize = j.parse().map_err(|_| bad(ln, "bad column index"))?;
        let v: f64 = v.parse().map_err(|_| bad(ln, "bad value"))?;
        if i >= rows || j >= cols {
            return Err(bad(ln, "index out of range"));
        }
        entries.push((i, j, v));
        if entries.len() > nnz {
            return Err(bad(ln, "more entries than declared"));
        }
    }
    if entries.len() != nnz {
        return Err(bad(hl, "entry count does not match header"));
    }
    Ok(from_triplets(rows, cols, &entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaling_and_matvec() {
        let m = from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (1, 1, 1.0)]);
        assert_eq!(matvec(&m, &[1.0, 1.0, 1.0]), vec![3.0, 4.0]);
        let r = scale_rows(&m, &[2.0, -1.0]);
        assert_eq!(matvec(&r, &[1.0, 1.0, 1.0]), vec![6.0, -4.0]);
        let c = scale_cols(&m, &[1.0, 0.5, 0.0]);
        assert_eq!(matvec(&c, &[1.0, 1.0, 1.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn parallel_matvec_matches_serial() {
        let n = 5000;
        let entries: Vec<_> = (0..n)
            .flat_map(|i| [(i, i, 2.0), (i, (i * 7 + 3) % n, -0.5)])
            .collect();
        let m = from_triplets(n, n, &entries);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = matvec(&m, &x);
        for i in 0..n {
            let expect = 2.0 * x[i] - 0.5 * x[(i * 7 + 3) % n];
            assert!((y[i] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn coo_rejects_garbage() {
        assert!(read_coo("").is_err());
        assert!(read_coo("2 2 1\n0 0").is_err());
        assert!(read_coo("2 2 1\n2 0 1.0").is_err());
        assert!(read_coo("2 2 2\n0 0 1.0").is_err());
        assert!(read_coo("99999999 99999999 1\n0 0 1").is_err());
    }

    proptest! {
        #[test]
        fn coo_round_trip(entries in proptest::collection::vec((0usize..6, 0usize..4, -1e3f64..1e3), 0..20)) {
            let m = from_triplets(6, 4, &entries);
            let mut buf = Vec::new();
            write_coo(&m, &mut buf).unwrap();
            let back = read_coo(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(to_dense(&m), to_dense(&back));
        }
    }
}
