//! Sparse symmetric storage and direct linear solvers.
//!
//! [`solve_direct`] is a simplicial sparse LDL^T factorization (up-looking,
//! elimination-tree based) behind a reverse Cuthill-McKee reordering, with
//! iterative refinement on top. Systems with a symmetric pattern but
//! unsymmetric values (the heat Jacobian with temperature-dependent
//! conductivity) go through a banded LU with partial pivoting. A Jacobi
//! preconditioned conjugate gradient is available as a fallback.
//!
//! Factorizations are single-threaded and deterministic.

use std::fmt::Write as _;
use std::path::Path;

use crate::{invalid, Error, Result};

/// Compressed-sparse-row matrix with sorted, duplicate-free column indices
/// per row and a structurally symmetric pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SystemMatrix {
    /// Builds from triplets, summing duplicates and sorting columns.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return invalid(format!("triplet ({i},{j}) out of range for n={n}"));
            }
        }
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[order[i]] = j;
            vals[order[i]] = v;
            order[i] += 1;
        }
        // sort each row, then compress duplicates
        let mut row_ptr = vec![0usize; n + 1];
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        for i in 0..n {
            let lo = counts[i];
            let hi = counts[i + 1];
            let mut entries: Vec<(usize, f64)> =
                (lo..hi).map(|p| (cols[p], vals[p])).collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                if out_cols.len() > row_ptr[i] && *out_cols.last().unwrap() == c {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            row_ptr[i + 1] = out_cols.len();
        }
        Ok(SystemMatrix { n, row_ptr, col_idx: out_cols, vals: out_vals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => self.vals[lo + p],
            Err(_) => 0.0,
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => self.vals[lo + p] = v,
            Err(_) => panic!("entry ({i},{j}) not in sparsity pattern"),
        }
    }

    /// Largest value asymmetry `max |A_ij - A_ji|`.
    pub fn value_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                let lo = self.row_ptr[j];
                let hi = self.row_ptr[j + 1];
                if self.col_idx[lo..hi].binary_search(&i).is_err() {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    /// Writes `i j value` lines (0-based) for debugging.
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{i} {j} {v:e}");
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn read_coordinate(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty file".into()))?;
        let n: usize = header
            .split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidArgument("bad coordinate header".into()))?;
        let mut triplets = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (i, j, v) = (
                it.next().and_then(|t| t.parse::<usize>().ok()),
                it.next().and_then(|t| t.parse::<usize>().ok()),
                it.next().and_then(|t| t.parse::<f64>().ok()),
            );
            match (i, j, v) {
                (Some(i), Some(j), Some(v)) => triplets.push((i, j, v)),
                _ => return invalid(format!("bad coordinate line '{line}'")),
            }
        }
        Self::from_triplets(n, &triplets)
    }
}

/// `y = A x`.
pub fn spmv(a: &SystemMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.n(), x.len(), "spmv dimension mismatch");
    let mut y = vec![0.0; a.n()];
    for i in 0..a.n() {
        let mut s = 0.0;
        for (j, v) in a.row(i) {
            s += v * x[j];
        }
        y[i] = s;
    }
    y
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`. Deterministic:
/// components are rooted at their lowest-degree node (index tie-break) and
/// neighbors expand in (degree, index) order.
pub fn rcm_permutation(a: &SystemMatrix) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        let root = match (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
        {
            Some(r) => r,
            None => break,
        };
        visited[root] = true;
        order.push(root);
        let mut head = order.len() - 1;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nbrs: Vec<usize> =
                a.row(u).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                if !visited[j] {
                    visited[j] = true;
                    order.push(j);
                }
            }
        }
    }
    order.reverse();
    order
}

fn permute_symmetric(a: &SystemMatrix, perm: &[usize]) -> SystemMatrix {
    let n = a.n();
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for (j, v) in a.row(i) {
            triplets.push((inv[i], inv[j], v));
        }
    }
    SystemMatrix::from_triplets(n, &triplets).expect("permutation preserves validity")
}

/// Sparse LDL^T factorization of a symmetric matrix (values included),
/// computed behind an RCM reordering.
pub struct LdltFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdltFactor {
    pub fn new(a: &SystemMatrix) -> Result<Self> {
        let n = a.n();
        let perm = rcm_permutation(a);
        let ap = permute_symmetric(a, &perm);

        // symbolic: elimination tree and column counts from the upper triangle
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            parent[k] = usize::MAX;
            flag[k] = k;
            for (j, _) in ap.row(k) {
                if j >= k {
                    continue;
                }
                let mut i = j;
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }

        // numeric
        let nnz_l = lp[n];
        let mut li = vec![0usize; nnz_l];
        let mut lx = vec![0.0f64; nnz_l];
        let mut d = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut fill = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let max_diag = (0..n).map(|i| ap.get(i, i).abs()).fold(0.0f64, f64::max).max(1e-300);

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            y[k] = 0.0;
            for (j, v) in ap.row(k) {
                if j > k {
                    continue;
                }
                y[j] += v;
                if j == k {
                    continue;
                }
                let mut len = 0;
                let mut i = j;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    stack[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for t in top..n {
                let i = stack[t];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + fill[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                fill[i] += 1;
            }
            if d[k].abs() <= 1e-14 * max_diag {
                return Err(Error::SolverBreakdown(format!(
                    "zero pivot at elimination step {k}: d = {}, largest diagonal {max_diag}",
                    d[k]
                )));
            }
        }
        Ok(LdltFactor { n, perm, lp, li, lx, d })
    }

    /// Smallest pivot of D; positive for positive definite input.
    pub fn min_pivot(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut z: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L z = b (unit lower, column-oriented)
        for j in 0..self.n {
            let zj = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                z[self.li[p]] -= self.lx[p] * zj;
            }
        }
        for j in 0..self.n {
            z[j] /= self.d[j];
        }
        // L^T x = z
        for j in (0..self.n).rev() {
            let mut s = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * z[self.li[p]];
            }
            z[j] = s;
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }
}

fn refine(a: &SystemMatrix, b: &[f64], x: &mut Vec<f64>, solve: impl Fn(&[f64]) -> Vec<f64>) {
    let nb = norm2(b).max(1e-300);
    for _ in 0..3 {
        let ax = spmv(a, x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if norm2(&r) <= 1e-12 * nb {
            break;
        }
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
}

/// Direct solve of a symmetric system by sparse LDL^T with iterative
/// refinement: the returned solution satisfies `||Ax-b|| <= 1e-10 ||b||`
/// whenever the factorization is healthy.
pub fn solve_direct(a: &SystemMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n() != b.len() {
        return invalid(format!("matrix is {}x{} but rhs has length {}", a.n(), a.n(), b.len()));
    }
    let f = LdltFactor::new(a)?;
    let mut x = f.solve(b);
    refine(a, b, &mut x, |r| f.solve(r));
    Ok(x)
}

/// Banded LU with partial pivoting for matrices with symmetric pattern but
/// unsymmetric values.
pub struct BandedLuFactor {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl BandedLuFactor {
    pub fn new(a: &SystemMatrix) -> Result<Self> {
        let n = a.n();
        let perm = rcm_permutation(a);
        let ap = permute_symmetric(a, &perm);
        let mut bw = 0usize;
        for i in 0..n {
            for (j, _) in ap.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        let (kl, ku) = (bw, bw);
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0f64; ldab * n];
        let at = |i: usize, j: usize| -> usize { j * ldab + (kl + ku + i) - j };
        for i in 0..n {
            for (j, v) in ap.row(i) {
                ab[at(i, j)] = v;
            }
        }
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let i_hi = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[at(j, j)].abs();
            for i in j + 1..=i_hi {
                let v = ab[at(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SolverBreakdown(format!(
                    "banded LU: zero pivot column {j}"
                )));
            }
            ipiv[j] = p;
            let c_hi = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=c_hi {
                    ab.swap(at(j, c), at(p, c));
                }
            }
            let piv = ab[at(j, j)];
            for i in j + 1..=i_hi {
                let m = ab[at(i, j)] / piv;
                ab[at(i, j)] = m;
                if m != 0.0 {
                    for c in j + 1..=c_hi {
                        let u = ab[at(j, c)];
                        if u != 0.0 {
                            ab[at(i, c)] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(BandedLuFactor { n, kl, ku, ldab, ab, ipiv, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let at = |i: usize, j: usize| -> usize { j * self.ldab + (self.kl + self.ku + i) - j };
        let mut z: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            if self.ipiv[j] != j {
                z.swap(j, self.ipiv[j]);
            }
            let zj = z[j];
            if zj != 0.0 {
                for i in j + 1..=(j + self.kl).min(self.n - 1) {
                    z[i] -= self.ab[at(i, j)] * zj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let xj = z[j] / self.ab[at(j, j)];
            z[j] = xj;
            if xj != 0.0 {
                let i_lo = j.saturating_sub(self.ku + self.kl);
                for i in i_lo..j {
                    z[i] -= self.ab[at(i, j)] * xj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }
}

/// Direct solve for structurally symmetric systems with unsymmetric values.
pub fn solve_banded_lu(a: &SystemMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n() != b.len() {
        return invalid(format!("matrix is {}x{} but rhs has length {}", a.n(), a.n(), b.len()));
    }
    let f = BandedLuFactor::new(a)?;
    let mut x = f.solve(b);
    refine(a, b, &mut x, |r| f.solve(r));
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradient fallback for SPD systems.
pub fn solve_cg(a: &SystemMatrix, b: &[f64], tol_rel: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n();
    if n != b.len() {
        return invalid("cg dimension mismatch");
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        if norm2(&r) <= tol_rel * nb {
            return Ok(x);
        }
        let ap = spmv(a, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SolverBreakdown(
                "cg: matrix is not positive definite".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = r.iter().zip(&diag).map(|(ri, di)| ri * di).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm2(&r) <= tol_rel * nb {
        Ok(x)
    } else {
        Err(Error::SolverBreakdown(format!(
            "cg did not converge in {max_iter} iterations (residual {:.3e})",
            norm2(&r) / nb
        )))
    }
}

/// Which direct solver a (sub)problem should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Sparse LDL^T; requires symmetric values.
    Direct,
    /// Banded LU with partial pivoting; symmetric pattern only.
    DirectUnsymmetric,
    /// Jacobi-preconditioned CG; requires SPD.
    ConjugateGradient,
}

pub fn solve(kind: LinearSolverKind, a: &SystemMatrix, b: &[f64]) -> Result<Vec<f64>> {
    match kind {
        LinearSolverKind::Direct => solve_direct(a, b),
        LinearSolverKind::DirectUnsymmetric => solve_banded_lu(a, b),
        LinearSolverKind::ConjugateGradient => solve_cg(a, b, 1e-12, 20 * a.n().max(100)),
    }
}
