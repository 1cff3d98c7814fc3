//! Finite sections of Toeplitz and Hankel operators and the correction operators built from them.
//!
//! Block entry `(i, j)` of `T(a)` is `a_{i−j}` and of `H(a)` is `a_{i+j+1}`, with `i, j` absolute
//! Fourier modes starting at 0. A [`Section`] is the restriction to a rectangle of modes and can be
//! materialized densely or applied to a block of columns by FFT convolution.

use std::ops::Range;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::factorization::FactorPair;
use crate::linalg::{
    fft_plan, max_abs, singular_values as dense_singular_values, spectral_norm, trace, CMat, C64, ZERO,
};
use crate::regularity::ModulusTable;
use crate::symbols::{block_norm, FourierSymbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OpKind {
    Toeplitz,
    Hankel,
}

/// Rectangle `rows × cols` (in modes) of `T(a)` or `H(a)`.
#[derive(Clone, Debug)]
pub struct Section<'a> {
    pub symbol: &'a FourierSymbol,
    pub kind: OpKind,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl<'a> Section<'a> {
    pub fn toeplitz(symbol: &'a FourierSymbol, rows: Range<usize>, cols: Range<usize>) -> Self {
        Self { symbol, kind: OpKind::Toeplitz, rows, cols }
    }

    pub fn hankel(symbol: &'a FourierSymbol, rows: Range<usize>, cols: Range<usize>) -> Self {
        Self { symbol, kind: OpKind::Hankel, rows, cols }
    }

    fn index(&self, i: usize, j: usize) -> i64 {
        match self.kind {
            OpKind::Toeplitz => i as i64 - j as i64,
            OpKind::Hankel => (i + j + 1) as i64,
        }
    }

    pub fn dense(&self) -> CMat {
        let n = self.symbol.dim();
        let (p, q) = (self.rows.len(), self.cols.len());
        let mut out = CMat::zeros(p * n, q * n);
        for (jj, j) in self.cols.clone().enumerate() {
            for (ii, i) in self.rows.clone().enumerate() {
                if let Some(m) = self.symbol.coeff_ref(self.index(i, j)) {
                    out.view_mut((ii * n, jj * n), (n, n)).copy_from(m);
                }
            }
        }
        out
    }

    /// The generating sequence `g_m`, `m = 0..P+Q−1`, of one entry (see [`Section::apply`]).
    fn sequence(&self, alpha: usize, beta: usize) -> Vec<C64> {
        let (p, q) = (self.rows.len(), self.cols.len());
        let start = match self.kind {
            OpKind::Toeplitz => self.rows.start as i64 - self.cols.start as i64 - (q as i64 - 1),
            OpKind::Hankel => (self.rows.start + self.cols.start + 1) as i64,
        };
        (0..(p + q - 1) as i64)
            .map(|m| self.symbol.entry_coeff(start + m, alpha, beta))
            .collect()
    }

    /// `S·X` for `X` with `cols.len()·N` rows.
    ///
    /// Both kinds reduce to `y_p = (g * x')_{p+Q−1}` where `x' = x` for Toeplitz sections and the
    /// reversed `x` for Hankel sections.
    pub fn apply(&self, x: &CMat) -> CMat {
        let n = self.symbol.dim();
        let (p, q) = (self.rows.len(), self.cols.len());
        assert_eq!(x.nrows(), q * n, "section apply: row count");
        let ncols = x.ncols();
        let mut out = CMat::zeros(p * n, ncols);
        if p == 0 || q == 0 || ncols == 0 {
            return out;
        }
        let reverse = self.kind == OpKind::Hankel;
        let len = (p + q - 1 + q).next_power_of_two();
        let (fwd, inv) = (fft_plan(len, false), fft_plan(len, true));
        for alpha in 0..n {
            for beta in 0..n {
                let g = self.sequence(alpha, beta);
                let nz: Vec<(usize, C64)> = g.iter().copied().enumerate().filter(|(_, z)| *z != ZERO).collect();
                if nz.is_empty() {
                    continue;
                }
                let fft_cost = 3.0 * len as f64 * (len as f64).log2() + 8.0 * len as f64;
                if (nz.len() * p) as f64 <= fft_cost {
                    for col in 0..ncols {
                        for pp in 0..p {
                            let mut acc = ZERO;
                            for &(m, gm) in &nz {
                                // m = p + Q − 1 − r, r the (possibly reversed) input index.
                                let r = pp as i64 + q as i64 - 1 - m as i64;
                                if r < 0 || r >= q as i64 {
                                    continue;
                                }
                                let qq = if reverse { q - 1 - r as usize } else { r as usize };
                                acc += gm * x[(qq * n + beta, col)];
                            }
                            out[(pp * n + alpha, col)] += acc;
                        }
                    }
                    continue;
                }
                let mut gh = vec![ZERO; len];
                gh[..g.len()].copy_from_slice(&g);
                fwd.process(&mut gh);
                let scale = 1.0 / len as f64;
                let mut buf = vec![ZERO; len];
                for col in 0..ncols {
                    buf.iter_mut().for_each(|z| *z = ZERO);
                    for r in 0..q {
                        let qq = if reverse { q - 1 - r } else { r };
                        buf[r] = x[(qq * n + beta, col)];
                    }
                    fwd.process(&mut buf);
                    for (z, h) in buf.iter_mut().zip(&gh) {
                        *z *= h;
                    }
                    inv.process(&mut buf);
                    for pp in 0..p {
                        out[(pp * n + alpha, col)] += buf[pp + q - 1] * scale;
                    }
                }
            }
        }
        out
    }
}

/// `T_n(a)`: block entries `a_{j−k}`, `0 <= j, k <= n`.
pub fn toeplitz_matrix(a: &FourierSymbol, n: usize) -> CMat {
    Section::toeplitz(a, 0..n + 1, 0..n + 1).dense()
}

/// `M×M` block truncation of `H(a)`.
pub fn hankel_matrix(a: &FourierSymbol, m: usize) -> CMat {
    Section::hankel(a, 0..m, 0..m).dense()
}

/// Dense compression of an operator on `H²_N` to the first `M` modes.
#[derive(Clone, Debug)]
pub struct OpTruncation {
    pub modes: usize,
    pub block: usize,
    pub matrix: CMat,
    pub provenance: String,
}

impl OpTruncation {
    pub fn new(modes: usize, block: usize, matrix: CMat, provenance: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != modes * block || matrix.ncols() != modes * block {
            return Err(LabError::InvalidArgument(format!(
                "truncation of {modes} modes with block {block} needs a square matrix of size {}",
                modes * block
            )));
        }
        Ok(Self { modes, block, matrix, provenance: provenance.into() })
    }

    pub fn identity(modes: usize, block: usize) -> Self {
        let n = modes * block;
        Self { modes, block, matrix: CMat::identity(n, n), provenance: "I".into() }
    }

    pub fn toeplitz(a: &FourierSymbol, modes: usize) -> Self {
        let m = Section::toeplitz(a, 0..modes, 0..modes).dense();
        Self { modes, block: a.dim(), matrix: m, provenance: "T(a)".into() }
    }

    pub fn hankel(a: &FourierSymbol, modes: usize) -> Self {
        Self { modes, block: a.dim(), matrix: hankel_matrix(a, modes), provenance: "H(a)".into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Modes `0..=n`.
    P(usize),
    /// Modes `> n`.
    Q(usize),
    /// Mode `j` alone.
    Delta(usize),
}

/// Diagonal 0/1 mask of a projection inside an `M`-mode truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionMask {
    pub kind: Projection,
    pub modes: usize,
    pub block: usize,
}

impl ProjectionMask {
    pub fn new(kind: Projection, modes: usize, block: usize) -> Self {
        Self { kind, modes, block }
    }

    pub fn contains(&self, mode: usize) -> bool {
        match self.kind {
            Projection::P(n) => mode <= n,
            Projection::Q(n) => mode > n,
            Projection::Delta(j) => mode == j,
        }
    }

    pub fn matrix(&self) -> CMat {
        let size = self.modes * self.block;
        CMat::from_fn(size, size, |i, j| {
            if i == j && self.contains(i / self.block) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
    }
}

/// Nonincreasing singular values of a truncation.
pub fn singular_values(a: &OpTruncation) -> Vec<f64> {
    dense_singular_values(&a.matrix)
}

/// `(Σ s^p)^{1/p}`.
pub fn schatten_norm(s: &[f64], p: f64) -> f64 {
    s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Mode count beyond which banded correction products no longer change.
pub fn exact_cutoff(b: &FourierSymbol, c: &FourierSymbol, n: usize) -> usize {
    n + 2 + b.band().max(c.band())
}

/// Starting from `X = Q_ℓ T(b) P_r`, returns `P T(c) Q_ℓ (Q_ℓ H(b) H(c̃) Q_ℓ)^k X` for `k <= k_max`,
/// where `P` covers `out_rows` and `P_r` covers `in_cols`, all inside `modes` modes.
fn correction_chain(
    b: &FourierSymbol,
    c: &FourierSymbol,
    ell: usize,
    out_rows: Range<usize>,
    in_cols: Range<usize>,
    k_max: usize,
    modes: usize,
) -> Vec<CMat> {
    let n = b.dim();
    let width = b.band().max(c.band());
    let q_end = modes.min(ell + 2 + width).max(ell + 1);
    let inner = 0..modes.min(width + 1).max(1);
    let q_range = ell + 1..q_end;
    let c_tilde = c.tilde();
    let mut x = Section::toeplitz(b, q_range.clone(), in_cols.clone()).dense();
    let left = Section::toeplitz(c, out_rows.clone(), q_range.clone());
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(left.apply(&x));
    for _ in 0..k_max {
        if max_abs(&x) == 0.0 {
            out.push(CMat::zeros(out_rows.len() * n, in_cols.len() * n));
            continue;
        }
        let y = Section::hankel(&c_tilde, inner.clone(), q_range.clone()).apply(&x);
        x = Section::hankel(b, q_range.clone(), inner.clone()).apply(&y);
        out.push(left.apply(&x));
    }
    out
}

fn max_entry_change(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
}

/// `F_{n,k}` for `k = 0..=k_max`, each of size `(n+1)N`.
///
/// Exact once `modes` reaches [`exact_cutoff`]; below it the value is compared against a doubled
/// cutoff and rejected when any entry moves by more than 1e−12.
pub fn correction_f_stack(
    b: &FourierSymbol,
    c: &FourierSymbol,
    n: usize,
    k_max: usize,
    modes: usize,
) -> Result<Vec<CMat>> {
    if b.dim() != c.dim() {
        return Err(LabError::BlockSizeMismatch(b.dim(), c.dim()));
    }
    let cutoff = exact_cutoff(b, c, n);
    let used = modes.min(cutoff).max(n + 1);
    let stack = correction_chain(b, c, n, 0..n + 1, 0..n + 1, k_max, used);
    if used < cutoff {
        let check = correction_chain(b, c, n, 0..n + 1, 0..n + 1, k_max, (2 * used).min(cutoff));
        let delta = max_entry_change(&stack, &check);
        if delta > 1e-12 {
            return Err(LabError::CutoffTooSmall { delta });
        }
    }
    Ok(stack)
}

/// `P_n T(c) Q_n (Q_n H(b) H(c̃) Q_n)^k Q_n T(b) P_n`.
pub fn correction_f(b: &FourierSymbol, c: &FourierSymbol, n: usize, k: usize, modes: usize) -> Result<CMat> {
    Ok(correction_f_stack(b, c, n, k, modes)?.pop().expect("nonempty stack"))
}

/// `G_{ℓ,k}` for `k = 0..=k_max`, each `N×N`.
pub fn correction_g_stack(
    b: &FourierSymbol,
    c: &FourierSymbol,
    ell: usize,
    k_max: usize,
    modes: usize,
) -> Result<Vec<CMat>> {
    if b.dim() != c.dim() {
        return Err(LabError::BlockSizeMismatch(b.dim(), c.dim()));
    }
    let cutoff = exact_cutoff(b, c, ell);
    let used = modes.min(cutoff).max(ell + 1);
    let stack = correction_chain(b, c, ell, 0..1, 0..1, k_max, used);
    if used < cutoff {
        let check = correction_chain(b, c, ell, 0..1, 0..1, k_max, (2 * used).min(cutoff));
        let delta = max_entry_change(&stack, &check);
        if delta > 1e-12 {
            return Err(LabError::CutoffTooSmall { delta });
        }
    }
    Ok(stack)
}

/// `P_0 T(c) Q_ℓ (Q_ℓ H(b) H(c̃) Q_ℓ)^k Q_ℓ T(b) P_0`.
pub fn correction_g(b: &FourierSymbol, c: &FourierSymbol, ell: usize, k: usize, modes: usize) -> Result<CMat> {
    Ok(correction_g_stack(b, c, ell, k, modes)?.pop().expect("nonempty stack"))
}

/// `|tr F|` and `N Σ_j ‖Δ_j F Δ_j‖` for a block matrix `F`.
pub fn diagonal_block_bound(f: &CMat, block: usize) -> (f64, f64) {
    let blocks = f.nrows() / block;
    let sum: f64 = (0..blocks)
        .map(|j| spectral_norm(&f.view((j * block, j * block), (block, block)).into_owned()))
        .sum();
    (trace(f).norm(), block as f64 * sum)
}

/// The dense `S×S` block matrix of `H(c̃)H(b)` with the inner sum over `inner` modes.
pub fn hankel_product(c_tilde: &FourierSymbol, b: &FourierSymbol, size: usize, inner: usize) -> CMat {
    let hb = Section::hankel(b, 0..inner, 0..size).dense();
    Section::hankel(c_tilde, 0..size, 0..inner).apply(&hb)
}

/// Operator norms of the four truncation products and the modulus bounds they are compared with.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TruncationNorms {
    pub n: usize,
    pub j: usize,
    /// `‖Q_n T(b) Δ_j‖`, `‖Δ_j T(c) Q_n‖`, `‖Q_n H(b)‖`, `‖H(c̃) Q_n‖`.
    pub norms: [f64; 4],
    /// `‖v₋‖ ω(u₊⁻¹, 1/(n−j+1))`, `‖v₊‖ ω(u₋⁻¹, 1/(n−j+1))`, and the same at `1/(n+1)`.
    pub bounds: [f64; 4],
}

impl TruncationNorms {
    /// `norm / bound`, with `0/0 = 0`.
    pub fn ratios(&self) -> [f64; 4] {
        let mut r = [0.0; 4];
        for i in 0..4 {
            r[i] = if self.norms[i] == 0.0 { 0.0 } else { self.norms[i] / self.bounds[i] };
        }
        r
    }
}

/// Caches the moduli of the factor inverses so many `(n, j)` pairs can be probed cheaply.
pub struct TruncationProbe<'a> {
    pair: &'a FactorPair,
    c_tilde: FourierSymbol,
    plus_inv: Vec<ModulusTable>,
    minus_inv: Vec<ModulusTable>,
    v_minus_sup: f64,
    v_plus_sup: f64,
}

fn entry_tables(s: &FourierSymbol, grid: usize) -> Result<Vec<ModulusTable>> {
    let n = s.dim();
    let mut out = Vec::with_capacity(n * n);
    for alpha in 0..n {
        for beta in 0..n {
            out.push(ModulusTable::new(&s.entry(alpha, beta), 1.0, grid)?);
        }
    }
    Ok(out)
}

fn sup_block_norm(s: &FourierSymbol, grid: usize) -> f64 {
    s.samples(grid).iter().map(block_norm).fold(0.0, f64::max)
}

impl<'a> TruncationProbe<'a> {
    pub fn new(pair: &'a FactorPair) -> Result<Self> {
        let band = pair.u_plus_inv.band().max(pair.u_minus_inv.band());
        let grid = (2 * band + 2).next_power_of_two().max(4096);
        Ok(Self {
            pair,
            c_tilde: pair.c.tilde(),
            plus_inv: entry_tables(&pair.u_plus_inv, grid)?,
            minus_inv: entry_tables(&pair.u_minus_inv, grid)?,
            v_minus_sup: sup_block_norm(&pair.v_minus, grid.max(4096)),
            v_plus_sup: sup_block_norm(&pair.v_plus, grid.max(4096)),
        })
    }

    fn omega(tables: &[ModulusTable], x: f64) -> f64 {
        tables.iter().map(|t| t.at(x)).fold(0.0, f64::max)
    }

    pub fn norms(&self, n: usize, j: usize, modes: usize) -> Result<TruncationNorms> {
        if j > n {
            return Err(LabError::InvalidArgument(format!("j = {j} exceeds n = {n}")));
        }
        if modes <= n + 1 {
            return Err(LabError::InvalidArgument(format!("{modes} modes leave Q_{n} empty")));
        }
        let (b, c) = (&self.pair.b, &self.pair.c);
        let q = n + 1..modes;
        let all = 0..modes;
        let norms = [
            spectral_norm(&Section::toeplitz(b, q.clone(), j..j + 1).dense()),
            spectral_norm(&Section::toeplitz(c, j..j + 1, q.clone()).dense()),
            hankel_norm(b, q.clone(), all.clone()),
            hankel_norm(&self.c_tilde, all, q),
        ];
        let near = 1.0 / (n - j + 1) as f64;
        let far = 1.0 / (n + 1) as f64;
        let bounds = [
            self.v_minus_sup * Self::omega(&self.plus_inv, near),
            self.v_plus_sup * Self::omega(&self.minus_inv, near),
            self.v_minus_sup * Self::omega(&self.plus_inv, far),
            self.v_plus_sup * Self::omega(&self.minus_inv, far),
        ];
        Ok(TruncationNorms { n, j, norms, bounds })
    }
}

/// Spectral norm of a Hankel section, restricted to its nonzero rectangle.
fn hankel_norm(a: &FourierSymbol, rows: Range<usize>, cols: Range<usize>) -> f64 {
    let top = a.band();
    let r_end = rows.end.min(top.saturating_sub(cols.start)).max(rows.start);
    let c_end = cols.end.min(top.saturating_sub(rows.start)).max(cols.start);
    if r_end == rows.start || c_end == cols.start {
        return 0.0;
    }
    spectral_norm(&Section::hankel(a, rows.start..r_end, cols.start..c_end).dense())
}

/// Four truncation norms of the pair at `(n, j)` together with their modulus bounds.
pub fn truncation_norms(pair: &FactorPair, n: usize, j: usize, modes: usize) -> Result<TruncationNorms> {
    TruncationProbe::new(pair)?.norms(n, j, modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{fixture_block_symbol, scalar_canonical_factor};
    use crate::linalg::matmul;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn tridiagonal() -> FourierSymbol {
        FourierSymbol::scalar_real(&[(-1, -0.3), (0, 1.15), (1, -0.5)])
    }

    #[test]
    fn toeplitz_examples() {
        let a = FourierSymbol::scalar_real(&[(1, 1.0), (-1, 1.0)]);
        let t = toeplitz_matrix(&a, 2);
        let expect = [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t[(i, j)], c(expect[i][j]));
            }
        }
        assert_eq!(toeplitz_matrix(&FourierSymbol::identity(2), 4), CMat::identity(10, 10));
        let t = toeplitz_matrix(&tridiagonal(), 1);
        assert_eq!(t[(0, 0)], c(1.15));
        assert_eq!(t[(0, 1)], c(-0.3));
        assert_eq!(t[(1, 0)], c(-0.5));
        assert_eq!(t[(1, 1)], c(1.15));
    }

    #[test]
    fn hankel_examples() {
        let h = hankel_matrix(&FourierSymbol::monomial(1, 1), 4);
        assert_eq!(h[(0, 0)], c(1.0));
        assert_eq!(h.iter().filter(|z| **z != ZERO).count(), 1);
        let h = hankel_matrix(&FourierSymbol::monomial(1, 3), 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(h[(i, j)], c(if i + j == 2 { 1.0 } else { 0.0 }));
            }
        }
        assert!(hankel_matrix(&FourierSymbol::monomial(1, -1), 4).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn apply_matches_dense() {
        let a = FourierSymbol::scalar(&[
            (-3, C64::new(0.2, 0.1)),
            (-1, c(-0.4)),
            (0, c(1.0)),
            (2, C64::new(0.3, -0.2)),
            (5, c(0.7)),
        ]);
        let x = CMat::from_fn(7, 3, |i, j| C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        for s in [Section::toeplitz(&a, 2..8, 1..8), Section::hankel(&a, 0..5, 1..8)] {
            let d = matmul(&s.dense(), &x);
            assert!(max_abs(&(s.apply(&x) - d)) < 1e-14);
        }
        // Long band forces the FFT path.
        let long: Vec<(i64, f64)> = (-300..=300).map(|k| (k, 1.0 / (1.0 + (k * k) as f64))).collect();
        let a = FourierSymbol::scalar_real(&long);
        let x = CMat::from_fn(200, 2, |i, j| C64::new((i * (j + 1)) as f64 % 7.0, 1.0));
        for s in [Section::toeplitz(&a, 50..250, 0..200), Section::hankel(&a, 3..150, 10..210)] {
            let d = matmul(&s.dense(), &x);
            assert!(max_abs(&(s.apply(&x) - d)) < 1e-11);
        }
    }

    #[test]
    fn apply_block_matches_dense() {
        let m = |v: [f64; 4]| CMat::from_row_slice(2, 2, &v.map(|x| c(x)));
        let a = FourierSymbol::new(2, vec![(-1, m([0.0, 0.4, 0.1, 0.0])), (0, m([1.0, 0.2, 0.0, 1.0])), (2, m([0.0, 0.0, 0.5, -0.3]))])
            .unwrap();
        let x = CMat::from_fn(10, 3, |i, j| C64::new(i as f64 - j as f64, 0.5));
        for s in [Section::toeplitz(&a, 0..6, 0..5), Section::hankel(&a, 1..4, 0..5)] {
            let d = matmul(&s.dense(), &x);
            assert!(max_abs(&(s.apply(&x) - d)) < 1e-13);
        }
    }

    #[test]
    fn correction_examples() {
        let k = FourierSymbol::scalar_real(&[(0, 2.0)]);
        for n in [0, 3] {
            for kk in 0..3 {
                assert!(max_abs(&correction_f(&k, &k, n, kk, 64).unwrap()) == 0.0);
            }
        }
        let t = FourierSymbol::monomial(1, 1);
        let t_inv = FourierSymbol::monomial(1, -1);
        let f = correction_f(&t, &t_inv, 4, 0, 64).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(f[(i, j)], c(if i == 4 && j == 4 { 1.0 } else { 0.0 }));
            }
        }
        assert_eq!(trace(&f), c(1.0));
        assert!(max_abs(&correction_f(&t, &t_inv, 4, 1, 64).unwrap()) == 0.0);

        assert_eq!(correction_g(&t, &t_inv, 0, 0, 64).unwrap()[(0, 0)], c(1.0));
        assert_eq!(correction_g(&t, &t_inv, 2, 0, 64).unwrap()[(0, 0)], c(0.0));
        assert_eq!(correction_g(&k, &t_inv, 3, 1, 64).unwrap()[(0, 0)], c(0.0));
    }

    #[test]
    fn correction_matches_dense_products() {
        let pair = scalar_canonical_factor(&tridiagonal(), 40).unwrap();
        let (b, cc) = (&pair.b, &pair.c);
        let n = 5;
        let m = 60;
        let p = ProjectionMask::new(Projection::P(n), m, 1).matrix();
        let q = ProjectionMask::new(Projection::Q(n), m, 1).matrix();
        let tb = OpTruncation::toeplitz(b, m).matrix;
        let tc = OpTruncation::toeplitz(cc, m).matrix;
        let hb = OpTruncation::hankel(b, m).matrix;
        let hct = OpTruncation::hankel(&cc.tilde(), m).matrix;
        let inner = matmul(&matmul(&q, &matmul(&hb, &hct)), &q);
        let mut mid = matmul(&matmul(&q, &tb), &p);
        for k in 0..3 {
            let dense = matmul(&matmul(&p, &tc), &mid);
            let f = correction_f(b, cc, n, k, 4096).unwrap();
            let sub = dense.view((0, 0), (n + 1, n + 1)).into_owned();
            assert!(max_abs(&(f - sub)) < 1e-12, "k={k}");
            mid = matmul(&inner, &mid);
        }
    }

    #[test]
    fn correction_reports_small_cutoff() {
        let long: Vec<(i64, f64)> = (-60i64..=60).map(|k| (k, 0.9f64.powi(k.abs() as i32))).collect();
        let a = FourierSymbol::scalar_real(&long);
        assert!(matches!(correction_f(&a, &a, 4, 1, 12), Err(LabError::CutoffTooSmall { .. })));
        assert!(correction_f(&a, &a, 4, 1, 1000).is_ok());
    }

    #[test]
    fn projection_algebra() {
        let (m, n) = (9, 2);
        for cut in [0, 3, 8] {
            let p = ProjectionMask::new(Projection::P(cut), m, n).matrix();
            let q = ProjectionMask::new(Projection::Q(cut), m, n).matrix();
            assert_eq!(&p * &p, p);
            assert!(max_abs(&(&p * &q)) == 0.0);
            assert_eq!(&p + &q, CMat::identity(m * n, m * n));
            let mut sum = CMat::zeros(m * n, m * n);
            for j in 0..=cut {
                sum += ProjectionMask::new(Projection::Delta(j), m, n).matrix();
            }
            assert_eq!(sum, p);
        }
        assert_eq!(OpTruncation::identity(4, 2).matrix, CMat::identity(8, 8));
    }

    #[test]
    fn singular_value_examples() {
        let s = singular_values(&OpTruncation::hankel(&FourierSymbol::monomial(1, 3), 6));
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[2] - 1.0).abs() < 1e-14 && s[3] < 1e-14);
        let s = singular_values(&OpTruncation::identity(5, 1));
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-14) && s.len() == 5);
        assert!((schatten_norm(&[3.0, 4.0], 2.0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn toeplitz_product_identity_on_interior() {
        let a = FourierSymbol::scalar_real(&[(0, 1.0), (2, 0.3), (-1, 0.25)]);
        let inv = a.inverse(200).unwrap();
        let m = 40;
        let prod = matmul(&OpTruncation::toeplitz(&a, 2 * m).matrix, &OpTruncation::toeplitz(&inv, 2 * m).matrix);
        let hh = matmul(&Section::hankel(&a, 0..m, 0..2 * m).dense(), &Section::hankel(&inv.tilde(), 0..2 * m, 0..m).dense());
        let h = m / 2;
        for i in 0..h {
            for j in 0..h {
                let lhs = if i == j { c(1.0) } else { ZERO } - prod[(i, j)];
                assert!((lhs - hh[(i, j)]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn truncation_norm_examples() {
        let pair = scalar_canonical_factor(&FourierSymbol::scalar_real(&[(0, 3.0)]), 8).unwrap();
        let t = truncation_norms(&pair, 4, 0, 32).unwrap();
        assert_eq!(t.norms, [0.0; 4]);

        let pair = scalar_canonical_factor(&tridiagonal(), 96).unwrap();
        let probe = TruncationProbe::new(&pair).unwrap();
        let t = probe.norms(8, 0, 128).unwrap();
        let b = &pair.b;
        let explicit = Section::hankel(b, 9..128, 0..128).dense();
        let full = dense_singular_values(&hankel_matrix(b, 128))[0];
        let s = dense_singular_values(&explicit)[0];
        assert!((t.norms[2] - s).abs() < 1e-12);
        assert!(t.norms[2] <= full + 1e-12);
        assert!(t.bounds.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn polynomial_b_has_vanishing_column_tails() {
        let m = |v: [f64; 4]| CMat::from_row_slice(2, 2, &v.map(|x| c(x)));
        let id = CMat::identity(2, 2);
        let u_minus = FourierSymbol::new(2, vec![(0, id.clone()), (-1, m([0.0, 0.4, 0.0, 0.0]))]).unwrap();
        let u_plus = FourierSymbol::new(2, vec![(0, id.clone()), (1, m([0.0, 0.0, 0.5, 0.0]))]).unwrap();
        let v_minus = FourierSymbol::new(2, vec![(0, id.clone()), (-1, m([0.0, 1.0 / 3.0, 0.0, 0.0]))]).unwrap();
        let v_plus = FourierSymbol::new(2, vec![(0, m([1.2, 0.0, 0.0, 5.0 / 6.0])), (1, m([0.0, 0.0, 0.5, 0.0]))]).unwrap();
        let (_, pair) = fixture_block_symbol(&u_minus, &u_plus, &v_plus, &v_minus).unwrap();
        let d = pair.b.support(1e-14).unwrap().1 as usize;
        let t = truncation_norms(&pair, 10, 10 - d, 40).unwrap();
        assert_eq!(t.norms[0], 0.0);
    }

    #[test]
    fn trace_block_bound_holds() {
        let pair = scalar_canonical_factor(&tridiagonal(), 64).unwrap();
        for k in 0..3 {
            let f = correction_f(&pair.b, &pair.c, 6, k, 4096).unwrap();
            let (tr, bound) = diagonal_block_bound(&f, 1);
            assert!(tr <= bound + 1e-15);
        }
    }
}
