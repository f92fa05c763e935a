//! Dense graph-signal algebra: shifts by a channel matrix, polynomial graph
//! filters, and node relabelling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square nonnegative matrix of channel gains, used as the graph shift
/// operator. Entry `(i, j)` is the gain from transmitter `i` to the receiver
/// serving node `j`. Stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl ChannelMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidChannel("dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::InvalidChannel(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidChannel(format!(
                "entry ({}, {}) = {} is not a finite nonnegative gain",
                bad / dim,
                bad % dim,
                entries[bad]
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 }).expect("identity is valid")
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(dim, vec![0.0; dim * dim]).expect("zero matrix is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i)).expect("transpose of a valid matrix")
    }

    /// `out = H z`.
    pub fn shift_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        for (row, o) in self.entries.chunks_exact(self.dim).zip(out.iter_mut()) {
            *o = row.iter().zip(z).map(|(h, v)| h * v).sum();
        }
    }

    /// `out = Hᵀ z`.
    pub fn shift_transpose_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, zi) in self.entries.chunks_exact(self.dim).zip(z) {
            if *zi == 0.0 {
                continue;
            }
            for (o, h) in out.iter_mut().zip(row) {
                *o += h * zi;
            }
        }
    }
}

/// A multi-feature signal on the `dim` nodes of a graph. Each feature is a
/// contiguous column of length `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSignal {
    dim: usize,
    features: usize,
    values: Vec<f64>,
}

impl GraphSignal {
    pub fn zeros(dim: usize, features: usize) -> Self {
        Self {
            dim,
            features,
            values: vec![0.0; dim * features],
        }
    }

    /// Single-feature signal.
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self {
            dim: values.len(),
            features: 1,
            values,
        }
    }

    /// Builds a signal from feature columns of equal length.
    pub fn from_features(columns: Vec<Vec<f64>>) -> Result<Self> {
        let features = columns.len();
        let dim = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "feature column",
                left: c.len(),
                right: dim,
            });
        }
        Ok(Self {
            dim,
            features,
            values: columns.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn feature(&self, f: usize) -> &[f64] {
        &self.values[f * self.dim..(f + 1) * self.dim]
    }

    pub fn feature_mut(&mut self, f: usize) -> &mut [f64] {
        &mut self.values[f * self.dim..(f + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GraphSignal, b: f64) -> Result<GraphSignal> {
        if self.dim != other.dim || self.features != other.features {
            return Err(Error::DimensionMismatch {
                what: "signal",
                left: other.dim * other.features,
                right: self.dim * self.features,
            });
        }
        Ok(GraphSignal {
            dim: self.dim,
            features: self.features,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &GraphSignal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_dims(h: &ChannelMatrix, z: &GraphSignal) -> Result<()> {
    if h.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            what: "graph signal",
            left: z.dim(),
            right: h.dim(),
        });
    }
    Ok(())
}

/// Applies one graph shift to every feature: returns `H·Z`.
pub fn shift(h: &ChannelMatrix, z: &GraphSignal) -> Result<GraphSignal> {
    check_dims(h, z)?;
    let mut out = GraphSignal::zeros(z.dim(), z.features());
    for f in 0..z.features() {
        h.shift_into(z.feature(f), out.feature_mut(f));
    }
    Ok(out)
}

/// Returns `[z, Hz, H²z, …, H^{order-1} z]` for a single feature column.
pub fn shifted_powers(h: &ChannelMatrix, z: &[f64], order: usize) -> Vec<Vec<f64>> {
    let mut powers = Vec::with_capacity(order);
    if order == 0 {
        return powers;
    }
    powers.push(z.to_vec());
    for k in 1..order {
        let mut next = vec![0.0; z.len()];
        h.shift_into(&powers[k - 1], &mut next);
        powers.push(next);
    }
    powers
}

/// Evaluates the polynomial graph filter `Σ_k taps[k]·Hᵏ·Z` by iterated
/// shifts, never forming a matrix power.
pub fn apply_filter(h: &ChannelMatrix, z: &GraphSignal, taps: &[f64]) -> Result<GraphSignal> {
    if taps.is_empty() {
        return Err(Error::EmptyTaps);
    }
    check_dims(h, z)?;
    let m = z.dim();
    let mut out = GraphSignal::zeros(m, z.features());
    let mut current = vec![0.0; m];
    let mut next = vec![0.0; m];
    for f in 0..z.features() {
        current.copy_from_slice(z.feature(f));
        let acc = out.feature_mut(f);
        for (k, &tap) in taps.iter().enumerate() {
            if k > 0 {
                h.shift_into(&current, &mut next);
                std::mem::swap(&mut current, &mut next);
            }
            for (a, c) in acc.iter_mut().zip(&current) {
                *a += tap * c;
            }
        }
    }
    Ok(out)
}

/// A relabelling of graph nodes: node `i` moves to position `mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &p in &mapping {
            if p >= mapping.len() || seen[p] {
                return Err(Error::InvalidPermutation(format!(
                    "index {p} is out of range or repeated"
                )));
            }
            seen[p] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mapping: (0..dim).collect(),
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut mapping: Vec<usize> = (0..dim).collect();
        mapping.shuffle(rng);
        Self { mapping }
    }

    pub fn dim(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn image(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &p) in self.mapping.iter().enumerate() {
            inv[p] = i;
        }
        Self { mapping: inv }
    }

    /// Dense 0/1 matrix form, row-major, with `Π[i][π(i)] = 1` so that
    /// `(Πᵀx)_{π(i)} = x_i`.
    pub fn to_matrix(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = vec![0.0; m * m];
        for (i, &p) in self.mapping.iter().enumerate() {
            out[i * m + p] = 1.0;
        }
        out
    }

    /// `Πᵀx` for every feature column.
    pub fn apply_signal(&self, x: &GraphSignal) -> Result<GraphSignal> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "signal",
                left: x.dim(),
                right: self.dim(),
            });
        }
        let mut out = GraphSignal::zeros(x.dim(), x.features());
        for f in 0..x.features() {
            let src = x.feature(f);
            let dst = out.feature_mut(f);
            for (i, &p) in self.mapping.iter().enumerate() {
                dst[p] = src[i];
            }
        }
        Ok(out)
    }

    /// `Πᵀ v` for a plain vector.
    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, &p) in self.mapping.iter().enumerate() {
            out[p] = v[i];
        }
        out
    }

    /// `ΠᵀHΠ`.
    pub fn apply_matrix(&self, h: &ChannelMatrix) -> Result<ChannelMatrix> {
        let m = self.dim();
        if h.dim() != m {
            return Err(Error::DimensionMismatch {
                what: "channel matrix",
                left: h.dim(),
                right: m,
            });
        }
        let inv = self.inverse();
        ChannelMatrix::from_fn(m, |a, b| h.get(inv.mapping[a], inv.mapping[b]))
    }
}

/// Relabels a graph and its signal: returns `(ΠᵀHΠ, Πᵀx)` by index gathers.
pub fn permute(
    h: &ChannelMatrix,
    x: &GraphSignal,
    pi: &Permutation,
) -> Result<(ChannelMatrix, GraphSignal)> {
    check_dims(h, x)?;
    Ok((pi.apply_matrix(h)?, pi.apply_signal(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn random_matrix(m: usize, rng: &mut impl Rng) -> ChannelMatrix {
        ChannelMatrix::from_fn(m, |_, _| rng.random::<f64>()).unwrap()
    }

    fn random_signal(m: usize, f: usize, rng: &mut impl Rng) -> GraphSignal {
        GraphSignal::from_features(
            (0..f)
                .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    // Dense reference product, scalar loops only.
    fn naive_matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += a[i * m + k] * b[k * m + j];
                }
                c[i * m + j] = s;
            }
        }
        c
    }

    fn naive_matvec(a: &[f64], v: &[f64], m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| (0..m).map(|j| a[i * m + j] * v[j]).sum())
            .collect()
    }

    #[test]
    fn shift_by_zero_and_identity() {
        let mut rng = stream(1, Stream::Init);
        let z = random_signal(5, 2, &mut rng);
        let zero = shift(&ChannelMatrix::zeros(5), &z).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
        assert_eq!(shift(&ChannelMatrix::identity(5), &z).unwrap(), z);
    }

    #[test]
    fn shift_matches_triple_loop() {
        let mut rng = stream(2, Stream::Init);
        let h = random_matrix(3, &mut rng);
        let z = random_signal(3, 2, &mut rng);
        let out = shift(&h, &z).unwrap();
        for f in 0..2 {
            let expect = naive_matvec(h.entries(), z.feature(f), 3);
            for (a, b) in out.feature(f).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shift_rejects_mismatch() {
        let err = shift(&ChannelMatrix::identity(3), &GraphSignal::zeros(4, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('4'), "{msg}");
    }

    #[test]
    fn transpose_shift_matches_transpose_matrix() {
        let mut rng = stream(3, Stream::Init);
        let h = random_matrix(6, &mut rng);
        let z: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let mut a = vec![0.0; 6];
        let mut b = vec![0.0; 6];
        h.shift_transpose_into(&z, &mut a);
        h.transpose().shift_into(&z, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn single_tap_scales() {
        let mut rng = stream(4, Stream::Init);
        let h = random_matrix(4, &mut rng);
        let z = random_signal(4, 1, &mut rng);
        let out = apply_filter(&h, &z, &[2.5]).unwrap();
        for (o, v) in out.values().iter().zip(z.values()) {
            assert_eq!(*o, 2.5 * v);
        }
        assert!(matches!(apply_filter(&h, &z, &[]), Err(Error::EmptyTaps)));
    }

    #[test]
    fn cyclic_graph_gives_circular_convolution() {
        let m = 6;
        // Hz shifts entry j into position j+1.
        let h = ChannelMatrix::from_fn(m, |i, j| if i == (j + 1) % m { 1.0 } else { 0.0 }).unwrap();
        let mut x = vec![0.0; m];
        x[0] = 1.0;
        let taps = [0.3, -1.2, 0.7, 2.0];
        let out = apply_filter(&h, &GraphSignal::from_vec(x), &taps).unwrap();
        let mut expect = vec![0.0; m];
        for (k, t) in taps.iter().enumerate() {
            expect[k % m] += t;
        }
        assert_eq!(out.values(), &expect[..]);
    }

    #[test]
    fn filter_matches_explicit_powers() {
        let mut rng = stream(5, Stream::Init);
        for m in [4, 8] {
            for k in 1..=6 {
                let h = random_matrix(m, &mut rng);
                let z = random_signal(m, 2, &mut rng);
                let taps: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let got = apply_filter(&h, &z, &taps).unwrap();
                let mut power = ChannelMatrix::identity(m).entries().to_vec();
                let mut expect = vec![vec![0.0; m]; 2];
                for t in &taps {
                    for (f, e) in expect.iter_mut().enumerate() {
                        let v = naive_matvec(&power, z.feature(f), m);
                        for (a, b) in e.iter_mut().zip(v) {
                            *a += t * b;
                        }
                    }
                    power = naive_matmul(&power, h.entries(), m);
                }
                for f in 0..2 {
                    for (a, b) in got.feature(f).iter().zip(&expect[f]) {
                        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_identity_and_inverse() {
        let mut rng = stream(6, Stream::Init);
        let h = random_matrix(5, &mut rng);
        let x = random_signal(5, 1, &mut rng);
        let (h1, x1) = permute(&h, &x, &Permutation::identity(5)).unwrap();
        assert_eq!((&h1, &x1), (&h, &x));
        let pi = Permutation::random(5, &mut rng);
        let (h2, x2) = permute(&h, &x, &pi).unwrap();
        let (h3, x3) = permute(&h2, &x2, &pi.inverse()).unwrap();
        assert_eq!((&h3, &x3), (&h, &x));
    }

    #[test]
    fn permuted_matrix_index_identity() {
        let mut rng = stream(7, Stream::Init);
        let h = random_matrix(5, &mut rng);
        let pi = Permutation::random(5, &mut rng);
        let hp = pi.apply_matrix(&h).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(hp.get(pi.image(i), pi.image(j)), h.get(i, j));
            }
        }
        // Same result through explicit Πᵀ H Π products.
        let p = pi.to_matrix();
        let pt: Vec<f64> = (0..25).map(|idx| p[(idx % 5) * 5 + idx / 5]).collect();
        let dense = naive_matmul(&naive_matmul(&pt, h.entries(), 5), &p, 5);
        assert_eq!(hp.entries(), &dense[..]);
        // Π·1 = 1 and Πᵀ·1 = 1.
        for r in 0..5 {
            assert_eq!((0..5).map(|c| p[r * 5 + c]).sum::<f64>(), 1.0);
            assert_eq!((0..5).map(|c| p[c * 5 + r]).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn invalid_permutation_rejected() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelMatrix::new(2, vec![1.0, -0.1, 0.0, 1.0]).is_err());
        assert!(ChannelMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(ChannelMatrix::new(0, vec![]).is_err());
        assert!(ChannelMatrix::new(2, vec![1.0]).is_err());
    }
}
