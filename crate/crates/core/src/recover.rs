// SPDX-License-Identifier: Apache-2.0

//! Embedding recovery from the unweighted recommendation graph.
//!
//! Hop distances on the symmetrized k-NN graph stand in for the hidden
//! metric; classical MDS turns them into coordinates. The result is only
//! defined up to a similarity transform, so comparisons against ground truth
//! go through [`procrustes_similarity`].

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::ItemId;
use crate::ingest::VectorTable;
use crate::network::{crawl, RecNetwork};
use crate::provider::Oracle;

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if a != b || !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) = {a} and ({j},{i}) = {b} are not a symmetric distance"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    /// Euclidean distances between the rows of `points` (`n x dim`, row-major).
    pub fn euclidean(points: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len(),
            });
        }
        let n = points.len() / dim;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = points[i * dim..(i + 1) * dim]
                    .iter()
                    .zip(&points[j * dim..(j + 1) * dim])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }
}

/// Hop distances plus whether any pair was unreachable.
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    pub distances: DistanceMatrix,
    /// Some pair had no path; its distance was capped at `n`.
    pub disconnected: bool,
}

/// Unit-length BFS distances on an undirected view of `net`.
///
/// With `symmetrize` an edge joins `i` and `j` when either recommends the
/// other; without it both must recommend each other (mutual k-NN).
/// Unreachable pairs get distance `n`.
pub fn shortest_paths(net: &RecNetwork, symmetrize: bool) -> ShortestPaths {
    let n = net.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in net.row(ItemId::new(i)) {
            let j = j.index();
            let reverse = net.row(ItemId::new(j)).contains(&ItemId::new(i));
            if symmetrize || reverse {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let cap = n as f64;
    let rows: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            let missing = dist.contains(&usize::MAX);
            let row = dist
                .into_iter()
                .map(|d| if d == usize::MAX { cap } else { d as f64 })
                .collect();
            (row, missing)
        })
        .collect();
    let disconnected = rows.iter().any(|r| r.1);
    let data = rows.into_iter().flat_map(|r| r.0).collect();
    ShortestPaths {
        distances: DistanceMatrix { n, data },
        disconnected,
    }
}

/// Centered coordinates, `n x dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredEmbedding {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl RecoveredEmbedding {
    pub fn new(n: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                found: coords.len(),
            });
        }
        Ok(RecoveredEmbedding { n, dim, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// As an embeddings table keyed by `item_ids`.
    pub fn to_table(&self, item_ids: Vec<u64>) -> Result<VectorTable> {
        VectorTable::with_ids(item_ids, self.dim, self.coords.clone())
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.dim, &self.coords)
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, dim) = m.shape();
        let coords = (0..n).flat_map(|i| (0..dim).map(move |j| m[(i, j)])).collect();
        RecoveredEmbedding { n, dim, coords }
    }
}

#[derive(Clone, Debug)]
pub struct Mds {
    pub embedding: RecoveredEmbedding,
    /// Eigenvalues of the doubly centered Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Fewer than `dim` positive eigenvalues; trailing columns are zero.
    pub padded: bool,
}

/// Classical (Torgerson) MDS into `dim` dimensions.
///
/// Columns are eigenvectors of `-1/2 J D^2 J` scaled by the square root of
/// their eigenvalue; each column's largest-magnitude entry is made positive.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Result<Mds> {
    let n = d.n();
    if n == 0 || dim + 1 > n {
        return Err(Error::InvalidInput(format!(
            "cannot embed {n} points into {dim} dimensions"
        )));
    }
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j).powi(2));
    let row_means = DVector::from_fn(n, |i, _| sq.row(i).mean());
    let grand = row_means.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues[0].abs().max(f64::MIN_POSITIVE);

    let mut coords = DMatrix::zeros(n, dim);
    let mut padded = false;
    for (c, &idx) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 1e-12 * scale {
            padded = true;
            continue;
        }
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        coords.set_column(c, &(v * lambda.sqrt()));
    }
    for mut col in coords.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(Mds {
        embedding: RecoveredEmbedding::from_matrix(&coords),
        eigenvalues,
        padded,
    })
}

/// Result of aligning an embedding onto reference coordinates.
#[derive(Clone, Debug)]
pub struct ProcrustesFit {
    pub aligned: RecoveredEmbedding,
    /// Root mean squared per-point Euclidean residual.
    pub rmse: f64,
    pub scale: f64,
    /// Orthogonal `dim x dim` matrix, row-major; may include a reflection.
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
    /// `x` had zero spread; the scale was clamped to zero.
    pub degenerate: bool,
}

/// Optimal similarity transform `s X R + t` (rotation, reflection, scale,
/// translation) minimizing the Frobenius distance to `y`.
pub fn procrustes_similarity(x: &RecoveredEmbedding, y: &RecoveredEmbedding) -> Result<ProcrustesFit> {
    if x.n() != y.n() || x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.n() * y.dim(),
            found: x.n() * x.dim(),
        });
    }
    if x.n() == 0 {
        return Err(Error::Empty("procrustes on zero points".into()));
    }
    let (n, dim) = (x.n(), x.dim());
    let xm = x.to_matrix();
    let ym = y.to_matrix();
    let x_mean = xm.row_mean();
    let y_mean = ym.row_mean();
    let xc = DMatrix::from_fn(n, dim, |i, j| xm[(i, j)] - x_mean[j]);
    let yc = DMatrix::from_fn(n, dim, |i, j| ym[(i, j)] - y_mean[j]);

    let norm_x = xc.norm_squared();
    let degenerate = norm_x <= f64::EPSILON * (1.0 + yc.norm_squared());
    let (rotation, scale) = if degenerate {
        (DMatrix::identity(dim, dim), 0.0)
    } else {
        let svd = (xc.transpose() * &yc).svd(true, true);
        let u = svd.u.as_ref().expect("svd computed u");
        let v_t = svd.v_t.as_ref().expect("svd computed v_t");
        let r = u * v_t;
        (r, svd.singular_values.sum() / norm_x)
    };
    let fitted = &xc * &rotation * scale;
    let aligned = DMatrix::from_fn(n, dim, |i, j| fitted[(i, j)] + y_mean[j]);
    let rmse = ((&aligned - &ym).norm_squared() / n as f64).sqrt();
    // t = y_mean - s * x_mean * R
    let shifted = x_mean * &rotation * scale;
    let translation = (0..dim).map(|j| y_mean[j] - shifted[j]).collect();
    Ok(ProcrustesFit {
        aligned: RecoveredEmbedding::from_matrix(&aligned),
        rmse,
        scale,
        rotation: (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| rotation[(i, j)]).collect(),
        translation,
        degenerate,
    })
}

/// Ranks with ties sharing their average rank (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EtpDiagnostics {
    pub n: usize,
    /// Pages fetched by the crawl.
    pub accesses: usize,
    pub disconnected: bool,
    pub padded: bool,
    pub eigenvalues: Vec<f64>,
    /// Spearman correlation of recovered vs true pairwise distances.
    pub distance_spearman: Option<f64>,
    pub procrustes_rmse: Option<f64>,
    /// Largest true pairwise distance.
    pub truth_diameter: Option<f64>,
}

/// Crawl, symmetrized hop distances, classical MDS into `dim` dimensions.
///
/// When `truth` is given the diagnostics compare the recovery against it.
pub fn etp_pipeline<O: Oracle + ?Sized>(
    oracle: &O,
    dim: usize,
    truth: Option<&VectorTable>,
) -> Result<(RecoveredEmbedding, EtpDiagnostics)> {
    let net = crawl(oracle)?;
    let paths = shortest_paths(&net, true);
    let mds = classical_mds(&paths.distances, dim)?;
    let mut diag = EtpDiagnostics {
        n: net.n(),
        accesses: net.n(),
        disconnected: paths.disconnected,
        padded: mds.padded,
        eigenvalues: mds.eigenvalues.iter().take(dim + 2).copied().collect(),
        ..Default::default()
    };
    if let Some(t) = truth {
        if t.n_items() != net.n() || t.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: net.n() * dim,
                found: t.n_items() * t.dim(),
            });
        }
        let true_d = DistanceMatrix::euclidean(t.values(), t.dim())?;
        let rec_d = DistanceMatrix::euclidean(mds.embedding.coords(), dim)?;
        let (tu, ru) = (true_d.upper_triangle(), rec_d.upper_triangle());
        diag.distance_spearman = Some(spearman(&ru, &tu));
        diag.truth_diameter = Some(tu.iter().copied().fold(0.0, f64::max));
        let y = RecoveredEmbedding::new(t.n_items(), dim, t.values().to_vec())?;
        diag.procrustes_rmse = Some(procrustes_similarity(&mds.embedding, &y)?.rmse);
    }
    Ok((mds.embedding, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ItemId> {
        v.iter().map(|&i| ItemId(i)).collect()
    }

    fn emb(dim: usize, v: &[f64]) -> RecoveredEmbedding {
        RecoveredEmbedding::new(v.len() / dim, dim, v.to_vec()).unwrap()
    }

    #[test]
    fn path_graph_distance() {
        let net = RecNetwork::from_lists(1, &[ids(&[1]), ids(&[2]), vec![]]).unwrap();
        let sp = shortest_paths(&net, true);
        assert_eq!(sp.distances.get(0, 2), 2.0);
        assert_eq!(sp.distances.get(2, 0), 2.0);
        assert!(!sp.disconnected);
    }

    #[test]
    fn disconnected_pair_is_capped() {
        let net = RecNetwork::from_lists(1, &[vec![], vec![]]).unwrap();
        let sp = shortest_paths(&net, true);
        assert_eq!(sp.distances.get(0, 1), 2.0);
        assert!(sp.disconnected);
    }

    #[test]
    fn mutual_view_drops_one_way_edges() {
        let net = RecNetwork::from_lists(1, &[ids(&[1]), ids(&[0]), ids(&[0])]).unwrap();
        let sp = shortest_paths(&net, false);
        assert_eq!(sp.distances.get(0, 1), 1.0);
        assert_eq!(sp.distances.get(0, 2), 3.0);
    }

    #[test]
    fn collinear_points() {
        let d = DistanceMatrix::new(3, vec![0., 1., 2., 1., 0., 1., 2., 1., 0.]).unwrap();
        let mds = classical_mds(&d, 1).unwrap();
        let x = mds.embedding.coords();
        assert!(((x[1] - x[0]).abs() - 1.0).abs() < 1e-9);
        assert!(((x[2] - x[1]).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equilateral_triangle() {
        let d = DistanceMatrix::new(3, vec![0., 1., 1., 1., 0., 1., 1., 1., 0.]).unwrap();
        let mds = classical_mds(&d, 2).unwrap();
        let back = DistanceMatrix::euclidean(mds.embedding.coords(), 2).unwrap();
        for (a, b) in back.as_slice().iter().zip(d.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn extra_dimensions_are_flat() {
        let d = DistanceMatrix::new(3, vec![0., 1., 2., 1., 0., 1., 2., 1., 0.]).unwrap();
        let mds = classical_mds(&d, 2).unwrap();
        assert!(mds.padded);
        assert!((0..3).all(|i| mds.embedding.row(i)[1].abs() < 1e-6));
    }

    #[test]
    fn mds_rejects_too_many_dimensions() {
        let d = DistanceMatrix::new(2, vec![0., 1., 1., 0.]).unwrap();
        assert!(classical_mds(&d, 2).is_err());
    }

    #[test]
    fn procrustes_identity() {
        let x = emb(2, &[0., 0., 1., 0., 0., 2., 3., 1.]);
        let fit = procrustes_similarity(&x, &x).unwrap();
        assert!(fit.rmse < 1e-12);
        assert!((fit.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn procrustes_recovers_scaled_rotation() {
        let x = emb(2, &[0., 0., 1., 0., 0., 2., 3., 1., -1., 4.]);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let y: Vec<f64> = x
            .coords()
            .chunks(2)
            .flat_map(|p| [2.0 * (p[0] * c - p[1] * s) + 5.0, 2.0 * (p[0] * s + p[1] * c) - 1.0])
            .collect();
        let fit = procrustes_similarity(&x, &emb(2, &y)).unwrap();
        assert!(fit.rmse < 1e-10, "{}", fit.rmse);
        assert!((fit.scale - 2.0).abs() < 1e-10);
    }

    #[test]
    fn procrustes_recovers_reflection() {
        let x = emb(2, &[0., 0., 1., 0., 0., 2., 3., 1.]);
        let y: Vec<f64> = x.coords().chunks(2).flat_map(|p| [-p[0], p[1]]).collect();
        let fit = procrustes_similarity(&x, &emb(2, &y)).unwrap();
        assert!(fit.rmse < 1e-10);
    }

    #[test]
    fn procrustes_flags_degenerate_input() {
        let x = emb(2, &[1., 1., 1., 1., 1., 1.]);
        let y = emb(2, &[0., 0., 1., 0., 0., 1.]);
        let fit = procrustes_similarity(&x, &y).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.scale, 0.0);
    }

    #[test]
    fn spearman_with_ties() {
        assert!((spearman(&[1., 2., 3.], &[10., 20., 30.]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1., 2., 3.], &[3., 2., 1.]) + 1.0).abs() < 1e-12);
        assert_eq!(average_ranks(&[5., 1., 5.]), vec![2.5, 1.0, 2.5]);
    }
}
