//! Redundant-band removal: complete-linkage clustering on correlation
//! distance, then one representative band per cluster.

use crate::error::{Error, Result};
use crate::matrix::{pearson, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Symmetric band-to-band distance matrix with entries in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    d: Matrix,
}

impl DistanceMatrix {
    #[inline]
    pub fn len(&self) -> usize {
        self.d.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.d.rows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d.get(i, j)
    }
}

/// Disjoint band-index clusters covering the whole grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub threshold: f64,
}

/// Pearson correlation between every pair of columns. Parallel over rows
/// of the upper triangle; output is exactly symmetric with unit diagonal.
pub fn correlation_matrix(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 {
        return Err(Error::Contract(format!(
            "correlation needs at least 2 samples, got {n}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    for (j, c) in cols.iter().enumerate() {
        let m = crate::matrix::mean(c);
        if c.iter().all(|&v| v == m) {
            return Err(Error::Degenerate(format!("zero-variance band at index {j}")));
        }
    }
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; p];
            row[i] = 1.0;
            for j in i + 1..p {
                row[j] = pearson(&cols[i], &cols[j]);
            }
            row
        })
        .collect();
    let mut corr = Matrix::zeros(p, p);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            if j >= i {
                corr.set(i, j, v);
                corr.set(j, i, v);
            }
        }
    }
    Ok(corr)
}

/// d = 1 - |corr|, clamped into [0, 1], zero diagonal.
pub fn to_distance(corr: &Matrix) -> DistanceMatrix {
    let p = corr.rows();
    let mut d = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            d.set(i, j, (1.0 - corr.get(i, j).abs()).clamp(0.0, 1.0));
        }
    }
    DistanceMatrix { d }
}

/// Agglomerative clustering with complete linkage (cluster distance =
/// maximum pairwise member distance). Merging continues while the
/// minimum inter-cluster distance is <= threshold; ties break to the
/// lowest (i, j) position pair in the current cluster list.
pub fn complete_linkage(dist: &DistanceMatrix, threshold: f64) -> ClusterSet {
    let p = dist.len();
    let mut members: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
    // Working inter-cluster distances, updated with the complete-linkage
    // rule d(i+j, k) = max(d(i,k), d(j,k)).
    let mut d: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dist.get(i, j)).collect())
        .collect();

    while members.len() > 1 {
        let k = members.len();
        let mut best = (0usize, 0usize);
        let mut best_d = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                if d[i][j] < best_d {
                    best_d = d[i][j];
                    best = (i, j);
                }
            }
        }
        if best_d > threshold {
            break;
        }
        let (i, j) = best;
        let absorbed = members.remove(j);
        members[i].extend(absorbed);
        members[i].sort_unstable();
        for row in 0..k {
            if row == i || row == j {
                continue;
            }
            d[row][i] = d[row][i].max(d[row][j]);
            d[i][row] = d[row][i];
        }
        for row in &mut d {
            row.remove(j);
        }
        d.remove(j);
    }
    ClusterSet {
        clusters: members,
        threshold,
    }
}

/// Per cluster, the band with the highest |corr(band, y)|; ties break to
/// the lowest band index. Output is sorted ascending.
pub fn select_representatives(cs: &ClusterSet, x: &Matrix, y: &[f64]) -> Result<Vec<usize>> {
    let my = crate::matrix::mean(y);
    if y.iter().all(|&v| v == my) {
        return Err(Error::Degenerate("zero-variance target".into()));
    }
    let mut reps = Vec::with_capacity(cs.clusters.len());
    for cluster in &cs.clusters {
        let mut best_band = cluster[0];
        let mut best_corr = -1.0;
        for &b in cluster {
            let c = pearson(&x.column(b), y).abs();
            if c > best_corr {
                best_corr = c;
                best_band = b;
            }
        }
        reps.push(best_band);
    }
    reps.sort_unstable();
    Ok(reps)
}

/// Convenience wrapper: correlation -> distance -> clustering -> reps.
pub fn reduce_bands(x: &Matrix, y: &[f64], threshold: f64) -> Result<(ClusterSet, Vec<usize>)> {
    let corr = correlation_matrix(x)?;
    let dist = to_distance(&corr);
    let cs = complete_linkage(&dist, threshold);
    let reps = select_representatives(&cs, x, y)?;
    Ok((cs, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = crate::seed::rng_for(seed, 0);
        let rows = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Matrix::from_rows(rows).unwrap()
    }

    /// Direct sum-formula Pearson, independent of matrix::pearson.
    fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let sx: f64 = a.iter().sum();
        let sy: f64 = b.iter().sum();
        let sxy: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let sxx: f64 = a.iter().map(|x| x * x).sum();
        let syy: f64 = b.iter().map(|y| y * y).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn duplicated_and_negated_columns() {
        let x = Matrix::from_rows(vec![
            vec![1.0, 1.0, -1.0],
            vec![2.0, 2.0, -2.0],
            vec![4.0, 4.0, -4.0],
        ])
        .unwrap();
        let c = correlation_matrix(&x).unwrap();
        assert_abs_diff_eq!(c.get(0, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.get(0, 2), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_direct_formula_oracle() {
        let x = Matrix::from_rows(vec![
            vec![0.3, -1.2, 2.0],
            vec![1.1, 0.4, -0.5],
            vec![-0.7, 2.2, 0.9],
            vec![0.0, 1.5, 1.5],
        ])
        .unwrap();
        let c = correlation_matrix(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    1.0
                } else {
                    pearson_oracle(&x.column(i), &x.column(j))
                };
                assert_abs_diff_eq!(c.get(i, j), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn names_zero_variance_band() {
        let x = Matrix::from_rows(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let err = correlation_matrix(&x).unwrap_err();
        assert!(err.to_string().contains("index 1"));
    }

    #[test]
    fn distance_mapping() {
        let mut corr = Matrix::zeros(2, 2);
        corr.set(0, 0, 1.0);
        corr.set(1, 1, 1.0);
        corr.set(0, 1, -1.0);
        corr.set(1, 0, -1.0);
        let d = to_distance(&corr);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(0, 0), 0.0);

        corr.set(0, 1, 0.92);
        corr.set(1, 0, 0.92);
        let d = to_distance(&corr);
        assert_abs_diff_eq!(d.get(0, 1), 0.08, epsilon = 1e-15);
    }

    fn dist_from(entries: Vec<Vec<f64>>) -> DistanceMatrix {
        let p = entries.len();
        let mut m = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                m.set(i, j, entries[i][j]);
            }
        }
        DistanceMatrix { d: m }
    }

    #[test]
    fn all_far_gives_singletons_all_zero_gives_one() {
        let p = 4;
        let mut far = vec![vec![0.5; p]; p];
        for (i, row) in far.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let cs = complete_linkage(&dist_from(far), 0.08);
        assert_eq!(cs.clusters.len(), 4);

        let zero = vec![vec![0.0; p]; p];
        let cs = complete_linkage(&dist_from(zero), 0.08);
        assert_eq!(cs.clusters.len(), 1);
        assert_eq!(cs.clusters[0], vec![0, 1, 2, 3]);
    }

    /// Brute-force reference: recompute every inter-cluster distance from
    /// the original matrix (max over member pairs) at each step.
    fn complete_linkage_oracle(d: &DistanceMatrix, threshold: f64) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
        loop {
            if clusters.len() == 1 {
                break;
            }
            let mut best = (0, 0);
            let mut best_d = f64::INFINITY;
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut link = 0.0_f64;
                    for &a in &clusters[i] {
                        for &b in &clusters[j] {
                            link = link.max(d.get(a, b));
                        }
                    }
                    if link < best_d {
                        best_d = link;
                        best = (i, j);
                    }
                }
            }
            if best_d > threshold {
                break;
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
            clusters[best.0].sort_unstable();
        }
        clusters
    }

    #[test]
    fn crafted_matrix_matches_bruteforce_oracle() {
        // 5 bands: {0,1} tight, {3,4} tight, 2 near {0,1} but outside the
        // threshold through band 1 under complete linkage.
        let m = vec![
            vec![0.00, 0.02, 0.06, 0.90, 0.80],
            vec![0.02, 0.00, 0.10, 0.85, 0.95],
            vec![0.06, 0.10, 0.00, 0.70, 0.75],
            vec![0.90, 0.85, 0.70, 0.00, 0.03],
            vec![0.80, 0.95, 0.75, 0.03, 0.00],
        ];
        let d = dist_from(m);
        let got = complete_linkage(&d, 0.08);
        let want = complete_linkage_oracle(&d, 0.08);
        assert_eq!(got.clusters, want);
        // Sanity: band 2 stays out because max(0.06, 0.10) > 0.08.
        assert!(got.clusters.contains(&vec![0, 1]));
        assert!(got.clusters.contains(&vec![2]));
        assert!(got.clusters.contains(&vec![3, 4]));
    }

    #[test]
    fn random_matrices_match_bruteforce_oracle() {
        for seed in 0..20u64 {
            let mut rng = crate::seed::rng_for(seed, 7);
            let p = 6;
            let mut m = vec![vec![0.0; p]; p];
            for i in 0..p {
                for j in i + 1..p {
                    let v: f64 = rng.gen_range(0.0..1.0);
                    // quantized to make exact ties possible
                    let v = (v * 20.0).round() / 20.0;
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let d = dist_from(m);
            for &t in &[0.05, 0.25, 0.6] {
                let got = complete_linkage(&d, t);
                let want = complete_linkage_oracle(&d, t);
                assert_eq!(got.clusters, want, "seed {seed} threshold {t}");
            }
        }
    }

    #[test]
    fn threshold_coarsening_is_monotone() {
        let x = random_matrix(30, 12, 3);
        let corr = correlation_matrix(&x).unwrap();
        let d = to_distance(&corr);
        let mut last = usize::MAX;
        for t in [0.0, 0.1, 0.3, 0.5, 0.9, 1.0] {
            let k = complete_linkage(&d, t).clusters.len();
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn representative_trivia() {
        // cluster {0,1} where band 0 == y exactly
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let x = Matrix::from_rows(vec![
            vec![1.0, 0.3, 9.0],
            vec![2.0, 0.1, 8.0],
            vec![3.0, 0.9, 7.5],
            vec![4.0, 0.2, 9.5],
        ])
        .unwrap();
        let cs = ClusterSet {
            clusters: vec![vec![0, 1], vec![2]],
            threshold: 0.08,
        };
        let reps = select_representatives(&cs, &x, &y).unwrap();
        assert_eq!(reps, vec![0, 2]);
    }

    #[test]
    fn representatives_match_linear_scan_oracle() {
        let x = random_matrix(25, 20, 5);
        let mut rng = crate::seed::rng_for(6, 0);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
        let corr = correlation_matrix(&x).unwrap();
        let cs = complete_linkage(&to_distance(&corr), 0.6);
        let reps = select_representatives(&cs, &x, &y).unwrap();

        let mut want = Vec::new();
        for cluster in &cs.clusters {
            let mut best = cluster[0];
            for &b in cluster {
                let cb = pearson_oracle(&x.column(b), &y).abs();
                let cbest = pearson_oracle(&x.column(best), &y).abs();
                if cb > cbest {
                    best = b;
                }
            }
            want.push(best);
        }
        want.sort_unstable();
        assert_eq!(reps, want);
        assert_eq!(reps.len(), cs.clusters.len());
    }

    #[test]
    fn representative_invariant_under_band_rescaling() {
        let x = random_matrix(25, 8, 9);
        let mut rng = crate::seed::rng_for(10, 0);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
        let corr = correlation_matrix(&x).unwrap();
        let cs = complete_linkage(&to_distance(&corr), 0.5);
        let reps = select_representatives(&cs, &x, &y).unwrap();

        let mut scaled = x.clone();
        for i in 0..scaled.rows() {
            let v = 5.0 * scaled.get(i, 3) + 2.0;
            scaled.set(i, 3, v);
        }
        let reps2 = select_representatives(&cs, &scaled, &y).unwrap();
        assert_eq!(reps, reps2);
    }

    #[test]
    fn rejects_constant_target() {
        let x = random_matrix(10, 3, 1);
        let cs = ClusterSet {
            clusters: vec![vec![0, 1, 2]],
            threshold: 0.08,
        };
        assert!(select_representatives(&cs, &x, &[1.0; 10]).is_err());
    }
}
