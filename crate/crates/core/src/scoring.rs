//! Polygon-area feature scoring.
//!
//! The converged weight matrix is first mapped into the first quadrant by
//! taking entrywise absolute values. Row j of the result gives the weights
//! feature j carries in the k class equations; plotted over x = 1..k with
//! zero anchors at x = 0 and x = k+1 they form a polygon whose area under
//! the piecewise-linear boundary is the feature's score. With unit x-spacing
//! and zero anchors the trapezoid sum collapses to the row sum — the polygon
//! is still built and integrated segment by segment so that identity stays
//! checkable.

use serde::Serialize;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::objective::StiefelPoint;

/// The entrywise-nonnegative weight matrix after quadrant processing.
#[derive(Debug, Clone)]
pub struct QuadrantWeights {
    w: DMatrix<f64>,
}

impl QuadrantWeights {
    /// Wraps a matrix, rejecting negative entries.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Data(
                "quadrant weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n_features(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w.ncols()
    }
}

/// Maps W into the first quadrant entrywise: W_delta[i][j] = |W[i][j]|.
pub fn quadrant_process(w: &StiefelPoint) -> QuadrantWeights {
    QuadrantWeights {
        w: w.matrix().map(f64::abs),
    }
}

/// The polygon of one feature: vertices (0,0), (1,w1), ..., (k,wk), (k+1,0).
#[derive(Debug, Clone, Serialize)]
pub struct FeaturePolygon {
    pub feature_index: usize,
    pub vertices: Vec<(f64, f64)>,
}

/// Builds the polygon for one feature row of the quadrant weights.
pub fn build_polygon(wq: &QuadrantWeights, feature: usize) -> Result<FeaturePolygon> {
    let d = wq.n_features();
    if feature >= d {
        return Err(Error::Config(format!(
            "feature index {feature} out of range for {d} features"
        )));
    }
    let k = wq.n_classes();
    let mut vertices = Vec::with_capacity(k + 2);
    vertices.push((0.0, 0.0));
    for c in 0..k {
        vertices.push(((c + 1) as f64, wq.w[(feature, c)]));
    }
    vertices.push(((k + 1) as f64, 0.0));
    Ok(FeaturePolygon {
        feature_index: feature,
        vertices,
    })
}

/// Area between the polygon boundary and the x-axis: the exact integral of
/// each linear segment, i.e. the trapezoid (y_i + y_{i+1})/2 · (x_{i+1} − x_i)
/// summed over segments.
pub fn polygon_area(poly: &FeaturePolygon) -> f64 {
    poly.vertices
        .windows(2)
        .map(|seg| 0.5 * (seg[0].1 + seg[1].1) * (seg[1].0 - seg[0].0))
        .sum()
}

/// One ranked feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeature {
    pub feature_index: usize,
    pub area: f64,
}

/// Features sorted by polygon area, largest first; ties break toward the
/// smaller feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    /// Entries in rank order (best first).
    pub fn entries(&self) -> &[RankedFeature] {
        &self.entries
    }

    /// Feature indices in rank order.
    pub fn ordered_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.feature_index).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rebuilds a ranking from already-ordered (index, area) pairs, checking
    /// that the indices form a permutation of [0, d). Used when reading a
    /// ranking back from disk.
    pub fn from_entries(entries: Vec<RankedFeature>) -> Result<Self> {
        let d = entries.len();
        let mut seen = vec![false; d];
        for e in &entries {
            if e.feature_index >= d || seen[e.feature_index] {
                return Err(Error::Data(format!(
                    "ranking entries are not a permutation of 0..{d}"
                )));
            }
            if !e.area.is_finite() || e.area < 0.0 {
                return Err(Error::Data(format!(
                    "feature {} has invalid area {}",
                    e.feature_index, e.area
                )));
            }
            seen[e.feature_index] = true;
        }
        Ok(Self { entries })
    }

    /// Writes the ranking as CSV: `feature_index,feature_name,polygon_area,rank`.
    pub fn write_csv<W: std::io::Write>(
        &self,
        names: Option<&[String]>,
        out: &mut W,
    ) -> std::io::Result<()> {
        writeln!(out, "feature_index,feature_name,polygon_area,rank")?;
        for (rank, e) in self.entries.iter().enumerate() {
            let name = names
                .and_then(|n| n.get(e.feature_index).cloned())
                .unwrap_or_else(|| format!("f{}", e.feature_index));
            writeln!(out, "{},{},{},{}", e.feature_index, name, e.area, rank + 1)?;
        }
        Ok(())
    }
}

/// Scores every feature by its polygon area and sorts descending.
pub fn rank_features(wq: &QuadrantWeights) -> FeatureRanking {
    let mut entries: Vec<RankedFeature> = (0..wq.n_features())
        .map(|j| {
            let poly = build_polygon(wq, j).expect("index in range");
            RankedFeature {
                feature_index: j,
                area: polygon_area(&poly),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.area
            .total_cmp(&a.area)
            .then(a.feature_index.cmp(&b.feature_index))
    });
    FeatureRanking { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::init_stiefel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn quadrant(rows: usize, cols: usize, data: &[f64]) -> QuadrantWeights {
        QuadrantWeights::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn quadrant_takes_absolute_values() {
        let w = init_stiefel(4, 2, 1).unwrap();
        let wq = quadrant_process(&w);
        for i in 0..4 {
            for j in 0..2 {
                assert_eq!(wq.matrix()[(i, j)], w.matrix()[(i, j)].abs());
            }
        }
    }

    #[test]
    fn quadrant_preserves_column_norms() {
        // |.| preserves norms and W has unit columns.
        for seed in 0..10 {
            let w = init_stiefel(7, 3, seed).unwrap();
            let wq = quadrant_process(&w);
            for j in 0..3 {
                assert_abs_diff_eq!(wq.matrix().column(j).norm(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn polygon_vertices_binary() {
        let wq = quadrant(1, 2, &[0.3, 0.7]);
        let poly = build_polygon(&wq, 0).unwrap();
        assert_eq!(
            poly.vertices,
            vec![(0.0, 0.0), (1.0, 0.3), (2.0, 0.7), (3.0, 0.0)]
        );
    }

    #[test]
    fn polygon_vertices_ternary() {
        let wq = quadrant(1, 3, &[1.0, 2.0, 3.0]);
        let poly = build_polygon(&wq, 0).unwrap();
        assert_eq!(poly.vertices.len(), 5);
        assert_eq!(*poly.vertices.last().unwrap(), (4.0, 0.0));
    }

    #[test]
    fn polygon_index_out_of_range() {
        let wq = quadrant(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        assert!(build_polygon(&wq, 2).is_err());
    }

    #[test]
    fn area_hand_trapezoids() {
        // 0.5 + 1.5 + 2.5 + 1.5 = 6.0 = 1 + 2 + 3
        let wq = quadrant(1, 3, &[1.0, 2.0, 3.0]);
        let poly = build_polygon(&wq, 0).unwrap();
        assert_eq!(polygon_area(&poly), 6.0);
    }

    #[test]
    fn area_zero_row() {
        let wq = quadrant(1, 4, &[0.0, 0.0, 0.0, 0.0]);
        let poly = build_polygon(&wq, 0).unwrap();
        assert_eq!(polygon_area(&poly), 0.0);
    }

    #[test]
    fn area_symmetric_pair() {
        let w = 0.37;
        let wq = quadrant(1, 2, &[w, w]);
        let poly = build_polygon(&wq, 0).unwrap();
        assert_abs_diff_eq!(polygon_area(&poly), 2.0 * w, epsilon = 1e-15);
    }

    #[test]
    fn ranking_orders_by_area() {
        let wq = quadrant(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ranking = rank_features(&wq);
        assert_eq!(ranking.ordered_indices(), vec![1, 0]);
        assert_eq!(ranking.entries()[0].area, 2.0);
        assert_eq!(ranking.entries()[1].area, 1.0);
    }

    #[test]
    fn ranking_ties_break_by_index() {
        let wq = quadrant(3, 2, &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let ranking = rank_features(&wq);
        assert_eq!(ranking.ordered_indices(), vec![0, 1, 2]);
    }

    #[test]
    fn ranking_csv_schema() {
        let wq = quadrant(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ranking = rank_features(&wq);
        let mut buf = Vec::new();
        ranking.write_csv(None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "feature_index,feature_name,polygon_area,rank");
        assert_eq!(lines[1], "1,f1,2,1");
        assert_eq!(lines[2], "0,f0,1,2");
    }

    #[test]
    fn total_area_bounded_by_k_sqrt_d() {
        for seed in 0..10 {
            let (d, k) = (9, 4);
            let w = init_stiefel(d, k, 100 + seed).unwrap();
            let wq = quadrant_process(&w);
            let ranking = rank_features(&wq);
            let total: f64 = ranking.entries().iter().map(|e| e.area).sum();
            assert!(total <= k as f64 * (d as f64).sqrt() + 1e-9);
        }
    }

    #[test]
    fn scaling_a_row_raises_its_rank() {
        let wq = quadrant(3, 2, &[0.4, 0.3, 0.5, 0.1, 0.2, 0.6]);
        let base = rank_features(&wq);
        let pos_before = base.ordered_indices().iter().position(|&i| i == 0).unwrap();
        let mut scaled = wq.matrix().clone();
        for j in 0..2 {
            scaled[(0, j)] *= 3.0;
        }
        let boosted = rank_features(&QuadrantWeights::new(scaled).unwrap());
        let pos_after = boosted.ordered_indices().iter().position(|&i| i == 0).unwrap();
        assert!(boosted.entries()[pos_after].area > base.entries()[pos_before].area);
        assert!(pos_after <= pos_before);
    }

    proptest! {
        #[test]
        fn area_equals_row_sum(row in proptest::collection::vec(0.0f64..10.0, 1..8)) {
            let k = row.len();
            let wq = QuadrantWeights::new(DMatrix::from_row_slice(1, k, &row)).unwrap();
            let poly = build_polygon(&wq, 0).unwrap();
            let area = polygon_area(&poly);
            let sum: f64 = row.iter().sum();
            prop_assert!((area - sum).abs() <= 1e-12 * sum.max(1.0));
        }

        #[test]
        fn permuting_rows_permutes_ranking(seed in 0u64..50) {
            let (d, k) = (6, 3);
            let w = init_stiefel(d, k, seed).unwrap();
            let wq = quadrant_process(&w);
            let base = rank_features(&wq);
            // Reverse the rows and check the ranking follows.
            let reversed = DMatrix::from_fn(d, k, |i, j| wq.matrix()[(d - 1 - i, j)]);
            let flipped = rank_features(&QuadrantWeights::new(reversed).unwrap());
            let remapped: Vec<usize> = flipped
                .ordered_indices()
                .iter()
                .map(|&i| d - 1 - i)
                .collect();
            // Areas may tie; compare the area sequences instead of indices.
            let base_areas: Vec<f64> = base.entries().iter().map(|e| e.area).collect();
            let flip_areas: Vec<f64> = flipped.entries().iter().map(|e| e.area).collect();
            prop_assert_eq!(base_areas, flip_areas);
            let mut sorted = remapped.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..d).collect::<Vec<_>>());
        }
    }
}
