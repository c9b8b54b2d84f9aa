//! Direction-weight selection by descent-curve area.
//!
//! Every admissible (α, β, γ) on a lattice over the constrained simplex gets
//! one optimization run from a shared initial point; each run is scored by
//! the area under its objective-vs-iteration curve and the smallest area —
//! the fastest, steepest descent — wins. Curves are normalized by their
//! starting value by default so areas are comparable across datasets; raw
//! integration is available behind [`CurveScoring::Raw`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{CenteredProblem, StiefelPoint};
use crate::optimizer::{minimize, DescentTrace, SearchConfig, SimplexWeights};

/// Lattice of admissible direction weights.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    points: Vec<SimplexWeights>,
    step: f64,
}

impl SimplexGrid {
    pub fn points(&self) -> &[SimplexWeights] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the lattice: α and β range over {0.01, step, 2·step, ...} and
/// γ = 1 − α − β, keeping points with γ ≥ 0.01.
pub fn build_grid(step: f64) -> Result<SimplexGrid> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::Config(format!(
            "grid step must lie in (0, 0.5], got {step}"
        )));
    }
    let mut values = vec![SimplexWeights::MIN_COMPONENT];
    let mut i = 1usize;
    loop {
        let v = i as f64 * step;
        if v > 1.0 - 2.0 * SimplexWeights::MIN_COMPONENT {
            break;
        }
        if (v - SimplexWeights::MIN_COMPONENT).abs() > 1e-12 {
            values.push(v);
        }
        i += 1;
    }
    let mut points = Vec::new();
    for &alpha in &values {
        for &beta in &values {
            let gamma = 1.0 - alpha - beta;
            if gamma >= SimplexWeights::MIN_COMPONENT - 1e-12 {
                points.push(SimplexWeights::new(alpha, beta, gamma).expect("lattice point"));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Config(format!(
            "grid step {step} produced no admissible points"
        )));
    }
    Ok(SimplexGrid { points, step })
}

/// How descent curves are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveScoring {
    /// Integrate f_i / f_0 (scale-free, the default).
    #[default]
    Normalized,
    /// Integrate raw objective values.
    Raw,
}

/// Area under the objective-vs-iteration curve normalized by its starting
/// value: trapezoid sum of f_i/f_0 with unit spacing. A single-point trace
/// integrates to zero.
pub fn curve_area(trace: &DescentTrace) -> Result<f64> {
    let f0 = trace.f_values[0];
    if f0 <= 0.0 {
        return Err(Error::Numerical(format!(
            "descent curve starts at f_0 = {f0}; cannot normalize a degenerate curve"
        )));
    }
    Ok(trapezoid(&trace.f_values) / f0)
}

/// Area under the raw objective-vs-iteration curve.
pub fn curve_area_raw(trace: &DescentTrace) -> f64 {
    trapezoid(&trace.f_values)
}

fn trapezoid(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .sum()
}

/// One grid point's outcome.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub weights: SimplexWeights,
    pub area: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// The full sweep report plus the winning weight matrix.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub per_point: Vec<SweepPoint>,
    /// Index into `per_point` of the winner.
    pub best: usize,
    pub best_w: StiefelPoint,
    pub best_trace: DescentTrace,
}

impl SweepResult {
    pub fn best_point(&self) -> &SweepPoint {
        &self.per_point[self.best]
    }

    /// Writes the report as CSV: `alpha,beta,gamma,area,iterations,converged`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "alpha,beta,gamma,area,iterations,converged")?;
        for p in &self.per_point {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.weights.alpha(),
                p.weights.beta(),
                p.weights.gamma(),
                p.area,
                p.iterations,
                p.converged
            )?;
        }
        Ok(())
    }
}

/// Runs one minimization per grid point — all from the same seeded initial
/// point, so area differences reflect only the direction weights — and picks
/// the smallest curve area among converged runs (all runs when none
/// converged). Ties break toward fewer iterations, then lexicographic
/// (α, β, γ). Grid points are evaluated in parallel; the result is
/// independent of scheduling.
pub fn sweep(
    p: &CenteredProblem,
    grid: &SimplexGrid,
    cfg: &SearchConfig,
    scoring: CurveScoring,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty simplex grid".into()));
    }
    let runs: Vec<Result<(StiefelPoint, DescentTrace)>> = grid
        .points()
        .par_iter()
        .map(|weights| minimize(p, weights, cfg))
        .collect();

    let mut per_point = Vec::with_capacity(grid.len());
    let mut outcomes = Vec::with_capacity(grid.len());
    for (weights, run) in grid.points().iter().zip(runs) {
        let (w, trace) = run?;
        let area = match scoring {
            CurveScoring::Normalized => curve_area(&trace)?,
            CurveScoring::Raw => curve_area_raw(&trace),
        };
        per_point.push(SweepPoint {
            weights: *weights,
            area,
            converged: trace.converged,
            iterations: trace.iterations,
        });
        outcomes.push((w, trace));
    }

    let eligible: Vec<usize> = {
        let finite: Vec<usize> = (0..per_point.len())
            .filter(|&i| per_point[i].area.is_finite())
            .collect();
        if finite.is_empty() {
            let detail: Vec<String> = per_point
                .iter()
                .map(|p| {
                    format!(
                        "({}, {}, {}) -> area {}",
                        p.weights.alpha(),
                        p.weights.beta(),
                        p.weights.gamma(),
                        p.area
                    )
                })
                .collect();
            return Err(Error::Numerical(format!(
                "every sweep run diverged: {}",
                detail.join("; ")
            )));
        }
        let converged: Vec<usize> = finite
            .iter()
            .copied()
            .filter(|&i| per_point[i].converged)
            .collect();
        if converged.is_empty() {
            finite
        } else {
            converged
        }
    };

    let best = eligible
        .into_iter()
        .min_by(|&a, &b| {
            let pa = &per_point[a];
            let pb = &per_point[b];
            pa.area
                .total_cmp(&pb.area)
                .then(pa.iterations.cmp(&pb.iterations))
                .then(pa.weights.alpha().total_cmp(&pb.weights.alpha()))
                .then(pa.weights.beta().total_cmp(&pb.weights.beta()))
                .then(pa.weights.gamma().total_cmp(&pb.weights.gamma()))
        })
        .expect("nonempty eligible set");

    let (best_w, best_trace) = outcomes.swap_remove(best);
    Ok(SweepResult {
        per_point,
        best,
        best_w,
        best_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::build_problem_raw;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn trace_from(values: &[f64]) -> DescentTrace {
        DescentTrace {
            f_values: values.to_vec(),
            accepted_steps: vec![0.1; values.len().saturating_sub(1)],
            grad_norms: vec![1.0; values.len()],
            envelope: values.to_vec(),
            converged: true,
            iterations: values.len().saturating_sub(1),
            max_ortho_error: 0.0,
            floored_steps: vec![],
            direction_fallbacks: vec![],
        }
    }

    fn random_problem(d: usize, n: usize, k: usize, seed: u64) -> CenteredProblem {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        build_problem_raw(&x, &y).unwrap()
    }

    #[test]
    fn grid_step_half() {
        let grid = build_grid(0.5).unwrap();
        let has = |a: f64, b: f64, g: f64| {
            grid.points().iter().any(|p| {
                (p.alpha() - a).abs() < 1e-12
                    && (p.beta() - b).abs() < 1e-12
                    && (p.gamma() - g).abs() < 1e-12
            })
        };
        // gamma = 0 < 0.01 is excluded.
        assert!(!has(0.5, 0.5, 0.0));
        assert!(has(0.01, 0.01, 0.98));
        assert!(has(0.01, 0.5, 0.49));
        assert!(has(0.5, 0.01, 0.49));
    }

    #[test]
    fn grid_points_satisfy_constraints() {
        for &step in &[0.05, 0.1, 0.25, 0.5] {
            let grid = build_grid(step).unwrap();
            for p in grid.points() {
                let sum = p.alpha() + p.beta() + p.gamma();
                assert!((sum - 1.0).abs() <= 1e-12);
                assert!(p.alpha() >= 0.01 - 1e-12);
                assert!(p.beta() >= 0.01 - 1e-12);
                assert!(p.gamma() >= 0.01 - 1e-12);
            }
        }
    }

    #[test]
    fn grid_default_step_size_pinned() {
        // Independent enumeration: alpha, beta in {0.01} U {0.05 i}, i = 1..19,
        // keep 1 - alpha - beta >= 0.01. Counted by the loop below and frozen.
        let mut expected = 0usize;
        let mut vals = vec![0.01];
        for i in 1..=19 {
            vals.push(0.05 * i as f64);
        }
        for &a in &vals {
            for &b in &vals {
                if 1.0 - a - b >= 0.01 - 1e-12 {
                    expected += 1;
                }
            }
        }
        let grid = build_grid(0.05).unwrap();
        assert_eq!(grid.len(), expected);
        assert_eq!(grid.len(), 210);
    }

    #[test]
    fn grid_has_no_duplicates() {
        let grid = build_grid(0.01).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for p in grid.points() {
            let key = (
                (p.alpha() * 1e9).round() as i64,
                (p.beta() * 1e9).round() as i64,
            );
            assert!(seen.insert(key), "duplicate point {:?}", p);
        }
    }

    #[test]
    fn grid_rejects_bad_step() {
        assert!(build_grid(0.0).is_err());
        assert!(build_grid(0.6).is_err());
    }

    #[test]
    fn curve_area_hand_case() {
        let trace = trace_from(&[4.0, 2.0, 1.0]);
        assert_abs_diff_eq!(curve_area(&trace).unwrap(), 1.125, epsilon = 1e-15);
    }

    #[test]
    fn curve_area_flat_pair() {
        let trace = trace_from(&[3.5, 3.5]);
        assert_abs_diff_eq!(curve_area(&trace).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn curve_area_single_point() {
        let trace = trace_from(&[2.0]);
        assert_eq!(curve_area(&trace).unwrap(), 0.0);
    }

    #[test]
    fn curve_area_rejects_nonpositive_start() {
        let trace = trace_from(&[0.0, 1.0]);
        assert!(curve_area(&trace).is_err());
    }

    #[test]
    fn curve_area_scale_invariant() {
        let base = trace_from(&[8.0, 3.0, 1.0, 0.5]);
        let scaled = trace_from(&[8.0e3, 3.0e3, 1.0e3, 0.5e3]);
        assert_abs_diff_eq!(
            curve_area(&base).unwrap(),
            curve_area(&scaled).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn sweep_singleton_grid() {
        let p = random_problem(8, 40, 2, 3);
        let grid = SimplexGrid {
            points: vec![SimplexWeights::uniform()],
            step: 0.0,
        };
        let mut cfg = SearchConfig::for_shape(8, 2);
        cfg.seed = 9;
        let result = sweep(&p, &grid, &cfg, CurveScoring::Normalized).unwrap();
        assert_eq!(result.best, 0);
        assert_eq!(result.per_point.len(), 1);
        assert!(result.best_w.orthonormality_error() <= 1e-8);
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = random_problem(10, 50, 3, 5);
        let grid = build_grid(0.25).unwrap();
        let mut cfg = SearchConfig::for_shape(10, 3);
        cfg.seed = 17;
        let r1 = sweep(&p, &grid, &cfg, CurveScoring::Normalized).unwrap();
        let r2 = sweep(&p, &grid, &cfg, CurveScoring::Normalized).unwrap();
        assert_eq!(r1.best, r2.best);
        assert_eq!(r1.best_w.matrix(), r2.best_w.matrix());
        let areas1: Vec<f64> = r1.per_point.iter().map(|p| p.area).collect();
        let areas2: Vec<f64> = r2.per_point.iter().map(|p| p.area).collect();
        assert_eq!(areas1, areas2);
    }

    #[test]
    fn sweep_prefers_lower_area() {
        let p = random_problem(12, 60, 3, 7);
        let grid = build_grid(0.25).unwrap();
        let mut cfg = SearchConfig::for_shape(12, 3);
        cfg.seed = 21;
        let result = sweep(&p, &grid, &cfg, CurveScoring::Normalized).unwrap();
        let best_area = result.best_point().area;
        for (i, point) in result.per_point.iter().enumerate() {
            if point.converged {
                assert!(
                    best_area <= point.area + 1e-15,
                    "point {i} has smaller area than the winner"
                );
            }
        }
    }

    #[test]
    fn sweep_report_csv_schema() {
        let p = random_problem(6, 30, 2, 2);
        let grid = build_grid(0.5).unwrap();
        let mut cfg = SearchConfig::for_shape(6, 2);
        cfg.seed = 1;
        let result = sweep(&p, &grid, &cfg, CurveScoring::Normalized).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha,beta,gamma,area,iterations,converged");
        assert_eq!(lines.len(), grid.len() + 1);
    }
}
