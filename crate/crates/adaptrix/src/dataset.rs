//! Data model, CSV ingestion, the bundled Iris table, and the synthetic
//! three-manifold generator used throughout the experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::substream;

const IRIS_CSV: &str = include_str!("../data/iris.csv");

/// An n x D coordinate table with optional integer labels.
///
/// Every algorithm in this crate consumes one of these; construction
/// validates finiteness and shape so downstream code never has to.
#[derive(Debug, Clone)]
pub struct PointCloud {
    coords: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(coords: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let (n, d) = coords.dim();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidArgument(
                "points must have at least one feature".into(),
            ));
        }
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate at row {}, column {}",
                bad / d,
                bad % d
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: l.len(),
                });
            }
        }
        Ok(Self { coords, labels })
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> ArrayView2<'_, f64> {
        self.coords.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.coords.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct labels, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut seen = l.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        })
    }

    /// A new cloud holding the given rows (labels carried along).
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let coords = self.coords.select(Axis(0), rows);
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        PointCloud::new(coords, labels)
    }
}

/// The three synthetic shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Torus,
    Spiral,
    Sphere,
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub points_per_manifold: usize,
    pub noise_sigma: f64,
    pub n_noise_dims: usize,
    pub seed: u64,
}

pub const TORUS_MAJOR_RADIUS: f64 = 2.0;
pub const TORUS_MINOR_RADIUS: f64 = 0.7;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.05;
/// Shape centers: the three shapes sit separated on a line. Concentric
/// shapes would leave K-means nothing to separate even on a faithful
/// embedding; with gaps, neighborhood graphs split into per-shape
/// components, which embedders must handle rather than choke on (small
/// fixed neighbor orders fragment much further than the adaptive ones).
pub const TORUS_CENTER: [f64; 3] = [0.0, 0.0, 0.0];
pub const SPHERE_CENTER: [f64; 3] = [4.5, 0.0, 0.0];
pub const SPIRAL_CENTER: [f64; 3] = [-4.5, 0.0, 0.0];
/// Pure-noise coordinates carry this fraction of the signal noise. With
/// equal deviations the 17-dimensional ambient noise (norm ~ 4 sigma)
/// swamps the in-manifold noise at every neighborhood scale and the data
/// stops being three-dimensional anywhere; a fifth keeps the de-noised
/// structure at its designed dimension.
pub const AMBIENT_NOISE_RATIO: f64 = 0.2;

/// Sample `count` noiseless points on one shape, returning a count x 3 table.
///
/// Torus: angles u, v uniform on [0, 2pi), R = 2, r = 0.7, around
/// [`TORUS_CENTER`]. Spiral: t uniform on [0, 4pi),
/// (t cos t, t sin t, t/2) / 4pi around [`SPIRAL_CENTER`]. Sphere: uniform
/// on the unit sphere around [`SPHERE_CENTER`].
pub fn sample_manifold<R: Rng>(kind: ManifoldKind, count: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((count, 3));
    let two_pi = std::f64::consts::TAU;
    for mut row in out.rows_mut() {
        match kind {
            ManifoldKind::Torus => {
                let u: f64 = rng.random::<f64>() * two_pi;
                let v: f64 = rng.random::<f64>() * two_pi;
                let ring = TORUS_MAJOR_RADIUS + TORUS_MINOR_RADIUS * v.cos();
                row[0] = TORUS_CENTER[0] + ring * u.cos();
                row[1] = TORUS_CENTER[1] + ring * u.sin();
                row[2] = TORUS_CENTER[2] + TORUS_MINOR_RADIUS * v.sin();
            }
            ManifoldKind::Spiral => {
                let t: f64 = rng.random::<f64>() * 2.0 * two_pi;
                let scale = 2.0 * two_pi;
                row[0] = SPIRAL_CENTER[0] + t * t.cos() / scale;
                row[1] = SPIRAL_CENTER[1] + t * t.sin() / scale;
                row[2] = SPIRAL_CENTER[2] + 0.5 * t / scale;
            }
            ManifoldKind::Sphere => {
                // Normalized Gaussian triple.
                loop {
                    let x: f64 = StandardNormal.sample(rng);
                    let y: f64 = StandardNormal.sample(rng);
                    let z: f64 = StandardNormal.sample(rng);
                    let norm = (x * x + y * y + z * z).sqrt();
                    if norm > 1e-12 {
                        row[0] = SPHERE_CENTER[0] + x / norm;
                        row[1] = SPHERE_CENTER[1] + y / norm;
                        row[2] = SPHERE_CENTER[2] + z / norm;
                        break;
                    }
                }
            }
        }
    }
    out
}

/// Generate the mixed torus/spiral/sphere dataset.
///
/// Output has 3 * `points_per_manifold` rows and 3 + `n_noise_dims` columns:
/// the three signal coordinates carry additive N(0, sigma^2) noise and the
/// remaining columns are pure noise at [`AMBIENT_NOISE_RATIO`] of sigma.
/// Labels 0/1/2 mark the source shape; rows are shuffled deterministically
/// by `seed`.
pub fn generate_manifolds(
    points_per_manifold: usize,
    noise_sigma: f64,
    n_noise_dims: usize,
    seed: u64,
) -> Result<PointCloud> {
    if points_per_manifold == 0 {
        return Err(Error::InvalidArgument(
            "points_per_manifold must be at least 1".into(),
        ));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(
            "noise_sigma must be a non-negative real".into(),
        ));
    }

    let n = 3 * points_per_manifold;
    let d = 3 + n_noise_dims;
    let mut rng = substream(seed, "dataset");
    let mut coords = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);

    let kinds = [
        ManifoldKind::Torus,
        ManifoldKind::Spiral,
        ManifoldKind::Sphere,
    ];
    for (label, &kind) in kinds.iter().enumerate() {
        let signal = sample_manifold(kind, points_per_manifold, &mut rng);
        for p in 0..points_per_manifold {
            let row_idx = label * points_per_manifold + p;
            let mut row = coords.row_mut(row_idx);
            for c in 0..3 {
                let noise: f64 = StandardNormal.sample(&mut rng);
                row[c] = signal[(p, c)] + noise_sigma * noise;
            }
            for c in 3..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                row[c] = AMBIENT_NOISE_RATIO * noise_sigma * noise;
            }
            labels.push(label);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let coords = coords.select(Axis(0), &order);
    let labels = order.iter().map(|&i| labels[i]).collect();

    PointCloud::new(coords, Some(labels))
}

/// The classic 150 x 4 Iris table with species labels 0/1/2.
pub fn bundled_iris() -> PointCloud {
    parse_csv(IRIS_CSV, true, ',', false).expect("bundled iris.csv is well-formed")
}

/// Load a delimited numeric table. When `has_labels` the final column is read
/// as integer class labels and excluded from the coordinates.
pub fn load_csv(path: &Path, has_labels: bool, delimiter: char) -> Result<PointCloud> {
    load_csv_with_options(path, has_labels, delimiter, false)
}

/// As [`load_csv`] with an optional single header line to skip.
pub fn load_csv_with_options(
    path: &Path,
    has_labels: bool,
    delimiter: char,
    skip_header: bool,
) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, has_labels, delimiter, skip_header)
}

fn parse_csv(
    text: &str,
    has_labels: bool,
    delimiter: char,
    skip_header: bool,
) -> Result<PointCloud> {
    let mut width = None;
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n = 0usize;
    let mut data_row = 0usize;

    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if skip_header && line_no == 0 {
            continue;
        }
        let cells: Vec<&str> = line.split(delimiter).collect();
        match width {
            None => {
                if has_labels && cells.len() < 2 {
                    return Err(Error::CsvFormat {
                        line: line_no + 1,
                        message: "need at least one feature column besides the label".into(),
                    });
                }
                width = Some(cells.len());
            }
            Some(w) if w != cells.len() => {
                return Err(Error::CsvFormat {
                    line: line_no + 1,
                    message: format!("expected {w} columns, found {}", cells.len()),
                });
            }
            _ => {}
        }
        let n_features = if has_labels {
            cells.len() - 1
        } else {
            cells.len()
        };
        for (col, cell) in cells.iter().enumerate().take(n_features) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                row: data_row + 1,
                column: col + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    row: data_row + 1,
                    column: col + 1,
                    message: "non-finite value".into(),
                });
            }
            values.push(v);
        }
        if has_labels {
            let cell = cells[n_features].trim();
            let label: usize = cell.parse().map_err(|_| Error::CsvParse {
                row: data_row + 1,
                column: n_features + 1,
                message: format!("{cell:?} is not a non-negative integer label"),
            })?;
            labels.push(label);
        }
        n += 1;
        data_row += 1;
    }

    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 data rows, got {n}"
        )));
    }
    let d = values.len() / n;
    let coords = Array2::from_shape_vec((n, d), values)
        .expect("row-major cell buffer matches the parsed shape");
    PointCloud::new(coords, if has_labels { Some(labels) } else { None })
}

/// Write a matrix as CSV with full round-trip precision (the shortest decimal
/// form that parses back to the same f64).
pub fn save_matrix(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    save_rows(path, m, None)
}

/// Write coordinates with the labels, when present, as the final column.
pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    save_rows(path, cloud.coords(), cloud.labels())
}

fn save_rows(path: &Path, m: ArrayView2<'_, f64>, labels: Option<&[usize]>) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "refusing to write an empty (0-row) matrix".into(),
        ));
    }
    if let Some(bad) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite value at flat index {bad}"
        )));
    }
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 12);
    for (i, row) in m.rows().into_iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            // `{}` on f64 is the shortest representation that round-trips.
            write!(out, "{v}").expect("string write");
        }
        if let Some(l) = labels {
            write!(out, ",{}", l[i]).expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("adaptrix-dataset-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn parse_plain_rows() {
        let cloud = parse_csv("0,0\n1,0\n0,1", false, ',', false).unwrap();
        assert_eq!(cloud.n(), 3);
        assert_eq!(cloud.dim(), 2);
        assert!(cloud.labels().is_none());
    }

    #[test]
    fn bundled_iris_shape() {
        let iris = bundled_iris();
        assert_eq!(iris.n(), 150);
        assert_eq!(iris.dim(), 4);
        assert_eq!(iris.n_classes(), Some(3));
        // Spot-check the first row of the canonical table.
        assert_eq!(iris.row(0).to_vec(), vec![5.1, 3.5, 1.4, 0.2]);
    }

    #[test]
    fn parse_error_carries_position() {
        let err = parse_csv("1,2,3\n1,x,3", false, ',', false).unwrap_err();
        match err {
            Error::CsvParse { row, column, .. } => {
                assert_eq!((row, column), (2, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_csv("1,x,3\n4,5,6", false, ',', false).unwrap_err();
        match err {
            Error::CsvParse { row, column, .. } => assert_eq!((row, column), (1, 2)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_csv("1,2\n3,4,5", false, ',', false).unwrap_err();
        match err {
            Error::CsvFormat { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_row_is_insufficient() {
        let err = parse_csv("1,2", false, ',', false).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn manifolds_shapes_and_labels() {
        let cloud = generate_manifolds(50, 0.05, 17, 3).unwrap();
        assert_eq!(cloud.n(), 150);
        assert_eq!(cloud.dim(), 20);
        let labels = cloud.labels().unwrap();
        for class in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == class).count(), 50);
        }
    }

    #[test]
    fn manifolds_deterministic() {
        let a = generate_manifolds(30, 0.05, 5, 99).unwrap();
        let b = generate_manifolds(30, 0.05, 5, 99).unwrap();
        assert_eq!(a.coords(), b.coords());
        assert_eq!(a.labels(), b.labels());
        let c = generate_manifolds(30, 0.05, 5, 100).unwrap();
        assert_ne!(a.coords(), c.coords());
    }

    #[test]
    fn noiseless_shapes_satisfy_implicit_equations() {
        let cloud = generate_manifolds(40, 0.0, 0, 11).unwrap();
        let labels = cloud.labels().unwrap();
        for (i, &label) in labels.iter().enumerate() {
            let r = cloud.row(i);
            match label {
                0 => {
                    // Torus: (sqrt(x^2+y^2) - R)^2 + z^2 = r^2 about its
                    // center.
                    let (x, y, z) = (
                        r[0] - TORUS_CENTER[0],
                        r[1] - TORUS_CENTER[1],
                        r[2] - TORUS_CENTER[2],
                    );
                    let ring = (x * x + y * y).sqrt() - TORUS_MAJOR_RADIUS;
                    let resid =
                        ring * ring + z * z - TORUS_MINOR_RADIUS * TORUS_MINOR_RADIUS;
                    assert!(resid.abs() < 1e-9, "torus residual {resid}");
                }
                2 => {
                    let norm = ((r[0] - SPHERE_CENTER[0]).powi(2)
                        + (r[1] - SPHERE_CENTER[1]).powi(2)
                        + (r[2] - SPHERE_CENTER[2]).powi(2))
                    .sqrt();
                    assert!((norm - 1.0).abs() < 1e-9, "sphere norm {norm}");
                }
                _ => {}
            }
        }
    }

    #[test]
    fn single_sphere_point_has_unit_norm() {
        let mut rng = substream(5, "dataset");
        let p = sample_manifold(ManifoldKind::Sphere, 1, &mut rng);
        let norm = p
            .row(0)
            .iter()
            .zip(SPHERE_CENTER)
            .map(|(v, c)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let m = array![
            [1.0, 0.1 + 0.2, -3.5e-17],
            [std::f64::consts::PI, 2.0f64.sqrt(), 1e300],
        ];
        let path = tmpfile("roundtrip.csv");
        save_matrix(&path, m.view()).unwrap();
        let cloud = load_csv(&path, false, ',').unwrap();
        assert_eq!(cloud.coords(), m.view());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn save_rejects_empty() {
        let m = Array2::<f64>::zeros((0, 3));
        let err = save_matrix(&tmpfile("empty.csv"), m.view()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn save_line_count_matches_rows() {
        let cloud = generate_manifolds(20, 0.05, 0, 1).unwrap();
        let path = tmpfile("lines.csv");
        save_matrix(&path, cloud.coords()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 60);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn labels_saved_as_final_column() {
        let cloud = generate_manifolds(5, 0.0, 1, 2).unwrap();
        let path = tmpfile("labeled.csv");
        save_cloud(&path, &cloud).unwrap();
        let back = load_csv(&path, true, ',').unwrap();
        assert_eq!(back.labels(), cloud.labels());
        assert_eq!(back.dim(), cloud.dim());
        std::fs::remove_file(&path).ok();
    }
}
