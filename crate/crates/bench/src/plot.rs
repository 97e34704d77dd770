//! SVG scatter plots. Datasets with more than two dimensions are projected
//! onto their top two principal components first. All geometry is printed
//! with fixed precision so identical inputs produce byte-identical files.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use cadclust::dataset::Dataset;
use cadclust::dkernel::Partition;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 24.0;
const RADIUS: f64 = 2.5;

/// Cluster colors; labels beyond the palette wrap around.
const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

/// Power iteration with deflation: the top two eigenvectors of the covariance
/// matrix, each with a fixed sign (first component of largest magnitude made
/// positive) so the projection is unique.
fn top_two_components(centered: &ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let d = centered.ncols();
    let n = centered.nrows() as f64;
    let mut cov = centered.t().dot(centered) / n.max(1.0);
    let mut components = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
        let mut eigval = 0.0;
        for _ in 0..200 {
            let w = cov.dot(&v);
            let norm = w.dot(&w).sqrt();
            if norm < 1e-300 {
                break;
            }
            let next = &w / norm;
            let delta = (&next - &v).mapv(f64::abs).sum();
            v = next;
            eigval = norm;
            if delta < 1e-12 {
                break;
            }
        }
        // Deterministic sign: make the largest-magnitude entry positive.
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        // Deflate: cov -= eigval * v v^T.
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] -= eigval * v[i] * v[j];
            }
        }
        components.push(v);
    }
    let second = components.pop().unwrap();
    let first = components.pop().unwrap();
    (first, second)
}

/// Reduce to two plotting coordinates: pass 2-D data through, pad 1-D with
/// zeros, project higher dimensions with PCA.
fn to_2d(points: &ArrayView2<f64>) -> Array2<f64> {
    let n = points.nrows();
    match points.ncols() {
        0 => Array2::zeros((n, 2)),
        1 => {
            let mut out = Array2::zeros((n, 2));
            out.column_mut(0).assign(&points.column(0));
            out
        }
        2 => points.to_owned(),
        d => {
            let mean = points.sum_axis(ndarray::Axis(0)) / n as f64;
            let mut centered = points.to_owned();
            for mut row in centered.rows_mut() {
                for j in 0..d {
                    row[j] -= mean[j];
                }
            }
            let (c1, c2) = top_two_components(&centered.view());
            let mut out = Array2::zeros((n, 2));
            out.column_mut(0).assign(&centered.dot(&c1));
            out.column_mut(1).assign(&centered.dot(&c2));
            out
        }
    }
}

/// Render one scatter plot: exactly one circle per point, colored by cluster.
pub fn render_scatter(data: &Dataset, partition: &Partition) -> String {
    let coords = to_2d(&data.points.view());
    let n = coords.nrows();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        xmin = xmin.min(coords[[i, 0]]);
        xmax = xmax.max(coords[[i, 0]]);
        ymin = ymin.min(coords[[i, 1]]);
        ymax = ymax.max(coords[[i, 1]]);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let xspan = span(xmin, xmax);
    let yspan = span(ymin, ymax);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!("  <!-- {} points, {} clusters -->\n", n, partition.k));
    for i in 0..n {
        let x = MARGIN + (coords[[i, 0]] - xmin) / xspan * (WIDTH - 2.0 * MARGIN);
        // SVG y grows downward; flip so larger data y is higher on screen.
        let y = HEIGHT - MARGIN - (coords[[i, 1]] - ymin) / yspan * (HEIGHT - 2.0 * MARGIN);
        let color = PALETTE[partition.labels[i] % PALETTE.len()];
        svg.push_str(&format!(
            "  <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{RADIUS}\" fill=\"{color}\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn save_scatter(data: &Dataset, partition: &Partition, out_path: &Path) -> std::io::Result<()> {
    std::fs::write(out_path, render_scatter(data, partition))
}
