//! Plane-to-plane homographies estimated with the normalised direct linear
//! transform.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

/// One marker seen on the aggregate-surface plane and in the photograph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Object-plane X in mm.
    pub x_mm: f64,
    /// Object-plane Y in mm.
    pub y_mm: f64,
    /// Image column coordinate in px.
    pub u_px: f64,
    /// Image row coordinate in px.
    pub v_px: f64,
}

impl Correspondence {
    pub fn new(x_mm: f64, y_mm: f64, u_px: f64, v_px: f64) -> Result<Self> {
        if ![x_mm, y_mm, u_px, v_px].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("correspondence"));
        }
        Ok(Self { x_mm, y_mm, u_px, v_px })
    }
}

/// Projective map from the object plane (mm) to the image plane (px).
///
/// Stored with `H[2][2] = 1` whenever that entry is not zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Builds from row-major entries. Rejects non-finite or singular matrices.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("homography"));
        }
        let norm = m.norm();
        if norm == 0.0 || m.determinant().abs() <= 1e-14 * norm.powi(3) {
            return Err(Error::Degenerate("homography is singular".into()));
        }
        let m = if m[(2, 2)].abs() > 1e-12 * norm {
            m / m[(2, 2)]
        } else {
            m / norm
        };
        Ok(Self { m })
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.m[(r, c)]))
    }

    /// Maps `(x, y)`; `None` when the point lands on the line at infinity.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.m * Vector3::new(x, y, 1.0);
        (p.z.abs() > 1e-300).then(|| (p.x / p.z, p.y / p.z))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("homography is not invertible".into()))?;
        Self::from_matrix(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::from_matrix(self.m * other.m)
    }

    /// 2-norm condition number `σ_max / σ_min`.
    pub fn condition_number(&self) -> f64 {
        let s = self.m.singular_values();
        s.max() / s.min()
    }

    /// Largest entrywise difference after scaling both to unit Frobenius
    /// norm and a common sign.
    pub fn distance_up_to_scale(&self, other: &Homography) -> f64 {
        let a = self.m / self.m.norm();
        let b = other.m / other.m.norm();
        let same = (a - b).amax();
        let flipped = (a + b).amax();
        same.min(flipped)
    }
}

/// Result of [`estimate_homography`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomographyEstimate {
    pub homography: Homography,
    /// Root-mean-square image-plane reprojection distance, px.
    pub rmse_px: f64,
    pub condition_number: f64,
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn hartley(points: &[(f64, f64)]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let (cx, cy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let mean_dist = points
        .iter()
        .map(|&(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= f64::EPSILON * (cx.abs() + cy.abs()).max(1.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn collinear(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let scale = ((b.0 - a.0).hypot(b.1 - a.1) * (c.0 - a.0).hypot(c.1 - a.1)).max(f64::MIN_POSITIVE);
    cross.abs() <= 1e-9 * scale
}

fn transform(t: &Matrix3<f64>, (x, y): (f64, f64)) -> (f64, f64) {
    let p = t * Vector3::new(x, y, 1.0);
    (p.x / p.z, p.y / p.z)
}

/// Estimates the object-to-image homography from at least four markers.
///
/// Both point sets are Hartley-normalised, the `2N × 9` DLT system is solved
/// for its smallest right singular vector and the result is denormalised.
pub fn estimate_homography(points: &[Correspondence]) -> Result<HomographyEstimate> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "a homography needs at least 4 correspondences, got {}",
            points.len()
        )));
    }
    let obj: Vec<(f64, f64)> = points.iter().map(|p| (p.x_mm, p.y_mm)).collect();
    let img: Vec<(f64, f64)> = points.iter().map(|p| (p.u_px, p.v_px)).collect();
    if points.len() == 4 {
        for (set, name) in [(&obj, "object"), (&img, "image")] {
            for skip in 0..4 {
                let tri: Vec<_> = (0..4).filter(|&i| i != skip).map(|i| set[i]).collect();
                if collinear(tri[0], tri[1], tri[2]) {
                    return Err(Error::Degenerate(format!(
                        "three of the four {name} points are collinear"
                    )));
                }
            }
        }
    }
    let t_obj = hartley(&obj)?;
    let t_img = hartley(&img)?;

    let rows = (2 * points.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (&o, &m)) in obj.iter().zip(&img).enumerate() {
        let (x, y) = transform(&t_obj, o);
        let (u, v) = transform(&t_img, m);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = svd.singular_values.max();
    if svd.singular_values[second] <= 1e-10 * largest {
        return Err(Error::Degenerate(
            "correspondences do not determine a unique homography (rank-deficient system)".into(),
        ));
    }
    let h = v_t.row(smallest);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_img_inv = t_img
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("image normalisation".into()))?;
    let homography = Homography::from_matrix(t_img_inv * h_norm * t_obj)?;

    let mut sq = 0.0;
    for p in points {
        let (u, v) = homography
            .apply(p.x_mm, p.y_mm)
            .ok_or_else(|| Error::Degenerate("a marker maps to infinity".into()))?;
        sq += (u - p.u_px).powi(2) + (v - p.v_px).powi(2);
    }
    Ok(HomographyEstimate {
        homography,
        rmse_px: (sq / points.len() as f64).sqrt(),
        condition_number: homography.condition_number(),
    })
}

/// Parses the marker file format: one `X_mm Y_mm u_px v_px` quadruple per
/// line; `#` starts a comment.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Data(format!(
                "line {}: expected 4 numbers, found {}",
                no + 1,
                fields.len()
            )));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::Data(format!("line {}: `{f}` is not a number", no + 1)))?;
        }
        out.push(
            Correspondence::new(v[0], v[1], v[2], v[3])
                .map_err(|_| Error::Data(format!("line {}: non-finite coordinate", no + 1)))?,
        );
    }
    Ok(out)
}
