//! Permanent kernel between equal-size point sets: the (Bethe) permanent of
//! the RBF subkernel matrix between their points. Includes Gram-matrix
//! construction and a positive-semidefiniteness diagnosis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{estimate_permanent, BpConfig};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Shape("a point set needs at least one point".into()));
        };
        let d = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::Dimension(format!(
                "points of dimension {d} and {} in one set",
                p.len()
            )));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Domain("point coordinates must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Reorders the points: point `i` of the result is point `order[i]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// `{"sets": [[[x, ...], ...], ...]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSetCollection {
    pub sets: Vec<PointSet>,
}

impl PointSetCollection {
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            sets: Vec<Vec<Vec<f64>>>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let sets = raw
            .sets
            .into_iter()
            .map(PointSet::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sets })
    }
}

/// Affinely maps every coordinate into `[0, 1]` using the per-dimension range
/// over all points of all sets. Constant dimensions map to 0.
pub fn normalize_to_unit_box(sets: &[PointSet]) -> Result<Vec<PointSet>> {
    let Some(d) = sets.first().map(PointSet::dim) else {
        return Ok(Vec::new());
    };
    if sets.iter().any(|s| s.dim() != d) {
        return Err(Error::Dimension("point sets differ in dimension".into()));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in sets.iter().flat_map(|s| &s.points) {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(sets
        .iter()
        .map(|s| PointSet {
            points: s
                .points
                .iter()
                .map(|p| {
                    (0..d)
                        .map(|k| {
                            let span = hi[k] - lo[k];
                            if span > 0.0 {
                                (p[k] - lo[k]) / span
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
        })
        .collect())
}

fn check_compatible(a: &PointSet, b: &PointSet) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "point sets of sizes {} and {} give a non-square subkernel",
            a.len(),
            b.len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "point dimensions {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `K_ij = exp(-|a_i - b_j|^2 / (2 sigma^2))`.
pub fn rbf_subkernel_matrix(a: &PointSet, b: &PointSet, sigma: f64) -> Result<SquareMatrix> {
    check_compatible(a, b)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let scale = 1.0 / (2.0 * sigma * sigma);
    Ok(SquareMatrix::from_fn(a.len(), |i, j| {
        let d2: f64 = a.points[i]
            .iter()
            .zip(&b.points[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        (-d2 * scale).exp()
    }))
}

/// Log of the Bethe-permanent estimate of the RBF subkernel matrix.
pub fn permanent_kernel(a: &PointSet, b: &PointSet, sigma: f64, config: &BpConfig) -> Result<f64> {
    let k = rbf_subkernel_matrix(a, b, sigma)?;
    Ok(estimate_permanent(&k, config)?.log_estimate)
}

#[derive(Debug, Clone, Serialize)]
pub struct GramReport {
    /// Symmetrized Gram matrix, divided by `exp(log_scale)`.
    pub gram: Vec<Vec<f64>>,
    /// Largest log kernel value; the common factor taken out of `gram`.
    pub log_scale: f64,
    pub min_eigenvalue: f64,
    pub psd: bool,
    /// Tolerance below zero still accepted as PSD: `1e-8 * trace / m`.
    pub jitter_used: f64,
    /// Largest `|ln k(a, b) - ln k(b, a)|` before symmetrization.
    pub max_log_asymmetry: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn gram_psd_check(sets: &[PointSet], sigma: f64, config: &BpConfig) -> Result<GramReport> {
    let m = sets.len();
    if m == 0 {
        return Err(Error::Shape("need at least one point set".into()));
    }
    for s in &sets[1..] {
        check_compatible(&sets[0], s)?;
    }
    let log_k: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map(|idx| permanent_kernel(&sets[idx / m], &sets[idx % m], sigma, config))
        .collect::<Result<_>>()?;

    let log_scale = log_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut max_log_asymmetry: f64 = 0.0;
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            max_log_asymmetry = max_log_asymmetry.max((log_k[a * m + b] - log_k[b * m + a]).abs());
            gram[a * m + b] =
                0.5 * ((log_k[a * m + b] - log_scale).exp() + (log_k[b * m + a] - log_scale).exp());
        }
    }
    let trace: f64 = (0..m).map(|a| gram[a * m + a]).sum();
    let eigenvalues = symmetric_eigenvalues(&gram, m);
    let min_eigenvalue = eigenvalues[0];
    let jitter_used = 1e-8 * trace / m as f64;
    Ok(GramReport {
        gram: gram.chunks(m).map(<[f64]>::to_vec).collect(),
        log_scale,
        min_eigenvalue,
        psd: min_eigenvalue >= -jitter_used,
        jitter_used,
        max_log_asymmetry,
        eigenvalues,
    })
}

/// Eigenvalues of a symmetric row-major `m x m` matrix, ascending.
pub fn symmetric_eigenvalues(a: &[f64], m: usize) -> Vec<f64> {
    let mut eig: Vec<f64> = DMatrix::from_row_slice(m, m, a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ryser_permanent;
    use crate::matrix::RngSpec;
    use rand::Rng;

    fn random_set(n: usize, d: usize, rng: &mut impl Rng) -> PointSet {
        PointSet::new(
            (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Roots of the characteristic polynomial of a symmetric 3x3 matrix
    /// (trigonometric form), ascending.
    fn cubic_eigenvalues(a: &[f64]) -> Vec<f64> {
        let (a11, a12, a13, a22, a23, a33) = (a[0], a[1], a[2], a[4], a[5], a[8]);
        let p1 = a12 * a12 + a13 * a13 + a23 * a23;
        let q = (a11 + a22 + a33) / 3.0;
        let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = |x: f64| x / p;
        let (b11, b12, b13, b22, b23, b33) =
            (b(a11 - q), b(a12), b(a13), b(a22 - q), b(a23), b(a33 - q));
        let det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let mut e = vec![e1, 3.0 * q - e1 - e3, e3];
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn eigenvalues_match_characteristic_roots() {
        let mut rng = RngSpec::new(31).rng().unwrap();
        for _ in 0..200 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a = [v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]];
            let eig = symmetric_eigenvalues(&a, 3);
            let cub = cubic_eigenvalues(&a);
            for (x, y) in eig.iter().zip(&cub) {
                assert!((x - y).abs() < 1e-10, "{eig:?} vs {cub:?}");
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, c) = (3.0, 2.0, 1.0);
        let eig = symmetric_eigenvalues(&[a, b, b, c], 2);
        let expected = (a + c) / 2.0 - (((a - c) / 2.0f64).powi(2) + b * b).sqrt();
        assert!((eig[0] - expected).abs() < 1e-14);
        // b^2 > ac here, so indefinite
        assert!(eig[0] < 0.0);
    }

    #[test]
    fn rbf_entries() {
        let a = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let k = rbf_subkernel_matrix(&a, &a, 0.7).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(1, 1), 1.0);

        let sigma = 0.4;
        let p = PointSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let q = PointSet::new(vec![vec![sigma, sigma]]).unwrap();
        let k = rbf_subkernel_matrix(&p, &q, sigma).unwrap();
        assert!((k.get(0, 0) - (-1f64).exp()).abs() < 1e-15);

        let far = PointSet::new(vec![vec![0.0], vec![30.0]]).unwrap();
        let near = PointSet::new(vec![vec![0.1], vec![0.2]]).unwrap();
        let k = rbf_subkernel_matrix(&far, &near, 1.0).unwrap();
        assert!(k.min_entry() >= 0.0);
    }

    #[test]
    fn shape_and_dimension_errors() {
        let a = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let b = PointSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let c = PointSet::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            rbf_subkernel_matrix(&a, &b, 1.0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            rbf_subkernel_matrix(&a, &c, 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            rbf_subkernel_matrix(&a, &a, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(PointSet::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(PointSet::new(vec![]).is_err());
    }

    #[test]
    fn singleton_sets_give_the_rbf_value() {
        let p = PointSet::new(vec![vec![0.2, 0.9, 0.1]]).unwrap();
        let q = PointSet::new(vec![vec![0.6, 0.3, 0.4]]).unwrap();
        let sigma = 0.5;
        let k = permanent_kernel(&p, &q, sigma, &BpConfig::default()).unwrap();
        let rbf = rbf_subkernel_matrix(&p, &q, sigma).unwrap().get(0, 0);
        assert!((k - rbf.ln()).abs() <= 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_permutation_invariant() {
        let mut rng = RngSpec::new(8).rng().unwrap();
        let cfg = BpConfig::default();
        for _ in 0..5 {
            let a = random_set(6, 3, &mut rng);
            let b = random_set(6, 3, &mut rng);
            let ab = permanent_kernel(&a, &b, 0.5, &cfg).unwrap();
            let ba = permanent_kernel(&b, &a, 0.5, &cfg).unwrap();
            assert!((ab - ba).abs() <= 1e-8);
            let shuffled = a.reordered(&[3, 0, 5, 1, 4, 2]);
            let sb = permanent_kernel(&shuffled, &b, 0.5, &cfg).unwrap();
            assert!((ab - sb).abs() <= 1e-8);
        }
    }

    #[test]
    fn kernel_tracks_the_exact_permanent() {
        let mut rng = RngSpec::new(81).rng().unwrap();
        for _ in 0..5 {
            let a = random_set(5, 2, &mut rng);
            let b = random_set(5, 2, &mut rng);
            let k = permanent_kernel(&a, &b, 0.5, &BpConfig::default()).unwrap();
            let exact = ryser_permanent(&rbf_subkernel_matrix(&a, &b, 0.5).unwrap())
                .unwrap()
                .ln();
            // signed log error; the Bethe value sits a bounded distance below
            assert!((k - exact).abs() < 2.0, "{k} vs {exact}");
        }
    }

    #[test]
    fn gram_report_basics() {
        let mut rng = RngSpec::new(2).rng().unwrap();
        let one = vec![random_set(4, 2, &mut rng)];
        let r = gram_psd_check(&one, 0.5, &BpConfig::default()).unwrap();
        assert!(r.psd);
        assert_eq!(r.gram, vec![vec![1.0]]);

        let sets: Vec<PointSet> = (0..6).map(|_| random_set(4, 3, &mut rng)).collect();
        let r = gram_psd_check(&sets, 0.5, &BpConfig::default()).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(r.gram[a][b], r.gram[b][a]);
            }
        }
        assert_eq!(r.eigenvalues.len(), 6);
        assert!(r.max_log_asymmetry <= 1e-8);

        let mismatched = vec![random_set(4, 3, &mut rng), random_set(3, 3, &mut rng)];
        assert!(gram_psd_check(&mismatched, 0.5, &BpConfig::default()).is_err());
    }

    #[test]
    fn unit_box_normalization() {
        let sets = vec![
            PointSet::new(vec![vec![2.0, 5.0], vec![4.0, 5.0]]).unwrap(),
            PointSet::new(vec![vec![3.0, 5.0], vec![6.0, 5.0]]).unwrap(),
        ];
        let out = normalize_to_unit_box(&sets).unwrap();
        assert_eq!(out[0].points()[0], vec![0.0, 0.0]);
        assert_eq!(out[1].points()[1], vec![1.0, 0.0]);
        assert_eq!(out[0].points()[1], vec![0.5, 0.0]);
    }

    #[test]
    fn point_sets_parse_from_json() {
        let c = PointSetCollection::from_json(r#"{"sets": [[[0, 1], [2, 3]], [[1, 1], [0, 0]]]}"#)
            .unwrap();
        assert_eq!(c.sets.len(), 2);
        assert_eq!(c.sets[1].points()[0], vec![1.0, 1.0]);
        assert!(PointSetCollection::from_json(r#"{"sets": [[[0, 1], [2]]]}"#).is_err());
    }
}
