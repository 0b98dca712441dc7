//! Surface layout and the fixed reference-wave phase matrix.
//!
//! Elements sit on a planar grid in the `z = 0` plane, centred at the
//! origin, rows along `y` and columns along `x`. The feeds lie in the same
//! plane one element pitch below the lowest row, each at the centre of an
//! equal slice of the grid's width.

use nalgebra::{DMatrix, Point3};
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RhsGeometry {
    pub element_positions: Vec<Point3<f64>>,
    pub feed_positions: Vec<Point3<f64>>,
}

impl RhsGeometry {
    /// Build a geometry from explicit positions, checking that no feed sits on
    /// an element.
    pub fn from_positions(
        element_positions: Vec<Point3<f64>>,
        feed_positions: Vec<Point3<f64>>,
    ) -> Result<Self> {
        if element_positions.is_empty() {
            return Err(Error::invalid("element_positions", "must not be empty"));
        }
        if feed_positions.is_empty() {
            return Err(Error::invalid("feed_positions", "must not be empty"));
        }
        let geom = Self {
            element_positions,
            feed_positions,
        };
        let min = geom.min_feed_distance();
        if !(min > 0.0) {
            return Err(Error::invalid(
                "feed_positions",
                "every feed must be at positive distance from every element",
            ));
        }
        Ok(geom)
    }

    pub fn num_elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn num_feeds(&self) -> usize {
        self.feed_positions.len()
    }

    /// Distance from feed `k` to element `m`.
    pub fn feed_distance(&self, m: usize, k: usize) -> f64 {
        nalgebra::distance(&self.element_positions[m], &self.feed_positions[k])
    }

    pub fn min_feed_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for m in 0..self.num_elements() {
            for k in 0..self.num_feeds() {
                min = min.min(self.feed_distance(m, k));
            }
        }
        min
    }
}

pub fn build_geometry(config: &SystemConfig) -> Result<RhsGeometry> {
    config.validate()?;
    let rows = config.rhs_rows;
    let cols = config.rhs_cols;
    let pitch = config.element_spacing_m;

    let x0 = -(cols as f64 - 1.0) * pitch / 2.0;
    let y0 = -(rows as f64 - 1.0) * pitch / 2.0;
    let mut elements = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            elements.push(Point3::new(
                x0 + c as f64 * pitch,
                y0 + r as f64 * pitch,
                0.0,
            ));
        }
    }

    let width = cols as f64 * pitch;
    let slot = width / config.num_feeds as f64;
    let feed_y = y0 - pitch;
    let feeds = (0..config.num_feeds)
        .map(|k| Point3::new(-width / 2.0 + (k as f64 + 0.5) * slot, feed_y, 0.0))
        .collect();

    RhsGeometry::from_positions(elements, feeds)
}

/// The `M x K` matrix of reference-wave phases `exp(-j |k_s| r_m^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    pub phi: DMatrix<Complex64>,
}

impl PhaseMatrix {
    pub fn num_elements(&self) -> usize {
        self.phi.nrows()
    }

    pub fn num_feeds(&self) -> usize {
        self.phi.ncols()
    }
}

pub fn build_phase_matrix(geom: &RhsGeometry, k_surface_mag: f64) -> PhaseMatrix {
    let phi = DMatrix::from_fn(geom.num_elements(), geom.num_feeds(), |m, k| {
        Complex64::from_polar(1.0, -k_surface_mag * geom.feed_distance(m, k))
    });
    PhaseMatrix { phi }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::config::wavelength;

    #[test]
    fn two_elements_quarter_wavelength_apart() {
        let cfg = SystemConfig {
            element_spacing_m: wavelength(30e9) / 4.0,
            ..SystemConfig::default()
        }
        .with_surface(1, 2)
        .with_users_and_feeds(1, 1);
        let geom = build_geometry(&cfg).unwrap();
        assert_eq!(geom.num_elements(), 2);
        let d = nalgebra::distance(&geom.element_positions[0], &geom.element_positions[1]);
        assert!((d - cfg.element_spacing_m).abs() < 1e-15);
        assert!((d - 0.0025).abs() < 1e-5);
    }

    #[test]
    fn five_by_five_grid_is_well_spaced() {
        let cfg = SystemConfig::default();
        let geom = build_geometry(&cfg).unwrap();
        assert_eq!(geom.num_elements(), 25);
        let p = &geom.element_positions;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!(nalgebra::distance(&p[i], &p[j]) >= cfg.element_spacing_m - 1e-15);
            }
        }
        let centroid = p
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, q| acc + q.coords)
            / 25.0;
        assert!(centroid.norm() < 1e-15);
    }

    #[test]
    fn feeds_are_distinct_from_elements_and_each_other() {
        for (rows, cols, feeds) in [(1, 1, 1), (1, 1, 6), (5, 5, 6), (8, 8, 4), (3, 7, 7)] {
            let cfg = SystemConfig::default()
                .with_surface(rows, cols)
                .with_users_and_feeds(1, feeds);
            let geom = build_geometry(&cfg).unwrap();
            assert_eq!(geom.num_feeds(), feeds);
            assert!(geom.min_feed_distance() > 0.0);
            let f = &geom.feed_positions;
            for i in 0..f.len() {
                for j in i + 1..f.len() {
                    assert!(nalgebra::distance(&f[i], &f[j]) > 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_coincident_feed() {
        let p = Point3::new(0.0, 0.0, 0.0);
        assert!(RhsGeometry::from_positions(vec![p], vec![p]).is_err());
    }

    #[test]
    fn full_period_phase_is_unity() {
        let ks = 200.0 * 3f64.sqrt() * PI;
        let r = 2.0 * PI / ks;
        let geom = RhsGeometry::from_positions(
            vec![Point3::new(r, 0.0, 0.0)],
            vec![Point3::new(0.0, 0.0, 0.0)],
        )
        .unwrap();
        let phi = build_phase_matrix(&geom, ks);
        assert!((phi.phi[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn one_millimetre_phase() {
        let ks = 200.0 * 3f64.sqrt() * PI;
        let geom = RhsGeometry::from_positions(
            vec![Point3::new(0.0, 0.001, 0.0)],
            vec![Point3::new(0.0, 0.0, 0.0)],
        )
        .unwrap();
        let phi = build_phase_matrix(&geom, ks);
        let expected = Complex64::from_polar(1.0, -0.2 * 3f64.sqrt() * PI);
        assert!((phi.phi[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn phases_match_scalar_recomputation() {
        let cfg = SystemConfig::default().with_surface(4, 6);
        let geom = build_geometry(&cfg).unwrap();
        let phi = build_phase_matrix(&geom, cfg.k_surface_mag);
        for m in 0..geom.num_elements() {
            for k in 0..geom.num_feeds() {
                let e = geom.element_positions[m];
                let f = geom.feed_positions[k];
                let r = ((e.x - f.x).powi(2) + (e.y - f.y).powi(2) + (e.z - f.z).powi(2)).sqrt();
                let theta = -cfg.k_surface_mag * r;
                let entry = phi.phi[(m, k)];
                assert!((entry.re - theta.cos()).abs() < 1e-12);
                assert!((entry.im - theta.sin()).abs() < 1e-12);
                assert!((entry.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
