//! Seeded pathwise mmWave downlink channels seen through a uniform planar
//! array response.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{check_dim, Error, Result};
use crate::geometry::RhsGeometry;

/// Per-user downlink channels; column `d` is `h_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub channels: DMatrix<Complex64>,
    pub seed_used: u64,
}

impl ChannelSet {
    pub fn num_elements(&self) -> usize {
        self.channels.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.channels.ncols()
    }

    pub fn user(&self, d: usize) -> DVector<Complex64> {
        self.channels.column(d).into_owned()
    }

    /// `h_d[m]`.
    #[inline]
    pub fn entry(&self, d: usize, m: usize) -> Complex64 {
        self.channels[(m, d)]
    }

    pub fn zeros(num_elements: usize, num_users: usize) -> Self {
        Self {
            channels: DMatrix::zeros(num_elements, num_users),
            seed_used: 0,
        }
    }
}

/// One propagation path: complex gain and arrival direction in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Unit propagation direction; broadside (0, 0) is the surface normal `+z`.
pub fn direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        azimuth.sin() * elevation.cos(),
        elevation.sin(),
        azimuth.cos() * elevation.cos(),
    )
}

/// Array response `exp(+j k_f p_m . u(azimuth, elevation))` over `positions`.
pub fn steering_vector(
    positions: &[Point3<f64>],
    k_free_mag: f64,
    azimuth: f64,
    elevation: f64,
) -> DVector<Complex64> {
    let u = direction(azimuth, elevation);
    DVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|p| Complex64::from_polar(1.0, k_free_mag * p.coords.dot(&u))),
    )
}

/// `sqrt(1/I) * sum_i gain_i * a(azimuth_i, elevation_i)`.
pub fn channel_from_paths(
    geom: &RhsGeometry,
    k_free_mag: f64,
    paths: &[PathComponent],
) -> Result<DVector<Complex64>> {
    if paths.is_empty() {
        return Err(Error::invalid("num_paths", "need at least one path"));
    }
    let norm = (1.0 / paths.len() as f64).sqrt();
    let mut h = DVector::zeros(geom.num_elements());
    for path in paths {
        let a = steering_vector(
            &geom.element_positions,
            k_free_mag,
            path.azimuth,
            path.elevation,
        );
        h.axpy(path.gain * norm, &a, Complex64::new(1.0, 0.0));
    }
    Ok(h)
}

/// Circularly-symmetric unit-variance complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw `num_paths` paths per user from `config.seed` and assemble the
/// channels. Users are drawn in order, each path as (gain, azimuth,
/// elevation), so the path parameters do not depend on the surface size.
pub fn generate_channels(config: &SystemConfig, geom: &RhsGeometry) -> Result<ChannelSet> {
    if config.num_paths == 0 {
        return Err(Error::invalid("num_paths", "need at least one path"));
    }
    check_dim(
        "channel geometry",
        config.num_elements(),
        geom.num_elements(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut channels = DMatrix::zeros(geom.num_elements(), config.num_users);
    for d in 0..config.num_users {
        let paths: Vec<PathComponent> = (0..config.num_paths)
            .map(|_| PathComponent {
                gain: complex_gaussian(&mut rng),
                azimuth: rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
                elevation: rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            })
            .collect();
        let h = channel_from_paths(geom, config.k_free_mag, &paths)?;
        channels.set_column(d, &h);
    }
    Ok(ChannelSet {
        channels,
        seed_used: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;

    #[test]
    fn broadside_single_path_is_all_ones() {
        let cfg = SystemConfig::default();
        let geom = build_geometry(&cfg).unwrap();
        let h = channel_from_paths(
            &geom,
            cfg.k_free_mag,
            &[PathComponent {
                gain: Complex64::new(1.0, 0.0),
                azimuth: 0.0,
                elevation: 0.0,
            }],
        )
        .unwrap();
        for z in h.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let cfg = SystemConfig::default().with_surface(6, 7);
        let geom = build_geometry(&cfg).unwrap();
        for &(az, el) in &[(0.3, -0.2), (-1.2, 1.0), (FRAC_PI_2, -FRAC_PI_2)] {
            let a = steering_vector(&geom.element_positions, cfg.k_free_mag, az, el);
            assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = SystemConfig {
            seed: 1234,
            ..SystemConfig::default()
        };
        let geom = build_geometry(&cfg).unwrap();
        let a = generate_channels(&cfg, &geom).unwrap();
        let b = generate_channels(&cfg, &geom).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed_used, 1234);
        assert!(a
            .channels
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
        let c = generate_channels(&SystemConfig { seed: 1235, ..cfg }, &geom).unwrap();
        assert_ne!(a.channels, c.channels);
    }

    #[test]
    fn rejects_zero_paths() {
        let cfg = SystemConfig {
            num_paths: 0,
            ..SystemConfig::default()
        };
        let geom = build_geometry(&SystemConfig::default()).unwrap();
        assert!(generate_channels(&cfg, &geom).is_err());
    }

    #[test]
    fn rejects_mismatched_geometry() {
        let cfg = SystemConfig::default();
        let geom = build_geometry(&cfg.clone().with_surface(2, 2)).unwrap();
        assert!(matches!(
            generate_channels(&cfg, &geom),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unit_average_power_per_entry() {
        let base = SystemConfig::default()
            .with_surface(2, 2)
            .with_users_and_feeds(1, 1);
        let geom = build_geometry(&base).unwrap();
        let trials = 10_000;
        let mut per_entry = vec![0.0; geom.num_elements()];
        let mut energies = Vec::with_capacity(trials);
        for seed in 0..trials as u64 {
            let cfg = SystemConfig {
                seed,
                ..base.clone()
            };
            let h = generate_channels(&cfg, &geom).unwrap();
            let mut energy = 0.0;
            for (m, z) in h.channels.column(0).iter().enumerate() {
                per_entry[m] += z.norm_sqr();
                energy += z.norm_sqr();
            }
            energies.push(energy);
        }
        for acc in per_entry {
            let var = acc / trials as f64;
            assert!((var - 1.0).abs() < 0.05, "variance {var}");
        }
        // E||h||^2 = M within three standard errors.
        let n = trials as f64;
        let mean = energies.iter().sum::<f64>() / n;
        let sd = (energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 4.0).abs() <= 3.0 * sd / n.sqrt(), "mean {mean}");
    }
}
