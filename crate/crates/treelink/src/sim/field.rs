use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::growth::Raster;
use crate::spatial::Point2;

/// Smooth stationary Gaussian field with squared-exponential covariance
/// and unit variance, approximated by random Fourier features.
#[derive(Debug, Clone)]
pub struct FourierField {
    freqs: Vec<Point2>,
    phases: Vec<f64>,
}

impl FourierField {
    pub fn new<R: Rng + ?Sized>(length_scale: f64, n_features: usize, rng: &mut R) -> Self {
        let w = Normal::new(0.0, 1.0 / length_scale).expect("positive length scale");
        let freqs = (0..n_features)
            .map(|_| Point2::new(w.sample(rng), w.sample(rng)))
            .collect();
        let phases = (0..n_features).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self { freqs, phases }
    }

    pub fn value(&self, p: &Point2) -> f64 {
        let s: f64 = self
            .freqs
            .iter()
            .zip(&self.phases)
            .map(|(w, b)| (w.x * p.x + w.y * p.y + b).cos())
            .sum();
        s * (2.0 / self.freqs.len() as f64).sqrt()
    }

    /// Field evaluated at cell centers of a square raster covering at
    /// least `side`.
    pub fn rasterize(&self, origin: f64, side: f64, cellsize: f64) -> Raster {
        let n = ((side / cellsize) - 1e-9).ceil().max(1.0) as usize;
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            let y = origin + (n - 1 - row) as f64 * cellsize + 0.5 * cellsize;
            for col in 0..n {
                let x = origin + col as f64 * cellsize + 0.5 * cellsize;
                values.push(self.value(&Point2::new(x, y)));
            }
        }
        Raster::new(n, n, origin, origin, cellsize, values).expect("valid raster dimensions")
    }
}
