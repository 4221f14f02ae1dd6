//! Synthetic clustered instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{balanced_kmeans, euclidean_distance, Customer, Dataset, Point};

/// Gaussian-blob instance generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub blobs: usize,
    pub blob_size: usize,
    /// Standard deviation of each blob, km.
    pub spread: f64,
    pub center_low: f64,
    pub center_high: f64,
    pub depot: [f64; 2],
    /// Blob centres must be further apart than this multiple of `spread`.
    pub separation: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            blobs: 3,
            blob_size: 4,
            spread: 5.0,
            center_low: 15.0,
            center_high: 85.0,
            depot: [50.0, 50.0],
            separation: 4.0,
            max_attempts: 100,
        }
    }
}

impl GeneratorSpec {
    fn validate(&self) -> Result<()> {
        if self.blobs * self.blob_size != 12 {
            return Err(Error::invalid(format!(
                "{} blobs of {} customers do not give 12 customers",
                self.blobs, self.blob_size
            )));
        }
        if !(self.spread > 0.0 && self.center_low < self.center_high) {
            return Err(Error::invalid(
                "blob spread and centre range must be non-degenerate",
            ));
        }
        Ok(())
    }
}

/// Customers `b * blob_size + 1 ..= (b + 1) * blob_size` belong to blob `b`.
/// Resamples until the blobs are well separated and balanced K-means
/// recovers them exactly.
pub fn generate_dataset(seed: u64, spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Generation(e.to_string()))?;
    let depot = Point::new(spec.depot[0], spec.depot[1]);
    let min_gap = spec.separation * spec.spread;

    for _ in 0..spec.max_attempts {
        let centers: Vec<Point> = (0..spec.blobs)
            .map(|_| {
                Point::new(
                    rng.gen_range(spec.center_low..spec.center_high),
                    rng.gen_range(spec.center_low..spec.center_high),
                )
            })
            .collect();
        let mut customers = Vec::with_capacity(12);
        for c in &centers {
            for _ in 0..spec.blob_size {
                let id = customers.len() as u32 + 1;
                let p = Point::new(c.x + noise.sample(&mut rng), c.y + noise.sample(&mut rng));
                customers.push(Customer::new(id, p));
            }
        }
        let separated = centers.iter().enumerate().all(|(i, a)| {
            centers[i + 1..]
                .iter()
                .all(|b| euclidean_distance(*a, *b) > min_gap)
        });
        if !separated {
            continue;
        }
        let dataset = Dataset::new(depot, customers)?;
        if recovers_blobs(&dataset, spec)? {
            return Ok(dataset);
        }
    }
    Err(Error::Generation(format!(
        "no well-separated instance within {} attempts (seed {seed})",
        spec.max_attempts
    )))
}

fn recovers_blobs(dataset: &Dataset, spec: &GeneratorSpec) -> Result<bool> {
    let clusters = balanced_kmeans(dataset, spec.blobs, spec.blob_size, 0)?;
    Ok(clusters.iter().all(|c| {
        let ids = c.member_ids();
        let blob = (ids[0] as usize - 1) / spec.blob_size;
        ids.iter()
            .all(|&id| (id as usize - 1) / spec.blob_size == blob)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = GeneratorSpec::default();
        let a = generate_dataset(7, &spec).unwrap();
        assert_eq!(a.customers.len(), 12);
        assert_eq!(a.depot, Point::new(50.0, 50.0));
        assert_eq!(a, generate_dataset(7, &spec).unwrap());
        assert_ne!(a, generate_dataset(8, &spec).unwrap());
    }

    #[test]
    fn kmeans_recovers_generating_blobs() {
        let spec = GeneratorSpec::default();
        for seed in 0..10 {
            let d = generate_dataset(seed, &spec).unwrap();
            assert!(recovers_blobs(&d, &spec).unwrap());
        }
    }

    #[test]
    fn impossible_separation_fails() {
        let spec = GeneratorSpec {
            separation: 100.0,
            max_attempts: 5,
            ..Default::default()
        };
        assert!(matches!(
            generate_dataset(1, &spec),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn rejects_wrong_customer_count() {
        let spec = GeneratorSpec {
            blob_size: 5,
            ..Default::default()
        };
        assert!(generate_dataset(1, &spec).is_err());
    }
}
