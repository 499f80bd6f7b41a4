//! Desk-scale synthetic datasets with visually confusable neighbours.
//!
//! Locations come in confusion groups. Image embeddings of a group cluster
//! tightly around a shared centroid, so image retrieval finds the group but
//! not the location. Text embeddings are drawn per location and stay
//! separable. Within a group locations sit on a 0.2 km circle; group
//! centres lie on a 0.1 degree grid, so distinct groups are more than 5 km
//! apart.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::types::{Embedding, GeoCoord, QueryRecord, ReferenceRecord};
use super::{GeoStore, StoreError};
use crate::cvlang::{render_description, QuestionBank};

const GRID_STEP_DEG: f64 = 0.1;
const GROUP_RADIUS_KM: f64 = 0.2;
const KM_PER_DEG_LAT: f64 = 6371.0 * PI / 180.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_locations: usize,
    /// Locations per confusion group (the last group may be smaller).
    pub group_size: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    /// Norm of the noise added to a query's image centroid, relative to the
    /// unit-norm centroid.
    pub image_noise: f64,
    /// Norm of the per-location offset from its group's image centroid.
    pub location_spread: f64,
    /// Text noise norm is `1 / text_separation` around unit-norm
    /// per-location text centroids, on both query and reference side.
    pub text_separation: f64,
    /// Record the other members of a query's group as semi-positives so the
    /// trainer can either keep them as negatives or exclude them.
    pub label_semi_positives: bool,
    /// Render a caption for every record from a random valid answer sheet.
    pub captions: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_locations: 1000,
            group_size: 4,
            image_dim: 64,
            text_dim: 32,
            image_noise: 1.6,
            location_spread: 0.1,
            text_separation: 4.0,
            label_semi_positives: false,
            captions: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: &str| Err(StoreError::SynthConfig(m.into()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.group_size > self.n_locations {
            return bad("group_size exceeds n_locations");
        }
        if self.image_dim == 0 || self.text_dim == 0 {
            return bad("image_dim and text_dim must be positive");
        }
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_negative(self.image_noise) || !finite_non_negative(self.location_spread) {
            return bad("image_noise and location_spread must be finite and non-negative");
        }
        if !(self.text_separation.is_finite() && self.text_separation > 0.0) {
            return bad("text_separation must be positive");
        }
        let (rows, cols) = grid_shape(self.n_groups());
        if rows as f64 * GRID_STEP_DEG > 120.0 || cols as f64 * GRID_STEP_DEG > 340.0 {
            return bad("too many groups for the coordinate grid");
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.n_locations.div_ceil(self.group_size)
    }
}

fn grid_shape(n_groups: usize) -> (usize, usize) {
    let cols = ((n_groups as f64).sqrt().ceil() as usize).max(1);
    (n_groups.div_ceil(cols), cols)
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `centre + scale * z / sqrt(dim)` with `z` standard normal, so the noise
/// has expected norm close to `scale`.
fn perturb(rng: &mut ChaCha8Rng, centre: &[f64], scale: f64) -> Vec<f64> {
    let k = scale / (centre.len() as f64).sqrt();
    let z = gaussian(rng, centre.len());
    centre.iter().zip(z).map(|(c, z)| c + k * z).collect()
}

fn to_embedding(v: &[f64]) -> Embedding {
    Embedding::new(v.iter().map(|&x| x as f32).collect()).expect("finite synthetic values")
}

/// Generates references and one query per location. Fully determined by
/// `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<GeoStore, StoreError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut caption_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca97_1045);
    let bank = QuestionBank::builtin();
    let width = (config.n_locations - 1).max(1).to_string().len();
    let (rows, cols) = grid_shape(config.n_groups());

    let mut references = Vec::with_capacity(config.n_locations);
    let mut queries = Vec::with_capacity(config.n_locations);
    for group in 0..config.n_groups() {
        let centroid = normalized(gaussian(&mut rng, config.image_dim));
        let row = group / cols;
        let col = group % cols;
        let centre_lat = (row as f64 - (rows as f64 - 1.0) / 2.0) * GRID_STEP_DEG;
        let centre_lon = (col as f64 - (cols as f64 - 1.0) / 2.0) * GRID_STEP_DEG;
        let first = group * config.group_size;
        let last = (first + config.group_size).min(config.n_locations);
        for slot in 0..(last - first) {
            let loc = first + slot;
            let image_centre = normalized(perturb(&mut rng, &centroid, config.location_spread));
            let text_centre = normalized(gaussian(&mut rng, config.text_dim));
            let text_noise = 1.0 / config.text_separation;
            let ref_text = perturb(&mut rng, &text_centre, text_noise);
            let query_image = perturb(&mut rng, &image_centre, config.image_noise);
            let query_text = perturb(&mut rng, &text_centre, text_noise);

            let angle = 2.0 * PI * slot as f64 / config.group_size as f64;
            let lat = centre_lat + GROUP_RADIUS_KM * angle.cos() / KM_PER_DEG_LAT;
            let lon = centre_lon
                + GROUP_RADIUS_KM * angle.sin() / (KM_PER_DEG_LAT * centre_lat.to_radians().cos());
            let coord = GeoCoord::new(lat, lon).expect("grid stays within range");

            let caption = config.captions.then(|| {
                let sheet = bank.random_sheet(&format!("loc{loc}"), &mut caption_rng);
                render_description(&sheet, bank).expect("random sheets are valid")
            });

            let ref_id = format!("r{loc:0width$}");
            let semi_positives: BTreeSet<String> = if config.label_semi_positives {
                (first..last)
                    .filter(|&other| other != loc)
                    .map(|other| format!("r{other:0width$}"))
                    .collect()
            } else {
                BTreeSet::new()
            };
            references.push(ReferenceRecord {
                id: ref_id.clone(),
                image: to_embedding(&image_centre),
                text: Some(to_embedding(&ref_text)),
                caption: caption.clone(),
                coord: Some(coord),
            });
            queries.push(QueryRecord {
                id: format!("q{loc:0width$}"),
                image: to_embedding(&query_image),
                text: Some(to_embedding(&query_text)),
                caption,
                coord: Some(coord),
                ground_truth: BTreeSet::from([ref_id]),
                semi_positives,
            });
        }
    }
    GeoStore::new(config.image_dim, config.text_dim, references, queries)
}
