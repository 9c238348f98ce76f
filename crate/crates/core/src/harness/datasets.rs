//! Synthetic labelled datasets: Gaussian-mixture vectors and noisy 8x8
//! template images.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::DataPoint;
use crate::denoiser::{ClassConditional, GaussianClassModel, GaussianComponent};
use crate::error::{Error, Result};
use crate::noise::standard_normal;
use crate::seed::{derive_seed, streams};

pub const TEMPLATE_SIZE: usize = 8;

/// Class-conditional Gaussians with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum GmmPreset {
    /// Means `s / sqrt(2) * e_k`, so every pair of means is `separation` apart.
    Simplex {
        classes: usize,
        dim: usize,
        separation: f64,
        #[serde(default = "one")]
        variance: f64,
    },
    /// Means drawn from `N(0, spread^2 I)` with a dedicated seed, isotropic
    /// class variances drawn uniformly from `[min_variance, max_variance]`.
    Random {
        classes: usize,
        dim: usize,
        spread: f64,
        min_variance: f64,
        max_variance: f64,
        model_seed: u64,
    },
    /// Explicit means and per-class diagonal variances.
    Explicit {
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

impl GmmPreset {
    pub fn build(&self) -> Result<GaussianClassModel> {
        match self {
            GmmPreset::Simplex {
                classes,
                dim,
                separation,
                variance,
            } => {
                if *classes == 0 || *classes > *dim {
                    return Err(Error::config(
                        "dataset.classes",
                        format!("simplex preset needs 1 <= classes <= dim, got {classes} and {dim}"),
                    ));
                }
                if !(*separation >= 0.0) || !(*variance > 0.0) {
                    return Err(Error::config("dataset.separation", "need separation >= 0 and variance > 0"));
                }
                let scale = separation / std::f64::consts::SQRT_2;
                let means = (0..*classes)
                    .map(|k| {
                        let mut m = vec![0.0; *dim];
                        m[k] = scale;
                        m
                    })
                    .collect();
                GaussianClassModel::isotropic(means, *variance)
            }
            GmmPreset::Random {
                classes,
                dim,
                spread,
                min_variance,
                max_variance,
                model_seed,
            } => {
                if *classes == 0 || *dim == 0 {
                    return Err(Error::config("dataset.classes", "need at least one class and dimension"));
                }
                if !(*min_variance > 0.0 && min_variance <= max_variance) || !(*spread >= 0.0) {
                    return Err(Error::config(
                        "dataset.min_variance",
                        "need 0 < min_variance <= max_variance and spread >= 0",
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*model_seed);
                let comps = (0..*classes)
                    .map(|_| {
                        let mean: Vec<f64> = standard_normal(*dim, &mut rng).iter().map(|v| spread * v).collect();
                        let u: f64 = rand::Rng::random(&mut rng);
                        let var = min_variance + u * (max_variance - min_variance);
                        ClassConditional::single(GaussianComponent::isotropic(mean, var))
                    })
                    .collect();
                GaussianClassModel::new(comps)
            }
            GmmPreset::Explicit { means, variances } => {
                if means.len() != variances.len() {
                    return Err(Error::config("dataset.variances", "need one variance vector per mean"));
                }
                let comps = means
                    .iter()
                    .zip(variances)
                    .map(|(m, v)| GaussianComponent::diagonal(m.clone(), v.clone()).map(ClassConditional::single))
                    .collect::<Result<Vec<_>>>()?;
                GaussianClassModel::new(comps)
            }
        }
    }
}

/// Which family of 8x8 templates to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSet {
    /// Horizontal bar, vertical bar, square outline, diagonal.
    #[default]
    Shapes,
    /// Two pairs of classes; each pair arranges the same two parts differently.
    Compositional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Gmm(GmmPreset),
    Templates {
        #[serde(default)]
        set: TemplateSet,
        sigma: f64,
        /// Pixels are clamped to `[-clip, clip]`.
        #[serde(default = "default_clip")]
        clip: f64,
    },
}

fn default_clip() -> f64 {
    2.0
}

impl DatasetSpec {
    pub fn is_spatial(&self) -> bool {
        matches!(self, DatasetSpec::Templates { .. })
    }

    pub fn num_classes(&self) -> Result<usize> {
        match self {
            DatasetSpec::Gmm(p) => Ok(p.build()?.classes().len()),
            DatasetSpec::Templates { set, .. } => Ok(templates(*set).len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    GmmVectors,
    TemplateImages,
}

/// Labelled samples together with the parameters that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub kind: DatasetKind,
    /// Interleaved by class: sample `i` has label `i % num_classes`.
    pub samples: Vec<DataPoint>,
    pub num_classes: usize,
    /// Generating model for Gaussian-mixture datasets.
    pub model: Option<GaussianClassModel>,
    /// Flattened clean templates for image datasets.
    pub templates: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, DataPoint::dim)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.expect("labelled")).collect()
    }

    /// The first `n` samples, which stay class-balanced when `n` is a
    /// multiple of the class count.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            samples: self.samples[..n.min(self.samples.len())].to_vec(),
            ..self.clone()
        }
    }
}

fn paint(cells: &[(usize, usize)]) -> Vec<f64> {
    let mut img = vec![-1.0; TEMPLATE_SIZE * TEMPLATE_SIZE];
    for &(r, c) in cells {
        img[r * TEMPLATE_SIZE + c] = 1.0;
    }
    img
}

fn block(r0: usize, c0: usize, h: usize, w: usize) -> Vec<(usize, usize)> {
    (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| (r, c))).collect()
}

/// Clean templates with background `-1` and foreground `+1`.
pub fn templates(set: TemplateSet) -> Vec<Vec<f64>> {
    let n = TEMPLATE_SIZE;
    match set {
        TemplateSet::Shapes => {
            let outline: Vec<_> = (1..n - 1)
                .flat_map(|i| [(1, i), (n - 2, i), (i, 1), (i, n - 2)])
                .collect();
            let diagonal: Vec<_> = (0..n).flat_map(|i| [(i, i), (i, (i + 1).min(n - 1))]).collect();
            vec![
                paint(&block(3, 0, 2, n)),
                paint(&block(0, 3, n, 2)),
                paint(&outline),
                paint(&diagonal),
            ]
        }
        TemplateSet::Compositional => {
            // parts: a 3x3 square and a 1x3 bar
            let sq = |r, c| block(r, c, 3, 3);
            let bar = |r, c| block(r, c, 1, 3);
            let cat = |a: Vec<(usize, usize)>, b: Vec<(usize, usize)>| paint(&[a, b].concat());
            vec![
                // square left, bar right
                cat(sq(2, 0), bar(3, 5)),
                // bar left, square right
                cat(bar(3, 0), sq(2, 5)),
                // square above bar
                cat(sq(0, 2), bar(6, 2)),
                // bar above square
                cat(bar(1, 2), sq(5, 2)),
            ]
        }
    }
}

/// Generates `n_per_class` samples per class, reproducible from
/// `(spec, n_per_class, seed)`.
pub fn gen_dataset(spec: &DatasetSpec, n_per_class: usize, seed: u64) -> Result<SyntheticDataset> {
    if n_per_class == 0 {
        return Err(Error::config("dataset.n_per_class", "must be positive"));
    }
    match spec {
        DatasetSpec::Gmm(preset) => {
            let model = preset.build()?;
            let k = model.classes().len();
            let samples = (0..n_per_class * k)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::DATASET, i as u64));
                    Ok(DataPoint::vector(model.sample_class(i % k, &mut rng)?).labeled(i % k))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SyntheticDataset {
                kind: DatasetKind::GmmVectors,
                samples,
                num_classes: k,
                model: Some(model),
                templates: Vec::new(),
                sigma: 0.0,
            })
        }
        DatasetSpec::Templates { set, sigma, clip } => {
            if !(*sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::config("dataset.sigma", "must be finite and non-negative"));
            }
            if !(*clip >= 1.0) || !clip.is_finite() {
                return Err(Error::config("dataset.clip", "must be finite and at least 1"));
            }
            let temps = templates(*set);
            let k = temps.len();
            let samples = (0..n_per_class * k)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::DATASET, i as u64));
                    let template = &temps[i % k];
                    let values = if *sigma == 0.0 {
                        template.clone()
                    } else {
                        let noise = Normal::new(0.0, *sigma).map_err(|e| Error::config("dataset.sigma", e.to_string()))?;
                        template
                            .iter()
                            .map(|v| (v + noise.sample(&mut rng)).clamp(-clip, *clip))
                            .collect()
                    };
                    Ok(DataPoint::image(TEMPLATE_SIZE, TEMPLATE_SIZE, values)?.labeled(i % k))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SyntheticDataset {
                kind: DatasetKind::TemplateImages,
                samples,
                num_classes: k,
                model: None,
                templates: temps,
                sigma: *sigma,
            })
        }
    }
}
