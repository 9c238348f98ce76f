//! Two-caption, two-image matching scores.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::classifier::{estimate_errors, ClassifierOptions};
use crate::data::DataPoint;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::strategy::{make_sample_set, TimestepStrategy};

/// `s[i][j]` is the score of caption `i` for image `j`; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub s: [[f64; 2]; 2],
}

impl ScoreMatrix {
    pub fn new(s: [[f64; 2]; 2]) -> Result<Self> {
        if s.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("score matrix has non-finite entries".into()));
        }
        Ok(Self { s })
    }

    /// Both captions strictly prefer their own image over the other caption.
    pub fn text_correct(&self) -> bool {
        let s = &self.s;
        s[0][0] > s[1][0] && s[1][1] > s[0][1]
    }
}

/// Fraction of examples whose text score is 1. Empty input scores 0.
pub fn winoground_text_score(examples: &[ScoreMatrix]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples.iter().filter(|m| m.text_correct()).count() as f64 / examples.len() as f64
}

/// Reads `example_id,i,j,score` rows (with a header). Each example needs all
/// four cells exactly once; examples are returned sorted by id.
pub fn read_score_matrices<R: Read>(reader: R) -> Result<Vec<(String, ScoreMatrix)>> {
    #[derive(Deserialize)]
    struct Row {
        example_id: String,
        i: usize,
        j: usize,
        score: f64,
    }
    let mut cells: BTreeMap<String, [[Option<f64>; 2]; 2]> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
        let row = row?;
        if row.i > 1 || row.j > 1 {
            return Err(Error::MalformedHeader(format!(
                "example {}: cell ({}, {}) outside the 2x2 matrix",
                row.example_id, row.i, row.j
            )));
        }
        let cell = &mut cells.entry(row.example_id.clone()).or_default()[row.i][row.j];
        if cell.replace(row.score).is_some() {
            return Err(Error::MalformedHeader(format!(
                "example {}: duplicate cell ({}, {})",
                row.example_id, row.i, row.j
            )));
        }
    }
    cells
        .into_iter()
        .map(|(id, c)| {
            let get = |i: usize, j: usize| {
                c[i][j].ok_or_else(|| Error::MalformedHeader(format!("example {id}: missing cell ({i}, {j})")))
            };
            let m = ScoreMatrix::new([[get(0, 0)?, get(0, 1)?], [get(1, 0)?, get(1, 1)?]])?;
            Ok((id, m))
        })
        .collect()
}

/// Diffusion score matrix: `s[i][j]` is the negative mean error of image `j`
/// under caption class `captions[i]`. Both images use the same sample set.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_score_matrix(
    images: [&DataPoint; 2],
    captions: [usize; 2],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    strategy: &TimestepStrategy,
    trials: usize,
    options: &ClassifierOptions,
    seed: u64,
) -> Result<ScoreMatrix> {
    let set = make_sample_set(strategy, options.noise, trials, sched.steps(), images[0].dim(), seed)?;
    let mut s = [[0.0; 2]; 2];
    for (j, image) in images.iter().enumerate() {
        let errors = estimate_errors(image, &captions, denoiser, sched, &set.points, options)?;
        for i in 0..2 {
            s[i][j] = -errors[i];
        }
    }
    ScoreMatrix::new(s)
}
