//! Closed-form optimal denoiser for Gaussian (mixture) class conditionals.
//!
//! For `x_0 ~ N(mu, Sigma)` the forward process gives
//! `x_t ~ N(sqrt(ab) mu, ab Sigma + (1 - ab) I)` and the minimum mean squared
//! error noise prediction is
//! `E[eps | x_t] = sqrt(1 - ab) (ab Sigma + (1 - ab) I)^-1 (x_t - sqrt(ab) mu)`.
//! Every covariance is stored through its eigendecomposition so each timestep
//! only rescales eigen-coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use super::Denoiser;
use crate::error::{Error, Result};
use crate::noise::standard_normal;
use crate::schedule::NoiseSchedule;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    eigvals: Vec<f64>,
    /// Orthonormal eigenvectors as columns; `None` for axis-aligned covariances.
    basis: Option<DMatrix<f64>>,
}

/// Quantities of one component evaluated at a noised input.
struct Noised {
    /// Eigen-coordinates of `x_t - sqrt(ab) mu`.
    z: Vec<f64>,
    /// Eigenvalues of `ab Sigma + (1 - ab) I`.
    scales: Vec<f64>,
}

impl GaussianComponent {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        Self {
            mean,
            eigvals: vec![variance; d],
            basis: None,
        }
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if variances.len() != mean.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![mean.len()],
                actual: vec![variances.len()],
            });
        }
        Ok(Self {
            mean,
            eigvals: variances,
            basis: None,
        })
    }

    /// Full covariance given as a dense row-major matrix.
    pub fn full(mean: Vec<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: vec![d, d],
                actual: vec![covariance.nrows(), covariance.ncols()],
            });
        }
        let scale = covariance.amax().max(1.0);
        let asym = (covariance - covariance.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::Numeric("covariance is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(covariance.clone());
        Ok(Self {
            mean,
            eigvals: eig.eigenvalues.iter().copied().collect(),
            basis: Some(eig.eigenvectors),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    fn is_positive_definite(&self) -> bool {
        let max = self.eigvals.iter().copied().fold(0.0_f64, f64::max);
        self.eigvals.iter().all(|&l| l.is_finite() && l > 1e-12 * max.max(1e-300))
            && self.mean.iter().all(|m| m.is_finite())
    }

    /// Coordinates of `v` in the covariance eigenbasis.
    pub fn eigen_coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.to_eigen(v)
    }

    fn to_eigen(&self, v: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => v.to_vec(),
            Some(q) => (q.transpose() * DVector::from_column_slice(v)).iter().copied().collect(),
        }
    }

    fn eigen_to_ambient(&self, z: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => z.to_vec(),
            Some(q) => (q * DVector::from_column_slice(z)).iter().copied().collect(),
        }
    }

    /// Diagonal of `Q diag(values) Q^T`.
    fn diag_of(&self, values: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => values.to_vec(),
            Some(q) => (0..self.dim())
                .map(|i| (0..self.dim()).map(|j| q[(i, j)] * q[(i, j)] * values[j]).sum())
                .collect(),
        }
    }

    fn noised(&self, x_t: &[f64], alpha_bar: f64) -> Noised {
        let signal = alpha_bar.sqrt();
        let centred: Vec<f64> = x_t.iter().zip(&self.mean).map(|(x, m)| x - signal * m).collect();
        Noised {
            z: self.to_eigen(&centred),
            scales: self.eigvals.iter().map(|l| alpha_bar * l + 1.0 - alpha_bar).collect(),
        }
    }

    fn log_density_of(n: &Noised) -> f64 {
        let quad: f64 = n.z.iter().zip(&n.scales).map(|(z, s)| z * z / s).sum();
        let logdet: f64 = n.scales.iter().map(|s| s.ln()).sum();
        -0.5 * (quad + logdet + n.z.len() as f64 * LN_2PI)
    }

    fn eps_of(&self, n: &Noised, alpha_bar: f64) -> Vec<f64> {
        let noise = (1.0 - alpha_bar).sqrt();
        let w: Vec<f64> = n.z.iter().zip(&n.scales).map(|(z, s)| noise * z / s).collect();
        self.eigen_to_ambient(&w)
    }

    /// Log-density of the noised component `N(sqrt(ab) mu, ab Sigma + (1 - ab) I)`.
    /// `alpha_bar = 1` gives the clean density.
    pub fn log_density(&self, x: &[f64], alpha_bar: f64) -> f64 {
        Self::log_density_of(&self.noised(x, alpha_bar))
    }

    /// `E[eps | x_t]` under this component.
    pub fn predict_eps(&self, x_t: &[f64], alpha_bar: f64) -> Vec<f64> {
        self.eps_of(&self.noised(x_t, alpha_bar), alpha_bar)
    }

    /// Posterior mean of `x_0` and the diagonal of its posterior covariance.
    fn x0_posterior(&self, x_t: &[f64], alpha_bar: f64, n: &Noised) -> (Vec<f64>, Vec<f64>) {
        let eps = self.eps_of(n, alpha_bar);
        let (signal, noise) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
        let mean = x_t.iter().zip(&eps).map(|(x, e)| (x - noise * e) / signal).collect();
        let post: Vec<f64> = self
            .eigvals
            .iter()
            .zip(&n.scales)
            .map(|(l, s)| l * (1.0 - alpha_bar) / s)
            .collect();
        (mean, self.diag_of(&post))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = standard_normal(self.dim(), rng)
            .into_iter()
            .zip(&self.eigvals)
            .map(|(z, l)| z * l.sqrt())
            .collect();
        self.eigen_to_ambient(&z).iter().zip(&self.mean).map(|(a, m)| a + m).collect()
    }
}

/// One class: a mixture of Gaussian components.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConditional {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
}

impl ClassConditional {
    pub fn single(component: GaussianComponent) -> Self {
        Self {
            components: vec![component],
            weights: vec![1.0],
        }
    }

    pub fn mixture(components: Vec<GaussianComponent>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::config(
                "weights",
                "mixture needs one weight per component and at least one component",
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("weights", format!("mixture weights must sum to 1, got {total}")));
        }
        Ok(Self { components, weights })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn single_component(&self) -> Option<&GaussianComponent> {
        match self.components.as_slice() {
            [c] => Some(c),
            _ => None,
        }
    }

    pub fn log_density(&self, x: &[f64], alpha_bar: f64) -> f64 {
        log_sum_exp(
            self.components
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w.ln() + c.log_density(x, alpha_bar)),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = if self.components.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            self.weights
                .iter()
                .position(|w| {
                    acc += w;
                    u < acc
                })
                .unwrap_or(self.components.len() - 1)
        };
        self.components[k].sample(rng)
    }
}

/// Exact analytic denoiser for a set of Gaussian-mixture class conditionals.
///
/// The unconditional prediction uses the uniform mixture over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassModel {
    dim: usize,
    classes: Vec<ClassConditional>,
}

impl GaussianClassModel {
    pub fn new(classes: Vec<ClassConditional>) -> Result<Self> {
        let dim = classes
            .first()
            .and_then(|c| c.components.first())
            .map(GaussianComponent::dim)
            .ok_or_else(|| Error::config("classes", "model needs at least one class"))?;
        for (k, class) in classes.iter().enumerate() {
            for comp in &class.components {
                if comp.dim() != dim {
                    return Err(Error::ShapeMismatch {
                        expected: vec![dim],
                        actual: vec![comp.dim()],
                    });
                }
                if !comp.is_positive_definite() {
                    return Err(Error::SingularCovariance { class: k });
                }
            }
        }
        Ok(Self { dim, classes })
    }

    /// One isotropic Gaussian per class.
    pub fn isotropic(means: Vec<Vec<f64>>, variance: f64) -> Result<Self> {
        Self::new(
            means
                .into_iter()
                .map(|m| ClassConditional::single(GaussianComponent::isotropic(m, variance)))
                .collect(),
        )
    }

    pub fn classes(&self) -> &[ClassConditional] {
        &self.classes
    }

    pub fn class(&self, c: usize) -> Result<&ClassConditional> {
        self.classes.get(c).ok_or(Error::ClassOutOfRange {
            class: c,
            num_classes: self.classes.len(),
        })
    }

    /// `(weight, component)` pairs that make up class `c`, or the uniform
    /// mixture over every class when `c` is `None`.
    fn mixture_for(&self, c: Option<usize>) -> Result<Vec<(f64, &GaussianComponent)>> {
        Ok(match c {
            Some(c) => {
                let class = self.class(c)?;
                class.weights.iter().copied().zip(&class.components).collect()
            }
            None => {
                let n = self.classes.len() as f64;
                self.classes
                    .iter()
                    .flat_map(|cl| cl.weights.iter().map(move |w| w / n).zip(&cl.components))
                    .collect()
            }
        })
    }

    fn check_input(&self, x_t: &[f64]) -> Result<()> {
        if x_t.len() == self.dim {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: vec![self.dim],
                actual: vec![x_t.len()],
            })
        }
    }

    /// Responsibilities and per-component noised terms for a mixture.
    fn responsibilities<'a>(
        mixture: &[(f64, &'a GaussianComponent)],
        x_t: &[f64],
        alpha_bar: f64,
    ) -> Vec<(f64, &'a GaussianComponent, Noised)> {
        let terms: Vec<(f64, &GaussianComponent, Noised)> = mixture
            .iter()
            .map(|&(w, comp)| {
                let n = comp.noised(x_t, alpha_bar);
                (w.ln() + GaussianComponent::log_density_of(&n), comp, n)
            })
            .collect();
        let norm = log_sum_exp(terms.iter().map(|t| t.0));
        terms.into_iter().map(|(l, c, n)| ((l - norm).exp(), c, n)).collect()
    }

    /// `E[eps | x_t, c]` at a given `alpha_bar`.
    pub fn eps_at(&self, x_t: &[f64], alpha_bar: f64, c: Option<usize>) -> Result<Vec<f64>> {
        self.check_input(x_t)?;
        let mixture = self.mixture_for(c)?;
        if let [(_, comp)] = mixture.as_slice() {
            return Ok(comp.predict_eps(x_t, alpha_bar));
        }
        let mut out = vec![0.0; self.dim];
        for (r, comp, n) in Self::responsibilities(&mixture, x_t, alpha_bar) {
            for (o, e) in out.iter_mut().zip(comp.eps_of(&n, alpha_bar)) {
                *o += r * e;
            }
        }
        Ok(out)
    }

    /// Diagonal of `Var[x_0 | x_t, c]`.
    pub fn x0_variance_at(&self, x_t: &[f64], alpha_bar: f64, c: Option<usize>) -> Result<Vec<f64>> {
        self.check_input(x_t)?;
        let mixture = self.mixture_for(c)?;
        let resp = Self::responsibilities(&mixture, x_t, alpha_bar);
        let mut first = vec![0.0; self.dim];
        let mut second = vec![0.0; self.dim];
        for (r, comp, n) in &resp {
            let (m, v) = comp.x0_posterior(x_t, alpha_bar, n);
            for i in 0..self.dim {
                first[i] += r * m[i];
                second[i] += r * (v[i] + m[i] * m[i]);
            }
        }
        Ok(first
            .iter()
            .zip(&second)
            .map(|(m, s)| (s - m * m).max(0.0))
            .collect())
    }

    /// Clean log-density `log p(x | c)`.
    pub fn log_density(&self, x: &[f64], c: usize) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.class(c)?.log_density(x, 1.0))
    }

    pub fn sample_class<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.class(c)?.sample(rng))
    }
}

impl Denoiser for GaussianClassModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.classes.len()
    }

    fn supports_unconditional(&self) -> bool {
        true
    }

    fn predict_eps(&self, x_t: &[f64], t: usize, class: Option<usize>, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        sched.check_timestep(t)?;
        self.eps_at(x_t, sched.alpha_bar(t), class)
    }

    fn supports_variance(&self) -> bool {
        true
    }

    /// Exact `Var[x_{t-1} | x_t, c] = beta_tilde_t + coef^2 Var[x_0 | x_t, c]`,
    /// with `coef = sqrt(alpha_bar_{t-1}) beta_t / (1 - alpha_bar_t)`.
    fn predict_variance(&self, x_t: &[f64], t: usize, class: Option<usize>, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        sched.check_timestep(t)?;
        let ab = sched.alpha_bar(t);
        let coef = sched.alpha_bar_prev(t).sqrt() * sched.beta(t) / (1.0 - ab);
        let floor = sched.posterior_variance(t);
        Ok(self
            .x0_variance_at(x_t, ab, class)?
            .into_iter()
            .map(|v| floor + coef * coef * v)
            .collect())
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_covariance_examples() {
        let m = GaussianClassModel::isotropic(vec![vec![0.0, 0.0]], 1.0).unwrap();
        let e = m.eps_at(&[1.0, 1.0], 0.5, Some(0)).unwrap();
        assert!(close(&e, &[0.5f64.sqrt(), 0.5f64.sqrt()], 1e-15));

        let m = GaussianClassModel::isotropic(vec![vec![2.0, 0.0]], 1.0).unwrap();
        let e = m.eps_at(&[2.0, 0.0], 0.25, Some(0)).unwrap();
        assert!(close(&e, &[0.75f64.sqrt(), 0.0], 1e-15));
    }

    #[test]
    fn symmetric_mixture_at_origin_is_zero() {
        let comps = vec![
            GaussianComponent::isotropic(vec![1.5, -0.5], 0.7),
            GaussianComponent::isotropic(vec![-1.5, 0.5], 0.7),
        ];
        let class = ClassConditional::mixture(comps, vec![0.5, 0.5]).unwrap();
        let m = GaussianClassModel::new(vec![class]).unwrap();
        for ab in [0.1, 0.5, 0.9] {
            let e = m.eps_at(&[0.0, 0.0], ab, Some(0)).unwrap();
            assert!(close(&e, &[0.0, 0.0], 1e-15), "{e:?}");
        }
    }

    #[test]
    fn scalar_formula_for_isotropic_covariance() {
        let (sigma2, mu) = (0.3, vec![0.4, -1.0, 2.0]);
        let iso = GaussianComponent::isotropic(mu.clone(), sigma2);
        let cov = DMatrix::from_diagonal_element(3, 3, sigma2);
        let full = GaussianComponent::full(mu.clone(), &cov).unwrap();
        let x_t = [0.3, 0.2, -0.7];
        for ab in [0.01f64, 0.37, 0.99] {
            let scalar: Vec<f64> = x_t
                .iter()
                .zip(&mu)
                .map(|(x, m)| (1.0 - ab).sqrt() * (x - ab.sqrt() * m) / (ab * sigma2 + 1.0 - ab))
                .collect();
            assert!(close(&iso.predict_eps(&x_t, ab), &scalar, 1e-14));
            assert!(close(&full.predict_eps(&x_t, ab), &scalar, 1e-12));
        }
    }

    #[test]
    fn full_covariance_matches_direct_inverse() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 1.0, 0.1, -0.2, 0.1, 0.5]);
        let mu = vec![0.5, -0.25, 1.0];
        let comp = GaussianComponent::full(mu.clone(), &cov).unwrap();
        let x_t = DVector::from_vec(vec![1.0, 0.5, -0.5]);
        let ab = 0.4;
        let m = cov.clone() * ab + DMatrix::identity(3, 3) * (1.0 - ab);
        let rhs = &x_t - DVector::from_vec(mu) * ab.sqrt();
        let direct = m.try_inverse().unwrap() * rhs * (1.0 - ab).sqrt();
        let got = comp.predict_eps(x_t.as_slice(), ab);
        assert!(close(&got, direct.as_slice(), 1e-12));
    }

    #[test]
    fn rejects_singular_covariance_with_class_index() {
        let good = ClassConditional::single(GaussianComponent::isotropic(vec![0.0, 0.0], 1.0));
        let bad = ClassConditional::single(GaussianComponent::diagonal(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap());
        let err = GaussianClassModel::new(vec![good, bad]).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { class: 1 }));
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let comps = vec![
            GaussianComponent::isotropic(vec![0.0], 1.0),
            GaussianComponent::isotropic(vec![1.0], 1.0),
        ];
        assert!(ClassConditional::mixture(comps, vec![0.5, 0.6]).is_err());
    }

    /// Binned Monte Carlo estimate of `E[eps | x_t]` in one dimension.
    #[test]
    fn closed_form_is_conditional_expectation() {
        let comps = vec![
            GaussianComponent::isotropic(vec![-1.0], 0.5),
            GaussianComponent::isotropic(vec![2.0], 0.25),
        ];
        let class = ClassConditional::mixture(comps, vec![0.4, 0.6]).unwrap();
        let model = GaussianClassModel::new(vec![class]).unwrap();
        let ab: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bins = [(-0.6, -0.5), (0.4, 0.5), (1.2, 1.3)];
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for _ in 0..2_000_000 {
            let x0 = model.sample_class(0, &mut rng).unwrap()[0];
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            let xt = ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
            for (b, &(lo, hi)) in bins.iter().enumerate() {
                if xt >= lo && xt < hi {
                    sums[b] += eps;
                    counts[b] += 1;
                }
            }
        }
        for (b, &(lo, hi)) in bins.iter().enumerate() {
            let mc = sums[b] / counts[b] as f64;
            // average the closed form over the bin
            let exact: f64 = (0..100)
                .map(|i| model.eps_at(&[lo + (hi - lo) * (i as f64 + 0.5) / 100.0], ab, Some(0)).unwrap()[0])
                .sum::<f64>()
                / 100.0;
            assert!((mc - exact).abs() <= 0.05 * exact.abs().max(0.1), "bin {b}: mc {mc} exact {exact}");
        }
    }

    #[test]
    fn variance_exceeds_posterior_floor() {
        let model = GaussianClassModel::isotropic(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0.5).unwrap();
        let s = NoiseSchedule::linear(100).unwrap();
        for t in [1, 2, 50, 100] {
            let v = model.predict_variance(&[0.2, 0.4], t, Some(0), &s).unwrap();
            assert!(v.iter().all(|&v| v > 0.0 && v >= s.posterior_variance(t)));
        }
    }

    #[test]
    fn unconditional_is_class_mixture() {
        let means = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let model = GaussianClassModel::isotropic(means, 1.0).unwrap();
        let e = model.eps_at(&[0.0, 0.3], 0.5, None).unwrap();
        // symmetric classes: first coordinate cancels, second is the shared isotropic term
        assert!(e[0].abs() < 1e-15);
        assert!((e[1] - 0.5f64.sqrt() * 0.3).abs() < 1e-15);
    }
}
