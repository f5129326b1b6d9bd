//! Spiked population covariance models and synthetic data generation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::eig;
use crate::error::{Error, Result};
use crate::mp_law::AspectRatio;

/// Maximum total spike count; the asymptotic formulas assume fixed small rank.
pub const MAX_RANK: usize = 32;

const LAW_TOL: f64 = 1e-12;

/// Distribution of the (standardized) data-matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntryLaw {
    Gaussian,
    TwoPoint {
        value_hi: f64,
        value_lo: f64,
        prob_hi: f64,
    },
}

impl EntryLaw {
    /// Two-point law with mass `prob_hi` at `value_hi`, validated to have
    /// mean zero and unit variance.
    pub fn two_point(value_hi: f64, value_lo: f64, prob_hi: f64) -> Result<Self> {
        if !(prob_hi > 0.0 && prob_hi < 1.0) {
            return Err(Error::InvalidLaw(format!(
                "prob_hi = {prob_hi} must lie in (0, 1)"
            )));
        }
        let mean = prob_hi * value_hi + (1.0 - prob_hi) * value_lo;
        let var = prob_hi * value_hi * value_hi + (1.0 - prob_hi) * value_lo * value_lo;
        if mean.abs() > LAW_TOL {
            return Err(Error::InvalidLaw(format!("mean {mean} is not zero")));
        }
        if (var - 1.0).abs() > LAW_TOL {
            return Err(Error::InvalidLaw(format!("variance {var} is not one")));
        }
        Ok(EntryLaw::TwoPoint {
            value_hi,
            value_lo,
            prob_hi,
        })
    }

    /// The standardized two-point law `(1/3) at sqrt(2), (2/3) at -1/sqrt(2)`,
    /// whose excess kurtosis is exactly -1.5.
    pub fn two_point_third() -> Self {
        EntryLaw::TwoPoint {
            value_hi: 2.0f64.sqrt(),
            value_lo: -0.5f64.sqrt(),
            prob_hi: 1.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EntryLaw::Gaussian => Ok(()),
            EntryLaw::TwoPoint {
                value_hi,
                value_lo,
                prob_hi,
            } => Self::two_point(*value_hi, *value_lo, *prob_hi).map(|_| ()),
        }
    }

    /// Third and fourth cumulants `(kappa3, kappa4)` of the standardized law.
    pub fn cumulants(&self) -> (f64, f64) {
        match self {
            EntryLaw::Gaussian => (0.0, 0.0),
            EntryLaw::TwoPoint {
                value_hi,
                value_lo,
                prob_hi,
            } => {
                let p = *prob_hi;
                let k3 = p * value_hi.powi(3) + (1.0 - p) * value_lo.powi(3);
                let k4 = p * value_hi.powi(4) + (1.0 - p) * value_lo.powi(4) - 3.0;
                (k3, k4)
            }
        }
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::TwoPoint {
                value_hi,
                value_lo,
                prob_hi,
            } => {
                if rng.gen::<f64>() < *prob_hi {
                    *value_hi
                } else {
                    *value_lo
                }
            }
        }
    }
}

/// One population spike: strength `d > 0` and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub d: f64,
    pub multiplicity: usize,
}

/// Spike directions: the simulation default is the leading standard-basis
/// vectors; arbitrary orthonormal columns are allowed.
#[derive(Debug, Clone)]
pub enum Directions {
    StandardBasis,
    Explicit(Array2<f64>),
}

/// Population description `Sigma = I + sum_i d_i v_i v_i^*`.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    m: usize,
    n: usize,
    spikes: Vec<Spike>,
    directions: Directions,
    law: EntryLaw,
}

impl SpikedModel {
    pub fn new(
        m: usize,
        n: usize,
        spikes: Vec<Spike>,
        directions: Directions,
        law: EntryLaw,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "dimensions must be positive, got M = {m}, N = {n}"
            )));
        }
        law.validate()?;
        let r: usize = spikes.iter().map(|s| s.multiplicity).sum();
        if r == 0 {
            return Err(Error::InvalidConfig("model declares no spikes".into()));
        }
        if r > MAX_RANK || r > m.min(n) {
            return Err(Error::InvalidConfig(format!(
                "total spike multiplicity {r} exceeds the supported rank (max {}, min(M,N) = {})",
                MAX_RANK,
                m.min(n)
            )));
        }
        for s in &spikes {
            if !(s.d > 0.0 && s.d.is_finite()) || s.multiplicity == 0 {
                return Err(Error::InvalidConfig(format!(
                    "invalid spike (d = {}, multiplicity = {})",
                    s.d, s.multiplicity
                )));
            }
        }
        if spikes.windows(2).any(|w| w[0].d < w[1].d) {
            return Err(Error::InvalidConfig(
                "spikes must be sorted in descending strength".into(),
            ));
        }
        if let Directions::Explicit(v) = &directions {
            if v.nrows() != m || v.ncols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "direction matrix is {}x{}, expected {m}x{r}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            check_orthonormal(v.view(), 1e-10)?;
        }
        Ok(SpikedModel {
            m,
            n,
            spikes,
            directions,
            law,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn law(&self) -> &EntryLaw {
        &self.law
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    /// Total spike count (with multiplicity).
    pub fn rank(&self) -> usize {
        self.spikes.iter().map(|s| s.multiplicity).sum()
    }

    /// Spike strengths expanded per index, descending.
    pub fn d_per_index(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rank());
        for s in &self.spikes {
            out.extend(std::iter::repeat(s.d).take(s.multiplicity));
        }
        out
    }

    /// Multiplicity profile, e.g. `[2, 1]` for a double spike above a simple one.
    pub fn multiplicities(&self) -> Vec<usize> {
        self.spikes.iter().map(|s| s.multiplicity).collect()
    }

    /// Realized aspect ratio `y_N = M/N`.
    pub fn aspect(&self) -> Result<AspectRatio> {
        AspectRatio::new(self.m as f64 / self.n as f64)
    }

    /// Direction of spike index `j` (0-based, per-index).
    pub fn direction(&self, j: usize) -> Array1<f64> {
        match &self.directions {
            Directions::StandardBasis => {
                let mut v = Array1::zeros(self.m);
                v[j] = 1.0;
                v
            }
            Directions::Explicit(mat) => mat.column(j).to_owned(),
        }
    }

    /// All spike directions as an `M x r` matrix.
    pub fn directions_matrix(&self) -> Array2<f64> {
        match &self.directions {
            Directions::StandardBasis => {
                let r = self.rank();
                let mut v = Array2::zeros((self.m, r));
                for j in 0..r {
                    v[(j, j)] = 1.0;
                }
                v
            }
            Directions::Explicit(mat) => mat.clone(),
        }
    }

    /// Population covariance, materialized.
    pub fn sigma(&self) -> Array2<f64> {
        let mut s = Array2::eye(self.m);
        for (j, d) in self.d_per_index().into_iter().enumerate() {
            let v = self.direction(j);
            for a in 0..self.m {
                if v[a] == 0.0 {
                    continue;
                }
                for b in 0..self.m {
                    s[(a, b)] += d * v[a] * v[b];
                }
            }
        }
        s
    }

    /// `Sigma^{1/2}` in closed form: `I + sum_i (sqrt(1 + d_i) - 1) v_i v_i^*`.
    pub fn sigma_sqrt(&self) -> Array2<f64> {
        let mut s = Array2::eye(self.m);
        for (j, d) in self.d_per_index().into_iter().enumerate() {
            let c = (1.0 + d).sqrt() - 1.0;
            let v = self.direction(j);
            for a in 0..self.m {
                if v[a] == 0.0 {
                    continue;
                }
                for b in 0..self.m {
                    s[(a, b)] += c * v[a] * v[b];
                }
            }
        }
        s
    }

    /// Draw an `M x N` data matrix with i.i.d. entries of variance `1/N`.
    ///
    /// Entries are filled in row-major order from the provided stream, so the
    /// draw is a pure function of `(model, stream)`.
    pub fn sample_data(&self, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let scale = 1.0 / (self.n as f64).sqrt();
        Array2::from_shape_simple_fn((self.m, self.n), || scale * self.law.draw(rng))
    }

    /// Sample covariance `Q = Sigma^{1/2} X X^* Sigma^{1/2}` as a dense
    /// symmetric matrix. The square root acts as a rank-`r` update of `X`.
    pub fn sample_covariance(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.m || x.ncols() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "data matrix is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                self.m,
                self.n
            )));
        }
        let mut y = x.to_owned();
        for (j, d) in self.d_per_index().into_iter().enumerate() {
            let c = (1.0 + d).sqrt() - 1.0;
            match &self.directions {
                Directions::StandardBasis => {
                    let row = x.row(j).to_owned();
                    let mut yr = y.row_mut(j);
                    yr.scaled_add(c, &row);
                }
                Directions::Explicit(mat) => {
                    let v = mat.column(j);
                    let w = v.dot(&x); // v^T X, length N
                    for (a, va) in v.iter().enumerate() {
                        if *va == 0.0 {
                            continue;
                        }
                        let mut yr = y.row_mut(a);
                        yr.scaled_add(c * *va, &w);
                    }
                }
            }
        }
        eig::gram(y.view())
    }
}

/// Check that the columns of `v` are orthonormal within `tol` (max abs
/// deviation of `V^T V` from the identity). No silent repair is attempted.
pub fn check_orthonormal(v: ArrayView2<'_, f64>, tol: f64) -> Result<()> {
    let g = v.t().dot(&v);
    let k = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    if worst > tol {
        return Err(Error::NotOrthonormal(worst));
    }
    Ok(())
}

/// Max-norm asymmetry of a square matrix relative to its largest entry.
pub fn relative_asymmetry(a: ArrayView2<'_, f64>) -> f64 {
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[(i, j)].abs());
            if j > i {
                asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        asym / scale
    }
}

/// Column-orthonormal matrix with the requested axes of the standard basis
/// (1-based axes, e.g. `[1, 2]` selects `e_1, e_2`).
pub fn basis_columns(m: usize, axes: &[usize]) -> Result<Array2<f64>> {
    let mut z = Array2::zeros((m, axes.len()));
    for (col, &ax) in axes.iter().enumerate() {
        if ax == 0 || ax > m {
            return Err(Error::InvalidConfig(format!(
                "basis axis {ax} is out of range 1..={m}"
            )));
        }
        z[(ax - 1, col)] = 1.0;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};
    use ndarray::Axis as NdAxis;

    fn small_model(law: EntryLaw) -> SpikedModel {
        SpikedModel::new(
            6,
            8,
            vec![
                Spike {
                    d: 5.0,
                    multiplicity: 1,
                },
                Spike {
                    d: 2.0,
                    multiplicity: 2,
                },
            ],
            Directions::StandardBasis,
            law,
        )
        .unwrap()
    }

    #[test]
    fn cumulants_gaussian_and_two_point() {
        assert_eq!(EntryLaw::Gaussian.cumulants(), (0.0, 0.0));
        let law = EntryLaw::two_point_third();
        let (k3, k4) = law.cumulants();
        assert!((k4 - (-1.5)).abs() < 1e-14);
        assert!((k3 - 2.0f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_validation() {
        assert!(EntryLaw::two_point(1.0, -1.0, 0.4).is_err()); // mean != 0
        assert!(EntryLaw::two_point(2.0, -2.0, 0.5).is_err()); // var != 1
        assert!(EntryLaw::two_point(1.0, -1.0, 0.5).is_ok());
    }

    #[test]
    fn empirical_cumulants_match() {
        for law in [EntryLaw::Gaussian, EntryLaw::two_point_third()] {
            let (k3, k4) = law.cumulants();
            let mut rng = substream(99, StreamPurpose::Generic, 0);
            let n = 1_000_000usize;
            let (mut s3, mut s4, mut s3sq, mut s4sq) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let x = law.draw(&mut rng);
                let (x3, x4) = (x * x * x, x * x * x * x);
                s3 += x3;
                s4 += x4;
                s3sq += x3 * x3;
                s4sq += x4 * x4;
            }
            let nf = n as f64;
            let m3 = s3 / nf;
            let m4 = s4 / nf;
            let se3 = ((s3sq / nf - m3 * m3) / nf).sqrt();
            let se4 = ((s4sq / nf - m4 * m4) / nf).sqrt();
            assert!((m3 - k3).abs() < 5.0 * se3, "kappa3 off: {m3} vs {k3}");
            assert!((m4 - 3.0 - k4).abs() < 5.0 * se4, "kappa4 off: {} vs {k4}", m4 - 3.0);
        }
    }

    #[test]
    fn sample_data_moments_and_determinism() {
        let model = SpikedModel::new(
            500,
            500,
            vec![Spike {
                d: 1.0,
                multiplicity: 1,
            }],
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x1 = model.sample_data(&mut substream(7, StreamPurpose::Data, 0));
        let x2 = model.sample_data(&mut substream(7, StreamPurpose::Data, 0));
        assert_eq!(x1, x2, "same stream must give bit-identical matrices");

        let mn = (500 * 500) as f64;
        let mean = x1.sum() / mn;
        assert!(mean.abs() < 4.0 / mn.sqrt(), "entry mean {mean} too large");
        let second = x1.iter().map(|v| v * v).sum::<f64>() / mn * 500.0;
        assert!(
            (second - 1.0).abs() < 4.0 * (2.0 / mn).sqrt(),
            "scaled second moment {second} off"
        );
    }

    #[test]
    fn covariance_identity_data() {
        // X = I (square): Q = Sigma exactly
        let model = small_model(EntryLaw::Gaussian);
        let model_sq = SpikedModel::new(
            6,
            6,
            model.spikes.clone(),
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = Array2::eye(6);
        let q = model_sq.sample_covariance(x.view()).unwrap();
        let sigma = model_sq.sigma();
        let err = (&q - &sigma).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12, "Q != Sigma for identity data: {err}");
        assert!(relative_asymmetry(q.view()) < 1e-12);
    }

    #[test]
    fn covariance_no_spikes_is_gram() {
        // With all d -> 0 this degenerates to X X^T; emulate via tiny d.
        let model = SpikedModel::new(
            5,
            7,
            vec![Spike {
                d: 1e-15,
                multiplicity: 1,
            }],
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = model.sample_data(&mut substream(3, StreamPurpose::Data, 1));
        let q = model.sample_covariance(x.view()).unwrap();
        let naive = x.dot(&x.t());
        let err = (&q - &naive).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12);
    }

    #[test]
    fn sigma_sqrt_squares_to_sigma() {
        let model = small_model(EntryLaw::two_point_third());
        let s = model.sigma();
        let sq = model.sigma_sqrt();
        let err = (&sq.dot(&sq) - &s).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10);

        // explicit rotated directions too
        let mut v = Array2::zeros((6, 3));
        let c = 0.6f64;
        let s_ = 0.8f64;
        v[(0, 0)] = c;
        v[(3, 0)] = s_;
        v[(1, 1)] = 1.0;
        v[(2, 2)] = 1.0;
        let model = SpikedModel::new(
            6,
            8,
            vec![
                Spike {
                    d: 4.0,
                    multiplicity: 1,
                },
                Spike {
                    d: 2.0,
                    multiplicity: 2,
                },
            ],
            Directions::Explicit(v),
            EntryLaw::Gaussian,
        )
        .unwrap();
        let s = model.sigma();
        let sq = model.sigma_sqrt();
        let err = (&sq.dot(&sq) - &s).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10);
    }

    #[test]
    fn explicit_covariance_matches_dense_route() {
        let mut v = Array2::zeros((6, 2));
        v[(0, 0)] = 1.0 / 2f64.sqrt();
        v[(4, 0)] = 1.0 / 2f64.sqrt();
        v[(1, 1)] = 1.0;
        let model = SpikedModel::new(
            6,
            9,
            vec![
                Spike {
                    d: 3.0,
                    multiplicity: 1,
                },
                Spike {
                    d: 1.5,
                    multiplicity: 1,
                },
            ],
            Directions::Explicit(v),
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = model.sample_data(&mut substream(5, StreamPurpose::Data, 2));
        let q = model.sample_covariance(x.view()).unwrap();
        let dense = model.sigma_sqrt().dot(&x).dot(&x.t()).dot(&model.sigma_sqrt());
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (&q - &dense).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn rejects_bad_directions() {
        let mut v = Array2::zeros((4, 2));
        v[(0, 0)] = 1.0;
        v[(0, 1)] = 1.0; // not orthogonal
        let r = SpikedModel::new(
            4,
            4,
            vec![
                Spike {
                    d: 2.0,
                    multiplicity: 1,
                },
                Spike {
                    d: 1.0,
                    multiplicity: 1,
                },
            ],
            Directions::Explicit(v),
            EntryLaw::Gaussian,
        );
        assert!(matches!(r, Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn rejects_unsorted_or_oversized() {
        let spikes = vec![
            Spike {
                d: 1.0,
                multiplicity: 1,
            },
            Spike {
                d: 2.0,
                multiplicity: 1,
            },
        ];
        assert!(SpikedModel::new(4, 4, spikes, Directions::StandardBasis, EntryLaw::Gaussian).is_err());
        let spikes = vec![Spike {
            d: 1.0,
            multiplicity: 40,
        }];
        assert!(SpikedModel::new(64, 64, spikes, Directions::StandardBasis, EntryLaw::Gaussian).is_err());
    }

    #[test]
    fn two_identical_seeds_same_covariance() {
        let model = small_model(EntryLaw::two_point_third());
        let xa = model.sample_data(&mut substream(11, StreamPurpose::Data, 4));
        let xb = model.sample_data(&mut substream(11, StreamPurpose::Data, 4));
        let qa = model.sample_covariance(xa.view()).unwrap();
        let qb = model.sample_covariance(xb.view()).unwrap();
        assert_eq!(
            qa.index_axis(NdAxis(0), 0),
            qb.index_axis(NdAxis(0), 0)
        );
        assert_eq!(qa, qb);
    }
}
