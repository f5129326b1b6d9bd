//! Symmetric eigendecomposition, spectral projectors, and plug-in spike
//! estimation from the leading sample eigenvalues.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::eig;
use crate::error::{Error, Result};
use crate::mp_law::{self, AspectRatio};
use crate::model::relative_asymmetry;
use crate::tol::Tolerances;

/// Descending eigenvalues and aligned orthonormal eigenvectors of a sample
/// covariance matrix, together with the realized aspect ratio.
#[derive(Debug, Clone)]
pub struct SampleSpectrum {
    eigenvalues: Vec<f64>,
    /// `dim x k` matrix; column `i` pairs with `eigenvalues[i]`.
    vectors: Array2<f64>,
    dim: usize,
    n_samples: usize,
}

impl SampleSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.column(i)
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    /// Number of eigenpairs with retained eigenvectors.
    pub fn k_vectors(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Realized aspect ratio `y_N = M/N`.
    pub fn aspect(&self) -> AspectRatio {
        AspectRatio::new(self.dim as f64 / self.n_samples as f64).expect("dims are positive")
    }

    /// Write one row per retained eigenpair: `index,mu,xi_1,...,xi_M`.
    /// Debug format, not stability-guaranteed.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        use crate::harness::csvio::fmt_g17;
        for i in 0..self.k_vectors() {
            let mut row = vec![format!("{}", i + 1), fmt_g17(self.eigenvalues[i])];
            row.extend(self.vector(i).iter().map(|v| fmt_g17(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn canonicalize_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

fn build_spectrum(
    q: ArrayView2<'_, f64>,
    n_samples: usize,
    pairs: eig::EigPairs,
    tol: &Tolerances,
) -> Result<SampleSpectrum> {
    let dim = q.nrows();
    let k = pairs.values.len();
    // dsyevr returns ascending; flip to descending
    let eigenvalues: Vec<f64> = pairs.values.iter().rev().copied().collect();
    let mut vectors = Array2::zeros((dim, k));
    for j in 0..k {
        vectors.column_mut(j).assign(&pairs.vectors.column(k - 1 - j));
    }
    canonicalize_signs(&mut vectors);

    // residual and orthonormality guards
    let op_norm = eigenvalues
        .first()
        .map(|v| v.abs())
        .unwrap_or(0.0)
        .max(eigenvalues.last().map(|v| v.abs()).unwrap_or(0.0))
        .max(1e-300);
    for j in 0..k {
        let col = vectors.column(j).to_owned();
        let resid = &q.dot(&col) - &col.mapv(|v| v * eigenvalues[j]);
        let rn = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rn > 1e-8 * op_norm * (dim as f64).sqrt() {
            return Err(Error::Eigensolver(format!(
                "residual {rn:.3e} too large for eigenpair {j}"
            )));
        }
    }
    let gram = vectors.t().dot(&vectors);
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - target).abs() > 1e-8 {
                return Err(Error::Eigensolver(format!(
                    "eigenvectors not orthonormal at ({i},{j}): {}",
                    gram[(i, j)]
                )));
            }
        }
    }
    Ok(SampleSpectrum {
        eigenvalues,
        vectors,
        dim,
        n_samples,
    })
}

fn check_symmetric(q: ArrayView2<'_, f64>, tol: &Tolerances) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let asym = relative_asymmetry(q);
    if asym > tol.symmetry_tol {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full eigendecomposition; retains the `min(M, N)` leading pairs (the rest
/// of the sample-covariance spectrum is exactly zero when `M > N`).
pub fn sym_eig(q: ArrayView2<'_, f64>, n_samples: usize, tol: &Tolerances) -> Result<SampleSpectrum> {
    check_symmetric(q, tol)?;
    let keep = q.nrows().min(n_samples);
    let pairs = if keep == q.nrows() {
        eig::sym_eig_all(q)?
    } else {
        eig::sym_eig_top_k(q, keep)?
    };
    build_spectrum(q, n_samples, pairs, tol)
}

/// Top-`k` eigendecomposition for the leading sample eigenpairs.
pub fn sym_eig_top(
    q: ArrayView2<'_, f64>,
    n_samples: usize,
    k: usize,
    tol: &Tolerances,
) -> Result<SampleSpectrum> {
    check_symmetric(q, tol)?;
    let k = k.min(q.nrows()).min(n_samples);
    let pairs = eig::sym_eig_top_k(q, k)?;
    build_spectrum(q, n_samples, pairs, tol)
}

/// Squared projection mass `<w, P_I w> = sum_{t in I} <w, xi_t>^2` of a unit
/// direction on the sample eigenspace indexed by `I` (0-based).
pub fn generalized_component(
    spectrum: &SampleSpectrum,
    indices: &[usize],
    w: ArrayView1<'_, f64>,
    tol: &Tolerances,
) -> Result<f64> {
    if w.len() != spectrum.dim() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, expected {}",
            w.len(),
            spectrum.dim()
        )));
    }
    let norm = w.dot(&w).sqrt();
    if (norm - 1.0).abs() > tol.unit_norm_tol {
        return Err(Error::InvalidHypothesis(format!(
            "projection direction is not unit (norm = {norm})"
        )));
    }
    let mut acc = 0.0;
    for &t in indices {
        if t >= spectrum.k_vectors() {
            return Err(Error::DimensionMismatch(format!(
                "eigenvector index {t} out of retained range {}",
                spectrum.k_vectors()
            )));
        }
        let c = spectrum.vector(t).dot(&w);
        acc += c * c;
    }
    Ok(acc)
}

/// Grouping of the leading eigenvalue indices into multiplicity groups.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikePartition {
    groups: Vec<Vec<usize>>,
}

impl SpikePartition {
    /// Build from explicit groups; they must be disjoint, sorted, and cover
    /// `0..r_total` contiguously.
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut expected = 0usize;
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidConfig("empty spike group".into()));
            }
            for &i in g {
                if i != expected {
                    return Err(Error::InvalidConfig(format!(
                        "spike groups must cover indices contiguously: expected {expected}, got {i}"
                    )));
                }
                expected += 1;
            }
        }
        if groups.is_empty() {
            return Err(Error::InvalidConfig("partition has no groups".into()));
        }
        Ok(SpikePartition { groups })
    }

    /// Partition induced by declared multiplicities, e.g. `[2, 1]` gives
    /// groups `{0, 1}, {2}`.
    pub fn from_multiplicities(mults: &[usize]) -> Result<Self> {
        let mut groups = Vec::with_capacity(mults.len());
        let mut next = 0usize;
        for &m in mults {
            if m == 0 {
                return Err(Error::InvalidConfig("zero multiplicity".into()));
            }
            groups.push((next..next + m).collect());
            next += m;
        }
        SpikePartition::new(groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Total number of leading indices covered.
    pub fn index_count(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// Group id containing index `i`.
    pub fn group_of(&self, i: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&i))
    }
}

/// Spike estimate shared by one multiplicity group.
#[derive(Debug, Clone)]
pub struct GroupEstimate {
    pub indices: Vec<usize>,
    /// Group-mean outlier location (estimates the limiting location).
    pub theta_hat: f64,
    /// Shrinkage estimate of the population spike.
    pub d_hat: f64,
}

/// Plug-in spike estimation: a singleton group maps its eigenvalue through
/// the shrinker; a multiple group shrinks the group-mean eigenvalue.
pub fn estimate_spikes(
    spectrum: &SampleSpectrum,
    partition: &SpikePartition,
    tol: &Tolerances,
) -> Result<Vec<GroupEstimate>> {
    let y = spectrum.aspect();
    let edges = mp_law::spectral_edges(y);
    let guard = tol.edge_guard(edges.lambda_plus);
    let mut out = Vec::with_capacity(partition.groups().len());
    for g in partition.groups() {
        let mut sum = 0.0;
        for &i in g {
            if i >= spectrum.eigenvalues().len() {
                return Err(Error::DimensionMismatch(format!(
                    "partition index {i} beyond retained spectrum"
                )));
            }
            let mu = spectrum.eigenvalue(i);
            if mu - edges.lambda_plus <= guard {
                return Err(Error::Subcritical {
                    what: "mu - lambda_plus",
                    value: mu - edges.lambda_plus,
                    threshold: guard,
                });
            }
            sum += mu;
        }
        let theta_hat = sum / g.len() as f64;
        let d_hat = mp_law::gamma_shrink(theta_hat, y, tol)?;
        out.push(GroupEstimate {
            indices: g.clone(),
            theta_hat,
            d_hat,
        });
    }
    Ok(out)
}

/// Per-index spike estimates expanded from group estimates, aligned with the
/// leading eigenvalue indices `0..r_total`.
pub fn d_hat_per_index(estimates: &[GroupEstimate]) -> Vec<f64> {
    let total: usize = estimates.iter().map(|e| e.indices.len()).sum();
    let mut out = vec![0.0; total];
    for e in estimates {
        for &i in &e.indices {
            out[i] = e.d_hat;
        }
    }
    out
}

/// Heuristic grouping of the leading `r_star` eigenvalues: consecutive
/// eigenvalues are merged when their gap in shrunk coordinates falls below
/// `gap_factor * sqrt(d) * (d - sqrt(y))^{-1/2} * N^{-1/2 + gap_delta}`.
///
/// A user-declared partition always takes precedence over this heuristic.
pub fn auto_partition(
    spectrum: &SampleSpectrum,
    r_star: usize,
    tol: &Tolerances,
) -> Result<SpikePartition> {
    if r_star == 0 || r_star > spectrum.eigenvalues().len() {
        return Err(Error::InvalidConfig(format!(
            "r_star = {r_star} out of range for retained spectrum"
        )));
    }
    let y = spectrum.aspect();
    let n = spectrum.n_samples() as f64;
    let shrunk: Vec<f64> = (0..r_star)
        .map(|i| mp_law::gamma_shrink(spectrum.eigenvalue(i), y, tol))
        .collect::<Result<_>>()?;
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for t in 1..r_star {
        let d_prev = shrunk[t - 1];
        let scale = tol.gap_factor
            * d_prev.sqrt()
            * (d_prev - y.sqrt()).powf(-0.5)
            * n.powf(-0.5 + tol.gap_delta);
        if (shrunk[t - 1] - shrunk[t]).abs() < scale {
            groups.last_mut().unwrap().push(t);
        } else {
            groups.push(vec![t]);
        }
    }
    SpikePartition::new(groups)
}

/// Flag hinting at undeclared spikes: the first eigenvalue past `r_star`
/// pokes above the bulk edge by more than the edge fluctuation scale.
/// `None` when that eigenvalue was not retained.
pub fn extra_spike_warning(spectrum: &SampleSpectrum, r_star: usize) -> Option<bool> {
    let mu_next = spectrum.eigenvalues().get(r_star)?;
    let y = spectrum.aspect();
    let edges = mp_law::spectral_edges(y);
    let n = spectrum.n_samples() as f64;
    Some(*mu_next > edges.lambda_plus + n.powf(-2.0 / 3.0 + 0.1))
}
