//! Closed-form asymptotic covariances for outlier eigenvalues and
//! eigenvector projections: the leakage vectors, the fluctuation covariance
//! blocks, the variance of the eigenspace-equality statistic, and the
//! chi-square-mixture law of the orthogonality statistic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eig;
use crate::error::{Error, Result};
use crate::mp_law::{self, AspectRatio, AuxFuncs};
use crate::tol::Tolerances;

/// A symmetric limit covariance with named coordinates, so cross-module
/// wiring cannot silently permute blocks.
#[derive(Debug, Clone)]
pub struct LimitCovariance {
    labels: Vec<String>,
    mat: Array2<f64>,
}

impl LimitCovariance {
    pub fn new(labels: Vec<String>, mat: Array2<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || labels.len() != mat.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{} with {} labels",
                mat.nrows(),
                mat.ncols(),
                labels.len()
            )));
        }
        let scale = mat.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..mat.nrows() {
            for j in (i + 1)..mat.ncols() {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Internal(format!(
                        "covariance asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(LimitCovariance { labels, mat })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.mat.view()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// Position of a named coordinate.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Smallest eigenvalue, after checking it clears the PSD floor
    /// `-psd_floor_rel * trace`.
    pub fn check_psd(&self, tol: &Tolerances) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let vals = eig::sym_eigvals(self.mat.view())?;
        let min_eig = vals[0];
        let trace: f64 = (0..self.dim()).map(|i| self.mat[(i, i)]).sum();
        let floor = -tol.psd_floor_rel * trace.abs().max(1e-300);
        if min_eig < floor {
            return Err(Error::NotPsd { min_eig, floor });
        }
        Ok(min_eig)
    }

    /// Labeled CSV: header row of coordinate names, then the matrix.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        use crate::harness::csvio::fmt_g17;
        writeln!(w, "{}", self.labels.join(","))?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim()).map(|j| fmt_g17(self.mat[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Read back a labeled CSV produced by [`write_csv`].
    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv {
                line: 1,
                field: 1,
                message: "empty covariance file".into(),
            })??;
        let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let dim = labels.len();
        let mut mat = Array2::zeros((dim, dim));
        for (i, line) in lines.enumerate() {
            let line = line?;
            if i >= dim {
                return Err(Error::Csv {
                    line: i + 2,
                    field: 1,
                    message: "too many rows".into(),
                });
            }
            for (j, tok) in line.split(',').enumerate() {
                if j >= dim {
                    return Err(Error::Csv {
                        line: i + 2,
                        field: j + 1,
                        message: "too many fields".into(),
                    });
                }
                mat[(i, j)] = tok.trim().parse::<f64>().map_err(|e| Error::Csv {
                    line: i + 2,
                    field: j + 1,
                    message: e.to_string(),
                })?;
            }
        }
        LimitCovariance::new(labels, mat)
    }
}

/// Power-weighted coordinate sum `sum_m prod_i v_i(m)^{k_i}`.
pub fn moment_sum(pattern: &[u32], vectors: &[ArrayView1<'_, f64>]) -> Result<f64> {
    if pattern.len() != vectors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} exponents for {} vectors",
            pattern.len(),
            vectors.len()
        )));
    }
    let m = match vectors.first() {
        Some(v) => v.len(),
        None => return Ok(0.0),
    };
    if vectors.iter().any(|v| v.len() != m) {
        return Err(Error::DimensionMismatch(
            "moment-sum vectors must share one length".into(),
        ));
    }
    let mut acc = 0.0;
    for idx in 0..m {
        let mut term = 1.0;
        for (v, &k) in vectors.iter().zip(pattern) {
            term *= v[idx].powi(k as i32);
        }
        acc += term;
    }
    Ok(acc)
}

fn s4(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().map(|x| x * x * x * x).sum()
}

fn s22(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * x * y * y).sum()
}

fn s13(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    // sum a(m) b(m)^3
    a.iter().zip(b).map(|(x, y)| x * y * y * y).sum()
}

fn s112(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, c: ArrayView1<'_, f64>) -> f64 {
    // sum a(m) b(m) c(m)^2
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| x * y * z * z)
        .sum()
}

fn s1111(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    c: ArrayView1<'_, f64>,
    d: ArrayView1<'_, f64>,
) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .zip(d)
        .map(|(((x, y), z), t)| x * y * z * t)
        .sum()
}

/// One spike with a known direction.
#[derive(Debug, Clone)]
pub struct SpikeDir {
    pub d: f64,
    pub v: Array1<f64>,
}

/// Weighted leakage vector of a direction `w` off the spike group of `d_i`:
/// explicit terms over the other known spikes plus the closed-form bulk
/// remainder (weight one on the residual of `w`).
#[derive(Debug, Clone)]
pub struct VarsigmaVector {
    pub vec: Array1<f64>,
    pub norm: f64,
}

impl VarsigmaVector {
    /// Unit version, or the zero vector when the leakage vanishes.
    pub fn normalized(&self) -> Array1<f64> {
        if self.norm == 0.0 {
            Array1::zeros(self.vec.len())
        } else {
            &self.vec / self.norm
        }
    }
}

const COINCIDENT_REL: f64 = 1e-12;

/// Assemble the leakage vector for target spike `d_i`.
///
/// `spikes` lists every spike whose direction is known; `skip` marks the
/// indices belonging to the multiplicity group of `d_i` (excluded from the
/// weighted sum but still projected out of the bulk remainder). Spikes that
/// coincide with `d_i` outside `skip` must not overlap with `w`; the
/// convention 0/0 = 0 applies when they are orthogonal to `w`.
pub fn varsigma(
    spikes: &[SpikeDir],
    skip: &[usize],
    d_i: f64,
    w: ArrayView1<'_, f64>,
    tol: &Tolerances,
) -> Result<VarsigmaVector> {
    let m = w.len();
    let mut out = w.to_owned();
    let mut weighted = Array1::<f64>::zeros(m);
    for (j, s) in spikes.iter().enumerate() {
        if s.v.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "spike direction {j} has length {}, expected {m}",
                s.v.len()
            )));
        }
        let overlap = s.v.dot(&w);
        // bulk remainder: project out every known spike direction
        out.scaled_add(-overlap, &s.v);
        if skip.contains(&j) {
            continue;
        }
        if (s.d - d_i).abs() <= COINCIDENT_REL * d_i.abs().max(1.0) {
            if overlap.abs() <= tol.unit_norm_tol {
                continue; // 0/0 convention
            }
            return Err(Error::OverlappingSpikes {
                i: usize::MAX,
                j,
                di: d_i,
                dj: s.d,
            });
        }
        let weight = d_i * (s.d + 1.0).sqrt() / (d_i - s.d);
        weighted.scaled_add(weight * overlap, &s.v);
    }
    out += &weighted;
    let norm = out.dot(&out).sqrt();
    Ok(VarsigmaVector { vec: out, norm })
}

/// Inputs shared by the covariance constructions for one multiplicity group.
#[derive(Debug)]
pub struct GroupContext<'a> {
    /// All spike strengths, descending per index.
    pub d_all: &'a [f64],
    /// All spike directions, one column per index.
    pub dirs: ArrayView2<'a, f64>,
    /// Indices of the multiplicity group under study.
    pub group: &'a [usize],
    pub y: AspectRatio,
    pub kappa4: f64,
}

impl<'a> GroupContext<'a> {
    fn validate(&self) -> Result<f64> {
        let r = self.d_all.len();
        if self.dirs.ncols() != r {
            return Err(Error::DimensionMismatch(format!(
                "{} directions for {r} spikes",
                self.dirs.ncols()
            )));
        }
        if self.group.is_empty() || self.group.iter().any(|&t| t >= r) {
            return Err(Error::InvalidConfig("invalid multiplicity group".into()));
        }
        let d_i = self.d_all[self.group[0]];
        if self
            .group
            .iter()
            .any(|&t| (self.d_all[t] - d_i).abs() > COINCIDENT_REL * d_i.max(1.0))
        {
            return Err(Error::InvalidConfig(
                "group members carry unequal spike values".into(),
            ));
        }
        Ok(d_i)
    }

    fn complement(&self) -> Vec<usize> {
        (0..self.d_all.len())
            .filter(|t| !self.group.contains(t))
            .collect()
    }

    fn spike_dirs(&self) -> Vec<SpikeDir> {
        (0..self.d_all.len())
            .map(|j| SpikeDir {
                d: self.d_all[j],
                v: self.dirs.column(j).to_owned(),
            })
            .collect()
    }
}

/// Result of [`cov_ab`]: the Gaussian-part and cumulant-part covariance
/// blocks for the fluctuation vector `(Theta, Lambda, {Delta_t}, {Pi_j})`.
pub struct AbCovariances {
    pub a: LimitCovariance,
    pub b: LimitCovariance,
    /// Squared norm of the projection of `w` on the group span.
    pub w_proj_norm: f64,
    /// Leakage vector of `w`.
    pub sigma: VarsigmaVector,
}

fn ab_labels(group: &[usize], comp: &[usize]) -> Vec<String> {
    let mut labels = vec!["w_I".to_string(), "varsigma_I".to_string()];
    labels.extend(group.iter().map(|t| format!("v{}", t + 1)));
    labels.extend(comp.iter().map(|j| format!("v{}", j + 1)));
    labels
}

/// Covariance blocks of the limiting Gaussian vector indexed by
/// `(w_I, varsigma_I, {v_t}_{t in I}, {v_j}_{j not in I})`.
pub fn cov_ab(ctx: &GroupContext<'_>, w: ArrayView1<'_, f64>, tol: &Tolerances) -> Result<AbCovariances> {
    let d_i = ctx.validate()?;
    let aux = mp_law::aux_funcs(d_i, ctx.y, tol)?;
    let AuxFuncs { f, g, h, l } = aux;
    let norm = w.dot(&w).sqrt();
    if (norm - 1.0).abs() > tol.unit_norm_tol {
        return Err(Error::InvalidHypothesis(format!(
            "projection direction is not unit (norm = {norm})"
        )));
    }
    let comp = ctx.complement();
    let spikes = ctx.spike_dirs();

    // projection of w on the group span
    let mut w_proj = Array1::<f64>::zeros(w.len());
    for &t in ctx.group {
        let c = ctx.dirs.column(t).dot(&w);
        w_proj.scaled_add(c, &ctx.dirs.column(t));
    }
    let wn2 = w_proj.dot(&w_proj);
    let sigma = varsigma(&spikes, ctx.group, d_i, w, tol)?;
    let sig0 = sigma.normalized();

    let k = ctx.group.len();
    let dim = 2 + ctx.d_all.len();
    let labels = ab_labels(ctx.group, &comp);

    let mut a = Array2::<f64>::zeros((dim, dim));
    let mut b = Array2::<f64>::zeros((dim, dim));
    let sqrt_h = h.sqrt();

    a[(0, 0)] = 2.0 * ctx.y.get() * h * h * (1.0 + ctx.y.get() * h * h) * wn2 * wn2;
    a[(1, 1)] = g * g * wn2;
    b[(0, 0)] = f * f * s4(w_proj.view());
    b[(1, 1)] = g * g * s22(sig0.view(), w_proj.view());
    b[(0, 1)] = f * g * s13(sig0.view(), w_proj.view());
    b[(1, 0)] = b[(0, 1)];

    for (a_pos, &t) in ctx.group.iter().enumerate() {
        let row = 2 + a_pos;
        let v_t = ctx.dirs.column(t);
        let overlap = w_proj.dot(&v_t);
        a[(row, row)] = h;
        a[(1, row)] = g * sqrt_h * overlap;
        a[(row, 1)] = a[(1, row)];
        b[(0, row)] = f * sqrt_h * s112(v_t, sig0.view(), w_proj.view());
        b[(row, 0)] = b[(0, row)];
        b[(1, row)] = g * sqrt_h * s112(v_t, w_proj.view(), sig0.view());
        b[(row, 1)] = b[(1, row)];
        for (a2_pos, &t2) in ctx.group.iter().enumerate() {
            let row2 = 2 + a2_pos;
            let val = h * s112(v_t, ctx.dirs.column(t2), sig0.view());
            b[(row, row2)] = val;
        }
    }

    for (b_pos, &j) in comp.iter().enumerate() {
        let row = 2 + k + b_pos;
        let v_j = ctx.dirs.column(j);
        let sig_overlap = sig0.dot(&v_j);
        a[(row, row)] = l * l * wn2;
        a[(1, row)] = g * l * sig_overlap * wn2;
        a[(row, 1)] = a[(1, row)];
        b[(0, row)] = f * l * s13(v_j, w_proj.view());
        b[(row, 0)] = b[(0, row)];
        b[(1, row)] = g * l * s112(v_j, sig0.view(), w_proj.view());
        b[(row, 1)] = b[(1, row)];
        for (b2_pos, &j2) in comp.iter().enumerate() {
            let row2 = 2 + k + b2_pos;
            let val = l * l * s112(v_j, ctx.dirs.column(j2), w_proj.view());
            b[(row, row2)] = val;
        }
        for (a_pos, &t) in ctx.group.iter().enumerate() {
            let trow = 2 + a_pos;
            let v_t = ctx.dirs.column(t);
            a[(trow, row)] = sqrt_h * l * w_proj.dot(&v_t) * sig_overlap;
            a[(row, trow)] = a[(trow, row)];
            let val = sqrt_h * l * s1111(v_t, v_j, w_proj.view(), sig0.view());
            b[(trow, row)] = val;
            b[(row, trow)] = val;
        }
    }

    Ok(AbCovariances {
        a: LimitCovariance::new(labels.clone(), a)?,
        b: LimitCovariance::new(labels, b)?,
        w_proj_norm: wn2.sqrt(),
        sigma,
    })
}

/// Combine the two blocks of [`cov_ab`] into the full fluctuation covariance
/// `A + kappa4 (d^2 - y)/d^2 B`.
pub fn combine_ab(ab: &AbCovariances, d_i: f64, y: AspectRatio, kappa4: f64) -> Result<LimitCovariance> {
    let w = kappa4 * (d_i * d_i - y.get()) / (d_i * d_i);
    let mat = &ab.a.matrix() + &(ab.b.matrix().to_owned() * w);
    LimitCovariance::new(ab.a.labels().to_vec(), mat)
}

/// Joint covariance of the scaled location fluctuations of one multiplicity
/// group (upper-triangular entries of the group matrix) together with the
/// fluctuation vector of [`cov_ab`].
///
/// Coordinates: `phi_{s}{t}` for `s <= t` in the group, then the
/// `(w_I, varsigma_I, v_t, v_j)` block.
pub fn cov_c_joint(ctx: &GroupContext<'_>, w: ArrayView1<'_, f64>, tol: &Tolerances) -> Result<LimitCovariance> {
    let d_i = ctx.validate()?;
    let ab = cov_ab(ctx, w, tol)?;
    let rest = combine_ab(&ab, d_i, ctx.y, ctx.kappa4)?;
    let aux = mp_law::aux_funcs(d_i, ctx.y, tol)?;
    let yv = ctx.y.get();
    let p = 1.0 + 1.0 / d_i;
    let kw = ctx.kappa4 * (1.0 - yv / (d_i * d_i));
    let sig0 = ab.sigma.normalized();

    // group-span projection of w, reused in the Phi-Theta row
    let mut w_proj = Array1::<f64>::zeros(w.len());
    for &t in ctx.group {
        let c = ctx.dirs.column(t).dot(&w);
        w_proj.scaled_add(c, &ctx.dirs.column(t));
    }

    let pairs: Vec<(usize, usize)> = {
        let mut v = Vec::new();
        for (a, &s) in ctx.group.iter().enumerate() {
            for &t in &ctx.group[a..] {
                v.push((s, t));
            }
        }
        v
    };
    let np = pairs.len();
    let dim = np + rest.dim();
    let mut mat = Array2::<f64>::zeros((dim, dim));
    let mut labels: Vec<String> = pairs
        .iter()
        .map(|(s, t)| {
            if s == t && ctx.group.len() == 1 {
                format!("phi_{}", s + 1)
            } else {
                format!("phi_{}_{}", s + 1, t + 1)
            }
        })
        .collect();
    labels.extend(rest.labels().iter().cloned());

    // Phi-Phi block
    for (pi, &(l1, k1)) in pairs.iter().enumerate() {
        for (pj, &(l2, k2)) in pairs.iter().enumerate() {
            let mut val = kw
                * p
                * p
                * s1111(
                    ctx.dirs.column(l1),
                    ctx.dirs.column(k1),
                    ctx.dirs.column(l2),
                    ctx.dirs.column(k2),
                );
            if (l1, k1) == (l2, k2) {
                let diag_boost = if l1 == k1 { 2.0 } else { 1.0 };
                val += diag_boost * p * p;
            }
            mat[(pi, pj)] = val;
        }
    }

    // Phi rows against the (w_I, varsigma_I, v_t, v_j) block
    let comp = ctx.complement();
    for (pi, &(lq, kq)) in pairs.iter().enumerate() {
        let v_l = ctx.dirs.column(lq);
        let v_k = ctx.dirs.column(kq);
        // Theta (w_I)
        mat[(pi, np)] = 2.0 * yv * aux.h * aux.h * p * w_proj.dot(&v_l) * w_proj.dot(&v_k)
            + kw * p * aux.f * s112(v_l, v_k, w_proj.view());
        // Lambda (varsigma_I)
        mat[(pi, np + 1)] = kw * p * aux.g * s1111(v_l, v_k, sig0.view(), w_proj.view());
        // Delta_t
        for (a_pos, &t) in ctx.group.iter().enumerate() {
            mat[(pi, np + 2 + a_pos)] =
                kw * p * aux.h.sqrt() * s1111(v_l, v_k, ctx.dirs.column(t), sig0.view());
        }
        // Pi_j
        for (b_pos, &j) in comp.iter().enumerate() {
            mat[(pi, np + 2 + ctx.group.len() + b_pos)] =
                kw * p * aux.l * s1111(v_l, v_k, ctx.dirs.column(j), w_proj.view());
        }
        for c in np..dim {
            mat[(c, pi)] = mat[(pi, c)];
        }
    }

    for i in 0..rest.dim() {
        for j in 0..rest.dim() {
            mat[(np + i, np + j)] = rest.entry(i, j);
        }
    }
    LimitCovariance::new(labels, mat)
}

/// Variance description of the eigenspace-equality statistic: weight vector,
/// the location/projection covariance it contracts, and the scalar value.
#[derive(Debug, Clone)]
pub struct V1Spec {
    pub alpha: Vec<f64>,
    pub cov: LimitCovariance,
    pub value: f64,
}

/// Per-index construction of the statistic variance over the target set.
///
/// `d_per_index` lists the (estimated) spike of every target index in eigen
/// order; indices of one multiplicity group simply repeat the shared value.
/// `s22_overlaps[(a, b)]` holds `s_{2,2}(u_a, u_b)` for the hypothesis basis
/// paired with the target indices; it is required when `kappa4 != 0`.
pub fn v1(
    d_per_index: &[f64],
    y: AspectRatio,
    kappa4: f64,
    s22_overlaps: Option<ArrayView2<'_, f64>>,
    tol: &Tolerances,
) -> Result<V1Spec> {
    let r_star = d_per_index.len();
    if r_star == 0 {
        return Err(Error::InvalidConfig("empty target set".into()));
    }
    if kappa4 != 0.0 && s22_overlaps.is_none() {
        return Err(Error::MissingDirections(
            "fourth-cumulant terms in the statistic variance need the s_{2,2} overlaps of the hypothesis basis".into(),
        ));
    }
    if let Some(s) = s22_overlaps {
        if s.nrows() != r_star || s.ncols() != r_star {
            return Err(Error::DimensionMismatch(format!(
                "s22 table is {}x{}, expected {r_star}x{r_star}",
                s.nrows(),
                s.ncols()
            )));
        }
    }
    let yv = y.get();
    let mut aux = Vec::with_capacity(r_star);
    for &d in d_per_index {
        aux.push(mp_law::aux_funcs(d, y, tol)?);
    }
    let s22_at = |a: usize, b: usize| -> f64 {
        match s22_overlaps {
            Some(s) => s[(a, b)],
            None => 0.0,
        }
    };

    let dim = 2 * r_star;
    let mut c = Array2::<f64>::zeros((dim, dim));
    for a in 0..r_star {
        let da = d_per_index[a];
        let pa = 1.0 + 1.0 / da;
        let ra = (1.0 - yv / (da * da)).sqrt();
        for b in 0..r_star {
            let db = d_per_index[b];
            let pb = 1.0 + 1.0 / db;
            let rb = (1.0 - yv / (db * db)).sqrt();
            let same = a == b;
            let s = s22_at(a, b);
            // location-location
            c[(a, b)] = if same { 2.0 * pa * pa } else { 0.0 }
                + kappa4 * ra * pa * rb * pb * s;
            // projection-projection
            c[(r_star + a, r_star + b)] = if same {
                2.0 * yv * aux[a].h * aux[a].h * (1.0 + yv * aux[a].h * aux[a].h)
            } else {
                0.0
            } + kappa4 * ra * aux[a].f * rb * aux[b].f * s;
            // location-projection
            c[(a, r_star + b)] = if same {
                2.0 * yv * aux[a].h * aux[a].h * pa
            } else {
                0.0
            } + kappa4 * ra * pa * rb * aux[b].f * s;
            c[(r_star + b, a)] = c[(a, r_star + b)];
        }
    }

    let mut alpha = vec![0.0; dim];
    for (k, &d) in d_per_index.iter().enumerate() {
        let disc = d * d - yv;
        if disc <= 0.0 {
            return Err(Error::Subcritical {
                what: "d^2 - y",
                value: disc,
                threshold: 0.0,
            });
        }
        alpha[k] = -yv * (d * d + 2.0 * d + yv) / ((d + yv) * (d + yv) * disc.sqrt());
        alpha[r_star + k] = 1.0 / disc.sqrt();
    }

    let mut value = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            value += alpha[i] * c[(i, j)] * alpha[j];
        }
    }
    let mut labels: Vec<String> = (0..r_star).map(|k| format!("phi_{}", k + 1)).collect();
    labels.extend((0..r_star).map(|k| format!("theta_{}", k + 1)));
    Ok(V1Spec {
        alpha,
        cov: LimitCovariance::new(labels, c)?,
        value,
    })
}

/// Closed-form statistic variance for a single multiplicity group of size
/// `m` with shared spike `d_e`; `s22_sum` is `sum_{k,t} s_{2,2}(v_k, v_t)`
/// over the group basis.
///
/// The group-mean location estimator enters through the mean of the per-index
/// location fluctuations, whose covariance carries the pairwise independence
/// of the group matrix diagonal; the cumulant bracket cancels identically
/// because `f(d) = y (d^2 + 2d + y)(1 + d) / (d (d + y)^2)`.
pub fn v1_all_equal_reference(
    d_e: f64,
    y: AspectRatio,
    m: usize,
    kappa4: f64,
    s22_sum: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidConfig("empty group".into()));
    }
    let yv = y.get();
    let aux = mp_law::aux_funcs(d_e, y, tol)?;
    let h2y = yv * aux.h * aux.h;
    let disc = d_e * d_e - yv;
    let mf = m as f64;
    let gauss = 2.0 / disc * mf * ((aux.f - h2y) * (aux.f - h2y) + h2y);
    let printed_bracket =
        aux.f / d_e - yv * (d_e * d_e + 2.0 * d_e + yv) * (1.0 + d_e) / ((d_e + yv) * (d_e + yv) * d_e * d_e);
    Ok(gauss + kappa4 * printed_bracket * printed_bracket * s22_sum)
}

/// Mixture law description of the orthogonality statistic: the scale `q`
/// and the `|I||J|`-dimensional Gaussian covariance of the leakage
/// coefficients.
pub struct OrthogonalityLaw {
    pub q: f64,
    pub u: LimitCovariance,
}

/// Scale and covariance of the orthogonality statistic under the null.
///
/// `d_all` must list every spike (the model may not hide subcritical ones),
/// `target` the tested index set; directions are needed for the non-target
/// spikes always, and for the target spikes only when `kappa4 != 0`.
pub fn q_and_u(
    d_all: &[f64],
    target: &[usize],
    z0: ArrayView2<'_, f64>,
    complement_dirs: Option<ArrayView2<'_, f64>>,
    target_dirs: Option<ArrayView2<'_, f64>>,
    y: AspectRatio,
    kappa4: f64,
    tol: &Tolerances,
) -> Result<OrthogonalityLaw> {
    let r = d_all.len();
    if target.is_empty() || target.iter().any(|&i| i >= r) {
        return Err(Error::InvalidConfig("invalid target index set".into()));
    }
    let comp: Vec<usize> = (0..r).filter(|i| !target.contains(i)).collect();
    let m_dim = z0.nrows();
    let n_j = z0.ncols();
    if n_j == 0 {
        return Err(Error::InvalidHypothesis("empty test subspace".into()));
    }
    crate::model::check_orthonormal(z0, tol.orthonormal_tol)?;

    let comp_spikes: Vec<SpikeDir> = match (comp.is_empty(), complement_dirs) {
        (true, _) => Vec::new(),
        (false, None) => {
            return Err(Error::MissingDirections(
                "the scale of the orthogonality statistic needs the non-target spike directions".into(),
            ))
        }
        (false, Some(dirs)) => {
            if dirs.nrows() != m_dim || dirs.ncols() != comp.len() {
                return Err(Error::DimensionMismatch(format!(
                    "complement directions are {}x{}, expected {}x{}",
                    dirs.nrows(),
                    dirs.ncols(),
                    m_dim,
                    comp.len()
                )));
            }
            comp
                .iter()
                .enumerate()
                .map(|(pos, &j)| SpikeDir {
                    d: d_all[j],
                    v: dirs.column(pos).to_owned(),
                })
                .collect()
        }
    };
    if kappa4 != 0.0 && target_dirs.is_none() {
        return Err(Error::MissingDirections(
            "fourth-cumulant terms need the target spike directions".into(),
        ));
    }
    if let Some(tv) = target_dirs {
        if tv.nrows() != m_dim || tv.ncols() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "target directions are {}x{}, expected {}x{}",
                tv.nrows(),
                tv.ncols(),
                m_dim,
                target.len()
            )));
        }
    }

    // leakage vectors per (target index, test direction)
    let mut sig_norm = Array2::<f64>::zeros((target.len(), n_j));
    let mut sig0: Vec<Vec<Array1<f64>>> = Vec::with_capacity(target.len());
    let mut q = 0.0f64;
    for (ti, &i) in target.iter().enumerate() {
        let d_i = d_all[i];
        let h_i = mp_law::aux_funcs(d_i, y, tol)?.h;
        let mut per_dir = Vec::with_capacity(n_j);
        for jc in 0..n_j {
            let s = varsigma(&comp_spikes, &[], d_i, z0.column(jc), tol).map_err(|e| match e {
                Error::OverlappingSpikes { j, di, dj, .. } => Error::OverlappingSpikes {
                    i,
                    j: comp[j],
                    di,
                    dj,
                },
                other => other,
            })?;
            sig_norm[(ti, jc)] = s.norm;
            q = q.max(h_i * s.norm * s.norm / d_i);
            per_dir.push(s.normalized());
        }
        sig0.push(per_dir);
    }

    let dim = target.len() * n_j;
    let mut u = Array2::<f64>::zeros((dim, dim));
    let mut labels = Vec::with_capacity(dim);
    for (ti, &i) in target.iter().enumerate() {
        for jc in 0..n_j {
            labels.push(format!("delta_{}_{}", i + 1, jc + 1));
        }
    }
    for (t1, &i1) in target.iter().enumerate() {
        let d1 = d_all[i1];
        let h1 = mp_law::aux_funcs(d1, y, tol)?.h;
        let w1 = ((d1 * d1 - y.get()) * h1).sqrt() / d1;
        for j1 in 0..n_j {
            let p1 = t1 * n_j + j1;
            for (t2, &i2) in target.iter().enumerate() {
                let d2 = d_all[i2];
                let h2 = mp_law::aux_funcs(d2, y, tol)?.h;
                let w2 = ((d2 * d2 - y.get()) * h2).sqrt() / d2;
                for j2 in 0..n_j {
                    let p2 = t2 * n_j + j2;
                    if p2 < p1 {
                        continue;
                    }
                    let mut u0 = 0.0;
                    if i1 == i2 {
                        u0 += h1 * sig0[t1][j1].dot(&sig0[t2][j2]);
                    }
                    if kappa4 != 0.0 {
                        let tv = target_dirs.expect("checked above");
                        u0 += kappa4
                            * w1
                            * w2
                            * s1111(
                                tv.column(t1),
                                tv.column(t2),
                                sig0[t1][j1].view(),
                                sig0[t2][j2].view(),
                            );
                    }
                    let scale =
                        sig_norm[(t1, j1)] * sig_norm[(t2, j2)] / (d1 * d2).sqrt();
                    u[(p1, p2)] = u0 * scale;
                    u[(p2, p1)] = u[(p1, p2)];
                }
            }
        }
    }
    let u = LimitCovariance::new(labels, u)?;
    u.check_psd(tol)?;
    Ok(OrthogonalityLaw { q, u })
}

/// Empirical distribution of the scaled quadratic form `g^T U g / q`.
pub struct MixtureDistribution {
    sorted: Vec<f64>,
    pub q: f64,
}

impl MixtureDistribution {
    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Empirical `p`-quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let b = self.sorted.len();
        if b == 0 {
            return f64::NAN;
        }
        let k = ((p * b as f64).ceil() as usize).clamp(1, b);
        self.sorted[k - 1]
    }

    /// Upper-tail probability with the add-one continuity correction:
    /// `(#{samples >= x} + 1) / (B + 1)`.
    pub fn p_value(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|s| *s < x);
        let ge = self.sorted.len() - below;
        (ge as f64 + 1.0) / (self.sorted.len() as f64 + 1.0)
    }
}

/// Draw `draws` samples of `g^T U g / q` with standard normal `g`, via the
/// spectrum of `U` (the symmetric-square-root realization in eigencoordinates).
pub fn simulate_quadratic_form(
    u: &LimitCovariance,
    q: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<MixtureDistribution> {
    if draws < 1000 {
        return Err(Error::TooFewDraws(draws));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "mixture scale q = {q} must be positive"
        )));
    }
    let trace: f64 = (0..u.dim()).map(|i| u.entry(i, i)).sum();
    let mut lambdas = if u.dim() > 0 {
        eig::sym_eigvals(u.matrix())?
    } else {
        Vec::new()
    };
    let floor = -tol.psd_floor_rel * trace.abs().max(1e-300);
    for l in &mut lambdas {
        if *l < floor {
            return Err(Error::NotPsd {
                min_eig: *l,
                floor,
            });
        }
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    lambdas.retain(|l| *l > 0.0);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut acc = 0.0;
        for &l in &lambdas {
            let z: f64 = StandardNormal.sample(rng);
            acc += l * z * z;
        }
        out.push(acc / q);
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("mixture samples are finite"));
    Ok(MixtureDistribution { sorted: out, q })
}
