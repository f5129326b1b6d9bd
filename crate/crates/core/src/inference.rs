//! The two eigenspace hypothesis tests: equality of a spiked eigenspace with
//! a given subspace (pivotal normal statistic) and orthogonality to a given
//! subspace (chi-square-mixture statistic with simulated critical values).

use ndarray::{Array2, ArrayView2};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::model::check_orthonormal;
use crate::rng;
use crate::spectral::{self, GroupEstimate, SampleSpectrum, SpikePartition};
use crate::tol::Tolerances;

/// Which null hypothesis a test targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// The spiked eigenspace equals the given subspace.
    Equality,
    /// The spiked eigenspace is orthogonal to the given subspace.
    Orthogonality,
}

/// A test specification against the sample spectrum.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub kind: TestKind,
    /// Orthonormal basis of the hypothesized subspace, one column per vector.
    pub z0: Array2<f64>,
    /// Tested spike indices (0-based, aligned with the leading eigenvalues);
    /// must be a union of whole multiplicity groups.
    pub target: Vec<usize>,
    /// Directions of the non-target spikes (required by the orthogonality
    /// law whenever non-target spikes exist), columns in ascending index
    /// order of the complement.
    pub complement_dirs: Option<Array2<f64>>,
    /// Directions of the target spikes (needed only for fourth-cumulant
    /// terms of the orthogonality law).
    pub target_dirs: Option<Array2<f64>>,
}

/// Settings for the simulated reference distribution of the orthogonality
/// statistic.
#[derive(Debug, Clone, Copy)]
pub struct MixtureSettings {
    pub draws: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for MixtureSettings {
    fn default() -> Self {
        MixtureSettings {
            draws: 20_000,
            seed: 0,
            stream: 0,
        }
    }
}

/// Reference distribution of a test statistic.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ReferenceDistribution {
    StdNormal,
    SimulatedMixture { draws: usize, seed: u64, q: f64 },
}

/// Diagnostic flags attached to a report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// Some eigenvalue fell below the detection edge (the test aborts in
    /// that case; the flag survives in harness records of invalid draws).
    pub subcritical: bool,
    /// The non-overlapping separation scale is violated by some group pair.
    pub separation_warn: bool,
    /// The chi-square suppression inequality fails for some group, so the
    /// normal reference may be optimistic.
    pub chi_square_term_warn: bool,
    /// An undeclared eigenvalue pokes above the bulk edge.
    pub extra_spike_warn: bool,
}

fn serialize_decisions<S: Serializer>(
    decisions: &Vec<(f64, bool)>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(decisions.len()))?;
    for (level, reject) in decisions {
        map.serialize_entry(&crate::harness::csvio::fmt_g17(*level), reject)?;
    }
    map.end()
}

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub reference: ReferenceDistribution,
    /// Spike estimates per multiplicity group (descending order).
    pub estimates: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// Rejection decision per level, serialized as a level -> bool map.
    #[serde(serialize_with = "serialize_decisions")]
    pub decisions: Vec<(f64, bool)>,
}

impl TestReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rejected_at(&self, level: f64) -> Option<bool> {
        self.decisions
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, r)| *r)
    }
}

/// Per-group separation diagnostics.
#[derive(Debug, Clone)]
pub struct SeparationFlag {
    pub group: usize,
    /// Non-overlapping condition: the gap to every other group clears
    /// `d^{3/2} (d - sqrt(y))^{-1/2} N^{-1/2 + eps0}`.
    pub separation_ok: bool,
    /// Chi-square suppression: `(1/N) sum_{j notin I(i)} d_i d_j/(d_i-d_j)^2`
    /// stays below `N^{-eps0} / (sqrt(N) (d_i^2 - y))`.
    pub chi_square_suppressed: bool,
}

/// Evaluate both separation inequalities for every group, with the plug-in
/// estimates standing in for the unknown spikes. Diagnostic only.
pub fn check_assumption_separation(
    estimates: &[GroupEstimate],
    y: f64,
    n_samples: usize,
    tol: &Tolerances,
) -> Vec<SeparationFlag> {
    let eps0 = tol.separation_exponent;
    let nf = n_samples as f64;
    let mut flags = Vec::with_capacity(estimates.len());
    for (gi, g) in estimates.iter().enumerate() {
        let d_i = g.d_hat;
        // non-overlap against every other group
        let scale = d_i.powf(1.5) * (d_i - y.sqrt()).max(f64::MIN_POSITIVE).powf(-0.5)
            * nf.powf(-0.5 + eps0);
        let mut separation_ok = true;
        let mut leak = 0.0;
        for (gj, other) in estimates.iter().enumerate() {
            if gi == gj {
                continue;
            }
            let gap = (d_i - other.d_hat).abs();
            if gap <= scale {
                separation_ok = false;
            }
            if gap > 0.0 {
                leak += other.indices.len() as f64 * d_i * other.d_hat / (gap * gap);
            } else {
                separation_ok = false;
                leak = f64::INFINITY;
            }
        }
        let lhs = leak / nf;
        let rhs = nf.powf(-eps0) / (nf.sqrt() * (d_i * d_i - y).max(f64::MIN_POSITIVE));
        flags.push(SeparationFlag {
            group: gi,
            separation_ok,
            chi_square_suppressed: lhs <= rhs,
        });
    }
    flags
}

fn validate_target(partition: &SpikePartition, target: &[usize]) -> Result<Vec<usize>> {
    // target must be a union of whole groups; return the group ids
    let mut group_ids = Vec::new();
    for (gid, g) in partition.groups().iter().enumerate() {
        let inside = g.iter().filter(|i| target.contains(i)).count();
        if inside == g.len() {
            group_ids.push(gid);
        } else if inside != 0 {
            return Err(Error::InvalidHypothesis(format!(
                "target set splits multiplicity group {gid}; declare whole groups"
            )));
        }
    }
    let covered: usize = group_ids
        .iter()
        .map(|&g| partition.groups()[g].len())
        .sum();
    if covered != target.len() {
        return Err(Error::InvalidHypothesis(
            "target indices must come from the declared leading groups".into(),
        ));
    }
    if group_ids.is_empty() {
        return Err(Error::InvalidHypothesis("empty target set".into()));
    }
    Ok(group_ids)
}

fn shared_diagnostics(
    estimates: &[GroupEstimate],
    spectrum: &SampleSpectrum,
    partition: &SpikePartition,
    tol: &Tolerances,
) -> Diagnostics {
    let flags = check_assumption_separation(
        estimates,
        spectrum.aspect().get(),
        spectrum.n_samples(),
        tol,
    );
    Diagnostics {
        subcritical: false,
        separation_warn: flags.iter().any(|f| !f.separation_ok),
        chi_square_term_warn: flags.iter().any(|f| !f.chi_square_suppressed),
        extra_spike_warn: spectral::extra_spike_warning(spectrum, partition.index_count())
            .unwrap_or(false),
    }
}

fn decisions_for(p_value: f64, levels: &[f64]) -> Vec<(f64, bool)> {
    levels.iter().map(|&l| (l, p_value <= l)).collect()
}

/// Trace statistic `sum_t <z0 columns, P_target> mass`, the basis-free form
/// of the projection comparison.
fn projection_trace(spectrum: &SampleSpectrum, target: &[usize], z0: ArrayView2<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for &t in target {
        let xi = spectrum.vector(t);
        for col in z0.columns() {
            let c = xi.dot(&col);
            acc += c * c;
        }
    }
    acc
}

/// Eigenspace-equality test at the given levels.
///
/// The statistic compares the projection mass of the hypothesized subspace
/// on the sample eigenspace with its limit under the null, scaled by the
/// adaptive variance; the reference is standard normal, two-sided.
pub fn test_equality(
    spectrum: &SampleSpectrum,
    hyp: &Hypothesis,
    partition: &SpikePartition,
    kappa4: f64,
    levels: &[f64],
    tol: &Tolerances,
) -> Result<TestReport> {
    if hyp.kind != TestKind::Equality {
        return Err(Error::InvalidHypothesis("expected an equality hypothesis".into()));
    }
    if hyp.z0.nrows() != spectrum.dim() {
        return Err(Error::DimensionMismatch(format!(
            "hypothesis lives in dimension {}, spectrum in {}",
            hyp.z0.nrows(),
            spectrum.dim()
        )));
    }
    check_orthonormal(hyp.z0.view(), tol.orthonormal_tol)?;
    if hyp.z0.ncols() != hyp.target.len() {
        return Err(Error::InvalidHypothesis(format!(
            "rank of the hypothesized subspace ({}) must match the target set size ({})",
            hyp.z0.ncols(),
            hyp.target.len()
        )));
    }
    let group_ids = validate_target(partition, &hyp.target)?;
    let estimates = spectral::estimate_spikes(spectrum, partition, tol)?;
    let y = spectrum.aspect();
    let n = spectrum.n_samples() as f64;

    // d_hat per target index, ascending eigen order
    let mut target_sorted = hyp.target.clone();
    target_sorted.sort_unstable();
    let per_index = spectral::d_hat_per_index(&estimates);
    let d_target: Vec<f64> = target_sorted.iter().map(|&i| per_index[i]).collect();

    // statistic numerator
    let mut t_stat = projection_trace(spectrum, &target_sorted, hyp.z0.view());
    for &d in &d_target {
        t_stat -= crate::mp_law::vartheta(d, y, tol)?;
    }

    // variance: s22 overlaps of the hypothesis basis paired in index order
    let s22 = if kappa4 != 0.0 {
        let r_star = target_sorted.len();
        let mut s = Array2::zeros((r_star, r_star));
        for a in 0..r_star {
            for b in 0..r_star {
                s[(a, b)] = hyp
                    .z0
                    .column(a)
                    .iter()
                    .zip(hyp.z0.column(b))
                    .map(|(x, y)| x * x * y * y)
                    .sum();
            }
        }
        Some(s)
    } else {
        None
    };
    let v1 = asymptotics::v1(&d_target, y, kappa4, s22.as_ref().map(|s| s.view()), tol)?;
    if !(v1.value > 0.0) {
        return Err(Error::NonPositiveVariance(v1.value));
    }
    let statistic = n.sqrt() * t_stat / v1.value.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_value = 2.0 * (1.0 - normal.cdf(statistic.abs()));

    let mut diagnostics = shared_diagnostics(&estimates, spectrum, partition, tol);
    let _ = group_ids;
    diagnostics.subcritical = false;
    Ok(TestReport {
        statistic,
        p_value,
        reference: ReferenceDistribution::StdNormal,
        estimates: estimates.iter().map(|e| e.d_hat).collect(),
        diagnostics,
        decisions: decisions_for(p_value, levels),
    })
}

/// Eigenspace-orthogonality test with simulated mixture critical values.
///
/// Every declared spike must be supercritical (the law needs estimates of
/// all of them); the reference distribution is the scaled quadratic form
/// with plug-in estimates, and the p-value is its upper tail.
pub fn test_orthogonality(
    spectrum: &SampleSpectrum,
    hyp: &Hypothesis,
    partition: &SpikePartition,
    kappa4: f64,
    mixture: &MixtureSettings,
    levels: &[f64],
    tol: &Tolerances,
) -> Result<TestReport> {
    if hyp.kind != TestKind::Orthogonality {
        return Err(Error::InvalidHypothesis(
            "expected an orthogonality hypothesis".into(),
        ));
    }
    if hyp.z0.nrows() != spectrum.dim() {
        return Err(Error::DimensionMismatch(format!(
            "hypothesis lives in dimension {}, spectrum in {}",
            hyp.z0.nrows(),
            spectrum.dim()
        )));
    }
    check_orthonormal(hyp.z0.view(), tol.orthonormal_tol)?;
    validate_target(partition, &hyp.target)?;
    let estimates = spectral::estimate_spikes(spectrum, partition, tol)?;
    let y = spectrum.aspect();
    let n = spectrum.n_samples() as f64;
    let per_index = spectral::d_hat_per_index(&estimates);

    let mut target_sorted = hyp.target.clone();
    target_sorted.sort_unstable();

    let law = asymptotics::q_and_u(
        &per_index,
        &target_sorted,
        hyp.z0.view(),
        hyp.complement_dirs.as_ref().map(|m| m.view()),
        hyp.target_dirs.as_ref().map(|m| m.view()),
        y,
        kappa4,
        tol,
    )?;

    let t2 = projection_trace(spectrum, &target_sorted, hyp.z0.view());
    let statistic = n * t2 / law.q;

    let mut rng = rng::substream(mixture.seed, rng::StreamPurpose::Mixture, mixture.stream);
    let mix = asymptotics::simulate_quadratic_form(&law.u, law.q, mixture.draws, &mut rng, tol)?;
    let p_value = mix.p_value(statistic);

    let diagnostics = shared_diagnostics(&estimates, spectrum, partition, tol);
    Ok(TestReport {
        statistic,
        p_value,
        reference: ReferenceDistribution::SimulatedMixture {
            draws: mixture.draws,
            seed: mixture.seed,
            q: law.q,
        },
        estimates: estimates.iter().map(|e| e.d_hat).collect(),
        diagnostics,
        decisions: decisions_for(p_value, levels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{basis_columns, Directions, EntryLaw, Spike, SpikedModel};
    use crate::mp_law;
    use crate::rng::{substream, StreamPurpose};
    use ndarray::Array1;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn eq_hypothesis(m: usize, axes: &[usize], target: Vec<usize>) -> Hypothesis {
        Hypothesis {
            kind: TestKind::Equality,
            z0: basis_columns(m, axes).unwrap(),
            target,
            complement_dirs: None,
            target_dirs: None,
        }
    }

    fn spectrum_from_diag(vals: &[f64], n_samples: usize) -> SampleSpectrum {
        let q = Array2::from_diag(&Array1::from(vals.to_vec()));
        spectral::sym_eig(q.view(), n_samples, &tol()).unwrap()
    }

    #[test]
    fn equality_single_spike_matches_manual_formula() {
        // exact synthetic spectrum: mu_1 = theta(d) + bump, xi_1 = e_1
        let y = crate::mp_law::AspectRatio::new(1.0).unwrap();
        let d = 5.0;
        let bump = 0.3;
        let mu1 = mp_law::theta(d, y, &tol()).unwrap() + bump;
        let spec = spectrum_from_diag(&[mu1, 0.8, 0.5, 0.3], 4);
        let part = SpikePartition::from_multiplicities(&[1]).unwrap();
        let hyp = eq_hypothesis(4, &[1], vec![0]);
        let rep = test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()).unwrap();

        let d_hat = mp_law::gamma_shrink(mu1, y, &tol()).unwrap();
        let vth = mp_law::vartheta(d_hat, y, &tol()).unwrap();
        let v1_single = asymptotics::v1(&[d_hat], y, 0.0, None, &tol()).unwrap().value;
        let manual = (4.0f64).sqrt() * (1.0 - vth) / v1_single.sqrt();
        assert!((rep.statistic - manual).abs() < 1e-12);
        // V1(d) is half of the two-index equal construction
        let s22 = Array2::eye(2);
        let v1_double = asymptotics::v1(&[d_hat, d_hat], y, 0.0, Some(s22.view()), &tol())
            .unwrap()
            .value;
        assert!((2.0 * v1_single - v1_double).abs() < 1e-12);
    }

    #[test]
    fn equality_statistic_deterministic_and_finite_for_exact_input() {
        // exact spectrum mu_i = theta(d_i), xi spanning Z0 exactly:
        // the projection mass is 1 per direction, above vartheta, so the
        // statistic is positive and deterministic
        let y = crate::mp_law::AspectRatio::new(1.0).unwrap();
        let th1 = mp_law::theta(9.0, y, &tol()).unwrap();
        let th2 = mp_law::theta(7.0, y, &tol()).unwrap();
        let spec = spectrum_from_diag(&[th1, th2, 0.8, 0.5], 4);
        let part = SpikePartition::from_multiplicities(&[1, 1]).unwrap();
        let hyp = eq_hypothesis(4, &[1, 2], vec![0, 1]);
        let rep = test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()).unwrap();
        assert!(rep.statistic.is_finite() && rep.statistic > 0.0);
        let rep2 = test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()).unwrap();
        assert_eq!(rep.statistic, rep2.statistic);
        // estimates recover d exactly
        assert!((rep.estimates[0] - 9.0).abs() < 1e-10);
        assert!((rep.estimates[1] - 7.0).abs() < 1e-10);
    }

    #[test]
    fn equality_rejects_rank_mismatch_and_split_groups() {
        let y = crate::mp_law::AspectRatio::new(1.0).unwrap();
        let th = mp_law::theta(5.0, y, &tol()).unwrap();
        let spec = spectrum_from_diag(&[th, th, 0.5, 0.3], 4);
        let part = SpikePartition::from_multiplicities(&[2]).unwrap();
        // rank 1 subspace against a 2-element target
        let hyp = eq_hypothesis(4, &[1], vec![0, 1]);
        assert!(test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()).is_err());
        // splitting the double group is refused
        let hyp = eq_hypothesis(4, &[1], vec![0]);
        assert!(matches!(
            test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()),
            Err(Error::InvalidHypothesis(_))
        ));
    }

    #[test]
    fn statistics_invariant_under_sign_flips_and_basis_rotation() {
        let model = SpikedModel::new(
            60,
            120,
            vec![
                Spike {
                    d: 9.0,
                    multiplicity: 1,
                },
                Spike {
                    d: 7.0,
                    multiplicity: 1,
                },
            ],
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = model.sample_data(&mut substream(2024, StreamPurpose::Data, 3));
        let q = model.sample_covariance(x.view()).unwrap();
        let spec = spectral::sym_eig_top(q.view(), 120, 3, &tol()).unwrap();
        let part = SpikePartition::from_multiplicities(&[1, 1]).unwrap();
        let hyp = eq_hypothesis(60, &[1, 2], vec![0, 1]);
        let base = test_equality(&spec, &hyp, &part, 0.0, &[0.1], &tol()).unwrap();

        // flip both eigenvector signs: spectra are rebuilt by negating Q's
        // eigenvectors indirectly through a manual flipped copy
        let mut flipped = spec.clone();
        // the public type is immutable; emulate a sign flip by rebuilding
        // the test on the rotated hypothesis instead, plus rotation checks
        let angle = 0.7f64;
        let (c, s) = (angle.cos(), angle.sin());
        let mut z_rot = Array2::zeros((60, 2));
        for i in 0..60 {
            z_rot[(i, 0)] = c * hyp.z0[(i, 0)] + s * hyp.z0[(i, 1)];
            z_rot[(i, 1)] = -s * hyp.z0[(i, 0)] + c * hyp.z0[(i, 1)];
        }
        let hyp_rot = Hypothesis {
            kind: TestKind::Equality,
            z0: z_rot,
            target: vec![0, 1],
            complement_dirs: None,
            target_dirs: None,
        };
        let rot = test_equality(&spec, &hyp_rot, &part, 0.0, &[0.1], &tol()).unwrap();
        assert!(
            (base.statistic - rot.statistic).abs() < 1e-10,
            "basis rotation changed the statistic: {} vs {}",
            base.statistic,
            rot.statistic
        );
        let _ = &mut flipped;
    }

    #[test]
    fn orthogonality_single_spike_reduces_to_closed_form() {
        // Sigma = diag(d+1, 1, ...): statistic N dhat (dhat+y) |<xi_1, e_3>|^2/(dhat+1)
        let model = SpikedModel::new(
            40,
            80,
            vec![Spike {
                d: 6.0,
                multiplicity: 1,
            }],
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = model.sample_data(&mut substream(77, StreamPurpose::Data, 0));
        let q = model.sample_covariance(x.view()).unwrap();
        let spec = spectral::sym_eig_top(q.view(), 80, 2, &tol()).unwrap();
        let part = SpikePartition::from_multiplicities(&[1]).unwrap();
        let hyp = Hypothesis {
            kind: TestKind::Orthogonality,
            z0: basis_columns(40, &[3]).unwrap(),
            target: vec![0],
            complement_dirs: None,
            target_dirs: None,
        };
        let mix = MixtureSettings {
            draws: 4000,
            seed: 9,
            stream: 0,
        };
        let rep = test_orthogonality(&spec, &hyp, &part, 0.0, &mix, &[0.1], &tol()).unwrap();
        let y = spec.aspect().get();
        let d_hat = rep.estimates[0];
        let comp = spec.vector(0)[2];
        let manual = 80.0 * d_hat * (d_hat + y) * comp * comp / (d_hat + 1.0);
        assert!(
            (rep.statistic - manual).abs() < 1e-10 * manual.abs().max(1.0),
            "{} vs {manual}",
            rep.statistic
        );
    }

    #[test]
    fn orthogonality_saturates_under_maximal_violation() {
        // Z0 equals the sample eigenspace itself: the statistic is order N
        let model = SpikedModel::new(
            40,
            80,
            vec![Spike {
                d: 8.0,
                multiplicity: 1,
            }],
            Directions::StandardBasis,
            EntryLaw::Gaussian,
        )
        .unwrap();
        let x = model.sample_data(&mut substream(78, StreamPurpose::Data, 1));
        let q = model.sample_covariance(x.view()).unwrap();
        let spec = spectral::sym_eig_top(q.view(), 80, 2, &tol()).unwrap();
        let part = SpikePartition::from_multiplicities(&[1]).unwrap();
        let xi = spec.vector(0).to_owned();
        let mut z0 = Array2::zeros((40, 1));
        z0.column_mut(0).assign(&xi);
        let hyp = Hypothesis {
            kind: TestKind::Orthogonality,
            z0,
            target: vec![0],
            complement_dirs: None,
            target_dirs: None,
        };
        let mix = MixtureSettings {
            draws: 2000,
            seed: 10,
            stream: 0,
        };
        let rep = test_orthogonality(&spec, &hyp, &part, 0.0, &mix, &[0.1], &tol()).unwrap();
        assert!(rep.statistic > 20.0, "statistic {} not saturated", rep.statistic);
        assert!(rep.p_value < 1e-3);
        assert_eq!(rep.rejected_at(0.1), Some(true));
    }

    #[test]
    fn separation_flags() {
        let y = 1.0;
        // equal spikes declared as one group: the complement sum is empty
        let est = vec![GroupEstimate {
            indices: vec![0, 1],
            theta_hat: 0.0,
            d_hat: 10.0,
        }];
        let flags = check_assumption_separation(&est, y, 500, &tol());
        assert!(flags[0].separation_ok);
        assert!(flags[0].chi_square_suppressed);

        // close but distinct groups warn
        let est = vec![
            GroupEstimate {
                indices: vec![0],
                theta_hat: 0.0,
                d_hat: 5.01,
            },
            GroupEstimate {
                indices: vec![1],
                theta_hat: 0.0,
                d_hat: 5.0,
            },
        ];
        let flags = check_assumption_separation(&est, y, 500, &tol());
        assert!(!flags[0].separation_ok);

        // well separated groups pass the gap condition; the chi-square
        // suppression inequality is much more demanding and fails at these
        // sample sizes even for comfortably separated spikes
        let est = vec![
            GroupEstimate {
                indices: vec![0],
                theta_hat: 0.0,
                d_hat: 9.0,
            },
            GroupEstimate {
                indices: vec![1],
                theta_hat: 0.0,
                d_hat: 7.0,
            },
            GroupEstimate {
                indices: vec![2],
                theta_hat: 0.0,
                d_hat: 5.0,
            },
        ];
        let flags = check_assumption_separation(&est, 0.1, 500, &tol());
        assert!(flags.iter().all(|f| f.separation_ok));
        assert!(flags.iter().all(|f| !f.chi_square_suppressed));
    }

    #[test]
    fn report_serializes_with_level_map() {
        let rep = TestReport {
            statistic: 1.5,
            p_value: 0.13,
            reference: ReferenceDistribution::StdNormal,
            estimates: vec![5.0],
            diagnostics: Diagnostics::default(),
            decisions: vec![(0.1, false), (0.25, true)],
        };
        let json = rep.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["decisions"]["0.1"], serde_json::Value::Bool(false));
        assert_eq!(v["decisions"]["0.25"], serde_json::Value::Bool(true));
        assert_eq!(v["reference"]["type"], "std-normal");
    }
}
