//! Monte Carlo experiment execution: null-size runs, power sweeps, ECDF
//! collection, and deterministic replication scheduling.

pub mod config;
pub mod csvio;
pub mod presets;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::inference::{self, Hypothesis, MixtureSettings, TestKind};
use crate::model::SpikedModel;
use crate::rng::{substream, StreamPurpose};
use crate::spectral::{self, SpikePartition};
use crate::tol::Tolerances;
use config::ScenarioConfig;
use csvio::fmt_g17;

/// One replication record.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub statistic: f64,
    pub decision: bool,
    pub valid: bool,
}

/// Aggregated result of a null or power run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcomes: Vec<RepOutcome>,
    /// Fraction of rejections among valid replications.
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub std_error: f64,
    pub valid: usize,
    pub invalid: usize,
    pub elapsed_secs: f64,
}

impl ExperimentResult {
    fn from_outcomes(outcomes: Vec<RepOutcome>, elapsed_secs: f64) -> Self {
        let valid = outcomes.iter().filter(|o| o.valid).count();
        let invalid = outcomes.len() - valid;
        let rejected = outcomes.iter().filter(|o| o.valid && o.decision).count();
        let rate = if valid > 0 {
            rejected as f64 / valid as f64
        } else {
            f64::NAN
        };
        let se = if valid > 0 {
            (rate * (1.0 - rate) / valid as f64).sqrt()
        } else {
            f64::NAN
        };
        ExperimentResult {
            outcomes,
            rejection_rate: rate,
            std_error: se,
            valid,
            invalid,
            elapsed_secs,
        }
    }

    /// `rep,statistic,decision,valid` rows at full precision.
    pub fn write_type_i_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rep,statistic,decision,valid")?;
        for o in &self.outcomes {
            writeln!(
                w,
                "{},{},{},{}",
                o.rep + 1,
                fmt_g17(o.statistic),
                u8::from(o.decision),
                u8::from(o.valid)
            )?;
        }
        Ok(())
    }
}

fn install_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct PreparedRun {
    model: SpikedModel,
    hypothesis: Hypothesis,
    partition: SpikePartition,
    kappa4: f64,
    keep: usize,
}

fn prepare(cfg: &ScenarioConfig, phi: Option<f64>) -> Result<PreparedRun> {
    let kind: TestKind = cfg.hypothesis.kind.into();
    // equality power rotates the population; orthogonality power rotates the
    // tested subspace; the null (phi = 0 or absent) leaves both alone
    let (model_rot, z0_rot) = match kind {
        TestKind::Equality => (phi, None),
        TestKind::Orthogonality => (None, phi),
    };
    let model = cfg.build_model(model_rot)?;
    let z0 = cfg.build_z0(z0_rot)?;
    let partition = cfg.partition()?;
    let target = cfg.target_indices();
    let (_, kappa4) = cfg.model.law.cumulants();

    // the orthogonality law needs the non-target spike directions (the
    // harness knows the truth; a standalone tester must supply them)
    let (complement_dirs, target_dirs) = if kind == TestKind::Orthogonality {
        let comp: Vec<usize> = (0..model.rank()).filter(|i| !target.contains(i)).collect();
        let comp_mat = if comp.is_empty() {
            None
        } else {
            let mut mat = ndarray::Array2::zeros((model.dim(), comp.len()));
            for (pos, &j) in comp.iter().enumerate() {
                mat.column_mut(pos).assign(&model.direction(j));
            }
            Some(mat)
        };
        let tgt_mat = if kappa4 != 0.0 {
            let mut mat = ndarray::Array2::zeros((model.dim(), target.len()));
            for (pos, &j) in target.iter().enumerate() {
                mat.column_mut(pos).assign(&model.direction(j));
            }
            Some(mat)
        } else {
            None
        };
        (comp_mat, tgt_mat)
    } else {
        (None, None)
    };

    let keep = (model.rank() + 1).min(model.dim()).min(model.n_samples());
    Ok(PreparedRun {
        model,
        hypothesis: Hypothesis {
            kind,
            z0,
            target,
            complement_dirs,
            target_dirs,
        },
        partition,
        kappa4,
        keep,
    })
}

fn run_replication(
    cfg: &ScenarioConfig,
    run: &PreparedRun,
    rep: usize,
    tol: &Tolerances,
) -> Result<RepOutcome> {
    let mut rng = substream(cfg.seed, StreamPurpose::Data, rep as u64);
    let x = run.model.sample_data(&mut rng);
    let q = run.model.sample_covariance(x.view())?;
    let spectrum = spectral::sym_eig_top(q.view(), run.model.n_samples(), run.keep, tol)?;
    let report = match run.hypothesis.kind {
        TestKind::Equality => inference::test_equality(
            &spectrum,
            &run.hypothesis,
            &run.partition,
            run.kappa4,
            &[cfg.level],
            tol,
        ),
        TestKind::Orthogonality => inference::test_orthogonality(
            &spectrum,
            &run.hypothesis,
            &run.partition,
            run.kappa4,
            &MixtureSettings {
                draws: cfg.mixture_draws,
                seed: cfg.seed,
                stream: rep as u64,
            },
            &[cfg.level],
            tol,
        ),
    };
    match report {
        Ok(rep_ok) => Ok(RepOutcome {
            rep,
            statistic: rep_ok.statistic,
            decision: rep_ok.rejected_at(cfg.level).unwrap_or(false),
            valid: true,
        }),
        // a subcritical draw is a recorded invalid replication, not a failure
        Err(Error::Subcritical { .. }) | Err(Error::NotSeparatedFromBulk { .. }) => Ok(RepOutcome {
            rep,
            statistic: f64::NAN,
            decision: false,
            valid: false,
        }),
        Err(e) => Err(e),
    }
}

fn run_configured(
    cfg: &ScenarioConfig,
    phi: Option<f64>,
    threads: Option<usize>,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let run = prepare(cfg, phi)?;
    let start = Instant::now();
    let outcomes: Result<Vec<RepOutcome>> = install_pool(threads, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_replication(cfg, &run, rep, tol))
            .collect()
    })?;
    let outcomes = outcomes?;
    Ok(ExperimentResult::from_outcomes(
        outcomes,
        start.elapsed().as_secs_f64(),
    ))
}

/// Type-I-error run under the configured null.
pub fn run_null(cfg: &ScenarioConfig, threads: Option<usize>, tol: &Tolerances) -> Result<ExperimentResult> {
    if let Some(alt) = &cfg.alternative {
        let _ = alt; // the alternative spec is allowed but unused at phi = 0
    }
    run_configured(cfg, None, threads, tol)
}

/// Power sweep over rotation angles; `phi = 0` coincides with the null run.
pub fn run_power(
    cfg: &ScenarioConfig,
    phi_grid: &[f64],
    threads: Option<usize>,
    tol: &Tolerances,
) -> Result<Vec<(f64, ExperimentResult)>> {
    if cfg.alternative.is_none() {
        return Err(Error::InvalidConfig(
            "power run needs an alternative spec".into(),
        ));
    }
    for &phi in phi_grid {
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&phi) {
            return Err(Error::InvalidConfig(format!(
                "phi = {phi} outside [0, pi/2]"
            )));
        }
    }
    phi_grid
        .iter()
        .map(|&phi| Ok((phi, run_configured(cfg, Some(phi), threads, tol)?)))
        .collect()
}

/// `phi,rate,se,reps_valid` rows for a power sweep.
pub fn write_power_csv<W: Write>(rows: &[(f64, ExperimentResult)], mut w: W) -> Result<()> {
    writeln!(w, "phi,rate,se,reps_valid")?;
    for (phi, res) in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_g17(*phi),
            fmt_g17(res.rejection_rate),
            fmt_g17(res.std_error),
            res.valid
        )?;
    }
    Ok(())
}

/// ECDF sample of the statistic against its reference distribution.
#[derive(Debug, Clone)]
pub struct EcdfResult {
    /// Sorted statistic values with the reference CDF evaluated at each.
    pub points: Vec<(f64, f64)>,
    /// Kolmogorov-Smirnov distance between the sample and the reference.
    pub ks: f64,
    pub valid: usize,
    pub invalid: usize,
}

impl EcdfResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "statistic,reference_cdf")?;
        for (s, f) in &self.points {
            writeln!(w, "{},{}", fmt_g17(*s), fmt_g17(*f))?;
        }
        Ok(())
    }
}

/// Collect the statistic ECDF under the configured null and compare it to
/// the reference law: standard normal for the equality test, the (exact or
/// simulated) chi-square mixture for the orthogonality test.
pub fn run_ecdf(cfg: &ScenarioConfig, threads: Option<usize>, tol: &Tolerances) -> Result<EcdfResult> {
    let result = run_configured(cfg, None, threads, tol)?;
    let mut stats: Vec<f64> = result
        .outcomes
        .iter()
        .filter(|o| o.valid)
        .map(|o| o.statistic)
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));

    let kind: TestKind = cfg.hypothesis.kind.into();
    let reference: Box<dyn Fn(f64) -> f64> = match kind {
        TestKind::Equality => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            Box::new(move |x| normal.cdf(x))
        }
        TestKind::Orthogonality => {
            let dim = cfg.target_indices().len() * cfg.build_z0(None)?.ncols();
            if dim == 1 {
                let chi = ChiSquared::new(1.0).expect("chi-square(1)");
                Box::new(move |x| chi.cdf(x))
            } else {
                // simulate the mixture reference from the configured truth
                let model = cfg.build_model(None)?;
                let z0 = cfg.build_z0(None)?;
                let target = cfg.target_indices();
                let comp: Vec<usize> =
                    (0..model.rank()).filter(|i| !target.contains(i)).collect();
                let dirs = model.directions_matrix();
                let comp_mat = if comp.is_empty() {
                    None
                } else {
                    let mut mat = ndarray::Array2::zeros((model.dim(), comp.len()));
                    for (pos, &j) in comp.iter().enumerate() {
                        mat.column_mut(pos).assign(&dirs.column(j));
                    }
                    Some(mat)
                };
                let tgt_mat = {
                    let mut mat = ndarray::Array2::zeros((model.dim(), target.len()));
                    for (pos, &j) in target.iter().enumerate() {
                        mat.column_mut(pos).assign(&dirs.column(j));
                    }
                    Some(mat)
                };
                let (_, kappa4) = cfg.model.law.cumulants();
                let law = asymptotics::q_and_u(
                    &model.d_per_index(),
                    &target,
                    z0.view(),
                    comp_mat.as_ref().map(|m| m.view()),
                    tgt_mat.as_ref().map(|m| m.view()),
                    model.aspect()?,
                    kappa4,
                    tol,
                )?;
                let mut rng = substream(cfg.seed, StreamPurpose::Generic, 0);
                let mix = asymptotics::simulate_quadratic_form(
                    &law.u,
                    law.q,
                    cfg.mixture_draws.max(1000),
                    &mut rng,
                    tol,
                )?;
                let samples: Vec<f64> = mix.samples().to_vec();
                Box::new(move |x| {
                    let le = samples.partition_point(|s| *s <= x);
                    le as f64 / samples.len() as f64
                })
            }
        }
    };

    let n = stats.len() as f64;
    let mut ks = 0.0f64;
    let points: Vec<(f64, f64)> = stats
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = reference(s);
            ks = ks
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
            (s, f)
        })
        .collect();
    Ok(EcdfResult {
        points,
        ks,
        valid: result.valid,
        invalid: result.invalid,
    })
}

/// Everything `--dump-first` emits for one replication: the transformed data
/// matrix (entry variance 1/N) and a standalone hypothesis file that lets
/// the `test` subcommand replay the exact same report.
pub struct FirstReplicationDump {
    pub data: ndarray::Array2<f64>,
    pub hypothesis: config::HypothesisFile,
}

/// Materialize replication `rep` of a null run for external replay.
pub fn dump_replication(cfg: &ScenarioConfig, rep: usize) -> Result<FirstReplicationDump> {
    let run = prepare(cfg, None)?;
    let mut rng = substream(cfg.seed, StreamPurpose::Data, rep as u64);
    let x = run.model.sample_data(&mut rng);
    // dump the transformed data so that Q = D D^T reproduces bit-for-bit
    let mut d = x.clone();
    let spikes = run.model.d_per_index();
    for (j, dv) in spikes.iter().enumerate() {
        let c = (1.0 + dv).sqrt() - 1.0;
        let v = run.model.direction(j);
        let w = v.dot(&x);
        for (a, va) in v.iter().enumerate() {
            if *va == 0.0 {
                continue;
            }
            let mut row = d.row_mut(a);
            row.scaled_add(c * *va, &w);
        }
    }
    let axes_of = |mat: &ndarray::Array2<f64>| -> Option<Vec<usize>> {
        // compress pure standard-basis columns back to axis lists
        let mut axes = Vec::new();
        for col in mat.columns() {
            let mut axis = None;
            for (i, v) in col.iter().enumerate() {
                if *v == 1.0 && axis.is_none() {
                    axis = Some(i + 1);
                } else if *v != 0.0 {
                    return None;
                }
            }
            axes.push(axis?);
        }
        Some(axes)
    };
    let matrix_of = |mat: &ndarray::Array2<f64>| -> Vec<Vec<f64>> {
        mat.rows().into_iter().map(|r| r.to_vec()).collect()
    };
    let (z0_axes, z0_matrix) = match axes_of(&run.hypothesis.z0) {
        Some(axes) => (Some(axes), None),
        None => (None, Some(matrix_of(&run.hypothesis.z0))),
    };
    let (complement_axes, complement_matrix) = match &run.hypothesis.complement_dirs {
        None => (None, None),
        Some(m) => match axes_of(m) {
            Some(axes) => (Some(axes), None),
            None => (None, Some(matrix_of(m))),
        },
    };
    let (target_axes, target_matrix) = match &run.hypothesis.target_dirs {
        None => (None, None),
        Some(m) => match axes_of(m) {
            Some(axes) => (Some(axes), None),
            None => (None, Some(matrix_of(m))),
        },
    };
    let hypothesis = config::HypothesisFile {
        kind: cfg.hypothesis.kind,
        z0_axes,
        z0_matrix,
        multiplicities: cfg.model.spikes.iter().map(|s| s.multiplicity).collect(),
        target_spikes: cfg.hypothesis.target_spikes.clone(),
        kappa4: cfg.model.law.cumulants().1,
        complement_axes,
        complement_matrix,
        target_axes,
        target_matrix,
        levels: vec![cfg.level],
        mixture: config::MixtureConfig {
            draws: cfg.mixture_draws,
            seed: cfg.seed,
            stream: rep as u64,
        },
    };
    Ok(FirstReplicationDump {
        data: d,
        hypothesis,
    })
}

/// Run a test on an externally supplied data matrix (entry variance `1/N`,
/// as written by [`dump_replication`]) and a hypothesis file.
pub fn test_from_data(
    data: ndarray::ArrayView2<'_, f64>,
    hyp_file: &config::HypothesisFile,
    tol: &Tolerances,
) -> Result<inference::TestReport> {
    let (m, n) = data.dim();
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty data matrix".into()));
    }
    let (hyp, partition) = hyp_file.build(m)?;
    let q = crate::eig::gram(data)?;
    let keep = (partition.index_count() + 1).min(m).min(n);
    let spectrum = spectral::sym_eig_top(q.view(), n, keep, tol)?;
    match hyp.kind {
        TestKind::Equality => inference::test_equality(
            &spectrum,
            &hyp,
            &partition,
            hyp_file.kappa4,
            &hyp_file.levels,
            tol,
        ),
        TestKind::Orthogonality => inference::test_orthogonality(
            &spectrum,
            &hyp,
            &partition,
            hyp_file.kappa4,
            &MixtureSettings {
                draws: hyp_file.mixture.draws,
                seed: hyp_file.mixture.seed,
                stream: hyp_file.mixture.stream,
            },
            &hyp_file.levels,
            tol,
        ),
    }
}
