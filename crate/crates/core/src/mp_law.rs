//! Closed-form Marchenko–Pastur spectral maps and the auxiliary scalar
//! functions used by every covariance formula downstream.
//!
//! Everything here is a real-analytic closed form; the only knob is the
//! supercritical edge guard from [`Tolerances`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Dimension-to-sample ratio `y = M/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(y: f64) -> Result<Self> {
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::InvalidAspectRatio(y));
        }
        Ok(AspectRatio(y))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }
}

/// Endpoints `(1 -/+ sqrt(y))^2` of the Marchenko–Pastur bulk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEdges {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

/// Bulk support edges of the MP law for aspect ratio `y`.
pub fn spectral_edges(y: AspectRatio) -> SpectralEdges {
    let s = y.sqrt();
    SpectralEdges {
        lambda_minus: (1.0 - s) * (1.0 - s),
        lambda_plus: (1.0 + s) * (1.0 + s),
    }
}

fn check_supercritical(d: f64, y: AspectRatio, tol: &Tolerances) -> Result<()> {
    let edges = spectral_edges(y);
    let guard = tol.edge_guard(edges.lambda_plus);
    if !d.is_finite() || d - y.sqrt() <= guard {
        return Err(Error::Subcritical {
            what: "d - sqrt(y)",
            value: d - y.sqrt(),
            threshold: guard,
        });
    }
    Ok(())
}

/// Limiting location `1 + d + y + y/d` of the sample outlier for spike `d`.
///
/// Strictly increasing on `(sqrt(y), inf)` with values above `lambda_plus`.
pub fn theta(d: f64, y: AspectRatio, tol: &Tolerances) -> Result<f64> {
    check_supercritical(d, y, tol)?;
    Ok(1.0 + d + y.get() + y.get() / d)
}

/// Nonlinear shrinker inverting [`theta`]: maps an outlier location back to
/// the population spike.
pub fn gamma_shrink(x: f64, y: AspectRatio, tol: &Tolerances) -> Result<f64> {
    let edges = spectral_edges(y);
    let guard = tol.edge_guard(edges.lambda_plus);
    if !x.is_finite() || x - edges.lambda_plus <= guard {
        return Err(Error::NotSeparatedFromBulk {
            value: x,
            edge: edges.lambda_plus,
        });
    }
    let b = x - y.get() - 1.0;
    let disc = b * b - 4.0 * y.get();
    if disc < 0.0 {
        // impossible for x > lambda_plus; if reached, something upstream broke
        return Err(Error::Internal(format!(
            "negative discriminant {disc} in gamma_shrink(x = {x}, y = {})",
            y.get()
        )));
    }
    Ok(0.5 * b + 0.5 * disc.sqrt())
}

/// Limiting squared projection `(d^2 - y) / (d (d + y))` of a sample spike
/// eigenvector onto its population direction.
pub fn vartheta(d: f64, y: AspectRatio, tol: &Tolerances) -> Result<f64> {
    check_supercritical(d, y, tol)?;
    Ok((d * d - y.get()) / (d * (d + y.get())))
}

/// Scalar weights entering the asymptotic covariances.
#[derive(Debug, Clone, Copy)]
pub struct AuxFuncs {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub l: f64,
}

/// The four auxiliary functions `f, g, h, l` evaluated at a supercritical `d`.
pub fn aux_funcs(d: f64, y: AspectRatio, tol: &Tolerances) -> Result<AuxFuncs> {
    check_supercritical(d, y, tol)?;
    let yv = y.get();
    let f = yv * (1.0 + d) / (d * (d + yv)) * (1.0 + d * (1.0 + d) / (d + yv));
    let g = 2.0 * ((d + 1.0) * (d + y.sqrt())).sqrt() / (d + yv);
    let h = (d + 1.0) / (d + yv);
    let l = (1.0 + d) / (d * (d + yv)).sqrt();
    Ok(AuxFuncs { f, g, h, l })
}

fn check_off_support(z: Complex64, edges: SpectralEdges) -> Result<()> {
    if z.im == 0.0 {
        let x = z.re;
        if x == 0.0 || (x >= edges.lambda_minus && x <= edges.lambda_plus) {
            return Err(Error::InsideBulk(x));
        }
    } else if z.norm() == 0.0 {
        return Err(Error::InsideBulk(0.0));
    }
    Ok(())
}

/// Branch-correct `sqrt((z - lambda_plus)(z - lambda_minus))`.
///
/// Taking principal square roots of the two factors separately picks the
/// branch on which both Stieltjes transforms map the upper half-plane into
/// itself and come out real on the real axis outside the bulk.
fn edge_sqrt(z: Complex64, edges: SpectralEdges) -> Complex64 {
    let z = if z.im == 0.0 {
        Complex64::new(z.re, 0.0) // normalize -0.0 imaginary parts
    } else {
        z
    };
    (z - edges.lambda_plus).sqrt() * (z - edges.lambda_minus).sqrt()
}

/// Stieltjes transform of the MP law of `XX^*` (companion dimension `M`).
pub fn stieltjes_m1(z: Complex64, y: AspectRatio) -> Result<Complex64> {
    let edges = spectral_edges(y);
    check_off_support(z, edges)?;
    let w = edge_sqrt(z, edges);
    Ok((Complex64::new(1.0 - y.get(), 0.0) - z + w) / (2.0 * z * y.get()))
}

/// Stieltjes transform of the MP law of `X^*X` (companion dimension `N`).
pub fn stieltjes_m2(z: Complex64, y: AspectRatio) -> Result<Complex64> {
    let edges = spectral_edges(y);
    check_off_support(z, edges)?;
    let w = edge_sqrt(z, edges);
    Ok((Complex64::new(y.get() - 1.0, 0.0) - z + w) / (2.0 * z))
}

/// Derivative of [`stieltjes_m1`], from implicit differentiation of its
/// defining quadratic `z y m^2 + (z - (1 - y)) m + 1 = 0`.
pub fn stieltjes_m1_prime(z: Complex64, y: AspectRatio) -> Result<Complex64> {
    let m = stieltjes_m1(z, y)?;
    let yv = y.get();
    Ok(-(yv * m * m + m) / (2.0 * z * yv * m + z - (1.0 - yv)))
}

/// Derivative of [`stieltjes_m2`], from `z m^2 + (z + (1 - y)) m + 1 = 0`.
pub fn stieltjes_m2_prime(z: Complex64, y: AspectRatio) -> Result<Complex64> {
    let m = stieltjes_m2(z, y)?;
    let yv = y.get();
    Ok(-(m * m + m) / (2.0 * z * m + z + 1.0 - yv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn y(v: f64) -> AspectRatio {
        AspectRatio::new(v).unwrap()
    }

    #[test]
    fn edges_basic() {
        let e = spectral_edges(y(1.0));
        assert_eq!(e.lambda_minus, 0.0);
        assert_eq!(e.lambda_plus, 4.0);
        let e = spectral_edges(y(4.0));
        assert!((e.lambda_minus - 1.0).abs() < 1e-15);
        assert!((e.lambda_plus - 9.0).abs() < 1e-15);
        // frozen from exact evaluation of (1 -/+ sqrt(0.1))^2
        let e = spectral_edges(y(0.1));
        assert!((e.lambda_minus - 0.4675444679663241336).abs() < 1e-15);
        assert!((e.lambda_plus - 1.7324555320336758664).abs() < 1e-15);
    }

    #[test]
    fn aspect_ratio_rejects_bad_input() {
        assert!(AspectRatio::new(0.0).is_err());
        assert!(AspectRatio::new(-1.0).is_err());
        assert!(AspectRatio::new(f64::NAN).is_err());
        assert!(AspectRatio::new(f64::INFINITY).is_err());
    }

    #[test]
    fn theta_values() {
        assert!((theta(2.0, y(0.1), &tol()).unwrap() - 3.15).abs() < 1e-14);
        assert!((theta(5.0, y(1.0), &tol()).unwrap() - 7.2).abs() < 1e-14);
        // boundary errors at exactly sqrt(y); the continuous extension attains lambda_plus
        assert!(theta(1.0, y(1.0), &tol()).is_err());
        let eps = 1e-7;
        let near = theta(1.0 + eps, y(1.0), &tol()).unwrap();
        assert!((near - 4.0).abs() < 1e-6 + 2.0 * eps);
    }

    #[test]
    fn gamma_inverts_theta() {
        let t = tol();
        assert!((gamma_shrink(7.2, y(1.0), &t).unwrap() - 5.0).abs() < 1e-12);
        let th = theta(3.0, y(0.5), &t).unwrap();
        assert!((gamma_shrink(th, y(0.5), &t).unwrap() - 3.0).abs() < 1e-12);
        assert!(gamma_shrink(4.0, y(1.0), &t).is_err()); // exactly lambda_plus
    }

    #[test]
    fn inverse_pair_on_log_grid() {
        let t = tol();
        for &yv in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            let ya = y(yv);
            let lo = (ya.sqrt() * 1.001).ln();
            let hi = 1e6f64.ln();
            for k in 0..200 {
                let d = (lo + (hi - lo) * k as f64 / 199.0).exp();
                let dd = gamma_shrink(theta(d, ya, &t).unwrap(), ya, &t).unwrap();
                assert!(
                    (dd - d).abs() <= 1e-10 * d.max(1.0),
                    "inverse identity failed at d={d}, y={yv}: got {dd}"
                );
            }
        }
    }

    #[test]
    fn monotone_maps() {
        let t = tol();
        for &yv in &[0.1, 1.0, 10.0] {
            let ya = y(yv);
            let lo = (ya.sqrt() * 1.001).ln();
            let hi = 1e4f64.ln();
            let mut prev_theta = f64::NEG_INFINITY;
            let mut prev_vth = f64::NEG_INFINITY;
            for k in 0..500 {
                let d = (lo + (hi - lo) * k as f64 / 499.0).exp();
                let th = theta(d, ya, &t).unwrap();
                let vt = vartheta(d, ya, &t).unwrap();
                assert!(th > prev_theta && vt > prev_vth, "not monotone at d={d}");
                assert!(th > spectral_edges(ya).lambda_plus);
                assert!(vt > 0.0 && vt < 1.0);
                prev_theta = th;
                prev_vth = vt;
            }
        }
    }

    #[test]
    fn vartheta_values() {
        let t = tol();
        assert!((vartheta(2.0, y(1.0), &t).unwrap() - 0.5).abs() < 1e-15);
        assert!((vartheta(1e6, y(1.0), &t).unwrap() - 1.0).abs() < 3e-6);
        assert!(vartheta(0.3, y(0.1), &t).is_err());
    }

    #[test]
    fn aux_funcs_frozen_values() {
        let t = tol();
        // h(d) = 1 for every d at y = 1
        for &d in &[1.5, 2.0, 7.0, 100.0] {
            assert!((aux_funcs(d, y(1.0), &t).unwrap().h - 1.0).abs() < 1e-15);
        }
        // l(1) at y = 1 is sqrt(2)
        let a = aux_funcs(1.0 + 1e-12, y(1.0), &t);
        assert!(a.is_err()); // right at the guard
        let a = aux_funcs(1.0 + 1e-6, y(1.0), &t).unwrap();
        assert!((a.l - 2.0f64.sqrt()).abs() < 1e-5);
        // frozen independent evaluation at (d = 2, y = 0.1)
        let a = aux_funcs(2.0, y(0.1), &t).unwrap();
        assert!((a.f - 0.27551020408163265306).abs() < 1e-15);
        assert!((a.g - 2.510510025433262345).abs() < 1e-14);
        assert!((a.h - 1.4285714285714285714).abs() < 1e-15);
        assert!((a.l - 1.463850109422799769).abs() < 1e-14);
    }

    #[test]
    fn aux_funcs_positive() {
        let t = tol();
        for &yv in &[0.1, 1.0, 10.0] {
            let ya = y(yv);
            let lo = (ya.sqrt() * 1.01).ln();
            for k in 0..100 {
                let d = (lo + (1e5f64.ln() - lo) * k as f64 / 99.0).exp();
                let a = aux_funcs(d, ya, &t).unwrap();
                assert!(a.f > 0.0 && a.g > 0.0 && a.h > 0.0 && a.l > 0.0);
            }
        }
    }

    fn quad_residual_m1(z: Complex64, yv: f64) -> f64 {
        let m = stieltjes_m1(z, y(yv)).unwrap();
        (z * yv * m * m + (z - (1.0 - yv)) * m + 1.0).norm()
    }

    fn quad_residual_m2(z: Complex64, yv: f64) -> f64 {
        let m = stieltjes_m2(z, y(yv)).unwrap();
        (z * m * m + (z + (1.0 - yv)) * m + 1.0).norm()
    }

    #[test]
    fn stieltjes_on_real_axis() {
        for &yv in &[0.1, 1.0, 10.0] {
            let edges = spectral_edges(y(yv));
            let z = Complex64::new(edges.lambda_plus + 1.0, 0.0);
            let m1 = stieltjes_m1(z, y(yv)).unwrap();
            assert!(m1.im.abs() < 1e-14, "m1 not real at real z > edge");
            assert!(quad_residual_m1(z, yv) < 1e-12);
            assert!(quad_residual_m2(z, yv) < 1e-12);
        }
        // Stieltjes asymptote m1(z) * z -> -1
        let z = Complex64::new(1e8, 0.0);
        let m1 = stieltjes_m1(z, y(0.5)).unwrap();
        assert!((m1 * z + 1.0).norm() < 1e-6);
    }

    #[test]
    fn stieltjes_rejects_bulk_points() {
        let e = spectral_edges(y(1.0));
        assert!(stieltjes_m1(Complex64::new(0.5 * e.lambda_plus, 0.0), y(1.0)).is_err());
        assert!(stieltjes_m1(Complex64::new(0.0, 0.0), y(1.0)).is_err());
        assert!(stieltjes_m2(Complex64::new(e.lambda_plus, 0.0), y(1.0)).is_err());
    }

    #[test]
    fn stieltjes_quadratics_random_points() {
        let mut rng = StdRng::seed_from_u64(20260811);
        for &yv in &[0.1, 1.0, 10.0] {
            let edges = spectral_edges(y(yv));
            let mut n = 0;
            while n < 100 {
                // random points off the support: either complex or real outside
                let z = match rng.gen_range(0..3) {
                    0 => Complex64::new(
                        rng.gen_range(-2.0..edges.lambda_plus + 10.0),
                        rng.gen_range(0.01..5.0),
                    ),
                    1 => Complex64::new(
                        edges.lambda_plus + rng.gen_range(0.01..50.0),
                        0.0,
                    ),
                    _ => Complex64::new(
                        rng.gen_range(-10.0..-0.01f64).min(edges.lambda_minus - 0.01),
                        0.0,
                    ),
                };
                if z.norm() < 1e-6 {
                    continue;
                }
                n += 1;
                assert!(quad_residual_m1(z, yv) < 1e-10, "m1 residual at z={z}, y={yv}");
                assert!(quad_residual_m2(z, yv) < 1e-10, "m2 residual at z={z}, y={yv}");
                if z.im > 0.0 {
                    assert!(stieltjes_m1(z, y(yv)).unwrap().im > 0.0);
                    assert!(stieltjes_m2(z, y(yv)).unwrap().im > 0.0);
                }
            }
        }
    }

    #[test]
    fn printed_identities_hold() {
        // m1 = -1/(z (1 + m2)); 1 + z m1 = (1 + z m2)/y; m1 ((z m2)' + 1) = m1'/m1,
        // with derivatives taken from the differentiated quadratics.
        for &yv in &[0.1, 1.0, 10.0] {
            let ya = y(yv);
            let edges = spectral_edges(ya);
            for &off in &[1.0, 0.1, 7.3, 200.0] {
                let z = Complex64::new(edges.lambda_plus + off, 0.0);
                let m1 = stieltjes_m1(z, ya).unwrap();
                let m2 = stieltjes_m2(z, ya).unwrap();
                let m1p = stieltjes_m1_prime(z, ya).unwrap();
                let m2p = stieltjes_m2_prime(z, ya).unwrap();
                assert!((m1 + 1.0 / (z * (1.0 + m2))).norm() < 1e-10);
                assert!(((1.0 + z * m1) - (1.0 + z * m2) / yv).norm() < 1e-10);
                let zm2_prime = m2 + z * m2p;
                assert!((m1 * (zm2_prime + 1.0) - m1p / m1).norm() < 1e-10);
            }
        }
    }
}
