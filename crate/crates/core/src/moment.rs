//! Exact moments of quadratic observables on Gaussian states: means, raw and
//! central moments, Pearson correlations, co-fluctuations, Stokes moment
//! tensors and TMS-stabilizer reports.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, PolMode};
use crate::observable::{MomentQuery, QuadraticObservable, StokesComponent};
use crate::planner::ClusterGraph;
use crate::wick::{ordered_moment, thread_pool, Tables};

/// Largest spatial-mode count for [`moment_tensor`]; the tensor has 4^n
/// entries.
pub const TENSOR_CAP: usize = 6;

/// Default threshold below which a stabilizer expectation counts as zero.
pub const STABILIZER_THRESHOLD: f64 = 1e-8;

fn real_checked(z: Complex64) -> Result<f64> {
    if z.im.abs() > 1e-10 + 1e-12 * z.re.abs() {
        return Err(Error::ImaginaryResidue(z.im.abs()));
    }
    Ok(z.re)
}

fn check_dims(s: &GaussianState, query: &MomentQuery) -> Result<()> {
    if query.max_mode() >= s.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: s.num_modes(),
            got: query.max_mode() + 1,
        });
    }
    Ok(())
}

/// `<Q> = sum K[m,n] N[m,n]`.
pub fn expectation(s: &GaussianState, q: &QuadraticObservable) -> Result<f64> {
    if q.max_mode() >= s.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: s.num_modes(),
            got: q.max_mode() + 1,
        });
    }
    let n = s.number_matrix();
    let sup = q.support();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, &ma) in sup.iter().enumerate() {
        for (b, &mb) in sup.iter().enumerate() {
            acc += q.coeff(a, b) * n[(ma, mb)];
        }
    }
    real_checked(acc)
}

/// `<Q_1 ... Q_q>` by ordered Wick contraction.
pub fn raw_moment(s: &GaussianState, query: &MomentQuery) -> Result<f64> {
    check_dims(s, query)?;
    let tables = Tables::quantum(s);
    let obs: Vec<&QuadraticObservable> = query.observables.iter().collect();
    real_checked(ordered_moment(&tables, &obs, false))
}

/// `<prod_j (Q_j - <Q_j>)>`, computed as the Wick sum restricted to pairings
/// without observable self-contractions.
pub fn central_moment(s: &GaussianState, query: &MomentQuery) -> Result<f64> {
    check_dims(s, query)?;
    let tables = Tables::quantum(s);
    let obs: Vec<&QuadraticObservable> = query.observables.iter().collect();
    real_checked(ordered_moment(&tables, &obs, true))
}

/// Reference route for the central moment: the subset inclusion-exclusion
/// expansion `sum_S (-1)^{|S|} prod_{j in S} <Q_j> <prod_{j not in S} Q_j>`.
/// Kept as an independent oracle for the pairing-restriction implementation.
pub fn central_moment_inclusion_exclusion(
    s: &GaussianState,
    query: &MomentQuery,
) -> Result<f64> {
    check_dims(s, query)?;
    let tables = Tables::quantum(s);
    let q = query.len();
    let means: Vec<f64> = query
        .observables
        .iter()
        .map(|o| expectation(s, o))
        .collect::<Result<_>>()?;
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 0..(1usize << q) {
        let mut coef = 1.0f64;
        let mut kept: Vec<&QuadraticObservable> = Vec::with_capacity(q);
        for (j, o) in query.observables.iter().enumerate() {
            if mask & (1 << j) != 0 {
                coef *= -means[j];
            } else {
                kept.push(o);
            }
        }
        total += Complex64::new(coef, 0.0) * ordered_moment(&tables, &kept, false);
    }
    real_checked(total)
}

/// Variance of a single observable, `<(Q - <Q>)^2>`.
pub fn variance(s: &GaussianState, q: &QuadraticObservable) -> Result<f64> {
    central_moment(s, &MomentQuery::central(vec![q.clone(), q.clone()])?)
}

/// Pearson correlation `cov / sqrt(var var)` of two observables.
pub fn pearson(
    s: &GaussianState,
    q1: &QuadraticObservable,
    q2: &QuadraticObservable,
) -> Result<f64> {
    let v1 = variance(s, q1)?;
    let v2 = variance(s, q2)?;
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let cov = central_moment(s, &MomentQuery::central(vec![q1.clone(), q2.clone()])?)?;
    Ok(cov / (v1 * v2).sqrt())
}

/// Central moment of the variance-regularized observables
/// `Q~ = (Q - <Q>) / sqrt(var Q)`.
pub fn cofluctuation(s: &GaussianState, query: &MomentQuery) -> Result<f64> {
    let c = central_moment(s, query)?;
    let mut denom = 1.0f64;
    for o in &query.observables {
        let v = variance(s, o)?;
        if !(v > 0.0) {
            return Err(Error::ZeroVariance);
        }
        denom *= v.sqrt();
    }
    Ok(c / denom)
}

/// Evaluate a query according to its flags: regularized -> co-fluctuation,
/// centered -> central moment, otherwise raw moment.
pub fn evaluate(s: &GaussianState, query: &MomentQuery) -> Result<f64> {
    if query.regularized {
        cofluctuation(s, query)
    } else if query.centered {
        central_moment(s, query)
    } else {
        raw_moment(s, query)
    }
}

/// All 4^n joint central Stokes moments of n polarized spatial modes.
///
/// This is the pseudo-density expansion; it is not a density matrix and the
/// `trace_normalization` is `2^n` times the all-Sigma_0 entry.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentTensor {
    /// Number of spatial modes.
    pub n: usize,
    /// Row-major over base-4 digits, first mode most significant:
    /// `entries[i_1 * 4^{n-1} + ... + i_n]` = `<Sigma-bar_{i_1} ... Sigma-bar_{i_n}>`.
    pub entries: Vec<f64>,
    pub trace_normalization: f64,
}

impl MomentTensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.n);
        let flat = idx.iter().fold(0usize, |acc, &d| acc * 4 + d);
        self.entries[flat]
    }

    /// Indices of entries with magnitude above `threshold`.
    pub fn nonzero_pattern(&self, threshold: f64) -> Vec<Vec<usize>> {
        (0..self.entries.len())
            .filter(|&f| self.entries[f].abs() > threshold)
            .map(|mut f| {
                let mut idx = vec![0usize; self.n];
                for k in (0..self.n).rev() {
                    idx[k] = f % 4;
                    f /= 4;
                }
                idx
            })
            .collect()
    }
}

pub fn moment_tensor(s: &GaussianState, modes: &[PolMode]) -> Result<MomentTensor> {
    let n = modes.len();
    if n == 0 || n > TENSOR_CAP {
        return Err(Error::TensorTooLarge {
            modes: n,
            cap: TENSOR_CAP,
        });
    }
    for pm in modes {
        if pm.h >= s.num_modes() || pm.v >= s.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: s.num_modes(),
                got: pm.h.max(pm.v) + 1,
            });
        }
    }
    let tables = Tables::quantum(s);
    let total = 4usize.pow(n as u32);
    let entries: Vec<Result<f64>> = thread_pool().install(|| {
        (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut digits = vec![0usize; n];
                let mut f = flat;
                for k in (0..n).rev() {
                    digits[k] = f % 4;
                    f /= 4;
                }
                let obs: Vec<QuadraticObservable> = digits
                    .iter()
                    .zip(modes)
                    .map(|(&d, &pm)| {
                        QuadraticObservable::stokes(StokesComponent::from_index(d).unwrap(), pm)
                    })
                    .collect();
                let refs: Vec<&QuadraticObservable> = obs.iter().collect();
                real_checked(ordered_moment(&tables, &refs, true))
            })
            .collect()
    });
    let entries: Vec<f64> = entries.into_iter().collect::<Result<_>>()?;
    let trace_normalization = 2f64.powi(n as i32) * entries[0];
    Ok(MomentTensor {
        n,
        entries,
        trace_normalization,
    })
}

/// Per-vertex TMS-stabilizer evaluation: Sigma-bar_2 at the vertex,
/// Sigma-bar_1 on its neighbors, Sigma-bar_0 everywhere else.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilizerReport {
    pub betas: Vec<f64>,
    /// Central moment with Sigma-bar_3 substituted at the vertex; a
    /// component cross-correlation that vanishes for the phase-0
    /// constructions.
    pub cross_residuals: Vec<f64>,
    /// Stabilizer moment divided by the product of observable standard
    /// deviations.
    pub cofluctuations: Vec<f64>,
    pub threshold: f64,
    pub all_nonzero: bool,
    pub equality_predicted: bool,
    pub equal_within_tolerance: Option<bool>,
    pub pass: bool,
}

/// Evaluate the stabilizer pattern of every vertex of `graph` on `s`.
pub fn stabilizer_report(
    s: &GaussianState,
    graph: &ClusterGraph,
    threshold: f64,
) -> Result<StabilizerReport> {
    let n = graph.vertex_count();
    if n == 0 || n > TENSOR_CAP.max(crate::observable::QUERY_CAP) {
        return Err(Error::TensorTooLarge {
            modes: n,
            cap: crate::observable::QUERY_CAP,
        });
    }
    for v in 0..n {
        let pm = graph.vertex_mode(v);
        if pm.h >= s.num_modes() || pm.v >= s.num_modes() {
            return Err(Error::UnmappedVertex(v));
        }
    }
    let tables = Tables::quantum(s);
    let vertex_query = |vertex: usize, vertex_comp: StokesComponent| -> Vec<QuadraticObservable> {
        (0..n)
            .map(|k| {
                let comp = if k == vertex {
                    vertex_comp
                } else if graph.neighbors(vertex).contains(&k) {
                    StokesComponent::S1
                } else {
                    StokesComponent::S0
                };
                QuadraticObservable::stokes(comp, graph.vertex_mode(k))
            })
            .collect()
    };

    let mut betas = Vec::with_capacity(n);
    let mut cross = Vec::with_capacity(n);
    let mut cofs = Vec::with_capacity(n);
    for v in 0..n {
        let obs = vertex_query(v, StokesComponent::S2);
        let refs: Vec<&QuadraticObservable> = obs.iter().collect();
        let beta = real_checked(ordered_moment(&tables, &refs, true))?;
        betas.push(beta);

        let obs3 = vertex_query(v, StokesComponent::S3);
        let refs3: Vec<&QuadraticObservable> = obs3.iter().collect();
        cross.push(real_checked(ordered_moment(&tables, &refs3, true))?.abs());

        let mut denom = 1.0f64;
        let mut ok = true;
        for o in &obs {
            let var = variance(s, o)?;
            if var > 0.0 {
                denom *= var.sqrt();
            } else {
                ok = false;
            }
        }
        cofs.push(if ok { beta / denom } else { 0.0 });
    }

    let all_nonzero = betas.iter().all(|b| b.abs() > threshold);
    let equality_predicted = graph.predicts_equal_stabilizers();
    let equal_within_tolerance = if equality_predicted {
        let max = betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = betas.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min <= 1e-9)
    } else {
        None
    };
    let pass = all_nonzero && equal_within_tolerance.unwrap_or(true);
    Ok(StabilizerReport {
        betas,
        cross_residuals: cross,
        cofluctuations: cofs,
        threshold,
        all_nonzero,
        equality_predicted,
        equal_within_tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianState;
    use crate::observable::StokesComponent::*;

    fn bell(r: f64, phi: f64) -> GaussianState {
        // a_h=0 a_v=1 b_h=2 b_v=3
        GaussianState::vacuum(4)
            .unwrap()
            .apply_squeezer(0, 2, r, 0.0)
            .unwrap()
            .apply_squeezer(1, 3, r, phi)
            .unwrap()
    }

    const A: PolMode = PolMode { h: 0, v: 1 };
    const B: PolMode = PolMode { h: 2, v: 3 };

    fn stokes_pair(i: StokesComponent, j: StokesComponent) -> MomentQuery {
        MomentQuery::raw(vec![
            QuadraticObservable::stokes(i, A),
            QuadraticObservable::stokes(j, B),
        ])
        .unwrap()
    }

    #[test]
    fn bell_means() {
        let s = bell(0.7, 0.0);
        let sinh2 = 0.7f64.sinh().powi(2);
        assert!((expectation(&s, &QuadraticObservable::stokes(S0, A)).unwrap() - 2.0 * sinh2)
            .abs()
            < 1e-12);
        for c in [S1, S2, S3] {
            assert!(expectation(&s, &QuadraticObservable::stokes(c, A)).unwrap().abs() < 1e-12);
            assert!(expectation(&s, &QuadraticObservable::stokes(c, B)).unwrap().abs() < 1e-12);
        }
        assert!(expectation(&GaussianState::vacuum(4).unwrap(), &QuadraticObservable::stokes(S0, A))
            .unwrap()
            .abs()
            < 1e-15);
    }

    #[test]
    fn bell_stokes_table() {
        let r = 1.0f64;
        let s = bell(r, 0.0);
        let s2c2 = r.sinh().powi(2) * r.cosh().powi(2);
        let raw00 = raw_moment(&s, &stokes_pair(S0, S0)).unwrap();
        assert!((raw00 - (2.0 * s2c2 + 4.0 * r.sinh().powi(4))).abs() < 1e-10);
        assert!((raw00 - 14.206783244845099).abs() < 1e-10);
        for (i, sign) in [(S1, 1.0), (S2, 1.0), (S3, -1.0)] {
            let v = raw_moment(&s, &stokes_pair(i, i)).unwrap();
            assert!((v - sign * 2.0 * s2c2).abs() < 1e-10);
        }
        // all 12 cross terms vanish
        for i in StokesComponent::ALL {
            for j in StokesComponent::ALL {
                if i != j {
                    assert!(raw_moment(&s, &stokes_pair(i, j)).unwrap().abs() < 1e-12);
                }
            }
        }
        // central moments are balanced
        for (i, sign) in [(S0, 1.0), (S1, 1.0), (S2, 1.0), (S3, -1.0)] {
            let q = MomentQuery::central(vec![
                QuadraticObservable::stokes(i, A),
                QuadraticObservable::stokes(i, B),
            ])
            .unwrap();
            assert!((central_moment(&s, &q).unwrap() - sign * 2.0 * s2c2).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_and_pearson() {
        for r in [0.1, 1.0, 2.3] {
            let s = GaussianState::vacuum(2)
                .unwrap()
                .apply_squeezer(0, 1, r, 0.0)
                .unwrap();
            let na = QuadraticObservable::number(0);
            let nb = QuadraticObservable::number(1);
            let rho = pearson(&s, &na, &nb).unwrap();
            assert!((rho - 1.0).abs() < 1e-10, "r={r}: rho={rho}");
            let v = variance(&s, &na).unwrap();
            assert!((v - r.sinh().powi(2) * r.cosh().powi(2)).abs() < 1e-10 * v.max(1.0));
        }
        // vacuum: zero variance is an error
        let vac = GaussianState::vacuum(2).unwrap();
        assert!(matches!(
            pearson(&vac, &QuadraticObservable::number(0), &QuadraticObservable::number(1)),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn lossy_pearson_frozen_value() {
        // Fock-oracle derived regression: TMSV(r=1) with t=0.5 loss on one arm
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_squeezer(0, 1, 1.0, 0.0)
            .unwrap()
            .apply_loss(0, 0.5)
            .unwrap();
        let na = QuadraticObservable::number(0);
        let nb = QuadraticObservable::number(1);
        assert!((s.mean_photon(0).unwrap() - 0.6905489227709077).abs() < 1e-12);
        let cov = central_moment(
            &s,
            &MomentQuery::central(vec![na.clone(), nb.clone()]).unwrap(),
        )
        .unwrap();
        assert!((cov - 1.6442645522510302).abs() < 1e-12);
        let rho = pearson(&s, &na, &nb).unwrap();
        assert!((rho - 0.8391889401033790).abs() < 1e-10);
    }

    #[test]
    fn hadamard_kills_number_correlation() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_squeezer(0, 1, 1.3, 0.0)
            .unwrap()
            .apply_hadamard(0, 1)
            .unwrap();
        let q = MomentQuery::central(vec![
            QuadraticObservable::number(0),
            QuadraticObservable::number(1),
        ])
        .unwrap();
        assert!(central_moment(&s, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn central_equals_inclusion_exclusion() {
        let s = bell(0.8, 0.4);
        for (i, j) in [(S0, S0), (S1, S2), (S2, S2), (S3, S1)] {
            let q = MomentQuery::central(vec![
                QuadraticObservable::stokes(i, A),
                QuadraticObservable::stokes(j, B),
            ])
            .unwrap();
            let fast = central_moment(&s, &q).unwrap();
            let slow = central_moment_inclusion_exclusion(&s, &q).unwrap();
            assert!((fast - slow).abs() < 1e-9 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn central_moment_permutation_invariant() {
        let s = bell(0.6, 0.0);
        let o: Vec<QuadraticObservable> = vec![
            QuadraticObservable::stokes(S0, A),
            QuadraticObservable::stokes(S0, B),
        ];
        let fwd = central_moment(&s, &MomentQuery::central(o.clone()).unwrap()).unwrap();
        let rev = central_moment(
            &s,
            &MomentQuery::central(o.into_iter().rev().collect()).unwrap(),
        )
        .unwrap();
        assert!((fwd - rev).abs() < 1e-12);
    }

    #[test]
    fn bell_cofluctuation_is_one() {
        let s = bell(0.9, 0.0);
        let q = MomentQuery::regularized(vec![
            QuadraticObservable::stokes(S0, A),
            QuadraticObservable::stokes(S0, B),
        ])
        .unwrap();
        assert!((cofluctuation(&s, &q).unwrap() - 1.0).abs() < 1e-10);
        assert!((evaluate(&s, &q).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unequal_bell_tensor_entries() {
        // eta, mu, nu of the unequally squeezed Bell state
        let s = GaussianState::vacuum(4)
            .unwrap()
            .apply_squeezer(0, 2, 1.0, 0.0)
            .unwrap()
            .apply_squeezer(1, 3, 0.6, 0.0)
            .unwrap();
        let t = moment_tensor(&s, &[A, B]).unwrap();
        let eta = 1.0f64.sinh().powi(2) * 1.0f64.cosh().powi(2);
        let nu = 0.6f64.sinh().powi(2) * 0.6f64.cosh().powi(2);
        let mu = 1.0f64.sinh() * 1.0f64.cosh() * 0.6f64.sinh() * 0.6f64.cosh();
        assert!((eta - 3.2885291045020604).abs() < 1e-12);
        assert!((nu - 0.5696183958706882).abs() < 1e-12);
        assert!((mu - 1.3686514067798763).abs() < 1e-12);
        // S0S0 = S1S1 = eta + nu ; S2S2 = 2 mu ; S3S3 = -2 mu
        assert!((t.get(&[0, 0]) - (eta + nu)).abs() < 1e-10);
        assert!((t.get(&[1, 1]) - (eta + nu)).abs() < 1e-10);
        assert!((t.get(&[2, 2]) - 2.0 * mu).abs() < 1e-10);
        assert!((t.get(&[3, 3]) + 2.0 * mu).abs() < 1e-10);
        // eta and nu recoverable from the h/h and v/v covariances
        assert!((t.get(&[0, 1]) - (eta - nu)).abs() < 1e-10);
        assert!((t.trace_normalization - 4.0 * t.get(&[0, 0])).abs() < 1e-12);
    }

    #[test]
    fn vacuum_tensor_is_zero() {
        let s = GaussianState::vacuum(4).unwrap();
        let t = moment_tensor(&s, &[A, B]).unwrap();
        assert!(t.entries.iter().all(|&e| e == 0.0));
        assert!(t.nonzero_pattern(1e-12).is_empty());
    }
}
