//! Quadratic photon-number observables and moment queries.
//!
//! Every observable has the form `Q = sum_{m,n} K[m,n] a_m^dag a_n` with a
//! Hermitian coefficient matrix K. The built-in constructors cover the plain
//! photon number of a single mode and the four Stokes operators of a
//! polarized spatial mode:
//!
//! ```text
//!   Sigma_0 = a_h^dag a_h + a_v^dag a_v
//!   Sigma_1 = a_h^dag a_h - a_v^dag a_v
//!   Sigma_2 = a_h^dag a_v + a_v^dag a_h
//!   Sigma_3 = i (a_v^dag a_h - a_h^dag a_v)
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::gaussian::{ModeId, PolMode};

/// Stokes component index 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum StokesComponent {
    S0,
    S1,
    S2,
    S3,
}

impl StokesComponent {
    pub const ALL: [StokesComponent; 4] = [Self::S0, Self::S1, Self::S2, Self::S3];

    pub fn index(self) -> usize {
        match self {
            Self::S0 => 0,
            Self::S1 => 1,
            Self::S2 => 2,
            Self::S3 => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl std::fmt::Display for StokesComponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "S{}", self.index())
    }
}

/// What an observable measures; kept for labeling and reports.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableLabel {
    /// Photon number of one mode.
    Number(ModeId),
    /// Stokes component of a polarized spatial mode.
    Stokes(StokesComponent, PolMode),
    Custom(String),
}

/// Hermitian quadratic form `sum K[m,n] a_m^dag a_n`, stored on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObservable {
    pub label: ObservableLabel,
    /// Mode indices the coefficient matrix acts on, ascending.
    support: SmallVec<[ModeId; 2]>,
    /// Row-major coefficient matrix over `support`.
    coeffs: SmallVec<[Complex64; 4]>,
}

impl QuadraticObservable {
    /// Photon number `n_i`.
    pub fn number(i: ModeId) -> Self {
        Self {
            label: ObservableLabel::Number(i),
            support: SmallVec::from_slice(&[i]),
            coeffs: SmallVec::from_slice(&[Complex64::new(1.0, 0.0)]),
        }
    }

    /// Stokes operator of `mode`, in the (h, v) submode basis.
    pub fn stokes(comp: StokesComponent, mode: PolMode) -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let k: [Complex64; 4] = match comp {
            StokesComponent::S0 => [o, z, z, o],
            StokesComponent::S1 => [o, z, z, -o],
            StokesComponent::S2 => [z, o, o, z],
            StokesComponent::S3 => [z, -i, i, z],
        };
        // support must be ascending; transpose the 2x2 block if v < h
        if mode.h <= mode.v {
            Self {
                label: ObservableLabel::Stokes(comp, mode),
                support: SmallVec::from_slice(&[mode.h, mode.v]),
                coeffs: SmallVec::from_slice(&k),
            }
        } else {
            Self {
                label: ObservableLabel::Stokes(comp, mode),
                support: SmallVec::from_slice(&[mode.v, mode.h]),
                coeffs: SmallVec::from_slice(&[k[3], k[2], k[1], k[0]]),
            }
        }
    }

    /// Observable from a full M x M Hermitian coefficient matrix; the support
    /// is extracted from the nonzero pattern.
    pub fn custom(label: impl Into<String>, k: &DMatrix<Complex64>) -> Result<Self> {
        let m = k.nrows();
        if k.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: k.ncols(),
            });
        }
        let mut herm = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                herm = herm.max((k[(i, j)] - k[(j, i)].conj()).norm());
            }
        }
        if herm > 1e-12 {
            return Err(Error::NotHermitian(herm));
        }
        let support: SmallVec<[ModeId; 2]> = (0..m)
            .filter(|&i| (0..m).any(|j| k[(i, j)].norm() > 0.0 || k[(j, i)].norm() > 0.0))
            .collect();
        let s = support.len();
        let mut coeffs = SmallVec::with_capacity(s * s);
        for &a in &support {
            for &b in &support {
                coeffs.push(k[(a, b)]);
            }
        }
        Ok(Self {
            label: ObservableLabel::Custom(label.into()),
            support,
            coeffs,
        })
    }

    pub fn support(&self) -> &[ModeId] {
        &self.support
    }

    /// Coefficient matrix entry over support indices.
    pub fn coeff(&self, a: usize, b: usize) -> Complex64 {
        self.coeffs[a * self.support.len() + b]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn max_mode(&self) -> ModeId {
        *self.support.last().unwrap_or(&0)
    }

    /// Trace of the coefficient matrix (over the full mode space, equal to the
    /// trace over the support).
    pub fn trace(&self) -> Complex64 {
        let s = self.support.len();
        (0..s).map(|i| self.coeff(i, i)).sum()
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.support.iter().any(|m| other.support.contains(m))
    }

    /// Whether two observables commute: disjoint supports always commute;
    /// observables on identical supports commute iff their coefficient
    /// matrices do.
    pub fn commutes_with(&self, other: &Self) -> bool {
        if !self.overlaps(other) {
            return true;
        }
        if self.support != other.support {
            // overlapping but unequal supports: compare on the union
            let union: Vec<ModeId> = {
                let mut u: Vec<ModeId> = self
                    .support
                    .iter()
                    .chain(other.support.iter())
                    .copied()
                    .collect();
                u.sort_unstable();
                u.dedup();
                u
            };
            let lift = |o: &Self| {
                let n = union.len();
                let mut m = DMatrix::<Complex64>::zeros(n, n);
                for (a, &ma) in o.support.iter().enumerate() {
                    for (b, &mb) in o.support.iter().enumerate() {
                        let ia = union.iter().position(|&x| x == ma).unwrap();
                        let ib = union.iter().position(|&x| x == mb).unwrap();
                        m[(ia, ib)] = o.coeff(a, b);
                    }
                }
                m
            };
            let ka = lift(self);
            let kb = lift(other);
            return (&ka * &kb - &kb * &ka).norm() < 1e-12;
        }
        let s = self.support.len();
        let mut comm = 0.0f64;
        for i in 0..s {
            for j in 0..s {
                let mut ab = Complex64::new(0.0, 0.0);
                let mut ba = Complex64::new(0.0, 0.0);
                for k in 0..s {
                    ab += self.coeff(i, k) * other.coeff(k, j);
                    ba += other.coeff(i, k) * self.coeff(k, j);
                }
                comm = comm.max((ab - ba).norm());
            }
        }
        comm < 1e-12
    }
}

/// Maximum number of observables per query; the pairing enumeration is
/// O((2q-1)!!) in the worst case.
pub const QUERY_CAP: usize = 12;

/// An ordered list of mutually commuting observables to be multiplied under
/// the expectation.
#[derive(Debug, Clone)]
pub struct MomentQuery {
    pub observables: Vec<QuadraticObservable>,
    /// Subtract each observable's mean before multiplying.
    pub centered: bool,
    /// Additionally divide each centered observable by its standard
    /// deviation (the co-fluctuation form). Implies `centered`.
    pub regularized: bool,
}

impl MomentQuery {
    pub fn raw(observables: Vec<QuadraticObservable>) -> Result<Self> {
        Self::new(observables, false, false)
    }

    pub fn central(observables: Vec<QuadraticObservable>) -> Result<Self> {
        Self::new(observables, true, false)
    }

    pub fn regularized(observables: Vec<QuadraticObservable>) -> Result<Self> {
        Self::new(observables, true, true)
    }

    pub fn new(
        observables: Vec<QuadraticObservable>,
        centered: bool,
        regularized: bool,
    ) -> Result<Self> {
        if observables.is_empty() || observables.len() > QUERY_CAP {
            return Err(Error::QueryTooLong {
                len: observables.len(),
                cap: QUERY_CAP,
            });
        }
        for (i, a) in observables.iter().enumerate() {
            for b in &observables[..i] {
                if !a.commutes_with(b) {
                    return Err(Error::NonCommutingQuery);
                }
            }
        }
        Ok(Self {
            observables,
            centered: centered || regularized,
            regularized,
        })
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn max_mode(&self) -> ModeId {
        self.observables
            .iter()
            .map(|o| o.max_mode())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stokes_matrices() {
        let m = PolMode::new(0, 1);
        let s3 = QuadraticObservable::stokes(StokesComponent::S3, m);
        assert_eq!(s3.support(), &[0, 1]);
        assert_eq!(s3.coeff(0, 1), Complex64::new(0.0, -1.0));
        assert_eq!(s3.coeff(1, 0), Complex64::new(0.0, 1.0));
        // hermiticity of all four
        for c in StokesComponent::ALL {
            let o = QuadraticObservable::stokes(c, m);
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(o.coeff(a, b), o.coeff(b, a).conj());
                }
            }
        }
    }

    #[test]
    fn stokes_reversed_pair() {
        // registering (h, v) = (3, 2) must produce the same operator as a
        // matrix over ascending modes
        let o = QuadraticObservable::stokes(StokesComponent::S1, PolMode::new(3, 2));
        assert_eq!(o.support(), &[2, 3]);
        assert_eq!(o.coeff(0, 0), Complex64::new(-1.0, 0.0)); // v mode
        assert_eq!(o.coeff(1, 1), Complex64::new(1.0, 0.0)); // h mode
    }

    #[test]
    fn custom_requires_hermitian() {
        let mut k = DMatrix::<Complex64>::zeros(3, 3);
        k[(0, 1)] = Complex64::new(1.0, 0.5);
        assert!(QuadraticObservable::custom("bad", &k).is_err());
        k[(1, 0)] = Complex64::new(1.0, -0.5);
        let o = QuadraticObservable::custom("ok", &k).unwrap();
        assert_eq!(o.support(), &[0, 1]);
    }

    #[test]
    fn query_commutation_rules() {
        let n0 = QuadraticObservable::number(0);
        let n1 = QuadraticObservable::number(1);
        // disjoint: fine
        MomentQuery::central(vec![n0.clone(), n1]).unwrap();
        // identical observable twice (variance): fine
        MomentQuery::central(vec![n0.clone(), n0.clone()]).unwrap();
        // S1 and S2 on the same mode do not commute
        let m = PolMode::new(0, 1);
        let s1 = QuadraticObservable::stokes(StokesComponent::S1, m);
        let s2 = QuadraticObservable::stokes(StokesComponent::S2, m);
        assert!(matches!(
            MomentQuery::central(vec![s1.clone(), s2]),
            Err(Error::NonCommutingQuery)
        ));
        // S0 and S1 on the same mode commute
        let s0 = QuadraticObservable::stokes(StokesComponent::S0, m);
        MomentQuery::central(vec![s0, s1]).unwrap();
    }

    #[test]
    fn query_cap() {
        let obs: Vec<_> = (0..13).map(QuadraticObservable::number).collect();
        assert!(matches!(
            MomentQuery::raw(obs),
            Err(Error::QueryTooLong { len: 13, cap: 12 })
        ));
        assert!(MomentQuery::raw(vec![]).is_err());
    }
}
