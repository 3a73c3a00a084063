//! Zero-mean Gaussian states of M bosonic modes, represented by their
//! second moments, with squeezers, passive optics, loss and gain acting as
//! transformations of those moments.
//!
//! A state is stored as the pair of matrices
//!
//! ```text
//!     N[i, j] = <a_i^dag a_j>        (Hermitian)
//!     A[i, j] = <a_i a_j>            (symmetric)
//! ```
//!
//! in photon-number units. The mean field is identically zero: no
//! displacement operation exists in this crate, so the invariant never needs
//! checking. The quadrature covariance matrix is reconstructed only for the
//! physicality test `sigma + i*Omega/2 >= 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Index of a bosonic mode within a [`GaussianState`].
pub type ModeId = usize;

/// A spatial mode carrying two polarization submodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolMode {
    pub h: ModeId,
    pub v: ModeId,
}

impl PolMode {
    pub fn new(h: ModeId, v: ModeId) -> Self {
        Self { h, v }
    }
}

/// Default absolute tolerance for exact-engine validity checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Zero-mean Gaussian state over `modes` bosonic modes.
///
/// States are immutable values: every operation returns a new state, so a
/// state can be shared read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    modes: usize,
    n: DMatrix<Complex64>,
    a: DMatrix<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl GaussianState {
    /// The M-mode vacuum: all second moments zero.
    pub fn vacuum(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::EmptyState);
        }
        Ok(Self {
            modes,
            n: DMatrix::zeros(modes, modes),
            a: DMatrix::zeros(modes, modes),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.modes
    }

    /// `<a_i^dag a_j>` matrix.
    pub fn number_matrix(&self) -> &DMatrix<Complex64> {
        &self.n
    }

    /// `<a_i a_j>` matrix.
    pub fn pair_matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    fn check_mode(&self, i: ModeId) -> Result<()> {
        if i >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode: i,
                modes: self.modes,
            });
        }
        Ok(())
    }

    fn check_distinct(&self, ms: &[ModeId]) -> Result<()> {
        for (k, &m) in ms.iter().enumerate() {
            self.check_mode(m)?;
            if ms[..k].contains(&m) {
                return Err(Error::DegenerateModes(m));
            }
        }
        Ok(())
    }

    /// General Bogoliubov update `a_i -> sum_j U[i,j] a_j + V[i,j] a_j^dag`
    /// of the second moments.
    fn bogoliubov(&self, u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> Self {
        let eye = DMatrix::<Complex64>::identity(self.modes, self.modes);
        let uc = u.map(|z| z.conj());
        let vc = v.map(|z| z.conj());
        let ac = self.a.map(|z| z.conj());
        let nt1 = self.n.transpose() + &eye;
        let n_new = &uc * &self.n * u.transpose()
            + &uc * &ac * v.transpose()
            + &vc * &self.a * u.transpose()
            + &vc * &nt1 * v.transpose();
        let a_new = u * &self.a * u.transpose()
            + u * &nt1 * v.transpose()
            + v * &self.n * u.transpose()
            + v * &ac * v.transpose();
        Self {
            modes: self.modes,
            n: n_new,
            a: a_new,
        }
    }

    /// Passive 2x2 mixing of modes `i`, `j` by the unitary `m` acting on
    /// annihilation operators.
    fn passive_pair(&self, i: ModeId, j: ModeId, m: [[Complex64; 2]; 2]) -> Self {
        let mut u = DMatrix::<Complex64>::identity(self.modes, self.modes);
        u[(i, i)] = m[0][0];
        u[(i, j)] = m[0][1];
        u[(j, i)] = m[1][0];
        u[(j, j)] = m[1][1];
        let v = DMatrix::<Complex64>::zeros(self.modes, self.modes);
        self.bogoliubov(&u, &v)
    }

    /// Two-mode squeezer S_{ij}(r, phi).
    ///
    /// Acting on vacuum modes this yields `N[i,i] = N[j,j] = sinh^2 r` and
    /// `A[i,j] = e^{i phi} sinh r cosh r`.
    pub fn apply_squeezer(&self, i: ModeId, j: ModeId, r: f64, phi: f64) -> Result<Self> {
        self.check_distinct(&[i, j])?;
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                constraint: "r >= 0",
            });
        }
        let ch = Complex64::new(r.cosh(), 0.0);
        let sh = Complex64::from_polar(r.sinh(), phi);
        let mut u = DMatrix::<Complex64>::identity(self.modes, self.modes);
        u[(i, i)] = ch;
        u[(j, j)] = ch;
        let mut v = DMatrix::<Complex64>::zeros(self.modes, self.modes);
        v[(i, j)] = sh;
        v[(j, i)] = sh;
        Ok(self.bogoliubov(&u, &v))
    }

    /// 50/50 Hadamard mixing: `a -> (a + b)/sqrt(2)`, `b -> (a - b)/sqrt(2)`.
    ///
    /// Self-inverse, so applying it twice restores the second moments.
    pub fn apply_hadamard(&self, i: ModeId, j: ModeId) -> Result<Self> {
        self.check_distinct(&[i, j])?;
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Ok(self.passive_pair(i, j, [[s, s], [s, -s]]))
    }

    /// General beamsplitter `a -> cos(theta) a + e^{i phi} sin(theta) b`,
    /// `b -> -e^{-i phi} sin(theta) a + cos(theta) b`.
    pub fn apply_beamsplitter(&self, i: ModeId, j: ModeId, theta: f64, phi: f64) -> Result<Self> {
        self.check_distinct(&[i, j])?;
        let c = Complex64::new(theta.cos(), 0.0);
        let s = Complex64::from_polar(theta.sin(), phi);
        Ok(self.passive_pair(i, j, [[c, s], [-s.conj(), c]]))
    }

    /// Swap the annihilation operators of two modes.
    pub fn apply_swap(&self, i: ModeId, j: ModeId) -> Result<Self> {
        self.check_distinct(&[i, j])?;
        let one = Complex64::new(1.0, 0.0);
        Ok(self.passive_pair(i, j, [[ZERO, one], [one, ZERO]]))
    }

    /// Polarizing beamsplitter on two spatial modes: v-submodes swap, h-submodes
    /// pass through. The reflection phase is dropped; see
    /// [`apply_pbs_with_phase`](Self::apply_pbs_with_phase) for the i-phase
    /// convention.
    pub fn apply_pbs(&self, a: PolMode, b: PolMode) -> Result<Self> {
        self.check_distinct(&[a.h, a.v, b.h, b.v])?;
        self.apply_swap(a.v, b.v)
    }

    /// PBS variant keeping the i phase on reflection: `a_v -> i b_v`,
    /// `b_v -> i a_v`. Exposed for sensitivity checks only.
    pub fn apply_pbs_with_phase(&self, a: PolMode, b: PolMode) -> Result<Self> {
        self.check_distinct(&[a.h, a.v, b.h, b.v])?;
        let im = Complex64::new(0.0, 1.0);
        Ok(self.passive_pair(a.v, b.v, [[ZERO, im], [im, ZERO]]))
    }

    /// Pure loss on mode `i` with intensity transmissivity `t = cos^2 theta`.
    ///
    /// The unmeasured ancilla is vacuum and uncorrelated, so rows and columns
    /// `i` of both moment matrices scale by sqrt(t) and no cross terms appear.
    pub fn apply_loss(&self, i: ModeId, t: f64) -> Result<Self> {
        self.check_mode(i)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter {
                name: "t",
                value: t,
                constraint: "0 <= t <= 1",
            });
        }
        let s = Complex64::new(t.sqrt(), 0.0);
        let mut out = self.clone();
        for k in 0..self.modes {
            out.n[(i, k)] *= s;
            out.a[(i, k)] *= s;
            if k != i {
                out.n[(k, i)] *= s;
                out.a[(k, i)] *= s;
            }
        }
        // the diagonal entries sit in both row and column i
        out.n[(i, i)] *= s;
        out.a[(i, i)] *= s;
        Ok(out)
    }

    /// Phase-insensitive linear amplification of mode `i` with gain `g`:
    /// `a -> cosh(g) a + sinh(g) gamma^dag` with a vacuum noise mode.
    pub fn apply_gain(&self, i: ModeId, g: f64) -> Result<Self> {
        self.check_mode(i)?;
        if !(g >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "g",
                value: g,
                constraint: "g >= 0",
            });
        }
        let ch = Complex64::new(g.cosh(), 0.0);
        let mut out = self.clone();
        for k in 0..self.modes {
            out.n[(i, k)] *= ch;
            out.a[(i, k)] *= ch;
            if k != i {
                out.n[(k, i)] *= ch;
                out.a[(k, i)] *= ch;
            }
        }
        out.n[(i, i)] *= ch;
        out.a[(i, i)] *= ch;
        out.n[(i, i)] += Complex64::new(g.sinh().powi(2), 0.0);
        Ok(out)
    }

    /// Mean photon number `<n_i> = N[i,i]`.
    pub fn mean_photon(&self, i: ModeId) -> Result<f64> {
        self.check_mode(i)?;
        let z = self.n[(i, i)];
        if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
            return Err(Error::ImaginaryResidue(z.im.abs()));
        }
        Ok(z.re)
    }

    /// Total mean photon number over all modes.
    pub fn total_mean_photon(&self) -> f64 {
        (0..self.modes).map(|i| self.n[(i, i)].re).sum()
    }

    /// Check all state invariants: N Hermitian, A symmetric, N positive
    /// semidefinite, and the uncertainty relation `sigma + i*Omega/2 >= 0`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.modes;
        let mut herm = 0.0f64;
        let mut symm = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                herm = herm.max((self.n[(i, j)] - self.n[(j, i)].conj()).norm());
                symm = symm.max((self.a[(i, j)] - self.a[(j, i)]).norm());
            }
        }
        if herm > tol {
            return Err(Error::NotHermitian(herm));
        }
        if symm > tol {
            return Err(Error::NotSymmetric(symm));
        }
        let n_min = min_eigenvalue(&self.n);
        if n_min < -tol {
            return Err(Error::NotPositiveSemidefinite(n_min));
        }
        let p_min = self.physicality_margin();
        if p_min < -tol {
            return Err(Error::Unphysical(p_min));
        }
        Ok(())
    }

    /// Minimum eigenvalue of `sigma + i*Omega/2`; non-negative for physical
    /// states.
    ///
    /// Quadratures are `x = (a + a^dag)/sqrt(2)`, `p = (a - a^dag)/(i sqrt(2))`
    /// so that the vacuum has `sigma = I/2`. In that basis
    ///
    /// ```text
    ///   sigma_xx = Re A + Re N + I/2
    ///   sigma_pp = Re N + I/2 - Re A
    ///   sigma_xp = Im A + Im N
    /// ```
    pub fn physicality_margin(&self) -> f64 {
        let m = self.modes;
        let mut h = DMatrix::<Complex64>::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                let nr = (self.n[(i, j)] + self.n[(j, i)].conj()) * 0.5;
                let ar = (self.a[(i, j)] + self.a[(j, i)]) * 0.5;
                let half = if i == j { 0.5 } else { 0.0 };
                h[(i, j)] = Complex64::new(nr.re + ar.re + half, 0.0);
                h[(m + i, m + j)] = Complex64::new(nr.re - ar.re + half, 0.0);
                h[(i, m + j)] = Complex64::new(ar.im + nr.im, 0.0);
                h[(m + j, i)] = Complex64::new(ar.im + nr.im, 0.0);
            }
        }
        // i*Omega/2 in the (x, p) block ordering
        for i in 0..m {
            h[(i, m + i)] += Complex64::new(0.0, 0.5);
            h[(m + i, i)] -= Complex64::new(0.0, 0.5);
        }
        min_eigenvalue(&h)
    }
}

/// Minimum eigenvalue of a Hermitian matrix.
pub(crate) fn min_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let eig = SymmetricEigen::new(h.clone());
    eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}
