//! Ordered Wick (Isserlis) contraction kernel for products of quadratic
//! observables on zero-mean Gaussian states.
//!
//! A query multiplies q observables, giving 2q ladder operators. For a
//! zero-mean Gaussian state the expectation is a sum over all perfect
//! pairings of those 2q operators, each pair contracted in its original
//! order (earlier operator left):
//!
//! ```text
//!   <a_m^dag a_n^dag> = conj(A)[m, n]      <a_m^dag a_n> = N[m, n]
//!   <a_m a_n^dag>     = (N^T + I)[m, n]    <a_m a_n>     = A[m, n]
//! ```
//!
//! Rather than expanding each observable into ladder monomials, the kernel
//! contracts coefficient matrices lazily along the alternating cycles formed
//! by coefficient edges and pairing edges. Open chains carry a small matrix
//! between their endpoint slots; pairing two endpoints multiplies matrices,
//! and closing a cycle contracts to a scalar. Chains whose matrix is exactly
//! zero prune the whole branch (adding exact zeros cannot change the
//! compensated sums, so pruning keeps results bit-identical).
//!
//! Central moments `<prod (Q_j - <Q_j>)>` are the same sum restricted to
//! pairings in which no observable's own two ladder operators pair with each
//! other; the subset inclusion-exclusion expansion is kept in
//! [`crate::moment`] as an independent oracle.
//!
//! For q >= 7 the enumeration is partitioned by its first two pairing
//! decisions and the partitions run in parallel. Every partition accumulates
//! with compensated (Neumaier) summation in a fixed order and partitions are
//! reduced in a fixed order, so the result is bit-identical no matter how
//! many threads run.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use smallvec::SmallVec;
use std::sync::OnceLock;

use crate::gaussian::GaussianState;
use crate::observable::{QuadraticObservable, QUERY_CAP};

const MAX_SLOTS: usize = 2 * QUERY_CAP;
/// Queries at least this long are enumerated in parallel partitions.
const PAR_MIN_Q: usize = 7;

/// Rayon pool used by the enumeration kernel; sized by the `TMS_THREADS`
/// environment variable when set.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("TMS_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build thread pool")
    })
}

/// The four contraction matrices of a state, indexed by slot types
/// (c = creation, d = annihilation).
pub(crate) struct Tables {
    pub cc: DMatrix<Complex64>,
    pub cd: DMatrix<Complex64>,
    pub dc: DMatrix<Complex64>,
    pub dd: DMatrix<Complex64>,
    pub dim: usize,
}

impl Tables {
    /// Quantum contraction table of a Gaussian state.
    pub fn quantum(s: &GaussianState) -> Self {
        let m = s.num_modes();
        let n = s.number_matrix();
        let a = s.pair_matrix();
        let mut dc = n.transpose();
        for i in 0..m {
            dc[(i, i)] += Complex64::new(1.0, 0.0);
        }
        Self {
            cc: a.map(|z| z.conj()),
            cd: n.clone(),
            dc,
            dd: a.clone(),
            dim: m,
        }
    }

    /// Classical Isserlis table for the state's Husimi distribution, where
    /// `E[conj(alpha_m) alpha_n] = (N + I)[m, n]`. Used to predict sampler
    /// statistics; operator order no longer matters, and indeed
    /// cd = dc^T here.
    pub fn classical_husimi(s: &GaussianState) -> Self {
        let m = s.num_modes();
        let n = s.number_matrix();
        let a = s.pair_matrix();
        let mut cd = n.clone();
        let mut dc = n.transpose();
        for i in 0..m {
            cd[(i, i)] += Complex64::new(1.0, 0.0);
            dc[(i, i)] += Complex64::new(1.0, 0.0);
        }
        Self {
            cc: a.map(|z| z.conj()),
            cd,
            dc,
            dd: a.clone(),
            dim: m,
        }
    }
}

/// Borrowed view of a quadratic form for the kernel: a support list and a
/// row-major coefficient block over it. Unlike [`QuadraticObservable`] the
/// block need not be Hermitian (chained coefficient products are not).
#[derive(Clone, Copy)]
pub(crate) struct WickObs<'a> {
    pub support: &'a [usize],
    pub coeffs: &'a [Complex64],
}

impl<'a> From<&'a QuadraticObservable> for WickObs<'a> {
    fn from(o: &'a QuadraticObservable) -> Self {
        Self {
            support: o.support(),
            coeffs: o.coeffs(),
        }
    }
}

/// Dense row-major matrix over observable supports (almost always 2x2 or
/// smaller, so storage stays inline).
#[derive(Clone, Debug)]
struct SmallMat {
    rows: usize,
    cols: usize,
    d: SmallVec<[Complex64; 16]>,
}

impl SmallMat {
    fn at(&self, r: usize, c: usize) -> Complex64 {
        self.d[r * self.cols + c]
    }

    fn is_zero(&self) -> bool {
        self.d.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    fn from_obs(o: &WickObs) -> Self {
        let s = o.support.len();
        Self {
            rows: s,
            cols: s,
            d: SmallVec::from_slice(o.coeffs),
        }
    }

    /// (self or self^T) * (other or other^T)
    fn mul(&self, ta: bool, other: &SmallMat, tb: bool) -> SmallMat {
        let (ar, ac) = if ta {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let (br, bc) = if tb {
            (other.cols, other.rows)
        } else {
            (other.rows, other.cols)
        };
        debug_assert_eq!(ac, br);
        let mut d = SmallVec::with_capacity(ar * bc);
        for i in 0..ar {
            for j in 0..bc {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..ac {
                    let a = if ta { self.at(k, i) } else { self.at(i, k) };
                    let b = if tb { other.at(j, k) } else { other.at(k, j) };
                    acc += a * b;
                }
                d.push(acc);
            }
        }
        SmallMat {
            rows: ar,
            cols: bc,
            d,
        }
    }

    /// sum_{r,c} self[r,c] * (other or other^T)[r,c]
    fn contract(&self, other: &SmallMat, tb: bool) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let b = if tb { other.at(c, r) } else { other.at(r, c) };
                acc += self.at(r, c) * b;
            }
        }
        acc
    }
}

/// Open chain of contracted edges with endpoint slots `a`, `b` and the path
/// matrix (rows indexed by `a`'s support, columns by `b`'s).
#[derive(Clone, Debug)]
struct Chain {
    a: u8,
    b: u8,
    mat: SmallMat,
    /// Still just the observable's own coefficient edge; directly pairing its
    /// endpoints is the self-contraction excluded from central moments.
    primitive: bool,
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    s: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(self) -> f64 {
        self.s + self.c
    }
}

struct Enumerator<'a> {
    tables: &'a Tables,
    obs: &'a [WickObs<'a>],
    centered: bool,
    free: u32,
    chain_of: [u8; MAX_SLOTS],
    chains: Vec<Chain>,
    sum_re: Neumaier,
    sum_im: Neumaier,
}

impl<'a> Enumerator<'a> {
    fn new(tables: &'a Tables, obs: &'a [WickObs<'a>], centered: bool) -> Self {
        let q = obs.len();
        let mut chain_of = [0u8; MAX_SLOTS];
        let mut chains = Vec::with_capacity(2 * q);
        for (j, o) in obs.iter().enumerate() {
            chain_of[2 * j] = j as u8;
            chain_of[2 * j + 1] = j as u8;
            chains.push(Chain {
                a: 2 * j as u8,
                b: (2 * j + 1) as u8,
                mat: SmallMat::from_obs(o),
                primitive: true,
            });
        }
        Self {
            tables,
            obs,
            centered,
            free: if q == 0 { 0 } else { (1u32 << (2 * q)) - 1 },
            chain_of,
            chains,
            sum_re: Neumaier::default(),
            sum_im: Neumaier::default(),
        }
    }

    fn support(&self, slot: usize) -> &[usize] {
        self.obs[slot >> 1].support
    }

    /// Contraction block between slots `u < v`, rows over `u`'s support.
    /// Returns `None` when the block is exactly zero.
    fn gather(&self, u: usize, v: usize) -> Option<SmallMat> {
        let table = match (u & 1 == 0, v & 1 == 0) {
            (true, true) => &self.tables.cc,
            (true, false) => &self.tables.cd,
            (false, true) => &self.tables.dc,
            (false, false) => &self.tables.dd,
        };
        let su = self.support(u);
        let sv = self.support(v);
        let mut d = SmallVec::with_capacity(su.len() * sv.len());
        let mut zero = true;
        for &mu in su {
            for &mv in sv {
                let z = table[(mu, mv)];
                zero &= z.re == 0.0 && z.im == 0.0;
                d.push(z);
            }
        }
        if zero {
            None
        } else {
            Some(SmallMat {
                rows: su.len(),
                cols: sv.len(),
                d,
            })
        }
    }

    fn dfs(&mut self, acc: Complex64) {
        if self.free == 0 {
            self.sum_re.add(acc.re);
            self.sum_im.add(acc.im);
            return;
        }
        let u = self.free.trailing_zeros() as usize;
        let mut rest = self.free & (self.free - 1); // clear lowest bit
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            self.pair(u, v, acc);
        }
    }

    /// Try pairing slots u < v (both free); recurses into the rest.
    fn pair(&mut self, u: usize, v: usize, acc: Complex64) {
        let Some(block) = self.gather(u, v) else {
            return;
        };
        let cu = self.chain_of[u] as usize;
        let cv = self.chain_of[v] as usize;
        let bits = (1u32 << u) | (1u32 << v);
        if cu == cv {
            let ch = &self.chains[cu];
            if self.centered && ch.primitive {
                return;
            }
            // close the cycle: chain matrix rows follow ch.a
            let val = if u == ch.a as usize {
                ch.mat.contract(&block, false)
            } else {
                block.contract(&ch.mat, true)
            };
            if val.re == 0.0 && val.im == 0.0 {
                return;
            }
            self.free &= !bits;
            self.dfs(acc * val);
            self.free |= bits;
        } else {
            let (xa, xb) = (self.chains[cu].a as usize, self.chains[cu].b as usize);
            let (ya, yb) = (self.chains[cv].a as usize, self.chains[cv].b as usize);
            // orient X so its columns index u, Y so its rows index v
            let wz = {
                let tmp = self.chains[cu].mat.mul(u == xa, &block, false);
                tmp.mul(false, &self.chains[cv].mat, v == yb)
            };
            if wz.is_zero() {
                return;
            }
            let x_other = if u == xa { xb } else { xa };
            let y_other = if v == ya { yb } else { ya };
            let zid = self.chains.len() as u8;
            self.chains.push(Chain {
                a: x_other as u8,
                b: y_other as u8,
                mat: wz,
                primitive: false,
            });
            let (ox, oy) = (self.chain_of[x_other], self.chain_of[y_other]);
            self.chain_of[x_other] = zid;
            self.chain_of[y_other] = zid;
            self.free &= !bits;
            self.dfs(acc);
            self.free |= bits;
            self.chain_of[x_other] = ox;
            self.chain_of[y_other] = oy;
            self.chains.pop();
        }
    }

    fn result(&self) -> Complex64 {
        Complex64::new(self.sum_re.value(), self.sum_im.value())
    }
}

/// Sum over ordered pairings of `<prod_j Q_j>`; with `centered`, restricted
/// to pairings without observable self-contractions, which equals
/// `<prod_j (Q_j - <Q_j>)>`.
pub(crate) fn ordered_moment(
    tables: &Tables,
    obs: &[&QuadraticObservable],
    centered: bool,
) -> Complex64 {
    let forms: Vec<WickObs> = obs.iter().map(|o| WickObs::from(*o)).collect();
    ordered_moment_forms(tables, &forms, centered)
}

/// Same sum over arbitrary (possibly non-Hermitian) quadratic forms.
pub(crate) fn ordered_moment_forms(
    tables: &Tables,
    obs: &[WickObs],
    centered: bool,
) -> Complex64 {
    let q = obs.len();
    if q == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if q < PAR_MIN_Q {
        let mut e = Enumerator::new(tables, obs, centered);
        e.dfs(Complex64::new(1.0, 0.0));
        return e.result();
    }

    // Partition by the first two pairing decisions, in enumeration order.
    let mut prefixes: Vec<(usize, usize)> = Vec::new();
    {
        let mut probe = Enumerator::new(tables, obs, centered);
        let u1 = 0usize;
        for v1 in 1..2 * q {
            if prefix_viable(&mut probe, u1, v1) {
                let bits1 = (1u32 << u1) | (1u32 << v1);
                probe.free &= !bits1;
                let u2 = probe.free.trailing_zeros() as usize;
                let mut rest = probe.free & (probe.free - 1);
                probe.free |= bits1;
                while rest != 0 {
                    let v2 = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    prefixes.push((v1, v2));
                }
            }
        }
    }

    let partials: Vec<(f64, f64)> = thread_pool().install(|| {
        prefixes
            .par_iter()
            .map(|&(v1, v2)| {
                let mut e = Enumerator::new(tables, obs, centered);
                e.run_prefixed(v1, v2);
                let r = e.result();
                (r.re, r.im)
            })
            .collect()
    });

    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for (r, i) in partials {
        re.add(r);
        im.add(i);
    }
    Complex64::new(re.value(), im.value())
}

/// Cheap viability test for the first pairing decision (mirrors the pruning
/// in [`Enumerator::pair`] without descending).
fn prefix_viable(e: &mut Enumerator, u: usize, v: usize) -> bool {
    let Some(block) = e.gather(u, v) else {
        return false;
    };
    let cu = e.chain_of[u] as usize;
    let cv = e.chain_of[v] as usize;
    if cu == cv {
        let ch = &e.chains[cu];
        if e.centered && ch.primitive {
            return false;
        }
        let val = if u == ch.a as usize {
            ch.mat.contract(&block, false)
        } else {
            block.contract(&ch.mat, true)
        };
        val.re != 0.0 || val.im != 0.0
    } else {
        let wz = {
            let tmp = e.chains[cu].mat.mul(u == e.chains[cu].a as usize, &block, false);
            tmp.mul(false, &e.chains[cv].mat, v == e.chains[cv].b as usize)
        };
        !wz.is_zero()
    }
}

impl<'a> Enumerator<'a> {
    /// Run the enumeration constrained to the first two pairing choices.
    fn run_prefixed(&mut self, v1: usize, v2: usize) {
        let u1 = self.free.trailing_zeros() as usize;
        self.pair_prefixed(u1, v1, Complex64::new(1.0, 0.0), v2);
    }

    fn pair_prefixed(&mut self, u: usize, v: usize, acc: Complex64, v2: usize) {
        let Some(block) = self.gather(u, v) else {
            return;
        };
        let cu = self.chain_of[u] as usize;
        let cv = self.chain_of[v] as usize;
        let bits = (1u32 << u) | (1u32 << v);
        if cu == cv {
            let ch = &self.chains[cu];
            if self.centered && ch.primitive {
                return;
            }
            let val = if u == ch.a as usize {
                ch.mat.contract(&block, false)
            } else {
                block.contract(&ch.mat, true)
            };
            if val.re == 0.0 && val.im == 0.0 {
                return;
            }
            self.free &= !bits;
            let u2 = self.free.trailing_zeros() as usize;
            self.pair(u2, v2, acc * val);
            self.free |= bits;
        } else {
            let (xa, xb) = (self.chains[cu].a as usize, self.chains[cu].b as usize);
            let (ya, yb) = (self.chains[cv].a as usize, self.chains[cv].b as usize);
            let wz = {
                let tmp = self.chains[cu].mat.mul(u == xa, &block, false);
                tmp.mul(false, &self.chains[cv].mat, v == yb)
            };
            if wz.is_zero() {
                return;
            }
            let x_other = if u == xa { xb } else { xa };
            let y_other = if v == ya { yb } else { ya };
            let zid = self.chains.len() as u8;
            self.chains.push(Chain {
                a: x_other as u8,
                b: y_other as u8,
                mat: wz,
                primitive: false,
            });
            let (ox, oy) = (self.chain_of[x_other], self.chain_of[y_other]);
            self.chain_of[x_other] = zid;
            self.chain_of[y_other] = zid;
            self.free &= !bits;
            let u2 = self.free.trailing_zeros() as usize;
            self.pair(u2, v2, acc);
            self.free |= bits;
            self.chain_of[x_other] = ox;
            self.chain_of[y_other] = oy;
            self.chains.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{GaussianState, PolMode};
    use crate::observable::{QuadraticObservable, StokesComponent};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn tmsv(r: f64) -> GaussianState {
        GaussianState::vacuum(2)
            .unwrap()
            .apply_squeezer(0, 1, r, 0.0)
            .unwrap()
    }

    #[test]
    fn tmsv_number_moments() {
        let r = 1.0f64;
        let s = tmsv(r);
        let t = Tables::quantum(&s);
        let n0 = QuadraticObservable::number(0);
        let n1 = QuadraticObservable::number(1);
        let s2c2 = r.sinh().powi(2) * r.cosh().powi(2);
        let s4 = r.sinh().powi(4);

        let raw = ordered_moment(&t, &[&n0, &n1], false);
        assert!((raw.re - (s4 + s2c2)).abs() < 1e-12);
        let cov = ordered_moment(&t, &[&n0, &n1], true);
        assert!((cov.re - s2c2).abs() < 1e-12);
        let var = ordered_moment(&t, &[&n0, &n0], true);
        assert!((var.re - s2c2).abs() < 1e-10);
    }

    #[test]
    fn centered_single_observable_vanishes() {
        let s = tmsv(0.9);
        let t = Tables::quantum(&s);
        let n0 = QuadraticObservable::number(0);
        let c = ordered_moment(&t, &[&n0], true);
        assert_eq!(c, Complex64::new(0.0, 0.0));
    }

    /// Independent brute force: expand observables into ladder monomials and
    /// enumerate pairings over the flat operator list.
    fn brute_force(
        s: &GaussianState,
        obs: &[&QuadraticObservable],
        centered: bool,
    ) -> Complex64 {
        let m = s.num_modes();
        let n = s.number_matrix();
        let a = s.pair_matrix();
        let contract = |(d1, m1): (bool, usize), (d2, m2): (bool, usize)| -> Complex64 {
            match (d1, d2) {
                (true, true) => a[(m1, m2)].conj(),
                (true, false) => n[(m1, m2)],
                (false, true) => {
                    n[(m2, m1)]
                        + if m1 == m2 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                }
                (false, false) => a[(m1, m2)],
            }
        };
        fn pairings(ops: &[(bool, usize)], contract: &dyn Fn((bool, usize), (bool, usize)) -> Complex64) -> Complex64 {
            if ops.is_empty() {
                return Complex64::new(1.0, 0.0);
            }
            let mut total = Complex64::new(0.0, 0.0);
            for v in 1..ops.len() {
                let c = contract(ops[0], ops[v]);
                let mut rest: Vec<(bool, usize)> = Vec::new();
                rest.extend_from_slice(&ops[1..v]);
                rest.extend_from_slice(&ops[v + 1..]);
                total += c * pairings(&rest, contract);
            }
            total
        }
        // expand into monomial products, tracking which observable each op
        // came from so centered queries can drop self-paired terms via
        // inclusion-exclusion over means instead
        let q = obs.len();
        let mut total = Complex64::new(0.0, 0.0);
        if centered {
            // <prod (Q - mu)> = sum_{S} (-1)^{|S|} prod_{S} mu * <prod_{!S} Q>
            let means: Vec<Complex64> = obs
                .iter()
                .map(|o| {
                    let mut mu = Complex64::new(0.0, 0.0);
                    let sup = o.support();
                    for (i, &mi) in sup.iter().enumerate() {
                        for (j, &mj) in sup.iter().enumerate() {
                            mu += o.coeff(i, j) * n[(mi, mj)];
                        }
                    }
                    mu
                })
                .collect();
            for mask in 0..(1usize << q) {
                let mut coef = Complex64::new(1.0, 0.0);
                let mut kept: Vec<&QuadraticObservable> = Vec::new();
                for (j, o) in obs.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        coef *= -means[j];
                    } else {
                        kept.push(o);
                    }
                }
                total += coef * brute_force_raw(m, &kept, &contract, &pairings);
            }
            return total;
        }
        total += brute_force_raw(m, obs, &contract, &pairings);
        total
    }

    fn brute_force_raw(
        _m: usize,
        obs: &[&QuadraticObservable],
        contract: &dyn Fn((bool, usize), (bool, usize)) -> Complex64,
        pairings: &dyn Fn(&[(bool, usize)], &dyn Fn((bool, usize), (bool, usize)) -> Complex64) -> Complex64,
    ) -> Complex64 {
        // iterate over the monomial choice of each observable
        let q = obs.len();
        let dims: Vec<usize> = obs.iter().map(|o| o.support().len().pow(2)).collect();
        let mut idx = vec![0usize; q];
        let mut total = Complex64::new(0.0, 0.0);
        loop {
            let mut coef = Complex64::new(1.0, 0.0);
            let mut ops: Vec<(bool, usize)> = Vec::with_capacity(2 * q);
            for (j, o) in obs.iter().enumerate() {
                let s = o.support().len();
                let (r, c) = (idx[j] / s, idx[j] % s);
                coef *= o.coeff(r, c);
                ops.push((true, o.support()[r]));
                ops.push((false, o.support()[c]));
            }
            if coef.re != 0.0 || coef.im != 0.0 {
                total += coef * pairings(&ops, contract);
            }
            // odometer
            let mut j = 0;
            loop {
                if j == q {
                    return total;
                }
                idx[j] += 1;
                if idx[j] < dims[j] {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn kernel_matches_monomial_brute_force() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..40 {
            let m = 4;
            let mut s = GaussianState::vacuum(m).unwrap();
            s = s
                .apply_squeezer(0, 1, rng.gen_range(0.1..0.8), rng.gen_range(0.0..6.28))
                .unwrap();
            s = s
                .apply_squeezer(2, 3, rng.gen_range(0.1..0.8), rng.gen_range(0.0..6.28))
                .unwrap();
            s = s
                .apply_beamsplitter(1, 2, rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.28))
                .unwrap();
            if rng.gen_bool(0.5) {
                s = s.apply_loss(0, rng.gen_range(0.2..1.0)).unwrap();
            }
            let t = Tables::quantum(&s);
            let a = QuadraticObservable::stokes(
                StokesComponent::ALL[rng.gen_range(0..4)],
                PolMode::new(0, 1),
            );
            let b = QuadraticObservable::stokes(
                StokesComponent::ALL[rng.gen_range(0..4)],
                PolMode::new(2, 3),
            );
            for centered in [false, true] {
                let fast = ordered_moment(&t, &[&a, &b], centered);
                let slow = brute_force(&s, &[&a, &b], centered);
                assert!(
                    (fast - slow).norm() < 1e-10 * slow.norm().max(1.0),
                    "fast={fast} slow={slow}"
                );
                let fast3 = ordered_moment(&t, &[&a, &b, &a], centered);
                let slow3 = brute_force(&s, &[&a, &b, &a], centered);
                assert!((fast3 - slow3).norm() < 1e-10 * slow3.norm().max(1.0));
            }
        }
    }

    #[test]
    fn parallel_partitioning_matches_sequential_bits() {
        // q = 8 crosses the PAR_MIN_Q threshold; compare against a forced
        // sequential enumeration
        let mut s = GaussianState::vacuum(8).unwrap();
        for i in 0..4 {
            s = s.apply_squeezer(2 * i, 2 * i + 1, 0.4 + 0.1 * i as f64, 0.0).unwrap();
        }
        s = s.apply_hadamard(1, 2).unwrap();
        s = s.apply_hadamard(5, 6).unwrap();
        let t = Tables::quantum(&s);
        let obs: Vec<QuadraticObservable> = (0..8).map(QuadraticObservable::number).collect();
        let refs: Vec<&QuadraticObservable> = obs.iter().collect();
        let forms: Vec<WickObs> = obs.iter().map(WickObs::from).collect();

        let par = ordered_moment(&t, &refs, true);
        let mut e = Enumerator::new(&t, &forms, true);
        e.dfs(Complex64::new(1.0, 0.0));
        let seq = e.result();
        assert_eq!(par.re.to_bits(), seq.re.to_bits());
        assert_eq!(par.im.to_bits(), seq.im.to_bits());

        // and across differently sized pools
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| ordered_moment(&t, &refs, true));
        let r4 = pool4.install(|| ordered_moment(&t, &refs, true));
        assert_eq!(r1.re.to_bits(), r4.re.to_bits());
    }
}
