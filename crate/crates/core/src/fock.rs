//! Brute-force truncated Fock-space simulator.
//!
//! Serves as ground truth for the Gaussian moment engine at small squeezing
//! and provides Born-rule photon-number sampling. Squeezers are built from
//! the Schmidt form of the two-mode squeezed vacuum rather than operator
//! exponentials, which restricts them to mode pairs that are still in
//! vacuum; all circuits of interest have that shape. Loss and gain are
//! purified with explicit vacuum ancilla modes kept in the state, and
//! queries are forbidden from touching ancillas, so no partial trace is ever
//! needed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::observable::{MomentQuery, QuadraticObservable};
use crate::wick::thread_pool;

/// Hard cap on the amplitude tensor size.
pub const MEMORY_LIMIT_BYTES: usize = 768 << 20;

const SAMPLE_BLOCK: u64 = 4096;

/// Dense amplitude tensor over (cutoff+1)^modes Fock basis states.
#[derive(Debug, Clone)]
pub struct FockVector {
    system_modes: usize,
    total_modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
    truncation_error: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl FockVector {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn system_modes(&self) -> usize {
        self.system_modes
    }

    pub fn total_modes(&self) -> usize {
        self.total_modes
    }

    /// `1 - |psi|^2` accumulated before final normalization.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    fn stride(&self, mode: usize) -> usize {
        (self.cutoff + 1).pow((self.total_modes - 1 - mode) as u32)
    }

    fn norm2(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn vacuum(system_modes: usize, total_modes: usize, cutoff: usize) -> Result<Self> {
        let d = cutoff + 1;
        let len = d
            .checked_pow(total_modes as u32)
            .ok_or(Error::CapacityExceeded {
                bytes: usize::MAX,
                limit: MEMORY_LIMIT_BYTES,
            })?;
        let bytes = len.checked_mul(16).ok_or(Error::CapacityExceeded {
            bytes: usize::MAX,
            limit: MEMORY_LIMIT_BYTES,
        })?;
        if bytes > MEMORY_LIMIT_BYTES {
            return Err(Error::CapacityExceeded {
                bytes,
                limit: MEMORY_LIMIT_BYTES,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            system_modes,
            total_modes,
            cutoff,
            amps,
            truncation_error: 0.0,
        })
    }

    /// Two-mode squeezer on modes (i, j) where j is still vacuum:
    /// `S|n, 0> = cosh^{-(n+1)} sum_k (e^{i phi} tanh r)^k sqrt(C(n+k, k)) |n+k, k>`.
    fn apply_tms(&mut self, i: usize, j: usize, r: f64, phi: f64) {
        let d = self.cutoff + 1;
        let si = self.stride(i);
        let sj = self.stride(j);
        let tau = Complex64::from_polar(r.tanh(), phi);
        let ch = r.cosh();
        // coef[n][k]
        let coef: Vec<Vec<Complex64>> = (0..d)
            .map(|n| {
                (0..d - n)
                    .map(|k| tau.powu(k as u32) * binomial(n + k, k).sqrt() * ch.powi(-(n as i32 + 1)))
                    .collect()
            })
            .collect();
        // sources have n_j = 0; targets with k >= 1 were zero beforehand
        let len = self.amps.len();
        for flat in 0..len {
            if (flat / sj) % d != 0 {
                continue;
            }
            let n = (flat / si) % d;
            let src = self.amps[flat];
            if src.re == 0.0 && src.im == 0.0 {
                continue;
            }
            for k in 1..d - n {
                self.amps[flat + k * si + k * sj] = src * coef[n][k];
            }
            self.amps[flat] = src * coef[n][0];
        }
    }

    /// Passive 2x2 mixing of modes (i, j) by the unitary `u` on annihilation
    /// operators; creation operators transform by the matrix columns.
    fn apply_passive(&mut self, i: usize, j: usize, u: [[Complex64; 2]; 2]) {
        let d = self.cutoff + 1;
        let si = self.stride(i);
        let sj = self.stride(j);
        // transitions[(n, nb)] -> list of (m, o, coeff) with m + o = n + nb
        // (targets beyond the cutoff are truncated)
        let mut transitions: Vec<Vec<(usize, usize, Complex64)>> = Vec::with_capacity(d * d);
        for n in 0..d {
            for nb in 0..d {
                let mut terms: Vec<(usize, usize, Complex64)> = Vec::new();
                for k in 0..=n {
                    for l in 0..=nb {
                        let m = k + l;
                        let o = (n - k) + (nb - l);
                        if m >= d || o >= d {
                            continue;
                        }
                        let coeff = binomial(n, k)
                            * binomial(nb, l)
                            * (factorial(m) * factorial(o) / (factorial(n) * factorial(nb)))
                                .sqrt();
                        let amp = u[0][0].powu(k as u32)
                            * u[1][0].powu((n - k) as u32)
                            * u[0][1].powu(l as u32)
                            * u[1][1].powu((nb - l) as u32)
                            * coeff;
                        if let Some(t) = terms.iter_mut().find(|(tm, to, _)| *tm == m && *to == o)
                        {
                            t.2 += amp;
                        } else {
                            terms.push((m, o, amp));
                        }
                    }
                }
                transitions.push(terms);
            }
        }
        let mut src = vec![Complex64::new(0.0, 0.0); d * d];
        let len = self.amps.len();
        for flat in 0..len {
            // visit each block once, at its (0, 0) corner
            if (flat / si) % d != 0 || (flat / sj) % d != 0 {
                continue;
            }
            for n in 0..d {
                for nb in 0..d {
                    src[n * d + nb] = self.amps[flat + n * si + nb * sj];
                    self.amps[flat + n * si + nb * sj] = Complex64::new(0.0, 0.0);
                }
            }
            for n in 0..d {
                for nb in 0..d {
                    let a = src[n * d + nb];
                    if a.re == 0.0 && a.im == 0.0 {
                        continue;
                    }
                    for &(m, o, c) in &transitions[n * d + nb] {
                        self.amps[flat + m * si + o * sj] += a * c;
                    }
                }
            }
        }
    }

    fn apply_swap(&mut self, i: usize, j: usize) {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        self.apply_passive(i, j, [[z, o], [o, z]]);
    }

    /// Apply `Q = sum K[a,b] adag_{ma} a_{mb}` to `psi`.
    fn apply_quadratic(&self, q: &QuadraticObservable, psi: &[Complex64]) -> Vec<Complex64> {
        let d = self.cutoff + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        let sup = q.support();
        for (a, &ma) in sup.iter().enumerate() {
            for (b, &mb) in sup.iter().enumerate() {
                let k = q.coeff(a, b);
                if k.re == 0.0 && k.im == 0.0 {
                    continue;
                }
                let sa = self.stride(ma);
                let sb = self.stride(mb);
                if ma == mb {
                    for (flat, &amp) in psi.iter().enumerate() {
                        let n = (flat / sa) % d;
                        if n > 0 {
                            out[flat] += k * (n as f64) * amp;
                        }
                    }
                } else {
                    for (flat, &amp) in psi.iter().enumerate() {
                        if amp.re == 0.0 && amp.im == 0.0 {
                            continue;
                        }
                        let na = (flat / sa) % d;
                        let nb = (flat / sb) % d;
                        if nb >= 1 && na + 1 < d {
                            let coeff = (((na + 1) * nb) as f64).sqrt();
                            out[flat + sa - sb] += k * coeff * amp;
                        }
                    }
                }
            }
        }
        out
    }

    fn inner(&self, other: &[Complex64]) -> Complex64 {
        self.amps
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Exact expectation of a query on the truncated state.
    pub fn moment(&self, query: &MomentQuery) -> Result<f64> {
        for o in &query.observables {
            if o.max_mode() >= self.system_modes {
                return Err(Error::AncillaQuery(o.max_mode()));
            }
        }
        if query.regularized {
            let base = self.centered_product(&query.observables)?;
            let mut denom = 1.0f64;
            for o in &query.observables {
                let v = self.centered_product(&[o.clone(), o.clone()])?;
                if !(v > 0.0) {
                    return Err(Error::ZeroVariance);
                }
                denom *= v.sqrt();
            }
            return Ok(base / denom);
        }
        if query.centered {
            return self.centered_product(&query.observables);
        }
        let mut phi = self.amps.clone();
        for o in query.observables.iter().rev() {
            phi = self.apply_quadratic(o, &phi);
        }
        Ok(self.inner(&phi).re)
    }

    fn centered_product(&self, obs: &[QuadraticObservable]) -> Result<f64> {
        let mut phi = self.amps.clone();
        for o in obs.iter().rev() {
            let mu = self.inner(&self.apply_quadratic(o, &self.amps)).re;
            let next = self.apply_quadratic(o, &phi);
            for (n, p) in next.iter().zip(phi.iter_mut()) {
                *p = n - mu * *p;
            }
        }
        Ok(self.inner(&phi).re)
    }

    /// Mean photon number of a system mode.
    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        self.moment(&MomentQuery::raw(vec![QuadraticObservable::number(mode)])?)
    }

    /// Joint photon-number probability of the system modes (ancillas traced
    /// out by marginalization).
    pub fn number_distribution(&self) -> Vec<(Vec<usize>, f64)> {
        let d = self.cutoff + 1;
        let sys_len = d.pow(self.system_modes as u32);
        let mut probs = vec![0.0f64; sys_len];
        for (flat, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            // system modes come first in the stride order
            let anc_len = d.pow((self.total_modes - self.system_modes) as u32);
            probs[flat / anc_len] += p;
        }
        probs
            .into_iter()
            .enumerate()
            .map(|(mut flat, p)| {
                let mut ns = vec![0usize; self.system_modes];
                for k in (0..self.system_modes).rev() {
                    ns[k] = flat % d;
                    flat /= d;
                }
                (ns, p)
            })
            .collect()
    }

    /// i.i.d. Born-rule samples of the joint photon numbers of the system
    /// modes. Deterministic for a given seed: shots are split into
    /// fixed-size blocks, block b drawing from stream b of a counter-mode
    /// generator seeded with `seed`.
    pub fn sample(&self, shots: u64, seed: u64) -> Vec<Vec<usize>> {
        if shots == 0 {
            return Vec::new();
        }
        let dist = self.number_distribution();
        let mut cdf = Vec::with_capacity(dist.len());
        let mut acc = 0.0f64;
        for (_, p) in &dist {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let blocks = shots.div_ceil(SAMPLE_BLOCK);
        let chunks: Vec<Vec<Vec<usize>>> = thread_pool().install(|| {
            (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(b);
                    let count = SAMPLE_BLOCK.min(shots - b * SAMPLE_BLOCK);
                    (0..count)
                        .map(|_| {
                            let u: f64 = rng.gen::<f64>() * total;
                            let idx = cdf.partition_point(|&c| c < u).min(dist.len() - 1);
                            dist[idx].0.clone()
                        })
                        .collect()
                })
                .collect()
        });
        chunks.into_iter().flatten().collect()
    }
}

/// Simulate an oracle-compatible circuit in the truncated Fock basis.
///
/// Channels are purified: each loss gate becomes a beamsplitter to a fresh
/// vacuum ancilla, each gain gate a two-mode squeezer with a fresh ancilla.
pub fn oracle_state(circuit: &Circuit, cutoff: usize) -> Result<FockVector> {
    if cutoff < 4 {
        return Err(Error::InvalidParameter {
            name: "cutoff",
            value: cutoff as f64,
            constraint: "cutoff >= 4",
        });
    }
    let system = circuit.layout.num_modes().max(1);
    let ancillas = circuit
        .gates
        .iter()
        .filter(|g| matches!(g, Gate::Loss { .. } | Gate::Gain { .. }))
        .count();
    let mut f = FockVector::vacuum(system, system + ancillas, cutoff)?;
    let mut touched = vec![false; system];
    let mut next_ancilla = system;
    for g in &circuit.gates {
        match *g {
            Gate::Squeeze { a, b, r, phi } => {
                if touched[a] || touched[b] {
                    return Err(Error::UnsupportedCircuit(format!(
                        "squeezer on non-vacuum modes {a}, {b}"
                    )));
                }
                touched[a] = true;
                touched[b] = true;
                f.apply_tms(a, b, r, phi);
            }
            Gate::Hadamard { a, b } => {
                touched[a] = true;
                touched[b] = true;
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                f.apply_passive(a, b, [[s, s], [s, -s]]);
            }
            Gate::BeamSplitter { a, b, theta, phi } => {
                touched[a] = true;
                touched[b] = true;
                let c = Complex64::new(theta.cos(), 0.0);
                let s = Complex64::from_polar(theta.sin(), phi);
                f.apply_passive(a, b, [[c, s], [-s.conj(), c]]);
            }
            Gate::Pbs { a, b } => {
                let pa = circuit.layout.spatial_mode(a);
                let pb = circuit.layout.spatial_mode(b);
                touched[pa.v] = true;
                touched[pb.v] = true;
                f.apply_swap(pa.v, pb.v);
            }
            Gate::Loss {
                mode,
                transmissivity,
            } => {
                touched[mode] = true;
                let anc = next_ancilla;
                next_ancilla += 1;
                let theta = transmissivity.sqrt().clamp(0.0, 1.0).acos();
                let c = Complex64::new(theta.cos(), 0.0);
                let s = Complex64::new(0.0, theta.sin());
                f.apply_passive(mode, anc, [[c, s], [s, c]]);
            }
            Gate::Gain { mode, gain } => {
                touched[mode] = true;
                let anc = next_ancilla;
                next_ancilla += 1;
                f.apply_tms(mode, anc, gain, 0.0);
            }
            Gate::Swap { a, b } => {
                touched[a] = true;
                touched[b] = true;
                f.apply_swap(a, b);
            }
        }
    }
    let norm2 = f.norm2();
    f.truncation_error = (1.0 - norm2).max(0.0);
    let scale = Complex64::new(1.0 / norm2.sqrt(), 0.0);
    for a in &mut f.amps {
        *a *= scale;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, Gate, ModeLayout};
    use crate::gaussian::PolMode;
    use crate::moment;
    use crate::observable::StokesComponent;

    fn tmsv_circuit(r: f64) -> Circuit {
        let mut c = Circuit::new(ModeLayout::plain(2));
        c.push(Gate::Squeeze { a: 0, b: 1, r, phi: 0.0 }).unwrap();
        c
    }

    #[test]
    fn schmidt_amplitudes() {
        let f = oracle_state(&tmsv_circuit(0.2), 10).unwrap();
        assert!(f.truncation_error() < 1e-13);
        let d = 11;
        for n in 0..6 {
            let expect = 0.2f64.tanh().powi(n as i32) / 0.2f64.cosh();
            let amp = f.amps[n * d + n];
            assert!((amp.re - expect).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn empty_circuit_is_vacuum() {
        let c = Circuit::new(ModeLayout::plain(3));
        let f = oracle_state(&c, 4).unwrap();
        assert_eq!(f.amps[0], Complex64::new(1.0, 0.0));
        assert_eq!(f.norm2(), 1.0);
    }

    #[test]
    fn bell_polarization_mean() {
        // <Sigma_0(a)> = 2 sinh^2 r on the TMS-Bell state
        let r = 0.15;
        let mut c = Circuit::new(ModeLayout::polarized(2));
        c.push(Gate::Squeeze { a: 0, b: 2, r, phi: 0.0 }).unwrap();
        c.push(Gate::Squeeze { a: 1, b: 3, r, phi: 0.0 }).unwrap();
        let f = oracle_state(&c, 8).unwrap();
        let q = MomentQuery::raw(vec![QuadraticObservable::stokes(
            StokesComponent::S0,
            PolMode::new(0, 1),
        )])
        .unwrap();
        let got = f.moment(&q).unwrap();
        let expect = 2.0 * r.sinh().powi(2);
        assert!((got - expect).abs() < 1e-9, "got {got}, expect {expect}");
    }

    #[test]
    fn squeezer_on_non_vacuum_rejected() {
        let mut c = Circuit::new(ModeLayout::plain(3));
        c.push(Gate::Squeeze { a: 0, b: 1, r: 0.1, phi: 0.0 }).unwrap();
        c.push(Gate::Squeeze { a: 1, b: 2, r: 0.1, phi: 0.0 }).unwrap();
        assert!(matches!(
            oracle_state(&c, 6),
            Err(Error::UnsupportedCircuit(_))
        ));
    }

    #[test]
    fn capacity_and_cutoff_errors() {
        let c = Circuit::new(ModeLayout::plain(12));
        assert!(matches!(
            oracle_state(&c, 12),
            Err(Error::CapacityExceeded { .. })
        ));
        let c = Circuit::new(ModeLayout::plain(2));
        assert!(oracle_state(&c, 3).is_err());
    }

    #[test]
    fn pearson_and_engine_agreement() {
        let r = 0.2;
        let circuit = tmsv_circuit(r);
        let f = oracle_state(&circuit, 12).unwrap();
        let na = QuadraticObservable::number(0);
        let nb = QuadraticObservable::number(1);
        let var_a = f
            .moment(&MomentQuery::central(vec![na.clone(), na.clone()]).unwrap())
            .unwrap();
        let var_b = f
            .moment(&MomentQuery::central(vec![nb.clone(), nb.clone()]).unwrap())
            .unwrap();
        let cov = f
            .moment(&MomentQuery::central(vec![na.clone(), nb.clone()]).unwrap())
            .unwrap();
        let rho = cov / (var_a * var_b).sqrt();
        assert!((rho - 1.0).abs() < 5e-10);

        // cross-check the exact engine
        let s = circuit.simulate().unwrap();
        let exact = moment::central_moment(
            &s,
            &MomentQuery::central(vec![na.clone(), nb.clone()]).unwrap(),
        )
        .unwrap();
        assert!((cov - exact).abs() < 1e-6 * exact.abs());
    }

    #[test]
    fn bell_central_stokes_vs_closed_form() {
        let r = 0.2;
        let mut c = Circuit::new(ModeLayout::polarized(2));
        c.push(Gate::Squeeze { a: 0, b: 2, r, phi: 0.0 }).unwrap();
        c.push(Gate::Squeeze { a: 1, b: 3, r, phi: 0.0 }).unwrap();
        let f = oracle_state(&c, 10).unwrap();
        let q = MomentQuery::central(vec![
            QuadraticObservable::stokes(StokesComponent::S2, PolMode::new(0, 1)),
            QuadraticObservable::stokes(StokesComponent::S2, PolMode::new(2, 3)),
        ])
        .unwrap();
        let got = f.moment(&q).unwrap();
        let expect = 2.0 * r.sinh().powi(2) * r.cosh().powi(2);
        assert!((got - expect).abs() < 1e-6 * expect);
        assert!((expect - 0.08435873657621118).abs() < 1e-12);
    }

    #[test]
    fn truncation_error_decreases_with_cutoff() {
        let mut last = f64::INFINITY;
        for cutoff in [4, 6, 8, 10] {
            let f = oracle_state(&tmsv_circuit(0.4), cutoff).unwrap();
            assert!(f.truncation_error() <= last);
            last = f.truncation_error();
        }
    }

    #[test]
    fn moment_converges_when_cutoff_doubles() {
        let mut c = Circuit::new(ModeLayout::plain(3));
        c.push(Gate::Squeeze { a: 0, b: 1, r: 0.2, phi: 0.0 }).unwrap();
        c.push(Gate::Loss { mode: 0, transmissivity: 0.7 }).unwrap();
        let q = MomentQuery::central(vec![
            QuadraticObservable::number(0),
            QuadraticObservable::number(1),
        ])
        .unwrap();
        let at6 = oracle_state(&c, 6).unwrap().moment(&q).unwrap();
        let at12 = oracle_state(&c, 12).unwrap().moment(&q).unwrap();
        assert!((at6 - at12).abs() < 1e-8);
    }

    #[test]
    fn loss_and_gain_purification() {
        // loss: mean photon scales by t
        let mut c = tmsv_circuit(0.3);
        c.push(Gate::Loss { mode: 0, transmissivity: 0.5 }).unwrap();
        let f = oracle_state(&c, 10).unwrap();
        let expect = 0.5 * 0.3f64.sinh().powi(2);
        assert!((f.mean_photon(0).unwrap() - expect).abs() < 1e-8);

        // gain on vacuum: <n> = sinh^2 g
        let mut c = Circuit::new(ModeLayout::plain(1));
        c.push(Gate::Gain { mode: 0, gain: 0.3 }).unwrap();
        let f = oracle_state(&c, 12).unwrap();
        assert!((f.mean_photon(0).unwrap() - 0.3f64.sinh().powi(2)).abs() < 1e-9);

        // ancilla queries rejected
        assert!(matches!(
            f.moment(&MomentQuery::raw(vec![QuadraticObservable::number(1)]).unwrap()),
            Err(Error::AncillaQuery(1))
        ));
    }

    #[test]
    fn sampling_number_correlation() {
        let f = oracle_state(&tmsv_circuit(0.2), 8).unwrap();
        let samples = f.sample(100_000, 11);
        assert_eq!(samples.len(), 100_000);
        let equal = samples.iter().filter(|s| s[0] == s[1]).count();
        assert!(equal as f64 / samples.len() as f64 > 0.999);

        // determinism
        let again = f.sample(100_000, 11);
        assert_eq!(samples, again);
        assert!(f.sample(0, 1).is_empty());
    }

    #[test]
    fn sampling_mean_converges() {
        let f = oracle_state(&tmsv_circuit(0.3), 10).unwrap();
        let shots = 100_000u64;
        let samples = f.sample(shots, 5);
        let mean = samples.iter().map(|s| s[0] as f64).sum::<f64>() / shots as f64;
        let exact = f.mean_photon(0).unwrap();
        let var = f
            .moment(
                &MomentQuery::central(vec![
                    QuadraticObservable::number(0),
                    QuadraticObservable::number(0),
                ])
                .unwrap(),
            )
            .unwrap();
        let se = (var / shots as f64).sqrt();
        assert!(
            (mean - exact).abs() < 5.0 * se,
            "mean {mean} exact {exact} se {se}"
        );
    }

    #[test]
    fn hom_suppression() {
        let r = 0.2;
        let mut c = tmsv_circuit(r);
        c.push(Gate::Hadamard { a: 0, b: 1 }).unwrap();
        let f = oracle_state(&c, 8).unwrap();
        let dist = f.number_distribution();
        let p = |a: usize, b: usize| {
            dist.iter()
                .find(|(ns, _)| ns[0] == a && ns[1] == b)
                .map(|(_, p)| *p)
                .unwrap_or(0.0)
        };
        // the (1,1) coincidence interferes away; photon pairs bunch into (2,0), (0,2)
        assert!(p(1, 1) < 1e-20);
        assert!(p(2, 0) > 1e-4);
        assert!((p(2, 0) - p(0, 2)).abs() < 1e-12);
    }
}
