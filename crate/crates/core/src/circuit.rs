//! Gate sequences over a registry of named modes.
//!
//! A [`ModeLayout`] declares the bosonic modes of a circuit, either as
//! polarized spatial modes (an (h, v) submode pair under one name) or as
//! plain single modes. A [`Circuit`] is an ordered gate list over that
//! layout; simulation folds the gates into a [`GaussianState`] and checks
//! physicality of the result.

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, ModeId, PolMode, DEFAULT_TOL};

/// Index of a polarized spatial mode within a [`ModeLayout`].
pub type SpatialId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Squeeze { a: ModeId, b: ModeId, r: f64, phi: f64 },
    Hadamard { a: ModeId, b: ModeId },
    BeamSplitter { a: ModeId, b: ModeId, theta: f64, phi: f64 },
    Pbs { a: SpatialId, b: SpatialId },
    Loss { mode: ModeId, transmissivity: f64 },
    Gain { mode: ModeId, gain: f64 },
    Swap { a: ModeId, b: ModeId },
}

impl Gate {
    /// Bosonic modes the gate touches (PBS resolved through the layout).
    fn modes(&self, layout: &ModeLayout) -> Vec<ModeId> {
        match *self {
            Gate::Squeeze { a, b, .. }
            | Gate::Hadamard { a, b }
            | Gate::BeamSplitter { a, b, .. }
            | Gate::Swap { a, b } => vec![a, b],
            Gate::Pbs { a, b } => {
                let pa = layout.spatial_mode(a);
                let pb = layout.spatial_mode(b);
                vec![pa.h, pa.v, pb.h, pb.v]
            }
            Gate::Loss { mode, .. } | Gate::Gain { mode, .. } => vec![mode],
        }
    }
}

/// Registry of named modes. Polarized spatial modes own an (h, v) pair of
/// consecutive bosonic modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeLayout {
    modes: usize,
    spatial: Vec<(String, PolMode)>,
    plain: Vec<(String, ModeId)>,
}

/// Spreadsheet-style name for the k-th auto-named spatial mode:
/// a..z, aa, ab, ...
pub fn spatial_name(k: usize) -> String {
    let mut n = k + 1;
    let mut s = Vec::new();
    while n > 0 {
        n -= 1;
        s.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

impl ModeLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Layout of `n` auto-named polarized spatial modes (2n bosonic modes).
    pub fn polarized(n: usize) -> Self {
        let mut l = Self::new();
        for k in 0..n {
            l.add_spatial(spatial_name(k)).unwrap();
        }
        l
    }

    /// Layout of `n` auto-named plain modes (m0, m1, ...).
    pub fn plain(n: usize) -> Self {
        let mut l = Self::new();
        for k in 0..n {
            l.add_plain(format!("m{k}")).unwrap();
        }
        l
    }

    pub fn add_spatial(&mut self, name: impl Into<String>) -> Result<SpatialId> {
        let name = name.into();
        self.check_fresh(&name)?;
        let pm = PolMode::new(self.modes, self.modes + 1);
        self.modes += 2;
        self.spatial.push((name, pm));
        Ok(self.spatial.len() - 1)
    }

    pub fn add_plain(&mut self, name: impl Into<String>) -> Result<ModeId> {
        let name = name.into();
        self.check_fresh(&name)?;
        let id = self.modes;
        self.modes += 1;
        self.plain.push((name, id));
        Ok(id)
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if self.spatial.iter().any(|(n, _)| n == name)
            || self.plain.iter().any(|(n, _)| n == name)
        {
            return Err(Error::UnsupportedSize(format!(
                "duplicate mode name `{name}`"
            )));
        }
        Ok(())
    }

    pub fn num_modes(&self) -> usize {
        self.modes
    }

    pub fn num_spatial(&self) -> usize {
        self.spatial.len()
    }

    pub fn spatial_mode(&self, id: SpatialId) -> PolMode {
        self.spatial[id].1
    }

    pub fn spatial_name_of(&self, id: SpatialId) -> &str {
        &self.spatial[id].0
    }

    pub fn spatial_modes(&self) -> impl Iterator<Item = (SpatialId, &str, PolMode)> {
        self.spatial
            .iter()
            .enumerate()
            .map(|(i, (n, pm))| (i, n.as_str(), *pm))
    }

    pub fn plain_modes(&self) -> impl Iterator<Item = (&str, ModeId)> {
        self.plain.iter().map(|(n, m)| (n.as_str(), *m))
    }

    pub fn find_spatial(&self, name: &str) -> Option<SpatialId> {
        self.spatial.iter().position(|(n, _)| n == name)
    }

    /// Resolve a mode token: a plain name, or `<spatial>.h` / `<spatial>.v`.
    pub fn resolve_mode(&self, token: &str) -> Option<ModeId> {
        if let Some((_, m)) = self.plain.iter().find(|(n, _)| n == token) {
            return Some(*m);
        }
        let (base, pol) = token.rsplit_once('.')?;
        let (_, pm) = self.spatial.iter().find(|(n, _)| n == base)?;
        match pol {
            "h" => Some(pm.h),
            "v" => Some(pm.v),
            _ => None,
        }
    }

    /// Name of a bosonic mode for serialization.
    pub fn mode_token(&self, m: ModeId) -> Option<String> {
        if let Some((n, _)) = self.plain.iter().find(|(_, pm)| *pm == m) {
            return Some(n.clone());
        }
        for (n, pm) in &self.spatial {
            if pm.h == m {
                return Some(format!("{n}.h"));
            }
            if pm.v == m {
                return Some(format!("{n}.v"));
            }
        }
        None
    }
}

/// Ordered gate sequence over a mode layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub layout: ModeLayout,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(layout: ModeLayout) -> Self {
        Self {
            layout,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        match gate {
            Gate::Pbs { a, b } => {
                if a >= self.layout.num_spatial() || b >= self.layout.num_spatial() {
                    return Err(Error::ModeOutOfRange {
                        mode: a.max(b),
                        modes: self.layout.num_spatial(),
                    });
                }
            }
            _ => {
                for m in gate.modes(&self.layout) {
                    if m >= self.layout.num_modes() {
                        return Err(Error::ModeOutOfRange {
                            mode: m,
                            modes: self.layout.num_modes(),
                        });
                    }
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Whether every squeezer precedes every non-squeezer gate and touches
    /// modes no earlier gate has touched. The Fock oracle builds squeezed
    /// pairs from the Schmidt form, which requires exactly this shape.
    pub fn is_oracle_compatible(&self) -> bool {
        let mut touched: Vec<ModeId> = Vec::new();
        let mut past_squeezers = false;
        for g in &self.gates {
            match g {
                Gate::Squeeze { a, b, .. } => {
                    if past_squeezers || touched.contains(a) || touched.contains(b) {
                        return false;
                    }
                    touched.push(*a);
                    touched.push(*b);
                }
                _ => past_squeezers = true,
            }
        }
        true
    }

    /// Fold the gates into a Gaussian state and validate the result.
    pub fn simulate(&self) -> Result<GaussianState> {
        let mut s = GaussianState::vacuum(self.layout.num_modes().max(1))?;
        for g in &self.gates {
            s = match *g {
                Gate::Squeeze { a, b, r, phi } => s.apply_squeezer(a, b, r, phi)?,
                Gate::Hadamard { a, b } => s.apply_hadamard(a, b)?,
                Gate::BeamSplitter { a, b, theta, phi } => {
                    s.apply_beamsplitter(a, b, theta, phi)?
                }
                Gate::Pbs { a, b } => {
                    s.apply_pbs(self.layout.spatial_mode(a), self.layout.spatial_mode(b))?
                }
                Gate::Loss {
                    mode,
                    transmissivity,
                } => s.apply_loss(mode, transmissivity)?,
                Gate::Gain { mode, gain } => s.apply_gain(mode, gain)?,
                Gate::Swap { a, b } => s.apply_swap(a, b)?,
            };
        }
        s.validate(DEFAULT_TOL)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_names() {
        assert_eq!(spatial_name(0), "a");
        assert_eq!(spatial_name(25), "z");
        assert_eq!(spatial_name(26), "aa");
        assert_eq!(spatial_name(27), "ab");
    }

    #[test]
    fn layout_lookup() {
        let l = ModeLayout::polarized(2);
        assert_eq!(l.num_modes(), 4);
        assert_eq!(l.resolve_mode("a.h"), Some(0));
        assert_eq!(l.resolve_mode("b.v"), Some(3));
        assert_eq!(l.resolve_mode("b.x"), None);
        assert_eq!(l.mode_token(2).unwrap(), "b.h");
        assert_eq!(l.find_spatial("b"), Some(1));

        let mut l = ModeLayout::plain(2);
        assert_eq!(l.resolve_mode("m1"), Some(1));
        assert!(l.add_plain("m0").is_err());
    }

    #[test]
    fn simulate_and_oracle_compat() {
        let mut c = Circuit::new(ModeLayout::polarized(2));
        c.push(Gate::Squeeze { a: 0, b: 2, r: 0.5, phi: 0.0 }).unwrap();
        c.push(Gate::Squeeze { a: 1, b: 3, r: 0.5, phi: 0.0 }).unwrap();
        assert!(c.is_oracle_compatible());
        c.push(Gate::Hadamard { a: 0, b: 1 }).unwrap();
        assert!(c.is_oracle_compatible());
        let s = c.simulate().unwrap();
        assert!((s.total_mean_photon() - 4.0 * 0.5f64.sinh().powi(2)).abs() < 1e-12);

        // squeezer after another gate breaks compatibility
        let mut c2 = Circuit::new(ModeLayout::plain(3));
        c2.push(Gate::Hadamard { a: 0, b: 1 }).unwrap();
        c2.push(Gate::Squeeze { a: 1, b: 2, r: 0.2, phi: 0.0 }).unwrap();
        assert!(!c2.is_oracle_compatible());

        // squeezer reusing a squeezed mode breaks compatibility
        let mut c3 = Circuit::new(ModeLayout::plain(3));
        c3.push(Gate::Squeeze { a: 0, b: 1, r: 0.2, phi: 0.0 }).unwrap();
        c3.push(Gate::Squeeze { a: 1, b: 2, r: 0.2, phi: 0.0 }).unwrap();
        assert!(!c3.is_oracle_compatible());
    }

    #[test]
    fn push_validates_indices() {
        let mut c = Circuit::new(ModeLayout::plain(2));
        assert!(c.push(Gate::Loss { mode: 5, transmissivity: 0.5 }).is_err());
        assert!(c.push(Gate::Pbs { a: 0, b: 1 }).is_err());
    }

    #[test]
    fn empty_circuit_is_vacuum() {
        let c = Circuit::new(ModeLayout::plain(3));
        let s = c.simulate().unwrap();
        assert_eq!(s.total_mean_photon(), 0.0);
    }
}
