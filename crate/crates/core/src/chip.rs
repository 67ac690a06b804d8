//! Chip geometry and charge-response physics shared by the simulator and
//! the statistics layer.
//!
//! The chip is modeled as a 2D plane; substrate thickness and ground-plane
//! screening are absorbed into the single Gaussian falloff parameter
//! `sigma`. Offset charge is dimensionless and periodic with period 1.

use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Position and identity of every qubit on the chip, plus the subset
/// actively used for jump detection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChipLayout {
    qubits: Vec<QubitSite>,
    active_ids: Vec<u32>,
}

/// One qubit site: id and position in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QubitSite {
    pub id: u32,
    pub x_mm: f64,
    pub y_mm: f64,
}

impl ChipLayout {
    /// Build a layout from `(id, x_mm, y_mm)` triples and the active subset.
    pub fn new(qubits: Vec<QubitSite>, active_ids: Vec<u32>) -> Result<Self> {
        for q in &qubits {
            if !q.x_mm.is_finite() || !q.y_mm.is_finite() {
                return Err(Error::NonFinite("qubit coordinate"));
            }
        }
        for (i, a) in qubits.iter().enumerate() {
            if qubits[i + 1..].iter().any(|b| b.id == a.id) {
                return Err(Error::invalid(format_args!("duplicate qubit id {}", a.id)));
            }
        }
        for id in &active_ids {
            if !qubits.iter().any(|q| q.id == *id) {
                return Err(Error::UnknownQubit(*id));
            }
        }
        // canonical order, independent of listing order
        let mut active_ids = active_ids;
        active_ids.sort_unstable();
        active_ids.dedup();
        Ok(ChipLayout { qubits, active_ids })
    }

    pub fn qubits(&self) -> &[QubitSite] {
        &self.qubits
    }

    pub fn active_ids(&self) -> &[u32] {
        &self.active_ids
    }

    pub fn active_sites(&self) -> impl Iterator<Item = &QubitSite> {
        self.active_ids.iter().map(move |id| {
            self.qubits
                .iter()
                .find(|q| q.id == *id)
                .expect("active id validated at construction")
        })
    }

    pub fn position(&self, id: u32) -> Result<(f64, f64)> {
        self.qubits
            .iter()
            .find(|q| q.id == id)
            .map(|q| (q.x_mm, q.y_mm))
            .ok_or(Error::UnknownQubit(id))
    }

    /// Euclidean distance between two qubits, in millimeters.
    pub fn distance(&self, a: u32, b: u32) -> Result<f64> {
        let (ax, ay) = self.position(a)?;
        let (bx, by) = self.position(b)?;
        Ok(libm::hypot(ax - bx, ay - by))
    }

    /// Axis-aligned bounding box `(x_min, y_min, x_max, y_max)` of all
    /// qubit sites. Impact locations are drawn uniformly from this box.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for q in &self.qubits {
            bb.0 = bb.0.min(q.x_mm);
            bb.1 = bb.1.min(q.y_mm);
            bb.2 = bb.2.max(q.x_mm);
            bb.3 = bb.3.max(q.y_mm);
        }
        bb
    }
}

/// A radiation hit: when, where, and how strong.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpactEvent {
    /// Seconds since run start.
    pub time: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    /// Offset-charge step at the epicenter (dimensionless).
    pub peak_charge: f64,
    /// Transient T1 at the epicenter, seconds.
    pub t1_epicenter: f64,
}

impl ImpactEvent {
    /// Offset-charge response seen by a qubit at `(x, y)` mm:
    /// `peak_charge * exp(-d^2 / (2 sigma^2))`.
    pub fn charge_response(&self, qubit_pos: (f64, f64), sigma_mm: f64) -> Result<f64> {
        if !(sigma_mm > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let dx = qubit_pos.0 - self.x_mm;
        let dy = qubit_pos.1 - self.y_mm;
        let d2 = dx * dx + dy * dy;
        Ok(self.peak_charge * libm::exp(-d2 / (2.0 * sigma_mm * sigma_mm)))
    }
}

/// Offset charge, stored as its representative in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OffsetCharge(f64);

impl OffsetCharge {
    /// Wrap an arbitrary finite value into `[0, 1)`.
    pub fn wrap(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("offset charge"));
        }
        let mut v = value - libm::floor(value);
        // floor can leave exactly 1.0 for tiny negative inputs
        if v >= 1.0 {
            v -= 1.0;
        }
        Ok(OffsetCharge(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}
