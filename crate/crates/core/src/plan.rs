use crate::grid::{GridConfig, SubchannelId, WindowIndex};
use crate::trace::VehicleIdx;

/// One transmission inside a subframe: `(local vehicle slot, sub-band)`.
pub type Occupant = (usize, u16);

/// Occupied subchannels of every active vehicle during one window.
///
/// Vehicles are addressed by their slot in `vehicles`, which follows the
/// order of the window's [`FleetSnapshot`](crate::trace::FleetSnapshot).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    pub window: WindowIndex,
    vehicles: Vec<VehicleIdx>,
    subchannels: Vec<Vec<SubchannelId>>,
    by_subframe: Vec<Vec<Occupant>>,
}

impl WindowPlan {
    /// `entries[slot]` lists the subchannels used by vehicle `slot`.
    pub fn new(window: WindowIndex, grid: &GridConfig, entries: Vec<(VehicleIdx, Vec<SubchannelId>)>) -> Self {
        let mut by_subframe = vec![Vec::new(); grid.subchannels_per_band];
        let mut vehicles = Vec::with_capacity(entries.len());
        let mut subchannels = Vec::with_capacity(entries.len());
        for (slot, (v, used)) in entries.into_iter().enumerate() {
            for s in &used {
                by_subframe[s.subframe as usize - 1].push((slot, s.sub_band));
            }
            vehicles.push(v);
            subchannels.push(used);
        }
        Self { window, vehicles, subchannels, by_subframe }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn vehicle(&self, slot: usize) -> VehicleIdx {
        self.vehicles[slot]
    }

    pub fn vehicles(&self) -> &[VehicleIdx] {
        &self.vehicles
    }

    pub fn subchannels(&self, slot: usize) -> &[SubchannelId] {
        &self.subchannels[slot]
    }

    /// All transmissions in subframe `k` (1-indexed).
    pub fn concurrent(&self, subframe: u16) -> &[Occupant] {
        &self.by_subframe[subframe as usize - 1]
    }

    pub fn transmits_in(&self, slot: usize, subframe: u16) -> bool {
        self.subchannels[slot].iter().any(|s| s.subframe == subframe)
    }

    pub fn num_subframes(&self) -> usize {
        self.by_subframe.len()
    }
}
