// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use super::FabricError;
use crate::truth::MAX_VARS;

/// Per-tile area coefficients, in dimensionless model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaModel {
    pub a_lut: f64,
    pub a_ff: f64,
    pub a_xbar: f64,
    pub a_fixed: f64,
}

impl Default for AreaModel {
    fn default() -> Self {
        Self { a_lut: 1.0, a_ff: 6.0, a_xbar: 0.25, a_fixed: 40.0 }
    }
}

pub const DEFAULT_IO_PER_TILE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabricParams {
    /// BLEs per CLB.
    pub n: u32,
    /// LUT inputs.
    pub k: u32,
    pub io_per_boundary_tile: u32,
    pub area: AreaModel,
}

impl FabricParams {
    pub fn new(n: u32, k: u32) -> Self {
        Self { n, k, io_per_boundary_tile: DEFAULT_IO_PER_TILE, area: AreaModel::default() }
    }

    pub fn with_io(mut self, io_per_boundary_tile: u32) -> Self {
        self.io_per_boundary_tile = io_per_boundary_tile;
        self
    }

    pub fn with_area(mut self, area: AreaModel) -> Self {
        self.area = area;
        self
    }

    pub fn validate(&self) -> Result<(), FabricError> {
        if self.n < 1 {
            return Err(FabricError::Params(format!("n must be at least 1, got {}", self.n)));
        }
        if self.k < 2 || self.k as usize > MAX_VARS {
            return Err(FabricError::Params(format!("k must lie in 2..={MAX_VARS}, got {}", self.k)));
        }
        if self.io_per_boundary_tile < 1 {
            return Err(FabricError::Params("io_per_boundary_tile must be at least 1".into()));
        }
        let a = &self.area;
        if [a.a_lut, a.a_ff, a.a_xbar, a.a_fixed].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FabricError::Params("area coefficients must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// CLB input count, `ceil(k(n+1)/2)`.
    pub fn i(&self) -> u32 {
        (self.k * (self.n + 1)).div_ceil(2)
    }

    /// Pads available on a `w`-by-`w` grid.
    pub fn capacity(&self, w: u32) -> u32 {
        4 * w * self.io_per_boundary_tile
    }

    pub fn tile_area(&self) -> f64 {
        let (n, k, i) = (self.n as f64, self.k as f64, self.i() as f64);
        let a = &self.area;
        a.a_lut * n * 2f64.powi(self.k as i32) + a.a_ff * n + a.a_xbar * (i + n) * n * k + a.a_fixed
    }

    /// Crossbar select bits of one CLB.
    pub fn routing_bits_per_clb(&self) -> u64 {
        let inputs = (self.i() + self.n) as u64;
        let sel = u64::BITS - (inputs - 1).leading_zeros();
        inputs * self.n as u64 * sel as u64
    }
}

/// Smallest side `w` with `w^2 >= max(clb_count, 1)` and enough pads for
/// `io_used`.
pub fn size_grid(clb_count: u32, io_used: u32, params: &FabricParams) -> u32 {
    let clbs = clb_count.max(1) as u64;
    let mut w = (clbs as f64).sqrt() as u64;
    while w * w < clbs {
        w += 1;
    }
    while w > 1 && (w - 1) * (w - 1) >= clbs {
        w -= 1;
    }
    let w = w.max(1) as u32;
    let per_side = 4 * params.io_per_boundary_tile;
    w.max(io_used.div_ceil(per_side)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_inputs_round_up() {
        assert_eq!(FabricParams::new(4, 4).i(), 10);
        assert_eq!(FabricParams::new(2, 3).i(), 5);
        assert_eq!(FabricParams::new(1, 3).i(), 3);
    }

    #[test]
    fn grid_examples() {
        let p = FabricParams::new(4, 4);
        assert_eq!(p.capacity(4), 64);
        assert_eq!(size_grid(10, 30, &p), 4);
        assert_eq!(size_grid(1, 65, &p), 5);
        assert_eq!(size_grid(1, 64, &p), 4);
        assert_eq!(size_grid(0, 1, &p), 1);
    }

    #[test]
    fn tile_area_grows_in_n_and_k() {
        for n in 1..10 {
            for k in 2..8 {
                let a = FabricParams::new(n, k).tile_area();
                assert!(FabricParams::new(n + 1, k).tile_area() > a);
                assert!(FabricParams::new(n, k + 1).tile_area() > a);
            }
        }
    }

    #[test]
    fn routing_bits() {
        // i + n = 14 inputs, 4 select bits each, 4 BLEs
        assert_eq!(FabricParams::new(4, 4).routing_bits_per_clb(), 14 * 4 * 4);
    }
}
