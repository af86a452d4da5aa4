// SPDX-License-Identifier: Apache-2.0
//! Fabric characterization oracle: LUT mapping, CLB packing, grid sizing
//! and the area/bitstream model.

mod mapper;
mod pack;
mod params;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

pub use mapper::{map_to_luts, LutMapping, LutNode, DEFAULT_CUT_LIMIT};
pub use pack::{form_bles, pack_clbs, Ble};
pub use params::{size_grid, AreaModel, FabricParams, DEFAULT_IO_PER_TILE};

use crate::ir::{flatten, flatten_with, Design, FlatNetlist, IrError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FabricError {
    #[error("invalid fabric parameters: {0}")]
    Params(String),
    #[error("cannot map: {0}")]
    Unmappable(String),
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FabricResult {
    pub params: FabricParams,
    pub lut_count: u32,
    pub ff_count: u32,
    pub ble_count: u32,
    pub clb_count: u32,
    pub grid_side: u32,
    pub io_used: u32,
    pub io_capacity: u32,
    pub clb_util: f64,
    pub io_util: f64,
    pub area_estimate: f64,
    pub bitstream_bits: u64,
    #[serde(skip)]
    pub mapping: Arc<LutMapping>,
    /// BLE indices (into `form_bles(&mapping.net)`) of each CLB.
    #[serde(skip)]
    pub clbs: Arc<Vec<Vec<usize>>>,
}

impl FabricResult {
    pub fn luts(&self) -> Vec<LutNode> {
        self.mapping.lut_nodes()
    }

    /// Fabric specification document: parameters, counts, truth tables and
    /// packing groups.
    pub fn spec_json(&self) -> serde_json::Value {
        let net = &self.mapping.net;
        let name = |s: &crate::ir::Sig| net.names[s.idx()].clone();
        let bles = form_bles(net);
        let luts: Vec<serde_json::Value> = self
            .luts()
            .iter()
            .map(|l| {
                serde_json::json!({
                    "output": name(&l.output),
                    "inputs": l.inputs.iter().map(name).collect::<Vec<_>>(),
                    "truth_table": l.table.to_hex(),
                    "sequential": l.is_sequential,
                })
            })
            .collect();
        let clbs: Vec<Vec<Vec<String>>> = self
            .clbs
            .iter()
            .map(|group| group.iter().map(|&b| bles[b].outputs.iter().map(name).collect()).collect())
            .collect();
        serde_json::json!({
            "params": {
                "n": self.params.n,
                "k": self.params.k,
                "i": self.params.i(),
                "io_per_boundary_tile": self.params.io_per_boundary_tile,
                "area_model": self.params.area,
            },
            "grid_side": self.grid_side,
            "lut_count": self.lut_count,
            "ff_count": self.ff_count,
            "ble_count": self.ble_count,
            "clb_count": self.clb_count,
            "io_used": self.io_used,
            "io_capacity": self.io_capacity,
            "clb_util": self.clb_util,
            "io_util": self.io_util,
            "area_estimate": self.area_estimate,
            "bitstream_bits": self.bitstream_bits,
            "inputs": net.inputs.iter().map(|(n, s)| serde_json::json!({"name": n, "width": s.len()})).collect::<Vec<_>>(),
            "outputs": net.outputs.iter().map(|(n, s)| serde_json::json!({"name": n, "width": s.len()})).collect::<Vec<_>>(),
            "luts": luts,
            "clbs": clbs,
        })
    }
}

/// Characterizes a wrapper design (its top module) for one parameter point.
pub fn characterize(wrapper: &Design, params: &FabricParams) -> Result<FabricResult, FabricError> {
    Characterizer::new(DEFAULT_CUT_LIMIT).characterize(wrapper, params)
}

/// Assembles a result from a mapped network.
pub fn characterize_mapping(mapping: Arc<LutMapping>, params: &FabricParams) -> Result<FabricResult, FabricError> {
    params.validate()?;
    let net = &mapping.net;
    let bles = form_bles(net);
    let clbs = pack_clbs(&bles, params)?;
    let io_used = (net.input_bits() + net.output_bits()) as u32;
    let clb_count = (clbs.len() as u32).max(1);
    let w = size_grid(clb_count, io_used, params);
    let cap = params.capacity(w);
    let lut_count = mapping.lut_count();
    Ok(FabricResult {
        params: *params,
        lut_count,
        ff_count: mapping.ff_count(),
        ble_count: bles.len() as u32,
        clb_count,
        grid_side: w,
        io_used,
        io_capacity: cap,
        clb_util: clb_count as f64 / (w as f64 * w as f64),
        io_util: io_used as f64 / cap as f64,
        area_estimate: (w as f64 * w as f64) * params.tile_area(),
        bitstream_bits: lut_count as u64 * (1u64 << params.k)
            + clb_count as u64 * params.routing_bits_per_clb(),
        mapping,
        clbs: Arc::new(clbs),
    })
}

type ResultKey = (String, u32, u32, u32, [u64; 4]);

/// Caching characterization front end. Module mappings are shared between
/// every wrapper instantiating the same module, so a wrapper's mapping is
/// the union of its members' mappings. Safe to share across threads.
pub struct Characterizer {
    cut_limit: usize,
    modules: Mutex<HashMap<(String, u32), Arc<LutMapping>>>,
    wrappers: Mutex<HashMap<(String, u32), Arc<LutMapping>>>,
    results: Mutex<HashMap<ResultKey, FabricResult>>,
}

impl Characterizer {
    pub fn new(cut_limit: usize) -> Self {
        Self {
            cut_limit,
            modules: Mutex::new(HashMap::new()),
            wrappers: Mutex::new(HashMap::new()),
            results: Mutex::new(HashMap::new()),
        }
    }

    /// Best mapping of `module` over cut sizes 2..=k (monotone in `k`).
    pub fn map_module(&self, design: &Design, module: &str, k: u32) -> Result<Arc<LutMapping>, FabricError> {
        if let Some(m) = self.modules.lock().unwrap().get(&(module.to_string(), k)) {
            return Ok(m.clone());
        }
        let net = flatten(design, module)?;
        let raw = mapper::map_exact(&net, k, self.cut_limit)?;
        let best = if k > 2 {
            let lower = self.map_module(design, module, k - 1)?;
            if mapper::better(&lower, &raw) {
                LutMapping { k, mapped_k: lower.mapped_k, net: lower.net.clone() }
            } else {
                raw
            }
        } else {
            raw
        };
        let best = Arc::new(best);
        self.modules.lock().unwrap().insert((module.to_string(), k), best.clone());
        Ok(best)
    }

    /// Mapping of the wrapper's top module, cached under `key`. A top
    /// holding only instances is mapped member by member.
    pub fn map_wrapper(&self, key: &str, wrapper: &Design, k: u32) -> Result<Arc<LutMapping>, FabricError> {
        let key = (key.to_string(), k);
        if let Some(m) = self.wrappers.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let top = wrapper.top_module();
        let net: FlatNetlist = if top.gates.is_empty() {
            let mut bindings = HashMap::new();
            for inst in &top.instances {
                if !bindings.contains_key(&inst.module) {
                    let m = self.map_module(wrapper, &inst.module, k)?;
                    bindings.insert(inst.module.clone(), m.net.clone());
                }
            }
            flatten_with(wrapper, wrapper.top(), &bindings)?
        } else {
            self.map_module(wrapper, wrapper.top(), k)?.net.clone()
        };
        let mapping = Arc::new(LutMapping { k, mapped_k: k, net });
        self.wrappers.lock().unwrap().insert(key, mapping.clone());
        Ok(mapping)
    }

    pub fn characterize(&self, wrapper: &Design, params: &FabricParams) -> Result<FabricResult, FabricError> {
        self.characterize_keyed(wrapper.top(), wrapper, params)
    }

    /// As [`Characterizer::characterize`], with results cached under `key`
    /// instead of the top module name.
    pub fn characterize_keyed(
        &self,
        key: &str,
        wrapper: &Design,
        params: &FabricParams,
    ) -> Result<FabricResult, FabricError> {
        params.validate()?;
        let a = params.area;
        let cache_key: ResultKey = (
            key.to_string(),
            params.n,
            params.k,
            params.io_per_boundary_tile,
            [a.a_lut.to_bits(), a.a_ff.to_bits(), a.a_xbar.to_bits(), a.a_fixed.to_bits()],
        );
        if let Some(r) = self.results.lock().unwrap().get(&cache_key) {
            return Ok(r.clone());
        }
        let mapping = self.map_wrapper(key, wrapper, params.k)?;
        let result = characterize_mapping(mapping, params)?;
        self.results.lock().unwrap().insert(cache_key, result.clone());
        Ok(result)
    }
}

impl Default for Characterizer {
    fn default() -> Self {
        Self::new(DEFAULT_CUT_LIMIT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_verilog;

    #[test]
    fn inverter_fabric() {
        let d = parse_verilog("module inv(input a, output y); assign y = ~a; endmodule").unwrap();
        let r = characterize(&d, &FabricParams::new(4, 4)).unwrap();
        assert_eq!((r.lut_count, r.clb_count, r.grid_side), (1, 1, 1));
        assert_eq!(r.clb_util, 1.0);
        assert_eq!(r.io_used, 2);
        assert_eq!(r.bitstream_bits, 16 + r.params.routing_bits_per_clb());
    }

    #[test]
    fn repeated_runs_are_identical() {
        let src = "module m(input [3:0] a, b, output [3:0] s); assign s = a + b; endmodule";
        let d = parse_verilog(src).unwrap();
        let p = FabricParams::new(3, 4);
        assert_eq!(characterize(&d, &p).unwrap(), characterize(&d, &p).unwrap());
        let spec = characterize(&d, &p).unwrap().spec_json();
        assert_eq!(spec["params"]["i"], 8);
    }
}
