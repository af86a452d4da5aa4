// SPDX-License-Identifier: Apache-2.0
//! Greedy BLE-to-CLB packing under the BLE and CLB-input bounds.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{FabricError, FabricParams};
use crate::ir::{CellOp, FlatNetlist, Sig};

/// One LUT with an optional flip-flop, or a lone flip-flop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ble {
    pub inputs: BTreeSet<Sig>,
    pub outputs: Vec<Sig>,
}

/// Pairs every LUT with the flip-flop it feeds, when there is one free.
pub fn form_bles(net: &FlatNetlist) -> Vec<Ble> {
    let mut bles = Vec::new();
    let mut lut_of: HashMap<Sig, usize> = HashMap::new();
    for c in &net.cells {
        if let CellOp::Lut(_) = c.op {
            lut_of.insert(c.output, bles.len());
            bles.push(Ble { inputs: c.inputs.iter().copied().collect(), outputs: vec![c.output] });
        }
    }
    let mut taken = vec![false; bles.len()];
    for c in net.cells.iter().filter(|c| c.op.is_sequential()) {
        let d = c.inputs[0];
        match lut_of.get(&d) {
            Some(&b) if !taken[b] => {
                taken[b] = true;
                bles[b].outputs.push(c.output);
            }
            _ => bles.push(Ble { inputs: [d].into_iter().collect(), outputs: vec![c.output] }),
        }
    }
    bles
}

fn external_inputs(members: &[usize], bles: &[Ble]) -> BTreeSet<Sig> {
    let produced: BTreeSet<Sig> = members.iter().flat_map(|&b| bles[b].outputs.iter().copied()).collect();
    members
        .iter()
        .flat_map(|&b| bles[b].inputs.iter().copied())
        .filter(|s| !produced.contains(s))
        .collect()
}

/// Groups BLEs into CLBs of at most `n` BLEs and `i` distinct external
/// inputs. Seeds with the unpacked BLE having the most inputs and grows by
/// the candidate sharing the most nets with the cluster.
pub fn pack_clbs(bles: &[Ble], params: &FabricParams) -> Result<Vec<Vec<usize>>, FabricError> {
    let (n, i) = (params.n as usize, params.i() as usize);
    if let Some(b) = bles.iter().position(|b| b.inputs.len() > i) {
        return Err(FabricError::Unmappable(format!("BLE {b} has {} inputs, above i = {i}", bles[b].inputs.len())));
    }
    let mut packed = vec![false; bles.len()];
    let mut left = bles.len();
    let mut clbs = Vec::new();
    while left > 0 {
        let seed = (0..bles.len())
            .filter(|&b| !packed[b])
            .max_by_key(|&b| (bles[b].inputs.len(), std::cmp::Reverse(b)))
            .unwrap();
        packed[seed] = true;
        left -= 1;
        let mut members = vec![seed];
        let mut nets: BTreeSet<Sig> = bles[seed].inputs.iter().chain(&bles[seed].outputs).copied().collect();
        while members.len() < n && left > 0 {
            let mut pick: Option<(usize, usize)> = None;
            for b in (0..bles.len()).filter(|&b| !packed[b]) {
                let shared = bles[b].inputs.iter().chain(&bles[b].outputs).filter(|s| nets.contains(s)).count();
                if pick.is_some_and(|(_, best)| shared <= best) {
                    continue;
                }
                let mut trial = members.clone();
                trial.push(b);
                if external_inputs(&trial, bles).len() <= i {
                    pick = Some((b, shared));
                }
            }
            let Some((b, _)) = pick else { break };
            packed[b] = true;
            left -= 1;
            members.push(b);
            nets.extend(bles[b].inputs.iter().chain(&bles[b].outputs).copied());
        }
        clbs.push(members);
    }
    Ok(clbs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lut(inputs: &[u32], out: u32) -> Ble {
        Ble { inputs: inputs.iter().map(|&s| Sig(s)).collect(), outputs: vec![Sig(out)] }
    }

    #[test]
    fn disjoint_luts_limited_by_inputs() {
        let bles: Vec<Ble> = (0..7).map(|j| lut(&[4 * j, 4 * j + 1, 4 * j + 2, 4 * j + 3], 100 + j)).collect();
        let clbs = pack_clbs(&bles, &FabricParams::new(4, 4)).unwrap();
        assert_eq!(clbs.len(), 4);
    }

    #[test]
    fn shared_inputs_fill_one_clb() {
        let bles: Vec<Ble> = (0..4).map(|j| lut(&[0, 1, 2, 3], 10 + j)).collect();
        assert_eq!(pack_clbs(&bles, &FabricParams::new(4, 4)).unwrap().len(), 1);
    }

    #[test]
    fn empty_packs_to_nothing() {
        assert!(pack_clbs(&[], &FabricParams::new(4, 4)).unwrap().is_empty());
    }

    #[test]
    fn local_feedback_is_not_an_external_input() {
        // a chain: each LUT reads the previous output plus one fresh input
        let mut bles = vec![lut(&[0, 1], 100)];
        for j in 1..4 {
            bles.push(lut(&[99 + j, 10 + j], 100 + j));
        }
        let p = FabricParams::new(4, 2);
        assert_eq!(p.i(), 5);
        assert_eq!(pack_clbs(&bles, &p).unwrap().len(), 1);
    }
}
