// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use arianna_core::config::FlowConfig;
use arianna_core::fixtures::{corpus, des3_like, CORPUS_SEED};
use arianna_core::flow::{run_flow, run_flow_on, Phase};
use arianna_core::ir::{parse_verilog, Design};

fn des3() -> Design {
    parse_verilog(&des3_like(false)).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn yaml_config_drives_the_flow() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.v"), des3_like(false)).unwrap();
    std::fs::write(
        dir.path().join("c.yaml"),
        "inputs: [d.v]\nselected_outputs: [out]\nmax_io: 96\nmax_efpgas: 1\nn_range: [1, 10]\nk_range: [2, 6]\nmax_grid_side: 8\nout_dir: out\n",
    )
    .unwrap();
    let cfg = FlowConfig::load(&dir.path().join("c.yaml")).unwrap();
    let o = run_flow(&cfg).unwrap();
    let out = dir.path().join("out");
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "candidates.csv", "clusters.csv", "dse.csv", "efpga_0.fabric.json", "heatmap.csv", "manifest.json",
            "report.json", "solutions.csv", "top_redacted.v"
        ]
    );
    let m = json(&out.join("manifest.json"));
    let redacted = m["efpgas"][0]["redacted_instances"].as_array().unwrap();
    assert_eq!(m["efpgas"].as_array().unwrap().len(), 1);
    assert_eq!(redacted.len(), 8);
    // report rows match the in-memory sets
    let rows = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("candidates.csv"), o.assessments.len());
    assert_eq!(rows("clusters.csv"), o.clusters.len());
    assert_eq!(rows("dse.csv"), o.clusters.len());
    assert_eq!(rows("solutions.csv"), o.solutions.len());
    assert_eq!(rows("heatmap.csv"), 50);
}

#[test]
fn two_shells_and_no_secret_left() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = FlowConfig::cfg1(vec!["out".into()]);
    cfg.out_dir = Some(dir.path().to_path_buf());
    let o = run_flow_on(&des3(), &cfg).unwrap();
    assert_eq!(o.redacted.shells.len(), 2);
    assert!(o.verification.as_ref().unwrap().equivalent());
    let text = std::fs::read_to_string(dir.path().join("top_redacted.v")).unwrap();
    assert!(!text.contains("module sbox"));
    let back = parse_verilog(&text).unwrap();
    assert_eq!(back.modules().filter(|m| m.blackbox).count(), 2);
    assert!(back.top_module().ports.iter().any(|p| p.name == "efpga1_scan_out"));
    assert_eq!(o.warnings.len(), 2, "3x3 grids are below the secure side");
}

#[test]
fn phase_tagged_errors() {
    let mut cfg = FlowConfig::cfg2(vec!["out".into()]);
    cfg.max_grid_side = 1;
    cfg.io_per_boundary_tile = 1;
    assert_eq!(run_flow_on(&des3(), &cfg).err().unwrap().phase, Phase::Dse);
    let mut cfg = FlowConfig::cfg2(vec!["out".into()]);
    cfg.cluster_cap = 10;
    assert_eq!(run_flow_on(&des3(), &cfg).err().unwrap().phase, Phase::Cluster);
    let cfg = FlowConfig::cfg2(vec!["nope".into()]);
    assert_eq!(run_flow_on(&des3(), &cfg).err().unwrap().phase, Phase::Filter);
    let mut cfg = FlowConfig::cfg2(vec!["out".into()]);
    cfg.k_range = (1, 6);
    assert_eq!(run_flow_on(&des3(), &cfg).err().unwrap().phase, Phase::Config);
    let mut cfg = FlowConfig::cfg2(vec!["out".into()]);
    cfg.inputs = vec!["/nonexistent/x.v".into()];
    assert_eq!(run_flow(&cfg).err().unwrap().phase, Phase::Load);
}

#[test]
fn shared_modules_are_uniquified() {
    // rand00 instantiates one container module three times
    let (_, src) = corpus(CORPUS_SEED, 1).remove(0);
    let d = parse_verilog(&src).unwrap();
    let outs: Vec<String> = d.top_module().outputs().map(|p| p.name.clone()).collect();
    for cfg in [FlowConfig::cfg1(outs.clone()), FlowConfig::cfg2(outs)] {
        let o = run_flow_on(&d, &cfg).unwrap();
        assert!(o.verification.as_ref().unwrap().equivalent());
        let redacted = &o.redacted.design;
        let tree = redacted.tree();
        for u in &o.units {
            for m in &u.wrapper.cluster.members {
                assert!(!tree.contains(m), "{m} still present");
            }
        }
    }
}
