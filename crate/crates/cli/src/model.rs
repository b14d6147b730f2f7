//! Model directory layout: everything `dnp detect` and `dnp visualize` need
//! to reproduce a trained detector.
//!
//! ```text
//! model/
//!   net.net        netspec text
//!   weights.dnpw   binary weights
//!   configs.txt    serialized configuration pool
//!   cascade.txt    stages and weak classifiers (pool indices)
//!   protocol.txt   proposal lattice, label, seeds, counts
//! ```

use std::path::Path;

use anyhow::{anyhow, Context, Result};

use dnp_core::cnn::{load_weights, save_weights, WeightSet};
use dnp_core::detector::{load_cascade, save_cascade, Cascade};
use dnp_core::geometry::NetSpec;
use dnp_core::pipeline::Protocol;
use dnp_core::regionlets::{load_pool, save_pool};

pub fn save_model(
    dir: &Path,
    net: &NetSpec,
    weights: &WeightSet,
    cascade: &Cascade,
    protocol: &Protocol,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    net.save(&dir.join("net.net"))?;
    save_weights(&dir.join("weights.dnpw"), weights)?;
    save_pool(&dir.join("configs.txt"), &cascade.pool)?;
    save_cascade(&dir.join("cascade.txt"), cascade)?;

    let mut meta = String::new();
    meta.push_str(&format!("label {}\n", protocol.label));
    meta.push_str(&format!(
        "scales {}\n",
        protocol
            .proposal_scales
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    meta.push_str(&format!(
        "ratios {}\n",
        protocol
            .proposal_ratios
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    meta.push_str(&format!("stride {}\n", protocol.proposal_stride));
    meta.push_str(&format!("nms-iou {}\n", protocol.nms_iou));
    meta.push_str(&format!("weight-seed {}\n", protocol.weight_seed));
    meta.push_str(&format!("config-seed {}\n", protocol.config_seed));
    meta.push_str(&format!("pool-size {}\n", protocol.pool_size));
    meta.push_str(&format!("k-max {}\n", protocol.k_max));
    meta.push_str(&format!(
        "families {}\n",
        protocol
            .families
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    std::fs::write(dir.join("protocol.txt"), meta)?;
    Ok(())
}

pub struct Model {
    pub net: NetSpec,
    pub weights: WeightSet,
    pub cascade: Cascade,
    pub protocol: Protocol,
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let net = NetSpec::load(&dir.join("net.net")).context("reading model net.net")?;
    let weights =
        load_weights(&dir.join("weights.dnpw"), &net).context("reading model weights.dnpw")?;
    let pool = load_pool(&dir.join("configs.txt")).context("reading model configs.txt")?;
    let cascade =
        load_cascade(&dir.join("cascade.txt"), pool).context("reading model cascade.txt")?;

    let mut protocol = Protocol {
        net: net.clone(),
        ..Protocol::default()
    };
    let meta =
        std::fs::read_to_string(dir.join("protocol.txt")).context("reading model protocol.txt")?;
    for line in meta.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| anyhow!("bad protocol line {line:?}"))?;
        match key {
            "label" => protocol.label = value.to_string(),
            "scales" => {
                protocol.proposal_scales = parse_list(value)?;
            }
            "ratios" => {
                protocol.proposal_ratios = parse_list(value)?;
            }
            "stride" => protocol.proposal_stride = value.parse()?,
            "nms-iou" => protocol.nms_iou = value.parse()?,
            "weight-seed" => protocol.weight_seed = value.parse()?,
            "config-seed" => protocol.config_seed = value.parse()?,
            "pool-size" => protocol.pool_size = value.parse()?,
            "k-max" => protocol.k_max = value.parse()?,
            "families" => {
                protocol.families = value
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|e: String| anyhow!(e)))
                    .collect::<Result<Vec<_>>>()?;
            }
            other => return Err(anyhow!("unknown protocol key {other:?}")),
        }
    }
    protocol.train.normalizer = cascade.normalizer;
    Ok(Model {
        net,
        weights,
        cascade,
        protocol,
    })
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(Into::into))
        .collect()
}
