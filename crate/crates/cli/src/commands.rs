use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use dnp_core::bench::{bench_convolutions, bench_with_timing, BenchReport};
use dnp_core::cnn::{forward_to_layer, init_weights, load_weights, WeightSet};
use dnp_core::dense::network_convolution;
use dnp_core::detector::TrainParams;
use dnp_core::eval::{
    average_precision, detections_from_csv, detections_to_csv, proposals_from_csv, ApMode,
    EvalDetection,
};
use dnp_core::geometry::{self, NetSpec};
use dnp_core::grid::FeatureGrid;
use dnp_core::image::Image;
use dnp_core::pipeline::{detect_on_manifest_with, train_on_manifest_with, ProposalMap, Protocol};
use dnp_core::regionlets::Family;
use dnp_core::synth::{generate_synthetic, load_manifest, SynthSpec};
use dnp_core::visualize::visualize_top_patterns;

use crate::model::{load_model, save_model};

/// `--net` accepts the built-in names or a netspec file path.
fn resolve_net(spec: &str) -> Result<NetSpec> {
    match spec {
        "reference" => Ok(NetSpec::reference()),
        "tiny" => Ok(NetSpec::tiny()),
        path => NetSpec::load(std::path::Path::new(path))
            .with_context(|| format!("loading netspec {path:?}")),
    }
}

/// Highest conv layer, the default feature layer of a net.
fn default_layer(net: &NetSpec) -> usize {
    let rows = geometry::geometry_table(net).expect("valid net");
    rows.iter()
        .rev()
        .find(|r| r.kind == geometry::LayerKind::Conv)
        .map(|r| r.index)
        .unwrap_or(rows.len())
}

fn weights_from(net: &NetSpec, file: &Option<PathBuf>, seed: u64) -> Result<WeightSet> {
    match file {
        Some(path) => load_weights(path, net).with_context(|| format!("loading weights {path:?}")),
        None => Ok(init_weights(net, seed)),
    }
}

fn load_proposal_map(path: &Option<PathBuf>) -> Result<Option<ProposalMap>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    let mut map: ProposalMap = HashMap::new();
    for (id, rect) in proposals_from_csv(&text)? {
        map.entry(id).or_default().push(rect);
    }
    Ok(Some(map))
}

// ---------------------------------------------------------------------------
// table
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TableArgs {
    /// Net: `reference`, `tiny`, or a netspec file
    #[arg(long)]
    net: String,
}

pub fn table(args: TableArgs) -> Result<()> {
    let net = resolve_net(&args.net)?;
    let rows = geometry::geometry_table(&net)?;
    println!(
        "{:<3} {:<7} {:>3} {:>3} {:>3} {:>5} {:>6} {:>5} {:>5}",
        "i", "layer", "W", "s", "P", "S_i", "x_i", "rf", "out"
    );
    for r in &rows {
        println!(
            "{:<3} {:<7} {:>3} {:>3} {:>3} {:>5} {:>6} {:>5} {:>5}",
            r.index,
            r.label,
            r.window,
            r.stride_cells,
            r.padding,
            r.pixel_stride,
            r.center.to_string(),
            r.rf,
            r.out_size
        );
    }
    println!();
    println!("i,layer,W,s,P,S,x,rf,out");
    for r in &rows {
        println!(
            "{},{},{},{},{},{},{},{},{}",
            r.index,
            r.label,
            r.window,
            r.stride_cells,
            r.padding,
            r.pixel_stride,
            r.center,
            r.rf,
            r.out_size
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// forward / extract
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ForwardArgs {
    #[arg(long)]
    net: String,
    /// Weight file; omitted: deterministic random init from --weight-seed
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2014)]
    weight_seed: u64,
    /// Input image (PPM/PGM), exactly the net's input size
    #[arg(long)]
    image: PathBuf,
    /// Geometry-active layer index (1-based); default: highest conv layer
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

pub fn forward(args: ForwardArgs) -> Result<()> {
    let net = resolve_net(&args.net)?;
    let layer = args.layer.unwrap_or_else(|| default_layer(&net));
    let weights = weights_from(&net, &args.weights, args.weight_seed)?;
    let image = Image::load(&args.image)?;
    let input = net.input_size as usize;
    if image.width != input || image.height != input {
        bail!(
            "image is {}x{}, net expects exactly {input}x{input} (use `extract` for larger images)",
            image.width,
            image.height
        );
    }
    eprintln!(
        "config: forward net={} layer={layer} weights={} image={:?}",
        args.net,
        args.weights
            .as_ref()
            .map(|p| format!("{p:?}"))
            .unwrap_or_else(|| format!("seed:{}", args.weight_seed)),
        args.image
    );
    let tensor = image.to_input_tensor(net.input_channels as usize);
    let maps = forward_to_layer(&net, &weights, &tensor, layer)?;
    let stride = geometry::layer_stride(&net, layer)?;
    let origin = geometry::top_left_center(&net, layer)?
        .add_int(-1)
        .to_i64()
        .ok_or_else(|| anyhow!("layer {layer} has a fractional origin; cannot emit a grid"))?;
    let mut grid = FeatureGrid::zeros(
        (origin, origin),
        stride as u32,
        maps.width,
        maps.height,
        maps.channels,
    );
    for v in 0..maps.height {
        for u in 0..maps.width {
            for c in 0..maps.channels {
                grid.point_mut(u, v)[c] = maps.at(c, v, u);
            }
        }
    }
    grid.save(&args.out)?;
    println!(
        "wrote {:?}: {} maps of {}x{} cells (stride {stride}px)",
        args.out, maps.channels, maps.width, maps.height
    );
    Ok(())
}

#[derive(Args)]
pub struct ExtractArgs {
    #[arg(long)]
    net: String,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2014)]
    weight_seed: u64,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let net = resolve_net(&args.net)?;
    let layer = args.layer.unwrap_or_else(|| default_layer(&net));
    let weights = weights_from(&net, &args.weights, args.weight_seed)?;
    let image = Image::load(&args.image)?;
    eprintln!(
        "config: extract net={} layer={layer} weights={} image={:?} ({}x{})",
        args.net,
        args.weights
            .as_ref()
            .map(|p| format!("{p:?}"))
            .unwrap_or_else(|| format!("seed:{}", args.weight_seed)),
        args.image,
        image.width,
        image.height
    );
    let grid = network_convolution(&net, &weights, &image, layer)?;
    grid.save(&args.out)?;
    println!(
        "wrote {:?}: {}x{} points, {} dims, stride {}px, origin ({}, {})",
        args.out, grid.cols, grid.rows, grid.dim, grid.stride, grid.origin.0, grid.origin.1
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Square image side in pixels
    #[arg(long, default_value_t = 320)]
    size: usize,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        width: args.size,
        height: args.size,
        ..SynthSpec::default()
    };
    eprintln!(
        "config: synth seed={} train={} test={} size={}",
        args.seed, args.train, args.test, args.size
    );
    let train = generate_synthetic(args.seed, args.train, &spec, &args.out, "train")?;
    let test = generate_synthetic(args.seed ^ 0x5eed, args.test, &spec, &args.out, "test")?;
    let boxes = |m: &dnp_core::synth::DatasetManifest| -> usize {
        m.entries.iter().map(|e| e.gt.boxes.len()).sum()
    };
    println!(
        "wrote {:?}: train {} images / {} boxes, test {} images / {} boxes",
        args.out,
        train.entries.len(),
        boxes(&train),
        test.entries.len(),
        boxes(&test)
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset root (as written by `dnp synth`)
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "tiny")]
    net: String,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2014)]
    weight_seed: u64,
    /// Neural-pattern layer; default: highest conv layer of the net
    #[arg(long)]
    layer: Option<usize>,
    /// Comma-separated feature families: `dnp`, `hog`, or `dnp,hog`
    #[arg(long, default_value = "dnp")]
    families: String,
    #[arg(long, default_value_t = 10_000)]
    pool: usize,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, default_value_t = 64)]
    weaks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// External proposals CSV (image_id,left,top,right,bottom); default:
    /// built-in sliding-window lattice
    #[arg(long)]
    proposals: Option<PathBuf>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let net = resolve_net(&args.net)?;
    let layer = args.layer.unwrap_or_else(|| default_layer(&net));
    let mut families = Vec::new();
    for token in args.families.split(',') {
        match token.trim() {
            "dnp" => families.push(Family::Dnp(layer)),
            "hog" => families.push(Family::Hog),
            other => bail!("unknown family {other:?} (expected `dnp` or `hog`)"),
        }
    }
    let protocol = Protocol {
        net: net.clone(),
        weight_seed: args.weight_seed,
        families,
        pool_size: args.pool,
        train: TrainParams {
            stages: args.stages,
            weaks_per_stage: args.weaks,
            seed: args.seed,
            ..TrainParams::default()
        },
        ..Protocol::default()
    };
    eprintln!(
        "config: train data={:?} split={} net={} layer={layer} families={} pool={} stages={}x{} seed={} weight-seed={}",
        args.data, args.split, args.net, args.families, args.pool, args.stages, args.weaks,
        args.seed, args.weight_seed
    );

    let manifest = load_manifest(&args.data, &args.split)?;
    let weights = weights_from(&net, &args.weights, args.weight_seed)?;
    let proposals = load_proposal_map(&args.proposals)?;
    let t0 = std::time::Instant::now();
    let (cascade, trace) =
        train_on_manifest_with(&manifest, &protocol, &weights, proposals.as_ref())?;
    save_model(&args.out, &net, &weights, &cascade, &protocol)?;
    println!(
        "trained {} stages / {} weaks on {} positives in {:.1}s -> {:?}",
        cascade.stages.len(),
        cascade.num_weaks(),
        trace.positives,
        t0.elapsed().as_secs_f64(),
        args.out
    );
    for (si, st) in trace.stages.iter().enumerate() {
        println!(
            "  stage {}: {} rounds, exp-loss {:.4} -> {:.4}, negatives {}",
            si + 1,
            st.exp_loss.len(),
            st.exp_loss.first().copied().unwrap_or(1.0),
            st.exp_loss.last().copied().unwrap_or(1.0),
            trace.negatives_per_stage.get(si).copied().unwrap_or(0)
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// NMS IoU threshold
    #[arg(long, default_value_t = 0.5)]
    nms_iou: f64,
    #[arg(long)]
    proposals: Option<PathBuf>,
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let mut model = load_model(&args.model)?;
    model.protocol.nms_iou = args.nms_iou;
    eprintln!(
        "config: detect data={:?} split={} model={:?} nms-iou={} families={:?}",
        args.data,
        args.split,
        args.model,
        args.nms_iou,
        model.cascade.families_used()
    );
    let manifest = load_manifest(&args.data, &args.split)?;
    let proposals = load_proposal_map(&args.proposals)?;
    let t0 = std::time::Instant::now();
    let dets = detect_on_manifest_with(
        &manifest,
        &model.cascade,
        &model.weights,
        &model.protocol,
        proposals.as_ref(),
    )?;
    std::fs::write(&args.out, detections_to_csv(&dets))?;
    println!(
        "wrote {:?}: {} detections over {} images in {:.1}s",
        args.out,
        dets.len(),
        manifest.entries.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct EvalArgs {
    /// Detections CSV (as written by `dnp detect`)
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// `all` (all-point interpolation) or `11pt`
    #[arg(long, default_value = "all")]
    mode: String,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mode = match args.mode.as_str() {
        "all" => ApMode::AllPoint,
        "11pt" => ApMode::ElevenPoint,
        other => bail!("unknown mode {other:?} (expected `all` or `11pt`)"),
    };
    let text = std::fs::read_to_string(&args.dets)
        .with_context(|| format!("reading detections {:?}", args.dets))?;
    let dets: Vec<EvalDetection> = detections_from_csv(&text)?;
    let manifest = load_manifest(&args.data, &args.split)?;
    let gts: Vec<_> = manifest.entries.iter().map(|e| e.gt.clone()).collect();
    let npos: usize = gts
        .iter()
        .flat_map(|g| g.boxes.iter())
        .filter(|b| !b.difficult)
        .count();
    eprintln!(
        "config: eval dets={:?} data={:?} split={} iou={} mode={}",
        args.dets, args.data, args.split, args.iou, args.mode
    );
    let ap = average_precision(&dets, &gts, args.iou, mode);
    println!(
        "AP = {ap:.4} ({} detections, {npos} ground truths, IoU {}, {})",
        dets.len(),
        args.iou,
        args.mode
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long, default_value_t = 480)]
    height: usize,
    #[arg(long, default_value_t = 2213)]
    proposals: usize,
    #[arg(long, default_value = "reference")]
    net: String,
    #[arg(long)]
    layer: Option<usize>,
    /// Also measure wall-clock on this machine (non-normative; slow on the
    /// full-size net)
    #[arg(long)]
    time: bool,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2014)]
    weight_seed: u64,
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let net = resolve_net(&args.net)?;
    let layer = args.layer.unwrap_or_else(|| default_layer(&net));
    eprintln!(
        "config: bench {}x{} proposals={} net={} layer={layer} time={}",
        args.width, args.height, args.proposals, args.net, args.time
    );
    let report: BenchReport = if args.time {
        let weights = weights_from(&net, &args.weights, args.weight_seed)?;
        bench_with_timing(
            args.width,
            args.height,
            args.proposals,
            &net,
            layer,
            &weights,
        )?
    } else {
        bench_convolutions(args.width, args.height, args.proposals, &net, layer)?
    };
    print!("{}", report.human_table());
    println!("{}", BenchReport::csv_header());
    println!("{}", report.csv_row());
    Ok(())
}

// ---------------------------------------------------------------------------
// visualize
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    /// Number of top-response patches to emit (0: histogram only)
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn visualize(args: VisualizeArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let manifest = load_manifest(&args.data, &args.split)?;
    eprintln!(
        "config: visualize model={:?} data={:?} split={} k={}",
        args.model, args.data, args.split, args.k
    );
    let images: Vec<(String, Image)> = manifest
        .entries
        .iter()
        .map(|e| Ok((e.id.clone(), manifest.load_image(e)?)))
        .collect::<Result<_>>()?;
    let report =
        visualize_top_patterns(&model.cascade, &images, &model.net, &model.weights, args.k)?;

    std::fs::create_dir_all(&args.out)?;
    let mut hist = String::from("family,dim,count\n");
    for c in &report.histogram {
        hist.push_str(&format!("{},{},{}\n", c.family, c.dim, c.count));
    }
    std::fs::write(args.out.join("histogram.csv"), hist)?;

    let mut index = String::from("rank,image_id,x,y,value,patch\n");
    for (rank, hit) in report.hits.iter().enumerate() {
        let name = format!("patch_{rank:03}.ppm");
        hit.patch.save(&args.out.join(&name))?;
        index.push_str(&format!(
            "{rank},{},{},{},{},{name}\n",
            hit.image_id, hit.center.0, hit.center.1, hit.value
        ));
    }
    std::fs::write(args.out.join("patches.csv"), index)?;
    println!(
        "top dimension {} of {} (selected {} times); wrote {} patches of {}x{} px to {:?}",
        report.top.dim,
        report.top.family,
        report.top.count,
        report.hits.len(),
        report.patch_side,
        report.patch_side,
        args.out
    );
    Ok(())
}
