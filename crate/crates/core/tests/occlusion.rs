//! Receptive-field locality, checked against the live forward pass: pixels
//! outside a cell's computed box never influence it, the box center almost
//! always does.

use dnp_core::cnn::{forward_to_layer, init_weights};
use dnp_core::geometry::{self, NetSpec};
use dnp_core::rng::Rng;
use dnp_core::tensor::Tensor;

fn random_input(rng: &mut Rng, channels: usize, size: usize) -> Tensor {
    Tensor::from_vec(
        channels,
        size,
        size,
        (0..channels * size * size)
            .map(|_| rng.range_f64(-0.5, 0.5) as f32)
            .collect(),
    )
}

fn cell_vector(
    net: &NetSpec,
    w: &dnp_core::cnn::WeightSet,
    input: &Tensor,
    layer: usize,
    u: usize,
    v: usize,
) -> Vec<u32> {
    let maps = forward_to_layer(net, w, input, layer).unwrap();
    (0..maps.channels)
        .map(|c| maps.at(c, v, u).to_bits())
        .collect()
}

fn perturbed(input: &Tensor, x: usize, y: usize) -> Tensor {
    let mut t = input.clone();
    for c in 0..t.channels {
        let old = t.at(c, y, x);
        t.set(c, y, x, old + 8.0);
    }
    t
}

#[test]
fn pixels_outside_rf_box_never_change_a_cell() {
    let net = NetSpec::tiny();
    let weights = init_weights(&net, 1234);
    let mut rng = Rng::new(5150);
    let size = net.input_size as usize;
    let input = random_input(&mut rng, 3, size);

    for _case in 0..20 {
        let layer = rng.range_u64(1, net.num_active() as u64) as usize;
        let extent = net.active_extent(layer).unwrap();
        let u = rng.below(extent as u64) as u32;
        let v = rng.below(extent as u64) as u32;
        let (sx, sy) = geometry::rf_box(&net, layer, u, v).unwrap();
        let baseline = cell_vector(&net, &weights, &input, layer, u as usize, v as usize);

        let mut tried = 0;
        while tried < 8 {
            let x = rng.below(size as u64) as i64;
            let y = rng.below(size as u64) as i64;
            let inside = x >= sx.lo && x <= sx.hi && y >= sy.lo && y <= sy.hi;
            if inside {
                continue;
            }
            tried += 1;
            let t = perturbed(&input, x as usize, y as usize);
            let got = cell_vector(&net, &weights, &t, layer, u as usize, v as usize);
            assert_eq!(
                baseline, got,
                "layer {layer} cell ({u},{v}) pixel ({x},{y})"
            );
        }
    }
}

#[test]
fn rf_center_perturbation_changes_the_cell() {
    let net = NetSpec::tiny();
    let weights = init_weights(&net, 77);
    let mut rng = Rng::new(31337);
    let size = net.input_size as usize;

    let mut changed = 0;
    let total = 30;
    for case in 0..total {
        let input = random_input(&mut rng.fork(case), 3, size);
        let layer = rng.range_u64(1, net.num_active() as u64) as usize;
        let extent = net.active_extent(layer).unwrap();
        let u = rng.below(extent as u64) as u32;
        let v = rng.below(extent as u64) as u32;
        let (sx, sy) = geometry::rf_box(&net, layer, u, v).unwrap();
        let cx = ((sx.lo + sx.hi) / 2).clamp(0, size as i64 - 1);
        let cy = ((sy.lo + sy.hi) / 2).clamp(0, size as i64 - 1);
        let baseline = cell_vector(&net, &weights, &input, layer, u as usize, v as usize);
        let t = perturbed(&input, cx as usize, cy as usize);
        let got = cell_vector(&net, &weights, &t, layer, u as usize, v as usize);
        if got != baseline {
            changed += 1;
        }
    }
    assert!(changed >= total - 1, "only {changed}/{total} cells changed");
}
