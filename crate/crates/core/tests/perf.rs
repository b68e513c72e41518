//! Throughput smoke check for the convolution kernels. Run explicitly:
//! `cargo test --release -p cxbench-core --test perf -- --ignored --nocapture`

use cxbench_core::seeds;
use cxbench_core::wirtinger::{ConvCfg, ParamKind, ParamStore, Shape, Tape};
use rand::Rng;
use std::time::Instant;

#[test]
#[ignore]
fn conv_step_throughput() {
    let mut rng = seeds::stream(1, &[seeds::tag("perf")]);
    let (batch, width, t) = (64usize, 32usize, 128usize);
    let mut store = ParamStore::new();
    store
        .push("conv1.weight", ParamKind::ComplexPair, width * 1 * 5 * 2, || {
            rng.random_range(-0.1..0.1)
        })
        .unwrap();
    store.push("conv1.bias", ParamKind::ComplexPair, width * 2, || 0.0).unwrap();
    store
        .push("conv2.weight", ParamKind::ComplexPair, width * width * 5 * 2, || {
            rng.random_range(-0.1..0.1)
        })
        .unwrap();
    store.push("conv2.bias", ParamKind::ComplexPair, width * 2, || 0.0).unwrap();
    store
        .push("head.weight", ParamKind::Real, 64 * 2 * width, || rng.random_range(-0.1..0.1))
        .unwrap();
    store.push("head.bias", ParamKind::Real, 64, || 0.0).unwrap();
    store.push("head.out.weight", ParamKind::Real, 3 * 64, || rng.random_range(-0.1..0.1)).unwrap();
    store.push("head.out.bias", ParamKind::Real, 3, || 0.0).unwrap();

    let x: Vec<f64> = (0..batch * 2 * t).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<u8> = (0..batch).map(|i| (i % 3) as u8).collect();

    let step = |store: &ParamStore| {
        let mut tape = Tape::new();
        let xn = tape.constant(Shape::Seq { b: batch, c: 1, planes: 2, t }, x.clone());
        let w = tape.param(store, 0);
        let b = tape.param(store, 1);
        let cfg = ConvCfg { in_ch: 1, out_ch: width, k: 5, stride: 2, t_in: 0, t_out: 0 };
        let c1 = tape.cconv(xn, w, b, cfg).unwrap();
        let a1 = tape.act(c1, cxbench_core::activations::ActivationId::Crelu, None, false).unwrap();
        let w = tape.param(store, 2);
        let b = tape.param(store, 3);
        let cfg = ConvCfg { in_ch: width, out_ch: width, k: 5, stride: 2, t_in: 0, t_out: 0 };
        let c2 = tape.cconv(a1, w, b, cfg).unwrap();
        let a2 = tape.act(c2, cxbench_core::activations::ActivationId::Crelu, None, false).unwrap();
        let p = tape.gap(a2).unwrap();
        let w = tape.param(store, 4);
        let b = tape.param(store, 5);
        let h = tape.dense(p, w, b).unwrap();
        let r = tape.relu(h).unwrap();
        let w = tape.param(store, 6);
        let b = tape.param(store, 7);
        let o = tape.dense(r, w, b).unwrap();
        tape.sce_mean(o, &labels).unwrap();
        tape
    };

    // Warmup + measure.
    step(&store).backward(&store).unwrap();
    let n = 40;
    let start = Instant::now();
    for _ in 0..n {
        std::hint::black_box(step(&store));
    }
    let dt_fwd = start.elapsed().as_secs_f64() / n as f64;
    let start = Instant::now();
    for _ in 0..n {
        let tape = step(&store);
        std::hint::black_box(tape.backward(&store).unwrap());
    }
    let dt = start.elapsed().as_secs_f64() / n as f64;
    println!("forward-only {:.1} ms, full step {:.1} ms", dt_fwd * 1e3, dt * 1e3);
    // fwd+bwd at width 32, T 128, batch 64: ~0.73 GFLOP per step.
    let t1 = (t - 5) / 2 + 1;
    let t2 = (t1 - 5) / 2 + 1;
    let fwd = batch as f64 * ((width * 5 * t1 + width * width * 5 * t2) as f64 * 8.0);
    let flops = fwd * 3.0;
    println!(
        "step {:.1} ms  ~{:.2} GFLOP/s single-core (fwd+bwd estimate {:.0} MFLOP)",
        dt * 1e3,
        flops / dt / 1e9,
        flops / 1e6
    );
}
