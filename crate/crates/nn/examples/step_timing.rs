use std::time::Instant;

use vfdm_nn::{Adam, UNet, UNetConfig};

fn main() {
    let batch: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let mut net = UNet::<f32>::new(UNetConfig::default(), 0).unwrap();
    let mut opt = Adam::new(&net.params);
    let x = vec![0.1f32; batch * 4 * 32 * 32];
    let target = vec![0.2f32; batch * 2 * 32 * 32];
    let t: Vec<f64> = (0..batch).map(|i| i as f64).collect();
    println!("params: {}", net.param_count());
    let reps = 5;
    let start = Instant::now();
    for _ in 0..reps {
        let (_, g) = net.loss_and_grad(&x, batch, 32, &t, &target).unwrap();
        opt.update(&mut net.params, &g, 1e-4).unwrap();
    }
    println!("train step: {:.3} s", start.elapsed().as_secs_f64() / reps as f64);
    let start = Instant::now();
    for _ in 0..reps {
        net.forward(&x[..4 * 1024], 1, 32, &t[..1]).unwrap();
    }
    println!("forward (1 sample): {:.4} s", start.elapsed().as_secs_f64() / reps as f64);
}
