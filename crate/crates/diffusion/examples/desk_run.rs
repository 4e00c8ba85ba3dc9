//! Desk-scale training run with periodic held-out evaluation.
//!
//! Usage: desk_run <work dir> [steps] [eval every] [eval pairs]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use vfdm_core::dataset::{generate_dataset, Dataset, DatasetConfig};
use vfdm_core::{demodify_bt, inverse_bt, AntennaPattern, GridSpec, VisibilityGrid};
use vfdm_diffusion::{mitigate, train_step, ScheduleConfig, TrainConfig, TrainSet};
use vfdm_nn::checkpoint::{self, CheckpointMeta};
use vfdm_nn::{Adam, Precision, UNet, UNetConfig};

fn image(v: &VisibilityGrid, p: &AntennaPattern) -> Vec<f64> {
    demodify_bt(&inverse_bt(v).image, p).unwrap().scene.values
}

fn rmse(a: &[f64], b: &[f64], g: &GridSpec) -> f64 {
    let n = g.n;
    let (mut s, mut c) = (0.0, 0);
    for k in 0..n {
        for l in 0..n {
            let (x, y) = (g.xi(k), g.xi(l));
            if x * x + y * y <= 0.49 {
                s += (a[k * n + l] - b[k * n + l]).powi(2);
                c += 1;
            }
        }
    }
    (s / c as f64).sqrt()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = PathBuf::from(&args[1]);
    let steps: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20_000);
    let every: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let n_eval: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(60);

    let data_dir = dir.join("data");
    if !data_dir.join("manifest.json").exists() {
        let t0 = Instant::now();
        generate_dataset(&DatasetConfig::default(), &data_dir).unwrap();
        eprintln!("generated in {:.1} s", t0.elapsed().as_secs_f64());
    }
    let ds = Dataset::open(&data_dir).unwrap();
    let scale = ds.manifest.scale;
    let pattern = ds.manifest.pattern;
    let grid = ds.manifest.grid;
    eprintln!("scale {scale:.3}, train {}, test {}", ds.train_ids().len(), ds.test_ids().len());
    let train = ds.read_all(ds.train_ids()).unwrap();
    let set = TrainSet::<f32>::from_pairs(&train, scale).unwrap();
    drop(train);
    let test = ds.read_all(&ds.test_ids()[..n_eval.min(ds.test_ids().len())]).unwrap();

    let sched = ScheduleConfig::default().build().unwrap();
    let cfg = TrainConfig {
        steps,
        ..TrainConfig::default()
    };
    let mut net = UNet::<f32>::new(UNetConfig::default(), 0).unwrap();
    let mut adam = Adam::new(&net.params);
    let t0 = Instant::now();
    let mut acc = 0.0;
    for step in 0..steps {
        let (loss, lr) = train_step(&mut net, &mut adam, &set, &sched, &cfg, step).unwrap();
        acc += loss;
        if step % 100 == 99 || step == 0 {
            let k = if step == 0 { 1.0 } else { 100.0 };
            println!("step {} loss {:.5} lr {:.2e} t {:.0}s", step + 1, acc / k, lr, t0.elapsed().as_secs_f64());
            acc = 0.0;
        }
        if (step + 1) % every == 0 || step + 1 == steps {
            let meta = CheckpointMeta {
                unet: net.config.clone(),
                dtype: Precision::F32,
                step: step + 1,
                grid_n: grid.n,
                scale,
                schedule: serde_json::to_value(ScheduleConfig::default()).unwrap(),
                training: serde_json::to_value(&cfg).unwrap(),
            };
            checkpoint::save(&dir.join(format!("ckpt_{:06}.bin", step + 1)), &meta, &net, &adam).unwrap();
            let dirty: Vec<&VisibilityGrid> = test.iter().map(|p| &p.dirty).collect();
            let seeds: Vec<u64> = test.iter().map(|p| p.id).collect();
            let est = mitigate(&dirty, &net, &sched, 0.0, &seeds, scale).unwrap();
            let mut wins: BTreeMap<String, (usize, usize, f64, f64)> = BTreeMap::new();
            let mut total = 0;
            for (p, e) in test.iter().zip(&est) {
                let c = image(&p.clean, &pattern);
                let rd = rmse(&image(&p.dirty, &pattern), &c, &grid);
                let re = rmse(&image(e, &pattern), &c, &grid);
                let w = wins.entry(p.mode.to_string()).or_default();
                w.1 += 1;
                w.2 += rd;
                w.3 += re;
                if re < rd {
                    w.0 += 1;
                    total += 1;
                }
            }
            println!("eval step {}: win {}/{}", step + 1, total, test.len());
            for (m, (w, c, rd, re)) in wins {
                println!("  {m:12} win {w}/{c} dirty {:.2} est {:.2}", rd / c as f64, re / c as f64);
            }
        }
    }
}
