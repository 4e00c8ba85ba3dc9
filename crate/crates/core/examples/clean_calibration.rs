//! Smallest CLEAN threshold multiplier that stays silent on clean scenes.
//!
//! usage: clean_calibration [scenes]
use vfdm_core::*;

fn main() {
    let scenes: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let g = GridSpec::default();
    let n = g.n;
    let pat = AntennaPattern::gaussian();
    let mut need: f64 = 0.0;
    for seed in 0..scenes {
        let kind = SceneKind::ALL[seed as usize % 3];
        let scene = synth_scene(kind, seed, &g).unwrap();
        let vis = forward_visibility(&modify_bt(&scene, &pat).unwrap());
        let img = inverse_bt(&vis).image.values;
        let mut s: Vec<f64> = (0..n * n).filter(|&p| g.in_support(p / n, p % n)).map(|p| img[p]).collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
        s.sort_by(|a, b| a.total_cmp(b));
        let med = s[s.len() / 2];
        let k = (s[s.len() - 1] - med) / sd;
        need = need.max(k);
    }
    println!("{scenes} scenes: threshold must exceed {need:.2} (default {})", baselines::CleanConfig::default().threshold);
}
