use std::fs;

use proptest::prelude::*;
use vfdm_core::dataset::{generate_dataset, generate_pair, split, Dataset, DatasetConfig, SplitRule};
use vfdm_core::*;

fn small_cfg(pairs: usize, seed: u64) -> DatasetConfig {
    DatasetConfig {
        pairs,
        seed,
        shard_size: 7,
        ..DatasetConfig::default()
    }
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn generation_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_cfg(20, 5);
    generate_dataset(&cfg, a.path()).unwrap();
    generate_dataset(&cfg, b.path()).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    let c = tempfile::tempdir().unwrap();
    generate_dataset(&small_cfg(20, 6), c.path()).unwrap();
    assert_ne!(dir_bytes(a.path()), dir_bytes(c.path()));
}

#[test]
fn stored_pairs_match_regeneration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(30, 11);
    let m = generate_dataset(&cfg, dir.path()).unwrap();
    assert_eq!(m.shards.len(), 5);
    assert_eq!(m.mode_counts.values().sum::<u64>(), 30);
    let ds = Dataset::open(dir.path()).unwrap();
    let ids: Vec<u64> = (0..30).collect();
    let stored = ds.read_all(&ids).unwrap();
    for p in &stored {
        let again = generate_pair(&cfg, p.id).unwrap();
        assert_eq!(p, &again, "pair {}", p.id);
        assert_eq!(p.clean.role, VisRole::Clean);
        assert_eq!(p.dirty.role, VisRole::Dirty);
    }
    // random-order access goes through the same reader
    let back: Vec<u64> = ds.read_pairs(&[29, 0, 14, 7]).map(|p| p.unwrap().id).collect();
    assert_eq!(back, vec![29, 0, 14, 7]);
}

#[test]
fn scale_is_the_percentile_of_clean_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(12, 2);
    let m = generate_dataset(&cfg, dir.path()).unwrap();
    let mut mags: Vec<f64> = (0..12)
        .flat_map(|id| generate_pair(&cfg, id).unwrap().clean.values)
        .flat_map(|c| [c.re.abs(), c.im.abs()])
        .collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    let want = mags[(0.995 * (mags.len() - 1) as f64).round() as usize];
    assert_eq!(m.scale, want);
}

#[test]
fn corruption_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&small_cfg(10, 3), dir.path()).unwrap();
    let shard = dir.path().join(&m.shards[0].file);
    let mut bytes = fs::read(&shard).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    fs::write(&shard, &bytes).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let ids: Vec<u64> = (0..7).collect();
    let err = ds.read_all(&ids).unwrap_err();
    assert!(matches!(err, VfdmError::Integrity { .. }), "{err}");
    // pairs in the untouched shard still read
    assert!(ds.read_all(&[7, 8, 9]).is_ok());

    // truncation
    fs::write(&shard, &bytes[..bytes.len() - 10]).unwrap();
    assert!(matches!(ds.read_all(&[6]).unwrap_err(), VfdmError::Integrity { .. }));
    // bad magic
    bytes[0] = b'X';
    fs::write(&shard, &bytes).unwrap();
    assert!(matches!(ds.read_all(&[0]).unwrap_err(), VfdmError::Integrity { .. }));
}

#[test]
fn missing_manifest_means_no_dataset() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small_cfg(5, 1), dir.path()).unwrap();
    fs::remove_file(dir.path().join("manifest.json")).unwrap();
    assert!(Dataset::open(dir.path()).is_err());
}

#[test]
fn split_is_a_deterministic_partition() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&small_cfg(40, 9), dir.path()).unwrap();
    let s = m.split.clone().unwrap();
    assert_eq!(s.test.len(), 4);
    let mut all: Vec<u64> = s.train.iter().chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..40).collect::<Vec<_>>());
    let again = split(&m, SplitRule::default()).unwrap();
    assert_eq!(again.split.unwrap(), s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_counts_partition(n in 1usize..20_000, f in 0.01f64..0.99) {
        for rule in [SplitRule::TestFraction(f), SplitRule::TrainRatio(f)] {
            let (train, test) = rule.counts(n);
            prop_assert_eq!(train + test, n);
        }
    }
}
