use volpoint::datagen::*;
use volpoint::model::*;
use volpoint::volume::PhantomKind;

fn gen(kind: PhantomKind, n: usize, seed: u64) -> (DatasetManifest, std::path::PathBuf) {
    let entries = vec![DatasetEntry {
        volume: VolumeSpec::Phantom { kind, dims: (24, 24, 24), seed: 1 },
        tf: TfSpec::Designed { kind },
        category: kind.name().into(),
    }];
    let mut cfg = GenerationConfig::desk_scale(entries, seed);
    cfg.images_per_tf = n;
    cfg.image_size = (32, 32);
    cfg.tf_variants = 8;
    let dir = std::env::temp_dir().join(format!("vp-cat2-{}-{seed}", kind.name()));
    let _ = std::fs::remove_dir_all(&dir);
    let m = generate_dataset(&cfg, &dir).unwrap();
    (m, dir)
}

#[test]
fn probe() {
    let n = 300;
    let (ma, da) = gen(PhantomKind::AsymmetricBlobs, n, 21);
    let (mb, db) = gen(PhantomKind::LBlock, n, 22);
    let (tra, tea) = split_manifest(&ma, 0.2, 5, SplitMode::Random).unwrap();
    let (trb, teb) = split_manifest(&mb, 0.2, 5, SplitMode::Random).unwrap();
    let train_parts = vec![("a".to_string(), &tra, da.as_path()), ("b".to_string(), &trb, db.as_path())];
    let test_parts = vec![("a".to_string(), &tea, da.as_path()), ("b".to_string(), &teb, db.as_path())];
    let (train_set, _) = category_training_set(&train_parts).unwrap();
    let (test_set, _) = category_training_set(&test_parts).unwrap();
    let spec = NetworkSpec::desk_scale((32, 32), 2);
    let targets = class_targets(&LossKind::Softmax, 2, None).unwrap();
    for (lr, ep, b) in [(0.01, 20, 16), (0.02, 20, 16), (0.01, 30, 8)] {
        let mut cfg = TrainConfig::new(LossKind::Softmax, ep, 3);
        cfg.learning_rate = lr;
        cfg.batch_size = b;
        let (params, log) = train(&train_set, &targets, &spec, &cfg, Some(&test_set)).unwrap();
        let tr = accuracy(&params, &train_set).unwrap();
        let accs: Vec<String> = log.epochs.iter().map(|e| format!("{:.2}", e.heldout_accuracy.unwrap())).collect();
        println!("lr={lr} ep={ep} b={b}: train={tr:.3} heldout={}", accs.join(","));
    }
    let _ = std::fs::remove_dir_all(da);
    let _ = std::fs::remove_dir_all(db);
    panic!("scratch");
}
