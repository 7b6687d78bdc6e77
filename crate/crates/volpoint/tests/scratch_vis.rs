use volpoint::datagen::*;
use volpoint::imgio;
use volpoint::volume::PhantomKind;

#[test]
fn probe() {
    for kind in [PhantomKind::AsymmetricBlobs, PhantomKind::LBlock] {
        let entries = vec![DatasetEntry {
            volume: VolumeSpec::Phantom { kind, dims: (24, 24, 24), seed: 1 },
            tf: TfSpec::Designed { kind },
            category: kind.name().into(),
        }];
        let mut cfg = GenerationConfig::desk_scale(entries, 77);
        cfg.images_per_tf = 12;
        cfg.image_size = (32, 32);
        let dir = std::env::temp_dir().join(format!("vp-vis-{}", kind.name()));
        let _ = std::fs::remove_dir_all(&dir);
        let m = generate_dataset(&cfg, &dir).unwrap();
        for s in m.samples.iter().take(12) {
            let img = imgio::read_image(&dir.join(&s.image_path)).unwrap();
            let bg = [(s.background[0]*255.0).round() as u8, (s.background[1]*255.0).round() as u8, (s.background[2]*255.0).round() as u8];
            let n = img.width()*img.height();
            let mut fg = 0usize;
            for i in 0..n {
                let px = [img.pixels()[3*i], img.pixels()[3*i+1], img.pixels()[3*i+2]];
                let diff: i32 = (0..3).map(|c| (px[c] as i32 - bg[c] as i32).abs()).sum();
                if diff > 15 { fg += 1; }
            }
            println!("{} {}: fg={:.2} mode={:?} proj={:?} scale={:.2}", kind.name(), s.image_path, fg as f64/n as f64, s.lighting.mode, s.camera.projection, s.camera.scale);
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
    panic!("scratch");
}
