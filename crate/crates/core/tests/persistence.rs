use imh::dataset::{synth_manifold, SynthKind, SynthParams};
use imh::embed::TsneConfig;
use imh::model::Model;
use imh::pipeline::{train, Method, TrainConfig};
use imh::CodeSet;

fn encode_once(dir: &std::path::Path, method: Method, tag: &str) -> (Vec<u8>, Vec<u8>) {
    let data = synth_manifold(SynthKind::GaussianClusters, 500, &SynthParams { dims: 20, ..SynthParams::default() }, 12).unwrap();
    let cfg = TrainConfig {
        method,
        m: 60,
        r: 16,
        seed: 4,
        tsne: TsneConfig {
            iters: 300,
            ..TsneConfig::default()
        },
        ..TrainConfig::default()
    };
    let model_path = dir.join(format!("{tag}.model"));
    train(data.values(), &cfg).unwrap().model.save(&model_path).unwrap();
    let loaded = Model::load(&model_path).unwrap();
    let codes_path = dir.join(format!("{tag}.codes"));
    loaded.hash(&data).unwrap().save(&codes_path).unwrap();
    assert_eq!(CodeSet::load(&codes_path).unwrap(), loaded.hash(&data).unwrap());
    (std::fs::read(&model_path).unwrap(), std::fs::read(&codes_path).unwrap())
}

#[test]
fn train_save_load_encode_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for method in Method::ALL {
        let a = encode_once(dir.path(), method, &format!("{method}-a"));
        let b = encode_once(dir.path(), method, &format!("{method}-b"));
        assert_eq!(a.0, b.0, "{method}: model bytes differ");
        assert_eq!(a.1, b.1, "{method}: code bytes differ");
    }
}

#[test]
fn different_seeds_give_different_models() {
    let data = synth_manifold(SynthKind::GaussianClusters, 300, &SynthParams::default(), 1).unwrap();
    let bytes = |seed| {
        let cfg = TrainConfig {
            method: Method::ImhLe,
            m: 40,
            r: 8,
            seed,
            ..TrainConfig::default()
        };
        train(data.values(), &cfg).unwrap().model.to_bytes()
    };
    assert_ne!(bytes(1), bytes(2));
}
