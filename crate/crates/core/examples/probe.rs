// Scratch probe: desk-scale pipeline timings and error levels.
use pme_lab_core::dataset::build_dataset;
use pme_lab_core::metrics::nmse;
use pme_lab_core::neuralnet::TrainConfig;
use pme_lab_core::nlpme::{train_nlpme, ReconstructionPath, DECODER_DESK, ENCODER_DESK};
use pme_lab_core::dae::{train_dae, DECODER_DESK as DAE_DECODER_DESK, WEIGHT_DECAY};
use pme_lab_core::pme::{fit_pme, PmeWeights};
use pme_lab_core::shapegen::{Generator, GeneratorConfig};
use pme_lab_core::surrogate::train_surrogate;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let s: usize = args.get(1).and_then(|x| x.parse().ok()).unwrap_or(2048);
    let epochs: usize = args.get(2).and_then(|x| x.parse().ok()).unwrap_or(150);
    let n_probe: usize = args.get(3).and_then(|x| x.parse().ok()).unwrap_or(4);

    let cfg = GeneratorConfig::desk_default();
    let gen = Generator::new(cfg).unwrap();
    let t = Instant::now();
    let ds = build_dataset(&gen, s, 1).unwrap();
    println!("dataset: S={} in {:.2}s", ds.s(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let pme = fit_pme(&ds, PmeWeights::identity(ds.n_g())).unwrap();
    println!("pme fit: rank {} in {:.2}s", pme.rank(), t.elapsed().as_secs_f64());
    for n in [2, 4, 5, 6, 7] {
        let a = pme.encode_batch(&ds.d, n).unwrap();
        let eps = nmse(&ds.d, &pme.reconstruct_batch(&a).unwrap()).unwrap();
        println!("  pme N={n}: eps={eps:.5}");
    }

    let t = Instant::now();
    let s_cfg = TrainConfig {
        max_epochs: 320,
        batch_size: 128,
        early_stop_patience: 60,
        plateau_patience: 20,
        seed: 101,
        ..TrainConfig::default()
    };
    let cache = std::path::PathBuf::from(format!("/tmp/probe-surrogate-{}-{}", gen.config().hash(), s));
    let surrogate = if cache.join("manifest.txt").exists() {
        println!("surrogate: loading cache {}", cache.display());
        pme_lab_core::surrogate::SurrogateModel::load(&cache).unwrap()
    } else {
        let m = train_surrogate(&ds, &[64, 256, 512], &s_cfg).unwrap();
        m.save(&cache).unwrap();
        m
    };
    let pred = surrogate.predict_raw(&ds.u).unwrap();
    let eps_surr = nmse(&ds.d, &pred).unwrap();
    println!(
        "surrogate: val_loss={:.3e} dataset NMSE={:.5} epochs={} in {:.1}s",
        surrogate.val_loss,
        eps_surr,
        surrogate.history.records.len(),
        t.elapsed().as_secs_f64()
    );

    let min_improvement: f64 = args.get(4).and_then(|x| x.parse().ok()).unwrap_or(1e-6);
    let plateau: usize = args.get(5).and_then(|x| x.parse().ok()).unwrap_or(15);
    for n in [n_probe, n_probe + 1, n_probe + 2] {
        let e_cfg = TrainConfig {
            max_epochs: epochs,
            batch_size: 128,
            early_stop_patience: 60,
            plateau_patience: plateau,
            min_improvement,
            seed: 301 + n as u64,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let nlpme = train_nlpme(&ds, &surrogate, n, &ENCODER_DESK, &DECODER_DESK, &e_cfg).unwrap();
        let via_s = nlpme.reconstruct(&ds.d, ReconstructionPath::Surrogate).unwrap();
        let eps_s = nmse(&ds.d, &via_s).unwrap();
        let via_g = nlpme.reconstruct(&ds.d, ReconstructionPath::Generator(&gen)).unwrap();
        let eps_g = nmse(&ds.d, &via_g).unwrap();
        println!(
            "nlpme N={n}: eps_S={:.5} eps_G={:.5} epochs={} in {:.1}s",
            eps_s,
            eps_g,
            nlpme.history.records.len(),
            t.elapsed().as_secs_f64()
        );

        let d_cfg = TrainConfig {
            weight_decay: WEIGHT_DECAY,
            seed: 401 + n as u64,
            ..e_cfg.clone()
        };
        let t = Instant::now();
        let dae = train_dae(&ds, n, &ENCODER_DESK, &DAE_DECODER_DESK, &d_cfg).unwrap();
        let eps_dae = nmse(&ds.d, &dae.reconstruct(&ds.d).unwrap()).unwrap();
        println!(
            "dae N={n}: eps={:.5} epochs={} in {:.1}s",
            eps_dae,
            dae.history.records.len(),
            t.elapsed().as_secs_f64()
        );
    }
}
