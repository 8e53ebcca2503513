use aggnet::data::*;
use aggnet::model::*;
use aggnet::train::*;
use std::time::Instant;
fn main() {
    let specs = vec![
        ClassSpec::new("fine", [1.0, 0.0, 0.0, 0.0]).unwrap(),
        ClassSpec::new("mixed", [0.25, 0.25, 0.25, 0.25]).unwrap(),
        ClassSpec::new("coarse", [0.0, 0.0, 0.0, 1.0]).unwrap(),
    ];
    let t = Instant::now();
    let (classes, train_set) = synth_dataset(&specs, 30, &SynthParams::default(), 1).unwrap();
    let (_, val) = synth_dataset(&specs, 6, &SynthParams::default(), 2).unwrap();
    let (_, test) = synth_dataset(&specs, 15, &SynthParams::default(), 3).unwrap();
    println!("synth {:?}", t.elapsed());
    let depths: Vec<(usize, [usize; 4])> = vec![(8, [8, 16, 16, 16])];
    for (s, m) in depths {
        let model = AggNetConfig::new(Variant::Ms, 3).with_depths(s, m);
        let cfg = TrainConfig {
            max_epochs: 80,
            augment: std::env::args().nth(1).is_some(),
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let out = train_with(&model, &classes, &train_set, &val, &cfg, |r| println!("{r:?}")).unwrap();
        println!("{s} {m:?} 3 epochs {:?}", t.elapsed());
        let cm = confusion_on(&out.checkpoint, &test).unwrap();
        println!("oa {}", cm.overall_accuracy().unwrap());
    }
}
