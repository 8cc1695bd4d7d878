use std::collections::BTreeMap;
use std::io::Cursor;

use layerprobe::dump::{Condition, ConditionKind, SampleMeta, Split};
use layerprobe::rng::{seeded, Gaussian};
use layerprobe::variants::{anchor_condition, builtin_specs};
use layerprobe::{
    apply_variant, evaluate_condition, parse_dump, write_dump, DumpHeader, LinearProbe,
};
use ndarray::{Array1, Array2};
use rand::Rng;

const LAYERS: u32 = 3;
const DIM: usize = 2;
const SAMPLES: usize = 20;

fn toy_dump() -> (DumpHeader, BTreeMap<(u32, u32), Array2<f32>>) {
    let mut rng = seeded(7);
    let mut gauss = Gaussian::new();
    let anchor = anchor_condition(0);
    let lexical: Condition = apply_variant(&anchor, &builtin_specs()[0], 1).unwrap();
    let samples: Vec<SampleMeta> = (0..SAMPLES)
        .map(|i| SampleMeta {
            sample_id: format!("s{i:02}"),
            class_index: i % 2,
            split: if i < 6 { Split::Train } else { Split::Test },
            compliance: [(0, rng.random_bool(0.8)), (1, rng.random_bool(0.7))]
                .into_iter()
                .collect(),
        })
        .collect();
    let header = DumpHeader::new(
        "toy",
        LAYERS,
        DIM as u32,
        vec!["cat".into(), "plane".into()],
        vec![anchor, lexical],
        samples,
    );
    let tensors = header
        .blocks
        .iter()
        .map(|b| {
            let x = Array2::from_shape_fn((SAMPLES, DIM), |_| gauss.sample(&mut rng) as f32);
            (b.key(), x)
        })
        .collect();
    (header, tensors)
}

fn toy_probes() -> Vec<LinearProbe> {
    (1..=LAYERS)
        .map(|layer| {
            let mut p = LinearProbe::zeros(layer, 2, DIM);
            let s = layer as f64;
            p.weights = Array2::from_shape_vec((2, DIM), vec![s, -0.5, -s, 0.5]).unwrap();
            p.bias = Array1::from_vec(vec![0.1 * s, 0.0]);
            p
        })
        .collect()
}

#[test]
fn accuracy_matches_a_brute_force_recount() {
    let (header, tensors) = toy_dump();
    let mut bytes = Vec::new();
    let header = write_dump(&mut bytes, &header, &tensors).unwrap();
    let dump = parse_dump(Cursor::new(bytes)).unwrap();
    let probes = toy_probes();

    for cond in [0u32, 1] {
        let curve = evaluate_condition(&probes, &dump, cond).unwrap();
        let included: Vec<usize> = (0..SAMPLES)
            .filter(|&i| {
                let s = &header.samples[i];
                s.split == Split::Test && s.compliance[&0] && s.compliance[&cond]
            })
            .collect();
        assert!(!included.is_empty());
        assert_eq!(curve.included_count, included.len());
        assert_eq!(curve.excluded_count, SAMPLES - 6 - included.len());
        assert_eq!(curve.kind, header.condition(cond).unwrap().kind);
        for layer in 1..=LAYERS {
            let p = &probes[layer as usize - 1];
            let x = &tensors[&(cond, layer)];
            let correct = included
                .iter()
                .filter(|&&i| {
                    let score = |k: usize| {
                        p.bias[k]
                            + (0..DIM)
                                .map(|j| p.weights[[k, j]] * x[[i, j]] as f64)
                                .sum::<f64>()
                    };
                    let pred = if score(1) > score(0) { 1 } else { 0 };
                    pred == header.samples[i].class_index
                })
                .count();
            let expected = correct as f64 / included.len() as f64;
            assert_eq!(
                curve.accuracy[layer as usize - 1],
                expected,
                "cond {cond} layer {layer}"
            );
        }
    }
    assert_eq!(header.condition(1).unwrap().kind, ConditionKind::Lexical);
}
