use std::collections::BTreeMap;

use diffvp::dsl::count_visual_steps;
use diffvp::world::{
    dataset, gen_dataset, intermediate_truth, Activity, Category, Color, GenConfig, Material, Scene, TemplateId,
    MAX_PER_CATEGORY,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn within(label: &str, counts: &[usize], tolerance: f64) {
    let total: usize = counts.iter().sum();
    let uniform = total as f64 / counts.len() as f64;
    for (i, &c) in counts.iter().enumerate() {
        let dev = (c as f64 - uniform).abs() / uniform;
        assert!(dev <= tolerance, "{label} value {i}: {c} vs uniform {uniform:.0}");
    }
}

#[test]
fn attribute_values_are_near_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cat, mut col, mut mat, mut act) = ([0; 8], [0; 6], [0; 4], [0; 4]);
    for _ in 0..10_000 {
        let s = Scene::random(&mut rng, 4, 4);
        s.validate().unwrap();
        for o in &s.objects {
            cat[o.category.index()] += 1;
            col[o.color.index()] += 1;
            mat[o.material.index()] += 1;
            act[o.activity.index()] += 1;
        }
        for c in Category::ALL {
            assert!(s.count(*c) <= MAX_PER_CATEGORY);
        }
    }
    assert_eq!((cat.len(), col.len()), (Category::ALL.len(), Color::ALL.len()));
    assert_eq!((mat.len(), act.len()), (Material::ALL.len(), Activity::ALL.len()));
    within("category", &cat, 0.3);
    within("color", &col, 0.3);
    within("material", &mat, 0.3);
    within("activity", &act, 0.3);
}

#[test]
fn binary_templates_are_label_balanced() {
    let data = gen_dataset(&GenConfig::default().with_total(2000)).unwrap();
    assert_eq!(data.len(), 2000);
    let mut per: BTreeMap<TemplateId, (usize, usize)> = BTreeMap::new();
    for case in &data {
        let t = case.meta.template_id;
        if let Some((positive, _)) = t.binary_labels() {
            let e = per.entry(t).or_default();
            e.0 += (case.label == positive) as usize;
            e.1 += 1;
        }
    }
    assert!(!per.is_empty());
    for (t, (pos, n)) in per {
        let share = pos as f64 / n as f64;
        assert!((0.45..=0.55).contains(&share), "{}: {pos}/{n}", t.as_str());
    }
}

#[test]
fn stage_metadata_matches_programs() {
    let data = gen_dataset(&GenConfig::default().with_total(200)).unwrap();
    for case in &data {
        let p = case.program().unwrap();
        assert_eq!(count_visual_steps(&p), case.meta.num_visual_steps);
        assert_eq!(case.meta.stage, case.meta.num_visual_steps.min(4));
        assert!(case.meta.num_visual_steps <= 4);
        intermediate_truth(case).unwrap();
    }
    let mut ids: Vec<&str> = data.iter().map(|c| c.id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids.len(), data.len());
}

#[test]
fn long_cases_exceed_four_steps() {
    let config = GenConfig {
        stage_counts: [0; 4],
        long_cases: 30,
        ..GenConfig::default()
    };
    let data = gen_dataset(&config).unwrap();
    assert_eq!(data.len(), 30);
    assert!(data.iter().all(|c| c.meta.num_visual_steps > 4));
}

#[test]
fn datasets_roundtrip_through_files() {
    let data = gen_dataset(&GenConfig::default().with_total(50)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cases.jsonl");
    dataset::save(&path, &data).unwrap();
    assert_eq!(dataset::load(&path).unwrap(), data);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 50);
}

#[test]
fn same_seed_same_corpus() {
    let c = GenConfig {
        seed: 77,
        ..GenConfig::default()
    }
    .with_total(120);
    assert_eq!(gen_dataset(&c).unwrap(), gen_dataset(&c).unwrap());
    let other = GenConfig { seed: 78, ..c.clone() };
    assert_ne!(gen_dataset(&c).unwrap(), gen_dataset(&other).unwrap());
}
