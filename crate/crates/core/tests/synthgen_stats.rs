//! Statistical checks of the block generator.

use edge_entropy::metrics::{edge_entropy, row_entropy};
use edge_entropy::synthgen::{equal_class_sizes, generate, verify_realization, GeneratorConfig, Preset};

/// Expected number of non-self-loop edges and its binomial variance, summed
/// over the ordered node pairs of the realized labels.
fn pair_moments(labels: &[usize], p: &[Vec<f64>], rho: f64) -> (f64, f64) {
    let mut per_class = vec![0usize; p.len()];
    for &l in labels {
        per_class[l] += 1;
    }
    let (mut mean, mut var) = (0.0, 0.0);
    for (l, &nl) in per_class.iter().enumerate() {
        for (m, &nm) in per_class.iter().enumerate() {
            let pairs = (nl * if l == m { nm - 1 } else { nm }) as f64;
            let q = rho * p[l][m];
            mean += pairs * q;
            var += pairs * q * (1.0 - q);
        }
    }
    (mean, var)
}

#[test]
fn edge_count_within_four_sigma() {
    for (preset, seed) in [(Preset::DenseLow, 1), (Preset::SparseLow, 2), (Preset::DenseHigh, 3), (Preset::SparseHigh, 4)] {
        let cfg = preset.config(400, seed);
        let g = generate(&cfg).unwrap();
        let (mean, var) = pair_moments(g.labels(), &cfg.target_p, cfg.sparsity);
        assert!((cfg.expected_edges() - mean).abs() < 1e-6);
        let proper = g.proper_edges().count() as f64;
        assert!((proper - mean).abs() <= 4.0 * var.sqrt(), "{preset}: {proper} vs {mean} ± {}", var.sqrt());
        assert_eq!(g.num_self_loops(), g.num_nodes());
    }
}

#[test]
fn realized_entropy_converges_with_size() {
    let cfg = |n| GeneratorConfig::new(equal_class_sizes(n, 3), Preset::SparseLow.target_p(), 0.1, 11);
    let target = cfg(300).target_entropy();
    let errs: Vec<f64> = [150usize, 600, 2400]
        .iter()
        .map(|&n| (edge_entropy(&generate(&cfg(n)).unwrap()).edge_entropy - target).abs())
        .collect();
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 0.005, "{errs:?}");
}

#[test]
fn target_entropy_matches_row_formula() {
    let cfg = Preset::DenseLow.config(3, 0);
    let manual: f64 = cfg.target_p.iter().map(|r| row_entropy(r)).sum::<f64>() / 3.0;
    assert!((cfg.target_entropy() - manual).abs() < 1e-12);
}

#[test]
fn presets_at_moderate_size() {
    for preset in Preset::ALL {
        let cfg = preset.config(1500, 42);
        let g = generate(&cfg).unwrap();
        let report = verify_realization(&g, &cfg, 0.01).unwrap();
        assert!(report.within_tolerance, "{preset}: {report:?}");
        assert!(report.max_deviation.unwrap() < 0.02, "{preset}: {report:?}");
        assert_eq!(report.weak_components, 1);
    }
}

#[test]
fn same_seed_same_graph() {
    let cfg = Preset::SparseHigh.config(300, 9);
    assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    let other = Preset::SparseHigh.config(300, 10);
    assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
}
