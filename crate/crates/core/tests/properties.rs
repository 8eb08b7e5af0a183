use proptest::prelude::*;

use swarm_symreg::datasets::{read_dataset, write_dataset, NormalizationRecord};
use swarm_symreg::exprtree::{complexity, parse, serialize, structural_equal, CostTable, ExprNode, OpKind};
use swarm_symreg::mme::variation::{random_tree, TreeSpace};
use swarm_symreg::mme::{compute_mse, fitness_value, micro_evolve, Individual, MicroConfig, RegressionDataset};
use swarm_symreg::rng::stream;
use swarm_symreg::surrogate::{aggregate_node, Aggregation};
use swarm_symreg::swarmsim::torus_displacement;

fn tree(seed: u64, ops: &[OpKind], depth: usize) -> (ExprNode, Vec<f64>) {
    let space = TreeSpace { n_features: 2, operators: ops.to_vec(), max_nodes: 40 };
    random_tree(&mut stream(seed, &[]), &space, depth, false)
}

fn all_ops() -> Vec<OpKind> {
    vec![OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Pow, OpKind::Neg]
}

fn small_dataset(seed: u64) -> RegressionDataset {
    use rand::Rng;
    let mut rng = stream(seed, &[1]);
    let x0: Vec<f64> = (0..40).map(|_| rng.random_range(0.5..2.0)).collect();
    let x1: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 1.5 * a - 0.7 * b * b + 0.2).collect();
    RegressionDataset::new(vec!["a".into(), "b".into()], vec![x0, x1], vec!["y".into()], vec![y]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn structural_equality_is_an_equivalence(a in 0u64..400, b in 0u64..400, c in 0u64..400) {
        let ops = [OpKind::Add, OpKind::Mul];
        let (ta, _) = tree(a, &ops, 2);
        let (tb, _) = tree(b, &ops, 2);
        let (tc, _) = tree(c, &ops, 2);
        prop_assert!(structural_equal(&ta, &ta));
        prop_assert_eq!(structural_equal(&ta, &tb), structural_equal(&tb, &ta));
        if structural_equal(&ta, &tb) && structural_equal(&tb, &tc) {
            prop_assert!(structural_equal(&ta, &tc));
        }
    }

    #[test]
    fn text_round_trip_is_exact(seed in any::<u64>()) {
        let (e, p) = tree(seed, &all_ops(), 4);
        let text = serialize(&e, &p).unwrap();
        let (back, bp) = parse(&text).unwrap();
        prop_assert!(structural_equal(&e, &back), "{}", text);
        prop_assert_eq!(bp.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(serialize(&back, &bp).unwrap(), text);
    }

    #[test]
    fn changing_parameters_keeps_structure_and_complexity(seed in any::<u64>(), scale in -3.0f64..3.0) {
        let (e, p) = tree(seed, &all_ops(), 4);
        let moved: Vec<f64> = p.iter().map(|v| v * scale + 0.25).collect();
        let ind = Individual::new(e.clone(), moved, &CostTable::default()).unwrap();
        prop_assert!(structural_equal(ind.expr(), &e));
        prop_assert_eq!(ind.complexity(), complexity(&e, &CostTable::default()));
    }

    #[test]
    fn micro_evolution_never_hurts(seed in any::<u64>()) {
        let data = small_dataset(seed);
        let (e, p) = tree(seed, &[OpKind::Add, OpKind::Sub, OpKind::Mul], 3);
        let ind = Individual::new(e.clone(), p.clone(), &CostTable::default()).unwrap();
        let before = compute_mse(&e, &p, &data);
        let cfg = MicroConfig { micro_population: 8, micro_generations: 4, polish_iterations: 5, ..MicroConfig::default() };
        let tuned = micro_evolve(&ind, &data, &cfg, &mut stream(seed, &[2]));
        prop_assert!(structural_equal(tuned.expr(), &e));
        let after = compute_mse(tuned.expr(), tuned.params(), &data);
        if let Ok(b) = before {
            prop_assert!(after.unwrap() <= b);
        }
    }

    #[test]
    fn fitness_is_monotone(c in 0u32..40, dc in 0u32..10, m in 0.0f64..10.0, dm in 0.0f64..10.0, rho in 0.0f64..=1.0) {
        let worst = 25.0;
        let f = |c, m| fitness_value(c, Ok(m), worst, rho, 12).unwrap();
        prop_assert!(f(c, m) <= f(c, m + dm));
        prop_assert!(f(c, m) <= f(c + dc, m));
    }

    #[test]
    fn sum_aggregation_is_additive_and_order_free(
        msgs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 0..20),
        others in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 0..20),
        rot in 0usize..20,
    ) {
        let a: Vec<[f64; 2]> = msgs.iter().map(|&(x, y)| [x, y]).collect();
        let b: Vec<[f64; 2]> = others.iter().map(|&(x, y)| [x, y]).collect();
        let mut ab = a.clone();
        ab.extend(&b);
        let (sa, sb, sab) = (aggregate_node(&a, Aggregation::Sum), aggregate_node(&b, Aggregation::Sum), aggregate_node(&ab, Aggregation::Sum));
        for k in 0..2 {
            prop_assert!((sab[k] - (sa[k] + sb[k])).abs() <= 1e-9 * (1.0 + sab[k].abs()));
        }
        let mut shuffled = ab.clone();
        if !shuffled.is_empty() {
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
        }
        let s2 = aggregate_node(&shuffled, Aggregation::Sum);
        for k in 0..2 {
            prop_assert!((s2[k] - sab[k]).abs() <= 1e-9 * (1.0 + sab[k].abs()));
        }
    }

    #[test]
    fn normalization_round_trips(col in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
        prop_assume!(col.iter().any(|&v| v != col[0]));
        let rec = NormalizationRecord::fit("hex", vec![], &["c".into()], &[&col]).unwrap();
        for &v in &col {
            let u = rec.normalize_value(0, v);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&u));
            prop_assert!((rec.denormalize_value(0, u) - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
        prop_assert_eq!(NormalizationRecord::from_text(&rec.to_text(), "n").unwrap(), rec);
    }

    #[test]
    fn dataset_file_round_trips(rows in proptest::collection::vec((any::<f64>(), -1e300f64..1e300), 1..30)) {
        prop_assume!(rows.iter().all(|r| r.0.is_finite()));
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let d = RegressionDataset::new(vec!["r".into()], vec![x], vec!["force".into()], vec![y]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d, "hex", &[]).unwrap();
        let (back, _) = read_dataset(buf.as_slice(), "d").unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn torus_displacement_is_minimal(ax in 0.0f64..1.0, ay in 0.0f64..1.0, bx in 0.0f64..1.0, by in 0.0f64..1.0) {
        let d = torus_displacement([ax, ay], [bx, by]);
        for k in 0..2 {
            prop_assert!((-0.5..0.5).contains(&d[k]));
        }
        let back = torus_displacement([bx, by], [ax, ay]);
        for k in 0..2 {
            // antisymmetric except exactly at the half-box boundary
            prop_assert!((d[k] + back[k]).abs() < 1e-12 || (d[k].abs() - 0.5).abs() < 1e-12);
        }
    }
}
