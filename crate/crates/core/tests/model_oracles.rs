//! Factored evaluation against enumeration oracles written directly from the
//! defining sums.

use convac_core::info::{joint_entropy, DiscreteDist, JointDist};
use convac_core::model::{
    random_model, random_model_with, BankLayout, ComponentBank, CpModel, Dims, HtModel, InputAssignment,
    LatentPriors, Model, DEFAULT_BUDGET,
};
use convac_core::tensor::{CpFactors, HtFactors, Mode};

fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) || (a - b).abs() < 1e-300
}

fn digits(mut lin: usize, n: usize, base: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = lin % base;
        lin /= base;
    }
    out
}

/// `A[d]` of an HT model by recursion over latent channels for the single
/// entry `d`.
fn ht_entry(m: &HtModel, d: &[usize]) -> f64 {
    fn node(m: &HtModel, layer: usize, i: usize, g: usize, d: &[usize]) -> f64 {
        if layer == 0 {
            return if d[i] == g { 1.0 } else { 0.0 };
        }
        [2 * i, 2 * i + 1]
            .iter()
            .map(|&c| {
                m.mapping(layer - 1, c)[g]
                    .iter()
                    .enumerate()
                    .map(|(a, w)| w * node(m, layer - 1, c, a, d))
                    .sum::<f64>()
            })
            .product()
    }
    let top = m.factors().top();
    (0..top.len())
        .map(|g| top[g] * node(m, m.depth(), 0, g, d))
        .sum()
}

fn cp_entry(m: &CpModel, d: &[usize]) -> f64 {
    let f = m.factors();
    (0..f.rank())
        .map(|z| f.top()[z] * d.iter().enumerate().map(|(i, &di)| f.vector(z, i)[di]).product::<f64>())
        .sum()
}

/// `P(X) = sum_d A[d] prod_i theta_{d_i}(x_i)` entry by entry.
fn literal_joint(model: &Model) -> Vec<f64> {
    let (n, m, s) = (model.order(), model.components(), model.alphabet());
    let entries: Vec<f64> = (0..m.pow(n as u32))
        .map(|lin| {
            let d = digits(lin, n, m);
            match model {
                Model::Ht(h) => ht_entry(h, &d),
                Model::Cp(c) => cp_entry(c, &d),
            }
        })
        .collect();
    (0..s.pow(n as u32))
        .map(|xl| {
            let x = digits(xl, n, s);
            entries
                .iter()
                .enumerate()
                .map(|(dl, a)| {
                    let d = digits(dl, n, m);
                    a * (0..n).map(|i| model.bank().component(i, d[i]).prob(x[i])).product::<f64>()
                })
                .sum()
        })
        .collect()
}

fn ht_dims(n: usize, m: usize, s: usize, ranks: &[usize]) -> Dims {
    Dims::Ht {
        n,
        m,
        s,
        ranks: ranks.to_vec(),
    }
}

fn small_dims() -> Vec<Dims> {
    vec![
        ht_dims(2, 2, 2, &[2]),
        ht_dims(4, 2, 2, &[1, 1]),
        ht_dims(4, 3, 2, &[3, 2]),
        ht_dims(4, 2, 3, &[2, 3]),
        Dims::Cp { n: 3, m: 2, s: 3, z: 3 },
        Dims::Cp { n: 4, m: 3, s: 2, z: 2 },
        Dims::Cp { n: 1, m: 2, s: 2, z: 4 },
    ]
}

#[test]
fn forward_and_enumeration_match_literal_sum() {
    for dims in small_dims() {
        for seed in 0..4 {
            for layout in [BankLayout::Shared, BankLayout::PerSite] {
                let model = random_model_with(&dims, seed, layout).unwrap();
                let oracle = literal_joint(&model);
                let joint = model.bruteforce_joint(DEFAULT_BUDGET).unwrap();
                for (lin, &p) in oracle.iter().enumerate() {
                    let x = InputAssignment::from_linear(lin, model.order(), model.alphabet());
                    let f = model.forward(&x).unwrap();
                    assert!(close_rel(f, p, 1e-12), "{dims:?} seed {seed}: forward {f} vs {p}");
                    assert!(close_rel(joint.pmf()[lin], p, 1e-12), "{dims:?} seed {seed}: enumeration");
                }
            }
        }
    }
}

#[test]
fn priors_tensor_matches_literal_entries() {
    for dims in small_dims() {
        let model = random_model(&dims, 17).unwrap();
        let a = model.priors_tensor(DEFAULT_BUDGET).unwrap();
        assert!((a.sum() - 1.0).abs() < 1e-10);
        for (lin, &v) in a.data().iter().enumerate() {
            let d = digits(lin, model.order(), model.components());
            let expected = match &model {
                Model::Ht(h) => ht_entry(h, &d),
                Model::Cp(c) => cp_entry(c, &d),
            };
            assert!(close_rel(v, expected, 1e-12));
            assert!(v >= 0.0);
        }
    }
}

#[test]
fn deep_models_dual_path_and_mass() {
    for (k, dims) in [ht_dims(8, 2, 2, &[2, 2, 2]), ht_dims(8, 3, 3, &[3, 2, 3]), Dims::Cp { n: 6, m: 3, s: 3, z: 4 }]
        .iter()
        .enumerate()
    {
        let model = random_model(dims, 100 + k as u64).unwrap();
        let joint = model.bruteforce_joint(DEFAULT_BUDGET).unwrap();
        assert!((joint.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (lin, &p) in joint.pmf().iter().enumerate() {
            let x = InputAssignment::from_linear(lin, model.order(), model.alphabet());
            assert!(close_rel(model.forward(&x).unwrap(), p, 1e-12));
        }
    }
}

#[test]
fn top_node_mixture_recovers_joint() {
    let model = random_model(&ht_dims(8, 2, 3, &[2, 3, 2]), 5).unwrap();
    let Model::Ht(ht) = &model else { unreachable!() };
    let top = ht.node_conditional(3, 0, DEFAULT_BUDGET).unwrap();
    let weights = DiscreteDist::new(ht.factors().top().to_vec()).unwrap();
    let mixed = convac_core::info::ConditionalFamily::new(weights, top.members().to_vec())
        .unwrap()
        .mixture();
    let joint = model.bruteforce_joint(DEFAULT_BUDGET).unwrap();
    assert!(mixed.tensor().max_abs_diff(joint.tensor()).unwrap() < 1e-12);
}

fn one_hot_bank() -> ComponentBank {
    ComponentBank::shared(vec![
        DiscreteDist::point_mass(2, 0).unwrap(),
        DiscreteDist::point_mass(2, 1).unwrap(),
    ])
    .unwrap()
}

#[test]
fn one_hot_ht_model_is_deterministic() {
    // leaves select components (1, 0, 0, 1)
    let e = |k: usize| if k == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    let weights = vec![
        vec![vec![e(1)], vec![e(0)], vec![e(0)], vec![e(1)]],
        vec![vec![vec![1.0]], vec![vec![1.0]]],
    ];
    let f = HtFactors::new(Mode::Probabilistic, 2, vec![1, 1], weights, vec![1.0]).unwrap();
    let m = Model::Ht(HtModel::new(one_hot_bank(), f, LatentPriors::Induced).unwrap());
    let a = m.priors_tensor(DEFAULT_BUDGET).unwrap();
    assert_eq!(a.get(&[1, 0, 0, 1]), Some(1.0));
    assert_eq!(a.sum(), 1.0);
    let joint = m.bruteforce_joint(DEFAULT_BUDGET).unwrap();
    assert_eq!(joint.tensor().get(&[1, 0, 0, 1]), Some(1.0));
    assert_eq!(joint_entropy(&joint), 0.0);
    let x = InputAssignment::new(vec![1, 0, 0, 1], 2).unwrap();
    assert_eq!(m.forward(&x).unwrap(), 1.0);
    let Model::Ht(h) = &m else { unreachable!() };
    for (l, i) in [(1, 0), (1, 1), (2, 0)] {
        let fam = h.node_conditional(l, i, DEFAULT_BUDGET).unwrap();
        for member in fam.members() {
            assert_eq!(member.pmf().iter().filter(|&&p| p == 1.0).count(), 1);
        }
    }
}

#[test]
fn depth_one_joint_equals_cp_joint() {
    for seed in 0..10 {
        let model = random_model(&ht_dims(2, 3, 3, &[3]), seed).unwrap();
        let Model::Ht(ht) = &model else { unreachable!() };
        let vectors = (0..3)
            .map(|z| (0..2).map(|i| ht.mapping(0, i)[z].clone()).collect())
            .collect();
        let cp = Model::Cp(
            CpModel::new(
                ht.bank().clone(),
                CpFactors::new(Mode::Probabilistic, ht.factors().top().to_vec(), vectors).unwrap(),
            )
            .unwrap(),
        );
        let a = model.bruteforce_joint(DEFAULT_BUDGET).unwrap();
        let b = cp.bruteforce_joint(DEFAULT_BUDGET).unwrap();
        assert!(a.tensor().max_abs_diff(b.tensor()).unwrap() < 1e-15);
    }
}

#[test]
fn leaf_sum_below_joint_entropy() {
    for dims in small_dims() {
        for seed in 0..5 {
            let model = random_model(&dims, seed).unwrap();
            let h = joint_entropy(&model.bruteforce_joint(DEFAULT_BUDGET).unwrap());
            assert!(model.leaf_conditional_entropy_sum() <= h + 1e-9);
        }
    }
}

#[test]
fn dirichlet_weight_moments() {
    // 100 models; every weight entry's empirical mean within three standard
    // errors of 1/k, using the flat Dirichlet variance (k-1)/(k^2 (k+1)).
    let dims = ht_dims(4, 3, 2, &[2, 3]);
    let models: Vec<HtModel> = (0..100)
        .map(|s| match random_model(&dims, s).unwrap() {
            Model::Ht(h) => h,
            Model::Cp(_) => unreachable!(),
        })
        .collect();
    let mut vectors_of_model: Vec<Vec<Vec<f64>>> = vec![Vec::new(); models.len()];
    for (k, m) in models.iter().enumerate() {
        for level in m.factors().weights() {
            for node in level {
                vectors_of_model[k].extend(node.iter().cloned());
            }
        }
        vectors_of_model[k].push(m.factors().top().to_vec());
        for c in m.bank().site(0) {
            vectors_of_model[k].push(c.pmf().to_vec());
        }
    }
    let count = vectors_of_model[0].len();
    let mut checked = 0;
    for v in 0..count {
        let len = vectors_of_model[0][v].len();
        let kf = len as f64;
        let se = ((kf - 1.0) / (kf * kf * (kf + 1.0)) / models.len() as f64).sqrt();
        for e in 0..len {
            let mean = vectors_of_model.iter().map(|vs| vs[v][e]).sum::<f64>() / models.len() as f64;
            if len > 1 {
                assert!((mean - 1.0 / kf).abs() <= 3.0 * se, "vector {v} entry {e}: mean {mean}, 1/k {}", 1.0 / kf);
                checked += 1;
            }
        }
    }
    assert!(checked > 20);
}

#[test]
fn joint_dist_rejects_bad_mass() {
    let t = convac_core::tensor::Tensor::new(vec![2], vec![0.5, 0.6]).unwrap();
    assert!(JointDist::new(t).is_err());
}
