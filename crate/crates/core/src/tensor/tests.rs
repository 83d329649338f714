use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::matrix::{dot, normalize};

fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    v
}

fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..d).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn rejects_bad_shapes() {
    assert!(matches!(
        DenseTensor::new(vec![3], vec![0.0; 3]),
        Err(Error::OrderTooSmall(1))
    ));
    assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
    assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
}

#[test]
fn matricize_matrix_mode0_is_identity_reshape() {
    let a = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let m = a.matricize(0).unwrap();
    // column-major data: a(0,0)=1, a(1,0)=2, a(0,1)=3, a(1,1)=4
    assert_eq!(m, Matrix::from_row_major(2, 2, vec![1.0, 3.0, 2.0, 4.0]));
}

#[test]
fn matricize_mode1_of_counting_cube() {
    let a = DenseTensor::new(vec![2, 2, 2], (0..8).map(f64::from).collect()).unwrap();
    let m = a.matricize(1).unwrap();
    assert_eq!(m[(0, 0)], 0.0);
    assert_eq!(m[(1, 0)], 2.0);
    assert!(matches!(a.matricize(3), Err(Error::ModeOutOfRange { .. })));
}

#[test]
fn matricize_is_a_bijection_on_small_shapes() {
    for dims in [vec![2, 3], vec![3, 1, 4], vec![2, 3, 4], vec![4, 2, 3, 2]] {
        let a = DenseTensor::new(
            dims.clone(),
            (0..dims.iter().product::<usize>())
                .map(|p| p as f64)
                .collect(),
        )
        .unwrap();
        for n in 0..dims.len() {
            let m = a.matricize(n).unwrap();
            let mut hits = vec![0usize; m.rows() * m.cols()];
            for idx in all_indices(&dims) {
                let mut j = 0;
                let mut stride = 1;
                for k in 0..dims.len() {
                    if k != n {
                        j += idx[k] * stride;
                        stride *= dims[k];
                    }
                }
                assert_eq!(m[(idx[n], j)], a.get(&idx));
                hits[idx[n] * m.cols() + j] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1), "dims {dims:?} mode {n}");
        }
    }
}

#[test]
fn dematricize_round_trip() {
    let a = random_tensor(&[3, 4, 5], 1);
    for n in 0..3 {
        let m = a.matricize(n).unwrap();
        assert_eq!(DenseTensor::dematricize(&m, a.dims(), n).unwrap(), a);
    }
}

#[test]
fn ttv_of_rank_one_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = random_unit(4, &mut rng);
    let w = random_unit(3, &mut rng);
    let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = FactorSet::new(1.0, vec![u.clone(), w.clone()]).unwrap();
    let a = rank_one_expand(&f, &[4, 3]).unwrap();
    let r = a.ttv(&v, 0).unwrap();
    let s = dot(&v, &u);
    assert_eq!(r.dims(), &[3]);
    for (x, y) in r.data().iter().zip(&w) {
        assert!((x - s * y).abs() < 1e-14);
    }
}

#[test]
fn ttv_all_ones_gives_twos() {
    let a = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
    let r = a.ttv(&[1.0, 1.0], 2).unwrap();
    assert_eq!(r.dims(), &[2, 2]);
    assert_eq!(r.data(), &[2.0; 4]);
}

#[test]
fn ttv_matches_matricization_oracle() {
    let a = random_tensor(&[3, 4, 5], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 0..3 {
        let v: Vec<f64> = (0..a.dims()[n])
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let expected = a.matricize(n).unwrap().tr_matvec(&v);
        let got = a.ttv(&v, n).unwrap();
        for (x, y) in got.data().iter().zip(&expected) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}

#[test]
fn ttv_errors() {
    let a = random_tensor(&[2, 3], 5);
    assert!(matches!(a.ttv(&[1.0; 3], 0), Err(Error::ShapeMismatch(_))));
    assert!(matches!(
        a.ttv(&[1.0; 2], 2),
        Err(Error::ModeOutOfRange { .. })
    ));
}

#[test]
fn ttvc_full_contraction_of_rank_one_is_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let factors: Vec<Vec<f64>> = [3, 4, 2]
        .iter()
        .map(|&n| random_unit(n, &mut rng))
        .collect();
    let f = FactorSet::new(2.5, factors.clone()).unwrap();
    let a = rank_one_expand(&f, &[3, 4, 2]).unwrap();
    let vs: Vec<&[f64]> = [2, 0, 1].iter().map(|&m| factors[m].as_slice()).collect();
    let c = a.ttvc(&vs, &[2, 0, 1]).unwrap();
    assert!((c.scalar().unwrap() - 2.5).abs() < 1e-14);
    assert!((a.multilinear(&factors).unwrap() - 2.5).abs() < 1e-14);
}

#[test]
fn ttvc_two_modes_brute_force() {
    let a = random_tensor(&[2, 2, 2], 7);
    let x = [0.3, -1.2];
    let z = [0.7, 0.4];
    let got = a.ttvc(&[&x, &z], &[0, 2]).unwrap().tensor().unwrap();
    assert_eq!(got.dims(), &[2]);
    for j in 0..2 {
        let mut s = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                s += a.get(&[i, j, k]) * x[i] * z[k];
            }
        }
        assert!((got.data()[j] - s).abs() < 1e-15);
    }
}

#[test]
fn ttvc_order_invariance() {
    let a = random_tensor(&[3, 3, 3], 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<Vec<f64>> = (0..3).map(|_| random_unit(3, &mut rng)).collect();
    let first = a.ttvc(&[&v[0], &v[1]], &[0, 1]).unwrap().tensor().unwrap();
    let one = dot(first.data(), &v[2]);
    let last = a.ttv(&v[2], 2).unwrap();
    let two = last
        .ttvc(&[&v[0], &v[1]], &[0, 1])
        .unwrap()
        .scalar()
        .unwrap();
    assert!(close(one, two, 1e-14));
}

#[test]
fn ttvc_errors() {
    let a = random_tensor(&[2, 2, 2], 10);
    assert!(matches!(
        a.ttvc(&[&[1.0, 0.0], &[0.0, 1.0]], &[1, 1]),
        Err(Error::DuplicateMode(1))
    ));
    assert!(matches!(
        a.ttvc(&[&[1.0]], &[0]),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn frobenius_examples() {
    assert_eq!(
        DenseTensor::zeros(vec![2, 3]).unwrap().frobenius_norm(),
        0.0
    );
    let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
    assert!((ones.frobenius_norm() - 8f64.sqrt()).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = FactorSet::new(
        1.0,
        vec![
            random_unit(3, &mut rng),
            random_unit(2, &mut rng),
            random_unit(4, &mut rng),
        ],
    )
    .unwrap();
    assert!((rank_one_expand(&f, &[3, 2, 4]).unwrap().frobenius_norm() - 1.0).abs() < 1e-14);
}

#[test]
fn rank_one_expand_examples() {
    let f = FactorSet::new(0.0, vec![vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
    assert!(rank_one_expand(&f, &[2, 2])
        .unwrap()
        .data()
        .iter()
        .all(|&v| v == 0.0));

    let u = vec![0.6, 0.8];
    let v = vec![0.0, 1.0, 0.0];
    let f = FactorSet::new(3.0, vec![u.clone(), v.clone()]).unwrap();
    let a = rank_one_expand(&f, &[2, 3]).unwrap();
    for i in 0..2 {
        for j in 0..3 {
            assert_eq!(a.get(&[i, j]), 3.0 * u[i] * v[j]);
        }
    }
    assert!((a.frobenius_norm() - 3.0).abs() < 1e-14);
    assert!(rank_one_expand(&f, &[3, 2]).is_err());
}

#[test]
fn factor_set_rejects_non_unit() {
    assert!(matches!(
        FactorSet::new(1.0, vec![vec![1.0, 1.0]]),
        Err(Error::NonUnitFactor { mode: 0, .. })
    ));
    let f = FactorSet::from_unnormalized(1.0, vec![vec![3.0, 4.0], vec![0.0, 0.0]]);
    assert_eq!(f.degenerate, vec![false, true]);
    assert_eq!(f.factors[0], vec![0.6, 0.8]);
}

#[test]
fn residual_norm_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = FactorSet::new(
        4.0,
        vec![
            random_unit(3, &mut rng),
            random_unit(3, &mut rng),
            random_unit(3, &mut rng),
        ],
    )
    .unwrap();
    let a = rank_one_expand(&f, &[3, 3, 3]).unwrap();
    assert!(residual_norm(&a, &f).unwrap() < 1e-14);

    let b = random_tensor(&[3, 3, 3], 13);
    let zero = FactorSet {
        lambda: 0.0,
        ..f.clone()
    };
    assert!((residual_norm(&b, &zero).unwrap() - b.frobenius_norm()).abs() < 1e-14);

    // expansion-free path against the dense subtraction oracle
    let g = FactorSet::new(
        0.9,
        vec![
            random_unit(3, &mut rng),
            random_unit(3, &mut rng),
            random_unit(3, &mut rng),
        ],
    )
    .unwrap();
    let oracle = b
        .sub(&rank_one_expand(&g, &[3, 3, 3]).unwrap())
        .unwrap()
        .frobenius_norm();
    assert!((residual_norm_with_threshold(&b, &g, 0).unwrap() - oracle).abs() < 1e-10);
    assert!((residual_norm(&b, &g).unwrap() - oracle).abs() < 1e-14);
}

#[test]
fn permute_modes_moves_entries() {
    let a = random_tensor(&[2, 3, 4], 14);
    let p = a.permute_modes(&[2, 0, 1]).unwrap();
    assert_eq!(p.dims(), &[4, 2, 3]);
    assert_eq!(p.get(&[3, 1, 2]), a.get(&[1, 2, 3]));
    assert!(a.permute_modes(&[0, 0, 1]).is_err());
}

#[test]
fn dt1_rejects_corrupt_input() {
    let a = random_tensor(&[2, 3], 15);
    let bytes = a.to_dt1_bytes().unwrap();
    assert_eq!(&bytes[..6], b"DTEN1\0");
    assert_eq!(bytes[6], 2);
    assert_eq!(bytes.len(), 7 + 16 + 48);
    assert!(DenseTensor::from_dt1_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(DenseTensor::from_dt1_bytes(&extra).is_err());
    let mut bad = bytes;
    bad[0] = b'X';
    assert!(matches!(
        DenseTensor::from_dt1_bytes(&bad),
        Err(Error::Format(_))
    ));
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dt1_round_trip(dims in dims_strategy(), seed in any::<u64>()) {
        let a = random_tensor(&dims, seed);
        prop_assert_eq!(DenseTensor::from_dt1_bytes(&a.to_dt1_bytes().unwrap()).unwrap(), a);
    }

    #[test]
    fn ttv_is_linear(dims in dims_strategy(), seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let a = random_tensor(&dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let n = rng.random_range(0..dims.len());
        let v: Vec<f64> = (0..dims[n]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..dims[n]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = v.iter().zip(&w).map(|(x, y)| alpha * x + beta * y).collect();
        let lhs = a.ttv(&comb, n).unwrap();
        let tv = a.ttv(&v, n).unwrap();
        let tw = a.ttv(&w, n).unwrap();
        for ((l, x), y) in lhs.data().iter().zip(tv.data()).zip(tw.data()) {
            prop_assert!(close(*l, alpha * x + beta * y, 1e-10));
        }
        // linear in A as well
        let b = random_tensor(&dims, seed.wrapping_add(1));
        let sum = DenseTensor::new(dims.clone(), a.data().iter().zip(b.data()).map(|(x, y)| alpha * x + beta * y).collect()).unwrap();
        let tb = b.ttv(&v, n).unwrap();
        for ((l, x), y) in sum.ttv(&v, n).unwrap().data().iter().zip(tv.data()).zip(tb.data()) {
            prop_assert!(close(*l, alpha * x + beta * y, 1e-10));
        }
    }

    #[test]
    fn ttvc_disjoint_subsets_commute(dims in prop::collection::vec(1usize..5, 3..5), seed in any::<u64>()) {
        let a = random_tensor(&dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let vs: Vec<Vec<f64>> = dims.iter().map(|&n| random_unit(n, &mut rng)).collect();
        // contract the first mode alone, then the rest; and the reverse
        let rest: Vec<usize> = (1..dims.len()).collect();
        let rest_vs: Vec<&[f64]> = rest.iter().map(|&m| vs[m].as_slice()).collect();
        let a1 = a.ttv(&vs[0], 0).unwrap();
        let shifted: Vec<usize> = rest.iter().map(|m| m - 1).collect();
        let one = a1.ttvc(&rest_vs, &shifted).unwrap().scalar().unwrap();
        let partial = a.ttvc(&rest_vs, &rest).unwrap().tensor().unwrap();
        let two = partial.ttv(&vs[0], 0);
        let two = match two {
            Ok(t) => t.data()[0],
            Err(_) => dot(partial.data(), &vs[0]),
        };
        prop_assert!(close(one, two, 1e-10));
    }

    #[test]
    fn expansion_norm_is_product_of_norms(dims in dims_strategy(), seed in any::<u64>(), lambda in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<Vec<f64>> = dims.iter().map(|&n| random_unit(n, &mut rng)).collect();
        let f = FactorSet::new(lambda, factors).unwrap();
        let t = rank_one_expand(&f, &dims).unwrap();
        prop_assert!(close(t.frobenius_norm(), lambda.abs(), 1e-10));
    }

    #[test]
    fn multilinear_matches_unfolding_for_every_mode(dims in dims_strategy(), seed in any::<u64>()) {
        let a = random_tensor(&dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let factors: Vec<Vec<f64>> = dims.iter().map(|&n| random_unit(n, &mut rng)).collect();
        let value = a.multilinear(&factors).unwrap();
        for n in 0..dims.len() {
            // Khatri-Rao column of the other factors, lowest mode fastest
            let mut kr = vec![1.0];
            for (k, f) in factors.iter().enumerate() {
                if k == n { continue; }
                let mut next = Vec::with_capacity(kr.len() * f.len());
                for &fi in f { next.extend(kr.iter().map(|&x| x * fi)); }
                kr = next;
            }
            let g = a.matricize(n).unwrap().matvec(&kr);
            prop_assert!(close(dot(&g, &factors[n]), value, 1e-10));
            let direct = a.contract_all_but(&factors, n).unwrap();
            for (x, y) in direct.iter().zip(&g) {
                prop_assert!(close(*x, *y, 1e-10));
            }
        }
    }

    #[test]
    fn parallel_kernel_matches_serial(dims in prop::collection::vec(1usize..7, 2..5), seed in any::<u64>()) {
        let a = random_tensor(&dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for pos in 0..dims.len() {
            let v: Vec<f64> = (0..dims[pos]).map(|_| rng.random_range(-1.0..1.0)).collect();
            prop_assert_eq!(contract_mode(a.data(), &dims, pos, &v), contract_mode_par(a.data(), &dims, pos, &v));
        }
    }
}
