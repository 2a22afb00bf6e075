use laplift::arrayio;
use laplift::energies::{DataTerm, Regularizer, RegularizerKind};
use laplift::lifting::{dual_objective, repair_dual, DualVars, LiftedField};
use laplift::prox;
use laplift::rounding::{extract_modes, round_mean, round_threshold};
use laplift::solver::{estimate_opnorm, pdhg_solve, SolverConfig};
use laplift::{Grid, SaddleProblem, Triangulation};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(kind: u8, size: f64) -> Triangulation {
    match kind % 3 {
        0 => Triangulation::interval(-size, size, 4 + kind as usize % 5).unwrap(),
        1 => Triangulation::disk(size, &[6]).unwrap(),
        _ => Triangulation::disk(size, &[8, 16]).unwrap(),
    }
}

fn random_problem(seed: u64) -> SaddleProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (grid, tri) = if rng.gen_bool(0.5) {
        (Grid::line(rng.gen_range(2..6)).unwrap(), Triangulation::interval(-1.0, 1.0, rng.gen_range(2..6)).unwrap())
    } else {
        (Grid::image(rng.gen_range(1..4), rng.gen_range(2..4)).unwrap(), Triangulation::disk(1.0, &[5]).unwrap())
    };
    let (n, l) = (grid.len(), tri.num_labels());
    let rho = DataTerm::new(n, l, (0..n * l).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let kind = [RegularizerKind::SquaredEuclid, RegularizerKind::OneNorm, RegularizerKind::EuclidNorm][rng.gen_range(0..3)];
    SaddleProblem::assemble(grid, tri, rho, Regularizer::new(kind, rng.gen_range(0.0..2.0)).unwrap()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barycentric_partition_of_unity(kind in 0u8..6, size in 0.5f64..3.0, seed in any::<u64>()) {
        let tri = mesh(kind, size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = tri.sample_point(&mut rng);
        let j = tri.locate(&z).unwrap();
        let alpha = tri.barycentric(j, &z).unwrap();
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = tri.point_from_bary(j, &alpha);
        for (a, b) in back.iter().zip(&z) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let row = tri.embed_dirac(&z).unwrap();
        prop_assert!(row.iter().all(|&v| v >= 0.0));
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let u = LiftedField::from_dirac(&tri, &z).unwrap();
        let mean = round_mean(&tri, &u).unwrap();
        for (a, b) in mean.values.iter().zip(&z) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pl_gradient_matches_finite_differences(kind in 0u8..6, seed in any::<u64>()) {
        let tri = mesh(kind, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..tri.num_labels()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let j = rng.gen_range(0..tri.num_simplices());
        // centroid, so small steps stay in the simplex
        let alpha = vec![1.0 / (tri.dim() + 1) as f64; tri.dim() + 1];
        let z = tri.point_from_bary(j, &alpha);
        let grad = tri.pl_gradient_of(j, &coeffs);
        let h = 1e-6;
        for d in 0..tri.dim() {
            let mut zp = z.clone();
            zp[d] += h;
            let mut zm = z.clone();
            zm[d] -= h;
            let fd = (value_in(&tri, j, &coeffs, &zp) - value_in(&tri, j, &coeffs, &zm)) / (2.0 * h);
            prop_assert!((fd - grad[d]).abs() < 1e-6, "fd {} vs {}", fd, grad[d]);
        }
    }

    #[test]
    fn simplex_projection_is_closest(v in prop::collection::vec(-3.0f64..3.0, 1..8), seed in any::<u64>()) {
        let p = prox::project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let q = laplift::labelspace::random_simplex_weights(v.len(), &mut rng);
            prop_assert!(d(&p) <= d(&q) + 1e-12);
        }
    }

    #[test]
    fn conjugate_matches_grid_supremum(kind in 0usize..3, weight in 0.2f64..2.0, g in -3.0f64..3.0) {
        // 1D: sup_p (g p - eta(p)) over a wide grid
        let kind = [RegularizerKind::SquaredEuclid, RegularizerKind::OneNorm, RegularizerKind::EuclidNorm][kind];
        let reg = Regularizer::new(kind, weight).unwrap();
        let sup = (-4000..=4000).map(|k| k as f64 * 0.01).map(|p| g * p - reg.value(&[p])).fold(f64::NEG_INFINITY, f64::max);
        let conj = reg.conjugate(&[g]);
        if conj.is_finite() {
            prop_assert!((sup - conj).abs() < 1e-3, "sup {} conj {}", sup, conj);
        } else {
            // unbounded: the grid supremum grows with the grid edge
            prop_assert!(sup > 40.0 * (g.abs() - weight) - 1e-9);
        }
    }

    #[test]
    fn operator_is_adjoint(seed in any::<u64>()) {
        let problem = random_problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let layout = problem.layout();
        let x: Vec<f64> = (0..layout.primal_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..layout.dual_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut kx = vec![0.0; layout.dual_len()];
        let mut kty = vec![0.0; layout.primal_len()];
        problem.apply(&x, &mut kx);
        problem.apply_adjoint(&y, &mut kty);
        let (a, b) = (dot(&kx, &y), dot(&x, &kty));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn repaired_dual_bounds_every_vertex_configuration(seed in any::<u64>()) {
        let problem = random_problem(seed);
        let layout = problem.layout().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let y: Vec<f64> = (0..layout.dual_len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let repaired = repair_dual(&problem, &DualVars::from_flat(&layout, &y));
        let bound = dual_objective(&problem, &repaired);
        let (n, l) = (problem.grid().len(), problem.tri().num_labels());
        for _ in 0..30 {
            let pts: Vec<f64> = (0..n).flat_map(|_| problem.tri().label(rng.gen_range(0..l)).to_vec()).collect();
            let e = problem.original_energy(&pts).unwrap();
            prop_assert!(bound <= e + 1e-9 * (1.0 + e.abs()), "bound {} energy {}", bound, e);
        }
    }

    #[test]
    fn threshold_is_monotone(seed in any::<u64>(), l in 2usize..8) {
        let tri = Triangulation::interval(-1.0, 1.0, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 6;
        let values: Vec<f64> = (0..rows).flat_map(|_| laplift::labelspace::random_simplex_weights(l, &mut rng)).collect();
        let u = LiftedField::new(rows, l, values).unwrap();
        let mut prev = round_threshold(&tri, &u, 0.0).unwrap();
        for k in 1..20 {
            let next = round_threshold(&tri, &u, k as f64 / 20.0).unwrap();
            for (a, b) in prev.values.iter().zip(&next.values) {
                prop_assert!(a <= b);
            }
            prev = next;
        }
    }

    #[test]
    fn mode_weights_sum_to_one(seed in any::<u64>(), kind in 0u8..6) {
        let tri = mesh(kind, 1.0);
        let l = tri.num_labels();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..4).flat_map(|_| laplift::labelspace::random_simplex_weights(l, &mut rng)).collect();
        // sparsify so that several components appear
        values.iter_mut().for_each(|v| if rng.gen_bool(0.5) { *v *= 1e-4 });
        for row in values.chunks_mut(l) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let u = LiftedField::new(4, l, values).unwrap();
        for modes in extract_modes(&tri, &u, 1e-300, usize::MAX).unwrap() {
            let total: f64 = modes.iter().map(|m| m.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        for modes in extract_modes(&tri, &u, 0.2, 3).unwrap() {
            prop_assert!(modes.iter().map(|m| m.weight).sum::<f64>() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn array_format_round_trips(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>() * 1e6 - 5e5).collect();
        let bytes = arrayio::encode(rows, cols, &values).unwrap();
        prop_assert_eq!(arrayio::decode(&bytes).unwrap(), (rows, cols, values));
    }
}

fn value_in(tri: &Triangulation, j: usize, coeffs: &[f64], z: &[f64]) -> f64 {
    let alpha = tri.barycentric(j, z).unwrap();
    tri.simplex(j).iter().zip(&alpha).map(|(&k, a)| a * coeffs[k]).sum()
}

#[test]
fn opnorm_estimate_matches_dense_svd() {
    for seed in 0..6 {
        let problem = random_problem(seed);
        let layout = problem.layout();
        let (np, nd) = (layout.primal_len(), layout.dual_len());
        let mut dense = DMatrix::<f64>::zeros(nd, np);
        let mut e = vec![0.0; np];
        let mut col = vec![0.0; nd];
        for c in 0..np {
            e[c] = 1.0;
            problem.apply(&e, &mut col);
            e[c] = 0.0;
            dense.set_column(c, &nalgebra::DVector::from_column_slice(&col));
        }
        let exact = dense.singular_values().max();
        let est = estimate_opnorm(&problem, 2000, seed);
        assert!(est <= exact * (1.0 + 1e-9), "estimate {est} above {exact}");
        assert!(est >= exact * 0.99, "estimate {est} far below {exact}");
    }
}

#[test]
fn solves_are_bitwise_reproducible() {
    let problem = random_problem(11);
    let cfg = SolverConfig { max_iter: 3000, ..SolverConfig::default() };
    let a = pdhg_solve(&problem, &cfg).unwrap();
    let b = pdhg_solve(&problem, &cfg).unwrap();
    assert_eq!(a.u.values, b.u.values);
    assert_eq!(a.dual.to_flat(), b.dual.to_flat());
    assert_eq!(a.report.iterations, b.report.iterations);
}

#[test]
fn lifted_saddle_value_bounded_by_brute_force() {
    for seed in 0..5 {
        let problem = random_problem(100 + seed);
        let best = laplift::verify::brute_force_minimum(&problem).unwrap();
        let sol = pdhg_solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.report.dual_bound <= best + 1e-9);
        assert!(sol.report.saddle_value <= best + 1e-3, "{} vs {best}", sol.report.saddle_value);
    }
}
