use super::*;
use crate::cell::HarmonicData;
use crate::membrane::MembraneModel;
use crate::mesh::{build_square_mesh, Square};
use std::f64::consts::PI;

fn params() -> ModelParams {
    ModelParams::default()
}

fn circle_mesh(div: f64) -> InterfaceMesh {
    let p = params();
    build_unit_cell_mesh(&CellGeometry::circle(p.cell_size, p.radius), p.cell_size / div).unwrap()
}

fn norm(m: &Tensor2) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn homogeneous_medium_has_trivial_corrector() {
    let mesh = circle_mesh(12.0);
    let c = solve_chi0(&mesh, 2.0, 2.0).unwrap();
    for h in 0..2 {
        assert!(c.chi[h].iter().all(|x| x.abs() < 1e-9 * mesh.domain.size));
        // node normal: length-weighted average of the adjacent edge normals
        let mut nn = vec![[0.0; 2]; mesh.num_pairs()];
        let mut w = vec![0.0; mesh.num_pairs()];
        for (e, &[a, b]) in mesh.interface_edges.iter().enumerate() {
            let (l, n) = (mesh.edge_length(e), mesh.edge_normal(e));
            for k in [a, b] {
                nn[k][0] += 0.5 * l * n[0];
                nn[k][1] += 0.5 * l * n[1];
                w[k] += 0.5 * l;
            }
        }
        for k in 0..mesh.num_pairs() {
            let expect = -2.0 * nn[k][h] / w[k];
            assert!((c.flux[h][k] - expect).abs() < 1e-8, "{} vs {}", c.flux[h][k], expect);
        }
    }
}

#[test]
fn sigma0_and_a0_for_table1_circle() {
    let p = params();
    let mesh = circle_mesh(24.0);
    let grid = KernelGrid { samples: 2, ..KernelGrid::default_for(&p) };
    let t = homogenize_mesh(&mesh, &p, &grid, None).unwrap();
    let f = mesh.volume_fraction();
    assert!((t.sigma0 - (0.455 * f + 5.0 * (1.0 - f))).abs() <= 1e-12 * t.sigma0);
    let exact = 0.455 * PI / 16.0 + 5.0 * (1.0 - PI / 16.0);
    assert!((exact - 4.1076).abs() < 1e-4);
    assert!((t.sigma0 - exact).abs() < 0.01 * exact);
    let a = t.a0;
    assert!((a[0][1] - a[1][0]).abs() <= 1e-8 * norm(&a));
    let (l1, l2) = sym_eigenvalues(&a);
    assert!(l1 <= 0.0 && l2 < 0.0);
    assert!((l2 / l1 - 1.0).abs() < 0.01, "{l1} {l2}");
    // 2D Maxwell-Garnett estimate for a dilute-ish circular inclusion
    let b = (p.sigma_i - p.sigma_e) / (p.sigma_i + p.sigma_e);
    let mg = p.sigma_e * (1.0 + f * b) / (1.0 - f * b);
    let eff = t.sigma0 + 0.5 * (l1 + l2);
    assert!((eff - mg).abs() < 0.01 * mg, "{eff} vs {mg}");
}

#[test]
fn flux_traces_follow_quarter_turn() {
    let mesh = circle_mesh(16.0);
    let p = params();
    let c = solve_chi0(&mesh, p.sigma_i, p.sigma_e).unwrap();
    let m = mesh.num_pairs();
    assert_eq!(m % 4, 0);
    let scale = c.flux[0].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for k in 0..m {
        // find the node a quarter turn ahead
        let target = (mesh.pair_angle(k) + 0.5 * PI) % (2.0 * PI);
        let j = (0..m)
            .min_by(|&a, &b| {
                let da = (mesh.pair_angle(a) - target).abs();
                let db = (mesh.pair_angle(b) - target).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert!((c.flux[1][j] - c.flux[0][k]).abs() < 0.05 * scale);
    }
}

#[test]
fn small_cells_vanish_from_the_tensors() {
    let p = params();
    let g = CellGeometry::circle(p.cell_size, p.cell_size / 20.0);
    let grid = KernelGrid { samples: 2, ..KernelGrid::default_for(&p) };
    let (_, t) = homogenize(&g, &p, p.cell_size / 64.0, &grid).unwrap();
    assert!((t.sigma0 - p.sigma_e).abs() < 0.05);
    assert!(norm(&t.a0) < 0.02 * p.sigma_e);
}

#[test]
fn transform_is_linear_and_relaxes() {
    let p = params();
    let mesh = circle_mesh(12.0);
    let grid = KernelGrid { samples: 64, substeps: 2, ..KernelGrid::default_for(&p) };
    let zero = transform_t(&mesh, &vec![0.0; mesh.num_pairs()], &p, p.delta, &grid).unwrap();
    assert!(zero.fields.iter().flatten().all(|x| *x == 0.0));
    let s: Vec<f64> = (0..mesh.num_pairs()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
    let s2: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
    let a = transform_t(&mesh, &s, &p, p.delta, &grid).unwrap();
    let b = transform_t(&mesh, &s2, &p, p.delta, &grid).unwrap();
    let scale = a.fields[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        for (x, y) in fa.iter().zip(fb) {
            assert!((2.0 * x - y).abs() < 1e-8 * scale);
        }
    }
    for w in a.jump_l2.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert!(a.jump_l2.last().unwrap() < &(0.1 * a.jump_l2[0]));
    assert!(a.sigma_m_drift <= 1e-12);
}

#[test]
fn kernel_is_isotropic_and_decays() {
    let p = params();
    let mesh = circle_mesh(16.0);
    let grid = KernelGrid::default_for(&p);
    let t = homogenize_mesh(&mesh, &p, &grid, None).unwrap();
    assert_eq!(t.a1.len(), 64);
    let (l1, l2) = sym_eigenvalues(&t.a1[0]);
    assert!(l1.abs() > 0.0);
    assert!((l2 / l1 - 1.0).abs() < 0.01, "{l1} {l2}");
    for w in t.a1.windows(2) {
        assert!(norm(&w[1]) <= norm(&w[0]) * (1.0 + 1e-12));
    }
    assert!(norm(t.a1.last().unwrap()) < 0.01 * norm(&t.a1[0]));
}

#[test]
fn homogeneous_conductivity_still_has_a_kernel() {
    let p = ModelParams { sigma_i: 2.0, sigma_e: 2.0, ..params() };
    let mesh = circle_mesh(12.0);
    let grid = KernelGrid { samples: 16, ..KernelGrid::default_for(&p) };
    let t = homogenize_mesh(&mesh, &p, &grid, None).unwrap();
    assert!(norm(&t.a0) < 1e-9);
    assert!(norm(&t.a1[0]) > 0.0);
    assert!(norm(&t.a1[15]) < norm(&t.a1[0]));
}

#[test]
fn long_time_limit_matches_imperfect_interface_problem() {
    // Low membrane conductance so the memory term is a visible correction.
    let p = ModelParams { sigma_m0: 1e-5, beta: 1e-16, ..params() };
    let mesh = circle_mesh(16.0);
    let tau = p.c_m / p.sigma_m_rest();
    let grid = KernelGrid { dt: 10.0 * tau / 399.0, samples: 400, substeps: 8 };
    let t = homogenize_mesh(&mesh, &p, &grid, None).unwrap();
    let mut long = t.instantaneous();
    let k = t.kernel_integral();
    for i in 0..2 {
        for j in 0..2 {
            long[i][j] += k[i][j];
        }
    }
    let oracle = imperfect_interface_tensor(&mesh, &p, p.sigma_m_rest(), p.delta).unwrap();
    let inst = t.instantaneous();
    // the leaky membrane lowers the conductivity well below the perfect-contact value
    assert!(oracle[0][0] < inst[0][0] - 0.1, "{oracle:?} {inst:?}");
    for i in 0..2 {
        for j in 0..2 {
            let gap = (inst[0][0] - oracle[0][0]).abs();
            assert!((long[i][j] - oracle[i][j]).abs() < 0.02 * gap, "{long:?} vs {oracle:?}");
        }
    }
}

#[test]
fn source_term_appears_with_initial_jump() {
    let p = params();
    let mesh = circle_mesh(12.0);
    let grid = KernelGrid { samples: 16, ..KernelGrid::default_for(&p) };
    let s1 = |theta: f64| theta.cos();
    let t = homogenize_mesh(&mesh, &p, &grid, Some(&s1)).unwrap();
    let f = t.f.as_ref().unwrap();
    assert!(f[0][0].abs() > 0.0);
    assert!(f[0][1].abs() < 1e-6 * f[0][0].abs());
    assert!(f[15][0].abs() < f[0][0].abs());
}

#[test]
fn macro_solver_without_memory_is_stationary_and_exact_for_affine_data() {
    let t = EffectiveTensors {
        sigma0: 3.0,
        volume_fraction: 0.0,
        a0: [[-0.5, 0.0], [0.0, -0.5]],
        kernel_dt: 1.0,
        a1: vec![[[0.0; 2]; 2]; 4],
        f: None,
        kappa: 1.0,
    };
    let mesh = build_square_mesh(Square { origin: [0.0, 0.0], size: 1.0 }, 10).unwrap();
    let data = HarmonicData { constant: 1.0, gradient: [2.0, -1.0], ..HarmonicData::zero() };
    let u = solve_macro(&mesh, &t, &data, 0.5, 4).unwrap();
    for f in &u.fields {
        for (v, p) in mesh.vertices.iter().enumerate() {
            assert!((f[v] - data.eval(*p)).abs() < 1e-10);
        }
    }
    let bad = EffectiveTensors { a0: [[-4.0, 0.0], [0.0, -0.5]], ..t.clone() };
    assert!(matches!(
        solve_macro(&mesh, &bad, &data, 0.5, 4),
        Err(crate::Error::NoncoerciveEffectiveTensor(_))
    ));
    let x = interpolate_square(&mesh, &u.fields[2], [0.33, 0.71]);
    assert!((x - data.eval([0.33, 0.71])).abs() < 1e-10);
}

#[test]
fn anisotropic_macro_solution_evolves_with_memory() {
    let p = params();
    let g = CellGeometry::ellipse_with_fraction(p.cell_size, 2.0, 0.15, 0.0);
    let grid = KernelGrid { samples: 20, ..KernelGrid::default_for(&p) };
    let (_, t) = homogenize(&g, &p, p.cell_size / 16.0, &grid).unwrap();
    let mesh = build_square_mesh(Square { origin: [0.0, 0.0], size: p.cell_size }, 12).unwrap();
    let c = 0.5 * p.cell_size;
    let data = HarmonicData { gradient: [4e4, 0.0], saddle: 1e8, origin: [c, c], ..HarmonicData::zero() };
    let u = solve_macro(&mesh, &t, &data, grid.dt, 19).unwrap();
    let drift: f64 = u.fields[19].iter().zip(&u.fields[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift > 0.0);
}

#[test]
fn micro_rest_state_and_energy_scaling() {
    let p = params();
    let unit = circle_mesh(12.0);
    let tau = p.c_m / p.sigma_m_rest();
    let base = MicroConfig {
        eps: 1.0,
        domain_size: p.cell_size,
        params: p,
        model: MembraneModel::NeuKrassowska,
        boundary: HarmonicData::zero(),
        dt: tau / 4.0,
        steps: 8,
        keep_fields: false,
    };
    let rest = solve_micro(&unit, &base, None).unwrap();
    assert!(rest.energy_lhs.iter().all(|e| *e == 0.0));
    let s1 = |t: f64| t.cos();
    let mut lhs = Vec::new();
    let mut ratio = Vec::new();
    for eps in [1.0, 0.5] {
        let sol = solve_micro(&unit, &MicroConfig { eps, ..base.clone() }, Some(&s1)).unwrap();
        lhs.push(sol.energy_lhs.iter().cloned().fold(0.0, f64::max));
        ratio.push(sol.jump_l2.last().unwrap() / eps);
        for w in sol.jump_l2.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
    assert!(lhs[1] <= 1.05 * lhs[0]);
    assert!(ratio[1] / ratio[0] < 2.0 && ratio[0] / ratio[1] < 2.0);
}

#[test]
fn conducting_membrane_and_uniform_medium_match_the_limit() {
    let p = ModelParams { sigma_i: 1.0, sigma_e: 1.0, sigma_m0: 1e3, ..params() };
    let unit = circle_mesh(12.0);
    let c = 0.5 * p.cell_size;
    let setup = ConvergenceSetup {
        params: p,
        model: MembraneModel::NeuKrassowska,
        boundary: HarmonicData { gradient: [4e4, 0.0], saddle: 1e8, origin: [c, c], ..HarmonicData::zero() },
        domain_size: p.cell_size,
        dt: 1e-12,
        steps: 4,
        macro_divisions: 32,
        window: [0.25, 0.75],
    };
    let r = convergence_study(&unit, &setup, &[0.5]).unwrap();
    assert!(r.relative_errors[0] < 1e-3, "{:?}", r.relative_errors);
}
