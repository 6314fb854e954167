use std::sync::OnceLock;

use proptest::prelude::*;
use surffv::exact::ExactSum;
use surffv::flux::{field_v, field_w, VectorField};
use surffv::geometry::FlatGeometry;
use surffv::quadrature::{quad_cell, TriangleRule};
use surffv::solver::{cfl_dt, first_order_traces, update};
use surffv::{
    icosphere_family, make_flux, CellField, CurvedScheme, Discretization, FlatScheme, FluxKind, StepContext, TriMesh,
    Vec3,
};

fn meshes() -> &'static [TriMesh] {
    static M: OnceLock<Vec<TriMesh>> = OnceLock::new();
    M.get_or_init(|| icosphere_family(0..=2).unwrap())
}

fn unit_point() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn flux_kind() -> impl Strategy<Value = FluxKind> {
    prop_oneof![
        Just(FluxKind::LinearW),
        Just(FluxKind::BurgersV),
        Just(FluxKind::TwoDim),
        Just(FluxKind::LinearV)
    ]
}

fn one_step(scheme: &dyn Discretization, kind: FluxKind, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mesh = scheme.mesh();
    let flux = make_flux(kind, (0.0, 1.0), None).unwrap();
    let areas = scheme.cell_areas(0.0).unwrap();
    let moments = scheme.edge_moments(&flux, 0.0, 0.0).unwrap();
    let dt = cfl_dt(&scheme.quality(0.0).unwrap(), &flux, 1.0, 1.0).unwrap();
    let ctx = StepContext {
        step: 1,
        t: 0.0,
        dt,
        areas_now: &areas,
        areas_next: &areas,
        moments: &moments,
    };
    let next = update(mesh, values, &first_order_traces(mesh, values), &ctx, &flux).unwrap();
    (next, areas)
}

fn weighted(areas: &[f64], v: impl Iterator<Item = f64>) -> f64 {
    areas.iter().zip(v).map(|(a, x)| a * x).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_in_fields_are_tangent(x in unit_point()) {
        prop_assert!(field_v(x).dot(x).abs() < 1e-13);
        prop_assert!(field_w(x).dot(x).abs() < 1e-13);
    }

    #[test]
    fn fields_match_their_stream_functions(x in unit_point()) {
        let tau = std::f64::consts::TAU;
        prop_assert!((field_v(x) - x.cross(Vec3::new(0.0, 0.0, tau))).norm() < 1e-13);
        prop_assert!((field_w(x) - x.cross(Vec3::new(0.0, tau, 0.0))).norm() < 1e-13);
        prop_assert!(VectorField::V.stream().is_some() && VectorField::W.stream().is_some());
    }

    #[test]
    fn one_step_conserves_mass(
        level in 0usize..3,
        kind in flux_kind(),
        seed in prop::collection::vec(0.0f64..1.0, 1280),
        curved in any::<bool>(),
    ) {
        let mesh = &meshes()[level];
        let values = &seed[..mesh.num_cells()];
        let (next, areas) = if curved {
            one_step(&CurvedScheme::stationary(mesh, 1.0), kind, values)
        } else {
            one_step(&FlatScheme::stationary(mesh, 1.0), kind, values)
        };
        let m0 = weighted(&areas, values.iter().copied());
        let m1 = weighted(&areas, next.iter().copied());
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0.abs().max(1.0), "{m0} -> {m1}");
    }

    #[test]
    fn one_step_contracts_and_stays_in_range(
        level in 0usize..3,
        kind in flux_kind(),
        a in prop::collection::vec(0.0f64..1.0, 1280),
        b in prop::collection::vec(0.0f64..1.0, 1280),
        curved in any::<bool>(),
    ) {
        let mesh = &meshes()[level];
        let (u, v) = (&a[..mesh.num_cells()], &b[..mesh.num_cells()]);
        let step = |x: &[f64]| if curved {
            one_step(&CurvedScheme::stationary(mesh, 1.0), kind, x)
        } else {
            one_step(&FlatScheme::stationary(mesh, 1.0), kind, x)
        };
        let ((u1, areas), (v1, _)) = (step(u), step(v));
        let before = weighted(&areas, u.iter().zip(v).map(|(p, q)| (p - q).abs()));
        let after = weighted(&areas, u1.iter().zip(&v1).map(|(p, q)| (p - q).abs()));
        prop_assert!(after <= before + 1e-13, "{before} -> {after}");
        let f = CellField::new(u.to_vec(), 0.0).unwrap();
        prop_assert!(u1.iter().all(|&x| x >= f.min() - 1e-13 && x <= f.max() + 1e-13));
    }

    #[test]
    fn degree_five_rule_is_exact_on_quintics(c in prop::collection::vec(-1.0f64..1.0, 6)) {
        // integrate x^i y^j with i + j ≤ 5 over the unit triangle: i! j! / (i + j + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let p = [Vec3::ZERO, Vec3::X, Vec3::Y];
        let rule = TriangleRule::degree5();
        for (k, (i, j)) in [(5, 0), (4, 1), (3, 2), (2, 3), (1, 4), (0, 5)].into_iter().enumerate() {
            let q = quad_cell(&rule, p, |x| c[k] * x.x.powi(i) * x.y.powi(j));
            let exact = c[k] * fact(i as u32) * fact(j as u32) / fact(i as u32 + j as u32 + 2);
            prop_assert!((q - exact).abs() < 1e-15, "{i} {j}: {q} vs {exact}");
        }
    }
}

#[test]
fn exact_curved_moments_balance_on_every_cell() {
    for mesh in meshes() {
        let flux = make_flux(FluxKind::TwoDim, (0.0, 1.0), None).unwrap();
        let m = CurvedScheme::stationary(mesh, 1.0)
            .edge_moments(&flux, 0.0, 0.0)
            .unwrap();
        assert!(m.exact);
        let mut acc = ExactSum::new();
        for k in 0..mesh.num_cells() {
            for term in 0..flux.terms.len() {
                acc.clear();
                for &e in &mesh.cell_edges()[k] {
                    let s = mesh.edge_sign(k, e);
                    let (hi, lo) = m.row(e)[term];
                    acc.add(s * hi);
                    acc.add(s * lo);
                }
                assert!(acc.is_zero(), "cell {k}, term {term}: {}", acc.value());
            }
        }
    }
}

#[test]
fn conormals_are_antisymmetric_and_bounded() {
    for mesh in meshes() {
        let g = FlatGeometry::compute(mesh, mesh.vertices()).unwrap();
        for e in &g.edges {
            assert_eq!(e.conormal_right, -e.conormal_left);
            let n = e.conormal_left.norm();
            assert!(n > 0.0 && n <= 1.0 + 1e-15);
        }
    }
}

#[test]
fn meshes_are_closed_spheres() {
    for mesh in meshes() {
        mesh.check_structure().unwrap();
        let chi = mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_cells() as i64;
        assert_eq!(chi, 2);
    }
}
