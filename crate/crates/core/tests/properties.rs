mod common;

use common::{random_form, random_instance, random_section};
use jetmech::continuum::{green_strain, DisplacementField};
use jetmech::dynamics::{dstar, lagrange_bracket};
use jetmech::jet::{immersion_rank_check, prolong_variation, ParameterGrid, SampledSection, Variation};
use jetmech::noether::{
    fundamental_vector_field, noether_current, stress_energy_tensor, TraceConvention,
};
use jetmech::numeric::so3_exp;
use jetmech::rigidbody::{hat, vee, Iso3Element};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;
use rand::{rngs::StdRng, SeedableRng};

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-4.0..4.0f64).prop_map(Vector3::from)
}

fn element() -> impl Strategy<Value = Iso3Element<f64>> {
    (vec3(), vec3()).prop_map(|(w, u)| Iso3Element::from_exp(&w, u))
}

fn gap(a: &Iso3Element<f64>, b: &Iso3Element<f64>) -> f64 {
    (a.rotation() - b.rotation()).amax().max((a.translation() - b.translation()).amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn so3_exp_is_a_rotation(w in vec3()) {
        let r = so3_exp(&w);
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() <= 1e-13);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-13);
        prop_assert!((so3_exp(&w) * so3_exp(&-w) - Matrix3::identity()).amax() <= 1e-14);
    }

    #[test]
    fn hat_is_the_cross_product(w in vec3(), x in vec3()) {
        prop_assert!((hat(&w) * x - w.cross(&x)).amax() <= 1e-15 * (1.0 + w.amax() * x.amax()));
        prop_assert_eq!(vee(&hat(&w)).unwrap(), w);
    }

    #[test]
    fn iso3_group_axioms(a in element(), b in element(), c in element()) {
        prop_assert!(gap(&a.compose(&b).compose(&c), &a.compose(&b.compose(&c))) <= 1e-12);
        prop_assert!(gap(&a.compose(&a.inverse()), &Iso3Element::identity()) <= 1e-13);
        prop_assert!(gap(&a.inverse().compose(&a), &Iso3Element::identity()) <= 1e-13);
        prop_assert!((a.compose(&b).homogeneous() - a.homogeneous() * b.homogeneous()).amax() <= 1e-13);
    }

    #[test]
    fn split_identity_holds_nodewise(seed in any::<u64>(), m in 1usize..4, p in 1usize..4) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed), m, p);
        let pi = inst.phi.momentum_field(&inst.section).unwrap();
        for conv in [TraceConvention::Half, TraceConvention::Full] {
            let j = noether_current(&inst.phi, &inst.section, &inst.variation(), conv).unwrap();
            let t = stress_energy_tensor(&inst.phi, &inst.section, conv).unwrap();
            for n in 0..j.len() {
                let split = &t[n] * &inst.da[n] + pi[n].tr_mul(&inst.dxbar[n]);
                let scale = 1.0 + j[n].amax();
                prop_assert!((&j[n] - split).amax() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn stress_energy_trace_law(seed in any::<u64>(), m in 1usize..4, p in 1usize..4) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed), m, p);
        let pi = inst.phi.momentum_field(&inst.section).unwrap();
        let t = stress_energy_tensor(&inst.phi, &inst.section, TraceConvention::Half).unwrap();
        for n in 0..t.len() {
            let k = pi[n].dot(&inst.section.xdot_field()[n]);
            let expected = (1.0 - p as f64 / 2.0) * k;
            prop_assert!((t[n].trace() - expected).abs() <= 1e-12 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>(), m in 1usize..4, p in 1usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let phi = random_form(&mut rng, m, p);
        let s = random_section(&mut rng, m, p);
        for b in lagrange_bracket(&phi, &s).unwrap() {
            prop_assert_eq!(&b + b.transpose(), DMatrix::zeros(p, p));
        }
    }

    #[test]
    fn dstar_is_additive(seed in any::<u64>(), m in 1usize..4, p in 1usize..3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (f1, f2) = (random_form(&mut rng, m, p), random_form(&mut rng, m, p));
        let s = random_section(&mut rng, m, p);
        let (d1, d2) = (dstar(&f1, &s).unwrap(), dstar(&f2, &s).unwrap());
        let sum = dstar(&f1.sum(&f2), &s).unwrap();
        for n in 0..sum.len() {
            let scale = 1.0 + d1[n].amax() + d2[n].amax();
            prop_assert!((&sum[n] - (&d1[n] + &d2[n])).amax() <= 1e-13 * scale);
        }
    }

    #[test]
    fn prolong_variation_is_linear(seed in any::<u64>(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let grid = random_section(&mut rng, 2, 2).grid().clone();
        let field = |k: f64| grid.sample(|a| DVector::from_vec(vec![(k * a[0]).sin() * a[1], a[0] * a[0] + k]));
        let u = Variation::vertical(&grid, field(1.3)).unwrap();
        let v = Variation::new(&grid, grid.sample(|a| DVector::from_vec(vec![a[1], 1.0])), field(-0.7)).unwrap();
        let lhs = prolong_variation(&u.combine(alpha, &v, beta).unwrap(), &grid).unwrap();
        let rhs = prolong_variation(&u, &grid).unwrap().combine(alpha, &prolong_variation(&v, &grid).unwrap(), beta).unwrap();
        let (l, r) = (lhs.dxdot_field.unwrap(), rhs.dxdot_field.unwrap());
        for n in 0..l.len() {
            prop_assert!((&l[n] - &r[n]).amax() <= 1e-12 * (1.0 + r[n].amax()));
        }
    }

    #[test]
    fn rank_check_is_reparameterization_invariant(seed in any::<u64>(), c in prop::array::uniform4(-2.0..2.0f64)) {
        let mut reparam = DMatrix::from_row_slice(2, 2, &c);
        if reparam.determinant().abs() < 0.1 {
            reparam += DMatrix::identity(2, 2) * 2.0;
        }
        let s = random_section(&mut StdRng::seed_from_u64(seed), 3, 2);
        let moved = SampledSection::new(
            s.grid().clone(),
            s.x_field().to_vec(),
            s.xdot_field().iter().map(|d| d * &reparam).collect(),
        )
        .unwrap();
        prop_assert_eq!(immersion_rank_check(&s).unwrap(), immersion_rank_check(&moved).unwrap());
    }

    #[test]
    fn fundamental_vector_field_is_linear(g1 in vec3(), g2 in vec3(), x in vec3()) {
        let (g1, g2) = (g1.normalize(), g2.normalize());
        let action = |g: &DVector<f64>, a: &DVector<f64>, x: &DVector<f64>| {
            let r = so3_exp(&Vector3::new(g[0], g[1], g[2]));
            (a.clone(), DVector::from_column_slice((r * Vector3::new(x[0], x[1], x[2])).as_slice()))
        };
        let (a, x) = (DVector::from_element(1, 0.0), DVector::from_column_slice(x.as_slice()));
        let field = |g: Vector3<f64>| fundamental_vector_field(action, &DVector::from_column_slice(g.as_slice()), &a, &x).unwrap().1;
        let lhs = field(g1 * 0.6 + g2 * 0.4);
        let rhs = field(g1) * 0.6 + field(g2) * 0.4;
        prop_assert!((lhs - rhs).amax() <= 1e-8 * (1.0 + x.amax()));
    }

    #[test]
    fn strain_is_symmetric_and_rigid_invariant(w in vec3(), u in vec3(), d in prop::array::uniform9(-0.3..0.3f64)) {
        let grid = ParameterGrid::new(vec![-1.0; 3], vec![1.0; 3], vec![4, 4, 4]).unwrap();
        let r = so3_exp(&w);
        let r = DMatrix::from_iterator(3, 3, r.iter().copied());
        let shift = DVector::from_column_slice(u.as_slice());
        let rigid = DisplacementField::from_deformation(grid.clone(), |x| &r * x + &shift).unwrap();
        for e in green_strain(&rigid, &DMatrix::identity(3, 3)).unwrap() {
            prop_assert!(e.amax() <= 1e-10);
        }
        let a = DMatrix::identity(3, 3) + DMatrix::from_row_slice(3, 3, &d);
        let general = DisplacementField::from_deformation(grid, |x| &a * x.map(|v| v + 0.1 * v * v)).unwrap();
        for e in green_strain(&general, &DMatrix::identity(3, 3)).unwrap() {
            prop_assert_eq!(e.transpose(), e);
        }
    }
}
