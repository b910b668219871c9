//! Property tests over arbitrary (not just seeded-random) inputs.

use nalgebra::DVector;
use proptest::prelude::*;

use hypernest::lorentz::{
    exp_map, from_poincare, geodesic_distance, lorentz_inner, tangent_gap, to_poincare, Point,
    Tangent,
};

fn spatial_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

proptest! {
    // Lifting any finite spatial vector lands exactly on the sheet, and the
    // Poincare conversion round-trips.
    #[test]
    fn lift_and_poincare_round_trip(spatial in spatial_vec(3)) {
        let p = Point::lift(&DVector::from_vec(spatial)).unwrap();
        prop_assert!(p.constraint_residual() < 1e-9);
        let back = from_poincare(&to_poincare(&p)).unwrap();
        prop_assert!(tangent_gap(&p, &back) < 1e-10);
    }

    // Triangle inequality and symmetry for lifted triples.
    #[test]
    fn metric_axioms(a in spatial_vec(2), b in spatial_vec(2), c in spatial_vec(2)) {
        let pa = Point::lift(&DVector::from_vec(a)).unwrap();
        let pb = Point::lift(&DVector::from_vec(b)).unwrap();
        let pc = Point::lift(&DVector::from_vec(c)).unwrap();
        let ab = geodesic_distance(&pa, &pb).unwrap();
        let ba = geodesic_distance(&pb, &pa).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        let bc = geodesic_distance(&pb, &pc).unwrap();
        let ac = geodesic_distance(&pa, &pc).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    // Geodesics emanating from a lifted point: exp lands on the sheet at
    // the right distance, with the log recovering the tangent.
    #[test]
    fn exp_distance_matches_tangent_norm(
        base in spatial_vec(2),
        dir in spatial_vec(3),
    ) {
        let x = Point::lift(&DVector::from_vec(base)).unwrap();
        // Project an arbitrary ambient vector onto the tangent space at x.
        let raw = DVector::from_vec(dir);
        let pairing = lorentz_inner(x.ambient(), &raw).unwrap();
        let comp = raw + x.ambient() * pairing;
        let v = Tangent::new(x.clone(), comp).unwrap();
        prop_assume!(v.norm() > 1e-6 && v.norm() < 6.0);
        let y = exp_map(&x, &v).unwrap();
        prop_assert!(y.constraint_residual() < 1e-8 * (1.0 + y.ambient().norm_squared()));
        let d = geodesic_distance(&x, &y).unwrap();
        prop_assert!((d - v.norm()).abs() < 1e-7, "distance {} vs norm {}", d, v.norm());
    }
}
