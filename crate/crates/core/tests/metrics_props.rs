use deformstream_core::geom::Vec3;
use deformstream_core::mesh::TriangleMesh;
use deformstream_core::metrics::{bd_rate, hausdorff, hausdorff_points, RDCurve, RdPoint};
use deformstream_core::Mesh;
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = Vec<Vec3<f64>>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..200)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

fn brute(a: &[Vec3<f64>], b: &[Vec3<f64>]) -> f64 {
    let directed = |a: &[Vec3<f64>], b: &[Vec3<f64>]| {
        a.iter()
            .map(|p| b.iter().map(|q| (p.x() - q.x()).powi(2) + (p.y() - q.y()).powi(2) + (p.z() - q.z()).powi(2)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a)).sqrt()
}

fn curve_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (1e4f64..1e6, prop::collection::vec((1.2f64..3.0, 0.6f64..0.95), 4..8)).prop_map(|(r0, steps)| {
        let (mut r, mut d) = (r0, 0.1);
        steps
            .into_iter()
            .map(|(rs, ds)| {
                r *= rs;
                d *= ds;
                (r, d)
            })
            .collect()
    })
}

fn curve(points: &[(f64, f64)], scale: f64) -> RDCurve {
    RDCurve::new(points.iter().map(|&(r, d)| RdPoint { bitrate_bps: r * scale, distortion: d }).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_axioms_and_brute_force(a in cloud(), b in cloud()) {
        let h = hausdorff_points(&a, &b).unwrap();
        prop_assert_eq!(h, brute(&a, &b));
        prop_assert_eq!(h, hausdorff_points(&b, &a).unwrap());
        prop_assert_eq!(hausdorff_points(&a, &a).unwrap(), 0.0);
        prop_assert!(h >= 0.0);
        let ma: Mesh = TriangleMesh::new(a.clone(), Vec::new()).unwrap();
        let mb: Mesh = TriangleMesh::new(b.clone(), Vec::new()).unwrap();
        prop_assert_eq!(hausdorff(&ma, &mb).unwrap(), h);
    }

    #[test]
    fn bd_rate_of_scaled_curves(points in curve_strategy(), k in 0.2f64..5.0) {
        let a = curve(&points, 1.0);
        let b = curve(&points, k);
        prop_assert!(bd_rate(&a, &a).unwrap().abs() < 1e-9);
        let ab = bd_rate(&a, &b).unwrap();
        let ba = bd_rate(&b, &a).unwrap();
        prop_assert!((ab - (k - 1.0) * 100.0).abs() < 1e-6, "{} vs {}", ab, (k - 1.0) * 100.0);
        prop_assert!((ab + ba / (1.0 + ba / 100.0)).abs() < 1e-6);
    }
}
