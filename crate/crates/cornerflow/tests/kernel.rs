use cornerflow::geometry::{reflect, Edge, LatticeIndex, Point, Reflection};
use cornerflow::greens::ShellPolicy;
use cornerflow::kernel::{
    combined_kernel, kernel_combination, stream_function, u1_bracket, u1_shell_increments,
    velocity_dense, velocity_from_stream, KernelConfig, ParticleField, ParticleSolver,
    VelocitySample, STREAM_EXTENSION,
};
use cornerflow::presets::Preset;
use cornerflow::transport::init_particles;
use proptest::prelude::*;

fn dense(x: Point) -> VelocitySample {
    velocity_dense(x, &Preset::SinPatch, &KernelConfig::default()).unwrap()
}

#[test]
fn zero_field_and_origin_give_zero_velocity() {
    let zero = |_: Point| 0.0;
    let v = velocity_dense(Point::new(0.2, 0.5), &zero, &KernelConfig::default()).unwrap();
    assert_eq!((v.u1, v.u2), (0.0, 0.0));
    let v = dense(Point::ORIGIN);
    assert_eq!((v.u1, v.u2), (0.0, 0.0));
}

#[test]
fn u1_vanishes_exactly_on_the_axis() {
    for x2 in [0.3, 0.9] {
        assert_eq!(dense(Point::new(0.0, x2)).u1, 0.0);
    }
}

#[test]
fn mirror_point_flips_u1_only() {
    let a = dense(Point::new(0.25, 0.6));
    let b = dense(Point::new(-0.25, 0.6));
    assert_eq!((a.u1, a.u2), (-b.u1, b.u2));
}

#[test]
fn no_flow_through_the_half_domain_edges() {
    let mut worst: f64 = 0.0;
    let mut umax: f64 = 0.0;
    for edge in [Edge::LowerRight, Edge::UpperRight] {
        for i in 1..=10 {
            let v = dense(edge.at(i as f64 / 11.0));
            let n = edge.outward_normal();
            worst = worst.max((v.u1 * n.x1 + v.u2 * n.x2).abs());
            umax = umax.max(v.norm());
        }
    }
    assert!(umax > 0.0);
    assert!(worst <= 1e-4 * umax, "{worst} vs {umax}");
}

#[test]
fn divergence_free_by_central_differences() {
    let h = 1e-4;
    let pts = [
        Point::new(0.2, 0.5),
        Point::new(0.1, 0.9),
        Point::new(0.35, 0.7),
    ];
    let mut umax: f64 = 0.0;
    let mut div_max: f64 = 0.0;
    for x in pts {
        let e1 = Point::new(h, 0.0);
        let e2 = Point::new(0.0, h);
        let d1 = (dense(x + e1).u1 - dense(x - e1).u1) / (2.0 * h);
        let d2 = (dense(x + e2).u2 - dense(x - e2).u2) / (2.0 * h);
        div_max = div_max.max((d1 + d2).abs());
        umax = umax.max(dense(x).norm());
    }
    assert!(div_max <= 1e-3 * umax, "{div_max} vs {umax}");
}

#[test]
fn velocity_matches_differences_of_the_stream_function() {
    // (0.1, 0.1) lies on the lower-right edge: the vertical differences
    // straddle it and use the odd continuation of ψ.
    let cfg = KernelConfig::default();
    for x in [Point::new(0.2, 0.5), Point::new(0.1, 0.1)] {
        let d = dense(x);
        let f = velocity_from_stream(x, &Preset::SinPatch, &cfg, 1e-3).unwrap();
        let scale = d.norm();
        assert!((d.u1 - f.u1).abs() <= 1e-4 * scale, "{d:?} {f:?}");
        assert!((d.u2 - f.u2).abs() <= 1e-4 * scale, "{d:?} {f:?}");
    }
}

#[test]
fn stream_function_is_odd() {
    let cfg = KernelConfig::default();
    let x = Point::new(0.3, 0.8);
    let a = stream_function(x, &Preset::SinPatch, &cfg).unwrap();
    let b = stream_function(reflect(x, Reflection::Tilde), &Preset::SinPatch, &cfg).unwrap();
    assert!(a != 0.0);
    assert!((a + b).abs() < 1e-8, "{a} {b}");
}

#[test]
fn stream_function_continues_oddly_across_edges() {
    let cfg = KernelConfig::default();
    let inside = Point::from_unit_square(0.4, 0.05);
    let outside = Point::from_unit_square(0.4, -0.05);
    let a = stream_function(inside, &Preset::SinPatch, &cfg).unwrap();
    let b = stream_function(outside, &Preset::SinPatch, &cfg).unwrap();
    assert!((a + b).abs() <= 1e-13 * a.abs(), "{a} {b}");
    let far = Point::from_unit_square(0.4, -STREAM_EXTENSION - 0.01);
    assert!(stream_function(far, &Preset::SinPatch, &cfg).is_err());
}

#[test]
fn particles_agree_with_dense_quadrature() {
    let h = 1.0 / 64.0;
    let set = init_particles(Preset::SinPatch, h).unwrap();
    let field = ParticleField::from_set(&set, &KernelConfig::for_mesh(h)).unwrap();
    for x in [
        Point::new(0.2, 0.5),
        Point::new(0.1, 0.3),
        Point::new(0.3, 0.9),
        Point::new(0.15, 1.1),
        Point::new(0.4, 0.7),
    ] {
        let p = field.velocity(x).unwrap();
        let d = dense(x);
        let err = ((p.u1 - d.u1).powi(2) + (p.u2 - d.u2).powi(2)).sqrt();
        assert!(err <= 0.02 * d.norm(), "{x:?}: {p:?} vs {d:?}");
    }
}

#[test]
fn tree_and_direct_particle_solvers_agree() {
    let h = 1.0 / 32.0;
    let set = init_particles(Preset::RampPatch, h).unwrap();
    let cfg = KernelConfig::for_mesh(h);
    let tree = ParticleField::from_set(&set, &cfg).unwrap();
    let direct = ParticleField::from_set(
        &set,
        &KernelConfig {
            particle_solver: ParticleSolver::Direct,
            ..cfg
        },
    )
    .unwrap();
    assert!(tree.uses_tree() && !direct.uses_tree());
    for x in [
        Point::new(0.05, 0.2),
        Point::new(0.3, 0.6),
        Point::new(0.5, 0.9),
    ] {
        let (a, b) = (tree.velocity(x).unwrap(), direct.velocity(x).unwrap());
        assert!(
            (a.u1 - b.u1).abs() < 2e-3 * b.norm() && (a.u2 - b.u2).abs() < 2e-3 * b.norm(),
            "{a:?} {b:?}"
        );
    }
}

#[test]
fn combined_kernel_is_stable_when_r_max_doubles() {
    let (x, y) = (Point::new(0.2, 0.3), Point::new(0.5, 0.7));
    let p = ShellPolicy::default();
    let a = combined_kernel(x, y, p).unwrap();
    let b = combined_kernel(
        x,
        y,
        ShellPolicy {
            r_max: 2 * p.r_max,
            ..p
        },
    )
    .unwrap();
    assert!((a - b).abs() < p.tol, "{a} {b}");
}

#[test]
fn u1_increments_decay_and_vanish_on_the_axis() {
    let inc = u1_shell_increments(Point::new(0.2, 0.3), Point::new(0.5, 0.7), 32).unwrap();
    assert!(inc[1..].iter().all(|v| *v != 0.0));
    assert!(inc[32].abs() < inc[4].abs() * (4.0f64 / 32.0).powi(3));
    let axis = u1_shell_increments(Point::new(0.0, 0.5), Point::new(0.3, 0.6), 16).unwrap();
    assert!(axis.iter().all(|v| *v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_cancels_on_the_axis(x2 in 0.05f64..1.35, xi in 0.05f64..0.95, eta in 0.05f64..0.95,
                                   n1 in -4i32..5, n2 in -4i32..5) {
        let y = Point::from_unit_square(xi, eta.min(xi));
        let v = u1_bracket(Point::new(0.0, x2), y, LatticeIndex::new(n1, n2));
        if let Ok(v) = v {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn bracket_is_four_x1_times_the_combination(x1 in 0.02f64..0.5, x2 in 0.3f64..1.0,
                                                 xi in 0.1f64..0.9, eta in 0.05f64..0.5,
                                                 n1 in -3i32..4, n2 in -3i32..4) {
        let x = Point::new(x1, x2);
        let y = Point::from_unit_square(xi, eta.min(xi));
        let n = LatticeIndex::new(n1, n2);
        if let (Ok(b), Ok(k)) = (u1_bracket(x, y, n), kernel_combination(x, y, n)) {
            prop_assert!((b - 4.0 * x1 * k).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {}", b, 4.0 * x1 * k);
        }
    }
}
