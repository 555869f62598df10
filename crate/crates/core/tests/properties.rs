use canal_core::canal_model::{build_canal, CanalConfig};
use canal_core::demo_pipeline::{dtw_path, spline_smooth, AlignedPair, Pose};
use canal_core::geometry::{angle_between, project_ground, rotate_about, slerp_unit, UnitQuat, Vec3, Z_UP};
use canal_core::input_mapping::{map_disk, Classification, DiskClass, Side, UserFrame};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter_map("near zero", |v| v.try_normalize().filter(|_| v.norm() > 0.1))
}

fn quat() -> impl Strategy<Value = UnitQuat> {
    (unit(), -3.1..3.1f64).prop_map(|(a, t)| UnitQuat::from_axis_angle(a, t).unwrap())
}

/// (e, x, y) with x, y an orthonormal pair spanning the plane ⟂ e.
fn disk_frame() -> impl Strategy<Value = (Vec3, Vec3, Vec3)> {
    (unit(), unit()).prop_filter_map("parallel", |(e, h)| {
        let x = e.cross(h).try_normalize().filter(|_| e.cross(h).norm() > 0.1)?;
        Some((e, x, e.cross(x)))
    })
}

fn user() -> impl Strategy<Value = UserFrame> {
    (0.0..std::f64::consts::TAU, vec3(1.0))
        .prop_map(|(yaw, o)| UserFrame::facing(Vec3::new(o.x, o.y, 0.0), Vec3::new(yaw.cos(), yaw.sin(), 0.0)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn slerp_covers_angle_proportionally(a in quat(), b in quat(), t in 0.0..1.0f64) {
        let total = a.angle_to(b);
        prop_assume!(total < 3.0);
        let m = slerp_unit(a, b, t);
        prop_assert!((a.angle_to(m) - t * total).abs() < 1e-7);
        prop_assert!((m.angle_to(b) - (1.0 - t) * total).abs() < 1e-7);
    }

    #[test]
    fn ground_projection_idempotent(v in vec3(10.0)) {
        let p = project_ground(v);
        prop_assert_eq!(project_ground(p), p);
        prop_assert_eq!(p.z, 0.0);
    }

    #[test]
    fn angle_symmetric_and_scale_invariant(u in unit(), v in unit(), k in 0.1..10.0f64) {
        let a = angle_between(u, v).unwrap();
        prop_assert!((a - angle_between(v, u).unwrap()).abs() < 1e-12);
        prop_assert!((a - angle_between(u * k, v).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn dtw_never_worse_than_diagonal(pts in proptest::collection::vec((vec3(1.0), vec3(1.0)), 1..12)) {
        let (a, b): (Vec<Vec3>, Vec<Vec3>) = pts.into_iter().unzip();
        let diag: f64 = a.iter().zip(&b).map(|(p, q)| p.distance(*q)).sum();
        prop_assert!(dtw_path(&a, &b).unwrap().cost <= diag + 1e-12);
    }

    #[test]
    fn yaw_equivariance((e, x, y) in disk_frame(), u in user(), d in vec3(1.0), yaw in 0.0..std::f64::consts::TAU) {
        let rot = |p: Vec3| rotate_about(p, Z_UP, yaw);
        let ru = UserFrame::facing(rot(u.origin), rot(u.j_y)).unwrap();
        for mode in [Classification::Prose, Classification::Literal] {
            let base = map_disk(e, x, y, d, &u, mode);
            let turned = map_disk(rot(e), rot(x), rot(y), rot(d), &ru, mode);
            match (base, turned) {
                (Ok(m), Ok(r)) => {
                    // Skip configurations sitting on a decision boundary.
                    prop_assume!(m.class == r.class);
                    prop_assert_eq!((m.d_x, m.d_y), (r.d_x, r.d_y));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assume!(false),
            }
        }
    }

    #[test]
    fn outputs_are_drawn_from_disk_axes((e, x, y) in disk_frame(), u in user(), d in vec3(1.0)) {
        if let Ok(m) = map_disk(e, x, y, d, &u, Classification::Prose) {
            prop_assert!(m.a_x == x || m.a_x == y);
            prop_assert!(m.a_y == x || m.a_y == y);
            if m.class != DiskClass::NearHorizontal {
                prop_assert!(m.a_x.dot(m.a_y).abs() < 1e-6);
            }
            prop_assert!(m.d_x.abs() == 1.0 && m.d_y.abs() == 1.0);
        }
    }

    #[test]
    fn sideways_mirror_flips_dx((e, x, y) in disk_frame(), u in user(), rel in vec3(2.0)) {
        let d = u.origin + rel;
        let m = map_disk(e, x, y, d, &u, Classification::Prose);
        if let Ok(m @ canal_core::input_mapping::MappedCorrection { class: DiskClass::NearVerticalSideways(side), .. }) = m {
            let px = rel.dot(u.j_x);
            prop_assume!(px != 0.0);
            let mirrored = u.origin + rel - u.j_x * (2.0 * px);
            let r = map_disk(e, x, y, mirrored, &u, Classification::Prose).unwrap();
            let other = if side == Side::Left { Side::Right } else { Side::Left };
            prop_assert_eq!(r.class, DiskClass::NearVerticalSideways(other));
            prop_assert_eq!((r.a_x, r.a_y, r.d_y, r.d_x), (m.a_x, m.a_y, m.d_y, -m.d_x));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spline_is_rigid_equivariant(axis in unit(), angle in -3.0..3.0f64, shift in vec3(2.0), seed in 0u64..1000) {
        let pts: Vec<Vec3> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.1;
                Vec3::new(t, (t * 3.0 + seed as f64).sin() * 0.1, (t * 2.0).cos() * 0.05)
            })
            .collect();
        let q = UnitQuat::from_axis_angle(axis, angle).unwrap();
        let moved: Vec<Vec3> = pts.iter().map(|&p| q.rotate(p) + shift).collect();
        let a = spline_smooth(&pts, 1e-3).unwrap();
        let b = spline_smooth(&moved, 1e-3).unwrap();
        for (p, m) in a.iter().zip(&b) {
            prop_assert!((q.rotate(*p) + shift).max_abs_diff(*m) < 1e-8);
        }
    }

    #[test]
    fn canal_contains_both_demonstrations(wiggle in 0.0..0.05f64, gap in 0.03..0.2f64) {
        let n = 60;
        let line = |off: f64| -> Vec<Pose> {
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    Pose::new(Vec3::new(t, off + wiggle * (t * 6.0).sin(), 0.3 * t), UnitQuat::IDENTITY)
                })
                .collect()
        };
        let pair = AlignedPair::new(line(0.0), line(gap)).unwrap();
        let canal = build_canal(&pair, &CanalConfig::default()).unwrap();
        canal.check(1e-9).unwrap();
        for s in 0..n {
            let ra = pair.a[s].position.distance(canal.d[s]);
            let rb = pair.b[s].position.distance(canal.d[s]);
            prop_assert!(ra <= canal.r[s] + 1e-12 && rb <= canal.r[s] + 1e-12);
        }
    }
}
