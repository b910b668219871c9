//! `selftest`: run the library's invariant suite and print one pass/fail
//! row per check. Exit status is nonzero when any check fails. The output
//! carries no timings, so a fixed seed reproduces it byte for byte.

use anyhow::{bail, Result};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hypernest::gcn;
use hypernest::group::{
    adapted_gram_schmidt, axis_decompose, origin_boost, polar_decompose, random_lorentz_rng,
    rotation_embed, LorentzMatrix,
};
use hypernest::lorentz::{
    exp_map, frechet_mean_uniform, geodesic_distance, log_map, lorentz_inner, random_point,
    random_tangent, tangent_gap, Point,
};
use hypernest::nested::{
    conjugated_action, embed, project, reconstruction_loss, stack_project,
    stack_project_closed_form, NestingLevel, NestingStack,
};
use hypernest::opt::{minimize, OptimizerConfig, Param};

type Check = (&'static str, fn(&mut ChaCha8Rng) -> Result<(), String>);

pub fn run(seed: u64, quiet: bool) -> Result<()> {
    let checks: Vec<Check> = vec![
        ("geometry/point-invariants", check_point_invariants),
        ("geometry/exp-log-round-trip", check_exp_log),
        ("geometry/distance-symmetry-triangle", check_distances),
        ("geometry/log-orthogonality", check_log_orthogonal),
        ("geometry/frechet-mean-symmetry", check_frechet),
        ("group/closure-and-inverse", check_group_closure),
        ("group/transitivity", check_transitivity),
        ("group/isotropy", check_isotropy),
        ("group/gram-schmidt-idempotent", check_gs_idempotent),
        ("group/axis-decomposition", check_axis),
        ("group/polar-decomposition", check_polar),
        ("nested/left-inverse", check_left_inverse),
        ("nested/isometry-at-zero-offset", check_isometry),
        ("nested/equivariance", check_equivariance),
        ("nested/closed-form-projection", check_closed_form),
        ("nested/loss-isometry-invariance", check_loss_invariance),
        ("network/layer-constraint", check_layer_constraint),
        ("network/tangent-relu-idempotent", check_relu_idempotent),
        ("optimizer/monotone-descent", check_optimizer),
    ];

    let mut failures = 0usize;
    println!("{:<40} result", "check");
    for (name, check) in &checks {
        //每 check gets its own deterministic stream.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fxhash(name));
        match check(&mut rng) {
            Ok(()) => println!("{name:<40} PASS"),
            Err(msg) => {
                failures += 1;
                println!("{name:<40} FAIL  {msg}");
            }
        }
    }
    if failures == 0 {
        if !quiet {
            println!("all {} checks passed", checks.len());
        }
        Ok(())
    } else {
        bail!("{failures} of {} checks failed", checks.len());
    }
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

fn check_point_invariants(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let p = random_point(5, 5.0, rng);
        if p.constraint_residual() > 1e-9 || p.ambient()[0] < 1.0 - 1e-9 {
            return Err(format!("residual {}", p.constraint_residual()));
        }
    }
    Ok(())
}

fn check_exp_log(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let x = random_point(5, 5.0, rng);
        let y = random_point(5, 5.0, rng);
        let v = log_map(&x, &y).map_err(|e| e.to_string())?;
        let back = exp_map(&x, &v).map_err(|e| e.to_string())?;
        let gap = tangent_gap(&y, &back);
        if gap > 1e-8 {
            return Err(format!("round-trip gap {gap:.2e}"));
        }
    }
    Ok(())
}

fn check_distances(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let a = random_point(4, 5.0, rng);
        let b = random_point(4, 5.0, rng);
        let c = random_point(4, 5.0, rng);
        let ab = geodesic_distance(&a, &b).unwrap();
        let ba = geodesic_distance(&b, &a).unwrap();
        if (ab - ba).abs() > 1e-8 {
            return Err("symmetry violated".into());
        }
        let bc = geodesic_distance(&b, &c).unwrap();
        let ac = geodesic_distance(&a, &c).unwrap();
        if ac > ab + bc + 1e-8 {
            return Err("triangle inequality violated".into());
        }
    }
    Ok(())
}

fn check_log_orthogonal(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let x = random_point(4, 5.0, rng);
        let y = random_point(4, 5.0, rng);
        let v = log_map(&x, &y).unwrap();
        let pairing = lorentz_inner(x.ambient(), v.components()).unwrap().abs();
        if pairing > 1e-9 {
            return Err(format!("pairing {pairing:.2e}"));
        }
    }
    Ok(())
}

fn check_frechet(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let t: f64 = rng.gen_range(0.2..1.2);
    let a = Point::new(DVector::from_row_slice(&[t.cosh(), t.sinh(), 0.0])).unwrap();
    let b = Point::new(DVector::from_row_slice(&[t.cosh(), -t.sinh(), 0.0])).unwrap();
    let mean = frechet_mean_uniform(&[a, b]).map_err(|e| e.to_string())?;
    let gap = geodesic_distance(&mean, &Point::origin(2)).unwrap();
    if gap > 1e-8 {
        return Err(format!("symmetric mean off origin by {gap:.2e}"));
    }
    Ok(())
}

fn check_group_closure(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let a = random_lorentz_rng(3, rng);
        let b = random_lorentz_rng(3, rng);
        let c = a.compose(&b).unwrap();
        if c.invariant_residual() > 1e-9 {
            return Err("closure failed".into());
        }
        let prod = a.inverse().compose(&a).unwrap();
        let dev = (prod.matrix() - nalgebra::DMatrix::identity(4, 4)).amax();
        if dev > 1e-9 {
            return Err(format!("inverse residual {dev:.2e}"));
        }
    }
    Ok(())
}

fn check_transitivity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let x = random_point(3, 4.0, rng);
        let y = random_point(3, 4.0, rng);
        let carry = origin_boost(&y)
            .compose(&origin_boost(&x).inverse())
            .unwrap();
        let image = carry.apply(&x).unwrap();
        if (image.ambient() - y.ambient()).norm() > 1e-9 {
            return Err("transitivity failed".into());
        }
    }
    Ok(())
}

fn check_isotropy(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let r = hypernest::group::random_rotation(3, rng);
        let a = rotation_embed(&r).map_err(|e| e.to_string())?;
        let image = a.apply(&Point::origin(3)).unwrap();
        if image.ambient() != Point::origin(3).ambient() {
            return Err("rotation moved the origin".into());
        }
    }
    Ok(())
}

fn check_gs_idempotent(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..20 {
        let a = random_lorentz_rng(3, rng);
        let again = adapted_gram_schmidt(a.matrix()).map_err(|e| e.to_string())?;
        if (again.matrix() - a.matrix()).amax() > 1e-10 {
            return Err("not idempotent".into());
        }
    }
    Ok(())
}

fn check_axis(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let a = random_lorentz_rng(3, rng);
        let d = axis_decompose(&a).map_err(|e| e.to_string())?;
        let dev = (d.recompose().matrix() - a.matrix()).amax();
        if dev > 1e-8 || d.alpha < 0.0 {
            return Err(format!("recomposition residual {dev:.2e}"));
        }
    }
    Ok(())
}

fn check_polar(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let a = random_lorentz_rng(3, rng);
        let (rot, boost) = polar_decompose(&a).map_err(|e| e.to_string())?;
        let back = rot.compose(&boost).unwrap();
        let dev = (back.matrix() - a.matrix()).amax();
        if dev > 1e-8 {
            return Err(format!("recomposition residual {dev:.2e}"));
        }
    }
    Ok(())
}

fn random_level(rng: &mut ChaCha8Rng, lower_dim: usize) -> NestingLevel {
    let lambda = random_lorentz_rng(lower_dim + 1, rng);
    let r: f64 = rng.sample(StandardNormal);
    NestingLevel::new(lambda, r).unwrap()
}

fn check_left_inverse(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let level = random_level(rng, 2);
        let x = random_point(2, 3.0, rng);
        let back = project(&level, &embed(&level, &x).unwrap()).unwrap();
        if tangent_gap(&x, &back) > 1e-9 {
            return Err("project(embed(x)) != x".into());
        }
    }
    Ok(())
}

fn check_isometry(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let lambda = random_lorentz_rng(3, rng);
        let level = NestingLevel::new(lambda, 0.0).unwrap();
        let x = random_point(2, 3.0, rng);
        let y = random_point(2, 3.0, rng);
        let d = geodesic_distance(&x, &y).unwrap();
        let du = geodesic_distance(&embed(&level, &x).unwrap(), &embed(&level, &y).unwrap())
            .unwrap();
        if (d - du).abs() > 1e-9 {
            return Err(format!("offset-0 embedding distorted by {:.2e}", (d - du).abs()));
        }
    }
    Ok(())
}

fn check_equivariance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let level = random_level(rng, 2);
        let r = random_lorentz_rng(2, rng);
        let x = random_point(2, 2.0, rng);
        let lhs = embed(&level, &r.apply(&x).unwrap()).unwrap();
        let rhs = conjugated_action(&level, &r, &embed(&level, &x).unwrap()).unwrap();
        if tangent_gap(&lhs, &rhs) > 1e-8 {
            return Err("equivariance violated".into());
        }
    }
    Ok(())
}

fn check_closed_form(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..30 {
        let stack = NestingStack::new(vec![random_level(rng, 3), random_level(rng, 2)]).unwrap();
        let x = random_point(4, 2.5, rng);
        let seq = stack_project(&stack, &x).unwrap();
        let closed = stack_project_closed_form(&stack, &x).unwrap();
        if tangent_gap(&seq, &closed) > 1e-9 {
            return Err("closed form disagrees".into());
        }
    }
    Ok(())
}

fn check_loss_invariance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let levels = vec![random_level(rng, 2)];
    let stack = NestingStack::new(levels.clone()).unwrap();
    let data: Vec<Point> = (0..12).map(|_| random_point(3, 2.0, rng)).collect();
    let loss = reconstruction_loss(&stack, &data).unwrap();
    let a = random_lorentz_rng(3, rng);
    let moved: Vec<Point> = data.iter().map(|p| a.apply(p).unwrap()).collect();
    let moved_level = NestingLevel::new(
        LorentzMatrix::new(a.matrix() * levels[0].lambda().matrix()).unwrap(),
        levels[0].r(),
    )
    .unwrap();
    let moved_loss =
        reconstruction_loss(&NestingStack::new(vec![moved_level]).unwrap(), &moved).unwrap();
    if (loss - moved_loss).abs() > 1e-8 {
        return Err(format!("loss changed by {:.2e}", (loss - moved_loss).abs()));
    }
    Ok(())
}

fn check_layer_constraint(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..50 {
        let layer = gcn::LayerParams::random(2, 4, rng);
        if layer.constraint_residual() > 1e-9 {
            return Err(format!("constraint residual {}", layer.constraint_residual()));
        }
    }
    Ok(())
}

fn check_relu_idempotent(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let x = random_point(3, 2.0, rng);
        let once = gcn::tangent_relu(&x);
        let twice = gcn::tangent_relu(&once);
        if (once.ambient() - twice.ambient()).norm() > 1e-10 {
            return Err("tangent ReLU not idempotent".into());
        }
    }
    Ok(())
}

fn check_optimizer(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let target: f64 = rng.gen_range(-3.0..3.0);
    let f = move |p: &[Param]| {
        let s = p[0].scalar().unwrap();
        (s - target) * (s - target)
    };
    let result = minimize(f, vec![Param::Scalar(10.0)], &OptimizerConfig::default())
        .map_err(|e| e.to_string())?;
    for pair in result.trace.windows(2) {
        if pair[1].objective > pair[0].objective + 1e-15 {
            return Err("objective increased".into());
        }
    }
    if (result.params[0].scalar().unwrap() - target).abs() > 1e-8 {
        return Err("quadratic minimum missed".into());
    }
    let _ = random_tangent(&Point::origin(2), 1.0, rng);
    Ok(())
}
