use cislunar_dmd::cr3bp::{self, CorrectionOptions, StateVector, SystemConstants};
use cislunar_dmd::validation::{self, Plane};
use cislunar_dmd::Error;
use proptest::prelude::*;

/// Double-double arithmetic: `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        let t = Dd::two_sum(self.1, o.1);
        let r = Dd::two_sum(s.0, s.1 + t.0);
        Dd::two_sum(r.0, r.1 + t.1)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.0 / o.0;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.0 / o.0;
        Dd::from(q1).add(Dd::from(q2)).add(Dd::from(q3))
    }

    fn sqrt(self) -> Dd {
        let s = Dd::from(self.0.sqrt());
        let r = self.sub(s.mul(s));
        s.add(r.div(Dd::from(2.0).mul(s)))
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

fn potential_dd(pos: [f64; 3], mu: f64) -> f64 {
    let [x, y, z] = pos.map(Dd::from);
    let mu = Dd::from(mu);
    let one = Dd::from(1.0);
    let d1 = x.add(mu);
    let d2 = x.sub(one).add(mu);
    let yz = y.mul(y).add(z.mul(z));
    let r1 = d1.mul(d1).add(yz).sqrt();
    let r2 = d2.mul(d2).add(yz).sqrt();
    let half = Dd::from(0.5);
    half.mul(x.mul(x).add(y.mul(y)))
        .add(one.sub(mu).div(r1))
        .add(mu.div(r2))
        .value()
}

fn halo() -> StateVector {
    StateVector::new(8.7592e-1, -1.5903e-26, 1.9175e-1, -2.9302e-14, 2.3080e-1, 7.36497e-14)
}

#[test]
fn two_body_limit_potential() {
    let c = SystemConstants::with_mu(0.0);
    assert_eq!(cr3bp::effective_potential([1.0, 0.0, 0.0], &c).unwrap(), 1.5);
    let s = StateVector::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    assert_eq!(cr3bp::jacobi_constant(&s, &c).unwrap(), 2.0);
}

#[test]
fn potential_matches_extended_precision() {
    let c = SystemConstants::default();
    for pos in [[0.5, 0.2, 0.1], [0.8759, -0.01, 0.19], [-0.7, 0.4, -0.3], [1.1, 0.05, 0.02]] {
        let got = cr3bp::effective_potential(pos, &c).unwrap();
        let want = potential_dd(pos, c.mu);
        assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.abs(), "{pos:?}: {got} vs {want}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let c = SystemConstants::default();
    for pos in [[0.5, 0.2, 0.1], [0.8759, -0.01, 0.19], [-0.7, 0.4, -0.3], [1.2, -0.3, 0.05]] {
        let g = cr3bp::potential_gradient(pos, &c).unwrap();
        for i in 0..3 {
            let h = 1e-5;
            let mut p = pos;
            let mut m = pos;
            p[i] += h;
            m[i] -= h;
            let fd = (cr3bp::effective_potential(p, &c).unwrap() - cr3bp::effective_potential(m, &c).unwrap()) / (2.0 * h);
            let scale = g[i].abs().max(1e-3);
            assert!((fd - g[i]).abs() / scale < 1e-8, "d/dx{i} at {pos:?}: {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn hessian_matches_gradient_differences() {
    let c = SystemConstants::default();
    let pos = [0.84, 0.07, 0.12];
    let h = cr3bp::potential_hessian(pos, &c).unwrap();
    for j in 0..3 {
        let step = 1e-6;
        let mut p = pos;
        let mut m = pos;
        p[j] += step;
        m[j] -= step;
        let gp = cr3bp::potential_gradient(p, &c).unwrap();
        let gm = cr3bp::potential_gradient(m, &c).unwrap();
        for i in 0..3 {
            let fd = (gp[i] - gm[i]) / (2.0 * step);
            assert!((fd - h[i][j]).abs() < 1e-6 * h[i][j].abs().max(1.0));
        }
    }
}

/// x-axis force balance, written out independently of the library.
fn axis_force(x: f64, mu: f64) -> f64 {
    let d1 = x + mu;
    let d2 = x - 1.0 + mu;
    x - (1.0 - mu) * d1 / d1.abs().powi(3) - mu * d2 / d2.abs().powi(3)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) < 0.0, "no bracket");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn collinear_points_are_equilibria() {
    let c = SystemConstants::default();
    let mu = c.mu;
    let brackets = [(0.5, 1.0 - mu - 1e-3), (1.0 - mu + 1e-3, 1.5), (-1.5, -mu - 0.1)];
    for (a, b) in brackets {
        let x = bisect(|x| axis_force(x, mu), a, b);
        let d = cr3bp::eom(&StateVector::new(x, 0.0, 0.0, 0.0, 0.0, 0.0), &c).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!(v.abs() < 1e-10, "component {i} at x = {x}: {v}");
        }
    }
}

#[test]
fn singular_positions_are_rejected() {
    let c = SystemConstants::default();
    let at_moon = StateVector::new(1.0 - c.mu, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert!(matches!(cr3bp::eom(&at_moon, &c), Err(Error::SingularPosition { .. })));
    let near_earth = StateVector::new(-c.mu + 5e-7, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert!(matches!(cr3bp::propagate(&near_earth, &c, 1.0, 0.1, 1e-10), Err(Error::SingularPosition { .. })));
}

#[test]
fn zero_duration_is_one_sample() {
    let c = SystemConstants::default();
    let tr = cr3bp::propagate(&halo(), &c, 0.0, 0.1, 1e-12).unwrap();
    assert_eq!(tr.len(), 1);
    assert_eq!(tr.samples[0], halo());
}

#[test]
fn grid_epochs_are_exact_multiples() {
    let c = SystemConstants::default();
    let dt = 0.1;
    let tr = cr3bp::propagate(&halo(), &c, 10.0, dt, 1e-10).unwrap();
    assert_eq!(tr.len(), 101);
    for i in 0..tr.len() {
        assert_eq!(tr.time(i), i as f64 * dt);
    }
}

#[test]
fn jacobi_constant_is_conserved_on_halo() {
    let c = SystemConstants::default();
    let period = 2.1783639567980537;
    let tr = cr3bp::propagate(&halo(), &c, 10.0 * period, period / 97.0, 1e-12).unwrap();
    let c0 = cr3bp::jacobi_constant(&tr.samples[0], &c).unwrap();
    let drift = tr
        .samples
        .iter()
        .map(|s| (cr3bp::jacobi_constant(s, &c).unwrap() - c0).abs() / c0.abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-9, "relative drift {drift:e}");
}

#[test]
fn circular_orbit_without_second_primary() {
    // Inertial circle of radius a about the origin, seen from the frame
    // rotating at unit rate.
    let c = SystemConstants::with_mu(0.0);
    let a: f64 = 0.5;
    let n = a.powf(-1.5);
    let s0 = StateVector::new(a, 0.0, 0.0, 0.0, (n - 1.0) * a, 0.0);
    let rev = 2.0 * std::f64::consts::PI / (n - 1.0);
    let tr = cr3bp::propagate(&s0, &c, rev, rev / 200.0, 1e-12).unwrap();
    for (i, s) in tr.samples.iter().enumerate() {
        let r = (s.x * s.x + s.y * s.y + s.z * s.z).sqrt();
        assert!((r - a).abs() < 1e-10, "sample {i}: radius {r}");
        let th = (n - 1.0) * tr.time(i);
        assert!((s.x - a * th.cos()).abs() < 1e-9 && (s.y - a * th.sin()).abs() < 1e-9);
    }
}

#[test]
fn corrected_halo_returns_after_one_period() {
    let c = SystemConstants::default();
    let po = cr3bp::correct_periodic(&halo(), &c, &CorrectionOptions::default()).unwrap();
    // Period from crossings of an independent propagation, not from the corrector.
    let tr = cr3bp::propagate(&po.state, &c, 3.0 * po.period, 1e-2, 1e-12).unwrap();
    let ev = validation::detect_crossings(&tr, Plane::ZX, 1e-12).unwrap();
    let period = validation::period_from_crossings(&ev).unwrap().period;
    assert!((period - po.period).abs() < 1e-8);
    let back = cr3bp::flow(&po.state, &c, period, 1e-12).unwrap();
    let d = (0..3).map(|i| (back.component(i) - po.state.component(i)).powi(2)).sum::<f64>().sqrt();
    assert!(d < 1e-6, "position miss {d:e} LU");
    // Only the perpendicular-crossing unknowns are adjusted.
    assert_eq!(po.state.x, halo().x);
    assert!((po.state.z - halo().z).abs() < 1e-4 && (po.state.vy - halo().vy).abs() < 1e-4);
}

#[test]
fn planar_resonant_orbit_stays_planar() {
    let c = SystemConstants::default();
    let s = StateVector::new(2.6656e-1, 2.7444e-20, -1.2692e-22, -4.6279e-13, 2.0683e+0, 3.2448e-22);
    let po = cr3bp::correct_periodic(&s, &c, &CorrectionOptions::default()).unwrap();
    for v in [po.state.y, po.state.z, po.state.vx, po.state.vz] {
        assert_eq!(v, 0.0);
    }
    assert_eq!(po.state.x, s.x);
    assert!((po.period - 6.2543).abs() < 1e-3, "period {}", po.period);
}

#[test]
fn state_transition_matches_finite_differences() {
    let c = SystemConstants::default();
    let s = halo();
    let t = 0.7;
    let phi = cr3bp::state_transition(&s, &c, t, 1e-12).unwrap();
    for j in 0..6 {
        let h = 1e-6;
        let mut p = s.to_array();
        let mut m = s.to_array();
        p[j] += h;
        m[j] -= h;
        let fp = cr3bp::flow(&StateVector::from_array(p), &c, t, 1e-13).unwrap().to_array();
        let fm = cr3bp::flow(&StateVector::from_array(m), &c, t, 1e-13).unwrap().to_array();
        for i in 0..6 {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!((fd - phi[i][j]).abs() < 1e-5 * phi[i][j].abs().max(1.0), "({i},{j}): {fd} vs {}", phi[i][j]);
        }
    }
}

fn position() -> impl Strategy<Value = [f64; 3]> {
    [-1.5..1.5f64, -1.0..1.0f64, -0.5..0.5f64].prop_filter("away from primaries", |p| {
        let c = SystemConstants::default();
        let d = |q: [f64; 3]| ((p[0] - q[0]).powi(2) + p[1] * p[1] + p[2] * p[2]).sqrt();
        d(c.earth()) > 1e-2 && d(c.moon()) > 1e-2
    })
}

proptest! {
    #[test]
    fn velocity_passes_through(p in position(), v in [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]) {
        let c = SystemConstants::default();
        let s = StateVector::new(p[0], p[1], p[2], v[0], v[1], v[2]);
        let d = cr3bp::eom(&s, &c).unwrap();
        prop_assert_eq!(d[0].to_bits(), v[0].to_bits());
        prop_assert_eq!(d[1].to_bits(), v[1].to_bits());
        prop_assert_eq!(d[2].to_bits(), v[2].to_bits());
    }

    #[test]
    fn potential_is_symmetric(p in position()) {
        let c = SystemConstants::default();
        let a = cr3bp::effective_potential(p, &c).unwrap();
        let b = cr3bp::effective_potential([p[0], -p[1], -p[2]], &c).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn jacobi_constant_is_symmetric(p in position(), v in [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]) {
        let c = SystemConstants::default();
        let s = StateVector::new(p[0], p[1], p[2], v[0], v[1], v[2]);
        let m = StateVector::new(p[0], -p[1], -p[2], -v[0], v[1], v[2]);
        prop_assert_eq!(cr3bp::jacobi_constant(&s, &c).unwrap(), cr3bp::jacobi_constant(&m, &c).unwrap());
    }
}
