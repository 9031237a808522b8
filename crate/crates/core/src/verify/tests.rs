use std::f64::consts::TAU;
use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::dtn::{boundary_trace, build_nystrom_grid, steklov_solve};
use crate::envelope::psi_profile;
use crate::exact::{annulus_eigenpairs, cylinder_eigenpair, disk_eigenpair, Branch};
use crate::geometry::{build_fermi_chart, Domain};

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn disk_chart() -> &'static FermiChart {
    static C: OnceLock<FermiChart> = OnceLock::new();
    C.get_or_init(|| build_fermi_chart(&Domain::disk(1.0).unwrap(), &[0], 256, &[0.0]).unwrap())
}

fn annulus_charts() -> &'static [FermiChart; 3] {
    static C: OnceLock<[FermiChart; 3]> = OnceLock::new();
    C.get_or_init(|| {
        let d = Domain::annulus(0.4).unwrap();
        [0usize, 1, 2].map(|i| {
            let src: &[usize] = match i {
                0 => &[0],
                1 => &[1],
                _ => &[0, 1],
            };
            build_fermi_chart(&d, src, 256, &[0.0]).unwrap()
        })
    })
}

fn disk_set(ks: &[u32]) -> ExactSet {
    ExactSet::new(ks.iter().map(|&k| disk_eigenpair(1.0, k, Branch::Plus).unwrap()).collect()).unwrap()
}

/// `u ≡ 1` reported with `σ = 1`, for the trivial measure oracle.
struct Constant;

impl EigenfunctionSet for Constant {
    fn len(&self) -> usize {
        1
    }
    fn sigma(&self, _: usize) -> f64 {
        1.0
    }
    fn component_norms(&self, _: usize) -> Vec<f64> {
        vec![TAU.sqrt()]
    }
    fn eval(&self, _: Vec2) -> Result<Vec<FieldValue>> {
        Ok(vec![FieldValue {
            value: Complex64::new(1.0, 0.0),
            gradient: [Complex64::new(0.0, 0.0); 2],
        }])
    }
    fn eval_boundary(&self, _: usize, _: f64, p: Vec2) -> Result<Vec<FieldValue>> {
        self.eval(p)
    }
}

#[test]
fn constant_function_measures_circles() {
    for t in [0.0, 0.1, 0.5, 0.9] {
        let n = restriction_norms(&Constant, Sweep::Fermi(disk_chart()), t).unwrap();
        assert!((n[0].0 - (TAU * (1.0 - t)).sqrt()).abs() < 1e-12, "t={t}");
        assert_eq!(n[0].1, 0.0);
    }
}

#[test]
fn disk_closed_form_norms() {
    let set = disk_set(&[20]);
    let n = restriction_norms(&set, Sweep::Fermi(disk_chart()), 0.3).unwrap();
    let oracle = 0.7f64.powi(20) * 0.7f64.sqrt();
    assert!((oracle - 6.6759e-4).abs() < 1e-8);
    assert!((n[0].0 - oracle).abs() <= 1e-12 * oracle);
    // h ∂_r r^k = r^{k−1}
    assert!((n[0].1 - 0.7f64.powf(19.5)).abs() <= 1e-12 * oracle);

    let env = psi_profile(disk_chart(), &[0.0, 0.3]).unwrap();
    let prof = restriction_profiles(&set, Sweep::Fermi(disk_chart()), &[0.0, 0.3]).unwrap();
    let r = normalized_profile(&prof[0], &env).unwrap();
    assert!(r[0].abs() < 1e-12);
    let expect = 0.025 * 0.7f64.ln();
    assert!((expect + 8.917e-3).abs() < 1e-6);
    assert!((r[1] - expect).abs() < 1e-9, "R = {}", r[1]);
}

#[test]
fn trace_consistency_exact() {
    let set = disk_set(&[1, 7, 40]);
    let n = restriction_norms(&set, Sweep::Fermi(disk_chart()), 0.0).unwrap();
    for (i, &(u, _)) in n.iter().enumerate() {
        assert!((u - set.component_norms(i)[0]).abs() <= 1e-8);
    }
    let (a, b) = annulus_eigenpairs(8, 0.4).unwrap();
    let set = ExactSet::new(vec![a, b]).unwrap();
    for ch in annulus_charts() {
        let n = restriction_norms(&set, Sweep::Fermi(ch), 0.0).unwrap();
        for (i, &(u, _)) in n.iter().enumerate() {
            let norms = set.component_norms(i);
            let want = ch.source.iter().map(|&c| norms[c] * norms[c]).sum::<f64>().sqrt();
            assert!((u - want).abs() <= 1e-8, "{} mode {i}: {u} vs {want}", ch.id());
        }
    }
}

fn nearest(sp: &SteklovSpectrum, sigma: f64) -> usize {
    (0..sp.modes.len())
        .min_by(|&a, &b| (sp.modes[a].sigma - sigma).abs().total_cmp(&(sp.modes[b].sigma - sigma).abs()))
        .unwrap()
}

#[test]
fn annulus_dtn_trace_and_exact_agreement() {
    let domain = Domain::annulus(0.4).unwrap();
    let sp = steklov_solve(&build_nystrom_grid(&domain, 128).unwrap(), 60).unwrap();
    let (_, s82) = annulus_eigenpairs(8, 0.4).unwrap();
    let m = nearest(&sp, s82.sigma);
    assert!((sp.modes[m].sigma - s82.sigma).abs() < 1e-8);
    let dtn = DtnSet::new(&sp, &[m]).unwrap();

    // inner-circle norm against the Nyström trace
    let bt = boundary_trace(&sp.grid, &sp.modes[m].density).unwrap();
    let inner = &annulus_charts()[1];
    let n0 = restriction_norms(&dtn, Sweep::Fermi(inner), 0.0).unwrap();
    assert!((n0[0].0 - bt.component_norms[1]).abs() <= 1e-8, "{} vs {}", n0[0].0, bt.component_norms[1]);
    for ch in annulus_charts() {
        let n = restriction_norms(&dtn, Sweep::Fermi(ch), 0.0).unwrap();
        let norms = dtn.component_norms(0);
        let want = ch.source.iter().map(|&c| norms[c] * norms[c]).sum::<f64>().sqrt();
        assert!((n[0].0 - want).abs() <= 1e-6);
    }

    let exact = ExactSet::new(vec![s82]).unwrap();
    let t = grid(0.05 * inner.r_max, 0.8 * inner.r_max, 12);
    let env = psi_profile(inner, &t).unwrap();
    let pe = &restriction_profiles(&exact, Sweep::Fermi(inner), &t).unwrap()[0];
    let pd = &restriction_profiles(&dtn, Sweep::Fermi(inner), &t).unwrap()[0];
    let (re, rd) = (normalized_profile(pe, &env).unwrap(), normalized_profile(pd, &env).unwrap());
    for i in 0..t.len() {
        assert!((re[i] - rd[i]).abs() <= 1e-6, "t={} exact {} dtn {}", t[i], re[i], rd[i]);
    }
}

#[test]
fn disk_dtn_matches_exact_profiles() {
    let sp = steklov_solve(&build_nystrom_grid(&Domain::disk(1.0).unwrap(), 128).unwrap(), 30).unwrap();
    let ch = disk_chart();
    let t = grid(0.05, 0.8, 15);
    let env = psi_profile(ch, &t).unwrap();
    for k in [3u32, 10] {
        // modes 2k−1 and 2k carry σ = k
        let dtn = DtnSet::new(&sp, &[2 * k as usize - 1, 2 * k as usize]).unwrap();
        let n0 = restriction_norms(&dtn, Sweep::Fermi(ch), 0.0).unwrap();
        for (i, &(u, _)) in n0.iter().enumerate() {
            assert!((u - dtn.component_norms(i)[0]).abs() <= 1e-6);
        }
        let exact = disk_set(&[k]);
        let re = normalized_profile(&restriction_profiles(&exact, Sweep::Fermi(ch), &t).unwrap()[0], &env).unwrap();
        for p in restriction_profiles(&dtn, Sweep::Fermi(ch), &t).unwrap() {
            let rd = normalized_profile(&p, &env).unwrap();
            for i in 0..t.len() {
                assert!((re[i] - rd[i]).abs() <= 1e-6, "k={k} t={} {} vs {}", t[i], re[i], rd[i]);
            }
        }
    }
}

#[test]
fn ellipse_profiles_decay() {
    let domain = Domain::ellipse(2.0, 1.0).unwrap();
    let sp = steklov_solve(&build_nystrom_grid(&domain, 128).unwrap(), 24).unwrap();
    let ch = build_fermi_chart(&domain, &[0], 256, &[0.0]).unwrap();
    let modes: Vec<usize> = (10..24).collect();
    let dtn = DtnSet::new(&sp, &modes).unwrap();
    let t = grid(0.0, 0.9 * ch.r_max, 20);
    for p in restriction_profiles(&dtn, Sweep::Fermi(&ch), &t).unwrap() {
        assert!(p.dominant() && p.covers_boundary());
        assert!((p.ref_component_norm - 1.0).abs() < 1e-10);
        assert!(p.norm_u.windows(2).all(|w| w[1] < w[0]), "σ = {}", p.sigma);
    }
}

#[test]
fn disk_optimality_and_halving() {
    let ch = disk_chart();
    let t: Vec<f64> = (2..=80).map(|i| i as f64 / 100.0).collect();
    let env = psi_profile(ch, &t).unwrap();
    let set = disk_set(&[10, 20, 40]);
    let profs = restriction_profiles(&set, Sweep::Fermi(ch), &t).unwrap();
    let mut at03 = Vec::new();
    for p in &profs {
        let r = normalized_profile(p, &env).unwrap();
        let max = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max <= 0.5 * p.h * 0.2f64.ln().abs() + 1e-6, "σ = {}: {max}", p.sigma);
        let i = t.iter().position(|&x| (x - 0.3).abs() < 1e-12).unwrap();
        at03.push(r[i]);
        assert!(p.norm_u.windows(2).all(|w| w[1] < w[0]));
    }
    for w in at03.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() <= 0.05);
    }
}

#[test]
fn disk_margins() {
    let ch = disk_chart();
    let t = grid(0.02, 0.8, 40);
    let env = psi_profile(ch, &t).unwrap();
    let params = BoundParams::defaults_for(ch).unwrap();
    assert!((params.upper.c_sup - 0.5).abs() < 1e-12);
    assert!((params.upper.epsilon0 - 0.5).abs() < 1e-12);
    assert!((params.c1 - 1.0).abs() < 1e-12);
    let set = disk_set(&[10, 20, 40]);
    for p in restriction_profiles(&set, Sweep::Fermi(ch), &t).unwrap() {
        let rep = check_bounds(&p, &env, None, &params).unwrap();
        assert!(rep.dominant);
        assert_eq!(
            (rep.pass_m1, rep.pass_m3, rep.pass_up),
            (Some(true), Some(true), Some(true)),
            "σ = {}",
            rep.sigma
        );
        // R = (h/2) log(1 − t) drops below −eps_tol once t > 1 − e^{−2 eps_tol/h}
        let knee = 1.0 - (-2.0 * params.eps_tol / p.h).exp();
        for (i, &x) in rep.t.iter().enumerate() {
            assert_eq!(rep.m2[i] >= 0.0, x < knee, "σ = {} t = {x}", rep.sigma);
        }
        assert_eq!(rep.pass_m2, Some(knee > 0.8));
        assert_eq!(rep.passed(), knee > 0.8);
        // ε0 cuts the near-boundary and upper margins
        let cut = rep.t.iter().filter(|&&x| x <= 0.5).count();
        assert_eq!(rep.m1.iter().flatten().count(), cut);
        assert_eq!(rep.m_up.iter().flatten().count(), cut);
        assert!(rep.m3.iter().all(Option::is_some));
    }
}

#[test]
fn annulus_dominance_and_inner_margins() {
    let [outer, inner, both] = annulus_charts();
    let (_, s82) = annulus_eigenpairs(8, 0.4).unwrap();
    let set = ExactSet::new(vec![s82]).unwrap();

    let t_in = grid(0.0, 0.25, 25);
    let p_in = &restriction_profiles(&set, Sweep::Fermi(inner), &t_in).unwrap()[0];
    assert!(p_in.dominant());
    let t_full: Vec<f64> = t_in.iter().copied().filter(|&x| x < both.r_max).collect();
    let p_full = &restriction_profiles(&set, Sweep::Fermi(both), &t_full).unwrap()[0];
    let env_full = psi_profile(both, &t_full).unwrap();
    let env_in = psi_profile(inner, &t_in).unwrap();
    let params = BoundParams::defaults_for(inner).unwrap();
    let rep = check_bounds(p_in, &env_in, Some((p_full, &env_full)), &params).unwrap();
    assert_eq!(rep.pass_m2, Some(true));
    assert!(rep.m2.iter().all(|&m| m >= 0.0));
    assert_eq!(rep.pass_m3, Some(true));
    assert_eq!(rep.m3.iter().flatten().count(), t_full.len());

    let t_out = grid(0.0, 0.5, 10);
    let p_out = &restriction_profiles(&set, Sweep::Fermi(outer), &t_out).unwrap()[0];
    assert!(!p_out.dominant());
    let rep = check_bounds(p_out, &psi_profile(outer, &t_out).unwrap(), None, &params).unwrap();
    assert_eq!((rep.pass_m1, rep.pass_m2, rep.pass_m3, rep.pass_up), (None, None, None, None));
    assert!(rep.passed());
}

#[test]
fn cylinder_even_mode_closed_form() {
    let length = 2.0;
    let chart = CylinderChart::new(length, &[0, 1]).unwrap();
    let t = grid(0.0, 0.95, 19);
    let env = psi_profile(&chart, &t).unwrap();
    for k in [2u32, 4, 8] {
        let pair = cylinder_eigenpair(length, k, Branch::Even).unwrap();
        let lambda = TAU * k as f64 / length;
        assert!(lambda >= 5.0);
        let set = ExactSet::new(vec![pair]).unwrap();
        let p = &restriction_profiles(&set, Sweep::Cylinder(&chart, 16), &t).unwrap()[0];
        let r = normalized_profile(p, &env).unwrap();
        let h = p.h;
        for (i, &x) in t.iter().enumerate() {
            let oracle = h * ((lambda * (1.0 - x)).cosh() / lambda.cosh()).ln() + x;
            assert!((r[i] - oracle).abs() < 1e-12, "k={k} t={x}");
            assert!(r[i].abs() <= 2.0 * h * 2f64.ln());
        }
        assert!((p.ref_component_norm - 1.0).abs() < 1e-14);
    }
}

#[test]
fn errors_and_serialization() {
    assert!(matches!(
        ExactSet::new(vec![disk_eigenpair(1.0, 0, Branch::Plus).unwrap()]),
        Err(Error::Undefined(_))
    ));
    assert!(ExactSet::new(vec![]).is_err());
    let set = disk_set(&[5]);
    assert!(matches!(
        restriction_norms(&set, Sweep::Fermi(disk_chart()), 1.0),
        Err(Error::ChartExceeded { .. })
    ));

    let t = grid(0.0, 0.6, 6);
    let env = psi_profile(disk_chart(), &t).unwrap();
    let mut p = restriction_profiles(&set, Sweep::Fermi(disk_chart()), &t).unwrap().remove(0);
    let short = psi_profile(disk_chart(), &t[..3]).unwrap();
    assert!(normalized_profile(&p, &short).is_err());

    let params = BoundParams::defaults_for(disk_chart()).unwrap();
    let a = check_bounds(&p, &env, None, &params).unwrap();
    let b = check_bounds(&p, &env, None, &params).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let csv = a.to_csv();
    assert!(csv.starts_with("t,norm_u,norm_dn,psi,R,m1,m2,m3,m_up\n"));
    assert_eq!(csv.lines().count(), t.len() + 1);
    // beyond ε0 the near-boundary and upper margins are empty
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!((last[5], last[8]), ("", ""));
    assert!(!last[7].is_empty());
    let v: serde_json::Value = serde_json::to_value(&a).unwrap();
    assert!(v["R"].is_array() && v["pass_m2"] == serde_json::json!(a.pass_m2.unwrap()));

    p.ref_component_norm = 0.0;
    assert!(matches!(normalized_profile(&p, &env), Err(Error::ZeroReference)));
    assert!(matches!(check_bounds(&p, &env, None, &params), Err(Error::ZeroReference)));

    let mut bad = params;
    bad.eps_tol = -1.0;
    assert!(bad.validate(disk_chart()).is_err());
    assert!(params.validate(disk_chart()).is_ok());
    let mut concave = params;
    concave.c1 = -0.75;
    assert!(concave.validate(disk_chart()).is_ok());
    concave.c1 = f64::NAN;
    assert!(concave.validate(disk_chart()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disk_norms_follow_power_law(k in 1u32..60, t in 0.0f64..0.95) {
        let set = disk_set(&[k]);
        let n = restriction_norms(&set, Sweep::Fermi(disk_chart()), t).unwrap()[0];
        let r = 1.0 - t;
        prop_assert!(n.0 >= 0.0 && n.1 >= 0.0);
        prop_assert!((n.0 - r.powf(k as f64 + 0.5)).abs() <= 1e-11);
        prop_assert!((n.1 - r.powf(k as f64 - 0.5)).abs() <= 1e-11);
    }

    #[test]
    fn margins_shift_with_eps_tol(eps in 0.0f64..0.5, k in 2u32..30) {
        let t = grid(0.0, 0.8, 8);
        let env = psi_profile(disk_chart(), &t).unwrap();
        let p = &restriction_profiles(&disk_set(&[k]), Sweep::Fermi(disk_chart()), &t).unwrap()[0];
        let mut params = BoundParams::defaults_for(disk_chart()).unwrap();
        params.eps_tol = 0.0;
        let base = check_bounds(p, &env, None, &params).unwrap();
        params.eps_tol = eps;
        let shifted = check_bounds(p, &env, None, &params).unwrap();
        for i in 0..t.len() {
            prop_assert!((shifted.m2[i] - base.m2[i] - eps).abs() < 1e-14);
            prop_assert!((shifted.m2[i] - eps - shifted.r[i]).abs() < 1e-14);
        }
    }
}
