use art_core::art::TestVariant;
use art_core::group::GroupSpec;
use art_core::simulation::{
    power_curve, power_study, size_study, CovariateLaw, DgpSpec, StudySettings,
};

fn settings(alpha: f64, replications: usize) -> StudySettings {
    StudySettings {
        contrast: vec![0.0, 1.0],
        alpha,
        replications,
        group: GroupSpec::exhaustive(),
        variant: TestVariant::Unstudentized,
    }
}

#[test]
fn power_is_high_for_a_large_effect() {
    let spec = DgpSpec::heteroskedastic(10, 50, vec![0.0, 1.0], 2.0, 31);
    let r = power_study(&spec, &settings(0.05, 400), 1.0).unwrap();
    assert!(r.rate >= 0.9, "power {}", r.rate);
}

#[test]
fn power_rises_with_effect_size() {
    let spec = DgpSpec::heteroskedastic(8, 40, vec![0.0, 1.0], 3.0, 32);
    let curve = power_curve(&spec, &settings(0.05, 400), &[0.0, 0.1, 0.2, 0.4, 0.8]).unwrap();
    for w in curve.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        // allowed dip: two Monte Carlo standard errors of the difference
        let band = 2.0 * (a.mcse.powi(2) + b.mcse.powi(2)).sqrt();
        assert!(
            b.rate >= a.rate - band,
            "power fell from {} to {}",
            a.rate,
            b.rate
        );
    }
    assert!(curve.last().unwrap().1.rate > curve[0].1.rate);
}

#[test]
fn null_p_values_are_conservative() {
    // P(p <= u) <= u up to Monte Carlo error, at every level
    let mut spec = DgpSpec::heteroskedastic(8, 30, vec![1.0, -0.5], 6.0, 33);
    spec.rho = 0.4;
    spec.covariates = CovariateLaw::LogNormal;
    let r = size_study(&spec, &settings(0.1, 1500)).unwrap();
    let n = r.p_values.len() as f64;
    for u in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9] {
        let ecdf = r.p_values.iter().filter(|&&p| p <= u).count() as f64 / n;
        let mcse = (u * (1.0 - u) / n).sqrt();
        assert!(ecdf <= u + 2.0 * mcse, "P(p <= {u}) = {ecdf}");
    }
}

#[test]
fn studentized_variant_has_the_same_size() {
    let spec = DgpSpec::heteroskedastic(6, 25, vec![0.0, 1.0], 4.0, 34);
    let mut s = settings(0.1, 300);
    let plain = size_study(&spec, &s).unwrap();
    s.variant = TestVariant::Studentized;
    let stud = size_study(&spec, &s).unwrap();
    assert_eq!(plain.p_values, stud.p_values);
}

#[test]
fn studies_are_reproducible() {
    let spec = DgpSpec::heteroskedastic(12, 20, vec![0.0, 1.0], 2.0, 35);
    let mut s = settings(0.05, 100);
    s.group = GroupSpec::sampled(500, 99);
    let a = power_study(&spec, &s, 0.3).unwrap();
    let b = power_study(&spec, &s, 0.3).unwrap();
    assert_eq!(a, b);
}
