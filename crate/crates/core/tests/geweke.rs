mod common;

use mstcar::covariance::{sample_mstcar_prior, Ar1Spec, EdgeScatter, SigmaEtaFactor};
use mstcar::graph::{graph_spectrum, SpatialGraph};
use mstcar::rng::{tag, RngStream};
use mstcar::sampler::{sample_prior_state, update_hyper_cov, update_rho, update_year_covs, Dims};

fn report(moments: &[common::Moment]) -> f64 {
    let mut worst: f64 = 0.0;
    for m in moments {
        println!("{:<10} mean {:.5} expected {:.5} se {:.5} z {:+.2}", m.name, m.mean, m.expected, m.se, m.z());
        worst = worst.max(m.z().abs());
    }
    worst
}

#[test]
fn successive_conditional_matches_prior() {
    let worst = report(&common::geweke_run(50_000, 2024, false));
    assert!(worst < 3.0, "max |z| = {worst}");
}

/// Alternates an exact prior draw of Z with the separable covariance
/// updates; the chain on (ρ, G_c, G) must leave the prior invariant.
#[test]
fn separable_covariance_updates_keep_prior() {
    let g = SpatialGraph::lattice(2, 3).unwrap();
    let sp = graph_spectrum::<f64>(&g).unwrap();
    let dims = Dims::new(6, 2, 3);
    let hp = common::geweke_hyper();
    let base = RngStream::new(77);
    let mut state = sample_prior_state(dims, &sp, &hp, true, base.child(tag::GEWEKE)).unwrap();
    let n = 100_000;
    let mut trace = vec![Vec::with_capacity(n); 3];
    for it in 0..n as u64 {
        let s = base.child(it + 1);
        let f = SigmaEtaFactor::new(&Ar1Spec::new(state.rho.clone(), 3).unwrap(), state.year_covs.clone()).unwrap();
        state.z = sample_mstcar_prior(&f, &sp, &mut s.child(tag::Z).rng());
        let scatter = EdgeScatter::from_field(&state.z, &g, 2).unwrap();
        let ys = scatter.year_scatter(&state.rho);
        update_year_covs(&mut state, &ys, scatter.n_terms, &hp, true, s).unwrap();
        update_hyper_cov(&mut state, &hp, true, s).unwrap();
        update_rho(&mut state, &scatter, &hp, &[0.9], true, s).unwrap();
        assert_eq!(state.rho[0], state.rho[1]);
        assert!(state.year_covs.iter().all(|c| c == &state.year_covs[0]));
        trace[0].push(state.rho[0]);
        trace[1].push(state.year_covs[0][(0, 0)]);
        trace[2].push(state.g[(0, 0)]);
    }
    let e_g = hp.nu0 * hp.g0[(0, 0)];
    let expected = [hp.a_rho / (hp.a_rho + hp.b_rho), e_g / (hp.nu - 3.0), e_g];
    let moments: Vec<common::Moment> = ["rho", "G_c[1,1]", "G[1,1]"]
        .iter()
        .zip(&trace)
        .zip(expected)
        .map(|((name, tr), expected)| common::Moment {
            name: name.to_string(),
            mean: tr.iter().sum::<f64>() / n as f64,
            se: common::batch_se(tr, 50),
            expected,
        })
        .collect();
    let worst = report(&moments);
    assert!(worst < 3.5, "max |z| = {worst}");
}
