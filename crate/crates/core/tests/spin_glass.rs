use gammakit::gamma::{poincare_check, MehlerConfig};
use gammakit::sk::{free_energy_exact, FreeEnergyFunctional, MediumFamily, MediumSampler};
use gammakit::wiener::{Differentiable, Workspace};

fn cfg(seed: u64) -> MehlerConfig {
    MehlerConfig { quad_nodes: 8, mc_samples: 8, antithetic: true, seed }
}

#[test]
fn free_energy_satisfies_poincare() {
    for (k, family) in [MediumFamily::IidGaussian, MediumFamily::CltChaos2 { m: Some(2) }].into_iter().enumerate() {
        let f = FreeEnergyFunctional::new(family, 7, 1.0).unwrap().centered(20_000, 11 + k as u64).unwrap();
        let r = poincare_check(&f, 2.0, 1_000, &cfg(k as u64)).unwrap();
        assert!(r.pass, "{family}: {r:?}");
        // Var F_N is of order 1/N², far from zero
        assert!(r.lhs.value > 0.0);
    }
}

#[test]
fn functional_agrees_with_exact_enumeration() {
    let family = MediumFamily::CorrelatedGaussian { r: 3.0 };
    let f = FreeEnergyFunctional::new(family, 6, 0.8).unwrap();
    let sampler = MediumSampler::new(family, 6).unwrap();
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; f.dim()];
    for s in 0..5u64 {
        let xi: Vec<f64> = (0..f.dim()).map(|i| ((i as u64 * 7 + s * 13) % 11) as f64 / 5.0 - 1.0).collect();
        let v = f.eval_grad(&xi, &mut grad, &mut ws).unwrap();
        let exact = free_energy_exact(&sampler.from_coordinates(&xi), 0.8).unwrap().value;
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        // gradient against central differences in the coordinates
        for i in [0, f.dim() / 2, f.dim() - 1] {
            let h = 1e-5;
            let (mut p, mut q) = (xi.clone(), xi.clone());
            p[i] += h;
            q[i] -= h;
            let mut scratch = vec![0.0; f.dim()];
            let fd = (f.eval_grad(&p, &mut scratch, &mut ws).unwrap() - f.eval_grad(&q, &mut scratch, &mut ws).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "coordinate {i}: {fd} vs {}", grad[i]);
        }
    }
}
