//! Dispatch from a configuration to an experiment and its report.

use crate::catalog;
use crate::config::*;
use crate::report::{num, Report, Row, Table};
use anyhow::{anyhow, bail, Context, Result};
use gammakit::comparison::{
    concentration_check, perturbation_experiment, slepian_experiment, sudakov_fernique_experiment, PerturbationModel,
    PerturbedComponent,
};
use gammakit::fbm::{delta_fbm, sup_comparison, FbmGrid, Monotone};
use gammakit::gamma::{gamma_oracle, gamma_pointwise, ibp_residual, poincare_profile, ChaosForm, MehlerConfig};
use gammakit::linalg::Matrix;
use gammakit::parallel::{derive_seed, stream_rng, with_workers};
use gammakit::sk::{
    convergence_experiment, free_energy_exact, free_energy_naive, gamma_f_bound_check, generic_bound_check,
    hamiltonian_variance, Medium, MediumSampler,
};
use gammakit::wiener::{parse_expression, Functional, RandomField};

const RULE_3SE: &str = "lhs <= rhs + 3 std errors";

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

pub fn run(config: &ExperimentConfig, overrides: Overrides) -> Result<Report> {
    let mut config = config.clone();
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(w) = overrides.workers {
        config.workers = Some(w);
    }
    let workers = config.workers.unwrap_or(1).max(1);
    config.workers = Some(workers);
    if catalog::find(&config.command).is_none() {
        let names: Vec<&str> = catalog::list_experiments().iter().map(|e| e.name).collect();
        bail!("config at `command`: unknown experiment `{}` (expected one of {})", config.command, names.join(", "));
    }
    config.mehler.validate().context("config at `mehler`")?;
    let mut cfg = config.mehler;
    cfg.seed = derive_seed(config.seed, 0x6d65);
    let mut out = Output::default();
    with_workers(workers, || dispatch(&config, &cfg, &mut out))?;
    let all_pass = out.rows.iter().all(|r| r.verdict == crate::report::Verdict::Pass);
    Ok(Report {
        schema_version: crate::report::SCHEMA_VERSION,
        toolkit_version: crate::report::TOOLKIT_VERSION,
        command: config.command.clone(),
        seed: config.seed,
        workers,
        config: serde_json::to_value(&config)?,
        rows: out.rows,
        tables: out.tables,
        all_pass,
    })
}

#[derive(Default)]
struct Output {
    rows: Vec<Row>,
    tables: Vec<Table>,
}

fn dispatch(config: &ExperimentConfig, cfg: &MehlerConfig, out: &mut Output) -> Result<()> {
    let seed = config.seed;
    match config.command.as_str() {
        "gamma" => gamma(config.params()?, cfg, seed, out),
        "ibp-check" => ibp(config.params()?, cfg, out),
        "poincare" => poincare(config.params()?, cfg, seed, out),
        "sudakov" => sudakov(config.params()?, cfg, out),
        "slepian" => slepian(config.params()?, cfg, out),
        "concentration" => concentration(config.params()?, cfg, out),
        "perturbation" => perturbation(config.params()?, cfg, seed, out),
        "fbm-sde" => fbm(config.params()?, cfg, seed, out),
        "sk-free-energy" => sk_free_energy(config.params()?, seed, out),
        "sk-generic-bound" => sk_generic(config.params()?, seed, out),
        "sk-gamma-bound" => sk_gamma(config.params()?, seed, out),
        "sk-convergence" => sk_convergence(config.params()?, seed, out),
        other => Err(anyhow!("unknown experiment `{other}`")),
    }
}

fn gamma(p: GammaParams, cfg: &MehlerConfig, seed: u64, out: &mut Output) -> Result<()> {
    check_nonempty(&p.pairs, "pairs")?;
    let space = space(p.dim, &None)?;
    let mut rng = stream_rng(derive_seed(seed, 0x9a), 0);
    let mut table = Table::new("gamma", &["pair", "point", "estimate", "std_error", "oracle"]);
    for (k, pair) in p.pairs.iter().enumerate() {
        let ctx = |side: &str| format!("config at `params.pairs[{k}].{side}`");
        let fc = ChaosForm::new(p.dim, pair.f.clone()).with_context(|| ctx("f"))?;
        let gc = ChaosForm::new(p.dim, pair.g.clone()).with_context(|| ctx("g"))?;
        let ff = Functional::new(space.clone(), fc.to_expression())?;
        let gf = Functional::new(space.clone(), gc.to_expression())?;
        for i in 0..p.n_points {
            let omega = space.sample(&mut rng);
            let local = cfg.with_seed(derive_seed(cfg.seed, ((k as u64) << 32) | i as u64));
            let est = gamma_pointwise(&ff, &gf, &omega, &local)?;
            let oracle = gamma_oracle(&fc, &gc, &omega)?;
            let tol = (p.rel_tol * oracle.abs()).max(3.0 * est.std_error) + 1e-12 * oracle.abs().max(1.0);
            out.rows.push(Row::new(
                format!("pair{k}/point{i}"),
                est.value,
                oracle,
                est.std_error,
                (est.value - oracle).abs() <= tol,
                format!("|lhs - rhs| <= max({}*|rhs|, 3 std errors)", p.rel_tol),
            ));
            table.push(vec![k.to_string(), i.to_string(), num(est.value), num(est.std_error), num(oracle)]);
        }
    }
    out.tables.push(table);
    Ok(())
}

fn ibp(p: IbpParams, cfg: &MehlerConfig, out: &mut Output) -> Result<()> {
    let space = space(p.dim, &p.gram)?;
    let f = Functional::parse(space.clone(), &p.f).context("config at `params.f`")?;
    let g = Functional::parse(space, &p.g).context("config at `params.g`")?;
    for (k, phi) in p.phi.iter().enumerate() {
        let local = cfg.with_seed(derive_seed(cfg.seed, k as u64));
        let r = ibp_residual(*phi, &f, &g, p.n_outer, &local)?;
        out.rows.push(Row::new(
            format!("phi={}", phi.name()),
            r.lhs.value,
            r.rhs.value,
            r.std_error,
            r.pass,
            "|lhs - rhs| <= 3 std errors of the paired difference",
        ));
    }
    Ok(())
}

fn poincare(p: PoincareParams, cfg: &MehlerConfig, seed: u64, out: &mut Output) -> Result<()> {
    check_nonempty(&p.functionals, "functionals")?;
    let space = space(p.dim, &p.gram)?;
    for (k, text) in p.functionals.iter().enumerate() {
        let f = Functional::parse(space.clone(), text)
            .with_context(|| format!("config at `params.functionals[{k}]`"))?
            .centered_mc(p.n_center, derive_seed(seed, 0xce00 + k as u64))?;
        let local = cfg.with_seed(derive_seed(cfg.seed, 0x90 + k as u64));
        for r in poincare_profile(&f, &p.ps, p.n_outer, &local)? {
            out.rows.push(Row::new(
                format!("F={text}/p={}", r.p),
                r.lhs.value,
                r.rhs.value,
                r.std_error,
                r.pass,
                "lhs <= rhs + 3 std errors of the paired difference",
            ));
        }
    }
    Ok(())
}

fn fields(space: &std::sync::Arc<gammakit::wiener::WienerSpace>, f: &[String], g: &[String]) -> Result<(RandomField, RandomField)> {
    let fr: Vec<&str> = f.iter().map(String::as_str).collect();
    let gr: Vec<&str> = g.iter().map(String::as_str).collect();
    let ff = RandomField::parse(space.clone(), &fr).context("config at `params.f`")?;
    let gf = RandomField::parse(space.clone(), &gr).context("config at `params.g`")?;
    Ok((ff, gf))
}

fn sudakov(p: SudakovParams, cfg: &MehlerConfig, out: &mut Output) -> Result<()> {
    let space = space(p.dim, &p.gram)?;
    let (f, g) = fields(&space, &p.f, &p.g)?;
    let r = sudakov_fernique_experiment(&f, &g, &p.betas, &p.ts, cfg, p.n_outer, p.n_max)?;
    let mut table = Table::new("phi_prime", &["beta", "t", "phi_prime", "std_error"]);
    for prof in &r.profiles {
        for pt in &prof.phi_prime {
            let e = pt.estimate;
            out.rows.push(Row::new(
                format!("phi'/beta={}/t={}", prof.beta, pt.t),
                e.value,
                0.0,
                e.std_error,
                e.value <= 3.0 * e.std_error + 1e-12,
                "lhs <= rhs + 3 std errors",
            ));
            table.push(vec![num(prof.beta), num(pt.t), num(e.value), num(e.std_error)]);
        }
    }
    let m = r.maxima;
    out.rows.push(Row::new(
        "E[max F] vs E[max G]",
        m.max_f.value,
        m.max_g.value,
        m.difference.std_error,
        r.sup_ordered,
        "lhs <= rhs + 3 std errors of the paired difference",
    ));
    out.tables.push(table);
    Ok(())
}

fn slepian(p: SlepianParams, cfg: &MehlerConfig, out: &mut Output) -> Result<()> {
    let space = space(p.dim, &p.gram)?;
    let (f, g) = fields(&space, &p.f, &p.g)?;
    let func = p.function.build().context("config at `params.function`")?;
    let r = slepian_experiment(&f, &g, &func, &p.ts, cfg, p.n_outer, p.n_direct)?;
    for pt in &r.profile {
        let e = pt.phi_prime;
        out.rows.push(Row::new(
            format!("phi'/t={}", pt.t),
            e.value,
            0.0,
            e.std_error,
            e.value >= -3.0 * e.std_error - 1e-12,
            "lhs >= rhs - 3 std errors",
        ));
    }
    let ex = r.expectations;
    out.rows.push(Row::new(
        "E[f(F)] vs E[f(G)]",
        ex.f_of_f.value,
        ex.f_of_g.value,
        ex.difference.std_error,
        r.pass(),
        "lhs >= rhs - 3 std errors of the paired difference",
    ));
    Ok(())
}

fn concentration(p: ConcentrationParams, cfg: &MehlerConfig, out: &mut Output) -> Result<()> {
    let space = space(p.dim, &p.gram)?;
    let texts: Vec<&str> = p.field.iter().map(String::as_str).collect();
    let field = RandomField::parse(space, &texts).context("config at `params.field`")?;
    let c = Matrix::from_rows(&p.c).context("config at `params.c`")?;
    let r = concentration_check(&field, &c, &p.x, p.n_outer, p.n_psd, cfg)?;
    out.rows.push(Row::new(
        "psd margin",
        r.psd.worst_margin,
        0.0,
        0.0,
        r.psd.ok(),
        "min over points of lambda_min(C - Gamma) + 3 ||se||_F >= 0",
    ));
    out.rows.push(Row::new("tail vs bound", r.tail.value, r.bound, r.tail.std_error, r.pass, RULE_3SE));
    Ok(())
}

fn perturbation(p: PerturbationParams, cfg: &MehlerConfig, seed: u64, out: &mut Output) -> Result<()> {
    let comps = p
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let phi = match &c.phi {
                Some(text) => Some(
                    parse_expression(text, c.f.len()).with_context(|| format!("config at `params.components[{k}].phi`"))?,
                ),
                None => None,
            };
            Ok(PerturbedComponent {
                g: c.g.clone(),
                f: c.f.clone(),
                phi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = PerturbationModel::new(p.dim, comps, derive_seed(seed, 0x9c))?;
    let psi = p.psi.build().context("config at `params.psi`")?;
    let r = perturbation_experiment(&model, &psi, p.n_points, p.n_direct, cfg)?;
    let d = model.perturbed().len();
    for (k, pt) in r.points.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let e = pt.gamma.gamma(i, j);
                let base = pt.baseline[i][j];
                out.rows.push(Row::new(
                    format!("point{k}/Gamma[{i}][{j}]"),
                    e.value,
                    base,
                    e.std_error,
                    e.value - base >= -3.0 * e.std_error - 1e-12,
                    "lhs >= rhs - 3 std errors",
                ));
            }
        }
    }
    let ex = r.expectations;
    out.rows.push(Row::new(
        "E[psi(F)] vs E[psi(G)]",
        ex.f_of_f.value,
        ex.f_of_g.value,
        ex.difference.std_error,
        ex.f_dominates(),
        "lhs >= rhs - 3 std errors of the paired difference",
    ));
    Ok(())
}

fn fbm(p: FbmParams, cfg: &MehlerConfig, seed: u64, out: &mut Output) -> Result<()> {
    let grid = FbmGrid::uniform(p.hurst, p.t_end, p.steps).context("config at `params`")?;
    let direction = p.drift.monotone();
    let h2 = 2.0 * p.hurst;
    for (k, &(s, t)) in p.pairs.iter().enumerate() {
        if s >= t || t > p.steps {
            bail!("config at `params.pairs[{k}]`: need s < t <= steps, got ({s}, {t})");
        }
        let local = cfg.with_seed(derive_seed(cfg.seed, 0xd0 + k as u64));
        let e = delta_fbm(&grid, p.drift, p.x0, s, t, &local, p.n_outer)?;
        let target = (grid.times()[t] - grid.times()[s]).powf(h2);
        let name = format!("Delta(t{s},t{t})");
        let row = match direction {
            Monotone::Constant => Row::new(
                name,
                e.value,
                target,
                e.std_error,
                (e.value - target).abs() <= (0.02 * target).max(3.0 * e.std_error),
                "|lhs - rhs| <= max(2% rhs, 3 std errors)",
            ),
            Monotone::Increasing => Row::new(
                name,
                e.value,
                target,
                e.std_error,
                e.value >= target - 3.0 * e.std_error,
                "lhs >= rhs - 3 std errors",
            ),
            Monotone::Decreasing => Row::new(
                name,
                e.value,
                target,
                e.std_error,
                e.value <= target + 3.0 * e.std_error,
                "lhs <= rhs + 3 std errors",
            ),
            Monotone::None => Row::new(name, e.value, target, e.std_error, true, "no ordering claimed for a non-monotone drift"),
        };
        out.rows.push(row);
    }
    if direction != Monotone::None && p.n_paths > 0 {
        let r = sup_comparison(&grid, p.drift, p.x0, p.n_paths, derive_seed(seed, 0x5a))?;
        let rule = match direction {
            Monotone::Decreasing => "lhs <= rhs + 3 std errors",
            Monotone::Increasing => "lhs >= rhs - 3 std errors",
            _ => "|lhs - rhs| <= 3 std errors",
        };
        out.rows.push(Row::new(
            "E[max(F - EF)] vs E[max B^H]",
            r.max_centered_sde.value,
            r.max_fbm.value,
            r.difference.std_error,
            r.pass,
            rule,
        ));
    }
    Ok(())
}

fn sk_free_energy(p: SkFreeEnergyParams, seed: u64, out: &mut Output) -> Result<()> {
    let media: Vec<Medium> = match (&p.couplings, p.family) {
        (Some(c), None) => vec![Medium::fixed(p.n, c.clone()).context("config at `params.couplings`")?],
        (None, Some(family)) => {
            let sampler = MediumSampler::new(family, p.n).context("config at `params.family`")?;
            let mut rng = stream_rng(derive_seed(seed, 0x5f), 0);
            (0..p.n_media).map(|_| sampler.sample(&mut rng)).collect()
        }
        _ => bail!("config at `params`: give exactly one of `couplings` or `family`"),
    };
    let mut table = Table::new("free_energy", &["medium", "n", "beta", "value"]);
    for (k, m) in media.iter().enumerate() {
        let gray = free_energy_exact(m, p.beta)?;
        let naive = free_energy_naive(m, p.beta)?;
        out.rows.push(Row::new(
            format!("medium{k}/gray-vs-naive"),
            gray.value,
            naive.value,
            0.0,
            gray.value.to_bits() == naive.value.to_bits(),
            "lhs == rhs bit for bit",
        ));
        if p.n == 2 {
            let closed = 0.5 * (p.beta * m.couplings[0]).cosh().ln();
            out.rows.push(Row::new(
                format!("medium{k}/two-spin closed form"),
                gray.value,
                closed,
                0.0,
                (gray.value - closed).abs() <= 1e-12,
                "|lhs - rhs| <= 1e-12",
            ));
        }
        table.push(vec![k.to_string(), p.n.to_string(), num(p.beta), num(gray.value)]);
    }
    if p.variance_samples > 0 {
        let sigma: Vec<i8> = (0..p.n).map(|i| if i % 3 == 1 { -1 } else { 1 }).collect();
        let v = hamiltonian_variance(&sigma, p.variance_samples, derive_seed(seed, 0x7a))?;
        out.rows.push(Row::new(
            "Var H_N(sigma)",
            v.variance.value,
            v.expected,
            v.variance.std_error,
            v.pass,
            "|lhs - rhs| <= 3 std errors",
        ));
    }
    out.tables.push(table);
    Ok(())
}

fn sk_generic(p: SkGenericParams, seed: u64, out: &mut Output) -> Result<()> {
    check_nonempty(&p.families, "families")?;
    let mut table = Table::new(
        "generic_bound",
        &["family", "n", "beta", "lhs", "std_error", "rhs", "rhs_hamiltonian_scale"],
    );
    for (fi, &family) in p.families.iter().enumerate() {
        for &n in &p.ladder {
            let s = derive_seed(seed, ((fi as u64) << 32) | n as u64);
            let r = generic_bound_check(family, p.test_map, p.beta, n, p.n_media, s)
                .with_context(|| format!("config at `params.families[{fi}]`, N = {n}"))?;
            out.rows.push(Row::new(format!("{family}/N={n}"), r.lhs, r.rhs, r.std_error, r.pass, RULE_3SE));
            table.push(vec![
                family.to_string(),
                n.to_string(),
                num(p.beta),
                num(r.lhs),
                num(r.std_error),
                num(r.rhs),
                num(r.rhs_hamiltonian_scale),
            ]);
        }
    }
    out.tables.push(table);
    Ok(())
}

fn sk_gamma(p: SkGammaParams, seed: u64, out: &mut Output) -> Result<()> {
    check_nonempty(&p.families, "families")?;
    for (fi, &family) in p.families.iter().enumerate() {
        for &n in &p.ladder {
            let sampler = MediumSampler::new(family, n).with_context(|| format!("config at `params.families[{fi}]`"))?;
            let mut rng = stream_rng(derive_seed(seed, ((fi as u64) << 32) | n as u64), 0);
            for k in 0..p.n_media {
                let m = sampler.sample(&mut rng);
                for &beta in &p.betas {
                    let r = gamma_f_bound_check(&m, beta)?;
                    out.rows.push(Row::new(
                        format!("{family}/N={n}/beta={beta}/medium{k}"),
                        r.lhs,
                        r.rhs,
                        0.0,
                        r.pass,
                        "lhs <= rhs (exact)",
                    ));
                }
            }
        }
    }
    Ok(())
}

fn sk_convergence(p: SkConvergenceParams, seed: u64, out: &mut Output) -> Result<()> {
    check_nonempty(&p.families, "families")?;
    check_nonempty(&p.ladder, "ladder")?;
    if let Some(&bad) = p.decreasing.iter().find(|&&i| i == 0 || i >= p.families.len()) {
        bail!("config at `params.decreasing`: index {bad} is not a non-reference family");
    }
    let t = convergence_experiment(&p.families, p.beta, &p.ladder, p.n_media, p.coupling, seed)?;
    let mut table = Table::new("convergence", &["family", "n", "mean", "sd", "std_error", "gap", "gap_std_error"]);
    for r in &t.rows {
        table.push(vec![
            r.family.to_string(),
            r.n.to_string(),
            num(r.mean),
            num(r.sd),
            num(r.std_error),
            num(r.gap),
            num(r.gap_std_error),
        ]);
    }
    for &fi in &p.decreasing {
        let rows: Vec<_> = t.rows_for(fi).collect();
        for w in rows.windows(2) {
            out.rows.push(Row::new(
                format!("{}/gap N={} vs N={}", w[1].family, w[1].n, w[0].n),
                w[1].gap,
                w[0].gap,
                w[1].gap_std_error,
                w[1].gap < w[0].gap,
                "lhs < rhs (point estimates)",
            ));
        }
    }
    out.tables.push(table);
    Ok(())
}
