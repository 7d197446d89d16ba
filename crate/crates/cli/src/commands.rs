//! One function per subcommand. Each writes its tables into the output
//! directory and returns the run report; nothing here depends on wall-clock
//! time or thread scheduling, so reruns reproduce every file byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mris_adiabatic::{
    adiabatic_sweeps, schedule_generator, write_profile_csv, AdiabaticError, AdiabaticSchedule,
    Interpolation,
};
use mris_chain::{classify_chain, MarkovChain};
use mris_extended::spectrum::{FAITHFUL_TOL, PERIPHERAL_TOL};
use mris_extended::{
    build_generator, classify_generator, ess_decompose, find_ess, fixed_point_residual,
    ExtendedError, GeneratorClassification, GeneratorKind,
};
use mris_fluctuations::{
    clt_covariance, common_beta, entropy_rate_function, gc_symmetry_report, green_kubo,
    kinetic_coefficients, matrix_json, plot_script, rate_function, steady_fluxes,
    translation_symmetry_report, write_cumulant_csv, write_rate_csv, CumulantFunction,
    FluctuationError, RateFunction, SYMMETRY_TOL,
};
use mris_probes::{
    check_equilibrium, check_kms, check_tri, temperature_deform, MrisModel, ProbeError,
};
use mris_trajectories::{
    empirical_covariance, rate_estimate, records_json, sample_entropy_process, write_records_csv,
    TrajectoryConfig, TrajectoryError,
};
use nalgebra::DMatrix;
use qm_core::fmt::sig17;
use qm_core::matrix::max_abs_diff;
use qm_core::{choi_verify, ComplexMatrix, QuantumChannel};
use serde_json::{json, Value};
use thiserror::Error;

use crate::args::{
    AdiabaticArgs, Command, Common, CumulantArgs, LinrespArgs, RatefnArgs, Shape, SimulateArgs,
};
use crate::report::{inputs_digest, Property, RunReport, Verdict};
use crate::schema::{load_model, SchemaError};

/// Threshold of exact identities (trace preservation, unraveling completeness).
pub const EXACT_TOL: f64 = 1e-12;
/// Threshold of identities involving an eigen-decomposition.
pub const IDENTITY_TOL: f64 = 1e-10;
pub const ONSAGER_TOL: f64 = 1e-6;
pub const FDR_TOL: f64 = 1e-6;
pub const ROUTE_TOL: f64 = 1e-5;
/// Relative distance of the Green-Kubo limit from the kinetic matrix.
pub const GREEN_KUBO_TOL: f64 = 0.01;
pub const RATE_MINIMUM_TOL: f64 = 1e-8;
pub const FLUCTUATION_RELATION_TOL: f64 = 1e-6;
pub const PLATEAU_RATIO: (f64, f64) = (1.5, 2.5);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Schema { path: PathBuf, source: SchemaError },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Extended(#[from] ExtendedError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Fluctuation(#[from] FluctuationError),
    #[error(transparent)]
    Adiabatic(#[from] AdiabaticError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// A loaded model together with where and how to write results.
#[derive(Debug)]
pub struct Session {
    pub model: MrisModel,
    pub model_bytes: Vec<u8>,
    pub out: PathBuf,
    pub seed: u64,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Session {
    pub fn load(common: &Common) -> Result<Self> {
        let model_bytes = std::fs::read(&common.model).map_err(io_error(&common.model))?;
        let text = String::from_utf8_lossy(&model_bytes);
        let model = load_model(&text, &common.tol).map_err(|source| CliError::Schema {
            path: common.model.clone(),
            source,
        })?;
        std::fs::create_dir_all(&common.out).map_err(io_error(&common.out))?;
        Ok(Self {
            model,
            model_bytes,
            out: common.out.clone(),
            seed: common.seed,
        })
    }

    fn report(&self, command: &str, parameters: Value, seeded: bool) -> RunReport {
        let params = json!({ "command": command, "parameters": parameters });
        RunReport::new(
            command,
            inputs_digest(&self.model_bytes, &params),
            seeded.then_some(self.seed),
        )
    }

    /// Creates `name` in the output directory, hands a writer to `fill` and
    /// records the file in the report.
    fn emit<F>(&self, report: &mut RunReport, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_error(&path))?);
        fill(&mut w)?;
        w.flush().map_err(io_error(&path))?;
        report.outputs.push(name.to_string());
        Ok(())
    }

    fn emit_text(&self, report: &mut RunReport, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        self.emit(report, name, |w| {
            w.write_all(text.as_bytes()).map_err(io_error(&path))
        })
    }

    fn emit_rows(
        &self,
        report: &mut RunReport,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<()> {
        self.emit(report, name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r)?;
            }
            c.flush().map_err(csv::Error::from)?;
            Ok(())
        })
    }
}

/// Loads the model, runs the command and writes its report.
pub fn run(command: &Command) -> Result<RunReport> {
    let session = Session::load(command.common())?;
    let report = match command {
        Command::Validate(_) => validate(&session)?,
        Command::Classify(_) => classify(&session)?,
        Command::Ess(_) => ess(&session)?,
        Command::Simulate(a) => simulate(&session, a)?,
        Command::Cumulant(a) => cumulant(&session, a)?,
        Command::Ratefn(a) => ratefn(&session, a)?,
        Command::Linresp(a) => linresp(&session, a)?,
        Command::Adiabatic(a) => adiabatic(&session, a)?,
    };
    report.write(&session.out).map_err(io_error(&session.out))?;
    Ok(report)
}

fn labelled(check: &str, label: &str) -> String {
    format!("{check}[{label}]")
}

fn flag(check: &str, passed: bool, value: f64, bound: &str) -> Verdict {
    Verdict {
        check: check.to_string(),
        passed,
        value,
        bound: bound.to_string(),
    }
}

fn kind_name(kind: GeneratorKind) -> &'static str {
    match kind {
        GeneratorKind::Reducible => "reducible",
        GeneratorKind::IrreduciblePeriodic => "irreducible-periodic",
        GeneratorKind::Primitive => "primitive",
    }
}

fn complex_json(m: &ComplexMatrix) -> Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols())
            .map(|j| [m[(i, j)].re, m[(i, j)].im])
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `Σ_ω π_ω L_ω` with `π` the chain's stationary law, as a one-label generator.
pub fn average_channel_classification(model: &MrisModel) -> Result<GeneratorClassification> {
    let pi = classify_chain(model.chain()).stationary;
    let channels = model.channels();
    let weighted: Vec<(&QuantumChannel, f64)> = channels.iter().zip(pi).collect();
    let average = QuantumChannel::convex_combination(&weighted)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let single =
        MarkovChain::from_rows(&["mean"], &[1.0], &[&[1.0]]).expect("one-state chain is valid");
    Ok(classify_generator(&build_generator(&single, &[average])?)?)
}

pub fn validate(s: &Session) -> Result<RunReport> {
    let m = &s.model;
    let tol = *m.tol();
    let mut r = s.report("validate", json!({}), false);
    for (omega, label) in m.labels().iter().enumerate() {
        let probe = m.probe(omega);
        let choi = choi_verify(&probe.channel);
        r.verdicts.push(Verdict::at_least(
            labelled("choi_min_eigenvalue", label),
            choi.min_choi_eig,
            -tol.psd,
        ));
        r.verdicts.push(Verdict::at_most(
            labelled("trace_preservation", label),
            choi.tp_residual,
            tol.tp,
        ));
        if let Ok(unr) = m.unraveling(omega) {
            let sum: ComplexMatrix = unr.outcomes.iter().map(|o| o.map.superop().clone()).sum();
            let residual = max_abs_diff(&sum, probe.channel.superop());
            r.verdicts.push(Verdict::at_most(
                labelled("unraveling_completeness", label),
                residual,
                EXACT_TOL,
            ));
        }
    }
    r.verdicts.push(Verdict::at_most(
        "generator_trace_preservation",
        m.generator().trace_residual(),
        EXACT_TOL,
    ));

    match check_tri(m) {
        Ok(t) => r
            .properties
            .push(Property::new("TRI", Some(t.holds), t.max_residual)),
        Err(_) => r.properties.push(Property::new("TRI", None, f64::NAN)),
    }
    let chain = classify_chain(m.chain());
    r.properties.push(Property::new(
        "DB",
        Some(chain.detailed_balance),
        chain.db_residual,
    ));
    let kms = check_kms(m);
    let kms_residual = kms
        .residuals
        .iter()
        .flatten()
        .copied()
        .fold(f64::NAN, f64::max);
    r.properties
        .push(Property::new("KMS", Some(kms.holds), kms_residual));
    let mut summary = json!({
        "labels": m.labels(),
        "system_dim": m.dim(),
        "betas": m.betas(),
        "chain_irreducible": chain.irreducible,
    });
    match check_equilibrium(m) {
        Ok(eq) => {
            r.properties.push(Property::new(
                "EQU",
                Some(eq.is_equilibrium),
                eq.max_residual,
            ));
            r.verdicts.push(flag(
                "equilibrium_matches_entropy_production",
                eq.consistent,
                eq.ep_value,
                "EQU iff <R+, J_S> <= 1e-10",
            ));
            summary["steady_entropy_production"] = json!(eq.ep_value);
            summary["steady_fluxes"] = json!(eq.mean_fluxes);
        }
        Err(ProbeError::Reducible) | Err(ProbeError::SingularEnvironment { .. }) => {
            r.properties.push(Property::new("EQU", None, f64::NAN));
        }
        Err(e) => return Err(e.into()),
    }
    r.summary = summary;
    Ok(r)
}

pub fn classify(s: &Session) -> Result<RunReport> {
    let m = &s.model;
    let mut r = s.report("classify", json!({}), false);
    let g = m.generator();
    let cl = classify_generator(g)?;
    let chain = classify_chain(m.chain());
    let average = average_channel_classification(m)?;

    let mut eigs = cl.eigenvalues.clone();
    eigs.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.arg().total_cmp(&a.arg()))
    });
    let rows: Vec<Vec<String>> = eigs
        .iter()
        .enumerate()
        .map(|(k, z)| vec![k.to_string(), sig17(z.re), sig17(z.im), sig17(z.norm())])
        .collect();
    let header = ["index", "re", "im", "modulus"].map(String::from);
    s.emit_rows(&mut r, "spectrum.csv", &header, &rows)?;

    r.verdicts.push(Verdict::at_most(
        "generator_trace_preservation",
        g.trace_residual(),
        EXACT_TOL,
    ));
    r.verdicts.push(Verdict::at_most(
        "spectral_radius_is_one",
        (cl.dominant_eigenvalue - 1.0).abs(),
        PERIPHERAL_TOL,
    ));
    if cl.is_irreducible() {
        r.verdicts.push(Verdict::at_most(
            "peripheral_roots_of_unity",
            cl.roots_of_unity_residual,
            PERIPHERAL_TOL,
        ));
    }
    // Irreducibility and primitivity of the generator pass to the chain and to the averaged channel.
    let implied = |gen: bool, part: bool| !gen || part;
    r.verdicts.push(flag(
        "chain_irreducible_if_generator_is",
        implied(cl.is_irreducible(), chain.irreducible),
        chain.period as f64,
        "implication",
    ));
    r.verdicts.push(flag(
        "chain_primitive_if_generator_is",
        implied(cl.is_primitive(), chain.primitive),
        chain.period as f64,
        "implication",
    ));
    r.verdicts.push(flag(
        "average_channel_irreducible_if_generator_is",
        implied(cl.is_irreducible(), average.is_irreducible()),
        average.gap,
        "implication",
    ));
    r.verdicts.push(flag(
        "average_channel_primitive_if_generator_is",
        implied(cl.is_primitive(), average.is_primitive()),
        average.gap,
        "implication",
    ));
    r.summary = json!({
        "generator": {
            "kind": kind_name(cl.kind),
            "period": cl.period,
            "gap": if cl.gap.is_finite() { json!(cl.gap) } else { json!("inf") },
            "spectral_radius": cl.dominant_eigenvalue,
            "multiplicity_of_one": cl.multiplicity_one,
            "faithful_steady_state": cl.faithful,
        },
        "chain": {
            "irreducible": chain.irreducible,
            "period": chain.period,
            "primitive": chain.primitive,
            "positivity_improving": m.chain().is_positivity_improving(),
            "stationary": chain.stationary,
            "detailed_balance": chain.detailed_balance,
        },
        "average_channel": { "kind": kind_name(average.kind), "gap": average.gap },
    });
    Ok(r)
}

pub fn ess(s: &Session) -> Result<RunReport> {
    let m = &s.model;
    let mut r = s.report("ess", json!({}), false);
    let g = m.generator();
    let cl = classify_generator(g)?;
    r.verdicts.push(flag(
        "generator_irreducible",
        cl.is_irreducible(),
        cl.multiplicity_one as f64,
        "unique faithful fixed point",
    ));
    let Some(r_plus) = cl.ess.filter(|_| cl.kind != GeneratorKind::Reducible) else {
        r.summary = json!({ "kind": kind_name(cl.kind) });
        return Ok(r);
    };
    let dec = ess_decompose(g, &r_plus)?;
    let d = m.dim();
    let mut header = vec![
        "label".to_string(),
        "pi_plus".into(),
        "min_eigenvalue".into(),
    ];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("rho_{i}{j}_re"));
            header.push(format!("rho_{i}{j}_im"));
        }
    }
    let rows: Vec<Vec<String>> = m
        .labels()
        .iter()
        .zip(&dec.pi_plus)
        .zip(&dec.rho_plus)
        .map(|((l, &p), rho)| {
            let mut row = vec![l.clone(), sig17(p), sig17(rho.min_eigenvalue())];
            for i in 0..d {
                for j in 0..d {
                    let z = rho.matrix()[(i, j)];
                    row.push(sig17(z.re));
                    row.push(sig17(z.im));
                }
            }
            row
        })
        .collect();
    s.emit_rows(&mut r, "ess.csv", &header, &rows)?;

    let p = m.chain().p();
    let n = m.omega_count();
    let stationarity = (0..n)
        .map(|w| ((0..n).map(|v| dec.pi_plus[v] * p[(v, w)]).sum::<f64>() - dec.pi_plus[w]).abs())
        .fold(0.0, f64::max);
    r.verdicts.push(Verdict::at_most(
        "fixed_point_residual",
        fixed_point_residual(g, &r_plus),
        IDENTITY_TOL,
    ));
    r.verdicts.push(Verdict::at_most(
        "reconstruction_residual",
        dec.reconstruction_residual,
        IDENTITY_TOL,
    ));
    r.verdicts.push(Verdict::at_most(
        "pi_plus_stationary",
        stationarity,
        IDENTITY_TOL,
    ));
    r.verdicts.push(Verdict::at_least(
        "faithful",
        r_plus.min_block_eigenvalue(),
        FAITHFUL_TOL,
    ));
    r.summary = json!({
        "labels": m.labels(),
        "pi_plus": dec.pi_plus,
        "rho_plus": dec.rho_plus.iter().map(|x| complex_json(x.matrix())).collect::<Vec<_>>(),
        "steady_state_blocks": r_plus.blocks().iter().map(complex_json).collect::<Vec<_>>(),
    });
    Ok(r)
}

pub fn simulate(s: &Session, a: &SimulateArgs) -> Result<RunReport> {
    let m = &s.model;
    let params = json!({ "steps": a.steps, "traj": a.traj, "record": a.record, "sigmas": a.sigmas, "clt": a.clt, "clt_tol": a.clt_tol });
    let mut r = s.report("simulate", params, true);
    let mut cfg = TrajectoryConfig::new(a.steps, a.traj, s.seed);
    if a.record {
        cfg = cfg.recording();
    }
    let records = sample_entropy_process(m, &cfg)?;
    let labels = m.labels();
    s.emit(&mut r, "records.csv", |w| {
        Ok(write_records_csv(w, &records, labels)?)
    })?;
    if a.record {
        let text =
            serde_json::to_string(&records_json(&records, labels)).expect("plain JSON values");
        s.emit_text(&mut r, "trajectories.json", &(text + "\n"))?;
    }
    let est = rate_estimate(&records);
    let empirical = empirical_covariance(&records);
    let mut summary = json!({
        "labels": labels,
        "steps": a.steps,
        "trajectories": a.traj,
        "mean_rate": est.mean,
        "stderr": est.stderr,
        "empirical_covariance": matrix_json(&empirical),
        "renormalized_steps": records.iter().map(|x| x.renormalizations).sum::<usize>(),
    });
    if classify_generator(m.generator())?.is_irreducible() {
        let betas = m.betas();
        let target: Vec<f64> = steady_fluxes(m)?
            .iter()
            .zip(&betas)
            .map(|(j, b)| -b * j)
            .collect();
        for (nu, label) in labels.iter().enumerate() {
            let diff = (est.mean[nu] - target[nu]).abs();
            let z = if est.stderr[nu] > 0.0 {
                diff / est.stderr[nu]
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            r.verdicts.push(Verdict::at_most(
                labelled("mean_rate_in_stderr", label),
                z,
                a.sigmas,
            ));
        }
        let spectral = clt_covariance(&CumulantFunction::new(m)?)?.c;
        let rel = (&empirical - &spectral).norm() / spectral.norm();
        if a.clt {
            r.verdicts.push(Verdict::at_most(
                "covariance_relative_distance",
                rel,
                a.clt_tol,
            ));
        } else {
            r.properties
                .push(Property::new("covariance_relative_distance", None, rel));
        }
        summary["steady_rate"] = json!(target);
        summary["spectral_covariance"] = matrix_json(&spectral);
    } else {
        r.properties.push(Property::new(
            "generator_irreducible",
            Some(false),
            f64::NAN,
        ));
    }
    r.summary = summary;
    Ok(r)
}

fn deformed(s: &Session, zeta: &Option<Vec<f64>>) -> Result<MrisModel> {
    match zeta {
        None => Ok(s.model.clone()),
        Some(z) if z.len() == s.model.omega_count() => Ok(temperature_deform(&s.model, z)?),
        Some(z) => Err(CliError::Usage(format!(
            "--zeta has {} entries, the model has {} labels",
            z.len(),
            s.model.omega_count()
        ))),
    }
}

/// Whether the undeformed model is at a common temperature and in equilibrium.
fn equilibrium_base(model: &MrisModel) -> bool {
    common_beta(model).is_ok() && check_equilibrium(model).is_ok_and(|e| e.is_equilibrium)
}

/// Product grid of a few fixed coordinates, or the diagonal when that grid gets large.
fn symmetry_grid(n: usize) -> Vec<Vec<f64>> {
    const COORDS: [f64; 4] = [-0.5, 0.25, 1.0, 1.75];
    if n > 4 {
        return COORDS.iter().map(|&c| vec![c; n]).collect();
    }
    let mut grid = vec![Vec::new()];
    for _ in 0..n {
        grid = grid
            .into_iter()
            .flat_map(|g| {
                COORDS.iter().map(move |&c| {
                    let mut v = g.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    grid
}

pub fn cumulant(s: &Session, a: &CumulantArgs) -> Result<RunReport> {
    if a.points < 3 {
        return Err(CliError::Usage("--points must be at least 3".into()));
    }
    let params = json!({ "alpha_min": a.alpha_min, "alpha_max": a.alpha_max, "points": a.points, "zeta": a.zeta });
    let mut r = s.report("cumulant", params, false);
    let model = deformed(s, &a.zeta)?;
    let n = model.omega_count();
    let cf = CumulantFunction::new(&model)?;
    let alphas: Vec<Vec<f64>> = linspace(a.alpha_min, a.alpha_max, a.points)
        .into_iter()
        .map(|t| vec![t; n])
        .collect();
    let values = cf.e_many(&alphas)?;
    let labels = model.labels();
    s.emit(&mut r, "cumulant.csv", |w| {
        Ok(write_cumulant_csv(w, labels, &alphas, &values)?)
    })?;
    s.emit_text(
        &mut r,
        "cumulant.gp",
        &plot_script("cumulant.csv", 1, n + 1, "t (alpha = t 1)", "e(alpha)"),
    )?;

    r.verdicts.push(Verdict::at_most(
        "e_at_zero",
        cf.e(&vec![0.0; n])?.abs(),
        EXACT_TOL,
    ));
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = alphas
        .windows(3)
        .map(|w| (w[0].clone(), w[2].clone()))
        .collect();
    let grid = symmetry_grid(n);
    let cross: Vec<(Vec<f64>, Vec<f64>)> = grid
        .iter()
        .zip(grid.iter().rev())
        .map(|(x, y)| (x.clone(), y.clone()))
        .collect();
    let convexity = cf
        .midpoint_violation(&pairs)?
        .max(cf.midpoint_violation(&cross)?);
    r.verdicts.push(Verdict::at_most(
        "midpoint_convexity_violation",
        convexity,
        IDENTITY_TOL,
    ));

    let gc = gc_symmetry_report(&cf, &grid)?;
    if gc.tri_holds && gc.detailed_balance {
        r.verdicts.push(Verdict::at_most(
            "gallavotti_cohen_residual",
            gc.max_residual,
            SYMMETRY_TOL,
        ));
    } else {
        r.properties.push(Property::new(
            "gallavotti_cohen_residual",
            Some(gc.holds),
            gc.max_residual,
        ));
    }
    let gammas = [-1.0, -0.5, 0.5, 1.0];
    let step = (grid.len() / 4).max(1);
    let base: Vec<Vec<f64>> = grid.iter().step_by(step).take(4).cloned().collect();
    let tr = translation_symmetry_report(&cf, &base, &gammas)?;
    if equilibrium_base(&s.model) {
        r.verdicts.push(Verdict::at_most(
            "translation_residual",
            tr.max_residual,
            SYMMETRY_TOL,
        ));
    } else {
        r.properties.push(Property::new(
            "translation_residual",
            Some(tr.holds),
            tr.max_residual,
        ));
    }
    r.summary = json!({
        "labels": labels,
        "betas": model.betas(),
        "mean_rate": cf.mean_rate()?,
        "symmetry_grid_points": grid.len(),
        "time_reversal": gc.tri_holds,
        "detailed_balance": gc.detailed_balance,
    });
    Ok(r)
}

/// Largest `|I(−s) − I(s) − 𝟙·s|` over grid pairs `s, −s` where both values are finite.
fn fluctuation_relation_residual(rf: &RateFunction) -> (f64, usize) {
    let k = rf.grid.len();
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for i in 0..k {
        let (s, minus) = (&rf.grid[i], &rf.grid[k - 1 - i]);
        let mirrored = s
            .iter()
            .zip(minus)
            .all(|(x, y)| (x + y).abs() <= 1e-12 * (1.0 + x.abs()));
        let (p, q) = (&rf.points[i], &rf.points[k - 1 - i]);
        if mirrored && p.is_finite() && q.is_finite() {
            let total: f64 = s.iter().sum();
            worst = worst.max((q.value - p.value - total).abs());
            used += 1;
        }
    }
    (worst, used)
}

pub fn ratefn(s: &Session, a: &RatefnArgs) -> Result<RunReport> {
    if a.points < 3 {
        return Err(CliError::Usage("--points must be at least 3".into()));
    }
    let params = json!({ "points": a.points, "s_max": a.s_max, "zeta": a.zeta });
    let mut r = s.report("ratefn", params, false);
    let model = deformed(s, &a.zeta)?;
    let labels = model.labels();
    let n = model.omega_count();
    let cf = CumulantFunction::new(&model)?;
    let mean = cf.mean_rate()?;
    let gc = gc_symmetry_report(&cf, &[vec![0.0; n]])?;
    let symmetric = gc.tri_holds && gc.detailed_balance;

    let at_mean = rate_function(&cf, std::slice::from_ref(&mean))?;
    r.verdicts.push(Verdict::at_most(
        "rate_at_mean",
        at_mean.points[0].value.abs(),
        RATE_MINIMUM_TOL,
    ));

    let mut min_value = f64::INFINITY;
    let mean_norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if mean_norm > 1e-8 {
        let grid: Vec<Vec<f64>> = linspace(-2.0, 2.0, a.points)
            .into_iter()
            .map(|t| mean.iter().map(|x| t * x).collect())
            .collect();
        let rf = rate_function(&cf, &grid)?;
        min_value = rf
            .values()
            .into_iter()
            .filter(|v| v.is_finite())
            .fold(min_value, f64::min);
        s.emit(&mut r, "ratefn.csv", |w| {
            Ok(write_rate_csv(w, labels, &rf)?)
        })?;
        s.emit_text(
            &mut r,
            "ratefn.gp",
            &plot_script("ratefn.csv", 1, n + 1, &format!("s_{}", labels[0]), "I(s)"),
        )?;
        let (fr, used) = fluctuation_relation_residual(&rf);
        if symmetric && used > 0 {
            r.verdicts.push(Verdict::at_most(
                "fluctuation_relation",
                fr,
                FLUCTUATION_RELATION_TOL,
            ));
        } else {
            r.properties
                .push(Property::new("fluctuation_relation", None, fr));
        }
    }

    let sigma: f64 = mean.iter().sum();
    let s_max = a.s_max.unwrap_or((3.0 * sigma.abs()).max(0.1));
    let scalar = entropy_rate_function(&cf, &linspace(-s_max, s_max, a.points))?;
    min_value = scalar
        .values()
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(min_value, f64::min);
    s.emit(&mut r, "entropy_ratefn.csv", |w| {
        Ok(write_rate_csv(w, &["sigma".to_string()], &scalar)?)
    })?;
    s.emit_text(
        &mut r,
        "entropy_ratefn.gp",
        &plot_script("entropy_ratefn.csv", 1, 2, "s", "I(s)"),
    )?;
    let (fr, used) = fluctuation_relation_residual(&scalar);
    if symmetric && used > 0 {
        r.verdicts.push(Verdict::at_most(
            "entropy_fluctuation_relation",
            fr,
            FLUCTUATION_RELATION_TOL,
        ));
    } else {
        r.properties
            .push(Property::new("entropy_fluctuation_relation", None, fr));
    }
    r.verdicts.push(Verdict::at_least(
        "rate_nonnegative",
        min_value,
        -IDENTITY_TOL,
    ));
    r.summary =
        json!({ "labels": labels, "mean_rate": mean, "entropy_rate": sigma, "s_max": s_max });
    Ok(r)
}

pub fn linresp(s: &Session, a: &LinrespArgs) -> Result<RunReport> {
    let params = json!({ "lag_cap": a.lag_cap, "epsilons": a.epsilons });
    let mut r = s.report("linresp", params, false);
    let m = &s.model;
    let km = kinetic_coefficients(m)?;
    let cf = CumulantFunction::new(m)?;
    let c = clt_covariance(&cf)?.c;
    let scale = 2.0 * km.beta_bar * km.beta_bar;
    let fdr = (&km.l - &c / scale).amax();
    let gk = green_kubo(m, &a.epsilons, a.lag_cap)?;
    let gk_rel = (&gk.extrapolated - &km.l).amax() / km.l.amax();

    r.verdicts.push(Verdict::at_most(
        "onsager_symmetry",
        km.onsager_residual(),
        ONSAGER_TOL,
    ));
    r.verdicts
        .push(Verdict::at_most("fluctuation_dissipation", fdr, FDR_TOL));
    r.verdicts.push(Verdict::at_most(
        "response_vs_cumulant_hessian",
        km.discrepancy,
        ROUTE_TOL,
    ));
    r.verdicts.push(Verdict::at_most(
        "green_kubo_relative",
        gk_rel,
        GREEN_KUBO_TOL,
    ));

    let n = m.omega_count();
    let labels = m.labels();
    let mut header = vec!["epsilon".to_string()];
    for x in labels {
        for y in labels {
            header.push(format!("L_{x}_{y}"));
        }
    }
    let rows: Vec<Vec<String>> = gk
        .epsilons
        .iter()
        .zip(&gk.partial_sums)
        .map(|(e, sum)| {
            let mut row = vec![sig17(*e)];
            row.extend(
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| sig17(sum[(i, j)])),
            );
            row
        })
        .collect();
    s.emit_rows(&mut r, "green_kubo.csv", &header, &rows)?;
    s.emit_text(
        &mut r,
        "green_kubo.gp",
        &plot_script("green_kubo.csv", 1, 2, "epsilon", "damped sum"),
    )?;
    r.summary = json!({
        "labels": labels,
        "beta_bar": km.beta_bar,
        "kinetic_matrix": matrix_json(&km.l),
        "kinetic_matrix_from_cumulant": matrix_json(&km.l_from_cumulant),
        "clt_covariance": matrix_json(&c),
        "green_kubo_extrapolated": matrix_json(&gk.extrapolated),
        "correlation_sum": matrix_json(&gk.correlation_sum),
        "last_lag_size": gk.last_lag_size,
        "primitive": gk.primitive,
    });
    Ok(r)
}

fn parse_rows(text: &str, n: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("--p1 is not a JSON matrix: {e}")))?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("--p1 must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn adiabatic(s: &Session, a: &AdiabaticArgs) -> Result<RunReport> {
    let m = &s.model;
    let n = m.omega_count();
    let p1 = parse_rows(&a.p1, n)?;
    m.chain()
        .with_p(p1.clone())
        .map_err(|e| CliError::Usage(format!("--p1: {e}")))?;
    if a.sweeps.is_empty() || a.sweeps.contains(&0) {
        return Err(CliError::Usage(
            "--sweeps needs positive step counts".into(),
        ));
    }
    let shape = match a.shape {
        Shape::Linear => Interpolation::Linear,
        Shape::Smoothstep => Interpolation::Smoothstep,
    };
    let params = json!({ "p1": a.p1, "shape": format!("{:?}", a.shape), "sweeps": a.sweeps });
    let mut r = s.report("adiabatic", params, false);
    let schedule = AdiabaticSchedule::new(m.chain().p().clone(), p1, shape, a.sweeps[0])?;
    let r0 = find_ess(&schedule_generator(m, &schedule, 0.0)?)?;
    let results = adiabatic_sweeps(m, &schedule, &a.sweeps, &r0)?;
    let mut script = String::from(
        "set datafile separator ','\nset logscale y\nset xlabel 's = n eps'\nset ylabel 'trace distance'\n\
         set terminal pngcairo size 800,600\nset output 'adiabatic.png'\nplot ",
    );
    for (k, (steps, res)) in a.sweeps.iter().zip(&results).enumerate() {
        let name = format!("adiabatic_{steps}.csv");
        s.emit(&mut r, &name, |w| Ok(write_profile_csv(w, res)?))?;
        if k > 0 {
            script.push_str(", ");
        }
        script.push_str(&format!(
            "'{name}' every ::1 using 2:3 with lines title 'N = {steps}'"
        ));
        r.verdicts.push(Verdict::at_most(
            labelled("trace_error", &steps.to_string()),
            res.max_trace_error,
            IDENTITY_TOL,
        ));
        r.verdicts.push(Verdict::at_least(
            labelled("positivity", &steps.to_string()),
            res.min_block_eigenvalue,
            -IDENTITY_TOL,
        ));
    }
    script.push('\n');
    s.emit_text(&mut r, "adiabatic.gp", &script)?;
    for (w, pair) in a.sweeps.windows(2).zip(results.windows(2)) {
        if w[1] == 2 * w[0] {
            let ratio = pair[0].plateau_error / pair[1].plateau_error;
            let name = format!("plateau_ratio[{}/{}]", w[0], w[1]);
            r.verdicts.push(Verdict::within(
                name,
                ratio,
                PLATEAU_RATIO.0,
                PLATEAU_RATIO.1,
            ));
        }
    }
    r.summary = json!({
        "sweeps": a.sweeps,
        "plateau_errors": results.iter().map(|x| x.plateau_error).collect::<Vec<_>>(),
        "final_errors": results.iter().map(|x| x.errors.last().copied().unwrap_or(0.0)).collect::<Vec<_>>(),
    });
    Ok(r)
}
