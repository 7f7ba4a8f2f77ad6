use std::cell::Cell;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::input::{load_chart, load_instance, load_rep, Instance};
use super::report::{ErrorRecord, Record, Report};
use crate::cproj_geometry::{
    change_representative, is_type_11, is_type_11_bundle, sample_grid, standard_complex_structure, weyl_projective,
    CProjectiveData, LeafConnection, TYPE11_TOL,
};
use crate::error::{Error, Result};
use crate::polynomial_algebra::{LeafKind, PolyField, RationalField};
use crate::quaternionic_holonomy::{
    classify_curvature, gamma_system, gibbons_hawking_chart, loop_holonomy, loop_spot_check, rotating_structure,
    sample_points, solve_unique_gamma, square_loop, validate_chart, HolonomyReport, QuaternionicChart,
};
use crate::tractor_transport::{condition_number, fiber_basis, transport_matrix, Path as LeafPath};
use crate::twistor_lines::{
    canonical_target, collocation_grid, complex_structure_at, integrability_check, jd_field, line_at, max_matching_residual,
    quaternion_frame, s1_invariance_check, tangent_frame, JdField, LineAnsatz, LineSolverConfig,
};
use crate::twistor_space::{cauchy_riemann_residual, cstar_action, real_structure, Chart, ChartPoint, TwistorConfig, TwistorSpace};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidInput(_) | Error::Dimension { .. } | Error::Type11Violation { .. } | Error::Io(_) => {
            EXIT_INPUT
        }
        _ => EXIT_SOLVER,
    }
}

pub fn error_record(e: &Error) -> ErrorRecord {
    let debug = format!("{e:?}");
    let kind = debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string();
    ErrorRecord {
        kind,
        message: e.to_string(),
        exit_code: exit_code(e),
    }
}

/// Maps `f` over `items` on up to `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rpoint(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.gen_range(-r..r), rng.gen_range(-r..r))).collect()
}

fn conj(z: &[Complex64]) -> Vec<Complex64> {
    z.iter().map(|v| v.conj()).collect()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn worst<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn collect_max(values: Vec<Result<f64>>) -> Result<f64> {
    Ok(worst(values.into_iter().collect::<Result<Vec<_>>>()?))
}

/// M-coordinates of the real line through `a0` with fiber value `s0` at `λ = 0`.
pub fn line_target(a0: &[Complex64], s0: &[Complex64]) -> DVector<f64> {
    let n = a0.len();
    let mut m = canonical_target(&conj(a0));
    for (i, v) in s0.iter().enumerate() {
        m[2 * n + 2 * i] = v.re;
        m[2 * n + 2 * i + 1] = v.im;
    }
    m
}

/// Loaded inputs shared by the commands.
pub struct Session {
    pub config: RunConfig,
    pub instance: Option<Instance>,
}

impl Session {
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let instance = match &config.instance {
            Some(p) => Some(load_instance(p)?),
            None => None,
        };
        Ok(Session { config, instance })
    }

    fn instance(&self) -> Result<&Instance> {
        self.instance
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("no instance file given (set `instance` in the config)".into()))
    }

    /// Independent random stream per purpose, all derived from the seed.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }

    fn radius(&self) -> Result<f64> {
        Ok(self.instance()?.file.domain_radius)
    }

    fn twistor_config(&self) -> Result<TwistorConfig> {
        let inst = self.instance()?;
        let mut cfg = TwistorConfig::with_radius(inst.file.domain_radius, inst.file.n);
        if let Some(k) = self.config.ode_steps {
            cfg.transport.fixed_steps = Some(k);
        }
        Ok(cfg)
    }

    fn space(&self) -> Result<TwistorSpace> {
        let inst = self.instance()?;
        TwistorSpace::new(&inst.data, &inst.bundle, self.twistor_config()?)
    }

    fn is_flat(&self) -> Result<bool> {
        let inst = self.instance()?;
        Ok(inst.data.is_flat_data() && inst.bundle.theta().iter().all(|t| t.is_zero()))
    }

    fn solver(&self) -> LineSolverConfig {
        LineSolverConfig {
            line_tol: self.config.line_tol,
            ..LineSolverConfig::default()
        }
    }

    fn quiet_solver(&self) -> LineSolverConfig {
        LineSolverConfig {
            validate: false,
            ..self.solver()
        }
    }

    fn below(&self, name: &str, value: f64, default: f64) -> Record {
        Record::below(name, value, self.config.tolerance(name, default))
    }

    fn above(&self, name: &str, value: f64, default: f64) -> Record {
        Record::above(name, value, self.config.tolerance(name, default))
    }

    fn new_report(&self, command: &str) -> Report {
        let mut r = Report::new(command, &self.config);
        r.instance_hash = self.instance.as_ref().map(|i| i.hash.clone());
        r
    }

    fn random_targets(&self, stream: u64, count: usize) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
        let n = self.instance()?.file.n;
        let [ra, rs] = self.config.target_radius;
        let mut rng = self.rng(stream);
        Ok((0..count).map(|_| (rpoint(&mut rng, n, ra), rpoint(&mut rng, n, rs))).collect())
    }

    fn canonical_points(&self, stream: u64, count: usize) -> Result<Vec<Vec<Complex64>>> {
        let n = self.instance()?.file.n;
        let r = 0.4 * self.radius()?;
        let mut rng = self.rng(stream);
        Ok((0..count).map(|_| rpoint(&mut rng, n, r)).collect())
    }

    fn representative(&self) -> Result<Option<CProjectiveData>> {
        let inst = self.instance()?;
        match &self.config.rep {
            Some(p) => {
                let form = load_rep(p, inst.file.n)?;
                Ok(Some(change_representative(&inst.data, &form)?))
            }
            None => Ok(None),
        }
    }
}

pub fn check_input(s: &Session) -> Result<Report> {
    let inst = s.instance()?;
    let mut report = s.new_report("check-input");
    let n = inst.file.n;
    let radius = inst.file.domain_radius;
    let grid = sample_grid(n, radius, inst.file.grid);
    let data = &inst.data;

    let mut sym: f64 = 0.0;
    for z in &grid {
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let a = data.christoffel(k, i, j).diagonal_eval(z)?;
                    let b = data.christoffel(k, j, i).diagonal_eval(z)?;
                    sym = sym.max((a - b).norm());
                }
            }
        }
    }
    report.push(s.below("symmetry", sym, 1e-12));
    report.push(s.below("reality", data.reality_residual(&grid)?, 1e-12));
    report.push(s.below("type11_connection", is_type_11(data, &grid)?.residual, TYPE11_TOL));
    report.push(s.below("type11_theta", is_type_11_bundle(&inst.bundle, &grid)?.residual, TYPE11_TOL));

    // Weyl tensor of the holomorphic leaves through a few grid points
    let leaf_points = sample_grid(n, 0.5 * radius, 2);
    let mut weyl: f64 = 0.0;
    for param in grid.iter().take(4) {
        let leaf = LeafConnection::new(data, LeafKind::Holomorphic, &conj(param))?;
        for u in &leaf_points {
            weyl = weyl.max(worst(weyl_projective(&leaf, u)?.iter().map(|v| v.norm())));
        }
    }
    report.push(s.below("weyl_leaf", weyl, 1e-9));
    Ok(report)
}

fn require_check(s: &Session) -> Result<()> {
    let check = check_input(s)?;
    if let Some(r) = check.records.iter().find(|r| !r.pass) {
        return Err(Error::Type11Violation { residual: r.value });
    }
    Ok(())
}

/// Build artifacts kept in the workspace.
struct BuildArtifacts {
    report: Report,
    fiber_bases: serde_json::Value,
    transition_csv: String,
}

fn build_uncached(s: &Session) -> Result<BuildArtifacts> {
    let inst = s.instance()?;
    let n = inst.file.n;
    let radius = inst.file.domain_radius;
    let space = s.space()?;
    let tcfg = s.twistor_config()?.transport;
    let setup = space.setup();
    let mut report = s.new_report("build");
    let jobs = s.config.jobs;
    let r_leaf = 0.5 * radius;
    let leaf_grid = sample_grid(n, r_leaf, 2);

    // leaves of both foliations with a loop and a fiber basis on each
    let mut rng = s.rng(10);
    let mut leaves = Vec::new();
    for kind in [LeafKind::Holomorphic, LeafKind::AntiHolomorphic] {
        for _ in 0..s.config.samples.leaves {
            let param = rpoint(&mut rng, n, r_leaf);
            let o = vec![c(0.0, 0.0); n];
            let p = rpoint(&mut rng, n, r_leaf);
            let q = rpoint(&mut rng, n, r_leaf);
            leaves.push((kind, param, o, p, q));
        }
    }
    let leaf_results = par_map(&leaves, jobs, |(kind, param, o, p, q)| -> Result<_> {
        let leaf = setup.leaf(*kind, param)?;
        let flat = leaf.flatness_residual(&leaf_grid)?;
        let lp = transport_matrix(&leaf, &LeafPath::closed(vec![o.clone(), p.clone(), q.clone()]), &tcfg)?;
        let id = DMatrix::<Complex64>::identity(n + 1, n + 1);
        let loop_dev = worst((lp - id).iter().map(|v| v.norm()));
        let fb = fiber_basis(&leaf, o, &tcfg)?;
        let cond = fb.condition(p)?.max(fb.condition(q)?);
        let affine = if *kind == LeafKind::Holomorphic {
            Some(affine_fit(&fb, &leaf_grid)?)
        } else {
            None
        };
        let dump = fb.to_json(&[p.clone(), q.clone()])?;
        Ok((flat, loop_dev, cond, affine, dump))
    });
    let leaf_results = leaf_results.into_iter().collect::<Result<Vec<_>>>()?;
    report.push(s.below("tractor_flatness", worst(leaf_results.iter().map(|r| r.0)), 1e-9));
    report.push(s.below("closed_loop_transport", worst(leaf_results.iter().map(|r| r.1)), 1e-7));
    report.push(s.below("fiber_basis_condition", worst(leaf_results.iter().map(|r| r.2)), 1e6));
    if s.is_flat()? {
        report.push(s.below("affine_sections", worst(leaf_results.iter().filter_map(|r| r.3)), 1e-8));
    }
    let fiber_bases = serde_json::Value::Array(leaf_results.into_iter().map(|r| r.4).collect());

    // gluing, equivariance and holomorphy of the transition map
    let mut rng = s.rng(11);
    let r_glue = 0.5 * radius;
    let glue: Vec<_> = (0..s.config.samples.gluing)
        .map(|_| {
            let x = rpoint(&mut rng, n, r_glue);
            let xb = rpoint(&mut rng, n, r_glue);
            let l = c(rng.gen_range(0.3..1.5), rng.gen_range(-1.0..1.0));
            let k = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
            (x, xb, l, k)
        })
        .collect();
    let glue_results = par_map(&glue, jobs, |(x, xb, l, k)| -> Result<[f64; 3]> {
        let p = space.phi_plus(x, xb, *l)?;
        let (x2, l2) = space.phi_plus_inverse(&p, None)?;
        let round = worst(x2.iter().zip(x).map(|(a, b)| (a - b).norm())).max((l2 - l).norm());
        let q = space.transition(&p)?;
        let equi = space.transition(&cstar_action(*k, &p))?.distance(&cstar_action(*k, &q));
        let failed = Cell::new(None);
        let tr = |pt: &ChartPoint| match space.transition(pt) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e));
                pt.clone()
            }
        };
        let cr = cauchy_riemann_residual(&tr, &p, 3e-5);
        if let Some(e) = failed.take() {
            return Err(e);
        }
        Ok([round, equi, cr])
    });
    let glue_results = glue_results.into_iter().collect::<Result<Vec<_>>>()?;
    report.push(s.below("gluing_round_trip", worst(glue_results.iter().map(|r| r[0])), 1e-9));
    report.push(s.below("transition_equivariance", worst(glue_results.iter().map(|r| r[1])), 1e-10));
    report.push(s.below("transition_cauchy_riemann", worst(glue_results.iter().map(|r| r[2])), 1e-6));

    // real structure
    let mut rng = s.rng(12);
    let mut invol: f64 = 0.0;
    let mut anti: f64 = 0.0;
    for _ in 0..s.config.samples.gluing {
        let chart = if rng.gen_bool(0.5) { Chart::Plus } else { Chart::Minus };
        let p = ChartPoint::new(chart, rpoint(&mut rng, n, r_glue), DVector::from_vec(rpoint(&mut rng, n + 1, 1.0)));
        invol = invol.max(real_structure(&real_structure(&p)).distance(&p));
        let x = rpoint(&mut rng, n, r_glue);
        let lambda = Complex64::from_polar(rng.gen_range(0.1..0.9), rng.gen_range(0.0..std::f64::consts::TAU));
        let q = real_structure(&space.canonical_line_in(Chart::Plus, &x, lambda)?);
        anti = anti.max(q.distance(&space.canonical_line_in(Chart::Minus, &x, -1.0 / lambda.conj())?));
    }
    report.push(s.below("real_structure_involution", invol, 1e-9));
    report.push(s.below("antipodal", anti, 1e-9));

    // transition samples along one canonical line
    let x = &glue.first().map(|g| g.0.clone()).unwrap_or_else(|| vec![c(0.0, 0.0); n]);
    let mut csv = String::from("lambda_re,lambda_im,round_trip,canonical_transition\n");
    for k in 0..12 {
        let lambda = Complex64::from_polar(0.2 + 0.05 * k as f64, 0.5 * k as f64);
        let p = space.canonical_line_in(Chart::Plus, x, lambda)?;
        let (x2, l2) = space.phi_plus_inverse(&p, None)?;
        let back = space.phi_plus(&x2, &p.base, l2);
        let round = match back {
            Ok(b) => b.distance(&p),
            Err(_) => f64::NAN,
        };
        let canon = space
            .transition(&p)?
            .distance(&space.canonical_line_in(Chart::Minus, x, lambda)?);
        csv += &format!("{},{},{:e},{:e}\n", lambda.re, lambda.im, round, canon);
    }

    Ok(BuildArtifacts {
        report,
        fiber_bases,
        transition_csv: csv,
    })
}

/// Fits the sections of a fiber basis by `M·(1, u₁, …, u_n)` with one
/// constant matrix; returns the max residual.
fn affine_fit(fb: &crate::tractor_transport::VFiberBasis, points: &[Vec<Complex64>]) -> Result<f64> {
    let n = points[0].len();
    let rows = points.len();
    let mut poly = DMatrix::zeros(rows, n + 1);
    let mut vals = DMatrix::zeros(rows, n + 1);
    for (r, u) in points.iter().enumerate() {
        poly[(r, 0)] = c(1.0, 0.0);
        for i in 0..n {
            poly[(r, i + 1)] = u[i];
        }
        let e = fb.evaluate(u)?;
        for k in 0..=n {
            vals[(r, k)] = e[k];
        }
    }
    let m = poly
        .clone()
        .svd(true, true)
        .solve(&vals, 1e-14)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    if condition_number(&m) > 1e8 {
        return Ok(f64::INFINITY);
    }
    Ok(worst((&poly * &m - &vals).iter().map(|v| v.norm())))
}

fn hash_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache directory for the instance and key for the settings that affect
/// build results.
fn build_cache(s: &Session) -> Result<(PathBuf, String)> {
    let inst = s.instance()?;
    let key_cfg = RunConfig {
        out: PathBuf::new(),
        workspace: PathBuf::new(),
        jobs: 1,
        ..s.config.clone()
    };
    let key = serde_json::to_vec(&key_cfg).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((s.config.workspace.join(&inst.hash), hash_hex(&key)[..16].to_string()))
}

pub fn build(s: &Session) -> Result<Report> {
    require_check(s)?;
    let inst = s.instance()?;
    let (dir, key) = build_cache(s)?;
    let cached = dir.join(format!("build-{key}.json"));
    if let Ok(text) = std::fs::read_to_string(&cached) {
        match serde_json::from_str::<Report>(&text) {
            Ok(mut r) if r.instance_hash.as_deref() == Some(inst.hash.as_str()) => {
                eprintln!("build: reusing {}", cached.display());
                r.config = s.config.clone();
                if let Ok(csv) = std::fs::read_to_string(dir.join("transition.csv")) {
                    write_out(s, "transition.csv", &csv)?;
                }
                return Ok(r);
            }
            _ => eprintln!("build: stale cache entry {}, rebuilding", cached.display()),
        }
    }
    let art = build_uncached(s)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("instance.json"), serde_json::to_string_pretty(&inst.file).unwrap_or_default())?;
    std::fs::write(dir.join("fiber_bases.json"), art.fiber_bases.to_string())?;
    std::fs::write(dir.join("transition.csv"), &art.transition_csv)?;
    std::fs::write(&cached, art.report.to_json()?)?;
    write_out(s, "transition.csv", &art.transition_csv)?;
    Ok(art.report)
}

fn write_out(s: &Session, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(&s.config.out)?;
    std::fs::write(s.config.out.join(name), contents)?;
    Ok(())
}

struct LineRecord {
    matching: f64,
    reality: f64,
    kernel_dim: usize,
    gap: f64,
    flat_distance: Option<f64>,
    quaternion: f64,
    span: f64,
    dump: serde_json::Value,
}

pub fn lines(s: &Session) -> Result<Report> {
    let inst = s.instance()?;
    let n = inst.file.n;
    let space = s.space()?;
    let mut report = s.new_report("lines");
    let cfg = s.solver();
    let jobs = s.config.jobs;

    let canon = s.canonical_points(20, s.config.samples.lines)?;
    let canon_res = par_map(&canon, jobs, |x| -> Result<f64> {
        let a = LineAnsatz::canonical(&space, x)?.with_degrees(cfg.base_degree, cfg.fiber_degree);
        max_matching_residual(&space, &a, &collocation_grid(cfg.fiber_degree))
    });
    report.push(s.below("canonical_lines", collect_max(canon_res)?, 1e-10));

    let flat = s.is_flat()?;
    let targets = s.random_targets(21, s.config.samples.lines)?;
    let mut rng = s.rng(22);
    let lambdas: Vec<Vec<Complex64>> = (0..targets.len())
        .map(|_| {
            (0..2)
                .map(|_| Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect()
        })
        .collect();
    let work: Vec<_> = targets.iter().zip(&lambdas).collect();
    let results = par_map(&work, jobs, |((a0, s0), lams)| -> Result<LineRecord> {
        let t = line_target(a0, s0);
        let line = line_at(&space, &t, &cfg)?;
        let frame = tangent_frame(&space, &line, &cfg)?;
        let tri = quaternion_frame(&line, &frame, f64::INFINITY)?;
        let mut span: f64 = 0.0;
        for &lam in lams.iter() {
            span = span.max(tri.span_residual(&complex_structure_at(&line, &frame, lam)?));
        }
        let flat_distance = flat.then(|| line.ansatz.distance(&LineAnsatz::flat_line(a0, s0)));
        let dump = serde_json::json!({
            "target": t.iter().copied().collect::<Vec<_>>(),
            "base_degree": line.ansatz.base_degree(),
            "fiber_degree": line.ansatz.fiber_degree(),
            "coefficients": line.ansatz.to_real().iter().copied().collect::<Vec<_>>(),
            "matching_residual": line.matching_residual,
            "reality_residual": line.reality_residual,
            "kernel_gap": frame.gap,
        });
        Ok(LineRecord {
            matching: line.matching_residual,
            reality: line.reality_residual.unwrap_or(f64::INFINITY),
            kernel_dim: frame.dim(),
            gap: frame.gap,
            flat_distance,
            quaternion: tri.residual(),
            span,
            dump,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let min_gap = results.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let dim_err = worst(results.iter().map(|r| (r.kernel_dim as f64 - 4.0 * n as f64).abs()));
    report.push(s.below("line_matching", worst(results.iter().map(|r| r.matching)), cfg.line_tol));
    report.push(s.below("line_reality", worst(results.iter().map(|r| r.reality)), 1e-8));
    report.push(s.below("kernel_dimension", dim_err, 0.5));
    report.push(s.above("kernel_gap", min_gap, 1e4));
    if flat {
        report.push(s.below("flat_family", worst(results.iter().filter_map(|r| r.flat_distance)), 1e-7));
    }
    report.push(s.below("quaternion_relations", worst(results.iter().map(|r| r.quaternion)), s.config.quaternion_tol));
    report.push(s.below("sphere_span", worst(results.iter().map(|r| r.span)), 1e-6));
    let dump = serde_json::Value::Array(results.into_iter().map(|r| r.dump).collect());
    write_out(s, "lines.json", &format!("{dump:#}\n"))?;
    Ok(report)
}

fn field_for(space: &TwistorSpace, rep: &CProjectiveData, targets: &[DVector<f64>], cfg: &LineSolverConfig, jobs: usize) -> Result<JdField> {
    let parts = par_map(targets, jobs, |t| jd_field(space, rep, std::slice::from_ref(t), cfg));
    let mut samples = Vec::with_capacity(targets.len());
    for p in parts {
        samples.extend(p?.samples);
    }
    Ok(JdField { samples })
}

pub fn jfield(s: &Session) -> Result<Report> {
    let inst = s.instance()?;
    let n = inst.file.n;
    let space = s.space()?;
    let mut report = s.new_report("jfield");
    let cfg = s.quiet_solver();
    let jobs = s.config.jobs;
    let alt = s.representative()?;
    let rep = alt.as_ref().unwrap_or(&inst.data);

    // on S the field is J: λ_D = 0 and J_D = J in the base block
    let canon: Vec<_> = s
        .canonical_points(30, s.config.samples.jfield)?
        .iter()
        .map(|x| canonical_target(x))
        .collect();
    let on_s = field_for(&space, rep, &canon, &cfg, jobs)?;
    let conj_s = DMatrix::from_fn(2 * n, 2 * n, |r, col| match (r == col, r % 2) {
        (false, _) => 0.0,
        (true, 0) => 1.0,
        (true, _) => -1.0,
    });
    let js = &conj_s * standard_complex_structure(n) * &conj_s;
    let mut on_s_err: f64 = 0.0;
    for smp in &on_s.samples {
        let jd = &smp.jd;
        on_s_err = on_s_err
            .max(smp.lambda_d.norm())
            .max(max_abs(&(jd.view((0, 0), (2 * n, 2 * n)) - &js)))
            .max(max_abs(&jd.view((2 * n, 0), (2 * n, 2 * n)).into_owned()));
    }
    report.push(s.below("jd_on_s", on_s_err, 1e-8));

    let targets: Vec<_> = s
        .random_targets(31, s.config.samples.jfield)?
        .iter()
        .map(|(a0, s0)| line_target(a0, s0))
        .collect();
    let field = field_for(&space, rep, &targets, &cfg, jobs)?;
    let id = DMatrix::<f64>::identity(4 * n, 4 * n);
    let square = worst(field.samples.iter().map(|smp| max_abs(&(&smp.jd * &smp.jd + &id))));
    report.push(s.below("jd_square", square, 1e-6));

    let nij = par_map(&field.samples, jobs, |smp| {
        let one = JdField { samples: vec![smp.clone()] };
        integrability_check(&space, rep, &one, s.config.nijenhuis_step, &cfg)
    });
    report.push(s.below("jd_nijenhuis", collect_max(nij)?, 1e-4));

    if alt.is_some() {
        let base = field_for(&space, &inst.data, &targets, &cfg, jobs)?;
        let diff = worst(base.samples.iter().zip(&field.samples).map(|(a, b)| max_abs(&(&a.jd - &b.jd))));
        report.push(s.above("rep_difference", diff, 1e-3));
    }

    let pi = std::f64::consts::PI;
    let subset: Vec<_> = field.samples.iter().take(s.config.samples.s1).cloned().collect();
    let s1 = par_map(&subset, jobs, |smp| {
        let one = JdField { samples: vec![smp.clone()] };
        s1_invariance_check(&space, rep, &one, &[pi / 3.0, pi / 2.0], &cfg)
    });
    report.push(s.below("s1_invariance", collect_max(s1)?, 1e-5));

    write_out(s, "jfield.json", &format!("{:#}\n", field.to_json()))?;
    write_out(s, "jfield.csv", &field.to_csv())?;
    Ok(report)
}

const CHART_DIM: usize = 8;

/// Polynomial one-form with random affine part and one quadratic term per
/// component.
fn random_gamma(rng: &mut ChaCha8Rng) -> Vec<RationalField> {
    let m = CHART_DIM;
    (0..m)
        .map(|_| {
            let mut p = PolyField::constant(m, c(rng.gen_range(-0.5..0.5), 0.0));
            for k in 0..m {
                p = p.add(&PolyField::z(m, k).scale(c(rng.gen_range(-0.5..0.5), 0.0)));
            }
            let (k1, k2) = (rng.gen_range(0..m), rng.gen_range(0..m));
            let quad = PolyField::z(m, k1)
                .checked_mul(&PolyField::z(m, k2))
                .expect("quadratic stays below the degree cap");
            p.add(&quad.scale(c(rng.gen_range(-0.5..0.5), 0.0))).into()
        })
        .collect()
}

fn eval_real(gamma: &[RationalField], x: &[f64]) -> Result<DVector<f64>> {
    let z: Vec<Complex64> = x.iter().map(|&v| c(v, 0.0)).collect();
    let vals = gamma.iter().map(|g| Ok(g.eval(&z, &z)?.re)).collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

pub fn holonomy(s: &Session) -> Result<Report> {
    let mut report = s.new_report("holonomy");
    let jobs = s.config.jobs;
    let samples = &s.config.samples;
    let flat = QuaternionicChart::flat(2);
    let mut rng = s.rng(40);
    let gammas: Vec<_> = (0..samples.gammas).map(|_| random_gamma(&mut rng)).collect();
    let seeds: Vec<u64> = (0..samples.gammas as u64).map(|k| s.config.seed.wrapping_mul(1000).wrapping_add(k)).collect();
    let work: Vec<_> = gammas.iter().zip(&seeds).collect();

    // closure of the bracket and recovery of the shift
    let results = par_map(&work, jobs, |(gamma, seed)| -> Result<[f64; 5]> {
        let chart = flat.shifted(gamma)?;
        let pts = sample_points(CHART_DIM, 0.4, 4, **seed);
        let d = validate_chart(&chart, &pts)?;
        let closure = d.relation_residual.max(d.torsion_residual).max(d.q_residual);
        let i1 = &chart.frame()[0];
        let (mut cond, mut resid, mut oracle, mut recovery) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for sol in solve_unique_gamma(&chart, i1, &pts)? {
            let g = DVector::from_vec(sol.gamma.clone());
            cond = cond.max(sol.condition);
            resid = resid.max(sol.residual);
            recovery = recovery.max((&g + eval_real(gamma, &sol.point)?).amax());
            let (a, rhs) = gamma_system(&chart, i1, &sol.point)?;
            let chol = (a.transpose() * &a)
                .cholesky()
                .ok_or(Error::SingularSystem { residual: f64::NAN, condition: f64::INFINITY })?;
            oracle = oracle.max((chol.solve(&(a.transpose() * rhs)) - g).amax());
        }
        Ok([closure, cond, resid, oracle, recovery])
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |k: usize| worst(results.iter().map(|r| r[k]));
    report.push(s.below("q_bracket_closure", col(0), 1e-9));
    report.push(s.below("gamma_condition", col(1), 1e8));
    report.push(s.below("gamma_residual", col(2), 1e-10));
    report.push(s.below("gamma_oracle", col(3), 1e-10));
    report.push(s.below("gamma_recovery", col(4), 1e-9));

    // a non-integrable structure admits no preserving shift
    let pts = sample_points(CHART_DIM, 0.4, 4, s.config.seed.wrapping_add(7));
    let rotating = rotating_structure()?;
    let mut nonint = f64::INFINITY;
    for x in &pts {
        let r = match solve_unique_gamma(&flat, &rotating, std::slice::from_ref(x)) {
            Ok(sol) => sol[0].residual,
            Err(Error::SingularSystem { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        nonint = nonint.min(r);
    }
    report.push(s.above("nonintegrable_residual", nonint, 1e-3));

    // curvature of a chart preserving its structure
    let (chart, preserved) = match &s.config.chart {
        Some(p) => {
            let (chart, preserved) = load_chart(p)?;
            let preserved = preserved.unwrap_or_else(|| chart.frame()[0].clone());
            (chart, preserved)
        }
        None => {
            let chart = gibbons_hawking_chart(0.5)?;
            let preserved = chart.frame()[0].clone();
            (chart, preserved)
        }
    };
    let m = chart.dim();
    let pts = sample_points(m, 0.4, samples.holonomy, s.config.seed.wrapping_add(8));
    let parts = par_map(&pts, jobs, |x| classify_curvature(&chart, &preserved, std::slice::from_ref(x)));
    let mut hol = merge_reports(parts.into_iter().collect::<Result<Vec<_>>>()?);
    report.push(s.below("membership", hol.max_membership, 1e-8));

    if m == CHART_DIM {
        let gamma0 = random_gamma(&mut rng);
        let shifted = chart.shifted(&gamma0)?;
        let generic = classify_curvature(&shifted, &preserved, &pts[..pts.len().min(3)])?;
        report.push(s.above("generic_membership", generic.max_membership, 1e-3));
    }

    // small loops in the most curved planes at the first two points
    let h = s.config.loop_side;
    let mut loops = Vec::new();
    for smp in hol.samples.iter().take(2) {
        let mut pairs: Vec<_> = smp.pairs.iter().filter(|p| p.curvature_norm > 1e-6).collect();
        pairs.sort_by(|a, b| b.curvature_norm.total_cmp(&a.curvature_norm));
        for p in pairs.into_iter().take(3) {
            loops.push((smp.point.clone(), p.b, p.c));
        }
    }
    let loop_value = if loops.is_empty() {
        // flat in every sampled plane: the holonomy itself must be trivial
        let x = &pts[0];
        let hol = loop_holonomy(&chart, &square_loop(x, 0, 1, h), 8)?;
        (hol - DMatrix::<f64>::identity(m, m)).norm() / (h * h)
    } else {
        let checks = par_map(&loops, jobs, |(x, b, cc)| loop_spot_check(&chart, x, *b, *cc, h, 8));
        hol.loop_checks = checks.into_iter().collect::<Result<Vec<_>>>()?;
        worst(hol.loop_checks.iter().map(|l| l.relative_error))
    };
    report.push(s.below("loop_expansion", loop_value, 5e-2));
    write_out(s, "holonomy_report.json", &(hol.to_json()? + "\n"))?;
    Ok(report)
}

fn merge_reports(parts: Vec<HolonomyReport>) -> HolonomyReport {
    let mut out = HolonomyReport {
        samples: Vec::new(),
        loop_checks: Vec::new(),
        max_membership: 0.0,
        max_remainder: 0.0,
        max_sl_trace: 0.0,
    };
    for p in parts {
        out.max_membership = out.max_membership.max(p.max_membership);
        out.max_remainder = out.max_remainder.max(p.max_remainder);
        out.max_sl_trace = out.max_sl_trace.max(p.max_sl_trace);
        out.samples.extend(p.samples);
        out.loop_checks.extend(p.loop_checks);
    }
    out
}

/// Acceptance criteria and the records each one is judged by.
pub const CRITERIA: [(&str, &[&str]); 12] = [
    ("A1", &["q_bracket_closure"]),
    ("A2", &["type11_connection", "type11_theta"]),
    ("A3", &["tractor_flatness", "closed_loop_transport"]),
    ("A4", &["affine_sections"]),
    ("A5", &["gluing_round_trip", "transition_equivariance", "transition_cauchy_riemann"]),
    ("A6", &["real_structure_involution", "antipodal"]),
    ("A7", &["canonical_lines", "kernel_dimension", "kernel_gap", "flat_family"]),
    ("A8", &["quaternion_relations", "sphere_span"]),
    ("A9", &["jd_on_s", "jd_square", "jd_nijenhuis", "rep_difference"]),
    ("A10", &["s1_invariance"]),
    ("A11", &["gamma_condition", "gamma_residual", "gamma_oracle", "nonintegrable_residual"]),
    ("A12", &["membership", "loop_expansion"]),
];

pub fn all(s: &Session) -> Result<Report> {
    let mut report = s.new_report("all");
    for step in [check_input, build, lines, jfield, holonomy] {
        let r = step(s)?;
        report.records.extend(r.records);
    }
    report.criteria = CRITERIA
        .iter()
        .map(|(id, names)| {
            let found: Vec<_> = report.records.iter().filter(|r| names.contains(&r.name.as_str())).collect();
            super::report::Criterion {
                id: id.to_string(),
                records: found.iter().map(|r| r.name.clone()).collect(),
                pass: if found.is_empty() { None } else { Some(found.iter().all(|r| r.pass)) },
            }
        })
        .collect();
    Ok(report)
}

pub type Command = fn(&Session) -> Result<Report>;

pub fn command(name: &str) -> Option<Command> {
    Some(match name {
        "check-input" => check_input,
        "build" => build,
        "lines" => lines,
        "jfield" => jfield,
        "holonomy" => holonomy,
        "all" => all,
        _ => return None,
    })
}

/// Runs one command; returns the report (with an error record on failure)
/// and the process exit code.
pub fn execute(name: &str, config: RunConfig) -> (Report, i32) {
    let cmd = command(name).expect("known command");
    let session = match Session::open(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            let mut r = Report::new(name, &config);
            r.error = Some(error_record(&e));
            return (r, exit_code(&e));
        }
    };
    match cmd(&session) {
        Ok(r) => {
            let code = if r.passed() {
                EXIT_PASS
            } else if name == "check-input" {
                EXIT_INPUT
            } else {
                EXIT_ACCEPTANCE
            };
            (r, code)
        }
        Err(e) => {
            let mut r = session.new_report(name);
            r.error = Some(error_record(&e));
            (r, exit_code(&e))
        }
    }
}

pub fn write_report(report: &Report, out: &Path) -> Result<()> {
    report.write(out)
}
