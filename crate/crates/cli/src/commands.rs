use std::path::Path;
use std::time::Instant;

use oica::experiments::mean_error;
use oica::identifiability::{classify_generic, collinear_pairs, kernel_report, khatri_rao_rank, rank_one_probe, ProbeConfig};
use oica::{
    build_real_count_system, generate_mixing, population_cumulants, quadric_system, run_sweep,
    sample_cumulants, sample_mixture, CumulantMode, MixingMatrix, RecoveryConfig, SourceSpec, SweepConfig,
};
use serde_json::{json, Value};

use crate::io::{
    file_name, fmt_f64, matrix_csv, read_json, read_matrix_csv, sibling, write_atomic, write_json, CumulantsDoc,
    Manifest,
};
use crate::{CheckArgs, ClassifyArgs, CliError, CumulantsArgs, QuadricsArgs, RealcountArgs, RecoverArgs, SimulateArgs, SweepArgs};

struct Run {
    command: &'static str,
    start: Instant,
    threads: usize,
}

impl Run {
    fn new(command: &'static str, threads: usize) -> Self {
        Self { command, start: Instant::now(), threads }
    }

    fn manifest(&self, out: &Path, config: Value, seed: Option<u64>, outputs: &[&Path], summary: Option<Value>) -> Result<(), CliError> {
        let m = Manifest {
            command: self.command.into(),
            config,
            seed,
            threads: self.threads,
            library_version: oica::VERSION,
            outputs: outputs.iter().map(|p| file_name(p)).collect(),
            summary,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        write_json(&sibling(out, "manifest.json"), &m)
    }
}

fn load_matrix(path: &Path) -> Result<MixingMatrix<f64>, CliError> {
    let m = read_matrix_csv(path)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(CliError::Usage(format!("{}: empty matrix", path.display())));
    }
    Ok(MixingMatrix::new(m))
}

fn load_sources(path: &Path) -> Result<SourceSpec, CliError> {
    let spec: SourceSpec = read_json(path)?;
    Ok(spec.validated()?)
}

/// Writes to stdout; a closed pipe is not an error.
fn print_line(s: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn simulate(a: &SimulateArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("simulate", threads);
    let spec = load_sources(&a.sources)?;
    let mixing = match (&a.matrix, &a.random) {
        (Some(p), _) => load_matrix(p)?,
        (None, Some(v)) => {
            let (i, j) = (v[0], v[1]);
            if i == 0 || j == 0 {
                return Err(CliError::Usage("--random needs positive I and J".into()));
            }
            generate_mixing(i, j, a.seed)
        }
        (None, None) => unreachable!("clap enforces the group"),
    };
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let x = sample_mixture(&mixing, &spec, a.n, a.seed)?;
    let header: Vec<String> = (1..=mixing.rows()).map(|i| format!("x{i}")).collect();
    write_atomic(&a.out, &matrix_csv(&x, Some(&header)))?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(p) = &a.matrix_out {
        write_atomic(p, &matrix_csv(mixing.matrix(), None))?;
        outputs.push(p);
    }
    let config = json!({
        "matrix": a.matrix.as_deref().map(path_str),
        "random": a.random,
        "sources": spec,
        "n": a.n,
    });
    run.manifest(&a.out, config, Some(a.seed), &outputs, None)
}

pub fn cumulants(a: &CumulantsArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("cumulants", threads);
    let (cp, config) = match (&a.matrix, &a.input) {
        (Some(m), _) => {
            let sources = a.sources.as_deref().expect("clap requires --sources");
            let spec = load_sources(sources)?;
            let cp = population_cumulants(&load_matrix(m)?, &spec)?;
            (cp, json!({ "matrix": path_str(m), "sources": spec }))
        }
        (None, Some(p)) => (sample_cumulants(&read_matrix_csv(p)?)?, json!({ "input": path_str(p) })),
        (None, None) => unreachable!("clap enforces the group"),
    };
    write_json(&a.out, &CumulantsDoc::from_pair(&cp))?;
    run.manifest(&a.out, config, None, &[&a.out], None)
}

fn vec_json(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| json_f64(x)).collect())
}

fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(fmt_f64(x)), Value::Number)
}

pub fn recover(a: &RecoverArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("recover", threads);
    let num_sources = match a.num_sources.trim() {
        "auto" => None,
        s => Some(s.parse::<usize>().map_err(|_| CliError::Usage(format!("--num-sources: expected a count or auto, got {s}")))?),
    };
    let mut cfg: RecoveryConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RecoveryConfig::default(),
    };
    cfg.seed = a.seed;
    let cp = match (&a.input, &a.cumulants) {
        (Some(p), _) => sample_cumulants(&read_matrix_csv(p)?)?,
        (None, Some(p)) => read_json::<CumulantsDoc>(p)?.to_pair()?,
        (None, None) => unreachable!("clap enforces the group"),
    };
    let res = oica::recover(&cp, num_sources, &cfg)?;
    write_atomic(&a.out, &matrix_csv(res.a_hat.matrix(), None))?;
    let d = &res.decomposition;
    let diagnostics = json!({
        "num_sources": res.a_hat.cols(),
        "objective": json_f64(res.objective),
        "coefficients": vec_json(&res.coefficients),
        "gaussian_column": vec_json(&res.a_hat.column(res.a_hat.cols() - 1)),
        "decomposition": {
            "subspace_rank": d.subspace_rank,
            "lambdas": vec_json(&d.lambdas),
            "fit": vec_json(&d.fit),
            "residual": json_f64(d.residual),
            "eigenvalues": vec_json(&d.eigenvalues),
            "rank_warning": d.rank_warning,
        },
    });
    let diag_path = sibling(&a.out, "diagnostics.json");
    write_json(&diag_path, &diagnostics)?;
    let config = json!({
        "input": a.input.as_deref().map(path_str),
        "cumulants": a.cumulants.as_deref().map(path_str),
        "num_sources": a.num_sources,
        "recovery": cfg,
    });
    run.manifest(&a.out, config, Some(a.seed), &[&a.out, &diag_path], None)
}

pub fn check(a: &CheckArgs) -> Result<(), CliError> {
    let m = load_matrix(&a.matrix)?;
    let cfg = ProbeConfig { starts: a.starts, seed: a.seed, ..ProbeConfig::default() };
    let verdict = rank_one_probe(&m, &cfg)?;
    let kernel = if m.cols() >= 2 {
        let k = kernel_report(&m)?;
        json!({ "c_shape": [k.c.nrows(), k.c.ncols()], "d_shape": [k.d.nrows(), k.d.ncols()], "kernel_dim": k.kernel_dim })
    } else {
        Value::Null
    };
    let report = json!({
        "rows": m.rows(),
        "cols": m.cols(),
        "verdict": verdict,
        "collinear_pairs": collinear_pairs(&m, cfg.collinear_tol),
        "khatri_rao_rank": khatri_rao_rank(&m),
        "kernel": kernel,
        "generic": classify_generic(m.rows(), m.cols()).label(),
        "seed": a.seed,
        "starts": a.starts,
    });
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            print_line(&serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
    }
}

pub fn classify(a: &ClassifyArgs) -> Result<(), CliError> {
    if a.rows < 2 || a.cols == 0 {
        return Err(CliError::Usage("need --rows >= 2 and --cols >= 1".into()));
    }
    print_line(&format!("I={} J={}: {}", a.rows, a.cols, classify_generic(a.rows, a.cols).label()));
    Ok(())
}

pub fn sweep(a: &SweepArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("sweep", threads);
    let cfg: SweepConfig = read_json(&a.config)?;
    let rows = run_sweep(&cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["I", "J", "trial", "n", "error", "objective", "seed"]).expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.rows.to_string(),
            r.cols.to_string(),
            r.trial.to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            fmt_f64(r.error),
            fmt_f64(r.objective),
            r.seed.to_string(),
        ])
        .expect("in-memory write");
    }
    write_atomic(&a.out, &w.into_inner().expect("in-memory flush"))?;
    let means: Vec<Value> = cfg
        .cols
        .iter()
        .map(|&j| {
            let (m, f) = mean_error(&rows, j);
            json!({ "J": j, "mean_error": json_f64(m), "failures": f })
        })
        .collect();
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| r.reason.as_ref().map(|why| json!({ "J": r.cols, "trial": r.trial, "reason": why })))
        .collect();
    let n = match cfg.mode {
        CumulantMode::Population => None,
        CumulantMode::Sample { n } => Some(n),
    };
    let summary = json!({ "n": n, "means": means, "failures": failures });
    run.manifest(&a.out, serde_json::to_value(&cfg).expect("serializable"), Some(cfg.seed), &[&a.out], Some(summary))
}

pub fn quadrics(a: &QuadricsArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("quadrics", threads);
    let m = load_matrix(&a.matrix)?;
    let sys = quadric_system(&m);
    write_json(&a.out, &sys.to_doc())?;
    let summary = json!({ "quadrics": sys.len(), "khatri_rao_rank": khatri_rao_rank(&m) });
    run.manifest(&a.out, json!({ "matrix": path_str(&a.matrix) }), None, &[&a.out], Some(summary))
}

pub fn realcount(a: &RealcountArgs, threads: usize) -> Result<(), CliError> {
    let run = Run::new("realcount", threads);
    let t = build_real_count_system::<f64>(a.dim, a.real)?;
    let solutions: Vec<Value> = t
        .solutions
        .iter()
        .map(|s| Value::Array(s.iter().map(|z| json!([json_f64(z.re), json_f64(z.im)])).collect()))
        .collect();
    let doc = json!({
        "rows": a.dim,
        "real": a.real,
        "system": t.system.to_doc(),
        "solutions": solutions,
        "real_count": t.real_count,
        "max_residual": json_f64(t.max_residual()),
        "min_pairwise_distance": json_f64(t.min_pairwise_distance()),
    });
    write_json(&a.out, &doc)?;
    run.manifest(&a.out, json!({ "dim": a.dim, "real": a.real }), None, &[&a.out], None)
}
