use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use compact_tik::experiment::{
    add_noise, aggregate_table, delta_for_snr, deltas_for_snr_range, fits_table, linear_oracle, log_spaced_desc,
    results_table, run_sweep, snr_db, substream_seed, Method, NoiseSpec, SweepConfig,
};
use compact_tik::grid::shepp_logan;
use compact_tik::io::{read_sinogram, write_checkpoint, write_image, write_sinogram};
use compact_tik::{reconstruct_nn, solve_tikhonov, tikhonov, ImageGrid, RadonOperator, SinogramGrid, TikhonovProblem};

use crate::args::Command;
use crate::config::RunConfig;
use crate::plot::emit_plot;
use crate::tables::{aggregate_rows, fit_methods, Table};
use crate::CliError;

/// Stream index of the measurement noise in single reconstructions.
const NOISE_STREAM: u64 = 0;
/// Stream index of the network initialization.
const INIT_STREAM: u64 = 1;

pub fn noise_seed(base: u64) -> u64 {
    substream_seed(base, &[NOISE_STREAM])
}

pub fn init_seed(base: u64) -> u64 {
    substream_seed(base, &[INIT_STREAM])
}

pub fn dispatch(cmd: &Command, mut cfg: RunConfig) -> Result<(), CliError> {
    let out = cmd.common().out.clone();
    match cmd {
        Command::Phantom(_) => phantom(&mut cfg, out),
        Command::Sinogram(_) => sinogram(&mut cfg, out),
        Command::Tikhonov(_) => tikhonov_cmd(&mut cfg, out),
        Command::NnReconstruct(_) => nn_cmd(&mut cfg, out),
        Command::Sweep(_) => sweep(&mut cfg, out),
        Command::OracleLinear(_) => oracle(&mut cfg, out),
        Command::RateFit(_) => rate_fit(&mut cfg, out),
        Command::Plot(_) => plot(&mut cfg, out),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Output directory, defaulting to `out`.
fn out_dir(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&dir)?;
    Ok(dir)
}

/// `--out` names a file when it has one of `exts`, otherwise a directory
/// that receives `default_name`.
fn out_file(out: Option<PathBuf>, default_name: &str, exts: &[&str]) -> Result<PathBuf, CliError> {
    let path = match out {
        None => PathBuf::from(default_name),
        Some(p) if p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e)) => p,
        Some(dir) => {
            ensure_dir(&dir)?;
            dir.join(default_name)
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    Ok(path)
}

fn manifest_for_file(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

/// Writes the effective configuration with a comment header naming the
/// command and every derived seed.
pub fn write_manifest(path: &Path, command: &str, cfg: &RunConfig, seeds: &[(String, u64)]) -> Result<(), CliError> {
    let mut text = String::new();
    writeln!(text, "# compact-tik {} run manifest", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(text, "# command: {command}").unwrap();
    writeln!(text, "# rerun: compact-tik {command} --config <this file> --out <dir>").unwrap();
    for (name, seed) in seeds {
        writeln!(text, "# seed {name} = {seed}").unwrap();
    }
    text.push('\n');
    text.push_str(&cfg.to_toml());
    write_text(path, &text)
}

fn write_pgm_and_raw(dir: &Path, stem: &str, img: &ImageGrid) -> Result<(), CliError> {
    write_image(&dir.join(format!("{stem}.imgf")), img)?;
    write_image(&dir.join(format!("{stem}.pgm")), img)?;
    Ok(())
}

fn phantom(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let path = out_file(out, "phantom.pgm", &["pgm", "imgf"])?;
    let img = shepp_logan(cfg.grid.n, cfg.grid.n)?;
    write_image(&path, &img)?;
    write_manifest(&manifest_for_file(&path), "phantom", cfg, &[])?;
    println!("wrote {}x{} phantom to {}", img.nx(), img.ny(), path.display());
    Ok(())
}

/// Noise level from `noise.delta` or, when set, `noise.snr_db`. The SNR is
/// replaced by the matching delta so the manifest records what was used.
fn resolve_delta(cfg: &mut RunConfig, clean: &[f64]) -> Result<f64, CliError> {
    if let Some(snr) = cfg.noise.snr_db.take() {
        cfg.noise.delta = delta_for_snr(clean, snr)?;
    }
    Ok(cfg.noise.delta)
}

struct Synthetic {
    truth: ImageGrid,
    clean: Vec<f64>,
    data: Vec<f64>,
    delta: f64,
}

/// Phantom data through `op` plus seeded noise.
fn synthesize(cfg: &mut RunConfig, op: &RadonOperator) -> Result<Synthetic, CliError> {
    let truth = shepp_logan(cfg.grid.n, cfg.grid.n)?;
    let clean = op.forward(truth.values())?;
    let delta = resolve_delta(cfg, &clean)?;
    let data = add_noise(&clean, NoiseSpec { delta, seed: noise_seed(cfg.seed) })?;
    Ok(Synthetic { truth, clean, data, delta })
}

fn sinogram(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    cfg.resolve_geometry();
    let path = out_file(out, "sinogram.sinf", &["sinf", "pgm", "imgf"])?;
    let geometry = cfg.geometry()?;
    let op = RadonOperator::new(geometry.clone(), cfg.grid.n, cfg.grid.n)?;
    let Synthetic { clean, data, delta, .. } = synthesize(cfg, &op)?;
    let is_image = path.extension().is_some_and(|e| e != "sinf");
    if is_image {
        let img = ImageGrid::new(geometry.n_bins(), geometry.n_angles(), data.clone())?;
        write_image(&path, &img)?;
    } else {
        write_sinogram(&path, &SinogramGrid::new(geometry.clone(), data.clone())?)?;
    }
    write_manifest(&manifest_for_file(&path), "sinogram", cfg, &[("noise".into(), noise_seed(cfg.seed))])?;
    print!("wrote {} bins x {} angles to {}", geometry.n_bins(), geometry.n_angles(), path.display());
    if delta > 0.0 {
        print!(" (delta {delta}, SNR {:.2} dB)", snr_db(&clean, delta)?);
    }
    println!();
    Ok(())
}

/// Data for a single reconstruction: the `input.sinogram` file when given,
/// synthesized phantom data otherwise. The truth is only known in the
/// second case.
fn load_or_synthesize(cfg: &mut RunConfig) -> Result<(RadonOperator, Vec<f64>, Option<ImageGrid>), CliError> {
    cfg.resolve_geometry();
    let n = cfg.grid.n;
    if let Some(path) = cfg.input.sinogram.clone() {
        let sino = read_sinogram(&path, cfg.geometry.step.unwrap())?;
        let g = sino.geometry().clone();
        cfg.geometry.n_angles = g.n_angles();
        cfg.geometry.n_bins = Some(g.n_bins());
        cfg.geometry.det_halfwidth = g.det_halfwidth();
        let op = RadonOperator::new(g, n, n)?;
        return Ok((op, sino.into_values(), None));
    }
    let op = RadonOperator::new(cfg.geometry()?, n, n)?;
    let syn = synthesize(cfg, &op)?;
    Ok((op, syn.data, Some(syn.truth)))
}

fn tikhonov_cmd(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(out)?;
    let (op, data, truth) = load_or_synthesize(cfg)?;
    let alpha = cfg.tikhonov.alpha;
    let problem = TikhonovProblem::new(&op, &data, alpha)?.with_cg(cfg.cg());
    let sol = solve_tikhonov(&problem)?;
    let n = cfg.grid.n;
    let img = ImageGrid::new(n, n, sol.x.clone())?;
    write_pgm_and_raw(&dir, "reconstruction", &img)?;

    let mut summary = String::new();
    writeln!(summary, "alpha = {alpha}").unwrap();
    writeln!(summary, "cg_iterations = {}", sol.cg_iterations).unwrap();
    writeln!(summary, "converged = {}", sol.converged).unwrap();
    writeln!(summary, "normal_residual = {:e}", sol.normal_residual).unwrap();
    writeln!(summary, "objective = {}", problem.objective(&sol.x)?).unwrap();
    if let Some(t) = &truth {
        writeln!(summary, "error = {}", img.distance(t)?).unwrap();
    }
    write_text(&dir.join("summary.txt"), &summary)?;
    let seeds = if truth.is_some() { vec![("noise".to_string(), noise_seed(cfg.seed))] } else { vec![] };
    write_manifest(&dir.join("manifest.toml"), "tikhonov", cfg, &seeds)?;
    print!("{summary}");
    if !sol.converged {
        return Err(CliError::Numerical(format!(
            "conjugate gradients stopped after {} iterations without reaching tolerance",
            sol.cg_iterations
        )));
    }
    Ok(())
}

fn nn_cmd(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(out)?;
    let (op, data, truth) = load_or_synthesize(cfg)?;
    let mut nn = cfg.nn_config(init_seed(cfg.seed))?;
    nn.trace_path = Some(dir.join("trace.txt"));
    let n = cfg.grid.n;
    let rec = reconstruct_nn(&nn, &op, &data, n, n)?;
    write_pgm_and_raw(&dir, "reconstruction", &rec.image)?;
    write_checkpoint(&dir.join("weights.mlpw"), &rec.params)?;

    let mut summary = String::new();
    writeln!(summary, "alpha = {}", nn.alpha).unwrap();
    writeln!(summary, "iterations = {}", nn.iterations).unwrap();
    writeln!(summary, "best_iteration = {}", rec.best_iteration).unwrap();
    writeln!(summary, "initial_objective = {}", rec.objective_trace[0]).unwrap();
    writeln!(summary, "best_objective = {}", rec.final_objective).unwrap();
    writeln!(summary, "init_redraws = {}", rec.init_redraws).unwrap();
    writeln!(summary, "max_abs_weight = {}", rec.params.max_abs()).unwrap();
    if let Some(t) = &truth {
        writeln!(summary, "error = {}", rec.image.distance(t)?).unwrap();
        let tik = solve_tikhonov(&TikhonovProblem::new(&op, &data, nn.alpha)?.with_cg(cfg.cg()))?;
        let j_tik = tikhonov::objective(&op, &tik.x, &data, nn.alpha, None)?;
        writeln!(summary, "tikhonov_objective = {j_tik}").unwrap();
        writeln!(summary, "tikhonov_error = {}", ImageGrid::new(n, n, tik.x)?.distance(t)?).unwrap();
    }
    write_text(&dir.join("summary.txt"), &summary)?;
    let mut seeds = vec![("init".to_string(), nn.seed)];
    if truth.is_some() {
        seeds.insert(0, ("noise".to_string(), noise_seed(cfg.seed)));
    }
    write_manifest(&dir.join("manifest.toml"), "nn-reconstruct", cfg, &seeds)?;
    print!("{summary}");
    Ok(())
}

/// Builds the core sweep configuration, deriving and recording the noise
/// levels when the config does not list them.
pub fn sweep_config(cfg: &mut RunConfig) -> Result<SweepConfig, CliError> {
    cfg.resolve_geometry();
    cfg.validate()?;
    let n = cfg.grid.n;
    let geometry = cfg.geometry()?;
    if cfg.sweep.deltas.is_empty() {
        let op = RadonOperator::new(geometry.clone(), n, n)?;
        let y = op.forward(shepp_logan(n, n)?.values())?;
        cfg.sweep.deltas =
            deltas_for_snr_range(&y, cfg.sweep.snr_low, cfg.sweep.snr_high, cfg.sweep.n_deltas, cfg.spacing()?)?;
    }
    let mut methods = Vec::new();
    for m in &cfg.sweep.methods {
        methods.push(match m.as_str() {
            "tikhonov" => Method::Tikhonov,
            _ => Method::Nn(cfg.nn_config(init_seed(cfg.seed))?),
        });
    }
    let sc = SweepConfig {
        n,
        geometry,
        deltas: cfg.sweep.deltas.clone(),
        n_realizations: cfg.sweep.n_realizations,
        n_alphas: cfg.sweep.n_alphas,
        alpha_decades: cfg.sweep.alpha_decades,
        methods,
        seed: cfg.seed,
        cg: cfg.cg(),
    };
    sc.validate()?;
    Ok(sc)
}

fn sweep(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(out)?;
    let sc = sweep_config(cfg)?;
    let res = run_sweep(&sc)?;

    write_text(&dir.join("results.csv"), &results_table(&res.records))?;
    write_text(&dir.join("aggregate.csv"), &aggregate_table(&res.aggregates))?;
    write_text(&dir.join("fits.csv"), &fits_table(&res.fits))?;
    if !res.aggregates.is_empty() {
        write_text(&dir.join("plot.svg"), &emit_plot(&res.aggregates, cfg.plot.reference_exponent)?)?;
    }
    let mut seeds = Vec::new();
    if sc.methods.iter().any(|m| matches!(m, Method::Nn(_))) {
        seeds.push(("init".to_string(), init_seed(cfg.seed)));
    }
    for (di, _) in sc.deltas.iter().enumerate() {
        for r in 0..sc.n_realizations {
            seeds.push((format!("noise[{di}][{r}]"), substream_seed(sc.seed, &[di as u64, r as u64])));
        }
    }
    write_manifest(&dir.join("manifest.toml"), "sweep", cfg, &seeds)?;

    for (method, delta) in &res.failed_deltas {
        eprintln!("warning: every {method} reconstruction failed at delta {delta}");
    }
    for rec in &res.records {
        for (a, e) in rec.alphas.iter().zip(&rec.errors) {
            if let Err(msg) = e {
                eprintln!("warning: {} failed at delta {} alpha {a}: {msg}", rec.method, rec.delta);
            }
        }
    }
    print!("{}", aggregate_table(&res.aggregates));
    for (m, f) in &res.fits {
        match f {
            Some(f) => println!("{m}: slope {:.6}", f.slope),
            None => println!("{m}: no fit"),
        }
    }
    Ok(())
}

fn oracle(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir(out)?;
    let o = &cfg.oracle;
    if o.n_deltas < 2 || !(o.delta_min > 0.0 && o.delta_min < o.delta_max) {
        return Err(CliError::Invalid("oracle needs 0 < delta_min < delta_max and n_deltas >= 2".into()));
    }
    let deltas = log_spaced_desc(o.delta_min, o.delta_max, o.n_deltas);
    let res = linear_oracle(o.mu, o.n_dim, &deltas, cfg.seed)?;
    let mut table = String::from("delta,alpha,error,noise_free_error,noise_norm\n");
    for i in 0..res.deltas.len() {
        writeln!(
            table,
            "{},{},{},{},{}",
            res.deltas[i], res.alphas[i], res.errors[i], res.noise_free_errors[i], res.noise_norms[i]
        )
        .unwrap();
    }
    write_text(&dir.join("oracle.csv"), &table)?;
    let name = format!("oracle-mu{}", o.mu);
    write_text(&dir.join("fits.csv"), &fits_table(&[(name, Some(res.fit))]))?;
    write_manifest(&dir.join("manifest.toml"), "oracle-linear", cfg, &[])?;
    println!("mu {} expected {:.6} slope {:.6}", res.mu, 2.0 * res.mu / (2.0 * res.mu + 1.0), res.fit.slope);
    Ok(())
}

fn read_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let path = cfg.input.table.as_ref().ok_or_else(|| CliError::Invalid("no input table given".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Table::parse(&text)
}

fn rate_fit(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = aggregate_rows(&read_table(cfg)?)?;
    if rows.is_empty() {
        return Err(CliError::Invalid("table has no usable rows".into()));
    }
    let fits = fit_methods(&rows);
    let dir = out_dir(out)?;
    write_text(&dir.join("fits.csv"), &fits_table(&fits))?;
    write_manifest(&dir.join("manifest.toml"), "rate-fit", cfg, &[])?;
    for (m, f) in &fits {
        match f {
            Some(f) => println!("{m} slope {:.6} intercept {:.6} residual {:.6}", f.slope, f.intercept, f.residual),
            None => println!("{m} slope NaN (fewer than two noise levels)"),
        }
    }
    Ok(())
}

fn plot(cfg: &mut RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = aggregate_rows(&read_table(cfg)?)?;
    let svg = emit_plot(&rows, cfg.plot.reference_exponent)?;
    let dir = out_dir(out)?;
    let path = dir.join("plot.svg");
    write_text(&path, &svg)?;
    write_manifest(&dir.join("manifest.toml"), "plot", cfg, &[])?;
    println!("wrote {}", path.display());
    Ok(())
}
