use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use kinklab::classifier::{
    classify_outcome, collide as run_collision, track_charges, velocity_scan, ChargeTrack, OutcomeRecord,
};
use kinklab::evolve::{CollisionSetup, EvolveError, Trajectory};
use kinklab::io::{
    read_config_with_overrides, read_snapshot, read_timeseries, write_config, write_heatmap, write_outcome,
    write_scan_summary, write_snapshot, write_timeseries, ConfigError, ParseError, RelaxKind, RunConfig,
};
use kinklab::lattice::max_abs;
use kinklab::model::ModelParams;
use kinklab::static_solver::{
    initial_kink_guess, molecule_guess, relax as relax_profile, PolishOptions, RelaxError, RelaxMethod, SeedKind,
    StaticProfile,
};

use crate::{AnalyzeArgs, RunArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Evolve(#[from] EvolveError),
    #[error("{0}")]
    Relax(#[from] RelaxError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    NotEmpty(PathBuf),
    #[error("{0}")]
    Missing(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn prepare_out(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() && !force {
            return Err(CliError::NotEmpty(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = match &args.config {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(read_config_with_overrides(&text, &overrides)?)
}

/// Relaxes one seed kind with the configured schedule and polish.
fn relax_seed(c: &RunConfig, kind: SeedKind) -> Result<StaticProfile, RelaxError> {
    let s0 = initial_kink_guess(c.relax_grid(), kind, c.model)?;
    Ok(relax_profile(&s0, c.model, &c.schedule, &c.polish)?.profile)
}

fn relax_molecule(c: &RunConfig) -> Result<StaticProfile, RelaxError> {
    let s0 = molecule_guess(c.relax_grid());
    let polish = PolishOptions {
        residual_tol: c.molecule_tol,
        ..c.polish
    };
    Ok(relax_profile(&s0, c.model, &c.schedule, &polish)?.profile)
}

fn history_csv(p: &StaticProfile) -> String {
    let mut out = String::from("index,lattice_energy\n");
    for (i, e) in p.energy_history.iter().enumerate() {
        let _ = writeln!(out, "{i},{e:.16e}");
    }
    out
}

fn profile_line(name: &str, p: &StaticProfile, m: ModelParams) -> String {
    format!(
        "{name}: energy={:.16e} first_integral_max={:.16e} charge={:.16e} static_residual_max={:.16e} method={} iterations={}",
        p.energy,
        p.first_integral_max(m),
        p.charge(),
        p.static_residual_max(m),
        p.method.name(),
        p.iterations_used
    )
}

pub fn relax(args: &RunArgs) -> Result<(), CliError> {
    let c = load_config(args)?;
    prepare_out(&args.out, args.force)?;
    write(&args.out.join("config.txt"), write_config(&c))?;

    let mut names: Vec<&str> = Vec::new();
    let mut seeds: Vec<SeedKind> = Vec::new();
    let mut molecule = false;
    match c.relax_kind {
        RelaxKind::Seed(k) => {
            names.push(k.name());
            seeds.push(k);
        }
        RelaxKind::Molecule => molecule = true,
        RelaxKind::All => {
            for k in SeedKind::ALL {
                names.push(k.name());
                seeds.push(k);
            }
            molecule = true;
        }
    }
    use rayon::prelude::*;
    let mut results: Vec<(String, Result<StaticProfile, RelaxError>)> = seeds
        .par_iter()
        .map(|&k| (k.name().to_string(), relax_seed(&c, k)))
        .collect();
    if molecule {
        results.push(("molecule".to_string(), relax_molecule(&c)));
    }

    let mut report = String::new();
    let mut first_error = None;
    let mut done: Vec<(String, StaticProfile)> = Vec::new();
    for (name, r) in results {
        match r {
            Ok(p) => {
                write(&args.out.join(format!("{name}.csv")), write_snapshot(&p.state))?;
                write(&args.out.join(format!("{name}_history.csv")), history_csv(&p))?;
                let line = profile_line(&name, &p, c.model);
                println!("{line}");
                let _ = writeln!(report, "{line}");
                done.push((name, p));
            }
            Err(e) => {
                if let Some(best) = e.best_profile() {
                    write(&args.out.join(format!("{name}_unconverged.csv")), write_snapshot(&best.state))?;
                }
                let line = format!("{name}: failed: {e}");
                println!("{line}");
                let _ = writeln!(report, "{line}");
                first_error.get_or_insert(e);
            }
        }
    }
    let find = |n: &str| done.iter().find(|(k, _)| k == n).map(|(_, p)| p);
    for (a, b) in [("psi_plus", "psi_minus"), ("anti_psi_plus", "anti_psi_minus")] {
        if let (Some(p), Some(q)) = (find(a), find(b)) {
            let mirrored = q.state.mirrored_psi();
            let field_gap = p
                .state
                .phi
                .iter()
                .zip(&mirrored.phi)
                .chain(p.state.psi.iter().zip(&mirrored.psi))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let line = format!(
                "degeneracy {a}/{b}: energy_difference={:.16e} max_field_difference_after_psi_mirror={:.16e}",
                (p.energy - q.energy).abs(),
                field_gap
            );
            println!("{line}");
            let _ = writeln!(report, "{line}");
        }
    }
    if let (Some(k), Some(p)) = (find("kink"), find("psi_plus")) {
        let line = format!(
            "dressing: undressed_minus_dressed_energy={:.16e} dressed_max_abs_psi={:.16e}",
            k.energy - p.energy,
            max_abs(&p.state.psi)
        );
        println!("{line}");
        let _ = writeln!(report, "{line}");
    }
    write(&args.out.join("report.txt"), report)?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn collision_setup(c: &RunConfig, left: StaticProfile, right: StaticProfile) -> CollisionSetup {
    CollisionSetup {
        left,
        right,
        x_left: c.x_left,
        x_right: c.x_right,
        v_left: c.v_left,
        v_right: c.v_right,
        model: c.model,
    }
}

fn track_csv(t: &ChargeTrack) -> String {
    let mut out = String::from("time,positive_centroid,negative_centroid,positive_peak,negative_peak,positive_charge,negative_charge\n");
    let o = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.16e}"));
    for k in 0..t.len() {
        let _ = writeln!(
            out,
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            t.times[k],
            o(t.positive[k]),
            o(t.negative[k]),
            t.positive_peak[k],
            t.negative_peak[k],
            t.positive_charge[k],
            t.negative_charge[k]
        );
    }
    out
}

fn snapshot_name(k: usize) -> String {
    format!("snap_{k:06}.csv")
}

fn write_analysis(dir: &Path, traj: &Trajectory, track: &ChargeTrack, rec: &OutcomeRecord, c: &RunConfig) -> Result<(), CliError> {
    let text = write_outcome(rec);
    write(&dir.join("outcome.txt"), &text)?;
    write(&dir.join("track.csv"), track_csv(track))?;
    write(&dir.join("heatmap.ppm"), write_heatmap(traj, &c.heatmap))?;
    print!("{text}");
    Ok(())
}

pub fn collide(args: &RunArgs) -> Result<(), CliError> {
    let c = load_config(args)?;
    prepare_out(&args.out, args.force)?;
    write(&args.out.join("config.txt"), write_config(&c))?;
    let (left, right) = rayon::join(|| relax_seed(&c, c.left_kind), || relax_seed(&c, c.right_kind));
    let (left, right) = (left?, right?);
    write(&args.out.join("profiles/left.csv"), write_snapshot(&left.state))?;
    write(&args.out.join("profiles/right.csv"), write_snapshot(&right.state))?;
    let setup = collision_setup(&c, left, right);
    let (traj, track, rec) = run_collision(&setup, c.grid(), &c.evolve, &c.thresholds)?;
    write(&args.out.join("timeseries.csv"), write_timeseries(&traj.diagnostics))?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        write(&args.out.join("snapshots").join(snapshot_name(k)), write_snapshot(s))?;
    }
    write_analysis(&args.out, &traj, &track, &rec, &c)
}

pub fn scan(args: &RunArgs, workers: Option<usize>) -> Result<(), CliError> {
    let c = load_config(args)?;
    let workers = match workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    prepare_out(&args.out, args.force)?;
    write(&args.out.join("config.txt"), write_config(&c))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let velocities = c.scan_velocities();
    let result = pool.install(|| -> Result<_, CliError> {
        if velocities.is_empty() {
            return Ok(None);
        }
        let (left, right) = rayon::join(|| relax_seed(&c, c.left_kind), || relax_seed(&c, c.right_kind));
        let template = collision_setup(&c, left?, right?);
        Ok(Some(velocity_scan(&velocities, c.model, &template, c.grid(), &c.evolve, &c.thresholds)))
    })?;
    let result = result.unwrap_or(kinklab::classifier::ScanResult {
        entries: Vec::new(),
        v1: None,
    });
    for (k, e) in result.entries.iter().enumerate() {
        let mut text = format!("v={:.16e}\n", e.velocity);
        match (&e.record, &e.error) {
            (Some(r), _) => text.push_str(&write_outcome(r)),
            (None, Some(err)) => {
                let _ = writeln!(text, "outcome=undecided\nerror={err}");
            }
            (None, None) => text.push_str("outcome=undecided\n"),
        }
        write(&args.out.join("records").join(format!("v_{k:04}.txt")), text)?;
    }
    let summary = write_scan_summary(&result);
    write(&args.out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn read_profile(path: &Path, m: ModelParams) -> Result<StaticProfile, CliError> {
    let s = read_snapshot(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(StaticProfile::from_state(s, m, RelaxMethod::GradientFlow, 0))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let dir = &args.dir;
    let text = read(&dir.join("config.txt"))?;
    let c = read_config_with_overrides(&text, &args.set)?;
    let snap_dir = dir.join("snapshots");
    if !snap_dir.is_dir() {
        return Err(CliError::Missing(format!("{}: snapshot directory missing", snap_dir.display())));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(io_err(&snap_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Missing(format!("{}: no snapshots found", snap_dir.display())));
    }
    let mut snapshots = Vec::with_capacity(names.len());
    for p in &names {
        let s = read_snapshot(&read(p)?).map_err(|source| CliError::Parse {
            path: p.clone(),
            source,
        })?;
        snapshots.push(s);
    }
    let grid = c.grid();
    if snapshots.iter().any(|s| s.grid != grid) {
        return Err(CliError::Usage("snapshot grid does not match config.txt".into()));
    }
    let ts_path = dir.join("timeseries.csv");
    let diagnostics = read_timeseries(&read(&ts_path)?).map_err(|source| CliError::Parse {
        path: ts_path.clone(),
        source,
    })?;
    let left = read_profile(&dir.join("profiles/left.csv"), c.model)?;
    let right = read_profile(&dir.join("profiles/right.csv"), c.model)?;
    let setup = collision_setup(&c, left, right);
    let traj = Trajectory {
        model: c.model,
        grid,
        dt: c.evolve.dt,
        snapshot_stride: c.evolve.snapshot_stride,
        snapshots,
        diagnostics,
    };
    let track = track_charges(&traj, &c.thresholds);
    let rec = classify_outcome(&traj, &track, &setup, &c.thresholds);
    let out = args.out.clone().unwrap_or_else(|| dir.join("analysis"));
    prepare_out(&out, args.force)?;
    write_analysis(&out, &traj, &track, &rec, &c)
}
