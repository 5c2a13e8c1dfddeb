//! The six subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use carmo_core::carleman::{
    build_propagator, BuildBudget, ExactEngine, MomentState, StackLayout, TruncatedPropagator,
};
use carmo_core::errbound::{
    bound_subset_j, bound_subset_k, exact_bound, global_bound, select_subset, BoundMethod,
    ErrorCertificate, ErrorExpansion, ExpansionBuilder, StackedInitialMoments, SubsetStrategy,
};
use carmo_core::kron::MultiIndex;
use carmo_core::model::parse::parse_spec_file;
use carmo_core::model::{Mode, SystemSpec};
use carmo_core::oracle::{simulate, SimulationRun};
use carmo_core::safety::{build_safety_region, SafetyEllipsoid, SecondMomentView};
use carmo_core::{Error, Result};

use crate::csvout::{Csv, CsvField};
use crate::RunConfig;

/// Parse the spec file and convert it to the requested coordinate mode.
pub fn load_spec(cfg: &RunConfig) -> Result<SystemSpec<f64>> {
    let spec = parse_spec_file::<f64>(&cfg.spec_path)?;
    Ok(match cfg.mode {
        Mode::Reduced => spec.to_reduced(),
        Mode::Full => spec.to_full()?,
    })
}

fn propagator_paths(cfg: &RunConfig) -> (PathBuf, PathBuf) {
    let base = format!("propagator_nt{}_{}", cfg.n_t, cfg.mode.as_str());
    (
        cfg.out_dir.join(format!("{base}.spm")),
        cfg.out_dir.join(format!("{base}.meta.json")),
    )
}

fn expansion_paths(cfg: &RunConfig, j0: u32, t: u32) -> (PathBuf, PathBuf) {
    let base = format!(
        "expansion_j{}_t{}_nt{}_{}",
        j0,
        t,
        cfg.n_t,
        cfg.mode.as_str()
    );
    (
        cfg.out_dir.join(format!("{base}.spm")),
        cfg.out_dir.join(format!("{base}.meta.json")),
    )
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec_name: String,
    spec_hash: String,
    n_t: u32,
    mode: String,
    tool_version: String,
    artifacts: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    kind: String,
    file: String,
    rows: usize,
    cols: usize,
    nnz: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    j0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<u32>,
}

/// Offline phase: build and persist the propagator and the requested
/// error expansions.
pub fn cmd_build(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let budget = BuildBudget::bytes(cfg.mem_budget);

    let started = Instant::now();
    let propagator = build_propagator(&spec, cfg.n_t, &budget)?;
    let build_time = started.elapsed();
    let (mp, metap) = propagator_paths(cfg);
    propagator.save(&mp, &metap)?;

    let mut blocks = 0usize;
    for j in 0..=cfg.n_t {
        for k in 0..=cfg.n_t {
            let l = &propagator.layout;
            if !propagator.matrix.is_zero_block(
                l.offset(j),
                l.offset(j) + l.block_len(j),
                l.offset(k),
                l.offset(k) + l.block_len(k),
            ) {
                blocks += 1;
            }
        }
    }
    println!(
        "propagator: {} coordinates, {} nonzero blocks, {} nonzeros, built in {:.3}s",
        propagator.layout.total_len(),
        blocks,
        propagator.matrix.nnz(),
        build_time.as_secs_f64()
    );

    let mut manifest = Manifest {
        spec_name: spec.name.clone(),
        spec_hash: spec.content_hash.clone(),
        n_t: cfg.n_t,
        mode: cfg.mode.as_str().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        artifacts: vec![ManifestEntry {
            kind: "propagator".into(),
            file: file_name(&mp),
            rows: propagator.matrix.rows(),
            cols: propagator.matrix.cols(),
            nnz: propagator.matrix.nnz(),
            j0: None,
            t: None,
        }],
    };

    let mut builder = ExpansionBuilder::new(&spec, budget);
    for &j0 in &cfg.j0 {
        for t in 1..=cfg.horizon {
            let started = Instant::now();
            let exp = builder.expansion(&propagator, j0, t)?;
            let (ep, emeta) = expansion_paths(cfg, j0, t);
            exp.save(&ep, &emeta, &spec)?;
            println!(
                "expansion j0={j0} t={t}: width degree {}, {} nonzeros, built in {:.3}s",
                exp.width_degree(),
                exp.stacked.nnz(),
                started.elapsed().as_secs_f64()
            );
            manifest.artifacts.push(ManifestEntry {
                kind: "expansion".into(),
                file: file_name(&ep),
                rows: exp.stacked.rows(),
                cols: exp.stacked.cols(),
                nnz: exp.stacked.nnz(),
                j0: Some(j0),
                t: Some(t),
            });
        }
    }
    std::fs::write(
        cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

fn load_propagator(cfg: &RunConfig, spec: &SystemSpec<f64>) -> Result<TruncatedPropagator<f64>> {
    let (mp, metap) = propagator_paths(cfg);
    if !mp.exists() {
        return Err(Error::Artifact(format!(
            "missing propagator artifact {}; run the build subcommand first",
            mp.display()
        )));
    }
    TruncatedPropagator::load(&mp, &metap, spec)
}

fn load_expansion(
    cfg: &RunConfig,
    spec: &SystemSpec<f64>,
    j0: u32,
    t: u32,
) -> Result<ErrorExpansion<f64>> {
    let (ep, emeta) = expansion_paths(cfg, j0, t);
    if !ep.exists() {
        return Err(Error::Artifact(format!(
            "missing expansion artifact {}; run the build subcommand with --j0 {j0} and a horizon of at least {t}",
            ep.display()
        )));
    }
    let exp = ErrorExpansion::load(&ep, &emeta, spec)?;
    if exp.n_t != cfg.n_t {
        return Err(Error::Artifact(
            "expansion built for another truncation degree".into(),
        ));
    }
    Ok(exp)
}

fn monomial_label(spec: &SystemSpec<f64>, degree: u32, coord: usize) -> String {
    let idx = match spec.mode {
        Mode::Reduced => carmo_core::kron::IndexSet::new(spec.n, degree)
            .get(coord)
            .clone(),
        Mode::Full => MultiIndex::of_full_position(spec.n, degree, coord),
    };
    idx.exponents()
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

/// Online phase: propagate the stacked moments and write them out.
pub fn cmd_propagate(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let propagator = load_propagator(cfg, &spec)?;
    let started = Instant::now();
    let y0 = MomentState::initial(&spec, cfg.n_t)?;
    let init_time = started.elapsed();
    let started = Instant::now();
    let traj = propagator.trajectory(&y0, cfg.horizon)?;
    let online = started.elapsed();
    println!(
        "initial moments in {:.6}s, {} propagation steps in {:.6}s",
        init_time.as_secs_f64(),
        cfg.horizon,
        online.as_secs_f64()
    );
    let mut csv = Csv::new(&["t", "degree", "coordinate", "monomial", "value"]);
    for state in &traj {
        for &j0 in &cfg.j0 {
            let block = state.block(&propagator.layout, j0);
            for (coord, &v) in block.iter().enumerate() {
                csv.row(&[
                    CsvField::U(state.t as u64),
                    CsvField::U(j0 as u64),
                    CsvField::U(coord as u64),
                    CsvField::S(monomial_label(&spec, j0, coord)),
                    CsvField::F(v),
                ]);
            }
        }
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    csv.write_to(&cfg.out_dir.join("moments.csv"))?;
    Ok(())
}

/// Certificates from a persisted expansion per the configured method.
fn certificates_for(
    cfg: &RunConfig,
    exp: &ErrorExpansion<f64>,
    initial: &StackedInitialMoments<f64>,
    size: usize,
) -> Result<ErrorCertificate<f64>> {
    match cfg.bound {
        BoundMethod::Global => global_bound(exp, initial),
        BoundMethod::Exact => exact_bound(exp, initial),
        BoundMethod::SubsetJ => {
            let strategy = match cfg.strategy {
                SubsetStrategy::LargestRowNorm => SubsetStrategy::LargestRowNorm,
                _ => SubsetStrategy::LargestInitialMoment,
            };
            let subset = select_subset(strategy, size, exp, initial);
            bound_subset_j(exp, initial, &subset)
        }
        BoundMethod::SubsetK => {
            let subset =
                select_subset(SubsetStrategy::LargestStackedCoordinate, size, exp, initial);
            bound_subset_k(exp, initial, &subset)
        }
    }
}

/// Evaluate certificates for each requested configuration and write the
/// certificate table.
pub fn cmd_bound(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let mut csv = Csv::new(&["j0", "t", "method", "subset_size", "coordinate", "bound"]);
    for &j0 in &cfg.j0 {
        for t in 1..=cfg.horizon {
            let exp = load_expansion(cfg, &spec, j0, t)?;
            let initial = StackedInitialMoments::new(&spec, exp.width_degree())?;
            let sizes: &[usize] = match cfg.bound {
                BoundMethod::Global | BoundMethod::Exact => &[0],
                _ => &cfg.subset_sizes,
            };
            for &size in sizes {
                let cert = certificates_for(cfg, &exp, &initial, size)?;
                for (coord, &b) in cert.bounds.iter().enumerate() {
                    csv.row(&[
                        CsvField::U(j0 as u64),
                        CsvField::U(t as u64),
                        CsvField::S(cert.method.as_str().to_string()),
                        match cfg.bound {
                            BoundMethod::Global | BoundMethod::Exact => CsvField::Empty,
                            _ => CsvField::U(cert.subset.len() as u64),
                        },
                        CsvField::U(coord as u64),
                        CsvField::F(b),
                    ]);
                }
            }
        }
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    csv.write_to(&cfg.out_dir.join("certificates.csv"))?;
    Ok(())
}

fn default_dims(cfg: &RunConfig, n: usize) -> Vec<usize> {
    cfg.dims
        .clone()
        .unwrap_or_else(|| if n >= 2 { vec![0, 1] } else { vec![0] })
}

/// A region at one time step from propagated moments plus certificates.
fn region_at(
    cfg: &RunConfig,
    spec: &SystemSpec<f64>,
    layout: &StackLayout,
    state: &MomentState<f64>,
    cert1: &ErrorCertificate<f64>,
    cert2: &ErrorCertificate<f64>,
    dims: &[usize],
) -> Result<SafetyEllipsoid<f64>> {
    let view = SecondMomentView::new(
        spec.n,
        spec.mode,
        state.block(layout, 1).to_vec(),
        state.block(layout, 2).to_vec(),
        cert1.bounds.clone(),
        cert2.bounds.clone(),
    )?;
    build_safety_region(&view, cfg.prob_bound, cfg.alpha, dims, cfg.shape)
}

fn zero_certs(layout: &StackLayout, t: u32) -> (ErrorCertificate<f64>, ErrorCertificate<f64>) {
    (
        ErrorCertificate::zero(1, t, layout.block_len(1)),
        ErrorCertificate::zero(2, t, layout.block_len(2)),
    )
}

/// Emit safety regions (and 2-D boundary polylines) for every step up to
/// the horizon.
pub fn cmd_region(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.n_t < 2 {
        return Err(Error::invalid("regions need second moments: set --nt ≥ 2"));
    }
    let spec = load_spec(cfg)?;
    let propagator = load_propagator(cfg, &spec)?;
    let dims = default_dims(cfg, spec.n);
    let y0 = MomentState::initial(&spec, cfg.n_t)?;
    let traj = propagator.trajectory(&y0, cfg.horizon)?;
    let size = cfg.subset_sizes.first().copied().unwrap_or(usize::MAX);

    std::fs::create_dir_all(&cfg.out_dir)?;
    let k = dims.len();
    let mut header: Vec<String> = ["t", "b", "alpha", "epsilon", "radius"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for a in 0..k {
        for b in 0..k {
            header.push(format!("p_{a}_{b}"));
        }
    }
    for a in 0..k {
        header.push(format!("center_{a}"));
    }
    header.push("area".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);

    for state in &traj {
        let t = state.t;
        let (c1, c2) = if t == 0 {
            zero_certs(&propagator.layout, t)
        } else {
            let e1 = load_expansion(cfg, &spec, 1, t)?;
            let e2 = load_expansion(cfg, &spec, 2, t)?;
            let i1 = StackedInitialMoments::new(&spec, e1.width_degree())?;
            let i2 = StackedInitialMoments::new(&spec, e2.width_degree())?;
            (
                certificates_for(cfg, &e1, &i1, size)?,
                certificates_for(cfg, &e2, &i2, size)?,
            )
        };
        let region = region_at(cfg, &spec, &propagator.layout, state, &c1, &c2, &dims)?;
        let mut row = vec![
            CsvField::U(t as u64),
            CsvField::F(cfg.prob_bound),
            CsvField::F(cfg.alpha),
            CsvField::F(region.epsilon),
            CsvField::F(region.radius),
        ];
        for &v in &region.p {
            row.push(CsvField::F(v));
        }
        for &v in &region.center {
            row.push(CsvField::F(v));
        }
        row.push(match region.area() {
            Ok(a) => CsvField::F(a),
            Err(_) => CsvField::Empty,
        });
        csv.row(&row);
        if dims.len() == 2 {
            let mut poly = Csv::new(&["point", "x", "y"]);
            for (i, (x, y)) in region.boundary(256)?.iter().enumerate() {
                poly.row(&[CsvField::U(i as u64), CsvField::F(*x), CsvField::F(*y)]);
            }
            poly.write_to(&cfg.out_dir.join(format!("region_boundary_t{t}.csv")))?;
        }
    }
    csv.write_to(&cfg.out_dir.join("regions.csv"))?;
    Ok(())
}

/// Monte Carlo reference: empirical moments (and trajectories on
/// request).
pub fn cmd_montecarlo(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let started = Instant::now();
    let run = simulate(&spec, cfg.samples, cfg.horizon, cfg.seed)?;
    println!(
        "{} samples over {} steps in {:.6}s",
        cfg.samples,
        cfg.horizon,
        started.elapsed().as_secs_f64()
    );
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = Csv::new(&["t", "degree", "coordinate", "monomial", "mean", "stderr"]);
    for t in 0..=cfg.horizon {
        for &j0 in &cfg.j0 {
            let mean = run.empirical_moment(j0, t)?;
            let se = run.empirical_moment_stderr(j0, t)?;
            for (coord, (&m, &s)) in mean.iter().zip(&se).enumerate() {
                csv.row(&[
                    CsvField::U(t as u64),
                    CsvField::U(j0 as u64),
                    CsvField::U(coord as u64),
                    CsvField::S(monomial_label(&spec, j0, coord)),
                    CsvField::F(m),
                    CsvField::F(s),
                ]);
            }
        }
    }
    csv.write_to(&cfg.out_dir.join("empirical.csv"))?;
    if cfg.dump_trajectories {
        let mut header: Vec<String> = vec!["sample".into(), "t".into()];
        for i in 0..spec.n {
            header.push(format!("x_{i}"));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut traj = Csv::new(&header_refs);
        for s in 0..run.samples {
            for t in 0..=cfg.horizon {
                let mut row = vec![CsvField::U(s as u64), CsvField::U(t as u64)];
                for &v in run.state(s, t) {
                    row.push(CsvField::F(v));
                }
                traj.row(&row);
            }
        }
        traj.write_to(&cfg.out_dir.join("trajectories.csv"))?;
    }
    Ok(())
}

/// Comparison harness: truncated vs exact vs empirical moments, plus
/// region coverage, in one place. Unlike the online commands this one
/// may build blocks.
pub fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let budget = BuildBudget::bytes(cfg.mem_budget);
    let propagator = build_propagator(&spec, cfg.n_t, &budget)?;
    let y0 = MomentState::initial(&spec, cfg.n_t)?;
    let traj = propagator.trajectory(&y0, cfg.horizon)?;
    let run: SimulationRun<f64> = simulate(&spec, cfg.samples, cfg.horizon, cfg.seed)?;
    let mut exact = ExactEngine::new(&spec, budget);
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut csv = Csv::new(&[
        "t",
        "degree",
        "coordinate",
        "monomial",
        "truncated",
        "exact",
        "empirical",
        "stderr",
    ]);
    for state in &traj {
        let t = state.t;
        for &j0 in &cfg.j0 {
            let block = state.block(&propagator.layout, j0);
            let exact_block = match exact.moment(j0, t) {
                Ok(v) => Some(v),
                Err(Error::ResourceBudget { .. }) => None,
                Err(e) => return Err(e),
            };
            let mean = run.empirical_moment(j0, t)?;
            let se = run.empirical_moment_stderr(j0, t)?;
            for (coord, &v) in block.iter().enumerate() {
                csv.row(&[
                    CsvField::U(t as u64),
                    CsvField::U(j0 as u64),
                    CsvField::U(coord as u64),
                    CsvField::S(monomial_label(&spec, j0, coord)),
                    CsvField::F(v),
                    exact_block
                        .as_ref()
                        .map_or(CsvField::Empty, |b| CsvField::F(b[coord])),
                    CsvField::F(mean[coord]),
                    CsvField::F(se[coord]),
                ]);
            }
        }
    }
    csv.write_to(&cfg.out_dir.join("compare_moments.csv"))?;

    // region coverage against the same simulation
    let dims = default_dims(cfg, spec.n);
    let size = cfg.subset_sizes.first().copied().unwrap_or(usize::MAX);
    let mut builder = ExpansionBuilder::new(&spec, budget);
    let mut cov = Csv::new(&[
        "t",
        "b",
        "alpha",
        "epsilon",
        "radius",
        "area",
        "coverage",
        "out_fraction",
    ]);
    for state in &traj {
        let t = state.t;
        let (c1, c2) = if t == 0 {
            zero_certs(&propagator.layout, t)
        } else {
            let e1 = builder.expansion(&propagator, 1, t)?;
            let e2 = builder.expansion(&propagator, 2, t)?;
            let i1 = StackedInitialMoments::new(&spec, e1.width_degree())?;
            let i2 = StackedInitialMoments::new(&spec, e2.width_degree())?;
            (
                certificates_for(cfg, &e1, &i1, size)?,
                certificates_for(cfg, &e2, &i2, size)?,
            )
        };
        // moment degradation can defeat the region construction at late
        // steps; record that instead of aborting the sweep
        match region_at(cfg, &spec, &propagator.layout, state, &c1, &c2, &dims) {
            Ok(region) => {
                let coverage = run.coverage(&region, t)?;
                cov.row(&[
                    CsvField::U(t as u64),
                    CsvField::F(cfg.prob_bound),
                    CsvField::F(cfg.alpha),
                    CsvField::F(region.epsilon),
                    CsvField::F(region.radius),
                    match region.area() {
                        Ok(a) => CsvField::F(a),
                        Err(_) => CsvField::Empty,
                    },
                    CsvField::F(coverage),
                    CsvField::F(1.0 - coverage),
                ]);
            }
            Err(Error::Numeric(_)) => {
                cov.row(&[
                    CsvField::U(t as u64),
                    CsvField::F(cfg.prob_bound),
                    CsvField::F(cfg.alpha),
                    CsvField::Empty,
                    CsvField::Empty,
                    CsvField::Empty,
                    CsvField::Empty,
                    CsvField::Empty,
                ]);
            }
            Err(e) => return Err(e),
        }
    }
    cov.write_to(&cfg.out_dir.join("compare_coverage.csv"))?;
    Ok(())
}
