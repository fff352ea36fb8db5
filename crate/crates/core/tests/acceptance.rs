//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 3 7`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex;
use toric_quench::entangle::{reduced_density, reduced_fidelity, region_entropy, topological_entropy, von_neumann_entropy};
use toric_quench::evolve::{evolve_state, time_grid, trajectory, KrylovParams, Propagator};
use toric_quench::experiment::{preset, run_experiment, simulate, ExperimentConfig, Override};
use toric_quench::hamiltonian::{build_hamiltonian, pauli_apply, Couplings, PauliBasis, PauliString, QuenchSpec};
use toric_quench::stabilizer::{enumerate_group, ground_state, sector_state, FlipGroup, SectorLabel};
use toric_quench::state::StateVector;
use toric_quench::{EdgeLattice, Region, Result};

type Check = Result<(bool, String)>;

struct Criterion {
    id: u32,
    name: &'static str,
    /// Wall-clock bound in seconds, if the criterion has one.
    budget: Option<f64>,
    run: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "stabilizer correctness", budget: Some(1.0), run: stabilizers },
    Criterion { id: 2, name: "analytic entropy oracle", budget: Some(30.0), run: entropy_oracle },
    Criterion { id: 3, name: "topological entropy baseline", budget: None, run: stopo_baseline },
    Criterion { id: 4, name: "non-destructive quenches H1/H2", budget: Some(300.0), run: non_destructive },
    Criterion { id: 5, name: "recurrence at pi/2", budget: None, run: recurrence },
    Criterion { id: 6, name: "overlap closed form", budget: None, run: overlap_closed_form },
    Criterion { id: 7, name: "dense vs Krylov, Krylov drift", budget: None, run: cross_validation },
    Criterion { id: 8, name: "H3 size trends (fig1)", budget: Some(600.0), run: fig1_trends },
    Criterion { id: 9, name: "H4 S_topo grows with N (fig2)", budget: Some(7200.0), run: fig2_trend },
    Criterion { id: 10, name: "H5 weak vs strong (fig3)", budget: Some(900.0), run: fig3_trend },
    Criterion { id: 11, name: "sector indistinguishability", budget: None, run: indistinguishability },
    Criterion { id: 12, name: "deterministic preset output", budget: None, run: determinism },
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (mut pass, mut detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = c.budget {
            if secs > b {
                pass = false;
                detail.push_str(&format!("; over the {b:.0} s budget"));
            }
        }
        if !pass {
            failed += 1;
        }
        println!("{} {:>2} {}: {} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, c.id, c.name, detail, secs);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

const LATTICES: [(usize, usize); 3] = [(2, 2), (2, 3), (3, 3)];

fn setup(m: usize, n: usize) -> Result<(EdgeLattice, FlipGroup, StateVector<f64>)> {
    let lat = EdgeLattice::new(m, n)?;
    let grp = enumerate_group(&lat)?;
    let psi = ground_state(&lat, &grp)?;
    Ok((lat, grp, psi))
}

fn expect(psi: &StateVector<f64>, p: &PauliString<f64>) -> Result<f64> {
    let v = pauli_apply(p, psi)?;
    Ok(psi.amplitudes().iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum())
}

fn stabilizers() -> Check {
    let mut worst = 0.0f64;
    let mut orders = true;
    for (m, n) in LATTICES {
        let (lat, grp, psi) = setup(m, n)?;
        orders &= grp.order() == 1usize << (m * n - 1);
        for s in lat.stars() {
            worst = worst.max((expect(&psi, &PauliString::new(s.mask(), 0, 1.0)?)? - 1.0).abs());
        }
        for p in lat.plaquettes() {
            worst = worst.max((expect(&psi, &PauliString::new(0, p.mask(), 1.0)?)? - 1.0).abs());
        }
    }
    Ok((worst < 1e-12 && orders, format!("max |<S> - 1| = {worst:.1e}, |G| = 2^(mn-1): {orders}")))
}

/// Regions of at most `max` edges, as masks.
fn small_regions(num_spins: usize, max: usize) -> Vec<u64> {
    (1u64..1 << num_spins).filter(|m| (m.count_ones() as usize) <= max).collect()
}

fn entropy_oracle() -> Check {
    let (lat, grp, psi) = setup(2, 3)?;
    let full = (1u64 << lat.num_spins()) - 1;
    let mut count = 0;
    let (mut worst_group, mut worst_area) = (0.0f64, 0.0f64);
    for mask in small_regions(lat.num_spins(), 6) {
        let region = Region::new((0..12).filter(|e| mask >> e & 1 == 1), 12)?;
        if !lat.is_contractible(&region) {
            continue;
        }
        count += 1;
        let s = von_neumann_entropy(&reduced_density(&psi, &region)?)?;
        let inside = grp.masks().iter().filter(|&&g| g & !mask == 0).count() as f64;
        let outside = grp.masks().iter().filter(|&&g| g & mask == 0).count() as f64;
        let oracle = (grp.order() as f64 / (inside * outside)).log2();
        let boundary = lat
            .stars()
            .iter()
            .filter(|st| st.mask() & mask != 0 && st.mask() & (full & !mask) != 0)
            .count() as f64;
        worst_group = worst_group.max((s - oracle).abs());
        worst_area = worst_area.max((s - (boundary - 1.0)).abs());
    }
    let pass = count > 0 && worst_group < 1e-9 && worst_area < 1e-9;
    Ok((pass, format!("{count} regions, max |S - group formula| = {worst_group:.1e}, max |S - (L-1)| = {worst_area:.1e}")))
}

fn stopo_baseline() -> Check {
    let mut worst = 0.0f64;
    let mut vac_zero = true;
    for (m, n) in LATTICES {
        let (lat, _, psi) = setup(m, n)?;
        let lw = lat.levin_wen_regions()?;
        worst = worst.max((topological_entropy(&psi, &lw)? - 1.0).abs());
        vac_zero &= topological_entropy(&StateVector::<f64>::vacuum(lat.num_spins())?, &lw)? == 0.0;
    }
    Ok((worst < 1e-9 && vac_zero, format!("max |S_topo - 1| = {worst:.1e}, vacuum exactly 0: {vac_zero}")))
}

fn single_basis_quenches() -> Vec<(String, QuenchSpec<f64>)> {
    let mut out = Vec::new();
    for basis in [PauliBasis::Z, PauliBasis::X] {
        for disordered in [false, true] {
            let c = if disordered {
                Couplings::Disordered { mean: 1.0, width: 0.5, seed: 7 }
            } else {
                Couplings::Uniform(1.0)
            };
            let tag = if disordered { "disordered" } else { "uniform" };
            out.push((format!("H1({basis},{tag})"), QuenchSpec::H1 { basis, h: c.clone() }));
            out.push((format!("H2({basis},{tag})"), QuenchSpec::H2 { basis, j: c }));
        }
    }
    out
}

fn non_destructive() -> Check {
    let (lat, _, psi0) = setup(2, 3)?;
    let lw = lat.levin_wen_regions()?;
    let regions = [lat.bulk_region(), lat.plaquette_edges(0, 0)];
    let times = time_grid(20.0, 0.05)?;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for (label, spec) in single_basis_quenches() {
        let h = build_hamiltonian(&spec, &lat)?;
        let p = Propagator::dense(&h)?;
        let s0: Vec<f64> = regions.iter().map(|r| region_entropy(&psi0, r)).collect::<Result<_>>()?;
        let t0 = topological_entropy(&psi0, &lw)?;
        let mut dev = 0.0f64;
        for item in trajectory(&p, &h, &psi0, &times)? {
            let (_, psi) = item?;
            for (r, s) in regions.iter().zip(&s0) {
                dev = dev.max((region_entropy(&psi, r)? - s).abs());
            }
            dev = dev.max((topological_entropy(&psi, &lw)? - t0).abs());
        }
        worst.insert(label, dev);
    }
    let bad: Vec<String> = worst.iter().filter(|(_, d)| **d >= 1e-9).map(|(l, d)| format!("{l} {d:.2e}")).collect();
    let max = worst.values().copied().fold(0.0, f64::max);
    let detail = if bad.is_empty() {
        format!("max deviation {max:.1e} bits over 8 quenches")
    } else {
        format!("deviation >= 1e-9 bits: {}", bad.join(", "))
    };
    Ok((bad.is_empty(), detail))
}

fn recurrence() -> Check {
    let mut worst = 0.0f64;
    for (m, n) in [(2, 2), (2, 3)] {
        let (lat, _, psi0) = setup(m, n)?;
        for spec in [
            QuenchSpec::H1 { basis: PauliBasis::Z, h: Couplings::Uniform(1.0) },
            QuenchSpec::H2 { basis: PauliBasis::Z, j: Couplings::Uniform(1.0) },
        ] {
            let h = build_hamiltonian(&spec, &lat)?;
            let p = Propagator::krylov(KrylovParams::default())?;
            let psi = evolve_state(&p, &h, &psi0, FRAC_PI_2)?;
            worst = worst.max((1.0 - psi0.overlap(&psi)?).abs());
        }
    }
    Ok((worst < 1e-9, format!("max |1 - |<Psi0|Psi(pi/2)>|| = {worst:.1e} on 2x2, 2x3 (z basis)")))
}

fn overlap_closed_form() -> Check {
    let (lat, grp, psi0) = setup(2, 2)?;
    let n = lat.num_spins() as f64;
    let h = build_hamiltonian(&QuenchSpec::H1 { basis: PauliBasis::Z, h: Couplings::Uniform(1.0) }, &lat)?;
    let p = Propagator::dense(&h)?;
    let times = time_grid(20.0, 0.05)?;
    let mut worst = 0.0f64;
    for item in trajectory(&p, &h, &psi0, &times)? {
        let (t, psi) = item?;
        // Flipping k spins of the all-up state costs 2k in -sum Z.
        let sum: f64 = grp.masks().iter().map(|g| ((-(n - 2.0 * g.count_ones() as f64)) * t).cos()).sum();
        let oracle = sum.abs() / grp.order() as f64;
        worst = worst.max((psi0.overlap(&psi)? - oracle).abs());
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.1e} over {} points", times.len())))
}

fn cross_validation() -> Check {
    let spec = QuenchSpec::H3 { j1: 0.33, j2: 1.0 };
    let (lat, _, psi0) = setup(2, 3)?;
    let h = build_hamiltonian(&spec, &lat)?;
    let a = evolve_state(&Propagator::dense(&h)?, &h, &psi0, 5.0)?;
    let b = evolve_state(&Propagator::krylov(KrylovParams::default())?, &h, &psi0, 5.0)?;
    let fid = a.overlap(&b)?.powi(2);

    let (lat, _, psi0) = setup(3, 3)?;
    let h = build_hamiltonian(&spec, &lat)?;
    let p = Propagator::krylov(KrylovParams::default())?;
    let times = time_grid(1.0, 0.05)?;
    let mut traj = trajectory(&p, &h, &psi0, &times)?;
    for item in traj.by_ref() {
        item?;
    }
    let stats = traj.stats();
    let pass = 1.0 - fid < 1e-8 && stats.max_norm_drift < 1e-9;
    Ok((
        pass,
        format!(
            "2x3 t=5: 1 - F = {:.1e}; N=18: max drift {:.1e} over {} steps",
            1.0 - fid,
            stats.max_norm_drift,
            stats.steps
        ),
    ))
}

fn fig1_trends() -> Check {
    let cfg = &preset("fig1", &[])?[0];
    let reports = simulate(cfg)?;
    let (small, large) = (&reports[0], &reports[1]);
    let (o8, o12) = (small.min_overlap().unwrap_or(f64::NAN), large.min_overlap().unwrap_or(f64::NAN));
    let s12 = large.mean_s_topo(cfg.average_after).unwrap_or(f64::NAN);
    let f12 = large.min_fidelity().unwrap_or(f64::NAN);
    let (a, b, c) = (o12 < o8, s12 < 0.5, f12 < 0.9);
    let rec = large.recurrence(cfg.recurrence_threshold).map_or("none".to_string(), |t| format!("{t:.3}"));
    Ok((
        a && b && c,
        format!(
            "(a) min overlap N=12 {o12:.4} < N=8 {o8:.4}: {a}; (b) mean S_topo N=12 {s12:.4} < 0.5: {b}; (c) min F N=12 {f12:.4} < 0.9: {c}; N=12 recurrence: {rec}"
        ),
    ))
}

fn fig2_trend() -> Check {
    let cfg = &preset("fig2", &[Override::new("measure", "list", "s_topo")])?[0];
    let reports = simulate(cfg)?;
    let means: Vec<f64> =
        reports.iter().map(|r| r.mean_s_topo(cfg.average_after).unwrap_or(f64::NAN)).collect();
    let pass = means.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = reports.iter().zip(&means).map(|(r, m)| format!("N={} {m:.4}", r.num_spins)).collect();
    Ok((pass, format!("mean S_topo {}", shown.join(", "))))
}

fn fig3_trend() -> Check {
    let ov = [Override::new("lattice", "sizes", "2x3"), Override::new("measure", "list", "s_topo")];
    let cfgs = preset("fig3", &ov)?;
    let mut means = Vec::new();
    for cfg in &cfgs {
        let r = simulate(cfg)?;
        means.push(r[0].mean_s_topo(cfg.average_after).unwrap_or(f64::NAN));
    }
    let pass = means[0] > means[1];
    Ok((pass, format!("N=12 mean S_topo weak {:.4} vs strong {:.4}", means[0], means[1])))
}

fn indistinguishability() -> Check {
    let (lat, grp, _) = setup(2, 3)?;
    let labels = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let sectors: Vec<StateVector<f64>> =
        labels.iter().map(|&(i, j)| sector_state(&lat, &grp, &SectorLabel::pure(i, j))).collect::<Result<_>>()?;
    let (mut count, mut worst_entry, mut worst_fid) = (0, 0.0f64, 0.0f64);
    for mask in small_regions(lat.num_spins(), lat.num_spins() - 1) {
        let region = Region::new((0..12).filter(|e| mask >> e & 1 == 1), 12)?;
        if !lat.is_contractible(&region) {
            continue;
        }
        count += 1;
        let base = reduced_density(&sectors[0], &region)?;
        for s in &sectors[1..] {
            let rho = reduced_density(s, &region)?;
            let d = (base.matrix() - rho.matrix()).iter().map(|z: &Complex<f64>| z.norm()).fold(0.0, f64::max);
            worst_entry = worst_entry.max(d);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                worst_fid = worst_fid.max((reduced_fidelity(&sectors[i], &sectors[j], &region)? - 1.0).abs());
            }
        }
    }
    let pass = count > 0 && worst_entry < 1e-12 && worst_fid < 1e-9;
    Ok((pass, format!("{count} regions, max entry difference {worst_entry:.1e}, max |F - 1| = {worst_fid:.1e}")))
}

fn csv_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path)?);
        }
    }
    Ok(out)
}

fn run_in_pool(threads: usize, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| run_experiment(cfg, dir)).map(|_| ())
}

fn determinism() -> Check {
    let cfg = &preset("fig1", &[Override::new("time", "t_max", 5)])?[0];
    let tmp = tempfile::tempdir()?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_in_pool(1, cfg, &a)?;
    run_in_pool(4, cfg, &b)?;
    let (fa, fb) = (csv_bytes(&a)?, csv_bytes(&b)?);
    let pass = !fa.is_empty() && fa == fb;
    Ok((pass, format!("{} CSVs compared across 1 and 4 threads, identical: {}", fa.len(), fa == fb)))
}
