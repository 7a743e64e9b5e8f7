//! SVG figures drawn from files already in the output directory.

use std::path::Path;

use crate::config::Resolved;
use crate::error::{TaskError, TaskResult};
use crate::io::{self, field_label, Table};
use crate::manifest::{input_hashes, Outputs, Task};
use crate::svg::{edges, padded_range, Colormap, Figure, Panel};
use crate::tasks::{paths, CollapseExport, EnsembleSummary, GridExport, PhaseExport, QuenchSummary};

/// Figure families accepted by `render --kind`.
pub const KINDS: [&str; 6] = ["couplings", "quench", "ensemble", "phase", "correlations", "binder"];

fn render_task<'a>(
    id: String,
    dir: &Path,
    inputs: Vec<String>,
    run: impl Fn() -> TaskResult<Outputs> + Send + Sync + 'a,
) -> Task<'a> {
    match input_hashes(dir, &inputs) {
        Ok(h) => Task::new(id, "render", &h, run),
        Err(e) => {
            let msg = e.to_string();
            let key = ("unavailable", msg.clone());
            Task::new(id, "render", &key, move || Err(TaskError::Other(msg.clone())))
        }
    }
}

/// Render tasks for `kind`, or for every family the config produces when `kind` is `all`.
pub fn render_tasks<'a>(r: &'a Resolved, dir: &'a Path, kind: &str) -> Result<Vec<Task<'a>>, String> {
    let wanted = |k: &str| kind == "all" || kind == k;
    if kind != "all" && !KINDS.contains(&kind) {
        return Err(format!("unknown figure kind `{kind}`; expected all or one of {}", KINDS.join(", ")));
    }
    let fields = &r.config.model.fields;
    let labels: Vec<String> = r.states.iter().map(|(s, _)| s.to_string()).collect();
    let mut tasks = Vec::new();
    if wanted("couplings") {
        let inputs = vec![paths::COUPLINGS_CSV.into(), paths::PROFILE_CSV.into()];
        tasks.push(render_task("render/couplings".into(), dir, inputs, move || couplings_figure(dir)));
    }
    if wanted("quench") {
        for &g in fields {
            let mut inputs: Vec<String> = labels.iter().map(|s| paths::quench_series(g, s)).collect();
            inputs.extend(labels.iter().map(|s| paths::quench_summary(g, s)));
            let labels = labels.clone();
            tasks.push(render_task(format!("render/quench/{}", field_label(g)), dir, inputs, move || {
                quench_figures(dir, g, &labels)
            }));
        }
    }
    if wanted("ensemble") && (kind != "all" || r.config.ensembles.is_some()) {
        for &g in fields {
            let mut inputs: Vec<String> = labels.iter().map(|s| paths::quench_summary(g, s)).collect();
            inputs.extend([paths::ensemble_json(g), paths::ensemble_thermal(g)]);
            let labels = labels.clone();
            tasks.push(render_task(format!("render/ensemble/{}", field_label(g)), dir, inputs, move || {
                ensemble_figure(dir, g, &labels)
            }));
        }
    }
    if wanted("phase") {
        tasks.push(render_task("render/phase".into(), dir, vec![paths::GRID_JSON.into()], move || {
            let export: PhaseExport = io::read_json(&dir.join(paths::GRID_JSON))?;
            Ok(vec![("figures/phase_diagram.svg".into(), phase_figure(&export)?)])
        }));
    }
    if wanted("correlations") && (kind != "all" || r.observables.corr) {
        let n_times = r.times().len();
        for &g in fields {
            // lowest- and highest-energy states, as in a low/high comparison
            let picks: Vec<String> = [labels.first(), labels.last()].into_iter().flatten().cloned().collect();
            let inputs = picks.iter().map(|s| paths::quench_corr(g, s, n_times - 1)).collect();
            tasks.push(render_task(format!("render/correlations/{}", field_label(g)), dir, inputs, move || {
                correlation_figure(dir, g, &picks, n_times - 1)
            }));
        }
    }
    if wanted("binder") && (kind != "all" || r.config.mc.is_some()) {
        let inputs = vec![paths::BINDER_CSV.into(), paths::COLLAPSED_CSV.into(), paths::COLLAPSE_JSON.into()];
        tasks.push(render_task("render/binder".into(), dir, inputs, move || binder_figure(dir)));
    }
    Ok(tasks)
}

fn malformed(path: &Path) -> impl Fn(String) -> TaskError + '_ {
    move |m| TaskError::malformed(path, m)
}

fn couplings_figure(dir: &Path) -> TaskResult<Outputs> {
    let path = dir.join(paths::COUPLINGS_CSV);
    let c = io::couplings_from_table(&Table::read(&path)?).map_err(malformed(&path))?;
    let n = c.size();
    let max = c.max_entry().max(1e-300);
    let mut f = Figure::new(760.0, 360.0);
    f.title(&format!("Couplings, L = {n}, {}", c.provenance()));
    let idx: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let e = edges(&idx);
    let p = Panel { left: 60.0, top: 40.0, width: 260.0, height: 260.0, x: (e[0], e[n]), y: (e[n], e[0]) };
    let colors: Vec<Option<String>> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| Some(Colormap::Reds.color(c.get(i, j) / max)))
        .collect();
    // row i drawn at y = i, top to bottom
    f.heatmap(&p, &e, &e, &colors);
    f.axes(&p, "j", "i");
    f.colorbar(330.0, 40.0, 260.0, Colormap::Reds, (0.0, max), "J_ij");

    let ppath = dir.join(paths::PROFILE_CSV);
    let t = Table::read(&ppath)?;
    let l = t.required_floats("l").map_err(malformed(&ppath))?;
    let jb = t.required_floats("jbar").map_err(malformed(&ppath))?;
    let q = Panel { left: 460.0, top: 40.0, width: 260.0, height: 260.0, x: padded_range(l.iter().copied()), y: padded_range(jb.iter().copied().chain([0.0])) };
    f.polyline(&q, &l, &jb, "#444444", true);
    f.points(&q, &l, &jb, "#b2182b", "circle");
    f.axes(&q, "distance l", "mean J(l)");
    Ok(vec![("figures/couplings.svg".into(), f.finish())])
}

struct Trajectory {
    eps: f64,
    t: Vec<f64>,
    sx2: Vec<f64>,
    sz: Vec<f64>,
    running: Vec<f64>,
}

fn read_trajectories(dir: &Path, g: f64, labels: &[String]) -> TaskResult<Vec<Trajectory>> {
    labels
        .iter()
        .map(|s| {
            let q: QuenchSummary = io::read_json(&dir.join(paths::quench_summary(g, s)))?;
            let path = dir.join(paths::quench_series(g, s));
            let t = Table::read(&path)?;
            let m = malformed(&path);
            Ok(Trajectory {
                eps: q.energy_density,
                t: t.required_floats("t").map_err(&m)?,
                sx2: t.required_floats("sx2").map_err(&m)?,
                sz: t.required_floats("sz").map_err(&m)?,
                running: t.required_floats("sx2_running").map_err(&m)?,
            })
        })
        .collect()
}

fn energy_colors(eps: &[f64]) -> (Vec<String>, (f64, f64)) {
    let lo = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    (eps.iter().map(|e| Colormap::Sequential.color((e - lo) / span)).collect(), (lo, if hi > lo { hi } else { lo + 1.0 }))
}

fn quench_figures(dir: &Path, g: f64, labels: &[String]) -> TaskResult<Outputs> {
    let tr = read_trajectories(dir, g, labels)?;
    if tr.is_empty() {
        return Err(TaskError::Other("no quench states to draw".into()));
    }
    let (colors, range) = energy_colors(&tr.iter().map(|t| t.eps).collect::<Vec<_>>());
    let tx = padded_range(tr.iter().flat_map(|t| t.t.iter().copied()));
    let mut f = Figure::new(820.0, 380.0);
    f.title(&format!("Quench dynamics, g/J = {g}"));
    let a = Panel { left: 70.0, top: 40.0, width: 280.0, height: 270.0, x: tx, y: (0.0, 1.05) };
    let b = Panel { left: 440.0, ..a };
    for (t, c) in tr.iter().zip(&colors) {
        f.polyline(&a, &t.t, &t.sx2, c, false);
        f.polyline(&b, &t.t, &t.running, c, false);
    }
    f.axes(&a, "Jt", "S_x^2(t)");
    f.axes(&b, "JT", "time average of S_x^2");
    f.colorbar(750.0, 40.0, 270.0, Colormap::Sequential, range, "E/(JL)");

    let mut z = Figure::new(480.0, 380.0);
    z.title(&format!("Transverse magnetization, g/J = {g}"));
    let p = Panel { left: 70.0, top: 40.0, width: 280.0, height: 270.0, x: tx, y: padded_range(tr.iter().flat_map(|t| t.sz.iter().copied()).chain([0.0])) };
    for (t, c) in tr.iter().zip(&colors) {
        z.polyline(&p, &t.t, &t.sz, c, false);
    }
    z.axes(&p, "Jt", "S_z(t)");
    z.colorbar(400.0, 40.0, 270.0, Colormap::Sequential, range, "E/(JL)");
    let lab = field_label(g);
    Ok(vec![(format!("figures/quench_{lab}.svg"), f.finish()), (format!("figures/sz_{lab}.svg"), z.finish())])
}

fn ensemble_figure(dir: &Path, g: f64, labels: &[String]) -> TaskResult<Outputs> {
    let summaries: Vec<QuenchSummary> =
        labels.iter().map(|s| io::read_json(&dir.join(paths::quench_summary(g, s)))).collect::<TaskResult<_>>()?;
    let ens: EnsembleSummary = io::read_json(&dir.join(paths::ensemble_json(g)))?;
    let tpath = dir.join(paths::ensemble_thermal(g));
    let thermal = Table::read(&tpath)?;
    let te = thermal.required_floats("energy_density").map_err(malformed(&tpath))?;
    let ts = thermal.required_floats("sx2").map_err(malformed(&tpath))?;

    let eps: Vec<f64> = summaries.iter().map(|q| q.energy_density).collect();
    let ta: Vec<f64> = summaries.iter().map(|q| q.averages.last().map_or(f64::NAN, |a| a.sx2)).collect();
    let de: Vec<f64> = ens.states.iter().map(|s| s.energy_density).collect();
    let dv: Vec<f64> = ens.states.iter().map(|s| s.diagonal_sx2).collect();
    let x = padded_range(eps.iter().copied().chain(de.iter().copied()));
    let mut f = Figure::new(480.0, 380.0);
    f.title(&format!("Ensembles, L = {}, g/J = {g}", ens.size));
    let p = Panel { left: 70.0, top: 40.0, width: 300.0, height: 270.0, x, y: (0.0, 1.05) };
    let (cx, cy): (Vec<f64>, Vec<f64>) = te.iter().zip(&ts).filter(|(e, _)| **e >= x.0 && **e <= x.1).map(|(a, b)| (*a, *b)).unzip();
    f.polyline(&p, &cx, &cy, "#000000", false);
    f.points(&p, &eps, &ta, "#2166ac", "circle");
    f.points(&p, &de, &dv, "#b2182b", "star");
    f.axes(&p, "E/(JL)", "S_x^2");
    f.text(380.0, 60.0, 10.0, "start", "line: canonical");
    f.text(380.0, 76.0, 10.0, "start", "dots: time average");
    f.text(380.0, 92.0, 10.0, "start", "stars: diagonal");
    Ok(vec![(format!("figures/ensemble_{}.svg", field_label(g)), f.finish())])
}

/// `S_x²` and `S_z` heatmaps over `(ε, g)` for each grid, with the critical line.
pub fn phase_figure(export: &PhaseExport) -> TaskResult<Vec<u8>> {
    if export.grids.is_empty() || export.grids.iter().any(|g| g.fields.is_empty() || g.energy_densities.is_empty()) {
        return Err(TaskError::Other("phase diagram grid is empty; nothing to draw".into()));
    }
    let rows = export.grids.len();
    let mut f = Figure::new(900.0, 60.0 + 330.0 * rows as f64);
    f.title(&format!("Phase diagram, L = {}", export.size));
    for (k, grid) in export.grids.iter().enumerate() {
        let top = 50.0 + 330.0 * k as f64;
        for (col, (name, values, map)) in
            [("S_x^2", &grid.sx2, Colormap::Sequential), ("S_z", &grid.sz, Colormap::Reds)].into_iter().enumerate()
        {
            heatmap_panel(&mut f, grid, values, map, 80.0 + 440.0 * col as f64, top, &format!("{name}, {}", grid.ensemble));
            let xe = edges(&grid.energy_densities);
            let ye = edges(&grid.fields);
            let p = Panel { left: 80.0 + 440.0 * col as f64, top, width: 300.0, height: 250.0, x: (xe[0], *xe.last().unwrap()), y: (ye[0], *ye.last().unwrap()) };
            let (ce, cg): (Vec<f64>, Vec<f64>) =
                export.critical.iter().filter_map(|c| c.energy_density.map(|e| (e, c.field))).unzip();
            f.polyline(&p, &ce, &cg, "#000000", false);
        }
    }
    Ok(f.finish())
}

fn heatmap_panel(f: &mut Figure, grid: &GridExport, values: &[Option<f64>], map: Colormap, left: f64, top: f64, label: &str) {
    let xe = edges(&grid.energy_densities);
    let ye = edges(&grid.fields);
    let p = Panel { left, top, width: 300.0, height: 250.0, x: (xe[0], *xe.last().unwrap()), y: (ye[0], *ye.last().unwrap()) };
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-12);
    let colors: Vec<Option<String>> = values.iter().map(|v| v.map(|v| map.color((v - lo) / (hi - lo)))).collect();
    f.heatmap(&p, &xe, &ye, &colors);
    f.axes(&p, "E/(JL)", "g/J");
    f.text(left + 150.0, top - 6.0, 11.0, "middle", label);
    f.colorbar(left + 320.0, top, 250.0, map, (lo, hi), "");
}

fn correlation_figure(dir: &Path, g: f64, labels: &[String], k: usize) -> TaskResult<Outputs> {
    let mut f = Figure::new(60.0 + 400.0 * labels.len() as f64, 380.0);
    f.title(&format!("Late-time correlations, g/J = {g}"));
    for (n, s) in labels.iter().enumerate() {
        let path = dir.join(paths::quench_corr(g, s, k));
        let t = Table::read(&path)?;
        let l = t.header.len();
        let vals: Vec<f64> = t
            .rows
            .iter()
            .flatten()
            .map(|v| v.parse::<f64>().map_err(|_| TaskError::malformed(&path, format!("`{v}` is not a number"))))
            .collect::<TaskResult<_>>()?;
        let idx: Vec<f64> = (0..l).map(|i| i as f64).collect();
        let e = edges(&idx);
        let p = Panel { left: 60.0 + 400.0 * n as f64, top: 50.0, width: 270.0, height: 270.0, x: (e[0], e[l]), y: (e[l], e[0]) };
        let colors: Vec<Option<String>> = vals.iter().map(|v| Some(Colormap::Diverging.color((v + 1.0) / 2.0))).collect();
        f.heatmap(&p, &e, &e, &colors);
        f.axes(&p, "j", "i");
        f.text(p.left + 135.0, 44.0, 11.0, "middle", s);
        f.colorbar(p.left + 285.0, 50.0, 270.0, Colormap::Diverging, (-1.0, 1.0), "");
    }
    Ok(vec![(format!("figures/correlations_{}.svg", field_label(g)), f.finish())])
}

fn binder_figure(dir: &Path) -> TaskResult<Outputs> {
    let read = |p: &str| -> TaskResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let path = dir.join(p);
        let t = Table::read(&path)?;
        let m = malformed(&path);
        let x = if t.column("T").is_some() { "T" } else { "x" };
        Ok((t.required_floats("L").map_err(&m)?, t.required_floats(x).map_err(&m)?, t.required_floats("u4").map_err(&m)?))
    };
    let export: CollapseExport = io::read_json(&dir.join(paths::COLLAPSE_JSON))?;
    let raw = read(paths::BINDER_CSV)?;
    let col = read(paths::COLLAPSED_CSV)?;
    let mut f = Figure::new(820.0, 380.0);
    f.title(&match export.tc {
        Some(tc) => format!("Binder cumulant, extrapolated T_c/J = {tc:.4}"),
        None => "Binder cumulant, no crossing found".into(),
    });
    let (colors, _) = energy_colors(&export.sizes.iter().map(|&l| (l as f64).ln()).collect::<Vec<_>>());
    let uy = padded_range(raw.2.iter().copied());
    for (n, (data, xlabel)) in [(&raw, "T/J"), (&col, "(T - T_c(L)) L^theta")].into_iter().enumerate() {
        let p = Panel { left: 70.0 + 400.0 * n as f64, top: 40.0, width: 300.0, height: 270.0, x: padded_range(data.1.iter().copied()), y: uy };
        for (&size, c) in export.sizes.iter().zip(&colors) {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                (0..data.0.len()).filter(|&k| data.0[k] as usize == size).map(|k| (data.1[k], data.2[k])).unzip();
            f.polyline(&p, &xs, &ys, c, false);
            f.points(&p, &xs, &ys, c, "circle");
        }
        f.axes(&p, xlabel, "U_4");
    }
    // pixel coordinates for the legend
    let page = Panel { left: 0.0, top: 0.0, width: 820.0, height: 380.0, x: (0.0, 820.0), y: (380.0, 0.0) };
    for (n, (&size, c)) in export.sizes.iter().zip(&colors).enumerate() {
        let y = 60.0 + 14.0 * n as f64;
        f.text(780.0, y, 10.0, "end", &format!("L = {size}"));
        f.points(&page, &[788.0], &[y - 3.5], c, "circle");
    }
    Ok(vec![("figures/binder.svg".into(), f.finish())])
}
