//! Experiment runners: each takes a validated model plus the experiment
//! parameters, writes its CSV/report files into the output directory, and
//! reports whether the checked property held.

use crate::config::{ConfigFile, ExperimentSection, Model};
use crate::report::{emit_plotdata, Report};
use fifo_sim_core::dynamics::StateVector;
use fifo_sim_core::harness::{
    self, cumulative_flow_check, km_finite_difference_check, monotonicity_property_test,
    orthant_violation_witness, KmParams, EXAMPLE1_PLOT_CELLS,
};
use fifo_sim_core::order::ConeOrder;
use fifo_sim_core::sim::{format_float, simulate, simulate_transformed, SimConfig};
use std::fs;
use std::path::Path;

/// Anything that stops an experiment at runtime (as opposed to a
/// configuration problem, which is caught before execution starts).
pub type RunError = Box<dyn std::error::Error>;

/// Outcome of one experiment: whether the verified property held.
pub struct Outcome {
    pub pass: bool,
    pub headline: String,
}

impl Outcome {
    fn pass(headline: impl Into<String>) -> Self {
        Outcome {
            pass: true,
            headline: headline.into(),
        }
    }

    fn fail(headline: impl Into<String>) -> Self {
        Outcome {
            pass: false,
            headline: headline.into(),
        }
    }
}

fn write_trajectory_csv(
    path: &Path,
    traj: &fifo_sim_core::sim::Trajectory<impl fifo_sim_core::sim::Coordinates>,
) -> Result<(), RunError> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn require_x0(model: &Model, experiment: &ExperimentSection) -> Result<StateVector, RunError> {
    let x0 = experiment
        .x0
        .as_ref()
        .ok_or("experiment requires an initial state `x0`")?;
    if x0.len() != model.network.n_cells() {
        return Err(format!(
            "`experiment.x0` has {} entries, network has {} cells",
            x0.len(),
            model.network.n_cells()
        )
        .into());
    }
    Ok(StateVector::new(x0.clone()))
}

/// Plain simulation: one trajectory CSV (optionally also in cumulative
/// coordinates) plus a short run report.
pub fn run_simulate(
    model: &Model,
    experiment: &ExperimentSection,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let x0 = require_x0(model, experiment)?;
    let traj = simulate(&model.network, &model.fds, &x0, &model.sim)?;
    write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;

    if experiment.write_z == Some(true) {
        let order = ConeOrder::for_network(&model.network)?;
        let z_traj =
            simulate_transformed(&model.network, &model.fds, &order.to_z(&x0), &model.sim)?;
        write_trajectory_csv(&out_dir.join("z_trajectory.csv"), &z_traj)?;
    }

    let mut report = Report::new("simulate");
    report.push_int("cells", model.network.n_cells());
    report.push_float("dt", model.sim.dt);
    report.push_float("horizon", model.sim.horizon);
    report.push_int("samples", traj.len());
    report.push_float("max_clamp", traj.max_clamp);
    report.push_float("initial_mass", x0.raw().sum());
    report.push_float("final_mass", traj.final_state().raw().sum());
    report.summary_line("result", "pass");
    report.write(&out_dir.join("sim_report.txt"))?;
    Ok(Outcome::pass(format!(
        "wrote {} samples to trajectory.csv",
        traj.len()
    )))
}

/// The built-in ten-cell reference experiment: six trajectory CSVs, the
/// plotted cumulative bundles, and the 15-pair order report.
pub fn run_example1(sim: &SimConfig, out_dir: &Path) -> Result<Outcome, RunError> {
    let run = harness::run_example1(sim)?;
    let order = ConeOrder::for_network(&run.setup.network)?;

    for (k, traj) in run.trajectories.iter().enumerate() {
        write_trajectory_csv(&out_dir.join(format!("trajectory_k{}.csv", k + 1)), traj)?;
    }
    emit_plotdata(out_dir, &order, &run.trajectories, &EXAMPLE1_PLOT_CELLS)?;

    let mut report = Report::new("example1");
    report.push_float("dt", sim.dt);
    report.push_float("horizon", sim.horizon);
    report.push_int("runs", run.trajectories.len());
    report.push_float("tolerance", run.tol);
    report.push_float("z_scale", run.z_scale);
    report.push_int("pairs", run.pair_reports.len());
    let mut passed = 0;
    for pair in &run.pair_reports {
        let name = format!("pair_{}_{}", pair.upper + 1, pair.lower + 1);
        report.push_bool(&name, pair.report.pass);
        report.push_float(&format!("{name}_min_margin"), pair.report.min_margin);
        if pair.report.pass {
            passed += 1;
        }
    }
    report.summary_line("checked", run.pair_reports.len().to_string());
    report.summary_line("passed", passed.to_string());
    let all_pass = run.all_pairs_pass();
    report.summary_line("result", if all_pass { "pass" } else { "fail" });
    report.write(&out_dir.join("order_report.txt"))?;

    if all_pass {
        Ok(Outcome::pass(format!(
            "{passed}/15 pair orders preserved (tolerance {})",
            format_float(run.tol)
        )))
    } else {
        Ok(Outcome::fail(format!("{passed}/15 pair orders preserved")))
    }
}

/// Randomized order preservation over generated cone-ordered pairs.
pub fn run_property_test(
    model: &Model,
    experiment: &ExperimentSection,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let n_pairs = experiment.n_pairs.unwrap_or(100);
    let seed = experiment.seed.unwrap_or(0);
    let tol_rel = experiment.tol_rel.unwrap_or(1e-6);
    let order = ConeOrder::for_network(&model.network)?;
    let report_data = monotonicity_property_test(
        &model.network,
        &model.fds,
        &order,
        n_pairs,
        &model.sim,
        seed,
        tol_rel,
    )?;

    let mut report = Report::new("property-test");
    report.push_int("n_pairs", report_data.n_pairs);
    report.push_int("seed", seed as usize);
    report.push_float("tol_rel", report_data.tol_rel);
    report.push_float("dt", model.sim.dt);
    report.push_float("horizon", model.sim.horizon);
    report.push_float("worst_margin", report_data.worst_margin);
    for failure in &report_data.failures {
        let prefix = format!("failure_{}", failure.pair_index);
        report.push_int(&format!("{prefix}_pair"), failure.pair_index);
        report.push_int(&format!("{prefix}_seed"), failure.seed as usize);
        report.push_float(&format!("{prefix}_time"), failure.time);
        report.push_int(&format!("{prefix}_component"), failure.component + 1);
        report.push_float(&format!("{prefix}_margin"), failure.margin);
        report.push_str(
            &format!("{prefix}_x0"),
            &failure
                .x0
                .iter()
                .map(|v| format_float(*v))
                .collect::<Vec<_>>()
                .join(";"),
        );
        report.push_str(
            &format!("{prefix}_y0"),
            &failure
                .y0
                .iter()
                .map(|v| format_float(*v))
                .collect::<Vec<_>>()
                .join(";"),
        );
    }
    report.summary_line("checked", report_data.n_pairs.to_string());
    report.summary_line("passed", report_data.n_pass.to_string());
    report.summary_line("result", if report_data.pass() { "pass" } else { "fail" });
    report.write(&out_dir.join("property_report.txt"))?;

    if report_data.pass() {
        Ok(Outcome::pass(format!(
            "{}/{} pairs preserved the order (worst margin {})",
            report_data.n_pass,
            report_data.n_pairs,
            format_float(report_data.worst_margin)
        )))
    } else {
        Ok(Outcome::fail(format!(
            "{}/{} pairs preserved the order; see property_report.txt",
            report_data.n_pass, report_data.n_pairs
        )))
    }
}

/// Finite-difference sign check of the transformed dynamics.
pub fn run_km_check(
    model: &Model,
    experiment: &ExperimentSection,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let jam_scale = model.network.jam_scale();
    let flow_scale = model.fds.capacity_scale();
    let params = KmParams {
        n_points: experiment.n_points.unwrap_or(500),
        step: experiment.step_rel.unwrap_or(1e-6) * jam_scale,
        tol: experiment.tol_rel.unwrap_or(1e-6) * flow_scale / jam_scale,
        external_demand: experiment.external_demand.unwrap_or(0.0),
        seed: experiment.seed.unwrap_or(0),
    };
    let order = ConeOrder::for_network(&model.network)?;
    let km = km_finite_difference_check(&model.network, &model.fds, &order, &params)?;

    let mut report = Report::new("km-check");
    report.push_int("requested_points", km.requested);
    report.push_int("evaluated_points", km.evaluated);
    report.push_int("skipped_points", km.skipped);
    report.push_float("step", params.step);
    report.push_float("tolerance", km.tol);
    report.push_float("external_demand", params.external_demand);
    report.push_float("min_offdiagonal", km.min_entry);
    if let Some((point, row, col)) = km.worst {
        report.push_str(
            "min_offdiagonal_at",
            &format!("point {point}, dg_{}/dz_{}", row + 1, col + 1),
        );
    }
    report.summary_line("checked", km.evaluated.to_string());
    report.summary_line("result", if km.pass() { "pass" } else { "fail" });
    report.write(&out_dir.join("km_report.txt"))?;

    if km.pass() {
        Ok(Outcome::pass(format!(
            "{} smooth points, min off-diagonal {} >= -{}",
            km.evaluated,
            format_float(km.min_entry),
            format_float(km.tol)
        )))
    } else {
        Ok(Outcome::fail(format!(
            "off-diagonal estimate {} below -{}",
            format_float(km.min_entry),
            format_float(km.tol)
        )))
    }
}

/// Constructive counterexample to componentwise monotonicity, plus a short
/// simulation showing the componentwise order breaking.
pub fn run_orthant_witness(
    model: &Model,
    experiment: &ExperimentSection,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let witness = orthant_violation_witness(&model.network, &model.fds)?;
    let margin_floor = experiment.margin_rel.unwrap_or(1e-3) * model.fds.capacity_scale();

    // simulate both witness states and look for a componentwise violation
    let lower = simulate(&model.network, &model.fds, &witness.x, &model.sim)?;
    let upper = simulate(&model.network, &model.fds, &witness.y, &model.sim)?;
    let eps = 1e-6 * model.network.jam_scale();
    let mut order_loss = None;
    'outer: for (idx, t) in lower.times().iter().enumerate() {
        for e in 0..model.network.n_cells() {
            if lower.states()[idx].component(e) > upper.states()[idx].component(e) + eps {
                order_loss = Some((*t, e));
                break 'outer;
            }
        }
    }

    let mut report = Report::new("orthant-witness");
    report.push_int("diverge_cell", witness.diverge + 1);
    report.push_int("starved_cell", witness.starved + 1);
    report.push_int("jammed_cell", witness.jammed + 1);
    report.push_str(
        "x",
        &witness
            .x
            .as_slice()
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(";"),
    );
    report.push_str(
        "y",
        &witness
            .y
            .as_slice()
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(";"),
    );
    report.push_float("f_starved_x", witness.f_starved_x);
    report.push_float("f_starved_y", witness.f_starved_y);
    report.push_float("margin", witness.margin);
    report.push_float("required_margin", margin_floor);
    match order_loss {
        Some((t, e)) => {
            report.push_float("order_loss_time", t);
            report.push_int("order_loss_cell", e + 1);
        }
        None => report.push_str("order_loss_time", "none"),
    }
    let pass = witness.margin >= margin_floor && order_loss.is_some();
    report.summary_line("result", if pass { "pass" } else { "fail" });
    report.write(&out_dir.join("witness_report.txt"))?;

    if pass {
        let (t, e) = order_loss.expect("checked above");
        Ok(Outcome::pass(format!(
            "margin {} at cell {}; componentwise order lost at t = {} in cell {}",
            format_float(witness.margin),
            witness.starved + 1,
            format_float(t),
            e + 1
        )))
    } else {
        Ok(Outcome::fail(format!(
            "margin {} (required {}), order loss: {:?}",
            format_float(witness.margin),
            format_float(margin_floor),
            order_loss
        )))
    }
}

/// Drains the network and compares each cell's integrated outflow against
/// its initial cumulative state.
pub fn run_cumulative_check(
    model: &Model,
    experiment: &ExperimentSection,
    out_dir: &Path,
) -> Result<Outcome, RunError> {
    let x0 = require_x0(model, experiment)?;
    let order = ConeOrder::for_network(&model.network)?;
    let z_scale = order.to_z(&x0).max_abs().max(f64::MIN_POSITIVE);
    let eps_empty = experiment.eps_empty_rel.unwrap_or(1e-6) * model.network.jam_scale();
    let tol = experiment.tol_rel.unwrap_or(1e-3) * z_scale;
    let result = cumulative_flow_check(
        &model.network,
        &model.fds,
        &order,
        &x0,
        &model.sim,
        eps_empty,
        tol,
    )?;

    let mut report = Report::new("cumulative-check");
    report.push_float("dt", model.sim.dt);
    report.push_float("horizon", model.sim.horizon);
    report.push_float("tolerance", result.tol);
    report.push_float("drain_threshold", eps_empty);
    report.push_float("final_state_max", result.final_state_max);
    for e in 0..model.network.n_cells() {
        report.push_float(&format!("cell_{}_z0", e + 1), result.initial_cumulative[e]);
        report.push_float(
            &format!("cell_{}_integrated_outflow", e + 1),
            result.integrated_outflow[e],
        );
        report.push_float(&format!("cell_{}_error", e + 1), result.errors[e]);
    }
    report.push_float("worst_error", result.worst_error);
    report.push_int("worst_cell", result.worst_cell + 1);
    report.summary_line("checked", model.network.n_cells().to_string());
    report.summary_line("result", if result.pass { "pass" } else { "fail" });
    report.write(&out_dir.join("cumulative_report.txt"))?;

    if result.pass {
        Ok(Outcome::pass(format!(
            "all cells within {}; worst error {}",
            format_float(result.tol),
            format_float(result.worst_error)
        )))
    } else {
        Ok(Outcome::fail(format!(
            "cell {} error {} exceeds {}",
            result.worst_cell + 1,
            format_float(result.worst_error),
            format_float(result.tol)
        )))
    }
}

/// Writes the generated reference configuration.
pub fn write_example1_config(path: &Path) -> Result<(), RunError> {
    fs::write(path, ConfigFile::example1().to_toml())?;
    Ok(())
}
