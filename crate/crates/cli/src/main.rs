use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use beamcoupling::scenarios::*;

#[derive(Parser, Debug)]
#[command(
    name = "beamcoupling",
    version,
    about = "Beam-to-beam point coupling scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Coupling enforcement; overrides the model file.
    #[arg(long, global = true, value_enum)]
    enforcement: Option<Enforcement>,
    /// Penalty scale λ of the default penalty rule.
    #[arg(long, global = true)]
    penalty_scale: Option<f64>,
    /// Directory for CSV output.
    #[arg(long, global = true, env = "BEAMCOUPLING_OUT", default_value = ".")]
    out: PathBuf,
    /// Newton tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of load steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Enforcement {
    Lagrange,
    Penalty,
}

impl From<Enforcement> for EnforcementKind {
    fn from(e: Enforcement) -> Self {
        match e {
            Enforcement::Lagrange => EnforcementKind::Lagrange,
            Enforcement::Penalty => EnforcementKind::Penalty,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    LShape,
    CrossedBeams,
    Cylinder,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a TOML model file and write the monitored positions.
    Solve { model: PathBuf },
    /// Generate and solve an example structure.
    Scenario {
        name: Scenario,
        /// Offset between the L-shape beams.
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        /// Elements per beam.
        #[arg(long, default_value_t = 10)]
        elements: usize,
        /// Join the L-shape by a connector element of modulus λE instead of a coupling.
        #[arg(long)]
        connector_stiffness: Option<f64>,
        /// Write the generated model file instead of solving it.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Penalty or connector stiffness sweep on the L-shape.
    Sweep {
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        #[arg(long, default_value_t = 10)]
        elements: usize,
        /// Comma-separated scales.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1000.0])]
        scales: Vec<f64>,
        /// Sweep the connector stiffness instead of the penalty scale.
        #[arg(long)]
        connector: bool,
    },
    /// Mesh convergence of the crossed beams with 2^k and 2^k+1 elements.
    Convergence {
        #[arg(long, default_value_t = 7)]
        max_k: u32,
        #[arg(long, default_value_t = 512)]
        reference: usize,
    },
    /// Rigid rotation of the loaded crossed beams.
    Objectivity {
        #[arg(long, default_value_t = 9)]
        elements: usize,
        #[arg(long, default_value_t = 50)]
        rotation_steps: usize,
    },
    /// Compression of the wire-wound cylinder.
    Cylinder {
        #[arg(long, default_value_t = 16)]
        n_axi: usize,
        #[arg(long, default_value_t = 10)]
        n_circ: usize,
        #[arg(long, default_value_t = 32)]
        elems_per_ring: usize,
        #[arg(long, default_value_t = 20)]
        elems_per_axial: usize,
    },
}

impl Common {
    fn apply(&self, doc: &mut ModelDocument) {
        if let Some(kind) = self.enforcement {
            doc.set_enforcement(kind.into(), self.penalty_scale.or(Some(100.0)));
        } else if let Some(scale) = self.penalty_scale {
            doc.set_enforcement(EnforcementKind::Penalty, Some(scale));
        }
        if let Some(tol) = self.tol {
            doc.solve.newton_tol = tol;
        }
        if let Some(steps) = self.steps {
            doc.solve.load_steps = steps;
        }
    }

    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn solve_and_report(doc: &ModelDocument, common: &Common, name: &str) -> Result<()> {
    let solution = solve_document(doc)?;
    for (id, p) in doc.outputs.monitor.iter().zip(&solution.monitor) {
        println!("node {id}: [{:.10}, {:.10}, {:.10}]", p.x, p.y, p.z);
    }
    write(&common.output(name), &positions_csv(doc, &solution))
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Solve { model } => {
            let mut doc = ModelDocument::load(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            common.apply(&mut doc);
            solve_and_report(&doc, common, "positions.csv")
        }
        Command::Scenario {
            name,
            offset,
            elements,
            connector_stiffness,
            save_model,
        } => {
            let mut doc = match name {
                Scenario::LShape => {
                    let junction = match connector_stiffness {
                        Some(stiffness_scale) => Junction::Connector { stiffness_scale },
                        None => Junction::lagrange(),
                    };
                    generate_l_shape_with(offset, elements, junction)?
                }
                Scenario::CrossedBeams => generate_crossed_beams(elements)?,
                Scenario::Cylinder => generate_wire_cylinder(&CylinderOptions::default())?,
            };
            common.apply(&mut doc);
            match save_model {
                Some(path) => {
                    doc.save(&path)?;
                    println!("wrote {}", path.display());
                    Ok(())
                }
                None => solve_and_report(
                    &doc,
                    common,
                    &format!("{}.csv", name.to_possible_value().unwrap().get_name()),
                ),
            }
        }
        Command::Sweep {
            offset,
            elements,
            scales,
            connector,
        } => {
            let sweep = if connector {
                run_connector_sweep(offset, elements, &scales)?
            } else {
                let mut doc = generate_l_shape_with(offset, elements, Junction::lagrange())?;
                common.apply(&mut doc);
                run_penalty_sweep(&doc, &scales)?
            };
            for row in &sweep.rows {
                match (&row.error, &row.failure) {
                    (Some(e), _) => println!("lambda {:e}: error {e:.3e}", row.parameter),
                    (None, Some(f)) => println!("lambda {:e}: failed ({f})", row.parameter),
                    _ => {}
                }
            }
            let name = if connector {
                "connector_sweep.csv"
            } else {
                "penalty_sweep.csv"
            };
            write(&common.output(name), &sweep.to_csv())
        }
        Command::Convergence { max_k, reference } => {
            let kind = common
                .enforcement
                .map_or(EnforcementKind::Lagrange, Into::into);
            let scale =
                (kind == EnforcementKind::Penalty).then(|| common.penalty_scale.unwrap_or(100.0));
            let study = run_convergence_study(&convergence_meshes(max_k), reference, kind, scale)?;
            let fmt = |s: Option<f64>| s.map_or("n/a".into(), |v| format!("{v:.3}"));
            println!(
                "slope even {} odd {}",
                fmt(study.slope_even),
                fmt(study.slope_odd)
            );
            write(&common.output("convergence.csv"), &study.to_csv())
        }
        Command::Objectivity {
            elements,
            rotation_steps,
        } => {
            let mut doc = generate_crossed_beams(elements)?;
            common.apply(&mut doc);
            let result = run_objectivity_test(&doc, rotation_steps)?;
            println!(
                "energy variation {:.3e}, return error {:.3e}",
                result.energy_variation, result.return_error
            );
            write(&common.output("objectivity.csv"), &result.to_csv())
        }
        Command::Cylinder {
            n_axi,
            n_circ,
            elems_per_ring,
            elems_per_axial,
        } => {
            let options = CylinderOptions {
                n_axi,
                n_circ,
                elems_per_ring,
                elems_per_axial,
                steps: common.steps.unwrap_or(100),
                ..CylinderOptions::default()
            };
            let result = run_cylinder(&options)?;
            match result.limit_point() {
                Some(step) => println!(
                    "limit point at step {step}, peak F_R {:.4e}",
                    result.peak_force()
                ),
                None => println!("no limit point, peak F_R {:.4e}", result.peak_force()),
            }
            write(&common.output("cylinder.csv"), &result.to_csv())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let solver = e
                .downcast_ref::<beamcoupling::Error>()
                .is_some_and(|e| e.is_solver_failure());
            ExitCode::from(if solver { 2 } else { 1 })
        }
    }
}
