use crate::{Cmd, Failure, Output, PlanArgs};
use anyhow::{anyhow, Context};
use loadpath_core::geom::{
    layers_to_toolpath, load_mesh, overhang_flags, slice_mesh, spiralize, InfillPattern, Mesh, MeshFormat, Toolpath,
};
use loadpath_core::lsys::{parse_grammar, stack_generations, TurtleConfig};
use loadpath_core::motion::{compile, emit_cpl, parse_cpl, program_stats, CompileParams, MotionProgram};
use loadpath_core::printsim::{FaultSpec, PumpMode, PumpModel, Simulation};
use loadpath_core::stability::{analyze, shrink_compensate, AnalysisParams, MaterialMix};
use loadpath_core::weave::{weave_path, WeaveSpec};
use loadpath_streamd::service::{Service, ServiceConfig, TICK};
use loadpath_streamd::session::SessionConfig;
use loadpath_streamd::virtual_printer::{PrinterConfig, VirtualPrinter};
use loadpath_streamd::Phase;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

type Result<T> = std::result::Result<T, Failure>;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

/// Every input must exist before any work starts.
fn require_files(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(anyhow!("input file {} does not exist", p.display()).into());
        }
    }
    Ok(())
}

fn emit(output: &Output, bytes: &[u8]) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    let bytes = read_bytes(path)?;
    let ext = path.extension().and_then(|e| e.to_str());
    let mesh = load_mesh(&bytes, MeshFormat::detect(&bytes, ext)).with_context(|| format!("{}", path.display()))?;
    Ok(mesh)
}

fn read_toolpath(path: &Path) -> Result<Toolpath> {
    Ok(Toolpath::from_json(&read_text(path)?).with_context(|| format!("{}", path.display()))?)
}

fn read_program(path: &Path) -> Result<MotionProgram> {
    Ok(parse_cpl(&read_text(path)?).with_context(|| format!("{}", path.display()))?)
}

impl PlanArgs {
    fn params(&self) -> CompileParams {
        CompileParams {
            extrude_speed: self.extrude_speed,
            travel_speed: self.travel_speed,
            flow: self.flow,
            max_segment: self.max_segment,
            ext_lead_dwell: self.lead_dwell,
            travel_hop: self.hop,
        }
    }
}

fn summarize_toolpath(tp: &Toolpath) {
    eprintln!(
        "{} segments, {} layers, extrude {:.3} mm, travel {:.3} mm",
        tp.segments.len(),
        tp.max_layer().map_or(0, |l| l + 1),
        tp.extrude_length(),
        tp.travel_length()
    );
}

pub fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Slice {
            mesh,
            layer_height,
            shell,
            infill_spacing,
            pattern,
            spiral,
            overhang_angle,
            output,
        } => {
            require_files(&[&mesh])?;
            let pattern: InfillPattern = pattern.parse().map_err(|e: String| anyhow!(e))?;
            let m = read_mesh(&mesh)?;
            let layers = slice_mesh(&m, layer_height)?;
            let flags = overhang_flags(&layers, overhang_angle);
            if !flags.is_empty() {
                let mut at: Vec<usize> = flags.iter().map(|f| f.layer_index).collect();
                at.dedup();
                log::warn!("overhang beyond {overhang_angle}° on {} layers", at.len());
                eprintln!("overhang flags: {} arcs on layers {at:?}", flags.len());
            }
            let infill = shell.zip(infill_spacing).map(|(s, d)| (s, d, pattern));
            let tp = if spiral {
                spiralize(&layers, layer_height)?
            } else {
                layers_to_toolpath(&layers, layer_height, infill)?
            };
            summarize_toolpath(&tp);
            emit(&output, tp.to_json().as_bytes())
        }
        Cmd::Lsys {
            grammar,
            generations,
            z_step,
            output,
        } => {
            require_files(&[&grammar])?;
            let g = parse_grammar(&read_text(&grammar)?)?;
            let tp = stack_generations(&g, &generations, &TurtleConfig::for_grammar(&g), z_step)?;
            summarize_toolpath(&tp);
            emit(&output, tp.to_json().as_bytes())
        }
        Cmd::Weave { spec, output } => {
            require_files(&[&spec])?;
            let s = WeaveSpec::from_json(&read_text(&spec)?)?;
            let tp = weave_path(&s)?;
            summarize_toolpath(&tp);
            emit(&output, tp.to_json().as_bytes())
        }
        Cmd::Plan { toolpath, plan, output } => {
            require_files(&[&toolpath])?;
            let tp = read_toolpath(&toolpath)?;
            let program = compile(&tp, &plan.params())?;
            let s = program_stats(&program);
            eprintln!(
                "{} commands, {} moves, {} EXT ON, duration {:.1} s",
                program.commands.len(),
                s.move_count,
                program.ext_on_count(),
                s.duration
            );
            emit(&output, emit_cpl(&program).as_bytes())
        }
        Cmd::Stats { program, output } => {
            require_files(&[&program])?;
            let p = read_program(&program)?;
            let s = program_stats(&p);
            eprintln!("moves {}", s.move_count);
            eprintln!("total length {:.3} mm", s.total_length);
            eprintln!("extrude length {:.3} mm", s.extrude_length);
            eprintln!("travel length {:.3} mm", s.travel_length);
            eprintln!("duration {:.3} s", s.duration);
            eprintln!("mean segment {:.2} mm", s.mean_segment);
            eprintln!("mean speed {:.2} mm/s", s.mean_speed);
            let json = serde_json::to_string_pretty(&s)? + "\n";
            emit(&output, json.as_bytes())
        }
        Cmd::Analyze {
            toolpath,
            material,
            bead_area,
            margin,
            min_layer_time,
            strict,
            table,
            plan,
            output,
        } => {
            require_files(&[&toolpath, &material])?;
            let tp = read_toolpath(&toolpath)?;
            let mix = MaterialMix::from_json(&read_text(&material)?).with_context(|| format!("{}", material.display()))?;
            let program = compile(&tp, &plan.params())?;
            let times = program_stats(&program).layer_durations;
            let layers = tp.max_layer().map_or(0, |l| l + 1);
            if times.len() < layers {
                bail_input(format!("program covers {} layers, toolpath has {layers}", times.len()))?;
            }
            let params = AnalysisParams {
                bead_area_mm2: bead_area,
                margin_mm: margin,
                min_layer_time_s: min_layer_time,
            };
            let report = analyze(&tp, &mix, &params, &times)?;
            if table {
                eprint!("{}", report.table());
            }
            eprintln!(
                "total mass {:.3} kg; support {}, load {}, drying {}; verdict {}",
                report.total_mass_kg, report.support, report.load, report.drying, report.verdict
            );
            emit(&output, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
            if strict && !report.verdict.is_stable() {
                return Err(Failure::Unstable(report.verdict.to_string()));
            }
            Ok(())
        }
        Cmd::Simulate {
            program,
            pump_mode,
            faults,
            seed,
            pump_flow,
            start_latency,
            stop_latency,
            halt_at,
            output,
        } => {
            // A bare integer is a random disruption count; anything else is a file.
            let fault_file = faults.as_deref().filter(|f| f.parse::<usize>().is_err()).map(PathBuf::from);
            let mut inputs: Vec<&Path> = vec![&program];
            if let Some(f) = &fault_file {
                inputs.push(f);
            }
            require_files(&inputs)?;
            let mode: PumpMode = pump_mode.parse().map_err(|e: String| anyhow!(e))?;
            let p = read_program(&program)?;
            let pump = PumpModel {
                mode,
                flow: pump_flow,
                start_latency,
                stop_latency,
            };
            let duration = program_stats(&p).duration;
            let spec = match (&fault_file, &faults) {
                (Some(f), _) => serde_json::from_str::<FaultSpec>(&read_text(f)?).with_context(|| format!("{}", f.display()))?,
                (None, Some(n)) => FaultSpec::random(seed, duration, n.parse()?),
                (None, None) => FaultSpec::none(),
            };
            let sim = Simulation::new(&p, &pump, &spec)?;
            let report = match halt_at {
                Some(t) => sim.halt(t)?,
                None => sim.run(),
            };
            let t = &report.totals;
            eprintln!(
                "duration {:.3} s, completed {}, deposited {:.3} g, excess {:.3} g in {} deposits, {} under-extruded spans, defects {}",
                report.duration,
                report.completed,
                t.deposited_g,
                t.excess_g,
                report.excess_deposits.len(),
                report.underextruded_spans.len(),
                report.defect_count
            );
            emit(&output, (report.to_json() + "\n").as_bytes())
        }
        Cmd::Serve {
            program,
            listen,
            endpoint,
            window,
            move_delay_ms,
            autostart,
        } => {
            require_files(&[&program])?;
            let text = read_text(&program)?;
            parse_cpl(&text).with_context(|| format!("{}", program.display()))?;
            let listen: SocketAddr = listen.parse().with_context(|| format!("bad listen address {listen}"))?;
            let endpoint_addr = if endpoint == "virtual" {
                None
            } else {
                Some(endpoint.parse::<SocketAddr>().with_context(|| format!("bad endpoint address {endpoint}"))?)
            };
            if window == 0 {
                bail_input("window must be at least 1".into())?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(text, listen, endpoint_addr, window, move_delay_ms, autostart))
        }
        Cmd::Compensate {
            mesh,
            shrinkage,
            material,
            firing_temp,
            ascii,
            output,
        } => {
            let mut inputs: Vec<&Path> = vec![&mesh];
            if let Some(m) = &material {
                inputs.push(m);
            }
            require_files(&inputs)?;
            let s = match (shrinkage, &material, firing_temp) {
                (Some(s), _, _) => s,
                (None, Some(m), Some(t)) => {
                    let mix = MaterialMix::from_json(&read_text(m)?)?;
                    mix.shrinkage_at(t).ok_or_else(|| anyhow!("no shrinkage tabulated at or below {t} °C"))?
                }
                _ => bail_input("give --shrinkage or --material with --firing-temp".into())?,
            };
            let m = read_mesh(&mesh)?;
            let scaled = shrink_compensate(&m, s)?;
            let size = scaled.bbox.size();
            eprintln!("shrinkage {s}; compensated size {:.3} x {:.3} x {:.3} mm", size.x, size.y, size.z);
            let bytes = if ascii { scaled.to_stl_ascii("compensated").into_bytes() } else { scaled.to_stl_binary() };
            emit(&output, &bytes)
        }
    }
}

fn bail_input<T>(msg: String) -> Result<T> {
    Err(Failure::Input(anyhow!(msg)))
}

async fn serve(
    text: String,
    listen: SocketAddr,
    endpoint: Option<SocketAddr>,
    window: usize,
    move_delay_ms: u64,
    autostart: bool,
) -> Result<()> {
    let printer = match endpoint {
        Some(_) => None,
        None => Some(
            VirtualPrinter::bind(
                "127.0.0.1:0".parse().expect("loopback"),
                PrinterConfig {
                    move_delay: Duration::from_millis(move_delay_ms),
                    disconnect_after: None,
                },
            )
            .await?,
        ),
    };
    let endpoint = endpoint.or(printer.as_ref().map(VirtualPrinter::addr)).expect("endpoint");
    let svc = Service::start(ServiceConfig {
        listen,
        endpoint,
        session: SessionConfig { window, defects: None },
        program: Some(text),
        tick: TICK,
    })
    .await?;
    eprintln!("operators: ws://{}  endpoint: {endpoint}", svc.operator_addr());
    if autostart {
        svc.control(|seq| loadpath_streamd::Message::Start { seq });
    }
    let phase = tokio::select! {
        p = svc.finished() => p,
        _ = tokio::signal::ctrl_c() => {
            log::warn!("interrupted");
            svc.phase()
        }
    };
    if let Some(p) = &printer {
        eprintln!("virtual printer executed {} lines", p.received().len());
    }
    eprintln!("session ended {}", phase.name());
    match phase {
        Phase::Done => Ok(()),
        p => bail_input(format!("session ended {}", p.name())),
    }
}
