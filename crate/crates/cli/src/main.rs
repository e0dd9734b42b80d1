use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peershare_core::baseline::solve_state0_all;
use peershare_core::cooperation::{settle, solve_stackelberg};
use peershare_core::pipeline::{run_pipeline, solve_states, split_coalitions};
use peershare_core::spne::evaluate_transitions;
use peershare_core::sweep::run_sweep;
use peershare_core::{Error, Scenario};

#[derive(Parser)]
#[command(name = "peershare", version, about = "ISP/PCP pricing equilibria and cooperative profit split")]
struct Cli {
    /// Scenario file (defaults to the built-in reference scenario).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat traffic consistency warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Root-finding tolerance for the baseline equilibrium.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline report.
    Solve,
    /// Baseline equilibrium without P2P.
    State0,
    /// Utilities in States 0, 1 and 2.
    States,
    /// Transition conditions and the subgame perfect equilibrium.
    Spne,
    /// Cooperative discounts, bargaining split and transfer.
    Cooperate,
    /// Transfer split inside each coalition.
    Split,
    /// Profile and discount sweeps written as CSV.
    Sweep,
}

const EXIT_SCENARIO: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CONSISTENCY: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Scenario(_) => EXIT_SCENARIO,
        Error::Consistency(_) => EXIT_CONSISTENCY,
        _ => EXIT_SOLVER,
    }
}

fn load(cli: &Cli) -> Result<Scenario, Error> {
    let mut s = match &cli.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if cli.strict {
        s.strict = true;
    }
    if let Some(t) = cli.tol {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Scenario(format!("--tol must be positive (got {t})")));
        }
        s.tol = t;
    }
    if let Some(o) = &cli.out {
        s.output_dir = Some(o.clone());
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let s = load(cli)?;
    match cli.command {
        Command::Solve => print!("{}", run_pipeline(&s)?),
        Command::State0 => {
            let all = solve_state0_all(&s.params, &s.function_family(), s.tol)?;
            for (i, eq) in all.iter().enumerate() {
                if all.len() > 1 {
                    println!("equilibrium {}", i + 1);
                }
                println!("v* = {:.4}", eq.v_star);
                println!("p_b = {:.4}, p_s = {:.4}, tau = {:.4}", eq.p_b, eq.p_s, eq.tau);
                println!("b_user = {:.4}, b_cp = {:.4}", eq.b_user, eq.b_cp);
                let u = eq.utilities;
                println!("U_ISP = {:.4}, U_CP = {:.4}, U_user = {:.4}", u.isp, u.cp, u.user);
                println!("residual = {:.3e}", eq.residual);
            }
        }
        Command::States => {
            let (ctx, states) = solve_states(&s)?;
            println!("v_cs = {:.4}, a = {:.4}, v_tilde = {:.4}", ctx.v_cs, ctx.a, ctx.v_tilde);
            println!("state,v_p2p,u_isp,u_cp,u_user");
            for st in &states {
                let u = st.utilities;
                println!("{},{:.4},{:.4},{:.4},{:.4}", st.label, st.v_p2p, u.isp, u.cp, u.user);
            }
        }
        Command::Spne => {
            let (_, [s0, s1, s2]) = solve_states(&s)?;
            let t = evaluate_transitions(&s0, &s1, &s2);
            println!("T1 = {}", t.t1);
            println!("T2 = {} (ISP loses under flat: {}, usage-based pays: {})", t.t2_holds(), t.t2.0, t.t2.1);
            println!("T3 = {}", t.t3);
            println!("final state = {}{}", t.final_state, if t.cycle { " (cycle)" } else { "" });
            println!(
                "spne = {}, (U_CP, U_ISP) = ({:.4}, {:.4})",
                t.spne.profile, t.spne.payoff.cp, t.spne.payoff.isp
            );
        }
        Command::Cooperate => {
            let (ctx, [s0, s1, s2]) = solve_states(&s)?;
            let start = s
                .starting_point
                .unwrap_or(evaluate_transitions(&s0, &s1, &s2).starting_point);
            let sol = solve_stackelberg(&ctx, s.stackelberg)?;
            let g = sol.profit;
            println!("gamma_isp = {:.4}, gamma_pcp = {:.4}", sol.discounts.gamma_isp, sol.discounts.gamma_pcp);
            println!("v_p2p = {:.4}, U_total = {:.4}, U_user = {:.4}", g.v_p2p, g.u_total, g.u_user);
            println!("pre-transfer (U_ISP, U_CP) = ({:.4}, {:.4})", g.u_isp, g.u_cp);
            let co = settle(&sol, start)?;
            println!("start (U_ISP, U_CP) = ({:.4}, {:.4})", start.isp, start.cp);
            println!("split (U_ISP, U_CP) = ({:.4}, {:.4})", co.u_isp_s3, co.u_cp_s3);
            println!("R = {:.4}", co.transfer_r);
            println!("gains: ISP {:+.2}%, CP {:+.2}%", co.isp_improvement(), co.cp_improvement());
        }
        Command::Split => {
            let spec = s
                .coalition
                .clone()
                .ok_or_else(|| Error::Scenario("scenario has no coalition section".into()))?;
            let report = run_pipeline(&Scenario { coalition: None, ..s.clone() })?;
            let co = report
                .cooperation
                .ok_or_else(|| Error::Consistency("cooperation is not beneficial: nothing to split".into()))?;
            let mut warnings = Vec::new();
            let ledger = split_coalitions(&report.context, &spec, &co, s.strict, &mut warnings)?;
            println!("R = {:.4}", ledger.transfer);
            println!("member_kind,member_id,weight,amount");
            for (i, (w, a)) in ledger.phi.iter().zip(&ledger.pcp_payments).enumerate() {
                println!("pcp,{},{:.4},{:.4}", i + 1, w, a);
            }
            for (i, (w, a)) in ledger.psi.iter().zip(&ledger.isp_receipts).enumerate() {
                println!("isp,{},{:.4},{:.4}", i + 1, w, a);
            }
            for w in warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Sweep => {
            let dir = s.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let res = run_sweep(&s);
            for p in res.write_all(&dir)? {
                println!("{}", p.display());
            }
            let failed = res.cells.iter().filter(|c| c.report.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed; see the error column", res.cells.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
