//! Unsatisfiable Random 3-SAT guards: phase transition, emission and runtime
//! behaviour.

use evasion::minilang::{interpret, parse, render_block, Program, Stmt, DEFAULT_FUEL};
use evasion::opaque::{generate_opaque_predicate, measure_unsat_fraction, OpaqueParams};

fn main() {
    println!("unsat fraction of raw formulas, n = 16, 500 trials");
    for ratio in [1.0, 3.0, 4.3, 4.6, 6.0] {
        println!("  m/n = {ratio:.1}: {:.3}", measure_unsat_fraction(16, ratio, 500, 42));
    }

    let pred = generate_opaque_predicate(&OpaqueParams::default(), 2024);
    println!("\nemitted predicate: n = {}, m = {}, draws = {}", pred.cnf.n, pred.cnf.m(), pred.attempts);
    let guard = pred.guard(vec![Stmt::Emit(evasion::minilang::Expr::Int(-1))]);
    let mut text = String::new();
    render_block(&guard, 0, &mut text);
    for line in text.lines() {
        let cut: String = line.chars().take(96).collect();
        println!("  {cut}{}", if cut.len() < line.len() { " ..." } else { "" });
    }

    let mut host: Program = parse("manifest {}\nentry M.main\nclass M {\n fn main(x) {\n emit x;\n }\n}\n").unwrap();
    host.classes[0].functions[0].body.splice(0..0, guard);
    let seeds = 100_000u64;
    let start = std::time::Instant::now();
    let fired = (0..seeds)
        .filter(|&s| interpret(&host, 1, s, DEFAULT_FUEL).unwrap().outputs.len() != 1)
        .count();
    println!("\nguard taken in {fired} of {seeds} runs ({:.2?})", start.elapsed());
}
