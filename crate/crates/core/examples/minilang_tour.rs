//! Parse, check, run and measure a small program in the toy language.

use evasion::minilang::{
    check_well_formed, cyclomatic_complexity, eliminate_dead_code, feature_names, interpret, parse, render, stats,
    DEFAULT_FUEL,
};

const SOURCE: &str = r#"manifest {
  capability INTERNET
  component activity MainActivity
  component service SyncService
  intent android.intent.action.MAIN
  endpoint "https://cdn0.apps.example/assets"
}
entry MainActivity.main

class MainActivity {
  fn main(input) {
    let seed = rand_int(100);
    let unused = input * 7;
    let r = SyncService.run(input);
    emit r;
    emit seed;
    return input;
  }
}

class SyncService {
  fn run(v) {
    let i = 0;
    while (i < 3) {
      api ui.draw(v + i);
      let i = i + 1;
    }
    if (v > 10) {
      let url = "https://cdn0.apps.example/assets";
      api net.get(url);
    } else {
      api log.write(v);
    }
    return v + 1;
  }
}
"#;

fn main() {
    let program = parse(SOURCE).expect("example parses");
    check_well_formed(&program).expect("example is well-formed");

    println!("features:");
    for f in feature_names(&program) {
        println!("  {f}");
    }

    for input in [3, 42] {
        let trace = interpret(&program, input, 1, DEFAULT_FUEL).expect("runs");
        let apis: Vec<&str> = trace.api_calls.iter().map(|(n, _)| n.as_str()).collect();
        println!("input {input}: outputs {:?}, apis {apis:?}", trace.outputs);
    }

    let live = eliminate_dead_code(&program);
    let before = stats(&program);
    let after = stats(&live);
    println!("dead code elimination: {} -> {} statements", before.size, after.size);
    for class in &program.classes {
        for f in &class.functions {
            println!("cyclomatic complexity {}.{}: {}", class.name, f.name, cyclomatic_complexity(f));
        }
    }
    println!("{after:#?}");

    let round_trip = parse(&render(&live)).expect("rendered text parses");
    assert_eq!(round_trip, live);
    println!("\n{}", render(&live));
}
