//! Random MiniMod programs built around closures: nested anonymous
//! functions capture parameters and locals, get called again with other
//! arguments, and escape through return values and object methods.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stubshrink_core::callgraph::{CgMode, ReachabilitySet};
use stubshrink_core::host::{Manifest, MemHost};
use stubshrink_core::interp::{run_tests, NoHooks, RuntimeConfig, TestReport};
use stubshrink_core::lang::{self, FunctionKind};
use stubshrink_core::stubbify::{stubbify_package, StubOptions};

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Num,
    /// One numeric argument, numeric result.
    Fn,
}

#[derive(Clone, Copy, PartialEq)]
enum Ret {
    Num,
    Closure,
}

struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
    /// Top-level functions defined so far.
    fns: Vec<(String, Ret)>,
}

impl Gen {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{}{}", prefix, self.fresh)
    }

    fn lit(&mut self) -> String {
        self.rng.gen_range(0..10).to_string()
    }

    fn num(&mut self, depth: u32, scope: &[(String, Kind)]) -> String {
        let nums: Vec<&String> = scope.iter().filter(|(_, k)| *k == Kind::Num).map(|(n, _)| n).collect();
        let fns: Vec<&String> = scope.iter().filter(|(_, k)| *k == Kind::Fn).map(|(n, _)| n).collect();
        let pick = if depth == 0 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..7) };
        match pick {
            0 => self.lit(),
            1 if !nums.is_empty() => nums[self.rng.gen_range(0..nums.len())].clone(),
            2 | 3 => {
                let op = ["+", "-", "*"][self.rng.gen_range(0..3)];
                format!("({} {} {})", self.num(depth - 1, scope), op, self.num(depth - 1, scope))
            }
            4 if !fns.is_empty() => {
                let f = fns[self.rng.gen_range(0..fns.len())].clone();
                format!("{}({})", f, self.num(depth - 1, scope))
            }
            5 if !self.fns.is_empty() => {
                let (f, ret) = self.fns[self.rng.gen_range(0..self.fns.len())].clone();
                let (a, b) = (self.num(0, scope), self.num(0, scope));
                match ret {
                    Ret::Num => format!("{}({}, {})", f, a, b),
                    Ret::Closure => format!("{}({}, {})({})", f, a, b, self.num(0, scope)),
                }
            }
            6 if !nums.is_empty() => {
                // Object method closing over the scope.
                let m = self.name("m");
                let p = self.name("p");
                let mut inner = scope.to_vec();
                inner.push((p.clone(), Kind::Num));
                let body = self.num(depth - 1, &inner);
                format!("{{ {}: function({}) {{ return {}; }} }}.{}({})", m, p, body, m, self.lit())
            }
            _ => self.lit(),
        }
    }

    /// `function(x) { ... }` closing over `scope`.
    fn closure(&mut self, depth: u32, scope: &[(String, Kind)], indent: usize) -> String {
        let x = self.name("x");
        let mut inner = scope.to_vec();
        inner.push((x.clone(), Kind::Num));
        let body = self.body(depth.saturating_sub(1), &mut inner, indent + 1, Ret::Num);
        format!("function({}) {{\n{}{}}}", x, body, "  ".repeat(indent))
    }

    fn body(&mut self, depth: u32, scope: &mut Vec<(String, Kind)>, indent: usize, ret: Ret) -> String {
        let pad = "  ".repeat(indent);
        let mut out = String::new();
        let n = self.rng.gen_range(1..4);
        for _ in 0..n {
            match self.rng.gen_range(0..5) {
                0 | 1 => {
                    let v = self.name("v");
                    let e = self.num(2, scope);
                    out += &format!("{}let {} = {};\n", pad, v, e);
                    scope.push((v, Kind::Num));
                }
                2 if depth > 0 => {
                    let c = self.name("c");
                    let f = self.closure(depth, scope, indent);
                    out += &format!("{}let {} = {};\n", pad, c, f);
                    // Re-invocation under differing arguments.
                    let v = self.name("v");
                    out += &format!("{}let {} = {}({}) + {}({});\n", pad, v, c, self.lit(), c, self.lit());
                    scope.push((c, Kind::Fn));
                    scope.push((v, Kind::Num));
                }
                3 => {
                    // A counter closure over a mutable local.
                    let cnt = self.name("n");
                    let inc = self.name("inc");
                    let x = self.name("x");
                    out += &format!("{}let {} = {};\n", pad, cnt, self.num(1, scope));
                    out += &format!(
                        "{}let {} = function({}) {{\n{}  {} = {} + {};\n{}  return {};\n{}}};\n",
                        pad, inc, x, pad, cnt, cnt, x, pad, cnt, pad
                    );
                    out += &format!("{}{}({});\n", pad, inc, self.lit());
                    scope.push((cnt, Kind::Num));
                    scope.push((inc, Kind::Fn));
                }
                _ => {
                    let nums: Vec<String> = scope.iter().filter(|(_, k)| *k == Kind::Num).map(|(n, _)| n.clone()).collect();
                    if let Some(v) = nums.last() {
                        let cond = format!("{} > {}", self.num(1, scope), self.num(1, scope));
                        let e = self.num(1, scope);
                        out += &format!("{}if ({}) {{\n{}  {} = {};\n{}}}\n", pad, cond, pad, v, e, pad);
                    }
                }
            }
        }
        match ret {
            Ret::Num => out += &format!("{}return {};\n", pad, self.num(2, scope)),
            Ret::Closure => {
                let f = self.closure(depth.max(1), scope, indent);
                out += &format!("{}return {};\n", pad, f);
            }
        }
        out
    }

    fn program(&mut self) -> String {
        let mut src = String::new();
        let count = self.rng.gen_range(2..6);
        for _ in 0..count {
            let name = self.name("f");
            let ret = if self.rng.gen_bool(0.5) { Ret::Closure } else { Ret::Num };
            let mut scope = vec![("a".to_string(), Kind::Num), ("b".to_string(), Kind::Num)];
            let body = self.body(2, &mut scope, 1, ret);
            src += &format!("function {}(a, b) {{\n{}}}\n\n", name, body);
            self.fns.push((name, ret));
        }
        for (name, ret) in self.fns.clone() {
            let (a, b, c, d) = (self.lit(), self.lit(), self.lit(), self.lit());
            match ret {
                Ret::Num => {
                    src += &format!("print({}({}, {}));\n", name, a, b);
                    src += &format!("print({}({}, {}));\n", name, c, d);
                }
                Ret::Closure => {
                    let h = self.name("h");
                    src += &format!("let {} = {}({}, {});\n", h, name, a, b);
                    src += &format!("print({}(1), {}(5), {}(1));\n", h, h, h);
                    src += &format!("print({}({}, {})(2));\n", name, c, d);
                }
            }
        }
        src
    }
}

pub fn program(seed: u64) -> String {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), fresh: 0, fns: Vec::new() };
    g.program()
}

fn host(src: &str) -> MemHost {
    let mut h = MemHost::new();
    h.add_package(
        "",
        Manifest {
            name: "random".into(),
            version: "0.0.0".into(),
            main: "lib.mm".into(),
            tests: vec!["t.mm".into()],
            ..Manifest::default()
        },
    );
    h.add_file("lib.mm", src);
    h.add_file("t.mm", "require(\"./lib\");\n");
    h
}

fn run(h: &MemHost) -> TestReport {
    run_tests(h, &["t.mm".to_string()], &RuntimeConfig::default(), &mut NoHooks)
}

/// Force-stubs the program twice: once with every function unreachable,
/// once with the top-level functions reachable so that the nested
/// closures themselves become stubs. Returns the number of stubs applied.
pub fn check(seed: u64) -> Result<usize, String> {
    let src = program(seed);
    let h = host(&src);
    let want = run(&h);
    if !want.all_passed() {
        return Err(format!("seed {}: generated program fails: {:?}\n{}", seed, want.tests[0].error, src));
    }
    let m = lang::parse(&src, "lib.mm").map_err(|e| e.to_string())?;
    let named: BTreeSet<String> =
        lang::functions_of(&m).iter().filter(|f| f.kind == FunctionKind::Named).map(|f| f.uid.clone()).collect();
    let mut applied = 0;
    for reachable in [BTreeSet::new(), named] {
        let rs = ReachabilitySet {
            mode: CgMode::Static,
            entry_points: vec!["t.mm".into()],
            reachable_files: ["lib.mm".to_string()].into(),
            reachable_functions: reachable,
        };
        let opts = StubOptions { force: true, ..StubOptions::default() };
        let sp = stubbify_package(&h, "", &rs, &opts).map_err(|e| format!("seed {}: {}", seed, e))?;
        applied += sp.plan.function_stubs.len();
        let got = run(&sp.install(&h));
        if got.pass_fail() != want.pass_fail() || got.tests[0].output != want.tests[0].output {
            return Err(format!(
                "seed {}: stubbed output differs\nwant {:?}\ngot  {:?} {:?}\n{}",
                seed, want.tests[0].output, got.tests[0].output, got.tests[0].error, src
            ));
        }
    }
    Ok(applied)
}
