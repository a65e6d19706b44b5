//! Module instantiation, linking and the stub prelude.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use super::eval::Flow;
use super::value::*;
use super::{ErrorKind, Frame, Interpreter, ModuleState, Result, StubRuntime};
use crate::host::HostError;
use crate::lang::ast::*;

/// Binding slot for `export default e`; not a valid identifier.
pub(crate) const DEFAULT_SLOT: &str = "*default*";

pub enum ModuleExports {
    /// Live bindings shared with importers.
    Esm(BTreeMap<String, Cell>),
    /// Final `module.exports`.
    Value(Value),
}

pub struct ModuleInstance {
    pub path: String,
    pub style: ModuleStyle,
    pub exports: ModuleExports,
    snapshot: RefCell<Option<Value>>,
}

impl core::fmt::Debug for ModuleInstance {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "ModuleInstance({})", self.path)
    }
}

impl ModuleInstance {
    /// Names an ES module exports, or the own keys of `module.exports`.
    pub fn export_names(&self) -> Vec<String> {
        match &self.exports {
            ModuleExports::Esm(m) => m.keys().cloned().collect(),
            ModuleExports::Value(Value::Object(o)) => o.borrow().props.keys().map(|k| k.to_string()).collect(),
            ModuleExports::Value(_) => Vec::new(),
        }
    }
}

impl Interpreter<'_> {
    /// Instantiates the module at `path` (once per interpreter).
    pub fn run_module(&mut self, path: &str) -> Result<Rc<ModuleInstance>> {
        self.instantiate(path)
    }

    /// The exports as a value: `module.exports` for CommonJS and plain
    /// modules, a snapshot object of named exports plus `default` for
    /// ES modules.
    pub fn exports_value(&self, inst: &ModuleInstance) -> Value {
        match &inst.exports {
            ModuleExports::Value(v) => v.clone(),
            ModuleExports::Esm(cells) => {
                if let Some(v) = inst.snapshot.borrow().as_ref() {
                    return v.clone();
                }
                let mut obj = Object::default();
                for (k, c) in cells {
                    obj.props.insert(k, c.borrow().clone().unwrap_or(Value::Null));
                }
                let v = Value::object(obj);
                *inst.snapshot.borrow_mut() = Some(v.clone());
                v
            }
        }
    }

    pub(crate) fn require(&mut self, from: &str, spec: &str) -> Result<Value> {
        let target = self.resolve(from, spec)?;
        let inst = self.instantiate(&target)?;
        Ok(self.exports_value(&inst))
    }

    fn resolve(&self, from: &str, spec: &str) -> Result<String> {
        self.host.resolve(from, spec).map_err(|e| self.host_error(e))
    }

    fn host_error(&self, e: HostError) -> RuntimeError {
        let msg = e.to_string();
        match e {
            HostError::Lang(l) => self.error(l.into(), msg),
            other => self.error(ErrorKind::Host(other), msg),
        }
    }

    fn instantiate(&mut self, path: &str) -> Result<Rc<ModuleInstance>> {
        match self.modules.get(path) {
            Some(ModuleState::Ready(inst)) => return Ok(inst.clone()),
            Some(ModuleState::Loading) => {
                let start = self.loading.iter().position(|p| p == path).unwrap_or(0);
                let mut chain: Vec<String> = self.loading[start..].to_vec();
                chain.push(path.to_string());
                let msg = format!("import cycle: {}", chain.join(" -> "));
                return Err(self.error(ErrorKind::Cycle(chain), msg));
            }
            None => {}
        }
        let m = self.host.load(path).map_err(|e| self.host_error(e))?;
        self.modules.insert(path.to_string(), ModuleState::Loading);
        self.loading.push(path.to_string());
        let r = self.instantiate_module(&m);
        self.loading.pop();
        match r {
            Ok(inst) => {
                self.modules.insert(path.to_string(), ModuleState::Ready(inst.clone()));
                Ok(inst)
            }
            Err(e) => {
                self.modules.remove(path);
                Err(e)
            }
        }
    }

    fn instantiate_module(&mut self, m: &Module) -> Result<Rc<ModuleInstance>> {
        let path = m.path.as_str();
        let env = Scope::function(&self.global, Value::Null);
        self.module_envs.push(env.clone());
        env.declare("require", Some(Value::Native(Native::new(NativeKind::Require, NativeData::Module(path.into())))));
        let module_obj = if m.style == ModuleStyle::Esm {
            None
        } else {
            let exports = Value::object(Object::default());
            let mut module = Object::default();
            module.props.insert("exports", exports.clone());
            let module = Value::object(module);
            env.declare("module", Some(module.clone()));
            env.declare("exports", Some(exports));
            Some(module)
        };
        if let Some(rt) = self.host.stub_runtime(path) {
            let stubs = self.stubs_object(&rt)?;
            env.declare("stubs", Some(stubs));
        }

        for s in &m.items {
            if let StmtKind::Import { clause, source } = &s.kind {
                let target = self.resolve(path, source)?;
                let inst = self.instantiate(&target)?;
                match clause {
                    ImportClause::Default(local) => {
                        let c = self.import_cell(&inst, "default")?;
                        env.bind_cell(local, c);
                    }
                    ImportClause::Named(specs) => {
                        for sp in specs {
                            let c = self.import_cell(&inst, &sp.imported)?;
                            env.bind_cell(&sp.local, c);
                        }
                    }
                }
            }
        }

        self.hoist(&m.items, &env);
        let mut exports = BTreeMap::new();
        if m.style == ModuleStyle::Esm {
            for s in &m.items {
                match &s.kind {
                    StmtKind::ExportFunction(f) => {
                        let name = f.name.clone().unwrap_or_default();
                        if let Some(c) = env.own(&name) {
                            exports.insert(name, c);
                        }
                    }
                    StmtKind::ExportNamed(specs) => {
                        for sp in specs {
                            let c = env
                                .own(&sp.local)
                                .ok_or_else(|| self.rt_error(format!("export of undeclared {}", sp.local)))?;
                            exports.insert(sp.exported.clone(), c);
                        }
                    }
                    StmtKind::ExportDefault(_) => {
                        let c = env.declare(DEFAULT_SLOT, None);
                        exports.insert("default".into(), c);
                    }
                    _ => {}
                }
            }
        }

        self.hooks.on_module_instantiate(path);
        self.stack.push(Frame { label: format!("<module> ({})", path) });
        let r = self.exec_stmts(&m.items, &env, &mut None);
        self.stack.pop();
        if let Flow::Return(_) = r? {
            return Err(self.rt_error("return outside a function"));
        }
        let exports = match module_obj {
            None => ModuleExports::Esm(exports),
            Some(module) => ModuleExports::Value(self.get_prop(&module, "exports")?),
        };
        Ok(Rc::new(ModuleInstance { path: path.into(), style: m.style, exports, snapshot: RefCell::new(None) }))
    }

    fn import_cell(&mut self, inst: &ModuleInstance, name: &str) -> Result<Cell> {
        match &inst.exports {
            ModuleExports::Esm(cells) => cells
                .get(name)
                .cloned()
                .ok_or_else(|| self.rt_error(format!("{} does not export {}", inst.path, name))),
            ModuleExports::Value(v) => {
                if name == "default" {
                    Ok(cell(Some(v.clone())))
                } else {
                    let v = v.clone();
                    Ok(cell(Some(self.get_prop(&v, name)?)))
                }
            }
        }
    }

    /// The `stubs` object of a stubbified package, built from its prelude
    /// once per interpreter.
    fn stubs_object(&mut self, rt: &Rc<StubRuntime>) -> Result<Value> {
        if let Some(v) = self.preludes.get(&rt.id) {
            return Ok(v.clone());
        }
        let env = Scope::function(&self.global, Value::Null);
        self.module_envs.push(env.clone());
        for kind in [NativeKind::StubFetch, NativeKind::StubFetchFile] {
            env.declare(kind.name(), Some(Value::Native(Native::new(kind, NativeData::Runtime(rt.clone())))));
        }
        env.declare(
            NativeKind::CpFunProps.name(),
            Some(Value::Native(Native::new(NativeKind::CpFunProps, NativeData::None))),
        );
        let prelude = rt.prelude.clone();
        self.hoist(&prelude, &env);
        let mut completion = Some(Value::Null);
        self.exec_stmts(&prelude, &env, &mut completion)?;
        let v = completion.unwrap_or(Value::Null);
        self.preludes.insert(rt.id.clone(), v.clone());
        Ok(v)
    }
}

use super::RuntimeError;
