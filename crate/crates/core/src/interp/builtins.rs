//! Global builtins, intrinsic methods, guard checks and stub natives.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::value::*;
use super::{Assertion, ErrorKind, ExpansionEvent, ExpansionKind, GuardEvent, GuardMode, Interpreter, Result};

impl Interpreter<'_> {
    pub(crate) fn call_native(&mut self, n: &Rc<Native>, _this: Value, args: Vec<Value>, caller: &Env) -> Result<Value> {
        let arg = |i: usize| args.get(i).cloned().unwrap_or(Value::Null);
        match n.kind {
            NativeKind::Print => {
                let line = args.iter().map(Value::display).collect::<Vec<_>>().join(" ");
                self.output.push(line);
                Ok(Value::Null)
            }
            NativeKind::Assert => {
                let ok = arg(0).truthy();
                let message = match arg(1) {
                    Value::Null => String::new(),
                    m => m.display(),
                };
                self.assertions.push(Assertion { ok, message });
                Ok(Value::Null)
            }
            NativeKind::Len => match arg(0) {
                Value::Str(s) => Ok(Value::Num(s.chars().count() as f64)),
                Value::Array(a) => Ok(Value::Num(a.borrow().len() as f64)),
                other => Err(self.rt_error(format!("len of {}", other.type_name()))),
            },
            NativeKind::Str => Ok(Value::Str(arg(0).display().into())),
            NativeKind::Push => match arg(0) {
                Value::Array(a) => {
                    a.borrow_mut().push(arg(1));
                    Ok(Value::Num(a.borrow().len() as f64))
                }
                other => Err(self.rt_error(format!("push onto {}", other.type_name()))),
            },
            NativeKind::Keys => {
                let keys: Vec<Value> = match arg(0) {
                    Value::Object(o) => o.borrow().props.keys().map(|k| Value::Str(k.clone())).collect(),
                    Value::Function(f) => f.props.borrow().keys().map(|k| Value::Str(k.clone())).collect(),
                    other => return Err(self.rt_error(format!("keys of {}", other.type_name()))),
                };
                Ok(Value::array(keys))
            }
            NativeKind::Eval => match arg(0) {
                Value::Str(code) => self.eval_in_scope(&code, caller),
                other => Ok(other),
            },
            NativeKind::Exec | NativeKind::ExecSync | NativeKind::Spawn => {
                let marker = format!("{}:{}", n.kind.name(), arg(0).display());
                self.session.side_effects.push(marker.clone());
                Ok(Value::Str(marker.into()))
            }
            NativeKind::Require => {
                let from = match &n.data {
                    NativeData::Module(m) => m.clone(),
                    _ => return Err(self.rt_error("require without module context")),
                };
                match arg(0) {
                    Value::Str(spec) => self.require(&from, &spec),
                    other => Err(self.rt_error(format!("require of a {}", other.type_name()))),
                }
            }
            NativeKind::Apply => {
                let target = match &n.data {
                    NativeData::Receiver(r) => r.clone(),
                    _ => return Err(self.rt_error("apply without receiver")),
                };
                let list = match arg(1) {
                    Value::Array(a) => a.borrow().clone(),
                    Value::Null => Vec::new(),
                    other => return Err(self.rt_error(format!("apply with {} arguments", other.type_name()))),
                };
                self.call_value_in(&target, arg(0), list, caller)
            }
            NativeKind::LookupGetter | NativeKind::LookupSetter => {
                let key = self.key_arg(&arg(0))?;
                let obj = self.receiver_object(n)?;
                let b = obj.borrow();
                let found = if n.kind == NativeKind::LookupGetter { b.lookup_getter(&key) } else { b.lookup_setter(&key) };
                Ok(found.unwrap_or(Value::Null))
            }
            NativeKind::DefineGetter | NativeKind::DefineSetter => {
                let key = self.key_arg(&arg(0))?;
                let obj = self.receiver_object(n)?;
                let mut b = obj.borrow_mut();
                b.props.remove(&key);
                if n.kind == NativeKind::DefineGetter {
                    b.getters.insert(key, arg(1));
                } else {
                    b.setters.insert(key, arg(1));
                }
                Ok(Value::Null)
            }
            NativeKind::GuardCheck => {
                let v = arg(0);
                self.guard(&v)?;
                Ok(v)
            }
            NativeKind::GuardCall => {
                let recv = arg(0);
                let list = match arg(2) {
                    Value::Array(a) => a.borrow().clone(),
                    _ => Vec::new(),
                };
                let f = self.get_index(&recv, &arg(1))?;
                self.guard(&f)?;
                self.call_value_in(&f, recv, list, caller)
            }
            NativeKind::StubFetch | NativeKind::StubFetchFile => {
                let rt = match &n.data {
                    NativeData::Runtime(rt) => rt.clone(),
                    _ => return Err(self.rt_error("stub fetch without runtime")),
                };
                let key = self.key_arg(&arg(0))?;
                let kind = if n.kind == NativeKind::StubFetch { ExpansionKind::Function } else { ExpansionKind::File };
                let text = match rt.store.entries.get(&key) {
                    Some(t) => t.clone(),
                    None => return Err(self.rt_error(format!("code store has no entry for {}", key))),
                };
                if kind == ExpansionKind::Function {
                    *self.fetch_counts.entry(key.clone()).or_insert(0) += 1;
                }
                let first = self.session.fetched.insert((rt.id.clone(), key.clone()));
                self.session.seq += 1;
                let event = ExpansionEvent {
                    seq: self.session.seq,
                    test: self.session.test.clone(),
                    kind,
                    id: key,
                    bytes_loaded: if first { text.len() as u64 } else { 0 },
                    cache_hit: !first,
                };
                self.hooks.on_stub_expansion(&event);
                self.session.expansions.push(event);
                Ok(Value::Str(text.into()))
            }
            NativeKind::CpFunProps => {
                if let (Value::Function(from), Value::Function(to)) = (arg(0), arg(1)) {
                    if !Rc::ptr_eq(&from, &to) {
                        let props = from.props.borrow().clone();
                        let mut dst = to.props.borrow_mut();
                        for (k, v) in props.iter() {
                            dst.insert(k, v.clone());
                        }
                    }
                }
                Ok(arg(1))
            }
        }
    }

    fn key_arg(&self, v: &Value) -> Result<String> {
        match v {
            Value::Str(s) => Ok(s.to_string()),
            other => Err(self.rt_error(format!("expected a string key, got {}", other.type_name()))),
        }
    }

    fn receiver_object(&self, n: &Native) -> Result<Rc<core::cell::RefCell<Object>>> {
        match &n.data {
            NativeData::Receiver(Value::Object(o)) => Ok(o.clone()),
            _ => Err(self.rt_error(format!("{} needs an object receiver", n.kind.name()))),
        }
    }

    /// Fires a guard event if `v` is one of the dangerous builtin values.
    fn guard(&mut self, v: &Value) -> Result<()> {
        let Value::Native(n) = v else { return Ok(()) };
        let hit = self
            .dangerous
            .iter()
            .find(|(name, d)| Rc::ptr_eq(d, n) && self.guard.dangerous_names.contains(name))
            .map(|(name, _)| name.clone());
        let Some(name) = hit else { return Ok(()) };
        let mode = self.guard.mode;
        if mode == GuardMode::Off {
            return Ok(());
        }
        let event = GuardEvent { test: self.session.test.clone(), name: name.clone(), mode };
        self.hooks.on_guard_event(&event);
        self.session.guard_events.push(event);
        if mode == GuardMode::Exit {
            return Err(self.error(ErrorKind::GuardExit(name.clone()), format!("guard: call to {} blocked", name)));
        }
        Ok(())
    }
}
