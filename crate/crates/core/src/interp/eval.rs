//! Statement execution, expression evaluation and calls.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use super::value::*;
use super::{ErrorKind, Frame, Interpreter, Result};
use crate::lang::ast::*;
use crate::lang::{self, printer::format_number};

pub(crate) enum Flow {
    Normal,
    Return(Value),
}

impl Interpreter<'_> {
    /// Declares a statement list's bindings in `env` before it runs:
    /// functions are bound to closures, `let`s and classes start
    /// uninitialised.
    pub(crate) fn hoist(&mut self, stmts: &[Stmt], env: &Env) {
        for s in stmts {
            match &s.kind {
                StmtKind::Let { name, .. } => {
                    env.declare(name, None);
                }
                StmtKind::Class(c) => {
                    env.declare(&c.name, None);
                }
                _ => {}
            }
        }
        for s in stmts {
            if let StmtKind::Function(f) | StmtKind::ExportFunction(f) = &s.kind {
                let v = self.closure(f, env);
                env.declare(f.name.as_deref().unwrap_or_default(), Some(v));
            }
        }
    }

    pub(crate) fn closure(&self, f: &Rc<FunctionDef>, env: &Env) -> Value {
        Value::Function(Rc::new(Function { def: f.clone(), env: env.clone(), props: RefCell::default() }))
    }

    /// Runs a block in a fresh child scope.
    fn block(&mut self, stmts: &[Stmt], env: &Env) -> Result<Flow> {
        let inner = Scope::child(env);
        self.hoist(stmts, &inner);
        self.exec_stmts(stmts, &inner, &mut None)
    }

    /// Executes statements in `env` (already hoisted). `completion`, when
    /// given, receives each expression statement's value.
    pub(crate) fn exec_stmts(&mut self, stmts: &[Stmt], env: &Env, completion: &mut Option<Value>) -> Result<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.exec_stmt(s, env, completion)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, s: &Stmt, env: &Env, completion: &mut Option<Value>) -> Result<Flow> {
        self.step()?;
        match &s.kind {
            StmtKind::Let { name, init } => {
                let v = self.eval_expr(init, env)?;
                match env.own(name) {
                    Some(c) => *c.borrow_mut() = Some(v),
                    None => {
                        env.declare(name, Some(v));
                    }
                }
            }
            StmtKind::Assign { target, value } => self.assign(target, value, env)?,
            StmtKind::Expr(e) => {
                let v = self.eval_expr(e, env)?;
                if let Some(slot) = completion.as_mut() {
                    *slot = v;
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval_expr(e, env)?,
                    None => Value::Null,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::If { cond, then_block, else_block } => {
                if self.eval_expr(cond, env)?.truthy() {
                    return self.block(&then_block.stmts, env);
                } else if let Some(b) = else_block {
                    return self.block(&b.stmts, env);
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval_expr(cond, env)?.truthy() {
                    self.step()?;
                    if let Flow::Return(v) = self.block(&body.stmts, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Function(_) | StmtKind::ExportFunction(_) => {}
            StmtKind::Class(c) => {
                let v = self.class_value(c, env);
                match env.own(&c.name) {
                    Some(cell) => *cell.borrow_mut() = Some(v),
                    None => {
                        env.declare(&c.name, Some(v));
                    }
                }
            }
            StmtKind::Import { .. } | StmtKind::ExportNamed(_) => {}
            StmtKind::ExportDefault(e) => {
                let v = self.eval_expr(e, env)?;
                match env.own(super::modules::DEFAULT_SLOT) {
                    Some(c) => *c.borrow_mut() = Some(v),
                    None => return Err(self.rt_error("export default outside a module")),
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn class_value(&mut self, c: &Rc<ClassDef>, env: &Env) -> Value {
        let mut constructor = None;
        let mut methods = BTreeMap::new();
        let mut getters = BTreeMap::new();
        let mut setters = BTreeMap::new();
        for m in &c.members {
            let f = Rc::new(Function { def: m.clone(), env: env.clone(), props: RefCell::default() });
            let name = m.name.clone().unwrap_or_default();
            match m.kind {
                FunctionKind::Constructor => constructor = Some(f),
                FunctionKind::Getter => {
                    getters.insert(name, Value::Function(f));
                }
                FunctionKind::Setter => {
                    setters.insert(name, Value::Function(f));
                }
                _ => {
                    methods.insert(name, Value::Function(f));
                }
            }
        }
        Value::Class(Rc::new(Class { def: c.clone(), constructor, methods, getters, setters }))
    }

    fn assign(&mut self, target: &Expr, value: &Expr, env: &Env) -> Result<()> {
        match &target.kind {
            ExprKind::Ident(name) => {
                let v = self.eval_expr(value, env)?;
                let c = env
                    .lookup(name)
                    .ok_or_else(|| self.rt_error(format!("assignment to undeclared variable {}", name)))?;
                if c.borrow().is_none() {
                    return Err(self.rt_error(format!("{} assigned before initialization", name)));
                }
                *c.borrow_mut() = Some(v);
                Ok(())
            }
            ExprKind::Member { object, property } => {
                let o = self.eval_expr(object, env)?;
                let v = self.eval_expr(value, env)?;
                self.set_prop(&o, property, v)
            }
            ExprKind::Index { object, index } => {
                let o = self.eval_expr(object, env)?;
                let k = self.eval_expr(index, env)?;
                let v = self.eval_expr(value, env)?;
                self.set_index(&o, &k, v)
            }
            _ => Err(self.rt_error("invalid assignment target")),
        }
    }

    pub(crate) fn eval_expr(&mut self, e: &Expr, env: &Env) -> Result<Value> {
        match &e.kind {
            ExprKind::Num(n) => Ok(Value::Num(*n)),
            ExprKind::Str(s) => Ok(Value::str(s)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::Ident(name) => self.lookup(name, env),
            ExprKind::This => Ok(env.this_value()),
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.eval_expr(i, env)?);
                }
                Ok(Value::array(out))
            }
            ExprKind::Object(props) => {
                let mut obj = Object::default();
                for p in props {
                    match p {
                        Prop::Value { key, value } => {
                            let v = self.eval_expr(value, env)?;
                            obj.getters.remove(key.as_str());
                            obj.setters.remove(key.as_str());
                            obj.props.insert(key, v);
                        }
                        Prop::Getter(f) => {
                            obj.props.remove(f.name.as_deref().unwrap_or_default());
                            obj.getters.insert(f.name.clone().unwrap_or_default(), self.closure(f, env));
                        }
                        Prop::Setter(f) => {
                            obj.props.remove(f.name.as_deref().unwrap_or_default());
                            obj.setters.insert(f.name.clone().unwrap_or_default(), self.closure(f, env));
                        }
                    }
                }
                Ok(Value::object(obj))
            }
            ExprKind::Function(f) => Ok(self.closure(f, env)),
            ExprKind::Call { callee, args } => {
                let (f, this) = match &callee.kind {
                    ExprKind::Member { object, property } => {
                        let o = self.eval_expr(object, env)?;
                        let f = self.get_prop(&o, property)?;
                        (f, o)
                    }
                    ExprKind::Index { object, index } => {
                        let o = self.eval_expr(object, env)?;
                        let k = self.eval_expr(index, env)?;
                        let f = self.get_index(&o, &k)?;
                        (f, o)
                    }
                    _ => (self.eval_expr(callee, env)?, Value::Null),
                };
                let args = self.eval_args(args, env)?;
                self.call_value_in(&f, this, args, env)
            }
            ExprKind::Member { object, property } => {
                let o = self.eval_expr(object, env)?;
                self.get_prop(&o, property)
            }
            ExprKind::Index { object, index } => {
                let o = self.eval_expr(object, env)?;
                let k = self.eval_expr(index, env)?;
                self.get_index(&o, &k)
            }
            ExprKind::New { callee, args } => {
                let c = self.eval_expr(callee, env)?;
                let args = self.eval_args(args, env)?;
                self.construct(&c, args)
            }
            ExprKind::Binary { op, left, right } => {
                let l = self.eval_expr(left, env)?;
                match op {
                    BinOp::And => {
                        return if l.truthy() { self.eval_expr(right, env) } else { Ok(l) };
                    }
                    BinOp::Or => {
                        return if l.truthy() { Ok(l) } else { self.eval_expr(right, env) };
                    }
                    _ => {}
                }
                let r = self.eval_expr(right, env)?;
                self.binary(*op, l, r)
            }
            ExprKind::Not(inner) => Ok(Value::Bool(!self.eval_expr(inner, env)?.truthy())),
        }
    }

    fn eval_args(&mut self, args: &[Expr], env: &Env) -> Result<Vec<Value>> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            out.push(self.eval_expr(a, env)?);
        }
        Ok(out)
    }

    fn lookup(&mut self, name: &str, env: &Env) -> Result<Value> {
        // Guard intrinsics cannot be shadowed by user bindings.
        match name {
            "__guardCheck" => return Ok(self.guard_check.clone()),
            "__guardCall" => return Ok(self.guard_call.clone()),
            _ => {}
        }
        let c = env.lookup(name).ok_or_else(|| self.rt_error(format!("{} is not defined", name)))?;
        let v = c.borrow().clone();
        v.ok_or_else(|| self.rt_error(format!("{} accessed before initialization", name)))
    }

    fn binary(&self, op: BinOp, l: Value, r: Value) -> Result<Value> {
        use Value::{Num, Str};
        Ok(match (op, &l, &r) {
            (BinOp::Eq, _, _) => Value::Bool(l.loose_eq(&r)),
            (BinOp::Ne, _, _) => Value::Bool(!l.loose_eq(&r)),
            (BinOp::Add, Num(a), Num(b)) => Num(a + b),
            (BinOp::Add, Str(a), Str(b)) => {
                let mut s = String::with_capacity(a.len() + b.len());
                s.push_str(a);
                s.push_str(b);
                Value::Str(s.into())
            }
            (BinOp::Sub, Num(a), Num(b)) => Num(a - b),
            (BinOp::Mul, Num(a), Num(b)) => Num(a * b),
            (BinOp::Div, Num(a), Num(b)) => Num(a / b),
            (BinOp::Lt, Num(a), Num(b)) => Value::Bool(a < b),
            (BinOp::Le, Num(a), Num(b)) => Value::Bool(a <= b),
            (BinOp::Gt, Num(a), Num(b)) => Value::Bool(a > b),
            (BinOp::Ge, Num(a), Num(b)) => Value::Bool(a >= b),
            (BinOp::Lt, Str(a), Str(b)) => Value::Bool(a < b),
            (BinOp::Le, Str(a), Str(b)) => Value::Bool(a <= b),
            (BinOp::Gt, Str(a), Str(b)) => Value::Bool(a > b),
            (BinOp::Ge, Str(a), Str(b)) => Value::Bool(a >= b),
            _ => {
                return Err(self.rt_error(format!(
                    "operator {} not defined for {} and {}",
                    op.symbol(),
                    l.type_name(),
                    r.type_name()
                )))
            }
        })
    }

    pub(crate) fn get_prop(&mut self, o: &Value, key: &str) -> Result<Value> {
        match o {
            Value::Object(obj) => {
                let getter = {
                    let b = obj.borrow();
                    if let Some(g) = b.getters.get(key) {
                        Some(g.clone())
                    } else if let Some(v) = b.props.get(key) {
                        return Ok(v.clone());
                    } else if let Some(c) = &b.class {
                        if let Some(g) = c.getters.get(key) {
                            Some(g.clone())
                        } else if let Some(m) = c.methods.get(key) {
                            return Ok(m.clone());
                        } else {
                            None
                        }
                    } else {
                        None
                    }
                };
                if let Some(g) = getter {
                    return self.call_value(&g, o.clone(), Vec::new());
                }
                if b_has_setter(obj, key) {
                    return Ok(Value::Null);
                }
                Ok(match NativeKind::intrinsic_method(key) {
                    Some(kind) => Value::Native(Native::new(kind, NativeData::Receiver(o.clone()))),
                    None => Value::Null,
                })
            }
            Value::Function(f) => {
                if let Some(v) = f.props.borrow().get(key) {
                    return Ok(v.clone());
                }
                Ok(if key == "apply" {
                    Value::Native(Native::new(NativeKind::Apply, NativeData::Receiver(o.clone())))
                } else {
                    Value::Null
                })
            }
            Value::Native(_) if key == "apply" => {
                Ok(Value::Native(Native::new(NativeKind::Apply, NativeData::Receiver(o.clone()))))
            }
            Value::Class(_) | Value::Native(_) => Ok(Value::Null),
            _ => Err(self.rt_error(format!("cannot read property {} of {}", key, o.type_name()))),
        }
    }

    pub(crate) fn set_prop(&mut self, o: &Value, key: &str, v: Value) -> Result<()> {
        match o {
            Value::Object(obj) => {
                let (setter, getter) = {
                    let b = obj.borrow();
                    if b.props.contains(key) {
                        (None, None)
                    } else {
                        (b.lookup_setter(key), b.lookup_getter(key))
                    }
                };
                if let Some(s) = setter {
                    self.call_value(&s, o.clone(), alloc::vec![v])?;
                    return Ok(());
                }
                if getter.is_some() {
                    return Err(self.rt_error(format!("property {} has a getter but no setter", key)));
                }
                obj.borrow_mut().props.insert(key, v);
                Ok(())
            }
            Value::Function(f) => {
                f.props.borrow_mut().insert(key, v);
                Ok(())
            }
            _ => Err(self.rt_error(format!("cannot set property {} of {}", key, o.type_name()))),
        }
    }

    pub(crate) fn get_index(&mut self, o: &Value, k: &Value) -> Result<Value> {
        match (o, k) {
            (Value::Array(items), Value::Num(n)) => Ok(index_of(*n, items.borrow().len())
                .map(|i| items.borrow()[i].clone())
                .unwrap_or(Value::Null)),
            (Value::Str(s), Value::Num(n)) => Ok(index_of(*n, usize::MAX)
                .and_then(|i| s.chars().nth(i))
                .map(|c| Value::Str(c.to_string().into()))
                .unwrap_or(Value::Null)),
            (Value::Object(_) | Value::Function(_) | Value::Class(_) | Value::Native(_), Value::Str(key)) => {
                self.get_prop(o, key)
            }
            (Value::Object(_) | Value::Function(_), Value::Num(n)) => self.get_prop(o, &format_number(*n)),
            _ => Err(self.rt_error(format!("cannot index {} with {}", o.type_name(), k.type_name()))),
        }
    }

    fn set_index(&mut self, o: &Value, k: &Value, v: Value) -> Result<()> {
        match (o, k) {
            (Value::Array(items), Value::Num(n)) => {
                let len = items.borrow().len();
                match index_of(*n, len + 1) {
                    Some(i) if i == len => items.borrow_mut().push(v),
                    Some(i) => items.borrow_mut()[i] = v,
                    None => return Err(self.rt_error(format!("array index {} out of range", format_number(*n)))),
                }
                Ok(())
            }
            (Value::Object(_) | Value::Function(_), Value::Str(key)) => self.set_prop(o, key, v),
            (Value::Object(_) | Value::Function(_), Value::Num(n)) => self.set_prop(o, &format_number(*n), v),
            _ => Err(self.rt_error(format!("cannot index {} with {}", o.type_name(), k.type_name()))),
        }
    }

    pub fn call_value(&mut self, f: &Value, this: Value, args: Vec<Value>) -> Result<Value> {
        let env = self.global.clone();
        self.call_value_in(f, this, args, &env)
    }

    /// Calls `f`; `caller` is the calling scope, which `eval` runs under.
    pub(crate) fn call_value_in(&mut self, f: &Value, this: Value, args: Vec<Value>, caller: &Env) -> Result<Value> {
        match f {
            Value::Function(func) => self.call_function(func, this, args),
            Value::Native(n) => {
                let n = n.clone();
                self.call_native(&n, this, args, caller)
            }
            Value::Class(c) => Err(self.error(
                ErrorKind::NotCallable,
                format!("class {} cannot be called without new", c.def.name),
            )),
            other => Err(self.error(ErrorKind::NotCallable, format!("{} is not callable", other.type_name()))),
        }
    }

    pub(crate) fn call_function(&mut self, func: &Rc<Function>, this: Value, args: Vec<Value>) -> Result<Value> {
        let def = &func.def;
        match def.kind {
            FunctionKind::Getter if !args.is_empty() => {
                return Err(self.rt_error(format!("getter {} takes no arguments", def.name.as_deref().unwrap_or(""))))
            }
            FunctionKind::Setter if args.len() != 1 => {
                return Err(self.rt_error(format!("setter {} takes one argument", def.name.as_deref().unwrap_or(""))))
            }
            _ => {}
        }
        if self.stack.len() >= self.config.max_call_depth {
            return Err(self.error(ErrorKind::Limit, "maximum call depth exceeded"));
        }
        self.step()?;
        if !def.uid.is_empty() {
            self.hooks.on_function_enter(&def.uid);
        }
        let env = Scope::function(&func.env, this);
        for (i, p) in def.params.iter().enumerate() {
            env.declare(p, Some(args.get(i).cloned().unwrap_or(Value::Null)));
        }
        env.declare("arguments", Some(Value::array(args)));
        self.hoist(&def.body, &env);
        self.stack.push(Frame { label: frame_label(def) });
        let r = self.exec_stmts(&def.body, &env, &mut None);
        self.stack.pop();
        match r? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::Null),
        }
    }

    fn construct(&mut self, c: &Value, args: Vec<Value>) -> Result<Value> {
        let class = match c {
            Value::Class(class) => class.clone(),
            other => {
                return Err(self.error(ErrorKind::NotCallable, format!("{} is not a class", other.type_name())))
            }
        };
        let obj = Value::object(Object { class: Some(class.clone()), ..Object::default() });
        if let Some(ctor) = &class.constructor {
            self.call_function(ctor, obj.clone(), args)?;
        }
        Ok(obj)
    }

    /// Parses (with caching) and runs `code` in a child scope of `env`.
    pub(crate) fn eval_in_scope(&mut self, code: &str, env: &Env) -> Result<Value> {
        let stmts = match self.eval_cache.get(code) {
            Some(s) => s.clone(),
            None => {
                let stmts = lang::parse_statements(code, "<eval>")
                    .map_err(|e| self.error(ErrorKind::Parse(e.clone()), format!("parse error in eval: {}", e)))?;
                if stmts.iter().any(|s| s.kind.is_module_syntax()) {
                    return Err(self.error(ErrorKind::EvalImport, "import/export cannot be evaluated"));
                }
                let stmts = Rc::new(stmts);
                self.eval_cache.insert(code.to_string(), stmts.clone());
                stmts
            }
        };
        let inner = Scope::child(env);
        self.hoist(&stmts, &inner);
        let mut completion = Some(Value::Null);
        match self.exec_stmts(&stmts, &inner, &mut completion)? {
            Flow::Normal => Ok(completion.unwrap_or(Value::Null)),
            Flow::Return(_) => Err(self.rt_error("return outside a function")),
        }
    }
}

fn b_has_setter(obj: &Rc<RefCell<Object>>, key: &str) -> bool {
    obj.borrow().lookup_setter(key).is_some()
}

fn index_of(n: f64, len: usize) -> Option<usize> {
    if n >= 0.0 && (n as usize) as f64 == n && (n as usize) < len {
        Some(n as usize)
    } else {
        None
    }
}

fn frame_label(def: &FunctionDef) -> String {
    match &def.name {
        Some(n) => format!("{} ({})", n, def.uid),
        None => format!("<anonymous> ({})", def.uid),
    }
}
