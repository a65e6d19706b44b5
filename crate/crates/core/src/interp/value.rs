//! Runtime values and lexical environments.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::lang::ast::{ClassDef, FunctionDef};
use crate::lang::printer::{format_number, quote_string};

use super::StubRuntime;

#[derive(Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Num(f64),
    Str(Rc<str>),
    Array(Rc<RefCell<Vec<Value>>>),
    Object(Rc<RefCell<Object>>),
    Function(Rc<Function>),
    Class(Rc<Class>),
    Native(Rc<Native>),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(s.into())
    }

    pub fn array(items: Vec<Value>) -> Value {
        Value::Array(Rc::new(RefCell::new(items)))
    }

    pub fn object(obj: Object) -> Value {
        Value::Object(Rc::new(RefCell::new(obj)))
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Null => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Str(s) => !s.is_empty(),
            _ => true,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
            Value::Function(_) | Value::Native(_) => "function",
            Value::Class(_) => "class",
        }
    }

    /// `==`: primitives by value, everything else by identity.
    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Array(a), Value::Array(b)) => Rc::ptr_eq(a, b),
            (Value::Object(a), Value::Object(b)) => Rc::ptr_eq(a, b),
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Class(a), Value::Class(b)) => Rc::ptr_eq(a, b),
            (Value::Native(a), Value::Native(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Text produced by `str(v)` and `print(v)`. Getters are not invoked.
    pub fn display(&self) -> String {
        let mut out = String::new();
        self.write_display(&mut out, 0, true);
        out
    }

    fn write_display(&self, out: &mut String, depth: usize, top: bool) {
        if depth > 4 {
            out.push_str("...");
            return;
        }
        match self {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Num(n) => out.push_str(&format_number(*n)),
            Value::Str(s) if top => out.push_str(s),
            Value::Str(s) => out.push_str(&quote_string(s)),
            Value::Array(items) => {
                out.push('[');
                for (i, v) in items.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write_display(out, depth + 1, false);
                }
                out.push(']');
            }
            Value::Object(o) => {
                let o = o.borrow();
                if let Some(c) = &o.class {
                    out.push_str(&c.def.name);
                    out.push(' ');
                }
                if o.props.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{ ");
                for (i, (k, v)) in o.props.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(k);
                    out.push_str(": ");
                    v.write_display(out, depth + 1, false);
                }
                out.push_str(" }");
            }
            Value::Function(_) | Value::Native(_) => out.push_str("[function]"),
            Value::Class(c) => {
                out.push_str("[class ");
                out.push_str(&c.def.name);
                out.push(']');
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "{:?}", s),
            other => f.write_str(&other.display()),
        }
    }
}

/// Insertion-ordered string-keyed map.
#[derive(Clone, Default)]
pub struct PropMap {
    entries: Vec<(Rc<str>, Value)>,
    index: BTreeMap<Rc<str>, usize>,
}

impl PropMap {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.index.get(key).map(|&i| &self.entries[i].1)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn insert(&mut self, key: &str, v: Value) {
        match self.index.get(key) {
            Some(&i) => self.entries[i].1 = v,
            None => {
                let k: Rc<str> = key.into();
                self.index.insert(k.clone(), self.entries.len());
                self.entries.push((k, v));
            }
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        let i = self.index.remove(key)?;
        let (_, v) = self.entries.remove(i);
        for slot in self.index.values_mut() {
            if *slot > i {
                *slot -= 1;
            }
        }
        Some(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rc<str>, &Value)> {
        self.entries.iter().map(|(k, v)| (k, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &Rc<str>> {
        self.entries.iter().map(|(k, _)| k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Default)]
pub struct Object {
    pub props: PropMap,
    pub getters: BTreeMap<String, Value>,
    pub setters: BTreeMap<String, Value>,
    /// Set for instances created with `new`.
    pub class: Option<Rc<Class>>,
}

impl Object {
    pub fn lookup_getter(&self, key: &str) -> Option<Value> {
        self.getters
            .get(key)
            .cloned()
            .or_else(|| self.class.as_ref().and_then(|c| c.getters.get(key).cloned()))
    }

    pub fn lookup_setter(&self, key: &str) -> Option<Value> {
        self.setters
            .get(key)
            .cloned()
            .or_else(|| self.class.as_ref().and_then(|c| c.setters.get(key).cloned()))
    }
}

pub struct Function {
    pub def: Rc<FunctionDef>,
    pub env: Env,
    pub props: RefCell<PropMap>,
}

pub struct Class {
    pub def: Rc<ClassDef>,
    pub constructor: Option<Rc<Function>>,
    pub methods: BTreeMap<String, Value>,
    pub getters: BTreeMap<String, Value>,
    pub setters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NativeKind {
    Print,
    Assert,
    Len,
    Str,
    Push,
    Keys,
    Eval,
    Exec,
    ExecSync,
    Spawn,
    Require,
    Apply,
    LookupGetter,
    DefineGetter,
    LookupSetter,
    DefineSetter,
    GuardCheck,
    GuardCall,
    StubFetch,
    StubFetchFile,
    CpFunProps,
}

impl NativeKind {
    pub fn name(self) -> &'static str {
        match self {
            NativeKind::Print => "print",
            NativeKind::Assert => "assert",
            NativeKind::Len => "len",
            NativeKind::Str => "str",
            NativeKind::Push => "push",
            NativeKind::Keys => "keys",
            NativeKind::Eval => "eval",
            NativeKind::Exec => "exec",
            NativeKind::ExecSync => "execSync",
            NativeKind::Spawn => "spawn",
            NativeKind::Require => "require",
            NativeKind::Apply => "apply",
            NativeKind::LookupGetter => "__lookupGetter__",
            NativeKind::DefineGetter => "__defineGetter__",
            NativeKind::LookupSetter => "__lookupSetter__",
            NativeKind::DefineSetter => "__defineSetter__",
            NativeKind::GuardCheck => "__guardCheck",
            NativeKind::GuardCall => "__guardCall",
            NativeKind::StubFetch => "__stubFetch",
            NativeKind::StubFetchFile => "__stubFetchFile",
            NativeKind::CpFunProps => "__cpFunProps",
        }
    }

    pub fn intrinsic_method(name: &str) -> Option<NativeKind> {
        Some(match name {
            "__lookupGetter__" => NativeKind::LookupGetter,
            "__defineGetter__" => NativeKind::DefineGetter,
            "__lookupSetter__" => NativeKind::LookupSetter,
            "__defineSetter__" => NativeKind::DefineSetter,
            _ => return None,
        })
    }
}

pub enum NativeData {
    None,
    /// Receiver of an intrinsic method such as `f.apply`.
    Receiver(Value),
    /// Requiring module, for `require`.
    Module(Rc<str>),
    Runtime(Rc<StubRuntime>),
}

pub struct Native {
    pub kind: NativeKind,
    pub data: NativeData,
}

impl Native {
    pub fn new(kind: NativeKind, data: NativeData) -> Rc<Native> {
        Rc::new(Native { kind, data })
    }
}

pub type Cell = Rc<RefCell<Option<Value>>>;

pub fn cell(v: Option<Value>) -> Cell {
    Rc::new(RefCell::new(v))
}

/// One lexical scope. `this` is set on function and module scopes; block
/// and eval scopes inherit it from their parent.
pub struct Scope {
    vars: RefCell<BTreeMap<String, Cell>>,
    parent: Option<Env>,
    this: Option<Value>,
}

pub type Env = Rc<Scope>;

impl Scope {
    pub fn root() -> Env {
        Rc::new(Scope { vars: RefCell::default(), parent: None, this: Some(Value::Null) })
    }

    pub fn child(parent: &Env) -> Env {
        Rc::new(Scope { vars: RefCell::default(), parent: Some(parent.clone()), this: None })
    }

    pub fn function(parent: &Env, this: Value) -> Env {
        Rc::new(Scope { vars: RefCell::default(), parent: Some(parent.clone()), this: Some(this) })
    }

    /// Binds `name` in this scope, replacing any earlier binding here.
    pub fn declare(&self, name: &str, v: Option<Value>) -> Cell {
        let c = cell(v);
        self.vars.borrow_mut().insert(name.into(), c.clone());
        c
    }

    pub fn bind_cell(&self, name: &str, c: Cell) {
        self.vars.borrow_mut().insert(name.into(), c);
    }

    pub fn own(&self, name: &str) -> Option<Cell> {
        self.vars.borrow().get(name).cloned()
    }

    pub fn lookup(&self, name: &str) -> Option<Cell> {
        let mut s = self;
        loop {
            if let Some(c) = s.vars.borrow().get(name) {
                return Some(c.clone());
            }
            s = s.parent.as_deref()?;
        }
    }

    pub fn this_value(&self) -> Value {
        let mut s = self;
        loop {
            if let Some(t) = &s.this {
                return t.clone();
            }
            match s.parent.as_deref() {
                Some(p) => s = p,
                None => return Value::Null,
            }
        }
    }

    /// Drops every binding, breaking reference cycles through closures.
    pub fn clear(&self) {
        let vars = core::mem::take(&mut *self.vars.borrow_mut());
        drop(vars);
    }
}
