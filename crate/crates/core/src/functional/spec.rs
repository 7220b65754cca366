//! JSON expression grammar and named built-ins.
//!
//! ```text
//! {"const": c}
//! {"cyl": "x" | "x2" | "x3" | "tx" | "sin_x" | "norm2", "coord": i, "order": k}
//! {"cyl": {"poly": [c0, c1, ...]}, "coord": i}
//! {"runint": "x" | "x2" | "sin_x" | "cos_x", "coord": i}
//! {"sum": [...]}  {"prod": [...]}
//! {"compose": "sin" | "cos" | "exp" | "sq" | "cube", "child": {...}}
//! "name"                      a built-in, see `builtin_names`
//! ```

use serde_json::{json, Map, Value};

use super::{CylKind, Cylinder, Expr, Functional, IntegrandKind, Outer, MAX_ORDER};
use crate::error::{Error, Result};

const BUILTINS: &[&str] = &[
    "zero",
    "identity",
    "square",
    "cube",
    "tx",
    "sin_x",
    "poly",
    "runint",
    "runint_sq",
    "runint_sin",
    "x_runint",
    "runint_squared",
    "exp_runint",
    "sin_square",
    "norm2",
];

pub fn builtin_names() -> &'static [&'static str] {
    BUILTINS
}

/// Named functional; `None` for unknown names.
pub fn builtin(name: &str) -> Option<Functional> {
    let x = || Expr::cyl(CylKind::X, 0);
    let runint = || Expr::runint(IntegrandKind::X, 0);
    let expr = match name {
        "zero" => Expr::Const(0.0),
        "identity" => x(),
        "square" => Expr::cyl(CylKind::X2, 0),
        "cube" => Expr::cyl(CylKind::X3, 0),
        "tx" => Expr::cyl(CylKind::TX, 0),
        "sin_x" => Expr::cyl(CylKind::SinX, 0),
        "poly" => Expr::cyl(CylKind::Poly(vec![1.0, 1.0, -0.5, 1.0 / 3.0]), 0),
        "runint" => runint(),
        "runint_sq" => Expr::runint(IntegrandKind::X2, 0),
        "runint_sin" => Expr::runint(IntegrandKind::SinX, 0),
        "x_runint" => Expr::Prod(vec![x(), runint()]),
        "runint_squared" => Expr::Compose(Outer::Square, Box::new(runint())),
        "exp_runint" => Expr::Compose(Outer::Exp, Box::new(runint())),
        "sin_square" => Expr::Compose(Outer::Sin, Box::new(Expr::cyl(CylKind::X2, 0))),
        "norm2" => Expr::cyl(CylKind::NormSq, 0),
        _ => return None,
    };
    Some(Functional::new(expr, name))
}

/// Parse a functional from the JSON grammar; errors carry the field path.
pub fn parse_functional(value: &Value) -> Result<Functional> {
    if let Value::String(name) = value {
        return builtin(name).ok_or_else(|| {
            Error::config(
                "",
                format!("unknown functional `{name}`; known: {}", BUILTINS.join(", ")),
            )
        });
    }
    let expr = parse_expr(value)?;
    let name = serde_json::to_string(value).unwrap_or_default();
    Ok(Functional::new(expr, name))
}

fn object(value: &Value) -> Result<&Map<String, Value>> {
    value
        .as_object()
        .ok_or_else(|| Error::config("", "expected an object or a built-in name"))
}

fn coord(obj: &Map<String, Value>) -> Result<usize> {
    match obj.get("coord") {
        None => Ok(0),
        Some(v) => v
            .as_u64()
            .map(|c| c as usize)
            .ok_or_else(|| Error::config("coord", "expected a non-negative integer")),
    }
}

fn children(value: &Value, key: &str) -> Result<Vec<Expr>> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::config(key, "expected an array"))?;
    if items.is_empty() {
        return Err(Error::config(key, "expected at least one child"));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_expr(v).map_err(|e| e.within(&format!("{key}[{i}]"))))
        .collect()
}

fn parse_expr(value: &Value) -> Result<Expr> {
    if let Value::String(name) = value {
        return builtin(name)
            .map(|f| f.expr().clone())
            .ok_or_else(|| Error::config("", format!("unknown functional `{name}`")));
    }
    let obj = object(value)?;
    if let Some(c) = obj.get("const") {
        let c = c.as_f64().ok_or_else(|| Error::config("const", "expected a number"))?;
        return Ok(Expr::Const(c));
    }
    if let Some(kind) = obj.get("cyl") {
        let kind = match kind {
            Value::String(s) => match s.as_str() {
                "x" => CylKind::X,
                "x2" => CylKind::X2,
                "x3" => CylKind::X3,
                "tx" => CylKind::TX,
                "sin_x" => CylKind::SinX,
                "norm2" => CylKind::NormSq,
                other => return Err(Error::config("cyl", format!("unknown cylinder `{other}`"))),
            },
            Value::Object(inner) => {
                let coeffs = inner
                    .get("poly")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::config("cyl.poly", "expected a coefficient array"))?;
                let coeffs = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.as_f64()
                            .ok_or_else(|| Error::config(format!("cyl.poly[{i}]"), "expected a number"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                CylKind::Poly(coeffs)
            }
            _ => return Err(Error::config("cyl", "expected a name or {\"poly\": [...]}")),
        };
        let mut leaf = Cylinder::new(kind, coord(obj)?);
        if let Some(order) = obj.get("order") {
            let order = order
                .as_u64()
                .filter(|o| *o as usize <= MAX_ORDER)
                .ok_or_else(|| Error::config("order", format!("expected an integer in 0..={MAX_ORDER}")))?;
            leaf.max_order = order as usize;
        }
        return Ok(Expr::Cyl(leaf));
    }
    if let Some(g) = obj.get("runint") {
        let kind = match g.as_str() {
            Some("x") => IntegrandKind::X,
            Some("x2") => IntegrandKind::X2,
            Some("sin_x") => IntegrandKind::SinX,
            Some("cos_x") => IntegrandKind::CosX,
            _ => return Err(Error::config("runint", "expected one of x, x2, sin_x, cos_x")),
        };
        return Ok(Expr::runint(kind, coord(obj)?));
    }
    if let Some(items) = obj.get("sum") {
        return Ok(Expr::Sum(children(items, "sum")?));
    }
    if let Some(items) = obj.get("prod") {
        return Ok(Expr::Prod(children(items, "prod")?));
    }
    if let Some(outer) = obj.get("compose") {
        let outer = match outer.as_str() {
            Some("sin") => Outer::Sin,
            Some("cos") => Outer::Cos,
            Some("exp") => Outer::Exp,
            Some("sq") => Outer::Square,
            Some("cube") => Outer::Cube,
            _ => return Err(Error::config("compose", "expected one of sin, cos, exp, sq, cube")),
        };
        let child = obj
            .get("child")
            .ok_or_else(|| Error::config("child", "missing composition argument"))?;
        let child = parse_expr(child).map_err(|e| e.within("child"))?;
        return Ok(Expr::Compose(outer, Box::new(child)));
    }
    Err(Error::config(
        "",
        "expected one of const, cyl, runint, sum, prod, compose",
    ))
}

/// JSON form of an expression, inverse of the grammar.
pub fn expr_to_json(expr: &Expr) -> Value {
    match expr {
        Expr::Const(c) => json!({ "const": c }),
        Expr::Cyl(leaf) => {
            let kind = match &leaf.kind {
                CylKind::X => json!("x"),
                CylKind::X2 => json!("x2"),
                CylKind::X3 => json!("x3"),
                CylKind::TX => json!("tx"),
                CylKind::SinX => json!("sin_x"),
                CylKind::NormSq => json!("norm2"),
                CylKind::Poly(c) => json!({ "poly": c }),
            };
            json!({ "cyl": kind, "coord": leaf.coord, "order": leaf.max_order })
        }
        Expr::RunInt { integrand, .. } => {
            let g = match integrand.kind {
                IntegrandKind::X => "x",
                IntegrandKind::X2 => "x2",
                IntegrandKind::SinX => "sin_x",
                IntegrandKind::CosX => "cos_x",
            };
            json!({ "runint": g, "coord": integrand.coord })
        }
        Expr::Sum(ch) => json!({ "sum": ch.iter().map(expr_to_json).collect::<Vec<_>>() }),
        Expr::Prod(ch) => json!({ "prod": ch.iter().map(expr_to_json).collect::<Vec<_>>() }),
        Expr::Compose(outer, child) => {
            let name = match outer {
                Outer::Sin => "sin",
                Outer::Cos => "cos",
                Outer::Exp => "exp",
                Outer::Square => "sq",
                Outer::Cube => "cube",
            };
            json!({ "compose": name, "child": expr_to_json(child) })
        }
    }
}

impl Functional {
    pub fn to_json(&self) -> Value {
        expr_to_json(self.expr())
    }
}
