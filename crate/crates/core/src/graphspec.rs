//! JSON graph descriptions: `{"kind": "birth_death" | "explicit" | "lattice",
//! "b": …, "mu": …, "potential": …}`.
//!
//! Birth–death chains accept explicit arrays for `b`/`mu` or named
//! closed-form families: `{"family": "const", "value": c}`,
//! `{"family": "power", "coeff": c, "exponent": p}` (value `c·(n+1)^p`),
//! `{"family": "geometric", "initial": a, "ratio": q}` (value `a·q^n`), and
//! `{"family": "factorial-like", "initial": a, "step0": s0, "step1": s1}`
//! (the ratio recurrence `value(n) = value(n-1)·(s0 + s1·n)`).  An optional
//! `"n"` pins the number of vertices; arrays imply it.  Explicit graphs give
//! `b` as an edge list `[[x, y, weight], …]` plus a `mu` array; duplicate
//! edges with conflicting weights and non-positive measures are rejected.
//! Potentials accept a number (constant), an array (per-vertex values,
//! zero beyond), or `{"family": "const" | "power", …}` with the power family
//! evaluating `coeff·n^exponent` at vertex `n`.

use serde_json::Value;
use thiserror::Error;

use crate::graph::{GraphError, WeightSeq, WeightedGraph};
use crate::potential::Potential;

#[derive(Debug, Error)]
pub enum GraphSpecError {
    #[error("cannot read graph spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("graph spec is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graph spec field `{field}`: {detail}")]
    Invalid { field: String, detail: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn invalid(field: &str, detail: impl Into<String>) -> GraphSpecError {
    GraphSpecError::Invalid {
        field: field.into(),
        detail: detail.into(),
    }
}

/// A parsed spec: the graph, the potential (zero when absent), the kind tag,
/// and the vertex count when the description pins one.  For birth–death
/// chains the raw weight/measure sequences are kept as well, since the
/// growth probe consumes them directly.
#[derive(Clone)]
pub struct ParsedSpec {
    pub graph: WeightedGraph,
    pub potential: Potential,
    pub kind: String,
    pub size_hint: Option<usize>,
    pub chain: Option<(WeightSeq, WeightSeq)>,
}

/// Parse a graph-spec document from a JSON string.
pub fn parse_graph_spec(text: &str) -> Result<ParsedSpec, GraphSpecError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root
        .as_object()
        .ok_or_else(|| invalid("<root>", "expected a JSON object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("kind", "expected one of birth_death, explicit, lattice"))?
        .to_string();
    let potential = parse_potential(obj.get("potential"))?;
    match kind.as_str() {
        "birth_death" => {
            let b = parse_seq("b", obj.get("b"))?;
            let mu = parse_seq("mu", obj.get("mu"))?;
            let explicit_n = match obj.get("n") {
                None => None,
                Some(v) => Some(
                    v.as_u64()
                        .ok_or_else(|| invalid("n", "expected a positive integer"))?
                        as usize,
                ),
            };
            // Arrays pin the size when no explicit count is given.
            let n = explicit_n.or_else(|| {
                let from_mu = mu.table_len();
                let from_b = b.table_len().map(|e| e + 1);
                match (from_mu, from_b) {
                    (Some(a), Some(c)) => Some(a.max(c)),
                    (x, y) => x.or(y),
                }
            });
            let graph = WeightedGraph::birth_death(b.clone(), mu.clone(), n)?;
            Ok(ParsedSpec {
                graph,
                potential,
                kind,
                size_hint: n,
                chain: Some((b, mu)),
            })
        }
        "explicit" => {
            let edges = parse_edges(obj.get("b"))?;
            let mu = parse_number_array("mu", obj.get("mu"))?;
            let n = mu.len();
            let graph = WeightedGraph::explicit(n, &edges, mu)?;
            Ok(ParsedSpec {
                graph,
                potential,
                kind,
                size_hint: Some(n),
                chain: None,
            })
        }
        "lattice" => {
            let w = parse_scalar("b", obj.get("b"))?;
            let m = parse_scalar("mu", obj.get("mu"))?;
            let graph = WeightedGraph::lattice2d(w, m)?;
            Ok(ParsedSpec {
                graph,
                potential,
                kind,
                size_hint: None,
                chain: None,
            })
        }
        other => Err(invalid(
            "kind",
            format!("unknown kind `{other}`; expected birth_death, explicit, or lattice"),
        )),
    }
}

/// Read and parse a graph-spec file.
pub fn load_graph_spec(path: &std::path::Path) -> Result<ParsedSpec, GraphSpecError> {
    parse_graph_spec(&std::fs::read_to_string(path)?)
}

fn parse_scalar(field: &str, v: Option<&Value>) -> Result<f64, GraphSpecError> {
    match v {
        Some(Value::Number(x)) => x
            .as_f64()
            .ok_or_else(|| invalid(field, "number out of range")),
        Some(Value::Object(map)) => {
            if map.get("family").and_then(Value::as_str) == Some("const") {
                parse_scalar(field, map.get("value"))
            } else {
                Err(invalid(field, "expected a number or a const family"))
            }
        }
        _ => Err(invalid(field, "expected a number")),
    }
}

fn parse_number_array(field: &str, v: Option<&Value>) -> Result<Vec<f64>, GraphSpecError> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(field, "expected an array of numbers"))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| invalid(field, "array entries must be numbers"))
        })
        .collect()
}

fn parse_edges(v: Option<&Value>) -> Result<Vec<(usize, usize, f64)>, GraphSpecError> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("b", "expected an edge list [[x, y, weight], …]"))?;
    let mut edges = Vec::with_capacity(arr.len());
    for (i, entry) in arr.iter().enumerate() {
        let triple = entry
            .as_array()
            .filter(|t| t.len() == 3)
            .ok_or_else(|| invalid("b", format!("edge {i} is not a [x, y, weight] triple")))?;
        let x = triple[0]
            .as_u64()
            .ok_or_else(|| invalid("b", format!("edge {i}: x must be a nonnegative integer")))?;
        let y = triple[1]
            .as_u64()
            .ok_or_else(|| invalid("b", format!("edge {i}: y must be a nonnegative integer")))?;
        let w = triple[2]
            .as_f64()
            .ok_or_else(|| invalid("b", format!("edge {i}: weight must be a number")))?;
        edges.push((x as usize, y as usize, w));
    }
    Ok(edges)
}

fn get_f64(
    field: &str,
    map: &serde_json::Map<String, Value>,
    key: &str,
    default: Option<f64>,
) -> Result<f64, GraphSpecError> {
    match map.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| invalid(field, format!("`{key}` must be a number"))),
        None => default.ok_or_else(|| invalid(field, format!("missing `{key}`"))),
    }
}

fn parse_seq(field: &str, v: Option<&Value>) -> Result<WeightSeq, GraphSpecError> {
    match v {
        Some(Value::Number(x)) => Ok(WeightSeq::Const(
            x.as_f64()
                .ok_or_else(|| invalid(field, "number out of range"))?,
        )),
        Some(Value::Array(_)) => Ok(WeightSeq::values(parse_number_array(field, v)?)),
        Some(Value::Object(map)) => {
            let family = map
                .get("family")
                .and_then(Value::as_str)
                .ok_or_else(|| invalid(field, "family object needs a `family` string"))?;
            match family {
                "const" => Ok(WeightSeq::Const(get_f64(field, map, "value", None)?)),
                "power" => Ok(WeightSeq::Power {
                    coeff: get_f64(field, map, "coeff", Some(1.0))?,
                    exponent: get_f64(field, map, "exponent", None)?,
                }),
                "geometric" => Ok(WeightSeq::Geometric {
                    initial: get_f64(field, map, "initial", Some(1.0))?,
                    ratio: get_f64(field, map, "ratio", None)?,
                }),
                "factorial-like" => Ok(WeightSeq::ratio_recurrence(
                    get_f64(field, map, "initial", Some(1.0))?,
                    get_f64(field, map, "step0", None)?,
                    get_f64(field, map, "step1", Some(0.0))?,
                )),
                other => Err(invalid(
                    field,
                    format!("unknown family `{other}`; expected const, power, geometric, or factorial-like"),
                )),
            }
        }
        _ => Err(invalid(field, "expected a number, array, or family object")),
    }
}

fn parse_potential(v: Option<&Value>) -> Result<Potential, GraphSpecError> {
    match v {
        None | Some(Value::Null) => Ok(Potential::zero()),
        Some(Value::Number(x)) => Ok(Potential::constant(x.as_f64().ok_or_else(|| {
            invalid("potential", "number out of range")
        })?)),
        Some(Value::Array(_)) => Ok(Potential::from_values(parse_number_array(
            "potential",
            v,
        )?)),
        Some(Value::Object(map)) => {
            let family = map
                .get("family")
                .and_then(Value::as_str)
                .ok_or_else(|| invalid("potential", "family object needs a `family` string"))?;
            match family {
                "const" => Ok(Potential::constant(get_f64(
                    "potential",
                    map,
                    "value",
                    None,
                )?)),
                "power" => {
                    let coeff = get_f64("potential", map, "coeff", Some(1.0))?;
                    let exponent = get_f64("potential", map, "exponent", None)?;
                    Ok(Potential::from_fn(move |x| {
                        if exponent == 0.0 {
                            coeff
                        } else {
                            coeff * (x as f64).powf(exponent)
                        }
                    }))
                }
                other => Err(invalid(
                    "potential",
                    format!("unknown family `{other}`; expected const or power"),
                )),
            }
        }
        _ => Err(invalid(
            "potential",
            "expected a number, array, or family object",
        )),
    }
}
