//! Model files.
//!
//! The canonical format is a versioned JSON document:
//!
//! ```json
//! {"version": 1, "num_attributes": 2, "base_score": 0.0,
//!  "trees": [{"split": {"attr": 0, "tau": 2.0}, "left": {"leaf": 1.0}, "right": {"leaf": 3.0}}]}
//! ```
//!
//! A multiclass file wraps one such document per class as `{"classes": [...]}`.
//! The importer reads the JSON tree dump written by common gradient-boosting
//! libraries (`nodeid`, `split`, `split_condition`, `yes`, `no`, `missing`,
//! `children`, `leaf`); values below `split_condition` take the `yes` branch.

use serde_json::{json, Map, Value};

use crate::ensemble::{Ensemble, Tree, TreeNode};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: i64 = 1;

fn parse_json(bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|e| Error::parse("$", e.to_string()))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::parse(path, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(path, format!("missing field \"{key}\"")))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::parse(path, "expected a finite number"))
}

fn index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::parse(path, "expected a non-negative integer"))
}

fn only_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str, what: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::parse(path, format!("unexpected key \"{k}\" in {what}"))),
        None => Ok(()),
    }
}

fn canonical_node(v: &Value, path: &str, num_attributes: usize) -> Result<TreeNode> {
    let obj = object(v, path)?;
    if let Some(leaf) = obj.get("leaf") {
        only_keys(obj, &["leaf"], path, "leaf node")?;
        return Ok(TreeNode::leaf(number(leaf, &format!("{path}.leaf"))?));
    }
    only_keys(obj, &["split", "left", "right"], path, "split node")?;
    let split_path = format!("{path}.split");
    let split = object(field(obj, "split", path)?, &split_path)?;
    only_keys(split, &["attr", "tau"], &split_path, "split")?;
    let attr_path = format!("{split_path}.attr");
    let attr = index(field(split, "attr", &split_path)?, &attr_path)?;
    if attr >= num_attributes {
        return Err(Error::parse(
            attr_path,
            format!("attribute {attr} out of range for {num_attributes} attributes"),
        ));
    }
    let tau = number(field(split, "tau", &split_path)?, &format!("{split_path}.tau"))?;
    let left = canonical_node(field(obj, "left", path)?, &format!("{path}.left"), num_attributes)?;
    let right = canonical_node(field(obj, "right", path)?, &format!("{path}.right"), num_attributes)?;
    Ok(TreeNode::split(attr, tau, left, right))
}

fn canonical_doc(v: &Value, path: &str) -> Result<Ensemble> {
    let obj = object(v, path)?;
    only_keys(obj, &["version", "num_attributes", "base_score", "trees"], path, "model")?;
    let version = field(obj, "version", path)?
        .as_i64()
        .ok_or_else(|| Error::parse(format!("{path}.version"), "expected an integer"))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = index(field(obj, "num_attributes", path)?, &format!("{path}.num_attributes"))?;
    let base = match obj.get("base_score") {
        Some(b) => number(b, &format!("{path}.base_score"))?,
        None => 0.0,
    };
    let trees_path = format!("{path}.trees");
    let trees = field(obj, "trees", path)?
        .as_array()
        .ok_or_else(|| Error::parse(&trees_path, "expected an array"))?;
    if trees.is_empty() {
        return Err(Error::parse(trees_path, "a model needs at least one tree"));
    }
    let trees = trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = format!("{trees_path}[{i}]");
            let root = canonical_node(t, &p, n)?;
            Tree::new(&root).map_err(|e| Error::parse(p, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::with_base_score(trees, n, base)
}

/// Parses a canonical model document.
pub fn parse_model(bytes: &[u8]) -> Result<Ensemble> {
    canonical_doc(&parse_json(bytes)?, "$")
}

fn node_json(n: &TreeNode) -> Value {
    match n {
        TreeNode::Leaf(v) => json!({ "leaf": v }),
        TreeNode::Split {
            attr,
            threshold,
            left,
            right,
        } => json!({
            "split": { "attr": attr, "tau": threshold },
            "left": node_json(left),
            "right": node_json(right),
        }),
    }
}

fn model_json(ens: &Ensemble) -> Value {
    json!({
        "version": FORMAT_VERSION,
        "num_attributes": ens.num_attributes(),
        "base_score": ens.base_score(),
        "trees": ens.trees().iter().map(|t| node_json(&t.to_node())).collect::<Vec<_>>(),
    })
}

/// Canonical JSON; floats use shortest round-trip formatting.
pub fn serialize_model(ens: &Ensemble) -> Vec<u8> {
    serde_json::to_vec_pretty(&model_json(ens)).expect("model JSON is always serializable")
}

/// Parses `{"classes": [model, ...]}`; all classes must share the attribute count.
pub fn parse_multiclass(bytes: &[u8]) -> Result<Vec<Ensemble>> {
    let v = parse_json(bytes)?;
    let obj = object(&v, "$")?;
    only_keys(obj, &["classes"], "$", "multiclass model")?;
    let classes = field(obj, "classes", "$")?
        .as_array()
        .ok_or_else(|| Error::parse("$.classes", "expected an array"))?;
    if classes.is_empty() {
        return Err(Error::parse("$.classes", "expected at least one class"));
    }
    let models = classes
        .iter()
        .enumerate()
        .map(|(i, c)| canonical_doc(c, &format!("$.classes[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let n = models[0].num_attributes();
    if let Some(m) = models.iter().find(|m| m.num_attributes() != n) {
        return Err(Error::AttributeMismatch(n, m.num_attributes()));
    }
    Ok(models)
}

pub fn serialize_multiclass(models: &[Ensemble]) -> Vec<u8> {
    let classes: Vec<Value> = models.iter().map(model_json).collect();
    serde_json::to_vec_pretty(&json!({ "classes": classes })).expect("model JSON is always serializable")
}

fn node_id(obj: &Map<String, Value>) -> i64 {
    obj.get("nodeid").and_then(Value::as_i64).unwrap_or(-1)
}

fn unsupported(reason: &str, nodes: Vec<i64>) -> Error {
    Error::UnsupportedFeature {
        reason: reason.into(),
        nodes,
    }
}

fn feature_index(v: &Value, path: &str) -> Result<usize> {
    if let Some(i) = v.as_u64() {
        return Ok(i as usize);
    }
    v.as_str()
        .and_then(|s| s.strip_prefix('f').unwrap_or(s).parse().ok())
        .ok_or_else(|| Error::parse(path, "feature must be an index or a name of the form f<index>"))
}

struct DumpNode {
    attr: Option<usize>,
    node: TreeNode,
}

fn dump_node(v: &Value, path: &str) -> Result<DumpNode> {
    let obj = object(v, path)?;
    let id = node_id(obj);
    if let Some(leaf) = obj.get("leaf") {
        return Ok(DumpNode {
            attr: None,
            node: TreeNode::leaf(number(leaf, &format!("{path}.leaf"))?),
        });
    }
    if obj.contains_key("categories")
        || obj
            .get("split_type")
            .and_then(Value::as_str)
            .is_some_and(|t| t != "numerical")
    {
        return Err(unsupported("categorical split", vec![id]));
    }
    let (Some(split), Some(cond)) = (obj.get("split"), obj.get("split_condition")) else {
        return Err(unsupported("unknown node kind", vec![id]));
    };
    let attr = feature_index(split, &format!("{path}.split"))?;
    let tau = number(cond, &format!("{path}.split_condition"))?;
    let yes = field(obj, "yes", path)?
        .as_i64()
        .ok_or_else(|| Error::parse(format!("{path}.yes"), "expected a node id"))?;
    let no = field(obj, "no", path)?
        .as_i64()
        .ok_or_else(|| Error::parse(format!("{path}.no"), "expected a node id"))?;
    if let Some(missing) = obj.get("missing").and_then(Value::as_i64) {
        if missing != yes {
            return Err(unsupported("missing values routed away from the yes branch", vec![id]));
        }
    }
    let children = field(obj, "children", path)?
        .as_array()
        .ok_or_else(|| Error::parse(format!("{path}.children"), "expected an array"))?;
    let find = |target: i64| -> Result<TreeNode> {
        let (i, c) = children
            .iter()
            .enumerate()
            .find(|(_, c)| c.as_object().map(node_id) == Some(target))
            .ok_or_else(|| unsupported("branch refers to an unknown node", vec![id, target]))?;
        Ok(dump_node(c, &format!("{path}.children[{i}]"))?.node)
    };
    let (left, right) = (find(yes)?, find(no)?);
    Ok(DumpNode {
        attr: Some(attr),
        node: TreeNode::split(attr, tau, left, right),
    })
}

fn max_attr(n: &TreeNode) -> Option<usize> {
    match n {
        TreeNode::Leaf(_) => None,
        TreeNode::Split { attr, left, right, .. } => {
            [Some(*attr), max_attr(left), max_attr(right)].into_iter().flatten().max()
        }
    }
}

/// Imports a gradient-boosting JSON tree dump: either a bare array of trees
/// or `{"trees": [...], "base_score": b, "num_attributes": n}`. Without an
/// explicit attribute count the largest referenced feature index decides.
/// Scores stay on the margin scale; no link function is applied.
pub fn import_gbdt_dump(bytes: &[u8]) -> Result<Ensemble> {
    let v = parse_json(bytes)?;
    let (trees, base, declared, trees_path) = match &v {
        Value::Array(a) => (a, 0.0, None, "$".to_string()),
        Value::Object(obj) => {
            let trees = field(obj, "trees", "$")?
                .as_array()
                .ok_or_else(|| Error::parse("$.trees", "expected an array"))?;
            let base = match obj.get("base_score") {
                Some(b) => number(b, "$.base_score")?,
                None => 0.0,
            };
            let n = match obj.get("num_attributes") {
                Some(n) => Some(index(n, "$.num_attributes")?),
                None => None,
            };
            (trees, base, n, "$.trees".to_string())
        }
        _ => return Err(Error::parse("$", "expected an array of trees or an object")),
    };
    if trees.is_empty() {
        return Err(Error::parse(trees_path, "a model needs at least one tree"));
    }
    let roots = trees
        .iter()
        .enumerate()
        .map(|(i, t)| dump_node(t, &format!("{trees_path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let used = roots
        .iter()
        .filter_map(|r| r.attr.max(max_attr(&r.node)))
        .max()
        .map_or(0, |a| a + 1);
    let n = declared.unwrap_or(used.max(1));
    let trees = roots
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Tree::new(&r.node).map_err(|e| Error::parse(format!("{trees_path}[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::with_base_score(trees, n, base)
}

/// Parses any supported model file into one ensemble per class: a canonical
/// document, a multiclass wrapper, or a tree dump.
pub fn parse_any(bytes: &[u8]) -> Result<Vec<Ensemble>> {
    match parse_json(bytes)? {
        Value::Object(obj) if obj.contains_key("classes") => parse_multiclass(bytes),
        Value::Object(obj) if obj.contains_key("version") => Ok(vec![parse_model(bytes)?]),
        _ => Ok(vec![import_gbdt_dump(bytes)?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1() -> Ensemble {
        let stump = |tau, l, r| {
            Tree::new(&TreeNode::split(0, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
        };
        Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap()
    }

    #[test]
    fn round_trip() {
        let e = f1();
        let back = parse_model(&serialize_model(&e)).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn tau_on_leaf_names_path() {
        let doc = br#"{"version":1,"num_attributes":1,"trees":[
            {"split":{"attr":0,"tau":1.0},"left":{"leaf":1.0},"right":{"leaf":2.0,"tau":3.0}}]}"#;
        match parse_model(doc) {
            Err(Error::Parse { path, message }) => {
                assert_eq!(path, "$.trees[0].right");
                assert!(message.contains("tau"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_and_range_checks() {
        let doc = br#"{"version":2,"num_attributes":1,"trees":[{"leaf":1.0}]}"#;
        assert_eq!(parse_model(doc), Err(Error::UnsupportedVersion(2)));
        let doc = br#"{"version":1,"num_attributes":1,"trees":[
            {"split":{"attr":1,"tau":1.0},"left":{"leaf":1.0},"right":{"leaf":2.0}}]}"#;
        assert!(matches!(parse_model(doc), Err(Error::Parse { path, .. }) if path == "$.trees[0].split.attr"));
    }

    #[test]
    fn multiclass_round_trip() {
        let ms = vec![f1(), f1().negate()];
        assert_eq!(parse_multiclass(&serialize_multiclass(&ms)).unwrap(), ms);
        assert_eq!(parse_any(&serialize_multiclass(&ms)).unwrap().len(), 2);
    }

    #[test]
    fn imports_single_split_dump() {
        let dump = br#"[{"nodeid":0,"depth":0,"split":"f0","split_condition":2.5,"yes":1,"no":2,"missing":1,
            "children":[{"nodeid":2,"leaf":-0.25},{"nodeid":1,"leaf":0.5}]}]"#;
        let e = import_gbdt_dump(dump).unwrap();
        assert_eq!(e.num_trees(), 1);
        assert_eq!(e.num_attributes(), 1);
        assert_eq!(e.eval(&[2.0]).unwrap(), 0.5);
        assert_eq!(e.eval(&[2.5]).unwrap(), -0.25);
    }

    #[test]
    fn rejects_unsupported_dumps() {
        let cat = br#"[{"nodeid":0,"split":"f0","split_type":"categorical","categories":[1],"yes":1,"no":2,
            "children":[{"nodeid":1,"leaf":0.0},{"nodeid":2,"leaf":1.0}]}]"#;
        assert!(matches!(import_gbdt_dump(cat), Err(Error::UnsupportedFeature { nodes, .. }) if nodes == vec![0]));
        let missing = br#"[{"nodeid":0,"split":"f0","split_condition":1.0,"yes":1,"no":2,"missing":2,
            "children":[{"nodeid":1,"leaf":0.0},{"nodeid":2,"leaf":1.0}]}]"#;
        assert!(matches!(import_gbdt_dump(missing), Err(Error::UnsupportedFeature { .. })));
        let dangling = br#"[{"nodeid":0,"split":"f0","split_condition":1.0,"yes":1,"no":7,
            "children":[{"nodeid":1,"leaf":0.0},{"nodeid":2,"leaf":1.0}]}]"#;
        assert!(matches!(import_gbdt_dump(dangling), Err(Error::UnsupportedFeature { nodes, .. }) if nodes == vec![0, 7]));
        let odd = br#"[{"nodeid":0,"weird":true}]"#;
        assert!(matches!(import_gbdt_dump(odd), Err(Error::UnsupportedFeature { .. })));
    }

    #[test]
    fn dump_wrapper_with_base_score() {
        let dump = br#"{"base_score":0.5,"num_attributes":3,"trees":[{"nodeid":0,"leaf":1.0}]}"#;
        let e = import_gbdt_dump(dump).unwrap();
        assert_eq!(e.num_attributes(), 3);
        assert_eq!(e.eval(&[0.0, 0.0, 0.0]).unwrap(), 1.5);
    }
}
