//! The classification tables as data: rows, bindings of their arbitrary
//! functions and constants, and instantiation into operators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diffop::{expand_generators, DiffOp, DiffOpError, GeneratorExpr, Hamiltonian};
use crate::expr::{Expr, Geom, Node};
use crate::lang::{parse_expr, parse_operator, serialize_expr, ParseDiagnostic};
use crate::scalar::Scalar;
use crate::zero::{derive_seed, random_param, rng_for};

mod verify;

pub use verify::{
    verify_catalog_with,
    compatibility_pde, compatibility_residual, perturbation_check, verify_catalog, verify_row, CatalogReport,
    IntegralReport, PairReport, Perturbation, PerturbationOutcome, RowReport, SkipReport, Summary, Verdict,
};

pub const CATALOG_JSON: &str = include_str!("../../data/catalog.json");
pub const CATALOG_SHA256: &str = "eb7e4dccd7863ec4d6f5a54d5280554b381662c11998e1a7204b572047a964d9";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Phi,
    Theta,
}

impl SlotKind {
    fn geom(self) -> Geom {
        match self {
            SlotKind::Phi => Geom::Phi,
            SlotKind::Theta => Geom::Theta,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SlotKind::Phi => "phi",
            SlotKind::Theta => "theta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub table: u8,
    pub item: u8,
    pub f: String,
    #[serde(rename = "V")]
    pub v: String,
    pub integrals: Vec<String>,
    #[serde(default)]
    pub slots: Vec<Slot>,
    #[serde(default)]
    pub params: Vec<String>,
    /// `(p, k)` indices into `integrals`: `k` should be the inversion image of `p`.
    #[serde(default)]
    pub inversion_pairs: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip: Option<String>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CatalogError {
    #[error("catalog JSON: {0}")]
    Json(String),
    #[error("catalog hash mismatch: expected {expected}, found {found}")]
    Hash { expected: String, found: String },
    #[error("row {row}, {field}: {diag}")]
    Parse { row: String, field: String, diag: ParseDiagnostic },
    #[error("row {row}: symbol `{symbol}` is neither a declared slot nor a parameter")]
    Undeclared { row: String, symbol: String },
    #[error("row {row}: inversion pair {pair:?} out of range")]
    Pair { row: String, pair: [usize; 2] },
    #[error("row {row}: slot `{slot}` is not bound")]
    MissingSlot { row: String, slot: String },
    #[error("row {row}: parameter `{param}` is not bound")]
    MissingParam { row: String, param: String },
    #[error("row {row}: slot `{slot}` must depend on {kind} only, got `{expr}`")]
    SlotDependence { row: String, slot: String, kind: &'static str, expr: String },
    #[error("row {row}: {source}")]
    DiffOp { row: String, source: DiffOpError },
    #[error("reading {0}: {1}")]
    Io(String, String),
}

impl CatalogRow {
    pub fn id(&self) -> String {
        format!("T{}.{}", self.table, self.item)
    }

    fn parse(&self, field: &str, src: &str) -> Result<Expr, CatalogError> {
        parse_expr(src).map_err(|diag| CatalogError::Parse {
            row: self.id(),
            field: field.into(),
            diag,
        })
    }

    pub fn f_template(&self) -> Result<Expr, CatalogError> {
        self.parse("f", &self.f)
    }

    pub fn v_template(&self) -> Result<Expr, CatalogError> {
        self.parse("V", &self.v)
    }

    pub fn integral_templates(&self) -> Result<Vec<GeneratorExpr>, CatalogError> {
        self.integrals
            .iter()
            .enumerate()
            .map(|(k, s)| {
                parse_operator(s).map_err(|diag| CatalogError::Parse {
                    row: self.id(),
                    field: format!("integral {k}"),
                    diag,
                })
            })
            .collect()
    }

    /// Every template parses and references only declared symbols.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let declared: BTreeSet<&str> = self.slots.iter().map(|s| s.name.as_str()).chain(self.params.iter().map(String::as_str)).collect();
        let mut used: BTreeSet<String> = self.f_template()?.params();
        used.extend(self.v_template()?.params());
        for g in self.integral_templates()? {
            for e in g.scalars() {
                used.extend(e.params());
            }
        }
        if let Some(symbol) = used.iter().find(|s| !declared.contains(s.as_str())) {
            return Err(CatalogError::Undeclared {
                row: self.id(),
                symbol: symbol.clone(),
            });
        }
        for p in &self.inversion_pairs {
            if p.iter().any(|&k| k >= self.integrals.len()) {
                return Err(CatalogError::Pair { row: self.id(), pair: *p });
            }
        }
        Ok(())
    }

    pub fn is_skipped(&self) -> bool {
        self.skip.is_some()
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse and validate a catalog; with `expected_sha256`, the text must match it.
pub fn parse_catalog(text: &str, expected_sha256: Option<&str>) -> Result<Vec<CatalogRow>, CatalogError> {
    if let Some(expected) = expected_sha256 {
        let found = sha256_hex(text);
        if found != expected {
            return Err(CatalogError::Hash {
                expected: expected.into(),
                found,
            });
        }
    }
    let rows: Vec<CatalogRow> = serde_json::from_str(text).map_err(|e| CatalogError::Json(e.to_string()))?;
    for r in &rows {
        r.validate()?;
    }
    Ok(rows)
}

pub fn load_catalog(path: &Path, expected_sha256: Option<&str>) -> Result<Vec<CatalogRow>, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io(path.display().to_string(), e.to_string()))?;
    parse_catalog(&text, expected_sha256)
}

/// The shipped tables: Table 1 items 1 to 11 and Table 2 items 1 to 17.
pub fn builtin_catalog() -> Vec<CatalogRow> {
    parse_catalog(CATALOG_JSON, Some(CATALOG_SHA256)).expect("shipped catalog is valid")
}

pub fn find_row(rows: &[CatalogRow], table: u8, item: u8) -> Option<&CatalogRow> {
    rows.iter().find(|r| r.table == table && r.item == item)
}

/// Concrete values for a row's slots and parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    pub slots: BTreeMap<String, Expr>,
    pub params: BTreeMap<String, Scalar>,
}

impl Binding {
    pub fn describe(&self) -> BTreeMap<String, String> {
        self.slots
            .iter()
            .map(|(k, v)| (k.clone(), serialize_expr(v)))
            .chain(self.params.iter().map(|(k, v)| (k.clone(), v.to_string())))
            .collect()
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.describe().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

const PHI_CHOICES: [&str; 2] = ["1", "sin(phi)"];
const THETA_CHOICES: [&str; 3] = ["1", "cos(theta)", "cos(theta)^2"];

/// Number of bindings in the default suite.
pub const SUITE_SIZE: usize = 3;

/// Rows whose verification is required for a clean catalog run.
pub const ANCHOR_ROWS: [(u8, u8); 10] = [(1, 1), (1, 2), (1, 5), (1, 7), (2, 1), (2, 8), (2, 14), (2, 15), (2, 16), (2, 17)];

pub fn is_anchor(table: u8, item: u8) -> bool {
    ANCHOR_ROWS.contains(&(table, item))
}

#[derive(Deserialize)]
struct BindingText {
    #[serde(default)]
    slots: BTreeMap<String, String>,
    #[serde(default)]
    params: BTreeMap<String, String>,
}

/// Parses a bindings file: an object from row id (`"T2.8"`) to a list of
/// `{"slots": {name: expr}, "params": {name: rational}}`.
pub fn parse_bindings(text: &str) -> Result<BTreeMap<String, Vec<Binding>>, CatalogError> {
    let raw: BTreeMap<String, Vec<BindingText>> = serde_json::from_str(text).map_err(|e| CatalogError::Json(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (id, list) in raw {
        let mut v = Vec::new();
        for b in list {
            let mut binding = Binding::default();
            for (k, src) in b.slots {
                let e = parse_expr(&src).map_err(|diag| CatalogError::Parse { row: id.clone(), field: k.clone(), diag })?;
                binding.slots.insert(k, e);
            }
            for (k, src) in b.params {
                let e = parse_expr(&src).map_err(|diag| CatalogError::Parse { row: id.clone(), field: k.clone(), diag })?;
                let c = e.as_const().cloned().ok_or_else(|| CatalogError::MissingParam { row: id.clone(), param: k.clone() })?;
                binding.params.insert(k, c);
            }
            v.push(binding);
        }
        out.insert(id, v);
    }
    Ok(out)
}

/// The default suite: binding `k` gives slot `j` the `(k + j)`-th choice for
/// its kind and draws every parameter from a seed derived from the row id.
pub fn binding_suite(row: &CatalogRow, seed: u64) -> Vec<Binding> {
    (0..SUITE_SIZE)
        .map(|k| {
            let slots = row
                .slots
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let choices: &[&str] = match s.kind {
                        SlotKind::Phi => &PHI_CHOICES,
                        SlotKind::Theta => &THETA_CHOICES,
                    };
                    (s.name.clone(), parse_expr(choices[(k + j) % choices.len()]).expect("valid choice"))
                })
                .collect();
            let params = row
                .params
                .iter()
                .map(|p| {
                    let mut rng = rng_for(derive_seed(seed, &format!("{}/{k}/{p}", row.id())));
                    (p.clone(), random_param(&mut rng))
                })
                .collect();
            Binding { slots, params }
        })
        .collect()
}

/// An instantiated row.
#[derive(Clone, Debug)]
pub struct Instance {
    pub hamiltonian: Hamiltonian,
    pub integrals: Vec<GeneratorExpr>,
    pub operators: Vec<DiffOp>,
}

fn depends_only_on(e: &Expr, g: Geom) -> bool {
    !e.any(&|s| match s.node() {
        Node::Coord(_) | Node::Param(_) => true,
        Node::Geom(h) => *h != g,
        _ => false,
    })
}

fn substitution(row: &CatalogRow, binding: &Binding) -> Result<BTreeMap<String, Expr>, CatalogError> {
    let mut map = BTreeMap::new();
    for s in &row.slots {
        let e = binding.slots.get(&s.name).ok_or_else(|| CatalogError::MissingSlot {
            row: row.id(),
            slot: s.name.clone(),
        })?;
        if !depends_only_on(e, s.kind.geom()) {
            return Err(CatalogError::SlotDependence {
                row: row.id(),
                slot: s.name.clone(),
                kind: s.kind.name(),
                expr: serialize_expr(e),
            });
        }
        map.insert(s.name.clone(), e.clone());
    }
    for p in &row.params {
        let v = binding.params.get(p).ok_or_else(|| CatalogError::MissingParam {
            row: row.id(),
            param: p.clone(),
        })?;
        map.insert(p.clone(), Expr::constant(v.clone()));
    }
    Ok(map)
}

pub fn instantiate(row: &CatalogRow, binding: &Binding) -> Result<Instance, CatalogError> {
    let map = substitution(row, binding)?;
    let sub = |e: &Expr| crate::normal::simplify(&e.subst_params(&map));
    let f = sub(&row.f_template()?);
    let v = sub(&row.v_template()?);
    let integrals: Vec<GeneratorExpr> = row.integral_templates()?.iter().map(|g| g.map_scalars(&sub)).collect();
    let operators = integrals
        .iter()
        .map(|g| expand_generators(g).map(|d| d.simplified()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| CatalogError::DiffOp { row: row.id(), source })?;
    Ok(Instance {
        hamiltonian: Hamiltonian::new(f, v),
        integrals,
        operators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_catalog_loads() {
        let rows = builtin_catalog();
        assert_eq!(rows.iter().filter(|r| r.table == 1).count(), 11);
        assert_eq!(rows.iter().filter(|r| r.table == 2).count(), 17);
        assert_eq!(rows.iter().filter(|r| r.is_skipped()).map(CatalogRow::id).collect::<Vec<_>>(), ["T1.11"]);
    }

    #[test]
    fn tampered_text_is_rejected() {
        let text = CATALOG_JSON.replacen("c*r^2/x3^2", "2*c*r^2/x3^2", 1);
        assert!(matches!(parse_catalog(&text, Some(CATALOG_SHA256)), Err(CatalogError::Hash { .. })));
        assert!(parse_catalog(&text, None).is_ok());
    }

    #[test]
    fn undeclared_symbol_rejected() {
        let mut row = builtin_catalog()[0].clone();
        row.v = "F*G + q".into();
        assert!(matches!(row.validate(), Err(CatalogError::Undeclared { symbol, .. }) if symbol == "q"));
    }

    #[test]
    fn table_one_item_five() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 1, 5).unwrap();
        assert_eq!(row.f_template().unwrap(), parse_expr("rt^2*F").unwrap());
        assert_eq!(row.v_template().unwrap(), parse_expr("rt^2/x3^2*F").unwrap());
        assert_eq!(row.integrals, ["P3^2 + 1/x3^2", "K3^2 + r^4/x3^2", "{P3,K3} + 4*rt^2/x3^2"]);
        let row = find_row(&rows, 2, 17).unwrap();
        assert_eq!(row.integrals, ["L1", "L2", "L3", "D"]);
    }

    #[test]
    fn instantiate_checks_slot_kind() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 1, 1).unwrap();
        let mut b = Binding::default();
        b.slots.insert("F".into(), parse_expr("1").unwrap());
        b.slots.insert("G".into(), parse_expr("cos(theta)^2").unwrap());
        let inst = instantiate(row, &b).unwrap();
        assert_eq!(inst.hamiltonian.f, parse_expr("rt^2").unwrap());
        assert_eq!(inst.integrals[0].scalar_part(), crate::normal::simplify(&parse_expr("4*cos(theta)^2").unwrap()));
        b.slots.insert("F".into(), parse_expr("x3").unwrap());
        assert!(matches!(instantiate(row, &b), Err(CatalogError::SlotDependence { .. })));
        b.slots.remove("G");
        b.slots.insert("F".into(), parse_expr("1").unwrap());
        assert!(matches!(instantiate(row, &b), Err(CatalogError::MissingSlot { .. })));
    }

    #[test]
    fn bindings_file_parses() {
        let b = parse_bindings(r#"{"T1.2": [{"slots": {"F": "1", "G": "0"}, "params": {"c": "1/3"}}]}"#).unwrap();
        assert_eq!(b["T1.2"][0].params["c"], Scalar::ratio(1, 3));
        assert!(parse_bindings(r#"{"T1.2": [{"params": {"c": "x1"}}]}"#).is_err());
    }

    #[test]
    fn suite_is_deterministic() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 2, 8).unwrap();
        let a = binding_suite(row, 7);
        assert_eq!(a, binding_suite(row, 7));
        assert_eq!(a.len(), SUITE_SIZE);
        assert_ne!(a[0].params["c"], a[1].params["c"]);
        let inst = instantiate(row, &a[0]).unwrap();
        assert_eq!(inst.operators.len(), 5);
    }
}
