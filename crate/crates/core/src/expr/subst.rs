use std::collections::{BTreeMap, HashMap};

use super::{Expr, Geom, Node};
use crate::scalar::Scalar;

impl Expr {
    /// Rebuild the tree, replacing every leaf for which `f` returns a value.
    pub fn map_leaves(&self, f: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        let mut memo = HashMap::new();
        map_memo(self, f, &mut memo)
    }

    /// Replace parameters by expressions.
    pub fn subst_params(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        self.map_leaves(&|n| match n {
            Node::Param(p) => map.get(&**p).cloned(),
            _ => None,
        })
    }

    /// Replace parameters by exact constants.
    pub fn bind(&self, values: &BTreeMap<String, Scalar>) -> Expr {
        let map: BTreeMap<String, Expr> = values
            .iter()
            .map(|(k, v)| (k.clone(), Expr::constant(v.clone())))
            .collect();
        self.subst_params(&map)
    }

    /// Replace coordinates by expressions; `r` and `rt` must be supplied consistently.
    pub fn subst_coords(&self, x: &[Expr; 3], r: &Expr, rt: &Expr, phi: &Expr, theta: &Expr) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Coord(a) => Some(x[*a as usize - 1].clone()),
            Node::Geom(Geom::R) => Some(r.clone()),
            Node::Geom(Geom::Rt) => Some(rt.clone()),
            Node::Geom(Geom::Phi) => Some(phi.clone()),
            Node::Geom(Geom::Theta) => Some(theta.clone()),
            _ => None,
        })
    }

    /// Pull back along the inversion `x -> x / r^2`: `r -> 1/r`, `rt -> rt/r^2`,
    /// angles unchanged.
    pub fn invert(&self) -> Expr {
        let r2inv = Expr::pow(&Expr::r(), -2);
        let x = [1, 2, 3].map(|a| &Expr::coord(a) * &r2inv);
        self.subst_coords(&x, &Expr::r().recip(), &(&Expr::rt() * &r2inv), &Expr::phi(), &Expr::theta())
    }

    /// Pull back along the dilation `x -> lambda x`.
    pub fn dilate(&self, lambda: &Scalar) -> Expr {
        let x = [1, 2, 3].map(|a| Expr::coord(a).scale(lambda));
        self.subst_coords(&x, &Expr::r().scale(lambda), &Expr::rt().scale(lambda), &Expr::phi(), &Expr::theta())
    }
}

fn map_memo(e: &Expr, f: &dyn Fn(&Node) -> Option<Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(v) = memo.get(&e.id()) {
        return v.clone();
    }
    let out = match e.node() {
        Node::Sum(v) => Expr::sum(v.iter().map(|t| map_memo(t, f, memo))),
        Node::Product(v) => Expr::product(v.iter().map(|t| map_memo(t, f, memo))),
        Node::Pow(b, n) => Expr::pow(&map_memo(b, f, memo), *n),
        Node::Apply(func, a) => Expr::apply(*func, map_memo(a, f, memo)),
        leaf => f(leaf).unwrap_or_else(|| e.clone()),
    };
    memo.insert(e.id(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_of_r_squared() {
        // r^2 = x.x pulls back to 1/r^2 once normalised
        let e = Expr::r_squared().invert();
        let p = crate::expr::Point::from_ratios([(1, 1), (2, 1), (2, 1)], 40).unwrap();
        let v = e.eval(&p, &BTreeMap::new()).unwrap();
        assert!((v.re.to_f64() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn params_are_replaced() {
        let e = &Expr::param("c") * &Expr::coord(1);
        let mut m = BTreeMap::new();
        m.insert("c".to_string(), Scalar::from(3));
        assert_eq!(e.bind(&m), &Expr::int(3) * &Expr::coord(1));
    }
}
