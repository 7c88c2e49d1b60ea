//! Side-by-side comparison of two bound reports.

use serde::{Deserialize, Serialize};

use super::BoundReport;

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
    Equal,
}

impl Side {
    fn mirrored(self) -> Self {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
            Side::Equal => Side::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub category: String,
    pub a: f64,
    pub b: f64,
    /// `a / b`; infinite when only `b` is zero, 1 when both are.
    pub ratio: f64,
    /// The side with the smaller value.
    pub smaller: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub categories: Vec<CategoryComparison>,
    /// Category that decided the verdict.
    pub decided_by: String,
    pub smoother: Side,
    pub verdict: String,
}

fn smaller(a: f64, b: f64) -> Side {
    if (a - b).abs() <= REL_TOL * a.abs().max(b.abs()) {
        Side::Equal
    } else if a < b {
        Side::A
    } else {
        Side::B
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

fn category(name: &str, a: f64, b: f64) -> CategoryComparison {
    CategoryComparison {
        category: name.to_string(),
        a,
        b,
        ratio: ratio(a, b),
        smaller: smaller(a, b),
    }
}

/// Compares layer bounds and orders, and block bounds and orders when both
/// reports carry a composite block. The verdict follows the block order when
/// available, otherwise the layer order; the smaller Lipschitz order is the
/// smoother architecture.
pub fn compare_architectures(a: &BoundReport, b: &BoundReport) -> Comparison {
    let mut categories = vec![
        category("layer_bound", a.layer_bound(), b.layer_bound()),
        category("layer_order", a.layer_order(), b.layer_order()),
    ];
    let mut decided_by = "layer_order";
    if let (Some(ca), Some(cb)) = (&a.composite, &b.composite) {
        categories.push(category("block_bound", ca.bound, cb.bound));
        categories.push(category("block_order", ca.order, cb.order));
        decided_by = "block_order";
    }
    let smoother = categories
        .iter()
        .find(|c| c.category == decided_by)
        .map_or(Side::Equal, |c| c.smaller);
    let verdict = match smoother {
        Side::Equal => "equal".to_string(),
        side => {
            let (win, lose) = if side == Side::A { (a, b) } else { (b, a) };
            if win.kind != lose.kind {
                format!("{} smoother", win.kind.label())
            } else {
                format!("{} smoother", win.name)
            }
        }
    };
    Comparison {
        a: a.name.clone(),
        b: b.name.clone(),
        categories,
        decided_by: decided_by.to_string(),
        smoother,
        verdict,
    }
}

impl Comparison {
    /// The comparison with the two sides swapped.
    pub fn mirrored(&self) -> Comparison {
        Comparison {
            a: self.b.clone(),
            b: self.a.clone(),
            categories: self
                .categories
                .iter()
                .map(|c| CategoryComparison {
                    category: c.category.clone(),
                    a: c.b,
                    b: c.a,
                    ratio: ratio(c.b, c.a),
                    smaller: c.smaller.mirrored(),
                })
                .collect(),
            decided_by: self.decided_by.clone(),
            smoother: self.smoother.mirrored(),
            verdict: self.verdict.clone(),
        }
    }
}
