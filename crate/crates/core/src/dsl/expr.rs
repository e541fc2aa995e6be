//! Expression trees shared by generators `g(t, y, z)` and scalar functions `h(y)`.

use std::fmt;

/// A node of the expression language.
///
/// Scalar functions use only [`Expr::Y`] as their argument; the parser maps
/// both `x` and `y` onto it so payoffs can be written in the state variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    Y,
    /// Zero-based component of `z`; printed as `z{k + 1}`.
    Z(usize),
    NormZ,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
}

/// Variables an expression mentions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarUsage {
    pub t: bool,
    pub y: bool,
    /// Indices of `z` components used (zero-based, sorted, deduplicated).
    pub z: Vec<usize>,
    pub norm_z: bool,
}

impl VarUsage {
    pub fn uses_z(&self) -> bool {
        self.norm_z || !self.z.is_empty()
    }

    /// True when component `k` of `z` influences the value.
    pub fn uses_z_component(&self, k: usize) -> bool {
        self.norm_z || self.z.contains(&k)
    }
}

impl Expr {
    /// Builds a literal; negative values become `Neg(Num(|v|))` so the tree
    /// stays inside the image of the parser.
    pub fn constant(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::T => t,
            Expr::Y => y,
            Expr::Z(k) => z[*k],
            Expr::NormZ => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Expr::Neg(a) => -a.eval(t, y, z),
            Expr::Add(a, b) => a.eval(t, y, z) + b.eval(t, y, z),
            Expr::Sub(a, b) => a.eval(t, y, z) - b.eval(t, y, z),
            Expr::Mul(a, b) => a.eval(t, y, z) * b.eval(t, y, z),
            Expr::Div(a, b) => a.eval(t, y, z) / b.eval(t, y, z),
            Expr::Abs(a) => a.eval(t, y, z).abs(),
            Expr::Max(a, b) => a.eval(t, y, z).max(b.eval(t, y, z)),
            Expr::Min(a, b) => a.eval(t, y, z).min(b.eval(t, y, z)),
        }
    }

    /// Evaluates a scalar-function tree at `y`.
    pub fn eval_scalar(&self, y: f64) -> f64 {
        self.eval(0.0, y, &[])
    }

    pub fn usage(&self) -> VarUsage {
        let mut usage = VarUsage::default();
        self.collect_usage(&mut usage);
        usage.z.sort_unstable();
        usage.z.dedup();
        usage
    }

    fn collect_usage(&self, usage: &mut VarUsage) {
        match self {
            Expr::Num(_) => {}
            Expr::T => usage.t = true,
            Expr::Y => usage.y = true,
            Expr::Z(k) => usage.z.push(*k),
            Expr::NormZ => usage.norm_z = true,
            Expr::Neg(a) | Expr::Abs(a) => a.collect_usage(usage),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Max(a, b)
            | Expr::Min(a, b) => {
                a.collect_usage(usage);
                b.collect_usage(usage);
            }
        }
    }

    /// Whether the tree is built from smooth operations only (no `abs`,
    /// `max`, `min`, `norm(z)`).
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::T | Expr::Y | Expr::Z(_) => true,
            Expr::NormZ | Expr::Abs(_) | Expr::Max(..) | Expr::Min(..) => false,
            Expr::Neg(a) => a.is_smooth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_smooth() && b.is_smooth()
            }
        }
    }

    /// Denominator subtrees of every division node, outermost first.
    pub fn denominators(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Num(_) | Expr::T | Expr::Y | Expr::Z(_) | Expr::NormZ => {}
            Expr::Neg(a) | Expr::Abs(a) => a.collect_denominators(out),
            Expr::Div(a, b) => {
                out.push(b);
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Max(a, b) | Expr::Min(a, b) => {
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::T | Expr::Y | Expr::Z(_) | Expr::NormZ => 1,
            Expr::Neg(a) | Expr::Abs(a) => 1 + a.depth(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Max(a, b)
            | Expr::Min(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Replaces every occurrence of `y` by `inner`.
    pub fn substitute_y(&self, inner: &Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute_y(inner));
        match self {
            Expr::Y => inner.clone(),
            Expr::Num(_) | Expr::T | Expr::Z(_) | Expr::NormZ => self.clone(),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Abs(a) => Expr::Abs(sub(a)),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Max(a, b) => Expr::Max(sub(a), sub(b)),
            Expr::Min(a, b) => Expr::Min(sub(a), sub(b)),
        }
    }

    /// Symbolic derivative with respect to `y`.
    ///
    /// Returns `None` for non-smooth nodes (`abs`, `max`, `min`, `norm(z)`).
    /// `t` and `z` are treated as constants.
    pub fn derivative_y(&self) -> Option<Expr> {
        Some(match self {
            Expr::Num(_) | Expr::T | Expr::Z(_) => Expr::Num(0.0),
            Expr::Y => Expr::Num(1.0),
            Expr::NormZ | Expr::Abs(_) | Expr::Max(..) | Expr::Min(..) => return None,
            Expr::Neg(a) => neg(a.derivative_y()?),
            Expr::Add(a, b) => add(a.derivative_y()?, b.derivative_y()?),
            Expr::Sub(a, b) => sub(a.derivative_y()?, b.derivative_y()?),
            Expr::Mul(a, b) => add(
                mul(a.derivative_y()?, (**b).clone()),
                mul((**a).clone(), b.derivative_y()?),
            ),
            Expr::Div(a, b) => {
                let numer = sub(
                    mul(a.derivative_y()?, (**b).clone()),
                    mul((**a).clone(), b.derivative_y()?),
                );
                div(numer, mul((**b).clone(), (**b).clone()))
            }
        })
    }
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Neg(inner) => match **inner {
            Expr::Num(v) => Some(-v),
            _ => None,
        },
        _ => None,
    }
}

// Constructors with light constant folding; keeps derivative trees small.
fn neg(a: Expr) -> Expr {
    match as_num(&a) {
        Some(v) => Expr::constant(-v),
        None => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => Expr::constant(x + y),
        (Some(x), None) if x == 0.0 => b,
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => Expr::constant(x - y),
        (Some(x), None) if x == 0.0 => neg(b),
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => Expr::constant(x * y),
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 0.0 => Expr::Num(0.0),
        (Some(x), None) if x == 1.0 => b,
        (None, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (None, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

/// Fully parenthesised printing; the output re-parses to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::T => f.write_str("t"),
            Expr::Y => f.write_str("y"),
            Expr::Z(k) => write!(f, "z{}", k + 1),
            Expr::NormZ => f.write_str("norm(z)"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_square_is_exact() {
        let sq = Expr::Mul(Box::new(Expr::Y), Box::new(Expr::Y));
        let d1 = sq.derivative_y().unwrap();
        let d2 = d1.derivative_y().unwrap();
        assert_eq!(d1.eval_scalar(3.0), 6.0);
        assert_eq!(d2.eval_scalar(-7.5), 2.0);
    }

    #[test]
    fn quotient_rule() {
        // y / (1 + y*y)
        let e = Expr::Div(
            Box::new(Expr::Y),
            Box::new(Expr::Add(
                Box::new(Expr::Num(1.0)),
                Box::new(Expr::Mul(Box::new(Expr::Y), Box::new(Expr::Y))),
            )),
        );
        let d = e.derivative_y().unwrap();
        let y: f64 = 0.7;
        let expected = (1.0 - y * y) / (1.0 + y * y).powi(2);
        assert!((d.eval_scalar(y) - expected).abs() < 1e-15);
    }

    #[test]
    fn nonsmooth_nodes_have_no_derivative() {
        assert!(Expr::Abs(Box::new(Expr::Y)).derivative_y().is_none());
        assert!(!Expr::Max(Box::new(Expr::Y), Box::new(Expr::Num(0.0))).is_smooth());
    }

    #[test]
    fn substitution_composes() {
        let sq = Expr::Mul(Box::new(Expr::Y), Box::new(Expr::Y));
        let inner = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Num(2.0)), Box::new(Expr::Y))),
            Box::new(Expr::Num(3.0)),
        );
        assert_eq!(sq.substitute_y(&inner).eval_scalar(1.0), 25.0);
    }

    #[test]
    fn negative_constants_print_as_negation() {
        assert_eq!(Expr::constant(-2.5).to_string(), "-2.5");
        assert_eq!(Expr::constant(-2.5), Expr::Neg(Box::new(Expr::Num(2.5))));
    }
}
