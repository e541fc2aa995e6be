use super::{tau_kink, ConvexityError};
use crate::dsl::GeneratorSpec;
use crate::function::{Jet, ScalarFunction};

/// `1/2 h'' |z|^2 + g(t, h, h' z) - h' g(t, y, z)` from a jet of `h` at `y`.
pub fn l_g_from_jet(gen: &GeneratorSpec, jet: Jet, t: f64, y: f64, z: &[f64]) -> f64 {
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let mut scaled = [0.0; 8];
    let hz: Vec<f64>;
    let hz_ref: &[f64] = if z.len() <= scaled.len() {
        for (s, v) in scaled.iter_mut().zip(z) {
            *s = jet.d1 * v;
        }
        &scaled[..z.len()]
    } else {
        hz = z.iter().map(|v| jet.d1 * v).collect();
        &hz
    };
    0.5 * jet.d2 * z2 + gen.eval(t, jet.value, hz_ref) - jet.d1 * gen.eval(t, y, z)
}

/// `L_g h (t, y, z)`. Symbolic C2 candidates use exact derivatives; tabulated
/// ones use difference quotients at an interior node that is not a kink.
pub fn l_g_operator(gen: &GeneratorSpec, h: &ScalarFunction, t: f64, y: f64, z: &[f64]) -> Result<f64, ConvexityError> {
    if z.len() != gen.dim_z() {
        return Err(ConvexityError::DimensionMismatch { expected: gen.dim_z(), got: z.len() });
    }
    if let ScalarFunction::Tabulated(tab) = h {
        if let Some(i) = tab.node_index(y) {
            if let Some((left, right)) = tab.one_sided_slopes(i) {
                if (right - left).abs() > tau_kink(tab.step()) {
                    return Err(ConvexityError::DerivativeUnavailable {
                        y,
                        reason: format!("kink: one-sided slopes {left} and {right}"),
                    });
                }
            }
        }
    }
    let jet = h.jet(y).map_err(|e| match e {
        crate::function::FunctionError::DerivativeUnavailable { y, reason } => {
            ConvexityError::DerivativeUnavailable { y, reason }
        }
        other => other.into(),
    })?;
    Ok(l_g_from_jet(gen, jet, t, y, z))
}
