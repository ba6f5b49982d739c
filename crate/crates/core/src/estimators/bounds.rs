use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Reference uncertainty curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Shot-noise limit `⟨N_P⟩^(−1/2)`.
    Snl,
    /// Best classical probe `√((1−α)/⟨N_P⟩)`.
    Coherent,
    /// Ultimate quantum limit `√(α(1−α)/⟨N_P⟩)`.
    Uql,
    /// Balanced classical two-beam `√((1−α)(2−α)/⟨N_P⟩)`.
    BalancedCcb,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] =
        [BoundKind::Snl, BoundKind::Coherent, BoundKind::Uql, BoundKind::BalancedCcb];

    /// Column label used in emitted tables.
    pub fn column(&self) -> &'static str {
        match self {
            BoundKind::Snl => "u_snl",
            BoundKind::Coherent => "u_coh",
            BoundKind::Uql => "u_uql",
            BoundKind::BalancedCcb => "u_bccb",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

/// Standard deviation of the given reference curve.
pub fn bound(kind: BoundKind, alpha: f64, mean_np: f64) -> Result<f64> {
    check_unit("alpha", alpha)?;
    if !(mean_np.is_finite() && mean_np > 0.0) {
        return Err(Error::InvalidArgument(format!("mean_np = {mean_np} must be finite and positive")));
    }
    let var = match kind {
        BoundKind::Snl => 1.0 / mean_np,
        BoundKind::Coherent => (1.0 - alpha) / mean_np,
        BoundKind::Uql => alpha * (1.0 - alpha) / mean_np,
        BoundKind::BalancedCcb => (1.0 - alpha) * (2.0 - alpha) / mean_np,
    };
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((bound(BoundKind::Uql, 0.5, 100.0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(bound(BoundKind::Coherent, 0.0, 37.0).unwrap(), bound(BoundKind::Snl, 0.0, 37.0).unwrap());
        assert_eq!(bound(BoundKind::Uql, 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(bound(BoundKind::Uql, 1.0, 10.0).unwrap(), 0.0);
        assert!((bound(BoundKind::BalancedCcb, 0.0, 100.0).unwrap().powi(2) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(bound(BoundKind::Snl, 1.5, 10.0).is_err());
        assert!(bound(BoundKind::Snl, 0.5, 0.0).is_err());
        assert!(bound(BoundKind::Snl, 0.5, f64::NAN).is_err());
    }
}
