//! Double Butcher tableaux for the implicit-explicit Runge-Kutta schemes.
//!
//! Each scheme is a pair of an explicit tableau (strictly lower triangular)
//! and a diagonally implicit tableau sharing the same weight vector `b`.

use crate::error::{Result, SimError};

/// Identifier of a registered IMEX scheme, ordered by design order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// One-stage, first order: explicit/implicit Euler pairing.
    Sp111,
    /// Three-stage, second order, stiffly accurate, strong stability preserving.
    Sassp332,
    /// Four-stage, third order, strong stability preserving (not stiffly accurate).
    Ssp3433,
}

impl SchemeId {
    pub const ALL: [SchemeId; 3] = [SchemeId::Sp111, SchemeId::Sassp332, SchemeId::Ssp3433];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Sp111 => "sp111",
            SchemeId::Sassp332 => "sassp332",
            SchemeId::Ssp3433 => "ssp3433",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp111" => Ok(SchemeId::Sp111),
            "sassp332" => Ok(SchemeId::Sassp332),
            "ssp3433" => Ok(SchemeId::Ssp3433),
            other => Err(SimError::Config(format!("unknown tableau id `{other}`"))),
        }
    }
}

/// Double Butcher tableau: explicit matrix `a_tilde`, implicit matrix `a`,
/// shared weights `b` and abscissae `c_tilde`, `c`.
#[derive(Debug, Clone)]
pub struct ButcherPair {
    pub scheme_id: SchemeId,
    pub s: usize,
    pub a_tilde: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub order_p: usize,
}

/// Decimal coefficients of the four-stage third-order scheme, stored as printed
/// in the source tables.
pub const SSP3433_ALPHA: f64 = 0.241694;
pub const SSP3433_DELTA: f64 = 0.060424;
pub const SSP3433_ETA: f64 = 0.129153;

/// Builds the tableau pair for a registered scheme id.
pub fn make_tableau(scheme_id: SchemeId) -> ButcherPair {
    match scheme_id {
        SchemeId::Sp111 => ButcherPair {
            scheme_id,
            s: 1,
            a_tilde: vec![vec![0.0]],
            a: vec![vec![1.0]],
            b: vec![1.0],
            c_tilde: vec![0.0],
            c: vec![1.0],
            order_p: 1,
        },
        SchemeId::Sassp332 => {
            let third = 1.0 / 3.0;
            ButcherPair {
                scheme_id,
                s: 3,
                a_tilde: vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.5, 0.0, 0.0],
                    vec![0.5, 0.5, 0.0],
                ],
                a: vec![
                    vec![0.25, 0.0, 0.0],
                    vec![0.0, 0.25, 0.0],
                    vec![third, third, third],
                ],
                b: vec![third, third, third],
                c_tilde: vec![0.0, 0.5, 1.0],
                c: vec![0.25, 0.25, 1.0],
                order_p: 2,
            }
        }
        SchemeId::Ssp3433 => {
            let al = SSP3433_ALPHA;
            let de = SSP3433_DELTA;
            let et = SSP3433_ETA;
            let sixth = 1.0 / 6.0;
            ButcherPair {
                scheme_id,
                s: 4,
                a_tilde: vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0, 0.0],
                    vec![0.0, 0.25, 0.25, 0.0],
                ],
                a: vec![
                    vec![al, 0.0, 0.0, 0.0],
                    vec![-al, al, 0.0, 0.0],
                    vec![0.0, 1.0 - al, al, 0.0],
                    vec![de, et, 0.5 - de - et - al, al],
                ],
                b: vec![0.0, sixth, sixth, 2.0 / 3.0],
                c_tilde: vec![0.0, 0.0, 1.0, 0.5],
                c: vec![al, 0.0, 1.0, 0.5],
                order_p: 3,
            }
        }
    }
}

/// One violated tableau condition together with its numerical residual.
#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: String,
    pub residual: f64,
}

/// Checks the structural invariants of a tableau pair and first-order
/// consistency. Returns the list of violated conditions; empty means valid.
pub fn validate_tableau(tb: &ButcherPair) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = tb.s;
    let shape_ok = tb.a_tilde.len() == s
        && tb.a.len() == s
        && tb.a_tilde.iter().all(|r| r.len() == s)
        && tb.a.iter().all(|r| r.len() == s)
        && tb.b.len() == s
        && tb.c_tilde.len() == s
        && tb.c.len() == s;
    if !shape_ok {
        out.push(Violation {
            condition: format!("tableau arrays do not all have size {s}"),
            residual: f64::NAN,
        });
        return out;
    }
    for i in 0..s {
        for j in i..s {
            if tb.a_tilde[i][j] != 0.0 {
                out.push(Violation {
                    condition: format!("explicit matrix not strictly lower triangular at ({i},{j})"),
                    residual: tb.a_tilde[i][j].abs(),
                });
            }
        }
        for j in (i + 1)..s {
            if tb.a[i][j] != 0.0 {
                out.push(Violation {
                    condition: format!("implicit matrix not lower triangular at ({i},{j})"),
                    residual: tb.a[i][j].abs(),
                });
            }
        }
    }
    let sum_b: f64 = tb.b.iter().sum();
    if (sum_b - 1.0).abs() > 1e-14 {
        out.push(Violation {
            condition: format!("weights do not sum to one: sum b = {sum_b}"),
            residual: (sum_b - 1.0).abs(),
        });
    }
    for i in 0..s {
        let row_t: f64 = tb.a_tilde[i].iter().sum();
        if (row_t - tb.c_tilde[i]).abs() > 1e-14 {
            out.push(Violation {
                condition: format!("c_tilde[{i}] inconsistent with explicit row sum"),
                residual: (row_t - tb.c_tilde[i]).abs(),
            });
        }
        let row: f64 = tb.a[i].iter().sum();
        if (row - tb.c[i]).abs() > 1e-14 {
            out.push(Violation {
                condition: format!("c[{i}] inconsistent with implicit row sum"),
                residual: (row - tb.c[i]).abs(),
            });
        }
    }
    out
}

/// A tableau is stiffly accurate when the last implicit row equals the weights.
pub fn is_stiffly_accurate(tb: &ButcherPair) -> bool {
    tb.a[tb.s - 1]
        .iter()
        .zip(&tb.b)
        .all(|(aij, bj)| (aij - bj).abs() <= 1e-15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registered_schemes_validate_clean() {
        for id in SchemeId::ALL {
            let tb = make_tableau(id);
            let report = validate_tableau(&tb);
            assert!(report.is_empty(), "{id:?}: {report:?}");
        }
    }

    #[test]
    fn sp111_coefficients() {
        let tb = make_tableau(SchemeId::Sp111);
        assert_eq!(tb.a_tilde, vec![vec![0.0]]);
        assert_eq!(tb.a, vec![vec![1.0]]);
        assert_eq!(tb.b, vec![1.0]);
        assert_eq!(tb.order_p, 1);
    }

    #[test]
    fn sassp332_coefficients() {
        let tb = make_tableau(SchemeId::Sassp332);
        assert_eq!(tb.b, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let diag: Vec<f64> = (0..3).map(|i| tb.a[i][i]).collect();
        assert_eq!(diag, vec![0.25, 0.25, 1.0 / 3.0]);
    }

    #[test]
    fn ssp3433_coefficients() {
        let tb = make_tableau(SchemeId::Ssp3433);
        assert_eq!(tb.b, vec![0.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
        assert_eq!(tb.a[0][0], 0.241694);
        assert_eq!(tb.a[3][2], 0.5 - 0.060424 - 0.129153 - 0.241694);
        assert_eq!(tb.order_p, 3);
    }

    #[test]
    fn bad_weights_reported() {
        let mut tb = make_tableau(SchemeId::Sassp332);
        tb.b = vec![0.5, 0.5, 0.1];
        // keep c rows consistent so only the weight violation fires
        let report = validate_tableau(&tb);
        assert!(report
            .iter()
            .any(|v| v.condition.contains("weights do not sum to one") && (v.residual - 0.1).abs() < 1e-12));
    }

    #[test]
    fn explicit_diagonal_entry_reported() {
        let mut tb = make_tableau(SchemeId::Sassp332);
        tb.a_tilde[0][0] = 0.3;
        let report = validate_tableau(&tb);
        assert!(report
            .iter()
            .any(|v| v.condition.contains("explicit matrix not strictly lower triangular")));
    }

    #[test]
    fn stiff_accuracy_classification() {
        assert!(is_stiffly_accurate(&make_tableau(SchemeId::Sp111)));
        assert!(is_stiffly_accurate(&make_tableau(SchemeId::Sassp332)));
        assert!(!is_stiffly_accurate(&make_tableau(SchemeId::Ssp3433)));
    }

    #[test]
    fn scheme_id_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(SchemeId::parse(id.as_str()).unwrap(), id);
        }
        assert!(SchemeId::parse("rk4").is_err());
    }
}
