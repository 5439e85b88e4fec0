use super::RecordRow;
use serde::Serialize;

/// Terms of the discrete energy balance for one step `t_n -> t_n + dt`.
/// Implicit terms use `v_{n+1}`, explicit ones `v_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LedgerTerms {
    pub energy_change: f64,
    /// `μ‖v_{n+1}‖²_V`.
    pub viscous: f64,
    /// `α‖v_{n+1}‖²`.
    pub darcy: f64,
    /// `b(w_n, w_n, v_n)`.
    pub advection: f64,
    /// `β⟨C(w_n), v_n⟩`.
    pub damping: f64,
    pub forcing: f64,
    /// Pairing of the noise drift with `v_n`.
    pub noise: f64,
    pub dt: f64,
}

impl LedgerTerms {
    /// Exactly `-‖Δv‖² + 2dt⟨E_n, Δv⟩` for the scheme, hence `O(dt²)`.
    pub fn residual(&self) -> f64 {
        self.energy_change
            + 2.0 * self.dt * (self.viscous + self.darcy + self.advection + self.damping - self.forcing - self.noise)
    }
}

/// Residual series of a ledger-enabled record.
pub fn energy_ledger(rows: &[RecordRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.ledger.map(|l| l.residual())).collect()
}

/// `Σ_n |r_n|`.
pub fn energy_residual_total(rows: &[RecordRow]) -> f64 {
    energy_ledger(rows).iter().map(|r| r.abs()).sum()
}

/// One step of the V-level inequality
/// `d‖v‖²_V/dt + ‖A v‖² <= C (Q ‖v‖²_V + Q̃)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct VLedgerTerms {
    /// `(‖v_{n+1}‖²_V - ‖v_n‖²_V) / dt`.
    pub v_norm_rate: f64,
    /// `‖A v_{n+1}‖²`.
    pub stokes_sq: f64,
    pub v_v_sq: f64,
    pub q: f64,
    pub q_tilde: f64,
    /// `‖f + N_n‖²`, the bound when the system is linear and `μ = 1`.
    pub forcing_sq: f64,
}

impl VLedgerTerms {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        v_norm_rate: f64,
        stokes_sq: f64,
        v_h_sq: f64,
        v_v_sq: f64,
        z_h: f64,
        z_v: f64,
        az_h: f64,
        f_sq: f64,
        forcing_sq: f64,
        r: f64,
    ) -> Self {
        let q1 = v_h_sq * v_v_sq + z_h * az_h;
        let common = v_h_sq * z_v.powi(4) + az_h * z_v.powi(3) + z_v * z_v + f_sq;
        let (q, q_tilde) = if r < 3.0 {
            (q1, common + z_v.powf(2.0 * r) + v_h_sq)
        } else {
            (q1 + v_h_sq * v_v_sq, common + z_v.powi(6))
        };
        Self { v_norm_rate, stokes_sq, v_v_sq, q, q_tilde, forcing_sq }
    }

    pub fn lhs(&self) -> f64 {
        self.v_norm_rate + self.stokes_sq
    }

    pub fn bracket(&self) -> f64 {
        self.q * self.v_v_sq + self.q_tilde
    }

    /// Smallest `C` this step needs.
    pub fn required_constant(&self) -> f64 {
        let lhs = self.lhs();
        if lhs <= 0.0 {
            0.0
        } else if self.bracket() > 0.0 {
            lhs / self.bracket()
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VLedgerCheck {
    pub constant: f64,
    pub steps: usize,
    pub violations: Vec<usize>,
    pub max_required: f64,
}

impl VLedgerCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every V-ledger step of `rows` against a frozen `constant`.
pub fn v_ledger(rows: &[RecordRow], constant: f64) -> VLedgerCheck {
    let mut violations = Vec::new();
    let mut max_required: f64 = 0.0;
    let mut steps = 0;
    for (n, row) in rows.iter().enumerate() {
        if let Some(l) = &row.v_ledger {
            steps += 1;
            let need = l.required_constant();
            max_required = max_required.max(need);
            if need > constant {
                violations.push(n);
            }
        }
    }
    VLedgerCheck { constant, steps, violations, max_required }
}

/// Linear regime with `μ = 1`: `d‖v‖²_V/dt + ‖A v‖² <= ‖f + N‖²` exactly.
/// `slack` absorbs the Stokes solve tolerance.
pub fn v_ledger_linear(rows: &[RecordRow], slack: f64) -> VLedgerCheck {
    let mut violations = Vec::new();
    let mut max_required: f64 = 0.0;
    let mut steps = 0;
    for (n, row) in rows.iter().enumerate() {
        if let Some(l) = &row.v_ledger {
            steps += 1;
            let need = if l.lhs() <= 0.0 { 0.0 } else { l.lhs() / l.forcing_sq };
            max_required = max_required.max(need);
            if l.lhs() > l.forcing_sq + slack {
                violations.push(n);
            }
        }
    }
    VLedgerCheck { constant: 1.0, steps, violations, max_required }
}

/// Fits `C` as the largest per-step requirement over the calibration runs.
pub fn calibrate_v_ledger(records: &[&[RecordRow]]) -> f64 {
    records
        .iter()
        .map(|rows| v_ledger(rows, f64::INFINITY).max_required)
        .fold(0.0, f64::max)
}
