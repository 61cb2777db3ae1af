//! Energy accounting: propulsion, standard-tool transmission and
//! semantic-tool onboard inference, plus the straight-line reserve the
//! shield and the cost-aware baseline keep in hand.

use serde::{Deserialize, Serialize};

use crate::dynamics::UavState;
use crate::geometry::Vec2;
use crate::world::{ToolKind, ToolServer, WorldConfig};

fn default_exponent() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    /// Hover power, watts.
    pub p_hover: f64,
    /// Propulsion coefficient on squared speed.
    pub k_vel: f64,
    /// Fixed energy of one standard-tool upload, joules.
    pub e_tx_base: f64,
    /// Distance coefficient of a standard-tool upload.
    pub e_tx_dist: f64,
    /// Path-loss exponent applied to the server distance.
    #[serde(default = "default_exponent")]
    pub tx_exponent: f64,
    /// Onboard inference energy of one semantic-tool call, joules.
    pub e_llm: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p_hover: 50.0,
            k_vel: 0.1,
            e_tx_base: 200.0,
            e_tx_dist: 0.04,
            tx_exponent: 2.0,
            e_llm: 600.0,
        }
    }
}

impl EnergyParams {
    pub(crate) fn validate(&self, initial_energy: f64, servers: &[ToolServer]) -> Result<(), String> {
        let fields = [
            ("p_hover", self.p_hover),
            ("k_vel", self.k_vel),
            ("e_tx_base", self.e_tx_base),
            ("e_tx_dist", self.e_tx_dist),
            ("tx_exponent", self.tx_exponent),
            ("e_llm", self.e_llm),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("energy_params.{name} must be finite and >= 0 (got {v})"));
            }
        }
        for s in servers {
            let worst = match s.kind {
                ToolKind::Standard => self.transmission(s.range),
                ToolKind::Semantic => self.e_llm,
            };
            if worst >= initial_energy {
                return Err(format!(
                    "a single call to servers[{}] ({} J at full range) must cost less than \
                     initial_energy ({initial_energy} J)",
                    s.index, worst
                ));
            }
        }
        Ok(())
    }

    fn transmission(&self, distance: f64) -> f64 {
        let scaled = if self.tx_exponent == 2.0 {
            distance * distance
        } else {
            libm::pow(distance, self.tx_exponent)
        };
        self.e_tx_base + self.e_tx_dist * scaled
    }
}

/// Propulsion energy for one step: `p_hover*dt + k_vel*|v|^2*dt`.
pub fn flight_cost(velocity: Vec2, params: &EnergyParams, dt: f64) -> f64 {
    params.p_hover * dt + params.k_vel * velocity.norm_sq() * dt
}

/// Energy of one call to `server` issued from `pos`. Defined everywhere so
/// hypothetical calls can be priced.
pub fn tool_cost(server: &ToolServer, pos: Vec2, params: &EnergyParams) -> f64 {
    match server.kind {
        ToolKind::Standard if params.tx_exponent == 2.0 => {
            params.e_tx_base + params.e_tx_dist * pos.distance_sq(server.position)
        }
        ToolKind::Standard => params.transmission(pos.distance(server.position)),
        ToolKind::Semantic => params.e_llm,
    }
}

/// Flight energy of the remaining straight-line leg at full speed, rounded
/// up to whole steps. Uses the believed position.
pub fn reserve_to_goal(state: &UavState, cfg: &WorldConfig) -> f64 {
    let d = state.pos_believed.distance(cfg.goal_pos);
    let steps = (d / (cfg.v_max * cfg.dt)).ceil();
    steps * flight_cost(Vec2::new(cfg.v_max, 0.0), &cfg.energy_params, cfg.dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyCategory {
    Flight,
    Transmission,
    Compute,
}

impl EnergyCategory {
    pub fn for_tool(kind: ToolKind) -> Self {
        match kind {
            ToolKind::Standard => EnergyCategory::Transmission,
            ToolKind::Semantic => EnergyCategory::Compute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u32,
    pub category: EnergyCategory,
    pub joules: f64,
}

/// Outcome of one [`EnergyLedger::charge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    pub recorded: f64,
    pub depleted: bool,
}

/// Append-only record of every joule spent in an episode.
///
/// `remaining()` is `initial - spent` where `spent` accumulates the entries
/// in insertion order, so conservation holds bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    initial: f64,
    spent: f64,
    exhausted: bool,
    entries: Vec<LedgerEntry>,
}

impl EnergyLedger {
    pub fn new(initial: f64) -> Self {
        Self {
            initial,
            spent: 0.0,
            exhausted: false,
            entries: Vec::new(),
        }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn remaining(&self) -> f64 {
        self.initial - self.spent
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_depleted(&self) -> bool {
        self.exhausted || self.remaining() <= 0.0
    }

    pub fn total(&self, category: EnergyCategory) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.category == category)
            .map(|e| e.joules)
            .sum()
    }

    /// Records a charge. A charge at least as large as what is left records
    /// the remainder instead and flags depletion.
    pub fn charge(&mut self, step: u32, category: EnergyCategory, joules: f64) -> Charge {
        debug_assert!(joules >= 0.0 && joules.is_finite(), "charge of {joules} J");
        debug_assert!(
            self.entries.last().is_none_or(|e| e.step <= step),
            "ledger steps must be monotone"
        );
        let remaining = self.remaining();
        let recorded = if joules < remaining {
            joules
        } else {
            self.exhausted = true;
            self.exhausting_charge(remaining)
        };
        self.spent += recorded;
        self.entries.push(LedgerEntry {
            step,
            category,
            joules: recorded,
        });
        Charge {
            recorded,
            depleted: self.is_depleted(),
        }
    }

    /// The largest charge `r` with `initial - (spent + r) >= 0`. Rounding
    /// can leave a remainder of a few ulps, which is why exhaustion is also
    /// tracked by a flag.
    fn exhausting_charge(&self, remaining: f64) -> f64 {
        let left = |r: f64| self.initial - (self.spent + r);
        let mut r = remaining;
        while r > 0.0 && left(r) < 0.0 {
            r = r.next_down();
        }
        while left(r.next_up()) >= 0.0 {
            r = r.next_up();
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::UavState;

    fn params() -> EnergyParams {
        EnergyParams::default()
    }

    #[test]
    fn hover_only_flight_cost() {
        assert_eq!(flight_cost(Vec2::ZERO, &params(), 1.0), 50.0);
    }

    #[test]
    fn velocity_term_is_quadratic() {
        let p = params();
        let slow = flight_cost(Vec2::new(5.0, 0.0), &p, 1.0) - p.p_hover;
        let fast = flight_cost(Vec2::new(10.0, 0.0), &p, 1.0) - p.p_hover;
        assert!((fast - 4.0 * slow).abs() < 1e-12);
    }

    #[test]
    fn full_speed_flight_cost() {
        // 50 + 0.1 * 20^2
        assert!((flight_cost(Vec2::new(20.0, 0.0), &params(), 1.0) - 90.0).abs() < 1e-12);
    }

    #[test]
    fn standard_cost_floor_and_growth() {
        let s = ToolServer::new(0, ToolKind::Standard, Vec2::new(500.0, 500.0));
        let p = params();
        assert_eq!(tool_cost(&s, s.position, &p), p.e_tx_base);
        let mut last = 0.0;
        for i in 0..=30 {
            let c = tool_cost(&s, s.position + Vec2::new(i as f64 * 5.0, 0.0), &p);
            assert!(c > last || i == 0);
            last = c;
        }
        // 200 + 0.04 * 150^2
        assert!((tool_cost(&s, Vec2::new(650.0, 500.0), &p) - 1100.0).abs() < 1e-9);
    }

    #[test]
    fn non_quadratic_exponent() {
        let s = ToolServer::new(0, ToolKind::Standard, Vec2::new(0.0, 0.0));
        let p = EnergyParams {
            tx_exponent: 3.0,
            ..params()
        };
        let c = tool_cost(&s, Vec2::new(10.0, 0.0), &p);
        assert!((c - (200.0 + 0.04 * 1000.0)).abs() < 1e-9);
    }

    #[test]
    fn semantic_cost_is_distance_independent() {
        let s = ToolServer::new(0, ToolKind::Semantic, Vec2::new(500.0, 500.0));
        let p = params();
        assert_eq!(
            tool_cost(&s, s.position, &p),
            tool_cost(&s, s.position + Vec2::new(0.0, s.range), &p)
        );
    }

    #[test]
    fn reserve_examples() {
        let cfg = WorldConfig::empty_arena();
        let mut st = UavState::at_start(&cfg);
        st.pos_believed = cfg.goal_pos;
        assert_eq!(reserve_to_goal(&st, &cfg), 0.0);
        st.pos_believed = cfg.start_pos;
        assert!((reserve_to_goal(&st, &cfg) - 4050.0).abs() < 1e-9);
        let mut last = 0.0;
        for i in 0..100 {
            st.pos_believed = cfg.goal_pos - Vec2::new(i as f64 * 7.3, 0.0);
            let r = reserve_to_goal(&st, &cfg);
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn charge_to_exact_zero() {
        let mut l = EnergyLedger::new(10.0);
        let c = l.charge(0, EnergyCategory::Flight, 10.0);
        assert_eq!(c.recorded, 10.0);
        assert!(c.depleted);
        assert_eq!(l.remaining(), 0.0);
    }

    #[test]
    fn overdraw_is_clamped() {
        let mut l = EnergyLedger::new(10.0);
        let c = l.charge(0, EnergyCategory::Compute, 12.0);
        assert_eq!(c.recorded, 10.0);
        assert!(c.depleted);
        assert_eq!(l.remaining(), 0.0);
        assert_eq!(l.entries()[0].joules, 10.0);
    }

    #[test]
    fn overdraw_after_awkward_prefix_lands_on_zero() {
        let mut l = EnergyLedger::new(12_000.0);
        l.charge(0, EnergyCategory::Flight, 0.1);
        l.charge(1, EnergyCategory::Flight, 1.0 / 3.0);
        let c = l.charge(2, EnergyCategory::Compute, 1e6);
        assert!(c.depleted);
        assert_eq!(l.remaining(), 0.0);
    }

    #[test]
    fn category_totals() {
        let mut l = EnergyLedger::new(1000.0);
        l.charge(0, EnergyCategory::Flight, 90.0);
        l.charge(0, EnergyCategory::Transmission, 200.0);
        l.charge(1, EnergyCategory::Flight, 90.0);
        assert_eq!(l.total(EnergyCategory::Flight), 180.0);
        assert_eq!(l.total(EnergyCategory::Compute), 0.0);
    }

    #[test]
    fn exhaustion_when_zero_is_unreachable() {
        // No float r makes 860.21.. - (260.07.. + r) exactly zero.
        let mut l = EnergyLedger::new(860.210_344_415_847_5);
        l.charge(0, EnergyCategory::Flight, 260.074_476_842_199_54);
        let c = l.charge(1, EnergyCategory::Flight, 666.993_219_083_593_8);
        assert!(c.depleted && l.is_depleted());
        assert!(l.remaining() >= 0.0 && l.remaining() < 1e-9);
        assert_eq!(l.initial() - (l.entries()[0].joules + l.entries()[1].joules), l.remaining());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation_and_monotonicity(
                initial in 1.0f64..20_000.0,
                charges in proptest::collection::vec(0.0f64..900.0, 0..80),
            ) {
                let mut l = EnergyLedger::new(initial);
                let mut last = initial;
                for (i, c) in charges.iter().enumerate() {
                    if l.is_depleted() { break; }
                    l.charge(i as u32, EnergyCategory::Flight, *c);
                    let sum = l.entries().iter().fold(0.0, |acc, e| acc + e.joules);
                    prop_assert_eq!(initial - sum, l.remaining());
                    prop_assert!(l.remaining() >= 0.0);
                    prop_assert!(l.remaining() <= last);
                    last = l.remaining();
                }
            }
        }
    }
}
