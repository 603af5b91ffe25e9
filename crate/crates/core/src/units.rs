/// Physical constants carried explicitly through every formula.
///
/// Natural units (`hbar = mass = 1`) are the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Units {
    pub const NATURAL: Units = Units { hbar: 1.0, mass: 1.0 };

    pub fn new(hbar: f64, mass: f64) -> Self {
        Units { hbar, mass }
    }

    /// `hbar / mass`, the factor turning a phase gradient into a velocity.
    pub fn velocity_scale(&self) -> f64 {
        self.hbar / self.mass
    }
}

impl Default for Units {
    fn default() -> Self {
        Units::NATURAL
    }
}
