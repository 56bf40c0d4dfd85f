//! Example kernels shipped with the crate.

pub const HELMHOLTZ: &str = include_str!("../fixtures/helmholtz.cfd");
pub const INTERPOLATION: &str = include_str!("../fixtures/interpolation.cfd");
pub const GRADIENT: &str = include_str!("../fixtures/gradient.cfd");

/// Fixture source by kernel name.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "helmholtz" => Some(HELMHOLTZ),
        "interpolation" => Some(INTERPOLATION),
        "gradient" => Some(GRADIENT),
        _ => None,
    }
}
