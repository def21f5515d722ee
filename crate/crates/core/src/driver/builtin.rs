use super::problem::ProblemFile;
use super::DriverError;

/// Embedded problem files, by name.
pub const BUILTINS: [(&str, &str); 3] = [
    ("boundary_layer", include_str!("../../problems/boundary_layer.toml")),
    ("nonlinear_damping", include_str!("../../problems/nonlinear_damping.toml")),
    ("wkb", include_str!("../../problems/wkb.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Result<ProblemFile, DriverError> {
    let src = builtin_source(name).ok_or_else(|| {
        DriverError::parse(
            format!("unknown case `{name}`; available: {}", builtin_names().join(", ")),
            None,
        )
    })?;
    ProblemFile::from_toml(src)
}
