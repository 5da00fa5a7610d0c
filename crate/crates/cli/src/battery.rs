//! The builtin cone battery: every family the library knows, at sizes small
//! enough that the whole sweep stays interactive.

use ccl_core::cones::invariants::{project_cone, transform_cone};
use ccl_core::ConeSpec;
use serde::{Deserialize, Serialize};

use crate::{RunError, RunResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedCone {
    pub name: String,
    pub cone: ConeSpec,
}

fn rho_label(rho: f64) -> String {
    let sign = if rho < 0.0 { "m" } else { "" };
    let a = rho.abs();
    if (a - a.round()).abs() < 1e-12 {
        format!("{sign}{}", a.round() as i64)
    } else {
        format!("{sign}{}", a.to_string().replace('.', "p"))
    }
}

/// 33 eigenvalue-polynomial cones, 15 subset-sum cones, 8 halfspaces, and 5
/// transforms plus 5 projections with hand-checked gates.
pub fn builtin_battery() -> Vec<NamedCone> {
    let mut v = Vec::new();
    for n in 3..=8usize {
        for k in 1..=n {
            v.push(NamedCone {
                name: format!("garding_n{n}_k{k}"),
                cone: ConeSpec::garding(n, k),
            });
        }
    }
    for n in [3usize, 5, 7] {
        for k in 1..=n {
            v.push(NamedCone {
                name: format!("subset_sum_n{n}_k{k}"),
                cone: ConeSpec::pk(n, k),
            });
        }
    }
    for n in [4usize, 6] {
        for rho in [1.0, 0.5, -1.0, -2.0] {
            v.push(NamedCone {
                name: format!("halfspace_n{n}_rho_{}", rho_label(rho)),
                cone: ConeSpec::halfspace(n, rho),
            });
        }
    }
    let transforms: [(ConeSpec, f64); 5] = [
        (ConeSpec::garding(4, 4), -2.0),
        (ConeSpec::garding(4, 2), -2.0),
        (ConeSpec::garding(4, 2), 1.0),
        (ConeSpec::garding(5, 2), 0.5),
        (ConeSpec::pk(4, 2), -1.0),
    ];
    for (base, rho) in transforms {
        let name = format!("transform_rho_{}_of_{}", rho_label(rho), base_label(&base));
        let cone = transform_cone(base, rho).expect("builtin transform gates are hand-checked");
        v.push(NamedCone { name, cone });
    }
    let projections: [(ConeSpec, usize); 5] = [
        (ConeSpec::pk(5, 3), 4),
        (ConeSpec::pk(5, 3), 3),
        (ConeSpec::garding(6, 5), 3),
        (ConeSpec::garding(5, 4), 3),
        (ConeSpec::garding(8, 6), 5),
    ];
    for (base, target) in projections {
        let name = format!("projection_to_{target}_of_{}", base_label(&base));
        let cone =
            project_cone(base, target).expect("builtin projection gates are hand-checked");
        v.push(NamedCone { name, cone });
    }
    v
}

fn base_label(spec: &ConeSpec) -> String {
    match spec {
        ConeSpec::Garding { n, k } => format!("garding_n{n}_k{k}"),
        ConeSpec::Pk { n, k } => format!("subset_sum_n{n}_k{k}"),
        ConeSpec::Halfspace { n, rho } => format!("halfspace_n{n}_rho_{}", rho_label(*rho)),
        ConeSpec::Transform { n, .. } => format!("transform_n{n}"),
        ConeSpec::Projection { n, .. } => format!("projection_n{n}"),
    }
}

pub fn validate_battery(items: &[NamedCone]) -> RunResult<()> {
    if items.is_empty() {
        return Err(RunError::config("battery is empty: nothing to report on"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for item in items {
        if item.name.is_empty() {
            return Err(RunError::config("battery entry with an empty name"));
        }
        if !seen.insert(item.name.clone()) {
            return Err(RunError::config(format!("duplicate battery name {}", item.name)));
        }
        item.cone.validate()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_battery_is_valid_and_sized() {
        let b = builtin_battery();
        assert_eq!(b.len(), 66);
        validate_battery(&b).unwrap();
    }

    #[test]
    fn rho_labels_are_filename_safe() {
        assert_eq!(rho_label(-2.0), "m2");
        assert_eq!(rho_label(0.5), "0p5");
        assert_eq!(rho_label(1.0), "1");
    }
}
