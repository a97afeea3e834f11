//! Named setups: domain, signal parameters, mass levels and solver controls.

use serde::{Deserialize, Serialize};

use super::cases::{
    AnisoParams, CaseParams, CurveParams, HomBump, HomogeneousParams, MorseBump, MorseParams,
    NoncoerciveLimit, NoncoerciveParams, SeparationParams,
};
use crate::error::{Error, Result};
use crate::signals::{BumpCutoff, Window};
use crate::solver::{DomainSpec, SolverOptions, Sym2};

/// Serializable grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainParams {
    Torus { origin: [f64; 2], extent: [f64; 2], n: [usize; 2] },
    Sphere { n: [usize; 2], phi_min_deg: f64 },
}

impl DomainParams {
    pub fn build(&self) -> Result<DomainSpec> {
        match self {
            DomainParams::Torus { origin, extent, n } => DomainSpec::periodic_rect(*origin, *extent, n[0], n[1]),
            DomainParams::Sphere { n, phi_min_deg } => DomainSpec::lat_lon_sphere(n[0], n[1], phi_min_deg.to_radians()),
        }
    }

    pub fn dims(&self) -> [usize; 2] {
        match self {
            DomainParams::Torus { n, .. } | DomainParams::Sphere { n, .. } => *n,
        }
    }

    /// Torus centred on the origin.
    pub fn centered(extent: [f64; 2], n: [usize; 2]) -> Self {
        DomainParams::Torus { origin: [-0.5 * extent[0], -0.5 * extent[1]], extent, n }
    }
}

/// Everything needed to run one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub domain: DomainParams,
    pub case: CaseParams,
    pub masses: Vec<f64>,
    pub solver: SolverOptions,
}

/// `levels` masses from `max` down to `min`, equally spaced in `log M`.
pub fn geometric_masses(max: f64, min: f64, levels: usize) -> Result<Vec<f64>> {
    if !(max > min && min > 0.0) || levels < 2 {
        return Err(Error::Domain("need max > min > 0 and at least two levels".into()));
    }
    let r = (min / max).ln() / (levels - 1) as f64;
    let mut m: Vec<f64> = (0..levels).map(|k| max * (r * k as f64).exp()).collect();
    m[levels - 1] = min;
    Ok(m)
}

pub fn preset_names() -> &'static [&'static str] {
    &["morse1", "morse2", "hom(2)", "hom(4)", "aniso", "noncoercive", "sep", "sep_control", "curve"]
}

fn solver() -> SolverOptions {
    SolverOptions { tol: 1e-10, ..SolverOptions::default() }.with_auto_omega()
}

/// Look up a preset by name; `hom(g)` accepts any positive degree.
pub fn preset(name: &str) -> Result<RunSetup> {
    let gmax = 0.9;
    let background = 0.1;
    let setup = match name {
        "morse1" => RunSetup {
            domain: DomainParams::centered([4.8, 4.8], [512, 512]),
            case: CaseParams::Morse(MorseParams {
                maxima: vec![MorseBump { position: [0.0, 0.0], hessian: Sym2::IDENTITY }],
                gmax,
                background,
                cutoff: BumpCutoff { q_inner: 2.0, q_outer: 3.0 },
            }),
            masses: geometric_masses(4e-3, 1.8e-5, 8)?,
            solver: solver(),
        },
        "morse2" => RunSetup {
            domain: DomainParams::centered([7.2, 4.8], [1152, 768]),
            case: CaseParams::Morse(MorseParams {
                maxima: vec![
                    MorseBump { position: [-1.4, 0.0], hessian: Sym2::IDENTITY },
                    MorseBump { position: [2.2, 0.0], hessian: Sym2::diag(4.0, 4.0) },
                ],
                gmax,
                background,
                cutoff: BumpCutoff { q_inner: 2.0, q_outer: 3.0 },
            }),
            masses: geometric_masses(4e-3, 1.8e-5, 8)?,
            solver: solver(),
        },
        "aniso" => RunSetup {
            domain: DomainParams::centered([2.048, 1.8], [512, 1200]),
            case: CaseParams::Aniso(AnisoParams {
                center: [0.0, 0.0],
                a: 1.0,
                b: 1.0,
                gmax,
                background,
                window: Window { radii: [0.7, 0.65], blend: 0.3 },
            }),
            masses: geometric_masses(1e-4, 3e-8, 8)?,
            solver: solver(),
        },
        "noncoercive" => RunSetup {
            domain: DomainParams::centered([1.6, 11.2], [320, 1120]),
            case: CaseParams::Noncoercive(NoncoerciveParams {
                center: [0.0, 0.0],
                a: 1.0,
                b: 0.1,
                c: 1e-6,
                gmax,
                background,
                window: Window { radii: [0.6, 4.0], blend: 0.2 },
                rho: 4.0,
                compare_window: [2.0, 4.0],
                limit: NoncoerciveLimit::default(),
            }),
            masses: geometric_masses(3e-4, 1e-6, 8)?,
            solver: solver(),
        },
        "sep" | "sep_control" => {
            // A shallower second maximum keeps its wider support inside a
            // window whose deficit stays below the background depth.
            let (g2, c2, r2) = if name == "sep" { (4.0, 0.25, 0.9) } else { (2.0, 1.0, 0.6) };
            RunSetup {
                domain: DomainParams::centered([5.2, 2.6], [800, 400]),
                case: CaseParams::Separation(SeparationParams {
                    bumps: [
                        HomBump {
                            position: [-1.3, 0.0],
                            gamma: 2.0,
                            coeffs: vec![1.0],
                            window: Window { radii: [0.6, 0.6], blend: 0.4 },
                        },
                        HomBump {
                            position: [1.3, 0.0],
                            gamma: g2,
                            coeffs: vec![c2],
                            window: Window { radii: [r2, r2], blend: 0.4 },
                        },
                    ],
                    gmax,
                    background,
                }),
                masses: geometric_masses(6e-3, 1e-4, 8)?,
                solver: solver(),
            }
        }
        "curve" => RunSetup {
            domain: DomainParams::Sphere { n: [256, 256], phi_min_deg: 5.0 },
            case: CaseParams::Curve(CurveParams {
                phi0: std::f64::consts::FRAC_PI_2,
                a_samples: vec![3.0, 4.0, 3.0, 2.0],
                gmax,
                background,
                half_width: 0.28,
            }),
            masses: geometric_masses(1e-2, 1e-4, 6)?,
            solver: solver(),
        },
        other => {
            let gamma = other
                .strip_prefix("hom(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|g| *g > 0.0)
                .ok_or_else(|| Error::Domain(format!("unknown case '{other}'; known: {}", preset_names().join(", "))))?;
            // Window edge stays below the background depth: r^gamma < gmax - background.
            let reach = 0.95 * (gmax - background).powf(1.0 / gamma);
            let r = reach / 1.4;
            // Rescaled supports reach about 1.5 units: keep the largest level
            // inside the window.
            let m_max = (0.9 * r / 1.5).powf(gamma + 4.0);
            RunSetup {
                domain: DomainParams::centered([2.5 * reach, 2.5 * reach], [512, 512]),
                case: CaseParams::Homogeneous(HomogeneousParams {
                    center: [0.0, 0.0],
                    gamma,
                    coeffs: vec![1.0],
                    gmax,
                    background,
                    window: Window { radii: [r, r], blend: 0.4 },
                }),
                masses: geometric_masses(m_max, 1e-2 * m_max, 8)?,
                solver: solver(),
            }
        }
    };
    Ok(setup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_levels() {
        let m = geometric_masses(1e-2, 1e-5, 4).unwrap();
        assert_eq!(m.len(), 4);
        assert!((m[0] - 1e-2).abs() < 1e-16 && (m[3] - 1e-5).abs() < 1e-18);
        assert!((m[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn presets_build_signals() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            let d = s.domain.build().unwrap();
            s.case.signal(&d).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("hom(3)").is_ok());
        assert!(preset("nope").is_err());
    }
}
