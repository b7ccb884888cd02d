//! Convergence and boundedness certificates for gradient descent-ascent.
//!
//! Everything is driven by the two extremal eigenvalues
//! `λ_inf = inf_z λ_min(S_xx(z))` and `λ_sup = sup_z λ_max(S_yy(z))`:
//!
//! * `λ_sup < λ_inf` (the payoff is globally less convex in `y` than in
//!   `x`) makes `L = ½|ż|² - r·S` a Lyapunov function for any
//!   `r ∈ (λ_sup, λ_inf)`, so every bounded trajectory converges to a
//!   steady state (`theorem1`).
//! * `λ_sup < 0 < λ_inf` is the classical strictly convex-concave
//!   regime (`corollary1`), where the kinetic energy alone (`r = 0`)
//!   already works and the distance to the saddle is monotone.
//! * Boundedness of all trajectories follows in two cases: case 1 needs
//!   `λ_inf > 0` with `-V(y) = -min_x S` radially unbounded, case 2
//!   needs `λ_sup < 0` with `U(x) = max_y S` radially unbounded. Either
//!   way a minimax equilibrium exists.
//!
//! Builtin payoff families have exact extremal eigenvalues; expressions
//! are sampled over a box, which makes their certificates heuristic and
//! is recorded as a caveat. Radial unboundedness is probed along rays,
//! never proven.

mod bounds;
mod eigen;
mod solvers;

pub use bounds::{
    kose_uzawa_check, radial_probe, verify_global_bounds, GlobalBoundsReport, InequalityStats,
    SaddleDistanceReport, DEFAULT_RADII, LEMMA_SLACK,
};
pub use eigen::{extremal_eigenvalues, symmetric_eigenvalues};
pub use solvers::{
    find_saddle, inner_max, inner_min, max_over_y, min_over_x, minimax_candidates,
    MinimaxCandidate, STATIONARY_TOL,
};

use crate::error::CertifyError;
use crate::payoff::Payoff;
use serde::{Deserialize, Serialize};

/// Axis-aligned box over the joint `(x, y)` space, used wherever a global
/// infimum or supremum has to be approximated by sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, String> {
        if lower.len() != upper.len() {
            return Err("box lower and upper must have equal length".into());
        }
        if lower.is_empty() {
            return Err("box must have at least one dimension".into());
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(format!("box bounds must be finite (component {i})"));
            }
            if lo >= hi {
                return Err(format!(
                    "box lower must be strictly below upper (component {i}: {lo} >= {hi})"
                ));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[-half_width, half_width]` in every coordinate.
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        BoxDomain {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Splits into the x-section and y-section boxes.
    pub fn split(&self, m: usize) -> (BoxDomain, BoxDomain) {
        (
            BoxDomain {
                lower: self.lower[..m].to_vec(),
                upper: self.upper[..m].to_vec(),
            },
            BoxDomain {
                lower: self.lower[m..].to_vec(),
                upper: self.upper[m..].to_vec(),
            },
        )
    }
}

/// Where an extremal-eigenvalue pair came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exact for the payoff family.
    Analytic,
    /// Sampled over a box: `lambda_inf` is an upper bound on the true
    /// infimum and `lambda_sup` a lower bound on the true supremum.
    Sampled {
        #[serde(rename = "box")]
        box_: BoxDomain,
        samples: usize,
    },
}

/// The pair `(λ_inf(S_xx), λ_sup(S_yy))` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalEigenvalues {
    pub lambda_inf: f64,
    pub lambda_sup: f64,
    pub provenance: Provenance,
}

/// Which boundedness case applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem2Case {
    Case1,
    Case2,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    /// Every ray kept growing through the last probe stage.
    Consistent,
    /// Some ray failed to grow; radial unboundedness not established.
    NotEstablished,
}

/// Outcome of one radial probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProbeSummary {
    /// What was probed: `-V` or `U`.
    pub target: String,
    pub verdict: ProbeVerdict,
    pub rays: usize,
    #[serde(skip)]
    pub failing_ray: Option<Vec<f64>>,
}

/// Which hypothesis family selected `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectCase {
    Theorem1,
    Theorem2Case1,
    Theorem2Case2,
}

/// Certificate for one payoff: which conditions hold, the chosen energy
/// parameter `r`, the radial probe that backed the boundedness case, and
/// caveats qualifying sampled or reconstructed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub eigs: ExtremalEigenvalues,
    /// `λ_sup < λ_inf`: bounded trajectories converge to steady states.
    pub theorem1: bool,
    /// `λ_sup < 0 < λ_inf`: strictly convex-concave regime.
    pub corollary1: bool,
    pub theorem2_case: Theorem2Case,
    /// Chosen `r` with `λ_sup < r < λ_inf`; `None` when no condition
    /// holds.
    pub r: Option<f64>,
    /// `γ ∈ (0, 1)` such that `r = γ·λ_inf` (case 1) or `r = γ·λ_sup`
    /// (case 2).
    pub gamma: Option<f64>,
    pub radial_probe: Option<RadialProbeSummary>,
    pub caveats: Vec<String>,
}

/// Picks `r` strictly inside the interval demanded by the given case:
/// midpoints maximize the margin symmetrically. Returns `(r, gamma)`;
/// `gamma` is `None` for the plain convergence case.
pub fn select_r(
    eigs: &ExtremalEigenvalues,
    case: SelectCase,
) -> Result<(f64, Option<f64>), CertifyError> {
    let (inf, sup) = (eigs.lambda_inf, eigs.lambda_sup);
    if !(sup < inf) {
        return Err(CertifyError::Precondition(format!(
            "select_r needs lambda_sup < lambda_inf, got ({inf}, {sup})"
        )));
    }
    match case {
        SelectCase::Theorem1 => Ok(((inf + sup) / 2.0, None)),
        SelectCase::Theorem2Case1 => {
            if !(inf > 0.0) {
                return Err(CertifyError::Precondition(format!(
                    "case 1 needs lambda_inf > 0, got {inf}"
                )));
            }
            let r = (inf + sup.max(0.0)) / 2.0;
            Ok((r, Some(r / inf)))
        }
        SelectCase::Theorem2Case2 => {
            if !(sup < 0.0) {
                return Err(CertifyError::Precondition(format!(
                    "case 2 needs lambda_sup < 0, got {sup}"
                )));
            }
            let r = (sup + inf.min(0.0)) / 2.0;
            Ok((r, Some(r / sup)))
        }
    }
}

const PROBE_EXTRA_RAYS: usize = 6;

/// Builds the full certificate: extremal eigenvalues, condition checks,
/// boundedness case selection with radial probes, and the chosen `r`.
/// Absence of certification is a normal outcome, not an error; only
/// evaluation failures while sampling eigenvalues propagate.
pub fn certify(
    p: &Payoff,
    box_: &BoxDomain,
    samples: usize,
    seed: u64,
) -> Result<Certificate, CertifyError> {
    let eigs = extremal_eigenvalues(p, box_, samples)?;
    let mut caveats = Vec::new();
    if let Provenance::Sampled { samples, .. } = &eigs.provenance {
        caveats.push(format!(
            "heuristic certificate: extremal eigenvalues sampled at {samples} box points; \
             lambda_inf is an upper bound on the true infimum and lambda_sup a lower bound \
             on the true supremum"
        ));
    }
    caveats.push(
        "steady states are assumed isolated; checked only empirically via multi-start clustering"
            .to_string(),
    );

    let theorem1 = eigs.lambda_sup < eigs.lambda_inf;
    let corollary1 = eigs.lambda_sup < 0.0 && eigs.lambda_inf > 0.0;

    let mut theorem2_case = Theorem2Case::None;
    let mut radial = None;
    if theorem1 {
        let m = p.m();
        let n = p.n();
        let rays_y = 2 * n + PROBE_EXTRA_RAYS;
        let rays_x = 2 * m + PROBE_EXTRA_RAYS;
        if eigs.lambda_inf > 0.0 {
            let probe = radial_probe(
                |y| min_over_x(p, y).map(|(v, _)| -v),
                n,
                rays_y,
                &DEFAULT_RADII,
                seed,
            );
            match probe {
                Ok(mut summary) => {
                    summary.target = "-V".into();
                    if summary.verdict == ProbeVerdict::Consistent {
                        theorem2_case = Theorem2Case::Case1;
                    } else if let Some(ray) = &summary.failing_ray {
                        caveats.push(format!(
                            "-V growth not established along ray {ray:?}; boundedness case 1 rejected"
                        ));
                    }
                    radial = Some(summary);
                }
                Err(e) => caveats.push(format!(
                    "-V probe failed ({e}); boundedness case 1 rejected"
                )),
            }
        }
        if theorem2_case == Theorem2Case::None && eigs.lambda_sup < 0.0 {
            let probe = radial_probe(
                |x| max_over_y(p, x).map(|(u, _)| u),
                m,
                rays_x,
                &DEFAULT_RADII,
                seed,
            );
            match probe {
                Ok(mut summary) => {
                    summary.target = "U".into();
                    if summary.verdict == ProbeVerdict::Consistent {
                        theorem2_case = Theorem2Case::Case2;
                        caveats.push(
                            "boundedness case 2 uses the mirrored r construction \
                             r = (lambda_sup + min(lambda_inf, 0))/2"
                                .to_string(),
                        );
                    } else if let Some(ray) = &summary.failing_ray {
                        caveats.push(format!(
                            "U growth not established along ray {ray:?}; boundedness case 2 rejected"
                        ));
                    }
                    radial = Some(summary);
                }
                Err(e) => {
                    caveats.push(format!("U probe failed ({e}); boundedness case 2 rejected"))
                }
            }
        }
    }

    let (r, gamma) = if theorem1 {
        let case = match theorem2_case {
            Theorem2Case::Case1 => SelectCase::Theorem2Case1,
            Theorem2Case::Case2 => SelectCase::Theorem2Case2,
            Theorem2Case::None => SelectCase::Theorem1,
        };
        let (r, gamma) = select_r(&eigs, case)?;
        (Some(r), gamma)
    } else {
        (None, None)
    };

    Ok(Certificate {
        eigs,
        theorem1,
        corollary1,
        theorem2_case,
        r,
        gamma,
        radial_probe: radial,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{ExpressionPayoff, LienardPayoff, QuadraticPayoff};

    fn quad(a: f64, b: f64, c: f64) -> Payoff {
        Payoff::Quadratic(QuadraticPayoff::scalar(a, b, c))
    }

    fn default_box() -> BoxDomain {
        BoxDomain::symmetric(2, 5.0)
    }

    #[test]
    fn select_r_examples() {
        let eigs = |inf, sup| ExtremalEigenvalues {
            lambda_inf: inf,
            lambda_sup: sup,
            provenance: Provenance::Analytic,
        };
        let (r, gamma) = select_r(&eigs(2.0, 1.0), SelectCase::Theorem1).unwrap();
        assert_eq!(r, 1.5);
        assert_eq!(gamma, None);

        let (r, _) = select_r(&eigs(1.0, -1.0), SelectCase::Theorem1).unwrap();
        assert_eq!(r, 0.0);

        let (r, gamma) = select_r(&eigs(2.0, 1.0), SelectCase::Theorem2Case1).unwrap();
        assert_eq!(r, 1.5);
        assert_eq!(gamma, Some(0.75));

        assert!(select_r(&eigs(1.0, 1.0), SelectCase::Theorem1).is_err());
        assert!(select_r(&eigs(-1.0, -2.0), SelectCase::Theorem2Case1).is_err());
    }

    #[test]
    fn select_r_stays_strictly_inside() {
        let cases = [
            (2.0, 1.0),
            (1.0, -1.0),
            (-1.0, -1.5),
            (0.5, -3.0),
            (3.0, 0.0),
        ];
        for (inf, sup) in cases {
            let eigs = ExtremalEigenvalues {
                lambda_inf: inf,
                lambda_sup: sup,
                provenance: Provenance::Analytic,
            };
            let (r, _) = select_r(&eigs, SelectCase::Theorem1).unwrap();
            assert!(sup < r && r < inf);
            if inf > 0.0 {
                let (r, gamma) = select_r(&eigs, SelectCase::Theorem2Case1).unwrap();
                assert!(sup < r && r < inf);
                let g = gamma.unwrap();
                assert!(0.0 < g && g < 1.0);
            }
            if sup < 0.0 {
                let (r, gamma) = select_r(&eigs, SelectCase::Theorem2Case2).unwrap();
                assert!(sup < r && r < inf);
                let g = gamma.unwrap();
                assert!(0.0 < g && g < 1.0);
            }
        }
    }

    #[test]
    fn certify_less_convex_quadratic() {
        // c < a and b² > ac: converges, and boundedness case 1 applies
        let cert = certify(&quad(2.0, 2.0, 1.0), &default_box(), 100, 0).unwrap();
        assert!(cert.theorem1);
        assert!(!cert.corollary1);
        assert_eq!(cert.theorem2_case, Theorem2Case::Case1);
        assert_eq!(cert.r, Some(1.5));
        assert_eq!(cert.gamma, Some(0.75));
    }

    #[test]
    fn certify_convex_concave_quadratic() {
        let cert = certify(&quad(1.0, 0.0, -1.0), &default_box(), 100, 0).unwrap();
        assert!(cert.theorem1);
        assert!(cert.corollary1);
        assert_eq!(cert.theorem2_case, Theorem2Case::Case1);
    }

    #[test]
    fn certify_lienard_damped() {
        // α > μ: no limit cycle, and boundedness through the U probe
        let l = Payoff::Lienard(LienardPayoff::new(1.0, 1.5).unwrap());
        let cert = certify(&l, &default_box(), 100, 0).unwrap();
        assert!(cert.theorem1);
        assert!(!cert.corollary1);
        assert_eq!(cert.theorem2_case, Theorem2Case::Case2);
        let r = cert.r.unwrap();
        assert!(-1.5 < r && r < -1.0);
        assert_eq!(cert.radial_probe.as_ref().unwrap().target, "U");
    }

    #[test]
    fn certify_lienard_undamped_fails() {
        // α < μ: eigenvalues (-1, -0.5) violate the convergence condition
        let l = Payoff::Lienard(LienardPayoff::new(1.0, 0.5).unwrap());
        let cert = certify(&l, &default_box(), 100, 0).unwrap();
        assert!(!cert.theorem1);
        assert_eq!(cert.theorem2_case, Theorem2Case::None);
        assert_eq!(cert.r, None);
    }

    #[test]
    fn certify_bilinear_expression_is_heuristic() {
        let p = Payoff::Expression(ExpressionPayoff::parse("x1*y1", 1, 1).unwrap());
        let cert = certify(&p, &default_box(), 500, 0).unwrap();
        assert!(!cert.theorem1); // sampled eigenvalues are (0, 0)
        assert!(cert.eigs.lambda_inf.abs() < 1e-9);
        assert!(cert.eigs.lambda_sup.abs() < 1e-9);
        assert!(cert.caveats.iter().any(|c| c.contains("heuristic")));
    }

    #[test]
    fn certificate_invariants_on_grid() {
        // verdicts must reproduce the linear-system analysis exactly:
        // theorem1 == (c < a), boundedness == (c < a && b² > ac)
        let grid: Vec<f64> = (-4..=4).map(|k| k as f64 / 2.0).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    // skip boundary cells where probe stages straddle zero growth
                    if (c - a).abs() <= 0.1 || (b * b - a * c).abs() <= 0.1 {
                        continue;
                    }
                    let cert = certify(&quad(a, b, c), &default_box(), 10, 0).unwrap();
                    assert_eq!(cert.theorem1, c < a, "theorem1 at ({a},{b},{c})");
                    assert_eq!(
                        cert.theorem2_case != Theorem2Case::None,
                        c < a && b * b > a * c,
                        "boundedness at ({a},{b},{c})"
                    );
                    if cert.corollary1 {
                        assert!(cert.theorem1);
                    }
                    if let Some(r) = cert.r {
                        assert!(cert.eigs.lambda_sup < r && r < cert.eigs.lambda_inf);
                    }
                }
            }
        }
    }
}
