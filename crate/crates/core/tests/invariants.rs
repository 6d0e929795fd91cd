use heatlab_core::invariants::*;
use heatlab_core::models::{eigenvalues, BoundaryCondition, ModelOperator};
use heatlab_core::numeric::linalg::CMatrix;
use heatlab_core::series::{expansion_fit, powers};
use heatlab_core::traces::classical_trace;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a.qr().q()
}

fn random_metric(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.5..0.5));
    &a * a.transpose() + DMatrix::identity(d, d)
}

/// Convert whitened matrices Γ̃^a back to coordinates of the metric ĝ_{ij}.
fn unwhiten(gw: &[CMatrix], metric: &DMatrix<f64>) -> Vec<CMatrix> {
    let d = gw.len();
    let e = metric.clone().symmetric_eigen();
    let inv_root = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.powf(-0.5))) * e.eigenvectors.transpose();
    (0..d)
        .map(|i| {
            let mut m = CMatrix::zeros(gw[0].nrows(), gw[0].ncols());
            for a in 0..d {
                m += &gw[a] * c(inv_root[(a, i)], 0.0);
            }
            m
        })
        .collect()
}

fn projector(u: &CMatrix, rank: usize) -> CMatrix {
    let n = u.nrows();
    let mut p = CMatrix::zeros(n, n);
    for i in 0..rank {
        p[(i, i)] = c(1.0, 0.0);
    }
    u * p * u.adjoint()
}

fn commuting_instance(rng: &mut ChaCha8Rng) -> ObliqueSymbol {
    let n = rng.gen_range(2..=4);
    let d = n - 1;
    let nf = rng.gen_range(1..=4);
    let u = random_unitary(rng, nf);
    // per channel, a vector of Γ̃ eigenvalues with Euclidean norm below one
    let chans: Vec<Vec<f64>> = (0..nf)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            let target = rng.gen_range(0.0..0.8);
            v.iter().map(|x| x / r * target).collect()
        })
        .collect();
    let gw: Vec<CMatrix> = (0..d)
        .map(|a| {
            let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(nf, |k, _| c(0.0, chans[k][a])));
            &u * diag * u.adjoint()
        })
        .collect();
    let metric = random_metric(rng, d);
    let rank = rng.gen_range(0..=nf);
    ObliqueSymbol { n, gammas: unwhiten(&gw, &metric), boundary_metric: metric, pi: projector(&random_unitary(rng, nf), rank) }
}

fn pauli() -> [CMatrix; 3] {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

fn clifford_instance(rng: &mut ChaCha8Rng) -> ObliqueSymbol {
    let n = rng.gen_range(2..=4);
    let d = n - 1;
    let kappa: f64 = rng.gen_range(0.05..0.75);
    let (nf, block, rank) = if d == 1 {
        let nf = rng.gen_range(1..=4);
        (nf, 1, rng.gen_range(1..=nf))
    } else {
        let nf = rng.gen_range(2..=4);
        if nf == 4 && rng.gen_bool(0.5) {
            (4, 4, 4)
        } else {
            (nf, 2, 2)
        }
    };
    let gens: Vec<CMatrix> = (0..d)
        .map(|a| {
            let g = if d == 1 {
                CMatrix::identity(1, 1)
            } else {
                pauli()[a].clone()
            };
            let g = if block == 4 { g.kronecker(&CMatrix::identity(2, 2)) } else { g };
            g * c(0.0, kappa.sqrt())
        })
        .collect();
    let u = random_unitary(rng, nf);
    let gw: Vec<CMatrix> = gens
        .iter()
        .map(|g| {
            let mut m = CMatrix::zeros(nf, nf);
            for r in 0..rank {
                for s in 0..rank {
                    m[(r, s)] = if d == 1 && r != s { c(0.0, 0.0) } else { g[(r % g.nrows(), s % g.nrows())] };
                }
            }
            if d == 1 {
                for r in 0..rank {
                    m[(r, r)] = g[(0, 0)];
                }
            }
            &u * m * u.adjoint()
        })
        .collect();
    let metric = random_metric(rng, d);
    ObliqueSymbol { n, gammas: unwhiten(&gw, &metric), boundary_metric: metric, pi: projector(&u, rank) }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn quadrature_matches_commuting_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = commuting_instance(&mut rng);
        let q = ggs_gamma(&s, GammaMethod::Quadrature).unwrap();
        let cf = ggs_gamma(&s, GammaMethod::Commuting).unwrap();
        assert!(rel(q, cf) <= 1e-6, "n={} N={} quad {q} closed {cf}", s.n, s.fiber_dim());
    }
}

#[test]
fn quadrature_matches_clifford_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let s = clifford_instance(&mut rng);
        let q = ggs_gamma(&s, GammaMethod::Quadrature).unwrap();
        let cf = ggs_gamma(&s, GammaMethod::Clifford).unwrap();
        assert!(rel(q, cf) <= 1e-6, "n={} N={} quad {q} closed {cf}", s.n, s.fiber_dim());
    }
}

#[test]
fn non_commuting_rejected_by_commuting_path() {
    let p = pauli();
    let gw = vec![&p[0] * c(0.0, 0.3), &p[1] * c(0.0, 0.3)];
    let s = ObliqueSymbol { n: 3, gammas: gw, boundary_metric: DMatrix::identity(2, 2), pi: CMatrix::identity(2, 2) };
    assert!(matches!(ggs_gamma(&s, GammaMethod::Commuting), Err(heatlab_core::error::Error::WrongAlgebraicStructure(_))));
}

#[test]
fn zero_gamma_reduces_to_neumann_and_dirichlet() {
    for nf in 1..=3 {
        let zero = |rank| ObliqueSymbol {
            n: 3,
            gammas: vec![CMatrix::zeros(nf, nf); 2],
            boundary_metric: DMatrix::identity(2, 2),
            pi: projector(&CMatrix::identity(nf, nf), rank),
        };
        let nd = nf as f64;
        let d = ggs_a1(&zero(0), GammaMethod::Quadrature, nf, 2.0, 0.0).unwrap();
        let n = ggs_a1(&zero(nf), GammaMethod::Quadrature, nf, 2.0, nd).unwrap();
        assert!((d + PI.sqrt() / 2.0 * nd * 2.0).abs() < 1e-9);
        assert!((n - PI.sqrt() / 2.0 * nd * 2.0).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn zero_gamma_matches_mixed_a1(nf in 1usize..=4, rank_frac in 0.0f64..=1.0, vol in 0.1f64..10.0, n in 2usize..=4) {
        let rank = ((nf as f64) * rank_frac).round() as usize;
        let s = ObliqueSymbol {
            n,
            gammas: vec![CMatrix::zeros(nf, nf); n - 1],
            boundary_metric: DMatrix::identity(n - 1, n - 1),
            pi: projector(&CMatrix::identity(nf, nf), rank),
        };
        let ggs = ggs_a1(&s, GammaMethod::Commuting, nf, vol, rank as f64).unwrap();
        let geom = GeometryData {
            n,
            fiber_dim: nf,
            vol_m: 1.0,
            int_r: 0.0,
            int_tr_q: 0.0,
            boundary: vec![BoundaryData { vol, tr_pi: rank as f64, int_k: 0.0, int_tr_pi_s: 0.0, kind: BoundaryKind::Mixed }],
            sigma0_vol: 0.0,
            zaremba_alpha: -1.0,
        };
        let mixed = heat_coefficients(&geom).unwrap()[1];
        prop_assert!((ggs - mixed).abs() <= 1e-14 * mixed.abs().max(1.0));
    }
}

fn interval_geometry(left: BoundaryCondition, right: BoundaryCondition) -> GeometryData {
    let end = |bc: BoundaryCondition| match bc {
        BoundaryCondition::Dirichlet => BoundaryData { vol: 1.0, tr_pi: 0.0, int_k: 0.0, int_tr_pi_s: 0.0, kind: BoundaryKind::Mixed },
        BoundaryCondition::Neumann => BoundaryData { vol: 1.0, tr_pi: 1.0, int_k: 0.0, int_tr_pi_s: 0.0, kind: BoundaryKind::Mixed },
        BoundaryCondition::Robin(s) => BoundaryData { vol: 1.0, tr_pi: 1.0, int_k: 0.0, int_tr_pi_s: s, kind: BoundaryKind::Mixed },
    };
    GeometryData {
        n: 1,
        fiber_dim: 1,
        vol_m: PI,
        int_r: 0.0,
        int_tr_q: 0.0,
        boundary: vec![end(left), end(right)],
        sigma0_vol: 0.0,
        zaremba_alpha: -1.0,
    }
}

#[test]
fn fitted_interval_coefficients_match_catalog() {
    use BoundaryCondition::*;
    let cases = [(Dirichlet, Dirichlet), (Neumann, Neumann), (Dirichlet, Neumann), (Robin(1.0), Robin(1.0)), (Robin(0.5), Dirichlet)];
    for (l, r) in cases {
        let model = ModelOperator::Interval { length: PI, left: l, right: r };
        let spec = eigenvalues(&model, 4.0e5).unwrap();
        let samples: Vec<(f64, f64)> = (0..14)
            .map(|i| {
                let t = 1e-3 * 1.3f64.powi(i);
                (t, classical_trace(&spec, t, 1e-14).unwrap().value)
            })
            .collect();
        let template = powers(&(0..7).map(|k| Rational64::new(k - 1, 2)).collect::<Vec<_>>());
        let fit = expansion_fit(&samples, &template).unwrap();
        let predicted = predicted_trace_coeffs(&interval_geometry(l, r)).unwrap();
        for k in 0..3 {
            let p = Rational64::new(k - 1, 2);
            let want = predicted.coefficient(p, 0).unwrap();
            let got = fit.series.coefficient(p, 0).unwrap();
            let err = if want == 0.0 { got.abs() } else { rel(got, want) };
            assert!(err <= 1e-3, "{l:?}/{r:?} k={k}: fitted {got} predicted {want}");
        }
    }
}

#[test]
fn zaremba_interval_constant_term_vanishes() {
    let mut g = interval_geometry(BoundaryCondition::Dirichlet, BoundaryCondition::Neumann);
    g.boundary[0].kind = BoundaryKind::ZarembaDirichlet;
    g.boundary[1].kind = BoundaryKind::ZarembaRobin;
    let s = predicted_trace_coeffs(&g).unwrap();
    assert_eq!(s.coefficient(Rational64::new(0, 1), 0).unwrap(), 0.0);
}

#[test]
fn circle_catalog_has_mass_term() {
    let g = GeometryData {
        n: 1,
        fiber_dim: 1,
        vol_m: 2.0 * PI,
        int_r: 0.0,
        int_tr_q: 2.0 * PI * 0.7,
        boundary: vec![],
        sigma0_vol: 0.0,
        zaremba_alpha: -1.0,
    };
    let a = heat_coefficients(&g).unwrap();
    assert_eq!(a[1], 0.0);
    assert!((a[2] + 0.7 * 2.0 * PI).abs() < 1e-15);
}
