//! The low-frequency space `B_0` and the data norms `H~^sigma`.

use super::optimizer::{
    reweight, smooth_norm, ConvexTerm, SplitEffort, SplitOptions, SplitProblem,
};
use super::report::{BreakdownRow, NormReport, SplitDecomposition};
use super::shells::{for_each_low_cutoff, low_weight, KP_MIN, SUPPORT_TOL};
use crate::dyadic::{covering_index, eta, eta0};
use crate::error::{LabError, Result};
use crate::spectral::{forward_transform, inverse_transform, FrequencyGrid, SpectralField, C64};

const SLOTS: usize = (3 - KP_MIN) as usize;

/// `||F^{-1} g||_{L^1_x}`.
struct L1Term {
    grid: FrequencyGrid,
}

impl L1Term {
    /// `(1 / (L dx)) F[h]`, the adjoint of the inverse transform.
    fn adjoint(&self, h: &[C64]) -> Vec<C64> {
        let back = forward_transform(self.grid, h).expect("length matches");
        let s = 1.0 / (self.grid.period() * self.grid.dx());
        back.coeffs().iter().map(|b| b * s).collect()
    }
}

impl ConvexTerm for L1Term {
    fn linearize(&self, v: &[C64], mu: f64) -> (f64, f64, Vec<f64>) {
        let a = inverse_transform(
            &SpectralField::new(self.grid, v.to_vec()).expect("finite coefficients"),
        );
        let dx = self.grid.dx();
        let exact = dx * a.iter().map(|z| z.norm()).sum::<f64>();
        let smoothed = dx * a.iter().map(|z| smooth_norm(z.norm_sqr(), mu)).sum::<f64>();
        let coef = a.iter().map(|z| reweight(dx, z.norm_sqr(), mu)).collect();
        (exact, smoothed, coef)
    }

    fn apply(&self, c: &[f64], u: &[C64]) -> Vec<C64> {
        let a = inverse_transform(
            &SpectralField::new(self.grid, u.to_vec()).expect("finite coefficients"),
        );
        let h: Vec<C64> = a.iter().zip(c).map(|(z, w)| z * *w).collect();
        self.adjoint(&h)
    }

    fn diagonal(&self, c: &[f64]) -> Vec<f64> {
        // H is circulant: every diagonal entry is sum c / L^2.
        let l = self.grid.period();
        vec![c.iter().sum::<f64>() / (l * l); self.grid.len()]
    }

    fn peak(&self, v: &[C64]) -> f64 {
        let a = inverse_transform(
            &SpectralField::new(self.grid, v.to_vec()).expect("finite coefficients"),
        );
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `sum_{k'} 2^{-k'/2} ||chi_{k'} h||_{L^2}` with the residual cell at `xi = 0`.
struct WeightedL2Term {
    grid: FrequencyGrid,
}

impl WeightedL2Term {
    fn masses(&self, v: &[C64]) -> Vec<f64> {
        let mut m = vec![0.0; SLOTS];
        for (i, z) in v.iter().enumerate() {
            let a = z.norm_sqr();
            if a == 0.0 {
                continue;
            }
            for_each_low_cutoff(self.grid.xi(i), |slot, _, c| m[slot] += c * c * a);
        }
        let dxi = self.grid.dxi();
        m.iter_mut().for_each(|x| *x *= dxi);
        m
    }

    fn weight(slot: usize) -> f64 {
        low_weight(KP_MIN - 1 + slot as i32)
    }
}

impl ConvexTerm for WeightedL2Term {
    fn linearize(&self, v: &[C64], mu: f64) -> (f64, f64, Vec<f64>) {
        let m = self.masses(v);
        let exact = m
            .iter()
            .enumerate()
            .map(|(s, x)| Self::weight(s) * x.sqrt())
            .sum();
        let smoothed = m
            .iter()
            .enumerate()
            .map(|(s, &x)| Self::weight(s) * smooth_norm(x, mu))
            .sum();
        let dxi = self.grid.dxi();
        let coef = m
            .iter()
            .enumerate()
            .map(|(s, &x)| dxi * reweight(Self::weight(s), x, mu))
            .collect();
        (exact, smoothed, coef)
    }

    fn apply(&self, c: &[f64], u: &[C64]) -> Vec<C64> {
        let d = self.diagonal(c);
        u.iter().zip(d).map(|(z, w)| z * w).collect()
    }

    fn diagonal(&self, c: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let mut acc = 0.0;
                for_each_low_cutoff(self.grid.xi(i), |slot, _, w| acc += c[slot] * w * w);
                acc
            })
            .collect()
    }

    fn peak(&self, v: &[C64]) -> f64 {
        self.masses(v).into_iter().fold(0.0, f64::max).sqrt()
    }
}

fn check_low_support(f: &SpectralField) -> Result<()> {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (i, z) in f.coeffs().iter().enumerate() {
        if f.grid().xi(i).abs() <= 2.0 {
            inside += z.norm_sqr();
        } else {
            outside += z.norm_sqr();
        }
    }
    let total = inside + outside;
    if total > 0.0 && (outside / total).sqrt() > SUPPORT_TOL {
        return Err(LabError::Support {
            shell: "B_0: [-2,2]".into(),
            mass: (outside / total).sqrt(),
            tol: SUPPORT_TOL,
        });
    }
    Ok(())
}

/// `B_0` norm with default optimizer settings.
pub fn b0_norm(f: &SpectralField) -> Result<NormReport> {
    b0_norm_with(f, &SplitOptions::default()).map(|(r, _)| r)
}

/// `B_0` norm of Fourier-side data `f` supported in `[-2, 2]`, with the
/// splitting `f = g + h` (`g` measured in `L^1_x`, `h` in the weighted
/// `L^2_xi` sum). The value is an upper bound on the infimum.
pub fn b0_norm_with(
    f: &SpectralField,
    opts: &SplitOptions,
) -> Result<(NormReport, SplitDecomposition<SpectralField>)> {
    check_low_support(f)?;
    let grid = *f.grid();
    let l1 = L1Term { grid };
    let wl2 = WeightedL2Term { grid };
    let mask: Vec<bool> = (0..grid.len()).map(|i| grid.xi(i).abs() <= 2.0).collect();
    let problem = SplitProblem {
        target: f.coeffs(),
        a: &l1,
        b: &wl2,
        mask: &mask,
        b_admits_target: true,
    };
    let out = problem.solve(opts);
    let h = SpectralField::new(grid, out.part_b)?;
    let g = f.sub(&h)?;
    let g_val = l1.eval(g.coeffs(), 0.0, None).0;
    let masses = wl2.masses(h.coeffs());
    let mut rows = vec![BreakdownRow::named("L1", g_val)];
    for (slot, m) in masses.iter().enumerate() {
        if *m > 0.0 {
            let kp = KP_MIN - 1 + slot as i32;
            let label = if slot == 0 {
                "residual".to_string()
            } else {
                format!("k'={kp}")
            };
            rows.push(BreakdownRow {
                label,
                k: Some(kp),
                j: None,
                value: WeightedL2Term::weight(slot) * m.sqrt(),
            });
        }
    }
    let mut report = NormReport::new("B_0", out.objective, rows);
    report.optimizer = Some(out.status);
    Ok((
        report,
        SplitDecomposition {
            part_a: g,
            part_b: h,
            objective: out.objective,
        },
    ))
}

/// `H~^sigma` norm with default optimizer settings.
pub fn hsigma_tilde_norm(phi: &SpectralField, sigma: f64) -> Result<NormReport> {
    hsigma_tilde_norm_with(phi, sigma, &SplitOptions::default())
}

/// `H~^sigma` norm of data given by its Fourier coefficients: the `B_0` norm
/// of `eta0 * F(phi)` combined in `l^2` with the weighted shell norms.
pub fn hsigma_tilde_norm_with(
    phi: &SpectralField,
    sigma: f64,
    opts: &SplitOptions,
) -> Result<NormReport> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(LabError::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let grid = *phi.grid();
    let low = phi.map(|xi, c| c * eta0(xi));
    let (b0, _) = b0_norm_with(&low, opts)?;
    let l_max = covering_index(grid.xi_max());
    let mut rows = vec![BreakdownRow::shell(0, b0.value)];
    let mut sum = b0.value * b0.value;
    for k in 1..=l_max {
        let m: f64 = phi
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| (eta(k, grid.xi(i)) * c.norm()).powi(2))
            .sum::<f64>()
            * grid.dxi();
        let term = 2f64.powf(sigma * f64::from(k)) * m.sqrt();
        rows.push(BreakdownRow::shell(k, term));
        sum += term * term;
    }
    let mut report = NormReport::new(format!("H~^{sigma}"), sum.sqrt(), rows);
    if opts.effort == SplitEffort::Optimize {
        report.optimizer = b0.optimizer;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{chi, psi};

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(128.0, 256).unwrap()
    }

    #[test]
    fn zero_data() {
        let z = SpectralField::zeros(grid());
        assert_eq!(b0_norm(&z).unwrap().value, 0.0);
        assert_eq!(hsigma_tilde_norm(&z, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn negative_sigma_rejected() {
        let z = SpectralField::zeros(grid());
        assert!(matches!(
            hsigma_tilde_norm(&z, -0.5),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn support_violation() {
        let f = SpectralField::from_symbol(grid(), |xi| C64::new(psi(xi - 3.0), 0.0));
        assert!(matches!(b0_norm(&f), Err(LabError::Support { .. })));
    }

    #[test]
    fn below_both_baselines() {
        let f = SpectralField::from_symbol(grid(), |xi| C64::new(psi(xi / 1.2), 0.3 * chi(-1, xi)));
        let (r, split) = b0_norm_with(&f, &SplitOptions::default()).unwrap();
        let st = r.optimizer.clone().unwrap();
        assert!(r.value <= st.baseline_a.min(st.baseline_b) + 1e-10);
        let back = split.part_a.add(&split.part_b).unwrap();
        assert!(back.sub(&f).unwrap().l2_norm() <= 1e-10 * f.l2_norm());
    }

    #[test]
    fn shell_five_unit_mass() {
        let g = FrequencyGrid::new(64.0, 1024).unwrap();
        // Inside eta_5's plateau: |xi| in [25, 40].
        let f = SpectralField::from_symbol(g, |xi| C64::new(psi((xi - 32.0) / 4.0), 0.0));
        let f = f.scale(C64::new(1.0 / f.l2_norm(), 0.0));
        let r = hsigma_tilde_norm(&f, 1.0).unwrap();
        assert!((r.value - 32.0).abs() < 1e-9, "{}", r.value);
        assert!(r.value >= hsigma_tilde_norm(&f, 0.0).unwrap().value);
    }

    #[test]
    fn l1_gradient_matches_finite_difference() {
        let g = FrequencyGrid::new(16.0, 32).unwrap();
        let t = L1Term { grid: g };
        let v: Vec<C64> = (0..32)
            .map(|i| C64::new((i as f64).sin(), (0.3 * i as f64).cos()))
            .collect();
        let mu = 1e-3;
        let mut gr = vec![C64::new(0.0, 0.0); 32];
        let (_, f0) = t.eval(&v, mu, Some(&mut gr));
        for &i in &[1usize, 7, 20] {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut w = v.clone();
                w[i] += dir * 1e-7;
                let fd = (t.eval(&w, mu, None).1 - f0) / 1e-7;
                let an = (gr[i].conj() * dir).re;
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "fd {fd} an {an}");
            }
        }
    }

    #[test]
    fn l1_diagonal_matches_unit_responses() {
        let g = FrequencyGrid::new(16.0, 32).unwrap();
        let t = L1Term { grid: g };
        let c: Vec<f64> = (0..32)
            .map(|i| 1.0 + (i as f64 * 0.7).sin().abs())
            .collect();
        let d = t.diagonal(&c);
        for i in [0usize, 5, 16, 31] {
            let mut e = vec![C64::new(0.0, 0.0); 32];
            e[i] = C64::new(1.0, 0.0);
            let h = t.apply(&c, &e)[i];
            assert!(
                (h.re - d[i]).abs() < 1e-12 * d[i] && h.im.abs() < 1e-12 * d[i],
                "{h} vs {}",
                d[i]
            );
        }
    }

    #[test]
    fn planted_splitting_is_recovered() {
        // g1 is narrow near xi = 1.5 (cheap on the weighted side, spread in x);
        // g2 fills [-2, 2] (cheap in L^1, ruinous on the weighted side).
        let g = FrequencyGrid::new(512.0, 256).unwrap();
        let g1 = SpectralField::from_symbol(g, |xi| C64::new(3.0 * psi((xi - 1.5) / 0.03), 0.0));
        let g2 = SpectralField::from_symbol(g, |xi| C64::new(eta0(xi), 0.0));
        let planted = WeightedL2Term { grid: g }.eval(g1.coeffs(), 0.0, None).0
            + L1Term { grid: g }.eval(g2.coeffs(), 0.0, None).0;
        let (r, _) = b0_norm_with(&g1.add(&g2).unwrap(), &SplitOptions::default()).unwrap();
        let st = r.optimizer.unwrap();
        assert!(planted < 0.6 * st.baseline_a.min(st.baseline_b));
        assert!(
            r.value <= 1.05 * planted,
            "{} vs planted {planted}",
            r.value
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn field(re: &[f64], im: &[f64]) -> SpectralField {
            let g = grid();
            let c = (0..g.len())
                .map(|i| C64::new(re[i % re.len()], im[i % im.len()]) * eta0(g.xi(i)))
                .collect();
            SpectralField::new(g, c).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn baseline_b0_is_homogeneous_and_below_l1(
                re in prop::collection::vec(-1.0f64..1.0, 7),
                im in prop::collection::vec(-1.0f64..1.0, 5),
                lambda in 0.1f64..10.0,
            ) {
                let opts = SplitOptions::baselines();
                let f = field(&re, &im);
                let nf = b0_norm_with(&f, &opts).unwrap().0.value;
                let scaled = b0_norm_with(&f.scale(C64::new(0.0, lambda)), &opts).unwrap().0.value;
                prop_assert!((scaled - lambda * nf).abs() <= 1e-10 * (1.0 + scaled));
                prop_assert!(nf <= f.l1_physical() * (1.0 + 1e-12));
            }

            #[test]
            fn hsigma_grows_with_sigma(
                re in prop::collection::vec(-1.0f64..1.0, 7),
                im in prop::collection::vec(-1.0f64..1.0, 5),
            ) {
                let opts = SplitOptions::baselines();
                let f = field(&re, &im);
                let h0 = hsigma_tilde_norm_with(&f, 0.0, &opts).unwrap().value;
                let h1 = hsigma_tilde_norm_with(&f, 1.0, &opts).unwrap().value;
                prop_assert!(h1 >= h0 * (1.0 - 1e-12));
            }
        }
    }
}
