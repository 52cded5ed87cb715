use alloc::format;

use crate::error::{Error, Result};
use crate::grid::{rescale, Grid};
use crate::profiles::Profile;
use crate::solver::SolutionStore;

fn check_mass(store: &SolutionStore, profile: &Profile) -> Result<()> {
    let m = store.initial().mass();
    let pm = profile.mass();
    if (m - pm).abs() > 1e-8 * pm.abs().max(1.0) {
        return Err(Error::Precondition(format!("profile mass {pm} differs from the initial mass {m}")));
    }
    Ok(())
}

/// `t^{(1 - 1/p)/2} |u(t) - u_M(t)|_p`, with the profile sampled at the
/// cell centers of the store's grid.
pub fn renormalized_distance(store: &SolutionStore, profile: &Profile, p: f64, t: f64) -> Result<f64> {
    check_mass(store, profile)?;
    if !(t > 0.0) {
        return Err(Error::range("t", t, "(0, inf)"));
    }
    let u = store.field_at(t)?;
    let w = profile.sample(u.grid(), t)?;
    let d = u.difference(&w)?.lp_norm(p)?;
    let e = if p.is_infinite() { 0.5 } else { 0.5 * (1.0 - 1.0 / p) };
    Ok(libm::pow(t, e) * d)
}

/// `|u_lambda(1) - u_M(1)|_1` on `target`, where
/// `u_lambda(1, x) = lambda u(lambda^2, lambda x)`.
pub fn rescaled_l1_distance(store: &SolutionStore, lambda: f64, profile: &Profile, target: &Grid) -> Result<f64> {
    check_mass(store, profile)?;
    let scaled = rescale(store, lambda, 1.0, target)?;
    let w = profile.sample(target, 1.0)?;
    scaled.difference(&w)?.lp_norm(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{BurgersProfile, HeatProfile};
    use alloc::vec::Vec;

    fn store_of(p: &Profile, g: &Grid, times: &[f64]) -> SolutionStore {
        let fields: Vec<_> = times.iter().map(|t| p.sample(g, *t).unwrap()).collect();
        SolutionStore::from_snapshots(times.to_vec(), fields).unwrap()
    }

    #[test]
    fn self_distance_vanishes() {
        let g = Grid::symmetric(200.0, 20_000).unwrap();
        let p = Profile::Burgers(BurgersProfile::new(1.0, 1.0).unwrap());
        // start late enough that the sampled mass matches to 1e-8
        let times = [0.25, 1.0, 4.0, 16.0, 64.0, 256.0];
        let s = store_of(&p, &g, &times);
        for t in [1.0, 16.0] {
            assert!(renormalized_distance(&s, &p, 1.0, t).unwrap() <= 1e-6);
            assert!(renormalized_distance(&s, &p, 2.0, t).unwrap() <= 1e-6);
        }
        let target = Grid::symmetric(20.0, 4000).unwrap();
        for lambda in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let d = rescaled_l1_distance(&s, lambda, &p, &target).unwrap();
            assert!(d <= 1e-3, "lambda {lambda}: {d}");
        }
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let g = Grid::symmetric(50.0, 5000).unwrap();
        let p = Profile::Heat(HeatProfile::new(1.0, 1.0).unwrap());
        let s = store_of(&p, &g, &[1.0, 2.0]);
        let q = Profile::Heat(HeatProfile::new(2.0, 1.0).unwrap());
        assert!(renormalized_distance(&s, &q, 1.0, 1.5).is_err());
    }

    #[test]
    fn lambda_one_is_plain_distance() {
        let g = Grid::symmetric(30.0, 3000).unwrap();
        let p = Profile::Heat(HeatProfile::new(1.0, 1.0).unwrap());
        let q = Profile::Heat(HeatProfile::new(1.0, 1.2).unwrap());
        let s = store_of(&q, &g, &[0.5, 1.0, 2.0]);
        let plain = s.field_at(1.0).unwrap().difference(&p.sample(&g, 1.0).unwrap()).unwrap().lp_norm(1.0).unwrap();
        let resc = rescaled_l1_distance(&s, 1.0, &p, &g).unwrap();
        assert!((plain - resc).abs() < 1e-12);
    }
}
