//! Local-equilibrium states, field extraction and the closed hydrodynamic
//! system for a one-dimensional fluid in a harmonic trap:
//!
//!   df/dt + d(fv)/dx = 0
//!   dv/dt + v dv/dx = -(1/m) dtheta/dx - (theta/(m f)) df/dx - K x / m
//!   dtheta/dt + v dtheta/dx = -2 theta dv/dx
//!
//! The solver works on the conservative form in (f, f v, E) with
//! E = f (v^2/2 + theta/(2m)) and pressure P = f theta / m. Reconstruction is
//! hydrostatic: within each cell the local isothermal trap equilibrium is
//! extrapolated to the faces and only deviations from it are limited, so the
//! trapped Maxwell-Boltzmann profile is an exact discrete fixed point.

use crate::chain::{ChainParams, GaussianState};
use crate::densities::{DensityField, Grid};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HydroFields {
    /// Cell centers.
    pub grid: Grid,
    pub f: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl HydroFields {
    pub fn new(grid: Grid, f: Vec<f64>, v: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        for (name, a) in [("f", &f), ("v", &v), ("theta", &theta)] {
            if a.len() != grid.len {
                return Err(Error::Dimension {
                    expected: grid.len,
                    got: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} has non-finite entries"
                )));
            }
        }
        if f.iter().any(|&x| x < 0.0) || theta.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput(
                "f and theta must be non-negative".into(),
            ));
        }
        Ok(HydroFields { grid, f, v, theta })
    }

    /// Integral of f.
    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.grid.dx
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::InvalidInput("f has zero total mass".into()));
        }
        for x in &mut self.f {
            *x /= m;
        }
        Ok(())
    }
}

fn trap_only(params: &ChainParams) -> Result<()> {
    params.validate()?;
    if params.has_centers() {
        return Err(Error::InvalidParams(
            "the hydrodynamic inversion is defined for vanishing binding centers".into(),
        ));
    }
    Ok(())
}

/// Trapped Maxwell-Boltzmann profile: v = 0, theta = theta0,
/// f ~ exp(-K x^2 / (2 theta0)) normalized on the cell grid.
pub fn equilibrium_profile(
    params: &ChainParams,
    theta0: f64,
    lo: f64,
    hi: f64,
    cells: usize,
) -> Result<HydroFields> {
    if !(params.binding > 0.0) || !(theta0 > 0.0) {
        return Err(Error::InvalidInput(
            "equilibrium profile needs K > 0 and theta0 > 0".into(),
        ));
    }
    let sigma = (theta0 / params.binding).sqrt();
    if hi - lo < 6.0 * sigma {
        log::warn!("domain [{lo}, {hi}] narrower than 6 sqrt(theta0/K); profile is truncated");
    }
    let grid = Grid::cells(lo, hi, cells)?;
    let norm = (params.binding / (2.0 * std::f64::consts::PI * theta0)).sqrt();
    let f = grid
        .points()
        .iter()
        .map(|x| norm * (-params.binding * x * x / (2.0 * theta0)).exp())
        .collect();
    let mut out = HydroFields::new(grid, f, vec![0.0; cells], vec![theta0; cells])?;
    out.normalize()?;
    Ok(out)
}

fn interp(grid: &Grid, a: &[f64], x: f64) -> f64 {
    let u = (x - grid.x0) / grid.dx;
    if u <= 0.0 {
        return a[0];
    }
    let i = u.floor() as usize;
    if i + 1 >= a.len() {
        return a[a.len() - 1];
    }
    let w = u - i as f64;
    a[i] * (1.0 - w) + a[i + 1] * w
}

/// Product Gaussian state with particle j at the (j - 1/2)/N quantile of f,
/// <p_j> = m v(x_j), (dq_j)^2 = s^2, (dp_j)^2 = m theta(x_j) + 1/(4 s^2).
pub fn build_local_equilibrium(
    fields: &HydroFields,
    params: &ChainParams,
    s: f64,
) -> Result<GaussianState> {
    params.validate()?;
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "width must be positive, got {s}"
        )));
    }
    let total = fields.mass();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("f has zero total mass".into()));
    }
    let g = &fields.grid;
    let n = params.n();
    let m = params.mass;
    // piecewise-constant density, so the CDF is linear inside each cell
    let mut edges = Vec::with_capacity(g.len + 1);
    edges.push(0.0);
    for &fi in &fields.f {
        edges.push(edges.last().unwrap() + fi * g.dx / total);
    }
    let lo = g.x0 - 0.5 * g.dx;
    let mut xs = Vec::with_capacity(n);
    let mut cell = 0;
    for j in 0..n {
        let target = (j as f64 + 0.5) / n as f64;
        while cell + 1 < g.len && edges[cell + 1] < target {
            cell += 1;
        }
        let span = edges[cell + 1] - edges[cell];
        let w = if span > 0.0 {
            (target - edges[cell]) / span
        } else {
            0.5
        };
        xs.push(lo + (cell as f64 + w) * g.dx);
    }
    let mean_x: f64 = xs.iter().sum::<f64>() / n as f64;
    let spread = (xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / n as f64).sqrt();
    if s > spread {
        log::warn!("width {s} exceeds the spread {spread} of the particle positions");
    }
    let floor = 0.25 / (s * s);
    let p: Vec<f64> = xs.iter().map(|&x| m * interp(g, &fields.v, x)).collect();
    let vp: Vec<f64> = xs
        .iter()
        .map(|&x| m * interp(g, &fields.theta, x).max(0.0) + floor)
        .collect();
    GaussianState::product(&xs, &p, &vec![s * s; n], &vp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extracted {
    pub fields: HydroFields,
    /// True where n is above the retention floor.
    pub mask: Vec<bool>,
    /// Cells where theta came out below -1e-6 and was clamped to zero.
    pub flagged: Vec<usize>,
}

/// f = n/N, v = g/(m n), theta = 2h/n - m v^2 - K x^2 on cells with
/// n > mask_rel * max(n). Masked cells get v = theta = 0.
pub fn extract_fields(
    field: &DensityField,
    params: &ChainParams,
    mask_rel: f64,
) -> Result<Extracted> {
    trap_only(params)?;
    let nn = params.n() as f64;
    let m = params.mass;
    let nmax = field.n.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = mask_rel * nmax;
    let len = field.grid.len;
    let (mut f, mut v, mut theta) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut mask = vec![false; len];
    let mut flagged = Vec::new();
    for i in 0..len {
        let n = field.n[i];
        f[i] = n / nn;
        if n > floor && n > 0.0 {
            mask[i] = true;
            let x = field.grid.x(i);
            v[i] = field.g[i] / (m * n);
            let th = 2.0 * field.h[i] / n - m * v[i] * v[i] - params.binding * x * x;
            if th < -1e-6 {
                flagged.push(i);
            }
            theta[i] = th.max(0.0);
        }
    }
    if !flagged.is_empty() {
        log::warn!(
            "{} cells with negative extracted temperature clamped",
            flagged.len()
        );
    }
    Ok(Extracted {
        fields: HydroFields {
            grid: field.grid.clone(),
            f,
            v,
            theta,
        },
        mask,
        flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Ghost cells continue the local isothermal trap equilibrium.
    Hydrostatic,
    /// Periodic domain; requires K = 0.
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HydroConfig {
    pub cfl: f64,
    pub boundary: Boundary,
    /// Density floor relative to max f.
    pub density_floor: f64,
    /// Pressure floor f T_atm with T_atm = temperature_floor * max(theta)/m at start.
    pub temperature_floor: f64,
    /// Cells below sponge * max f have v reset to 0 and T clipped to the active range.
    pub sponge: f64,
    pub min_dt: f64,
}

impl Default for HydroConfig {
    fn default() -> Self {
        HydroConfig {
            cfl: 0.4,
            boundary: Boundary::Hydrostatic,
            density_floor: 1e-14,
            temperature_floor: 1e-6,
            sponge: 1e-6,
            min_dt: 1e-12,
        }
    }
}

impl HydroConfig {
    pub fn scheme(&self) -> &'static str {
        "LLF-RK2"
    }
}

type State = [Vec<f64>; 3];

#[derive(Clone, Debug)]
pub struct HydroSolver {
    grid: Grid,
    mass: f64,
    binding: f64,
    cfg: HydroConfig,
    t_atm: f64,
    u: State,
    t: f64,
    steps: usize,
}

fn mc_limiter(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else {
        a.signum() * (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs())
    }
}

struct Prim {
    f: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
}

impl HydroSolver {
    pub fn new(fields: &HydroFields, params: &ChainParams, cfg: HydroConfig) -> Result<Self> {
        trap_only(params)?;
        if !(cfg.cfl > 0.0 && cfg.cfl < 1.0) {
            return Err(Error::InvalidInput(format!(
                "cfl must lie in (0, 1), got {}",
                cfg.cfl
            )));
        }
        if cfg.boundary == Boundary::Periodic && params.binding != 0.0 {
            return Err(Error::InvalidInput("periodic boundaries need K = 0".into()));
        }
        let m = params.mass;
        let n = fields.grid.len;
        let mut u: State = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let (f, v, th) = (fields.f[i], fields.v[i], fields.theta[i]);
            u[0][i] = f;
            u[1][i] = f * v;
            u[2][i] = f * (0.5 * v * v + th / (2.0 * m));
        }
        let thmax = fields.theta.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(HydroSolver {
            grid: fields.grid.clone(),
            mass: m,
            binding: params.binding,
            t_atm: cfg.temperature_floor * thmax / m,
            cfg,
            u,
            t: 0.0,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &HydroConfig {
        &self.cfg
    }

    pub fn mass(&self) -> f64 {
        self.u[0].iter().sum::<f64>() * self.grid.dx
    }

    fn phi(&self, x: f64) -> f64 {
        self.binding * x * x / (2.0 * self.mass)
    }

    /// exp(-(phi(x) - phi(x0)) / temp), clipped to avoid overflow.
    fn eq_factor(&self, x: f64, x0: f64, temp: f64) -> f64 {
        if self.binding == 0.0 {
            return 1.0;
        }
        let d = self.phi(x) - self.phi(x0);
        (-d / temp.max(1e-300)).clamp(-50.0, 50.0).exp()
    }

    fn primitives(&self, u: &State) -> Prim {
        let n = u[0].len();
        let fmax = u[0].iter().fold(0.0f64, |a, &b| a.max(b));
        let fl = self.cfg.density_floor * fmax;
        let mut f = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for i in 0..n {
            let ok = u[0][i] > fl;
            f[i] = if ok {
                u[0][i]
            } else {
                fl.max(f64::MIN_POSITIVE)
            };
            v[i] = if ok { u[1][i] / f[i] } else { 0.0 };
            p[i] = (2.0 * (u[2][i] - 0.5 * f[i] * v[i] * v[i]))
                .max(f[i] * self.t_atm)
                .max(0.0);
        }
        Prim { f, v, p }
    }

    /// Semi-discrete operator dU/dt and the maximum signal speed.
    fn operator(&self, u: &State) -> (State, f64) {
        let n = self.grid.len;
        let dx = self.grid.dx;
        let pr = self.primitives(u);
        const G: usize = 2;
        let ne = n + 2 * G;
        let mut xg = vec![0.0; ne];
        let (mut fg, mut vg, mut pg, mut tg) =
            (vec![0.0; ne], vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]);
        for e in 0..ne {
            xg[e] = self.grid.x0 + (e as f64 - G as f64) * dx;
        }
        for i in 0..n {
            fg[i + G] = pr.f[i];
            vg[i + G] = pr.v[i];
            pg[i + G] = pr.p[i];
            tg[i + G] = pr.p[i] / pr.f[i];
        }
        for k in 0..G {
            match self.cfg.boundary {
                Boundary::Periodic => {
                    for (dst, src) in [(k, n + k), (n + G + k, G + k)] {
                        fg[dst] = fg[src];
                        vg[dst] = vg[src];
                        pg[dst] = pg[src];
                        tg[dst] = tg[src];
                    }
                }
                Boundary::Hydrostatic => {
                    for (dst, src) in [(k, G), (ne - 1 - k, n + G - 1)] {
                        let fac = self.eq_factor(xg[dst], xg[src], tg[src]);
                        fg[dst] = fg[src] * fac;
                        pg[dst] = pg[src] * fac;
                        vg[dst] = vg[src];
                        tg[dst] = tg[src];
                    }
                }
            }
        }

        // face states of cells 1..ne-1 in the extended array
        let nr = ne - 2;
        let (mut fl_, mut fr_) = (vec![0.0; nr], vec![0.0; nr]);
        let (mut pl_, mut pr_) = (vec![0.0; nr], vec![0.0; nr]);
        let (mut vl_, mut vr_) = (vec![0.0; nr], vec![0.0; nr]);
        let mut ex_l = vec![0.0; nr];
        let mut ex_r = vec![0.0; nr];
        for r in 0..nr {
            let i = r + 1;
            let ti = tg[i];
            let em = self.eq_factor(xg[i - 1], xg[i], ti);
            let ep = self.eq_factor(xg[i + 1], xg[i], ti);
            let sf = mc_limiter(fg[i] * em - fg[i - 1], fg[i + 1] - fg[i] * ep);
            let sp = mc_limiter(pg[i] * em - pg[i - 1], pg[i + 1] - pg[i] * ep);
            let sv = mc_limiter(vg[i] - vg[i - 1], vg[i + 1] - vg[i]);
            let er = self.eq_factor(xg[i] + 0.5 * dx, xg[i], ti);
            let el = self.eq_factor(xg[i] - 0.5 * dx, xg[i], ti);
            ex_r[r] = er;
            ex_l[r] = el;
            let (mut a, mut b) = (fg[i] * el - 0.5 * sf, fg[i] * er + 0.5 * sf);
            let (mut c, mut d) = (pg[i] * el - 0.5 * sp, pg[i] * er + 0.5 * sp);
            let (mut e, mut g) = (vg[i] - 0.5 * sv, vg[i] + 0.5 * sv);
            if a <= 0.0 || b <= 0.0 || c < 0.0 || d < 0.0 {
                a = fg[i] * el;
                b = fg[i] * er;
                c = pg[i] * el;
                d = pg[i] * er;
                e = vg[i];
                g = vg[i];
            }
            fl_[r] = a;
            fr_[r] = b;
            pl_[r] = c;
            pr_[r] = d;
            vl_[r] = e;
            vr_[r] = g;
        }

        let m = self.mass;
        let flux = |f: f64, v: f64, p: f64| -> ([f64; 3], [f64; 3]) {
            let e = 0.5 * f * v * v + 0.5 * p;
            ([f * v, f * v * v + p, v * (e + p)], [f, f * v, e])
        };
        let speed = |f: f64, v: f64, p: f64| v.abs() + (3.0 * p.max(0.0) / f.max(1e-300)).sqrt();
        let mut fh = vec![[0.0; 3]; nr - 1];
        for c in 0..nr - 1 {
            let (fa, ua) = flux(fr_[c], vr_[c], pr_[c]);
            let (fb, ub) = flux(fl_[c + 1], vl_[c + 1], pl_[c + 1]);
            let a = speed(fr_[c], vr_[c], pr_[c]).max(speed(fl_[c + 1], vl_[c + 1], pl_[c + 1]));
            for q in 0..3 {
                fh[c][q] = 0.5 * (fa[q] + fb[q]) - 0.5 * a * (ub[q] - ua[q]);
            }
        }

        let mut du: State = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut amax = 0.0f64;
        for j in 0..n {
            let r = j + 1;
            for q in 0..3 {
                du[q][j] = -(fh[r][q] - fh[r - 1][q]) / dx;
            }
            let src = pr.p[j] * (ex_r[r] - ex_l[r]) / dx;
            du[1][j] += src;
            du[2][j] += pr.v[j] * src;
            amax = amax.max(speed(pr.f[j], pr.v[j], pr.p[j]));
        }
        let _ = m;
        (du, amax)
    }

    fn fix(&self, u: &mut State) {
        let pr = self.primitives(u);
        let n = u[0].len();
        let fmax = pr.f.iter().fold(0.0f64, |a, &b| a.max(b));
        let sp = self.cfg.sponge * fmax;
        let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            if pr.f[i] >= sp {
                let t = pr.p[i] / pr.f[i];
                tmin = tmin.min(t);
                tmax = tmax.max(t);
            }
        }
        for i in 0..n {
            let f = pr.f[i];
            let (mut v, mut t) = (pr.v[i], pr.p[i] / f);
            if f < sp && tmin <= tmax {
                v = 0.0;
                t = t.clamp(tmin, tmax);
            }
            u[0][i] = f;
            u[1][i] = f * v;
            u[2][i] = 0.5 * f * v * v + 0.5 * f * t;
        }
    }

    fn check_finite(&self, u: &State) -> Result<()> {
        if u.iter().any(|a| a.iter().any(|x| !x.is_finite())) {
            return Err(Error::Solver {
                t: self.t,
                reason: "non-finite state".into(),
            });
        }
        Ok(())
    }

    /// One Heun step of size min(cfl dx / max signal speed, max_dt).
    pub fn step(&mut self, max_dt: f64) -> Result<f64> {
        let (d1, amax) = self.operator(&self.u);
        let mut dt = if amax > 0.0 {
            self.cfg.cfl * self.grid.dx / amax
        } else {
            max_dt
        };
        dt = dt.min(max_dt);
        if !(dt >= self.cfg.min_dt) {
            return Err(Error::Solver {
                t: self.t,
                reason: format!("step collapse: dt = {dt}, max signal speed {amax}"),
            });
        }
        let n = self.grid.len;
        let mut u1 = self.u.clone();
        for q in 0..3 {
            for i in 0..n {
                u1[q][i] += dt * d1[q][i];
            }
        }
        self.fix(&mut u1);
        self.check_finite(&u1)?;
        let (d2, _) = self.operator(&u1);
        let mut u2 = self.u.clone();
        for q in 0..3 {
            for i in 0..n {
                u2[q][i] = 0.5 * (self.u[q][i] + u1[q][i] + dt * d2[q][i]);
            }
        }
        self.fix(&mut u2);
        self.check_finite(&u2)?;
        self.u = u2;
        self.t += dt;
        self.steps += 1;
        Ok(dt)
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.t < t {
            let rem = t - self.t;
            self.step(rem)?;
            if t - self.t < 1e-12 * t.abs().max(1.0) {
                self.t = t;
            }
        }
        Ok(())
    }

    pub fn fields(&self) -> HydroFields {
        let pr = self.primitives(&self.u);
        let theta =
            pr.p.iter()
                .zip(&pr.f)
                .map(|(p, f)| p * self.mass / f)
                .collect();
        HydroFields {
            grid: self.grid.clone(),
            f: self.u[0].clone(),
            v: pr.v,
            theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HydroRates {
    pub df: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// Cells at the density floor.
    pub floored: Vec<usize>,
}

/// Time derivatives of (f, v, theta) from the semi-discrete operator.
pub fn hydro_rhs(
    fields: &HydroFields,
    params: &ChainParams,
    cfg: &HydroConfig,
) -> Result<HydroRates> {
    let solver = HydroSolver::new(fields, params, cfg.clone())?;
    let (du, _) = solver.operator(&solver.u);
    let pr = solver.primitives(&solver.u);
    let m = params.mass;
    let fmax = fields.f.iter().fold(0.0f64, |a, &b| a.max(b));
    let n = fields.grid.len;
    let mut rates = HydroRates {
        df: vec![0.0; n],
        dv: vec![0.0; n],
        dtheta: vec![0.0; n],
        floored: Vec::new(),
    };
    for i in 0..n {
        if fields.f[i] <= cfg.density_floor * fmax {
            rates.floored.push(i);
        }
        let (f, v) = (pr.f[i], pr.v[i]);
        let th = pr.p[i] * m / f;
        rates.df[i] = du[0][i];
        rates.dv[i] = (du[1][i] - v * du[0][i]) / f;
        rates.dtheta[i] = 2.0 * m / f
            * (du[2][i] - v * du[1][i] + 0.5 * v * v * du[0][i] - th / (2.0 * m) * du[0][i]);
    }
    Ok(rates)
}

#[derive(Clone, Debug)]
pub struct HydroTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<HydroFields>,
    pub steps: usize,
}

/// Integrates to each requested output time (ascending) and samples the fields.
pub fn hydro_evolve(
    fields: &HydroFields,
    params: &ChainParams,
    cfg: &HydroConfig,
    output_times: &[f64],
) -> Result<HydroTrajectory> {
    if output_times.iter().any(|&t| !(t >= 0.0)) || output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(
            "output times must be non-negative and ascending".into(),
        ));
    }
    let mut solver = HydroSolver::new(fields, params, cfg.clone())?;
    let mut frames = Vec::with_capacity(output_times.len());
    for &t in output_times {
        solver.advance_to(t)?;
        frames.push(solver.fields());
    }
    Ok(HydroTrajectory {
        times: output_times.to_vec(),
        frames,
        steps: solver.steps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap() -> ChainParams {
        ChainParams::new(100, 1.0, 0.0, 1.0)
    }

    #[test]
    fn unit_profile_peak() {
        let h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, 1601).unwrap();
        let mid = h.grid.len / 2;
        assert!(h.grid.x(mid).abs() < 1e-12);
        assert!((h.f[mid] - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-8);
        assert!((h.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_rhs() {
        let h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, 321).unwrap();
        let r = hydro_rhs(&h, &trap(), &HydroConfig::default()).unwrap();
        for i in 1..h.grid.len - 1 {
            assert!(r.df[i].abs() <= 1e-10);
            assert!(r.dv[i].abs() <= 1e-10, "{i}: {}", r.dv[i]);
            assert!(r.dtheta[i].abs() <= 1e-10);
        }
    }

    #[test]
    fn uniform_free_fluid_is_static() {
        let mut p = ChainParams::new(10, 1.0, 0.0, 0.0);
        p.free_evolution = true;
        let g = Grid::cells(0.0, 1.0, 50).unwrap();
        let h = HydroFields::new(g, vec![1.0; 50], vec![0.3; 50], vec![0.7; 50]).unwrap();
        let cfg = HydroConfig {
            boundary: Boundary::Periodic,
            ..Default::default()
        };
        let r = hydro_rhs(&h, &p, &cfg).unwrap();
        assert!(r
            .df
            .iter()
            .chain(&r.dv)
            .chain(&r.dtheta)
            .all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn periodic_needs_free_fluid() {
        let h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, 64).unwrap();
        let cfg = HydroConfig {
            boundary: Boundary::Periodic,
            ..Default::default()
        };
        assert!(HydroSolver::new(&h, &trap(), cfg).is_err());
    }

    #[test]
    fn local_equilibrium_quantiles() {
        let h = equilibrium_profile(&trap(), 1.0, -8.0, 8.0, 801).unwrap();
        let st = build_local_equilibrium(&h, &trap(), 0.5).unwrap();
        assert_eq!(st.n(), 100);
        // symmetric placement and the minimum-uncertainty floor
        assert!((st.q(0) + st.q(99)).abs() < 1e-9);
        assert!((st.q(49) + st.q(50)).abs() < 1e-9);
        assert!((st.var_p(10) - (1.0 + 1.0)).abs() < 1e-12);
        assert_eq!(st.var_q(3), 0.25);
    }

    #[test]
    fn extraction_refuses_centers() {
        let p = ChainParams::new(2, 1.0, 0.0, 1.0).with_centers(vec![0.0, 1.0]);
        let g = Grid::linspace(-1.0, 1.0, 5).unwrap();
        let field = DensityField {
            grid: g,
            window: 1.0,
            n: vec![1.0; 5],
            g: vec![0.0; 5],
            h: vec![1.0; 5],
            tau: vec![0.0; 5],
            j: vec![0.0; 5],
            temperature: vec![None; 5],
            displacement: vec![0.0; 5],
        };
        assert!(extract_fields(&field, &p, 1e-3).is_err());
    }

    #[test]
    fn substitution_example() {
        // n Gaussian, h = (theta0/2 + K x^2/2) n, g = 0
        let p = ChainParams::new(10, 1.0, 0.0, 2.0);
        let g = Grid::linspace(-3.0, 3.0, 61).unwrap();
        let n: Vec<f64> = g.points().iter().map(|x| 10.0 * (-x * x).exp()).collect();
        let h: Vec<f64> = g
            .points()
            .iter()
            .zip(&n)
            .map(|(x, n)| (0.35 + x * x) * n)
            .collect();
        let field = DensityField {
            grid: g.clone(),
            window: 0.5,
            n,
            g: vec![0.0; 61],
            h,
            tau: vec![0.0; 61],
            j: vec![0.0; 61],
            temperature: vec![None; 61],
            displacement: vec![0.0; 61],
        };
        let e = extract_fields(&field, &p, 1e-6).unwrap();
        for i in 0..61 {
            if e.mask[i] {
                assert!((e.fields.theta[i] - 0.7).abs() < 1e-12);
                assert_eq!(e.fields.v[i], 0.0);
            }
        }
    }
}
