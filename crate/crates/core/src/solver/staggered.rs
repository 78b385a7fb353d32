use log::{debug, info};

use super::problem::Problem;
use super::settings::SolverSettings;
use crate::curve::LoadDeflectionCurve;
use crate::error::{Error, Result};
use crate::fem::vtk::FieldSnapshot;
use crate::fem::{Assembler, Energies};
use crate::linalg::{SpdSolver, SymmetricMatrix};

const LINEAR_TOL: f64 = 1e-12;

/// Fields carried from one load step to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFieldState {
    /// Node-major displacement, `dim` components per node.
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    /// Running maximum of ψ₀ per quadrature point.
    pub history: Vec<f64>,
    /// Load level of the last converged step.
    pub ubar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    /// Index into the load schedule; bisected sub-steps share the index of
    /// the step they refine.
    pub step: usize,
    pub ubar: f64,
    /// Reaction along the loading direction, N.
    pub force: f64,
    /// Damage solves performed.
    pub iterations: usize,
    pub elastic: f64,
    pub dissipated: f64,
    pub max_damage: f64,
    /// Internal force summed over the loaded dofs.
    pub load_reaction: f64,
    /// Internal force summed over the held dofs in the loading direction.
    pub support_reaction: f64,
}

impl StepResult {
    /// |load + supports| / |load|; zero when nothing is transmitted.
    pub fn equilibrium_error(&self) -> f64 {
        let sum = (self.load_reaction + self.support_reaction).abs();
        if self.load_reaction == 0.0 { sum } else { sum / self.load_reaction.abs() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementReport {
    pub initial_residual: f64,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageReport {
    /// Active-set iterations; zero when the input already satisfied the
    /// optimality conditions.
    pub iterations: usize,
    /// Largest projected-step length, in units of damage.
    pub residual: f64,
    /// Whether the projected Gauss–Seidel fallback was used.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub curve: LoadDeflectionCurve,
    pub steps: Vec<StepResult>,
    /// (schedule index, fields) at the requested steps.
    pub snapshots: Vec<(usize, FieldSnapshot)>,
    pub stopped_early: bool,
}

/// Quasi-static phase-field solver: displacement and damage are solved
/// alternately at each load level until the displacement residual at the
/// start of an alternation is below the staggered tolerance.
pub struct Simulation {
    problem: Problem,
    settings: SolverSettings,
    assembler: Assembler,
    u_solver: SpdSolver,
    d_solver: SpdSolver,
    u_fixed: Vec<bool>,
    d_pinned: Vec<bool>,
    state: PhaseFieldState,
    /// Largest reaction magnitude seen so far; bounds the residual scale
    /// from below once the specimen has broken.
    peak_scale: f64,
}

impl Simulation {
    pub fn new(problem: Problem, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let assembler = Assembler::new(&problem.mesh, problem.thickness, &problem.tensor)?;
        let map = problem.map();
        let state = PhaseFieldState {
            u: vec![0.0; map.num_displacement()],
            d: vec![0.0; map.num_damage()],
            history: vec![0.0; assembler.num_quadrature_points()],
            ubar: 0.0,
        };
        Ok(Self {
            u_fixed: problem.conditions.displacement_mask(),
            d_pinned: problem.conditions.damage_mask(),
            u_solver: SpdSolver::new(settings.displacement_solver),
            d_solver: SpdSolver::new(settings.damage_solver),
            problem,
            settings,
            assembler,
            state,
            peak_scale: 0.0,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn state(&self) -> &PhaseFieldState {
        &self.state
    }

    /// Replaces the damage field. The new values also become the
    /// irreversibility bound of the next step.
    pub fn set_damage(&mut self, d: Vec<f64>) -> Result<()> {
        if d.len() != self.state.d.len() {
            return Err(Error::Parameter("damage field has the wrong length".into()));
        }
        if d.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("damage values must lie in [0, 1]".into()));
        }
        if d.iter().zip(&self.d_pinned).any(|(v, p)| *p && *v != 0.0) {
            return Err(Error::Domain("pinned nodes must carry zero damage".into()));
        }
        self.state.d = d;
        Ok(())
    }

    pub fn set_history(&mut self, history: Vec<f64>) -> Result<()> {
        if history.len() != self.state.history.len() {
            return Err(Error::Parameter("history has the wrong length".into()));
        }
        if history.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Domain("history must be finite and non-negative".into()));
        }
        self.state.history = history;
        Ok(())
    }

    pub fn snapshot(&self) -> FieldSnapshot {
        FieldSnapshot { displacement: self.state.u.clone(), damage: self.state.d.clone() }
    }

    pub fn energies(&self) -> Energies {
        self.assembler.energies(&self.state.u, &self.state.d, &self.problem.law)
    }

    /// Reaction along the loading direction at the current fields.
    pub fn reaction_force(&self) -> f64 {
        let f = self.assembler.internal_force(&self.state.d, self.problem.law.g0, &self.state.u);
        self.problem.conditions.reaction(&f)
    }

    fn assemble_u(&mut self, ubar: f64) -> Result<(SymmetricMatrix, Vec<f64>)> {
        self.problem.conditions.impose(&mut self.state.u, ubar);
        self.assembler.assemble_displacement(&self.state.d, self.problem.law.g0, &self.state.u)
    }

    /// ∞-norm of the internal force on free dofs.
    fn free_residual(&self, f_int: &[f64]) -> f64 {
        f_int
            .iter()
            .zip(&self.u_fixed)
            .filter(|(_, fixed)| !**fixed)
            .fold(0.0f64, |m, (f, _)| m.max(f.abs()))
    }

    fn residual_floor(&self, k: &SymmetricMatrix) -> f64 {
        let umax = self.state.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (1e-12 * k.norm_inf() * umax).max(1e-14)
    }

    /// Residual on free dofs relative to the force level of the step.
    fn relative_residual(&self, k: &SymmetricMatrix, f_int: &[f64]) -> f64 {
        let r = self.free_residual(f_int);
        if r <= self.residual_floor(k) {
            return 0.0;
        }
        let reaction = f_int
            .iter()
            .zip(&self.u_fixed)
            .filter(|(_, fixed)| **fixed)
            .fold(0.0f64, |m, (f, _)| m.max(f.abs()));
        r / reaction.max(0.1 * self.peak_scale).max(f64::MIN_POSITIVE)
    }

    /// One Newton update of u at fixed damage from the assembled tangent.
    /// The problem is linear in u, so a single update must meet the
    /// tolerance; anything else signals an inaccurate linear solve.
    fn update_displacement(&mut self, mut k: SymmetricMatrix, f_int: Vec<f64>) -> Result<(DisplacementReport, Vec<f64>)> {
        let r0 = self.free_residual(&f_int);
        let floor = self.residual_floor(&k);
        if r0 <= floor {
            return Ok((DisplacementReport { initial_residual: r0, final_residual: r0 }, f_int));
        }
        let tangent = k.clone();
        let mut rhs: Vec<f64> =
            f_int.iter().zip(&self.u_fixed).map(|(f, fixed)| if *fixed { 0.0 } else { -f }).collect();
        let zeros = vec![0.0; rhs.len()];
        k.constrain(&mut rhs, &self.u_fixed, &zeros);
        let mut r1 = r0;
        for _ in 0..self.settings.max_newton_iters {
            let du = self.u_solver.solve(&k, &rhs, LINEAR_TOL)?;
            for ((u, du), fixed) in self.state.u.iter_mut().zip(&du).zip(&self.u_fixed) {
                if !fixed {
                    *u += du;
                }
            }
            let f_new = tangent.mul(&self.state.u);
            r1 = self.free_residual(&f_new);
            if r1 <= (self.settings.newton_tol * r0).max(floor) {
                return Ok((DisplacementReport { initial_residual: r0, final_residual: r1 }, f_new));
            }
            rhs = f_new.iter().zip(&self.u_fixed).map(|(f, fixed)| if *fixed { 0.0 } else { -f }).collect();
        }
        Err(Error::SingularSystem(format!(
            "displacement residual fell only from {r0:e} to {r1:e}; the stiffness is likely \
             ill-conditioned (fully broken ligament or missing support)"
        )))
    }

    /// Equilibrium solve for u at load level `ubar` with damage frozen.
    pub fn solve_displacement_step(&mut self, ubar: f64) -> Result<DisplacementReport> {
        let (k, f) = self.assemble_u(ubar)?;
        let (report, _) = self.update_displacement(k, f)?;
        Ok(report)
    }

    /// ℋ = max(ℋ_n, ψ₀(u)) with ℋ_n the history of the last converged step.
    fn update_history(&mut self, converged: &[f64]) {
        let psi = self.assembler.strain_energy_density(&self.state.u);
        for ((h, p), hn) in self.state.history.iter_mut().zip(psi).zip(converged) {
            *h = p.max(*hn);
        }
    }

    /// Minimizes the damage energy at the current history over
    /// lower ≤ d ≤ 1, with d = 0 on pinned nodes, by a primal–dual
    /// active-set iteration.
    fn solve_damage_bounded(&mut self, lower: &[f64]) -> Result<DamageReport> {
        let (k, f) = self.assembler.assemble_phasefield(&self.state.history, &self.problem.law)?;
        let n = f.len();
        let diag = k.diagonal();
        let lo: Vec<f64> =
            (0..n).map(|i| if self.d_pinned[i] { 0.0 } else { lower[i].clamp(0.0, 1.0) }).collect();
        let hi: Vec<f64> = (0..n).map(|i| if self.d_pinned[i] { 0.0 } else { 1.0 }).collect();
        let mut d: Vec<f64> = (0..n).map(|i| self.state.d[i].clamp(lo[i], hi[i])).collect();
        let tol = self.settings.newton_tol;
        let mut previous: Option<Vec<i8>> = None;
        let mut iterations = 0;
        let mut converged = None;
        loop {
            let r = residual(&k, &f, &d);
            let res = projected_residual(&d, &r, &diag, &lo, &hi);
            if res <= tol {
                converged = Some(res);
                break;
            }
            if iterations == self.settings.max_active_set_iters {
                break;
            }
            // -1 at the lower bound, +1 at the upper bound, 0 free.
            let set: Vec<i8> = (0..n)
                .map(|i| {
                    if lo[i] == hi[i] {
                        return -1;
                    }
                    let trial = d[i] - r[i] / diag[i];
                    if trial <= lo[i] {
                        -1
                    } else if trial >= hi[i] {
                        1
                    } else {
                        0
                    }
                })
                .collect();
            if previous.as_ref() == Some(&set) {
                // Same set twice without convergence: the reduced solve
                // cannot improve further.
                break;
            }
            let fixed: Vec<bool> = set.iter().map(|s| *s != 0).collect();
            let values: Vec<f64> =
                (0..n).map(|i| match set[i] { -1 => lo[i], 1 => hi[i], _ => 0.0 }).collect();
            let mut a = k.clone();
            let mut rhs = f.clone();
            a.constrain(&mut rhs, &fixed, &values);
            iterations += 1;
            match self.d_solver.solve(&a, &rhs, LINEAR_TOL) {
                Ok(sol) => {
                    d = sol;
                    for i in 0..n {
                        if fixed[i] {
                            d[i] = values[i];
                        }
                    }
                }
                Err(e) => {
                    debug!("active-set damage solve failed ({e}); switching to Gauss-Seidel");
                    break;
                }
            }
            previous = Some(set);
        }
        let (res, fallback) = match converged {
            Some(res) => (res, false),
            None => {
                let budget = 50 * self.settings.max_active_set_iters;
                let res = projected_gauss_seidel(&k, &f, &diag, &lo, &hi, &mut d, tol, budget);
                if res > tol {
                    return Err(Error::IterationBudget(format!(
                        "damage problem still has projected residual {res:e} after {iterations} \
                         active-set iterations and {budget} Gauss-Seidel sweeps"
                    )));
                }
                (res, true)
            }
        };
        for i in 0..n {
            self.state.d[i] = d[i].clamp(lo[i], hi[i]);
        }
        Ok(DamageReport { iterations, residual: res, fallback })
    }

    /// Damage update at the current history, bounded below by the present
    /// damage field.
    pub fn solve_phasefield_step(&mut self) -> Result<DamageReport> {
        let lower = self.state.d.clone();
        self.solve_damage_bounded(&lower)
    }

    /// Converges one load level. On success the state holds the new fields
    /// and the returned result describes them.
    pub fn staggered_solve_step(&mut self, ubar: f64) -> Result<StepResult> {
        let lower = self.state.d.clone();
        let history = self.state.history.clone();
        let max = self.settings.max_stagger_iters;
        let mut damage_solves = 0;
        let mut last_residual = f64::INFINITY;
        let mut final_force = None;
        for it in 1..=max + 1 {
            let (k, f_int) = self.assemble_u(ubar)?;
            let rel = self.relative_residual(&k, &f_int);
            let done = it > 1 && rel < self.settings.stagger_tol;
            last_residual = rel;
            let (_, f_new) = self.update_displacement(k, f_int)?;
            self.update_history(&history);
            if done {
                final_force = Some(f_new);
                break;
            }
            if it == max + 1 {
                break;
            }
            self.solve_damage_bounded(&lower)?;
            damage_solves += 1;
        }
        let Some(f_int) = final_force else {
            let dmax = self.state.d.iter().fold(0.0f64, |m, v| m.max(*v));
            return Err(Error::StaggerDivergence(format!(
                "{max} alternations at u = {ubar} mm left relative displacement residual \
                 {last_residual:e} (tolerance {:e}); max damage {dmax:.4}",
                self.settings.stagger_tol
            )));
        };
        self.state.ubar = ubar;
        let c = &self.problem.conditions;
        let force = c.reaction(&f_int);
        let comp = c
            .dofs
            .iter()
            .zip(&c.coef)
            .find(|(_, coef)| **coef != 0.0)
            .map(|(d, _)| d % c.map.dim)
            .unwrap_or(c.map.vertical());
        let load_reaction: f64 =
            c.dofs.iter().zip(&c.coef).filter(|(_, coef)| **coef != 0.0).map(|(d, _)| f_int[*d]).sum();
        let support_reaction = c.support_reaction(&f_int, comp);
        let scale = c.dofs.iter().fold(0.0f64, |m, d| m.max(f_int[*d].abs()));
        self.peak_scale = self.peak_scale.max(scale);
        let energies = self.energies();
        Ok(StepResult {
            step: 0,
            ubar,
            force,
            iterations: damage_solves,
            elastic: energies.elastic,
            dissipated: energies.dissipated,
            max_damage: self.state.d.iter().fold(0.0f64, |m, v| m.max(*v)),
            load_reaction,
            support_reaction,
        })
    }

    /// Advances from the converged level `from` to `to`, halving the
    /// increment when a step fails to converge.
    fn advance(&mut self, from: f64, to: f64, depth: usize, out: &mut Vec<StepResult>) -> Result<()> {
        let saved = self.state.clone();
        match self.staggered_solve_step(to) {
            Ok(r) => {
                out.push(r);
                Ok(())
            }
            Err(e @ (Error::StaggerDivergence(_) | Error::IterationBudget(_)))
                if depth < self.settings.max_bisections =>
            {
                debug!("bisecting [{from}, {to}] after: {e}");
                self.state = saved;
                let mid = 0.5 * (from + to);
                self.advance(from, mid, depth + 1, out)?;
                self.advance(mid, to, depth + 1, out)
            }
            Err(e) => Err(e),
        }
    }

    /// Runs the whole load schedule.
    pub fn run(&mut self) -> Result<SimulationOutput> {
        match self.run_partial() {
            (out, None) => Ok(out),
            (_, Some(e)) => Err(e),
        }
    }

    /// Like `run`, but keeps the converged steps when a later step fails.
    pub fn run_partial(&mut self) -> (SimulationOutput, Option<Error>) {
        let schedule = self.settings.schedule.values().to_vec();
        let mut steps = Vec::new();
        let mut snapshots = Vec::new();
        let mut peak = 0.0f64;
        let mut below = 0;
        let mut stopped_early = false;
        let mut failure = None;
        for (index, &target) in schedule.iter().enumerate() {
            let from = self.state.ubar;
            let mut out = Vec::new();
            if let Err(e) = self.advance(from, target, 0, &mut out) {
                failure = Some(Error::AtStep { step: index, load: target, source: Box::new(e) });
                break;
            }
            for r in out.iter_mut() {
                r.step = index;
            }
            let last = *out.last().expect("advance yields at least one step");
            info!(
                "step {index}: u = {:.5} mm, F = {:.4} N, {} damage solves, max d = {:.4}",
                last.ubar, last.force, last.iterations, last.max_damage
            );
            steps.extend(out);
            if self.settings.snapshot_steps.contains(&index) {
                snapshots.push((index, self.snapshot()));
            }
            peak = peak.max(last.force);
            if peak > 0.0 && last.force < self.settings.stop_fraction * peak {
                below += 1;
                if below >= self.settings.stop_count {
                    stopped_early = index + 1 < schedule.len();
                    break;
                }
            } else {
                below = 0;
            }
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(steps.len() + 1);
        if steps.first().is_none_or(|s| s.ubar > 0.0) {
            pairs.push((0.0, 0.0));
        }
        pairs.extend(steps.iter().map(|s| (s.ubar, s.force)));
        let curve = LoadDeflectionCurve::from_pairs("simulation", &pairs).expect("load steps increase strictly");
        (SimulationOutput { curve, steps, snapshots, stopped_early }, failure)
    }
}

/// Runs a simulation from scratch.
pub fn run_simulation(problem: Problem, settings: SolverSettings) -> Result<SimulationOutput> {
    Simulation::new(problem, settings)?.run()
}

fn residual(k: &SymmetricMatrix, f: &[f64], d: &[f64]) -> Vec<f64> {
    let mut r = k.mul(d);
    r.iter_mut().zip(f).for_each(|(r, f)| *r -= f);
    r
}

/// max |d − P(d − r/diag)| with P the projection onto [lo, hi].
fn projected_residual(d: &[f64], r: &[f64], diag: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..d.len())
        .filter(|&i| lo[i] < hi[i])
        .map(|i| (d[i] - (d[i] - r[i] / diag[i]).clamp(lo[i], hi[i])).abs())
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn projected_gauss_seidel(
    k: &SymmetricMatrix,
    f: &[f64],
    diag: &[f64],
    lo: &[f64],
    hi: &[f64],
    d: &mut [f64],
    tol: f64,
    sweeps: usize,
) -> f64 {
    let pattern = k.pattern().clone();
    let vals = k.values();
    let n = d.len();
    for i in 0..n {
        d[i] = d[i].clamp(lo[i], hi[i]);
    }
    let mut res = f64::INFINITY;
    for sweep in 1..=sweeps {
        for i in 0..n {
            if lo[i] == hi[i] {
                continue;
            }
            let (rows, range) = pattern.column(i);
            let ri: f64 = rows.iter().zip(&vals[range]).map(|(&j, a)| a * d[j]).sum::<f64>() - f[i];
            d[i] = (d[i] - ri / diag[i]).clamp(lo[i], hi[i]);
        }
        if sweep % 10 == 0 || sweep == sweeps {
            res = projected_residual(d, &residual(k, f, d), diag, lo, hi);
            if res <= tol {
                break;
            }
        }
    }
    res
}
