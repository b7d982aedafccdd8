// stencilforge - incompressible flow solver on the staggered grid
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef STENCILFORGE_CFD_HPP
#define STENCILFORGE_CFD_HPP

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stencilforge/executor.hpp"
#include "stencilforge/io.hpp"

namespace sforge::cfd {

struct cfd_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Physical constants of the fluid.  The pressure field stores the modified
// pressure p/rho, so density never divides a gradient; it is still passed to
// the velocity kernel because the descriptor declares it.
struct fluid_params {
  double viscosity = 0.01;
  double density = 1.0;
  std::array<double, 3> body_force{0.0, 0.0, 0.0};
  double lid_speed = 1.0;
  double blend = 0.0;  // donor-cell upwind fraction, 0 = pure central

  void validate() const {
    if (!(viscosity > 0.0)) throw cfd_error("viscosity must be positive");
    if (!(density > 0.0)) throw cfd_error("density must be positive");
    if (!(blend >= 0.0 && blend <= 1.0)) throw cfd_error("blend must lie in [0,1]");
  }
};

struct solver_config {
  grid::domain dom;
  std::array<bool, 3> periodic{false, false, false};
  double reynolds = 100.0;
  double sigma = 0.5;       // fraction of the stability limit taken per step
  double tolerance = 1e-6;  // max |div u| accepted after the pressure stage
  double omega = 1.7;
  int max_sweeps = 500;
  bool symmetry_z = true;  // quasi-2D runs mirror across the z faces
  int output_cadence = 0;  // field dumps every N steps, 0 = none

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (dom.extents[static_cast<std::size_t>(a)] < 1)
        throw cfd_error("domain extents must be positive");
      if (!(dom.spacing[static_cast<std::size_t>(a)] > 0.0))
        throw cfd_error("grid spacing must be positive");
    }
    if (!(reynolds > 0.0)) throw cfd_error("Reynolds number must be positive");
    if (!(sigma > 0.0 && sigma < 1.0)) throw cfd_error("sigma must lie in (0,1)");
    if (!(tolerance > 0.0)) throw cfd_error("pressure tolerance must be positive");
    if (!(omega >= 1.0 && omega < 2.0)) throw cfd_error("omega must lie in [1,2)");
    if (max_sweeps < 1) throw cfd_error("max_sweeps must be at least 1");
  }
};

inline grid::domain unit_box(grid::index_t nx, grid::index_t ny, grid::index_t nz) {
  return {{nx, ny, nz},
          {1.0 / static_cast<double>(nx), 1.0 / static_cast<double>(ny),
           1.0 / static_cast<double>(nz)},
          {0.0, 0.0, 0.0}};
}

// Fluid parameters for the lid-driven cavity: unit lid speed and box edge,
// so viscosity follows from the Reynolds number alone.
inline fluid_params cavity_fluid(const solver_config& cfg, double alpha = 0.0) {
  fluid_params p;
  p.lid_speed = 1.0;
  p.viscosity = p.lid_speed * 1.0 / cfg.reynolds;
  p.blend = alpha;
  return p;
}

struct step_stats {
  double dt = 0.0;
  int sweeps = 0;
  double residual = 0.0;
};

struct run_summary {
  long steps = 0;
  double time = 0.0;
  double rate = 0.0;  // max |u_new - u_old| / dt at the last step
  bool converged = false;
};

struct profile_tables {
  std::vector<std::array<double, 2>> u_of_y;  // (y, x-velocity) along x = 1/2
  std::vector<std::array<double, 2>> v_of_x;  // (x, y-velocity) along y = 1/2
};

// The kernel descriptors the solver registers.  kernels/cfd.ccl holds the
// same text; a test keeps the two in sync.
inline constexpr const char* kernel_descriptors =
    R"(# Kernel descriptors for the incompressible flow solver.
# UPDATE_VELOCITY is kept character-for-character in the upstream sample
# format; DIVERGENCE and PRESSURE_SWEEP complete the projection step.

CCTK_CUDA_KERNEL UPDATE_VELOCITY
   TYPE=3DBLOCK
   STENCIL="1,1,1,1,1,1"
   TILE="16,16,16"
{
  CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=SEPARATEINOUT
  {
    vx, vy, vz
  } "VELOCITY"
  CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=IN
  {
    p
  } "PRESSURE"
  CCTK_CUDA_KERNEL_PARAMETER
  {
    density
  } "DENSITY"
}

CCTK_CUDA_KERNEL DIVERGENCE
   TYPE=3DBLOCK
   STENCIL="1,0,1,0,1,0"
   TILE="16,16,16"
{
  CCTK_CUDA_KERNEL_VARIABLE CACHED=NO INTENT=IN
  {
    vx, vy, vz
  } "VELOCITY"
  CCTK_CUDA_KERNEL_VARIABLE CACHED=NO INTENT=OUT
  {
    divu
  } "DIVERGENCE"
}

CCTK_CUDA_KERNEL PRESSURE_SWEEP
   TYPE=3DBLOCK
   STENCIL="0,1,0,1,0,1"
   TILE="16,16,16"
{
  CCTK_CUDA_KERNEL_VARIABLE CACHED=NO INTENT=IN
  {
    divu
  } "DIVERGENCE"
  CCTK_CUDA_KERNEL_VARIABLE CACHED=NO INTENT=INOUT
  {
    p, vx, vy, vz
  } "CORRECTED"
  CCTK_CUDA_KERNEL_PARAMETER
  {
    beta, color
  } "SWEEP"
}
)";

// How the projection kernels are registered: rows is the production form
// (vectorizable inner loops), points the reference form the executor can
// police access by access.  Both compute identical arithmetic per cell and
// a test holds them to bitwise agreement.
enum class kernel_form { rows, points };

// One cavity/vortex simulation: owns the decomposition, the worker group,
// the fields, and the executor with the three registered kernels.
class simulation {
 public:
  simulation(const solver_config& cfg, const fluid_params& par, int workers = 1,
             exec::run_mode mode = exec::run_mode::plain,
             std::array<int, 3> tile_override = {0, 0, 0}, int ghost = 1,
             kernel_form form = kernel_form::rows)
      : cfg_(validated(cfg)),
        par_(validated_par(par)),
        dec_(grid::decompose(cfg_.dom, workers, ghost, cfg_.periodic)),
        grp_(workers),
        store_(dec_),
        ex_(grp_, store_, make_bc(cfg_, par_)),
        mode_(mode) {
    store_.create("vx", grid::stagger::x);
    store_.create("vy", grid::stagger::y);
    store_.create("vz", grid::stagger::z);
    store_.create("p", grid::stagger::none);
    store_.create("divu", grid::stagger::none);

    sc_.nu = par_.viscosity;
    sc_.alpha = par_.blend;
    sc_.fx = par_.body_force[0];
    sc_.fy = par_.body_force[1];
    sc_.fz = par_.body_force[2];
    sc_.ix = 1.0 / cfg_.dom.spacing[0];
    sc_.iy = 1.0 / cfg_.dom.spacing[1];
    sc_.iz = 1.0 / cfg_.dom.spacing[2];
    sc_.ix2 = sc_.ix * sc_.ix;
    sc_.iy2 = sc_.iy * sc_.iy;
    sc_.iz2 = sc_.iz * sc_.iz;

    sc_.nxm1 = cfg_.dom.extents[0] - 1;
    sc_.nym1 = cfg_.dom.extents[1] - 1;
    sc_.nzm1 = cfg_.dom.extents[2] - 1;
    sc_.px = cfg_.periodic[0] ? 1 : 0;
    sc_.py = cfg_.periodic[1] ? 1 : 0;
    sc_.pz = cfg_.periodic[2] ? 1 : 0;
    const auto act = [&](double ax, double ay, double az) {
      return ax * sc_.ix2 + ay * sc_.iy2 + az * sc_.iz2;
    };
    for (int bx = 0; bx < 2; ++bx)
      for (int by = 0; by < 2; ++by)
        for (int bz = 0; bz < 2; ++bz)
          sc_.bscale[bx][by][bz] =
              act(2.0, 2.0, 2.0) / act(bx ? 2.0 : 1.0, by ? 2.0 : 1.0, bz ? 2.0 : 1.0);

    register_kernels(tile_override, form);
    prov_.steps = {exec::schedule_step::refresh({"vx", "vy", "vz", "p"}),
                   exec::schedule_step::run("UPDATE_VELOCITY")};
  }

  simulation(const simulation&) = delete;
  simulation& operator=(const simulation&) = delete;

  // ---- initial states -------------------------------------------------

  void init_cavity() {
    zero_all();
    reset_clock();
  }

  void init_uniform(std::array<double, 3> c) {
    fill("vx", [&](double, double, double) { return c[0]; });
    fill("vy", [&](double, double, double) { return c[1]; });
    fill("vz", [&](double, double, double) { return c[2]; });
    fill("p", [](double, double, double) { return 0.0; });
    fill("divu", [](double, double, double) { return 0.0; });
    reset_clock();
  }

  // Planar vortex sheet: velocities sampled at their face positions, the
  // modified pressure at cell centers.  Discretely divergence-free because
  // dx = dy makes the two central difference factors cancel.
  void init_taylor_green() {
    constexpr double tau = 2.0 * std::numbers::pi;
    fill_vx([&](double xf, double yc, double) { return std::sin(tau * xf) * std::cos(tau * yc); });
    fill_vy([&](double xc, double yf, double) { return -std::cos(tau * xc) * std::sin(tau * yf); });
    fill("vz", [](double, double, double) { return 0.0; });
    fill("p", [&](double xc, double yc, double) {
      // for this velocity sign convention the balancing pressure is +1/4(...)
      return 0.25 * (std::cos(2.0 * tau * xc) + std::cos(2.0 * tau * yc));
    });
    fill("divu", [](double, double, double) { return 0.0; });
    reset_clock();
  }

  // ---- the time step ---------------------------------------------------

  // Largest stable step: advective limits per axis plus the explicit
  // diffusion bound, scaled by sigma.  Velocity limits drop out while the
  // component is identically zero.
  double compute_dt() {
    double dt = 1.0 / (2.0 * par_.viscosity * (sc_.ix2 + sc_.iy2 + sc_.iz2));
    const double mx = ex_.reduce("vx", grid::reduce_op::max_abs);
    const double my = ex_.reduce("vy", grid::reduce_op::max_abs);
    const double mz = ex_.reduce("vz", grid::reduce_op::max_abs);
    if (mx > 0.0) dt = std::min(dt, cfg_.dom.spacing[0] / mx);
    if (my > 0.0) dt = std::min(dt, cfg_.dom.spacing[1] / my);
    if (mz > 0.0) dt = std::min(dt, cfg_.dom.spacing[2] / mz);
    return cfg_.sigma * dt;
  }

  void provisional(double dt) {
    sc_.dt = dt;
    ex_.run_schedule(prov_, {{"density", par_.density}}, 1, mode_);
    for (const char* f : {"vx", "vy", "vz"})
      if (!std::isfinite(ex_.reduce(f, grid::reduce_op::max_abs)))
        throw cfd_error(std::string("non-finite ") + f + " after the velocity update at step " +
                        std::to_string(steps_) + ", t = " + std::to_string(time_));
  }

  // Red-black corrective sweeps until max |div u| falls under tolerance.
  // Every sweep recomputes the divergence after a full ghost refresh, so the
  // result is independent of the decomposition.  Wall faces scribbled by a
  // sweep are re-pinned by the next refresh.  Returns (sweeps, residual);
  // non-convergence is reported through the residual, not an exception.
  std::pair<int, double> pressure_iteration(double dt) {
    sc_.dt = dt;
    const double beta = cfg_.omega / (2.0 * dt * (sc_.ix2 + sc_.iy2 + sc_.iz2));
    refresh_divergence();
    int sweeps = 0;
    double residual = 0.0;
    do {
      ex_.refresh({"divu"});
      ex_.run_kernel("PRESSURE_SWEEP",
                     {{"beta", beta}, {"color", static_cast<double>(color_)}});
      color_ ^= 1;
      ++sweeps;
      refresh_divergence();
      residual = ex_.reduce("divu", grid::reduce_op::max_abs);
    } while (residual > cfg_.tolerance && sweeps < cfg_.max_sweeps);
    return {sweeps, residual};
  }

  step_stats step() {
    const double dt = compute_dt();
    provisional(dt);
    auto [sweeps, residual] = pressure_iteration(dt);
    ex_.refresh({"p"});
    time_ += dt;
    ++steps_;
    last_ = {dt, sweeps, residual};
    return last_;
  }

  step_stats advance(int n) {
    for (int i = 0; i < n; ++i) step();
    return last_;
  }

  template <typename Fn>
  run_summary run_to_steady(long max_steps, double steady_tol, Fn&& on_step) {
    run_summary r;
    for (long n = 0; n < max_steps; ++n) {
      const step_stats st = step();
      r.steps = steps_;
      r.time = time_;
      r.rate = steady_delta() / st.dt;
      on_step(steps_, st, r.rate);
      if (r.rate <= steady_tol) {
        r.converged = true;
        break;
      }
    }
    return r;
  }

  // ---- diagnostics -----------------------------------------------------

  double max_divergence() {
    refresh_divergence();
    return ex_.reduce("divu", grid::reduce_op::max_abs);
  }

  // The velocity buffers still hold the previous step's state on the back
  // side (the swap happens before the in-place pressure corrections), so the
  // step-to-step change is one reduction away.
  double steady_delta() {
    double d = ex_.reduce("vx", grid::reduce_op::max_abs_diff);
    d = std::max(d, ex_.reduce("vy", grid::reduce_op::max_abs_diff));
    d = std::max(d, ex_.reduce("vz", grid::reduce_op::max_abs_diff));
    return d;
  }

  double kinetic_energy() {
    const double s = ex_.reduce("vx", grid::reduce_op::sum_sq) +
                     ex_.reduce("vy", grid::reduce_op::sum_sq) +
                     ex_.reduce("vz", grid::reduce_op::sum_sq);
    const double cell = cfg_.dom.spacing[0] * cfg_.dom.spacing[1] * cfg_.dom.spacing[2];
    return 0.5 * par_.density * s * cell;
  }

  // RMS distance to the decayed analytic vortex at time t, over all three
  // velocity components sampled at their own face positions.
  double taylor_green_error(double t) {
    constexpr double tau = 2.0 * std::numbers::pi;
    const double decay = std::exp(-2.0 * par_.viscosity * tau * tau * t);
    const double dx = cfg_.dom.spacing[0], dy = cfg_.dom.spacing[1];
    std::vector<double> partial(static_cast<std::size_t>(grp_.size()), 0.0);
    auto& fu = store_.at("vx");
    auto& fv = store_.at("vy");
    auto& fw = store_.at("vz");
    grp_.run([&](int wk) {
      const auto& bu = fu.local(wk);
      const auto& bv = fv.local(wk);
      const auto& bw = fw.local(wk);
      const auto& blk = dec_.blocks[static_cast<std::size_t>(wk)];
      double s = 0.0;
      for (grid::index_t k = 0; k < bu.dims[2]; ++k)
        for (grid::index_t j = 0; j < bu.dims[1]; ++j)
          for (grid::index_t i = 0; i < bu.dims[0]; ++i) {
            const double xc = (static_cast<double>(blk.lo[0] + i) + 0.5) * dx;
            const double yc = (static_cast<double>(blk.lo[1] + j) + 0.5) * dy;
            const double xf = static_cast<double>(blk.lo[0] + i + 1) * dx;
            const double yf = static_cast<double>(blk.lo[1] + j + 1) * dy;
            const double eu =
                bu.at(i, j, k) - std::sin(tau * xf) * std::cos(tau * yc) * decay;
            const double ev =
                bv.at(i, j, k) + std::cos(tau * xc) * std::sin(tau * yf) * decay;
            const double ew = bw.at(i, j, k);
            s += eu * eu + ev * ev + ew * ew;
          }
      partial[static_cast<std::size_t>(wk)] = s;
    });
    double total = 0.0;
    for (double s : partial) total += s;
    const double n = static_cast<double>(cfg_.dom.cells());
    return std::sqrt(total / (3.0 * n));
  }

  // Centerline velocity profiles through the mid-z plane.  Wall rows carry
  // the boundary values the reflection ghosts enforce.
  profile_tables centerline_profiles() {
    const auto nx = cfg_.dom.extents[0];
    const auto ny = cfg_.dom.extents[1];
    const auto nz = cfg_.dom.extents[2];
    if (nz % 2 == 0) throw cfd_error("profiles need an odd z extent for an exact mid plane");
    const grid::index_t km = nz / 2;
    const auto gu = grid::gather(grp_, store_.at("vx"));
    const auto gv = grid::gather(grp_, store_.at("vy"));
    auto u_at = [&](grid::index_t i, grid::index_t j) {
      return gu[static_cast<std::size_t>((km * ny + j) * nx + i)];
    };
    auto v_at = [&](grid::index_t i, grid::index_t j) {
      return gv[static_cast<std::size_t>((km * ny + j) * nx + i)];
    };

    profile_tables out;
    out.u_of_y.push_back({0.0, 0.0});
    for (grid::index_t j = 0; j < ny; ++j) {
      const double y = (static_cast<double>(j) + 0.5) * cfg_.dom.spacing[1];
      // x faces sit at (i+1)dx; an odd extent centers the line between two.
      const double u = nx % 2 == 0 ? u_at(nx / 2 - 1, j)
                                   : 0.5 * (u_at(nx / 2 - 1, j) + u_at(nx / 2, j));
      out.u_of_y.push_back({y, u});
    }
    out.u_of_y.push_back({1.0, par_.lid_speed});

    out.v_of_x.push_back({0.0, 0.0});
    for (grid::index_t i = 0; i < nx; ++i) {
      const double x = (static_cast<double>(i) + 0.5) * cfg_.dom.spacing[0];
      const double v = ny % 2 == 0 ? v_at(i, ny / 2 - 1)
                                   : 0.5 * (v_at(i, ny / 2 - 1) + v_at(i, ny / 2));
      out.v_of_x.push_back({x, v});
    }
    out.v_of_x.push_back({1.0, 0.0});
    return out;
  }

  // ---- plumbing ----------------------------------------------------------

  template <typename F>
  void fill(const std::string& name, F f) {
    auto& fld = store_.at(name);
    const double dx = cfg_.dom.spacing[0], dy = cfg_.dom.spacing[1], dz = cfg_.dom.spacing[2];
    grp_.run([&](int wk) {
      auto& lb = fld.local(wk);
      const auto& blk = dec_.blocks[static_cast<std::size_t>(wk)];
      for (grid::index_t k = 0; k < lb.dims[2]; ++k)
        for (grid::index_t j = 0; j < lb.dims[1]; ++j)
          for (grid::index_t i = 0; i < lb.dims[0]; ++i)
            lb.at(i, j, k) = f((static_cast<double>(blk.lo[0] + i) + 0.5) * dx,
                               (static_cast<double>(blk.lo[1] + j) + 0.5) * dy,
                               (static_cast<double>(blk.lo[2] + k) + 0.5) * dz);
    });
    ex_.invalidate_ghosts(name);
  }

  double time() const { return time_; }
  long step_count() const { return steps_; }
  const step_stats& last() const { return last_; }
  const solver_config& config() const { return cfg_; }
  const fluid_params& params() const { return par_; }
  grid::field_store& store() { return store_; }
  grid::worker_group& group() { return grp_; }
  exec::executor& engine() { return ex_; }
  const grid::decomposition& decomp() const { return dec_; }
  int pending_color() const { return color_; }

 private:
  struct step_constants {
    double dt = 0.0, nu = 0.0, alpha = 0.0;
    double fx = 0.0, fy = 0.0, fz = 0.0;
    double ix = 0.0, iy = 0.0, iz = 0.0;
    double ix2 = 0.0, iy2 = 0.0, iz2 = 0.0;
    // Relaxation scale by boundary pattern: a pinned face contributes nothing
    // to a cell's pressure response, so cells with dead faces need a larger
    // correction to cancel the same divergence.  Index b? is 1 when both
    // faces along that axis are live (periodic, or interior of a closed
    // axis).  bscale[1][1][1] divides an expression by itself and is exactly
    // one, so periodic runs are untouched bit for bit.
    double bscale[2][2][2] = {};
    grid::index_t nxm1 = 0, nym1 = 0, nzm1 = 0;
    int px = 0, py = 0, pz = 0;
  };

  static solver_config validated(solver_config c) {
    c.validate();
    return c;
  }
  static fluid_params validated_par(fluid_params p) {
    p.validate();
    return p;
  }

  // Walls everywhere except periodic axes; the lid rides the high y face.
  // Quasi-2D runs mirror across z instead of sticking to it.
  static grid::boundary_spec make_bc(const solver_config& cfg, const fluid_params& par) {
    grid::boundary_spec bc;
    for (int axis = 0; axis < 3; ++axis) {
      if (cfg.periodic[static_cast<std::size_t>(axis)]) continue;
      for (int side = 0; side < 2; ++side) bc.at(axis, side) = grid::face_bc::wall();
    }
    if (!cfg.periodic[1]) bc.at(1, 1) = grid::face_bc::wall({par.lid_speed, 0.0, 0.0});
    if (!cfg.periodic[2] && cfg.symmetry_z) {
      bc.at(2, 0) = grid::face_bc::symmetry();
      bc.at(2, 1) = grid::face_bc::symmetry();
    }
    return bc;
  }

  void register_kernels(std::array<int, 3> tile_override, kernel_form form) {
    auto raw = ccl::parse_descriptors(kernel_descriptors);
    auto kernels = ccl::validate_all(raw, {"vx", "vy", "vz", "p", "divu"});
    std::map<std::string, codegen::execution_plan> plans;
    for (const auto& k : kernels) {
      auto plan = codegen::build_plan(k);
      if (tile_override[0] > 0) plan.tile = tile_override;
      plans.emplace(plan.kernel, std::move(plan));
    }

    ex_.register_kernel(
        plans.at("UPDATE_VELOCITY"), {{"vx", "vy", "vz", "p"}, {"density"}},
        [this](const exec::point_ctx& c) {
          const step_constants& s = sc_;
          const auto& u = c.field(0);
          const auto& v = c.field(1);
          const auto& w = c.field(2);
          const auto& q = c.field(3);
          (void)c.param(0);  // density: the pressure field already stores p/rho

          const double u0 = u.load(), v0 = v.load(), w0 = w.load();

          // x momentum, at this cell's high x face
          const double ue = u(1, 0, 0), uw = u(-1, 0, 0);
          const double un = u(0, 1, 0), us = u(0, -1, 0);
          const double ut = u(0, 0, 1), ub = u(0, 0, -1);
          const double vn = v(0, 0, 0) + v(1, 0, 0), vs = v(0, -1, 0) + v(1, -1, 0);
          const double wt = w(0, 0, 0) + w(1, 0, 0), wb = w(0, 0, -1) + w(1, 0, -1);
          double fux = (u0 + ue) * (u0 + ue) - (uw + u0) * (uw + u0);
          fux += s.alpha * (std::fabs(u0 + ue) * (u0 - ue) - std::fabs(uw + u0) * (uw - u0));
          double fuy = vn * (u0 + un) - vs * (us + u0);
          fuy += s.alpha * (std::fabs(vn) * (u0 - un) - std::fabs(vs) * (us - u0));
          double fuz = wt * (u0 + ut) - wb * (ub + u0);
          fuz += s.alpha * (std::fabs(wt) * (u0 - ut) - std::fabs(wb) * (ub - u0));
          const double lapu = (ue - 2.0 * u0 + uw) * s.ix2 + (un - 2.0 * u0 + us) * s.iy2 +
                              (ut - 2.0 * u0 + ub) * s.iz2;
          const double rhsu = (q.load() - q(1, 0, 0)) * s.ix -
                              0.25 * (fux * s.ix + fuy * s.iy + fuz * s.iz) + s.nu * lapu + s.fx;
          c.field(0).store(u0 + s.dt * rhsu);

          // y momentum, at the high y face
          const double ve = v(1, 0, 0), vw = v(-1, 0, 0);
          const double vnn = v(0, 1, 0), vss = v(0, -1, 0);
          const double vt = v(0, 0, 1), vb = v(0, 0, -1);
          const double ue2 = u(0, 0, 0) + u(0, 1, 0), uw2 = u(-1, 0, 0) + u(-1, 1, 0);
          const double wt2 = w(0, 0, 0) + w(0, 1, 0), wb2 = w(0, 0, -1) + w(0, 1, -1);
          double fvx = ue2 * (v0 + ve) - uw2 * (vw + v0);
          fvx += s.alpha * (std::fabs(ue2) * (v0 - ve) - std::fabs(uw2) * (vw - v0));
          double fvy = (v0 + vnn) * (v0 + vnn) - (vss + v0) * (vss + v0);
          fvy += s.alpha * (std::fabs(v0 + vnn) * (v0 - vnn) - std::fabs(vss + v0) * (vss - v0));
          double fvz = wt2 * (v0 + vt) - wb2 * (vb + v0);
          fvz += s.alpha * (std::fabs(wt2) * (v0 - vt) - std::fabs(wb2) * (vb - v0));
          const double lapv = (ve - 2.0 * v0 + vw) * s.ix2 + (vnn - 2.0 * v0 + vss) * s.iy2 +
                              (vt - 2.0 * v0 + vb) * s.iz2;
          const double rhsv = (q.load() - q(0, 1, 0)) * s.iy -
                              0.25 * (fvx * s.ix + fvy * s.iy + fvz * s.iz) + s.nu * lapv + s.fy;
          c.field(1).store(v0 + s.dt * rhsv);

          // z momentum, at the high z face
          const double we = w(1, 0, 0), ww = w(-1, 0, 0);
          const double wn = w(0, 1, 0), ws = w(0, -1, 0);
          const double wtt = w(0, 0, 1), wbb = w(0, 0, -1);
          const double ue3 = u(0, 0, 0) + u(0, 0, 1), uw3 = u(-1, 0, 0) + u(-1, 0, 1);
          const double vn3 = v(0, 0, 0) + v(0, 0, 1), vs3 = v(0, -1, 0) + v(0, -1, 1);
          double fwx = ue3 * (w0 + we) - uw3 * (ww + w0);
          fwx += s.alpha * (std::fabs(ue3) * (w0 - we) - std::fabs(uw3) * (ww - w0));
          double fwy = vn3 * (w0 + wn) - vs3 * (ws + w0);
          fwy += s.alpha * (std::fabs(vn3) * (w0 - wn) - std::fabs(vs3) * (ws - w0));
          double fwz = (w0 + wtt) * (w0 + wtt) - (wbb + w0) * (wbb + w0);
          fwz += s.alpha * (std::fabs(w0 + wtt) * (w0 - wtt) - std::fabs(wbb + w0) * (wbb - w0));
          const double lapw = (we - 2.0 * w0 + ww) * s.ix2 + (wn - 2.0 * w0 + ws) * s.iy2 +
                              (wtt - 2.0 * w0 + wbb) * s.iz2;
          const double rhsw = (q.load() - q(0, 0, 1)) * s.iz -
                              0.25 * (fwx * s.ix + fwy * s.iy + fwz * s.iz) + s.nu * lapw + s.fz;
          c.field(2).store(w0 + s.dt * rhsw);
        });

    // Row and point forms compute the same expression tree cell for cell;
    // "row kernels match the point forms bitwise" holds them together.
    const exec::kernel_signature div_sig{{"vx", "vy", "vz", "divu"}, {}};
    if (form == kernel_form::rows)
      ex_.register_row_kernel(plans.at("DIVERGENCE"), div_sig, [this](const exec::row_ctx& c) {
        const step_constants& s = sc_;
        const double* __restrict u0 = c.in(0);
        const double* __restrict um = u0 - 1;
        const double* __restrict v0 = c.in(1);
        const double* __restrict vm = c.in(1, -1, 0);
        const double* __restrict w0 = c.in(2);
        const double* __restrict wm = c.in(2, 0, -1);
        double* __restrict d = c.out(3);
        for (grid::index_t i = 0; i < c.n; ++i) {
          double dd = (u0[i] - um[i]) * s.ix;
          dd += (v0[i] - vm[i]) * s.iy;
          dd += (w0[i] - wm[i]) * s.iz;
          d[i] = dd;
        }
      });
    else
      ex_.register_kernel(plans.at("DIVERGENCE"), div_sig, [this](const exec::point_ctx& c) {
        const step_constants& s = sc_;
        double d = (c.field(0).load() - c.field(0)(-1, 0, 0)) * s.ix;
        d += (c.field(1).load() - c.field(1)(0, -1, 0)) * s.iy;
        d += (c.field(2).load() - c.field(2)(0, 0, -1)) * s.iz;
        c.field(3).store(d);
      });

    // delta = -beta * scale * divu on cells of the active color; the cell
    // writes its center value of p and of each velocity, where the neighbor
    // cell's delta arrives with opposite parity.  scale compensates for
    // pinned boundary faces (dead faces cannot carry a correction, so the
    // live ones must carry more); the neighbor deltas use the neighbor's own
    // pattern.  Wall faces hit here are re-pinned by the next refresh, and
    // the out-of-range pattern bits past a closed wall select a value that
    // only ever multiplies a discarded wall-face write.
    const exec::kernel_signature sweep_sig{{"divu", "p", "vx", "vy", "vz"}, {"beta", "color"}};
    if (form == kernel_form::rows)
      ex_.register_row_kernel(
          plans.at("PRESSURE_SWEEP"), sweep_sig, [this](const exec::row_ctx& c) {
            const step_constants& s = sc_;
            const double beta = c.param(0);
            const int color = static_cast<int>(c.param(1));
            const double* __restrict d0r = c.in(0);
            const double* __restrict dxr = d0r + 1;
            const double* __restrict dyr = c.in(0, 1, 0);
            const double* __restrict dzr = c.in(0, 0, 1);
            double* __restrict p = c.out(1);
            double* __restrict u = c.out(2);
            double* __restrict v = c.out(3);
            double* __restrict w = c.out(4);
            // only the x pattern bit varies along the row; the candidate
            // scales per bit collapse to a select
            const int by = s.py | ((c.j > 0) & (c.j < s.nym1));
            const int bz = s.pz | ((c.k > 0) & (c.k < s.nzm1));
            const int byp = s.py | (c.j + 1 < s.nym1);
            const int bzp = s.pz | (c.k + 1 < s.nzm1);
            const double sc0e = s.bscale[0][by][bz], sc0i = s.bscale[1][by][bz];
            const double scye = s.bscale[0][byp][bz], scyi = s.bscale[1][byp][bz];
            const double scze = s.bscale[0][by][bzp], sczi = s.bscale[1][by][bzp];
            const grid::index_t jk = c.j + c.k;
            const auto cell = [&](grid::index_t i) {
              const grid::index_t gi = c.i0 + i;
              const double a0 = ((gi + jk) & 1) == color ? 1.0 : 0.0;
              const double a1 = 1.0 - a0;
              const int bx = s.px | ((gi > 0) & (gi < s.nxm1));
              const int bxp = s.px | (gi + 1 < s.nxm1);
              const double d0 = -(beta * (bx ? sc0i : sc0e)) * d0r[i] * a0;
              const double ex = -(beta * (bxp ? sc0i : sc0e)) * dxr[i] * a1;
              const double ey = -(beta * (bx ? scyi : scye)) * dyr[i] * a1;
              const double ez = -(beta * (bx ? sczi : scze)) * dzr[i] * a1;
              p[i] = p[i] + d0;
              u[i] = u[i] + s.dt * s.ix * (d0 - ex);
              v[i] = v[i] + s.dt * s.iy * (d0 - ey);
              w[i] = w[i] + s.dt * s.iz * (d0 - ez);
            };
            // peel the cells whose x pattern bit is down; the interior loop
            // then has row-constant scales, and the parity select reduces to
            // arithmetic the vectorizer handles.  Products unchanged: the
            // hoisted -beta*scale and dt*i? factors keep the original
            // association, and a1 is exactly the flipped parity mask.
            grid::index_t lo = 0, hi = c.n;
            if (!s.px) {
              const auto inner = [&](grid::index_t gi) {
                return (gi > 0) & (gi + 1 < s.nxm1);
              };
              while (lo < c.n && !inner(c.i0 + lo)) ++lo;
              while (hi > lo && !inner(c.i0 + hi - 1)) --hi;
            }
            for (grid::index_t i = 0; i < lo; ++i) cell(i);
            const double mb0 = -beta * sc0i, mby = -beta * scyi, mbz = -beta * sczi;
            const double cu = s.dt * s.ix, cv = s.dt * s.iy, cw = s.dt * s.iz;
            for (grid::index_t i = lo; i < hi; ++i) {
              const double a0 = static_cast<double>(((c.i0 + i + jk) & 1) == color);
              const double a1 = 1.0 - a0;
              const double d0 = mb0 * d0r[i] * a0;
              const double ex = mb0 * dxr[i] * a1;
              const double ey = mby * dyr[i] * a1;
              const double ez = mbz * dzr[i] * a1;
              p[i] = p[i] + d0;
              u[i] = u[i] + cu * (d0 - ex);
              v[i] = v[i] + cv * (d0 - ey);
              w[i] = w[i] + cw * (d0 - ez);
            }
            for (grid::index_t i = hi; i < c.n; ++i) cell(i);
          });
    else
      ex_.register_kernel(plans.at("PRESSURE_SWEEP"), sweep_sig, [this](const exec::point_ctx& c) {
        const step_constants& s = sc_;
        const double beta = c.param(0);
        const int color = static_cast<int>(c.param(1));
        const auto& dv = c.field(0);
        const double a0 = ((c.i + c.j + c.k) & 1) == color ? 1.0 : 0.0;
        const double a1 = ((c.i + c.j + c.k + 1) & 1) == color ? 1.0 : 0.0;
        const int bx = s.px | ((c.i > 0) & (c.i < s.nxm1));
        const int by = s.py | ((c.j > 0) & (c.j < s.nym1));
        const int bz = s.pz | ((c.k > 0) & (c.k < s.nzm1));
        const int bxp = s.px | (c.i + 1 < s.nxm1);
        const int byp = s.py | (c.j + 1 < s.nym1);
        const int bzp = s.pz | (c.k + 1 < s.nzm1);
        const double d0 = -(beta * s.bscale[bx][by][bz]) * dv.load() * a0;
        const double ex = -(beta * s.bscale[bxp][by][bz]) * dv(1, 0, 0) * a1;
        const double ey = -(beta * s.bscale[bx][byp][bz]) * dv(0, 1, 0) * a1;
        const double ez = -(beta * s.bscale[bx][by][bzp]) * dv(0, 0, 1) * a1;
        c.field(1).store(c.field(1).load() + d0);
        c.field(2).store(c.field(2).load() + s.dt * s.ix * (d0 - ex));
        c.field(3).store(c.field(3).load() + s.dt * s.iy * (d0 - ey));
        c.field(4).store(c.field(4).load() + s.dt * s.iz * (d0 - ez));
      });
  }

  void refresh_divergence() {
    ex_.refresh({"vx", "vy", "vz"});
    ex_.run_kernel("DIVERGENCE", {});
  }

  void zero_all() {
    for (const char* f : {"vx", "vy", "vz", "p", "divu"})
      fill(f, [](double, double, double) { return 0.0; });
  }

  void reset_clock() {
    time_ = 0.0;
    steps_ = 0;
    color_ = 0;
    last_ = {};
  }

  // staggered fill helpers: the first coordinate handed to f is the face
  // position on the staggered axis, the others are cell centers
  template <typename F>
  void fill_vx(F f) {
    const double dx = cfg_.dom.spacing[0];
    fill("vx", [&](double xc, double yc, double zc) { return f(xc + 0.5 * dx, yc, zc); });
  }
  template <typename F>
  void fill_vy(F f) {
    const double dy = cfg_.dom.spacing[1];
    fill("vy", [&](double xc, double yc, double zc) { return f(xc, yc + 0.5 * dy, zc); });
  }

  solver_config cfg_;
  fluid_params par_;
  grid::decomposition dec_;
  grid::worker_group grp_;
  grid::field_store store_;
  exec::executor ex_;
  exec::run_mode mode_;
  exec::schedule prov_;
  step_constants sc_;
  double time_ = 0.0;
  long steps_ = 0;
  int color_ = 0;
  step_stats last_;
};

}  // namespace sforge::cfd

#endif  // STENCILFORGE_CFD_HPP
