// mcwf.hpp — the Monte Carlo wave-function trajectory driver: adaptive
// stepping in the composite's interaction picture, quantum jumps, and
// single-trajectory / ensemble runners.
//
// One mcwf_step is one accepted adaptive ODE step, in five phases:
//   1. evolve the interaction-picture state under dPsi_I/dt = -i H_I(tau) Psi_I,
//      tau measured from the last picture accord;
//   2. apply the composite exact propagator for the elapsed dtdid and move the
//      picture origin to the new time, so propagator arguments stay small;
//   3. renormalize exactly, compute channel rates on the evolved state,
//      dp = dtdid * sum(rates), draw epsilon and jump if epsilon < dp
//      (channel chosen by walking the cumulative distribution);
//   4. reduce the proposed dttry to dplimit / sum(rates) if the jump
//      probability would overshoot dplimit;
//   5. emit display records when the time crosses the output grid (owned by
//      run_trajectory; steps are never shortened to land on grid points).
#pragma once

#include "qtraj/errors.hpp"
#include "qtraj/integrate.hpp"
#include "qtraj/statevec.hpp"
#include "qtraj/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace qtraj {

struct TrajectoryParams {
    std::uint64_t seed = 1;
    double eps = 1e-6;       // ODE relative precision
    double dplimit = 0.01;   // maximal jump probability per step
    double t_end = 1.0;
    double display_dt = 0.1; // output cadence
    std::vector<double> dump_times;
};

inline void validate(const TrajectoryParams& p) {
    if (!(p.eps > 0.0)) throw ConfigError("trajectory: eps must be positive");
    if (!(p.dplimit > 0.0 && p.dplimit < 1.0))
        throw ConfigError("trajectory: dplimit must lie in (0, 1)");
    if (!(p.display_dt > 0.0)) throw ConfigError("trajectory: dt_display must be positive");
    if (!(p.t_end >= 0.0)) throw ConfigError("trajectory: tend must be non-negative");
}

struct DisplayRecord {
    double t = 0.0;
    double dtdid = 0.0;
    std::vector<double> values;
};

struct StateDump {
    double t = 0.0;
    StateVector psi;
};

struct StepDiagnostics {
    std::size_t steps = 0;
    std::size_t jumps = 0;
    double max_norm_error = 0.0;     // |norm - 1| after each completed step
    double max_dp = 0.0;
    double max_dp_after_first = 0.0; // the overshoot guard may lag one step
    std::size_t truncation_warnings = 0;

    void merge(const StepDiagnostics& o) {
        steps += o.steps;
        jumps += o.jumps;
        max_norm_error = std::max(max_norm_error, o.max_norm_error);
        max_dp = std::max(max_dp, o.max_dp);
        max_dp_after_first = std::max(max_dp_after_first, o.max_dp_after_first);
        truncation_warnings += o.truncation_warnings;
    }
};

struct TrajectoryState {
    double t;
    StateVector psi;
    OdeStepper stepper;
    RngStream rng;
    double picture_origin;
};

// Initial trial step from the system's highest characteristic frequency.
inline double init_dttry(const Composite& sys) { return 0.1 / sys.highest_frequency(); }

inline void mcwf_step(TrajectoryState& traj, const Composite& sys, const TrajectoryParams& params,
                      StepDiagnostics& diag, std::vector<double>& rates) {
    // Phase 1 — deterministic substep in the interaction picture. With no
    // Hamiltonian-capable element the derivative is zero and the stepper
    // simply grows its proposal.
    auto rhs = [&sys](double tau, std::span<const complex> y, std::span<complex> dy) {
        std::fill(dy.begin(), dy.end(), complex{});
        sys.apply_hamiltonian(tau, y, dy);
    };
    double tau = traj.t - traj.picture_origin;
    traj.stepper.step(rhs, traj.psi.amps(), tau);
    traj.t = traj.picture_origin + tau;
    const double dtdid = traj.stepper.dtdid();

    // Phase 2 — accord the pictures: Psi(t) = U(dtdid) Psi_I(t).
    sys.apply_exact_propagator(dtdid, traj.psi.amps());
    traj.picture_origin = traj.t;

    // Renormalization is performed exactly rather than to O(dt).
    traj.psi.normalize();
    diag.max_norm_error = std::max(diag.max_norm_error, std::abs(norm(traj.psi) - 1.0));

    // Phase 3 — jump decision on the evolved state.
    sys.jump_rates(traj.psi.amps(), rates);
    const double total_rate = std::accumulate(rates.begin(), rates.end(), 0.0);
    const double dp = dtdid * total_rate;
    diag.max_dp = std::max(diag.max_dp, dp);
    if (diag.steps > 0) diag.max_dp_after_first = std::max(diag.max_dp_after_first, dp);
    if (dp >= 1.0)
        throw StepSizeFault("jump probability per step reached " + std::to_string(dp) +
                            " at t = " + std::to_string(traj.t) + "; dplimit is misconfigured");

    const double eps_draw = traj.rng.uniform();
    double guard_rate = total_rate;
    if (eps_draw < dp) {
        std::size_t chosen = rates.size();
        double cum = 0.0;
        for (std::size_t c = 0; c < rates.size(); ++c) {
            if (rates[c] <= 0.0) continue;
            cum += dtdid * rates[c];
            chosen = c;
            if (cum > eps_draw) break;
        }
        if (chosen < rates.size()) {
            sys.apply_jump(chosen, traj.psi);
            ++diag.jumps;
            // the conditioned state's rates can differ sharply from the
            // pre-jump ones; the overshoot guard must see the state the next
            // step actually evolves
            sys.jump_rates(traj.psi.amps(), rates);
            guard_rate = std::accumulate(rates.begin(), rates.end(), 0.0);
        }
    }

    // Phase 4 — keep the next step's jump probability under dplimit.
    double dttry = traj.stepper.dttry();
    if (guard_rate * dttry > params.dplimit) dttry = params.dplimit / guard_rate;
    traj.stepper.set_dttry(std::min(dttry, params.display_dt));

    ++diag.steps;
}

struct TrajectoryResult {
    std::vector<DisplayRecord> records;
    std::vector<StateDump> dumps;
    StepDiagnostics diag;
    StateVector final_psi;
};

inline TrajectoryResult run_trajectory(const Composite& sys, const StateVector& psi0,
                                       const TrajectoryParams& params) {
    validate(params);
    if (psi0.size() != sys.total_dim())
        throw ConfigError("run_trajectory: initial state dimension " + std::to_string(psi0.size()) +
                          " does not match the composite's " + std::to_string(sys.total_dim()));
    if (psi0.dims().size() == sys.dims().size() && psi0.dims() != sys.dims())
        throw ConfigError("run_trajectory: initial state factor dimensions do not match the composite");

    TrajectoryState traj{0.0, psi0,
                         OdeStepper(params.eps, std::min(init_dttry(sys), params.display_dt)),
                         RngStream(params.seed), 0.0};
    traj.psi.normalize();

    const double grid_tol = 1e-9 * params.display_dt;
    const std::size_t n_grid = std::size_t(std::floor(params.t_end / params.display_dt + 1e-9));

    std::vector<double> dump_times(params.dump_times);
    std::sort(dump_times.begin(), dump_times.end());
    std::erase_if(dump_times, [&](double t) { return t < 0.0 || t > params.t_end + grid_tol; });

    TrajectoryResult out;
    std::vector<double> values;
    auto emit = [&](double dtcol) {
        sys.display(traj.psi, values);
        out.records.push_back({traj.t, dtcol, values});
    };

    emit(traj.stepper.dttry());
    std::size_t grid_i = 1;
    std::size_t dump_i = 0;
    while (dump_i < dump_times.size() && dump_times[dump_i] <= grid_tol) {
        out.dumps.push_back({traj.t, traj.psi});
        ++dump_i;
    }

    std::vector<double> rates;
    while (grid_i <= n_grid || dump_i < dump_times.size()) {
        // land the run exactly on t_end (mid-run steps are never shortened to
        // hit display-grid points)
        const double remaining = params.t_end - traj.t;
        if (remaining > 1e-12 * std::max(1.0, params.t_end) && traj.stepper.dttry() > remaining)
            traj.stepper.set_dttry(remaining);
        mcwf_step(traj, sys, params, out.diag, rates);
        while (dump_i < dump_times.size() && dump_times[dump_i] <= traj.t + grid_tol) {
            out.dumps.push_back({traj.t, traj.psi});
            ++dump_i;
        }
        while (grid_i <= n_grid && double(grid_i) * params.display_dt <= traj.t + grid_tol) {
            emit(traj.stepper.dtdid());
            ++grid_i;
        }
    }

    out.diag.truncation_warnings = sys.truncation_warnings();
    out.final_psi = std::move(traj.psi);
    return out;
}

struct EnsembleResult {
    std::vector<double> grid_times;            // nominal output grid
    std::vector<double> mean_times;            // mean actual emission times
    std::vector<double> mean_dtdid;
    std::vector<std::vector<double>> mean;     // [grid slot][column]
    std::vector<std::vector<double>> std_error;
    StepDiagnostics diag;
    std::size_t n_traj = 0;
};

// Trajectory j runs on a fresh composite from the factory with RNG stream
// seed + j; records are aligned on the shared output grid and reduced in
// trajectory order, so results are bit-reproducible.
template <typename Factory>
EnsembleResult run_ensemble(Factory&& make_system, const StateVector& psi0,
                            const TrajectoryParams& params, std::size_t n_traj) {
    if (n_traj < 1) throw ConfigError("run_ensemble: need at least one trajectory");
    validate(params);

    EnsembleResult out;
    out.n_traj = n_traj;
    std::vector<std::vector<double>> m2; // Welford accumulators per slot/column
    std::vector<double> t_sum, dt_sum;

    for (std::size_t j = 0; j < n_traj; ++j) {
        Composite sys = make_system();
        TrajectoryParams pj = params;
        pj.seed = params.seed + j;
        pj.dump_times.clear();
        const TrajectoryResult res = run_trajectory(sys, psi0, pj);

        if (j == 0) {
            const std::size_t slots = res.records.size();
            const std::size_t cols = slots ? res.records[0].values.size() : 0;
            out.grid_times.resize(slots);
            for (std::size_t s = 0; s < slots; ++s) out.grid_times[s] = double(s) * params.display_dt;
            out.mean.assign(slots, std::vector<double>(cols, 0.0));
            out.std_error.assign(slots, std::vector<double>(cols, 0.0));
            m2.assign(slots, std::vector<double>(cols, 0.0));
            t_sum.assign(slots, 0.0);
            dt_sum.assign(slots, 0.0);
        } else if (res.records.size() != out.mean.size()) {
            throw std::logic_error("run_ensemble: trajectories produced differing record counts");
        }

        const double n = double(j + 1);
        for (std::size_t s = 0; s < res.records.size(); ++s) {
            t_sum[s] += res.records[s].t;
            dt_sum[s] += res.records[s].dtdid;
            for (std::size_t c = 0; c < res.records[s].values.size(); ++c) {
                const double x = res.records[s].values[c];
                const double d = x - out.mean[s][c];
                out.mean[s][c] += d / n;
                m2[s][c] += d * (x - out.mean[s][c]);
            }
        }
        out.diag.merge(res.diag);
    }

    out.mean_times.resize(out.grid_times.size());
    out.mean_dtdid.resize(out.grid_times.size());
    for (std::size_t s = 0; s < out.grid_times.size(); ++s) {
        out.mean_times[s] = t_sum[s] / double(n_traj);
        out.mean_dtdid[s] = dt_sum[s] / double(n_traj);
        if (n_traj > 1)
            for (std::size_t c = 0; c < out.mean[s].size(); ++c)
                out.std_error[s][c] =
                    std::sqrt(std::max(0.0, m2[s][c] / double(n_traj - 1)) / double(n_traj));
    }
    return out;
}

} // namespace qtraj
