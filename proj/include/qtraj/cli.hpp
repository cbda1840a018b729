// cli.hpp — the config-driven driver behind the command-line tool: runs a
// trajectory or an ensemble from a parsed SystemConfig and writes the output
// format.
//
// Output contract: '#'-prefixed header lines summarising the parameters, then
// one row per output instant: time and time step, followed by the per-element
// average groups in declaration order (tab between groups, spaces within,
// 10 significant digits). Ensembles append the standard-error columns after
// the mean groups. Dense-oracle comparison rows are prefixed "#O". Exit
// codes: 0 success, 2 config syntax, 3 construction/validation, 4 numerical
// fault.
#pragma once

#include "qtraj/config.hpp"
#include "qtraj/mcwf.hpp"
#include "qtraj/oracle.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qtraj {

struct CliOptions {
    std::optional<std::uint64_t> seed;   // overrides the config
    std::optional<std::size_t> ntraj;    // overrides the config
    bool with_oracle = false;            // run the dense oracle alongside
    std::vector<double> dump_times;      // full-state dump instants
    std::string dump_basename = "state"; // sidecar files <base>.dump<i>.txt
};

namespace clidetail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_row(std::ostream& out, double t, double dt, const std::vector<double>& values,
                      const std::vector<std::size_t>& groups, const std::vector<double>* errors) {
    out << fmt(t) << ' ' << fmt(dt);
    std::size_t col = 0;
    for (std::size_t g : groups) {
        out << '\t';
        for (std::size_t c = 0; c < g; ++c, ++col) out << (c ? " " : "") << fmt(values[col]);
    }
    if (errors) {
        col = 0;
        for (std::size_t g : groups) {
            out << '\t';
            for (std::size_t c = 0; c < g; ++c, ++col) out << (c ? " " : "") << fmt((*errors)[col]);
        }
    }
    out << '\n';
}

inline void write_dump(const std::string& path, double t, const StateVector& psi) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open state dump file '" + path + "'");
    f << "# state dump at t = " << fmt(t) << "\n# dims:";
    for (std::size_t d : psi.dims()) f << ' ' << d;
    f << '\n';
    for (const complex& a : psi.amps()) f << fmt(a.real()) << ' ' << fmt(a.imag()) << '\n';
}

inline void write_header(std::ostream& out, const Composite& sys,
                         const TrajectoryParams& params, std::size_t ntraj) {
    out << "# qtraj " << (ntraj > 1 ? "ensemble" : "trajectory") << " run\n";
    for (std::size_t i = 0; i < sys.free_count(); ++i)
        out << "# free " << i << ": " << sys.free_at(i).name() << " "
            << sys.free_at(i).param_summary()
            << (sys.free_display_suppressed(i) ? " (display off)" : "") << "\n";
    for (std::size_t w = 0; w < sys.wiring_count(); ++w) {
        out << "# interaction " << w << ": " << sys.interaction_at(w).name() << " subsystems=";
        const auto& subs = sys.wiring_subsystems(w);
        for (std::size_t s = 0; s < subs.size(); ++s) out << (s ? "," : "") << subs[s];
        out << " " << sys.interaction_at(w).param_summary() << "\n";
    }
    out << "# trajectory: seed=" << params.seed << " eps=" << fmt(params.eps)
        << " dplimit=" << fmt(params.dplimit) << " tend=" << fmt(params.t_end)
        << " dt_display=" << fmt(params.display_dt) << " ntraj=" << ntraj << "\n";
    out << "# columns: t dt";
    for (const auto& l : sys.display_labels()) out << " | " << l;
    if (ntraj > 1) out << " | standard errors repeat the value columns";
    out << "\n";
}

inline void write_oracle_comparison(std::ostream& out, const Composite& sys,
                                    const StateVector& psi0, double eps,
                                    const std::vector<double>& times,
                                    const std::vector<std::vector<double>>& run_rows,
                                    const std::vector<std::string>& run_labels) {
    const oracle::MasterSeries series = oracle::integrate_master(sys, psi0, eps, times);
    out << "#O oracle: dense master equation, total_dim=" << sys.total_dim() << "\n";
    out << "#O columns: t";
    for (const auto& l : series.labels) out << " | " << l;
    out << "\n";
    for (std::size_t s = 0; s < series.times.size(); ++s) {
        out << "#O " << fmt(series.times[s]);
        for (double v : series.rows[s]) out << ' ' << fmt(v);
        out << "\n";
    }
    // compare the columns present in both label sets, in oracle order
    for (std::size_t oc = 0; oc < series.labels.size(); ++oc) {
        std::size_t rc = run_labels.size();
        for (std::size_t c = 0; c < run_labels.size(); ++c)
            if (run_labels[c] == series.labels[oc]) {
                rc = c;
                break;
            }
        if (rc == run_labels.size()) continue;
        double dev = 0.0;
        for (std::size_t s = 0; s < series.times.size(); ++s)
            dev = std::max(dev, std::abs(series.rows[s][oc] - run_rows[s][rc]));
        out << "# oracle-deviation " << series.labels[oc] << ": " << fmt(dev) << "\n";
    }
}

} // namespace clidetail

// Runs the configured system and writes all output; throws on errors (the
// binary maps exception types to exit codes).
inline void run(const SystemConfig& cfg, const CliOptions& opt, std::ostream& out) {
    BuiltSystem built = build_system(cfg);
    if (opt.seed) built.params.seed = *opt.seed;
    if (opt.ntraj) built.ntraj = *opt.ntraj;
    built.params.dump_times = opt.dump_times;

    const Composite sys = built.make_composite();
    clidetail::write_header(out, sys, built.params, built.ntraj);
    const std::vector<std::size_t> groups = sys.display_group_sizes();
    const std::vector<std::string> labels = sys.display_labels();

    if (built.ntraj <= 1) {
        const TrajectoryResult res = run_trajectory(sys, built.initial_state, built.params);
        for (const auto& r : res.records)
            clidetail::write_row(out, r.t, r.dtdid, r.values, groups, nullptr);
        for (std::size_t d = 0; d < res.dumps.size(); ++d)
            clidetail::write_dump(opt.dump_basename + ".dump" + std::to_string(d) + ".txt",
                                  res.dumps[d].t, res.dumps[d].psi);
        if (res.diag.truncation_warnings > 0)
            out << "# warning: " << res.diag.truncation_warnings
                << " jump(s) met non-negligible population at the cutoff\n";
        if (opt.with_oracle) {
            std::vector<double> times;
            std::vector<std::vector<double>> rows;
            for (const auto& r : res.records) {
                times.push_back(r.t);
                rows.push_back(r.values);
            }
            clidetail::write_oracle_comparison(out, sys, built.initial_state, built.params.eps,
                                               times, rows, labels);
        }
    } else {
        if (!opt.dump_times.empty())
            throw ConfigError("state dumps require a single-trajectory run (ntraj=1)");
        const EnsembleResult ens =
            run_ensemble(built.make_composite, built.initial_state, built.params, built.ntraj);
        for (std::size_t s = 0; s < ens.mean.size(); ++s)
            clidetail::write_row(out, ens.mean_times[s], ens.mean_dtdid[s], ens.mean[s], groups,
                                 &ens.std_error[s]);
        if (ens.diag.truncation_warnings > 0)
            out << "# warning: " << ens.diag.truncation_warnings
                << " jump(s) met non-negligible population at the cutoff\n";
        if (opt.with_oracle)
            clidetail::write_oracle_comparison(out, sys, built.initial_state, built.params.eps,
                                               ens.mean_times, ens.mean, labels);
    }
}

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return 2;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ConstructionError*>(&e)) return 3;
    if (dynamic_cast<const DegenerateStateError*>(&e) || dynamic_cast<const StiffnessError*>(&e) ||
        dynamic_cast<const StepSizeFault*>(&e))
        return 4;
    return 1;
}

} // namespace qtraj
