// config.hpp — the declarative system config: a line-oriented grammar for
// frees, interactions, initial states and trajectory parameters, plus the
// builder that turns a parsed config into a Composite factory and an initial
// state.
//
// Grammar (one section per header; '#' starts a comment line):
//   [free <n>] kind=<LossyMode|PumpedLossyMode|MovingParticle|PumpedMovingParticle> key=value ...
//   [interaction] kind=<...> subsystems=<comma list> key=value ...
//   [initial] free<n>=<fock n | coherent re,im | packet x0,k0,xsig | momentum k>
//   [trajectory] seed= eps= dplimit= tend= dt_display= ntraj=
// Mode functions are written sin:K, cos:K, plus:K, minus:K. Unknown keys are
// errors. Key=value pairs may follow the section header on the same line or
// appear on their own lines ([initial] entries take the rest of the line, one
// per line).
#pragma once

#include "qtraj/elements.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/mcwf.hpp"
#include "qtraj/statevec.hpp"
#include "qtraj/system.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qtraj {

struct FreeDecl {
    std::string kind;
    std::map<std::string, std::string> params;
    bool operator==(const FreeDecl&) const = default;
};

struct InteractionDecl {
    std::string kind;
    std::vector<std::size_t> subsystems;
    std::map<std::string, std::string> params;
    bool operator==(const InteractionDecl&) const = default;
};

struct TrajectoryDecl {
    std::uint64_t seed = 1;
    double eps = 1e-6;
    double dplimit = 0.01;
    double tend = 0.0;
    double dt_display = 0.0;
    std::size_t ntraj = 1;
    bool operator==(const TrajectoryDecl&) const = default;
};

struct SystemConfig {
    std::vector<FreeDecl> frees;
    std::vector<InteractionDecl> interactions;
    std::map<std::size_t, std::string> initials; // free index -> factory spec
    TrajectoryDecl trajectory;
    bool operator==(const SystemConfig&) const = default;
};

namespace configdetail {

enum class ValueType { Real, NonNegReal, UInt, Bool01, Complex, ModeFn, StateSpec };

struct KeySpec {
    const char* key;
    ValueType type;
    bool required;
};

inline const std::vector<KeySpec>& free_keys(const std::string& kind) {
    static const std::vector<KeySpec> lossy{{"delta_c", ValueType::Real, true},
                                            {"kappa", ValueType::NonNegReal, true},
                                            {"cutoff", ValueType::UInt, true},
                                            {"picture", ValueType::Bool01, false}};
    static const std::vector<KeySpec> pumped_lossy{{"delta_c", ValueType::Real, true},
                                                   {"kappa", ValueType::NonNegReal, true},
                                                   {"cutoff", ValueType::UInt, true},
                                                   {"eta", ValueType::Complex, true},
                                                   {"picture", ValueType::Bool01, false}};
    static const std::vector<KeySpec> particle{{"omega_rec", ValueType::Real, true},
                                               {"resolution", ValueType::UInt, true},
                                               {"picture", ValueType::Bool01, false}};
    static const std::vector<KeySpec> pumped_particle{{"omega_rec", ValueType::Real, true},
                                                      {"resolution", ValueType::UInt, true},
                                                      {"eta_eff", ValueType::NonNegReal, true},
                                                      {"pump_mode", ValueType::ModeFn, true},
                                                      {"picture", ValueType::Bool01, false}};
    static const std::vector<KeySpec> none{};
    if (kind == "LossyMode") return lossy;
    if (kind == "PumpedLossyMode") return pumped_lossy;
    if (kind == "MovingParticle") return particle;
    if (kind == "PumpedMovingParticle") return pumped_particle;
    return none;
}

inline const std::vector<KeySpec>& interaction_keys(const std::string& kind) {
    static const std::vector<KeySpec> orthogonal{{"u0", ValueType::Real, true},
                                                 {"adjust_detuning", ValueType::Bool01, false}};
    static const std::vector<KeySpec> along{{"u0", ValueType::Real, true},
                                            {"cavity_mode", ValueType::ModeFn, true},
                                            {"eta_eff", ValueType::NonNegReal, false},
                                            {"adjust_detuning", ValueType::Bool01, false}};
    static const std::vector<KeySpec> two_modes{{"u01", ValueType::Real, true},
                                                {"u02", ValueType::Real, true},
                                                {"mode1", ValueType::ModeFn, true},
                                                {"mode2", ValueType::ModeFn, true}};
    static const std::vector<KeySpec> identical{{"phi1", ValueType::StateSpec, false},
                                                {"phi2", ValueType::StateSpec, false}};
    static const std::vector<KeySpec> none{};
    if (kind == "ParticleOrthogonalToCavity") return orthogonal;
    if (kind == "ParticleAlongCavity" || kind == "ParticleCavity2D") return along;
    if (kind == "ParticleTwoModes") return two_modes;
    if (kind == "IdenticalParticles") return identical;
    return none;
}

inline bool lex_real(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(v);
}

inline bool lex_uint(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

inline bool lex_complex(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) return lex_real(s);
    return lex_real(s.substr(0, comma)) && lex_real(s.substr(comma + 1));
}

inline bool lex_modefn(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) return false;
    const std::string name = s.substr(0, colon);
    return (name == "sin" || name == "cos" || name == "plus" || name == "minus") &&
           lex_uint(s.substr(colon + 1));
}

// "fock 2", "coherent 1,0", "packet 0,40,0.2", "momentum 3" — a colon may
// replace the first blank so the form also fits single-token contexts.
inline bool lex_statespec(std::string s) {
    const auto sep = s.find_first_of(" :");
    if (sep == std::string::npos) return false;
    const std::string name = s.substr(0, sep);
    std::string args = s.substr(sep + 1);
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto comma = args.find(',', pos);
        parts.push_back(args.substr(pos, comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (name == "fock") return parts.size() == 1 && lex_uint(parts[0]);
    if (name == "momentum") return parts.size() == 1 && lex_real(parts[0]);
    if (name == "coherent") return parts.size() == 2 && lex_real(parts[0]) && lex_real(parts[1]);
    if (name == "packet")
        return parts.size() == 3 && lex_real(parts[0]) && lex_real(parts[1]) && lex_real(parts[2]);
    return false;
}

inline bool lex_value(ValueType t, const std::string& v) {
    switch (t) {
        case ValueType::Real: return lex_real(v);
        case ValueType::NonNegReal: return lex_real(v);
        case ValueType::UInt: return lex_uint(v);
        case ValueType::Bool01: return v == "0" || v == "1";
        case ValueType::Complex: return lex_complex(v);
        case ValueType::ModeFn: return lex_modefn(v);
        case ValueType::StateSpec: return lex_statespec(v);
    }
    return false;
}

inline double parse_real(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

inline std::size_t parse_uint(const std::string& s) { return std::stoull(s); }

inline complex parse_complex(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) return {parse_real(s), 0.0};
    return {parse_real(s.substr(0, comma)), parse_real(s.substr(comma + 1))};
}

inline ModeFunction parse_modefn(const std::string& s) {
    const auto colon = s.find(':');
    const std::string name = s.substr(0, colon);
    ModeFunction mf;
    mf.wavenumber = long(parse_uint(s.substr(colon + 1)));
    mf.kind = name == "sin"    ? ModeFunction::Kind::Sin
              : name == "cos"  ? ModeFunction::Kind::Cos
              : name == "plus" ? ModeFunction::Kind::Plus
                               : ModeFunction::Kind::Minus;
    return mf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

} // namespace configdetail

inline SystemConfig parse_config(const std::string& text) {
    using namespace configdetail;
    SystemConfig cfg;

    enum class Section { None, Free, Interaction, Initial, Trajectory };
    Section section = Section::None;
    FreeDecl* free_decl = nullptr;
    InteractionDecl* inter_decl = nullptr;
    bool have_trajectory = false;
    std::map<std::string, bool> traj_seen;

    auto fail = [](std::size_t line, const std::string& what) -> void {
        throw ParseError(what, line);
    };

    auto handle_kv = [&](std::size_t lineno, const std::string& key, const std::string& value) {
        switch (section) {
            case Section::Free: {
                if (key == "kind") {
                    if (!free_decl->kind.empty()) fail(lineno, "duplicate kind");
                    if (free_keys(value).empty()) fail(lineno, "unknown free kind '" + value + "'");
                    free_decl->kind = value;
                    return;
                }
                if (free_decl->kind.empty()) fail(lineno, "kind must come first in a [free] section");
                const auto& keys = free_keys(free_decl->kind);
                const auto it = std::find_if(keys.begin(), keys.end(),
                                             [&](const KeySpec& k) { return key == k.key; });
                if (it == keys.end())
                    fail(lineno, "unknown key '" + key + "' for " + free_decl->kind);
                if (!lex_value(it->type, value))
                    fail(lineno, "malformed value '" + value + "' for key '" + key + "'");
                if (!free_decl->params.emplace(key, value).second)
                    fail(lineno, "duplicate key '" + key + "'");
                return;
            }
            case Section::Interaction: {
                if (key == "kind") {
                    if (!inter_decl->kind.empty()) fail(lineno, "duplicate kind");
                    if (interaction_keys(value).empty())
                        fail(lineno, "unknown interaction kind '" + value + "'");
                    inter_decl->kind = value;
                    return;
                }
                if (inter_decl->kind.empty())
                    fail(lineno, "kind must come first in an [interaction] section");
                if (key == "subsystems") {
                    if (!inter_decl->subsystems.empty()) fail(lineno, "duplicate subsystems");
                    std::size_t pos = 0;
                    while (true) {
                        const auto comma = value.find(',', pos);
                        const std::string part = value.substr(pos, comma - pos);
                        if (!lex_uint(part)) fail(lineno, "malformed subsystems list '" + value + "'");
                        inter_decl->subsystems.push_back(parse_uint(part));
                        if (comma == std::string::npos) break;
                        pos = comma + 1;
                    }
                    return;
                }
                const auto& keys = interaction_keys(inter_decl->kind);
                const auto it = std::find_if(keys.begin(), keys.end(),
                                             [&](const KeySpec& k) { return key == k.key; });
                if (it == keys.end())
                    fail(lineno, "unknown key '" + key + "' for " + inter_decl->kind);
                if (!lex_value(it->type, value))
                    fail(lineno, "malformed value '" + value + "' for key '" + key + "'");
                if (!inter_decl->params.emplace(key, value).second)
                    fail(lineno, "duplicate key '" + key + "'");
                return;
            }
            case Section::Initial: {
                if (key.rfind("free", 0) != 0 || !lex_uint(key.substr(4)))
                    fail(lineno, "initial entries look like free<n>=<state spec>");
                const std::size_t idx = parse_uint(key.substr(4));
                if (!lex_statespec(value))
                    fail(lineno, "malformed initial state spec '" + value + "'");
                if (!cfg.initials.emplace(idx, value).second)
                    fail(lineno, "duplicate initial state for free " + std::to_string(idx));
                return;
            }
            case Section::Trajectory: {
                static const std::map<std::string, ValueType> keys{
                    {"seed", ValueType::UInt},      {"eps", ValueType::Real},
                    {"dplimit", ValueType::Real},   {"tend", ValueType::Real},
                    {"dt_display", ValueType::Real}, {"ntraj", ValueType::UInt}};
                const auto it = keys.find(key);
                if (it == keys.end()) fail(lineno, "unknown trajectory key '" + key + "'");
                if (!lex_value(it->second, value))
                    fail(lineno, "malformed value '" + value + "' for key '" + key + "'");
                if (traj_seen[key]) fail(lineno, "duplicate trajectory key '" + key + "'");
                traj_seen[key] = true;
                if (key == "seed") cfg.trajectory.seed = parse_uint(value);
                else if (key == "eps") cfg.trajectory.eps = parse_real(value);
                else if (key == "dplimit") cfg.trajectory.dplimit = parse_real(value);
                else if (key == "tend") cfg.trajectory.tend = parse_real(value);
                else if (key == "dt_display") cfg.trajectory.dt_display = parse_real(value);
                else cfg.trajectory.ntraj = parse_uint(value);
                return;
            }
            case Section::None: fail(lineno, "key=value before any section header");
        }
    };

    auto handle_tokens = [&](std::size_t lineno, const std::string& rest) {
        if (section == Section::Initial) {
            const std::string entry = trim(rest);
            if (entry.empty()) return;
            const auto eq = entry.find('=');
            if (eq == std::string::npos) fail(lineno, "expected free<n>=<state spec>");
            handle_kv(lineno, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
            return;
        }
        for (const std::string& tok : split_ws(rest)) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0)
                fail(lineno, "expected key=value, got '" + tok + "'");
            handle_kv(lineno, tok.substr(0, eq), tok.substr(eq + 1));
        }
    };

    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line[0] == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) fail(lineno, "unterminated section header");
            const std::string header = trim(line.substr(1, close - 1));
            const std::string rest = line.substr(close + 1);

            if (header.rfind("free", 0) == 0) {
                const std::string num = trim(header.substr(4));
                if (!lex_uint(num)) fail(lineno, "free sections look like [free <n>]");
                if (parse_uint(num) != cfg.frees.size())
                    fail(lineno, "free sections must be declared in order; expected [free " +
                                     std::to_string(cfg.frees.size()) + "]");
                cfg.frees.emplace_back();
                free_decl = &cfg.frees.back();
                section = Section::Free;
            } else if (header == "interaction") {
                cfg.interactions.emplace_back();
                inter_decl = &cfg.interactions.back();
                section = Section::Interaction;
            } else if (header == "initial") {
                section = Section::Initial;
            } else if (header == "trajectory") {
                if (have_trajectory) fail(lineno, "duplicate [trajectory] section");
                have_trajectory = true;
                section = Section::Trajectory;
            } else {
                fail(lineno, "unknown section '" + header + "'");
            }
            handle_tokens(lineno, rest);
            continue;
        }
        handle_tokens(lineno, line);
    }

    for (std::size_t i = 0; i < cfg.frees.size(); ++i)
        if (cfg.frees[i].kind.empty())
            throw ParseError("free " + std::to_string(i) + " is missing its kind", lineno);
    for (std::size_t i = 0; i < cfg.interactions.size(); ++i)
        if (cfg.interactions[i].kind.empty())
            throw ParseError("interaction " + std::to_string(i) + " is missing its kind", lineno);
    return cfg;
}

inline std::string serialize_config(const SystemConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < cfg.frees.size(); ++i) {
        out << "[free " << i << "] kind=" << cfg.frees[i].kind;
        for (const auto& [k, v] : cfg.frees[i].params) out << " " << k << "=" << v;
        out << "\n";
    }
    for (const auto& ia : cfg.interactions) {
        out << "[interaction] kind=" << ia.kind << " subsystems=";
        for (std::size_t s = 0; s < ia.subsystems.size(); ++s)
            out << (s ? "," : "") << ia.subsystems[s];
        for (const auto& [k, v] : ia.params) out << " " << k << "=" << v;
        out << "\n";
    }
    for (const auto& [idx, spec] : cfg.initials)
        out << "[initial] free" << idx << "=" << spec << "\n";
    const auto& t = cfg.trajectory;
    out << "[trajectory] seed=" << t.seed << " eps=" << t.eps << " dplimit=" << t.dplimit
        << " tend=" << t.tend << " dt_display=" << t.dt_display << " ntraj=" << t.ntraj << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

namespace configdetail {

inline void require_keys(const std::string& kind, const std::map<std::string, std::string>& params,
                         const std::vector<KeySpec>& keys) {
    for (const auto& k : keys)
        if (k.required && !params.count(k.key))
            throw ConfigError(kind + ": missing required key '" + std::string(k.key) + "'");
}

inline StateVector build_state(const std::string& spec, std::size_t dim, FreeKind kind) {
    const auto sep = spec.find_first_of(" :");
    const std::string name = spec.substr(0, sep);
    const std::string args = spec.substr(sep + 1);
    std::vector<double> vals;
    std::size_t pos = 0;
    while (true) {
        const auto comma = args.find(',', pos);
        vals.push_back(parse_real(trim(args.substr(pos, comma - pos))));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (name == "fock") {
        if (kind != FreeKind::Mode) throw ConfigError("fock states are for modes");
        return fock_state(std::size_t(vals[0]), dim);
    }
    if (name == "coherent") {
        if (kind != FreeKind::Mode) throw ConfigError("coherent states are for modes");
        return coherent_state({vals[0], vals[1]}, dim);
    }
    if (name == "packet") {
        if (kind != FreeKind::Particle) throw ConfigError("wave packets are for particles");
        return wave_packet(vals[0], vals[1], vals[2], dim);
    }
    if (name == "momentum") {
        if (kind != FreeKind::Particle) throw ConfigError("momentum states are for particles");
        const long k = long(vals[0]);
        const long idx = k + long(dim / 2);
        if (idx < 0 || idx >= long(dim))
            throw ConfigError("momentum " + std::to_string(k) + " is outside the grid");
        return fock_state(std::size_t(idx), dim);
    }
    throw ConfigError("unknown state factory '" + name + "'");
}

inline std::shared_ptr<FreeElement> build_free(const FreeDecl& d) {
    require_keys(d.kind, d.params, free_keys(d.kind));
    auto get = [&](const char* k) { return d.params.at(k); };
    const bool picture = !d.params.count("picture") || d.params.at("picture") == "1";
    if (d.kind == "LossyMode")
        return std::make_shared<LossyMode>(parse_real(get("delta_c")), parse_real(get("kappa")),
                                           parse_uint(get("cutoff")), picture);
    if (d.kind == "PumpedLossyMode")
        return std::make_shared<PumpedLossyMode>(parse_real(get("delta_c")), parse_real(get("kappa")),
                                                 parse_uint(get("cutoff")),
                                                 parse_complex(get("eta")), picture);
    if (d.kind == "MovingParticle")
        return std::make_shared<MovingParticle>(parse_real(get("omega_rec")),
                                                parse_uint(get("resolution")), picture);
    if (d.kind == "PumpedMovingParticle")
        return std::make_shared<PumpedMovingParticle>(
            parse_real(get("omega_rec")), parse_uint(get("resolution")),
            parse_real(get("eta_eff")), parse_modefn(get("pump_mode")), picture);
    throw ConfigError("unknown free kind '" + d.kind + "'");
}

inline std::shared_ptr<InteractionElement> build_interaction(const InteractionDecl& d,
                                                             const std::vector<FreeDecl>& frees) {
    require_keys(d.kind, d.params, interaction_keys(d.kind));
    auto get = [&](const char* k) { return d.params.at(k); };
    const bool adjust = !d.params.count("adjust_detuning") || d.params.at("adjust_detuning") == "1";
    std::optional<double> eta_eff;
    if (d.params.count("eta_eff")) eta_eff = parse_real(d.params.at("eta_eff"));

    if (d.kind == "ParticleOrthogonalToCavity")
        return std::make_shared<ParticleOrthogonalToCavity>(parse_real(get("u0")), adjust);
    if (d.kind == "ParticleAlongCavity")
        return std::make_shared<ParticleAlongCavity>(parse_real(get("u0")),
                                                     parse_modefn(get("cavity_mode")), eta_eff,
                                                     adjust);
    if (d.kind == "ParticleCavity2D")
        return std::make_shared<ParticleCavity2D>(parse_real(get("u0")),
                                                  parse_modefn(get("cavity_mode")), eta_eff, adjust);
    if (d.kind == "ParticleTwoModes")
        return std::make_shared<ParticleTwoModes>(parse_real(get("u01")), parse_modefn(get("mode1")),
                                                  parse_real(get("u02")),
                                                  parse_modefn(get("mode2")));
    if (d.kind == "IdenticalParticles") {
        const bool p1 = d.params.count("phi1"), p2 = d.params.count("phi2");
        if (p1 != p2)
            throw ConfigError("IdenticalParticles: phi1 and phi2 must be supplied together");
        if (!p1) return std::make_shared<IdenticalParticles>();
        if (d.subsystems.empty() || d.subsystems[0] >= frees.size())
            throw ConfigError("IdenticalParticles: cannot resolve the wired particle");
        const FreeDecl& pd = frees[d.subsystems[0]];
        if (!pd.params.count("resolution"))
            throw ConfigError("IdenticalParticles: wired free is not a particle");
        const std::size_t dim = parse_uint(pd.params.at("resolution"));
        return std::make_shared<IdenticalParticles>(
            build_state(d.params.at("phi1"), dim, FreeKind::Particle),
            build_state(d.params.at("phi2"), dim, FreeKind::Particle));
    }
    throw ConfigError("unknown interaction kind '" + d.kind + "'");
}

} // namespace configdetail

struct BuiltSystem {
    std::function<Composite()> make_composite; // fresh element instances per call
    StateVector initial_state;
    TrajectoryParams params;
    std::size_t ntraj = 1;
};

// Identical declarations share one element object within each composite, so
// e.g. two equal [free] blocks wired into an IdenticalParticles interaction
// reference a single particle instance, and a twice-wired interaction adjusts
// the frees once per occurrence.
inline BuiltSystem build_system(const SystemConfig& cfg) {
    using namespace configdetail;
    if (cfg.frees.empty()) throw ConfigError("config declares no free subsystems");
    if (!(cfg.trajectory.tend > 0.0)) throw ConfigError("trajectory: tend must be positive");
    if (!(cfg.trajectory.dt_display > 0.0))
        throw ConfigError("trajectory: dt_display must be positive");

    auto factory = [cfg]() {
        std::vector<std::shared_ptr<FreeElement>> frees;
        std::map<std::pair<std::string, std::string>, std::shared_ptr<FreeElement>> free_cache;
        for (const auto& d : cfg.frees) {
            std::string pkey;
            for (const auto& [k, v] : d.params) pkey += k + "=" + v + ";";
            auto& slot = free_cache[{d.kind, pkey}];
            if (!slot) slot = build_free(d);
            frees.push_back(slot);
        }
        std::vector<SubsystemsInteraction> wirings;
        std::map<std::string, std::shared_ptr<InteractionElement>> inter_cache;
        for (const auto& d : cfg.interactions) {
            std::string pkey = d.kind + ";";
            for (const auto& [k, v] : d.params) pkey += k + "=" + v + ";";
            auto& slot = inter_cache[pkey];
            if (!slot) slot = build_interaction(d, cfg.frees);
            wirings.push_back({slot, d.subsystems});
        }
        return Composite(std::move(frees), std::move(wirings));
    };

    BuiltSystem out;
    const Composite probe = factory(); // validates the wiring once up front

    StateVector psi;
    for (std::size_t i = 0; i < cfg.frees.size(); ++i) {
        const auto it = cfg.initials.find(i);
        if (it == cfg.initials.end())
            throw ConfigError("no initial state declared for free " + std::to_string(i));
        StateVector factor = build_state(it->second, probe.free_at(i).dim(), probe.free_at(i).kind());
        psi = i == 0 ? std::move(factor) : direct_product(psi, factor);
    }
    for (const auto& [idx, spec] : cfg.initials)
        if (idx >= cfg.frees.size())
            throw ConfigError("initial state declared for nonexistent free " + std::to_string(idx));

    out.make_composite = std::move(factory);
    out.initial_state = std::move(psi);
    out.params.seed = cfg.trajectory.seed;
    out.params.eps = cfg.trajectory.eps;
    out.params.dplimit = cfg.trajectory.dplimit;
    out.params.t_end = cfg.trajectory.tend;
    out.params.display_dt = cfg.trajectory.dt_display;
    out.ntraj = cfg.trajectory.ntraj;
    return out;
}

} // namespace qtraj
