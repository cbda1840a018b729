// system.hpp — the capability-based system hierarchy: free subsystems,
// interactions, and the Composite that wires them together.
//
// A Composite validates its wiring at construction (kinds, order, arity,
// aliasing), precomputes one SliceView per element, and runs each
// interaction's frees_adjust once per wiring occurrence. After construction
// it is immutable apart from element-local counters, and dispatches
// H/U/jump/display over its elements.
#pragma once

#include "qtraj/errors.hpp"
#include "qtraj/statevec.hpp"

#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace qtraj {

enum class FreeKind { Mode, Particle };

inline const char* to_string(FreeKind k) { return k == FreeKind::Mode ? "mode" : "particle"; }

class FreeElement {
public:
    virtual ~FreeElement() = default;

    virtual std::size_t dim() const = 0;
    virtual FreeKind kind() const = 0;
    virtual bool pumped() const { return false; }
    virtual std::string name() const = 0;
    virtual std::string param_summary() const = 0;
    virtual double highest_frequency() const = 0;

    virtual bool has_hamiltonian() const { return false; }
    virtual void add_hamiltonian(double /*tau*/, const SliceView&, std::span<const complex> /*psi*/,
                                 std::span<complex> /*dpsidt*/) const {}

    virtual bool has_exact_propagator() const { return false; }
    virtual void apply_exact_propagator(double /*dt*/, const SliceView&,
                                        std::span<complex> /*psi*/) const {}

    virtual std::size_t jump_channel_count() const { return 0; }
    virtual double jump_rate(std::size_t /*channel*/, const SliceView&,
                             std::span<const complex> /*psi*/) const { return 0.0; }
    virtual void apply_jump(std::size_t /*channel*/, const SliceView&,
                            std::span<complex> /*psi*/) const {}

    virtual std::vector<std::string> display_labels() const { return {}; }
    virtual void display(const SliceView&, const StateVector& /*psi*/,
                         std::vector<double>& /*out*/) const {}

    std::size_t truncation_warnings() const { return truncation_warnings_; }

protected:
    // Counts jump/raise applications that met non-negligible population at the
    // truncation edge. Confined to the owning trajectory's thread.
    mutable std::size_t truncation_warnings_ = 0;
};

struct SlotSpec {
    FreeKind kind;
    bool require_pumped = false;
};

class InteractionElement {
public:
    virtual ~InteractionElement() = default;

    virtual std::string name() const = 0;
    virtual std::string param_summary() const = 0;
    virtual std::size_t arity() const = 0;
    virtual SlotSpec slot_spec(std::size_t slot) const = 0;

    // Whether two slots may be wired to the same free sequential number.
    virtual bool slots_may_alias(std::size_t, std::size_t) const { return false; }

    // Element-specific wiring checks beyond kind/order/arity.
    virtual void validate(std::span<const FreeElement* const> /*bound*/) const {}

    // Construction-time parameter adjustment of the wired frees, invoked once
    // per wiring occurrence of this interaction.
    virtual void frees_adjust(std::span<FreeElement* const> /*bound*/) const {}

    // When true the wired frees' display groups are switched off and this
    // element's own output takes over.
    virtual bool suppresses_wired_display() const { return false; }

    virtual double highest_frequency(std::span<const FreeElement* const> bound) const = 0;

    virtual bool has_hamiltonian() const { return false; }
    // slot_axis maps each slot to its axis within the view (slots wired to the
    // same free share an axis).
    virtual void add_hamiltonian(double /*tau*/, const SliceView&,
                                 std::span<const std::size_t> /*slot_axis*/,
                                 std::span<const FreeElement* const> /*bound*/,
                                 std::span<const complex> /*psi*/,
                                 std::span<complex> /*dpsidt*/) const {}

    virtual std::vector<std::string> display_labels() const { return {}; }
    virtual void display(const SliceView&, std::span<const std::size_t> /*slot_axis*/,
                         std::span<const FreeElement* const> /*bound*/, const StateVector& /*psi*/,
                         std::vector<double>& /*out*/) const {}
};

// Wiring declaration: an interaction plus the free sequential numbers it acts
// between, in the interaction's declared slot order.
struct SubsystemsInteraction {
    std::shared_ptr<InteractionElement> interaction;
    std::vector<std::size_t> subsystems;
};

class Composite {
public:
    Composite(std::vector<std::shared_ptr<FreeElement>> frees,
              std::vector<SubsystemsInteraction> wirings)
        : frees_(std::move(frees)), total_dim_(1) {
        if (frees_.empty()) throw ConstructionError("composite: no free subsystems");

        for (std::size_t i = 0; i < frees_.size(); ++i) {
            const auto& f = frees_[i];
            if (!f) throw ConstructionError("composite: free " + std::to_string(i) + " is null");
            const bool capable = f->has_hamiltonian() || f->has_exact_propagator() ||
                                 f->jump_channel_count() > 0 || !f->display_labels().empty();
            if (!capable)
                throw ConstructionError("composite: free " + std::to_string(i) + " (" + f->name() +
                                        ") implements no capability");
            dims_.push_back(f->dim());
            total_dim_ *= f->dim();
        }

        for (std::size_t i = 0; i < frees_.size(); ++i) {
            const std::size_t ax[1] = {i};
            free_views_.push_back(make_view(dims_, ax));
        }
        free_display_suppressed_.assign(frees_.size(), false);

        for (std::size_t w = 0; w < wirings.size(); ++w)
            bind_wiring(w, wirings[w]);

        // FreesAdjust runs exactly here, once per wiring occurrence, never at
        // element construction.
        for (auto& b : wirings_) {
            std::vector<FreeElement*> mut;
            for (std::size_t s : b.subsystems) mut.push_back(frees_[s].get());
            b.interaction->frees_adjust(mut);
            if (b.interaction->suppresses_wired_display())
                for (std::size_t s : b.subsystems) free_display_suppressed_[s] = true;
        }

        for (std::size_t i = 0; i < frees_.size(); ++i)
            for (std::size_t c = 0; c < frees_[i]->jump_channel_count(); ++c)
                jump_channels_.push_back({i, c});
    }

    std::size_t total_dim() const { return total_dim_; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t free_count() const { return frees_.size(); }
    const FreeElement& free_at(std::size_t i) const { return *frees_[i]; }
    const std::shared_ptr<FreeElement>& free_ptr(std::size_t i) const { return frees_[i]; }
    const SliceView& free_view(std::size_t i) const { return free_views_[i]; }
    bool free_display_suppressed(std::size_t i) const { return free_display_suppressed_[i]; }

    std::size_t wiring_count() const { return wirings_.size(); }
    const InteractionElement& interaction_at(std::size_t w) const { return *wirings_[w].interaction; }
    const SliceView& interaction_view(std::size_t w) const { return wirings_[w].view; }
    const std::vector<std::size_t>& wiring_subsystems(std::size_t w) const {
        return wirings_[w].subsystems;
    }

    bool has_hamiltonian() const {
        for (const auto& f : frees_)
            if (f->has_hamiltonian()) return true;
        for (const auto& b : wirings_)
            if (b.interaction->has_hamiltonian()) return true;
        return false;
    }

    // Adds every element's -i H_I(tau) |psi> contribution; the caller zeroes
    // the accumulator before the first element.
    void apply_hamiltonian(double tau, std::span<const complex> psi, std::span<complex> dpsidt) const {
        for (std::size_t i = 0; i < frees_.size(); ++i)
            if (frees_[i]->has_hamiltonian())
                frees_[i]->add_hamiltonian(tau, free_views_[i], psi, dpsidt);
        for (const auto& b : wirings_)
            if (b.interaction->has_hamiltonian())
                b.interaction->add_hamiltonian(tau, b.view, b.slot_axis, bound_span(b), psi, dpsidt);
    }

    void apply_exact_propagator(double dt, std::span<complex> psi) const {
        for (std::size_t i = 0; i < frees_.size(); ++i)
            if (frees_[i]->has_exact_propagator())
                frees_[i]->apply_exact_propagator(dt, free_views_[i], psi);
    }

    std::size_t jump_channel_count() const { return jump_channels_.size(); }

    // One rate per channel, channel ids stable for the composite's lifetime.
    void jump_rates(std::span<const complex> psi, std::vector<double>& rates) const {
        rates.resize(jump_channels_.size());
        for (std::size_t c = 0; c < jump_channels_.size(); ++c) {
            const auto& [pos, elem_channel] = jump_channels_[c];
            rates[c] = frees_[pos]->jump_rate(elem_channel, free_views_[pos], psi);
        }
    }

    // Applies the channel's jump operator over the owning element's view and
    // renormalizes exactly.
    void apply_jump(std::size_t channel, StateVector& psi) const {
        if (channel >= jump_channels_.size())
            throw std::out_of_range("apply_jump: no such channel");
        const auto& [pos, elem_channel] = jump_channels_[channel];
        frees_[pos]->apply_jump(elem_channel, free_views_[pos], psi.amps());
        psi.normalize();
    }

    std::vector<std::string> display_labels() const {
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < frees_.size(); ++i) {
            if (free_display_suppressed_[i]) continue;
            for (const auto& l : frees_[i]->display_labels())
                labels.push_back("free" + std::to_string(i) + " " + l);
        }
        for (std::size_t w = 0; w < wirings_.size(); ++w)
            for (const auto& l : wirings_[w].interaction->display_labels())
                labels.push_back("int" + std::to_string(w) + " " + l);
        return labels;
    }

    // widths of the tab-separated display groups, in emission order
    std::vector<std::size_t> display_group_sizes() const {
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i < frees_.size(); ++i) {
            if (free_display_suppressed_[i]) continue;
            const std::size_t n = frees_[i]->display_labels().size();
            if (n) sizes.push_back(n);
        }
        for (const auto& b : wirings_) {
            const std::size_t n = b.interaction->display_labels().size();
            if (n) sizes.push_back(n);
        }
        return sizes;
    }

    // Per-element average groups in free order, then interaction outputs in
    // wiring order; suppressed frees contribute nothing.
    void display(const StateVector& psi, std::vector<double>& out) const {
        out.clear();
        for (std::size_t i = 0; i < frees_.size(); ++i) {
            if (free_display_suppressed_[i]) continue;
            frees_[i]->display(free_views_[i], psi, out);
        }
        for (const auto& b : wirings_)
            b.interaction->display(b.view, b.slot_axis, bound_span(b), psi, out);
    }

    double highest_frequency() const {
        double hf = 0.0;
        for (const auto& f : frees_) hf = std::max(hf, f->highest_frequency());
        for (const auto& b : wirings_)
            hf = std::max(hf, b.interaction->highest_frequency(bound_span(b)));
        if (!(hf > 0.0))
            throw ConfigError("composite: every element reports zero highest frequency (no timescale)");
        return hf;
    }

    std::size_t truncation_warnings() const {
        std::set<const FreeElement*> seen;
        std::size_t total = 0;
        for (const auto& f : frees_)
            if (seen.insert(f.get()).second) total += f->truncation_warnings();
        return total;
    }

private:
    struct Binding {
        std::shared_ptr<InteractionElement> interaction;
        std::vector<std::size_t> subsystems;      // wiring tuple as declared
        std::vector<std::size_t> slot_axis;       // slot -> axis within view
        std::vector<const FreeElement*> bound;    // slot -> wired free
        SliceView view;                           // spans the unique wired factors
    };

    std::span<const FreeElement* const> bound_span(const Binding& b) const {
        return {b.bound.data(), b.bound.size()};
    }

    void bind_wiring(std::size_t w, const SubsystemsInteraction& si) {
        if (!si.interaction)
            throw ConstructionError("wiring " + std::to_string(w) + ": null interaction");
        const auto& ia = *si.interaction;
        const std::string label = "wiring " + std::to_string(w) + " (" + ia.name() + ")";

        if (si.subsystems.size() != ia.arity())
            throw ConstructionError(label + ": expects " + std::to_string(ia.arity()) +
                                    " subsystems, got " + std::to_string(si.subsystems.size()));

        Binding b;
        b.interaction = si.interaction;
        b.subsystems = si.subsystems;

        for (std::size_t slot = 0; slot < si.subsystems.size(); ++slot) {
            const std::size_t idx = si.subsystems[slot];
            if (idx >= frees_.size())
                throw ConstructionError(label + ": subsystem index " + std::to_string(idx) +
                                        " out of range");
            const FreeElement& f = *frees_[idx];
            const SlotSpec spec = ia.slot_spec(slot);
            if (f.kind() != spec.kind)
                throw ConstructionError(label + ": slot " + std::to_string(slot) + " expects a " +
                                        to_string(spec.kind) + " but free " + std::to_string(idx) +
                                        " is " + f.name());
            if (spec.require_pumped && !f.pumped())
                throw ConstructionError(label + ": slot " + std::to_string(slot) +
                                        " expects a pumped " + to_string(spec.kind) + " but free " +
                                        std::to_string(idx) + " is " + f.name());
            b.bound.push_back(&f);
        }

        // Aliased slots (same sequential number twice) are allowed only along
        // the interaction's sanctioned path.
        std::vector<std::size_t> unique_axes;
        for (std::size_t slot = 0; slot < si.subsystems.size(); ++slot) {
            const std::size_t idx = si.subsystems[slot];
            std::size_t axis = unique_axes.size();
            for (std::size_t u = 0; u < unique_axes.size(); ++u)
                if (unique_axes[u] == idx) { axis = u; break; }
            if (axis == unique_axes.size()) {
                unique_axes.push_back(idx);
            } else {
                for (std::size_t prev = 0; prev < slot; ++prev)
                    if (si.subsystems[prev] == idx && !ia.slots_may_alias(prev, slot))
                        throw ConstructionError(label + ": slots " + std::to_string(prev) + " and " +
                                                std::to_string(slot) +
                                                " may not share subsystem " + std::to_string(idx));
            }
            b.slot_axis.push_back(axis);
        }

        b.view = make_view(dims_, unique_axes);
        ia.validate(bound_span(b));
        wirings_.push_back(std::move(b));
    }

    std::vector<std::shared_ptr<FreeElement>> frees_;
    std::vector<std::size_t> dims_;
    std::size_t total_dim_;
    std::vector<SliceView> free_views_;
    std::vector<bool> free_display_suppressed_;
    std::vector<Binding> wirings_;
    std::vector<std::pair<std::size_t, std::size_t>> jump_channels_; // (free position, element channel)
};

} // namespace qtraj
