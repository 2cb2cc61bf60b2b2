#include <algorithm>
#include <cmath>

#include "philab/scenario.hpp"

namespace philab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ValidationError, what);
}

// Block-level DomainError surfaces as ValidationError at scenario level.
template <class P>
void validate_params(const P& p, const std::string& where) {
    try {
        validate(p);
    } catch (const Error& e) {
        throw Error(ErrorCode::ValidationError, where + ": " + e.what());
    }
}

bool integer_ratio(Real num, Real den) {
    const Real r = num / den;
    return std::abs(r - std::round(r)) <= 1e-6 * std::max(1.0, std::abs(r));
}

} // namespace

std::size_t SolverSettings::steps() const {
    const Real r = t_end_s / dt_s;
    const Real n = std::round(r);
    if (std::abs(r - n) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(n);
    return static_cast<std::size_t>(std::floor(r));
}

std::size_t ScheduleEntry::step_index(Real dt_s) const {
    const Real k = std::ceil(t_s / dt_s - 1e-9);
    return k <= 0.0 ? 0 : static_cast<std::size_t>(k);
}

void validate(const Scenario& s, bool require_load) {
    require(s.solver.dt_s > 0.0 && std::isfinite(s.solver.dt_s), "solver.dt_s must be positive");
    require(s.solver.t_end_s >= 0.0 && std::isfinite(s.solver.t_end_s), "solver.t_end_s must be nonnegative");
    require(s.phil.tau1_s >= 0.0 && s.phil.tau2_s >= 0.0, "phil delays must be nonnegative");
    require(integer_ratio(s.phil.tau1_s, s.solver.dt_s), "phil.tau1_s must be an integer multiple of solver.dt_s");
    require(integer_ratio(s.phil.tau2_s, s.solver.dt_s), "phil.tau2_s must be an integer multiple of solver.dt_s");
    require(s.phil.interface_cutoff_hz > 0.0, "phil.interface_cutoff_hz must be positive");
    require(!require_load || !s.loads.empty(), "scenario needs at least one load");

    std::visit([](const auto& p) { validate_params(p, "source"); }, s.source);
    const Real v_nom = nominal_bus_voltage(s.source);
    for (std::size_t k = 0; k < s.loads.size(); ++k) {
        const std::string where = "load " + std::to_string(k);
        std::visit([&](const auto& p) { validate_params(p, where); }, s.loads[k]);
        if (const auto* r = std::get_if<ReducedOrderLoadParams>(&s.loads[k])) {
            require(r->v_nom_v > 0.0 && std::abs(r->v_nom_v - v_nom) <= 0.5 * v_nom,
                    where + ": v_nom_v far from the source voltage");
        }
    }

    Real t_prev = -std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < s.schedule.size(); ++k) {
        const auto& e = s.schedule[k];
        const std::string where = "schedule " + std::to_string(k);
        require(e.t_s >= 0.0 && std::isfinite(e.t_s), where + ": t_s must be nonnegative");
        require(e.t_s >= t_prev, "schedule times must be sorted ascending");
        t_prev = e.t_s;
        require(e.load < s.loads.size(), where + ": load index out of range");
        const bool reduced = std::holds_alternative<ReducedOrderLoadParams>(s.loads[e.load]);
        require(std::isfinite(e.p_ref_w) && (reduced ? e.p_ref_w > 0.0 : e.p_ref_w >= 0.0),
                where + ": p_ref_w out of range for the load model");
    }
}

Real nominal_bus_voltage(const SourceSpec& src) {
    return std::visit(overloaded{[](const LcFilterParams& p) { return p.v_source_v; },
                                 [](const BoostParams& p) { return p.v_out_ref_v; }},
                      src);
}

Real load_power(const LoadSpec& load) {
    return std::visit(overloaded{[](const ReducedOrderLoadParams& p) { return p.p_o_w; },
                                 [](const AvgInverterParams& p) { return p.p_ref_w; }},
                      load);
}

Real load_eta(const LoadSpec& load) {
    return std::visit([](const auto& p) { return p.eta; }, load);
}

Real load_ci(const LoadSpec& load) {
    return std::visit([](const auto& p) { return p.c_i_f; }, load);
}

LoadSpec with_load_power(LoadSpec load, Real p_w) {
    std::visit(overloaded{[&](ReducedOrderLoadParams& p) { p.p_o_w = p_w; },
                          [&](AvgInverterParams& p) { p.p_ref_w = p_w; }},
               load);
    return load;
}

std::vector<Real> load_powers_at(const Scenario& s, Real at_time_s) {
    std::vector<Real> p;
    p.reserve(s.loads.size());
    for (const auto& l : s.loads) p.push_back(load_power(l));
    for (const auto& e : s.schedule) {
        if (e.t_s <= at_time_s && e.load < p.size()) p[e.load] = e.p_ref_w;
    }
    return p;
}

Scenario with_load_model(Scenario s, LoadModel model) {
    const Real v_nom = nominal_bus_voltage(s.source);
    for (auto& l : s.loads) {
        if (model == LoadModel::Reduced) {
            if (const auto* a = std::get_if<AvgInverterParams>(&l)) {
                ReducedOrderLoadParams r;
                r.v_nom_v = v_nom;
                r.eta = a->eta;
                r.p_o_w = a->p_ref_w;
                r.c_i_f = a->c_i_f;
                l = r;
            }
        } else if (const auto* r = std::get_if<ReducedOrderLoadParams>(&l)) {
            AvgInverterParams a;
            a.eta = r->eta;
            a.p_ref_w = r->p_o_w;
            a.c_i_f = r->c_i_f;
            l = a;
        }
    }
    return s;
}

std::unique_ptr<StateBlock> make_source(const SourceSpec& src) {
    return std::visit(overloaded{[](const LcFilterParams& p) { return make_lc_filter(p); },
                                 [](const BoostParams& p) { return make_boost(p); }},
                      src);
}

std::unique_ptr<StateBlock> make_load(const LoadSpec& load) {
    return std::visit(overloaded{[](const ReducedOrderLoadParams& p) { return make_reduced_order_load(p); },
                                 [](const AvgInverterParams& p) { return make_avg_inverter(p); }},
                      load);
}

} // namespace philab
