#include <algorithm>
#include <cmath>

#include "philab/phil_engine.hpp"

namespace philab {

namespace {

std::unique_ptr<StateBlock> clone_or_null(const std::unique_ptr<StateBlock>& b) { return b ? b->clone() : nullptr; }

void append(Vector& x, Eigen::Index& at, const Vector& part) {
    x.segment(at, part.size()) = part;
    at += part.size();
}

Vector take(const Vector& x, Eigen::Index& at, Eigen::Index n) {
    Vector part = x.segment(at, n);
    at += n;
    return part;
}

} // namespace

Engine::Engine(const Scenario& s) : scenario_(s) {
    validate(s, false);
    v_nom_ = nominal_bus_voltage(s.source);
    dt_ = s.solver.dt_s;
    schedule_ = s.schedule;
    std::stable_sort(schedule_.begin(), schedule_.end(),
                     [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.t_s < b.t_s; });

    source_ = make_source(s.source);
    delay1_ = make_delay_line(s.phil.tau1_s, dt_);
    delay2_ = make_delay_line(s.phil.tau2_s, dt_);
    if (!s.phil.bypass_filter()) filter_ = make_first_order_lpf(s.phil.interface_cutoff_hz);
    for (const auto& l : s.loads) loads_.push_back(make_load(l));
    i_loads_.assign(loads_.size(), 0.0);

    rewind();
    warm_up();
    initial_state_ = state();
}

Engine::Engine(const Engine& o)
    : scenario_(o.scenario_), v_nom_(o.v_nom_), dt_(o.dt_), schedule_(o.schedule_), next_event_(o.next_event_),
      k_(o.k_), p_ref_(o.p_ref_), source_(o.source_->clone()), delay1_(o.delay1_->clone()),
      delay2_(o.delay2_->clone()), filter_(clone_or_null(o.filter_)), i_loads_(o.i_loads_), v_bus_(o.v_bus_),
      v_load_(o.v_load_), i_meas_(o.i_meas_), initial_state_(o.initial_state_) {
    for (const auto& l : o.loads_) loads_.push_back(l->clone());
}

Engine& Engine::operator=(const Engine& o) {
    if (this != &o) {
        Engine tmp(o);
        *this = std::move(tmp);
    }
    return *this;
}

Engine::~Engine() = default;

void Engine::rewind() {
    k_ = 0;
    next_event_ = 0;
    p_ref_.clear();
    for (std::size_t k = 0; k < loads_.size(); ++k) {
        p_ref_.push_back(load_power(scenario_.loads[k]));
        loads_[k]->set_parameter("p_ref_w", p_ref_.back());
    }
    apply_schedule(0);
}

void Engine::apply_schedule(std::size_t k) {
    while (next_event_ < schedule_.size() && schedule_[next_event_].step_index(dt_) <= k) {
        const auto& e = schedule_[next_event_++];
        p_ref_[e.load] = e.p_ref_w;
        loads_[e.load]->set_parameter("p_ref_w", e.p_ref_w);
    }
}

void Engine::warm_up() {
    // Directly coupled DC fixed point: v = source(i), i = sum loads(v).
    // Contraction factor is R_source * P / v^2, far below 1 for any bus
    // that can carry its load at all.
    Real v = v_nom_;
    Real i = 0.0;
    for (int it = 0; it < 200; ++it) {
        i = 0.0;
        for (std::size_t k = 0; k < loads_.size(); ++k) i += (i_loads_[k] = loads_[k]->settle1(v));
        const Real v_new = source_->settle1(i);
        const bool done = std::abs(v_new - v) <= 1e-13 * std::abs(v_nom_);
        v = v_new;
        if (done) break;
    }
    if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "no DC operating point for this scenario");
    // Loads see the final voltage exactly.
    i = 0.0;
    for (std::size_t k = 0; k < loads_.size(); ++k) i += (i_loads_[k] = loads_[k]->settle1(v));
    source_->settle1(i);
    delay1_->settle1(i);
    delay2_->settle1(v);
    if (filter_) filter_->settle1(v);
    v_bus_ = v_load_ = v;
    i_meas_ = i;
}

void Engine::reset() {
    rewind();
    set_state(initial_state_);
}

void Engine::step() {
    apply_schedule(++k_);
    const Real i_src = delay1_->step1(i_meas_, dt_);
    v_bus_ = source_->step1(i_src, dt_);
    const Real v_d = delay2_->step1(v_bus_, dt_);
    v_load_ = filter_ ? filter_->step1(v_d, dt_) : v_d;
    Real sum = 0.0;
    for (std::size_t k = 0; k < loads_.size(); ++k) sum += (i_loads_[k] = loads_[k]->step1(v_load_, dt_));
    i_meas_ = sum;
}

bool Engine::diverged() const {
    const Real limit = 10.0 * std::abs(v_nom_);
    return !(std::abs(v_bus_) <= limit) || !(std::abs(v_load_) <= limit) || !std::isfinite(i_meas_);
}

void Engine::record(Trace& tr, std::size_t, Real t, std::uint8_t flags) const {
    tr.t_s.push_back(t);
    tr.v_dc_bus_v.push_back(v_bus_);
    tr.i_bus_a.push_back(i_meas_);
    for (std::size_t k = 0; k < loads_.size(); ++k) {
        tr.i_load_a[k].push_back(i_loads_[k]);
        tr.p_ref_w[k].push_back(p_ref_[k]);
    }
    tr.flags.push_back(flags);
}

Trace Engine::run() { return run(initial_state_); }

Trace Engine::run(const Vector& seed_state) {
    rewind();
    set_state(seed_state);
    const std::size_t n = scenario_.solver.steps();
    Trace tr(dt_, loads_.size(), n + 1);
    record(tr, 0, 0.0, 0);
    for (std::size_t k = 1; k <= n; ++k) {
        step();
        std::uint8_t flags = 0;
        bool sat = source_->saturated();
        for (const auto& l : loads_) sat = sat || l->saturated();
        if (sat) flags |= kFlagSat;
        const bool div = diverged();
        if (div) flags |= kFlagDiv;
        record(tr, k, static_cast<Real>(k) * dt_, flags);
        if (div) {
            tr.diverged = true;
            break;
        }
    }
    return tr;
}

std::size_t Engine::advance(std::size_t n_steps) {
    for (std::size_t k = 0; k < n_steps; ++k) {
        step();
        if (diverged()) return k + 1;
    }
    return n_steps;
}

Vector Engine::state() const {
    Eigen::Index n = source_->state_size() + delay1_->state_size() + delay2_->state_size() +
                     (filter_ ? filter_->state_size() : 0) + 3 + static_cast<Eigen::Index>(loads_.size());
    for (const auto& l : loads_) n += l->state_size();
    Vector x(n);
    Eigen::Index at = 0;
    append(x, at, source_->state());
    append(x, at, delay1_->state());
    append(x, at, delay2_->state());
    if (filter_) append(x, at, filter_->state());
    for (const auto& l : loads_) append(x, at, l->state());
    x[at++] = v_bus_;
    x[at++] = v_load_;
    x[at++] = i_meas_;
    for (Real i : i_loads_) x[at++] = i;
    return x;
}

void Engine::set_state(const Vector& x) {
    if (x.size() != initial_state_.size() && initial_state_.size() != 0) {
        throw Error(ErrorCode::ConfigError, "engine state has the wrong dimension");
    }
    Eigen::Index at = 0;
    source_->set_state(take(x, at, source_->state_size()));
    delay1_->set_state(take(x, at, delay1_->state_size()));
    delay2_->set_state(take(x, at, delay2_->state_size()));
    if (filter_) filter_->set_state(take(x, at, filter_->state_size()));
    for (auto& l : loads_) l->set_state(take(x, at, l->state_size()));
    v_bus_ = x[at++];
    v_load_ = x[at++];
    i_meas_ = x[at++];
    for (Real& i : i_loads_) i = x[at++];
}

Engine build_phil_loop(const Scenario& s) { return Engine(s); }

} // namespace philab
