#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "philab/format.hpp"
#include "philab/scenario_io.hpp"

namespace philab {

namespace {

// ---------------------------------------------------------------------------
// Field tables
// ---------------------------------------------------------------------------

template <class P>
struct Field {
    std::string_view key;
    Real P::*member;
    bool required;
};

constexpr Field<LcFilterParams> kLcFields[] = {
    {"v_source_v", &LcFilterParams::v_source_v, true},
    {"l_f_h", &LcFilterParams::l_f_h, true},
    {"r_f_ohm", &LcFilterParams::r_f_ohm, true},
    {"c_f_f", &LcFilterParams::c_f_f, true},
};

constexpr Field<BoostParams> kBoostFields[] = {
    {"l_h", &BoostParams::l_h, true},
    {"r_l_ohm", &BoostParams::r_l_ohm, true},
    {"c_o_f", &BoostParams::c_o_f, true},
    {"r_co_ohm", &BoostParams::r_co_ohm, true},
    {"v_in_v", &BoostParams::v_in_v, true},
    {"v_out_ref_v", &BoostParams::v_out_ref_v, true},
    {"current_kp_per_a", &BoostParams::current_kp_per_a, false},
    {"current_ki_per_as", &BoostParams::current_ki_per_as, false},
    {"voltage_kp_a_per_v", &BoostParams::voltage_kp_a_per_v, false},
    {"voltage_ki_a_per_vs", &BoostParams::voltage_ki_a_per_vs, false},
    {"d_max", &BoostParams::d_max, false},
    {"switching_frequency_hz", &BoostParams::switching_frequency_hz, false},
};

constexpr Field<ReducedOrderLoadParams> kReducedFields[] = {
    {"v_nom_v", &ReducedOrderLoadParams::v_nom_v, true},
    {"eta", &ReducedOrderLoadParams::eta, false},
    {"p_o_w", &ReducedOrderLoadParams::p_o_w, true},
    {"c_i_f", &ReducedOrderLoadParams::c_i_f, true},
    {"lpf_cutoff_hz", &ReducedOrderLoadParams::lpf_cutoff_hz, false},
};

constexpr Field<AvgInverterParams> kInverterFields[] = {
    {"c_i_f", &AvgInverterParams::c_i_f, true},
    {"l_o_h", &AvgInverterParams::l_o_h, true},
    {"r_o_ohm", &AvgInverterParams::r_o_ohm, true},
    {"v_ac_ll_rms_v", &AvgInverterParams::v_ac_ll_rms_v, true},
    {"grid_freq_hz", &AvgInverterParams::grid_freq_hz, false},
    {"eta", &AvgInverterParams::eta, false},
    {"pi_kp_ohm", &AvgInverterParams::pi_kp_ohm, false},
    {"pi_ki_ohm_per_s", &AvgInverterParams::pi_ki_ohm_per_s, false},
    {"p_ref_w", &AvgInverterParams::p_ref_w, true},
    {"q_ref_var", &AvgInverterParams::q_ref_var, false},
};

constexpr Field<PhilParams> kPhilFields[] = {
    {"tau1_s", &PhilParams::tau1_s, true},
    {"tau2_s", &PhilParams::tau2_s, true},
    {"interface_cutoff_hz", &PhilParams::interface_cutoff_hz, true},
};

constexpr Field<SolverSettings> kSolverFields[] = {
    {"dt_s", &SolverSettings::dt_s, true},
    {"t_end_s", &SolverSettings::t_end_s, true},
};

// ---------------------------------------------------------------------------
// Raw document
// ---------------------------------------------------------------------------

struct Value {
    std::string text;
    bool quoted = false;
    std::size_t line = 0;
    bool used = false;
};

struct Table {
    std::string name;
    std::size_t line = 0;
    std::vector<std::pair<std::string, Value>> entries;

    Value* find(std::string_view key) {
        for (auto& [k, v] : entries) {
            if (k == key) return &v;
        }
        return nullptr;
    }

    std::string where() const { return name.empty() ? std::string("top level") : "[" + name + "]"; }

    void require_all_used() const {
        for (const auto& [k, v] : entries) {
            if (!v.used) throw ParseError(v.line, "unknown key '" + k + "' in " + where());
        }
    }

    Real real(std::string_view key, std::optional<Real> fallback) {
        Value* v = find(key);
        if (!v) {
            if (fallback) return *fallback;
            throw Error(ErrorCode::ValidationError, where() + " is missing required key '" + std::string(key) + "'");
        }
        v->used = true;
        if (v->quoted) throw ParseError(v->line, "'" + std::string(key) + "' expects a number, got a string");
        const auto x = parse_real(v->text);
        if (!x) throw ParseError(v->line, "'" + v->text + "' is not a number");
        return *x;
    }

    std::optional<std::string> string(std::string_view key) {
        Value* v = find(key);
        if (!v) return std::nullopt;
        v->used = true;
        if (!v->quoted) throw ParseError(v->line, "'" + std::string(key) + "' expects a quoted string");
        return v->text;
    }

    template <class P, std::size_t N>
    void fill(P& p, const Field<P> (&fields)[N]) {
        for (const auto& f : fields) {
            p.*f.member = real(f.key, f.required ? std::nullopt : std::optional<Real>(p.*f.member));
        }
    }
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool is_key(std::string_view k) {
    return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

// Value part of a line: quoted string (with \" \\ \n escapes) or a bare
// token, optionally followed by a comment.
Value parse_value(std::string_view s, std::size_t line) {
    Value v;
    v.line = line;
    if (!s.empty() && s.front() == '"') {
        v.quoted = true;
        std::size_t i = 1;
        for (; i < s.size() && s[i] != '"'; ++i) {
            if (s[i] == '\\') {
                if (++i == s.size()) break;
                switch (s[i]) {
                case 'n': v.text += '\n'; break;
                case '"': v.text += '"'; break;
                case '\\': v.text += '\\'; break;
                default: throw ParseError(line, std::string("unknown escape \\") + s[i]);
                }
            } else {
                v.text += s[i];
            }
        }
        if (i >= s.size()) throw ParseError(line, "unterminated string");
        const auto rest = trim(s.substr(i + 1));
        if (!rest.empty() && rest.front() != '#') throw ParseError(line, "trailing characters after string");
        return v;
    }
    const auto hash = s.find('#');
    v.text = std::string(trim(s.substr(0, hash)));
    if (v.text.empty()) throw ParseError(line, "missing value");
    if (v.text.find_first_of(" \t") != std::string::npos) throw ParseError(line, "value must be a single token");
    return v;
}

constexpr std::string_view kSingleSections[] = {"source", "phil", "solver"};
constexpr std::string_view kArraySections[] = {"load", "schedule"};

template <std::size_t N>
bool contains(const std::string_view (&set)[N], std::string_view x) {
    return std::find(std::begin(set), std::end(set), x) != std::end(set);
}

std::vector<Table> parse_tables(std::string_view text) {
    std::vector<Table> tables(1);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            const bool array = line.starts_with("[[");
            const auto close = line.find(array ? "]]" : "]");
            if (close == std::string_view::npos) throw ParseError(line_no, "unterminated section header");
            const auto rest = trim(line.substr(close + (array ? 2 : 1)));
            if (!rest.empty() && rest.front() != '#') throw ParseError(line_no, "trailing characters after header");
            const auto name = trim(line.substr(array ? 2 : 1, close - (array ? 2 : 1)));
            if (array ? !contains(kArraySections, name) : !contains(kSingleSections, name)) {
                throw ParseError(line_no, "unknown section '" + std::string(line.substr(0, close + (array ? 2 : 1))) +
                                              "'");
            }
            if (!array) {
                for (const auto& t : tables) {
                    if (t.name == name) throw ParseError(line_no, "duplicate section [" + std::string(name) + "]");
                }
            }
            tables.push_back(Table{std::string(name), line_no, {}});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (!is_key(key)) throw ParseError(line_no, "malformed key '" + std::string(key) + "'");
        Table& t = tables.back();
        if (t.find(key)) throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");
        t.entries.emplace_back(std::string(key), parse_value(trim(line.substr(eq + 1)), line_no));
    }
    return tables;
}

SourceSpec build_source(Table& t) {
    const auto type = t.string("type");
    if (!type) throw Error(ErrorCode::ValidationError, "[source] is missing required key 'type'");
    if (*type == "lc_filter") {
        LcFilterParams p;
        t.fill(p, kLcFields);
        return p;
    }
    if (*type == "boost") {
        BoostParams p;
        t.fill(p, kBoostFields);
        return p;
    }
    throw ParseError(t.find("type")->line, "unknown source type '" + *type + "'");
}

LoadSpec build_load(Table& t) {
    const auto model = t.string("model");
    if (!model) throw Error(ErrorCode::ValidationError, "[[load]] is missing required key 'model'");
    if (*model == "reduced_order") {
        ReducedOrderLoadParams p;
        t.fill(p, kReducedFields);
        return p;
    }
    if (*model == "avg_inverter") {
        AvgInverterParams p;
        t.fill(p, kInverterFields);
        return p;
    }
    throw ParseError(t.find("model")->line, "unknown load model '" + *model + "'");
}

ScheduleEntry build_schedule(Table& t) {
    ScheduleEntry e;
    e.t_s = t.real("t_s", std::nullopt);
    const Real idx = t.real("load", std::nullopt);
    if (!(idx >= 0.0) || idx != std::floor(idx) || idx > 1e9) {
        throw ParseError(t.find("load")->line, "load must be a nonnegative integer index");
    }
    e.load = static_cast<std::size_t>(idx);
    e.p_ref_w = t.real("p_ref_w", std::nullopt);
    return e;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\\\"";
        else if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out + "\"";
}

template <class P, std::size_t N>
void emit_fields(std::ostream& os, const P& p, const Field<P> (&fields)[N]) {
    for (const auto& f : fields) os << f.key << " = " << format_real(p.*f.member) << '\n';
}

} // namespace

Scenario parse_scenario_text(std::string_view text) {
    auto tables = parse_tables(text);
    Scenario s;
    bool have_source = false, have_phil = false, have_solver = false;
    for (auto& t : tables) {
        if (t.name.empty()) {
            s.name = t.string("name").value_or("");
            s.description = t.string("description").value_or("");
        } else if (t.name == "source") {
            s.source = build_source(t);
            have_source = true;
        } else if (t.name == "load") {
            s.loads.push_back(build_load(t));
        } else if (t.name == "phil") {
            t.fill(s.phil, kPhilFields);
            have_phil = true;
        } else if (t.name == "solver") {
            t.fill(s.solver, kSolverFields);
            have_solver = true;
        } else if (t.name == "schedule") {
            s.schedule.push_back(build_schedule(t));
        }
        t.require_all_used();
    }
    if (!have_source) throw Error(ErrorCode::ValidationError, "missing [source] section");
    if (!have_phil) throw Error(ErrorCode::ValidationError, "missing [phil] section");
    if (!have_solver) throw Error(ErrorCode::ValidationError, "missing [solver] section");
    validate(s, false);
    return s;
}

Scenario parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(0, "cannot open scenario file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

std::string emit_scenario(const Scenario& s) {
    std::ostringstream os;
    if (!s.name.empty()) os << "name = " << quote(s.name) << '\n';
    if (!s.description.empty()) os << "description = " << quote(s.description) << '\n';

    os << "\n[source]\n";
    if (const auto* lc = std::get_if<LcFilterParams>(&s.source)) {
        os << "type = \"lc_filter\"\n";
        emit_fields(os, *lc, kLcFields);
    } else {
        os << "type = \"boost\"\n";
        emit_fields(os, std::get<BoostParams>(s.source), kBoostFields);
    }
    for (const auto& l : s.loads) {
        os << "\n[[load]]\n";
        if (const auto* r = std::get_if<ReducedOrderLoadParams>(&l)) {
            os << "model = \"reduced_order\"\n";
            emit_fields(os, *r, kReducedFields);
        } else {
            os << "model = \"avg_inverter\"\n";
            emit_fields(os, std::get<AvgInverterParams>(l), kInverterFields);
        }
    }
    os << "\n[phil]\n";
    emit_fields(os, s.phil, kPhilFields);
    os << "\n[solver]\n";
    emit_fields(os, s.solver, kSolverFields);
    for (const auto& e : s.schedule) {
        os << "\n[[schedule]]\n"
           << "t_s = " << format_real(e.t_s) << '\n'
           << "load = " << e.load << '\n'
           << "p_ref_w = " << format_real(e.p_ref_w) << '\n';
    }
    return os.str();
}

Scenario load_scenario(std::string_view path_or_name) {
    const std::filesystem::path path(path_or_name);
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) return parse_scenario(path);
    if (const auto text = bundled_scenario_text(path_or_name)) return parse_scenario_text(*text);
    return parse_scenario(path);
}

void write_trace_csv(std::ostream& os, const Trace& tr, std::size_t decimate) {
    decimate = std::max<std::size_t>(decimate, 1);
    os << "t_s,v_dc_bus_V,i_bus_A";
    for (std::size_t k = 0; k < tr.n_loads(); ++k) os << ",i_load" << k << "_A";
    for (std::size_t k = 0; k < tr.n_loads(); ++k) os << ",p_ref" << k << "_W";
    os << ",flags\n";
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        if (r % decimate != 0 && r + 1 != tr.rows()) continue;
        os << format_real(tr.t_s[r]) << ',' << format_real(tr.v_dc_bus_v[r]) << ',' << format_real(tr.i_bus_a[r]);
        for (const auto& c : tr.i_load_a) os << ',' << format_real(c[r]);
        for (const auto& c : tr.p_ref_w) os << ',' << format_real(c[r]);
        os << ',';
        const auto f = tr.flags[r];
        if (f & kFlagDiv) os << "div";
        if ((f & kFlagDiv) && (f & kFlagSat)) os << ';';
        if (f & kFlagSat) os << "sat";
        os << '\n';
    }
}

namespace {

std::string opt_real(const std::optional<Real>& x) { return x ? format_real(*x) : std::string("none"); }

std::vector<std::pair<std::string, std::string>> report_fields(const Scenario& s, const Assessment& a) {
    const auto& r = a.report;
    std::string powers;
    for (std::size_t k = 0; k < a.load_powers_w.size(); ++k) {
        if (k) powers += ';';
        powers += format_real(a.load_powers_w[k]);
    }
    Real total = 0.0;
    for (Real p : a.load_powers_w) total += p;
    return {
        {"scenario", s.name},
        {"verdict", std::string(to_string(r.verdict))},
        {"encirclements", std::to_string(r.encirclements)},
        {"encirclements_resolved", r.resolved ? "true" : "false"},
        {"gain_margin_db", format_real(r.gain_margin_db)},
        {"phase_margin_deg", format_real(r.phase_margin_deg)},
        {"gain_crossover_hz", opt_real(r.gain_crossover_hz)},
        {"phase_crossover_hz", opt_real(r.phase_crossover_hz)},
        {"min_distance_to_critical", format_real(r.min_distance_to_critical)},
        {"phase_condition", a.phase_condition ? "true" : "false"},
        {"sampled_impedance", a.sampled ? "true" : "false"},
        {"load_powers_w", powers},
        {"total_power_w", format_real(total)},
        {"tau1_s", format_real(s.phil.tau1_s)},
        {"tau2_s", format_real(s.phil.tau2_s)},
        {"interface_cutoff_hz", format_real(s.phil.interface_cutoff_hz)},
        {"grid_points", std::to_string(a.open_loop.size())},
        {"grid_refinements", std::to_string(a.refinements)},
    };
}

} // namespace

void write_report_text(std::ostream& os, const Scenario& s, const Assessment& a) {
    for (const auto& [k, v] : report_fields(s, a)) os << k << ": " << v << '\n';
}

void write_report_kv(std::ostream& os, const Scenario& s, const Assessment& a) {
    for (const auto& [k, v] : report_fields(s, a)) os << k << '=' << v << '\n';
}

} // namespace philab
