#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "CLI11.hpp"

#include "philab/bench.hpp"
#include "philab/cli.hpp"
#include "philab/format.hpp"
#include "philab/scenario_io.hpp"
#include "philab/stability.hpp"

namespace philab {

namespace {

namespace fs = std::filesystem;

fs::path output_dir(const std::string& flag) {
    fs::path dir = ".";
    if (!flag.empty()) dir = flag;
    else if (const char* env = std::getenv("PHILAB_OUT"); env && *env) dir = env;
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::ConfigError, "cannot write '" + p.string() + "'");
    return os;
}

struct AnalyzeArgs {
    std::string scenario, out;
    double fmin = 1.0, fmax = 1e6;
    int ppd = 200;
    bool measured_loads = false;
    double at_time = std::numeric_limits<double>::infinity();
};

int cmd_analyze(const AnalyzeArgs& a) {
    const Scenario s = load_scenario(a.scenario);
    AssessOptions opts;
    opts.grid = {a.fmin, a.fmax, a.ppd};
    opts.measured_loads = a.measured_loads;
    opts.at_time_s = a.at_time;
    const Assessment res = assess(s, opts);

    const fs::path dir = output_dir(a.out);
    {
        auto os = open_out(dir / "report.txt");
        write_report_text(os, s, res);
    }
    {
        auto os = open_out(dir / "report.kv");
        write_report_kv(os, s, res);
    }
    {
        auto os = open_out(dir / "open_loop_bode.csv");
        write_csv(os, res.open_loop);
    }
    {
        auto os = open_out(dir / "open_loop_nyquist.csv");
        os << "freq_hz,re,im\n";
        for (std::size_t i = 0; i < res.open_loop.size(); ++i) {
            const Complex v = res.open_loop.value(i);
            os << format_real(res.open_loop.freq_hz(i)) << ',' << format_real(v.real()) << ','
               << format_real(v.imag()) << '\n';
        }
    }
    {
        auto os = open_out(dir / "z_source.csv");
        write_csv(os, res.z_source);
    }
    {
        auto os = open_out(dir / "z_load.csv");
        write_csv(os, res.z_load);
    }
    write_report_text(std::cout, s, res);
    return res.report.verdict == Verdict::Unstable ? 2 : 0;
}

struct SimulateArgs {
    std::string scenario, out, load_model;
    std::size_t decimate = 1;
};

int cmd_simulate(const SimulateArgs& a) {
    Scenario s = load_scenario(a.scenario);
    if (a.load_model == "reduced") s = with_load_model(s, LoadModel::Reduced);
    else if (a.load_model == "averaged") s = with_load_model(s, LoadModel::Averaged);
    validate(s);

    Engine engine(s);
    const Trace tr = engine.run();
    const TraceClass cls = classify(tr, engine.v_nom());

    const fs::path dir = output_dir(a.out);
    {
        auto os = open_out(dir / "trace.csv");
        write_trace_csv(os, tr, a.decimate);
    }
    const auto amps = cycle_amplitudes(tr, ClassifyOptions{}.hysteresis * engine.v_nom());
    std::ostringstream summary;
    summary << "scenario: " << s.name << '\n'
            << "rows: " << tr.rows() << '\n'
            << "final_v_dc_bus_v: " << format_real(tr.v_dc_bus_v.back()) << '\n'
            << "diverged: " << (tr.diverged ? "true" : "false") << '\n'
            << "longest_growth_run: " << longest_growth_run(amps) << '\n'
            << "classification: " << to_string(cls) << '\n'
            << "stable: " << (is_unstable(cls) ? "false" : "true") << '\n';
    {
        auto os = open_out(dir / "classification.txt");
        os << summary.str();
    }
    std::cout << summary.str();
    return 0;
}

struct ImpedanceArgs {
    std::string scenario, out;
    std::size_t load = 0;
    double fmin = 10.0, fmax = 2000.0;
    int ppd = 20;
};

int cmd_impedance(const ImpedanceArgs& a) {
    const Scenario s = load_scenario(a.scenario);
    if (a.load >= s.loads.size()) throw Error(ErrorCode::ConfigError, "--load index out of range");
    const Real v_nom = nominal_bus_voltage(s.source);
    const Real p = load_powers_at(s, 0.0)[a.load];
    const LoadSpec spec = s.loads[a.load];

    const FrequencyGrid grid{a.fmin, a.fmax, a.ppd};
    const FreqResponse measured =
        measure_input_impedance([spec] { return make_load(spec); }, v_nom, p, grid.frequencies_hz());
    const RationalTF model_tf = load_impedance_model(spec, v_nom, p);
    FreqResponse model;
    model.grid = grid;
    for (const auto& pt : measured.points) model.points.push_back({pt.omega, tf_eval(model_tf, pt.omega)});

    Real worst_db = 0.0, worst_deg = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const Complex ratio = measured.points[i].value / model.points[i].value;
        worst_db = std::max(worst_db, std::abs(20.0 * std::log10(std::abs(ratio))));
        worst_deg = std::max(worst_deg, std::abs(rad_to_deg(std::arg(ratio))));
    }

    const fs::path dir = output_dir(a.out);
    {
        auto os = open_out(dir / "impedance_measured.csv");
        write_csv(os, measured);
    }
    {
        auto os = open_out(dir / "impedance_model.csv");
        write_csv(os, model);
    }
    std::cout << "scenario: " << s.name << '\n'
              << "load: " << a.load << '\n'
              << "p_w: " << format_real(p) << '\n'
              << "points: " << measured.size() << '\n'
              << "max_mag_error_db: " << format_real(worst_db) << '\n'
              << "max_phase_error_deg: " << format_real(worst_deg) << '\n';
    return 0;
}

struct BenchArgs {
    std::string scenario_a, scenario_b, out;
    std::size_t steps = 1000000;
    std::size_t repeats = 5;
};

int cmd_bench(const BenchArgs& a) {
    const Scenario sa = load_scenario(a.scenario_a);
    const Scenario sb = load_scenario(a.scenario_b);
    const SpeedupReport r = compare(sa, sb, a.steps, a.repeats);
    write_kv(std::cout, r);
    write_csv_header(std::cout);
    write_csv_row(std::cout, r);
    if (!a.out.empty() || std::getenv("PHILAB_OUT")) {
        auto os = open_out(output_dir(a.out) / "bench.csv");
        write_csv_header(os);
        write_csv_row(os, r);
    }
    return 0;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"PHIL stability and simulation workbench"};
    app.require_subcommand(1);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "impedance-ratio stability report");
    analyze->add_option("--scenario", an.scenario, "scenario file or bundled name")->required();
    analyze->add_option("--out", an.out, "output directory");
    analyze->add_option("--fmin", an.fmin, "grid start, Hz");
    analyze->add_option("--fmax", an.fmax, "grid end, Hz");
    analyze->add_option("--ppd", an.ppd, "points per decade");
    analyze->add_flag("--measured-loads", an.measured_loads, "use measured load impedances");
    analyze->add_option("--at-time", an.at_time, "operating point after schedule entries up to this time, s "
                                                  "(default: end of schedule)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "time-domain PHIL run");
    simulate->add_option("--scenario", sim.scenario, "scenario file or bundled name")->required();
    simulate->add_option("--out", sim.out, "output directory");
    simulate->add_option("--decimate", sim.decimate, "write every Nth row")->check(CLI::PositiveNumber);
    simulate->add_option("--load-model", sim.load_model, "swap every load to this model")
        ->check(CLI::IsMember({"reduced", "averaged"}));

    ImpedanceArgs imp;
    auto* impedance = app.add_subcommand("impedance", "perturbation-measured load impedance vs model");
    impedance->add_option("--scenario", imp.scenario, "scenario file or bundled name")->required();
    impedance->add_option("--load", imp.load, "load index")->required();
    impedance->add_option("--out", imp.out, "output directory");
    impedance->add_option("--fmin", imp.fmin, "grid start, Hz");
    impedance->add_option("--fmax", imp.fmax, "grid end, Hz");
    impedance->add_option("--ppd", imp.ppd, "points per decade");

    BenchArgs b;
    auto* bench = app.add_subcommand("bench", "per-step cost comparison");
    bench->add_option("--scenario-a", b.scenario_a, "numerator scenario")->required();
    bench->add_option("--scenario-b", b.scenario_b, "denominator scenario")->required();
    bench->add_option("--steps", b.steps, "steps per repeat");
    bench->add_option("--repeats", b.repeats, "timed repeats");
    bench->add_option("--out", b.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*analyze) return cmd_analyze(an);
        if (*simulate) return cmd_simulate(sim);
        if (*impedance) return cmd_impedance(imp);
        if (*bench) return cmd_bench(b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace philab
