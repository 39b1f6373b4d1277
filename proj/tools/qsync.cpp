// qsync: steady states, phase distributions, spectra, mean-field phase maps and
// trajectories of coupled quantum van der Pol oscillators from the command line.
//
// Exit codes: 0 success, 2 configuration or argument error, 3 numerical
// failure, 4 resource refusal.

#include "qsync/sweep.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

int exit_code(qsync::ErrorCategory c) {
    switch (c) {
        case qsync::ErrorCategory::argument:
        case qsync::ErrorCategory::config: return 2;
        case qsync::ErrorCategory::numerical: return 3;
        case qsync::ErrorCategory::resource: return 4;
    }
    return 1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw qsync::ConfigError("cannot read '" + path + "'");
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::string> params;
    std::string output;
    std::string format;
    int threads = 0;
    bool no_wall_time = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "JSON recipe")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.sets, "override a recipe field, e.g. solver.n_trunc=8")
        ->take_all();
    cmd->add_option("-p,--param", c.params, "fix a model parameter, e.g. g_AB=0.1 (same as --set fixed.NAME=VALUE)")
        ->take_all();
    cmd->add_option("-o,--output", c.output, "output file (default: recipe output or stdout)");
    cmd->add_option("-f,--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("-j,--threads", c.threads, "worker threads over grid points")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-wall-time", c.no_wall_time, "omit wall time from the metadata");
}

/// Writes to the file or stdout; opening happens before any work is done.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) {
                throw qsync::ConfigError("cannot write '" + path + "'");
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

qsync::SweepSpec make_spec(const Common& c, const std::string& forced_task) {
    std::vector<std::string> overrides;
    if (!forced_task.empty()) {
        overrides.push_back("task=\"" + forced_task + "\"");
    }
    for (const auto& p : c.params) {
        overrides.push_back("fixed." + p);
    }
    overrides.insert(overrides.end(), c.sets.begin(), c.sets.end());
    if (!c.output.empty()) {
        overrides.push_back("output=\"" + c.output + "\"");
    }
    if (!c.format.empty()) {
        overrides.push_back("format=\"" + c.format + "\"");
    }
    if (c.threads > 0) {
        overrides.push_back("threads=" + std::to_string(c.threads));
    }
    const std::string text = c.config.empty() ? std::string() : slurp(c.config);
    return qsync::parse_sweep_spec(text, overrides, c.config.empty() ? "<command line>" : c.config);
}

int run(const Common& c, const std::string& forced_task) {
    const qsync::SweepSpec spec = make_spec(c, forced_task);
    Sink sink(spec.output);
    const qsync::ResultTable table = qsync::run_sweep(spec);
    sink.stream() << (spec.format == "json" ? table.to_json(!c.no_wall_time)
                                            : table.to_csv(!c.no_wall_time));
    const std::string failed = table.meta("failed_rows", "0");
    if (failed == "0") {
        return 0;
    }
    std::cerr << "qsync: " << failed << " row(s) failed; see the status and error columns\n";
    // A sweep in which nothing succeeded reports the first failure's category.
    if (failed == std::to_string(table.rows.size())) {
        const int col = table.column("code");
        std::cerr << "qsync: " << std::get<std::string>(table.rows.front()[table.column("error")])
                  << '\n';
        return static_cast<int>(table.number(0, col));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qsync: synchronization of coupled quantum van der Pol oscillators"};
    app.require_subcommand(0, 1);
    bool print_schema = false;
    app.add_flag("--print-schema", print_schema, "describe every recipe field and exit");

    struct Direct {
        const char* name;
        const char* task;
        const char* help;
    };
    const std::vector<Direct> direct{
        {"steady", "steady", "steady state, moments and certificates"},
        {"p2", "p2map", "relative-phase distribution P2 summary"},
        {"moments", "moments", "phase moments up to solver.moment_order"},
        {"spectrum", "spectrum", "power spectrum of a steady-state correlation"},
        {"mf", "meanfield_map", "mean-field ensemble classification"},
        {"traj", "trajectory", "one conditioned trajectory"},
        {"sweep", "", "run a recipe over its axes"},
    };
    std::vector<Common> commons(direct.size());
    std::vector<CLI::App*> cmds;
    for (std::size_t k = 0; k < direct.size(); ++k) {
        CLI::App* cmd = app.add_subcommand(direct[k].name, direct[k].help);
        add_common(cmd, commons[k]);
        cmds.push_back(cmd);
    }

    std::string curves_input;
    std::string curves_output;
    std::string curves_format = "csv";
    std::string m2_column = qsync::CurveOptions{}.m2_column;
    CLI::App* curves = app.add_subcommand("curves", "transition curves of a two-axis p2map table");
    curves->add_option("table", curves_input, "CSV or JSON table from a sweep")
        ->required()
        ->check(CLI::ExistingFile);
    curves->add_option("-o,--output", curves_output, "output file (default stdout)");
    curves->add_option("-f,--format", curves_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    curves->add_option("--m2-column", m2_column, "quadrature whose zero marks the m2 curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (print_schema) {
            std::cout << qsync::sweep_schema();
            return 0;
        }
        for (std::size_t k = 0; k < direct.size(); ++k) {
            if (cmds[k]->parsed()) {
                return run(commons[k], direct[k].task);
            }
        }
        if (curves->parsed()) {
            const qsync::ResultTable table = qsync::ResultTable::parse(slurp(curves_input));
            Sink sink(curves_output);
            const auto set = qsync::transition_curves(table, {m2_column});
            const qsync::ResultTable out = qsync::curves_table(set, table);
            sink.stream() << (curves_format == "json" ? out.to_json() : out.to_csv());
            return 0;
        }
        std::cout << app.help();
        return 2;
    } catch (const qsync::Error& e) {
        std::cerr << "qsync: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "qsync: " << e.what() << '\n';
        return 1;
    }
}
