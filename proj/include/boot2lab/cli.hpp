// cli.hpp
//
// Command-line front end: argument parsing into a RunManifest, dispatch to
// the analytic and harness modules, and report emission.
//
//   boot2lab <subcommand> [--theta F] [--sigma-x F] [--sigma-eps F] [--n U]
//            [--m U] [--k U] [--r U] [--b U] [--datasets U] [--m-values LIST]
//            [--mode multinomial|poisson] [--merge arithmetic|geometric]
//            [--bias-correct] [--seed U64] [--preset paper-full|desk-reduced]
//            [--format json|csv] [--out PATH] [--timing]
//   boot2lab rerun --manifest REPORT.json [--out PATH]
//
// Exit codes: 0 success, 2 argument error, 3 study error, 4 I/O error.

#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harness.hpp"
#include "report.hpp"

namespace boot2lab {

enum ExitCode : int { kExitOk = 0, kExitArgument = 2, kExitStudy = 3, kExitIo = 4 };

/// Bad command line; the message names the offending parameter.
class ArgumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ParsedArgs {
    RunManifest manifest;
    bool timing = false;
    bool help = false;
    std::string help_text;
};

namespace detail {

inline ToyConfig preset_config(const std::string& name) {
    if (name == "paper-full") return ToyConfig::paper_full();
    if (name == "desk-reduced") return ToyConfig::desk_reduced();
    throw ArgumentError("preset must be paper-full or desk-reduced, got '" + name + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Parses argv (argv[0] is the program name).  Throws ArgumentError.
[[nodiscard]] inline ParsedArgs parse_args(const std::vector<std::string>& argv) {
    const std::string usage =
        "usage: boot2lab <analytic|single|replicate|conditional|dependence|scaling|fixes|rerun> [options]";
    ParsedArgs parsed;
    if (argv.size() < 2) throw ArgumentError("missing subcommand; " + usage);
    const std::string sub = argv[1];
    if (sub == "--help" || sub == "-h") {
        parsed.help = true;
        parsed.help_text = usage + "\n";
        return parsed;
    }

    CLI::App app{"Double-bootstrap uncertainty laboratory", "boot2lab " + sub};
    std::optional<double> theta, sigma_x, sigma_eps;
    std::optional<std::size_t> n, m, k, r, b, datasets;
    std::optional<std::string> m_values, mode, merge_mode, preset, format, out, manifest_path;
    std::optional<std::uint64_t> seed;
    bool bias_correct = false;
    bool timing = false;
    app.add_option("--theta", theta, "true mean");
    app.add_option("--sigma-x", sigma_x, "datapoint standard deviation");
    app.add_option("--sigma-eps", sigma_eps, "training-noise standard deviation");
    app.add_option("--n", n, "dataset size");
    app.add_option("--m", m, "ensemble size");
    app.add_option("--k", k, "ensemble resampling trials");
    app.add_option("--r", r, "replications (inner runs for conditional)");
    app.add_option("--b", b, "pseudo-experiments per replication (fixes)");
    app.add_option("--datasets", datasets, "outer datasets (conditional)");
    app.add_option("--m-values", m_values, "comma-separated ensemble sizes (scaling)");
    app.add_option("--mode", mode, "multinomial|poisson");
    app.add_option("--merge", merge_mode, "arithmetic|geometric");
    app.add_flag("--bias-correct", bias_correct, "scale delta_boot_boot^2 by M/(M-1)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--preset", preset, "paper-full|desk-reduced");
    app.add_option("--format", format, "json|csv");
    app.add_option("--out", out, "output path (default: stdout)");
    app.add_option("--manifest", manifest_path, "report or manifest to rerun");
    app.add_flag("--timing", timing, "include runtime_seconds (output is then not reproducible)");

    std::vector<std::string> rest(argv.begin() + 2, argv.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        parsed.help = true;
        parsed.help_text = app.help();
        return parsed;
    } catch (const CLI::ParseError& e) {
        throw ArgumentError(e.what());
    }
    parsed.timing = timing;

    RunManifest& mf = parsed.manifest;
    if (sub == "rerun") {
        if (!manifest_path) throw ArgumentError("rerun requires --manifest");
        json j;
        try {
            j = json::parse(detail::read_file(*manifest_path));
            mf = manifest_from_json(j.contains("manifest") ? j.at("manifest") : j);
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            throw ArgumentError(std::string("manifest is not valid: ") + e.what());
        }
        mf.output_path = out;
        validate(mf.config);
        return parsed;
    }
    if (manifest_path) throw ArgumentError("--manifest is only accepted by rerun");

    const auto subcommand = parse_subcommand(sub);
    if (!subcommand) throw ArgumentError("unknown subcommand '" + sub + "'; " + usage);
    mf.subcommand = *subcommand;

    if (preset) {
        mf.config = detail::preset_config(*preset);
        mf.preset = preset;
    }
    ToyConfig& c = mf.config;
    if (theta) c.theta = *theta;
    if (sigma_x) c.sigma_x = *sigma_x;
    if (sigma_eps) c.sigma_eps = *sigma_eps;
    if (n) c.n = *n;
    if (m) c.m = *m;
    if (k) c.k = *k;
    if (mode) {
        if (*mode == "multinomial") c.resample = ResampleMode::multinomial;
        else if (*mode == "poisson") c.resample = ResampleMode::poisson;
        else throw ArgumentError("mode must be multinomial or poisson, got '" + *mode + "'");
    }
    if (merge_mode) {
        if (*merge_mode == "arithmetic") c.merge = MergeMode::arithmetic;
        else if (*merge_mode == "geometric") c.merge = MergeMode::geometric;
        else throw ArgumentError("merge must be arithmetic or geometric, got '" + *merge_mode + "'");
    }
    if (format) {
        if (*format == "json") mf.output_format = OutputFormat::json;
        else if (*format == "csv") mf.output_format = OutputFormat::csv;
        else throw ArgumentError("format must be json or csv, got '" + *format + "'");
    }
    if (seed) mf.seed = *seed;
    mf.output_path = out;
    mf.bias_correct = bias_correct;
    mf.r = r.value_or(default_r(mf.subcommand));
    if (b) mf.b = *b;
    if (datasets) mf.datasets = *datasets;
    if (m_values) {
        mf.m_values.clear();
        std::stringstream ss(*m_values);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                const unsigned long long v = std::stoull(item, &used);
                if (used != item.size() || item.empty() || item[0] == '-') throw std::invalid_argument(item);
                mf.m_values.push_back(static_cast<std::size_t>(v));
            } catch (const std::exception&) {
                throw ArgumentError("m-values must be a comma-separated list of integers, got '" + *m_values + "'");
            }
        }
        if (mf.m_values.empty()) throw ArgumentError("m-values must not be empty");
    }

    try {
        validate(c);
    } catch (const InvalidParameter& e) {
        throw ArgumentError(e.what());
    }
    switch (mf.subcommand) {
        case Subcommand::replicate:
        case Subcommand::conditional:
        case Subcommand::dependence:
        case Subcommand::fixes:
            if (mf.r < 2) throw ArgumentError("r must be ≥ 2");
            break;
        case Subcommand::scaling:
            if (mf.r < 1) throw ArgumentError("r must be ≥ 1");
            for (auto mv : mf.m_values)
                if (mv < 2) throw ArgumentError("every m in m-values must be ≥ 2");
            break;
        default: break;
    }
    if (mf.subcommand == Subcommand::fixes && mf.b < 2) throw ArgumentError("b must be ≥ 2");
    if (mf.subcommand == Subcommand::conditional && mf.datasets < 2) throw ArgumentError("datasets must be ≥ 2");
    if (mf.subcommand == Subcommand::dependence && c.m < 2) throw ArgumentError("m must be ≥ 2 for dependence");
    return parsed;
}

/// The result block for a manifest; throws whatever the study throws.
[[nodiscard]] inline json run_study(const RunManifest& mf, bool timing = false, unsigned workers = 0) {
    const StudyOptions opts{mf.bias_correct, workers};
    switch (mf.subcommand) {
        case Subcommand::analytic: return analytic_result_json(mf.config);
        case Subcommand::single: return to_json(run_single(mf.config, mf.seed, opts), timing);
        case Subcommand::replicate: return to_json(run_replicated(mf.config, mf.r, mf.seed, opts));
        case Subcommand::conditional:
            return to_json(run_conditional_study(mf.config, mf.datasets, mf.r, mf.seed, opts));
        case Subcommand::dependence: return to_json(run_dependence_study(mf.config, mf.r, mf.seed, opts));
        case Subcommand::scaling: return to_json(run_scaling_study(mf.config, mf.m_values, mf.r, mf.seed, opts));
        case Subcommand::fixes: return to_json(run_fixes_study(mf.config, mf.b, mf.r, mf.seed, opts));
    }
    throw std::logic_error("unhandled subcommand");
}

/// Full report text: {"manifest": ..., "result": ...} or its CSV view.
[[nodiscard]] inline std::string render_report(const RunManifest& mf, bool timing = false, unsigned workers = 0) {
    const json manifest = to_json(mf, false);
    const json result = run_study(mf, timing, workers);
    if (mf.output_format == OutputFormat::csv) return render_csv(manifest, result);
    json report{{"manifest", manifest}, {"result", result}};
    return report.dump(2) + "\n";
}

/// Runs the manifest and writes the report to its destination.
[[nodiscard]] inline int execute(const RunManifest& mf, bool timing = false, std::ostream& stdout_stream = std::cout,
                                 std::ostream& err = std::cerr) {
    std::string text;
    try {
        text = render_report(mf, timing);
    } catch (const std::exception& e) {
        err << "boot2lab: " << to_string(mf.subcommand) << " failed: " << e.what() << '\n';
        return kExitStudy;
    }
    if (!mf.output_path) {
        stdout_stream << text;
        stdout_stream.flush();
        return stdout_stream ? kExitOk : kExitIo;
    }
    std::ofstream file(*mf.output_path, std::ios::binary | std::ios::trunc);
    if (!file) {
        err << "boot2lab: cannot open '" << *mf.output_path << "' for writing\n";
        return kExitIo;
    }
    file << text;
    file.close();
    if (!file) {
        err << "boot2lab: write to '" << *mf.output_path << "' failed\n";
        return kExitIo;
    }
    return kExitOk;
}

/// main() body: parse, execute, map failures onto exit codes.
[[nodiscard]] inline int run_cli(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                                 std::ostream& err = std::cerr) {
    ParsedArgs parsed;
    try {
        parsed = parse_args(argv);
    } catch (const ArgumentError& e) {
        err << "boot2lab: " << e.what() << '\n';
        return kExitArgument;
    } catch (const IoError& e) {
        err << "boot2lab: " << e.what() << '\n';
        return kExitIo;
    }
    if (parsed.help) {
        out << parsed.help_text;
        return kExitOk;
    }
    return execute(parsed.manifest, parsed.timing, out, err);
}

}  // namespace boot2lab
