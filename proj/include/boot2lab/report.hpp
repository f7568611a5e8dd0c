// report.hpp
//
// JSON and CSV views of run manifests and study results.
//
// JSON is canonical.  Doubles are written in the shortest form that parses
// back to the same bits; NaN and infinities become null.  CSV is a flattened
// view: the manifest as leading "# key=value" lines, then a header row and
// data rows, doubles printed with 17 significant digits.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analytics.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "rng.hpp"
#include "toy_model.hpp"

namespace boot2lab {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "boot2lab 0.1.0";

enum class Subcommand { analytic, single, replicate, conditional, dependence, scaling, fixes };
enum class OutputFormat { json, csv };

[[nodiscard]] inline std::string_view to_string(Subcommand s) noexcept {
    switch (s) {
        case Subcommand::analytic: return "analytic";
        case Subcommand::single: return "single";
        case Subcommand::replicate: return "replicate";
        case Subcommand::conditional: return "conditional";
        case Subcommand::dependence: return "dependence";
        case Subcommand::scaling: return "scaling";
        case Subcommand::fixes: return "fixes";
    }
    return "?";
}

[[nodiscard]] inline std::optional<Subcommand> parse_subcommand(std::string_view s) noexcept {
    for (auto c : {Subcommand::analytic, Subcommand::single, Subcommand::replicate, Subcommand::conditional,
                   Subcommand::dependence, Subcommand::scaling, Subcommand::fixes})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

struct RunManifest {
    ToyConfig config;
    std::uint64_t seed = 12345;
    Subcommand subcommand = Subcommand::analytic;
    OutputFormat output_format = OutputFormat::json;
    std::optional<std::string> output_path;
    std::optional<std::string> preset;
    std::size_t r = 0;         // replications (inner runs for `conditional`)
    std::size_t b = 200;       // pseudo-experiments per replication in `fixes`
    std::size_t datasets = 20; // outer datasets in `conditional`
    std::vector<std::size_t> m_values{25, 100, 400, 1600};
    bool bias_correct = false;
    std::string tool_version{kToolVersion};
    std::string rng_algorithm{kRngAlgorithm};

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

/// Replication count used when --r is not given.
[[nodiscard]] inline std::size_t default_r(Subcommand s) noexcept {
    switch (s) {
        case Subcommand::replicate: return 2000;
        case Subcommand::conditional: return 2000;
        case Subcommand::dependence: return 5000;
        case Subcommand::scaling: return 200;
        case Subcommand::fixes: return 500;
        default: return 0;
    }
}

namespace detail {

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json measured(const Measured& m) { return {{"value", number(m.value)}, {"se", number(m.se)}}; }

template <class Enum>
Enum enum_from(const json& j, std::initializer_list<Enum> options, const char* what) {
    const auto s = j.get<std::string>();
    for (auto o : options)
        if (to_string(o) == s) return o;
    throw InvalidInput(std::string("unknown ") + what + ": " + s);
}

inline std::string_view to_string(OutputFormat f) noexcept { return f == OutputFormat::json ? "json" : "csv"; }

}  // namespace detail

[[nodiscard]] inline json to_json(const ToyConfig& c) {
    return {{"theta", c.theta},
            {"sigma_x", c.sigma_x},
            {"sigma_eps", c.sigma_eps},
            {"n", c.n},
            {"m", c.m},
            {"k", c.k},
            {"merge", to_string(c.merge)},
            {"resample", to_string(c.resample)}};
}

[[nodiscard]] inline ToyConfig toy_config_from_json(const json& j) {
    ToyConfig c;
    c.theta = j.at("theta").get<double>();
    c.sigma_x = j.at("sigma_x").get<double>();
    c.sigma_eps = j.at("sigma_eps").get<double>();
    c.n = j.at("n").get<std::size_t>();
    c.m = j.at("m").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    c.merge = detail::enum_from(j.at("merge"), {MergeMode::arithmetic, MergeMode::geometric}, "merge mode");
    c.resample = detail::enum_from(j.at("resample"),
                                   {ResampleMode::multinomial, ResampleMode::poisson, ResampleMode::none},
                                   "resample mode");
    return c;
}

/// `with_destination` controls whether output_path is written; reports embed
/// the manifest without it so a rerun to another destination reproduces the
/// same bytes.
[[nodiscard]] inline json to_json(const RunManifest& m, bool with_destination = true) {
    json j{{"tool_version", m.tool_version},
           {"rng_algorithm", m.rng_algorithm},
           {"subcommand", to_string(m.subcommand)},
           {"seed", m.seed},
           {"config", to_json(m.config)},
           {"preset", m.preset ? json(*m.preset) : json(nullptr)},
           {"r", m.r},
           {"b", m.b},
           {"datasets", m.datasets},
           {"m_values", m.m_values},
           {"bias_correct", m.bias_correct},
           {"output_format", detail::to_string(m.output_format)}};
    if (with_destination) j["output_path"] = m.output_path ? json(*m.output_path) : json(nullptr);
    return j;
}

[[nodiscard]] inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.rng_algorithm = j.at("rng_algorithm").get<std::string>();
    const auto sub = parse_subcommand(j.at("subcommand").get<std::string>());
    if (!sub) throw InvalidInput("unknown subcommand in manifest");
    m.subcommand = *sub;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = toy_config_from_json(j.at("config"));
    if (!j.at("preset").is_null()) m.preset = j.at("preset").get<std::string>();
    m.r = j.at("r").get<std::size_t>();
    m.b = j.at("b").get<std::size_t>();
    m.datasets = j.at("datasets").get<std::size_t>();
    m.m_values = j.at("m_values").get<std::vector<std::size_t>>();
    m.bias_correct = j.at("bias_correct").get<bool>();
    m.output_format = j.at("output_format").get<std::string>() == "csv" ? OutputFormat::csv : OutputFormat::json;
    if (auto it = j.find("output_path"); it != j.end() && !it->is_null()) m.output_path = it->get<std::string>();
    return m;
}

[[nodiscard]] inline json to_json(const AnalyticMoments& a) {
    using detail::number;
    return {{"var_boot_avg", number(a.var_boot_avg)},
            {"expected_cond_var", number(a.expected_cond_var)},
            {"expected_delta2_boot_boot", number(a.expected_delta2_boot_boot)},
            {"expected_delta2_stderr", number(a.expected_delta2_stderr)},
            {"cov_pair", number(a.cov_pair)},
            {"var_single", number(a.var_single)},
            {"mcstat_term", number(a.mcstat_term)}};
}

[[nodiscard]] inline json analytic_result_json(const ToyConfig& config) {
    using detail::number;
    const auto a = compute_moments(config);
    const auto fix = expected_fix_variances(config);
    json j = to_json(a);
    j["sqrt_var_boot_avg"] = number(std::sqrt(a.var_boot_avg));
    j["sqrt_expected_delta2_boot_boot"] = number(std::sqrt(a.expected_delta2_boot_boot));
    j["sqrt_expected_delta2_stderr"] = number(std::sqrt(a.expected_delta2_stderr));
    j["mcstat_fraction_missed"] = a.var_boot_avg > 0.0 ? number(mcstat_fraction_missed(a)) : json(nullptr);
    j["fix_expected_delta2"] = {
        {"plain", number(fix.plain)},
        {"nested", number(fix.nested)},
        {"provenance", "derived here via the law of total variance; validated by Monte Carlo, not published"}};
    return j;
}

[[nodiscard]] inline json to_json(const ExperimentReport& r, bool with_runtime = false) {
    using detail::number;
    json j{{"theta_hat", number(r.theta_hat)},
           {"delta_boot_boot", number(r.delta_boot_boot)},
           {"delta_stderr", number(r.delta_stderr)},
           {"z_flawed", number(r.z_flawed)},
           {"z_true", number(r.z_true)},
           {"bias_corrected", r.bias_corrected},
           {"poisson_redraws", r.poisson_redraws},
           {"seed", {{"master_seed", r.seed.master_seed}, {"stream_path", r.seed.stream_path}}},
           {"analytic", to_json(r.analytic)}};
    if (with_runtime) j["runtime_seconds"] = number(r.runtime_seconds);
    return j;
}

[[nodiscard]] inline json to_json(const ReplicationSummary& s) {
    using detail::measured;
    using detail::number;
    json j{{"r", s.r},
           {"mean_theta_hat", measured(s.mean_theta_hat)},
           {"empirical_var_theta_hat", measured(s.empirical_var_theta_hat)},
           {"mean_delta2_boot_boot", measured(s.mean_delta2_boot_boot)},
           {"mean_delta2_stderr", measured(s.mean_delta2_stderr)},
           {"empirical_cov_pair", measured(s.empirical_cov_pair)},
           {"empirical_cond_var", s.empirical_cond_var ? measured(*s.empirical_cond_var) : json(nullptr)},
           {"coverage_flawed", measured(s.coverage_flawed)},
           {"coverage_stderr", measured(s.coverage_stderr)},
           {"coverage_true", measured(s.coverage_true)},
           {"median_z_flawed", number(s.median_z_flawed)},
           {"median_z_true", number(s.median_z_true)},
           {"ratio_stderr_to_boot_boot", number(s.ratio_stderr_to_boot_boot)},
           {"analytic", to_json(s.analytic)}};
    j["coverage_fixes"] = s.coverage_fixes ? json{{"plain", measured(s.coverage_fixes->first)},
                                                  {"nested", measured(s.coverage_fixes->second)}}
                                           : json(nullptr);
    return j;
}

[[nodiscard]] inline json to_json(const ConditionalStudy& st) {
    using detail::measured;
    using detail::number;
    json per = json::array();
    for (const auto& c : st.per_dataset)
        per.push_back({{"cond_var", number(c.cond_var)},
                       {"cond_mean", number(c.cond_mean)},
                       {"member_corr", number(c.member_corr)}});
    return {{"datasets", st.datasets},
            {"r_inner", st.r_inner},
            {"mean_cond_var", measured(st.mean_cond_var)},
            {"expected_cond_var", number(st.analytic.expected_cond_var)},
            {"mcstat", measured(st.mcstat)},
            {"expected_mcstat", number(st.analytic.mcstat_term)},
            {"mean_member_corr", number(st.mean_member_corr)},
            {"max_abs_member_corr", number(st.max_abs_member_corr)},
            {"per_dataset", per}};
}

[[nodiscard]] inline json to_json(const DependenceResult& d) {
    using detail::number;
    return {{"r", d.r},
            {"cov_pair", detail::measured(d.cov_pair)},
            {"corr_pair", number(d.corr_pair)},
            {"expected_cov_pair", number(d.expected_cov_pair)}};
}

[[nodiscard]] inline json to_json(const ScalingResult& s) {
    using detail::number;
    json rows = json::array();
    for (const auto& row : s.rows)
        rows.push_back({{"m", row.m},
                        {"mean_delta_boot_boot", detail::measured(row.mean_delta_boot_boot)},
                        {"expected_delta_boot_boot", number(row.expected_delta_boot_boot)}});
    return {{"r", s.r}, {"slope", number(s.slope)}, {"rows", rows}};
}

[[nodiscard]] inline json to_json(const FixesResult& f) {
    using detail::measured;
    using detail::number;
    return {{"r", f.r},
            {"b", f.b},
            {"plain",
             {{"mean_delta2", measured(f.mean_delta2_plain)},
              {"expected_delta2", number(f.expected.plain)},
              {"coverage", measured(f.coverage_plain)},
              {"true_sd", number(f.true_sd_plain)},
              {"ratio_delta_to_true_sd", number(f.ratio_plain)},
              {"empirical_var_point", measured(f.empirical_var_plain)}}},
            {"nested",
             {{"mean_delta2", measured(f.mean_delta2_nested)},
              {"expected_delta2", number(f.expected.nested)},
              {"coverage", measured(f.coverage_nested)},
              {"true_sd", number(f.true_sd_nested)},
              {"ratio_delta_to_true_sd", number(f.ratio_nested)},
              {"empirical_var_point", measured(f.empirical_var_nested)}}}};
}

namespace detail {

inline std::string csv_number(const json& v) {
    if (v.is_null()) return "";
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline std::string csv_key(const std::string& pointer) {
    std::string k = pointer.substr(1);
    for (auto& ch : k)
        if (ch == '/') ch = '.';
    return k;
}

}  // namespace detail

/// Flattened CSV view.  A result carrying a "rows" array (the scaling table)
/// becomes one CSV row per entry, with scalar siblings repeated on each row;
/// anything else becomes a single row.
[[nodiscard]] inline std::string render_csv(const json& manifest, const json& result) {
    std::ostringstream out;
    const json manifest_flat = manifest.flatten();
    for (const auto& [k, v] : manifest_flat.items())
        out << "# " << detail::csv_key(k) << '=' << detail::csv_number(v) << '\n';

    std::vector<json> rows;
    json shared = result;
    if (result.contains("rows") && result["rows"].is_array()) {
        shared.erase("rows");
        for (const auto& r : result["rows"]) rows.push_back(r);
    } else {
        rows.push_back(json::object());
    }
    const json shared_flat = shared.empty() ? json::object() : shared.flatten();
    bool header_done = false;
    for (const auto& row : rows) {
        const json row_flat = row.empty() ? json::object() : row.flatten();
        if (!header_done) {
            bool first = true;
            for (const auto& part : {row_flat, shared_flat})
                for (const auto& [k, v] : part.items()) {
                    out << (first ? "" : ",") << detail::csv_key(k);
                    first = false;
                }
            out << '\n';
            header_done = true;
        }
        bool first = true;
        for (const auto& part : {row_flat, shared_flat})
            for (const auto& [k, v] : part.items()) {
                out << (first ? "" : ",") << detail::csv_number(v);
                first = false;
            }
        out << '\n';
    }
    return out.str();
}

}  // namespace boot2lab
