#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rbn/counterexample.hpp"
#include "rbn/sde.hpp"
#include "rbn/sewing.hpp"
#include "rbn/xlab.hpp"

namespace rbn::xlab {

namespace {

constexpr std::array<std::pair<ExperimentKind, const char*>, 7> kNames{{
    {ExperimentKind::fbm_validate, "fbm_validate"},
    {ExperimentKind::regime_table, "regime_table"},
    {ExperimentKind::variation_scaling, "variation_scaling"},
    {ExperimentKind::localtime_exponents, "localtime_exponents"},
    {ExperimentKind::skew_legall, "skew_legall"},
    {ExperimentKind::sewing_rates, "sewing_rates"},
    {ExperimentKind::counterexample_sweep, "counterexample_sweep"},
}};

Json default_params(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::fbm_validate:
            return {
                {"covariance", {{"hurst", {0.2, 0.5, 0.8}}, {"n_steps", 256}, {"n_paths", 4096}, {"subgrid", 8}}},
                {"roundtrip", {{"hurst", {0.25, 0.75}}, {"n_steps", 4096}, {"n_paths", 4}, {"tolerance", 0.05}}},
                {"kernel_bound", {{"hurst", {0.2, 0.5, 0.8}}, {"n_points", 100}, {"min_lag", 1e-4}}},
            };
        case ExperimentKind::regime_table:
            return {{"d", {1, 2, 3}},     {"h_denominator", 51}, {"h_count", 50},
                    {"p_denominator", 7}, {"p_first", 7},        {"p_count", 50}};
        case ExperimentKind::variation_scaling:
            return {
                {"h", 0.3},
                {"n_paths", 1000},
                {"n_steps", 4096},
                {"mollification", 256},
                {"grid", {{"L", 6.0}, {"n_cells", 768}}},
                {"k_min", 1},
                {"k_max", 8},
                {"tolerance", 0.1},
                {"drifts", Json::array({{{"type", "power"}, {"exponent", 0.4}, {"p", 2.0}},
                                        {{"type", "dirac"}, {"weight", 1.0}}})},
                {"cauchy",
                 {{"n_list", {4, 16, 64, 256}}, {"n_paths", 200}, {"n_steps", 1024}, {"grid", {{"L", 4.0}, {"n_cells", 512}}}}},
            };
        case ExperimentKind::localtime_exponents:
            return {
                {"time",
                 {{"hurst", {0.3, 0.2}}, {"n_paths", 1000}, {"n_steps", 8192}, {"R", 0.02}, {"k_min", 3}, {"k_max", 9},
                  {"tolerance", 0.1}}},
                {"field", {{"h", 0.3}, {"n_steps", 2048}, {"grid", {{"L", 4.0}, {"n_cells", 512}}}, {"times", {0.25, 0.5, 1.0}}}},
                {"gap",
                 {{"reflected", {{"n_paths", 200}, {"n_steps", 16384}}},
                  {"fbm", {{"h", 0.3}, {"n_paths", 200}, {"n_steps", 16384}}},
                  {"away_min", 0.4},
                  {"straddle_max", 0.1}}},
            };
        case ExperimentKind::skew_legall:
            return {{"beta", 1.0},       {"mollification", 256},   {"n_paths", 100000}, {"n_steps", 16384},
                    {"oracle_paths", 100000}, {"tolerance", 0.02}};
        case ExperimentKind::sewing_rates:
            return {
                {"moments",
                 {{"hurst", {0.3, 0.45}}, {"bump_variance", 0.01}, {"m", 2.0}, {"alpha", -0.5}, {"q", 2.0},
                  {"horizons", {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}}, {"n_paths", 4000}, {"n_steps", 8192}, {"tolerance", 0.1}}},
                {"defects",
                 {{"hurst", {0.3, 0.45}}, {"bump_variance", 0.01}, {"n_steps", 4096}, {"k_max", 11}, {"k_from", 2},
                  {"n_paths", 1000}, {"ratio_bound", 0.9}}},
                {"young", {{"h", 0.3}, {"n_steps", {1024, 4096, 16384}}, {"etas", {1e-3, 1e-6}}, {"bound", 1e-8}}},
            };
        case ExperimentKind::counterexample_sweep:
            return {
                {"h", 0.6},
                {"d", 1},
                {"alpha_super", 1.0},
                {"alpha_sub", 0.5},
                {"n_paths", 100},
                {"n_steps", 16384},
                {"deltas", {1e-8}},
                {"n_eps", 4},
                {"super_fraction", 0.8},
                {"sub_fraction", 0.2},
                {"bad_drift", {{"h", 0.75}, {"d", 1}, {"p", 2.0}}},
            };
    }
    throw DomainError("default_params: unknown kind");
}

// Replaces every n_paths / n_steps entry (scalar) at any depth.
void override_key(Json& j, const std::string& key, std::size_t value) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == key && it->is_number()) *it = value;
            else override_key(*it, key, value);
        }
    } else if (j.is_array()) {
        for (auto& e : j) override_key(e, key, value);
    }
}

bool has_empty_ensemble(const Json& j) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "n_paths" && it->is_number() && it->get<double>() < 1) return true;
            if (has_empty_ensemble(*it)) return true;
        }
    } else if (j.is_array()) {
        for (const auto& e : j)
            if (has_empty_ensemble(e)) return true;
    }
    return false;
}

void refuse_unless_existence(double h, std::size_t d, double p, const std::string& where) {
    const auto r = sde::classify_regime(h, d, p);
    if (r.verdict != sde::Verdict::weak_existence) {
        std::ostringstream os;
        os << where << ": (h=" << h << ", d=" << d << ", p=" << p << ") is " << sde::to_string(r.verdict);
        throw RegimeRefusal("regime", os.str());
    }
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : kNames)
        if (kind == k) return name;
    return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
    for (const auto& [kind, n] : kNames)
        if (name == n) return kind;
    throw DomainError("unknown experiment kind: " + name);
}

const std::vector<ExperimentKind>& all_kinds() {
    static const std::vector<ExperimentKind> kinds = [] {
        std::vector<ExperimentKind> v;
        for (const auto& kn : kNames) v.push_back(kn.first);
        return v;
    }();
    return kinds;
}

std::string software_version() { return RBN_VERSION; }

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    c.out = "out/" + to_string(kind);
    c.params = default_params(kind);
    return c;
}

ExperimentConfig parse_config(const Json& doc) {
    if (!doc.is_object() || !doc.contains("kind")) throw DomainError("config: expected an object with a \"kind\" key");
    ExperimentConfig c = default_config(parse_kind(doc.at("kind").get<std::string>()));
    try {
        if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("n_paths")) c.n_paths = doc.at("n_paths").get<std::size_t>();
        if (doc.contains("n_steps")) c.n_steps = doc.at("n_steps").get<std::size_t>();
        if (doc.contains("threads")) c.threads = doc.at("threads").get<unsigned>();
        if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
        if (doc.contains("params")) c.params.merge_patch(doc.at("params"));
    } catch (const Json::exception& e) {
        throw DomainError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DomainError("config: cannot open " + file.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        throw DomainError("config: " + file.string() + ": " + e.what());
    }
    return parse_config(doc);
}

Json to_json(const ExperimentConfig& cfg) {
    Json p = cfg.params;
    if (cfg.n_paths) override_key(p, "n_paths", *cfg.n_paths);
    if (cfg.n_steps) override_key(p, "n_steps", *cfg.n_steps);
    return {{"kind", to_string(cfg.kind)}, {"seed", cfg.seed}, {"out", cfg.out}, {"threads", cfg.threads}, {"params", p}};
}

std::string config_hash(const ExperimentConfig& cfg) {
    Json j = to_json(cfg);
    j.erase("out");
    j.erase("threads");
    const std::string text = j.dump();
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw NumericalFailure("config_hash: SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s.push_back(hex[md[i] >> 4]);
        s.push_back(hex[md[i] & 15]);
    }
    return s;
}

void validate_config(const ExperimentConfig& cfg) {
    const Json p = to_json(cfg).at("params");
    if (has_empty_ensemble(p)) throw RegimeRefusal("empty_ensemble", "config: every ensemble needs at least one path");
    try {
        switch (cfg.kind) {
            case ExperimentKind::fbm_validate:
                for (const char* sec : {"covariance", "roundtrip", "kernel_bound"})
                    for (double h : p.at(sec).at("hurst")) fbm::HurstParameter{h};
                if (p.at("covariance").at("n_steps").get<std::size_t>() % p.at("covariance").at("subgrid").get<std::size_t>())
                    throw DomainError("covariance: subgrid must divide n_steps");
                break;
            case ExperimentKind::regime_table:
                if (p.at("h_count").get<int>() >= p.at("h_denominator").get<int>())
                    throw DomainError("regime_table: h_count must be below h_denominator");
                if (p.at("p_first").get<int>() < p.at("p_denominator").get<int>())
                    throw DomainError("regime_table: p must start at >= 1");
                break;
            case ExperimentKind::variation_scaling: {
                const double h = p.at("h");
                for (const auto& d : p.at("drifts")) {
                    const std::string type = d.at("type");
                    if (type == "power") {
                        const double a = d.at("exponent"), q = d.at("p");
                        if (!(a * q < 1)) throw DomainError("variation_scaling: power drift not in L_p");
                        refuse_unless_existence(h, 1, q, "variation_scaling");
                    } else if (type == "dirac") {
                        refuse_unless_existence(h, 1, 1.0, "variation_scaling");
                    } else {
                        throw DomainError("variation_scaling: unknown drift type " + type);
                    }
                }
                if (p.at("k_max").get<int>() - p.at("k_min").get<int>() < 3)
                    throw DomainError("variation_scaling: need at least 4 intervals");
                break;
            }
            case ExperimentKind::localtime_exponents:
                for (double h : p.at("time").at("hurst"))
                    if (!(h > 0 && h < 1)) throw DomainError("localtime_exponents: h must lie in (0,1)");
                break;
            case ExperimentKind::skew_legall:
                if (!(p.at("mollification").get<double>() > 0)) throw DomainError("skew_legall: mollification must be positive");
                break;
            case ExperimentKind::sewing_rates: {
                const auto& m = p.at("moments");
                for (double h : m.at("hurst"))
                    sewing::check_sewing_condition(h, {m.at("alpha").get<double>(), m.at("q").get<double>(), 1});
                break;
            }
            case ExperimentKind::counterexample_sweep: {
                const auto& b = p.at("bad_drift");
                const auto r = sde::classify_regime(b.at("h"), b.at("d"), b.at("p"));
                if (r.verdict != sde::Verdict::counterexample_regime)
                    throw RegimeRefusal("regime", "counterexample_sweep: bad_drift requires d/p > 1/h - 1");
                const double h = p.at("h");
                counterexample::CeParams(counterexample::declared_gamma(h), p.at("alpha_super"), p.at("d"));
                counterexample::CeParams(counterexample::declared_gamma(h), p.at("alpha_sub"), p.at("d"));
                break;
            }
        }
    } catch (const Json::exception& e) {
        throw DomainError(std::string("config: ") + e.what());
    }
}

}  // namespace rbn::xlab
