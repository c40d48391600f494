#pragma once

// Configuration-driven experiment runner: JSON config in, CSV tables and a
// JSON summary out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genpod/errors.hpp"
#include "genpod/models.hpp"
#include "genpod/pod.hpp"
#include "genpod/uq.hpp"

namespace genpod {

using nlohmann::json;

enum class ExitCode : int { Ok = 0, Failure = 1, Validation = 2, Numerical = 3 };

struct MethodSpec {
    std::string type;                  // pce | pce-pod | mc | mc-pod | rand-snap
    std::vector<int> pcedims;          // pce
    int train_pce = 2;                 // pce-pod, mc-pod
    std::vector<int> eval_pce;         // pce-pod
    std::vector<std::size_t> kprimes;  // pce-pod, mc-pod, rand-snap
    std::vector<std::size_t> pce_ranks;  // pce-pod: per parameter, 0 keeps the nodal basis
    std::vector<std::size_t> samples;  // mc, mc-pod
    std::size_t realizations = 1;      // mc, rand-snap
    std::optional<std::uint64_t> seed; // mc, mc-pod, rand-snap
    std::size_t k = 16;                // rand-snap snapshot count
};

struct ExperimentConfig {
    std::string name = "experiment";
    ModelParams model = Toy1dParams{};
    std::vector<MethodSpec> methods;
    std::filesystem::path out_dir = "results";
    bool timing = true;
    unsigned threads = 0;
    int reference_pce = 4;   // full-order reference grid for models without a closed form
};

/// One row of an error table.
struct TableRow {
    UqResult result;
    std::optional<int> pcedim;
    std::optional<std::size_t> kprime;
    Moments reference;
};

struct RunReport {
    std::vector<std::filesystem::path> files;
    json summary;
};

namespace detail {

/// Collects validation problems and throws them together.
class Issues {
public:
    void add(std::string msg) { list_.push_back(std::move(msg)); }
    bool empty() const { return list_.empty(); }
    void raise() const {
        if (list_.empty()) return;
        std::string msg = "invalid configuration:";
        for (const auto& m : list_) msg += "\n  - " + m;
        throw ValidationError(msg);
    }

private:
    std::vector<std::string> list_;
};

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed,
                       Issues& issues) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) issues.add("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where, Issues& issues) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        issues.add(where + "." + key + " has the wrong type");
    }
}

template <class T>
void read_list(const json& j, const char* key, std::vector<T>& out, const std::string& where,
               Issues& issues) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    try {
        out = v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
    } catch (const json::exception&) {
        issues.add(where + "." + key + " has the wrong type");
    }
}

inline std::size_t model_dofs(const ModelParams& p) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using P = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<P, Toy1dParams>) {
                return 1;
            } else if constexpr (std::is_same_v<P, Toy2dParams>) {
                return 2;
            } else {
                return static_cast<std::size_t>(std::max(m.grid, 0)) * static_cast<std::size_t>(std::max(m.grid, 0));
            }
        },
        p);
}

inline std::size_t model_params_count(const ModelParams& p) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using P = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<P, Toy1dParams>) {
                return 1;
            } else if constexpr (std::is_same_v<P, Toy2dParams>) {
                return 2;
            } else {
                return 4;
            }
        },
        p);
}

inline ModelParams parse_model(const json& j, Issues& issues) {
    if (!j.is_object()) {
        issues.add("model must be an object");
        return Toy1dParams{};
    }
    const std::string type = j.value("type", "");
    if (type == "toy1d") {
        Toy1dParams p;
        check_keys(j, "model", {"type", "lo", "hi"}, issues);
        read(j, "lo", p.lo, "model", issues);
        read(j, "hi", p.hi, "model", issues);
        if (!(p.lo < p.hi)) issues.add("model: need lo < hi");
        return p;
    }
    if (type == "toy2d") {
        Toy2dParams p;
        check_keys(j, "model", {"type", "lo1", "hi1", "lo2", "hi2", "eps"}, issues);
        read(j, "lo1", p.lo1, "model", issues);
        read(j, "hi1", p.hi1, "model", issues);
        read(j, "lo2", p.lo2, "model", issues);
        read(j, "hi2", p.hi2, "model", issues);
        read(j, "eps", p.eps, "model", issues);
        if (!(p.lo1 < p.hi1 && p.lo2 < p.hi2)) issues.add("model: need lo < hi in both dimensions");
        return p;
    }
    if (type == "convdiff") {
        ConvDiffParams p;
        check_keys(j, "model",
                   {"type", "grid", "kappa_bar", "lo", "hi", "convection", "source", "dirichlet", "patch"},
                   issues);
        read(j, "grid", p.grid, "model", issues);
        read(j, "kappa_bar", p.kappa_bar, "model", issues);
        read(j, "lo", p.lo, "model", issues);
        read(j, "hi", p.hi, "model", issues);
        read(j, "convection", p.convection, "model", issues);
        std::string source = "corners";
        std::string dirichlet = "bottom";
        read(j, "source", source, "model", issues);
        read(j, "dirichlet", dirichlet, "model", issues);
        if (source == "corners") {
            p.source = Source::Corners;
        } else if (source == "zero") {
            p.source = Source::Zero;
        } else if (source == "one") {
            p.source = Source::One;
        } else {
            issues.add("model.source must be corners, zero or one");
        }
        if (dirichlet == "bottom") {
            p.dirichlet = DirichletSides::Bottom;
        } else if (dirichlet == "all") {
            p.dirichlet = DirichletSides::All;
        } else {
            issues.add("model.dirichlet must be bottom or all");
        }
        std::vector<double> patch{p.patch_lo, p.patch_hi};
        read(j, "patch", patch, "model", issues);
        if (patch.size() != 2 || !(patch[0] <= patch[1])) {
            issues.add("model.patch must be [lo, hi] with lo <= hi");
        } else {
            p.patch_lo = patch[0];
            p.patch_hi = patch[1];
        }
        if (p.grid < 8) issues.add("model.grid must be at least 8");
        if (!(p.lo < p.hi)) issues.add("model: need lo < hi");
        return p;
    }
    issues.add("unknown model type '" + type + "' (expected toy1d, toy2d or convdiff)");
    return Toy1dParams{};
}

inline MethodSpec parse_method(const json& j, std::size_t idx, const ModelParams& model, Issues& issues) {
    MethodSpec m;
    const std::string where = "methods[" + std::to_string(idx) + "]";
    if (!j.is_object()) {
        issues.add(where + " must be an object");
        return m;
    }
    m.type = j.value("type", "");
    const std::size_t dofs = model_dofs(model);
    auto check_pce = [&](int d, const char* what) {
        if (d < 1 || d > kMaxGaussPoints) {
            issues.add(where + "." + what + " = " + std::to_string(d) + " outside [1, " +
                       std::to_string(kMaxGaussPoints) + "]");
        }
    };
    auto check_kprimes = [&](std::size_t limit, const std::string& what) {
        if (m.kprimes.empty()) issues.add(where + ".kprime must list at least one rank");
        for (auto k : m.kprimes) {
            if (k < 1 || k > limit) {
                issues.add(where + ".kprime = " + std::to_string(k) + " outside [1, " +
                           std::to_string(limit) + "] (" + what + ")");
            }
        }
    };
    auto need_seed = [&] {
        if (!m.seed) issues.add(where + " is stochastic and needs a seed");
    };

    if (m.type == "pce") {
        check_keys(j, where, {"type", "pcedim"}, issues);
        read_list(j, "pcedim", m.pcedims, where, issues);
        if (m.pcedims.empty()) issues.add(where + ".pcedim must list at least one dimension");
        for (int d : m.pcedims) check_pce(d, "pcedim");
    } else if (m.type == "pce-pod") {
        check_keys(j, where, {"type", "train_pce", "eval_pce", "kprime", "pce_ranks"}, issues);
        read(j, "train_pce", m.train_pce, where, issues);
        read_list(j, "eval_pce", m.eval_pce, where, issues);
        read_list(j, "kprime", m.kprimes, where, issues);
        read_list(j, "pce_ranks", m.pce_ranks, where, issues);
        check_pce(m.train_pce, "train_pce");
        if (m.eval_pce.empty()) m.eval_pce = {m.train_pce};
        for (int d : m.eval_pce) check_pce(d, "eval_pce");
        const std::size_t snapshots = static_cast<std::size_t>(std::max(m.train_pce, 1));
        check_kprimes(dofs, "spatial dimension");
        if (!m.pce_ranks.empty()) {
            if (m.pce_ranks.size() != model_params_count(model)) {
                issues.add(where + ".pce_ranks needs one entry per parameter");
            }
            for (auto r : m.pce_ranks) {
                if (r > snapshots) issues.add(where + ".pce_ranks entry exceeds train_pce");
            }
            const bool reduced = std::any_of(m.pce_ranks.begin(), m.pce_ranks.end(), [](auto r) { return r > 0; });
            if (reduced && (m.eval_pce.size() != 1 || m.eval_pce[0] != m.train_pce)) {
                issues.add(where + ": reduced PCE dimensions are evaluated on the training grid only");
            }
        }
    } else if (m.type == "mc") {
        check_keys(j, where, {"type", "samples", "realizations", "seed"}, issues);
        read_list(j, "samples", m.samples, where, issues);
        read(j, "realizations", m.realizations, where, issues);
        std::uint64_t seed = 0;
        if (j.contains("seed")) {
            read(j, "seed", seed, where, issues);
            m.seed = seed;
        }
        need_seed();
        if (m.samples.empty()) issues.add(where + ".samples must list at least one count");
        for (auto n : m.samples) {
            if (n < 1) issues.add(where + ".samples entries must be positive");
        }
        if (m.realizations < 1) issues.add(where + ".realizations must be positive");
    } else if (m.type == "mc-pod") {
        check_keys(j, where, {"type", "train_pce", "kprime", "samples", "seed"}, issues);
        read(j, "train_pce", m.train_pce, where, issues);
        read_list(j, "kprime", m.kprimes, where, issues);
        read_list(j, "samples", m.samples, where, issues);
        std::uint64_t seed = 0;
        if (j.contains("seed")) {
            read(j, "seed", seed, where, issues);
            m.seed = seed;
        }
        need_seed();
        check_pce(m.train_pce, "train_pce");
        check_kprimes(dofs, "spatial dimension");
        if (m.samples.empty()) issues.add(where + ".samples must list at least one count");
    } else if (m.type == "rand-snap") {
        check_keys(j, where, {"type", "k", "kprime", "realizations", "seed"}, issues);
        read(j, "k", m.k, where, issues);
        read_list(j, "kprime", m.kprimes, where, issues);
        read(j, "realizations", m.realizations, where, issues);
        std::uint64_t seed = 0;
        if (j.contains("seed")) {
            read(j, "seed", seed, where, issues);
            m.seed = seed;
        }
        need_seed();
        if (m.k < 1 || m.k > dofs) {
            issues.add(where + ".k = " + std::to_string(m.k) + " outside [1, " + std::to_string(dofs) + "]");
        }
        check_kprimes(std::min(m.k, dofs), "snapshot count");
        if (m.realizations < 1) issues.add(where + ".realizations must be positive");
    } else {
        issues.add("unknown method type '" + m.type + "' in " + where +
                   " (expected pce, pce-pod, mc, mc-pod or rand-snap)");
    }
    return m;
}

}  // namespace detail

/// Parses and validates a configuration; throws ValidationError listing every problem.
inline ExperimentConfig parse_config(const json& j) {
    detail::Issues issues;
    ExperimentConfig c;
    if (!j.is_object()) throw ValidationError("configuration must be a JSON object");
    detail::check_keys(j, "configuration", {"name", "model", "methods", "output", "threads", "reference_pce"},
                       issues);
    detail::read(j, "name", c.name, "configuration", issues);
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) {
        issues.add("name must be a nonempty file-name stem");
    }
    if (!j.contains("model")) {
        issues.add("missing model");
    } else {
        c.model = detail::parse_model(j.at("model"), issues);
    }
    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty()) {
        issues.add("methods must be a nonempty list");
    } else {
        for (std::size_t i = 0; i < j.at("methods").size(); ++i) {
            c.methods.push_back(detail::parse_method(j.at("methods")[i], i, c.model, issues));
        }
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        if (!o.is_object()) {
            issues.add("output must be an object");
        } else {
            detail::check_keys(o, "output", {"dir", "timing"}, issues);
            std::string dir = c.out_dir.string();
            detail::read(o, "dir", dir, "output", issues);
            c.out_dir = dir;
            detail::read(o, "timing", c.timing, "output", issues);
        }
    }
    detail::read(j, "threads", c.threads, "configuration", issues);
    detail::read(j, "reference_pce", c.reference_pce, "configuration", issues);
    if (c.reference_pce < 1 || c.reference_pce > kMaxGaussPoints) {
        issues.add("reference_pce outside [1, " + std::to_string(kMaxGaussPoints) + "]");
    }
    issues.raise();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read configuration " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("configuration " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

inline ParametricModel make_model(const ModelParams& p) {
    return std::visit(
        [](const auto& m) -> ParametricModel {
            using P = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<P, Toy1dParams>) {
                return toy1d_model(m.lo, m.hi);
            } else if constexpr (std::is_same_v<P, Toy2dParams>) {
                return toy2d_model(m.lo1, m.hi1, m.lo2, m.hi2, m.eps);
            } else {
                return convdiff_model(m);
            }
        },
        p);
}

inline json model_to_json(const ModelParams& p) {
    return std::visit(
        [](const auto& m) -> json {
            using P = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<P, Toy1dParams>) {
                return {{"type", "toy1d"}, {"lo", m.lo}, {"hi", m.hi}};
            } else if constexpr (std::is_same_v<P, Toy2dParams>) {
                return {{"type", "toy2d"}, {"lo1", m.lo1}, {"hi1", m.hi1},
                        {"lo2", m.lo2}, {"hi2", m.hi2}, {"eps", m.eps}};
            } else {
                const char* src = m.source == Source::Corners ? "corners" : m.source == Source::Zero ? "zero" : "one";
                return {{"type", "convdiff"}, {"grid", m.grid}, {"kappa_bar", m.kappa_bar},
                        {"lo", m.lo}, {"hi", m.hi}, {"convection", m.convection}, {"source", src},
                        {"dirichlet", m.dirichlet == DirichletSides::All ? "all" : "bottom"},
                        {"patch", {m.patch_lo, m.patch_hi}}};
            }
        },
        p);
}

/// Twelve significant digits.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

inline const std::vector<std::string>& table_columns() {
    static const std::vector<std::string> cols{
        "method", "pcedim", "kprime", "mean", "variance", "ref_mean", "ref_variance",
        "rel_err_mean", "rel_err_variance", "n_solves", "wall_time_s"};
    return cols;
}

inline double relative_error(double value, double ref) { return (value - ref) / ref; }

inline std::string csv_row(const TableRow& r, bool timing) {
    std::ostringstream out;
    out << to_string(r.result.method) << ',' << (r.pcedim ? std::to_string(*r.pcedim) : "") << ','
        << (r.kprime ? std::to_string(*r.kprime) : "") << ',' << format_number(r.result.mean) << ','
        << format_number(r.result.variance) << ',' << format_number(r.reference.mean) << ','
        << format_number(r.reference.variance) << ','
        << format_number(relative_error(r.result.mean, r.reference.mean)) << ','
        << format_number(relative_error(r.result.variance, r.reference.variance)) << ','
        << r.result.n_solves << ',' << format_number(timing ? r.result.wall_time : 0.0);
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string csv_table(const std::vector<std::string>& header, const std::vector<std::string>& rows) {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    s += '\n';
    for (const auto& r : rows) s += r + '\n';
    return s;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Runs every method of the configuration and writes the report files.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
    const ParametricModel model = make_model(cfg.model);
    const unsigned threads = cfg.threads;
    std::filesystem::create_directories(cfg.out_dir);
    RunReport report;
    json& sum = report.summary;
    sum["name"] = cfg.name;
    sum["model"] = model_to_json(cfg.model);
    sum["n_dof"] = model.n_dof();
    sum["records"] = json::array();

    // Reference moments: closed form or adaptive quadrature for the toy
    // models, a full-order PCE sweep otherwise.
    std::map<int, Moments> full_pce;
    auto full_order = [&](int d) -> const Moments& {
        auto it = full_pce.find(d);
        if (it == full_pce.end()) {
            const UqResult r = pce_statistics(model, d, threads);
            it = full_pce.emplace(d, Moments{r.mean, r.variance}).first;
        }
        return it->second;
    };
    const bool analytic = !std::holds_alternative<ConvDiffParams>(cfg.model);
    std::optional<Moments> reference_cache;
    auto reference = [&]() -> Moments {
        if (!reference_cache) {
            reference_cache = analytic ? analytic_reference(model) : full_order(cfg.reference_pce);
            sum["reference"] = {{"mean", reference_cache->mean},
                                {"variance", reference_cache->variance},
                                {"source", analytic ? std::string("analytic")
                                                    : "pce-" + std::to_string(cfg.reference_pce)}};
        }
        return *reference_cache;
    };

    auto record = [&](const TableRow& row, json extra = json::object()) {
        json r = {{"method", to_string(row.result.method)},
                  {"mean", row.result.mean},
                  {"variance", row.result.variance},
                  {"ref_mean", row.reference.mean},
                  {"ref_variance", row.reference.variance},
                  {"rel_err_mean", relative_error(row.result.mean, row.reference.mean)},
                  {"rel_err_variance", relative_error(row.result.variance, row.reference.variance)},
                  {"n_solves", row.result.n_solves},
                  {"wall_time_s", cfg.timing ? row.result.wall_time : 0.0},
                  {"clipped", row.result.clipped},
                  {"warnings", row.result.warnings}};
        if (row.pcedim) r["pcedim"] = *row.pcedim;
        if (row.kprime) r["kprime"] = *row.kprime;
        r.update(extra);
        sum["records"].push_back(r);
    };
    auto emit = [&](const std::string& suffix, const std::vector<std::string>& header,
                    const std::vector<std::string>& rows) {
        const auto path = cfg.out_dir / (cfg.name + "_" + suffix + ".csv");
        write_text(path, csv_table(header, rows));
        report.files.push_back(path);
    };

    std::map<std::string, int> seen;
    for (const auto& m : cfg.methods) {
        const int count = seen[m.type]++;
        const std::string tag = m.type + (count ? "_" + std::to_string(count + 1) : "");
        std::vector<std::string> rows;

        if (m.type == "pce") {
            for (int d : m.pcedims) {
                const TableRow row{pce_statistics(model, d, threads), d, std::nullopt, reference()};
                rows.push_back(csv_row(row, cfg.timing));
                record(row);
            }
            emit(tag, table_columns(), rows);
        } else if (m.type == "pce-pod") {
            const auto train = pce_rules(model, m.train_pce);
            const SnapshotTensor snap = pce_sweep(model, train, threads);
            const auto factors = snapshot_factors(model, train);
            const std::size_t kmax = *std::max_element(m.kprimes.begin(), m.kprimes.end());
            const PodBasis full_basis = pod_basis(snap.coeffs, factors, 0, kmax);
            BasisSelection pce_bases(train.size());
            for (std::size_t i = 0; i < m.pce_ranks.size(); ++i) {
                if (m.pce_ranks[i] > 0) pce_bases[i] = pod_basis(snap.coeffs, factors, i + 1, m.pce_ranks[i]);
            }
            const double ynorm = weighted_norm(snap.coeffs, factors);
            std::vector<std::string> bound_rows;
            json bounds = json::array();
            for (std::size_t kp : m.kprimes) {
                const PodBasis basis = truncate(full_basis, kp);
                const double bound = projection_error_bound({basis});
                bound_rows.push_back(std::to_string(kp) + "," + format_number(bound) + "," +
                                     format_number(bound / ynorm));
                bounds.push_back({{"kprime", kp}, {"bound", bound}, {"relative", bound / ynorm}});
                const ReducedModel rm = build_reduced_model(model, train, basis, pce_bases);
                for (int d : m.eval_pce) {
                    UqResult r = solve_reduced(rm, pce_rules(model, d), Method::PcePod, threads);
                    r.n_solves += snap.n_solves;
                    const Moments ref = analytic ? reference() : full_order(d);
                    const TableRow row{r, d, kp, ref};
                    rows.push_back(csv_row(row, cfg.timing));
                    record(row, {{"train_pce", m.train_pce}});
                }
            }
            emit(tag, table_columns(), rows);
            emit(tag + "_bound", {"kprime", "bound", "rel_bound"}, bound_rows);
            sum["projection_bounds"][tag] = {{"snapshot_norm", ynorm}, {"bounds", bounds}};
        } else if (m.type == "mc") {
            std::vector<std::string> median_rows;
            const Moments ref = reference();
            for (std::size_t n : m.samples) {
                std::vector<double> em, ev;
                for (std::size_t rz = 0; rz < m.realizations; ++rz) {
                    const std::uint64_t seed = *m.seed + rz;
                    const TableRow row{monte_carlo(model, n, seed, threads), std::nullopt, std::nullopt, ref};
                    rows.push_back(csv_row(row, cfg.timing));
                    record(row, {{"samples", n}, {"seed", seed}, {"realization", rz}});
                    em.push_back(relative_error(row.result.mean, ref.mean));
                    ev.push_back(relative_error(row.result.variance, ref.variance));
                }
                std::vector<double> aem(em.size()), aev(ev.size());
                std::transform(em.begin(), em.end(), aem.begin(), [](double x) { return std::abs(x); });
                std::transform(ev.begin(), ev.end(), aev.begin(), [](double x) { return std::abs(x); });
                median_rows.push_back(std::to_string(n) + "," + std::to_string(m.realizations) + "," +
                                      format_number(median(em)) + "," + format_number(median(ev)) + "," +
                                      format_number(median(aem)) + "," + format_number(median(aev)));
                sum["mc_medians"].push_back({{"samples", n},
                                             {"realizations", m.realizations},
                                             {"median_rel_err_mean", median(em)},
                                             {"median_rel_err_variance", median(ev)},
                                             {"median_abs_rel_err_mean", median(aem)},
                                             {"median_abs_rel_err_variance", median(aev)}});
            }
            emit(tag, table_columns(), rows);
            emit(tag + "_median",
                 {"samples", "realizations", "median_rel_err_mean", "median_rel_err_variance",
                  "median_abs_rel_err_mean", "median_abs_rel_err_variance"},
                 median_rows);
        } else if (m.type == "mc-pod") {
            const auto train = pce_rules(model, m.train_pce);
            const SnapshotTensor snap = pce_sweep(model, train, threads);
            const auto factors = snapshot_factors(model, train);
            const std::size_t kmax = *std::max_element(m.kprimes.begin(), m.kprimes.end());
            const PodBasis full_basis = pod_basis(snap.coeffs, factors, 0, kmax);
            for (std::size_t kp : m.kprimes) {
                const ReducedModel rm = build_reduced_model(model, train, truncate(full_basis, kp));
                for (std::size_t n : m.samples) {
                    UqResult r = monte_carlo_reduced(rm, n, *m.seed, threads);
                    r.n_solves += snap.n_solves;
                    const TableRow row{r, std::nullopt, kp, reference()};
                    rows.push_back(csv_row(row, cfg.timing));
                    record(row, {{"samples", n}, {"seed", *m.seed}, {"train_pce", m.train_pce}});
                }
            }
            emit(tag, table_columns(), rows);
        } else if (m.type == "rand-snap") {
            const MassFactor l0 = mass_factor(model.spatial_mass());
            std::map<std::size_t, std::vector<double>> rel_by_k;
            for (std::size_t rz = 0; rz < m.realizations; ++rz) {
                const std::uint64_t seed = *m.seed + rz;
                for (std::size_t kp : m.kprimes) {
                    const RandomSnapshotPod r = random_snapshot_pod(model, m.k, kp, seed, l0, threads);
                    const double rel = r.e_proj / r.scale;
                    rel_by_k[kp].push_back(rel);
                    rows.push_back(std::to_string(m.k) + "," + std::to_string(kp) + "," + std::to_string(rz) +
                                   "," + std::to_string(seed) + "," + format_number(r.e_proj) + "," +
                                   format_number(r.scale) + "," + format_number(rel));
                    sum["rand_snap"].push_back({{"k", m.k}, {"kprime", kp}, {"realization", rz},
                                                {"seed", seed}, {"e_proj", r.e_proj}, {"scale", r.scale},
                                                {"rel_e_proj", rel}, {"warnings", r.basis.warnings}});
                }
            }
            emit(tag, {"k", "kprime", "realization", "seed", "e_proj", "scale", "rel_e_proj"}, rows);
            std::vector<std::string> med;
            for (const auto& [kp, v] : rel_by_k) {
                med.push_back(std::to_string(m.k) + "," + std::to_string(kp) + "," + format_number(median(v)));
                sum["rand_snap_medians"].push_back({{"k", m.k}, {"kprime", kp}, {"median_rel_e_proj", median(v)}});
            }
            emit(tag + "_median", {"k", "kprime", "median_rel_e_proj"}, med);
        }
    }

    const auto path = cfg.out_dir / (cfg.name + "_summary.json");
    write_text(path, sum.dump(2) + "\n");
    report.files.push_back(path);
    return report;
}

/// Maps exceptions to exit codes: 2 for invalid input, 3 for numerical failure.
template <class Fn>
ExitCode guarded(Fn&& fn, std::ostream& err) {
    try {
        fn();
        return ExitCode::Ok;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::Validation;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::Validation;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::Validation;
    } catch (const SingularSystemError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return ExitCode::Numerical;
    } catch (const IndefiniteError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return ExitCode::Numerical;
    } catch (const IntegrationError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return ExitCode::Numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::Failure;
    }
}

/// Flag overrides for the canned experiments; unset fields keep the defaults.
struct Overrides {
    std::vector<int> pcedim;
    std::vector<std::size_t> kprime;
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> samples;
    std::optional<int> grid;
    std::optional<std::string> out;
    std::optional<std::size_t> k;
    std::optional<int> train_pce;
    std::vector<int> eval_pce;
    std::optional<std::size_t> realizations;
    std::optional<unsigned> threads;
    bool no_timing = false;
};

inline const std::vector<std::string>& canned_names() {
    static const std::vector<std::string> names{"verify-1d", "verify-2d", "mc-compare", "convdiff-pod",
                                                "rand-snap-pod"};
    return names;
}

/// Canned experiments as JSON configurations, with flags applied.
inline std::vector<json> canned_configs(const std::string& name, const Overrides& o) {
    auto base = [&](const std::string& n, json model) {
        json c = {{"name", n}, {"model", std::move(model)}, {"methods", json::array()},
                  {"output", {{"dir", o.out.value_or("results")}, {"timing", !o.no_timing}}}};
        if (o.threads) c["threads"] = *o.threads;
        return c;
    };
    auto pcedims = o.pcedim.empty() ? std::vector<int>{3, 4, 5, 6} : o.pcedim;
    json convdiff = {{"type", "convdiff"}, {"grid", o.grid.value_or(32)}};
    std::vector<json> out;
    if (name == "verify-1d") {
        json c = base("verify-1d", {{"type", "toy1d"}, {"lo", 3e-4}, {"hi", 7e-4}});
        c["methods"].push_back({{"type", "pce"}, {"pcedim", pcedims}});
        out.push_back(c);
    } else if (name == "verify-2d") {
        json c = base("verify-2d", {{"type", "toy2d"}, {"lo1", 3e-4}, {"hi1", 7e-4},
                                    {"lo2", 3e-4}, {"hi2", 7e-4}, {"eps", 1e-4}});
        c["methods"].push_back({{"type", "pce"}, {"pcedim", pcedims}});
        out.push_back(c);
    } else if (name == "mc-compare") {
        const auto samples = o.samples.empty() ? std::vector<std::size_t>{10000, 100000, 1000000} : o.samples;
        json c1 = base("mc-compare-toy1d", {{"type", "toy1d"}, {"lo", 3e-4}, {"hi", 7e-4}});
        c1["methods"].push_back({{"type", "mc"}, {"samples", samples},
                                 {"realizations", o.realizations.value_or(15)}, {"seed", o.seed.value_or(1)}});
        json c2 = base("mc-compare-toy2d", {{"type", "toy2d"}, {"lo1", 3e-4}, {"hi1", 7e-4},
                                            {"lo2", 3e-4}, {"hi2", 7e-4}, {"eps", 1e-4}});
        c2["methods"].push_back({{"type", "mc"}, {"samples", samples},
                                 {"realizations", o.realizations.value_or(11)}, {"seed", o.seed.value_or(1)}});
        out = {c1, c2};
    } else if (name == "convdiff-pod") {
        json c = base("convdiff-pod", convdiff);
        const auto kp = o.kprime.empty() ? std::vector<std::size_t>{3, 6, 9, 12, 15, 16} : o.kprime;
        const auto eval = o.eval_pce.empty() ? std::vector<int>{4} : o.eval_pce;
        c["methods"].push_back(
            {{"type", "pce-pod"}, {"train_pce", o.train_pce.value_or(2)}, {"eval_pce", eval}, {"kprime", kp}});
        c["reference_pce"] = *std::max_element(eval.begin(), eval.end());
        out.push_back(c);
    } else if (name == "rand-snap-pod") {
        json c = base("rand-snap-pod", convdiff);
        const auto kp = o.kprime.empty() ? std::vector<std::size_t>{3, 6, 9, 12, 15, 16} : o.kprime;
        c["methods"].push_back({{"type", "rand-snap"}, {"k", o.k.value_or(16)}, {"kprime", kp},
                                {"realizations", o.realizations.value_or(5)}, {"seed", o.seed.value_or(1)}});
        out.push_back(c);
    } else {
        throw ValidationError("unknown experiment '" + name + "'");
    }
    return out;
}

}  // namespace genpod
