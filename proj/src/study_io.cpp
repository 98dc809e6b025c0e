// Study plan parsing and report CSV writers.
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rmcov/io.hpp"
#include "rmcov/simulate.hpp"

namespace rmcov {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::ConfigError, path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) config_error(path.empty() ? key : path + "." + key, "unknown field");
    }
}

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::uint64_t get_count(const json& v, const std::string& path, std::uint64_t min_value) {
    if (!v.is_number_integer()) config_error(path, "expected an integer");
    if (v.is_number_unsigned()) {
        const auto u = v.get<std::uint64_t>();
        if (u < min_value) config_error(path, "must be >= " + std::to_string(min_value));
        return u;
    }
    const auto i = v.get<std::int64_t>();
    if (i < static_cast<std::int64_t>(min_value)) config_error(path, "must be >= " + std::to_string(min_value));
    return static_cast<std::uint64_t>(i);
}

double get_real(const json& v, const std::string& path) {
    if (!v.is_number()) config_error(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) config_error(path, "must be finite");
    return d;
}

double get_positive(const json& v, const std::string& path) {
    const double d = get_real(v, path);
    if (!(d > 0.0)) config_error(path, "must be > 0");
    return d;
}

bool get_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) config_error(path, "expected true or false");
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& path) {
    if (!v.is_string()) config_error(path, "expected a string");
    return v.get<std::string>();
}

// A scalar or a nonempty array of scalars.
template <class F>
auto get_list(const json& v, const std::string& path, F each) {
    using T = decltype(each(v, path));
    std::vector<T> out;
    if (v.is_array()) {
        if (v.empty()) config_error(path, "list is empty");
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(each(v[i], path + "[" + std::to_string(i) + "]"));
    } else {
        out.push_back(each(v, path));
    }
    return out;
}

EstimatorKind parse_estimator(const json& v, const std::string& path) {
    // "between" or "between:cor"
    const std::string s = get_string(v, path);
    const auto colon = s.find(':');
    EstimatorKind kind;
    try {
        kind.sample = parse_sample_kind(s.substr(0, colon));
        if (colon != std::string::npos) kind.scale = parse_scale(s.substr(colon + 1));
    } catch (const Error& e) {
        config_error(path, e.what());
    }
    return kind;
}

struct Design {
    std::string label;
    std::vector<std::size_t> sizes;
};

std::vector<Design> parse_design(const json& d, const std::string& path) {
    if (!d.is_object()) config_error(path, "expected an object");
    check_keys(d, path, {"group_sizes", "m", "n", "a", "N"});
    std::vector<Design> out;
    if (d.contains("group_sizes")) {
        if (d.size() != 1) config_error(path, "group_sizes cannot be combined with m, n, a or N");
        const std::string gp = join(path, "group_sizes");
        const auto& g = d["group_sizes"];
        if (!g.is_array()) config_error(gp, "expected an array");
        Design one{"explicit", {}};
        for (std::size_t i = 0; i < g.size(); ++i) {
            one.sizes.push_back(get_count(g[i], gp + "[" + std::to_string(i) + "]", 1));
        }
        if (one.sizes.size() < 2) config_error(gp, "need at least 2 subjects");
        out.push_back(std::move(one));
        return out;
    }
    if (!d.contains("m")) config_error(join(path, "m"), "required");
    const std::size_t m = get_count(d["m"], join(path, "m"), 2);
    if (d.contains("n")) {
        if (d.contains("a") || d.contains("N")) config_error(path, "use either n (balanced) or a and N (imbalance)");
        for (auto n : get_list(d["n"], join(path, "n"), [](const json& v, const std::string& p) {
                 return static_cast<std::size_t>(get_count(v, p, 1));
             })) {
            out.push_back({"m=" + std::to_string(m) + " n=" + std::to_string(n), StudyConfig::balanced_design(m, n)});
        }
        return out;
    }
    if (!d.contains("a")) config_error(join(path, "a"), "required unless n or group_sizes is given");
    if (!d.contains("N")) config_error(join(path, "N"), "required with a");
    const std::size_t N = get_count(d["N"], join(path, "N"), 2);
    const auto as = get_list(d["a"], join(path, "a"), [](const json& v, const std::string& p) {
        return static_cast<std::size_t>(get_count(v, p, 1));
    });
    for (std::size_t i = 0; i < as.size(); ++i) {
        if (N < (m - 1) * as[i] + 1) {
            config_error(join(path, "a") + (d["a"].is_array() ? "[" + std::to_string(i) + "]" : ""),
                         "needs N > (m - 1) a");
        }
        out.push_back({"m=" + std::to_string(m) + " a=" + std::to_string(as[i]) + " N=" + std::to_string(N),
                       StudyConfig::imbalance_design(m, as[i], N)});
    }
    return out;
}

} // namespace

StudyPlan parse_study_plan(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) config_error("(root)", "expected an object");
    check_keys(root, "", {"name", "model", "p", "design", "snr_a", "replicates", "seed", "estimators", "cv", "roc",
                          "solver", "threads", "keep_cv_curves", "unconstrained"});

    StudyPlan plan;
    plan.name = root.contains("name") ? get_string(root["name"], "name") : "study";

    if (!root.contains("model")) config_error("model", "required");
    ModelId model;
    try {
        model = parse_model_id(get_string(root["model"], "model"));
    } catch (const Error& e) {
        config_error("model", e.what());
    }
    if (!root.contains("p")) config_error("p", "required");
    const auto p = static_cast<Eigen::Index>(get_count(root["p"], "p", 1));
    if (!root.contains("replicates")) config_error("replicates", "required");
    const std::size_t replicates = get_count(root["replicates"], "replicates", 1);
    const std::uint64_t seed = root.contains("seed") ? get_count(root["seed"], "seed", 0) : 0;
    const std::vector<double> snrs =
        root.contains("snr_a") ? get_list(root["snr_a"], "snr_a", get_positive) : std::vector<double>{1.0};
    if (!root.contains("design")) config_error("design", "required");
    const auto designs = parse_design(root["design"], "design");

    if (!root.contains("estimators")) config_error("estimators", "required");
    plan.estimators = get_list(root["estimators"], "estimators", parse_estimator);

    if (root.contains("cv")) {
        const auto& cv = root["cv"];
        if (!cv.is_object()) config_error("cv", "expected an object");
        check_keys(cv, "cv", {"k_folds", "grid_length", "one_se", "grid"});
        if (cv.contains("k_folds")) plan.options.k_folds = get_count(cv["k_folds"], "cv.k_folds", 2);
        if (cv.contains("grid_length")) plan.options.grid_length = get_count(cv["grid_length"], "cv.grid_length", 2);
        if (cv.contains("one_se")) plan.options.one_se = get_bool(cv["one_se"], "cv.one_se");
        if (cv.contains("grid")) {
            plan.options.fixed_grid = get_list(cv["grid"], "cv.grid", get_real);
            for (std::size_t i = 0; i < plan.options.fixed_grid.size(); ++i) {
                const double v = plan.options.fixed_grid[i];
                if (v < 0.0 || (i > 0 && !(v < plan.options.fixed_grid[i - 1]))) {
                    config_error("cv.grid[" + std::to_string(i) + "]", "grid must be >= 0 and strictly decreasing");
                }
            }
        }
    }
    if (root.contains("roc")) {
        const auto& roc = root["roc"];
        if (!roc.is_object()) config_error("roc", "expected an object");
        check_keys(roc, "roc", {"enabled", "grid_length"});
        plan.options.roc = roc.contains("enabled") ? get_bool(roc["enabled"], "roc.enabled") : true;
        if (roc.contains("grid_length")) {
            plan.options.roc_grid_length = get_count(roc["grid_length"], "roc.grid_length", 2);
        }
    }
    if (root.contains("solver")) {
        const auto& s = root["solver"];
        if (!s.is_object()) config_error("solver", "expected an object");
        check_keys(s, "solver", {"delta", "rho0", "eps_abs", "eps_rel", "max_iters", "relaxation", "kkt_tol"});
        if (s.contains("delta")) plan.solver.delta = get_positive(s["delta"], "solver.delta");
        if (s.contains("rho0")) plan.solver.rho0 = get_positive(s["rho0"], "solver.rho0");
        if (s.contains("eps_abs")) plan.solver.eps_abs = get_positive(s["eps_abs"], "solver.eps_abs");
        if (s.contains("eps_rel")) plan.solver.eps_rel = get_positive(s["eps_rel"], "solver.eps_rel");
        if (s.contains("kkt_tol")) plan.solver.kkt_tol = get_positive(s["kkt_tol"], "solver.kkt_tol");
        if (s.contains("max_iters")) plan.solver.max_iters = get_count(s["max_iters"], "solver.max_iters", 1);
        if (s.contains("relaxation")) {
            plan.solver.relaxation = get_positive(s["relaxation"], "solver.relaxation");
            if (!(plan.solver.relaxation < 2.0)) config_error("solver.relaxation", "must be < 2");
        }
    }
    if (root.contains("threads")) plan.options.threads = get_count(root["threads"], "threads", 0);
    if (root.contains("keep_cv_curves")) plan.options.keep_cv_curves = get_bool(root["keep_cv_curves"], "keep_cv_curves");
    if (root.contains("unconstrained")) plan.options.unconstrained = get_bool(root["unconstrained"], "unconstrained");

    for (const auto& d : designs) {
        for (double a : snrs) {
            StudyConfig c;
            c.model = model;
            c.p = p;
            c.group_sizes = d.sizes;
            c.snr_a = a;
            c.replicates = replicates;
            c.seed = seed;
            c.label = d.label + " snr_a=" + format_double(a);
            c.validate();
            plan.settings.push_back(std::move(c));
        }
    }
    return plan;
}

StudyPlan load_study_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_study_plan(buf.str());
}

namespace {

std::string kind_name(const EstimatorKind& k) {
    return std::string(to_string(k.sample)) + ":" + std::string(to_string(k.scale));
}

// Labels can contain spaces and '=' but never commas or quotes.
void setting_cells(const StudyReport& r, std::ostream& out) {
    out << r.config.label << ',' << to_string(r.config.model) << ',' << r.config.p << ',' << r.design.m << ','
        << r.design.N << ',' << format_double(r.design.imbalance) << ',' << format_double(r.config.snr_a) << ','
        << r.replicates_completed;
}

constexpr const char* kSettingHeader = "setting,model,p,m,N,imbalance,snr_a,replicates";

const std::vector<double>* find(const EstimatorOutcome& o, const char* name) {
    const auto it = o.samples.find(name);
    return it == o.samples.end() ? nullptr : &it->second;
}

} // namespace

void write_summary_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << kSettingHeader << ",estimator,target,metric,mean,se,count\n";
    for (const auto& r : reports) {
        for (const auto& o : r.outcomes) {
            for (const auto& [name, values] : o.samples) {
                const MetricSummary s = summarize(values);
                setting_cells(r, out);
                out << ',' << kind_name(o.kind) << ',' << to_string(o.target) << ',' << name << ','
                    << format_double(s.mean) << ',' << format_double(s.se) << ',' << s.count << '\n';
            }
        }
    }
}

void write_imbalance_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << kSettingHeader << ",estimator,target,f_error_mean,f_error_se,l2_error_mean,l2_error_se\n";
    for (const auto& r : reports) {
        for (const auto& o : r.outcomes) {
            const auto* f = find(o, metric::kFError);
            const auto* l2 = find(o, metric::kL2Error);
            if (!f || !l2) continue;
            const auto fs = summarize(*f);
            const auto ls = summarize(*l2);
            setting_cells(r, out);
            out << ',' << kind_name(o.kind) << ',' << to_string(o.target) << ',' << format_double(fs.mean) << ','
                << format_double(fs.se) << ',' << format_double(ls.mean) << ',' << format_double(ls.se) << '\n';
        }
    }
}

void write_snr_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << kSettingHeader << ",estimator,target,raw_f_error_mean,raw_f_error_se,f_error_mean,f_error_se\n";
    for (const auto& r : reports) {
        for (const auto& o : r.outcomes) {
            const auto* raw = find(o, metric::kRawFError);
            const auto* reg = find(o, metric::kFError);
            if (!raw || !reg) continue;
            const auto rs = summarize(*raw);
            const auto gs = summarize(*reg);
            setting_cells(r, out);
            out << ',' << kind_name(o.kind) << ',' << to_string(o.target) << ',' << format_double(rs.mean) << ','
                << format_double(rs.se) << ',' << format_double(gs.mean) << ',' << format_double(gs.se) << '\n';
        }
    }
}

void write_comparison_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << kSettingHeader << ",estimator,target,variant,f_error_mean,f_error_se,l2_error_mean,l2_error_se,pd_pct\n";
    struct Variant {
        const char* name;
        const char* f;
        const char* l2;
        const char* pd;
    };
    constexpr Variant variants[] = {
        {"constrained", metric::kFError, metric::kL2Error, metric::kPdPct},
        {"unconstrained", metric::kUncFError, metric::kUncL2Error, metric::kUncPdPct},
    };
    for (const auto& r : reports) {
        for (const auto& o : r.outcomes) {
            for (const auto& v : variants) {
                const auto* f = find(o, v.f);
                const auto* l2 = find(o, v.l2);
                const auto* pd = find(o, v.pd);
                if (!f || !l2 || !pd) continue;
                const auto fs = summarize(*f);
                const auto ls = summarize(*l2);
                setting_cells(r, out);
                out << ',' << kind_name(o.kind) << ',' << to_string(o.target) << ',' << v.name << ','
                    << format_double(fs.mean) << ',' << format_double(fs.se) << ',' << format_double(ls.mean) << ','
                    << format_double(ls.se) << ',' << format_double(summarize(*pd).mean) << '\n';
            }
        }
    }
}

void write_cv_curves_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << "setting,replicate,estimator,lambda_index,lambda,cv_error,cv_se,selected_min,selected_one_se\n";
    for (const auto& r : reports) {
        for (const auto& c : r.cv_curves) {
            for (std::size_t l = 0; l < c.cv.lambdas.size(); ++l) {
                out << r.config.label << ',' << c.replicate << ',' << kind_name(c.kind) << ',' << l << ','
                    << format_double(c.cv.lambdas[l]) << ',' << format_double(c.cv.mean_error[l]) << ','
                    << format_double(c.cv.standard_error[l]) << ',' << (l == c.cv.selected_min ? 1 : 0) << ','
                    << (l == c.cv.selected_one_se ? 1 : 0) << '\n';
            }
        }
    }
}

void write_roc_csv(const std::vector<StudyReport>& reports, std::ostream& out) {
    out << "setting,replicate,estimator,target,grid_length,lambda_index,lambda,tpr,fpr,selected\n";
    for (const auto& r : reports) {
        for (const auto& rec : r.roc) {
            const auto& c = rec.curve;
            for (std::size_t l = 0; l < c.lambdas.size(); ++l) {
                out << r.config.label << ',' << rec.replicate << ',' << kind_name(rec.kind) << ','
                    << to_string(rec.target) << ',' << c.lambdas.size() << ',' << l << ','
                    << format_double(c.lambdas[l]) << ',' << format_double(c.points[l].tpr) << ','
                    << format_double(c.points[l].fpr) << ',' << (c.marker && *c.marker == l ? 1 : 0) << '\n';
            }
        }
    }
}

} // namespace rmcov
