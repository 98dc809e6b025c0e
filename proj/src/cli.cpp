#include "rmcov/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmcov/io.hpp"
#include "rmcov/simulate.hpp"

namespace rmcov::cli {

namespace {

using nlohmann::ordered_json;

// A single fit is cheap, so the CLI certifies it rather than stopping at the
// residual rule alone.
constexpr double kCliKktTol = 1e-6;

// Round-trip doubles: nlohmann already prints shortest round-trip text, but
// non-finite values are not representable in JSON.
ordered_json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

ordered_json num_array(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory '" + dir + "': " + ec.message());
    return std::filesystem::path(dir);
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << contents;
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

int report(const std::exception& e, std::ostream& log) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        log << "error: " << err->what() << '\n';
        return exit_code_for(err->code());
    }
    log << "error: " << e.what() << '\n';
    return kExitInput;
}

} // namespace

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MaxItersExceeded:
    case ErrorCode::EigenFailure: return kExitSolver;
    case ErrorCode::ConfigError: return kExitConfig;
    default: return kExitInput;
    }
}

int cmd_estimate(const EstimateArgs& args, std::ostream& log) {
    try {
        const RepeatedData data = ingest(args.input, args.format);
        const SymMatrix sample = sample_estimate(data, args.estimator);

        AdmmSettings settings;
        settings.delta = args.delta;
        settings.kkt_tol = kCliKktTol;
        settings.validate();

        ordered_json manifest;
        manifest["input"] = args.input;
        manifest["format"] = args.format;
        manifest["estimator"] = std::string(to_string(args.estimator.sample));
        manifest["mode"] = std::string(to_string(args.estimator.scale));
        manifest["seed"] = args.seed;

        std::optional<CvResult> cv;
        double lambda = 0.0;
        if (args.lambda) {
            lambda = *args.lambda;
            if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
                throw Error(ErrorCode::InvalidArgument, "--lambda must be a finite value >= 0");
            }
        } else {
            CvConfig config;
            config.k_folds = args.k_folds;
            config.lambda_grid = lambda_grid(sample, args.grid_length);
            config.seed = args.seed;
            config.estimator = args.estimator;
            cv = kfold_cv(data, config, settings);
            lambda = args.one_se ? cv->lambda_one_se() : cv->lambda_min();
        }
        settings.lambda = lambda;
        const AdmmResult fit = solve(sample, settings);

        const auto out_dir = prepare_out_dir(args.out_dir);
        std::ostringstream matrix_csv;
        write_matrix_csv(fit.solution, data.variable_names(), matrix_csv);
        std::ostringstream edges_csv;
        write_edge_list(fit.solution, data.variable_names(), edges_csv);

        const DesignSummary design = data.num_subjects() >= 2 ? design_summary(data) : DesignSummary{};
        manifest["design"] = {{"m", design.m},
                              {"N", design.N},
                              {"n_star", num(design.n_star)},
                              {"n_zero", num(design.n_zero)},
                              {"imbalance", num(design.imbalance)}};
        manifest["variables"] = data.variable_names();
        manifest["settings"] = {{"lambda", num(lambda)},
                                {"delta", num(fit.delta)},
                                {"delta_source", args.delta ? "user" : "default"},
                                {"rho0", num(settings.rho0)},
                                {"eps_abs", num(settings.eps_abs)},
                                {"eps_rel", num(settings.eps_rel)},
                                {"max_iters", settings.max_iters},
                                {"kkt_tol", num(*settings.kkt_tol)}};
        if (cv) {
            manifest["cv"] = {{"k_folds", args.k_folds},
                              {"rule", args.one_se ? "one_se" : "min"},
                              {"grid", num_array(cv->lambdas)},
                              {"mean_error", num_array(cv->mean_error)},
                              {"standard_error", num_array(cv->standard_error)},
                              {"selected_min", cv->selected_min},
                              {"selected_one_se", cv->selected_one_se}};
        } else {
            manifest["cv"] = nullptr;
        }
        manifest["selected_lambda"] = num(lambda);
        manifest["result"] = {{"iterations", fit.iterations},
                              {"primal_residual", num(fit.primal_residual)},
                              {"dual_residual", num(fit.dual_residual)},
                              {"used_fast_path", fit.used_fast_path},
                              {"min_eigenvalue", num(fit.min_eigenvalue)},
                              {"rho", num(fit.rho)},
                              {"kkt_residual", num(kkt_residual(sample, fit.solution, lambda, fit.delta))}};

        write_file(out_dir / "solution.csv", matrix_csv.str());
        write_file(out_dir / "edges.csv", edges_csv.str());
        write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
        log << "lambda=" << format_double(lambda) << " iterations=" << fit.iterations
            << " fast_path=" << (fit.used_fast_path ? "yes" : "no") << '\n';
        return kExitOk;
    } catch (const NonpositiveDiagonalError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        return report(e, log);
    }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::ostream& log) {
    try {
        const StudyPlan plan = load_study_plan(config_path);
        std::vector<StudyReport> reports;
        for (const auto& setting : plan.settings) {
            log << "running " << setting.label << " (" << setting.replicates << " replicates)\n";
            reports.push_back(run_study(setting, plan.estimators, plan.options, plan.solver));
            for (const auto& f : reports.back().failures) log << "  failed " << f << '\n';
        }
        const auto dir = prepare_out_dir(out_dir);
        auto emit = [&](const char* name, void (*writer)(const std::vector<StudyReport>&, std::ostream&)) {
            std::ostringstream buf;
            writer(reports, buf);
            write_file(dir / name, buf.str());
        };
        emit("summary.csv", write_summary_csv);
        emit("error_vs_imbalance.csv", write_imbalance_csv);
        emit("error_vs_snr.csv", write_snr_csv);
        emit("table1.csv", write_comparison_csv);
        emit("cv_curves.csv", write_cv_curves_csv);
        emit("roc.csv", write_roc_csv);
        return kExitOk;
    } catch (const std::exception& e) {
        return report(e, log);
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse positive-definite within- and between-subject covariance estimation"};
    app.require_subcommand(1);

    EstimateArgs est;
    std::string estimator = "within";
    std::string mode = "cov";
    std::string lambda_text = "cv";
    double delta = 0.0;
    auto* estimate = app.add_subcommand("estimate", "Estimate a regularized covariance or correlation matrix");
    estimate->add_option("--input,-i", est.input, "Long-format CSV (subject_id,v1,...,vp)")->required();
    estimate->add_option("--format", est.format, "Input format")->capture_default_str();
    estimate->add_option("--estimator", estimator, "within, between, anova or aggregated")
        ->check(CLI::IsMember({"within", "between", "anova", "aggregated"}))
        ->capture_default_str();
    estimate->add_option("--mode", mode, "cov or cor")->check(CLI::IsMember({"cov", "cor"}))->capture_default_str();
    estimate->add_option("--lambda", lambda_text, "Penalty level, or 'cv' to cross-validate")->capture_default_str();
    auto* delta_opt = estimate->add_option("--delta", delta, "Eigenvalue floor (default 1e-4 * max(max diag, 1))");
    estimate->add_option("--kfolds", est.k_folds, "Cross-validation folds")->capture_default_str();
    estimate->add_flag("--one-se", est.one_se, "Select lambda by the one-standard-error rule");
    estimate->add_option("--grid-length", est.grid_length, "Lambda grid size for cross-validation")
        ->capture_default_str();
    estimate->add_option("--seed", est.seed, "Fold assignment seed")->capture_default_str();
    estimate->add_option("--out,-o", est.out_dir, "Output directory")->required();

    std::string config_path;
    std::string sim_out;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation study from a JSON plan");
    simulate->add_option("config", config_path, "Study plan (JSON)")->required();
    simulate->add_option("--out,-o", sim_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    if (*estimate) {
        try {
            est.estimator.sample = parse_sample_kind(estimator);
            est.estimator.scale = parse_scale(mode);
            if (lambda_text != "cv") {
                double v = 0.0;
                std::size_t used = 0;
                try {
                    v = std::stod(lambda_text, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != lambda_text.size() || lambda_text.empty()) {
                    throw Error(ErrorCode::InvalidArgument, "--lambda expects a number or 'cv'");
                }
                est.lambda = v;
            }
            if (delta_opt->count() > 0) est.delta = delta;
        } catch (const std::exception& e) {
            return report(e, err);
        }
        return cmd_estimate(est, err);
    }
    return cmd_simulate(config_path, sim_out, err);
}

} // namespace rmcov::cli
