#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rmcov/simulate.hpp"
#include "rmcov/tuning.hpp"

using namespace rmcov;
using Eigen::MatrixXd;

namespace {

// Recomputes K-fold CV from scratch: naive sample estimators on each split
// (subjects visited in reverse order), one cold solve per (lambda, fold),
// then both selection rules written out longhand.
struct BruteCv {
    std::vector<double> mean;
    std::size_t best = 0;
    std::size_t one_se = 0;
};

oracle::Mat naive_estimate(const RepeatedData& d, SampleKind kind) {
    switch (kind) {
    case SampleKind::Within: return oracle::naive_within(d);
    case SampleKind::Between: return oracle::naive_between(d);
    case SampleKind::Anova: return oracle::naive_anova(d);
    case SampleKind::Aggregated: return oracle::naive_aggregated(d);
    }
    return {};
}

BruteCv brute_cv(const RepeatedData& data, SampleKind kind, const std::vector<double>& grid, std::size_t K,
                 std::uint64_t seed) {
    const auto folds = fold_partition(data.num_subjects(), K, seed);
    std::vector<std::vector<double>> err(grid.size());
    for (std::size_t f = 0; f < K; ++f) {
        std::vector<std::size_t> train, valid(folds[f].rbegin(), folds[f].rend());
        for (std::size_t i = data.num_subjects(); i-- > 0;) {
            if (std::find(folds[f].begin(), folds[f].end(), i) == folds[f].end()) train.push_back(i);
        }
        const SymMatrix tr(oracle::to_eigen(naive_estimate(data.subset(train), kind)));
        const oracle::Mat va = naive_estimate(data.subset(valid), kind);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            AdmmSettings s;
            s.lambda = grid[l];
            const MatrixXd fit = solve(tr, s).solution.matrix();
            double e = 0.0;
            for (std::size_t i = 0; i < va.size(); ++i)
                for (std::size_t j = 0; j < va.size(); ++j) e += (fit(i, j) - va[i][j]) * (fit(i, j) - va[i][j]);
            err[l].push_back(e);
        }
    }
    BruteCv out;
    std::vector<double> se;
    for (const auto& e : err) {
        double m = 0.0;
        for (double x : e) m += x;
        m /= K;
        double ss = 0.0;
        for (double x : e) ss += (x - m) * (x - m);
        out.mean.push_back(m);
        se.push_back(std::sqrt(ss / (K - 1.0)) / std::sqrt(static_cast<double>(K)));
    }
    for (std::size_t l = 1; l < grid.size(); ++l)
        if (out.mean[l] < out.mean[out.best]) out.best = l;
    // grid is decreasing: the largest admissible lambda has the smallest index
    out.one_se = out.best;
    for (std::size_t l = grid.size(); l-- > 0;)
        if (grid[l] >= grid[out.best] && out.mean[l] <= out.mean[out.best] + se[out.best]) out.one_se = l;
    return out;
}

} // namespace

TEST_CASE("estimator names") {
    CHECK(parse_sample_kind("within") == SampleKind::Within);
    CHECK(parse_sample_kind("anova") == SampleKind::Anova);
    CHECK(parse_scale("cor") == Scale::Correlation);
    CHECK(to_string(SampleKind::Aggregated) == "aggregated");
    CHECK_THROWS_AS(parse_sample_kind("pooled"), Error);
    CHECK_THROWS_AS(parse_scale("corr"), Error);
}

TEST_CASE("CvConfig validation") {
    CvConfig c;
    c.lambda_grid = {1.0, 0.5};
    CHECK_NOTHROW(c.validate());
    c.k_folds = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c.k_folds = 5;
    c.lambda_grid = {};
    CHECK_THROWS_AS(c.validate(), Error);
    c.lambda_grid = {0.5, 0.5};
    CHECK_THROWS_AS(c.validate(), Error);
    c.lambda_grid = {0.5, -0.1};
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("fold_partition") {
    for (std::size_t m : {5u, 7u, 23u, 100u}) {
        for (std::size_t K : {2u, 3u, 5u}) {
            if (m < K) continue;
            const auto folds = fold_partition(m, K, 99);
            CHECK(folds == fold_partition(m, K, 99));
            std::vector<std::size_t> all;
            for (std::size_t f = 0; f < K; ++f) {
                const std::size_t expected = m / K + (f < m % K ? 1 : 0);
                CHECK(folds[f].size() == expected);
                CHECK(std::is_sorted(folds[f].begin(), folds[f].end()));
                all.insert(all.end(), folds[f].begin(), folds[f].end());
            }
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> iota(m);
            std::iota(iota.begin(), iota.end(), std::size_t{0});
            CHECK(all == iota);
        }
    }
    CHECK(fold_partition(40, 5, 1) != fold_partition(40, 5, 2));
    CHECK_THROWS_AS(fold_partition(3, 5, 0), Error);
}

TEST_CASE("summarize_cv applies both rules") {
    // fold errors chosen so that E = {5, 3, 2, 2.5}, SE at the minimum = 0.6
    const std::vector<double> grid{4.0, 2.0, 1.0, 0.5};
    std::vector<std::vector<double>> errs{{5.0, 5.0, 5.0}, {3.0, 2.0, 4.0}, {2.0, 2.0 - 0.6 * std::sqrt(3.0), 2.0 + 0.6 * std::sqrt(3.0)},
                                          {2.5, 2.5, 2.5}};
    const auto r = summarize_cv(grid, errs);
    CHECK(r.mean_error[2] == doctest::Approx(2.0));
    CHECK(r.standard_error[2] == doctest::Approx(0.6));
    CHECK(r.selected_min == 2);
    CHECK(r.selected_one_se == 2); // E_1 = 3 > 2.6
    errs[1] = {2.5, 2.5, 2.5};
    CHECK(summarize_cv(grid, errs).selected_one_se == 1);
    // ties at the minimum resolve to the larger lambda
    errs = {{1.0}, {1.0}, {2.0}, {3.0}};
    CHECK(summarize_cv(grid, errs).selected_min == 0);
}

TEST_CASE("kfold_cv: grid of length one") {
    const auto d = oracle::random_data(std::vector<std::size_t>(10, 3), 4, 21);
    CvConfig c;
    c.lambda_grid = {0.3};
    c.k_folds = 5;
    const auto r = kfold_cv(d, c, AdmmSettings{});
    CHECK(r.selected_min == 0);
    CHECK(r.selected_one_se == 0);
    CHECK(r.lambda_min() == 0.3);
}

TEST_CASE("kfold_cv matches a brute-force recomputation") {
    SUBCASE("K=2, duplicated subjects, 3-point grid") {
        const auto base = oracle::random_data({3, 2, 4, 3}, 4, 31);
        std::vector<SubjectBlock> twice = base.subjects();
        for (const auto& s : base.subjects()) twice.push_back({s.id + "_copy", s.observations});
        const RepeatedData d(std::move(twice));
        const std::vector<double> grid{0.8, 0.3, 0.05};
        for (SampleKind kind : {SampleKind::Within, SampleKind::Between, SampleKind::Anova, SampleKind::Aggregated}) {
            CvConfig c;
            c.k_folds = 2;
            c.lambda_grid = grid;
            c.seed = 5;
            c.estimator = {kind, Scale::Covariance};
            const auto got = kfold_cv(d, c, AdmmSettings{});
            const auto want = brute_cv(d, kind, grid, 2, 5);
            CAPTURE(to_string(kind));
            for (std::size_t l = 0; l < grid.size(); ++l)
                CHECK(got.mean_error[l] == doctest::Approx(want.mean[l]).epsilon(1e-8));
            CHECK(got.selected_min == want.best);
            CHECK(got.selected_one_se == want.one_se);
        }
    }
    SUBCASE("K=5, unbalanced random data") {
        std::vector<std::size_t> sizes;
        for (int i = 0; i < 17; ++i) sizes.push_back(1 + (i * 7) % 4);
        const auto d = oracle::random_data(sizes, 5, 32, 1.5);
        AdmmSettings s;
        const auto grid = lambda_grid(between_sample(d), 6);
        CvConfig c;
        c.k_folds = 5;
        c.lambda_grid = grid;
        c.seed = 77;
        c.estimator = {SampleKind::Between, Scale::Covariance};
        const auto got = kfold_cv(d, c, s);
        const auto want = brute_cv(d, SampleKind::Between, grid, 5, 77);
        for (std::size_t l = 0; l < grid.size(); ++l)
            CHECK(got.mean_error[l] == doctest::Approx(want.mean[l]).epsilon(1e-8));
        CHECK(got.selected_min == want.best);
        CHECK(got.selected_one_se == want.one_se);
    }
}

TEST_CASE("kfold_cv invariants") {
    // strong subject effects keep every training fold's between-subject diagonal positive
    const auto d = oracle::random_data(std::vector<std::size_t>(20, 3), 6, 41, 3.0);
    CvConfig c;
    c.lambda_grid = lambda_grid(between_sample(d), 8);
    c.seed = 3;
    for (SampleKind kind : {SampleKind::Within, SampleKind::Between, SampleKind::Anova, SampleKind::Aggregated}) {
        for (Scale scale : {Scale::Covariance, Scale::Correlation}) {
            c.estimator = {kind, scale};
            const auto a = kfold_cv(d, c, AdmmSettings{});
            const auto b = kfold_cv(d, c, AdmmSettings{});
            CHECK(a.mean_error == b.mean_error); // bit-identical
            CHECK(a.lambda_one_se() >= a.lambda_min());
            CHECK(a.fold_errors.size() == c.lambda_grid.size());
            CHECK(a.fold_errors[0].size() == c.k_folds);
        }
    }
}

TEST_CASE("kfold_cv infeasible splits") {
    CvConfig c;
    c.lambda_grid = {0.5, 0.1};
    SUBCASE("fewer subjects than folds") {
        const auto d = oracle::random_data({2, 2, 2}, 3, 1);
        try {
            kfold_cv(d, c, AdmmSettings{});
            FAIL("expected InfeasibleSplit");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InfeasibleSplit);
        }
    }
    SUBCASE("no replication in a training split") {
        const auto d = oracle::random_data(std::vector<std::size_t>(10, 1), 3, 2);
        c.estimator = {SampleKind::Within, Scale::Covariance};
        try {
            kfold_cv(d, c, AdmmSettings{});
            FAIL("expected InfeasibleSplit");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InfeasibleSplit);
        }
    }
}

TEST_CASE("lambda_grid") {
    const auto zero = lambda_grid(SymMatrix(4), 5);
    CHECK(zero.front() == std::numeric_limits<double>::epsilon());
    for (std::size_t l = 1; l < zero.size(); ++l) CHECK(zero[l] < zero[l - 1]);

    MatrixXd a = MatrixXd::Identity(3, 3);
    a(0, 2) = a(2, 0) = -1.0;
    a(0, 1) = a(1, 0) = 0.4;
    const auto g = lambda_grid(SymMatrix(a), 3);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(g[2] == doctest::Approx(0.01).epsilon(1e-15));
    CHECK_THROWS_AS(lambda_grid(SymMatrix(a), 1), Error);

    // at the top of the grid the solver returns a diagonal matrix
    std::mt19937_64 rng(3);
    const SymMatrix b(oracle::random_symmetric(7, rng));
    AdmmSettings s;
    s.lambda = lambda_grid(b, 10).front();
    const auto r = solve(b, s);
    for (Eigen::Index k = 0; k < 7; ++k)
        for (Eigen::Index l = 0; l < 7; ++l)
            if (k != l) CHECK(r.solution(k, l) == 0.0);
}

TEST_CASE("theoretical lambdas") {
    TheoryConstants unit;
    SUBCASE("lambda_eps") {
        const double v = theory_lambda_eps(20, 100, 10, unit);
        CHECK(v == doctest::Approx(std::sqrt(100.0 * std::log(10.0)) / 80.0).epsilon(1e-15));
        CHECK(v == doctest::Approx(0.18968).epsilon(1e-4));
        TheoryConstants twice = unit;
        twice.c1 = 2.0;
        CHECK(theory_lambda_eps(20, 100, 10, twice) == doctest::Approx(2.0 * v).epsilon(1e-15));
        double prev = v;
        for (std::size_t N : {200u, 400u, 1000u, 100000u}) {
            const double next = theory_lambda_eps(20, N, 10, unit);
            CHECK(next < prev);
            prev = next;
        }
    }
    SUBCASE("lambda_b balanced and fixed values") {
        const std::vector<std::size_t> sizes(100, 5);
        const auto d = design_summary(sizes);
        const double logp = std::log(100.0);
        const double expected = std::sqrt(logp / 100.0) + std::sqrt(500.0 * logp) / (400.0 * 5.0) + 1.0 / 100.0 +
                                1.0 / (100.0 * 5.0);
        CHECK(theory_lambda_b(d, 100, unit) == doctest::Approx(expected).epsilon(1e-13));
        CHECK(theory_lambda_b(d, 100, unit) == doctest::Approx(0.2505892322).epsilon(1e-9));
        // overall rate is m^{-1/2}: sqrt(m) * lambda_b settles as m grows
        auto scaled = [&](std::size_t m) {
            const std::vector<std::size_t> sz(m, 5);
            return std::sqrt(static_cast<double>(m)) * theory_lambda_b(design_summary(sz), 100, unit);
        };
        CHECK(scaled(100000) == doctest::Approx(scaled(1000000)).epsilon(0.01));
    }
    SUBCASE("n_i = (3, 4, 5), p = 10, unit constants") {
        const std::vector<std::size_t> sizes{3, 4, 5};
        const auto d = design_summary(sizes);
        const double logp = std::log(10.0), m = 3.0, N = 12.0;
        const double ns = 180.0 / 47.0, n0 = 47.0 / 12.0;
        CHECK(theory_lambda_0(d, 10, unit) == doctest::Approx(std::sqrt(logp / m) + 1.0 / m + 1.0 / ns).epsilon(1e-13));
        CHECK(theory_lambda_tilde_b(d, 10, unit) ==
              doctest::Approx(5.0 / n0 * std::sqrt(logp / m) + std::sqrt(N * logp) / (n0 * (N - m)) +
                              (2.0 * N - n0 * m) / (2.0 * n0 * m) + 1.0 / (n0 * m))
                  .epsilon(1e-13));
        CHECK(theory_lambda_1(d, 10, unit) ==
              doctest::Approx(std::sqrt(logp / m) + 1.0 + (2.0 - ns) / (2.0 * ns)).epsilon(1e-13));
        // frozen values from the arithmetic above
        CHECK(theory_lambda_0(d, 10, unit) == doctest::Approx(1.4705314061).epsilon(1e-9));
        CHECK(theory_lambda_tilde_b(d, 10, unit) == doctest::Approx(1.8739130509).epsilon(1e-9));
        CHECK(theory_lambda_1(d, 10, unit) == doctest::Approx(1.6371980727).epsilon(1e-9));
    }
    SUBCASE("lambda_0 keeps a bias floor as m grows") {
        double last = 0.0;
        for (std::size_t m : {100u, 1000u, 100000u}) {
            const std::vector<std::size_t> sizes(m, 4);
            last = theory_lambda_0(design_summary(sizes), 50, unit);
        }
        CHECK(last > 1.0 / 4.0);
        CHECK(last - 1.0 / 4.0 < 0.01);
    }
    SUBCASE("balanced designs: lambda_tilde_b differs from lambda_b only in the M_b term") {
        // The M_b term of lambda_tilde_b reduces to M_b / 2 under balance, where
        // lambda_b carries M_b / m; the other three terms coincide.
        for (std::size_t m : {2u, 5u, 40u}) {
            for (std::size_t n : {2u, 3u, 9u}) {
                const std::vector<std::size_t> sizes(m, n);
                const auto d = design_summary(sizes);
                TheoryConstants c{1.3, 0.7, 2.0, 0.9};
                const double gap = theory_lambda_tilde_b(d, 30, c) - theory_lambda_b(d, 30, c);
                CHECK(gap == doctest::Approx(c.m_b / 2.0 - c.m_b / static_cast<double>(m)).epsilon(1e-10));
                TheoryConstants no_mb = c;
                no_mb.m_b = 1e-300;
                CHECK(theory_lambda_tilde_b(d, 30, no_mb) == doctest::Approx(theory_lambda_b(d, 30, no_mb)).epsilon(1e-14));
            }
        }
    }
    SUBCASE("preconditions") {
        const std::vector<std::size_t> sizes{1, 1, 1};
        CHECK_THROWS_AS(theory_lambda_b(design_summary(sizes), 10, unit), Error);
        CHECK_THROWS_AS(theory_lambda_eps(10, 20, 1, unit), Error);
        TheoryConstants bad;
        bad.c2 = 0.0;
        CHECK_THROWS_AS(theory_lambda_eps(10, 20, 5, bad), Error);
    }
}

TEST_CASE("CV minimizer under imbalance: anova drifts to larger lambda, between stays put") {
    // Model 1, p=50, m=100, N=500. Balanced (n_i=5) vs. 80 subjects with 3
    // observations and 20 with 13 (imbalance about 2.6). CV curves are averaged
    // over a few replicates so that one unlucky draw cannot decide the outcome.
    const std::vector<double> grid = [] {
        std::vector<double> g;
        for (int l = 0; l < 16; ++l) g.push_back(1.5 * std::pow(10.0, -1.5 * l / 15.0));
        return g;
    }();
    std::vector<std::size_t> skewed(80, 3);
    skewed.insert(skewed.end(), 20, 13);
    CHECK(design_summary(skewed).imbalance == doctest::Approx(2.617).epsilon(1e-3));

    auto argmin_of_mean_curve = [&](const std::vector<std::size_t>& sizes, SampleKind kind) {
        StudyConfig c;
        c.model = ModelId::M1;
        c.p = 50;
        c.group_sizes = sizes;
        c.seed = 2718;
        const auto t = model_templates(c.model, c.p);
        const auto sb = build_template(t.between);
        const auto se = build_template(t.within);
        std::vector<double> curve(grid.size(), 0.0);
        for (std::size_t r = 0; r < 3; ++r) {
            const auto data = generate(c, sb, se, r);
            CvConfig cv;
            cv.lambda_grid = grid;
            cv.seed = 100 + r;
            cv.estimator = {kind, Scale::Covariance};
            AdmmSettings s;
            s.eps_abs = s.eps_rel = 1e-6;
            const auto res = kfold_cv(data, cv, s);
            for (std::size_t l = 0; l < grid.size(); ++l) curve[l] += res.mean_error[l];
        }
        return static_cast<std::size_t>(std::min_element(curve.begin(), curve.end()) - curve.begin());
    };
    const std::vector<std::size_t> balanced(100, 5);
    const auto anova_bal = argmin_of_mean_curve(balanced, SampleKind::Anova);
    const auto anova_skew = argmin_of_mean_curve(skewed, SampleKind::Anova);
    const auto between_bal = argmin_of_mean_curve(balanced, SampleKind::Between);
    const auto between_skew = argmin_of_mean_curve(skewed, SampleKind::Between);
    MESSAGE("anova argmin " << anova_bal << " -> " << anova_skew << ", between argmin " << between_bal << " -> "
                            << between_skew);
    CHECK(anova_skew < anova_bal); // smaller index = larger lambda
    CHECK(std::abs(static_cast<long>(between_skew) - static_cast<long>(between_bal)) <= 1);
}
