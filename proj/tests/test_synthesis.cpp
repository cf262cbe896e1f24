#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "satpriv/synthesis.hpp"

using namespace satpriv;

namespace {

// The scalar fixture used throughout: Sxx = Sxy = Syy = 4, Rs = 1.
PriorMoments scalar_prior(double r_sensor = 1.0) {
    PriorMoments pm;
    pm.sigma_xx = Mat::Constant(1, 1, 4.0);
    pm.sigma_xy = Mat::Constant(1, 1, 4.0);
    pm.sigma_yy = Mat::Constant(1, 1, 4.0);
    pm.r_sensor = Mat::Constant(1, 1, r_sensor);
    return pm;
}

SelectionMask scalar_mask() {
    SelectionMask m;
    m.rows = {{0, 0}};
    m.matrix = Mat::Identity(1, 1);
    return m;
}

TradeoffSpec utility_spec(double gamma) {
    TradeoffSpec s;
    s.utility.push_back({scalar_mask(), gamma});
    return s;
}

TradeoffSpec privacy_spec(double gamma) {
    TradeoffSpec s;
    s.privacy.push_back({scalar_mask(), gamma});
    return s;
}

// Random linear-measurement prior of given state dimension.
PriorMoments random_linear_prior(int n, std::mt19937_64& rng, Mat* c_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    Mat sigma = a * a.transpose() + 0.5 * Mat::Identity(n, n);
    Mat C = Mat::Identity(n, n);
    PriorMoments pm;
    pm.sigma_xx = sigma;
    pm.sigma_xy = sigma * C.transpose();
    pm.sigma_yy = C * sigma * C.transpose();
    pm.r_sensor = 0.5 * Mat::Identity(n, n);
    if (c_out) *c_out = C;
    return pm;
}

SelectionMask full_mask(int n) {
    SelectionMask m;
    m.matrix = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i) m.rows.push_back({0, i});
    return m;
}

}  // namespace

TEST_CASE("verify_traces on the scalar fixture") {
    auto pm = scalar_prior();
    auto traces = verify_traces(pm, Mat::Zero(1, 1), {scalar_mask()});
    CHECK(traces[0] == doctest::Approx(0.8).epsilon(1e-12));
    auto huge = verify_traces(pm, Mat::Constant(1, 1, 1e12), {scalar_mask()});
    CHECK(huge[0] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("verify_traces adds over disjoint selections") {
    std::mt19937_64 rng(3);
    Mat C;
    auto pm = random_linear_prior(4, rng, &C);
    SelectionMask lo, hi;
    lo.matrix = Mat::Zero(2, 4);
    lo.matrix(0, 0) = lo.matrix(1, 1) = 1.0;
    hi.matrix = Mat::Zero(2, 4);
    hi.matrix(0, 2) = hi.matrix(1, 3) = 1.0;
    Mat r = 0.3 * Mat::Identity(4, 4);
    auto traces = verify_traces(pm, r, {lo, hi, full_mask(4)});
    CHECK(traces[0] + traces[1] == doctest::Approx(traces[2]).epsilon(1e-12));
}

TEST_CASE("max_noise_for_utility matches the scalar closed form") {
    auto res = max_noise_for_utility(scalar_prior(), utility_spec(1.0));
    REQUIRE(res.ok());
    REQUIRE(res.r_data.has_value());
    CHECK((*res.r_data)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    CHECK((*res.s_data)(0, 0) == doctest::Approx(3.0).epsilon(1e-5));
    CHECK(res.achieved_utility[0] <= 1.0 + 1e-6);
    CHECK(res.achieved_utility[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("slack utility bounds turn the sensors off") {
    auto res = max_noise_for_utility(scalar_prior(), utility_spec(5.0));
    REQUIRE(res.ok());
    CHECK((*res.s_data)(0, 0) < 1e-6);
    CHECK(res.excluded_axes.size() == 1);
    CHECK(res.achieved_utility[0] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("utility below the zero-noise floor is infeasible") {
    auto res = max_noise_for_utility(scalar_prior(), utility_spec(0.5));
    CHECK(res.status == SolveStatus::infeasible);
    CHECK(res.message.find("0.8") != std::string::npos);
}

TEST_CASE("square-root formulation agrees on the scalar fixture") {
    Mat C = Mat::Identity(1, 1);
    auto res = max_noise_for_utility_sqrt(scalar_prior(), C, utility_spec(1.0));
    REQUIRE(res.ok());
    CHECK((*res.r_data)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
    REQUIRE(res.gain.has_value());
    CHECK((*res.gain)(0, 0) == doctest::Approx(0.75).epsilon(1e-3));
}

TEST_CASE("square-root formulation with slack bounds needs no gain") {
    Mat C = Mat::Identity(1, 1);
    auto res = max_noise_for_utility_sqrt(scalar_prior(), C, utility_spec(5.0));
    REQUIRE(res.ok());
    CHECK((*res.s_data)(0, 0) < 1e-6);
    CHECK(std::abs((*res.gain)(0, 0)) < 1e-3);
}

TEST_CASE("theorem-1 and theorem-2 objectives agree on random instances") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 3; ++trial) {
        Mat C;
        auto pm = random_linear_prior(2, rng, &C);
        TradeoffSpec spec;
        spec.utility.push_back({full_mask(2), 0.0});
        double floor = verify_traces(pm, Mat::Zero(2, 2), {spec.utility[0].mask})[0];
        double prior = pm.sigma_xx.trace();
        spec.utility[0].gamma = 0.5 * (floor + prior);  // strictly between
        auto r1 = max_noise_for_utility(pm, spec);
        auto r2 = max_noise_for_utility_sqrt(pm, C, spec);
        REQUIRE(r1.ok());
        REQUIRE(r2.ok());
        double o1 = r1.s_data->trace();
        double o2 = r2.s_data->trace();
        CHECK(std::abs(o1 - o2) / std::max(1e-12, std::abs(o1)) < 1e-4);
    }
}

TEST_CASE("min_precision_for_utility matches the scalar closed form") {
    auto pm = scalar_prior(0.0);
    Mat C = Mat::Identity(1, 1);
    auto res = min_precision_for_utility(pm, C, utility_spec(1.0));
    REQUIRE(res.ok());
    CHECK((*res.precisions)(0) == doctest::Approx(0.75).epsilon(1e-5));
    CHECK(res.achieved_utility[0] <= 1.0 + 1e-6);
}

TEST_CASE("slack utility turns all precisions off") {
    auto pm = scalar_prior(0.0);
    Mat C = Mat::Identity(1, 1);
    auto res = min_precision_for_utility(pm, C, utility_spec(5.0));
    REQUIRE(res.ok());
    CHECK((*res.precisions)(0) < 1e-6);
    CHECK(res.excluded_axes.size() == 1);
}

TEST_CASE("min_noise_for_privacy matches the scalar closed form") {
    auto res = min_noise_for_privacy(scalar_prior(), privacy_spec(2.0));
    REQUIRE(res.ok());
    CHECK((*res.r_data)(0, 0) == doctest::Approx(3.0).epsilon(1e-5));
    CHECK(res.achieved_privacy[0] >= 2.0 - 1e-6);
}

TEST_CASE("privacy already satisfied needs no noise") {
    auto res = min_noise_for_privacy(scalar_prior(), privacy_spec(0.5));
    REQUIRE(res.ok());
    CHECK((*res.r_data)(0, 0) < 1e-5);
}

TEST_CASE("privacy above the prior ceiling is infeasible") {
    auto res = min_noise_for_privacy(scalar_prior(), privacy_spec(4.1));
    CHECK(res.status == SolveStatus::infeasible);
    CHECK(res.message.find("ceiling") != std::string::npos);
}

TEST_CASE("utility-aware privacy drives the scalar fixture to the utility bound") {
    TradeoffSpec spec = utility_spec(1.0);
    spec.privacy.push_back({scalar_mask(), 0.0});
    Mat C = Mat::Identity(1, 1);
    auto res = utility_aware_privacy(scalar_prior(), C, spec);
    REQUIRE(res.ok());
    CHECK(res.achieved_privacy[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(res.achieved_utility[0] <= 1.0 + 1e-6);
    CHECK((*res.r_data)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
    CHECK(!res.iterations.empty());
    CHECK(res.iterations.back().delta <= 1e-3);
}

TEST_CASE("utility-aware privacy with no utility reaches the prior ceiling") {
    std::mt19937_64 rng(4);
    Mat C;
    auto pm = random_linear_prior(2, rng, &C);
    TradeoffSpec spec;
    spec.privacy.push_back({full_mask(2), 0.0});
    SynthesisOptions opts;
    auto res = utility_aware_privacy(pm, C, spec, opts);
    REQUIRE(res.status == SolveStatus::optimal);
    double ceiling = pm.sigma_xx.trace();
    CHECK(res.achieved_privacy[0] >= 0.99 * ceiling);
}

TEST_CASE("privacy-aware utility on the scalar fixture") {
    TradeoffSpec spec = utility_spec(1.0);  // mask reused; gamma ignored for utility side
    spec.utility[0].gamma = 0.0;            // utility bound is the objective
    spec.privacy.push_back({scalar_mask(), 2.0});
    Mat C = Mat::Identity(1, 1);
    auto res = privacy_aware_utility(scalar_prior(), C, spec);
    REQUIRE(res.ok());
    CHECK(res.achieved_privacy[0] >= 2.0 - 1e-6);
    CHECK(res.achieved_utility[0] == doctest::Approx(2.0).epsilon(1e-2));
    CHECK((*res.r_data)(0, 0) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("privacy-aware utility with gamma_p ~ 0 recovers the zero-noise floor") {
    TradeoffSpec spec = utility_spec(0.0);
    spec.privacy.push_back({scalar_mask(), 1e-6});
    Mat C = Mat::Identity(1, 1);
    auto res = privacy_aware_utility(scalar_prior(), C, spec);
    REQUIRE(res.ok());
    CHECK(res.achieved_utility[0] == doctest::Approx(0.8).epsilon(1e-2));
}

TEST_CASE("tightening the utility bound never increases the optimal noise") {
    double prev = -1.0;
    for (double gamma : {0.9, 1.0, 1.5, 2.0, 3.0, 3.9}) {
        auto res = max_noise_for_utility(scalar_prior(), utility_spec(gamma));
        REQUIRE(res.ok());
        double r = res.excluded_axes.empty() ? (*res.r_data)(0, 0) : 1e18;
        CHECK(r >= prev - 1e-6);
        prev = r;
    }
}

TEST_CASE("loosening the privacy bound never increases the optimal noise") {
    double prev = 1e18;
    for (double gamma : {3.5, 3.0, 2.0, 1.0, 0.9}) {
        auto res = min_noise_for_privacy(scalar_prior(), privacy_spec(gamma));
        REQUIRE(res.ok());
        double r = (*res.r_data)(0, 0);
        CHECK(r <= prev + 1e-6);
        prev = r;
    }
}

TEST_CASE("certification holds on a random privacy/utility pair") {
    std::mt19937_64 rng(100);
    Mat C;
    auto pm = random_linear_prior(2, rng, &C);
    SelectionMask m0;
    m0.matrix = Mat::Zero(1, 2);
    m0.matrix(0, 0) = 1.0;
    SelectionMask m1;
    m1.matrix = Mat::Zero(1, 2);
    m1.matrix(0, 1) = 1.0;

    double floor0 = verify_traces(pm, Mat::Zero(2, 2), {m0})[0];
    double prior1 = (m1.matrix * pm.sigma_xx * m1.matrix.transpose()).trace();

    TradeoffSpec spec;
    spec.utility.push_back({m0, floor0 * 2.0});
    spec.privacy.push_back({m1, prior1 * 0.5});
    Mat Cid = Mat::Identity(2, 2);
    auto res = privacy_aware_utility(pm, Cid, spec);
    REQUIRE(res.ok());
    CHECK(res.achieved_privacy[0] >= spec.privacy[0].gamma - 1e-6);

    auto ua = utility_aware_privacy(pm, Cid, spec);
    REQUIRE(ua.status == SolveStatus::optimal);
    CHECK(ua.achieved_utility[0] <= spec.utility[0].gamma + 1e-6);
}

TEST_CASE("symmetric noise structure is available for theorem 1 and 3") {
    SynthesisOptions opts;
    opts.structure = NoiseStructure::symmetric;
    auto res = max_noise_for_utility(scalar_prior(), utility_spec(1.0), opts);
    REQUIRE(res.ok());
    CHECK((*res.r_data)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-4));

    auto res3 = min_noise_for_privacy(scalar_prior(), privacy_spec(2.0), opts);
    REQUIRE(res3.ok());
    CHECK((*res3.r_data)(0, 0) == doctest::Approx(3.0).epsilon(1e-4));
}
