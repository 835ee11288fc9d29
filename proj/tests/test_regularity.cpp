#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>

#include "fracmix/regularity.hpp"
#include "fracmix/spectral_op.hpp"
#include "oracles.hpp"

using namespace fracmix;
using oracle::pi;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

Grid interval_grid(double a, double b, int n) {
    const auto dom = DomainSpec::interval(a, b);
    return classify_boundary_nodes(discretize(dom, n), make_partition(dom, {{Edge::Left, 0, 0}}));
}

std::vector<double> geometric_radii(double R, int count, double factor = 4.0) {
    std::vector<double> r;
    for (int i = 0; i < count; ++i) r.push_back(R * std::pow(factor, -i));
    return r;
}

}  // namespace

TEST_CASE("level_set_measure on simple profiles") {
    const Grid g = interval_grid(0, pi, 257);
    const double h = pi / 256;
    const auto one = level_set_measure(GridFunction::Ones(257), g, 0.5);
    CHECK(one.plus == doctest::Approx(pi));
    CHECK(one.minus == 0.0);
    CHECK(level_set_measure(GridFunction::Ones(257), g, 1.0).plus == 0.0);

    const GridFunction x = g.sample([](double x, double) { return x; });
    double prev = 1e300;
    for (double k : {0.3, 1.0, 2.0, 3.0}) {
        const auto st = level_set_measure(x, g, k);
        CHECK(std::abs(st.plus - (pi - k)) <= h);
        CHECK(std::abs(st.minus - k) <= h);
        CHECK(st.plus < prev);
        prev = st.plus;
    }
}

TEST_CASE("weighted_levelset: zero field and ball scaling") {
    const double s = 0.75;
    const auto dom = DomainSpec::interval(0, pi);
    const auto part = make_partition(dom, {{Edge::Left, 0, 0}});
    const Grid g = classify_boundary_nodes(discretize(dom, 1025), part);
    auto sys = std::make_shared<const WeightedSystem>(assemble_weighted(build_cylinder(g, 4.0, 256), part, s));
    CylinderField U;
    U.system = sys;
    U.values = Eigen::MatrixXd::Zero(1025, 257);

    const CylinderPoint Z{pi / 2, 0.0, 0.0};
    const auto below = weighted_levelset(U, -1.0, Z, 0.2);
    CHECK(below.plus == doctest::Approx(below.ball));
    CHECK(below.minus == 0.0);
    const auto at = weighted_levelset(U, 0.0, Z, 0.2);
    CHECK(at.plus == 0.0);
    CHECK(at.minus == 0.0);

    // |B_r|_{y^{1-2s}} ~ r^{N+2-2s} for a ball centred on the trace
    const double b1 = weighted_levelset(U, 0.0, Z, 0.2).ball;
    const double b2 = weighted_levelset(U, 0.0, Z, 0.4).ball;
    CHECK(b2 / b1 == doctest::Approx(std::pow(2.0, 1.0 + 2.0 - 2.0 * s)).epsilon(0.1));
}

TEST_CASE("verify_linfty_bound: zero load, scaling invariance, exponent check") {
    const double s = 0.75;
    const auto dom = DomainSpec::interval(0, pi);
    const auto part = make_partition(dom, {{Edge::Left, 0, 0}});
    const Grid g = classify_boundary_nodes(discretize(dom, 129), part);
    const auto basis = solve_eigen(assemble(g, part), 128);
    const GridFunction f = g.sample([](double x, double) { return 1.0 + std::sin(2 * x); });
    const GridFunction u = solve_spectral(f, basis, s);

    CHECK(verify_linfty_bound(GridFunction::Zero(129), GridFunction::Zero(129), g, s, 2.0) == 0.0);
    for (double p : {2.0, 4.0, std::numeric_limits<double>::infinity()}) {
        const double r = verify_linfty_bound(u, f, g, s, p);
        CHECK(r > 0.0);
        CHECK(std::isfinite(r));
        CHECK(std::abs(verify_linfty_bound(7.5 * u, 7.5 * f, g, s, p) - r) <= 1e-12 * r);
    }
    CHECK(code_of([&] { verify_linfty_bound(u, f, g, s, 0.5); }) == ErrorCode::ExponentViolation);

    const auto sq = DomainSpec::rectangle(1, 1);
    const Grid g2 = discretize(sq, 9);
    CHECK(code_of([&] { verify_linfty_bound(GridFunction::Ones(81), GridFunction::Ones(81), g2, s, 1.2); }) ==
          ErrorCode::ExponentViolation);
}

TEST_CASE("oscillation_profile and fit on closed-form profiles") {
    const Grid g = interval_grid(0, pi, 1025);
    const double h = pi / 1024;
    const auto radii = geometric_radii(256 * h, 5);

    const auto flat = oscillation_profile(GridFunction::Constant(1025, 2.0), g, {0.0, 0.0, 0.0}, radii);
    for (double w : flat.omega) CHECK(w == 0.0);
    const auto flat_fit = fit_holder_exponent(flat);
    CHECK(flat_fit.degenerate);

    const GridFunction root = g.sample([](double x, double) { return std::sqrt(x); });
    const auto pr = oscillation_profile(root, g, {0.0, 0.0, 0.0}, radii);
    for (std::size_t i = 0; i < radii.size(); ++i) CHECK(pr.omega[i] == doctest::Approx(std::sqrt(radii[i])));
    const auto fit = fit_holder_exponent(pr);
    CHECK_FALSE(fit.degenerate);
    CHECK(std::abs(fit.tau - 0.5) <= 1e-10);
    CHECK(fit.eta_bar == doctest::Approx(0.5));
    CHECK(fit.points == 5);

    const GridFunction lin = g.sample([](double x, double) { return 3.0 * x; });
    const auto pl = oscillation_profile(lin, g, {pi / 2, 0.0, 0.0}, geometric_radii(128 * h, 4));
    CHECK(fit_holder_exponent(pl).tau == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fit_holder_exponent on perturbed data and bad input") {
    OscillationProfile p;
    p.radii = geometric_radii(1.0, 6, 2.0);
    for (std::size_t i = 0; i < p.radii.size(); ++i)
        p.omega.push_back(std::pow(p.radii[i], 0.3) * (1.0 + 0.02 * std::sin(3.0 * i)));
    const auto fit = fit_holder_exponent(p);
    CHECK(fit.tau >= 0.28);
    CHECK(fit.tau <= 0.32);
    CHECK(fit.r_squared > 0.99);
    CHECK(fit.ratios.size() == 5);
    CHECK(fit.eta_bar < 1.0);

    OscillationProfile tail = p;
    tail.omega = {1.0, 0.5, 0.0, 0.0};
    tail.radii.resize(4);
    const auto two = fit_holder_exponent(tail);
    CHECK_FALSE(two.degenerate);
    CHECK(two.points == 2);
    CHECK(two.tau == doctest::Approx(1.0));
    tail.omega = {1.0, 0.0, 0.0, 0.0};
    CHECK(fit_holder_exponent(tail).degenerate);

    OscillationProfile short_one;
    short_one.radii = {1.0, 0.5, 0.25};
    short_one.omega = {1.0, 0.7, 0.5};
    CHECK(code_of([&] { fit_holder_exponent(short_one); }) == ErrorCode::ConfigError);
}

TEST_CASE("oscillation_profile errors") {
    const Grid g = interval_grid(0, 1, 9);
    const GridFunction u = GridFunction::LinSpaced(9, 0, 1);
    CHECK(code_of([&] { oscillation_profile(u, g, {1.0 / 16, 0, 0}, {0.5, 0.25, 1.0 / 32}); }) == ErrorCode::EmptyBall);
    CHECK(code_of([&] { oscillation_profile(u, g, {0.5, 0, 0}, {0.25, 0.5}); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { oscillation_profile(u, g, {0.5, 0, 0}, {0.25, -0.1}); }) == ErrorCode::ConfigError);
}

TEST_CASE("holder_seminorm: constants, linear data, sampling path") {
    const Grid g = interval_grid(0, 1, 129);
    CHECK(holder_seminorm(GridFunction::Constant(129, 3.0), g, 0.4) == 0.0);
    const GridFunction x = g.sample([](double x, double) { return x; });
    CHECK(holder_seminorm(x, g, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(code_of([&] { holder_seminorm(x, g, 1.0); }) == ErrorCode::ExponentViolation);
    CHECK(code_of([&] { holder_seminorm(x, g, 0.0); }) == ErrorCode::ExponentViolation);

    // refinement leaves a Lipschitz-dominated seminorm nearly unchanged
    const GridFunction w = g.sample([](double x, double) { return std::sin(5 * x); });
    const Grid fine = interval_grid(0, 1, 257);
    const GridFunction wf = fine.sample([](double x, double) { return std::sin(5 * x); });
    const double coarse = holder_seminorm(w, g, 0.4);
    CHECK(holder_seminorm(wf, fine, 0.4) == doctest::Approx(coarse).epsilon(0.1));

    // 2401 nodes exceed the exhaustive limit, so this takes the sampled path
    const auto sq = DomainSpec::rectangle(pi, pi);
    const Grid g2 = discretize(sq, 49);
    const GridFunction u2 = g2.sample([](double x, double y) { return std::sin(x) * std::cos(y); });
    const double gamma = 0.4;
    double exact = 0.0;
    for (int p = 0; p < g2.node_count(); ++p)
        for (int q = p + 1; q < g2.node_count(); ++q) {
            const double d = std::hypot(g2.x(p) - g2.x(q), g2.y(p) - g2.y(q));
            exact = std::max(exact, std::abs(u2[p] - u2[q]) / std::pow(d, gamma));
        }
    const double sampled = holder_seminorm(u2, g2, gamma);
    CHECK(sampled <= exact * (1 + 1e-12));
    CHECK(sampled >= 0.9 * exact);
    CHECK(holder_seminorm(u2, g2, gamma) == sampled);
}

TEST_CASE("lemma_B1_threshold examples and errors") {
    CHECK(lemma_B1_threshold({1.0, 1.0, 2.0, 1.0}) == doctest::Approx(4.0));
    CHECK(lemma_B1_threshold({1.0, 2.0, 2.0, 1.0}) == doctest::Approx(4.0));
    CHECK(lemma_B1_threshold({1.0, 2.0, 2.0, 0.0}) == 0.0);
    CHECK(code_of([] { lemma_B1_threshold({1.0, 1.0, 1.0, 1.0}); }) == ErrorCode::BadExponent);
    CHECK(code_of([] { lemma_B1_threshold({1.0, 1.0, 0.5, 1.0}); }) == ErrorCode::BadExponent);
    CHECK(code_of([] { lemma_B1_threshold({-1.0, 1.0, 2.0, 1.0}); }) == ErrorCode::BadExponent);
}

TEST_CASE("lemma_C7_threshold scaling and errors") {
    LevelRadiusDecayParams p;
    const double d = lemma_C7_threshold(p).d;
    CHECK(lemma_C7_threshold(p).ell == 0.5);
    LevelRadiusDecayParams q = p;
    q.C0 *= 4.0;
    CHECK(lemma_C7_threshold(q).d == doctest::Approx(2.0 * d));
    LevelRadiusDecayParams bad = p;
    bad.mu = 1.0;
    CHECK(code_of([&] { lemma_C7_threshold(bad); }) == ErrorCode::BadExponent);
    bad = p;
    bad.ell = 1.0;
    CHECK(code_of([&] { lemma_C7_threshold(bad); }) == ErrorCode::BadExponent);
}

TEST_CASE("lemma thresholds agree with the brute-force recursion") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> C(0.5, 4.0), e(0.5, 3.0), b(1.5, 3.0), phi(0.1, 10.0), r(0.5, 2.0),
        ell(0.25, 0.75);
    const oracle::RecursionOracle o;
    for (int i = 0; i < 20; ++i) {
        const LevelDecayParams p{C(rng), e(rng), b(rng), phi(rng)};
        const double closed = lemma_B1_threshold(p);
        CHECK(std::abs(closed - o.level(p.C0, p.a, p.b, p.phi0)) <= 1e-10 * closed);

        const LevelRadiusDecayParams q{C(rng), e(rng), e(rng), b(rng), phi(rng), r(rng), ell(rng)};
        const double dq = lemma_C7_threshold(q).d;
        CHECK(std::abs(dq - o.level_radius(q.C0, q.alpha, q.gamma, q.mu, q.phi0, q.r0, q.ell)) <= 1e-10 * dq);
    }
}

TEST_CASE("decay sequences vanish above the threshold and blow up below it") {
    // at d itself phi_n = phi0 2^{-na/(b-1)} exactly, but rounding grows like b^n
    const LevelDecayParams p{2.0, 1.5, 2.5, 3.0};
    const double d = lemma_B1_threshold(p);
    const auto at = level_decay_sequence(p, d, 10);
    for (int n = 0; n <= 10; ++n)
        CHECK(at[n] == doctest::Approx(std::log(3.0) - n * 1.5 / 1.5 * std::log(2.0)).epsilon(1e-9).scale(1));
    const auto above = level_decay_sequence(p, 1.01 * d, 60);
    for (std::size_t n = 1; n < above.size(); ++n) CHECK(above[n] < above[n - 1]);
    const auto below = level_decay_sequence(p, 0.99 * d, 60);
    CHECK(below.back() > below.front());

    const LevelRadiusDecayParams q{1.5, 1.0, 2.0, 2.0, 0.5, 1.0, 0.5};
    const double dq = lemma_C7_threshold(q).d;
    const auto seq = level_radius_decay_sequence(q, 1.01 * dq, 60);
    for (std::size_t n = 1; n < seq.size(); ++n) CHECK(seq[n] < seq[n - 1]);
    const auto low = level_radius_decay_sequence(q, 0.99 * dq, 60);
    CHECK(low.back() > low.front());
}

TEST_CASE("RegularityReport serializes its keys") {
    RegularityReport r;
    r.gamma = 0.4;
    r.tau_fit = 0.3;
    r.levelset_table = {{0.1, 1.0, 2.0}};
    const auto j = to_json(r);
    for (const char* key : {"gamma", "tau_fit", "eta_bar_fit", "seminorm", "linfty_ratio", "levelset_table"})
        CHECK(j.contains(key));
    CHECK(j["levelset_table"].size() == 1);
}
