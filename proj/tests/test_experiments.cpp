#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fracmix/experiments.hpp"
#include "fracmix/spectral_op.hpp"
#include "oracles.hpp"

using namespace fracmix;
using oracle::pi;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("fracmix_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const Error* caught(const std::function<void()>& f, Error& slot) {
    try {
        f();
    } catch (const Error& e) {
        slot = e;
        return &slot;
    }
    return nullptr;
}

StudyConfig small_sweep() {
    return parse_config_text(
        "domain = rectangle\n"
        "family.anchor = left\n"
        "family.t = 0\n"
        "sweep.count = 5\n"
        "f = constant\n"
        "n = 17\n");
}

}  // namespace

TEST_CASE("parse_config_text: minimal file picks up defaults") {
    const auto cfg = parse_config_text("f = constant\n");
    CHECK(cfg.domain.dim() == 1);
    CHECK(cfg.s == 0.75);
    CHECK(cfg.grid_n() == 257);
    CHECK(cfg.levels() == 128);
    CHECK(cfg.q == 2.0);
    CHECK(cfg.p == 2.0);
    CHECK(cfg.gamma == doctest::Approx(0.4));
    CHECK(cfg.seed == holder_seed);
    CHECK(cfg.dirichlet_spec() == "left");

    const auto sq = parse_config_text("# comment\ndomain = rectangle\nlx = pi\nly = pi/2\nf = mode:2\n");
    CHECK(sq.domain.dim() == 2);
    CHECK(sq.domain.ly == doctest::Approx(pi / 2));
    CHECK(sq.grid_n() == 33);
    CHECK(sq.levels() == 32);
    CHECK(sq.resolved_epsilon() == doctest::Approx(3 * pi / 20));
}

TEST_CASE("parse_config_text: errors carry codes and line numbers") {
    Error e(ErrorCode::IoError, "");
    const Error* got = caught([] { parse_config_text("f = constant\ns = 0.4\n"); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::ConfigError);
    CHECK(std::string(got->what()).find("line 2") != std::string::npos);

    got = caught([] { parse_config_text("s = 0.75\nn = 65\n"); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::MissingField);

    got = caught([] { parse_config_text("f = constant\ncolour = blue\n"); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::ConfigError);

    got = caught([] { parse_config_text("f = constant\nf = bump\n"); }, e);
    REQUIRE(got);
    CHECK(std::string(got->what()).find("line 2") != std::string::npos);

    got = caught([] { parse_config_text("domain = rectangle\nf = constant\np = 1.2\n"); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::ExponentViolation);
    CHECK(std::string(got->what()).find("line 3") != std::string::npos);

    got = caught([] { parse_config(fs::path("/nonexistent/fracmix.cfg")); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::IoError);
}

TEST_CASE("config text round-trips") {
    const auto cfg = parse_config_text("domain = rectangle\nlx = 2\nly = 1\ndirichlet = bottom:0:1;left:0:0.5\nf = bump\nalphas = 0.5,1,2,3,4\n");
    const auto again = parse_config_text(to_config_text(cfg));
    CHECK(to_json(again) == to_json(cfg));
}

TEST_CASE("evaluate_profile descriptors") {
    const auto dom = DomainSpec::interval(0, 2);
    const Grid g = discretize(dom, 9);
    CHECK(evaluate_profile("constant", g, nullptr).isOnes());
    CHECK(evaluate_profile("constant:2.5", g, nullptr)[3] == 2.5);
    const GridFunction step = evaluate_profile("step", g, nullptr);
    CHECK(step[4] == 1.0);
    CHECK(step[5] == 0.0);
    const GridFunction bump = evaluate_profile("bump", g, nullptr);
    CHECK(bump[4] == doctest::Approx(1.0));
    CHECK(bump[0] == 0.0);

    const fs::path dir = scratch_dir("profile");
    std::ofstream(dir / "f.csv") << "0\n1\n2\n3\n4\n5\n6\n7\n8\n";
    CHECK(evaluate_profile("csv:" + (dir / "f.csv").string(), g, nullptr)[7] == 7.0);
    std::ofstream(dir / "short.csv") << "1\n2\n";
    CHECK_THROWS_AS(evaluate_profile("csv:" + (dir / "short.csv").string(), g, nullptr), Error);
}

TEST_CASE("emit_results: csv shape, json round-trip, empty input") {
    const auto cfg = small_sweep();
    SweepResult one;
    one.rows.push_back({1.0, 2.0, 3.0, 4.0, 5.0, 0.5});
    one.diagnostics = diagnose(one.rows);

    const fs::path dir = scratch_dir("emit");
    const fs::path csv = emit_results(one, cfg, OutputFormat::Csv, dir);
    const std::string text = slurp(csv);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.rfind("alpha,lambda1,cd_upper,linf,holder_H,tau_fit\n", 0) == 0);
    CHECK(fs::exists(dir / "sweep.config"));
    CHECK(to_json(parse_config(dir / "sweep.config")) == to_json(cfg));

    const fs::path js = emit_results(one, cfg, OutputFormat::Json, dir);
    const auto j = nlohmann::json::parse(slurp(js));
    CHECK(j["version"] == version());
    CHECK(j["config"] == to_json(cfg));
    const auto back = nlohmann::json::parse(j.dump());
    CHECK(back == j);

    Error e(ErrorCode::IoError, "");
    const Error* got = caught([&] { emit_results(SweepResult{}, cfg, OutputFormat::Csv, dir); }, e);
    REQUIRE(got);
    CHECK(got->code() == ErrorCode::NoData);
    CHECK(format_from_string("json") == OutputFormat::Json);
    CHECK_THROWS_AS(format_from_string("xml"), Error);
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman({1, 2, 3, 4, 5}, {2, 5, 1, 4, 3})) < 0.5);
}

TEST_CASE("equivalence: zero load gives zero gaps, constant load is accurate") {
    auto cfg = parse_config_text("f = constant:0\nn = 65\nM = 32\n");
    const auto zero = run_equivalence(cfg);
    CHECK(zero.base.trace_gap == 0.0);
    CHECK(zero.base.isometry_gap == 0.0);
    CHECK(zero.base.flux_gap == 0.0);

    cfg = parse_config_text("f = mode:1\nn = 129\nM = 64\nrefine = false\n");
    const auto one = run_equivalence(cfg);
    CHECK(one.base.trace_gap <= 0.02);
    CHECK(one.base.isometry_gap <= 0.02);
    CHECK(one.base.flux_gap <= 0.02);
    CHECK_FALSE(one.refined.has_value());
    CHECK(one.base.cg_residual <= 1e-10);
}

TEST_CASE("alpha sweep is deterministic and monotone") {
    const auto cfg = small_sweep();
    const auto a = run_alpha_sweep(cfg);
    REQUIRE(a.rows.size() == 5);
    CHECK(a.diagnostics.lambda_monotone);
    for (std::size_t i = 1; i < a.rows.size(); ++i) CHECK(a.rows[i].alpha > a.rows[i - 1].alpha);

    auto threaded = cfg;
    threaded.threads = 3;
    const auto b = run_alpha_sweep(threaded);
    CHECK(sweep_csv(a.rows) == sweep_csv(b.rows));

    auto few = cfg;
    few.sweep_count = 3;
    CHECK_THROWS_AS(run_alpha_sweep(few), Error);
}

TEST_CASE("lemma check is exact to round-off") {
    const auto check = run_lemma_check(holder_seed);
    CHECK(check.b1.size() == 20);
    CHECK(check.c7.size() == 20);
    CHECK(check.worst_gap() <= 1e-10);
}
