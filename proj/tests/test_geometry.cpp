#include "doctest.h"

#include <cmath>

#include "fracmix/geometry.hpp"
#include "oracles.hpp"

using namespace fracmix;
using oracle::pi;

namespace {

int count_tag(const Grid& g, NodeTag t) {
    int c = 0;
    for (auto tag : g.tags) c += tag == t;
    return c;
}

}  // namespace

TEST_CASE("make_domain validates extents") {
    const auto I = make_domain(DomainSpec::interval(0, pi));
    CHECK(I.dim() == 1);
    CHECK(I.boundary_measure() == 2.0);
    const auto R = make_domain(DomainSpec::rectangle(pi, pi));
    CHECK(R.dim() == 2);
    CHECK(R.boundary_measure() == doctest::Approx(4 * pi));
    CHECK(R.volume() == doctest::Approx(pi * pi));

    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code_of([] { make_domain(DomainSpec::interval(1, 0)); }) == ErrorCode::InvalidDomain);
    CHECK(code_of([] { make_domain(DomainSpec::rectangle(0, 1)); }) == ErrorCode::InvalidDomain);
    CHECK(code_of([] { make_domain(DomainSpec::rectangle(1, -2)); }) == ErrorCode::InvalidDomain);
}

TEST_CASE("discretize builds uniform grids") {
    const Grid g = discretize(DomainSpec::interval(0, pi), 5);
    REQUIRE(g.node_count() == 5);
    for (int i = 0; i < 5; ++i) CHECK(g.x(i) == doctest::Approx(i * pi / 4));
    int boundary = 0;
    for (int k = 0; k < g.node_count(); ++k) boundary += g.is_boundary(k);
    CHECK(boundary == 2);

    const Grid r = discretize(DomainSpec::rectangle(1, 1), 4);
    CHECK(r.node_count() == 16);
    boundary = 0;
    for (int k = 0; k < r.node_count(); ++k) boundary += r.is_boundary(k);
    CHECK(boundary == 12);
    CHECK(r.weights().sum() == doctest::Approx(1.0));

    CHECK_THROWS_AS(discretize(DomainSpec::interval(0, 1), 2), Error);
    try {
        discretize(DomainSpec::interval(0, 1), 2);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooCoarse);
    }
}

TEST_CASE("classification in 1D") {
    const auto dom = DomainSpec::interval(0, pi);
    const auto part = make_partition(dom, {{Edge::Left, 0, 0}});
    const Grid g = classify_boundary_nodes(discretize(dom, 9), part);
    CHECK(g.tags[0] == NodeTag::Dirichlet);
    CHECK(g.tags[8] == NodeTag::Neumann);
    for (int i = 1; i < 8; ++i) CHECK(g.tags[i] == NodeTag::Interior);
    CHECK(boundary_measure(part) == 1.0);
    const auto both = make_partition(dom, {{Edge::Left, 0, 0}, {Edge::Right, 0, 0}});
    CHECK(boundary_measure(both) == 2.0);
    CHECK(contains(both, part));
    CHECK_FALSE(contains(part, both));
}

TEST_CASE("classification: bottom edge is closed, corners go Dirichlet") {
    const auto dom = DomainSpec::rectangle(pi, pi);
    const auto part = make_partition(dom, {{Edge::Bottom, 0, pi}});
    const Grid g = classify_boundary_nodes(discretize(dom, 9), part);
    for (int i = 0; i < 9; ++i) CHECK(g.tags[g.index(i, 0)] == NodeTag::Dirichlet);
    CHECK(g.tags[g.index(0, 1)] == NodeTag::Neumann);
    CHECK(g.tags[g.index(8, 8)] == NodeTag::Neumann);
    CHECK(part.interface.empty());
    CHECK(count_tag(g, NodeTag::Interface) == 0);
}

TEST_CASE("classification: left half of the bottom edge has an interface midpoint") {
    const auto dom = DomainSpec::rectangle(pi, pi);
    const auto part = make_partition(dom, {{Edge::Bottom, 0, pi / 2}});
    REQUIRE(part.interface.size() == 1);
    CHECK(part.interface[0].x == doctest::Approx(pi / 2));
    CHECK(part.interface[0].y == doctest::Approx(0.0));
    const Grid g = classify_boundary_nodes(discretize(dom, 9), part);
    CHECK(g.tags[g.index(4, 0)] == NodeTag::Interface);
    CHECK(g.is_eliminated(g.index(4, 0)));
    for (int i = 0; i < 4; ++i) CHECK(g.tags[g.index(i, 0)] == NodeTag::Dirichlet);
    for (int i = 5; i < 9; ++i) CHECK(g.tags[g.index(i, 0)] == NodeTag::Neumann);
    CHECK(count_tag(g, NodeTag::Interface) == 1);
}

TEST_CASE("classification is idempotent") {
    const auto dom = DomainSpec::rectangle(2.0, 1.0);
    const auto part = make_partition(dom, {{Edge::Left, 0.2, 0.7}, {Edge::Top, 0.5, 1.5}});
    const Grid once = classify_boundary_nodes(discretize(dom, 21), part);
    const Grid twice = classify_boundary_nodes(once, part);
    CHECK(once.tags == twice.tags);
}

TEST_CASE("boundary_measure sums arcs") {
    const auto dom = DomainSpec::rectangle(1, 1);
    const auto part = make_partition(dom, {{Edge::Bottom, 0.1, 0.4}, {Edge::Top, 0.5, 0.7}});
    CHECK(boundary_measure(part) == doctest::Approx(0.5));
    CHECK(part.interface.size() == 4);
    const auto full = make_partition(
        dom, {{Edge::Bottom, 0, 1}, {Edge::Right, 0, 1}, {Edge::Top, 0, 1}, {Edge::Left, 0, 1}});
    CHECK(boundary_measure(full) == doctest::Approx(4.0));
    CHECK(full.interface.empty());
    CHECK_THROWS_AS(make_partition(dom, {}), Error);
    CHECK_THROWS_AS(make_partition(dom, {{Edge::Bottom, 0.1, 0.5}, {Edge::Bottom, 0.4, 0.6}}), Error);
    CHECK_THROWS_AS(make_partition(dom, {{Edge::Bottom, 0.5, 0.2}}), Error);
}

TEST_CASE("moving family: bookkeeping and errors") {
    const auto dom = DomainSpec::rectangle(pi, pi);
    MovingFamily fam{dom, Edge::Bottom, pi, Direction::Clockwise, 4 * pi / 20};

    const auto half = partition_at(fam, 2 * pi);
    CHECK(boundary_measure(half) == doctest::Approx(2 * pi));
    const auto bottom = make_partition(dom, {{Edge::Bottom, 0, pi}});
    const auto left = make_partition(dom, {{Edge::Left, 0, pi}});
    CHECK(contains(half, bottom));
    CHECK(contains(half, left));

    const auto full = partition_at(fam, 4 * pi);
    CHECK(boundary_measure(full) == doctest::Approx(4 * pi));
    CHECK(full.interface.empty());

    try {
        partition_at(fam, fam.epsilon / 2);
        FAIL("expected AlphaOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AlphaOutOfRange);
    }
    CHECK_THROWS_AS(partition_at(fam, 4 * pi * 1.01), Error);
}

TEST_CASE("moving family: nesting and exact measure") {
    const auto dom = DomainSpec::rectangle(pi, 2.0);
    const double P = dom.boundary_measure();
    for (Direction dir : {Direction::Clockwise, Direction::CounterClockwise})
        for (Edge anchor : {Edge::Left, Edge::Bottom, Edge::Top, Edge::Right}) {
            MovingFamily fam{dom, anchor, 0.7, dir, P / 20};
            std::vector<double> alphas;
            for (int i = 0; i <= 12; ++i) alphas.push_back(P / 20 * std::pow(20.0, i / 12.0));
            for (std::size_t i = 0; i < alphas.size(); ++i) {
                const auto part = partition_at(fam, alphas[i]);
                CHECK(std::abs(boundary_measure(part) - alphas[i]) <= 1e-12 * P);
                CHECK(part.dirichlet.size() <= 5);
                for (std::size_t j = i + 1; j < alphas.size(); ++j)
                    CHECK(contains(partition_at(fam, alphas[j]), part));
            }
        }
}

TEST_CASE("loop coordinates run clockwise from the origin") {
    const auto dom = DomainSpec::rectangle(3.0, 2.0);
    CHECK(loop_coordinate(dom, Edge::Left, 0.0) == doctest::Approx(0.0));
    CHECK(loop_coordinate(dom, Edge::Left, 2.0) == doctest::Approx(2.0));
    CHECK(loop_coordinate(dom, Edge::Top, 1.0) == doctest::Approx(3.0));
    CHECK(loop_coordinate(dom, Edge::Right, 2.0) == doctest::Approx(5.0));
    CHECK(loop_coordinate(dom, Edge::Bottom, 3.0) == doctest::Approx(7.0));
    CHECK(loop_coordinate(dom, Edge::Bottom, 0.0) == doctest::Approx(0.0));
}
