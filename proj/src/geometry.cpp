#include "fracmix/geometry.hpp"

#include <cmath>
#include <sstream>

namespace fracmix {

namespace {

struct LoopInterval {
    double lo = 0.0;
    double hi = 0.0;
};

double perimeter(const DomainSpec& d) { return 2.0 * (d.lx + d.ly); }

// Loop segment [start, end] covered by each edge.
LoopInterval edge_segment(const DomainSpec& d, Edge e) {
    switch (e) {
        case Edge::Left: return {0.0, d.ly};
        case Edge::Top: return {d.ly, d.ly + d.lx};
        case Edge::Right: return {d.ly + d.lx, 2.0 * d.ly + d.lx};
        case Edge::Bottom: return {2.0 * d.ly + d.lx, perimeter(d)};
    }
    return {};
}

// Raw loop coordinate, not reduced modulo the perimeter.
double loop_raw(const DomainSpec& d, Edge e, double t) {
    switch (e) {
        case Edge::Left: return t;
        case Edge::Top: return d.ly + t;
        case Edge::Right: return d.ly + d.lx + (d.ly - t);
        case Edge::Bottom: return 2.0 * d.ly + d.lx + (d.lx - t);
    }
    return 0.0;
}

double edge_t_from_loop(const DomainSpec& d, Edge e, double s) {
    switch (e) {
        case Edge::Left: return s;
        case Edge::Top: return s - d.ly;
        case Edge::Right: return d.ly - (s - d.ly - d.lx);
        case Edge::Bottom: return d.lx - (s - 2.0 * d.ly - d.lx);
    }
    return 0.0;
}

Point2 loop_point(const DomainSpec& d, double s) {
    const double p = perimeter(d);
    s = std::fmod(s, p);
    if (s < 0) s += p;
    if (s <= d.ly) return {0.0, s};
    if (s <= d.ly + d.lx) return {s - d.ly, d.ly};
    if (s <= 2.0 * d.ly + d.lx) return {d.lx, d.ly - (s - d.ly - d.lx)};
    return {d.lx - (s - 2.0 * d.ly - d.lx), 0.0};
}

bool is_corner(const DomainSpec& d, double s, double tol) {
    const double p = perimeter(d);
    for (double c : {0.0, d.ly, d.ly + d.lx, 2.0 * d.ly + d.lx, p})
        if (std::abs(s - c) <= tol) return true;
    return false;
}

LoopInterval arc_interval(const DomainSpec& d, const BoundaryArc& arc) {
    const double s0 = loop_raw(d, arc.edge, arc.t0);
    const double s1 = loop_raw(d, arc.edge, arc.t1);
    return {std::min(s0, s1), std::max(s0, s1)};
}

// Connected components of the union of arcs on the boundary loop. A component
// wrapping through the origin corner is returned with hi > perimeter.
std::vector<LoopInterval> merged_components(const DomainSpec& d,
                                            const std::vector<BoundaryArc>& arcs, double tol) {
    std::vector<LoopInterval> iv;
    iv.reserve(arcs.size());
    for (const auto& a : arcs) iv.push_back(arc_interval(d, a));
    std::sort(iv.begin(), iv.end(), [](auto& l, auto& r) { return l.lo < r.lo; });

    std::vector<LoopInterval> out;
    for (const auto& cur : iv) {
        if (!out.empty() && cur.lo <= out.back().hi + tol)
            out.back().hi = std::max(out.back().hi, cur.hi);
        else
            out.push_back(cur);
    }
    const double p = perimeter(d);
    if (out.size() > 1 && out.front().lo <= tol && out.back().hi >= p - tol) {
        out.back().hi = p + out.front().hi;
        out.erase(out.begin());
    }
    return out;
}

}  // namespace

DomainSpec DomainSpec::interval(double a, double b) {
    DomainSpec d;
    d.kind = DomainKind::Interval;
    d.a = a;
    d.b = b;
    return d;
}

DomainSpec DomainSpec::rectangle(double lx, double ly) {
    DomainSpec d;
    d.kind = DomainKind::Rectangle;
    d.lx = lx;
    d.ly = ly;
    return d;
}

double DomainSpec::volume() const { return kind == DomainKind::Interval ? b - a : lx * ly; }

double DomainSpec::boundary_measure() const {
    return kind == DomainKind::Interval ? 2.0 : perimeter(*this);
}

DomainSpec make_domain(const DomainSpec& spec) {
    if (spec.kind == DomainKind::Interval) {
        if (!(spec.b > spec.a) || !std::isfinite(spec.a) || !std::isfinite(spec.b))
            throw Error(ErrorCode::InvalidDomain, "interval requires b > a");
    } else {
        if (!(spec.lx > 0.0) || !(spec.ly > 0.0) || !std::isfinite(spec.lx) ||
            !std::isfinite(spec.ly))
            throw Error(ErrorCode::InvalidDomain, "rectangle requires lx, ly > 0");
    }
    return spec;
}

const char* to_string(Edge e) {
    switch (e) {
        case Edge::Bottom: return "bottom";
        case Edge::Right: return "right";
        case Edge::Top: return "top";
        case Edge::Left: return "left";
    }
    return "?";
}

Edge edge_from_string(const std::string& name) {
    if (name == "bottom") return Edge::Bottom;
    if (name == "right") return Edge::Right;
    if (name == "top") return Edge::Top;
    if (name == "left") return Edge::Left;
    throw Error(ErrorCode::InvalidPartition, "unknown edge '" + name + "'");
}

double edge_length(const DomainSpec& domain, Edge e) {
    if (domain.dim() == 1) return 0.0;
    return (e == Edge::Bottom || e == Edge::Top) ? domain.lx : domain.ly;
}

double loop_coordinate(const DomainSpec& domain, Edge e, double t) {
    const double s = loop_raw(domain, e, t);
    return s >= perimeter(domain) ? s - perimeter(domain) : s;
}

BoundaryPartition make_partition(const DomainSpec& domain, std::vector<BoundaryArc> arcs) {
    make_domain(domain);
    BoundaryPartition part;
    part.domain = domain;

    if (domain.dim() == 1) {
        bool seen_left = false;
        bool seen_right = false;
        for (const auto& a : arcs) {
            if (a.edge != Edge::Left && a.edge != Edge::Right)
                throw Error(ErrorCode::InvalidPartition, "1D partitions use left/right endpoints");
            bool& seen = a.edge == Edge::Left ? seen_left : seen_right;
            if (seen) throw Error(ErrorCode::InvalidPartition, "duplicate endpoint");
            seen = true;
        }
        part.dirichlet = std::move(arcs);
        part.alpha = boundary_measure(part);
        return part;
    }

    const double p = perimeter(domain);
    const double tol = 1e-12 * p;
    for (const auto& a : arcs) {
        const double len = edge_length(domain, a.edge);
        if (!(a.t0 >= -tol && a.t1 <= len + tol && a.t0 < a.t1)) {
            std::ostringstream os;
            os << "arc on " << to_string(a.edge) << " needs 0 <= t0 < t1 <= " << len << ", got ["
               << a.t0 << ", " << a.t1 << "]";
            throw Error(ErrorCode::InvalidPartition, os.str());
        }
    }
    std::vector<LoopInterval> iv;
    for (const auto& a : arcs) iv.push_back(arc_interval(domain, a));
    std::sort(iv.begin(), iv.end(), [](auto& l, auto& r) { return l.lo < r.lo; });
    for (std::size_t k = 1; k < iv.size(); ++k)
        if (iv[k].lo < iv[k - 1].hi - tol)
            throw Error(ErrorCode::InvalidPartition, "Dirichlet arcs overlap");

    part.dirichlet = std::move(arcs);
    part.alpha = boundary_measure(part);

    const auto comps = merged_components(domain, part.dirichlet, tol);
    if (!(comps.size() == 1 && comps[0].hi - comps[0].lo >= p - tol)) {
        for (const auto& c : comps)
            for (double s : {c.lo, c.hi}) {
                const double sm = std::fmod(s, p);
                if (!is_corner(domain, sm, tol)) part.interface.push_back(loop_point(domain, sm));
            }
    }
    return part;
}

double boundary_measure(const BoundaryPartition& part) {
    if (part.dirichlet.empty())
        throw Error(ErrorCode::InvalidPartition, "Dirichlet set must have positive measure");
    if (part.domain.dim() == 1) return static_cast<double>(part.dirichlet.size());
    double total = 0.0;
    for (const auto& a : part.dirichlet) total += a.t1 - a.t0;
    return total;
}

bool contains(const BoundaryPartition& outer, const BoundaryPartition& inner, double tol) {
    const DomainSpec& d = outer.domain;
    if (d.dim() == 1) {
        for (const auto& a : inner.dirichlet) {
            bool found = false;
            for (const auto& b : outer.dirichlet) found = found || a.edge == b.edge;
            if (!found) return false;
        }
        return true;
    }
    const double p = perimeter(d);
    const auto comps = merged_components(d, outer.dirichlet, tol * p);
    for (const auto& a : inner.dirichlet) {
        const LoopInterval in = arc_interval(d, a);
        bool found = false;
        for (const auto& c : comps)
            for (double shift : {0.0, p})
                found = found || (in.lo + shift >= c.lo - tol * p && in.hi + shift <= c.hi + tol * p);
        if (!found) return false;
    }
    return true;
}

BoundaryPartition partition_at(const MovingFamily& family, double alpha) {
    const DomainSpec& d = family.domain;
    if (d.dim() != 2) throw Error(ErrorCode::InvalidDomain, "moving families need a rectangle");
    const double p = perimeter(d);
    if (!(alpha >= family.epsilon) || !(alpha <= p * (1.0 + 1e-14)) || !(alpha > 0.0)) {
        std::ostringstream os;
        os << "alpha = " << alpha << " outside [" << family.epsilon << ", " << p << "]";
        throw Error(ErrorCode::AlphaOutOfRange, os.str());
    }
    alpha = std::min(alpha, p);

    const double s0 = loop_coordinate(d, family.anchor_edge, family.anchor_t);
    double lo = family.direction == Direction::Clockwise ? s0 : s0 - alpha;
    if (lo < 0) lo += p;
    const double hi = lo + alpha;

    const double tol = 1e-14 * p;
    std::vector<BoundaryArc> arcs;
    for (double shift : {0.0, p}) {
        for (Edge e : {Edge::Left, Edge::Top, Edge::Right, Edge::Bottom}) {
            const LoopInterval seg = edge_segment(d, e);
            const double a = std::max(lo, seg.lo + shift);
            const double b = std::min(hi, seg.hi + shift);
            if (b - a <= tol) continue;
            double ta = edge_t_from_loop(d, e, a - shift);
            double tb = edge_t_from_loop(d, e, b - shift);
            if (ta > tb) std::swap(ta, tb);
            const double len = edge_length(d, e);
            arcs.push_back({e, std::clamp(ta, 0.0, len), std::clamp(tb, 0.0, len)});
        }
    }
    return make_partition(d, std::move(arcs));
}

const char* to_string(NodeTag tag) {
    switch (tag) {
        case NodeTag::Interior: return "interior";
        case NodeTag::Dirichlet: return "dirichlet";
        case NodeTag::Neumann: return "neumann";
        case NodeTag::Interface: return "interface";
    }
    return "?";
}

bool Grid::is_boundary(int node) const {
    const int i = ix(node);
    if (domain.dim() == 1) return i == 0 || i == n - 1;
    const int j = iy(node);
    return i == 0 || j == 0 || i == n - 1 || j == n - 1;
}

Eigen::VectorXd Grid::weights() const {
    auto axis = [this](double h) {
        Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
        w[0] = w[n - 1] = 0.5 * h;
        return w;
    };
    if (domain.dim() == 1) return axis(hx);
    const Eigen::VectorXd wx = axis(hx);
    const Eigen::VectorXd wy = axis(hy);
    Eigen::VectorXd w(node_count());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) w[index(i, j)] = wx[i] * wy[j];
    return w;
}

Grid discretize(const DomainSpec& spec, int n) {
    make_domain(spec);
    if (n < 3) throw Error(ErrorCode::TooCoarse, "need at least 3 nodes per axis");
    Grid g;
    g.domain = spec;
    g.n = n;
    if (spec.dim() == 1) {
        g.hx = (spec.b - spec.a) / (n - 1);
        g.hy = 0.0;
        g.xs.resize(n);
        for (int i = 0; i < n; ++i) g.xs[i] = spec.a + i * g.hx;
        g.xs[n - 1] = spec.b;
        g.tags.assign(n, NodeTag::Interior);
    } else {
        g.hx = spec.lx / (n - 1);
        g.hy = spec.ly / (n - 1);
        g.xs.resize(n);
        g.ys.resize(n);
        for (int i = 0; i < n; ++i) {
            g.xs[i] = i * g.hx;
            g.ys[i] = i * g.hy;
        }
        g.xs[n - 1] = spec.lx;
        g.ys[n - 1] = spec.ly;
        g.tags.assign(static_cast<std::size_t>(n) * n, NodeTag::Interior);
    }
    for (int k = 0; k < g.node_count(); ++k)
        if (g.is_boundary(k)) g.tags[k] = NodeTag::Neumann;
    return g;
}

Grid classify_boundary_nodes(Grid grid, const BoundaryPartition& part) {
    if (grid.domain.dim() == 1) {
        for (int k : {0, grid.n - 1}) grid.tags[k] = NodeTag::Neumann;
        for (const auto& a : part.dirichlet)
            grid.tags[a.edge == Edge::Left ? 0 : grid.n - 1] = NodeTag::Dirichlet;
        return grid;
    }

    const int n = grid.n;
    for (int k = 0; k < grid.node_count(); ++k) {
        if (!grid.is_boundary(k)) continue;
        const int i = grid.ix(k);
        const int j = grid.iy(k);
        struct OnEdge {
            Edge e;
            double t;
            double h;
        };
        std::vector<OnEdge> on;
        if (j == 0) on.push_back({Edge::Bottom, grid.xs[i], grid.hx});
        if (j == n - 1) on.push_back({Edge::Top, grid.xs[i], grid.hx});
        if (i == 0) on.push_back({Edge::Left, grid.ys[j], grid.hy});
        if (i == n - 1) on.push_back({Edge::Right, grid.ys[j], grid.hy});

        bool dirichlet = false;
        for (const auto& o : on)
            for (const auto& a : part.dirichlet) {
                if (a.edge != o.e) continue;
                const double snap = 0.5 * o.h * (1.0 + 1e-9);
                dirichlet = dirichlet || (o.t >= a.t0 - snap && o.t <= a.t1 + snap);
            }
        grid.tags[k] = dirichlet ? NodeTag::Dirichlet : NodeTag::Neumann;
        if (!dirichlet) continue;
        const double snap = 0.5 * grid.h() * (1.0 + 1e-9);
        for (const auto& p : part.interface)
            if (std::hypot(grid.xs[i] - p.x, grid.ys[j] - p.y) <= snap)
                grid.tags[k] = NodeTag::Interface;
    }
    return grid;
}

}  // namespace fracmix
