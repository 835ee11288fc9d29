#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fracmix/error.hpp"

namespace fracmix {

/// Nodal values on a Grid, one entry per node (Dirichlet nodes included).
using GridFunction = Eigen::VectorXd;

enum class DomainKind { Interval, Rectangle };

/// An interval (a, b) or an axis-aligned rectangle (0, lx) x (0, ly).
struct DomainSpec {
    DomainKind kind = DomainKind::Interval;
    double a = 0.0;
    double b = 1.0;
    double lx = 1.0;
    double ly = 1.0;

    static DomainSpec interval(double a, double b);
    static DomainSpec rectangle(double lx, double ly);

    int dim() const { return kind == DomainKind::Interval ? 1 : 2; }

    /// Lebesgue measure of the domain.
    double volume() const;

    /// Perimeter in 2D; counting measure of {a, b} (= 2) in 1D.
    double boundary_measure() const;
};

/// Checks a DomainSpec; throws InvalidDomain on degenerate extents.
DomainSpec make_domain(const DomainSpec& spec);

/// Rectangle edges. On an interval only Left (x = a) and Right (x = b) are used.
///
/// Edge coordinate t: x for Bottom/Top, y for Left/Right.
enum class Edge { Bottom, Right, Top, Left };

const char* to_string(Edge e);
Edge edge_from_string(const std::string& name);

double edge_length(const DomainSpec& domain, Edge e);

/// Closed piece [t0, t1] of one edge. In 1D an arc is a single endpoint and t0 = t1 = 0.
struct BoundaryArc {
    Edge edge = Edge::Bottom;
    double t0 = 0.0;
    double t1 = 0.0;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Dirichlet part of the boundary; the Neumann part is its (relatively open) complement.
struct BoundaryPartition {
    DomainSpec domain;
    std::vector<BoundaryArc> dirichlet;
    double alpha = 0.0;
    /// Endpoints of the Dirichlet set lying strictly inside an edge.
    std::vector<Point2> interface;
};

/// Builds a partition from closed arcs, validating disjointness and measure.
BoundaryPartition make_partition(const DomainSpec& domain, std::vector<BoundaryArc> arcs);

/// Summed arclength (2D) or point count (1D) of the Dirichlet set.
double boundary_measure(const BoundaryPartition& part);

/// True if every point of `inner` lies in some arc of `outer` (up to tol).
bool contains(const BoundaryPartition& outer, const BoundaryPartition& inner, double tol = 1e-12);

enum class Direction { Clockwise, CounterClockwise };

/// Nested Dirichlet sets grown from a fixed anchor point along the boundary loop.
///
/// The loop runs clockwise (y axis up) starting at the origin corner: up the
/// left edge, along the top edge, down the right edge, back along the bottom.
struct MovingFamily {
    DomainSpec domain;
    Edge anchor_edge = Edge::Bottom;
    double anchor_t = 0.0;
    Direction direction = Direction::Clockwise;
    double epsilon = 0.0;
};

/// Partition with |Sigma_D| = alpha; throws AlphaOutOfRange outside [epsilon, |boundary|].
BoundaryPartition partition_at(const MovingFamily& family, double alpha);

/// Loop coordinate in [0, perimeter) of the point (edge, t).
double loop_coordinate(const DomainSpec& domain, Edge e, double t);

enum class NodeTag : std::uint8_t { Interior, Dirichlet, Neumann, Interface };

const char* to_string(NodeTag tag);

/// Uniform tensor grid with n nodes per axis. Node index = j * n + i in 2D.
struct Grid {
    DomainSpec domain;
    int n = 0;
    double hx = 0.0;
    double hy = 0.0;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<NodeTag> tags;

    int node_count() const { return static_cast<int>(tags.size()); }
    int index(int i, int j) const { return j * n + i; }
    int ix(int node) const { return domain.dim() == 1 ? node : node % n; }
    int iy(int node) const { return domain.dim() == 1 ? 0 : node / n; }
    double x(int node) const { return xs[ix(node)]; }
    double y(int node) const { return domain.dim() == 1 ? 0.0 : ys[iy(node)]; }

    bool is_boundary(int node) const;

    /// Nodes removed from the linear systems (Dirichlet and interface nodes).
    bool is_eliminated(int node) const {
        return tags[node] == NodeTag::Dirichlet || tags[node] == NodeTag::Interface;
    }

    /// Trapezoidal quadrature weights; also the lumped mass diagonal.
    Eigen::VectorXd weights() const;

    /// Smallest spacing over the axes.
    double h() const { return domain.dim() == 1 ? hx : std::min(hx, hy); }

    /// Evaluates a function of (x, y) at every node.
    template <class F>
    GridFunction sample(F&& f) const {
        GridFunction out(node_count());
        for (int k = 0; k < node_count(); ++k) out[k] = f(x(k), y(k));
        return out;
    }
};

/// Uniform grid; boundary nodes start out tagged Neumann. Throws TooCoarse for n < 3.
Grid discretize(const DomainSpec& spec, int n);

/// Tags boundary nodes against the partition (closed Dirichlet set, h/2 snapping).
Grid classify_boundary_nodes(Grid grid, const BoundaryPartition& part);

}  // namespace fracmix
