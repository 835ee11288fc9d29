#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "fracmix/eigenbasis.hpp"

namespace fracmix {

/// Truncated cylinder Omega x (0, Y) with y-levels graded toward y = 0:
/// y_k = Y (k / M)^q.
struct CylinderGrid {
    std::shared_ptr<const Grid> base;
    std::vector<double> y;
    double height = 0.0;
    double grading = 1.0;

    int levels() const { return static_cast<int>(y.size()) - 1; }

    /// Exact slab integrals int_{y_k}^{y_{k+1}} t^{1-2s} dt.
    Eigen::VectorXd slab_weights(double s) const;
    /// Weight y^{1-2s} at slab midpoints.
    Eigen::VectorXd midpoint_weights(double s) const;
};

/// Throws BadGrading unless M >= 8, Y > 0 and q >= 1.
CylinderGrid build_cylinder(const Grid& grid, double Y, int M, double q = 2.0);

/// Y = 8 / sqrt(lambda_1): the slowest mode has decayed by ~e^{-8} at the cap.
double default_height(double lambda1);

/// int_a^b t^{1-2s} dt in closed form.
double weight_integral(double a, double b, double s);

/// Discrete form int y^{1-2s} <grad U, grad phi> over the free cylinder nodes.
///
/// Unknowns are ordered level-major: index = k * nx + i, where i runs over the
/// free base nodes and k = 0 .. M-1 (the cap y = Y is a homogeneous Dirichlet
/// level). The matrix is Kx (x) My + Mx (x) Ky with the base stencil Kx / Mx
/// and P1 weighted stiffness Ky / lumped weighted mass My in y. kappa_s is
/// kept out of A and applied to loads, fluxes and energies.
struct WeightedSystem {
    std::shared_ptr<const CylinderGrid> cyl;
    StiffnessMass base;
    double s = 0.75;
    double kappa = 0.0;
    Eigen::VectorXd slab;     // slab weight integrals, size M
    Eigen::VectorXd my;       // lumped weighted mass, levels 0..M
    Eigen::VectorXd ky_diag;  // weighted stiffness in y, levels 0..M
    Eigen::VectorXd ky_off;   // coupling between levels k and k+1, size M
    SparseMatrix A;
    SparseMatrix base_full_stiffness;

    int nx() const { return base.size(); }
    int levels() const { return cyl->levels(); }
    int unknowns() const { return nx() * levels(); }
};

WeightedSystem assemble_weighted(const CylinderGrid& cyl, const BoundaryPartition& part, double s);

struct SolverDiagnostics {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// U(x_i, y_k) on every base node and every level (cap and Dirichlet sides are 0).
struct CylinderField {
    std::shared_ptr<const WeightedSystem> system;
    Eigen::MatrixXd values;  // rows: base grid nodes, cols: levels 0..M
    SolverDiagnostics diagnostics;

    GridFunction trace() const { return values.col(0); }
};

enum class Preconditioner {
    Cholesky,            // sparse LLT (AMD ordering): converges in a step or two
    IncompleteCholesky,  // IC(0) with AMD ordering, for memory-bound problems
};

struct CgOptions {
    double tolerance = 1e-10;
    int max_iterations = 20000;
    Preconditioner preconditioner = Preconditioner::Cholesky;
};

/// Energy solution with Neumann datum f at y = 0. Throws SolverDivergence if
/// preconditioned CG misses the residual target.
CylinderField solve_extension(std::shared_ptr<const WeightedSystem> sys, const GridFunction& f,
                              const CgOptions& opts = {});

/// s-harmonic extension of u (which must vanish on eliminated nodes).
CylinderField extend(std::shared_ptr<const WeightedSystem> sys, const GridFunction& u,
                     const CgOptions& opts = {});
CylinderField extend(const GridFunction& u, const CylinderGrid& cyl, const BoundaryPartition& part,
                     double s);

/// Weighted conormal derivative at y = 0 scaled by 1/kappa_s, taken as the
/// weak-form residual against the bottom hat functions (zero on eliminated nodes).
GridFunction fractional_flux(const CylinderField& U);

struct WeightedEnergy {
    double raw = 0.0;     // int y^{1-2s} |grad U|^2
    double scaled = 0.0;  // raw / kappa_s, comparable with ||u||^2_{H^s}
};

WeightedEnergy weighted_energy(const CylinderField& U);

/// Point (x, y_base, t) of the cylinder; y_base is ignored over an interval.
struct CylinderPoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

double distance(const CylinderPoint& a, const CylinderPoint& b, int dim);

/// Raw energy restricted to the stencil terms whose midpoint lies within r of Z.
double local_energy(const CylinderField& U, const CylinderPoint& Z, double r);

/// Lumped int_{B_r(Z)} y^{1-2s} U^2.
double local_weighted_l2(const CylinderField& U, const CylinderPoint& Z, double r);

/// energy(U; B_rho) (r - rho)^2 / int_{B_r} y^{1-2s} U^2, i.e. the smallest
/// Caccioppoli constant admitted by this ball pair.
double caccioppoli_ratio(const CylinderField& U, const CylinderPoint& Z, double rho, double r);

}  // namespace fracmix
