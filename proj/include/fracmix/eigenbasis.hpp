#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "fracmix/geometry.hpp"

namespace fracmix {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Mixed-BC Laplacian over the free (non-Dirichlet) nodes of a grid.
///
/// K is the 3-point / 5-point stencil in weak-form scaling (Neumann closure by
/// reflection), M the lumped trapezoidal mass. The generalized problem
/// K phi = lambda M phi is the finite-difference eigenproblem.
struct StiffnessMass {
    std::shared_ptr<const Grid> grid;
    SparseMatrix K;
    Eigen::VectorXd M;
    std::vector<int> free_nodes;    // free index -> grid node
    std::vector<int> node_to_free;  // grid node -> free index, -1 if eliminated

    int size() const { return static_cast<int>(free_nodes.size()); }

    /// Restriction of a grid function to the free nodes.
    Eigen::VectorXd restrict(const GridFunction& f) const;
    /// Extension by zero onto the full grid.
    GridFunction prolong(const Eigen::VectorXd& v) const;
};

/// Mass-orthonormal eigenpairs, eigenvalues ascending. Eigenvector columns
/// are full grid functions (zero on eliminated nodes).
struct EigenBasis {
    std::shared_ptr<const Grid> grid;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd vectors;
    Eigen::VectorXd mass;  // trapezoidal weights on the full grid

    int size() const { return static_cast<int>(eigenvalues.size()); }
    GridFunction mode(int j) const { return vectors.col(j); }

    /// Basis restricted to its first J modes.
    EigenBasis truncated(int J) const;
};

/// Neumann stiffness over every grid node (no elimination). Row sums vanish, so
/// u^T K u = sum over stencil edges of c_pq (u_p - u_q)^2 with c_pq = -K_pq.
SparseMatrix assemble_full_stiffness(const Grid& grid);

/// 1D/2D stencil assembly on a classified grid. Throws EmptyDirichletSet when
/// nothing is eliminated (lambda_1 would vanish).
StiffnessMass assemble(const Grid& grid, const BoundaryPartition& part);

enum class EigenMethod {
    Auto,     // dense in 1D or for <= dense_limit free nodes, Lanczos otherwise
    Dense,    // full symmetric eigensolve (tridiagonal QR in 1D)
    Lanczos,  // Lanczos on the inverse operator, full reorthogonalization
};

inline constexpr int dense_limit = 2000;

/// Smallest J eigenpairs. Throws ConvergenceFailure (with iteration count and
/// worst residual in the message) if Lanczos cannot resolve them.
EigenBasis solve_eigen(const StiffnessMass& sm, int J, EigenMethod method = EigenMethod::Auto);

/// Default mode count: min(free, 512) in 1D and min(free, 256) in 2D.
int default_mode_count(const StiffnessMass& sm);

/// max_j ||K phi_j - lambda_j M phi_j||_{M^-1} / (lambda_j ||phi_j||_M); 0 for an empty basis.
double eigen_residual(const StiffnessMass& sm, const EigenBasis& basis);

/// lambda_1 of the mixed problem on an n x n grid at partition_at(family, alpha).
double first_eigenvalue(const MovingFamily& family, double alpha, int n);

}  // namespace fracmix
