#include "fracmix/eigenbasis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace fracmix {

namespace {

// Free-Neumann P1 stiffness on a uniform axis, weak-form scaling 1/h.
std::vector<Eigen::Triplet<double>> axis_stiffness(int n, double h) {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i + 1 < n; ++i) {
        t.emplace_back(i, i, 1.0 / h);
        t.emplace_back(i + 1, i + 1, 1.0 / h);
        t.emplace_back(i, i + 1, -1.0 / h);
        t.emplace_back(i + 1, i, -1.0 / h);
    }
    return t;
}

Eigen::VectorXd axis_mass(int n, double h) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
    w[0] = w[n - 1] = 0.5 * h;
    return w;
}

// Symmetrized operator C = M^{-1/2} K M^{-1/2}.
SparseMatrix symmetrized(const StiffnessMass& sm) {
    const Eigen::VectorXd dinv = sm.M.cwiseSqrt().cwiseInverse();
    SparseMatrix C = dinv.asDiagonal() * sm.K * dinv.asDiagonal();
    C.makeCompressed();
    return C;
}

// Deterministic sign: positive mass-weighted mean, else positive largest entry.
void fix_sign(Eigen::Ref<Eigen::VectorXd> z, const Eigen::VectorXd& sqrt_m) {
    const double mean = z.dot(sqrt_m);
    double ref = mean;
    if (std::abs(mean) < 1e-8 * z.norm() * sqrt_m.norm()) {
        Eigen::Index k = 0;
        z.cwiseAbs().maxCoeff(&k);
        ref = z[k];
    }
    if (ref < 0) z = -z;
}

EigenBasis make_basis(const StiffnessMass& sm, const Eigen::VectorXd& lambdas,
                      const Eigen::MatrixXd& z) {
    EigenBasis basis;
    basis.grid = sm.grid;
    basis.eigenvalues = lambdas;
    basis.mass = sm.grid->weights();
    const Eigen::VectorXd sqrt_m = sm.M.cwiseSqrt();
    basis.vectors = Eigen::MatrixXd::Zero(sm.grid->node_count(), lambdas.size());
    for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
        Eigen::VectorXd zj = z.col(j);
        fix_sign(zj, sqrt_m);
        const Eigen::VectorXd phi = zj.cwiseQuotient(sqrt_m);
        basis.vectors.col(j) = sm.prolong(phi);
    }
    return basis;
}

EigenBasis solve_dense(const StiffnessMass& sm, int J) {
    const SparseMatrix C = symmetrized(sm);
    const int n = sm.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (sm.grid->domain.dim() == 1) {
        Eigen::VectorXd diag(n);
        Eigen::VectorXd sub(std::max(n - 1, 0));
        for (int i = 0; i < n; ++i) diag[i] = C.coeff(i, i);
        for (int i = 0; i + 1 < n; ++i) sub[i] = C.coeff(i + 1, i);
        es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    } else {
        es.compute(Eigen::MatrixXd(C));
    }
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::ConvergenceFailure, "dense symmetric eigensolver failed");
    return make_basis(sm, es.eigenvalues().head(J), es.eigenvectors().leftCols(J));
}

EigenBasis solve_lanczos(const StiffnessMass& sm, int J) {
    const SparseMatrix C = symmetrized(sm);
    const int n = sm.size();
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(C);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::ConvergenceFailure, "LDLT factorization of the stiffness failed");

    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto random_vector = [&] {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = unif(rng);
        return v;
    };

    Eigen::MatrixXd V(n, std::min(n, std::max(2 * J, J + 40)));
    std::vector<double> alpha;
    std::vector<double> beta;
    V.col(0) = random_vector().normalized();

    const double tol = 1e-10;
    int target = static_cast<int>(V.cols());
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k + 1 > V.cols()) V.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, 2 * V.cols()));
        Eigen::VectorXd w = ldlt.solve(V.col(k));
        alpha.push_back(V.col(k).dot(w));
        w -= alpha.back() * V.col(k);
        if (k > 0) w -= beta.back() * V.col(k - 1);
        for (int pass = 0; pass < 2; ++pass) {
            const auto Vk = V.leftCols(k + 1);
            w -= Vk * (Vk.transpose() * w);
        }
        double b = w.norm();
        const bool last = k + 1 == n;
        if (!last && b < 1e-12 * std::abs(alpha.back())) {
            // Invariant subspace: restart with a fresh direction orthogonal to the basis.
            w = random_vector();
            for (int pass = 0; pass < 2; ++pass) {
                const auto Vk = V.leftCols(k + 1);
                w -= Vk * (Vk.transpose() * w);
            }
            w.normalize();
            b = 0.0;
            if (k + 2 > V.cols()) V.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, 2 * V.cols()));
            V.col(k + 1) = w;
        } else if (!last) {
            if (k + 2 > V.cols()) V.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, 2 * V.cols()));
            V.col(k + 1) = w / b;
        }
        beta.push_back(b);

        const int m = k + 1;
        if (m < J || (m != target && !last)) continue;

        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd sub = Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        // Largest Ritz values of C^{-1} are the smallest eigenvalues of C.
        Eigen::VectorXd lambdas(J);
        Eigen::MatrixXd Z(n, J);
        worst = 0.0;
        for (int j = 0; j < J; ++j) {
            const int col = m - 1 - j;
            lambdas[j] = 1.0 / tri.eigenvalues()[col];
            Z.col(j) = V.leftCols(m) * tri.eigenvectors().col(col);
            Z.col(j).normalize();
            const double r = (C * Z.col(j) - lambdas[j] * Z.col(j)).norm() / lambdas[j];
            worst = std::max(worst, r);
        }
        if (worst <= tol) return make_basis(sm, lambdas, Z);
        target = std::min(n, 2 * m);
    }
    std::ostringstream os;
    os << "Lanczos stalled after " << n << " iterations, worst relative residual " << worst;
    throw Error(ErrorCode::ConvergenceFailure, os.str());
}

}  // namespace

Eigen::VectorXd StiffnessMass::restrict(const GridFunction& f) const {
    Eigen::VectorXd v(size());
    for (int k = 0; k < size(); ++k) v[k] = f[free_nodes[k]];
    return v;
}

GridFunction StiffnessMass::prolong(const Eigen::VectorXd& v) const {
    GridFunction f = GridFunction::Zero(grid->node_count());
    for (int k = 0; k < size(); ++k) f[free_nodes[k]] = v[k];
    return f;
}

EigenBasis EigenBasis::truncated(int J) const {
    if (J < 0 || J > size()) throw Error(ErrorCode::BasisMismatch, "truncation beyond basis size");
    EigenBasis b;
    b.grid = grid;
    b.eigenvalues = eigenvalues.head(J);
    b.vectors = vectors.leftCols(J);
    b.mass = mass;
    return b;
}

SparseMatrix assemble_full_stiffness(const Grid& grid) {
    const int n = grid.n;
    std::vector<Eigen::Triplet<double>> full;
    if (grid.domain.dim() == 1) {
        full = axis_stiffness(n, grid.hx);
    } else {
        const auto kx = axis_stiffness(n, grid.hx);
        const auto ky = axis_stiffness(n, grid.hy);
        const Eigen::VectorXd mx = axis_mass(n, grid.hx);
        const Eigen::VectorXd my = axis_mass(n, grid.hy);
        for (int j = 0; j < n; ++j)
            for (const auto& t : kx)
                full.emplace_back(grid.index(t.row(), j), grid.index(t.col(), j), t.value() * my[j]);
        for (int i = 0; i < n; ++i)
            for (const auto& t : ky)
                full.emplace_back(grid.index(i, t.row()), grid.index(i, t.col()), t.value() * mx[i]);
    }
    SparseMatrix K(grid.node_count(), grid.node_count());
    K.setFromTriplets(full.begin(), full.end());
    K.makeCompressed();
    return K;
}

StiffnessMass assemble(const Grid& grid, const BoundaryPartition& part) {
    if (part.dirichlet.empty())
        throw Error(ErrorCode::EmptyDirichletSet, "partition has no Dirichlet arcs");
    StiffnessMass sm;
    sm.grid = std::make_shared<const Grid>(grid);
    const int nodes = grid.node_count();
    sm.node_to_free.assign(nodes, -1);
    for (int k = 0; k < nodes; ++k)
        if (!grid.is_eliminated(k)) {
            sm.node_to_free[k] = static_cast<int>(sm.free_nodes.size());
            sm.free_nodes.push_back(k);
        }
    if (static_cast<int>(sm.free_nodes.size()) == nodes)
        throw Error(ErrorCode::EmptyDirichletSet, "no Dirichlet nodes on the grid");

    const SparseMatrix full = assemble_full_stiffness(grid);
    const Eigen::VectorXd mass = grid.weights();

    std::vector<Eigen::Triplet<double>> reduced;
    reduced.reserve(full.nonZeros());
    for (int col = 0; col < full.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(full, col); it; ++it) {
            const int r = sm.node_to_free[it.row()];
            const int c = sm.node_to_free[it.col()];
            if (r >= 0 && c >= 0) reduced.emplace_back(r, c, it.value());
        }
    sm.K.resize(sm.size(), sm.size());
    sm.K.setFromTriplets(reduced.begin(), reduced.end());
    sm.K.makeCompressed();
    sm.M = sm.restrict(mass);
    return sm;
}

EigenBasis solve_eigen(const StiffnessMass& sm, int J, EigenMethod method) {
    if (J < 0 || J > sm.size()) {
        std::ostringstream os;
        os << "requested " << J << " modes from " << sm.size() << " free nodes";
        throw Error(ErrorCode::BasisMismatch, os.str());
    }
    if (J == 0) return make_basis(sm, Eigen::VectorXd(0), Eigen::MatrixXd(sm.size(), 0));
    if (method == EigenMethod::Auto)
        method = sm.size() <= dense_limit || sm.grid->domain.dim() == 1 ? EigenMethod::Dense : EigenMethod::Lanczos;
    return method == EigenMethod::Dense ? solve_dense(sm, J) : solve_lanczos(sm, J);
}

int default_mode_count(const StiffnessMass& sm) {
    return std::min(sm.size(), sm.grid->domain.dim() == 1 ? 512 : 256);
}

double eigen_residual(const StiffnessMass& sm, const EigenBasis& basis) {
    double worst = 0.0;
    const Eigen::VectorXd minv = sm.M.cwiseInverse();
    for (int j = 0; j < basis.size(); ++j) {
        const Eigen::VectorXd phi = sm.restrict(basis.vectors.col(j));
        const double lam = basis.eigenvalues[j];
        const Eigen::VectorXd r = sm.K * phi - lam * sm.M.cwiseProduct(phi);
        const double rnorm = std::sqrt(r.cwiseAbs2().dot(minv));
        const double pnorm = std::sqrt(phi.cwiseAbs2().dot(sm.M));
        worst = std::max(worst, rnorm / (lam * pnorm));
    }
    return worst;
}

double first_eigenvalue(const MovingFamily& family, double alpha, int n) {
    const BoundaryPartition part = partition_at(family, alpha);
    const Grid grid = classify_boundary_nodes(discretize(family.domain, n), part);
    const StiffnessMass sm = assemble(grid, part);
    return solve_eigen(sm, 1, EigenMethod::Lanczos).eigenvalues[0];
}

}  // namespace fracmix
