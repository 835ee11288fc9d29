#include "fracmix/extension.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#ifdef FRACMIX_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "fracmix/spectral_op.hpp"

namespace fracmix {

namespace {

// int_a^b t^{2-2s} dt
double first_moment(double a, double b, double s) {
    const double e = 3.0 - 2.0 * s;
    return (std::pow(b, e) - std::pow(a, e)) / e;
}

class CholeskyPreconditioner {
public:
    explicit CholeskyPreconditioner(const SparseMatrix& A) : llt_(A) {
        if (llt_.info() != Eigen::Success)
            throw Error(ErrorCode::SolverDivergence, "Cholesky preconditioner failed");
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return llt_.solve(r); }

private:
#ifdef FRACMIX_HAVE_CHOLMOD
    Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> llt_;
#else
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
#endif
};

class IcPreconditioner {
public:
    explicit IcPreconditioner(const SparseMatrix& A) { ic_.compute(A); }
    Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return ic_.solve(r); }

private:
    Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic_;
};

template <class Precond>
SolverDiagnostics pcg_loop(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                      const Precond& precond, const CgOptions& opts) {
    SolverDiagnostics diag;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        return diag;
    }
    int it = 0;
    double rel = (b - A * x).norm() / bnorm;
    // Restart from the true residual until it meets the target.
    while (rel > opts.tolerance && it < opts.max_iterations) {
        Eigen::VectorXd r = b - A * x;
        Eigen::VectorXd z = precond.solve(r);
        Eigen::VectorXd p = z;
        double rz = r.dot(z);
        while (it < opts.max_iterations) {
            const Eigen::VectorXd Ap = A * p;
            const double pAp = p.dot(Ap);
            if (!(pAp > 0.0)) break;
            const double step = rz / pAp;
            x += step * p;
            r -= step * Ap;
            ++it;
            if (r.norm() / bnorm <= 0.5 * opts.tolerance) break;
            z = precond.solve(r);
            const double rz_next = r.dot(z);
            p = z + (rz_next / rz) * p;
            rz = rz_next;
        }
        const double next = (b - A * x).norm() / bnorm;
        if (!(next < rel)) {
            rel = next;
            break;
        }
        rel = next;
    }
    diag.iterations = it;
    diag.relative_residual = rel;
    if (!(rel <= opts.tolerance)) {
        std::ostringstream os;
        os << "CG stopped after " << it << " iterations at relative residual " << rel;
        throw Error(ErrorCode::SolverDivergence, os.str());
    }
    return diag;
}

SolverDiagnostics pcg(const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                      const CgOptions& opts) {
    if (opts.preconditioner == Preconditioner::IncompleteCholesky)
        return pcg_loop(A, b, x, IcPreconditioner(A), opts);
    return pcg_loop(A, b, x, CholeskyPreconditioner(A), opts);
}

CylinderField unpack(std::shared_ptr<const WeightedSystem> sys, const Eigen::VectorXd& free_values,
                     SolverDiagnostics diag) {
    CylinderField U;
    const int nx = sys->nx();
    const int M = sys->levels();
    U.values = Eigen::MatrixXd::Zero(sys->base.grid->node_count(), M + 1);
    for (int k = 0; k < M; ++k)
        for (int i = 0; i < nx; ++i) U.values(sys->base.free_nodes[i], k) = free_values[k * nx + i];
    U.diagnostics = diag;
    U.system = std::move(sys);
    return U;
}

Eigen::VectorXd pack(const WeightedSystem& sys, const CylinderField& U) {
    const int nx = sys.nx();
    Eigen::VectorXd v(sys.unknowns());
    for (int k = 0; k < sys.levels(); ++k)
        for (int i = 0; i < nx; ++i) v[k * nx + i] = U.values(sys.base.free_nodes[i], k);
    return v;
}

CylinderPoint node_point(const Grid& g, int node, double t) { return {g.x(node), g.y(node), t}; }

// Visits every term of the discrete energy: callback(midpoint, value).
template <class F>
void for_each_energy_term(const CylinderField& U, F&& visit) {
    const WeightedSystem& sys = *U.system;
    const Grid& g = *sys.base.grid;
    const auto& y = sys.cyl->y;
    const int M = sys.levels();
    const SparseMatrix& K = sys.base_full_stiffness;
    const Eigen::VectorXd w = g.weights();
    for (int col = 0; col < K.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
            const int p = static_cast<int>(it.row());
            const int q = static_cast<int>(it.col());
            if (p >= q) continue;
            const double c = -it.value();
            for (int k = 0; k <= M; ++k) {
                const double d = U.values(p, k) - U.values(q, k);
                const CylinderPoint mid{0.5 * (g.x(p) + g.x(q)), 0.5 * (g.y(p) + g.y(q)), y[k]};
                visit(mid, c * sys.my[k] * d * d);
            }
        }
    for (int p = 0; p < g.node_count(); ++p)
        for (int k = 0; k < M; ++k) {
            const double h = y[k + 1] - y[k];
            const double d = U.values(p, k) - U.values(p, k + 1);
            visit(node_point(g, p, 0.5 * (y[k] + y[k + 1])), w[p] * sys.slab[k] / (h * h) * d * d);
        }
}

}  // namespace

double weight_integral(double a, double b, double s) {
    const double e = 2.0 - 2.0 * s;
    return (std::pow(b, e) - std::pow(a, e)) / e;
}

Eigen::VectorXd CylinderGrid::slab_weights(double s) const {
    Eigen::VectorXd w(levels());
    for (int k = 0; k < levels(); ++k) w[k] = weight_integral(y[k], y[k + 1], s);
    return w;
}

Eigen::VectorXd CylinderGrid::midpoint_weights(double s) const {
    Eigen::VectorXd w(levels());
    for (int k = 0; k < levels(); ++k) w[k] = std::pow(0.5 * (y[k] + y[k + 1]), 1.0 - 2.0 * s);
    return w;
}

CylinderGrid build_cylinder(const Grid& grid, double Y, int M, double q) {
    if (M < 8) throw Error(ErrorCode::BadGrading, "cylinder needs at least 8 y-levels");
    if (!(Y > 0.0) || !std::isfinite(Y)) throw Error(ErrorCode::BadGrading, "cylinder height must be positive");
    if (!(q >= 1.0)) throw Error(ErrorCode::BadGrading, "grading exponent must be >= 1");
    CylinderGrid c;
    c.base = std::make_shared<const Grid>(grid);
    c.height = Y;
    c.grading = q;
    c.y.resize(M + 1);
    for (int k = 0; k <= M; ++k) c.y[k] = Y * std::pow(static_cast<double>(k) / M, q);
    c.y[M] = Y;
    return c;
}

double default_height(double lambda1) { return 8.0 / std::sqrt(lambda1); }

WeightedSystem assemble_weighted(const CylinderGrid& cyl, const BoundaryPartition& part, double s) {
    WeightedSystem sys;
    sys.cyl = std::make_shared<const CylinderGrid>(cyl);
    sys.base = assemble(*cyl.base, part);
    sys.base_full_stiffness = assemble_full_stiffness(*cyl.base);
    sys.s = FracParams::make(s, cyl.base->domain.dim()).s;
    sys.kappa = kappa_s(s);

    const int M = cyl.levels();
    const auto& y = cyl.y;
    sys.slab = cyl.slab_weights(s);
    sys.my = Eigen::VectorXd::Zero(M + 1);
    sys.ky_diag = Eigen::VectorXd::Zero(M + 1);
    sys.ky_off = Eigen::VectorXd::Zero(M);
    for (int k = 0; k < M; ++k) {
        const double a = y[k];
        const double b = y[k + 1];
        const double h = b - a;
        const double W = sys.slab[k];
        const double Z = first_moment(a, b, s);
        sys.my[k] += (b * W - Z) / h;
        sys.my[k + 1] += (Z - a * W) / h;
        sys.ky_diag[k] += W / (h * h);
        sys.ky_diag[k + 1] += W / (h * h);
        sys.ky_off[k] = -W / (h * h);
    }

    const int nx = sys.nx();
    const SparseMatrix& Kx = sys.base.K;
    const Eigen::VectorXd& Mx = sys.base.M;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(M) * (Kx.nonZeros() + 3 * nx));
    for (int k = 0; k < M; ++k) {
        for (int col = 0; col < Kx.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(Kx, col); it; ++it)
                t.emplace_back(k * nx + it.row(), k * nx + it.col(), it.value() * sys.my[k]);
        for (int i = 0; i < nx; ++i) {
            t.emplace_back(k * nx + i, k * nx + i, Mx[i] * sys.ky_diag[k]);
            if (k + 1 < M) {
                t.emplace_back(k * nx + i, (k + 1) * nx + i, Mx[i] * sys.ky_off[k]);
                t.emplace_back((k + 1) * nx + i, k * nx + i, Mx[i] * sys.ky_off[k]);
            }
        }
    }
    sys.A.resize(sys.unknowns(), sys.unknowns());
    sys.A.setFromTriplets(t.begin(), t.end());
    sys.A.makeCompressed();
    return sys;
}

CylinderField solve_extension(std::shared_ptr<const WeightedSystem> sys, const GridFunction& f,
                              const CgOptions& opts) {
    if (f.size() != sys->base.grid->node_count())
        throw Error(ErrorCode::BasisMismatch, "load does not match the base grid");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sys->unknowns());
    const Eigen::VectorXd ff = sys->base.restrict(f);
    b.head(sys->nx()) = sys->kappa * sys->base.M.cwiseProduct(ff);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys->unknowns());
    const SolverDiagnostics diag = pcg(sys->A, b, x, opts);
    return unpack(std::move(sys), x, diag);
}

CylinderField extend(std::shared_ptr<const WeightedSystem> sys, const GridFunction& u,
                     const CgOptions& opts) {
    const Grid& g = *sys->base.grid;
    if (u.size() != g.node_count())
        throw Error(ErrorCode::BasisMismatch, "trace does not match the base grid");
    const double scale = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
    for (int k = 0; k < g.node_count(); ++k)
        if (g.is_eliminated(k) && std::abs(u[k]) > 1e-12 * scale)
            throw Error(ErrorCode::InvalidPartition, "extension data must vanish on Dirichlet nodes");

    const int nx = sys->nx();
    const int nI = sys->unknowns() - nx;
    const Eigen::VectorXd u0 = sys->base.restrict(u);
    const SparseMatrix AII = sys->A.bottomRightCorner(nI, nI);
    const SparseMatrix AI0 = sys->A.block(nx, 0, nI, nx);
    const Eigen::VectorXd b = -(AI0 * u0);
    Eigen::VectorXd xI = Eigen::VectorXd::Zero(nI);
    const SolverDiagnostics diag = pcg(AII, b, xI, opts);

    Eigen::VectorXd x(sys->unknowns());
    x.head(nx) = u0;
    x.tail(nI) = xI;
    return unpack(std::move(sys), x, diag);
}

CylinderField extend(const GridFunction& u, const CylinderGrid& cyl, const BoundaryPartition& part,
                     double s) {
    auto sys = std::make_shared<const WeightedSystem>(assemble_weighted(cyl, part, s));
    return extend(sys, u);
}

GridFunction fractional_flux(const CylinderField& U) {
    const WeightedSystem& sys = *U.system;
    const int nx = sys.nx();
    Eigen::VectorXd u0(nx), u1(nx);
    for (int i = 0; i < nx; ++i) {
        u0[i] = U.values(sys.base.free_nodes[i], 0);
        u1[i] = U.values(sys.base.free_nodes[i], 1);
    }
    const Eigen::VectorXd r = sys.my[0] * (sys.base.K * u0) +
                              sys.base.M.cwiseProduct(sys.ky_diag[0] * u0 + sys.ky_off[0] * u1);
    return sys.base.prolong(r.cwiseQuotient(sys.base.M) / sys.kappa);
}

WeightedEnergy weighted_energy(const CylinderField& U) {
    const Eigen::VectorXd v = pack(*U.system, U);
    WeightedEnergy e;
    e.raw = v.dot(U.system->A * v);
    e.scaled = e.raw / U.system->kappa;
    return e;
}

double distance(const CylinderPoint& a, const CylinderPoint& b, int dim) {
    const double dx = a.x - b.x;
    const double dy = dim == 1 ? 0.0 : a.y - b.y;
    const double dt = a.t - b.t;
    return std::sqrt(dx * dx + dy * dy + dt * dt);
}

double local_energy(const CylinderField& U, const CylinderPoint& Z, double r) {
    const int dim = U.system->base.grid->domain.dim();
    double acc = 0.0;
    for_each_energy_term(U, [&](const CylinderPoint& mid, double value) {
        if (distance(mid, Z, dim) <= r) acc += value;
    });
    return acc;
}

double local_weighted_l2(const CylinderField& U, const CylinderPoint& Z, double r) {
    const WeightedSystem& sys = *U.system;
    const Grid& g = *sys.base.grid;
    const Eigen::VectorXd w = g.weights();
    const int dim = g.domain.dim();
    double acc = 0.0;
    for (int p = 0; p < g.node_count(); ++p)
        for (int k = 0; k <= sys.levels(); ++k)
            if (distance(node_point(g, p, sys.cyl->y[k]), Z, dim) <= r)
                acc += w[p] * sys.my[k] * U.values(p, k) * U.values(p, k);
    return acc;
}

double caccioppoli_ratio(const CylinderField& U, const CylinderPoint& Z, double rho, double r) {
    if (!(rho > 0.0 && rho < r)) throw Error(ErrorCode::EmptyBall, "need 0 < rho < r");
    const double l2 = local_weighted_l2(U, Z, r);
    if (l2 <= 0.0) return 0.0;
    return local_energy(U, Z, rho) * (r - rho) * (r - rho) / l2;
}

}  // namespace fracmix
