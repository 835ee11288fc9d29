#include "fracmix/spectral_op.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fracmix {

double kappa_s(double s) {
    return std::pow(2.0, 1.0 - 2.0 * s) * std::tgamma(1.0 - s) / std::tgamma(s);
}

FracParams FracParams::make(double s, int N) {
    if (!(s > 0.5 && s < 1.0)) {
        std::ostringstream os;
        os << "s = " << s << " must lie in (1/2, 1)";
        throw Error(ErrorCode::ConfigError, os.str());
    }
    FracParams p;
    p.s = s;
    p.N = N;
    p.kappa = kappa_s(s);
    p.subcritical = N <= 2.0 * s;
    if (!p.subcritical) p.critical_exponent = 2.0 * N / (N - 2.0 * s);
    return p;
}

GridFunction SpectralFunction::synthesize() const { return basis->vectors * coeffs; }

SpectralFunction project(const GridFunction& f, std::shared_ptr<const EigenBasis> basis) {
    if (f.size() != basis->vectors.rows()) {
        std::ostringstream os;
        os << "grid function has " << f.size() << " entries, basis expects "
           << basis->vectors.rows();
        throw Error(ErrorCode::BasisMismatch, os.str());
    }
    SpectralFunction u;
    u.coeffs = basis->vectors.transpose() * basis->mass.cwiseProduct(f);
    u.basis = std::move(basis);
    return u;
}

SpectralFunction apply_frac_laplacian(const SpectralFunction& u, double s) {
    SpectralFunction out = u;
    out.coeffs = u.coeffs.cwiseProduct(u.basis->eigenvalues.array().pow(s).matrix());
    return out;
}

GridFunction solve_spectral(const GridFunction& f, const EigenBasis& basis, double s) {
    if (f.size() != basis.vectors.rows())
        throw Error(ErrorCode::BasisMismatch, "grid function does not match basis grid");
    const Eigen::VectorXd a = basis.vectors.transpose() * basis.mass.cwiseProduct(f);
    const Eigen::VectorXd c = a.cwiseProduct(basis.eigenvalues.array().pow(-s).matrix());
    return basis.vectors * c;
}

double hs_norm(const SpectralFunction& u, double s) {
    return std::sqrt(u.coeffs.cwiseAbs2().dot(u.basis->eigenvalues.array().pow(s).matrix()));
}

double l2_norm(const SpectralFunction& u) { return u.coeffs.norm(); }

double lp_norm(const GridFunction& f, const Grid& grid, double p) {
    if (std::isinf(p)) return f.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
    if (!(p >= 1.0)) throw Error(ErrorCode::ExponentViolation, "L^p norm needs p >= 1");
    const Eigen::VectorXd w = grid.weights();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) acc += w[k] * std::pow(std::abs(f[k]), p);
    return std::pow(acc, 1.0 / p);
}

TraceConstantEstimate trace_constant_CD(const EigenBasis& basis, double s, int N,
                                        const std::vector<GridFunction>& extra_trials,
                                        unsigned long long seed) {
    const FracParams fp = FracParams::make(s, N);
    if (fp.subcritical) {
        std::ostringstream os;
        os << "N = " << N << " <= 2s = " << 2.0 * s << ": critical trace exponent undefined";
        throw Error(ErrorCode::SubcriticalDimension, os.str());
    }
    if (basis.size() == 0) throw Error(ErrorCode::BasisMismatch, "empty basis");
    const Grid& grid = *basis.grid;
    const double r = fp.critical_exponent;
    const Eigen::VectorXd lam_s = basis.eigenvalues.array().pow(s).matrix();

    TraceConstantEstimate est;
    est.critical_exponent = r;
    est.upper = std::pow(grid.domain.volume(), 2.0 * s / N) * lam_s[0];
    est.rayleigh = std::numeric_limits<double>::infinity();

    auto quotient_of_coeffs = [&](const Eigen::VectorXd& a) {
        const double num = a.cwiseAbs2().dot(lam_s);
        const GridFunction u = basis.vectors * a;
        const double den = std::pow(lp_norm(u, grid, r), 2.0);
        if (den <= 0.0) return;
        est.rayleigh = std::min(est.rayleigh, num / den);
        ++est.trials;
    };
    auto quotient_of_function = [&](const GridFunction& u) {
        quotient_of_coeffs(basis.vectors.transpose() * basis.mass.cwiseProduct(u));
    };

    for (int j = 0; j < basis.size(); ++j) quotient_of_coeffs(Eigen::VectorXd::Unit(basis.size(), j));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const int lead = std::min(basis.size(), 16);
    for (int t = 0; t < 64; ++t) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(basis.size());
        for (int j = 0; j < lead; ++j) a[j] = gauss(rng) / (1.0 + j);
        quotient_of_coeffs(a);
    }

    // Profiles concentrated along the Neumann boundary.
    std::vector<int> neumann;
    for (int k = 0; k < grid.node_count(); ++k)
        if (grid.tags[k] == NodeTag::Neumann) neumann.push_back(k);
    if (!neumann.empty()) {
        std::vector<double> dist(grid.node_count(), std::numeric_limits<double>::infinity());
        for (int k = 0; k < grid.node_count(); ++k)
            for (int b : neumann)
                dist[k] = std::min(dist[k], std::hypot(grid.x(k) - grid.x(b), grid.y(k) - grid.y(b)));
        for (double width : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            const double delta = width * grid.h();
            GridFunction u(grid.node_count());
            for (int k = 0; k < grid.node_count(); ++k)
                u[k] = grid.is_eliminated(k) ? 0.0 : std::exp(-dist[k] / delta);
            quotient_of_function(u);
        }
    }
    for (const auto& u : extra_trials) quotient_of_function(u);
    return est;
}

double truncation_error(const GridFunction& f, const EigenBasis& basis, double s, int J1, int J2) {
    if (!(J1 <= J2 && J2 <= basis.size()) || J1 < 0)
        throw Error(ErrorCode::BasisMismatch, "truncation_error needs J1 <= J2 <= basis size");
    const GridFunction u2 = solve_spectral(f, basis.truncated(J2), s);
    const GridFunction u1 = solve_spectral(f, basis.truncated(J1), s);
    const double ref = u2.cwiseAbs().maxCoeff();
    return ref > 0.0 ? (u1 - u2).cwiseAbs().maxCoeff() / ref : 0.0;
}

}  // namespace fracmix
