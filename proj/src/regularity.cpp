#include "fracmix/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "fracmix/spectral_op.hpp"

namespace fracmix {

namespace {

constexpr double ball_slack = 1e-9;

void check_radii(const std::vector<double>& radii) {
    if (radii.empty()) throw Error(ErrorCode::ConfigError, "no radii given");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw Error(ErrorCode::ConfigError, "radii must be positive");
        if (i > 0 && !(radii[i] < radii[i - 1]))
            throw Error(ErrorCode::ConfigError, "radii must be strictly descending");
    }
}

double base_distance(const Grid& g, int node, const CylinderPoint& Z) {
    const double dx = g.x(node) - Z.x;
    const double dy = g.domain.dim() == 1 ? 0.0 : g.y(node) - Z.y;
    return std::sqrt(dx * dx + dy * dy);
}

double pair_ratio(const GridFunction& u, const Grid& g, int p, int q, double gamma) {
    const double dx = g.x(p) - g.x(q);
    const double dy = g.y(p) - g.y(q);
    const double d = std::sqrt(dx * dx + dy * dy);
    return d > 0.0 ? std::abs(u[p] - u[q]) / std::pow(d, gamma) : 0.0;
}

}  // namespace

LevelSetStats level_set_measure(const GridFunction& u, const Grid& grid, double k) {
    const Eigen::VectorXd w = grid.weights();
    LevelSetStats st;
    st.k = k;
    for (int p = 0; p < grid.node_count(); ++p) {
        if (u[p] > k) st.plus += w[p];
        if (u[p] < k) st.minus += w[p];
    }
    return st;
}

WeightedLevelSet weighted_levelset(const CylinderField& U, double k, const CylinderPoint& Z, double r) {
    const WeightedSystem& sys = *U.system;
    const Grid& g = *sys.base.grid;
    const auto& y = sys.cyl->y;
    const Eigen::VectorXd w = g.weights();
    WeightedLevelSet out;
    out.k = k;
    for (int slab = 0; slab < sys.levels(); ++slab) {
        const double a = std::max(y[slab], Z.t - r);
        const double b = std::min(y[slab + 1], Z.t + r);
        if (!(b > a)) continue;
        const double W = weight_integral(a, b, sys.s);
        const double mid = 0.5 * (a + b) - Z.t;
        const double cross = std::sqrt(std::max(0.0, r * r - mid * mid));
        for (int p = 0; p < g.node_count(); ++p) {
            if (base_distance(g, p, Z) > cross * (1.0 + ball_slack)) continue;
            const double vol = w[p] * W;
            const double v = 0.5 * (U.values(p, slab) + U.values(p, slab + 1));
            out.ball += vol;
            if (v > k) out.plus += vol;
            if (v < k) out.minus += vol;
        }
    }
    return out;
}

double verify_linfty_bound(const GridFunction& u, const GridFunction& f, const Grid& grid, double s,
                           double p) {
    const int N = grid.domain.dim();
    if (!(p > N / (2.0 * s))) {
        std::ostringstream os;
        os << "p = " << p << " must exceed N/(2s) = " << N / (2.0 * s);
        throw Error(ErrorCode::ExponentViolation, os.str());
    }
    const double fp = lp_norm(f, grid, p);
    if (fp == 0.0) return 0.0;
    const double scale = std::isinf(p) ? std::pow(grid.domain.volume(), 2.0 * s / N)
                                       : std::pow(grid.domain.volume(), 2.0 * s / N - 1.0 / p);
    return u.cwiseAbs().maxCoeff() / (fp * scale);
}

OscillationProfile oscillation_profile(const GridFunction& u, const Grid& grid,
                                       const CylinderPoint& Z, const std::vector<double>& radii) {
    check_radii(radii);
    OscillationProfile prof;
    prof.center = Z;
    prof.radii = radii;
    for (double rho : radii) {
        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (int p = 0; p < grid.node_count(); ++p)
            if (base_distance(grid, p, Z) <= rho * (1.0 + ball_slack)) {
                hi = std::max(hi, u[p]);
                lo = std::min(lo, u[p]);
            }
        if (hi < lo) {
            std::ostringstream os;
            os << "ball of radius " << rho << " contains no grid node";
            throw Error(ErrorCode::EmptyBall, os.str());
        }
        prof.omega.push_back(hi - lo);
    }
    return prof;
}

OscillationProfile oscillation_profile(const CylinderField& U, const CylinderPoint& Z,
                                       const std::vector<double>& radii) {
    check_radii(radii);
    const WeightedSystem& sys = *U.system;
    const Grid& g = *sys.base.grid;
    const auto& y = sys.cyl->y;
    OscillationProfile prof;
    prof.center = Z;
    prof.radii = radii;
    for (double rho : radii) {
        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (int p = 0; p < g.node_count(); ++p) {
            const double dx = base_distance(g, p, Z);
            if (dx > rho * (1.0 + ball_slack)) continue;
            for (int k = 0; k <= sys.levels(); ++k) {
                const double dt = y[k] - Z.t;
                if (std::sqrt(dx * dx + dt * dt) > rho * (1.0 + ball_slack)) continue;
                hi = std::max(hi, U.values(p, k));
                lo = std::min(lo, U.values(p, k));
            }
        }
        if (hi < lo) {
            std::ostringstream os;
            os << "ball of radius " << rho << " contains no cylinder node";
            throw Error(ErrorCode::EmptyBall, os.str());
        }
        prof.omega.push_back(hi - lo);
    }
    return prof;
}

HolderFit fit_holder_exponent(const OscillationProfile& profile) {
    if (profile.radii.size() < 4 || profile.omega.size() != profile.radii.size())
        throw Error(ErrorCode::ConfigError, "Hoelder fit needs at least 4 radii");
    HolderFit fit;
    const double top = *std::max_element(profile.omega.begin(), profile.omega.end());
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < profile.radii.size(); ++i)
        if (profile.omega[i] > 1e-14 * top && top > 0.0) {
            lx.push_back(std::log(profile.radii[i]));
            ly.push_back(std::log(profile.omega[i]));
        }
    for (std::size_t i = 0; i + 1 < profile.omega.size(); ++i)
        if (profile.omega[i] > 0.0) fit.ratios.push_back(profile.omega[i + 1] / profile.omega[i]);
    if (!fit.ratios.empty()) fit.eta_bar = *std::max_element(fit.ratios.begin(), fit.ratios.end());

    fit.points = static_cast<int>(lx.size());
    if (lx.size() < 2) {
        fit.degenerate = true;
        return fit;
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.tau = sxy / sxx;
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

double holder_seminorm(const GridFunction& u, const Grid& grid, double gamma, std::uint64_t seed) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw Error(ErrorCode::ExponentViolation, "Hoelder exponent must lie in (0, 1)");
    const int n = grid.node_count();
    const double pairs = 0.5 * static_cast<double>(n) * (n - 1);
    double H = 0.0;
    if (grid.domain.dim() == 1 || pairs <= 2e6) {
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) H = std::max(H, pair_ratio(u, grid, p, q, gamma));
        return H;
    }

    const int reach = 4;
    for (int p = 0; p < n; ++p) {
        const int i = grid.ix(p);
        const int j = grid.iy(p);
        for (int dj = 0; dj <= reach; ++dj)
            for (int di = -reach; di <= reach; ++di) {
                if (dj == 0 && di <= 0) continue;
                if (di * di + dj * dj > reach * reach) continue;
                const int ii = i + di;
                const int jj = j + dj;
                if (ii < 0 || ii >= grid.n || jj >= grid.n) continue;
                H = std::max(H, pair_ratio(u, grid, p, grid.index(ii, jj), gamma));
            }
    }
    std::mt19937_64 rng(seed);
    const int strata = 1000;
    const int per_stratum = 1000;
    std::uniform_int_distribution<int> any(0, n - 1);
    for (int st = 0; st < strata; ++st) {
        const int lo = static_cast<int>(static_cast<long long>(st) * n / strata);
        const int hi = std::max(lo, static_cast<int>(static_cast<long long>(st + 1) * n / strata) - 1);
        std::uniform_int_distribution<int> first(lo, hi);
        for (int t = 0; t < per_stratum; ++t) H = std::max(H, pair_ratio(u, grid, first(rng), any(rng), gamma));
    }
    return H;
}

double lemma_B1_threshold(const LevelDecayParams& p) {
    if (!(p.b > 1.0)) throw Error(ErrorCode::BadExponent, "level decay needs b > 1");
    if (!(p.a > 0.0) || !(p.C0 > 0.0) || !(p.phi0 >= 0.0))
        throw Error(ErrorCode::BadExponent, "level decay needs a, C0 > 0 and phi(k0) >= 0");
    if (p.phi0 == 0.0) return 0.0;
    const double da = std::pow(2.0, p.a * p.b / (p.b - 1.0)) * p.C0 * std::pow(p.phi0, p.b - 1.0);
    return std::pow(da, 1.0 / p.a);
}

ThresholdWithShrink lemma_C7_threshold(const LevelRadiusDecayParams& p) {
    if (!(p.mu > 1.0)) throw Error(ErrorCode::BadExponent, "level/radius decay needs mu > 1");
    if (!(p.alpha > 0.0) || !(p.gamma > 0.0) || !(p.C0 > 0.0) || !(p.r0 > 0.0) || !(p.phi0 >= 0.0))
        throw Error(ErrorCode::BadExponent, "level/radius decay needs positive constants");
    if (!(p.ell > 0.0 && p.ell < 1.0)) throw Error(ErrorCode::BadExponent, "ell must lie in (0, 1)");
    ThresholdWithShrink out;
    out.ell = p.ell;
    if (p.phi0 == 0.0) return out;
    const double ag = p.alpha + p.gamma;
    const double da = p.C0 * std::pow(2.0, ag * p.mu / (p.mu - 1.0)) * std::pow(p.phi0, p.mu - 1.0) /
                      (std::pow(p.ell, ag) * std::pow(p.r0, p.gamma));
    out.d = std::pow(da, 1.0 / p.alpha);
    return out;
}

std::vector<double> level_decay_sequence(const LevelDecayParams& p, double d, int steps) {
    std::vector<double> L{std::log(p.phi0)};
    for (int n = 0; n < steps; ++n) {
        const double gap = d * std::ldexp(1.0, -(n + 1));
        L.push_back(std::log(p.C0) - p.a * std::log(gap) + p.b * L.back());
    }
    return L;
}

std::vector<double> level_radius_decay_sequence(const LevelRadiusDecayParams& p, double d, int steps) {
    std::vector<double> L{std::log(p.phi0)};
    for (int n = 0; n < steps; ++n) {
        const double dk = p.ell * d * std::ldexp(1.0, -(n + 1));
        const double dr = p.r0 * p.ell * std::ldexp(1.0, -(n + 1));
        L.push_back(std::log(p.C0) - p.alpha * std::log(dk) - p.gamma * std::log(dr) + p.mu * L.back());
    }
    return L;
}

nlohmann::json to_json(const RegularityReport& report) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : report.levelset_table)
        table.push_back({{"k", row.k}, {"plus", row.plus}, {"minus", row.minus}});
    return {{"gamma", report.gamma},
            {"tau_fit", report.tau_fit},
            {"eta_bar_fit", report.eta_bar_fit},
            {"seminorm", report.seminorm},
            {"linfty_ratio", report.linfty_ratio},
            {"levelset_table", table}};
}

}  // namespace fracmix
