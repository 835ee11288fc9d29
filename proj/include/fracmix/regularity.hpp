#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracmix/extension.hpp"

namespace fracmix {

/// Super- and sub-level set measures of a grid function at threshold k.
struct LevelSetStats {
    double k = 0.0;
    double plus = 0.0;   // |{u > k}|
    double minus = 0.0;  // |{u < k}|
};

/// Trapezoidal cell counting over the base grid.
LevelSetStats level_set_measure(const GridFunction& u, const Grid& grid, double k);

struct WeightedLevelSet {
    double k = 0.0;
    double plus = 0.0;   // |A_+(k, r)|_{y^{1-2s}}
    double minus = 0.0;  // |A_-(k, r)|_{y^{1-2s}}
    double ball = 0.0;   // |C cap B_r(Z)|_{y^{1-2s}}
};

/// Weighted level sets of U inside B_r(Z). Each (base cell, y-slab) pair is
/// clipped to the ball's y-range, weighted by the exact slab integral and
/// admitted when its base node lies in the ball's cross-section at the clipped
/// slab midpoint. The cell value is the mean of its two level values.
WeightedLevelSet weighted_levelset(const CylinderField& U, double k, const CylinderPoint& Z, double r);

/// ||u||_inf / (||f||_p |Omega|^{2s/N - 1/p}); 0 when f vanishes.
/// Throws ExponentViolation when p <= N / (2s).
double verify_linfty_bound(const GridFunction& u, const GridFunction& f, const Grid& grid, double s,
                           double p);

/// omega(rho) = sup - inf over the nodes within each radius, radii descending.
struct OscillationProfile {
    CylinderPoint center;
    std::vector<double> radii;
    std::vector<double> omega;
};

/// Profile of a base-grid function around (Z.x, Z.y). Throws EmptyBall if a
/// ball holds no node and ConfigError unless radii are positive and descending.
OscillationProfile oscillation_profile(const GridFunction& u, const Grid& grid,
                                       const CylinderPoint& Z, const std::vector<double>& radii);

/// Profile over the closed cylinder (trace level included).
OscillationProfile oscillation_profile(const CylinderField& U, const CylinderPoint& Z,
                                       const std::vector<double>& radii);

struct HolderFit {
    bool degenerate = false;  // fewer than two positive omegas: tau undefined
    double tau = 0.0;         // least-squares slope of log omega vs log rho
    double r_squared = 0.0;
    std::vector<double> ratios;  // omega(rho_{i+1}) / omega(rho_i)
    double eta_bar = 0.0;        // max ratio
    int points = 0;              // radii used in the fit
};

/// Throws ConfigError with fewer than 4 radii.
HolderFit fit_holder_exponent(const OscillationProfile& profile);

inline constexpr std::uint64_t holder_seed = 0xF7AC;

/// max |u(x) - u(y)| / |x - y|^gamma over node pairs. Exhaustive up to 2e6
/// pairs; beyond that every pair within 4h plus 1e6 stratified random pairs.
double holder_seminorm(const GridFunction& u, const Grid& grid, double gamma,
                       std::uint64_t seed = holder_seed);

/// phi(h) <= C0 / (h - k)^a phi(k)^b, b > 1.
struct LevelDecayParams {
    double C0 = 1.0;
    double a = 1.0;
    double b = 2.0;
    double phi0 = 1.0;
};

/// phi(h, rho) <= C0 / ((h - k)^alpha (r - rho)^gamma) phi(k, r)^mu, mu > 1.
struct LevelRadiusDecayParams {
    double C0 = 1.0;
    double alpha = 2.0;
    double gamma = 2.0;
    double mu = 2.0;
    double phi0 = 1.0;
    double r0 = 1.0;
    double ell = 0.5;
};

/// d = (2^{ab/(b-1)} C0 phi(k0)^{b-1})^{1/a}. Throws BadExponent for b <= 1.
double lemma_B1_threshold(const LevelDecayParams& p);

struct ThresholdWithShrink {
    double d = 0.0;
    double ell = 0.5;
};

/// d = (C0 2^{(alpha+gamma) mu/(mu-1)} phi^{mu-1} / (ell^{alpha+gamma} r0^gamma))^{1/alpha}.
ThresholdWithShrink lemma_C7_threshold(const LevelRadiusDecayParams& p);

/// log phi(k_n) along k_n = k0 + d (1 - 2^-n) when the recursion holds with equality.
std::vector<double> level_decay_sequence(const LevelDecayParams& p, double d, int steps);

/// Same along k_n = k0 + ell d (1 - 2^-n), r_n = r0 (1 - ell (1 - 2^-n)).
std::vector<double> level_radius_decay_sequence(const LevelRadiusDecayParams& p, double d, int steps);

/// Summary of a regularity study, serialized with the keys
/// gamma, tau_fit, eta_bar_fit, seminorm, linfty_ratio, levelset_table.
struct RegularityReport {
    double gamma = 0.0;
    double tau_fit = 0.0;
    double eta_bar_fit = 0.0;
    double seminorm = 0.0;
    double linfty_ratio = 0.0;
    std::vector<LevelSetStats> levelset_table;
};

nlohmann::json to_json(const RegularityReport& report);

}  // namespace fracmix
