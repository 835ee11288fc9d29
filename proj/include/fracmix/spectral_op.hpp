#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "fracmix/eigenbasis.hpp"

namespace fracmix {

/// Extension constant 2^{1-2s} Gamma(1-s) / Gamma(s).
double kappa_s(double s);

/// Fractional order and the exponents derived from it.
struct FracParams {
    double s = 0.75;
    int N = 1;
    double kappa = 0.0;
    /// True when N <= 2s: every L^r is admissible and 2*_s is undefined.
    bool subcritical = false;
    /// 2N / (N - 2s); NaN when subcritical.
    double critical_exponent = std::numeric_limits<double>::quiet_NaN();

    /// Validates 1/2 < s < 1 (ConfigError otherwise).
    static FracParams make(double s, int N);
};

/// Coefficients a_j = <u, phi_j> against a shared basis.
struct SpectralFunction {
    Eigen::VectorXd coeffs;
    std::shared_ptr<const EigenBasis> basis;

    GridFunction synthesize() const;
};

SpectralFunction project(const GridFunction& f, std::shared_ptr<const EigenBasis> basis);

/// a_j -> lambda_j^s a_j.
SpectralFunction apply_frac_laplacian(const SpectralFunction& u, double s);

/// u = sum_j lambda_j^{-s} <f, phi_j> phi_j over the whole basis.
GridFunction solve_spectral(const GridFunction& f, const EigenBasis& basis, double s);

/// (sum_j a_j^2 lambda_j^s)^{1/2}.
double hs_norm(const SpectralFunction& u, double s);

/// (sum_j a_j^2)^{1/2}, the L2 norm of the synthesized function.
double l2_norm(const SpectralFunction& u);

/// Trapezoidal L^p norm; p = infinity gives max |f|.
double lp_norm(const GridFunction& f, const Grid& grid, double p);

struct TraceConstantEstimate {
    double rayleigh = 0.0;  // min Rayleigh quotient over the sampled trials
    double upper = 0.0;     // |Omega|^{2s/N} lambda_1^s
    double critical_exponent = 0.0;
    int trials = 0;
};

/// Sampled lower estimate and provable upper bound of the trace constant.
///
/// Trials: every basis mode, 64 seeded random combinations of the first 16
/// modes, boundary-layer profiles decaying away from the Neumann boundary,
/// plus any caller-supplied grid functions. Each trial is projected onto the
/// basis before its quotient ||u||^2_{H^s} / ||u||^2_{L^{2*_s}} is taken.
/// Throws SubcriticalDimension when N <= 2s.
TraceConstantEstimate trace_constant_CD(const EigenBasis& basis, double s, int N,
                                        const std::vector<GridFunction>& extra_trials = {},
                                        unsigned long long seed = 0x7ace);

/// ||u_{J1} - u_{J2}||_inf / ||u_{J2}||_inf for the truncated spectral solutions.
double truncation_error(const GridFunction& f, const EigenBasis& basis, double s, int J1, int J2);

}  // namespace fracmix
