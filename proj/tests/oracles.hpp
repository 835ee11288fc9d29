#pragma once

// Independent reference solutions used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double pi = 3.141592653589793;

/// psi_s solving psi'' + (1-2s)/t psi' = psi, psi(0) = 1, psi(inf) = 0.
///
/// The two Frobenius solutions (regular, and t^{2s} times a regular series)
/// are started from their series at a small t0 and integrated with classical
/// RK4; the decaying combination is fixed by cancelling growth at t = T.
class PsiProfile {
public:
    explicit PsiProfile(double s, double T = 18.0, double step = 2e-4) : s_(s), t0_(1e-3), step_(step) {
        const int steps = static_cast<int>(std::ceil((T - t0_) / step_));
        a_.reserve(steps + 1);
        b_.reserve(steps + 1);
        State a = series(t0_, 0.0);
        State b = series(t0_, 2.0 * s_);
        a_.push_back(a);
        b_.push_back(b);
        double t = t0_;
        for (int k = 0; k < steps; ++k) {
            a = rk4(a, t);
            b = rk4(b, t);
            t += step_;
            a_.push_back(a);
            b_.push_back(b);
        }
        c_ = -a_.back().v / b_.back().v;
    }

    double operator()(double t) const {
        if (t <= t0_) {
            const State a = series(t, 0.0);
            const State b = series(t, 2.0 * s_);
            return a.v + c_ * b.v;
        }
        const double u = (t - t0_) / step_;
        const std::size_t k = std::min(static_cast<std::size_t>(u), a_.size() - 2);
        const double w = u - static_cast<double>(k);
        const double lo = a_[k].v + c_ * b_[k].v;
        const double hi = a_[k + 1].v + c_ * b_[k + 1].v;
        return (1.0 - w) * lo + w * hi;
    }

private:
    struct State {
        double v = 0.0;
        double d = 0.0;
    };

    // t^r sum_k c_k t^{2k} with c_{k+1} = c_k / ((r + 2k + 2)(r + 2k + 2 - 2s)).
    State series(double t, double r) const {
        State out;
        double c = 1.0;
        for (int k = 0; k < 40; ++k) {
            const double e = r + 2.0 * k;
            out.v += c * std::pow(t, e);
            if (e > 0.0) out.d += c * e * std::pow(t, e - 1.0);
            c /= (e + 2.0) * (e + 2.0 - 2.0 * s_);
        }
        return out;
    }

    State rhs(const State& x, double t) const { return {x.d, x.v - (1.0 - 2.0 * s_) / t * x.d}; }

    State rk4(const State& x, double t) const {
        const double h = step_;
        const State k1 = rhs(x, t);
        const State k2 = rhs({x.v + 0.5 * h * k1.v, x.d + 0.5 * h * k1.d}, t + 0.5 * h);
        const State k3 = rhs({x.v + 0.5 * h * k2.v, x.d + 0.5 * h * k2.d}, t + 0.5 * h);
        const State k4 = rhs({x.v + h * k3.v, x.d + h * k3.d}, t + h);
        return {x.v + h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v), x.d + h / 6.0 * (k1.d + 2 * k2.d + 2 * k3.d + k4.d)};
    }

    double s_;
    double t0_;
    double step_;
    double c_ = 0.0;
    std::vector<State> a_;
    std::vector<State> b_;
};

/// Closed form 2^{1-s}/Gamma(s) t^s K_s(t), used to check PsiProfile.
inline double psi_bessel(double s, double t) {
    if (t == 0.0) return 1.0;
    return std::pow(2.0, 1.0 - s) / std::tgamma(s) * std::pow(t, s) * std::cyl_bessel_k(s, t);
}

/// Smallest j^2 + k^2 values, sorted (Dirichlet square (0, pi)^2).
inline std::vector<double> dirichlet_square_eigenvalues(int count) {
    std::vector<double> v;
    for (int j = 1; j <= 40; ++j)
        for (int k = 1; k <= 40; ++k) v.push_back(j * j + k * k);
    std::sort(v.begin(), v.end());
    v.resize(count);
    return v;
}

/// Brute-force vanishing threshold for the De Giorgi recursions.
///
/// For a candidate d, the maximal phi satisfying the recursion with equality
/// is followed in log space for `steps` steps; d is too small exactly when
/// that sequence turns upward. Bisection over log d returns the smallest
/// d whose sequence never grows.
struct RecursionOracle {
    int steps = 200;

    double level(double C0, double a, double b, double phi0) const {
        return bisect([&](double d) {
            double L = std::log(phi0);
            for (int n = 1; n <= steps; ++n) {
                const double next = std::log(C0) - a * (std::log(d) - n * std::log(2.0)) + b * L;
                if (next > L) return true;
                if (!std::isfinite(next)) return false;
                L = next;
            }
            return false;
        });
    }

    double level_radius(double C0, double alpha, double gamma, double mu, double phi0, double r0, double ell) const {
        return bisect([&](double d) {
            double L = std::log(phi0);
            for (int n = 1; n <= steps; ++n) {
                const double dk = std::log(ell * d) - n * std::log(2.0);
                const double dr = std::log(ell * r0) - n * std::log(2.0);
                const double next = std::log(C0) - alpha * dk - gamma * dr + mu * L;
                if (next > L) return true;
                if (!std::isfinite(next)) return false;
                L = next;
            }
            return false;
        });
    }

private:
    template <class Grows>
    static double bisect(Grows grows) {
        double lo = std::log(1e-30);
        double hi = std::log(1e30);
        while (!grows(std::exp(lo))) lo -= 10.0;
        while (grows(std::exp(hi))) hi += 10.0;
        for (int it = 0; it < 400 && hi - lo > 4e-16 * std::max(1.0, std::abs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (grows(std::exp(mid)))
                lo = mid;
            else
                hi = mid;
        }
        return std::exp(hi);
    }
};

}  // namespace oracle
