#pragma once

#include <random>
#include <string>
#include <variant>

namespace netsub {

/// ln(eps) ~ Normal(location, scale^2).
struct LogNormalShock {
    double location = 0.0;
    double scale = 1.0;
};

/// Degenerate distribution, mostly for tests and hand-built instances.
struct PointMassShock {
    double value = 1.0;
};

/// Per-link communication-shock distribution F_ij. Support is (0, inf).
class ShockDistribution {
public:
    using Family = std::variant<LogNormalShock, PointMassShock>;

    ShockDistribution() : family_(LogNormalShock{}) {}
    ShockDistribution(LogNormalShock s);  // NOLINT(google-explicit-constructor)
    ShockDistribution(PointMassShock s);  // NOLINT(google-explicit-constructor)

    static ShockDistribution lognormal(double location, double scale) {
        return ShockDistribution(LogNormalShock{location, scale});
    }
    static ShockDistribution point_mass(double value) {
        return ShockDistribution(PointMassShock{value});
    }

    const Family& family() const { return family_; }
    const LogNormalShock* as_lognormal() const { return std::get_if<LogNormalShock>(&family_); }
    const PointMassShock* as_point_mass() const { return std::get_if<PointMassShock>(&family_); }
    std::string family_name() const;

    double cdf(double eps) const;
    double pdf(double eps) const;
    /// Inverse CDF on (0, 1).
    double quantile(double p) const;
    double mean() const;

    template <class Rng>
    double sample(Rng& rng) const {
        if (auto* ln = as_lognormal()) {
            std::lognormal_distribution<double> dist(ln->location, ln->scale);
            return dist(rng);
        }
        return std::get<PointMassShock>(family_).value;
    }

    bool operator==(const ShockDistribution& o) const;

private:
    Family family_;
};

/// Standard normal helpers shared by the quadrature code.
double standard_normal_pdf(double z);
double standard_normal_cdf(double z);
double standard_normal_quantile(double p);

}  // namespace netsub
